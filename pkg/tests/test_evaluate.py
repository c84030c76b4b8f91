import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import graphs
from genhop.data import FIXTURE_FOCUS, builtin_fixture
from genhop.evaluate import METRIC_COLUMNS, distinguish_report, embed_dataset, linear_probe, run_experiment
from genhop.graph import complete_graph, cycle_graph, from_edge_list, permute
from genhop.model import ModelConfig, forward_embed, init_params
from genhop.wl import wl_distinguish

CFG = ModelConfig(hidden_dim=8, layers=2, hops=3, pe_dim=2)
TREE = from_edge_list(7, [(0, 1), (1, 3), (1, 4), (2, 6), (3, 6), (4, 5)])


def test_embed_single_graph():
    emb = embed_dataset([cycle_graph(5)], init_params(CFG, 0))
    assert emb.shape == (1, CFG.embedding_dim)


def test_embed_duplicate_rows_identical():
    emb = embed_dataset([TREE, cycle_graph(4), TREE], init_params(CFG, 0))
    assert emb[0].tobytes() == emb[2].tobytes()


def test_embed_permuted_copy():
    params = init_params(CFG, 1)
    perm = np.array([3, 0, 6, 1, 5, 2, 4])
    emb = embed_dataset([TREE, permute(TREE, perm)], params)
    assert np.abs(emb[0] - emb[1]).max() <= 1e-6


def test_embed_chunking_does_not_change_rows():
    params = init_params(CFG, 2)
    gs = [cycle_graph(m) for m in range(3, 10)]
    assert np.allclose(embed_dataset(gs, params, chunk=2), embed_dataset(gs, params, chunk=64), atol=1e-12)


def test_probe_separable_blobs():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-5, 1, (50, 3)), rng.normal(5, 1, (50, 3))])
    y = np.repeat([0, 1], 50)
    res = linear_probe(X, y, folds=10, seed=0)
    assert res.mean == 1.0
    assert len(res.fold_accuracies) == 10


def test_probe_chance_level():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(500, 5))
    y = rng.permutation(np.repeat(np.arange(10), 50))
    res = linear_probe(X, y, folds=10, seed=0)
    assert abs(res.mean - 0.10) <= 0.05


def test_probe_folds_partition_rows():
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(60, 4)), np.repeat(np.arange(3), 20)
    res = linear_probe(X, y, folds=5, seed=3)
    assert len(res.fold_accuracies) == 5
    tests = np.concatenate([t for _, t in res.folds])
    assert sorted(tests.tolist()) == list(range(60))
    for train, test in res.folds:
        assert not set(train) & set(test)
    assert abs(res.mean - np.mean(res.fold_accuracies)) <= 1e-12
    assert res.confusion.sum() == 60


def test_probe_is_seeded():
    rng = np.random.default_rng(4)
    X, y = rng.normal(size=(40, 3)), np.repeat([0, 1], 20)
    assert linear_probe(X, y, 4, seed=1).fold_accuracies == linear_probe(X, y, 4, seed=1).fold_accuracies


def test_probe_rejects_degenerate_stratification():
    with pytest.raises(ValueError, match="fewer than"):
        linear_probe(np.zeros((12, 2)), [0] * 9 + [1] * 3, folds=5)
    with pytest.raises(ValueError):
        linear_probe(np.zeros((12, 2)), [0, 1] * 6, folds=1)


SPEC = {
    "run_id": "toy",
    "dataset": {"source": "fixture", "name": "triangles_vs_hexagon", "copies": 6},
    "model": {"hidden_dim": 8, "layers": 2, "pe_dim": 2},
    "train": {"epochs": 2, "batch_size": 6},
    "seeds": [0],
    "folds": 3,
}


def test_run_experiment_schema_and_files(tmp_path):
    res = run_experiment(SPEC, tmp_path)
    rows = list(csv.DictReader(io.StringIO(res.csv_text())))
    assert list(rows[0]) == METRIC_COLUMNS
    assert len(rows) == 3 and {r["fold"] for r in rows} == {"0", "1", "2"}
    assert all(r["mean"] == rows[0]["mean"] for r in rows)
    assert (tmp_path / "toy_metrics.csv").read_text() == res.csv_text()
    assert len(res.checkpoints) == 1 and res.checkpoints[0].exists()
    assert (tmp_path / "toy_full_s0_loss.csv").exists()


def test_run_experiment_reproducible():
    assert run_experiment(SPEC).csv_text() == run_experiment(SPEC).csv_text()


def test_run_experiment_alpha_zero_matches_contrastive_only():
    a = run_experiment({**SPEC, "alphas": [0.0]})
    silent = {**SPEC, "train": {**SPEC["train"], "lam_inv": 0.0, "lam_var": 0.0, "lam_cov": 0.0}}
    b = run_experiment({**silent, "alphas": [0.005]})
    acc = lambda r: [(row["fold"], row["accuracy"]) for row in r.rows]
    assert acc(a) == acc(b)
    assert [x.mean_loss for x in a.traces["full@alpha=0/0"]] == [x.mean_loss for x in b.traces["full@alpha=0.005/0"]]


def test_run_experiment_variants_and_sweep():
    res = run_experiment({**SPEC, "variants": ["pos_only", "cw_only"], "alphas": [0.0, 0.01]})
    assert {r["variant"] for r in res.rows} == {
        "pos_only@alpha=0", "pos_only@alpha=0.01", "cw_only@alpha=0", "cw_only@alpha=0.01"}


def test_run_experiment_bad_spec():
    with pytest.raises(ValueError, match="dataset"):
        run_experiment({"run_id": "x"})
    with pytest.raises(ValueError, match="unknown model"):
        run_experiment({**SPEC, "model": {"widht": 3}})
    with pytest.raises(ValueError, match="unknown dataset source"):
        run_experiment({**SPEC, "dataset": {"source": "tu"}})


def test_pos_only_and_cw_only_embeddings_differ():
    g1, g2 = builtin_fixture("triangles_vs_hexagon")
    out = {}
    for name in ("pos_only", "cw_only"):
        cfg = ModelConfig.variant(name, hidden_dim=8, layers=2, pe_dim=2)
        out[name] = embed_dataset([g1, g2], init_params(cfg, 0))
    assert out["pos_only"].shape != out["cw_only"].shape or not np.array_equal(out["pos_only"], out["cw_only"])
    assert np.abs(out["cw_only"][0] - out["cw_only"][1]).max() > 1e-6


# distinguish report -----------------------------------------------------------------

def test_report_triangles_vs_hexagon():
    rep = distinguish_report(*builtin_fixture("triangles_vs_hexagon"), K=3)
    assert rep.verdicts["1-WL"] is False
    assert rep.verdicts["closed-walk"] is True
    assert rep.first_separating == "closed-walk"
    assert sum(d > 1e-6 for d in rep.embedding_distances) >= 9
    assert "closed-walk,different" in rep.table()


def test_report_isomorphic_pair_is_all_same():
    rep = distinguish_report(complete_graph(3), permute(complete_graph(3), [1, 2, 0]))
    assert not any(rep.verdicts.values())
    assert rep.first_separating is None
    assert max(rep.embedding_distances) <= 1e-9


def test_report_fig4_focus_nodes():
    g1, g2 = builtin_fixture("fig4_pair")
    rep = distinguish_report(g1, g2, K=3, focus=FIXTURE_FOCUS["fig4_pair"])
    assert rep.verdicts["1-WL"] is False
    assert rep.details["focus_walks_equal"]
    assert not rep.details["focus_eb_equal"]
    assert not rep.details["focus_pe_equal"]


@settings(max_examples=40)
@given(graphs(min_nodes=1, max_nodes=7), graphs(min_nodes=1, max_nodes=7))
def test_report_wl_column_agrees(g1, g2):
    rep = distinguish_report(g1, g2, seeds=[])
    assert rep.verdicts["1-WL"] == wl_distinguish(g1, g2)
