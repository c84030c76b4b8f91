import numpy as np
import pytest
from hypothesis import given, settings

from conftest import graph_and_perm
from genhop import autodiff as ad
from genhop.autodiff import finite_difference_check
from genhop.features import GraphBatch, featurize
from genhop.graph import complete_graph, cycle_graph, disjoint_union, from_edge_list, permute
from genhop.model import (
    ModelConfig,
    ModelParams,
    forward_batch,
    forward_embed,
    genhop_layer,
    genhop_preactivation,
    init_params,
    load_checkpoint,
    pos_layer,
    save_checkpoint,
)

IDENTITY = lambda x: x

ASYMMETRIC_TREE = from_edge_list(7, [(0, 1), (1, 3), (1, 4), (2, 6), (3, 6), (4, 5)])


def _batch(graphs, K=3, p=2, raw=False):
    graphs = graphs if isinstance(graphs, list) else [graphs]
    return GraphBatch.from_features([featurize(g, K, p) for g in graphs], raw_closed_walks=raw)


def _small_config(**kw):
    base = dict(hidden_dim=4, layers=2, hops=3, pe_dim=2)
    base.update(kw)
    return ModelConfig(**base)


def test_k3_hand_expansion():
    batch = _batch(complete_graph(3), K=2, raw=True)
    h = np.ones((3, 1))
    out = genhop_layer(batch, h, None, np.zeros(1), IDENTITY, ModelConfig(hops=2))
    assert out.data.ravel().tolist() == [6.0, 6.0, 6.0]
    out = genhop_layer(batch, h, None, np.ones(1), IDENTITY, ModelConfig(hops=2))
    assert out.data.ravel().tolist() == [7.0, 7.0, 7.0]


def test_zero_edge_embeddings_change_nothing():
    batch = _batch(complete_graph(3), K=2, raw=True)
    h = np.ones((3, 1))
    a = genhop_preactivation(batch, h, np.zeros((3, 1)), np.zeros(1)).data
    b = genhop_preactivation(batch, h, None, np.zeros(1)).data
    assert np.array_equal(a, b)


def test_edge_embedding_reaches_both_endpoints():
    batch = _batch(from_edge_list(2, [(0, 1)]), K=2)
    out = genhop_preactivation(batch, np.zeros((2, 1)), np.array([[5.0]]), np.zeros(1), False, False)
    assert out.data.ravel().tolist() == [5.0, 5.0]


def test_isolated_node_is_fixed_point():
    batch = _batch(from_edge_list(1, []), K=3)
    h = np.array([[0.7, -1.2]])
    for layer in (genhop_layer(batch, h, None, np.zeros(1), IDENTITY, ModelConfig(hops=3)),
                  pos_layer(batch, h, None, np.zeros(1), IDENTITY)):
        assert np.array_equal(layer.data, h)


def test_local_only_layer_is_gin_aggregation(rng):
    g = from_edge_list(6, [(0, 1), (1, 2), (2, 3), (3, 0), (3, 4)])
    h = rng.normal(size=(6, 3))
    cfg = ModelConfig(layers=1, use_closed_walks=False, use_high_order=False)
    eps = 0.37
    out = genhop_layer(_batch(g), h, None, np.array([eps]), IDENTITY, cfg).data
    direct = np.zeros_like(h)
    for v in range(6):
        direct[v] = (1 + eps) * h[v] + sum(h[u] for u in g.neighbors[v])
    assert np.allclose(out, direct, atol=1e-14)


def test_disabled_terms_drop_out(rng):
    g = cycle_graph(5)
    h = rng.normal(size=(5, 2))
    batch = _batch(g, K=3)
    full = genhop_preactivation(batch, h, None, np.zeros(1)).data
    local = genhop_preactivation(batch, h, None, np.zeros(1), False, False).data
    walks = genhop_preactivation(batch, h, None, np.zeros(1), True, False).data
    high = genhop_preactivation(batch, h, None, np.zeros(1), False, True).data
    assert np.allclose(full - local, (walks - local) + (high - local), atol=1e-13)
    assert np.allclose(walks - local, batch.walk_coeff[:, None] * h, atol=1e-13)


def test_pos_layer_single_edge_swaps():
    g = from_edge_list(2, [(0, 1)])
    params = init_params(_small_config(layers=1, hidden_dim=3), seed=2)
    mlp = lambda x: ad.relu(ad.matmul(x, params["pos.0.phi.0.W"]))
    h = np.array([[0.5, -1.0, 2.0], [-0.5, 1.0, -2.0]])
    out = pos_layer(_batch(g), h, None, np.zeros(1), mlp).data
    swapped = pos_layer(_batch(g), h[::-1], None, np.zeros(1), mlp).data
    assert np.allclose(out[::-1], swapped, atol=1e-14)


def test_pos_layer_constant_input_on_k3_is_constant():
    h = np.tile([[0.3, -0.4]], (3, 1))
    out = pos_layer(_batch(complete_graph(3)), h, None, np.zeros(1), IDENTITY).data
    assert np.ptp(out, axis=0).max() == 0.0


def test_init_is_deterministic():
    cfg = _small_config(edge_dim=2)
    a, b, c = init_params(cfg, 7), init_params(cfg, 7), init_params(cfg, 8)
    assert a.tensors.keys() == b.tensors.keys()
    assert all(a[k].data.tobytes() == b[k].data.tobytes() for k in a.tensors)
    assert any(a[k].data.tobytes() != c[k].data.tobytes() for k in a.tensors)


def test_init_shapes_and_ranges():
    cfg = ModelConfig(in_dim=5, edge_dim=2, hidden_dim=8, layers=3, pe_dim=4)
    params = init_params(cfg, 0)
    assert params["struct.0.phi.0.W"].shape == (5, 8)
    assert params["struct.1.phi.0.W"].shape == (8, 8)
    assert params["struct.0.edge_c.0.W"].shape == (3, 5)
    assert params["struct.0.edge_b.1.W"].shape == (5, 5)
    assert params["struct.theta.0.W"].shape == (24, 8)
    assert params["pos.in.W"].shape == (4, 8)
    for l in range(3):
        assert params[f"struct.{l}.eps"].data.tolist() == [0.0]
    W = params["struct.theta.0.W"].data
    assert np.abs(W).max() <= 1 / np.sqrt(24)


def test_embedding_shapes():
    cfg = _small_config(hidden_dim=5)
    out = forward_embed([cycle_graph(4), complete_graph(3)], init_params(cfg, 0))
    assert out.z.shape == (2, 10) == (2, cfg.embedding_dim)
    assert out.node_concat.shape == (7, 10)
    assert out.node_struct.shape == out.node_pos.shape == (7, 5)
    assert out.nodes_of(1) == slice(4, 7)
    no_pos = forward_embed(cycle_graph(4), init_params(_small_config(use_positional=False), 0))
    assert no_pos.z.shape == (1, 4) and no_pos.node_pos is None


def test_single_node_graph_embeds():
    cfg = _small_config()
    out = forward_embed(from_edge_list(1, []), init_params(cfg, 1))
    assert out.z.shape == (1, cfg.embedding_dim)
    assert np.isfinite(out.z.data).all()


def test_batched_equals_individual_in_eval():
    params = init_params(_small_config(), 3)
    gs = [cycle_graph(5), ASYMMETRIC_TREE, complete_graph(4)]
    together = forward_embed(gs, params).z.data
    alone = np.vstack([forward_embed(g, params).z.data for g in gs])
    assert np.allclose(together, alone, atol=1e-12)


@settings(max_examples=100)
@given(graph_and_perm(min_nodes=1, max_nodes=9))
def test_structural_embedding_permutation_invariant(gp):
    g, perm = gp
    params = init_params(_small_config(use_positional=False), 5)
    a = forward_embed(g, params).z.data
    b = forward_embed(permute(g, perm), params).z.data
    assert np.abs(a - b).max() <= 1e-8


def _simple_spectrum(g, gap=1e-3):
    from genhop.spectral import laplacian_matrix

    vals, vecs = np.linalg.eigh(laplacian_matrix(g))
    if np.diff(vals).min(initial=1.0) < gap:
        return False
    top = np.sort(np.abs(vecs[:, 1:]), axis=0)
    return bool((top[-1] - top[-2] > 1e-6).all())


def test_full_embedding_invariant_on_simple_spectrum_graphs():
    rng = np.random.default_rng(11)
    params = init_params(_small_config(pe_dim=3), 4)
    checked = 0
    while checked < 25:
        m = int(rng.integers(5, 10))
        edges = [(u, v) for u in range(m) for v in range(u + 1, m) if rng.random() < 0.4]
        g = from_edge_list(m, edges)
        if not _simple_spectrum(g):
            continue
        perm = rng.permutation(m)
        a = forward_embed(g, params).z.data
        b = forward_embed(permute(g, perm), params).z.data
        assert np.abs(a - b).max() <= 1e-6
        checked += 1


def test_permuted_k3_matches():
    params = init_params(_small_config(), 0)
    g = complete_graph(3)
    a = forward_embed(g, params).z.data
    b = forward_embed(permute(g, [2, 0, 1]), params).z.data
    assert np.abs(a - b).max() <= 1e-9


def test_triangles_vs_hexagon_separated():
    two_triangles = disjoint_union(cycle_graph(3), cycle_graph(3))
    hexagon = cycle_graph(6)
    cfg = ModelConfig(hidden_dim=16, layers=3, hops=3, pe_dim=2, use_positional=False)
    far = 0
    for seed in range(10):
        params = init_params(cfg, seed)
        d = np.abs(forward_embed(two_triangles, params).z.data - forward_embed(hexagon, params).z.data).max()
        far += d > 1e-6
    assert far >= 9


def test_train_mode_updates_running_stats_only_when_tracking():
    params = init_params(_small_config(), 0)
    before = {k: {s: a.copy() for s, a in v.items()} for k, v in params.bn_state.items()}
    forward_embed([cycle_graph(5), complete_graph(4)], params, mode="train", seed=0, track_stats=False)
    assert all(np.array_equal(before[k]["mean"], params.bn_state[k]["mean"]) for k in before)
    forward_embed([cycle_graph(5), complete_graph(4)], params, mode="train", seed=0)
    assert any(not np.array_equal(before[k]["mean"], params.bn_state[k]["mean"]) for k in before)


def test_running_stats_momentum(monkeypatch):
    params = init_params(_small_config(layers=1), 0)
    batch = _batch([cycle_graph(5), ASYMMETRIC_TREE], K=3, p=2)
    name = "struct.0.phi.0.bn"
    captured = {}
    original = ad.batch_norm

    def spy(x, gamma, beta, eps=1e-5):
        out = original(x, gamma, beta, eps)
        captured.setdefault("x", x.data.copy())
        return out

    monkeypatch.setattr(ad, "batch_norm", spy)
    forward_batch(batch, params, mode="train")
    x = captured["x"]
    assert np.allclose(params.bn_state[name]["mean"], 0.1 * x.mean(axis=0), atol=1e-14)
    assert np.allclose(params.bn_state[name]["var"], 0.9 + 0.1 * x.var(axis=0, ddof=1), atol=1e-14)


def test_wrong_feature_width_raises():
    params = init_params(_small_config(in_dim=2), 0)
    with pytest.raises(ValueError, match="width"):
        forward_embed(cycle_graph(4), params)


def test_bad_config_raises():
    with pytest.raises(ValueError):
        ModelConfig(hidden_dim=0)
    with pytest.raises(ValueError):
        ModelConfig(hops=1)
    with pytest.raises(ValueError):
        ModelConfig.variant("nope")


def test_variants_set_flags():
    cw = ModelConfig.variant("cw_only")
    assert cw.use_closed_walks and not cw.use_high_order and not cw.use_positional
    pos = ModelConfig.variant("pos_only", hidden_dim=8)
    assert pos.use_positional and not pos.use_closed_walks and pos.hidden_dim == 8


def test_checkpoint_round_trip(tmp_path):
    params = init_params(_small_config(), 9)
    forward_embed([cycle_graph(5), complete_graph(4)], params, mode="train", seed=0)
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, path, extra={"note": "x"})
    loaded, extra = load_checkpoint(path)
    assert extra == {"note": "x"}
    assert loaded.config == params.config
    assert loaded.tensors.keys() == params.tensors.keys()
    assert all(loaded[k].data.tobytes() == params[k].data.tobytes() for k in params.tensors)
    assert all(np.array_equal(loaded.bn_state[k][s], params.bn_state[k][s])
               for k in params.bn_state for s in ("mean", "var"))


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError, match="not a model checkpoint"):
        load_checkpoint(path)


# gradients -------------------------------------------------------------------

def test_layer_gradients():
    g = from_edge_list(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5)])
    batch = _batch(g, K=3)
    cfg = ModelConfig(hops=3)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        R = rng.normal(size=(6, 3))

        def fn(h, E, eps, W1, b1, W2, b2):
            mlp = lambda x: ad.add(ad.matmul(ad.relu(ad.add(ad.matmul(x, W1), b1)), W2), b2)
            return ad.sum(ad.mul(genhop_layer(batch, h, E, eps, mlp, cfg), R))

        inputs = [rng.normal(size=(6, 2)), rng.normal(size=(6, 2)), rng.normal(size=1),
                  rng.normal(size=(2, 4)), rng.normal(size=4), rng.normal(size=(4, 3)), rng.normal(size=3)]
        res = finite_difference_check(fn, inputs)
        assert res.checked > 0 and res.max_rel_error <= 1e-4


@pytest.mark.parametrize("use_positional", [False, True])
def test_full_model_gradients(use_positional):
    cfg = ModelConfig(in_dim=2, edge_dim=1, hidden_dim=3, layers=2, hops=3, pe_dim=2, use_positional=use_positional)
    graphs = [
        from_edge_list(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)],
                       node_features=np.random.default_rng(0).normal(size=(5, 2)),
                       edge_features=np.random.default_rng(1).normal(size=(5, 1))),
        from_edge_list(4, [(0, 1), (1, 2), (2, 3)],
                       node_features=np.random.default_rng(2).normal(size=(4, 2)),
                       edge_features=np.random.default_rng(3).normal(size=(3, 1))),
    ]
    feats = [featurize(g, cfg.hops, cfg.pe_dim) for g in graphs]
    batch = GraphBatch.from_features(feats)
    base = init_params(cfg, 0)
    names = list(base.tensors)
    R = np.random.default_rng(5).normal(size=(2, cfg.embedding_dim))
    checked = 0
    for seed in range(3):
        start = init_params(cfg, seed)

        def fn(*leaves):
            params = ModelParams(cfg, dict(zip(names, leaves)), start.copy().bn_state)
            return ad.sum(ad.mul(forward_batch(batch, params, mode="train", track_stats=False).z, R))

        res = finite_difference_check(fn, [start[k].data for k in names])
        assert res.max_rel_error <= 1e-4, res
        checked += res.checked
    assert checked > 0
