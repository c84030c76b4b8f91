"""Frozen-embedding linear probes, experiment runs and pairwise invariant reports."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from sklearn.model_selection import StratifiedKFold

from .centrality import edge_feature_table
from .data import Dataset, builtin_fixture, csl_dataset, load_dataset_json, sr25_dataset
from .graph import Graph, closed_walk_profile
from .model import ModelConfig, ModelParams, forward_embed, init_params, prepare, save_checkpoint
from .spectral import laplacian_pe
from .train import TrainConfig, pretrain, write_trace_csv
from .wl import cycle_profile, wl_distinguish

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["run_id", "dataset", "variant", "seed", "fold", "accuracy", "mean", "std"]


def embed_dataset(graphs: Dataset | Sequence[Graph], params: ModelParams, chunk: int = 64) -> np.ndarray:
    """Eval-mode graph embeddings, one row per graph in dataset order."""
    graphs = graphs.graphs if isinstance(graphs, Dataset) else list(graphs)
    rows = []
    for i in range(0, len(graphs), chunk):
        feats = prepare(graphs[i : i + chunk], params.config)
        rows.append(forward_embed(feats, params, "eval").z.data)
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, params.config.embedding_dim))


# linear probe -------------------------------------------------------------------

@dataclass
class ProbeResult:
    fold_accuracies: list[float]
    mean: float
    std: float
    confusion: np.ndarray
    folds: list[tuple[np.ndarray, np.ndarray]] = field(repr=False, default_factory=list)


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def fit_logistic_regression(
    X: np.ndarray, y: np.ndarray, n_classes: int, l2: float = 1e-3, tol: float = 1e-6, max_iter: int = 2000
) -> tuple[np.ndarray, np.ndarray]:
    """Multinomial logistic regression by full-batch accelerated gradient descent.

    Step ``1/L`` with ``L = ||X||_2^2 / (2n) + l2``, a bound on the curvature
    of the mean cross-entropy plus ``l2/2 ||W||^2`` (bias unpenalised, folded
    into X). Nesterov momentum is reset whenever the gradient points against
    the last move. Stops once every gradient entry is below ``tol``.
    """
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    Y = np.eye(n_classes)[y]
    L = np.linalg.norm(Xb, 2) ** 2 / (2 * n) + l2
    step = 1.0 / L
    reg = np.ones((d + 1, 1))
    reg[-1] = 0.0
    gradient = lambda W: Xb.T @ (_softmax(Xb @ W) - Y) / n + l2 * reg * W
    W = np.zeros((d + 1, n_classes))
    V, t = W.copy(), 1.0
    for _ in range(max_iter):
        if np.abs(gradient(W)).max() < tol:
            break
        G = gradient(V)
        W_next = V - step * G
        if np.sum(G * (W_next - W)) > 0:
            t = 1.0
        t_next = (1 + np.sqrt(1 + 4 * t * t)) / 2
        V = W_next + ((t - 1) / t_next) * (W_next - W)
        W, t = W_next, t_next
    return W[:-1], W[-1]


def linear_probe(
    embeddings: np.ndarray,
    labels: Sequence[int],
    folds: int = 10,
    seed: int = 0,
    l2: float = 1e-3,
    max_iter: int = 2000,
) -> ProbeResult:
    """Stratified k-fold accuracy of a logistic-regression probe."""
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if folds < 2:
        raise ValueError("need at least two folds")
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < folds:
        raise ValueError(
            f"class {classes[counts.argmin()]} has {counts.min()} members, fewer than {folds} folds"
        )
    n_classes = int(y.max()) + 1
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    accs, conf, used = [], np.zeros((n_classes, n_classes), dtype=np.int64), []
    for train, test in splitter.split(X, y):
        assert not np.intersect1d(train, test).size, "train and test folds overlap"
        Xtr, Xte = X[train], X[test]
        mu, sd = Xtr.mean(axis=0), Xtr.std(axis=0)
        sd = np.where(sd > 1e-12, sd, 1.0)
        W, b = fit_logistic_regression((Xtr - mu) / sd, y[train], n_classes, l2, max_iter=max_iter)
        pred = (((Xte - mu) / sd) @ W + b).argmax(axis=1)
        accs.append(float((pred == y[test]).mean()))
        np.add.at(conf, (y[test], pred), 1)
        used.append((train, test))
    return ProbeResult(accs, float(np.mean(accs)), float(np.std(accs)), conf, used)


# experiments --------------------------------------------------------------------

@dataclass
class ExperimentResult:
    rows: list[dict]
    checkpoints: list[Path]
    traces: dict[str, list]

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=METRIC_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(self.rows)
        return buf.getvalue()


def load_dataset_spec(spec: dict, base: Path | None = None) -> Dataset:
    source = spec.get("source")
    base = base or Path(".")
    if source == "csl":
        return csl_dataset(spec.get("m", 41), spec.get("max_R", 20), spec.get("copies", 10), spec.get("seed", 0))
    if source == "sr25":
        return sr25_dataset(base / spec["path"], spec.get("copies", 10))
    if source == "json":
        return load_dataset_json(base / spec["path"])
    if source == "fixture":
        pair = builtin_fixture(spec["name"])
        copies = spec.get("copies", 10)
        graphs = [g.with_label(c) for c, g in enumerate(pair) for _ in range(copies)]
        return Dataset(graphs, [g.y for g in graphs], name=spec["name"], class_count=2)
    raise ValueError(f"unknown dataset source {source!r}")


def _known(cls, d: dict, what: str) -> dict:
    names = {f.name for f in fields(cls)}
    extra = set(d) - names
    if extra:
        raise ValueError(f"unknown {what} fields: {sorted(extra)}")
    return d


def run_experiment(spec: dict | str | Path, out_dir: str | Path | None = None) -> ExperimentResult:
    """Pre-train, embed and probe for every (variant, alpha, seed) in the spec.

    Spec keys: ``run_id``, ``dataset`` (source spec), ``model`` (ModelConfig
    fields), ``train`` (TrainConfig fields plus optional ``setting``),
    ``variants`` (list of ModelConfig.variant names), ``alphas`` (optional
    sweep), ``seeds``, ``folds``.
    """
    base = Path(".")
    if not isinstance(spec, dict):
        base = Path(spec).parent
        spec = json.loads(Path(spec).read_text(encoding="utf-8"))
    if "dataset" not in spec:
        raise ValueError("experiment spec needs a 'dataset' entry")
    ds = load_dataset_spec(spec["dataset"], base)
    run_id = spec.get("run_id", "run")
    model_kw = _known(ModelConfig, dict(spec.get("model", {})), "model")
    train_kw = dict(spec.get("train", {}))
    setting = train_kw.pop("setting", "mixed")
    ratio = train_kw.pop("ratio", 0.2)
    _known(TrainConfig, train_kw, "train")
    variants = spec.get("variants", ["full"])
    alphas = spec.get("alphas")
    seeds = spec.get("seeds", [0])
    folds = spec.get("folds", 10)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    edge_dim = ds.graphs[0].edge_attr.shape[1] if ds.graphs and ds.graphs[0].edge_attr is not None else 0
    rows, ckpts, traces = [], [], {}
    for variant in variants:
        mcfg = ModelConfig.variant(variant, **{"in_dim": ds.feature_dim, "edge_dim": edge_dim, **model_kw})
        for alpha in alphas if alphas is not None else [None]:
            tkw = dict(train_kw) if alpha is None else {**train_kw, "alpha": alpha}
            tcfg = TrainConfig.setting(setting, ratio=ratio, **tkw)
            label = variant if alpha is None else f"{variant}@alpha={alpha:g}"
            for seed in seeds:
                res = pretrain(ds.graphs, tcfg, mcfg, seed=seed)
                emb = embed_dataset(ds, res.params)
                probe = linear_probe(emb, ds.labels, folds=folds, seed=seed)
                for k, acc in enumerate(probe.fold_accuracies):
                    rows.append(dict(run_id=run_id, dataset=ds.name, variant=label, seed=seed, fold=k,
                                     accuracy=repr(acc), mean=repr(probe.mean), std=repr(probe.std)))
                traces[f"{label}/{seed}"] = res.trace
                if out is not None:
                    stem = f"{run_id}_{label.replace('@', '_').replace('=', '')}_s{seed}"
                    path = out / f"{stem}.ckpt"
                    save_checkpoint(res.params, path, extra={"train": asdict(tcfg), "variant": label, "seed": seed})
                    write_trace_csv(res.trace, out / f"{stem}_loss.csv")
                    ckpts.append(path)
    result = ExperimentResult(rows, ckpts, traces)
    if out is not None:
        (out / f"{run_id}_metrics.csv").write_text(result.csv_text(), encoding="utf-8")
    return result


# pairwise invariant report --------------------------------------------------------

def _multiset(rows) -> list:
    return sorted(rows)


@dataclass
class DistinguishReport:
    verdicts: dict[str, bool]  # invariant -> True when it separates the pair
    embedding_distances: list[float]
    details: dict[str, Any]

    ORDER = ("1-WL", "closed-walk", "cycle", "centrality", "pe-spectrum", "model")

    @property
    def first_separating(self) -> str | None:
        for name in self.ORDER:
            if self.verdicts.get(name):
                return name
        return None

    def table(self) -> str:
        lines = ["invariant,verdict"]
        for name in self.ORDER:
            if name in self.verdicts:
                lines.append(f"{name},{'different' if self.verdicts[name] else 'same'}")
        lines.append(f"first_separating,{self.first_separating or 'none'}")
        return "\n".join(lines)


def distinguish_report(
    g1: Graph,
    g2: Graph,
    K: int = 3,
    p: int = 2,
    seeds: Sequence[int] = range(10),
    model_config: ModelConfig | None = None,
    focus: tuple[Sequence[int], Sequence[int]] | None = None,
    distance_tol: float = 1e-6,
) -> DistinguishReport:
    """Which invariants tell ``g1`` and ``g2`` apart.

    ``focus`` optionally names node subsets whose closed-walk rows, EB values
    on incident edges and PE rows are compared in ``details``.
    """
    wl = wl_distinguish(g1, g2)
    w1, w2 = closed_walk_profile(g1, K), closed_walk_profile(g2, K)
    c1, c2 = cycle_profile(g1, min(K, 8)), cycle_profile(g2, min(K, 8))
    t1, t2 = edge_feature_table(g1), edge_feature_table(g2)
    pe1, pe2 = laplacian_pe(g1, p), laplacian_pe(g2, p)
    cent = lambda t: _multiset(tuple(np.round(r, 9)) for r in t.raw.tolist())
    spec = lambda pe: (pe.used_dims, tuple(np.round(pe.eigenvalues, 8)))
    verdicts = {
        "1-WL": wl,
        "closed-walk": _multiset(w1.rows()) != _multiset(w2.rows()),
        "cycle": _multiset(c1.rows()) != _multiset(c2.rows()),
        "centrality": cent(t1) != cent(t2),
        "pe-spectrum": spec(pe1) != spec(pe2),
    }
    mcfg = model_config or ModelConfig(in_dim=g1.x.shape[1], hops=K, pe_dim=p, hidden_dim=16, layers=2)
    dists = []
    if g1.x.shape[1] == g2.x.shape[1] == mcfg.in_dim:
        f1, f2 = prepare([g1, g2], mcfg)
        for s in seeds:
            params = init_params(mcfg, s)
            z1 = forward_embed(f1, params, "eval").z.data
            z2 = forward_embed(f2, params, "eval").z.data
            dists.append(float(np.linalg.norm(z1 - z2)))
        verdicts["model"] = bool(dists) and min(dists) > distance_tol
    details: dict[str, Any] = {
        "eb_multiset": (sorted(np.round(t1.eb, 9).tolist()), sorted(np.round(t2.eb, 9).tolist())),
        "pe_eigenvalues": (pe1.eigenvalues.tolist(), pe2.eigenvalues.tolist()),
    }
    if focus is not None:
        a, b = (list(map(int, f)) for f in focus)
        eb_at = lambda g, t, v: sorted(round(float(t.eb[g.edge_id(v, u)]), 9) for u in g.neighbors[v])
        details["focus_walks"] = (sorted(w1.rows()[v] for v in a), sorted(w2.rows()[v] for v in b))
        details["focus_walks_equal"] = details["focus_walks"][0] == details["focus_walks"][1]
        details["focus_eb"] = (sorted(eb_at(g1, t1, v) for v in a), sorted(eb_at(g2, t2, v) for v in b))
        details["focus_eb_equal"] = details["focus_eb"][0] == details["focus_eb"][1]
        pe_rows = lambda pe, vs: sorted(tuple(np.round(np.abs(pe.pe[v]), 8)) for v in vs)
        details["focus_pe_equal"] = pe_rows(pe1, a) == pe_rows(pe2, b)
    return DistinguishReport(verdicts, dists, details)
