"""Contrastive pre-training of the structural and positional encoders."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .augment import AugmentSpec, augment
from .graph import Graph
from .losses import nt_xent, vicreg
from .model import ModelConfig, ModelParams, forward_embed, init_params, prepare
from .optim import Adam

log = logging.getLogger(__name__)

SETTINGS = {
    # view 1 perturbs features (A, X'), view 2 perturbs topology (A', X)
    "mixed": (AugmentSpec("FeatDropout", 0.2), AugmentSpec("NodeDrop", 0.2)),
    "SA": (AugmentSpec("EdgeDrop", 0.2), AugmentSpec("NodeDrop", 0.2)),
    "FA": (AugmentSpec("FeatDropout", 0.2), AugmentSpec("FeatMask", 0.2)),
}


@dataclass(frozen=True)
class TrainConfig:
    tau: float = 0.1
    lam_inv: float = 1.0
    lam_var: float = 25.0
    lam_cov: float = 25.0
    alpha: float = 0.005
    gamma: float = 1.0
    eps_std: float = 1e-4
    lr: float = 1e-3
    weight_decay: float = 3e-4
    batch_size: int = 32
    epochs: int = 100
    view1: AugmentSpec = SETTINGS["mixed"][0]
    view2: AugmentSpec = SETTINGS["mixed"][1]
    vicreg_per_view: bool = False

    def __post_init__(self):
        if self.tau <= 0 or self.gamma <= 0 or self.eps_std <= 0 or self.lr <= 0:
            raise ValueError("tau, gamma, eps_std and lr must be positive")
        if min(self.lam_inv, self.lam_var, self.lam_cov, self.alpha, self.weight_decay) < 0:
            raise ValueError("loss weights and weight decay must be nonnegative")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        for v in ("view1", "view2"):
            spec = getattr(self, v)
            if isinstance(spec, dict):
                object.__setattr__(self, v, AugmentSpec(**spec))

    @classmethod
    def setting(cls, name: str, ratio: float = 0.2, **overrides) -> "TrainConfig":
        """``mixed`` (one feature + one structural view), ``SA`` or ``FA``."""
        if name not in SETTINGS:
            raise ValueError(f"unknown setting {name!r}; choose from {sorted(SETTINGS)}")
        v1, v2 = (AugmentSpec(s.strategy, ratio, s.walk_length) for s in SETTINGS[name])
        return cls(view1=v1, view2=v2, **overrides)

    @property
    def vicreg_kwargs(self) -> dict:
        return dict(lam_inv=self.lam_inv, lam_var=self.lam_var, lam_cov=self.lam_cov,
                    gamma=self.gamma, eps_std=self.eps_std, per_view=self.vicreg_per_view)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_loss: float
    nt_xent: float
    vicreg: float


@dataclass
class PretrainResult:
    params: ModelParams
    trace: list[EpochRecord] = field(default_factory=list)

    def losses(self) -> list[float]:
        return [r.mean_loss for r in self.trace]


def view_seed(seed: int, epoch: int, graph: int, view: int) -> np.random.SeedSequence:
    """Independent stream per (epoch, graph, view) so batching order cannot leak in."""
    return np.random.SeedSequence([seed, epoch, graph, view])


def aligned_rows(origin_a: np.ndarray, origin_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row indices of the original nodes that survive in both views."""
    common, ia, ib = np.intersect1d(origin_a, origin_b, assume_unique=True, return_indices=True)
    return ia, ib


def _batches(order: np.ndarray, size: int) -> list[np.ndarray]:
    chunks = [order[i : i + size] for i in range(0, len(order), size)]
    # a lone trailing graph has no negatives; fold it into the previous batch
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        last = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], last])
    return chunks


def batch_loss(
    graphs: Sequence[Graph],
    ids: Sequence[int],
    params: ModelParams,
    cfg: TrainConfig,
    seed: int,
    epoch: int,
) -> tuple[ad.Tensor, float, float]:
    """Loss for one batch; returns ``(total, nt_xent value, mean vicreg value)``."""
    mcfg = params.config
    views = []
    for v, spec in ((1, cfg.view1), (2, cfg.view2)):
        gs = [augment(graphs[i], spec, view_seed(seed, epoch, int(i), v)) for i in ids]
        pe_rng = np.random.default_rng(view_seed(seed, epoch, int(ids[0]), 10 + v))
        views.append((gs, forward_embed(prepare(gs, mcfg), params, "train", pe_rng)))
    (g1, out1), (g2, out2) = views
    graph_loss = nt_xent(out1.z, out2.z, cfg.tau)
    if cfg.alpha == 0:
        return graph_loss, float(graph_loss.data), 0.0
    node_terms = []
    for b in range(len(ids)):
        ia, ib = aligned_rows(g1[b].origin, g2[b].origin)
        if len(ia) == 0:
            continue
        s1, s2 = out1.nodes_of(b), out2.nodes_of(b)
        H1 = out1.node_concat[np.arange(s1.start, s1.stop)[ia]]
        H2 = out2.node_concat[np.arange(s2.start, s2.stop)[ib]]
        node_terms.append(vicreg(H1, H2, **cfg.vicreg_kwargs))
    if not node_terms:
        return graph_loss, float(graph_loss.data), 0.0
    node = node_terms[0]
    for t in node_terms[1:]:
        node = ad.add(node, t)
    node = ad.scale(node, 1.0 / len(node_terms))
    total = ad.add(graph_loss, ad.scale(node, cfg.alpha))
    return total, float(graph_loss.data), float(node.data)


def pretrain(
    graphs: Sequence[Graph],
    cfg: TrainConfig,
    model_cfg: ModelConfig,
    seed: int = 0,
    params: ModelParams | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> PretrainResult:
    """Adam on the total loss; deterministic per seed."""
    graphs = list(graphs)
    if not graphs:
        raise ValueError("cannot pre-train on an empty dataset")
    params = params if params is not None else init_params(model_cfg, seed)
    weights = params.trainable()
    opt = Adam(weights, lr=cfg.lr, weight_decay=cfg.weight_decay)
    result = PretrainResult(params)
    for epoch in range(cfg.epochs):
        order = np.random.default_rng(np.random.SeedSequence([seed, epoch])).permutation(len(graphs))
        totals, nts, vics = [], [], []
        for bi, ids in enumerate(_batches(order, cfg.batch_size)):
            loss, nt, vic = batch_loss(graphs, ids, params, cfg, seed, epoch)
            value = float(loss.data)
            if not np.isfinite(value):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, batch {bi}: total={value}, nt_xent={nt}, vicreg={vic}"
                )
            grads = ad.grad(loss, weights, allow_unused=True)
            opt.step(grads)
            totals.append(value)
            nts.append(nt)
            vics.append(vic)
        rec = EpochRecord(epoch, float(np.mean(totals)), float(np.mean(nts)), float(np.mean(vics)))
        result.trace.append(rec)
        log.info("epoch %d loss %.6f (nt_xent %.6f, vicreg %.6f)", epoch, rec.mean_loss, rec.nt_xent, rec.vicreg)
        if on_epoch is not None:
            on_epoch(rec)
    return result


def write_trace_csv(trace: Sequence[EpochRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "mean_loss", "nt_xent", "vicreg"])
        for r in trace:
            w.writerow([r.epoch, repr(r.mean_loss), repr(r.nt_xent), repr(r.vicreg)])
