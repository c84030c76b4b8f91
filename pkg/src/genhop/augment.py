"""Seeded topology and feature augmentations producing contrastive views."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, drop_edges, induced_subgraph

STRUCTURAL = ("RWS", "NodeDrop", "EdgeDrop")
FEATURE = ("FeatDropout", "FeatMask", "EdgeAttrMask")
STRATEGIES = STRUCTURAL + FEATURE + ("Identity",)


@dataclass(frozen=True)
class AugmentSpec:
    strategy: str = "Identity"
    ratio: float = 0.2
    walk_length: int | None = None  # RWS only; None means half the node count

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown augmentation {self.strategy!r}; choose from {STRATEGIES}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio must lie in [0, 1], got {self.ratio}")
        if self.walk_length is not None and self.walk_length < 1:
            raise ValueError("walk_length must be >= 1")

    @property
    def structural(self) -> bool:
        return self.strategy in STRUCTURAL


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _count(ratio: float, n: int) -> int:
    # guard against 0.7 * 10 = 7.000000000000001 rounding up to 8
    return min(n, math.ceil(ratio * n - 1e-9))


def augment(g: Graph, spec: AugmentSpec, seed) -> Graph:
    """Return a perturbed copy of ``g``; a pure function of ``(g, spec, seed)``."""
    rng = _rng(seed)
    m = g.num_nodes
    if spec.strategy == "Identity" or spec.ratio == 0.0 or m == 0:
        return g
    if spec.strategy == "NodeDrop":
        n_drop = min(_count(spec.ratio, m), m - 1)
        drop = rng.choice(m, size=n_drop, replace=False)
        return induced_subgraph(g, np.setdiff1d(np.arange(m), drop))
    if spec.strategy == "EdgeDrop":
        n_drop = _count(spec.ratio, g.num_edges)
        return drop_edges(g, rng.choice(g.num_edges, size=n_drop, replace=False))
    if spec.strategy == "RWS":
        length = spec.walk_length if spec.walk_length is not None else max(1, m // 2)
        v = int(rng.integers(m))
        visited = {v}
        nbrs = g.neighbors
        for _ in range(length):
            if not nbrs[v]:
                break
            v = nbrs[v][int(rng.integers(len(nbrs[v])))]
            visited.add(v)
        return induced_subgraph(g, sorted(visited))
    if spec.strategy == "FeatDropout":
        keep = rng.random(g.x.shape) >= spec.ratio
        return g.with_features(x=g.x * keep)
    if spec.strategy == "FeatMask":
        keep = rng.random(g.x.shape[1]) >= spec.ratio
        return g.with_features(x=g.x * keep[None, :])
    if spec.strategy == "EdgeAttrMask":
        if g.edge_attr is None:
            return g
        keep = rng.random(g.num_edges) >= spec.ratio
        return g.with_features(edge_attr=g.edge_attr * keep[:, None])
    raise AssertionError(spec.strategy)
