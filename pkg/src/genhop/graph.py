"""Immutable undirected graphs and exact walk counting.

Adjacency powers are computed in exact integer arithmetic: ``int64`` when the
entries provably fit, Python integers (``object`` arrays) otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal, Sequence

import numpy as np
import scipy.sparse as sp

_INT64_LIMIT = 2**62


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph with canonical edge ordering.

    ``edges`` holds each edge once as ``(min, max)``, sorted lexicographically;
    the row position is the edge index. ``origin`` maps every node back to its
    id in the graph it was derived from (augmentations and permutations keep
    it aligned with the rows of ``x``).
    """

    num_nodes: int
    edges: np.ndarray
    x: np.ndarray
    edge_attr: np.ndarray | None = None
    y: int | None = None
    origin: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.origin is None:
            object.__setattr__(self, "origin", np.arange(self.num_nodes, dtype=np.int64))
        for arr in (self.edges, self.x, self.edge_attr, self.origin):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.num_nodes, self.num_nodes), dtype=np.int64)
        if self.num_edges:
            u, v = self.edges[:, 0], self.edges[:, 1]
            A[u, v] = 1
            A[v, u] = 1
        A.setflags(write=False)
        return A

    @cached_property
    def sparse_adjacency(self) -> sp.csr_matrix:
        m = self.num_nodes
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * self.num_edges)
        return sp.csr_matrix(
            (data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(m, m)
        )

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        deg.setflags(write=False)
        return deg

    @cached_property
    def neighbors(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges.tolist():
            nbrs[u].append(v)
            nbrs[v].append(u)
        for row in nbrs:
            row.sort()
        return nbrs

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(u, v): i for i, (u, v) in enumerate(self.edges.tolist())}

    def edge_id(self, u: int, v: int) -> int:
        return self.edge_index[(u, v) if u < v else (v, u)]

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edge_index)

    def same_structure(self, other: "Graph") -> bool:
        return self.num_nodes == other.num_nodes and np.array_equal(self.edges, other.edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if not self.same_structure(other) or self.y != other.y:
            return False
        if not np.array_equal(self.x, other.x):
            return False
        if (self.edge_attr is None) != (other.edge_attr is None):
            return False
        return self.edge_attr is None or np.array_equal(self.edge_attr, other.edge_attr)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Graph(m={self.num_nodes}, e={self.num_edges}, d={self.x.shape[1]}, y={self.y})"

    def with_features(self, x: np.ndarray | None = None, edge_attr: np.ndarray | None = None) -> "Graph":
        return Graph(
            self.num_nodes,
            self.edges,
            np.asarray(x if x is not None else self.x, dtype=np.float64),
            edge_attr if edge_attr is not None else self.edge_attr,
            self.y,
            self.origin,
        )

    def with_label(self, y: int | None) -> "Graph":
        return Graph(self.num_nodes, self.edges, self.x, self.edge_attr, y, self.origin)


def from_edge_list(
    m: int,
    pairs: Iterable[Sequence[int]],
    node_features: np.ndarray | None = None,
    edge_features: np.ndarray | None = None,
    y: int | None = None,
) -> Graph:
    """Build a :class:`Graph` from a possibly redundant list of node pairs.

    Reversed and repeated pairs collapse onto one edge; when ``edge_features``
    is given its rows align with ``pairs`` and the first occurrence wins.
    Missing node features default to an ``m x 1`` matrix of ones.
    """
    if m < 0:
        raise ValueError(f"node count must be nonnegative, got {m}")
    pairs = [tuple(int(a) for a in p) for p in pairs]
    if edge_features is not None:
        edge_features = np.asarray(edge_features, dtype=np.float64)
        if edge_features.ndim != 2 or edge_features.shape[0] != len(pairs):
            raise ValueError("edge_features must have one row per input pair")
    seen: dict[tuple[int, int], int] = {}
    for i, (u, v) in enumerate(pairs):
        if not (0 <= u < m and 0 <= v < m):
            raise ValueError(f"edge ({u}, {v}) has an endpoint outside 0..{m - 1}")
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        key = (u, v) if u < v else (v, u)
        seen.setdefault(key, i)
    keys = sorted(seen)
    edges = np.array(keys, dtype=np.int64).reshape(-1, 2)
    attr = None
    if edge_features is not None:
        attr = edge_features[[seen[k] for k in keys]].reshape(len(keys), edge_features.shape[1])
    if node_features is None:
        x = np.ones((m, 1))
    else:
        x = np.asarray(node_features, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != m:
            raise ValueError(f"node_features has {x.shape[0]} rows for {m} nodes")
        x = x.copy()
    return Graph(m, edges, x, attr, y)


def from_adjacency(A: np.ndarray, **kwargs) -> Graph:
    A = np.asarray(A)
    u, v = np.nonzero(np.triu(A, 1))
    return from_edge_list(A.shape[0], zip(u.tolist(), v.tolist()), **kwargs)


def _power_dtype(g: Graph, k: int):
    dmax = int(g.degrees.max()) if g.num_nodes else 0
    # row sums of A^k are bounded by dmax**k
    return np.int64 if dmax**k < _INT64_LIMIT else object


def adjacency_powers(g: Graph, K: int) -> list[np.ndarray]:
    """Return ``[A^1, ..., A^K]`` by repeated multiplication, exactly."""
    if K < 1:
        raise ValueError(f"power must be >= 1, got {K}")
    dtype = _power_dtype(g, K)
    A = g.adjacency.astype(dtype)
    out = [A]
    for _ in range(K - 1):
        out.append(out[-1] @ A)
    return out


def adjacency_power(g: Graph, k: int) -> np.ndarray:
    return adjacency_powers(g, k)[-1]


@dataclass(frozen=True)
class WalkProfile:
    """Closed-walk counts; column ``k - 2`` holds ``A^k[v, v]`` for k = 2..K."""

    values: np.ndarray
    K: int

    def at(self, k: int) -> np.ndarray:
        return self.values[:, k - 2]

    def rows(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in row) for row in self.values]


def closed_walk_profile(g: Graph, K: int, powers: list[np.ndarray] | None = None) -> WalkProfile:
    if K < 2:
        raise ValueError(f"closed-walk profile needs K >= 2, got {K}")
    powers = powers if powers is not None else adjacency_powers(g, K)
    cols = [np.diagonal(powers[k - 1]) for k in range(2, K + 1)]
    values = np.stack(cols, axis=1) if g.num_nodes else np.zeros((0, K - 1), dtype=np.int64)
    return WalkProfile(values, K)


@dataclass(frozen=True)
class KHopWeights:
    """Row-normalised k-hop coefficients for k = 2..K.

    ``weights[k]`` is a CSR matrix; ``members[k][v]`` lists the nodes
    ``u != v`` with ``A^k[v, u] > 0``.
    """

    weights: dict[int, sp.csr_matrix]
    members: dict[int, list[np.ndarray]]
    K: int

    def combined(self) -> sp.csr_matrix:
        """Sum over k of the normalised matrices (one message per hop)."""
        mats = list(self.weights.values())
        total = mats[0].copy()
        for w in mats[1:]:
            total = total + w
        return total.tocsr()


def normalized_khop_weights(
    g: Graph,
    K: int,
    powers: list[np.ndarray] | None = None,
    denominator: Literal["khop", "one_hop"] = "khop",
) -> KHopWeights:
    """Normalised k-hop coefficients.

    With ``denominator="khop"`` each row is divided by its total over the
    k-hop neighbourhood, so nonzero rows sum to one. ``"one_hop"`` divides by
    the total over the 1-hop neighbours instead (the alternative reading of the
    normalisation, kept for sensitivity checks). Rows with a zero denominator
    stay zero.
    """
    if K < 2:
        raise ValueError(f"k-hop weights need K >= 2, got {K}")
    powers = powers if powers is not None else adjacency_powers(g, K)
    m = g.num_nodes
    adj = g.adjacency.astype(bool)
    weights, members = {}, {}
    for k in range(2, K + 1):
        Pk = np.asarray(powers[k - 1], dtype=np.float64)
        offdiag = Pk.copy()
        np.fill_diagonal(offdiag, 0.0)
        if denominator == "khop":
            denom = offdiag.sum(axis=1)
        elif denominator == "one_hop":
            denom = np.where(adj, offdiag, 0.0).sum(axis=1)
        else:
            raise ValueError(f"unknown denominator mode {denominator!r}")
        safe = np.where(denom > 0, denom, 1.0)
        W = np.where(denom[:, None] > 0, offdiag / safe[:, None], 0.0)
        weights[k] = sp.csr_matrix(W, shape=(m, m))
        members[k] = [np.flatnonzero(offdiag[v] > 0) for v in range(m)]
    return KHopWeights(weights, members, K)


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel node ``v`` as ``perm[v]``; features and edge attributes follow."""
    perm = np.asarray(perm, dtype=np.int64)
    m = g.num_nodes
    if perm.shape != (m,) or not np.array_equal(np.sort(perm), np.arange(m)):
        raise ValueError("perm must be a bijection on 0..m-1")
    inv = np.empty_like(perm)
    inv[perm] = np.arange(m)
    new_pairs = perm[g.edges] if g.num_edges else np.zeros((0, 2), dtype=np.int64)
    out = from_edge_list(
        m,
        new_pairs.tolist(),
        node_features=g.x[inv],
        edge_features=g.edge_attr,
        y=g.y,
    )
    return Graph(out.num_nodes, out.edges, out.x, out.edge_attr, out.y, g.origin[inv])


def disjoint_union(*graphs: Graph) -> Graph:
    pairs, offset = [], 0
    for h in graphs:
        pairs.extend((h.edges + offset).tolist())
        offset += h.num_nodes
    x = np.concatenate([h.x for h in graphs], axis=0)
    return from_edge_list(offset, pairs, node_features=x)


def induced_subgraph(g: Graph, keep: Sequence[int]) -> Graph:
    """Subgraph on ``keep`` (sorted), relabelled 0..len(keep)-1."""
    keep = np.unique(np.asarray(keep, dtype=np.int64))
    remap = -np.ones(g.num_nodes, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    mask = (remap[g.edges[:, 0]] >= 0) & (remap[g.edges[:, 1]] >= 0) if g.num_edges else np.zeros(0, bool)
    return _sub(g, keep, remap, mask)


def _sub(g: Graph, keep: np.ndarray, remap: np.ndarray, edge_mask: np.ndarray) -> Graph:
    edges = remap[g.edges[edge_mask]] if g.num_edges else np.zeros((0, 2), dtype=np.int64)
    attr = g.edge_attr[edge_mask] if g.edge_attr is not None else None
    # remap is monotone on keep, so canonical order is preserved
    return Graph(len(keep), edges.reshape(-1, 2).astype(np.int64), g.x[keep].copy(), attr, g.y, g.origin[keep].copy())


def drop_edges(g: Graph, drop: Sequence[int]) -> Graph:
    mask = np.ones(g.num_edges, dtype=bool)
    mask[np.asarray(drop, dtype=np.int64)] = False
    keep = np.arange(g.num_nodes)
    return _sub(g, keep, keep, mask)


# simple named constructors used across tests, fixtures and scripts

def path_graph(m: int) -> Graph:
    return from_edge_list(m, [(i, i + 1) for i in range(m - 1)])


def cycle_graph(m: int) -> Graph:
    return from_edge_list(m, [(i, (i + 1) % m) for i in range(m)])


def complete_graph(m: int) -> Graph:
    return from_edge_list(m, [(i, j) for i in range(m) for j in range(i + 1, m)])


def star_graph(leaves: int) -> Graph:
    return from_edge_list(leaves + 1, [(0, i) for i in range(1, leaves + 1)])
