"""Edge centralities fed to the 1-hop message as extra edge attributes."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .graph import Graph

STANDARDIZE_MIN_VAR = 1e-12


def edge_betweenness(g: Graph) -> np.ndarray:
    """Unweighted edge betweenness, summed over unordered node pairs (Brandes)."""
    m, nbrs = g.num_nodes, g.neighbors
    eid = g.edge_index
    eb = np.zeros(g.num_edges)
    for s in range(m):
        order = []
        preds: list[list[int]] = [[] for _ in range(m)]
        sigma = [0] * m
        dist = [-1] * m
        sigma[s], dist[s] = 1, 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            dv = dist[v] + 1
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dv
                    queue.append(w)
                if dist[w] == dv:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * m
        for w in reversed(order):
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in preds[w]:
                c = sigma[v] * coeff
                eb[eid[(v, w) if v < w else (w, v)]] += c
                delta[v] += c
    # every unordered pair was accumulated from both endpoints
    return eb / 2.0


def distance_matrix(g: Graph) -> np.ndarray:
    if g.num_nodes == 0:
        return np.zeros((0, 0))
    return shortest_path(g.sparse_adjacency, method="D", unweighted=True)


def node_closeness(g: Graph, dist: np.ndarray | None = None) -> np.ndarray:
    """Closeness normalised by the reachable set; 0 for isolated nodes."""
    dist = distance_matrix(g) if dist is None else dist
    finite = np.isfinite(dist)
    reach = finite.sum(axis=1) - 1
    total = np.where(finite, dist, 0.0).sum(axis=1)
    return np.where(total > 0, reach / np.where(total > 0, total, 1.0), 0.0)


def edge_closeness(g: Graph, dist: np.ndarray | None = None) -> np.ndarray:
    c = node_closeness(g, dist)
    if g.num_edges == 0:
        return np.zeros(0)
    return (c[g.edges[:, 0]] + c[g.edges[:, 1]]) / 2.0


def edge_clustering_coefficient(g: Graph) -> np.ndarray:
    """Triangles through the edge over ``min(deg) - 1``; 0 when that is <= 0."""
    if g.num_edges == 0:
        return np.zeros(0)
    A = g.sparse_adjacency
    u, v = g.edges[:, 0], g.edges[:, 1]
    tri = np.asarray((A[u].multiply(A[v])).sum(axis=1)).ravel()
    denom = np.minimum(g.degrees[u], g.degrees[v]) - 1
    return np.where(denom > 0, tri / np.where(denom > 0, denom, 1), 0.0)


@dataclass(frozen=True)
class EdgeCentralityTable:
    eb: np.ndarray
    ec: np.ndarray
    ecc: np.ndarray

    @property
    def raw(self) -> np.ndarray:
        return np.stack([self.eb, self.ec, self.ecc], axis=1)

    @property
    def matrix(self) -> np.ndarray:
        """``e x 3`` array, each channel standardised unless it is constant."""
        return standardize_columns(self.raw)


def standardize_columns(M: np.ndarray) -> np.ndarray:
    if M.shape[0] == 0:
        return M.copy()
    mean = M.mean(axis=0)
    var = M.var(axis=0)
    out = M.copy()
    cols = var > STANDARDIZE_MIN_VAR
    out[:, cols] = (M[:, cols] - mean[cols]) / np.sqrt(var[cols])
    return out


def edge_feature_table(g: Graph) -> EdgeCentralityTable:
    return EdgeCentralityTable(
        eb=edge_betweenness(g),
        ec=edge_closeness(g),
        ecc=edge_clustering_coefficient(g),
    )
