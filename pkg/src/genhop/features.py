"""Per-graph structural tables and block-diagonal batching for the encoders."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import scipy.sparse as sp

from .centrality import EdgeCentralityTable, edge_feature_table
from .graph import Graph, KHopWeights, WalkProfile, adjacency_powers, closed_walk_profile, normalized_khop_weights
from .spectral import PositionalEncoding, laplacian_pe, random_sign_flip


@dataclass(frozen=True)
class StructuralFeatureSet:
    graph: Graph
    walk: WalkProfile
    khop: KHopWeights
    centrality: EdgeCentralityTable
    pe: PositionalEncoding


def featurize(
    g: Graph,
    K: int,
    p: int,
    denominator: Literal["khop", "one_hop"] = "khop",
) -> StructuralFeatureSet:
    """All structural tables of ``g`` needed by one forward pass."""
    powers = adjacency_powers(g, K)
    return StructuralFeatureSet(
        graph=g,
        walk=closed_walk_profile(g, K, powers),
        khop=normalized_khop_weights(g, K, powers, denominator),
        centrality=edge_feature_table(g),
        pe=laplacian_pe(g, p),
    )


def closed_walk_coefficients(walk: WalkProfile, raw: bool = False) -> np.ndarray:
    """Per-node multiplier ``sum_k A^k_vv`` (each term log1p-scaled unless ``raw``)."""
    vals = walk.values.astype(np.float64)
    return vals.sum(axis=1) if raw else np.log1p(vals).sum(axis=1)


@dataclass(frozen=True)
class GraphBatch:
    """Several graphs as one block-diagonal graph.

    ``incidence`` is ``m x e`` with a one at both endpoints of every edge, so
    ``incidence @ E`` adds each edge's embedding to both of its endpoints.
    ``pool`` is ``n x m`` and sums node rows per graph.
    """

    num_graphs: int
    node_graph: np.ndarray
    node_offsets: np.ndarray
    adjacency: sp.csr_matrix
    incidence: sp.csr_matrix
    khop: sp.csr_matrix
    walk_coeff: np.ndarray
    pool: sp.csr_matrix
    x: np.ndarray
    pe: np.ndarray
    centrality: np.ndarray
    edge_attr: np.ndarray | None
    origins: list[np.ndarray]

    @property
    def num_nodes(self) -> int:
        return int(self.node_graph.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.centrality.shape[0])

    @classmethod
    def from_features(
        cls,
        feats: Sequence[StructuralFeatureSet],
        raw_closed_walks: bool = False,
        pe_rng: np.random.Generator | None = None,
    ) -> "GraphBatch":
        """Stack feature sets; with ``pe_rng`` each graph's PE signs are flipped at random."""
        if not feats:
            raise ValueError("cannot batch zero graphs")
        sizes = np.array([f.graph.num_nodes for f in feats], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        m = int(offsets[-1])
        rows, cols, edge_ids, edge_nodes = [], [], [], []
        e_off = 0
        for f, off in zip(feats, offsets[:-1]):
            E = f.graph.edges + off
            rows.append(E.ravel())
            edge_ids.append(np.repeat(np.arange(e_off, e_off + len(E)), 2))
            edge_nodes.append(E)
            e_off += len(E)
        inc_rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        inc_cols = np.concatenate(edge_ids) if edge_ids else np.zeros(0, np.int64)
        incidence = sp.csr_matrix((np.ones(len(inc_rows)), (inc_rows, inc_cols)), shape=(m, e_off))
        adjacency = sp.block_diag([f.graph.sparse_adjacency for f in feats], format="csr")
        khop = sp.block_diag([f.khop.combined() for f in feats], format="csr")
        node_graph = np.repeat(np.arange(len(feats)), sizes)
        pool = sp.csr_matrix((np.ones(m), (node_graph, np.arange(m))), shape=(len(feats), m))
        dims = {f.graph.x.shape[1] for f in feats}
        if len(dims) != 1:
            raise ValueError(f"node feature widths differ across the batch: {sorted(dims)}")
        pes = []
        for f in feats:
            pe = f.pe if pe_rng is None else random_sign_flip(f.pe, pe_rng)
            pes.append(pe.pe)
        attrs = [f.graph.edge_attr for f in feats]
        if all(a is None for a in attrs):
            edge_attr = None
        elif any(a is None for a in attrs):
            raise ValueError("either every graph in a batch has raw edge features or none does")
        else:
            edge_attr = np.concatenate(attrs, axis=0)
        return cls(
            num_graphs=len(feats),
            node_graph=node_graph,
            node_offsets=offsets,
            adjacency=adjacency,
            incidence=incidence,
            khop=khop,
            walk_coeff=np.concatenate([closed_walk_coefficients(f.walk, raw_closed_walks) for f in feats]),
            pool=pool,
            x=np.concatenate([f.graph.x for f in feats], axis=0),
            pe=np.concatenate(pes, axis=0),
            centrality=np.concatenate([f.centrality.matrix for f in feats], axis=0).reshape(-1, 3),
            edge_attr=edge_attr,
            origins=[f.graph.origin for f in feats],
        )
