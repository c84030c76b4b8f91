"""1-WL colour refinement, simple-cycle profiles and the profile relation search."""
from __future__ import annotations

import csv
import io
import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, closed_walk_profile

MAX_CYCLE_K = 8


@dataclass(frozen=True)
class WLColoring:
    colors: np.ndarray
    rounds_to_stable: int
    histogram: Counter = field(compare=False)


def _initial_signature(g: Graph, use_features: bool, decimals: int) -> list[tuple]:
    deg = g.degrees.tolist()
    if not use_features:
        return [(d,) for d in deg]
    rows = np.round(g.x, decimals).tolist()
    return [(d, tuple(r)) for d, r in zip(deg, rows)]


def _refine_jointly(
    graphs: list[Graph], max_rounds: int, use_features: bool = False, decimals: int = 6
) -> tuple[list[list[list[int]]], int]:
    """Refine several graphs with one shared recoding dictionary.

    Returns, per round (round 0 = initial colouring), the colour lists of every
    graph, and the number of rounds until the partition stopped splitting.
    Colours are ranks of sorted signatures, so the numbering does not depend
    on node order.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")

    def recode(sigs: list[list[tuple]]) -> list[list[int]]:
        table = {s: i for i, s in enumerate(sorted({s for gs in sigs for s in gs}))}
        return [[table[s] for s in gs] for gs in sigs]

    colors = recode([_initial_signature(g, use_features, decimals) for g in graphs])
    history = [colors]
    n_classes = len({c for gs in colors for c in gs})
    rounds = 0
    for _ in range(max_rounds):
        sigs = [
            [(cs[v], tuple(sorted(cs[u] for u in g.neighbors[v]))) for v in range(g.num_nodes)]
            for g, cs in zip(graphs, colors)
        ]
        new = recode(sigs)
        new_classes = len({c for gs in new for c in gs})
        rounds += 1
        colors = new
        history.append(colors)
        if new_classes == n_classes:
            break
        n_classes = new_classes
    return history, rounds


def wl_refine(g: Graph, max_rounds: int = 100, use_features: bool = False) -> WLColoring:
    history, rounds = _refine_jointly([g], max_rounds, use_features)
    colors = np.array(history[-1][0], dtype=np.int64)
    return WLColoring(colors, rounds, Counter(colors.tolist()))


def wl_distinguish(g1: Graph, g2: Graph, max_rounds: int = 100, use_features: bool = False) -> bool:
    """True iff 1-WL tells the two graphs apart."""
    if g1.num_nodes != g2.num_nodes:
        return True
    history, _ = _refine_jointly([g1, g2], max_rounds, use_features)
    return any(Counter(a) != Counter(b) for a, b in history)


@dataclass(frozen=True)
class CycleProfile:
    """Column ``k - 2`` counts simple cycles of length k through each node."""

    values: np.ndarray
    K: int

    def rows(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in row) for row in self.values]


def cycle_profile(g: Graph, K: int) -> CycleProfile:
    """Per-node simple-cycle counts by DFS, for cycle lengths 2..K.

    Cycles are grown from their smallest vertex ``s`` through larger vertices
    only, so each one is found exactly twice (once per direction); every
    vertex on it is credited once.
    """
    if not 2 <= K <= MAX_CYCLE_K:
        raise ValueError(f"cycle profile supports 2 <= K <= {MAX_CYCLE_K}, got {K}")
    m, nbrs = g.num_nodes, g.neighbors
    adj = [set(n) for n in nbrs]
    counts = np.zeros((m, K - 1), dtype=np.int64)
    on_path = [False] * m

    def extend(s: int, path: list[int]) -> None:
        last = path[-1]
        for u in nbrs[last]:
            if u <= s or on_path[u]:
                continue
            path.append(u)
            on_path[u] = True
            if len(path) >= 3 and s in adj[u]:
                counts[path, len(path) - 2] += 1
            if len(path) < K:
                extend(s, path)
            on_path[u] = False
            path.pop()

    for s in range(m):
        on_path[s] = True
        extend(s, [s])
        on_path[s] = False
    return CycleProfile(counts // 2, K)


@dataclass
class RelationReport:
    """Counts over node pairs of (cycle profiles equal?, closed-walk profiles equal?)."""

    K: int
    counts: dict[tuple[bool, bool], int]
    witnesses: dict[tuple[bool, bool], list[tuple[tuple[int, int], tuple[int, int]]]]
    cycle_rows: list[list[tuple[int, ...]]]
    walk_rows: list[list[tuple[int, ...]]]

    def table(self) -> str:
        lines = ["cycle_equal,walk_equal,pairs"]
        for key in [(True, True), (True, False), (False, True), (False, False)]:
            lines.append(f"{key[0]},{key[1]},{self.counts.get(key, 0)}")
        return "\n".join(lines)

    def witness_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["cell", "graph_a", "node_a", "graph_b", "node_b", "cycle_a", "cycle_b", "walk_a", "walk_b"])
        for key in [(True, False), (False, True)]:
            cell = f"cycle={'eq' if key[0] else 'ne'}/walk={'eq' if key[1] else 'ne'}"
            for (ga, va), (gb, vb) in self.witnesses.get(key, []):
                w.writerow([
                    cell, ga, va, gb, vb,
                    " ".join(map(str, self.cycle_rows[ga][va])), " ".join(map(str, self.cycle_rows[gb][vb])),
                    " ".join(map(str, self.walk_rows[ga][va])), " ".join(map(str, self.walk_rows[gb][vb])),
                ])
        return buf.getvalue()


def profile_relation_search(corpus: list[Graph], K: int) -> RelationReport:
    """Tabulate cycle-profile vs closed-walk-profile equality over all node pairs.

    Node pairs are grouped by their (cycle row, walk row) so the count is
    computed per distinct profile combination; every node pair in an
    off-diagonal cell is listed as a witness.
    """
    cycle_rows = [cycle_profile(g, K).rows() for g in corpus]
    walk_rows = [closed_walk_profile(g, K).rows() for g in corpus]
    nodes = [(gi, v) for gi, g in enumerate(corpus) for v in range(g.num_nodes)]
    counts: Counter = Counter()
    witnesses: dict[tuple[bool, bool], list] = {(True, False): [], (False, True): []}
    groups: dict[tuple, list[tuple[int, int]]] = {}
    for gi, v in nodes:
        groups.setdefault((cycle_rows[gi][v], walk_rows[gi][v]), []).append((gi, v))
    keys = list(groups)
    for key in keys:
        n = len(groups[key])
        counts[(True, True)] += n * (n - 1) // 2
    for ka, kb in itertools.combinations(keys, 2):
        cell = (ka[0] == kb[0], ka[1] == kb[1])
        na, nb = len(groups[ka]), len(groups[kb])
        counts[cell] += na * nb
        if cell in witnesses:
            witnesses[cell].extend(itertools.product(groups[ka], groups[kb]))
    return RelationReport(K, dict(counts), witnesses, cycle_rows, walk_rows)
