"""Datasets: circular skip-link graphs, graph6, a JSON schema and small fixtures."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .graph import Graph, closed_walk_profile, cycle_graph, disjoint_union, from_edge_list, permute
from .spectral import laplacian_matrix


@dataclass
class Dataset:
    graphs: list[Graph]
    labels: list[int]
    name: str = "dataset"
    class_count: int | None = None

    def __post_init__(self):
        if len(self.graphs) != len(self.labels):
            raise ValueError(f"{len(self.graphs)} graphs but {len(self.labels)} labels")
        if self.class_count is None:
            self.class_count = max(self.labels) + 1 if self.labels else 0
        bad = [i for i, y in enumerate(self.labels) if not 0 <= y < self.class_count]
        if bad:
            raise ValueError(f"labels outside [0, {self.class_count}) at graph indices {bad[:5]}")

    @property
    def feature_dim(self) -> int:
        return self.graphs[0].x.shape[1] if self.graphs else 0

    def __len__(self) -> int:
        return len(self.graphs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.labels == other.labels
            and self.class_count == other.class_count
            and len(self.graphs) == len(other.graphs)
            and all(a == b for a, b in zip(self.graphs, other.graphs))
        )


# circular skip-link graphs --------------------------------------------------

def generate_csl(m: int, R: int) -> Graph:
    """Cycle ``C_m`` plus the chords ``{i, i + R mod m}``."""
    if m < 5:
        raise ValueError(f"CSL graphs need m >= 5, got {m}")
    if not 2 <= R < m / 2:
        raise ValueError(f"skip must satisfy 2 <= R < m/2, got R={R} for m={m}")
    pairs = [(i, (i + 1) % m) for i in range(m)] + [(i, (i + R) % m) for i in range(m)]
    return from_edge_list(m, pairs)


def _skip_orbit(m: int, R: int) -> set[int]:
    orbit = {R % m, (-R) % m}
    if math.gcd(R, m) == 1:
        inv = pow(R, -1, m)
        orbit |= {inv, (-inv) % m}
    return orbit


def _multiplier_isomorphic(m: int, R: int, S: int) -> bool:
    """Check that ``x -> R^-1 x`` maps C(1, R) onto C(1, S) edge for edge."""
    inv = pow(R, -1, m)
    mapped = {tuple(sorted(((inv * u) % m, (inv * v) % m))) for u, v in generate_csl(m, R).edges.tolist()}
    return mapped == generate_csl(m, S).edge_set()


def _invariant(g: Graph, K: int = 8) -> tuple:
    walks = tuple(sorted(closed_walk_profile(g, K).rows()))
    spectrum = tuple(np.round(np.linalg.eigvalsh(laplacian_matrix(g)), 8))
    return walks, spectrum


def enumerate_csl_classes(m: int, max_R: int) -> list[int]:
    """Smallest skip of each isomorphism class among ``R = 2..max_R``.

    Skips are merged when ``R' = +-R`` or ``+-R^-1 (mod m)``; each merge is
    certified by an explicit multiplier isomorphism, and the resulting classes
    are certified distinct by an invariant or, failing that, a full
    isomorphism test.
    """
    skips = [R for R in range(2, max_R + 1) if R < m / 2]
    reps: list[int] = []
    for R in skips:
        for rep in reps:
            if R in _skip_orbit(m, rep):
                if math.gcd(rep, m) == 1 and (R * rep) % m in (1, m - 1):
                    if not _multiplier_isomorphic(m, rep, R):
                        raise AssertionError(f"multiplier map failed for skips {rep} and {R}")
                break
        else:
            reps.append(R)
    graphs = {R: generate_csl(m, R) for R in reps}
    invs = {R: _invariant(g) for R, g in graphs.items()}
    for i, a in enumerate(reps):
        for b in reps[i + 1 :]:
            if invs[a] == invs[b] and nx.is_isomorphic(_to_nx(graphs[a]), _to_nx(graphs[b])):
                raise AssertionError(f"skips {a} and {b} give isomorphic graphs outside the multiplier orbit")
    return sorted(reps)


def _to_nx(g: Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.num_nodes))
    h.add_edges_from(g.edges.tolist())
    return h


def csl_dataset(
    m: int = 41,
    max_R: int = 20,
    copies: int = 10,
    seed: int = 0,
    relabel: bool = True,
) -> Dataset:
    """``copies`` graphs per skip class, each under a fresh random relabelling."""
    reps = enumerate_csl_classes(m, max_R)
    rng = np.random.default_rng(seed)
    graphs, labels = [], []
    for label, R in enumerate(reps):
        base = generate_csl(m, R)
        for _ in range(copies):
            g = permute(base, rng.permutation(m)) if relabel else base
            graphs.append(g.with_label(label))
            labels.append(label)
    return Dataset(graphs, labels, name=f"CSL{m}", class_count=len(reps))


# graph6 ------------------------------------------------------------------------

GRAPH6_HEADER = ">>graph6<<"


def _encode_n(n: int) -> list[int]:
    if n < 0:
        raise ValueError("negative node count")
    if n <= 62:
        return [n]
    if n <= 258047:
        return [63, (n >> 12) & 63, (n >> 6) & 63, n & 63]
    if n <= 68719476735:
        return [63, 63] + [(n >> s) & 63 for s in (30, 24, 18, 12, 6, 0)]
    raise ValueError(f"graph6 cannot encode {n} nodes")


def write_graph6(g: Graph) -> str:
    n = g.num_nodes
    A = g.adjacency
    bits = [int(A[i, j]) for j in range(1, n) for i in range(j)]
    bits += [0] * (-len(bits) % 6)
    body = [int("".join(map(str, bits[k : k + 6])), 2) for k in range(0, len(bits), 6)]
    return "".join(chr(63 + v) for v in _encode_n(n) + body)


def parse_graph6(line: str) -> Graph:
    s = line.strip()
    if s.startswith(GRAPH6_HEADER):
        s = s[len(GRAPH6_HEADER) :]
    if not s:
        raise ValueError("empty graph6 string")
    bad = [c for c in s if not 63 <= ord(c) <= 126]
    if bad:
        raise ValueError(f"character {bad[0]!r} outside the graph6 range 63..126")
    vals = [ord(c) - 63 for c in s]
    if vals[0] < 63:
        n, pos = vals[0], 1
    elif len(vals) >= 2 and vals[1] < 63:
        if len(vals) < 4:
            raise ValueError("truncated graph6 size header")
        n, pos = (vals[1] << 12) | (vals[2] << 6) | vals[3], 4
        if n <= 62:
            raise ValueError("graph6 long header used for a small graph")
    else:
        if len(vals) < 8:
            raise ValueError("truncated graph6 size header")
        n = 0
        for v in vals[2:8]:
            n = (n << 6) | v
        pos = 8
    need = math.ceil(n * (n - 1) // 2 / 6)
    body = vals[pos:]
    if len(body) < need:
        raise ValueError(f"truncated graph6 bit region: need {need} bytes, got {len(body)}")
    if len(body) > need:
        raise ValueError(f"graph6 string has {len(body) - need} trailing bytes")
    bits = [(v >> (5 - b)) & 1 for v in body for b in range(6)]
    pairs, k = [], 0
    for j in range(1, n):
        for i in range(j):
            if bits[k]:
                pairs.append((i, j))
            k += 1
    return from_edge_list(n, pairs)


def read_graph6_file(path: str | Path) -> list[Graph]:
    graphs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            graphs.append(parse_graph6(line))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return graphs


def write_graph6_file(graphs: Iterable[Graph], path: str | Path) -> None:
    Path(path).write_text("".join(write_graph6(g) + "\n" for g in graphs), encoding="utf-8")


SR25_PARAMS = (25, 12, 5, 6)


def is_strongly_regular(g: Graph, params: tuple[int, int, int, int]) -> bool:
    n, k, lam, mu = params
    if g.num_nodes != n:
        return False
    A = g.adjacency
    target = np.where(A == 1, lam, mu)
    np.fill_diagonal(target, k)
    return bool(np.array_equal(A @ A, target))


def load_sr25(path: str | Path, expected: int = 15) -> list[Graph]:
    """Read the SR(25,12,5,6) family, checking the parameters and the count."""
    graphs = read_graph6_file(path)
    if len(graphs) != expected:
        raise ValueError(f"{path}: expected {expected} graphs, found {len(graphs)}")
    for i, g in enumerate(graphs):
        if not is_strongly_regular(g, SR25_PARAMS):
            raise ValueError(f"{path}: graph {i} is not strongly regular with parameters {SR25_PARAMS}")
    return graphs


def sr25_dataset(path: str | Path, copies: int = 10) -> Dataset:
    """One class per graph; copies keep the stored labelling."""
    base = load_sr25(path)
    graphs, labels = [], []
    for label, g in enumerate(base):
        for _ in range(copies):
            graphs.append(g.with_label(label))
            labels.append(label)
    return Dataset(graphs, labels, name="SR25", class_count=len(base))


# JSON datasets -----------------------------------------------------------------

def _fail(path, where: str, msg: str):
    raise ValueError(f"{path}: {where}: {msg}")


def dataset_from_dict(doc: dict, path: str = "<dict>") -> Dataset:
    if not isinstance(doc, dict):
        _fail(path, "top level", "expected an object")
    for key in ("name", "graphs"):
        if key not in doc:
            _fail(path, "top level", f"missing field {key!r}")
    if not isinstance(doc["graphs"], list):
        _fail(path, "graphs", "expected a list")
    graphs, labels = [], []
    for i, rec in enumerate(doc["graphs"]):
        where = f"graphs[{i}]"
        if not isinstance(rec, dict):
            _fail(path, where, "expected an object")
        for key in ("n", "edges", "y"):
            if key not in rec:
                _fail(path, where, f"missing field {key!r}")
        n, y = rec["n"], rec["y"]
        if not isinstance(n, int) or n < 0:
            _fail(path, f"{where}.n", "must be a nonnegative integer")
        if not isinstance(y, int):
            _fail(path, f"{where}.y", "must be an integer")
        edges = rec["edges"]
        if not isinstance(edges, list) or any(not isinstance(e, list) or len(e) != 2 for e in edges):
            _fail(path, f"{where}.edges", "must be a list of [u, v] pairs")
        x = np.asarray(rec["x"], dtype=np.float64) if rec.get("x") is not None else None
        ea = np.asarray(rec["edge_attr"], dtype=np.float64) if rec.get("edge_attr") is not None else None
        if ea is not None and ea.ndim == 1:
            ea = ea[:, None]
        try:
            g = from_edge_list(n, edges, node_features=x, edge_features=ea, y=y)
        except ValueError as exc:
            _fail(path, where, str(exc))
        graphs.append(g)
        labels.append(y)
    classes = doc.get("classes")
    try:
        return Dataset(graphs, labels, name=str(doc["name"]), class_count=classes)
    except ValueError as exc:
        _fail(path, "labels", str(exc))


def load_dataset_json(path: str | Path) -> Dataset:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return dataset_from_dict(doc, str(path))


def dataset_to_dict(ds: Dataset) -> dict:
    graphs = []
    for g, y in zip(ds.graphs, ds.labels):
        rec = {"n": g.num_nodes, "edges": g.edges.tolist(), "x": g.x.tolist(), "y": int(y)}
        if g.edge_attr is not None:
            rec["edge_attr"] = g.edge_attr.tolist()
        graphs.append(rec)
    return {"name": ds.name, "classes": ds.class_count, "graphs": graphs}


def save_dataset_json(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dataset_to_dict(ds)), encoding="utf-8")


# fixtures ---------------------------------------------------------------------

def _ring_pairs(nodes: Sequence[int]) -> list[tuple[int, int]]:
    return [(nodes[i], nodes[(i + 1) % len(nodes)]) for i in range(len(nodes))]


def _fixtures() -> dict[str, tuple[Graph, Graph]]:
    # two hexagons sharing the bond 0-5 / two pentagons joined by the bond 0-5
    decalin = from_edge_list(10, _ring_pairs(range(10)) + [(0, 5)])
    bicyclopentyl = from_edge_list(10, _ring_pairs(range(5)) + _ring_pairs(range(5, 10)) + [(0, 5)])
    # triangular prism vs complete bipartite K3,3; both cubic on six nodes
    prism = from_edge_list(6, _ring_pairs([0, 1, 2]) + _ring_pairs([3, 4, 5]) + [(0, 3), (1, 4), (2, 5)])
    k33 = from_edge_list(6, [(i, j) for i in range(3) for j in range(3, 6)])
    # two pentagons sharing the edge 0-4 / two squares joined by the edge 0-4
    pentagons = from_edge_list(8, _ring_pairs(range(8)) + [(0, 4)])
    squares = from_edge_list(8, _ring_pairs(range(4)) + _ring_pairs(range(4, 8)) + [(0, 4)])
    return {
        "decalin_bicyclopentyl": (decalin, bicyclopentyl),
        "fig3_pair": (prism, k33),
        "fig4_pair": (pentagons, squares),
        "triangles_vs_hexagon": (disjoint_union(cycle_graph(3), cycle_graph(3)), cycle_graph(6)),
    }


FIXTURE_NAMES = tuple(_fixtures())

# nodes of interest in each fixture (the two bridge-head nodes)
FIXTURE_FOCUS = {"fig4_pair": ((0, 4), (0, 4)), "decalin_bicyclopentyl": ((0, 5), (0, 5))}


def builtin_fixture(name: str) -> tuple[Graph, Graph]:
    fixtures = _fixtures()
    if name not in fixtures:
        raise ValueError(f"unknown fixture {name!r}; choose from {sorted(fixtures)}")
    return fixtures[name]
