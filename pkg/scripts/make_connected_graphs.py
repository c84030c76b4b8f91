"""Write every connected 8-node graph (up to isomorphism) as graph6.

Each connected graph on 8 nodes has a non-cut vertex, so it arises from a
connected 7-node graph by adding one vertex joined to a nonempty subset.
Candidates are bucketed by an invariant and deduplicated with an exact
isomorphism test.

    python3 scripts/make_connected_graphs.py tests/data/connected8.g6
"""
import itertools
import sys

import networkx as nx
import numpy as np


def invariant(A: np.ndarray) -> tuple:
    """Sorted per-node (closed walks up to length 8, sorted row of A^3)."""
    powers = [A]
    for _ in range(7):
        powers.append(powers[-1] @ A)
    rows = []
    for v in range(len(A)):
        walks = tuple(int(P[v, v]) for P in powers)
        rows.append(walks + tuple(sorted(powers[2][v].tolist())))
    return tuple(sorted(rows))


def main(out: str) -> None:
    n = 8
    base = [g for g in nx.graph_atlas_g() if g.number_of_nodes() == n - 1 and nx.is_connected(g)]
    buckets: dict[tuple, list[nx.Graph]] = {}
    count = 0
    for g in base:
        A0 = nx.to_numpy_array(g, nodelist=range(n - 1), dtype=np.int64)
        for r in range(1, n):
            for subset in itertools.combinations(range(n - 1), r):
                A = np.zeros((n, n), dtype=np.int64)
                A[: n - 1, : n - 1] = A0
                A[n - 1, list(subset)] = 1
                A[list(subset), n - 1] = 1
                key = invariant(A)
                h = nx.from_numpy_array(A)
                bucket = buckets.setdefault(key, [])
                if any(nx.is_isomorphic(h, o) for o in bucket):
                    continue
                bucket.append(h)
                count += 1
    with open(out, "w") as f:
        for bucket in buckets.values():
            for h in bucket:
                f.write(nx.to_graph6_bytes(h, nodes=range(n), header=False).decode())
    print(f"{count} connected graphs on {n} nodes")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "connected8.g6")
