"""Laplacian eigenvector positional encodings."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .graph import Graph

TRIVIAL_EIGENVALUE = 1e-8
_TIE_TOL = 1e-10


@dataclass(frozen=True)
class PositionalEncoding:
    pe: np.ndarray
    p: int
    used_dims: int
    eigenvalues: np.ndarray  # eigenvalues of the used columns, length used_dims


def laplacian_matrix(g: Graph) -> np.ndarray:
    A = g.adjacency.astype(np.float64)
    return np.diag(A.sum(axis=1)) - A


def canonicalize_signs(U: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Entries within ``1e-10`` of the column maximum count as tied and the
    lowest row index among them decides.
    """
    U = U.copy()
    for j in range(U.shape[1]):
        col = np.abs(U[:, j])
        top = col.max(initial=0.0)
        if top == 0.0:
            continue
        i = int(np.flatnonzero(col >= top - _TIE_TOL)[0])
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
    return U


def laplacian_pe(g: Graph, p: int) -> PositionalEncoding:
    """The ``p`` smallest non-trivial Laplacian eigenvectors, zero-padded."""
    if p < 1:
        raise ValueError(f"PE dimension must be >= 1, got {p}")
    m = g.num_nodes
    pe = np.zeros((m, p))
    if m == 0:
        return PositionalEncoding(pe, p, 0, np.zeros(0))
    w, U = np.linalg.eigh(laplacian_matrix(g))
    nontrivial = np.flatnonzero(w >= TRIVIAL_EIGENVALUE)[:p]
    used = len(nontrivial)
    V = U[:, nontrivial]
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    pe[:, :used] = canonicalize_signs(V)
    return PositionalEncoding(pe, p, used, w[nontrivial].copy())


def random_sign_flip(pe: PositionalEncoding, seed: int | np.random.Generator) -> PositionalEncoding:
    """Independently negate each used column with probability 1/2."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    signs = np.ones(pe.p)
    signs[: pe.used_dims] = rng.choice([-1.0, 1.0], size=pe.used_dims)
    return replace(pe, pe=pe.pe * signs)
