"""Graph-level contrastive loss, node-level variance/invariance/covariance loss."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def nt_xent(z_i, z_j, tau: float) -> Tensor:
    """Normalised-temperature cross entropy over the ``2n`` stacked views.

    Anchor ``a`` pairs with ``a + n`` (mod ``2n``); every other row is a
    negative. Returns the mean over all ``2n`` anchors.
    """
    z_i, z_j = ad.as_tensor(z_i), ad.as_tensor(z_j)
    if z_i.shape != z_j.shape or z_i.ndim != 2:
        raise ValueError(f"view batches must share a 2-d shape, got {z_i.shape} and {z_j.shape}")
    if tau <= 0:
        raise ValueError("temperature must be positive")
    n = z_i.shape[0]
    if n < 1:
        raise ValueError("need at least one pair")
    Z = ad.concat([z_i, z_j], axis=0)
    sim = ad.scale(ad.cosine_similarity_matrix(Z, Z), 1.0 / tau)
    anchors = np.arange(2 * n)
    positives = (anchors + n) % (2 * n)
    mask = ~np.eye(2 * n, dtype=bool)
    per_anchor = ad.sub(ad.masked_logsumexp(sim, mask), sim[anchors, positives])
    return ad.mean(per_anchor)


def _std(H: Tensor, eps: float) -> Tensor:
    return ad.sqrt(ad.add(ad.var(H, axis=0, ddof=1), eps))


def _offdiag_cov_sq(H: Tensor) -> Tensor:
    m, d = H.shape
    centered = ad.sub(H, ad.mean(H, axis=0, keepdims=True))
    C = ad.scale(ad.matmul(ad.transpose(centered), centered), 1.0 / (m - 1))
    return ad.mul(ad.square(C), 1.0 - np.eye(d))


def vicreg_terms(H_i, H_j, gamma: float = 1.0, eps_std: float = 1e-4, per_view: bool = False) -> tuple[Tensor, Tensor, Tensor]:
    """``(L_inv, L_var, L_cov)`` for row-aligned node embeddings.

    By default the variance and covariance terms compare the two views (the
    absolute difference of per-view hinge / squared-covariance values).
    ``per_view=True`` gives the usual form that penalises each view on its
    own. With fewer than two rows both terms are zero.
    """
    H_i, H_j = ad.as_tensor(H_i), ad.as_tensor(H_j)
    if H_i.shape != H_j.shape or H_i.ndim != 2:
        raise ValueError(f"node embeddings must share a 2-d shape, got {H_i.shape} and {H_j.shape}")
    m, d = H_i.shape
    if m == 0:
        raise ValueError("no aligned nodes")
    diff = ad.sub(H_i, H_j)
    inv = ad.scale(ad.sum(ad.square(diff)), 1.0 / m)
    if m < 2:
        zero = ad.scale(ad.sum(ad.square(diff)), 0.0)
        return inv, zero, zero
    hinge_i = ad.relu(ad.sub(gamma, _std(H_i, eps_std)))
    hinge_j = ad.relu(ad.sub(gamma, _std(H_j, eps_std)))
    cov_i, cov_j = _offdiag_cov_sq(H_i), _offdiag_cov_sq(H_j)
    if per_view:
        var = ad.scale(ad.add(ad.sum(hinge_i), ad.sum(hinge_j)), 1.0 / d)
        cov = ad.scale(ad.add(ad.sum(cov_i), ad.sum(cov_j)), 1.0 / d)
    else:
        var = ad.scale(ad.sum(ad.abs(ad.sub(hinge_i, hinge_j))), 1.0 / d)
        cov = ad.scale(ad.sum(ad.abs(ad.sub(cov_i, cov_j))), 1.0 / d)
    return inv, var, cov


def vicreg(
    H_i,
    H_j,
    lam_inv: float = 1.0,
    lam_var: float = 25.0,
    lam_cov: float = 25.0,
    gamma: float = 1.0,
    eps_std: float = 1e-4,
    per_view: bool = False,
) -> Tensor:
    inv, var, cov = vicreg_terms(H_i, H_j, gamma, eps_std, per_view)
    return ad.add(ad.add(ad.scale(inv, lam_inv), ad.scale(var, lam_var)), ad.scale(cov, lam_cov))


def total_loss(z_i, z_j, node_pairs, tau: float, alpha: float, **vicreg_kwargs) -> Tensor:
    """NT-Xent on the graph batch plus ``alpha`` times the mean per-graph VICReg.

    ``node_pairs`` is a list of row-aligned ``(H_i, H_j)`` pairs, one per graph.
    With ``alpha == 0`` the node term is skipped entirely.
    """
    loss = nt_xent(z_i, z_j, tau)
    if alpha == 0 or not node_pairs:
        return loss
    node = ad.scale(
        _sum_all([vicreg(H_i, H_j, **vicreg_kwargs) for H_i, H_j in node_pairs]), 1.0 / len(node_pairs)
    )
    return ad.add(loss, ad.scale(node, alpha))


def _sum_all(ts: list[Tensor]) -> Tensor:
    out = ts[0]
    for t in ts[1:]:
        out = ad.add(out, t)
    return out
