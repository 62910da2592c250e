"""Weighted least-squares estimation of the fixed effects (mu, beta).

The weight of cluster i is W_i = sigma_U^2 1 1' + sigma_V^2 diag(s_i1^2,
..., s_in_i^2).  Rather than iterating the coupled textbook displays for
mu-tilde and beta-tilde, the full (r+1)-dimensional GLS normal equations
with design (1, x_ij') are solved in one shot -- algebraically the same
thing (tested against the two-display form).  W_i^-1 is never formed:
with D_i = sigma_V^2 diag(s_i^2),

    W_i^-1 = D_i^-1 - lambda_i (s_i^-2)(s_i^-2)',
    lambda_i = sigma_U^2 / (sigma_V^2 (sigma_V^2 + sigma_U^2 a_i)),

so the normal equations assemble from cached design cross-products in
O(N r) per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficient, SingularWeight
from .model import Dataset
from .transform import _uncentered_design
from .variance import VarianceComponents


@dataclass(frozen=True)
class FixedEffects:
    mu: float
    beta: np.ndarray  # (r,)


@dataclass(frozen=True)
class ClusterWeight:
    """Dense W_i with its rank-one-structured inverse."""

    matrix: np.ndarray  # (n_i, n_i)
    _s: np.ndarray
    _sigma2_u: float
    _sigma2_v: float

    def inverse(self) -> np.ndarray:
        d_inv = 1.0 / (self._sigma2_v * self._s**2)
        denom = 1.0 + self._sigma2_u * float(np.sum(d_inv))
        v = d_inv  # D^-1 1
        return np.diag(d_inv) - (self._sigma2_u / denom) * np.outer(v, v)


def cluster_weights(d: Dataset, vc: VarianceComponents) -> list[ClusterWeight]:
    """Materialized W_i per cluster (diagnostic; estimation never builds them)."""
    if vc.sigma2_v <= 0:
        raise SingularWeight("sigma_V^2 must be positive for invertible weights")
    out = []
    for c in d.clusters:
        w = np.full((c.size, c.size), vc.sigma2_u)
        w[np.arange(c.size), np.arange(c.size)] += vc.sigma2_v * c.s**2
        out.append(
            ClusterWeight(matrix=w, _s=c.s, _sigma2_u=vc.sigma2_u, _sigma2_v=vc.sigma2_v)
        )
    return out


def fit_fixed_effects(d: Dataset, vc: VarianceComponents) -> FixedEffects:
    """Joint GLS solve for (mu, beta) with block weights W_i."""
    if vc.sigma2_v <= 0 or vc.sigma2_u < 0:
        raise SingularWeight(
            f"invalid variance components (sigma2_v={vc.sigma2_v}, "
            f"sigma2_u={vc.sigma2_u})"
        )
    design = _uncentered_design(d)
    w = 1.0 / d.s**2
    a = np.add.reduceat(w, d.starts[:-1])
    lam = vc.sigma2_u / (vc.sigma2_v * (vc.sigma2_v + vc.sigma2_u * a))  # (n,)

    zmat = design.zmat  # (n, r+1): sum_j s^-2 (1, x')' per cluster
    normal = design.gram / vc.sigma2_v - (lam[:, None] * zmat).T @ zmat
    zy = np.add.reduceat(w * d.y, d.starts[:-1])  # a_i * ybar_i
    rhs = design.p_bar_rows.T @ (d.y / d.s) / vc.sigma2_v - zmat.T @ (lam * zy)
    try:
        np.linalg.cholesky(normal)
    except np.linalg.LinAlgError:
        raise RankDeficient("GLS normal equations are singular") from None
    theta = np.linalg.solve(normal, rhs)
    return FixedEffects(mu=float(theta[0]), beta=theta[1:])
