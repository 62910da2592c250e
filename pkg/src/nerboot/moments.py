"""Fourth-moment estimation of the two error distributions.

Within-cluster contrasts of fitted residuals identify E(V^4): for the pair
statistic W_ij1j2(1, -1) the cluster effect cancels, and averaging its
fourth power over ordered pairs of distinct observations gives

    E{W-bar_4(1,-1)} = 2 a4 E(V^4) + 6 c_pair (E V^2)^2,

with pair-average coefficients a4 and c_pair.  The shortcut a4 =
N^-1 sum s^4 equals the exact pair average only for equal cluster sizes;
the exact coefficient sum_i (n_i - 1) sum_j s_ij^4 / sum_i n_i (n_i - 1)
is used here so the identity also holds for unbalanced designs.  E(U^4)
then follows from raw fourth powers of residuals.  Both estimators are
truncated from below at the squared variance estimates, which keeps every
matched distribution feasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gls import FixedEffects
from .model import Dataset


@dataclass(frozen=True)
class FourthMoments:
    gamma_u: float  # >= sigma2_u^2
    gamma_v: float  # >= sigma2_v^2


class _MomentDesign:
    def __init__(self, d: Dataset):
        lo = d.starts[:-1]
        sizes = d.sizes
        s2 = d.s**2
        self.s2_sum = np.add.reduceat(s2, lo)           # per cluster
        self.s4_sum = np.add.reduceat(s2**2, lo)
        self.pair_count = float(np.sum(sizes * (sizes - 1)))
        self.a4_pair = float(np.sum((sizes - 1) * self.s4_sum)) / self.pair_count
        self.c_pair = float(np.sum(self.s2_sum**2 - self.s4_sum)) / self.pair_count
        self.sum_s2 = float(np.sum(s2))
        self.sum_s4 = float(np.sum(s2**2))
        # per-size observation gather indices for batched pair sums
        self.groups = [
            lo[np.flatnonzero(sizes == m)][:, None] + np.arange(m)[None, :]
            for m in np.unique(sizes)
        ]


def _moment_design(d: Dataset) -> _MomentDesign:
    if "moment_design" not in d._cache:
        d._cache["moment_design"] = _MomentDesign(d)
    return d._cache["moment_design"]


def _residuals(d: Dataset, fe: FixedEffects) -> np.ndarray:
    return d.y - fe.mu - d.x @ fe.beta


def pair_contrast_moment(
    d: Dataset, fe: FixedEffects, k: int, s_coef: float, t_coef: float
) -> float:
    """Average of (s e_ij1 + t e_ij2)^k over ordered pairs j1 != j2.

    e_ij are the fitted residuals y_ij - mu-hat - x_ij' beta-hat; the
    denominator is sum_i n_i (n_i - 1).
    """
    design = _moment_design(d)
    resid = _residuals(d, fe)
    total = 0.0
    for oidx in design.groups:
        r = resid[oidx]  # (g, m)
        w = s_coef * r[:, :, None] + t_coef * r[:, None, :]
        total += float(np.sum(w**k))
        # remove the j1 = j2 diagonal included by the broadcast
        total -= float(np.sum(((s_coef + t_coef) * r) ** k))
    return total / design.pair_count


def estimate_gamma_v(d: Dataset, fe: FixedEffects, sigma2_v: float) -> float:
    """Truncated estimator of E(V^4) from fourth-power pair contrasts."""
    design = _moment_design(d)
    w4 = pair_contrast_moment(d, fe, 4, 1.0, -1.0)
    raw = (w4 - 6.0 * design.c_pair * sigma2_v**2) / (2.0 * design.a4_pair)
    return max(raw, sigma2_v**2)


def estimate_gamma_u(
    d: Dataset, fe: FixedEffects, sigma2_u: float, sigma2_v: float, gamma_v: float
) -> float:
    """Truncated estimator of E(U^4) from raw fourth powers of residuals."""
    design = _moment_design(d)
    resid4 = float(np.sum(_residuals(d, fe) ** 4))
    raw = (
        resid4 - 6.0 * sigma2_u * sigma2_v * design.sum_s2 - gamma_v * design.sum_s4
    ) / d.total
    return max(raw, sigma2_u**2)


def estimate_fourth_moments(
    d: Dataset, fe: FixedEffects, sigma2_u: float, sigma2_v: float
) -> FourthMoments:
    gamma_v = estimate_gamma_v(d, fe, sigma2_v)
    gamma_u = estimate_gamma_u(d, fe, sigma2_u, sigma2_v, gamma_v)
    return FourthMoments(gamma_u=gamma_u, gamma_v=gamma_v)
