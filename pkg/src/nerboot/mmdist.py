"""Moment-matching resampling distributions.

A matched distribution is any zero-mean law with prescribed variance z2
and fourth moment z4 (feasible whenever z2^2 <= z4).  Two families are
provided:

* three-point: atoms {0, +-sqrt(z2/p)} with P(0) = 1 - p and p = z2^2/z4;
  covers every feasible pair, including the degenerate point mass needed
  when the between-cluster variance estimate is truncated to zero.
* rescaled Student's t with fractional degrees of freedom, available only
  for kurtosis z4/z2^2 > 3; the df solve is r = (4 kappa - 6)/(kappa - 3)
  and the scale sqrt(z2 (r - 2)/r) fixes the variance.

Only these two moments matter to the bootstrap bias correction to first
order, which is why the family choice is a detail rather than a model
assumption.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import KurtosisNotHeavy, MomentInfeasible

log = logging.getLogger(__name__)

THREE_POINT = "three_point"
STUDENT_T = "student_t"
FAMILIES = (THREE_POINT, STUDENT_T)


@dataclass(frozen=True)
class MatchedDistribution:
    family: str
    z2: float
    z4: float
    params: dict


def _check_feasible(z2: float, z4: float) -> None:
    if z2 < 0:
        raise MomentInfeasible(f"variance z2 must be >= 0, got {z2}")
    if z4 < z2**2:
        raise MomentInfeasible(f"need z4 >= z2^2, got z2={z2}, z4={z4}")
    if z2 > 0 and z4 <= 0:
        raise MomentInfeasible(f"z4 must be positive when z2 > 0, got {z4}")


def make_three_point(z2: float, z4: float) -> MatchedDistribution:
    """Three-point law: 0 w.p. 1-p, +-sqrt(z2/p) w.p. p/2, p = z2^2/z4.

    z2 = 0 degenerates to a point mass at zero (p = 0 by convention).
    """
    _check_feasible(z2, z4)
    if z2 == 0.0:
        p, atom = 0.0, 0.0
    else:
        p = z2**2 / z4
        atom = math.sqrt(z2 / p)
    return MatchedDistribution(
        family=THREE_POINT, z2=float(z2), z4=float(z4), params={"p": p, "atom": atom}
    )


def make_student_t(z2: float, z4: float) -> MatchedDistribution:
    """Rescaled Student's t matching (z2, z4); needs kurtosis above 3."""
    _check_feasible(z2, z4)
    if z2 <= 0:
        raise KurtosisNotHeavy("student_t matching requires z2 > 0")
    kurt = z4 / z2**2
    if kurt <= 3.0:
        raise KurtosisNotHeavy(
            f"student_t matching requires z4/z2^2 > 3, got {kurt:.6g}"
        )
    df = (4.0 * kurt - 6.0) / (kurt - 3.0)  # > 4, not necessarily an integer
    scale = math.sqrt(z2 * (df - 2.0) / df)
    return MatchedDistribution(
        family=STUDENT_T, z2=float(z2), z4=float(z4), params={"df": df, "scale": scale}
    )


def make_distribution(
    z2: float, z4: float, family: str = THREE_POINT
) -> MatchedDistribution:
    """Family dispatch with the documented fallback.

    When ``student_t`` is requested but the kurtosis is not above 3 (or the
    law is degenerate), the three-point family is used instead; the
    substitution is logged at DEBUG level.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if family == STUDENT_T:
        try:
            return make_student_t(z2, z4)
        except KurtosisNotHeavy:
            log.debug(
                "student_t infeasible for z2=%g, z4=%g; falling back to three_point",
                z2,
                z4,
            )
    return make_three_point(z2, z4)


def sample(dist: MatchedDistribution, rng: np.random.Generator, count: int):
    """``count`` i.i.d. draws; deterministic given the generator state."""
    if dist.family == THREE_POINT:
        p, atom = dist.params["p"], dist.params["atom"]
        u = rng.random(count)
        return np.where(u < 0.5 * p, atom, np.where(u < p, -atom, 0.0))
    df, scale = dist.params["df"], dist.params["scale"]
    # gamma-mixture representation of t_df, exact for fractional df
    z = rng.standard_normal(count)
    chi2 = rng.gamma(shape=df / 2.0, scale=2.0, size=count)
    return scale * z / np.sqrt(chi2 / df)
