"""End-to-end estimation pipeline on one dataset.

Fit order: cluster summaries -> centered regression -> sigma_V^2 ->
uncentered regression -> sigma_U^2 -> GLS fixed effects -> (optionally)
fourth moments -> EBLUP.  Bootstrap refits run exactly this function on
synthetic responses, with the same ridge parameters and the same
dropped-observation convention as the original fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gls import FixedEffects, fit_fixed_effects
from .model import ClusterSummaries, Dataset, summarize
from .moments import FourthMoments, estimate_fourth_moments
from .predictor import Prediction, eblup
from .transform import center, uncenter
from .variance import DEFAULT_RIDGE, VarianceComponents, estimate_sigma2_u, estimate_sigma2_v


@dataclass(frozen=True)
class ModelFit:
    """Everything estimated from one dataset."""

    dataset: Dataset
    summaries: ClusterSummaries
    variance: VarianceComponents
    fixed_effects: FixedEffects
    prediction: Prediction
    fourth_moments: FourthMoments | None = None

    @property
    def theta_hat(self) -> np.ndarray:
        return self.prediction.theta_hat


def fit_model(
    d: Dataset, ridge=DEFAULT_RIDGE, *, with_fourth_moments: bool = True
) -> ModelFit:
    """Fit variance components, fixed effects and EBLUPs on a dataset."""
    cs = summarize(d)
    sigma2_v, sse1 = estimate_sigma2_v(center(d, cs), d.n, d.r, ridge)
    sigma2_u, sse2, k = estimate_sigma2_u(uncenter(d), d, sigma2_v)
    vc = VarianceComponents(
        sigma2_u=sigma2_u, sigma2_v=sigma2_v, sse1=sse1, sse2=sse2, k_constant=k
    )
    fe = fit_fixed_effects(d, vc)
    fm = (
        estimate_fourth_moments(d, fe, sigma2_u, sigma2_v)
        if with_fourth_moments
        else None
    )
    pred = eblup(d, cs, fe, vc)
    return ModelFit(
        dataset=d,
        summaries=cs,
        variance=vc,
        fixed_effects=fe,
        prediction=pred,
        fourth_moments=fm,
    )
