"""Bootstrap estimation of mean-squared prediction error, with bias
correction by the double bootstrap.

Level one draws cluster effects and noise from matched distributions built
on the fitted second and fourth moments, rebuilds responses on the original
design, refits the whole pipeline and averages squared prediction errors:
that Monte Carlo average u-hat estimates MSE_i with an O(n^-1) bias.  Level
two repeats the construction around each level-one fit (re-estimating the
fourth moments there too) to estimate that bias as v-hat - u-hat.  Besides
the plain correction 2 u-hat - v-hat, a positivity-preserving version is
provided:

    u + g(n (u - v))/n            if u >= v,
    u^2 / [u + g(n (v - u))/n]    if u < v,

with g a bounded odd function (arctan by default, or a clip at n * c).
Both branches agree at u = v and are strictly positive for u > 0.

Every bootstrap world gets its own random substream keyed by
(master_seed, level code, replicate index), with the level code always in
second position, so results are reproducible and independent of execution
order.  Replicates whose refit fails numerically
are skipped and counted; more than 1% failures at any level aborts the run,
since under the ridge safeguard failures signal a pathological input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import streams
from .errors import DivisionGuard, NumericalError, TooManyFailures
from .gls import FixedEffects
from .mmdist import THREE_POINT, MatchedDistribution, make_distribution, sample
from .model import Dataset, _summaries_design
from .moments import FourthMoments
from .pipeline import ModelFit, fit_model
from .variance import DEFAULT_RIDGE, VarianceComponents

FAILURE_TOLERANCE = 0.01  # max tolerated share of failed replicates per level

G_ARCTAN = "arctan"
G_CLIPPED = "clipped"


@dataclass(frozen=True)
class BootstrapConfig:
    """Replicate counts, matching family, g choice and master seed.

    Defaults are production scale; ``desk_scale`` gives the cheaper sizes
    used by the acceptance study.
    """

    b1: int = 400            # level-one worlds behind u-hat
    b2: int = 200            # outer worlds of the double bootstrap
    c: int = 100             # inner worlds per outer world
    family: str = THREE_POINT
    g_kind: str = G_ARCTAN
    c_clip: float = 1.0
    master_seed: int = 0
    ridge: tuple = DEFAULT_RIDGE

    def __post_init__(self):
        if min(self.b1, self.b2, self.c) < 1:
            raise ValueError("replicate counts b1, b2, c must all be >= 1")
        if self.g_kind not in (G_ARCTAN, G_CLIPPED):
            raise ValueError(f"g_kind must be '{G_ARCTAN}' or '{G_CLIPPED}'")
        if self.g_kind == G_CLIPPED and self.c_clip <= 0:
            raise ValueError("c_clip must be positive for the clipped g")
        if not 0 <= self.master_seed <= streams.MAX_SEED:
            raise ValueError("master_seed must fit in 64 bits")

    @classmethod
    def desk_scale(cls, master_seed: int = 0, **kw) -> "BootstrapConfig":
        kw.setdefault("b1", 100)
        kw.setdefault("b2", 50)
        kw.setdefault("c", 50)
        return cls(master_seed=master_seed, **kw)


@dataclass(frozen=True)
class DoubleBootstrapResult:
    mse_boot: np.ndarray          # u-hat, per cluster
    mse_double: np.ndarray        # v-hat, per cluster
    bias: np.ndarray              # v-hat - u-hat
    corrected_simple: np.ndarray  # 2 u-hat - v-hat
    corrected_robust: np.ndarray  # positivity-preserving correction
    failures: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MspeReport:
    """Per-cluster MSPE estimates plus the global fit behind them."""

    cluster_ids: tuple
    sizes: np.ndarray
    eblup: np.ndarray
    rho: np.ndarray
    naive: np.ndarray
    mse_boot: np.ndarray
    mse_double: np.ndarray
    bias_boot: np.ndarray
    mse_bc_simple: np.ndarray
    mse_bc_robust: np.ndarray
    mu: float
    beta: np.ndarray
    sigma2_u: float
    sigma2_v: float
    gamma_u: float
    gamma_v: float
    failures: dict


# ---------------------------------------------------------------------------
# robust correction algebra
# ---------------------------------------------------------------------------

def robust_correction(
    u_hat, v_hat, n_clusters: int, g_kind: str = G_ARCTAN, c_clip: float = 1.0
):
    """Positivity-preserving bias correction, vectorized over clusters."""
    u = np.asarray(u_hat, dtype=np.float64)
    v = np.asarray(v_hat, dtype=np.float64)
    n = float(n_clusters)
    gap = n * np.abs(u - v)
    if g_kind == G_ARCTAN:
        g_val = np.arctan(gap)
    elif g_kind == G_CLIPPED:
        g_val = np.minimum(gap, n * c_clip)
    else:
        raise ValueError(f"unknown g_kind {g_kind!r}")
    adjusted = u + g_val / n  # upper-branch value; lower-branch denominator
    lower = u < v
    if np.any(lower & (adjusted <= 0)):
        raise DivisionGuard("robust correction denominator is not positive")
    out = np.where(lower, np.divide(u**2, adjusted, where=adjusted > 0), adjusted)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# world generation
# ---------------------------------------------------------------------------

def _draw_world(
    d: Dataset,
    fe: FixedEffects,
    u_dist: MatchedDistribution,
    v_dist: MatchedDistribution,
    rng: np.random.Generator,
):
    """Synthetic responses on the same design; U drawn before V."""
    u_star = sample(u_dist, rng, d.n)
    v_star = sample(v_dist, rng, d.total)
    mean = fe.mu + d.x @ fe.beta
    y_star = mean + np.repeat(u_star, d.sizes) + d.s * v_star
    theta_star = fe.mu + _summaries_design(d)["x_under"] @ fe.beta + u_star
    return d.with_responses(y_star), theta_star


def bootstrap_world(
    d: Dataset,
    fe: FixedEffects,
    vc: VarianceComponents,
    fm: FourthMoments,
    rng: np.random.Generator,
    family: str = THREE_POINT,
):
    """One synthetic world around a fit: (synthetic dataset, true theta*)."""
    u_dist = make_distribution(vc.sigma2_u, fm.gamma_u, family)
    v_dist = make_distribution(vc.sigma2_v, fm.gamma_v, family)
    return _draw_world(d, fe, u_dist, v_dist, rng)


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------

def _check_failures(failed: int, attempted: int, level: str) -> None:
    if attempted and failed / attempted > FAILURE_TOLERANCE:
        raise TooManyFailures(
            f"{failed}/{attempted} {level} bootstrap replicates failed to refit"
        )


def mse_single(
    d: Dataset, fit: ModelFit, cfg: BootstrapConfig, key_prefix: tuple = ()
) -> tuple[np.ndarray, int]:
    """Level-one bootstrap estimate u-hat of MSE_i; returns (u_hat, failures)."""
    if fit.fourth_moments is None:
        raise ValueError("mse_single needs a fit with fourth moments")
    u_dist = make_distribution(
        fit.variance.sigma2_u, fit.fourth_moments.gamma_u, cfg.family
    )
    v_dist = make_distribution(
        fit.variance.sigma2_v, fit.fourth_moments.gamma_v, cfg.family
    )
    acc = np.zeros(d.n)
    done = failed = 0
    for b in range(cfg.b1):
        rng = streams.substream(cfg.master_seed, streams.SINGLE, *key_prefix, b)
        d_star, theta_star = _draw_world(d, fit.fixed_effects, u_dist, v_dist, rng)
        try:
            refit = fit_model(d_star, cfg.ridge, with_fourth_moments=False)
        except NumericalError:
            failed += 1
            continue
        acc += (refit.theta_hat - theta_star) ** 2
        done += 1
    _check_failures(failed, cfg.b1, "level-one")
    if done == 0:
        raise TooManyFailures("every level-one bootstrap replicate failed")
    return acc / done, failed


def mse_double(
    d: Dataset, fit: ModelFit, cfg: BootstrapConfig, key_prefix: tuple = ()
) -> DoubleBootstrapResult:
    """u-hat, v-hat and the bias-corrected estimators.

    u-hat uses its own ``b1`` level-one replicates, independent of the
    ``b2`` outer worlds.  Each outer world is refitted in full (fourth
    moments included); its ``c`` inner worlds only need the refitted
    predictor.
    """
    u_hat, fail1 = mse_single(d, fit, cfg, key_prefix)
    u_dist = make_distribution(
        fit.variance.sigma2_u, fit.fourth_moments.gamma_u, cfg.family
    )
    v_dist = make_distribution(
        fit.variance.sigma2_v, fit.fourth_moments.gamma_v, cfg.family
    )

    vacc = np.zeros(d.n)
    outer_done = outer_failed = 0
    inner_attempted = inner_failed = 0
    for b in range(cfg.b2):
        rng = streams.substream(cfg.master_seed, streams.OUTER, *key_prefix, b)
        d_star, _ = _draw_world(d, fit.fixed_effects, u_dist, v_dist, rng)
        try:
            refit = fit_model(d_star, cfg.ridge, with_fourth_moments=True)
        except NumericalError:
            outer_failed += 1
            continue
        u_dist_star = make_distribution(
            refit.variance.sigma2_u, refit.fourth_moments.gamma_u, cfg.family
        )
        v_dist_star = make_distribution(
            refit.variance.sigma2_v, refit.fourth_moments.gamma_v, cfg.family
        )
        inner_acc = np.zeros(d.n)
        inner_done = 0
        for el in range(cfg.c):
            rng2 = streams.substream(
                cfg.master_seed, streams.INNER, *key_prefix, b, el
            )
            d_ss, theta_ss = _draw_world(
                d, refit.fixed_effects, u_dist_star, v_dist_star, rng2
            )
            inner_attempted += 1
            try:
                refit2 = fit_model(d_ss, cfg.ridge, with_fourth_moments=False)
            except NumericalError:
                inner_failed += 1
                continue
            inner_acc += (refit2.theta_hat - theta_ss) ** 2
            inner_done += 1
        if inner_done == 0:
            outer_failed += 1
            continue
        vacc += inner_acc / inner_done
        outer_done += 1
    _check_failures(outer_failed, cfg.b2, "outer")
    _check_failures(inner_failed, inner_attempted, "inner")
    if outer_done == 0:
        raise TooManyFailures("every outer bootstrap replicate failed")

    v_hat = vacc / outer_done
    return DoubleBootstrapResult(
        mse_boot=u_hat,
        mse_double=v_hat,
        bias=v_hat - u_hat,
        corrected_simple=2.0 * u_hat - v_hat,
        corrected_robust=robust_correction(u_hat, v_hat, d.n, cfg.g_kind, cfg.c_clip),
        failures={
            "single": fail1,
            "outer": outer_failed,
            "inner": inner_failed,
        },
    )


def mspe_report(d: Dataset, cfg: BootstrapConfig) -> MspeReport:
    """Fit a dataset and assemble the full per-cluster MSPE report."""
    fit = fit_model(d, cfg.ridge, with_fourth_moments=True)
    res = mse_double(d, fit, cfg)
    return MspeReport(
        cluster_ids=d.cluster_ids,
        sizes=d.sizes,
        eblup=fit.prediction.theta_hat,
        rho=fit.prediction.rho,
        naive=fit.prediction.naive_mse,
        mse_boot=res.mse_boot,
        mse_double=res.mse_double,
        bias_boot=res.bias,
        mse_bc_simple=res.corrected_simple,
        mse_bc_robust=res.corrected_robust,
        mu=fit.fixed_effects.mu,
        beta=fit.fixed_effects.beta,
        sigma2_u=fit.variance.sigma2_u,
        sigma2_v=fit.variance.sigma2_v,
        gamma_u=fit.fourth_moments.gamma_u,
        gamma_v=fit.fourth_moments.gamma_v,
        failures=res.failures,
    )
