"""Convergence-bound formulas for SGD on quadratics, evaluated at desk scale.

Conventions shared by every function here:

* the loss metric is the gap f(w) - f*, i.e. half the H-weighted squared
  error, and every bound that natively controls twice that gap is halved
  before being reported;
* logarithms tied to the halving step-decay machinery are base 2 (phase
  counting halves the rate); the display-only extra-term table uses the
  natural log and says so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InvalidParameterError
from .quadsim import QuadraticProblem
from .spectrum import DyadicBuckets, PowerLawSpec

__all__ = [
    "BoundReport",
    "lemma1_bound",
    "theorem1_bound",
    "power_law_constant",
    "corollary1_bound",
    "prop1_bound",
    "prop2_bound",
    "step_decay_lower_bound",
    "extra_term_table",
    "sqrt_mass_ratio",
]


@dataclass(frozen=True)
class BoundReport:
    name: str
    bias_bound: float
    variance_bound: float
    total_bound: float
    extra_term: float = float("nan")


def sqrt_mass_ratio(buckets: DyadicBuckets) -> float:
    """(sum_i sqrt(s_i))^2 / d, the constant-free schedule overhead factor.

    Bounded between 1 (single bucket) and i_max (uniform masses), by
    Cauchy-Schwarz in both directions.
    """
    root_sum = float(np.sum(np.sqrt(buckets.s)))
    return root_sum**2 / buckets.d


def lemma1_bound(buckets: DyadicBuckets, delta, T: int, f0_gap: float, sigma: float) -> BoundReport:
    """Per-allocation bound: bias f0 kappa^2 / delta_1^2 plus the
    (15/2) sigma^2 mu sum over buckets of 2^(i+1) s_i / alpha_{i+1}."""
    delta = np.asarray(delta, dtype=float)
    if delta.size != buckets.i_max:
        raise InvalidParameterError("delta length must match the bucket count")
    if int(round(float(delta.sum()))) != int(T):
        raise InvalidParameterError("phase lengths must sum to T")
    if delta[0] < 1:
        raise InfeasibleError(
            "first phase is empty: the bias bound kappa^2/delta_1^2 is infinite"
        )
    if f0_gap < 0 or sigma < 0:
        raise InvalidParameterError("f0_gap and sigma must be nonnegative")
    s = buckets.s
    pw = np.exp2(np.arange(s.size))
    alpha_tail = buckets.L + buckets.mu * np.cumsum(delta * pw)
    variance = 7.5 * sigma**2 * buckets.mu * float(np.sum(2.0 * pw * s / alpha_tail))
    bias = f0_gap * buckets.kappa**2 / float(delta[0]) ** 2
    return BoundReport(
        name="lemma1",
        bias_bound=bias,
        variance_bound=variance,
        total_bound=bias + variance,
    )


def theorem1_bound(buckets: DyadicBuckets, T: int, f0_gap: float, sigma: float) -> BoundReport:
    """Allocation-free bound under the square-root phase lengths:

        f0 kappa^2 (sum sqrt(s_i))^2 / (s_0 T^2) + 15 (sum sqrt(s_i))^2 sigma^2 / T.
    """
    if buckets.s[0] <= 0:
        raise InvalidParameterError(
            "bias term undefined with an empty first bucket (s_0 = 0)"
        )
    if f0_gap < 0 or sigma < 0:
        raise InvalidParameterError("f0_gap and sigma must be nonnegative")
    root_sq = float(np.sum(np.sqrt(buckets.s))) ** 2
    bias = f0_gap * buckets.kappa**2 * root_sq / (float(buckets.s[0]) * T**2)
    variance = 15.0 * root_sq * sigma**2 / T
    return BoundReport(
        name="theorem1",
        bias_bound=bias,
        variance_bound=variance,
        total_bound=bias + variance,
        extra_term=15.0 * root_sq / buckets.d,
    )


def power_law_constant(alpha: float) -> float:
    """C(alpha) = 15 / (1 - 2^((1-alpha)/2))^2, decreasing to 15 as alpha grows."""
    if alpha <= 1:
        raise InvalidParameterError("power-law constant defined for alpha > 1 only")
    return 15.0 * (1.0 / (1.0 - 2.0 ** ((1.0 - alpha) / 2.0))) ** 2


def corollary1_bound(pl: PowerLawSpec, d: float, T: int, f0_gap: float, sigma: float) -> BoundReport:
    """(f0 kappa^2 / T^2 + d sigma^2 / T) * C(alpha); C = 15 when kappa < 2
    (a single bucket leaves nothing to overlap)."""
    if f0_gap < 0 or sigma < 0:
        raise InvalidParameterError("f0_gap and sigma must be nonnegative")
    c_alpha = 15.0 if pl.kappa < 2.0 else power_law_constant(pl.alpha)
    bias = f0_gap * pl.kappa**2 / T**2 * c_alpha
    variance = d * sigma**2 / T * c_alpha
    return BoundReport(
        name="corollary1",
        bias_bound=bias,
        variance_bound=variance,
        total_bound=bias + variance,
        extra_term=c_alpha,
    )


def prop1_bound(problem: QuadraticProblem, T: int) -> float:
    """Loss-gap bound under coordinate-wise rates 1/(lambda_j (t+1)):

        (sum_j lambda_j d0_j^2) / (T+1)^2 + T/(T+1)^2 * d sigma^2,

    halved to the single-gap convention.
    """
    lam_off = float(np.sum(problem.lambdas * problem.offset0**2))
    tp1sq = (T + 1.0) ** 2
    return 0.5 * (lam_off / tp1sq + T / tp1sq * problem.d * problem.sigma**2)


def prop2_bound(problem: QuadraticProblem, T: int) -> float:
    """Loss-gap bound for the inverse-time schedule 1/(L + mu t).

    Evaluated at t = T-1, the last step index actually taken by a 0-based
    T-step run (the derivation counts steps by their final rate).  Halved
    to the single-gap convention.
    """
    lam = problem.lambdas
    mu = float(lam.min())
    L = float(lam.max())
    denom = L + mu * (T - 1.0)
    lam_off = float(np.sum(lam * problem.offset0**2))
    sig2 = problem.sigma**2
    bias = ((L + mu) / denom) ** 2 * lam_off
    variance = float(np.sum(lam**2 / (2.0 * lam - mu) / denom * sig2 + lam**2 * sig2 / denom**2))
    return 0.5 * (bias + variance)


def step_decay_lower_bound(d, sigma, T, eta1, lambdas, offsets):
    """Asymptotic floor for the halving step-decay schedule.

    Returns ``(threshold_ok, bound_value)`` with
    ``bound_value = d sigma^2 log2(T) / (1024 T)``.  ``threshold_ok``
    reports whether the horizon is long enough for the floor to bind:
    either

        T / log2 T >= max(2^16, 16, sigma^2 / (256 min_j lambda_j d0_j^2))

    with every lambda_j d0_j^2 nonzero, or the alternative requirement

        T / log2 T > 1 / (8 eta1 mu),

    under which every coordinate's variance term dominates.
    """
    lam = np.asarray(lambdas, dtype=float)
    off = np.asarray(offsets, dtype=float)
    if lam.size != d or off.size != d:
        raise InvalidParameterError("lambdas and offsets must have length d")
    if np.any(lam <= 0):
        raise InvalidParameterError("eigenvalues must be strictly positive")
    L = float(lam.max())
    mu = float(lam.min())
    if eta1 > 1.0 / L * (1.0 + 1e-12):
        raise InvalidParameterError("requires eta1 <= 1/L")
    log2t = math.log2(T)
    phase_budget = T / log2t
    lam_off = lam * off**2
    min_mass = float(lam_off.min())
    ok_main = min_mass > 0 and phase_budget >= max(2.0**16, 16.0, sigma**2 / (256.0 * min_mass))
    ok_alt = phase_budget > 1.0 / (8.0 * eta1 * mu)
    bound_value = d * sigma**2 * log2t / (1024.0 * T)
    return (bool(ok_main or ok_alt), float(bound_value))


def extra_term_table(named_buckets, T: int):
    """Overhead factors over the minimax rate d sigma^2 / T per spectrum.

    Rows: condition number kappa (inverse time), ln T (halving step
    decay; natural log, constants suppressed), the constant-free
    (sum sqrt(s_i))^2 / d (bucket-adapted schedule), and 1 (minimax).
    """
    rows = []
    for name, buckets in named_buckets:
        rows.append(
            {
                "name": name,
                "inverse_time": buckets.kappa,
                "step_decay": math.log(T),
                "eigencurve": sqrt_mass_ratio(buckets),
                "minimax": 1.0,
            }
        )
    return rows
