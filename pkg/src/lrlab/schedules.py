"""Learning-rate schedules as materializable functions t -> eta_t.

All builders use a 0-based iteration index t in [0, T).  A schedule is
immutable once built: ``rate(t)`` indexes the stored vector, so
``materialize()[t] == rate(t)`` bit-exactly by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InvalidParameterError, ParseError
from .spectrum import DyadicBuckets

__all__ = [
    "Schedule",
    "PerCoordinateSchedule",
    "EigencurveParams",
    "sqrt_allocation_real",
    "allocate_delta_sqrt",
    "allocate_delta_numeric",
    "variance_surrogate",
    "build_eigencurve",
    "build_inverse_time",
    "build_inverse_time_practical",
    "build_step_decay_ge",
    "build_general_step_decay",
    "build_cosine",
    "build_cosine_power",
    "build_elastic_step_decay",
    "build_exponential",
    "build_constant",
    "build_per_coordinate",
    "write_schedule_csv",
    "read_schedule_csv",
]


@dataclass(frozen=True)
class Schedule:
    """A fixed-horizon learning-rate sequence with its provenance.

    ``kind`` names the family, ``params`` records the family-specific
    parameters that produced the curve.  Rates are strictly positive,
    with one documented exception: the halving step-decay family pins
    eta_0 = 0, which the quadratic evaluator treats as a no-op step.
    """

    kind: str
    params: object
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).copy()
        if vals.ndim != 1 or vals.size == 0:
            raise InvalidParameterError("schedule needs at least one iteration")
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("schedule rates must be finite")
        # zero rates are no-op steps; only defined boundary zeros are allowed:
        # the t=0 step of halving step decay and the eta_min=0 tail of the
        # cosine families (plus anything round-tripped through a CSV)
        if self.kind == "step_decay_ge":
            ok = vals[0] == 0.0 and np.all(vals[1:] > 0)
        elif self.kind in ("cosine", "cosine_power"):
            ok = np.all(vals[:-1] > 0) and vals[-1] >= 0
        elif self.kind == "imported":
            ok = np.all(vals >= 0)
        else:
            ok = np.all(vals > 0)
        if not ok:
            raise InvalidParameterError(f"nonpositive rate in {self.kind} schedule")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def T(self) -> int:
        return int(self.values.size)

    def rate(self, t: int) -> float:
        if not 0 <= t < self.T:
            raise InvalidParameterError(f"t={t} outside horizon [0, {self.T})")
        return float(self.values[t])

    def materialize(self) -> np.ndarray:
        return self.values


@dataclass(frozen=True)
class EigencurveParams:
    """Parameters behind one piecewise inverse-time-decay curve.

    ``alpha_bar[i] = L + mu * sum_{j<=i} delta_j 2^(j-1)`` for i = 0..I;
    in the unscaled form (eta0 = 1/L, beta = 2) the rate at each phase
    boundary t_i equals 1 / alpha_bar[i].
    """

    mu: float
    L: float
    kappa: float
    i_max: int
    delta: tuple
    t_boundaries: tuple
    eta0: float
    beta: float
    alpha_bar: tuple
    eta_min: float | None = None


def _positive_int_horizon(T):
    T = int(T)
    if T < 1:
        raise InvalidParameterError("horizon T must be >= 1")
    return T


def _largest_remainder(real: np.ndarray, total: int, eligible: np.ndarray) -> np.ndarray:
    """Round a nonnegative real allocation to integers summing to ``total``.

    Remainder units go to the largest fractional parts; only ``eligible``
    entries may receive them (ineligible entries are pinned at 0).
    """
    out = np.floor(real).astype(np.int64)
    out[~eligible] = 0
    short = int(total - out.sum())
    frac = np.where(eligible, real - np.floor(real), -1.0)
    if short > 0:
        order = [i for i in np.argsort(-frac, kind="stable") if eligible[i]]
        for k in range(short):
            out[order[k % len(order)]] += 1
    elif short < 0:
        order = [i for i in np.argsort(frac, kind="stable") if eligible[i]]
        for _ in range(-short):
            i = next(j for j in order if out[j] > 0)
            out[i] -= 1
    return out


def _floor_nonempty(delta: np.ndarray, eligible: np.ndarray) -> np.ndarray:
    # every nonempty bucket runs for at least one iteration
    delta = delta.copy()
    while True:
        starved = np.flatnonzero(eligible & (delta == 0))
        if starved.size == 0:
            return delta
        donor = int(np.argmax(delta))
        if delta[donor] <= 1:
            raise InfeasibleError("horizon too short to give every nonempty bucket a phase")
        delta[donor] -= 1
        delta[starved[0]] += 1


def sqrt_allocation_real(buckets: DyadicBuckets, T: int) -> np.ndarray:
    """Phase lengths proportional to the square root of bucket mass."""
    w = np.sqrt(buckets.s)
    total = w.sum()
    if total == 0:
        raise InvalidParameterError("all buckets empty")
    return w / total * float(T)


def _check_feasible(buckets: DyadicBuckets, T: int) -> np.ndarray:
    nonempty = buckets.s > 0
    if T < int(np.count_nonzero(nonempty)):
        raise InfeasibleError(
            f"T={T} is smaller than the {int(np.count_nonzero(nonempty))} nonempty buckets"
        )
    return nonempty


def allocate_delta_sqrt(buckets: DyadicBuckets, T: int) -> np.ndarray:
    T = _positive_int_horizon(T)
    nonempty = _check_feasible(buckets, T)
    real = sqrt_allocation_real(buckets, T)
    delta = _largest_remainder(real, T, nonempty)
    return _floor_nonempty(delta, nonempty)


def variance_surrogate(buckets: DyadicBuckets, delta) -> float:
    """Noise-term surrogate V(delta) = sum_i 2^(i+1) s_i / (kappa + sum_{j<=i} delta_j 2^j).

    Shares its argmin with the variance term of the convergence bound for
    the piecewise inverse-time schedule (denominators divided through by mu).
    """
    delta = np.asarray(delta, dtype=float)
    s = buckets.s
    pw = np.exp2(np.arange(s.size))
    denom = buckets.kappa + np.cumsum(delta * pw)
    return float(np.sum(2.0 * pw * s / denom))


def _surrogate_gradient(buckets: DyadicBuckets, delta: np.ndarray) -> np.ndarray:
    s = buckets.s
    n = s.size
    pw = np.exp2(np.arange(n))
    denom = buckets.kappa + np.cumsum(delta * pw)
    terms = 2.0 * pw * s / denom**2  # -d/d(denom_i) of each summand
    # delta_m appears in every denominator with i >= m
    tail = np.cumsum(terms[::-1])[::-1]
    return -pw * tail


def _project_scaled_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = total}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    ks = np.arange(1, u.size + 1)
    cond = u - css / ks > 0
    rho = int(np.max(np.flatnonzero(cond))) if np.any(cond) else 0
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def allocate_delta_numeric(buckets: DyadicBuckets, T: int) -> np.ndarray:
    """Minimize the variance surrogate over the allocation simplex.

    Projected gradient descent with backtracking, a 1e-9 relative
    improvement stopping rule and a 1e5 iteration cap; the result never
    does worse than the square-root allocation (fallback on no gain).
    """
    T = _positive_int_horizon(T)
    nonempty = _check_feasible(buckets, T)
    sqrt_int = allocate_delta_sqrt(buckets, T)
    if buckets.i_max == 1:
        return sqrt_int

    x = sqrt_allocation_real(buckets, T)
    v = variance_surrogate(buckets, x)
    for _ in range(100_000):
        g = _surrogate_gradient(buckets, x)
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            break
        step = T / gnorm
        improved = False
        while step > 1e-18 * T:
            cand = _project_scaled_simplex(x - step * g, float(T))
            vc = variance_surrogate(buckets, cand)
            if vc < v:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        rel_gain = (v - vc) / max(v, 1e-300)
        x, v = cand, vc
        if rel_gain < 1e-9:
            break

    # the optimizer runs on the full simplex, so empty buckets may carry mass
    all_eligible = np.ones(buckets.i_max, dtype=bool)
    delta = _floor_nonempty(_largest_remainder(x, T, all_eligible), nonempty)
    if variance_surrogate(buckets, delta) <= variance_surrogate(buckets, sqrt_int) + 1e-12:
        return delta
    return sqrt_int


def _eigencurve_alpha_bar(mu: float, L: float, delta: np.ndarray) -> np.ndarray:
    alpha = np.empty(delta.size + 1)
    alpha[0] = L
    acc = 0.0
    for p, dlt in enumerate(delta):
        acc += float(dlt) * 2.0**p
        alpha[p + 1] = L + mu * acc
    return alpha


def build_eigencurve(
    buckets: DyadicBuckets,
    T: int,
    delta,
    eta0: float | None = None,
    beta: float = 2.0,
    eta_min: float | None = None,
) -> Schedule:
    """Piecewise inverse-time decay driven by the dyadic bucket structure.

    Phase p (0-based) spans delta[p] iterations at

        eta_t = eta0 / (1 + (1/kappa) sum_{m<p} delta_m beta^m
                          + (beta^p/kappa) (t - t_p)).

    With ``eta0 = 1/L`` and ``beta = 2`` (the default, ``eta0=None``) the
    curve is evaluated directly as 1 / (L + mu * (...)), which keeps the
    boundary identity rate(t_i) == 1/alpha_bar[i] exact.  If ``eta_min``
    is given the curve is affinely rescaled so the first rate stays eta0
    and the last becomes eta_min.
    """
    T = _positive_int_horizon(T)
    delta = np.asarray(delta, dtype=np.int64)
    if np.any(delta < 0):
        raise InvalidParameterError("phase lengths must be nonnegative")
    if int(delta.sum()) != T:
        raise InvalidParameterError(f"phase lengths sum to {int(delta.sum())}, expected T={T}")
    if beta <= 1.0:
        raise InvalidParameterError("growth base beta must exceed 1")
    mu, L, kappa = buckets.mu, buckets.L, buckets.kappa
    theoretical = eta0 is None or (eta0 == 1.0 / L and beta == 2.0)
    eta0_val = 1.0 / L if eta0 is None else float(eta0)
    if eta0_val <= 0:
        raise InvalidParameterError("eta0 must be positive")

    alpha_bar = _eigencurve_alpha_bar(mu, L, delta)
    pieces = []
    scale_acc = 0.0  # sum_{m<p} delta_m beta^m
    for p, dlt in enumerate(delta):
        if dlt > 0:
            offs = np.arange(dlt, dtype=float)
            if theoretical:
                pieces.append(1.0 / (alpha_bar[p] + (2.0**p) * mu * offs))
            else:
                pieces.append(eta0_val / (1.0 + scale_acc / kappa + (beta**p / kappa) * offs))
        scale_acc += float(dlt) * beta**p
    vals = np.concatenate(pieces)

    if eta_min is not None:
        if eta_min >= eta0_val:
            raise InvalidParameterError("eta_min must be below eta0")
        if eta_min <= 0:
            raise InvalidParameterError("eta_min must be positive")
        last = float(vals[-1])
        if last == eta0_val:
            raise InvalidParameterError("cannot rescale a constant curve to eta_min")
        vals = eta_min + (vals - last) * ((eta0_val - eta_min) / (eta0_val - last))
        vals[0] = eta0_val
        vals[-1] = eta_min

    params = EigencurveParams(
        mu=mu,
        L=L,
        kappa=kappa,
        i_max=buckets.i_max,
        delta=tuple(int(x) for x in delta),
        t_boundaries=tuple(int(x) for x in np.concatenate([[0], np.cumsum(delta)])),
        eta0=eta0_val,
        beta=float(beta),
        alpha_bar=tuple(float(a) for a in alpha_bar),
        eta_min=eta_min,
    )
    return Schedule(kind="eigencurve", params=params, values=vals)


def build_inverse_time(T: int, L: float, mu: float) -> Schedule:
    """eta_t = 1 / (L + mu t)."""
    T = _positive_int_horizon(T)
    if not (0 < mu <= L):
        raise InvalidParameterError("need 0 < mu <= L")
    vals = 1.0 / (L + mu * np.arange(T, dtype=float))
    return Schedule(kind="inverse_time", params={"L": L, "mu": mu}, values=vals)


def build_inverse_time_practical(T: int, eta0: float, eta_min: float) -> Schedule:
    """eta_t = eta0 / (1 + gamma eta0 t) with gamma solved so eta_{T-1} = eta_min."""
    T = _positive_int_horizon(T)
    if not (eta0 > eta_min > 0):
        raise InvalidParameterError("need eta0 > eta_min > 0")
    if T == 1:
        raise InvalidParameterError("T=1 leaves the decay rate gamma undefined")
    gamma = (eta0 / eta_min - 1.0) / (eta0 * (T - 1))
    vals = eta0 / (1.0 + gamma * eta0 * np.arange(T, dtype=float))
    return Schedule(
        kind="inverse_time_practical",
        params={"eta0": eta0, "eta_min": eta_min, "gamma": gamma},
        values=vals,
    )


def build_step_decay_ge(T: int, eta1: float) -> Schedule:
    """Halve the rate every ~T/log2(T) iterations, with a zero step at t=0.

    K = floor(log2 T) phases of length ceil(T/K); the last phase is
    truncated at the horizon.  The t=0 rate is pinned to zero so phase
    boundaries follow the 1-based halving pattern exactly.
    """
    T = _positive_int_horizon(T)
    if T < 2:
        raise InvalidParameterError("halving step decay needs T >= 2")
    if eta1 <= 0:
        raise InvalidParameterError("eta1 must be positive")
    k_phases = T.bit_length() - 1
    phase_len = -(-T // k_phases)
    ell = (np.arange(1, T) - 1) // phase_len
    vals = np.concatenate([[0.0], np.ldexp(eta1, -ell)])
    return Schedule(
        kind="step_decay_ge",
        params={"eta1": eta1, "phases": k_phases, "phase_len": phase_len},
        values=vals,
    )


def build_general_step_decay(T: int, eta0: float, num_intervals: int, decay_factor: float) -> Schedule:
    """K equal-length intervals (largest-remainder), dividing the rate by
    ``decay_factor`` at each boundary."""
    T = _positive_int_horizon(T)
    K = int(num_intervals)
    if K < 1:
        raise InvalidParameterError("need num_intervals >= 1")
    if K > T:
        raise InvalidParameterError(f"num_intervals={K} exceeds horizon T={T}")
    if decay_factor <= 1:
        raise InvalidParameterError("decay_factor must exceed 1")
    if eta0 <= 0:
        raise InvalidParameterError("eta0 must be positive")
    base, rem = divmod(T, K)
    lengths = np.full(K, base, dtype=int)
    lengths[:rem] += 1
    vals = np.concatenate(
        [np.full(n, eta0 / decay_factor**k) for k, n in enumerate(lengths)]
    )
    return Schedule(
        kind="general_step_decay",
        params={"eta0": eta0, "num_intervals": K, "decay_factor": decay_factor},
        values=vals,
    )


def _cosine_curve(T, eta0, eta_min, alpha_pow):
    if not (eta0 > eta_min >= 0):
        raise InvalidParameterError("need eta0 > eta_min >= 0")
    if T == 1:
        return np.array([float(eta0)])
    t = np.arange(T, dtype=float)
    w = 0.5 * (1.0 + np.cos(np.pi * (t / (T - 1.0))))
    return eta_min + (eta0 - eta_min) * w**alpha_pow


def build_cosine(T: int, eta0: float, eta_min: float) -> Schedule:
    """Half-cosine from eta0 down to eta_min, hitting eta_min at t = T-1."""
    T = _positive_int_horizon(T)
    vals = _cosine_curve(T, eta0, eta_min, 1.0)
    return Schedule(kind="cosine", params={"eta0": eta0, "eta_min": eta_min}, values=vals)


def build_cosine_power(T: int, eta0: float, eta_min: float, alpha_pow: float) -> Schedule:
    """Cosine curve raised to a power; alpha_pow=1 reproduces build_cosine bitwise."""
    T = _positive_int_horizon(T)
    if alpha_pow <= 0:
        raise InvalidParameterError("alpha_pow must be positive")
    vals = _cosine_curve(T, eta0, eta_min, float(alpha_pow))
    return Schedule(
        kind="cosine_power",
        params={"eta0": eta0, "eta_min": eta_min, "alpha_pow": alpha_pow},
        values=vals,
    )


def build_elastic_step_decay(T: int, eta0: float, r: float) -> Schedule:
    """eta_t = eta0 / 2^k on t in [(1 - r^k) T, (1 - r^(k+1)) T).

    Interval membership uses real arithmetic; once the remaining real
    intervals contain no further integers the deepest reached k persists
    to the end of the horizon.
    """
    T = _positive_int_horizon(T)
    if not (0.0 < r < 1.0):
        raise InvalidParameterError("shrink factor r must lie in (0, 1)")
    if eta0 <= 0:
        raise InvalidParameterError("eta0 must be positive")
    vals = np.empty(T)
    pos, k = 0, 0
    while pos < T:
        upper = (1.0 - r ** (k + 1)) * T
        end = T if upper >= T else int(math.ceil(upper))
        if end > pos:
            vals[pos:end] = math.ldexp(eta0, -k)
            pos = end
        if r ** (k + 1) == 0.0:
            vals[pos:] = math.ldexp(eta0, -k)
            break
        k += 1
    return Schedule(kind="elastic_step_decay", params={"eta0": eta0, "r": r}, values=vals)


def build_exponential(T: int, eta0: float, eta_min: float) -> Schedule:
    """eta_t = gamma^t eta0 with gamma solved so eta_{T-1} = eta_min."""
    T = _positive_int_horizon(T)
    if T == 1:
        raise InvalidParameterError("T=1 leaves the decay rate gamma undefined")
    if not (eta0 >= eta_min > 0):
        raise InvalidParameterError("need eta0 >= eta_min > 0")
    gamma = (eta_min / eta0) ** (1.0 / (T - 1))
    vals = eta0 * gamma ** np.arange(T, dtype=float)
    return Schedule(
        kind="exponential",
        params={"eta0": eta0, "eta_min": eta_min, "gamma": gamma},
        values=vals,
    )


def build_constant(T: int, eta0: float) -> Schedule:
    T = _positive_int_horizon(T)
    if eta0 <= 0:
        raise InvalidParameterError("eta0 must be positive")
    return Schedule(kind="constant", params={"eta0": eta0}, values=np.full(T, float(eta0)))


@dataclass(frozen=True)
class PerCoordinateSchedule:
    """Coordinate-wise rates eta_{t,j} = 1 / (lambda_j (t+1)).

    Only the diagonal quadratic evaluator consumes this; a vector-valued
    rate has no meaning for ordinary SGD on a non-diagonal objective.
    """

    lambdas: np.ndarray
    T: int

    def rate(self, t: int, j: int) -> float:
        return 1.0 / (self.lambdas[j] * (t + 1.0))

    def materialize(self) -> np.ndarray:
        t = np.arange(self.T, dtype=float)[:, None]
        return 1.0 / (self.lambdas[None, :] * (t + 1.0))


def build_per_coordinate(lambdas, T: int) -> PerCoordinateSchedule:
    T = _positive_int_horizon(T)
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam <= 0):
        raise InvalidParameterError("per-coordinate rates need strictly positive eigenvalues")
    lam = lam.copy()
    lam.setflags(write=False)
    return PerCoordinateSchedule(lambdas=lam, T=T)


def write_schedule_csv(schedule: Schedule, path, header_lines=()):
    """Export ``t,lr`` rows; 17 significant digits round-trips 64-bit floats."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("t,lr\n")
        for t, lr in enumerate(schedule.values):
            fh.write(f"{t},{lr:.17g}\n")


def read_schedule_csv(path) -> Schedule:
    vals = []
    with open(path, "r", encoding="utf-8") as fh:
        header_seen = False
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line.replace(" ", "") != "t,lr":
                    raise ParseError(f"expected header 't,lr', got {line!r}", path=path, line=lineno)
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"expected 't,lr' row, got {line!r}", path=path, line=lineno)
            try:
                t = int(parts[0])
                lr = float(parts[1])
            except ValueError:
                raise ParseError(f"non-numeric row {line!r}", path=path, line=lineno) from None
            if t != len(vals):
                raise ParseError(f"non-contiguous iteration index {t}", path=path, line=lineno)
            vals.append(lr)
    if not header_seen or not vals:
        raise ParseError("no schedule rows found", path=path)
    kind = "step_decay_ge" if vals[0] == 0.0 else "imported"
    return Schedule(kind=kind, params={"source": str(path)}, values=np.array(vals))
