"""Ridge-regression harness: libsvm ingestion, closed-form optimum, exact
Hessian spectrum, SGD runs, and scheduler grid search.

The objective is f(w) = (1/n) ||Xw - Y||^2 + alpha ||w||^2 (no 1/2), so
the Hessian is H = 2 (X^T X / n + alpha I) and the optimum solves
(X^T X + n alpha I) w* = X^T Y.  All experiments report the loss gap
f(w) - f(w*).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, InvalidParameterError, ParseError
from .schedules import (
    Schedule,
    allocate_delta_sqrt,
    build_constant,
    build_cosine,
    build_eigencurve,
    build_exponential,
    build_inverse_time_practical,
)
from .spectrum import EigenSpectrum, PowerLawSpec, bucketize

__all__ = [
    "Dataset",
    "RidgeModel",
    "parse_libsvm",
    "fit_closed_form",
    "ridge_loss",
    "run_ridge_sgd",
    "build_ridge_schedule",
    "grid_search",
    "GridPoint",
    "GridSearchResult",
    "make_synthetic_least_squares",
    "RIDGE_FAMILIES",
]

UNRESTRICTED = None  # eta_min sentinel: the scheduler picks its own floor


@dataclass(frozen=True)
class Dataset:
    """Dense design matrix and labels; features were 1-based in the file."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2 or Y.ndim != 1 or X.shape[0] != Y.size or X.size == 0:
            raise InvalidParameterError("need X (n x d) and Y (n) with n, d >= 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])


@dataclass(frozen=True)
class RidgeModel:
    alpha_reg: float
    w_star: np.ndarray
    f_star: float
    H_eigs: np.ndarray


def parse_libsvm(path) -> Dataset:
    """Parse ``<label> <index>:<value> ...`` lines into a dense matrix.

    The feature count is the largest index seen; absent features are zero.
    Duplicate indices within one line are rejected.
    """
    labels = []
    rows = []  # list of (indices, values)
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                label = float(parts[0])
            except ValueError:
                raise ParseError(
                    f"non-numeric label {parts[0]!r}", path=path, line=lineno
                ) from None
            seen = set()
            idxs, vals = [], []
            for tok in parts[1:]:
                idx_s, _, val_s = tok.partition(":")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(
                        f"malformed feature token {tok!r}", path=path, line=lineno
                    ) from None
                if idx < 1:
                    raise ParseError(f"feature index {idx} below 1", path=path, line=lineno)
                if idx in seen:
                    raise ParseError(f"duplicate feature index {idx}", path=path, line=lineno)
                seen.add(idx)
                idxs.append(idx)
                vals.append(val)
                max_idx = max(max_idx, idx)
            labels.append(label)
            rows.append((idxs, vals))
    if not labels:
        raise ParseError("no samples found", path=path)
    if max_idx == 0:
        raise ParseError("no features found in any sample", path=path)
    X = np.zeros((len(labels), max_idx))
    for i, (idxs, vals) in enumerate(rows):
        for idx, val in zip(idxs, vals):
            X[i, idx - 1] = val
    return Dataset(X=X, Y=np.array(labels))


def ridge_loss(data: Dataset, alpha_reg: float, w: np.ndarray) -> float:
    resid = data.X @ w - data.Y
    return float(resid @ resid / data.n + alpha_reg * (w @ w))


def fit_closed_form(data: Dataset, alpha_reg: float) -> RidgeModel:
    """Direct solve of the normal equations plus a full symmetric
    eigendecomposition of the Hessian.

    Both the solve residual and every eigenpair residual are verified to
    1e-8 relative; d is small enough that dense algebra is exact-grade.
    """
    if alpha_reg < 0:
        raise InvalidParameterError("alpha_reg must be nonnegative")
    X, Y = data.X, data.Y
    n = data.n
    gram = X.T @ X
    rhs = X.T @ Y
    system = gram + n * alpha_reg * np.eye(data.d)
    try:
        w_star = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        raise InfeasibleError(
            "normal equations are singular; use alpha_reg > 0"
        ) from None
    resid = np.linalg.norm(system @ w_star - rhs)
    if resid > 1e-8 * max(np.linalg.norm(rhs), 1e-300):
        raise InfeasibleError(
            f"ill-conditioned system: solve residual {resid:.3e} exceeds tolerance"
        )
    hess = 2.0 * (gram / n + alpha_reg * np.eye(data.d))
    eigvals, eigvecs = np.linalg.eigh(hess)
    pair_resid = np.linalg.norm(hess @ eigvecs - eigvecs * eigvals, axis=0)
    if np.any(pair_resid > 1e-8 * np.linalg.norm(hess, 2)):
        raise InfeasibleError("eigendecomposition residual exceeds tolerance")
    return RidgeModel(
        alpha_reg=float(alpha_reg),
        w_star=w_star,
        f_star=ridge_loss(data, alpha_reg, w_star),
        H_eigs=eigvals,
    )


def run_ridge_sgd(
    data: Dataset,
    model: RidgeModel,
    schedule: Schedule,
    batch_size: int,
    seed: int,
) -> np.ndarray:
    """SGD from w0 = 0 with uniform with-replacement minibatches.

    Returns the loss-gap trajectory indexed by epoch (entry 0 is the
    initial gap); an epoch is ``n // batch_size`` iterations and the
    schedule horizon must be a whole number of epochs.  ``batch_size >=
    n`` switches to exact full-batch gradients.  Divergent runs yield
    inf/nan gaps rather than raising.
    """
    if batch_size < 1:
        raise InvalidParameterError("batch_size must be >= 1")
    X, Y = data.X, data.Y
    n = data.n
    alpha_reg = model.alpha_reg
    full_batch = batch_size >= n
    iters_per_epoch = 1 if full_batch else n // batch_size
    T = schedule.T
    if T % iters_per_epoch != 0:
        raise InvalidParameterError(
            f"horizon T={T} is not a whole number of epochs ({iters_per_epoch} iters each)"
        )
    epochs = T // iters_per_epoch
    eta = schedule.materialize()
    rng = np.random.default_rng(seed)
    idx = None if full_batch else rng.integers(0, n, size=(T, batch_size))

    w = np.zeros(data.d)
    gaps = np.empty(epochs + 1)
    gaps[0] = ridge_loss(data, alpha_reg, w) - model.f_star
    t = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for e in range(epochs):
            for _ in range(iters_per_epoch):
                if full_batch:
                    grad = 2.0 / n * (X.T @ (X @ w - Y)) + 2.0 * alpha_reg * w
                elif batch_size == 1:
                    i = idx[t, 0]
                    x = X[i]
                    grad = (2.0 * (x @ w - Y[i])) * x + 2.0 * alpha_reg * w
                else:
                    rows = idx[t]
                    xb = X[rows]
                    grad = 2.0 / batch_size * (xb.T @ (xb @ w - Y[rows])) + 2.0 * alpha_reg * w
                w = w - eta[t] * grad
                t += 1
            gaps[e + 1] = ridge_loss(data, alpha_reg, w) - model.f_star
    return gaps


RIDGE_FAMILIES = ("constant", "inverse_time", "exponential", "cosine", "eigencurve")


def build_ridge_schedule(
    family: str,
    T: int,
    eta0: float,
    eta_min: float | None,
    model: RidgeModel | None = None,
) -> Schedule:
    """Instantiate one scheduler family from the (eta0, eta_min) grid axes.

    Raises InvalidParameterError for combinations a family cannot honor
    (e.g. eta_min=0 for inverse-time decay, or a missing Hessian spectrum
    for the bucket-driven curve); the grid search skips those points.
    """
    if family == "constant":
        if eta_min is not UNRESTRICTED:
            raise InvalidParameterError("constant schedule has no eta_min")
        return build_constant(T, eta0)
    if family == "inverse_time":
        if eta_min is UNRESTRICTED or eta_min <= 0:
            raise InvalidParameterError("inverse-time decay needs eta_min > 0")
        return build_inverse_time_practical(T, eta0, eta_min)
    if family == "exponential":
        if eta_min is UNRESTRICTED or eta_min <= 0:
            raise InvalidParameterError("exponential decay needs eta_min > 0")
        return build_exponential(T, eta0, eta_min)
    if family == "cosine":
        if eta_min is UNRESTRICTED:
            raise InvalidParameterError("cosine decay needs an explicit eta_min")
        return build_cosine(T, eta0, eta_min)
    if family == "eigencurve":
        if model is None:
            raise InvalidParameterError("eigencurve needs the fitted Hessian spectrum")
        buckets = bucketize(EigenSpectrum.from_values(model.H_eigs))
        delta = allocate_delta_sqrt(buckets, T)
        if eta_min is not UNRESTRICTED and eta_min == 0.0:
            raise InvalidParameterError("eigencurve rescaling needs eta_min > 0")
        return build_eigencurve(buckets, T, delta, eta0=eta0, beta=2.0, eta_min=eta_min)
    raise InvalidParameterError(f"unknown scheduler family {family!r}")


@dataclass(frozen=True)
class GridPoint:
    family: str
    eta0: float
    eta_min: float | None
    epochs: int
    mean_gap: float
    std_gap: float
    gaps: tuple


@dataclass(frozen=True)
class GridSearchResult:
    family: str
    epochs: int
    points: tuple
    best: GridPoint = field(init=False)

    def __post_init__(self):
        finite = [p for p in self.points if math.isfinite(p.mean_gap)]
        pool = finite if finite else list(self.points)
        if not pool:
            raise InfeasibleError("empty grid")

        def key(p):
            # ties prefer the smaller eta0, then the smaller eta_min
            # (an unrestricted eta_min sorts last)
            emin = math.inf if p.eta_min is UNRESTRICTED else p.eta_min
            return (p.mean_gap, p.eta0, emin)

        object.__setattr__(self, "best", min(pool, key=key))


def grid_search(
    data: Dataset,
    alpha_reg: float,
    family: str,
    eta0_grid,
    eta_min_grid,
    epochs: int,
    trials: int,
    batch_size: int = 1,
    seed: int = 0,
    model: RidgeModel | None = None,
) -> GridSearchResult:
    """Mean loss gap over seeded trials for every feasible grid point.

    Infeasible (eta0, eta_min) combinations are skipped; divergent runs
    keep their inf gap so the point is reported but never selected over a
    finite one.
    """
    if not eta0_grid:
        raise InvalidParameterError("empty eta0 grid")
    if model is None:
        model = fit_closed_form(data, alpha_reg)
    n_iters = data.n // batch_size if batch_size < data.n else 1
    T = epochs * n_iters
    points = []
    for gi, eta0 in enumerate(eta0_grid):
        for gj, eta_min in enumerate(eta_min_grid):
            try:
                sched = build_ridge_schedule(family, T, eta0, eta_min, model=model)
            except InvalidParameterError:
                continue
            finals = np.empty(trials)
            for k in range(trials):
                run_seed = seed * 1_000_003 + gi * 10_007 + gj * 101 + k
                gaps = run_ridge_sgd(data, model, sched, batch_size, run_seed)
                final = gaps[-1]
                finals[k] = final if math.isfinite(final) else math.inf
            finite = np.isfinite(finals).all()
            with np.errstate(over="ignore", invalid="ignore"):
                mean = float(np.mean(finals)) if finite else math.inf
                std = float(np.std(finals, ddof=1)) if finite and trials > 1 else 0.0
            if not math.isfinite(std):
                std = math.inf
            points.append(
                GridPoint(
                    family=family,
                    eta0=float(eta0),
                    eta_min=None if eta_min is UNRESTRICTED else float(eta_min),
                    epochs=epochs,
                    mean_gap=mean,
                    std_gap=std,
                    gaps=tuple(float(g) for g in finals),
                )
            )
    if not points:
        raise InfeasibleError(f"no feasible grid point for family {family!r}")
    return GridSearchResult(family=family, epochs=epochs, points=tuple(points))


def make_synthetic_least_squares(
    n: int = 2048,
    d: int = 48,
    alpha_pl: float = 2.0,
    kappa: float = 1024.0,
    mu_h: float = 0.004,
    alpha_reg: float = 1e-3,
    label_noise: float = 0.5,
    seed: int = 0,
) -> Dataset:
    """Least-squares data whose ridge Hessian has a planted power-law spectrum.

    Target Hessian eigenvalues are power-law quantiles on [mu_h, kappa*mu_h]
    (endpoints included, so the realized condition number is exactly kappa);
    the design matrix realizes them through its singular values, so
    ``fit_closed_form(..., alpha_reg)`` recovers the planted spectrum.
    """
    pl = PowerLawSpec(alpha=alpha_pl, mu=mu_h, L=mu_h * kappa)
    h = pl.inverse_cdf(np.linspace(0.0, 1.0, d))
    if np.any(h / 2.0 - alpha_reg <= 0):
        raise InvalidParameterError("mu_h too small: planted eigenvalues fall below 2*alpha_reg")
    sing = np.sqrt(n * (h / 2.0 - alpha_reg))
    rng = np.random.default_rng(seed)
    u_mat, _ = np.linalg.qr(rng.standard_normal((n, d)))
    v_mat, _ = np.linalg.qr(rng.standard_normal((d, d)))
    X = (u_mat * sing) @ v_mat.T
    w_true = rng.standard_normal(d) / math.sqrt(d)
    Y = X @ w_true + label_noise * rng.standard_normal(n)
    return Dataset(X=X, Y=Y)
