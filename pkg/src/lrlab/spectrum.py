"""Eigenvalue spectra of Hessians: ingestion, preprocessing, dyadic
bucketing, and power-law synthesis.

A spectrum is a weighted list of eigenvalues.  Weights are counts for
explicit matrices and densities for estimated spectra; every formula
downstream treats the bucket masses as reals, so both work unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    InvalidParameterError,
    ParseError,
)

__all__ = [
    "EigenSpectrum",
    "DyadicBuckets",
    "PowerLawSpec",
    "parse_esd_file",
    "write_esd_file",
    "preprocess",
    "bucketize",
    "power_law_buckets",
    "sample_power_law",
]


def _frozen_array(values, dtype=float):
    arr = np.asarray(values, dtype=dtype).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EigenSpectrum:
    """Weighted eigenvalues in canonical form (sorted ascending by value).

    ``lambdas`` may contain nonpositive entries until :func:`preprocess`
    has run; all bucketing operations require strictly positive values.
    """

    lambdas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if lam.ndim != 1 or lam.shape != w.shape:
            raise InvalidParameterError("lambdas and weights must be equal-length vectors")
        if lam.size == 0:
            raise DegenerateSpectrumError("empty spectrum")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(lam)):
            raise InvalidParameterError("weights must be finite and nonnegative")
        order = np.argsort(lam, kind="stable")
        object.__setattr__(self, "lambdas", _frozen_array(lam[order]))
        object.__setattr__(self, "weights", _frozen_array(w[order]))
        if self.d <= 0:
            raise DegenerateSpectrumError("spectrum has zero total mass")

    @classmethod
    def from_values(cls, values, weight=1.0):
        values = np.asarray(values, dtype=float)
        return cls(values, np.full(values.shape, float(weight)))

    @property
    def d(self) -> float:
        """Total mass (the number of eigenvalues when weights are counts)."""
        return float(math.fsum(self.weights))

    @property
    def entries(self):
        return list(zip(self.lambdas.tolist(), self.weights.tolist()))

    def __len__(self):
        return int(self.lambdas.size)


@dataclass(frozen=True)
class DyadicBuckets:
    """Mass of a spectrum split over the ranges [mu * 2^i, mu * 2^(i+1)).

    The ranges are half open except that the largest eigenvalue L closes
    the final one; ``i_max = max(1, ceil(log2 kappa))`` so the union of
    ranges always covers [mu, L].
    """

    mu: float
    L: float
    s: np.ndarray
    kappa: float = field(init=False)
    i_max: int = field(init=False)

    def __post_init__(self):
        if not (0 < self.mu <= self.L):
            raise InvalidParameterError("need 0 < mu <= L")
        s = _frozen_array(self.s)
        if s.ndim != 1 or s.size == 0 or np.any(s < 0):
            raise InvalidParameterError("bucket masses must be a nonnegative vector")
        kappa = self.L / self.mu
        if s.size != _dyadic_i_max(kappa):
            raise InvalidParameterError(
                f"{s.size} buckets inconsistent with kappa={kappa} "
                f"(expected {_dyadic_i_max(kappa)})"
            )
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "i_max", int(s.size))

    @property
    def d(self) -> float:
        return float(math.fsum(self.s))


def _dyadic_i_max(kappa: float) -> int:
    if kappa <= 1.0:
        return 1
    return max(1, int(math.ceil(math.log2(kappa))))


def parse_esd_file(path) -> EigenSpectrum:
    """Read a two-column ``<lambda> <weight>`` text file.

    ``#``-prefixed lines are comments, blank lines are skipped, and raw
    eigenvalues may be negative (preprocessing handles sign and shift).
    """
    lambdas = []
    weights = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(
                    f"expected '<lambda> <weight>', got {line!r}", path=path, line=lineno
                )
            try:
                lam = float(parts[0])
                w = float(parts[1])
            except ValueError:
                raise ParseError(
                    f"non-numeric entry {line!r}", path=path, line=lineno
                ) from None
            if not math.isfinite(lam) or not math.isfinite(w) or w < 0:
                raise ParseError(
                    f"weight must be finite and nonnegative, got {line!r}",
                    path=path,
                    line=lineno,
                )
            lambdas.append(lam)
            weights.append(w)
    if not lambdas:
        raise ParseError("no entries found", path=path)
    return EigenSpectrum(np.array(lambdas), np.array(weights))


def write_esd_file(spec: EigenSpectrum, path, header_lines=()):
    """Canonical export: ascending by eigenvalue, 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for lam, w in zip(spec.lambdas, spec.weights):
            fh.write(f"{lam:.17g} {w:.17g}\n")


def preprocess(raw: EigenSpectrum, weight_decay: float) -> EigenSpectrum:
    """Map every eigenvalue to ``|lambda| + weight_decay`` and re-canonicalize.

    Negative estimates are artifacts of finite estimation precision, and a
    ridge/weight-decay term shifts the true curvature, hence abs-then-shift.
    """
    if weight_decay < 0:
        raise InvalidParameterError("weight_decay must be nonnegative")
    lam = np.abs(raw.lambdas) + weight_decay
    if np.any(lam == 0.0):
        raise DegenerateSpectrumError(
            "spectrum contains zero eigenvalues after preprocessing; "
            "use a positive weight_decay"
        )
    return EigenSpectrum(lam, raw.weights)


def bucketize(spec: EigenSpectrum) -> DyadicBuckets:
    """Count spectrum mass per dyadic range [mu * 2^i, mu * 2^(i+1)).

    ``mu``/``L`` are the smallest/largest eigenvalues carrying positive
    weight; ``lambda == L`` lands in the last bucket so the maximum is
    never orphaned by the half-open ranges.
    """
    carrying = spec.weights > 0
    lam = spec.lambdas[carrying]
    w = spec.weights[carrying]
    if lam.size == 0:
        raise DegenerateSpectrumError("spectrum has no positive-weight entries")
    if np.any(lam <= 0):
        raise InvalidParameterError("bucketize requires strictly positive eigenvalues")
    mu = float(lam[0])
    L = float(lam[-1])
    kappa = L / mu
    i_max = _dyadic_i_max(kappa)

    idx = np.floor(np.log2(lam / mu)).astype(int)
    # fix boundary cases in the original domain, where membership is defined
    idx[lam >= mu * np.exp2(idx + 1.0)] += 1
    idx[lam < mu * np.exp2(idx.astype(float))] -= 1
    np.clip(idx, 0, i_max - 1, out=idx)

    s = np.zeros(i_max)
    np.add.at(s, idx, w)
    return DyadicBuckets(mu=mu, L=L, s=s)


@dataclass(frozen=True)
class PowerLawSpec:
    """Density ``p(lambda) = (mu/lambda)^alpha / Z`` on [mu, L], alpha > 1."""

    alpha: float
    mu: float
    L: float
    Z: float = field(init=False)

    def __post_init__(self):
        if self.alpha <= 1:
            raise InvalidParameterError("power law requires alpha > 1")
        if not (0 < self.mu < self.L):
            raise InvalidParameterError("power law requires 0 < mu < L")
        a1 = 1.0 - self.alpha
        z = self.mu**self.alpha * (self.L**a1 - self.mu**a1) / a1
        object.__setattr__(self, "Z", float(z))

    @property
    def kappa(self) -> float:
        return self.L / self.mu

    def density(self, lam):
        lam = np.asarray(lam, dtype=float)
        return (self.mu / lam) ** self.alpha / self.Z

    def cdf(self, lam):
        a1 = 1.0 - self.alpha
        lam = np.asarray(lam, dtype=float)
        return (lam**a1 - self.mu**a1) / (self.L**a1 - self.mu**a1)

    def inverse_cdf(self, u):
        a1 = 1.0 - self.alpha
        u = np.asarray(u, dtype=float)
        return (self.mu**a1 + u * (self.L**a1 - self.mu**a1)) ** (1.0 / a1)


def power_law_buckets(pl: PowerLawSpec, d: float) -> DyadicBuckets:
    """Dyadic bucket masses implied by a power-law density.

    Interior buckets follow the closed form
    ``s_i = d * 2^(i(1-alpha)) * (2^(1-alpha) - 1) / (kappa^(1-alpha) - 1)``;
    the final bucket absorbs the remaining mass because the last dyadic
    range is truncated at L.
    """
    if d <= 0:
        raise InvalidParameterError("total mass d must be positive")
    kappa = pl.kappa
    if kappa < 2.0:
        return DyadicBuckets(mu=pl.mu, L=pl.L, s=np.array([float(d)]))
    i_max = _dyadic_i_max(kappa)
    a1 = 1.0 - pl.alpha
    ratio = (2.0**a1 - 1.0) / (kappa**a1 - 1.0)
    s = np.empty(i_max)
    for i in range(i_max - 1):
        s[i] = d * ratio * 2.0 ** (i * a1)
    s[i_max - 1] = d - math.fsum(s[: i_max - 1])
    return DyadicBuckets(mu=pl.mu, L=pl.L, s=s)


def sample_power_law(pl: PowerLawSpec, n: int, seed: int) -> EigenSpectrum:
    """Draw ``n`` eigenvalues i.i.d. from the power-law density.

    Inverse-CDF sampling, deterministic for a fixed seed.
    """
    if n <= 0:
        raise InvalidParameterError("need n >= 1 samples (total mass must be positive)")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    return EigenSpectrum.from_values(pl.inverse_cdf(u))
