"""Scully-Lamb single-mode laser: parameters, rates and stationary statistics.

Photon number n hops up with the saturated gain rate G_n = nG/(1 + n/n_s) and
down with the cavity loss rate L_n = n*kappa.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TruncationError

#: tolerated negative excursion of a probability before read-out clipping
EPS_NEG = 1e-12
NORM_TOL = 1e-10
TRUNCATION_TOL = 1e-12


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def auto_n_max(gain: float, kappa: float, n_sat: float) -> int:
    """Default Fock cutoff for the given physical parameters.

    Above threshold the window extends 10 standard deviations past the peak.
    Below threshold the thermal rule ``50*G/(kappa - G)`` is capped by
    ``10*sqrt(n_s)``: saturation alone already suppresses the tail there.
    """
    ratio = gain / kappa
    if ratio > 1.0:
        n_p = n_sat * (ratio - 1.0)
        n = math.ceil(n_p + 10.0 * math.sqrt(n_p + n_sat))
    else:
        cap = math.ceil(10.0 * math.sqrt(n_sat))
        n = cap if ratio == 1.0 else min(math.ceil(50.0 * gain / (kappa - gain)), cap)
    return max(n, 2)


@dataclass(frozen=True)
class LaserParams:
    """Physical parameters plus the Fock-space truncation.

    ``n_max=None`` selects :func:`auto_n_max`. An explicit ``n_max`` is taken
    as given, so tiny test instances are allowed; the stationary solver flags
    windows that are too small.
    """

    gain: float
    kappa: float
    n_sat: float
    n_max: int | None = None

    def __post_init__(self):
        for name in ("gain", "kappa", "n_sat"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.n_max is None:
            object.__setattr__(self, "n_max", auto_n_max(self.gain, self.kappa, self.n_sat))
        elif int(self.n_max) != self.n_max or self.n_max < 2:
            raise ValueError(f"n_max must be an integer >= 2, got {self.n_max!r}")
        else:
            object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def ratio(self) -> float:
        return self.gain / self.kappa

    @property
    def above_threshold(self) -> bool:
        return self.gain > self.kappa

    @property
    def size(self) -> int:
        return self.n_max + 1

    def with_n_max(self, n_max: int | None) -> "LaserParams":
        return LaserParams(self.gain, self.kappa, self.n_sat, n_max)


@dataclass(frozen=True)
class DerivedScalars:
    n_bar: float
    n_peak: float
    diff_gain: float
    gap: float
    sigma2: float

    @property
    def n_peak_index(self) -> int:
        return _round_half_up(self.n_peak)


@dataclass(frozen=True, eq=False)
class PhotonDistribution:
    """Probability vector over Fock states 0..N_max.

    The array is copied and frozen on construction. Use :meth:`from_raw` for
    integrator output that may carry tiny negative entries.
    """

    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a non-empty 1-d array")
        if not np.all(np.isfinite(p)):
            raise ValueError("probs contains non-finite entries")
        if p.min() < -EPS_NEG:
            raise ValueError(f"negative probability {p.min():.3e}")
        total = p.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_raw(cls, values) -> "PhotonDistribution":
        """Clip negative excursions to zero and renormalize."""
        p = np.clip(np.asarray(values, dtype=float), 0.0, None)
        return cls(p / p.sum())

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, n):
        return self.probs[n]

    def mean(self) -> float:
        n = np.arange(self.probs.size)
        return float(n @ self.probs)

    def variance(self) -> float:
        n = np.arange(self.probs.size)
        m = self.mean()
        return float(((n - m) ** 2) @ self.probs)

    def mode(self) -> int:
        return int(np.argmax(self.probs))


def gain_rate(params: LaserParams, n):
    """Saturated gain G_n = nG/(1 + n/n_s). Accepts scalars or arrays."""
    n = np.asarray(n, dtype=float)
    out = n * params.gain / (1.0 + n / params.n_sat)
    return float(out) if out.ndim == 0 else out


def loss_rate(params: LaserParams, n):
    """Linear cavity loss L_n = n*kappa."""
    n = np.asarray(n, dtype=float)
    out = n * params.kappa
    return float(out) if out.ndim == 0 else out


def log_stationary(params: LaserParams) -> np.ndarray:
    """Normalized log P^(S)_n from the product of G_l/L_l, evaluated in log-space."""
    n = np.arange(1, params.n_max + 1, dtype=float)
    # log(G_l / L_l) = log(G/kappa) - log(1 + l/n_s)
    steps = math.log(params.ratio) - np.log1p(n / params.n_sat)
    logp = np.concatenate(([0.0], np.cumsum(steps)))
    logp -= logp.max()
    logp -= math.log(np.exp(logp).sum())
    return logp


def stationary_distribution(params: LaserParams, check_truncation: bool = True) -> PhotonDistribution:
    """Displaced-Poisson stationary state on 0..N_max.

    Raises TruncationError when the last retained state still carries more than
    1e-12 of the peak probability. Disable the check for deliberately tiny
    windows.
    """
    logp = log_stationary(params)
    p = np.exp(logp)
    if check_truncation:
        tail = math.exp(logp[-1] - logp.max())
        if tail > TRUNCATION_TOL:
            raise TruncationError(
                f"P(N_max)/max P = {tail:.3e} exceeds {TRUNCATION_TOL:g}; increase n_max"
            )
    return PhotonDistribution(p / p.sum())


def derived_scalars(params: LaserParams) -> DerivedScalars:
    kappa, gain = params.kappa, params.gain
    if gain > kappa:
        n_bar = params.n_sat * (gain / kappa - 1.0)
        g = kappa**2 / gain
        return DerivedScalars(n_bar, n_bar, g, kappa - g, n_bar + params.n_sat)
    # below threshold the linearized decay rate kappa - G is the gap
    return DerivedScalars(0.0, 0.0, gain, kappa - gain, params.n_sat)


def detailed_balance_residual(params: LaserParams, ps: PhotonDistribution) -> np.ndarray:
    """Pointwise |L_n P_n - G_n P_{n-1}| / max(L_n P_n, tiny) for n >= 1."""
    n = np.arange(1, params.n_max + 1)
    p = ps.probs
    down = loss_rate(params, n) * p[1:]
    up = gain_rate(params, n) * p[:-1]
    return np.abs(down - up) / np.maximum(np.maximum(down, up), np.finfo(float).tiny)
