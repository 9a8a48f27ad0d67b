"""Time integration of dP/dt = M P.

The generator is stiff (|M_nn| reaches ~N_max*kappa while the slowest rate is
the spectral gap) but an explicit embedded pair is affordable at these sizes.
The stepping loop is compiled with numba.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DimensionMismatch, NonFiniteState, ToleranceFailure
from .generator import Generator
from .model import PhotonDistribution

log = logging.getLogger(__name__)

MASS_TOL = 1e-8
H_MIN = 1e-14


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float
    n_samples: int = 201
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_samples)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution. ``states[k]`` is the distribution at ``times[k]``.

    States are stored raw (renormalized but not clipped); ``raw_mass`` keeps
    the pre-renormalization sums when the integrator produced them.
    """

    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    method: str = "ode"
    raw_mass: np.ndarray | None = field(default=None, repr=False)
    n_steps: int = 0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] != times.size:
            raise DimensionMismatch("states must be (len(times), N_max + 1)")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.times.size

    def snapshot(self, k: int) -> PhotonDistribution:
        return PhotonDistribution.from_raw(self.states[k])

    def final(self) -> PhotonDistribution:
        return self.snapshot(-1)


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between 5th- and embedded 4th-order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


@njit(cache=True)
def _matvec(sub, diag, sup, x, out):
    n = x.size
    out[0] = diag[0] * x[0] + sup[0] * x[1]
    for i in range(1, n - 1):
        out[i] = sub[i - 1] * x[i - 1] + diag[i] * x[i] + sup[i] * x[i + 1]
    out[n - 1] = sub[n - 2] * x[n - 2] + diag[n - 1] * x[n - 1]


@njit(cache=True)
def _dopri(sub, diag, sup, y0, t_out, rtol, atol, h_max, h_min):
    n = y0.size
    m = t_out.size
    out = np.empty((m, n))
    out[0] = y0
    y = y0.copy()
    yn = np.empty(n)
    tmp = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    _matvec(sub, diag, sup, y, k1)

    t = t_out[0]
    h = 0.1 * h_max
    j = 1
    n_steps = 0
    status = 0
    while j < m:
        target = t_out[j]
        hh = min(h, target - t)
        for i in range(n):
            tmp[i] = y[i] + hh * _A21 * k1[i]
        _matvec(sub, diag, sup, tmp, k2)
        for i in range(n):
            tmp[i] = y[i] + hh * (_A31 * k1[i] + _A32 * k2[i])
        _matvec(sub, diag, sup, tmp, k3)
        for i in range(n):
            tmp[i] = y[i] + hh * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        _matvec(sub, diag, sup, tmp, k4)
        for i in range(n):
            tmp[i] = y[i] + hh * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        _matvec(sub, diag, sup, tmp, k5)
        for i in range(n):
            tmp[i] = y[i] + hh * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        _matvec(sub, diag, sup, tmp, k6)
        for i in range(n):
            yn[i] = y[i] + hh * (
                _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
            )
        _matvec(sub, diag, sup, yn, k7)

        err = 0.0
        for i in range(n):
            e = hh * (
                _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
            )
            scale = atol + rtol * max(abs(y[i]), abs(yn[i]))
            r = abs(e) / scale
            if r > err:
                err = r
        if not np.isfinite(err):
            status = 2
            break

        if err <= 1.0:
            t += hh
            for i in range(n):
                y[i] = yn[i]
                k1[i] = k7[i]
            n_steps += 1
            if target - t <= 1e-12 * max(1.0, abs(target)):
                t = target
                out[j] = y
                j += 1
            if hh < h:
                # step was clipped to hit a sample time; keep the old proposal
                continue
        factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h = min(h_max, hh * factor)
        if h < h_min:
            status = 1
            break
    return out, n_steps, status, t


def evolve(gen: Generator, p0: PhotonDistribution, cfg: IntegratorConfig) -> Trajectory:
    """Integrate from ``p0`` and sample uniformly on [0, t_end].

    Each snapshot is divided by its own sum; the raw sums are kept on the
    trajectory. Steps never exceed 0.5 / max|M_nn|.
    """
    if len(p0) != gen.size:
        raise DimensionMismatch(f"initial state has {len(p0)} entries, generator {gen.size}")
    times = cfg.times()
    h_max = 0.5 / gen.stiffness
    out, n_steps, status, t_reached = _dopri(
        np.ascontiguousarray(gen.sub),
        np.ascontiguousarray(gen.diag),
        np.ascontiguousarray(gen.sup),
        np.array(p0.probs, dtype=float),
        times,
        cfg.rel_tol,
        cfg.abs_tol,
        h_max,
        H_MIN,
    )
    if status == 1:
        raise ToleranceFailure(f"step size fell below {H_MIN:g} at t = {t_reached:.6g}")
    if status == 2 or not np.all(np.isfinite(out)):
        raise NonFiniteState(f"non-finite state near t = {t_reached:.6g}")
    mass = out.sum(axis=1)
    drift = np.abs(mass - 1.0).max()
    if drift > MASS_TOL:
        log.warning("probability drift %.3e exceeds %.0e before renormalization", drift, MASS_TOL)
    return Trajectory(times, out / mass[:, None], method="ode", raw_mass=mass, n_steps=n_steps)
