"""Distance to equilibrium, decay-rate fits and Mpemba verdicts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory
from .errors import DimensionMismatch, FitWindowEmpty, GridMismatch
from .model import PhotonDistribution

MIN_FIT_SAMPLES = 8
FIT_FLOOR = 1e-9
FIT_LOW, FIT_HIGH = 1e-4, 1e-1
#: distances below this are round-off; sign changes there are ignored
NOISE_FLOOR = 1e-12


def _vec(p) -> np.ndarray:
    return p.probs if isinstance(p, PhotonDistribution) else np.asarray(p, dtype=float)


def distance(p, ps) -> float:
    """Hilbert-Schmidt (l2) distance between two photon distributions."""
    a, b = _vec(p), _vec(ps)
    if a.shape != b.shape:
        raise DimensionMismatch(f"lengths {a.shape} and {b.shape} differ")
    return float(np.linalg.norm(a - b))


def trace_distance(p, ps) -> float:
    """Half the l1 norm of the difference (diagonal states only)."""
    a, b = _vec(p), _vec(ps)
    if a.shape != b.shape:
        raise DimensionMismatch(f"lengths {a.shape} and {b.shape} differ")
    return 0.5 * float(np.abs(a - b).sum())


def kl_divergence(p, ps) -> float:
    """KL(p || ps); infinite if p has mass where ps vanishes."""
    a, b = _vec(p), _vec(ps)
    if a.shape != b.shape:
        raise DimensionMismatch(f"lengths {a.shape} and {b.shape} differ")
    a = np.clip(a, 0.0, None)
    m = a > 0
    if np.any(b[m] <= 0):
        return math.inf
    return float(np.sum(a[m] * np.log(a[m] / b[m])))


MEASURES = {"hilbert_schmidt": distance, "trace": trace_distance, "kl": kl_divergence}


@dataclass(frozen=True, eq=False)
class DistanceTrajectory:
    times: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    fitted_rate: float = math.nan
    fit_window: tuple[int, int] | None = None


@dataclass(frozen=True, eq=False)
class MpembaVerdict:
    initial_order: int
    crossing_times: np.ndarray
    mpemba_detected: bool
    rates: tuple[float, float]


def fit_decay_rate(times, distances) -> tuple[float, tuple[int, int]]:
    """Slope of log D over the samples with D in [max(1e-9, 1e-4 D0), 1e-1 D0]."""
    t = np.asarray(times, dtype=float)
    d = np.asarray(distances, dtype=float)
    d0 = d[0]
    lo, hi = max(FIT_FLOOR, FIT_LOW * d0), FIT_HIGH * d0
    idx = np.flatnonzero((d >= lo) & (d <= hi))
    if idx.size < MIN_FIT_SAMPLES:
        raise FitWindowEmpty(
            f"{idx.size} samples with D in [{lo:.3g}, {hi:.3g}]; "
            f"need {MIN_FIT_SAMPLES} (extend t_end or sample more densely)"
        )
    slope = np.polyfit(t[idx], np.log(d[idx]), 1)[0]
    return float(-slope), (int(idx[0]), int(idx[-1]))


def distance_trajectory(
    traj: Trajectory, ps: PhotonDistribution, measure: str = "hilbert_schmidt", fit: bool = True
) -> DistanceTrajectory:
    """Distances along ``traj`` and the late-time decay rate.

    With ``fit=False`` a failed fit leaves ``fitted_rate`` as NaN instead of
    raising FitWindowEmpty.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    ref = _vec(ps)
    if traj.states.shape[1] != ref.size:
        raise DimensionMismatch("trajectory and stationary state sizes differ")
    if measure == "hilbert_schmidt":
        d = np.linalg.norm(traj.states - ref, axis=1)
    else:
        f = MEASURES[measure]
        d = np.array([f(s, ref) for s in traj.states])
    try:
        rate, window = fit_decay_rate(traj.times, d)
    except FitWindowEmpty:
        if fit:
            raise
        rate, window = math.nan, None
    return DistanceTrajectory(traj.times, d, rate, window)


def _crossings(t: np.ndarray, diff: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(diff != 0)
    out = []
    for i, j in zip(idx[:-1], idx[1:]):
        if np.sign(diff[i]) != np.sign(diff[j]):
            if j == i + 1:
                out.append(t[i] + (t[j] - t[i]) * diff[i] / (diff[i] - diff[j]))
            else:
                # exact zeros in between; report the first of them
                out.append(t[i + 1])
    return np.array(out, dtype=float)


def compare(traj_a: DistanceTrajectory, traj_b: DistanceTrajectory) -> MpembaVerdict:
    """Mpemba verdict with A as state I and B as state II.

    Detected iff D_II(0) > D_I(0) and D_II < D_I at every sample after the
    last crossing. Samples where both distances sit below the noise floor are
    excluded from the crossing analysis.
    """
    if traj_a.times.shape != traj_b.times.shape or not np.array_equal(traj_a.times, traj_b.times):
        raise GridMismatch("distance trajectories use different time grids")
    t = traj_a.times
    d1, d2 = traj_a.distances, traj_b.distances
    order = int(np.sign(d2[0] - d1[0]))
    keep = np.maximum(d1, d2) > NOISE_FLOOR
    diff = (d1 - d2)[keep]
    tk = t[keep]
    crossings = _crossings(tk, diff)
    detected = False
    if order > 0 and crossings.size and diff.size:
        after = diff[tk > crossings[-1]]
        detected = bool(after.size > 0 and np.all(after > 0))
    return MpembaVerdict(order, crossings, detected, (traj_a.fitted_rate, traj_b.fitted_rate))
