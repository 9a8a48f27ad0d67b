"""Initial photon distributions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import IndexOutOfRange, TailMassError
from .model import PhotonDistribution, _round_half_up

KINDS = ("vacuum", "fock", "poisson", "thermal", "two_fock", "uniform_window", "custom")
TAIL_TOL = 1e-8


@dataclass(frozen=True)
class InitialStateSpec:
    """What to build and with which parameters.

    ``param1``/``param2`` depend on ``kind``: fock (n), poisson and thermal
    (mean), two_fock (mean, variance), uniform_window (low, high). Custom states
    read ``path``.
    """

    kind: str
    param1: float = 0.0
    param2: float = 0.0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown state kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("fock", "poisson", "thermal", "two_fock") and self.param1 < 0:
            raise ValueError(f"{self.kind} parameter must be >= 0, got {self.param1}")
        if self.kind == "two_fock" and self.param2 < 0:
            raise ValueError("two_fock variance must be >= 0")
        if self.kind == "uniform_window" and not (0 <= self.param1 <= self.param2):
            raise ValueError("uniform_window needs 0 <= low <= high")
        if self.kind == "custom" and not self.path:
            raise ValueError("custom state needs a path")

    @classmethod
    def vacuum(cls):
        return cls("vacuum")

    @classmethod
    def fock(cls, n):
        return cls("fock", float(n))

    @classmethod
    def poisson(cls, mean):
        return cls("poisson", float(mean))

    @classmethod
    def thermal(cls, mean):
        return cls("thermal", float(mean))

    @classmethod
    def two_fock(cls, mean, variance):
        return cls("two_fock", float(mean), float(variance))

    @classmethod
    def uniform_window(cls, low, high):
        return cls("uniform_window", float(low), float(high))

    @classmethod
    def custom(cls, path):
        return cls("custom", path=str(path))


def _delta(n: int, n_max: int) -> np.ndarray:
    if not 0 <= n <= n_max:
        raise IndexOutOfRange(f"Fock index {n} outside 0..{n_max}")
    p = np.zeros(n_max + 1)
    p[n] = 1.0
    return p


def _truncated(pmf: np.ndarray, tail: float, kind: str) -> np.ndarray:
    if tail >= TAIL_TOL:
        raise TailMassError(f"{kind} loses tail mass {tail:.3e} beyond n_max")
    return pmf / pmf.sum()


def load_custom(path, n_max: int) -> np.ndarray:
    """Read whitespace-separated ``n p`` rows; '#' starts a comment line."""
    p = np.zeros(n_max + 1)
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'n p', got {line!r}")
        n, prob = int(fields[0]), float(fields[1])
        if not 0 <= n <= n_max:
            raise IndexOutOfRange(f"{path}:{lineno}: index {n} outside 0..{n_max}")
        if prob < 0:
            raise ValueError(f"{path}:{lineno}: negative probability")
        p[n] += prob
    if p.sum() <= 0:
        raise ValueError(f"{path}: no probability mass")
    return p / p.sum()


def make(spec: InitialStateSpec, n_max: int) -> PhotonDistribution:
    n = np.arange(n_max + 1)
    kind = spec.kind
    if kind == "vacuum":
        p = _delta(0, n_max)
    elif kind == "fock":
        p = _delta(_round_half_up(spec.param1), n_max)
    elif kind == "poisson":
        mu = spec.param1
        if mu == 0:
            p = _delta(0, n_max)
        else:
            p = _truncated(stats.poisson.pmf(n, mu), stats.poisson.sf(n_max, mu), kind)
    elif kind == "thermal":
        m = spec.param1
        q = m / (1.0 + m)
        p = _truncated((1.0 - q) * q**n, q ** (n_max + 1), kind)
    elif kind == "two_fock":
        sigma = math.sqrt(spec.param2)
        lo = _round_half_up(spec.param1 - sigma)
        hi = _round_half_up(spec.param1 + sigma)
        p = 0.5 * (_delta(lo, n_max) + _delta(hi, n_max))
    elif kind == "uniform_window":
        lo, hi = _round_half_up(spec.param1), _round_half_up(spec.param2)
        if hi > n_max:
            raise IndexOutOfRange(f"window high {hi} beyond n_max {n_max}")
        p = np.zeros(n_max + 1)
        p[lo : hi + 1] = 1.0 / (hi - lo + 1)
    else:
        p = load_custom(spec.path, n_max)
    return PhotonDistribution(p)
