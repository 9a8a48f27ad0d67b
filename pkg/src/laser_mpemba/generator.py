"""Truncated tridiagonal generator of the photon-number master equation.

    dP_n/dt = G_n P_{n-1} + L_{n+1} P_{n+1} - (L_n + G_{n+1}) P_n

Bands are kept as flat vectors; no dense matrix is formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidStationary
from .model import LaserParams, PhotonDistribution, gain_rate, loss_rate

_DB_TOL = 1e-8


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Generator:
    """Bands of M with reflecting truncation at N_max.

    ``sub[n-1] = M[n, n-1] = G_n`` and ``sup[n] = M[n, n+1] = L_{n+1}``, so both
    off-diagonals have length N_max. Every column of M sums to zero.
    """

    sub: np.ndarray = field(repr=False)
    diag: np.ndarray = field(repr=False)
    sup: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("sub", "diag", "sup"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (self.sub.size == self.sup.size == self.diag.size - 1):
            raise DimensionMismatch("band lengths must be (N, N+1, N)")

    @property
    def size(self) -> int:
        return self.diag.size

    @property
    def n_max(self) -> int:
        return self.diag.size - 1

    @property
    def stiffness(self) -> float:
        """max_n |M_nn|, the scale that bounds explicit step sizes."""
        return float(np.abs(self.diag).max())

    def column_sums(self) -> np.ndarray:
        s = self.diag.copy()
        s[:-1] += self.sub
        s[1:] += self.sup
        return s


@dataclass(frozen=True, eq=False)
class SymmetrizedGenerator:
    """S = D^{-1/2} M D^{1/2} with D = diag(P^(S)).

    ``off_s[n-1] = sqrt(G_n L_n)``; ``half_log_ps`` is (1/2) log P^(S)_n, used
    to map eigenvectors of S back to left/right eigenfunctions of M.
    """

    diag_s: np.ndarray = field(repr=False)
    off_s: np.ndarray = field(repr=False)
    half_log_ps: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("diag_s", "off_s", "half_log_ps"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def size(self) -> int:
        return self.diag_s.size


def build(params: LaserParams) -> Generator:
    n = np.arange(params.n_max + 1, dtype=float)
    g = gain_rate(params, n)
    l = loss_rate(params, n)
    g_next = np.append(g[1:], 0.0)  # reflecting: no gain out of N_max
    return Generator(sub=g[1:], diag=-(l + g_next), sup=l[1:])


def apply(gen: Generator, p) -> np.ndarray:
    """dP/dt = M p."""
    x = p.probs if isinstance(p, PhotonDistribution) else np.asarray(p, dtype=float)
    if x.shape[0] != gen.size:
        raise DimensionMismatch(f"distribution has {x.shape[0]} entries, generator {gen.size}")
    out = gen.diag * x if x.ndim == 1 else gen.diag[:, None] * x
    if x.ndim == 1:
        out[1:] += gen.sub * x[:-1]
        out[:-1] += gen.sup * x[1:]
    else:
        out[1:] += gen.sub[:, None] * x[:-1]
        out[:-1] += gen.sup[:, None] * x[1:]
    return out


def log_stationary_from_bands(gen: Generator) -> np.ndarray:
    """Normalized log P^(S) from detailed balance on the bands alone."""
    logp = np.concatenate(([0.0], np.cumsum(np.log(gen.sub) - np.log(gen.sup))))
    logp -= logp.max()
    return logp - np.log(np.exp(logp).sum())


def symmetrize(gen: Generator, ps: PhotonDistribution) -> SymmetrizedGenerator:
    """Similarity transform to a symmetric tridiagonal matrix.

    ``ps`` is only validated here (detailed balance to 1e-8); the stored
    half-log weights are recomputed from the bands so they stay finite where
    P^(S) underflows.
    """
    if len(ps) != gen.size:
        raise DimensionMismatch(f"stationary vector has {len(ps)} entries, generator {gen.size}")
    p = ps.probs
    down = gen.sup * p[1:]
    up = gen.sub * p[:-1]
    resid = np.abs(down - up) / np.maximum(np.maximum(down, up), np.finfo(float).tiny)
    if resid.max() > _DB_TOL:
        raise InvalidStationary(f"detailed-balance residual {resid.max():.3e} exceeds {_DB_TOL:g}")
    return SymmetrizedGenerator(
        diag_s=gen.diag,
        off_s=np.sqrt(gen.sub * gen.sup),
        half_log_ps=0.5 * log_stationary_from_bands(gen),
    )
