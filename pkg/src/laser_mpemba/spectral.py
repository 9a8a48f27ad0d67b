"""Spectral analysis of the truncated generator.

Exact branch: eigenpairs of the symmetrized tridiagonal matrix, mapped back to
biorthonormal left/right eigenfunctions of M, spectral amplitudes and series
propagation.

Asymptotic branch: above threshold and for large n_s the low modes follow a
Hermite ladder,

    lambda_a ~ -a (kappa - g)
    phi_a(n) ~ H_a(x) / (a! 2^a)
    psi_a(n) ~ P_S(n) H_a(x),      x = (n - n_p) / sqrt(2 (n_p + n_s)).

The exact spectrum also contains modes localized near the vacuum (the linear
amplifier region n << n_p). :func:`ladder_modes` separates the peak-localized
Hermite ladder from those.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .dynamics import IntegratorConfig, Trajectory, evolve
from .errors import BackTransformOverflow, ConvergenceFailure, DimensionMismatch, InsufficientModes
from .generator import Generator, SymmetrizedGenerator, build, symmetrize
from .model import LaserParams, PhotonDistribution, derived_scalars, stationary_distribution

log = logging.getLogger(__name__)

DEFAULT_MODES = 64
RECONSTRUCTION_TOL = 1e-6
BULK_SIGMAS = 3.0
# exp() overflows just above 709
_LOG_OVERFLOW = 700.0


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """First k eigenpairs, eigenvalues sorted descending from lambda_0 = 0.

    Column a of ``right_eigs``/``left_eigs`` holds psi_a/phi_a. Conventions:
    phi_0 = 1, psi_0 = P_S, sum_n phi_a psi_b = delta_ab, and phi_a > 0 at the
    upper edge of the 3-sigma window around the stationary mean.
    """

    eigenvalues: np.ndarray = field(repr=False)
    right_eigs: np.ndarray = field(repr=False)
    left_eigs: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("eigenvalues", "right_eigs", "left_eigs"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def size(self) -> int:
        return self.right_eigs.shape[0]

    def gram(self) -> np.ndarray:
        """Matrix of sum_n phi_a psi_b; the identity up to round-off."""
        return self.left_eigs.T @ self.right_eigs

    def stationary_window(self, sigmas: float = BULK_SIGMAS) -> np.ndarray:
        """Boolean mask of |n - <n>| <= sigmas * std under psi_0."""
        p = self.right_eigs[:, 0]
        n = np.arange(p.size)
        mean = n @ p
        std = math.sqrt(((n - mean) ** 2) @ p)
        return np.abs(n - mean) <= sigmas * std


@dataclass(frozen=True)
class AsymptoticMode:
    order: int
    eigenvalue: float
    argument_scale: float

    @classmethod
    def from_params(cls, order: int, params: LaserParams) -> "AsymptoticMode":
        if order < 0:
            raise ValueError("mode order must be >= 0")
        d = derived_scalars(params)
        return cls(order, -order * d.gap, math.sqrt(2.0 * (d.n_peak + params.n_sat)))


def decompose(sym: SymmetrizedGenerator, k: int | None = None) -> SpectralDecomposition:
    """Top-k eigenpairs of the symmetric tridiagonal form, back-transformed.

    With v an orthonormal eigenvector of S, psi = exp(+h) v and
    phi = exp(-h) v where h = (1/2) log P_S, so biorthonormality is inherited
    from orthonormality of v. Raises BackTransformOverflow when a requested
    left eigenfunction would exceed the float range.
    """
    size = sym.size
    k = size if k is None else int(k)
    if not 1 <= k <= size:
        raise ValueError(f"k must lie in 1..{size}, got {k}")
    try:
        w, v = eigh_tridiagonal(
            sym.diag_s,
            sym.off_s,
            select="i",
            select_range=(size - k, size - 1),
            lapack_driver="stemr",
        )
    except LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]

    h = sym.half_log_ps[:, None]
    with np.errstate(divide="ignore"):
        log_phi = np.log(np.abs(v)) - h
    bad = np.argwhere(log_phi > _LOG_OVERFLOW)
    if bad.size:
        n, a = bad[0]
        raise BackTransformOverflow(
            f"left eigenfunction of mode {a} overflows at n = {n} "
            f"(half log P_S = {sym.half_log_ps[n]:.1f}); reduce k or n_max"
        )
    phi = v * np.exp(-h)
    psi = v * np.exp(h)

    # fix signs: psi_0 >= 0, otherwise phi_a > 0 at the top of the bulk window
    p0 = np.exp(2.0 * sym.half_log_ps)
    n = np.arange(size)
    mean = n @ p0
    std = math.sqrt(((n - mean) ** 2) @ p0)
    n_hi = min(size - 1, int(math.floor(mean + BULK_SIGMAS * std)))
    for a in range(k):
        if a == 0:
            ref = v[np.argmax(np.abs(v[:, 0])), 0]
        elif abs(v[n_hi, a]) > 1e-12 * np.abs(v[:, a]).max():
            ref = v[n_hi, a]
        else:
            # mode has no weight at the window edge (vacuum-localized)
            ref = v[np.argmax(np.abs(v[:, a])), a]
        if ref < 0:
            phi[:, a] *= -1
            psi[:, a] *= -1

    norms = np.einsum("na,na->a", phi, psi)
    psi /= norms
    # phi_0 is constant; make it exactly one
    c0 = phi[:, 0].mean()
    phi[:, 0] = 1.0
    psi[:, 0] *= c0
    return SpectralDecomposition(w, psi, phi)


def decompose_model(params: LaserParams, k: int | None = None) -> SpectralDecomposition:
    """Build, symmetrize and decompose in one go."""
    gen = build(params)
    ps = stationary_distribution(params)
    return decompose(symmetrize(gen, ps), k)


def amplitudes(dec: SpectralDecomposition, p0: PhotonDistribution) -> np.ndarray:
    """C_a = sum_n p0[n] phi_a(n)."""
    x = p0.probs if isinstance(p0, PhotonDistribution) else np.asarray(p0, dtype=float)
    if x.size != dec.size:
        raise DimensionMismatch(f"distribution has {x.size} entries, decomposition {dec.size}")
    return dec.left_eigs.T @ x


def reconstruction_error(dec: SpectralDecomposition, p0: PhotonDistribution) -> float:
    c = amplitudes(dec, p0)
    return float(np.abs(dec.right_eigs @ c - p0.probs).sum())


def spectral_propagate(dec: SpectralDecomposition, p0: PhotonDistribution, times) -> Trajectory:
    """P(t) = sum_a C_a psi_a exp(lambda_a t), summed directly at each time.

    Raises InsufficientModes when the retained modes reconstruct ``p0`` with
    l1 error >= 1e-6.
    """
    times = np.asarray(times, dtype=float)
    c = amplitudes(dec, p0)
    err = float(np.abs(dec.right_eigs @ c - p0.probs).sum())
    if not err < RECONSTRUCTION_TOL:
        raise InsufficientModes(err, dec.n_modes)
    weights = c[:, None] * np.exp(np.outer(dec.eigenvalues, times))
    states = (dec.right_eigs @ weights).T
    return Trajectory(times, states, method="spectral")


def propagate(
    gen: Generator,
    p0: PhotonDistribution,
    cfg: IntegratorConfig,
    dec: SpectralDecomposition | None = None,
    method: str = "auto",
) -> Trajectory:
    """Propagate with the requested method.

    ``auto`` uses the spectral series when ``dec`` reconstructs ``p0`` and
    falls back to ODE integration otherwise. The method actually used is in
    ``Trajectory.method``.
    """
    if method not in ("auto", "spectral", "ode"):
        raise ValueError(f"unknown method {method!r}")
    if method == "ode":
        return evolve(gen, p0, cfg)
    if dec is None:
        if method == "spectral":
            raise ValueError("spectral method needs a decomposition")
        return evolve(gen, p0, cfg)
    try:
        return spectral_propagate(dec, p0, cfg.times())
    except InsufficientModes as exc:
        if method == "spectral":
            raise
        log.info("spectral series insufficient (%s); integrating ODE", exc)
        return evolve(gen, p0, cfg)


def hermite(order: int, x):
    """Physicists' Hermite polynomial by H_{a+1} = 2x H_a - 2a H_{a-1}."""
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if order == 0:
        return h_prev
    h = 2.0 * x
    for a in range(1, order):
        h_prev, h = h, 2.0 * x * h - 2.0 * a * h_prev
    return h


def _hermite_arg(mode: AsymptoticMode, params: LaserParams, n):
    n_p = derived_scalars(params).n_peak
    return (np.asarray(n, dtype=float) - n_p) / mode.argument_scale


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


def asymptotic_left(mode: AsymptoticMode, params: LaserParams, n):
    a = mode.order
    h = hermite(a, _hermite_arg(mode, params, n))
    return _scalar(h / (math.factorial(a) * 2.0**a))


def asymptotic_right(mode: AsymptoticMode, params: LaserParams, ps: PhotonDistribution, n):
    h = hermite(mode.order, _hermite_arg(mode, params, n))
    return _scalar(ps.probs[np.asarray(n)] * h)


def bulk_window(params: LaserParams) -> np.ndarray:
    """Fock indices with |n - n_p| <= 3 sqrt(n_p + n_s)."""
    d = derived_scalars(params)
    n = np.arange(params.n_max + 1)
    return n[np.abs(n - d.n_peak) <= BULK_SIGMAS * math.sqrt(d.n_peak + params.n_sat)]


def bulk_weights(dec: SpectralDecomposition) -> np.ndarray:
    """Share of sum_n phi_a psi_a (= 1) inside the 3-sigma stationary window."""
    win = dec.stationary_window()
    return np.einsum("na,na->a", dec.left_eigs[win], dec.right_eigs[win])


def vacuum_weights(dec: SpectralDecomposition) -> np.ndarray:
    """Share of sum_n phi_a psi_a below the 3-sigma stationary window."""
    lo = int(np.flatnonzero(dec.stationary_window())[0])
    return np.einsum("na,na->a", dec.left_eigs[:lo], dec.right_eigs[:lo])


def ladder_modes(dec: SpectralDecomposition, max_vacuum_weight: float = 0.5) -> np.ndarray:
    """Indices of modes that live on the stationary peak.

    These form the Hermite ladder. Vacuum-localized modes (linear-amplifier
    relaxation near n = 0) put most of their weight below the stationary
    window and are skipped.
    """
    return np.flatnonzero(vacuum_weights(dec) < max_vacuum_weight)


def ladder_mode(dec: SpectralDecomposition, alpha: int) -> int:
    ladder = ladder_modes(dec)
    if alpha >= ladder.size:
        raise ValueError(
            f"only {ladder.size} peak-localized modes among the {dec.n_modes} computed; "
            f"ladder order {alpha} unavailable"
        )
    return int(ladder[alpha])


def _scale_match(exact: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    """Least-squares c minimizing |c*exact - target| and the relative residual."""
    c = float(exact @ target) / float(exact @ exact)
    return c, float(np.linalg.norm(c * exact - target) / np.linalg.norm(target))


def compare_asymptotics(dec: SpectralDecomposition, params: LaserParams, alpha: int) -> float:
    """Relative l2 gap between exact phi_alpha (scale-matched) and the Hermite form.

    Restricted to the 3-sigma bulk window. ``alpha`` counts along the
    peak-localized ladder, which coincides with the raw index unless vacuum
    modes interleave.
    """
    if not params.above_threshold:
        raise ValueError("asymptotic eigenfunctions need G > kappa")
    idx = ladder_mode(dec, alpha)
    win = bulk_window(params)
    mode = AsymptoticMode.from_params(alpha, params)
    _, disc = _scale_match(dec.left_eigs[win, idx], asymptotic_left(mode, params, win))
    return disc


def hermite_matched_amplitude(
    dec: SpectralDecomposition, params: LaserParams, p0: PhotonDistribution, alpha: int
) -> float:
    """C_alpha with phi_alpha rescaled to the monic Hermite form in n.

    The target is (n - n_p)^alpha + lower order, i.e. s^alpha H_alpha(x) / 2^alpha
    with s = sqrt(2(n_p + n_s)); for alpha = 1 this is n - n_p, the first-moment
    estimate sum (n - n_bar) P_n(0).
    """
    idx = ladder_mode(dec, alpha)
    win = bulk_window(params)
    mode = AsymptoticMode.from_params(alpha, params)
    s = mode.argument_scale
    target = s**alpha * hermite(alpha, _hermite_arg(mode, params, win)) / 2.0**alpha
    c, _ = _scale_match(dec.left_eigs[win, idx], target)
    return c * float(dec.left_eigs[:, idx] @ p0.probs)
