"""Photon-number relaxation and the Mpemba effect in the Scully-Lamb laser model."""
from .dynamics import IntegratorConfig, Trajectory, evolve
from .generator import Generator, SymmetrizedGenerator, apply, build, symmetrize
from .model import (
    DerivedScalars,
    LaserParams,
    PhotonDistribution,
    derived_scalars,
    gain_rate,
    loss_rate,
    stationary_distribution,
)
from .mpemba import DistanceTrajectory, MpembaVerdict, compare, distance, distance_trajectory
from .spectral import (
    AsymptoticMode,
    SpectralDecomposition,
    amplitudes,
    asymptotic_left,
    asymptotic_right,
    compare_asymptotics,
    decompose,
    decompose_model,
    propagate,
    spectral_propagate,
)
from .states import InitialStateSpec, make

__version__ = "0.1.0"
