"""Tunneling of a harmonically bound pair through a Gaussian barrier.

Two independent routes to the tunneling exponent F0(epsilon): a
semiclassical complex-time boundary-value solver and an exact
coupled-channel scattering computation, plus the machinery to extract
and compare exponents.
"""

from .model import (
    BarrierSpec,
    ModelParams,
    PhasePoint,
    ScaledCharges,
    asymptotic_charges,
    total_energy,
)
from .classical import (
    RealTrajectory,
    ThresholdResult,
    find_epsilon_crit,
    find_nu0,
    integrate,
)

__all__ = [
    "BarrierSpec",
    "ModelParams",
    "PhasePoint",
    "ScaledCharges",
    "asymptotic_charges",
    "total_energy",
    "RealTrajectory",
    "ThresholdResult",
    "find_epsilon_crit",
    "find_nu0",
    "integrate",
]

__version__ = "0.1.0"
