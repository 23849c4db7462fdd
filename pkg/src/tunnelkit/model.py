"""Shared model definition: Gaussian barrier, energies, rescaled charges.

Two particles of equal mass (unit total mass after reduction to the
center-of-mass coordinate X and relative coordinate y) are bound
harmonically with frequency ``omega`` while one of them is repelled from
the origin.  The repulsion acts through x1 = X + y.  All classical and
semiclassical work happens in rescaled units where the barrier has unit
height; the semiclassical parameter g enters only on the quantum side.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BarrierSpec",
    "ModelParams",
    "PhasePoint",
    "ScaledCharges",
    "total_energy",
    "asymptotic_charges",
]

_FAMILIES = ("gaussian", "none")


@dataclass(frozen=True)
class BarrierSpec:
    """Barrier potential from a closed analytic family.

    Only families that are entire functions are admitted, so that the
    complex-time solver may evaluate U at arbitrary complex argument.
    ``cutoff`` is the half-width beyond which U is numerically
    indistinguishable from zero on the real axis and the dynamics is
    treated as force-free.  The family "none" (U identically zero) exists
    for free-motion checks.
    """

    family: str = "gaussian"
    cutoff: float = 30.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown barrier family {self.family!r}")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")

    def value(self, x):
        """U(x), valid for real or complex scalar/array x."""
        if self.family == "none":
            return np.zeros_like(np.asarray(x))
        return np.exp(-np.asarray(x) ** 2 / 2.0)

    def d1(self, x):
        """U'(x)."""
        if self.family == "none":
            return np.zeros_like(np.asarray(x))
        x = np.asarray(x)
        return -x * np.exp(-(x**2) / 2.0)

    def d2(self, x):
        """U''(x)."""
        if self.family == "none":
            return np.zeros_like(np.asarray(x))
        x = np.asarray(x)
        return (x**2 - 1.0) * np.exp(-(x**2) / 2.0)


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters.

    omega      -- oscillator frequency of the relative coordinate.
    coupling_g -- semiclassical parameter g > 0.  Only the quantum layer
                  sees it; classical and semiclassical modules work in
                  rescaled variables where g has been absorbed.
    barrier    -- barrier shape, unit height for the Gaussian default.
    """

    omega: float = 0.5
    coupling_g: float = 0.2
    barrier: BarrierSpec = field(default_factory=BarrierSpec)

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.coupling_g <= 0:
            raise ValueError("coupling_g must be positive")


@dataclass
class PhasePoint:
    """Point in phase space; fields may be real or complex."""

    X: complex
    y: complex
    pX: complex
    pY: complex


@dataclass(frozen=True)
class ScaledCharges:
    """Rescaled total energy and occupation of an asymptotic state.

    epsilon_osc = omega * nu is the oscillator part; the center-of-mass
    kinetic part epsilon - epsilon_osc must be nonnegative for a
    physical asymptotic state.
    """

    epsilon: float
    nu: float
    epsilon_osc: float

    def __post_init__(self):
        if self.nu < -1e-12:
            raise ValueError("nu must be nonnegative")

    @staticmethod
    def from_parts(eps_osc: float, kinetic: float, omega: float) -> "ScaledCharges":
        return ScaledCharges(
            epsilon=eps_osc + kinetic, nu=eps_osc / omega, epsilon_osc=eps_osc
        )


def total_energy(p: PhasePoint, params: ModelParams):
    """Conserved energy 0.5 pX^2 + 0.5 pY^2 + 0.5 w^2 y^2 + U(X+y).

    For a real PhasePoint this is the rescaled total energy epsilon; the
    same expression evaluated on complex data gives the (complex)
    conserved quantity of the analytically continued dynamics.
    """
    w = params.omega
    return (
        0.5 * p.pX**2
        + 0.5 * p.pY**2
        + 0.5 * w**2 * p.y**2
        + params.barrier.value(p.X + p.y)
    )


def asymptotic_charges(
    X,
    y,
    pX,
    pY,
    params: ModelParams,
    rtol: float = 1e-6,
    atol: float = 1e-9,
) -> ScaledCharges:
    """Decompose a force-free trajectory tail into (epsilon, nu).

    The samples must all lie beyond the barrier cutoff.  The oscillator
    energy 0.5 pY^2 + 0.5 w^2 y^2 is constant in the free region; if it
    drifts over the tail by more than the tolerance the tail is not
    asymptotic and a ValueError is raised.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    pX = np.asarray(pX, dtype=float)
    pY = np.asarray(pY, dtype=float)
    if X.size < 2:
        raise ValueError("need at least two tail samples")
    if np.min(np.abs(X)) < params.barrier.cutoff:
        raise ValueError("tail samples must lie beyond the barrier cutoff")

    w = params.omega
    eps_osc = 0.5 * pY**2 + 0.5 * w**2 * y**2
    spread = eps_osc.max() - eps_osc.min()
    scale = max(eps_osc.mean(), atol)
    if spread > rtol * scale + atol:
        raise ValueError(
            f"oscillator energy varies by {spread:.3e} over the tail; "
            "not an asymptotic region"
        )
    eps_osc_mean = float(eps_osc.mean())
    kinetic = float(np.mean(0.5 * pX**2))
    return ScaledCharges.from_parts(eps_osc_mean, kinetic, w)
