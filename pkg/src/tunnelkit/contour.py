"""Complex-time contour geometry for the semiclassical boundary value problem.

The contour runs in three straight segments: a horizontal stretch at
Im t = T/2 coming from large negative real time (where the incoming
asymptotics are imposed), a vertical descent to the real axis at
Re t = t_c, and a horizontal outgoing stretch on the real axis.  Times
on the descent decrease in imaginary part, so its complex step is -i
times the real grid spacing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ContourSpec", "ContourGrid", "discretize_contour"]


@dataclass(frozen=True)
class ContourSpec:
    """Geometry and resolution of the three-segment contour.

    T is twice the height of the incoming segment; t_left / t_right are
    the real-part extents; t_c locates the descent.  Node counts are per
    segment, endpoints shared between neighbours.
    """

    T: float
    t_left: float
    t_right: float
    t_c: float = 0.0
    n_b: int = 2000
    n_c: int = 200
    n_d: int = 2000

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if not (self.t_left < self.t_c < self.t_right):
            raise ValueError("need t_left < t_c < t_right")
        for n in (self.n_b, self.n_c, self.n_d):
            if n < 6:
                raise ValueError("each segment needs at least six nodes")

    def resolves_oscillator(self, omega: float, nodes_per_period: int = 40) -> bool:
        period = 2.0 * np.pi / omega
        h = max(self.h_b, self.h_c, self.h_d)
        return period / h >= nodes_per_period

    @property
    def h_b(self) -> float:
        return (self.t_c - self.t_left) / (self.n_b - 1)

    @property
    def h_c(self) -> float:
        return (self.T / 2.0) / (self.n_c - 1) if self.T > 0 else 0.0

    @property
    def h_d(self) -> float:
        return (self.t_right - self.t_c) / (self.n_d - 1)


@dataclass(frozen=True)
class ContourGrid:
    """Discretized contour: node times plus segment bookkeeping.

    nodes are ordered along the contour; segment s covers node indices
    [start[s], start[s+1]] inclusive with corner nodes shared.  step[s]
    is the real arclength spacing, direction[s] the unit complex factor
    dt/ds (1 on horizontals, -i on the descent).
    """

    spec: ContourSpec
    t: np.ndarray
    start: tuple
    step: tuple
    direction: tuple

    @property
    def n_nodes(self) -> int:
        return self.t.size

    @property
    def corner_bc(self) -> int:
        return self.start[1]

    @property
    def corner_cd(self) -> int:
        return self.start[2]

    def segment_slice(self, s: int) -> slice:
        last = self.start[s + 1] if s + 1 < len(self.start) else self.n_nodes - 1
        return slice(self.start[s], last + 1)

    def total_length(self) -> float:
        spans = [
            self.spec.t_c - self.spec.t_left,
            self.spec.T / 2.0,
            self.spec.t_right - self.spec.t_c,
        ]
        return float(sum(spans))


def discretize_contour(spec: ContourSpec) -> ContourGrid:
    """Node times along the three segments, corner nodes shared exactly."""
    i_half = 0.5j * spec.T
    t_b = spec.t_left + spec.h_b * np.arange(spec.n_b) + i_half
    t_b[-1] = spec.t_c + i_half  # exact corner
    if spec.T > 0:
        s = spec.h_c * np.arange(1, spec.n_c)
        t_cseg = spec.t_c + 1j * (spec.T / 2.0 - s)
        t_cseg[-1] = spec.t_c + 0j
    else:
        t_cseg = np.empty(0, dtype=complex)
    t_d = spec.t_c + spec.h_d * np.arange(1, spec.n_d)
    t_d[-1] = spec.t_right
    t = np.concatenate([t_b, t_cseg, t_d])
    start = (0, spec.n_b - 1, spec.n_b + len(t_cseg) - 1)
    step = (spec.h_b, spec.h_c, spec.h_d)
    direction = (1.0 + 0j, -1j, 1.0 + 0j)
    return ContourGrid(spec=spec, t=t, start=start, step=step, direction=direction)
