"""Finite point-process samples and the ramp test functions applied to them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import LawValidationError


@dataclass(frozen=True)
class ExtremalProcessOrigin:
    """Points are centered positions V - m_n above a cutoff."""

    m_n: float
    cutoff: float
    population: int


@dataclass(frozen=True)
class DecorationOrigin:
    """Points are positions relative to the maximum of a conditioned run."""

    n: int
    threshold: float
    depth_window: float
    overshoot: float


@dataclass(frozen=True)
class PointSample:
    """One realisation of a finite point process, points non-increasing."""

    points: np.ndarray
    origin: object
    weight: float = 1.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size and np.any(np.diff(pts) > 0):
            raise ValueError("PointSample points must be non-increasing")
        object.__setattr__(self, "points", pts)
        if isinstance(self.origin, DecorationOrigin) and pts.size:
            if pts[0] != 0.0 or np.any(pts > 0.0):
                raise ValueError("decoration samples are anchored at 0 with points <= 0")


@dataclass(frozen=True)
class RampFunction:
    """Continuous non-decreasing ramp: 0 below a, linear to c on [a, b], c above.

    A member of the non-decreasing test class whose support is left-bounded
    at a (so only points >= a matter for Laplace functionals).
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not self.a < self.b:
            raise LawValidationError(f"ramp needs a < b, got a={self.a}, b={self.b}")
        if self.c <= 0:
            raise LawValidationError(f"ramp height must be positive, got {self.c}")

    @property
    def support_left_bound(self) -> float:
        return self.a

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0) * self.c
