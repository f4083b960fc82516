"""Metastable sets as level sets ``{phi < 0}`` and boundary-side classification."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GeometryError, UsageError
from .fields import PhasePoint

log = logging.getLogger(__name__)

TOL_SURFACE = 1e-10
TOL_TANGENT = 1e-10


class BoundarySide(enum.Enum):
    GAMMA_PLUS = "gamma_plus"     # p.n > 0, leaving the set
    GAMMA_MINUS = "gamma_minus"   # p.n < 0, entering the set
    GAMMA_ZERO = "gamma_zero"

    @property
    def code(self) -> int:
        return {"gamma_plus": 1, "gamma_minus": -1, "gamma_zero": 0}[self.value]

    @classmethod
    def from_code(cls, code: int) -> "BoundarySide":
        return {1: cls.GAMMA_PLUS, -1: cls.GAMMA_MINUS, 0: cls.GAMMA_ZERO}[int(code)]


class Placement(enum.Enum):
    INSIDE_A = "inside_A"
    INSIDE_B = "inside_B"
    OUTSIDE = "outside"
    NEAR_BOUNDARY = "near_boundary"


class LevelSetRegion:
    """Open set ``{q : phi(q) < 0}`` with boundary ``{phi = 0}``.

    Balls are built with :meth:`ball` and use ``phi(q) = |q - c|^2 - r^2``;
    only balls run on the compiled integrator and the direct sphere sampler.
    """

    def __init__(self, phi: Callable, grad_phi: Callable, label: str,
                 dimension: int, center=None, radius: float | None = None):
        if label not in ("A", "B"):
            raise UsageError(f"region label must be 'A' or 'B', got {label!r}")
        self.phi = phi
        self.grad_phi = grad_phi
        self.label = label
        self.dimension = int(dimension)
        self.center = None if center is None else np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = None if radius is None else float(radius)

    @classmethod
    def ball(cls, center, radius: float, label: str) -> "LevelSetRegion":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if not radius > 0:
            raise UsageError("ball radius must be > 0")
        r2 = float(radius) ** 2

        def phi(q):
            q = np.asarray(q, dtype=float)
            return np.sum((q - c) ** 2, axis=-1) - r2

        def grad_phi(q):
            return 2.0 * (np.asarray(q, dtype=float) - c)

        return cls(phi, grad_phi, label, c.size, center=c, radius=radius)

    @property
    def is_ball(self) -> bool:
        return self.radius is not None

    def __repr__(self):
        if self.is_ball:
            return f"LevelSetRegion.ball({self.center.tolist()}, {self.radius}, {self.label!r})"
        return f"LevelSetRegion(custom, {self.label!r})"

    def to_config(self) -> dict:
        if not self.is_ball:
            raise UsageError("only ball regions can be serialized")
        return {"shape": "ball", "center": self.center.tolist(), "radius": self.radius}

    def surface_area(self) -> float:
        """Surface measure of the sphere (number of points in 1D)."""
        if not self.is_ball:
            raise UsageError("surface area is only available for balls")
        from math import gamma, pi
        d = self.dimension
        return 2 * pi ** (d / 2) / gamma(d / 2) * self.radius ** (d - 1)

    def boundary_grid(self, n: int = 256) -> np.ndarray:
        """Deterministic points on the sphere (exact atoms in 1D)."""
        if not self.is_ball:
            raise UsageError("boundary grid is only available for balls")
        d = self.dimension
        if d == 1:
            return self.center + self.radius * np.array([[-1.0], [1.0]])
        if d == 2:
            th = 2 * np.pi * np.arange(n) / n
            return self.center + self.radius * np.column_stack([np.cos(th), np.sin(th)])
        # d >= 3: fixed-seed Gaussian directions
        u = np.random.default_rng(0).standard_normal((n, d))
        return self.center + self.radius * u / np.linalg.norm(u, axis=1, keepdims=True)


@dataclass(frozen=True)
class MetastablePair:
    """Two open sets A, B with disjoint closures."""

    region_a: LevelSetRegion
    region_b: LevelSetRegion
    separation: float = 0.0

    def __post_init__(self):
        if self.region_a.label != "A" or self.region_b.label != "B":
            raise UsageError("region_a must carry label 'A' and region_b label 'B'")
        if self.region_a.dimension != self.region_b.dimension:
            raise UsageError("regions A and B live in different dimensions")
        a, b = self.region_a, self.region_b
        if a.is_ball and b.is_ball:
            gap = float(np.linalg.norm(a.center - b.center) - a.radius - b.radius)
        else:
            gap = _grid_gap(a, b)
        if not gap > 0:
            raise UsageError(f"closures of A and B intersect (gap {gap:.3g})")
        object.__setattr__(self, "separation", gap)

    @property
    def dimension(self) -> int:
        return self.region_a.dimension

    @property
    def regions(self) -> tuple:
        return (self.region_a, self.region_b)

    @property
    def all_balls(self) -> bool:
        return self.region_a.is_ball and self.region_b.is_ball

    def region(self, label: str) -> LevelSetRegion:
        return self.region_a if label == "A" else self.region_b


def _grid_gap(a: LevelSetRegion, b: LevelSetRegion) -> float:
    pts = [getattr(r, "boundary_points", None) for r in (a, b)]
    if any(p is None for p in pts):
        log.warning("cannot check disjointness of custom regions; assuming it holds")
        return float("inf")
    pa, pb = pts[0](), pts[1]()
    if np.any(b.phi(pa) <= 0) or np.any(a.phi(pb) <= 0):
        return 0.0
    return float(np.min(np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=-1)))


def outward_normal(region: LevelSetRegion, q, tol_surface: float = TOL_SURFACE) -> np.ndarray:
    """Unit normal to ``{phi = 0}`` at ``q``, pointing out of the region."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.shape != (region.dimension,):
        raise UsageError(f"expected a point of dimension {region.dimension}")
    if abs(float(region.phi(q))) > tol_surface:
        raise UsageError(f"point is not on the boundary (|phi| = {abs(float(region.phi(q))):.3g})")
    g = np.asarray(region.grad_phi(q), dtype=float)
    norm = float(np.linalg.norm(g))
    if norm < 1e-12:
        raise GeometryError("degenerate boundary: |grad phi| vanishes")
    return g / norm


def classify_boundary(region: LevelSetRegion, x: PhasePoint,
                      tol_tangent: float = TOL_TANGENT,
                      tol_surface: float = TOL_SURFACE) -> BoundarySide:
    vn = float(x.p @ outward_normal(region, x.q, tol_surface))
    if vn > tol_tangent:
        return BoundarySide.GAMMA_PLUS
    if vn < -tol_tangent:
        return BoundarySide.GAMMA_MINUS
    return BoundarySide.GAMMA_ZERO


def locate(pair: MetastablePair, q, tol_surface: float = TOL_SURFACE):
    """Return ``(Placement, label)``; label is set only for ``NEAR_BOUNDARY``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    for region in pair.regions:
        val = float(region.phi(q))
        if abs(val) <= tol_surface:
            return Placement.NEAR_BOUNDARY, region.label
        if val < 0:
            return (Placement.INSIDE_A if region.label == "A" else Placement.INSIDE_B), None
    return Placement.OUTSIDE, None
