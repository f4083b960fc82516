"""Force fields, potentials and Boltzmann-Gibbs energies.

Built-in potentials are polynomials with closed-form gradients.  Each one is
also encoded as an integer kind plus a flat parameter vector, which is what
the compiled integrator kernel dispatches on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import UnsupportedOperationError, UsageError

KIND_DOUBLE_WELL_1D = 0
KIND_RADIAL_DOUBLE_WELL = 1
KIND_HARMONIC = 2
KIND_FREE = 3
KIND_CUSTOM = -1

_KIND_NAMES = {
    "double_well_1d": KIND_DOUBLE_WELL_1D,
    "radial_double_well_nd": KIND_RADIAL_DOUBLE_WELL,
    "harmonic": KIND_HARMONIC,
    "free": KIND_FREE,
}


@dataclass(frozen=True)
class ThermoParams:
    """Friction ``gamma`` and inverse temperature ``beta``."""

    gamma: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise UsageError(f"gamma must be > 0, got {self.gamma}")
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise UsageError(f"beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class PotentialSpec:
    """A built-in polynomial potential.

    Use the constructors rather than the raw fields:

    * ``double_well_1d(a, height)``: ``V(q) = height * (q**2 - a**2)**2``.
    * ``radial_double_well_nd(centers, stiffness)``: ``V(q) = stiffness * 16
      |q - c1|^2 |q - c2|^2 / L^4`` with ``L = |c1 - c2|``, so both centers
      are minima with ``V = 0`` and the midpoint sits at height ``stiffness``.
      In 1D with centers -1, 1 this is ``stiffness * (q**2 - 1)**2``.
    * ``harmonic(center, stiffness)``: ``V(q) = stiffness/2 |q - center|^2``.
    * ``free(dimension)``: ``V = 0`` (not confining, for tests only).
    """

    name: str
    dimension: int
    params: tuple = ()
    kwargs: Mapping = field(default_factory=dict, compare=False)

    @classmethod
    def double_well_1d(cls, a: float = 1.0, height: float = 1.0) -> "PotentialSpec":
        if height <= 0:
            raise UsageError("double_well_1d height must be > 0")
        return cls("double_well_1d", 1, (float(a), float(height)),
                   {"a": float(a), "height": float(height)})

    @classmethod
    def radial_double_well_nd(cls, centers, stiffness: float = 1.0) -> "PotentialSpec":
        c = np.asarray(centers, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.shape[0] != 2:
            raise UsageError("radial_double_well_nd needs exactly two centers")
        length = float(np.linalg.norm(c[0] - c[1]))
        if length == 0 or stiffness <= 0:
            raise UsageError("centers must differ and stiffness must be > 0")
        d = c.shape[1]
        return cls("radial_double_well_nd", d,
                   (float(stiffness), length, *c[0].tolist(), *c[1].tolist()),
                   {"centers": c.tolist(), "stiffness": float(stiffness)})

    @classmethod
    def harmonic(cls, center, stiffness: float = 1.0) -> "PotentialSpec":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if stiffness < 0:
            raise UsageError("harmonic stiffness must be >= 0")
        return cls("harmonic", c.size, (float(stiffness), *c.tolist()),
                   {"center": c.tolist(), "stiffness": float(stiffness)})

    @classmethod
    def free(cls, dimension: int = 1) -> "PotentialSpec":
        return cls("free", int(dimension), (), {"dimension": int(dimension)})

    @classmethod
    def from_config(cls, name: str, params: Mapping) -> "PotentialSpec":
        """Build from a config entry ``{name: ..., params: {...}}``."""
        builders = {
            "double_well_1d": cls.double_well_1d,
            "radial_double_well_nd": cls.radial_double_well_nd,
            "harmonic": cls.harmonic,
            "free": cls.free,
        }
        if name not in builders:
            raise UsageError(f"unknown potential {name!r}; expected one of {sorted(builders)}")
        try:
            return builders[name](**dict(params))
        except TypeError as exc:
            raise UsageError(f"bad parameters for potential {name!r}: {exc}") from None

    def to_config(self) -> dict:
        return {"name": self.name, "params": dict(self.kwargs)}

    @property
    def kind(self) -> int:
        return _KIND_NAMES[self.name]

    @property
    def packed(self) -> np.ndarray:
        return np.asarray(self.params, dtype=np.float64)

    @property
    def confining(self) -> bool:
        if self.name == "harmonic":
            return self.params[0] > 0
        return self.name != "free"

    def _centers(self):
        d = self.dimension
        return np.asarray(self.params[2:2 + d]), np.asarray(self.params[2 + d:2 + 2 * d])

    def energy(self, q) -> np.ndarray:
        """Potential energy; ``q`` has shape ``(..., d)``."""
        q = np.asarray(q, dtype=float)
        if self.name == "double_well_1d":
            a, h = self.params
            x = q[..., 0]
            return h * (x * x - a * a) ** 2
        if self.name == "radial_double_well_nd":
            k, length = self.params[:2]
            c1, c2 = self._centers()
            r1 = np.sum((q - c1) ** 2, axis=-1)
            r2 = np.sum((q - c2) ** 2, axis=-1)
            return k * 16.0 / length ** 4 * r1 * r2
        if self.name == "harmonic":
            k = self.params[0]
            c = np.asarray(self.params[1:])
            return 0.5 * k * np.sum((q - c) ** 2, axis=-1)
        return np.zeros(q.shape[:-1])

    def gradient(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.name == "double_well_1d":
            a, h = self.params
            return 4.0 * h * q * (q * q - a * a)
        if self.name == "radial_double_well_nd":
            k, length = self.params[:2]
            c1, c2 = self._centers()
            u1, u2 = q - c1, q - c2
            r1 = np.sum(u1 * u1, axis=-1)[..., None]
            r2 = np.sum(u2 * u2, axis=-1)[..., None]
            return k * 16.0 / length ** 4 * 2.0 * (u1 * r2 + u2 * r1)
        if self.name == "harmonic":
            k = self.params[0]
            return k * (q - np.asarray(self.params[1:]))
        return np.zeros_like(q)

    def min_on_sphere(self, center, radius: float) -> float:
        """A lower bound of ``V`` on the sphere ``|q - center| = radius``.

        Exact for the 1D double well and the harmonic potential, a product of
        exact distance bounds for the radial double well.
        """
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if self.name == "double_well_1d":
            return float(np.min(self.energy(np.array([[c[0] - radius], [c[0] + radius]]))))
        if self.name == "radial_double_well_nd":
            k, length = self.params[:2]
            c1, c2 = self._centers()
            d1 = abs(np.linalg.norm(c1 - c) - radius)
            d2 = abs(np.linalg.norm(c2 - c) - radius)
            return float(k * 16.0 / length ** 4 * d1 * d1 * d2 * d2)
        if self.name == "harmonic":
            k = self.params[0]
            dist = abs(np.linalg.norm(np.asarray(self.params[1:]) - c) - radius)
            return 0.5 * k * dist * dist
        return 0.0


class ForceField:
    """Force ``F`` acting on positions in ``R^d``.

    Conservative fields wrap a :class:`PotentialSpec` and satisfy
    ``F = -grad V``.  Custom fields wrap an arbitrary callable; they can be
    simulated but are flagged ``validated = False`` and every operation that
    needs the Gibbs density refuses them.
    """

    def __init__(self, dimension: int, potential: PotentialSpec | None = None,
                 func: Callable | None = None):
        if dimension < 1:
            raise UsageError("dimension must be a positive integer")
        self.dimension = int(dimension)
        self.potential = potential
        self._func = func

    @classmethod
    def conservative(cls, potential: PotentialSpec) -> "ForceField":
        return cls(potential.dimension, potential=potential)

    @classmethod
    def custom(cls, func: Callable, dimension: int) -> "ForceField":
        return cls(dimension, func=func)

    @property
    def is_conservative(self) -> bool:
        return self.potential is not None

    @property
    def validated(self) -> bool:
        return self.is_conservative

    @property
    def kind(self) -> int:
        return self.potential.kind if self.is_conservative else KIND_CUSTOM

    def __repr__(self):
        if self.is_conservative:
            return f"ForceField({self.potential.name}, d={self.dimension})"
        return f"ForceField(custom, d={self.dimension}, unvalidated)"

    def _check(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.ndim == 0:
            q = q.reshape(1)
        if q.shape[-1] != self.dimension:
            raise UsageError(f"expected points of dimension {self.dimension}, got shape {q.shape}")
        return q

    def force(self, q) -> np.ndarray:
        q = self._check(q)
        if self.is_conservative:
            return -self.potential.gradient(q)
        return np.asarray(self._func(q), dtype=float)

    def potential_energy(self, q):
        q = self._check(q)
        if not self.is_conservative:
            raise UnsupportedOperationError("potential energy is undefined for a custom force")
        return self.potential.energy(q)


@dataclass(frozen=True)
class PhasePoint:
    """Position-velocity pair ``(q, p)``."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float)).copy()
        p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
        if q.shape != p.shape or q.ndim != 1:
            raise UsageError(f"q and p must be vectors of equal length, got {q.shape} and {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise UsageError("phase point has non-finite components")
        q.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def dimension(self) -> int:
        return self.q.size

    def reversed(self) -> "PhasePoint":
        """Momentum reversal ``R(q, p) = (q, -p)``."""
        return PhasePoint(self.q, -self.p)


def force(field: ForceField, q) -> np.ndarray:
    return field.force(q)


def hamiltonian(field: ForceField, x: PhasePoint) -> float:
    """``H(q, p) = V(q) + |p|^2 / 2``."""
    if not field.is_conservative:
        raise UnsupportedOperationError("the Hamiltonian needs a conservative field")
    if x.dimension != field.dimension:
        raise UsageError("phase point dimension does not match the field")
    return float(field.potential_energy(x.q)) + 0.5 * float(x.p @ x.p)


def gibbs_log_density(field: ForceField, x: PhasePoint, beta: float) -> float:
    """Unnormalized log Boltzmann-Gibbs density ``-beta H(q, p)``."""
    return -beta * hamiltonian(field, x)
