"""Exact sampling of the entrance and exit laws on the boundary of A and B.

In the conservative case the stationary laws of the entry and exit chains
have densities proportional to ``|p . n(q)| exp(-beta H(q, p))`` on the
incoming and outgoing halves of the boundary.  The density factorizes: the
position follows ``exp(-beta V)`` times surface measure, and given the
position the normal speed is Rayleigh with scale ``beta**-0.5`` while the
tangential components are independent Gaussians.  Sampling is therefore done
in two steps, a surface draw and a velocity draw.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import GeometryError, UnsupportedOperationError, UsageError
from .fields import ForceField, PhasePoint
from .geometry import (TOL_SURFACE, BoundarySide, LevelSetRegion, MetastablePair,
                       outward_normal)
from .integrator import RngStream

MAX_NEWTON = 50


class SurfaceMethod(str, enum.Enum):
    DIRECT_SPHERE = "direct_sphere"
    METROPOLIS_PROJECTION = "metropolis_projection"


@dataclass(frozen=True)
class SurfaceSamplerParams:
    """Settings of the position step.

    ``direct_sphere`` draws iid points by rejection from the uniform law on a
    sphere and needs ball regions.  ``metropolis_projection`` runs a
    constrained random walk on any level set and returns correlated draws
    after ``n_burnin`` steps, keeping every ``thin``-th state.
    """

    method: SurfaceMethod = SurfaceMethod.DIRECT_SPHERE
    n_burnin: int = 1000
    proposal_scale: float = 0.3
    thin: int = 5

    def __post_init__(self):
        object.__setattr__(self, "method", SurfaceMethod(self.method))
        if self.n_burnin < 0:
            raise UsageError("n_burnin must be >= 0")
        if not self.proposal_scale > 0:
            raise UsageError("proposal_scale must be > 0")
        if self.thin < 1:
            raise UsageError("thin must be >= 1")


@dataclass(frozen=True)
class BoundaryMeasureSpec:
    """Entrance (``gamma_minus``) or exit (``gamma_plus``) law on a boundary.

    ``region`` is a single :class:`LevelSetRegion` or a
    :class:`MetastablePair`, in which case the boundary is that of ``A U B``.
    """

    region: object
    field: ForceField
    beta: float = 1.0
    side: BoundarySide = BoundarySide.GAMMA_MINUS

    def __post_init__(self):
        if not self.field.is_conservative:
            raise UnsupportedOperationError(
                "boundary laws have no explicit density for a non-conservative force")
        if not self.beta > 0:
            raise UsageError("beta must be > 0")
        side = BoundarySide(self.side)
        if side is BoundarySide.GAMMA_ZERO:
            raise UsageError("side must be gamma_plus or gamma_minus")
        object.__setattr__(self, "side", side)

    @property
    def regions(self) -> tuple:
        if isinstance(self.region, MetastablePair):
            return self.region.regions
        return (self.region,)

    def restrict(self, label: str | None) -> "BoundaryMeasureSpec":
        if label is None:
            return self
        for r in self.regions:
            if r.label == label:
                return BoundaryMeasureSpec(r, self.field, self.beta, self.side)
        raise UsageError(f"no region labelled {label!r}")

    def with_side(self, side) -> "BoundaryMeasureSpec":
        return BoundaryMeasureSpec(self.region, self.field, self.beta, side)


# ------------------------------------------------------------------ positions

def _potential(spec: BoundaryMeasureSpec, q) -> np.ndarray:
    return spec.field.potential.energy(np.asarray(q, dtype=float))


def _sphere_rejection(region: LevelSetRegion, spec: BoundaryMeasureSpec, n: int,
                      gen: np.random.Generator) -> np.ndarray:
    d, c, r = region.dimension, region.center, region.radius
    beta = spec.beta
    if d == 1:
        atoms = c + r * np.array([[-1.0], [1.0]])
        w = np.exp(-beta * (_potential(spec, atoms) - np.min(_potential(spec, atoms))))
        pick = gen.random(n) < w[1] / w.sum()
        return atoms[pick.astype(int)]
    v_floor = spec.field.potential.min_on_sphere(c, r)
    out = np.empty((0, d))
    tries = 0
    while out.shape[0] < n:
        m = max(64, 2 * (n - out.shape[0]))
        u = gen.standard_normal((m, d))
        pts = c + r * u / np.linalg.norm(u, axis=1, keepdims=True)
        acc = gen.random(m) < np.exp(-beta * (_potential(spec, pts) - v_floor))
        out = np.vstack([out, pts[acc]])
        tries += m
        if tries > 1000 * n + 10**6 and out.shape[0] < n:
            raise GeometryError("rejection sampler acceptance is too low; use metropolis_projection")
    return out[:n]


def _project(region: LevelSetRegion, x: np.ndarray, tol: float) -> np.ndarray:
    for _ in range(MAX_NEWTON):
        val = float(region.phi(x))
        if abs(val) <= tol:
            return x
        g = np.asarray(region.grad_phi(x), dtype=float)
        gg = float(g @ g)
        if gg < 1e-24:
            break
        x = x - val * g / gg
    raise GeometryError("Newton projection onto the boundary diverged")


def _metropolis_projection(region: LevelSetRegion, spec: BoundaryMeasureSpec, n: int,
                           params: SurfaceSamplerParams, gen: np.random.Generator,
                           start=None) -> np.ndarray:
    d = region.dimension
    if d == 1:
        # the boundary is a finite set of points; nothing to walk on
        return _sphere_rejection(region, spec, n, gen)
    if start is None:
        if region.is_ball:
            start = region.center + region.radius * np.eye(d)[0]
        else:
            raise UsageError("metropolis_projection on a custom level set needs a start point")
    q = _project(region, np.asarray(start, dtype=float), TOL_SURFACE * 1e-2)
    vq = float(_potential(spec, q))
    total = params.n_burnin + n * params.thin
    out = np.empty((n, d))
    k = 0
    for it in range(total):
        nrm = outward_normal(region, q)
        xi = gen.standard_normal(d) * params.proposal_scale
        step = xi - (xi @ nrm) * nrm
        try:
            cand = _project(region, q + step, TOL_SURFACE * 1e-2)
        except GeometryError:
            cand = None
        if cand is not None:
            vc = float(_potential(spec, cand))
            if math.log(gen.random() + 1e-300) < -spec.beta * (vc - vq):
                q, vq = cand, vc
        if it >= params.n_burnin and (it - params.n_burnin) % params.thin == params.thin - 1:
            out[k] = q
            k += 1
    return out


def sample_surface_positions(spec: BoundaryMeasureSpec, n: int,
                             params: SurfaceSamplerParams | None = None,
                             rng: RngStream | None = None, start=None) -> np.ndarray:
    """``n`` positions on one region's boundary with density prop. to ``exp(-beta V)``."""
    params = params or SurfaceSamplerParams()
    rng = rng or RngStream(0)
    if len(spec.regions) != 1:
        raise UsageError("restrict the measure to one region first")
    region = spec.regions[0]
    if params.method is SurfaceMethod.DIRECT_SPHERE:
        if not region.is_ball:
            raise UsageError("direct_sphere needs a ball region")
        return _sphere_rejection(region, spec, n, rng.generator)
    return _metropolis_projection(region, spec, n, params, rng.generator, start)


def sample_surface_position(spec: BoundaryMeasureSpec, params: SurfaceSamplerParams | None = None,
                            rng: RngStream | None = None) -> np.ndarray:
    return sample_surface_positions(spec, 1, params, rng)[0]


# ------------------------------------------------------------------ velocities

def _tangent_basis(n: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the plane orthogonal to ``n``, shape ``(d-1, d)``.

    Gram-Schmidt on the standard axes, skipping the one most aligned with ``n``.
    """
    d = n.size
    skip = int(np.argmax(np.abs(n)))
    basis = [n]
    for i in range(d):
        if i == skip:
            continue
        v = np.zeros(d)
        v[i] = 1.0
        for b in basis:
            v = v - (v @ b) * b
        basis.append(v / np.linalg.norm(v))
    return np.array(basis[1:]).reshape(d - 1, d)


def sample_velocity(n, beta: float, side, rng: RngStream | None = None,
                    gaussians=None) -> np.ndarray:
    """Velocity on the requested side of the boundary at unit normal ``n``.

    ``p = beta**-0.5 * (s sqrt(G0^2 + G1^2) n + sum_{i>=2} G_i e_i)`` with
    ``s = +1`` on ``gamma_plus`` and ``-1`` on ``gamma_minus``.  ``gaussians``
    injects ``(G0, ..., Gd)`` instead of drawing them.
    """
    n = np.atleast_1d(np.asarray(n, dtype=float))
    if abs(float(np.linalg.norm(n)) - 1.0) > 1e-10:
        raise UsageError("normal vector must have unit length")
    side = BoundarySide(side)
    if side is BoundarySide.GAMMA_ZERO:
        raise UsageError("side must be gamma_plus or gamma_minus")
    d = n.size
    if gaussians is None:
        gaussians = (rng or RngStream(0)).generator.standard_normal(d + 1)
    g = np.asarray(gaussians, dtype=float)
    if g.shape != (d + 1,):
        raise UsageError(f"expected {d + 1} Gaussian variables")
    sign = 1.0 if side is BoundarySide.GAMMA_PLUS else -1.0
    p = sign * math.sqrt(g[0] ** 2 + g[1] ** 2) * n
    if d > 1:
        p = p + g[2:] @ _tangent_basis(n)
    return p / math.sqrt(beta)


def _velocities(normals: np.ndarray, beta: float, sign: float, gen: np.random.Generator) -> np.ndarray:
    m, d = normals.shape
    g = gen.standard_normal((m, d + 1))
    p = sign * np.sqrt(g[:, 0] ** 2 + g[:, 1] ** 2)[:, None] * normals
    if d > 1:
        for i in range(m):
            p[i] += g[i, 2:] @ _tangent_basis(normals[i])
    return p / math.sqrt(beta)


# ----------------------------------------------------------- boundary measure

def surface_weight(region: LevelSetRegion, field: ForceField, beta: float,
                   n_quad: int = 256) -> float:
    """``int exp(-beta V) d sigma`` over a ball's boundary (a sum of two atoms in 1D)."""
    if not region.is_ball:
        raise UnsupportedOperationError("surface integrals need a ball region")
    d, c, r = region.dimension, region.center, region.radius
    pot = field.potential
    if d == 1:
        return float(np.sum(np.exp(-beta * pot.energy(c + r * np.array([[-1.0], [1.0]])))))
    if d == 2:
        x, w = np.polynomial.legendre.leggauss(n_quad)
        th = np.pi * (x + 1.0)
        pts = c + r * np.column_stack([np.cos(th), np.sin(th)])
        return float(np.pi * r * np.sum(w * np.exp(-beta * pot.energy(pts))))
    raise UnsupportedOperationError("surface quadrature is implemented for d <= 2")


def _region_probs(spec: BoundaryMeasureSpec) -> np.ndarray:
    regs = spec.regions
    if len(regs) == 1:
        return np.ones(1)
    w = np.array([surface_weight(r, spec.field, spec.beta) for r in regs])
    return w / w.sum()


@dataclass
class BoundarySamples:
    """Batch of boundary draws with their set labels and normal speeds."""

    q: np.ndarray
    p: np.ndarray
    labels: np.ndarray
    pn: np.ndarray

    def __len__(self):
        return self.q.shape[0]

    def point(self, i: int) -> PhasePoint:
        return PhasePoint(self.q[i], self.p[i])

    def reversed(self) -> "BoundarySamples":
        return BoundarySamples(self.q, -self.p, self.labels, -self.pn)

    def to_csv(self, path) -> None:
        d = self.q.shape[1]
        header = [f"q{i}" for i in range(d)] + [f"p{i}" for i in range(d)] + ["p_dot_n", "set"]
        rows = np.column_stack([self.q, self.p, self.pn])
        with open(path, "w") as fh:
            fh.write("# format_version=1\n")
            fh.write(",".join(header) + "\n")
            for row, lab in zip(rows, self.labels):
                fh.write(",".join(repr(float(v)) for v in row) + f",{'AB'[int(lab)]}\n")


def sample_pi_batch(spec: BoundaryMeasureSpec, n: int, label: str | None = None,
                    params: SurfaceSamplerParams | None = None,
                    rng: RngStream | None = None) -> BoundarySamples:
    """``n`` draws of the boundary law, optionally conditioned on one set."""
    params = params or SurfaceSamplerParams()
    rng = rng or RngStream(0)
    gen = rng.generator
    sub = spec.restrict(label)
    regs = sub.regions
    probs = _region_probs(sub)
    counts = gen.multinomial(n, probs) if len(regs) > 1 else np.array([n])
    qs, labs = [], []
    for reg, m in zip(regs, counts):
        one = BoundaryMeasureSpec(reg, sub.field, sub.beta, sub.side)
        qs.append(sample_surface_positions(one, int(m), params, rng))
        labs.append(np.full(int(m), 0 if reg.label == "A" else 1))
    q = np.vstack(qs)
    labels = np.concatenate(labs)
    if len(regs) > 1:
        perm = gen.permutation(n)
        q, labels = q[perm], labels[perm]
    normals = _normals(q, labels, sub)
    sign = 1.0 if sub.side is BoundarySide.GAMMA_PLUS else -1.0
    p = _velocities(normals, sub.beta, sign, gen)
    return BoundarySamples(q, p, labels, np.sum(p * normals, axis=1))


def _normals(q, labels, spec: BoundaryMeasureSpec) -> np.ndarray:
    by_label = {r.label: r for r in spec.regions}
    if all(r.is_ball for r in spec.regions):
        centers = np.array([by_label[lab].center if lab in by_label else np.zeros(q.shape[1])
                            for lab in "AB"])
        u = q - centers[labels]
        return u / np.linalg.norm(u, axis=1, keepdims=True)
    out = np.empty_like(q)
    for i in range(q.shape[0]):
        reg = by_label["AB"[int(labels[i])]]
        g = np.asarray(reg.grad_phi(q[i]), dtype=float)
        out[i] = g / np.linalg.norm(g)
    return out


def sample_pi(spec: BoundaryMeasureSpec, label: str | None = None,
              params: SurfaceSamplerParams | None = None,
              rng: RngStream | None = None) -> PhasePoint:
    """One draw of the boundary law (conditioned on ``label`` when given)."""
    return sample_pi_batch(spec, 1, label, params, rng).point(0)


def density_pi(spec: BoundaryMeasureSpec, x: PhasePoint) -> float:
    """Unnormalized density ``|p . n| exp(-beta H)`` on the measure's side, else 0."""
    hits = []
    for reg in spec.regions:
        if abs(float(reg.phi(x.q))) <= TOL_SURFACE:
            hits.append(reg)
    if not hits:
        raise UsageError("point is not on the boundary")
    nrm = outward_normal(hits[0], x.q)
    vn = float(x.p @ nrm)
    if spec.side is BoundarySide.GAMMA_PLUS and vn <= 0:
        return 0.0
    if spec.side is BoundarySide.GAMMA_MINUS and vn >= 0:
        return 0.0
    h = float(spec.field.potential.energy(x.q)) + 0.5 * float(x.p @ x.p)
    return abs(vn) * math.exp(-spec.beta * h)


# ------------------------------------------------------------- normalization

def _normal_factor(beta: float, side: BoundarySide) -> float:
    f = lambda x: abs(x) * math.exp(-0.5 * beta * x * x)
    if side is BoundarySide.GAMMA_PLUS:
        val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0, epsrel=1e-13)
    else:
        val, _ = integrate.quad(f, -np.inf, 0.0, epsabs=0, epsrel=1e-13)
    return val


def velocity_factor_closed_form(beta: float, d: int) -> float:
    """``int_{p.n > 0} (p.n) exp(-beta |p|^2 / 2) dp = (1/beta)(2 pi / beta)^((d-1)/2)``."""
    return (1.0 / beta) * (2.0 * math.pi / beta) ** ((d - 1) / 2)


def _norm_const(beta: float, d: int, normalization: str) -> float:
    if normalization == "none":
        return 1.0
    if normalization == "momentum":
        return (2.0 * math.pi / beta) ** (d / 2)
    raise UsageError("normalization must be 'none' or 'momentum'")


def z_constants(spec: BoundaryMeasureSpec, normalization: str = "none", n_quad: int = 256):
    """Normalizing constants ``(Z_plus, Z_minus)`` by quadrature.

    The two sides are integrated separately.  With ``normalization='none'``
    they normalize :func:`density_pi`; ``'momentum'`` divides by the Gaussian
    momentum normalization ``(2 pi / beta)^(d/2)``.
    """
    d = spec.field.dimension
    if d > 2 or not all(r.is_ball for r in spec.regions):
        raise UnsupportedOperationError("quadrature of Z is implemented for balls with d <= 2")
    s = sum(surface_weight(r, spec.field, spec.beta, n_quad) for r in spec.regions)
    tang = (2.0 * math.pi / spec.beta) ** ((d - 1) / 2)
    norm = _norm_const(spec.beta, d, normalization)
    zp = s * _normal_factor(spec.beta, BoundarySide.GAMMA_PLUS) * tang / norm
    zm = s * _normal_factor(spec.beta, BoundarySide.GAMMA_MINUS) * tang / norm
    return zp, zm


def z_monte_carlo(spec: BoundaryMeasureSpec, n: int, rng: RngStream,
                  normalization: str = "none"):
    """Plain Monte Carlo estimate of ``Z`` on the measure's side; returns ``(value, stderr)``.

    Positions are uniform on each sphere, velocities standard Gaussian with
    variance ``1/beta``; the integrand is reweighted accordingly.
    """
    d = spec.field.dimension
    gen = rng.generator
    beta = spec.beta
    sign = 1.0 if spec.side is BoundarySide.GAMMA_PLUS else -1.0
    total, var = 0.0, 0.0
    for reg in spec.regions:
        if not reg.is_ball:
            raise UnsupportedOperationError("Monte Carlo Z needs ball regions")
        u = gen.standard_normal((n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        q = reg.center + reg.radius * u
        p = gen.standard_normal((n, d)) / math.sqrt(beta)
        pn = np.sum(p * u, axis=1)
        vals = np.exp(-beta * spec.field.potential.energy(q)) * np.abs(pn) * (sign * pn > 0)
        scale = reg.surface_area() * (2.0 * math.pi / beta) ** (d / 2)
        total += scale * vals.mean()
        var += scale ** 2 * vals.var(ddof=1) / n
    norm = _norm_const(beta, d, normalization)
    return total / norm, math.sqrt(var) / norm
