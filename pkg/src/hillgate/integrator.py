"""Langevin integrators and boundary-crossing event detection.

Two engines share one algorithm.  The compiled engine in :mod:`._kernel`
handles built-in potentials with ball regions; the reference engine below
handles custom force fields, custom level sets and Python observables.  Both
read the Gaussian increments from the same :class:`RngStream` buffer, one
row per step, so a given ``(seed, stream_id)`` drives the same trajectory in
either engine.

Crossings are located on the position path actually traced by the scheme:
BAOAB drifts in two straight half steps (velocities ``p1`` then ``p2``),
Euler-Maruyama in one.  Each drift segment is bisected for every membership
change, so sides alternate by construction and a set entered and left within
one step is still seen at half-step resolution.
"""
from __future__ import annotations

import collections
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernel as K
from .errors import GeometryError, NumericalBlowupError, SimulationTimeout, UsageError
from .fields import ForceField, PhasePoint, ThermoParams
from .geometry import (TOL_SURFACE, TOL_TANGENT, BoundarySide, LevelSetRegion,
                       MetastablePair, classify_boundary)

log = logging.getLogger(__name__)

NOISE_CHUNK = 8192
_LABELS = ("A", "B")


class Scheme(str, enum.Enum):
    BAOAB = "baoab"
    EULER_MARUYAMA = "euler_maruyama"

    @property
    def code(self) -> int:
        return K.SCHEME_BAOAB if self is Scheme.BAOAB else K.SCHEME_EULER


@dataclass(frozen=True)
class SimParams:
    """Discretization settings.

    ``noise_scale`` multiplies the Gaussian increments; ``0`` gives the
    deterministic test mode.  ``max_steps`` bounds each ``run_*`` call.
    """

    thermo: ThermoParams = field(default_factory=ThermoParams)
    dt: float = 1e-3
    scheme: Scheme = Scheme.BAOAB
    max_steps: int = 100_000_000
    crossing_tol: float = 1e-12
    tol_tangent: float = TOL_TANGENT
    noise_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise UsageError(f"dt must be > 0, got {self.dt}")
        if not self.crossing_tol > 0:
            raise UsageError("crossing_tol must be > 0")
        if self.max_steps < 1:
            raise UsageError("max_steps must be >= 1")
        if self.noise_scale < 0:
            raise UsageError("noise_scale must be >= 0")

    def with_dt(self, dt: float) -> "SimParams":
        return SimParams(self.thermo, dt, self.scheme, self.max_steps,
                         self.crossing_tol, self.tol_tangent, self.noise_scale)


class RngStream:
    """Counter-free random stream identified by ``(seed, stream_id)``.

    ``stream_id`` may be an integer or a tuple of integers; the pair is turned
    into a ``SeedSequence`` spawn key so distinct ids give independent PCG64
    streams.  Gaussian increments are drawn in fixed chunks and consumed one
    row per integration step.
    """

    def __init__(self, seed: int, stream_id=0):
        key = tuple(int(k) for k in stream_id) if isinstance(stream_id, (tuple, list)) \
            else (int(stream_id),)
        if int(seed) < 0 or any(k < 0 for k in key):
            raise UsageError("seed and stream ids must be non-negative integers")
        self.seed = int(seed)
        self.stream_id = key if len(key) > 1 else key[0]
        ss = np.random.SeedSequence(self.seed, spawn_key=key)
        self.generator = np.random.Generator(np.random.PCG64(ss))
        self._key = key
        self._buf = np.empty((0, 1))
        self.pos = 0

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream, e.g. one per replica."""
        return RngStream(self.seed, self._key + (int(index),))

    def noise(self, dim: int) -> np.ndarray:
        """Current noise buffer, refilled when exhausted."""
        if self.pos >= self._buf.shape[0] or self._buf.shape[1] != dim:
            self._buf = self.generator.standard_normal((NOISE_CHUNK, dim))
            self.pos = 0
        return self._buf

    def next_noise(self, dim: int) -> np.ndarray:
        buf = self.noise(dim)
        row = buf[self.pos]
        self.pos += 1
        return row


@dataclass(frozen=True)
class CrossingEvent:
    """A located crossing of the boundary of A or B."""

    x: PhasePoint
    time: float
    side: BoundarySide
    set_label: str

    def __post_init__(self):
        if self.side is BoundarySide.GAMMA_ZERO:
            raise UsageError("tangential configurations are not events")
        if self.set_label not in _LABELS:
            raise UsageError(f"set_label must be 'A' or 'B', got {self.set_label!r}")


@dataclass
class CrossingCounters:
    """Diagnostics accumulated while integrating."""

    gamma_zero: int = 0
    steps: int = 0


# ---------------------------------------------------------------- observables

class Observable:
    """Scalar function ``G(q, p)`` integrated between crossing events.

    The built-in kinds run inside the compiled kernel; :meth:`custom` wraps any
    callable and forces the reference engine.
    """

    def __init__(self, kind: int, params=(), func: Callable | None = None, name: str = "custom"):
        self.kind = kind
        self.params = np.asarray(params, dtype=float).reshape(-1) if len(params) else np.zeros(1)
        self.func = func
        self.name = name

    @classmethod
    def constant(cls, c: float = 1.0) -> "Observable":
        return cls(K.OBS_CONSTANT, (float(c),), name=f"constant({c})")

    @classmethod
    def speed_above(cls, threshold: float = 1.0) -> "Observable":
        """Indicator ``1{|p| > threshold}``."""
        return cls(K.OBS_SPEED_ABOVE, (float(threshold),), name=f"speed_above({threshold})")

    @classmethod
    def kinetic(cls) -> "Observable":
        return cls(K.OBS_KINETIC, (0.0,), name="kinetic")

    @classmethod
    def custom(cls, func: Callable) -> "Observable":
        return cls(-1, (), func=func)

    @property
    def compiled(self) -> bool:
        return self.func is None

    def __call__(self, q, p) -> float:
        if self.func is not None:
            return float(self.func(np.asarray(q), np.asarray(p)))
        return float(K.observable(self.kind, self.params, np.asarray(q, float), np.asarray(p, float)))

    def to_config(self) -> dict:
        if not self.compiled:
            raise UsageError("custom observables cannot be serialized")
        names = {K.OBS_CONSTANT: "constant", K.OBS_SPEED_ABOVE: "speed_above", K.OBS_KINETIC: "kinetic"}
        return {"name": names[self.kind], "value": float(self.params[0])}

    @classmethod
    def from_config(cls, cfg) -> "Observable":
        if cfg is None:
            return None
        name = cfg.get("name")
        if name == "constant":
            return cls.constant(cfg.get("value", 1.0))
        if name == "speed_above":
            return cls.speed_above(cfg.get("value", 1.0))
        if name == "kinetic":
            return cls.kinetic()
        raise UsageError(f"unknown observable {name!r}")


_NO_OBS = Observable(K.OBS_NONE, (0.0,), name="none")


# ----------------------------------------------------------- single operations

def step(x: PhasePoint, field: ForceField, params: SimParams, rng: RngStream) -> PhasePoint:
    """Advance one step of the chosen scheme."""
    if x.dimension != field.dimension:
        raise UsageError("phase point dimension does not match the field")
    dt = params.dt
    gamma, beta = params.thermo.gamma, params.thermo.beta
    xi = rng.next_noise(x.dimension)
    q, p = x.q.copy(), x.p.copy()
    if params.scheme is Scheme.BAOAB:
        c1 = math.exp(-gamma * dt)
        c2 = math.sqrt((1.0 - c1 * c1) / beta) * params.noise_scale
        p = p + 0.5 * dt * field.force(q)
        q = q + 0.5 * dt * p
        p = c1 * p + c2 * xi
        q = q + 0.5 * dt * p
        p = p + 0.5 * dt * field.force(q)
    else:
        sig = math.sqrt(2.0 * gamma / beta * dt) * params.noise_scale
        f = field.force(q)
        q, p = q + dt * p, p + dt * (f - gamma * p) + sig * xi
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise NumericalBlowupError("non-finite state after one step", state=(x.q, x.p, q, p))
    return PhasePoint(q, p)


def detect_crossing(x_before: PhasePoint, x_after: PhasePoint, t_before: float,
                    region: LevelSetRegion, params: SimParams,
                    counters: CrossingCounters | None = None) -> CrossingEvent | None:
    """Locate a crossing of ``region``'s boundary on the chord between two states.

    The position is bisected along ``(1 - s) q_before + s q_after`` and the
    velocity linearly interpolated.  Returns ``None`` when the sign of ``phi``
    does not change or when the located point is tangential (counted in
    ``counters.gamma_zero``).
    """
    phi0 = float(region.phi(x_before.q))
    phi1 = float(region.phi(x_after.q))
    if (phi0 < 0) == (phi1 < 0):
        return None
    inside = phi0 < 0
    lo, hi = 0.0, 1.0
    dq = x_after.q - x_before.q
    for _ in range(200):
        s = 0.5 * (lo + hi)
        val = float(region.phi(x_before.q + s * dq))
        if abs(val) <= params.crossing_tol:
            break
        if (val < 0) == inside:
            lo = s
        else:
            hi = s
    else:
        raise GeometryError("crossing bisection did not converge in 200 iterations")
    q = x_before.q + s * dq
    p = (1.0 - s) * x_before.p + s * x_after.p
    pt = PhasePoint(q, p)
    side = classify_boundary(region, pt, params.tol_tangent, tol_surface=max(params.crossing_tol, TOL_SURFACE))
    if side is BoundarySide.GAMMA_ZERO:
        if counters is not None:
            counters.gamma_zero += 1
        return None
    return CrossingEvent(pt, t_before + s * params.dt, side, region.label)


# --------------------------------------------------------------------- walker

class _EventBuffer:
    def __init__(self, capacity: int, dim: int):
        self.time = np.empty(capacity)
        self.side = np.empty(capacity, dtype=np.int64)
        self.label = np.empty(capacity, dtype=np.int64)
        self.q = np.empty((capacity, dim))
        self.p = np.empty((capacity, dim))
        self.g = np.empty(capacity)


@dataclass
class EventBatch:
    """Raw event arrays: time, side code (-1 entry, +1 exit), label code
    (0 = A, 1 = B), q, p and the observable integral since the previous event."""

    time: np.ndarray
    side: np.ndarray
    label: np.ndarray
    q: np.ndarray
    p: np.ndarray
    g: np.ndarray

    def __len__(self):
        return self.time.size

    @classmethod
    def empty(cls, dim: int) -> "EventBatch":
        return cls(np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64),
                   np.empty((0, dim)), np.empty((0, dim)), np.empty(0))

    @classmethod
    def concat(cls, parts: Sequence["EventBatch"], dim: int) -> "EventBatch":
        if not parts:
            return cls.empty(dim)
        return cls(*(np.concatenate([getattr(b, k) for b in parts])
                     for k in ("time", "side", "label", "q", "p", "g")))

    def take(self, sl) -> "EventBatch":
        return EventBatch(self.time[sl], self.side[sl], self.label[sl],
                          self.q[sl], self.p[sl], self.g[sl])

    def event(self, i: int) -> CrossingEvent:
        return CrossingEvent(PhasePoint(self.q[i], self.p[i]), float(self.time[i]),
                             BoundarySide.from_code(int(self.side[i])), _LABELS[int(self.label[i])])


@dataclass
class Path:
    """Step-resolution trajectory record (end-of-step states)."""

    q: np.ndarray
    p: np.ndarray
    t: np.ndarray
    g: np.ndarray


class Walker:
    """A single Langevin trajectory with persistent state and event memory.

    Used by every ``run_*`` operation.  Events produced after the stopping
    event within the same step are kept pending and delivered by the next
    call, so consecutive calls see the complete, alternating event stream.
    """

    def __init__(self, x0: PhasePoint, field: ForceField, pair: MetastablePair,
                 params: SimParams, rng: RngStream, observable: Observable | None = None,
                 t0: float = 0.0, engine: str = "auto"):
        if x0.dimension != field.dimension or pair.dimension != field.dimension:
            raise UsageError("dimension mismatch between state, field and regions")
        self.field = field
        self.pair = pair
        self.params = params
        self.rng = rng
        self.obs = observable if observable is not None else _NO_OBS
        self.dim = field.dimension
        self.q = x0.q.astype(float).copy()
        self.p = x0.p.astype(float).copy()
        self.fstate = np.array([float(t0), 0.0, 0.0])
        self.istate = np.zeros(5, dtype=np.int64)
        self.flags = np.array([self._initial_flag(r, x0) for r in pair.regions], dtype=np.int64)
        self._pending = collections.deque()
        compiled_ok = field.is_conservative and pair.all_balls and self.obs.compiled
        if engine == "auto":
            engine = "compiled" if compiled_ok else "reference"
        if engine == "compiled" and not compiled_ok:
            raise UsageError("the compiled engine needs a built-in potential, ball regions "
                             "and a built-in observable")
        self.engine = engine
        if engine == "compiled":
            self._pot_kind = field.potential.kind
            self._pot_params = field.potential.packed if field.potential.params else np.zeros(1)
            self._centers = np.vstack([r.center for r in pair.regions])
            self._radii = np.array([r.radius for r in pair.regions])

    @staticmethod
    def _initial_flag(region: LevelSetRegion, x: PhasePoint) -> int:
        val = float(region.phi(x.q))
        if abs(val) <= TOL_SURFACE:
            g = np.asarray(region.grad_phi(x.q), dtype=float)
            return int(float(x.p @ g) < 0.0)
        return int(val < 0.0)

    # -- state
    @property
    def time(self) -> float:
        return float(self.fstate[K.F_TIME])

    @property
    def steps(self) -> int:
        return int(self.istate[K.I_STEPS])

    @property
    def gamma_zero(self) -> int:
        return int(self.istate[K.I_DISCARDED])

    @property
    def state(self) -> PhasePoint:
        return PhasePoint(self.q, self.p)

    @property
    def g_total(self) -> float:
        return float(self.fstate[K.F_GTOTAL])

    def flush_observable(self) -> float:
        """Observable integral since the last event; resets the accumulator."""
        val = float(self.fstate[K.F_GACC])
        self.fstate[K.F_GACC] = 0.0
        return val

    def clone(self, rng: RngStream) -> "Walker":
        new = object.__new__(Walker)
        new.__dict__.update(self.__dict__)
        new.q, new.p = self.q.copy(), self.p.copy()
        new.fstate, new.istate, new.flags = self.fstate.copy(), self.istate.copy(), self.flags.copy()
        new._pending = collections.deque(self._pending)
        new.rng = rng
        return new

    # -- integration
    def run(self, stop_side: int | None, max_events: int | None = None,
            record_path: bool = False, max_steps: int | None = None):
        """Integrate until an event with side code ``stop_side`` (``0`` any,
        ``None`` never) or until ``max_events`` events have been produced.

        Returns ``(EventBatch, Path or None)``.  Raises
        :class:`SimulationTimeout` when ``max_steps`` steps pass first.
        """
        stop_code = K.STOP_NEVER if stop_side is None else int(stop_side)
        if max_events is None:
            if stop_side is None:
                raise UsageError("give a stopping side or an event budget")
            max_events = 1 << 62
        parts = []
        n_got = 0
        while self._pending:
            ev = self._pending.popleft()
            parts.append(ev)
            n_got += 1
            if (stop_code != K.STOP_NEVER and (stop_code == 0 or int(ev.side[0]) == stop_code)) \
                    or n_got >= max_events:
                path = Path(np.empty((0, self.dim)), np.empty((0, self.dim)), np.empty(0), np.empty(0)) \
                    if record_path else None
                return EventBatch.concat(parts, self.dim), path
        budget = self.params.max_steps if max_steps is None else int(max_steps)
        step_limit = self.istate[K.I_STEPS] + budget
        want = max_events - n_got
        cap = min(want, 65536) + 4
        buf = _EventBuffer(cap, self.dim)
        paths = []
        path_cap = 4096
        while True:
            self.istate[K.I_EVENTS] = 0
            noise = self.rng.noise(self.dim)
            self.istate[K.I_NOISE] = self.rng.pos
            if record_path:
                pq = np.empty((path_cap, self.dim))
                pp = np.empty((path_cap, self.dim))
                pt = np.empty(path_cap)
                pg = np.empty(path_cap)
                self.istate[K.I_PATH] = 0
            else:
                pq = pp = np.empty((1, self.dim))
                pt = pg = np.empty(1)
            status = self._advance(noise, stop_code, min(want, cap - 4), step_limit, buf,
                                   record_path, pq, pp, pt, pg)
            self.rng.pos = int(self.istate[K.I_NOISE])
            n = int(self.istate[K.I_EVENTS])
            if n:
                parts.append(EventBatch(buf.time[:n].copy(), buf.side[:n].copy(), buf.label[:n].copy(),
                                        buf.q[:n].copy(), buf.p[:n].copy(), buf.g[:n].copy()))
                want -= n
            if record_path:
                k = int(self.istate[K.I_PATH])
                paths.append((pq[:k].copy(), pp[:k].copy(), pt[:k].copy(), pg[:k].copy()))
            if status == K.STATUS_DONE:
                if stop_code != K.STOP_NEVER and n:
                    # stop at the first matching event, keep later ones pending
                    batch = EventBatch.concat(parts, self.dim)
                    sides = batch.side
                    hits = np.nonzero(sides == stop_code)[0] if stop_code != 0 else np.arange(len(batch))
                    if hits.size:
                        cut = int(hits[0]) + 1
                        for i in range(cut, len(batch)):
                            self._pending.append(batch.take(slice(i, i + 1)))
                        return batch.take(slice(0, cut)), self._join_paths(paths, record_path)
                    parts = [batch]
                if want <= 0:
                    batch = EventBatch.concat(parts, self.dim)
                    total = len(batch)
                    keep = total - max(0, -want)
                    for i in range(keep, total):
                        self._pending.append(batch.take(slice(i, i + 1)))
                    return batch.take(slice(0, keep)), self._join_paths(paths, record_path)
                continue
            if status in (K.STATUS_NOISE, K.STATUS_PATH_FULL):
                if status == K.STATUS_PATH_FULL:
                    path_cap *= 2
                continue
            if status == K.STATUS_MAX_STEPS:
                raise SimulationTimeout(
                    f"no stopping event within {budget} steps (t = {self.time:.4g})",
                    elapsed=self.time, steps=budget)
            if status == K.STATUS_BLOWUP:
                raise NumericalBlowupError("non-finite state during integration",
                                           state=(self.q.copy(), self.p.copy(), self.time))
            if status == K.STATUS_BISECTION:
                raise GeometryError("crossing bisection did not converge in 200 iterations")
            raise RuntimeError(f"unexpected integrator status {status}")

    @staticmethod
    def _join_paths(paths, record):
        if not record:
            return None
        return Path(*(np.concatenate([p[i] for p in paths]) for i in range(4)))

    def _advance(self, noise, stop_code, max_events, step_limit, buf, record, pq, pp, pt, pg):
        if self.engine == "compiled":
            pr = self.params
            return K.advance(self.q, self.p, self.fstate, self.istate, self.flags,
                             self._pot_kind, self._pot_params, self._centers, self._radii,
                             pr.thermo.gamma, pr.thermo.beta, pr.dt, pr.scheme.code,
                             pr.noise_scale, noise, self.obs.kind, self.obs.params,
                             stop_code, max_events, step_limit, pr.crossing_tol, pr.tol_tangent,
                             buf.time, buf.side, buf.label, buf.q, buf.p, buf.g,
                             record, pq, pp, pt, pg)
        return _advance_reference(self, noise, stop_code, max_events, step_limit, buf,
                                  record, pq, pp, pt, pg)


# ------------------------------------------------------------ reference engine

def _advance_reference(w: Walker, noise, stop_code, max_events, step_limit, buf,
                       record, pq, pp, pt, pg):
    """Pure-Python mirror of :func:`._kernel.advance` for arbitrary fields,
    level sets and observables."""
    pr = w.params
    dt = pr.dt
    gamma, beta = pr.thermo.gamma, pr.thermo.beta
    c1 = math.exp(-gamma * dt)
    c2 = math.sqrt((1.0 - c1 * c1) / beta) * pr.noise_scale
    sig = math.sqrt(2.0 * gamma / beta * dt) * pr.noise_scale
    regions = w.pair.regions
    f = w.field.force(w.q)
    ist, fst = w.istate, w.fstate

    def segment(qs, qe, v, ts, te, g_val):
        roots = []
        for r, reg in enumerate(regions):
            inside = w.flags[r] == 1
            if (float(reg.phi(qe)) < 0.0) == inside:
                continue
            lo, hi = 0.0, 1.0
            for _ in range(200):
                s = 0.5 * (lo + hi)
                val = float(reg.phi(qs + s * (qe - qs)))
                if abs(val) <= pr.crossing_tol:
                    break
                if (val < 0.0) == inside:
                    lo = s
                else:
                    hi = s
            else:
                return K.STATUS_BISECTION, 0
            roots.append((s, r))
        side_out = 0
        for s, r in sorted(roots):
            reg = regions[r]
            t_ev = ts + s * (te - ts)
            qe_ = qs + s * (qe - qs)
            g = np.asarray(reg.grad_phi(qe_), dtype=float)
            gn = float(np.linalg.norm(g))
            if gn < 1e-12:
                raise GeometryError("degenerate boundary: |grad phi| vanishes at a crossing")
            vn = float(v @ g) / gn
            entering = w.flags[r] == 0
            w.flags[r] = 1 if entering else 0
            fst[K.F_GACC] += g_val * (t_ev - fst[K.F_TIME])
            fst[K.F_TIME] = t_ev
            if abs(vn) <= pr.tol_tangent or (entering and vn > 0) or (not entering and vn < 0):
                ist[K.I_DISCARDED] += 1
                continue
            k = ist[K.I_EVENTS]
            if k >= buf.time.shape[0]:
                continue
            buf.time[k] = t_ev
            buf.side[k] = -1 if entering else 1
            buf.label[k] = r
            buf.q[k] = qe_
            buf.p[k] = v
            buf.g[k] = fst[K.F_GACC]
            fst[K.F_GACC] = 0.0
            ist[K.I_EVENTS] = k + 1
            side_out = buf.side[k]
        return K.STATUS_DONE, side_out

    n_noise = noise.shape[0]
    while True:
        if ist[K.I_STEPS] >= step_limit:
            return K.STATUS_MAX_STEPS
        if ist[K.I_NOISE] >= n_noise:
            return K.STATUS_NOISE
        if record and ist[K.I_PATH] >= pq.shape[0]:
            return K.STATUS_PATH_FULL
        xi = noise[ist[K.I_NOISE]]
        ist[K.I_NOISE] += 1
        t0 = fst[K.F_TIME]
        g_val = w.obs(w.q, w.p) if w.obs.kind != K.OBS_NONE else 0.0
        q, p = w.q.copy(), w.p.copy()
        if pr.scheme is Scheme.BAOAB:
            p1 = p + 0.5 * dt * f
            qh = q + 0.5 * dt * p1
            p2 = c1 * p1 + c2 * xi
            qn = qh + 0.5 * dt * p2
            st, s1 = segment(q, qh, p1, t0, t0 + 0.5 * dt, g_val)
            if st != K.STATUS_DONE:
                return st
            st, s2 = segment(qh, qn, p2, t0 + 0.5 * dt, t0 + dt, g_val)
            if st != K.STATUS_DONE:
                return st
            f = w.field.force(qn)
            w.q[:] = qn
            w.p[:] = p2 + 0.5 * dt * f
        else:
            qn = q + dt * p
            st, s1 = segment(q, qn, p.copy(), t0, t0 + dt, g_val)
            if st != K.STATUS_DONE:
                return st
            s2 = 0
            w.p[:] = p + dt * (f - gamma * p) + sig * xi
            w.q[:] = qn
            f = w.field.force(w.q)
        t1 = t0 + dt
        fst[K.F_GACC] += g_val * (t1 - fst[K.F_TIME])
        fst[K.F_GTOTAL] += g_val * dt
        fst[K.F_TIME] = t1
        ist[K.I_STEPS] += 1
        if not (np.all(np.isfinite(w.q)) and np.all(np.isfinite(w.p))):
            return K.STATUS_BLOWUP
        if record:
            k = ist[K.I_PATH]
            pq[k] = w.q
            pp[k] = w.p
            pt[k] = t1
            pg[k] = fst[K.F_GTOTAL]
            ist[K.I_PATH] = k + 1
        if stop_code != K.STOP_NEVER:
            if (s1 != 0 and (stop_code == 0 or s1 == stop_code)) or \
               (s2 != 0 and (stop_code == 0 or s2 == stop_code)):
                return K.STATUS_DONE
        if ist[K.I_EVENTS] >= max_events:
            return K.STATUS_DONE


# ------------------------------------------------------------ run operations

def _run_until(side: int, x0, field, pair, params, rng, t0=0.0):
    w = Walker(x0, field, pair, params, rng, t0=t0)
    batch, _ = w.run(side)
    ev = batch.event(len(batch) - 1)
    return ev, ev.time - t0, w.steps


def run_until_entry(x0: PhasePoint, field: ForceField, pair: MetastablePair,
                    params: SimParams, rng: RngStream, t0: float = 0.0):
    """Integrate until the first entrance into A or B.

    Returns ``(event, elapsed, steps)``.  A state on the boundary with inward
    velocity counts as already inside, so it must exit before re-entering.
    """
    return _run_until(-1, x0, field, pair, params, rng, t0)


def run_until_exit(x0: PhasePoint, field: ForceField, pair: MetastablePair,
                   params: SimParams, rng: RngStream, t0: float = 0.0):
    """Integrate until the first exit from A or B; returns ``(event, elapsed, steps)``."""
    return _run_until(1, x0, field, pair, params, rng, t0)


def run_collect_chain(x0: PhasePoint, field: ForceField, pair: MetastablePair,
                      params: SimParams, rng: RngStream, n_events: int,
                      observable: Observable | Callable | None = None, t0: float = 0.0):
    """Collect the first ``n_events`` crossings of the boundary of A and B.

    With an observable, ``g_segment[i]`` of the returned chain holds the
    integral of ``G`` from event ``i`` to event ``i + 1``.
    """
    from .chains import BoundaryChain
    if n_events < 1:
        raise UsageError("n_events must be >= 1")
    if observable is not None and not isinstance(observable, Observable):
        observable = Observable.custom(observable)
    w = Walker(x0, field, pair, params, rng, observable=observable, t0=t0)
    first, _ = w.run(0)
    rest, _ = w.run(None, max_events=n_events - 1) if n_events > 1 else (EventBatch.empty(w.dim), None)
    batch = EventBatch.concat([first, rest], w.dim)
    g_seg = None
    if observable is not None:
        g_seg = np.append(batch.g[1:], np.nan)
    chain = BoundaryChain.from_arrays(batch.time, batch.side, batch.label, batch.q, batch.p,
                                      g_segment=g_seg)
    chain.meta["gamma_zero"] = w.gamma_zero
    chain.meta["steps"] = w.steps
    return chain
