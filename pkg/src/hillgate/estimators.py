"""Estimators of mean transition times and transition statistics.

The Hill ratio turns the mean A-to-B transition time into short excursions
started from the entrance law of A: the mean return time (or the integral
of an observable up to the return) divided by the probability that the
return lands in B.  The direct estimator averages transition durations over
one long trajectory.  Adaptive multilevel splitting (AMS) estimates the
return probability when it is too small for plain Monte Carlo.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .boundary_sampler import (BoundaryMeasureSpec, SurfaceSamplerParams, sample_pi_batch)
from .chains import BoundaryChain, TransitionSample, entry_subchain, transition_samples
from .errors import (DegenerateAMSError, InfiniteEstimateError, InsufficientDataError,
                     InvalidInputError, SimulationTimeout, UsageError)
from .fields import ForceField, PhasePoint
from .geometry import BoundarySide, MetastablePair
from .integrator import Observable, RngStream, SimParams, Walker

BLOCK = 256


@dataclass(frozen=True)
class Estimate:
    """Point estimate with standard error; ``meta`` carries method and seed."""

    value: float
    std_error: float
    n_samples: int
    meta: dict = field(default_factory=dict, compare=False)

    def ci(self, z: float = 1.96) -> tuple:
        return (self.value - z * self.std_error, self.value + z * self.std_error)

    def to_record(self) -> dict:
        return {"method": self.meta.get("method"), "value": self.value,
                "std_error": self.std_error, "n": self.n_samples,
                **{k: v for k, v in self.meta.items() if k != "method"}}


@dataclass(frozen=True)
class Moments:
    """Mergeable (count, sum, sum of squares) triple."""

    n: int = 0
    s: float = 0.0
    ss: float = 0.0

    @classmethod
    def of(cls, x) -> "Moments":
        x = np.asarray(x, dtype=float)
        return cls(x.size, float(x.sum()), float((x * x).sum()))

    def merge(self, other: "Moments") -> "Moments":
        return Moments(self.n + other.n, self.s + other.s, self.ss + other.ss)

    @property
    def mean(self) -> float:
        return self.s / self.n

    @property
    def var(self) -> float:
        if self.n < 2:
            return 0.0
        return max(self.ss - self.s * self.s / self.n, 0.0) / (self.n - 1)

    def estimate(self, **meta) -> Estimate:
        return Estimate(self.mean, math.sqrt(self.var / self.n), self.n, meta)


def combined_stderr(*estimates: Estimate) -> float:
    return math.sqrt(sum(e.std_error ** 2 for e in estimates))


# ----------------------------------------------------------------- excursions

@dataclass(frozen=True)
class ExcursionSample:
    """One return to the boundary of A or B started from the entrance law of A."""

    tau1: float
    hit_B: bool
    g_integral: float
    tau_exit: float = float("nan")


class ExcursionSet:
    """Column storage for many :class:`ExcursionSample` records.

    Optional columns: ``start_label`` / ``end_label`` (0 = A, 1 = B) and the
    return point ``end_q``, ``end_p``.
    """

    def __init__(self, tau1, hit_B, g_integral=None, tau_exit=None, meta=None,
                 start_label=None, end_label=None, end_q=None, end_p=None):
        self.tau1 = np.asarray(tau1, dtype=float).reshape(-1)
        self.hit_B = np.asarray(hit_B, dtype=bool).reshape(-1)
        n = self.tau1.size
        self.g_integral = (self.tau1.copy() if g_integral is None
                           else np.asarray(g_integral, dtype=float).reshape(-1))
        self.tau_exit = np.full(n, np.nan) if tau_exit is None else np.asarray(tau_exit, float)
        self.start_label = None if start_label is None else np.asarray(start_label, dtype=np.int64)
        self.end_label = None if end_label is None else np.asarray(end_label, dtype=np.int64)
        self.end_q = None if end_q is None else np.asarray(end_q, dtype=float)
        self.end_p = None if end_p is None else np.asarray(end_p, dtype=float)
        self.meta = dict(meta or {})
        if not (self.hit_B.size == self.g_integral.size == self.tau_exit.size == n):
            raise InvalidInputError("excursion columns have different lengths")

    @classmethod
    def from_samples(cls, samples: Sequence[ExcursionSample]) -> "ExcursionSet":
        return cls([s.tau1 for s in samples], [s.hit_B for s in samples],
                   [s.g_integral for s in samples], [s.tau_exit for s in samples])

    def __len__(self):
        return self.tau1.size

    def __getitem__(self, i) -> ExcursionSample:
        return ExcursionSample(float(self.tau1[i]), bool(self.hit_B[i]),
                               float(self.g_integral[i]), float(self.tau_exit[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, mask) -> "ExcursionSet":
        pick = lambda a: None if a is None else a[mask]
        return ExcursionSet(self.tau1[mask], self.hit_B[mask], self.g_integral[mask],
                            self.tau_exit[mask], self.meta, pick(self.start_label),
                            pick(self.end_label), pick(self.end_q), pick(self.end_p))

    def started_in(self, label: str) -> "ExcursionSet":
        """Excursions started in ``label``; ``hit_B`` becomes "returned to the other set"."""
        if self.start_label is None:
            raise UsageError("start labels were not recorded")
        code = 0 if label == "A" else 1
        sub = self.subset(self.start_label == code)
        sub.hit_B = sub.end_label != code
        sub.meta["label"] = label
        return sub


def _as_set(excursions) -> ExcursionSet:
    if isinstance(excursions, ExcursionSet):
        return excursions
    return ExcursionSet.from_samples(list(excursions))


def _run_blocks(n: int, work: Callable, threads: int):
    """Run ``work(block_index, start, stop)`` over fixed blocks; results in block order."""
    blocks = [(b, s, min(s + BLOCK, n)) for b, s in enumerate(range(0, n, BLOCK))]
    if threads <= 1 or len(blocks) == 1:
        return [work(*blk) for blk in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda blk: work(*blk), blocks))


def _entrance_spec(pair, field, params, side=BoundarySide.GAMMA_MINUS):
    return BoundaryMeasureSpec(pair, field, params.thermo.beta, side)


def collect_excursions(pair: MetastablePair, field: ForceField, params: SimParams,
                       sampler: SurfaceSamplerParams | None, rng: RngStream, n: int,
                       observable: Observable | None = None, threads: int = 1,
                       label: str | None = "A") -> ExcursionSet:
    """Excursions from the entrance law of ``label`` to the next entrance.

    Each starts on the incoming boundary of the set (so the set is entered at
    time 0), runs to the first exit and then to the next entrance anywhere.
    Records the return time, whether it lands in the other set and the
    integral of ``observable`` (the return time itself when none is given).
    With ``label=None`` the start is drawn from the entrance law on the
    boundary of both sets; ``hit_B`` then means "returned to the other set".

    Raises
    ------
    SimulationTimeout
        If any excursion exceeds ``params.max_steps``; the message gives
        the number of censored excursions.
    """
    if n < 1:
        raise UsageError("n must be >= 1")
    starts = sample_pi_batch(_entrance_spec(pair, field, params), n, label, sampler, rng.child(0))
    obs = observable if observable is not None else Observable.constant(1.0)
    d = field.dimension

    def work(b, lo, hi):
        sub = rng.child(1 + b)
        out = np.full((hi - lo, 4 + 2 * d), np.nan)
        censored = 0
        for j, i in enumerate(range(lo, hi)):
            w = Walker(starts.point(i), field, pair, params, sub, observable=obs)
            try:
                ex, _ = w.run(+1)
                en, _ = w.run(-1)
            except SimulationTimeout:
                censored += 1
                continue
            out[j, :4] = (en.time[-1], en.label[-1], ex.g.sum() + en.g.sum(), ex.time[-1])
            out[j, 4:4 + d] = en.q[-1]
            out[j, 4 + d:] = en.p[-1]
        return out, censored

    results = _run_blocks(n, work, threads)
    censored = sum(c for _, c in results)
    if censored:
        raise SimulationTimeout(f"{censored} of {n} excursions were censored by max_steps",
                                steps=params.max_steps)
    arr = np.vstack([r for r, _ in results])
    end_label = arr[:, 1].astype(np.int64)
    return ExcursionSet(arr[:, 0], end_label != starts.labels, arr[:, 2], arr[:, 3],
                        meta={"seed": rng.seed, "dt": params.dt, "label": label},
                        start_label=starts.labels, end_label=end_label,
                        end_q=arr[:, 4:4 + d], end_p=arr[:, 4 + d:])


# ------------------------------------------------------------------ estimators

def hill_statistic(excursions, mode: str = "mean_time") -> Estimate:
    """Ratio of the mean return time (or observable integral) to the hit frequency.

    The standard error uses the delta method with the sample covariance of
    numerator and hit indicator.
    """
    ex = _as_set(excursions)
    n = len(ex)
    if mode == "mean_time":
        x = ex.tau1
    elif mode == "observable":
        x = ex.g_integral
    else:
        raise UsageError("mode must be 'mean_time' or 'observable'")
    h = ex.hit_B.astype(float)
    if n == 0 or h.sum() == 0:
        raise InfiniteEstimateError(
            "no excursion reached B; the ratio is infinite. Estimate the hit "
            "probability with ams_probability instead")
    mx, mh = x.mean(), h.mean()
    r = mx / mh
    if n > 1:
        cov = np.cov(np.vstack([x, h]), ddof=1)
        var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (n * mh * mh)
    else:
        var = 0.0
    return Estimate(float(r), math.sqrt(max(var, 0.0)), n,
                    {"method": f"hill_{mode}", **{k: v for k, v in ex.meta.items()}})


def decomposed_hill(excursions=None, *, stay_time: Estimate | None = None,
                    p: Estimate | None = None, reach_time: Estimate | None = None) -> Estimate:
    """``E[tau | stay] (1/p - 1) + E[tau | reach]``.

    Components come either from one excursion set or separately (for example
    ``p`` and ``reach_time`` from :func:`ams_probability`).  The standard
    error propagates the component errors to first order, treating them as
    independent.
    """
    if excursions is not None:
        ex = _as_set(excursions)
        n = len(ex)
        hit = ex.hit_B
        ph = hit.mean() if n else 0.0
        p = Estimate(float(ph), math.sqrt(ph * (1 - ph) / max(n - 1, 1)), n)
        if hit.any():
            reach_time = Moments.of(ex.tau1[hit]).estimate()
        if (~hit).any():
            stay_time = Moments.of(ex.tau1[~hit]).estimate()
    if p is None or reach_time is None and p.value > 0:
        raise UsageError("decomposed_hill needs p and reach_time")
    if not p.value > 0:
        raise InvalidInputError(f"hit probability estimate must be > 0, got {p.value}")
    if stay_time is None:
        if p.value < 1:
            raise UsageError("stay_time is required when p < 1")
        stay_time = Estimate(0.0, 0.0, 0)
    f = 1.0 / p.value - 1.0
    value = stay_time.value * f + reach_time.value
    var = ((f * stay_time.std_error) ** 2
           + (stay_time.value / p.value ** 2 * p.std_error) ** 2
           + reach_time.std_error ** 2)
    n = max(stay_time.n_samples + reach_time.n_samples, p.n_samples)
    return Estimate(float(value), math.sqrt(var), n, {"method": "decomposed_hill"})


def batch_means(x) -> tuple:
    """Mean and batch-means standard error with batch size ``floor(sqrt(n))``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    b = max(1, int(math.isqrt(n)))
    m = n // b
    means = x[:m * b].reshape(m, b).mean(axis=1)
    se = float(means.std(ddof=1) / math.sqrt(m)) if m > 1 else float("nan")
    return float(x.mean()), se


def direct_transition_time(entry_chain, observable: bool = False) -> Estimate:
    """Average A-to-B transition duration (or ``G`` integral) along one trajectory.

    ``entry_chain`` is an entry chain, a full crossing chain, or a sequence
    of :class:`TransitionSample`.
    """
    if isinstance(entry_chain, BoundaryChain):
        chain = entry_subchain(entry_chain) if entry_chain.is_sigma else entry_chain
        samples = transition_samples(chain)
    else:
        samples = list(entry_chain)
    if len(samples) < 2:
        raise InsufficientDataError(f"need at least 2 completed transitions, got {len(samples)}")
    if observable:
        vals = [s.g_integral for s in samples]
        if any(v is None for v in vals):
            raise UsageError("the chain carries no observable integrals")
    else:
        vals = [s.duration for s in samples]
    mean, se = batch_means(vals)
    return Estimate(mean, se, len(samples),
                    {"method": "direct_observable" if observable else "direct_mean_time"})


def capacity_estimate(chain) -> tuple:
    """Frequencies of consecutive A-then-B and B-then-A pairs in a chain.

    Accepts a :class:`BoundaryChain` or a label sequence; standard errors
    from batch means of the pair indicators.
    """
    labels = chain.labels if isinstance(chain, BoundaryChain) else np.asarray(
        [0 if l in ("A", 0) else 1 for l in chain])
    if len(labels) < 2:
        raise InsufficientDataError("need at least two events")
    ab = ((labels[:-1] == 0) & (labels[1:] == 1)).astype(float)
    ba = ((labels[:-1] == 1) & (labels[1:] == 0)).astype(float)
    out = []
    for x, tag in ((ab, "capacity_AB"), (ba, "capacity_BA")):
        mean, se = batch_means(x) if x.size >= 4 else (float(x.mean()), float("nan"))
        out.append(Estimate(mean, se, x.size, {"method": tag}))
    return tuple(out)


# -------------------------------------------------------- plus-side initialization

@dataclass
class PlusSideResult:
    """Returns started from the exit law of A, plus the entrance-to-exit leg.

    ``hit_B[i]`` and ``tau_minus[i]`` describe the path from an exit draw to
    the next entrance; ``tau_plus`` are independent durations from an
    entrance draw to the first exit.
    """

    hit_B: np.ndarray
    tau_minus: np.ndarray
    tau_plus: np.ndarray
    g_minus: np.ndarray

    def hit_probability(self) -> Estimate:
        h = self.hit_B.astype(float)
        return Moments.of(h).estimate(method="plus_side_hit_probability")

    def mean_return_time(self) -> Estimate:
        """``E[exit leg] + E[exit-to-entrance leg]``."""
        a = Moments.of(self.tau_plus).estimate()
        b = Moments.of(self.tau_minus).estimate()
        return Estimate(a.value + b.value, combined_stderr(a, b), a.n_samples + b.n_samples,
                        {"method": "plus_side_mean_time"})

    def hill_estimate(self) -> Estimate:
        t, p = self.mean_return_time(), self.hit_probability()
        if p.value == 0:
            raise InfiniteEstimateError("no return reached B")
        r = t.value / p.value
        se = r * math.sqrt((t.std_error / t.value) ** 2 + (p.std_error / p.value) ** 2)
        return Estimate(r, se, t.n_samples, {"method": "plus_side_hill"})


def plus_side_initialization(pair: MetastablePair, field: ForceField, params: SimParams,
                             sampler: SurfaceSamplerParams | None, rng: RngStream, n: int,
                             observable: Observable | None = None, threads: int = 1,
                             n_exit_leg: int | None = None) -> PlusSideResult:
    """Start from the exit law of A and run to the first entrance.

    The time spent from the entrance law of A to the first exit is sampled
    separately (``n_exit_leg`` runs, default ``n``) so that mean return
    times can be reassembled; ``n_exit_leg=0`` skips it, which is enough for
    :meth:`PlusSideResult.hit_probability`.
    """
    obs = observable if observable is not None else Observable.constant(1.0)
    starts = sample_pi_batch(_entrance_spec(pair, field, params, BoundarySide.GAMMA_PLUS),
                             n, "A", sampler, rng.child(0))

    def work(b, lo, hi):
        sub = rng.child(1 + b)
        out = np.empty((hi - lo, 3))
        bad = 0
        for j, i in enumerate(range(lo, hi)):
            w = Walker(starts.point(i), field, pair, params, sub, observable=obs)
            try:
                en, _ = w.run(-1)
            except SimulationTimeout:
                bad += 1
                continue
            out[j] = (en.time[-1], float(en.label[-1] == 1), en.g.sum())
        return out, bad

    res = _run_blocks(n, work, threads)
    if sum(c for _, c in res):
        raise SimulationTimeout(f"{sum(c for _, c in res)} plus-side runs were censored",
                                steps=params.max_steps)
    arr = np.vstack([r for r, _ in res])
    m = n if n_exit_leg is None else n_exit_leg
    if m == 0:
        return PlusSideResult(arr[:, 1] > 0.5, arr[:, 0], np.empty(0), arr[:, 2])
    leg_starts = sample_pi_batch(_entrance_spec(pair, field, params), m, "A", sampler, rng.child(10**6))

    def leg(b, lo, hi):
        sub = rng.child(10**6 + 1 + b)
        out = np.empty(hi - lo)
        for j, i in enumerate(range(lo, hi)):
            w = Walker(leg_starts.point(i), field, pair, params, sub)
            ex, _ = w.run(+1)
            out[j] = ex.time[-1]
        return out

    tau_plus = np.concatenate(_run_blocks(m, leg, threads))
    return PlusSideResult(arr[:, 1] > 0.5, arr[:, 0], tau_plus, arr[:, 2])


# ------------------------------------------------------------------------- AMS

def linear_coordinate(pair: MetastablePair) -> Callable:
    """``xi(q) = (q - c_A) . (c_B - c_A) / |c_B - c_A|^2`` (0 at A's center, 1 at B's)."""
    if not pair.all_balls:
        raise UsageError("the default reaction coordinate needs ball regions")
    ca, cb = pair.region_a.center, pair.region_b.center
    u = (cb - ca) / float((cb - ca) @ (cb - ca))
    return lambda q: (np.asarray(q, dtype=float) - ca) @ u


def default_level_b(pair: MetastablePair) -> float:
    """Value of :func:`linear_coordinate` at the point of B's boundary closest to A."""
    ca, cb = pair.region_a.center, pair.region_b.center
    return 1.0 - pair.region_b.radius / float(np.linalg.norm(cb - ca))


@dataclass(frozen=True)
class AmsParams:
    """Adaptive multilevel splitting settings.

    ``init`` selects the starting law: ``"plus"`` draws from the exit law
    of A and runs to the first entrance; ``"minus"`` draws from the
    entrance law of A, runs to the first exit and then to the next entrance,
    so reactive durations are full return times.  ``n_runs`` independent
    runs are averaged and give the standard error.
    """

    n_replicas: int = 100
    kill_count: int = 1
    reaction_coordinate: Callable | None = None
    level_B: float | None = None
    n_runs: int = 1
    init: str = "plus"
    on_extinction: str = "raise"
    max_iterations: int = 1_000_000

    def __post_init__(self):
        if self.n_replicas < 2:
            raise UsageError("n_replicas must be >= 2")
        if not 1 <= self.kill_count < self.n_replicas:
            raise UsageError("kill_count must satisfy 1 <= kill_count < n_replicas")
        if self.init not in ("plus", "minus"):
            raise UsageError("init must be 'plus' or 'minus'")
        if self.on_extinction not in ("raise", "zero"):
            raise UsageError("on_extinction must be 'raise' or 'zero'")
        if self.n_runs < 1:
            raise UsageError("n_runs must be >= 1")


@dataclass
class ReactivePaths:
    """Durations and observable integrals of the replicas that reached B."""

    durations: np.ndarray
    g_integrals: np.ndarray
    run_index: np.ndarray

    def mean_duration(self) -> Estimate:
        """Mean duration; standard error from the spread of per-run means."""
        if self.durations.size == 0:
            raise InsufficientDataError("no reactive paths")
        runs = np.unique(self.run_index)
        per_run = np.array([self.durations[self.run_index == r].mean() for r in runs])
        se = per_run.std(ddof=1) / math.sqrt(runs.size) if runs.size > 1 else float("nan")
        return Estimate(float(per_run.mean()), float(se), int(self.durations.size),
                        {"method": "ams_reactive_duration"})


class _Replica:
    """Path of one AMS replica: positions, walker snapshots and phase markers."""

    __slots__ = ("xi", "states", "times", "gs", "phase", "reached", "duration", "g_total", "level")

    def __init__(self):
        self.xi = []
        self.states = []
        self.times = []
        self.gs = []
        self.phase = []
        self.reached = False
        self.duration = 0.0
        self.g_total = 0.0
        self.level = -np.inf


def _grow(rep: _Replica, w: Walker, phase: int, xi_fn, stop_side: int, max_steps: int,
          g_off: float):
    """Run ``w`` until ``stop_side`` recording the path into ``rep``."""
    batch, path = w.run(stop_side, record_path=True, max_steps=max_steps)
    # drop the state after the stopping step: it lies past the event
    k = path.q.shape[0] - 1
    if k > 0:
        rep.xi.extend(xi_fn(path.q[:k]).tolist())
        for i in range(k):
            rep.states.append((path.q[i], path.p[i]))
        rep.times.extend(path.t[:k].tolist())
        rep.gs.extend((path.g[:k] + g_off).tolist())
        rep.phase.extend([phase] * k)
    return batch


def _ams_single(pair, field, params, sampler, ams: AmsParams, rng: RngStream, obs: Observable):
    xi_fn = ams.reaction_coordinate or linear_coordinate(pair)
    level_b = default_level_b(pair) if ams.level_B is None else ams.level_B
    n = ams.n_replicas
    side0 = BoundarySide.GAMMA_PLUS if ams.init == "plus" else BoundarySide.GAMMA_MINUS
    starts = sample_pi_batch(_entrance_spec(pair, field, params, side0), n, "A", sampler, rng.child(0))
    counter = [0]
    dyn = rng.child(1)

    def finish(rep: _Replica, w: Walker, phase: int, t_start: float, g_start: float):
        if phase == 0:
            _grow(rep, w, 0, xi_fn, +1, params.max_steps, g_start)
        batch = _grow(rep, w, 1, xi_fn, -1, params.max_steps, g_start)
        lab = int(batch.label[-1])
        q_ev = batch.q[-1]
        rep.reached = lab == 1
        rep.duration = float(batch.time[-1])
        rep.g_total = w.g_total + g_start
        rep.xi.append(float(xi_fn(q_ev[None, :])[0]))
        rep.states.append((q_ev, batch.p[-1]))
        rep.times.append(rep.duration)
        rep.gs.append(rep.g_total)
        rep.phase.append(2)
        rep.level = np.inf if rep.reached else float(np.max(rep.xi))
        return rep

    def launch(x: PhasePoint, phase: int, t0: float, g0: float, prefix: _Replica | None):
        counter[0] += 1
        w = Walker(x, field, pair, params, dyn.child(counter[0]), observable=obs, t0=t0)
        rep = _Replica()
        if prefix is not None:
            rep.xi, rep.states, rep.times = list(prefix.xi), list(prefix.states), list(prefix.times)
            rep.gs, rep.phase = list(prefix.gs), list(prefix.phase)
        else:
            rep.xi.append(float(xi_fn(x.q[None, :])[0]))
            rep.states.append((x.q, x.p))
            rep.times.append(t0)
            rep.gs.append(0.0)
            rep.phase.append(0 if ams.init == "minus" else 1)
        return finish(rep, w, phase, t0, g0)

    reps = [launch(starts.point(i), 0 if ams.init == "minus" else 1, 0.0, 0.0, None)
            for i in range(n)]
    weight = 1.0
    gen = rng.child(2).generator
    for it in range(ams.max_iterations):
        levels = np.array([r.level for r in reps])
        z = float(np.sort(levels)[ams.kill_count - 1])
        if z >= level_b:
            break
        killed = np.nonzero(levels <= z)[0]
        alive = np.nonzero(levels > z)[0]
        if alive.size == 0:
            if ams.on_extinction == "zero":
                return 0.0, [], it
            raise DegenerateAMSError(f"all replicas are stuck at level {z:.6g}", level=z)
        weight *= 1.0 - killed.size / n
        for k in killed:
            parent = reps[int(alive[gen.integers(alive.size)])]
            xi = np.asarray(parent.xi)
            j = int(np.argmax(xi > z))
            if parent.phase[j] == 2:
                # the parent crosses z only at its final event: copy it
                clone = _Replica()
                for s in clone.__slots__:
                    setattr(clone, s, getattr(parent, s))
                reps[k] = clone
                continue
            prefix = _Replica()
            prefix.xi, prefix.states = parent.xi[:j + 1], parent.states[:j + 1]
            prefix.times, prefix.gs, prefix.phase = parent.times[:j + 1], parent.gs[:j + 1], parent.phase[:j + 1]
            q, p = parent.states[j]
            reps[k] = launch(PhasePoint(q, p), parent.phase[j], parent.times[j], parent.gs[j], prefix)
    else:
        raise DegenerateAMSError("AMS did not terminate within max_iterations", level=z)
    reached = [r for r in reps if r.reached]
    p_hat = weight * len(reached) / n
    return p_hat, reached, it


def ams_probability(pair: MetastablePair, field: ForceField, params: SimParams,
                    sampler: SurfaceSamplerParams | None, ams: AmsParams, rng: RngStream,
                    observable: Observable | None = None, threads: int = 1):
    """Probability that a return from A lands in B, by last-particle AMS.

    At every iteration the replicas whose maximal reaction coordinate is
    at or below the ``kill_count``-th smallest level are killed (all ties
    together), the weight is multiplied by ``1 - killed / n_replicas`` and
    each killed replica is restarted, with fresh noise, from the first
    point where a random survivor exceeds that level.  The run stops once
    that level reaches ``level_B``.

    Returns
    -------
    (Estimate, ReactivePaths)
        The averaged estimate over ``n_runs`` runs and the durations of
        the final replicas that reached B.
    """
    obs = observable if observable is not None else Observable.constant(1.0)

    def one(r):
        return _ams_single(pair, field, params, sampler, ams, rng.child(r), obs)

    if threads > 1 and ams.n_runs > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(one, range(ams.n_runs)))
    else:
        runs = [one(r) for r in range(ams.n_runs)]
    ps = np.array([r[0] for r in runs])
    iters = [r[2] for r in runs]
    p_mean = float(ps.mean())
    if ams.n_runs > 1:
        se = float(ps.std(ddof=1) / math.sqrt(ams.n_runs))
        how = "runs"
    else:
        # asymptotic relative variance of last-particle AMS: -log(p) * k / N
        se = p_mean * math.sqrt(max(-math.log(p_mean), 0.0) * ams.kill_count / ams.n_replicas) \
            if p_mean > 0 else float("nan")
        how = "asymptotic"
    durations, gints, idx = [], [], []
    for r_i, (_, reached, _) in enumerate(runs):
        for rep in reached:
            durations.append(rep.duration)
            gints.append(rep.g_total)
            idx.append(r_i)
    paths = ReactivePaths(np.array(durations), np.array(gints), np.array(idx, dtype=int))
    est = Estimate(p_mean, se, ams.n_runs * ams.n_replicas,
                   {"method": "ams_probability", "seed": rng.seed, "stderr_from": how,
                    "iterations": iters, "init": ams.init})
    return est, paths
