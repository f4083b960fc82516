"""Consistency checks run by ``hillgate validate`` and the acceptance tests.

Each ``check_*`` function returns a :class:`CheckResult`.  Expensive
simulations are shared through a :class:`ValidationContext`, which runs
each one lazily, once, from its own child stream of the master seed.
``scale`` shrinks every sample size (``--quick`` uses 0.05); the minimum
sizes required of the Langevin comparisons scale with it.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import stats

from . import harris_oracle as ho
from .boundary_sampler import (BoundaryMeasureSpec, BoundarySamples, sample_pi_batch,
                               z_constants, z_monte_carlo)
from .chains import (BoundaryChain, empirical_reactive_entrance, empirical_reactive_exit,
                     entry_subchain, exit_subchain)
from .config import ExperimentConfig, reference_config
from .errors import HillgateError
from .estimators import (AmsParams, ExcursionSet, ams_probability, capacity_estimate,
                         collect_excursions, combined_stderr, direct_transition_time,
                         hill_statistic, plus_side_initialization)
from .fields import ForceField, PhasePoint, PotentialSpec, ThermoParams
from .geometry import BoundarySide, LevelSetRegion, MetastablePair
from .integrator import Observable, RngStream, SimParams, Walker, run_collect_chain

P_LEVEL = 0.01
N_SIGMA = 3.0
Z95 = 1.959963984540054

# sample sizes at scale 1
N_CHAIN_EVENTS = 200_000
N_ROUND_TRIPS = 100_000
N_FRESH = 100_000
N_SIGMA_PAIRS = 100_000
N_HALF_DT_EVENTS = 120_000
N_HALF_DT_EXCURSIONS = 20_000
N_MIN_TRANSITIONS = 5_000
N_CRUDE = 20_000
N_PLUS = 20_000
N_AMS_RUNS = 40
N_Z_MC = 100_000
ENTRY_THIN = 4
AMS_BETA = 5.5


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.criterion:>2} {self.name}: {self.summary} ({self.seconds:.1f} s)"

    def to_record(self) -> dict:
        return {"criterion": self.criterion, "name": self.name, "passed": bool(self.passed),
                "summary": self.summary, "details": _plain(self.details),
                "seconds": round(self.seconds, 3)}


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def _timed(fn: Callable) -> Callable:
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ------------------------------------------------------------------- context

class ValidationContext:
    """Lazily computed simulations shared between checks.

    Parameters
    ----------
    config : ExperimentConfig, optional
        A 1D two-ball setup; defaults to :func:`reference_config`.
    scale : float
        Multiplier on every sample size.
    threads : int
        Worker threads for excursion batches.
    """

    def __init__(self, config: ExperimentConfig | None = None, scale: float = 1.0,
                 seed: int | None = None, threads: int = 1):
        self.config = config or reference_config()
        if self.config.pair.dimension != 1:
            raise HillgateError("the validation suite needs a 1D configuration")
        self.scale = float(scale)
        self.seed = self.config.seed if seed is None else int(seed)
        self.threads = int(threads)
        self.rng = RngStream(self.seed)
        self.field = self.config.field
        self.pair = self.config.pair
        sp = self.config.sim_params
        # long single trajectories need far more steps than one run_* call
        self.params = SimParams(sp.thermo, sp.dt, sp.scheme, max(sp.max_steps, 10**10),
                                sp.crossing_tol, sp.tol_tangent)
        self.sampler = self.config.sampler_params
        self.observable = Observable.speed_above(1.0)

    def n(self, base: int, floor: int = 200) -> int:
        return max(floor, int(round(base * self.scale)))

    @property
    def beta(self) -> float:
        return self.params.thermo.beta

    @property
    def centers(self) -> np.ndarray:
        return np.array([self.pair.region_a.center, self.pair.region_b.center])

    def _x0(self) -> PhasePoint:
        return PhasePoint(self.pair.region_a.center.copy(), np.zeros(1))

    # -- shared simulations
    @cached_property
    def long_chain(self) -> BoundaryChain:
        """Crossing chain of one long trajectory at the configured step."""
        return run_collect_chain(self._x0(), self.field, self.pair, self.params, self.rng.child(1),
                                 self.n(N_CHAIN_EVENTS, 2000), observable=self.observable)

    @cached_property
    def round_trips(self) -> ExcursionSet:
        """Round trips started from the entrance law on both sets."""
        return collect_excursions(self.pair, self.field, self.params, self.sampler,
                                  self.rng.child(2), self.n(N_ROUND_TRIPS, 1000),
                                  observable=self.observable, threads=self.threads, label=None)

    @cached_property
    def fresh_minus(self) -> BoundarySamples:
        spec = BoundaryMeasureSpec(self.pair, self.field, self.beta, BoundarySide.GAMMA_MINUS)
        return sample_pi_batch(spec, self.n(N_FRESH, 1000), None, self.sampler, self.rng.child(3))

    @cached_property
    def sigma_pairs(self) -> tuple:
        """``(Y0, Y1)`` with ``Y0`` drawn from the half-half mixture of both boundary laws."""
        return sigma_pairs(self.pair, self.field, self.params, self.sampler, self.rng.child(4),
                           self.n(N_SIGMA_PAIRS, 1000))

    @cached_property
    def half_dt_chain(self) -> BoundaryChain:
        return run_collect_chain(self._x0(), self.field, self.pair, self.params.with_dt(self.params.dt / 2),
                                 self.rng.child(5), self.n(N_HALF_DT_EVENTS, 2000),
                                 observable=self.observable)

    @cached_property
    def half_dt_excursions(self) -> ExcursionSet:
        return collect_excursions(self.pair, self.field, self.params.with_dt(self.params.dt / 2),
                                  self.sampler, self.rng.child(6), self.n(N_HALF_DT_EXCURSIONS, 500),
                                  observable=self.observable, threads=self.threads, label="A")

    @cached_property
    def hill_excursions(self) -> ExcursionSet:
        return self.round_trips.started_in("A")

    @cached_property
    def rare_params(self) -> SimParams:
        th = ThermoParams(self.params.thermo.gamma, AMS_BETA)
        return SimParams(th, self.params.dt, self.params.scheme, self.params.max_steps,
                         self.params.crossing_tol, self.params.tol_tangent)

    @cached_property
    def crude_rare(self) -> ExcursionSet:
        return collect_excursions(self.pair, self.field, self.rare_params, self.sampler,
                                  self.rng.child(7), self.n(N_CRUDE, 1000), threads=self.threads)

    @cached_property
    def plus_side_rare(self):
        return plus_side_initialization(self.pair, self.field, self.rare_params, self.sampler,
                                        self.rng.child(8), self.n(N_PLUS, 1000),
                                        threads=self.threads, n_exit_leg=0)

    @cached_property
    def ams_rare(self):
        ams = AmsParams(n_replicas=100, n_runs=max(4, int(round(N_AMS_RUNS * self.scale))))
        return ams_probability(self.pair, self.field, self.rare_params, self.sampler, ams,
                               self.rng.child(9), threads=self.threads)


def sigma_pairs(pair: MetastablePair, field: ForceField, params: SimParams, sampler,
                rng: RngStream, n: int) -> tuple:
    """Pairs of consecutive crossings from the stationary law of the crossing chain.

    ``Y0`` comes from the exit law with probability 1/2 and from the entrance
    law otherwise (the two have equal mass); ``Y1`` is the next crossing.
    Returns ``(q0, p0, lab0, q1, p1, lab1)``.
    """
    gen = rng.child(0).generator
    n_plus = int(gen.binomial(n, 0.5))
    parts = []
    for k, (side, m) in enumerate(((BoundarySide.GAMMA_PLUS, n_plus),
                                   (BoundarySide.GAMMA_MINUS, n - n_plus))):
        spec = BoundaryMeasureSpec(pair, field, params.thermo.beta, side)
        parts.append(sample_pi_batch(spec, m, None, sampler, rng.child(1 + k)))
    q0 = np.vstack([s.q for s in parts])
    p0 = np.vstack([s.p for s in parts])
    lab0 = np.concatenate([s.labels for s in parts])
    perm = gen.permutation(n)
    q0, p0, lab0 = q0[perm], p0[perm], lab0[perm]
    d = q0.shape[1]
    q1, p1, lab1 = np.empty((n, d)), np.empty((n, d)), np.empty(n, dtype=np.int64)
    dyn = rng.child(3)
    for i in range(n):
        w = Walker(PhasePoint(q0[i], p0[i]), field, pair, params, dyn)
        ev, _ = w.run(0)
        q1[i], p1[i], lab1[i] = ev.q[0], ev.p[0], ev.label[0]
    return q0, p0, lab0, q1, p1, lab1


# ------------------------------------------------------------- test helpers

def _normal_velocity(q, p, labels, centers) -> np.ndarray:
    u = q - centers[labels]
    u = u / np.linalg.norm(u, axis=1, keepdims=True)
    return np.sum(p * u, axis=1)


def _atom(q, labels, centers) -> np.ndarray:
    """1 for the boundary point on the far side of the center (1D), else 0."""
    return ((q[:, 0] - centers[labels, 0]) > 0).astype(np.int64)


def _mean_se(x) -> tuple:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _within(diff: float, se: float, k: float = N_SIGMA) -> bool:
    return bool(abs(diff) <= k * se)


# -------------------------------------------------------------------- checks

def _oracle_chains(seed: int, count: int = 100, max_states: int = 8):
    gen = np.random.default_rng([seed, 0x0AC1E])
    out = []
    for _ in range(count):
        n = int(gen.integers(2, max_states + 1))
        chain = ho.random_chain(n, gen)
        g = gen.exponential(1.0, n)
        k = int(gen.integers(1, n + 1))
        C = np.sort(gen.choice(n, size=k, replace=False))
        out.append((chain, g, C))
    return out


@_timed
def check_finite_hill(seed: int = 0, count: int = 100, max_states: int = 8) -> CheckResult:
    """Exact Hill equality on random finite chains."""
    t0 = time.perf_counter()
    worst = 0.0
    for chain, g, _ in _oracle_chains(seed, count, max_states):
        pi = ho.stationary(chain)
        lhs, rhs = ho.hill_lhs(chain, g), ho.hill_rhs(chain, pi, g)
        worst = max(worst, abs(lhs - rhs) / (1 + abs(rhs)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 10.0
    return CheckResult(1, "finite-chain Hill equality", ok,
                       f"{count} chains, max relative error {worst:.2e} (tol 1e-10), {dt:.2f} s (< 10 s)",
                       {"max_relative_error": worst, "runtime": dt, "chains": count})


@_timed
def check_representation(seed: int = 0, count: int = 100, max_states: int = 8) -> CheckResult:
    """Representation of the stationary law through returns to a subset."""
    t0 = time.perf_counter()
    worst = 0.0
    for chain, g, C in _oracle_chains(seed, count, max_states):
        pi = ho.stationary(chain)
        lhs, rhs = ho.representation_check(chain, pi, C, g)
        worst = max(worst, abs(lhs - rhs) / (1 + abs(rhs)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 10.0
    return CheckResult(2, "representation formula", ok,
                       f"{count} chains, max relative error {worst:.2e} (tol 1e-10), {dt:.2f} s (< 10 s)",
                       {"max_relative_error": worst, "runtime": dt, "chains": count})


def _hill_vs_direct(ctx: ValidationContext, observable: bool):
    mode = "observable" if observable else "mean_time"
    hill = hill_statistic(ctx.hill_excursions, mode)
    direct = direct_transition_time(ctx.long_chain, observable=observable)
    return hill, direct


@_timed
def check_hill_langevin(ctx: ValidationContext) -> CheckResult:
    """Hill ratio from entrance-law excursions against the direct mean transition time."""
    hill, direct = _hill_vs_direct(ctx, False)
    se = combined_stderr(hill, direct)
    diff = hill.value - direct.value
    need = ctx.n(N_MIN_TRANSITIONS, 1)
    enough = hill.n_samples >= need and direct.n_samples >= need
    ok = _within(diff, se) and enough
    return CheckResult(3, "Langevin Hill vs direct T_AB", ok,
                       f"hill {hill.value:.3f}+-{hill.std_error:.3f} (n={hill.n_samples}), "
                       f"direct {direct.value:.3f}+-{direct.std_error:.3f} (n={direct.n_samples}), "
                       f"|diff|/se = {abs(diff) / se:.2f} (<= 3)",
                       {"hill": hill.to_record(), "direct": direct.to_record(),
                        "z": abs(diff) / se, "min_samples": need})


@_timed
def check_hill_observable(ctx: ValidationContext) -> CheckResult:
    """Same comparison for the integral of ``1{|p| > 1}`` over a transition."""
    hill, direct = _hill_vs_direct(ctx, True)
    se = combined_stderr(hill, direct)
    diff = hill.value - direct.value
    ok = _within(diff, se)
    return CheckResult(4, "observable Hill vs ergodic average", ok,
                       f"hill {hill.value:.4f}+-{hill.std_error:.4f}, direct "
                       f"{direct.value:.4f}+-{direct.std_error:.4f}, |diff|/se = {abs(diff) / se:.2f} (<= 3)",
                       {"hill": hill.to_record(), "direct": direct.to_record(), "z": abs(diff) / se})


@_timed
def check_boundary_law(ctx: ValidationContext) -> CheckResult:
    """Entry-chain normal speeds and atom frequencies against the entrance law.

    Consecutive entries are correlated, so every ``ENTRY_THIN``-th entry is
    used; atom frequencies are tested within each set, because set labels
    persist over long runs of entries.
    """
    entries = entry_subchain(ctx.long_chain)
    sub = entries.subset(np.arange(0, len(entries), ENTRY_THIN))
    speed = sub.normal_speed(ctx.centers)
    ks = stats.kstest(speed, stats.rayleigh(scale=1 / math.sqrt(ctx.beta)).cdf)
    pot = ctx.field.potential
    atom = _atom(sub.q, sub.labels, ctx.centers)
    chi = {}
    for code, reg in enumerate(ctx.pair.regions):
        pts = reg.boundary_grid()          # lower atom, then upper
        w = np.exp(-ctx.beta * pot.energy(pts))
        w = w / w.sum()
        mask = sub.labels == code
        counts = np.bincount(atom[mask], minlength=2)
        chi[reg.label] = stats.chisquare(counts, w * counts.sum()).pvalue
    pvals = [ks.pvalue, *chi.values()]
    ok = all(p > P_LEVEL for p in pvals)
    return CheckResult(5, "entrance law of the entry chain", ok,
                       f"{len(entries)} entries (every {ENTRY_THIN}th used): KS |p.n| p={ks.pvalue:.3f}, "
                       + ", ".join(f"chi2 {k} p={v:.3f}" for k, v in chi.items()) + " (all > 0.01)",
                       {"n_entries": len(entries), "n_used": len(sub), "ks_p": ks.pvalue,
                        "chi2_p": chi})


@_timed
def check_sampler_invariance(ctx: ValidationContext) -> CheckResult:
    """Entrance-law draws pushed through one exit and one entrance keep their law."""
    rt, fresh = ctx.round_trips, ctx.fresh_minus
    v_out = _normal_velocity(rt.end_q, rt.end_p, rt.end_label, ctx.centers)
    ks = stats.ks_2samp(v_out, fresh.pn)
    cat_out = 2 * rt.end_label + _atom(rt.end_q, rt.end_label, ctx.centers)
    cat_in = 2 * fresh.labels + _atom(fresh.q, fresh.labels, ctx.centers)
    table = np.vstack([np.bincount(cat_out, minlength=4), np.bincount(cat_in, minlength=4)])
    chi = stats.chi2_contingency(table)
    ok = ks.pvalue > P_LEVEL and chi.pvalue > P_LEVEL
    return CheckResult(6, "invariance of the entrance law", ok,
                       f"{len(rt)} round trips vs {len(fresh)} fresh draws: KS p.n p={ks.pvalue:.3f}, "
                       f"chi2 (set, atom) p={chi.pvalue:.3f} (both > 0.01)",
                       {"ks_p": ks.pvalue, "chi2_p": chi.pvalue, "table": table.tolist()})


def _z_setups():
    one = reference_config()
    pot2 = PotentialSpec.radial_double_well_nd([[-1.0, 0.0], [1.0, 0.0]], 1.0)
    two = (ForceField.conservative(pot2),
           MetastablePair(LevelSetRegion.ball([-1.0, 0.0], 0.3, "A"),
                          LevelSetRegion.ball([1.0, 0.0], 0.3, "B")))
    return [(1, one.field, one.pair, 1e-8), (2, two[0], two[1], 1e-6)]


@_timed
def check_z_equality(ctx: ValidationContext) -> CheckResult:
    """Equal normalizing constants of the entrance and exit laws (1D and 2D)."""
    rows, ok = [], True
    n = ctx.n(N_Z_MC, 2000)
    for d, fld, pair, tol in _z_setups():
        spec = BoundaryMeasureSpec(pair, fld, ctx.beta)
        zp, zm = z_constants(spec)
        rel = abs(zp - zm) / abs(zm)
        row = {"dimension": d, "z_plus": zp, "z_minus": zm, "relative_gap": rel, "tol": tol}
        good = rel <= tol
        for k, side in enumerate((BoundarySide.GAMMA_PLUS, BoundarySide.GAMMA_MINUS)):
            val, se = z_monte_carlo(spec.with_side(side), n, ctx.rng.child(10).child(2 * d + k))
            ref = zp if side is BoundarySide.GAMMA_PLUS else zm
            row[f"mc_{side.value}"] = (val, se, (val - ref) / se)
            good = good and _within(val - ref, se)
        rows.append(row)
        ok = ok and good
    summary = "; ".join(
        f"{r['dimension']}D rel gap {r['relative_gap']:.1e} (tol {r['tol']:.0e}), MC z = "
        f"{r['mc_gamma_plus'][2]:+.2f}/{r['mc_gamma_minus'][2]:+.2f}" for r in rows)
    return CheckResult(7, "Z+ = Z-", ok, summary + " (|z| <= 3)", {"rows": rows})


def _pair_observables(q0, v0, q1, v1, s0, s1):
    """Five bounded functions of a pair of crossings, none symmetric under reversal."""
    x0, x1 = q0[:, 0], q1[:, 0]
    return np.column_stack([
        np.tanh(v0 + 0.5 * v1),
        np.tanh(v0) * np.tanh(x1),
        (v0 > 0) * np.exp(-(v1 - 0.5) ** 2),
        np.tanh(2.0 * x0 + x1),
        np.tanh(v0) * np.exp(-0.5 * s1 ** 2) + 0.3 * np.tanh(s0 - s1),
    ])


def _point_observables(q, v, center):
    """Five bounded functions of one boundary point."""
    side = np.sign(q[:, 0] - center[0])
    return np.column_stack([np.tanh(v), np.exp(-v ** 2), side, np.tanh(v) * side,
                            np.cos(2.0 * v)])


@_timed
def check_reversibility(ctx: ValidationContext) -> CheckResult:
    """Pair reversal under the crossing-chain stationary law, and reactive-law reversal."""
    q0, p0, l0, q1, p1, l1 = ctx.sigma_pairs
    c = ctx.centers
    v0, v1 = _normal_velocity(q0, p0, l0, c), _normal_velocity(q1, p1, l1, c)
    s0, s1 = np.linalg.norm(p0, axis=1), np.linalg.norm(p1, axis=1)
    fwd = _pair_observables(q0, v0, q1, v1, s0, s1)
    # (R Y1, R Y0): positions swap, normal velocities swap and change sign
    bwd = _pair_observables(q1, -v1, q0, -v0, s1, s0)
    d = fwd - bwd
    z_pairs = d.mean(axis=0) / (d.std(axis=0, ddof=1) / math.sqrt(d.shape[0]))

    chain = ctx.long_chain
    ent, ext = entry_subchain(chain), exit_subchain(chain)
    nu_ex = empirical_reactive_exit(ent, "A")
    nu_re = empirical_reactive_entrance(ext, "A")
    # the first exit of the run is not preceded by a visit to B
    re_idx = nu_re.indices[1:]
    ca = ctx.pair.region_a.center
    lab_x = np.zeros(len(nu_ex), dtype=np.int64)
    lab_r = np.zeros(re_idx.size, dtype=np.int64)
    vx = _normal_velocity(nu_ex.q, nu_ex.p, lab_x, c)
    vr = -_normal_velocity(ext.q[re_idx], ext.p[re_idx], lab_r, c)
    gx = _point_observables(nu_ex.q, vx, ca)
    gr = _point_observables(ext.q[re_idx], vr, ca)
    se = np.sqrt(gx.var(axis=0, ddof=1) / gx.shape[0] + gr.var(axis=0, ddof=1) / gr.shape[0])
    z_nu = (gx.mean(axis=0) - gr.mean(axis=0)) / se

    ok = bool(np.all(np.abs(z_pairs) <= N_SIGMA) and np.all(np.abs(z_nu) <= N_SIGMA))
    return CheckResult(8, "reversibility up to momentum reversal", ok,
                       f"{d.shape[0]} pairs, max |z| {np.max(np.abs(z_pairs)):.2f}; "
                       f"nu_ex_A- ({len(nu_ex)}) vs R nu_re_A+ ({re_idx.size}), max |z| "
                       f"{np.max(np.abs(z_nu)):.2f} (<= 3)",
                       {"z_pairs": z_pairs.tolist(), "z_reactive": z_nu.tolist(),
                        "n_pairs": int(d.shape[0]), "n_nu_ex": len(nu_ex), "n_nu_re": int(re_idx.size)})


@_timed
def check_capacity(ctx: ValidationContext) -> CheckResult:
    """A-to-B and B-to-A switch frequencies of the entry chain."""
    ab, ba = capacity_estimate(entry_subchain(ctx.long_chain))
    se = combined_stderr(ab, ba)
    diff = ab.value - ba.value
    ok = _within(diff, se)
    return CheckResult(9, "capacity symmetry", ok,
                       f"AB {ab.value:.5f}+-{ab.std_error:.5f}, BA {ba.value:.5f}+-{ba.std_error:.5f}, "
                       f"|diff|/se = {abs(diff) / se:.3f} (<= 3)",
                       {"ab": ab.to_record(), "ba": ba.to_record()})


@_timed
def check_ams(ctx: ValidationContext) -> CheckResult:
    """AMS and the exit-law start against crude Monte Carlo at a higher barrier."""
    crude = ctx.crude_rare
    h = crude.hit_B.astype(float)
    pc, sc = _mean_se(h)
    ams, _ = ctx.ams_rare
    plus = ctx.plus_side_rare.hit_probability()
    z_ams = (ams.value - pc) / math.hypot(ams.std_error, sc)
    z_plus = (plus.value - pc) / math.hypot(plus.std_error, sc)
    ok = abs(z_ams) <= N_SIGMA and abs(z_plus) <= N_SIGMA
    return CheckResult(10, "AMS and exit-law start", ok,
                       f"beta={AMS_BETA}: crude {pc:.4f}+-{sc:.4f} (n={h.size}), AMS {ams.value:.4f}"
                       f"+-{ams.std_error:.4f} (z={z_ams:+.2f}), exit-law start {plus.value:.4f}"
                       f"+-{plus.std_error:.4f} (z={z_plus:+.2f}) (|z| <= 3)",
                       {"crude": {"value": pc, "std_error": sc, "n": int(h.size)},
                        "ams": ams.to_record(), "plus_side": plus.to_record(),
                        "z_ams": z_ams, "z_plus": z_plus, "beta": AMS_BETA})


@_timed
def check_dt_robustness(ctx: ValidationContext) -> CheckResult:
    """Halving the step moves the Hill and direct estimates by less than a 95% CI width.

    The width is that of the wider of the two runs' intervals.
    """
    hill, direct = _hill_vs_direct(ctx, False)
    hill2 = hill_statistic(ctx.half_dt_excursions)
    direct2 = direct_transition_time(ctx.half_dt_chain)
    rows, ok = {}, True
    for name, a, b in (("hill", hill, hill2), ("direct", direct, direct2)):
        width = 2 * Z95 * max(a.std_error, b.std_error)
        shift = abs(a.value - b.value)
        rows[name] = {"dt": a.value, "dt_half": b.value, "shift": shift, "ci_width": width,
                      "n_half": b.n_samples}
        ok = ok and shift < width
    need = ctx.n(N_MIN_TRANSITIONS, 1)
    ok = ok and hill2.n_samples >= need and direct2.n_samples >= need
    return CheckResult(11, "dt robustness", ok,
                       "; ".join(f"{k} {r['dt']:.3f} -> {r['dt_half']:.3f} (shift {r['shift']:.3f} < "
                                 f"CI width {r['ci_width']:.3f}, n={r['n_half']})" for k, r in rows.items()),
                       {**rows, "min_samples": need})


CHECKS = (
    (1, lambda ctx: check_finite_hill(ctx.seed)),
    (2, lambda ctx: check_representation(ctx.seed)),
    (3, check_hill_langevin),
    (4, check_hill_observable),
    (5, check_boundary_law),
    (6, check_sampler_invariance),
    (7, check_z_equality),
    (8, check_reversibility),
    (9, check_capacity),
    (10, check_ams),
    (11, check_dt_robustness),
)


def run_all(ctx: ValidationContext, only=None, report: Callable | None = None) -> list:
    """Run the checks (all, or the criterion numbers in ``only``) in order."""
    out = []
    for num, fn in CHECKS:
        if only is not None and num not in only:
            continue
        res = fn(ctx)
        out.append(res)
        if report is not None:
            report(res)
    return out
