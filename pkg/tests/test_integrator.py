import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hillgate import (BoundarySide, ForceField, GeometryError, LevelSetRegion, MetastablePair,
                      NumericalBlowupError, PhasePoint, PotentialSpec, SimulationTimeout,
                      ThermoParams, UsageError)
from hillgate.integrator import (CrossingCounters, Observable, RngStream, Scheme, SimParams, Walker,
                                 detect_crossing, run_collect_chain, run_until_entry,
                                 run_until_exit, step)

FREE = ForceField.conservative(PotentialSpec.free(1))


def noiseless(scheme, gamma=1.0, dt=1e-3, **kw):
    return SimParams(ThermoParams(gamma, 1.0), dt, scheme, noise_scale=0.0, **kw)


def test_step_free_flight_euler():
    # gamma = 1e-300 makes the friction factor round to exactly 1
    x = step(PhasePoint([0.3], [1.7]), FREE, noiseless(Scheme.EULER_MARUYAMA, gamma=1e-300, dt=0.01),
             RngStream(0))
    assert x.q[0] == 0.3 + 0.01 * 1.7
    assert x.p[0] == 1.7


def test_step_harmonic_euler():
    fld = ForceField.conservative(PotentialSpec.harmonic([0.0], 1.0))
    x = step(PhasePoint([1.0], [0.0]), fld, noiseless(Scheme.EULER_MARUYAMA, dt=0.01), RngStream(0))
    assert x.p[0] == pytest.approx(-0.01, abs=1e-16)
    assert x.q[0] == 1.0


def test_step_baoab_ou_factor():
    dt = 0.05
    x = step(PhasePoint([0.0], [1.0]), FREE, noiseless(Scheme.BAOAB, dt=dt), RngStream(0))
    assert x.p[0] == pytest.approx(math.exp(-dt), rel=1e-15)


def test_step_baoab_noise_variance():
    # one O-step from p = 0 has variance (1 - e^{-2 gamma dt}) / beta
    params = SimParams(ThermoParams(1.0, 2.0), dt=0.1)
    rng = RngStream(5)
    ps = np.array([step(PhasePoint([0.0], [0.0]), FREE, params, rng).p[0] for _ in range(20000)])
    target = (1 - math.exp(-0.2)) / 2.0
    assert ps.var() == pytest.approx(target, rel=0.05)


def test_detect_crossing_free_flight():
    reg = LevelSetRegion.ball([0.0], 1.0, "A")
    params = noiseless(Scheme.EULER_MARUYAMA, dt=2.0)
    ev = detect_crossing(PhasePoint([-2.0], [1.0]), PhasePoint([0.0], [1.0]), 3.0, reg, params)
    assert ev.x.q[0] == pytest.approx(-1.0, abs=1e-12)
    assert ev.time == pytest.approx(3.0 + 0.5 * 2.0, abs=1e-11)
    assert ev.side is BoundarySide.GAMMA_MINUS and ev.set_label == "A"


def test_detect_crossing_none_without_sign_change():
    reg = LevelSetRegion.ball([0.0], 1.0, "A")
    params = noiseless(Scheme.EULER_MARUYAMA, dt=0.1)
    assert detect_crossing(PhasePoint([-3.0], [1.0]), PhasePoint([-2.0], [1.0]), 0.0, reg, params) is None


def test_detect_crossing_tangential_discarded():
    reg = LevelSetRegion.ball([0.0, 0.0], 1.0, "A")
    params = noiseless(Scheme.EULER_MARUYAMA, dt=0.1)
    counters = CrossingCounters()
    ev = detect_crossing(PhasePoint([0.0, 0.0], [0.0, 1.0]), PhasePoint([2.0, 0.0], [0.0, 1.0]),
                         0.0, reg, params, counters)
    assert ev is None and counters.gamma_zero == 1


def _harmonic_pair(center):
    fld = ForceField.conservative(PotentialSpec.harmonic([center], 4.0))
    pair = MetastablePair(LevelSetRegion.ball([-1.0], 0.3, "A"), LevelSetRegion.ball([1.0], 0.3, "B"))
    return fld, pair


@pytest.mark.parametrize("scheme", list(Scheme))
def test_run_until_entry_deterministic_pull(scheme):
    fld, pair = _harmonic_pair(-1.0)
    ev, elapsed, steps = run_until_entry(PhasePoint([0.0], [0.0]), fld, pair,
                                         noiseless(scheme, dt=1e-3), RngStream(1))
    assert ev.set_label == "A" and ev.side is BoundarySide.GAMMA_MINUS
    assert ev.x.q[0] == pytest.approx(-0.7, abs=1e-9)
    assert elapsed == pytest.approx(ev.time) and steps > 0


@pytest.mark.parametrize("scheme", list(Scheme))
def test_run_until_exit_deterministic_push(scheme):
    fld, pair = _harmonic_pair(0.0)
    ev, _, _ = run_until_exit(PhasePoint([-1.0], [0.0]), fld, pair, noiseless(scheme), RngStream(1))
    assert ev.set_label == "A" and ev.side is BoundarySide.GAMMA_PLUS
    assert ev.x.q[0] == pytest.approx(-0.7, abs=1e-9)


def test_start_on_exit_side_next_event_is_entry(double_well, pair_1d):
    for seed in range(20):
        w = Walker(PhasePoint([-0.7], [0.4]), double_well, pair_1d, SimParams(), RngStream(seed))
        batch, _ = w.run(0)
        assert batch.side[0] == -1


def test_start_on_entry_side_next_event_is_exit(double_well, pair_1d):
    for seed in range(20):
        w = Walker(PhasePoint([-0.7], [-0.4]), double_well, pair_1d, SimParams(), RngStream(seed))
        batch, _ = w.run(0)
        assert batch.side[0] == 1


def test_run_until_entry_reproducible(double_well, pair_1d):
    x0 = PhasePoint([0.0], [0.0])
    a = run_until_entry(x0, double_well, pair_1d, SimParams(), RngStream(11, 3))
    b = run_until_entry(x0, double_well, pair_1d, SimParams(), RngStream(11, 3))
    c = run_until_entry(x0, double_well, pair_1d, SimParams(), RngStream(11, 4))
    assert a[0] == b[0] and a[1:] == b[1:]
    assert a[0].time != c[0].time


def test_collect_chain_invariants(double_well, pair_1d):
    params = SimParams(dt=1e-3)
    chain = run_collect_chain(PhasePoint([-1.0], [0.0]), double_well, pair_1d, params,
                              RngStream(2), 400, observable=Observable.constant(1.0))
    assert np.all(chain.sides[1:] != chain.sides[:-1])
    assert np.all(np.diff(chain.times) > 0)
    seg = np.diff(chain.times)
    assert np.all(np.abs(chain.g_segment[:-1] - seg) <= params.dt)
    assert np.max(np.abs(chain.g_segment[:-1] - seg)) < 1e-9
    centers = np.array([[-1.0], [1.0]])
    phi = np.sum((chain.q - centers[chain.labels]) ** 2, axis=1) - 0.09
    assert np.max(np.abs(phi)) <= params.crossing_tol
    vn = np.sign(chain.q[:, 0] - centers[chain.labels, 0]) * chain.p[:, 0]
    assert np.all(np.sign(vn) == chain.sides)


def test_collect_chain_deterministic(double_well, pair_1d):
    args = (PhasePoint([-1.0], [0.0]), double_well, pair_1d, SimParams())
    a = run_collect_chain(*args, RngStream(9), 100)
    b = run_collect_chain(*args, RngStream(9), 100)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.p, b.p)


def test_split_runs_equal_one_run(double_well, pair_1d):
    """Events delivered across several calls match one long call."""
    x0 = PhasePoint([-1.0], [0.0])
    w1 = Walker(x0, double_well, pair_1d, SimParams(), RngStream(4))
    full, _ = w1.run(None, max_events=60)
    w2 = Walker(x0, double_well, pair_1d, SimParams(), RngStream(4))
    parts = []
    while sum(len(p) for p in parts) < 60:
        b, _ = w2.run(-1)
        parts.append(b)
    times = np.concatenate([p.time for p in parts])[:60]
    assert np.array_equal(times, full.time)


def test_reference_engine_matches_compiled(double_well, pair_1d):
    x0 = PhasePoint([-0.5], [0.3])
    params = SimParams(dt=2e-3)
    obs = Observable.speed_above(1.0)
    out = []
    for engine in ("compiled", "reference"):
        w = Walker(x0, double_well, pair_1d, params, RngStream(21), observable=obs, engine=engine)
        b, _ = w.run(None, max_events=12)
        out.append(b)
    a, b = out
    assert np.array_equal(a.side, b.side) and np.array_equal(a.label, b.label)
    assert np.allclose(a.time, b.time, rtol=0, atol=1e-9)
    assert np.allclose(a.p, b.p, rtol=0, atol=1e-7)
    assert np.allclose(a.g, b.g, rtol=0, atol=1e-9)


def test_custom_observable_uses_reference_engine(double_well, pair_1d):
    w = Walker(PhasePoint([-1.0], [0.0]), double_well, pair_1d, SimParams(), RngStream(0),
               observable=Observable.custom(lambda q, p: 1.0))
    assert w.engine == "reference"
    b, _ = w.run(None, max_events=2)
    assert np.allclose(b.g[1:], np.diff(b.time), atol=1e-9)


def test_timeout(double_well, pair_1d):
    with pytest.raises(SimulationTimeout):
        run_until_entry(PhasePoint([0.0], [0.0]), double_well, pair_1d,
                        SimParams(max_steps=10), RngStream(0))


def test_blowup_detected(double_well, pair_1d):
    params = SimParams(dt=1.0, scheme=Scheme.EULER_MARUYAMA)
    with pytest.raises(NumericalBlowupError):
        run_until_entry(PhasePoint([3.0], [0.0]), double_well, pair_1d, params, RngStream(0))


def test_invalid_params():
    with pytest.raises(UsageError):
        SimParams(dt=0.0)
    with pytest.raises(UsageError):
        SimParams(crossing_tol=0.0)
    with pytest.raises(UsageError):
        RngStream(0).child(-1)


def test_rng_streams():
    a, b = RngStream(3, 1), RngStream(3, 1)
    assert np.array_equal(a.generator.standard_normal(5), b.generator.standard_normal(5))
    assert not np.array_equal(RngStream(3).child(0).generator.random(4),
                              RngStream(3).child(1).generator.random(4))


def test_observable_config_roundtrip():
    for obs in (Observable.constant(2.5), Observable.speed_above(0.7), Observable.kinetic()):
        back = Observable.from_config(obs.to_config())
        assert back.kind == obs.kind and np.array_equal(back.params, obs.params)
    with pytest.raises(UsageError):
        Observable.from_config({"name": "nope"})


def test_equilibrium_averages(double_well):
    """Without reachable sets, time averages approach Gibbs averages (1e7 steps)."""
    far = MetastablePair(LevelSetRegion.ball([-50.0], 0.1, "A"), LevelSetRegion.ball([50.0], 0.1, "B"))
    params = SimParams(dt=1e-3)
    targets = {"kinetic": (Observable.kinetic(), 0.5),
               "speed_above": (Observable.speed_above(1.0), math.erfc(1 / math.sqrt(2)))}
    for name, (obs, target) in targets.items():
        w = Walker(PhasePoint([-1.0], [0.0]), double_well, far, params, RngStream(77), observable=obs)
        with pytest.raises(SimulationTimeout):
            w.run(0, max_steps=10**7)
        avg = w.g_total / w.time
        assert abs(avg - target) <= 0.02 * target, (name, avg, target)


@given(st.integers(0, 2**32 - 1), st.floats(-1.6, 1.6), st.floats(-2, 2))
def test_alternation_property(seed, q0, p0):
    fld = ForceField.conservative(PotentialSpec.double_well_1d())
    pair = MetastablePair(LevelSetRegion.ball([-1.0], 0.3, "A"), LevelSetRegion.ball([1.0], 0.3, "B"))
    w = Walker(PhasePoint([q0], [p0]), fld, pair, SimParams(dt=2e-3), RngStream(seed))
    b, _ = w.run(None, max_events=20)
    assert np.all(b.side[1:] != b.side[:-1])
    assert np.all(np.diff(b.time) > 0)
