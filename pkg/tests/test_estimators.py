import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hillgate import (DegenerateAMSError, InfiniteEstimateError, InsufficientDataError,
                      InvalidInputError, UsageError)
from hillgate.chains import TransitionSample
from hillgate.estimators import (AmsParams, Estimate, ExcursionSample, ExcursionSet, Moments,
                                 PlusSideResult, ams_probability, batch_means, capacity_estimate,
                                 collect_excursions, decomposed_hill, direct_transition_time,
                                 hill_statistic, plus_side_initialization)
from hillgate.fields import ThermoParams
from hillgate.harris_oracle import (FiniteChain, finite_excursions, hill_lhs, hill_rhs, random_chain,
                                    simulate)
from hillgate.integrator import Observable, RngStream, SimParams

THREE_STATE = FiniteChain([[0.5, 0.3, 0.2], [0.2, 0.6, 0.2], [0.3, 0.3, 0.4]], ["A", "A", "B"])


def test_hill_all_hits_constant_time():
    ex = ExcursionSet(np.full(10, 2.5), np.ones(10, bool))
    est = hill_statistic(ex)
    assert est.value == 2.5 and est.std_error == 0.0 and est.n_samples == 10


def test_hill_small_example():
    ex = [ExcursionSample(1.0, False, 1.0), ExcursionSample(3.0, True, 3.0)]
    assert hill_statistic(ex).value == pytest.approx(4.0)
    assert decomposed_hill(ex).value == pytest.approx(4.0)


def test_hill_observable_mode():
    ex = ExcursionSet([1.0, 3.0], [False, True], g_integral=[0.5, 1.5])
    assert hill_statistic(ex, "observable").value == pytest.approx(2.0)
    with pytest.raises(UsageError):
        hill_statistic(ex, "median")


def test_hill_no_hits_is_infinite():
    with pytest.raises(InfiniteEstimateError):
        hill_statistic(ExcursionSet([1.0, 2.0], [False, False]))


def test_decomposed_from_components():
    est = decomposed_hill(stay_time=Estimate(2.0, 0.0, 10), p=Estimate(0.25, 0.0, 10),
                          reach_time=Estimate(5.0, 0.0, 10))
    assert est.value == pytest.approx(11.0)
    only_hits = decomposed_hill(p=Estimate(1.0, 0.0, 5), reach_time=Estimate(4.0, 0.1, 5))
    assert only_hits.value == 4.0 and only_hits.std_error == pytest.approx(0.1)
    with pytest.raises(InvalidInputError):
        decomposed_hill(p=Estimate(0.0, 0.0, 5), reach_time=Estimate(4.0, 0.1, 5))
    with pytest.raises(UsageError):
        decomposed_hill(p=Estimate(0.5, 0.0, 5), reach_time=Estimate(4.0, 0.1, 5))


@settings(max_examples=60)
@given(st.lists(st.tuples(st.floats(0.01, 100), st.booleans()), min_size=1, max_size=40)
       .filter(lambda xs: any(h for _, h in xs)))
def test_decomposed_equals_ratio(rows):
    ex = ExcursionSet([t for t, _ in rows], [h for _, h in rows])
    assert decomposed_hill(ex).value == pytest.approx(hill_statistic(ex).value, rel=1e-10)


def test_direct_small_example():
    est = direct_transition_time([TransitionSample(2.5), TransitionSample(3.5)])
    assert est.value == 3.0
    with pytest.raises(InsufficientDataError):
        direct_transition_time([TransitionSample(1.0)])


def test_capacity_small_example():
    ab, ba = capacity_estimate(["A", "B", "A", "B"])
    assert ab.value == pytest.approx(2 / 3) and ba.value == pytest.approx(1 / 3)
    ab, ba = capacity_estimate(["A"] * 6)
    assert ab.value == 0.0 and ba.value == 0.0
    with pytest.raises(InsufficientDataError):
        capacity_estimate(["A"])


def test_batch_means_iid_stderr(gen):
    x = gen.normal(size=10_000)
    m, se = batch_means(x)
    assert abs(m) < 4 * se
    assert se == pytest.approx(0.01, rel=0.25)


def test_moments_merge(gen):
    x = gen.normal(size=101)
    whole = Moments.of(x)
    parts = Moments.of(x[:40]).merge(Moments.of(x[40:]))
    assert parts.mean == pytest.approx(whole.mean) and parts.var == pytest.approx(whole.var)
    assert whole.var == pytest.approx(np.var(x, ddof=1))


def test_finite_chain_direct_matches_exact():
    g = np.array([1.0, 2.0, 0.0])
    path = simulate(THREE_STATE, 400_000, np.random.default_rng(11), g=g)
    exact_time = hill_lhs(THREE_STATE, np.ones(3))
    exact_g = hill_lhs(THREE_STATE, g)
    t = direct_transition_time(path)
    obs = direct_transition_time(path, observable=True)
    assert abs(t.value - exact_time) <= 3 * t.std_error
    assert abs(obs.value - exact_g) <= 3 * obs.std_error


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_finite_chain_hill_ratio_matches_exact(seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(5, rng)
    g = rng.exponential(size=5)
    ex = finite_excursions(chain, g, 200_000, rng)
    est = hill_statistic(ex, "observable")
    assert abs(est.value - hill_rhs(chain, None, g)) <= 3 * est.std_error
    assert hill_lhs(chain, g) == pytest.approx(hill_rhs(chain, None, g), rel=1e-10)


def test_plus_side_result_additivity():
    r = PlusSideResult(np.array([True, False, False, True]), np.array([1.0, 2.0, 3.0, 2.0]),
                       np.array([0.5, 1.5]), np.zeros(4))
    assert r.mean_return_time().value == pytest.approx(1.0 + 2.0)
    assert r.hit_probability().value == 0.5
    assert r.hill_estimate().value == pytest.approx(6.0)


def test_ams_params_validation():
    for bad in (dict(n_replicas=1), dict(kill_count=0), dict(kill_count=100), dict(init="x"),
                dict(on_extinction="x"), dict(n_runs=0)):
        with pytest.raises(UsageError):
            AmsParams(**bad)


# -------------------------------------------------------------- Langevin runs

@pytest.fixture
def fast_params():
    return SimParams(ThermoParams(1.0, 1.0), dt=2e-3)


def test_excursions_alternate_and_return(double_well, pair_1d, fast_params):
    ex = collect_excursions(pair_1d, double_well, fast_params, None, RngStream(3), 200,
                            observable=Observable.constant(2.0))
    assert np.all(ex.tau_exit < ex.tau1)
    assert np.all(ex.start_label == 0)
    assert np.array_equal(ex.hit_B, ex.end_label == 1)
    assert np.allclose(ex.g_integral, 2.0 * ex.tau1, rtol=1e-9)
    d = np.abs(ex.end_q[:, 0] - np.where(ex.end_label == 1, 1.0, -1.0))
    assert np.allclose(d, 0.3, atol=1e-9)
    again = collect_excursions(pair_1d, double_well, fast_params, None, RngStream(3), 200,
                               observable=Observable.constant(2.0))
    assert np.array_equal(ex.tau1, again.tau1)


def test_excursions_both_sets(double_well, pair_1d, fast_params):
    ex = collect_excursions(pair_1d, double_well, fast_params, None, RngStream(4), 300, label=None)
    assert set(np.unique(ex.start_label)) == {0, 1}
    b = ex.started_in("B")
    assert np.array_equal(b.hit_B, b.end_label == 0)


def test_plus_side_hits_match_excursions(double_well, pair_1d, fast_params):
    r = plus_side_initialization(pair_1d, double_well, fast_params, None, RngStream(5), 3000,
                                 n_exit_leg=0)
    ex = collect_excursions(pair_1d, double_well, fast_params, None, RngStream(6), 3000)
    p1, p2 = r.hit_probability(), Moments.of(ex.hit_B.astype(float)).estimate()
    assert abs(p1.value - p2.value) <= 3 * math.hypot(p1.std_error, p2.std_error)
    assert r.tau_plus.size == 0


def test_ams_reproducible_and_bounded(double_well, pair_1d, fast_params):
    ams = AmsParams(n_replicas=10, n_runs=2)
    a, paths = ams_probability(pair_1d, double_well, fast_params, None, ams, RngStream(8))
    b, _ = ams_probability(pair_1d, double_well, fast_params, None, ams, RngStream(8))
    assert a.value == b.value and 0 < a.value <= 1
    assert paths.durations.size > 0 and np.all(paths.durations > 0)


def test_ams_degenerate_coordinate(double_well, pair_1d):
    params = SimParams(ThermoParams(1.0, 30.0), dt=2e-3)
    flat = AmsParams(n_replicas=4, reaction_coordinate=lambda q: np.zeros(len(q)))
    with pytest.raises(DegenerateAMSError):
        ams_probability(pair_1d, double_well, params, None, flat, RngStream(9))
    zero = AmsParams(n_replicas=4, reaction_coordinate=lambda q: np.zeros(len(q)),
                     on_extinction="zero")
    est, _ = ams_probability(pair_1d, double_well, params, None, zero, RngStream(9))
    assert est.value == 0.0
