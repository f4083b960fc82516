import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hillgate import InvalidInputError, UsageError
from hillgate.harris_oracle import (FiniteChain, capacities, dirichlet_solution, finite_excursions,
                                    hill_lhs, hill_rhs, pair_chain, random_chain,
                                    reactive_distributions, renewal_pair_check,
                                    representation_check, simulate, stationary, trace_chain)

TWO_STATE = FiniteChain([[0.7, 0.3], [0.1, 0.9]], ["A", "B"])


def test_two_state_closed_form():
    pi = stationary(TWO_STATE)
    assert np.allclose(pi.weights, [0.25, 0.75], atol=1e-15)
    g = np.ones(2)
    assert hill_lhs(TWO_STATE, g) == pytest.approx(10 / 3, rel=1e-13)
    assert hill_rhs(TWO_STATE, pi, g) == pytest.approx(10 / 3, rel=1e-13)
    ab, ba = capacities(TWO_STATE)
    assert ab == pytest.approx(0.075) and ba == pytest.approx(0.075)


def test_doubly_stochastic_uniform():
    P = np.array([[0.2, 0.5, 0.3], [0.3, 0.2, 0.5], [0.5, 0.3, 0.2]])
    assert np.allclose(stationary(FiniteChain(P)).weights, 1 / 3, atol=1e-15)


def test_stationary_permutation_equivariant(gen):
    chain = random_chain(6, gen)
    perm = gen.permutation(6)
    Pp = chain.P[np.ix_(perm, perm)]
    assert np.allclose(stationary(FiniteChain(Pp)).weights, stationary(chain).weights[perm],
                       atol=1e-13)


def test_bad_matrices():
    with pytest.raises(InvalidInputError):
        FiniteChain([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(InvalidInputError):
        FiniteChain([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(InvalidInputError):
        FiniteChain([[0.5, 0.5], [0.5, 0.5]], ["A", "A"])
    with pytest.raises(UsageError):
        FiniteChain([[0.5, 0.5], [0.5, 0.5]]).A


def test_reversible_chain_entrance_equals_exit():
    # birth-death chains are reversible
    P = np.array([[0.6, 0.4, 0, 0], [0.3, 0.3, 0.4, 0], [0, 0.2, 0.5, 0.3], [0, 0, 0.5, 0.5]])
    chain = FiniteChain(P, ["A", "A", "B", "B"])
    re_a, ex_a, re_b, ex_b = reactive_distributions(chain)
    assert np.allclose(re_a.weights, ex_a.weights, atol=1e-14)
    assert np.allclose(re_b.weights, ex_b.weights, atol=1e-14)
    ab, ba = capacities(chain)
    assert ab == pytest.approx(ba, rel=1e-13)


def test_capacities_equal_for_any_chain(gen):
    for _ in range(20):
        ab, ba = capacities(random_chain(int(gen.integers(2, 8)), gen))
        assert ab == pytest.approx(ba, rel=1e-12)


def test_zero_and_linear_in_g(gen):
    chain = random_chain(6, gen)
    pi = stationary(chain)
    assert hill_lhs(chain, np.zeros(6)) == 0.0
    g1, g2 = gen.exponential(size=6), gen.exponential(size=6)
    lhs = hill_lhs(chain, 2 * g1 + 3 * g2)
    assert lhs == pytest.approx(2 * hill_lhs(chain, g1) + 3 * hill_lhs(chain, g2), rel=1e-12)
    assert hill_rhs(chain, pi, g1) == pytest.approx(hill_lhs(chain, g1), rel=1e-10)


def test_dirichlet_solution_vanishes_on_b(gen):
    chain = random_chain(5, gen)
    f = dirichlet_solution(chain, np.ones(5))
    assert np.all(f[chain.B] == 0) and np.all(f[chain.A] >= 1)


def test_representation_full_space_and_indicator(gen):
    chain = random_chain(6, gen)
    pi = stationary(chain)
    g = gen.exponential(size=6)
    lhs, rhs = representation_check(chain, pi, np.arange(6), g)
    assert lhs == pytest.approx(rhs, rel=1e-13) and rhs == pytest.approx(pi(g), rel=1e-13)
    C = np.array([1, 4])
    ind = np.zeros(6)
    ind[C] = 1.0
    lhs, rhs = representation_check(chain, pi, C, ind)
    assert lhs == pytest.approx(1.0, rel=1e-13) and rhs == pytest.approx(1.0, rel=1e-13)
    # return time to C: mean 1 / pi(C)
    lhs, _ = representation_check(chain, pi, C, np.ones(6))
    assert lhs == pytest.approx(1 / pi.weights[C].sum(), rel=1e-12)


@settings(max_examples=50)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_random_chain_identities(n, seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(n, rng)
    pi = stationary(chain)
    assert np.max(np.abs(pi.weights @ chain.P - pi.weights)) <= 1e-12
    g = rng.exponential(size=n)
    lhs, rhs = hill_lhs(chain, g), hill_rhs(chain, pi, g)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))
    C = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
    a, b = representation_check(chain, pi, C, g)
    assert abs(a - b) <= 1e-10 * max(1.0, abs(b))


def test_pair_chain_stationary(gen):
    chain = random_chain(4, gen)
    pchain, pairs = pair_chain(chain)
    pi = stationary(chain).weights
    mu = stationary(pchain).weights
    expected = np.array([pi[i] * chain.P[i, j] for i, j in pairs])
    assert np.allclose(mu, expected, atol=1e-13)


def test_trace_chain_stationary(gen):
    chain = random_chain(6, gen)
    C = np.array([0, 2, 5])
    pi = stationary(chain).weights
    tr = stationary(trace_chain(chain, C)).weights
    assert np.allclose(tr, pi[C] / pi[C].sum(), atol=1e-13)


def test_trace_of_pair_gives_reactive_entrance(gen):
    chain = random_chain(5, gen)
    pchain, pairs = pair_chain(chain)
    part = chain.partition
    C = np.array([k for k, (i, j) in enumerate(pairs) if part[i] == 1 and part[j] == 0])
    tr = stationary(trace_chain(pchain, C)).weights
    marginal = np.zeros(chain.n)
    for w, k in zip(tr, C):
        marginal[pairs[k][1]] += w
    assert np.allclose(marginal, reactive_distributions(chain)[0].weights, atol=1e-12)


def test_renewal_cycle_chain():
    P = np.array([[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0]], dtype=float)
    res = renewal_pair_check(FiniteChain(P, ["A", "A", "B", "B"]), np.array([1, 2, 0, 0]))
    assert res.score_independent and res.kernel_independent and not res.inconclusive


def test_renewal_score_factorization():
    P = np.array([[0.4, 0.3, 0.2, 0.1], [0.2, 0.3, 0.1, 0.4],
                  [0.3, 0.1, 0.4, 0.2], [0.1, 0.5, 0.2, 0.2]])
    res = renewal_pair_check(FiniteChain(P, ["A", "A", "B", "B"]), np.array([1, 0, 0, 0]))
    assert not res.inconclusive
    assert res.score_tv <= 1e-10 and res.score_independent


def test_renewal_kernel_can_depend_on_score():
    P = np.array([[0.1, 0.5, 0.0, 0.0, 0.4, 0.0],
                  [0.0, 0.2, 0.5, 0.0, 0.0, 0.3],
                  [0.3, 0.0, 0.2, 0.5, 0.0, 0.0],
                  [0.4, 0.1, 0.0, 0.3, 0.2, 0.0],
                  [0.5, 0.0, 0.0, 0.0, 0.2, 0.3],
                  [0.0, 0.0, 0.6, 0.0, 0.0, 0.4]])
    res = renewal_pair_check(FiniteChain(P, ["A"] * 4 + ["B"] * 2), np.array([1, 0, 2, 0, 0, 0]))
    assert res.score_tv <= 1e-10
    assert res.kernel_tv > 1e-3


def test_renewal_bad_g():
    with pytest.raises(UsageError):
        renewal_pair_check(TWO_STATE, np.array([0.5, 0.0]))


def test_json_round_trip(tmp_path, gen):
    chain = random_chain(5, gen)
    path = tmp_path / "c.json"
    chain.to_json(path)
    back = FiniteChain.from_json(path)
    assert np.array_equal(back.P, chain.P) and np.array_equal(back.partition, chain.partition)


def test_simulation_frequencies(gen):
    chain = random_chain(4, gen)
    path = simulate(chain, 200_000, gen)
    states = path.q[:, 0].astype(int)
    freq = np.bincount(states, minlength=4) / states.size
    assert np.allclose(freq, stationary(chain).weights, atol=0.01)
    ex = finite_excursions(chain, np.ones(4), 1000, gen)
    assert len(ex) == 1000 and np.all(ex.tau1 == 1)
