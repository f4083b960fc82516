import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hillgate import InvalidInputError, UsageError
from hillgate.chains import (BoundaryChain, empirical_reactive_entrance, empirical_reactive_exit,
                             entry_subchain, exit_subchain, reactive_indexing, transition_samples)


def entry_chain(labels, times=None):
    n = len(labels)
    times = np.arange(1.0, n + 1) if times is None else times
    return BoundaryChain(times, -np.ones(n), labels, np.zeros((n, 1)), np.ones((n, 1)))


def naive_indexing(labels):
    """Recursive first-hitting definition, rescanning from scratch each time."""
    re_a, re_b = [], []
    start, want = 0, "A"
    while True:
        nxt = next((i for i in range(start, len(labels)) if labels[i] == want), None)
        if nxt is None:
            break
        (re_a if want == "A" else re_b).append(nxt)
        start, want = nxt + 1, "B" if want == "A" else "A"
    return tuple(re_a), tuple(re_b)


def test_reactive_indexing_mixed():
    ri = reactive_indexing(list("BBAABA"))
    assert ri.eta_re_A == (2, 5) and ri.eta_re_B == (4,)
    assert ri.eta_ex_A == (3,) and ri.eta_ex_B == (4,)


def test_reactive_indexing_short():
    ri = reactive_indexing(["A", "B"])
    assert ri.eta_re_A == (0,) and ri.eta_re_B == (1,) and ri.eta_ex_A == (0,) and ri.eta_ex_B == ()


def test_reactive_indexing_never_b():
    ri = reactive_indexing(["A", "A", "A"])
    assert ri.eta_re_A == (0,) and ri.eta_re_B == ()


def test_reactive_indexing_accepts_codes():
    assert reactive_indexing([1, 1, 0, 0, 1, 0]) == reactive_indexing(list("BBAABA"))


def test_reactive_indexing_rejects_bad_labels():
    with pytest.raises(UsageError):
        reactive_indexing(["A", "C"])
    with pytest.raises(UsageError):
        reactive_indexing([])


@given(st.lists(st.sampled_from("AB"), min_size=1, max_size=60))
def test_reactive_indexing_matches_naive(labels):
    ri = reactive_indexing(labels)
    assert (ri.eta_re_A, ri.eta_re_B) == naive_indexing(labels)


@given(st.lists(st.sampled_from("AB"), min_size=1, max_size=60))
def test_reactive_indexing_interleaves(labels):
    ri = reactive_indexing(labels)
    merged = []
    for k in range(len(ri.eta_re_A)):
        merged.append(ri.eta_re_A[k])
        if k < len(ri.eta_re_B):
            merged.append(ri.eta_re_B[k])
    assert len(merged) == len(ri.eta_re_A) + len(ri.eta_re_B)
    assert all(a < b for a, b in zip(merged, merged[1:]))
    for k, e in enumerate(ri.eta_ex_A):
        assert ri.eta_re_A[k] <= e < ri.eta_re_B[k] and labels[e] == "A"
    for k, e in enumerate(ri.eta_ex_B):
        assert ri.eta_re_B[k] <= e < ri.eta_re_A[k + 1] and labels[e] == "B"


@given(st.lists(st.sampled_from("AB"), min_size=1, max_size=60))
def test_transition_count(labels):
    ch = entry_chain(labels)
    ri = reactive_indexing(labels)
    samples = transition_samples(ch)
    assert len(samples) == len(ri.eta_re_B)
    assert all(s.duration >= 0 for s in samples)


def test_transition_duration():
    samples = transition_samples(entry_chain(["A", "B"], np.array([1.0, 3.5])))
    assert len(samples) == 1 and samples[0].duration == 2.5


def test_no_transition():
    assert transition_samples(entry_chain(["B", "A", "A"])) == []
    assert transition_samples(BoundaryChain.empty()) == []


def sigma_chain(n_pairs, gen):
    labels = gen.integers(0, 2, n_pairs).repeat(2)
    sides = np.tile([1, -1], n_pairs)
    times = np.cumsum(gen.exponential(1.0, 2 * n_pairs))
    g = gen.random(2 * n_pairs)
    return BoundaryChain(times, sides, labels, gen.normal(size=(2 * n_pairs, 1)),
                         gen.normal(size=(2 * n_pairs, 1)), g)


def test_entry_subchain_counts_and_labels(gen):
    ch = sigma_chain(25, gen)
    ent = entry_subchain(ch)
    assert len(ent) == 25
    assert np.array_equal(ent.labels, ch.labels[1::2])
    assert np.all(ent.sides == -1)
    assert len(exit_subchain(ch)) == 25
    # integrals between entries add the two segments in between
    assert np.allclose(ent.g_segment[:-1], ch.g_segment[1:-1:2] + ch.g_segment[2::2])
    assert np.isnan(ent.g_segment[-1])


def test_entry_subchain_empty():
    assert len(entry_subchain(BoundaryChain.empty())) == 0


def test_validation_errors():
    with pytest.raises(InvalidInputError):
        BoundaryChain([1.0, 0.5], [1, -1], [0, 0], np.zeros((2, 1)), np.zeros((2, 1)))
    with pytest.raises(InvalidInputError):
        BoundaryChain([1.0, 2.0, 3.0], [1, 1, -1], [0, 0, 0], np.zeros((3, 1)), np.zeros((3, 1)))


def test_empirical_reactive_laws():
    labels = list("BBAABAAB")
    ch = entry_chain(labels)
    ri = reactive_indexing(labels)
    re_a = empirical_reactive_entrance(ch, "A")
    re_b = empirical_reactive_entrance(ch, "B")
    assert len(re_a) == len(ri.eta_re_A) and re_a.indices[0] == 2
    assert set(re_a.indices).isdisjoint(re_b.indices)
    assert np.isclose(re_a.weights.sum(), 1.0)
    ex_a = empirical_reactive_exit(ch, "A")
    assert tuple(ex_a.indices) == ri.eta_ex_A


def test_csv_roundtrip(tmp_path, gen):
    ch = sigma_chain(10, gen)
    ch.g_segment[-1] = np.nan
    path = tmp_path / "chain.csv"
    ch.to_csv(path)
    assert path.read_text().startswith("# format_version=1")
    back = BoundaryChain.from_csv(path)
    for a in ("times", "sides", "labels", "q", "p"):
        assert np.array_equal(getattr(back, a), getattr(ch, a))
    assert np.array_equal(back.g_segment[:-1], ch.g_segment[:-1]) and np.isnan(back.g_segment[-1])
