import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from paoneshot.fenwick import FenwickTree
from paoneshot.net_core import DataError, EventSequence
from paoneshot.sg_sim import (Constant, Linear, LogDamped, PowerLaw, Sequence, SGConfig,
                              SimState, Tabulated, _initial_state, hat_p, replicate_seed,
                              seed_sequence, simulate, simulate_counts,
                              simulate_replicates)


# --- attachment functions -----------------------------------------------------

def test_power_law_values():
    np.testing.assert_allclose(PowerLaw(1.0).values(4), [1, 1, 2, 3])
    np.testing.assert_allclose(PowerLaw(0.5)([0, 4]), [1, 2])


def test_log_damped_values():
    v = LogDamped(1.0).values(3)
    np.testing.assert_allclose(v, [1, 1, 2 / (1 + np.log(2))])
    with pytest.raises(ValueError):
        LogDamped(-1)


def test_linear_and_tabulated():
    np.testing.assert_allclose(Linear(1.0).values(3), [1, 2, 3])
    t = Tabulated([1.0, 2.0, 5.0])
    np.testing.assert_allclose(t.values(5), [1, 2, 5, 5, 5])
    np.testing.assert_allclose(t.values(2), [1, 2])
    with pytest.raises(ValueError):
        Tabulated([1.0, 0.0])
    with pytest.raises(ValueError):
        Linear(0.0)


# --- configuration ----------------------------------------------------------------

@pytest.mark.parametrize("N,E,expected", [
    (12, 8, 10 / 18),
    (2, 0, 1e-6),
    (87272, 1148072, 87270 / 1235342),
])
def test_hat_p(N, E, expected):
    assert hat_p(N, E) == pytest.approx(expected, rel=1e-12)


def test_hat_p_enron_scale():
    assert hat_p(87272, 1148072) == pytest.approx(0.0706, abs=5e-5)
    with pytest.raises(DataError):
        hat_p(1, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        Constant(1.0)
    with pytest.raises(ValueError):
        Constant(0.0)
    with pytest.raises(DataError):
        SGConfig(10, Sequence(EventSequence(np.ones(5, bool))))
    with pytest.raises(ValueError):
        SGConfig(0, Constant(0.5))


# --- forced schedules ---------------------------------------------------------------

def test_all_node_sequence():
    T = 500
    res = simulate(SGConfig(T, Sequence(EventSequence(np.ones(T - 1, bool)))), PowerLaw(1))
    assert res.snapshot.N == T + 1
    assert res.snapshot.E == 0


def test_all_edge_sequence():
    T = 500
    res = simulate(SGConfig(T, Sequence(EventSequence(np.zeros(T - 1, bool)))), Linear(1.0))
    assert res.snapshot.N == 2
    assert res.snapshot.E == T - 1
    assert sum(res.snapshot.histogram.counts.values()) == 2


def test_size_identity():
    res = simulate(SGConfig(3000, Constant(0.3), seed=5), PowerLaw(1))
    assert res.snapshot.N + res.snapshot.E == 3000 + 1


# --- sampler ----------------------------------------------------------------------

def test_single_node_always_chosen():
    state = SimState.from_degrees([4], PowerLaw(1.0))
    draws = state.sample_destinations(np.random.default_rng(1), 1000)
    assert np.all(draws == 0)


def test_equal_weights_via_floor():
    state = SimState.from_degrees([0, 0, 1], PowerLaw(1.0))
    freq = np.bincount(state.sample_destinations(np.random.default_rng(2), 300_000)) / 300_000
    np.testing.assert_allclose(freq, 1 / 3, atol=0.005)


def test_weighted_law_within_three_sigma():
    state = SimState.from_degrees([0, 1, 3], PowerLaw(1.0))
    n = 1_000_000
    counts = np.bincount(state.sample_destinations(np.random.default_rng(3), n), minlength=3)
    p = np.array([0.2, 0.2, 0.6])
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) < 3 * sigma)


def test_single_draw_matches_batch():
    state = SimState.from_degrees([0, 1, 3, 3], PowerLaw(1.0))
    a = state.sample_destination(np.random.default_rng(9))
    b = state.sample_destinations(np.random.default_rng(9), 1)
    assert a == b[0]


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(0, 12), min_size=2, max_size=100),
       st.floats(0.2, 1.5), st.integers(0, 2**32 - 1))
def test_sampler_matches_linear_scan(degrees, alpha, seed):
    A = PowerLaw(alpha)
    state = SimState.from_degrees(degrees, A)
    w = A(np.array(degrees))
    p = w / w.sum()
    n = 100_000
    counts = np.bincount(state.sample_destinations(np.random.default_rng(seed), n),
                         minlength=len(degrees))
    # merge cells with small expectations before the chi-square test
    order = np.argsort(p)
    groups, acc, cur = [], 0.0, []
    for i in order:
        cur.append(i)
        acc += p[i]
        if acc * n >= 20:
            groups.append(cur)
            cur, acc = [], 0.0
    if cur:
        groups[-1].extend(cur)
    obs = np.array([counts[g].sum() for g in groups])
    exp = np.array([p[g].sum() * n for g in groups])
    if len(groups) > 1:
        assert stats.chisquare(obs, exp).pvalue > 1e-4


# --- weight structure --------------------------------------------------------------

def test_fenwick_prefix_sums_after_updates():
    rng = np.random.default_rng(4)
    vals = rng.random(37)
    ft = FenwickTree.from_values(vals)
    for _ in range(2000):
        i = int(rng.integers(37))
        d = rng.normal()
        vals[i] += d
        ft.add(i, d)
    np.testing.assert_allclose([ft.prefix(i) for i in range(38)],
                               np.concatenate([[0], np.cumsum(vals)]), rtol=1e-10, atol=1e-10)
    assert ft.total == pytest.approx(vals.sum())


def test_fenwick_search():
    ft = FenwickTree.from_values([1.0, 0.0, 2.0, 1.0])
    assert ft.search(0.5)[0] == 0
    assert ft.search(1.5) == (2, 0.5)
    assert ft.search(3.2)[0] == 3


def test_total_weight_after_million_updates():
    A = PowerLaw(0.75)
    T = 1_000_001
    state = _initial_state(T, A, track_nodes=False)
    state.run(T - 1, np.random.default_rng(11), Constant(0.5))
    assert state.H == pytest.approx(state.exact_H(), rel=1e-9)


def test_buckets_track_degrees():
    A = PowerLaw(1.0)
    state = _initial_state(2000, A, track_nodes=True)
    state.run(1999, np.random.default_rng(5), Constant(0.4))
    deg = state.degrees()
    nk = np.bincount(deg)
    np.testing.assert_array_equal(state.nk[:len(nk)], nk)
    # the bucket permutation lists nodes by descending degree
    assert np.all(np.diff(deg[state.perm[:state.n_nodes]]) <= 0)


# --- determinism and seeding --------------------------------------------------------

def test_same_seed_same_network():
    cfg = SGConfig(5000, Constant(0.5), seed=42, record_trace=True)
    a = simulate(cfg, PowerLaw(1))
    b = simulate(cfg, PowerLaw(1))
    np.testing.assert_array_equal(a.trace.dst, b.trace.dst)
    np.testing.assert_array_equal(a.trace.src, b.trace.src)
    assert a.snapshot.histogram == b.snapshot.histogram


def test_trace_recording_does_not_change_histogram():
    a = simulate(SGConfig(5000, Constant(0.5), seed=1), PowerLaw(0.8))
    b = simulate(SGConfig(5000, Constant(0.5), seed=1, record_trace=True), PowerLaw(0.8))
    assert a.snapshot.histogram == b.snapshot.histogram
    assert b.trace.snapshot().histogram == b.snapshot.histogram


def test_fast_counts_agree_with_full_run():
    ss = seed_sequence(3, 1, 2)
    nk = simulate_counts(4000, Constant(0.5), PowerLaw(1), ss)
    assert nk.sum() + np.dot(np.arange(len(nk)), nk) == 4001


def test_replicates_independent_of_threads():
    cfg = SGConfig(3000, Constant(0.5), seed=8)
    one = simulate_replicates(cfg, PowerLaw(1), 4, threads=1)
    many = simulate_replicates(cfg, PowerLaw(1), 4, threads=3)
    for a, b in zip(one, many):
        assert a.snapshot.histogram == b.snapshot.histogram
    assert len({replicate_seed(8, i) for i in range(100)}) == 100
    assert len({r.snapshot.histogram.max_degree for r in one}) > 1


def test_source_stream_does_not_touch_histogram():
    # the same growth stream with different source draws yields the same degrees
    A = PowerLaw(1.0)
    s1 = _initial_state(3000, A, True)
    s2 = _initial_state(3000, A, True)
    s1.run(2999, np.random.default_rng(1), Constant(0.5), np.random.default_rng(2))
    s2.run(2999, np.random.default_rng(1), Constant(0.5), np.random.default_rng(3))
    np.testing.assert_array_equal(s1.nk, s2.nk)
