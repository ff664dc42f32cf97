import io
import math

import pytest
from hypothesis import given, settings, strategies as st

from lae2sim.swucb import BanditConfig, SlidingWindowUCB, e2_evict

from oracles import verbatim_ucb


def bandit(gamma=0.9, tau=8, B=-1.0, cap=10.0, requests=(), evictions=(), t=None):
    b = SlidingWindowUCB(BanditConfig(gamma, tau, B, cap))
    events = sorted([(s, 0, c) for s, c in requests] + [(s, 1, c) for s, c in evictions])
    for s, kind, c in events:
        (b.record_eviction if kind else b.record_request)(s, c)
    if t is not None:
        b.advance(t)
    return b


class TestEmpiricalPopularity:
    def test_unseen(self):
        assert bandit(requests=[(1, 3)], t=5).empirical_popularity(7) == 0.0

    def test_hand_computed(self):
        reqs = [(s, 9) for s in range(9)] + [(9, 1), (10, 1)]
        b = bandit(gamma=0.9, tau=8, requests=reqs, t=10)
        assert b.empirical_popularity(1) == pytest.approx(0.2375, abs=1e-15)

    @pytest.mark.parametrize("gamma,tau", [(0.5, 3), (0.9, 8), (0.99, 50)])
    def test_every_slot_closed_form(self, gamma, tau):
        t = 3 * tau
        b = bandit(gamma=gamma, tau=tau, requests=[(s, 4) for s in range(t + 1)], t=t)
        expected = (1 - gamma ** tau) / (tau * (1 - gamma))
        assert b.empirical_popularity(4) == pytest.approx(expected, rel=1e-12)


class TestEvictionCount:
    def test_never(self):
        assert bandit(t=20).eviction_count(2) == 0

    def test_in_window(self):
        t = 20
        b = bandit(tau=5, evictions=[(t - 1, 2), (t - 3, 2)], t=t)
        assert b.eviction_count(2) == 2

    def test_boundary_excluded(self):
        t, tau = 20, 5
        assert bandit(tau=tau, evictions=[(t - tau, 2)], t=t).eviction_count(2) == 0
        assert bandit(tau=tau, evictions=[(t - tau + 1, 2)], t=t).eviction_count(2) == 1


class TestUcbScore:
    def test_hand_computed(self):
        reqs = [(s, 9) for s in range(9)] + [(9, 1), (10, 1)]
        b = bandit(gamma=0.9, tau=8, requests=reqs, evictions=[(4, 1), (6, 1)], t=10)
        assert b.eviction_count(1) == 2
        assert b.ucb_score(1) == pytest.approx(0.2375 - math.sqrt(math.log(8) / 2), abs=1e-12)
        assert b.ucb_score(1) == pytest.approx(-0.78217, abs=1e-5)

    def test_clamped_when_never_evicted(self):
        b = bandit(cap=10.0, requests=[(s, 1) for s in range(12)], t=11)
        assert b.ucb_score(1) == pytest.approx(b.empirical_popularity(1) - 10.0)

    def test_time_zero_clamped(self):
        b = bandit(cap=4.0, requests=[(0, 1)], evictions=[(0, 2)], t=0)
        assert b.ucb_score(2) == pytest.approx(-4.0)

    def test_scaling_B_keeps_argmin(self):
        evs = [(2, 0), (3, 1), (5, 0), (6, 1)]
        for B in (-0.5, -1.0, -7.0):
            b = bandit(B=B, requests=[(s, s % 3) for s in range(10)], evictions=evs, t=9)
            assert b.eviction_count(0) == b.eviction_count(1) == 2
            assert b.select([0, 1]) == 1


class TestSelect:
    def test_single(self):
        assert bandit(t=3).select([5]) == 5

    def test_lower_popularity_loses(self):
        reqs = [(1, 0), (2, 1), (3, 1)]
        b = bandit(requests=reqs, evictions=[(1, 0), (2, 1)], t=3)
        assert b.select([0, 1]) == 0

    def test_never_evicted_explored_first(self):
        # equal popularity, a evicted 4 times, b never: b scores 0 - 10
        evs = [(1, 0), (2, 0), (3, 0), (4, 0)]
        b = bandit(tau=8, B=-1.0, cap=10.0, evictions=evs, t=8)
        assert b.ucb_score(1) == pytest.approx(-10.0)
        assert b.ucb_score(0) == pytest.approx(-math.sqrt(math.log(8) / 4))
        assert b.select([0, 1]) == 1

    def test_tie_prefers_more_evictions_then_smaller_id(self):
        b = bandit(t=9)
        assert b.select([4, 2, 3]) == 2
        b = bandit(tau=8, B=-1.0, cap=math.sqrt(math.log(8)), evictions=[(3, 5)], t=8)
        # both score -sqrt(log 8): id 5 by its eviction, id 2 by the clamp
        assert b.ucb_score(2) == pytest.approx(b.ucb_score(5), abs=1e-15)
        assert b.select([2, 5]) == 5

    def test_empty(self):
        with pytest.raises(ValueError):
            bandit(t=1).select([])

    def test_e2_evict_alias(self):
        b = bandit(requests=[(1, 0)], t=2)
        assert e2_evict(b, [0, 1]) == b.select([0, 1])


class TestWindow:
    def test_unrelated_traffic_clears_state(self):
        tau = 6
        b = bandit(tau=tau, requests=[(s, 1) for s in range(10)], evictions=[(8, 1), (9, 1)])
        assert b.empirical_popularity(1) > 0 and b.eviction_count(1) == 2
        for s in range(10, 10 + tau):
            b.record_request(s, 2)
        assert b.empirical_popularity(1) == 0.0
        assert b.eviction_count(1) == 0

    def test_logs_bounded(self):
        tau = 4
        b = bandit(tau=tau, requests=[(s, s % 3) for s in range(50)],
                   evictions=[(s, s % 2) for s in range(50)], t=49)
        assert len(b.request_log()) == tau
        assert len(b.eviction_log()) == tau
        assert all(49 - tau < s <= 49 for s, _ in b.request_log() + b.eviction_log())

    def test_time_goes_forward(self):
        b = bandit(t=5)
        with pytest.raises(ValueError):
            b.advance(4)


@pytest.mark.parametrize("kw", [dict(gamma=1.0), dict(gamma=0.0), dict(tau=0), dict(B=0.0),
                                dict(padding_cap=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        BanditConfig(**kw)


events = st.lists(st.tuples(st.integers(0, 5), st.booleans(), st.integers(0, 5)), max_size=80)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 0.999), st.integers(1, 20), st.floats(-5, -0.01), st.floats(0.1, 20),
       events, st.integers(0, 25))
def test_matches_verbatim_formula(gamma, tau, B, cap, evs, extra):
    requests, evictions = [], []
    b = SlidingWindowUCB(BanditConfig(gamma, tau, B, cap))
    for s, (r, evict, e) in enumerate(evs):
        b.record_request(s, r)
        requests.append((s, r))
        if evict:
            b.record_eviction(s, e)
            evictions.append((s, e))
    t = max(len(evs) - 1, 0) + extra
    b.advance(t)
    for i in range(6):
        x, n, score = verbatim_ucb(requests, evictions, t, gamma, tau, B, cap, i)
        assert b.eviction_count(i) == n
        assert abs(b.empirical_popularity(i) - x) <= 1e-12
        assert abs(b.ucb_score(i) - score) <= 1e-12
        bound = (1 - gamma ** tau) / (tau * (1 - gamma))
        assert 0.0 <= b.empirical_popularity(i) <= bound * (1 + 1e-12)
    picked = b.select(list(range(6)))
    assert picked in range(6)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 0.999), st.integers(2, 15), st.lists(st.integers(2, 6), min_size=3, max_size=40),
       st.data())
def test_extra_request_raises_score(gamma, tau, base, data):
    t = len(base) - 1
    lo = max(0, t - tau + 1)
    s = data.draw(st.integers(lo, t))
    evs = [(t - 1, 0)] if t >= 1 else []
    before = bandit(gamma=gamma, tau=tau, requests=list(enumerate(base)), evictions=evs, t=t)
    changed = list(base)
    changed[s] = 0
    after = bandit(gamma=gamma, tau=tau, requests=list(enumerate(changed)), evictions=evs, t=t)
    if base[s] == 0:
        return
    assert after.ucb_score(0) > before.ucb_score(0)
    # id 1 is never requested or evicted, so its score is unaffected
    if before.select([0, 1]) != 0:
        assert after.select([0, 1]) != 0


def test_debug_csv():
    b = SlidingWindowUCB(BanditConfig(), debug=True)
    for s in range(5):
        b.record_request(s, s % 2)
    b.select([0, 1])
    buf = io.StringIO()
    b.write_debug_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,candidate,popularity,evictions,score,chosen"
    assert len(lines) == 3
    assert sum(int(l.rsplit(",", 1)[1]) for l in lines[1:]) == 1
