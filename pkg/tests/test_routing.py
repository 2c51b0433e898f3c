import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oppsim.routing import bubble, epidemic, prophet
from oppsim.routing.base import Buffer, Message, expire_messages
from oppsim.routing.bubble import BubbleState, bubble_decide
from oppsim.routing.prophet import ProphetState
from oppsim.scenario import ProtocolParams

HOUR = 3600.0
PARAMS = ProtocolParams()


def msg(mid, size=100_000, created=0.0, ttl=24 * HOUR, src=0, dst=1):
    return Message(mid, src, dst, size, created, ttl)


# ---------------------------------------------------------------------------
# epidemic

def test_epidemic_plain_set_difference():
    assert epidemic.epidemic_decide(["a", "b", "c"], set()) == ["a", "b", "c"]
    assert epidemic.epidemic_decide(["a", "b"], {"a", "b"}) == []
    assert epidemic.epidemic_decide(["m1", "m2"], {"m2"}) == ["m1"]


def test_epidemic_disjoint_buffers():
    offered = epidemic.epidemic_decide(["a", "b", "c"], {"x", "y"})
    assert offered == ["a", "b", "c"]


# ---------------------------------------------------------------------------
# prophet formulas

def test_encounter_update_examples():
    assert prophet.encounter_update(0.0, 0.75) == pytest.approx(0.75, abs=1e-12)
    assert prophet.encounter_update(0.75, 0.75) == pytest.approx(0.9375, abs=1e-12)
    assert prophet.encounter_update(1.0, 0.75) == pytest.approx(1.0, abs=1e-12)


def test_encounter_update_rejects_out_of_range():
    with pytest.raises(ValueError):
        prophet.encounter_update(1.5, 0.75)
    with pytest.raises(ValueError):
        prophet.encounter_update(-0.1, 0.75)


def test_age_examples():
    assert prophet.age(0.7, 0.0, 0.98) == pytest.approx(0.7, abs=1e-15)
    assert prophet.age(0.5, 1.0, 0.98) == pytest.approx(0.49, abs=1e-12)
    assert prophet.age(1.0, 10.0, 0.98) == pytest.approx(0.98 ** 10, abs=1e-12)


def test_transitive_examples():
    assert prophet.transitive_update(0.0, 1.0, 1.0, 0.25) == pytest.approx(0.25)
    assert prophet.transitive_update(0.42, 0.0, 0.9, 0.25) == pytest.approx(0.42)
    assert prophet.transitive_update(0.5, 0.8, 0.5, 0.25) == pytest.approx(0.55)


def test_prophet_decide_strict():
    assert prophet.prophet_decide(0.3, 0.6)
    assert not prophet.prophet_decide(0.6, 0.6)
    assert not prophet.prophet_decide(0.6, 0.3)


@given(st.floats(0, 1), st.floats(0, 200), st.floats(0, 200))
@settings(max_examples=200)
def test_age_additivity(p, a, b):
    gamma = 0.98
    stepwise = prophet.age(prophet.age(p, a, gamma), b, gamma)
    direct = prophet.age(p, a + b, gamma)
    assert abs(stepwise - direct) <= 1e-12


@given(st.lists(st.tuples(st.sampled_from(["enc", "age", "trans"]),
                          st.floats(0, 1), st.floats(0, 1), st.floats(0, 50)),
                max_size=60))
@settings(max_examples=200)
def test_predictability_stays_in_unit_interval(ops):
    p = 0.0
    for kind, x, y, k in ops:
        if kind == "enc":
            p = prophet.encounter_update(p, 0.75)
        elif kind == "age":
            p = prophet.age(p, k, 0.98)
        else:
            p = prophet.transitive_update(p, x, y, 0.25)
        assert 0.0 <= p <= 1.0


def test_prophet_state_encounter_and_transitivity():
    a = ProphetState(0, PARAMS)
    b = ProphetState(1, PARAMS)
    c = ProphetState(2, PARAMS)
    b.on_encounter(c, now=0.0)  # b learns about c
    assert b.p_for(2) == pytest.approx(0.75)
    a.on_encounter(b, now=0.0)
    assert a.p_for(1) == pytest.approx(0.75)
    # transitive: P(a,c) = 0 + 1 * 0.75 * 0.75 * 0.25
    assert a.p_for(2) == pytest.approx(0.75 * 0.75 * 0.25)


def test_prophet_state_ages_between_events():
    params = ProtocolParams(aging_unit=30.0)
    a = ProphetState(0, params)
    b = ProphetState(1, params)
    a.on_encounter(b, now=0.0)
    p0 = a.p_for(1)
    a.age_to(300.0)  # 10 aging units of 30 s
    assert a.p_for(1) == pytest.approx(p0 * 0.98 ** 10, rel=1e-12)


# ---------------------------------------------------------------------------
# bubble

def make_bubble(node_id=0, **over):
    params = ProtocolParams(**over) if over else PARAMS
    return BubbleState(node_id, params)


def test_familiar_threshold_crossing():
    s = make_bubble(0, familiar_threshold=2 * HOUR)
    s.update_social(peer_id=1, duration=HOUR, peer_community={1}, now=HOUR)
    assert 1 not in s.familiar
    s.update_social(peer_id=1, duration=HOUR, peer_community={1}, now=2 * HOUR)
    assert 1 in s.familiar
    assert 1 in s.community


def test_zero_encounters_zero_centrality():
    s = make_bubble(0)
    assert s.global_centrality(10 * HOUR) == 0.0
    assert s.local_centrality(10 * HOUR) == 0.0


def test_windowed_centrality_mean():
    s = make_bubble(0)
    w = s.params.centrality_window
    # 5 unique encounters in window 0, 3 in window 1
    for peer in range(1, 6):
        s.update_social(peer, 10.0, {peer}, now=100.0 * peer)
    for peer in range(6, 9):
        s.update_social(peer, 10.0, {peer}, now=w + 100.0 * peer)
    assert s.global_centrality(2 * w + 1.0) == pytest.approx(4.0)


def test_repeat_encounters_count_once_per_window():
    s = make_bubble(0)
    for k in range(5):
        s.update_social(1, 10.0, {1}, now=10.0 * k)
    s.roll_to(s.params.centrality_window)
    assert s.global_hist[-1] == 1


def test_bubble_decide_rules():
    now = 0.0
    dest = 9
    self_state = make_bubble(0)
    peer_state = make_bubble(1)

    # peer is the destination
    assert bubble_decide(self_state, make_bubble(dest), dest, now)
    # destination in peer community only
    peer_state.community.add(dest)
    assert bubble_decide(self_state, peer_state, dest, now)
    # destination in both: local centrality decides (peer 4 vs self 7 -> hold)
    self_state.community.add(dest)
    self_state.local_hist.extend([7, 7])
    peer_state.local_hist.extend([4, 4])
    assert not bubble_decide(self_state, peer_state, dest, now)
    peer_state.local_hist.clear()
    peer_state.local_hist.extend([8, 8])
    assert bubble_decide(self_state, peer_state, dest, now)
    # destination in self community only -> hold
    fresh_peer = make_bubble(2)
    assert not bubble_decide(self_state, fresh_peer, dest, now)
    # destination in neither: global centrality decides
    a, b = make_bubble(3), make_bubble(4)
    a.global_hist.extend([7, 7])
    b.global_hist.extend([4, 4])
    assert not bubble_decide(a, b, dest, now)
    assert bubble_decide(b, a, dest, now)
    # ties hold
    b.global_hist.clear()
    b.global_hist.extend([7, 7])
    assert not bubble_decide(a, b, dest, now)


def test_bubble_decide_is_pure():
    a, b = make_bubble(0), make_bubble(1)
    a.global_hist.extend([2, 4])
    b.global_hist.extend([5, 5])
    first = bubble_decide(a, b, 7, now=100.0)
    second = bubble_decide(a, b, 7, now=100.0)
    assert first == second is True


def test_community_merge_on_overlap():
    s = make_bubble(0)
    s.community |= {0, 1, 2}
    # overlap 2/3 > 0.5 -> merge
    s.update_social(5, 10.0, {1, 2, 9}, now=10.0)
    assert {9, 1, 2} <= s.community


def test_community_never_shrinks_and_contains_self():
    rng = random.Random(0)
    s = make_bubble(0)
    seen = {0}
    for step in range(300):
        peer = rng.randrange(1, 12)
        comm = set(rng.sample(range(12), rng.randint(1, 5)))
        before = set(s.community)
        s.update_social(peer, rng.uniform(0, HOUR), comm, now=step * 600.0)
        assert before <= s.community
        assert 0 in s.community
        assert s.familiar <= s.community
        seen |= comm


# ---------------------------------------------------------------------------
# buffers

def test_admit_fits_without_eviction():
    buf = Buffer(2_000_000)
    ok, evicted, expired = buf.admit(msg("m1", 100_000), now=0.0)
    assert ok and not evicted and not expired
    assert buf.occupancy == 100_000


def test_admit_full_buffer_evicts_exactly_oldest():
    buf = Buffer(2_000_000)
    for i in range(20):
        ok, evicted, _ = buf.admit(msg(f"m{i:02d}", 100_000), now=float(i))
        assert ok and not evicted
    ok, evicted, _ = buf.admit(msg("new", 100_000), now=30.0)
    assert ok
    assert [m.msg_id for m in evicted] == ["m00"]
    assert buf.occupancy == 2_000_000
    assert "new" in buf and "m00" not in buf


def test_admit_oversized_rejected():
    buf = Buffer(2_000_000)
    buf.admit(msg("small", 50_000), now=0.0)
    ok, evicted, _ = buf.admit(msg("huge", 3_000_000), now=1.0)
    assert not ok
    assert not evicted  # rejection evicts nothing
    assert "small" in buf


def test_admit_purges_expired_first():
    buf = Buffer(300_000)
    buf.admit(msg("old", 100_000, created=0.0, ttl=10.0), now=0.0)
    buf.admit(msg("keep", 100_000, created=5.0, ttl=1000.0), now=5.0)
    ok, evicted, expired = buf.admit(msg("new", 200_000), now=20.0)
    assert ok
    assert [m.msg_id for m in expired] == ["old"]
    assert [m.msg_id for m in evicted] == []


def test_expire_boundary_semantics():
    buf = Buffer(1_000_000)
    buf.admit(msg("m", 1000, created=0.0, ttl=24 * HOUR), now=0.0)
    assert expire_messages(buf, 24 * HOUR - 1.0) == []
    assert "m" in buf
    removed = expire_messages(buf, 24 * HOUR)
    assert [m.msg_id for m in removed] == ["m"]
    assert len(buf) == 0
    assert expire_messages(buf, 25 * HOUR) == []


def test_duplicate_id_rejected():
    buf = Buffer(1_000_000)
    buf.admit(msg("m", 1000), now=0.0)
    with pytest.raises(ValueError):
        buf.admit(msg("m", 1000), now=1.0)


@given(st.lists(st.tuples(st.integers(1, 60), st.integers(1_000, 900_000)),
                max_size=40))
@settings(max_examples=150)
def test_buffer_invariants_under_random_admits(entries):
    buf = Buffer(2_000_000)
    for i, (t, size) in enumerate(entries):
        buf.admit(msg(f"x{i}", size), now=float(t))
        assert buf.occupancy <= buf.capacity
        assert buf.occupancy == sum(m.size for m in buf.messages())
        ids = list(buf.ids())
        assert len(ids) == len(set(ids))
