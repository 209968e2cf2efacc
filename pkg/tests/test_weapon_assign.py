from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import LIBS, asset, mode_weights, random_instance, straight_track, weapon
from tewa.config import WeightsConfig
from tewa.pipeline import two_stage_assign
from tewa.weapon_assign import (
    MAX_SCHEDULED,
    WsCandidate,
    WsCondition,
    WsFeatures,
    WsSchedule,
    assign_threats_to_ws,
    candidate_ws,
    check_constraints,
    refresh_loads,
    ws_pair_weight,
)

W = WeightsConfig()


def cand(ws_id: str, weight: float) -> WsCandidate:
    return WsCandidate(ws_id, 0.0, 10.0, 0.1, 0.0, 1.0, weight)


def test_single_threat_single_weapon_locks():
    s = assign_threats_to_ws(["t"], {"t": [cand("w", 0.7)]}, WsSchedule())
    assert s.locked == {"w": "t"}
    assert s.queues == {}


def test_three_threats_one_weapon_schedules_two():
    cands = {t: [cand("w", 0.5)] for t in ("t1", "t2", "t3")}
    log = []
    s = assign_threats_to_ws(["t1", "t2", "t3"], cands, WsSchedule(), log=log)
    assert s.locked == {"w": "t1"}
    assert s.queues == {"w": ["t2"]}
    assert not s.is_scheduled("t3")
    assert [e["action"] for e in log] == ["lock", "queue", "reject"]


def test_heavier_late_proposal_bumps_queue_and_bumped_threat_moves_on():
    cands = {"a": [cand("w", 0.9)], "b": [cand("w", 0.3), cand("v", 0.2)], "c": [cand("w", 0.5)]}
    s = assign_threats_to_ws(["a", "b", "c"], cands, WsSchedule())
    assert s.locked == {"w": "a", "v": "b"}
    assert s.queues == {"w": ["c"]}


def test_equal_weight_does_not_bump():
    cands = {"a": [cand("w", 0.9)], "b": [cand("w", 0.5)], "c": [cand("w", 0.5)]}
    s = assign_threats_to_ws(["a", "b", "c"], cands, WsSchedule())
    assert s.queues == {"w": ["b"]}


def test_locks_are_never_bumped():
    existing = WsSchedule()
    existing.lock("w", "a", 0.1)
    s = assign_threats_to_ws(["z", "y"], {"z": [cand("w", 0.99)], "y": [cand("w", 0.95)]}, existing)
    assert s.locked == {"w": "a"}
    assert s.queues == {"w": ["z"]}
    assert existing.queues == {}


def test_release_promotes_queue_head():
    s = WsSchedule()
    s.lock("w", "a", 0.9)
    s.enqueue("w", "b", 0.4)
    assert s.release("a", when=3.0) == [("w", "b")]
    assert s.locked == {"w": "b"} and s.queues == {}
    assert s.locked_at["w"] == 3.0


# candidate weapons


def mixed_fixture():
    track = straight_track("t", (0, 30), (0, -0.3), "fighter", altitude=1.0)
    weapons = {
        "w_down": weapon("w_down", "d", (0, 0), condition=WsCondition.DOWN),
        "w_east": weapon("w_east", "d", (5, 0), start=1.75 * math.pi, sweep=0.5 * math.pi),
        "w_a": weapon("w_a", "d", (-1, 0), stabilization_time=0.5),
        "w_b": weapon("w_b", "d", (0, -1), "cannon", radius=7.0),
    }
    da = asset("d", (0, 0), list(weapons))
    return track, da, weapons


def test_candidates_skip_down_and_out_of_sector_weapons():
    track, da, weapons = mixed_fixture()
    cands = candidate_ws(track, da, weapons, LIBS, W, clock=1.0)
    assert sorted(c.ws_id for c in cands) == ["w_a", "w_b"]
    assert cands == sorted(cands, key=lambda c: (-c.pair_weight, c.ws_id))


def test_empty_magazine_excludes_weapon():
    track, da, weapons = mixed_fixture()
    weapons["w_a"].ammo = 0
    assert [c.ws_id for c in candidate_ws(track, da, weapons, LIBS, W, clock=1.0)] == ["w_b"]


def test_elevation_limit_excludes_weapon():
    # 10 km up, entering a 12 km circle: atan(10/12) is about 40 degrees
    track = straight_track("t", (0, 30), (0, -0.3), "fighter", altitude=10.0)
    low = weapon("low", "d", (0, 0), max_elevation=math.radians(30))
    high = weapon("high", "d", (0, 0.001), max_elevation=math.radians(60))
    da = asset("d", (0, 0), ["low", "high"])
    assert [c.ws_id for c in candidate_ws(track, da, {"low": low, "high": high}, LIBS, W)] == ["high"]


def test_ineffective_weapon_class_excluded():
    track = straight_track("t", (0, 30), (0, -0.3), "fighter")
    w = weapon("w", "d", (0, 0))
    strict = WeightsConfig(capability_threshold=1.0)
    assert candidate_ws(track, asset("d", (0, 0), ["w"]), {"w": w}, LIBS, strict) == []


def test_pair_weight_ideal_weapon_scores_one():
    assert ws_pair_weight(WsFeatures(0.0, 0.0, 1.0, 1.0, 0.0, 5.0), W) == pytest.approx(1.0)


def test_pair_weight_by_hand():
    f = WsFeatures(30.0, 0.5, 1.0, 0.9, 2.0, 0.5)
    expected = (0.35 * math.exp(-0.5) + 0.1 * 0.5 + 0.3 * 0.9 + 0.1 * math.exp(-0.4) + 0.15 * 0.5)
    assert ws_pair_weight(f, W) == pytest.approx(expected)


def test_candidate_weights_recomputed_from_features():
    track, da, weapons = mixed_fixture()
    for c in candidate_ws(track, da, weapons, LIBS, W, clock=1.0):
        ws = weapons[c.ws_id]
        margin = max(0.0, (ws.max_elevation - c.required_elevation) / ws.max_elevation)
        oracle = (W.ws_time * math.exp(-c.time_to_ws / W.ws_time_scale) + W.ws_elevation * margin
                  + W.ws_lethality * ws.lethality_index
                  + W.ws_stabilization * math.exp(-ws.stabilization_time / W.stabilization_scale)
                  + W.ws_rate_of_fire * min(1.0, ws.rate_of_fire / W.reference_rof))
        assert c.pair_weight == pytest.approx(oracle)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 600), st.floats(0, 1.5), st.floats(0.1, 1.5), st.floats(0, 1), st.floats(0, 10),
       st.floats(0.01, 5))
def test_pair_weight_in_unit_interval(t, req, mx, leth, stab, rof):
    assert 0.0 <= ws_pair_weight(WsFeatures(t, req, mx, leth, stab, rof), W) <= 1.0 + 1e-12


# constraint checker


def kinds(schedule, feasible=None):
    return sorted(v.kind for v in check_constraints(schedule, feasible))


def test_constraint_checker_flags_each_kind():
    ok = WsSchedule()
    ok.lock("w", "a", 1)
    ok.enqueue("w", "b", 1)
    assert kinds(ok) == []

    over = WsSchedule(locked={"w": "a"}, queues={"w": ["b", "c"]})
    assert kinds(over) == ["capacity"]

    twice = WsSchedule(locked={"w": "a", "v": "a"})
    assert kinds(twice) == ["one_weapon"]

    spread = WsSchedule(locked={"w": "x"}, queues={"w": ["a"], "v": ["a"]})
    assert kinds(spread) == ["one_weapon"]

    both = WsSchedule(locked={"w": "a"}, queues={"w": ["a"]})
    assert kinds(both) == ["exclusive"]

    assert kinds(ok, lambda ws, t: t != "b") == ["gate"]


# properties of the proposal procedure


def random_candidates(rng: random.Random, n_threats: int, n_ws: int):
    cands = {}
    for i in range(n_threats):
        ws = rng.sample(range(n_ws), rng.randint(0, min(4, n_ws)))
        lst = [cand(f"w{j}", round(rng.random(), 3)) for j in ws]
        cands[f"t{i}"] = sorted(lst, key=lambda c: (-c.pair_weight, c.ws_id))
    return [f"t{i}" for i in range(n_threats)], cands


def test_unscheduled_threats_find_every_candidate_full():
    rng = random.Random(3)
    for _ in range(300):
        ranked, cands = random_candidates(rng, rng.randint(1, 15), rng.randint(1, 6))
        s = assign_threats_to_ws(ranked, cands, WsSchedule())
        for t in ranked:
            ws = s.ws_of(t)
            if ws is not None:
                assert ws in {c.ws_id for c in cands[t]}
                continue
            for c in cands[t]:
                assert s.scheduled_count(c.ws_id) == MAX_SCHEDULED
                assert s.weights[(c.ws_id, s.queues[c.ws_id][-1])] >= c.pair_weight


def test_schedule_invariant_to_positive_scaling():
    rng = random.Random(8)
    for _ in range(100):
        ranked, cands = random_candidates(rng, rng.randint(1, 12), rng.randint(1, 5))
        k = rng.uniform(0.1, 10)
        scaled = {t: [c._replace(pair_weight=c.pair_weight * k) for c in cs] for t, cs in cands.items()}
        a = assign_threats_to_ws(ranked, cands, WsSchedule())
        b = assign_threats_to_ws(ranked, scaled, WsSchedule())
        assert (a.locked, a.queues) == (b.locked, b.queues)


def test_top_ranked_threat_gets_its_best_weapon():
    rng = random.Random(9)
    for _ in range(100):
        ranked, cands = random_candidates(rng, rng.randint(1, 12), rng.randint(1, 5))
        if not cands[ranked[0]]:
            continue
        s = assign_threats_to_ws(ranked, cands, WsSchedule())
        assert s.locked.get(cands[ranked[0]][0].ws_id) == ranked[0]


def test_fifty_threats_ten_weapons_capacity():
    rng = random.Random(50)
    ranked, cands = random_candidates(rng, 50, 10)
    s = assign_threats_to_ws(ranked, cands, WsSchedule())
    assert max(s.scheduled_count(f"w{j}") for j in range(10)) <= MAX_SCHEDULED
    assert check_constraints(s) == []


def test_two_stage_schedules_are_feasible_on_random_instances():
    for seed in range(60):
        tracks, das, weapons = random_instance(seed)
        d = two_stage_assign(tracks, das, weapons, LIBS, mode_weights(tracks, weapons), clock=1.0)
        allowed = {(c.ws_id, t) for t, cs in d.candidates.items() for c in cs}
        assert check_constraints(d.schedule, lambda ws, t: (ws, t) in allowed) == []
        for t in d.ranked:
            ws = d.schedule.ws_of(t)
            if ws is not None:
                assert weapons[ws].da_id == d.matching.assignment[t]


def test_refresh_loads_tracks_occupancy():
    w = {k: weapon(k, "d", (0, 0)) for k in ("w", "v", "u")}
    s = WsSchedule(locked={"w": "a", "v": "b"}, queues={"w": ["c"]})
    refresh_loads(w.values(), s)
    assert [w[k].load for k in ("w", "v", "u")] == [1.0, 0.5, 0.0]
