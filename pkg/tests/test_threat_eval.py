from __future__ import annotations

import math
import random
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import LIBS, asset, mode_weights, random_instance, straight_track, weapon
from tewa.config import WeightsConfig
from tewa.engine import snapshot
from tewa.io.scenario import load_scenario
from tewa.library import build_libraries
from tewa.pipeline import crossing_table, two_stage_assign
from tewa.threat_eval import (
    DaStatus,
    KillTerm,
    ThreatDaMatching,
    ThreatIndices,
    arrival_horizon,
    assign_threats_to_das,
    capability_index,
    closing_geometry,
    da_kill_capability,
    da_pair_weight,
    deferred_acceptance,
    intent_index,
    kill_probability,
    opportunity_index,
    rank_threats,
    threat_indices,
    track_crossing,
)
W = WeightsConfig()
unit_float = st.floats(0, 1, allow_nan=False)


def fixture(name: str):
    return load_scenario(resources.files("tewa.data.scenarios").joinpath(name))


# indices


def test_intent_head_on_by_hand():
    track = straight_track("t", (0, 10), (0, -0.3))
    da = asset("d", (0, 0))
    # heading 1, closing 0.3/0.3 = 1, last seen at (0, 9.7), reaches the rim (0, 2) after 7.7/0.3 s
    ttd = 7.7 / 0.3
    expected = 0.4 * 1 + 0.3 * 1 + 0.3 * math.exp(-ttd / 60)
    assert intent_index(track, da, W) == pytest.approx(expected)
    assert closing_geometry(track, da.footprint)[0] == pytest.approx(ttd)


def test_intent_receding_track_scores_zero():
    track = straight_track("t", (0, 10), (0, 0.3))
    assert intent_index(track, asset("d", (0, 0)), W) == pytest.approx(0.0)


def test_intent_crossing_track_by_hand():
    # flying east past the asset: heading is perpendicular, no closing, misses the circle
    track = straight_track("t", (-10, 10), (0.3, 0))
    da = asset("d", (-9.7, 0))
    assert intent_index(track, da, W) == pytest.approx(0.4 * 0.5)


def test_capability_speed_scaling():
    libs, _ = build_libraries(
        [{"class_id": "jet", "base_capability": 0.6, "base_speed": 0.2, "value": 0.5}],
        [{"class_id": "gun", "lethality_index": 0.5, "priority": 0.5}],
        [{"weapon": "gun", "threat": "unknown", "c": 0.5}],
    )
    assert capability_index(straight_track("t", (0, 0), (0.4, 0), "jet"), libs) == pytest.approx(0.9)
    assert capability_index(straight_track("t", (0, 0), (0.2, 0), "jet"), libs) == pytest.approx(0.6)
    assert capability_index(straight_track("t", (0, 0), (0.05, 0), "jet"), libs) == pytest.approx(0.3)
    assert capability_index(straight_track("t", (0, 0), (1.0, 0), "jet"), libs) == pytest.approx(0.9)


def test_opportunity_is_normalized_blend():
    assert opportunity_index(0.2, 0.6, W) == pytest.approx((0.4 * 0.2 + 0.4 * 0.6) / 0.8)


@settings(max_examples=200, deadline=None)
@given(st.floats(-30, 30), st.floats(-30, 30), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5),
       st.sampled_from(sorted(LIBS.threats) + ["mystery"]))
def test_indices_stay_in_unit_interval(x, y, vx, vy, tclass):
    if vx == 0 and vy == 0:
        vx = 0.1
    track = straight_track("t", (x, y), (vx, vy), tclass)
    idx = threat_indices(track, asset("d", (0, 0)), LIBS, W)
    for v in (idx.intent, idx.capability, idx.opportunity):
        assert 0.0 <= v <= 1.0


# kill probability


def test_kill_probability_examples():
    half = KillTerm(0.5, 0.5, 0.5, 1.0)
    assert kill_probability([], W) == 1.0
    assert kill_probability([half], W) == pytest.approx(0.5)
    assert kill_probability([half, half], W) == pytest.approx(0.25)
    assert kill_probability([KillTerm(1, 1, 1, 1.0)], W) == pytest.approx(0.0)
    assert kill_probability([KillTerm(1, 1, 1, 0.0)], W) == pytest.approx(1.0)


def test_kill_probability_salvo_exponent():
    assert kill_probability([KillTerm(0.5, 0.5, 0.5, 1.0, shots=2)], W) == pytest.approx(0.75)


term = st.builds(KillTerm, unit_float, unit_float, unit_float, unit_float, st.integers(1, 3))


@settings(max_examples=300, deadline=None)
@given(st.lists(term, max_size=6))
def test_kill_probability_bounded(terms):
    assert 0.0 <= kill_probability(terms, W) <= 1.0


@settings(max_examples=300, deadline=None)
@given(st.lists(term, max_size=4), unit_float, unit_float, unit_float, unit_float, unit_float)
def test_kill_probability_monotone_in_threat_pressure(terms, i, c, load, eff, bump):
    base = KillTerm(i, c, load, eff)
    stronger = KillTerm(min(1.0, i + bump), c, load, eff)
    assert kill_probability(terms + [stronger], W) <= kill_probability(terms + [base], W) + 1e-12
    assert kill_probability(terms + [base], W) <= kill_probability(terms, W) + 1e-12


# pair weights


def test_da_pair_weight_by_hand():
    idx = ThreatIndices(0.7, 0.5, 0.6, 30.0, None)
    expected = 0.5 * 0.8 + 0.3 * math.exp(-30 / 60) + 0.2 * (1 - 0.25)
    assert da_pair_weight(0.8, idx, 0.25, W) == pytest.approx(expected)
    never = ThreatIndices(0.7, 0.5, 0.6, None, None)
    assert da_pair_weight(0.8, never, 0.25, W) == pytest.approx(0.5 * 0.8 + 0.2 * 0.75)


def test_pair_weights_recomputed_from_parts():
    tracks, das, weapons = random_instance(4)
    weights = mode_weights(tracks, weapons)
    crossings = crossing_table(tracks, weapons, das)
    m = assign_threats_to_das(tracks, das, weapons, LIBS, weights, crossings=crossings)
    by_id = {d.da_id: d for d in das}
    loads = {d.da_id: 0.0 for d in das}
    for (t, d), w in m.pair_weights.items():
        track = next(x for x in tracks if x.track_id == t)
        kc = da_kill_capability(track, by_id[d], weapons, LIBS, crossings)
        raw = da_pair_weight(kc, m.indices[(t, d)], loads[d], weights)
        assert w == pytest.approx(raw * weights.objective_factor(by_id[d].priority, track.value))


# deferred acceptance


def test_two_by_two_example():
    weights = {("T1", "DA1"): 0.9, ("T1", "DA2"): 0.1, ("T2", "DA1"): 0.8, ("T2", "DA2"): 0.2}
    assert deferred_acceptance(weights, {"DA1": 1, "DA2": 1}) == {"T1": "DA1", "T2": "DA2"}


def test_quota_two_takes_both():
    weights = {("T1", "DA1"): 0.9, ("T1", "DA2"): 0.1, ("T2", "DA1"): 0.8, ("T2", "DA2"): 0.2}
    assert deferred_acceptance(weights, {"DA1": 2, "DA2": 1}) == {"T1": "DA1", "T2": "DA1"}


def test_unacceptable_pairs_leave_threat_unmatched():
    assert deferred_acceptance({("T1", "DA1"): 0.5, ("T2", "DA1"): 0.4}, {"DA1": 1}) == {"T1": "DA1"}


def random_market(rng: random.Random):
    threats = [f"t{i}" for i in range(rng.randint(1, 12))]
    das = [f"d{j}" for j in range(rng.randint(1, 6))]
    weights = {(t, d): round(rng.random(), 2) for t in threats for d in das if rng.random() < 0.7}
    quotas = {d: rng.randint(1, 3) for d in das}
    return threats, das, weights, quotas


def blocking_pairs(weights, quotas, match):
    """Pairs (t, d) that would both rather be together; smaller id wins ties."""
    held = {d: [t for t, dd in match.items() if dd == d] for d in quotas}
    out = []
    for (t, d), w in weights.items():
        cur = match.get(t)
        if cur == d:
            continue
        if cur is not None and (-weights[(t, cur)], cur) < (-w, d):
            continue
        if len(held[d]) < quotas[d]:
            out.append((t, d))
            continue
        worst = max(held[d], key=lambda x: (-weights[(x, d)], x))
        if (-w, t) < (-weights[(worst, d)], worst):
            out.append((t, d))
    return out


def test_matching_is_stable_on_random_markets():
    rng = random.Random(17)
    for _ in range(300):
        _, _, weights, quotas = random_market(rng)
        match = deferred_acceptance(weights, quotas)
        assert all((t, d) in weights for t, d in match.items())
        for d, q in quotas.items():
            assert sum(1 for x in match.values() if x == d) <= q
        assert blocking_pairs(weights, quotas, match) == []


def test_matching_invariant_to_positive_scaling():
    rng = random.Random(23)
    for _ in range(100):
        _, _, weights, quotas = random_market(rng)
        k = rng.uniform(0.1, 10)
        scaled = {p: w * k for p, w in weights.items()}
        assert deferred_acceptance(scaled, quotas) == deferred_acceptance(weights, quotas)


# pairing threats with assets


def test_threat_goes_to_the_asset_it_threatens():
    w1, w2 = weapon("w1", "a", (0, 0)), weapon("w2", "b", (40, 0))
    das = [asset("a", (0, 0), ["w1"]), asset("b", (40, 0), ["w2"])]
    track = straight_track("t", (0, 25), (0, -0.3), value=0.8)
    m = assign_threats_to_das([track], das, {"w1": w1, "w2": w2}, LIBS, W)
    assert m.assignment == {"t": "a"}


def test_asset_on_hold_is_skipped():
    w1 = weapon("w1", "a", (0, 0))
    das = [asset("a", (0, 0), ["w1"], status=DaStatus.ON_HOLD)]
    track = straight_track("t", (0, 25), (0, -0.3), value=0.8)
    m = assign_threats_to_das([track], das, {"w1": w1}, LIBS, W)
    assert m.assignment == {} and m.unassigned == {"t"}


def test_low_opportunity_threat_not_proposed():
    w1 = weapon("w1", "a", (0, 0))
    das = [asset("a", (0, 0), ["w1"])]
    track = straight_track("t", (0, 25), (0, -0.3), value=0.8)
    strict = WeightsConfig(capability_threshold=0.99)
    assert assign_threats_to_das([track], das, {"w1": w1}, LIBS, strict).assignment == {}


def test_pinned_threat_keeps_asset_and_uses_quota():
    w1, w2 = weapon("w1", "a", (0, 0)), weapon("w2", "b", (10, 0))
    das = [asset("a", (0, 0), ["w1"], quota=1), asset("b", (10, 0), ["w2"], quota=1)]
    t1 = straight_track("t1", (0, 25), (0, -0.3), value=0.8)
    t2 = straight_track("t2", (1, 25), (0, -0.3), value=0.8)
    m = assign_threats_to_das([t1, t2], das, {"w1": w1, "w2": w2}, LIBS, W, pinned={"t2": "a"})
    assert m.assignment["t2"] == "a"
    assert m.assignment.get("t1") != "a"


def test_quota_respected_on_random_instances():
    for seed in range(40):
        tracks, das, weapons = random_instance(seed)
        m = assign_threats_to_das(tracks, das, weapons, LIBS, mode_weights(tracks, weapons))
        for d in das:
            assert sum(1 for x in m.assignment.values() if x == d.da_id) <= d.quota


# ranking


def ranked_fixture(p1: float, p2: float, opp=(0.5, 0.5)):
    das = {"a": asset("a", (0, 0), priority=p1), "b": asset("b", (10, 0), priority=p2)}
    tracks = {"t1": straight_track("t1", (0, 20), (0, -0.3), value=0.5),
              "t2": straight_track("t2", (10, 20), (0, -0.3), value=0.5)}
    m = ThreatDaMatching(assignment={"t1": "b", "t2": "a"})
    m.indices = {("t1", "b"): ThreatIndices(0.5, 0.5, opp[0], 10.0, None),
                 ("t2", "a"): ThreatIndices(0.5, 0.5, opp[1], 10.0, None)}
    return m, das, tracks


def test_rank_by_asset_priority():
    m, das, tracks = ranked_fixture(0.9, 0.3)
    assert rank_threats(m, das, tracks, LIBS, W) == ["t2", "t1"]
    m, das, tracks = ranked_fixture(0.3, 0.9)
    assert rank_threats(m, das, tracks, LIBS, W) == ["t1", "t2"]


def test_rank_ties_broken_by_id():
    m, das, tracks = ranked_fixture(0.6, 0.6)
    assert rank_threats(m, das, tracks, LIBS, W) == ["t1", "t2"]


# arrival horizon


def test_arrival_horizon_and_clipping():
    track = straight_track("t", (0, 20), (0, -1.0))
    das = [asset("d", (0, 0))]
    assert arrival_horizon(track, das) == pytest.approx(17.0)
    assert arrival_horizon(track, []) == math.inf
    behind = weapon("w", "d", (0, -10), radius=5)
    assert track_crossing(track, behind.sector) is not None
    assert track_crossing(track, behind.sector, 17.0) is None
    wide = weapon("w", "d", (0, 5), radius=8)
    c = track_crossing(track, wide.sector, 17.0)
    assert c.entry_time == pytest.approx(6.0)
    assert c.exit_time == pytest.approx(17.0)


def test_weapon_reachable_only_after_arrival_gives_no_capability():
    track = straight_track("t", (0, 20), (0, -1.0))
    behind = weapon("w", "far", (0, -10), radius=5)
    das = [asset("near", (0, 0)), asset("far", (0, -10), ["w"])]
    crossings = crossing_table([track], {"w": behind}, das)
    assert da_kill_capability(track, das[1], {"w": behind}, LIBS, crossings) == 0.0


# the small-raid fixture


def test_five_threats_ten_assets_leaves_assets_idle():
    spec = fixture("raid_k5.json")
    tracks, clock = snapshot(spec)
    weapons = {w.ws_id: w for w in spec.weapons}
    weights = mode_weights(tracks, weapons, spec.weights)
    decision = two_stage_assign(tracks, spec.das, weapons, spec.libraries, weights, clock=clock)
    assert len(decision.matching.assignment) == 5
    used = set(decision.matching.assignment.values())
    assert len(spec.das) - len(used) >= 5
