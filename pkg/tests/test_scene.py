import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from csnkit.scene import (
    Actor,
    ActorKind,
    Band,
    EgoState,
    Intent,
    RangeError,
    SceneState,
    Sector,
    classify_zone,
    conflict_zones,
    make_actor,
    scene_from_actors,
    within_detection_range,
)


def actor_at(x, y, kind="vehicle"):
    return Actor("a", ActorKind(kind), (x, y))


@pytest.mark.parametrize(
    "pos, inside",
    [((0, 30), True), ((0, 0), True), ((20, 10), False), ((0, 50), True), ((0, 50.01), False), ((0, -15), True), ((0, -16), False), ((15, 0), True)],
)
def test_detection_range(pos, inside):
    assert within_detection_range(actor_at(*pos)) is inside


@pytest.mark.parametrize(
    "pos, sector, band",
    [
        ((0, 12), Sector.AHEAD, Band.MID),
        ((-6, 8), Sector.AHEAD_LEFT, Band.NEAR),
        ((5, 0.5), Sector.RIGHT, Band.NEAR),
        ((0, -5), Sector.BEHIND, Band.NEAR),
        ((-3, -3), Sector.BEHIND_LEFT, Band.NEAR),
        ((0, 25), Sector.AHEAD, Band.MID),
        ((0, 30), Sector.AHEAD, Band.FAR),
    ],
)
def test_classify_zone_examples(pos, sector, band):
    z = classify_zone(actor_at(*pos))
    assert (z.sector, z.band) == (sector, band)


def test_classify_zone_out_of_range_raises():
    with pytest.raises(RangeError):
        classify_zone(actor_at(20, 10))


in_range = st.tuples(st.floats(-15, 15, allow_nan=False), st.floats(-15, 50, allow_nan=False))


@given(in_range)
def test_zone_is_total_and_mirror_symmetric(pos):
    x, y = pos
    z = classify_zone(actor_at(x, y))
    zm = classify_zone(actor_at(-x, y))
    assert isinstance(z.sector, Sector) and isinstance(z.band, Band)
    if abs(x) >= 2.0:  # corridor sectors are their own mirror
        assert zm.sector is z.sector.mirrored


def test_conflict_zones():
    left, right = conflict_zones("left_turn"), conflict_zones(Intent.RIGHT_TURN)
    assert left == {Sector.AHEAD_LEFT, Sector.AHEAD, Sector.LEFT}
    assert right == {Sector.AHEAD_RIGHT, Sector.AHEAD, Sector.RIGHT}
    assert {s.mirrored for s in left} == right
    assert left & right == {Sector.AHEAD}
    assert conflict_zones("straight") == {Sector.AHEAD}
    assert conflict_zones("lane_change_left") == {Sector.LEFT, Sector.AHEAD_LEFT, Sector.BEHIND_LEFT}


def test_make_actor_relative_velocity():
    ego = EgoState(36.0, 50.0)  # 10 m/s
    lead = make_actor("lead", "vehicle", (0.0, 20.0), (0.0, 10.0), ego.speed_ms)
    assert lead.rel_velocity == pytest.approx((0.0, 0.0))
    assert lead.speed_kmh == pytest.approx(36.0)
    assert not lead.is_stationary
    parked = make_actor("p", "vehicle", (3.0, 20.0), (0.0, 0.0), ego.speed_ms)
    assert parked.is_stationary and parked.rel_velocity == pytest.approx((0.0, -10.0))


def test_scene_rejects_out_of_range_actor():
    with pytest.raises(RangeError):
        SceneState(EgoState(10, 30), (actor_at(0, 80),))


def test_scene_from_actors_drops_out_of_range():
    s = scene_from_actors(EgoState(10, 30), [actor_at(0, 80), actor_at(0, 10)])
    assert len(s.actors) == 1


def test_scene_json_round_trip(left_turn_scene, left_turn_scene_dict):
    again = SceneState.from_json(left_turn_scene.to_json())
    assert again == left_turn_scene
    assert json.loads(left_turn_scene.to_json())["actors"][0]["id"] == left_turn_scene_dict["actors"][0]["id"]


def test_ego_state_validation():
    with pytest.raises(ValueError):
        EgoState(-1.0, 30.0)
