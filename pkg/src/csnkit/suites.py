"""Scripted route suites used by the demos, the grid and the acceptance tests."""

from __future__ import annotations

from csnkit.routes import ActorSpawn, RouteSegment, RouteSpec, SignalCycle
from csnkit.scene import Intent, Weather

LEFT, RIGHT, FOLLOW, STRAIGHT = Intent.LEFT_TURN, Intent.RIGHT_TURN, Intent.FOLLOW, Intent.STRAIGHT


def straight_empty(length_m: float = 60.0, seed: int = 0) -> RouteSpec:
    return RouteSpec(segments=(RouteSegment(FOLLOW, length_m),), name="straight_empty", seed=seed)


def direction_flip_suite(seed: int = 0) -> list[RouteSpec]:
    """Turn-heavy routes without traffic; they isolate direction errors."""
    return [
        RouteSpec((RouteSegment(LEFT, 40.0), RouteSegment(FOLLOW, 30.0)), name="flip_left", seed=seed),
        RouteSpec((RouteSegment(RIGHT, 40.0), RouteSegment(FOLLOW, 30.0)), name="flip_right", seed=seed),
        RouteSpec(
            (RouteSegment(LEFT, 35.0), RouteSegment(RIGHT, 35.0), RouteSegment(FOLLOW, 25.0)),
            name="flip_left_right",
            seed=seed,
        ),
    ]


def oncoming_stream(n: int = 40, start_m: float = 45.0, spacing_m: float = 9.0, speed_ms: float = 8.0) -> tuple[ActorSpawn, ...]:
    return tuple(
        ActorSpawn(f"onc{i}", "vehicle", start_m + i * spacing_m, 3.5, -speed_ms, 0.0, "car")
        for i in range(n)
    )


def dense_traffic_suite(seed: int = 0) -> list[RouteSpec]:
    """Straight urban roads with a dense oncoming stream in the opposite lane."""
    return [
        RouteSpec((RouteSegment(FOLLOW, 160.0),), speed_limit_kmh=30.0, scripted_actors=oncoming_stream(),
                  name="dense_oncoming", seed=seed),
        RouteSpec(
            (RouteSegment(FOLLOW, 140.0),),
            speed_limit_kmh=30.0,
            scripted_actors=oncoming_stream(n=40, start_m=40.0, spacing_m=9.0, speed_ms=7.0)
            + (ActorSpawn("lead", "vehicle", 25.0, 0.0, 5.0, 0.0, "van"),),
            name="dense_oncoming_lead",
            seed=seed,
        ),
        RouteSpec(
            (RouteSegment(STRAIGHT, 60.0, junction_at_end=True), RouteSegment(FOLLOW, 80.0)),
            speed_limit_kmh=30.0,
            scripted_actors=oncoming_stream(n=40, start_m=50.0, spacing_m=9.5, speed_ms=8.0),
            name="dense_junction",
            seed=seed,
        ),
    ]


def default_suite(seed: int = 0) -> list[RouteSpec]:
    """Mixed urban routes: turns with crossing pedestrians, leads, lights, wet road."""
    return [
        RouteSpec(
            (RouteSegment(LEFT, 50.0), RouteSegment(FOLLOW, 40.0)),
            speed_limit_kmh=30.0,
            scripted_actors=(
                ActorSpawn("ped1", "pedestrian", 44.0, -6.0, 0.0, 1.4, "pedestrian", start_frame=40),
                ActorSpawn("car1", "vehicle", 70.0, 3.5, -6.0, 0.0, "sedan"),
            ),
            signal=SignalCycle(green_s=7.0, yellow_s=2.0, red_s=5.0, offset_s=3.0),
            name="left_ped",
            seed=seed,
        ),
        RouteSpec(
            (RouteSegment(STRAIGHT, 70.0, junction_at_end=True), RouteSegment(FOLLOW, 50.0)),
            speed_limit_kmh=40.0,
            scripted_actors=(ActorSpawn("lead", "vehicle", 18.0, 0.0, 7.0, 0.0, "sedan"),),
            signal=SignalCycle(green_s=6.0, yellow_s=2.0, red_s=5.0),
            name="straight_lead",
            seed=seed,
        ),
        RouteSpec(
            (RouteSegment(RIGHT, 45.0), RouteSegment(FOLLOW, 45.0)),
            speed_limit_kmh=30.0,
            scripted_actors=(
                ActorSpawn("parked", "vehicle", 25.0, -3.6, 0.0, 0.0, "truck"),
                ActorSpawn("ped2", "pedestrian", 70.0, -5.0, 0.0, 1.2, "pedestrian", start_frame=60),
            ),
            name="right_parked",
            seed=seed,
        ),
        RouteSpec(
            (RouteSegment(FOLLOW, 110.0),),
            speed_limit_kmh=50.0,
            weather=Weather(precipitation=0.7, wetness=0.8, fog_density=0.1, sun_altitude_deg=20.0),
            scripted_actors=(
                ActorSpawn("stopped", "vehicle", 80.0, 0.0, 6.0, 0.0, "car", start_frame=220),
                ActorSpawn("ped3", "pedestrian", 50.0, 6.0, 0.0, -1.3, "pedestrian", start_frame=50),
            ),
            name="wet_blocked",
            seed=seed,
        ),
    ]


def ablation_suite(seed: int = 0) -> list[RouteSpec]:
    """Routes for the ablation grid: the mixed suite plus one turn and one dense road."""
    return default_suite(seed) + direction_flip_suite(seed)[:1] + dense_traffic_suite(seed)[:1]


SUITES = {
    "default": default_suite,
    "ablation": ablation_suite,
    "direction_flip": direction_flip_suite,
    "dense": dense_traffic_suite,
}
