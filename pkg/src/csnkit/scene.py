"""World-state data model and spatial classification.

Ego frame convention used everywhere in the package: ``x`` is lateral
(negative = left of the ego), ``y`` is longitudinal (positive = ahead).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

# detection window (ego frame, metres)
RANGE_FORWARD_M = 50.0
RANGE_REAR_M = 15.0
RANGE_LATERAL_M = 15.0

# zone boundaries
CORRIDOR_HALF_WIDTH_M = 2.0
NEAR_M = 10.0
FAR_M = 25.0

STATIONARY_SPEED_MS = 0.1


class ActorKind(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"


class LightState(str, Enum):
    RED = "red"
    YELLOW = "yellow"
    GREEN = "green"
    NONE = "none"


class Lane(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    EGO = "ego"


class Intent(str, Enum):
    """Navigation command issued by the route planner."""

    LEFT_TURN = "left_turn"
    RIGHT_TURN = "right_turn"
    STRAIGHT = "straight"
    LANE_CHANGE_LEFT = "lane_change_left"
    LANE_CHANGE_RIGHT = "lane_change_right"
    FOLLOW = "follow"

    @property
    def is_turn(self) -> bool:
        return self in (Intent.LEFT_TURN, Intent.RIGHT_TURN)


# alias kept for callers that use the longer name
NavigationIntent = Intent


class Sector(str, Enum):
    AHEAD = "ahead"
    AHEAD_LEFT = "ahead_left"
    AHEAD_RIGHT = "ahead_right"
    LEFT = "left"
    RIGHT = "right"
    BEHIND = "behind"
    BEHIND_LEFT = "behind_left"
    BEHIND_RIGHT = "behind_right"

    @property
    def mirrored(self) -> Sector:
        return _MIRROR.get(self, self)

    @property
    def phrase(self) -> str:
        """Human-readable form, e.g. ``ahead-left``."""
        return self.value.replace("_", "-")


_MIRROR = {
    Sector.AHEAD_LEFT: Sector.AHEAD_RIGHT,
    Sector.AHEAD_RIGHT: Sector.AHEAD_LEFT,
    Sector.LEFT: Sector.RIGHT,
    Sector.RIGHT: Sector.LEFT,
    Sector.BEHIND_LEFT: Sector.BEHIND_RIGHT,
    Sector.BEHIND_RIGHT: Sector.BEHIND_LEFT,
}


class Band(str, Enum):
    NEAR = "near"
    MID = "mid"
    FAR = "far"

    @property
    def order(self) -> int:
        return _BAND_ORDER[self]


_BAND_ORDER = {Band.NEAR: 0, Band.MID: 1, Band.FAR: 2}


@dataclass(frozen=True)
class Zone:
    sector: Sector
    band: Band


class RangeError(ValueError):
    """Raised when an actor lies outside the detection window."""


@dataclass(frozen=True)
class EgoState:
    speed_kmh: float
    speed_limit_kmh: float
    yaw_rate: float = 0.0
    position: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0

    def __post_init__(self):
        if self.speed_kmh < 0:
            raise ValueError(f"speed_kmh must be >= 0, got {self.speed_kmh}")
        if self.speed_limit_kmh <= 0:
            raise ValueError(f"speed_limit_kmh must be > 0, got {self.speed_limit_kmh}")

    @property
    def speed_ms(self) -> float:
        return self.speed_kmh / 3.6


@dataclass(frozen=True)
class Actor:
    """A detected vehicle or pedestrian, expressed in the ego frame.

    ``label`` is an optional surface noun for narration (``"sedan"``); it
    defaults to the kind.
    """

    id: str
    kind: ActorKind
    rel_position: tuple[float, float]
    rel_velocity: tuple[float, float] = (0.0, 0.0)
    speed_kmh: float = 0.0
    is_stationary: bool = True
    label: str = ""

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.rel_position):
            raise ValueError(f"actor {self.id}: rel_position must be finite")

    @property
    def lateral(self) -> float:
        return self.rel_position[0]

    @property
    def longitudinal(self) -> float:
        return self.rel_position[1]

    @property
    def distance(self) -> float:
        return math.hypot(*self.rel_position)

    @property
    def noun(self) -> str:
        return self.label or self.kind.value


def make_actor(
    id: str,
    kind: ActorKind | str,
    rel_position,
    world_velocity=(0.0, 0.0),
    ego_speed_ms: float = 0.0,
    label: str = "",
) -> Actor:
    """Build an Actor from its own velocity (ego-frame axes, m/s).

    The stored ``rel_velocity`` subtracts ego motion, and ``speed_kmh`` /
    ``is_stationary`` are derived so that the Actor invariants hold.
    """
    vx, vy = map(float, world_velocity)
    speed = math.hypot(vx, vy)
    return Actor(
        id=id,
        kind=ActorKind(kind),
        rel_position=(float(rel_position[0]), float(rel_position[1])),
        rel_velocity=(vx, vy - ego_speed_ms),
        speed_kmh=speed * 3.6,
        is_stationary=speed < STATIONARY_SPEED_MS,
        label=label,
    )


@dataclass(frozen=True)
class TrafficSignal:
    state: LightState = LightState.NONE
    elapsed_s: float = 0.0
    speed_limit_kmh: float | None = None

    def __post_init__(self):
        if self.elapsed_s < 0:
            raise ValueError("elapsed_s must be >= 0")


@dataclass(frozen=True)
class RoadTopology:
    junction_distance_m: float | None = None
    in_junction: bool = False
    lanes_open: tuple[Lane, ...] = ()
    curvature: float = 0.0

    def __post_init__(self):
        if self.junction_distance_m is not None and self.junction_distance_m < 0:
            raise ValueError("junction_distance_m must be >= 0")
        if self.in_junction and self.junction_distance_m not in (None, 0.0):
            raise ValueError("in_junction requires junction_distance_m == 0")


@dataclass(frozen=True)
class Weather:
    precipitation: float = 0.0
    fog_density: float = 0.0
    wetness: float = 0.0
    sun_altitude_deg: float = 45.0

    def __post_init__(self):
        for name in ("precipitation", "fog_density", "wetness"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class SceneState:
    ego: EgoState
    actors: tuple[Actor, ...] = ()
    signal: TrafficSignal = field(default_factory=TrafficSignal)
    road: RoadTopology = field(default_factory=RoadTopology)
    weather: Weather = field(default_factory=Weather)
    frame: int = 0

    def __post_init__(self):
        object.__setattr__(self, "actors", tuple(self.actors))
        for a in self.actors:
            if not within_detection_range(a):
                raise RangeError(f"actor {a.id} at {a.rel_position} outside detection range")

    # -- serialisation -------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "ego": {
                "speed_kmh": self.ego.speed_kmh,
                "speed_limit_kmh": self.ego.speed_limit_kmh,
                "yaw_rate": self.ego.yaw_rate,
                "position": list(self.ego.position),
                "heading": self.ego.heading,
            },
            "actors": [
                {
                    "id": a.id,
                    "kind": a.kind.value,
                    "rel_position": list(a.rel_position),
                    "rel_velocity_ms": list(a.rel_velocity),
                    "speed_kmh": a.speed_kmh,
                    "is_stationary": a.is_stationary,
                    "label": a.label,
                }
                for a in self.actors
            ],
            "signal": {
                "state": self.signal.state.value,
                "elapsed_s": self.signal.elapsed_s,
                "speed_limit_kmh": self.signal.speed_limit_kmh,
            },
            "road": {
                "junction_distance_m": self.road.junction_distance_m,
                "in_junction": self.road.in_junction,
                "lanes_open": [lane.value for lane in self.road.lanes_open],
                "curvature": self.road.curvature,
            },
            "weather": {
                "precipitation": self.weather.precipitation,
                "fog_density": self.weather.fog_density,
                "wetness": self.weather.wetness,
                "sun_altitude_deg": self.weather.sun_altitude_deg,
            },
            "frame": self.frame,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SceneState:
        e = d["ego"]
        ego = EgoState(
            speed_kmh=float(e["speed_kmh"]),
            speed_limit_kmh=float(e["speed_limit_kmh"]),
            yaw_rate=float(e.get("yaw_rate", 0.0)),
            position=tuple(e.get("position", (0.0, 0.0))),
            heading=float(e.get("heading", 0.0)),
        )
        actors = tuple(
            Actor(
                id=str(a["id"]),
                kind=ActorKind(a["kind"]),
                rel_position=tuple(map(float, a["rel_position"])),
                rel_velocity=tuple(map(float, a.get("rel_velocity_ms", (0.0, 0.0)))),
                speed_kmh=float(a.get("speed_kmh", 0.0)),
                is_stationary=bool(a.get("is_stationary", True)),
                label=a.get("label", ""),
            )
            for a in d.get("actors", ())
        )
        s = d.get("signal", {})
        r = d.get("road", {})
        w = d.get("weather", {})
        return cls(
            ego=ego,
            actors=actors,
            signal=TrafficSignal(
                state=LightState(s.get("state", "none")),
                elapsed_s=float(s.get("elapsed_s", 0.0)),
                speed_limit_kmh=s.get("speed_limit_kmh"),
            ),
            road=RoadTopology(
                junction_distance_m=r.get("junction_distance_m"),
                in_junction=bool(r.get("in_junction", False)),
                lanes_open=tuple(Lane(v) for v in r.get("lanes_open", ())),
                curvature=float(r.get("curvature", 0.0)),
            ),
            weather=Weather(**w),
            frame=int(d.get("frame", 0)),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> SceneState:
        return cls.from_dict(json.loads(text))


def within_detection_range(actor: Actor) -> bool:
    x, y = actor.rel_position
    return -RANGE_REAR_M <= y <= RANGE_FORWARD_M and abs(x) <= RANGE_LATERAL_M


def classify_sector(x: float, y: float) -> Sector:
    if abs(x) < CORRIDOR_HALF_WIDTH_M:
        return Sector.AHEAD if y >= 0 else Sector.BEHIND
    left = x < 0
    if abs(y) < CORRIDOR_HALF_WIDTH_M:
        return Sector.LEFT if left else Sector.RIGHT
    if y > 0:
        return Sector.AHEAD_LEFT if left else Sector.AHEAD_RIGHT
    return Sector.BEHIND_LEFT if left else Sector.BEHIND_RIGHT


def classify_band(distance: float) -> Band:
    # both band edges are inclusive on the nearer side: 10 m is near, 25 m is mid
    if distance <= NEAR_M:
        return Band.NEAR
    if distance <= FAR_M:
        return Band.MID
    return Band.FAR


def classify_zone(actor: Actor) -> Zone:
    """Map an in-range actor to its (sector, band) zone.

    Raises:
        RangeError: if the actor is outside the detection window.
    """
    if not within_detection_range(actor):
        raise RangeError(f"actor {actor.id} at {actor.rel_position} is out of range")
    x, y = actor.rel_position
    return Zone(classify_sector(x, y), classify_band(math.hypot(x, y)))


_CONFLICT_ZONES = {
    Intent.LEFT_TURN: frozenset({Sector.AHEAD_LEFT, Sector.AHEAD, Sector.LEFT}),
    Intent.RIGHT_TURN: frozenset({Sector.AHEAD_RIGHT, Sector.AHEAD, Sector.RIGHT}),
    Intent.STRAIGHT: frozenset({Sector.AHEAD}),
    Intent.FOLLOW: frozenset({Sector.AHEAD}),
    Intent.LANE_CHANGE_LEFT: frozenset({Sector.LEFT, Sector.AHEAD_LEFT, Sector.BEHIND_LEFT}),
    Intent.LANE_CHANGE_RIGHT: frozenset({Sector.RIGHT, Sector.AHEAD_RIGHT, Sector.BEHIND_RIGHT}),
}


def conflict_zones(intent: Intent | str) -> frozenset[Sector]:
    """Sectors on the conflict side of the intended manoeuvre."""
    return _CONFLICT_ZONES[Intent(intent)]


def scene_from_actors(ego: EgoState, actors: Iterable[Actor], **kwargs) -> SceneState:
    """Build a scene, silently dropping actors outside the detection window."""
    return SceneState(ego=ego, actors=tuple(a for a in actors if within_detection_range(a)), **kwargs)
