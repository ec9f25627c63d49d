"""Route specifications and their reference-path geometry.

A route is a chain of segments. Each segment is a straight approach of
``length_m`` followed by the manoeuvre named by its command: turns add a
quarter arc (the junction), lane changes shift the path laterally over the
approach, straight/follow add nothing. ``junction_at_end`` marks a junction
at the end of the approach (for turns it is always present).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from csnkit.scene import Intent, Lane, Weather

TURN_RADIUS_M = 8.0
STRAIGHT_JUNCTION_M = 12.0
LANE_WIDTH_M = 3.5
COMMAND_HORIZON_M = 12.0
PATH_STEP_M = 0.25


@dataclass(frozen=True)
class RouteSegment:
    command: Intent
    length_m: float
    junction_at_end: bool = False

    def __post_init__(self):
        object.__setattr__(self, "command", Intent(self.command))
        if self.length_m <= 0:
            raise ValueError("segment length must be > 0")


@dataclass(frozen=True)
class ActorSpawn:
    """Scripted actor on a fixed straight-line path.

    Placement is route-relative: ``station_m`` along the reference path and
    ``offset_m`` to its left (positive) or right (negative). Velocity is
    given in the path frame at the spawn point (``along_ms`` forward,
    ``across_ms`` to the left) and held constant in the world.
    """

    id: str
    kind: str = "vehicle"
    station_m: float = 20.0
    offset_m: float = 0.0
    along_ms: float = 0.0
    across_ms: float = 0.0
    label: str = ""
    start_frame: int = 0


@dataclass(frozen=True)
class SignalCycle:
    """Fixed-cycle light applied to every junction on the route."""

    green_s: float = 8.0
    yellow_s: float = 2.0
    red_s: float = 6.0
    offset_s: float = 0.0

    def state_at(self, t: float) -> tuple[str, float]:
        period = self.green_s + self.yellow_s + self.red_s
        u = (t + self.offset_s) % period
        if u < self.green_s:
            return "green", u
        u -= self.green_s
        if u < self.yellow_s:
            return "yellow", u
        return "red", u - self.yellow_s


@dataclass(frozen=True)
class RouteSpec:
    segments: tuple[RouteSegment, ...]
    speed_limit_kmh: float = 30.0
    scripted_actors: tuple[ActorSpawn, ...] = ()
    seed: int = 0
    name: str = "route"
    signal: SignalCycle | None = None
    weather: Weather = field(default_factory=Weather)
    lanes_open: tuple[Lane, ...] = ()
    jitter: bool = True

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "scripted_actors", tuple(self.scripted_actors))
        object.__setattr__(self, "lanes_open", tuple(Lane(v) for v in self.lanes_open))
        if not self.segments:
            raise ValueError("route needs at least one segment")

    @cached_property
    def path(self) -> RoutePath:
        return build_path(self)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["segments"] = [
            {"command": s.command.value, "length_m": s.length_m, "junction_at_end": s.junction_at_end}
            for s in self.segments
        ]
        d["lanes_open"] = [lane.value for lane in self.lanes_open]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RouteSpec:
        sig = d.get("signal")
        return cls(
            segments=tuple(RouteSegment(**s) for s in d["segments"]),
            speed_limit_kmh=float(d.get("speed_limit_kmh", 30.0)),
            scripted_actors=tuple(ActorSpawn(**a) for a in d.get("scripted_actors", ())),
            seed=int(d.get("seed", 0)),
            name=d.get("name", "route"),
            signal=SignalCycle(**sig) if sig else None,
            weather=Weather(**d.get("weather", {})),
            lanes_open=tuple(d.get("lanes_open", ())),
            jitter=bool(d.get("jitter", True)),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> RouteSpec:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Junction:
    start_m: float
    end_m: float


class RoutePath:
    """Densely sampled reference path with per-sample route annotations."""

    def __init__(self, xy, heading, station, command_idx, junctions, segment_commands):
        self.xy = xy
        self.heading = heading
        self.station = station
        self.segment_idx = command_idx
        self.junctions = junctions
        self.segment_commands = segment_commands

    @property
    def length(self) -> float:
        return float(self.station[-1])

    def index_at(self, s: float) -> int:
        return min(int(np.searchsorted(self.station, s)), len(self.station) - 1)

    def pose_at(self, s: float) -> tuple[np.ndarray, float]:
        i = self.index_at(s)
        return self.xy[i], float(self.heading[i])

    def junction_at(self, s: float) -> Junction | None:
        for j in self.junctions:
            if j.start_m <= s < j.end_m:
                return j
        return None

    def next_junction(self, s: float) -> Junction | None:
        for j in self.junctions:
            if j.start_m >= s:
                return j
        return None

    def command_at(self, s: float) -> Intent:
        """Planner command at station ``s``.

        A segment's manoeuvre is announced only within the command horizon of
        its junction (or inside it); earlier on the approach the planner
        says ``follow``.
        """
        i = self.index_at(s)
        seg = int(self.segment_idx[i])
        cmd = self.segment_commands[seg]
        if cmd.is_turn:
            j = self.next_junction(s) if self.junction_at(s) is None else self.junction_at(s)
            if j is None or j.start_m - s > COMMAND_HORIZON_M:
                return Intent.FOLLOW
        return cmd

    def project(self, point, hint: float | None = None, window: float = 15.0) -> tuple[float, float]:
        """Station and signed lateral offset (left positive) of ``point``."""
        p = np.asarray(point, dtype=float)
        if hint is None:
            lo, hi = 0, len(self.station)
        else:
            lo = int(np.searchsorted(self.station, hint - window))
            hi = int(np.searchsorted(self.station, hint + window)) + 1
        d = self.xy[lo:hi] - p
        k = lo + int(np.argmin(np.einsum("ij,ij->i", d, d)))
        h = self.heading[k]
        rel = p - self.xy[k]
        along = rel[0] * np.cos(h) + rel[1] * np.sin(h)
        left = -rel[0] * np.sin(h) + rel[1] * np.cos(h)
        s = float(np.clip(self.station[k] + along, 0.0, self.length))
        return s, float(left)

    def points_at(self, stations) -> np.ndarray:
        idx = np.minimum(np.searchsorted(self.station, stations), len(self.station) - 1)
        return self.xy[idx]

    def to_world(self, s: float, offset: float) -> np.ndarray:
        xy, h = self.pose_at(s)
        return xy + offset * np.array([-np.sin(h), np.cos(h)])


def build_path(route: RouteSpec) -> RoutePath:
    pts = [np.zeros(2)]
    heads = [0.0]
    seg_ids = [0]
    junctions = []
    pos = np.zeros(2)
    h = np.pi / 2  # start heading "north" in the world frame
    heads[0] = h
    s = 0.0
    stations = [0.0]

    def emit(p, hh, seg):
        nonlocal s
        s += float(np.hypot(*(p - pts[-1])))
        pts.append(p.copy())
        heads.append(hh)
        seg_ids.append(seg)
        stations.append(s)

    for k, seg in enumerate(route.segments):
        n = max(1, int(round(seg.length_m / PATH_STEP_M)))
        fwd = np.array([np.cos(h), np.sin(h)])
        left = np.array([-np.sin(h), np.cos(h)])
        shift = 0.0
        if seg.command is Intent.LANE_CHANGE_LEFT:
            shift = LANE_WIDTH_M
        elif seg.command is Intent.LANE_CHANGE_RIGHT:
            shift = -LANE_WIDTH_M
        start = pos.copy()
        for i in range(1, n + 1):
            u = i / n
            # smoothstep lateral shift over the approach
            lat = shift * (3 * u**2 - 2 * u**3)
            p = start + fwd * seg.length_m * u + left * lat
            emit(p, h, k)
        pos = pts[-1].copy()

        if seg.command.is_turn:
            sign = 1.0 if seg.command is Intent.LEFT_TURN else -1.0
            j0 = s
            center = pos + sign * TURN_RADIUS_M * np.array([-np.sin(h), np.cos(h)])
            arc = TURN_RADIUS_M * np.pi / 2
            m = max(2, int(round(arc / PATH_STEP_M)))
            for i in range(1, m + 1):
                a = h + sign * (np.pi / 2) * i / m
                p = center - sign * TURN_RADIUS_M * np.array([-np.sin(a), np.cos(a)])
                emit(p, a, k)
            h = h + sign * np.pi / 2
            pos = pts[-1].copy()
            junctions.append(Junction(j0, s))
        elif seg.junction_at_end:
            j0 = s
            fwd = np.array([np.cos(h), np.sin(h)])
            m = int(round(STRAIGHT_JUNCTION_M / PATH_STEP_M))
            start = pos.copy()
            for i in range(1, m + 1):
                emit(start + fwd * STRAIGHT_JUNCTION_M * i / m, h, k)
            pos = pts[-1].copy()
            junctions.append(Junction(j0, s))

    return RoutePath(
        xy=np.array(pts),
        heading=np.array(heads),
        station=np.array(stations),
        command_idx=np.array(seg_ids),
        junctions=tuple(junctions),
        segment_commands=tuple(seg.command for seg in route.segments),
    )


def load_route(path) -> RouteSpec:
    with open(path) as fh:
        return RouteSpec.from_json(fh.read())
