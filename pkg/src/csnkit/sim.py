"""Desk-scale closed-loop kinematic simulation.

The loop per frame is: ground-truth scene -> (optional perception noise) ->
narration -> policy stub -> (TTC monitor / Simplex supervisor) -> clamp ->
kinematic step. Everything is deterministic given the route and noise seeds.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from csnkit import narrator
from csnkit.narrator import ConflictType
from csnkit.routes import TURN_RADIUS_M, RouteSpec
from csnkit.scene import (
    Actor,
    ActorKind,
    EgoState,
    Intent,
    LightState,
    RoadTopology,
    SceneState,
    TrafficSignal,
    make_actor,
    within_detection_range,
)
from csnkit.supervisor import (
    MAX_STEER_RAD,
    WHEELBASE_M,
    ControlCommand,
    Mode,
    SupervisorConfig,
    SupervisorState,
    clamp_controls,
    fallback_controls,
    pure_pursuit_steer,
    speed_controller,
    step_supervisor_traced,
    stopping_speed,
    world_to_ego,
)

log = logging.getLogger(__name__)

DT_S = 0.05
FRAME_BUDGET = 6000
BLOCKED_FRAMES = 200
BLOCKED_SPEED_MS = 0.1
MAX_ACCEL = 3.5
MAX_DECEL = 8.0
RADIUS = {ActorKind.VEHICLE: 1.5, ActorKind.PEDESTRIAN: 0.4}
EGO_RADIUS = RADIUS[ActorKind.VEHICLE]
DEVIATION_M = 6.0
COLLISION_LIMIT = 3
JUNCTION_VIEW_M = 50.0
TURN_SPEED_MS = math.sqrt(3.0 * TURN_RADIUS_M)
N_WAYPOINTS = 10
WAYPOINT_SPACING_M = 3.0
NARRATION_EVERY = 20
FLAT_HESITATE_M = 15.0
FLAT_REACT_M = 12.0

PENALTY = {
    "collision_pedestrian": 0.50,
    "collision_vehicle": 0.60,
    "collision_static": 0.65,
    "red_light": 0.70,
}


class Termination(str, Enum):
    COMPLETED = "completed"
    BLOCKED = "blocked"
    COLLISION_LIMIT = "collision_limit"
    TIMEOUT = "timeout"
    ROUTE_DEVIATION = "route_deviation"


# --------------------------------------------------------------------------
# kinematics


def bicycle_step(x, y, heading, speed, cmd: ControlCommand, dt: float = DT_S):
    """Advance a kinematic bicycle; positive steer turns right (clockwise).

    Position follows the exact arc for the step's mean speed, so constant
    inputs trace a circle of radius ``wheelbase / tan(steer_angle)``.
    """
    accel = cmd.throttle * MAX_ACCEL - cmd.brake * MAX_DECEL
    v_new = max(0.0, speed + accel * dt)
    v = 0.5 * (speed + v_new)
    delta = cmd.steer * MAX_STEER_RAD
    omega = -v * math.tan(delta) / WHEELBASE_M
    if abs(omega) < 1e-12:
        x += v * math.cos(heading) * dt
        y += v * math.sin(heading) * dt
    else:
        h1 = heading + omega * dt
        x += v / omega * (math.sin(h1) - math.sin(heading))
        y -= v / omega * (math.cos(h1) - math.cos(heading))
        heading = h1
    return x, y, heading, v_new, omega


def ego_to_world(rel, ego_pos, heading) -> np.ndarray:
    x, y = rel
    c, s = math.cos(heading), math.sin(heading)
    right = np.array([s, -c])
    fwd = np.array([c, s])
    return np.asarray(ego_pos, dtype=float) + x * right + y * fwd


def _vec_to_ego(v, heading) -> tuple[float, float]:
    c, s = math.cos(heading), math.sin(heading)
    return -(-v[0] * s + v[1] * c), v[0] * c + v[1] * s


def step_world(scene: SceneState, cmd: ControlCommand, dt_s: float = DT_S) -> SceneState:
    """Advance one scene: bicycle update for the ego, constant velocity for actors.

    Actors are carried in world coordinates for the step and re-expressed in
    the new ego frame; those that leave the detection window are dropped.
    """
    ego = scene.ego
    v0 = ego.speed_ms
    pos0 = np.asarray(ego.position, dtype=float)
    h0 = ego.heading
    x, y, h1, v1, omega = bicycle_step(pos0[0], pos0[1], h0, v0, cmd, dt_s)

    actors = []
    for a in scene.actors:
        wp = ego_to_world(a.rel_position, pos0, h0)
        own_rel = (a.rel_velocity[0], a.rel_velocity[1] + v0)
        wv = ego_to_world(own_rel, (0.0, 0.0), h0)
        wp = wp + wv * dt_s
        rel = world_to_ego(wp, (x, y), h1)
        own = _vec_to_ego(wv, h1)
        moved = replace(a, rel_position=rel, rel_velocity=(own[0], own[1] - v1))
        if within_detection_range(moved):
            actors.append(moved)
    new_ego = replace(ego, speed_kmh=v1 * 3.6, position=(x, y), heading=h1, yaw_rate=omega)
    return replace(scene, ego=new_ego, actors=tuple(actors), frame=scene.frame + 1)


def collisions(scene: SceneState) -> list[Actor]:
    """Actors whose disc overlaps the ego disc."""
    return [a for a in scene.actors if a.distance < EGO_RADIUS + RADIUS[a.kind]]


# --------------------------------------------------------------------------
# perception noise


@dataclass(frozen=True)
class NoiseConfig:
    dist_sigma_m: float = 0.0
    speed_noise_frac: float = 0.0
    miss_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.dist_sigma_m, self.speed_noise_frac, self.miss_rate) < 0 or self.miss_rate > 1:
            raise ValueError("noise parameters must be non-negative and miss_rate <= 1")

    @property
    def is_clean(self) -> bool:
        return self.dist_sigma_m == 0 and self.speed_noise_frac == 0 and self.miss_rate == 0


NOISE_LEVELS = {
    "clean": NoiseConfig(0.0, 0.0, 0.0),
    "mild": NoiseConfig(1.0, 0.10, 0.0),
    "moderate": NoiseConfig(2.0, 0.20, 0.0),
    "severe": NoiseConfig(5.0, 0.20, 0.10),
    "extreme": NoiseConfig(5.0, 0.30, 0.20),
}


def inject_noise(scene: SceneState, noise: NoiseConfig) -> SceneState:
    """Perturb the narrator's view of the actors.

    Each actor's depth gets Gaussian noise, its speed a multiplicative
    uniform factor, and it is dropped with probability ``miss_rate``.
    Randomness is keyed on ``(noise.seed, scene.frame)``.
    """
    if noise.is_clean:
        return scene
    rng = np.random.default_rng([noise.seed, scene.frame])
    v_ego = scene.ego.speed_ms
    out = []
    for a in scene.actors:
        drop, dn, us = rng.random(), rng.normal(0.0, noise.dist_sigma_m), rng.uniform(-1.0, 1.0)
        if drop < noise.miss_rate:
            continue
        # range error acts along depth; the lateral offset is kept so an
        # actor never drifts across lanes because of distance noise
        factor = 1.0 + us * noise.speed_noise_frac
        own = (a.rel_velocity[0] * factor, (a.rel_velocity[1] + v_ego) * factor)
        noisy = replace(
            a,
            rel_position=(a.rel_position[0], a.rel_position[1] + dn),
            rel_velocity=(own[0], own[1] - v_ego),
            speed_kmh=a.speed_kmh * factor,
        )
        if within_detection_range(noisy):
            out.append(noisy)
    return replace(scene, actors=tuple(out))


# --------------------------------------------------------------------------
# TTC baseline monitor

TTC_LANE_WINDOW_M = 4.0


def time_to_collision(scene: SceneState, lane_window_m: float = TTC_LANE_WINDOW_M) -> float:
    """TTC to the nearest forward actor inside the lateral lane window.

    The monitor has no lane map: any actor whose lateral offset is within
    ``lane_window_m`` counts as in-lane. Returns ``inf`` when nothing closes.
    """
    best = None
    for a in scene.actors:
        if a.longitudinal > 0 and abs(a.lateral) < lane_window_m:
            if best is None or a.longitudinal < best.longitudinal:
                best = a
    if best is None:
        return math.inf
    closing = -best.rel_velocity[1]
    if closing <= 0:
        return math.inf
    return best.longitudinal / closing


def ttc_monitor(scene: SceneState, threshold_s: float = 2.0, lane_window_m: float = TTC_LANE_WINDOW_M) -> bool:
    return time_to_collision(scene, lane_window_m) < threshold_s


# --------------------------------------------------------------------------
# policy stubs


class PolicyKind(str, Enum):
    FAITHFUL = "faithful"
    DIRECTION_FLIP = "direction_flip"
    FREEZE = "freeze"
    NOISY_FAITHFUL = "noisy_faithful"


@dataclass(frozen=True)
class PolicyStub:
    kind: PolicyKind = PolicyKind.FAITHFUL
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.params.items()))))


@dataclass
class PolicyContext:
    """What the policy stub sees on one frame."""

    route: RouteSpec
    station: float
    scene: SceneState  # ground truth (pose, signal, road)
    view: SceneState  # narrator's (possibly noisy) view
    command: Intent
    condition: str
    rng: np.random.Generator
    memory: dict


def route_waypoints(ctx: PolicyContext) -> np.ndarray:
    ego = ctx.scene.ego
    pts = ctx.route.path.points_at(ctx.station + WAYPOINT_SPACING_M * np.arange(1, N_WAYPOINTS + 1))
    d = pts - np.asarray(ego.position)
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    # ego frame: x to the right, y forward
    return np.column_stack((d[:, 0] * s - d[:, 1] * c, d[:, 0] * c + d[:, 1] * s))


def _hazard_speed(ctx: PolicyContext) -> float:
    """Speed the narration-conditioned policy is willing to carry."""
    limit = ctx.scene.ego.speed_limit_kmh / 3.6
    target = limit
    records = narrator.filter_relevant(ctx.view, ctx.command)
    frame = ctx.scene.frame

    if ctx.condition == "template":
        # no distances in the text: generic caution plus a short visual reflex
        if any(r.actor is not None for r in records):
            target = min(target, 0.6 * limit)
        hazards = [r for r in records if r.actor is not None and r.zone.sector.value == "ahead" and r.distance_m < 10.0]
    elif ctx.condition == "flat":
        # facts without links: every listed actor reads as a reason to
        # hesitate, and path conflicts are acted on only once they are close
        if any(r.actor is not None and r.distance_m < FLAT_HESITATE_M for r in records):
            target = min(target, 0.5 * limit)
        hazards = [
            r for r in records
            if r.conflict_type in (ConflictType.BLOCKING, ConflictType.TEMPORAL) and r.distance_m < FLAT_REACT_M
        ]
    else:
        hazards = [r for r in records if r.conflict_type in (ConflictType.BLOCKING, ConflictType.TEMPORAL)]

    mem = ctx.memory.setdefault("hazards", {})
    for r in hazards:
        mem[r.actor.id] = (frame, r.distance_m, r.actor.kind)
    v = ctx.scene.ego.speed_ms
    for aid, (seen, dist, kind) in list(mem.items()):
        age = frame - seen
        if age > 10:
            del mem[aid]
            continue
        dist -= v * age * DT_S
        margin = 6.0 if kind is ActorKind.PEDESTRIAN else 8.0
        target = min(target, stopping_speed(dist - margin))
    return target


def _route_speed(ctx: PolicyContext, target: float) -> float:
    """Cap speed for upcoming turns and for red/yellow lights."""
    scene = ctx.scene
    path = ctx.route.path
    if path.junction_at(ctx.station) is not None:
        if _turning(path, ctx.station):
            target = min(target, TURN_SPEED_MS)
    else:
        nxt = path.next_junction(ctx.station)
        if nxt is not None and _turning(path, nxt.start_m):
            target = min(target, math.sqrt(TURN_SPEED_MS**2 + 2 * 2.5 * (nxt.start_m - ctx.station)))
    if scene.signal.state in (LightState.RED, LightState.YELLOW) and not scene.road.in_junction:
        jd = scene.road.junction_distance_m
        if jd is not None:
            v = scene.ego.speed_ms
            committed = scene.signal.state is LightState.YELLOW and jd < v * v / (2 * 5.0)
            if not committed:
                target = min(target, stopping_speed(jd - 2.0))
    return target


def run_policy(policy: PolicyStub, ctx: PolicyContext) -> tuple[np.ndarray, float]:
    """Return ``(waypoints in ego frame, target speed m/s)``."""
    limit = ctx.scene.ego.speed_limit_kmh / 3.6
    if policy.kind is PolicyKind.FREEZE:
        wps = np.array([(0.0, WAYPOINT_SPACING_M * k) for k in range(1, N_WAYPOINTS + 1)])
        return wps, limit

    wps = route_waypoints(ctx)
    target = _route_speed(ctx, _hazard_speed(ctx))
    approaching_turn = ctx.command.is_turn and not ctx.scene.road.in_junction
    if policy.kind is PolicyKind.DIRECTION_FLIP:
        if approaching_turn:
            wps = _mirrored_shortcut(wps)
    elif policy.kind is PolicyKind.NOISY_FAITHFUL:
        sigma = float(policy.params.get("sigma_m", 0.3))
        wps = wps + ctx.rng.normal(0.0, sigma, size=wps.shape)
        flip_prob = float(policy.params.get("flip_prob", 0.0))
        if approaching_turn and flip_prob > 0:
            # one draw per junction approach, remembered until the junction
            junction = ctx.route.path.next_junction(ctx.station)
            key = round(junction.start_m, 3) if junction is not None else None
            flips = ctx.memory.setdefault("flips", {})
            if key not in flips:
                # own stream per junction so every text condition sees the same draw
                draw = np.random.default_rng([ctx.route.seed, 11, int(key * 1000) if key is not None else 0]).random()
                flips[key] = bool(draw < flip_prob)
            if flips[key]:
                wps = _mirrored_shortcut(wps)
    return wps, target


def _mirrored_shortcut(wps: np.ndarray) -> np.ndarray:
    """Target-point shortcut: head straight for the mirrored final waypoint."""
    goal = np.array([-wps[-1, 0], wps[-1, 1]])
    return np.outer(np.arange(1, N_WAYPOINTS + 1) / N_WAYPOINTS, goal)


def waypoint_controls(wps: np.ndarray, target_ms: float, speed_ms: float) -> ControlCommand:
    lookahead = max(4.0, 0.8 * speed_ms)
    dist = np.hypot(wps[:, 0], wps[:, 1])
    idx = int(np.argmax(dist >= lookahead)) if np.any(dist >= lookahead) else len(wps) - 1
    steer = pure_pursuit_steer(wps[idx])
    throttle, brake = speed_controller(target_ms, speed_ms)
    return ControlCommand(steer=steer, throttle=throttle, brake=brake)


# --------------------------------------------------------------------------
# episodes


@dataclass
class FrameRecord:
    frame: int
    station: float
    x: float
    y: float
    heading: float
    speed_ms: float
    steer: float
    throttle: float
    brake: float
    source: str
    ttc_brake: bool = False
    monitor: dict | None = None
    narration: str | None = None
    command: str = "follow"
    in_junction: bool = False
    ac_throttle: float = 0.0
    waypoints: list | None = None

    def as_dict(self) -> dict:
        d = {
            "frame": self.frame,
            "station": round(self.station, 6),
            "x": round(self.x, 6),
            "y": round(self.y, 6),
            "heading": round(self.heading, 6),
            "speed_ms": round(self.speed_ms, 6),
            "steer": round(self.steer, 6),
            "throttle": round(self.throttle, 6),
            "brake": round(self.brake, 6),
            "source": self.source,
            "ttc_brake": self.ttc_brake,
        }
        if self.monitor is not None:
            d["monitor"] = self.monitor
        if self.narration is not None:
            d["narration"] = self.narration
        return d

    def trajectory_line(self) -> dict:
        """The AC's proposal at this frame, in the format ``replay_trajectory`` reads."""
        if self.waypoints is None:
            raise ValueError("frame was recorded without waypoints")
        return {
            "frame": self.frame,
            "x": self.x,
            "y": self.y,
            "speed_ms": self.speed_ms,
            "throttle": self.ac_throttle,
            "command": self.command,
            "in_junction": self.in_junction,
            "waypoints": self.waypoints,
        }


@dataclass
class EpisodeTrace:
    route_name: str
    frames: list[FrameRecord]
    infractions: list[tuple[str, int]]
    rc_fraction: float
    terminated: Termination
    seed: int = 0
    ttc_brake_events: int = 0
    takeovers: int = 0

    @property
    def infraction_score(self) -> float:
        score = 1.0
        for kind, _ in self.infractions:
            score *= PENALTY.get(kind, 1.0)
        return score

    @property
    def route_completion(self) -> float:
        return 100.0 * self.rc_fraction

    @property
    def driving_score(self) -> float:
        return self.route_completion * self.infraction_score

    def violations(self, name: str) -> list[int]:
        return [f.frame for f in self.frames if f.monitor is not None and not f.monitor[name]]

    def as_dict(self) -> dict:
        return {
            "route": self.route_name,
            "seed": self.seed,
            "terminated": self.terminated.value,
            "rc_fraction": round(self.rc_fraction, 9),
            "infractions": [list(i) for i in self.infractions],
            "ttc_brake_events": self.ttc_brake_events,
            "takeovers": self.takeovers,
            "frames": [f.as_dict() for f in self.frames],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


@dataclass
class _WorldActor:
    id: str
    kind: ActorKind
    label: str
    p0: np.ndarray
    v: np.ndarray
    start_frame: int

    def position(self, frame: int) -> np.ndarray:
        return self.p0 + self.v * max(0, frame - self.start_frame) * DT_S

    def velocity(self, frame: int) -> np.ndarray:
        return self.v if frame >= self.start_frame else np.zeros(2)


def spawn_actors(route: RouteSpec) -> list[_WorldActor]:
    rng = np.random.default_rng(route.seed)
    path = route.path
    out = []
    for spec in route.scripted_actors:
        ds, fv = 0.0, 1.0
        if route.jitter:
            ds = rng.uniform(-2.0, 2.0)
            fv = rng.uniform(0.9, 1.1)
        s = spec.station_m + ds
        xy, h = path.pose_at(s)
        p0 = path.to_world(s, spec.offset_m)
        fwd = np.array([math.cos(h), math.sin(h)])
        left = np.array([-math.sin(h), math.cos(h)])
        v = fv * (spec.along_ms * fwd + spec.across_ms * left)
        out.append(_WorldActor(spec.id, ActorKind(spec.kind), spec.label, p0, v, spec.start_frame))
    return out


def _observe(route, actors, frame, pos, heading, speed, yaw_rate, station) -> SceneState:
    path = route.path
    ego = EgoState(
        speed_kmh=speed * 3.6,
        speed_limit_kmh=route.speed_limit_kmh,
        yaw_rate=yaw_rate,
        position=(float(pos[0]), float(pos[1])),
        heading=float(heading),
    )
    seen = []
    for wa in actors:
        rel = world_to_ego(wa.position(frame), pos, heading)
        a = make_actor(wa.id, wa.kind, rel, _vec_to_ego(wa.velocity(frame), heading), speed, wa.label)
        if within_detection_range(a):
            seen.append(a)

    here = path.junction_at(station)
    nxt = path.next_junction(station)
    if here is not None:
        road = RoadTopology(0.0, True, route.lanes_open, 1.0 / TURN_RADIUS_M if _turning(path, station) else 0.0)
    elif nxt is not None and nxt.start_m - station <= JUNCTION_VIEW_M:
        road = RoadTopology(nxt.start_m - station, False, route.lanes_open)
    else:
        road = RoadTopology(None, False, route.lanes_open)

    signal = TrafficSignal()
    if route.signal is not None and (here is not None or road.junction_distance_m is not None):
        state, elapsed = route.signal.state_at(frame * DT_S)
        signal = TrafficSignal(LightState(state), elapsed)
    return SceneState(ego=ego, actors=tuple(seen), signal=signal, road=road, weather=route.weather, frame=frame)


def _turning(path, station) -> bool:
    return path.segment_commands[int(path.segment_idx[path.index_at(station)])].is_turn


def run_episode(
    route: RouteSpec,
    policy: PolicyStub | str = PolicyKind.FAITHFUL,
    narrator_condition: str = "csn",
    supervisor: SupervisorConfig | None = None,
    ttc: float | None = None,
    noise: NoiseConfig | None = None,
    frame_budget: int = FRAME_BUDGET,
    record_narration: bool = True,
) -> EpisodeTrace:
    """Run one closed-loop episode and return its trace."""
    if not isinstance(policy, PolicyStub):
        policy = PolicyStub(PolicyKind(policy))
    if narrator_condition not in ("template", "flat", "csn"):
        raise ValueError(f"unknown narrator condition {narrator_condition!r}")
    if supervisor is not None and ttc is not None:
        log.info("route %s: semantic supervisor and TTC monitor both enabled", route.name)

    path = route.path
    actors = spawn_actors(route)
    rng = np.random.default_rng([route.seed, 7])
    memory: dict = {}

    xy0, h0 = path.pose_at(0.0)
    x, y, heading, speed, yaw_rate = float(xy0[0]), float(xy0[1]), h0, 0.0, 0.0
    progress = 0.0
    sup_state = SupervisorState()
    frames: list[FrameRecord] = []
    infractions: list[tuple[str, int]] = []
    hit: set[str] = set()
    stopped_for = 0
    ttc_events = 0
    prev_ttc = False
    takeovers = 0
    prev_mode = Mode.AC
    terminated = Termination.TIMEOUT

    for frame in range(frame_budget):
        s, offset = path.project((x, y), hint=progress)
        progress = max(progress, s)
        if progress >= path.length - 1.0:
            terminated = Termination.COMPLETED
            progress = path.length
            break
        if abs(offset) > DEVIATION_M:
            terminated = Termination.ROUTE_DEVIATION
            break

        scene = _observe(route, actors, frame, np.array([x, y]), heading, speed, yaw_rate, progress)
        command = path.command_at(progress)
        view = inject_noise(scene, noise) if noise is not None else scene
        ctx = PolicyContext(route, progress, scene, view, command, narrator_condition, rng, memory)
        wps, target = run_policy(policy, ctx)
        cmd = waypoint_controls(wps, target, speed)
        ac_throttle = cmd.throttle
        source = "AC"

        ttc_brake = False
        if ttc is not None and ttc_monitor(scene, ttc):
            cmd = ControlCommand(steer=cmd.steer, throttle=0.0, brake=1.0)
            ttc_brake = True
        ttc_events += int(ttc_brake and not prev_ttc)
        prev_ttc = ttc_brake

        monitor = None
        if supervisor is not None:
            sup_state, rec = step_supervisor_traced(
                sup_state, wps, command, scene.road.in_junction, cmd.throttle, speed, supervisor, frame
            )
            if sup_state.mode is Mode.BC:
                cmd = fallback_controls(scene, route)
                source = "BC"
            takeovers += int(sup_state.mode is Mode.BC and prev_mode is Mode.AC)
            prev_mode = sup_state.mode
            cmd = clamp_controls(cmd, sup_state.mode, supervisor)
            monitor = rec.as_dict()

        narration = None
        if record_narration and frame % NARRATION_EVERY == 0:
            narration = narrator.render(view, command, narrator_condition)

        frames.append(
            FrameRecord(
                frame, progress, x, y, heading, speed, cmd.steer, cmd.throttle, cmd.brake, source, ttc_brake, monitor,
                narration, command.value, scene.road.in_junction, ac_throttle,
                wps.tolist() if record_narration else None,
            )
        )

        # kinematics with contact: the ego cannot push into an actor it touches
        nx, ny, nh, nv, omega = bicycle_step(x, y, heading, speed, cmd)
        blocked_by_contact = False
        for wa in actors:
            p_next = wa.position(frame + 1)
            reach = EGO_RADIUS + RADIUS[wa.kind]
            d_new = math.hypot(p_next[0] - nx, p_next[1] - ny)
            if d_new < reach:
                if wa.id not in hit:
                    hit.add(wa.id)
                    infractions.append((f"collision_{wa.kind.value}", frame))
                d_old = math.hypot(p_next[0] - x, p_next[1] - y)
                if d_new < d_old:
                    blocked_by_contact = True
        if blocked_by_contact:
            nx, ny, nh, nv, omega = x, y, heading, 0.0, 0.0

        if route.signal is not None:
            s_new, _ = path.project((nx, ny), hint=progress)
            for j in path.junctions:
                if progress < j.start_m <= s_new and scene.signal.state is LightState.RED:
                    infractions.append(("red_light", frame))

        x, y, heading, speed, yaw_rate = nx, ny, nh, nv, omega

        if sum(1 for k, _ in infractions if k.startswith("collision")) >= COLLISION_LIMIT:
            terminated = Termination.COLLISION_LIMIT
            break
        stopped_for = stopped_for + 1 if speed < BLOCKED_SPEED_MS else 0
        if stopped_for >= BLOCKED_FRAMES:
            infractions.append(("blocked", frame))
            terminated = Termination.BLOCKED
            break

    return EpisodeTrace(
        route_name=route.name,
        frames=frames,
        infractions=infractions,
        rc_fraction=min(progress / path.length, 1.0),
        terminated=terminated,
        seed=route.seed,
        ttc_brake_events=ttc_events,
        takeovers=takeovers,
    )


# --------------------------------------------------------------------------
# offline monitor replay


def replay_trajectory(lines, route: RouteSpec | None = None, config: SupervisorConfig | None = None) -> list[dict]:
    """Run the decision module over recorded AC proposals.

    Each line carries ``frame``, ``waypoints`` (ego frame), ``throttle`` and
    ``speed_ms``. ``command`` and ``in_junction`` are taken from the line
    when present, otherwise looked up on ``route`` from ``x``/``y``.
    Returns one monitor record per line.
    """
    config = config or SupervisorConfig()
    state = SupervisorState()
    out = []
    progress = 0.0
    for i, line in enumerate(lines):
        command, in_junction = line.get("command"), line.get("in_junction")
        if command is None or in_junction is None:
            if route is None:
                raise ValueError(f"line {i}: no command/in_junction and no route to derive them from")
            s, _ = route.path.project((line["x"], line["y"]), hint=progress)
            progress = max(progress, s)
            if command is None:
                command = route.path.command_at(progress).value
            if in_junction is None:
                in_junction = route.path.junction_at(progress) is not None
        state, rec = step_supervisor_traced(
            state, line["waypoints"], command, bool(in_junction), float(line["throttle"]), float(line["speed_ms"]),
            config, int(line.get("frame", i)),
        )
        out.append(rec.as_dict())
    return out
