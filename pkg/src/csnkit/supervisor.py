"""Simplex decision module with the direction (phi1) and liveness (phi2) monitors.

The Advanced Controller (AC) is the policy under test; the Baseline
Controller (BC) is the rule-based :func:`fallback_controls`. Each step the
decision module checks whether the AC is inside the semantic envelope
(phi1 and phi2) and switches authority accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from csnkit.scene import ActorKind, Intent, LightState, SceneState, Sector, classify_sector


@dataclass(frozen=True)
class SupervisorConfig:
    theta_thr_deg: float = 20.0
    t_min_steps: int = 20
    tau_thr: float = 0.2
    v_min_ms: float = 0.1
    t_stuck_frames: int = 30
    steer_clamp: float = 0.8
    throttle_clamp: float = 0.9
    takeover_steer_factor: float = 1.2
    takeover_throttle_factor: float = 0.6
    epsilon: float = 1e-6

    def __post_init__(self):
        if not 0 < self.theta_thr_deg < 90:
            raise ValueError("theta_thr_deg must lie in (0, 90)")
        for name, value in vars(self).items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")


class Mode(str, Enum):
    AC = "AC"
    BC = "BC"


class Action(str, Enum):
    USE_AC = "use_AC"
    USE_BC = "use_BC"


@dataclass(frozen=True)
class SupervisorState:
    mode: Mode = Mode.AC
    intervention_countdown: int = 0
    stuck_counter: int = 0
    last_violation: str | None = None  # "phi1" | "phi2"


@dataclass(frozen=True)
class ControlCommand:
    steer: float = 0.0
    throttle: float = 0.0
    brake: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.steer <= 1.0:
            raise ValueError(f"steer out of range: {self.steer}")
        if not 0.0 <= self.throttle <= 1.0 or not 0.0 <= self.brake <= 1.0:
            raise ValueError(f"throttle/brake out of range: {self.throttle}, {self.brake}")


@dataclass(frozen=True)
class StepRecord:
    """One line of the monitor trace log."""

    frame: int
    mode: str
    theta_deg: float
    phi1: bool
    phi2: bool
    stuck_counter: int
    countdown: int
    action_source: str

    def as_dict(self) -> dict:
        return {
            "frame": self.frame,
            "mode": self.mode,
            "theta_deg": round(self.theta_deg, 6),
            "phi1": self.phi1,
            "phi2": self.phi2,
            "stuck_counter": self.stuck_counter,
            "countdown": self.countdown,
            "action_source": self.action_source,
        }


def bearing_angle(traj, epsilon: float = 1e-6) -> float:
    """Bearing of the final waypoint in degrees (negative = left)."""
    pts = np.asarray(traj, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("trajectory must contain at least one waypoint")
    x, y = pts[-1]
    return math.degrees(math.atan(x / (y + epsilon)))


def check_phi1(theta_deg: float, command: Intent | str, in_junction: bool, config: SupervisorConfig = SupervisorConfig()) -> bool:
    """Direction consistency, gated to the junction approach phase."""
    command = Intent(command)
    if in_junction or not command.is_turn:
        return True
    if command is Intent.LEFT_TURN:
        return theta_deg < -config.theta_thr_deg
    return theta_deg > config.theta_thr_deg


def check_phi2(
    throttle: float, speed_ms: float, state: SupervisorState, config: SupervisorConfig = SupervisorConfig()
) -> tuple[bool, SupervisorState]:
    """Stuck detection: throttle applied without motion for T_stuck frames.

    Both inequalities are strict, so ``throttle == tau_thr`` or
    ``speed == v_min`` does not count as a stuck frame.
    """
    if throttle > config.tau_thr and speed_ms < config.v_min_ms:
        counter = min(state.stuck_counter + 1, config.t_stuck_frames)
    else:
        counter = 0
    return counter < config.t_stuck_frames, replace(state, stuck_counter=counter)


def step_supervisor(
    state: SupervisorState,
    traj,
    command: Intent | str,
    in_junction: bool,
    throttle: float,
    speed_ms: float,
    config: SupervisorConfig = SupervisorConfig(),
) -> tuple[SupervisorState, Action]:
    state, _ = step_supervisor_traced(state, traj, command, in_junction, throttle, speed_ms, config)
    return state, (Action.USE_BC if state.mode is Mode.BC else Action.USE_AC)


def step_supervisor_traced(state, traj, command, in_junction, throttle, speed_ms, config=SupervisorConfig(), frame=0):
    """As :func:`step_supervisor`, also returning the trace record."""
    theta = bearing_angle(traj, config.epsilon)
    phi1 = check_phi1(theta, command, in_junction, config)
    phi2, state = check_phi2(throttle, speed_ms, state, config)
    violation = None if phi1 and phi2 else ("phi1" if not phi1 else "phi2")

    if state.mode is Mode.AC:
        if violation:
            state = replace(state, mode=Mode.BC, intervention_countdown=config.t_min_steps, last_violation=violation)
    else:
        if violation:
            state = replace(state, last_violation=violation)
        if state.intervention_countdown == 0 and violation is None:
            state = replace(state, mode=Mode.AC)
        else:
            state = replace(state, intervention_countdown=max(state.intervention_countdown - 1, 0))

    rec = StepRecord(
        frame=frame,
        mode=state.mode.value,
        theta_deg=theta,
        phi1=phi1,
        phi2=phi2,
        stuck_counter=state.stuck_counter,
        countdown=state.intervention_countdown,
        action_source=state.mode.value,
    )
    return state, rec


def control_limits(mode: Mode | str, config: SupervisorConfig = SupervisorConfig()) -> tuple[float, float]:
    if Mode(mode) is Mode.BC:
        return (config.steer_clamp * config.takeover_steer_factor, config.throttle_clamp * config.takeover_throttle_factor)
    return config.steer_clamp, config.throttle_clamp


def clamp_controls(cmd: ControlCommand, mode: Mode | str, config: SupervisorConfig = SupervisorConfig()) -> ControlCommand:
    """Passive clamp in AC mode, takeover limits in BC mode."""
    steer_max, throttle_max = control_limits(mode, config)
    return ControlCommand(
        steer=min(max(cmd.steer, -steer_max), steer_max),
        throttle=min(cmd.throttle, throttle_max),
        brake=cmd.brake,
    )


# --------------------------------------------------------------------------
# baseline controller

FOLLOW_GAP_M = 5.0
SPEED_REDUCTION = 0.4
WHEELBASE_M = 2.8
MAX_STEER_RAD = math.radians(35.0)
COMFORT_DECEL = 2.5
STOP_MARGIN_M = 2.0


def speed_controller(target_ms: float, speed_ms: float, gain: float = 0.5) -> tuple[float, float]:
    """Proportional speed tracking; returns ``(throttle, brake)``."""
    err = target_ms - speed_ms
    if err >= 0:
        return min(gain * err, 1.0), 0.0
    if target_ms <= 0.05 or err < -0.5:
        return 0.0, min(-gain * err + (0.3 if target_ms <= 0.05 else 0.0), 1.0)
    return 0.0, 0.0


def pure_pursuit_steer(target_rel) -> float:
    """Normalised steer toward an ego-frame point (x lateral, y forward)."""
    x, y = float(target_rel[0]), float(target_rel[1])
    ld2 = x * x + y * y
    if ld2 < 1e-9:
        return 0.0
    # x positive = right; positive steer turns right
    delta = math.atan(2.0 * WHEELBASE_M * x / ld2)
    return float(np.clip(delta / MAX_STEER_RAD, -1.0, 1.0))


def world_to_ego(point, ego_pos, heading) -> tuple[float, float]:
    d = np.asarray(point, dtype=float) - np.asarray(ego_pos, dtype=float)
    c, s = math.cos(heading), math.sin(heading)
    forward = d[0] * c + d[1] * s
    leftward = -d[0] * s + d[1] * c
    return -leftward, forward


def stopping_speed(distance_m: float, decel: float = COMFORT_DECEL) -> float:
    return math.sqrt(2.0 * decel * max(distance_m, 0.0))


def fallback_controls(scene: SceneState, route, lookahead_m: float | None = None) -> ControlCommand:
    """Rule-based follower used while the BC holds authority.

    Tracks the route reference path by pure pursuit at 60% of the speed
    limit, keeps at least 5 m to the lead actor ahead and stops for red
    lights before the junction. It never changes lane on its own.
    """
    path = route.path
    ego = scene.ego
    s, _ = path.project(ego.position)
    v = ego.speed_ms
    ld = lookahead_m if lookahead_m is not None else max(4.0, 0.8 * v)
    target = path.pose_at(s + ld)[0]
    steer = pure_pursuit_steer(world_to_ego(target, ego.position, ego.heading))

    limit = min(ego.speed_limit_kmh, route.speed_limit_kmh)
    target_ms = (1.0 - SPEED_REDUCTION) * limit / 3.6

    for a in scene.actors:
        if a.longitudinal > 0 and classify_sector(*a.rel_position) is Sector.AHEAD:
            radii = 1.5 + (1.5 if a.kind is ActorKind.VEHICLE else 0.4)
            gap = a.longitudinal - radii
            target_ms = min(target_ms, stopping_speed(gap - FOLLOW_GAP_M))
            if gap < FOLLOW_GAP_M:
                target_ms = 0.0

    if scene.signal.state in (LightState.RED, LightState.YELLOW) and not scene.road.in_junction:
        jd = scene.road.junction_distance_m
        if jd is not None:
            target_ms = min(target_ms, stopping_speed(jd - STOP_MARGIN_M))

    throttle, brake = speed_controller(target_ms, v)
    if target_ms == 0.0:
        throttle, brake = 0.0, max(brake, 0.5)
    return ControlCommand(steer=steer, throttle=throttle, brake=brake)
