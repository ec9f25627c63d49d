"""Causal scene narration.

Turns a :class:`~csnkit.scene.SceneState` plus a navigation intent into the
three text conditions compared in the ablation:

* ``template`` -- fixed instruction + generic notice, no metric values;
* ``flat`` -- the same quantitative facts as ``csn`` as disconnected
  fragments, with no causal connectives;
* ``csn`` -- a causal instruction chain and a segmented notice.

The pipeline is ``filter_relevant -> rank_urgency -> classify_conflict ->
select_connective -> render``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Union

from csnkit.scene import (
    CORRIDOR_HALF_WIDTH_M,
    Actor,
    ActorKind,
    Band,
    Intent,
    Lane,
    LightState,
    SceneState,
    Sector,
    Zone,
    classify_sector,
    classify_zone,
    conflict_zones,
)

CROSSING_SPEED_MS = 0.5
CROSSING_HORIZON_S = 3.0
MAX_CLAUSES = 3
WET_THRESHOLD = 0.5

_ADJACENT = frozenset({Sector.LEFT, Sector.RIGHT, Sector.AHEAD_LEFT, Sector.AHEAD_RIGHT})


class ConflictType(str, Enum):
    BLOCKING = "blocking"
    TEMPORAL = "temporal"
    EXPLANATORY = "explanatory"

    @property
    def priority(self) -> int:
        return {"blocking": 0, "temporal": 1, "explanatory": 2}[self.value]


class Connective(str, Enum):
    BUT = "BUT"
    YIELD_BEFORE = "YIELD_BEFORE"
    BECAUSE = "BECAUSE"

    @property
    def token(self) -> str:
        """Surface token that marks this connective in rendered text."""
        return "BEFORE" if self is Connective.YIELD_BEFORE else self.value


CONNECTIVE_TOKENS = ("BUT", "YIELD_BEFORE", "BEFORE", "BECAUSE")


@dataclass(frozen=True)
class EnvConstraint:
    """Non-actor constraint (road condition or speed limit)."""

    kind: str  # "wet_road" | "speed_limit"
    value: float


@dataclass(frozen=True)
class ConstraintRecord:
    actor_or_signal: Union[Actor, EnvConstraint]
    zone: Zone | None
    distance_m: float
    speed_kmh: float
    conflict_type: ConflictType | None = None
    urgency: tuple = ()
    conflict_sector: Sector | None = None

    @property
    def actor(self) -> Actor | None:
        return self.actor_or_signal if isinstance(self.actor_or_signal, Actor) else None

    @property
    def is_stationary(self) -> bool:
        a = self.actor
        return a.is_stationary if a is not None else True


@dataclass(frozen=True)
class NarrationBundle:
    template: tuple[str, str | None]
    flat: str
    csn: tuple[str, str]

    def as_dict(self) -> dict:
        return {
            "template": {"instruction": self.template[0], "notice": self.template[1]},
            "flat": self.flat,
            "csn": {"instruction": self.csn[0], "notice": self.csn[1]},
        }


# --------------------------------------------------------------------------
# relevance and ranking


def is_crossing(actor: Actor) -> bool:
    """True when the actor moves laterally toward (or through) the ego corridor."""
    x = actor.lateral
    vx = actor.rel_velocity[0]
    if abs(vx) < CROSSING_SPEED_MS:
        return False
    return abs(x) < CORRIDOR_HALF_WIDTH_M or x * vx < 0


def effective_sector(actor: Actor) -> Sector:
    """Sector used for conflict-side analysis.

    A crossing actor that reaches the ego corridor within the crossing
    horizon is judged where it will cross the path, not where it stands.
    """
    sector = classify_sector(*actor.rel_position)
    if is_crossing(actor) and abs(actor.lateral) >= CORRIDOR_HALF_WIDTH_M:
        t = (abs(actor.lateral) - CORRIDOR_HALF_WIDTH_M) / abs(actor.rel_velocity[0])
        if t <= CROSSING_HORIZON_S:
            return classify_sector(0.0, actor.longitudinal)
    return sector


def urgency_key(record: ConstraintRecord) -> tuple:
    if record.zone is None:
        # environmental context ranks after every actor
        return (len(Band), 0, 0.0, str(record.actor_or_signal.kind))
    return (record.zone.band.order, int(record.is_stationary), record.distance_m, record.actor.id)


def _actor_record(actor: Actor) -> ConstraintRecord:
    rec = ConstraintRecord(
        actor_or_signal=actor,
        zone=classify_zone(actor),
        distance_m=actor.distance,
        speed_kmh=actor.speed_kmh,
        conflict_sector=effective_sector(actor),
    )
    return replace(rec, urgency=urgency_key(rec))


def _env_records(scene: SceneState) -> list[ConstraintRecord]:
    out = []
    ego = scene.ego
    limit = scene.signal.speed_limit_kmh or ego.speed_limit_kmh
    if _r(ego.speed_kmh) > _r(limit):
        out.append(EnvConstraint("speed_limit", limit))
    if scene.weather.wetness >= WET_THRESHOLD and ego.speed_kmh > 0:
        out.append(EnvConstraint("wet_road", scene.weather.wetness))
    recs = []
    for env in out:
        rec = ConstraintRecord(env, None, 0.0, ego.speed_kmh, ConflictType.EXPLANATORY)
        recs.append(replace(rec, urgency=urgency_key(rec)))
    return recs


def classify_conflict(intent: Intent, record: ConstraintRecord) -> ConflictType:
    """Conflict type of a record; priority blocking > temporal > explanatory."""
    if record.zone is None:
        return ConflictType.EXPLANATORY
    sector = record.conflict_sector or record.zone.sector
    if sector in conflict_zones(intent):
        return ConflictType.BLOCKING if record.is_stationary else ConflictType.TEMPORAL
    return ConflictType.EXPLANATORY


def select_connective(conflict: ConflictType) -> Connective:
    return {
        ConflictType.BLOCKING: Connective.BUT,
        ConflictType.TEMPORAL: Connective.YIELD_BEFORE,
        ConflictType.EXPLANATORY: Connective.BECAUSE,
    }[ConflictType(conflict)]


def filter_relevant(scene: SceneState, intent: Intent | str) -> list[ConstraintRecord]:
    """Relevant constraint set for ``intent``, each record typed.

    Conflict-side actors are kept; off-side vehicles in adjacent lanes and
    environmental facts (wet road, speeding) are kept as explanatory
    context; everything else is dropped.
    """
    intent = Intent(intent)
    zones = conflict_zones(intent)
    kept = []
    for actor in scene.actors:
        rec = _actor_record(actor)
        if rec.conflict_sector not in zones:
            if actor.kind is not ActorKind.VEHICLE or rec.zone.sector not in _ADJACENT:
                continue
        kept.append(replace(rec, conflict_type=classify_conflict(intent, rec)))
    kept.extend(_env_records(scene))
    return kept


def rank_urgency(records: list[ConstraintRecord]) -> list[ConstraintRecord]:
    """Stable sort: band, moving before stationary, distance, then id."""
    return sorted(records, key=lambda r: r.urgency or urgency_key(r))


# --------------------------------------------------------------------------
# surface forms


def _r(value: float) -> int:
    return int(math.floor(value + 0.5))


def _side(actor: Actor) -> str:
    x = actor.lateral
    if x == 0.0:
        return "right" if actor.rel_velocity[0] < 0 else "left"
    return "right" if x > 0 else "left"


def _heading_word(actor: Actor) -> str:
    return "left" if actor.rel_velocity[0] < 0 else "right"


def _location(rec: ConstraintRecord) -> str:
    if is_crossing(rec.actor):
        return _side(rec.actor)
    return rec.zone.sector.phrase


_FLAT_MANEUVER = {
    Intent.LEFT_TURN: "Turn left",
    Intent.RIGHT_TURN: "Turn right",
    Intent.STRAIGHT: "Go straight",
    Intent.FOLLOW: "Follow lane",
    Intent.LANE_CHANGE_LEFT: "Change lane left",
    Intent.LANE_CHANGE_RIGHT: "Change lane right",
}

_ACTION = {
    Intent.LEFT_TURN: "executing turn",
    Intent.RIGHT_TURN: "executing turn",
    Intent.LANE_CHANGE_LEFT: "changing lane",
    Intent.LANE_CHANGE_RIGHT: "changing lane",
    Intent.STRAIGHT: "proceeding",
    Intent.FOLLOW: "proceeding",
}


def _has_junction(scene: SceneState) -> bool:
    return scene.road.in_junction or scene.road.junction_distance_m is not None


def maneuver_phrase(intent: Intent, scene: SceneState) -> str:
    junction = _has_junction(scene)
    if intent is Intent.LEFT_TURN:
        return "Turn left at intersection" if junction else "Turn left"
    if intent is Intent.RIGHT_TURN:
        return "Turn right at intersection" if junction else "Turn right"
    if intent is Intent.STRAIGHT:
        return "Go straight through intersection" if junction else "Go straight"
    if intent is Intent.LANE_CHANGE_LEFT:
        return "Change lane to the left"
    if intent is Intent.LANE_CHANGE_RIGHT:
        return "Change lane to the right"
    return "Follow the lane"


def _flat_actor(rec: ConstraintRecord) -> str:
    a = rec.actor
    parts = [a.noun.capitalize(), f"{_r(rec.distance_m)}m", _location(rec)]
    if is_crossing(a):
        parts.append(f"crossing {_heading_word(a)}")
    if a.kind is ActorKind.VEHICLE:
        parts.append("stopped" if a.is_stationary else f"{_r(a.speed_kmh)} km/h")
    return " ".join(parts) + "."


def _notice_actor(rec: ConstraintRecord) -> str:
    a = rec.actor
    noun = "Ped" if a.noun == "pedestrian" else a.noun.capitalize()
    if is_crossing(a):
        text = f"{noun} {_r(rec.distance_m)}m {_side(a)[0].upper()}, crossing {_heading_word(a)[0].upper()}"
    else:
        text = f"{noun} {_r(rec.distance_m)}m {rec.zone.sector.phrase}"
    if a.kind is ActorKind.VEHICLE:
        text += " stopped" if a.is_stationary else f" {_r(a.speed_kmh)} km/h"
    return text + "."


def _signal_word(scene: SceneState) -> str | None:
    state = scene.signal.state
    return None if state is LightState.NONE else state.value.upper()


def render_flat(scene: SceneState, intent: Intent | str) -> str:
    """Disconnected fragments carrying the same facts as the CSN text."""
    intent = Intent(intent)
    records = rank_urgency(filter_relevant(scene, intent))
    frags = [f"{_FLAT_MANEUVER[intent]}.", f"Speed {_r(scene.ego.speed_kmh)} km/h."]
    for rec in records:
        if rec.actor is not None:
            frags.append(_flat_actor(rec))
    for rec in records:
        env = rec.actor_or_signal
        if isinstance(env, EnvConstraint):
            if env.kind == "speed_limit":
                frags.append(f"Limit {_r(env.value)} km/h.")
            else:
                frags.append("Wet road.")
    light = _signal_word(scene)
    if light:
        frags.append(f"{light} light.")
    if scene.road.in_junction:
        frags.append("In junction.")
    elif scene.road.junction_distance_m is not None:
        frags.append(f"Junction {_r(scene.road.junction_distance_m)}m.")
    return " ".join(frags)


@dataclass(frozen=True)
class Clause:
    record: ConstraintRecord
    connective: Connective | None
    text: str


def causal_clauses(scene: SceneState, intent: Intent | str) -> list[Clause]:
    """The instruction clauses after the manoeuvre phrase, in output order.

    Blocking constraints come first, then temporal ones, each group in
    urgency order; the remaining clause budget is spent on explanatory
    context.
    """
    intent = Intent(intent)
    records = rank_urgency(filter_relevant(scene, intent))
    conflicts = [r for r in records if r.conflict_type is not ConflictType.EXPLANATORY]
    conflicts.sort(key=lambda r: r.conflict_type.priority)  # stable: urgency order kept within a type
    context = [r for r in records if r.conflict_type is ConflictType.EXPLANATORY]
    context.sort(key=lambda r: (r.zone is not None, r.urgency))
    chosen = (conflicts + context)[:MAX_CLAUSES]

    clauses = []
    for i, rec in enumerate(chosen):
        first = i == 0
        conn = select_connective(rec.conflict_type)
        a = rec.actor
        d = _r(rec.distance_m)
        if rec.conflict_type is ConflictType.BLOCKING:
            body = f"BUT {a.noun} stopped {rec.zone.sector.phrase} at {d}m blocks path"
            text = body if first else f"Prepare to stop, {body}."
        elif rec.conflict_type is ConflictType.TEMPORAL and is_crossing(a):
            body = f"yield to {a.noun} crossing from {_side(a)} at {d}m BEFORE {_ACTION[intent]}"
            text = f"BUT {body}" if first else f"{body[0].upper()}{body[1:]}."
        elif rec.conflict_type is ConflictType.TEMPORAL:
            conn = None
            text = f"Maintain distance from {a.noun} {rec.zone.sector.phrase}."
        elif a is None:
            env = rec.actor_or_signal
            v = _r(scene.ego.speed_kmh)
            if env.kind == "speed_limit":
                text = f"Reduce speed BECAUSE limit is {_r(env.value)} km/h at current {v} km/h."
            else:
                text = f"Reduce speed BECAUSE wet road reduces braking effectiveness at current {v} km/h."
        else:
            text = f"Hold lane BECAUSE {a.noun} {rec.zone.sector.phrase} at {d}m occupies adjacent lane."
        clauses.append(Clause(rec, conn, text))
    return clauses


def _attaches(clause: Clause) -> bool:
    return clause.text.startswith("BUT ")


def render_instruction(scene: SceneState, intent: Intent | str) -> str:
    intent = Intent(intent)
    clauses = causal_clauses(scene, intent)
    head = maneuver_phrase(intent, scene)
    if clauses and _attaches(clauses[0]):
        sentences = [f"{head}, {clauses[0].text}."]
        rest = clauses[1:]
    else:
        sentences = [f"{head}."]
        rest = clauses
    sentences.extend(c.text for c in rest)
    return " ".join(sentences)


def render_notice(scene: SceneState, intent: Intent | str) -> str:
    intent = Intent(intent)
    ego = scene.ego
    segs = [f"[EGO] {_r(ego.speed_kmh)}/{_r(ego.speed_limit_kmh)} km/h."]

    road = []
    if scene.road.in_junction:
        road.append("In junction")
    elif scene.road.junction_distance_m is not None:
        road.append(f"Junction {_r(scene.road.junction_distance_m)}m")
    lanes = [lane for lane in (Lane.LEFT, Lane.RIGHT) if lane in scene.road.lanes_open]
    if lanes:
        road.append(", ".join(f"{lane.value[0].upper()}-lane" for lane in lanes) + " open")
    w = scene.weather
    if w.wetness >= WET_THRESHOLD:
        road.append("wet road")
    if w.precipitation >= WET_THRESHOLD:
        road.append("rain")
    if w.fog_density >= WET_THRESHOLD:
        road.append("fog")
    segs.append("[ROAD] " + (", ".join(road) if road else "No junction") + ".")
    segs.append(f"[SIGNAL] {_signal_word(scene) or 'none'}.")

    actors = [r for r in rank_urgency(filter_relevant(scene, intent)) if r.actor is not None]
    # vehicles first, then pedestrians; urgency order within each group
    actors.sort(key=lambda r: r.actor.kind is ActorKind.PEDESTRIAN)
    if actors:
        segs.append("[ACTORS] " + " ".join(_notice_actor(r) for r in actors))
    else:
        segs.append("[ACTORS] none.")
    return " ".join(segs)


def render_csn(scene: SceneState, intent: Intent | str) -> tuple[str, str]:
    """Return the ``(instruction, notice)`` pair of the causal narration."""
    return render_instruction(scene, intent), render_notice(scene, intent)


_TEMPLATE_INSTRUCTION = {
    Intent.STRAIGHT: "Go straight.",
    Intent.FOLLOW: "Follow the lane.",
    Intent.LANE_CHANGE_LEFT: "Change lane to the left.",
    Intent.LANE_CHANGE_RIGHT: "Change lane to the right.",
}

_TEMPLATE_NOTICE = {
    ActorKind.PEDESTRIAN: "Watch out for pedestrians.",
    ActorKind.VEHICLE: "Watch out for vehicles.",
}
SIGNAL_NOTICE = "Pay attention to the traffic light."


def render_template(scene: SceneState, intent: Intent | str) -> tuple[str, str | None]:
    intent = Intent(intent)
    if intent.is_turn:
        instruction = maneuver_phrase(intent, scene) + "."
    else:
        instruction = _TEMPLATE_INSTRUCTION[intent]
    ranked = [r for r in rank_urgency(filter_relevant(scene, intent)) if r.actor is not None]
    if ranked:
        notice = _TEMPLATE_NOTICE[ranked[0].actor.kind]
    elif scene.signal.state in (LightState.RED, LightState.YELLOW):
        notice = SIGNAL_NOTICE
    else:
        notice = None
    return instruction, notice


def narrate(scene: SceneState, intent: Intent | str) -> NarrationBundle:
    return NarrationBundle(
        template=render_template(scene, intent),
        flat=render_flat(scene, intent),
        csn=render_csn(scene, intent),
    )


def render(scene: SceneState, intent: Intent | str, condition: str) -> str:
    """Single text for one condition (instruction and notice newline-joined)."""
    if condition == "flat":
        return render_flat(scene, intent)
    if condition == "csn":
        return "\n".join(render_csn(scene, intent))
    if condition == "template":
        instruction, notice = render_template(scene, intent)
        return instruction if notice is None else f"{instruction}\n{notice}"
    raise ValueError(f"unknown condition {condition!r}")
