"""Acceptance suite: one test (and one summary line) per criterion."""

import math
import time
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from conftest import ACCEPTANCE, golden_lines
from csnkit import narrator
from csnkit.narrator import ConflictType, Connective
from csnkit.pldpo import (
    BetaTable,
    PreferenceSample,
    SceneType,
    binary_dpo_loss,
    finite_difference_gradient,
    loss_gradient,
    pl_dpo_loss,
)
from csnkit.report import bootstrap_ci, decompose_utility, default_grid, intervals_overlap, run_ablation_grid
from csnkit.scene import EgoState, Intent, SceneState, make_actor
from csnkit.sim import NOISE_LEVELS, Termination, run_episode
from csnkit.suites import ablation_suite, default_suite, dense_traffic_suite, direction_flip_suite
from csnkit.supervisor import (
    Action,
    ControlCommand,
    Mode,
    SupervisorConfig,
    SupervisorState,
    bearing_angle,
    check_phi1,
    check_phi2,
    clamp_controls,
    control_limits,
    step_supervisor,
)

REPS = 5


def verdict(n: int, ok: bool, detail: str = "") -> None:
    prev = ACCEPTANCE.get(n)
    if prev is not None:
        ok = ok and prev[0] == "PASS"
        detail = f"{prev[1]}; {detail}"
    ACCEPTANCE[n] = ("PASS" if ok else "FAIL", detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


# ---------------------------------------------------------------- 1


def test_criterion_01_golden_narration(left_turn_scene):
    t0 = time.perf_counter()
    template = narrator.render_template(left_turn_scene, Intent.LEFT_TURN)
    flat = narrator.render_flat(left_turn_scene, Intent.LEFT_TURN)
    csn = narrator.render_csn(left_turn_scene, Intent.LEFT_TURN)
    elapsed = time.perf_counter() - t0
    ok = (
        list(template) == golden_lines("left_turn_template.txt")
        and [flat] == golden_lines("left_turn_flat.txt")
        and list(csn) == golden_lines("left_turn_csn.txt")
        and elapsed < 1.0
    )
    verdict(1, ok, f"three conditions byte-exact, {elapsed * 1e3:.1f} ms")


# ---------------------------------------------------------------- 2

# Hand-written rule table: sectors on the side the manoeuvre sweeps through.
ORACLE_CONFLICT = {
    "left_turn": {"ahead", "ahead_left", "left"},
    "right_turn": {"ahead", "ahead_right", "right"},
    "straight": {"ahead"},
    "follow": {"ahead"},
    "lane_change_left": {"left", "ahead_left", "behind_left"},
    "lane_change_right": {"right", "ahead_right", "behind_right"},
}
ORACLE_ADJACENT = {"left", "right", "ahead_left", "ahead_right"}
ORACLE_CONNECTIVE = {"blocking": "BUT", "temporal": "YIELD_BEFORE", "explanatory": "BECAUSE"}

# representative non-crossing positions (x right, y forward) per sector and band
POSITIONS = {
    "ahead": {"near": (0.0, 6.0), "mid": (0.0, 15.0), "far": (0.0, 35.0)},
    "ahead_left": {"near": (-4.0, 5.0), "mid": (-6.0, 14.0), "far": (-8.0, 30.0)},
    "ahead_right": {"near": (4.0, 5.0), "mid": (6.0, 14.0), "far": (8.0, 30.0)},
    "left": {"near": (-6.0, 0.5), "mid": (-12.0, 1.0)},
    "right": {"near": (6.0, 0.5), "mid": (12.0, 1.0)},
    "behind": {"near": (0.0, -6.0), "mid": (0.0, -12.0)},
    "behind_left": {"near": (-4.0, -5.0), "mid": (-8.0, -12.0)},
    "behind_right": {"near": (4.0, -5.0), "mid": (8.0, -12.0)},
}


def oracle_type(intent: str, sector: str, stationary: bool) -> str | None:
    if sector in ORACLE_CONFLICT[intent]:
        return "blocking" if stationary else "temporal"
    return "explanatory" if sector in ORACLE_ADJACENT else None  # vehicles only


def test_criterion_02_connective_mapping():
    t0 = time.perf_counter()
    cases = mismatches = 0
    ego = EgoState(0.0, 30.0)
    for intent in ORACLE_CONFLICT:
        for sector, bands in POSITIONS.items():
            for band, pos in bands.items():
                for stationary in (True, False):
                    vel = (0.0, 0.0) if stationary else (0.0, 4.0)
                    actor = make_actor("a", "vehicle", pos, vel, 0.0)
                    scene = SceneState(ego, (actor,))
                    recs = narrator.filter_relevant(scene, intent)
                    expected = oracle_type(intent, sector, stationary)
                    cases += 1
                    if expected is None:
                        mismatches += bool(recs)
                        continue
                    if len(recs) != 1 or recs[0].zone.sector.value != sector or recs[0].zone.band.value != band:
                        mismatches += 1
                        continue
                    got = recs[0].conflict_type
                    mismatches += got.value != expected
                    mismatches += narrator.select_connective(got).value != ORACLE_CONNECTIVE[expected]

    # priority: one stopped and one moving actor ahead (both in every conflict set)
    # plus an adjacent vehicle; the clause order must follow blocking > temporal > explanatory
    for intent in ("left_turn", "right_turn", "straight", "follow"):
        side = (-12.0, 1.0) if intent != "left_turn" else (12.0, 1.0)
        actors = (
            make_actor("mover", "vehicle", (0.0, 8.0), (0.0, 2.0), 0.0),
            make_actor("adj", "vehicle", side, (0.0, 0.0), 0.0),
            make_actor("stopper", "vehicle", (0.0, 20.0), (0.0, 0.0), 0.0),
        )
        recs = narrator.rank_urgency(narrator.filter_relevant(SceneState(ego, actors), intent))
        order = sorted(recs, key=lambda r: r.conflict_type.priority)
        cases += 1
        mismatches += [r.conflict_type.value for r in order] != ["blocking", "temporal", "explanatory"]
        clauses = narrator.causal_clauses(SceneState(ego, actors), intent)
        mismatches += clauses[0].record.conflict_type is not ConflictType.BLOCKING
        mismatches += clauses[0].connective is not Connective.BUT
    elapsed = time.perf_counter() - t0
    verdict(2, mismatches == 0 and elapsed < 1.0, f"{cases} cases, {mismatches} mismatches, {elapsed * 1e3:.0f} ms")


# ---------------------------------------------------------------- 3


def test_criterion_03_phi1_geometry():
    rng = np.random.default_rng(3)
    n = 10_000
    lon = rng.uniform(0.0, 50.0, n)
    lon[lon == 0.0] = 50.0  # half-open interval (0, 50]
    lat = rng.uniform(-60.0, 60.0, n)
    # direct evaluation of the bearing rule, vectorised and independent of the module
    theta = np.degrees(np.arctan(lat / (lon + 1e-6)))
    disagreements = 0
    for command, expect_ok in (("left_turn", theta < -20.0), ("right_turn", theta > 20.0)):
        for gated in (False, True):
            want = np.ones(n, dtype=bool) if gated else expect_ok
            got = np.array([check_phi1(bearing_angle([(x, y)]), command, gated) for x, y in zip(lat, lon)])
            disagreements += int(np.sum(got != want))
    verdict(3, disagreements == 0, f"{4 * n} evaluations, {disagreements} disagreements")


# ---------------------------------------------------------------- 4


class ReferenceDM:
    """Minimal dwell-time switch, written from the rule text only."""

    def __init__(self, t_min=20, stuck=30):
        self.bc = False
        self.countdown = 0
        self.count = 0
        self.t_min, self.stuck = t_min, stuck

    def step(self, phi1_ok, throttle, speed):
        self.count = min(self.count + 1, self.stuck) if (throttle > 0.2 and speed < 0.1) else 0
        ok = phi1_ok and self.count < self.stuck
        if not self.bc:
            if not ok:
                self.bc, self.countdown = True, self.t_min
        elif self.countdown == 0 and ok:
            self.bc = False
        else:
            self.countdown = max(self.countdown - 1, 0)
        return ("use_BC" if self.bc else "use_AC"), ok, self.countdown


def test_criterion_04_dwell_property():
    rng = np.random.default_rng(4)
    cfg = SupervisorConfig()
    early_release = model_mismatch = bad_reentry = switches = 0
    for _ in range(1000):
        state, ref = SupervisorState(), ReferenceDM()
        # piecewise-constant regimes so violations come in bursts
        regime = rng.integers(0, 4, size=500 // 25 + 1).repeat(25)[:500]
        last_switch = None
        prev_action = Action.USE_AC
        for t in range(500):
            r = regime[t]
            command = "left_turn" if rng.random() < 0.7 else "follow"
            in_junction = bool(rng.random() < 0.1)
            x = rng.uniform(-30, -9) if r != 1 else rng.uniform(2, 30)
            y = rng.uniform(1, 30)
            throttle, speed = (0.6, 0.0) if r == 2 else (rng.uniform(0, 1), rng.uniform(0, 10))
            prev_countdown = state.intervention_countdown
            state, action = step_supervisor(state, [(x, y)], command, in_junction, throttle, speed, cfg)
            ref_action, ok, _ = ref.step(check_phi1(bearing_angle([(x, y)]), command, in_junction), throttle, speed)
            model_mismatch += action.value != ref_action
            if action is Action.USE_BC and prev_action is Action.USE_AC:
                last_switch, switches = t, switches + 1
            if action is Action.USE_AC and last_switch is not None and t - last_switch <= cfg.t_min_steps:
                early_release += 1
            if action is Action.USE_AC and prev_action is Action.USE_BC and not (prev_countdown == 0 and ok):
                bad_reentry += 1
            prev_action = action
    ok = early_release == bad_reentry == model_mismatch == 0 and switches > 0
    verdict(4, ok, f"{switches} switches, {early_release} early releases, {bad_reentry} bad re-entries, {model_mismatch} model mismatches")


# ---------------------------------------------------------------- 5


def _first_violation(throttles, speeds):
    state = SupervisorState()
    for i, (th, v) in enumerate(zip(throttles, speeds), 1):
        ok, state = check_phi2(th, v, state)
        if not ok:
            return i
    return None


def test_criterion_05_phi2_counter():
    problems = []
    if _first_violation([0.5] * 40, [0.0] * 40) != 30:
        problems.append("steady stuck trace")
    # a reset at frame 20 restarts the count
    th = [0.5] * 60
    sp = [0.0] * 19 + [1.0] + [0.0] * 40
    if _first_violation(th, sp) != 50:
        problems.append("reset trace")
    if _first_violation([0.5] * 29 + [0.0], [0.0] * 30) is not None:
        problems.append("29-frame trace")
    if _first_violation([0.2] * 100, [0.0] * 100) is not None:
        problems.append("throttle == 0.2 qualified")
    if _first_violation([0.9] * 100, [0.1] * 100) is not None:
        problems.append("speed == 0.1 qualified")
    if _first_violation([0.2000001] * 30, [0.0999999] * 30) != 30:
        problems.append("just-inside boundary")
    verdict(5, not problems, ", ".join(problems) or "violation exactly at frame 30, strict boundaries")


# ---------------------------------------------------------------- 6


def test_criterion_06_clamp_values():
    ac, bc = control_limits(Mode.AC), control_limits(Mode.BC)
    ok = ac == (0.8, 0.9) and bc == (0.96, 0.54)
    rng = np.random.default_rng(6)
    for _ in range(1000):
        cmd = ControlCommand(rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(0, 1))
        for mode in Mode:
            once = clamp_controls(cmd, mode)
            ok &= clamp_controls(once, mode) == once
            s, th = control_limits(mode)
            ok &= abs(once.steer) <= s and once.throttle <= th and once.brake == cmd.brake
    verdict(6, bool(ok), f"AC {ac}, takeover {bc}, idempotent on 1000 commands")


# ---------------------------------------------------------------- 7


def _mp_loss(pol, ref, beta):
    """Unstabilised Plackett-Luce loss in 50-digit arithmetic."""
    with mpmath.workdps(50):
        z = [mpmath.mpf(beta) * (mpmath.mpf(p) - mpmath.mpf(r)) for p, r in zip(pol, ref)]
        total = mpmath.mpf(0)
        for i in range(len(z)):
            total -= mpmath.log(mpmath.exp(z[i]) / mpmath.fsum(mpmath.exp(v) for v in z[i:]))
        return total


def test_criterion_07_pldpo_numerics():
    t0 = time.perf_counter()
    problems = []
    tie2 = PreferenceSample([-1.0, -1.0], [-1.0, -1.0])
    tie3 = PreferenceSample([-2.0, -2.0, -2.0], [-2.0, -2.0, -2.0])
    if abs(pl_dpo_loss(tie2, 0.35) - math.log(2)) > 1e-12:
        problems.append("M=2 tie")
    if abs(pl_dpo_loss(tie3, 0.35) - (math.log(3) + math.log(2))) > 1e-12:
        problems.append("M=3 tie")

    rng = np.random.default_rng(7)
    table = BetaTable()
    types = list(SceneType)
    worst_binary = worst_grad = worst_mp = 0.0
    for i in range(1000):
        st = types[i % len(types)]
        beta = table.beta(st)
        m = int(rng.integers(2, 5))
        s = PreferenceSample(rng.normal(-5, 3, m), rng.normal(-5, 3, m), st)
        g = loss_gradient(s, table)
        fd = finite_difference_gradient(s, table, h=1e-5)
        worst_grad = max(worst_grad, float(np.max(np.abs(g - fd) / np.maximum(np.abs(g), 1e-300))))
        if m == 2:
            worst_binary = max(worst_binary, abs(pl_dpo_loss(s, beta) - binary_dpo_loss(s, beta)))
        if i < 100:
            ref = float(_mp_loss(s.policy_logprobs, s.ref_logprobs, beta))
            worst_mp = max(worst_mp, abs(pl_dpo_loss(s, beta) - ref))
    elapsed = time.perf_counter() - t0
    if worst_binary > 1e-12:
        problems.append(f"binary reduction {worst_binary:.1e}")
    if worst_grad > 1e-6:
        problems.append(f"gradient residual {worst_grad:.1e}")
    if worst_mp > 1e-10:
        problems.append(f"high-precision oracle {worst_mp:.1e}")
    if elapsed >= 10:
        problems.append(f"runtime {elapsed:.1f}s")
    detail = ", ".join(problems) or (
        f"ties exact, binary diff {worst_binary:.1e}, grad rel {worst_grad:.1e}, {elapsed:.1f}s"
    )
    verdict(7, not problems, detail)


# ---------------------------------------------------------------- 8


def _rounded(d):
    return (round(d.total, 2), round(d.utility_info, 2), round(d.utility_struct, 2), round(100 * d.struct_share, 1))


def test_criterion_08_decomposition_first_example():
    d = decompose_utility(32.54, 38.71, 42.67)
    ok = _rounded(d) == (10.13, 6.17, 3.96, 39.1) and d.total == d.utility_info + d.utility_struct
    verdict(8, ok, f"example 1 -> {_rounded(d)}")


@pytest.mark.xfail(
    strict=True,
    reason="printed inputs give 39.38-32.49=6.89 and 40.45-39.38=1.07 (share 13.4%); "
    "the quoted 6.88/1.08/13.5% come from unrounded scores",
)
def test_criterion_08_decomposition_second_example():
    d = decompose_utility(32.49, 39.38, 40.45)
    got = _rounded(d)
    verdict(8, got == (7.96, 6.88, 1.08, 13.5), f"example 2 -> {got}, expected (7.96, 6.88, 1.08, 13.5)")


# ---------------------------------------------------------------- 9


def _rep_means(suite, reps=REPS, **kw):
    out, traces = [], []
    for k in range(reps):
        trs = [run_episode(replace(r, seed=k), record_narration=False, **kw) for r in suite(k)]
        out.append(float(np.mean([t.driving_score for t in trs])))
        traces.extend(trs)
    return out, traces


def test_criterion_09_directional_harness():
    t0 = time.perf_counter()
    sup = SupervisorConfig()

    off, _ = _rep_means(direction_flip_suite, policy="direction_flip", narrator_condition="csn")
    on, _ = _rep_means(direction_flip_suite, policy="direction_flip", narrator_condition="csn", supervisor=sup)
    a_ok = np.mean(on) > np.mean(off)

    _, ttc_tr = _rep_means(dense_traffic_suite, policy="faithful", narrator_condition="csn", ttc=2.0)
    _, sem_tr = _rep_means(dense_traffic_suite, policy="faithful", narrator_condition="csn", supervisor=sup)
    blocked_ttc = sum(t.terminated is Termination.BLOCKED for t in ttc_tr)
    blocked_sem = sum(t.terminated is Termination.BLOCKED for t in sem_tr)
    b_ok = blocked_ttc > blocked_sem

    def noisy(level):
        out = []
        for k in range(REPS):
            nz = replace(NOISE_LEVELS[level], seed=k)
            trs = [run_episode(replace(r, seed=k), "faithful", "csn", noise=nz, record_narration=False) for r in default_suite(k)]
            out.append(float(np.mean([t.driving_score for t in trs])))
        return out

    clean, extreme = noisy("clean"), noisy("extreme")
    ci_clean, ci_extreme = bootstrap_ci(clean, seed=0), bootstrap_ci(extreme, seed=0)
    c_ok = intervals_overlap(ci_clean, ci_extreme)
    elapsed = time.perf_counter() - t0
    detail = (
        f"(a) DS on {np.mean(on):.1f} vs off {np.mean(off):.1f}; "
        f"(b) blocked TTC {blocked_ttc} vs semantic {blocked_sem}; "
        f"(c) clean CI [{ci_clean[0]:.1f}, {ci_clean[1]:.1f}] vs extreme [{ci_extreme[0]:.1f}, {ci_extreme[1]:.1f}]; "
        f"{elapsed:.0f}s"
    )
    verdict(9, bool(a_ok and b_ok and c_ok and elapsed < 300), detail)


# ---------------------------------------------------------------- 10


def test_criterion_10_determinism():
    first = run_ablation_grid(ablation_suite(0), default_grid(), reps=REPS, seed=0)
    second = run_ablation_grid(ablation_suite(0), default_grid(), reps=REPS, seed=0)
    same = first.to_text() == second.to_text() and first.to_csv() == second.to_csv()
    verdict(10, same, f"{len(first.rows)} configurations, text and CSV byte-identical")
