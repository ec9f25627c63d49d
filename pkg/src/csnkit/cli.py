"""Command-line entry point: ``csnkit <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from csnkit import narrator
from csnkit.metrics import compute_metrics
from csnkit.pldpo import (
    BetaTable,
    PreferenceSample,
    gradient_residual,
    loss_gradient,
    pl_dpo_loss,
    pl_dpo_nll_loss,
)
from csnkit.report import bootstrap_ci, decompose_utility, default_grid, dump_grid, load_grid, run_ablation_grid
from csnkit.routes import RouteSpec, load_route
from csnkit.scene import Intent, SceneState
from csnkit.sim import NOISE_LEVELS, PolicyKind, PolicyStub, replay_trajectory, run_episode
from csnkit.suites import SUITES, straight_empty
from csnkit.supervisor import SupervisorConfig


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _read_jsonl(path) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        return json.loads(text)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def resolve_routes(spec: str, seed: int = 0) -> list[RouteSpec]:
    """A route file, a suite name, or the name of a route inside a suite."""
    p = Path(spec)
    if p.is_file():
        return [replace(load_route(p), seed=seed)]
    if spec in SUITES:
        return SUITES[spec](seed)
    if spec == "straight_empty":
        return [straight_empty(seed=seed)]
    for make in SUITES.values():
        for r in make(seed):
            if r.name == spec:
                return [r]
    raise SystemExit(f"unknown route or suite: {spec}")


# --------------------------------------------------------------------------
# subcommands


def cmd_narrate(args) -> int:
    data = json.loads(Path(args.scene).read_text(encoding="utf-8"))
    intent = args.intent or data.get("intent")
    if intent is None:
        raise SystemExit("no intent: pass --intent or add an 'intent' key to the scene file")
    scene = SceneState.from_dict(data)
    conditions = ("template", "flat", "csn") if args.condition == "all" else (args.condition,)
    if args.json:
        text = json.dumps({c: narrator.render(scene, Intent(intent), c) for c in conditions}, indent=2) + "\n"
    else:
        text = "".join(f"[{c}]\n{narrator.render(scene, Intent(intent), c)}\n" for c in conditions)
    _write(text, args.output)
    return 0


def cmd_monitor(args) -> int:
    lines = _read_jsonl(args.trajectory)
    route = load_route(args.route) if args.route else None
    records = replay_trajectory(lines, route, SupervisorConfig(theta_thr_deg=args.theta))
    _write("".join(json.dumps(r) + "\n" for r in records), args.output)
    return 0


def cmd_simulate(args) -> int:
    sup = SupervisorConfig() if args.supervisor == "semantic" else None
    params = {}
    if args.sigma is not None:
        params["sigma_m"] = args.sigma
    if args.flip_prob is not None:
        params["flip_prob"] = args.flip_prob
    policy = PolicyStub(PolicyKind(args.policy), params)
    traces, rep_ds = [], []
    for k in range(args.reps):
        routes = resolve_routes(args.route, args.seed + k)
        rep = []
        for r in routes:
            r = replace(r, seed=args.seed + k)
            noise = replace(NOISE_LEVELS[args.noise], seed=args.seed + k)
            tr = run_episode(r, policy, args.condition, sup, args.ttc, noise, record_narration=bool(args.trace_out or args.trajectory_out))
            rep.append(tr)
            print(
                f"rep {k} {tr.route_name:<18} {tr.terminated.value:<16} DS {tr.driving_score:6.2f} "
                f"RC {tr.route_completion:6.2f} IS {tr.infraction_score:.3f} takeovers {tr.takeovers} "
                f"ttc_brakes {tr.ttc_brake_events}"
            )
        rep_ds.append(compute_metrics(rep).ds)
        traces.extend(rep)
    m = compute_metrics(traces)
    lo, hi = bootstrap_ci(rep_ds, seed=args.seed)
    print(f"mean DS {m.ds:.2f}  95% CI [{lo:.2f}, {hi:.2f}]  RC {m.rc:.2f}  IS {m.is_:.3f}")
    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            for tr in traces:
                fh.write(tr.to_json() + "\n")
    if args.trajectory_out:
        with open(args.trajectory_out, "w", encoding="utf-8") as fh:
            for f in traces[0].frames:
                fh.write(json.dumps(f.trajectory_line()) + "\n")
    return 0


def cmd_loss_check(args) -> int:
    table = BetaTable(lam=args.lam)
    worst = 0.0
    out = []
    for i, d in enumerate(_read_jsonl(args.samples)):
        s = PreferenceSample.from_dict(d)
        res = gradient_residual(s, table, args.h)
        worst = max(worst, res)
        out.append({
            "index": i,
            "scene_type": s.scene_type.value,
            "beta": table.beta(s.scene_type),
            "pl_dpo_loss": pl_dpo_loss(s, table.beta(s.scene_type)),
            "pl_dpo_nll_loss": pl_dpo_nll_loss(s, table),
            "gradient": loss_gradient(s, table).tolist(),
            "fd_residual": res,
        })
    _write("".join(json.dumps(r) + "\n" for r in out), args.output)
    status = "ok" if worst <= args.tol else "FAIL"
    print(f"{len(out)} samples, max relative gradient residual {worst:.3e} ({status})", file=sys.stderr)
    return 0 if worst <= args.tol else 1


def cmd_decompose(args) -> int:
    d = decompose_utility(args.template, args.flat, args.csn)
    share = "undefined (zero total)" if d.degenerate else f"{100 * d.struct_share:.1f}%"
    print(f"total {d.total:+.2f}")
    print(f"info {d.utility_info:+.2f}")
    print(f"struct {d.utility_struct:+.2f}")
    print(f"struct share {share}")
    return 0


def cmd_grid(args) -> int:
    grid = load_grid(args.config) if args.config else default_grid()
    if args.print_config:
        sys.stdout.write(dump_grid(grid))
        return 0
    routes = resolve_routes(args.suite, args.seed)
    report = run_ablation_grid(routes, grid, reps=args.reps, seed=args.seed)
    text = report.to_text()
    sys.stdout.write(text)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text, encoding="utf-8")
        (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="csnkit", description="Scene narration, semantic supervision and evaluation tools.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("narrate", help="render a scene file under one or all text conditions")
    p.add_argument("scene")
    p.add_argument("--intent", choices=[i.value for i in Intent])
    p.add_argument("--condition", choices=["template", "flat", "csn", "all"], default="all")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_narrate)

    p = sub.add_parser("monitor", help="replay a trajectory file through the decision module")
    p.add_argument("trajectory")
    p.add_argument("--route", help="route file used to derive command and junction state")
    p.add_argument("--theta", type=float, default=20.0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("simulate", help="run closed-loop episodes")
    p.add_argument("--route", default="default", help="route file, suite name or route name")
    p.add_argument("--policy", choices=[k.value for k in PolicyKind], default="faithful")
    p.add_argument("--condition", choices=["template", "flat", "csn"], default="csn")
    p.add_argument("--supervisor", choices=["off", "semantic"], default="off")
    p.add_argument("--ttc", type=float, default=None)
    p.add_argument("--noise", choices=list(NOISE_LEVELS), default="clean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--sigma", type=float, default=None, help="waypoint noise for noisy_faithful")
    p.add_argument("--flip-prob", type=float, default=None, help="per-turn shortcut probability for noisy_faithful")
    p.add_argument("--trace-out", help="write full episode traces (JSONL)")
    p.add_argument("--trajectory-out", help="write the first episode's AC proposals for 'monitor'")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("loss-check", help="evaluate PL-DPO losses and check gradients")
    p.add_argument("samples", help="JSONL (or JSON list) of preference samples")
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_loss_check)

    p = sub.add_parser("decompose", help="split a DS gain into information and structure")
    p.add_argument("template", type=float)
    p.add_argument("flat", type=float)
    p.add_argument("csn", type=float)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("grid", help="run the ablation grid and the noise sweep")
    p.add_argument("--config", help="grid configuration file")
    p.add_argument("--suite", default="ablation")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir")
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_grid)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    np.set_printoptions(precision=6)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
