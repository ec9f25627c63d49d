"""Ablation grid orchestration, utility decomposition and bootstrap intervals."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from csnkit.metrics import compute_metrics
from csnkit.sim import NOISE_LEVELS, PolicyStub, Termination, run_episode
from csnkit.supervisor import SupervisorConfig

log = logging.getLogger(__name__)

NOISE_ORDER = ("clean", "mild", "moderate", "severe", "extreme")


# --------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class Decomposition:
    total: float
    utility_info: float
    utility_struct: float
    struct_share: float
    degenerate: bool = False


def decompose_utility(ds_template: float, ds_disc: float, ds_csn: float) -> Decomposition:
    """Split the gain over the template baseline into information and structure.

    ``total`` is formed as the sum of the two parts so the identity
    ``total == info + struct`` holds bit for bit.
    """
    info = ds_disc - ds_template
    struct = ds_csn - ds_disc
    total = info + struct
    if total == 0:
        return Decomposition(total, info, struct, 0.0, degenerate=True)
    return Decomposition(total, info, struct, struct / total)


# --------------------------------------------------------------------------
# bootstrap


def bootstrap_ci(values, level: float = 0.95, resamples: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("bootstrap_ci needs at least one value")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    means = x[rng.integers(0, x.size, size=(resamples, x.size))].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def intervals_overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


# --------------------------------------------------------------------------
# grid configuration


@dataclass(frozen=True)
class GridConfig:
    name: str
    weights: str = "original"
    policy: PolicyStub = field(default_factory=PolicyStub)
    condition: str = "template"
    supervisor: bool = False
    ttc: float | None = None
    noise: str = "clean"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "weights": self.weights,
            "policy": {"kind": self.policy.kind.value, "params": dict(self.policy.params)},
            "condition": self.condition,
            "supervisor": self.supervisor,
            "ttc": self.ttc,
            "noise": self.noise,
        }

    @classmethod
    def from_dict(cls, d: dict) -> GridConfig:
        pol = d.get("policy", {})
        return cls(
            name=d["name"],
            weights=d.get("weights", "original"),
            policy=PolicyStub(pol.get("kind", "faithful"), dict(pol.get("params", {}))),
            condition=d.get("condition", "template"),
            supervisor=bool(d.get("supervisor", False)),
            ttc=d.get("ttc"),
            noise=d.get("noise", "clean"),
        )


# The two weight sets of the VLA are stood in for by a noisy waypoint
# policy that occasionally takes the mirrored shortcut at a turn.
POLICIES = {
    "original": PolicyStub("noisy_faithful", {"sigma_m": 0.3, "flip_prob": 0.3}),
    "pl-dpo-nll": PolicyStub("noisy_faithful", {"sigma_m": 0.25, "flip_prob": 0.25}),
}


def default_grid() -> list[GridConfig]:
    o, p = POLICIES["original"], POLICIES["pl-dpo-nll"]
    return [
        GridConfig("Original", "original", o, "template"),
        GridConfig("Original + CSN", "original", o, "csn"),
        GridConfig("Original + Flat Text", "original", o, "flat"),
        GridConfig("Original + Semantic Safety", "original", o, "template", supervisor=True),
        GridConfig("PL-DPO-NLL", "pl-dpo-nll", p, "template"),
        GridConfig("PL-DPO-NLL + TTC Safety", "pl-dpo-nll", p, "template", ttc=2.0),
        GridConfig("PL-DPO-NLL + Semantic Safety", "pl-dpo-nll", p, "template", supervisor=True),
        GridConfig("PL-DPO-NLL + CSN", "pl-dpo-nll", p, "csn"),
        GridConfig("PL-DPO-NLL + CSN + Safety", "pl-dpo-nll", p, "csn", supervisor=True),
        GridConfig("PL-DPO-NLL + Flat Text", "pl-dpo-nll", p, "flat"),
    ]


def load_grid(path) -> list[GridConfig]:
    with open(path) as fh:
        data = json.load(fh)
    return [GridConfig.from_dict(d) for d in data["configurations"]]


def dump_grid(grid: list[GridConfig]) -> str:
    return json.dumps({"configurations": [g.to_dict() for g in grid]}, indent=2) + "\n"


# --------------------------------------------------------------------------
# running


@dataclass(frozen=True)
class ConditionResult:
    condition: str
    route_ds: dict[str, float]
    rep_ds: tuple[float, ...]
    mean_ds: float
    ci_low: float
    ci_high: float
    rc: float = 0.0
    is_: float = 1.0
    blocked: int = 0
    ttc_brakes: int = 0
    takeovers: int = 0

    def __post_init__(self):
        if not self.ci_low <= self.mean_ds <= self.ci_high:
            raise ValueError("interval must contain the mean")


@dataclass(frozen=True)
class NoiseRow:
    level: str
    result: ConditionResult
    overlaps_clean: bool


@dataclass(frozen=True)
class GridReport:
    rows: list[ConditionResult]
    decompositions: dict[str, Decomposition]
    noise: list[NoiseRow]
    reps: int
    seed: int

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"Ablation grid ({self.reps} reps, seed {self.seed})\n\n")
        head = f"{'#':>2}  {'Configuration':<30} {'DS':>6} {'95% CI':>15} {'RC':>6} {'IS':>6} {'blocked':>7} {'TTC brakes':>10} {'takeovers':>9}\n"
        out.write(head)
        out.write("-" * (len(head) - 1) + "\n")
        for i, r in enumerate(self.rows, 1):
            ci = f"[{r.ci_low:.2f}, {r.ci_high:.2f}]"
            out.write(
                f"{i:>2}  {r.condition:<30} {r.mean_ds:>6.2f} {ci:>15} {r.rc:>6.2f} {r.is_:>6.3f} "
                f"{r.blocked:>7d} {r.ttc_brakes:>10d} {r.takeovers:>9d}\n"
            )
        if self.decompositions:
            out.write("\nUtility decomposition (template -> flat -> csn)\n")
            for weights, d in self.decompositions.items():
                share = "n/a (zero total)" if d.degenerate else f"{100 * d.struct_share:.1f}%"
                out.write(
                    f"  {weights:<12} total {d.total:+.2f}  info {d.utility_info:+.2f}  "
                    f"struct {d.utility_struct:+.2f}  struct share {share}\n"
                )
        if self.noise:
            out.write("\nPerception noise (CSN)\n")
            for row in self.noise:
                r = row.result
                flag = "yes" if row.overlaps_clean else "no"
                out.write(f"  {row.level:<9} DS {r.mean_ds:>6.2f}  CI [{r.ci_low:.2f}, {r.ci_high:.2f}]  overlaps clean: {flag}\n")
        return out.getvalue()

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["table", "key", "ds", "ci_low", "ci_high", "rc", "is", "blocked", "ttc_brakes", "takeovers", "extra"])
        for r in self.rows:
            w.writerow(["grid", r.condition, f"{r.mean_ds:.4f}", f"{r.ci_low:.4f}", f"{r.ci_high:.4f}",
                        f"{r.rc:.4f}", f"{r.is_:.4f}", r.blocked, r.ttc_brakes, r.takeovers, ""])
        for weights, d in self.decompositions.items():
            w.writerow(["decomposition", weights, f"{d.total:.4f}", "", "", "", "", "", "", "",
                        f"info={d.utility_info:.4f};struct={d.utility_struct:.4f};share={d.struct_share:.4f}"])
        for row in self.noise:
            r = row.result
            w.writerow(["noise", row.level, f"{r.mean_ds:.4f}", f"{r.ci_low:.4f}", f"{r.ci_high:.4f}",
                        f"{r.rc:.4f}", f"{r.is_:.4f}", r.blocked, r.ttc_brakes, r.takeovers,
                        f"overlaps_clean={row.overlaps_clean}"])
        return out.getvalue()


def run_condition(routes, cfg: GridConfig, reps: int = 5, seed: int = 0, noise: str | None = None) -> ConditionResult:
    """Run every (route, rep) cell for one configuration.

    Rep ``k`` re-seeds each route (and the noise stream) with ``seed + k``,
    which jitters spawn positions and actor speeds.
    """
    level = noise or cfg.noise
    sup = SupervisorConfig() if cfg.supervisor else None
    rep_ds, traces = [], []
    for k in range(reps):
        rep_traces = []
        for route in routes:
            r = replace(route, seed=seed + k)
            nz = replace(NOISE_LEVELS[level], seed=seed + k)
            try:
                tr = run_episode(r, cfg.policy, cfg.condition, sup, cfg.ttc, nz, record_narration=False)
            except Exception as exc:
                raise RuntimeError(f"configuration {cfg.name!r}, route {route.name!r}, rep {k}: {exc}") from exc
            rep_traces.append(tr)
        rep_ds.append(compute_metrics(rep_traces).ds)
        traces.extend(rep_traces)
    m = compute_metrics(traces)
    mean = float(np.mean(rep_ds))
    lo, hi = bootstrap_ci(rep_ds, seed=seed)
    return ConditionResult(
        condition=cfg.name if noise is None else level,
        route_ds={name: rm.ds for name, rm in m.per_route.items()},
        rep_ds=tuple(rep_ds),
        mean_ds=mean,
        # percentile bounds can miss the sample mean by rounding on tiny samples
        ci_low=min(lo, mean),
        ci_high=max(hi, mean),
        rc=m.rc,
        is_=m.is_,
        blocked=sum(t.terminated is Termination.BLOCKED for t in traces),
        ttc_brakes=sum(t.ttc_brake_events for t in traces),
        takeovers=sum(t.takeovers for t in traces),
    )


def _decompositions(grid, rows) -> dict[str, Decomposition]:
    plain = {}
    for cfg, row in zip(grid, rows):
        if not cfg.supervisor and cfg.ttc is None and cfg.noise == "clean":
            plain.setdefault(cfg.weights, {})[cfg.condition] = row.mean_ds
    return {
        w: decompose_utility(c["template"], c["flat"], c["csn"])
        for w, c in plain.items()
        if {"template", "flat", "csn"} <= set(c)
    }


def run_ablation_grid(routes, grid: list[GridConfig] | None = None, reps: int = 5, seed: int = 0,
                      noise_levels=NOISE_ORDER) -> GridReport:
    """Run the whole grid and the noise sweep; the report is deterministic per seed.

    The noise sweep reuses the first plain CSN configuration as its base and
    its clean row is that configuration's own result.
    """
    grid = default_grid() if grid is None else list(grid)
    if not grid:
        raise ValueError("grid must contain at least one configuration")
    rows = []
    for cfg in grid:
        log.info("running %s", cfg.name)
        rows.append(run_condition(routes, cfg, reps, seed))

    noise_rows = []
    base = next((i for i, c in enumerate(grid) if c.condition == "csn" and not c.supervisor and c.ttc is None), None)
    if base is not None and noise_levels:
        results = {}
        for level in noise_levels:
            if level == grid[base].noise:
                res = replace(rows[base], condition=level)
            else:
                res = run_condition(routes, grid[base], reps, seed, noise=level)
            results[level] = res
        clean = results.get("clean")
        for level, res in results.items():
            ok = clean is not None and intervals_overlap((res.ci_low, res.ci_high), (clean.ci_low, clean.ci_high))
            noise_rows.append(NoiseRow(level, res, ok))

    return GridReport(rows, _decompositions(grid, rows), noise_rows, reps, seed)
