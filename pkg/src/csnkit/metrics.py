"""Driving Score, Route Completion and Infraction Score over episode traces."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from csnkit.sim import PENALTY, EpisodeTrace


@dataclass(frozen=True)
class RouteMetrics:
    route: str
    ds: float
    rc: float
    is_: float
    n: int


@dataclass(frozen=True)
class Metrics:
    per_route: dict[str, RouteMetrics]
    ds: float
    rc: float
    is_: float


def infraction_score(infractions) -> float:
    """Product of penalty coefficients; kinds without a coefficient count as 1."""
    return float(np.prod([PENALTY.get(kind, 1.0) for kind, *_ in infractions])) if infractions else 1.0


def compute_metrics(traces: list[EpisodeTrace]) -> Metrics:
    """Per-route means and the aggregate (mean over routes).

    Several traces of the same route (repetitions) are averaged first, so
    every route carries equal weight in the aggregate.
    """
    if not traces:
        raise ValueError("compute_metrics needs at least one trace")
    grouped = defaultdict(list)
    for tr in traces:
        grouped[tr.route_name].append(tr)
    per_route = {}
    for name, group in grouped.items():
        is_vals = [infraction_score(t.infractions) for t in group]
        rc_vals = [100.0 * t.rc_fraction for t in group]
        ds_vals = [rc * s for rc, s in zip(rc_vals, is_vals)]
        per_route[name] = RouteMetrics(name, float(np.mean(ds_vals)), float(np.mean(rc_vals)), float(np.mean(is_vals)), len(group))
    rows = list(per_route.values())
    return Metrics(
        per_route=per_route,
        ds=float(np.mean([r.ds for r in rows])),
        rc=float(np.mean([r.rc for r in rows])),
        is_=float(np.mean([r.is_ for r in rows])),
    )
