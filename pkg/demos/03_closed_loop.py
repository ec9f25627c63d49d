"""Closed-loop episodes on the turn suite with and without supervision.

A policy that always mirrors the turn leaves the route; with the decision
module enabled the fallback steers it through the junction instead.
"""

from csnkit.metrics import compute_metrics
from csnkit.sim import NOISE_LEVELS, run_episode
from csnkit.suites import dense_traffic_suite, direction_flip_suite
from csnkit.supervisor import SupervisorConfig

routes = direction_flip_suite()
for label, sup in (("unsupervised", None), ("supervised", SupervisorConfig())):
    traces = [run_episode(r, "direction_flip", supervisor=sup, record_narration=False) for r in routes]
    m = compute_metrics(traces)
    ends = ", ".join(f"{t.route_name}: {t.terminated.value}" for t in traces)
    print(f"{label:<13} DS {m.ds:6.2f}   {ends}")

# The TTC negative control brakes for oncoming traffic that never enters the lane.
route = dense_traffic_suite()[0]
ttc = run_episode(route, "faithful", ttc=2.0, record_narration=False)
sem = run_episode(route, "faithful", supervisor=SupervisorConfig(), record_narration=False)
print(f"\n{route.name}: TTC monitor -> {ttc.terminated.value} after {ttc.ttc_brake_events} brake events")
print(f"{route.name}: semantic module -> {sem.terminated.value}")

# Perception noise only perturbs what the narrator sees.
noisy = run_episode(route, "faithful", noise=NOISE_LEVELS["extreme"], record_narration=True)
print("\nnarration under extreme noise, frame 0:")
print("   ", noisy.frames[0].narration)
