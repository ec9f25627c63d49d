"""Step the decision module by hand through a bad turn proposal.

The command is a left turn. The driving policy first proposes waypoints
that run straight on, which breaks the direction monitor; the fallback
takes over for the dwell period and hands back once proposals turn left.
"""

from csnkit.supervisor import SupervisorState, step_supervisor_traced

straight = [(0.0, 3.0), (0.0, 9.0)]
left = [(-2.0, 3.0), (-7.0, 7.0)]

state = SupervisorState()
print("frame  proposal  theta    phi1   mode  countdown")
for frame in range(26):
    traj = straight if frame < 3 else left
    state, rec = step_supervisor_traced(state, traj, "left_turn", False, 0.3, 4.0, frame=frame)
    label = "straight" if traj is straight else "left"
    print(f"{frame:>5}  {label:<8} {rec.theta_deg:6.1f}  {str(rec.phi1):<5}  {rec.mode:<4}  {rec.countdown:>3}")

# A stalled car: throttle without motion trips the liveness monitor on the
# 30th consecutive frame.
state = SupervisorState()
for frame in range(30):
    state, rec = step_supervisor_traced(state, [(0.0, 5.0)], "follow", False, 0.6, 0.0, frame=frame)
print(f"\nstuck frames: {rec.stuck_counter}, phi2 holds: {rec.phi2}, mode: {rec.mode}")
