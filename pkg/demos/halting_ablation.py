"""Halt a 20 kg box sliding at 0.65 m/s, three ways.

1. Impact-aware plan: the contact force follows a critically damped
   transmission model, so the robot absorbs the box gradually.
2. Impact-agnostic plan: forces are free variables, which yields a short
   impulsive burst.
3. Compliance only: the robot waits with a stiff critically damped
   impedance and lets the box hit it.

Each is rolled out in the simulator and classified by contact outcome.
"""

from impactplan.planner import agnostic_schedule, plan, plan_impact_agnostic
from impactplan.scenarios import halting_modes, halting_scenario
from impactplan.sim import detect_contact_outcome, simulate_compliance_only, simulate_rollout

s, z = halting_scenario(), halting_modes()

traj, sched, sol = plan(s, z)
print(f"impact-aware plan: {sol.status} in {sol.wall_time:.2f} s")
print(f"  contact lasts {traj.contact_duration():.3f} s, alpha {traj.alpha[0]:.2f} 1/s, f_d {traj.f_d[0]:.2f} N")

traj_a, sol_a = plan_impact_agnostic(s, z)
print(f"impact-agnostic plan: {sol_a.status}")
print(f"  contact lasts {traj_a.contact_duration():.3f} s, planned peak {traj_a.peak_force():.1f} N")

aware = simulate_rollout(traj, sched, s)
agnostic = simulate_rollout(traj_a, agnostic_schedule(traj_a, z, s.task.alpha_bounds[1]), s)
compliant = simulate_compliance_only(13600.0, s)

for name, trace in (("impact-aware", aware), ("impact-agnostic", agnostic), ("compliance only", compliant)):
    print(f"{name:>16}: {detect_contact_outcome(trace):<10} peak {trace.peak_force():7.1f} N")
print(f"compliance / impact-aware peak ratio: {compliant.peak_force() / aware.peak_force():.1f}")
