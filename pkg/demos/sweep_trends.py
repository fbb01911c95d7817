"""How the optimised stiffness and peak force react to workspace and goal.

The halt-push task stops a box moving at 0.4 m/s and pushes it to a goal.
A smaller workspace leaves less room to absorb the box, and a farther
goal needs a harder push. Runs about a minute on one core.
"""

from impactplan.planner import sweep
from impactplan.scenarios import halt_push_scenario

s = halt_push_scenario()

print("goal 0.8 m, varying workspace")
for r in sweep(s, [0.10, 0.12, 0.20, 0.50], [0.8]).rows:
    print(f"  ws {r.workspace:.2f} m: alpha(-1) {r.alpha_neg:6.2f}  alpha(+1) {r.alpha_pos:6.2f}  peak {r.peak_force:6.2f} N")

print("workspace 0.5 m, varying goal")
for r in sweep(s, [0.50], [0.8, 0.6, 0.4]).rows:
    print(f"  goal {r.goal:.1f} m: alpha(-1) {r.alpha_neg:6.2f}  alpha(+1) {r.alpha_pos:6.2f}  peak {r.peak_force:6.2f} N")
