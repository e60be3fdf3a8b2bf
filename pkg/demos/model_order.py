"""How many states? Minimum size versus assumed state count.

Three-state data fitted with two states leaves a residual well above the
noise; the parsimonious search escalates until the residual drops to the
noise level. Two-state data fitted with three states returns a third
state of negligible occupancy, flagged as a phantom.
"""

from rdcdyn.pipeline import run_scenario
from rdcdyn.scenarios import MEDIA_COMPLEX3, arc_scenario, complex_scenario
from rdcdyn.solver import SolverConfig, feasible, parsimonious_solve, solve

print("feasible state counts with 2 and 3 media:",
      [n for n in range(1, 7) if feasible(2, n)], [n for n in range(1, 7) if feasible(3, n)])

res = run_scenario(complex_scenario((0.5, 0.3, 0.2)), noise=1.0, seed=1)
cfg = SolverConfig(seed=1)
for n in (1, 2, 3):
    print(f"3-state data, n={n}: hz minimum {solve(res.anchors, n=n, config=cfg).hz_minimum:6.2f} Hz")
sol = parsimonious_solve(res.anchors, noise=1.0, config=cfg)
print("parsimonious search:", [(a["n"], round(a["hz_minimum"], 2)) for a in sol.diagnostics["attempts"]],
      "-> n =", sol.n)

two = run_scenario(arc_scenario(60.0, media=MEDIA_COMPLEX3), noise=1.0, seed=1, n=3)
print("\n2-state data solved with n=3:")
for i, r in enumerate(two.solution.occupancies):
    tag = "  phantom" if i in two.solution.phantom_states else ""
    print(f"  state {i + 1}: rho={r:.3f}{tag}")
