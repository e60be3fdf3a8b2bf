"""Two-state arc motion end to end.

Simulates RDCs for a 60 degree phi jump at residue 71 in two media with
+-1 Hz noise, locates the hinge from the dynamic profiles, recovers both
states and their occupancies, and checks them against the truth.
"""

from rdcdyn.pipeline import run_scenario
from rdcdyn.profile import compute_profile, detect_onset
from rdcdyn.scenarios import arc_scenario

sc = arc_scenario(60.0, occupancies=(0.6, 0.4))
res = run_scenario(sc, noise=1.0, seed=3)

# Off 50/50 the forward walk usually stays under the 2 x noise threshold:
# the eleven dynamic residues barely move an rmsd pooled over the whole
# chain. Walking backward, the static residues join a fit anchored on the
# dynamic domain and the rise at the hinge is obvious.
for direction in ("forward", "backward"):
    p = compute_profile(sc.template, res.rdcs, direction)
    v = detect_onset(p)
    print(f"{direction:8s} profile: {v.classification.value}, onset at residue {v.onset}")

sol = res.solution
print(f"\nhz minimum {sol.hz_minimum:.3f} Hz from {sol.diagnostics['converged']} converged starts")
for i, (e, r) in enumerate(zip(sol.eulers, sol.occupancies)):
    print(f"state {i + 1}: rho={r:.3f}  alpha={e.alpha:7.2f} beta={e.beta:7.2f} gamma={e.gamma:7.2f}")

rep = res.report
print(f"\nstatic domain rmsd {rep.static_rmsd:.2e} A")
for i, (j, d, err) in enumerate(zip(rep.matching, rep.state_rmsd, rep.occupancy_error)):
    print(f"state {i + 1} -> target {j + 1}: translation-only rmsd {d:.2f} A, occupancy error {err:.3f}")
print("validation passed" if rep.passed else "validation failed")

# the assembled ensemble is an ordinary multi-model PDB file, occupancies in the B-factor column
pdb = res.ensemble.to_pdb()
models = [ln for ln in pdb.splitlines() if ln.startswith("MODEL ")]
bfac = sorted({float(ln[60:66]) for ln in pdb.splitlines() if ln.startswith("ATOM")}, reverse=True)
print(f"\n{len(models)} models, B-factors {bfac}")
