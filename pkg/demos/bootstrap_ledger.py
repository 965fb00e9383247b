"""Second-order bounds from first-order ones, member by member.

A family of flow lines under a radial bump is integrated on [-T, T].  The bootstrap
ledger starts from the measured C0/C1 size kappa and the constants c0 (frame) and c1
(field), and compares every derived bound on the inner window with the measured norm.
The elementary ledger does the same from the L2 energy alone.
"""

from scaleflow import compactness as cp
from scaleflow.families import perturbed_quadratic_family
from scaleflow.frames import elementary_constant, trivial_frame, v3_constant

T, T_inner = 0.25, 0.125
spec, fam = perturbed_quadratic_family(count=8, T=T)
frame = trivial_frame(spec.n)

# c0 = 1 for the trivial frame; c1 from the constant chain on the family's kappa-ball
kappa = max(cp.bootstrap_ledger(frame, spec, w, T_inner, 1.0, 1.0).constants["kappa"] for w in fam)
c1 = v3_constant(kappa, spec.gamma, spec.c - abs(spec.gamma))["c1"]
c1p = elementary_constant(spec.gamma, spec.c)
print(f"kappa over the family {kappa:.4f}, c1 = {c1:.3f}, c1' = {c1p:.3f}\n")

boot = cp.bootstrap_ledger(frame, spec, fam[0], T_inner, 1.0, c1)
print("bootstrap ledger, member 0")
for r in boot.rows():
    print(f"  {r['quantity']:10s} measured {r['measured']:10.4e}  bound {r['bound']:10.4e}  {'ok' if r['passed'] else 'VIOLATED'}")

elem = cp.elementary_ledger(spec, fam[0], T_inner, c1p)
print("\nelementary ledger, member 0")
for r in elem.rows():
    print(f"  {r['quantity']:10s} measured {r['measured']:10.4e}  bound {r['bound']:10.4e}  {'ok' if r['passed'] else 'VIOLATED'}")

passed = sum(cp.bootstrap_ledger(frame, spec, w, T_inner, 1.0, c1).passed for w in fam)
print(f"\nbootstrap ledger holds on {passed}/{len(fam)} members")

coarse = cp.elementary_xi_defect(spec, fam[0])
fine = cp.elementary_xi_defect(spec, perturbed_quadratic_family(count=1, T=T, S=1025)[1][0])
print(f"xi equation defect {coarse['defect']:.2e} at S = 513, {fine['defect']:.2e} at S = 1025 "
      f"(ratio {cp.refinement_ratio(coarse, fine):.1f})")
