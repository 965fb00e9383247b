"""Uniform tails of a bounded family, then a convergent subsequence.

The synthetic family has scale coordinates decaying like 1/nu^2 against f(nu) = nu.
Its tails sit below the threshold eps(N), which halves well before N = 64 on a short
window.  The second half plants two clusters of flow lines and lets the diagonal
selection find one of them.
"""

from scaleflow import compactness as cp
from scaleflow.families import synthetic_decay_family, two_cluster_family

fam, f = synthetic_decay_family(T=0.1)
rep = cp.tail_verify(fam, f, 0.1, [8, 16, 32, 64])
print(f"family bound c = {rep['c']:.3f}")
print(f"  {'N':>3} {'eps(N)':>10} {'max tail':>10}")
for row in rep["ladder"]:
    print(f"  {row['N']:3d} {row['eps']:10.4f} {row['max_tail']:10.2e}")

spec, fam = two_cluster_family()
idx, limit, rep = cp.extract_convergent(fam, [0.25, 0.5], 1.0, spec=spec)
print(f"\nselected members {idx}")
print("successive gaps " + " ".join(f"{g:.3f}" for g in rep["gaps"]))
print(f"limit candidate: member {rep['limit_index']}, residual {rep['limit_residual']:.1e}")
