"""Action drop against energy along Floer gradient flow lines.

First a quadratic Hamiltonian, where the flow line through the constant loop 1 is
known in closed form and both sides equal (e^2 - e^-2)/2 on [-1, 1].  Then a few
integrated flow lines under a radial bump, where only the numbers themselves are
available and the two sides have to agree with each other.
"""

import numpy as np

from scaleflow.families import perturbed_quadratic_family
from scaleflow.flow import closed_form_trajectory, energy_identity_check
from scaleflow.frames import floer_field, quadratic_hamiltonian
from scaleflow.loop_space import FourierPath

spec = floer_field(quadratic_hamiltonian(1, 1.0))
w = closed_form_trajectory(spec, FourierPath.single_mode(0, [1.0], 4), 1.0, 513)
rep = energy_identity_check(spec, w.with_states(w.states, policy="field"))
exact = 0.5 * (np.exp(2) - np.exp(-2))
print("closed form, gamma = 1, T = 1")
print(f"  action drop {rep['action_drop']:.15f}")
print(f"  energy      {rep['energy']:.15f}")
print(f"  exact       {exact:.15f}")

bump, fam = perturbed_quadratic_family(count=6)
print("\nbump Hamiltonian, integrated by ETD-RK4 on [-0.25, 0.25]")
print(f"  {'member':>6} {'action drop':>14} {'energy':>14} {'mismatch':>10}")
for i, tr in enumerate(fam):
    r = energy_identity_check(bump, tr)
    print(f"  {i:6d} {r['action_drop']:14.6e} {r['energy']:14.6e} {r['mismatch']:10.1e}")
