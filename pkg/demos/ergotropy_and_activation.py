# %% [markdown]
# # Ergotropy, passive states and multi-copy activation
#
# A five-level cell with equally spaced levels and a population vector that
# is not ordered by energy. Sorting populations against energies gives the
# passive state; the energy difference is the ergotropy.

# %%
import numpy as np

from qbattery import DensityState, EnergySpectrum
from qbattery.ergotropy import (activation_asymptote, activation_curve, entropy_matched_beta, internal_hamiltonian,
                                ergotropy_thermal_bound, passive_decomposition)

spec = EnergySpectrum((-2.0, -1.0, 0.0, 1.0, 2.0))
h0 = internal_hamiltonian(spec)
rho = DensityState(np.diag([0.1, 0.2, 0.0, 0.3, 0.4]))
dec = passive_decomposition(rho, h0)
print("passive populations:", np.real(np.diag(dec.passive_state.matrix)))
print("ergotropy:", dec.ergotropy)
print("thermal upper bound:", ergotropy_thermal_bound(rho, h0))

# %% [markdown]
# A passive qutrit still releases work once several copies are acted on
# together. The per-copy gain grows with the number of copies and is
# capped by the energy gap to the Gibbs state of equal entropy.

# %%
qutrit = EnergySpectrum((0.0, 0.579, 1.0))
sigma = DensityState(np.diag(np.array([0.538, 0.237, 0.224]) / 0.999))
print("entropy-matched beta:", entropy_matched_beta(sigma, internal_hamiltonian(qutrit)))
asym = activation_asymptote(sigma, qutrit)
for n, dw in activation_curve(sigma, qutrit, 4):
    print(f"n={n}  extra work per copy={dw:.6f}  fraction of limit={dw / asym:.3f}")
