"""Kernels and a single spike response neuron.

Walks through the two kernels, then drives one neuron with a hand-made
input train and prints its membrane potential and output spikes.
"""
import numpy as np

from radsnn.kernels import REFRACTORY, RESPONSE, eval_refractory, eval_response, tabulate
from radsnn.srm import SrmLayerParams, forward

# %% The response kernel peaks at exactly 1 when t equals the time constant
for t in (0, 2, 5, 10, 20):
    print(f"response(t={t:>2}, tau=5) = {eval_response(t, 5.0):.4f}")

# %% The refractory kernel dips to -2 * threshold
print("refractory minimum:", eval_refractory(5.0, 5.0, 10.0))

# %% Tabulated kernels are truncated once they decay below a small tolerance
eps = tabulate(RESPONSE, 5.0)
nu = tabulate(REFRACTORY, 5.0, theta_u=10.0)
print("support steps:", eps.support_steps, nu.support_steps)

# %% One neuron, two inputs, a burst of coincident spikes
x = np.zeros((2, 40))
x[0, [3, 4, 5]] = 1
x[1, [4, 5, 20]] = 1
layer = SrmLayerParams(np.array([[6.0, 6.0]]), None)
rec = forward(x, layer, eps, nu, theta_u=10.0)
print("membrane:", np.round(rec.membrane[0, :16], 2))
print("spike times:", np.flatnonzero(rec.spikes[0]))
