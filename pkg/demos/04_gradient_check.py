"""Finite-difference check of the backward pass on a smoothed network.

Spikes are replaced by a steep sigmoid so the loss is differentiable; the
analytic gradients are then compared with central differences for a sweep
of step sizes.
"""
from radsnn.gradcheck import check_gradients, delay_sign_agreement, gradcheck_network

net, x, label = gradcheck_network((4, 8, 3), steps=32, seed=0)
for rep in check_gradients(net, x, label, include_delays=True):
    name, idx = rep.worst
    print(f"h={rep.h:g}: max relative error {rep.max_error:.2e} (worst {name}[{idx}])")

# %% How often does the binary-spike delay estimator point the right way?
frac, n = delay_sign_agreement(configs=50)
print(f"sign agreement with finite differences: {frac:.1%} over {n} delays")
