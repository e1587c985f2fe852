"""Rectified axonal delays: clamping, shifting and the spike-difference gradient."""
import numpy as np

from radsnn.delay import DelayState, apply_delay_update, delay_gradient, shift_spikes

# %% Raw delays are free; every read goes through the clamp to [0, cap]
state = DelayState(np.array([-2.0, 3.4, 70.0]), theta_d=64.0)
print("raw:", state.raw_delays, "clamped:", state.clamped_delays)

# %% Shifting moves whole spike trains later; spikes pushed past the window are lost
x = np.zeros((3, 12))
x[:, [1, 6]] = 1
print(shift_spikes(x, state))

# %% The estimator telescopes: a constant upstream gradient only sees the last bin
s = np.zeros((1, 10))
s[0, 4] = 1
print("constant upstream:", delay_gradient(s, np.ones((1, 10))))
print("ramp upstream:", delay_gradient(s, np.arange(10.0)[None, :]))

# %% Updates act on the raw value and may leave the interval; the clamp still holds
upd = apply_delay_update(DelayState([63.5], 64.0), np.array([-1.0]), step_size=1.0)
print("raw after step:", upd.raw_delays, "effective:", upd.clamped_delays)
