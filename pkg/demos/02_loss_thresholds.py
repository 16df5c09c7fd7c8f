"""
How much loss can a Bell test survive?
======================================

The CH parameter under detection loss is bilinear in the two
efficiencies. Solving for the point where it vanishes gives the threshold
efficiencies, both symmetric and with Alice's side trusted.
"""

import numpy as np

from entb92.keyrate import Efficiencies
from entb92.loss import ch_coefficients, predict_s_ch, threshold_bob, threshold_symmetric
from entb92.states import NoiseParams, coincidence_grid, protocol_table

mes = protocol_table(np.pi / 2, np.pi / 4)

# S = eta_a eta_b D - eta_a A - eta_b M
D, A, M = ch_coefficients(mes)
print("D, A, M =", D, A, M)
for eta in (1.0, 0.9, 0.85, 0.83, 0.8):
    print(f"eta = {eta:.2f}  S_CH = {predict_s_ch(mes, Efficiencies.symmetric(eta)):+.5f}")

print("\nsymmetric threshold, maximally entangled:", threshold_symmetric(mes))
print("Bob-only threshold, maximally entangled: ", threshold_bob(mes))

# less entanglement lowers Bob's threshold towards one half
theta = np.radians([60, 30, 10, 2])
print("\n theta   eta_B (phi=theta)   1/(1+cos theta)")
for t, e in zip(theta, threshold_bob(coincidence_grid(theta, theta))):
    print(f"{np.degrees(t):6.1f}  {e:.6f}            {1 / (1 + np.cos(t)):.6f}")

# with a little noise the weakly entangled states lose their violation entirely
noise = NoiseParams(p_c=0.015, p_w=0.007)
theta = np.radians(np.arange(1, 91, 1.0))
eta_b = threshold_bob(coincidence_grid(theta, theta, noise))
i = np.nanargmin(eta_b)
print("\nnoisy state: no violation below %.0f deg" % np.degrees(theta[~np.isnan(eta_b)][0]))
print("lowest noisy Bob threshold %.4f at theta = %.0f deg" % (eta_b[i], np.degrees(theta[i])))
