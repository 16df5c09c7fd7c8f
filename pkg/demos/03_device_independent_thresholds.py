"""
Optimized key rates and efficiency thresholds
=============================================

Optimize both angles at each efficiency and find where a positive rate
first appears, for full device independence (both sides lossy) and for
the one-sided case where Alice's device is trusted.
"""

import time

import numpy as np

from entb92 import optimize
from entb92.states import NoiseParams

noise = NoiseParams(p_c=0.015, p_w=0.007)

for eta in (1.0, 0.97, 0.94, 0.92):
    g = optimize.maximize_rate(eta, eta)
    e = optimize.maximize_rate(eta, eta, protocol="entb92")
    print(f"eta {eta:.2f}: generalized r = {g.best_value:.5f} "
          f"(theta {np.degrees(g.best_theta):5.2f}, phi {np.degrees(g.best_phi):5.2f}), "
          f"phi = theta r = {e.best_value:.5f}")

t0 = time.perf_counter()
di = optimize.di_threshold_symmetric()
print("\nfull-DI threshold %.5f at theta %.2f deg, phi %.2f deg (%.1f s)"
      % (di.threshold, np.degrees(di.theta), np.degrees(di.phi), time.perf_counter() - t0))

sdi = optimize.sdi_threshold_bob()
print("one-sided threshold %.5f (theta -> 0)" % sdi.threshold)

sdi_noisy = optimize.sdi_threshold_bob(noise)
print("one-sided threshold with noise %.4f at theta %.1f deg"
      % (sdi_noisy.threshold, np.degrees(sdi_noisy.theta)))

# the one-sided rate curve
for eta, r, t, p in optimize.rate_vs_eta_curve("1sdi", [0.55, 0.7, 0.85, 1.0]):
    print(f"eta_B {eta:.2f}: r = {r:.5f} at theta {np.degrees(t):.1f} deg")
