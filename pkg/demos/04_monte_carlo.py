"""
Monte Carlo run of the protocol
===============================

Simulate individual pairs through basis choice, measurement, loss and the
non-detection rules, then compare every estimate with its analytic value.
"""

import numpy as np

from entb92.keyrate import Efficiencies
from entb92.sim import SimConfig, compare, empirical_rates, projected_rate, simulate
from entb92.states import NoiseParams, ProtocolParams

config = SimConfig(
    params=ProtocolParams(theta=np.radians(60), phi=np.radians(60)),
    noise=NoiseParams(),
    eff=Efficiencies(eta_a=1.0, eta_b=0.68),
    n_pairs=10_000_000,
    seed=0,
)
result = simulate(config)
print("sifted key length", result.sifted_length, " post-selected", result.post_selected_length)

print("\nstatistic              empirical        sigma     expected      z")
for row in compare(result):
    print(f"{row.name:20s} {row.empirical:12.6g} {row.sigma:12.3g} {row.expected:12.6g} {row.z:6.2f}")

# one-sided rate from measured data; 0.68 sits just above the 2/3 threshold at 60 deg
rates = empirical_rates(result)
print("\nempirical post-selected rate r = %.3e" % rates.r)

# the same run, projected to other efficiencies through the loss model
lossless = SimConfig(ProtocolParams(np.radians(60), np.radians(60)), n_pairs=2_000_000, seed=1)
res = simulate(lossless)
for eta_b in (0.6, 0.7, 0.8, 0.9):
    print(f"projected rate at eta_B = {eta_b}: {projected_rate(res, Efficiencies(1.0, eta_b)):+.4f}")

# same seed, different thread count: identical counts
again = simulate(config, threads=1)
print("\nbit-identical rerun:", np.array_equal(again.counts, result.counts))
