"""
Key rate versus entanglement, trusted detectors
===============================================

Walk through the closed-form quantities for the partially entangled
state cos(t/2)|HH> + sin(t/2)|VV> and compare Bob's two natural angle
choices: phi = theta (no errors on the sifted key) and the angle that
maximizes the CH violation.
"""

import numpy as np

from entb92 import keyrate, optimize
from entb92.states import make_state, concurrence, protocol_table

# the maximally entangled state has concurrence 1
print("concurrence at 90 deg:", concurrence(make_state(np.pi / 2)))

# Born table for theta = 90 deg, phi = 45 deg, indexed [alice basis, bob basis, x, y]
table = protocol_table(np.pi / 2, np.pi / 4)
print("p(a1, b1) =", table.p("a1", "b1"), " p(a1, b0bar) =", table.p("a1", "b0bar"))

# conclusive probability, QBER and CH value as a function of the angles
theta = np.radians(np.arange(5, 91, 5))
phi_eq = theta
phi_mv = optimize.optimal_phi_for_violation(theta)
print("\n theta   S(phi=theta)  S(max viol)  Q(max viol)")
for t, a, b in zip(np.degrees(theta), keyrate.s_ch_ideal(theta, phi_eq), keyrate.s_ch_ideal(theta, phi_mv)):
    q = keyrate.qber_ps(np.radians(t), optimize.optimal_phi_for_violation(np.radians(t)))
    print(f"{t:6.1f}  {a:12.5f}  {b:11.5f}  {q:11.5f}")

# rates at unit efficiency; phi = theta wins at moderate entanglement,
# the max-violation angle near the maximally entangled state
r_eq = optimize.rate_surface(theta, phi_eq, 1.0, 1.0)
r_mv = optimize.rate_surface(theta, phi_mv, 1.0, 1.0)
for t, a, b in zip(np.degrees(theta), r_eq, r_mv):
    print(f"theta {t:5.1f}  r(phi=theta) {a:+.5f}  r(max viol) {b:+.5f}")

best = optimize.best_theta_entb92_trusted()
print("\nbest theta with phi = theta: %.3f deg, rate %.5f" % (np.degrees(best.best_theta), best.best_value))
print("max-violation angle takes over above %.3f deg" % np.degrees(optimize.crossover_theta_trusted()))

# a full (theta, phi) search at unit efficiency ends at the maximally entangled state
res = optimize.maximize_rate(1.0, 1.0)
print("global optimum: theta %.2f deg, phi %.2f deg, r = %.5f"
      % (np.degrees(res.best_theta), np.degrees(res.best_phi), res.best_value))
