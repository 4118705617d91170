"""
Certifying the cruise-control barrier
=====================================

Adaptive cruise control with state (d, v): d is the gap to the lead car, v
the ego speed.  h = d - 1.8 v asks for a 1.8 s headway.  Braking is bounded
by a quarter of gravity, so h is not enough; two extra levels with
alpha_0 = 4s, alpha_1 = 7 sqrt(s) and alpha_2 = 2s are certified here over
d in [0, 200] m, v in [0, 24] m/s.

The search takes about 40 s: 10^5 Sobol samples, then 50 Nelder-Mead runs.
"""

import time

import numpy as np

from iccbf import BarrierChain, ClassKappa, builtin, certify, detect_simple

system, U = builtin("acc")
chain = BarrierChain(system, U, [ClassKappa.linear(4.0), ClassKappa.sqrt(7.0),
                                 ClassKappa.linear(2.0)])

x = np.array([100.0, 20.0])
print("levels at (100 m, 20 m/s):", np.round(chain.eval_all(x), 4))
print("gradient of b_2 there:   ", chain.grad_b(2, x))

start = time.perf_counter()
report = certify(chain, ([0.0, 0.0], [200.0, 24.0]), budget=100_000, n_starts=50)
print(f"gamma = {report.gamma:.4f} at d = {report.argmin_state[0]:.2f}, "
      f"v = {report.argmin_state[1]:.2f} ({time.perf_counter() - start:.0f} s)")
print(f"{report.samples_inside} of {report.samples_used} samples were inside C*")

# the terminal level touches C*, so not every admissible input is safe
simple = detect_simple(chain, ([0.0, 0.0], [200.0, 24.0]), budget=8192)
print(f"simple: {simple.is_simple}, closest state {np.round(simple.witness, 3)}")
