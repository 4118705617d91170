"""
A safe set that cannot be kept safe
===================================

x' = x + u with |u| <= 1 and h(x) = 2 - x.  At the edge x = 2 every
admissible input still pushes the state out, so h on its own is not a
usable barrier.  One more level of the chain fixes it.
"""

import numpy as np

from iccbf import BarrierChain, ClassKappa, builtin, certify

system, U = builtin("scalar-example")

# h alone: the best the input can do at x = 2 is hdot = -1
h_only = BarrierChain(system, U, [ClassKappa.linear(1.0)])
low, high = h_only.level_rate_bounds(0, [2.0])
print(f"at x = 2: hdot ranges over [{low}, {high}]")

report = certify(h_only, ([-3.0], [3.0]), budget=4096, n_starts=10)
print(f"h alone: gamma = {report.gamma:.6f} at x = {report.argmin_state[0]:.6f}, "
      f"certified = {report.is_iccbf}")

# b_1 = inf_u [hdot + h] = 1 - 2x shrinks the set to x <= 1/2
chain = BarrierChain(system, U, [ClassKappa.linear(1.0), ClassKappa.linear(1.0)])
xs = np.linspace(-1, 1, 9)
print("x      b_0     b_1")
for x in xs:
    b0, b1 = chain.eval_all([x])
    print(f"{x:5.2f}  {b0:6.3f}  {b1:6.3f}")

report = certify(chain, ([-3.0], [3.0]), budget=4096, n_starts=10)
print(f"two levels: gamma = {report.gamma:.6f}, certified = {report.is_iccbf}")
