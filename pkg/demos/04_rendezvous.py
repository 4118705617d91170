"""
Docking inside a line-of-sight cone
===================================

A chaser 100 m out approaches a docking port that rotates with the target
at 0.6 deg/s.  It must stay inside a 10 degree cone around the port axis
with |u_x| + |u_y| <= 250 N.  The QP relaxes the CLF row with delta and lets
the terminal barrier gain grow by k.
"""

import numpy as np

from iccbf import BarrierChain, ClassKappa, ControllerSpec, builtin, simulate
from iccbf.system import docking_range

system, U = builtin("rendezvous")
chain = BarrierChain(system, U, [ClassKappa.linear(0.25), ClassKappa.linear(0.85),
                                 ClassKappa.linear(0.05)])
spec = ControllerSpec("iccbf-clf-relaxed", chain, clf_rate=0.1, delta_weight=10.0,
                      k_weight=50.0, barrier_gain=0.05, input_scale=1000.0)

traj = simulate(system, spec, [100.0, -10.0, 0.0, 0.0, 0.0], 600.0, 0.1, chain=chain,
                goal=lambda x: docking_range(system, x) <= 3.0)

print(f"docked at t = {traj.times[-1]:.1f} s, events {traj.events}")
print(f"min h = {traj.h_values.min():.5f}, max |u|_1 = "
      f"{np.abs(traj.controls).sum(axis=1).max():.1f} N")
print("t      range    h        |u|_1")
for k in range(0, len(traj.times), 50):
    rng = docking_range(system, traj.states[k])
    print(f"{traj.times[k]:5.1f}  {rng:7.2f}  {traj.h_values[k]:.5f}  "
          f"{np.abs(traj.controls[k]).sum():6.1f}")
