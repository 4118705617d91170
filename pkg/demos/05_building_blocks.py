"""
Jets and the QP solver
======================

The barrier chain differentiates through an infimum over U, then feeds the
result to a small QP.  Both pieces can be used directly.
"""

import numpy as np

from iccbf import autodiff as ad
from iccbf.qp import QPProblem, solve

# a depth-2 jet: second derivative of x^3 at x = 2
(x,) = ad.lift([2.0], 0, depth=2)
y = x ** 3
print("x^3 at 2:", float(y.value.value), "d/dx:", float(y.partials[0].value),
      "d2/dx2:", float(y.partials[0].partials[0]))

# gradients of a field over a batch of points in one pass
pts = np.array([[0.0, 0.5, 1.0], [1.0, 1.0, 1.0]])
val, grad = ad.value_and_gradient(lambda z: ad.sin(z[0]) * z[1] ** 2, [pts[0], pts[1]])
print("values:", val, "\ndf/dx:", grad[0], "\ndf/dy:", grad[1])

# min 1/2 |u|^2 subject to u1 + u2 >= 2 and |u_i| <= 1.5
p = QPProblem(np.eye(2), np.zeros(2), A=[[-1.0, -1.0]], b=[-2.0], lb=[-1.5, -1.5], ub=[1.5, 1.5])
sol = solve(p)
print(sol.status, sol.z, "active rows", sol.active_set, "kkt", sol.kkt_residual)

# contradictory rows come back with a Farkas vector instead of an exception
bad = QPProblem(np.eye(1), [0.0], A=[[1.0], [-1.0]], b=[-1.0, -1.0])
sol = solve(bad)
print(sol.status, "certificate", sol.farkas)
