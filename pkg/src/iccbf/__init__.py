"""Input-constrained control barrier functions.

Build the recursive barrier chain of a control-affine system under a
polytopic input set, certify it, and run the resulting quadratic-program
controllers in closed loop.
"""

from iccbf.chain import BarrierChain, ClassKappa, hocbf_reduction_check
from iccbf.controller import ControllerSpec, control, desired_control
from iccbf.qp import QPInfeasibleError, QPProblem, QPSolution, solve
from iccbf.sim import Trajectory, simulate
from iccbf.system import ControlAffineSystem, InputSet, builtin
from iccbf.verifier import CertificateReport, certify, detect_simple, nagumo_spotcheck

__all__ = [
    "BarrierChain", "CertificateReport", "ClassKappa", "ControlAffineSystem", "ControllerSpec",
    "InputSet", "QPInfeasibleError", "QPProblem", "QPSolution", "Trajectory", "builtin",
    "certify", "control", "desired_control", "detect_simple", "hocbf_reduction_check",
    "nagumo_spotcheck", "simulate", "solve",
]
__version__ = "0.1.0"
