import numpy as np
import pytest
from scipy.optimize import brentq

from iccbf.chain import ClassKappa
from iccbf.controller import (ControllerSpec, clf_cbf_qp_clipped_control, control,
                              desired_control, iccbf_clf_relaxed_control, iccbf_qp_control,
                              in_admissible_set)
from iccbf.qp import QPInfeasibleError
from conftest import make_chain


def test_iccbf_qp_deep_inside(acc_chain):
    spec = ControllerSpec("iccbf-qp", acc_chain)
    x = np.array([180.0, 18.0])
    res = iccbf_qp_control(spec, x)
    ud = desired_control(spec, x)
    np.testing.assert_allclose(res.u, np.clip(ud, -0.25, 0.25), atol=1e-12)
    assert res.diagnostics["barrier_slack"] > 0
    assert in_admissible_set(acc_chain, x, res.u)


def test_desired_control_solves_clf_rate(acc_chain):
    spec = ControllerSpec("iccbf-qp", acc_chain, clf_rate=10.0)
    x = np.array([150.0, 15.0])
    ud = desired_control(spec, x)
    sys_ = acc_chain.system
    v, vmax = x[1], sys_.params["v_max"]
    V = (v - vmax) ** 2
    vdot = sys_.dynamics(x, ud)[1]
    assert 2 * (v - vmax) * vdot == pytest.approx(-10.0 * V)


def test_iccbf_qp_on_terminal_boundary(acc_chain):
    spec = ControllerSpec("iccbf-qp", acc_chain)
    v = 20.0
    d = brentq(lambda s: acc_chain.eval_b(2, [s, v]), 40.0, 200.0, xtol=1e-13)
    x = np.array([d, v])
    assert abs(acc_chain.eval_b(2, x)) < 1e-9
    res = iccbf_qp_control(spec, x)
    b, lf, lg, _ = acc_chain.lie(2, x)
    assert lf + lg @ res.u >= -1e-8
    assert abs(res.u[0]) <= 0.25 + 1e-12


def test_scalar_controls_stay_in_box():
    ch = make_chain("scalar-example", (ClassKappa.linear(1.0), ClassKappa.linear(1.0)))
    spec = ControllerSpec("iccbf-qp", ch)
    for x in np.linspace(-3.0, 0.5, 50):
        u = spec([x])
        assert -1 - 1e-12 <= u[0] <= 1 + 1e-12
        assert in_admissible_set(ch, [x], u)


def test_infeasibility_is_surfaced():
    ch = make_chain("scalar-example", (ClassKappa.linear(1.0),))
    spec = ControllerSpec("iccbf-qp", ch)
    with pytest.raises(QPInfeasibleError) as info:
        spec([2.0])
    assert info.value.solution.status == "infeasible"


def test_clipped_baseline_clips(acc_chain):
    spec = ControllerSpec("clf-cbf-qp-clipped", acc_chain)
    v = 22.0

    def raw(d):
        return clf_cbf_qp_clipped_control(spec, [d, v]).diagnostics["u_qp"][0] + 0.9

    d = brentq(raw, 1.8 * v - 20.0, 1.8 * v + 20.0, xtol=1e-12)
    res = clf_cbf_qp_clipped_control(spec, [d, v])
    assert res.diagnostics["u_qp"][0] == pytest.approx(-0.9, abs=1e-9)
    assert res.u[0] == -0.25
    assert res.diagnostics["clipped"]


def test_clipped_baseline_idle_at_vmax(acc_chain):
    spec = ControllerSpec("clf-cbf-qp-clipped", acc_chain)
    u = spec([200.0, acc_chain.system.params["v_max"]])
    assert u[0] == pytest.approx(0.0, abs=1e-9)


def _relaxed(chain):
    return ControllerSpec("iccbf-clf-relaxed", chain, clf_rate=0.1, delta_weight=10.0,
                          k_weight=50.0, barrier_gain=0.05, input_scale=1000.0)


def test_relaxed_slacks_vanish_when_unneeded(rendezvous_chain):
    spec = _relaxed(rendezvous_chain)
    tau = rendezvous_chain.system.params["clf_time_constant"]
    rho = rendezvous_chain.system.params["port_radius"]
    # on the CLF target manifold, slowly closing along the docking axis
    x = np.array([60.0, 0.0, -(60.0 - rho) / tau * 0.0, 0.0, 0.0])
    x[2] = -(x[0] - rho) / tau
    assert rendezvous_chain.system.V(list(x)) == pytest.approx(0.0, abs=1e-20)
    assert min(rendezvous_chain.eval_all(x)) > 0
    res = iccbf_clf_relaxed_control(spec, x)
    assert res.diagnostics["k"] == pytest.approx(0.0, abs=1e-9)
    assert res.diagnostics["delta"] == pytest.approx(0.0, abs=1e-9)


def test_relaxed_binding_thrust(rendezvous_chain):
    spec = _relaxed(rendezvous_chain)
    x0 = np.array([100.0, -10.0, 0.0, 0.0, 0.0])
    res = control(spec, x0)
    bound = rendezvous_chain.U.radius
    assert np.abs(res.u).sum() == pytest.approx(bound, rel=1e-10)
    # the 1-norm rows follow the CLF and barrier rows in the QP
    assert any(i >= 2 for i in res.qp.active_set)
    A, B = rendezvous_chain.U.as_inequalities()
    assert A.shape == (4, 2)


def test_relaxed_input_bound_over_states(rendezvous_chain, rng):
    spec = _relaxed(rendezvous_chain)
    bound = rendezvous_chain.U.radius
    for _ in range(30):
        x = np.array([rng.uniform(20, 120), rng.uniform(-10, 10), rng.uniform(-2, 2),
                      rng.uniform(-2, 2), rng.uniform(0, 0.3)])
        try:
            u = spec(x)
        except QPInfeasibleError:
            continue
        assert np.abs(u).sum() <= bound * (1 + 1e-8)


def test_unknown_kind(acc_chain):
    with pytest.raises(ValueError):
        ControllerSpec("mpc", acc_chain)
