import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iccbf import autodiff as ad
from iccbf.chain import BarrierChain, ClassKappa, hocbf_reduction_check
from iccbf.system import builtin, affine_infimum
from conftest import ACC_ALPHAS, make_chain
from oracles import central_difference, grid_min_box


def test_class_kappa_odd_extension():
    a = ClassKappa.sqrt(7.0)
    assert a(4.0) == pytest.approx(14.0)
    assert a(-4.0) == pytest.approx(-14.0)
    assert a(0.0) == 0.0
    lin = ClassKappa.linear(2.0)
    assert lin(-3.0) == -6.0


def test_sqrt_kappa_derivative_cap_at_zero():
    a = ClassKappa.sqrt(7.0)
    (s,) = ad.lift([0.0], 0)
    y = a(s)
    assert float(y.value) == 0.0
    assert float(y.partials[0]) == pytest.approx(1e6)


@given(st.floats(0.01, 100.0), st.floats(0.01, 100.0))
@settings(max_examples=50, deadline=None)
def test_class_kappa_monotone(s, t):
    for a in (ClassKappa.linear(0.5), ClassKappa.sqrt(3.0), ClassKappa("power", 2.0, 1.5)):
        assert (a(s) - a(t)) * (s - t) >= 0
        assert a(-s) == pytest.approx(-a(s))


def test_b0_is_h(acc_chain):
    x = [100.0, 20.0]
    assert acc_chain.eval_b(0, x) == acc_chain.system.safety(x)


def test_double_integrator_b1(double_integrator_chain):
    ch = double_integrator_chain
    for x in ([1.0, 2.0], [-3.0, 0.5], [0.0, -1.0]):
        assert ch.eval_b(1, x) == pytest.approx(x[0] + x[1], abs=1e-14)
        np.testing.assert_allclose(ch.grad_b(1, x), [1.0, 1.0])


def test_scalar_b1_at_zero():
    ch = make_chain("scalar-example", (ClassKappa.linear(1.0), ClassKappa.linear(1.0)))
    assert ch.eval_b(1, [0.0]) == pytest.approx(1.0)
    # brute force over 1e6 input samples
    u = np.linspace(-1, 1, 1_000_000)
    assert np.min(-(0.0 + u) + 2.0) == pytest.approx(ch.eval_b(1, [0.0]), abs=1e-6)


def test_acc_levels_positive_deep_inside(acc_chain):
    x = np.array([150.0, 15.0])
    levels = acc_chain.eval_all(x)
    assert all(b > 0 for b in levels)
    # each level against a direct grid minimisation of the level-i expression
    for i in range(2):
        b, lf, lg, _ = acc_chain.lie(i, x)
        c0 = np.array([lf + acc_chain.alpha(i, b)])
        ref = grid_min_box(c0, np.array([lg[0]]), -0.25, 0.25)[0]
        assert levels[i + 1] == pytest.approx(ref, abs=1e-9)


def test_acc_gradients(acc_chain):
    np.testing.assert_allclose(acc_chain.grad_b(0, [10.0, 3.0]), [1.0, -1.8])
    x = np.array([120.0, 18.0])
    g = acc_chain.grad_b(2, x)
    fd = central_difference(lambda y: acc_chain.eval_b(2, y), x, step=1e-6)
    np.testing.assert_allclose(g, fd, rtol=1e-5)


def test_membership(acc_chain):
    flags, inner = acc_chain.membership([10.0, 20.0])
    assert flags[0] is False and inner is False
    flags, inner = acc_chain.membership([200.0, 13.89])
    assert all(flags) and inner


def test_membership_exact_at_zero():
    ch = make_chain("double-integrator", (ClassKappa.linear(1.0), ClassKappa.linear(1.0)))
    flags, inner = ch.membership([1.0, -1.0])  # b_1 = 0 exactly
    assert flags == [True, True] and inner


def test_batched_membership(acc_chain):
    X = np.array([[10.0, 200.0], [20.0, 13.89]])
    flags, inner = acc_chain.membership(X)
    np.testing.assert_array_equal(inner, [False, True])


def test_hocbf_reduction_examples(double_integrator_chain):
    rng = np.random.default_rng(3)
    X = rng.uniform(-5, 5, size=(100, 2))
    assert hocbf_reduction_check(double_integrator_chain, X) <= 1e-12
    ch4 = make_chain("double-integrator", (ClassKappa.linear(4.0), ClassKappa.linear(1.0)))
    assert hocbf_reduction_check(ch4, X) <= 1e-12


def test_hocbf_reduction_rejects_acc(acc_chain):
    with pytest.raises(ValueError):
        hocbf_reduction_check(acc_chain, [[100.0, 20.0]])


def test_depth_limit_refuses_long_chain():
    with pytest.raises(ad.DepthError):
        make_chain("double-integrator", [ClassKappa.linear(1.0)] * 5)


def test_recursion_identity(acc_chain):
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.uniform([0, 0], [200, 24])
        for i in range(acc_chain.N):
            b, lf, lg, _ = acc_chain.lie(i, x)
            expected = affine_infimum(lf + acc_chain.alpha(i, b), list(lg), acc_chain.U)
            assert acc_chain.eval_b(i + 1, x) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_terminal_condition_scalar_h_only():
    ch = make_chain("scalar-example", (ClassKappa.linear(1.0),))
    inf_rate, sup_rate = ch.level_rate_bounds(0, [2.0])
    assert sup_rate == -1.0
    assert inf_rate == -3.0
    # at x = 2, h = 0 so the terminal condition equals sup_u hdot
    assert ch.terminal_condition([2.0]) == -1.0
