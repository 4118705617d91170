import sys
from pathlib import Path

import numpy as np
import pytest

from iccbf.chain import BarrierChain, ClassKappa
from iccbf.system import builtin

sys.path.insert(0, str(Path(__file__).parent))

ACC_ALPHAS = (ClassKappa.linear(4.0), ClassKappa.sqrt(7.0), ClassKappa.linear(2.0))
RENDEZVOUS_ALPHAS = (ClassKappa.linear(0.25), ClassKappa.linear(0.85), ClassKappa.linear(0.05))
ACC_DOMAIN = ([0.0, 0.0], [200.0, 24.0])


def make_chain(model: str, alphas, **params) -> BarrierChain:
    sys_, U = builtin(model, **params)
    return BarrierChain(sys_, U, list(alphas))


@pytest.fixture(scope="session")
def acc_chain():
    return make_chain("acc", ACC_ALPHAS)


@pytest.fixture(scope="session")
def rendezvous_chain():
    return make_chain("rendezvous", RENDEZVOUS_ALPHAS)


@pytest.fixture(scope="session")
def double_integrator_chain():
    return make_chain("double-integrator", (ClassKappa.linear(1.0), ClassKappa.linear(1.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        if name.startswith("test_criterion_"):
            _ACCEPTANCE[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        verdict = "PASS" if _ACCEPTANCE[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")


@pytest.fixture(scope="session")
def acc_runs(acc_chain):
    """ICCBF-QP and clipped-baseline ACC runs over 40 s, with wall-clock times."""
    import time

    from iccbf.controller import ControllerSpec
    from iccbf.sim import simulate

    out = {}
    for kind in ("iccbf-qp", "clf-cbf-qp-clipped"):
        spec = ControllerSpec(kind, acc_chain, clf_rate=10.0)
        t0 = time.perf_counter()
        traj = simulate(acc_chain.system, spec, [100.0, 20.0], 40.0, 0.01, chain=acc_chain)
        out[kind] = (traj, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def rendezvous_run(rendezvous_chain):
    import time

    from iccbf.controller import ControllerSpec
    from iccbf.sim import simulate
    from iccbf.system import docking_range

    sys_ = rendezvous_chain.system
    spec = ControllerSpec("iccbf-clf-relaxed", rendezvous_chain, clf_rate=0.1, delta_weight=10.0,
                          k_weight=50.0, barrier_gain=0.05, input_scale=1000.0)
    t0 = time.perf_counter()
    traj = simulate(sys_, spec, [100.0, -10.0, 0.0, 0.0, 0.0], 600.0, 0.1, chain=rendezvous_chain,
                    goal=lambda x: docking_range(sys_, x) <= 3.0)
    return traj, time.perf_counter() - t0


@pytest.fixture(scope="session")
def acc_certificate(acc_chain):
    import time

    from iccbf.verifier import certify

    t0 = time.perf_counter()
    report = certify(acc_chain, ACC_DOMAIN, budget=100_000, n_starts=50, seed=0)
    return report, time.perf_counter() - t0
