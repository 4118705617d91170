"""Command-line entry point.

Exit codes: 0 success, 1 runtime or safety failure, 2 configuration error.
The output directory is taken from ``--out``, else ``$ICCBF_OUT_DIR``, else the
config's ``output`` entry.  With several ``--config`` files each run writes to
its own ``<out>/<scenario name>`` directory.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from iccbf import config as cfgmod
from iccbf.chain import ChainEvaluationError
from iccbf.qp import QPInfeasibleError
from iccbf.sim import QP_INFEASIBLE, SAFETY_VIOLATION, simulate, summary, write_outputs
from iccbf.system import MODELS, builtin, docking_range
from iccbf.verifier import (EmptyInnerSetError, boundary_partition, certify,
                            inner_set_grid)

log = logging.getLogger("iccbf")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
OUT_ENV = "ICCBF_OUT_DIR"


def _out_dir(cfg: cfgmod.ScenarioConfig, out: Optional[str], batch: bool) -> Path:
    base = out or os.environ.get(OUT_ENV)
    if base is None:
        return Path(cfg.output)
    return Path(base) / cfg.name if batch else Path(base)


def _write_summary(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        for k, v in data.items():
            fh.write(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n")


def run_simulate(cfg: cfgmod.ScenarioConfig, out_dir: Path, seed: Optional[int] = None) -> int:
    if cfg.sim is None:
        raise cfgmod.ConfigError("simulate needs a sim section")
    chain = cfg.build_chain()
    controller = cfg.build_controller(chain)
    goal = None
    if cfg.sim.goal is not None:
        radius = cfg.sim.goal.value
        goal = lambda x: docking_range(chain.system, x) <= radius  # noqa: E731
    traj = simulate(chain.system, controller, cfg.sim.x0, cfg.sim.t_end, cfg.sim.dt,
                    chain=chain, goal=goal, per_stage_control=cfg.sim.per_stage_control)
    write_outputs(traj, out_dir)
    info = summary(traj)
    info["max_u_1norm"] = float(np.max(np.abs(traj.controls).sum(axis=1)))
    _write_summary(out_dir / "summary.txt", info)
    bad = {SAFETY_VIOLATION, QP_INFEASIBLE} & traj.event_kinds()
    log.info("%s: min h = %.6g, events = %s", cfg.name, info["min_h"], traj.events)
    return EXIT_FAILURE if bad else EXIT_OK


def run_verify(cfg: cfgmod.ScenarioConfig, out_dir: Path, seed: Optional[int] = None,
               workers: int = 1) -> int:
    if cfg.verify is None:
        raise cfgmod.ConfigError("verify needs a verify section")
    v = cfg.verify
    chain = cfg.build_chain()
    report = certify(chain, (v.lower, v.upper), budget=v.budget, n_starts=v.starts,
                     max_iter=v.max_iter, seed=v.seed if seed is None else seed,
                     workers=workers, check_simple=v.check_simple)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write(out_dir / "certificate.txt", out_dir / "refinement_trace.csv")
    log.info("%s: gamma = %.6g, is_iccbf = %s", cfg.name, report.gamma, report.is_iccbf)
    return EXIT_OK if report.is_iccbf else EXIT_FAILURE


def run_boundary_grid(cfg: cfgmod.ScenarioConfig, out_dir: Path, seed: Optional[int] = None) -> int:
    g = cfg.boundary_grid
    if g is None:
        raise cfgmod.ConfigError("boundary-grid needs a boundary_grid section")
    chain = cfg.build_chain()
    a1 = np.linspace(g.axis1.start, g.axis1.stop, g.axis1.num)
    a2 = np.linspace(g.axis2.start, g.axis2.stop, g.axis2.num)
    names = tuple(chain.system.state_names[d] for d in g.dims)
    out_dir.mkdir(parents=True, exist_ok=True)
    grids = []
    for level in range(chain.N + 1):
        grid = boundary_partition(chain, level, a1, a2, dims=g.dims, base_state=g.base_state)
        grid.write_csv(out_dir / f"level_{level}.csv", names)
        grids.append(grid)
    inner = inner_set_grid(grids)
    inner.level = "star"
    inner.write_csv(out_dir / "inner_set.csv", names)
    return EXIT_OK


COMMANDS = {"simulate": run_simulate, "verify": run_verify, "boundary-grid": run_boundary_grid}


def _run_one(command: str, path: str, out: Optional[str], seed: Optional[int], batch: bool,
             workers: int = 1) -> int:
    try:
        cfg = cfgmod.load(path)
        out_dir = _out_dir(cfg, out, batch)
        if command == "verify":
            return run_verify(cfg, out_dir, seed, workers)
        return COMMANDS[command](cfg, out_dir, seed)
    except cfgmod.ConfigError as exc:
        log.error("%s: configuration error: %s", path, exc)
        return EXIT_CONFIG
    except (QPInfeasibleError, ChainEvaluationError, EmptyInnerSetError, ValueError,
            ArithmeticError, OSError) as exc:
        log.error("%s: %s failed: %s", path, command, exc)
        return EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iccbf", description=(
        "Input-constrained control barrier functions: simulate, verify and grid scenarios."))
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [("simulate", "closed-loop simulation"),
                           ("verify", "certify the terminal barrier condition"),
                           ("boundary-grid", "label 2-D grids against each level set")]:
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", action="append", required=True,
                       help="scenario YAML file or bundled name; repeat for a batch")
        s.add_argument("--out", help=f"output directory (overrides ${OUT_ENV})")
        s.add_argument("--seed", type=int, help="override the verifier sampling seed")
        s.add_argument("--parallel", type=int, default=1,
                       help="number of scenarios run concurrently")
    sub.add_parser("list-models", help="list built-in models and bundled configs")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _resolve(name: str) -> str:
    if Path(name).exists():
        return name
    bundled = cfgmod.bundled_configs()
    return str(bundled[name]) if name in bundled else name


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "list-models":
        for name in MODELS:
            sysm, U = builtin(name)
            print(f"{name}\tn={sysm.n}\tm={sysm.m}\tU={U.kind}")
        for name, path in sorted(cfgmod.bundled_configs().items()):
            print(f"config\t{name}\t{path}")
        return EXIT_OK
    if args.parallel < 1:
        log.error("--parallel must be at least 1")
        return EXIT_CONFIG
    paths = [_resolve(c) for c in args.config]
    batch = len(paths) > 1
    if args.parallel > 1 and batch:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            codes = list(pool.map(_run_one, [args.command] * len(paths), paths,
                                  [args.out] * len(paths), [args.seed] * len(paths),
                                  [batch] * len(paths)))
    else:
        workers = args.parallel if args.command == "verify" else 1
        codes = [_run_one(args.command, p, args.out, args.seed, batch, workers) for p in paths]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
