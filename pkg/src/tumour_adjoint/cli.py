"""Command-line driver: ``forward``, ``invert``, ``sweep``, ``gradcheck`` and ``generate``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .adjoint import solve_adjoint
from .errors import SolverError
from .forward import solve_forward
from .io import (
    ConfigError,
    RunConfig,
    build_initial_condition,
    generate_observations,
    load_config,
    read_observations,
    write_field,
    write_json,
    write_observations,
    write_radius,
    write_table,
    write_trace,
)
from .kinetics import PARAM_NAMES, Parameters
from .objective import reduced_objective, sweep_objective
from .optimizer import OptimizationAborted, minimize
from .verify import grad_check, residual_audit

log = logging.getLogger("tumour_adjoint")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


def _observations(cfg: RunConfig, ic):
    mu1, mu2 = cfg.mu
    path = cfg.observations_path
    if path is not None:
        return read_observations(path, cfg.grid, mu1, mu2)
    obs, _ = generate_observations(cfg.true_params, ic, cfg.grid, cfg.model, cfg.solver, cfg.noise, mu1, mu2)
    return obs


def _emit_adjoint(out: Path, traj, obs, p, cfg: RunConfig):
    adj = solve_adjoint(traj, obs, p, cfg.model, cfg.shooting)
    grid = traj.grid
    for name in ("l1", "l2", "l3"):
        write_field(out / f"adjoint_{name}.csv", getattr(adj, name), grid, name)
    rows = ([float(t), float(a), float(q)] for t, a, q in zip(grid.t, adj.l4, adj.q_hat))
    write_table(out / "adjoint_l4.csv", ["t [nondim]", "l4 [nondim]", "q_hat [nondim]"], rows)


def cmd_forward(cfg: RunConfig, out: Path, args) -> int:
    ic = build_initial_condition(cfg)
    p = cfg.true_params
    traj = solve_forward(p, ic, cfg.grid, cfg.model, cfg.solver)
    write_radius(out / "radius.csv", traj)
    for name in ("N", "C", "V"):
        write_field(out / f"{name}.csv", getattr(traj, name), cfg.grid, name)
    audit = residual_audit(traj, p, cfg.model, cfg.grid, ic)
    write_json(out / "residuals.json", audit.as_dict())
    if args.emit_adjoint:
        _emit_adjoint(out, traj, _observations(cfg, ic), p, cfg)
    log.info("forward: S grew from %.4f to %.4f", traj.S[0], traj.S[-1])
    return EXIT_OK


def cmd_generate(cfg: RunConfig, out: Path, args) -> int:
    ic = build_initial_condition(cfg)
    mu1, mu2 = cfg.mu
    obs, _ = generate_observations(cfg.true_params, ic, cfg.grid, cfg.model, cfg.solver, cfg.noise, mu1, mu2)
    write_observations(out / "observations.csv", obs, cfg.grid)
    return EXIT_OK


def cmd_invert(cfg: RunConfig, out: Path, args) -> int:
    start = time.perf_counter()
    ic = build_initial_condition(cfg)
    obs = _observations(cfg, ic)
    write_observations(out / "observations.csv", obs, cfg.grid)
    grid, mc, scfg, sc = cfg.grid, cfg.model, cfg.solver, cfg.shooting

    def objective(x):
        return reduced_objective(Parameters.from_array(x), ic, obs, grid, mc, scfg, sc)

    def progress(rec):
        log.debug("k=%d J=%.6e p=%s", rec.k, rec.J, np.array2string(rec.p, precision=6))

    try:
        result = minimize(objective, cfg.initial_guess, cfg.optimizer, callback=progress)
    except OptimizationAborted as exc:
        write_trace(out / "trace.csv", exc.trace)
        raise
    write_trace(out / "trace.csv", result.trace)
    wall = time.perf_counter() - start
    p_true = cfg.true_params.as_array()
    report = {
        "p_final": dict(zip(PARAM_NAMES, map(float, result.p))),
        "J_final": result.J,
        "stopping_rule": result.stop_reasons,
        "iterations": result.n_iter,
        "warnings": result.warnings,
        "p_true": dict(zip(PARAM_NAMES, map(float, p_true))),
        "relative_error": dict(zip(PARAM_NAMES, map(float, np.abs(result.p - p_true) / p_true))),
    }
    if args.timing:
        report["wall_time_s"] = wall
    write_json(out / "report.json", report)
    if args.emit_adjoint:
        p = Parameters.from_array(result.p)
        _emit_adjoint(out, solve_forward(p, ic, grid, mc, scfg), obs, p, cfg)
    log.info("invert: stopped on %s after %d iterations, J=%.4e, %.1f s",
             ",".join(result.stop_reasons), result.n_iter, result.J, wall)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, args) -> int:
    ic = build_initial_condition(cfg)
    obs = _observations(cfg, ic)
    res = sweep_objective(ic, obs, cfg.grid, cfg.raw["sweep"], cfg.model, cfg.solver)
    header = [f"{res.x_name} [nondim]", f"{res.y_name} [nondim]", "J [nondim]"]
    rows = ([float(a), float(b), float(res.J[i, j])] for i, a in enumerate(res.x) for j, b in enumerate(res.y))
    write_table(out / "sweep.csv", header, rows)
    i, j = res.argmin
    cell = res.argmin_cell
    write_json(out / "sweep_report.json", {
        "fixed": {res.fixed_name: res.fixed_value},
        "argmin": {res.x_name: float(res.x[i]), res.y_name: float(res.y[j]), "J": float(res.J[i, j])},
        "argmin_cell": {res.x_name: list(cell[0]), res.y_name: list(cell[1])},
        "variation": {res.x_name: res.variation(0), res.y_name: res.variation(1)},
    })
    log.info("sweep: minimum J=%.4e at %s=%.5g, %s=%.5g", res.J[i, j], res.x_name, res.x[i], res.y_name, res.y[j])
    return EXIT_OK


def gradcheck_points(cfg: RunConfig):
    """Configured points followed by ``n_random`` seeded draws inside the box."""
    gc = cfg.raw["gradcheck"]
    pts = [np.asarray(p, dtype=float) for p in gc["points"]]
    box = np.asarray(cfg.raw["bounds"], dtype=float)
    margin = 10.0 * gc["h"]
    rng = np.random.default_rng([cfg.seed, 1])
    for _ in range(gc["n_random"]):
        pts.append(rng.uniform(box[:, 0] + margin, box[:, 1] - margin))
    return pts


def cmd_gradcheck(cfg: RunConfig, out: Path, args) -> int:
    ic = build_initial_condition(cfg)
    obs = _observations(cfg, ic)
    gc = cfg.raw["gradcheck"]
    reports = []
    for x in gradcheck_points(cfg):
        rep = grad_check(Parameters.from_array(x), ic, obs, cfg.grid, cfg.model, cfg.solver, cfg.shooting,
                         h=gc["h"], rtol=gc["rtol"], atol=gc["atol"], flip_lambda2=args.inject_fault)
        reports.append(rep)
        log.info("gradcheck at %s: max rel err %.3e %s", np.array2string(x, precision=5),
                 rep.relative_errors.max(), "pass" if rep.passed else "FAIL")
    header = ["point"] + [f"{k}_{n} [nondim]" for n in PARAM_NAMES for k in ("p", "adjoint", "fd", "relerr")] + ["pass"]
    rows = []
    for idx, rep in enumerate(reports):
        row = [idx]
        for c in range(3):
            row += [float(rep.p[c]), float(rep.adjoint_gradient[c]), float(rep.fd_gradient[c]),
                    float(rep.relative_errors[c])]
        rows.append(row + [str(rep.passed).lower()])
    write_table(out / "gradcheck.csv", header, rows)
    passed = all(r.passed for r in reports)
    write_json(out / "gradcheck.json", {"passed": passed, "fault_injected": bool(args.inject_fault),
                                         "reports": [r.as_dict() for r in reports]})
    return EXIT_OK if passed else EXIT_VERIFY


COMMANDS = {
    "forward": cmd_forward,
    "invert": cmd_invert,
    "sweep": cmd_sweep,
    "gradcheck": cmd_gradcheck,
    "generate": cmd_generate,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, default=None, help="override the configured RNG seed")
    common.add_argument("--emit-adjoint", action="store_true", help="also write the multiplier fields")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="tumour-adjoint", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("forward", parents=[common], help="solve the direct problem")
    inv = sub.add_parser("invert", parents=[common], help="recover parameters by projected gradient descent")
    inv.add_argument("--timing", action="store_true", help="record wall time in the report (not reproducible)")
    sub.add_parser("sweep", parents=[common], help="tabulate the misfit over two parameters")
    gc = sub.add_parser("gradcheck", parents=[common], help="compare adjoint and finite-difference gradients")
    gc.add_argument("--inject-fault", action="store_true", help="flip the sign of the velocity-row term")
    sub.add_parser("generate", parents=[common], help="write synthetic observations")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=max(logging.WARNING - 10 * args.verbose, logging.DEBUG),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args.timing = getattr(args, "timing", False)
    args.inject_fault = getattr(args, "inject_fault", False)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg = cfg.with_seed(args.seed)
        return COMMANDS[args.command](cfg, args.out, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
