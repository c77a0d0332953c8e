"""Command line front end.

    gaussflow run <config> [--out DIR]
    gaussflow verify <config> [--out DIR]
    gaussflow oracle <config> [--out DIR]
    gaussflow sweep <config> --param p --values 2 3 [--jobs K]

Exit codes: 0 success, 1 finished without a certificate (or comparison
failed), 2 invalid configuration, 3 flow breakdown, 4 oracle failure.
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import flow, geometry, oracle, persistence
from .config import ConfigError, build_run, config_from_dict, load_config
from .orlicz import OrliczClass, PowerLaw
from .sphere_grid import GridS1

logger = logging.getLogger("gaussflow")

EXIT_OK = 0
EXIT_UNCERTIFIED = 1
EXIT_CONFIG = 2
EXIT_FLOW = 3
EXIT_ORACLE = 4

_CERTIFIED = ("stationary", "residual_met")
_BREAKDOWN = ("convexity_lost", "h_nonpositive")


def _exit_code(reason):
    if reason in _CERTIFIED:
        return EXIT_OK
    if reason in _BREAKDOWN:
        return EXIT_FLOW
    return EXIT_UNCERTIFIED


def _prepare(config_path, out):
    cfg = load_config(config_path)
    out_dir = Path(out if out is not None else cfg.output)
    if out is None and not out_dir.is_absolute():
        out_dir = cfg.base_dir / out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    return cfg, out_dir


def execute_run(cfg, out_dir):
    """Run the flow for ``cfg`` and write its outputs; returns the FlowResult."""
    grid, h0, f, spec, flow_cfg = build_run(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    persistence.write_json(cfg.to_dict(), out_dir / "config.json")
    chash = cfg.hash()

    def snap(state):
        if cfg.snapshot_every and state.step_count % cfg.snapshot_every == 0:
            persistence.save_snapshot(
                persistence.make_snapshot(grid, state.h, state.t, state.step_count, chash),
                out_dir / f"snapshot-{state.step_count}.json",
            )

    if cfg.snapshot_every:
        persistence.save_snapshot(persistence.make_snapshot(grid, h0, 0.0, 0, chash), out_dir / "snapshot-0.json")
    result = flow.run(grid, h0, f, spec, flow_cfg, callback=snap)
    persistence.write_diagnostics(result.diagnostics, out_dir / "diagnostics.csv")
    if cfg.snapshot_every:
        persistence.save_snapshot(
            persistence.make_snapshot(grid, result.h, result.t, result.steps, chash),
            out_dir / f"snapshot-{result.steps}.json",
        )
    persistence.write_json(
        {
            "termination": result.reason,
            "c_star": result.c_star,
            "residual": result.residual,
            "V0": result.V0,
            "volume": geometry.volume(grid, result.h),
            "steps": result.steps,
            "t": result.t,
            "config_hash": chash,
        },
        out_dir / "result.json",
    )
    return result


def cmd_run(config_path, out=None):
    try:
        cfg, out_dir = _prepare(config_path, out)
        result = execute_run(cfg, out_dir)
    except ConfigError as exc:
        logger.error("invalid config: %s", exc)
        return EXIT_CONFIG
    logger.info("%s: residual %.3e, c* = %.10g", result.reason, result.residual, result.c_star)
    return _exit_code(result.reason)


def _oracle_problem(cfg, grid, f, spec, V0):
    opts = cfg.verify
    return oracle.OracleProblem(
        grid,
        f,
        spec,
        V0,
        newton_tol=opts.get("newton_tol", 1e-10),
        max_newton_iters=opts.get("max_newton_iters", 100),
        seed=cfg.seed,
    )


def cmd_oracle(config_path, out=None):
    try:
        cfg, out_dir = _prepare(config_path, out)
        grid, h0, f, spec, _ = build_run(cfg)
        if not isinstance(grid, GridS1):
            raise ConfigError("oracle supports n=2 only")
    except ConfigError as exc:
        logger.error("invalid config: %s", exc)
        return EXIT_CONFIG
    V0 = cfg.verify.get("V0", geometry.volume(grid, h0))
    try:
        sol = oracle.solve_newton(_oracle_problem(cfg, grid, f, spec, V0))
    except oracle.OracleFailure as exc:
        logger.error("oracle failed: %s", exc)
        return EXIT_ORACLE
    persistence.write_json(
        {"c": sol.c, "iters": sol.iters, "residual": sol.residual, "V0": V0, "h": sol.h},
        out_dir / "oracle.json",
    )
    return EXIT_OK


def cmd_verify(config_path, out=None):
    try:
        cfg, out_dir = _prepare(config_path, out)
        if cfg.dimension != 2:
            raise ConfigError("oracle supports n=2 only")
        grid, h0, f, spec, flow_cfg = build_run(cfg)
        result = execute_run(cfg, out_dir)
    except ConfigError as exc:
        logger.error("invalid config: %s", exc)
        return EXIT_CONFIG
    if result.reason not in _CERTIFIED:
        logger.error("flow failed: %s", result.reason)
        return _exit_code(result.reason) or EXIT_FLOW
    problem = _oracle_problem(cfg, grid, f, spec, result.V0)
    try:
        sol = oracle.solve_newton(problem)
    except oracle.OracleFailure as exc:
        logger.error("oracle failed: %s", exc)
        persistence.write_json({"status": "oracle_failed", "message": str(exc)}, out_dir / "compare.json")
        return EXIT_ORACLE

    h_flow = geometry.rescale_to_volume(grid, result.h, result.V0)
    h_oracle = geometry.rescale_to_volume(grid, sol.h, result.V0)
    cmp = oracle.compare(grid, h_oracle, h_flow)
    flow_res = flow.residual(grid, h_flow, f, spec).sup_rel
    oracle_res = flow.residual(grid, h_oracle, f, spec).sup_rel
    tol = cfg.verify.get("tolerance", 1e-4)
    if cmp.sup_rel <= tol:
        status = "agree"
    elif flow_res <= flow_cfg.tol_residual and oracle_res <= 10 * problem.newton_tol:
        # both solve the equation: distinct even solutions, not a failure
        status = "inconclusive"
    else:
        status = "disagree"
    persistence.write_json(
        {
            "status": status,
            "sup_rel": cmp.sup_rel,
            "l2_rel": cmp.l2_rel,
            "tolerance": tol,
            "flow_residual": flow_res,
            "oracle_residual": oracle_res,
            "flow_termination": result.reason,
            "flow_c_star": result.c_star,
            "oracle_c": sol.c,
            "oracle_iters": sol.iters,
            "V0": result.V0,
        },
        out_dir / "compare.json",
    )
    logger.info("verify: %s (sup_rel %.3e)", status, cmp.sup_rel)
    return EXIT_OK if status in ("agree", "inconclusive") else EXIT_UNCERTIFIED


def _j_monotone(rows, cls):
    J = np.array([r.J for r in rows])
    if len(J) < 2:
        return True
    dJ = np.diff(J)
    tol = 1e-9 * np.max(np.abs(J))
    return bool(np.all(dJ <= tol)) if cls is OrliczClass.A else bool(np.all(dJ >= -tol))


def _sweep_one(cfg_dict, base_dir, value, out_dir):
    cfg = config_from_dict(cfg_dict, base_dir).with_p(value)
    cls = PowerLaw(value, cfg.dimension).classify()
    row = {"p": float(value), "class": cls.value}
    try:
        result = execute_run(cfg, out_dir)
    except (ConfigError, ArithmeticError) as exc:
        row.update(termination=f"error: {exc}", residual=float("nan"), c_star=float("nan"), steps=0)
        return row
    row.update(
        termination=result.reason,
        residual=result.residual,
        c_star=result.c_star,
        steps=result.steps,
        J_monotone=_j_monotone(result.diagnostics, cls),
    )
    return row


SUMMARY_COLUMNS = ("p", "class", "termination", "residual", "c_star", "steps", "J_monotone")


def cmd_sweep(config_path, param, values, out=None, jobs=1):
    if param != "p":
        logger.error("only the exponent p can be swept")
        return EXIT_CONFIG
    try:
        cfg, out_dir = _prepare(config_path, out)
        for v in values:
            if PowerLaw(v, cfg.dimension).classify() is OrliczClass.NEITHER:
                raise ConfigError(f"p={v:g} satisfies neither assumption (A) or (B)")
        for v in values:
            build_run(cfg.with_p(v))
    except ConfigError as exc:
        logger.error("invalid sweep: %s", exc)
        return EXIT_CONFIG

    args = [(cfg.to_dict(), cfg.base_dir, v, out_dir / f"p={v:g}") for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, *zip(*args)))
    else:
        rows = [_sweep_one(*a) for a in args]
    persistence.write_table(rows, SUMMARY_COLUMNS, out_dir / "summary.csv")
    ok = [r for r in rows if r["termination"] in _CERTIFIED]
    return EXIT_OK if ok else EXIT_UNCERTIFIED


def build_parser():
    parser = argparse.ArgumentParser(prog="gaussflow", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "verify", "oracle", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--out", default=None, help="output directory (overrides the config)")
        p.add_argument("--quiet", action="store_true")
        if name == "sweep":
            p.add_argument("--param", default="p")
            p.add_argument("--values", type=float, nargs="+", required=True)
            p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        return cmd_run(args.config, args.out)
    if args.command == "verify":
        return cmd_verify(args.config, args.out)
    if args.command == "oracle":
        return cmd_oracle(args.config, args.out)
    return cmd_sweep(args.config, args.param, args.values, args.out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
