"""Command line driver.

Subcommands:
    run          solve a scenario (preset name or config file) and write the
                 CSV artifacts plus figures into an output directory
    baseline     forward-only solve with zero controls
    validate-mc  compare the density solver against an SDE path ensemble
    check        fast invariant self-test battery

Exit codes: 0 success, 2 usage/configuration errors, 3 solver failures,
4 output I/O failures.  Failures print a single ``error: ...`` line.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import checks, report
from .cost import evaluate_J_parts
from .fp_solver import CflError, SolverError, solve_forward
from .grid import ControlTrajectory, make_initial_density
from .mc_oracle import (EnsembleSpec, em_ensemble, histogram_density,
                        l1_distance, make_gaussian_sampler, rk4_sir3)
from .scenario import (DEFAULT_SNAPSHOT_TIMES, PRESET_NAMES, ConfigError,
                       ScenarioConfig, load_config, preset)
from .sqh import SqhStalledError, SqhTrace, run_sqh

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _resolve_scenario(token: str) -> ScenarioConfig:
    if token in PRESET_NAMES:
        return preset(token)
    if os.path.exists(token):
        return load_config(token)
    raise ConfigError(f"unknown preset: {token}")


def _cost_thresholds(cfg: ScenarioConfig) -> tuple[float | None, float | None]:
    """(S threshold, I threshold) lines implied by the cost shapes, if any."""
    s_thr = i_thr = None
    kind, _, arg = cfg.cost.terminal.partition(":")
    if kind == "neg_susceptible_surplus":
        s_thr = float(arg)
    kind, _, arg = cfg.cost.running.partition(":")
    if kind == "indicator":
        i_thr = float(arg)
    return s_thr, i_thr


def _write_run_artifacts(outdir: str, cfg: ScenarioConfig, control: ControlTrajectory,
                         density, trace: SqhTrace | None, objective_parts: dict,
                         snapshot_times, figures: bool, adjoint=None) -> None:
    grid = cfg.grid
    os.makedirs(outdir, exist_ok=True)
    s_thr, i_thr = _cost_thresholds(cfg)

    report.write_controls_csv(os.path.join(outdir, "controls.csv"), control)
    if trace is not None:
        report.write_trace_csv(os.path.join(outdir, "trace.csv"), trace)

    sir = rk4_sir3(cfg.init_center[0], cfg.init_center[1], 0.0, control, cfg.model, grid)
    report.write_dynamics_csv(os.path.join(outdir, "dynamics.csv"), grid.times(), sir)

    for t in snapshot_times:
        k = grid.time_index(t)
        name = report.density_snapshot_name(t)
        report.write_field_snapshot_csv(os.path.join(outdir, name), density.values[k], grid)
        if adjoint is not None:
            aname = report.density_snapshot_name(t, value_label="q")
            report.write_field_snapshot_csv(os.path.join(outdir, aname),
                                            adjoint.values[k], grid, value_label="q")
        if figures:
            report.plot_density_snapshot(
                os.path.join(outdir, name.replace(".csv", ".png")),
                density.values[k], grid, t, s_threshold=s_thr, i_threshold=i_thr)

    summary = {
        "label": cfg.label,
        "J_total": objective_parts["total"],
        "J_control": objective_parts["control"],
        "J_running": objective_parts["running"],
        "J_terminal": objective_parts["terminal"],
    }
    if trace is not None:
        summary["status"] = trace.status
        summary["iterations_accepted"] = trace.accepted_count()
        summary["iterations_total"] = len(trace.iterations)
        if trace.accepted():
            summary["final_tau"] = trace.accepted()[-1].tau
            summary["final_eps"] = trace.accepted()[-1].eps
    report.write_summary(os.path.join(outdir, "summary.txt"), summary)

    if figures:
        bounds = (cfg.model.alpha_max, cfg.model.v_max, cfg.model.eta_max)
        report.plot_controls(os.path.join(outdir, "controls.png"), control, bounds)
        report.plot_dynamics(os.path.join(outdir, "dynamics.png"), grid.times(), sir,
                             s_threshold=s_thr, i_threshold=i_thr)
        if trace is not None and trace.accepted():
            report.plot_objective_history(os.path.join(outdir, "objective.png"), trace)


def _cmd_run(args) -> int:
    cfg = _resolve_scenario(args.scenario)
    grid = cfg.grid
    snapshot_times = (tuple(float(v) for v in args.snapshots.split(","))
                      if args.snapshots else DEFAULT_SNAPSHOT_TIMES)
    for t in snapshot_times:
        grid.time_index(t)  # validate up front

    if cfg.cost.is_state_free:
        # Zero control is optimal when only (nonnegative) control costs
        # remain, so the uncontrolled preset skips the iteration entirely.
        control = ControlTrajectory.zeros(grid)
        f0 = make_initial_density(cfg.init_center, cfg.init_variance, grid)
        density = solve_forward(f0, control, cfg.model, grid)
        trace = SqhTrace(status="converged_tau", initial_J=0.0)
        adjoint = None
    else:
        def progress(it):
            if args.verbose:
                flag = "accept" if it.accepted else "reject"
                print(f"iter={it.iteration} J={report.fmt(it.J)} tau={report.fmt(it.tau)} "
                      f"eps={report.fmt(it.eps)} {flag}", flush=True)

        result = run_sqh(cfg, callback=progress)
        control, density, trace, adjoint = (result.control, result.density,
                                            result.trace, result.adjoint)

    parts = evaluate_J_parts(density, control, cfg.cost, grid)
    _write_run_artifacts(args.out, cfg, control, density, trace, parts,
                         snapshot_times, not args.no_figures,
                         adjoint=adjoint if args.export_adjoint else None)
    print(f"wrote artifacts to {args.out} (J = {report.fmt(parts['total'])}, "
          f"status = {trace.status})")
    return EXIT_OK


def _cmd_baseline(args) -> int:
    cfg = _resolve_scenario(args.scenario)
    grid = cfg.grid
    control = ControlTrajectory.zeros(grid)
    f0 = make_initial_density(cfg.init_center, cfg.init_variance, grid)
    density = solve_forward(f0, control, cfg.model, grid)
    parts = evaluate_J_parts(density, control, cfg.cost, grid)
    _write_run_artifacts(args.out, cfg, control, density, None, parts,
                         DEFAULT_SNAPSHOT_TIMES, not args.no_figures)
    print(f"wrote baseline artifacts to {args.out} (J = {report.fmt(parts['total'])})")
    return EXIT_OK


def _cmd_validate_mc(args) -> int:
    cfg = _resolve_scenario(args.scenario)
    grid = cfg.grid
    t_star = float(args.time)
    k_star = grid.time_index(t_star)

    control = ControlTrajectory.zeros(grid)
    f0 = make_initial_density(cfg.init_center, cfg.init_variance, grid)
    density = solve_forward(f0, control, cfg.model, grid)

    sampler = make_gaussian_sampler(cfg.init_center, cfg.init_variance,
                                    grid.x_lo, grid.x_hi)
    spec = EnsembleSpec(n_paths=args.paths, dt_em=grid.dt_control / args.substeps,
                        seed=args.seed)
    ensemble = em_ensemble(sampler, control, cfg.model, spec, [t_star], grid)

    empirical = histogram_density(ensemble.snapshots[t_star], grid)
    dist = l1_distance(density.values[k_star], empirical, grid)
    fp_mean_i = density.mean_state()[k_star, 1]
    em_mean_i = ensemble.mean[k_star, 1]
    se_i = ensemble.std_error(k_star)[1]

    print(f"l1_distance={report.fmt(dist)}")
    print(f"fp_mean_I={report.fmt(fp_mean_i)}")
    print(f"em_mean_I={report.fmt(em_mean_i)}")
    print(f"em_std_error_I={report.fmt(se_i)}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        report.write_mc_snapshot_csv(
            os.path.join(args.out, f"mc_snapshot_t{t_star:.4}.csv"),
            ensemble.snapshots[t_star])
        report.write_field_snapshot_csv(
            os.path.join(args.out, report.density_snapshot_name(t_star)),
            density.values[k_star], grid)
    return EXIT_OK


def _cmd_check(args) -> int:
    failures = checks.run_battery(verbose=True)
    return EXIT_OK if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpepi",
        description="Distribution-level optimal control of a stochastic SIR model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve a scenario and write artifacts")
    run.add_argument("scenario", help=f"preset ({', '.join(PRESET_NAMES)}) or config file")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--snapshots", default=None,
                     help="comma-separated density snapshot times on the control grid")
    run.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    run.add_argument("--export-adjoint", action="store_true",
                     help="also dump costate snapshots")
    run.add_argument("--verbose", action="store_true", help="print iteration progress")
    run.set_defaults(func=_cmd_run)

    base = sub.add_parser("baseline", help="forward-only solve with zero controls")
    base.add_argument("scenario", help="preset or config file")
    base.add_argument("--out", default="out", help="output directory (default: out)")
    base.add_argument("--no-figures", action="store_true")
    base.set_defaults(func=_cmd_baseline)

    mc = sub.add_parser("validate-mc", help="density solver vs path-ensemble comparison")
    mc.add_argument("scenario", help="preset or config file")
    mc.add_argument("--paths", type=int, default=100_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--time", type=float, default=5.0)
    mc.add_argument("--substeps", type=int, default=10,
                    help="path-integrator substeps per control interval")
    mc.add_argument("--out", default=None, help="optional directory for snapshot CSVs")
    mc.set_defaults(func=_cmd_validate_mc)

    chk = sub.add_parser("check", help="run the invariant self-test battery")
    chk.set_defaults(func=_cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CflError, SolverError, SqhStalledError) as exc:
        print(f"error: solver: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
