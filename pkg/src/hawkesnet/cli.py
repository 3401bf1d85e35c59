"""Command-line interface.

Subcommands::

    simulate           draw a spike matrix from a config's model
    test               de-correlated score test for one edge or edge set
    ci                 like test, with the one-step confidence interval forced on
    experiment         full Monte-Carlo grid -> metrics CSV
    ingest             bin an event-format CSV onto the unit grid
    permute            per-unit time permutation (null reference data)
    check-assumptions  regularity diagnostics for a config's model

Exit codes: 0 success; 2 malformed input (bad flags, unreadable or invalid
files, infeasible configuration); 3 assumption violation (the message names
the violated assumption); 4 numerical degeneracy (zero-spike units, singular
normalizers).

Unit ids are 1-based everywhere on the CLI surface.  All outputs are
deterministic given the flags (timing collection, which is inherently not,
is opt-in via ``experiment --timing``).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .experiments import (
    apply_overrides,
    config_from_json,
    metrics_to_csv,
    run_experiment,
)
from .inference import (
    DegenerateDesign,
    SingularUpsilon,
    fit_nuisance,
    one_step_ci,
    oracle_fit_nuisance,
    score_test,
)
from .model import KernelSpec, check_assumptions
from .simulate import SimConfig, make_structure, permute_trains, simulate
from .solver import SeqCVSpec
from .spikeio import (
    bin_events,
    read_dense_csv,
    read_event_csv,
    read_truth_csv,
    write_dense_csv,
    write_truth_csv,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ASSUMPTION = 3
EXIT_NUMERICAL = 4


class AssumptionViolation(RuntimeError):
    """A regularity diagnostic failed hard enough to refuse the operation."""


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc) + "\n"
    if out and out != "-":
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_config(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_json(fh.read())


def _truth_path(out: str) -> str:
    root, ext = out.rsplit(".", 1) if "." in out else (out, "")
    return f"{root}.truth.{ext}" if ext else f"{out}.truth"


def _require_stationary(model) -> None:
    report = check_assumptions(model)
    if not report.pass_flags["stationarity"]:
        raise AssumptionViolation(
            "stationarity assumption violated: the largest singular value of the "
            f"interaction-mass matrix is gamma_omega = {report.gamma_omega:.4g} >= 1"
        )


def _parse_cols(text: str) -> list[int]:
    try:
        cols = [int(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise ValueError(f"--col expects a comma-separated list of unit ids, got {text!r}")
    if not cols or any(c < 1 for c in cols):
        raise ValueError(f"--col expects 1-based unit ids, got {text!r}")
    return cols


def _check_active_units(spikes, units: list[int]) -> None:
    counts = np.asarray(spikes.events).sum(axis=0)
    for u in units:
        if counts[u - 1] == 0:
            raise DegenerateDesign(
                f"unit {u} never spikes in the recorded window; its history column is "
                "constant and the edge test is degenerate"
            )


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    config = apply_overrides(config, seed=args.seed)
    T = args.T if args.T is not None else config.T_list[0]
    model = config.model()
    _require_stationary(model)
    spikes, state = simulate(
        model,
        SimConfig(T=T, burn_in=config.burn_in, seed=config.seed, clip_bounds=config.clip_bounds),
    )
    write_dense_csv(args.out, spikes)
    truth = _truth_path(args.out)
    write_truth_csv(truth, model.theta)
    report = check_assumptions(model)
    _emit(
        {
            "command": "simulate",
            "spikes": args.out,
            "truth": truth,
            "T": T,
            "p": model.p,
            "seed": config.seed,
            "clip_count": state.clip_count,
            "gamma_omega": report.gamma_omega,
        },
        None,
    )
    return EXIT_OK


def _run_edge_test(args, want_ci: bool) -> int:
    spikes = read_dense_csv(args.spikes)
    row = args.row
    cols = _parse_cols(args.col)
    if row < 1:
        raise ValueError(f"--row expects a 1-based unit id, got {row}")
    _check_active_units(spikes, sorted({row, *cols}))
    kernel = KernelSpec(decay_rate=args.decay)
    cv = SeqCVSpec(n_folds=args.cv_folds, min_train_frac=args.cv_min_train_frac)
    row0 = row - 1
    cols0 = [c - 1 for c in cols]
    if args.oracle:
        if not args.truth:
            raise ValueError("--oracle requires --truth (the known interaction matrix)")
        theta = read_truth_csv(args.truth)
        if theta.shape[0] != spikes.p:
            raise ValueError(
                f"truth matrix is {theta.shape[0]}x{theta.shape[0]} but the spike file has "
                f"{spikes.p} units"
            )
        support = np.flatnonzero(theta[row0]).tolist()
        fit = oracle_fit_nuisance(
            spikes, kernel, row0, cols0, support, sigma_floor=args.sigma_floor
        )
    else:
        fit = fit_nuisance(
            spikes,
            kernel,
            row0,
            cols0,
            cv=cv,
            sigma_floor=args.sigma_floor,
            sigma_without_intercept=args.sigma_without_intercept,
        )
    result = score_test(spikes, kernel, fit, args.alpha)
    doc = {
        "command": args.command,
        "row": row,
        "cols": cols,
        "method": fit.method,
        "alpha": args.alpha,
        "dof": result.dof,
        "U_hat": result.U_hat,
        "p_value": result.p_value,
        "reject": result.reject,
        "S_hat": result.S_hat.tolist(),
        "upsilon_hat": result.upsilon_hat.tolist(),
        "diagnostics": {
            "cond": result.diagnostics.cond,
            "min_eig": result.diagnostics.min_eig,
            "ridge_jitter": result.diagnostics.ridge_jitter,
        },
        "sigma_floor": args.sigma_floor,
        "decay": args.decay,
    }
    if want_ci:
        region = one_step_ci(spikes, kernel, fit, args.alpha)
        doc["ci"] = {
            "b_hat": region.b_hat.tolist(),
            "level": region.level,
            "interval": list(region.interval) if region.interval else None,
            "region_radius": region.region_radius,
        }
    doc["flags"] = {
        k: v for k, v in sorted(vars(args).items()) if k not in {"func", "command"}
    }
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_test(args) -> int:
    return _run_edge_test(args, want_ci=args.ci)


def _cmd_ci(args) -> int:
    return _run_edge_test(args, want_ci=True)


def _cmd_experiment(args) -> int:
    config = _load_config(args.config)
    config = apply_overrides(
        config,
        seed=args.seed,
        alpha=args.alpha,
        sigma_floor=args.sigma_floor,
        oracle=True if args.oracle else None,
        timing=True if args.timing else None,
    )
    result = run_experiment(config, threads=args.threads)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(metrics_to_csv(result.rows))
    if args.records:
        with open(args.records, "w", encoding="utf-8", newline="\n") as fh:
            for r in result.records:
                fh.write(
                    json.dumps(
                        {
                            "T": r.T,
                            "rep": r.rep,
                            "method": r.method,
                            "row": r.i + 1,
                            "col": r.j + 1,
                            "true_beta": r.true_beta,
                            "U_hat": r.U_hat,
                            "p_value": r.p_value,
                            "reject": r.reject,
                            "b_hat": r.b_hat,
                            "ci_lo": r.ci_lo,
                            "ci_hi": r.ci_hi,
                        }
                    )
                    + "\n"
                )
    for T, rep, message in result.failures:
        sys.stderr.write(f"warning: replicate {rep} at T={T} failed and was excluded: {message}\n")
    _emit(
        {
            "command": "experiment",
            "out": args.out,
            "records": args.records,
            "rows": len(result.rows),
            "n_records": len(result.records),
            "n_failed": len(result.failures),
        },
        None,
    )
    return EXIT_OK


def _cmd_ingest(args) -> int:
    units, times = read_event_csv(args.events)
    spikes, report = bin_events(
        units, times, args.bin_width, n_steps=args.steps, n_units=args.units
    )
    write_dense_csv(args.out, spikes)
    warn = report.collision_rate > 0.01
    if warn:
        sys.stderr.write(
            f"warning: {report.n_collisions} of {report.n_events} events "
            f"({report.collision_rate:.2%}) collapsed into occupied bins; consider a "
            "finer --bin-width\n"
        )
    _emit(
        {
            "command": "ingest",
            "out": args.out,
            "T": spikes.n_steps,
            "p": spikes.p,
            "bin_width": args.bin_width,
            "n_events": report.n_events,
            "n_collisions": report.n_collisions,
            "collision_rate": report.collision_rate,
            "collision_warning": warn,
        },
        None,
    )
    return EXIT_OK


def _cmd_permute(args) -> int:
    spikes = read_dense_csv(args.spikes)
    write_dense_csv(args.out, permute_trains(spikes, seed=args.seed))
    _emit(
        {
            "command": "permute",
            "out": args.out,
            "T": spikes.n_steps,
            "p": spikes.p,
            "seed": args.seed,
        },
        None,
    )
    return EXIT_OK


def _cmd_check_assumptions(args) -> int:
    config = _load_config(args.config)
    config = apply_overrides(config, seed=args.seed)
    model = config.model()
    report = check_assumptions(model)
    if report.pass_flags["stationarity"] and args.probe_steps:
        probe, _ = simulate(
            model,
            SimConfig(
                T=args.probe_steps,
                burn_in=config.burn_in,
                seed=config.seed,
                clip_bounds=config.clip_bounds,
            ),
        )
        report = check_assumptions(model, probe=probe)
    doc = {
        "command": "check-assumptions",
        "gamma_omega": report.gamma_omega,
        "rho_r": report.rho_r,
        "rho_c": report.rho_c,
        "intensity_bounds": list(report.intensity_bounds) if report.intensity_bounds else None,
        "pass_flags": report.pass_flags,
        "all_passed": report.all_passed,
    }
    _emit(doc, args.out)
    if not report.pass_flags["stationarity"]:
        raise AssumptionViolation(
            "stationarity assumption violated: gamma_omega = "
            f"{report.gamma_omega:.4g} >= 1"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_test_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--spikes", required=True, help="dense spike CSV to test")
    sp.add_argument("--row", type=int, required=True, help="target unit i (1-based)")
    sp.add_argument(
        "--col", required=True, help="source unit j, or comma list for a joint set test (1-based)"
    )
    sp.add_argument("--alpha", type=float, default=0.05, help="test level (default 0.05)")
    sp.add_argument("--sigma-floor", type=float, default=1e-4, dest="sigma_floor")
    sp.add_argument("--decay", type=float, default=1.0, help="kernel decay rate (default 1.0)")
    sp.add_argument("--cv-folds", type=int, default=5, dest="cv_folds")
    sp.add_argument(
        "--cv-min-train-frac", type=float, default=0.5, dest="cv_min_train_frac"
    )
    sp.add_argument(
        "--sigma-without-intercept",
        action="store_true",
        dest="sigma_without_intercept",
        help="drop the fitted intercept from the variance profile (sensitivity check)",
    )
    sp.add_argument("--oracle", action="store_true", help="use the known-graph comparator")
    sp.add_argument("--truth", help="interaction-matrix CSV (required with --oracle)")
    sp.add_argument("--out", help="write the JSON result here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hawkesnet",
        description="Edge inference for discrete-time binary Hawkes networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="draw a spike matrix from a config's model")
    sp.add_argument("--config", required=True, help="experiment config JSON")
    sp.add_argument("--T", type=int, help="override the window length (default: first T_list entry)")
    sp.add_argument("--seed", type=int, help="override the config seed")
    sp.add_argument("--out", required=True, help="dense spike CSV to write")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("test", help="de-correlated score test for one edge or edge set")
    _add_test_args(sp)
    sp.add_argument("--ci", action="store_true", help="also compute the one-step interval")
    sp.set_defaults(func=_cmd_test)

    sp = sub.add_parser("ci", help="edge test plus one-step confidence interval")
    _add_test_args(sp)
    sp.set_defaults(func=_cmd_ci, ci=True)

    sp = sub.add_parser("experiment", help="run a Monte-Carlo grid and write metrics CSV")
    sp.add_argument("--config", required=True, help="experiment config JSON")
    sp.add_argument("--out", required=True, help="metrics CSV to write")
    sp.add_argument("--records", help="also dump per-edge records as JSON lines")
    sp.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    sp.add_argument("--seed", type=int, help="override the config seed")
    sp.add_argument("--alpha", type=float, help="override the config alpha")
    sp.add_argument("--sigma-floor", type=float, dest="sigma_floor", help="override the config floor")
    sp.add_argument("--oracle", action="store_true", help="force the oracle comparator on")
    sp.add_argument("--timing", action="store_true", help="collect wall-clock timings (breaks byte reproducibility)")
    sp.set_defaults(func=_cmd_experiment)

    sp = sub.add_parser("ingest", help="bin an event CSV (unit_id,event_time) onto the unit grid")
    sp.add_argument("--events", required=True, help="event CSV to read")
    sp.add_argument("--bin-width", type=float, required=True, dest="bin_width")
    sp.add_argument("--steps", type=int, help="number of grid steps (inferred when omitted)")
    sp.add_argument("--units", type=int, help="number of units (inferred when omitted)")
    sp.add_argument("--out", required=True, help="dense spike CSV to write")
    sp.set_defaults(func=_cmd_ingest)

    sp = sub.add_parser("permute", help="independently permute each unit's train in time")
    sp.add_argument("--spikes", required=True, help="dense spike CSV to permute")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="dense spike CSV to write")
    sp.set_defaults(func=_cmd_permute)

    sp = sub.add_parser("check-assumptions", help="regularity diagnostics for a config's model")
    sp.add_argument("--config", required=True, help="experiment config JSON")
    sp.add_argument(
        "--probe-steps",
        type=int,
        dest="probe_steps",
        help="also check intensity bounds on a probe simulation of this length",
    )
    sp.add_argument("--seed", type=int, help="override the config seed")
    sp.add_argument("--out", help="write the JSON report here instead of stdout")
    sp.set_defaults(func=_cmd_check_assumptions)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AssumptionViolation as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ASSUMPTION
    except (SingularUpsilon, DegenerateDesign, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
