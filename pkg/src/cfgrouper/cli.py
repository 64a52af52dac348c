"""Command-line entry point.

Subcommands: ``simulate``, ``group``, ``allocate``, ``cdf`` and ``sweep``.
Every run validates its configuration before doing any work, stages its
files inside the output directory and only moves them into place once the
whole command succeeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .allocation import Infeasible, solve_bandwidth_lp
from .channel import fp_report
from .config import ConfigError, SimConfig, stage_rng
from .experiments import (CONVENTIONAL, SG, SweepResult, ThroughputPoint,
                          correlation_cdf_experiment, default_jobs, mean_ci, run_trial,
                          run_trials, throughput_sweep_experiment)
from .grouping import (InstanceTooLarge, brute_force_optimum, gaussian_round, greedy_grouping,
                       objective_binary, solve_sdr)
from .sdp import SolverNotConverged

log = logging.getLogger("cfgrouper")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_BAD_JSON = 4
EXIT_INVALID = 5
EXIT_SOLVER = 6
EXIT_INFEASIBLE = 7
EXIT_BAD_INPUT = 8

COMMANDS = ("simulate", "group", "allocate", "cdf", "sweep")


@dataclass
class CliInvocation:
    subcommand: str
    config_path: Path | None
    seed: int | None
    out_dir: Path
    verbosity: int
    jobs: int
    args: argparse.Namespace


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("values must be positive integers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="JSON file with SimConfig keys")
    common.add_argument("--seed", type=int, help="override rng_seed")
    common.add_argument("--trials", type=int, help="override num_trials")
    common.add_argument("-o", "--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("-j", "--jobs", type=int,
                        help="worker processes (default: $CF_GROUPER_JOBS or CPU count)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="cfgrouper",
                                description="Cell-free massive MIMO user grouping toolkit.")
    sub = p.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    sub.required = True

    sub.add_parser("simulate", parents=[common],
                   help="run num_trials trials at the configured M and K")

    g = sub.add_parser("group", parents=[common], help="group users of a K x K weight matrix")
    g.add_argument("weights", type=Path, help="CSV weight matrix, one row per line")
    g.add_argument("--method", choices=("sdr", "greedy", "brute"), default="sdr")
    g.add_argument("--groups", type=int, help="override num_groups")
    g.add_argument("--alpha", type=int, help="override max_memberships")
    g.add_argument("--tau", type=int, help="override pilot_budget")

    a = sub.add_parser("allocate", parents=[common], help="bandwidth LP on a rate table")
    a.add_argument("rates", type=Path, help="CSV with columns c,k,rate_bits_s")

    cd = sub.add_parser("cdf", parents=[common], help="correlation CDFs against M")
    cd.add_argument("--M", dest="M_list", type=_int_list, default=[100, 200])

    sw = sub.add_parser("sweep", parents=[common], help="throughput against M for several K")
    sw.add_argument("--M", dest="M_list", type=_int_list, default=[50, 100, 150, 200])
    sw.add_argument("--K", dest="K_list", type=_int_list, default=[10, 20])
    return p


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def parse_and_validate(argv) -> tuple[CliInvocation, SimConfig]:
    """Parse arguments and build the validated configuration.

    Raises :class:`_CliError` with the matching exit code on failure.
    """
    args = build_parser().parse_args(argv)
    data: dict = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise _CliError(EXIT_MISSING_FILE, f"config file not found: {args.config}")
        except json.JSONDecodeError as exc:
            raise _CliError(EXIT_BAD_JSON, f"malformed JSON in {args.config}: {exc}")
        if not isinstance(data, dict):
            raise _CliError(EXIT_BAD_JSON, f"{args.config}: top level must be an object")
        if "config" in data and "code_version" in data:
            data = data["config"]
    overrides = {"rng_seed": args.seed, "num_trials": args.trials}
    if args.command == "group":
        overrides.update(num_groups=args.groups, max_memberships=args.alpha,
                         pilot_budget=args.tau)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = SimConfig.from_dict(data)
    except ConfigError as exc:
        raise _CliError(EXIT_INVALID, f"invalid configuration: {exc}")
    except TypeError as exc:
        raise _CliError(EXIT_INVALID, f"invalid configuration: {exc}")

    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise _CliError(EXIT_INVALID, "invalid configuration: jobs: must be >= 1")
    verbosity = -1 if args.quiet else args.verbose
    inv = CliInvocation(args.command, args.config, args.seed, args.out, verbosity, jobs, args)
    return inv, cfg


def _log_powers(cfg: SimConfig) -> None:
    log.info("pilot power %.6g mW -> rho_p = %.6g", cfg.power_pilot_mw, cfg.rho_p)
    log.info("downlink power %.6g mW -> rho_d = %.6g", cfg.power_downlink_mw, cfg.rho_d)


# --- subcommands -----------------------------------------------------------

def _cmd_simulate(cfg: SimConfig, inv: CliInvocation, stage: Path) -> None:
    results, failed = run_trials(cfg, jobs=inv.jobs)
    io.write_rows(stage / "trials.csv", ["trial", "scheme", "k", "throughput_bits_s"],
                  ((r.trial_id, r.scheme, k, float(v)) for pair in results for r in pair
                   for k, v in enumerate(r.throughput)))
    io.write_rows(stage / "assignments.csv", ["trial", "k", "c"],
                  ((sg.trial_id, k, c) for sg, _ in results
                   for k, c in sorted((int(k), c) for c in range(cfg.num_groups)
                                      for k in sg.grouping.members(c))))
    io.write_rows(stage / "gamma.csv", ["trial", "c", "gamma"],
                  ((sg.trial_id, c, float(gm)) for sg, _ in results
                   for c, gm in enumerate(sg.allocation.gamma)))
    io.write_rows(stage / "unscheduled.csv", ["trial", "k"],
                  ((sg.trial_id, int(k)) for sg, _ in results for k in sg.grouping.unscheduled()))

    sweep = SweepResult()
    M, K = cfg.num_aps, cfg.num_users
    for scheme, idx in ((SG, 0), (CONVENTIONAL, 1)):
        means = [p[idx].mean_throughput for p in results]
        sums = [p[idx].sum_throughput for p in results]
        m, h = mean_ci(means)
        ms, hs = mean_ci(sums)
        sweep.throughput.append(ThroughputPoint(scheme, M, K, m, h, len(results), len(failed),
                                                ms, hs))
        vals = [p[idx].correlations for p in results]
        sweep.cdf_values[(scheme, M)] = np.concatenate(vals) if vals else np.empty(0)
    io.write_throughput(stage / "throughput.csv", sweep)
    io.write_cdf(stage / "cdf.csv", sweep)

    if cfg.num_trials > 0 and results and results[0][0].trial_id == 0:
        _, _, art = run_trial(cfg, 0, return_artifacts=True)
        io.write_topology(stage, art.topology, art.beta)
        io.write_edge_list(stage / "weights.csv", art.W)
        io.write_rates(stage / "rates.csv", art.rates)
        if K > 1:
            pairs = [(k, j) for k in range(K) for j in range(k + 1, K)][:10]
            rep = fp_report(art.beta, pairs, stage_rng(cfg.rng_seed, 0, "fp"),
                            metric=cfg.fp_metric)
            io.write_fp(stage / "fp.csv", rep)
    io.write_metadata(stage / "metadata.json", cfg, command="simulate", failed_trials=failed)
    for p in sweep.throughput:
        log.info("%s: mean per-user throughput %.6g bit/s (+- %.3g), %d trials, %d failed",
                 p.scheme, p.mean_bits_s, p.ci95_bits_s, p.trials, p.failed)


def _cmd_group(cfg: SimConfig, inv: CliInvocation, stage: Path) -> None:
    try:
        W = io.read_weight_matrix(inv.args.weights)
    except FileNotFoundError:
        raise _CliError(EXIT_MISSING_FILE, f"weights file not found: {inv.args.weights}")
    except ValueError as exc:
        raise _CliError(EXIT_BAD_INPUT, str(exc))
    C, alpha, tau = cfg.num_groups, cfg.max_memberships, cfg.pilot_budget
    method = inv.args.method
    extra = {}
    if method == "sdr":
        sol = solve_sdr(W, C, alpha, tau, max_iter=cfg.sdr_max_iter)
        g = gaussian_round(sol, W, C, alpha, tau, cfg.num_rounding_samples,
                           stage_rng(cfg.rng_seed, 0, "rounding"), norm=cfg.rounding_norm)
        extra["sdr_bound"] = sol.objective_value
    elif method == "greedy":
        g = greedy_grouping(W, C, alpha, tau)
    else:
        try:
            g, _ = brute_force_optimum(W, C, alpha, tau)
        except InstanceTooLarge as exc:
            raise _CliError(EXIT_BAD_INPUT, str(exc))
    value = objective_binary(g, W)
    io.write_assignment(stage / "assignment.csv", g)
    io.write_edge_list(stage / "weights.csv", W)
    io.write_metadata(stage / "metadata.json", cfg, command="group", method=method,
                      objective=value, **extra)
    print("k,c")
    for c in range(g.num_groups):
        for k in g.members(c):
            print(f"{k},{c}")
    log.info("objective %.10g", value)


def _cmd_allocate(cfg: SimConfig, inv: CliInvocation, stage: Path) -> None:
    try:
        R = io.read_rates(inv.args.rates)
    except FileNotFoundError:
        raise _CliError(EXIT_MISSING_FILE, f"rates file not found: {inv.args.rates}")
    except (ValueError, IndexError) as exc:
        raise _CliError(EXIT_BAD_INPUT, f"{inv.args.rates}: {exc}")
    if R.shape[0] > cfg.num_groups:
        raise _CliError(EXIT_BAD_INPUT,
                        f"rate table uses {R.shape[0]} groups but num_groups is {cfg.num_groups}")
    R = np.vstack([R, np.zeros((cfg.num_groups - R.shape[0], R.shape[1]))])
    rbar = cfg.min_rate_bits_s
    if isinstance(rbar, tuple) and len(rbar) != R.shape[1]:
        raise _CliError(EXIT_INVALID, "invalid configuration: min_rate_bits_s: "
                                      f"expected {R.shape[1]} values")
    res = solve_bandwidth_lp(R, np.broadcast_to(np.asarray(rbar, float), (R.shape[1],)))
    io.write_gamma(stage / "gamma.csv", res.gamma)
    io.write_rows(stage / "user_rates.csv", ["k", "rate_bits_s"], enumerate(res.per_user_rate))
    io.write_metadata(stage / "metadata.json", cfg, command="allocate", objective=res.objective)
    print("c,gamma")
    for c, gm in enumerate(res.gamma):
        print(f"{c},{float(gm)!r}")
    log.info("objective %.10g bit/s", res.objective)


def _cmd_cdf(cfg: SimConfig, inv: CliInvocation, stage: Path) -> None:
    sweep = correlation_cdf_experiment(cfg, inv.args.M_list, jobs=inv.jobs)
    io.write_cdf(stage / "cdf.csv", sweep)
    io.write_cdf_plot(stage / "cdf.gp", sweep)
    io.write_metadata(stage / "metadata.json", cfg, command="cdf", M_list=inv.args.M_list,
                      failed_trials={f"M={M},K={K}": v for (M, K), v in sweep.failed_trials.items()})
    for (scheme, M) in sorted(sweep.cdf_values):
        if sweep.cdf_values[(scheme, M)].size:
            log.info("%s M=%d: median correlation %.4g", scheme, M, sweep.median(scheme, M))


def _cmd_sweep(cfg: SimConfig, inv: CliInvocation, stage: Path) -> None:
    try:
        sweep = throughput_sweep_experiment(cfg, inv.args.M_list, inv.args.K_list, jobs=inv.jobs)
    except ConfigError as exc:
        raise _CliError(EXIT_INVALID, f"invalid configuration: {exc}")
    io.write_throughput(stage / "throughput.csv", sweep)
    io.write_throughput_plot(stage / "throughput.gp", sweep)
    io.write_metadata(stage / "metadata.json", cfg, command="sweep", M_list=inv.args.M_list,
                      K_list=inv.args.K_list, tau_equals_k=True,
                      failed_trials={f"M={M},K={K}": v for (M, K), v in sweep.failed_trials.items()})


HANDLERS = {"simulate": _cmd_simulate, "group": _cmd_group, "allocate": _cmd_allocate,
            "cdf": _cmd_cdf, "sweep": _cmd_sweep}


def run(inv: CliInvocation, cfg: SimConfig) -> int:
    """Execute a parsed invocation; returns the process exit code."""
    out = inv.out_dir
    out.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        HANDLERS[inv.subcommand](cfg, inv, stage)
        for f in sorted(stage.iterdir()):
            os.replace(f, out / f.name)
        return EXIT_OK
    except _CliError as exc:
        log.error("%s", exc)
        return exc.code
    except SolverNotConverged as exc:
        log.error("solver did not converge: %s", exc)
        return EXIT_SOLVER
    except Infeasible as exc:
        log.error("allocation infeasible: %s", exc)
        return EXIT_INFEASIBLE
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        inv, cfg = parse_and_validate(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except _CliError as exc:
        logging.basicConfig(format="%(levelname)s: %(message)s")
        log.error("%s", exc)
        return exc.code
    level = {-1: logging.ERROR, 0: logging.WARNING, 1: logging.INFO}.get(inv.verbosity,
                                                                        logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")
    _log_powers(cfg)
    return run(inv, cfg)


if __name__ == "__main__":
    sys.exit(main())
