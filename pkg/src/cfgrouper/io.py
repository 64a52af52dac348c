"""CSV/JSON readers and writers for instances, results and plot scripts.

Floats are written with ``repr`` so files round-trip exactly and identical
runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import SimConfig
from .grouping import Grouping

__version__ = "0.1.0"


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty file")
    return rows[0], rows[1:]


def _require(header, expected, path):
    if [h.strip() for h in header] != list(expected):
        raise ValueError(f"{path}: expected columns {','.join(expected)}, got {','.join(header)}")


# --- matrices -------------------------------------------------------------

def write_matrix(path, A: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(A):
            w.writerow([_fmt(float(v)) for v in row])


def read_weight_matrix(path) -> np.ndarray:
    """K x K weight matrix, one row per line, no header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    try:
        W = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.size == 0:
        raise ValueError(f"{path}: weight matrix must be square")
    if not np.allclose(W, W.T, rtol=1e-12, atol=0.0):
        raise ValueError(f"{path}: weight matrix must be symmetric")
    if np.any(W < 0) or not np.all(np.isfinite(W)):
        raise ValueError(f"{path}: weights must be finite and non-negative")
    W = W.copy()
    np.fill_diagonal(W, 0.0)
    return W


def write_edge_list(path, W: np.ndarray) -> None:
    K = W.shape[0]
    write_rows(path, ["k", "j", "w"],
               ((k, j, float(W[k, j])) for k in range(K) for j in range(k + 1, K)))


def read_edge_list(path, num_users: int | None = None) -> np.ndarray:
    header, rows = read_rows(path)
    _require(header, ["k", "j", "w"], path)
    trip = [(int(k), int(j), float(w)) for k, j, w in rows]
    K = num_users if num_users is not None else 1 + max(max(k, j) for k, j, _ in trip)
    W = np.zeros((K, K))
    for k, j, w in trip:
        W[k, j] = W[j, k] = w
    return W


# --- groupings and allocations --------------------------------------------

def write_assignment(path, g: Grouping, trial: int | None = None) -> None:
    rows = [(k, c) for c in range(g.num_groups) for k in g.members(c)]
    rows.sort()
    if trial is None:
        write_rows(path, ["k", "c"], rows)
    else:
        write_rows(path, ["trial", "k", "c"], ((trial, k, c) for k, c in rows))


def read_assignment(path, num_users: int, num_groups: int) -> Grouping:
    header, rows = read_rows(path)
    _require(header, ["k", "c"], path)
    x = np.zeros((num_users, num_groups), dtype=np.int8)
    for k, c in rows:
        x[int(k), int(c)] = 1
    return Grouping(x)


def write_rates(path, R: np.ndarray) -> None:
    """Group rate table as (c, k, rate_bits_s) for members only."""
    write_rows(path, ["c", "k", "rate_bits_s"],
               ((c, k, float(R[c, k])) for c in range(R.shape[0]) for k in range(R.shape[1])
                if R[c, k] > 0))


def read_rates(path, num_groups: int | None = None, num_users: int | None = None) -> np.ndarray:
    header, rows = read_rows(path)
    _require(header, ["c", "k", "rate_bits_s"], path)
    trip = [(int(c), int(k), float(r)) for c, k, r in rows]
    if any(r < 0 or not np.isfinite(r) for _, _, r in trip):
        raise ValueError(f"{path}: rates must be finite and non-negative")
    C = num_groups if num_groups is not None else 1 + max(c for c, _, _ in trip)
    K = num_users if num_users is not None else 1 + max(k for _, k, _ in trip)
    R = np.zeros((C, K))
    for c, k, r in trip:
        R[c, k] = r
    return R


def write_gamma(path, gamma) -> None:
    write_rows(path, ["c", "gamma"], enumerate(np.asarray(gamma, float)))


# --- geometry --------------------------------------------------------------

def write_topology(out_dir, topo, beta, prefix: str = "") -> None:
    out_dir = Path(out_dir)
    write_rows(out_dir / f"{prefix}aps.csv", ["ap_x", "ap_y"], topo.ap_positions)
    write_rows(out_dir / f"{prefix}users.csv", ["user_x", "user_y"], topo.user_positions)
    write_matrix(out_dir / f"{prefix}beta.csv", beta)


# --- experiment outputs ----------------------------------------------------

def write_fp(path, report) -> None:
    write_rows(path, ["k", "j", "theta", "empirical", "bound", "normalized_corr"], report.rows())


def write_cdf(path, sweep) -> None:
    write_rows(path, ["scheme", "M", "value", "cdf"], sweep.cdf_rows())


THROUGHPUT_COLUMNS = ["scheme", "M", "K", "mean_bits_s", "ci95_bits_s", "trials", "failed",
                      "mean_sum_bits_s", "ci95_sum_bits_s"]


def write_throughput(path, sweep) -> None:
    write_rows(path, THROUGHPUT_COLUMNS,
               ((p.scheme, p.M, p.K, p.mean_bits_s, p.ci95_bits_s, p.trials, p.failed,
                 p.mean_sum_bits_s, p.ci95_sum_bits_s) for p in sweep.throughput))


def write_metadata(path, cfg: SimConfig, **extra) -> None:
    meta = {
        "code_version": __version__,
        "seed": cfg.rng_seed,
        "config": cfg.to_dict(),
        "rho_p": cfg.rho_p,
        "rho_d": cfg.rho_d,
        "rate_model": {"sg_exclude_self": True, "conventional_exclude_self": False,
                       "power_norm": cfg.power_norm},
    }
    meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path) -> SimConfig:
    """Read a JSON config; raises FileNotFoundError, json.JSONDecodeError or ConfigError."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise json.JSONDecodeError("top level must be an object", "", 0)
    if "config" in data and "code_version" in data:
        data = data["config"]  # metadata.json from an earlier run
    return SimConfig.from_dict(data)


CDF_GNUPLOT = """\
# normalized large-scale fading correlation CDFs
set datafile separator ','
set key bottom right
set xlabel 'normalized correlation'
set ylabel 'CDF'
set terminal pngcairo size 800,600
set output 'cdf.png'
plot {plots}
"""

THROUGHPUT_GNUPLOT = """\
# mean per-user downlink throughput against the number of APs
set datafile separator ','
set key top left
set xlabel 'number of APs M'
set ylabel 'throughput (Mbit/s)'
set terminal pngcairo size 800,600
set output 'throughput.png'
plot {plots}
"""


def write_cdf_plot(path, sweep) -> None:
    plots = [f"'cdf.csv' using (strcol(1) eq '{s}' && $2 == {M} ? $3 : 1/0):4 "
             f"with steps title '{s} M={M}'" for s, M in sorted(sweep.cdf_values)]
    Path(path).write_text(CDF_GNUPLOT.format(plots=", \\\n     ".join(plots)))


def write_throughput_plot(path, sweep) -> None:
    keys = sorted({(p.scheme, p.K) for p in sweep.throughput})
    plots = [f"'throughput.csv' using ($3 == {K} && strcol(1) eq '{s}' ? $2 : 1/0):($4/1e6):($5/1e6) "
             f"with yerrorlines title '{s} K={K}'" for s, K in keys]
    Path(path).write_text(THROUGHPUT_GNUPLOT.format(plots=", \\\n     ".join(plots)))
