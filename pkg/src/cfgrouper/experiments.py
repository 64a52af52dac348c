"""Monte Carlo harness: correlation CDFs and throughput sweeps.

Every trial draws its own topology, shadowing and rounding samples from
streams derived from ``(cfg.rng_seed, trial_id, stage)``, so a sweep is a
pure function of the configuration and trials can run in any order or
process.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .allocation import (AllocationResult, Infeasible, conventional_cf_rates, rate_table,
                         solve_bandwidth_lp)
from .channel import mmse_variance, normalized_correlation_matrix
from .config import ConfigError, SimConfig, stage_rng
from .grouping import Grouping, build_weight_graph, gaussian_round, solve_sdr
from .sdp import SolverNotConverged
from .topology import Topology, build_beta_matrix, generate_topology

log = logging.getLogger(__name__)

SG = "SG+BA"
CONVENTIONAL = "conventional"


@dataclass
class TrialResult:
    trial_id: int
    scheme: str
    throughput: np.ndarray  # per user, bits/s
    correlations: np.ndarray  # normalized pair correlations, in [0, 1]
    grouping: Grouping | None = None
    allocation: AllocationResult | None = None

    @property
    def mean_throughput(self) -> float:
        return float(np.mean(self.throughput))

    @property
    def sum_throughput(self) -> float:
        return float(np.sum(self.throughput))


@dataclass
class TrialArtifacts:
    """Intermediate quantities of one trial, kept for debugging dumps."""

    topology: Topology
    beta: np.ndarray
    W: np.ndarray
    rates: np.ndarray  # (C, K) group rates
    conventional_rates: np.ndarray


def draw_network(cfg: SimConfig, trial_id: int) -> tuple[Topology, np.ndarray]:
    topo = generate_topology(cfg, stage_rng(cfg.rng_seed, trial_id, "topology"))
    beta = build_beta_matrix(topo, cfg, stage_rng(cfg.rng_seed, trial_id, "shadowing"))
    return topo, beta


def run_trial(cfg: SimConfig, trial_id: int, *, return_artifacts: bool = False):
    """One network draw evaluated under grouping and under conventional CF.

    Returns ``(sg, conventional)`` TrialResults, plus a
    :class:`TrialArtifacts` when ``return_artifacts`` is set. Raises
    :class:`SolverNotConverged` if the relaxation fails and
    :class:`Infeasible` if the minimum rates cannot be met.
    """
    topo, beta = draw_network(cfg, trial_id)
    nu = mmse_variance(beta, cfg.rho_p)
    W = build_weight_graph(beta)
    C, alpha, tau = cfg.num_groups, cfg.max_memberships, cfg.pilot_budget

    sol = solve_sdr(W, C, alpha, tau, max_iter=cfg.sdr_max_iter)
    grouping = gaussian_round(sol, W, C, alpha, tau, cfg.num_rounding_samples,
                              stage_rng(cfg.rng_seed, trial_id, "rounding"),
                              norm=cfg.rounding_norm)
    table = rate_table(beta, nu, grouping.groups(), cfg, exclude_self=True)
    alloc = solve_bandwidth_lp(table, cfg.min_rates())

    corr = normalized_correlation_matrix(beta)
    sg_corr = np.array([corr[k, j] for _, k, j in grouping.pairs()])
    iu = np.triu_indices(cfg.num_users, 1)
    conv_rates = conventional_cf_rates(beta, nu, cfg)

    sg = TrialResult(trial_id, SG, alloc.per_user_rate, sg_corr, grouping, alloc)
    conv = TrialResult(trial_id, CONVENTIONAL, conv_rates, corr[iu])
    if return_artifacts:
        return sg, conv, TrialArtifacts(topo, beta, W, table.group_rates, conv_rates)
    return sg, conv


def _trial_job(args):
    cfg_dict, trial_id = args
    cfg = SimConfig.from_dict(cfg_dict)
    try:
        return trial_id, run_trial(cfg, trial_id), None
    except (SolverNotConverged, Infeasible) as exc:
        return trial_id, None, f"{type(exc).__name__}: {exc}"


def default_jobs() -> int:
    env = os.environ.get("CF_GROUPER_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_trials(cfg: SimConfig, num_trials: int | None = None, *, jobs: int = 1):
    """Run trials 0..n-1 and return (results sorted by trial id, failed ids)."""
    n = cfg.num_trials if num_trials is None else num_trials
    work = [(cfg.to_dict(), t) for t in range(n)]
    if jobs > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_trial_job, work, chunksize=max(1, n // (4 * jobs))))
    else:
        out = [_trial_job(w) for w in work]
    out.sort(key=lambda r: r[0])
    results, failed = [], []
    for tid, res, err in out:
        if res is None:
            log.warning("trial %d failed: %s", tid, err)
            failed.append(tid)
        else:
            results.append(res)
    return results, failed


def mean_ci(values, level: float = 0.95) -> tuple[float, float]:
    """Sample mean and Student-t confidence half-width."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n == 0:
        return float("nan"), float("nan")
    if n < 2:
        return float(v[0]), float("nan")
    half = stats.t.ppf(0.5 + level / 2, n - 1) * v.std(ddof=1) / np.sqrt(n)
    return float(v.mean()), float(half)


def empirical_cdf(values) -> tuple[np.ndarray, np.ndarray]:
    v = np.sort(np.asarray(values, dtype=float))
    return v, np.arange(1, v.size + 1) / max(v.size, 1)


@dataclass
class ThroughputPoint:
    scheme: str
    M: int
    K: int
    mean_bits_s: float
    ci95_bits_s: float
    trials: int
    failed: int
    mean_sum_bits_s: float
    ci95_sum_bits_s: float


@dataclass
class SweepResult:
    throughput: list[ThroughputPoint] = field(default_factory=list)
    cdf_values: dict[tuple[str, int], np.ndarray] = field(default_factory=dict)
    failed_trials: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    trial_means: dict[tuple[str, int, int], np.ndarray] = field(default_factory=dict)

    def cdf_rows(self):
        """(scheme, M, value, cdf) rows, schemes and M in sorted order."""
        for (scheme, M) in sorted(self.cdf_values):
            v, p = empirical_cdf(self.cdf_values[(scheme, M)])
            for a, b in zip(v, p):
                yield scheme, M, float(a), float(b)

    def median(self, scheme: str, M: int) -> float:
        return float(np.median(self.cdf_values[(scheme, M)]))


def correlation_cdf_experiment(cfg: SimConfig, M_list, *, jobs: int = 1) -> SweepResult:
    """Intra-group correlations under grouping vs all-pairs under conventional CF."""
    out = SweepResult()
    for M in M_list:
        c = cfg.replace(num_aps=int(M))
        results, failed = run_trials(c, jobs=jobs)
        out.failed_trials[(int(M), c.num_users)] = failed
        for scheme, idx in ((SG, 0), (CONVENTIONAL, 1)):
            vals = [r[idx].correlations for r in results]
            out.cdf_values[(scheme, int(M))] = np.concatenate(vals) if vals else np.empty(0)
    return out


def throughput_sweep_experiment(cfg: SimConfig, M_list, K_list, *, jobs: int = 1,
                                tau_equals_k: bool = True) -> SweepResult:
    """Mean per-user throughput against M for each K, both schemes.

    With ``tau_equals_k`` the pilot budget follows K at every point. The
    per-user minimum rate must be a scalar since K varies.
    """
    if isinstance(cfg.min_rate_bits_s, tuple):
        raise ConfigError("min_rate_bits_s", "must be a scalar when sweeping K")
    out = SweepResult()
    for K in K_list:
        for M in M_list:
            changes = {"num_aps": int(M), "num_users": int(K)}
            if tau_equals_k:
                changes["pilot_budget"] = int(K)
            c = cfg.replace(**changes)
            results, failed = run_trials(c, jobs=jobs)
            out.failed_trials[(int(M), int(K))] = failed
            if 0 < len(results) < 30:
                log.warning("M=%d K=%d: only %d trials; confidence interval is rough",
                            M, K, len(results))
            for scheme, idx in ((SG, 0), (CONVENTIONAL, 1)):
                means = np.array([r[idx].mean_throughput for r in results])
                sums = np.array([r[idx].sum_throughput for r in results])
                out.trial_means[(scheme, int(M), int(K))] = means
                m, h = mean_ci(means)
                ms, hs = mean_ci(sums)
                out.throughput.append(ThroughputPoint(scheme, int(M), int(K), m, h,
                                                      len(results), len(failed), ms, hs))
    return out
