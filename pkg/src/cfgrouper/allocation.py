"""Closed-form downlink rates and bandwidth allocation across groups.

Rates use the conjugate-beamforming closed form driven by large-scale
fading and MMSE estimate variances only. A group of size n spends n of the
T_c coherence samples on pilots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .config import SimConfig


class Infeasible(ValueError):
    """The minimum-rate constraints cannot all be met by any bandwidth split."""


POWER_NORMS = ("none", "per_ap")


def _sinr(beta, nu, members, k, rho_d, exclude_self, power_norm):
    members = np.asarray(members, dtype=int)
    interferers = members[members != k] if exclude_self else members
    if power_norm == "none":
        eta = np.ones(beta.shape[0])
    elif power_norm == "per_ap":
        # every AP spends its full power, split equally over the active users
        load = nu[:, members].sum(axis=1)
        eta = np.divide(1.0, load, out=np.zeros_like(load), where=load > 0)
    else:
        raise ValueError(f"unknown power normalization {power_norm!r}")
    signal = rho_d * float(np.sum(np.sqrt(eta) * nu[:, k])) ** 2
    interference = rho_d * float(np.sum(eta[:, None] * nu[:, interferers] * beta[:, [k]]))
    return signal / (interference + 1.0)


def group_rate(beta: np.ndarray, nu: np.ndarray, members, k: int, *, rho_d: float,
               bandwidth_hz: float, coherence_length: int, exclude_self: bool = True,
               power_norm: str = "none") -> float:
    """Rate of user ``k`` (bits/s) when group ``members`` is active.

    ``exclude_self=True`` drops the user's own term from the interference
    sum; ``False`` keeps it, which is the all-users-active form.

    With ``power_norm="none"`` every AP precodes with unit coefficients,
    so the SINR is rho_d (sum_m nu_mk)^2 / (rho_d sum_m sum_k' nu_mk' beta_mk + 1).
    ``"per_ap"`` scales AP m by eta_m = 1 / sum_{k' active} nu_mk', so each
    AP radiates exactly rho_d; the numerator becomes
    rho_d (sum_m sqrt(eta_m) nu_mk)^2 and interference terms pick up eta_m.
    """
    members = np.asarray(members, dtype=int)
    if k not in members:
        raise ValueError(f"user {k} is not a member of the group")
    n = members.size
    if n > coherence_length:
        raise ValueError(f"group of {n} users exceeds the coherence length {coherence_length}")
    sinr = _sinr(np.asarray(beta, float), np.asarray(nu, float), members, k, rho_d,
                 exclude_self, power_norm)
    return bandwidth_hz * (coherence_length - n) / coherence_length * np.log1p(sinr) / np.log(2.0)


@dataclass
class RateTable:
    """``group_rates[c, k]`` is user k's rate inside group c (0 if not a member)."""

    group_rates: np.ndarray  # (C, K)
    conventional_rates: np.ndarray | None = None  # (K,)
    exclude_self: bool = True

    def group_sums(self) -> np.ndarray:
        return self.group_rates.sum(axis=1)


def rate_table(beta: np.ndarray, nu: np.ndarray, groups, cfg: SimConfig, *,
               exclude_self: bool = True) -> RateTable:
    """Per-group rates for a grouping given as a list of member arrays."""
    K = beta.shape[1]
    R = np.zeros((len(groups), K))
    for c, members in enumerate(groups):
        for k in members:
            R[c, k] = group_rate(beta, nu, members, int(k), rho_d=cfg.rho_d,
                                 bandwidth_hz=cfg.bandwidth_hz,
                                 coherence_length=cfg.coherence_length,
                                 exclude_self=exclude_self, power_norm=cfg.power_norm)
    return RateTable(R, exclude_self=exclude_self)


def conventional_cf_rates(beta: np.ndarray, nu: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """All K users active at once on the full band with K orthogonal pilots."""
    K = beta.shape[1]
    members = np.arange(K)
    return np.array([group_rate(beta, nu, members, k, rho_d=cfg.rho_d,
                                bandwidth_hz=cfg.bandwidth_hz,
                                coherence_length=cfg.coherence_length, exclude_self=False,
                                power_norm=cfg.power_norm)
                     for k in range(K)])


@dataclass
class AllocationResult:
    gamma: np.ndarray
    per_user_rate: np.ndarray
    objective: float
    status: str = "optimal"


def solve_bandwidth_lp(rates, min_rates=None, *, tie_eps: float = 1e-11) -> AllocationResult:
    """Bandwidth fractions maximizing the total rate under per-user minima.

    maximize    sum_c gamma_c sum_k R[c, k]
    subject to  sum_c gamma_c R[c, k] >= min_rates[k]  for all k
                sum_c gamma_c <= 1,  0 <= gamma_c <= 1

    ``rates`` is a (C, K) array or a :class:`RateTable`. Among equally good
    splits the one favouring lower group indices is returned; this is done
    with a perturbation of relative size ``tie_eps`` on the objective.
    Raises :class:`Infeasible` when no split meets the minima.
    """
    R = rates.group_rates if isinstance(rates, RateTable) else np.asarray(rates, dtype=float)
    if R.ndim != 2:
        raise ValueError("rates must be a (C, K) array")
    if np.any(R < 0) or not np.all(np.isfinite(R)):
        raise ValueError("rates must be non-negative and finite")
    C, K = R.shape
    rbar = np.zeros(K) if min_rates is None else np.broadcast_to(
        np.asarray(min_rates, dtype=float), (K,))

    sums = R.sum(axis=1)
    scale = float(np.max(sums)) if np.max(sums, initial=0.0) > 0 else 1.0
    # work in units of the best group sum so HiGHS tolerances are relative
    obj = -(sums / scale + tie_eps * 0.5 ** np.arange(C))
    A_ub = np.vstack([-R.T / scale, np.ones((1, C))])
    b_ub = np.concatenate([-rbar / scale, [1.0]])
    res = linprog(obj, A_ub=A_ub, b_ub=b_ub, bounds=[(0.0, 1.0)] * C, method="highs")
    if res.status == 2:
        raise Infeasible("minimum rates cannot be met; the grouping must change")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")

    gamma = np.clip(res.x, 0.0, 1.0) + 0.0  # + 0.0 folds -0.0 into 0.0
    per_user = gamma @ R
    # HiGHS feasibility tolerance is ~1e-7 relative; report genuine violations only
    if np.any(per_user < rbar - 1e-6 * max(1.0, scale)):
        raise Infeasible("minimum rates cannot be met; the grouping must change")
    return AllocationResult(gamma=gamma, per_user_rate=per_user,
                            objective=float(gamma @ sums))
