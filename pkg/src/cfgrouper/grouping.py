"""Spatial user grouping on the large-scale correlation graph.

Users are vertices, edge weights are the inner products of their
large-scale fading vectors. A grouping is a binary K x C membership
matrix; the objective counts, for every group, the weight between members
and non-members, so maximizing it splits strongly correlated users
across groups. Each user may join at most ``alpha`` groups and each group
holds at most ``tau`` users (one orthogonal pilot per member).
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .sdp import SdpBlock, SolverNotConverged, solve_block_sdp

log = logging.getLogger(__name__)

__all__ = [
    "Grouping", "SdrSolution", "InstanceTooLarge", "SolverNotConverged",
    "build_weight_graph", "objective_binary", "spin_objective", "to_spin", "from_spin",
    "solve_sdr", "gaussian_round", "repair_feasibility", "greedy_grouping",
    "brute_force_optimum",
]


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Grouping:
    x: np.ndarray  # (K, C) in {0, 1}

    def __post_init__(self):
        x = np.asarray(self.x)
        if x.ndim != 2:
            raise ValueError("grouping matrix must be K x C")
        object.__setattr__(self, "x", (x != 0).astype(np.int8))

    @property
    def num_users(self) -> int:
        return self.x.shape[0]

    @property
    def num_groups(self) -> int:
        return self.x.shape[1]

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.x[:, c])

    def groups(self) -> list[np.ndarray]:
        return [self.members(c) for c in range(self.num_groups)]

    def memberships(self) -> np.ndarray:
        return self.x.sum(axis=1)

    def sizes(self) -> np.ndarray:
        return self.x.sum(axis=0)

    def unscheduled(self) -> np.ndarray:
        return np.flatnonzero(self.memberships() == 0)

    def is_feasible(self, alpha: int, tau: int) -> bool:
        return bool(np.all(self.memberships() <= alpha) and np.all(self.sizes() <= tau))

    def pairs(self) -> list[tuple[int, int, int]]:
        """Intra-group user pairs as (c, k, j) with k < j."""
        return [(c, int(k), int(j)) for c, mem in enumerate(self.groups())
                for k, j in itertools.combinations(mem, 2)]


def _as_x(x) -> np.ndarray:
    return x.x if isinstance(x, Grouping) else np.asarray(x)


def build_weight_graph(beta: np.ndarray) -> np.ndarray:
    """K x K matrix of sum_m beta_mk beta_mj with a zero diagonal."""
    beta = np.asarray(beta, dtype=float)
    W = beta.T @ beta
    W = (W + W.T) / 2.0
    np.fill_diagonal(W, 0.0)
    return W


def objective_binary(x, W: np.ndarray) -> float:
    """Inter-group weight sum_c sum_k sum_{j != k} w_kj (1 - x_kc) x_jc.

    Works on any K x C 0/1 matrix, feasible or not.
    """
    X = _as_x(x).astype(float)
    W = np.asarray(W, dtype=float)
    inside = W @ X  # inside[k, c] = sum_j w_kj x_jc
    return float(np.sum((1.0 - X) * inside))


def spin_objective(y, W: np.ndarray) -> float:
    """(1/4) sum_c (1'W1 - y_c' W y_c) for spin vectors stacked as columns of ``y``."""
    Y = np.asarray(y, dtype=float)
    W = np.asarray(W, dtype=float)
    # same quantity as sum_kj w_kj (1 - y_k y_j); avoids cancelling 1'W1
    # against y'Wy when the value is (near) zero
    return 0.25 * float(sum(np.sum(W * (1.0 - np.outer(Y[:, c], Y[:, c])))
                            for c in range(Y.shape[1])))


def to_spin(x) -> np.ndarray:
    """Map a 0/1 grouping to spins 2x - 1 (columns are groups)."""
    return 2 * _as_x(x).astype(np.int8) - 1


def from_spin(y) -> Grouping:
    y = np.asarray(y)
    if not np.all(np.isin(y, (-1, 1))):
        raise ValueError("spin vectors must have entries in {-1, 1}")
    return Grouping((y + 1) // 2)


@dataclass
class SdrSolution:
    """Relaxed solution: per group a K x K matrix ``Y[c]`` and vector ``y[c]``."""

    Y: list[np.ndarray]
    y: list[np.ndarray]
    objective_value: float
    solver_stats: dict = field(default_factory=dict)

    def lifted(self, c: int) -> np.ndarray:
        K = self.y[c].size
        Z = np.empty((K + 1, K + 1))
        Z[:K, :K] = self.Y[c]
        Z[:K, K] = Z[K, :K] = self.y[c]
        Z[K, K] = 1.0
        return Z


def _sdr_problem(Wn: np.ndarray, C: int, alpha: int, tau: int):
    K = Wn.shape[0]
    n = K + 1
    alpha_bar = 2 * alpha - C
    tau_bar = 2 * tau - K
    n_diag = C * n
    m = n_diag + K + C
    b = np.concatenate([np.ones(n_diag), np.full(K, float(alpha_bar)), np.full(C, float(tau_bar))])

    cost = np.zeros((n, n))
    cost[:K, :K] = Wn
    blocks = []
    for c in range(C):
        mats = np.zeros((2 * K + 2, n, n))
        rows = np.empty(2 * K + 2, dtype=int)
        for p in range(n):
            mats[p, p, p] = 1.0
            rows[p] = c * n + p
        for k in range(K):
            mats[n + k, k, K] = mats[n + k, K, k] = 0.5
            rows[n + k] = n_diag + k
        mats[n + K, :K, K] = mats[n + K, K, :K] = 0.5
        rows[n + K] = n_diag + K + c
        blocks.append(SdpBlock(cost=cost.copy(), rows=rows, mats=mats))

    # slacks: one per membership row, one per group-size row
    a_lin = np.zeros((m, K + C))
    a_lin[n_diag:, :] = np.eye(K + C)
    c_lin = np.zeros(K + C)
    return blocks, b, c_lin, a_lin


def sdr_violations(sol: SdrSolution, C: int, alpha: int, tau: int) -> dict:
    """Worst-case violation of each relaxed constraint (0 when satisfied)."""
    K = sol.y[0].size
    diag = max(float(np.max(np.abs(np.diag(Yc) - 1.0))) for Yc in sol.Y)
    psd = max(max(0.0, -float(np.linalg.eigvalsh(sol.lifted(c))[0])) for c in range(C))
    memb = max(0.0, float(np.max(np.sum(sol.y, axis=0) - (2 * alpha - C))))
    size = max(0.0, max(float(np.sum(yc)) - (2 * tau - K) for yc in sol.y))
    return {"diag": diag, "psd": psd, "membership": memb, "size": size}


def solve_sdr(W: np.ndarray, C: int, alpha: int, tau: int, *, max_iter: int = 200) -> SdrSolution:
    """Semidefinite relaxation of the grouping problem in spin variables.

    Maximizes (1/4) sum_c (1'W1 - Tr(W Y_c)) over lifted blocks
    [[Y_c, y_c], [y_c', 1]] PSD with unit diagonal, sum_c y_c <= 2 alpha - C
    and 1'y_c <= 2 tau - K. W is scaled by 1/max(W) inside the solver and
    the objective is reported in the original scale.
    """
    W = np.asarray(W, dtype=float)
    K = W.shape[0]
    if K < 1 or W.shape != (K, K):
        raise ValueError("W must be a non-empty square matrix")
    if C < 1 or alpha < 0 or tau < 0:
        raise ValueError("need C >= 1 and non-negative alpha, tau")
    scale = float(np.max(W))
    if scale <= 0:
        scale = 1.0
    Wn = W / scale

    blocks, b, c_lin, a_lin = _sdr_problem(Wn, C, alpha, tau)
    res = solve_block_sdp(blocks, b, c_lin, a_lin, max_iter=max_iter)

    Y = [Z[:K, :K].copy() for Z in res.X]
    y = [Z[:K, K].copy() for Z in res.X]
    varsigma = float(np.sum(Wn))
    obj_n = 0.25 * (C * varsigma - res.primal_obj)
    sol = SdrSolution(Y=Y, y=y, objective_value=scale * obj_n)
    sol.solver_stats = {
        "iterations": res.iterations,
        "duality_gap": res.rel_gap,
        "primal_obj": res.primal_obj,
        "dual_obj": res.dual_obj,
        "primal_infeas": res.primal_infeas,
        "dual_infeas": res.dual_infeas,
        "scale": scale,
        "dual_bound": scale * 0.25 * (C * varsigma - res.dual_obj),
        "violations": sdr_violations(sol, C, alpha, tau),
    }
    return sol


def _normalize_direction(xi: np.ndarray, mode: str) -> np.ndarray:
    if mode == "sum_normalized":
        total = float(np.sum(xi))
        if total != 0.0:
            xi = xi / total
    elif mode != "clamp_only":
        raise ValueError(f"unknown rounding normalization {mode!r}")
    return np.clip(xi, -1.0, 1.0)


def _gaussian_draw(Y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    lam, V = np.linalg.eigh((Y + Y.T) / 2.0)
    return V @ (np.sqrt(np.clip(lam, 0.0, None)) * rng.standard_normal(lam.size))


def gaussian_round(sol: SdrSolution, W: np.ndarray, C: int, alpha: int, tau: int,
                   num_samples: int, rng: np.random.Generator, *,
                   norm: str = "clamp_only") -> Grouping:
    """Randomized rounding of a relaxed solution to a feasible grouping.

    For each group one Gaussian direction xi_c ~ N(0, Y_c) is drawn and
    clipped to [-1, 1]. With ``norm="sum_normalized"`` it is first divided by the sum
    of its entries; when that sum is near zero (balanced cuts) every entry
    saturates and all candidates coincide, which is why it is not the
    default. ``num_samples`` spin candidates are
    drawn entrywise with P(+1) = (1 + xi)/2, repaired to feasibility and the
    best one by the grouping objective is returned (ties go to the earliest
    sample).
    """
    W = np.asarray(W, dtype=float)
    K = W.shape[0]
    xi = np.column_stack([_normalize_direction(_gaussian_draw(sol.Y[c], rng), norm)
                          for c in range(C)])
    p_plus = (1.0 + xi) / 2.0
    u = rng.random((num_samples, K, C))
    cand = u < p_plus  # True <-> spin +1 <-> member

    best, best_val = None, -np.inf
    for l in range(num_samples):
        g = repair_feasibility(cand[l], W, alpha, tau)
        val = objective_binary(g, W)
        if val > best_val:
            best, best_val = g, val
    if best is None:
        best = Grouping(np.zeros((K, C), dtype=np.int8))
    return best


def repair_feasibility(candidate, W: np.ndarray, alpha: int, tau: int) -> Grouping:
    """Drop memberships until every constraint holds.

    A user over its membership limit leaves the group whose loss raises the
    objective most (lowest group on ties); a group over capacity evicts the
    member with the largest weight to the rest of the group (lowest user on
    ties). Accepts 0/1 or +-1 matrices.
    """
    arr = _as_x(candidate)
    x = (arr > 0).astype(bool).copy()
    W = np.asarray(W, dtype=float)
    K, C = x.shape

    while True:
        over = np.flatnonzero(x.sum(axis=1) > alpha)
        if over.size == 0:
            break
        u = over[0]
        best_c, best_delta = -1, -np.inf
        for c in np.flatnonzero(x[u]):
            inside = x[:, c].copy()
            inside[u] = False
            delta = W[u, inside].sum() - W[u, ~x[:, c]].sum()
            if delta > best_delta:
                best_c, best_delta = c, delta
        x[u, best_c] = False

    while True:
        over = np.flatnonzero(x.sum(axis=0) > tau)
        if over.size == 0:
            break
        c = over[0]
        mem = np.flatnonzero(x[:, c])
        intra = W[np.ix_(mem, mem)].sum(axis=1)
        x[mem[int(np.argmax(intra))], c] = False

    return Grouping(x)


def greedy_grouping(W: np.ndarray, C: int, alpha: int, tau: int) -> Grouping:
    """Baseline: heaviest users first, each into the least-correlated open group.

    A user takes up to ``alpha`` memberships, each time choosing the non-full
    group with the smallest added intra-group weight, and only while the
    move strictly increases the objective.
    """
    W = np.asarray(W, dtype=float)
    K = W.shape[0]
    x = np.zeros((K, C), dtype=bool)
    order = np.argsort(-W.sum(axis=1), kind="stable")
    for u in order:
        for _ in range(alpha):
            open_ = [c for c in range(C) if not x[u, c] and x[:, c].sum() < tau]
            if not open_:
                break
            added = [W[u, x[:, c]].sum() for c in open_]
            c = open_[int(np.argmin(added))]
            outside = ~x[:, c]
            outside[u] = False
            gain = W[u, outside].sum() - added[int(np.argmin(added))]
            if gain <= 0:
                break
            x[u, c] = True
    return Grouping(x)


def _membership_options(C: int, alpha: int) -> np.ndarray:
    opts = [np.zeros(C, dtype=np.int8)]
    for r in range(1, min(alpha, C) + 1):
        for combo in itertools.combinations(range(C), r):
            row = np.zeros(C, dtype=np.int8)
            row[list(combo)] = 1
            opts.append(row)
    return np.array(opts)


def brute_force_optimum(W: np.ndarray, C: int, alpha: int = 1, tau: int | None = None, *,
                        limit: int = 10**7, chunk: int = 1 << 16) -> tuple[Grouping, float]:
    """Exhaustive maximum of the grouping objective.

    Each user picks one of its allowed membership sets (for ``alpha = 1``:
    none or one of the C groups), giving (C+1)^K candidates in that case.
    The first maximizer in enumeration order is returned.
    """
    W = np.asarray(W, dtype=float)
    K = W.shape[0]
    tau = K if tau is None else tau
    opts = _membership_options(C, alpha)
    n_opt = len(opts)
    total = n_opt**K
    if total > limit:
        raise InstanceTooLarge(f"{total} assignments exceed the limit of {limit}")

    d = W.sum(axis=1)
    powers = n_opt ** np.arange(K - 1, -1, -1)
    best_val, best_idx = -np.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = (idx[:, None] // powers[None, :]) % n_opt
        X = opts[digits].astype(float)  # (N, K, C)
        inside = np.einsum("kj,njc->nkc", W, X)
        val = np.einsum("nkc,k->n", X, d) - np.einsum("nkc,nkc->n", X, inside)
        feasible = np.all(X.sum(axis=1) <= tau, axis=1)
        val = np.where(feasible, val, -np.inf)
        i = int(np.argmax(val))
        if val[i] > best_val:
            best_val, best_idx = float(val[i]), int(idx[i])

    digits = (best_idx // powers) % n_opt
    return Grouping(opts[digits]), best_val
