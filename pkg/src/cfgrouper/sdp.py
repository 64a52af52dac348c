"""Primal-dual interior-point solver for small block-diagonal SDPs.

Solves the standard-form pair

    minimize    sum_b <C_b, X_b> + c_lin' x
    subject to  sum_b <A_ib, X_b> + a_i' x = b_i,   i = 1..m
                X_b PSD, x >= 0

    maximize    b' y
    subject to  sum_i y_i A_ib + S_b = C_b,  A_lin' y + s = c_lin
                S_b PSD, s >= 0

with an infeasible-start Mehrotra predictor-corrector on the
Nesterov-Todd search direction. Sizes are meant to be modest (blocks up to a few dozen rows,
a few hundred constraints), so everything is dense.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)


class SolverNotConverged(RuntimeError):
    """Iteration cap reached or numerical breakdown.

    ``iterate`` holds the best point found and ``gap`` its relative gap.
    """

    def __init__(self, message: str, iterate: "SdpResult | None" = None):
        super().__init__(message)
        self.iterate = iterate
        self.gap = None if iterate is None else iterate.rel_gap


@dataclass
class SdpBlock:
    """One PSD block with the constraints that touch it.

    ``rows`` are the global constraint indices and ``mats[r]`` the
    symmetric coefficient matrix of constraint ``rows[r]`` in this block.
    """

    cost: np.ndarray
    rows: np.ndarray
    mats: np.ndarray

    @property
    def size(self) -> int:
        return self.cost.shape[0]


@dataclass
class SdpResult:
    X: list[np.ndarray]
    x_lin: np.ndarray
    y: np.ndarray
    S: list[np.ndarray]
    s_lin: np.ndarray
    primal_obj: float
    dual_obj: float
    rel_gap: float
    primal_infeas: float
    dual_infeas: float
    iterations: int
    history: list[tuple[float, float, float]] = field(default_factory=list)
    primal_resid_max: float = 0.0


def _apply_A(blocks, a_lin, X, x_lin, m):
    out = a_lin @ x_lin if a_lin.size else np.zeros(m)
    for blk, Xb in zip(blocks, X):
        out[blk.rows] += np.tensordot(blk.mats, Xb, axes=([1, 2], [0, 1]))
    return out


def _apply_At(blk, y):
    return np.tensordot(y[blk.rows], blk.mats, axes=(0, 0))


def _max_step(X, dX):
    """Largest alpha with X + alpha dX PSD (X assumed PD)."""
    L = np.linalg.cholesky(X)
    Linv_dX = sla.solve_triangular(L, dX, lower=True)
    T = sla.solve_triangular(L, Linv_dX.T, lower=True)
    lam = np.linalg.eigvalsh((T + T.T) / 2.0)[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lin(x, dx):
    neg = dx < 0
    return np.inf if not np.any(neg) else float(np.min(-x[neg] / dx[neg]))


def solve_block_sdp(blocks: list[SdpBlock], b: np.ndarray, c_lin: np.ndarray | None = None,
                    a_lin: np.ndarray | None = None, *, max_iter: int = 200,
                    gap_tol: float = 1e-9, feas_tol: float = 1e-10,
                    accept_gap: float = 1e-7, accept_feas: float = 1e-8) -> SdpResult:
    """Solve the block SDP described in the module docstring.

    Stops once the relative duality gap falls below ``gap_tol`` and both
    relative residual norms below ``feas_tol``. When progress stalls
    (vanishing steps, a singular Schur complement, or no improvement for a
    few iterations) the best iterate is returned if its relative gap is
    below ``accept_gap`` and every equality residual below ``accept_feas``
    in absolute value; otherwise :class:`SolverNotConverged` is raised.
    """
    b = np.asarray(b, dtype=float)
    m = b.size
    if c_lin is None:
        c_lin = np.zeros(0)
        a_lin = np.zeros((m, 0))
    c_lin = np.asarray(c_lin, dtype=float)
    a_lin = np.asarray(a_lin, dtype=float).reshape(m, c_lin.size)
    p = c_lin.size
    n_total = sum(blk.size for blk in blocks) + p

    # starting point scaled to the data
    norm_a = max([float(np.max(np.abs(blk.mats))) for blk in blocks if blk.mats.size] +
                 [float(np.max(np.abs(a_lin))) if a_lin.size else 0.0, 1.0])
    norm_c = max([float(np.linalg.norm(blk.cost)) for blk in blocks] +
                 [float(np.linalg.norm(c_lin)) if p else 0.0, 1.0])
    n_max = max([blk.size for blk in blocks] + [1])
    xi = max(10.0, np.sqrt(n_max), float(np.max(np.abs(b))) * n_max / norm_a if m else 0.0)
    eta = max(10.0, np.sqrt(n_max), norm_c)
    X = [xi * np.eye(blk.size) for blk in blocks]
    S = [eta * np.eye(blk.size) for blk in blocks]
    x = np.full(p, xi)
    s = np.full(p, eta)
    y = np.zeros(m)

    norm_b = 1.0 + float(np.linalg.norm(b))
    norm_cc = 1.0 + float(np.sqrt(sum(np.sum(blk.cost**2) for blk in blocks) + np.sum(c_lin**2)))
    history = []
    best = None
    stalled = 0

    since_best = 0

    def acceptable(r):
        return (r is not None and r.rel_gap <= accept_gap
                and r.primal_resid_max <= accept_feas and r.dual_infeas <= accept_feas)

    def score(r):
        return max(r.rel_gap, 10.0 * r.primal_resid_max, 10.0 * r.dual_infeas)

    def snapshot(it, pobj, dobj, gap, pinf, dinf, pmax):
        return SdpResult([Xb.copy() for Xb in X], x.copy(), y.copy(), [Sb.copy() for Sb in S],
                         s.copy(), pobj, dobj, gap, pinf, dinf, it, list(history), pmax)

    for it in range(max_iter + 1):
        Rp = b - _apply_A(blocks, a_lin, X, x, m)
        Rd = [blk.cost - Sb - _apply_At(blk, y) for blk, Sb in zip(blocks, S)]
        rd = c_lin - s - a_lin.T @ y
        pobj = sum(float(np.sum(blk.cost * Xb)) for blk, Xb in zip(blocks, X)) + float(c_lin @ x)
        dobj = float(b @ y)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = float(np.linalg.norm(Rp)) / norm_b
        dinf = float(np.sqrt(sum(np.sum(R**2) for R in Rd) + np.sum(rd**2))) / norm_cc
        pmax = float(np.max(np.abs(Rp))) if m else 0.0
        history.append((gap, pinf, dinf))
        current = snapshot(it, pobj, dobj, gap, pinf, dinf, pmax)
        if gap <= gap_tol and pinf <= feas_tol and dinf <= feas_tol:
            return current
        if best is None or score(current) < score(best):
            best, since_best = current, 0
        else:
            since_best += 1
        if since_best >= 5 and acceptable(best):
            return best
        if it == max_iter:
            break

        mu = (sum(float(np.sum(Xb * Sb)) for Xb, Sb in zip(X, S)) + float(x @ s)) / n_total

        try:
            # Nesterov-Todd scaling W = G G' with G^-1 X G^-T = G' S G = diag(lam)
            G, Ginv, lam, Wnt = [], [], [], []
            for Xb, Sb in zip(X, S):
                L = np.linalg.cholesky(Xb)
                d, Q = np.linalg.eigh(L.T @ Sb @ L)
                if d[0] <= 0:
                    raise np.linalg.LinAlgError("scaling lost definiteness")
                Gb = (L @ Q) * d ** -0.25
                G.append(Gb)
                Ginv.append((Q.T * d[:, None] ** 0.25) @ sla.solve_triangular(
                    L, np.eye(L.shape[0]), lower=True))
                lam.append(np.sqrt(d))
                Wnt.append(Gb @ Gb.T)
            w_lin = x / s
            # Schur complement M_ij = sum_b <A_ib, W_b A_jb W_b> + lin part
            M = (a_lin * w_lin) @ a_lin.T if p else np.zeros((m, m))
            for blk, Wb in zip(blocks, Wnt):
                T = Wb @ blk.mats @ Wb
                Mb = np.tensordot(blk.mats, T, axes=([1, 2], [1, 2]))
                M[np.ix_(blk.rows, blk.rows)] += (Mb + Mb.T) / 2.0
            M[np.diag_indices_from(M)] += 1e-15 * max(1.0, float(np.max(np.diag(M))))
            cho = sla.cho_factor(M, lower=True)
        except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
            if acceptable(best):
                return best
            raise SolverNotConverged(f"numerical breakdown at iteration {it}: {exc}", best) from exc

        def comp_rhs(target, corr):
            # dX + W dS W for the scaled complementarity equation; corr holds
            # the second-order term in scaled coordinates (None for predictor)
            out = []
            for Gb, lb, Xb, cb in zip(G, lam, X, corr):
                if cb is None:
                    out.append(-Xb)
                    continue
                R = -np.diag(lb**2) - (cb + cb.T) / 2.0
                R[np.diag_indices_from(R)] += target
                U = 2.0 * R / (lb[:, None] + lb[None, :])
                out.append(Gb @ U @ Gb.T)
            return out

        def direction(target, corr, corr_lin):
            Rc = comp_rhs(target, corr)
            rhs = Rp.copy()
            for blk, Wb, Rcb, Rdb in zip(blocks, Wnt, Rc, Rd):
                rhs[blk.rows] -= np.tensordot(blk.mats, Rcb - Wb @ Rdb @ Wb,
                                              axes=([1, 2], [0, 1]))
            if p:
                rc_lin = (target - x * s - corr_lin) / s
                rhs -= a_lin @ (rc_lin - w_lin * rd)
            else:
                rc_lin = np.zeros(0)
            dy = sla.cho_solve(cho, rhs)
            # refine against the true primal residual A(dX) - Rp
            for _ in range(3):
                dS = [Rdb - _apply_At(blk, dy) for blk, Rdb in zip(blocks, Rd)]
                dX = [Rcb - Wb @ dSb @ Wb for Wb, Rcb, dSb in zip(Wnt, Rc, dS)]
                dX = [(D + D.T) / 2.0 for D in dX]
                ds = rd - a_lin.T @ dy
                dx = rc_lin - w_lin * ds
                resid = Rp - _apply_A(blocks, a_lin, dX, dx, m)
                if np.max(np.abs(resid), initial=0.0) <= 1e-15 * (1.0 + np.max(np.abs(Rp), initial=0.0)):
                    break
                dy = dy + sla.cho_solve(cho, resid)
            return dX, dx, dy, dS, ds

        def steps(dX, dx, dS, ds):
            ap = min([_max_step(Xb, d) for Xb, d in zip(X, dX)] + [_max_step_lin(x, dx)])
            ad = min([_max_step(Sb, d) for Sb, d in zip(S, dS)] + [_max_step_lin(s, ds)])
            return ap, ad

        try:
            # predictor
            dXa, dxa, dya, dSa, dsa = direction(0.0, [None] * len(blocks), np.zeros(p))
            if p == 0:
                dxa = dsa = np.zeros(0)
            ap, ad = steps(dXa, dxa, dSa, dsa)
            ap, ad = min(1.0, ap), min(1.0, ad)
            mu_aff = (sum(float(np.sum((Xb + ap * a) * (Sb + ad * c)))
                          for Xb, a, Sb, c in zip(X, dXa, S, dSa))
                      + float((x + ap * dxa) @ (s + ad * dsa))) / n_total
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3))

            # corrector
            scaled = [(Gi @ a @ Gi.T) @ (Gb.T @ c @ Gb)
                      for Gb, Gi, a, c in zip(G, Ginv, dXa, dSa)]
            dX, dx, dy, dS, ds = direction(sigma * mu, scaled, dxa * dsa)
            ap, ad = steps(dX, dx, dS, ds)
        except np.linalg.LinAlgError as exc:
            if acceptable(best):
                return best
            raise SolverNotConverged(f"numerical breakdown at iteration {it}: {exc}", best) from exc

        stalled = stalled + 1 if min(ap, ad) < 1e-6 else 0
        if stalled >= 3:
            if acceptable(best):
                return best
            raise SolverNotConverged(f"stalled at iteration {it} (gap {best.rel_gap:.2e})", best)
        gamma = 0.9 + 0.09 * min(1.0, ap, ad)
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        X = [Xb + ap * d for Xb, d in zip(X, dX)]
        X = [(Xb + Xb.T) / 2.0 for Xb in X]
        x = x + ap * dx
        y = y + ad * dy
        S = [Sb + ad * d for Sb, d in zip(S, dS)]
        S = [(Sb + Sb.T) / 2.0 for Sb in S]
        s = s + ad * ds
        log.debug("it %d gap %.2e pinf %.2e dinf %.2e ap %.3f ad %.3f sigma %.2e",
                  it, gap, pinf, dinf, ap, ad, sigma)

    if acceptable(best):
        return best
    raise SolverNotConverged(f"no convergence in {max_iter} iterations "
                             f"(gap {best.rel_gap:.2e})", best)
