"""Small-scale fading, MMSE estimation statistics and favorable-propagation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def draw_channel(beta: np.ndarray, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Rayleigh channel g = sqrt(beta) * h with h ~ CN(0, 1).

    With ``size`` given, returns ``size`` independent realizations stacked
    along a new leading axis.
    """
    beta = np.asarray(beta, dtype=float)
    shape = beta.shape if size is None else (size,) + beta.shape
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return np.sqrt(beta) * h


def mmse_variance(beta: np.ndarray, rho_p: float) -> np.ndarray:
    """Variance of the MMSE channel estimate, rho_p beta^2 / (1 + rho_p beta)."""
    beta = np.asarray(beta, dtype=float)
    return rho_p * beta**2 / (1.0 + rho_p * beta)


def mmse_estimate(g: np.ndarray, beta: np.ndarray, rho_p: float,
                  rng: np.random.Generator) -> np.ndarray:
    """MMSE estimate of ``g`` from a unit-noise pilot observation.

    With orthonormal pilots the de-spread observation at each AP is
    ``sqrt(rho_p) g + n`` with ``n ~ CN(0, 1)``. ``g`` and ``beta`` broadcast,
    so a stack of realizations can be passed at once.
    """
    g = np.asarray(g)
    beta = np.asarray(beta, dtype=float)
    n = (rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)) / np.sqrt(2.0)
    y = np.sqrt(rho_p) * g + n
    return np.sqrt(rho_p) * beta / (rho_p * beta + 1.0) * y


def _check_pair(k: int, j: int) -> None:
    if k == j:
        raise ValueError("pair correlation needs two distinct users")


def pair_correlation(beta: np.ndarray, k: int, j: int) -> float:
    """Large-scale fading inner product sum_m beta_mk beta_mj."""
    _check_pair(k, j)
    return float(np.dot(beta[:, k], beta[:, j]))


def normalized_pair_correlation(beta: np.ndarray, k: int, j: int) -> float:
    """Cosine similarity of the two users' large-scale fading vectors."""
    _check_pair(k, j)
    a, b = beta[:, k], beta[:, j]
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(min(1.0, max(0.0, np.dot(a, b) / (na * nb))))


def normalized_correlation_matrix(beta: np.ndarray) -> np.ndarray:
    """All-pairs cosine similarity of beta columns, shape (K, K)."""
    norms = np.linalg.norm(beta, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    u = beta / safe
    return np.clip(u.T @ u, 0.0, 1.0)


def chebyshev_bound(beta: np.ndarray, k: int, j: int, theta, num_aps: int | None = None):
    """One-sided Chebyshev (Cantelli) bound 1 / (1 + M^2 theta^2 / sum_m beta_mk beta_mj).

    ``theta`` may be an array. Returns 1 at theta = 0 and 0 for theta > 0 when
    the correlation sum vanishes.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("theta must be non-negative")
    m = beta.shape[0] if num_aps is None else num_aps
    corr = pair_correlation(beta, k, j)
    if corr == 0.0:
        out = np.where(theta > 0, 0.0, 1.0)
    else:
        out = 1.0 / (1.0 + m**2 * theta**2 / corr)
    return out if out.ndim else float(out)


def default_theta_grid(beta: np.ndarray, n: int = 64) -> np.ndarray:
    return np.logspace(-4, 0, n) * float(np.max(beta))


def inner_product_samples(beta: np.ndarray, k: int, j: int, num_draws: int,
                          rng: np.random.Generator, metric: str = "real") -> np.ndarray:
    """Samples of g_k^H g_j / M over fresh small-scale fading draws."""
    m = beta.shape[0]
    pair = beta[:, [k, j]]
    g = draw_channel(pair, rng, size=num_draws)
    ip = np.einsum("nm,nm->n", g[:, :, 0].conj(), g[:, :, 1]) / m
    if metric == "real":
        return ip.real
    if metric == "magnitude":
        return np.abs(ip)
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class FpReport:
    theta_grid: np.ndarray
    pairs: list[tuple[int, int]] = field(default_factory=list)
    empirical_ccdf: list[np.ndarray] = field(default_factory=list)
    bound: list[np.ndarray] = field(default_factory=list)
    normalized_correlation: list[float] = field(default_factory=list)
    num_draws: int = 0
    metric: str = "real"

    def rows(self):
        for (k, j), emp, bnd, nc in zip(self.pairs, self.empirical_ccdf, self.bound,
                                        self.normalized_correlation):
            for t, e, b in zip(self.theta_grid, emp, bnd):
                yield k, j, float(t), float(e), float(b), nc


def empirical_fp_ccdf(beta: np.ndarray, k: int, j: int, theta_grid, num_draws: int,
                      rng: np.random.Generator, metric: str = "real") -> np.ndarray:
    """Monte Carlo estimate of P{ip / M >= theta} on ``theta_grid``."""
    if num_draws < 1000:
        raise ValueError("num_draws must be at least 1000")
    samples = np.sort(inner_product_samples(beta, k, j, num_draws, rng, metric))
    theta = np.asarray(theta_grid, dtype=float)
    below = np.searchsorted(samples, theta, side="left")
    return (num_draws - below) / num_draws


def fp_report(beta: np.ndarray, pairs, rng: np.random.Generator, theta_grid=None,
              num_draws: int = 10_000, metric: str = "real") -> FpReport:
    theta = default_theta_grid(beta) if theta_grid is None else np.asarray(theta_grid, float)
    rep = FpReport(theta_grid=theta, num_draws=num_draws, metric=metric)
    for k, j in pairs:
        rep.pairs.append((int(k), int(j)))
        rep.empirical_ccdf.append(empirical_fp_ccdf(beta, k, j, theta, num_draws, rng, metric))
        rep.bound.append(chebyshev_bound(beta, k, j, np.maximum(theta, 0.0)))
        rep.normalized_correlation.append(normalized_pair_correlation(beta, k, j))
    return rep
