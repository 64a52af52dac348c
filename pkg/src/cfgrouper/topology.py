"""Network geometry and large-scale fading.

APs and users are dropped uniformly over a disk centred at the origin.
Large-scale fading follows the three-slope path-loss model with
log-normal shadowing added in dB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimConfig


@dataclass(frozen=True)
class Topology:
    ap_positions: np.ndarray  # (M, 2), km
    user_positions: np.ndarray  # (K, 2), km

    @property
    def num_aps(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def num_users(self) -> int:
        return self.user_positions.shape[0]

    def distances(self) -> np.ndarray:
        """AP-user distance matrix in km, shape (M, K)."""
        diff = self.ap_positions[:, None, :] - self.user_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


def uniform_disk(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform over the disk of ``radius`` (square-root radius transform)."""
    r = radius * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    pts = np.column_stack((r * np.cos(phi), r * np.sin(phi)))
    # cos/sin rounding can push a boundary point out by an ulp
    norm = np.hypot(pts[:, 0], pts[:, 1])
    over = norm > radius
    if np.any(over):
        pts[over] *= (radius / norm[over])[:, None]
    return pts


def generate_topology(cfg: SimConfig, rng: np.random.Generator) -> Topology:
    aps = uniform_disk(cfg.num_aps, cfg.area_radius_km, rng)
    users = uniform_disk(cfg.num_users, cfg.area_radius_km, rng)
    return Topology(aps, users)


def path_loss_db(r, d0: float, d1: float, pathloss_const_db: float):
    """Three-slope path loss in dB for distance(s) ``r`` in km.

    Slope 35 beyond ``d1``, slope 20 between ``d0`` and ``d1``, flat below
    ``d0``. Continuous and non-increasing in ``r``; ``r = 0`` falls in the
    flat region.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be non-negative")
    far = -pathloss_const_db - 35.0 * np.log10(np.maximum(r, d1))
    mid = -pathloss_const_db - 15.0 * np.log10(d1) - 20.0 * np.log10(np.clip(r, d0, d1))
    out = np.where(r > d1, far, mid)
    return out if out.ndim else float(out)


def cfg_path_loss_db(r, cfg: SimConfig):
    return path_loss_db(r, cfg.d0_km, cfg.d1_km, cfg.pathloss_const_db)


def build_beta_matrix(topo: Topology, cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Linear-scale large-scale fading coefficients, shape (M, K).

    One standard normal is drawn per (m, k) regardless of distance, so the
    random stream consumption does not depend on geometry. Shadowing is
    applied beyond ``d1_km`` only unless ``cfg.shadow_inside`` is set.
    """
    r = topo.distances()
    pl = cfg_path_loss_db(r, cfg)
    z = rng.standard_normal(r.shape)
    shadowed = np.ones_like(r, dtype=bool) if cfg.shadow_inside else r > cfg.d1_km
    beta_db = pl + np.where(shadowed, cfg.sigma_shadow_db * z, 0.0)
    return 10.0 ** (beta_db / 10.0)
