"""Simulation configuration and unit conversions."""

from __future__ import annotations

import dataclasses
import math
import warnings
import zlib
from dataclasses import dataclass
from typing import Any

import numpy as np

THERMAL_NOISE_DBM_PER_HZ = -174.0


class ConfigError(ValueError):
    """Raised when a configuration value violates a constraint.

    ``key`` names the offending field so callers can report it.
    """

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def noise_power_mw(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Receiver noise power in mW over ``bandwidth_hz``."""
    dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return 10.0 ** (dbm / 10.0)


def normalized_power(power_mw: float, bandwidth_hz: float, noise_figure_db: float) -> float:
    """Transmit power divided by the receiver noise power (dimensionless)."""
    return power_mw / noise_power_mw(bandwidth_hz, noise_figure_db)


@dataclass(frozen=True)
class SimConfig:
    """All physical and algorithmic parameters of a simulation.

    Field names carry their units. Powers are given in mW; the
    noise-normalized values used by the rate and estimation formulas are
    exposed as :attr:`rho_p` and :attr:`rho_d`.

    Defaults follow the published parameter table (1.9 GHz, 20 MHz, 9 dB
    noise figure, 8 dB shadowing, T_c = 200, 200 mW downlink, 150 mW
    pilots) over a disk of area 1 km^2. The three-slope constants
    ``d0_km``, ``d1_km`` and ``pathloss_const_db`` are not part of that
    table and take the usual values of the three-slope model.

    ``max_memberships`` may exceed ``num_groups``; the membership limit is
    then simply inactive.
    """

    num_aps: int = 100
    num_users: int = 10
    num_groups: int = 4
    pilot_budget: int = 10
    max_memberships: int = 6
    coherence_length: int = 200
    bandwidth_hz: float = 20e6
    power_pilot_mw: float = 150.0
    power_downlink_mw: float = 200.0
    carrier_freq_hz: float = 1.9e9
    noise_figure_db: float = 9.0
    area_radius_km: float = 1.0 / math.sqrt(math.pi)
    sigma_shadow_db: float = 8.0
    d0_km: float = 0.01
    d1_km: float = 0.05
    pathloss_const_db: float = 140.7
    shadow_inside: bool = False
    rng_seed: int = 0
    num_trials: int = 200
    num_rounding_samples: int = 200
    min_rate_bits_s: float | tuple[float, ...] = 0.0
    rounding_norm: str = "clamp_only"
    fp_metric: str = "real"
    power_norm: str = "none"
    sdr_max_iter: int = 200

    def __post_init__(self):
        if isinstance(self.min_rate_bits_s, list):
            object.__setattr__(self, "min_rate_bits_s", tuple(self.min_rate_bits_s))
        self.validate()

    @property
    def rho_p(self) -> float:
        return normalized_power(self.power_pilot_mw, self.bandwidth_hz, self.noise_figure_db)

    @property
    def rho_d(self) -> float:
        return normalized_power(self.power_downlink_mw, self.bandwidth_hz, self.noise_figure_db)

    def min_rates(self) -> np.ndarray:
        """Per-user minimum rates as an array of length ``num_users``."""
        r = self.min_rate_bits_s
        if isinstance(r, tuple):
            return np.asarray(r, dtype=float)
        return np.full(self.num_users, float(r))

    def validate(self) -> None:
        for key in ("num_aps", "num_users", "num_groups", "pilot_budget", "max_memberships",
                    "coherence_length", "num_rounding_samples", "sdr_max_iter"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(key, f"must be a positive integer, got {v!r}")
        if not isinstance(self.num_trials, (int, np.integer)) or self.num_trials < 0:
            raise ConfigError("num_trials", f"must be a non-negative integer, got {self.num_trials!r}")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigError("rng_seed", "must fit in 64 unsigned bits")
        for key in ("bandwidth_hz", "power_pilot_mw", "power_downlink_mw", "carrier_freq_hz",
                    "area_radius_km", "d0_km", "d1_km"):
            v = getattr(self, key)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(key, f"must be a positive finite number, got {v!r}")
        if self.sigma_shadow_db < 0:
            raise ConfigError("sigma_shadow_db", "must be non-negative")
        if self.pilot_budget > self.coherence_length:
            raise ConfigError("pilot_budget",
                              f"{self.pilot_budget} exceeds coherence_length {self.coherence_length}")
        if not self.d0_km < self.d1_km:
            raise ConfigError("d0_km", "must be smaller than d1_km")
        if not self.d1_km < 2.0 * self.area_radius_km:
            raise ConfigError("d1_km", "must be smaller than the area diameter")
        if self.rounding_norm not in ("sum_normalized", "clamp_only"):
            raise ConfigError("rounding_norm", "must be 'sum_normalized' or 'clamp_only'")
        if self.power_norm not in ("none", "per_ap"):
            raise ConfigError("power_norm", "must be 'none' or 'per_ap'")
        if self.fp_metric not in ("real", "magnitude"):
            raise ConfigError("fp_metric", "must be 'real' or 'magnitude'")
        rates = self.min_rates()
        if rates.shape != (self.num_users,):
            raise ConfigError("min_rate_bits_s", f"expected a scalar or {self.num_users} values")
        if np.any(rates < 0) or not np.all(np.isfinite(rates)):
            raise ConfigError("min_rate_bits_s", "must be non-negative and finite")
        if self.num_users >= self.num_aps:
            warnings.warn("num_users >= num_aps; the model assumes K much smaller than M",
                          stacklevel=3)

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        if isinstance(d["min_rate_bits_s"], tuple):
            d["min_rate_bits_s"] = list(d["min_rate_bits_s"])
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        return cls(**data)


def stage_rng(master_seed: int, trial_id: int, stage: str) -> np.random.Generator:
    """Independent random stream for one (trial, stage) pair.

    Streams are derived from the triple without consuming any shared state,
    so adding a new stage never changes the draws of existing ones.
    """
    tag = zlib.crc32(stage.encode("utf-8"))
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_id), tag))
    return np.random.Generator(np.random.PCG64(seq))
