"""Radio configuration, power-delay profile and multipath channel models.

All powers are handled in linear units internally (mW for absolute powers,
plain ratios for gains).  Conversion from dBm/dB happens when a config is
loaded or when a property is read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Mapping, Sequence

import numpy as np


def db_to_lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def lin_to_db(lin):
    return 10.0 * np.log10(lin)


# Normalized cluster delays (multiples of the delay spread) of the three
# 3GPP TDL channels used for the sweeps.
TDL_NORMALIZED_DELAYS: dict[str, tuple[float, ...]] = {
    "A": (0.3819, 0.4025, 0.5868, 0.4610, 0.5375, 0.6708, 0.5750, 0.7618,
          1.5375, 1.8978, 2.2242, 2.1718, 2.4942, 2.5119, 3.0582, 4.0810,
          4.4579, 4.5695, 4.7966, 5.0066, 5.3043, 9.6586, 10.0000),
    "B": (0.1072, 0.2155, 0.2095, 0.2870, 0.2986, 0.3752, 0.5055, 0.3681,
          0.3697, 0.5700, 0.5283, 1.1021, 1.2756, 1.5474, 1.7842, 2.0169,
          2.8294, 3.0219, 3.6187, 4.1067, 4.2790, 4.7834, 5.0000),
    "C": (0.2099, 0.2219, 0.2329, 0.2176, 0.6366, 0.6448, 0.6560, 0.6584,
          0.7935, 0.8213, 0.9336, 1.2285, 1.3083, 2.1704, 2.7105, 4.2589,
          4.6003, 5.4902, 5.6077, 6.3065, 6.6374, 7.0427, 8.6523),
}


@dataclass(frozen=True)
class RadioConfig:
    """Static description of the full-duplex radio front end.

    Defaults reproduce the 802.11ax-style 80 MHz configuration used
    throughout the package.
    """

    bandwidth_hz: float = 80e6
    carrier_hz: float = 5.6e9
    tx_power_dbm: float = 20.0
    tx_snr_db: float = 60.0
    tx_irr_db: float = 25.0
    nonlinear_power_dbm: float = -10.0
    rx_noise_floor_dbm: float = -90.0
    circulator_atten_db: float = -25.0
    direct_leakage_delay_s: float = 0.4e-9

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.carrier_hz <= self.bandwidth_hz / 2:
            raise ValueError("carrier_hz must exceed bandwidth_hz/2")
        if self.tx_snr_db <= 0:
            raise ValueError("tx_snr_db must be positive")
        if self.circulator_atten_db > 0:
            raise ValueError("circulator_atten_db is an attenuation and must be <= 0 dB")
        if self.direct_leakage_delay_s < 0:
            raise ValueError("direct_leakage_delay_s must be non-negative")

    @property
    def tx_power(self) -> float:
        """Total Tx power rho_t in mW."""
        return float(db_to_lin(self.tx_power_dbm))

    @property
    def tx_noise_power(self) -> float:
        """Tx noise power in mW."""
        return float(db_to_lin(self.tx_power_dbm - self.tx_snr_db))

    @property
    def nonlinear_power(self) -> float:
        return float(db_to_lin(self.nonlinear_power_dbm))

    @property
    def linear_power(self) -> float:
        """Power left for the linear (I/Q mixed) component so the total is rho_t."""
        p = self.tx_power - self.tx_noise_power - self.nonlinear_power
        if p <= 0:
            raise ValueError("nonlinear and noise powers exceed the Tx power")
        return p

    @property
    def rx_noise_power(self) -> float:
        return float(db_to_lin(self.rx_noise_floor_dbm))

    @property
    def direct_leakage_gain(self) -> complex:
        """Deterministic direct-leakage gain a0 (zero phase)."""
        return complex(math.sqrt(db_to_lin(self.circulator_atten_db)))

    def replace(self, **changes) -> "RadioConfig":
        d = asdict(self)
        d.update(changes)
        return RadioConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "RadioConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown radio fields: {sorted(extra)}")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class PdpModel:
    """Log-linear power-delay profile a^2(tau) [dB] = intercept + slope*log10(tau [s])."""

    intercept_db: float = -254.29
    slope_db_per_decade: float = -25.0
    domain_min_s: float = 1e-10

    def __post_init__(self):
        if not self.slope_db_per_decade < 0:
            raise ValueError("PDP slope must be negative")
        if not self.domain_min_s > 0:
            raise ValueError("domain_min_s must be positive")

    def attenuation_db(self, delay_s):
        d = np.asarray(delay_s, dtype=float)
        if np.any(d < self.domain_min_s):
            raise ValueError("delay outside PDP domain")
        return self.intercept_db + self.slope_db_per_decade * np.log10(d)

    def delay_for_db(self, level_db):
        """Inverse of attenuation_db (no domain check)."""
        return 10.0 ** ((np.asarray(level_db, dtype=float) - self.intercept_db)
                        / self.slope_db_per_decade)


def pdp_attenuation(pdp: PdpModel, delay_s):
    """Average path power gain a^2 at ``delay_s`` (linear).

    Scalars in, float out; arrays in, arrays out.
    """
    out = db_to_lin(pdp.attenuation_db(delay_s))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ChannelProfile:
    """Average multipath description of the SI channel.

    Path 0 is the deterministic direct leakage; paths 1..M are the Rayleigh
    clusters whose mean powers follow the PDP.
    """

    normalized_delays: tuple[float, ...]
    delay_spread_s: float
    pdp: PdpModel
    direct_leakage_gain: complex
    direct_leakage_delay_s: float
    name: str = "custom"

    def __post_init__(self):
        nd = np.asarray(self.normalized_delays, dtype=float)
        if nd.ndim != 1 or nd.size == 0:
            raise ValueError("normalized_delays must be a non-empty 1-D sequence")
        if np.any(nd <= 0):
            raise ValueError("normalized delays must be strictly positive")
        if not self.delay_spread_s > 0:
            raise ValueError("delay_spread_s must be positive")
        # validates the domain as a side effect
        self.pdp.attenuation_db(nd * self.delay_spread_s)
        object.__setattr__(self, "normalized_delays", tuple(float(x) for x in nd))

    @property
    def num_clusters(self) -> int:
        return len(self.normalized_delays)

    @property
    def cluster_delays_s(self) -> np.ndarray:
        return np.asarray(self.normalized_delays) * self.delay_spread_s

    @property
    def cluster_powers(self) -> np.ndarray:
        return np.asarray(pdp_attenuation(self.pdp, self.cluster_delays_s))

    @property
    def path_delays_s(self) -> np.ndarray:
        """Direct leakage first, then cluster delays in table order."""
        return np.concatenate([[self.direct_leakage_delay_s], self.cluster_delays_s])

    @property
    def path_powers(self) -> np.ndarray:
        return np.concatenate([[abs(self.direct_leakage_gain) ** 2], self.cluster_powers])


def profile_from_tdl(tdl_name: str, delay_spread_s: float, pdp: PdpModel | None = None,
                     cfg: RadioConfig | None = None,
                     table: Mapping[str, Sequence[float]] | None = None) -> ChannelProfile:
    """Build a profile from one of the TDL delay tables.

    ``table`` lets a config file override or extend the built-in tables.
    """
    pdp = PdpModel() if pdp is None else pdp
    cfg = RadioConfig() if cfg is None else cfg
    tables = dict(TDL_NORMALIZED_DELAYS)
    if table:
        tables.update({k.upper(): tuple(v) for k, v in table.items()})
    key = tdl_name.upper()
    if key not in tables:
        raise ValueError(f"unknown TDL channel {tdl_name!r}; known: {sorted(tables)}")
    return ChannelProfile(
        normalized_delays=tuple(tables[key]),
        delay_spread_s=float(delay_spread_s),
        pdp=pdp,
        direct_leakage_gain=cfg.direct_leakage_gain,
        direct_leakage_delay_s=cfg.direct_leakage_delay_s,
        name=f"TDL-{key}",
    )


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of path gains.  Paths are sorted by delay; the direct
    leakage (index 0 in the profile) keeps its deterministic gain."""

    delays_s: np.ndarray
    gains: np.ndarray
    direct_index: int = 0

    def __post_init__(self):
        d = np.array(self.delays_s, dtype=float)
        g = np.array(self.gains, dtype=complex)
        if d.shape != g.shape or d.ndim != 1:
            raise ValueError("delays and gains must be 1-D and of equal length")
        d.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "delays_s", d)
        object.__setattr__(self, "gains", g)

    @property
    def num_paths(self) -> int:
        return self.delays_s.size


def draw_cluster_gains(profile: ChannelProfile, rng: np.random.Generator, size=None) -> np.ndarray:
    """CN(0, a_m^2) gains for every cluster, shape ``size + (M,)``."""
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (profile.num_clusters,)
    sd = np.sqrt(profile.cluster_powers / 2.0)
    return sd * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def realize_channel(profile: ChannelProfile, seed) -> ChannelRealization:
    """Draw one channel realization; deterministic in (profile, seed)."""
    rng = np.random.default_rng(seed)
    g = draw_cluster_gains(profile, rng)
    delays = profile.path_delays_s
    gains = np.concatenate([[profile.direct_leakage_gain], g])
    order = np.argsort(delays, kind="stable")
    return ChannelRealization(delays[order], gains[order], int(np.nonzero(order == 0)[0][0]))
