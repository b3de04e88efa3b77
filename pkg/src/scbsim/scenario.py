"""Experiment configuration: validation, unit conversions and the noise model.

A scenario is a frozen dataclass describing one downlink experiment: a base
station with M transmit antennas serving M clusters of K NOMA users, each
with L receive antennas, assisted by an N-element reflecting surface.  All
large-scale geometry, NOMA power/rate allocation, surface operating mode and
Monte Carlo bookkeeping live here.  Instances are immutable and safe to share
across worker threads.

Config files use a flat ``key = value`` grammar with dotted section prefixes
(``geometry.*``, ``noma.*``, ``ris.*``, ``montecarlo.*``, ``power_model.*``).
Lists are comma separated, matrices use ``;`` between rows, ``#`` starts a
comment.  Distances are meters, powers dBm except the power model (watts).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

DIFFUSE = "diffuse"
ANOMALOUS = "anomalous"
AGGREGATE = "aggregate"
PER_SYMBOL = "per-symbol"

RIS_SCENARIOS = (DIFFUSE, ANOMALOUS)
CANCELLATION_MODES = (AGGREGATE, PER_SYMBOL)

# Thermal noise density at room temperature, dBm per Hz.
THERMAL_NOISE_DBM_PER_HZ = -174.0


class ConfigError(ValueError):
    """Raised when a config document cannot be parsed or violates an invariant."""


def noise_power_dbm(bandwidth_hz):
    """AWGN power over a bandwidth: -174 + 10*log10(BW) dBm."""
    if not bandwidth_hz > 0:
        raise ConfigError(f"bandwidth_hz must be positive, got {bandwidth_hz}")
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz)


def dbm_to_watt(x_dbm):
    if not math.isfinite(x_dbm):
        raise ConfigError(f"dBm value must be finite, got {x_dbm}")
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watt_to_dbm(x_watt):
    if not x_watt > 0:
        raise ConfigError(f"watt value must be positive, got {x_watt}")
    return 10.0 * math.log10(x_watt) + 30.0


@dataclass(frozen=True)
class PowerModel:
    """Static power draw used by the energy-efficiency metric (all watts)."""

    p_bs_watt: float = 10.0    # base-station circuitry
    p_user_watt: float = 0.1   # per user terminal
    p_ris_watt: float = 0.01   # per reflecting element controller
    amp_factor: float = 1.2    # inverse amplifier efficiency, multiplies tx power

    def validate(self):
        for name in ("p_bs_watt", "p_user_watt", "p_ris_watt"):
            if getattr(self, name) < 0:
                raise ConfigError(f"power_model.{name} must be >= 0")
        if self.amp_factor < 1.0:
            raise ConfigError("power_model.amp_factor must be >= 1")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full experiment description; validated on construction, then immutable.

    User index convention: within a cluster, user 0 is the farthest (weakest)
    user and user K-1 the nearest.  ``power_alloc`` holds the squared power
    allocation factors, which must sum to one and be non-increasing so that
    the successive decoding order (user k decodes users 0..k) is well posed.
    """

    M: int                      # transmit antennas = clusters
    K: int                      # users per cluster
    L: int                      # receive antennas per user
    N: int                      # reflecting elements
    d1: float                   # BS-RIS distance, m
    d_user: tuple               # RIS-user distances, [m][k], meters
    d_direct: tuple             # BS-user distances, [m][k], meters
    alpha1: float               # path loss exponent, BS-RIS
    alpha2: float               # path loss exponent, RIS-user
    alpha3: float               # path loss exponent, BS-user
    rician_k1: float            # Rician factor of the BS-RIS link (linear)
    rician_k2: float            # Rician factor of the RIS-user links (linear)
    power_alloc: tuple          # squared NOMA power factors per user
    target_rate: tuple          # per-user target rates, bits/channel use
    ris_scenario: str = DIFFUSE
    cancellation_mode: str = AGGREGATE
    resolution_bits: int | None = None   # None = ideal (continuous) surface
    tx_power_dbm: float = 30.0
    bandwidth_hz: float = 1e8
    noise_dbm_override: float | None = None
    power_model: PowerModel = field(default_factory=PowerModel)
    trials: int = 100000
    master_seed: int = 12345

    def __post_init__(self):
        object.__setattr__(self, "d_user", _as_matrix(self.d_user))
        object.__setattr__(self, "d_direct", _as_matrix(self.d_direct))
        object.__setattr__(self, "power_alloc", tuple(float(v) for v in self.power_alloc))
        object.__setattr__(self, "target_rate", tuple(float(v) for v in self.target_rate))
        self.validate()

    def validate(self):
        for name in ("M", "K", "L", "N"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 1):
                raise ConfigError(f"{name} must be an integer >= 1, got {v!r}")
        for name in ("d1", "alpha1", "alpha2", "alpha3", "rician_k1", "rician_k2"):
            v = getattr(self, name)
            if not v > 0:
                raise ConfigError(f"{name} must be strictly positive, got {v!r}")
        for label, mat in (("d_user", self.d_user), ("d_direct", self.d_direct)):
            if len(mat) != self.M or any(len(row) != self.K for row in mat):
                raise ConfigError(
                    f"geometry.{label} must be an M x K ({self.M} x {self.K}) matrix; "
                    "every per-user distance must be given explicitly"
                )
            if any(not d > 0 for row in mat for d in row):
                raise ConfigError(f"geometry.{label} entries must be strictly positive")
        if len(self.power_alloc) != self.K:
            raise ConfigError(f"noma.power_alloc must have K={self.K} entries")
        if len(self.target_rate) != self.K:
            raise ConfigError(f"noma.target_rate must have K={self.K} entries")
        if any(not a > 0 for a in self.power_alloc):
            raise ConfigError("noma.power_alloc entries must be strictly positive")
        if abs(sum(self.power_alloc) - 1.0) > 1e-12:
            raise ConfigError("noma.power_alloc: power allocation must sum to 1")
        if any(self.power_alloc[i] < self.power_alloc[i + 1] - 1e-15 for i in range(self.K - 1)):
            raise ConfigError(
                "noma.power_alloc must be non-increasing (user 0 is the farthest user)"
            )
        if any(r < 0 for r in self.target_rate):
            raise ConfigError("noma.target_rate entries must be >= 0")
        if self.ris_scenario not in RIS_SCENARIOS:
            raise ConfigError(f"ris.ris_scenario must be one of {RIS_SCENARIOS}")
        if self.cancellation_mode not in CANCELLATION_MODES:
            raise ConfigError(f"ris.cancellation_mode must be one of {CANCELLATION_MODES}")
        if self.resolution_bits is not None:
            if not (isinstance(self.resolution_bits, int) and self.resolution_bits >= 1):
                raise ConfigError("ris.resolution_bits must be an integer >= 1 when present")
        if not math.isfinite(self.tx_power_dbm):
            raise ConfigError("tx_power_dbm must be finite")
        if not self.bandwidth_hz > 0:
            raise ConfigError("bandwidth_hz must be strictly positive")
        if self.noise_dbm_override is not None and not math.isfinite(self.noise_dbm_override):
            raise ConfigError("noise_dbm_override must be finite")
        self.power_model.validate()
        if not (isinstance(self.trials, int) and self.trials >= 1):
            raise ConfigError("montecarlo.trials must be an integer >= 1")
        if not (isinstance(self.master_seed, int) and 0 <= self.master_seed < 2 ** 64):
            raise ConfigError("montecarlo.master_seed must be an unsigned 64-bit integer")

    # -- derived quantities ------------------------------------------------

    @property
    def noise_dbm(self):
        if self.noise_dbm_override is not None:
            return self.noise_dbm_override
        return noise_power_dbm(self.bandwidth_hz)

    @property
    def noise_watt(self):
        return dbm_to_watt(self.noise_dbm)

    @property
    def tx_power_watt(self):
        return dbm_to_watt(self.tx_power_dbm)

    @property
    def ideal_ris(self):
        return self.resolution_bits is None

    def with_updates(self, **kwargs):
        """A validated copy with the given fields replaced."""
        try:
            return replace(self, **kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _as_matrix(value):
    """Normalize a distance matrix to a tuple of tuples of floats."""
    if isinstance(value, (int, float)):
        return ((float(value),),)
    rows = []
    for row in value:
        if isinstance(row, (int, float)):
            raise ConfigError(
                "distance matrices need one row per cluster (use ';' between rows)"
            )
        rows.append(tuple(float(v) for v in row))
    return tuple(rows)


# -- config document parsing / serialization -------------------------------

_SECTION_KEYS = {
    "M": ("M", "int"),
    "K": ("K", "int"),
    "L": ("L", "int"),
    "rician_k1": ("rician_k1", "float"),
    "rician_k2": ("rician_k2", "float"),
    "tx_power_dbm": ("tx_power_dbm", "float"),
    "bandwidth_hz": ("bandwidth_hz", "float"),
    "noise_dbm_override": ("noise_dbm_override", "optfloat"),
    "geometry.d1": ("d1", "float"),
    "geometry.d_user": ("d_user", "matrix"),
    "geometry.d_direct": ("d_direct", "matrix"),
    "geometry.alpha1": ("alpha1", "float"),
    "geometry.alpha2": ("alpha2", "float"),
    "geometry.alpha3": ("alpha3", "float"),
    "noma.power_alloc": ("power_alloc", "list"),
    "noma.target_rate": ("target_rate", "list"),
    "ris.N": ("N", "int"),
    "ris.ris_scenario": ("ris_scenario", "str"),
    "ris.cancellation_mode": ("cancellation_mode", "str"),
    "ris.resolution_bits": ("resolution_bits", "optint"),
    "montecarlo.trials": ("trials", "int"),
    "montecarlo.master_seed": ("master_seed", "int"),
    "power_model.p_bs_watt": ("p_bs_watt", "float"),
    "power_model.p_user_watt": ("p_user_watt", "float"),
    "power_model.p_ris_watt": ("p_ris_watt", "float"),
    "power_model.amp_factor": ("amp_factor", "float"),
}

_REQUIRED = (
    "M", "K", "L", "ris.N",
    "geometry.d1", "geometry.d_user", "geometry.d_direct",
    "geometry.alpha1", "geometry.alpha2", "geometry.alpha3",
    "rician_k1", "rician_k2", "noma.power_alloc", "noma.target_rate",
)

_POWER_MODEL_FIELDS = ("p_bs_watt", "p_user_watt", "p_ris_watt", "amp_factor")


def _parse_scalar(text, kind, key):
    text = text.strip()
    if kind in ("optfloat", "optint") and text.lower() in ("none", ""):
        return None
    try:
        if kind in ("int", "optint"):
            f = float(text)
            if f != int(f):
                raise ValueError
            return int(f)
        if kind in ("float", "optfloat"):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as a number") from None
    return text.lower()


def load_config(text):
    """Parse a config document into a validated ScenarioConfig."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _SECTION_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        field_name, kind = _SECTION_KEYS[key]
        if kind == "matrix":
            rows = [r for r in val.split(";") if r.strip()]
            values[field_name] = tuple(
                tuple(_parse_scalar(v, "float", key) for v in row.split(",") if v.strip())
                for row in rows
            )
        elif kind == "list":
            values[field_name] = tuple(
                _parse_scalar(v, "float", key) for v in val.split(",") if v.strip()
            )
        else:
            values[field_name] = _parse_scalar(val, kind, key)
    missing = [k for k in _REQUIRED if _SECTION_KEYS[k][0] not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    pm_kwargs = {k: values.pop(k) for k in _POWER_MODEL_FIELDS if k in values}
    if pm_kwargs:
        values["power_model"] = PowerModel(**pm_kwargs)
    return ScenarioConfig(**values)


def serialize_config(cfg):
    """Canonical config document; load_config(serialize_config(cfg)) == cfg."""
    pm = cfg.power_model
    lines = []
    for key, (field_name, kind) in _SECTION_KEYS.items():
        if field_name in _POWER_MODEL_FIELDS:
            value = getattr(pm, field_name)
        else:
            value = getattr(cfg, field_name)
        if kind == "matrix":
            text = "; ".join(", ".join(repr(v) for v in row) for row in value)
        elif kind == "list":
            text = ", ".join(repr(v) for v in value)
        elif value is None:
            text = "none"
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def fingerprint(cfg):
    """Short stable hash of the full configuration (master seed included)."""
    digest = hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()
    return digest[:12]
