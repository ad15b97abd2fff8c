"""Network configuration: device rosters, radio constants, algorithm knobs.

All internal computation uses seconds, Hz, Watts, Joules and bits. Rates are
configured in bits per second and converted to bits per slot here, so the
rest of the code never multiplies by the slot length again. The feedback
duration is configured in seconds and also exposed as a slot fraction.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

import numpy as np


class ConfigError(ValueError):
    """Invalid or inconsistent configuration value."""


ARRIVAL_DISTS = ("uniform", "constant")

ALGORITHMS = ("ers-rn", "ers-on", "hdo-on", "eot-on", "pfn", "gan")
# algorithms that run the feedback machinery (stale queue estimates)
ON_FAMILY = ("ers-on", "hdo-on", "eot-on")
# algorithms whose transmission rule keeps the AP-side backlog bounded;
# the queue-blind rules give no such guarantee and are audited only for
# physical constraints
BACKLOG_AWARE = ("ers-rn", "ers-on", "hdo-on", "eot-on")


@dataclass
class NetworkConfig:
    # device rosters; type 1 harvests and spends in-slot, type 2 has a battery
    n1_count: int = 5
    n2_count: int = 5
    d1: tuple = (3.0, 5.0, 7.0, 9.0, 11.0)   # meters, AP to device
    d2: tuple = (3.0, 5.0, 7.0, 9.0, 11.0)

    # radio
    slot_T: float = 0.1          # s
    bandwidth_W: float = 2e5     # Hz
    noise_N0: float = 1e-9       # W
    ap_power_P0: float = 2.0     # W
    path_loss_alpha: float = 2.0

    # device hardware
    p_max: float = 1.0           # W, peak transmit power (type 2 cap)
    harvest_eff: float = 0.8     # xi
    eta: float = 1.0             # PA efficiency for harvest-and-spend devices
    e_h_max: float = 1.6e-4      # J, per-slot harvest ceiling
    e_min: float = 5e-6          # J, smallest useful transmission energy

    # traffic and serving limits (configured as rates, stored per slot below)
    a_max_bps: float = 1e6
    r_max_bps: float = 5e4
    c_max_bits: float = 1e5      # per-slot offload ceiling, already in bits

    arrival_dist: str = "uniform"
    rate_dist: str = "uniform"

    # algorithm knobs
    V: float = 300.0
    eps_s: float = 0.005         # s, feedback duration inside a slot
    m: int = 4                   # compulsory feedback period, slots
    feedback_bits_L: float = 16.0
    # per-slot allocation accuracy; 1e-6 shifts objectives by under 1e-7
    # relative while saving ~25% wall time per solve
    solver_tol: float = 1e-6

    # experiment
    horizon: int = 1000
    seed: int = 1

    # ---- derived, filled by __post_init__ ----
    n: int = field(init=False, repr=False, default=0)
    d: np.ndarray = field(init=False, repr=False, default=None)
    is_type2: np.ndarray = field(init=False, repr=False, default=None)
    a_max_bits: float = field(init=False, repr=False, default=0.0)
    r_max_bits: float = field(init=False, repr=False, default=0.0)
    eps_frac: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self):
        validate(self)
        self.n = self.n1_count + self.n2_count
        self.d = np.asarray(tuple(self.d1) + tuple(self.d2), dtype=float)
        self.is_type2 = np.arange(self.n) >= self.n1_count
        self.a_max_bits = self.a_max_bps * self.slot_T
        self.r_max_bits = self.r_max_bps * self.slot_T
        self.eps_frac = self.eps_s / self.slot_T

    def replaced(self, **kw) -> "NetworkConfig":
        """Copy with some init fields changed (derived fields recomputed)."""
        return replace(self, **kw)


def validate(cfg) -> None:
    """Raise ConfigError naming the offending field."""
    def positive(name):
        v = getattr(cfg, name)
        if not (v > 0):
            raise ConfigError(f"{name} must be > 0, got {v!r}")

    for name in ("slot_T", "bandwidth_W", "noise_N0", "ap_power_P0",
                 "p_max", "harvest_eff", "eta", "e_h_max", "e_min",
                 "a_max_bps", "r_max_bps", "c_max_bits", "V",
                 "feedback_bits_L", "solver_tol", "path_loss_alpha",
                 "eps_s"):
        positive(name)
    if cfg.n1_count < 0 or cfg.n2_count < 0:
        raise ConfigError("device counts must be nonnegative")
    if cfg.n1_count + cfg.n2_count < 1:
        raise ConfigError("need at least one device")
    if len(cfg.d1) != cfg.n1_count or len(cfg.d2) != cfg.n2_count:
        raise ConfigError("d1/d2 length must match n1_count/n2_count")
    for dist in tuple(cfg.d1) + tuple(cfg.d2):
        if not (dist > 0):
            raise ConfigError(f"device distance must be > 0, got {dist!r}")
    if not (0 < cfg.eps_s / cfg.slot_T < 1):
        raise ConfigError("eps_s must lie strictly inside one slot")
    if int(cfg.m) != cfg.m or cfg.m < 1:
        raise ConfigError(f"m must be a positive integer, got {cfg.m!r}")
    if cfg.horizon < 0:
        raise ConfigError("horizon must be >= 0")
    if cfg.arrival_dist not in ARRIVAL_DISTS:
        raise ConfigError(f"arrival_dist must be one of {ARRIVAL_DISTS}")
    if cfg.rate_dist not in ARRIVAL_DISTS:
        raise ConfigError(f"rate_dist must be one of {ARRIVAL_DISTS}")


def default_config(**overrides) -> NetworkConfig:
    return NetworkConfig(**overrides)


# INI section -> (field, parser) map. Distances are comma separated floats.
def _float_list(s):
    return tuple(float(x) for x in s.split(",") if x.strip() != "")


_SCHEMA = {
    "radio": {
        "slot_t": ("slot_T", float),
        "bandwidth_w": ("bandwidth_W", float),
        "noise_n0": ("noise_N0", float),
        "ap_power_p0": ("ap_power_P0", float),
        "path_loss_alpha": ("path_loss_alpha", float),
    },
    "devices": {
        "n1_count": ("n1_count", int),
        "n2_count": ("n2_count", int),
        "d1": ("d1", _float_list),
        "d2": ("d2", _float_list),
        "p_max": ("p_max", float),
        "harvest_eff": ("harvest_eff", float),
        "eta": ("eta", float),
        "e_h_max": ("e_h_max", float),
        "e_min": ("e_min", float),
        "a_max_bps": ("a_max_bps", float),
        "r_max_bps": ("r_max_bps", float),
        "c_max_bits": ("c_max_bits", float),
        "arrival_dist": ("arrival_dist", str),
        "rate_dist": ("rate_dist", str),
    },
    "algorithm": {
        "v": ("V", float),
        "eps_s": ("eps_s", float),
        "m": ("m", int),
        "feedback_bits_l": ("feedback_bits_L", float),
        "solver_tol": ("solver_tol", float),
    },
    "experiment": {
        "horizon": ("horizon", int),
        "seed": ("seed", int),
    },
}


def load_config(path) -> NetworkConfig:
    """Read an INI file, overriding defaults; unknown keys are errors."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    kw = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        table = _SCHEMA[section]
        for key, raw in parser.items(section):
            if key not in table:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            name, parse = table[key]
            try:
                kw[name] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return NetworkConfig(**kw)


def save_config(cfg, path) -> None:
    """Write cfg as an INI file readable by load_config."""
    parser = configparser.ConfigParser()
    for section, table in _SCHEMA.items():
        parser.add_section(section)
        for key, (name, parse) in table.items():
            v = getattr(cfg, name)
            if parse is _float_list:
                parser.set(section, key, ",".join(repr(float(x)) for x in v))
            else:
                parser.set(section, key, repr(v) if not isinstance(v, str) else v)
    with open(path, "w") as fh:
        parser.write(fh)
