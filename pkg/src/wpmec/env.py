"""Slot-by-slot random environment: channels, arrivals, serving rates.

Each (quantity, device) pair owns an independent RNG substream derived from
the master seed with a fixed spawn key, so draws are reproducible bit for bit
and adding a device never perturbs the streams of existing devices. All draws
for a run are generated up front, which also makes slots randomly accessible
by index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError

# spawn-key slots, fixed forever for reproducibility
_Q_CHANNEL, _Q_ARRIVAL, _Q_RATE = 0, 1, 2


def mean_gain(d, alpha):
    """Average channel power gain at distance d (path-loss model).

    Accepts scalars or arrays; distances must be positive.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ConfigError("distance must be > 0")
    g = 1e-3 * d ** (-float(alpha))
    return float(g) if g.ndim == 0 else g


@dataclass
class SlotState:
    t: int
    h: np.ndarray       # channel power gain per device
    A: np.ndarray       # arriving bits available for collection
    r: np.ndarray       # AP serving rate, bits


class Environment:
    """Pre-drawn randomness for one run of `horizon` slots."""

    def __init__(self, cfg, seed=None, horizon=None):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else int(seed)
        self.horizon = cfg.horizon if horizon is None else int(horizon)
        n, H = cfg.n, self.horizon

        gain = mean_gain(cfg.d, cfg.path_loss_alpha)
        self.h = np.empty((H, n))
        self.A = np.empty((H, n))
        self.r = np.empty((H, n))
        for dev in range(n):
            fade = self._rng(_Q_CHANNEL, dev).exponential(1.0, H)
            # keep gains strictly positive (exponential can return 0.0)
            self.h[:, dev] = gain[dev] * np.maximum(fade, 1e-300)
            self.A[:, dev] = self._draw(_Q_ARRIVAL, dev, cfg.arrival_dist,
                                        cfg.a_max_bits, H)
            self.r[:, dev] = self._draw(_Q_RATE, dev, cfg.rate_dist,
                                        cfg.r_max_bits, H)

    def _rng(self, quantity, dev):
        ss = np.random.SeedSequence(self.seed, spawn_key=(quantity, dev))
        return np.random.default_rng(ss)

    def _draw(self, quantity, dev, dist, high, H):
        rng = self._rng(quantity, dev)
        if dist == "uniform":
            return rng.uniform(0.0, high, H)
        return np.full(H, float(high))    # "constant"

    def slot(self, t) -> SlotState:
        if not (0 <= t < self.horizon):
            raise IndexError(f"slot {t} outside horizon {self.horizon}")
        return SlotState(t=t, h=self.h[t], A=self.A[t], r=self.r[t])


def sample_slot(stream: Environment, t: int) -> SlotState:
    """Deterministic random access into a pre-drawn environment."""
    return stream.slot(t)
