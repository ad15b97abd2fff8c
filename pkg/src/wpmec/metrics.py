"""Run-level metrics and invariant audits over completed traces.

Everything here is a pure function of (trace, config). A trace is any
object exposing per-slot arrays: t, mu0 (horizon,), and Q, S, E, a,
c_delivered, e, mu, harvested, in_mt, q_hat (horizon, n), plus algo and
seed identifiers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import BACKLOG_AWARE
from .env import Environment
from .scheduler import compute_theta

# numerical slack for audits of solver-produced quantities
_REL = 1e-9


def utility(a):
    """Concave reward for admitted bits, natural log of (1 + a)."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("utility is undefined for negative bit counts")
    out = np.log1p(a)
    return float(out) if out.ndim == 0 else out


def jain_index(x):
    """Fairness in (0, 1]: (sum x)^2 / (N * sum x^2).

    All-zero input carries no traffic to compare, reported as NaN rather
    than an arbitrary score.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("jain_index needs at least one value")
    if np.any(x < 0):
        raise ValueError("jain_index is defined for non-negative values")
    total_sq = float(np.sum(x)) ** 2
    denom = x.size * float(np.sum(x * x))
    if denom == 0.0:
        return float("nan")
    return total_sq / denom


def time_average(series, steady=False):
    """Arithmetic mean of a per-slot series; steady=True discards the
    first half of the horizon to skip the cold-start transient."""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise ValueError("time_average of an empty series")
    if steady:
        series = series[series.shape[0] // 2:]
    return series.mean(axis=0)


@dataclass
class RunSummary:
    """One completed run reduced to the figures of merit."""

    algo: str
    V: float
    eps_s: float
    m: int
    seed: int
    avg_delivered: float
    avg_admitted: float
    avg_utility: float
    jain_all: float
    jain_t1: float
    jain_t2: float
    avg_Q: np.ndarray = field(default_factory=lambda: np.zeros(0))
    avg_S: np.ndarray = field(default_factory=lambda: np.zeros(0))
    violations: int = 0
    no_traffic: bool = False

    @property
    def avg_Q_mean(self):
        return float(np.mean(self.avg_Q)) if self.avg_Q.size else 0.0

    @property
    def avg_S_mean(self):
        return float(np.mean(self.avg_S)) if self.avg_S.size else 0.0


def summarize(trace, cfg) -> RunSummary:
    """Reduce a trace to its RunSummary (metrics plus violation total)."""
    horizon = int(np.asarray(trace.t).size)
    ids = dict(algo=trace.algo, V=cfg.V, eps_s=cfg.eps_s, m=cfg.m,
               seed=trace.seed)
    if horizon == 0:
        nan = float("nan")
        return RunSummary(avg_delivered=0.0, avg_admitted=0.0,
                          avg_utility=0.0, jain_all=nan, jain_t1=nan,
                          jain_t2=nan, no_traffic=True, **ids)

    per_dev = time_average(trace.c_delivered)          # (n,)
    delivered = float(np.sum(per_dev))
    admitted = float(np.sum(time_average(trace.a)))
    util = float(np.sum(time_average(utility(trace.a))))
    report = verify_invariants(trace, cfg)
    return RunSummary(
        avg_delivered=delivered,
        avg_admitted=admitted,
        avg_utility=util,
        jain_all=jain_index(per_dev),
        jain_t1=jain_index(per_dev[~cfg.is_type2]),
        jain_t2=jain_index(per_dev[cfg.is_type2]),
        avg_Q=time_average(trace.Q, steady=True),
        avg_S=time_average(trace.S, steady=True),
        violations=report["total"],
        no_traffic=(delivered == 0.0 and admitted == 0.0),
        **ids,
    )


def _audit(report, name, bad_mask):
    rows = np.flatnonzero(np.any(np.atleast_2d(bad_mask), axis=-1)
                          if bad_mask.ndim > 1 else bad_mask)
    report[name] = {
        "count": int(np.count_nonzero(bad_mask)),
        "first_slot": int(rows[0]) if rows.size else None,
    }


def verify_invariants(trace, cfg) -> dict:
    """Audit a trace against every bound the scheduler must respect.

    Violations are returned as data (count and first offending slot per
    class), never raised: a corrupted or unstable run is a result to
    report, not an error to hide.
    """
    report = {}
    horizon = int(np.asarray(trace.t).size)
    if horizon == 0:
        report["total"] = 0
        return report

    q_cap = cfg.V + cfg.a_max_bits
    s_cap = cfg.V + cfg.a_max_bits + cfg.c_max_bits
    theta = compute_theta(cfg.V, cfg.a_max_bits, cfg.c_max_bits,
                          cfg.e_min, cfg.p_max, cfg.slot_T)

    _audit(report, "device_backlog_bound",
           trace.Q > q_cap * (1 + _REL))
    # AP-side stability is a property of the backlog-aware transmission
    # rule; the blind rules can and do overflow S, which criterion audits
    # read from the trace directly instead
    if trace.algo in BACKLOG_AWARE:
        _audit(report, "ap_backlog_bound",
               trace.S > s_cap * (1 + _REL))
        _audit(report, "backlog_gap_bound",
               trace.S - trace.Q > 2 * cfg.c_max_bits * (1 + _REL))

    # battery draws must be covered by the previous charge plus this
    # slot's harvest; the first slot starts from an empty battery
    E_prev = np.vstack([np.zeros(cfg.n), trace.E[:-1]])
    avail = E_prev + trace.harvested
    _audit(report, "energy_availability",
           trace.e > avail + _REL * (1.0 + avail))
    power_cap = cfg.p_max * trace.mu * cfg.slot_T
    _audit(report, "transmit_power_cap",
           (trace.e > power_cap + _REL * (1.0 + power_cap))
           & cfg.is_type2[None, :])
    _audit(report, "battery_range",
           (trace.E < -1e-12) | (trace.E > theta * (1 + _REL)))
    _audit(report, "airtime_budget",
           trace.mu0 + trace.mu.sum(axis=1) > 1.0 + 1e-9)

    env = Environment(cfg, seed=trace.seed, horizon=horizon)
    _audit(report, "admission_cap",
           (trace.a > env.A[:horizon] * (1 + _REL) + 1e-12)
           | (trace.a < 0))

    if np.all(np.isfinite(trace.q_hat)):
        stale = trace.Q - trace.q_hat
        cap = cfg.m * cfg.a_max_bits
        _audit(report, "feedback_staleness",
               (stale < -1e-9) | (stale > cap * (1 + _REL)))

    report["total"] = sum(v["count"] for k, v in report.items()
                          if isinstance(v, dict))
    return report
