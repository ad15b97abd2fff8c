"""End-to-end experiment driver: run algorithms, sweep grids, write CSVs.

Output is deterministic given (config, algorithm, seed): the same inputs
produce byte-identical CSV files.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

import numpy as np

from . import baselines, scheduler
from .config import ALGORITHMS, ON_FAMILY, ConfigError
from .env import Environment
from .metrics import RunSummary, summarize

SUMMARY_FIELDS = ("algo", "V", "eps_s", "m", "seed", "avg_delivered",
                  "avg_admitted", "avg_utility", "jain_all", "jain_t1",
                  "jain_t2", "avg_Q_mean", "avg_S_mean", "violations")

TRACE_FIELDS = ("t", "device", "Q", "S", "E", "a", "c_delivered", "e",
                "mu", "harvested", "mu0", "in_Mt", "Q_hat")

# refuse sweeps bigger than this many runs
MAX_SWEEP_RUNS = 10_000

_SWEEP_KEYS = ("algo", "V", "eps_s", "m")


@dataclass
class Trace:
    """Stacked per-slot records for one run; arrays are (horizon, n)
    except t and mu0 which are (horizon,)."""

    algo: str
    seed: int
    t: np.ndarray
    mu0: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    E: np.ndarray
    a: np.ndarray
    c_delivered: np.ndarray
    e: np.ndarray
    mu: np.ndarray
    harvested: np.ndarray
    in_mt: np.ndarray
    q_hat: np.ndarray


def _stack(records, algo, seed, n):
    def col(name, width):
        if not records:
            return np.zeros((0,) if width == 1 else (0, width))
        return np.array([getattr(r, name) for r in records])

    return Trace(
        algo=algo, seed=seed,
        t=col("t", 1), mu0=col("mu0", 1),
        Q=col("Q", n), S=col("S", n), E=col("E", n), a=col("a", n),
        c_delivered=col("c_delivered", n), e=col("e", n), mu=col("mu", n),
        harvested=col("harvested", n), in_mt=col("in_mt", n),
        q_hat=col("q_hat", n),
    )


def run(cfg, algo, seed=None):
    """Simulate one full horizon; returns (Trace, RunSummary)."""
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}, "
                          f"choose from {ALGORITHMS}")
    env = Environment(cfg, seed=seed)
    state = scheduler.SystemState.initial(cfg.n)
    fb = scheduler.FeedbackState.initial(cfg.n, cfg.m)

    records = []
    for t in range(env.horizon):
        slot = env.slot(t)
        if algo == "ers-rn":
            _, state, rec = scheduler.step_ers_rn(state, slot, cfg)
        elif algo == "ers-on":
            _, state, fb, rec = scheduler.step_ers_on(state, slot, fb, cfg)
        elif algo == "hdo-on":
            _, state, fb, rec = baselines.step_hdo_on(state, slot, fb, cfg)
        elif algo == "eot-on":
            _, state, fb, rec = baselines.step_eot_on(state, slot, fb, cfg)
        elif algo == "pfn":
            _, state, rec = baselines.step_pfn(state, slot, cfg)
        else:
            _, state, rec = baselines.step_gan(state, slot, cfg)
        records.append(rec)

    trace = _stack(records, algo, env.seed, cfg.n)
    return trace, summarize(trace, cfg)


def _expand(cfg, grid, algo):
    for key in grid:
        if key not in _SWEEP_KEYS:
            raise ConfigError(f"unknown sweep key {key!r}, "
                              f"choose from {_SWEEP_KEYS}")
    algos = list(grid.get("algo", [algo]))
    Vs = [float(v) for v in grid.get("V", [cfg.V])]
    epss = [float(v) for v in grid.get("eps_s", [cfg.eps_s])]
    ms = [int(v) for v in grid.get("m", [cfg.m])]
    return list(itertools.product(algos, Vs, epss, ms))


def sweep(cfg, grid, seeds, algo="ers-on", trace_dir=None):
    """Run every grid point across every seed; returns RunSummary rows
    sorted by (algo, V, eps_s, m, seed).

    grid maps a subset of {algo, V, eps_s, m} to value lists; missing
    keys take the config (or `algo` argument) value. With trace_dir set,
    per-run traces are written as trace_<algo>_<seed>.csv, which only
    works when no two runs would share a file name.
    """
    seeds = list(seeds)
    combos = _expand(cfg, grid, algo)
    count = len(combos) * len(seeds)
    if count > MAX_SWEEP_RUNS:
        raise ConfigError(f"sweep would launch {count} runs, "
                          f"limit is {MAX_SWEEP_RUNS}")
    if trace_dir is not None:
        names = [(a, s) for a, _, _, _ in combos for s in seeds]
        if len(set(names)) != len(names):
            raise ConfigError("trace files are named by (algo, seed); this "
                              "sweep repeats a pair, refusing to overwrite")

    rows = []
    for algo_v, V, eps_s, m in combos:
        run_cfg = cfg.replaced(V=V, eps_s=eps_s, m=m)
        for seed in seeds:
            trace, summ = run(run_cfg, algo_v, seed)
            rows.append(summ)
            if trace_dir is not None:
                trace_csv(trace, os.path.join(
                    trace_dir, f"trace_{algo_v}_{seed}.csv"))
    rows.sort(key=lambda r: (r.algo, r.V, r.eps_s, r.m, r.seed))
    return rows


def seed_mean(rows):
    """Aggregate RunSummary rows over seeds.

    Returns a list of dicts, one per (algo, V, eps_s, m) point in sorted
    order, with seed-averaged metric fields and the seed count.
    """
    groups = {}
    for r in rows:
        groups.setdefault((r.algo, r.V, r.eps_s, r.m), []).append(r)
    out = []
    for key in sorted(groups):
        rs = groups[key]
        agg = {"algo": key[0], "V": key[1], "eps_s": key[2], "m": key[3],
               "seeds": len(rs)}
        for name in ("avg_delivered", "avg_admitted", "avg_utility",
                     "jain_all", "jain_t1", "jain_t2",
                     "avg_Q_mean", "avg_S_mean"):
            agg[name] = float(np.mean([getattr(r, name) for r in rs]))
        agg["violations"] = int(sum(r.violations for r in rs))
        out.append(agg)
    return out


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.9g}"


def summary_csv(rows, path):
    """Write RunSummary rows to CSV with a fixed header and %.9g floats."""
    lines = [",".join(SUMMARY_FIELDS)]
    for r in rows:
        vals = (r.algo, r.V, r.eps_s, int(r.m), int(r.seed),
                r.avg_delivered, r.avg_admitted, r.avg_utility,
                r.jain_all, r.jain_t1, r.jain_t2,
                r.avg_Q_mean, r.avg_S_mean, int(r.violations))
        lines.append(",".join(v if isinstance(v, str) else _fmt(v)
                              for v in vals))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def trace_csv(trace, path):
    """Write one row per (slot, device) with the fixed trace header."""
    lines = [",".join(TRACE_FIELDS)]
    horizon = trace.t.shape[0]
    n = trace.Q.shape[1] if horizon else 0
    for t in range(horizon):
        for i in range(n):
            vals = (int(trace.t[t]), i, trace.Q[t, i], trace.S[t, i],
                    trace.E[t, i], trace.a[t, i], trace.c_delivered[t, i],
                    trace.e[t, i], trace.mu[t, i], trace.harvested[t, i],
                    trace.mu0[t], bool(trace.in_mt[t, i]),
                    trace.q_hat[t, i])
            lines.append(",".join(_fmt(v) for v in vals))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
