"""Command line front end: single runs and parameter sweeps to CSV."""

from __future__ import annotations

import argparse
import os
import sys

from .config import ALGORITHMS, ConfigError, default_config, load_config
from .harness import seed_mean, summary_csv, sweep

_KEY_PARSERS = {"algo": str, "V": float, "eps_s": float, "m": int}


def build_parser():
    p = argparse.ArgumentParser(
        prog="wpmec",
        description="Simulate online scheduling for a wireless-powered "
                    "edge network and write summary CSVs.")
    p.add_argument("--config", metavar="PATH",
                   help="INI file overriding the built-in defaults")
    p.add_argument("--algo", default="ers-on", choices=ALGORITHMS,
                   help="algorithm for non-swept runs (default ers-on)")
    p.add_argument("--seed", type=int, default=None,
                   help="first seed (default from config)")
    p.add_argument("--slots", type=int, default=None, metavar="N",
                   help="override the horizon length")
    p.add_argument("--sweep", action="append", default=[], metavar="K=V1,V2",
                   help="sweep a key over comma separated values; "
                        "repeatable, keys: algo V eps_s m")
    p.add_argument("--seeds", type=int, default=1, metavar="N",
                   help="number of consecutive seeds starting at --seed")
    p.add_argument("--out", required=True, metavar="DIR",
                   help="output directory for summary.csv")
    p.add_argument("--trace", action="store_true",
                   help="also write per-slot trace CSVs")
    return p


def parse_sweeps(specs):
    """Turn repeated key=v1,v2 strings into a {key: [values]} grid."""
    grid = {}
    for spec in specs:
        key, sep, rest = spec.partition("=")
        key = key.strip()
        if not sep or key not in _KEY_PARSERS:
            raise ConfigError(f"bad sweep spec {spec!r}, expected "
                              f"key=v1,v2 with key in {tuple(_KEY_PARSERS)}")
        if key in grid:
            raise ConfigError(f"sweep key {key!r} given twice")
        try:
            values = [_KEY_PARSERS[key](v.strip())
                      for v in rest.split(",") if v.strip() != ""]
        except ValueError as exc:
            raise ConfigError(f"bad sweep value in {spec!r}") from exc
        if not values:
            raise ConfigError(f"sweep spec {spec!r} lists no values")
        if key == "algo":
            for v in values:
                if v not in ALGORITHMS:
                    raise ConfigError(f"unknown algorithm {v!r} in sweep")
        grid[key] = values
    return grid


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.slots is not None:
            cfg = cfg.replaced(horizon=args.slots)
        if args.seeds < 1:
            raise ConfigError("--seeds must be at least 1")
        first = cfg.seed if args.seed is None else args.seed
        seeds = [first + i for i in range(args.seeds)]
        grid = parse_sweeps(args.sweep)

        os.makedirs(args.out, exist_ok=True)
        rows = sweep(cfg, grid, seeds, algo=args.algo,
                     trace_dir=args.out if args.trace else None)
        path = summary_csv(rows, os.path.join(args.out, "summary.csv"))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(f"wrote {path} ({len(rows)} runs)")
    for agg in seed_mean(rows):
        print("algo={algo} V={V:g} eps_s={eps_s:g} m={m} seeds={seeds}: "
              "delivered={avg_delivered:.1f} utility={avg_utility:.3f} "
              "jain={jain_all:.3f} violations={violations}".format(**agg))
    return 0
