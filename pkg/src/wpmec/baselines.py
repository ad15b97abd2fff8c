"""Benchmark schedulers for comparison runs.

Two reuse the drift machinery with a twist (batteries ignored, or one
common airtime share); two are queue-blind per-slot programs solved by
the same barrier method. All share the physics executor, so feasibility
rules are identical across algorithms.
"""

from __future__ import annotations

import numpy as np

from .scheduler import TraceRecord, _execute, _reserve, _step_drift
from .solver import AllocationInstance, solve_joint


def step_hdo_on(state, slot, fb, cfg):
    """Outdated-knowledge step that treats every device as harvest-and-
    spend: no battery terms, harvest used the instant it transmits,
    stored charge frozen."""
    return _step_drift(state, slot, fb, cfg, all_type1=True)


def step_eot_on(state, slot, fb, cfg):
    """Outdated-knowledge step giving every scheduled device the same
    airtime share; charging and battery draws are still optimized."""
    return _step_drift(state, slot, fb, cfg, equal_mu=True)


def _step_blind(state, slot, cfg, proportional):
    """Queue-blind step: every device competes, no floors, no feedback.

    Batteries evolve physically but carry no scheduling weight; energy
    draws are chosen by the rate objective alone within the availability
    and power rows.
    """
    n = cfg.n
    T, W = cfg.slot_T, cfg.bandwidth_W
    reserve = _reserve(cfg)
    t2 = cfg.is_type2
    idx1 = np.flatnonzero(~t2)
    idx2 = np.flatnonzero(t2)

    rate_w = 0.0 if proportional else -T * W
    inst = AllocationInstance(
        d1=np.full(idx1.size, rate_w),
        delta=cfg.eta * cfg.harvest_eff * cfg.ap_power_P0 *
        slot.h[idx1] ** 2 / cfg.noise_N0,
        floors1=np.zeros(idx1.size),
        d2=np.full(idx2.size, rate_w),
        beta=slot.h[idx2] / (cfg.noise_N0 * T),
        e_price=np.zeros(idx2.size),
        e_cap=np.full(idx2.size, reserve),
        floors2=np.zeros(idx2.size),
        e_avail=state.E[idx2],
        harvest_slope=cfg.harvest_eff * cfg.ap_power_P0 * T * slot.h[idx2],
        harvest_cap=np.full(idx2.size, cfg.e_h_max),
        budget=1.0,
        proportional=proportional,
        tw=T * W,
    )
    res = solve_joint(inst, tol=cfg.solver_tol)
    mu = np.zeros(n)
    e_draw = np.zeros(n)
    mu[idx1] = res.mu1
    mu[idx2] = res.mu2
    e_draw[idx2] = res.e2

    decision, new_state = _execute(state, slot, cfg, res.mu0, mu, e_draw,
                                   mu, t2.copy())
    record = TraceRecord(
        t=slot.t, Q=new_state.Q, S=new_state.S, E=new_state.E,
        a=decision.a, c_delivered=decision.c_delivered, e=decision.e,
        mu=mu, harvested=decision.harvested, mu0=float(res.mu0),
        in_mt=decision.in_mt, q_hat=np.full(n, np.nan),
    )
    return decision, new_state, record


def step_pfn(state, slot, cfg):
    """Proportional-fair step: maximize the sum of log(1 + bits) with no
    queue knowledge; devices still run local collection."""
    return _step_blind(state, slot, cfg, proportional=True)


def step_gan(state, slot, cfg):
    """Greedy step: maximize raw summed capacity, fairness and queues
    ignored."""
    return _step_blind(state, slot, cfg, proportional=False)
