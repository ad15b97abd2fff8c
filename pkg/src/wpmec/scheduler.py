"""Per-slot scheduling under fresh or outdated queue knowledge.

One step observes the slot's channel and traffic, decides the charging
share mu0, per-device airtime mu and battery draws e, executes the
physics, and advances queues, batteries and (when feedback is in play)
the AP-side backlog copies. All steps are pure: state in, state out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .model import (
    harvested_energy,
    offload_bits,
    type1_power,
    update_ap_queue,
    update_battery,
    update_device_queue,
)
from .solver import (LN2, AllocationInstance, optimal_collection, prune,
                     solve_joint)

# fraction of the frame never handed out as floors, so the allocation
# program keeps a strictly feasible interior
_FLOOR_HEADROOM = 0.01
# payload airtime below this is a preamble-only allocation (under one bit)
_PAYLOAD_DUST = 1e-6


def compute_theta(V, A_max, c_max, e_min, P_max, T):
    """Battery capacity that makes the energy-availability rule self-enforcing.

    Scales with V: larger utility emphasis needs a deeper reserve so a
    scheduled device always holds at least one slot's worth of peak energy.
    """
    if e_min <= 0:
        raise ConfigError("e_min must be positive to size the battery")
    return (V + A_max) * c_max / e_min + P_max * T


@dataclass
class SystemState:
    """Queues and batteries, one entry per device. Batteries of devices
    without storage stay at zero throughout."""

    Q: np.ndarray
    S: np.ndarray
    E: np.ndarray

    @classmethod
    def initial(cls, n):
        return cls(Q=np.zeros(n), S=np.zeros(n), E=np.zeros(n))


@dataclass
class FeedbackState:
    """AP-side bookkeeping: last reported backlog and its age per device.

    A device whose report is m or more slots old is due for compulsory
    feedback. q_hat equals the device's true post-slot backlog at the slot
    it last transmitted.
    """

    q_hat: np.ndarray
    tau: np.ndarray
    m: int

    @property
    def due(self):
        return self.tau >= self.m

    @classmethod
    def initial(cls, n, m):
        return cls(q_hat=np.zeros(n), tau=np.zeros(n, dtype=int), m=int(m))


@dataclass
class SlotDecision:
    """Everything the scheduler chose (or implied) for one slot."""

    mu0: float
    mu: np.ndarray           # airtime share per device, feedback included
    e: np.ndarray            # Joules radiated per device
    a: np.ndarray            # bits admitted at the device
    c_cap: np.ndarray        # uplink data capacity, bits
    c_delivered: np.ndarray  # real bits shipped to the AP, min(c_cap, Q)
    harvested: np.ndarray    # Joules captured from the charging phase
    in_mt: np.ndarray        # compulsory-feedback flags
    transmitted: np.ndarray  # any airtime at all this slot


@dataclass
class TraceRecord:
    """Post-slot snapshot plus the decision quantities, arrays per device."""

    t: int
    Q: np.ndarray
    S: np.ndarray
    E: np.ndarray
    a: np.ndarray
    c_delivered: np.ndarray
    e: np.ndarray
    mu: np.ndarray
    harvested: np.ndarray
    mu0: float
    in_mt: np.ndarray
    q_hat: np.ndarray


def feedback_update(fb: FeedbackState, transmitted, true_Q) -> FeedbackState:
    """Advance the AP's copies after a slot: transmitters report their
    post-slot backlog and reset their age, everyone else ages one slot."""
    mask = np.zeros(fb.tau.size, dtype=bool)
    transmitted = np.asarray(transmitted)
    if transmitted.dtype == bool:
        mask = transmitted
    else:
        mask[transmitted] = True
    q_hat = np.where(mask, np.asarray(true_Q, dtype=float), fb.q_hat)
    tau = np.where(mask, 0, fb.tau + 1)
    return FeedbackState(q_hat=q_hat, tau=tau, m=fb.m)


def _reserve(cfg):
    # energy-dimensioned perturbation: one slot of peak transmit energy
    return cfg.p_max * cfg.slot_T


def _admit_due(fb, eps):
    """Compulsory-feedback admission: most overdue first, frame capacity 1.

    At large eps more devices can be due than the frame fits; the rest are
    deferred and, staying most-overdue, rotate in over the next slots.
    """
    n = fb.tau.size
    in_mt = np.zeros(n, dtype=bool)
    due_idx = np.flatnonzero(fb.due)
    order = due_idx[np.lexsort((due_idx, -fb.tau[due_idx]))]
    admitted = 0
    for i in order:
        if (admitted + 1) * eps <= 1.0:
            in_mt[i] = True
            admitted += 1
    return in_mt


def _admit_scheduled(cand, priority, eps, budget):
    """Floor-fitting admission for schedulable devices, best priority first.

    Keeps a headroom fraction of the frame free so the allocation program
    retains a strict interior. With zero floors everyone fits.
    """
    if cand.size == 0:
        return cand
    if eps <= 0.0:
        return np.sort(cand)
    order = cand[np.lexsort((cand, -priority))]
    limit = budget - _FLOOR_HEADROOM
    admitted = []
    used = 0.0
    for i in order:
        if used + eps <= limit:
            admitted.append(i)
            used += eps
    return np.sort(np.asarray(admitted, dtype=int))


def _payload_objective(inst_kw, eps, res):
    """Drift value of a solution counting only payload airtime.

    The allocation program values the full share mu_i (the feedback bits
    ride inside it), but execution ships data over mu_i - eps only. When
    choosing WHICH devices to schedule, the preamble must not be counted
    as if it carried data, or a saturated frame of pure preambles looks
    attractive. Solver sign convention: smaller is better.
    """
    obj = inst_kw["wpt_coeff"] * res.mu0
    d1 = inst_kw["d1"]
    if d1.size:
        mu1 = np.maximum(res.mu1, 1e-300)
        pay1 = np.maximum(res.mu1 - eps, 0.0)
        obj += float(d1 @ (pay1 * np.log1p(inst_kw["delta"] * res.mu0 / mu1))) / LN2
    if "d2" in inst_kw:
        mu2 = np.maximum(res.mu2, 1e-300)
        pay2 = np.maximum(res.mu2 - eps, 0.0)
        obj += float(inst_kw["d2"] @ (pay2 * np.log1p(inst_kw["beta"] * res.e2 / mu2))) / LN2
        obj += float(inst_kw["e_price"] @ res.e2)
    return obj


def _execute(state, slot, cfg, mu0, mu, e_draw, data_mu, battery_mask):
    """Run one slot of physics for an already-decided allocation.

    Devices outside battery_mask spend their fresh harvest the instant
    they transmit; battery devices draw e_draw. Returns the decision
    bundle and the successor state.
    """
    T = cfg.slot_T
    harvest = harvested_energy(cfg.harvest_eff, cfg.ap_power_P0, slot.h,
                               mu0, T, cfg.e_h_max)
    tx = mu > 0

    P = np.zeros(cfg.n)
    e_spent = np.zeros(cfg.n)
    inst = tx & ~battery_mask
    if np.any(inst):
        P[inst] = type1_power(harvest[inst], mu[inst], T, cfg.eta)
        e_spent[inst] = cfg.eta * harvest[inst]
    bat = tx & battery_mask
    if np.any(bat):
        # solver output can overshoot its rows by float noise only
        cap = cfg.p_max * mu[bat] * T
        avail = state.E[bat] + harvest[bat]
        draw = e_draw[bat]
        if np.any(draw > cap + 1e-9 * (1.0 + cap)) or \
           np.any(draw > avail + 1e-9 * (1.0 + avail)):
            raise AssertionError("battery draw exceeds its power or "
                                 "availability limit beyond solver slack")
        draw = np.minimum(draw, np.minimum(cap, avail))
        e_spent[bat] = draw
        P[bat] = draw / (mu[bat] * T)

    c_cap = offload_bits(data_mu, T, cfg.bandwidth_W, P, slot.h,
                         cfg.noise_N0, cfg.c_max_bits)
    c_delivered = np.minimum(c_cap, state.Q)
    a = optimal_collection(state.Q, slot.A, cfg.V)

    theta = compute_theta(cfg.V, cfg.a_max_bits, cfg.c_max_bits,
                          cfg.e_min, cfg.p_max, T)
    E_new = state.E.copy()
    if np.any(battery_mask):
        bm = battery_mask
        E_new[bm] = update_battery(state.E[bm], harvest[bm],
                                   e_spent[bm], theta)

    new_state = SystemState(
        Q=update_device_queue(state.Q, c_cap, a),
        S=update_ap_queue(state.S, slot.r, c_cap, state.Q),
        E=E_new,
    )
    decision = SlotDecision(
        mu0=float(mu0), mu=mu, e=e_spent, a=a, c_cap=c_cap,
        c_delivered=c_delivered, harvested=harvest, in_mt=np.zeros(cfg.n, bool),
        transmitted=tx.copy(),
    )
    return decision, new_state


def _feedback_energy(cfg, h, E, harvest):
    """Battery draw for a compulsory feedback burst of L bits over eps."""
    eps = cfg.eps_frac
    l_bits = cfg.feedback_bits_L / (eps * cfg.slot_T * cfg.bandwidth_W)
    beta = h / (cfg.noise_N0 * cfg.slot_T)
    need = (eps / beta) * (2.0 ** l_bits - 1.0)
    return np.minimum(need, np.minimum(E + harvest,
                                       cfg.p_max * eps * cfg.slot_T))


def _step_drift(state, slot, fb, cfg, equal_mu=False, all_type1=False):
    """Shared drift-plus-penalty step.

    fb=None runs with fresh queue knowledge (no feedback machinery).
    all_type1 treats every device as harvest-and-spend with frozen
    batteries; equal_mu forces one common airtime share on the scheduled
    set.
    """
    n = cfg.n
    T, W = cfg.slot_T, cfg.bandwidth_W
    reserve = _reserve(cfg)
    eps = cfg.eps_frac if fb is not None else 0.0
    battery_mask = np.zeros(n, bool) if all_type1 else cfg.is_type2.copy()

    if fb is not None:
        q_known = fb.q_hat
        in_mt = _admit_due(fb, eps)
        budget = 1.0 - float(np.sum(in_mt)) * eps
    else:
        q_known = state.Q
        in_mt = np.zeros(n, bool)
        budget = 1.0

    pruned, cand1, cand2 = prune(q_known, state.S, cfg.is_type2)
    cand = np.concatenate([cand1, cand2])
    cand = cand[~in_mt[cand]]
    sched = _admit_scheduled(cand, q_known[cand] - state.S[cand], eps, budget)

    sched_bat = sched[battery_mask[sched]]
    sched_ins = sched[~battery_mask[sched]]

    # charging credit counts every storage battery, scheduled or not
    if np.any(battery_mask):
        wpt_coeff = float(T * cfg.ap_power_P0 * cfg.harvest_eff *
                          np.sum((state.E[battery_mask] - reserve) *
                                 slot.h[battery_mask]))
    else:
        wpt_coeff = 0.0

    mu = np.zeros(n)
    e_draw = np.zeros(n)
    if sched.size > 0 and budget > 0.0:
        weight = (q_known - state.S) * T * W

        def attempt(ins, bat, tol):
            kw = dict(
                d1=-weight[ins],
                delta=cfg.eta * cfg.harvest_eff * cfg.ap_power_P0 *
                slot.h[ins] ** 2 / cfg.noise_N0,
                floors1=np.full(ins.size, eps),
                wpt_coeff=wpt_coeff,
                budget=budget,
                equal_mu=equal_mu,
            )
            if bat.size:
                kw.update(
                    d2=-weight[bat],
                    beta=slot.h[bat] / (cfg.noise_N0 * T),
                    e_price=reserve - state.E[bat],
                    e_cap=np.full(bat.size, reserve),
                    floors2=np.full(bat.size, eps),
                    e_avail=state.E[bat],
                    harvest_slope=cfg.harvest_eff * cfg.ap_power_P0 * T *
                    slot.h[bat],
                    harvest_cap=np.full(bat.size, cfg.e_h_max),
                )
            return kw, solve_joint(AllocationInstance(**kw), tol=tol)

        inst_kw, res = attempt(sched_ins, sched_bat, cfg.solver_tol)
        if eps > 0.0 and not equal_mu:
            # preamble floors make scheduling a device cost airtime even
            # when its payload lands at zero; shrink the scheduled set
            # while that improves the payload-only drift value
            value = _payload_objective(inst_kw, eps, res)
            for _ in range(3):
                keep1 = (res.mu1 - eps) > _PAYLOAD_DUST
                keep2 = (res.mu2 - eps) > _PAYLOAD_DUST
                if np.all(keep1) and np.all(keep2):
                    break
                ins2 = sched_ins[keep1]
                bat2 = sched_bat[keep2]
                if ins2.size + bat2.size == 0:
                    top = sched[np.argmax(q_known[sched] - state.S[sched])]
                    one = np.array([top], dtype=int)
                    none = np.zeros(0, dtype=int)
                    ins2, bat2 = (none, one) if battery_mask[top] \
                        else (one, none)
                kw2, res2 = attempt(ins2, bat2, cfg.solver_tol)
                value2 = _payload_objective(kw2, eps, res2)
                if value2 < value - 1e-12 * (1.0 + abs(value)):
                    sched_ins, sched_bat = ins2, bat2
                    inst_kw, res, value = kw2, res2, value2
                else:
                    break
        mu0 = res.mu0
        mu[sched_ins] = res.mu1
        mu[sched_bat] = res.mu2
        e_draw[sched_bat] = res.e2
    else:
        mu0 = budget if (wpt_coeff < 0.0 and budget > 0.0) else 0.0

    mu[in_mt] = eps
    if np.any(in_mt & battery_mask):
        fbk = in_mt & battery_mask
        harvest = harvested_energy(cfg.harvest_eff, cfg.ap_power_P0,
                                   slot.h[fbk], mu0, T, cfg.e_h_max)
        e_draw[fbk] = _feedback_energy(cfg, slot.h[fbk], state.E[fbk],
                                       harvest)

    total = mu0 + float(np.sum(mu))
    if total > 1.0 + 1e-9:
        raise AssertionError(f"frame overcommitted: {total:.12f} > 1")

    # feedback airtime carries no payload; scheduled devices ship data
    # over what remains of their share
    data_mu = np.where(in_mt, 0.0, np.maximum(mu - eps, 0.0))
    decision, new_state = _execute(state, slot, cfg, mu0, mu, e_draw,
                                   data_mu, battery_mask)
    decision.in_mt = in_mt

    if fb is None:
        record = TraceRecord(
            t=slot.t, Q=new_state.Q, S=new_state.S, E=new_state.E,
            a=decision.a, c_delivered=decision.c_delivered, e=decision.e,
            mu=mu, harvested=decision.harvested, mu0=float(mu0),
            in_mt=in_mt, q_hat=new_state.Q.copy(),
        )
        return decision, new_state, record

    fb_new = feedback_update(fb, decision.transmitted, new_state.Q)
    record = TraceRecord(
        t=slot.t, Q=new_state.Q, S=new_state.S, E=new_state.E,
        a=decision.a, c_delivered=decision.c_delivered, e=decision.e,
        mu=mu, harvested=decision.harvested, mu0=float(mu0),
        in_mt=in_mt, q_hat=fb_new.q_hat.copy(),
    )
    return decision, new_state, fb_new, record


def step_ers_rn(state, slot, cfg):
    """One slot with fresh queue knowledge: prune on true backlogs, solve
    the joint charging/airtime/energy program, execute, advance."""
    return _step_drift(state, slot, None, cfg)


def step_ers_on(state, slot, fb, cfg):
    """One slot under outdated knowledge: prune on reported backlogs,
    reserve compulsory feedback airtime, solve over the rest."""
    return _step_drift(state, slot, fb, cfg)
