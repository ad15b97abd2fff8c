"""Single-slot physics: harvesting, offload capacity, queue and battery laws.

Pure functions over scalars or aligned arrays. Time fractions (mu0, mu) are
dimensionless shares of one slot; energies are Joules, data is bits.
"""

from __future__ import annotations

import numpy as np


def harvested_energy(xi, P0, h, mu0, T, e_h_max):
    """Energy captured from the downlink power signal during mu0 of a slot.

    Saturates at the harvester ceiling e_h_max.
    """
    e = xi * P0 * np.asarray(h, dtype=float) * mu0 * T
    return np.minimum(e, e_h_max)


def offload_bits(mu, T, W, P, h, N0, c_max):
    """Bits deliverable over a mu-fraction uplink at transmit power P.

    Zero when the device is silent; saturates at the per-slot ceiling c_max.
    """
    mu = np.asarray(mu, dtype=float)
    P = np.asarray(P, dtype=float)
    snr = P * np.asarray(h, dtype=float) / N0
    with np.errstate(invalid="ignore"):
        bits = np.where(mu > 0, mu * T * W * np.log2(1.0 + snr), 0.0)
    out = np.minimum(bits, c_max)
    return float(out) if out.ndim == 0 else out


def type1_power(e_avail, mu, T, eta=1.0):
    """Transmit power of a harvest-and-spend device: exhaust e_avail over mu.

    Silent devices (mu = 0) transmit at zero power and waste the harvest.
    """
    mu = np.asarray(mu, dtype=float)
    e_avail = np.asarray(e_avail, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        P = np.where(mu > 0, eta * e_avail / (mu * T), 0.0)
    return float(P) if P.ndim == 0 else P


def update_device_queue(Q, c, a):
    """Local backlog law: drain what the uplink could carry, add admissions."""
    return np.maximum(np.asarray(Q, dtype=float) - c, 0.0) + a


def update_ap_queue(S, r, c, Q):
    """AP-side backlog: serve r, then receive the actually-shipped bits.

    Only min(c, Q) real bits arrive; capacity beyond the local backlog is
    spent on padding and never enters S.
    """
    shipped = np.minimum(c, Q)
    return np.maximum(np.asarray(S, dtype=float) - r, 0.0) + shipped


def update_battery(E, e_harv, e_spent, theta):
    """Battery law: store the harvest up to capacity theta, then draw e_spent.

    Spending more than what is available (stored plus fresh harvest) is a
    scheduler bug, not a modeling outcome, so it fails hard.
    """
    E = np.asarray(E, dtype=float)
    avail = E + e_harv
    if np.any(e_spent > avail + 1e-12):
        worst = float(np.max(e_spent - avail))
        raise AssertionError(
            f"energy availability violated: draw exceeds stored+harvest "
            f"by {worst:.3e} J")
    out = np.minimum(avail, theta) - e_spent
    # capped storage can make the draw exceed the post-cap level; physical
    # charge cannot go negative, and the availability check above already
    # guarantees the draw was covered by real energy
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out
