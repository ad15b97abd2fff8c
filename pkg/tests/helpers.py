"""Random problem generators shared by the solver tests.

Parameter ranges bracket what the per-slot schedulers actually build from
the default network (channel gains across the distance roster, backlog
weights up to the queue bounds, battery prices around the one-slot energy
reserve), with some margin on both ends.
"""

import numpy as np

from wpmec.solver import AllocationInstance

# one slot of peak transmit energy, the scheduler's e_cap
E_CAP = 0.1


def _weights(rng, k):
    d = -(10.0 ** rng.uniform(0.0, 9.3, k))
    d[rng.random(k) < 0.15] = 0.0
    return d


def _family1(rng, k):
    return dict(
        d1=_weights(rng, k),
        delta=10.0 ** rng.uniform(-6.5, 2.6, k),
        floors1=np.zeros(k),
    )


def _family2(rng, k, avail=True):
    out = dict(
        d2=_weights(rng, k),
        beta=10.0 ** rng.uniform(-1.0, 6.7, k),
        e_price=rng.uniform(-0.08, 0.15, k),
        e_cap=np.full(k, E_CAP),
        floors2=np.zeros(k),
    )
    if avail:
        out["e_avail"] = 10.0 ** rng.uniform(-7.0, -0.7, k)
        out["harvest_slope"] = 10.0 ** rng.uniform(-7.0, -3.0, k)
        out["harvest_cap"] = np.full(k, 1.6e-4)
    return out


def make_instance(rng, n1=0, n2=0, equal_mu=False, proportional=False,
                  floors=False, avail=True):
    """One random slot program with the requested shape."""
    kw = dict(budget=rng.uniform(0.3, 1.0),
              wpt_coeff=rng.uniform(-2e-4, 5e-5),
              equal_mu=equal_mu, proportional=proportional)
    if n1:
        kw.update(_family1(rng, n1))
    if n2:
        kw.update(_family2(rng, n2, avail=avail))
    if proportional:
        kw["tw"] = 2e4
        kw["wpt_coeff"] = 0.0
        if n2:
            kw["e_price"] = np.zeros(n2)
    if floors and not equal_mu:
        eps = rng.uniform(0.01, 0.08)
        if n1:
            kw["floors1"] = np.where(rng.random(n1) < 0.5, eps, 0.0)
        if n2:
            kw["floors2"] = np.where(rng.random(n2) < 0.5, eps, 0.0)
    return AllocationInstance(**kw)


# every shape with at most two devices that the grid oracle accepts
ORACLE_SHAPES = (
    dict(n1=1),
    dict(n1=2),
    dict(n2=1),
    dict(n1=1, n2=1, equal_mu=True),
    dict(n2=2, equal_mu=True),
    dict(n1=2, equal_mu=True),
    dict(n1=1, proportional=True),
    dict(n1=2, proportional=True),
    dict(n2=1, proportional=True),
)


def oracle_instance(rng):
    """Random ≤2-device instance solvable by the brute-force oracle."""
    shape = ORACLE_SHAPES[rng.integers(len(ORACLE_SHAPES))]
    return make_instance(rng, floors=bool(rng.random() < 0.3), **shape)
