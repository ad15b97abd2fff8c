"""Per-slot optimization: data collection closed form, backlog pruning, and
a small log-barrier interior-point solver for the joint time/energy program.

The joint program allocates one slot between a downlink charging phase (mu0)
and per-device uplink phases (mu_i), plus the battery energy e_i spent by
storage devices. Objectives are convex: negatively weighted concave rate
terms (weighted mode), or the negative log of delivered bits (proportional
mode). A staged brute-force grid oracle is provided for tests only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LN2 = float(np.log(2.0))

# mu this small with a zero floor is reported as silence (10 ns of airtime)
MU_SNAP = 1e-7
# feasibility slack accepted when validating points (relative)
FEAS_TOL = 1e-9
# largest Newton decrement^2 accepted as a center when progress stalls
_STALL_OK = 4.0
# decrement^2 threshold below which a rung counts as a certified center
_CENTER_TOL = 1e-4
# centering effort for non-certifying rungs (lambda <= 0.2 stays on path)
_COARSE_TOL = 2e-2
# barrier weight growth per rung while the gap target is out of reach
_LADDER = 100.0


class SolverError(RuntimeError):
    """Newton/barrier failure; carries the best iterate for diagnosis."""

    def __init__(self, msg, best=None, residual=None):
        super().__init__(msg)
        self.best = best
        self.residual = residual


class InfeasibleError(ValueError):
    """Constraints admit no strictly interior point."""


def optimal_collection(Q, A, V):
    """Admitted bits maximizing V*log(1+a) - Q*a over [0, A], elementwise.

    Collect everything while the backlog is small (V >= (A+1)Q), otherwise
    stop at the marginal point V/Q - 1, never below zero.
    """
    Q = np.asarray(Q, dtype=float)
    A = np.asarray(A, dtype=float)
    take_all = V >= (A + 1.0) * Q
    safe_q = np.where(Q > 0, Q, 1.0)
    # overflow for subnormal Q is fine: those fall in the take-all branch
    with np.errstate(over="ignore"):
        partial = np.maximum(V / safe_q - 1.0, 0.0)
    a = np.where(take_all, A, partial)
    return float(a) if a.ndim == 0 else a


def prune(q_known, S, is_type2):
    """Split devices into the silenced set and per-type scheduling candidates.

    A device whose known backlog does not exceed the AP-side backlog gains
    nothing from transmitting (served bits would only pad S), so it is
    silenced for the slot.
    """
    q_known = np.asarray(q_known, dtype=float)
    S = np.asarray(S, dtype=float)
    pruned = S >= q_known
    keep = ~pruned
    idx = np.arange(q_known.size)
    sched1 = idx[keep & ~is_type2]
    sched2 = idx[keep & is_type2]
    return pruned, sched1, sched2


@dataclass
class AllocationInstance:
    """One slot's convex program over the scheduled devices.

    Arrays are aligned with the scheduled devices of each family, not with
    the full roster; builders keep the index maps. Weights d1/d2 multiply
    log2-rate terms and must be <= 0. Energy variables exist only for the
    storage family; their per-Joule price is (reserve - E) >= 0 normally.
    """

    # family with rates driven by the shared charging phase
    d1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    delta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    floors1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # family with rates driven by spent battery energy
    d2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    e_price: np.ndarray = field(default_factory=lambda: np.zeros(0))
    e_cap: np.ndarray = field(default_factory=lambda: np.zeros(0))
    floors2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # optional energy availability rows: e <= E + min(slope*mu0, harvest_cap)
    e_avail: np.ndarray | None = None
    harvest_slope: np.ndarray | None = None
    harvest_cap: np.ndarray | None = None

    wpt_coeff: float = 0.0       # linear mu0 term (negative credits charging)
    budget: float = 1.0          # mu0 + sum mu_i <= budget
    equal_mu: bool = False       # all scheduled mu_i equal, consume budget
    proportional: bool = False   # maximize sum log(1 + bits) instead
    tw: float = 0.0              # bits per unit log2-rate (T*W), proportional

    def __post_init__(self):
        for name in ("d1", "delta", "floors1", "d2", "beta", "e_price",
                     "e_cap", "floors2"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.e_avail is not None:
            self.e_avail = np.asarray(self.e_avail, dtype=float)
            self.harvest_slope = np.asarray(self.harvest_slope, dtype=float)
            self.harvest_cap = np.asarray(self.harvest_cap, dtype=float)

    @property
    def n1(self):
        return self.d1.size

    @property
    def n2(self):
        return self.d2.size

    def free_vars(self):
        if self.equal_mu:
            return 1 + self.n2
        return 1 + self.n1 + 2 * self.n2


@dataclass
class AllocationResult:
    mu0: float
    mu1: np.ndarray
    mu2: np.ndarray
    e2: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int


def _check_instance(inst):
    if not (0.0 < inst.budget <= 1.0 + 1e-12):
        raise InfeasibleError(f"budget must be in (0, 1], got {inst.budget}")
    if np.any(inst.d1 > 0) or np.any(inst.d2 > 0):
        raise ValueError("rate weights must be <= 0 for a convex program")
    if np.any(inst.floors1 < 0) or np.any(inst.floors2 < 0):
        raise ValueError("floors must be nonnegative")
    if inst.n2 and np.any(inst.e_cap <= 0):
        raise ValueError("energy caps must be positive")
    floor_sum = float(inst.floors1.sum() + inst.floors2.sum())
    if inst.equal_mu:
        k = inst.n1 + inst.n2
        fmax = float(max(np.max(inst.floors1, initial=0.0),
                         np.max(inst.floors2, initial=0.0)))
        if k and k * fmax >= inst.budget:
            raise InfeasibleError(
                f"equal-share floors {fmax} x {k} do not fit inside "
                f"budget {inst.budget}")
    elif floor_sum >= inst.budget:
        raise InfeasibleError(
            f"floor mass {floor_sum} leaves no interior within "
            f"budget {inst.budget}")
    if inst.proportional and inst.tw <= 0:
        raise ValueError("proportional mode needs tw > 0")


# ---------------------------------------------------------------------------
# objective evaluation (full space): x = [mu0, mu1.., mu2.., etilde..],
# where etilde_j = e_j / e_cap_j so the power-cap row reads etilde <= mu.


def _rate_pieces(mu, z, coef, coef2):
    """value/derivatives of f = mu * ln(1 + coef*z/mu) at mu > 0."""
    u = coef * z
    denom = mu + u
    ln1 = np.log1p(u / mu)
    f = mu * ln1
    fz = coef * mu / denom
    fm = ln1 - u / denom
    inv_d2 = 1.0 / (denom * denom)
    fzz = -coef2 * mu * inv_d2
    fzm = coef2 * z * inv_d2
    fmm = -coef2 * z * z * inv_d2 / mu
    return f, fz, fm, fzz, fzm, fmm


def _rate_value(mu, z, coef):
    u = coef * z
    return mu * np.log1p(u / mu)


class _Objective:
    """Scaled objective with gradient and Hessian over the full variables."""

    def __init__(self, inst, scale):
        self.inst = inst
        self.scale = scale
        self.n1, self.n2 = inst.n1, inst.n2
        self.nvar = 1 + self.n1 + 2 * self.n2
        self.i1 = slice(1, 1 + self.n1)
        self.i2 = slice(1 + self.n1, 1 + self.n1 + self.n2)
        self.ie = slice(1 + self.n1 + self.n2, self.nvar)
        self.idx1 = np.arange(1, 1 + self.n1)
        self.idx2 = np.arange(self.i2.start, self.i2.stop)
        self.idxe = np.arange(self.ie.start, self.ie.stop)
        self.wd1 = inst.d1 / (scale * LN2)
        self.wd2 = inst.d2 / (scale * LN2)
        self.pe = (inst.e_price * inst.e_cap) / scale if self.n2 else np.zeros(0)
        self.w0 = inst.wpt_coeff / scale
        self.btil = inst.beta * inst.e_cap if self.n2 else np.zeros(0)
        self.delta2 = inst.delta * inst.delta
        self.btil2 = self.btil * self.btil

    def value(self, x):
        inst = self.inst
        mu0 = x[0]
        mu1 = x[self.i1]
        mu2 = x[self.i2]
        et = x[self.ie]
        if not inst.proportional:
            f = self.w0 * mu0
            if self.n1:
                f += float(self.wd1 @ _rate_value(mu1, mu0, inst.delta))
            if self.n2:
                f += float(self.wd2 @ _rate_value(mu2, et, self.btil))
                f += float(self.pe @ et)
            return f
        tw = inst.tw / LN2
        f = 0.0
        if self.n1:
            f -= float(np.sum(np.log1p(tw * _rate_value(mu1, mu0, inst.delta))))
        if self.n2:
            f -= float(np.sum(np.log1p(tw * _rate_value(mu2, et, self.btil))))
        return f

    def __call__(self, x):
        inst = self.inst
        mu0 = x[0]
        mu1 = x[self.i1]
        mu2 = x[self.i2]
        et = x[self.ie]
        g = np.zeros(self.nvar)
        H = np.zeros((self.nvar, self.nvar))
        f = 0.0

        if not inst.proportional:
            f = self.w0 * mu0
            g[0] = self.w0
            if self.n1:
                p = _rate_pieces(mu1, mu0, inst.delta, self.delta2)
                f += float(self.wd1 @ p[0])
                g[0] += float(self.wd1 @ p[1])
                g[self.i1] = self.wd1 * p[2]
                H[0, 0] += float(self.wd1 @ p[3])
                d01 = self.wd1 * p[4]
                H[0, self.i1] += d01
                H[self.i1, 0] += d01
                H[self.idx1, self.idx1] += self.wd1 * p[5]
            if self.n2:
                p = _rate_pieces(mu2, et, self.btil, self.btil2)
                f += float(self.wd2 @ p[0]) + float(self.pe @ et)
                g[self.ie] = self.wd2 * p[1] + self.pe
                g[self.i2] = self.wd2 * p[2]
                H[self.idxe, self.idxe] += self.wd2 * p[3]
                H[self.idx2, self.idxe] += self.wd2 * p[4]
                H[self.idxe, self.idx2] += self.wd2 * p[4]
                H[self.idx2, self.idx2] += self.wd2 * p[5]
            return f, g, H

        # proportional: F = -sum ln(1 + tw * f_i / LN2), per-device chain rule
        tw = inst.tw / LN2
        if self.n1:
            fi, fz, fm, fzz, fzm, fmm = _rate_pieces(mu1, mu0, inst.delta,
                                                     self.delta2)
            base = 1.0 + tw * fi
            f += -float(np.sum(np.log(base)))
            c1 = -tw / base
            c2 = (tw / base) ** 2
            g[0] += float(np.sum(c1 * fz))
            g[self.i1] += c1 * fm
            H[0, 0] += float(np.sum(c1 * fzz + c2 * fz * fz))
            cross = c1 * fzm + c2 * fz * fm
            H[0, self.i1] += cross
            H[self.i1, 0] += cross
            H[self.idx1, self.idx1] += c1 * fmm + c2 * fm * fm
        if self.n2:
            fi, fz, fm, fzz, fzm, fmm = _rate_pieces(mu2, et, self.btil,
                                                     self.btil2)
            base = 1.0 + tw * fi
            f += -float(np.sum(np.log(base)))
            c1 = -tw / base
            c2 = (tw / base) ** 2
            g[self.ie] += c1 * fz
            g[self.i2] += c1 * fm
            H[self.idxe, self.idxe] += c1 * fzz + c2 * fz * fz
            cross = c1 * fzm + c2 * fz * fm
            H[self.idx2, self.idxe] += cross
            H[self.idxe, self.idx2] += cross
            H[self.idx2, self.idx2] += c1 * fmm + c2 * fm * fm
        return f, g, H


class _LiftedObjective:
    """Equal-share mode: x = [mu0, etilde..]; mu_i = (budget - mu0) / k."""

    def __init__(self, inst, scale):
        self.full = _Objective(inst, scale)
        k = inst.n1 + inst.n2
        nfull = self.full.nvar
        A = np.zeros((nfull, 1 + inst.n2))
        b = np.zeros(nfull)
        A[0, 0] = 1.0
        A[1:1 + k, 0] = -1.0 / k
        b[1:1 + k] = inst.budget / k
        if inst.n2:
            A[1 + k:, 1:] = np.eye(inst.n2)
        self.A = A
        self.b = b
        self.nvar = 1 + inst.n2

    def value(self, x):
        return self.full.value(self.A @ x + self.b)

    def __call__(self, x):
        y = self.A @ x + self.b
        f, g, H = self.full(y)
        return f, self.A.T @ g, self.A.T @ H @ self.A


# ---------------------------------------------------------------------------
# constraint assembly: rows G x <= g over the reduced variables


def _assemble(inst):
    n1, n2 = inst.n1, inst.n2
    ecap = inst.e_cap
    rows = []
    rhs = []

    if inst.equal_mu:
        nvar = 1 + n2
        k = n1 + n2
        fmax = float(max(np.max(inst.floors1, initial=0.0),
                         np.max(inst.floors2, initial=0.0)))
        r = np.zeros(nvar); r[0] = -1.0
        rows.append(r); rhs.append(0.0)                      # mu0 >= 0
        r = np.zeros(nvar); r[0] = 1.0
        rows.append(r); rhs.append(inst.budget - k * fmax)   # shares >= floor
        for j in range(n2):
            r = np.zeros(nvar); r[1 + j] = -1.0
            rows.append(r); rhs.append(0.0)                  # e >= 0
            r = np.zeros(nvar); r[1 + j] = 1.0; r[0] = 1.0 / k
            rows.append(r); rhs.append(inst.budget / k)      # e <= cap * mu
            if inst.e_avail is not None:
                r = np.zeros(nvar)
                r[1 + j] = ecap[j]; r[0] = -inst.harvest_slope[j]
                rows.append(r); rhs.append(float(inst.e_avail[j]))
                r = np.zeros(nvar); r[1 + j] = ecap[j]
                rows.append(r)
                rhs.append(float(inst.e_avail[j] + inst.harvest_cap[j]))
        return np.array(rows), np.array(rhs)

    nvar = 1 + n1 + 2 * n2
    r = np.zeros(nvar); r[0] = -1.0
    rows.append(r); rhs.append(0.0)                          # mu0 >= 0
    floors = np.concatenate([inst.floors1, inst.floors2])
    for i in range(n1 + n2):
        r = np.zeros(nvar); r[1 + i] = -1.0
        rows.append(r); rhs.append(-float(floors[i]))        # mu >= floor
    r = np.zeros(nvar); r[:1 + n1 + n2] = 1.0
    rows.append(r); rhs.append(float(inst.budget))           # time budget
    for j in range(n2):
        je = 1 + n1 + n2 + j
        jm = 1 + n1 + j
        r = np.zeros(nvar); r[je] = -1.0
        rows.append(r); rhs.append(0.0)                      # e >= 0
        r = np.zeros(nvar); r[je] = 1.0; r[jm] = -1.0
        rows.append(r); rhs.append(0.0)                      # e <= cap * mu
        if inst.e_avail is not None:
            r = np.zeros(nvar)
            r[je] = ecap[j]; r[0] = -inst.harvest_slope[j]
            rows.append(r); rhs.append(float(inst.e_avail[j]))
            r = np.zeros(nvar); r[je] = ecap[j]
            rows.append(r)
            rhs.append(float(inst.e_avail[j] + inst.harvest_cap[j]))
    return np.array(rows), np.array(rhs)


def _interior_start(inst, G, g):
    n1, n2 = inst.n1, inst.n2
    if inst.equal_mu:
        k = n1 + n2
        fmax = float(max(np.max(inst.floors1, initial=0.0),
                         np.max(inst.floors2, initial=0.0)))
        x = np.zeros(1 + n2)
        x[0] = 0.5 * (inst.budget - k * fmax)
        e_slots = [1 + j for j in range(n2)]
    else:
        x = np.zeros(1 + n1 + 2 * n2)
        floors = np.concatenate([inst.floors1, inst.floors2])
        free = inst.budget - float(floors.sum())
        share = free / (n1 + n2 + 2.0)
        x[0] = share
        x[1:1 + n1 + n2] = floors + share
        e_slots = [1 + n1 + n2 + j for j in range(n2)]
    # energy variables start at half their tightest row-implied upper bound
    for je in e_slots:
        ub = np.inf
        for k_row in range(G.shape[0]):
            c = G[k_row, je]
            if c <= 0:
                continue
            other = g[k_row] - (G[k_row] @ x - c * x[je])
            ub = min(ub, other / c)
        x[je] = 0.5 * ub if np.isfinite(ub) else 0.5
    slack = g - G @ x
    if np.any(slack <= 0):
        raise InfeasibleError("no strictly interior starting point")
    return x


def _solve_kkt(H, rhs):
    try:
        d = np.linalg.solve(H, rhs)
        if np.all(np.isfinite(d)):
            return d
    except np.linalg.LinAlgError:
        pass
    # singular or garbage direction: regularize with an escalating ridge
    base = max(float(np.max(np.abs(np.diag(H)))), 1.0)
    ridge = base * 1e-12
    for _ in range(8):
        try:
            d = np.linalg.solve(H + ridge * np.eye(H.shape[0]), rhs)
            if np.all(np.isfinite(d)):
                return d
        except np.linalg.LinAlgError:
            pass
        ridge *= 100.0
    raise SolverError("Newton system unsolvable")


def _center(fobj, G, g, x, t, tol=_CENTER_TOL, max_iter=80):
    """Damped Newton on t*F(x) + barrier; returns (x, inner steps, lam2).

    A Newton decrement lambda with lambda^2 <= 2*tol keeps the iterate
    close enough to the central path for the n_rows/t duality gap to
    hold. Near machine precision, or when the iterate is pinned against
    a constraint active at the optimum (slack ~1e-11 caps the step
    length), the decrement can floor out at O(1) while phi stops
    changing; any lam2 below _STALL_OK is then returned instead of
    failing, and the caller decides whether the rung still certifies.
    The stall test compares progress against the float resolution of
    phi, which grows with t.
    """
    steps = 0
    for _ in range(max_iter):
        s = g - G @ x
        f, gf, Hf = fobj(x)
        inv_s = 1.0 / s
        grad = t * gf + G.T @ inv_s
        H = t * Hf + (G.T * inv_s ** 2) @ G
        d = _solve_kkt(H, -grad)
        # d is finite, so a non-finite decrement flags bad derivatives
        lam2 = float(grad @ -d)
        if not np.isfinite(lam2):
            raise SolverError("non-finite derivatives", best=x)
        steps += 1
        if lam2 <= 2.0 * tol:
            return x, steps, lam2
        Gd = G @ d
        pos = Gd > 0
        amax = float(np.min(s[pos] / Gd[pos])) if pos.any() else np.inf
        alpha = min(1.0, 0.99 * amax)
        phi0 = t * f - float(np.sum(np.log(s)))
        slope = float(grad @ d)
        accepted = False
        for _bt in range(60):
            xn = x + alpha * d
            sn = g - G @ xn
            if sn.min() > 0.0:
                phin = t * fobj.value(xn) - float(np.sum(np.log(sn)))
                if np.isfinite(phin) and phin <= phi0 + 0.25 * alpha * slope:
                    accepted = True
                    break
            alpha *= 0.5
        stalled = accepted and (phi0 - phin) <= 2e-14 * (1.0 + abs(phi0))
        if not accepted or stalled:
            if lam2 < _STALL_OK:
                return x, steps, lam2
            raise SolverError("line search failed", best=x, residual=lam2)
        x = xn
    if lam2 < _STALL_OK:
        return x, steps, lam2
    raise SolverError("Newton did not converge", best=x, residual=lam2)


def _objective_scale(inst):
    vals = [1.0, abs(inst.wpt_coeff)]
    if inst.n1:
        vals.append(float(np.max(np.abs(inst.d1))))
    if inst.n2:
        vals.append(float(np.max(np.abs(inst.d2))))
        vals.append(float(np.max(np.abs(inst.e_price * inst.e_cap))))
    return max(vals)


def solve_joint(inst: AllocationInstance, tol=1e-8) -> AllocationResult:
    """Solve the slot program until the certified optimality gap drops
    below tol*(1+|objective|); kkt_residual reports that relative gap."""
    _check_instance(inst)
    n1, n2 = inst.n1, inst.n2

    if n1 == 0 and n2 == 0:
        # single linear variable: charge the full budget iff it pays
        mu0 = inst.budget if inst.wpt_coeff < 0 else 0.0
        return AllocationResult(
            mu0=mu0, mu1=np.zeros(0), mu2=np.zeros(0), e2=np.zeros(0),
            objective=inst.wpt_coeff * mu0, kkt_residual=0.0, iterations=0)

    scale = _objective_scale(inst)
    fobj = (_LiftedObjective(inst, scale) if inst.equal_mu
            else _Objective(inst, scale))
    G, g = _assemble(inst)
    x = _interior_start(inst, G, g)
    n_rows = G.shape[0]

    # start where the scaled objective and the barrier have comparable
    # weight; earlier rungs would only polish the analytic center
    f0 = abs(fobj.value(x))
    t = float(np.clip(n_rows / max(f0, 1e-3), 1.0, 1e6))
    iterations = 0
    uncertified = 0
    f_now = f0 * scale
    final = n_rows * scale / t <= tol * (1.0 + f_now)
    while True:
        # intermediate rungs only need to stay near the path; tight
        # centering is spent where the gap certificate is issued
        ctol = _CENTER_TOL if final else _COARSE_TOL
        x, steps, lam2 = _center(fobj, G, g, x, t, tol=ctol)
        iterations += steps
        centered = lam2 <= 2.0 * _CENTER_TOL
        # the duality gap bound lives in the caller's units, so compare
        # n_rows*scale/t against a tolerance relative to the objective
        f_now = abs(float(fobj.value(x))) * scale
        if n_rows * scale / t <= tol * (1.0 + f_now):
            if centered:
                break
            if not final:
                # the gap target arrived mid-rung; re-center tightly at
                # the same t before certifying
                final = True
                continue
            # a stalled rung voids the gap certificate; give the ladder a
            # few more rungs to recover a true center before giving up
            uncertified += 1
            if uncertified >= 3:
                break
            t *= 10.0
            continue
        t_need = n_rows * scale / (tol * (1.0 + f_now))
        if _LADDER * t >= 1.25 * t_need:
            # the certificate is one jump away: go straight there, with
            # headroom for the objective drifting while we re-center
            t = 1.25 * t_need
            final = True
        else:
            t *= _LADDER
            final = False
    gap = n_rows * scale / t
    if not centered:
        lam = float(np.sqrt(lam2))
        extra = np.inf if lam >= 1.0 else np.sqrt(n_rows) * lam / (1.0 - lam)
        gap += extra * scale / t
    residual = gap / (1.0 + f_now)

    if inst.equal_mu:
        k = n1 + n2
        mu0 = float(x[0])
        share = (inst.budget - mu0) / k
        mu1 = np.full(n1, share)
        mu2 = np.full(n2, share)
        e2 = x[1:] * inst.e_cap if n2 else np.zeros(0)
    else:
        mu0 = float(x[0])
        mu1 = x[1:1 + n1].copy()
        mu2 = x[1 + n1:1 + n1 + n2].copy()
        e2 = x[1 + n1 + n2:] * inst.e_cap if n2 else np.zeros(0)
        # report true silence for devices the optimum pushed to the boundary
        z1 = (inst.floors1 == 0) & (mu1 < MU_SNAP)
        mu1[z1] = 0.0
        z2 = (inst.floors2 == 0) & (mu2 < MU_SNAP)
        mu2[z2] = 0.0
        e2[z2] = 0.0
        if mu0 < MU_SNAP:
            mu0 = 0.0

    objective = objective_value(inst, (mu0, mu1, mu2, e2), check=False)
    return AllocationResult(mu0=mu0, mu1=mu1, mu2=mu2, e2=e2,
                            objective=float(objective),
                            kkt_residual=residual, iterations=iterations)


# ---------------------------------------------------------------------------
# objective evaluation at arbitrary points (tests, oracle)


def _bits_log2(mu, z, coef):
    """mu * log2(1 + coef*z/mu) with the mu -> 0 limit handled."""
    mu = np.asarray(mu, dtype=float)
    z = np.asarray(z, dtype=float)
    out = np.zeros(np.broadcast(mu, z).shape)
    ok = mu > 0
    ratio = np.zeros_like(out)
    np.divide(coef * z, mu, out=ratio, where=ok)
    np.multiply(mu, np.log1p(ratio) / LN2, out=out, where=ok)
    return out


def _objective_batch(inst, mu0, mu1, mu2, e2):
    """Vectorized objective over leading batch axis."""
    total = np.zeros(np.shape(mu0))
    if not inst.proportional:
        total = total + inst.wpt_coeff * mu0
        if inst.n1:
            psi = _bits_log2(mu1, mu0[..., None], inst.delta)
            total = total + psi @ inst.d1
        if inst.n2:
            phi = _bits_log2(mu2, e2, inst.beta)
            total = total + phi @ inst.d2 + e2 @ inst.e_price
        return total
    if inst.n1:
        bits = inst.tw * _bits_log2(mu1, mu0[..., None], inst.delta)
        total = total - np.sum(np.log1p(bits), axis=-1)
    if inst.n2:
        bits = inst.tw * _bits_log2(mu2, e2, inst.beta)
        total = total - np.sum(np.log1p(bits), axis=-1)
    return total


def objective_value(inst, allocation, check=True):
    """Objective at an allocation (result object or (mu0, mu1, mu2, e2)).

    With check=True an infeasible point raises ValueError.
    """
    if isinstance(allocation, AllocationResult):
        mu0, mu1, mu2, e2 = (allocation.mu0, allocation.mu1,
                             allocation.mu2, allocation.e2)
    else:
        mu0, mu1, mu2, e2 = allocation
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if check:
        atol = FEAS_TOL * (1.0 + inst.budget)
        used = float(mu0 + mu1.sum() + mu2.sum())
        if mu0 < -atol or used > inst.budget + atol:
            raise ValueError("infeasible point: time budget")
        if np.any(mu1 < inst.floors1 - atol) or np.any(mu2 < inst.floors2 - atol):
            raise ValueError("infeasible point: floor violated")
        if inst.n2:
            etol = FEAS_TOL * (1.0 + float(np.max(inst.e_cap)))
            if np.any(e2 < -etol):
                raise ValueError("infeasible point: negative energy")
            if np.any(e2 > inst.e_cap * mu2 + etol):
                raise ValueError("infeasible point: power cap")
            if inst.e_avail is not None:
                lim = inst.e_avail + np.minimum(
                    inst.harvest_slope * mu0, inst.harvest_cap)
                if np.any(e2 > lim + etol):
                    raise ValueError("infeasible point: energy availability")
        if inst.equal_mu and (mu1.size + mu2.size):
            allmu = np.concatenate([mu1, mu2])
            if np.max(allmu) - np.min(allmu) > atol:
                raise ValueError("infeasible point: unequal shares")
    return float(_objective_batch(inst, np.asarray([float(mu0)]),
                                  mu1[None, :], mu2[None, :], e2[None, :])[0])


# ---------------------------------------------------------------------------
# grid oracle (tests only): staged exhaustive search with a shrinking box


def _energy_ub(inst, mu0, mu2):
    ub = inst.e_cap * mu2
    if inst.e_avail is not None:
        ub = np.minimum(
            ub, inst.e_avail + np.minimum(inst.harvest_slope * mu0[..., None],
                                          inst.harvest_cap))
    return ub


def grid_oracle(inst: AllocationInstance, resolution=1e-3) -> AllocationResult:
    """Brute-force reference optimum on a staged lattice.

    Refuses instances with more than three free scalars. Each stage scans a
    51-point lattice per variable (plus the previous incumbent, so the value
    never increases as stages shrink or as the resolution is lowered), then
    the box contracts to one step around the incumbent until every step is
    at or below `resolution`. Energy is parameterized as a fraction of its
    availability/power bound, which keeps every lattice point feasible.
    """
    _check_instance(inst)
    nfree = inst.free_vars()
    if nfree > 3:
        raise ValueError(f"grid oracle refuses {nfree} free variables (max 3)")
    n1, n2 = inst.n1, inst.n2
    npts = 51

    if inst.equal_mu:
        k = n1 + n2
        fmax = float(max(np.max(inst.floors1, initial=0.0),
                         np.max(inst.floors2, initial=0.0)))
        hard = [(0.0, inst.budget - k * fmax)] + [(0.0, 1.0)] * n2
    else:
        hard = ([(0.0, inst.budget)]
                + [(float(f), inst.budget) for f in
                   np.concatenate([inst.floors1, inst.floors2])]
                + [(0.0, 1.0)] * n2)

    def expand(points):
        """points (K, nfree) -> feasible (mu0, mu1, mu2, e2) + mask."""
        mu0 = points[:, 0]
        if inst.equal_mu:
            share = (inst.budget - mu0) / max(k, 1)
            mu1 = np.repeat(share[:, None], n1, axis=1)
            mu2 = np.repeat(share[:, None], n2, axis=1)
            s = points[:, 1:]
            ok = share >= max(fmax, 0.0) - 1e-15 if k else mu0 <= inst.budget
        else:
            mus = points[:, 1:1 + n1 + n2]
            mu1 = mus[:, :n1]
            mu2 = mus[:, n1:]
            s = points[:, 1 + n1 + n2:]
            ok = mu0 + mus.sum(axis=1) <= inst.budget + 1e-15
        e2 = s * _energy_ub(inst, mu0, mu2) if n2 else np.zeros((len(mu0), 0))
        return mu0, mu1, mu2, e2, ok

    box = list(hard)
    incumbent = None
    best_val = np.inf
    evals = 0
    while True:
        axes = [np.linspace(lo, hi, npts) for lo, hi in box]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        if incumbent is not None:
            pts = np.vstack([pts, incumbent[None, :]])
        mu0, mu1, mu2, e2, ok = expand(pts)
        vals = np.where(
            ok, _objective_batch(inst, mu0, mu1, mu2, e2), np.inf)
        evals += len(vals)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            incumbent = pts[j].copy()
        steps = [(hi - lo) / (npts - 1) for lo, hi in box]
        if max(steps) <= resolution:
            break
        box = [(max(h0, x - st), min(h1, x + st))
               for (h0, h1), st, x in zip(hard, steps, incumbent)]

    mu0, mu1, mu2, e2, _ = expand(incumbent[None, :])
    return AllocationResult(
        mu0=float(mu0[0]), mu1=mu1[0], mu2=mu2[0], e2=e2[0],
        objective=best_val, kkt_residual=0.0, iterations=evals)
