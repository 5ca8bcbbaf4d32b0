"""Independent random walks with birth and death on the discrete torus.

Per site ``x`` the dynamics has four channels:

- jump to ``x+1`` at rate ``n**2 * eta(x)``, and to ``x-1`` at the same rate
- birth at rate ``ell * b(eta(x) / ell)``
- death at rate ``ell * d(eta(x) / ell)``

Walk moves are linear in the occupation, so the kernel picks a uniformly random
particle from a flat list. Birth/death uses a Fenwick tree over per-site upper
bounds of ``ell * (b + d)`` that stay valid while ``eta(x)`` remains inside a
window; a proposal is accepted with probability ``true rate / bound`` (thinning),
which keeps the simulation exact while most walk moves touch no tree node.

Rates can grow without bound, so a run may explode. It stops once some site
reaches the cap ``y`` and reports the hitting times of a geometric ladder of
thresholds together with an extrapolated explosion time.
"""
from dataclasses import dataclass, field
import itertools
import math

import numba as nb
import numpy as np
from scipy import sparse

from . import fenwick
from .lattice import UNBOUNDED, Configuration
from .markov import uniformized_transient
from .rng import MAX_BUFFER_BLOCKS, u53, u53_open
from .ssep import Trajectory, check_checkpoints

RUNNING, COMPLETED, EXPLODED, BUDGET_EXHAUSTED = 0, 1, 2, 3
STATUS_NAMES = {COMPLETED: "completed", EXPLODED: "exploded", BUDGET_EXHAUSTED: "budget_exhausted"}

# thinning bounds are rebuilt exactly every this many kernel iterations
_RESYNC = 1 << 16
# local time is folded into the compensated total every this many iterations
_FOLD = 1 << 10


@dataclass
class BdrwParams:
    n: int
    ell: float
    horizon: float
    cap: float
    checkpoints: np.ndarray = None
    event_budget: int = 10**9

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need n >= 1 sites")
        if self.ell <= 0:
            raise ValueError("ell must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.cap < 1:
            raise ValueError("cap y must be >= 1")
        if self.event_budget < 1:
            raise ValueError("event_budget must be >= 1")
        if self.checkpoints is None:
            self.checkpoints = np.array([self.horizon])
        self.checkpoints = check_checkpoints(self.checkpoints, self.horizon)

    def to_dict(self):
        return {"n": self.n, "ell": self.ell, "horizon": self.horizon, "cap": self.cap,
                "checkpoints": self.checkpoints.tolist(), "event_budget": self.event_budget}


def threshold_ladder(ell, cap):
    """Integer thresholds ``ceil(ell * 2**j)`` below the cap, followed by the cap itself."""
    cap = int(math.ceil(cap))
    rungs = []
    j = 0
    while True:
        y = int(math.ceil(ell * 2.0**j))
        if y >= cap:
            break
        if not rungs or y > rungs[-1]:
            rungs.append(y)
        j += 1
    rungs.append(cap)
    return np.array(rungs, dtype=np.int64)


def estimate_blowup_time(hits, ell, points=4):
    """Extrapolate ``ell / y`` against the hitting time ``tau_y`` linearly to zero.

    Uses the last ``points`` ladder rungs; exact when the sup norm grows like
    ``1 / (T - t)``. Never returns less than the last hitting time.
    """
    if not hits:
        return None
    ys = np.array([h[0] for h in hits[-points:]], dtype=float)
    ts = np.array([h[1] for h in hits[-points:]], dtype=float)
    last = float(ts[-1])
    if ys.size < 2 or np.ptp(ts) == 0.0:
        return last
    slope, intercept = np.polyfit(ts, ell / ys, 1)
    if not slope < 0:
        return last
    return max(last, float(-intercept / slope))


@dataclass
class RunOutcome:
    status: str
    trajectory: Trajectory
    threshold_hits: list = field(default_factory=list)
    tau_estimate: float = None
    events: int = 0
    null_events: int = 0
    final_time: float = 0.0
    max_occupation: int = 0

    @property
    def exploded(self):
        return self.status == "exploded"

    def to_dict(self):
        return {
            "status": self.status,
            "tau_estimate": self.tau_estimate,
            "threshold_hits": [[int(y), float(t)] for y, t in self.threshold_hits],
            "events": int(self.events),
            "null_events": int(self.null_events),
            "final_time": float(self.final_time),
            "max_occupation": int(self.max_occupation),
            "trajectory": self.trajectory.to_dict(),
        }

    def summary_row(self, replica):
        """``(replica, outcome, tau_estimate, events, max_occupation)``"""
        return (replica, self.status, self.tau_estimate, int(self.events), int(self.max_occupation))


def bdrw_total_rate(config, rates, n, ell):
    """Total jump rate ``sum_x [2 n^2 eta(x) + ell b(eta(x)/ell) + ell d(eta(x)/ell)]``."""
    if config.kind != UNBOUNDED:
        raise ValueError("bdrw needs an unbounded configuration")
    eta = config.occupations.astype(float)
    s = eta / ell
    return float(np.sum(2.0 * n * n * eta + ell * rates.birth(s) + ell * rates.death(s)))


@nb.njit(inline="always")
def _rebound(x, e, gtab, lo, hi, ghi):
    w = e >> 3
    if w < 4:
        w = 4
    a = e - w
    if a < 0:
        a = 0
    b = e + w
    if b > gtab.shape[0] - 1:
        b = gtab.shape[0] - 1
    m = 0.0
    for k in range(a, b + 1):
        if gtab[k] > m:
            m = gtab[k]
    lo[x] = a
    hi[x] = b
    old = ghi[x]
    ghi[x] = m
    return m - old


@nb.njit(cache=True, nogil=True)
def _init_bounds(eta, gtab, lo, hi, ghi, tree):
    for x in range(eta.shape[0]):
        ghi[x] = 0.0
        _rebound(x, eta[x], gtab, lo, hi, ghi)
    fenwick.build(tree, ghi)
    return ghi.sum()


@nb.njit(cache=True, nogil=True)
def _bdrw_kernel(eta, pos, lo, hi, ghi, tree, btab, gtab, flat, fstate, istate,
                 checkpoints, snaps, ladder, hits, walk_rate, horizon, budget):
    # fstate: [t, kahan compensation, G]
    # istate: [P, iterations, null events, next checkpoint, next rung, scan pointer, status]
    # flat: consecutive Philox blocks, four words each
    # Caller guarantees len(pos) >= P + number of blocks, so births never overflow.
    n = eta.shape[0]
    top = fenwick.top_bit(n)
    base = fstate[0]
    comp = fstate[1]
    G = fstate[2]
    P = istate[0]
    iters = istate[1]
    nulls = istate[2]
    kc = istate[3]
    kr = istate[4]
    ptr = istate[5]
    nck = checkpoints.shape[0]
    nrung = ladder.shape[0]
    next_stop = checkpoints[kc] if kc < nck else horizon
    next_rung = ladder[kr]
    next_resync = (iters // _RESYNC + 1) * _RESYNC
    next_check = min(budget, iters + _FOLD, next_resync)
    # time since the last fold; keeps the compensated sum off the per-event path
    acc = 0.0
    limit = next_stop - base
    status = RUNNING
    used = 0
    for k in range(flat.shape[0] // 4):
        if iters >= next_check:
            y = acc - comp
            tb = base + y
            comp = (tb - base) - y
            base = tb
            acc = 0.0
            limit = next_stop - base
            if iters >= budget:
                status = BUDGET_EXHAUSTED
                break
            if iters >= next_resync:
                # drop accumulated rounding in the bound tree
                fenwick.build(tree, ghi)
                G = ghi.sum()
                next_resync = iters + _RESYNC
            next_check = min(budget, iters + _FOLD, next_resync)
        used = k + 1
        iters += 1
        ut = u53_open(flat[4 * k], flat[4 * k + 1])
        us = u53(flat[4 * k + 2], flat[4 * k + 3])
        W = walk_rate * P
        R = W + G
        if R > 0.0:
            acc += -np.log(ut) / R
        else:
            # absorbing state: nothing ever happens again
            acc = np.inf
        if acc > limit:
            tn = base + acc
            while kc < nck and checkpoints[kc] < tn:
                snaps[kc, :] = eta
                kc += 1
            if tn > horizon:
                while kc < nck:
                    snaps[kc, :] = eta
                    kc += 1
                base = horizon
                comp = 0.0
                acc = 0.0
                # the overshooting draw is not an event
                iters -= 1
                status = COMPLETED
                break
            next_stop = checkpoints[kc] if kc < nck else horizon
            limit = next_stop - base
        v = us * R
        if v < W:
            q = v / walk_rate
            i = int(q)
            x = pos[i]
            y = x + 1 if q - i < 0.5 else x - 1
            if y == n:
                y = 0
            elif y < 0:
                y = n - 1
            pos[i] = y
            ex = eta[x] - 1
            eta[x] = ex
            e = eta[y] + 1
            eta[y] = e
            if ex < lo[x]:
                dg = _rebound(x, ex, gtab, lo, hi, ghi)
                fenwick.add(tree, x, dg)
                G += dg
            if e > hi[y]:
                dg = _rebound(y, e, gtab, lo, hi, ghi)
                fenwick.add(tree, y, dg)
                G += dg
        else:
            x, r = fenwick.find(tree, v - W, top)
            if x >= n:
                nulls += 1
                continue
            e = eta[x]
            if r < btab[e]:
                pos[P] = x
                P += 1
                e += 1
            elif r < gtab[e]:
                if e <= 0:
                    # d(0) = 0 forbids this; the rate table is inconsistent
                    status = -1
                    break
                j = ptr
                if j >= P:
                    j = 0
                while pos[j] != x:
                    j += 1
                    if j == P:
                        j = 0
                P -= 1
                pos[j] = pos[P]
                ptr = j
                e -= 1
            else:
                nulls += 1
                continue
            eta[x] = e
            if e < lo[x] or e > hi[x]:
                dg = _rebound(x, e, gtab, lo, hi, ghi)
                fenwick.add(tree, x, dg)
                G += dg
        if e >= next_rung:
            while kr < nrung and e >= ladder[kr]:
                hits[kr] = base + acc
                kr += 1
            if kr == nrung:
                status = EXPLODED
                break
            next_rung = ladder[kr]
    y = acc - comp
    tb = base + y
    fstate[0] = tb
    fstate[1] = (tb - base) - y
    fstate[2] = G
    istate[0] = P
    istate[1] = iters
    istate[2] = nulls
    istate[3] = kc
    istate[4] = kr
    istate[5] = ptr
    istate[6] = status
    return used


def _particle_list(eta, capacity):
    # interleave sites so that early list positions are not all on one site
    sites = np.repeat(np.arange(eta.size, dtype=np.int32), eta)
    ranks = np.concatenate([np.arange(k) for k in eta]) if eta.size else np.empty(0)
    order = np.lexsort((sites, ranks))
    pos = np.empty(max(capacity, sites.size + 1), dtype=np.int32)
    pos[: sites.size] = sites[order]
    return pos


def rate_tables(rates, ell, size):
    """``ell * b(k / ell)`` and ``ell * (b + d)(k / ell)`` for ``k = 0..size-1``."""
    s = np.arange(size, dtype=float) / ell
    b = ell * np.asarray(rates.birth(s), dtype=float)
    d = ell * np.asarray(rates.death(s), dtype=float)
    if np.any(b < 0) or np.any(d < 0) or d[0] != 0.0:
        raise ValueError("rates must be nonnegative with d(0) = 0")
    return b, b + d


def bdrw_run(init, rates, params, stream):
    """Exact simulation up to the horizon, the cap, or the event budget."""
    if init.kind != UNBOUNDED:
        raise ValueError("bdrw_run needs an unbounded configuration")
    if init.n != params.n:
        raise ValueError(f"configuration has {init.n} sites, params expect {params.n}")
    n = params.n
    ell = float(params.ell)
    cap = int(math.ceil(params.cap))
    ladder = threshold_ladder(ell, cap)
    hits = np.full(ladder.size, np.nan)
    eta = init.occupations.copy()
    ck = params.checkpoints
    snaps = np.zeros((ck.size, n), dtype=np.int64)
    m0 = int(eta.max())
    kr = int(np.searchsorted(ladder, m0, side="right"))
    hits[:kr] = 0.0
    meta = {"n": n, "ell": ell, "horizon": params.horizon, "cap": cap}

    def outcome(status, t, kc, events=0, nulls=0):
        recorded = [(int(y), float(h)) for y, h in zip(ladder, hits) if not np.isnan(h)]
        traj = Trajectory(UNBOUNDED, ck[:kc].copy(), snaps[:kc].copy(), events, meta)
        tau = estimate_blowup_time(recorded, ell) if status == "exploded" else None
        return RunOutcome(status, traj, recorded, tau, events, nulls, float(t), int(eta.max()))

    if m0 >= cap:
        return outcome("exploded", 0.0, 0)

    size = max(cap + (cap >> 3) + 16, m0 + 16)
    btab, gtab = rate_tables(rates, ell, size)
    lo = np.zeros(n, dtype=np.int64)
    hi = np.zeros(n, dtype=np.int64)
    ghi = np.zeros(n)
    tree = np.zeros(n + 1)
    G = _init_bounds(eta, gtab, lo, hi, ghi, tree)
    P = int(eta.sum())
    pos = _particle_list(eta, 2 * P + MAX_BUFFER_BLOCKS)
    fstate = np.array([0.0, 0.0, G])
    istate = np.array([P, 0, 0, 0, kr, 0, RUNNING], dtype=np.int64)
    walk_rate = 2.0 * n * n
    blocks_size = 64
    while True:
        need = int(istate[0]) + blocks_size
        if pos.size < need:
            grown = np.empty(max(need, 2 * pos.size), dtype=np.int32)
            grown[: pos.size] = pos
            pos = grown
        blocks = stream.peek_blocks(blocks_size)
        used = _bdrw_kernel(eta, pos, lo, hi, ghi, tree, btab, gtab, blocks.reshape(-1), fstate, istate,
                            ck, snaps, ladder, hits, walk_rate, float(params.horizon),
                            int(params.event_budget))
        stream.advance(used)
        status = int(istate[6])
        if status < 0:
            raise RuntimeError("death fired at an empty site; rate table is inconsistent")
        if status != RUNNING:
            break
        blocks_size = min(blocks_size * 4, MAX_BUFFER_BLOCKS)
    assert eta.min() >= 0
    assert int(istate[0]) == int(eta.sum())
    iters, nulls = int(istate[1]), int(istate[2])
    return outcome(STATUS_NAMES[status], fstate[0], int(istate[3]), iters - nulls, nulls)


def truncated_states(n, occupancy_cap):
    return list(itertools.product(range(occupancy_cap + 1), repeat=n))


def bdrw_generator(rates, n, ell, occupancy_cap):
    """Generator of the chain truncated to ``eta(x) <= occupancy_cap``.

    Transitions leaving the box go to one extra absorbing state, the last index.
    """
    states = truncated_states(n, occupancy_cap)
    index = {s: i for i, s in enumerate(states)}
    boundary = len(states)
    rows, cols, vals = [], [], []

    def push(i, target, rate):
        if rate <= 0:
            return 0.0
        rows.append(i)
        cols.append(target)
        vals.append(rate)
        return rate

    for i, s in enumerate(states):
        out = 0.0
        for x in range(n):
            k = s[x]
            if k > 0 and n > 1:
                for y in ((x + 1) % n, (x - 1) % n):
                    t = list(s)
                    t[x] -= 1
                    t[y] += 1
                    target = boundary if t[y] > occupancy_cap else index[tuple(t)]
                    out += push(i, target, float(n) ** 2 * k)
            birth = ell * float(rates.birth(k / ell))
            t = list(s)
            t[x] += 1
            out += push(i, boundary if t[x] > occupancy_cap else index[tuple(t)], birth)
            if k > 0:
                death = ell * float(rates.death(k / ell))
                t = list(s)
                t[x] -= 1
                out += push(i, index[tuple(t)], death)
        rows.append(i)
        cols.append(i)
        vals.append(-out)
    size = len(states) + 1
    Q = sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))
    return Q, states


def bdrw_small_oracle(init, rates, n, ell, t, occupancy_cap, tol=1e-10):
    """Exact time-``t`` law on the truncated chain.

    Returns ``(table, boundary_mass)`` where ``table`` maps occupation tuples to
    probabilities; comparisons are meaningful while ``boundary_mass`` is tiny.
    """
    if n > 3 or occupancy_cap > 8:
        raise ValueError("oracle supports n <= 3 and occupancy_cap <= 8")
    if init.n != n:
        raise ValueError(f"configuration has {init.n} sites, expected {n}")
    if init.occupations.max() > occupancy_cap:
        raise ValueError("initial configuration exceeds the occupancy cap")
    Q, states = bdrw_generator(rates, n, ell, occupancy_cap)
    p0 = np.zeros(len(states) + 1)
    p0[states.index(tuple(int(v) for v in init.occupations))] = 1.0
    p, _ = uniformized_transient(Q, p0, t, tol=tol)
    table = {s: float(q) for s, q in zip(states, p[:-1]) if q > 0.0}
    return table, float(p[-1])
