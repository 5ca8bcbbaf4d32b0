"""Symmetric simple exclusion on the discrete torus.

Each edge ``(x, x+1)`` carries a Poisson clock of rate ``n**2`` that swaps the
two occupations. Only edges with ``eta(x) != eta(x+1)`` can change the state,
so the kernel samples from that set alone: the aggregate rate is
``n**2 * #discrepant`` and the firing edge is uniform among them.
"""
from dataclasses import dataclass, field
import itertools
import json

import numba as nb
import numpy as np
from scipy import sparse

from .lattice import EXCLUSION, Configuration
from .markov import uniformized_transient
from .rng import MAX_BUFFER_BLOCKS, u53, u53_open

RUNNING, DONE = 0, 1


@dataclass
class SsepParams:
    n: int
    horizon: float
    checkpoints: np.ndarray = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need n >= 2 sites")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.checkpoints is None:
            self.checkpoints = np.array([self.horizon])
        self.checkpoints = check_checkpoints(self.checkpoints, self.horizon)


def check_checkpoints(checkpoints, horizon):
    ck = np.asarray(checkpoints, dtype=float).ravel()
    if ck.size == 0:
        raise ValueError("need at least one checkpoint")
    if np.any(np.diff(ck) <= 0):
        raise ValueError("checkpoints must be strictly increasing")
    if ck[0] < 0 or ck[-1] > horizon:
        raise ValueError(f"checkpoints must lie in [0, {horizon}]")
    return ck


@dataclass
class Trajectory:
    """Configurations at the requested checkpoint times (right-continuous)."""

    kind: str
    times: np.ndarray
    snapshots: np.ndarray  # (len(times), n), int64
    event_count: int = 0
    params: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.snapshots.shape[1]

    def configuration(self, k):
        return Configuration(self.snapshots[k].copy(), self.kind)

    def __len__(self):
        return len(self.times)

    def to_dict(self):
        return {
            "kind": self.kind,
            "n": self.n,
            "params": self.params,
            "event_count": int(self.event_count),
            "times": self.times.tolist(),
            "snapshots": self.snapshots.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        snaps = np.array(d["snapshots"], dtype=np.int64).reshape(len(d["times"]), d["n"])
        return cls(d["kind"], np.array(d["times"], dtype=float), snaps,
                   d["event_count"], d.get("params", {}))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_rows(self, replica=0):
        """Rows ``(replica, checkpoint_time, site, occupation)``."""
        for t, snap in zip(self.times, self.snapshots):
            for x, occ in enumerate(snap):
                yield replica, float(t), x, int(occ)


@nb.njit(cache=True, nogil=True)
def _ssep_kernel(eta, dlist, dpos, blocks, state, istate, checkpoints, snaps, edge_rate, horizon):
    # state: [t, kahan compensation]; istate: [n_discrepant, events, next checkpoint, status]
    n = eta.shape[0]
    t = state[0]
    comp = state[1]
    nd = istate[0]
    events = istate[1]
    kc = istate[2]
    status = RUNNING
    nck = checkpoints.shape[0]
    used = 0
    while used < blocks.shape[0]:
        if nd == 0:
            # frozen configuration: nothing can ever change
            while kc < nck:
                snaps[kc, :] = eta
                kc += 1
            t = horizon
            status = DONE
            break
        ut = u53_open(blocks[used, 0], blocks[used, 1])
        us = u53(blocks[used, 2], blocks[used, 3])
        used += 1
        dt = -np.log(ut) / (edge_rate * nd)
        y = dt - comp
        tn = t + y
        comp = (tn - t) - y
        while kc < nck and checkpoints[kc] < tn:
            snaps[kc, :] = eta
            kc += 1
        if tn >= horizon:
            while kc < nck:
                snaps[kc, :] = eta
                kc += 1
            t = horizon
            status = DONE
            break
        t = tn
        i = int(us * nd)
        if i >= nd:
            i = nd - 1
        e = dlist[i]
        e1 = e + 1
        if e1 == n:
            e1 = 0
        tmp = eta[e]
        eta[e] = eta[e1]
        eta[e1] = tmp
        events += 1
        # the fired edge stays discrepant; its two neighbours may toggle
        for j in (e - 1, e1):
            if j < 0:
                j += n
            j1 = j + 1
            if j1 == n:
                j1 = 0
            disc = eta[j] != eta[j1]
            if disc and dpos[j] < 0:
                dlist[nd] = j
                dpos[j] = nd
                nd += 1
            elif not disc and dpos[j] >= 0:
                k = dpos[j]
                last = dlist[nd - 1]
                dlist[k] = last
                dpos[last] = k
                dpos[j] = -1
                nd -= 1
    state[0] = t
    state[1] = comp
    istate[0] = nd
    istate[1] = events
    istate[2] = kc
    istate[3] = status
    return used


def _discrepant_edges(eta):
    n = eta.size
    dlist = np.full(n, -1, dtype=np.int64)
    dpos = np.full(n, -1, dtype=np.int64)
    nd = 0
    for j in range(n):
        if eta[j] != eta[(j + 1) % n]:
            dlist[nd] = j
            dpos[j] = nd
            nd += 1
    return dlist, dpos, nd


def ssep_run(init, params, stream):
    """Simulate SSEP from ``init`` and return the configurations at ``params.checkpoints``."""
    if init.kind != EXCLUSION:
        raise ValueError("ssep_run needs an exclusion configuration")
    if init.n != params.n:
        raise ValueError(f"configuration has {init.n} sites, params expect {params.n}")
    eta = init.occupations.copy()
    dlist, dpos, nd = _discrepant_edges(eta)
    ck = params.checkpoints
    snaps = np.zeros((ck.size, eta.size), dtype=np.int64)
    state = np.zeros(2)
    istate = np.array([nd, 0, 0, RUNNING], dtype=np.int64)
    size = 64
    while istate[3] == RUNNING:
        blocks = stream.peek_blocks(size)
        used = _ssep_kernel(eta, dlist, dpos, blocks, state, istate, ck, snaps,
                            float(params.n) ** 2, float(params.horizon))
        stream.advance(used)
        size = min(size * 4, MAX_BUFFER_BLOCKS)
    return Trajectory(EXCLUSION, ck.copy(), snaps, int(istate[1]),
                      {"n": params.n, "horizon": params.horizon})


def exclusion_states(n):
    """All ``2**n`` exclusion configurations as tuples, in lexicographic order."""
    return list(itertools.product((0, 1), repeat=n))


def ssep_generator(n):
    """Full ``2**n x 2**n`` SSEP generator (sparse) and its state list."""
    states = exclusion_states(n)
    index = {s: i for i, s in enumerate(states)}
    rate = float(n) ** 2
    rows, cols, vals = [], [], []
    for i, s in enumerate(states):
        out = 0.0
        for x in range(n):
            y = (x + 1) % n
            if s[x] != s[y]:
                t = list(s)
                t[x], t[y] = t[y], t[x]
                rows.append(i)
                cols.append(index[tuple(t)])
                vals.append(rate)
                out += rate
        rows.append(i)
        cols.append(i)
        vals.append(-out)
    Q = sparse.csr_matrix((vals, (rows, cols)), shape=(len(states), len(states)))
    return Q, states


def ssep_step_distribution_oracle(init, t, tol=1e-10):
    """Exact law of the SSEP at time ``t`` from ``init`` as ``{occupation tuple: probability}``.

    Brute force over the full state space, so only ``n <= 6`` is accepted.
    """
    if init.n > 6:
        raise ValueError(f"oracle supports n <= 6, got {init.n}")
    if init.kind != EXCLUSION:
        raise ValueError("oracle needs an exclusion configuration")
    Q, states = ssep_generator(init.n)
    p0 = np.zeros(len(states))
    p0[states.index(tuple(int(v) for v in init.occupations))] = 1.0
    p, _ = uniformized_transient(Q, p0, t, tol=tol)
    return {s: float(q) for s, q in zip(states, p) if q > 0.0}
