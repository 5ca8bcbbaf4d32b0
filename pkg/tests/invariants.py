"""Randomized small-instance trials shared by the property and acceptance suites."""
import json

import numpy as np

from particle_limits import BdrwParams, Configuration, RngStream, SsepParams, bdrw_run, rates_from_dict, ssep_run
from particle_limits.bdrw import threshold_ladder
from particle_limits.lattice import EXCLUSION

BIRTH_FAMILIES = [{"family": "power", "p": 2.0}, {"family": "logistic"}, {"family": "death", "mu": 1.0}]
KINDS = ("ssep", "walk", "birth")


def _checkpoints(rng, horizon):
    k = int(rng.integers(1, 5))
    ck = np.unique(np.round(rng.uniform(0.0, horizon, k), 6))
    return np.append(ck[ck < horizon], horizon)


def ssep_violations(occ, horizon, ck, seed):
    out = []
    init = Configuration(occ, EXCLUSION)
    stream = RngStream(seed, 0, "trial")
    traj = ssep_run(init, SsepParams(len(occ), horizon, ck), stream)
    snaps = traj.snapshots
    if not np.isin(snaps, (0, 1)).all():
        out.append("exclusion")
    if not (snaps.sum(axis=1) == init.total).all():
        out.append("ssep conservation")
    again = ssep_run(init, SsepParams(len(occ), horizon, ck), RngStream(seed, 0, "trial"))
    if again.to_json() != traj.to_json():
        out.append("ssep determinism")
    return out


def bdrw_violations(occ, rates, ell, horizon, ck, cap, seed):
    out = []
    init = Configuration(occ)
    params = BdrwParams(len(occ), ell, horizon, cap, ck, 10**6)
    res = bdrw_run(init, rates_from_dict(rates), params, RngStream(seed, 0, "trial"))
    snaps = res.trajectory.snapshots
    if snaps.size and snaps.min() < 0:
        out.append("nonnegativity")
    if rates["family"] == "none":
        # a pure walk cannot reach a cap above its particle count
        if cap > init.total and res.status != "completed":
            out.append("walk conservation")
        if not (snaps.sum(axis=1) == init.total).all():
            out.append("walk conservation")
    ys = [y for y, _ in res.threshold_hits]
    ts = [t for _, t in res.threshold_hits]
    ladder = threshold_ladder(ell, cap).tolist()
    if ys != ladder[:len(ys)] or any(b < a for a, b in zip(ts, ts[1:])):
        out.append("ladder monotonicity")
    if res.tau_estimate is not None and ts and res.tau_estimate < ts[-1]:
        out.append("tau below last hit")
    again = bdrw_run(init, rates_from_dict(rates), params, RngStream(seed, 0, "trial"))
    if json.dumps(again.to_dict(), sort_keys=True) != json.dumps(res.to_dict(), sort_keys=True):
        out.append("bdrw determinism")
    return out


def trial(seed):
    """Run one randomized instance; return ``(kind, violations)``."""
    rng = np.random.default_rng(seed)
    kind = KINDS[seed % 3]
    n = int(rng.integers(2, 11))
    horizon = float(rng.uniform(0.01, 0.5))
    ck = _checkpoints(rng, horizon)
    if kind == "ssep":
        occ = rng.integers(0, 2, n)
        return kind, ssep_violations(occ, horizon, ck, seed)
    ell = float(rng.integers(1, 5))
    occ = rng.integers(0, 6, n)
    cap = float(rng.integers(int(ell) + 1, 64))
    if kind == "walk":
        rates = {"family": "none"}
        cap = float(occ.sum() + 1 + rng.integers(0, 8))
    else:
        rates = BIRTH_FAMILIES[int(rng.integers(0, len(BIRTH_FAMILIES)))]
    return kind, bdrw_violations(occ, rates, ell, horizon, ck, cap, seed)
