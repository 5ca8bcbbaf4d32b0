"""Convergence studies for the hydrodynamic and high-density scaling limits.

Every replica draws from its own RNG stream, keyed by the replica index and a
channel tag that names the study, the system size and the purpose. Replica
results are merged by index, so a report does not depend on how the worker
pool scheduled the replicas.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import json
import math
import os
import warnings

import numpy as np

from .bdrw import BdrwParams, bdrw_run
from .lattice import (
    density_field,
    sample_initial_density,
    sample_initial_exclusion,
    sup_norm_distance,
)
from .pde import PdeGrid, check_blowup_criterion, solve_heat, solve_reaction_diffusion
from .profiles import check_range, profile_from_dict
from .rates import rates_from_dict
from .rng import RngStream
from .ssep import SsepParams, ssep_run

SCHEMA_VERSION = "particle-limits/1"


# ---------------------------------------------------------------- schedules

def ell_rule(rule, **params):
    """``ell(N)`` for a named rule, never below 1.

    ``constant``: ``value`` (default 1); ``power``: ``coef * N**alpha``;
    ``log_power``: ``coef * (log N)**beta``.
    """
    if rule == "constant":
        value = float(params.get("value", 1.0))
        return lambda n: max(1.0, value)
    if rule == "power":
        alpha, coef = float(params.get("alpha", 1.0)), float(params.get("coef", 1.0))
        return lambda n: max(1.0, coef * float(n) ** alpha)
    if rule == "log_power":
        beta, coef = float(params.get("beta", 1.0)), float(params.get("coef", 1.0))
        return lambda n: max(1.0, coef * math.log(n) ** beta)
    raise ValueError(f"unknown ell rule {rule!r}; choose from constant, power, log_power")


_RULE_KEYS = {"constant": {"value"}, "power": {"alpha", "coef"}, "log_power": {"beta", "coef"}}


@dataclass
class ScalingSchedule:
    ns: list
    rule: str = "constant"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ns = [int(n) for n in self.ns]
        if not self.ns or any(b <= a for a, b in zip(self.ns, self.ns[1:])):
            raise ValueError("schedule sizes must be strictly increasing")
        if self.ns[0] < 2:
            raise ValueError("schedule sizes must be >= 2")
        unknown = set(self.params) - _RULE_KEYS.get(self.rule, set())
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)} for ell rule {self.rule!r}")
        self._ell = ell_rule(self.rule, **self.params)

    def ell(self, n):
        return self._ell(n)

    def pairs(self):
        return [(n, self.ell(n)) for n in self.ns]

    def to_dict(self):
        return {"ns": list(self.ns), "rule": self.rule, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["ns"], d.get("rule", "constant"), dict(d.get("params", {})))


# ---------------------------------------------------------------- (A2)

@dataclass
class A2Report:
    rule: dict
    c_grid: list
    per_c: list
    convergent: bool
    inconclusive: bool
    symbolic: dict
    grid_relative: bool = True

    def to_dict(self):
        return dict(self.__dict__)


def _symbolic_a2(rule, params, c):
    """Closed-form verdict for ``sum N^3 exp(-c ell(N))`` when the family allows one."""
    if rule == "constant":
        return False
    if rule == "power":
        return float(params.get("alpha", 1.0)) > 0 and float(params.get("coef", 1.0)) > 0
    if rule == "log_power":
        beta, coef = float(params.get("beta", 1.0)), float(params.get("coef", 1.0))
        if beta > 1:
            return True
        if beta == 1:
            # terms are N^(3 - c coef)
            return c * coef > 4
        return False
    return None


def _safe(fn, x):
    try:
        return fn(x)
    except OverflowError:
        return math.inf


def check_a2(rule, c_grid=(0.01, 0.1, 1.0, 4.0), log_n_max=690.0, band=0.05):
    """Numeric test of ``sum_N N^3 exp(-c ell(N)) < inf`` for each ``c`` in the grid.

    Terms are handled in log space. The local decay exponent
    ``q = -d log a_N / d log N`` is fitted over the last decade of ``N`` below
    ``exp(log_n_max)``; ``q > 1 + band`` counts as convergent, ``q < 1 - band`` as
    divergent, anything else is inconclusive. The default horizon is the top of
    the double range because slowly growing rules such as ``(log N)**2`` only win
    against ``N**3`` for small ``c`` at astronomically large ``N``.
    """
    if isinstance(rule, ScalingSchedule):
        rule = {"rule": rule.rule, "params": rule.params}
    rule = dict(rule)
    name = rule.get("rule", "constant")
    params = dict(rule.get("params", {}))
    ell = ell_rule(name, **params)
    c_grid = [float(c) for c in c_grid]
    if any(not c > 0 for c in c_grid):
        raise ValueError("c grid must be positive")
    logs = np.linspace(log_n_max - math.log(10.0), log_n_max, 32)
    per_c = []
    for c in c_grid:
        ells = np.array([_safe(ell, math.exp(L)) for L in logs])
        log_a = 3.0 * logs - c * ells
        if not np.all(np.isfinite(log_a)):
            q = math.inf
        else:
            q = float(-np.polyfit(logs, log_a, 1)[0])
        if q > 1.0 + band:
            verdict = "convergent"
        elif q < 1.0 - band:
            verdict = "divergent"
        else:
            verdict = "inconclusive"
        per_c.append({"c": c, "local_exponent": q, "verdict": verdict,
                      "symbolic": _symbolic_a2(name, params, c)})
    convergent = all(p["verdict"] == "convergent" for p in per_c)
    inconclusive = any(p["verdict"] == "inconclusive" for p in per_c)
    sym = [p["symbolic"] for p in per_c]
    symbolic = {"available": None not in sym,
                "convergent": (all(sym) if None not in sym else None)}
    return A2Report({"rule": name, "params": params}, c_grid, per_c, convergent,
                    inconclusive, symbolic)


# ---------------------------------------------------------------- workers

def worker_count(requested=None):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("PARTICLE_LIMITS_THREADS")
    if env:
        return max(1, int(env))
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def run_replicas(fn, count, workers=None):
    """``[fn(r) for r in range(count)]``, possibly on a thread pool; order is by replica."""
    workers = min(worker_count(workers), max(count, 1))
    if workers == 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def _guarded(fn):
    def call(r):
        try:
            return fn(r)
        except Exception as exc:  # one bad replica should not sink the study
            return {"failed": f"{type(exc).__name__}: {exc}"}
    return call


# ---------------------------------------------------------------- reports

def _stats(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"median": None, "max": None, "q1": None, "q3": None, "mean": None}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"median": float(med), "max": float(v.max()), "q1": float(q1), "q3": float(q3),
            "mean": float(v.mean())}


def fit_decay(ns, values):
    """Least squares of ``log(value)`` on ``log N``; None when a value is not positive."""
    ns = np.asarray(ns, dtype=float)
    v = np.asarray([np.nan if x is None else x for x in values], dtype=float)
    if ns.size < 2 or not np.all(v > 0):
        return {"slope": None, "intercept": None, "residuals": None}
    x, y = np.log(ns), np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    return {"slope": float(slope), "intercept": float(intercept),
            "residuals": (y - (slope * x + intercept)).tolist()}


@dataclass
class ConvergenceReport:
    study: str
    metric: str
    rows: list
    fit: dict
    config: dict
    schema: str = SCHEMA_VERSION

    def medians(self):
        return [row["median"] for row in self.rows]

    def strictly_decreasing(self):
        m = self.medians()
        return all(a is not None and b is not None and b < a for a, b in zip(m, m[1:]))

    def to_dict(self):
        return {"schema": self.schema, "study": self.study, "metric": self.metric,
                "rows": self.rows, "fit": self.fit, "config": self.config}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema {d.get('schema')!r}")
        return cls(d["study"], d["metric"], d["rows"], d["fit"], d["config"], d["schema"])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "ell", "replicas", "used", "median", "q1", "q3", "max",
                    "exploded", "budget_exhausted", "failed"])
        for r in self.rows:
            w.writerow([r["n"], repr(r["ell"]), r["replicas"], r["used"], r["median"], r["q1"],
                        r["q3"], r["max"], r["exploded"], r["budget_exhausted"], r["failed"]])
        return buf.getvalue()

    def summary_lines(self):
        out = []
        for r in self.rows:
            med = "nan" if r["median"] is None else f"{r['median']:.6g}"
            out.append(f"{self.study} N={r['n']} ell={r['ell']:g} replicas={r['used']}/{r['replicas']} "
                       f"median_error={med}")
        return out


def _row(n, ell, replicas, results, checkpoints):
    ok = [res for res in results if "errors" in res]
    per_ck = np.array([res["errors"] for res in ok]).reshape(len(ok), len(checkpoints))
    worst = per_ck.max(axis=1) if ok else np.array([])
    row = {"n": n, "ell": float(ell), "replicas": replicas, "used": len(ok),
           "errors": worst.tolist(),
           "checkpoints": [{"t": float(t), **_stats(per_ck[:, k])} for k, t in enumerate(checkpoints)],
           "exploded": sum(res.get("status") == "exploded" for res in results),
           "budget_exhausted": sum(res.get("status") == "budget_exhausted" for res in results),
           "failed": sum("failed" in res for res in results),
           "failures": sorted({res["failed"] for res in results if "failed" in res}),
           "mass_violations": sum(res.get("mass_violation", False) for res in results)}
    row.update(_stats(worst))
    return row


# ---------------------------------------------------------------- test functions

def fourier_test_functions(k_max=3):
    """``1, cos 2 pi k u, sin 2 pi k u`` for ``k = 1..k_max`` as ``(label, function)`` pairs."""
    fns = [("1", lambda u: np.ones_like(np.asarray(u, dtype=float)))]
    for k in range(1, k_max + 1):
        fns.append((f"cos{k}", lambda u, k=k: np.cos(2 * np.pi * k * np.asarray(u))))
        fns.append((f"sin{k}", lambda u, k=k: np.sin(2 * np.pi * k * np.asarray(u))))
    return fns


# ---------------------------------------------------------------- studies

def hydrodynamic_study(phi, schedule, horizon, checkpoints, replicas, master_seed,
                       test_functions=None, pde_m=256, workers=None):
    """SSEP weak-metric error against the heat equation, per system size.

    The error of a replica at checkpoint ``t`` is
    ``max_psi |<pi_t, psi> - int psi rho(t) du|``; the study reports replica
    statistics per checkpoint and of the worst checkpoint.
    """
    phi = profile_from_dict(phi)
    check_range(phi, 0.0, 1.0)
    if test_functions is None:
        test_functions = fourier_test_functions(3)
    ck = np.asarray(checkpoints, dtype=float)
    heat = solve_heat(phi, horizon, PdeGrid(pde_m), ck)
    u = heat.u
    psi_grid = np.array([fn(u) for _, fn in test_functions])
    # periodic trapezoid rule
    reference = heat.rho @ psi_grid.T / pde_m
    rows = []
    for n in schedule.ns:
        x = np.arange(n) / n
        psi_sites = np.array([fn(x) for _, fn in test_functions])
        params = SsepParams(n, horizon, ck)

        def one(r, n=n, psi_sites=psi_sites, params=params):
            init = sample_initial_exclusion(n, phi, RngStream(master_seed, r, f"hydro/n={n}/init"))
            traj = ssep_run(init, params, RngStream(master_seed, r, f"hydro/n={n}/dynamics"))
            counts = traj.snapshots.sum(axis=1)
            observed = traj.snapshots @ psi_sites.T / n
            errors = np.abs(observed - reference).max(axis=1)
            return {"errors": errors.tolist(),
                    "mass_violation": bool(np.any(counts != init.total))}

        results = run_replicas(_guarded(one), replicas, workers)
        rows.append(_row(n, 1.0, replicas, results, ck))
    config = {"phi": phi.to_dict(), "schedule": schedule.to_dict(), "horizon": horizon,
              "checkpoints": ck.tolist(), "replicas": replicas, "master_seed": master_seed,
              "test_functions": [name for name, _ in test_functions], "pde_m": pde_m}
    return ConvergenceReport("hydrodynamic", "weak", rows,
                             fit_decay(schedule.ns, [r["median"] for r in rows]), config)


def high_density_study(phi, rates, schedule, horizon, checkpoints, replicas, master_seed,
                       cap_factor=1024, event_budget=10**10, pde_m=256, workers=None):
    """Birth-death walks: sup-norm distance of the density field to the PDE solution.

    Replicas that explode or run out of budget before the horizon are counted
    and left out of the error statistics.
    """
    phi = profile_from_dict(phi)
    rates = rates_from_dict(rates)
    check_range(phi, 0.0, None)
    ck = np.asarray(checkpoints, dtype=float)
    sol = solve_reaction_diffusion(phi, rates, horizon, PdeGrid(pde_m), ck)
    if not sol.resolved:
        raise ValueError(f"reaction-diffusion solution does not resolve [0, {horizon}]: {sol.status}")
    targets = [sol.profile_at(k) for k in range(ck.size)]
    rows = []
    for n, ell in schedule.pairs():
        params = BdrwParams(n, ell, horizon, cap_factor * ell, ck, event_budget)

        def one(r, n=n, ell=ell, params=params):
            init = sample_initial_density(n, ell, phi, RngStream(master_seed, r, f"density/n={n}/init"))
            out = bdrw_run(init, rates, params, RngStream(master_seed, r, f"density/n={n}/dynamics"))
            if out.status != "completed":
                return {"status": out.status}
            errors = [sup_norm_distance(density_field(out.trajectory.configuration(k), ell), targets[k])
                      for k in range(ck.size)]
            return {"status": out.status, "errors": errors}

        results = run_replicas(_guarded(one), replicas, workers)
        rows.append(_row(n, ell, replicas, results, ck))
    config = {"phi": phi.to_dict(), "rates": rates.to_dict(), "schedule": schedule.to_dict(),
              "horizon": horizon, "checkpoints": ck.tolist(), "replicas": replicas,
              "master_seed": master_seed, "cap_factor": cap_factor,
              "event_budget": event_budget, "pde_m": pde_m}
    return ConvergenceReport("high_density", "sup", rows,
                             fit_decay(schedule.ns, [r["median"] for r in rows]), config)


def initial_error_scan(phi, schedules, replicas, master_seed):
    """Max over replicas of ``||X(0) - phi||_inf`` along each schedule, side by side."""
    phi = profile_from_dict(phi)
    out = {}
    for label, schedule in schedules.items():
        series = []
        for n, ell in schedule.pairs():
            worst = 0.0
            for r in range(replicas):
                init = sample_initial_density(n, ell, phi, RngStream(master_seed, r, f"scan/n={n}/init"))
                worst = max(worst, sup_norm_distance(density_field(init, ell), phi))
            series.append({"n": n, "ell": ell, "max_error": worst})
        out[label] = series
    return out


@dataclass
class BlowupComparison:
    rows: list
    pde_t_blowup: float
    pde_status: str
    criterion: dict
    config: dict
    schema: str = SCHEMA_VERSION

    def to_dict(self):
        return {"schema": self.schema, "rows": self.rows, "pde_t_blowup": self.pde_t_blowup,
                "pde_status": self.pde_status, "criterion": self.criterion, "config": self.config}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema {d.get('schema')!r}")
        return cls(d["rows"], d["pde_t_blowup"], d["pde_status"], d["criterion"], d["config"],
                   d["schema"])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "ell", "replicas", "exploded", "completed", "budget_exhausted",
                    "median_tau", "q1_tau", "q3_tau", "pde_t_blowup", "relative_offset"])
        for r in self.rows:
            w.writerow([r["n"], repr(r["ell"]), r["replicas"], r["exploded"], r["completed"],
                        r["budget_exhausted"], r["median"], r["q1"], r["q3"], self.pde_t_blowup,
                        r["relative_offset"]])
        return buf.getvalue()

    def summary_lines(self):
        out = []
        for r in self.rows:
            med = "nan" if r["median"] is None else f"{r['median']:.6g}"
            out.append(f"blowup N={r['n']} ell={r['ell']:g} exploded={r['exploded']}/{r['replicas']} "
                       f"median_tau={med} pde_T={self.pde_t_blowup}")
        return out


def _criterion_tail(rates):
    # first tail start where f is positive and convex
    report = None
    for a in (0.0, 1.0, 10.0, 100.0, 1e3):
        report = check_blowup_criterion(rates, a)
        if report.positive_on_tail and report.convex_on_tail:
            return report
    return report


def blowup_study(phi, rates, schedule, replicas, master_seed, cap_factor=1024,
                 horizon=None, event_budget=10**10, pde_m=64, workers=None):
    """Explosion times of the particle system against the PDE blow-up time.

    Each replica runs until some site reaches ``cap_factor * ell`` (or the
    horizon, by default ten times the PDE blow-up time, or 10 without one).
    The PDE itself is followed up to the horizon, or up to time 10 when none is given.
    Only exploded replicas enter the ``tau_estimate`` statistics.
    """
    phi = profile_from_dict(phi)
    rates = rates_from_dict(rates)
    criterion = _criterion_tail(rates)
    if not criterion.satisfied:
        warnings.warn(f"blow-up criterion verdict: {criterion.verdict}", stacklevel=2)
    sol = solve_reaction_diffusion(phi, rates, None, PdeGrid(pde_m, t_max=horizon or 10.0))
    t_pde = sol.t_blowup
    if horizon is None:
        horizon = 10.0 * t_pde if t_pde is not None else 10.0
    rows = []
    for n, ell in schedule.pairs():
        params = BdrwParams(n, ell, horizon, cap_factor * ell, [horizon], event_budget)

        def one(r, n=n, ell=ell, params=params):
            init = sample_initial_density(n, ell, phi, RngStream(master_seed, r, f"blowup/n={n}/init"))
            out = bdrw_run(init, rates, params, RngStream(master_seed, r, f"blowup/n={n}/dynamics"))
            return {"status": out.status, "tau": out.tau_estimate, "events": out.events,
                    "hits": [list(h) for h in out.threshold_hits]}

        results = run_replicas(_guarded(one), replicas, workers)
        taus = [res["tau"] for res in results if res.get("status") == "exploded"]
        row = {"n": n, "ell": float(ell), "replicas": replicas,
               "exploded": len(taus),
               "completed": sum(res.get("status") == "completed" for res in results),
               "budget_exhausted": sum(res.get("status") == "budget_exhausted" for res in results),
               "failed": sum("failed" in res for res in results),
               "taus": taus}
        row.update(_stats(taus))
        row["relative_offset"] = (None if not taus or t_pde is None
                                  else (row["median"] - t_pde) / t_pde)
        row["offsets"] = [] if t_pde is None else [(t - t_pde) / t_pde for t in taus]
        row["ladders"] = [res["hits"] for res in results if res.get("status") == "exploded"][:5]
        rows.append(row)
    config = {"phi": phi.to_dict(), "rates": rates.to_dict(), "schedule": schedule.to_dict(),
              "replicas": replicas, "master_seed": master_seed, "cap_factor": cap_factor,
              "horizon": horizon, "event_budget": event_budget, "pde_m": pde_m}
    return BlowupComparison(rows, t_pde, sol.status, criterion.to_dict(), config)
