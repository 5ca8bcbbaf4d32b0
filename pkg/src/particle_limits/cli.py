"""``particle-limits`` command line entry point.

Usage::

    particle-limits COMMAND [--config FILE] [--dotted.key VALUE ...]

Exit status: 0 on success, 1 on a runtime failure (a JSON error report goes to
stderr and ``<dir>/<prefix>.error.json``), 2 on a configuration error.
"""
import argparse
import csv
import io
import json
import os
import sys
import tempfile
import traceback
import warnings

import numpy as np

from .bdrw import BdrwParams, bdrw_run
from .config import COMMANDS, ConfigError, parse_config, parse_flag_value
from .harness import (
    SCHEMA_VERSION,
    blowup_study,
    check_a2,
    fourier_test_functions,
    high_density_study,
    hydrodynamic_study,
)
from .lattice import sample_initial_density, sample_initial_exclusion
from .pde import PdeGrid, check_blowup_criterion, solve_heat, solve_reaction_diffusion
from .profiles import profile_from_dict
from .rates import rates_from_dict
from .rng import RngStream
from .ssep import SsepParams, ssep_run
from .svg import Axes, emit_svg, slope_note


def atomic_write(path, data):
    """Write ``data`` to ``path`` through a temporary file and a rename."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(doc):
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


class Artifacts:
    """Collects output files in memory; :meth:`commit` writes them all at the end."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.files = {}

    def path(self, suffix):
        out = self.cfg.output
        return os.path.join(out["dir"], f"{out['prefix']}{suffix}")

    def add(self, suffix, data):
        self.files[self.path(suffix)] = data

    def json(self, doc):
        self.add(".json", dump_json({"schema": SCHEMA_VERSION, "config": self.cfg.to_dict(), **doc}))

    def plot(self, series, axes):
        if not series:
            return
        if self.cfg.output["svg"]:
            self.add(".svg", emit_svg(series, axes))
        if self.cfg.output["png"]:
            from .figures import render_png
            self.add(".png", render_png(series, axes))

    def commit(self):
        for path in sorted(self.files):
            atomic_write(path, self.files[path])
        return sorted(self.files)


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _profile_series(u, times, rows, label="t"):
    u = list(np.asarray(u, dtype=float)) + [1.0]
    return [(f"{label}={t:.4g}", u, list(r) + [r[0]]) for t, r in zip(times, rows)]


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg, art):
    m = cfg.model
    phi = profile_from_dict(cfg.profile)
    ck = cfg.checkpoint_times()
    n, reps = m["n"], m["replicas"]
    docs, rows, lines = [], [], []
    if m["kind"] == "ssep":
        params = SsepParams(n, cfg.time, ck)
        for r in range(reps):
            init = sample_initial_exclusion(n, phi, RngStream(cfg.seed, r, "simulate/init"))
            traj = ssep_run(init, params, RngStream(cfg.seed, r, "simulate/dynamics"))
            docs.append(traj.to_dict())
            rows.extend(traj.csv_rows(r))
        first, ell = docs[0], 1.0
        events = sum(d["event_count"] for d in docs)
        lines.append(f"simulate ssep N={n} ell=1 replicas={reps} events={events}")
        art.add(".csv", _csv(["replica", "checkpoint_time", "site", "occupation"], rows))
        art.json({"trajectories": docs})
    else:
        rates = rates_from_dict(m["rates"])
        ell = m["ell"]
        params = BdrwParams(n, ell, cfg.time, m["cap_factor"] * ell, ck, m["event_budget"])
        summary = []
        for r in range(reps):
            init = sample_initial_density(n, ell, phi, RngStream(cfg.seed, r, "simulate/init"))
            out = bdrw_run(init, rates, params, RngStream(cfg.seed, r, "simulate/dynamics"))
            docs.append(out.to_dict())
            rows.extend(out.trajectory.csv_rows(r))
            summary.append(out.summary_row(r))
        first = docs[0]["trajectory"]
        counts = {}
        for row in summary:
            counts[row[1]] = counts.get(row[1], 0) + 1
        outcome = " ".join(f"{k}={v}" for k, v in sorted(counts.items()))
        lines.append(f"simulate bdrw N={n} ell={ell:g} replicas={reps} {outcome}")
        art.add(".csv", _csv(["replica", "checkpoint_time", "site", "occupation"], rows))
        art.add(".summary.csv", _csv(["replica", "outcome", "tau_estimate", "events", "max_occupation"],
                                     summary))
        art.json({"outcomes": docs})
    if first["times"]:
        snaps = np.array(first["snapshots"], dtype=float) / ell
        art.plot(_profile_series(np.arange(n) / n, first["times"], snaps),
                 Axes("u", "density", f"replica 0, N={n}"))
    return lines


def cmd_solve(cfg, art):
    phi = profile_from_dict(cfg.profile)
    grid = PdeGrid(cfg.grid["m"], cfg.grid["dt"])
    ck = cfg.checkpoint_times(include_zero=True)
    if cfg.model["kind"] == "ssep":
        sol, eq = solve_heat(phi, cfg.time, grid, ck), "heat"
    else:
        sol = solve_reaction_diffusion(phi, rates_from_dict(cfg.model["rates"]), cfg.time, grid, ck)
        eq = "reaction_diffusion"
    art.add(".csv", sol.to_csv())
    art.json({"equation": eq, "solution": sol.to_dict()})
    if len(sol.times):
        art.plot(_profile_series(sol.u, sol.times, sol.rho), Axes("u", "rho", f"{eq}, M={grid.m}"))
    tb = "" if sol.t_blowup is None else f" t_blowup={sol.t_blowup:.6g}"
    return [f"solve {eq} M={grid.m} status={sol.status} t={sol.final_time:.6g}{tb}"]


def cmd_converge(cfg, art):
    ck = cfg.checkpoint_times()
    schedule = cfg.schedule_obj()
    if cfg.model["kind"] == "ssep":
        report = hydrodynamic_study(cfg.profile, schedule, cfg.time, ck, cfg.study["replicas"], cfg.seed,
                                    fourier_test_functions(cfg.study["k_max"]), cfg.grid["m"],
                                    cfg.threads)
    else:
        m = cfg.model
        report = high_density_study(cfg.profile, m["rates"], schedule, cfg.time, ck, cfg.study["replicas"],
                                    cfg.seed, m["cap_factor"], m["event_budget"], cfg.grid["m"],
                                    cfg.threads)
    art.add(".csv", report.to_csv())
    art.json({"report": report.to_dict()})
    ns = [r["n"] for r in report.rows]
    med = [r["median"] for r in report.rows]
    if all(v is not None for v in med):
        log = all(v > 0 for v in med)
        art.plot([("median error", ns, med)],
                 Axes("N", f"median {report.metric} error", report.study, xlog=log, ylog=log,
                      annotations=[slope_note(report.fit["slope"])], markers=True))
    return report.summary_lines()


def cmd_blowup(cfg, art):
    m = cfg.model
    comp = blowup_study(cfg.profile, m["rates"], cfg.schedule_obj(), cfg.study["replicas"], cfg.seed,
                        m["cap_factor"], cfg.time, m["event_budget"], cfg.grid["m"], cfg.threads)
    art.add(".csv", comp.to_csv())
    art.json({"report": comp.to_dict()})
    series = []
    for row in comp.rows:
        for k, ladder in enumerate(row["ladders"]):
            series.append((f"N={row['n']} replica {k}", [t for _, t in ladder],
                           [y / row["ell"] for y, _ in ladder]))
    art.plot(series, Axes("time", "max occupation / ell", "threshold ladder", ylog=True, markers=True))
    return comp.summary_lines()


def cmd_check(cfg, art):
    c = cfg.check
    if c["kind"] == "criterion":
        rep = check_blowup_criterion(rates_from_dict(cfg.model["rates"]), c["a"], c["s_max"])
        art.json({"criterion": rep.to_dict()})
        return [f"check criterion a={c['a']:g} verdict={rep.verdict} convex={rep.convex_on_tail} "
                f"positive={rep.positive_on_tail} integral_finite={rep.integral_finite}"]
    rule = {"rule": cfg.schedule["rule"], "params": cfg.schedule["params"]}
    rep = check_a2(rule, c["c_grid"], c["log_n_max"])
    art.json({"a2": rep.to_dict()})
    verdicts = {p["verdict"] for p in rep.per_c}
    verdict = next(v for v in ("divergent", "inconclusive", "convergent") if v in verdicts)
    sym = {True: "convergent", False: "divergent", None: "unknown"}[rep.symbolic["convergent"]]
    return [f"check a2 rule={rule['rule']} params={json.dumps(rule['params'], sort_keys=True)} "
            f"verdict={verdict} symbolic={sym} grid_relative={rep.grid_relative}"]


HANDLERS = {"simulate": cmd_simulate, "solve": cmd_solve, "converge": cmd_converge,
            "blowup": cmd_blowup, "check": cmd_check}


def run(cfg, stdout=None):
    """Execute a validated config; returns the list of files written."""
    stdout = stdout or sys.stdout
    art = Artifacts(cfg)
    lines = HANDLERS[cfg.command](cfg, art)
    written = art.commit()
    for line in lines:
        print(line, file=stdout)
    return written


# ---------------------------------------------------------------- argv

def _parse_overrides(extra):
    flags = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"unexpected argument {tok!r}; overrides look like --model.n 256")
        key = tok[2:]
        if "=" in key:
            key, text = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"--{key}: missing value")
            text = extra[i + 1]
            i += 2
        flags[key] = parse_flag_value(text)
    return flags


def build_config(argv):
    parser = argparse.ArgumentParser(prog="particle-limits", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file; flags override its keys")
    args, extra = parser.parse_known_args(argv)
    doc = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(doc, _parse_overrides(extra), command=args.command)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = build_config(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return 2 if exc.code else 0
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            run(cfg)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except Exception as exc:
        report = {"schema": SCHEMA_VERSION, "status": "error", "command": cfg.command,
                  "error": type(exc).__name__, "message": str(exc),
                  "traceback": traceback.format_exc().splitlines()[-6:]}
        text = dump_json(report)
        sys.stderr.write(text)
        try:
            atomic_write(os.path.join(cfg.output["dir"], f"{cfg.output['prefix']}.error.json"), text)
        except OSError:
            pass
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
