"""Reference solvers for the periodic heat and reaction-diffusion equations on [0, 1).

Both use second-order centered differences in space and classical RK4 in time,
through one shared integrator, so a zero reaction term reproduces the heat
solver bit for bit.
"""
from dataclasses import dataclass, field
import csv
import io
import math
import warnings

import numba as nb
import numpy as np
from scipy import integrate

from .profiles import TabulatedProfile

RESOLVED = "resolved"
BLEW_UP = "blew_up"
STEP_UNDERFLOW = "step_underflow"


@dataclass
class PdeGrid:
    m: int = 256
    dt: float = None  # fixed step; None means adaptive
    norm_ceiling: float = 1e8
    dt_floor: float = 1e-14
    safety: float = 0.05
    t_max: float = 100.0  # horizon used when only the blow-up stop rule is set

    def __post_init__(self):
        if self.m < 8:
            raise ValueError("need at least 8 grid points")
        if self.dt is not None:
            if not self.dt > 0:
                raise ValueError("fixed dt must be positive")
            if self.dt > self.cfl_dt:
                raise ValueError(f"fixed dt={self.dt} violates the diffusive CFL bound {self.cfl_dt}")

    @property
    def h(self):
        return 1.0 / self.m

    @property
    def cfl_dt(self):
        return 0.5 * self.h**2

    @property
    def u(self):
        return np.arange(self.m) / self.m

    def to_dict(self):
        return {"m": self.m, "dt": self.dt, "norm_ceiling": self.norm_ceiling,
                "dt_floor": self.dt_floor, "safety": self.safety, "t_max": self.t_max}


@dataclass
class PdeSolution:
    times: np.ndarray
    rho: np.ndarray
    status: str
    final_time: float
    t_blowup: float = None
    steps: int = 0
    grid: PdeGrid = field(default_factory=PdeGrid)

    @property
    def u(self):
        return self.grid.u

    @property
    def resolved(self):
        return self.status == RESOLVED

    def profile_at(self, k):
        """Periodic cubic interpolant of the ``k``-th stored snapshot."""
        return TabulatedProfile(self.rho[k])

    def to_dict(self):
        return {
            "status": {"status": self.status, "final_time": self.final_time,
                       "t_blowup": self.t_blowup, "steps": self.steps},
            "grid": self.grid.to_dict(),
            "times": self.times.tolist(),
            "rho": self.rho.tolist(),
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "u", "rho"])
        u = self.u
        for t, row in zip(self.times, self.rho):
            for x, r in zip(u, row):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(r))])
        return buf.getvalue()


@nb.njit(cache=True)
def _laplacian(y, out, scale):
    m = y.size
    out[0] = (y[m - 1] - 2.0 * y[0] + y[1]) * scale
    for i in range(1, m - 1):
        out[i] = (y[i - 1] - 2.0 * y[i] + y[i + 1]) * scale
    out[m - 1] = (y[m - 2] - 2.0 * y[m - 1] + y[0]) * scale


def _derivative_bound(f, rho):
    """``max |f'(rho)|`` by centered differences (one-sided at 0, where f may be undefined below)."""
    delta = 1e-6 * np.maximum(1.0, np.abs(rho))
    up = rho + delta
    down = np.maximum(rho - delta, 0.0)
    vals = f(np.concatenate((up, down)))
    m = rho.size
    return float(np.max(np.abs((vals[:m] - vals[m:]) / (up - down))))


def estimate_blowup(times, norms, ceiling_decades=1.0):
    """Blow-up time from the tail of ``||rho(t)||_inf``.

    Fits the growth exponent ``p`` from ``d norm/dt ~ norm**p`` over the last
    decade of norm growth, then extrapolates ``norm**(1 - p)`` linearly to zero.
    Falls back to ``p = 2`` (reciprocal norm) when the fit is unusable.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    top = norms[-1]
    sel = norms >= top / 10.0**ceiling_decades
    t, n = times[sel], norms[sel]
    if t.size < 4:
        t, n = times[-4:], norms[-4:]
    p = 2.0
    if t.size >= 4 and np.all(np.diff(t) > 0) and np.all(np.diff(n) > 0):
        mid = 0.5 * (n[1:] + n[:-1])
        rate = np.diff(n) / np.diff(t)
        fit = np.polyfit(np.log(mid), np.log(rate), 1)[0]
        if np.isfinite(fit) and 1.05 < fit < 10.0:
            p = float(fit)
    z = n ** (1.0 - p)
    slope, intercept = np.polyfit(t, z, 1)
    if not slope < 0:
        return float(times[-1]), p
    return max(float(times[-1]), float(-intercept / slope)), p


def _integrate(phi, horizon, grid, checkpoints, reaction):
    m = grid.m
    scale = float(m * m)
    u = grid.u
    rho = np.array(np.broadcast_to(np.asarray(phi(u), dtype=float), (m,)))
    if checkpoints is None:
        checkpoints = [0.0, horizon] if horizon is not None else [0.0]
    ck = np.asarray(checkpoints, dtype=float)
    if ck.size and (np.any(np.diff(ck) <= 0) or ck[0] < 0):
        raise ValueError("checkpoints must be increasing and nonnegative")
    stop = grid.t_max if horizon is None else float(horizon)
    if ck.size and ck[-1] > stop:
        raise ValueError("checkpoints extend past the horizon")

    k1, k2, k3, k4 = (np.empty(m) for _ in range(4))
    tmp = np.empty(m)

    def rhs(y, out):
        _laplacian(y, out, scale)
        if reaction is not None:
            out += reaction(y)
        return out

    times, snaps = [], []
    kc = 0
    t = 0.0
    while kc < ck.size and ck[kc] <= t:
        times.append(ck[kc])
        snaps.append(rho.copy())
        kc += 1
    hist_t, hist_n = [0.0], [float(np.max(np.abs(rho)))]
    base = grid.dt if grid.dt is not None else grid.cfl_dt
    status = RESOLVED
    steps = 0
    while t < stop:
        target = ck[kc] if kc < ck.size else stop
        dt = base
        if reaction is not None and grid.dt is None:
            dt = min(dt, grid.safety / (1.0 + _derivative_bound(reaction, rho)))
        if dt < grid.dt_floor:
            status = STEP_UNDERFLOW
            break
        land = t + dt >= target
        if land:
            dt = target - t
        rhs(rho, k1)
        np.multiply(k1, 0.5 * dt, out=tmp)
        tmp += rho
        rhs(tmp, k2)
        np.multiply(k2, 0.5 * dt, out=tmp)
        tmp += rho
        rhs(tmp, k3)
        np.multiply(k3, dt, out=tmp)
        tmp += rho
        rhs(tmp, k4)
        k2 += k3
        k2 *= 2.0
        k1 += k2
        k1 += k4
        k1 *= dt / 6.0
        rho += k1
        t = target if land else t + dt
        steps += 1
        norm = float(np.max(np.abs(rho)))
        if reaction is not None:
            hist_t.append(t)
            hist_n.append(norm)
        if not math.isfinite(norm) or norm >= grid.norm_ceiling:
            status = BLEW_UP
            break
        while kc < ck.size and ck[kc] <= t:
            times.append(ck[kc])
            snaps.append(rho.copy())
            kc += 1
    if status == RESOLVED and horizon is None:
        # blow-up-only runs that reach t_max without exploding
        if not times or times[-1] != t:
            times.append(t)
            snaps.append(rho.copy())
    t_blowup = None
    if status == BLEW_UP or (status == STEP_UNDERFLOW and hist_n[-1] >= 1e4 * max(hist_n[0], 1.0)):
        # a collapsed step after sustained growth still carries a usable estimate
        t_blowup, _ = estimate_blowup(hist_t, hist_n)
    rho_out = np.array(snaps) if snaps else np.empty((0, m))
    return PdeSolution(np.array(times, dtype=float), rho_out, status, float(t), t_blowup, steps, grid)


def solve_heat(phi, horizon, grid=None, checkpoints=None):
    """``d_t rho = d_uu rho`` on the periodic unit interval."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    return _integrate(phi, horizon, grid or PdeGrid(), checkpoints, None)


def solve_reaction_diffusion(phi, rates, horizon, grid=None, checkpoints=None):
    """``d_t rho = d_uu rho + f(rho)`` with ``f = b - d``.

    ``horizon=None`` runs until the norm ceiling (or ``grid.t_max``). Returns
    status ``blew_up`` with an extrapolated blow-up time once the sup norm
    reaches the ceiling, ``step_underflow`` if the step collapses first.
    """
    if horizon is not None and not horizon > 0:
        raise ValueError("horizon must be positive, or None for the blow-up stop rule")
    return _integrate(phi, horizon, grid or PdeGrid(), checkpoints, rates.f)


@dataclass
class BlowupCriterionReport:
    convex_on_tail: bool
    positive_on_tail: bool
    integral_finite: bool  # None when the tail fit is inconclusive
    a: float
    s_max: float
    verdict: str
    tail_exponent: float = None
    log_exponent: float = None
    integral_head: float = None

    @property
    def satisfied(self):
        return self.verdict == "satisfied"

    def to_dict(self):
        return dict(self.__dict__)


def _log_grid(a, s_max, points):
    # geometric spacing in s - a, starting exactly at a
    off = np.geomspace(1e-6, 1.0, points) - 1e-6
    return a + (s_max - a) * off / off[-1]


def check_blowup_criterion(rates, a, s_max=1e6, points=400, band=0.05):
    """Test convexity and positivity of ``f`` on ``[a, s_max]`` and finiteness of the
    integral of ``1/f`` over ``[a, inf)``.

    The tail beyond ``s_max`` is fitted as ``C s**q (log s)**beta``. When that fit
    puts ``q`` at 1 (within ``band / 10``) the log exponent decides (finite iff
    ``beta > 1``); otherwise the power decides (finite iff ``q > 1``). Exponents
    that stay within ``band`` of 1 give the verdict ``inconclusive``.
    """
    if a < 0 or not s_max > a:
        raise ValueError("need 0 <= a < s_max")
    f = rates.f
    s = _log_grid(float(a), float(s_max), points)
    fs = np.asarray(f(s), dtype=float)
    positive = bool(np.all(fs > 0))

    s0, s1, s2 = s[:-2], s[1:-1], s[2:]
    f0, f1, f2 = fs[:-2], fs[1:-1], fs[2:]
    dd = ((f2 - f1) / (s2 - s1) - (f1 - f0) / (s1 - s0)) / (s2 - s0)
    tol = 1e-8 * (np.abs(f0) + np.abs(f1) + np.abs(f2)) / (s2 - s0) ** 2
    convex = bool(np.all(dd >= -tol))

    q = beta = head = None
    finite = False
    if positive:
        with warnings.catch_warnings():
            # slowly convergent heads are expected exactly when the tail decides
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            head, _ = integrate.quad(lambda x: 1.0 / float(f(np.array([x]))[0]), a, s_max, limit=200)
        ts = np.geomspace(max(s_max / 1e3, a, 1e-300), s_max, 64)
        ft = np.asarray(f(ts), dtype=float)
        q = float(np.polyfit(np.log(ts), np.log(ft), 1)[0])
        exact_one = False
        if ts[0] > math.e:
            # a pure power fit mistakes s (log s)**beta for s**(1 + beta / log s)
            design = np.column_stack([np.log(ts), np.log(np.log(ts)), np.ones_like(ts)])
            (q2, b2, _), *_ = np.linalg.lstsq(design, np.log(ft), rcond=None)
            if abs(q2 - 1.0) <= band:
                q, beta = float(q2), float(b2)
                exact_one = abs(q2 - 1.0) <= 0.1 * band
        if exact_one:
            finite = beta > 1.0 if abs(beta - 1.0) > band else None
        elif q > 1.0 + band:
            finite = True
        elif q < 1.0 - band:
            finite = False
        else:
            finite = None
    if not (positive and convex) or finite is False:
        verdict = "not satisfied"
    elif finite is None:
        verdict = "inconclusive"
    else:
        verdict = "satisfied"
    return BlowupCriterionReport(convex, positive, finite, float(a), float(s_max), verdict,
                                 q, beta, head)
