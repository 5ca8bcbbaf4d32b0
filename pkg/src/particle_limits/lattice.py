"""Configurations on the discrete torus and their rescaled observables."""
import numpy as np
from scipy.stats import poisson

from .profiles import check_range

EXCLUSION = "exclusion"
UNBOUNDED = "unbounded"
KINDS = (EXCLUSION, UNBOUNDED)


def site(x, n):
    """Reduce a site index onto the torus ``Z / nZ``."""
    return x % n


class Configuration:
    """Occupation numbers ``eta(x)`` for ``x = 0..n-1`` on the torus.

    Exclusion configurations hold values in {0, 1}; unbounded ones hold any
    nonnegative integers. The occupation array is owned by whoever built the
    configuration and is only mutated by a single simulation loop.
    """

    def __init__(self, occupations, kind=UNBOUNDED):
        occ = np.array(occupations, dtype=np.int64)
        if occ.ndim != 1 or occ.size < 1:
            raise ValueError("occupations must be a non-empty 1-d sequence")
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
        self.occupations = occ
        self.kind = kind
        self.validate()

    def validate(self):
        occ = self.occupations
        if occ.size and occ.min() < 0:
            raise ValueError("occupations must be nonnegative")
        if self.kind == EXCLUSION and occ.size and occ.max() > 1:
            raise ValueError("exclusion configuration holds a value outside {0, 1}")

    @property
    def n(self):
        return self.occupations.size

    @property
    def total(self):
        return int(self.occupations.sum())

    def copy(self):
        return Configuration(self.occupations.copy(), self.kind)

    def __eq__(self, other):
        return (isinstance(other, Configuration) and self.kind == other.kind
                and np.array_equal(self.occupations, other.occupations))

    def __repr__(self):
        return f"Configuration({self.occupations.tolist()}, kind={self.kind!r})"

    def to_dict(self, ell=None):
        d = {"n": self.n, "kind": self.kind, "occupations": self.occupations.tolist()}
        if ell is not None:
            d["ell"] = ell
        return d

    @classmethod
    def from_dict(cls, d):
        c = cls(d["occupations"], d["kind"])
        if c.n != d["n"]:
            raise ValueError(f"n={d['n']} does not match {c.n} occupations")
        return c


def _grid(n):
    return np.arange(n) / n


def sample_initial_exclusion(n, profile, stream):
    """Product Bernoulli configuration with ``P(eta(x) = 1) = phi(x / n)``."""
    if n < 2:
        raise ValueError("need n >= 2 sites")
    u = _grid(n)
    check_range(profile, 0.0, 1.0, grid=u)
    p = profile(u)
    occ = (stream.uniforms(n) < p).astype(np.int64)
    return Configuration(occ, EXCLUSION)


def sample_initial_density(n, ell, profile, stream):
    """Product Poisson configuration with ``eta(x) ~ Poisson(ell * phi(x / n))``.

    Sampled by inversion of the Poisson CDF so the stream alone fixes the draw.
    """
    if n < 2:
        raise ValueError("need n >= 2 sites")
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    u = _grid(n)
    check_range(profile, 0.0, None, grid=u)
    lam = ell * profile(u)
    draws = stream.uniforms(n)
    occ = np.zeros(n, dtype=np.int64)
    pos = lam > 0
    if pos.any():
        occ[pos] = poisson.ppf(draws[pos], lam[pos]).astype(np.int64)
    return Configuration(occ, UNBOUNDED)


class EmpiricalMeasure:
    """Atoms of weight ``eta(x) / n`` at ``x / n``."""

    def __init__(self, n, weights):
        self.n = n
        self.weights = np.asarray(weights, dtype=float)

    @property
    def positions(self):
        return _grid(self.n)

    @property
    def mass(self):
        return float(self.weights.sum())

    def atoms(self):
        return list(zip(self.positions.tolist(), self.weights.tolist()))

    def integrate(self, psi):
        """``<pi, psi> = (1/n) sum_x psi(x/n) eta(x)`` for a vectorised test function ``psi``."""
        return float(np.dot(np.asarray(psi(self.positions), dtype=float), self.weights))


def empirical_measure(config):
    return EmpiricalMeasure(config.n, config.occupations / config.n)


class DensityField:
    """Piecewise-linear periodic field with ``X(x / n) = eta(x) / ell``."""

    def __init__(self, n, ell, values):
        self.n = n
        self.ell = ell
        self.values = np.asarray(values, dtype=float)

    @property
    def breakpoints(self):
        return _grid(self.n)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        s = np.mod(u, 1.0) * self.n
        x = np.floor(s).astype(np.int64)
        # mod(u, 1) can round up to exactly 1.0 for tiny negative u
        x = np.minimum(x, self.n - 1)
        frac = s - x
        right = self.values[(x + 1) % self.n]
        left = self.values[x]
        return frac * right + (1.0 - frac) * left

    def sup(self):
        return float(self.values.max())

    def to_dict(self):
        return {"n": self.n, "ell": self.ell, "values": self.values.tolist()}


def density_field(config, ell):
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    return DensityField(config.n, ell, config.occupations / ell)


def _eval_grid(*fields, refine=4):
    pts = [np.asarray(f.breakpoints) for f in fields if getattr(f, "breakpoints", None) is not None]
    if not pts:
        pts = [_grid(64)]
    knots = np.unique(np.mod(np.concatenate(pts), 1.0))
    knots = np.append(knots, knots[0] + 1.0)
    gaps = np.diff(knots)
    steps = np.arange(refine) / refine
    return (knots[:-1, None] + gaps[:, None] * steps[None, :]).ravel()


def sup_norm_distance(a, b, refine=4):
    """``max |a - b|`` over the union of both breakpoint grids refined ``refine``-fold."""
    u = _eval_grid(a, b, refine=refine)
    return float(np.max(np.abs(a(u) - b(u))))
