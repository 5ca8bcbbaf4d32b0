"""Initial-condition profiles on the unit torus [0, 1).

A profile is a named family with parameters so that configs can carry it
as ``{"name": "cosine", "mean": 0.5, "amp": 0.25}``.
"""
import math

import numpy as np
from scipy.interpolate import CubicSpline


class Profile:
    name = None
    #: grid points where the profile has structure worth sampling (None for analytic families)
    breakpoints = None

    def __call__(self, u):
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    def to_dict(self):
        return {"name": self.name, **self.params()}

    def bounds(self, samples=4096):
        """Approximate (min, max) of the profile on a fine periodic grid."""
        values = self(np.arange(samples) / samples)
        return float(values.min()), float(values.max())

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class ConstantProfile(Profile):
    name = "constant"

    def __init__(self, value):
        self.value = float(value)

    def __call__(self, u):
        return np.full(np.shape(u), self.value, dtype=float)

    def params(self):
        return {"value": self.value}

    def bounds(self, samples=None):
        return self.value, self.value


class CosineProfile(Profile):
    """``mean + amp * cos(2 pi k (u - phase))``"""

    name = "cosine"

    def __init__(self, mean, amp, k=1, phase=0.0):
        self.mean = float(mean)
        self.amp = float(amp)
        self.k = int(k)
        self.phase = float(phase)
        if self.k < 1:
            raise ValueError("cosine profile needs k >= 1")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return self.mean + self.amp * np.cos(2 * np.pi * self.k * (u - self.phase))

    def params(self):
        return {"mean": self.mean, "amp": self.amp, "k": self.k, "phase": self.phase}

    def bounds(self, samples=None):
        return self.mean - abs(self.amp), self.mean + abs(self.amp)


class LogisticBumpProfile(Profile):
    """Smooth periodic plateau: ``base + height / (1 + exp(steepness * (sin^2(pi (u - center)) - radius)))``.

    ``sin^2(pi (u - center))`` is a smooth periodic stand-in for the squared
    distance to ``center``; ``radius`` in (0, 1) sets the plateau width.
    """

    name = "logistic_bump"

    def __init__(self, base=0.0, height=1.0, center=0.5, radius=0.25, steepness=20.0):
        self.base = float(base)
        self.height = float(height)
        self.center = float(center)
        self.radius = float(radius)
        self.steepness = float(steepness)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        z = self.steepness * (np.sin(np.pi * (u - self.center)) ** 2 - self.radius)
        # exp overflow is harmless here: it only drives the bump term to 0
        with np.errstate(over="ignore"):
            return self.base + self.height / (1.0 + np.exp(z))

    def params(self):
        return {"base": self.base, "height": self.height, "center": self.center,
                "radius": self.radius, "steepness": self.steepness}


class TabulatedProfile(Profile):
    """Values on the uniform grid ``u_m = m / M`` with periodic cubic interpolation."""

    name = "tabulated"

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 3:
            raise ValueError("tabulated profile needs at least 3 grid values")
        self.values = values
        m = values.size
        self.breakpoints = np.arange(m) / m
        knots = np.arange(m + 1) / m
        self._spline = CubicSpline(knots, np.append(values, values[0]), bc_type="periodic")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return self._spline(np.mod(u, 1.0))

    def params(self):
        return {"values": self.values.tolist()}


PROFILES = {
    cls.name: cls
    for cls in (ConstantProfile, CosineProfile, LogisticBumpProfile, TabulatedProfile)
}


def profile_from_dict(spec):
    """Build a profile from ``{"name": ..., **params}``; unknown names or keys raise ValueError."""
    if isinstance(spec, Profile):
        return spec
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    try:
        return PROFILES[name](**spec)
    except TypeError as exc:
        raise ValueError(f"bad parameters for profile {name!r}: {exc}") from None


def check_range(profile, lower=0.0, upper=None, grid=None):
    """Raise ValueError if the profile leaves ``[lower, upper]`` on ``grid`` (or its analytic bounds)."""
    if grid is None:
        lo, hi = profile.bounds()
    else:
        vals = profile(grid)
        lo, hi = float(vals.min()), float(vals.max())
    if lo < lower or (upper is not None and hi > upper) or math.isnan(lo) or math.isnan(hi):
        rng = f"[{lower}, {upper}]" if upper is not None else f">= {lower}"
        raise ValueError(f"profile {profile!r} takes values in [{lo:g}, {hi:g}], outside {rng}")
