"""Birth and death rate functions ``b, d : R+ -> R+`` built from named families."""
import numpy as np
from scipy.interpolate import CubicSpline


class RateFunction:
    name = None

    def __call__(self, s):
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    def to_dict(self):
        return {"name": self.name, **self.params()}

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class Constant(RateFunction):
    name = "constant"

    def __init__(self, value=0.0):
        self.value = float(value)

    def __call__(self, s):
        return np.full(np.shape(s), self.value, dtype=float)

    def params(self):
        return {"value": self.value}


class Linear(RateFunction):
    name = "linear"

    def __init__(self, coef=1.0):
        self.coef = float(coef)

    def __call__(self, s):
        return self.coef * np.asarray(s, dtype=float)

    def params(self):
        return {"coef": self.coef}


class Power(RateFunction):
    """``coef * s**p``"""

    name = "power"

    def __init__(self, p, coef=1.0):
        self.p = float(p)
        self.coef = float(coef)
        if self.p < 0:
            raise ValueError("power rate needs p >= 0")

    def __call__(self, s):
        return self.coef * np.power(np.asarray(s, dtype=float), self.p)

    def params(self):
        return {"p": self.p, "coef": self.coef}


class Tabulated(RateFunction):
    """Cubic spline through ``(s_i, v_i)``; beyond the last knot the spline is extrapolated."""

    name = "tabulated"

    def __init__(self, s, values):
        self.s = np.asarray(s, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.s.size < 2 or self.s.shape != self.values.shape:
            raise ValueError("tabulated rate needs matching s and values with >= 2 points")
        if np.any(np.diff(self.s) <= 0):
            raise ValueError("tabulated rate knots must increase")
        self._spline = CubicSpline(self.s, self.values, bc_type="natural")

    def __call__(self, s):
        return self._spline(np.asarray(s, dtype=float))

    def params(self):
        return {"s": self.s.tolist(), "values": self.values.tolist()}

    def __repr__(self):
        return f"Tabulated({self.s.size} knots on [{self.s[0]:g}, {self.s[-1]:g}])"


FAMILIES = {cls.name: cls for cls in (Constant, Linear, Power, Tabulated)}
FAMILIES["zero"] = Constant


def rate_from_dict(spec):
    if isinstance(spec, RateFunction):
        return spec
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in FAMILIES:
        raise ValueError(f"unknown rate family {name!r}; choose from {sorted(FAMILIES)}")
    try:
        return FAMILIES[name](**spec)
    except TypeError as exc:
        raise ValueError(f"bad parameters for rate family {name!r}: {exc}") from None


class RateFunctions:
    """Birth rate ``b`` and death rate ``d``; the reaction term is ``f = b - d``."""

    def __init__(self, birth=None, death=None, check_upto=1e3):
        self.birth = Constant(0.0) if birth is None else birth
        self.death = Constant(0.0) if death is None else death
        self.validate(check_upto)

    def validate(self, upto=1e3):
        s = np.concatenate([[0.0], np.geomspace(1e-6, upto, 400)])
        b = self.birth(s)
        d = self.death(s)
        if np.any(b < 0) or np.any(np.isnan(b)):
            raise ValueError(f"birth rate {self.birth!r} takes negative values")
        if np.any(d < 0) or np.any(np.isnan(d)):
            raise ValueError(f"death rate {self.death!r} takes negative values")
        if d[0] != 0.0:
            raise ValueError(f"death rate must vanish at 0, got d(0) = {d[0]}")

    def f(self, s):
        return self.birth(s) - self.death(s)

    def __call__(self, s):
        return self.f(s)

    def to_dict(self):
        return {"birth": self.birth.to_dict(), "death": self.death.to_dict()}

    def __repr__(self):
        return f"RateFunctions(birth={self.birth!r}, death={self.death!r})"

    def __eq__(self, other):
        return isinstance(other, RateFunctions) and self.to_dict() == other.to_dict()


def rates_from_dict(spec):
    """Rates from either an explicit ``{"birth": ..., "death": ...}`` block or a preset.

    Presets (``{"family": name, ...}``):

    - ``none``: ``b = d = 0``
    - ``power``: ``b(s) = coef * s**p``, ``d = 0``
    - ``logistic``: ``b(s) = r * s``, ``d(s) = r * s**2 / K``
    - ``death``: ``b = 0``, ``d(s) = mu * s**q`` (``q`` defaults to 1)
    """
    if isinstance(spec, RateFunctions):
        return spec
    spec = dict(spec)
    if "family" in spec:
        family = spec.pop("family")
        try:
            if family == "none":
                if spec:
                    raise TypeError(f"unexpected keys {sorted(spec)}")
                return RateFunctions()
            if family == "power":
                return RateFunctions(birth=Power(**spec))
            if family == "logistic":
                r = float(spec.pop("r", 1.0))
                K = float(spec.pop("K", 1.0))
                if spec:
                    raise TypeError(f"unexpected keys {sorted(spec)}")
                return RateFunctions(birth=Linear(r), death=Power(2.0, r / K))
            if family == "death":
                mu = float(spec.pop("mu", 1.0))
                q = float(spec.pop("q", 1.0))
                if spec:
                    raise TypeError(f"unexpected keys {sorted(spec)}")
                return RateFunctions(death=Power(q, mu))
        except TypeError as exc:
            raise ValueError(f"bad parameters for rate preset {family!r}: {exc}") from None
        raise ValueError(f"unknown rate preset {family!r}; choose from none, power, logistic, death")
    unknown = set(spec) - {"birth", "death"}
    if unknown:
        raise ValueError(f"unknown rate keys {sorted(unknown)}")
    return RateFunctions(
        birth=rate_from_dict(spec["birth"]) if "birth" in spec else None,
        death=rate_from_dict(spec["death"]) if "death" in spec else None,
    )
