"""Analytic germs on the orbit sphere and horn-map data.

A :class:`Germ` is a truncated Taylor expansion around ``0`` (variable ``h``)
or around ``inf`` (variable ``u = 1/h``).  Coefficients are always stored in
the local chart variable, so ``coeffs[n]`` multiplies ``h**n`` for a germ at
the origin and ``h**(-n)`` for a germ at infinity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DomainMismatch,
    NewtonDiverged,
    OrderLoss,
    OutsideRadius,
    TailTooLarge,
)

DEFAULT_ORDER = 32
FOUR_PI_SQ = 4.0 * math.pi**2

CENTERS = ("0", "inf")


def _as_coeffs(coeffs: Sequence[complex] | np.ndarray) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(coeffs, dtype=complex)).copy()
    if arr.ndim != 1:
        raise ConfigError("germ coefficients must form a flat sequence")
    if arr.size == 0:
        arr = np.zeros(1, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Germ:
    """Truncated convergent power series with a declared radius.

    Parameters
    ----------
    coeffs
        Taylor coefficients in the chart variable (``h`` at ``0``,
        ``1/h`` at ``inf``).
    radius
        Declared radius of convergence in the chart variable; may be
        ``math.inf``.  Evaluation at or beyond it raises
        :class:`OutsideRadius`.
    center
        ``"0"`` or ``"inf"``.
    tail
        Magnitude of the neglected tail when the germ was produced from
        samples (zero for exact input).
    """

    coeffs: np.ndarray
    radius: float = math.inf
    center: str = "0"
    tail: float = 0.0

    def __init__(self, coeffs, radius: float = math.inf, center: str = "0", tail: float = 0.0):
        if center not in CENTERS:
            raise ConfigError(f"germ center must be one of {CENTERS}, got {center!r}")
        radius = float(radius)
        if not radius > 0:
            raise ConfigError("germ radius must be positive")
        object.__setattr__(self, "coeffs", _as_coeffs(coeffs))
        object.__setattr__(self, "radius", radius)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "tail", float(tail))

    # -- basic properties -------------------------------------------------
    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def chart(self, h):
        """Map a point of the sphere to the local chart variable."""
        h = np.asarray(h, dtype=complex)
        if self.center == "0":
            return h
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(h == 0, np.inf, 1.0 / h)

    def _check_radius(self, u: np.ndarray) -> None:
        if math.isinf(self.radius):
            return
        bad = np.abs(u) >= self.radius
        if np.any(bad):
            worst = np.asarray(u)[bad].ravel()[0]
            raise OutsideRadius(
                f"|local variable|={abs(worst):.3g} outside declared radius {self.radius:.3g}"
            )

    # -- evaluation --------------------------------------------------------
    def eval_chart(self, u, *, check: bool = True):
        """Evaluate the series at chart variable ``u``."""
        u = np.asarray(u, dtype=complex)
        if check:
            self._check_radius(u)
        return np.polynomial.polynomial.polyval(u, self.coeffs)

    def deriv_chart(self, u, *, check: bool = True):
        """Derivative with respect to the chart variable."""
        u = np.asarray(u, dtype=complex)
        if check:
            self._check_radius(u)
        if self.coeffs.size < 2:
            return np.zeros_like(u)
        return np.polynomial.polynomial.polyval(u, np.polynomial.polynomial.polyder(self.coeffs))

    def __call__(self, h, *, check: bool = True):
        """Evaluate at a point ``h`` of the sphere (not the chart variable)."""
        return self.eval_chart(self.chart(h), check=check)

    def derivative(self, h, *, check: bool = True):
        """Derivative with respect to ``h`` itself."""
        u = self.chart(h)
        d = self.deriv_chart(u, check=check)
        if self.center == "0":
            return d
        return -d * u * u

    def samples(self, n: int, sample_radius: float) -> np.ndarray:
        """Values on ``n`` equispaced chart points of modulus ``sample_radius``."""
        u = sample_radius * np.exp(2j * np.pi * np.arange(n) / n)
        return self.eval_chart(u)

    def sup_derivative(self, disc_radius: float, n: int = 256) -> float:
        """Sampled sup of ``|d/du germ|`` over the closed chart disc.

        By the maximum principle the sup is attained on the boundary circle.
        """
        if disc_radius <= 0:
            return abs(self.coeffs[1]) if self.coeffs.size > 1 else 0.0
        u = disc_radius * np.exp(2j * np.pi * np.arange(n) / n)
        return float(np.max(np.abs(self.deriv_chart(u, check=False))))

    def estimated_radius(self) -> float:
        """Root-test estimate of the radius (diagnostic only)."""
        c = np.abs(self.coeffs)
        n = np.arange(c.size)
        mask = (n >= max(2, c.size // 2)) & (c > 0)
        if not np.any(mask):
            return math.inf
        return float(np.min(c[mask] ** (-1.0 / n[mask])))

    # -- conversions -------------------------------------------------------
    def truncated(self, order: int) -> "Germ":
        c = np.zeros(order + 1, dtype=complex)
        k = min(order + 1, self.coeffs.size)
        c[:k] = self.coeffs[:k]
        return Germ(c, self.radius, self.center, self.tail)

    def to_json(self) -> dict:
        return germ_to_json(self)


def zero_germ(center: str = "0") -> Germ:
    return Germ([0.0], math.inf, center)


def linear_germ(slope: complex, center: str = "0", radius: float = math.inf) -> Germ:
    """The germ ``u -> slope * u`` in the chart at ``center``."""
    return Germ([0.0, slope], radius, center)


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------

GERM_SCHEMA = {
    "type": "object",
    "required": ["center", "coeffs", "radius"],
    "properties": {
        "center": {"enum": list(CENTERS)},
        "coeffs": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "radius": {
            "anyOf": [
                {"type": "number", "exclusiveMinimum": 0},
                {"enum": ["inf"]},
            ]
        },
    },
    "additionalProperties": False,
}


def germ_to_json(g: Germ) -> dict:
    return {
        "center": g.center,
        "coeffs": [[float(c.real), float(c.imag)] for c in g.coeffs],
        "radius": "inf" if math.isinf(g.radius) else g.radius,
    }


def germ_from_json(obj: dict | str) -> Germ:
    import jsonschema

    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        jsonschema.validate(obj, GERM_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid germ: {exc.message}") from exc
    radius = math.inf if obj["radius"] == "inf" else float(obj["radius"])
    coeffs = [complex(re, im) for re, im in obj["coeffs"]]
    return Germ(coeffs, radius, obj["center"])


# ---------------------------------------------------------------------------
# Modulus data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModulusData:
    """Formal invariant plus the two analytic parts of a horn-map pair.

    The horn maps are ``psi0(h) = h exp(4 pi^2 mu + phi0(h))`` near ``0`` and
    ``psi_inf(h) = h exp(phi_inf(h))`` near ``inf``.
    """

    mu: complex
    phi0: Germ
    phi_inf: Germ

    def __init__(self, mu: complex, phi0: Germ | None = None, phi_inf: Germ | None = None):
        phi0 = zero_germ("0") if phi0 is None else phi0
        phi_inf = zero_germ("inf") if phi_inf is None else phi_inf
        if phi0.center != "0":
            raise ConfigError("phi0 must be a germ at 0")
        if phi_inf.center != "inf":
            raise ConfigError("phi_inf must be a germ at inf")
        for name, g in (("phi0", phi0), ("phi_inf", phi_inf)):
            scale = max(1.0, float(np.max(np.abs(g.coeffs))))
            if abs(g.coeffs[0]) > 1e-12 * scale:
                raise ConfigError(f"{name} must vanish at its center")
        object.__setattr__(self, "mu", complex(mu))
        object.__setattr__(self, "phi0", phi0)
        object.__setattr__(self, "phi_inf", phi_inf)

    @property
    def is_trivial(self) -> bool:
        return self.phi0.is_zero and self.phi_inf.is_zero

    @property
    def radii(self) -> tuple[float, float]:
        return self.phi0.radius, self.phi_inf.radius

    def to_json(self) -> dict:
        return {
            "mu": [self.mu.real, self.mu.imag],
            "phi0": germ_to_json(self.phi0),
            "phi_inf": germ_to_json(self.phi_inf),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModulusData":
        mu = obj.get("mu", 0.0)
        if isinstance(mu, (list, tuple)):
            mu = complex(mu[0], mu[1])
        phi0 = germ_from_json(obj["phi0"]) if "phi0" in obj else None
        phi_inf = germ_from_json(obj["phi_inf"]) if "phi_inf" in obj else None
        return cls(complex(mu), phi0, phi_inf)


def eval_psi(m: ModulusData, which: str, h):
    """Evaluate a horn map of the modulus.

    ``which`` is ``"0"`` for ``psi0(h) = h exp(4 pi^2 mu + phi0(h))`` and
    ``"inf"`` for ``psi_inf(h) = h exp(phi_inf(h))``.
    """
    h = np.asarray(h, dtype=complex)
    return h * np.exp(log_psi_ratio(m, which, h))


def log_psi_ratio(m: ModulusData, which: str, h=None, *, log_h=None):
    """``log(psi(h)/h)``, optionally from ``log h`` to avoid over/underflow."""
    if which == "0":
        if log_h is not None:
            h = np.exp(np.asarray(log_h, dtype=complex))
        return FOUR_PI_SQ * m.mu + m.phi0(h)
    if which == "inf":
        if log_h is not None:
            u = np.exp(-np.asarray(log_h, dtype=complex))
            return m.phi_inf.eval_chart(u)
        return m.phi_inf(h)
    raise ConfigError(f"which must be '0' or 'inf', got {which!r}")


# ---------------------------------------------------------------------------
# Truncated power-series algebra for maps tangent to a linear map at 0
# ---------------------------------------------------------------------------


def _series_mul(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    return np.convolve(a[: n + 1], b[: n + 1])[: n + 1]


def _pad(c: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n + 1, dtype=complex)
    k = min(n + 1, c.size)
    out[:k] = c[:k]
    return out


def germ_compose(g1: Germ, g2: Germ, order: int = DEFAULT_ORDER) -> Germ:
    """Truncated composition ``g1 o g2`` of two maps fixing the center."""
    if g1.center != g2.center:
        raise ConfigError("cannot compose germs with different centers")
    if abs(g2.coeffs[0]) > 1e-14:
        raise ConfigError("inner germ must fix its center")
    a = _pad(g1.coeffs, order)
    b = _pad(g2.coeffs, order)
    # Horner scheme in the series ring
    acc = np.zeros(order + 1, dtype=complex)
    for coeff in a[::-1]:
        acc = _series_mul(acc, b, order)
        acc[0] += coeff
    radius = g2.radius
    if not math.isinf(g1.radius):
        radius = _image_radius(g2, g1.radius)
    return Germ(acc, radius, g1.center)


def _image_radius(inner: Germ, outer_radius: float) -> float:
    """Largest sampled radius whose image under ``inner`` stays in the outer disc."""
    top = inner.radius if not math.isinf(inner.radius) else 1e6
    lo, hi = 0.0, top
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        u = mid * 0.999 * np.exp(2j * np.pi * np.arange(128) / 128)
        if np.max(np.abs(inner.eval_chart(u, check=False))) < outer_radius:
            lo = mid
        else:
            hi = mid
    return max(lo, 1e-300)


def germ_invert(g: Germ, order: int = DEFAULT_ORDER) -> Germ:
    """Compositional inverse of a map ``a1 h + a2 h^2 + ...`` with ``a1 != 0``.

    Computed by Newton iteration in the series ring, doubling the precision
    at each pass.  The returned radius is a conservative root-test estimate.
    """
    c = _pad(g.coeffs, order)
    if abs(c[0]) > 1e-14:
        raise ConfigError("germ to invert must fix its center")
    if c.size < 2 or abs(c[1]) == 0:
        raise OrderLoss("cannot invert a germ with vanishing multiplier")
    inv = np.zeros(order + 1, dtype=complex)
    inv[1] = 1.0 / c[1]
    prec = 1
    deriv = np.polynomial.polynomial.polyder(c)
    while prec < order:
        prec = min(2 * prec, order)
        # inv <- inv - (g(inv) - id) / g'(inv)
        comp = germ_compose(Germ(c[: prec + 1]), Germ(inv[: prec + 1]), prec).coeffs
        comp = _pad(comp, prec)
        comp[1] -= 1.0
        dcomp = germ_compose(Germ(_pad(deriv, prec)), Germ(inv[: prec + 1]), prec).coeffs
        correction = _series_div(comp, _pad(dcomp, prec), prec)
        inv[: prec + 1] -= correction
    if not np.all(np.isfinite(inv)):
        raise OrderLoss("series reversion overflowed")
    est = Germ(inv, math.inf, g.center).estimated_radius()
    radius = min(est, g.radius) * 0.5 if math.isfinite(min(est, g.radius)) else math.inf
    return Germ(inv, radius, g.center)


def _series_div(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    if b[0] == 0:
        raise OrderLoss("series division by a non-unit")
    out = np.zeros(n + 1, dtype=complex)
    for k in range(n + 1):
        s = a[k] - np.dot(out[:k], b[k:0:-1]) if k else a[0]
        out[k] = s / b[0]
    return out


def invert_at(g: Germ, y: complex, guess: complex | None = None, tol: float = 1e-14,
              max_iter: int = 50) -> complex:
    """Pointwise inverse ``h`` with ``g(h) = y`` by Newton's method."""
    h = complex(y / g.coeffs[1]) if guess is None else complex(guess)
    for _ in range(max_iter):
        val = complex(g.eval_chart(h)) - y
        d = complex(g.deriv_chart(h))
        if d == 0:
            break
        step = val / d
        h -= step
        if abs(step) <= tol * max(1.0, abs(h)):
            return h
    raise NewtonDiverged(f"pointwise germ inversion failed near y={y!r}")


# ---------------------------------------------------------------------------
# Real structure and sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RealConditionReport:
    residual: float
    sample_radius: float
    samples: int
    holds: bool = field(default=False)


def check_real_condition(m: ModulusData, samples: int = 64, tol: float = 1e-12) -> RealConditionReport:
    """Check ``conj(phi0(conj h)) = -phi_inf(1/h)`` on a common circle.

    Here ``phi_inf(1/h)`` is the germ at infinity evaluated at the point
    ``1/h``, whose chart variable is ``h`` itself.  Both sides are therefore
    defined for ``|h| < min(rho0, rho_inf)``.
    """
    if abs(m.mu.imag) > 0:
        raise ConfigError("the real condition requires a real formal invariant")
    common = min(m.phi0.radius, m.phi_inf.radius)
    if not common > 0:
        raise DomainMismatch("no common disc for the two germs")
    r = 0.5 * common if math.isfinite(common) else 0.5
    radii = r * np.array([0.25, 0.5, 1.0])
    h = (radii[:, None] * np.exp(2j * np.pi * (np.arange(samples) + 0.5) / samples)[None, :]).ravel()
    lhs = np.conj(m.phi0.eval_chart(np.conj(h)))
    rhs = -m.phi_inf.eval_chart(h)
    res = float(np.max(np.abs(lhs - rhs)))
    return RealConditionReport(res, r, h.size, res <= tol)


def fourier_coefficients(values, sample_radius: float) -> np.ndarray:
    """Taylor coefficients from equispaced samples on a circle."""
    values = np.asarray(values, dtype=complex)
    n = values.size
    c = np.fft.fft(values) / n
    return c / sample_radius ** np.arange(n)


def germ_from_samples(values, sample_radius: float, *, center: str = "0",
                      radius: float | None = None, n_coeffs: int | None = None,
                      check_tail: bool = True, noise: float = 1e-12) -> Germ:
    """Build a germ from equispaced samples on the circle ``|u| = sample_radius``.

    The discrete Fourier transform gives the Taylor coefficients.  The
    magnitude of the last quarter of the raw (unscaled) spectrum is reported
    as ``tail``; if it exceeds ``noise * max|values|`` and ``check_tail`` is
    set, :class:`TailTooLarge` is raised.
    """
    values = np.asarray(values, dtype=complex)
    n = values.size
    raw = np.fft.fft(values) / n
    scale = max(float(np.max(np.abs(values))), 1e-300)
    q = max(1, n // 4)
    tail = float(np.max(np.abs(raw[n // 2 - q: n // 2 + 1]))) if n >= 4 else 0.0
    if check_tail and tail > noise * scale:
        raise TailTooLarge(f"spectral tail {tail:.3g} above noise floor {noise * scale:.3g}")
    coeffs = raw / sample_radius ** np.arange(n)
    keep = n // 2 if n_coeffs is None else min(n_coeffs, n)
    coeffs = coeffs[:keep]
    return Germ(coeffs, sample_radius if radius is None else radius, center, tail)


def germ_from_function(fun: Callable, sample_radius: float, n: int = 2 * DEFAULT_ORDER,
                       center: str = "0", radius: float | None = None) -> Germ:
    """Sample a callable of the chart variable and convert it to a germ."""
    u = sample_radius * np.exp(2j * np.pi * np.arange(n) / n)
    return germ_from_samples(fun(u), sample_radius, center=center, radius=radius,
                             n_coeffs=n // 2, check_tail=False)
