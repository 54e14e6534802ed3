"""The rational model field, its first integral and the associated constants.

The model is the pullback of ``x^2/(1 + mu x) d/dx`` through the degree-2
map ``x = lam z / (1 - z^2)``; it is invariant under ``z -> -1/z``.
Sectors are the two opposite sectors ``V+ = {|arg z| < 5pi/8}`` and
``V- = -V+``, overlapping in an upper wedge ``V0`` and a lower wedge ``Vinf``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BranchError, ConfigError, PoleAt
from .germs import ModulusData

POLE_TOL = 1e-13
CHART_SWITCH = 2.0

TWO_PI_I = 2j * math.pi


# ---------------------------------------------------------------------------
# Parameters and sector geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Twist ``lam > 0`` and formal invariant ``mu``."""

    lam: float
    mu: complex = 0j

    def __init__(self, lam: float, mu: complex = 0j):
        lam = float(lam)
        if not lam > 0 or not math.isfinite(lam):
            raise ConfigError(f"lambda must be a positive finite real, got {lam!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", complex(mu))

    @property
    def z_plus(self) -> complex:
        lm = self.lam * self.mu
        return (lm + cmath.sqrt(lm * lm + 4)) / 2

    @property
    def z_minus(self) -> complex:
        lm = self.lam * self.mu
        return (lm - cmath.sqrt(lm * lm + 4)) / 2

    @property
    def poles(self) -> tuple[complex, ...]:
        """Poles of the model field; the pair ``z_plus, z_minus`` only when ``mu != 0``."""
        if self.mu == 0:
            return (1j, -1j)
        return (1j, -1j, self.z_plus, self.z_minus)

    @property
    def finite_zeros(self) -> tuple[complex, ...]:
        if self.mu == 0:
            return (0j,)
        return (0j, 1 + 0j, -1 + 0j)

    def globalization_bound(self) -> float:
        """Upper bound on ``lam`` under which the global pole picture is proven."""
        b = 1.0 / 12800
        if self.mu != 0:
            b = min(b, 1.0 / (2 * abs(self.mu)))
        return b

    def check_globalization(self) -> None:
        if not self.lam < self.globalization_bound():
            raise ConfigError(
                f"lambda={self.lam} must be below {self.globalization_bound():.3g} for globalization"
            )


@dataclass(frozen=True)
class SectorGeometry:
    """Angles of the two sectors, their boundary rays and overlap wedges."""

    half_opening: float = 5 * math.pi / 8
    wedge_low: float = 3 * math.pi / 8
    wedge_high: float = 5 * math.pi / 8

    def boundary_angles(self, side: str) -> tuple[float, float]:
        """``(a, b)`` ray angles bounding the sector: ``a`` in the upper wedge."""
        if side == "+":
            return self.half_opening, -self.half_opening
        if side == "-":
            return math.pi - self.half_opening, -(math.pi - self.half_opening)
        raise ConfigError(f"side must be '+' or '-', got {side!r}")

    def in_sector(self, z, side: str, closed: bool = False):
        z = np.asarray(z, dtype=complex)
        ang = np.angle(z if side == "+" else -z)
        lim = self.half_opening
        ok = np.abs(ang) <= lim if closed else np.abs(ang) < lim
        return ok & (z != 0)

    def wedge(self, z):
        """``"0"`` for the upper wedge, ``"inf"`` for the lower one, else ``None``."""
        a = float(np.angle(complex(z)))
        if self.wedge_low < a < self.wedge_high:
            return "0"
        if -self.wedge_high < a < -self.wedge_low:
            return "inf"
        return None

    def wedge_mask(self, z):
        a = np.angle(np.asarray(z, dtype=complex))
        up = (a > self.wedge_low) & (a < self.wedge_high)
        lo = (a < -self.wedge_low) & (a > -self.wedge_high)
        return up, lo


SECTORS = SectorGeometry()


# ---------------------------------------------------------------------------
# Field, pullback, rescaled time coordinate
# ---------------------------------------------------------------------------


def _x0_parts(z, p: ModelParams):
    if p.mu == 0:
        # the factor 1 - z^2 cancels
        return p.lam * z * z, 1 + z * z
    num = p.lam * z * z * (1 - z * z)
    den = (1 + z * z) * (1 + p.mu * p.lam * z - z * z)
    return num, den


def eval_X0(z, p: ModelParams, *, chart: str = "z"):
    """Coefficient of the model field ``X0 = R(z) d/dz``.

    With ``chart="w"`` the argument is ``w = 1/z`` and the coefficient of
    ``d/dw`` is returned; this is the accurate chart near ``infinity``.
    Raises :class:`PoleAt` when a denominator vanishes within
    ``POLE_TOL * (1 + |z|^2)``.
    """
    z = np.asarray(z, dtype=complex)
    if chart == "w":
        w = z
        if p.mu == 0:
            num, den = -p.lam * w * w, 1 + w * w
        else:
            num = p.lam * w * w * (1 - w * w)
            den = (1 + w * w) * (w * w + p.mu * p.lam * w - 1)
    elif chart == "z":
        num, den = _x0_parts(z, p)
    else:
        raise ConfigError(f"unknown chart {chart!r}")
    bad = np.abs(den) < POLE_TOL * (1 + np.abs(z) ** 2)
    if np.any(bad):
        raise PoleAt(complex(z[bad].ravel()[0]) if z.ndim else complex(z))
    out = num / den
    return out if out.ndim else complex(out)


def x0_unchecked(z, p: ModelParams):
    """Model coefficient without pole detection (returns ``inf``/``nan``)."""
    num, den = _x0_parts(np.asarray(z, dtype=complex), p)
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def x0_reciprocal(z, p: ModelParams):
    """``1/R(z)``, which is holomorphic near the poles of the field."""
    z = np.asarray(z, dtype=complex)
    num, den = _x0_parts(z, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        return den / num


def x0_derivative(z, p: ModelParams):
    """Derivative ``R'(z)`` of the model coefficient."""
    z = np.asarray(z, dtype=complex)
    lam, mu = p.lam, p.mu
    if mu == 0:
        return 2 * lam * z / (1 + z * z) ** 2
    num = lam * z * z * (1 - z * z)
    dnum = lam * (2 * z - 4 * z**3)
    a = 1 + z * z
    b = 1 + mu * lam * z - z * z
    den = a * b
    dden = 2 * z * b + a * (mu * lam - 2 * z)
    return (dnum * den - num * dden) / den**2


def pullback_Pi(z, lam: float):
    """The degree-2 pullback ``lam z / (1 - z^2)``."""
    z = np.asarray(z, dtype=complex)
    d = 1 - z * z
    if np.any(d == 0):
        raise ConfigError("pullback is singular at z = +-1")
    out = lam * z / d
    return out if out.ndim else complex(out)


def eval_tau(z, lam: float):
    """Rescaled time coordinate ``(1 - z^2)/(lam z) = 1/Pi(z)``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ConfigError("tau is singular at z = 0")
    out = (1 - z * z) / (lam * z)
    return out if out.ndim else complex(out)


def involution_sigma(z):
    """``z -> -1/z`` (with ``0 <-> inf`` handled by the caller's chart)."""
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -1.0 / z
    return out if out.ndim else complex(out)


def act_on_pair(o_plus: Callable, o_minus: Callable, kind: str = "function"):
    """Action of the involution on a sectorial pair ``(O+, O-)``.

    Returns ``(sigma* O-, sigma* O+)`` where ``sigma*`` is composition for
    functions, conjugation for maps and pushforward for vector field
    coefficients.
    """

    def pull(o):
        if kind == "function":
            return lambda z: o(involution_sigma(z))
        if kind == "map":
            return lambda z: involution_sigma(o(involution_sigma(z)))
        if kind == "field":
            # sigma'(z) = 1/z^2, so (sigma* X)(z) = z^2 X(sigma z)
            return lambda z: np.asarray(z) ** 2 * o(involution_sigma(z))
        raise ConfigError(f"unknown object kind {kind!r}")

    return pull(o_minus), pull(o_plus)


# ---------------------------------------------------------------------------
# First integral
# ---------------------------------------------------------------------------


def branch_index(z, side: str):
    """Integer ``k`` of the determination ``log tau = Log tau + 2 i pi k``.

    The principal determination is used on the cut sector ``V+ \\ [1, inf)``.
    It is continued through the lower wedge into ``V- \\ (-inf, -1]``, which
    adds one turn where ``Im tau < 0`` (the upper half plane).
    """
    z = np.asarray(z, dtype=complex)
    if side == "+":
        return np.zeros(z.shape, dtype=int)
    if side == "-":
        return (z.imag > 0).astype(int)
    raise ConfigError(f"side must be '+' or '-', got {side!r}")


def log_tau(z, side: str, lam: float):
    z = np.asarray(z, dtype=complex)
    tau = (1 - z * z) / (lam * z)
    on_axis = z.imag == 0
    if side == "+":
        cut = on_axis & (z.real >= 1)
    else:
        cut = on_axis & (z.real <= -1)
    if np.any(cut):
        raise BranchError(f"first integral evaluated on the cut of side {side}")
    base = np.log(tau)
    if side == "-":
        # (-1, 0) lies inside the minus cut sector where tau < 0: arg tau = pi
        base = np.where(on_axis & (z.real < 0), np.log(np.abs(tau)) + 1j * math.pi, base)
    return base + TWO_PI_I * branch_index(z, side)


def log_H0(z, side: str, p: ModelParams):
    """Logarithm of the first integral on the cut sector of ``side``.

    ``H0 = exp(-2 i pi tau - 2 i pi mu log tau)`` is a primitive function:
    ``X0 . H0 = 2 i pi H0``.
    """
    z = np.asarray(z, dtype=complex)
    tau = (1 - z * z) / (p.lam * z)
    return -TWO_PI_I * tau - TWO_PI_I * p.mu * log_tau(z, side, p.lam)


def eval_H0(z, side: str, p: ModelParams):
    out = np.exp(log_H0(z, side, p))
    return out if np.ndim(out) else complex(out)


def h_helper(tau, mu: complex):
    """``exp(-2 i pi (tau + mu Log tau))`` with the principal logarithm."""
    tau = np.asarray(tau, dtype=complex)
    return np.exp(-TWO_PI_I * (tau + mu * np.log(tau)))


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------


def _xlogx_term(im_mu: float, denom: float) -> float:
    if im_mu == 0:
        return 0.0
    return 2 * math.pi * im_mu * math.log(abs(im_mu) / denom)


@dataclass(frozen=True)
class ModelConstants:
    """Bounds on the first integral along the wedges.

    ``m_delta, t_delta`` are the constants for a generic half-opening
    ``delta``; ``m_mu, t_mu`` are the ones used throughout the synthesis
    bounds (opening ``3pi/8`` applied to the squared first integral).
    """

    m_delta: float
    t_delta: float
    m_mu: float
    t_mu: float
    delta: float


def model_constants(mu: complex, delta: float = 3 * math.pi / 8) -> ModelConstants:
    if not 0 < delta < math.pi / 2:
        raise ConfigError("delta must lie in (0, pi/2)")
    mu = complex(mu)
    cd = math.cos(delta)
    log_m = 2 * math.pi**2 * abs(mu.real) + _xlogx_term(mu.imag, math.e * cd)
    m_delta = math.exp(log_m)
    t_delta = max(1.0, log_m / (2 * math.pi * cd))
    s = math.sqrt(2 - math.sqrt(2))
    log_mm = 2 * math.pi**2 * abs(mu.real) + _xlogx_term(mu.imag, math.e * s / 4)
    m_mu = math.exp(log_mm)
    t_mu = max(1.0, log_mm / (math.pi * s))
    return ModelConstants(m_delta, t_delta, m_mu, t_mu, delta)


@dataclass(frozen=True)
class SynthesisBounds:
    """Admissible twist range for a given modulus.

    ``kappa(lam) = 8 m_mu lam^2 max(norms)`` is the Lipschitz scale of the
    Cauchy-Heine operator; ``ball_radius(lam) = 536 kappa(lam)``.
    """

    ell: float
    lambda_max: float
    m_mu: float
    t_mu: float
    phi_norms: tuple[float, float]
    eval_radius: float

    def kappa(self, lam: float) -> float:
        return 8 * self.m_mu * lam * lam * max(self.phi_norms)

    def ball_radius(self, lam: float) -> float:
        return 536 * self.kappa(lam)

    def fixed_point_bound(self, lam: float) -> float:
        k = self.kappa(lam)
        return k * math.exp(3365 * k) if 3365 * k < 700 else math.inf

    def to_json(self) -> dict:
        return {
            "ell": self.ell,
            "lambda_max": self.lambda_max,
            "m_mu": self.m_mu,
            "t_mu": self.t_mu,
            "phi_norms": list(self.phi_norms),
            "eval_radius": self.eval_radius,
        }


def ell_bound(m_mu: float, t_mu: float, rho: float) -> float:
    """``min(1, 1/t_mu, 1/(2pi + ln(m_mu/rho)))``.

    When ``2pi + ln(m_mu/rho) <= 0`` (very large radii) the adaptedness
    constraint it encodes is void and the term is dropped.
    """
    if not rho > 0:
        raise ConfigError("convergence radii must be positive")
    terms = [1.0, 1.0 / t_mu]
    denom = 2 * math.pi + (math.log(m_mu) - math.log(rho) if math.isfinite(rho) else -math.inf)
    if denom > 0:
        terms.append(1.0 / denom)
    return min(terms)


def phi_norm(germ, m_mu: float, ell: float, n: int = 256) -> float:
    """``sup |phi'|`` over the chart disc of radius ``m_mu exp(2pi - 1/ell)``."""
    return germ.sup_derivative(m_mu * math.exp(2 * math.pi - 1.0 / ell), n)


def synthesis_bounds(m: ModulusData, n: int = 256) -> SynthesisBounds:
    c = model_constants(m.mu)
    rho = min(m.phi0.radius, m.phi_inf.radius)
    ell = ell_bound(c.m_mu, c.t_mu, rho)
    r_eval = c.m_mu * math.exp(2 * math.pi - 1.0 / ell)
    norms = (phi_norm(m.phi0, c.m_mu, ell, n), phi_norm(m.phi_inf, c.m_mu, ell, n))
    big = max(norms)
    lam_max = ell if big == 0 else min(ell, 1.0 / (4 * math.sqrt(c.m_mu * big)))
    return SynthesisBounds(ell, lam_max, c.m_mu, c.t_mu, norms, r_eval)
