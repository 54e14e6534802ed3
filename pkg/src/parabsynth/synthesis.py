"""Fixed-point synthesis of a parabolic germ with prescribed horn maps.

Starting from ``f = 0`` the Cauchy-Heine operator is iterated on the ray
tables until it stops moving.  The converged pair defines the sectorial
fields ``X+- = X0 / (1 + X0 . f+-)``, their first integrals
``H+- = H0 exp(2 i pi f+-)`` and the time-1 map ``Delta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cauchyheine import (
    DEFAULT_NODES,
    RAY_ANGLES,
    CauchyHeine,
    SectorialPair,
    _germ_terms,
    explicit_sides,
    standard_rays,
)
from .errors import (
    ConfigError,
    MaxIter,
    NewtonDiverged,
    NotContracting,
    NumericalError,
    PoleOfXf,
)
from .flow import DEFAULT_TOL, FlowResult, VectorFieldSpec, flow, model_field
from .germs import FOUR_PI_SQ, ModulusData, fourier_coefficients
from .model import (
    SECTORS,
    TWO_PI_I,
    ModelParams,
    SynthesisBounds,
    log_H0,
    synthesis_bounds,
    x0_reciprocal,
    x0_unchecked,
)

POLE_RESIDUAL = 1e-12


def side_for(z) -> str:
    """Side whose sector midline is angularly closer to ``z``."""
    return "+" if complex(z).real >= 0 else "-"


@dataclass
class SynthesisResult:
    """Converged pair with the objects built from it.

    ``diagnostics`` holds ``kappa_lambda``, ``lambda_max``, ``iterations``,
    ``final_delta_norm``, ``sampled_f_norm``, the per-iteration ``deltas``
    and ``ratios`` and the largest observed ratio.  Norms are sampled norms.
    """

    params: ModelParams
    modulus: ModulusData
    f: SectorialPair
    operator: CauchyHeine
    bounds: SynthesisBounds
    diagnostics: dict = field(default_factory=dict)
    _fields: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def f_is_zero(self) -> bool:
        return self.f.is_zero and self.f.offset == 0

    def f_value(self, z, side: str):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.f_is_zero:
            return np.zeros(z.shape, dtype=complex)
        return self.operator.evaluate(self.f, z, side)

    def f_derivative(self, z, side: str):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.f_is_zero:
            return np.zeros(z.shape, dtype=complex)
        return self.operator.derivative(self.f, z, side)

    def field(self, side: str) -> VectorFieldSpec:
        """The sectorial field ``X^side`` as an integrable spec (cached per side)."""
        if side in self._fields:
            return self._fields[side]
        if self.f_is_zero:
            return self._fields.setdefault(side, model_field(self.params))
        poles = tuple(pr for pr, _ in field_poles(self, side))

        def coeff(z):
            z = np.asarray(z, dtype=complex)
            flat = np.atleast_1d(z)
            ok = SECTORS.in_sector(flat, side, closed=True)
            out = np.full(flat.shape, np.nan + 0j)
            if np.any(ok):
                out[ok] = _xf_values(self, flat[ok], side)
            return out.reshape(z.shape) if z.ndim else out[0]

        zeros = tuple((z, k) for z, k in model_field(self.params).zeros
                      if SECTORS.in_sector(z, side, closed=True) or z == 0)
        spec = VectorFieldSpec(coeff, poles, zeros, None, name=f"Xf{side}")
        return self._fields.setdefault(side, spec)

    def to_json(self) -> dict:
        d = {k: v for k, v in self.diagnostics.items() if k not in ("deltas", "ratios")}
        d["deltas"] = list(self.diagnostics.get("deltas", []))
        d["ratios"] = list(self.diagnostics.get("ratios", []))
        return {
            "params": {"lambda": self.params.lam, "mu": [self.params.mu.real, self.params.mu.imag]},
            "modulus": self.modulus.to_json(),
            "bounds": self.bounds.to_json(),
            "diagnostics": d,
            "f_offset": [self.f.offset.real, self.f.offset.imag],
        }


# ---------------------------------------------------------------------------
# Iteration
# ---------------------------------------------------------------------------


def synthesize(m: ModulusData, lam: float, fp_tol: float = 1e-10, max_iter: int = 200, *,
               n_nodes: int = DEFAULT_NODES, allow_above_bound: bool = False,
               kernel: str = "symmetric") -> SynthesisResult:
    """Iterate ``f <- CH(f)`` from ``f = 0`` until the sampled step is below ``fp_tol``.

    ``allow_above_bound`` lets ``lam`` exceed the sufficient bound
    ``lambda_max``; a warning is issued and the observed contraction ratio
    is the only evidence of convergence.
    """
    bounds = synthesis_bounds(m)
    if not lam > 0:
        raise ConfigError("lambda must be positive")
    if lam > bounds.lambda_max:
        msg = f"lambda={lam:.4g} exceeds the admissible bound {bounds.lambda_max:.4g}"
        if not allow_above_bound:
            raise ConfigError(msg)
        warnings.warn(msg + "; uniqueness is not guaranteed", RuntimeWarning, stacklevel=2)
    p = ModelParams(lam, m.mu)
    op = CauchyHeine(m, p, scale=1 / TWO_PI_I, kernel=kernel)
    rays = standard_rays(p, n_nodes)
    f = SectorialPair.zero(rays)
    deltas: list[float] = []
    ratios: list[float] = []
    rising = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = op.transform_rays(f)
        d = g.distance(f)
        deltas.append(d)
        if len(deltas) > 1 and deltas[-2] > 0:
            ratios.append(d / deltas[-2])
            rising = rising + 1 if ratios[-1] >= 1 else 0
            if rising >= 5:
                raise NotContracting(f"step norm grew for 5 iterations (ratio {ratios[-1]:.3g})")
        f = g
        if d < fp_tol:
            converged = True
            break
    if not converged:
        raise MaxIter(f"no convergence in {max_iter} iterations (last step {deltas[-1]:.3g})")
    f.plus_fn = None
    result = SynthesisResult(p, m, f, op, bounds)
    if not result.f_is_zero:
        mirrors = [np.abs(r.nodes) * np.exp(1j * (math.copysign(math.pi, r.angle) - r.angle))
                   for r in rays]
        f.minus = tuple(op.evaluate(f, z, "-") for z in mirrors)
    else:
        f.minus = tuple(np.zeros(r.n, dtype=complex) for r in rays)
    result.diagnostics = {
        "kappa_lambda": bounds.kappa(lam),
        "lambda_max": bounds.lambda_max,
        "ball_radius": bounds.ball_radius(lam),
        "fixed_point_bound": bounds.fixed_point_bound(lam),
        "iterations": it,
        "final_delta_norm": deltas[-1],
        "sampled_f_norm": f.sampled_norm(),
        "deltas": deltas,
        "ratios": ratios,
        "max_ratio": max(ratios) if ratios else 0.0,
        "above_bound": lam > bounds.lambda_max,
        "n_nodes": n_nodes,
        "fp_tol": fp_tol,
    }
    return result


def fixed_point_residual(r: SynthesisResult) -> float:
    """Sampled ``||CH(f*) - f*||``."""
    return r.operator.transform_rays(r.f).distance(r.f)


# ---------------------------------------------------------------------------
# Fields, first integrals, poles
# ---------------------------------------------------------------------------


def _xf_values(r: SynthesisResult, z: np.ndarray, side: str) -> np.ndarray:
    inv = x0_reciprocal(z, r.params)
    fd = r.f_derivative(z, side)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 1.0 / (inv + fd)
    return np.where(np.isinf(inv), 0.0, out)


def eval_Xf(r: SynthesisResult, z, side: str):
    """``X0 / (1 + X0 . f^side)`` at ``z``, computed as ``1/(1/R0 + f')``."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if r.f_is_zero:
        out = x0_unchecked(z_arr, r.params)
    else:
        inv = x0_reciprocal(z_arr, r.params)
        g = inv + r.f_derivative(z_arr, side)
        small = np.isfinite(inv) & (np.abs(g) < POLE_RESIDUAL * (1 + np.abs(inv)))
        if np.any(small):
            raise PoleOfXf(complex(z_arr[small][0]))
        out = _xf_values(r, z_arr, side)
    if np.any(~np.isfinite(out)):
        raise PoleOfXf(complex(z_arr[~np.isfinite(out)][0]))
    return out if np.ndim(z) else complex(out[0])


def log_Hf(r: SynthesisResult, z, side: str):
    """``log H^side = log H0^side + 2 i pi f^side``."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = log_H0(z_arr, side, r.params) + TWO_PI_I * r.f_value(z_arr, side)
    return out if np.ndim(z) else complex(out[0])


def eval_Hf(r: SynthesisResult, z, side: str):
    """The sectorial first integral ``H0 exp(2 i pi f^side)``."""
    out = np.exp(log_Hf(r, z, side))
    return out if np.ndim(out) else complex(out)


def pole_equation(r: SynthesisResult, z, side: str):
    """``1/R0 + f'``, whose zeros are the poles of ``X^side``."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    return x0_reciprocal(z_arr, r.params) + r.f_derivative(z_arr, side)


def newton_root(fun, seed: complex, tol: float = 1e-13, max_iter: int = 60) -> tuple[complex, float]:
    """Newton's method with a central-difference derivative; returns ``(root, |fun(root)|)``."""
    z = complex(seed)
    for _ in range(max_iter):
        v = complex(fun(z))
        h = 1e-6 * (1 + abs(z))
        d = (complex(fun(z + h)) - complex(fun(z - h))) / (2 * h)
        if d == 0 or not np.isfinite(d):
            raise NewtonDiverged(f"zero derivative near {z!r}")
        step = v / d
        z -= step
        if abs(step) < tol * (1 + abs(z)):
            return z, abs(complex(fun(z)))
    raise NewtonDiverged(f"Newton iteration from {seed!r} did not converge")


def field_poles(r: SynthesisResult, side: str) -> list[tuple[complex, complex]]:
    """Poles of ``X^side`` in its sector as ``(pole, seed)`` pairs."""
    p = r.params
    seeds = [1j, -1j] + ([p.z_plus, p.z_minus] if p.mu != 0 else [])
    out = []
    for s in seeds:
        if not SECTORS.in_sector(s, side):
            continue
        if r.f_is_zero:
            out.append((complex(s), complex(s)))
            continue
        root, _ = newton_root(lambda z: pole_equation(r, z, side)[0], s)
        out.append((root, complex(s)))
    return out


# ---------------------------------------------------------------------------
# Time-1 map and normalizations
# ---------------------------------------------------------------------------


def delta_flow(r: SynthesisResult, z, tol: float = DEFAULT_TOL, side: str | None = None,
               **kw) -> FlowResult:
    """Time-1 flow of the sectorial field, with the full :class:`FlowResult`."""
    side = side_for(z) if side is None else side
    return flow(r.field(side), complex(z), 1.0, tol, **kw)


def delta_map(r: SynthesisResult, z, tol: float = DEFAULT_TOL, side: str | None = None) -> complex:
    """``Delta(z)``; raises when the trajectory does not complete."""
    res = delta_flow(r, z, tol, side)
    if not res.ok:
        raise NumericalError(f"time-1 flow from {complex(z)!r} ended with status {res.status}")
    return res.endpoint


def normalization_map(r: SynthesisResult, z, side: str, tol: float = DEFAULT_TOL) -> complex:
    """``Psi^side(z)``: the model flow at ``z`` for complex time ``f^side(z)``."""
    t = complex(r.f_value(z, side)[0])
    if t == 0:
        return complex(z)
    res = flow(model_field(r.params), complex(z), t, tol)
    if not res.ok:
        raise NumericalError(f"normalization flow ended with status {res.status}")
    return res.endpoint


@dataclass
class TaylorReport:
    coeffs: np.ndarray
    sample_radius: float
    estimated_radius: float
    tail: float


def taylor_delta(r: SynthesisResult, N: int = 32, radius: float = 0.1,
                 tol: float = DEFAULT_TOL) -> TaylorReport:
    """Taylor coefficients of ``Delta`` from ``N`` samples on ``|z| = radius``.

    The convergence radius is estimated by a least-squares fit of
    ``log |c_n|`` against ``n`` over the upper half of the usable spectrum.
    """
    z = radius * np.exp(2j * np.pi * (np.arange(N)) / N)
    vals = np.array([delta_map(r, zk, tol) for zk in z])
    c = fourier_coefficients(vals, radius)
    raw = np.abs(np.fft.fft(vals) / N)
    tail = float(np.max(raw[N // 2 - N // 8: N // 2 + 1]))
    return TaylorReport(c[: N // 2], radius, estimate_radius(c[: N // 2], radius, vals), tail)


def estimate_radius(coeffs: np.ndarray, sample_radius: float, vals=None) -> float:
    """Convergence radius from the exponential decay rate of the coefficients."""
    c = np.abs(np.asarray(coeffs))
    n = np.arange(c.size)
    floor = 1e-11 * (np.max(np.abs(vals)) if vals is not None else 1.0)
    usable = (n >= 4) & (c * sample_radius**n > floor)
    idx = n[usable]
    if idx.size < 4:
        return math.inf
    idx = idx[idx.size // 2:]
    slope = np.polyfit(idx, np.log(c[idx]), 1)[0]
    return float(math.exp(-slope))


# ---------------------------------------------------------------------------
# Horn maps
# ---------------------------------------------------------------------------


@dataclass
class HornMapReport:
    """Measured against prescribed horn maps.

    ``log_h`` are first-integral values (logarithms, to survive underflow).
    ``psi_error`` is ``|psi_measured/psi - 1|``.  ``phi_error`` is the
    error of ``2 i pi (f- - f+)`` relative to ``phi(h)`` where ``phi(h)``
    is representable.
    """

    z: dict
    log_h: dict
    measured_log_ratio: dict
    target_log_ratio: dict
    psi_error: dict
    phi_error: dict

    @property
    def max_psi_error(self) -> float:
        return max(float(np.max(v)) for v in self.psi_error.values())

    @property
    def max_phi_error(self) -> float:
        vals = [float(np.nanmax(v)) for v in self.phi_error.values() if np.any(np.isfinite(v))]
        return max(vals) if vals else 0.0

    def to_json(self) -> dict:
        out = {"max_psi_error": self.max_psi_error, "max_phi_error": self.max_phi_error, "samples": {}}
        for w in self.z:
            out["samples"][w] = [
                {"z": [complex(z).real, complex(z).imag],
                 "log_h": [complex(lh).real, complex(lh).imag],
                 "psi_error": float(pe)}
                for z, lh, pe in zip(self.z[w], self.log_h[w], self.psi_error[w])
            ]
        return out


def branch_jump(z, p: ModelParams):
    """``log H0- - log H0+`` at wedge points, from the branch indices."""
    z = np.asarray(z, dtype=complex)
    k = np.where(z.imag > 0, 1, 0)
    return -TWO_PI_I * p.mu * TWO_PI_I * k


def horn_sample_points(n_samples: int, radii=(0.6, 1.6)) -> dict:
    """Deterministic wedge samples at least ``pi/64`` away from the staggered rays."""
    a_lo, a_hi = RAY_ANGLES[0] + math.pi / 64, RAY_ANGLES[1] - math.pi / 64
    k = max(1, int(round(math.sqrt(n_samples))))
    j = max(1, int(math.ceil(n_samples / k)))
    ang = np.linspace(a_lo, a_hi, k)
    rad = np.geomspace(radii[0], radii[1], j)
    up = (rad[None, :] * np.exp(1j * ang[:, None])).ravel()[:n_samples]
    return {"0": up, "inf": np.conj(up)}


def measure_horn_maps(r: SynthesisResult, n_samples: int = 50, radii=(0.6, 1.6)) -> HornMapReport:
    """Compare ``H-`` against ``psi(H+)`` at wedge points.

    ``f+`` and ``f-`` are both integrated on staggered rays beyond ``z``
    (no residue), so the gluing is measured rather than imposed.
    """
    pts = horn_sample_points(n_samples, radii)
    out = {k: {} for k in ("log_h", "meas", "target", "psi", "phi")}
    m, p = r.modulus, r.params
    for w, z in pts.items():
        if r.f_is_zero:
            fp = fm = np.zeros(z.shape, dtype=complex)
        else:
            lp, lm, _ = explicit_sides(r.operator, r.f, z)
            fp, fm = lp - r.f.offset, lm - r.f.offset
        log_hp = log_H0(z, "+", p) + TWO_PI_I * fp
        # log H0- - log H0+ is the constant 4 pi^2 mu on the upper wedge and 0
        # on the lower one; subtracting the two logarithms numerically would
        # cancel O(1/lambda) digits against the tiny jump
        base = branch_jump(z, p)
        jump = TWO_PI_I * (fm - fp)
        meas = base + jump
        germ = m.phi0 if w == "0" else m.phi_inf
        phi, _ = _germ_terms(germ, log_hp)
        target = phi + (FOUR_PI_SQ * m.mu if w == "0" else 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi_err = np.where(np.abs(phi) > 0, np.abs(jump - phi) / np.abs(phi), np.nan)
        out["log_h"][w] = log_hp
        out["meas"][w] = meas
        out["target"][w] = target
        out["psi"][w] = np.abs(np.expm1(meas - target))
        out["phi"][w] = phi_err
    return HornMapReport(pts, out["log_h"], out["meas"], out["target"], out["psi"], out["phi"])
