"""Complex-time flows of meromorphic vector fields.

The integrator is an embedded Dormand-Prince 5(4) pair applied to
``dz/ds = t X(z)`` for ``s`` in ``[0, 1]``, so that complex times are handled
by rescaling the field.  Non-straight time paths are piecewise linear.
Approach to a declared pole is reported as a separation (a legitimate
outcome of the real-time dynamics), not as a failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, SingularOnPath
from .model import CHART_SWITCH, ModelParams, x0_unchecked

DEFAULT_TOL = 1e-10
ESCAPE_RADIUS = 1e8

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class VectorFieldSpec:
    """A meromorphic field ``R(z) d/dz`` with its known singular points.

    ``coeff`` must accept numpy arrays and may return ``inf``/``nan`` at
    poles.  ``chart_coeff``, when given, is the coefficient of ``d/dw`` in
    the chart ``w = 1/z`` and is used for ``|z| > 2``.
    """

    coeff: Callable[[np.ndarray], np.ndarray]
    poles: tuple[complex, ...] = ()
    zeros: tuple[tuple[complex, int], ...] = ()
    chart_coeff: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "X"

    def __call__(self, z):
        return self.coeff(np.asarray(z, dtype=complex))


def model_field(p: ModelParams) -> VectorFieldSpec:
    """The model field as a :class:`VectorFieldSpec`."""

    def chart(w):
        w = np.asarray(w, dtype=complex)
        if p.mu == 0:
            num, den = -p.lam * w * w, 1 + w * w
        else:
            num = p.lam * w * w * (1 - w * w)
            den = (1 + w * w) * (w * w + p.mu * p.lam * w - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return num / den

    zeros = [(0j, 2)]
    if p.mu != 0:
        zeros += [(1 + 0j, 1), (-1 + 0j, 1)]
    return VectorFieldSpec(lambda z: x0_unchecked(z, p), tuple(p.poles), tuple(zeros), chart,
                           name="X0")


def polar_field() -> VectorFieldSpec:
    """``W = (1/w) d/dw``: the local model at a simple pole."""

    def coeff(w):
        with np.errstate(divide="ignore", invalid="ignore"):
            return 1.0 / np.asarray(w, dtype=complex)

    return VectorFieldSpec(coeff, (0j,), (), None, name="W")


@dataclass
class FlowResult:
    """Outcome of integrating a trajectory.

    ``status`` is one of ``"ok"``, ``"separated"``, ``"escaped"``,
    ``"step_failure"``.  For a separation, ``pole`` is the pole reached,
    ``separation_time`` the complex time at which it is reached and
    ``time_remaining`` the part of the requested time left over.
    """

    endpoint: complex
    status: str
    error_estimate: float = 0.0
    pole: complex | None = None
    time_remaining: complex | None = None
    separation_time: complex | None = None
    steps: int = 0
    trajectory: list[tuple[complex, complex]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _guard(p: complex, pole_guard: float | None) -> float:
    return (1e-4 if pole_guard is None else pole_guard) * (1 + abs(p))


class _Stepper:
    """Single-trajectory adaptive stepping with chart switching."""

    def __init__(self, X: VectorFieldSpec, tol: float, pole_guard: float | None,
                 max_steps: int, record: bool):
        self.X = X
        self.tol = tol
        self.pole_guard = pole_guard
        self.max_steps = max_steps
        self.record = record

    def rhs(self, y: complex, chart: str, dt: complex) -> complex:
        if chart == "z":
            v = self.X.coeff(np.asarray(y))
        else:
            v = self.X.chart_coeff(np.asarray(y))
        return complex(dt * v)

    def near_pole(self, y: complex, chart: str):
        z = y if chart == "z" else (1.0 / y if y != 0 else complex("inf"))
        for p in self.X.poles:
            if abs(z - p) < _guard(p, self.pole_guard):
                return p
        return None

    def segment(self, z0: complex, t0: complex, dt: complex, res: FlowResult) -> complex:
        """Integrate ``dz/ds = dt X`` over ``s`` in ``[0,1]`` from ``z0``."""
        chart = "z"
        y = complex(z0)
        if self.X.chart_coeff is not None and abs(y) > CHART_SWITCH:
            chart, y = "w", 1.0 / y
        s = 0.0
        h = 0.1
        atol = self.tol * 1e-3
        k = np.empty(7, dtype=complex)
        while s < 1.0:
            if res.steps >= self.max_steps:
                res.status = "step_failure"
                return self._to_z(y, chart)
            h = min(h, 1.0 - s)
            accepted = False
            while not accepted:
                pole = None
                stage_ok = True
                for i in range(7):
                    yi = y + h * sum(_A[i][j] * k[j] for j in range(i)) if i else y
                    pole = self.near_pole(yi, chart)
                    if pole is not None:
                        stage_ok = False
                        break
                    k[i] = self.rhs(yi, chart, dt)
                    if not np.isfinite(k[i]):
                        stage_ok = False
                        break
                if stage_ok:
                    y5 = y + h * np.dot(_B5, k)
                    err = abs(h * np.dot(_E, k))
                    scale = atol + self.tol * max(abs(y), abs(y5))
                    ratio = err / scale
                    if ratio <= 1.0:
                        accepted = True
                        s += h
                        y = y5
                        res.error_estimate += err
                        res.steps += 1
                        fac = 5.0 if ratio == 0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
                        h *= fac
                    else:
                        h *= max(0.1, 0.9 * ratio ** -0.25)
                else:
                    h *= 0.25
                if not accepted and h < 1e-13:
                    z_now = self._to_z(y, chart)
                    here = self.near_pole(y, chart)
                    cand = pole if pole is not None else here
                    if cand is None:
                        cand = min(self.X.poles, key=lambda q: abs(z_now - q), default=None)
                    if cand is not None and abs(z_now - cand) < 1e3 * _guard(cand, self.pole_guard):
                        res.status = "separated"
                        res.pole = cand
                        res.time_remaining = dt * (1.0 - s)
                        res.separation_time = t0 + dt * s + _time_to_point(self.X, z_now, cand)
                    else:
                        res.status = "step_failure"
                    return z_now
            if chart == "z" and self.X.chart_coeff is not None and abs(y) > CHART_SWITCH:
                chart, y = "w", 1.0 / y
            elif chart == "w" and y != 0 and abs(y) > 1.0 / CHART_SWITCH:
                chart, y = "z", 1.0 / y
            if chart == "z" and self.X.chart_coeff is None and abs(y) > ESCAPE_RADIUS:
                res.status = "escaped"
                return y
            if self.record:
                res.trajectory.append((t0 + dt * s, self._to_z(y, chart)))
        return self._to_z(y, chart)

    @staticmethod
    def _to_z(y: complex, chart: str) -> complex:
        if chart == "z":
            return y
        return complex("inf") if y == 0 else 1.0 / y


def _time_to_point(X: VectorFieldSpec, z: complex, p: complex) -> complex:
    """Time-form length from ``z`` to a simple pole ``p`` (``1/R`` is regular there)."""
    x, w = np.polynomial.legendre.leggauss(16)
    pts = z + (p - z) * (x + 1) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / X.coeff(pts)
    inv = np.where(np.isfinite(inv), inv, 0.0)
    return complex(np.dot(w, inv) * (p - z) / 2)


def flow(X: VectorFieldSpec, z0: complex, t: complex | Sequence[complex],
         tol: float = DEFAULT_TOL, *, pole_guard: float | None = None,
         max_steps: int = 200000, record: bool = False) -> FlowResult:
    """Flow ``z0`` for complex time ``t``.

    ``t`` may also be a sequence of complex times starting at ``0``: the time
    path is then the polyline through them.
    """
    path = [0j, complex(t)] if np.isscalar(t) else [complex(x) for x in t]
    if abs(path[0]) != 0:
        raise ConfigError("a time path must start at 0")
    res = FlowResult(complex(z0), "ok")
    if record:
        res.trajectory.append((0j, complex(z0)))
    for p in X.poles:
        if abs(z0 - p) < _guard(p, pole_guard):
            res.status = "separated"
            res.pole = p
            res.time_remaining = path[-1]
            res.separation_time = 0j
            return res
    stepper = _Stepper(X, tol, pole_guard, max_steps, record)
    z = complex(z0)
    for a, b in zip(path[:-1], path[1:]):
        if b == a:
            continue
        z = stepper.segment(z, a, b - a, res)
        if res.status != "ok":
            if res.time_remaining is not None:
                res.time_remaining += path[-1] - b
            break
    res.endpoint = z
    return res


def flow_batch(X: VectorFieldSpec, z0, t: complex, tol: float = DEFAULT_TOL, *,
               pole_guard: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Flow many points for the same time with a shared step size.

    Falls back to :func:`flow` point by point whenever a trajectory comes
    near a pole or leaves the finite chart.  Returns ``(endpoints, ok)``.
    """
    z0 = np.asarray(z0, dtype=complex).ravel()
    out = np.empty_like(z0)
    ok = np.ones(z0.shape, dtype=bool)
    if z0.size == 0:
        return out, ok
    y = z0.copy()
    s, h = 0.0, 0.1
    atol = tol * 1e-3
    k = np.empty((7, y.size), dtype=complex)
    poles = np.asarray(X.poles, dtype=complex)
    guards = np.array([_guard(p, pole_guard) for p in X.poles])
    fallback = bool(np.any(np.abs(y) > CHART_SWITCH) and X.chart_coeff is not None)
    steps = 0
    while s < 1.0 and not fallback:
        h = min(h, 1.0 - s)
        for i in range(7):
            yi = y + h * np.tensordot(_A[i], k[:i], axes=(0, 0)) if i else y
            if poles.size and np.any(np.abs(yi[:, None] - poles[None, :]) < guards[None, :]):
                fallback = True
                break
            k[i] = t * X.coeff(yi)
        if fallback:
            break
        if not np.all(np.isfinite(k)):
            fallback = True
            break
        y5 = y + h * np.tensordot(_B5, k, axes=(0, 0))
        err = np.abs(h * np.tensordot(_E, k, axes=(0, 0)))
        ratio = float(np.max(err / (atol + tol * np.maximum(np.abs(y), np.abs(y5)))))
        if ratio <= 1.0:
            s += h
            y = y5
            h *= 5.0 if ratio == 0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
            if X.chart_coeff is not None and np.any(np.abs(y) > CHART_SWITCH):
                fallback = True
        else:
            h *= max(0.1, 0.9 * ratio ** -0.25)
        steps += 1
        if h < 1e-13 or steps > 200000:
            fallback = True
    if not fallback:
        return y, ok
    for i, z in enumerate(z0):
        r = flow(X, z, t, tol, pole_guard=pole_guard)
        out[i] = r.endpoint
        ok[i] = r.ok
    return out, ok


def time1_map(X: VectorFieldSpec, z0: complex, tol: float = DEFAULT_TOL, **kw) -> FlowResult:
    """The time-1 map; stationary points are returned unchanged."""
    return flow(X, z0, 1.0, tol, **kw)


def jet3_time1(a: complex, b: complex) -> tuple[complex, complex]:
    """Coefficients of ``z^2, z^3`` in the time-1 map of ``(a z^2 + b z^3 + ...) d/dz``."""
    if a == 0:
        raise ConfigError("the quadratic coefficient must be nonzero")
    return complex(a), complex(a * a + b)


def formal_invariant(a: complex, b: complex) -> complex:
    """Formal invariant ``-b/a^2`` of ``(a z^2 + b z^3 + ...) d/dz``."""
    if a == 0:
        raise ConfigError("the quadratic coefficient must be nonzero")
    return -complex(b) / complex(a) ** 2


def time_form_length(X: VectorFieldSpec, path: Sequence[complex], tol: float = 1e-12,
                     max_depth: int = 40) -> complex:
    """Integral of the time form ``dz/R`` along a polyline."""
    x, w = np.polynomial.legendre.leggauss(20)

    def gauss(a: complex, b: complex) -> complex:
        pts = a + (b - a) * (x + 1) / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = 1.0 / X.coeff(pts)
        if not np.all(np.isfinite(vals)):
            raise SingularOnPath(f"time form singular on segment {a!r} -> {b!r}")
        return complex(np.dot(w, vals) * (b - a) / 2)

    def adapt(a: complex, b: complex, whole: complex, depth: int) -> complex:
        m = (a + b) / 2
        left, right = gauss(a, m), gauss(m, b)
        if abs(left + right - whole) <= tol * max(1.0, abs(whole)) or depth >= max_depth:
            if depth >= max_depth:
                raise SingularOnPath("time-form quadrature did not converge")
            return left + right
        return adapt(a, m, left, depth + 1) + adapt(m, b, right, depth + 1)

    total = 0j
    pts = [complex(p) for p in path]
    for a, b in zip(pts[:-1], pts[1:]):
        if a != b:
            total += adapt(a, b, gauss(a, b), 0)
    return total


def polar_time1_oracle(w, branch: int = 1):
    """Closed-form time-1 map ``+-sqrt(2 + w^2)`` of ``(1/w) d/dw``.

    The determination ``w sqrt(1 + 2/w^2)`` is continuous off the slit
    ``i sqrt(2) [-1, 1]`` and tends to ``sqrt(2)`` at ``0`` from the right.
    """
    w = np.asarray(w, dtype=complex)
    on_slit = (w.real == 0) & (np.abs(w.imag) <= math.sqrt(2))
    if np.any(on_slit):
        from .errors import BranchError

        raise BranchError("point on the slit of the polar time-1 map")
    out = branch * w * np.sqrt(1 + 2 / (w * w))
    return out if out.ndim else complex(out)


def continue_sqrt_along(values_sq: np.ndarray, start: complex) -> np.ndarray:
    """Continuous square root of a sampled closed path, starting from ``start``."""
    out = np.empty(values_sq.size, dtype=complex)
    prev = complex(start)
    for i, v in enumerate(values_sq):
        r = complex(np.sqrt(v))
        prev = r if abs(r - prev) <= abs(r + prev) else -r
        out[i] = prev
    return out


def taylor_of(fun: Callable, radius: float, n: int = 64) -> np.ndarray:
    """Taylor coefficients of a holomorphic function from a circle of samples."""
    u = radius * np.exp(2j * np.pi * np.arange(n) / n)
    c = np.fft.fft(fun(u)) / n
    return c / radius ** np.arange(n)


def lie_series(R_taylor: np.ndarray, z, t: complex, order: int) -> np.ndarray:
    """Truncated Lie series ``sum_{n<=order} t^n/n! (X^n . id)(z)``.

    ``R_taylor`` holds Taylor coefficients of the field coefficient at 0;
    the iterated derivations are computed as truncated polynomials.
    """
    m = R_taylor.size
    g = np.zeros(m, dtype=complex)
    g[1] = 1.0
    z = np.asarray(z, dtype=complex)
    total = np.polynomial.polynomial.polyval(z, g)
    fact = 1.0
    for n in range(1, order + 1):
        dg = np.polynomial.polynomial.polyder(g)
        g = np.convolve(R_taylor, dg)[:m]
        fact *= n
        total = total + (t**n / fact) * np.polynomial.polynomial.polyval(z, g)
    return total
