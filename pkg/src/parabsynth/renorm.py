"""Fixed point of parabolic renormalization in spherical normal form.

The iteration feeds the germ ``delta = log(Delta/id)`` of the current time-1
map back as the horn-map part at infinity and synthesizes again:
``delta_{n+1} = Synth(phi0, delta_n)``.  Germs live on the disc of radius
``3/16`` and are resampled on a circle of radius ``0.9 * 3/16``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MaxIter, NotContracting, RadiusViolation
from .flow import DEFAULT_TOL
from .germs import Germ, ModulusData
from .model import ModelParams, eval_X0, model_constants
from .synthesis import SynthesisResult, delta_flow, synthesize

DISC_RADIUS = 3 / 16
IMAGE_RADIUS = 1 / 4
SAMPLE_FACTOR = 0.9
N_COEFFS = 48
DELTA_BALL = 11.0
DERIVATIVE_BOUND = 45.0
NORM_POINTS = 256


@dataclass(frozen=True)
class RenormBound:
    """Admissible twist for the renormalization iteration."""

    ell_hat: float
    lambda_hat: float
    phi0_norm: float
    m_mu: float
    t_mu: float

    def to_json(self) -> dict:
        return {"ell_hat": self.ell_hat, "lambda_hat": self.lambda_hat,
                "phi0_norm": self.phi0_norm, "m_mu": self.m_mu, "t_mu": self.t_mu}


def renorm_bound(phi0: Germ, mu: complex = 0j) -> RenormBound:
    """``ell_hat`` and ``lambda_hat`` for the data ``phi0``.

    The timing constant enters as ``1/t_mu``, the same way as in the
    synthesis bound; norms are sup norms of ``phi0'`` on the disc of radius
    ``m_mu exp(2 pi - 1/ell_hat)``.
    """
    c = model_constants(mu)
    rho = min(phi0.radius, 3 / 32)
    terms = [1.0, 1.0 / c.t_mu, 1e-2 / c.m_mu ** 0.25]
    denom = 2 * math.pi + math.log(c.m_mu / rho)
    if denom > 0:
        terms.append(1.0 / denom)
    ell_hat = min(terms)
    norm = phi0.sup_derivative(c.m_mu * math.exp(2 * math.pi - 1 / ell_hat))
    lam_hat = min(ell_hat, 1 / (8 * math.e * math.sqrt(c.m_mu) * math.sqrt(norm + 9)))
    return RenormBound(ell_hat, lam_hat, norm, c.m_mu, c.t_mu)


@dataclass
class RenormState:
    """Current germ ``delta`` with the history of the iteration.

    ``diffs[k]`` is the sup of ``|delta_{k+1} - delta_k|`` on the closed
    ``3/16`` disc; ``derivative_sups`` and ``image_sups`` record
    ``sup |Delta'|`` and ``sup |Delta|`` on the circle of radius ``3/16``.
    """

    delta: Germ
    index: int = 0
    diffs: list[float] = field(default_factory=list)
    delta_sups: list[float] = field(default_factory=list)
    derivative_sups: list[float] = field(default_factory=list)
    image_sups: list[float] = field(default_factory=list)
    last: SynthesisResult | None = field(default=None, repr=False)

    @classmethod
    def initial(cls) -> "RenormState":
        return cls(Germ(np.zeros(N_COEFFS, dtype=complex), DISC_RADIUS))

    @property
    def ratios(self) -> list[float]:
        d = self.diffs
        return [b / a for a, b in zip(d[:-1], d[1:]) if a > 0]

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "diffs": self.diffs,
            "ratios": self.ratios,
            "delta_sups": self.delta_sups,
            "derivative_sups": self.derivative_sups,
            "image_sups": self.image_sups,
            "coefficients": [[c.real, c.imag] for c in self.delta.coeffs],
        }


def _circle(radius: float, n: int) -> np.ndarray:
    return radius * np.exp(2j * np.pi * np.arange(n) / n)


def sample_delta_map(r: SynthesisResult, n: int = 2 * N_COEFFS,
                     radius: float = SAMPLE_FACTOR * DISC_RADIUS, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``Delta`` on ``n`` equispaced points of ``|z| = radius``."""
    z = _circle(radius, n)
    out = np.empty(n, dtype=complex)
    for k, zk in enumerate(z):
        res = delta_flow(r, zk, tol)
        if not res.ok:
            raise RadiusViolation(f"time-1 flow from {zk!r} ended with status {res.status}")
        out[k] = res.endpoint
    return out


def delta_germ_from_samples(values: np.ndarray, radius: float) -> Germ:
    """``log(Delta/id)`` as a germ at 0, from samples of ``Delta`` on ``|z| = radius``."""
    z = _circle(radius, values.size)
    ratio = values / z
    logs = np.log(ratio)
    if np.max(np.abs(np.diff(logs.imag))) > 1.0:
        raise RadiusViolation("log(Delta/id) is not continuous on the sampling circle")
    c = np.fft.fft(logs) / values.size / radius ** np.arange(values.size)
    c = c[:N_COEFFS].copy()
    c[0] = 0.0
    tail = float(np.max(np.abs(np.fft.fft(logs)[values.size // 2 - values.size // 8: values.size // 2 + 1]))
                 / values.size)
    return Germ(c, DISC_RADIUS, "0", tail)


def germ_disc_sup(g: Germ, radius: float = DISC_RADIUS, n: int = NORM_POINTS) -> float:
    """Sup of a germ over the closed disc (attained on its boundary circle)."""
    return float(np.max(np.abs(g.eval_chart(_circle(radius, n), check=False))))


def renorm_step(phi0: Germ, state: RenormState, lam: float, *, mu: complex = 0j,
                n_nodes: int = 400, fp_tol: float = 1e-12, force: bool = False,
                tol: float = DEFAULT_TOL) -> RenormState:
    """One synthesis with the current ``delta`` as the horn-map part at infinity."""
    bound = renorm_bound(phi0, mu)
    if lam > bound.lambda_hat and not force:
        raise ConfigError(f"lambda={lam:.4g} exceeds lambda_hat={bound.lambda_hat:.4g}")
    ModelParams(lam, mu)
    phi_inf = Germ(state.delta.coeffs, state.delta.radius, "inf")
    m = ModulusData(mu, phi0, phi_inf)
    r = synthesize(m, lam, fp_tol, n_nodes=n_nodes, allow_above_bound=True)
    values = sample_delta_map(r, tol=tol)
    new = delta_germ_from_samples(values, SAMPLE_FACTOR * DISC_RADIUS)
    # Delta = z exp(delta), evaluated on the 3/16 circle through the series
    z = _circle(DISC_RADIUS, NORM_POINTS)
    d = new.eval_chart(z, check=False)
    dd = new.deriv_chart(z, check=False)
    big = z * np.exp(d)
    deriv = np.exp(d) * (1 + z * dd)
    diff = Germ(new.coeffs - _pad(state.delta.coeffs, new.coeffs.size), DISC_RADIUS)
    out = RenormState(new, state.index + 1, state.diffs + [germ_disc_sup(diff)],
                      state.delta_sups + [germ_disc_sup(new)],
                      state.derivative_sups + [float(np.max(np.abs(deriv)))],
                      state.image_sups + [float(np.max(np.abs(big)))], r)
    return out


def _pad(c: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=complex)
    out[: min(n, c.size)] = c[:n]
    return out


def renorm_fixed_point(phi0: Germ, lam: float, tol: float = 1e-10, max_iter: int = 30, *,
                       mu: complex = 0j, force: bool = False, **kw) -> tuple[Germ, RenormState]:
    """Iterate :func:`renorm_step` from ``delta = 0`` until successive germs agree to ``tol``."""
    state = RenormState.initial()
    rising = 0
    for _ in range(max_iter):
        state = renorm_step(phi0, state, lam, mu=mu, force=force, **kw)
        if len(state.diffs) > 1 and state.diffs[-2] > 0:
            rising = rising + 1 if state.diffs[-1] >= state.diffs[-2] else 0
            if rising >= 3:
                raise NotContracting("renormalization steps grew three times in a row")
        if state.diffs[-1] < tol:
            return state.delta, state
    err = MaxIter(f"renormalization did not converge in {max_iter} steps")
    err.state = state
    raise err


def magnitude_bounds(lam: float, mu: complex = 0j, n: int = 64,
                     rng: np.random.Generator | None = None) -> dict:
    """Sampled checks of the two magnitude estimates for the model near 0.

    Returns the worst ratios ``|X0|/(2 lam |z|^2/5)`` (must be ``>= 1``),
    ``|X0|/(10 lam |z|^2/3)`` (must be ``<= 1``) on ``0 < |z| <= 1/2``, and
    ``|X0 . f|/(4 lam ||f||)`` on ``|z| <= 1/4, Re z >= 0`` for a random
    ``f`` normalized on ``V+`` within the disc of radius 1/2.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    p = ModelParams(lam, mu)
    rad = np.linspace(1e-3, 0.5, n)
    ang = np.linspace(-math.pi, math.pi, n, endpoint=False)
    z = (rad[:, None] * np.exp(1j * ang[None, :])).ravel()
    x = np.abs(eval_X0(z, p))
    lower = float(np.min(x / (2 * lam * np.abs(z) ** 2 / 5)))
    upper = float(np.max(x / (10 * lam * np.abs(z) ** 2 / 3)))
    c = rng.normal(size=4) + 1j * rng.normal(size=4)

    def f(w):
        b = 4 * w / (w + 1) ** 2
        return sum(ck * b ** (k + 1) for k, ck in enumerate(c))

    def fprime(w):
        b = 4 * w / (w + 1) ** 2
        db = 4 * (1 - w) / (w + 1) ** 3
        return sum((k + 1) * ck * b ** k * db for k, ck in enumerate(c))

    sec_ang = np.linspace(-5 * math.pi / 8, 5 * math.pi / 8, 4 * n)
    sec = (np.linspace(1e-4, 0.5, 2 * n)[:, None] * np.exp(1j * sec_ang[None, :])).ravel()
    norm = float(np.max(np.abs(f(sec))))
    half = (np.linspace(1e-3, 0.25, n)[:, None] * np.exp(1j * np.linspace(-math.pi / 2, math.pi / 2, n))[None, :]).ravel()
    lie = np.abs(eval_X0(half, p) * fprime(half))
    return {"lower_ratio": lower, "upper_ratio": upper,
            "lie_ratio": float(np.max(lie / (4 * lam * norm)))}
