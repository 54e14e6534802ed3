import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parabsynth.errors import ConfigError, PoleAt
from parabsynth.germs import Germ, ModulusData
from parabsynth.model import (
    SECTORS,
    ModelParams,
    act_on_pair,
    eval_H0,
    eval_tau,
    eval_X0,
    h_helper,
    involution_sigma,
    log_H0,
    model_constants,
    pullback_Pi,
    synthesis_bounds,
    x0_derivative,
)

FOUR_PI_SQ = 4 * math.pi**2


def moduli(max_abs=5.0):
    return st.complex_numbers(max_magnitude=max_abs, allow_nan=False, allow_infinity=False)


def off_singular(min_mod=0.05, max_mod=20.0):
    return st.builds(lambda r, a: r * complex(math.cos(a), math.sin(a)),
                     st.floats(min_mod, max_mod), st.floats(-math.pi, math.pi))


def wedge_points(n, rng, wedge="0", radii=(0.2, 5.0)):
    lo, hi = SECTORS.wedge_low, SECTORS.wedge_high
    a = rng.uniform(lo + 1e-3, hi - 1e-3, n)
    r = np.exp(rng.uniform(math.log(radii[0]), math.log(radii[1]), n))
    z = r * np.exp(1j * a)
    return z if wedge == "0" else np.conj(z)


class TestField:
    def test_zero_at_one(self):
        assert eval_X0(1, ModelParams(0.1, 0.5)) == 0

    def test_pole_at_i(self):
        with pytest.raises(PoleAt):
            eval_X0(1j, ModelParams(0.1, 0.5))

    def test_pullback_chain_rule(self):
        lam, mu, z = 0.1, 0.5, 0.5
        x = pullback_Pi(z, lam)
        dpi = lam * (1 + z * z) / (1 - z * z) ** 2
        oracle = x * x / (1 + mu * x) / dpi
        assert eval_X0(z, ModelParams(lam, mu)) == pytest.approx(oracle, rel=1e-14)

    def test_nonpositive_lambda_rejected(self):
        with pytest.raises(ConfigError):
            ModelParams(0.0)

    def test_mu_zero_cancellation(self):
        z = np.array([0.3 + 0.2j, 2.0 - 1.0j])
        assert np.allclose(eval_X0(z, ModelParams(0.2, 0)), 0.2 * z * z / (1 + z * z), rtol=1e-14)

    def test_infinity_chart_matches_pushforward(self):
        p = ModelParams(0.2, 0.5 + 0.1j)
        w = np.array([0.1 + 0.05j, -0.2j])
        # d/dw of 1/z: coefficient -w^2 R(1/w)
        assert np.allclose(eval_X0(w, p, chart="w"), -w * w * eval_X0(1 / w, p), rtol=1e-12)

    def test_derivative_matches_difference(self):
        p = ModelParams(0.3, 0.4 - 0.2j)
        z, h = 0.7 + 0.2j, 1e-6
        fd = (eval_X0(z + h, p) - eval_X0(z - h, p)) / (2 * h)
        assert abs(x0_derivative(z, p) - fd) < 1e-8

    def test_poles_and_zeros(self):
        p = ModelParams(0.2, 0.5)
        assert p.poles[:2] == (1j, -1j)
        assert p.z_plus * p.z_minus == pytest.approx(-1)
        assert ModelParams(0.2).poles == (1j, -1j)
        assert ModelParams(0.2).finite_zeros == (0j,)


class TestPullbackAndTau:
    def test_pi_at_zero(self):
        assert pullback_Pi(0, 0.3) == 0

    def test_pi_sigma_invariant(self):
        z = 0.3 + 0.2j
        assert pullback_Pi(involution_sigma(z), 0.7) == pytest.approx(pullback_Pi(z, 0.7), rel=1e-14)

    def test_pi_at_two(self):
        assert pullback_Pi(2, 0.5) == pytest.approx(-1 / 3)

    def test_pi_singular_at_one(self):
        with pytest.raises(ConfigError):
            pullback_Pi(1.0, 0.5)

    def test_tau_at_i(self):
        assert eval_tau(1j, 1.0) == pytest.approx(-2j)

    def test_tau_lower_bound_on_wedges(self):
        rng = np.random.default_rng(1)
        lam = 0.3
        z = np.concatenate([wedge_points(50, rng, "0"), wedge_points(50, rng, "inf")])
        assert np.all(np.abs(eval_tau(z, lam)) >= 1 / lam)

    def test_tau_angle_on_upper_wedge(self):
        rng = np.random.default_rng(2)
        z = wedge_points(100, rng, "0")
        assert np.all(np.abs(np.angle(eval_tau(z, 0.3)) + math.pi / 2) <= 3 * math.pi / 8 + 1e-12)

    @given(off_singular())
    def test_tau_sigma_invariant(self, z):
        assert eval_tau(involution_sigma(z), 0.4) == pytest.approx(eval_tau(z, 0.4), rel=1e-12, abs=1e-12)


class TestInvolution:
    def test_fixed_point(self):
        assert involution_sigma(1j) == 1j

    def test_two(self):
        assert involution_sigma(2) == -0.5

    @given(off_singular(1e-3, 1e3))
    def test_involutive(self, z):
        assert involution_sigma(involution_sigma(z)) == pytest.approx(z, rel=1e-14)

    @settings(max_examples=200)
    @given(off_singular(0.05, 20.0), st.floats(1e-3, 1.0), moduli(2.0))
    def test_model_is_sigma_invariant(self, z, lam, mu):
        p = ModelParams(lam, mu)
        # 1 - z^2 loses relative accuracy near the zeros +-1
        special = p.poles + (1, -1)
        if min(abs(z - q) for q in special) < 1e-3 or min(abs(-1 / z - q) for q in special) < 1e-3:
            return
        pulled = act_on_pair(lambda w: eval_X0(w, p), lambda w: eval_X0(w, p), kind="field")[0](z)
        assert abs(pulled - eval_X0(z, p)) <= 1e-12 * abs(eval_X0(z, p)) + 1e-300


class TestFirstIntegral:
    @settings(max_examples=200)
    @given(st.floats(0.05, 3.0), st.floats(-1.9, 1.9), st.floats(0.01, 1.0), moduli(2.0))
    def test_primitive_function(self, r, a, lam, mu):
        # X0 . (log H0)' = 2 i pi with (log H0)' = -2 i pi tau' (1 + mu/tau)
        z = r * complex(math.cos(a), math.sin(a))
        p = ModelParams(lam, mu)
        if min(abs(z - q) for q in p.poles + (1, -1)) < 1e-3:
            return
        tau = eval_tau(z, lam)
        dtau = -(1 + z * z) / (lam * z * z)
        lie = eval_X0(z, p) * (-2j * math.pi * dtau * (1 + mu / tau))
        assert abs(lie / (2j * math.pi) - 1) < 1e-9

    def test_primitive_by_differences(self):
        p = ModelParams(0.2, 0.3 + 0.1j)
        rng = np.random.default_rng(3)
        z = np.exp(rng.uniform(-1, 1, 50)) * np.exp(1j * rng.uniform(-1.4, 1.4, 50))
        h = 1e-6
        d = (log_H0(z + h, "+", p) - log_H0(z - h, "+", p)) / (2 * h)
        assert np.max(np.abs(eval_X0(z, p) * d / (2j * math.pi) - 1)) < 1e-7

    def test_gluing_on_wedges(self):
        p = ModelParams(0.3, 0.2 + 0.1j)
        rng = np.random.default_rng(4)
        up, lo = wedge_points(30, rng, "0"), wedge_points(30, rng, "inf")
        assert np.allclose(log_H0(up, "-", p) - log_H0(up, "+", p), FOUR_PI_SQ * p.mu, atol=1e-12)
        assert np.allclose(log_H0(lo, "-", p) - log_H0(lo, "+", p), 0, atol=1e-12)

    def test_sigma_transport(self):
        # H0-(sigma z) = H0+(z) below the real axis; above it the determinations differ by the gluing constant
        p = ModelParams(0.3, 0.2 + 0.1j)
        rng = np.random.default_rng(5)
        z = np.exp(rng.uniform(-1, 1, 40)) * np.exp(1j * rng.uniform(-1.5, 1.5, 40))
        diff = log_H0(involution_sigma(z), "-", p) - log_H0(z, "+", p)
        expected = np.where(z.imag > 0, FOUR_PI_SQ * p.mu, 0)
        assert np.allclose(diff, expected, atol=1e-11)

    def test_size_on_upper_wedge(self):
        for mu in (0, 0.5, 1 + 1j):
            p = ModelParams(0.2, mu)
            rng = np.random.default_rng(6)
            z = wedge_points(100, rng, "0")
            log_bound = math.log(model_constants(mu).m_mu) - np.abs(eval_tau(z, p.lam))
            assert np.all(np.real(log_H0(z, "+", p)) <= log_bound)

    def test_monodromy_around_zero(self):
        # continuing log H0 once counterclockwise around 0 multiplies H0 by exp(-4 pi^2 mu)
        p = ModelParams(0.5, 0.3 - 0.2j)
        x, w = np.polynomial.legendre.leggauss(200)
        theta = math.pi * (x + 1)
        z = 0.3 * np.exp(1j * theta)
        dz = 1j * z * math.pi
        tau = eval_tau(z, p.lam)
        dtau = -(1 + z * z) / (p.lam * z * z)
        total = np.sum(w * (-2j * math.pi) * dtau * (1 + p.mu / tau) * dz)
        assert total == pytest.approx(-FOUR_PI_SQ * p.mu, abs=1e-10)

    def test_flat_decay_toward_zero(self):
        p = ModelParams(0.2, 0.4)
        r = np.geomspace(1e-2, 0.5, 40)
        z = r * np.exp(1j * math.pi / 2)
        mag = np.real(log_H0(z, "+", p))
        assert np.all(np.diff(mag) > 0)
        zi = 1 / z  # lower wedge, moving in from infinity
        assert np.all(np.diff(-np.real(log_H0(zi, "+", p))) > 0)

    def test_orbit_size_chain(self):
        for lam, mu in ((0.2, 0), (0.1, 0.5), (0.05, 0.2 + 0.3j)):
            p = ModelParams(lam, mu)
            c = model_constants(mu)
            rng = np.random.default_rng(7)
            sup_v0 = float(np.max(np.real(log_H0(wedge_points(2000, rng, "0", (1e-3, 1e3)), "+", p))))
            inf_vinf = float(np.min(np.real(log_H0(wedge_points(2000, rng, "inf", (1e-3, 1e3)), "+", p))))
            chain = [sup_v0, math.log(c.m_mu) - 1 / lam, 1 / lam - math.log(c.m_mu), inf_vinf]
            assert all(a <= b for a, b in zip(chain, chain[1:])), chain

    def test_eval_matches_log(self):
        p = ModelParams(0.5, 0.1)
        z = 0.7 + 0.3j
        assert eval_H0(z, "+", p) == pytest.approx(np.exp(log_H0(z, "+", p)))


class TestConstants:
    def test_trivial(self):
        c = model_constants(0)
        assert (c.m_delta, c.t_delta, c.m_mu, c.t_mu) == (1, 1, 1, 1)

    def test_real_mu(self):
        assert model_constants(0.3).m_delta == pytest.approx(math.exp(2 * math.pi**2 * 0.3))

    def test_helper_bounded_on_ray(self):
        mu, delta = 1 + 1j, 3 * math.pi / 8
        c = model_constants(mu, delta)
        r = np.geomspace(c.t_delta * 1.001, 50 * c.t_delta, 50)
        tau = r * np.exp(1j * (-math.pi / 2 + delta))
        assert np.all(np.abs(h_helper(tau, mu)) < c.m_delta)

    def test_delta_range(self):
        with pytest.raises(ConfigError):
            model_constants(0, math.pi / 2)


class TestSynthesisBounds:
    def test_trivial_modulus(self):
        b = synthesis_bounds(ModulusData(0))
        assert b.kappa(0.3) == 0 and b.lambda_max == b.ell

    def test_unit_radii(self):
        m = ModulusData(0, Germ([0, 0.1], radius=1.0), Germ([0, 0.1], radius=1.0, center="inf"))
        assert synthesis_bounds(m).ell == pytest.approx(1 / (2 * math.pi))

    def test_core_run_bound(self):
        b = synthesis_bounds(ModulusData(0, Germ([0, 1 / 20])))
        assert b.lambda_max == 1.0

    @given(st.floats(1e-3, 0.5), st.floats(0.0, 0.999))
    def test_kappa_below_half(self, slope, frac):
        b = synthesis_bounds(ModulusData(0.1, Germ([0, slope], radius=0.5)))
        lam = frac * b.lambda_max
        assert b.kappa(lam) < 0.5
