import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import STRESS_LAMBDA, STRESS_SCALE
from parabsynth.cauchyheine import (
    RAY_ANGLES,
    CauchyHeine,
    SectorialPair,
    _fixed_rays,
    ch_transform,
    jump_residual,
    lambda_bound,
    random_unit_pair,
    residue_sign,
    sigma_pullback,
    standard_rays,
)
from parabsynth.errors import ConfigError
from parabsynth.germs import Germ, ModulusData
from parabsynth.model import TWO_PI_I, ModelParams, involution_sigma, synthesis_bounds
from parabsynth.synthesis import horn_sample_points

COUSIN_SCALE = 1 / TWO_PI_I


@pytest.fixture(scope="module")
def stress():
    """Large real data at the stress twist: the transform is far from negligible here."""
    p = ModelParams(STRESS_LAMBDA, 0)
    m = ModulusData(0.0, Germ([0, STRESS_SCALE]), Germ([0, -STRESS_SCALE], center="inf"))
    return m, p, standard_rays(p)


def sector_points(n, seed):
    rng = np.random.default_rng(seed)
    return np.exp(rng.uniform(-1, 1, n)) * np.exp(1j * rng.uniform(-1.4, 1.4, n))


def wedge_points(n=50):
    pts = horn_sample_points(n)
    return np.concatenate([pts["0"], pts["inf"]])


def scaled(f, s):
    return SectorialPair.from_function(f.rays, lambda z: s * f.plus_fn(z))


def test_ray_layout():
    assert RAY_ANGLES[0] < RAY_ANGLES[1] and RAY_ANGLES[2] > RAY_ANGLES[3]
    assert all(a == pytest.approx(-b) for a, b in zip(RAY_ANGLES[:2], RAY_ANGLES[2:]))


def test_unknown_kernel():
    with pytest.raises(ConfigError):
        CauchyHeine(ModulusData(0.0), ModelParams(0.1), kernel="cauchy")


def test_trivial_data_gives_zero():
    p = ModelParams(0.5, 0.2)
    rays = standard_rays(p)
    f = random_unit_pair(rays, np.random.default_rng(1))
    out = ch_transform(f, ModulusData(0.2), p)
    assert out.is_zero


def test_residue_sign_is_zero_off_wedge():
    assert residue_sign(0.0, RAY_ANGLES[0], "+", "0") == 0


def test_a_priori_bound(stress):
    m, p, rays = stress
    b = synthesis_bounds(m)
    values = CauchyHeine(m, p, COUSIN_SCALE).lambda_at(SectorialPair.zero(rays), sector_points(40, 2), "+")
    assert np.max(np.abs(values)) <= lambda_bound(p.lam, b.m_mu, 0.0, max(b.phi_norms))


class TestJumpIdentity:
    def test_symmetric_kernel(self, stress):
        m, p, rays = stress
        f = random_unit_pair(rays, np.random.default_rng(4))
        assert np.max(np.abs(jump_residual(f, m, p, wedge_points()))) < 1e-10

    def test_sqrt_kernel_breaks_on_both_wedges(self, stress):
        # the per-side branches of sqrt(xi) differ by a sign on the lower ray, so that
        # ray's contribution survives in Lambda- - Lambda+ even on the upper wedge
        m, p, rays = stress
        z = wedge_points()
        res = np.abs(jump_residual(SectorialPair.zero(rays), m, p, z, kernel="sqrt"))
        assert np.max(res[z.imag > 0]) > 1e-4 and np.max(res[z.imag < 0]) > 1e-4


class TestContours:
    @pytest.mark.parametrize("side", ["+", "-"])
    def test_independent_of_ray_choice(self, stress, side):
        m, p, rays = stress
        f = random_unit_pair(rays, np.random.default_rng(3))
        op = CauchyHeine(m, p)
        z = wedge_points()
        near = op.lambda_at(f, z, side, choice=_fixed_rays(f, z, 0, 0))
        far = op.lambda_at(f, z, side, choice=_fixed_rays(f, z, 1, 1))
        assert np.max(np.abs(near - far)) < 1e-10 * max(1.0, float(np.max(np.abs(near))))

    def test_node_doubling(self, stress):
        m, p, _ = stress
        z = sector_points(30, 5)
        coarse = CauchyHeine(m, p).lambda_at(SectorialPair.zero(standard_rays(p, 400)), z, "+")
        fine = CauchyHeine(m, p).lambda_at(SectorialPair.zero(standard_rays(p, 800)), z, "+")
        assert np.max(np.abs(coarse - fine)) < 1e-9


class TestDerivative:
    @pytest.mark.parametrize("random_pair", [False, True])
    def test_matches_difference_quotient(self, stress, random_pair):
        m, p, rays = stress
        f = random_unit_pair(rays, np.random.default_rng(6)) if random_pair else SectorialPair.zero(rays)
        op = CauchyHeine(m, p, COUSIN_SCALE)
        z, h = sector_points(30, 7), 1e-6
        fd = (op.lambda_at(f, z + h, "+") - op.lambda_at(f, z - h, "+")) / (2 * h)
        exact = op.derivative(f, z, "+")
        assert np.max(np.abs(fd - exact) / np.abs(exact)) < 1e-6


def test_sigma_antivariance(stress):
    # for data with phi_inf(u) = -phi0(u) the transform of the pulled-back pair is minus the transform
    m, p, rays = stress
    f = random_unit_pair(rays, np.random.default_rng(8))
    op = CauchyHeine(m, p)
    z = sector_points(30, 9)
    direct = op.lambda_at(f, z, "+")
    pulled = op.lambda_at(sigma_pullback(f), involution_sigma(z), "-")
    assert np.max(np.abs(direct + pulled)) < 1e-12 * np.max(np.abs(direct))


class TestContraction:
    def test_lipschitz_near_zero(self, stress):
        m, p, rays = stress
        rng = np.random.default_rng(10)
        fa, fb = (scaled(random_unit_pair(rays, rng), 1e-3) for _ in range(2))
        ta = ch_transform(fa, m, p, scale=COUSIN_SCALE)
        tb = ch_transform(fb, m, p, scale=COUSIN_SCALE)
        ratio = ta.distance(tb) / fa.distance(fb)
        assert 0 < ratio <= 1.2 * 2 * synthesis_bounds(m).kappa(p.lam)

    def test_range_of_zero(self, stress):
        m, p, rays = stress
        image = ch_transform(SectorialPair.zero(rays), m, p, scale=COUSIN_SCALE)
        assert 0 < image.sampled_norm() <= synthesis_bounds(m).ball_radius(p.lam)

    @pytest.mark.parametrize("one_sided", [True, False])
    def test_symmetric_kernel_limits_cancel(self, stress, one_sided):
        # the kernel tends to 1/(2 xi) at 0 and -1/(2 xi) at inf, so the normalizing offset vanishes
        m, p, rays = stress
        data = ModulusData(0.0, m.phi0) if one_sided else m
        f = random_unit_pair(rays, np.random.default_rng(12))
        v0, vinf = CauchyHeine(data, p, COUSIN_SCALE).at_limits(f)
        assert abs(v0) > 0 and abs(v0 + vinf) < 1e-12 * abs(v0)
        assert ch_transform(f, data, p, scale=COUSIN_SCALE).offset == 0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1.0))
def test_jump_identity_for_any_pair(stress, seed, scale):
    m, p, rays = stress
    f = scaled(random_unit_pair(rays, np.random.default_rng(seed)), scale)
    assert np.max(np.abs(jump_residual(f, m, p, wedge_points(20)))) < 1e-10
