import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parabsynth.errors import ConfigError, MaxIter
from parabsynth.germs import Germ
from parabsynth.model import model_constants
from parabsynth.renorm import (
    DELTA_BALL,
    DERIVATIVE_BOUND,
    DISC_RADIUS,
    IMAGE_RADIUS,
    RenormState,
    delta_germ_from_samples,
    germ_disc_sup,
    magnitude_bounds,
    renorm_bound,
    renorm_fixed_point,
    renorm_step,
)
from parabsynth.synthesis import measure_horn_maps

ZERO = Germ([0, 0.0])


def model_delta_log(z, lam):
    """``log(Delta0(z)/z)`` from the root of ``z D^2 - (z^2 + lam z - 1) D - z`` nearest ``z`` (mu = 0)."""
    out = []
    for zk in np.atleast_1d(z):
        roots = np.roots([zk, -(zk * zk + lam * zk - 1), -zk])
        out.append(np.log(roots[np.argmin(np.abs(roots - zk))] / zk))
    return np.array(out)


@pytest.fixture(scope="module")
def stress_renorm():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return renorm_fixed_point(Germ([0, 3e5]), 0.6, force=True)


class TestBound:
    def test_formula(self):
        phi0 = Germ([0, 1 / 50])
        b = renorm_bound(phi0)
        c = model_constants(0)
        ell = min(1.0, 1 / c.t_mu, 1e-2 / c.m_mu**0.25, 1 / (2 * math.pi + math.log(c.m_mu * 32 / 3)))
        assert b.ell_hat == pytest.approx(ell)
        lam = min(ell, 1 / (8 * math.e * math.sqrt(c.m_mu) * math.sqrt(1 / 50 + 9)))
        assert b.lambda_hat == pytest.approx(lam)

    def test_large_data_shrinks_twist(self):
        assert renorm_bound(Germ([0, 3e5])).lambda_hat < renorm_bound(Germ([0, 1 / 50])).lambda_hat

    def test_refuses_above_bound(self):
        with pytest.raises(ConfigError):
            renorm_step(ZERO, RenormState.initial(), 0.5)


class TestStep:
    def test_first_step_is_model_germ(self):
        lam = renorm_bound(ZERO).lambda_hat
        state = renorm_step(ZERO, RenormState.initial(), lam)
        z = 0.1 * np.exp(2j * np.pi * np.arange(8) / 8)
        assert np.max(np.abs(state.delta.eval_chart(z) - model_delta_log(z, lam))) < 1e-12
        assert state.index == 1 and state.last.f_is_zero

    def test_samples_to_germ(self):
        radius = 0.15
        z = radius * np.exp(2j * np.pi * np.arange(96) / 96)
        g = delta_germ_from_samples(z * np.exp(0.3 * z + 0.1 * z * z), radius)
        assert g.coeffs[1] == pytest.approx(0.3) and g.coeffs[2] == pytest.approx(0.1)
        # roundoff in coefficient k is amplified by radius^-k
        assert np.all(np.abs(g.coeffs[3:]) < 1e-15 * radius ** -np.arange(3.0, g.coeffs.size))

    def test_disc_sup(self):
        assert germ_disc_sup(Germ([0, 2.0])) == pytest.approx(2 * DISC_RADIUS)


class TestFixedPoint:
    def test_trivial_data(self):
        lam = renorm_bound(ZERO).lambda_hat
        delta, state = renorm_fixed_point(ZERO, lam)
        again = renorm_step(ZERO, state, lam)
        assert again.diffs[-1] < 1e-10
        assert state.delta_sups[-1] < DELTA_BALL

    def test_stress_bounds(self, stress_renorm):
        _, state = stress_renorm
        assert not state.last.f_is_zero
        assert max(state.ratios) <= 0.1
        assert max(state.derivative_sups) <= DERIVATIVE_BOUND
        assert max(state.image_sups) <= IMAGE_RADIUS
        assert max(state.delta_sups) < DELTA_BALL

    def test_stress_reproduces_itself(self, stress_renorm):
        assert measure_horn_maps(stress_renorm[1].last).max_psi_error < 1e-4

    def test_history_json(self, stress_renorm):
        doc = stress_renorm[1].to_json()
        assert doc["index"] == len(doc["diffs"]) and len(doc["coefficients"]) == 48

    def test_max_iter_keeps_state(self):
        lam = renorm_bound(Germ([0, 1 / 50])).lambda_hat
        with pytest.raises(MaxIter) as err:
            renorm_fixed_point(Germ([0, 1 / 50]), lam, tol=0.0, max_iter=1)
        assert err.value.state.index == 1


class TestMagnitudes:
    @pytest.mark.parametrize("lam, mu", [(0.01, 0), (0.01, 0.5), (1 / 25600, 0.3 + 0.2j)])
    def test_model_bounds(self, lam, mu):
        out = magnitude_bounds(lam, mu)
        assert out["lower_ratio"] >= 1 and out["upper_ratio"] <= 1 and out["lie_ratio"] <= 1


@settings(max_examples=30, deadline=None)
@given(small=st.floats(1e-4, 1.0), factor=st.floats(1.0, 1e6))
def test_bound_shrinks_with_data(small, factor):
    assert renorm_bound(Germ([0, small * factor])).lambda_hat <= renorm_bound(Germ([0, small])).lambda_hat
