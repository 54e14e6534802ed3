import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import DESK_LAMBDA
from parabsynth.errors import FixedPointNotFound, NumericalError
from parabsynth.flow import model_field, polar_field
from parabsynth.germs import Germ, ModulusData
from parabsynth.globalize import (
    find_poles,
    injectivity_check,
    linear_part_oracle,
    modulus_at_infinity,
    monodromy_check,
    multiplier_at,
    pole_counts,
    pole_residue,
    ramification_points,
    separatrix_directions,
    sigma_pole_symmetry,
    slit_distance,
    trace_separatrices,
    winding_number,
)
from parabsynth.model import ModelParams, involution_sigma
from parabsynth.synthesis import pole_equation, synthesize

ROOT_LAMBDA = math.sqrt(DESK_LAMBDA)


@pytest.fixture(scope="module")
def desk_ramification(desk_run_mu):
    reps = find_poles(desk_run_mu)
    return {rep.label: ramification_points(desk_run_mu, rep.location) for rep in reps}


class TestPoles:
    def test_model_poles_for_trivial_data(self):
        lam, mu = DESK_LAMBDA, 0.3
        reps = {rep.label: rep.location for rep in find_poles(synthesize(ModulusData(mu), lam))}
        z_plus = (lam * mu + math.sqrt(lam**2 * mu**2 + 4)) / 2
        z_minus = (lam * mu - math.sqrt(lam**2 * mu**2 + 4)) / 2
        assert reps["i"] == 1j and reps["-i"] == -1j
        assert reps["z+"] == pytest.approx(z_plus, abs=1e-15)
        assert reps["z-"] == pytest.approx(z_minus, abs=1e-15)
        assert involution_sigma(z_plus) == pytest.approx(z_minus, abs=1e-15)

    def test_desk_reports(self, desk_run_mu):
        reps = find_poles(desk_run_mu)
        assert [rep.label for rep in reps] == ["i", "-i", "z+", "z-"]
        assert all(rep.within_disc and rep.residual < 1e-10 for rep in reps)
        shared = [rep for rep in reps if len(rep.sides) == 2]
        assert {rep.label for rep in shared} == {"i", "-i"}
        assert all(rep.side_gap <= 1e-8 for rep in shared)

    def test_globalization_precondition(self, stress_run):
        with pytest.raises(Exception):
            find_poles(stress_run)

    def test_rouche_counts(self, desk_run, desk_run_mu):
        assert pole_counts(desk_run) == {"i": 1, "-i": 1}
        assert pole_counts(desk_run_mu) == {"i": 1, "-i": 1, "z+": 1, "z-": 1}

    def test_stress_poles_stay_simple(self, stress_run):
        for rep in find_poles(stress_run, check_bound=False):
            assert rep.distance < 3 * math.sqrt(stress_run.params.lam)
            for side in rep.sides:
                fun = lambda z, s=side: (1 - z * z) * pole_equation(stress_run, z, s)  # noqa: E731
                assert winding_number(fun, rep.location, 0.05) == 1

    def test_winding_refuses_small_values(self):
        with pytest.raises(NumericalError):
            winding_number(lambda z: z - 1.0, 0.0, 1.0)


class TestSigmaSymmetry:
    def test_desk_set_symmetry(self, desk_run_mu):
        sym = sigma_pole_symmetry(desk_run_mu)
        assert sym["set_distance"] < 1e-7
        assert sym["labelled"]["z+"] < 1e-7
        # sigma fixes +-i, so the labelled statement for the poles near +-i reads |i - (-i)| = 2
        assert sym["labelled"]["i"] == pytest.approx(2.0)

    def test_stress_pole_set_drifts_at_first_order(self, stress_run):
        # both poles move to the left by the same amount, and sigma mirrors them to the right;
        # this is outside the globalization regime, where the set symmetry is not claimed
        reps = find_poles(stress_run, check_bound=False)
        shift = [rep.location.real for rep in reps]
        sym = sigma_pole_symmetry(stress_run, reps)
        assert shift[0] == pytest.approx(shift[1]) and shift[0] < -1e-3
        assert sym["set_distance"] == pytest.approx(2 * abs(shift[0]), rel=1e-3)


class TestRamification:
    def test_points_are_close(self, desk_ramification):
        for rep in desk_ramification.values():
            z_p, w_p = rep.points
            assert abs(z_p - w_p) < 5 * ROOT_LAMBDA

    def test_forward_flow_separates_at_pole(self, desk_ramification):
        for rep in desk_ramification.values():
            for gap, time in rep.separation:
                assert gap < 1e-8 and abs(time - 1) < 1e-6

    def test_slits_pass_through_poles(self, desk_ramification):
        rep = desk_ramification["i"]
        assert slit_distance(rep.pole, [rep.slit])[0] == 0
        assert np.all(slit_distance(np.array(rep.points), [rep.slit]) < 1e-12)

    @pytest.mark.slow
    def test_monodromy_is_an_involution(self, desk_run_mu, desk_ramification):
        out = monodromy_check(desk_run_mu, desk_ramification["i"])
        assert out["switched"]
        assert out["after_one_loop"] < 1e-6 and out["after_two_loops"] < 1e-6

    @pytest.mark.slow
    def test_injective_off_slits(self, desk_run_mu, desk_ramification):
        slits = [rep.slit for rep in desk_ramification.values()]
        out = injectivity_check(desk_run_mu, slits, n=500)
        assert out["points"] > 400 and out["min_image_distance"] > 1e-6


class TestSeparatrices:
    def test_polar_model_directions(self):
        res = pole_residue(lambda w: 1.0 / polar_field().coeff(w), 0j)
        dirs = separatrix_directions(res)
        assert all(abs(d.real) < 1e-12 for d in dirs["stable"])
        assert all(abs(d.imag) < 1e-12 for d in dirs["unstable"])

    def test_mu_zero_graph(self):
        g = trace_separatrices(model_field(ModelParams(0.5, 0)))
        assert set(g.vertices) == {"0", "inf"}
        assert {s.pole for s in g.separatrices} == {1j, -1j}
        assert len(g.edges) == g.euler_face_count == 6
        assert g.edge_multiset() == {("0", "0"): 2, ("inf", "inf"): 2, ("0", "inf"): 1, ("inf", "0"): 1}

    @pytest.mark.parametrize("lam", [0.2, 0.5])
    def test_positive_mu_graph(self, lam):
        g = trace_separatrices(model_field(ModelParams(lam, 0.5)))
        assert set(g.vertices) == {"0", "+1", "-1", "inf"}
        assert len(g.edges) == g.euler_face_count == 10
        assert g.edge_multiset() == {("0", "0"): 2, ("inf", "inf"): 2, ("0", "inf"): 2, ("inf", "0"): 2,
                                     ("0", "+1"): 1, ("inf", "-1"): 1}
        assert all(e.source in g.vertices and e.target in g.vertices for e in g.edges)


class TestMultipliers:
    @pytest.mark.parametrize("point", [1, -1])
    def test_matches_linear_part(self, desk_run_mu, point):
        rep = multiplier_at(desk_run_mu, point)
        assert abs(rep.multiplier - linear_part_oracle(desk_run_mu, point)) < 1e-7
        assert rep.sign == pytest.approx(1.0, abs=1e-6)

    def test_sign_convention_at_minus_one(self, desk_run_mu):
        # the measured multiplier is exp(-1/mu) at both points, not exp(+1/mu) at -1
        rep = multiplier_at(desk_run_mu, -1)
        assert rep.same_sign_error < 1e-7 and rep.alternating_error > 0.5

    def test_center_case(self):
        r = synthesize(ModulusData(0.3j, Germ([0, 1 / 20])), DESK_LAMBDA)
        for point in (1, -1):
            assert abs(multiplier_at(r, point).multiplier) == pytest.approx(1.0, abs=1e-8)

    def test_needs_nonzero_mu(self, desk_run):
        with pytest.raises(FixedPointNotFound):
            multiplier_at(desk_run, 1)

    def test_oracle_against_closed_form(self):
        # X0'(1) = lam (1)(-2)/((2)(mu lam)) = -1/mu
        r = synthesize(ModulusData(0.3), DESK_LAMBDA)
        assert linear_part_oracle(r, 1) == pytest.approx(cmath.exp(-1 / 0.3), rel=1e-12)


class TestModulusAtInfinity:
    def test_trivial(self):
        rep = modulus_at_infinity(synthesize(ModulusData(0.2), 0.1))
        assert rep.max_composition_error < 1e-12

    def test_stress_composition(self, stress_run):
        rep = modulus_at_infinity(stress_run)
        assert rep.max_composition_error < 1e-5
        assert rep.involution_error < 1e-14


@settings(max_examples=40, deadline=None)
@given(roots=st.lists(st.complex_numbers(max_magnitude=2.0), min_size=1, max_size=5))
def test_winding_counts_roots_inside(roots):
    radius = 1.0
    assume(all(abs(abs(q) - radius) > 0.05 for q in roots))
    fun = lambda z: np.prod([z - q for q in roots], axis=0)  # noqa: E731
    assert winding_number(fun, 0j, radius) == sum(abs(q) < radius for q in roots)
