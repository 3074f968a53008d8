import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magwells import montwell


@pytest.fixture(scope="module")
def k1_minimum():
    return montwell.minimize(1)


def test_k1_minimum_matches_reference_digits(k1_minimum):
    assert abs(k1_minimum.alpha_min - 0.3468) < 1e-3
    assert abs(k1_minimum.nu_hat - 0.5698) < 1e-4
    assert abs(k1_minimum.lambda1_at_min - 1.9874) < 1e-3
    assert k1_minimum.local_minima == []


def test_first_derivative_vanishes_at_minimum(k1_minimum):
    disc = k1_minimum.method["discretization"]
    assert abs(montwell.dlambda_dalpha(1, k1_minimum.alpha_min, disc)) < 1e-4


def test_second_derivative_formula_matches_difference(k1_minimum):
    assert abs(k1_minimum.d2_formula - k1_minimum.d2_lambda0) < 1e-3
    assert k1_minimum.d2_lambda0 > 0


def test_even_k_minimum_is_at_zero():
    assert montwell.minimize(2).alpha_min == 0.0


@settings(max_examples=12, deadline=None)
@given(k=st.integers(1, 4), alpha=st.floats(-2, 3), beta=st.floats(0.2, 5))
def test_beta_reduction_agrees_with_direct_solve(k, alpha, beta):
    direct = montwell.lambda0_direct(k, alpha, beta)
    scaled = montwell.lambda0(k, alpha, beta)
    assert abs(direct - scaled) <= 1e-6 * max(1.0, direct)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_negative_beta(k):
    # t -> -t: even k flips the sign of beta; odd k moves it onto alpha
    direct = montwell.lambda0_direct(k, 0.7, -2.0)
    assert abs(montwell.lambda0(k, 0.7, -2.0) - direct) < 1e-6


def test_reduce_to_unit_beta_rejects_zero():
    with pytest.raises(ValueError):
        montwell.reduce_to_unit_beta(1, 0.3, 0.0)


def test_bad_k_is_rejected():
    with pytest.raises(ValueError):
        montwell.lambda0(0, 0.0)
    with pytest.raises(ValueError):
        montwell.minimize(1.5)


def test_ground_state_has_no_sign_change():
    mom = montwell.ground_state_moments(3, 0.4)
    assert mom["sign_changes"] == 0


def test_curve_contains_minimum_and_quadratic_fit(k1_minimum):
    c = montwell.curve(1, (0.0, 0.7), 8, minimum=k1_minimum)
    assert np.all(c.lambda0 >= k1_minimum.nu_hat - 1e-9)
    assert np.all(c.lambda1 > c.lambda0)
    near = np.abs(c.alpha_samples - k1_minimum.alpha_min) < 0.1
    assert np.allclose(c.lambda0[near], c.quad_approx[near], atol=2e-3)
    with pytest.raises(ValueError):
        montwell.curve(1, (0.0, 1.0), 1, minimum=k1_minimum)


def test_harmonic_prefactor_describes_large_alpha():
    # the prefactor from the harmonic approximation at the well bottom is
    # the one the numerics approach
    r = montwell.asymptotic_check(1, [25.0, 100.0, 400.0], "harmonic")
    assert np.all(np.diff(np.abs(r - 1)) < 0)
    assert abs(r[-1] - 1) < 0.02


def test_asymptotic_check_validates_input():
    with pytest.raises(ValueError):
        montwell.asymptotic_check(1, [50.0, 25.0])
    with pytest.raises(ValueError):
        montwell.asymptotic_prefactor(1, "other")


def test_nu_hat_scan_requires_k_max_seven():
    with pytest.raises(ValueError):
        montwell.nu_hat_limit_scan(5)


def test_nu_hat_bounded_by_limit():
    assert montwell.minimize(4).nu_hat < montwell.PI2_OVER_4 < math.pi**2 / 4 + 1e-9
