import numpy as np
import pytest

from magwells.magschrod2d.gauge import parse_gauge_text, parse_poly
from magwells.magschrod2d.wells import (
    ModelOperatorSpec,
    analyze_field,
    asymptotics_check_discrete_well,
    model_operator_spectrum,
    single_well,
)
from magwells.model1d import ConfinementError


def test_point_well_of_quadratic_field():
    fa = analyze_field(parse_gauge_text("b = x^2 + y^2"))
    well = single_well(fa, "point")
    assert fa.b0 < 1e-10 and fa.b0_lower == 0.0
    assert np.allclose(well.location, (0.0, 0.0), atol=1e-6)
    assert abs(well.fitted_order - 2) < 0.1


def test_curve_well_touching_boundary_is_flagged():
    fa = analyze_field(parse_gauge_text("b = x"))
    assert [w.kind for w in fa.wells] == ["curve"]
    assert fa.wells[0].touches_boundary and fa.flags
    assert abs(fa.wells[0].fitted_order - 1) < 0.1
    with pytest.raises(ValueError):
        single_well(fa, "curve")


def test_positive_minimum_has_certified_lower_bound():
    fa = analyze_field(parse_gauge_text("b = 1 + x^2 + y^2"))
    assert abs(fa.b0 - 1) < 1e-10
    assert 0 < fa.b0_lower <= fa.b0


def test_two_wells_are_separated():
    fa = analyze_field(parse_gauge_text("b = x^4 - 0.5*x^2 + 0.0625 + y^2"))
    assert len(fa.wells) == 2
    xs = sorted(w.location[0] for w in fa.wells)
    assert np.allclose(xs, [-0.5, 0.5], atol=1e-6)
    with pytest.raises(ValueError):
        single_well(fa, "point")


def test_model_spec_requires_homogeneous_field():
    with pytest.raises(ValueError):
        ModelOperatorSpec(2, parse_poly("x^2 + y"))
    spec = ModelOperatorSpec.at_point(parse_poly("x^2 - 2*x + 1 + y^2"), 1.0, 0.0)
    assert spec.k == 2 and spec.b0 == parse_poly("x^2 + y^2")
    with pytest.raises(ValueError):
        ModelOperatorSpec.at_point(parse_poly("1 + x"), 0.0, 0.0)


def test_model_operator_dilation_law():
    spec = ModelOperatorSpec(2, parse_poly("x^2 + y^2"))
    coarse = dict(n=31, levels=2, tol=1e-3)
    mu = model_operator_spectrum(spec, m=2, **coarse).values
    h = 0.5
    scaled = model_operator_spectrum(spec, m=2, h=h, **coarse).values / h**1.5
    assert np.allclose(mu, scaled, rtol=1e-10)
    assert mu[0] < mu[1]


def test_line_zero_does_not_confine():
    spec = ModelOperatorSpec(1, parse_poly("x"))
    with pytest.raises(ConfinementError):
        model_operator_spectrum(spec, max_doublings=1)
    ms = model_operator_spectrum(spec, max_doublings=2, strict=False)
    assert not ms.converged
    assert np.all(np.diff([v[0] for v in ms.history]) < 0)


def test_asymptotics_check_rejects_nonvanishing_field():
    with pytest.raises(ValueError):
        asymptotics_check_discrete_well(parse_gauge_text("b = 1 + x^2 + y^2"), [0.1, 0.05])
