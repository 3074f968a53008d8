import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magwells.magschrod2d.gauge import ConstantProfile, HypersurfaceGauge, parse_gauge_text, parse_poly
from magwells.magschrod2d.operator import (
    Lattice2D,
    assemble2d,
    dense_eigenvalues,
    lowest_eigenvalues_2d,
    quasimode_residual,
    richardson_lowest,
    romberg_error,
)


def test_operator_is_hermitian():
    op = assemble2d(parse_gauge_text("b = 1 + x*y^2"), Lattice2D.square(1.0, 12, 0.4))
    assert op.hermiticity_defect() == 0.0


@settings(max_examples=10, deadline=None)
@given(c=st.lists(st.integers(-3, 3), min_size=4, max_size=4), h=st.floats(0.2, 1.0))
def test_gauge_shift_is_unitary_conjugation(c, h):
    chi = parse_poly(f"{c[0]}*x^2*y + {c[1]}*y^3 + {c[2]}*x + {c[3]}*x*y".replace("+ -", "- "))
    g = parse_gauge_text("A1 = -y/2\nA2 = x/2")
    lat = Lattice2D.square(1.0, 10, h)
    H1 = assemble2d(g, lat).matrix.toarray()
    H2 = assemble2d(g.gauge_shift(chi), lat).matrix.toarray()
    X, Y = lat.mesh()
    U = np.diag(np.exp(1j * chi(X, Y).ravel().astype(float) / h))
    assert np.max(np.abs(U.conj().T @ H2 @ U - H1)) < 1e-10 * np.max(np.abs(H1))


def test_free_box_ground_state():
    best, raw = richardson_lowest(parse_gauge_text("A1 = 0"), Lattice2D.square(1.0, 30, 1.0), 3)
    exact = np.pi**2 / 4 * np.array([2, 5, 5])
    assert np.allclose(best, exact, atol=1e-5)
    assert np.all(np.abs(best - exact) <= romberg_error(raw))


def test_krylov_matches_dense_and_reports_clusters():
    op = assemble2d(parse_gauge_text("A1 = 0"), Lattice2D.square(1.0, 20, 1.0))
    sol = lowest_eigenvalues_2d(op, 3, vectors=True)
    assert np.allclose(sol.values, dense_eigenvalues(op, 3), atol=1e-9)
    assert (1, 2) in sol.clusters
    assert sol.vectors.shape == (3, op.dimension)
    for v, lam in zip(sol.vectors, sol.values):
        assert quasimode_residual(op, v, lam) < 1e-8 * op.norm_estimate()


def test_constant_field_lowest_level():
    # Landau level h b on a box much larger than the magnetic length
    h = 0.05
    best, _ = richardson_lowest(parse_gauge_text("A2 = x"), Lattice2D.square(1.0, 80, h), 1)
    assert abs(best[0] / h - 1) < 1e-3


def test_periodic_lattice_needs_periodic_gauge():
    lat = Lattice2D(0.0, 1.0, -1.0, 1.0, 8, 8, 0.5, "periodic_x_dirichlet_y")
    with pytest.raises(ValueError):
        assemble2d(parse_gauge_text("A2 = x"), lat)
    op = assemble2d(HypersurfaceGauge(1, 0.0, ConstantProfile(1.0)), lat)
    assert op.hermiticity_defect() == 0.0


def test_lattice_refinement_and_validation():
    lat = Lattice2D.square(1.0, 9, 0.1)
    fine = lat.refined()
    assert fine.nx == 19 and np.isclose(fine.dx, lat.dx / 2)
    per = Lattice2D(0.0, 1.0, -1.0, 1.0, 8, 9, 0.1, "periodic_x_dirichlet_y").refined()
    assert per.nx == 16 and per.ny == 19
    with pytest.raises(ValueError):
        Lattice2D(0, 1, 0, 1, 2, 5, 0.1)
    with pytest.raises(ValueError):
        Lattice2D(0, 1, 0, 1, 5, 5, 0.1, "neumann")
    with pytest.raises(ValueError):
        Lattice2D(0, 1, 0, 1, 5, 5, 0.0)


def test_quasimode_residual_rejects_bad_vectors():
    op = assemble2d(parse_gauge_text("A1 = 0"), Lattice2D.square(1.0, 5, 1.0))
    with pytest.raises(ValueError):
        quasimode_residual(op, np.zeros(op.dimension), 1.0)
    with pytest.raises(ValueError):
        quasimode_residual(op, np.ones(3), 1.0)


def test_too_many_eigenvalues_requested():
    op = assemble2d(parse_gauge_text("A1 = 0"), Lattice2D.square(1.0, 3, 1.0))
    with pytest.raises(ValueError):
        lowest_eigenvalues_2d(op, 8)
