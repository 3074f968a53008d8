"""Field diagnostics, model operators at zeros of the field, and small-h sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..model1d import ConfinementError
from .gauge import GaugeField2D, Poly2D, landau_gauge
from .operator import Lattice2D, assemble2d, lowest_eigenvalues_2d, richardson_lowest, romberg_error

__all__ = [
    "AsymptoticsReport",
    "FieldAnalysis",
    "ModelOperatorSpec",
    "ModelSpectrum",
    "NonzeroBottomReport",
    "Well",
    "analyze_field",
    "asymptotics_check_discrete_well",
    "model_operator_spectrum",
    "nonzero_bottom_expansion",
    "single_well",
]


# ---------------------------------------------------------------------------
# field analysis
# ---------------------------------------------------------------------------


@dataclass
class Well:
    label: int
    kind: str  # "point" or "curve"
    location: tuple[float, float]
    minimum: float
    cells: int
    touches_boundary: bool
    fitted_order: float | None


@dataclass
class FieldAnalysis:
    b0: float
    b0_lower: float
    epsilon: float
    wells: list[Well]
    labels: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    flags: list[str] = field(default_factory=list)


def _refine_minimum(f, x, y, dx, dy, box, rounds=4, n=21):
    best = (float(f(x, y)), x, y)
    for _ in range(rounds):
        X, Y = np.meshgrid(np.clip(np.linspace(x - dx, x + dx, n), box[0], box[1]),
                           np.clip(np.linspace(y - dy, y + dy, n), box[2], box[3]), indexing="ij")
        V = f(X, Y)
        i = np.unravel_index(np.argmin(V), V.shape)
        if V[i] <= best[0]:
            best = (float(V[i]), float(X[i]), float(Y[i]))
        x, y = best[1], best[2]
        dx, dy = 2 * dx / (n - 1), 2 * dy / (n - 1)
    return best


def analyze_field(gauge: GaugeField2D, domain=(-1.0, 1.0, -1.0, 1.0), epsilon: float | None = None,
                  n: int = 201) -> FieldAnalysis:
    """Minimal intensity ``b0`` of ``|b|`` on ``domain`` and the wells of ``{|b| <= b0 + epsilon}``.

    ``b0_lower`` is a guaranteed lower bound: every point of the box is within
    half a cell diagonal of a sample, and ``|grad |b|| <= |grad b|`` is bounded
    from the polynomial coefficients.  The vanishing order of each well is
    fitted from ``log(|b| - min)`` against the log distance to the well core
    (the cells that are local minima of ``|b|``).
    """
    b = gauge.b
    x_lo, x_hi, y_lo, y_hi = domain
    xs, ys = np.linspace(x_lo, x_hi, n), np.linspace(y_lo, y_hi, n)
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    B = np.abs(b(X, Y))
    lip = b.lipschitz_bound(domain)
    sampled = float(B.min())
    b0_lower = max(0.0, sampled - lip * 0.5 * math.hypot(dx, dy))

    if epsilon is None:
        epsilon = 1e-2 * max(1.0, float(B.max() - sampled))
    mask = B <= sampled + epsilon
    labels, count = ndimage.label(mask, structure=np.ones((3, 3)))

    absb = lambda x, y: np.abs(b(x, y))  # noqa: E731
    local_min = (B == ndimage.minimum_filter(B, size=3, mode="nearest"))
    wells, flags = [], []
    b0 = sampled
    for lab in range(1, count + 1):
        comp = labels == lab
        vals = np.where(comp, B, np.inf)
        i = np.unravel_index(np.argmin(vals), vals.shape)
        bmin, xm, ym = _refine_minimum(absb, X[i], Y[i], dx, dy, domain)
        b0 = min(b0, bmin)
        core = comp & local_min & (B <= vals[i] + 0.1 * epsilon)
        touches = bool(comp[0, :].any() or comp[-1, :].any() or comp[:, 0].any() or comp[:, -1].any())
        kind = "point" if core.sum() <= 4 else "curve"
        order = _fit_order(B, core, labels, lab, bmin, dx, dy, min(x_hi - x_lo, y_hi - y_lo))
        wells.append(Well(lab, kind, (xm, ym), bmin, int(comp.sum()), touches, order))
        if touches:
            flags.append(f"well {lab} touches the boundary of the domain")
    return FieldAnalysis(b0, b0_lower, epsilon, wells, labels, xs, ys, flags)


def _fit_order(B, core, labels, lab, bmin, dx, dy, width):
    if not core.any():
        return None
    dist = ndimage.distance_transform_edt(~core, sampling=(dx, dy))
    h = max(dx, dy)
    sel = (dist >= 4 * h) & (dist <= 0.25 * width) & (B > bmin)
    # stay in this well's basin: nearest core cell must belong to it
    others = (labels > 0) & (labels != lab)
    if others.any():
        d_other = ndimage.distance_transform_edt(~others, sampling=(dx, dy))
        sel &= dist < d_other
    if sel.sum() < 10:
        return None
    slope, _ = np.polyfit(np.log(dist[sel]), np.log(B[sel] - bmin), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# model operator at a zero of the field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelOperatorSpec:
    """Homogeneous degree-``k`` field ``b0`` and its Landau gauge."""

    k: int
    b0: Poly2D

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.b0.is_zero() or not self.b0.is_homogeneous(self.k):
            raise ValueError(f"model field must be a nonzero homogeneous polynomial of degree {self.k}")

    @property
    def gauge(self) -> GaugeField2D:
        return landau_gauge(self.b0)

    @classmethod
    def at_point(cls, b: Poly2D, x0, y0) -> "ModelOperatorSpec":
        """Leading Taylor part of ``b`` at a zero ``(x0, y0)``."""
        local = b.shifted(x0, y0)
        k = local.order
        if k < 1:
            raise ValueError("the field does not vanish at the given point")
        return cls(k, local.homogeneous_part(k))


@dataclass
class ModelSpectrum:
    values: np.ndarray
    h: float
    boxes: list[float]
    history: list[np.ndarray]
    errors: np.ndarray
    converged: bool

    def box_limit(self) -> np.ndarray:
        """Extrapolate the last two boxes assuming a ``1/R^2`` approach.

        This is the behaviour of a well that is confining in one direction
        only, where the free direction contributes a Dirichlet kinetic term.
        """
        r1, r2 = self.boxes[-2], self.boxes[-1]
        m1, m2 = self.history[-2], self.history[-1]
        return (r2**2 * m2 - r1**2 * m1) / (r2**2 - r1**2)


def model_operator_spectrum(spec: ModelOperatorSpec, m: int = 1, tol: float = 1e-6, h: float = 1.0,
                            R0: float = 2.0, n: int = 79, levels: int = 3, max_doublings: int = 3,
                            strict: bool = True) -> ModelSpectrum:
    """Lowest ``m`` eigenvalues of the model operator with field ``spec.b0`` at parameter ``h``.

    Dirichlet boxes of half-width ``R0 h^{1/(k+2)} 2^j`` are solved with
    Romberg extrapolation until the values agree under doubling within
    ``tol * max(1, mu)`` plus the discretization error.  ``strict`` turns a
    sequence that never settles into :class:`ConfinementError`.
    """
    scale = h ** (1.0 / (spec.k + 2))
    gauge = spec.gauge
    boxes, history, errs = [], [], []
    converged = False
    for j in range(max_doublings + 1):
        R = R0 * scale * 2**j
        best, raw = richardson_lowest(gauge, Lattice2D.square(R, n, h), m, levels=levels)
        boxes.append(R)
        history.append(best)
        errs.append(romberg_error(raw))
        if j:
            change = np.abs(history[-1] - history[-2])
            if np.all(change <= tol * np.maximum(1.0, np.abs(best)) + errs[-1] + errs[-2]):
                converged = True
                break
    if not converged and strict:
        raise ConfinementError(
            f"model operator spectrum did not settle under box doubling; last values {history[-2]} -> {history[-1]}")
    return ModelSpectrum(history[-1], h, boxes, history, errs[-1], converged)


# ---------------------------------------------------------------------------
# small-h sweeps
# ---------------------------------------------------------------------------


@dataclass
class AsymptoticsReport:
    k: int
    h: np.ndarray
    values: np.ndarray  # shape (len(h), m)
    errors: np.ndarray
    ratios: np.ndarray
    grid: list[int]
    limit: np.ndarray | None
    exponent: float
    ratio_range: tuple[float, float]
    upper_window: float  # max (lambda0 - h b0) / h^{4/3}
    lower_window: float  # min (lambda0 - h b0) / h^{5/4}
    settled: bool


def single_well(fa: FieldAnalysis, kind: str) -> Well:
    wells = [w for w in fa.wells if w.kind == kind]
    if len(fa.wells) != 1 or len(wells) != 1:
        raise ValueError(f"expected a single {kind} well, found {[w.kind for w in fa.wells]}")
    if wells[0].touches_boundary:
        raise ValueError("the well touches the boundary of the domain")
    return wells[0]


def asymptotics_check_discrete_well(gauge: GaugeField2D, h_grid, m: int = 1,
                                    domain=(-1.0, 1.0, -1.0, 1.0), scaled_spacing: float = 0.12,
                                    levels: int = 3, n_max: int = 99, k: int | None = None) -> AsymptoticsReport:
    """``lambda_j(H^h) / h^{(2k+2)/(k+2)}`` over ``h_grid`` for a field with one interior point zero.

    The lattice spacing is tied to the well scale ``h^{1/(k+2)}`` (capped by
    ``n_max`` interior points per direction on the coarsest level).  The
    ratios are extrapolated linearly in ``h^{1/(k+2)}``; the exponent is the
    slope of ``log lambda_0`` against ``log h``.
    """
    fa = analyze_field(gauge, domain)
    well = single_well(fa, "point")
    if fa.b0_lower > 0:
        raise ValueError("the field does not vanish in the domain")
    if k is None:
        try:
            k = ModelOperatorSpec.at_point(gauge.b, well.location[0], well.location[1]).k
        except ValueError:
            k = int(round(well.fitted_order))
    h = np.asarray(sorted(h_grid, reverse=True), dtype=float)
    width = min(domain[1] - domain[0], domain[3] - domain[2])
    vals, errs, grid = [], [], []
    for hv in h:
        n = min(n_max, int(math.ceil(width / (scaled_spacing * hv ** (1.0 / (k + 2))))) - 1)
        lat = Lattice2D(domain[0], domain[1], domain[2], domain[3], n, n, hv)
        best, raw = richardson_lowest(gauge, lat, m, levels=levels)
        vals.append(best)
        errs.append(romberg_error(raw))
        grid.append(n)
    vals, errs = np.array(vals), np.array(errs)
    p = (2 * k + 2) / (k + 2)
    ratios = vals / h[:, None] ** p
    s = h ** (1.0 / (k + 2))
    limit = None
    if len(h) >= 3:
        limit = np.array([np.polyfit(s, ratios[:, j], 1)[1] for j in range(m)])
    exponent = float(np.polyfit(np.log(h), np.log(vals[:, 0]), 1)[0])
    shifted = vals[:, 0] - h * fa.b0
    tail = ratios[-3:, 0]
    settled = bool(len(h) >= 3 and (tail.max() - tail.min()) < 0.1 * abs(tail.mean()))
    return AsymptoticsReport(
        k, h, vals, errs, ratios, grid, limit, exponent,
        (float(ratios[:, 0].min()), float(ratios[:, 0].max())),
        float(np.max(shifted / h ** (4 / 3))), float(np.min(shifted / h ** 1.25)), settled,
    )


@dataclass
class NonzeroBottomReport:
    b0: float
    location: tuple[float, float]
    a: float
    target: float
    h: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    coefficients: np.ndarray  # (lambda0 - h b0) / h^2 per h
    fitted: float
    boundary_mass: np.ndarray
    boxes: np.ndarray
    above_bottom: bool


def _boundary_mass(gauge, lat: Lattice2D, rim: float = 0.1) -> float:
    sol = lowest_eigenvalues_2d(assemble2d(gauge, lat), 1, vectors=True)
    v = np.abs(sol.vectors[0].reshape(lat.nx, lat.ny)) ** 2
    v /= v.sum()
    X, Y = lat.mesh()
    cx, cy = 0.5 * (lat.x_lo + lat.x_hi), 0.5 * (lat.y_lo + lat.y_hi)
    hx, hy = 0.5 * (lat.x_hi - lat.x_lo), 0.5 * (lat.y_hi - lat.y_lo)
    near = (np.abs(X - cx) > (1 - rim) * hx) | (np.abs(Y - cy) > (1 - rim) * hy)
    return float(v[near].sum())


def nonzero_bottom_expansion(gauge: GaugeField2D, h_grid, domain=(-1.0, 1.0, -1.0, 1.0),
                             box_factor: float = 7.0, n: int = 60, levels: int = 3,
                             mass_tol: float = 1e-6, max_growth: int = 3) -> NonzeroBottomReport:
    """Second-order coefficient of ``lambda_0(H^h) - h b0`` at a nondegenerate positive minimum.

    Each ``h`` is solved on a Dirichlet square of half-width
    ``box_factor * sqrt(h / b0)`` centred on the minimum; the box grows by
    half when the ground state carries more than ``mass_tol`` of its mass in
    the outer tenth of the box.  The coefficients ``(lambda_0 - h b0)/h^2``
    are fitted as ``c2 + c3 h^{1/2} + c4 h`` and ``c2`` is returned as
    ``fitted``; the expected value is ``a^2/(2 b0)`` with
    ``a = tr sqrt(Hess b / 2)``.
    """
    fa = analyze_field(gauge, domain)
    well = single_well(fa, "point")
    b0, (x0, y0) = well.minimum, well.location
    if fa.b0_lower <= 0:
        raise ValueError("the field vanishes somewhere in the domain; use the discrete-well sweep")
    sign = 1.0 if gauge.b(x0, y0) > 0 else -1.0
    b = gauge.b * sign
    hess = np.array([[b.dx().dx()(x0, y0), b.dx().dy()(x0, y0)],
                     [b.dy().dx()(x0, y0), b.dy().dy()(x0, y0)]], dtype=float)
    ev = np.linalg.eigvalsh(0.5 * hess)
    if ev.min() <= 0:
        raise ValueError("the minimum is degenerate")
    a = float(np.sqrt(ev).sum())
    target = a * a / (2 * b0)

    h = np.asarray(sorted(h_grid, reverse=True), dtype=float)
    vals, errs, masses, boxes = [], [], [], []
    for hv in h:
        half = box_factor * math.sqrt(hv / b0)
        for _ in range(max_growth + 1):
            lat = Lattice2D(x0 - half, x0 + half, y0 - half, y0 + half, n, n, hv)
            mass = _boundary_mass(gauge, lat)
            if mass <= mass_tol:
                break
            half *= 1.5
        else:
            raise ConfinementError(f"ground state still reaches the box edge at h={hv} (mass {mass:.2e})")
        best, raw = richardson_lowest(gauge, lat, 1, levels=levels)
        vals.append(best[0])
        errs.append(romberg_error(raw)[0])
        masses.append(mass)
        boxes.append(half)
    vals = np.array(vals)
    coef = (vals - h * b0) / h**2
    if len(h) >= 3:
        design = np.column_stack([np.ones_like(h), np.sqrt(h), h])
        fitted = float(np.linalg.lstsq(design, coef, rcond=None)[0][0])
    else:
        fitted = float(coef[-1])
    return NonzeroBottomReport(b0, (x0, y0), a, target, h, vals, np.array(errs), coef, fitted,
                               np.array(masses), np.array(boxes), bool(np.all(vals >= h * b0)))
