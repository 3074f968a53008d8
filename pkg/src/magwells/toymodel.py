"""Fibered operator on the cylinder ``R_t x (R/LZ)_x``.

The operator ``-h^2 d_t^2 + (ih d_x + alpha1 + beta1 t^{k+1}/(k+1))^2`` splits,
for constant ``beta1``, into the one-dimensional fibers
``H(a_p) = -h^2 d_t^2 + (beta1 t^{k+1}/(k+1) - a_p)^2`` with
``a_p = 2 pi h p / L - alpha1``.  Every fiber is a rescaled copy of the
unit-coefficient well ``Q(gamma, 1)``, so the whole spectrum is read off one
universal family of 1-D eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import montwell
from .magschrod2d.gauge import ConstantProfile, HypersurfaceGauge
from .magschrod2d.operator import Lattice2D, assemble2d, quasimode_residual, richardson_lowest, romberg_error
from .model1d import Eigensolution, Grid1D, Potential1D, SolverError, assemble, eigenvector, lowest_eigenvalues, solve_pinned

__all__ = [
    "CrossingEvent",
    "FiberBand",
    "GapCertificate",
    "GapReport",
    "SpectrumUnion",
    "SplittingRow",
    "ToyConfig",
    "UniversalBands",
    "certify_gaps",
    "detect_gaps",
    "fiber_quasimode_residuals",
    "fiber_spectrum",
    "find_crossings",
    "fit_separation_constants",
    "ground_level",
    "separated_levels",
    "miniwell_spectrum",
    "spectrum_union",
    "splitting_sweep",
]

BAND_TOL = 1e-8  # accuracy of the universal 1-D eigenvalues


@dataclass(frozen=True)
class ToyConfig:
    k: int
    h: float
    L: float = 2 * math.pi
    alpha1: float = 0.0
    beta1: object = 1.0  # positive number or a periodic profile with .minimum

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.L <= 0 or self.h <= 0:
            raise ValueError("need L > 0 and h > 0")
        if self.beta_min <= 0:
            raise ValueError("beta1 must be positive")

    @property
    def constant_beta(self) -> bool:
        return isinstance(self.beta1, (int, float))

    @property
    def beta_min(self) -> float:
        return float(self.beta1) if self.constant_beta else float(self.beta1.minimum)

    def with_h(self, h: float) -> "ToyConfig":
        return replace(self, h=float(h))

    @property
    def exponent(self) -> float:
        return (2 * self.k + 2) / (self.k + 2)

    @property
    def energy_scale(self) -> float:
        """Factor turning unit-well eigenvalues into fiber eigenvalues."""
        return self.h**self.exponent * self.beta_min ** (2 / (self.k + 2))

    @property
    def alpha_scale(self) -> float:
        return self.beta_min ** (-1 / (self.k + 2)) * self.h ** (-(self.k + 1) / (self.k + 2))

    def a(self, p) -> float:
        return 2 * math.pi * self.h * p / self.L - self.alpha1

    def gamma(self, p) -> float:
        """Unit-well parameter of fiber ``p``."""
        return self.alpha_scale * self.a(p)

    def p_of_gamma(self, g: float) -> float:
        """Real-valued fiber index whose unit-well parameter is ``g``."""
        return (g / self.alpha_scale + self.alpha1) * self.L / (2 * math.pi * self.h)

    @property
    def gamma_step(self) -> float:
        return self.alpha_scale * 2 * math.pi * self.h / self.L


class UniversalBands:
    """Cached ``lambda_j(gamma, 1)`` on pinned discretizations.

    ``gamma`` is bucketed into windows of width 4; one discretization serves
    a whole window so the values vary smoothly with ``gamma`` inside it.
    """

    WINDOW = 4.0

    def __init__(self, k: int):
        self.k = k
        self._cache: dict[tuple[float, int], np.ndarray] = {}
        self.minimum = montwell.minimize(k)

    def discretization(self, gamma: float, m: int):
        lo = self.WINDOW * math.floor(gamma / self.WINDOW)
        return montwell.family_discretization(self.k, lo, lo + self.WINDOW, m=max(2, m), tol=BAND_TOL)

    def values(self, gamma: float, m: int = 1) -> np.ndarray:
        key = (float(gamma), m)
        if key not in self._cache:
            disc = self.discretization(gamma, m)
            self._cache[key] = solve_pinned(Potential1D.montgomery(self.k, gamma), disc, m).values
        return self._cache[key]

    def lambda0(self, gamma: float) -> float:
        return float(self.values(gamma, 1)[0])

    def level_crossing(self, level: float, side: int) -> float:
        """``gamma`` on the given side of the minimum where ``lambda0 = level``."""
        a0 = self.minimum.alpha_min
        if level <= self.minimum.nu_hat:
            return a0
        step = 0.5
        inner, outer = a0, a0 + side * step
        while self.lambda0(outer) < level:
            inner, outer = outer, outer + side * step
            step *= 2
            if abs(outer) > 1e4:
                raise SolverError("level not reached", level=level, side=side)
        lo, hi = sorted((inner, outer))
        return brentq(lambda g: self.lambda0(g) - level, lo, hi, xtol=1e-12)


_BANDS: dict[int, UniversalBands] = {}


def universal_bands(k: int) -> UniversalBands:
    if k not in _BANDS:
        _BANDS[k] = UniversalBands(k)
    return _BANDS[k]


def _require_constant(cfg: ToyConfig):
    if not cfg.constant_beta:
        raise ValueError("fiber decomposition needs a constant beta1; use miniwell_spectrum")


# ---------------------------------------------------------------------------
# fibers and unions
# ---------------------------------------------------------------------------


@dataclass
class FiberBand:
    p: int
    a_p: float
    scaled_alpha: float
    eigenvalues: np.ndarray


def fiber_spectrum(cfg: ToyConfig, p: int, m: int = 1) -> FiberBand:
    """Lowest ``m`` eigenvalues of fiber ``p`` via the unit-well scaling."""
    _require_constant(cfg)
    ub = universal_bands(cfg.k)
    vals = cfg.energy_scale * ub.values(cfg.gamma(p), m)
    return FiberBand(int(p), cfg.a(p), cfg.h ** (-(cfg.k + 1) / (cfg.k + 2)) * cfg.a(p), vals)


@dataclass
class SpectrumUnion:
    h: float
    entries: list[tuple[float, int, int]]  # (value, p, j) sorted by value
    E_max: float
    p_range: tuple[int, int]
    criterion: str
    exclusion: dict
    bands: dict[int, FiberBand] = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries])


def spectrum_union(cfg: ToyConfig, E_max: float, m: int = 2, max_fibers: int = 200_000) -> SpectrumUnion:
    """All eigenvalues of the fibered operator up to ``E_max``.

    Fiber ``p`` is included iff ``gamma_p`` lies in ``[A_lo, A_hi]``, the
    sublevel interval ``{lambda0(gamma, 1) <= E_max / energy_scale}``.
    Outside it ``lambda0`` only grows, and this is checked on the first
    excluded fiber on each side.  Inside, the number of computed levels per
    fiber grows until the top one exceeds ``E_max``.
    """
    _require_constant(cfg)
    if E_max <= 0:
        raise ValueError("E_max must be positive")
    ub = universal_bands(cfg.k)
    Es = E_max / cfg.energy_scale
    if Es < ub.minimum.nu_hat:
        p0 = int(round(cfg.p_of_gamma(ub.minimum.alpha_min)))
        return SpectrumUnion(cfg.h, [], E_max, (p0, p0 - 1), "below the bottom of every fiber",
                             {"scaled_level": Es, "nu_hat": ub.minimum.nu_hat})
    A_lo = ub.level_crossing(Es, -1)
    A_hi = ub.level_crossing(Es, +1)
    p_lo = math.ceil(cfg.p_of_gamma(A_lo) - 1e-12)
    p_hi = math.floor(cfg.p_of_gamma(A_hi) + 1e-12)
    if p_hi - p_lo + 1 > max_fibers:
        raise SolverError("fiber range exceeds the cap", p_range=(p_lo, p_hi), max_fibers=max_fibers)

    entries, bands = [], {}
    for p in range(p_lo, p_hi + 1):
        mp = m
        while True:
            band = fiber_spectrum(cfg, p, mp)
            if band.eigenvalues[-1] > E_max:
                break
            mp *= 2
        bands[p] = band
        entries += [(float(v), p, j) for j, v in enumerate(band.eigenvalues) if v <= E_max]
    edge = {q: float(fiber_spectrum(cfg, q, 1).eigenvalues[0]) for q in (p_lo - 1, p_hi + 1)}
    if min(edge.values()) <= E_max:
        raise SolverError("an excluded fiber reaches below E_max", edge=edge, E_max=E_max)
    entries.sort()
    return SpectrumUnion(
        cfg.h, entries, E_max, (p_lo, p_hi),
        f"gamma_p in [{A_lo:.10g}, {A_hi:.10g}] (sublevel set of lambda0 at {Es:.10g})",
        {"scaled_level": Es, "A_lo": A_lo, "A_hi": A_hi, "first_excluded": edge}, bands)


def ground_level(cfg: ToyConfig) -> tuple[float, int]:
    """``(inf sigma, p)``; the infimum sits on one of the two fibers next to ``alpha_min``."""
    _require_constant(cfg)
    ub = universal_bands(cfg.k)
    ps = cfg.p_of_gamma(ub.minimum.alpha_min)
    cands = range(math.floor(ps) - 1, math.floor(ps) + 3)
    vals = {p: float(fiber_spectrum(cfg, p).eigenvalues[0]) for p in cands}
    p = min(vals, key=lambda q: (vals[q], q))
    return vals[p], p


# ---------------------------------------------------------------------------
# gaps
# ---------------------------------------------------------------------------


@dataclass
class Gap:
    lo: float
    hi: float
    margin: float


@dataclass
class GapReport:
    interval: tuple[float, float]
    gaps: list[Gap]
    unresolved: int
    resolution: float
    spectrum_points: int
    scaled_interval: tuple[float, float] | None = None

    @property
    def count(self) -> int:
        return len(self.gaps)


def detect_gaps(cfg: ToyConfig, interval: tuple[float, float], m: int = 2,
                union: SpectrumUnion | None = None) -> GapReport:
    """Maximal open subintervals of ``interval`` free of spectrum.

    ``margin`` is the largest distance from a point of the gap to the
    spectrum.  Gaps whose margin is below ten times the eigenvalue accuracy
    are counted in ``unresolved`` instead of being reported.
    """
    lo, hi = interval
    resolution = 10 * BAND_TOL * cfg.energy_scale
    scaled = (lo / cfg.energy_scale, hi / cfg.energy_scale)
    if hi <= lo:
        return GapReport((lo, hi), [], 0, resolution, 0, scaled)
    reach = hi + 0.25 * (hi - lo)
    if union is None:
        union = spectrum_union(cfg, reach, m)
    elif union.E_max < hi:
        raise ValueError(f"interval top {hi:g} exceeds the completeness bound {union.E_max:g}")
    vals = np.unique(union.values)
    inside = vals[(vals > lo) & (vals < hi)]
    below = vals[vals <= lo]
    above = vals[vals >= hi]
    s_prev = below[-1] if below.size else -math.inf
    s_last = above[0] if above.size else (math.inf if union.E_max >= reach else hi)
    points = [s_prev, *inside, s_last]
    gaps, unresolved = [], 0
    for a, b in zip(points[:-1], points[1:]):
        g_lo, g_hi = max(a, lo), min(b, hi)
        if g_hi <= g_lo:
            continue
        mid = 0.5 * (a + b)
        x = min(max(mid, g_lo), g_hi)
        margin = min(x - a, b - x)
        if margin < resolution:
            unresolved += 1
        else:
            gaps.append(Gap(float(g_lo), float(g_hi), float(margin)))
    return GapReport((lo, hi), gaps, unresolved, resolution, int(inside.size), scaled)


# ---------------------------------------------------------------------------
# splitting and crossings
# ---------------------------------------------------------------------------


@dataclass
class SplittingRow:
    h: float
    lambda0: float
    lambda1: float
    splitting: float
    scaled_splitting: float  # splitting / h^2
    labels: tuple[tuple[int, int], tuple[int, int]]  # (p, j) of the two levels


def splitting_sweep(cfg: ToyConfig, h_grid) -> list[SplittingRow]:
    """Two lowest levels of the union for each ``h`` (``h_grid`` descending)."""
    _require_constant(cfg)
    h_grid = [float(h) for h in h_grid]
    if any(b >= a for a, b in zip(h_grid, h_grid[1:])):
        raise ValueError("h_grid must be strictly descending")
    rows = []
    for h in h_grid:
        c = cfg.with_h(h)
        _, p0 = ground_level(c)
        cands = sorted([fiber_spectrum(c, q).eigenvalues[0] for q in range(p0 - 1, p0 + 2)]
                       + [fiber_spectrum(c, p0, 2).eigenvalues[1]])
        union = spectrum_union(c, cands[1] * (1 + 1e-9))
        (v0, q0, j0), (v1, q1, j1) = union.entries[:2]
        rows.append(SplittingRow(h, v0, v1, v1 - v0, (v1 - v0) / h**2, ((q0, j0), (q1, j1))))
    return rows


@dataclass
class CrossingEvent:
    p: int
    h_p: float
    bands: tuple[int, int]
    witness: float  # |lambda0(p) - lambda0(p+1)| at h_p
    bracket: tuple[float, float]
    is_ground: bool
    tie: bool = False


def _band_gap(cfg: ToyConfig, p: int, h: float) -> float:
    c = cfg.with_h(h)
    ub = universal_bands(cfg.k)
    return ub.lambda0(c.gamma(p)) - ub.lambda0(c.gamma(p + 1))


def _window_samples(cfg: ToyConfig, p: int, h_bracket, a0: float, width: float = 8.0, n: int = 120):
    """Values of ``h`` where both ``gamma_p`` and ``gamma_{p+1}`` stay within ``width`` of ``a0``."""
    coarse = np.geomspace(h_bracket[0], h_bracket[1], 2000)
    ok = np.array([max(abs(cfg.with_h(h).gamma(q) - a0) for q in (p, p + 1)) <= width for h in coarse])
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        return idx.astype(float)
    lo, hi = coarse[max(idx[0] - 1, 0)], coarse[min(idx[-1] + 1, coarse.size - 1)]
    fine = np.geomspace(lo, hi, n)
    keep = [h for h in fine if max(abs(cfg.with_h(h).gamma(q) - a0) for q in (p, p + 1)) <= width]
    return np.array(keep)


def find_crossings(cfg: ToyConfig, p_range, h_bracket=(1e-6, 1.0), rtol: float = 1e-6,
                   notes: list | None = None) -> list[CrossingEvent]:
    """Values ``h_p`` where the ground bands of fibers ``p`` and ``p+1`` coincide.

    ``lambda0(gamma_p) - lambda0(gamma_{p+1})`` is sampled over the part of
    ``h_bracket`` where both parameters are near ``alpha_min``; each sign
    change is bisected to relative tolerance ``rtol``.  Pairs without a sign
    change are skipped and described in ``notes``.  ``is_ground`` records
    whether the two bands are the lowest of the whole union at ``h_p``.
    """
    _require_constant(cfg)
    notes = notes if notes is not None else []
    ub = universal_bands(cfg.k)
    out = []
    for p in p_range:
        if cfg.alpha1 == 0 and cfg.k % 2 == 0 and p == -p - 1:
            continue
        hs = _window_samples(cfg, p, h_bracket, ub.minimum.alpha_min)
        if hs.size < 2:
            notes.append(f"fibers ({p}, {p + 1}): never near the minimum for h in {h_bracket}")
            continue
        d = np.array([_band_gap(cfg, p, h) for h in hs])
        sign = np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]
        if sign.size == 0:
            notes.append(f"fibers ({p}, {p + 1}): no sign change for h in {h_bracket}")
            continue
        for i in sign:
            lo, hi = hs[i], hs[i + 1]
            dlo = d[i]
            while (hi - lo) > rtol * hi:
                mid = 0.5 * (lo + hi)
                dm = _band_gap(cfg, p, mid)
                if np.sign(dm) == np.sign(dlo):
                    lo, dlo = mid, dm
                else:
                    hi = mid
            hp = 0.5 * (lo + hi)
            c = cfg.with_h(hp)
            pair = [ub.lambda0(c.gamma(q)) for q in (p, p + 1)]
            others = [ub.lambda0(c.gamma(q)) for q in (p - 1, p + 2)]
            level = max(pair)
            ground = min(others) > level
            tie = abs(min(others) - level) <= 10 * BAND_TOL
            out.append(CrossingEvent(p, hp, (p, p + 1), c.energy_scale * abs(pair[0] - pair[1]),
                                     (lo, hi), bool(ground), bool(tie)))
    return out


# ---------------------------------------------------------------------------
# gap certificates
# ---------------------------------------------------------------------------


@dataclass
class GapCertificate:
    hypotheses: dict[str, bool]
    details: dict
    passed: bool
    conclusion: str


def certify_gaps(mu_list, residual_list, interval, c: float, M: float, h: float,
                 eps: float | None = None) -> GapCertificate:
    """Check the separation and quasimode hypotheses of the gap criterion.

    For ``mu_0 < ... < mu_N`` in ``I = interval``: consecutive gaps and the
    distances of ``mu_0`` and ``mu_N`` to the ends of ``I`` must exceed
    ``c h^M``, and each residual must be at most ``eps h^M``
    (``eps`` defaults to ``0.1 c``).  When everything holds the spectrum has
    at least ``N`` gaps in ``I`` for all small ``h``.
    """
    mu = np.asarray(mu_list, dtype=float)
    res = np.asarray(residual_list, dtype=float)
    if mu.size == 0:
        raise ValueError("empty mu list")
    if mu.shape != res.shape:
        raise ValueError("one residual per mu is required")
    if np.any(np.diff(mu) <= 0):
        raise ValueError("mu list must be strictly increasing")
    if c <= 0 or M < 1:
        raise ValueError("need c > 0 and M >= 1")
    eps = 0.1 * c if eps is None else eps
    a, b = interval
    sep = c * h**M
    diffs = np.diff(mu)
    hyp = {
        "separation": bool(np.all(diffs > sep)),
        "lower_end": bool(mu[0] - a > sep),
        "upper_end": bool(b - mu[-1] > sep),
        "residuals": bool(np.all(res <= eps * h**M)),
    }
    details = {
        "threshold": sep,
        "min_separation": float(diffs.min()) if diffs.size else None,
        "lower_distance": float(mu[0] - a),
        "upper_distance": float(b - mu[-1]),
        "residual_bound": eps * h**M,
        "max_residual": float(res.max()),
        "N": int(mu.size - 1),
    }
    ok = all(hyp.values())
    n = mu.size - 1
    if ok:
        conclusion = f"{n} gaps in [{a:.6g}, {b:.6g}], certified modulo the approximate-eigenvalue gap criterion"
    else:
        failed = ", ".join(k for k, v in hyp.items() if not v)
        conclusion = f"not certified: {failed}"
    return GapCertificate(hyp, details, ok, conclusion)


def separated_levels(values, min_gap: float) -> np.ndarray:
    """Greedy ascending subset whose consecutive differences exceed ``min_gap``."""
    out = []
    for v in np.sort(np.asarray(values, dtype=float)):
        if not out or v - out[-1] > min_gap:
            out.append(v)
    return np.array(out)


def _ground_bands_in(cfg: ToyConfig, interval) -> dict[int, float]:
    union = spectrum_union(cfg, interval[1], m=1)
    return {p: v for v, p, j in union.entries if j == 0 and interval[0] < v < interval[1]}


def fit_separation_constants(cfg: ToyConfig, scaled_window, h_list, keep: float = 0.25) -> dict:
    """Fit ``(c, M)`` from the separations of the ground-band levels.

    At each ``h`` the fiber ground levels in ``[a, b] h^{(2k+2)/(k+2)}`` are
    thinned so neighbours differ by more than ``keep`` times the natural
    spacing ``h^{(2k+3)/(k+2)}``; the smallest separation (including the
    distances to the window ends) gives ``s(h)``.  ``M`` is the least-squares
    log-log slope of ``s`` (at least 1) and ``c h^M = s / 2`` at the smallest ``h``.
    """
    k = cfg.k
    h_list = sorted((float(h) for h in h_list), reverse=True)
    if len(h_list) < 2:
        raise ValueError("need at least two values of h")
    s = []
    for h in h_list:
        c = cfg.with_h(h)
        I = (scaled_window[0] * c.energy_scale, scaled_window[1] * c.energy_scale)
        mu = separated_levels(list(_ground_bands_in(c, I).values()), keep * h ** ((2 * k + 3) / (k + 2)))
        if mu.size == 0:
            raise ValueError(f"no ground-band level inside the window at h={h}")
        seps = np.concatenate([np.diff(mu), [mu[0] - I[0], I[1] - mu[-1]]])
        s.append(float(seps.min()))
    M = max(float(np.polyfit(np.log(h_list), np.log(s), 1)[0]), 1.0)
    c0 = 0.5 * s[-1] / h_list[-1] ** M
    return {"c": c0, "M": M, "separations": s, "h": h_list}


# ---------------------------------------------------------------------------
# quasimodes and the two-dimensional operator
# ---------------------------------------------------------------------------


def toy_lattice(cfg: ToyConfig, nx: int, ny: int, T_scaled: float = 8.0) -> Lattice2D:
    """Periodic-in-``x`` lattice on ``[-L/2, L/2) x [-T, T]`` with ``T`` on the well scale."""
    T = T_scaled * (cfg.h / cfg.beta_min) ** (1 / (cfg.k + 2))
    return Lattice2D(-cfg.L / 2, cfg.L / 2, -T, T, nx, ny, cfg.h, "periodic_x_dirichlet_y")


def toy_gauge(cfg: ToyConfig) -> HypersurfaceGauge:
    profile = ConstantProfile(float(cfg.beta1)) if cfg.constant_beta else cfg.beta1
    return HypersurfaceGauge(cfg.k, cfg.alpha1, profile)


def fiber_quasimode(cfg: ToyConfig, p: int, lattice: Lattice2D) -> np.ndarray:
    """Fiber ground state on the lattice's ``t`` grid times the Fourier mode ``p``."""
    grid = Grid1D(lattice.y_lo, lattice.y_hi, lattice.ny)
    pot = Potential1D.shifted_power(cfg.k, cfg.a(p), float(cfg.beta1), cfg.h)
    op = assemble(pot, grid)
    lam = lowest_eigenvalues(op, 1).values[0]
    u = eigenvector(op, lam)
    mode = np.exp(2j * math.pi * p * lattice.xs / cfg.L)
    return np.outer(mode, u).ravel()


def fiber_quasimode_residuals(cfg: ToyConfig, ps, nx: int = 1024, ny: int = 801,
                              T_scaled: float = 8.0) -> np.ndarray:
    """``|H v_p - mu_p v_p| / |v_p|`` on the 2-D lattice, ``mu_p`` the fiber ground value."""
    _require_constant(cfg)
    lat = toy_lattice(cfg, nx, ny, T_scaled)
    op = assemble2d(toy_gauge(cfg), lat)
    out = []
    for p in ps:
        mu = fiber_spectrum(cfg, p).eigenvalues[0]
        out.append(quasimode_residual(op, fiber_quasimode(cfg, p, lat), mu))
    return np.array(out)


def miniwell_spectrum(cfg: ToyConfig, m: int = 2, nx: int = 96, ny: int = 63,
                      T_scaled: float = 8.0, levels: int = 2) -> Eigensolution:
    """Lowest ``m`` eigenvalues of the two-dimensional operator, for any ``beta1`` profile.

    Solved on a periodic-``x`` lattice with Romberg extrapolation over
    ``levels`` nested lattices; ``meta["error"]`` is the extrapolation error
    estimate.
    """
    lat = toy_lattice(cfg, nx, ny, T_scaled)
    best, raw = richardson_lowest(toy_gauge(cfg), lat, m, levels=levels)
    return Eigensolution(best, np.zeros(m), meta={"raw": raw, "error": romberg_error(raw), "lattice": lat})
