"""One-dimensional Dirichlet eigensolver for ``-d^2/dt^2 + V(t)``.

The main path discretizes on a uniform grid with the 3-point Laplacian and
locates eigenvalues by Sturm-sequence bisection on the resulting symmetric
tridiagonal matrix; two nested grids are combined by Richardson
extrapolation.  An independent Numerov shooting solver is provided as an
oracle for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "ConfinementError",
    "Discretization",
    "Eigensolution",
    "Grid1D",
    "Potential1D",
    "SolverError",
    "TridiagonalOperator",
    "assemble",
    "eigenvector",
    "lowest_eigenvalues",
    "oracle_numerov",
    "sign_changes",
    "solve_adaptive",
    "solve_pinned",
    "sturm_count",
]


class SolverError(RuntimeError):
    """Raised when an iterative solve stops without meeting its target.

    ``state`` carries whatever the solver knew when it gave up (bracket,
    residual, iteration count) so callers can report it.
    """

    def __init__(self, message: str, **state):
        super().__init__(message)
        self.state = state


class ConfinementError(ValueError):
    """The potential does not confine within the allowed truncation."""


# ---------------------------------------------------------------------------
# Potentials and grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Potential1D:
    """A confining potential ``V(t)``.

    Use the constructors :meth:`montgomery`, :meth:`shifted_power`,
    :meth:`harmonic` and :meth:`tabulated` rather than the raw initializer.
    """

    kind: str
    params: tuple = ()

    @classmethod
    def montgomery(cls, k: int, alpha: float, beta: float = 1.0) -> "Potential1D":
        """``V(t) = (beta t^{k+1}/(k+1) - alpha)^2``."""
        if int(k) != k or k < 1:
            raise ValueError(f"k must be a positive integer, got {k!r}")
        if beta == 0:
            raise ValueError("beta must be nonzero")
        return cls("montgomery", (int(k), float(alpha), float(beta)))

    @classmethod
    def shifted_power(cls, k: int, a: float, beta1: float = 1.0, h: float = 1.0) -> "Potential1D":
        """Fiber well ``V(t) = ((a - beta1 t^{k+1}/(k+1)) / h)^2``.

        ``h^2`` times the resulting operator is the semiclassical fiber
        operator ``-h^2 d^2/dt^2 + (a - beta1 t^{k+1}/(k+1))^2``.
        """
        if int(k) != k or k < 1:
            raise ValueError(f"k must be a positive integer, got {k!r}")
        if h <= 0 or beta1 == 0:
            raise ValueError("need h > 0 and beta1 != 0")
        return cls("shifted_power", (int(k), float(a), float(beta1), float(h)))

    @classmethod
    def harmonic(cls) -> "Potential1D":
        return cls("harmonic", ())

    @classmethod
    def tabulated(cls, t, values) -> "Potential1D":
        t = np.asarray(t, dtype=float)
        values = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != values.shape or np.any(np.diff(t) <= 0):
            raise ValueError("tabulated potential needs increasing 1-D abscissae matching values")
        return cls("tabulated", (tuple(t), tuple(values)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "montgomery":
            k, alpha, beta = self.params
            return (beta * t ** (k + 1) / (k + 1) - alpha) ** 2
        if self.kind == "shifted_power":
            k, a, beta1, h = self.params
            return ((a - beta1 * t ** (k + 1) / (k + 1)) / h) ** 2
        if self.kind == "harmonic":
            return t * t
        if self.kind == "tabulated":
            tt, vv = self.params
            # outside the table the potential is treated as a hard wall
            return np.interp(t, tt, vv, left=np.inf, right=np.inf)
        raise ValueError(f"unknown potential kind {self.kind!r}")

    def confinement_radius(self, level: float, t_max: float = 1e3) -> float:
        """Smallest tested ``T`` with ``V >= level`` on ``|t|`` in ``[T, 2T]``."""
        T = 0.5
        while T <= t_max:
            probe = np.concatenate([np.linspace(T, 2 * T, 64), -np.linspace(T, 2 * T, 64)])
            if np.all(self(probe) >= level):
                return T
            T *= 1.2
        raise ConfinementError(f"{self.kind} potential does not reach {level:g} within |t| <= {t_max:g}")


@dataclass(frozen=True)
class Grid1D:
    """``n`` interior points of ``[t_min, t_max]``; Dirichlet endpoints excluded."""

    t_min: float
    t_max: float
    n: int

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise ValueError("need t_min < t_max")
        if self.n < 3:
            raise ValueError("need at least 3 interior points")

    @property
    def spacing(self) -> float:
        return (self.t_max - self.t_min) / (self.n + 1)

    @property
    def points(self) -> np.ndarray:
        return self.t_min + self.spacing * np.arange(1, self.n + 1)

    @classmethod
    def symmetric(cls, T: float, n: int) -> "Grid1D":
        return cls(-float(T), float(T), int(n))

    def refined(self) -> "Grid1D":
        """Nested grid with half the spacing."""
        return Grid1D(self.t_min, self.t_max, 2 * self.n + 1)


@dataclass(frozen=True)
class TridiagonalOperator:
    """Real symmetric tridiagonal matrix with constant off-diagonal."""

    diag: np.ndarray
    off: float
    grid: Grid1D

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out

    def gershgorin(self) -> tuple[float, float]:
        r = 2.0 * abs(self.off)
        return float(self.diag.min() - r), float(self.diag.max() + r)

    def dense(self) -> np.ndarray:
        return (np.diag(self.diag) + np.diag(np.full(self.n - 1, self.off), 1)
                + np.diag(np.full(self.n - 1, self.off), -1))


@dataclass
class Eigensolution:
    values: np.ndarray
    bisection_width: np.ndarray
    residuals: np.ndarray | None = None
    vectors: np.ndarray | None = None
    grid: Grid1D | None = None
    clusters: list[tuple[int, ...]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Discretization:
    """A pinned truncation ``[-T, T]`` and coarse interior count ``n``.

    Solves on a pinned discretization use the Richardson pair ``(n, 2n+1)``
    and are smooth functions of the potential's parameters, which is what
    finite-difference checks and root finders need.
    """

    T: float
    n: int

    @property
    def grid(self) -> Grid1D:
        return Grid1D.symmetric(self.T, self.n)


def assemble(potential: Callable, grid: Grid1D) -> TridiagonalOperator:
    dt = grid.spacing
    v = np.asarray(potential(grid.points), dtype=float)
    if not np.all(np.isfinite(v)):
        bad = grid.points[~np.isfinite(v)][0]
        raise ValueError(f"potential is not finite on the grid (first at t={bad:g})")
    return TridiagonalOperator(2.0 / dt**2 + v, -1.0 / dt**2, grid)


# ---------------------------------------------------------------------------
# Sturm bisection
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _sturm_count(d, e2, x, pivmin):
    count = 0
    q = d[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0:
        count += 1
    for i in range(1, d.size):
        q = d[i] - x - e2 / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0:
            count += 1
    return count


@numba.njit(cache=True)
def _bisect(d, e2, j, lo, hi, tol, pivmin, maxit):
    # invariant: count(lo) <= j < count(hi)
    it = 0
    while hi - lo > tol and it < maxit:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _sturm_count(d, e2, mid, pivmin) > j:
            hi = mid
        else:
            lo = mid
        it += 1
    return lo, hi, it


def _pivmin(op: TridiagonalOperator) -> float:
    return np.finfo(float).tiny * max(1.0, op.off**2) / np.finfo(float).eps


def sturm_count(op: TridiagonalOperator, threshold: float) -> int:
    """Number of eigenvalues of ``op`` strictly below ``threshold``."""
    return int(_sturm_count(op.diag, op.off**2, float(threshold), _pivmin(op)))


def lowest_eigenvalues(op: TridiagonalOperator, m: int, tol: float = 1e-12,
                       maxit: int = 400) -> Eigensolution:
    """The ``m`` smallest eigenvalues by Sturm count bisection.

    Each value is the midpoint of a bracket ``[lo, hi]`` with
    ``hi - lo <= tol`` (or at floating-point resolution), and every bracket
    satisfies ``count(lo) <= j < count(hi)``.
    """
    if m < 1 or m >= op.n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={op.n}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo0, hi0 = op.gershgorin()
    e2, pm = op.off**2, _pivmin(op)
    values = np.empty(m)
    widths = np.empty(m)
    lo_prev = lo0
    for j in range(m):
        lo, hi, it = _bisect(op.diag, e2, j, lo_prev, hi0, tol, pm, maxit)
        if hi - lo > tol and it >= maxit:
            raise SolverError(f"bisection for eigenvalue {j} hit the iteration cap",
                              index=j, bracket=(lo, hi), iterations=it)
        values[j] = 0.5 * (lo + hi)
        widths[j] = hi - lo
        lo_prev = lo
    return Eigensolution(values, widths, grid=op.grid, clusters=_clusters(values, tol),
                         meta={"n": op.n})


def _clusters(values, tol):
    out, cur = [], [0]
    for j in range(1, len(values)):
        if values[j] - values[j - 1] < tol:
            cur.append(j)
        else:
            if len(cur) > 1:
                out.append(tuple(cur))
            cur = [j]
    if len(cur) > 1:
        out.append(tuple(cur))
    return out


# ---------------------------------------------------------------------------
# Eigenvectors
# ---------------------------------------------------------------------------


def sign_changes(v: np.ndarray, floor: float = 1e-12) -> int:
    """Sign changes of ``v`` ignoring entries below ``floor * max|v|``."""
    v = np.asarray(v)
    s = np.sign(v[np.abs(v) > floor * np.abs(v).max()])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def eigenvector(op: TridiagonalOperator, lam: float, tol: float = 1e-10,
                iterations: int = 3) -> np.ndarray:
    """Inverse iteration at shift ``lam``.

    Returns the eigenvector normalized in the discrete L^2 sense
    (``sum(dt * u^2) == 1``) with positive sum.  Raises :class:`SolverError`
    if the residual ``|Hu - lam u| / |u|`` exceeds ``10 * tol``, where the
    target is floored at the rounding level ``100 eps |H|``.
    """
    n = op.n
    ab = np.empty((3, n))
    ab[0, :] = op.off
    ab[2, :] = op.off
    shift = lam
    v = np.ones(n) / math.sqrt(n)
    for _ in range(iterations):
        ab[1, :] = op.diag - shift
        try:
            w = solve_banded((1, 1), ab, v, check_finite=False)
        except np.linalg.LinAlgError:
            shift = lam + 1e-13 * max(1.0, abs(lam))
            ab[1, :] = op.diag - shift
            w = solve_banded((1, 1), ab, v, check_finite=False)
        v = w / np.linalg.norm(w)
    if v.sum() < 0:
        v = -v
    res = np.linalg.norm(op.matvec(v) - lam * v)
    floor = 100 * np.finfo(float).eps * max(abs(x) for x in op.gershgorin())
    if res > max(10 * tol, floor):
        raise SolverError("inverse iteration residual above target", residual=res, shift=lam)
    return v / math.sqrt(op.grid.spacing)


# ---------------------------------------------------------------------------
# Richardson-extrapolated solves
# ---------------------------------------------------------------------------


def _richardson(coarse, fine):
    return (4.0 * fine - coarse) / 3.0


def solve_pinned(potential: Callable, disc: Discretization, m: int = 1, vectors: bool = False,
                 tol: float = 1e-12) -> Eigensolution:
    """Richardson-extrapolated eigenvalues on a fixed discretization.

    Vectors, residuals and bisection widths refer to the fine grid of the
    pair (the extrapolated values have no grid function).
    """
    g0 = disc.grid
    g1 = g0.refined()
    op0, op1 = assemble(potential, g0), assemble(potential, g1)
    s0 = lowest_eigenvalues(op0, m, tol)
    s1 = lowest_eigenvalues(op1, m, tol)
    values = _richardson(s0.values, s1.values)
    sol = Eigensolution(values, np.maximum(s0.bisection_width, s1.bisection_width), grid=g1,
                        clusters=_clusters(values, max(tol, 1e-12)),
                        meta={"T": disc.T, "n": disc.n, "n_fine": g1.n, "discrete": s1.values,
                              "discrete_coarse": s0.values})
    if vectors:
        vecs = np.array([eigenvector(op1, lam, tol=max(tol, 1e-9)) for lam in s1.values])
        dt = g1.spacing
        res = np.array([np.linalg.norm(op1.matvec(u) - lam * u) / np.linalg.norm(u)
                        for u, lam in zip(vecs, s1.values)])
        sol.vectors, sol.residuals = vecs, res
        sol.meta["operator"] = op1
        assert np.allclose(dt * (vecs**2).sum(axis=1), 1.0, atol=1e-10)
    return sol


def solve_adaptive(potential: Callable, m: int = 1, tol: float = 1e-6, margin: float = 4.0,
                   T_max: float = 200.0, n_max: int = 400_000, vectors: bool = False) -> Eigensolution:
    """Lowest ``m`` eigenvalues with automatic truncation and grid selection.

    ``T`` is picked so that ``V(+-T) >= margin * lambda_{m-1}``, then doubled
    until the extrapolated eigenvalues move by less than ``tol/2``; the
    spacing is halved until successive Richardson values agree to
    ``tol/2``.  The final discretization is returned in
    ``meta["discretization"]``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    # target level: iterate coarse solves until the well is wide enough
    level = max(1.0, 4.0 * m)
    for _ in range(30):
        T = potential.confinement_radius(level, t_max=T_max)
        op = assemble(potential, Grid1D.symmetric(T, max(200, 20 * m)))
        lam_top = lowest_eigenvalues(op, m, 1e-8).values[-1]
        if margin * lam_top <= level:
            break
        level = 1.5 * margin * lam_top
    else:
        raise ConfinementError("could not settle the truncation level")
    if T > T_max:
        raise ConfinementError(f"required truncation T={T:g} exceeds T_max={T_max:g}")

    dt0 = min(T / 100.0, 0.25 / math.sqrt(abs(lam_top) + 1.0))
    n0 = max(3 * m + 10, int(math.ceil(2 * T / dt0)) - 1)

    def pinned(T_, n_):
        return solve_pinned(potential, Discretization(T_, n_), m).values

    vals = pinned(T, n0)
    doublings = 0
    while True:
        T2 = 2 * T
        if T2 > T_max:
            raise ConfinementError(f"truncation did not settle before T_max={T_max:g}")
        n2 = 2 * n0 + 1
        vals2 = pinned(T2, n2)
        doublings += 1
        if np.max(np.abs(vals2 - vals)) < tol / 2:
            break
        T, n0, vals = T2, n2, vals2

    n = n0
    levels = 1
    while True:
        n_next = 2 * n + 1
        if 2 * n_next + 1 > n_max:
            raise SolverError("grid refinement exceeded n_max", n=n, values=vals, n_max=n_max)
        vals_next = pinned(T, n_next)
        levels += 1
        change = np.max(np.abs(vals_next - vals))
        n, vals = n_next, vals_next
        if change < tol / 2:
            break
    sol = solve_pinned(potential, Discretization(T, n), m, vectors=vectors)
    sol.meta.update(discretization=Discretization(T, n), levels=levels, doublings=doublings,
                    last_change=float(change), tol=tol)
    return sol


# ---------------------------------------------------------------------------
# Numerov shooting oracle
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _numerov_nodes(V, E, dt):
    # integrates from the left Dirichlet wall; counts sign changes over the
    # interior and the right wall value
    n = V.size
    c = dt * dt / 12.0
    u_prev = 0.0
    u = 1e-30
    f_prev = V[0] - E
    f = V[1] - E
    nodes = 0
    for i in range(1, n - 1):
        f_next = V[i + 1] - E
        u_next = ((2.0 + 10.0 * c * f) * u - (1.0 - c * f_prev) * u_prev) / (1.0 - c * f_next)
        if (u_next < 0.0 and u > 0.0) or (u_next > 0.0 and u < 0.0):
            nodes += 1
        elif u_next == 0.0 and i + 1 < n - 1:
            u_next = -1e-300 if u > 0 else 1e-300
            nodes += 1
        u_prev, u = u, u_next
        f_prev, f = f, f_next
        a = abs(u)
        if a > 1e200:
            u_prev /= a
            u /= a
    return nodes


def oracle_numerov(potential: Callable, m: int, T: float, n: int = 20_000,
                   tol: float = 1e-13) -> np.ndarray:
    """Lowest ``m`` Dirichlet eigenvalues on ``[-T, T]`` by Numerov shooting.

    ``n`` is the number of integration steps.  Bisection uses the node count
    of the shot solution (the number of eigenvalues below ``E``).
    """
    t = np.linspace(-T, T, n + 1)
    V = np.asarray(potential(t), dtype=float)
    dt = t[1] - t[0]
    lo_all = float(V.min())
    out = np.empty(m)
    for j in range(m):
        lo = lo_all if j == 0 else out[j - 1]
        hi = max(lo_all, 1.0) + 1.0
        grow = 0
        while _numerov_nodes(V, hi, dt) <= j:
            hi = lo_all + 2.0 * (hi - lo_all)
            grow += 1
            if grow > 200:
                raise SolverError("node-count bracketing failed", index=j, upper=hi)
        while hi - lo > tol * max(1.0, abs(hi)):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _numerov_nodes(V, mid, dt) > j:
                hi = mid
            else:
                lo = mid
        out[j] = 0.5 * (lo + hi)
    return out
