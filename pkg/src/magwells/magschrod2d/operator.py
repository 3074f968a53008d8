"""Link-phase discretization of ``H^h = (ih d + A)^* (ih d + A)`` on a flat rectangle."""

from __future__ import annotations

import math

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from ..model1d import Eigensolution, SolverError

__all__ = [
    "DiscreteMagneticOperator",
    "Lattice2D",
    "assemble2d",
    "dense_eigenvalues",
    "lowest_eigenvalues_2d",
    "quasimode_residual",
    "richardson_lowest",
    "romberg_error",
]

BOUNDARIES = ("dirichlet", "periodic_x_dirichlet_y")


@dataclass(frozen=True)
class Lattice2D:
    """Grid on ``[x_lo, x_hi] x [y_lo, y_hi]``.

    Dirichlet directions carry ``n`` interior points (walls excluded); a
    periodic ``x`` direction carries ``nx`` points ``x_lo + i L/nx``.
    """

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    nx: int
    ny: int
    h: float
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError("empty rectangle")
        if self.nx < 3 or self.ny < 3:
            raise ValueError("need at least 3 points per direction")
        if self.h <= 0:
            raise ValueError("h must be positive")

    @classmethod
    def square(cls, half: float, n: int, h: float, center=(0.0, 0.0)) -> "Lattice2D":
        cx, cy = center
        return cls(cx - half, cx + half, cy - half, cy + half, n, n, h)

    @property
    def periodic_x(self) -> bool:
        return self.boundary == "periodic_x_dirichlet_y"

    @property
    def dx(self) -> float:
        span = self.x_hi - self.x_lo
        return span / self.nx if self.periodic_x else span / (self.nx + 1)

    @property
    def dy(self) -> float:
        return (self.y_hi - self.y_lo) / (self.ny + 1)

    @property
    def xs(self) -> np.ndarray:
        if self.periodic_x:
            return self.x_lo + self.dx * np.arange(self.nx)
        return self.x_lo + self.dx * np.arange(1, self.nx + 1)

    @property
    def ys(self) -> np.ndarray:
        return self.y_lo + self.dy * np.arange(1, self.ny + 1)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def mesh(self):
        """``(X, Y)`` arrays of shape ``(nx, ny)``; flat index is ``ix * ny + iy``."""
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def refined(self) -> "Lattice2D":
        """Nested lattice with half the spacing in both directions."""
        nx = 2 * self.nx if self.periodic_x else 2 * self.nx + 1
        return Lattice2D(self.x_lo, self.x_hi, self.y_lo, self.y_hi, nx, 2 * self.ny + 1, self.h, self.boundary)

    def with_h(self, h: float) -> "Lattice2D":
        return Lattice2D(self.x_lo, self.x_hi, self.y_lo, self.y_hi, self.nx, self.ny, h, self.boundary)


@dataclass
class DiscreteMagneticOperator:
    matrix: sp.csr_matrix
    lattice: Lattice2D
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def norm_estimate(self) -> float:
        """Gershgorin bound on the spectral norm."""
        return float(abs(self.matrix).sum(axis=1).max())

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0


def assemble2d(gauge, lattice: Lattice2D) -> DiscreteMagneticOperator:
    """Hermitian link-phase operator approximating ``(ih d + A)^2``.

    Each lattice link ``a -> b`` carries ``exp(-(i/h) int_a^b A)`` with the
    line integral taken exactly, so replacing ``A`` by ``A + d chi``
    conjugates the matrix by ``diag(exp(i chi/h))``.
    """
    lat = lattice
    if lat.periodic_x:
        if not gauge.is_x_periodic(lat.x_hi - lat.x_lo):
            raise ValueError("gauge is not periodic in x with period x_hi - x_lo; cannot close the seam")
    h, hx, hy = lat.h, lat.dx, lat.dy
    nx, ny = lat.nx, lat.ny
    X, Y = lat.mesh()
    idx = np.arange(lat.size).reshape(nx, ny)
    cx, cy = h * h / hx**2, h * h / hy**2

    rows, cols, vals = [], [], []

    # x-links (ix, iy) -> (ix+1, iy)
    if lat.periodic_x:
        src = idx
        dst = np.roll(idx, -1, axis=0)
        x0 = X
        x1 = X + hx
    else:
        src, dst = idx[:-1, :], idx[1:, :]
        x0, x1 = X[:-1, :], X[1:, :]
    phase = np.exp(-1j / h * gauge.edge_x(x0, x1, Y[: src.shape[0], :]))
    rows += [src.ravel(), dst.ravel()]
    cols += [dst.ravel(), src.ravel()]
    vals += [(-cx * phase).ravel(), (-cx * np.conj(phase)).ravel()]

    # y-links (ix, iy) -> (ix, iy+1)
    src, dst = idx[:, :-1], idx[:, 1:]
    phase = np.exp(-1j / h * gauge.edge_y(X[:, :-1], Y[:, :-1], Y[:, 1:]))
    rows += [src.ravel(), dst.ravel()]
    cols += [dst.ravel(), src.ravel()]
    vals += [(-cy * phase).ravel(), (-cy * np.conj(phase)).ravel()]

    diag = np.full(lat.size, 2 * cx + 2 * cy, dtype=complex)
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag)
    H = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(lat.size, lat.size))
    H.sum_duplicates()
    return DiscreteMagneticOperator(H, lat, {"gauge": gauge})


def dense_eigenvalues(op: DiscreteMagneticOperator, m: int | None = None) -> np.ndarray:
    w = np.linalg.eigvalsh(op.matrix.toarray())
    return w if m is None else w[:m]


def lowest_eigenvalues_2d(op: DiscreteMagneticOperator, m: int = 1, tol: float = 1e-10,
                          vectors: bool = False, shift: float | None = None,
                          maxiter: int = 5000, ncv: int | None = None) -> Eigensolution:
    """Lowest ``m`` eigenpairs by shift-invert Lanczos (ARPACK).

    The shift sits below the spectrum (the operator is nonnegative), so the
    eigenvalues nearest the shift are the lowest ones and clusters are
    resolved together.  A pair is accepted when
    ``|Hv - lam v| <= tol * |H|``; otherwise :class:`SolverError` carries the
    best residuals.  Values closer than ``sqrt(tol) * |H|`` are grouped in
    ``clusters``.
    """
    n = op.dimension
    if m >= n - 1:
        raise ValueError("m must be much smaller than the dimension")
    H = op.matrix
    norm = op.norm_estimate()
    sigma = -1e-3 * norm / max(n, 1) if shift is None else shift
    k = min(n - 2, m + 4)  # a few guard vectors keep the wanted cluster intact
    try:
        ncv = ncv or min(n - 1, max(2 * k + 1, 20))
        w, V = eigsh(H, k=k, sigma=sigma, which="LM", tol=tol * 1e-2, maxiter=maxiter, ncv=ncv)
    except Exception as exc:  # ARPACK no-convergence
        raise SolverError(f"Krylov iteration did not converge: {exc}") from exc
    order = np.argsort(w)[:m]
    w, V = w[order].real, V[:, order]
    res = np.linalg.norm(H @ V - V * w, axis=0) / np.linalg.norm(V, axis=0)
    if np.any(res > tol * norm):
        raise SolverError("Krylov residuals above target", residuals=res, target=tol * norm)
    gaps = np.diff(w) <= math.sqrt(tol) * norm
    clusters, run = [], [0]
    for i, close in enumerate(gaps, start=1):
        if close:
            run.append(i)
        else:
            if len(run) > 1:
                clusters.append(tuple(run))
            run = [i]
    if len(run) > 1:
        clusters.append(tuple(run))
    sol = Eigensolution(w, np.zeros(m), residuals=res, clusters=clusters,
                        meta={"norm": norm, "shift": sigma, "n": n})
    if vectors:
        sol.vectors = V.T
    return sol


def richardson_lowest(gauge, lattice: Lattice2D, m: int = 1, tol: float = 1e-10,
                      levels: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Romberg extrapolation of the lowest ``m`` eigenvalues over nested lattices.

    ``levels`` lattices are solved, each halving the spacing of the previous
    one, and the even powers of the spacing are eliminated one at a time.
    Returns ``(best, raw)`` where ``raw[j]`` holds the values on lattice ``j``;
    :func:`romberg_error` turns ``raw`` into an error estimate.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    raw = []
    lat = lattice
    for _ in range(levels):
        raw.append(lowest_eigenvalues_2d(assemble2d(gauge, lat), m, tol).values)
        lat = lat.refined()
    table = [list(raw)]
    for j in range(1, levels):
        prev = table[-1]
        f = 4.0**j
        table.append([(f * prev[i + 1] - prev[i]) / (f - 1) for i in range(len(prev) - 1)])
    best = table[-1][0]
    return best, np.array(raw)


def romberg_error(raw: np.ndarray) -> np.ndarray:
    """Difference between the two highest-order extrapolants available from ``raw``."""
    levels = len(raw)
    if levels < 2:
        return np.full(raw.shape[1:], np.inf)
    table = [list(raw)]
    for j in range(1, levels):
        prev = table[-1]
        f = 4.0**j
        table.append([(f * prev[i + 1] - prev[i]) / (f - 1) for i in range(len(prev) - 1)])
    return np.abs(table[-1][0] - table[-2][-1])


def quasimode_residual(op: DiscreteMagneticOperator, vector, mu: float) -> float:
    """``|H v - mu v| / |v|``."""
    v = np.asarray(vector).ravel()
    nv = np.linalg.norm(v)
    if v.size != op.dimension:
        raise ValueError("vector does not live on the operator's lattice")
    if nv == 0:
        raise ValueError("zero vector is not a quasimode")
    return float(np.linalg.norm(op.matrix @ v - mu * v) / nv)
