"""Vector potentials on the plane.

Polynomial gauges keep their coefficients as :class:`fractions.Fraction`
when the input is rational, so the field ``b = dA2/dx - dA1/dy`` and the
Landau primitive of a polynomial field are exact.  Edge integrals of the
potential along lattice links are evaluated in closed form.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Number

import numpy as np

__all__ = [
    "ConstantProfile",
    "GaugeField2D",
    "GaugeParseError",
    "HypersurfaceGauge",
    "Poly2D",
    "SinSquaredProfile",
    "landau_gauge",
    "parse_gauge_text",
    "parse_poly",
]


def _coef(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, float) and c.is_integer():
        return Fraction(int(c))
    return c


class Poly2D:
    """Bivariate polynomial ``sum c_ij x^i y^j``.

    >>> b = Poly2D({(2, 0): 1, (0, 2): 1})
    >>> b.integrate_x_primitive()
    Poly2D({(1, 2): Fraction(1, 1), (3, 0): Fraction(1, 3)})
    """

    def __init__(self, terms=None):
        clean = {}
        for (i, j), c in dict(terms or {}).items():
            if i < 0 or j < 0 or int(i) != i or int(j) != j:
                raise ValueError(f"bad exponent ({i}, {j})")
            c = _coef(c)
            if c != 0:
                key = (int(i), int(j))
                clean[key] = clean.get(key, 0) + c
        self.terms = {k: v for k, v in sorted(clean.items()) if v != 0}

    @classmethod
    def constant(cls, c) -> "Poly2D":
        return cls({(0, 0): c})

    @classmethod
    def from_monomials(cls, monomials) -> "Poly2D":
        """From ``(i, j, coefficient)`` triples."""
        out = {}
        for i, j, c in monomials:
            out[(i, j)] = out.get((i, j), 0) + _coef(c)
        return cls(out)

    def monomials(self) -> list[tuple[int, int, Number]]:
        return [(i, j, c) for (i, j), c in self.terms.items()]

    def __repr__(self):
        return f"Poly2D({self.terms!r})"

    def __eq__(self, other):
        return isinstance(other, Poly2D) and self.terms == other.terms

    def __add__(self, other):
        if isinstance(other, Number):
            other = Poly2D.constant(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Poly2D(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly2D({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Number):
            return Poly2D({k: v * _coef(other) for k, v in self.terms.items()})
        out = {}
        for (i1, j1), c1 in self.terms.items():
            for (i2, j2), c2 in other.terms.items():
                key = (i1 + i2, j1 + j2)
                out[key] = out.get(key, 0) + c1 * c2
        return Poly2D(out)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((i + j for i, j in self.terms), default=-1)

    @property
    def degree_x(self) -> int:
        return max((i for i, _ in self.terms), default=-1)

    def is_homogeneous(self, k: int) -> bool:
        return all(i + j == k for i, j in self.terms)

    def dx(self) -> "Poly2D":
        return Poly2D({(i - 1, j): c * i for (i, j), c in self.terms.items() if i > 0})

    def dy(self) -> "Poly2D":
        return Poly2D({(i, j - 1): c * j for (i, j), c in self.terms.items() if j > 0})

    def integrate_x_primitive(self) -> "Poly2D":
        """The primitive in ``x`` vanishing on ``x = 0``."""
        return Poly2D({(i + 1, j): c / Fraction(i + 1) if isinstance(c, Fraction) else c / (i + 1)
                       for (i, j), c in self.terms.items()})

    def shifted(self, x0, y0) -> "Poly2D":
        """``P(x + x0, y + y0)`` expanded binomially."""
        x0, y0 = _coef(x0), _coef(y0)
        out = {}
        for (i, j), c in self.terms.items():
            for a in range(i + 1):
                for b in range(j + 1):
                    w = c * math.comb(i, a) * math.comb(j, b) * x0 ** (i - a) * y0 ** (j - b)
                    out[(a, b)] = out.get((a, b), 0) + w
        return Poly2D(out)

    def homogeneous_part(self, d: int) -> "Poly2D":
        return Poly2D({(i, j): c for (i, j), c in self.terms.items() if i + j == d})

    @property
    def order(self) -> int:
        """Lowest total degree present (vanishing order at the origin)."""
        return min((i + j for i, j in self.terms), default=-1)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for (i, j), c in self.terms.items():
            out = out + float(c) * x**i * y**j
        return out

    def integrate_x(self, x0, x1, y):
        """``int_{x0}^{x1} P(x, y) dx`` in closed form."""
        x0, x1, y = (np.asarray(a, dtype=float) for a in (x0, x1, y))
        out = np.zeros(np.broadcast(x0, x1, y).shape)
        for (i, j), c in self.terms.items():
            out = out + float(c) * (x1 ** (i + 1) - x0 ** (i + 1)) / (i + 1) * y**j
        return out

    def integrate_y(self, x, y0, y1):
        """``int_{y0}^{y1} P(x, y) dy`` in closed form."""
        x, y0, y1 = (np.asarray(a, dtype=float) for a in (x, y0, y1))
        out = np.zeros(np.broadcast(x, y0, y1).shape)
        for (i, j), c in self.terms.items():
            out = out + float(c) * x**i * (y1 ** (j + 1) - y0 ** (j + 1)) / (j + 1)
        return out

    def lipschitz_bound(self, box) -> float:
        """Upper bound of ``|grad P|`` on the box ``(x_lo, x_hi, y_lo, y_hi)``."""
        xm = max(abs(box[0]), abs(box[1]))
        ym = max(abs(box[2]), abs(box[3]))
        gx = sum(abs(float(c)) * i * xm ** max(i - 1, 0) * ym**j for (i, j), c in self.terms.items() if i)
        gy = sum(abs(float(c)) * j * xm**i * ym ** max(j - 1, 0) for (i, j), c in self.terms.items() if j)
        return math.hypot(gx, gy)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (i, j), c in self.terms.items():
            mono = "*".join(f for f in (_pow("x", i), _pow("y", j)) if f)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def _pow(v, e):
    return "" if e == 0 else (v if e == 1 else f"{v}^{e}")


# ---------------------------------------------------------------------------
# gauges
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaugeField2D:
    """Polynomial vector potential ``A = A1 dx + A2 dy``."""

    A1: Poly2D
    A2: Poly2D

    @property
    def b(self) -> Poly2D:
        return self.A2.dx() - self.A1.dy()

    def field(self, x, y):
        return self.b(x, y)

    def tr_plus(self, x, y):
        """Field intensity; in two dimensions this is ``|b|``."""
        return np.abs(self.b(x, y))

    def trace_norm(self, x, y):
        """``|B| = sqrt(2) |b|`` for the skew 2x2 field matrix."""
        return math.sqrt(2.0) * np.abs(self.b(x, y))

    def edge_x(self, x0, x1, y):
        return self.A1.integrate_x(x0, x1, y)

    def edge_y(self, x, y0, y1):
        return self.A2.integrate_y(x, y0, y1)

    def is_x_periodic(self, L: float) -> bool:
        return self.A1.degree_x <= 0 and self.A2.degree_x <= 0

    def gauge_shift(self, chi: Poly2D) -> "GaugeField2D":
        """``A + d chi``."""
        return GaugeField2D(self.A1 + chi.dx(), self.A2 + chi.dy())


def landau_gauge(b: Poly2D) -> GaugeField2D:
    """``A = (0, int_0^x b(s, y) ds)``, so ``dA = b dx^dy`` exactly."""
    return GaugeField2D(Poly2D(), b.integrate_x_primitive())


@dataclass(frozen=True)
class ConstantProfile:
    value: float

    def __call__(self, x):
        return np.full(np.shape(x), float(self.value))

    def integral(self, x0, x1):
        return self.value * (np.asarray(x1, dtype=float) - np.asarray(x0, dtype=float))

    @property
    def minimum(self) -> float:
        return float(self.value)

    def is_periodic(self, L):
        return True


@dataclass(frozen=True)
class SinSquaredProfile:
    """``base + mu sin^2(pi x / L)``: minimum ``base`` at ``x = 0``, nondegenerate for ``mu > 0``."""

    L: float
    mu: float = 1.0
    base: float = 1.0

    def __call__(self, x):
        return self.base + self.mu * np.sin(np.pi * np.asarray(x, dtype=float) / self.L) ** 2

    def integral(self, x0, x1):
        x0 = np.asarray(x0, dtype=float)
        x1 = np.asarray(x1, dtype=float)
        w = 2 * np.pi / self.L
        # sin^2(pi x/L) = (1 - cos(w x)) / 2
        return (self.base + 0.5 * self.mu) * (x1 - x0) - 0.5 * self.mu * (np.sin(w * x1) - np.sin(w * x0)) / w

    @property
    def minimum(self) -> float:
        return float(self.base)

    def is_periodic(self, L):
        return math.isclose(L, self.L)


@dataclass(frozen=True)
class HypersurfaceGauge:
    """``A = (alpha1 + beta1(x) y^{k+1}/(k+1)) dx`` on the cylinder ``x in R/LZ``.

    The field ``b = -beta1(x) y^k`` vanishes to order ``k`` on ``y = 0``.
    """

    k: int
    alpha1: float
    profile: object

    def field(self, x, y):
        return -self.profile(x) * np.asarray(y, dtype=float) ** self.k

    def tr_plus(self, x, y):
        return np.abs(self.field(x, y))

    def edge_x(self, x0, x1, y):
        y = np.asarray(y, dtype=float)
        s = y ** (self.k + 1) / (self.k + 1)
        return self.alpha1 * (np.asarray(x1, dtype=float) - np.asarray(x0, dtype=float)) + self.profile.integral(x0, x1) * s

    def edge_y(self, x, y0, y1):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y0), np.asarray(y1)).shape)

    def is_x_periodic(self, L: float) -> bool:
        return self.profile.is_periodic(L)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


class GaugeParseError(ValueError):
    pass


_TERM_SPLIT = re.compile(r"(?<=[^eE*/^\s])\s*(?=[+-])")
_NUM = re.compile(r"^\d+(\.\d*)?([eE][+-]?\d+)?$|^\.\d+([eE][+-]?\d+)?$")


def _parse_number(tok):
    if not _NUM.match(tok):
        raise ValueError(tok)
    if re.fullmatch(r"\d+", tok):
        return Fraction(int(tok))
    return Fraction(tok) if "e" not in tok.lower() else float(tok)


def _parse_term(term):
    raw = term.strip()
    term = raw.replace(" ", "")
    sign = 1
    while term and term[0] in "+-":
        sign = -sign if term[0] == "-" else sign
        term = term[1:]
    if not term:
        raise GaugeParseError(f"empty monomial in {raw!r}")
    coef = Fraction(1)
    i = j = 0
    ops = ["*"] + re.findall(r"[*/]", term)
    for op, fac in zip(ops, re.split(r"[*/]", term)):
        m = re.fullmatch(r"([xy])(?:\^(\d+))?", fac)
        if m and op == "*":
            e = int(m.group(2) or 1)
            if m.group(1) == "x":
                i += e
            else:
                j += e
            continue
        try:
            val = _parse_number(fac)
            coef = coef * val if op == "*" else coef / val
        except (ValueError, ZeroDivisionError):
            raise GaugeParseError(f"malformed monomial {raw!r} (bad factor {fac!r})") from None
    return i, j, sign * coef


def parse_poly(text: str) -> Poly2D:
    """Parse ``"1/3*x^3 + x*y^2 - 0.5"`` style polynomials.

    Factors inside a monomial are joined by ``*`` (or ``/`` before a
    number); coefficients may be integers, fractions ``p/q`` or decimals.
    """
    text = text.strip()
    if text in ("", "0"):
        return Poly2D()
    terms = [t for t in _TERM_SPLIT.split(text) if t.strip()]
    return Poly2D.from_monomials(_parse_term(t) for t in terms)


def parse_gauge_text(text: str) -> GaugeField2D:
    """Parse a gauge description.

    One component per line, ``A1 = <poly>`` and ``A2 = <poly>``; a missing
    component is zero.  Alternatively ``b = <poly>`` gives the field and the
    Landau gauge is used.  ``#`` starts a comment.
    """
    comps = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GaugeParseError(f"line {lineno}: expected 'name = polynomial', got {line!r}")
        name, rhs = (s.strip() for s in line.split("=", 1))
        if name not in ("A1", "A2", "b"):
            raise GaugeParseError(f"line {lineno}: unknown component {name!r}")
        if name in comps:
            raise GaugeParseError(f"line {lineno}: duplicate component {name!r}")
        try:
            comps[name] = parse_poly(rhs)
        except GaugeParseError as exc:
            raise GaugeParseError(f"line {lineno}: {exc}") from None
    if "b" in comps:
        if "A1" in comps or "A2" in comps:
            raise GaugeParseError("give either b or A1/A2, not both")
        return landau_gauge(comps["b"])
    if not comps:
        raise GaugeParseError("no gauge components found")
    return GaugeField2D(comps.get("A1", Poly2D()), comps.get("A2", Poly2D()))
