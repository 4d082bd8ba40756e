"""Truncated Puiseux series over the rationals and their ball tree.

A computable stand-in for a dense valued field with infinite residue field:
elements are finite sums of rational powers of ``t`` with rational
coefficients, known modulo ``O(t^precision)``.  The valuation is the least
exponent, the residue is the constant coefficient, and the nodes of the
canonical tree are closed balls ``(center, radius)`` ordered by reverse
inclusion.

Everything is exact.  Precision is tracked per value and propagated
pessimistically; any operation that would need unknown digits raises
:class:`PrecisionError` instead of guessing.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

NEG_INF = float("-inf")
INFINITE_BRANCHING = math.inf


class PrecisionError(ArithmeticError):
    """Raised when a query needs digits beyond the tracked precision."""


@dataclass(frozen=True)
class UnknownValuation:
    """Valuation of a series with no visible terms: at least ``floor``."""

    floor: Fraction

    def __repr__(self):
        return f"UnknownValuation(>= {self.floor})"


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class Series:
    """A truncated Puiseux series: sorted nonzero terms below a precision."""

    __slots__ = ("terms", "precision")

    def __init__(self, terms, precision):
        precision = _frac(precision)
        norm: dict[Fraction, Fraction] = {}
        for exp, coef in terms:
            exp, coef = _frac(exp), _frac(coef)
            if exp >= precision:
                continue
            norm[exp] = norm.get(exp, Fraction(0)) + coef
        cleaned = tuple(
            (e, norm[e]) for e in sorted(norm) if norm[e] != 0
        )
        object.__setattr__(self, "terms", cleaned)
        object.__setattr__(self, "precision", precision)

    def __setattr__(self, *_):
        raise AttributeError("Series is immutable")

    @property
    def is_zero_up_to_precision(self) -> bool:
        return not self.terms

    def coefficient(self, exp) -> Fraction:
        exp = _frac(exp)
        if exp >= self.precision:
            raise PrecisionError(f"coefficient at t^{exp} is beyond O(t^{self.precision})")
        for e, c in self.terms:
            if e == exp:
                return c
        return Fraction(0)

    def __eq__(self, other):
        return (
            isinstance(other, Series)
            and self.terms == other.terms
            and self.precision == other.precision
        )

    def __hash__(self):
        return hash((self.terms, self.precision))

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __repr__(self):
        if not self.terms:
            return f"O(t^{self.precision})"
        body = " + ".join(
            f"{c}*t^{e}" if e != 0 else f"{c}" for e, c in self.terms
        )
        return f"{body} + O(t^{self.precision})"


DEFAULT_PRECISION = Fraction(16)


def series(terms, precision=DEFAULT_PRECISION) -> Series:
    return Series(terms, precision)


def constant(value, precision=DEFAULT_PRECISION) -> Series:
    return Series([(Fraction(0), _frac(value))], precision)


def monomial(exp, coef=1, precision=DEFAULT_PRECISION) -> Series:
    return Series([(_frac(exp), _frac(coef))], precision)


def zero(precision=DEFAULT_PRECISION) -> Series:
    return Series([], precision)


def _val_floor(x: Series) -> Fraction:
    """The best known lower bound on the valuation."""
    return x.terms[0][0] if x.terms else x.precision


def val(x: Series):
    """The valuation: least exponent, or an UnknownValuation marker."""
    if x.terms:
        return x.terms[0][0]
    return UnknownValuation(x.precision)


def add(x: Series, y: Series) -> Series:
    prec = min(x.precision, y.precision)
    return Series(list(x.terms) + list(y.terms), prec)


def neg(x: Series) -> Series:
    return Series([(e, -c) for e, c in x.terms], x.precision)


def sub(x: Series, y: Series) -> Series:
    return add(x, neg(y))


def mul(x: Series, y: Series) -> Series:
    prec = min(x.precision + _val_floor(y), y.precision + _val_floor(x))
    terms: dict[Fraction, Fraction] = {}
    for ex, cx in x.terms:
        for ey, cy in y.terms:
            e = ex + ey
            if e < prec:
                terms[e] = terms.get(e, Fraction(0)) + cx * cy
    return Series(list(terms.items()), prec)


def _invert(y: Series) -> Series:
    """1/y with the precision implied by y's own精 error term."""
    if not y.terms:
        raise ZeroDivisionError("division by a series that is zero up to precision")
    v, lead = y.terms[0]
    prec = y.precision - 2 * v
    target = prec + v
    # y = lead * t^v * (1 + u) with val(u) > 0; expand the geometric series,
    # truncating every power at the unit-part precision so the loop ends.
    u_terms = [(e - v, c / lead) for e, c in y.terms[1:]]
    u = Series(u_terms, target)
    acc = constant(1, target)
    power = constant(1, target)
    while True:
        power = Series(mul(power, neg(u)).terms, target)
        if power.is_zero_up_to_precision:
            break
        acc = add(acc, power)
    return Series([(e - v, c / lead) for e, c in acc.terms], prec)


def div(x: Series, y: Series) -> Series:
    return mul(x, _invert(y))


def residue(x: Series) -> Fraction:
    """The constant coefficient, defined on the valuation ring."""
    if x.precision <= 0:
        raise PrecisionError("residue needs precision above 0")
    v = val(x)
    if isinstance(v, Fraction) and v < 0:
        raise ValueError("residue is undefined at negative valuation")
    return x.coefficient(Fraction(0))


def indistinguishable(x: Series, y: Series) -> bool:
    """True when x - y has no visible terms at the joint precision."""
    return sub(x, y).is_zero_up_to_precision


# ---------------------------------------------------------------------------
# Balls


class Ball:
    """A closed ball: all series within valuation-distance ``radius`` of a center.

    Balls are the internal nodes of the canonical tree.  Two balls are equal
    when their radii agree and the centers are within the radius of each
    other; hashing truncates the center accordingly.  The virtual root is the
    unique ball of radius -infinity.
    """

    __slots__ = ("center", "radius")

    def __init__(self, center: Series, radius):
        if radius != NEG_INF:
            radius = _frac(radius)
            if radius >= center.precision:
                raise PrecisionError(
                    f"ball radius {radius} is not determined by a center known "
                    f"to O(t^{center.precision})"
                )
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)

    def __setattr__(self, *_):
        raise AttributeError("Ball is immutable")

    @property
    def is_root(self) -> bool:
        return self.radius == NEG_INF

    def _key(self):
        if self.is_root:
            return (NEG_INF, ())
        return (self.radius, tuple(t for t in self.center.terms if t[0] < self.radius))

    def __eq__(self, other):
        if not isinstance(other, Ball):
            return NotImplemented
        if self.is_root or other.is_root:
            return self.is_root and other.is_root
        if self.radius != other.radius:
            return False
        d = sub(self.center, other.center)
        v = val(d)
        if isinstance(v, UnknownValuation):
            return v.floor >= self.radius
        return v >= self.radius

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        if self.is_root:
            return "Ball(-inf)"
        return f"Ball({self.center!r}, r={self.radius})"

    def contains(self, x: Series) -> bool:
        """Membership of a leaf series in the closed ball."""
        if self.is_root:
            return True
        d = sub(x, self.center)
        v = val(d)
        if isinstance(v, UnknownValuation):
            if v.floor >= self.radius:
                return True
            raise PrecisionError(
                "membership undecidable: difference vanishes below the radius"
            )
        return v >= self.radius


def root_ball(precision=DEFAULT_PRECISION) -> Ball:
    return Ball(zero(precision), NEG_INF)


def ball_inf(x: Series, y: Series) -> Ball:
    """The infimum of two leaves: the smallest closed ball containing both."""
    d = sub(x, y)
    if d.is_zero_up_to_precision:
        raise PrecisionError(
            "leaves are indistinguishable at the current precision"
        )
    return Ball(x, d.terms[0][0])


def cone_index(a: Ball, x: Series) -> Fraction:
    """The residue-field index of the cone of ``x`` at the ball ``a``.

    Two members of the ball get equal indices exactly when they lie in the
    same cone at it.
    """
    if a.is_root:
        raise ValueError("cones at the virtual root are not indexed")
    if not a.contains(x):
        raise ValueError("series lies outside the ball")
    d = sub(x, a.center)
    if d.precision <= a.radius:
        raise PrecisionError("cone index needs digits beyond the radius")
    return d.coefficient(a.radius)


def ball_le(a: Ball, b: Ball) -> bool:
    """Tree order on balls: a <= b iff the ball a contains the ball b."""
    if a.is_root:
        return True
    if b.is_root:
        return False
    if a.radius > b.radius:
        return False
    d = sub(a.center, b.center)
    v = val(d)
    if isinstance(v, UnknownValuation):
        if v.floor >= a.radius:
            return True
        raise PrecisionError("ball comparison undecidable at current precision")
    return v >= a.radius


def node_le(a, b) -> bool:
    """Order between Puiseux node references (balls and leaf series)."""
    if isinstance(a, Ball) and isinstance(b, Ball):
        return ball_le(a, b)
    if isinstance(a, Ball) and isinstance(b, Series):
        return a.contains(b)
    if isinstance(a, Series) and isinstance(b, Series):
        return indistinguishable(a, b)
    return False  # a leaf is never strictly below a ball


def node_inf(a, b):
    if isinstance(a, Series) and isinstance(b, Series):
        if indistinguishable(a, b):
            return a
        return ball_inf(a, b)
    if isinstance(a, Series):
        a, b = b, a
    # a is a Ball
    if isinstance(b, Series):
        if a.is_root or a.contains(b):
            return a
        d = sub(b, a.center)
        return Ball(a.center, d.terms[0][0])
    if ball_le(a, b):
        return a
    if ball_le(b, a):
        return b
    lo, hi = (a, b) if a.radius <= b.radius else (b, a)
    d = sub(lo.center, hi.center)
    return Ball(lo.center, d.terms[0][0])


class PuiseuxBranch:
    """The branch of a leaf: the chain of closed balls around it, by radius."""

    def __init__(self, leaf: Series):
        self.leaf = leaf

    def at(self, radius) -> Ball:
        radius = _frac(radius)
        return Ball(self.leaf, radius)

    def bottom(self) -> Ball:
        return root_ball(self.leaf.precision)

    def __contains__(self, node) -> bool:
        if isinstance(node, Ball):
            return node.is_root or node.contains(self.leaf)
        return False

    def __repr__(self):
        return f"PuiseuxBranch({self.leaf!r})"


# ---------------------------------------------------------------------------
# Serialization and sampling


def frac_to_json(x) -> str:
    if x == NEG_INF:
        return "-inf"
    return str(_frac(x))


def frac_from_json(s) -> Fraction | float:
    if s == "-inf":
        return NEG_INF
    return Fraction(s)


def series_to_json(x: Series) -> dict:
    return {
        "terms": [{"exp": str(e), "coef": str(c)} for e, c in x.terms],
        "prec": str(x.precision),
    }


def series_from_json(data: dict) -> Series:
    return Series(
        [(Fraction(t["exp"]), Fraction(t["coef"])) for t in data["terms"]],
        Fraction(data["prec"]),
    )


def ball_to_json(b: Ball) -> dict:
    return {"center": series_to_json(b.center), "radius": frac_to_json(b.radius)}


def ball_from_json(data: dict) -> Ball:
    return Ball(series_from_json(data["center"]), frac_from_json(data["radius"]))


def random_series(
    rng: random.Random,
    precision=DEFAULT_PRECISION,
    max_terms: int = 4,
    min_exp: int = -6,
) -> Series:
    """A deterministic random term-sparse series (small rational data)."""
    precision = _frac(precision)
    n = rng.randint(0, max_terms)
    terms = []
    seen = set()
    for _ in range(n):
        den = rng.randint(1, 3)
        num = rng.randint(min_exp * den, min(12 * den, int(precision * den) - 1))
        exp = Fraction(num, den)
        if exp in seen or exp >= precision:
            continue
        seen.add(exp)
        coef = Fraction(rng.randint(-9, 9), rng.randint(1, 4))
        if coef == 0:
            coef = Fraction(1)
        terms.append((exp, coef))
    return Series(terms, precision)


def random_unit(rng: random.Random, precision=DEFAULT_PRECISION) -> Series:
    """A random series of valuation exactly zero."""
    x = random_series(rng, precision)
    terms = [(e, c) for e, c in x.terms if e > 0]
    terms.append((Fraction(0), Fraction(rng.randint(1, 9))))
    return Series(terms, _frac(precision))
