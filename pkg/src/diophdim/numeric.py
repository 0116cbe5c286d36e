"""Certified adaptive-precision evaluation of real constants.

Constants are kept as small expression trees and evaluated on demand into
intervals with exact rational endpoints.  Every comparison made elsewhere in
the package goes through :func:`certified_compare` (or through one of the
fixed-point kernels, whose ambiguous cases are sent back here).
"""

from __future__ import annotations

import enum
import functools
import math
import os
import re
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence, Union

import gmpy2

from .errors import (
    IndependenceNotDeclared,
    PrecisionExhausted,
    RationalDependenceDetected,
    UnsupportedExpression,
)

START_PRECISION = 64
DEFAULT_PRECISION_CAP = 256

# fixed-point torus coordinates used by the kernels
FIXED_BITS = 64
FIXED_ONE = 1 << FIXED_BITS
FIXED_MASK = FIXED_ONE - 1


def precision_cap() -> int:
    """Default precision cap in bits, overridable via ``DIOPH_PRECISION_CAP``."""
    raw = os.environ.get("DIOPH_PRECISION_CAP")
    if raw is None:
        return DEFAULT_PRECISION_CAP
    cap = int(raw)
    if cap < 1:
        raise ValueError("DIOPH_PRECISION_CAP must be a positive integer")
    return cap


# ---------------------------------------------------------------------------
# intervals


def _floor_dyadic(x: Fraction, bits: int) -> Fraction:
    return Fraction(math.floor(x * (1 << bits)), 1 << bits)


def _ceil_dyadic(x: Fraction, bits: int) -> Fraction:
    return Fraction(math.ceil(x * (1 << bits)), 1 << bits)


def _is_dyadic(x: Fraction) -> bool:
    d = x.denominator
    return d & (d - 1) == 0


def fraction_to_decimal(x: Fraction) -> str:
    """Exact decimal string for a dyadic rational, ``p/q`` otherwise."""
    if not _is_dyadic(x):
        return f"{x.numerator}/{x.denominator}"
    k = x.denominator.bit_length() - 1
    if k == 0:
        return str(x.numerator)
    scaled = abs(x.numerator) * 5**k
    digits = str(scaled).rjust(k + 1, "0")
    sign = "-" if x < 0 else ""
    return f"{sign}{digits[:-k]}.{digits[-k:]}".rstrip("0").rstrip(".")


def parse_fraction(text: str) -> Fraction:
    """Parse ``p/q``, an integer, or an exact decimal string."""
    return Fraction(text.strip())


@dataclass(frozen=True)
class CertifiedInterval:
    """Closed interval ``[lo, hi]`` with exact rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x) -> "CertifiedInterval":
        x = Fraction(x)
        return cls(x, x)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "CertifiedInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersect(self, other: "CertifiedInterval") -> "CertifiedInterval":
        return CertifiedInterval(max(self.lo, other.lo), min(self.hi, other.hi))

    def __neg__(self):
        return CertifiedInterval(-self.hi, -self.lo)

    def __add__(self, other):
        other = _as_interval(other)
        return CertifiedInterval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_interval(other)
        return CertifiedInterval(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other):
        return _as_interval(other) - self

    def __mul__(self, other):
        other = _as_interval(other)
        products = (
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        )
        return CertifiedInterval(min(products), max(products))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_interval(other)
        if other.lo <= 0 <= other.hi:
            raise ZeroDivisionError("divisor interval contains zero")
        return self * CertifiedInterval(1 / other.hi, 1 / other.lo)

    def round_out(self, bits: int) -> "CertifiedInterval":
        if self.is_point and _is_dyadic(self.lo) and self.lo.denominator <= (1 << bits):
            return self
        return CertifiedInterval(_floor_dyadic(self.lo, bits), _ceil_dyadic(self.hi, bits))

    def as_floats(self) -> tuple[float, float]:
        lo, hi = float(self.lo), float(self.hi)
        if Fraction(lo) > self.lo:
            lo = math.nextafter(lo, -math.inf)
        if Fraction(hi) < self.hi:
            hi = math.nextafter(hi, math.inf)
        return lo, hi

    def to_strings(self) -> tuple[str, str]:
        return fraction_to_decimal(self.lo), fraction_to_decimal(self.hi)

    def __repr__(self):
        lo, hi = self.as_floats()
        return f"CertifiedInterval([{lo!r}, {hi!r}], width={float(self.width):.3g})"


def _as_interval(x) -> CertifiedInterval:
    if isinstance(x, CertifiedInterval):
        return x
    if isinstance(x, (int, Fraction)):
        return CertifiedInterval.point(x)
    raise TypeError(f"cannot use {type(x).__name__} as an exact interval")


# ---------------------------------------------------------------------------
# expressions
#
# Nodes are plain tuples so they hash and can key caches:
#   ("rat", Fraction)            exact rational
#   ("sqrt", k)                  square root of a nonsquare positive integer
#   ("const", "pi" | "e")
#   ("dec", value, radius)       decimal literal with declared error radius
#   ("neg", a), ("add", a, b), ("sub", a, b), ("mul", a, b), ("div", a, b)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)(?:~(?P<err>[+-]?\d+))?|(?P<name>[A-Za-z_]+)|(?P<op>[-+*/()]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise UnsupportedExpression(f"unexpected input at {text[pos:]!r}")
        pos = m.end()
        if m.group("num") is not None:
            out.append(("num", m.group("num"), m.group("err")))
        elif m.group("name") is not None:
            out.append(("name", m.group("name")))
        else:
            out.append(("op", m.group("op")))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise UnsupportedExpression(f"unexpected end of expression {self.text!r}")
        self.i += 1
        return tok

    def expect_op(self, op):
        tok = self.take()
        if tok != ("op", op):
            raise UnsupportedExpression(f"expected {op!r} in {self.text!r}")

    def parse(self):
        node = self.expr()
        if self.peek() is not None:
            raise UnsupportedExpression(f"trailing input in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = ("add" if op == "+" else "sub", node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = ("mul" if op == "*" else "div", node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        tok = self.take()
        if tok[0] == "num":
            _, digits, err = tok
            value = Fraction(digits)
            if err is None:
                return ("rat", value)
            return ("dec", value, Fraction(10) ** int(err))
        if tok[0] == "name":
            name = tok[1]
            if name == "sqrt":
                self.expect_op("(")
                arg = self.take()
                if arg[0] != "num" or "." in arg[1] or arg[2] is not None:
                    raise UnsupportedExpression("sqrt() takes a positive integer literal")
                self.expect_op(")")
                return make_sqrt(int(arg[1]))
            if name == "phi":
                return ("div", ("add", ("rat", Fraction(1)), ("sqrt", 5)), ("rat", Fraction(2)))
            if name in ("pi", "e"):
                return ("const", name)
            raise UnsupportedExpression(f"unknown name {name!r}")
        if tok == ("op", "("):
            node = self.expr()
            self.expect_op(")")
            return node
        raise UnsupportedExpression(f"unexpected token {tok[1]!r} in {self.text!r}")


def make_sqrt(k: int):
    if k <= 0:
        raise UnsupportedExpression("sqrt() argument must be a positive integer")
    r = math.isqrt(k)
    if r * r == k:
        return ("rat", Fraction(r))
    return ("sqrt", k)


def _squarefree_split(k: int) -> tuple[int, int]:
    """Return (t, m) with k = t**2 * m and m squarefree."""
    t, m, d = 1, 1, 2
    while d * d <= k:
        while k % (d * d) == 0:
            k //= d * d
            t *= d
        if k % d == 0:
            k //= d
            m *= d
        d += 1
    return t, m * k


@functools.lru_cache(maxsize=None)
def linear_form(node) -> dict | None:
    """Canonical rational-linear combination of {1, sqrt(m), pi, e}.

    Returns ``None`` when the expression is not recognised as such a
    combination.  A returned empty dict means the value is exactly zero.
    """
    kind = node[0]
    if kind == "rat":
        return {} if node[1] == 0 else {1: node[1]}
    if kind == "sqrt":
        t, m = _squarefree_split(node[1])
        return {("sqrt", m): Fraction(t)}
    if kind == "const":
        return {node[1]: Fraction(1)}
    if kind == "dec":
        return None
    if kind == "neg":
        a = linear_form(node[1])
        return None if a is None else {b: -c for b, c in a.items()}
    a = linear_form(node[1])
    b = linear_form(node[2])
    if a is None or b is None:
        return None
    if kind in ("add", "sub"):
        sign = 1 if kind == "add" else -1
        out = dict(a)
        for basis, c in b.items():
            out[basis] = out.get(basis, 0) + sign * c
        return {k: v for k, v in out.items() if v != 0}
    if kind == "mul":
        return _lf_mul(a, b)
    if kind == "div":
        if not b:
            return None
        if set(b) == {1}:
            return {k: v / b[1] for k, v in a.items()}
        if len(b) == 1:
            (basis, c), = b.items()
            if isinstance(basis, tuple):
                m = basis[1]
                # x / (c sqrt m) = x sqrt(m) / (c m)
                return _lf_mul(a, {basis: 1 / (c * m)})
        return None
    raise UnsupportedExpression(f"unknown node {kind!r}")


def _lf_mul(a: dict, b: dict) -> dict | None:
    out: dict = {}
    for ba, ca in a.items():
        for bb, cb in b.items():
            if ba == 1 or bb == 1:
                basis = bb if ba == 1 else ba
                coef = ca * cb
            elif isinstance(ba, tuple) and isinstance(bb, tuple):
                t, m = _squarefree_split(ba[1] * bb[1])
                basis = 1 if m == 1 else ("sqrt", m)
                coef = ca * cb * t
            else:
                return None
            out[basis] = out.get(basis, 0) + coef
    return {k: v for k, v in out.items() if v != 0}


@functools.lru_cache(maxsize=None)
def _exact_value(node) -> Fraction | None:
    kind = node[0]
    if kind == "rat":
        return node[1]
    if kind in ("sqrt", "const", "dec"):
        return None
    if kind == "neg":
        a = _exact_value(node[1])
        return None if a is None else -a
    a = _exact_value(node[1])
    b = _exact_value(node[2])
    if a is None or b is None:
        lf = linear_form(node)
        if lf is not None and set(lf) <= {1}:
            return lf.get(1, Fraction(0))
        return None
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if b == 0:
        raise ZeroDivisionError("division by exact zero in expression")
    return a / b


@functools.lru_cache(maxsize=None)
def _has_decimal(node) -> bool:
    if node[0] == "dec":
        return True
    return any(isinstance(c, tuple) and _has_decimal(c) for c in node[1:])


def _to_text(node) -> str:
    kind = node[0]
    if kind == "rat":
        v = node[1]
        return str(v.numerator) if v.denominator == 1 else f"({v.numerator}/{v.denominator})"
    if kind == "sqrt":
        return f"sqrt({node[1]})"
    if kind == "const":
        return node[1]
    if kind == "dec":
        return f"{fraction_to_decimal(node[1])}~{round(math.log10(node[2]))}"
    if kind == "neg":
        return f"(-{_to_text(node[1])})"
    op = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[kind]
    return f"({_to_text(node[1])} {op} {_to_text(node[2])})"


@dataclass(frozen=True)
class RealConstant:
    """A real number: an exact expression plus a certified approximation oracle."""

    node: tuple
    text: str = ""

    @classmethod
    def parse(cls, text: str) -> "RealConstant":
        return cls(_Parser(text).parse(), text.strip())

    @classmethod
    def rational(cls, x) -> "RealConstant":
        x = Fraction(x)
        return cls(("rat", x), str(x))

    def __str__(self):
        return self.text or _to_text(self.node)

    @property
    def exact(self) -> Fraction | None:
        """The value as a Fraction when it is provably rational, else None."""
        return _exact_value(self.node)

    @property
    def approximate_input(self) -> bool:
        return _has_decimal(self.node)

    def linear_form(self):
        return linear_form(self.node)

    def approx(self, p: int) -> CertifiedInterval:
        return approx(self, p)

    def _bin(self, kind, other, swap=False):
        other = as_constant(other)
        a, b = (other.node, self.node) if swap else (self.node, other.node)
        return RealConstant((kind, a, b))

    def __add__(self, other):
        return self._bin("add", other)

    def __radd__(self, other):
        return self._bin("add", other, swap=True)

    def __sub__(self, other):
        return self._bin("sub", other)

    def __rsub__(self, other):
        return self._bin("sub", other, swap=True)

    def __mul__(self, other):
        return self._bin("mul", other)

    def __rmul__(self, other):
        return self._bin("mul", other, swap=True)

    def __truediv__(self, other):
        return self._bin("div", other)

    def __neg__(self):
        return RealConstant(("neg", self.node))


Number = Union[RealConstant, int, Fraction, str]


def as_constant(x: Number) -> RealConstant:
    if isinstance(x, RealConstant):
        return x
    if isinstance(x, str):
        return RealConstant.parse(x)
    if isinstance(x, (int, Fraction)):
        return RealConstant.rational(x)
    raise UnsupportedExpression(f"cannot interpret {x!r} as a constant")


# ---------------------------------------------------------------------------
# evaluation


class _NeedMorePrecision(Exception):
    pass


def _pi_or_e(name: str, bits: int) -> CertifiedInterval:
    fn = gmpy2.const_pi if name == "pi" else (lambda: gmpy2.exp(1))
    with gmpy2.context(precision=bits + 8, round=gmpy2.RoundDown):
        lo = fn()
    with gmpy2.context(precision=bits + 8, round=gmpy2.RoundUp):
        hi = fn()
    return CertifiedInterval(Fraction(*lo.as_integer_ratio()), Fraction(*hi.as_integer_ratio()))


def _eval(node, bits: int) -> CertifiedInterval:
    exact = _exact_value(node)
    if exact is not None:
        return CertifiedInterval.point(exact)
    kind = node[0]
    if kind == "sqrt":
        k = node[1]
        s = math.isqrt(k << (2 * bits))
        return CertifiedInterval(Fraction(s, 1 << bits), Fraction(s + 1, 1 << bits))
    if kind == "const":
        return _pi_or_e(node[1], bits)
    if kind == "dec":
        return CertifiedInterval(node[1] - node[2], node[1] + node[2])
    if kind == "neg":
        return -_eval(node[1], bits)
    a = _eval(node[1], bits)
    b = _eval(node[2], bits)
    if kind == "add":
        out = a + b
    elif kind == "sub":
        out = a - b
    elif kind == "mul":
        out = a * b
    else:
        try:
            out = a / b
        except ZeroDivisionError:
            raise _NeedMorePrecision from None
    return out.round_out(bits + 4)


def _max_working_bits(p: int) -> int:
    return 8 * p + 4096


@functools.lru_cache(maxsize=1 << 16)
def _target(node, p: int) -> CertifiedInterval:
    """Some certified interval of width <= 2**-p (not yet nested)."""
    limit = Fraction(1, 1 << p)
    bits = p + 8
    while True:
        try:
            iv = _eval(node, bits)
            if iv.width <= limit:
                return iv
        except _NeedMorePrecision:
            pass
        if _has_decimal(node) and bits > p + 64:
            raise PrecisionExhausted(
                f"{_to_text(node)} carries a declared error radius and cannot be "
                f"refined to 2^-{p}"
            )
        bits += max(16, bits // 2)
        if bits > _max_working_bits(p):
            raise PrecisionExhausted(f"cannot evaluate {_to_text(node)} to 2^-{p}")


_nest_lock = threading.Lock()
_nested_cache: dict = {}


def approx(c: Number, p: int) -> CertifiedInterval:
    """Certified interval of width <= 2**-p containing ``c``.

    Intervals are nested in ``p`` and deterministic in ``(expression, p)``.
    """
    if p < 1:
        raise ValueError("precision must be >= 1")
    c = as_constant(c)
    exact = c.exact
    if exact is not None:
        return CertifiedInterval.point(exact)
    node = c.node
    with _nest_lock:
        hit = _nested_cache.get((node, p))
        if hit is not None:
            return hit
        start, iv = 1, None
        for q in range(p - 1, 0, -1):
            cached = _nested_cache.get((node, q))
            if cached is not None:
                start, iv = q + 1, cached
                break
    for j in range(start, p + 1):
        t = _target(node, j)
        iv = t if iv is None else iv.intersect(t)
    with _nest_lock:
        if len(_nested_cache) > 1 << 16:
            _nested_cache.clear()
        _nested_cache[(node, p)] = iv
    return iv


def fast_interval(c: RealConstant, bits: int) -> CertifiedInterval:
    """A certified interval of width <= 2**-bits, without the nesting guarantee.

    Cheaper than :func:`approx`; used for bulk geometry where only soundness
    matters.
    """
    exact = c.exact
    if exact is not None:
        return CertifiedInterval.point(exact)
    return _target(c.node, bits)


def scaled_interval(c: RealConstant, q: int, bits: int) -> CertifiedInterval:
    """Certified interval for ``q * c`` of width <= 2**-bits."""
    if q == 0:
        return CertifiedInterval.point(0)
    base = fast_interval(c, bits + abs(q).bit_length())
    return base * q


# ---------------------------------------------------------------------------
# vectors and torus distances


@dataclass(frozen=True)
class TargetVector:
    """The column A = (alpha_1, ..., alpha_n)."""

    entries: tuple
    independence_declared: bool = True

    def __post_init__(self):
        entries = tuple(as_constant(e) for e in self.entries)
        if not entries:
            raise ValueError("target vector needs at least one entry")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def parse(cls, text: str, independence_declared: bool = True) -> "TargetVector":
        parts = [p for p in text.split(",") if p.strip()]
        return cls(tuple(RealConstant.parse(p) for p in parts), independence_declared)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __str__(self):
        return ",".join(str(e) for e in self.entries)

    def texts(self) -> list[str]:
        return [str(e) for e in self.entries]

    def require_irrational(self):
        if not self.independence_declared:
            raise IndependenceNotDeclared(
                "1, alpha_1, ..., alpha_n must be declared linearly independent over Q"
            )
        for e in self.entries:
            if e.approximate_input:
                raise UnsupportedExpression(
                    f"{e} is an approximate decimal; exact input is required here"
                )
            if e.exact is not None:
                raise RationalDependenceDetected(f"entry {e} is rational")

    def scaled(self, q: int) -> list[RealConstant]:
        return [e * q for e in self.entries]

    def fixed(self) -> list[int]:
        return [fixed_point(e) for e in self.entries]


def _frac_dist(t: Fraction) -> Fraction:
    f = t - math.floor(t)
    return min(f, 1 - f)


def dist_range(iv: CertifiedInterval) -> CertifiedInterval:
    """Exact range of the distance-to-nearest-integer over ``iv``."""
    if iv.width >= 1:
        return CertifiedInterval(Fraction(0), Fraction(1, 2))
    n = math.floor(iv.lo)
    lo, hi = iv.lo - n, iv.hi - n  # lo in [0, 1), hi < 2
    dlo, dhi = _frac_dist(lo), _frac_dist(hi)
    top = Fraction(1, 2) if (lo <= Fraction(1, 2) <= hi or lo <= Fraction(3, 2) <= hi) else max(dlo, dhi)
    bottom = Fraction(0) if (lo == 0 or lo <= 1 <= hi) else min(dlo, dhi)
    return CertifiedInterval(bottom, top)


def torus_norm_of_intervals(ivs: Iterable[CertifiedInterval]) -> CertifiedInterval:
    ranges = [dist_range(iv) for iv in ivs]
    return CertifiedInterval(max(r.lo for r in ranges), max(r.hi for r in ranges))


def torus_dist(x: Sequence[Number], p: int) -> CertifiedInterval:
    """Certified sup-norm distance from ``x`` to the nearest integer vector."""
    return torus_norm_of_intervals(approx(c, p) for c in x)


def nearest_integer(c: Number, p_cap: int | None = None) -> int:
    """The integer nearest to ``c``, certified; PrecisionExhausted on a tie."""
    c = as_constant(c)
    cap = p_cap or precision_cap()
    p = min(START_PRECISION, cap)
    while True:
        iv = approx(c, p)
        n = math.floor(iv.mid + Fraction(1, 2))
        if n - Fraction(1, 2) < iv.lo and iv.hi < n + Fraction(1, 2):
            return n
        if p >= cap:
            raise PrecisionExhausted(
                f"nearest integer to {c} not certified at {cap} bits (half-integer boundary)"
            )
        p = min(2 * p, cap)


def nearest_integer_vector(x: Sequence[Number], p_cap: int | None = None) -> tuple[int, ...]:
    return tuple(nearest_integer(c, p_cap) for c in x)


# ---------------------------------------------------------------------------
# comparison


class Ordering(enum.Enum):
    LESS = "Less"
    GREATER = "Greater"
    EQUAL = "Equal"
    UNDECIDED = "Undecided"


Producer = Callable[[int], CertifiedInterval]


def as_producer(x) -> Producer:
    if callable(x) and not isinstance(x, RealConstant):
        return x
    if isinstance(x, CertifiedInterval):
        return lambda p: x
    c = as_constant(x)
    return lambda p: approx(c, p)


def certified_compare(a, b, p_cap: int | None = None) -> Ordering:
    """Compare two refinable quantities, escalating precision by doubling."""
    fa, fb = as_producer(a), as_producer(b)
    cap = p_cap or precision_cap()
    p = min(START_PRECISION, cap)
    while True:
        ia, ib = fa(p), fb(p)
        if ia.hi < ib.lo:
            return Ordering.LESS
        if ia.lo > ib.hi:
            return Ordering.GREATER
        if ia.is_point and ib.is_point and ia.lo == ib.lo:
            return Ordering.EQUAL
        if p >= cap:
            return Ordering.UNDECIDED
        p = min(2 * p, cap)


def torus_dist_producer(x: Sequence[Number]) -> Producer:
    x = [as_constant(c) for c in x]
    return lambda p: torus_dist(x, p)


# ---------------------------------------------------------------------------
# fixed point


def fixed_point(c: Number) -> int:
    """floor(frac(c) * 2**64), taken from a certified lower bound.

    The true scaled fractional part lies in ``[F, F + 2)`` modulo 2**64.
    """
    c = as_constant(c)
    iv = fast_interval(c, FIXED_BITS + 16)
    return math.floor(iv.lo * FIXED_ONE) & FIXED_MASK


def fixed_radius(r: CertifiedInterval) -> tuple[int, int]:
    """Integer bounds (lo, hi) with lo <= r * 2**64 <= hi."""
    return math.floor(r.lo * FIXED_ONE), math.ceil(r.hi * FIXED_ONE)


def vector_fraction_mod1(x: Sequence[Fraction]) -> tuple[Fraction, ...]:
    return tuple(v - math.floor(v) for v in x)
