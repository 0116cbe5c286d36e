"""Box-counting estimates over a tree's scale window.

Boxes at scale r are the cells of the dyadic torus grid with side 2r, so
that a ball of radius r has the size of a box.  Grids use r = 2^(-t-1);
nested grids make N(r) nonincreasing in r by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .cantor import CantorTree, power_at_most, _at_least
from .errors import InsufficientData, PrecisionExhausted, ScaleWindow
from .exponents import bound_eq3
from .numeric import CertifiedInterval, fraction_to_decimal, scaled_interval

CenterFn = Callable[[int, int], list[CertifiedInterval]]


@dataclass
class BallUnion:
    """A finite union of equal closed sup-norm balls on the torus."""

    n: int
    count: int
    center: CenterFn  # (index, bits) -> per-coordinate enclosures
    radius: Callable[[int], CertifiedInterval]  # bits -> enclosure
    r_min: Fraction
    r_max: Fraction

    @classmethod
    def from_tree(cls, tree: CantorTree, depth: int | None = None) -> "BallUnion":
        J = tree.depth if depth is None else depth
        balls = tree.balls[J]
        A = tree.target

        def center(i, bits):
            return [scaled_interval(a, balls[i].q, bits) for a in A.entries]

        r_min = tree.radius(J).hi
        r_max = tree.radius(0).lo
        return cls(tree.n, len(balls), center, lambda bits: tree.radius(J, bits), r_min, r_max)

    def in_window(self, r: Fraction) -> bool:
        return self.r_min <= r <= self.r_max


def tree_window_contains(tree: CantorTree, r: Fraction, depth: int | None = None) -> bool:
    J = tree.depth if depth is None else depth
    lv0, lvJ = tree.levels[0], tree.levels[J]
    return power_at_most(lvJ.q, tree.v, r, lvJ.radius_scale) and _at_least(lv0, tree.v, r)


def dyadic_grid(r_min: Fraction, r_max: Fraction, points: int | None = None) -> list[Fraction]:
    """Radii 2^(-t-1) inside [r_min, r_max], descending in r, thinned to ``points``."""
    if r_min > r_max:
        return []
    t = 0
    while Fraction(1, 2 ** (t + 1)) > r_max:
        t += 1
    ts = []
    while Fraction(1, 2 ** (t + 1)) >= r_min:
        ts.append(t)
        t += 1
    if points is not None and len(ts) > points >= 2:
        picks = sorted({round(i * (len(ts) - 1) / (points - 1)) for i in range(points)})
        ts = [ts[i] for i in picks]
    return [Fraction(1, 2 ** (t + 1)) for t in ts]


def _floor_certain(x: CertifiedInterval, M: int) -> int | None:
    a, b = math.floor(x.lo * M), math.floor(x.hi * M)
    return a if a == b else None


def _ceil_certain(x: CertifiedInterval, M: int) -> int | None:
    a, b = math.ceil(x.lo * M), math.ceil(x.hi * M)
    return a if a == b else None


def _cell_range(union: BallUnion, i: int, coord: int, M: int) -> list[int]:
    """Grid indices (mod M) met by the open i-th ball along one coordinate.

    Open balls keep a ball whose edge sits on a grid line from claiming the
    neighbouring cell; the closure has the same box dimension.
    """
    for bits in (96, 160, 256):
        c = union.center(i, bits)[coord]
        R = union.radius(bits)
        lo = _floor_certain(c - R, M)
        hi = _ceil_certain(c + R, M)
        if lo is not None and hi is not None:
            hi -= 1
            break
    else:
        raise PrecisionExhausted(f"ball {i} touches a grid line at resolution {M}")
    if hi - lo + 1 >= M:
        return list(range(M))
    return [k % M for k in range(lo, hi + 1)]


def count_boxes(union: BallUnion, r: Fraction) -> int:
    """Number of side-2r dyadic grid cells meeting the (open) union."""
    M = Fraction(1) / (2 * r)
    if M.denominator != 1:
        raise ValueError("box counting uses dyadic radii r = 2^(-t-1)")
    M = int(M)
    cells = set()
    for i in range(union.count):
        ranges = [_cell_range(union, i, c, M) for c in range(union.n)]
        partial = [()]
        for rg in ranges:
            partial = [p + (k,) for p in partial for k in rg]
        cells.update(partial)
    return len(cells)


def box_count(tree_or_union, r_grid: Sequence[Fraction], depth: int | None = None) -> list[tuple[Fraction, int]]:
    """(r, N(r)) for every grid radius inside the window [r_J, r_0]."""
    if isinstance(tree_or_union, CantorTree):
        union = BallUnion.from_tree(tree_or_union, depth)
        inside = lambda r: tree_window_contains(tree_or_union, r, depth)
    else:
        union = tree_or_union
        inside = union.in_window
    out = []
    for r in r_grid:
        r = Fraction(r)
        if not inside(r):
            raise ScaleWindow(f"r = {r} lies outside the scale window")
        out.append((r, count_boxes(union, r)))
    return out


@dataclass
class DimensionEstimate:
    slope: float
    intercept: float
    residuals: list[float]
    max_residual: float
    points: int
    decades: float
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "slope": report_decimal(self.slope),
            "intercept": report_decimal(self.intercept),
            "residuals": [report_decimal(x) for x in self.residuals],
            "max_residual": report_decimal(self.max_residual),
            "points": self.points,
            "decades": report_decimal(self.decades),
            "flags": list(self.flags),
        }


def report_decimal(x: float, bits: int = 40) -> str:
    """A fitted float as the exact decimal of the nearest multiple of 2^-bits."""
    return fraction_to_decimal(Fraction(round(x * 2**bits), 2**bits))


def dim_estimate(samples: Sequence[tuple[Fraction, int]]) -> DimensionEstimate:
    """Least-squares slope of log N(r) against log(1/r)."""
    pts = [(math.log(1 / float(r)), math.log(N)) for r, N in samples if N > 0]
    if len(pts) < 2:
        raise InsufficientData(f"need at least two scales, got {len(pts)}")
    xs, ys = zip(*pts)
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise InsufficientData("all scales coincide")
    slope = sum((x - mx) * (y - my) for x, y in pts) / sxx
    intercept = my - slope * mx
    res = [y - (intercept + slope * x) for x, y in pts]
    decades = (max(xs) - min(xs)) / math.log(10)
    flags = []
    if len(pts) < 4:
        flags.append("fewer than 4 scales")
    if decades < 2:
        flags.append("window spans fewer than 2 decades")
    return DimensionEstimate(slope, intercept, res, max(abs(e) for e in res), len(pts), decades, flags)


# ---------------------------------------------------------------------------
# synthetic oracle


def dyadic_dust(depth: int, n: int = 1, ratio_exp: int = 2) -> BallUnion:
    """Self-similar dust: keep digits {0, 2} in base 4 (per coordinate).

    Level ``depth`` has 2^(n*depth) closed cubes of side 4^(-depth); the limit
    set has dimension n/2.
    """
    base = 2**ratio_exp
    side = Fraction(1, base**depth)
    offsets = [Fraction(0)]
    for m in range(1, depth + 1):
        step = Fraction(1, base**m)
        offsets = [o + d * step for o in offsets for d in (0, 2)]
    half = side / 2
    pts = [()]
    for _ in range(n):
        pts = [p + (o + half,) for p in pts for o in offsets]

    def center(i, bits):
        return [CertifiedInterval.point(x) for x in pts[i]]

    r = CertifiedInterval.point(half)
    return BallUnion(n, len(pts), center, lambda bits: r, half, Fraction(1, 2))


# ---------------------------------------------------------------------------
# mass distribution bookkeeping


@dataclass
class MassDistributionRecord:
    s: Fraction
    v: Fraction
    n: int
    C_emp: CertifiedInterval | None
    lower: Fraction
    upper: Fraction
    target: Fraction
    statement: list[str]

    def to_json(self) -> dict:
        def rat(x):
            return f"{x.numerator}/{x.denominator}"
        return {
            "s": rat(self.s),
            "v": rat(self.v),
            "n": self.n,
            "C_emp": None if self.C_emp is None else list(self.C_emp.round_out(64).to_strings()),
            "lower_sampled": rat(self.lower),
            "upper": rat(self.upper),
            "target": rat(self.target),
            "statement": self.statement,
        }


def mass_lower_bound(C_emp, s, v=None, n: int = 1) -> MassDistributionRecord:
    """Record the sampled-evidence chain: mu(B(x,r)) <= C r^s  =>  dim >= s.

    Paired with the upper bound min(n, 1/v); their common limit as s -> 1/v
    is the target min(n, 1/v).
    """
    s = Fraction(s)
    v = Fraction(v) if v is not None else 1 / s
    upper = bound_eq3(v, n, 1)
    finite = C_emp is not None
    stmt = [
        f"sampled ratios mu(B(x,r)) / r^s stay below C_emp{'' if finite else ' (not available)'}",
        f"mass distribution principle at the sampled scales: dimension >= s = {s}",
        f"upper bound min(n, 1/v) = {upper}",
        "letting s increase to 1/v gives the target min(n, 1/v)",
        "evidence is finite sampling, not a proof",
    ]
    return MassDistributionRecord(s, v, n, C_emp, s, upper, upper, stmt)
