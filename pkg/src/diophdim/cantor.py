"""Cantor-type subsets of B_v built from the orbit qA mod Z^n.

Level j consists of closed sup-norm balls of radius q_{k_j}^(-v), centred at
orbit points q*A with 1 <= q < q_{k_j}.  Every radius is kept symbolically as
the pair (q_{k_j}, v) with v an exact rational, so threshold tests reduce to
integer comparisons and intervals are produced on demand from integer roots.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2
import numpy as np

from . import kernels
from .bestapprox import BestApproxSequence, best_approx_sequence
from .errors import (
    CertificateFailure,
    ConfigError,
    InsufficientChildren,
    PrecisionExhausted,
    ScaleWindow,
    SequenceExhausted,
    UnknownBall,
)
from .lattice import build_lattice
from .numeric import (
    FIXED_ONE,
    CertifiedInterval,
    Ordering,
    RealConstant,
    TargetVector,
    certified_compare,
    fixed_point,
    fixed_radius,
    parse_fraction,
    precision_cap,
    scaled_interval,
    torus_dist,
    torus_norm_of_intervals,
)

CENTER_BITS = 96
RADIUS_BITS = 128
REPORT_BITS = 64  # outward rounding for persisted intervals
STRICT, RELAXED = "strict", "relaxed"
CHILD_RULE = "ascending-q"


# ---------------------------------------------------------------------------
# exact powers q^(-v)


def _root_floor(num: int, den: int, b: int) -> int:
    """floor((num/den)^(1/b)) for positive integers."""
    return int(gmpy2.iroot(gmpy2.mpz(num // den), b)[0])


def radius_interval(q: int, v: Fraction, bits: int = RADIUS_BITS, scale: Fraction = Fraction(1)) -> CertifiedInterval:
    """Certified scale * q^(-v), width <= scale * 2**-bits."""
    a, b = v.numerator, v.denominator
    if a >= 0:
        m = _root_floor(1 << (bits * b), q**a, b)
    else:
        m = _root_floor((q ** (-a)) << (bits * b), 1, b)
    lo = Fraction(m, 1 << bits)
    hi = Fraction(m + 1, 1 << bits)
    return CertifiedInterval(lo * scale, hi * scale)


def radius_producer(q: int, v: Fraction, scale: Fraction = Fraction(1)):
    return lambda p: radius_interval(q, v, max(p, 8) + 4, scale)


def power_at_most(q: int, v: Fraction, t: Fraction, scale: Fraction = Fraction(1)) -> bool:
    """Exact test of scale * q^(-v) <= t for rational t > 0 and v > 0."""
    a, b = v.numerator, v.denominator
    # (scale)^b * q^(-a) <= t^b
    return scale.numerator**b * t.denominator**b <= t.numerator**b * scale.denominator**b * q**a


def floor_children(n: int, q_next: int, q_prev: int, v: Fraction) -> int:
    """floor(2^(n-1) * q_next * q_prev^(-n v)), exactly."""
    a, b = v.numerator, v.denominator
    return _root_floor((2 ** (n - 1) * q_next) ** b, q_prev ** (n * a), b)


def growth_threshold(q_prev: int, prod_n: int, n: int, v, s, safety=1) -> int:
    """Smallest integer Q with Q >= safety * (q_prev^(n v) / prod_n)^(1/(1 - s v))."""
    v, s, safety = Fraction(v), Fraction(s), Fraction(safety)
    e = 1 / (1 - s * v)
    if e <= 0:
        raise ConfigError("s * v must be below 1")

    # Q >= safety * T^e with T = q^(nv)/prod.  Raise to the denominator D of
    # n*v*e and of e:  (Q/safety)^D >= q^(n v e D) / prod^(e D).
    nve = n * v * e
    D = math.lcm(nve.denominator, e.denominator)
    A_exp = int(nve * D)
    P_exp = int(e * D)

    def ok(Q: int) -> bool:
        lhs = (Q * safety.denominator) ** D * prod_n**P_exp
        rhs = safety.numerator**D * q_prev**A_exp
        return lhs >= rhs

    guess = float(safety) * (q_prev ** float(n * v) / prod_n) ** float(e)
    lo = max(1, int(guess * (1 - 1e-9)) - 2) if math.isfinite(guess) else 1
    while lo > 1 and ok(lo):
        lo //= 2
    hi = max(lo + 1, 2)
    while not ok(hi):
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return lo if ok(lo) else hi


def lambda_n_small_enough(lam_n: Fraction, q_prev: int, prod_n: int, n: int, v, s, safety=1) -> bool:
    """Exact test of safety * lam_n <= (q_prev^(n v) / prod_n)^(-1/(n - s))."""
    v, s, safety = Fraction(v), Fraction(s), Fraction(safety)
    x = safety * lam_n
    e = n - s
    # x^(n-s) * q^(n v) / prod <= 1; raise to D = lcm(den(e), den(n v))
    D = math.lcm(e.denominator, (n * v).denominator)
    ex = int(e * D)
    qv = int(n * v * D)
    return x.numerator**ex * q_prev**qv <= x.denominator**ex * prod_n**D


def lambda_n_threshold(q_prev: int, prod_n: int, n: int, v, s) -> float:
    """The right-hand side of the lambda_n smallness condition, for reports."""
    v, s = Fraction(v), Fraction(s)
    return float((q_prev ** float(n * v) / prod_n) ** (-1 / float(n - s)))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class CantorConfig:
    v: Fraction
    s: Fraction
    J: int
    mode: str = RELAXED
    safety: Fraction = Fraction(1)
    child_selection: str = CHILD_RULE
    min_children: int = 2
    k_list: tuple[int, ...] | None = None  # denominators q_{k_j} chosen by the user

    def __post_init__(self):
        object.__setattr__(self, "v", Fraction(self.v))
        object.__setattr__(self, "s", Fraction(self.s))
        object.__setattr__(self, "safety", Fraction(self.safety))
        if self.k_list is not None:
            object.__setattr__(self, "k_list", tuple(int(q) for q in self.k_list))

    def validate(self, n: int, omega_hat: float | None = None) -> None:
        if self.v <= 0 or self.s <= 0:
            raise ConfigError("v and s must be positive")
        if self.s * self.v >= 1:
            raise ConfigError(f"need s * v < 1, got {self.s * self.v}")
        if self.s >= n:
            raise ConfigError(f"need s < n = {n}")
        if self.J < 0:
            raise ConfigError("J must be >= 0")
        if self.mode not in (STRICT, RELAXED):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.safety < 1:
            raise ConfigError("safety factor must be >= 1")
        if self.child_selection != CHILD_RULE:
            raise ConfigError(f"unknown child selection rule {self.child_selection!r}")
        if self.min_children < 1:
            raise ConfigError("min_children must be >= 1")
        if self.mode == STRICT and omega_hat is not None and not self.v > omega_hat:
            raise ConfigError(f"strict mode needs v > estimated uniform exponent {omega_hat:.4f}")

    def to_json(self) -> dict:
        return {
            "v": _rat(self.v),
            "s": _rat(self.s),
            "J": self.J,
            "mode": self.mode,
            "safety": _rat(self.safety),
            "child_selection": self.child_selection,
            "min_children": self.min_children,
            "k_list": None if self.k_list is None else list(self.k_list),
        }

    @classmethod
    def from_json(cls, d: dict) -> "CantorConfig":
        return cls(
            v=parse_fraction(d["v"]),
            s=parse_fraction(d["s"]),
            J=d["J"],
            mode=d["mode"],
            safety=parse_fraction(d["safety"]),
            child_selection=d["child_selection"],
            min_children=d.get("min_children", 2),
            k_list=d.get("k_list"),
        )


def _rat(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# separation condition and subsequence selection


@dataclass(frozen=True)
class Condition4:
    k: int
    q: int
    holds: bool
    margin: CertifiedInterval  # rho_k * q_k^v / 4


def check_condition4(seq: BestApproxSequence, k: int, v, p_cap: int | None = None) -> Condition4:
    """Certified test of ||q_{k-1} A|| >= 4 q_k^(-v)."""
    if k < 1 or k >= len(seq.records):
        raise SequenceExhausted(f"the separation condition needs 1 <= k < {len(seq.records)}")
    v = Fraction(v)
    rec, prev = seq.records[k], seq.records[k - 1]
    prev_x = seq.target.scaled(prev.q)
    rho = lambda p: torus_dist(prev_x, p)
    four_r = radius_producer(rec.q, v, Fraction(4))
    verdict = certified_compare(rho, four_r, p_cap)
    if verdict is Ordering.UNDECIDED:
        raise PrecisionExhausted(f"the separation condition undecided at q_k = {rec.q}")
    r = radius_interval(rec.q, v)
    margin = rec.rho / (r * 4)
    return Condition4(k, rec.q, verdict in (Ordering.GREATER, Ordering.EQUAL), margin)


@dataclass
class SelectionStep:
    j: int
    k: int
    q: int
    N: int
    condition4: Condition4
    g1_required: int | None = None  # smallest admissible q for the q-growth condition
    g1_holds: bool | None = None
    g2_holds: bool | None = None
    lambda_n: Fraction | None = None
    g2_threshold: float | None = None

    def to_json(self) -> dict:
        return {
            "j": self.j,
            "k": self.k,
            "q": self.q,
            "N": self.N,
            "condition4": self.condition4.holds,
            "margin4": list(self.condition4.margin.round_out(REPORT_BITS).to_strings()),
            "g1_required_q": self.g1_required,
            "g1_holds": self.g1_holds,
            "g2_holds": self.g2_holds,
            "lambda_n": None if self.lambda_n is None else _rat(self.lambda_n),
        }


def _growth_report(step: SelectionStep, seq, prev: SelectionStep, prod_n, config, n):
    rec = seq.records[step.k]
    step.g1_required = growth_threshold(prev.q, prod_n, n, config.v, config.s, config.safety)
    step.g1_holds = rec.q >= step.g1_required
    lam_n = build_lattice(rec).minima.values[-1] if n <= 4 else None
    step.lambda_n = lam_n
    if lam_n is not None:
        step.g2_holds = lambda_n_small_enough(lam_n, prev.q, prod_n, n, config.v, config.s, config.safety)


def select_subsequence(seq: BestApproxSequence, config: CantorConfig) -> list[SelectionStep]:
    """Choose k_0 < k_1 < ... < k_J.

    relaxed: the user list, or greedily the smallest k satisfying the separation condition with
    N_{j+1} >= min_children; growth conditions are reported, not enforced.
    strict: the smallest k satisfying the separation condition and both growth conditions.
    """
    n = seq.n
    config.validate(n)
    records = seq.records
    steps: list[SelectionStep] = []
    prod_n = 1

    def cond(k):
        return check_condition4(seq, k, config.v)

    if config.k_list is not None:
        qs = list(config.k_list)
        if len(qs) < config.J + 1:
            raise ConfigError(f"k-list has {len(qs)} entries, need J + 1 = {config.J + 1}")
        for j, q in enumerate(qs[: config.J + 1]):
            try:
                k = seq.index_of(q)
            except Exception:
                raise ConfigError(f"q = {q} is not a best approximation up to {seq.q_max}") from None
            if k < 1:
                raise ConfigError("the separation condition needs k >= 1; q_0 = 1 cannot be used")
            c4 = cond(k)
            if not c4.holds:
                raise ConfigError(f"the separation condition fails at q = {q} for v = {config.v}")
            N = 1 if j == 0 else floor_children(n, q, steps[-1].q, config.v)
            step = SelectionStep(j, k, q, N, c4)
            if j > 0:
                if k <= steps[-1].k:
                    raise ConfigError("k-list must be increasing")
                if N < 1:
                    raise ConfigError(f"N_{j} = 0 for q = {q}: no room for children")
                _growth_report(step, seq, steps[-1], prod_n, config, n)
                if config.mode == STRICT and not (step.g1_holds and step.g2_holds):
                    raise ConfigError(f"q = {q} violates the strict growth conditions")
                prod_n *= N
            steps.append(step)
        return steps

    k = 1
    while True:
        if k >= len(records):
            raise SequenceExhausted("no k >= 1 satisfies the separation condition within the scanned records")
        c4 = cond(k)
        if c4.holds:
            steps.append(SelectionStep(0, k, records[k].q, 1, c4))
            break
        k += 1

    for j in range(1, config.J + 1):
        prev = steps[-1]
        if config.mode == STRICT:
            need = growth_threshold(prev.q, prod_n, n, config.v, config.s, config.safety)
        else:
            need = _min_q_for_children(n, prev.q, config.v, config.min_children)
        chosen = None
        for k in range(prev.k + 1, len(records)):
            rec = records[k]
            if rec.q < need:
                continue
            N = floor_children(n, rec.q, prev.q, config.v)
            if N < config.min_children:
                continue
            c4 = cond(k)
            if not c4.holds:
                continue
            step = SelectionStep(j, k, rec.q, N, c4)
            _growth_report(step, seq, prev, prod_n, config, n)
            if config.mode == STRICT and not (step.g1_holds and step.g2_holds):
                continue
            chosen = step
            break
        if chosen is None:
            raise SequenceExhausted(
                f"level {j}: no best approximation up to {seq.q_max} qualifies; "
                f"need q_k >= {need} (N_{j} >= {config.min_children if config.mode == RELAXED else 1})",
                required=need,
            )
        steps.append(chosen)
        prod_n *= chosen.N
    return steps


def _min_q_for_children(n: int, q_prev: int, v: Fraction, N: int) -> int:
    """Smallest q with floor(2^(n-1) q q_prev^(-n v)) >= N."""
    lo, hi = 1, 2
    while floor_children(n, hi, q_prev, v) < N:
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if floor_children(n, mid, q_prev, v) >= N:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# the tree


@dataclass(frozen=True)
class LevelRecord:
    j: int
    k: int
    q: int
    P: tuple[int, ...]
    N: int
    radius_scale: Fraction = Fraction(1)

    def radius(self, v: Fraction, bits: int = RADIUS_BITS) -> CertifiedInterval:
        return radius_interval(self.q, v, bits, self.radius_scale)

    def radius_producer(self, v: Fraction):
        return radius_producer(self.q, v, self.radius_scale)


@dataclass(frozen=True)
class Ball:
    q: int  # witness: the centre is q*A mod Z^n
    center: tuple[Fraction, ...]  # dyadic, within 2**-CENTER_BITS of the true centre
    parent: int  # index into the previous level, -1 at level 0


@dataclass
class CantorTree:
    target: TargetVector
    config: CantorConfig
    levels: list[LevelRecord]
    balls: list[list[Ball]]
    audit: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.target.dim

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def v(self) -> Fraction:
        return self.config.v

    def radius(self, j: int, bits: int = RADIUS_BITS) -> CertifiedInterval:
        return self.levels[j].radius(self.v, bits)

    def children(self, j: int, i: int) -> list[int]:
        if j + 1 >= len(self.balls):
            return []
        return [c for c, b in enumerate(self.balls[j + 1]) if b.parent == i]

    def to_json(self) -> dict:
        return {
            "alpha": self.target.texts(),
            "config": self.config.to_json(),
            "levels": [
                {
                    "j": lv.j,
                    "k": lv.k,
                    "q": lv.q,
                    "P": list(lv.P),
                    "N": lv.N,
                    "radius_scale": _rat(lv.radius_scale),
                    "radius": list(self.radius(lv.j).to_strings()),
                    "balls": [
                        {"center": [_rat(c) for c in b.center], "q": b.q, "parent": b.parent}
                        for b in self.balls[lv.j]
                    ],
                }
                for lv in self.levels
            ],
            "audit": self.audit,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CantorTree":
        target = TargetVector(tuple(RealConstant.parse(a) for a in d["alpha"]))
        config = CantorConfig.from_json(d["config"])
        levels, balls = [], []
        for lv in d["levels"]:
            levels.append(
                LevelRecord(lv["j"], lv["k"], lv["q"], tuple(lv["P"]), lv["N"], parse_fraction(lv["radius_scale"]))
            )
            balls.append(
                [Ball(b["q"], tuple(parse_fraction(c) for c in b["center"]), b["parent"]) for b in lv["balls"]]
            )
        return cls(target, config, levels, balls, d.get("audit", {}))


def dumps(obj: dict) -> str:
    """Canonical JSON text used for every persisted artifact."""
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def save_tree(tree: CantorTree, path) -> str:
    text = dumps(tree.to_json())
    with open(path, "w") as fh:
        fh.write(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_tree(path) -> CantorTree:
    with open(path) as fh:
        return CantorTree.from_json(json.load(fh))


def orbit_center(A: TargetVector, q: int) -> tuple[Fraction, ...]:
    """q*A mod Z^n rounded down to a multiple of 2**-CENTER_BITS."""
    scale = 1 << CENTER_BITS
    out = []
    for a in A.entries:
        iv = scaled_interval(a, q, CENTER_BITS + 32)
        x = math.floor(iv.lo * scale)
        if math.floor(iv.hi * scale) - x > 1:
            raise PrecisionExhausted("centre enclosure too wide")
        out.append(Fraction(x % scale, scale))
    return tuple(out)


def _orbit_difference(A: TargetVector, m: int):
    """Producer for ||m A|| as a certified interval."""
    if m == 0:
        return lambda p: CertifiedInterval.point(0)
    xs = A.scaled(m)
    return lambda p: torus_dist(xs, p)


def _fast_orbit_norm(A: TargetVector, m: int, bits: int = 128) -> CertifiedInterval:
    if m == 0:
        return CertifiedInterval.point(0)
    return torus_norm_of_intervals(scaled_interval(a, m, bits) for a in A.entries)


class _Counter:
    def __init__(self):
        self.decided = 0
        self.escalated = 0
        self.undecided = 0


def _compare_norm(A, m, bound_iv: CertifiedInterval, bound_producer, cap, counter: _Counter) -> Ordering:
    """Order ||m A|| against a bound, fast path first."""
    d = _fast_orbit_norm(A, m)
    if d.hi < bound_iv.lo:
        counter.decided += 1
        return Ordering.LESS
    if d.lo > bound_iv.hi:
        counter.decided += 1
        return Ordering.GREATER
    counter.escalated += 1
    verdict = certified_compare(_orbit_difference(A, m), bound_producer, cap)
    if verdict is Ordering.UNDECIDED:
        counter.undecided += 1
    return verdict


def _difference_producer(prod_a, prod_b):
    return lambda p: prod_a(p + 1) - prod_b(p + 1)


def _admissible_children(tree_target, v, parent: Ball, lv_parent: LevelRecord, lv_child: LevelRecord,
                         cap, counter) -> list[int]:
    """Witnesses q in [1, q_child) with B(qA, r_child) inside B(parent, r_parent), ascending."""
    A = tree_target
    bound_prod = _difference_producer(lv_parent.radius_producer(v), lv_child.radius_producer(v))
    bound = bound_prod(RADIUS_BITS)
    F = [fixed_point(a) for a in A.entries]
    # the centre of the parent is q_p * A; the kernel error model covers it.
    G = [fixed_point(a * parent.q) for a in A.entries]
    r_lo, r_hi = fixed_radius(bound)
    _, members, amb = kernels.ball_scan(F, G, 1, lv_child.q, r_lo, r_hi, True)
    inside = set(int(q) for q in members)
    counter.decided += len(inside)
    for q in (int(x) for x in amb):
        verdict = _compare_norm(A, q - parent.q, bound, bound_prod, cap, counter)
        if verdict is Ordering.UNDECIDED:
            raise PrecisionExhausted(f"inclusion of child q = {q} in parent q = {parent.q} undecidable")
        if verdict in (Ordering.LESS, Ordering.EQUAL):
            inside.add(q)
    return sorted(inside)


def build_tree(seq: BestApproxSequence, config: CantorConfig, steps: list[SelectionStep] | None = None,
               p_cap: int | None = None) -> CantorTree:
    """Populate the levels: N_{j+1} children per parent, smallest witnesses first."""
    cap = p_cap or precision_cap()
    steps = steps if steps is not None else select_subsequence(seq, config)
    A = seq.target
    levels = []
    for st in steps[: config.J + 1]:
        rec = seq.records[st.k]
        levels.append(LevelRecord(st.j, st.k, st.q, tuple(rec.P), st.N))
    counter = _Counter()
    root = Ball(1, orbit_center(A, 1), -1)
    balls = [[root]]
    for j in range(1, len(levels)):
        lv_p, lv_c = levels[j - 1], levels[j]
        layer = []
        for i, parent in enumerate(balls[j - 1]):
            qs = _admissible_children(A, config.v, parent, lv_p, lv_c, cap, counter)
            if len(qs) < lv_c.N:
                raise InsufficientChildren(i, len(qs), lv_c.N)
            layer.extend(Ball(q, orbit_center(A, q), i) for q in qs[: lv_c.N])
        balls.append(layer)
    tree = CantorTree(A, config, levels, balls)
    tree.audit = {
        "selection": [st.to_json() for st in steps[: config.J + 1]],
        "build_comparisons": {"fast": counter.decided, "escalated": counter.escalated, "undecided": counter.undecided},
    }
    return tree


def build_from_alpha(alpha, q_max: int, config: CantorConfig) -> tuple[BestApproxSequence, CantorTree]:
    seq = best_approx_sequence(alpha, q_max)
    return seq, build_tree(seq, config)


def inflate_radii(tree: CantorTree, factor, levels: Iterable[int] | None = None) -> CantorTree:
    """Copy of the tree with ball radii multiplied by ``factor`` (negative control)."""
    factor = Fraction(factor)
    which = set(range(len(tree.levels))) if levels is None else set(levels)
    new_levels = [
        replace(lv, radius_scale=lv.radius_scale * factor) if lv.j in which else lv for lv in tree.levels
    ]
    return CantorTree(tree.target, tree.config, new_levels, tree.balls, dict(tree.audit))


# ---------------------------------------------------------------------------
# the measure


@dataclass(frozen=True)
class MassMeasure:
    N: tuple[int, ...]
    sizes: tuple[int, ...]

    @classmethod
    def of(cls, tree: CantorTree) -> "MassMeasure":
        return cls(tuple(lv.N for lv in tree.levels), tuple(len(b) for b in tree.balls))

    @classmethod
    def from_counts(cls, N: Sequence[int]) -> "MassMeasure":
        sizes, prod = [], 1
        for x in N:
            prod *= x
            sizes.append(prod)
        return cls(tuple(N), tuple(sizes))

    def weight(self, j: int) -> Fraction:
        return Fraction(1, math.prod(self.N[: j + 1]))


def _parse_ball_id(ball_id) -> tuple[int, int]:
    if isinstance(ball_id, str):
        j, _, i = ball_id.partition(":")
        return int(j), int(i)
    j, i = ball_id
    return int(j), int(i)


def measure_of_ball(M: MassMeasure, ball_id) -> Fraction:
    """mu(B) = 1 / (N_0 ... N_j) for ball ``(j, i)`` or ``"j:i"``."""
    try:
        j, i = _parse_ball_id(ball_id)
    except (ValueError, TypeError):
        raise UnknownBall(f"malformed ball id {ball_id!r}") from None
    if not (0 <= j < len(M.N)) or not (0 <= i < M.sizes[j]):
        raise UnknownBall(f"no ball {ball_id!r}")
    return M.weight(j)


class BallIndex:
    """Fixed-point centre tables per level for fast intersection queries."""

    # stored centres are within 2**-96 of the truth; floor to 2**-64 adds < 1 unit
    ERR_UNITS = 4

    def __init__(self, tree: CantorTree):
        self.tree = tree
        self.tables = []
        for layer in tree.balls:
            C = np.array([[int(c * FIXED_ONE) for c in b.center] for b in layer], dtype=np.uint64)
            self.tables.append(C.reshape(len(layer), tree.n))
        self.radii = [tree.radius(j) for j in range(len(tree.levels))]

    def level_for(self, r: Fraction) -> int:
        """Shallowest level whose radius is <= r."""
        t = self.tree
        for j, lv in enumerate(t.levels):
            if power_at_most(lv.q, t.v, r, lv.radius_scale):
                return j
        return len(t.levels)

    def window_contains(self, r: Fraction) -> bool:
        """r_J <= r <= r_0, exactly."""
        t = self.tree
        return power_at_most(t.levels[-1].q, t.v, r, t.levels[-1].radius_scale) and _at_least(t.levels[0], t.v, r)

    def intersecting(self, j: int, x: Sequence[Fraction], r: Fraction, cap=None, counter=None) -> list[int]:
        """Indices of level-j balls meeting the closed ball B(x, r)."""
        t = self.tree
        counter = counter or _Counter()
        lv = t.levels[j]
        reach = self.radii[j] + r
        lo, hi = fixed_radius(reach)
        xf = [int((Fraction(c) % 1) * FIXED_ONE) for c in x]
        hits, amb = kernels.ball_hits(self.tables[j], xf, lo, hi, self.ERR_UNITS)
        out = [int(h) for h in hits]
        counter.decided += len(out)
        rp = lv.radius_producer(t.v)
        for idx in (int(a) for a in amb):
            b = t.balls[j][idx]
            xs = [a * b.q - RealConstant.rational(c) for a, c in zip(t.target.entries, x)]
            counter.escalated += 1
            verdict = certified_compare(
                lambda p: torus_dist(xs, p), lambda p: rp(p + 1) + CertifiedInterval.point(r), cap
            )
            if verdict is Ordering.UNDECIDED:
                counter.undecided += 1
                raise PrecisionExhausted(f"ball {j}:{idx} grazes the query ball")
            if verdict in (Ordering.LESS, Ordering.EQUAL):
                out.append(idx)
        return sorted(out)


def _radius_le(a: LevelRecord, b: LevelRecord, v: Fraction) -> bool:
    """scale_a * q_a^(-v) <= q_b^(-v) (unit scale at b), exactly."""
    num, den = v.numerator, v.denominator
    s = a.radius_scale
    return s.numerator**den * b.q**num <= s.denominator**den * a.q**num


def _at_least(lv: LevelRecord, v: Fraction, r: Fraction) -> bool:
    """scale * q^(-v) >= r, exactly."""
    a, b = v.numerator, v.denominator
    s = lv.radius_scale
    return s.numerator**b * r.denominator**b >= r.numerator**b * s.denominator**b * lv.q**a


def mu_upper(M: MassMeasure, tree: CantorTree, x: Sequence[Fraction], r, index: BallIndex | None = None) -> Fraction:
    """Sum of mu over the balls of the first level with radius <= r that meet B(x, r)."""
    r = Fraction(r)
    index = index or BallIndex(tree)
    lv0, lvJ = tree.levels[0], tree.levels[-1]
    if not power_at_most(lvJ.q, tree.v, r, lvJ.radius_scale) or not _at_least(lv0, tree.v, r):
        raise ScaleWindow(f"r = {r} outside the tree window [r_J, r_0]")
    j = index.level_for(r)
    return len(index.intersecting(j, x, r)) * M.weight(j)


# ---------------------------------------------------------------------------
# certificates


@dataclass
class MembershipReport:
    levels: int
    balls_checked: int
    worst_margin: list[CertifiedInterval]  # per level: min of bound / (distance + radius)
    escalated: int
    undecided: int

    def to_json(self) -> dict:
        return {
            "levels": self.levels,
            "balls_checked": self.balls_checked,
            "worst_margin": [list(m.round_out(REPORT_BITS).to_strings()) for m in self.worst_margin],
            "escalated": self.escalated,
            "undecided": self.undecided,
        }


def _ancestors(tree: CantorTree, i: int) -> list[Ball]:
    """Chain of balls from the root down to deepest ball i."""
    chain = []
    j = tree.depth
    while j >= 0:
        b = tree.balls[j][i]
        chain.append(b)
        i = b.parent
        j -= 1
    return chain[::-1]


def verify_membership(tree: CantorTree, p_cap: int | None = None) -> MembershipReport:
    """Certify ||q^(j) A - y|| <= q_{k_j}^(-v) <= (q^(j))^(-v) for every point y of
    every deepest ball and every ancestor witness q^(j).

    Checked as ||(q^(j) - q) A|| + R <= q_{k_j}^(-v), with q and R the deepest
    ball's witness and stored radius.
    """
    cap = p_cap or precision_cap()
    v = tree.v
    counter = _Counter()
    J = tree.depth
    R_prod = tree.levels[J].radius_producer(v)
    R = R_prod(RADIUS_BITS)
    worst: list[CertifiedInterval | None] = [None] * (J + 1)
    for i, leaf in enumerate(tree.balls[J]):
        for j, anc in enumerate(_ancestors(tree, i)):
            lv = tree.levels[j]
            plain = radius_producer(lv.q, v)
            bound_iv = plain(RADIUS_BITS)
            m = anc.q - leaf.q
            lhs_fast = _fast_orbit_norm(tree.target, m) + R
            if m == 0:
                # same witness: R_J <= r_j is a comparison of exact powers
                counter.decided += 1
                ok = _radius_le(tree.levels[J], lv, v)
            elif lhs_fast.hi <= bound_iv.lo:
                counter.decided += 1
                ok = True
            else:
                counter.escalated += 1
                lhs = lambda p, m=m: _orbit_difference(tree.target, m)(p + 1) + R_prod(p + 1)
                verdict = certified_compare(lhs, plain, cap)
                if verdict is Ordering.UNDECIDED:
                    counter.undecided += 1
                    raise CertificateFailure(f"membership undecided for ball {J}:{i} at level {j}",
                                             ball=(J, i), level=j)
                ok = verdict in (Ordering.LESS, Ordering.EQUAL)
            if not ok:
                raise CertificateFailure(
                    f"ball {J}:{i} is not within q_(k_{j})^(-v) of witness q = {anc.q}", ball=(J, i), level=j
                )
            own = radius_interval(anc.q, v) if anc.q > 1 else CertifiedInterval.point(1)
            margin = own / lhs_fast if lhs_fast.lo > 0 else None
            if margin is not None and (worst[j] is None or margin.lo < worst[j].lo):
                worst[j] = margin
    return MembershipReport(
        J + 1,
        len(tree.balls[J]),
        [w if w is not None else CertifiedInterval.point(0) for w in worst],
        counter.escalated,
        counter.undecided,
    )


@dataclass
class StructureReport:
    ball_counts_ok: bool
    mass_ok: bool
    centers_ok: bool
    nesting_ok: bool
    disjoint_ok: bool
    condition4_ok: bool
    pairs_checked: int
    escalated: int
    undecided: int
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures and self.undecided == 0

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in (
            "ball_counts_ok", "mass_ok", "centers_ok", "nesting_ok", "disjoint_ok", "condition4_ok",
            "pairs_checked", "escalated", "undecided", "failures")} | {"passed": self.passed}


def _grid_cells(centers: list[tuple[Fraction, ...]], side: Fraction) -> tuple[int, dict]:
    M = max(1, math.floor(1 / side))
    cells: dict[tuple[int, ...], list[int]] = {}
    for idx, c in enumerate(centers):
        key = tuple(math.floor(x * M) % M for x in c)
        cells.setdefault(key, []).append(idx)
    return M, cells


def _neighbour_pairs(centers, side: Fraction):
    """Index pairs whose centres might be within ``side`` of each other on the torus."""
    M, cells = _grid_cells(centers, side)
    n = len(centers[0]) if centers else 0
    seen = set()
    offsets = list(np.ndindex(*([3] * n)))
    for key, members in cells.items():
        for off in offsets:
            nb = tuple((k + o - 1) % M for k, o in zip(key, off))
            other = cells.get(nb)
            if not other:
                continue
            for a in members:
                for b in other:
                    if a < b and (a, b) not in seen:
                        seen.add((a, b))
    return sorted(seen)


def verify_structure(tree: CantorTree, p_cap: int | None = None) -> StructureReport:
    """Ball counts, exact mass sums, centre certificates, nesting and disjointness."""
    cap = p_cap or precision_cap()
    A, v = tree.target, tree.v
    counter = _Counter()
    failures = []
    M = MassMeasure.of(tree)

    prod = 1
    counts_ok = tree.levels[0].N == 1 and len(tree.balls[0]) == 1
    for j, lv in enumerate(tree.levels):
        prod *= lv.N
        counts_ok &= len(tree.balls[j]) == prod
    if not counts_ok:
        failures.append("ball counts differ from the product of N_j")

    mass_ok = True
    for j in range(len(tree.levels)):
        w = M.weight(j)
        if w * len(tree.balls[j]) != 1:
            mass_ok = False
        if j + 1 < len(tree.levels):
            for i in range(len(tree.balls[j])):
                if len(tree.children(j, i)) * M.weight(j + 1) != w:
                    mass_ok = False
    if not mass_ok:
        failures.append("mass conservation failed")

    centers_ok = True
    tol = Fraction(1, 1 << 64)
    for j, layer in enumerate(tree.balls):
        q_k = tree.levels[j].q
        for b in layer:
            if not 1 <= b.q < q_k:
                centers_ok = False
            exact = orbit_center(A, b.q)
            if any(abs(x - y) > tol for x, y in zip(exact, b.center)):
                centers_ok = False
    if not centers_ok:
        failures.append("stored centres do not match their witnesses")

    nesting_ok = True
    for j in range(1, len(tree.levels)):
        lv_p, lv_c = tree.levels[j - 1], tree.levels[j]
        bound_prod = _difference_producer(lv_p.radius_producer(v), lv_c.radius_producer(v))
        bound = bound_prod(RADIUS_BITS)
        for b in tree.balls[j]:
            parent = tree.balls[j - 1][b.parent]
            verdict = _compare_norm(A, b.q - parent.q, bound, bound_prod, cap, counter)
            if verdict not in (Ordering.LESS, Ordering.EQUAL):
                nesting_ok = False
    if not nesting_ok:
        failures.append("a child ball is not inside its parent")

    disjoint_ok = True
    pairs = 0
    for j, layer in enumerate(tree.balls):
        if len(layer) < 2:
            continue
        lv = tree.levels[j]
        two_r = lv.radius(v) * 2
        side = two_r.hi + Fraction(1, 1 << 90)
        two_r_prod = lambda p, lv=lv: lv.radius_producer(v)(p + 1) * 2
        for a, b in _neighbour_pairs([x.center for x in layer], side):
            pairs += 1
            verdict = _compare_norm(A, layer[a].q - layer[b].q, two_r, two_r_prod, cap, counter)
            if verdict is not Ordering.GREATER:
                disjoint_ok = False
    if not disjoint_ok:
        failures.append("two balls of one level are not disjoint")

    # rho_{k_j} >= 4 q_{k_j}^(-v) > 2 r_j is the proof-level reason for disjointness
    cond_ok = all(_condition4_from_level(A, lv, v, cap) for lv in tree.levels)
    if not cond_ok:
        failures.append("the separation condition fails at a selected level")

    return StructureReport(counts_ok, mass_ok, centers_ok, nesting_ok, disjoint_ok, cond_ok, pairs,
                           counter.escalated, counter.undecided, failures)


def _condition4_from_level(A: TargetVector, lv: LevelRecord, v: Fraction, cap) -> bool:
    """The separation condition at q_{k_j}, with the previous best approximation recomputed by a scan."""
    seq = best_approx_sequence(A, lv.q)
    if seq.records[-1].q != lv.q or len(seq.records) < 2:
        return False
    return check_condition4(seq, len(seq.records) - 1, v, cap).holds


# ---------------------------------------------------------------------------
# sampled mass-distribution audit


def _pow_interval(r: Fraction, s: Fraction, bits: int = 96) -> CertifiedInterval:
    """Certified r^s = exp(s log r); each step is monotone, so directed rounding is sound."""
    rq = gmpy2.mpq(r.numerator, r.denominator)
    sq = gmpy2.mpq(s.numerator, s.denominator)
    ends = []
    for mode in (gmpy2.RoundDown, gmpy2.RoundUp):
        with gmpy2.context(precision=bits, round=mode):
            ends.append(Fraction(gmpy2.mpq(gmpy2.exp(gmpy2.log(rq) * sq))))
    return CertifiedInterval(*ends)


@dataclass
class Lemma2Sample:
    x: tuple[Fraction, ...]
    r: Fraction
    level: int
    mass: Fraction
    ratio: CertifiedInterval
    regime: str
    near: bool


@dataclass
class Lemma2Report:
    samples: int
    seed: int
    max_ratio: CertifiedInterval
    argmax: int
    per_regime: dict[str, CertifiedInterval]
    per_regime_counts: dict[str, int]
    zero_far: int
    escalated: int
    records: list[Lemma2Sample] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "seed": self.seed,
            "generator": "python-random-mt19937",
            "max_ratio": list(self.max_ratio.round_out(REPORT_BITS).to_strings()),
            "argmax": self.argmax,
            "per_regime": {k: list(v.round_out(REPORT_BITS).to_strings()) for k, v in sorted(self.per_regime.items())},
            "per_regime_counts": dict(sorted(self.per_regime_counts.items())),
            "zero_mass_far_samples": self.zero_far,
            "escalated": self.escalated,
        }


def _regime(tree: CantorTree, level: int, r: Fraction, minima_cache: dict) -> str:
    """Mass-ratio regime for r + r_level against the minima of the level lattice."""
    if level == 0:
        return "root"
    lv = tree.levels[level]
    if lv.q not in minima_cache:
        minima_cache[lv.q] = build_lattice((lv.q, lv.P)).minima.values
    lam = minima_cache[lv.q]
    t = tree.radius(level) + CertifiedInterval.point(r)
    if t.hi <= lam[0]:
        return "i=0"
    for i in range(1, len(lam)):
        if lam[i - 1] <= t.lo and t.hi <= lam[i]:
            return f"i={i}"
    if t.lo >= lam[-1]:
        return "i=n"
    return "boundary"


def sample_window_radius(rng: random.Random, tree: CantorTree, index: BallIndex) -> Fraction:
    lo = math.log(float(tree.radius(tree.depth).hi))
    hi = math.log(float(tree.radius(0).lo))
    den = 1 << 80
    while True:
        if hi - lo < 1e-12:
            r = tree.radius(0).hi
            r = Fraction(math.ceil(r * den), den)
        else:
            r = Fraction(max(1, round(math.exp(rng.uniform(lo, hi)) * den)), den)
        if index.window_contains(r):
            return r


def verify_lemma2(tree: CantorTree, M: MassMeasure, sample_count: int, seed: int,
                  near_fraction: float = 0.5, keep_records: bool = False) -> Lemma2Report:
    """Sample mu_upper(x, r) / r^s over the scale window; report the maximum."""
    rng = random.Random(seed)
    index = BallIndex(tree)
    counter = _Counter()
    s = tree.config.s
    deepest = tree.balls[-1]
    den = 1 << 64
    minima_cache: dict = {}
    best = None
    argmax = -1
    per: dict[str, CertifiedInterval] = {}
    per_n: dict[str, int] = {}
    zero_far = 0
    records = []
    for t in range(sample_count):
        r = sample_window_radius(rng, tree, index)
        near = rng.random() < near_fraction
        if near:
            b = deepest[rng.randrange(len(deepest))]
            spread = 2 * float(r)
            x = tuple(
                Fraction(round(((float(c) + rng.uniform(-spread, spread)) % 1.0) * den) % den, den) for c in b.center
            )
        else:
            x = tuple(Fraction(rng.randrange(den), den) for _ in range(tree.n))
        level = index.level_for(r)
        hits = index.intersecting(level, x, r, counter=counter)
        mass = len(hits) * M.weight(level)
        if mass == 0:
            ratio = CertifiedInterval.point(0)
            if not near:
                zero_far += 1
        else:
            rs = _pow_interval(r, s)
            ratio = CertifiedInterval(mass / rs.hi, mass / rs.lo)
        regime = _regime(tree, level, r, minima_cache)
        per_n[regime] = per_n.get(regime, 0) + 1
        if regime not in per or ratio.lo > per[regime].lo:
            per[regime] = ratio
        if best is None or ratio.lo > best.lo:
            best, argmax = ratio, t
        if keep_records:
            records.append(Lemma2Sample(x, r, level, mass, ratio, regime, near))
    return Lemma2Report(sample_count, seed, best or CertifiedInterval.point(0), argmax, per, per_n, zero_far,
                        counter.escalated, records)
