"""The torus lattices Z*P_k/q_k + Z^n attached to best approximations.

Everything here is exact.  A lattice is stored through the integer lattice
q_k * Lambda = Z*P_k + q_k*Z^n, so the rational basis is the integer basis
divided by q_k and all sup norms are integers over q_k.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .bestapprox import BestApproxRecord, BestApproxSequence
from .errors import (
    DegenerateLattice,
    IndexOutOfRange,
    PrecisionExhausted,
    ScaleExceeded,
)
from .numeric import (
    CertifiedInterval,
    Ordering,
    RealConstant,
    as_constant,
    certified_compare,
    fixed_point,
    fixed_radius,
    torus_dist,
)

MAX_MINIMA_DIM = 4
MAX_EXACT_COUNT_Q = 10**7
_ENUM_LIMIT = 4_000_000


# ---------------------------------------------------------------------------
# integer linear algebra


def hermite_normal_form(rows: Sequence[Sequence[int]]) -> list[list[int]]:
    """Row-style upper-triangular HNF of the lattice spanned by ``rows``.

    Returns only the nonzero rows; pivots are positive and entries above a
    pivot are reduced into [0, pivot).
    """
    A = [list(map(int, r)) for r in rows]
    ncols = len(A[0])
    r0 = 0
    for c in range(ncols):
        # gcd-combine every row at or below r0 into a single pivot row
        for i in range(r0 + 1, len(A)):
            a, b = A[r0][c], A[i][c]
            if b == 0:
                continue
            g, x, y = _xgcd(a, b)
            ua, ub = a // g, b // g
            A[r0], A[i] = (
                [x * s + y * t for s, t in zip(A[r0], A[i])],
                [-ub * s + ua * t for s, t in zip(A[r0], A[i])],
            )
        if r0 < len(A) and A[r0][c] != 0:
            if A[r0][c] < 0:
                A[r0] = [-v for v in A[r0]]
            p = A[r0][c]
            for i in range(r0):
                f = A[i][c] // p
                if f:
                    A[i] = [s - f * t for s, t in zip(A[i], A[r0])]
            r0 += 1
        if r0 == len(A):
            break
    return [row for row in A[:r0]]


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        t = a // b
        a, b = b, a - t * b
        x0, x1 = x1, x0 - t * x1
        y0, y1 = y1, y0 - t * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def _det(M: Sequence[Sequence]) -> Fraction:
    A = [[Fraction(v) for v in row] for row in M]
    n = len(A)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            if f:
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return det


def _inverse(M: Sequence[Sequence]) -> list[list[Fraction]]:
    n = len(M)
    A = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for c in range(n):
        piv = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        inv = 1 / A[c][c]
        A[c] = [v * inv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c]:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [row[n:] for row in A]


def _rank(vectors: Sequence[Sequence[int]]) -> int:
    rows = [[Fraction(v) for v in vec] for vec in vectors]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][c]:
                f = rows[r][c] / rows[rank][c]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def lll_reduce(basis: Sequence[Sequence[int]], delta: Fraction = Fraction(3, 4)) -> list[list[int]]:
    """Exact-rational LLL reduction of an integer basis (Euclidean Gram-Schmidt)."""
    b = [list(map(int, r)) for r in basis]
    n = len(b)

    def dot(u, v):
        return sum(x * y for x, y in zip(u, v))

    def gram_schmidt():
        bstar, mu = [], [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            v = [Fraction(x) for x in b[i]]
            for j in range(i):
                mu[i][j] = Fraction(dot(b[i], bstar[j])) / dot(bstar[j], bstar[j]) if bstar[j] else Fraction(0)
                v = [x - mu[i][j] * y for x, y in zip(v, bstar[j])]
            bstar.append(v)
        return bstar, mu

    bstar, mu = gram_schmidt()
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            m = round(mu[k][j])
            if m:
                b[k] = [x - m * y for x, y in zip(b[k], b[j])]
                bstar, mu = gram_schmidt()
        lhs = dot(bstar[k], bstar[k])
        rhs = (delta - mu[k][k - 1] ** 2) * dot(bstar[k - 1], bstar[k - 1])
        if lhs >= rhs:
            k += 1
        else:
            b[k], b[k - 1] = b[k - 1], b[k]
            bstar, mu = gram_schmidt()
            k = max(k - 1, 1)
    return b


def _sup(v: Sequence[int]) -> int:
    return max(abs(x) for x in v)


def _canonical(v: tuple[int, ...]) -> tuple[int, ...]:
    for x in v:
        if x:
            return v if x > 0 else tuple(-y for y in v)
    return v


# ---------------------------------------------------------------------------
# the lattice


@dataclass(frozen=True)
class Minima:
    values: tuple[Fraction, ...]
    witnesses: tuple[tuple[Fraction, ...], ...]


@dataclass(frozen=True)
class ReducedBasis:
    vectors: tuple[tuple[Fraction, ...], ...]
    ratios: tuple[Fraction, ...]  # |e_i| / lambda_i
    c_red: Fraction  # max ratio
    orthogonality: Fraction  # min over samples of |sum x_i e_i| / max |x_i e_i|
    samples: int


@dataclass(frozen=True, eq=False)
class TorusLattice:
    q: int
    P: tuple[int, ...]
    hnf: tuple[tuple[int, ...], ...]  # integer basis of q * Lambda

    @property
    def n(self) -> int:
        return len(self.P)

    @property
    def basis(self) -> list[list[Fraction]]:
        return [[Fraction(x, self.q) for x in row] for row in self.hnf]

    @cached_property
    def det(self) -> Fraction:
        return abs(_det(self.hnf)) / Fraction(self.q) ** self.n

    @cached_property
    def lll(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(r) for r in lll_reduce(self.hnf))

    @cached_property
    def minima(self) -> Minima:
        return successive_minima(self)

    def contains(self, v: Sequence[Fraction]) -> bool:
        z = [Fraction(x) * self.q for x in v]
        if any(x.denominator != 1 for x in z):
            return False
        coeffs = _solve_row(self.hnf, [int(x) for x in z])
        return coeffs is not None

    def to_json(self) -> dict:
        out = {
            "q": self.q,
            "P": list(self.P),
            "basis": [[_rat(x) for x in row] for row in self.basis],
            "det": _rat(self.det),
        }
        return out


def _rat(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _solve_row(H, z):
    """Integer coefficients c with c * H = z for upper-triangular H, else None."""
    c = []
    rest = list(z)
    for i, row in enumerate(H):
        piv = next(j for j, v in enumerate(row) if v != 0)
        if any(rest[j] for j in range(piv)):
            return None
        if rest[piv] % row[piv]:
            return None
        ci = rest[piv] // row[piv]
        c.append(ci)
        rest = [a - ci * b for a, b in zip(rest, row)]
    return c if not any(rest) else None


def build_lattice(rec) -> TorusLattice:
    """Lattice Z*P/q + Z^n for a record (or a ``(q, P)`` pair)."""
    if isinstance(rec, BestApproxRecord):
        q, P = rec.q, tuple(rec.P)
    else:
        q, P = rec
        P = tuple(int(x) for x in P)
    if q < 1:
        raise ValueError("q must be positive")
    g = math.gcd(q, *P)
    if g > 1:
        raise DegenerateLattice(f"gcd(P, q) = {g} for q = {q}, P = {P}: index below q")
    n = len(P)
    gens = [list(P)] + [[q * int(i == j) for j in range(n)] for i in range(n)]
    H = hermite_normal_form(gens)
    L = TorusLattice(q, P, tuple(tuple(r) for r in H))
    if L.det * q != 1:
        raise DegenerateLattice(f"determinant check failed: det = {L.det}, q = {q}")
    return L


# ---------------------------------------------------------------------------
# successive minima


def _short_vectors(B: Sequence[Sequence[int]], bound: int) -> np.ndarray:
    """All nonzero integer combinations of rows of B with sup norm <= bound."""
    n = len(B)
    inv = _inverse(B)
    box = [math.floor(bound * sum(abs(inv[i][j]) for i in range(n))) for j in range(n)]
    total = math.prod(2 * b + 1 for b in box)
    if total > _ENUM_LIMIT:
        raise ScaleExceeded(f"minima enumeration box has {total} points")
    grids = np.meshgrid(*[np.arange(-b, b + 1, dtype=np.int64) for b in box], indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)
    Bm = np.asarray(B, dtype=object if max(map(_sup, B)) > 2**40 else np.int64)
    V = X @ Bm
    norms = np.abs(V).max(axis=1)
    keep = (norms <= bound) & (norms > 0)
    return V[keep]


def successive_minima(L: TorusLattice) -> Minima:
    """Exact sup-norm successive minima with attaining lattice vectors."""
    n = L.n
    if n > MAX_MINIMA_DIM:
        raise ScaleExceeded(f"successive minima supported for n <= {MAX_MINIMA_DIM}, got {n}")
    B = [list(r) for r in L.lll]
    bound = max(_sup(r) for r in B)
    V = _short_vectors(B, bound)
    cands = sorted({_canonical(tuple(int(x) for x in v)) for v in V}, key=lambda v: (_sup(v), v))
    chosen: list[tuple[int, ...]] = []
    for v in cands:
        if _rank(chosen + [v]) == len(chosen) + 1:
            chosen.append(v)
            if len(chosen) == n:
                break
    if len(chosen) < n:
        raise ScaleExceeded("enumeration did not reach full rank")  # not reachable: the box holds B
    values = tuple(Fraction(_sup(v), L.q) for v in chosen)
    witnesses = tuple(tuple(Fraction(x, L.q) for x in v) for v in chosen)
    return Minima(values, witnesses)


def minkowski_bracket(L: TorusLattice) -> tuple[Fraction, Fraction, Fraction]:
    """(det/n!, prod lambda_i, det); the middle lies between the outer two."""
    prod = math.prod(L.minima.values, start=Fraction(1))
    return L.det / math.factorial(L.n), prod, L.det


def reduce_basis(L: TorusLattice, samples: int = 256, seed: int = 0) -> ReducedBasis:
    """A basis with certified ratios |e_i| / lambda_i.

    Uses the minima witnesses when they already form a basis, and the LLL
    basis (sorted by sup norm) otherwise.
    """
    mins = L.minima
    wit_int = [[int(x * L.q) for x in w] for w in mins.witnesses]
    if abs(_det(wit_int)) == abs(_det(L.hnf)):
        vecs = wit_int
    else:
        vecs = sorted((list(r) for r in L.lll), key=lambda v: (_sup(v), v))
    ratios = tuple(Fraction(_sup(v), L.q) / lam for v, lam in zip(vecs, mins.values))
    rng = random.Random(seed)
    worst = None
    n = L.n
    for _ in range(samples):
        x = [rng.randint(-8, 8) for _ in range(n)]
        if not any(x):
            continue
        combo = [sum(x[i] * vecs[i][c] for i in range(n)) for c in range(n)]
        top = max(abs(x[i]) * _sup(vecs[i]) for i in range(n))
        ratio = Fraction(_sup(combo), top)
        worst = ratio if worst is None else min(worst, ratio)
    return ReducedBasis(
        vectors=tuple(tuple(Fraction(v, L.q) for v in row) for row in vecs),
        ratios=ratios,
        c_red=max(ratios),
        orthogonality=worst if worst is not None else Fraction(1),
        samples=samples,
    )


# ---------------------------------------------------------------------------
# counting Gamma_k in torus balls


@dataclass(frozen=True)
class BallQuery:
    center: tuple[Fraction, ...]
    radius: Fraction

    def __post_init__(self):
        c = tuple(Fraction(x) % 1 for x in self.center)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", Fraction(self.radius))
        if not 0 < self.radius <= Fraction(1, 2):
            raise ValueError("torus ball radius must lie in (0, 1/2]")


@dataclass
class CountResult:
    mode: str
    lower: int
    upper: int
    witnesses: list[int] = field(default_factory=list)
    resolved: int = 0

    @property
    def exact(self) -> int | None:
        return self.lower if self.lower == self.upper else None


def _record(seq: BestApproxSequence, k: int) -> BestApproxRecord:
    if not 0 <= k < len(seq.records):
        raise IndexOutOfRange(f"k = {k} outside 0..{len(seq.records) - 1}")
    return seq.records[k]


def _gamma_dist_vs_radius(A, q, center, radius, cap) -> Ordering:
    exprs = [a * q - as_constant(c) for a, c in zip(A.entries, center)]
    return certified_compare(lambda p: torus_dist(exprs, p), CertifiedInterval.point(radius), cap)


def count_gamma_in_ball(
    seq: BestApproxSequence,
    k: int,
    B: BallQuery,
    mode: str = "exact",
    witnesses: bool = False,
    p_cap: int | None = None,
) -> CountResult:
    """Card(Gamma_k inter B) where Gamma_k = {qA mod Z^n : 0 <= q < q_k}."""
    rec = _record(seq, k)
    if mode == "exact":
        return _count_exact(seq, rec, B, witnesses, p_cap)
    if mode in ("fast", "lattice-fast"):
        return _count_fast(seq, rec, B)
    raise ValueError(f"unknown counting mode {mode!r}")


def _count_exact(seq, rec, B, want, p_cap) -> CountResult:
    if rec.q > MAX_EXACT_COUNT_Q:
        raise ScaleExceeded(f"exact counting supports q_k <= {MAX_EXACT_COUNT_Q}")
    A = seq.target
    if B.radius == Fraction(1, 2):
        ws = list(range(rec.q)) if want else []
        return CountResult("exact", rec.q, rec.q, ws)
    F = [fixed_point(a) for a in A.entries]
    G = [fixed_point(RealConstant.rational(c)) for c in B.center]
    r_lo, r_hi = fixed_radius(CertifiedInterval.point(B.radius))
    count, members, amb = kernels.ball_scan(F, G, 0, rec.q, r_lo, r_hi, want)
    inside = [int(q) for q in members] if want else []
    for q in (int(x) for x in amb):
        verdict = _gamma_dist_vs_radius(A, q, B.center, B.radius, p_cap)
        if verdict in (Ordering.LESS, Ordering.EQUAL):
            count += 1
            if want:
                inside.append(q)
        elif verdict is Ordering.UNDECIDED:
            raise PrecisionExhausted(f"point q = {q} grazes the ball boundary")
    return CountResult("exact", count, count, sorted(inside), len(amb))


def _lattice_points_in_box(H, lo: list[int], hi: list[int]) -> np.ndarray:
    """Integer points c*H (upper triangular H) with lo <= point <= hi."""
    n = len(H)
    pts = np.zeros((1, n), dtype=np.int64)
    for i, row in enumerate(H):
        piv = row[i]
        s = pts[:, i]
        c_lo = -((-(lo[i] - s)) // piv)
        c_hi = (hi[i] - s) // piv
        width = np.maximum(c_hi - c_lo + 1, 0)
        keep = width > 0
        pts, c_lo, width = pts[keep], c_lo[keep], width[keep]
        if len(pts) == 0:
            return pts
        rep = np.repeat(np.arange(len(pts)), width)
        offs = np.arange(int(width.sum())) - np.repeat(np.cumsum(width) - width, width)
        cs = c_lo[rep] + offs
        pts = pts[rep] + cs[:, None] * np.asarray(row, dtype=np.int64)[None, :]
    return pts


def lattice_points_in_ball(L: TorusLattice, center: Sequence[Fraction], radius: Fraction):
    """Residues q in [0, q_k) whose lattice point q*P/q_k lies in the closed ball.

    ``radius`` must be below 1/2 so that the ball meets each torus point once.
    """
    q = L.q
    lo = [math.ceil((Fraction(c) - radius) * q) for c in center]
    hi = [math.floor((Fraction(c) + radius) * q) for c in center]
    pts = _lattice_points_in_box(L.hnf, lo, hi)
    # recover the orbit index: sum u_i z_i = q' (mod q) where sum u_i P_i = 1 (mod q)
    u = _unit_combination(L.P, q)
    idx = (pts.astype(object) @ np.asarray(u, dtype=object)) % q if len(pts) else np.zeros(0)
    return sorted(int(v) for v in idx)


def _unit_combination(P: Sequence[int], q: int) -> list[int]:
    """Coefficients u with sum u_i P_i = 1 (mod q), by folding extended gcds."""
    u: list[int] = []
    cur = q
    for p in P:
        cur, x, y = _xgcd(cur, p)
        u = [c * x for c in u] + [y]
    return [c % q for c in u]


def _count_fast(seq, rec, B) -> CountResult:
    L = build_lattice(rec)
    rho = rec.rho_next.hi  # perturbation q*(A - P/q_k) stays below ||q_k A||
    r_in = B.radius - rho
    r_out = B.radius + rho
    lower_qs = lattice_points_in_ball(L, B.center, r_in) if r_in > 0 else []
    upper = rec.q if r_out >= Fraction(1, 2) else len(lattice_points_in_ball(L, B.center, r_out))
    return CountResult("lattice-fast", len(lower_qs), upper, lower_qs)


# ---------------------------------------------------------------------------
# counting bounds


@dataclass(frozen=True)
class BoundValue:
    value: Fraction
    alternative: Fraction
    regime: int  # i with lambda_{i-1} <= r <= lambda_i; n + 1 beyond lambda_n


def lemma1_bound(L: TorusLattice, r, C_cal=1) -> BoundValue:
    """Upper bound for Card(Gamma_k inter B(x, r)) from the minima of Lambda_k."""
    r = Fraction(r)
    C = Fraction(C_cal)
    lam = L.minima.values
    n = len(lam)
    regime = next((i for i in range(1, n + 1) if r <= lam[i - 1]), n + 1)
    prod = Fraction(1)
    for j in range(regime - 1):
        prod *= r / lam[j]
    if regime == n + 1:
        value = C * L.q * r**n
    else:
        value = C * prod
    tail = Fraction(L.q)
    for j in range(regime - 1, n):
        tail *= lam[j]
    alternative = C * tail * r ** (regime - 1)
    return BoundValue(value, alternative, regime)


@dataclass
class CalibrationSample:
    k: int
    center: tuple[Fraction, ...]
    radius: Fraction
    count: int
    bound: Fraction  # with C = 1
    alternative: Fraction
    regime: int

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.count) / self.bound

    @property
    def alt_ratio(self) -> Fraction:
        return Fraction(self.count) / self.alternative


@dataclass
class Calibration:
    c_cal: Fraction
    c_alt: Fraction
    samples: list[CalibrationSample]
    per_regime: dict[int, Fraction]
    per_regime_alt: dict[int, Fraction]


def sample_queries(seq: BestApproxSequence, count: int, seed: int, q_limit: int = 10**5,
                   denominator_bits: int = 32):
    """Seeded random (k, center, radius) triples with dyadic rational entries."""
    rng = random.Random(seed)
    ks = [r.k for r in seq.records if r.q <= q_limit]
    lattices = {k: build_lattice(seq.records[k]) for k in ks}
    den = 1 << denominator_bits
    out = []
    for _ in range(count):
        k = rng.choice(ks)
        lam1 = lattices[k].minima.values[0]
        lo = math.log(float(min(lam1, Fraction(1, 2))) / 8)
        t = rng.uniform(lo, math.log(0.5))
        r = Fraction(max(1, round(math.exp(t) * den)), den)
        r = min(r, Fraction(1, 2))
        center = tuple(Fraction(rng.randrange(den), den) for _ in range(seq.n))
        out.append((k, center, r))
    return out, lattices


def calibrate(seq: BestApproxSequence, count: int, seed: int, q_limit: int = 10**5) -> Calibration:
    """Max of exact count / bound over seeded samples; the persisted C_cal."""
    queries, lattices = sample_queries(seq, count, seed, q_limit)
    samples = []
    for k, center, r in queries:
        res = count_gamma_in_ball(seq, k, BallQuery(center, r), "exact")
        b = lemma1_bound(lattices[k], r, 1)
        samples.append(CalibrationSample(k, center, r, res.lower, b.value, b.alternative, b.regime))
    per, per_alt = {}, {}
    for s in samples:
        per[s.regime] = max(per.get(s.regime, Fraction(0)), s.ratio)
        per_alt[s.regime] = max(per_alt.get(s.regime, Fraction(0)), s.alt_ratio)
    c = max((s.ratio for s in samples), default=Fraction(0))
    c_alt = max((s.alt_ratio for s in samples), default=Fraction(0))
    return Calibration(c, c_alt, samples, per, per_alt)


def bound_violations(samples: Sequence[CalibrationSample], c_cal) -> list[CalibrationSample]:
    c = Fraction(c_cal)
    return [s for s in samples if s.count > c * s.bound]


# ---------------------------------------------------------------------------
# certified relations with the best-approximation data


def lambda1_bracket(seq: BestApproxSequence, k: int, p_cap: int | None = None) -> tuple[bool, bool]:
    """Certify rho_k - rho_{k+1} <= lambda_1 <= rho_k + rho_{k+1} (two booleans)."""
    if k < 1:
        raise IndexOutOfRange("the bracket needs k >= 1")
    rec = _record(seq, k)
    prev = seq.records[k - 1]
    lam = CertifiedInterval.point(build_lattice(rec).minima.values[0])
    A = seq.target
    d_prev = A.scaled(prev.q)
    d_cur = A.scaled(rec.q)

    def diff(p):
        return torus_dist(d_prev, p) - torus_dist(d_cur, p)

    def total(p):
        return torus_dist(d_prev, p) + torus_dist(d_cur, p)

    low_ok = certified_compare(diff, lam, p_cap) in (Ordering.LESS, Ordering.EQUAL)
    high_ok = certified_compare(lam, total, p_cap) in (Ordering.LESS, Ordering.EQUAL)
    return low_ok, high_ok


def lambda_n_envelope(seq: BestApproxSequence, q_limit: int) -> list[tuple[int, Fraction]]:
    """(q_k, running max of lambda_n over later k) for the records up to q_limit.

    A suffix maximum that decreases to zero is the finite-range form of
    lambda_{n,k} -> 0.
    """
    rows = [(r.q, build_lattice(r).minima.values[-1]) for r in seq.records if r.q <= q_limit]
    out = []
    best = Fraction(0)
    for q, lam in reversed(rows):
        best = max(best, lam)
        out.append((q, best))
    return list(reversed(out))
