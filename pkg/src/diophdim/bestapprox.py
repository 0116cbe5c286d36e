"""Best simultaneous approximations to a column vector A.

A positive integer q is a best approximation when ||pA|| > ||qA|| for every
0 < p < q.  The sequence starts at q_0 = 1.  The scan is exhaustive and
certified: the fixed-point kernels decide almost every q, and the handful of
close calls are settled by :func:`diophdim.numeric.certified_compare`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import kernels
from .errors import (
    IndexOutOfRange,
    PrecisionExhausted,
    RationalDependenceDetected,
    ScaleExceeded,
)
from .numeric import (
    CertifiedInterval,
    Ordering,
    RealConstant,
    TargetVector,
    approx,
    as_constant,
    certified_compare,
    fixed_point,
    precision_cap,
    scaled_interval,
    torus_dist,
    torus_norm_of_intervals,
)

MAX_SCAN = 10**7
RECORD_BITS = 128


@dataclass(frozen=True)
class BestApproxRecord:
    k: int
    q: int
    P: tuple[int, ...]
    rho_next: CertifiedInterval  # ||q_k A||
    rho: CertifiedInterval | None  # ||q_{k-1} A||, None for k = 0


@dataclass
class BestApproxSequence:
    target: TargetVector
    records: list[BestApproxRecord]
    q_max: int
    source: str = "scan"

    def __len__(self):
        return len(self.records)

    def __getitem__(self, k) -> BestApproxRecord:
        return self.records[k]

    @property
    def qs(self) -> list[int]:
        return [r.q for r in self.records]

    @property
    def n(self) -> int:
        return self.target.dim

    def index_of(self, q: int) -> int:
        for rec in self.records:
            if rec.q == q:
                return rec.k
        raise IndexOutOfRange(f"{q} is not a best approximation in this sequence")

    def to_json(self) -> dict:
        out = []
        for r in self.records:
            d_lo, d_hi = r.rho_next.to_strings()
            entry = {"k": r.k, "q": r.q, "P": list(r.P)}
            if r.rho is None:
                entry["rho_lo"] = entry["rho_hi"] = None
            else:
                entry["rho_lo"], entry["rho_hi"] = r.rho.to_strings()
            entry["dist_lo"], entry["dist_hi"] = d_lo, d_hi
            out.append(entry)
        return {
            "alpha": self.target.texts(),
            "qmax": self.q_max,
            "source": self.source,
            "records": out,
        }

    @classmethod
    def from_json(cls, data: dict) -> "BestApproxSequence":
        target = TargetVector(tuple(RealConstant.parse(a) for a in data["alpha"]))
        records = []
        for e in data["records"]:
            rho = None
            if e.get("rho_lo") is not None:
                rho = CertifiedInterval(Fraction(e["rho_lo"]), Fraction(e["rho_hi"]))
            nxt = CertifiedInterval(Fraction(e["dist_lo"]), Fraction(e["dist_hi"]))
            records.append(BestApproxRecord(e["k"], e["q"], tuple(e["P"]), nxt, rho))
        return cls(target, records, data["qmax"], data.get("source", "scan"))


# ---------------------------------------------------------------------------
# certified running-minimum scan


def _offset_exprs(A: TargetVector, q: int, beta) -> list[RealConstant]:
    if beta is None:
        return A.scaled(q)
    return [a * q - b for a, b in zip(A.entries, beta)]


def _exact_integer(c: RealConstant) -> bool:
    lf = c.linear_form()
    if lf is None or set(lf) - {1}:
        return False
    return lf.get(1, Fraction(0)).denominator == 1


def _same_distance(xs, ys) -> bool:
    """Coordinatewise equal torus distances, decided symbolically."""
    return all(_exact_integer(x - y) or _exact_integer(x + y) for x, y in zip(xs, ys))


def _dist_producer(exprs):
    return lambda p: torus_dist(exprs, p)


@dataclass
class MinimaScan:
    """Result of a running-minimum scan of ||qA - beta|| over a q range."""

    records: list[int]
    exact_hits: list[int] = field(default_factory=list)
    resolved: int = 0  # ambiguous kernel outcomes settled at high precision


def running_minima(
    A: TargetVector,
    q_first: int,
    q_last: int,
    beta: Sequence[RealConstant] | None = None,
    p_cap: int | None = None,
) -> MinimaScan:
    """All q in [q_first, q_last] where ||qA - beta|| reaches a new strict minimum.

    A q with ||qA - beta|| exactly zero (only possible once, for beta in the
    orbit) is reported in ``exact_hits`` and left out of the competition.
    """
    cap = p_cap or precision_cap()
    F = [fixed_point(a) for a in A.entries]
    G = [0] * A.dim if beta is None else [fixed_point(b) for b in beta]
    out = MinimaScan(records=[])
    seg_start = q_first
    seg_carry = (kernels.U64_MAX, kernels.U64_MAX)
    while seg_start <= q_last:
        rec, amb, _, _ = kernels.record_scan(F, G, seg_start, q_last + 1, *seg_carry)
        events = sorted([(int(q), True) for q in rec] + [(int(q), False) for q in amb])
        restart = None
        for q, certain in events:
            exprs = _offset_exprs(A, q, beta)
            prev = None
            if certain or not out.records:
                verdict = Ordering.LESS
            else:
                out.resolved += 1
                prev = _offset_exprs(A, out.records[-1], beta)
                verdict = certified_compare(_dist_producer(exprs), _dist_producer(prev), cap)
            if verdict is Ordering.UNDECIDED and prev and _same_distance(exprs, prev):
                verdict = Ordering.EQUAL  # mirror images around an exact hit
            if verdict in (Ordering.GREATER, Ordering.EQUAL):
                continue
            if verdict is Ordering.UNDECIDED and not all(_exact_integer(e) for e in exprs):
                raise PrecisionExhausted(
                    f"cannot separate ||{q}A - beta|| from the running minimum at {cap} bits"
                )
            if beta is not None and all(_exact_integer(e) for e in exprs):
                restart = q
                break
            if verdict is Ordering.UNDECIDED:
                raise RationalDependenceDetected(f"||{q} A|| is exactly zero")
            out.records.append(q)
        if restart is None:
            break
        # recompute the carry just before the exact hit, then skip it
        _, _, clo, chi = kernels.record_scan(F, G, seg_start, restart, *seg_carry)
        out.exact_hits.append(restart)
        seg_start, seg_carry = restart + 1, (clo, chi)
    return out


# ---------------------------------------------------------------------------
# records


def _nearest_from_intervals(exprs, cap) -> tuple[int, ...]:
    out = []
    for c in exprs:
        bits = 96
        while True:
            iv = approx(c, bits) if c.exact is None else CertifiedInterval.point(c.exact)
            n = math.floor(iv.mid + Fraction(1, 2))
            if n - Fraction(1, 2) < iv.lo and iv.hi < n + Fraction(1, 2):
                out.append(n)
                break
            if bits >= cap:
                raise PrecisionExhausted(f"nearest integer to {c} is a tie at {cap} bits")
            bits = min(2 * bits, cap)
    return tuple(out)


def distance_interval(A: TargetVector, q: int, bits: int = RECORD_BITS) -> CertifiedInterval:
    """Certified ||qA|| of width <= 2**-bits (bulk path, not nested)."""
    return torus_norm_of_intervals(scaled_interval(a, q, bits) for a in A.entries)


def _build_records(A: TargetVector, qs: list[int], cap: int) -> list[BestApproxRecord]:
    records = []
    prev = None
    for k, q in enumerate(qs):
        P = _nearest_from_intervals(A.scaled(q), max(cap, 256))
        d = distance_interval(A, q)
        records.append(BestApproxRecord(k, q, P, d, prev))
        prev = d
    return records


def best_approx_sequence(A, q_max: int, p_cap: int | None = None) -> BestApproxSequence:
    """Exhaustive certified list of all best approximations q_k <= q_max."""
    A = A if isinstance(A, TargetVector) else TargetVector.parse(A)
    A.require_irrational()
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    cap = p_cap or precision_cap()
    if q_max > MAX_SCAN:
        if A.dim >= 2:
            raise ScaleExceeded(
                f"q_max = {q_max} exceeds the supported scan scale {MAX_SCAN} for n >= 2"
            )
        qs = cf_denominators(A.entries[0], q_max)
        return BestApproxSequence(A, _build_records(A, qs, cap), q_max, "continued-fraction")
    scan = running_minima(A, 1, q_max, None, cap)
    return BestApproxSequence(A, _build_records(A, scan.records, cap), q_max)


def rho(seq: BestApproxSequence, k: int) -> CertifiedInterval:
    """rho_k = min_{0<q<q_k} ||qA|| = ||q_{k-1} A||."""
    if k < 1 or k >= len(seq.records):
        raise IndexOutOfRange(f"rho_k needs 1 <= k < {len(seq.records)}, got {k}")
    return seq.records[k].rho


# ---------------------------------------------------------------------------
# continued fractions (independent oracle for n = 1)


def _cf_expansion(x: Fraction) -> list[int]:
    out = []
    while True:
        a = math.floor(x)
        out.append(a)
        frac = x - a
        if frac == 0:
            return out
        x = 1 / frac


def cf_partial_quotients(alpha, bits: int) -> list[int]:
    """Partial quotients of alpha certified from one interval at ``bits``."""
    iv = approx(as_constant(alpha), bits)
    lo, hi = _cf_expansion(iv.lo), _cf_expansion(iv.hi)
    common = []
    for a, b in zip(lo, hi):
        if a != b:
            break
        common.append(a)
    # the last term of a finite expansion is ambiguous ([..., a] = [..., a-1, 1])
    if len(common) == min(len(lo), len(hi)):
        common = common[:-1]
    return common


def cf_denominators(alpha, q_max: int) -> list[int]:
    """Convergent denominators <= q_max, deduplicated (q_0 = 1 first)."""
    alpha = as_constant(alpha)
    if alpha.exact is not None:
        raise RationalDependenceDetected(f"{alpha} is rational")
    cap = max(precision_cap(), 4 * q_max.bit_length() + 128)
    bits = min(64, cap)
    while True:
        quotients = cf_partial_quotients(alpha, bits)
        dens = [1]
        q_prev, q_cur = 0, 1
        done = False
        for a in quotients[1:]:
            q_prev, q_cur = q_cur, a * q_cur + q_prev
            if q_cur > q_max:
                done = True
                break
            if q_cur != dens[-1]:
                dens.append(q_cur)
        if done:
            return dens
        if bits >= cap:
            raise PrecisionExhausted(f"continued fraction of {alpha} undecidable at {cap} bits")
        bits = min(2 * bits, cap)


# ---------------------------------------------------------------------------
# audits


@dataclass
class AuditReport:
    checked_records: int
    comparisons: int
    violations: list[tuple[int, int]]
    undecided: list[tuple[int, int]]

    def to_json(self) -> dict:
        return {
            "checked_records": self.checked_records,
            "comparisons": self.comparisons,
            "violations": [list(v) for v in self.violations],
            "undecided": [list(u) for u in self.undecided],
        }


def _rational_dist_table(A: TargetVector, limit: int, bits: int):
    """Exact-rational interval bounds of ||pA|| for 0 < p <= limit.

    Independent of the kernels: plain integer arithmetic on one dyadic
    enclosure per coordinate.
    """
    scale = 1 << bits
    encl = []
    for a in A.entries:
        iv = approx(a, bits)
        encl.append((int(iv.lo * scale), int(iv.hi * scale)))
    half = scale // 2
    lo_tab = [0] * (limit + 1)
    hi_tab = [0] * (limit + 1)
    for p in range(1, limit + 1):
        lo_max = hi_max = 0
        for a_lo, a_hi in encl:
            x_lo, x_hi = p * a_lo, p * a_hi
            n = x_lo // scale
            f_lo, f_hi = x_lo - n * scale, x_hi - n * scale
            d_lo, d_hi = min(f_lo, scale - f_lo), min(f_hi, scale - f_hi)
            top = half if (f_lo <= half <= f_hi or f_hi >= scale + half) else max(d_lo, d_hi)
            bottom = 0 if f_hi >= scale else min(d_lo, d_hi)
            lo_max = max(lo_max, bottom)
            hi_max = max(hi_max, top)
        lo_tab[p] = lo_max
        hi_tab[p] = hi_max
    return lo_tab, hi_tab


def audit_best_approximations(seq: BestApproxSequence, q_limit: int = 10**4) -> AuditReport:
    """Exhaustively check ||pA|| > ||q_k A|| for all 0 < p < q_k <= q_limit."""
    qs = [q for q in seq.qs if q <= q_limit]
    if not qs:
        return AuditReport(0, 0, [], [])
    top = max(qs)
    bits = 96 + 2 * top.bit_length()
    lo_tab, hi_tab = _rational_dist_table(seq.target, top, bits)
    violations, undecided = [], []
    comparisons = 0
    for q in qs:
        for p in range(1, q):
            comparisons += 1
            if lo_tab[p] > hi_tab[q]:
                continue
            if hi_tab[p] <= lo_tab[q]:
                violations.append((p, q))
            else:
                undecided.append((p, q))
    return AuditReport(len(qs), comparisons, violations, undecided)


def brute_force_best(A: TargetVector, q_max: int) -> list[int]:
    """Reference list of best approximations by exact-rational scanning."""
    bits = 96 + 2 * q_max.bit_length()
    lo_tab, hi_tab = _rational_dist_table(A, q_max, bits)
    out = []
    best_lo = best_hi = None
    for q in range(1, q_max + 1):
        if best_lo is None or hi_tab[q] < best_lo:
            out.append(q)
            best_lo, best_hi = lo_tab[q], hi_tab[q]
        elif lo_tab[q] <= best_hi:
            raise PrecisionExhausted(f"brute force cannot order q = {q}")
    return out


def dirichlet_constants(seq: BestApproxSequence) -> list[float]:
    """Observed c_k with rho_{k+1} = c_k * q_k^(-1/n)."""
    n = seq.n
    return [float(r.rho_next.hi) * r.q ** (1 / n) for r in seq.records]
