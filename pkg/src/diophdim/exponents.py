"""Finite-data estimates of approximation exponents and the closed-form bounds.

Exponents are limits, so every estimator here exposes its sample list and
the window its extremal statistic was taken over.  Log ratios are carried
as certified intervals (directed-rounding mpfr logs on exact endpoints).
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2

from . import kernels
from .bestapprox import BestApproxSequence, running_minima
from .errors import DomainError, InsufficientData, PrecisionExhausted, ScaleExceeded
from .numeric import (
    FIXED_ONE,
    CertifiedInterval,
    RealConstant,
    TargetVector,
    as_constant,
    fixed_point,
    scaled_interval,
    torus_norm_of_intervals,
    fast_interval,
)

LOG_BITS = 96
ROW_BOX_LIMIT = 10**8
REPORT_BITS = 64  # outward rounding for persisted intervals
LOW_CONFIDENCE_QMAX = 1000

UNIFORM_COLUMN = "uniform-column"
UNIFORM_ROW = "uniform-row"
INHOMOGENEOUS = "inhomogeneous"


def _log_bounds(x: Fraction, bits: int) -> tuple:
    q = gmpy2.mpq(x.numerator, x.denominator)
    with gmpy2.context(precision=bits, round=gmpy2.RoundDown):
        lo = gmpy2.log(q)
    with gmpy2.context(precision=bits, round=gmpy2.RoundUp):
        hi = gmpy2.log(q)
    return lo, hi


def log_ratio(dist: CertifiedInterval, scale: int) -> CertifiedInterval:
    """Certified enclosure of log(1/dist) / log(scale), for 0 < dist < 1 < scale."""
    if dist.lo <= 0:
        raise PrecisionExhausted("distance interval reaches zero; log ratio is unbounded")
    if dist.hi >= 1 or scale < 2:
        raise ValueError("need dist < 1 and scale >= 2")
    log_d_hi = _log_bounds(dist.hi, LOG_BITS)[1]
    log_d_lo = _log_bounds(dist.lo, LOG_BITS)[0]
    den_lo, den_hi = _log_bounds(Fraction(scale), LOG_BITS)
    # every mpfr operation, negation included, must run under a directed context
    with gmpy2.context(precision=LOG_BITS, round=gmpy2.RoundDown):
        lo = (-log_d_hi) / den_hi
    with gmpy2.context(precision=LOG_BITS, round=gmpy2.RoundUp):
        hi = (-log_d_lo) / den_lo
    return CertifiedInterval(Fraction(gmpy2.mpq(lo)), Fraction(gmpy2.mpq(hi)))


@dataclass
class ExponentEstimate:
    kind: str
    samples: list[tuple[int, CertifiedInterval]]
    estimate: CertifiedInterval | None
    window: tuple[int, int]
    anomalies: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    exact_hits: list[int] = field(default_factory=list)

    @property
    def value(self) -> float:
        """Midpoint as a float, for reporting only."""
        if self.estimate is None:
            return math.inf
        return float(self.estimate.mid)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "samples": [[q, *iv.round_out(REPORT_BITS).to_strings()] for q, iv in self.samples],
            "estimate": None if self.estimate is None else list(self.estimate.round_out(REPORT_BITS).to_strings()),
            "window": list(self.window),
            "anomalies": list(self.anomalies),
            "flags": list(self.flags),
            "exact_hits": list(self.exact_hits),
        }

    def csv_rows(self) -> list[tuple[int, str, str]]:
        return [(q, *iv.round_out(REPORT_BITS).to_strings()) for q, iv in self.samples]


def _tail_minimum(samples, tail_from):
    tail = [(q, iv) for q, iv in samples if q >= tail_from]
    lo = min(iv.lo for _, iv in tail)
    hi = min(iv.hi for _, iv in tail)
    return CertifiedInterval(lo, hi), (tail[0][0], tail[-1][0])


def omega_hat_column(seq: BestApproxSequence, tail_from: int | None = None,
                     tol: float | None = None) -> ExponentEstimate:
    """Liminf proxy of log(1/rho_k) / log q_k over the trailing half of records.

    ``tail_from`` fixes the window to samples with q_k >= tail_from instead.
    """
    n = seq.n
    samples = [(r.q, log_ratio(r.rho, r.q)) for r in seq.records[1:] if r.q >= 2]
    if len(seq.records) < 3 or len(samples) < 2:
        raise InsufficientData(f"need at least 3 records, have {len(seq.records)}")
    if tail_from is None:
        tail_from = samples[len(samples) // 2][0]
    estimate, window = _tail_minimum(samples, tail_from)
    tol = tol if tol is not None else (0.05 if n == 1 else 0.1)
    anomalies = []
    if estimate.hi < Fraction(1, n) - Fraction(tol).limit_denominator(10**6):
        anomalies.append(f"tail minimum below the Dirichlet floor 1/{n}")
    if estimate.lo > 1 + Fraction(tol).limit_denominator(10**6):
        anomalies.append("tail minimum above the ceiling 1")
    return ExponentEstimate(UNIFORM_COLUMN, samples, estimate, window, anomalies)


@dataclass(frozen=True)
class DualForm:
    """The 1 x n row tA, sharing its entries with the column target."""

    row: TargetVector

    @classmethod
    def of(cls, A: TargetVector) -> "DualForm":
        return cls(A)

    @property
    def n(self) -> int:
        return self.row.dim


def geometric_grid(lo: int, hi: int, points: int) -> list[int]:
    """Increasing integers spread geometrically over [lo, hi]."""
    if points < 2 or lo >= hi:
        return [lo] if lo == hi else sorted({lo, hi})
    ratio = (hi / lo) ** (1 / (points - 1))
    return sorted({min(hi, max(lo, round(lo * ratio**i))) for i in range(points)})


def row_minima(F: DualForm, Q: int) -> list[CertifiedInterval]:
    """m(R) = min over nonzero |q| <= R of ||tA q||, certified, for R = 1..Q."""
    n = F.n
    if (2 * Q + 1) ** n > ROW_BOX_LIMIT:
        raise ScaleExceeded(f"box |q| <= {Q} in dimension {n} exceeds {ROW_BOX_LIMIT} points")
    fixed = [fixed_point(a) for a in F.row.entries]
    lo, hi = kernels.shell_minima(fixed, Q)
    out = []
    run_lo = run_hi = None
    for R in range(1, Q + 1):
        l, h = int(lo[R]), int(hi[R])
        run_lo = l if run_lo is None else min(run_lo, l)
        run_hi = h if run_hi is None else min(run_hi, h)
        out.append(CertifiedInterval(Fraction(run_lo, FIXED_ONE), Fraction(min(run_hi, FIXED_ONE // 2), FIXED_ONE)))
    return out


def omega_hat_row(F: DualForm, Q_grid: Sequence[int], tail_from: int | None = None,
                  tol: float | None = None) -> ExponentEstimate:
    """Tail minimum of log(1/m(Q)) / log Q over an increasing grid of Q."""
    grid = list(Q_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])) or not grid or grid[0] < 2:
        raise ValueError("Q grid must be increasing with Q >= 2")
    mins = row_minima(F, grid[-1])
    samples = [(Q, log_ratio(mins[Q - 1], Q)) for Q in grid]
    if len(samples) < 2:
        raise InsufficientData("need at least two grid points")
    if tail_from is None:
        tail_from = samples[len(samples) // 2][0]
    estimate, window = _tail_minimum(samples, tail_from)
    n = F.n
    tol = tol if tol is not None else (0.05 if n == 1 else 0.2)
    anomalies = []
    if estimate.hi < n - Fraction(tol).limit_denominator(10**6):
        anomalies.append(f"tail minimum below the Dirichlet floor {n}")
    return ExponentEstimate(UNIFORM_ROW, samples, estimate, window, anomalies)


def _beta_constants(beta, n) -> list[RealConstant]:
    if isinstance(beta, str):
        beta = [s for s in beta.split(",")]
    if not isinstance(beta, (list, tuple)):
        beta = [beta]
    out = [as_constant(b) if not isinstance(b, str) else RealConstant.parse(b) for b in beta]
    if len(out) != n:
        raise ValueError(f"beta has {len(out)} entries, target has {n}")
    return out


def inhom_distance(A: TargetVector, beta: Sequence[RealConstant], q: int, bits: int = 128) -> CertifiedInterval:
    """Certified ||qA - beta||."""
    return torus_norm_of_intervals(
        scaled_interval(a, q, bits) - fast_interval(b, bits) for a, b in zip(A.entries, beta)
    )


def omega_inhom(A, beta, q_max: int, window_start: int | None = None) -> ExponentEstimate:
    """Limsup proxy: max of log(1/||qA - beta||) / log q over record q past sqrt(q_max)."""
    A = A if isinstance(A, TargetVector) else TargetVector.parse(A)
    if q_max > 10**7:
        raise ScaleExceeded("inhomogeneous scans support q_max <= 10^7")
    beta = _beta_constants(beta, A.dim)
    scan = running_minima(A, 1, q_max, beta)
    samples = [(q, log_ratio(inhom_distance(A, beta, q), q)) for q in scan.records if q >= 2]
    if window_start is None:
        window_start = math.isqrt(q_max) + 1
    tail = [(q, iv) for q, iv in samples if q >= window_start]
    flags = []
    if q_max < LOW_CONFIDENCE_QMAX or len(tail) < 2:
        flags.append("LowConfidence")
    if tail:
        estimate = CertifiedInterval(max(iv.lo for _, iv in tail), max(iv.hi for _, iv in tail))
        window = (window_start, q_max)
    elif samples:
        estimate = CertifiedInterval(max(iv.lo for _, iv in samples), max(iv.hi for _, iv in samples))
        window = (samples[0][0], q_max)
    else:
        estimate, window = None, (window_start, q_max)
    anomalies = []
    if estimate is not None and estimate.hi < 0:
        anomalies.append("negative inhomogeneous estimate")
    return ExponentEstimate(INHOMOGENEOUS, samples, estimate, window, anomalies, flags, scan.exact_hits)


# ---------------------------------------------------------------------------
# closed-form bounds


def _exact(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


def bound_theorem1(omega_hat_row_value):
    """Lower bound 1/w for the inhomogeneous exponent; 0 when w is infinite."""
    if omega_hat_row_value in (math.inf, "inf", "infinite"):
        return Fraction(0)
    w = _exact(omega_hat_row_value)
    if w <= 0:
        raise DomainError("the uniform row exponent must be positive")
    return 1 / w


def bound_eq2(v, n: int, omega_hat_row_value) -> Fraction:
    """n - 1 + 1 / (1 + (v*w - 1)/(1 + v)), defined for v > 1/w."""
    v, w = _exact(v), _exact(omega_hat_row_value)
    if w <= 0 or v <= 1 / w:
        raise DomainError(f"need v > 1/w, got v = {v}, w = {w}")
    return n - 1 + 1 / (1 + (v * w - 1) / (1 + v))


def bound_eq3(v, n: int, m: int = 1) -> Fraction:
    """min(n, m/v)."""
    v = _exact(v)
    if v <= 0:
        raise DomainError("v must be positive")
    return min(Fraction(n), Fraction(m) / v)


# ---------------------------------------------------------------------------
# transfer spot-check


@dataclass
class TransferReport:
    row_estimate: ExponentEstimate
    lower_bound: CertifiedInterval
    tol: Fraction
    betas: list[str]
    estimates: list[ExponentEstimate]
    passed: list[bool | None]
    median: Fraction | None
    flags: list[str]

    @property
    def all_passed(self) -> bool:
        return all(p is not False for p in self.passed)

    def to_json(self) -> dict:
        def rat(x):
            return None if x is None else f"{x.numerator}/{x.denominator}"
        return {
            "row_estimate": self.row_estimate.to_json(),
            "lower_bound": list(self.lower_bound.round_out(REPORT_BITS).to_strings()),
            "tol": rat(self.tol),
            "betas": self.betas,
            "estimates": [e.to_json() for e in self.estimates],
            "passed": self.passed,
            "median": rat(self.median),
            "flags": self.flags,
        }


def random_dyadic_betas(n: int, count: int, seed: int, bits: int = 20) -> list[list[Fraction]]:
    rng = random.Random(seed)
    return [[Fraction(rng.randrange(1, 1 << bits), 1 << bits) for _ in range(n)] for _ in range(count)]


def check_transfer(A, betas, q_max: int, Q_max: int = 300, grid_points: int = 12,
                   tol=Fraction(1, 10)) -> TransferReport:
    """Compare omega(A, beta) estimates with 1/omega_hat(tA) for each beta."""
    A = A if isinstance(A, TargetVector) else TargetVector.parse(A)
    tol = Fraction(tol)
    row = omega_hat_row(DualForm.of(A), geometric_grid(2, Q_max, grid_points))
    bound = CertifiedInterval(1 / row.estimate.hi, 1 / row.estimate.lo)
    estimates, passed, texts = [], [], []
    flags = []
    for beta in betas:
        est = omega_inhom(A, beta, q_max)
        estimates.append(est)
        texts.append(",".join(str(as_constant(b)) for b in _beta_constants(beta, A.dim)))
        ok = est.estimate is not None and est.estimate.lo >= (1 - tol) * bound.hi
        if not ok and "LowConfidence" in est.flags:
            ok = None  # inconclusive rather than failed
        passed.append(ok)
        if "LowConfidence" in est.flags and "LowConfidence" not in flags:
            flags.append("LowConfidence")
    mids = sorted(e.estimate.mid for e in estimates if e.estimate is not None)
    median = Fraction(statistics.median(mids)) if mids else None
    return TransferReport(row, bound, tol, texts, estimates, passed, median, flags)
