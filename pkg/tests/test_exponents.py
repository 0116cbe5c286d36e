import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from diophdim.bestapprox import best_approx_sequence
from diophdim.errors import DomainError
from diophdim.exponents import (
    DualForm,
    bound_eq2,
    bound_eq3,
    bound_theorem1,
    check_transfer,
    geometric_grid,
    log_ratio,
    omega_hat_column,
    omega_hat_row,
    omega_inhom,
    random_dyadic_betas,
)
from diophdim.numeric import CertifiedInterval, TargetVector


def column(text, q_max, **kw):
    return omega_hat_column(best_approx_sequence(TargetVector.parse(text), q_max), **kw)


def mp_inhom(alpha_text, beta, q_max, window_start, dps=40):
    """Independent limsup proxy: records of ||q a - b|| brute-forced in mpmath."""
    with mpmath.workdps(dps):
        a = mpmath.sqrt(int(alpha_text[5:-1]))
        b = mpmath.mpf(beta.numerator) / beta.denominator
        best, out = None, []
        for q in range(1, q_max + 1):
            x = q * a - b
            d = abs(x - mpmath.nint(x))
            if best is None or d < best:
                best = d
                if q >= max(2, window_start):
                    out.append(mpmath.log(1 / d) / mpmath.log(q))
        return float(max(out))


def test_log_ratio_encloses():
    iv = log_ratio(CertifiedInterval(Fraction(1, 1000), Fraction(1, 1000)), 10)
    assert iv.lo <= 3 <= iv.hi and iv.width < Fraction(1, 2**80)


def test_column_sqrt2():
    est = column("sqrt(2)", 10**4)
    at29 = dict(est.samples)[29]
    assert abs(float(at29.mid) - 1.047) < 1e-3
    assert 0.95 <= est.value <= 1.05
    assert est.anomalies == []


def test_column_phi():
    assert 0.95 <= column("phi", 10**4).value <= 1.05


def test_column_pair():
    est = column("sqrt(2),sqrt(3)", 10**6)
    assert 0.45 <= est.value <= 1.0


def test_row_one_dimensional_matches_column():
    F = DualForm.of(TargetVector.parse("sqrt(2)"))
    est = omega_hat_row(F, geometric_grid(2, 10**5, 24))
    assert 0.95 <= est.value <= 1.05


def test_row_pair_dirichlet():
    F = DualForm.of(TargetVector.parse("sqrt(2),sqrt(3)"))
    est = omega_hat_row(F, geometric_grid(2, 300, 12))
    assert 1.8 <= est.value <= 2.6


def test_column_and_row_pair_agree():
    # omega_hat(A) = 1/n exactly when omega_hat(tA) = n
    col = column("sqrt(2),sqrt(3)", 10**6).value
    row = omega_hat_row(DualForm.of(TargetVector.parse("sqrt(2),sqrt(3)")), geometric_grid(2, 300, 12)).value
    assert abs(col - 0.5) <= 0.2 and abs(row - 2) <= 0.2


def test_inhom_orbit_point():
    est = omega_inhom("sqrt(2)", "sqrt(2)", 10**5)
    assert est.exact_hits == [1]
    assert est.value >= 0.9


def test_inhom_shifted_orbit_point():
    est = omega_inhom("sqrt(2)", "2*sqrt(2) - 1", 10**4)
    assert est.exact_hits == [2]


def test_inhom_zero_shift_dirichlet():
    assert omega_inhom("sqrt(2),sqrt(3)", "0,0", 10**5).value >= 0.5 - 0.1


def test_inhom_half_matches_brute_force():
    est = omega_inhom("sqrt(2)", Fraction(1, 2), 10**4)
    ref = mp_inhom("sqrt(2)", Fraction(1, 2), 10**4, est.window[0])
    assert abs(est.value - ref) < 1e-9
    assert est.value >= float(bound_theorem1(1)) - 0.1


def test_low_confidence_budget():
    rep = check_transfer("sqrt(2)", random_dyadic_betas(1, 3, seed=1), q_max=10)
    assert "LowConfidence" in rep.flags
    assert all(p is not False for p in rep.passed)


def test_transfer_orbit_point_passes():
    rep = check_transfer("sqrt(2)", ["sqrt(2)"], q_max=10**4)
    assert rep.all_passed


def test_transfer_lower_bound():
    assert bound_theorem1(2) == Fraction(1, 2)
    assert bound_theorem1(1) == 1
    assert bound_theorem1(math.inf) == 0


def test_eq2_arithmetic():
    assert bound_eq2(3, 1, 1) == Fraction(2, 3)
    assert bound_eq2(2, 2, 2) == Fraction(3, 2)
    with pytest.raises(DomainError):
        bound_eq2(1, 1, 1)
    near = bound_eq2(Fraction(1, 2) + Fraction(1, 10**9), 2, 2)
    assert 2 - near < Fraction(1, 10**8)


def test_eq3_arithmetic():
    assert bound_eq3(2, 2, 1) == Fraction(1, 2)
    assert bound_eq3(Fraction(1, 10), 2, 1) == 2
    assert bound_eq3(1, 1, 1) == 1


surds = st.integers(2, 40).filter(lambda k: math.isqrt(k) ** 2 != k)


@settings(max_examples=20)
@given(surds, st.integers(200, 5000), st.integers(2, 8))
def test_uniform_tail_min_never_increases(k, q1, factor):
    a = column(f"sqrt({k})", q1 * factor, tail_from=20)
    b = column(f"sqrt({k})", q1, tail_from=20)
    assert a.estimate.lo <= b.estimate.lo and a.estimate.hi <= b.estimate.hi


@settings(max_examples=20)
@given(surds, st.integers(1, 2**16 - 1), st.integers(1000, 5000), st.integers(2, 8))
def test_inhom_running_max_never_decreases(k, b, q1, factor):
    beta = Fraction(b, 2**16)
    small = omega_inhom(f"sqrt({k})", beta, q1, window_start=30)
    big = omega_inhom(f"sqrt({k})", beta, q1 * factor, window_start=30)
    assert big.estimate.lo >= small.estimate.lo
    assert big.estimate.lo >= 0


@settings(max_examples=30)
@given(st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=50),
       st.integers(1, 4), st.fractions(min_value=Fraction(1, 4), max_value=4, max_denominator=20))
def test_eq2_between_eq3_style_limits(v, n, w):
    if v <= 1 / w:
        with pytest.raises(DomainError):
            bound_eq2(v, n, w)
        return
    b = bound_eq2(v, n, w)
    assert n - 1 < b <= n
