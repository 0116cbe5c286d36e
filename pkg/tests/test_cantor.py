import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from diophdim.cantor import (
    BallIndex,
    CantorConfig,
    CantorTree,
    MassMeasure,
    build_tree,
    check_condition4,
    floor_children,
    growth_threshold,
    inflate_radii,
    lambda_n_small_enough,
    load_tree,
    measure_of_ball,
    mu_upper,
    power_at_most,
    radius_interval,
    save_tree,
    select_subsequence,
    verify_lemma2,
    verify_membership,
    verify_structure,
)
from diophdim.errors import (
    CertificateFailure,
    ConfigError,
    ScaleWindow,
    SequenceExhausted,
    UnknownBall,
)

V = Fraction(9, 5)


def window_floor(iv, bits=80):
    return Fraction(math.floor(iv.lo * 2**bits), 2**bits)


def window_ceil(iv, bits=80):
    return Fraction(math.ceil(iv.hi * 2**bits), 2**bits)


def test_condition4_sqrt2(sqrt2_seq):
    k = sqrt2_seq.index_of(5)
    c = check_condition4(sqrt2_seq, k, 2)
    assert c.holds
    assert abs(float(c.margin.mid) - 1.0723) < 1e-4
    assert not check_condition4(sqrt2_seq, k, 1).holds


def test_condition4_pair(pair_seq):
    k = pair_seq.index_of(7)
    assert not check_condition4(pair_seq, k, 1).holds
    assert check_condition4(pair_seq, k, V).holds


def test_condition4_needs_predecessor(sqrt2_seq):
    with pytest.raises(SequenceExhausted):
        check_condition4(sqrt2_seq, 0, 2)


def test_children_formula():
    assert floor_children(2, 10**5, 100, 1) == 20


def test_strict_growth_threshold():
    assert growth_threshold(3, 1, 2, 1, Fraction(4, 5)) == 59049


def test_config_rejects_sv_at_least_one():
    with pytest.raises(ConfigError):
        CantorConfig(v=V, s=Fraction(5, 9), J=1, mode="strict").validate(2)
    with pytest.raises(ConfigError):
        CantorConfig(v=V, s=Fraction(1, 2), J=1, mode="loose").validate(2)


def test_strict_mode_reports_required_scale(pair_seq):
    cfg = CantorConfig(v=V, s=Fraction(1, 2), J=1, mode="strict")
    with pytest.raises(SequenceExhausted) as info:
        select_subsequence(pair_seq, cfg)
    assert info.value.required > pair_seq.q_max


def test_relaxed_k_list_accepted_with_margins(pair_seq):
    steps = select_subsequence(pair_seq, CantorConfig(v=V, s=Fraction(1, 2), J=1, k_list=(7, 1183)))
    assert [(s.q, s.N) for s in steps] == [(7, 1), (1183, 2)]
    assert all(s.condition4.holds and s.condition4.margin.lo >= 1 for s in steps)
    assert steps[1].g1_holds is False


def test_k_list_rejects_first_record(sqrt2_seq):
    # q_0 = 1 has no predecessor, so the separation condition cannot be checked there
    with pytest.raises(ConfigError):
        build_tree(sqrt2_seq, CantorConfig(v=2, s=Fraction(1, 4), J=2, k_list=(1, 5, 29)))


def test_k_list_sqrt2_deterministic(sqrt2_seq):
    cfg = CantorConfig(v=2, s=Fraction(1, 4), J=1, k_list=(5, 29))
    a, b = build_tree(sqrt2_seq, cfg), build_tree(sqrt2_seq, cfg)
    assert a.to_json() == b.to_json()
    assert [lv.N for lv in a.levels] == [1, floor_children(1, 29, 5, 2)]


def test_single_level_tree(pair_seq):
    t = build_tree(pair_seq, CantorConfig(v=V, s=Fraction(1, 2), J=0))
    assert len(t.balls) == 1 and len(t.balls[0]) == 1
    assert measure_of_ball(MassMeasure.of(t), (0, 0)) == 1


def test_tree_shape(tree):
    assert [lv.N for lv in tree.levels] == [1, 2]
    assert [len(b) for b in tree.balls] == [1, 2]
    assert all(1 <= b.q < tree.levels[1].q for b in tree.balls[1])


def test_measure_examples():
    M = MassMeasure.from_counts([1, 22, 2])
    assert measure_of_ball(M, "0:0") == 1
    assert measure_of_ball(M, (2, 43)) == Fraction(1, 44)
    assert sum(measure_of_ball(M, (2, i)) for i in range(44)) == 1
    with pytest.raises(UnknownBall):
        measure_of_ball(M, (2, 44))
    with pytest.raises(UnknownBall):
        measure_of_ball(M, "bogus")


def test_mu_upper_whole_tree(tree, measure):
    r0 = window_floor(tree.radius(0))
    assert mu_upper(measure, tree, tree.balls[0][0].center, r0) == 1


def test_mu_upper_self_inclusion(tree, measure):
    rJ = window_ceil(tree.radius(tree.depth))
    index = BallIndex(tree)
    w = measure.weight(tree.depth)
    for b in tree.balls[-1]:
        m = mu_upper(measure, tree, b.center, rJ, index)
        assert w <= m <= w * len(tree.balls[-1])


def test_mu_upper_far_point_is_zero(tree, measure):
    r = window_ceil(tree.radius(tree.depth))
    x = tuple((y + Fraction(1, 2)) % 1 for y in tree.balls[-1][0].center)

    def torus(a, b):
        return max(min(abs(u - w) % 1, 1 - abs(u - w) % 1) for u, w in zip(a, b))

    assert all(torus(x, b.center) > 2 * r for b in tree.balls[-1])
    assert mu_upper(measure, tree, x, r) == 0


def test_mu_upper_scale_window(tree, measure):
    with pytest.raises(ScaleWindow):
        mu_upper(measure, tree, (0, 0), Fraction(1))
    with pytest.raises(ScaleWindow):
        mu_upper(measure, tree, (0, 0), window_floor(tree.radius(tree.depth)) / 2)


def test_membership_certificate(tree):
    rep = verify_membership(tree)
    assert rep.levels == 2 and rep.balls_checked == 2
    assert all(m.lo >= 1 for m in rep.worst_margin)
    assert rep.undecided == 0


def test_membership_negative_control(tree):
    with pytest.raises(CertificateFailure):
        verify_membership(inflate_radii(tree, 3))


def test_structure(tree):
    rep = verify_structure(tree)
    assert rep.passed, rep.failures


def test_lemma2_samples(tree, measure):
    rep = verify_lemma2(tree, measure, 400, seed=11, keep_records=True)
    far = [s for s in rep.records if not s.near]
    assert rep.zero_far == sum(1 for s in far if s.mass == 0) > 0
    assert all(s.ratio.lo == 0 for s in rep.records if s.mass == 0)
    assert 0 < rep.max_ratio.lo < math.inf
    assert sum(rep.per_regime_counts.values()) == 400
    again = verify_lemma2(tree, measure, 400, seed=11)
    assert again.to_json() == rep.to_json()


def test_lemma2_single_ball_ratio(tree, measure):
    rJ = window_ceil(tree.radius(tree.depth))
    m = mu_upper(measure, tree, tree.balls[-1][0].center, rJ)
    ratio = m / Fraction(float(rJ) ** float(tree.config.s))
    assert 0 < ratio < 10**6


def test_tree_json_round_trip(tree, tmp_path):
    path = tmp_path / "tree.json"
    digest = save_tree(tree, path)
    back = load_tree(path)
    assert isinstance(back, CantorTree)
    assert back.to_json() == tree.to_json()
    assert save_tree(back, tmp_path / "again.json") == digest
    ball = tree.to_json()["levels"][1]["balls"][0]
    assert set(ball) == {"center", "q", "parent"} and all("/" in c for c in ball["center"])


# ---------------------------------------------------------------------------
# properties

rationals = st.fractions(min_value=Fraction(1, 4), max_value=4, max_denominator=12)


@given(st.integers(1, 3), st.integers(1, 10**8), st.integers(2, 500), rationals)
def test_children_formula_brackets(n, q_next, q_prev, v):
    N = floor_children(n, q_next, q_prev, v)
    a, b = v.numerator, v.denominator
    # N <= 2^(n-1) q_next q_prev^(-n v) < N + 1, raised to the power b
    lhs = (2 ** (n - 1) * q_next) ** b
    assert N**b * q_prev ** (n * a) <= lhs < (N + 1) ** b * q_prev ** (n * a)


@settings(max_examples=40)
@given(st.integers(2, 50), st.integers(1, 20), st.integers(1, 2),
       st.fractions(min_value=Fraction(1, 2), max_value=2, max_denominator=6),
       st.fractions(min_value=Fraction(1, 20), max_value=1, max_denominator=20))
def test_growth_threshold_is_minimal(q, prod, n, v, s):
    if s * v >= 1:
        return
    Q = growth_threshold(q, prod, n, v, s)
    e = 1 - s * v

    def ok(x):
        # x^(1 - s v) >= q^(n v) / prod, cleared of denominators
        D = math.lcm(e.denominator, (n * v).denominator)
        return x ** int(e * D) * prod**D >= q ** int(n * v * D)

    assert ok(Q) and (Q == 1 or not ok(Q - 1))


@given(st.integers(2, 10**6), rationals, st.fractions(min_value=Fraction(1, 10**6), max_value=1))
def test_power_test_agrees_with_interval(q, v, t):
    iv = radius_interval(q, v)
    if iv.hi <= t:
        assert power_at_most(q, v, t)
    if iv.lo > t:
        assert not power_at_most(q, v, t)


@given(st.lists(st.integers(1, 30), min_size=1, max_size=5))
def test_mass_conservation(counts):
    N = [1] + counts
    M = MassMeasure.from_counts(N)
    for j in range(len(N)):
        assert M.weight(j) * M.sizes[j] == 1
        if j + 1 < len(N):
            assert N[j + 1] * M.weight(j + 1) == M.weight(j)


@given(st.fractions(min_value=Fraction(1, 10**6), max_value=1), st.integers(2, 10**4),
       st.integers(1, 100), rationals, st.fractions(min_value=Fraction(1, 10), max_value=1, max_denominator=10))
def test_lambda_test_matches_float(lam, q, prod, v, s):
    exact = lambda_n_small_enough(lam, q, prod, 2, v, s)
    rhs = (q ** float(2 * v) / prod) ** (-1 / float(2 - s))
    if abs(float(lam) - rhs) > 1e-9 * rhs:
        assert exact == (float(lam) <= rhs)
