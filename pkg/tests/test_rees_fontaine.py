import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from charp_hodge.frobenius_lift import FrobLift
from charp_hodge.linear import LinearConnection, LinearHiggs, gauge_transform, p_curvature_linear
from charp_hodge.matrix import PolyMatrix
from charp_hodge.poly import Poly
from charp_hodge.random_data import (
    jordan_block,
    random_lift,
    random_nilpotent_higgs,
    random_periodic_instance,
    random_poly,
)
from charp_hodge.rees import (
    FilteredModule,
    GriffithsViolation,
    NonSplitFiltration,
    ReesModule,
    TConnection,
    adapted_basis,
    fiber_rank_defects,
    fontaine_periodicity_check,
    graded_higgs_checks,
    griffiths_extend,
    is_witness,
    splitting_checks,
    rees_build,
    rees_fiber_checks,
    taylor_rule_check,
    weight_bookkeeping_check,
)

S1 = ("s",)


def parse(rows, p=3, base=S1):
    return PolyMatrix.parse([[str(x) for x in row] for row in rows], p, base)


def conn(rows, p=3, base=S1, lam=1):
    return LinearConnection(base, len(rows), lam, (parse(rows, p, base),), p)


def filt(levels, r, p=3, base=S1):
    return FilteredModule(base, r, levels, p)


def in_span(R, col, i):
    """Coordinates of ``col`` in the adapted basis vanish off weights >= i."""
    vec = PolyMatrix([[x] for x in col], R.p, R.base_vars)
    coords = R.basis.inverse() * vec
    return all(coords[l, 0].is_zero() for l in range(R.rank) if R.weights[l] < i)


# -- Rees construction ---------------------------------------------------------


def test_trivial_filtration_has_zero_weights():
    M = FilteredModule.trivial(S1, 3, 3)
    R = rees_build(M)
    assert R.weights == (0, 0, 0)
    assert R.basis == PolyMatrix.identity(3, 3, S1)
    assert all(rees_fiber_checks(M, R))


def test_two_step_filtration():
    M = filt((((1, 0),),), 2)
    R = rees_build(M)
    assert R.weights == (1, 0)
    assert R.basis == PolyMatrix.identity(2, 3, S1)
    assert all(rees_fiber_checks(M, R))


def test_skewed_rank3_filtration():
    top = ("1", "s", "s^2")
    mid = ("0", "1", "s")
    M = filt(((top, mid), (top,)), 3)
    R = rees_build(M)
    assert isinstance(R, ReesModule)
    assert sorted(R.weights) == [0, 1, 2]
    assert R.basis.is_unimodular()
    for i in (1, 2):
        for col in M.generators(i):
            assert in_span(R, col, i)
    assert all(rees_fiber_checks(M, R))
    assert all(splitting_checks(M))


def test_redundant_generators_are_dropped():
    M = filt((((1, "s"), (2, "2*s")),), 2)
    R = rees_build(M)
    assert sorted(R.weights) == [0, 1]


def test_non_split_filtration_is_certified():
    M = filt(((("s", 0),),), 2)
    R = adapted_basis(M)
    assert isinstance(R, NonSplitFiltration) and R.certified
    assert R.point == {"s": 0}
    assert fiber_rank_defects(M) == [(1, {"s": 0}, 0, 1)]
    assert not any(splitting_checks(M))


def test_no_fp_point_defect_is_inconclusive():
    M = filt(((("s^2 + 1", 0),),), 2)
    R = adapted_basis(M)
    assert isinstance(R, NonSplitFiltration) and not R.certified
    assert [c.status for c in splitting_checks(M)] == ["inconclusive"]


@st.composite
def small_filtrations(draw):
    p = draw(st.sampled_from((2, 3, 5)))
    r = draw(st.integers(1, 3))
    cols = draw(st.lists(st.lists(st.tuples(st.integers(0, p - 1), st.integers(0, p - 1)), min_size=r, max_size=r), min_size=1, max_size=r))
    s = Poly.var("s", p, S1)
    levels = ((tuple(tuple(a + b * s for a, b in col) for col in cols)),)
    return FilteredModule(S1, r, levels, p)


@given(small_filtrations())
def test_split_iff_constant_fiber_rank(M):
    R = adapted_basis(M)
    defects = fiber_rank_defects(M)
    if isinstance(R, ReesModule):
        assert not defects
        assert all(rees_fiber_checks(M, R))
    elif defects:
        assert R.certified


@given(st.integers(0, 10**6))
def test_split_filtrations_survive_gauge(seed):
    rng = random.Random(seed)
    p = rng.choice((2, 3, 5, 7))
    C, M, g = random_periodic_instance(rng, S1, rng.randrange(1, 4), p)
    R = adapted_basis(M)
    assert isinstance(R, ReesModule)
    assert all(rees_fiber_checks(M, R))


# -- Griffiths transversality --------------------------------------------------


def test_zero_connection_extends():
    M = filt((((1, 0),),), 2)
    T = griffiths_extend(conn([[0, 0], [0, 0]]), rees_build(M))
    assert isinstance(T, TConnection)
    assert all(A.is_zero() for A in T.matrices)


def test_lowering_connection_extends_with_higgs_fiber():
    M = filt((((1, 0),),), 2)
    C = conn([[0, 1], [0, 0]])
    T = griffiths_extend(C, rees_build(M))
    assert isinstance(T, TConnection)
    assert str(T.graded_higgs().A[0]) == "[[0, 1], [0, 0]]"
    assert T.fiber(1) == C.A
    assert weight_bookkeeping_check(T)
    assert all(graded_higgs_checks(T))


def test_filtration_raising_entry_gets_t_squared():
    M = filt((((1, 0),),), 2)
    T = griffiths_extend(conn([[0, 0], ["s", 0]]), rees_build(M))
    assert str(T.matrices[0]) == "[[0, 0], [s*t^2, 0]]"
    assert T.graded_higgs().A[0].is_zero()


def test_transversality_violation():
    M = filt((((1, 0, 0), (0, 1, 0)), ((1, 0, 0),)), 3)
    T = griffiths_extend(conn([[0, 0, "s"], [0, 0, 0], [0, 0, 0]]), rees_build(M))
    assert T == GriffithsViolation(0, 0, 2, "s", 2)


@given(st.integers(0, 10**6))
def test_weight_bookkeeping_on_random_transversal_data(seed):
    rng = random.Random(seed)
    p = rng.choice((3, 5, 7))
    r = rng.randrange(2, 4)
    c = random_poly(rng, p, S1, 2)
    # c(s) N lowers the descending weights (r-1, ..., 0) by exactly one
    theta = LinearHiggs(S1, r, [jordan_block(r, p, S1) * c], p)
    levels = tuple(
        tuple(tuple(1 if a == b else 0 for a in range(r)) for b in range(r - i)) for i in range(1, r)
    )
    M = FilteredModule(S1, r, levels, p)
    C = LinearConnection(S1, r, 1, theta.A, p)
    R = rees_build(M)
    assert R.weights == tuple(range(r - 1, -1, -1))
    T = griffiths_extend(C, R)
    assert isinstance(T, TConnection)
    assert weight_bookkeeping_check(T)
    assert all(graded_higgs_checks(T))


# -- Fontaine periodicity -----------------------------------------------------------


def test_canonical_trivial_filtration_gives_identity():
    C = conn([[0, 0], [0, 0]])
    out = fontaine_periodicity_check(C, FilteredModule.trivial(S1, 2, 3), FrobLift.standard(S1, 3))
    assert out.status == "pass"
    assert out.witness == PolyMatrix.identity(2, 3, S1)


def test_gauge_moved_canonical_recovers_gauge():
    g = parse([[1, "s"], [0, 1]])
    C = gauge_transform(conn([[0, 0], [0, 0]]), g)
    M = filt((((1, 0),),), 2).transformed(g)
    out = fontaine_periodicity_check(C, M, FrobLift.standard(S1, 3))
    assert out.status == "pass"
    assert is_witness(out.transform, C, out.witness)
    assert is_witness(out.transform, C, g)


def test_uniformizing_example_is_refuted():
    C = conn([[0, "s^2"], [0, 0]])
    out = fontaine_periodicity_check(C, filt((((1, 0),),), 2), FrobLift.standard(S1, 3))
    assert out.status == "fail"
    assert str(out.graded.A[0]) == "[[0, s^2], [0, 0]]"
    assert out.checks[-1].witness["refuted"] == "psi_1 has rank 0 vs 1 at (s=0)"
    # C has constant p-curvature, the transform's vanishes at s = 0
    assert str(p_curvature_linear(C).psi[0]) == "[[0, 2], [0, 0]]"
    assert p_curvature_linear(out.transform).psi[0].rank_at({"s": 0}) == 0


def test_level_above_p_minus_one_fails():
    M = FilteredModule(S1, 3, (((1, 0, 0), (0, 1, 0)), ((1, 0, 0),)), 2)
    C = LinearConnection(S1, 3, 1, (PolyMatrix.zeros(3, 3, 2, S1),), 2)
    out = fontaine_periodicity_check(C, M, FrobLift.standard(S1, 2))
    assert out.status == "fail"
    assert out.checks[0].name == "fontaine.level"


def test_griffiths_failure_stops_the_check():
    M = filt((((1, 0, 0), (0, 1, 0)), ((1, 0, 0),)), 3)
    out = fontaine_periodicity_check(conn([[0, 0, "s"], [0, 0, 0], [0, 0, 0]]), M, FrobLift.standard(S1, 3))
    assert [c.name for c in out.checks] == ["fontaine.adapted_basis", "fontaine.griffiths"]
    assert out.status == "fail"


@given(st.integers(0, 10**6), st.sampled_from((("s",), ("s1", "s2"))))
def test_constructed_instances_are_periodic(seed, base):
    rng = random.Random(seed)
    p = rng.choice((2, 3, 5, 7))
    C, M, g = random_periodic_instance(rng, base, rng.randrange(1, 4), p)
    out = fontaine_periodicity_check(C, M, random_lift(rng, base, p, 2), seed=seed)
    assert is_witness(out.transform, C, g)
    assert out.status == "pass"
    assert is_witness(out.transform, C, out.witness)


@given(st.integers(0, 10**6), st.sampled_from((2, 3, 5)))
def test_taylor_rule(seed, p):
    rng = random.Random(seed)
    base = rng.choice((("s",), ("s1", "s2")))
    theta = random_nilpotent_higgs(rng, base, rng.randrange(1, 4), p, max_deg=1)
    La, Lb = random_lift(rng, base, p, 2), random_lift(rng, base, p, 2)
    assert all(taylor_rule_check(theta, La, Lb))


def test_taylor_rule_needs_the_cocycle():
    theta = LinearHiggs(S1, 2, [parse([[0, 1], [0, 0]])], 3)
    La, Lb = FrobLift.parse(S1, ["0"], 3), FrobLift.parse(S1, ["s"], 3)
    checks = taylor_rule_check(theta, La, Lb)
    assert all(checks)
    # the bare identity does not intertwine the two charts' transforms
    from charp_hodge.linear import inverse_cartier_linear

    neg = LinearConnection(S1, 2, 0, tuple(-A for A in theta.A), 3)
    Ca, Cb = inverse_cartier_linear(neg, La, 4), inverse_cartier_linear(neg, Lb, 4)
    assert not is_witness(Ca, Cb, PolyMatrix.identity(2, 3, S1))


def test_transform_of_the_jordan_field_keeps_a_frobenius_factor():
    from charp_hodge.linear import inverse_cartier_linear

    neg = LinearConnection(S1, 2, 0, (parse([[0, 2], [0, 0]]),), 3)
    C = inverse_cartier_linear(neg, FrobLift.standard(S1, 3), 4)
    assert C.A[0] == parse([[0, "s^2"], [0, 0]])
    T = griffiths_extend(C, rees_build(filt((((1, 0),),), 2)))
    assert T.graded_higgs().A[0] == parse([[0, "s^2"], [0, 0]])
