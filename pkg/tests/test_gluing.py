import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from charp_hodge.errors import NotNilpotent
from charp_hodge.frobenius_lift import FrobLift
from charp_hodge.gluing import (
    Chart,
    cocycle_checks,
    exp_automorphism,
    gluing_cocycle,
    gluing_compatibility_check,
    independence_checks,
    nonlinear_gluing_checks,
    truncated_exp,
    truncated_log,
)
from charp_hodge.derivations import DerivationOp
from charp_hodge.linear import LinearHiggs
from charp_hodge.matrix import PolyMatrix
from charp_hodge.nonlinear import HiggsTotalSpace
from charp_hodge.poly import Poly
from charp_hodge.random_data import jordan_block, random_lift, random_nilpotent_higgs

S1 = ("s",)


def lift(a, p=3):
    return FrobLift.parse(S1, [a], p)


def charts(*lifts, p=3):
    return [Chart(chr(ord("a") + k), lift(a, p)) for k, a in enumerate(lifts)]


def jordan_higgs(r=2, p=3, base=S1):
    return LinearHiggs(base, r, [jordan_block(r, p, base)], p)


@st.composite
def nilpotent_pair(draw, p):
    """Two commuting matrices in N F_p[N] for a Jordan block N of size <= p."""
    r = draw(st.integers(1, p))
    N = jordan_block(r, p)
    ca = draw(st.lists(st.integers(0, p - 1), min_size=r, max_size=r))
    cb = draw(st.lists(st.integers(0, p - 1), min_size=r, max_size=r))
    A = PolyMatrix.zeros(r, r, p)
    B = PolyMatrix.zeros(r, r, p)
    for k in range(1, r):
        A = A + (N**k) * ca[k]
        B = B + (N**k) * cb[k]
    return A, B


# -- truncated exponential ------------------------------------------------------


def test_exp_examples():
    assert truncated_exp(PolyMatrix.zeros(3, 3, 3)) == PolyMatrix.identity(3, 3)
    N = jordan_block(3, 3)
    assert truncated_exp(N) == PolyMatrix.identity(3, 3) + N + (N * N) * 2
    assert str(truncated_exp(N)) == "[[1, 1, 2], [0, 1, 1], [0, 0, 1]]"


def test_exp_rejects_non_nilpotent():
    with pytest.raises(NotNilpotent):
        truncated_exp(jordan_block(4, 3))
    with pytest.raises(NotNilpotent):
        truncated_exp(PolyMatrix.identity(2, 3))


@given(st.sampled_from((2, 3, 5, 7)).flatmap(nilpotent_pair))
def test_exp_and_log_are_inverse(pair):
    A, _ = pair
    assert truncated_log(truncated_exp(A)) == A
    U = PolyMatrix.identity(A.shape[0], A.p) + A
    assert truncated_exp(truncated_log(U)) == U


@given(st.sampled_from((2, 3, 5, 7)).flatmap(nilpotent_pair))
def test_exp_is_a_homomorphism_on_commuting_pairs(pair):
    A, B = pair
    assert A.commutator(B).is_zero()
    assert truncated_exp(A + B) == truncated_exp(A) * truncated_exp(B)
    assert truncated_exp(A) * truncated_exp(-A) == PolyMatrix.identity(A.shape[0], A.p)


# -- cocycles ---------------------------------------------------------------------


def test_identical_lifts_give_identity():
    g = gluing_cocycle(charts("s", "s"), jordan_higgs())
    assert all(M == PolyMatrix.identity(2, 3, S1) for M in g.values())


def test_two_chart_transition():
    g = gluing_cocycle(charts("0", "s"), jordan_higgs())
    assert str(g["a", "b"]) == "[[1, s], [0, 1]]"
    assert g["a", "b"] * g["b", "a"] == PolyMatrix.identity(2, 3, S1)


def test_three_chart_cocycle():
    cover = charts("0", "s", "s^2")
    assert all(cocycle_checks(cover, gluing_cocycle(cover, jordan_higgs())))


def test_transport_examples():
    assert all(gluing_compatibility_check(charts("0"), jordan_higgs()))
    assert all(gluing_compatibility_check(charts("0", "s"), jordan_higgs()))
    zero = LinearHiggs(S1, 2, [PolyMatrix.zeros(2, 2, 3, S1)], 3)
    assert all(gluing_compatibility_check(charts("0", "s", "s^2"), zero))


def test_wrong_sign_is_detected_with_a_defect():
    checks = gluing_compatibility_check(charts("0", "s"), jordan_higgs(), sign=-1)
    assert not any(checks)
    assert "defect[1]" in checks[0].witness


@given(st.sampled_from((2, 3, 5)), st.integers(0, 10**6), st.sampled_from((("s",), ("s1", "s2"))))
def test_random_covers(p, seed, base):
    rng = random.Random(seed)
    theta = random_nilpotent_higgs(rng, base, rng.randrange(2, 4), p, max_deg=1)
    cover = [Chart(c, random_lift(rng, base, p, 2)) for c in "abc"]
    g = gluing_cocycle(cover, theta)
    assert all(cocycle_checks(cover, g))
    assert all(gluing_compatibility_check(cover, theta))
    assert all(independence_checks(cover, theta))


# -- derivation level --------------------------------------------------------------


def test_exp_automorphism_inverts():
    ring = ("s", "t1", "t2")
    N = DerivationOp.parse("D: t2 -> s*t1", ring, 3)
    phi, back = exp_automorphism(N), exp_automorphism(-N)
    assert str(phi["t2"]) == "s*t1 + t2"
    for v in ring:
        assert phi[v].substitute(back) == Poly.var(v, 3, ring)
        assert back[v].substitute(phi) == Poly.var(v, 3, ring)


def test_nonlinear_cover():
    ring = ("s", "t1", "t2")
    H = HiggsTotalSpace(S1, ("t1", "t2"), (DerivationOp.parse("D: t2 -> t1", ring, 3),), 3)
    cover = charts("0", "s", "2*s^2")
    assert all(nonlinear_gluing_checks(cover, H))
    assert not any(nonlinear_gluing_checks(cover[:2], H, sign=-1))


def test_nonlinear_cover_needs_p_nilpotent_fields():
    ring = ("s", "t1", "t2")
    H = HiggsTotalSpace(S1, ("t1", "t2"), (DerivationOp.parse("D: t1 -> 1; t2 -> t1^2", ring, 3),), 3)
    with pytest.raises(NotNilpotent):
        nonlinear_gluing_checks(charts("0", "s"), H)
