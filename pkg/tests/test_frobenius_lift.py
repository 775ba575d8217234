import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from charp_hodge.frobenius_lift import (
    FrobLift,
    di_cocycle,
    di_cocycle_checks,
    zeta_identities_check,
    zeta_iterate,
    zeta_matrix,
)
from charp_hodge.poly import Poly
from charp_hodge.random_data import random_lift, random_poly

sympy = pytest.importorskip("sympy")

S1 = ("s",)
S2 = ("s1", "s2")


def P(text, p, ring):
    return Poly.parse(text, p, ring)


def test_standard_lift_zeta():
    Z = zeta_matrix(FrobLift.standard(S1, 3))
    assert Z[0, 0] == P("s^2", 3, S1)


def test_two_variable_zeta():
    Z = zeta_matrix(FrobLift.parse(S2, ["s2", "0"], 2))
    assert [[str(Z[i, j]) for j in range(2)] for i in range(2)] == [["s1", "0"], ["1", "s2"]]


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_lift_by_pth_power_changes_nothing(p):
    Z = zeta_matrix(FrobLift.parse(S1, [f"s^{p}"], p))
    assert Z[0, 0] == P(f"s^{p - 1}", p, S1)


def test_iterate():
    Z = zeta_matrix(FrobLift.standard(S1, 2))
    assert zeta_iterate(Z, 1) == Z.entries
    assert zeta_iterate(Z, 2)[0, 0] == P("s^3", 2, S1)


def test_cocycle_examples():
    p = 3
    zero, ident = FrobLift.standard(S1, p), FrobLift.parse(S1, ["s"], p)
    assert all(h.is_zero() for h in di_cocycle(ident, ident))
    assert di_cocycle(zero, ident) == (P("-s", p, S1),)
    assert di_cocycle_checks(zero, ident).ok
    sq = FrobLift.parse(S1, ["s^2"], p)
    lifts = [zero, ident, sq]
    for a in lifts:
        for b in lifts:
            for c in lifts:
                lhs = [x + y for x, y in zip(di_cocycle(a, b), di_cocycle(b, c))]
                assert lhs == list(di_cocycle(a, c))


def integer_oracle(L: FrobLift):
    """d(s_j^p + p*a_j)/ds_i over Z, divided by p, reduced mod p."""
    p = L.p
    syms = sympy.symbols(L.base_vars)
    out = []
    for i, si in enumerate(syms):
        row = []
        for j, sj in enumerate(syms):
            a = sum(c * sympy.prod([g**e for g, e in zip(syms, m)]) for m, c in L.a[j].terms.items())
            lift = sj**p + p * a
            div = sympy.expand(sympy.diff(lift, si) / p)
            poly = sympy.Poly(div, *syms) if div != 0 else None
            terms = {} if poly is None else {m: int(c) % p for m, c in poly.terms() if int(c) % p}
            row.append(Poly(p, L.base_vars, terms))
        out.append(row)
    return out


@given(st.sampled_from((2, 3, 5, 7)), st.integers(0, 10**6), st.sampled_from((S1, S2)))
def test_zeta_matches_integer_oracle(p, seed, base):
    L = random_lift(random.Random(seed), base, p)
    Z = zeta_matrix(L)
    want = integer_oracle(L)
    assert [[Z[i, j] for j in range(len(base))] for i in range(len(base))] == want


@given(st.sampled_from((2, 3, 5, 7)), st.integers(0, 10**6), st.sampled_from((S1, S2)))
def test_identities_hold_for_genuine_lifts(p, seed, base):
    assert all(zeta_identities_check(zeta_matrix(random_lift(random.Random(seed), base, p))))


def detectable(g: Poly, i: int, base, p: int) -> bool:
    """Symmetry sees d g/d s_j for j != i; the top identity sees d^(p-1) g / d s_i^(p-1)."""
    others = any(not g.diff(v).is_zero() for j, v in enumerate(base) if j != i)
    return others or not g.diff(base[i], p - 1).is_zero()


@given(st.sampled_from((2, 3, 5)), st.integers(0, 10**6))
def test_perturbation_detected_exactly_when_visible(p, seed):
    rng = random.Random(seed)
    L = random_lift(rng, S2, p)
    i, k = rng.randrange(2), rng.randrange(2)
    g = random_poly(rng, p, S2, 2 * p, rng.randrange(1, 4))
    Z = zeta_matrix(L)
    bad = Z.with_entry(i, k, Z[i, k] + g)
    assert all(zeta_identities_check(bad)) == (not detectable(g, i, S2, p))


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_top_power_perturbation_fails(p):
    Z = zeta_matrix(FrobLift.standard(S2, p))
    for i in range(2):
        for k in range(2):
            g = Poly.var(S2[i], p, S2) ** (p - 1)
            checks = zeta_identities_check(Z.with_entry(i, k, Z[i, k] + g))
            assert not checks[1].ok


def test_linear_perturbation_is_invisible_above_two():
    # Adding s1 to f_11 is annihilated by both identities once p >= 3.
    Z = zeta_matrix(FrobLift.standard(S2, 3))
    bad = Z.with_entry(0, 0, Z[0, 0] + P("s1", 3, S2))
    assert all(zeta_identities_check(bad))
