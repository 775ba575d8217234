import pytest
from hypothesis import given
from hypothesis import strategies as st

from charp_hodge.errors import DegreeCapExceeded, ParseError, RingMismatch
from charp_hodge.poly import Fp, Poly, is_prime, max_degree, set_max_degree

from conftest import PRIMES, polys

sympy = pytest.importorskip("sympy")

R = ("s", "t")


def P(text, p, ring=R):
    return Poly.parse(text, p, ring)


def to_sympy(f: Poly):
    gens = sympy.symbols(f.ring)
    expr = sum(c * sympy.prod([g**e for g, e in zip(gens, m)]) for m, c in f.terms.items())
    return sympy.Poly(expr, *gens, modulus=f.p)


def sympy_terms(sp, p):
    return {m: int(c) % p for m, c in sp.terms() if int(c) % p}


# -- worked values ------------------------------------------------------------


def test_derivative_of_pth_power_vanishes():
    assert P("s^3", 3).diff("s").is_zero()


def test_freshman_dream():
    assert P("s + t", 2) ** 2 == P("s^2 + t^2", 2)


def test_termwise_derivative():
    assert P("s^2*t + s", 5).diff("s") == P("2*s*t + 1", 5)


def test_frobenius_substitution():
    assert P("s + 1", 3, ("s",)).frobenius(1) == P("s^3 + 1", 3, ("s",))
    assert P("s*t", 2).frobenius(2) == P("s^4*t^4", 2)


def test_pth_root():
    assert P("s^3 + t^3", 3).pth_root() == P("s + t", 3)
    assert P("s^2 + s", 2).pth_root() is None
    assert P("4", 5).pth_root() == P("4", 5)


def test_fp_scalars():
    a = Fp(3, 7)
    assert a * a.inverse() == 1
    assert a**6 == 1
    assert -a == 4
    with pytest.raises(ZeroDivisionError):
        Fp(0, 7).inverse()


def test_is_prime():
    assert [n for n in range(20) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19]


# -- parsing and printing -----------------------------------------------------


@given(st.sampled_from(PRIMES).flatmap(lambda p: polys(p)))
def test_text_roundtrip(f):
    assert Poly.parse(str(f), f.p, f.ring) == f


def test_parser_accepts_signs_and_powers():
    assert P("-s + 2*(s - t)**2", 5) == P("2*s^2 + s*t + 2*t^2 + 4*s", 5)
    assert P("-s", 5) == P("4*s", 5)
    assert P("(s+t)^2", 3) == P("s^2 + 2*s*t + t^2", 3)


def test_parse_errors_carry_columns():
    with pytest.raises(ParseError) as exc:
        P("s + * t", 3)
    assert exc.value.column == 5
    with pytest.raises(ParseError):
        P("s + u", 3)


def test_canonical_order_is_degree_then_lex():
    f = P("1 + t + s + s*t + t^2 + s^2", 3)
    assert str(f) == "s^2 + s*t + t^2 + s + t + 1"


# -- oracle: sympy over GF(p) -------------------------------------------------


@given(st.sampled_from(PRIMES).flatmap(lambda p: st.tuples(polys(p), polys(p))))
def test_product_matches_sympy(pair):
    f, g = pair
    got = (f * g).terms
    want = sympy_terms(to_sympy(f) * to_sympy(g), f.p)
    assert got == want


@given(st.sampled_from(PRIMES).flatmap(lambda p: st.tuples(polys(p), polys(p))))
def test_sum_matches_sympy(pair):
    f, g = pair
    assert (f - g).terms == sympy_terms(to_sympy(f) - to_sympy(g), f.p)


@given(st.sampled_from(PRIMES).flatmap(lambda p: polys(p)))
def test_derivative_matches_sympy(f):
    s = sympy.Symbol("s")
    assert f.diff("s").terms == sympy_terms(to_sympy(f).diff(s), f.p)


@given(st.sampled_from(PRIMES).flatmap(lambda p: st.tuples(polys(p), polys(p, max_deg=2))))
def test_substitution_matches_sympy(pair):
    f, g = pair
    s = sympy.Symbol("s")
    want = sympy.Poly(to_sympy(f).as_expr().subs(s, to_sympy(g).as_expr()), *sympy.symbols(R), modulus=f.p)
    assert f.substitute({"s": g}).embed(R).terms == sympy_terms(want, f.p)


# -- ring laws ----------------------------------------------------------------


@given(st.sampled_from(PRIMES).flatmap(lambda p: st.tuples(polys(p), polys(p), polys(p))))
def test_ring_axioms(triple):
    f, g, h = triple
    assert (f * g) * h == f * (g * h)
    assert f * (g + h) == f * g + f * h
    assert f * g == g * f


@given(st.sampled_from(PRIMES).flatmap(lambda p: st.tuples(polys(p), polys(p))))
def test_leibniz(pair):
    f, g = pair
    assert (f * g).diff("t") == f.diff("t") * g + f * g.diff("t")


@given(st.sampled_from(PRIMES).flatmap(lambda p: polys(p, max_deg=2)))
def test_pth_power_is_frobenius(f):
    assert f**f.p == f.frobenius(1)
    assert (f**f.p).pth_root() == f


@given(st.sampled_from(PRIMES).flatmap(lambda p: polys(p)))
def test_pth_derivative_vanishes(f):
    assert f.diff("s", f.p).is_zero()


def test_embedding_across_rings():
    a = Poly.parse("s", 3, ("s",))
    b = Poly.parse("t", 3, ("t",))
    assert (a + b).ring == ("s", "t")
    assert a.embed(("t", "s")) == Poly.var("s", 3, ("t", "s"))
    with pytest.raises(RingMismatch):
        P("s*t", 3).embed(("s",))


def test_degree_cap():
    old = max_degree()
    try:
        set_max_degree(10)
        with pytest.raises(DegreeCapExceeded):
            P("s", 3) ** 11
        with pytest.raises(DegreeCapExceeded):
            P("s^4", 3).frobenius(1)
    finally:
        set_max_degree(old)


def test_degree_cap_from_environment():
    import subprocess
    import sys

    code = "from charp_hodge.poly import max_degree; print(max_degree())"
    env = {"CHARP_HODGE_MAX_DEGREE": "37", "PATH": "/usr/bin:/bin"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "37"
