"""Transversal foliations and Higgs fields on affine total spaces.

The total algebra is ``C = F_p[s_1..s_m, t_1..t_r]``.  A foliation is given by
derivations ``D_i`` with ``D_i(s_j) = delta_ij``; a Higgs field by commuting
vertical derivations ``Theta_i``.  This module builds the inverse Cartier
deformation series, its forward inverse, the subalgebra of horizontal
functions, and annihilator foliations of subalgebras.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import factorial
from typing import Sequence

from . import linalg
from .derivations import DerivationOp, lie_bracket, p_power, p_power_semilinearity_check
from .errors import CertificationFailure, ContractViolation, NotNilpotent, RingMismatch
from .frobenius_lift import FrobLift, zeta_iterate, zeta_matrix
from .linear import LinearConnection
from .matrix import PolyMatrix, generic_rank
from .poly import Poly, max_degree, monomials_upto, union_ring
from .report import Check


def _check_disjoint(base: tuple[str, ...], fiber: tuple[str, ...]) -> None:
    clash = set(base) & set(fiber)
    if clash:
        raise RingMismatch(f"variables {sorted(clash)} are both base and fiber")


@dataclass(frozen=True, eq=False)
class FoliatedTotalSpace:
    """Base ``s``, fiber ``t`` and one derivation ``D_i`` per base direction.

    ``relations`` may record a quotient presentation; the solvers here only
    accept free fibers and reject anything else.
    """

    base_vars: tuple[str, ...]
    fiber_vars: tuple[str, ...]
    nabla: tuple[DerivationOp, ...]
    p: int
    relations: tuple[Poly, ...] = ()

    def __post_init__(self) -> None:
        base, fiber = tuple(self.base_vars), tuple(self.fiber_vars)
        _check_disjoint(base, fiber)
        object.__setattr__(self, "base_vars", base)
        object.__setattr__(self, "fiber_vars", fiber)
        if len(self.nabla) != len(base):
            raise ValueError("one derivation per base variable is required")
        object.__setattr__(self, "nabla", tuple(D.embed(base + fiber) for D in self.nabla))

    @property
    def ring(self) -> tuple[str, ...]:
        return self.base_vars + self.fiber_vars

    @classmethod
    def canonical(cls, base: Sequence[str], fiber: Sequence[str], p: int) -> FoliatedTotalSpace:
        ring = tuple(base) + tuple(fiber)
        return cls(tuple(base), tuple(fiber), tuple(DerivationOp.partial(s, ring, p) for s in base), p)

    def require_free(self) -> None:
        if self.relations:
            raise ValueError(
                "this solver needs a free polynomial fiber; the total space carries relations "
                + ", ".join(map(str, self.relations))
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FoliatedTotalSpace):
            return NotImplemented
        return (
            self.p == other.p
            and self.base_vars == other.base_vars
            and self.fiber_vars == other.fiber_vars
            and self.nabla == other.nabla
        )

    def __hash__(self) -> int:
        return hash((self.p, self.base_vars, self.fiber_vars, self.nabla))

    def __str__(self) -> str:
        ds = "; ".join(f"D[{i + 1}] = {D}" for i, D in enumerate(self.nabla))
        return f"foliation {{ base = [{', '.join(self.base_vars)}]; fiber = [{', '.join(self.fiber_vars)}]; {ds} }}"


@dataclass(frozen=True, eq=False)
class HiggsTotalSpace:
    """Commuting vertical derivations ``Theta_i`` on ``F_p[s, t]``."""

    base_vars: tuple[str, ...]
    fiber_vars: tuple[str, ...]
    theta: tuple[DerivationOp, ...]
    p: int

    def __post_init__(self) -> None:
        base, fiber = tuple(self.base_vars), tuple(self.fiber_vars)
        _check_disjoint(base, fiber)
        object.__setattr__(self, "base_vars", base)
        object.__setattr__(self, "fiber_vars", fiber)
        if len(self.theta) != len(base):
            raise ValueError("one derivation per base variable is required")
        object.__setattr__(self, "theta", tuple(T.embed(base + fiber) for T in self.theta))

    @property
    def ring(self) -> tuple[str, ...]:
        return self.base_vars + self.fiber_vars

    def __eq__(self, other) -> bool:
        if not isinstance(other, HiggsTotalSpace):
            return NotImplemented
        return (
            self.p == other.p
            and self.base_vars == other.base_vars
            and self.fiber_vars == other.fiber_vars
            and self.theta == other.theta
        )

    def __hash__(self) -> int:
        return hash((self.p, self.base_vars, self.fiber_vars, self.theta))

    def __str__(self) -> str:
        ts = "; ".join(f"Theta[{i + 1}] = {T}" for i, T in enumerate(self.theta))
        return f"higgs {{ base = [{', '.join(self.base_vars)}]; fiber = [{', '.join(self.fiber_vars)}]; {ts} }}"


@dataclass(frozen=True, eq=False)
class VerticalPCurvature:
    base_vars: tuple[str, ...]
    psi: tuple[DerivationOp, ...]
    p: int

    def is_zero(self) -> bool:
        return all(D.is_zero() for D in self.psi)


# invariants ------------------------------------------------------------------


def foliation_checks(F: FoliatedTotalSpace) -> list[Check]:
    bad_t = []
    for i, D in enumerate(F.nabla):
        for j, s in enumerate(F.base_vars):
            if D[s] != (1 if i == j else 0):
                bad_t.append(f"D[{i + 1}]({s}) = {D[s]}")
    bad_i = []
    for i, j in combinations(range(len(F.nabla)), 2):
        br = lie_bracket(F.nabla[i], F.nabla[j])
        if not br.is_zero():
            bad_i.append(f"[D[{i + 1}], D[{j + 1}]] = {br}")
    return [
        Check.of("transversal", not bad_t, **({"violations": "; ".join(bad_t)} if bad_t else {})),
        Check.of("integrable", not bad_i, **({"violations": "; ".join(bad_i)} if bad_i else {})),
    ]


def higgs_checks(H: HiggsTotalSpace) -> list[Check]:
    bad_v = [f"Theta[{i + 1}]" for i, T in enumerate(H.theta) if not T.is_vertical(H.base_vars)]
    bad_i = []
    for i, j in combinations(range(len(H.theta)), 2):
        br = lie_bracket(H.theta[i], H.theta[j])
        if not br.is_zero():
            bad_i.append(f"[Theta[{i + 1}], Theta[{j + 1}]] = {br}")
    return [
        Check.of("vertical", not bad_v, **({"violations": ", ".join(bad_v)} if bad_v else {})),
        Check.of("integrable", not bad_i, **({"violations": "; ".join(bad_i)} if bad_i else {})),
    ]


def _require(checks: list[Check], what: str) -> None:
    bad = [c for c in checks if not c.ok]
    if bad:
        detail = "; ".join(f"{c.name}: {', '.join(c.witness.values())}" for c in bad)
        raise ValueError(f"{what} violates its invariants ({detail})")


def foliation_p_curvature(F: FoliatedTotalSpace) -> VerticalPCurvature:
    psi = tuple(p_power(D) for D in F.nabla)
    for i, P in enumerate(psi):
        if not P.is_vertical(F.base_vars):
            raise ContractViolation(f"p-curvature component {i + 1} is not vertical: {P}")
    return VerticalPCurvature(F.base_vars, psi, F.p)


def psi_along(F: FoliatedTotalSpace, field: Sequence[Poly]) -> DerivationOp:
    """``psi(v) = nabla(v)^p - nabla(v^p)`` for a base vector field ``v = sum c_i d/ds_i``."""
    p = F.p
    base = F.base_vars
    coeffs = [c.embed(base) if isinstance(c, Poly) else Poly.const(int(c), p, base) for c in field]
    v = DerivationOp(base, tuple(coeffs), p)
    lifted = _combine(F.nabla, coeffs, F.ring, p)
    vp = p_power(v)
    return p_power(lifted) - _combine(F.nabla, list(vp.values), F.ring, p)


def _combine(ops: Sequence[DerivationOp], coeffs: Sequence[Poly], ring, p: int) -> DerivationOp:
    out = DerivationOp.zero(ring, p)
    for c, D in zip(coeffs, ops):
        if not c.is_zero():
            out = out + c * D
    return out


def p_curvature_property_checks(F: FoliatedTotalSpace, samples: Sequence[Poly] = ()) -> list[Check]:
    """Semilinearity of ``psi``, commuting components, and ``[psi_i, D_j] = 0``."""
    p = F.p
    psi = foliation_p_curvature(F).psi
    base = F.base_vars
    bad_semi = []
    for c in samples:
        c = c.embed(base)
        for i, D in enumerate(F.nabla):
            if not p_power_semilinearity_check(D, c).ok:
                bad_semi.append(f"hochschild D[{i + 1}], c = {c}")
            field = [c if k == i else Poly.zero(p, base) for k in range(len(base))]
            if psi_along(F, field) != (c**p) * psi[i]:
                bad_semi.append(f"psi(c d/d{base[i]}) != c^p psi_{i + 1}, c = {c}")
    if len(base) > 1:
        ones = [Poly.const(1, p, base) for _ in base]
        if psi_along(F, ones) != _combine(psi, [Poly.const(1, p, F.ring)] * len(psi), F.ring, p):
            bad_semi.append("psi is not additive on the sum of coordinate fields")
    bad_comm = []
    for i, j in combinations(range(len(psi)), 2):
        if not lie_bracket(psi[i], psi[j]).is_zero():
            bad_comm.append(f"[psi_{i + 1}, psi_{j + 1}]")
    bad_flat = []
    for i, P in enumerate(psi):
        for j, D in enumerate(F.nabla):
            if not lie_bracket(P, D).is_zero():
                bad_flat.append(f"[psi_{i + 1}, D[{j + 1}]]")
    return [
        Check.of("psi.semilinear", not bad_semi, **({"violations": "; ".join(bad_semi)} if bad_semi else {})),
        Check.of("psi.commuting", not bad_comm, **({"violations": ", ".join(bad_comm)} if bad_comm else {})),
        Check.of("psi.parallel", not bad_flat, **({"violations": ", ".join(bad_flat)} if bad_flat else {})),
    ]


# inverse Cartier series ------------------------------------------------------


def pullback_theta(H: HiggsTotalSpace) -> tuple[DerivationOp, ...]:
    """Frobenius pullback: base variables raised to the p-th power in every coefficient."""
    base = H.base_vars
    return tuple(
        DerivationOp(T.ring, tuple(v.frobenius(1, base) for v in T.values), T.p) for T in H.theta
    )


def _level(ops: Sequence[DerivationOp], n_max: int) -> int | None:
    cur = list(ops)
    for n in range(n_max + 1):
        if all(D.is_zero() for D in cur):
            return n
        if n == n_max:
            return None
        cur = [p_power(D) for D in cur]
    return None


def series_terms(
    V: Sequence[DerivationOp], L: FrobLift, level: int, method: str = "matrix"
) -> list[DerivationOp]:
    """``sum_n term_n(d/ds_i)`` for each ``i``, truncated below ``level``.

    ``matrix``: contract rows of the iterated zeta matrix ``F^(n+1)`` against
    the ``n``-fold restricted powers of ``V``.  ``composition``: start from
    ``W_j = sum_k f_jk V_k`` and repeatedly apply ``T -> sum_j f_ij T_j^p``.
    Both give the same derivations; having two routes pins the convention.
    """
    if not V:
        return []
    ring, p = V[0].ring, V[0].p
    m = len(L.base_vars)
    Z = zeta_matrix(L)
    totals = [DerivationOp.zero(ring, p) for _ in range(m)]
    if level == 0:
        return totals
    if method == "matrix":
        powers = list(V)
        for n in range(level):
            Fn = zeta_iterate(Z, n + 1)
            for i in range(m):
                totals[i] = totals[i] + _combine(powers, [Fn[i, k] for k in range(m)], ring, p)
            if n + 1 < level:
                powers = [p_power(D) for D in powers]
        return totals
    if method == "composition":
        cur = [_combine(V, [Z[j, k] for k in range(m)], ring, p) for j in range(m)]
        for n in range(level):
            for i in range(m):
                totals[i] = totals[i] + cur[i]
            if n + 1 < level:
                raised = [p_power(D) for D in cur]
                cur = [_combine(raised, [Z[i, j] for j in range(m)], ring, p) for i in range(m)]
        return totals
    raise ValueError(f"unknown method {method!r}")


def inverse_cartier_nonlinear(
    H: HiggsTotalSpace,
    L: FrobLift,
    n_max: int = 4,
    *,
    method: str = "matrix",
    verify: bool = True,
) -> FoliatedTotalSpace:
    """Foliation ``D_i = d/ds_i - sum_n term_n(d/ds_i)`` on the Frobenius pullback of ``H``.

    With ``verify`` the two guaranteed properties are recomputed: the result
    is integrable and its p-curvature equals the pulled back Higgs field.
    """
    if L.base_vars != H.base_vars or L.p != H.p:
        raise RingMismatch("lift and Higgs field live over different bases")
    _require(higgs_checks(H), "Higgs field")
    V = pullback_theta(H)
    level = _level(V, n_max)
    if level is None:
        raise NotNilpotent(f"Higgs field is not nilpotent of level <= {n_max}")
    ring = H.ring
    terms = series_terms(V, L, level, method)
    nabla = tuple(DerivationOp.partial(s, ring, H.p) - T for s, T in zip(H.base_vars, terms))
    F = FoliatedTotalSpace(H.base_vars, H.fiber_vars, nabla, H.p)
    if verify:
        checks = foliation_checks(F)
        _require_contract(checks, "inverse Cartier output")
        psi = foliation_p_curvature(F).psi
        for i, (P, Vi) in enumerate(zip(psi, V)):
            if P != Vi:
                raise ContractViolation(f"p-curvature component {i + 1} is {P}, expected {Vi}")
    return F


def _require_contract(checks: list[Check], what: str) -> None:
    bad = [c for c in checks if not c.ok]
    if bad:
        raise ContractViolation(f"{what}: " + "; ".join(f"{c.name} {c.witness}" for c in bad))


def forward_deform(
    F: FoliatedTotalSpace,
    L: FrobLift,
    n_max: int = 4,
    *,
    method: str = "matrix",
    verify: bool = True,
) -> FoliatedTotalSpace:
    """``D_i + sum_n term_n`` built from the p-curvature; the result has zero p-curvature."""
    if L.base_vars != F.base_vars or L.p != F.p:
        raise RingMismatch("lift and foliation live over different bases")
    _require(foliation_checks(F), "foliation")
    psi = foliation_p_curvature(F).psi
    level = _level(psi, n_max)
    if level is None:
        raise NotNilpotent(f"p-curvature is not nilpotent of level <= {n_max}")
    terms = series_terms(psi, L, level, method)
    nabla = tuple(D + T for D, T in zip(F.nabla, terms))
    G = FoliatedTotalSpace(F.base_vars, F.fiber_vars, nabla, F.p)
    if verify:
        _require_contract(foliation_checks(G), "deformed foliation")
        new_psi = foliation_p_curvature(G)
        if not new_psi.is_zero():
            raise ContractViolation(f"deformed foliation has p-curvature {[str(x) for x in new_psi.psi]}")
    return G


def bracket_of_powers_check(
    H: HiggsTotalSpace, X: Sequence[Poly], Y: Sequence[Poly], max_power: int = 2
) -> Check:
    """``[ (sum X_j V_j)^(p^n), (sum Y_j V_j)^(p^n') ] = 0`` for ``n, n' <= max_power``."""
    V = pullback_theta(H)
    ring, p = H.ring, H.p
    A = _combine(V, [x.embed(ring) for x in X], ring, p)
    B = _combine(V, [y.embed(ring) for y in Y], ring, p)
    pa, pb = [A], [B]
    for _ in range(max_power):
        pa.append(p_power(pa[-1]))
        pb.append(p_power(pb[-1]))
    bad = []
    for n, a in enumerate(pa):
        for k, b in enumerate(pb):
            if not lie_bracket(a, b).is_zero():
                bad.append(f"(n={n}, n'={k})")
    return Check.of("powers.commute", not bad, **({"violations": ", ".join(bad)} if bad else {}))


# horizontal functions ----------------------------------------------------------


def horizontal_kernel(ops: Sequence[DerivationOp], deg_bound: int) -> list[Poly]:
    """F_p-basis of ``{c : D(c) = 0 for all D}`` in total degree <= deg_bound, by degree."""
    ring, p = ops[0].ring, ops[0].p
    monos = monomials_upto(len(ring), deg_bound)
    images = []
    for mono in monos:
        x = Poly.monomial(mono, p, ring)
        vec = {}
        for i, D in enumerate(ops):
            for mm, c in D.apply(x).terms.items():
                vec[(i, mm)] = c
        images.append(vec)
    out = []
    for dep in linalg.kernel(images, p):
        poly = Poly(p, ring, {monos[j]: c for j, c in dep.items()})
        out.append(poly)
    out.sort(key=lambda f: f.degree())
    return out


class _SubalgebraSpan:
    """F_p-span of all products of given generators up to a degree bound."""

    def __init__(self, ring: tuple[str, ...], p: int, bound: int):
        self.ring, self.p, self.bound = ring, p, bound
        self.gens: list[Poly] = []
        self.elements: list[tuple[Poly, tuple[int, ...]]] = [(Poly.const(1, p, ring), ())]
        self.space = linalg.EchelonSpace(p)
        self.space.add(self.elements[0][0].terms, 0)

    def add_generator(self, g: Poly) -> None:
        w = g.degree()
        if w <= 0:
            raise ValueError("generators must be non-constant")
        self.gens.append(g)
        self.elements = [(e, exps + (0,)) for e, exps in self.elements]
        fresh = []
        for e, exps in self.elements:
            cur, k = e, 0
            while cur.degree() + w <= self.bound:
                cur = cur * g
                k += 1
                fresh.append((cur, exps[:-1] + (k,)))
        for e, exps in fresh:
            self.space.add(e.terms, len(self.elements))
            self.elements.append((e, exps))

    def contains(self, f: Poly) -> bool:
        return self.space.contains(f.terms)

    def express(self, f: Poly) -> dict[tuple[int, ...], int] | None:
        combo = self.space.express(f.terms)
        if combo is None:
            return None
        return {self.elements[j][1] + (0,) * (len(self.gens) - len(self.elements[j][1])): c for j, c in combo.items()}


@dataclass
class HorizontalAlgebra:
    """Generators of the horizontal subalgebra and the certificate behind them."""

    ring: tuple[str, ...]
    base_vars: tuple[str, ...]
    p: int
    base_gens: list[Poly]
    fiber_gens: list[Poly]
    deg_bound: int
    certificate: list[Check] = field(default_factory=list)

    @property
    def gens(self) -> list[Poly]:
        return self.base_gens + self.fiber_gens

    _spans: dict[int, _SubalgebraSpan] = field(default_factory=dict, repr=False, compare=False)

    def span(self, bound: int | None = None) -> _SubalgebraSpan:
        bound = self.deg_bound if bound is None else bound
        if bound not in self._spans:
            sp = _SubalgebraSpan(self.ring, self.p, bound)
            for g in self.gens:
                sp.add_generator(g)
            self._spans[bound] = sp
        return self._spans[bound]

    def _bounds(self, f: Poly, bound: int | None) -> list[int]:
        # products of higher degree may cancel down to f; a product of at
        # most deg(f) generators has degree <= deg(f) * (largest generator degree)
        if bound is not None:
            return [bound]
        return _membership_bounds(max(self.deg_bound, f.degree()), f.degree(), self.gens)

    def contains(self, f: Poly, bound: int | None = None) -> bool:
        f = f.embed(self.ring)
        return any(self.span(b).contains(f) for b in self._bounds(f, bound))

    def express(self, f: Poly, names: Sequence[str], bound: int | None = None) -> Poly | None:
        """Write ``f`` as a polynomial in the generators, using ``names`` as symbols."""
        f = f.embed(self.ring)
        for b in self._bounds(f, bound):
            combo = self.span(b).express(f)
            if combo is not None:
                return Poly(self.p, tuple(names), dict(combo))
        return None


def default_deg_bound(F: FoliatedTotalSpace) -> int:
    return F.p * (1 + max(0, max(D.degree() for D in F.nabla)))


def horizontal_subalgebra(F: FoliatedTotalSpace, deg_bound: int | None = None) -> HorizontalAlgebra:
    """Generators of ``C' = {c : D_i(c) = 0}`` with a certificate.

    ``C`` is spanned over ``F_p[s^p, t^p]`` by the monomials ``s^I t^J`` with
    exponents below ``p``, and the projection ``P`` is linear over p-th
    powers, so ``s^p``, ``t^p`` and the ``P(s^I t^J)`` generate ``C'``.
    Candidates are taken by increasing degree and dropped when already
    generated by the ones kept.  The certificate then checks horizontality,
    that every monomial of degree ``<= deg_bound - p`` is ``sum s^I h_I``
    with generated ``h_I``, and that the pieces ``s^I C'`` are independent
    up to ``deg_bound``.  A failed certificate raises
    :class:`CertificationFailure`.
    """
    F.require_free()
    _require(foliation_checks(F), "foliation")
    if not foliation_p_curvature(F).is_zero():
        raise ValueError("the foliation has nonzero p-curvature; horizontal descent needs psi = 0")
    p, ring, base = F.p, F.ring, F.base_vars
    bound = default_deg_bound(F) if deg_bound is None else deg_bound
    base_gens = [Poly.var(s, p, ring) ** p for s in base]
    candidates = {Poly.var(t, p, ring) ** p for t in F.fiber_vars}
    for E in _box(len(ring), p):
        if any(E[len(base):]):
            h = cartier_projection(F, Poly.monomial(E, p, ring))
            if not h.is_constant():
                candidates.add(h)
    ordered = sorted(candidates, key=lambda g: (g.degree(), len(g.terms), str(g)))
    top = max([bound] + [g.degree() for g in ordered])
    span = _SubalgebraSpan(ring, p, top)
    for g in base_gens:
        span.add_generator(g)
    fiber_gens = []
    for g in ordered:
        if not span.contains(g):
            fiber_gens.append(g)
            span.add_generator(g)
    # second pass with a wider bound drops generators produced by the others
    wide = _widening(top)[-1]
    for g in sorted(fiber_gens, key=lambda g: (-g.degree(), str(g))):
        others = [h for h in fiber_gens if h is not g]
        sp = _SubalgebraSpan(ring, p, wide)
        for h in base_gens + others:
            sp.add_generator(h)
        if sp.contains(g):
            fiber_gens = others
    alg = HorizontalAlgebra(ring, base, p, base_gens, fiber_gens, bound)
    alg.certificate = _certify(F, alg, horizontal_kernel(F.nabla, bound))
    bad = [c for c in alg.certificate if not c.ok]
    if bad:
        deg = next((int(c.witness["degree"]) for c in bad if "degree" in c.witness), None)
        raise CertificationFailure(
            "horizontal subalgebra certificate failed: " + ", ".join(c.name for c in bad), deg
        )
    return alg


def _widening(bound: int) -> list[int]:
    return sorted({bound, min(2 * bound, max_degree())})


def _membership_bounds(low: int, degree: int, gens: Sequence[Poly]) -> list[int]:
    """Degree bounds to try when testing membership of an element of the given degree.

    A product of at most ``degree`` generators has degree at most ``degree``
    times the largest generator degree; smaller bounds are tried first.
    """
    top = max(1, degree) * max([1] + [g.degree() for g in gens])
    cap = max(low, max_degree())
    return sorted(b for b in {low, 2 * low, top} if b <= cap)


def _box(m: int, p: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = [()]
    for _ in range(m):
        out = [e + (k,) for e in out for k in range(p)]
    return sorted(out, key=lambda e: (sum(e), e))


def _certify(F: FoliatedTotalSpace, alg: HorizontalAlgebra, kern: list[Poly]) -> list[Check]:
    p, ring, base = F.p, F.ring, F.base_vars
    bound = alg.deg_bound
    bad = [f"D[{i + 1}]({g})" for g in alg.gens for i, D in enumerate(F.nabla) if not D.apply(g).is_zero()]
    checks = [Check.of("descent.horizontal", not bad, **({"violations": "; ".join(bad)} if bad else {}))]

    svars = [Poly.var(s, p, ring) for s in base]
    box = _box(len(base), p)
    shifts = []
    for I in box:
        mono = Poly.const(1, p, ring)
        for sv, e in zip(svars, I):
            mono = mono * sv**e
        shifts.append((sum(I), mono))

    # each monomial c is sum_I s^I / I! * P(D^I c) with horizontal components;
    # the certificate checks that identity and that every component lies in
    # the algebra generated by the chosen generators
    target = bound - p
    parts = []
    failure = None
    for mono in monomials_upto(len(ring), max(target, -1)):
        c = Poly.monomial(mono, p, ring)
        comps = taylor_components(F, c)
        if _taylor_sum(F, comps) != c:
            failure = (c, "Taylor expansion does not reproduce the monomial")
            break
        parts.append((c, comps))
    if failure is None:
        top = max([bound] + [h.degree() for _, comps in parts for h in comps.values()])
        pending = [(c, h) for c, comps in parts for h in comps.values()]
        # expressions may need products of higher degree that cancel
        for b in _membership_bounds(top, max(target, 0), alg.gens):
            full = alg.span(b)
            pending = [(c, h) for c, h in pending if not full.contains(h)]
            if not pending:
                break
        if pending:
            c, h = min(pending, key=lambda x: x[0].degree())
            failure = (c, f"component {h} is not generated")
    if failure is None:
        checks.append(Check.passed("descent.spanning", up_to_degree=max(target, 0)))
    else:
        c, why = failure
        checks.append(Check.failed("descent.spanning", degree=c.degree(), monomial=str(c), reason=why))

    indep = linalg.EchelonSpace(p)
    count = 0
    dependent = None
    for w, sI in shifts:
        for k in kern:
            if k.degree() + w > bound:
                continue
            if indep.add((sI * k).terms, count) is not None:
                dependent = (sI, k)
            count += 1
    if dependent is None:
        checks.append(Check.passed("descent.free", vectors=count))
    else:
        checks.append(
            Check.failed(
                "descent.free",
                degree=dependent[0].degree() + dependent[1].degree(),
                vector=f"{dependent[0]} * ({dependent[1]})",
            )
        )
    return checks


def cartier_projection(F: FoliatedTotalSpace, c: Poly) -> Poly:
    """``prod_i sum_{k<p} (-s_i)^k / k! * D_i^k`` applied to ``c``.

    For ``psi = 0`` the result is horizontal and agrees with ``c`` modulo the
    ideal of the base coordinates; this is an independent route to elements
    of the horizontal subalgebra.
    """
    p, ring = F.p, F.ring
    out = c.embed(ring)
    for s, D in zip(F.base_vars, F.nabla):
        sv = Poly.var(s, p, ring)
        acc = Poly.zero(p, ring)
        cur = out
        for k in range(p):
            coeff = pow(factorial(k), -1, p) * (-1) ** k
            acc = acc + ((sv**k) * cur).scale(coeff)
            cur = D.apply(cur)
        out = acc
    return out


def taylor_components(F: FoliatedTotalSpace, c: Poly) -> dict[tuple[int, ...], Poly]:
    """Horizontal ``h_I = P(D^I c)`` with ``c = sum_{I < p} s^I / I! * h_I`` when ``psi = 0``."""
    p = F.p
    out = {}
    for I in _box(len(F.base_vars), p):
        x = c.embed(F.ring)
        for D, e in zip(F.nabla, I):
            x = D.power_apply(x, e)
        if not x.is_zero():
            out[I] = cartier_projection(F, x)
    return {I: h for I, h in out.items() if not h.is_zero()}


def _taylor_sum(F: FoliatedTotalSpace, comps: dict[tuple[int, ...], Poly]) -> Poly:
    p, ring = F.p, F.ring
    total = Poly.zero(p, ring)
    for I, h in comps.items():
        coeff = 1
        term = h
        for s, e in zip(F.base_vars, I):
            coeff = coeff * factorial(e) % p
            term = term * Poly.var(s, p, ring) ** e
        total = total + term.scale(pow(coeff, -1, p))
    return total


@dataclass
class DescendedHiggs:
    """Higgs data induced on the horizontal subalgebra, in generator symbols."""

    algebra: HorizontalAlgebra
    names: tuple[str, ...]
    images: list[dict[str, Poly]]
    higgs: HiggsTotalSpace | None


def _generator_names(alg: HorizontalAlgebra, fiber_vars: Sequence[str]) -> tuple[str, ...]:
    names = list(alg.base_vars)
    taken = set(names) | set(fiber_vars)
    fresh = 1
    for g in alg.fiber_gens:
        match = [t for t in fiber_vars if g == Poly.var(t, alg.p, alg.ring)]
        if match:
            names.append(match[0])
        else:
            while f"u{fresh}" in taken:
                fresh += 1
            names.append(f"u{fresh}")
            taken.add(f"u{fresh}")
            fresh += 1
    return tuple(names)


def descend_higgs(
    F: FoliatedTotalSpace, psi: Sequence[DerivationOp], alg: HorizontalAlgebra
) -> DescendedHiggs:
    """Restrict ``psi`` to the horizontal subalgebra and rewrite in generator symbols.

    ``s_i^p`` becomes the base symbol ``s_i``; a fiber generator equal to a
    fiber variable keeps its name, otherwise it is called ``u1, u2, ...``.
    When there are exactly as many fiber generators as fiber variables the
    result is also packaged as a :class:`HiggsTotalSpace`.
    """
    names = _generator_names(alg, F.fiber_vars)
    images = []
    for i, P in enumerate(psi):
        row = {}
        for name, g in zip(names[len(alg.base_vars):], alg.fiber_gens):
            val = P.apply(g)
            expr = alg.express(val, names)
            if expr is None:
                raise CertificationFailure(f"psi_{i + 1}({g}) is not in the horizontal subalgebra")
            row[name] = expr
        images.append(row)
    higgs = None
    fiber_names = names[len(alg.base_vars):]
    if len(fiber_names) == len(F.fiber_vars):
        theta = tuple(DerivationOp.from_map(row, names, F.p) for row in images)
        higgs = HiggsTotalSpace(alg.base_vars, fiber_names, theta, F.p)
    return DescendedHiggs(alg, names, images, higgs)


def cartier_nonlinear(
    F: FoliatedTotalSpace, L: FrobLift, n_max: int = 4, deg_bound: int | None = None
) -> tuple[FoliatedTotalSpace, DescendedHiggs]:
    """Deform to zero p-curvature, descend, and induce the Higgs field from ``psi``."""
    psi = foliation_p_curvature(F).psi
    G = forward_deform(F, L, n_max)
    alg = horizontal_subalgebra(G, deg_bound)
    return G, descend_higgs(F, psi, alg)


def same_subalgebra(gens_a: Sequence[Poly], gens_b: Sequence[Poly], ring, p: int, bound: int) -> bool:
    """Mutual membership of generators, with products up to ``bound``."""
    ring = union_ring(ring, *(g.ring for g in list(gens_a) + list(gens_b)))

    def span_of(gens):
        sp = _SubalgebraSpan(ring, p, bound)
        for g in gens:
            if not g.is_constant():
                sp.add_generator(g.embed(ring))
        return sp

    sa, sb = span_of(gens_a), span_of(gens_b)
    return all(sb.contains(g.embed(ring)) for g in gens_a) and all(sa.contains(g.embed(ring)) for g in gens_b)


# annihilators ----------------------------------------------------------------


def ekedahl_ann(
    ring: Sequence[str],
    gens: Sequence[Poly],
    p: int,
    deg_bound: int | None = None,
) -> list[DerivationOp]:
    """Normalized basis of the derivations killing every generator.

    The rank is ``n - rank(Jacobian)``.  Free variables are searched in ring
    order, so with base variables first a transversal foliation comes back
    in its normal form ``d/ds_i + (fiber terms)``.
    """
    ring = tuple(ring)
    gens = [g.embed(ring) for g in gens if not g.is_constant()]
    n = len(ring)
    if not gens:
        return [DerivationOp.partial(v, ring, p) for v in ring]
    J = PolyMatrix([[g.diff(v) for v in ring] for g in gens], p, ring)
    rho = generic_rank(J)
    k = n - rho
    if deg_bound is None:
        deg_bound = max(1, rho * max(0, J.degree()))
    for free in combinations(range(n), k):
        basis = []
        for v in free:
            e = _normalized_annihilator(ring, gens, p, v, [w for w in range(n) if w not in free], deg_bound)
            if e is None:
                break
            basis.append(e)
        else:
            return basis
    raise CertificationFailure(f"no normalized annihilator basis of rank {k} found", deg_bound)


def _normalized_annihilator(ring, gens, p, v, others, deg_bound) -> DerivationOp | None:
    monos = monomials_upto(len(ring), deg_bound)
    unknowns = [(w, mono) for mono in monos for w in others]
    cols = []
    for w, mono in unknowns:
        x = Poly.monomial(mono, p, ring)
        vec = {}
        for gi, g in enumerate(gens):
            for mm, c in (x * g.diff(ring[w])).terms.items():
                vec[(gi, mm)] = c
        cols.append(vec)
    target = {}
    for gi, g in enumerate(gens):
        for mm, c in g.diff(ring[v]).terms.items():
            target[(gi, mm)] = (-c) % p
    sol = linalg.solve(cols, target, p)
    if sol is None:
        return None
    vals = {ring[v]: Poly.const(1, p, ring)}
    for idx, c in sol.items():
        w, mono = unknowns[idx]
        vals[ring[w]] = vals.get(ring[w], Poly.zero(p, ring)) + Poly.monomial(mono, p, ring, c)
    D = DerivationOp.from_map(vals, ring, p)
    if any(not D.apply(g).is_zero() for g in gens):
        return None
    return D


def ekedahl_ann_of_subalgebra(alg: HorizontalAlgebra, deg_bound: int | None = None) -> list[DerivationOp]:
    return ekedahl_ann(alg.ring, alg.gens, alg.p, deg_bound)


def transversal_chart_check(e: Sequence[DerivationOp], f: Sequence[Poly]) -> Check:
    """``e_i(f_j) = delta_ij``."""
    bad = []
    for i, D in enumerate(e):
        for j, fj in enumerate(f):
            val = D.apply(fj.embed(D.ring) if fj.ring != D.ring else fj)
            if val != (1 if i == j else 0):
                bad.append(f"e_{i + 1}(f_{j + 1}) = {val}")
    return Check.of("chart.pairing", not bad, **({"violations": "; ".join(bad)} if bad else {}))


# linear bridge -----------------------------------------------------------------


def functor_G(C: LinearConnection, fiber_names: Sequence[str] | None = None):
    """Total space of a linear (lambda-)connection: ``D_i(a_j) = sum_k A_i[j,k] a_k``."""
    r = C.rank
    names = tuple(fiber_names) if fiber_names is not None else tuple(f"a{j + 1}" for j in range(r))
    if len(names) != r:
        raise ValueError("need one fiber name per basis vector")
    ring = C.base_vars + names
    p = C.p
    fvars = [Poly.var(a, p, ring) for a in names]
    ops = []
    for i, s in enumerate(C.base_vars):
        images: dict[str, Poly] = {s: Poly.const(C.lam, p, ring)}
        for j, a in enumerate(names):
            val = Poly.zero(p, ring)
            for k in range(r):
                e = C.A[i][j, k]
                if not e.is_zero():
                    val = val + e.embed(ring) * fvars[k]
            images[a] = val
        ops.append(DerivationOp.from_map(images, ring, p))
    if C.lam == 1:
        return FoliatedTotalSpace(C.base_vars, names, tuple(ops), p)
    if C.lam == 0:
        return HiggsTotalSpace(C.base_vars, names, tuple(ops), p)
    raise ValueError("only lambda = 0 or 1 has a total-space model here")


def linear_vertical_matrix(D: DerivationOp, base: Sequence[str], fiber: Sequence[str]) -> PolyMatrix | None:
    """Matrix ``M`` with ``D(a_j) = sum_k M[j,k] a_k`` if ``D`` is linear vertical, else ``None``."""
    p = D.p
    rows = []
    for a in fiber:
        val = D[a]
        row = [Poly.zero(p, base) for _ in fiber]
        for mono, c in val.terms.items():
            fexps = [mono[D.ring.index(b)] for b in fiber]
            if sum(fexps) != 1:
                return None
            k = fexps.index(1)
            bmono = {b: mono[D.ring.index(b)] for b in base}
            row[k] = row[k] + Poly.monomial(bmono, p, base, c)
        rows.append(row)
    if not D.is_vertical(base):
        return None
    return PolyMatrix(rows, p, tuple(base))
