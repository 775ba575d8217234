"""Filtered modules, the Rees family, Griffiths transversality and Fontaine periodicity.

Vectors of a filtration are coordinate columns with respect to the standard
basis ``e_1..e_r`` of ``B^r``.  An adapted basis ``u_1..u_r`` carries weights
``w_l`` with ``Fil^i = span{u_l : w_l >= i}``; the Rees basis is
``t^(-w_l) u_l``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import combinations, product
from typing import Sequence

from . import linalg
from .errors import RingMismatch
from .frobenius_lift import FrobLift
from .gluing import Chart, gluing_cocycle
from .linear import (
    LinearConnection,
    LinearHiggs,
    gauge_transform,
    intertwining_defect,
    inverse_cartier_linear,
    nilpotency_level,
    p_curvature_linear,
    solve_intertwiners,
)
from .matrix import PolyMatrix, generic_rank
from .poly import Poly, monomials_upto
from .report import Check, FAIL, INCONCLUSIVE, PASS


@dataclass(frozen=True, eq=False)
class FilteredModule:
    """``B^r`` with ``Fil^0 = B^r`` and ``Fil^i`` spanned by ``levels[i-1]``.

    Each level lists generating columns; ``Fil^i`` also contains ``Fil^(i+1)``,
    so a column need not be repeated at lower levels.
    """

    base_vars: tuple[str, ...]
    rank: int
    levels: tuple[tuple[tuple[Poly, ...], ...], ...]
    p: int

    def __post_init__(self) -> None:
        base = tuple(self.base_vars)
        object.__setattr__(self, "base_vars", base)
        lv = []
        for cols in self.levels:
            fixed = []
            for col in cols:
                if len(col) != self.rank:
                    raise ValueError(f"filtration vector of length {len(col)} in rank {self.rank}")
                fixed.append(tuple(_as_poly(x, self.p, base) for x in col))
            lv.append(tuple(fixed))
        while lv and not any(any(not x.is_zero() for x in c) for c in lv[-1]):
            lv.pop()
        object.__setattr__(self, "levels", tuple(lv))

    @classmethod
    def trivial(cls, base_vars: Sequence[str], rank: int, p: int) -> FilteredModule:
        return cls(tuple(base_vars), rank, (), p)

    @property
    def level(self) -> int:
        return len(self.levels)

    def generators(self, i: int) -> list[tuple[Poly, ...]]:
        """Columns generating ``Fil^i`` (including those of higher levels)."""
        if i <= 0:
            return [tuple(Poly.const(1 if a == b else 0, self.p, self.base_vars) for a in range(self.rank)) for b in range(self.rank)]
        out = []
        for k in range(i, self.level + 1):
            out.extend(self.levels[k - 1])
        return out

    def matrix(self, i: int) -> PolyMatrix:
        cols = self.generators(i)
        if not cols:
            return PolyMatrix.zeros(self.rank, 0, self.p, self.base_vars)
        return PolyMatrix([[c[a] for c in cols] for a in range(self.rank)], self.p, self.base_vars)

    def generic_rank(self, i: int) -> int:
        cols = self.generators(i)
        return generic_rank(self.matrix(i)) if cols else 0

    def transformed(self, g: PolyMatrix) -> FilteredModule:
        """The same filtration written in the basis ``e' = g e`` (columns map by ``(g^-1)^T``)."""
        T = g.inverse().transpose()
        lv = []
        for cols in self.levels:
            new = []
            for col in cols:
                vec = PolyMatrix([[x] for x in col], self.p, self.base_vars)
                out = T * vec
                new.append(tuple(out[a, 0] for a in range(self.rank)))
            lv.append(tuple(new))
        return FilteredModule(self.base_vars, self.rank, tuple(lv), self.p)

    def __str__(self) -> str:
        levels = ", ".join("[" + ", ".join("[" + ", ".join(map(str, c)) + "]" for c in cols) + "]" for cols in self.levels)
        return f"filtration = [{levels}]"


def _as_poly(x, p: int, base: tuple[str, ...]) -> Poly:
    if isinstance(x, Poly):
        return x.embed(base)
    if isinstance(x, str):
        return Poly.parse(x, p, base)
    return Poly.const(int(x), p, base)


@dataclass(frozen=True, eq=False)
class ReesModule:
    """Adapted basis (columns of ``basis``) with weights; the Rees basis is ``t^(-w) u``."""

    base_vars: tuple[str, ...]
    rank: int
    basis: PolyMatrix
    weights: tuple[int, ...]
    p: int

    def gauge(self) -> PolyMatrix:
        """``g`` with ``u = g e`` in the row convention."""
        return self.basis.transpose()


@dataclass(frozen=True)
class NonSplitFiltration:
    """No adapted basis was produced.

    ``certified`` means a rank drop at an F_p-point proves the filtration
    is not locally split; otherwise the elimination simply found no unit pivot.
    """

    level: int
    reason: str
    certified: bool
    point: dict[str, int] | None = None


def _fp_points(base: tuple[str, ...], p: int):
    for vals in product(range(p), repeat=len(base)):
        yield dict(zip(base, vals))


def fiber_rank_defects(M: FilteredModule) -> list[tuple[int, dict[str, int], int, int]]:
    """``(i, point, rank at point, generic rank)`` wherever ``Fil^i`` drops rank at an F_p-point."""
    out = []
    for i in range(1, M.level + 1):
        mat = M.matrix(i)
        g = M.generic_rank(i)
        for pt in _fp_points(M.base_vars, M.p):
            r = mat.rank_at(pt)
            if r != g:
                out.append((i, pt, r, g))
    return out


def adapted_basis(M: FilteredModule) -> ReesModule | NonSplitFiltration:
    """Unit-pivot column reduction, top level first.

    Each new column is reduced against the adapted vectors found so far and is
    kept only if some non-pivot entry is a nonzero constant; that entry becomes
    its pivot.  Older vectors are never modified, so the vectors chosen at
    levels ``>= i`` span ``Fil^i`` exactly.
    """
    p, r, base = M.p, M.rank, M.base_vars
    vecs: list[list[Poly]] = []
    pivots: list[int] = []
    weights: list[int] = []
    for i in range(M.level, 0, -1):
        for col in M.levels[i - 1]:
            res = list(col)
            for v, piv in zip(vecs, pivots):
                c = res[piv]
                if not c.is_zero():
                    res = [x - c * y for x, y in zip(res, v)]
            if all(x.is_zero() for x in res):
                continue
            piv = next((a for a in range(r) if a not in pivots and res[a].is_constant() and not res[a].is_zero()), None)
            if piv is None:
                defects = [d for d in fiber_rank_defects(M) if d[0] >= i]
                if defects:
                    lvl, pt, got, want = defects[0]
                    return NonSplitFiltration(
                        lvl, f"Fil^{lvl} has rank {got} at {_fmt_point(pt)} but generic rank {want}", True, pt
                    )
                return NonSplitFiltration(i, f"no unit pivot in reduced column {[str(x) for x in res]}", False)
            inv = pow(res[piv].constant_value(), -1, p)
            vecs.append([x.scale(inv) for x in res])
            pivots.append(piv)
            weights.append(i)
    # unit pivots make the pivot block unitriangular, so standard vectors complete the basis
    for k in range(r):
        if k not in pivots:
            vecs.append([Poly.const(1 if a == k else 0, p, base) for a in range(r)])
            pivots.append(k)
            weights.append(0)
    if len(vecs) != r:
        return NonSplitFiltration(0, f"only {len(vecs)} of {r} adapted vectors found", False)
    P = PolyMatrix([[v[a] for v in vecs] for a in range(r)], p, base)
    if not P.is_unimodular():
        return NonSplitFiltration(0, f"adapted vectors have determinant {P.det()}", False)
    return ReesModule(base, r, P, tuple(weights), p)


def _fmt_point(pt: dict[str, int]) -> str:
    return "(" + ", ".join(f"{k}={v}" for k, v in pt.items()) + ")"


def rees_build(M: FilteredModule) -> ReesModule | NonSplitFiltration:
    return adapted_basis(M)


def rees_fiber_checks(M: FilteredModule, R: ReesModule) -> list[Check]:
    """t=1 fiber: adapted vectors form a basis and span each ``Fil^i``; t=0 fiber: graded ranks."""
    out = [Check.of("fiber.t1.basis", R.basis.is_unimodular(), det=str(R.basis.det()))]
    bad = []
    for i in range(1, M.level + 1):
        keep = {l for l, w in enumerate(R.weights) if w >= i}
        for col in M.generators(i):
            if not _in_span(R, col, keep):
                bad.append(f"Fil^{i} generator {[str(x) for x in col]}")
    out.append(Check.of("fiber.t1.filtration", not bad, **({"violations": "; ".join(bad)} if bad else {})))
    bad = []
    for i in range(M.level + 1):
        want = M.generic_rank(i) - (M.generic_rank(i + 1) if i < M.level else 0)
        got = sum(1 for w in R.weights if w == i)
        if got != want:
            bad.append(f"gr^{i}: {got} basis vectors, rank {want}")
    out.append(Check.of("fiber.t0.graded", not bad, **({"violations": "; ".join(bad)} if bad else {})))
    return out


def _in_span(R: ReesModule, col, keep: set[int]) -> bool:
    """``col`` lies in the B-span of the kept adapted vectors (exact, via the inverse basis)."""
    inv = R.basis.inverse()
    vec = PolyMatrix([[x] for x in col], R.p, R.base_vars)
    coords = inv * vec
    return all(coords[l, 0].is_zero() for l in range(R.rank) if l not in keep)


def splitting_checks(M: FilteredModule) -> list[Check]:
    """Split filtration, successful Rees build and constant fiber ranks must agree."""
    R = adapted_basis(M)
    defects = fiber_rank_defects(M)
    out = []
    if isinstance(R, ReesModule):
        out.append(Check.passed("split.adapted_basis", weights=list(R.weights)))
        out.extend(c.prefixed("split") for c in rees_fiber_checks(M, R))
        ok = not defects
        w = {} if ok else {"defect": _fmt_defect(defects[0])}
        out.append(Check.of("split.constant_fiber_rank", ok, **w))
    elif R.certified:
        out.append(Check.failed("split.adapted_basis", reason=R.reason))
    else:
        out.append(Check.inconclusive("split.adapted_basis", reason=R.reason, fiber_ranks="constant at F_p-points"))
    return out


def _fmt_defect(d) -> str:
    i, pt, got, want = d
    return f"Fil^{i} rank {got} at {_fmt_point(pt)}, generic {want}"


# Griffiths transversality -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TConnection:
    """``t * nabla`` on the Rees basis: entries ``t^(1 + w_l - w_k) A'[k, l]``."""

    base_vars: tuple[str, ...]
    weights: tuple[int, ...]
    adapted: LinearConnection
    tvar: str
    matrices: tuple[PolyMatrix, ...]
    p: int

    def fiber(self, value: int) -> tuple[PolyMatrix, ...]:
        return tuple(M.substitute({self.tvar: value}).embed(self.base_vars) for M in self.matrices)

    def graded_higgs(self) -> LinearConnection:
        return LinearHiggs(self.base_vars, len(self.weights), self.fiber(0), self.p)


@dataclass(frozen=True)
class GriffithsViolation:
    direction: int
    row: int
    col: int
    entry: str
    drop: int


def _tvar(base: Sequence[str]) -> str:
    name = "t"
    while name in base:
        name += "_"
    return name


def griffiths_extend(C: LinearConnection, R: ReesModule) -> TConnection | GriffithsViolation:
    if C.base_vars != R.base_vars or C.rank != R.rank or C.p != R.p:
        raise RingMismatch("connection and filtered module do not match")
    Ad = gauge_transform(C, R.gauge())
    w = R.weights
    tv = _tvar(C.base_vars)
    ring = C.base_vars + (tv,)
    T = Poly.var(tv, C.p, ring)
    mats = []
    for i, A in enumerate(Ad.A):
        rows = []
        for k in range(C.rank):
            row = []
            for l in range(C.rank):
                e = A[k, l]
                ex = 1 + w[l] - w[k]
                if ex < 0 and not e.is_zero():
                    return GriffithsViolation(i, k, l, str(e), w[k] - w[l])
                row.append(Poly.zero(C.p, ring) if e.is_zero() else e.embed(ring) * T**ex)
            rows.append(row)
        mats.append(PolyMatrix(rows, C.p, ring))
    return TConnection(C.base_vars, w, Ad, tv, tuple(mats), C.p)


def weight_bookkeeping_check(T: TConnection) -> Check:
    """Every entry is ``t^(1 + w_l - w_k)`` times a t-free polynomial, and the t=1 fiber is the adapted connection."""
    bad = []
    for i, M in enumerate(T.matrices):
        for k, l in product(range(len(T.weights)), repeat=2):
            e = M[k, l]
            if e.is_zero():
                continue
            ex = 1 + T.weights[l] - T.weights[k]
            idx = e.ring.index(T.tvar)
            if any(mono[idx] != ex for mono in e.terms):
                bad.append(f"A[{i + 1}][{k + 1},{l + 1}] = {e}")
    if tuple(T.fiber(1)) != T.adapted.A:
        bad.append("t=1 fiber differs from the adapted connection")
    return Check.of("griffiths.weights", not bad, **({"violations": "; ".join(bad)} if bad else {}))


# Fontaine periodicity ----------------------------------------------------------


@dataclass
class FontaineOutcome:
    status: str
    checks: list[Check]
    witness: PolyMatrix | None = None
    graded: LinearConnection | None = None
    transform: LinearConnection | None = None


def default_witness_bound(C: LinearConnection) -> int:
    return 2 * (1 + max(0, max((A.degree() for A in C.A), default=0)))


def find_invertible(basis: Sequence[PolyMatrix], seed: int = 0, tries: int = 64) -> PolyMatrix | None:
    """A unimodular element of the F_p-span of ``basis``, or ``None``.

    ``basis`` should span a space closed under multiplication by p-th powers.
    Random combinations are drawn degree by degree from a complement of the
    p-th power multiples of lower-degree elements, which cannot help a
    determinant become constant.
    """
    for B in basis:
        if B.is_unimodular():
            return B
    if len(basis) < 2:
        return None
    basis = _degree_echelon(basis)
    rng = random.Random(seed)
    p, ring = basis[0].p, basis[0].ring
    frob = linalg.EchelonSpace(p)
    pool: list[PolyMatrix] = []
    for d in sorted({B.degree() for B in basis}):
        level = [B for B in basis if B.degree() == d]
        lower = [B for B in basis if B.degree() < d]
        for B in lower:
            for mono in _pth_power_monos(ring, p, d - B.degree()):
                frob.add(_flat(B * Poly.monomial(mono, p, ring)), None)
        pool += [B for B in level if not frob.contains(_flat(B))]
        if len(pool) < 2:
            continue
        for _ in range(tries):
            coeffs = [rng.randrange(p) for _ in pool]
            if not any(coeffs):
                continue
            M = PolyMatrix.zeros(*pool[0].shape, p, ring)
            for c, B in zip(coeffs, pool):
                if c:
                    M = M + B * c
            if M.is_unimodular():
                return M
    return None


def _pth_power_monos(ring: tuple[str, ...], p: int, top: int) -> list[tuple[int, ...]]:
    """Nonconstant monomials in ``s_i^p`` of degree at most ``top``."""
    return [tuple(p * e for e in m) for m in monomials_upto(len(ring), top // p) if any(m)]


def _flat(B: PolyMatrix) -> dict:
    rows, cols = B.shape
    return {(-sum(m), m, a, b): c for a, b in product(range(rows), range(cols)) for m, c in B[a, b].terms.items()}


def _degree_echelon(basis: Sequence[PolyMatrix]) -> list[PolyMatrix]:
    """Same span, reduced so that the degree of a combination is the largest degree involved."""
    p, ring = basis[0].p, basis[0].ring
    rows, cols = basis[0].shape
    space = linalg.EchelonSpace(p)
    for j, B in enumerate(basis):
        space.add(_flat(B), j)
    out = []
    for vec in space.rows():
        M = [[Poly.zero(p, ring) for _ in range(cols)] for _ in range(rows)]
        for (_, mono, a, b), c in vec.items():
            M[a][b] = M[a][b] + Poly.monomial(mono, p, ring, c)
        out.append(PolyMatrix(M, p, ring))
    return out


def is_witness(C1: LinearConnection, C2: LinearConnection, phi: PolyMatrix) -> bool:
    return phi.is_unimodular() and all(D.is_zero() for D in intertwining_defect(C1, C2, phi))


def p_curvature_rank_obstruction(C1: LinearConnection, C2: LinearConnection) -> str | None:
    """An F_p-point and direction where the p-curvatures have different ranks, if any."""
    psi1, psi2 = p_curvature_linear(C1).psi, p_curvature_linear(C2).psi
    for pt in _fp_points(C1.base_vars, C1.p):
        for i, (a, b) in enumerate(zip(psi1, psi2)):
            ra, rb = a.rank_at(pt), b.rank_at(pt)
            if ra != rb:
                return f"psi_{i + 1} has rank {ra} vs {rb} at {_fmt_point(pt)}"
    return None


def fontaine_periodicity_check(
    C: LinearConnection,
    M: FilteredModule,
    L: FrobLift,
    *,
    deg_bound: int | None = None,
    seed: int = 0,
    n_max: int = 4,
) -> FontaineOutcome:
    """Search for ``phi`` carrying the inverse Cartier transform of ``-theta_gr`` to ``C``.

    ``theta_gr`` is the t=0 fiber of the Rees extension.  A found witness
    gives ``pass``; a mismatch in p-curvature ranks at an F_p-point refutes
    periodicity (``fail``); otherwise the bounded search is ``inconclusive``.
    """
    checks: list[Check] = []
    if M.level > C.p - 1:
        checks.append(Check.failed("fontaine.level", level=M.level, bound=C.p - 1))
        return FontaineOutcome(FAIL, checks)
    R = adapted_basis(M)
    if isinstance(R, NonSplitFiltration):
        st = Check.failed if R.certified else Check.inconclusive
        checks.append(st("fontaine.adapted_basis", reason=R.reason))
        return FontaineOutcome(checks[-1].status, checks)
    checks.append(Check.passed("fontaine.adapted_basis", weights=list(R.weights)))
    T = griffiths_extend(C, R)
    if isinstance(T, GriffithsViolation):
        checks.append(
            Check.failed(
                "fontaine.griffiths",
                direction=T.direction + 1,
                entry=f"[{T.row + 1},{T.col + 1}] = {T.entry}",
                drop=T.drop,
            )
        )
        return FontaineOutcome(FAIL, checks)
    checks.append(Check.passed("fontaine.griffiths"))
    theta = T.graded_higgs()
    if nilpotency_level(theta, n_max) is None:
        checks.append(Check.failed("fontaine.nilpotent", note=f"graded Higgs field not nilpotent of level <= {n_max}"))
        return FontaineOutcome(FAIL, checks, graded=theta)
    neg = LinearConnection(theta.base_vars, theta.rank, 0, tuple(-A for A in theta.A), theta.p)
    Ct = inverse_cartier_linear(neg, L, n_max)
    bound = default_witness_bound(C) if deg_bound is None else deg_bound
    ident = PolyMatrix.identity(C.rank, C.p, C.base_vars)
    space: list[PolyMatrix] = []
    if is_witness(Ct, C, ident):
        phi = ident
    else:
        space = solve_intertwiners(Ct, C, bound)
        phi = find_invertible(space, seed)
    if phi is not None:
        checks.append(Check.passed("fontaine.witness", phi=str(phi), deg_bound=bound))
        return FontaineOutcome(PASS, checks, phi, theta, Ct)
    obstruction = p_curvature_rank_obstruction(Ct, C)
    if obstruction is not None:
        checks.append(Check.failed("fontaine.witness", refuted=obstruction, graded_higgs=str(theta)))
        return FontaineOutcome(FAIL, checks, None, theta, Ct)
    checks.append(
        Check.inconclusive(
            "fontaine.witness", deg_bound=bound, intertwiners=len(space), note="no invertible witness in bound"
        )
    )
    return FontaineOutcome(INCONCLUSIVE, checks, None, theta, Ct)


def taylor_rule_check(theta: LinearConnection, La: FrobLift, Lb: FrobLift, n_max: int = 4) -> list[Check]:
    """Two-chart compatibility of Frobenius witnesses.

    Take ``C = C^-1_beta(-theta)`` with witness ``psi_beta = I``; the cocycle
    for ``-theta`` turns it into a witness ``psi_alpha`` for the other chart.
    """
    neg = LinearConnection(theta.base_vars, theta.rank, 0, tuple(-A for A in theta.A), theta.p)
    Ca = inverse_cartier_linear(neg, La, n_max)
    Cb = inverse_cartier_linear(neg, Lb, n_max)
    psi_b = PolyMatrix.identity(theta.rank, theta.p, theta.base_vars)
    g = gluing_cocycle([Chart("alpha", La), Chart("beta", Lb)], neg)
    psi_a = psi_b * g["alpha", "beta"].inverse()
    return [
        Check.of("taylor.beta", is_witness(Cb, Cb, psi_b)),
        Check.of("taylor.alpha", is_witness(Ca, Cb, psi_a), psi_alpha=str(psi_a)),
    ]


def graded_higgs_checks(T: TConnection) -> list[Check]:
    """The graded field lowers weight by exactly one and its components commute."""
    theta = T.graded_higgs()
    bad = []
    for i, A in enumerate(theta.A):
        for k, l in product(range(theta.rank), repeat=2):
            if not A[k, l].is_zero() and T.weights[l] != T.weights[k] - 1:
                bad.append(f"theta[{i + 1}][{k + 1},{l + 1}]")
    comm = [
        f"[theta_{i + 1}, theta_{j + 1}]"
        for i, j in combinations(range(theta.m), 2)
        if not theta.A[i].commutator(theta.A[j]).is_zero()
    ]
    return [
        Check.of("graded.weight", not bad, **({"violations": ", ".join(bad)} if bad else {})),
        Check.of("graded.commuting", not comm, **({"violations": ", ".join(comm)} if comm else {})),
    ]

