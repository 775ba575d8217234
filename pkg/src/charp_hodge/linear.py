"""Connections, lambda-connections and Higgs fields on free modules.

Matrices follow the row convention: along ``d/ds_i`` the operator sends the
basis vector ``e_j`` to ``sum_k A_i[j, k] e_k``, so a section with coordinate
row vector ``v`` goes to ``lambda * dv/ds_i + v A_i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

from . import linalg
from .derivations import DerivationOp
from .errors import CertificationFailure, NotNilpotent, RingMismatch
from .frobenius_lift import FrobLift, zeta_iterate, zeta_matrix
from .matrix import PolyMatrix
from .poly import Poly, monomials_upto
from .report import Check


@dataclass(frozen=True, eq=False)
class LinearConnection:
    """``lam * d/ds_i + A_i`` on ``B^r`` with ``B = F_p[base_vars]``."""

    base_vars: tuple[str, ...]
    rank: int
    lam: int
    A: tuple[PolyMatrix, ...]
    p: int

    def __post_init__(self) -> None:
        base = tuple(self.base_vars)
        object.__setattr__(self, "base_vars", base)
        object.__setattr__(self, "lam", self.lam % self.p)
        if len(self.A) != len(base):
            raise ValueError("one matrix per base variable is required")
        mats = []
        for M in self.A:
            if M.shape != (self.rank, self.rank):
                raise ValueError(f"expected {self.rank}x{self.rank} matrices, got {M.shape}")
            mats.append(_restrict(M, base))
        object.__setattr__(self, "A", tuple(mats))

    @property
    def m(self) -> int:
        return len(self.base_vars)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinearConnection):
            return NotImplemented
        return (
            self.p == other.p
            and self.base_vars == other.base_vars
            and self.rank == other.rank
            and self.lam == other.lam
            and all(x == y for x, y in zip(self.A, other.A))
        )

    def __hash__(self) -> int:
        return hash((self.p, self.base_vars, self.rank, self.lam))

    def __str__(self) -> str:
        mats = "; ".join(f"A[{i + 1}] = {M}" for i, M in enumerate(self.A))
        base = ", ".join(self.base_vars)
        return f"connection {{ base = [{base}]; lambda = {self.lam}; rank = {self.rank}; {mats} }}"


def _restrict(M: PolyMatrix, base: tuple[str, ...]) -> PolyMatrix:
    return PolyMatrix([[e.embed(base) for e in row] for row in M.rows], M.p, base)


def LinearHiggs(base_vars: Sequence[str], rank: int, theta: Sequence[PolyMatrix], p: int) -> LinearConnection:
    """A Higgs field is a 0-connection."""
    return LinearConnection(tuple(base_vars), rank, 0, tuple(theta), p)


@dataclass(frozen=True, eq=False)
class PCurvatureTensor:
    base_vars: tuple[str, ...]
    psi: tuple[PolyMatrix, ...]
    p: int

    def is_zero(self) -> bool:
        return all(M.is_zero() for M in self.psi)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PCurvatureTensor):
            return NotImplemented
        return self.base_vars == other.base_vars and all(x == y for x, y in zip(self.psi, other.psi))

    def __hash__(self) -> int:
        return hash(self.base_vars)


def curvature(C: LinearConnection) -> dict[tuple[int, int], PolyMatrix]:
    """Components ``lam (d_i A_j - d_j A_i) - [A_i, A_j]`` for ``i < j`` (0-based).

    The sign of the bracket is the one forced by the row convention: this is
    exactly the matrix of ``[nabla_i, nabla_j]`` on the basis.
    """
    s = C.base_vars
    out = {}
    for i, j in combinations(range(C.m), 2):
        Ai, Aj = C.A[i], C.A[j]
        comp = (Aj.diff(s[i]) - Ai.diff(s[j])) * C.lam - Ai.commutator(Aj)
        out[(i, j)] = comp
    return out


def is_integrable(C: LinearConnection) -> bool:
    return all(M.is_zero() for M in curvature(C).values())


def p_curvature_linear(C: LinearConnection) -> PCurvatureTensor:
    """``B_1 = A_i``, ``B_{k+1} = d_i B_k + B_k A_i``, ``psi_i = B_p``."""
    if C.lam != 1:
        raise ValueError("p-curvature is defined here for lambda = 1")
    out = []
    for i, si in enumerate(C.base_vars):
        A = C.A[i]
        B = A
        for _ in range(C.p - 1):
            B = B.diff(si) + B * A
        out.append(B)
    return PCurvatureTensor(C.base_vars, tuple(out), C.p)


def matrix_p_power(M: PolyMatrix, times: int = 1) -> PolyMatrix:
    """Restricted power of a linear vertical field: the plain matrix power ``M^(p^times)``.

    On the coordinate frame the vertical field ``a -> M a`` kills its own
    coefficients, so its p-th power is the matrix power; coefficient
    Frobenius does not enter here.
    """
    for _ in range(times):
        M = M ** M.p
    return M


def nilpotency_level(data, n_max: int) -> int | None:
    """Least ``n <= n_max`` with every component's ``n``-fold restricted power zero.

    Accepts a :class:`PCurvatureTensor`, a Higgs :class:`LinearConnection`,
    a plain sequence of matrices, or a sequence of vertical derivations.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if isinstance(data, PCurvatureTensor):
        comps = list(data.psi)
    elif isinstance(data, LinearConnection):
        if data.lam != 0:
            raise ValueError("nilpotency level is defined for Higgs data (lambda = 0)")
        comps = list(data.A)
    elif hasattr(data, "theta"):
        comps = list(data.theta)
    elif hasattr(data, "psi"):
        comps = list(data.psi)
    else:
        comps = list(data)
    if not comps:
        return 0
    if isinstance(comps[0], DerivationOp):
        from .derivations import p_power

        step = p_power
    else:
        step = matrix_p_power
    for n in range(n_max + 1):
        if all(c.is_zero() for c in comps):
            return n
        if n == n_max:
            break
        comps = [step(c) for c in comps]
    return None


def frobenius_pullback(H: LinearConnection) -> tuple[PolyMatrix, ...]:
    """Entries of ``theta`` with every base variable raised to the p-th power."""
    return tuple(M.frobenius(1, H.base_vars) for M in H.A)


def inverse_cartier_linear(H: LinearConnection, L: FrobLift, n_max: int = 4) -> LinearConnection:
    """Connection on the Frobenius pullback of a nilpotent Higgs field.

    ``A_i = -sum_n sum_k F^(n+1)[i, k] (Theta_k)^(p^n)`` where ``Theta`` is the
    pulled back Higgs field and ``F^(n)`` the iterated zeta matrix.
    """
    if H.lam != 0:
        raise ValueError("inverse Cartier transform expects Higgs data (lambda = 0)")
    if L.base_vars != H.base_vars or L.p != H.p:
        raise RingMismatch("lift and Higgs field live over different bases")
    Theta = frobenius_pullback(H)
    level = nilpotency_level(list(Theta), n_max)
    if level is None:
        raise NotNilpotent(f"Higgs field is not nilpotent of level <= {n_max}")
    Z = zeta_matrix(L)
    m, r, p = H.m, H.rank, H.p
    A = [PolyMatrix.zeros(r, r, p, H.base_vars) for _ in range(m)]
    powers = list(Theta)
    for n in range(level):
        F = zeta_iterate(Z, n + 1)
        for i in range(m):
            for k in range(m):
                if not F[i, k].is_zero():
                    A[i] = A[i] - powers[k] * F[i, k]
        powers = [matrix_p_power(M) for M in powers]
    return LinearConnection(H.base_vars, r, 1, tuple(A), p)


def gauge_transform(C: LinearConnection, g: PolyMatrix) -> LinearConnection:
    """Rewrite ``C`` in the basis ``e' = g e``: ``A' = lam (d g) g^-1 + g A g^-1``."""
    ginv = g.inverse()
    mats = []
    for i, si in enumerate(C.base_vars):
        M = g * C.A[i] * ginv
        if C.lam:
            M = M + g.diff(si) * ginv * C.lam
        mats.append(_restrict(M, C.base_vars))
    return LinearConnection(C.base_vars, C.rank, C.lam, tuple(mats), C.p)


def intertwining_defect(C1: LinearConnection, C2: LinearConnection, phi: PolyMatrix) -> list[PolyMatrix]:
    """``lam d(phi) + phi A1 - A2 phi`` for each direction; zero iff ``phi`` carries C1 to C2."""
    out = []
    for i, si in enumerate(C1.base_vars):
        D = phi * C1.A[i] - C2.A[i] * phi
        if C1.lam:
            D = D + phi.diff(si) * C1.lam
        out.append(D)
    return out


def solve_intertwiners(
    C1: LinearConnection, C2: LinearConnection, deg_bound: int
) -> list[PolyMatrix]:
    """Basis over F_p of matrices ``phi`` of degree <= deg_bound with ``phi: C1 -> C2`` parallel."""
    if C1.base_vars != C2.base_vars or C1.lam != C2.lam:
        raise RingMismatch("connections over different bases")
    p, r, base = C1.p, C1.rank, C1.base_vars
    monos = monomials_upto(len(base), deg_bound)
    unknowns = [(a, b, mono) for mono in monos for a in range(r) for b in range(r)]
    images = []
    for a, b, mono in unknowns:
        E = [[Poly.zero(p, base)] * r for _ in range(r)]
        E[a] = list(E[a])
        E[a][b] = Poly.monomial(mono, p, base)
        phi = PolyMatrix(E, p, base)
        vec = {}
        for i, D in enumerate(intertwining_defect(C1, C2, phi)):
            for x in range(r):
                for y in range(r):
                    for mm, c in D[x, y].terms.items():
                        vec[(i, x, y, mm)] = c
        images.append(vec)
    out = []
    for dep in linalg.kernel(images, p):
        rows = [[Poly.zero(p, base) for _ in range(r)] for _ in range(r)]
        for idx, c in dep.items():
            a, b, mono = unknowns[idx]
            rows[a][b] = rows[a][b] + Poly.monomial(mono, p, base, c)
        out.append(PolyMatrix(rows, p, base))
    return out


def horizontal_sections(C: LinearConnection, deg_bound: int) -> list[list[Poly]]:
    """F_p-basis of row vectors ``v`` with ``dv/ds_i + v A_i = 0`` in degree <= deg_bound."""
    p, r, base = C.p, C.rank, C.base_vars
    monos = monomials_upto(len(base), deg_bound)
    unknowns = [(a, mono) for mono in monos for a in range(r)]
    images = []
    for a, mono in unknowns:
        x = Poly.monomial(mono, p, base)
        vec = {}
        for i, si in enumerate(base):
            dx = x.diff(si)
            for k in range(r):
                val = C.A[i][a, k] * x
                if k == a:
                    val = val + dx * C.lam
                for mm, c in val.terms.items():
                    key = (i, k, mm)
                    vec[key] = (vec.get(key, 0) + c) % p
        images.append({k: v for k, v in vec.items() if v})
    out = []
    for dep in linalg.kernel(images, p):
        v = [Poly.zero(p, base) for _ in range(r)]
        for idx, c in dep.items():
            a, mono = unknowns[idx]
            v[a] = v[a] + Poly.monomial(mono, p, base, c)
        out.append(v)
    return out


def default_linear_bound(C: LinearConnection) -> int:
    return C.p * (1 + max(0, max((M.degree() for M in C.A), default=0)))


def cartier_descend_linear(C: LinearConnection, deg_bound: int | None = None) -> PolyMatrix:
    """Rows form a basis of ``B^r`` consisting of horizontal sections.

    Searches degree by degree for horizontal vectors whose value at the origin
    is each standard basis vector, then certifies that their determinant is a
    nonzero constant.  Raises :class:`CertificationFailure` otherwise.
    """
    if C.lam != 1:
        raise ValueError("Cartier descent expects a connection (lambda = 1)")
    if not p_curvature_linear(C).is_zero():
        raise ValueError("p-curvature is not zero; the connection does not descend")
    bound = default_linear_bound(C) if deg_bound is None else deg_bound
    p, r, base = C.p, C.rank, C.base_vars
    origin = {v: 0 for v in base}
    chosen: list[list[Poly] | None] = [None] * r
    for d in range(bound + 1):
        sols = horizontal_sections(C, d)
        values = [{k: v[k].evaluate(origin) for k in range(r) if v[k].evaluate(origin)} for v in sols]
        space = linalg.EchelonSpace(p)
        for j, val in enumerate(values):
            space.add(val, j)
        for k in range(r):
            if chosen[k] is not None:
                continue
            combo = space.express({k: 1})
            if combo is None:
                continue
            vec = [Poly.zero(p, base) for _ in range(r)]
            for j, c in combo.items():
                vec = [x + y * c for x, y in zip(vec, sols[j])]
            chosen[k] = vec
        if all(v is not None for v in chosen):
            H = PolyMatrix(chosen, p, base)
            if H.is_unimodular():
                return H
    raise CertificationFailure("no horizontal basis with constant determinant found", bound)


def linear_checks(C: LinearConnection) -> list[Check]:
    checks = []
    curv = curvature(C)
    bad = {k: M for k, M in curv.items() if not M.is_zero()}
    checks.append(
        Check.of(
            "integrable",
            not bad,
            **{f"curvature[{i + 1},{j + 1}]": str(M) for (i, j), M in bad.items()},
        )
    )
    return checks
