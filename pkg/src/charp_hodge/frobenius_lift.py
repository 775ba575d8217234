"""Frobenius lifts modulo p^2 on affine coordinates and their zeta matrices.

A lift is recorded by polynomials ``a_i`` with ``F*(s_i) = s_i^p + p*a_i``.
Its divided differential has matrix ``f_ij = da_j/ds_i + delta_ij s_j^(p-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import RingMismatch
from .matrix import PolyMatrix
from .poly import Poly
from .report import Check


@dataclass(frozen=True, eq=False)
class FrobLift:
    base_vars: tuple[str, ...]
    a: tuple[Poly, ...]
    p: int

    def __post_init__(self) -> None:
        base = tuple(self.base_vars)
        object.__setattr__(self, "base_vars", base)
        if len(self.a) != len(base):
            raise ValueError("one lift polynomial per base variable is required")
        object.__setattr__(self, "a", tuple(x.embed(base) for x in self.a))

    @classmethod
    def parse(cls, base_vars: Sequence[str], a: Sequence[str], p: int) -> FrobLift:
        return cls(tuple(base_vars), tuple(Poly.parse(x, p, base_vars) for x in a), p)

    @classmethod
    def standard(cls, base_vars: Sequence[str], p: int) -> FrobLift:
        """The lift ``s_i -> s_i^p`` (all ``a_i = 0``)."""
        base = tuple(base_vars)
        return cls(base, tuple(Poly.zero(p, base) for _ in base), p)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrobLift):
            return NotImplemented
        return self.p == other.p and self.base_vars == other.base_vars and self.a == other.a

    def __hash__(self) -> int:
        return hash((self.p, self.base_vars, self.a))

    def __str__(self) -> str:
        return f"lift {{ vars = [{', '.join(self.base_vars)}]; a = [{', '.join(map(str, self.a))}] }}"


@dataclass(frozen=True, eq=False)
class ZetaMatrix:
    base_vars: tuple[str, ...]
    entries: PolyMatrix
    p: int

    def __getitem__(self, ij: tuple[int, int]) -> Poly:
        return self.entries[ij]

    @property
    def m(self) -> int:
        return len(self.base_vars)

    def with_entry(self, i: int, j: int, value: Poly) -> ZetaMatrix:
        rows = [list(r) for r in self.entries.rows]
        rows[i][j] = value
        return ZetaMatrix(self.base_vars, PolyMatrix(rows, self.p, self.base_vars), self.p)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ZetaMatrix):
            return NotImplemented
        return self.base_vars == other.base_vars and self.entries == other.entries


def zeta_matrix(L: FrobLift) -> ZetaMatrix:
    s = L.base_vars
    p = L.p
    rows = []
    for i, si in enumerate(s):
        row = []
        for j, sj in enumerate(s):
            f = L.a[j].diff(si)
            if i == j:
                f = f + Poly.var(sj, p, s) ** (p - 1)
            row.append(f)
        rows.append(row)
    return ZetaMatrix(s, PolyMatrix(rows, p, s), p)


def zeta_identities_check(Z: ZetaMatrix) -> list[Check]:
    """Symmetry of first derivatives and the ``(p-1)``-st derivative identity."""
    s = Z.base_vars
    p = Z.p
    m = len(s)
    bad_sym = []
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(m):
                if Z[i, k].diff(s[j]) != Z[j, k].diff(s[i]):
                    bad_sym.append(f"(i={i + 1}, j={j + 1}, k={k + 1})")
    bad_top = []
    for i in range(m):
        for j in range(m):
            got = Z[i, j].diff(s[i], p - 1)
            want = -1 if i == j else 0
            if got != want:
                bad_top.append(f"(i={i + 1}, j={j + 1}): {got}")
    sym = Check.of("zeta.symmetry", not bad_sym, **({"violations": "; ".join(bad_sym)} if bad_sym else {}))
    top = Check.of("zeta.top_derivative", not bad_top, **({"violations": "; ".join(bad_top)} if bad_top else {}))
    return [sym, top]


def zeta_iterate(Z: ZetaMatrix, n: int) -> PolyMatrix:
    """``Z * Z^[p] * ... * Z^[p^(n-1)]`` with ``Z^[q]`` substituting ``s -> s^q``."""
    if n < 1:
        raise ValueError("iterate count must be at least 1")
    out = Z.entries
    for k in range(1, n):
        out = out * Z.entries.frobenius(k)
    return out


def di_cocycle(La: FrobLift, Lb: FrobLift) -> tuple[Poly, ...]:
    """Difference ``h_j = a_j^alpha - a_j^beta`` of two lifts."""
    if La.base_vars != Lb.base_vars or La.p != Lb.p:
        raise RingMismatch("lifts over different bases")
    return tuple(x - y for x, y in zip(La.a, Lb.a))


def di_cocycle_checks(La: FrobLift, Lb: FrobLift) -> Check:
    """``dh_j/ds_i = (f^alpha - f^beta)_ij`` for the pair."""
    h = di_cocycle(La, Lb)
    fa, fb = zeta_matrix(La), zeta_matrix(Lb)
    s = La.base_vars
    bad = []
    for i, si in enumerate(s):
        for j in range(len(s)):
            if h[j].diff(si) != fa[i, j] - fb[i, j]:
                bad.append(f"(i={i + 1}, j={j + 1})")
    return Check.of("cocycle.differential", not bad, **({"violations": "; ".join(bad)} if bad else {}))
