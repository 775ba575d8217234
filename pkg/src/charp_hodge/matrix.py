"""Square and rectangular matrices with polynomial entries."""

from __future__ import annotations

from itertools import permutations
from typing import Callable, Iterable, Sequence

from .errors import RingMismatch
from .poly import Poly, union_ring


class PolyMatrix:
    """Immutable matrix of :class:`Poly` entries sharing one ring."""

    __slots__ = ("p", "ring", "rows")

    def __init__(self, rows: Sequence[Sequence[Poly | int]], p: int, ring: Sequence[str] = ()):
        polys = [e for row in rows for e in row if isinstance(e, Poly)]
        ring = union_ring(tuple(ring), *(e.ring for e in polys))
        for e in polys:
            if e.p != p:
                raise RingMismatch(f"entry over F_{e.p} in a matrix over F_{p}")
        self.p = p
        self.ring = ring
        self.rows = tuple(
            tuple(e.embed(ring) if isinstance(e, Poly) else Poly.const(int(e), p, ring) for e in row)
            for row in rows
        )
        width = {len(r) for r in self.rows}
        if len(width) > 1:
            raise ValueError("ragged matrix")

    @classmethod
    def zeros(cls, nrows: int, ncols: int, p: int, ring: Sequence[str] = ()) -> PolyMatrix:
        return cls([[0] * ncols for _ in range(nrows)], p, ring)

    @classmethod
    def identity(cls, n: int, p: int, ring: Sequence[str] = ()) -> PolyMatrix:
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)], p, ring)

    @classmethod
    def parse(cls, rows: Sequence[Sequence[str]], p: int, ring: Sequence[str]) -> PolyMatrix:
        return cls([[Poly.parse(e, p, ring) for e in row] for row in rows], p, ring)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), (len(self.rows[0]) if self.rows else 0)

    def __getitem__(self, ij: tuple[int, int]) -> Poly:
        i, j = ij
        return self.rows[i][j]

    def entries(self) -> Iterable[Poly]:
        for row in self.rows:
            yield from row

    def map(self, fn: Callable[[Poly], Poly]) -> PolyMatrix:
        return PolyMatrix([[fn(e) for e in row] for row in self.rows], self.p, self.ring)

    def embed(self, ring: Sequence[str]) -> PolyMatrix:
        return PolyMatrix(self.rows, self.p, ring)

    def is_zero(self) -> bool:
        return all(e.is_zero() for e in self.entries())

    def is_constant(self) -> bool:
        return all(e.is_constant() for e in self.entries())

    def degree(self) -> int:
        return max((e.degree() for e in self.entries()), default=-1)

    def _coerce(self, other: PolyMatrix) -> tuple[PolyMatrix, PolyMatrix]:
        if other.p != self.p:
            raise RingMismatch("matrices over different fields")
        if other.ring == self.ring:
            return self, other
        ring = union_ring(self.ring, other.ring)
        return self.embed(ring), other.embed(ring)

    def __add__(self, other: PolyMatrix) -> PolyMatrix:
        a, b = self._coerce(other)
        if a.shape != b.shape:
            raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
        return PolyMatrix([[x + y for x, y in zip(r, s)] for r, s in zip(a.rows, b.rows)], a.p, a.ring)

    def __neg__(self) -> PolyMatrix:
        return self.map(lambda e: -e)

    def __sub__(self, other: PolyMatrix) -> PolyMatrix:
        return self + (-other)

    def __mul__(self, other) -> PolyMatrix:
        if isinstance(other, (int, Poly)):
            return self.map(lambda e: e * other)
        a, b = self._coerce(other)
        n, k = a.shape
        k2, m = b.shape
        if k != k2:
            raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
        zero = Poly.zero(a.p, a.ring)
        out = []
        for i in range(n):
            row = []
            for j in range(m):
                acc = zero
                for t in range(k):
                    x, y = a.rows[i][t], b.rows[t][j]
                    if x.terms and y.terms:
                        acc = acc + x * y
                row.append(acc)
            out.append(row)
        return PolyMatrix(out, a.p, a.ring)

    def __rmul__(self, other) -> PolyMatrix:
        if isinstance(other, (int, Poly)):
            return self.map(lambda e: other * e)
        return NotImplemented

    def __pow__(self, e: int) -> PolyMatrix:
        n = self.shape[0]
        result = PolyMatrix.identity(n, self.p, self.ring)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def commutator(self, other: PolyMatrix) -> PolyMatrix:
        return self * other - other * self

    def transpose(self) -> PolyMatrix:
        return PolyMatrix([list(col) for col in zip(*self.rows)], self.p, self.ring)

    def diff(self, name: str) -> PolyMatrix:
        return self.map(lambda e: e.diff(name))

    def frobenius(self, k: int = 1, names: Iterable[str] | None = None) -> PolyMatrix:
        names = None if names is None else tuple(names)
        return self.map(lambda e: e.frobenius(k, names))

    def substitute(self, values) -> PolyMatrix:
        return PolyMatrix([[e.substitute(values) for e in row] for row in self.rows], self.p)

    def evaluate(self, point) -> list[list[int]]:
        return [[e.evaluate(point) for e in row] for row in self.rows]

    def det(self) -> Poly:
        """Determinant by the Leibniz expansion (desk-scale sizes only)."""
        n, m = self.shape
        if n != m:
            raise ValueError("determinant of a non-square matrix")
        total = Poly.zero(self.p, self.ring)
        for perm in permutations(range(n)):
            sign = _perm_sign(perm)
            term = Poly.const(sign, self.p, self.ring)
            for i, j in enumerate(perm):
                term = term * self.rows[i][j]
                if not term.terms:
                    break
            total = total + term
        return total

    def minor(self, rows: Sequence[int], cols: Sequence[int]) -> PolyMatrix:
        return PolyMatrix([[self.rows[i][j] for j in cols] for i in rows], self.p, self.ring)

    def adjugate(self) -> PolyMatrix:
        n = self.shape[0]
        if n == 1:
            return PolyMatrix.identity(1, self.p, self.ring)
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                rest_r = [k for k in range(n) if k != j]
                rest_c = [k for k in range(n) if k != i]
                cof = self.minor(rest_r, rest_c).det()
                row.append(cof if (i + j) % 2 == 0 else -cof)
            out.append(row)
        return PolyMatrix(out, self.p, self.ring)

    def is_unimodular(self) -> bool:
        d = self.det()
        return d.is_constant() and not d.is_zero()

    def inverse(self) -> PolyMatrix:
        """Inverse of a matrix whose determinant is a nonzero constant."""
        d = self.det()
        if d.is_zero() or not d.is_constant():
            raise ValueError(f"matrix is not invertible over the polynomial ring (det = {d})")
        inv = pow(d.constant_value(), -1, self.p)
        return self.adjugate() * inv

    def rank_at(self, point) -> int:
        from .linalg import rank

        vals = self.evaluate(point)
        return rank(({j: v for j, v in enumerate(row) if v} for row in vals), self.p)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return self.p == other.p and self.shape == other.shape and all(
            x == y for x, y in zip(self.entries(), other.entries())
        )

    def __hash__(self) -> int:
        return hash((self.p, self.rows))

    def __str__(self) -> str:
        return "[" + ", ".join("[" + ", ".join(str(e) for e in row) + "]" for row in self.rows) + "]"

    def __repr__(self) -> str:
        return f"PolyMatrix({self}, p={self.p})"


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def generic_rank(mat: PolyMatrix) -> int:
    """Rank over the fraction field, via fraction-free (Bareiss) elimination."""
    rows = [list(r) for r in mat.rows]
    n, m = mat.shape
    p = mat.p
    prev = Poly.const(1, p, mat.ring)
    r = 0
    for c in range(m):
        piv = next((i for i in range(r, n) if not rows[i][c].is_zero()), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(r + 1, n):
            for j in range(c + 1, m):
                num = rows[r][c] * rows[i][j] - rows[i][c] * rows[r][j]
                rows[i][j] = num.exact_div(prev)
            rows[i][c] = Poly.zero(p, mat.ring)
        prev = rows[r][c]
        r += 1
        if r == n:
            break
    return r
