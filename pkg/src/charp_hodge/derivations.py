"""Derivations of polynomial algebras over F_p.

A derivation is stored by its values on the generators.  Everything else
(application, brackets, restricted p-th powers, the Jacobson decomposition)
is computed from those values by the Leibniz rule, never by shortcuts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import RingMismatch
from .poly import Poly, union_ring
from .report import Check


@dataclass(frozen=True, eq=False)
class DerivationOp:
    """Derivation of ``F_p[ring]`` given by ``values[i] = D(ring[i])``."""

    ring: tuple[str, ...]
    values: tuple[Poly, ...]
    p: int

    def __post_init__(self) -> None:
        if len(self.values) != len(self.ring):
            raise ValueError("one value per generator is required")
        fixed = tuple(v.embed(self.ring) for v in self.values)
        object.__setattr__(self, "values", fixed)

    # constructors -------------------------------------------------------

    @classmethod
    def zero(cls, ring: Sequence[str], p: int) -> DerivationOp:
        ring = tuple(ring)
        return cls(ring, tuple(Poly.zero(p, ring) for _ in ring), p)

    @classmethod
    def partial(cls, name: str, ring: Sequence[str], p: int) -> DerivationOp:
        ring = tuple(ring)
        if name not in ring:
            raise RingMismatch(f"{name!r} not in {ring}")
        return cls(ring, tuple(Poly.const(1 if v == name else 0, p, ring) for v in ring), p)

    @classmethod
    def from_map(cls, images: Mapping[str, Poly | int | str], ring: Sequence[str], p: int) -> DerivationOp:
        ring = tuple(ring)
        for name in images:
            if name not in ring:
                raise RingMismatch(f"{name!r} not in {ring}")
        vals = []
        for v in ring:
            img = images.get(v, 0)
            if isinstance(img, str):
                img = Poly.parse(img, p, ring)
            elif not isinstance(img, Poly):
                img = Poly.const(int(img), p, ring)
            vals.append(img)
        return cls(ring, tuple(vals), p)

    @classmethod
    def parse(cls, text: str, ring: Sequence[str], p: int) -> DerivationOp:
        """Parse ``D: x -> <poly>; y -> <poly>``; unlisted generators map to 0."""
        body = text.strip()
        if body.startswith("D:"):
            body = body[2:]
        images: dict[str, str] = {}
        for part in body.split(";"):
            part = part.strip()
            if not part or part == "0":
                continue
            name, sep, val = part.partition("->")
            if not sep:
                raise ValueError(f"expected 'x -> value' in {part!r}")
            images[name.strip()] = val.strip()
        return cls.from_map(images, ring, p)

    # basic structure ----------------------------------------------------

    def __getitem__(self, name: str) -> Poly:
        return self.values[self.ring.index(name)]

    def embed(self, ring: Sequence[str]) -> DerivationOp:
        """View as a derivation of a larger polynomial ring, killing new generators."""
        ring = tuple(ring)
        if ring == self.ring:
            return self
        missing = [v for v in self.ring if v not in ring]
        if missing:
            raise RingMismatch(f"generators {missing} missing from {ring}")
        vals = tuple(self[v].embed(ring) if v in self.ring else Poly.zero(self.p, ring) for v in ring)
        return DerivationOp(ring, vals, self.p)

    def _lift(self, other: DerivationOp) -> tuple[DerivationOp, DerivationOp]:
        if other.p != self.p:
            raise RingMismatch("derivations over different fields")
        if other.ring == self.ring:
            return self, other
        ring = union_ring(self.ring, other.ring)
        return self.embed(ring), other.embed(ring)

    def is_zero(self) -> bool:
        return all(v.is_zero() for v in self.values)

    def degree(self) -> int:
        return max((v.degree() for v in self.values), default=-1)

    def is_vertical(self, base: Iterable[str]) -> bool:
        return all(self[b].is_zero() for b in base if b in self.ring)

    def coefficients(self) -> tuple[Poly, ...]:
        return self.values

    # linear structure ---------------------------------------------------

    def __add__(self, other: DerivationOp) -> DerivationOp:
        a, b = self._lift(other)
        return DerivationOp(a.ring, tuple(x + y for x, y in zip(a.values, b.values)), a.p)

    def __neg__(self) -> DerivationOp:
        return DerivationOp(self.ring, tuple(-v for v in self.values), self.p)

    def __sub__(self, other: DerivationOp) -> DerivationOp:
        return self + (-other)

    def __rmul__(self, c: Poly | int) -> DerivationOp:
        """``c * D`` for a function ``c`` (multiplies every generator value)."""
        if isinstance(c, Poly):
            ring = union_ring(self.ring, c.ring)
            base = self.embed(ring)
            c = c.embed(ring)
            return DerivationOp(ring, tuple(c * v for v in base.values), self.p)
        return DerivationOp(self.ring, tuple(v.scale(int(c)) for v in self.values), self.p)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DerivationOp):
            return NotImplemented
        if other.p != self.p:
            return False
        a, b = self._lift(other)
        return a.values == b.values

    def __hash__(self) -> int:
        nonzero = tuple((v, x) for v, x in zip(self.ring, self.values) if not x.is_zero())
        return hash((self.p, nonzero))

    # action -------------------------------------------------------------

    def apply(self, a: Poly | int) -> Poly:
        """Leibniz extension of the generator values to ``a``."""
        if not isinstance(a, Poly):
            return Poly.zero(self.p, self.ring)
        if a.ring != self.ring:
            try:
                a = a.embed(self.ring)
            except RingMismatch as exc:
                raise RingMismatch(f"polynomial in {a.ring} outside derivation ring {self.ring}") from exc
        total = Poly.zero(self.p, self.ring)
        for v, val in zip(self.ring, self.values):
            if val.terms:
                d = a.diff(v)
                if d.terms:
                    total = total + val * d
        return total

    __call__ = apply

    def power_apply(self, a: Poly, times: int) -> Poly:
        """``D`` applied ``times`` times to ``a`` (composition, not a derivation)."""
        for _ in range(times):
            a = self.apply(a)
            if a.is_zero():
                break
        return a

    def __str__(self) -> str:
        parts = [f"{v} -> {x}" for v, x in zip(self.ring, self.values) if not x.is_zero()]
        return "D: " + ("; ".join(parts) if parts else "0")

    def __repr__(self) -> str:
        return f"DerivationOp({str(self)!r}, ring={self.ring}, p={self.p})"


def apply(D: DerivationOp, a: Poly) -> Poly:
    return D.apply(a)


def lie_bracket(D1: DerivationOp, D2: DerivationOp) -> DerivationOp:
    """``[D1, D2]`` with values ``D1(D2(x)) - D2(D1(x))``."""
    a, b = D1._lift(D2)
    vals = tuple(a.apply(bv) - b.apply(av) for av, bv in zip(a.values, b.values))
    return DerivationOp(a.ring, vals, a.p)


def p_power(D: DerivationOp, times: int = 1) -> DerivationOp:
    """The restricted power ``D^(p^times)``, by iterated application on generators."""
    for _ in range(times):
        gens = [Poly.var(v, D.p, D.ring) for v in D.ring]
        D = DerivationOp(D.ring, tuple(D.power_apply(g, D.p) for g in gens), D.p)
    return D


def p_power_semilinearity_check(D: DerivationOp, c: Poly) -> Check:
    """Compare ``(cD)^p`` with ``c^p D^p + (cD)^(p-1)(c) D`` on generators."""
    p = D.p
    ring = union_ring(D.ring, c.ring)
    D = D.embed(ring)
    c = c.embed(ring)
    cD = c * D
    lhs = p_power(cD)
    rhs = (c**p) * p_power(D) + cD.power_apply(c, p - 1) * D
    if lhs == rhs:
        return Check.passed("semilinearity")
    return Check.failed("semilinearity", lhs=str(lhs), rhs=str(rhs), difference=str(lhs - rhs))


class TDerivation:
    """Polynomial in a formal parameter ``t`` with derivation coefficients."""

    __slots__ = ("coeffs", "ring", "p")

    def __init__(self, coeffs: Mapping[int, DerivationOp], ring: Sequence[str], p: int):
        ring = tuple(ring)
        self.ring = ring
        self.p = p
        self.coeffs = {k: d.embed(ring) for k, d in coeffs.items() if not d.is_zero()}

    def coefficient(self, k: int) -> DerivationOp:
        return self.coeffs.get(k, DerivationOp.zero(self.ring, self.p))

    def bracket(self, other: TDerivation) -> TDerivation:
        out: dict[int, DerivationOp] = {}
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                term = lie_bracket(a, b)
                out[i + j] = out[i + j] + term if i + j in out else term
        return TDerivation(out, self.ring, self.p)

    def __str__(self) -> str:
        return " + ".join(f"t^{k}*({d})" for k, d in sorted(self.coeffs.items())) or "0"


def jacobson_decompose(D1: DerivationOp, D2: DerivationOp) -> tuple[list[DerivationOp], DerivationOp]:
    """Universal Lie polynomials ``s_1..s_{p-1}`` and the Jacobson residual.

    ``i * s_i`` is the coefficient of ``t^(i-1)`` in ``ad(t D1 + D2)^(p-1)(D1)``;
    the residual ``(D1+D2)^p - D1^p - D2^p - sum s_i`` vanishes identically.
    """
    a, b = D1._lift(D2)
    p = a.p
    x = TDerivation({1: a, 0: b}, a.ring, p)
    y = TDerivation({0: a}, a.ring, p)
    for _ in range(p - 1):
        y = x.bracket(y)
    s = [pow(i, -1, p) * y.coefficient(i - 1) for i in range(1, p)]
    residual = p_power(a + b) - p_power(a) - p_power(b)
    for term in s:
        residual = residual - term
    return s, residual
