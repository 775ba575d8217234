"""Exact multivariate polynomials over a prime field F_p.

A :class:`Poly` is a sparse map from exponent tuples to nonzero residues,
over an ordered tuple of variable names.  Polynomials over different rings
combine by embedding both into the union ring, as long as the shared
variables appear in the same relative order.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import DegreeCapExceeded, ParseError, RingMismatch

DEFAULT_MAX_DEGREE = 200


def _initial_cap() -> int:
    raw = os.environ.get("CHARP_HODGE_MAX_DEGREE")
    if raw is None or not raw.strip():
        return DEFAULT_MAX_DEGREE
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"CHARP_HODGE_MAX_DEGREE must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError("CHARP_HODGE_MAX_DEGREE must be positive")
    return value


_max_degree = _initial_cap()


def max_degree() -> int:
    """Current total-degree cap applied to every intermediate polynomial."""
    return _max_degree


def set_max_degree(value: int | None) -> None:
    """Set the degree cap; ``None`` re-reads the environment default."""
    global _max_degree
    _max_degree = _initial_cap() if value is None else int(value)


def _check_degree(deg: int) -> None:
    if deg > _max_degree:
        raise DegreeCapExceeded(deg, _max_degree)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


@dataclass(frozen=True, slots=True)
class Fp:
    """An element of the prime field F_p."""

    value: int
    p: int

    def __post_init__(self) -> None:
        if not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")
        object.__setattr__(self, "value", self.value % self.p)

    def _coerce(self, other) -> int:
        if isinstance(other, Fp):
            if other.p != self.p:
                raise RingMismatch(f"cannot mix F_{self.p} and F_{other.p}")
            return other.value
        if isinstance(other, int):
            return other
        return NotImplemented

    def __add__(self, other):
        v = self._coerce(other)
        return NotImplemented if v is NotImplemented else Fp(self.value + v, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        v = self._coerce(other)
        return NotImplemented if v is NotImplemented else Fp(self.value - v, self.p)

    def __rsub__(self, other):
        v = self._coerce(other)
        return NotImplemented if v is NotImplemented else Fp(v - self.value, self.p)

    def __mul__(self, other):
        v = self._coerce(other)
        return NotImplemented if v is NotImplemented else Fp(self.value * v, self.p)

    __rmul__ = __mul__

    def __neg__(self) -> Fp:
        return Fp(-self.value, self.p)

    def inverse(self) -> Fp:
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse in F_p")
        return Fp(pow(self.value, -1, self.p), self.p)

    def __truediv__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return self * Fp(v, self.p).inverse()

    def __pow__(self, e: int) -> Fp:
        if e < 0:
            return self.inverse() ** (-e)
        return Fp(pow(self.value, e, self.p), self.p)

    def __eq__(self, other) -> bool:
        if isinstance(other, Fp):
            return self.p == other.p and self.value == other.value
        if isinstance(other, int):
            return (other - self.value) % self.p == 0
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.value, self.p))

    def __int__(self) -> int:
        return self.value

    def __str__(self) -> str:
        return str(self.value)


Monomial = tuple[int, ...]


def _merge_rings(a: tuple[str, ...], b: tuple[str, ...]) -> tuple[str, ...]:
    if a == b:
        return a
    shared = [v for v in a if v in b]
    if shared != [v for v in b if v in a]:
        raise RingMismatch(f"variables {shared} are ordered differently in {a} and {b}")
    return a + tuple(v for v in b if v not in a)


def union_ring(*rings: Sequence[str]) -> tuple[str, ...]:
    out: tuple[str, ...] = ()
    for ring in rings:
        out = _merge_rings(out, tuple(ring))
    return out


class Poly:
    """Sparse polynomial over F_p in an ordered tuple of named variables.

    Instances are treated as immutable values.  Arithmetic with a plain
    ``int`` treats it as a constant.
    """

    __slots__ = ("p", "ring", "terms", "_hash")

    def __init__(self, p: int, ring: Sequence[str], terms: Mapping[Monomial, int] | None = None):
        self.p = p
        self.ring = tuple(ring)
        clean: dict[Monomial, int] = {}
        n = len(self.ring)
        if terms:
            for mono, c in terms.items():
                if len(mono) != n:
                    raise ValueError(f"monomial {mono} does not fit ring {self.ring}")
                c %= p
                if c:
                    clean[tuple(mono)] = c
        self.terms = clean
        self._hash: int | None = None

    @classmethod
    def _raw(cls, p: int, ring: tuple[str, ...], terms: dict[Monomial, int]) -> Poly:
        obj = cls.__new__(cls)
        obj.p = p
        obj.ring = ring
        obj.terms = terms
        obj._hash = None
        return obj

    # construction -------------------------------------------------------

    @classmethod
    def zero(cls, p: int, ring: Sequence[str] = ()) -> Poly:
        return cls._raw(p, tuple(ring), {})

    @classmethod
    def const(cls, c: int, p: int, ring: Sequence[str] = ()) -> Poly:
        ring = tuple(ring)
        c %= p
        return cls._raw(p, ring, {(0,) * len(ring): c} if c else {})

    @classmethod
    def var(cls, name: str, p: int, ring: Sequence[str] | None = None) -> Poly:
        ring = (name,) if ring is None else tuple(ring)
        if name not in ring:
            raise RingMismatch(f"variable {name!r} not in ring {ring}")
        mono = tuple(1 if v == name else 0 for v in ring)
        return cls._raw(p, ring, {mono: 1})

    @classmethod
    def monomial(cls, exps: Mapping[str, int] | Monomial, p: int, ring: Sequence[str], c: int = 1) -> Poly:
        ring = tuple(ring)
        if isinstance(exps, Mapping):
            for name in exps:
                if name not in ring:
                    raise RingMismatch(f"variable {name!r} not in ring {ring}")
            mono = tuple(exps.get(v, 0) for v in ring)
        else:
            mono = tuple(exps)
        return cls(p, ring, {mono: c})

    @classmethod
    def parse(cls, text: str, p: int, ring: Sequence[str] | None = None) -> Poly:
        """Parse ``c*x^e*y + ...``; ``^`` or ``**`` for powers, parentheses allowed."""
        return _PolyParser(text, p, ring).parse()

    # basic properties ----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(m) for m in self.terms), default=-1)

    def degree_in(self, name: str) -> int:
        if name not in self.ring:
            return 0 if self.terms else -1
        k = self.ring.index(name)
        return max((m[k] for m in self.terms), default=-1)

    def is_constant(self) -> bool:
        return all(not any(m) for m in self.terms)

    def constant_value(self) -> int:
        return self.terms.get((0,) * len(self.ring), 0)

    def variables(self) -> tuple[str, ...]:
        """Variables that actually occur, in ring order."""
        used = [False] * len(self.ring)
        for m in self.terms:
            for k, e in enumerate(m):
                if e:
                    used[k] = True
        return tuple(v for v, u in zip(self.ring, used) if u)

    def coefficient(self, mono: Mapping[str, int] | Monomial) -> int:
        if isinstance(mono, Mapping):
            mono = tuple(mono.get(v, 0) for v in self.ring)
        return self.terms.get(tuple(mono), 0)

    def sorted_terms(self) -> list[tuple[Monomial, int]]:
        """Terms in canonical order: total degree descending, then lex descending."""
        return sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]), reverse=True)

    # ring handling -------------------------------------------------------

    def embed(self, ring: Sequence[str]) -> Poly:
        """Rewrite over a larger ring containing every variable used here."""
        ring = tuple(ring)
        if ring == self.ring:
            return self
        pos = []
        for k, v in enumerate(self.ring):
            if v in ring:
                pos.append(ring.index(v))
            elif any(m[k] for m in self.terms):
                raise RingMismatch(f"variable {v!r} is not in target ring {ring}")
            else:
                pos.append(-1)
        n = len(ring)
        out: dict[Monomial, int] = {}
        for m, c in self.terms.items():
            new = [0] * n
            for k, e in enumerate(m):
                if e:
                    new[pos[k]] = e
            out[tuple(new)] = c
        return Poly._raw(self.p, ring, out)

    def _lift(self, other) -> tuple[Poly, Poly]:
        if isinstance(other, Poly):
            if other.p != self.p:
                raise RingMismatch(f"cannot mix F_{self.p} and F_{other.p}")
            if other.ring == self.ring:
                return self, other
            ring = _merge_rings(self.ring, other.ring)
            return self.embed(ring), other.embed(ring)
        if isinstance(other, (int, Fp)):
            return self, Poly.const(int(other), self.p, self.ring)
        raise TypeError(f"cannot combine Poly with {type(other).__name__}")

    # arithmetic ----------------------------------------------------------

    def __add__(self, other) -> Poly:
        if not isinstance(other, (Poly, int, Fp)):
            return NotImplemented
        a, b = self._lift(other)
        p = a.p
        out = dict(a.terms)
        for m, c in b.terms.items():
            v = (out.get(m, 0) + c) % p
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Poly._raw(p, a.ring, out)

    __radd__ = __add__

    def __neg__(self) -> Poly:
        p = self.p
        return Poly._raw(p, self.ring, {m: p - c for m, c in self.terms.items()})

    def __sub__(self, other) -> Poly:
        if not isinstance(other, (Poly, int, Fp)):
            return NotImplemented
        a, b = self._lift(other)
        return a + (-b)

    def __rsub__(self, other) -> Poly:
        if not isinstance(other, (Poly, int, Fp)):
            return NotImplemented
        a, b = self._lift(other)
        return b + (-a)

    def __mul__(self, other) -> Poly:
        if not isinstance(other, (Poly, int, Fp)):
            return NotImplemented
        if isinstance(other, (int, Fp)):
            return self.scale(int(other))
        a, b = self._lift(other)
        if not a.terms or not b.terms:
            return Poly._raw(a.p, a.ring, {})
        _check_degree(a.degree() + b.degree())
        p = a.p
        out: dict[Monomial, int] = {}
        get = out.get
        for m1, c1 in a.terms.items():
            for m2, c2 in b.terms.items():
                m = tuple([x + y for x, y in zip(m1, m2)])
                out[m] = (get(m, 0) + c1 * c2) % p
        return Poly._raw(p, a.ring, {m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def scale(self, c: int) -> Poly:
        p = self.p
        c %= p
        if not c:
            return Poly._raw(p, self.ring, {})
        return Poly._raw(p, self.ring, {m: (v * c) % p for m, v in self.terms.items()})

    def __pow__(self, e: int) -> Poly:
        if e < 0:
            raise ValueError("negative powers are not polynomials")
        if self.terms:
            _check_degree(self.degree() * e)
        result = Poly.const(1, self.p, self.ring)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def diff(self, name: str, times: int = 1) -> Poly:
        """Partial derivative ``times`` times with respect to ``name``."""
        if name not in self.ring:
            return Poly._raw(self.p, self.ring, {})
        k = self.ring.index(name)
        p = self.p
        out: dict[Monomial, int] = {}
        for m, c in self.terms.items():
            e = m[k]
            if e < times:
                continue
            coeff = c
            for j in range(times):
                coeff = coeff * (e - j) % p
                if not coeff:
                    break
            if coeff:
                new = list(m)
                new[k] = e - times
                out[tuple(new)] = coeff
        return Poly._raw(p, self.ring, out)

    def frobenius(self, k: int = 1, names: Iterable[str] | None = None) -> Poly:
        """Substitute ``x -> x^(p^k)`` for the given variables (all by default)."""
        if k < 0:
            raise ValueError("frobenius level must be non-negative")
        if k == 0 or not self.terms:
            return self
        q = self.p**k
        chosen = set(self.ring if names is None else names)
        mask = [v in chosen for v in self.ring]
        out = {tuple(e * q if f else e for e, f in zip(m, mask)): c for m, c in self.terms.items()}
        res = Poly._raw(self.p, self.ring, out)
        _check_degree(res.degree())
        return res

    def pth_root(self, names: Iterable[str] | None = None) -> Poly | None:
        """Inverse of :meth:`frobenius` at level one, or ``None`` if not a p-th power."""
        chosen = set(self.ring if names is None else names)
        mask = [v in chosen for v in self.ring]
        p = self.p
        out: dict[Monomial, int] = {}
        for m, c in self.terms.items():
            new = []
            for e, f in zip(m, mask):
                if f:
                    if e % p:
                        return None
                    new.append(e // p)
                else:
                    new.append(e)
            out[tuple(new)] = c
        return Poly._raw(p, self.ring, out)

    def substitute(self, values: Mapping[str, Poly | int]) -> Poly:
        """Replace variables by polynomials; unmentioned variables stay."""
        ring = self.ring
        images: list[Poly] = []
        targets = [v for v in values.values() if isinstance(v, Poly)]
        out_ring = union_ring(tuple(v for v in ring if v not in values), *(t.ring for t in targets))
        for v in ring:
            img = values.get(v)
            if img is None:
                images.append(Poly.var(v, self.p, out_ring))
            elif isinstance(img, Poly):
                images.append(img.embed(out_ring))
            else:
                images.append(Poly.const(int(img), self.p, out_ring))
        result = Poly.zero(self.p, out_ring)
        cache: dict[tuple[int, int], Poly] = {}

        def power(k: int, e: int) -> Poly:
            key = (k, e)
            if key not in cache:
                cache[key] = images[k] ** e
            return cache[key]

        for m, c in self.terms.items():
            term = Poly.const(c, self.p, out_ring)
            for k, e in enumerate(m):
                if e:
                    term = term * power(k, e)
            result = result + term
        return result

    def evaluate(self, point: Mapping[str, int]) -> int:
        """Value at an F_p point; every variable that occurs must be given."""
        p = self.p
        total = 0
        for m, c in self.terms.items():
            v = c
            for name, e in zip(self.ring, m):
                if e:
                    v = v * pow(point[name] % p, e, p) % p
            total += v
        return total % p

    def leading(self) -> tuple[Monomial, int]:
        """Leading term under graded lex order."""
        return max(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))

    def exact_div(self, other: Poly) -> Poly:
        """Quotient ``self / other``; raises ``ValueError`` if the division is not exact."""
        a, b = self._lift(other)
        if not b.terms:
            raise ZeroDivisionError("division by the zero polynomial")
        lm, lc = b.leading()
        inv = pow(lc, -1, a.p)
        rem = a
        quot: dict[Monomial, int] = {}
        while rem.terms:
            m, c = rem.leading()
            if any(x < y for x, y in zip(m, lm)):
                raise ValueError("polynomial division is not exact")
            qm = tuple(x - y for x, y in zip(m, lm))
            qc = c * inv % a.p
            quot[qm] = (quot.get(qm, 0) + qc) % a.p
            rem = rem - b * Poly._raw(a.p, a.ring, {qm: qc})
        return Poly(a.p, a.ring, quot)

    # comparison and display ----------------------------------------------

    def _named_key(self) -> frozenset:
        ring = self.ring
        return frozenset(
            (tuple((v, e) for v, e in zip(ring, m) if e), c) for m, c in self.terms.items()
        )

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            if other.p != self.p:
                return False
            if other.ring == self.ring:
                return self.terms == other.terms
            return self._named_key() == other._named_key()
        if isinstance(other, (int, Fp)):
            c = int(other) % self.p
            if not c:
                return not self.terms
            return self.terms == {(0,) * len(self.ring): c}
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.p, self._named_key()))
        return self._hash

    def __iter__(self) -> Iterator[tuple[Monomial, int]]:
        return iter(self.sorted_terms())

    def __len__(self) -> int:
        return len(self.terms)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            factors = []
            for v, e in zip(self.ring, m):
                if e == 1:
                    factors.append(v)
                elif e:
                    factors.append(f"{v}^{e}")
            if not factors:
                parts.append(str(c))
            elif c == 1:
                parts.append("*".join(factors))
            else:
                parts.append(f"{c}*" + "*".join(factors))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Poly({str(self)!r}, p={self.p}, ring={self.ring})"


def poly_pth_power_test(a: Poly) -> Poly | None:
    """Return ``b`` with ``b.frobenius() == a`` if ``a`` is a polynomial in p-th powers."""
    return a.pth_root()


def frobenius_substitute(a: Poly, k: int = 1) -> Poly:
    if k < 1:
        raise ValueError("frobenius level must be at least 1")
    return a.frobenius(k)


# parsing -------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9']*)|(\*\*|[-+*^()]))")


class _PolyParser:
    def __init__(self, text: str, p: int, ring: Sequence[str] | None):
        self.text = text
        self.p = p
        self.fixed = ring is not None
        self.ring: list[str] = list(ring) if ring is not None else []
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                if text[pos:].strip() == "":
                    break
                col = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ParseError(f"unexpected character {text[col]!r}", 1, col + 1)
            start = m.start(m.lastindex) + 1
            kind = ("int", "name", "op")[m.lastindex - 1]
            self.tokens.append((kind, m.group(m.lastindex), start))
            pos = m.end()
        self.i = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of polynomial", 1, len(self.text) + 1)
        self.i += 1
        return tok

    def parse(self) -> Poly:
        if not self.tokens:
            raise ParseError("empty polynomial", 1, 1)
        expr = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected token {tok[1]!r}", 1, tok[2])
        ring = tuple(self.ring)
        return expr.embed(ring)

    def expr(self) -> Poly:
        sign = 1
        tok = self.peek()
        if tok and tok[1] in "+-" and tok[0] == "op":
            self.take()
            sign = -1 if tok[1] == "-" else 1
        acc = self.term() * sign
        while (tok := self.peek()) and tok[0] == "op" and tok[1] in ("+", "-"):
            self.take()
            t = self.term()
            acc = acc + t if tok[1] == "+" else acc - t
        return acc

    def term(self) -> Poly:
        acc = self.factor()
        while (tok := self.peek()) and tok[0] == "op" and tok[1] == "*":
            self.take()
            acc = acc * self.factor()
        return acc

    def factor(self) -> Poly:
        base = self.atom()
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] in ("^", "**"):
            self.take()
            kind, val, col = self.take()
            if kind != "int":
                raise ParseError("exponent must be a non-negative integer", 1, col)
            return base ** int(val)
        return base

    def atom(self) -> Poly:
        kind, val, col = self.take()
        if kind == "int":
            return Poly.const(int(val), self.p, self.ring)
        if kind == "name":
            if val not in self.ring:
                if self.fixed:
                    raise ParseError(f"unknown variable {val!r}", 1, col)
                self.ring.append(val)
            return Poly.var(val, self.p, self.ring)
        if val == "(":
            inner = self.expr()
            kind2, val2, col2 = self.take()
            if val2 != ")":
                raise ParseError("expected ')'", 1, col2)
            return inner
        if val == "-":
            return -self.factor()
        raise ParseError(f"unexpected token {val!r}", 1, col)


def monomials_upto(nvars: int, max_deg: int) -> list[Monomial]:
    """Exponent tuples of total degree at most ``max_deg``, by degree then lex."""
    out: list[Monomial] = []

    def rec(prefix: list[int], left: int) -> None:
        if len(prefix) == nvars:
            out.append(tuple(prefix))
            return
        for e in range(left + 1):
            rec(prefix + [e], left - e)

    if max_deg >= 0:
        rec([], max_deg)
    out.sort(key=lambda m: (sum(m), tuple(-x for x in m)))
    return out
