"""Seeded random instances for the property suites and the ``suite`` task."""

from __future__ import annotations

import random
from typing import Sequence

from .derivations import DerivationOp
from .frobenius_lift import FrobLift
from .linear import LinearConnection, LinearHiggs, gauge_transform
from .matrix import PolyMatrix
from .nonlinear import FoliatedTotalSpace, HiggsTotalSpace, functor_G
from .poly import Poly, monomials_upto


def random_poly(rng: random.Random, p: int, ring: Sequence[str], max_deg: int, terms: int = 3) -> Poly:
    ring = tuple(ring)
    monos = monomials_upto(len(ring), max_deg)
    out = {}
    for _ in range(terms):
        out[rng.choice(monos)] = rng.randrange(1, p)
    return Poly(p, ring, out)


def random_lift(rng: random.Random, base: Sequence[str], p: int, max_deg: int = 3) -> FrobLift:
    base = tuple(base)
    return FrobLift(base, tuple(random_poly(rng, p, base, max_deg, rng.randrange(0, 4)) for _ in base), p)


def random_derivation(rng: random.Random, p: int, ring: Sequence[str], max_deg: int = 2) -> DerivationOp:
    ring = tuple(ring)
    return DerivationOp(ring, tuple(random_poly(rng, p, ring, max_deg, rng.randrange(0, 3)) for _ in ring), p)


def jordan_block(r: int, p: int, ring: Sequence[str] = ()) -> PolyMatrix:
    return PolyMatrix([[1 if k == j + 1 else 0 for k in range(r)] for j in range(r)], p, ring)


def random_nilpotent_higgs(
    rng: random.Random, base: Sequence[str], r: int, p: int, max_deg: int = 2, level: int = 1
) -> LinearConnection:
    """Commuting ``theta_i = sum_k c_ik(s) N^k`` with ``N`` a Jordan block.

    Level 1 uses only powers ``N^k`` with ``k p >= r``.  Level 2 needs
    ``r > p`` and puts a unit coefficient on ``N`` in the first direction.
    """
    base = tuple(base)
    if level == 2 and r <= p:
        raise ValueError("level 2 needs rank larger than p")
    N = jordan_block(r, p, base)
    k_min = 1 if level == 2 else -(-r // p)
    mats = []
    for i in range(len(base)):
        M = PolyMatrix.zeros(r, r, p, base)
        for k in range(k_min, r):
            c = random_poly(rng, p, base, max_deg, rng.randrange(0, 3))
            if k == k_min and i == 0:
                c = Poly.const(rng.randrange(1, p), p, base) if level == 2 else c
                if c.is_zero():
                    c = Poly.const(1, p, base)
            M = M + (N**k) * c
        mats.append(M)
    return LinearHiggs(base, r, mats, p)


def random_nonlinear_higgs(
    rng: random.Random, base: Sequence[str], p: int, level: int = 1, max_deg: int = 2
) -> HiggsTotalSpace:
    """``Theta_i = c_i(s) Theta_0 + d_i(s) d/dt2`` with ``Theta_0 = d/dt1 + G d/dt2``.

    ``G = t1^(p-1)`` gives level 2; lower powers of ``t1`` give level 1.
    """
    base = tuple(base)
    fiber = ("t1", "t2")
    ring = base + fiber
    t1 = Poly.var("t1", p, ring)
    if level == 2:
        G = t1 ** (p - 1) + random_poly(rng, p, base, 1, 1).embed(ring)
    else:
        G = Poly.zero(p, ring)
        for e in range(p - 1):
            G = G + random_poly(rng, p, base, 1, rng.randrange(0, 2)).embed(ring) * t1**e
    theta0 = DerivationOp.from_map({"t1": 1, "t2": G}, ring, p)
    dt2 = DerivationOp.partial("t2", ring, p)
    thetas = []
    for i in range(len(base)):
        c = random_poly(rng, p, base, max_deg, rng.randrange(1, 3))
        if i == 0 and c.is_zero():
            c = Poly.const(1, p, base)
        d = random_poly(rng, p, base, max_deg, rng.randrange(0, 2))
        thetas.append(c * theta0 + d * dt2)
    return HiggsTotalSpace(base, fiber, tuple(thetas), p)


def _triangular_foliation(rng, base, fiber, p, max_deg) -> FoliatedTotalSpace:
    """Kernel of ``ds`` after the triangular change ``x_j = t_j + b_j(s, t_<j)``."""
    ring = tuple(base) + tuple(fiber)
    bs = []
    for j in range(len(fiber)):
        b = random_poly(rng, p, tuple(base) + tuple(fiber[:j]), max_deg, rng.randrange(1, 3)).embed(ring)
        bs.append(b)
    ops = []
    for s in base:
        vals: dict[str, Poly] = {s: Poly.const(1, p, ring)}
        # D(x_j) = 0  =>  D(t_j) = -(d b_j/ds + sum_{k<j} d b_j/dt_k D(t_k))
        for j, t in enumerate(fiber):
            v = -bs[j].diff(s)
            for k in range(j):
                v = v - bs[j].diff(fiber[k]) * vals[fiber[k]]
            vals[t] = v
        ops.append(DerivationOp.from_map(vals, ring, p))
    return FoliatedTotalSpace(tuple(base), tuple(fiber), tuple(ops), p)


def _frobenius_twisted_field(rng, p) -> FoliatedTotalSpace:
    """``d/ds + h(s, t^p) d/dt`` with ``deg_s h < p - 1``."""
    ring = ("s", "t")
    h = Poly.zero(p, ring)
    for _ in range(rng.randrange(1, 3)):
        h = h + Poly.monomial((rng.randrange(0, min(2, p - 1)), p * rng.randrange(0, 2)), p, ring, rng.randrange(1, p))
    if p == 2:
        h = Poly.monomial((0, 2), p, ring)
    D = DerivationOp.from_map({"s": 1, "t": h}, ring, p)
    return FoliatedTotalSpace(("s",), ("t",), (D,), p)


def f2_example() -> FoliatedTotalSpace:
    ring = ("s", "t")
    return FoliatedTotalSpace(("s",), ("t",), (DerivationOp.parse("D: s -> 1; t -> t^2", ring, 2),), 2)


def random_flat_gauge(rng: random.Random, base: Sequence[str], r: int, p: int, max_deg: int = 2) -> PolyMatrix:
    """Unipotent upper triangular gauge matrix."""
    base = tuple(base)
    rows = []
    for j in range(r):
        row = []
        for k in range(r):
            if k == j:
                row.append(Poly.const(1, p, base))
            elif k > j:
                row.append(random_poly(rng, p, base, max_deg, rng.randrange(0, 3)))
            else:
                row.append(Poly.zero(p, base))
        rows.append(row)
    return PolyMatrix(rows, p, base)


def random_psi0_foliation(rng: random.Random, p: int, kind: int | None = None) -> FoliatedTotalSpace:
    kind = rng.randrange(4) if kind is None else kind
    if kind == 0:
        return _triangular_foliation(rng, ("s",), ("t1", "t2"), p, 2)
    if kind == 1:
        return _frobenius_twisted_field(rng, p)
    if kind == 2:
        return _triangular_foliation(rng, ("s1", "s2"), ("t",), p, 2)
    base = ("s",)
    g = random_flat_gauge(rng, base, 2, p, 2)
    C = gauge_transform(LinearConnection(base, 2, 1, (PolyMatrix.zeros(2, 2, p, base),), p), g)
    return functor_G(C)


def random_connection(rng: random.Random, base: Sequence[str], r: int, p: int, max_deg: int = 2) -> LinearConnection:
    base = tuple(base)
    mats = []
    for _ in base:
        rows = [[random_poly(rng, p, base, max_deg, rng.randrange(0, 2)) for _ in range(r)] for _ in range(r)]
        mats.append(PolyMatrix(rows, p, base))
    return LinearConnection(base, r, 1, tuple(mats), p)


def random_periodic_instance(
    rng: random.Random, base: Sequence[str], r: int, p: int, max_deg: int = 2
) -> tuple[LinearConnection, "FilteredModule", PolyMatrix]:
    """A Fontaine-periodic filtered connection and a known witness.

    A horizontal flag in the trivial connection (constant columns, random
    weights of level <= p - 1) is moved by a random gauge ``g``; the graded
    field vanishes, so ``g`` itself intertwines the transform with ``C``.
    """
    from .rees import FilteredModule

    base = tuple(base)
    while True:
        P = PolyMatrix([[rng.randrange(p) for _ in range(r)] for _ in range(r)], p, base)
        if P.is_unimodular():
            break
    top = min(p - 1, r)
    weights = sorted((rng.randrange(top + 1) for _ in range(r)), reverse=True)
    levels = tuple(
        tuple(tuple(P[a, l] for a in range(r)) for l in range(r) if weights[l] >= i) for i in range(1, max(weights) + 1)
    )
    M0 = FilteredModule(base, r, levels, p)
    g = random_flat_gauge(rng, base, r, p, max_deg).transpose() * P.transpose()
    C0 = LinearConnection(base, r, 1, tuple(PolyMatrix.zeros(r, r, p, base) for _ in base), p)
    return gauge_transform(C0, g), M0.transformed(g), g
