"""Exponential twisting between chart-wise inverse Cartier transforms.

Charts are labels carrying their own Frobenius lift over one shared
polynomial base; restriction maps are identities.  Two lifts differ by
``h = a^alpha - a^beta`` and the transition matrix is
``g = exp(-sum_j h_j Theta_j)`` with ``Theta`` the pulled back Higgs field.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations
from math import factorial
from typing import Sequence

from .derivations import DerivationOp, lie_bracket
from .errors import NotNilpotent, RingMismatch
from .frobenius_lift import FrobLift, di_cocycle
from .linear import LinearConnection, frobenius_pullback, gauge_transform, inverse_cartier_linear
from .matrix import PolyMatrix
from .nonlinear import HiggsTotalSpace, inverse_cartier_nonlinear, pullback_theta
from .poly import Poly
from .report import Check


def truncated_exp(N: PolyMatrix) -> PolyMatrix:
    """``sum_{k<p} N^k / k!``; requires ``N^p = 0``."""
    p = N.p
    n = N.shape[0]
    term = PolyMatrix.identity(n, p, N.ring)
    out = term
    for k in range(1, p):
        term = term * N
        if term.is_zero():
            break
        out = out + term * pow(factorial(k), -1, p)
    else:
        if not (term * N).is_zero():
            raise NotNilpotent(f"matrix is not nilpotent of order <= {p}")
    return out


def truncated_log(U: PolyMatrix) -> PolyMatrix:
    """``sum_{0<k<p} (-1)^(k+1) X^k / k`` for ``X = U - I`` with ``X^p = 0``."""
    p = U.p
    n = U.shape[0]
    X = U - PolyMatrix.identity(n, p, U.ring)
    if not (X**p).is_zero():
        raise NotNilpotent(f"U - I is not nilpotent of order <= {p}")
    out = PolyMatrix.zeros(n, n, p, U.ring)
    term = PolyMatrix.identity(n, p, U.ring)
    for k in range(1, p):
        term = term * X
        out = out + term * ((-1) ** (k + 1) * pow(k, -1, p))
    return out


@dataclass(frozen=True)
class Chart:
    id: str
    lift: FrobLift


def _check_charts(charts: Sequence[Chart], base: tuple[str, ...], p: int) -> None:
    ids = [c.id for c in charts]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate chart ids in {ids}")
    for c in charts:
        if c.lift.base_vars != base or c.lift.p != p:
            raise RingMismatch(f"chart {c.id!r} has a lift over a different base")


def twist_exponent(theta: LinearConnection, La: FrobLift, Lb: FrobLift, sign: int = 1) -> PolyMatrix:
    """``-sign * sum_j h_j Theta_j`` for ``h = a^alpha - a^beta``."""
    h = di_cocycle(La, Lb)
    Theta = frobenius_pullback(theta)
    N = PolyMatrix.zeros(theta.rank, theta.rank, theta.p, theta.base_vars)
    for hj, Tj in zip(h, Theta):
        if not hj.is_zero():
            N = N + Tj * hj
    return N * (-sign)


def _require_commuting(theta: LinearConnection) -> None:
    if theta.lam != 0:
        raise ValueError("gluing expects Higgs data (lambda = 0)")
    for i, j in combinations(range(theta.m), 2):
        if not theta.A[i].commutator(theta.A[j]).is_zero():
            raise ValueError(f"Higgs components {i + 1} and {j + 1} do not commute")


def gluing_cocycle(
    charts: Sequence[Chart], theta: LinearConnection, sign: int = 1
) -> dict[tuple[str, str], PolyMatrix]:
    """Transition matrices ``g[alpha, beta]`` for every ordered pair of charts."""
    _require_commuting(theta)
    _check_charts(charts, theta.base_vars, theta.p)
    out = {}
    for a, b in permutations(charts, 2):
        out[a.id, b.id] = truncated_exp(twist_exponent(theta, a.lift, b.lift, sign))
    for c in charts:
        out[c.id, c.id] = PolyMatrix.identity(theta.rank, theta.p, theta.base_vars)
    return out


def cocycle_checks(charts: Sequence[Chart], g: dict[tuple[str, str], PolyMatrix]) -> list[Check]:
    """``g_ab g_bc = g_ac`` on every ordered triple of distinct charts."""
    out = []
    for a, b, c in permutations([ch.id for ch in charts], 3):
        lhs = g[a, b] * g[b, c]
        ok = lhs == g[a, c]
        w = {} if ok else {"lhs": str(lhs), "rhs": str(g[a, c])}
        out.append(Check.of(f"cocycle.{a}.{b}.{c}", ok, **w))
    return out


def transport(C: LinearConnection, g: PolyMatrix) -> LinearConnection:
    """``A' = g^-1 A g - g^-1 dg``, the connection on the neighbouring chart."""
    return gauge_transform(C, g.inverse())


def gluing_compatibility_check(
    charts: Sequence[Chart], theta: LinearConnection, n_max: int = 4, sign: int = 1
) -> list[Check]:
    """Transport of each chart's connection by ``g`` against the neighbour's own.

    ``sign = -1`` flips the twist and exists only as a negative control.
    """
    g = gluing_cocycle(charts, theta, sign)
    conns = {c.id: inverse_cartier_linear(theta, c.lift, n_max) for c in charts}
    out = []
    for a, b in permutations([c.id for c in charts], 2):
        moved = transport(conns[a], g[a, b])
        defect = [x - y for x, y in zip(moved.A, conns[b].A)]
        ok = all(D.is_zero() for D in defect)
        w = {} if ok else {f"defect[{i + 1}]": str(D) for i, D in enumerate(defect)}
        out.append(Check.of(f"transport.{a}.{b}", ok, **w))
    if len(charts) < 2:
        out.append(Check.passed("transport", note="single chart, nothing to compare"))
    return out


def independence_checks(charts: Sequence[Chart], theta: LinearConnection, n_max: int = 4) -> list[Check]:
    """Going from chart ``b`` to ``c`` through ``a`` gives the same connection as going directly."""
    g = gluing_cocycle(charts, theta)
    conns = {c.id: inverse_cartier_linear(theta, c.lift, n_max) for c in charts}
    out = []
    for a, b, c in permutations([ch.id for ch in charts], 3):
        via = transport(transport(conns[b], g[b, a]), g[a, c])
        ok = via == conns[c] and g[b, a] * g[a, c] == g[b, c]
        out.append(Check.of(f"independence.{b}.{c}.via.{a}", ok))
    return out


# derivation level --------------------------------------------------------------


def exp_automorphism(N: DerivationOp) -> dict[str, Poly]:
    """Generator images ``x -> sum_{k<p} N^k(x) / k!``; ``N^k(x)`` must vanish for ``k >= p``."""
    p = N.p
    images = {}
    for v in N.ring:
        x = Poly.var(v, p, N.ring)
        acc, cur = x, x
        for k in range(1, p):
            cur = N.apply(cur)
            if cur.is_zero():
                break
            acc = acc + cur.scale(pow(factorial(k), -1, p))
        else:
            if not N.apply(cur).is_zero():
                raise NotNilpotent(f"N^{p}({v}) does not vanish")
        images[v] = acc
    return images


def conjugate(D: DerivationOp, phi: dict[str, Poly], phi_inv: dict[str, Poly]) -> DerivationOp:
    """``phi o D o phi^-1`` on generators."""
    vals = tuple(D.apply(phi_inv[v]).substitute(phi) for v in D.ring)
    return DerivationOp(D.ring, vals, D.p)


def nonlinear_gluing_checks(
    charts: Sequence[Chart], H: HiggsTotalSpace, n_max: int = 4, sign: int = 1
) -> list[Check]:
    """``exp(-N) o D^alpha o exp(N) = D^beta`` with ``N = sum_j h_j V_j``."""
    _check_charts(charts, H.base_vars, H.p)
    V = pullback_theta(H)
    for i, j in combinations(range(len(V)), 2):
        if not lie_bracket(V[i], V[j]).is_zero():
            raise ValueError(f"Higgs components {i + 1} and {j + 1} do not commute")
    folis = {c.id: inverse_cartier_nonlinear(H, c.lift, n_max) for c in charts}
    out = []
    for a, b in permutations(charts, 2):
        h = di_cocycle(a.lift, b.lift)
        N = DerivationOp.zero(H.ring, H.p)
        for hj, Vj in zip(h, V):
            if not hj.is_zero():
                N = N + hj * Vj
        N = sign * N
        phi, phi_inv = exp_automorphism(-N), exp_automorphism(N)
        bad = []
        for i, (Da, Db) in enumerate(zip(folis[a.id].nabla, folis[b.id].nabla)):
            moved = conjugate(Da, phi, phi_inv)
            if moved != Db:
                bad.append(f"D[{i + 1}]: {moved - Db}")
        w = {"defect": "; ".join(bad)} if bad else {}
        out.append(Check.of(f"transport.{a.id}.{b.id}", not bad, **w))
    return out
