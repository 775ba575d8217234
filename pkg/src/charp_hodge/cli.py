"""Batch driver: ``charp-hodge <task> <file|dir> [--seed N] [--deg-bound N] [--out FILE]``.

Exit status: 0 all checks pass, 1 some check failed, 2 inconclusive only,
3 unreadable or ill-formed input.
"""

from __future__ import annotations

import argparse
import random
import re
import sys
from itertools import combinations
from importlib import resources
from pathlib import Path
from typing import Callable

from . import gluing, linear, nonlinear, rees
from .derivations import jacobson_decompose, lie_bracket
from .errors import (
    CertificationFailure,
    CharPError,
    ContractViolation,
    DegreeCapExceeded,
    NotNilpotent,
    ParseError,
    RingMismatch,
    SemanticError,
)
from .frobenius_lift import FrobLift, di_cocycle_checks, zeta_identities_check, zeta_matrix
from .linear import LinearConnection
from .nonlinear import FoliatedTotalSpace, HiggsTotalSpace
from .poly import Poly, set_max_degree
from .problem import Problem, load_problem
from .report import FAIL, INCONCLUSIVE, PASS, Check, Report

TASKS = ("check", "inverse-cartier", "cartier", "descend", "ekedahl", "glue", "rees", "fontaine", "suite")
EXIT = {PASS: 0, FAIL: 1, INCONCLUSIVE: 2}
EXIT_INPUT = 3
CORPUS = "@corpus"


class Settings:
    def __init__(self, prob: Problem, seed: int | None, deg_bound: int | None):
        self.prob = prob
        self.p = prob.p
        self.seed = prob.seed if seed is None else seed
        self.deg_bound = prob.deg_bound if deg_bound is None else deg_bound
        self.n_max = prob.n_max

    @property
    def lift(self) -> FrobLift | None:
        return self.prob.lift


def _higgs(s: Settings) -> LinearConnection | HiggsTotalSpace | None:
    if s.prob.higgs is not None:
        return s.prob.higgs
    C = s.prob.connection
    if C is not None and C.lam == 0:
        return C
    return None


def _flat(s: Settings) -> FoliatedTotalSpace | None:
    """Foliation block, or the total space of a connection block with lambda = 1."""
    if s.prob.foliation is not None:
        return s.prob.foliation
    C = s.prob.connection
    if C is not None and C.lam == 1:
        return nonlinear.functor_G(C)
    return None


def _lift_for(s: Settings, base) -> FrobLift:
    return s.lift if s.lift is not None else FrobLift.standard(base, s.p)


def _require_block(found, task: str, what: str):
    if found is None:
        raise SemanticError("header", f"task {task} needs {what}")
    return found


# tasks ------------------------------------------------------------------------


def task_check(s: Settings) -> list[Check]:
    out: list[Check] = []
    prob = s.prob
    if prob.lift is not None:
        out += [c.prefixed("lift") for c in zeta_identities_check(zeta_matrix(prob.lift))]
        out.append(di_cocycle_checks(prob.lift, FrobLift.standard(prob.lift.base_vars, s.p)).prefixed("lift"))
    if prob.zeta is not None:
        out += zeta_identities_check(prob.zeta)
    if prob.connection is not None:
        C = prob.connection
        out += [c.prefixed("connection") for c in linear.linear_checks(C)]
        if C.lam == 1:
            psi = linear.p_curvature_linear(C)
            lvl = linear.nilpotency_level(psi, s.n_max)
            w = {f"psi[{i + 1}]": str(M) for i, M in enumerate(psi.psi) if not M.is_zero()}
            out.append(Check.passed("connection.p_curvature", level=lvl if lvl is not None else f"> {s.n_max}", **w))
        else:
            lvl = linear.nilpotency_level(C, s.n_max)
            out.append(Check.of("connection.nilpotent", lvl is not None, level=lvl if lvl is not None else f"> {s.n_max}"))
    if prob.higgs is not None:
        out += [c.prefixed("higgs") for c in nonlinear.higgs_checks(prob.higgs)]
    if prob.foliation is not None:
        F = prob.foliation
        checks = nonlinear.foliation_checks(F)
        out += [c.prefixed("foliation") for c in checks]
        if all(checks):
            out += [c.prefixed("foliation") for c in nonlinear.p_curvature_property_checks(F)]
            psi = nonlinear.foliation_p_curvature(F).psi
            w = {f"psi[{i + 1}]": str(P) for i, P in enumerate(psi) if not P.is_zero()}
            out.append(Check.passed("foliation.p_curvature", **w))
    if prob.cover is not None:
        cov = prob.cover
        for a, b in combinations(cov.charts, 2):
            out.append(di_cocycle_checks(a.lift, b.lift).prefixed(f"cover.lifts.{a.id}.{b.id}"))
        if isinstance(cov.higgs, LinearConnection):
            lvl = linear.nilpotency_level(cov.higgs, s.n_max)
            out.append(Check.of("cover.nilpotent", lvl is not None, level=lvl if lvl is not None else f"> {s.n_max}"))
            g = gluing.gluing_cocycle(cov.charts, cov.higgs, cov.sign)
            out += [c.prefixed("cover") for c in gluing.cocycle_checks(cov.charts, g)]
        else:
            out += [c.prefixed("cover.higgs") for c in nonlinear.higgs_checks(cov.higgs)]
    if prob.fontaine is not None:
        fd = prob.fontaine
        out += [c.prefixed("fontaine.connection") for c in linear.linear_checks(fd.connection)]
        out += [c.prefixed("fontaine") for c in rees.splitting_checks(fd.filtration)]
    if not out:
        raise SemanticError("check", "no blocks to check")
    return out


def _inverse(s: Settings, H) -> tuple[object, list[Check]]:
    L = _lift_for(s, H.base_vars)
    if isinstance(H, LinearConnection):
        C = linear.inverse_cartier_linear(H, L, s.n_max)
        psi = linear.p_curvature_linear(C).psi
        want = linear.frobenius_pullback(H)
        out = [
            Check.passed("connection", result=str(C)),
            Check.of("integrable", linear.is_integrable(C)),
            Check.of("p_curvature.pullback", all(a == b for a, b in zip(psi, want))),
        ]
        F_lin = nonlinear.functor_G(C)
        F_non = nonlinear.inverse_cartier_nonlinear(nonlinear.functor_G(H), L, s.n_max)
        out.append(Check.of("total_space.agrees", F_lin == F_non))
        return C, out
    F = nonlinear.inverse_cartier_nonlinear(H, L, s.n_max, verify=False)
    psi = nonlinear.foliation_p_curvature(F).psi
    want = nonlinear.pullback_theta(H)
    other = nonlinear.inverse_cartier_nonlinear(H, L, s.n_max, method="composition", verify=False)
    out = [Check.passed("foliation", result=str(F))]
    out += nonlinear.foliation_checks(F)
    out.append(Check.of("p_curvature.pullback", all(a == b for a, b in zip(psi, want))))
    out.append(Check.of("series.methods.agree", F == other))
    return F, out


def task_inverse_cartier(s: Settings) -> list[Check]:
    H = _require_block(_higgs(s), "inverse-cartier", "a higgs block or a connection with lambda = 0")
    return _inverse(s, H)[1]


def _descent_checks(s: Settings, F: FoliatedTotalSpace) -> tuple[nonlinear.HorizontalAlgebra, list[Check]]:
    alg = nonlinear.horizontal_subalgebra(F, s.deg_bound)
    out = [Check.passed("generators", gens=", ".join(str(g) for g in alg.gens), deg_bound=alg.deg_bound)]
    out += alg.certificate
    return alg, out


def _cartier(s: Settings, F: FoliatedTotalSpace) -> tuple[nonlinear.DescendedHiggs, list[Check]]:
    checks = nonlinear.foliation_checks(F)
    if not all(checks):
        return None, checks
    L = _lift_for(s, F.base_vars)
    G, d = nonlinear.cartier_nonlinear(F, L, s.n_max, s.deg_bound)
    out = [Check.passed("deformed", result=str(G)), Check.of("deformed.p_curvature_zero", nonlinear.foliation_p_curvature(G).is_zero())]
    out.append(Check.passed("generators", gens=", ".join(str(g) for g in d.algebra.gens), deg_bound=d.algebra.deg_bound))
    out += d.algebra.certificate
    images = "; ".join(
        f"theta[{i + 1}]: " + ", ".join(f"{k} -> {v}" for k, v in row.items()) for i, row in enumerate(d.images)
    )
    out.append(Check.passed("descended_higgs", names=", ".join(d.names), images=images))
    return d, out


def task_cartier(s: Settings) -> list[Check]:
    F = _require_block(_flat(s), "cartier", "a foliation block or a connection with lambda = 1")
    return _cartier(s, F)[1]


def task_descend(s: Settings) -> list[Check]:
    F = _require_block(_flat(s), "descend", "a foliation block or a connection with lambda = 1")
    out = []
    C = s.prob.connection
    if s.prob.foliation is None and C is not None:
        if linear.is_integrable(C) and linear.p_curvature_linear(C).is_zero():
            try:
                Hm = linear.cartier_descend_linear(C, s.deg_bound)
                out.append(Check.passed("linear.horizontal_basis", basis=str(Hm)))
            except CertificationFailure as exc:
                out.append(Check.inconclusive("linear.horizontal_basis", reason=str(exc)))
    checks = nonlinear.foliation_checks(F)
    out += checks
    if not all(checks):
        return out
    psi = nonlinear.foliation_p_curvature(F)
    if not psi.is_zero():
        w = {f"psi[{i + 1}]": str(P) for i, P in enumerate(psi.psi) if not P.is_zero()}
        out.append(Check.failed("p_curvature_zero", **w))
        return out
    out.append(Check.passed("p_curvature_zero"))
    return out + _descent_checks(s, F)[1]


def task_ekedahl(s: Settings) -> list[Check]:
    F = _require_block(_flat(s), "ekedahl", "a foliation block or a connection with lambda = 1")
    checks = nonlinear.foliation_checks(F)
    if not all(checks):
        return checks
    psi = nonlinear.foliation_p_curvature(F)
    if not psi.is_zero():
        w = {f"psi[{i + 1}]": str(P) for i, P in enumerate(psi.psi) if not P.is_zero()}
        return checks + [Check.failed("p_closed", **w)]
    alg, out = _descent_checks(s, F)
    anns = nonlinear.ekedahl_ann_of_subalgebra(alg)
    out.append(Check.passed("annihilator", basis="; ".join(str(D) for D in anns)))
    out.append(Check.of("ann_ann.identity", list(anns) == list(F.nabla)))
    kills = all(D.apply(g).is_zero() for D in F.nabla for g in alg.gens)
    out.append(Check.of("ann.kills_generators", kills))
    closed = all(lie_bracket(a, b).is_zero() for a in anns for b in anns)
    out.append(Check.of("ann.involutive", closed))
    out.append(nonlinear.transversal_chart_check(anns, _coordinates(F.base_vars, F.p, F.ring)).prefixed("ann"))
    return out


def _coordinates(names, p: int, ring) -> list[Poly]:
    return [Poly.var(v, p, ring) for v in names]


def task_glue(s: Settings) -> list[Check]:
    cov = _require_block(s.prob.cover, "glue", "a cover block")
    if isinstance(cov.higgs, LinearConnection):
        g = gluing.gluing_cocycle(cov.charts, cov.higgs, cov.sign)
        out = [Check.passed(f"g.{a}.{b}", matrix=str(M)) for (a, b), M in sorted(g.items()) if a != b]
        out += gluing.cocycle_checks(cov.charts, g)
        out += gluing.gluing_compatibility_check(cov.charts, cov.higgs, s.n_max, cov.sign)
        if cov.sign == 1:
            out += gluing.independence_checks(cov.charts, cov.higgs, s.n_max)
        return out
    return gluing.nonlinear_gluing_checks(cov.charts, cov.higgs, s.n_max, cov.sign)


def task_rees(s: Settings) -> list[Check]:
    fd = _require_block(s.prob.fontaine, "rees", "a fontaine block")
    out = rees.splitting_checks(fd.filtration)
    R = rees.adapted_basis(fd.filtration)
    if not isinstance(R, rees.ReesModule):
        return out
    T = rees.griffiths_extend(fd.connection, R)
    if isinstance(T, rees.GriffithsViolation):
        out.append(
            Check.failed(
                "griffiths.transversal",
                direction=T.direction + 1,
                entry=f"[{T.row + 1},{T.col + 1}] = {T.entry}",
                drop=T.drop,
            )
        )
        return out
    out.append(Check.passed("griffiths.transversal"))
    out.append(rees.weight_bookkeeping_check(T))
    out += rees.graded_higgs_checks(T)
    out.append(Check.passed("graded_higgs", theta=str(T.graded_higgs())))
    return out


def task_fontaine(s: Settings) -> list[Check]:
    fd = _require_block(s.prob.fontaine, "fontaine", "a fontaine block")
    res = rees.fontaine_periodicity_check(
        fd.connection, fd.filtration, fd.lift, deg_bound=s.deg_bound, seed=s.seed, n_max=s.n_max
    )
    out = [Check(c.name.removeprefix("fontaine."), c.status, c.witness) for c in res.checks]
    if res.graded is not None and res.status != FAIL:
        other = FrobLift.standard(fd.lift.base_vars, s.p)
        if other == fd.lift:
            other = FrobLift(fd.lift.base_vars, tuple(a + v for a, v in zip(fd.lift.a, _coordinates(fd.lift.base_vars, s.p, fd.lift.base_vars))), s.p)
        out += rees.taylor_rule_check(res.graded, other, fd.lift, s.n_max)
    return out


def _roundtrip(s: Settings) -> list[Check]:
    """inverse Cartier, then Cartier, recovers the Higgs data."""
    H = _higgs(s)
    if H is None:
        return []
    Hn = nonlinear.functor_G(H) if isinstance(H, LinearConnection) else H
    L = _lift_for(s, Hn.base_vars)
    F = nonlinear.inverse_cartier_nonlinear(Hn, L, s.n_max)
    G = nonlinear.forward_deform(F, L, s.n_max)
    out = [Check.of("canonical", G == FoliatedTotalSpace.canonical(Hn.base_vars, Hn.fiber_vars, s.p))]
    d, checks = _cartier(s, F)
    out += checks
    ok = d is not None and d.higgs is not None and d.higgs == Hn
    w = {} if ok else {"recovered": str(d.higgs) if d is not None else "none", "expected": str(Hn)}
    out.append(Check.of("higgs.recovered", ok, **w))
    return out


def _random_properties(s: Settings) -> list[Check]:
    """A few seeded identities at the file's prime."""
    from . import random_data as rd

    rng = random.Random(s.seed)
    p = s.p
    out = []
    ring = ("s", "t")
    bad = 0
    for _ in range(5):
        D1, D2 = rd.random_derivation(rng, p, ring), rd.random_derivation(rng, p, ring)
        bad += not jacobson_decompose(D1, D2)[1].is_zero()
    out.append(Check.of("jacobson.residual", not bad, trials=5))
    bad = 0
    for _ in range(5):
        L = rd.random_lift(rng, ("s1", "s2"), p)
        bad += not all(zeta_identities_check(zeta_matrix(L)))
    out.append(Check.of("zeta.identities", not bad, trials=5))
    bad = 0
    for _ in range(3):
        H = rd.random_nilpotent_higgs(rng, ("s",), 2, p)
        C = linear.inverse_cartier_linear(H, rd.random_lift(rng, ("s",), p), s.n_max)
        bad += tuple(linear.p_curvature_linear(C).psi) != linear.frobenius_pullback(H)
    out.append(Check.of("p_curvature.oracle", not bad, trials=3))
    N = rd.jordan_block(min(p, 3), p)
    out.append(Check.of("exp_log.inverse", gluing.truncated_log(gluing.truncated_exp(N)) == N))
    return out


def _applicable(prob: Problem) -> list[str]:
    tasks = ["check"]
    has_higgs = prob.higgs is not None or (prob.connection is not None and prob.connection.lam == 0)
    has_flat = prob.foliation is not None or (prob.connection is not None and prob.connection.lam == 1)
    if has_higgs:
        tasks.append("inverse-cartier")
    if has_flat:
        tasks += ["cartier", "descend", "ekedahl"]
    if prob.cover is not None:
        tasks.append("glue")
    if prob.fontaine is not None:
        tasks += ["rees", "fontaine"]
    return tasks


def _guarded(name: str, fn: Callable[[Settings], list[Check]], s: Settings) -> list[Check]:
    """Run one task; precondition failures become checks instead of crashes."""
    try:
        return fn(s)
    except NotNilpotent as exc:
        return [Check.failed("nilpotent", reason=str(exc))]
    except ContractViolation as exc:
        return [Check.failed("contract", reason=str(exc))]
    except (CertificationFailure, DegreeCapExceeded) as exc:
        return [Check.inconclusive("bound", reason=str(exc))]
    except (RingMismatch, SemanticError):
        raise
    except (CharPError, ValueError) as exc:
        return [Check.failed("precondition", reason=str(exc))]


RUNNERS: dict[str, Callable[[Settings], list[Check]]] = {
    "check": task_check,
    "inverse-cartier": task_inverse_cartier,
    "cartier": task_cartier,
    "descend": task_descend,
    "ekedahl": task_ekedahl,
    "glue": task_glue,
    "rees": task_rees,
    "fontaine": task_fontaine,
}


def run(prob: Problem, task: str, seed: int | None = None, deg_bound: int | None = None) -> Report:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if prob.max_degree is not None:
        set_max_degree(prob.max_degree)
    s = Settings(prob, seed, deg_bound)
    rep = Report(task)
    if task != "suite":
        rep.extend(_guarded(task, RUNNERS[task], s), task)
        return rep
    for t in _applicable(prob):
        rep.extend(_guarded(t, RUNNERS[t], s), t)
    if _higgs(s) is not None:
        rep.extend(_guarded("roundtrip", _roundtrip, s), "roundtrip")
    rep.extend(_guarded("random", _random_properties, s), "random")
    return rep


def header_of(prob: Problem, s_seed: int | None, deg_bound: int | None) -> dict[str, str]:
    return {
        "file": prob.source,
        "p": str(prob.p),
        "seed": str(prob.seed if s_seed is None else s_seed),
        "deg_bound": str(prob.deg_bound if deg_bound is None else deg_bound) if (deg_bound or prob.deg_bound) else "default",
    }


def corpus_dir() -> Path:
    return Path(str(resources.files("charp_hodge") / "corpus"))


def run_directory(path: Path, task: str, seed: int | None, deg_bound: int | None) -> tuple[str, str, Report]:
    """Each ``*.prob`` file runs its header task (or ``task``) and is compared with its ``expect``."""
    texts, records = [], []
    summary = Report(f"{task} (directory)")
    for f in sorted(path.glob("*.prob")):
        try:
            prob = load_problem(f)
        except (ParseError, SemanticError) as exc:
            status = "error"
            texts.append(f"== {f.name}\ninput error: {exc}\n")
            records.append(f"file = {f.name}\nerror = {exc}\n")
            expect = _expect_from_text(f)
        else:
            t = prob.task if task == "suite" and prob.task else task
            try:
                rep = run(prob, t, seed, deg_bound)
            except (SemanticError, RingMismatch) as exc:
                status = "error"
                texts.append(f"== {f.name}\ninput error: {exc}\n")
                records.append(f"file = {f.name}\nerror = {exc}\n")
            else:
                status = rep.status
                head = header_of(prob, seed, deg_bound)
                texts.append(f"== {f.name}\n" + rep.render_text(head))
                records.append(rep.render_records(head))
            expect = prob.expect
        if expect is None:
            summary.add(Check.of(f.stem, status == PASS, observed=status))
        else:
            summary.add(Check.of(f.stem, status == expect, observed=status, expected=expect))
    if not summary.checks:
        raise FileNotFoundError(f"no .prob files in {path}")
    text = "\n".join(texts) + "\n== corpus summary\n" + summary.render_text()
    rec = "\n".join(records) + "\n" + summary.render_records()
    return text, rec, summary


def _expect_from_text(f: Path) -> str | None:
    """``expect`` of a file that does not parse, read from its text if present."""
    m = re.search(r"expect\s*=\s*([a-z]+)", f.read_text(encoding="utf-8"))
    return m.group(1) if m else None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="charp-hodge", description="Exact characteristic-p Hodge correspondence checks.")
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("file", help=f"problem file, directory of .prob files, or {CORPUS} for the bundled corpus")
    ap.add_argument("--seed", type=int, default=None, help="override the header seed")
    ap.add_argument("--deg-bound", type=int, default=None, help="override degree bounds for searches")
    ap.add_argument("--out", default=None, help="write key = value records to this file")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    path = corpus_dir() if args.file == CORPUS else Path(args.file)
    try:
        if path.is_dir():
            text, records, rep = run_directory(path, args.task, args.seed, args.deg_bound)
        else:
            prob = load_problem(path)
            rep = run(prob, args.task, args.seed, args.deg_bound)
            head = header_of(prob, args.seed, args.deg_bound)
            text, records = rep.render_text(head), rep.render_records(head)
    except (ParseError, SemanticError, RingMismatch) as exc:
        print(f"{path.name}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"charp-hodge: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(records, encoding="utf-8")
    return EXIT[rep.status]


if __name__ == "__main__":
    sys.exit(main())
