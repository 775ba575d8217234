"""Reader for ``.prob`` problem files (grammar in ``docs/format.md``).

Parsing is two-phase: a generic pass builds nested blocks whose scalar
values are raw source slices, then each block is interpreted once the
variables it declares are known.  Errors carry the line and column of the
offending token; semantic errors name the block.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .derivations import DerivationOp
from .errors import CharPError, ParseError, SemanticError
from .frobenius_lift import FrobLift, ZetaMatrix
from .gluing import Chart
from .linear import LinearConnection
from .matrix import PolyMatrix
from .nonlinear import FoliatedTotalSpace, HiggsTotalSpace
from .poly import Poly, is_prime
from .rees import FilteredModule

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<arrow>->)|(?P<pow>\*\*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<int>[0-9]+)"
    r"|(?P<punct>[{}\[\]()=;,:+\-*^])"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, m.start() - line_start + 1, m.start(), m.end()))
        pos = m.end()
    return out


@dataclass
class Raw:
    """A scalar as written: integer, name or polynomial text."""

    text: str
    line: int
    col: int


@dataclass
class RawDerivation:
    images: list[tuple[str, Raw]]
    line: int
    col: int


@dataclass
class Block:
    kind: str
    label: str | None
    line: int
    col: int
    fields: dict[str, object] = field(default_factory=dict)
    positions: dict[str, tuple[int, int]] = field(default_factory=dict)
    children: list[Block] = field(default_factory=list)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.tokens[j] if j < len(self.tokens) else None

    def _eof(self) -> ParseError:
        lines = self.text.split("\n")
        return ParseError("unexpected end of file", len(lines), len(lines[-1]) + 1)

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise self._eof()
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.take()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.i += 1
            return True
        return False

    # structure ------------------------------------------------------------

    def file(self) -> list[Block]:
        blocks = []
        while self.peek() is not None:
            if self.accept(";"):
                continue
            blocks.append(self.block())
        return blocks

    def block(self) -> Block:
        kw = self.take()
        if kw.kind != "ident":
            raise ParseError(f"expected a block name, found {kw.text!r}", kw.line, kw.col)
        label = None
        nxt = self.peek()
        if nxt is not None and nxt.kind in ("ident", "int") and self.peek(1) is not None and self.peek(1).text == "{":
            label = self.take().text
        self.expect("{")
        blk = Block(kw.text, label, kw.line, kw.col)
        while not self.accept("}"):
            if self.peek() is None:
                raise self._eof()
            if self.accept(";"):
                continue
            self.member(blk)
        return blk

    def member(self, blk: Block) -> None:
        name = self.peek()
        if name is None:
            raise self._eof()
        if name.kind != "ident":
            raise ParseError(f"expected a field name, found {name.text!r}", name.line, name.col)
        after = self.peek(1)
        after2 = self.peek(2)
        if after is not None and (after.text == "{" or (after.kind in ("ident", "int") and after2 is not None and after2.text == "{")):
            blk.children.append(self.block())
            return
        self.take()
        key = name.text
        if self.accept("["):
            idx = self.take()
            if idx.kind != "int":
                raise ParseError("index must be an integer", idx.line, idx.col)
            self.expect("]")
            key = f"{key}[{int(idx.text)}]"
        self.expect("=")
        if key in blk.fields:
            raise ParseError(f"field {key!r} given twice", name.line, name.col)
        blk.fields[key] = self.value()
        blk.positions[key] = (name.line, name.col)
        tok = self.peek()
        if tok is not None and tok.text not in (";", "}") and tok.line == self.tokens[self.i - 1].line:
            raise ParseError(f"expected ';' or '}}', found {tok.text!r}", tok.line, tok.col)

    def value(self):
        tok = self.peek()
        if tok is None:
            raise self._eof()
        if tok.text == "[":
            return self.list_value()
        if tok.text == "D" and self.peek(1) is not None and self.peek(1).text == ":":
            return self.derivation()
        return self.scalar()

    def list_value(self) -> list:
        self.expect("[")
        items = []
        if self.accept("]"):
            return items
        while True:
            items.append(self.value())
            if self.accept("]"):
                return items
            self.expect(",")

    def scalar(self) -> Raw:
        depth = 0
        first = self.peek()
        last = None
        while True:
            tok = self.peek()
            if tok is None:
                break
            if depth == 0 and tok.text in (",", "]", ";", "}"):
                break
            if depth == 0 and last is not None and tok.line > last.line and _complete(last, tok):
                break
            if tok.text in ("{", "[", "="):
                raise ParseError(f"unexpected {tok.text!r} in value", tok.line, tok.col)
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
                if depth < 0:
                    raise ParseError("unbalanced ')'", tok.line, tok.col)
            last = self.take()
        if last is None:
            bad = first or self.peek()
            if bad is None:
                raise self._eof()
            raise ParseError(f"expected a value, found {bad.text!r}", bad.line, bad.col)
        if depth:
            raise ParseError("unbalanced '('", first.line, first.col)
        return Raw(self.text[first.start:last.end], first.line, first.col)

    def derivation(self) -> RawDerivation:
        head = self.expect("D")
        self.expect(":")
        images: list[tuple[str, Raw]] = []
        tok = self.peek()
        if tok is not None and tok.text == "0":
            self.take()
            return RawDerivation(images, head.line, head.col)
        while True:
            name = self.take()
            if name.kind != "ident":
                raise ParseError(f"expected a generator name, found {name.text!r}", name.line, name.col)
            self.expect("->")
            images.append((name.text, self.scalar()))
            # a ';' continues the derivation only if another 'x ->' follows
            nxt, n1, n2 = self.peek(), self.peek(1), self.peek(2)
            if nxt is not None and nxt.text == ";" and n1 is not None and n1.kind == "ident" and n2 is not None and n2.text == "->":
                self.take()
                continue
            return RawDerivation(images, head.line, head.col)


_OPERATORS = {"+", "-", "*", "^", "**", "(", "->", ":"}


def _complete(last: Token, nxt: Token) -> bool:
    """A line break ends a value unless either side of it is an operator."""
    return last.text not in _OPERATORS and nxt.text not in _OPERATORS and nxt.text != ")"


def parse_blocks(text: str) -> list[Block]:
    return _Parser(text).file()


# interpretation ----------------------------------------------------------------


@dataclass
class Cover:
    charts: list[Chart]
    higgs: LinearConnection | HiggsTotalSpace
    sign: int = 1


@dataclass
class FontaineData:
    connection: LinearConnection
    filtration: FilteredModule
    lift: FrobLift


@dataclass
class Problem:
    p: int
    seed: int = 0
    n_max: int = 4
    deg_bound: int | None = None
    max_degree: int | None = None
    task: str | None = None
    expect: str | None = None
    source: str = "<string>"
    lift: FrobLift | None = None
    connection: LinearConnection | None = None
    higgs: HiggsTotalSpace | None = None
    foliation: FoliatedTotalSpace | None = None
    cover: Cover | None = None
    fontaine: FontaineData | None = None
    zeta: ZetaMatrix | None = None


HEADER_KEYS = {"p", "seed", "n_max", "deg_bound", "max_degree", "task", "expect"}


class _Interp:
    def __init__(self, p: int):
        self.p = p

    def int_of(self, blk: Block, key: str, raw) -> int:
        if not isinstance(raw, Raw) or not re.fullmatch(r"-?\s*[0-9]+", raw.text):
            line, col = blk.positions.get(key, (blk.line, blk.col))
            raise ParseError(f"{key} must be an integer", line, col)
        return int(raw.text.replace(" ", ""))

    def name_of(self, blk: Block, key: str, raw) -> str:
        if not isinstance(raw, Raw) or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_-]*", raw.text):
            line, col = blk.positions.get(key, (blk.line, blk.col))
            raise ParseError(f"{key} must be a name", line, col)
        return raw.text

    def names(self, blk: Block, key: str, required: bool = True) -> tuple[str, ...]:
        if key not in blk.fields:
            if required:
                raise SemanticError(blk.kind, f"missing field {key!r}")
            return ()
        raw = blk.fields[key]
        if not isinstance(raw, list):
            line, col = blk.positions[key]
            raise ParseError(f"{key} must be a list of names", line, col)
        out = tuple(self.name_of(blk, key, r) for r in raw)
        if len(set(out)) != len(out):
            raise SemanticError(blk.kind, f"repeated name in {key}")
        return out

    def poly(self, raw, ring) -> Poly:
        if not isinstance(raw, Raw):
            line, col = getattr(raw, "line", 0), getattr(raw, "col", 0)
            raise ParseError("expected a polynomial", line, col)
        try:
            return Poly.parse(raw.text, self.p, ring)
        except ParseError as exc:
            col = raw.col + exc.column - 1 if "\n" not in raw.text else raw.col
            raise ParseError(exc.message, raw.line, col) from None

    def matrix(self, blk: Block, key: str, raw, ring, rank: int | None = None) -> PolyMatrix:
        line, col = blk.positions.get(key, (blk.line, blk.col))
        if not isinstance(raw, list) or not all(isinstance(r, list) for r in raw):
            raise ParseError(f"{key} must be a matrix [[...], ...]", line, col)
        rows = [[self.poly(x, ring) for x in r] for r in raw]
        n = len(rows)
        if rank is not None and n != rank:
            raise SemanticError(blk.kind, f"{key} has {n} rows, expected {rank}")
        if any(len(r) != (rank if rank is not None else n) for r in rows):
            raise SemanticError(blk.kind, f"{key} is not square of size {rank or n}")
        return PolyMatrix(rows, self.p, ring)

    def derivation(self, blk: Block, key: str, raw, ring) -> DerivationOp:
        if not isinstance(raw, RawDerivation):
            line, col = blk.positions.get(key, (blk.line, blk.col))
            raise ParseError(f"{key} must be a derivation 'D: x -> ...'", line, col)
        images = {}
        for name, val in raw.images:
            if name not in ring:
                raise ParseError(f"unknown variable {name!r}", val.line, val.col)
            images[name] = self.poly(val, ring)
        return DerivationOp.from_map(images, ring, self.p)

    def indexed(self, blk: Block, prefix: str, count: int) -> list:
        out = []
        for i in range(1, count + 1):
            key = f"{prefix}[{i}]"
            if key not in blk.fields:
                raise SemanticError(blk.kind, f"missing {key}")
            out.append((key, blk.fields[key]))
        extra = [k for k in blk.fields if k.startswith(prefix + "[") and k not in {k2 for k2, _ in out}]
        if extra:
            raise SemanticError(blk.kind, f"unexpected {', '.join(extra)} (one per base variable)")
        return out

    def check_keys(self, blk: Block, allowed: set[str], indexed: tuple[str, ...] = ()) -> None:
        for key in blk.fields:
            root = key.split("[", 1)[0]
            if key not in allowed and not (root in indexed and "[" in key):
                line, col = blk.positions[key]
                raise ParseError(f"unknown field {key!r} in {blk.kind}", line, col)

    # blocks ---------------------------------------------------------------

    def lift(self, blk: Block) -> FrobLift:
        self.check_keys(blk, {"vars", "a"})
        base = self.names(blk, "vars")
        raw = blk.fields.get("a")
        if not isinstance(raw, list):
            raise SemanticError("lift", "field 'a' must be a list of polynomials")
        if len(raw) != len(base):
            raise SemanticError("lift", f"{len(raw)} polynomials for {len(base)} variables")
        return FrobLift(base, tuple(self.poly(r, base) for r in raw), self.p)

    def connection(self, blk: Block) -> LinearConnection:
        self.check_keys(blk, {"base", "lambda", "rank"}, ("A",))
        base = self.names(blk, "base")
        if "rank" not in blk.fields:
            raise SemanticError("connection", "missing field 'rank'")
        rank = self.int_of(blk, "rank", blk.fields["rank"])
        lam = self.int_of(blk, "lambda", blk.fields["lambda"]) if "lambda" in blk.fields else 1
        if lam % self.p not in (0, 1):
            raise SemanticError("connection", "lambda must be 0 or 1")
        mats = [self.matrix(blk, k, raw, base, rank) for k, raw in self.indexed(blk, "A", len(base))]
        return LinearConnection(base, rank, lam, tuple(mats), self.p)

    def total_space(self, blk: Block, prefix: str):
        self.check_keys(blk, {"base", "fiber"}, (prefix,))
        base = self.names(blk, "base")
        fiber = self.names(blk, "fiber")
        if set(base) & set(fiber):
            raise SemanticError(blk.kind, "base and fiber share a variable")
        ring = base + fiber
        ops = tuple(self.derivation(blk, k, raw, ring) for k, raw in self.indexed(blk, prefix, len(base)))
        return base, fiber, ops

    def higgs(self, blk: Block) -> HiggsTotalSpace:
        base, fiber, ops = self.total_space(blk, "Theta")
        for i, D in enumerate(ops):
            if not D.is_vertical(base):
                raise SemanticError("higgs", f"Theta[{i + 1}] is not vertical")
        return HiggsTotalSpace(base, fiber, ops, self.p)

    def foliation(self, blk: Block) -> FoliatedTotalSpace:
        base, fiber, ops = self.total_space(blk, "D")
        return FoliatedTotalSpace(base, fiber, ops, self.p)

    def zeta(self, blk: Block) -> ZetaMatrix:
        self.check_keys(blk, {"vars", "f"})
        base = self.names(blk, "vars")
        M = self.matrix(blk, "f", blk.fields.get("f"), base, len(base))
        return ZetaMatrix(base, M, self.p)

    def cover(self, blk: Block) -> Cover:
        self.check_keys(blk, {"sign"})
        sign = self.int_of(blk, "sign", blk.fields["sign"]) if "sign" in blk.fields else 1
        if sign not in (1, -1):
            raise SemanticError("cover", "sign must be 1 or -1")
        charts, data = [], None
        for child in blk.children:
            if child.kind == "chart":
                if child.label is None:
                    raise SemanticError("cover", "chart needs an id")
                lifts = [c for c in child.children if c.kind == "lift"]
                if len(lifts) != 1 or child.fields:
                    raise SemanticError(f"chart {child.label}", "expected exactly one lift block")
                charts.append(Chart(child.label, self.lift(lifts[0])))
            elif child.kind == "higgs":
                data = self.higgs(child)
            elif child.kind == "connection":
                data = self.connection(child)
                if data.lam != 0:
                    raise SemanticError("cover", "the shared data must be a Higgs field (lambda = 0)")
            else:
                raise SemanticError("cover", f"unexpected block {child.kind!r}")
        if data is None:
            raise SemanticError("cover", "missing higgs or connection block")
        if not charts:
            raise SemanticError("cover", "no charts")
        ids = [c.id for c in charts]
        if len(set(ids)) != len(ids):
            raise SemanticError("cover", "duplicate chart id")
        for c in charts:
            if c.lift.base_vars != data.base_vars:
                raise SemanticError(f"chart {c.id}", "lift variables differ from the Higgs base")
        return Cover(charts, data, sign)

    def fontaine(self, blk: Block) -> FontaineData:
        self.check_keys(blk, {"filtration"})
        conns = [c for c in blk.children if c.kind == "connection"]
        lifts = [c for c in blk.children if c.kind == "lift"]
        other = [c.kind for c in blk.children if c.kind not in ("connection", "lift")]
        if other:
            raise SemanticError("fontaine", f"unexpected block {other[0]!r}")
        if len(conns) != 1:
            raise SemanticError("fontaine", "expected one connection block")
        C = self.connection(conns[0])
        if C.lam != 1:
            raise SemanticError("fontaine", "the connection must have lambda = 1")
        L = self.lift(lifts[0]) if lifts else FrobLift.standard(C.base_vars, self.p)
        if L.base_vars != C.base_vars:
            raise SemanticError("fontaine", "lift variables differ from the connection base")
        raw = blk.fields.get("filtration", [])
        if not isinstance(raw, list):
            raise SemanticError("fontaine", "filtration must be a list of levels")
        levels = []
        for lvl in raw:
            if not isinstance(lvl, list) or not all(isinstance(c, list) for c in lvl):
                raise SemanticError("fontaine", "each filtration level is a list of column vectors")
            cols = []
            for col in lvl:
                if len(col) != C.rank:
                    raise SemanticError("fontaine", f"filtration vector of length {len(col)} in rank {C.rank}")
                cols.append(tuple(self.poly(x, C.base_vars) for x in col))
            levels.append(tuple(cols))
        return FontaineData(C, FilteredModule(C.base_vars, C.rank, tuple(levels), self.p), L)


def parse_problem(text: str, source: str = "<string>") -> Problem:
    blocks = parse_blocks(text)
    if not blocks or blocks[0].kind != "header":
        tok = blocks[0] if blocks else None
        raise ParseError("file must start with a header block", tok.line if tok else 1, tok.col if tok else 1)
    head = blocks[0]
    for key in head.fields:
        if key not in HEADER_KEYS:
            line, col = head.positions[key]
            raise ParseError(f"unknown header field {key!r}", line, col)
    if "p" not in head.fields:
        raise SemanticError("header", "missing field 'p'")
    interp = _Interp(0)
    p = interp.int_of(head, "p", head.fields["p"])
    if not is_prime(p):
        raise SemanticError("header", f"p = {p} is not prime")
    interp.p = p
    prob = Problem(p=p, source=source)
    for key in ("seed", "n_max", "deg_bound", "max_degree"):
        if key in head.fields:
            setattr(prob, key, interp.int_of(head, key, head.fields[key]))
    for key in ("task", "expect"):
        if key in head.fields:
            setattr(prob, key, interp.name_of(head, key, head.fields[key]))
    if prob.expect not in (None, "pass", "fail", "inconclusive", "error"):
        raise SemanticError("header", "expect must be pass, fail, inconclusive or error")
    seen: set[str] = set()
    for blk in blocks[1:]:
        if blk.kind in seen:
            raise SemanticError(blk.kind, "block given twice")
        seen.add(blk.kind)
        builder = getattr(interp, blk.kind, None) if blk.kind in _BLOCKS else None
        if builder is None:
            raise ParseError(f"unknown block {blk.kind!r}", blk.line, blk.col)
        if blk.kind not in ("cover", "fontaine") and blk.children:
            raise SemanticError(blk.kind, f"unexpected nested block {blk.children[0].kind!r}")
        try:
            setattr(prob, blk.kind, builder(blk))
        except (ParseError, SemanticError):
            raise
        except (CharPError, ValueError) as exc:
            raise SemanticError(blk.kind, str(exc)) from None
    _cross_check(prob)
    return prob


_BLOCKS = ("lift", "connection", "higgs", "foliation", "cover", "fontaine", "zeta")


def _cross_check(prob: Problem) -> None:
    if prob.lift is None:
        return
    for name in ("connection", "higgs", "foliation"):
        obj = getattr(prob, name)
        if obj is not None and obj.base_vars != prob.lift.base_vars:
            raise SemanticError(name, f"base {list(obj.base_vars)} differs from lift variables {list(prob.lift.base_vars)}")


def load_problem(path: str | Path) -> Problem:
    path = Path(path)
    return parse_problem(path.read_text(encoding="utf-8"), path.name)
