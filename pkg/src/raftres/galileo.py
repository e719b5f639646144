"""Extended Galileo format: parsing, canonical printing and lowering.

The grammar (see ``docs/galileo.ebnf``)::

    file        = { statement } ;
    statement   = "toplevel" NAME ";"
                | NAME gate NAME { NAME } ";"
                | NAME { attribute } ";" ;
    gate        = "and" | "or" | K "of" M | "pand" | "wsp" | "csp" | "hsp"
                | "fdep" | "repairbox_priority" ;
    attribute   = ("lambda" | "dorm") "=" NUMBER
                | ("EXT_failPDF" | "EXT_repairPDF" | "EXT_dormPDF") "=" pdf ;
    pdf         = FAMILY "(" [ NUMBER { "," NUMBER } ] ")" ;

Names are double-quoted; ``//`` starts a comment running to end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import distributions as D
from .distributions import Family, ParamError, Pdf
from .tree import FaultTree, Node, NodeKind, ValidationError

__all__ = [
    "GalileoError",
    "GalileoSyntaxError",
    "DuplicateName",
    "UnknownReference",
    "ValidationError",
    "Declaration",
    "GalileoAst",
    "parse",
    "format_galileo",
    "format_pdf",
    "lower",
    "load",
]


class GalileoError(ValueError):
    pass


class GalileoSyntaxError(GalileoError):
    def __init__(self, line: int, col: int, message: str):
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"line {line}, col {col}: {message}")


class DuplicateName(GalileoError):
    def __init__(self, name: str, line: int):
        self.name = name
        self.line = line
        super().__init__(f"line {line}: node {name!r} declared twice")


class UnknownReference(GalileoError):
    def __init__(self, name: str, line: int):
        self.name = name
        self.line = line
        super().__init__(f"line {line}: reference to undeclared node {name!r}")


# Gate keyword -> canonical kind tag used in the AST.
GATE_KEYWORDS = {
    "and": "and",
    "or": "or",
    "pand": "pand",
    "wsp": "wsp",
    "csp": "csp",
    "hsp": "hsp",
    "fdep": "fdep",
    "repairbox_priority": "repairbox_priority",
}
_VOT_RE = re.compile(r"(\d+)of(\d+)$")

NUMBER_ATTRS = ("lambda", "dorm")
PDF_ATTRS = ("EXT_failPDF", "EXT_repairPDF", "EXT_dormPDF")

FAMILY_NAMES = {
    "dirac": Family.DIRAC,
    "dir": Family.DIRAC,
    "exponential": Family.EXPONENTIAL,
    "exp": Family.EXPONENTIAL,
    "erlang": Family.ERLANG,
    "erl": Family.ERLANG,
    "uniform": Family.UNIFORM,
    "uni": Family.UNIFORM,
    "rayleigh": Family.RAYLEIGH,
    "ray": Family.RAYLEIGH,
    "weibull": Family.WEIBULL,
    "wei": Family.WEIBULL,
    "normal": Family.NORMAL,
    "nor": Family.NORMAL,
    "lognormal": Family.LOGNORMAL,
    "lnor": Family.LOGNORMAL,
    "never": Family.NEVER,
}
CANONICAL_FAMILY = {
    Family.DIRAC: "dirac",
    Family.EXPONENTIAL: "exponential",
    Family.ERLANG: "erlang",
    Family.UNIFORM: "uniform",
    Family.RAYLEIGH: "rayleigh",
    Family.WEIBULL: "weibull",
    Family.NORMAL: "normal",
    Family.LOGNORMAL: "lognormal",
    Family.NEVER: "never",
}


@dataclass(frozen=True)
class Declaration:
    """One declaration.  ``kind`` is None for basic elements."""

    name: str
    kind: str | None = None
    children: tuple = ()
    attributes: dict = field(default_factory=dict)
    line: int = 0

    def __eq__(self, other):
        if not isinstance(other, Declaration):
            return NotImplemented
        return (self.name, self.kind, self.children, self.attributes) == (
            other.name,
            other.kind,
            other.children,
            other.attributes,
        )

    def __hash__(self):
        return hash((self.name, self.kind, self.children))

    @property
    def vot_k(self) -> int | None:
        m = _VOT_RE.match(self.kind or "")
        return int(m.group(1)) if m else None


@dataclass(frozen=True)
class GalileoAst:
    toplevel: str
    declarations: tuple

    def __iter__(self):
        return iter(self.declarations)

    def __getitem__(self, name: str) -> Declaration:
        for d in self.declarations:
            if d.name == name:
                return d
        raise KeyError(name)


# -- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+|﻿)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<name>"[^"\n]*")
  | (?P<vot>\d+of\d+)
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?(?![A-Za-z_\d]))
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[=(),;])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str):
    pos, line, line_start = 0, 1, 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise GalileoSyntaxError(line, pos - line_start + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            if kind == "vot":
                kind = "word"
            out.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    out.append(_Tok("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        t = self.take()
        if t.kind != kind or (text is not None and t.text != text):
            want = repr(text) if text is not None else kind
            got = repr(t.text) if t.text else "end of input"
            raise GalileoSyntaxError(t.line, t.col, f"expected {want}, got {got}")
        return t

    def number(self) -> float:
        t = self.expect("number")
        return float(t.text)

    def pdf(self) -> Pdf:
        t = self.expect("word")
        fam = FAMILY_NAMES.get(t.text)
        if fam is None:
            raise GalileoSyntaxError(t.line, t.col, f"unknown distribution {t.text!r}")
        self.expect("punct", "(")
        params = []
        if not (self.peek().kind == "punct" and self.peek().text == ")"):
            params.append(self.number())
            while self.peek().kind == "punct" and self.peek().text == ",":
                self.take()
                params.append(self.number())
        self.expect("punct", ")")
        if len(params) != D.ARITY[fam]:
            raise GalileoSyntaxError(
                t.line, t.col, f"{t.text} takes {D.ARITY[fam]} parameters, got {len(params)}"
            )
        return Pdf(fam, tuple(params))

    def parse(self) -> GalileoAst:
        toplevel = None
        decls = []
        while self.peek().kind != "eof":
            t = self.peek()
            if t.kind == "word" and t.text == "toplevel":
                self.take()
                name = self.expect("name")
                if toplevel is not None:
                    raise GalileoSyntaxError(t.line, t.col, "toplevel declared twice")
                toplevel = (name.text[1:-1], name.line)
                self.expect("punct", ";")
                continue
            if t.kind != "name":
                raise GalileoSyntaxError(t.line, t.col, f"expected a quoted node name, got {t.text!r}")
            self.take()
            decls.append(self.declaration(t))
        if toplevel is None:
            t = self.peek()
            raise GalileoSyntaxError(t.line, t.col, "missing toplevel declaration")
        ast = GalileoAst(toplevel[0], tuple(decls))
        _check_names(ast, toplevel[1])
        return ast

    def declaration(self, name_tok: _Tok) -> Declaration:
        name = name_tok.text[1:-1]
        if not name:
            raise GalileoSyntaxError(name_tok.line, name_tok.col, "empty node name")
        t = self.peek()
        if t.kind == "word" and t.text not in NUMBER_ATTRS + PDF_ATTRS:
            self.take()
            if t.text in GATE_KEYWORDS:
                kind = GATE_KEYWORDS[t.text]
            elif _VOT_RE.match(t.text):
                kind = t.text
            else:
                raise GalileoSyntaxError(t.line, t.col, f"unknown keyword {t.text!r}")
            children = []
            while self.peek().kind == "name":
                children.append(self.take().text[1:-1])
            if not children:
                u = self.peek()
                raise GalileoSyntaxError(u.line, u.col, f"{t.text} {name!r} needs at least one input")
            self.expect("punct", ";")
            return Declaration(name, kind, tuple(children), {}, name_tok.line)
        attrs = {}
        while self.peek().kind == "word":
            a = self.take()
            if a.text not in NUMBER_ATTRS + PDF_ATTRS:
                raise GalileoSyntaxError(a.line, a.col, f"unknown attribute {a.text!r}")
            if a.text in attrs:
                raise GalileoSyntaxError(a.line, a.col, f"attribute {a.text!r} given twice")
            self.expect("punct", "=")
            attrs[a.text] = self.number() if a.text in NUMBER_ATTRS else self.pdf()
        self.expect("punct", ";")
        return Declaration(name, None, (), attrs, name_tok.line)


def _check_names(ast: GalileoAst, top_line: int):
    seen = {}
    for d in ast.declarations:
        if d.name in seen:
            raise DuplicateName(d.name, d.line)
        seen[d.name] = d
    if ast.toplevel not in seen:
        raise UnknownReference(ast.toplevel, top_line)
    for d in ast.declarations:
        for c in d.children:
            if c not in seen:
                raise UnknownReference(c, d.line)


def parse(text: str) -> GalileoAst:
    """Parse extended-Galileo text into an AST in declaration order."""
    return _Parser(text).parse()


# -- printer ---------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def format_pdf(pdf: Pdf) -> str:
    return f"{CANONICAL_FAMILY[pdf.family]}({','.join(_num(p) for p in pdf.params)})"


def _quote(name: str) -> str:
    return f'"{name}"'


def format_galileo(ast: GalileoAst) -> str:
    """Canonical text: one declaration per line, attributes in a fixed order."""
    lines = [f"toplevel {_quote(ast.toplevel)};"]
    for d in ast.declarations:
        if d.kind is not None:
            kids = " ".join(_quote(c) for c in d.children)
            lines.append(f"{_quote(d.name)} {d.kind} {kids};")
            continue
        parts = [_quote(d.name)]
        for key in NUMBER_ATTRS + PDF_ATTRS:
            if key in d.attributes:
                v = d.attributes[key]
                parts.append(f"{key}={_num(v) if key in NUMBER_ATTRS else format_pdf(v)}")
        lines.append(" ".join(parts) + ";")
    return "\n".join(lines) + "\n"


# -- lowering --------------------------------------------------------------

_SPARE_KINDS = ("wsp", "csp", "hsp")


def _basic_pdfs(d: Declaration, spare_kinds: set):
    a = d.attributes
    if "lambda" in a and "EXT_failPDF" in a:
        raise ValidationError("basic", f"{d.name!r} gives both lambda and EXT_failPDF")
    try:
        if "lambda" in a:
            fail = D.validate(D.exponential(a["lambda"]))
        elif "EXT_failPDF" in a:
            fail = D.validate(a["EXT_failPDF"])
        else:
            raise ValidationError("basic", f"basic element {d.name!r} has no failure distribution")
        repair = D.validate(a["EXT_repairPDF"]) if "EXT_repairPDF" in a else None
        dorm = None
        if "EXT_dormPDF" in a:
            if "dorm" in a:
                raise ValidationError("sbe", f"{d.name!r} gives both dorm and EXT_dormPDF")
            dorm = D.validate(a["EXT_dormPDF"])
        elif "dorm" in a:
            f = a["dorm"]
            if "lambda" not in a:
                raise ValidationError("sbe", f"{d.name!r}: dorm= needs lambda=")
            if not 0 <= f <= 1:
                raise ValidationError("sbe", f"{d.name!r}: dorm factor must be in [0, 1], got {f}")
            dorm = D.NEVER if f == 0 else D.validate(D.exponential(f * a["lambda"]))
        elif spare_kinds:
            if len(spare_kinds) > 1:
                raise ValidationError("sbe", f"{d.name!r} feeds spare gates of different kinds; give EXT_dormPDF")
            kind = next(iter(spare_kinds))
            if kind == "csp":
                dorm = D.NEVER
            elif kind == "hsp":
                dorm = fail
            else:
                raise ValidationError("sbe", f"warm spare element {d.name!r} needs a dormancy distribution")
    except ParamError as e:
        raise ValidationError("pdf", f"{d.name!r}: {e}") from e
    return fail, repair, dorm


def lower(ast: GalileoAst) -> FaultTree:
    """Resolve names, rewrite FDEPs and n-ary PANDs, and validate."""
    decls = {d.name: d for d in ast.declarations}
    basics = [d.name for d in ast.declarations if d.kind is None]
    fdeps = [d for d in ast.declarations if d.kind == "fdep"]

    spare_kinds = {}
    spare_connected = set()
    for d in ast.declarations:
        if d.kind in _SPARE_KINDS:
            for c in d.children:
                if decls[c].kind is not None:
                    raise ValidationError("spare-input", f"input {c!r} of spare gate {d.name!r} must be a basic element")
                spare_connected.add(c)
            for c in d.children[1:]:
                spare_kinds.setdefault(c, set()).add(d.kind)

    # FDEP triggers and dependents
    dependents = {}
    for f in fdeps:
        trig, deps = f.children[0], f.children[1:]
        if not deps:
            raise ValidationError("fdep", f"FDEP {f.name!r} has no dependent elements")
        if decls[trig].kind in ("fdep", "repairbox_priority"):
            raise ValidationError("fdep", f"trigger {trig!r} of {f.name!r} must be a tree node")
        for b in (trig,) + deps:
            if b in spare_connected:
                raise ValidationError(
                    "spare-fdep",
                    f"{b!r} is connected to a SPARE and to FDEP {f.name!r}",
                )
        for b in deps:
            if decls[b].kind is not None:
                raise ValidationError("fdep", f"dependent {b!r} of {f.name!r} must be a basic element")
            lst = dependents.setdefault(b, [])
            if trig not in lst:
                lst.append(trig)

    order = [d.name for d in ast.declarations if d.kind != "fdep"]
    index = {name: i for i, name in enumerate(order)}
    extra = []  # (name, kind, children-as-names-or-indices)

    def fresh(base):
        name, i = base, 1
        while name in decls or name in index:
            name = f"{base}#{i}"
            i += 1
        index[name] = -1
        return name

    # FDEP ORs: one per dependent, substituted at every consumer
    subst = {b: fresh(f"{b}.fdep") for b in dependents}

    def consumer_ref(c):
        return subst.get(c, c)

    def trigger_inputs(b):
        # basic triggers enter raw, together with whatever triggers them in
        # turn; this keeps mutually dependent elements acyclic
        out, seen, todo = [], {b}, list(dependents[b])
        while todo:
            t = todo.pop(0)
            if t in seen:
                continue
            seen.add(t)
            out.append(t)
            if decls[t].kind is None:
                todo.extend(dependents.get(t, ()))
        return tuple(out)

    for b in dependents:
        extra.append((subst[b], NodeKind.OR, (b,) + trigger_inputs(b), 0))

    nodes_spec = []
    for name in order:
        d = decls[name]
        if d.kind is None:
            nodes_spec.append((name, None, (), 0))
        elif d.kind == "repairbox_priority":
            nodes_spec.append((name, NodeKind.RBOX, d.children, 0))
        elif d.kind in _SPARE_KINDS:
            nodes_spec.append((name, NodeKind.SPARE, d.children, 0))
        elif d.kind == "pand":
            kids = tuple(consumer_ref(c) for c in d.children)
            acc = kids[0]
            for j, w in enumerate(kids[1:-1], start=1):
                sub = fresh(f"{name}.{j}")
                extra.append((sub, NodeKind.PAND, (acc, w), 0))
                acc = sub
            head = (acc, kids[-1]) if len(kids) > 1 else kids
            nodes_spec.append((name, NodeKind.PAND, head, 0))
        else:
            kids = tuple(consumer_ref(c) for c in d.children)
            if d.kind == "and":
                nodes_spec.append((name, NodeKind.AND, kids, 0))
            elif d.kind == "or":
                nodes_spec.append((name, NodeKind.OR, kids, 0))
            else:
                k, m = (int(g) for g in _VOT_RE.match(d.kind).groups())
                if m != len(kids):
                    raise ValidationError("vot-arity", f"{name!r} is declared {d.kind} but has {len(kids)} inputs")
                nodes_spec.append((name, NodeKind.VOT, kids, k))
    nodes_spec.extend(extra)
    index = {spec[0]: i for i, spec in enumerate(nodes_spec)}

    nodes = []
    for name, kind, kids, k in nodes_spec:
        if kind is None:
            fail, repair, dorm = _basic_pdfs(decls[name], spare_kinds.get(name, set()))
            kind = NodeKind.SBE if name in spare_kinds else NodeKind.BE
            nodes.append(Node(name, kind, (), 0, fail, repair, dorm))
        else:
            nodes.append(Node(name, kind, tuple(index[c] for c in kids), k))
    if decls[ast.toplevel].kind in ("fdep", "repairbox_priority"):
        raise ValidationError("top", f"toplevel {ast.toplevel!r} must be a tree node")
    top = index[consumer_ref(ast.toplevel)]
    return FaultTree(tuple(nodes), top)


def load(text: str) -> FaultTree:
    return lower(parse(text))
