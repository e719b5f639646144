"""Validated repairable dynamic fault tree."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property

from .distributions import Family, Pdf, validate as validate_pdf


class NodeKind(IntEnum):
    BE = 0
    SBE = 1
    AND = 2
    OR = 3
    VOT = 4
    PAND = 5
    SPARE = 6
    RBOX = 7


BASIC = (NodeKind.BE, NodeKind.SBE)
GATES = (NodeKind.AND, NodeKind.OR, NodeKind.VOT, NodeKind.PAND, NodeKind.SPARE)


class ValidationError(ValueError):
    """A fault tree violates a structural or weak-determinism condition."""

    def __init__(self, condition: str, message: str):
        self.condition = condition
        super().__init__(f"[{condition}] {message}")


@dataclass(frozen=True)
class Node:
    name: str
    kind: NodeKind
    children: tuple = ()
    k: int = 0  # VOT threshold
    fail: Pdf | None = None
    repair: Pdf | None = None
    dorm: Pdf | None = None

    @property
    def is_basic(self) -> bool:
        return self.kind in BASIC

    @property
    def is_gate(self) -> bool:
        return self.kind in GATES


@dataclass(frozen=True)
class FaultTree:
    """Nodes are indexed by position; ``children`` hold indices.

    RBOX nodes are part of ``nodes`` (their children are the managed basic
    elements in priority order) but produce no output.
    """

    nodes: tuple
    top: int
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "_index", {n.name: i for i, n in enumerate(self.nodes)})
        self._validate()

    def __len__(self):
        return len(self.nodes)

    def index(self, name: str) -> int:
        return self._index[name]

    def kind(self, v: int) -> NodeKind:
        return self.nodes[v].kind

    def children(self, v: int) -> tuple:
        return self.nodes[v].children

    @cached_property
    def basic(self) -> tuple:
        return tuple(i for i, n in enumerate(self.nodes) if n.is_basic)

    @cached_property
    def gates(self) -> tuple:
        return tuple(i for i, n in enumerate(self.nodes) if n.is_gate)

    @cached_property
    def rboxes(self) -> tuple:
        return tuple(i for i, n in enumerate(self.nodes) if n.kind is NodeKind.RBOX)

    @cached_property
    def spares(self) -> tuple:
        return tuple(i for i, n in enumerate(self.nodes) if n.kind is NodeKind.SPARE)

    @cached_property
    def rbox_of(self) -> dict:
        return {b: r for r in self.rboxes for b in self.nodes[r].children}

    @cached_property
    def spares_of(self) -> dict:
        """Basic element -> SPARE gates using it as a spare (declared order)."""
        out = {}
        for s in self.spares:
            for c in self.nodes[s].children[1:]:
                out.setdefault(c, []).append(s)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def primary_of(self) -> dict:
        return {self.nodes[s].children[0]: s for s in self.spares}

    @cached_property
    def topo_order(self) -> tuple:
        """Non-RBOX nodes with every child before its parents."""
        order, seen = [], set()
        for root in range(len(self.nodes)):
            if root in seen or self.nodes[root].kind is NodeKind.RBOX:
                continue
            stack = [(root, iter(self.nodes[root].children))]
            seen.add(root)
            while stack:
                v, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    order.append(v)
                elif nxt not in seen:
                    seen.add(nxt)
                    stack.append((nxt, iter(self.nodes[nxt].children)))
        return tuple(order)

    @cached_property
    def parents(self) -> dict:
        out = {i: [] for i in range(len(self.nodes))}
        for i, n in enumerate(self.nodes):
            if n.kind is NodeKind.RBOX:
                continue
            for c in n.children:
                out[c].append(i)
        return {k: tuple(v) for k, v in out.items()}

    def summary(self) -> dict:
        counts = {}
        for n in self.nodes:
            counts[n.kind.name] = counts.get(n.kind.name, 0) + 1
        return counts

    def _validate(self):
        nodes = self.nodes
        n = len(nodes)
        if len(self._index) != n:
            raise ValidationError("names", "node names must be unique")
        if not 0 <= self.top < n:
            raise ValidationError("top", f"top index {self.top} out of range")
        if nodes[self.top].kind is NodeKind.RBOX:
            raise ValidationError("top", "the top node cannot be a repair box")
        for i, nd in enumerate(nodes):
            for c in nd.children:
                if not 0 <= c < n:
                    raise ValidationError("reference", f"{nd.name!r} has dangling child {c}")
                if nodes[c].kind is NodeKind.RBOX:
                    raise ValidationError("reference", f"{nd.name!r} uses repair box {nodes[c].name!r} as input")
            if nd.is_basic:
                if nd.children:
                    raise ValidationError("basic", f"basic element {nd.name!r} cannot have children")
                if nd.fail is None:
                    raise ValidationError("basic", f"basic element {nd.name!r} has no failure distribution")
                validate_pdf(nd.fail)
                if nd.repair is not None:
                    validate_pdf(nd.repair)
                if nd.kind is NodeKind.SBE:
                    if nd.dorm is None:
                        raise ValidationError("sbe", f"spare element {nd.name!r} has no dormancy distribution")
                    validate_pdf(nd.dorm)
                continue
            if not nd.children:
                raise ValidationError("arity", f"{nd.kind.name} {nd.name!r} has no inputs")
            if len(set(nd.children)) != len(nd.children):
                raise ValidationError("arity", f"{nd.name!r} lists an input twice")
            if nd.kind is NodeKind.VOT and not 1 <= nd.k <= len(nd.children):
                raise ValidationError("vot-arity", f"VOT {nd.name!r} needs 1 <= k <= {len(nd.children)}, got k={nd.k}")
            if nd.kind is NodeKind.PAND and len(nd.children) != 2:
                raise ValidationError("pand-arity", f"PAND {nd.name!r} must be binary after lowering")
            if nd.kind is NodeKind.RBOX:
                for c in nd.children:
                    if not nodes[c].is_basic:
                        raise ValidationError("rbox-input", f"repair box {nd.name!r} manages non-basic {nodes[c].name!r}")
                    if nodes[c].repair is None:
                        raise ValidationError("rbox-repair", f"{nodes[c].name!r} is managed by {nd.name!r} but has no repair distribution")
            if nd.kind is NodeKind.SPARE:
                if len(nd.children) < 2:
                    raise ValidationError("spare-arity", f"SPARE {nd.name!r} needs a primary and at least one spare")
                p = nodes[nd.children[0]]
                if p.kind is not NodeKind.BE:
                    raise ValidationError("spare-primary", f"primary {p.name!r} of {nd.name!r} must be a basic element")
                for c in nd.children[1:]:
                    if nodes[c].kind is not NodeKind.SBE:
                        raise ValidationError("spare-input", f"spare input {nodes[c].name!r} of {nd.name!r} must be a spare basic element")
        seen_rbox = {}
        for r in self.rboxes:
            for c in nodes[r].children:
                if c in seen_rbox:
                    raise ValidationError("rbox-shared", f"{nodes[c].name!r} is managed by two repair boxes")
                seen_rbox[c] = r
        prim = {}
        for s in self.spares:
            p = nodes[s].children[0]
            if p in prim:
                raise ValidationError("spare-sharing", f"primary {nodes[p].name!r} is connected to more than one SPARE")
            prim[p] = s
        for i, nd in enumerate(nodes):
            if nd.kind is NodeKind.SBE and i not in self.spares_of:
                raise ValidationError("sbe", f"{nd.name!r} is marked as spare but feeds no SPARE")
            if nd.kind is NodeKind.SBE and i in prim:
                raise ValidationError("spare-sharing", f"spare element {nd.name!r} is also a primary")
        self._check_acyclic()

    def _check_acyclic(self):
        color = [0] * len(self.nodes)
        for root in range(len(self.nodes)):
            if color[root]:
                continue
            stack = [(root, iter(self.nodes[root].children))]
            color[root] = 1
            while stack:
                v, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[v] = 2
                    stack.pop()
                elif color[nxt] == 1:
                    raise ValidationError("cycle", f"cycle through {self.nodes[nxt].name!r}")
                elif color[nxt] == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(self.nodes[nxt].children)))


def is_never(pdf: Pdf | None) -> bool:
    return pdf is None or pdf.family is Family.NEVER
