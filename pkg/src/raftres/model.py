"""Per-node state and output semantics, as plain Python functions.

Stored state lives only in basic elements and PAND gates:

* BE: ``0`` operational, ``1`` failed.
* SBE: ``0``/``1`` active operational/failed, ``2``/``3`` dormant operational/failed.
* PAND: ``0`` no child failed, ``1`` left failed, ``2`` right failed,
  ``3`` both failed (right first), ``4`` both failed (left first or together).

AND/OR/VOT/SPARE outputs are derived from their inputs.  A SPARE also needs
the :class:`SpareAssignment`: which input currently feeds it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .tree import FaultTree, NodeKind


@dataclass
class SpareAssignment:
    """SPARE index -> input currently feeding it (the primary, a claimed SBE, or -1)."""

    use: dict = field(default_factory=dict)

    def copy(self) -> "SpareAssignment":
        return SpareAssignment(dict(self.use))


@dataclass
class State:
    x: list
    spares: SpareAssignment

    def copy(self) -> "State":
        return State(list(self.x), self.spares.copy())


def initial_state(tree: FaultTree) -> State:
    x = [2 if n.kind is NodeKind.SBE else 0 for n in tree.nodes]
    use = {s: tree.nodes[s].children[0] for s in tree.spares}
    return State(x, SpareAssignment(use))


def pand_next(old: int, zl: int, zr: int) -> int:
    """PAND state after its inputs' outputs become ``(zl, zr)``."""
    if zl and zr:
        return 3 if old in (2, 3) else 4
    if zl:
        return 1
    if zr:
        return 2
    return 0


def _gate_output(tree: FaultTree, v: int, state: State, z) -> int:
    nd = tree.nodes[v]
    k = nd.kind
    if k in (NodeKind.BE, NodeKind.SBE):
        return state.x[v] % 2
    if k is NodeKind.AND:
        return int(all(z[c] for c in nd.children))
    if k is NodeKind.OR:
        return int(any(z[c] for c in nd.children))
    if k is NodeKind.VOT:
        return int(sum(z[c] for c in nd.children) >= nd.k)
    if k is NodeKind.PAND:
        return int(state.x[v] == 4)
    if k is NodeKind.SPARE:
        if not z[nd.children[0]]:
            return 0
        u = state.spares.use.get(v, -1)
        return int(u < 0 or z[u] == 1)
    raise ValueError(f"node {nd.name!r} has no output")


def outputs(tree: FaultTree, state: State) -> list:
    """Outputs of all nodes (``None`` for repair boxes)."""
    z = [None] * len(tree)
    for v in tree.topo_order:
        z[v] = _gate_output(tree, v, state, z)
    return z


def output(tree: FaultTree, v: int, state: State) -> int:
    return outputs(tree, state)[v]


def top_failed(tree: FaultTree, state: State) -> int:
    return outputs(tree, state)[tree.top]


def settle(tree: FaultTree, state: State) -> list:
    """Update PAND states from their inputs' current outputs; return all outputs."""
    z = [None] * len(tree)
    for v in tree.topo_order:
        nd = tree.nodes[v]
        if nd.kind is NodeKind.PAND:
            l, r = nd.children
            state.x[v] = pand_next(state.x[v], z[l], z[r])
        z[v] = _gate_output(tree, v, state, z)
    return z


def boolean_top(tree: FaultTree, failed_basic) -> int:
    """Top output of a static tree when exactly ``failed_basic`` are failed."""
    state = initial_state(tree)
    failed = set(failed_basic)
    for b in tree.basic:
        if tree.nodes[b].kind is NodeKind.BE:
            state.x[b] = 1 if b in failed else 0
        else:
            state.x[b] = 3 if b in failed else 2
    return settle(tree, state)[tree.top]
