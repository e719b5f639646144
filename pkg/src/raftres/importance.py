"""Compositional importance function and threshold selection.

Each node ``v`` gets an integer importance ``I_v`` with maximum ``maxI_v``.
Gates rescale their inputs by ``lcm_v / maxI_w`` (``lcm_v`` being the lcm of
the inputs' maxima) so every combination stays in exact integer arithmetic:

=======  ==========================================================  ==========
kind     I_v                                                         maxI_v
=======  ==========================================================  ==========
BE/SBE   z_v                                                         1
AND      sum_w f_w I_w                                               lcm * m
OR       max_w f_w I_w                                               lcm
VOT_k    sum of the k largest f_w I_w                                lcm * k
SPARE    max(sum_w f_w I_w, z_v * lcm * m)                           lcm * m
PAND     max(f_l I_l + ord * f_r I_r, z_v * 2 lcm),                  2 lcm
         ord = 1 if x_v in {1, 4} else -1
=======  ==========================================================  ==========

with ``f_w = lcm_v / maxI_w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import State, outputs
from .tree import FaultTree, NodeKind

INT_BUDGET = 2**62


class NoAscent(RuntimeError):
    """No pilot run ever left the initial importance level."""


@dataclass(frozen=True)
class ImportanceModel:
    tree: FaultTree
    max_i: tuple
    lcm: tuple
    factors: tuple  # per node: one factor per input, aligned with children

    @property
    def top_max(self) -> int:
        return self.max_i[self.tree.top]

    def evaluate_all(self, state: State, z=None) -> list:
        """Importance of every node (0 for repair boxes)."""
        tree = self.tree
        if z is None:
            z = outputs(tree, state)
        imp = [0] * len(tree)
        for v in tree.topo_order:
            nd = tree.nodes[v]
            k = nd.kind
            if k in (NodeKind.BE, NodeKind.SBE):
                imp[v] = z[v]
                continue
            scaled = [f * imp[c] for f, c in zip(self.factors[v], nd.children)]
            if k is NodeKind.AND:
                imp[v] = sum(scaled)
            elif k is NodeKind.OR:
                imp[v] = max(scaled)
            elif k is NodeKind.VOT:
                imp[v] = sum(sorted(scaled, reverse=True)[: nd.k])
            elif k is NodeKind.SPARE:
                imp[v] = max(sum(scaled), z[v] * self.max_i[v])
            elif k is NodeKind.PAND:
                ord_ = 1 if state.x[v] in (1, 4) else -1
                imp[v] = max(scaled[0] + ord_ * scaled[1], z[v] * self.max_i[v])
        return imp

    def evaluate(self, state: State, z=None) -> int:
        return self.evaluate_all(state, z)[self.tree.top]

    def dump(self) -> str:
        """Per-node maxima and the evaluator as arithmetic expressions."""
        tree = self.tree
        names = [n.name for n in tree.nodes]
        width = max(len(n) for n in names)
        lines = [f"{'node':<{width}}  {'kind':<6} {'maxI':>12} {'lcm':>12}"]
        for v in tree.topo_order:
            nd = tree.nodes[v]
            kind = f"VOT{nd.k}" if nd.kind is NodeKind.VOT else nd.kind.name
            lcm = self.lcm[v] if nd.is_gate else "-"
            lines.append(f"{nd.name:<{width}}  {kind:<6} {self.max_i[v]:>12} {lcm:>12}")
        lines.append("")
        for v in tree.topo_order:
            nd = tree.nodes[v]
            if nd.is_gate:
                lines.append(f"I({nd.name}) = {self._expr(v, names)}")
        lines.append(f"I = I({names[tree.top]})")
        return "\n".join(lines) + "\n"

    def _expr(self, v, names) -> str:
        nd = self.tree.nodes[v]
        terms = [
            f"I({names[c]})" if f == 1 else f"{f}*I({names[c]})"
            for f, c in zip(self.factors[v], nd.children)
        ]
        if nd.kind is NodeKind.AND:
            return " + ".join(terms)
        if nd.kind is NodeKind.OR:
            return f"max({', '.join(terms)})"
        if nd.kind is NodeKind.VOT:
            return f"sum_largest{nd.k}({', '.join(terms)})"
        if nd.kind is NodeKind.SPARE:
            return f"max({' + '.join(terms)}, {self.max_i[v]}*z({nd.name}))"
        left, right = terms
        return f"max({left} + ord({nd.name})*{right}, {self.max_i[v]}*z({nd.name}))"


def build(tree: FaultTree) -> ImportanceModel:
    """Compute per-node maxima, lcm factors and the evaluator."""
    n = len(tree)
    max_i = [0] * n
    lcm = [1] * n
    factors = [()] * n
    for v in tree.topo_order:
        nd = tree.nodes[v]
        if nd.is_basic:
            max_i[v] = 1
            continue
        kids = nd.children
        l = math.lcm(*(max_i[c] for c in kids))
        lcm[v] = l
        factors[v] = tuple(l // max_i[c] for c in kids)
        m = len(kids)
        if nd.kind is NodeKind.AND:
            mx = l * m
        elif nd.kind is NodeKind.OR:
            mx = l
        elif nd.kind is NodeKind.VOT:
            mx = l * nd.k
        elif nd.kind is NodeKind.SPARE:
            mx = l * m
        else:
            mx = 2 * l
        if mx > INT_BUDGET:
            raise OverflowError(
                f"importance of {nd.name!r} would reach {mx}, beyond the 2^62 integer budget; "
                "restructure the tree or reduce lcm growth"
            )
        max_i[v] = mx
    return ImportanceModel(tree, tuple(max_i), tuple(lcm), tuple(factors))


# -- threshold schemes -----------------------------------------------------


@dataclass(frozen=True)
class ThresholdScheme:
    """Importance thresholds ``levels[0] < levels[1] < ...`` with one effort each."""

    levels: tuple = ()
    efforts: tuple = ()
    semantics: str = "restart"  # or "fixed-effort"
    method: str = "manual"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(l) for l in self.levels))
        object.__setattr__(self, "efforts", tuple(int(e) for e in self.efforts))
        if len(self.levels) != len(self.efforts):
            raise ValueError("one effort per threshold is required")
        if self.levels and self.levels[0] < 1:
            raise ValueError("thresholds must be >= 1")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if any(e < 1 for e in self.efforts):
            raise ValueError("efforts must be >= 1")
        if self.semantics not in ("restart", "fixed-effort"):
            raise ValueError(f"unknown semantics {self.semantics!r}")

    def __len__(self):
        return len(self.levels)

    def check(self, top_max: int) -> "ThresholdScheme":
        if self.levels and self.levels[-1] > top_max:
            raise ValueError(f"threshold {self.levels[-1]} exceeds the top importance {top_max}")
        return self

    def with_effort(self, effort: int) -> "ThresholdScheme":
        return ThresholdScheme(self.levels, (effort,) * len(self.levels), self.semantics, self.method)

    def as_semantics(self, semantics: str) -> "ThresholdScheme":
        return ThresholdScheme(self.levels, self.efforts, semantics, self.method)

    def region(self, imp: int) -> int:
        return sum(1 for l in self.levels if l <= imp)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "levels": list(self.levels),
            "efforts": list(self.efforts),
            "semantics": self.semantics,
        }

    def __str__(self):
        pairs = ", ".join(f"{l}:{e}" for l, e in zip(self.levels, self.efforts))
        return f"{self.method}[{pairs}]"

    @classmethod
    def parse(cls, text: str) -> "ThresholdScheme":
        """``"3:4,7:4,12:2"`` (level:effort) or ``"3,7,12"`` (effort 1)."""
        levels, efforts = [], []
        for part in filter(None, (p.strip() for p in text.split(","))):
            lvl, _, eff = part.partition(":")
            levels.append(int(lvl))
            efforts.append(int(eff) if eff else 1)
        return cls(tuple(levels), tuple(efforts))


class EnginePilots:
    """Pilot simulations for threshold selection.

    ``horizon`` is the mission time for transient metrics; ``None`` selects
    steady-state pilots, which also stop when they fall below their start
    level or after ``max_events`` event batches.
    """

    def __init__(self, tree: FaultTree, model: ImportanceModel, horizon, seed: int, max_events: int = 100_000):
        from . import engine, rng

        self._E = engine
        self._R = rng
        self.kt = engine.compile_tree(tree, model)
        self.layout = engine.Layout(self.kt.n, self.kt.nrbox)
        self.steady = horizon is None
        self.horizon = math.inf if horizon is None else float(horizon)
        self.max_events = int(max_events) if self.steady else int(engine._BIG)
        self.key = rng.root_key(seed, 0x5E1EC7)
        self._evk = np.empty(2 * self.kt.n + 2, dtype=np.int64)
        self._evb = np.empty(2 * self.kt.n + 2, dtype=np.int64)
        self._scr = np.empty(self.kt.maxdeg + 1, dtype=np.int64)
        self._acc = np.zeros(2)

    def initial(self):
        ist = np.zeros(self.layout.isize, dtype=np.int64)
        fst = np.zeros(self.layout.fsize)
        r = np.array([self._R.derive(self.key, 0), 0], dtype=np.uint64)
        self._E.k_init(self.kt, ist, fst, r, self._scr)
        return ist, fst

    def _stream(self, stage, p):
        return np.array([self._R.derive(self._R.derive(self.key, stage + 1), p), 0], dtype=np.uint64)

    def _lo(self, current):
        return current if self.steady else -1

    def ascend(self, states, current, n, stage):
        """Run ``n`` pilots until importance exceeds ``current``; (value, state) or (None, None)."""
        out = []
        for p in range(n):
            ist, fst = (a.copy() for a in states[p % len(states)])
            res = self._E.k_run_until(
                self.kt, ist, fst, self._stream(stage, p), self.horizon, self._lo(current), current + 1,
                True, self._acc, 0.0, 0.0, self._evk, self._evb, self._scr, self.max_events,
            )
            if res in (self._E.OUT_UP, self._E.OUT_HIT):
                out.append((int(ist[self.layout.META + 1]), (ist, fst)))
            else:
                out.append((None, None))
        return out

    def maxima(self, states, current, n, stage):
        """Highest importance reached by each of ``n`` pilots, plus replay handles."""
        vals, handles = [], []
        for p in range(n):
            start = states[p % len(states)]
            ist, fst = (a.copy() for a in start)
            best = self._E.k_run_max(
                self.kt, ist, fst, self._stream(stage, p), self.horizon, self._lo(current),
                self.max_events, self._evk, self._evb, self._scr,
            )
            vals.append(int(best))
            handles.append((start, stage, p, current))
        return vals, handles

    def entry(self, handle, level):
        """Replay a pilot up to its first state with importance >= ``level``."""
        start, stage, p, current = handle
        ist, fst = (a.copy() for a in start)
        self._E.k_run_until(
            self.kt, ist, fst, self._stream(stage, p), self.horizon, self._lo(current), level,
            True, self._acc, 0.0, 0.0, self._evk, self._evb, self._scr, self.max_events,
        )
        return ist, fst


def select_thresholds_es(model: ImportanceModel, pilots, N: int = 32, max_retries: int = 3) -> ThresholdScheme:
    """Expected Success: a value is a threshold when fewer than half the pilots reach it.

    The effort of a threshold is ``ceil(1/p)`` where ``p`` is the product of
    the observed success fractions since the previous threshold.
    """
    if N < 2:
        raise ValueError("Expected Success needs N >= 2 pilots")
    top = model.top_max
    if top <= 1:
        return ThresholdScheme(method="es")
    states = [pilots.initial()]
    current, stage, retries = 0, 0, 0
    acc = Fraction(1)
    levels, efforts = [], []
    ascended = False
    while current < top:
        res = pilots.ascend(states, current, N, stage)
        stage += 1
        ok = [(v, s) for v, s in res if v is not None]
        if not ok:
            retries += 1
            if retries > max_retries:
                break
            continue
        ascended, retries = True, 0
        nxt = min(v for v, _ in ok)
        K = len(ok)
        acc *= Fraction(K, N)
        if 2 * K < N:
            levels.append(nxt)
            efforts.append(math.ceil(1 / acc))
            acc = Fraction(1)
        states = [s for _, s in ok]
        current = nxt
    if not ascended:
        raise NoAscent("no pilot run left importance 0")
    return ThresholdScheme(tuple(levels), tuple(efforts), method="es")


def select_thresholds_seq(model: ImportanceModel, pilots, n: int = 8) -> ThresholdScheme:
    """Adaptive quantile: each threshold is the median of the pilots' maximum importance."""
    if n < 2:
        raise ValueError("sequential selection needs n >= 2 pilots")
    top = model.top_max
    if top <= 1:
        return ThresholdScheme(method="seq")
    states = [pilots.initial()]
    current, stage = 0, 0
    levels = []
    while current < top:
        maxima, handles = pilots.maxima(states, current, n, stage)
        stage += 1
        above = sorted(m for m in maxima if m > current)
        if not above:
            break
        med = sorted(maxima)[math.ceil(n / 2) - 1]
        thr = med if med > current else above[0]
        levels.append(thr)
        states = [pilots.entry(h, thr) for h, m in zip(handles, maxima) if m >= thr]
        current = thr
    if not levels:
        raise NoAscent("no pilot run left importance 0")
    return ThresholdScheme(tuple(levels), (n,) * len(levels), method="seq")
