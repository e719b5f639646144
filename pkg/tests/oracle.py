"""Slow pure-Python reference simulator, written independently of the kernels.

It uses numpy's Generator for sampling and the model module for outputs, so
statistical agreement with the compiled engine is a meaningful check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from raftres.distributions import Family
from raftres.model import initial_state, settle
from raftres.tree import NodeKind


def draw(pdf, g: np.random.Generator) -> float:
    f, p = pdf.family, pdf.params
    if f is Family.DIRAC:
        return p[0]
    if f is Family.EXPONENTIAL:
        return g.exponential(1.0 / p[0])
    if f is Family.ERLANG:
        return g.gamma(int(p[0]), 1.0 / p[1])
    if f is Family.UNIFORM:
        return g.uniform(p[0], p[1])
    if f is Family.RAYLEIGH:
        return g.rayleigh(p[0])
    if f is Family.WEIBULL:
        return g.weibull(p[0]) / p[1]
    if f is Family.NORMAL:
        while True:
            x = g.normal(p[0], p[1])
            if x > 0:
                return x
    if f is Family.LOGNORMAL:
        return g.lognormal(p[0], p[1])
    return math.inf


def scipy_dist(pdf):
    """Frozen scipy distribution with the same law (None for Dirac/never)."""
    f, p = pdf.family, pdf.params
    if f is Family.EXPONENTIAL:
        return stats.expon(scale=1 / p[0])
    if f is Family.ERLANG:
        return stats.gamma(int(p[0]), scale=1 / p[1])
    if f is Family.UNIFORM:
        return stats.uniform(p[0], p[1] - p[0])
    if f is Family.RAYLEIGH:
        return stats.rayleigh(scale=p[0])
    if f is Family.WEIBULL:
        return stats.weibull_min(p[0], scale=1 / p[1])
    if f is Family.NORMAL:
        return stats.truncnorm(-p[0] / p[1], np.inf, loc=p[0], scale=p[1])
    if f is Family.LOGNORMAL:
        return stats.lognorm(p[1], scale=math.exp(p[0]))
    return None


class OracleSim:
    """Event-by-event simulation with a dict of absolute deadlines."""

    def __init__(self, tree, g: np.random.Generator):
        self.tree = tree
        self.g = g
        self.state = initial_state(tree)
        self.t = 0.0
        self.clock = {}  # basic index -> (kind, deadline)
        self.waiting = set()
        self.busy = {r: None for r in tree.rboxes}
        nodes = tree.nodes
        for b in tree.basic:
            if nodes[b].kind is NodeKind.BE:
                self.clock[b] = ("fail", draw(nodes[b].fail, g))
            else:
                self.clock[b] = ("dorm", draw(nodes[b].dorm, g))
        self.z = settle(tree, self.state)

    def _rbox(self, b):
        for r in self.tree.rboxes:
            if b in self.tree.nodes[r].children:
                return r
        return None

    def step(self, horizon=math.inf) -> bool:
        live = {b: d for b, (k, d) in self.clock.items() if math.isfinite(d)}
        if not live:
            self.t = horizon
            return False
        t = min(live.values())
        if t > horizon:
            self.t = horizon
            return False
        self.t = t
        nodes, x = self.tree.nodes, self.state.x
        for b in sorted(b for b, d in live.items() if d == t):
            kind, _ = self.clock.pop(b)
            if kind == "fail":
                x[b] = 1
            elif kind == "dorm":
                x[b] = 3
            else:
                r = self._rbox(b)
                self.busy[r] = None
                if nodes[b].kind is NodeKind.BE:
                    x[b] = 0
                    self.clock[b] = ("fail", t + draw(nodes[b].fail, self.g))
                else:
                    x[b] = 2
                    self.clock[b] = ("dorm", t + draw(nodes[b].dorm, self.g))
                continue
            if self._rbox(b) is not None:
                self.waiting.add(b)
        self._spares(t)
        for r in self.tree.rboxes:
            if self.busy[r] is None:
                for b in nodes[r].children:
                    if b in self.waiting:
                        self.waiting.discard(b)
                        self.busy[r] = b
                        self.clock[b] = ("repair", t + draw(nodes[b].repair, self.g))
                        break
        self.z = settle(self.tree, self.state)
        return True

    def _spares(self, t):
        nodes, x, use = self.tree.nodes, self.state.x, self.state.spares.use
        for s in self.tree.spares:
            p = nodes[s].children[0]
            u = use[s]
            if x[p] == 0:
                if u != p:
                    if u >= 0 and x[u] == 0:
                        x[u] = 2
                        self.clock[u] = ("dorm", t + draw(nodes[u].dorm, self.g))
                    use[s] = p
            elif u == p or (u >= 0 and x[u] == 1):
                use[s] = -1
        for s in self.tree.spares:
            if use[s] != -1:
                continue
            for c in nodes[s].children[1:]:
                if x[c] == 2:
                    x[c] = 0
                    use[s] = c
                    self.clock[c] = ("fail", t + draw(nodes[c].fail, self.g))
                    break

    @property
    def top(self) -> int:
        return self.z[self.tree.top]

    def run_transient(self, T) -> bool:
        while not self.top:
            if not self.step(T):
                return False
        return True

    def failed_fraction(self, warmup, horizon) -> float:
        failed = 0.0
        while self.t < horizon:
            top, t0 = self.top, self.t
            self.step(horizon)
            lo = max(t0, warmup)
            if self.t > lo and top:
                failed += self.t - lo
        return failed / (horizon - warmup)
