"""Monte Carlo, RESTART and Fixed Effort estimation of unreliability and unavailability."""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from . import engine as E
from .importance import ImportanceModel, ThresholdScheme, build
from .rng import derive, root_key
from .tree import FaultTree

THREADS_ENV = "RAFT_RES_THREADS"


class DegenerateBatches(RuntimeError):
    """A batch of a steady-state run saw no events, so batch means are meaningless."""


@dataclass(frozen=True)
class Budget:
    """Stop at whichever limit is reached first.

    ``runs`` counts independent transient runs (or Fixed Effort passes);
    ``horizon`` is simulated time for steady-state runs.  Only count-based
    budgets give results independent of machine speed.
    """

    seconds: float | None = None
    runs: int | None = None
    horizon: float | None = None

    def __post_init__(self):
        if self.seconds is None and self.runs is None and self.horizon is None:
            raise ValueError("a budget needs seconds, runs or horizon")

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class Estimate:
    metric: str
    algorithm: str
    point: float
    ci_low: float
    ci_high: float
    confidence: float = 0.95
    samples: int = 0
    null_estimate: bool = False
    wall_time: float = 0.0
    scheme: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.ci_low + self.ci_high)

    def overlaps(self, other: "Estimate") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def __post_init__(self):
        for f in ("point", "ci_low", "ci_high", "confidence", "wall_time"):
            object.__setattr__(self, f, float(getattr(self, f)))
        object.__setattr__(self, "samples", int(self.samples))
        object.__setattr__(self, "null_estimate", bool(self.null_estimate))

    def to_dict(self) -> dict:
        return asdict(self)


# -- confidence intervals --------------------------------------------------


def wilson(k: int, n: int, confidence: float = 0.95):
    """Wilson score interval for ``k`` successes out of ``n``."""
    if n <= 0:
        raise ValueError("need at least one trial")
    if k == 0:
        return 0.0, 0.0
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = k / n
    den = 1 + z * z / n
    c = (p + z * z / (2 * n)) / den
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, c - h), min(1.0, c + h)


def t_interval(samples, confidence: float = 0.95, center: float | None = None):
    """Student-t interval for the mean of ``samples`` (clamped to [0, 1])."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("need at least one sample")
    m = float(x.mean()) if center is None else float(center)
    if not np.any(x):
        return 0.0, 0.0
    if np.all(x == x[0]) and center is None:
        return float(x[0]), float(x[0])
    if n == 1:
        return 0.0, 1.0
    h = stats.t.ppf(0.5 + confidence / 2, n - 1) * float(x.std(ddof=1)) / math.sqrt(n)
    return max(0.0, m - h), min(1.0, m + h)


def build_ci(samples, confidence: float = 0.95, mode: str = "t"):
    """``mode='bernoulli'`` uses Wilson on 0/1 samples, ``'t'`` the Student-t interval."""
    x = np.asarray(samples, dtype=float)
    if mode == "bernoulli":
        return wilson(int(x.sum()), x.size, confidence)
    if mode == "t":
        return t_interval(x, confidence)
    raise ValueError(f"unknown interval mode {mode!r}")


# -- helpers ---------------------------------------------------------------


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _prepare(tree: FaultTree, imodel: ImportanceModel | None):
    if imodel is None:
        imodel = build(tree)
    return imodel, E.compile_tree(tree, imodel)


def _run_chunks(kernel, budget: Budget, min_runs: int = 1):
    """Call ``kernel(first, count) -> values`` over consecutive run ids within the budget."""
    t0 = time.perf_counter()
    nthreads = _threads()
    out = []
    first = 0
    chunk = 64
    pool = ThreadPoolExecutor(nthreads) if nthreads > 1 else None
    try:
        while True:
            if budget.runs is not None and first >= budget.runs:
                break
            if budget.seconds is not None and first >= min_runs and time.perf_counter() - t0 >= budget.seconds:
                break
            sizes = []
            for _ in range(nthreads):
                c = chunk if budget.runs is None else min(chunk, budget.runs - first - sum(sizes))
                if c > 0:
                    sizes.append(c)
            starts = [first + sum(sizes[:i]) for i in range(len(sizes))]
            ts = time.perf_counter()
            if pool is None:
                parts = [kernel(s, c) for s, c in zip(starts, sizes)]
            else:
                parts = list(pool.map(kernel, starts, sizes))
            out.extend(parts)
            first += sum(sizes)
            dt = time.perf_counter() - ts
            if dt < 0.05:
                chunk *= 2
            elif dt > 0.4 and chunk > 1:
                chunk //= 2
    finally:
        if pool is not None:
            pool.shutdown()
    values = np.concatenate(out) if out else np.zeros(0)
    return values, time.perf_counter() - t0


def _metric_unrel(T) -> str:
    return f"UNREL({T:g})"


def _scheme_arrays(scheme: ThresholdScheme | None):
    if scheme is None or not len(scheme):
        z = np.zeros(0, dtype=np.int64)
        return z, z
    return np.array(scheme.levels, dtype=np.int64), np.array(scheme.efforts, dtype=np.int64)


def _transient(tree, T, scheme, budget, seed, rep, imodel, kt):
    levels, efforts = _scheme_arrays(scheme)
    key = root_key(seed, rep)
    stats_acc = []

    def kernel(first, count):
        w = np.zeros(count)
        st = np.zeros(3, dtype=np.int64)
        E.k_restart_transient(kt, key, first, count, float(T), levels, efforts, w, st)
        stats_acc.append(st)
        return w

    if T <= 0:
        return np.zeros(max(1, budget.runs or 1)), 0.0, np.zeros(3, dtype=np.int64)
    w, wall = _run_chunks(kernel, budget)
    st = np.sum(stats_acc, axis=0) if stats_acc else np.zeros(3, dtype=np.int64)
    return w, wall, st


# -- transient estimators --------------------------------------------------


def smc_unreliability(
    tree: FaultTree, T: float, budget: Budget, seed: int = 0, rep: int = 0,
    confidence: float = 0.95, imodel=None, kt=None,
) -> Estimate:
    """Fraction of independent runs that see the top event before ``T``; Wilson interval."""
    if kt is None:
        imodel, kt = _prepare(tree, imodel)
    w, wall, st = _transient(tree, T, None, budget, seed, rep, imodel, kt)
    n, k = w.size, int(w.sum())
    lo, hi = wilson(k, n, confidence)
    return Estimate(
        _metric_unrel(T), "smc", k / n, lo, hi, confidence, n, k == 0, wall,
        details={"hits": k, "events": int(st[2])},
    )


def restart_unreliability(
    tree: FaultTree, T: float, scheme: ThresholdScheme, budget: Budget, seed: int = 0, rep: int = 0,
    confidence: float = 0.95, imodel=None, kt=None,
) -> Estimate:
    """Independent RESTART runs; Student-t interval over per-run weighted hit totals."""
    if kt is None:
        imodel, kt = _prepare(tree, imodel)
    if not len(scheme):
        warnings.warn("empty threshold scheme: RESTART reduces to standard Monte Carlo", stacklevel=2)
    w, wall, st = _transient(tree, T, scheme, budget, seed, rep, imodel, kt)
    n = w.size
    point = float(w.mean())
    lo, hi = t_interval(w, confidence)
    lo, hi = min(lo, point), max(hi, point)
    return Estimate(
        _metric_unrel(T), "restart", point, lo, hi, confidence, n, point == 0.0, wall,
        scheme=scheme.to_dict(),
        details={"hits": int(st[0]), "clones": int(st[1]), "events": int(st[2])},
    )


def fe_pass(launch, initial, efforts):
    """One Fixed Effort pass.

    ``launch(region, state, j)`` runs trace ``j`` of ``region`` from ``state``
    and returns ``(reached_next_level, entry_state)``.  Launch states are
    taken round-robin from the previous region's entry states.  Returns the
    exact pass estimate and the per-region success fractions.
    """
    states = [initial]
    fracs = []
    for k, e in enumerate(efforts):
        nxt = []
        for j in range(e):
            ok, s = launch(k, states[j % len(states)], j)
            if ok:
                nxt.append(s)
        fracs.append(Fraction(len(nxt), e))
        if not nxt:
            return Fraction(0), fracs
        states = nxt
    p = Fraction(1)
    for f in fracs:
        p *= f
    return p, fracs


class _EngineLauncher:
    def __init__(self, kt, T, levels, key):
        self.kt = kt
        self.T = float(T)
        self.levels = levels
        self.key = key
        self.pass_key = key
        n = kt.n
        self.imp_top = int(kt.maxi[kt.top])
        self.evk = np.empty(2 * n + 2, dtype=np.int64)
        self.evb = np.empty(2 * n + 2, dtype=np.int64)
        self.scr = np.empty(kt.maxdeg + 1, dtype=np.int64)
        self.acc = np.zeros(2)
        self.events = 0
        self.meta = 7 * n + kt.nrbox

    def start_pass(self, p):
        self.pass_key = derive(self.key, p)

    def initial(self):
        L = E.Layout(self.kt.n, self.kt.nrbox)
        ist = np.zeros(L.isize, dtype=np.int64)
        fst = np.zeros(L.fsize)
        r = np.array([derive(self.pass_key, 0), 0], dtype=np.uint64)
        E.k_init(self.kt, ist, fst, r, self.scr)
        return ist, fst

    def __call__(self, k, state, j):
        ist, fst = state[0].copy(), state[1].copy()
        r = np.array([derive(derive(self.pass_key, k + 1), j), 0], dtype=np.uint64)
        M = len(self.levels)
        hi = self.levels[k] if k < M else self.imp_top + 1
        nev0 = ist[self.meta + 2]
        res = E.k_run_until(
            self.kt, ist, fst, r, self.T, -1, hi, True, self.acc, 0.0, 0.0,
            self.evk, self.evb, self.scr, E._BIG,
        )
        self.events += int(ist[self.meta + 2] - nev0)
        ok = res == E.OUT_HIT or (res == E.OUT_UP and k < M)
        return ok, (ist, fst)


def fixed_effort_unreliability(
    tree: FaultTree, T: float, scheme: ThresholdScheme, budget: Budget, seed: int = 0, rep: int = 0,
    effort_override: int | None = None, confidence: float = 0.95, imodel=None, kt=None,
) -> Estimate:
    """Repeated Fixed Effort passes; Student-t interval over per-pass estimates.

    Region ``k`` (from threshold ``k`` to ``k+1``) runs ``efforts[k]`` traces,
    the last region (to the top event) reuses the last effort; an override
    sets the same effort everywhere.
    """
    if kt is None:
        imodel, kt = _prepare(tree, imodel)
    M = len(scheme)
    if effort_override is not None:
        region_efforts = [int(effort_override)] * (M + 1)
    elif M:
        region_efforts = list(scheme.efforts) + [scheme.efforts[-1]]
    else:
        raise ValueError("Fixed Effort needs a non-empty threshold scheme or an effort override")
    launch = _EngineLauncher(kt, T, list(scheme.levels), root_key(seed, rep))
    t0 = time.perf_counter()
    ests = []
    p = 0
    while True:
        if budget.runs is not None and p >= budget.runs:
            break
        if budget.seconds is not None and p >= 1 and time.perf_counter() - t0 >= budget.seconds:
            break
        launch.start_pass(p)
        est, _ = fe_pass(launch, launch.initial(), region_efforts)
        ests.append(float(est))
        p += 1
    wall = time.perf_counter() - t0
    x = np.array(ests)
    point = float(x.mean())
    lo, hi = t_interval(x, confidence)
    lo, hi = min(lo, point), max(hi, point)
    sch = scheme.to_dict()
    sch["region_efforts"] = region_efforts
    return Estimate(
        _metric_unrel(T), "fe", point, lo, hi, confidence, x.size, point == 0.0, wall,
        scheme=sch, details={"nonzero_passes": int(np.count_nonzero(x)), "events": launch.events},
    )


# -- steady state ----------------------------------------------------------


class _SteadyRun:
    """A steady-state RESTART run (plain Monte Carlo with an empty scheme) advanced epoch by epoch."""

    def __init__(self, kt, scheme, key, warmup):
        self.kt = kt
        self.levels, self.efforts = _scheme_arrays(scheme)
        L = E.Layout(kt.n, kt.nrbox)
        self.T_i = np.zeros((1, L.isize), dtype=np.int64)
        self.T_f = np.zeros((1, L.fsize))
        self.T_r = np.array([[derive(key, 0), 0]], dtype=np.uint64)
        self.T_c = np.zeros(1, dtype=np.int64)
        self.T_l = np.zeros(1, dtype=np.int64)
        scr = np.empty(kt.maxdeg + 1, dtype=np.int64)
        E.k_init(kt, self.T_i[0], self.T_f[0], self.T_r[0], scr)
        self.nlive = 1
        self.stats = np.zeros(3, dtype=np.int64)
        self.t = 0.0
        self.warmup = float(warmup)

    def advance(self, t_end):
        acc = np.zeros(2)
        ev0 = int(self.stats[2])
        self.T_i, self.T_f, self.T_r, self.T_c, self.T_l, self.nlive = E.k_restart_steady(
            self.kt, self.T_i, self.T_f, self.T_r, self.T_c, self.T_l, self.nlive,
            float(t_end), self.warmup, self.levels, self.efforts, acc, self.stats,
        )
        self.t = t_end
        return float(acc[0]), float(acc[1]), int(self.stats[2]) - ev0

    def calibrate(self, steps=20_000):
        """Simulated time covered by ``steps`` event batches of the main trace (on a copy)."""
        ist = self.T_i[0].copy()
        fst = self.T_f[0].copy()
        r = np.array([derive(self.T_r[0, 0], 0x7E57), 0], dtype=np.uint64)
        n = self.kt.n
        t0 = fst[n]
        E.k_run_until(
            self.kt, ist, fst, r, math.inf, -1, E._BIG, False, np.zeros(2), 0.0, 0.0,
            np.empty(2 * n + 2, dtype=np.int64), np.empty(2 * n + 2, dtype=np.int64),
            np.empty(self.kt.maxdeg + 1, dtype=np.int64), steps,
        )
        return float(fst[n] - t0)


def _unavailability(tree, scheme, budget, seed, rep, warmup, batches, confidence, imodel, kt, algorithm):
    if batches < 2:
        raise ValueError("batch means need at least 2 batches")
    if budget.horizon is not None and budget.horizon <= warmup:
        raise ValueError("the horizon must exceed the warmup")
    if kt is None:
        imodel, kt = _prepare(tree, imodel)
    t0 = time.perf_counter()
    run = _SteadyRun(kt, scheme, root_key(seed, rep), warmup)
    run.advance(warmup)
    if budget.horizon is not None:
        n_ep = 4 * batches
        delta = (budget.horizon - warmup) / n_ep
    else:
        n_ep = None
        delta = run.calibrate()
        if not delta > 0 or not math.isfinite(delta):
            delta = max(warmup, 1.0)
    bins = []  # completed bins: [failed, total, events]
    cur = [0.0, 0.0, 0]
    cur_n = 0
    size = 1 if n_ep is None else 4
    ep = 0
    while True:
        if n_ep is not None and ep >= n_ep:
            break
        if budget.seconds is not None and ep >= batches and time.perf_counter() - t0 >= budget.seconds:
            break
        f, tt, ev = run.advance(warmup + (ep + 1) * delta)
        ep += 1
        cur[0] += f
        cur[1] += tt
        cur[2] += ev
        cur_n += 1
        if cur_n == size:
            bins.append(cur)
            cur, cur_n = [0.0, 0.0, 0], 0
            if n_ep is None and len(bins) == 2 * batches:
                bins = [[a[0] + b[0], a[1] + b[1], a[2] + b[2]] for a, b in zip(bins[::2], bins[1::2])]
                size *= 2
    wall = time.perf_counter() - t0
    failed = sum(b[0] for b in bins) + cur[0]
    total = sum(b[1] for b in bins) + cur[1]
    point = failed / total if total > 0 else 0.0
    sch = scheme.to_dict() if scheme is not None else {}
    details = {
        "horizon": run.t,
        "warmup": warmup,
        "epochs": ep,
        "events": int(run.stats[2]),
        "clones": int(run.stats[1]),
    }
    if failed == 0:
        return Estimate("UNAVAIL", algorithm, 0.0, 0.0, 0.0, confidence, len(bins), True, wall, sch, details)
    if any(b[2] == 0 for b in bins):
        raise DegenerateBatches("a batch saw no events; lengthen the horizon or use fewer batches")
    u = np.array([b[0] / b[1] for b in bins])
    lo, hi = t_interval(u, confidence, center=point)
    lo, hi = min(lo, point), max(hi, point)
    return Estimate("UNAVAIL", algorithm, point, lo, hi, confidence, len(bins), False, wall, sch, details)


def smc_unavailability(
    tree: FaultTree, budget: Budget, seed: int = 0, rep: int = 0, warmup: float = 1000.0,
    batches: int = 20, confidence: float = 0.95, imodel=None, kt=None,
) -> Estimate:
    """Failed-time fraction of one long run after ``warmup``; batch-means interval."""
    return _unavailability(tree, None, budget, seed, rep, warmup, batches, confidence, imodel, kt, "smc")


def restart_unavailability(
    tree: FaultTree, scheme: ThresholdScheme, budget: Budget, seed: int = 0, rep: int = 0,
    warmup: float = 1000.0, batches: int = 20, confidence: float = 0.95, imodel=None, kt=None,
) -> Estimate:
    """Weighted failed time over weighted total time of a RESTART run; batch-means interval."""
    return _unavailability(tree, scheme, budget, seed, rep, warmup, batches, confidence, imodel, kt, "restart")
