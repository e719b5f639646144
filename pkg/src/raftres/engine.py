"""Discrete-event simulation of a fault tree.

A trace is three flat arrays, so cloning is a plain copy:

* ``ist`` (int64): node states, outputs, clock kinds, spare ownership and
  assignment, repair queues, repair-box occupancy, node importances, and a
  few summary slots (see the ``_O*`` offsets in :class:`Layout`).
* ``fst`` (float64): absolute clock deadlines followed by the current time.
* ``rng`` (uint64[2]): the trace's random stream.

Clocks are stored as absolute deadlines; the remaining time of a clock is
``deadline - time``.  Clock kinds: ``0`` none, ``1`` failure of an active
element, ``2`` failure of a dormant spare, ``3`` repair.

Event handling, in order, for all clocks expiring at the same instant:

1. fire each expired clock in ascending node index;
2. settle spare gates: release spares whose primary came back (they return
   to dormancy with a fresh dormancy clock), drop assignments whose primary
   or active spare failed, then let every SPARE without a working input, in
   ascending index, claim its leftmost dormant operational spare (which
   activates with a fresh failure clock);
3. every idle repair box starts repairing its highest-priority failed element
   (the repair time is drawn now);
4. recompute outputs, PAND states and importance bottom-up.
"""

from __future__ import annotations

import csv
import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from numba import njit

from .distributions import encode, sample_code
from .rng import RngStream, derive, derive_key, next_u64
from .tree import FaultTree, NodeKind

KT = namedtuple(
    "KT",
    [
        "n",
        "nrbox",
        "top",
        "maxdeg",
        "kind",
        "cptr",
        "cidx",
        "votk",
        "topo",
        "fcode",
        "fpar",
        "rcode",
        "rpar",
        "dcode",
        "dpar",
        "rbox_of",
        "rbptr",
        "rbidx",
        "spares",
        "fac",
        "maxi",
    ],
)

_BE, _SBE, _AND, _OR, _VOT, _PAND, _SPARE, _RBOX = range(8)

# clock kinds
CK_NONE, CK_FAIL, CK_DORM, CK_REPAIR = 0, 1, 2, 3
# event kinds
EV_FAIL, EV_REPAIR, EV_ACTIVATE, EV_DORMANT_FAIL = 0, 1, 2, 3
EVENT_NAMES = ("fail", "repair", "activate", "dormant-fail")

# step return codes
STEP_TIMEOUT = 0
STEP_DEADLOCK = -1

# run_until outcomes
OUT_TIMEOUT, OUT_UP, OUT_DOWN, OUT_HIT, OUT_DEADLOCK = 0, 1, 2, 3, 4
OUTCOME_NAMES = ("time_out", "up", "down", "top_event", "deadlock")

_INF = math.inf
_BIG = np.int64(2**62)


@dataclass(frozen=True)
class Layout:
    n: int
    nrbox: int

    @property
    def X(self):
        return 0

    @property
    def Z(self):
        return self.n

    @property
    def CK(self):
        return 2 * self.n

    @property
    def OWN(self):
        return 3 * self.n

    @property
    def USE(self):
        return 4 * self.n

    @property
    def WAIT(self):
        return 5 * self.n

    @property
    def BUSY(self):
        return 6 * self.n

    @property
    def IMP(self):
        return 6 * self.n + self.nrbox

    @property
    def META(self):
        return 7 * self.n + self.nrbox

    @property
    def isize(self):
        return 7 * self.n + self.nrbox + 4

    @property
    def fsize(self):
        return self.n + 1


# META slots: top output, top importance, events fired, deadlock flag
_M_TOPZ, _M_IMP, _M_NEV, _M_DEAD = 0, 1, 2, 3


def compile_tree(tree: FaultTree, imodel=None) -> KT:
    """Flatten a tree (and its importance model) into kernel arrays."""
    if imodel is None:
        from .importance import build

        imodel = build(tree)
    n = len(tree)
    kind = np.array([int(nd.kind) for nd in tree.nodes], dtype=np.int64)
    cptr = np.zeros(n + 1, dtype=np.int64)
    for i, nd in enumerate(tree.nodes):
        cptr[i + 1] = cptr[i] + (0 if nd.kind is NodeKind.RBOX else len(nd.children))
    cidx = np.array(
        [c for nd in tree.nodes if nd.kind is not NodeKind.RBOX for c in nd.children], dtype=np.int64
    )
    fac = np.array(
        [f for nd, fs in zip(tree.nodes, imodel.factors) if nd.kind is not NodeKind.RBOX for f in fs],
        dtype=np.int64,
    )
    votk = np.array([nd.k for nd in tree.nodes], dtype=np.int64)
    topo = np.array(tree.topo_order, dtype=np.int64)

    def pdf_arrays(attr):
        code = np.full(n, 8, dtype=np.int64)
        par = np.zeros((n, 2))
        for i, nd in enumerate(tree.nodes):
            pdf = getattr(nd, attr)
            if pdf is not None:
                c, p0, p1 = encode(pdf)
                code[i], par[i, 0], par[i, 1] = c, p0, p1
        return code, par

    fcode, fpar = pdf_arrays("fail")
    rcode, rpar = pdf_arrays("repair")
    dcode, dpar = pdf_arrays("dorm")
    rboxes = tree.rboxes
    rbox_of = np.full(n, -1, dtype=np.int64)
    rbptr = np.zeros(len(rboxes) + 1, dtype=np.int64)
    rbidx = []
    for j, r in enumerate(rboxes):
        for b in tree.nodes[r].children:
            rbox_of[b] = j
            rbidx.append(b)
        rbptr[j + 1] = len(rbidx)
    degs = [len(nd.children) for nd in tree.nodes if nd.kind is not NodeKind.RBOX]
    maxi = np.array(imodel.max_i, dtype=np.int64)
    return KT(
        n,
        len(rboxes),
        tree.top,
        max(degs + [1]),
        kind,
        cptr,
        cidx if cidx.size else np.zeros(0, dtype=np.int64),
        votk,
        topo,
        fcode,
        fpar,
        rcode,
        rpar,
        dcode,
        dpar,
        rbox_of,
        rbptr,
        np.array(rbidx, dtype=np.int64),
        np.array(tree.spares, dtype=np.int64),
        fac if fac.size else np.zeros(0, dtype=np.int64),
        maxi,
    )


# -- kernels ---------------------------------------------------------------


@njit(cache=True, nogil=True)
def _settle(kt, ist, scr):
    n = kt.n
    Z = n
    USE = 4 * n
    IMP = 6 * n + kt.nrbox
    META = 7 * n + kt.nrbox
    for j in range(kt.topo.shape[0]):
        v = kt.topo[j]
        k = kt.kind[v]
        a = kt.cptr[v]
        b = kt.cptr[v + 1]
        if k <= _SBE:
            zv = ist[v] % 2
            iv = zv
        elif k == _AND:
            zv = 1
            iv = 0
            for e in range(a, b):
                c = kt.cidx[e]
                zv &= ist[Z + c]
                iv += kt.fac[e] * ist[IMP + c]
        elif k == _OR:
            zv = 0
            iv = 0
            for e in range(a, b):
                c = kt.cidx[e]
                zv |= ist[Z + c]
                s = kt.fac[e] * ist[IMP + c]
                if s > iv:
                    iv = s
        elif k == _VOT:
            cnt = 0
            m = b - a
            for e in range(a, b):
                c = kt.cidx[e]
                cnt += ist[Z + c]
                scr[e - a] = kt.fac[e] * ist[IMP + c]
            zv = 1 if cnt >= kt.votk[v] else 0
            iv = 0
            for r in range(kt.votk[v]):
                best = r
                for q in range(r + 1, m):
                    if scr[q] > scr[best]:
                        best = q
                tmp = scr[r]
                scr[r] = scr[best]
                scr[best] = tmp
                iv += scr[r]
        elif k == _SPARE:
            p = kt.cidx[a]
            u = ist[USE + v]
            if ist[Z + p] == 0:
                zv = 0
            elif u < 0:
                zv = 1
            else:
                zv = ist[Z + u]
            iv = 0
            for e in range(a, b):
                iv += kt.fac[e] * ist[IMP + kt.cidx[e]]
            if zv == 1:
                iv = kt.maxi[v]
        else:  # PAND
            l = kt.cidx[a]
            r = kt.cidx[a + 1]
            zl = ist[Z + l]
            zr = ist[Z + r]
            old = ist[v]
            if zl == 1 and zr == 1:
                xv = 3 if (old == 2 or old == 3) else 4
            elif zl == 1:
                xv = 1
            elif zr == 1:
                xv = 2
            else:
                xv = 0
            ist[v] = xv
            zv = 1 if xv == 4 else 0
            sl = kt.fac[a] * ist[IMP + l]
            sr = kt.fac[a + 1] * ist[IMP + r]
            if xv == 1 or xv == 4:
                iv = sl + sr
            else:
                iv = sl - sr
            if zv == 1:
                iv = kt.maxi[v]
            elif iv < 0:
                iv = 0
        ist[Z + v] = zv
        ist[IMP + v] = iv
    ist[META + _M_TOPZ] = ist[Z + kt.top]
    ist[META + _M_IMP] = ist[IMP + kt.top]


@njit(cache=True, nogil=True)
def _start_repairs(kt, ist, fst, rng, t):
    n = kt.n
    CK = 2 * n
    WAIT = 5 * n
    BUSY = 6 * n
    for r in range(kt.nrbox):
        if ist[BUSY + r] >= 0:
            continue
        for e in range(kt.rbptr[r], kt.rbptr[r + 1]):
            b = kt.rbidx[e]
            if ist[WAIT + b] == 1:
                ist[WAIT + b] = 0
                ist[BUSY + r] = b
                ist[CK + b] = CK_REPAIR
                fst[b] = t + sample_code(kt.rcode[b], kt.rpar[b, 0], kt.rpar[b, 1], rng)
                break


@njit(cache=True, nogil=True)
def _settle_spares(kt, ist, fst, rng, t, evk, evb, nev):
    n = kt.n
    CK = 2 * n
    OWN = 3 * n
    USE = 4 * n
    for j in range(kt.spares.shape[0]):
        s = kt.spares[j]
        p = kt.cidx[kt.cptr[s]]
        u = ist[USE + s]
        if ist[p] == 0:
            if u != p:
                if u >= 0:
                    ist[OWN + u] = -1
                    if ist[u] == 0:
                        ist[u] = 2
                        ist[CK + u] = CK_DORM
                        fst[u] = t + sample_code(kt.dcode[u], kt.dpar[u, 0], kt.dpar[u, 1], rng)
                ist[USE + s] = p
        else:
            if u == p:
                ist[USE + s] = -1
            elif u >= 0 and ist[u] == 1:
                ist[OWN + u] = -1
                ist[USE + s] = -1
    for j in range(kt.spares.shape[0]):
        s = kt.spares[j]
        if ist[USE + s] != -1:
            continue
        for e in range(kt.cptr[s] + 1, kt.cptr[s + 1]):
            c = kt.cidx[e]
            if ist[c] == 2:
                ist[c] = 0
                ist[OWN + c] = s
                ist[USE + s] = c
                ist[CK + c] = CK_FAIL
                fst[c] = t + sample_code(kt.fcode[c], kt.fpar[c, 0], kt.fpar[c, 1], rng)
                evk[nev] = EV_ACTIVATE
                evb[nev] = c
                nev += 1
                break
    return nev


@njit(cache=True, nogil=True)
def k_init(kt, ist, fst, rng, scr):
    n = kt.n
    CK = 2 * n
    OWN = 3 * n
    USE = 4 * n
    BUSY = 6 * n
    ist[:] = 0
    fst[:] = _INF
    fst[n] = 0.0
    for b in range(n):
        ist[OWN + b] = -1
        ist[USE + b] = -1
        k = kt.kind[b]
        if k == _BE:
            ist[CK + b] = CK_FAIL
            fst[b] = sample_code(kt.fcode[b], kt.fpar[b, 0], kt.fpar[b, 1], rng)
        elif k == _SBE:
            ist[b] = 2
            ist[CK + b] = CK_DORM
            fst[b] = sample_code(kt.dcode[b], kt.dpar[b, 0], kt.dpar[b, 1], rng)
    for j in range(kt.spares.shape[0]):
        s = kt.spares[j]
        ist[USE + s] = kt.cidx[kt.cptr[s]]
    for r in range(kt.nrbox):
        ist[BUSY + r] = -1
    _settle(kt, ist, scr)


@njit(cache=True, nogil=True)
def k_step(kt, ist, fst, rng, horizon, evk, evb, scr):
    """Fire the next batch of simultaneous clock expirations.

    Returns the number of recorded events, ``0`` if the next expiration lies
    beyond ``horizon`` (time is advanced to ``horizon``), or ``-1`` if no
    clock is pending (time is advanced to ``horizon``).
    """
    n = kt.n
    CK = 2 * n
    WAIT = 5 * n
    BUSY = 6 * n
    META = 7 * n + kt.nrbox
    tmin = _INF
    for b in range(n):
        if ist[CK + b] != CK_NONE and fst[b] < tmin:
            tmin = fst[b]
    if tmin == _INF:
        if horizon > fst[n]:
            fst[n] = horizon
        ist[META + _M_DEAD] = 1
        return STEP_DEADLOCK
    if tmin > horizon:
        fst[n] = horizon
        return STEP_TIMEOUT
    fst[n] = tmin
    t = tmin
    nev = 0
    for b in range(n):
        ck = ist[CK + b]
        if ck == CK_NONE or fst[b] != tmin:
            continue
        r = kt.rbox_of[b]
        if ck == CK_FAIL or ck == CK_DORM:
            ist[b] = 1 if ck == CK_FAIL else 3
            ist[CK + b] = CK_NONE
            fst[b] = _INF
            if r >= 0:
                ist[WAIT + b] = 1
            evk[nev] = EV_FAIL if ck == CK_FAIL else EV_DORMANT_FAIL
        else:
            ist[BUSY + r] = -1
            if kt.kind[b] == _BE:
                ist[b] = 0
                ist[CK + b] = CK_FAIL
                fst[b] = t + sample_code(kt.fcode[b], kt.fpar[b, 0], kt.fpar[b, 1], rng)
            else:
                ist[b] = 2
                ist[CK + b] = CK_DORM
                fst[b] = t + sample_code(kt.dcode[b], kt.dpar[b, 0], kt.dpar[b, 1], rng)
            evk[nev] = EV_REPAIR
        evb[nev] = b
        nev += 1
    nev = _settle_spares(kt, ist, fst, rng, t, evk, evb, nev)
    _start_repairs(kt, ist, fst, rng, t)
    _settle(kt, ist, scr)
    ist[META + _M_NEV] += 1
    return nev


@njit(cache=True, nogil=True)
def k_run_until(kt, ist, fst, rng, horizon, lo, hi, stop_on_hit, acc, weight, warm, evk, evb, scr, max_ev):
    """Advance until importance >= hi, importance < lo, top failure, ``horizon``
    or ``max_ev`` event batches.

    While running, ``weight * dt`` is added to ``acc[1]`` and, when the top
    event holds, to ``acc[0]``, for time after ``warm``.
    """
    n = kt.n
    META = 7 * n + kt.nrbox
    if stop_on_hit and ist[META + _M_TOPZ] == 1:
        return OUT_HIT
    if ist[META + _M_IMP] >= hi:
        return OUT_UP
    if ist[META + _M_IMP] < lo:
        return OUT_DOWN
    steps = 0
    while True:
        if steps >= max_ev:
            return OUT_TIMEOUT
        steps += 1
        t0 = fst[n]
        z0 = ist[META + _M_TOPZ]
        res = k_step(kt, ist, fst, rng, horizon, evk, evb, scr)
        if weight != 0.0:
            t1 = fst[n]
            a = t0 if t0 > warm else warm
            if t1 > a:
                acc[1] += weight * (t1 - a)
                if z0 == 1:
                    acc[0] += weight * (t1 - a)
        if res == STEP_TIMEOUT:
            return OUT_TIMEOUT
        if res == STEP_DEADLOCK:
            return OUT_DEADLOCK
        if stop_on_hit and ist[META + _M_TOPZ] == 1:
            return OUT_HIT
        imp = ist[META + _M_IMP]
        if imp >= hi:
            return OUT_UP
        if imp < lo:
            return OUT_DOWN


@njit(cache=True, nogil=True)
def k_run_max(kt, ist, fst, rng, horizon, lo, max_ev, evk, evb, scr):
    """Run until the top event, importance < lo, ``horizon`` or ``max_ev``
    batches; return the highest importance seen."""
    n = kt.n
    META = 7 * n + kt.nrbox
    best = ist[META + _M_IMP]
    steps = 0
    while ist[META + _M_TOPZ] == 0 and ist[META + _M_IMP] >= lo and steps < max_ev:
        res = k_step(kt, ist, fst, rng, horizon, evk, evb, scr)
        steps += 1
        if res <= 0:
            break
        if ist[META + _M_IMP] > best:
            best = ist[META + _M_IMP]
    return best


@njit(cache=True, nogil=True)
def _region(levels, imp):
    """Number of thresholds at or below ``imp`` (0 = below the first)."""
    k = 0
    while k < levels.shape[0] and levels[k] <= imp:
        k += 1
    return k


@njit(cache=True, nogil=True)
def _cap(old, need):
    cap = max(2 * old, 16)
    while cap < need:
        cap *= 2
    return cap


@njit(cache=True, nogil=True)
def _grow1(a, need):
    if need <= a.shape[0]:
        return a
    out = np.empty(_cap(a.shape[0], need), dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True, nogil=True)
def _grow2(a, need):
    if need <= a.shape[0]:
        return a
    out = np.empty((_cap(a.shape[0], need), a.shape[1]), dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True, nogil=True)
def _bound(levels, k, imp_top):
    """(lo, hi) importance bounds of region ``k``."""
    lo = levels[k - 1] if k > 0 else -1
    hi = levels[k] if k < levels.shape[0] else imp_top + 1
    return lo, hi


@njit(cache=True, nogil=True)
def k_restart_transient(kt, key0, first, count, horizon, levels, efforts, out_w, out_stats):
    """Independent transient RESTART runs ``first .. first+count-1``.

    ``out_w[i]`` gets run ``i``'s weighted number of sp-event hits. With no
    levels this is plain Monte Carlo.  ``out_stats`` accumulates
    (hits, clones, events).
    """
    n = kt.n
    isz = 7 * n + kt.nrbox + 4
    M = levels.shape[0]
    wprod = np.ones(M + 1)
    for i in range(M):
        wprod[i + 1] = wprod[i] / efforts[i]
    imp_top = kt.maxi[kt.top]
    cap = 16
    S_i = np.empty((cap, isz), dtype=np.int64)
    S_f = np.empty((cap, n + 1))
    S_r = np.empty((cap, 2), dtype=np.uint64)
    S_c = np.empty(cap, dtype=np.int64)
    S_l = np.empty(cap, dtype=np.int64)
    evk = np.empty(2 * n + 2, dtype=np.int64)
    evb = np.empty(2 * n + 2, dtype=np.int64)
    scr = np.empty(kt.maxdeg + 1, dtype=np.int64)
    acc = np.zeros(2)
    rng = np.zeros(2, dtype=np.uint64)
    for i in range(count):
        rng[0] = derive_key(key0, first + i)
        rng[1] = 0
        k_init(kt, S_i[0], S_f[0], rng, scr)
        S_r[0, 0] = rng[0]
        S_r[0, 1] = rng[1]
        S_c[0] = 0
        S_l[0] = 0
        sp = 1
        total = 0.0
        while sp > 0:
            sp -= 1
            ist = S_i[sp].copy()
            fst = S_f[sp].copy()
            rng[0] = S_r[sp, 0]
            rng[1] = S_r[sp, 1]
            crea = S_c[sp]
            lev = S_l[sp]
            while True:
                lo, hi = _bound(levels, lev, imp_top)
                res = k_run_until(kt, ist, fst, rng, horizon, lo, hi, True, acc, 0.0, 0.0, evk, evb, scr, _BIG)
                if res == OUT_HIT:
                    total += wprod[lev]
                    out_stats[0] += 1
                    break
                if res == OUT_TIMEOUT or res == OUT_DEADLOCK:
                    break
                if res == OUT_DOWN:
                    nl = _region(levels, ist[7 * n + kt.nrbox + _M_IMP])
                    if nl < crea:
                        break
                    lev = nl
                    continue
                # up-crossing of threshold lev+1: split into efforts[lev] copies
                lev += 1
                e = efforts[lev - 1]
                if e > 1:
                    need = sp + e - 1
                    if need > S_i.shape[0]:
                        S_i = _grow2(S_i, need)
                        S_f = _grow2(S_f, need)
                        S_r = _grow2(S_r, need)
                        S_c = _grow1(S_c, need)
                        S_l = _grow1(S_l, need)
                    seed = next_u64(rng)
                    for q in range(e - 1):
                        S_i[sp] = ist
                        S_f[sp] = fst
                        S_r[sp, 0] = derive_key(seed, q)
                        S_r[sp, 1] = 0
                        S_c[sp] = lev
                        S_l[sp] = lev
                        sp += 1
                    out_stats[1] += e - 1
            out_stats[2] += ist[7 * n + kt.nrbox + _M_NEV]
        out_w[i] = total


@njit(cache=True, nogil=True)
def k_restart_steady(kt, T_i, T_f, T_r, T_c, T_l, nlive, t_end, warm, levels, efforts, acc, out_stats):
    """Advance every live trace to ``t_end``, splitting and truncating as it goes.

    Live traces (state, stream, creation level, current level) come in the
    ``T_*`` arrays.  Returns the new arrays and live count; weighted failed
    and total time after ``warm`` accumulate into ``acc``.
    """
    n = kt.n
    META = 7 * n + kt.nrbox
    M = levels.shape[0]
    wprod = np.ones(M + 1)
    for i in range(M):
        wprod[i + 1] = wprod[i] / efforts[i]
    imp_top = kt.maxi[kt.top]
    evk = np.empty(2 * n + 2, dtype=np.int64)
    evb = np.empty(2 * n + 2, dtype=np.int64)
    scr = np.empty(kt.maxdeg + 1, dtype=np.int64)
    rng = np.zeros(2, dtype=np.uint64)
    # pending stack: traces not yet advanced to t_end
    cap = max(16, nlive)
    S_i = np.empty((cap, T_i.shape[1]), dtype=np.int64)
    S_f = np.empty((cap, T_f.shape[1]))
    S_r = np.empty((cap, 2), dtype=np.uint64)
    S_c = np.empty(cap, dtype=np.int64)
    S_l = np.empty(cap, dtype=np.int64)
    sp = 0
    for j in range(nlive - 1, -1, -1):
        S_i[sp] = T_i[j]
        S_f[sp] = T_f[j]
        S_r[sp] = T_r[j]
        S_c[sp] = T_c[j]
        S_l[sp] = T_l[j]
        sp += 1
    O_i = np.empty((max(16, nlive), T_i.shape[1]), dtype=np.int64)
    O_f = np.empty((O_i.shape[0], T_f.shape[1]))
    O_r = np.empty((O_i.shape[0], 2), dtype=np.uint64)
    O_c = np.empty(O_i.shape[0], dtype=np.int64)
    O_l = np.empty(O_i.shape[0], dtype=np.int64)
    nout = 0
    while sp > 0:
        sp -= 1
        ist = S_i[sp].copy()
        fst = S_f[sp].copy()
        rng[0] = S_r[sp, 0]
        rng[1] = S_r[sp, 1]
        crea = S_c[sp]
        lev = S_l[sp]
        nev0 = ist[META + _M_NEV]
        alive = True
        while True:
            lo, hi = _bound(levels, lev, imp_top)
            res = k_run_until(kt, ist, fst, rng, t_end, lo, hi, False, acc, wprod[lev], warm, evk, evb, scr, _BIG)
            if res == OUT_TIMEOUT or res == OUT_DEADLOCK:
                break
            if res == OUT_DOWN:
                nl = _region(levels, ist[META + _M_IMP])
                if nl < crea:
                    alive = False
                    break
                lev = nl
                continue
            lev += 1
            e = efforts[lev - 1]
            if e > 1:
                need = sp + e - 1
                if need > S_i.shape[0]:
                    S_i = _grow2(S_i, need)
                    S_f = _grow2(S_f, need)
                    S_r = _grow2(S_r, need)
                    S_c = _grow1(S_c, need)
                    S_l = _grow1(S_l, need)
                seed = next_u64(rng)
                for q in range(e - 1):
                    S_i[sp] = ist
                    S_f[sp] = fst
                    S_r[sp, 0] = derive_key(seed, q)
                    S_r[sp, 1] = 0
                    S_c[sp] = lev
                    S_l[sp] = lev
                    sp += 1
                out_stats[1] += e - 1
        out_stats[2] += ist[META + _M_NEV] - nev0
        if alive:
            if nout >= O_i.shape[0]:
                O_i = _grow2(O_i, nout + 1)
                O_f = _grow2(O_f, nout + 1)
                O_r = _grow2(O_r, nout + 1)
                O_c = _grow1(O_c, nout + 1)
                O_l = _grow1(O_l, nout + 1)
            O_i[nout] = ist
            O_f[nout] = fst
            O_r[nout, 0] = rng[0]
            O_r[nout, 1] = rng[1]
            O_c[nout] = crea
            O_l[nout] = lev
            nout += 1
    return O_i, O_f, O_r, O_c, O_l, nout


# -- Python controller ------------------------------------------------------


@dataclass(frozen=True)
class Event:
    kind: str
    element: str
    index: int
    time: float


@dataclass(frozen=True)
class TransientResult:
    hit: bool
    at: float
    deadlock: bool = False


@dataclass(frozen=True)
class Outcome:
    kind: str  # up | down | top_event | time_out | deadlock
    level: int
    importance: int
    time: float


@dataclass(frozen=True)
class SimState:
    """Readable snapshot of a trace."""

    time: float
    x: tuple
    z: tuple
    spare_use: dict
    clocks: dict  # element -> (clock kind, remaining time)
    under_repair: dict  # RBOX name -> element name or None
    waiting: tuple
    importance: int


class Deadlock(RuntimeError):
    pass


class TraceController:
    """A single simulation trace with observer access and cloning."""

    def __init__(self, tree: FaultTree, rng, imodel=None, kt: KT | None = None, log=None, _state=None):
        self.tree = tree
        if kt is None:
            if imodel is None:
                from .importance import build

                imodel = build(tree)
            kt = compile_tree(tree, imodel)
        self.imodel = imodel
        self.kt = kt
        self.layout = Layout(kt.n, kt.nrbox)
        self._evk = np.empty(2 * kt.n + 2, dtype=np.int64)
        self._evb = np.empty(2 * kt.n + 2, dtype=np.int64)
        self._scr = np.empty(kt.maxdeg + 1, dtype=np.int64)
        self._acc = np.zeros(2)
        self.log = log
        if isinstance(rng, (int, np.integer)):
            rng = RngStream.from_seed(int(rng))
        self.rng = rng
        if _state is None:
            self.ist = np.zeros(self.layout.isize, dtype=np.int64)
            self.fst = np.zeros(self.layout.fsize)
            k_init(kt, self.ist, self.fst, self.rng.state, self._scr)
            if self.log is not None:
                self.log.record(self, ())
        else:
            self.ist, self.fst = _state

    # observers
    @property
    def time(self) -> float:
        return float(self.fst[-1])

    @property
    def importance(self) -> int:
        return int(self.ist[self.layout.META + _M_IMP])

    @property
    def top(self) -> int:
        return int(self.ist[self.layout.META + _M_TOPZ])

    @property
    def x(self) -> tuple:
        return tuple(int(v) for v in self.ist[: self.layout.n])

    def state_vector(self) -> tuple:
        """Node states in declaration order, skipping repair boxes."""
        return tuple(int(self.ist[i]) for i, nd in enumerate(self.tree.nodes) if nd.kind is not NodeKind.RBOX)

    @property
    def z(self) -> tuple:
        L = self.layout
        return tuple(int(v) for v in self.ist[L.Z : L.Z + L.n])

    def output(self, name_or_index) -> int:
        v = self.tree.index(name_or_index) if isinstance(name_or_index, str) else name_or_index
        return int(self.ist[self.layout.Z + v])

    def node_importance(self, name_or_index) -> int:
        v = self.tree.index(name_or_index) if isinstance(name_or_index, str) else name_or_index
        return int(self.ist[self.layout.IMP + v])

    def snapshot(self) -> SimState:
        L, nodes, t = self.layout, self.tree.nodes, self.time
        ck_names = {CK_FAIL: "fail", CK_DORM: "dorm", CK_REPAIR: "repair"}
        clocks = {}
        for b in self.tree.basic:
            ck = int(self.ist[L.CK + b])
            if ck != CK_NONE:
                clocks[nodes[b].name] = (ck_names[ck], float(self.fst[b]) - t)
        use = {}
        for s in self.tree.spares:
            u = int(self.ist[L.USE + s])
            use[nodes[s].name] = nodes[u].name if u >= 0 else None
        busy = {}
        for j, r in enumerate(self.tree.rboxes):
            b = int(self.ist[L.BUSY + j])
            busy[nodes[r].name] = nodes[b].name if b >= 0 else None
        waiting = tuple(nodes[b].name for b in self.tree.basic if self.ist[L.WAIT + b])
        return SimState(t, self.x, self.z, use, clocks, busy, waiting, self.importance)

    # dynamics
    def step(self, horizon: float = math.inf) -> tuple:
        """Fire the next batch of simultaneous events.

        Raises :class:`Deadlock` if no clock is pending and ``horizon`` is
        infinite; returns ``()`` when the next event lies beyond ``horizon``.
        """
        if math.isinf(horizon) and not self._pending():
            raise Deadlock("no pending clock: every element is failed without repair or never fails")
        nev = k_step(self.kt, self.ist, self.fst, self.rng.state, float(horizon), self._evk, self._evb, self._scr)
        if nev <= 0:
            return ()
        t = self.time
        evs = tuple(
            Event(EVENT_NAMES[int(self._evk[i])], self.tree.nodes[int(self._evb[i])].name, int(self._evb[i]), t)
            for i in range(nev)
        )
        if self.log is not None:
            self.log.record(self, evs)
        return evs

    def _pending(self) -> bool:
        L = self.layout
        ck = self.ist[L.CK : L.CK + L.n]
        return bool(np.any((ck != CK_NONE) & np.isfinite(self.fst[: L.n])))

    def run_transient(self, T: float) -> TransientResult:
        if self.top:
            return TransientResult(True, self.time)
        if self.log is not None:
            while True:
                if not self._pending():
                    return TransientResult(False, self.time, deadlock=True)
                evs = self.step(T)
                if not evs:
                    return TransientResult(False, self.time)
                if self.top:
                    return TransientResult(True, self.time)
        res = k_run_until(
            self.kt, self.ist, self.fst, self.rng.state, float(T), -1, _BIG, True,
            self._acc, 0.0, 0.0, self._evk, self._evb, self._scr, _BIG,
        )
        if res == OUT_HIT:
            return TransientResult(True, self.time)
        return TransientResult(False, self.time, deadlock=res == OUT_DEADLOCK)

    def run_until_threshold(self, level: int, levels, T: float = math.inf) -> Outcome:
        """Run from region ``level`` of ``levels`` (increasing importance thresholds)."""
        lv = np.asarray(levels, dtype=np.int64)
        if lv.size and np.any(np.diff(lv) <= 0):
            raise ValueError("threshold levels must be strictly increasing")
        lo, hi = _bound(lv, int(level), int(self.kt.maxi[self.kt.top]))
        res = k_run_until(
            self.kt, self.ist, self.fst, self.rng.state, float(T), lo, hi, True,
            self._acc, 0.0, 0.0, self._evk, self._evb, self._scr, _BIG,
        )
        imp = self.importance
        return Outcome(OUTCOME_NAMES[res], int(_region(lv, imp)), imp, self.time)

    def clone(self, rng: RngStream | None = None) -> "TraceController":
        """Independent copy of this trace; draws a fresh stream unless one is given."""
        if rng is None:
            rng = RngStream(derive(next_u64(self.rng.state), 0))
        return TraceController(
            self.tree, rng, self.imodel, self.kt, None, (self.ist.copy(), self.fst.copy())
        )


class TraceLog:
    """CSV log of a trace: time, event kind, element, importance, top output."""

    FIELDS = ("time", "event", "element", "importance", "top")

    def __init__(self, fh):
        self._w = csv.writer(fh)
        self._w.writerow(self.FIELDS)

    def record(self, tc: TraceController, events):
        if not events:
            self._w.writerow((repr(tc.time), "init", "", tc.importance, tc.top))
        for e in events:
            self._w.writerow((repr(e.time), e.kind, e.element, tc.importance, tc.top))
