"""Acceptance suite: one PASS/FAIL line per criterion.

Criteria 4 and 5 need long wall-clock budgets and only run when
``RAFT_RES_ACCEPTANCE`` is set: ``full`` runs criterion 4 (about 40 minutes),
``headline`` runs criteria 4 and 5 (about a day).
"""

import itertools
import math
import os
import random
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from raftres import casestudies, distributions as D, format_galileo, load, lower, parse
from raftres.engine import Deadlock, TraceController
from raftres.estimators import (
    Budget,
    fe_pass,
    fixed_effort_unreliability,
    restart_unavailability,
    restart_unreliability,
    smc_unavailability,
    smc_unreliability,
)
from raftres.galileo import Declaration
from raftres.importance import EnginePilots, NoAscent, build, select_thresholds_seq
from raftres.model import initial_state
from test_importance import _random_static, _random_tree, _state_of
from trees import single_be, two_be

LEVEL = os.environ.get("RAFT_RES_ACCEPTANCE", "")


@pytest.fixture
def line(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
            print(f"\ncriterion {n}: {status}: {detail}", flush=True)

    return emit


# -- 1: analytic oracles -------------------------------------------------------


def test_criterion_1_analytic_oracles(line):
    n = 100_000
    rows = []
    lam, T = 0.4, 1.5
    rows.append(("single BE", load(single_be(lam)), T, 1 - math.exp(-lam * T)))
    l1, l2 = 0.3, 0.6
    rows.append(("OR", load(two_be("or", l1, l2)), T, 1 - math.exp(-(l1 + l2) * T)))
    rows.append(("AND", load(two_be("and", l1, l2)), T, (1 - math.exp(-l1 * T)) * (1 - math.exp(-l2 * T))))
    results = []
    for name, tree, T_, p in rows:
        est = smc_unreliability(tree, T_, Budget(runs=n), seed=101)
        se = math.sqrt(p * (1 - p) / est.samples)
        results.append((name, est.point, p, abs(est.point - p) <= 3 * se and est.samples >= n))
    lam, mu = 1.0, 10.0
    est = smc_unavailability(load(single_be(lam, repair=mu)), Budget(horizon=300_000.0), seed=102, warmup=10.0)
    p = lam / (lam + mu)
    se = (est.ci_high - est.ci_low) / 2 / stats.t.ppf(0.975, est.samples - 1)
    results.append(("repairable BE", est.point, p, abs(est.point - p) <= 3 * se))
    ok = all(r[3] for r in results)
    line(1, ok, "; ".join(f"{a} {b:.5f} vs {c:.5f}" for a, b, c, _ in results))
    assert ok


# -- 2: Fixed Effort replay ----------------------------------------------------


def test_criterion_2_fixed_effort_replay(line):
    succ = [2, 3, 2]
    p, _ = fe_pass(lambda k, s, j: (j < succ[k], s), None, [5, 5, 5])
    ok = p == Fraction(12, 125) and float(p) == 9.6e-2
    line(2, ok, f"pass estimate {p} = {float(p)!r}")
    assert ok


# -- 3: importance invariants -------------------------------------------------


def test_criterion_3_importance_invariants(line):
    rng = random.Random(31337)
    max_viol = mono_viol = vot_viol = 0
    n_trees = 1000
    for i in range(n_trees):
        tree = load(_random_tree(rng))
        m = build(tree)
        tc = TraceController(tree, 10_000 + i, imodel=m)
        for _ in range(40):
            try:
                tc.step()
            except Deadlock:
                break
            imp = m.evaluate_all(_state_of(tc))
            z = tc.z
            max_viol += sum(1 for v in tree.topo_order if z[v] == 1 and imp[v] != m.max_i[v])
    for _ in range(40):
        n = rng.randint(2, 12)
        tree = load(_random_static(rng, n))
        m = build(tree)
        vals = {}
        for bits in itertools.product((0, 1), repeat=n):
            st = initial_state(tree)
            for b, bit in zip(tree.basic, bits):
                st.x[b] = bit
            vals[bits] = m.evaluate(st)
        for bits, v in vals.items():
            for j, bit in enumerate(bits):
                if not bit and vals[bits[:j] + (1,) + bits[j + 1:]] < v:
                    mono_viol += 1
    for mm in range(1, 9):
        for k in range(1, mm + 1):
            for _ in range(20):
                xs = [rng.randint(0, 20) for _ in range(mm)]
                if sum(sorted(xs, reverse=True)[:k]) != max(map(sum, itertools.combinations(xs, k))):
                    vot_viol += 1
    ok = max_viol == mono_viol == vot_viol == 0
    line(3, ok, f"{n_trees} random trees; violations: maximality {max_viol}, monotonicity {mono_viol}, vot {vot_viol}")
    assert ok


# -- 4: desk-scale reproduction ------------------------------------------------

C4_ROWS = [
    ("HECS-1", "UNAVAIL", 60),
    ("RC-3", "UNAVAIL", 600),
    ("VOT-2", "UNAVAIL", 600),
    ("DSPARE-3", "UNREL", 600),
    ("FTPP-4", "UNREL", 300),
]


def _estimate_row(name, metric, seconds, seed=0):
    tree = load(casestudies.generate(name))
    m = build(tree)
    horizon = None if metric == "UNAVAIL" else 1000.0
    try:
        sch = select_thresholds_seq(m, EnginePilots(tree, m, horizon, seed), n=8)
    except NoAscent:
        sch = None
    budget = Budget(seconds=seconds)
    if metric == "UNAVAIL":
        if sch is None:
            return smc_unavailability(tree, budget, seed=seed, imodel=m)
        return restart_unavailability(tree, sch, budget, seed=seed, imodel=m)
    if sch is None:
        return smc_unreliability(tree, 1000.0, budget, seed=seed, imodel=m)
    return restart_unreliability(tree, 1000.0, sch, budget, seed=seed, imodel=m)


@pytest.mark.skipif(LEVEL not in ("full", "headline"), reason="set RAFT_RES_ACCEPTANCE=full")
@pytest.mark.parametrize("name, metric, seconds", C4_ROWS, ids=[r[0] for r in C4_ROWS])
def test_criterion_4_reference_rows(line, name, metric, seconds):
    ref = casestudies.reference(name, metric)
    est = _estimate_row(name, metric, seconds)
    mid = est.midpoint
    ratio = mid / ref if mid > 0 else math.inf
    ok = est.ci_high > 0 and 1 / 1.5 <= ratio <= 1.5
    line(4, ok, f"{name} {metric}: CI [{est.ci_low:.3g}, {est.ci_high:.3g}] midpoint {mid:.3g} vs {ref:.3g} "
                f"(ratio {ratio:.3g}, {seconds}s)")
    assert ok


def test_criterion_4_status(line):
    if LEVEL not in ("full", "headline"):
        line(4, "NOT RUN", "needs about 40 minutes; set RAFT_RES_ACCEPTANCE=full")
        pytest.skip("criterion 4 needs RAFT_RES_ACCEPTANCE=full")


# -- 5: efficiency on RC-5 and rarest rows -------------------------------------


@pytest.mark.skipif(LEVEL != "headline", reason="set RAFT_RES_ACCEPTANCE=headline")
def test_criterion_5_efficiency(line):
    tree = load(casestudies.generate("RC-5"))
    m = build(tree)
    sch = select_thresholds_seq(m, EnginePilots(tree, m, None, 0), n=8)
    rs = [restart_unavailability(tree, sch, Budget(seconds=1800), seed=0, rep=r, imodel=m) for r in range(10)]
    sm = [smc_unavailability(tree, Budget(seconds=1800), seed=0, rep=r, imodel=m) for r in range(10)]
    rs_ok = sum(not e.null_estimate for e in rs)
    sm_null = sum(e.null_estimate for e in sm)
    both = [(a, b) for a, b in zip(rs, sm) if not a.null_estimate and not b.null_estimate]
    narrower = not both or np.mean([a.width for a, _ in both]) < np.mean([b.width for _, b in both])
    ref = casestudies.reference("HECS-5", "UNAVAIL")
    tree5 = load(casestudies.generate("HECS-5"))
    m5 = build(tree5)
    sch5 = select_thresholds_seq(m5, EnginePilots(tree5, m5, None, 0), n=8)
    hecs = [restart_unavailability(tree5, sch5, Budget(seconds=3600), seed=0, rep=r, imodel=m5) for r in range(10)]
    order = sum(1 for e in hecs if not e.null_estimate and ref / 10 <= e.point <= ref * 10)
    ok = rs_ok >= 7 and sm_null >= 5 and narrower and order >= 5
    line(5, ok, f"RC-5 restart non-null {rs_ok}/10, smc null {sm_null}/10, restart narrower {narrower}; "
                f"HECS-5 right order {order}/10")
    assert ok


def test_criterion_5_status(line):
    if LEVEL != "headline":
        line(5, "NOT RUN", "needs about a day of wall-clock time; set RAFT_RES_ACCEPTANCE=headline")
        pytest.skip("criterion 5 needs RAFT_RES_ACCEPTANCE=headline")


# -- 6: estimator equivalence --------------------------------------------------


def test_criterion_6_estimators_overlap(line):
    T = 1000.0
    details = []
    ok = True
    for name in ("RC-3", "DSPARE-3"):
        tree = load(casestudies.generate(name))
        m = build(tree)
        sch = select_thresholds_seq(m, EnginePilots(tree, m, T, 6), n=8)
        fe_sch = sch.as_semantics("fixed-effort")
        good = 0
        for r in range(10):
            a = smc_unreliability(tree, T, Budget(runs=10_000), seed=6, rep=r, imodel=m)
            b = restart_unreliability(tree, T, sch, Budget(runs=5000), seed=7, rep=r, imodel=m)
            c = fixed_effort_unreliability(tree, T, fe_sch, Budget(runs=500), seed=8, rep=r, imodel=m)
            good += a.overlaps(b) and a.overlaps(c) and b.overlaps(c)
        details.append(f"{name} {good}/10")
        ok &= good >= 8
    line(6, ok, "mutually overlapping CIs: " + ", ".join(details))
    assert ok


# -- 7: parser goldens ---------------------------------------------------------

LISTING_1 = """toplevel "Gate2";
"Gate2" wsp "BE_C" "BE_D";
"BE_C" EXT_failPDF=rayleigh(6.0E-2);
"BE_D" lambda=1.11E-3 EXT_dormPDF=erlang(3,9);
"""

LISTING_2 = """toplevel "Gate3";
"Gate3" and "BE_E" "BE_F" "BE_G";
"BE_E" lambda=6.0E-5 EXT_repairPDF=uniform(8,24);
"BE_F" lambda=7.0E-5 EXT_repairPDF=uniform(8,24);
"BE_G" lambda=6.0E-5 EXT_repairPDF=uniform(8,12);
"RB1" repairbox_priority "BE_E" "BE_F" "BE_G";
"""


def test_criterion_7_parser_goldens(line):
    a1, a2 = parse(LISTING_1), parse(LISTING_2)
    golden = (
        a1.toplevel == "Gate2"
        and a1["Gate2"] == Declaration("Gate2", "wsp", ("BE_C", "BE_D"))
        and a1["BE_C"].attributes == {"EXT_failPDF": D.rayleigh(0.06)}
        and a1["BE_D"].attributes == {"lambda": 1.11e-3, "EXT_dormPDF": D.erlang(3, 9)}
        and a2["Gate3"] == Declaration("Gate3", "and", ("BE_E", "BE_F", "BE_G"))
        and a2["RB1"] == Declaration("RB1", "repairbox_priority", ("BE_E", "BE_F", "BE_G"))
        and a2["BE_G"].attributes == {"lambda": 6.0e-5, "EXT_repairPDF": D.uniform(8, 12)}
    )
    cases = [(f, p) for f, (lo, hi) in casestudies.RANGES.items() for p in range(lo, hi + 1)]
    trips = 0
    for f, p in cases:
        ast = parse(casestudies.generate(f, p))
        again = parse(format_galileo(ast))
        trips += again == ast and len(lower(again)) == len(lower(ast))
    ok = golden and trips == len(cases)
    line(7, ok, f"listings {'match' if golden else 'differ'}; round trips {trips}/{len(cases)}")
    assert ok
