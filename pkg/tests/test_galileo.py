import itertools
import random

import pytest

from raftres import casestudies
from raftres import distributions as D
from raftres.galileo import (
    Declaration,
    DuplicateName,
    GalileoSyntaxError,
    UnknownReference,
    format_galileo,
    load,
    lower,
    parse,
)
from raftres.model import boolean_top
from raftres.tree import NodeKind, ValidationError

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


def test_listing_1_ast():
    ast = parse(LISTING_1)
    assert ast.toplevel == "Gate2"
    assert [d.name for d in ast] == ["Gate2", "BE_C", "BE_D"]
    assert ast["Gate2"] == Declaration("Gate2", "wsp", ("BE_C", "BE_D"))
    assert ast["BE_C"].attributes == {"EXT_failPDF": D.rayleigh(0.06)}
    assert ast["BE_D"].attributes == {"lambda": 1.11e-3, "EXT_dormPDF": D.erlang(3, 9)}


def test_listing_1_lowered_pdfs():
    tree = load(LISTING_1)
    c, d = tree.nodes[tree.index("BE_C")], tree.nodes[tree.index("BE_D")]
    assert c.kind is NodeKind.BE and c.fail == D.rayleigh(0.06) and c.repair is None
    assert d.kind is NodeKind.SBE and d.fail == D.exponential(1.11e-3) and d.dorm == D.erlang(3, 9)
    assert tree.nodes[tree.top].kind is NodeKind.SPARE


def test_listing_2_ast():
    ast = parse(LISTING_2)
    assert ast["Gate3"] == Declaration("Gate3", "and", ("BE_E", "BE_F", "BE_G"))
    assert ast["RB1"] == Declaration("RB1", "repairbox_priority", ("BE_E", "BE_F", "BE_G"))
    assert ast["BE_G"].attributes["EXT_repairPDF"] == D.uniform(8, 12)


def test_listing_2_lowered_tree():
    tree = load(LISTING_2)
    assert len(tree) == 5
    assert tree.summary() == {"AND": 1, "BE": 3, "RBOX": 1}
    assert tree.nodes[tree.top].name == "Gate3"
    rb = tree.nodes[tree.index("RB1")]
    assert [tree.nodes[c].name for c in rb.children] == ["BE_E", "BE_F", "BE_G"]


@pytest.mark.parametrize("text", ["", "// only a comment\n", '"A" lambda=1;'])
def test_missing_toplevel_is_a_syntax_error(text):
    with pytest.raises(GalileoSyntaxError):
        parse(text)


def test_syntax_error_position():
    with pytest.raises(GalileoSyntaxError) as exc:
        parse('toplevel "A";\n"A" xor "B" "C";\n')
    assert exc.value.line == 2


def test_unknown_keyword_rejected():
    with pytest.raises(GalileoSyntaxError):
        parse('toplevel "A";\n"A" lambda=1 colour=2;\n')


def test_duplicate_and_unknown_names():
    with pytest.raises(DuplicateName):
        parse('toplevel "A";\n"A" lambda=1;\n"A" lambda=2;\n')
    with pytest.raises(UnknownReference):
        parse('toplevel "A";\n"A" and "B" "C";\n"B" lambda=1;\n')


def test_comments_and_aliases():
    tree = load('toplevel "A"; // top\n"A" EXT_failPDF=exp(2.0) EXT_repairPDF=uni(1,2);\n"R" repairbox_priority "A";\n')
    a = tree.nodes[tree.index("A")]
    assert a.fail == D.exponential(2.0) and a.repair == D.uniform(1, 2)


def test_spare_sugar():
    text = """toplevel "S";
"S" csp "P" "C";
"P" lambda=1;
"C" lambda=1;
"""
    tree = load(text)
    assert tree.nodes[tree.index("C")].dorm == D.NEVER
    tree = load(text.replace("csp", "hsp"))
    assert tree.nodes[tree.index("C")].dorm == D.exponential(1)
    tree = load(text.replace("csp", "wsp").replace('"C" lambda=1;', '"C" lambda=1 dorm=0.5;'))
    assert tree.nodes[tree.index("C")].dorm == D.exponential(0.5)
    with pytest.raises(ValidationError):
        load(text.replace("csp", "wsp"))


def test_pand_lowered_to_binary_chain():
    tree = load('toplevel "P";\n"P" pand "A" "B" "C";\n"A" lambda=1;\n"B" lambda=1;\n"C" lambda=1;\n')
    top = tree.nodes[tree.top]
    assert top.kind is NodeKind.PAND and len(top.children) == 2
    inner = tree.nodes[top.children[0]]
    assert inner.kind is NodeKind.PAND
    assert [tree.nodes[c].name for c in inner.children] == ["A", "B"]
    assert tree.nodes[top.children[1]].name == "C"


@pytest.mark.parametrize(
    "text, condition",
    [
        ('toplevel "V";\n"V" 4of3 "A" "B" "C";\n"A" lambda=1;\n"B" lambda=1;\n"C" lambda=1;\n', "vot-arity"),
        ('toplevel "G";\n"G" and "A";\n"A" lambda=1;\n"R" repairbox_priority "A";\n', "rbox-repair"),
        ('toplevel "G";\n"G" and "A" "H";\n"H" or "A";\n"A" lambda=1 EXT_repairPDF=exp(1);\n'
         '"R" repairbox_priority "H";\n', "rbox-input"),
        ('toplevel "G";\n"G" and "S1" "S2";\n"S1" csp "P" "C";\n"S2" csp "P" "D";\n'
         '"P" lambda=1;\n"C" lambda=1;\n"D" lambda=1;\n', "spare-sharing"),
        ('toplevel "G";\n"G" and "S1" "S2";\n"S1" wsp "P1" "C";\n"S2" wsp "P2" "C";\n"F" fdep "T" "C";\n'
         '"P1" lambda=1;\n"P2" lambda=1;\n"T" lambda=1;\n"C" lambda=1 dorm=0.5;\n', "spare-fdep"),
        ('toplevel "G";\n"G" and "H" "A";\n"H" or "G" "A";\n"A" lambda=1;\n', "cycle"),
    ],
)
def test_validation_conditions(text, condition):
    with pytest.raises(ValidationError) as exc:
        load(text)
    assert exc.value.condition == condition


def test_shared_sbe_without_fdep_is_allowed():
    text = """toplevel "G";
"G" and "S1" "S2";
"S1" wsp "P1" "C";
"S2" wsp "P2" "C";
"P1" lambda=1;
"P2" lambda=1;
"C" lambda=1 dorm=0.5;
"""
    tree = load(text)
    assert tree.spares_of[tree.index("C")] == (tree.index("S1"), tree.index("S2"))


def _truth_table(tree, names):
    idx = [tree.index(n) for n in names]
    return [boolean_top(tree, [b for b, bit in zip(idx, bits) if bit]) for bits in itertools.product((0, 1), repeat=len(idx))]


def test_fdep_rewrite_example():
    with_fdep = load('toplevel "G";\n"G" and "B" "C";\n"F" fdep "T" "B";\n"B" lambda=1;\n"C" lambda=1;\n"T" lambda=1;\n')
    manual = load('toplevel "G";\n"G" and "X" "C";\n"X" or "B" "T";\n"B" lambda=1;\n"C" lambda=1;\n"T" lambda=1;\n')
    g = with_fdep.nodes[with_fdep.top]
    assert with_fdep.nodes[g.children[0]].kind is NodeKind.OR
    names = ["B", "C", "T"]
    assert _truth_table(with_fdep, names) == _truth_table(manual, names)
    # the dependent keeps its own state: only its consumers see the OR
    assert boolean_top(with_fdep, [with_fdep.index("T"), with_fdep.index("C")]) == 1


def _random_static(rng, n_basic, with_fdep):
    names = [f"b{i}" for i in range(n_basic)]
    lines, pool, g = [], list(names), 0
    while len(pool) > 1:
        k = rng.randint(2, min(4, len(pool)))
        kids = rng.sample(pool, k)
        for c in kids:
            pool.remove(c)
        kind = rng.choice(["and", "or", f"{rng.randint(1, k)}of{k}"])
        name = f"g{g}"
        g += 1
        lines.append(f'"{name}" {kind} ' + " ".join(f'"{c}"' for c in kids) + ";")
        pool.append(name)
    top = pool[0]
    fdeps = []
    if with_fdep:
        for j in range(rng.randint(1, 3)):
            trig = rng.choice(names)
            others = [n for n in names if n != trig]
            deps = rng.sample(others, rng.randint(1, min(2, len(others))))
            fdeps.append((trig, deps))
            lines.append(f'"F{j}" fdep "{trig}" ' + " ".join(f'"{d}"' for d in deps) + ";")
    lines += [f'"{n}" lambda=1;' for n in names]
    return f'toplevel "{top}";\n' + "\n".join(lines) + "\n", fdeps


def _closure(failed, fdeps):
    out = set(failed)
    changed = True
    while changed:
        changed = False
        for trig, deps in fdeps:
            if trig in out:
                for d in deps:
                    if d not in out:
                        out.add(d)
                        changed = True
    return out


def test_fdep_rewrite_preserves_boolean_function():
    rng = random.Random(4)
    for _ in range(60):
        n = rng.randint(2, 9)
        text, fdeps = _random_static(rng, n, True)
        lowered = load(text)
        plain_text = "\n".join(l for l in text.splitlines() if " fdep " not in l) + "\n"
        plain = load(plain_text)
        names = [f"b{i}" for i in range(n)]
        for bits in itertools.product((0, 1), repeat=n):
            failed = {nm for nm, b in zip(names, bits) if b}
            got = boolean_top(lowered, [lowered.index(x) for x in failed])
            want = boolean_top(plain, [plain.index(x) for x in _closure(failed, fdeps)])
            assert got == want, (text, failed)


def test_round_trip_fixpoint_on_listings():
    for text in (LISTING_1, LISTING_2):
        ast = parse(text)
        printed = format_galileo(ast)
        assert parse(printed) == ast
        assert format_galileo(parse(printed)) == printed


@pytest.mark.parametrize("family, param", [(f, p) for f, (lo, hi) in casestudies.RANGES.items() for p in range(lo, hi + 1)])
def test_round_trip_case_studies(family, param):
    ast = parse(casestudies.generate(family, param))
    printed = format_galileo(ast)
    assert parse(printed) == ast
    assert len(lower(parse(printed))) == len(lower(ast))


def test_multi_digit_voting_arity():
    kids = [f"b{i}" for i in range(12)]
    text = 'toplevel "V";\n"V" 11of12 ' + " ".join(f'"{k}"' for k in kids) + ";\n" + "".join(f'"{k}" lambda=1;\n' for k in kids)
    tree = load(text)
    assert tree.nodes[tree.top].k == 11 and len(tree.nodes[tree.top].children) == 12
