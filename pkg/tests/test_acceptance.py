"""Acceptance criteria for the checker, one test per criterion.

Each test prints a PASS line on success so a `-s` run reads as a checklist;
timing budgets are asserted where the criterion states one.
"""

import time

import pytest

from minihal import grammar as G
from minihal import load_program, render_procedure, verify_procedure
from minihal.frontend import expand_equivalences
from minihal.oracle import enumerate_lang, run_property_suite
from minihal.parser import parse_inst_string, parse_program, parse_type_string
from minihal.scheduler import Checker, snode_lits
from minihal.tigrammar import TiContext, ti_name

import genprograms
from helpers import assert_alpha_eq, check_corpus, check_source, corpus, rendered


def report(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


GOLDEN = {
    "goal54.hal": {
        "g54_mode1":
            "g54_mode1(X, Y) :- U2 := [], X =: [U1|U3], Y := [U1|U2].",
    },
    "dupl.hal": {
        "dupl_mode1":
            "dupl_mode1(S0, S) :- fail.\n"
            "dupl_mode1(S0, S) :- pop_mode2(S0, A, S1), push_mode1(S0, A, S).",
    },
    "length.hal": {
        "length_mode1":
            "length_mode1(L, N) :- L := [], N == 0.\n"
            "length_mode1(L, N) :- +_outinin(N1, 1, N), N > 0, "
            "length_mode1(L1, N1), init(X), L := [X|L1].",
        "length_mode2":
            "length_mode2(L, N) :- L == [], N := 0.\n"
            "length_mode2(L, N) :- L =: [X|L1], length_mode2(L1, N1), "
            "+_ininout(N1, 1, N), N > 0.",
    },
    "pairlist.hal": {
        "pairlist_mode1":
            "pairlist_mode1(L, N) :- N == 0, L := [].\n"
            "pairlist_mode1(L, N) :- N > 0, +_outinin(N1, 1, N), "
            "pairlist_mode1(L2, N1), init(V), L1 := [V|L2], L := [V|L1].",
    },
}


def test_golden_reorderings():
    t0 = time.time()
    for name, expected in GOLDEN.items():
        result, _ = check_corpus(name)
        assert result.ok, f"{name}: {[d.render() for d in result.diagnostics]}"
        got = rendered(result)
        for proc_name, want in expected.items():
            assert_alpha_eq(got[proc_name], want)
    elapsed = time.time() - t0
    assert elapsed < 1.0, f"golden suite took {elapsed:.2f}s (budget 1s)"
    report(f"golden reorderings ({elapsed * 1000:.0f} ms)")


def test_golden_rejections_and_warnings():
    lc, _ = check_corpus("lcint.hal")
    errs = [d for d in lc.diagnostics if d.is_error]
    assert len(errs) == 1 and errs[0].code == "E002"
    assert "L" in errs[0].message and "ground" in errs[0].message

    nc, _ = check_corpus("noncheck.hal")
    errs = [d for d in nc.diagnostics if d.is_error]
    assert len(errs) == 1 and errs[0].code == "E001"
    assert "r(L1)" in errs[0].message

    ap, _ = check_corpus("append_oo.hal")
    assert ap.ok
    warns = [d for d in ap.diagnostics if d.code == "W001"]
    assert len(warns) == 1
    report("golden rejections and warnings")


def _fidelity_ctx():
    defs = """
:- typedef abc -> a ; b ; c.
:- typedef habc -> (a ; b ; c) deriving solver.
:- typedef hlist(T) -> ([] ; [T|hlist(T)]) deriving solver.
:- typedef list(T) -> ([] ; [T|list(T)]).
:- typedef sign -> (neg ; zero ; pos).
:- instdef elist -> [].
:- instdef list(I) -> ([]; [I|list(I)]).
:- instdef nelist(I) -> [I|list(I)].
:- pred noop(int).
:- mode noop(in) is det.
noop(X) :- X = 0.
"""
    p = expand_equivalences(parse_program(defs))
    return TiContext(p.typedefs, p.instdefs)


def test_grammar_construction_fidelity():
    ctx = _fidelity_ctx()
    nil = G.f_ctor("[]", 0)
    cons = G.f_ctor(".", 2)

    def leaf(n):
        return G.f_ctor(n, 0)

    cases = []

    # rt(list(habc), nelist(old)): non-empty, fixed-length lists whose
    # elements may be unbound
    root, inner, el = ("x",), ("y",), ("e",)

    def g(root_nt, triples):
        return G.make_grammar(("ty", root_nt[0]),
                              [(("ty", a[0]), c, tuple(("ty", x[0])
                                                       for x in ch))
                               for a, c, ch in triples])

    exp_nelist_old = g(root, [
        (root, cons, (el, inner)),
        (inner, nil, ()),
        (inner, cons, (el, inner)),
        (el, leaf("a"), ()), (el, leaf("b"), ()), (el, leaf("c"), ()),
        (el, G.VAR, ()),
    ])
    cases.append(("rt(list(habc),nelist(old))",
                  ctx.rt(parse_type_string("list(habc)"),
                         parse_inst_string("nelist(old)")),
                  exp_nelist_old))

    exp_nelist_ground_t = g(root, [
        (root, cons, (el, inner)),
        (inner, nil, ()),
        (inner, cons, (el, inner)),
        (el, G.gparam("T"), ()),
    ])
    cases.append(("rt(list(T),nelist(ground))",
                  ctx.rt(parse_type_string("list(T)"),
                         parse_inst_string("nelist(ground)")),
                  exp_nelist_ground_t))

    # base(hlist(abc), old): open-ended lists of fixed elements
    exp_olabc1 = g(root, [
        (root, nil, ()),
        (root, cons, (el, root)),
        (root, G.VAR, ()),
        (el, leaf("a"), ()), (el, leaf("b"), ()), (el, leaf("c"), ()),
    ])
    cases.append(("base(hlist(abc),old)",
                  ctx.base(parse_type_string("hlist(abc)"), "old"),
                  exp_olabc1))

    # base(list(habc), old): fixed-length lists of possibly-unbound elements
    exp_olabc2 = g(root, [
        (root, nil, ()),
        (root, cons, (el, root)),
        (el, leaf("a"), ()), (el, leaf("b"), ()), (el, leaf("c"), ()),
        (el, G.VAR, ()),
    ])
    cases.append(("base(list(habc),old)",
                  ctx.base(parse_type_string("list(habc)"), "old"),
                  exp_olabc2))

    # the closure grammar of mult(pos): two remaining (in, out) arguments
    sg, nw = ("s",), G.NEW_NT
    exp_h1 = G.make_grammar(("ty", "h"), [
        (("ty", "h"), G.ipred_ctor(2),
         (("ty", "s"), ("ty", "s"), nw, ("ty", "s"))),
        (("ty", "s"), leaf("neg"), ()),
        (("ty", "s"), leaf("zero"), ()),
        (("ty", "s"), leaf("pos"), ()),
    ])
    cases.append(("rt(pred(sign,sign),pred(in,out))",
                  ctx.rt(parse_type_string("pred(sign, sign)"),
                         parse_inst_string(
                             "pred(ground -> ground, new -> ground)")),
                  exp_h1))

    for label, got, want in cases:
        assert got.kind == "rules", label
        assert enumerate_lang(got, 4) == enumerate_lang(want, 4), label
    report(f"grammar construction fidelity ({len(cases)} grammars)")


def test_oracle_property_suite():
    t0 = time.time()
    res = run_property_suite(samples=1000, depth=4, seed=20240501)
    elapsed = time.time() - t0
    assert res.samples >= 1000
    assert res.failures == [], res.failures[:5]
    assert elapsed < 30.0, f"oracle suite took {elapsed:.1f}s (budget 30s)"
    report(f"oracle property suite ({res.checks} checks, {elapsed:.1f} s)")


def test_higher_order_lattice():
    result, _ = check_corpus("ho12.hal")
    assert result.ok
    proc = next(p for p in result.procedures if p.pred == "driver")
    joined = proc.final_state["HO"]
    ctor, children = joined.root_ipred()
    assert ctor == G.ipred_ctor(2)
    call_elems = sorted(
        c[1] for c in G.subg(children[0], joined).root_prods())
    succ_elems = sorted(
        c[1] for c in G.subg(children[1], joined).root_prods())
    assert call_elems == ["a", "b"]
    assert succ_elems == ["a", "b", "c"]
    assert children[2] == G.NEW_NT
    report("higher-order lattice (calls {a,b}, successes {a,b,c})")


def test_polymorphic_recovery_pipeline():
    result, _ = check_corpus("hopush.hal")
    assert result.ok, [d.render() for d in result.diagnostics]
    proc = next(p for p in result.procedures if p.pred == "hopush")
    map_call = next(l for l in snode_lits(proc.body)
                    if l.kind == "call" and l.pred == "map")
    closure = map_call.entry[map_call.args[0]]
    assert closure.root_ipred() is not None
    report("polymorphic recovery (ipred reaches the map call)")


def test_throughput_on_corpus_and_generated_programs():
    sources = [corpus(n) for n in (
        "stack.hal", "dupl.hal", "goal54.hal", "length.hal", "pairlist.hal",
        "append_oo.hal", "lcint.hal", "noncheck.hal", "ho12.hal",
        "hopush.hal")]
    sources += genprograms.generate_corpus(count=50, max_literals=200)
    t0 = time.time()
    checked = 0
    for src in sources:
        program = load_program(src)
        Checker(program).check_program()
        checked += 1
    elapsed = time.time() - t0
    assert checked == 60
    assert elapsed < 10.0, f"corpus check took {elapsed:.1f}s (budget 10s)"
    report(f"throughput ({checked} programs in {elapsed:.1f} s)")


def test_every_emitted_procedure_rechecks():
    total = 0
    for name in ("stack.hal", "dupl.hal", "goal54.hal", "length.hal",
                 "pairlist.hal", "append_oo.hal", "ho12.hal", "hopush.hal"):
        result, checker = check_corpus(name)
        for proc in result.procedures:
            verify_procedure(proc, checker)
            total += 1
    for src in genprograms.generate_corpus(count=10, max_literals=60):
        result, checker = check_source(src)
        for proc in result.procedures:
            verify_procedure(proc, checker)
            total += 1
    assert total > 20
    report(f"self-consistency ({total} procedures re-checked)")
