"""The enumeration oracle itself."""

import random

import pytest

from minihal import grammar as G
from minihal import oracle as O
from minihal.frontend import expand_equivalences
from minihal.parser import parse_program, parse_type_string
from minihal.tigrammar import TiContext

DEFS = """
:- typedef abc -> a ; b ; c.
:- typedef hlist(T) -> ([] ; [T|hlist(T)]) deriving solver.
:- pred noop(int).
:- mode noop(in) is det.
noop(X) :- X = 0.
"""


def ctx():
    p = expand_equivalences(parse_program(DEFS))
    return TiContext(p.typedefs, p.instdefs)


def test_enumerate_bottom_is_empty():
    assert O.enumerate_lang(G.BOTTOM, 4) == frozenset()


def test_enumerate_top_is_an_error():
    with pytest.raises(ValueError):
        O.enumerate_lang(G.TOP, 2)


def test_depth_budget():
    with pytest.raises(ValueError):
        O.enumerate_lang(G.NEW_GRAMMAR, 7)


def test_enumerate_height_one():
    g = ctx().grammar_of_type(parse_type_string("hlist(abc)"))
    assert O.enumerate_lang(g, 1) == {(G.f_ctor("[]", 0),)}


def test_enumerate_old_open_list():
    g = ctx().base(parse_type_string("hlist(abc)"), "old")
    lang = O.enumerate_lang(g, 2)
    assert (G.f_ctor(".", 2), (G.f_ctor("a", 0),), (G.VAR,)) in lang
    assert (G.VAR,) in lang
    assert (G.f_ctor("[]", 0),) in lang


def test_enumerate_monotone_in_depth():
    g = ctx().grammar_of_type(parse_type_string("hlist(abc)"))
    prev = frozenset()
    for d in range(1, 5):
        cur = O.enumerate_lang(g, d)
        assert prev <= cur
        prev = cur


def test_tree_budget_exceeded():
    # ints as leaves of a wide grammar would not blow; build a grammar with
    # ~2^20 distinct trees at depth 6: binary nodes over 4 constants
    nts = [G.fresh_nt()]
    rules = [(nts[0], G.f_ctor(f"k{i}", 0), ()) for i in range(4)]
    rules.append((nts[0], G.f_ctor("n", 2), (nts[0], nts[0])))
    g = G.make_grammar(nts[0], rules)
    with pytest.raises(O.OracleBudgetError):
        interner = O._Interner(budget=1000)
        O._lang_ids(g, 6, interner)


def test_random_grammar_properties_small_run():
    res = O.run_property_suite(samples=120, depth=4, seed=99)
    assert res.samples == 120
    assert res.failures == []


def test_random_grammar_determinism():
    rng1 = random.Random(5)
    rng2 = random.Random(5)
    sig1 = O.random_signature(rng1)
    sig2 = O.random_signature(rng2)
    assert sig1 == sig2


def test_suite_seeds_are_logged_on_failure():
    res = O.SuiteResult()
    res.failures.append(("meet", 1234))
    assert not res.ok
