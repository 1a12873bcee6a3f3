"""Ti-grammar construction: base, rt and state operations."""

import pytest

from minihal import grammar as G
from minihal import oracle as O
from minihal.ast import MiniHalError, TApp, TVar
from minihal.frontend import expand_equivalences
from minihal.parser import parse_inst_string, parse_program, parse_type_string
from minihal.tigrammar import (
    NonRegularError,
    TiContext,
    TiState,
    state_conj,
    state_disj,
    state_lt,
    ti_name,
)

DEFS = """
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


@pytest.fixture()
def ctx():
    p = expand_equivalences(parse_program(DEFS))
    return TiContext(p.typedefs, p.instdefs)


def ty(text):
    return parse_type_string(text)


def inst(text):
    return parse_inst_string(text)


def cons(h, t):
    return (G.f_ctor(".", 2), h, t)


def leaf(name):
    return (G.f_ctor(name, 0),)


class TestGrammarOfType:
    def test_list_abc(self, ctx):
        g = ctx.grammar_of_type(ty("list(abc)"))
        assert g.root == ("ty", "list(abc)")
        elems = g.prods(("ty", "abc"))
        assert sorted(c[1] for c in elems) == ["a", "b", "c"]
        assert len(g.root_prods()) == 2

    def test_parametric_list(self, ctx):
        g = ctx.grammar_of_type(ty("list(T)"))
        # the parameter has no rules: the only finite tree is []
        assert O.enumerate_lang(G.normalize(g), 3) == {leaf("[]")}

    def test_non_regular_type_rejected(self):
        src = DEFS + ":- typedef erk(T) -> node(erk(list(T)), T).\n"
        with pytest.raises(MiniHalError):
            expand_equivalences(parse_program(src))


class TestBase:
    def test_new_grammar(self, ctx):
        g = ctx.base(ty("hlist(abc)"), "new")
        assert g.is_new
        assert O.enumerate_lang(g, 2) == {(("fresh",),)}

    def test_old_solver_list(self, ctx):
        # open-ended lists: #var# on the list non-terminal only
        g = ctx.base(ty("hlist(abc)"), "old")
        assert G.VAR in g.root_prods()
        assert G.VAR not in g.prods(ti_name(ty("abc"), "old"))
        lang = O.enumerate_lang(g, 2)
        assert (("var",),) in lang
        assert cons(leaf("a"), (("var",),)) in lang

    def test_old_list_of_solver_elements(self, ctx):
        # fixed-length lists whose elements may be variables
        g = ctx.base(ty("list(habc)"), "old")
        assert G.VAR not in g.root_prods()
        assert G.VAR in g.prods(ti_name(ty("habc"), "old"))
        lang = O.enumerate_lang(g, 3)
        assert cons((("var",),), leaf("[]")) in lang
        assert (("var",),) not in lang

    def test_param_bases(self, ctx):
        g = ctx.base(TVar("T"), "ground")
        assert set(g.root_prods()) == {G.gparam("T")}
        o = ctx.base(TVar("T"), "old")
        assert set(o.root_prods()) == {G.gparam("T"), G.oparam("T")}

    def test_builtin_is_opaque(self, ctx):
        g = ctx.base(ty("int"), "ground")
        assert set(g.root_prods()) == {G.builtin_ctor("int")}
        assert ctx.base(ty("int"), "old") == g.__class__(
            "rules", ti_name(ty("int"), "old"),
            {ti_name(ty("int"), "old"): {G.builtin_ctor("int"): ()}})


class TestRt:
    def test_nelist_old_matches_printed_rules(self, ctx):
        g = ctx.rt(ty("list(habc)"), inst("nelist(old)"))
        root = ti_name(ty("list(habc)"), inst("nelist(old)"))
        assert g.root == root
        assert list(g.root_prods()) == [G.f_ctor(".", 2)]
        elem = ti_name(ty("habc"), "old")
        assert sorted(c[1] if c[0] == "f" else c[0]
                      for c in g.prods(elem)) == ["a", "b", "c", "var"]
        inner = ti_name(ty("list(habc)"), inst("list(old)"))
        assert len(g.prods(inner)) == 2

    def test_nelist_ground_over_parameter_type(self, ctx):
        g = ctx.rt(ty("list(T)"), inst("nelist(ground)"))
        pnt = ti_name(TVar("T"), "ground")
        assert g.prods(pnt) == {G.gparam("T"): ()}

    def test_nonbase_inst_on_parameter_is_top(self, ctx):
        assert ctx.rt(TVar("T"), inst("nelist(ground)")).is_top

    def test_base_delegation(self, ctx):
        assert ctx.rt(ty("list(abc)"), inst("ground")) == \
            ctx.base(ty("list(abc)"), "ground")
        assert ctx.rt(ty("abc"), inst("new")).is_new

    def test_ho_inst_over_ho_type(self, ctx):
        t = parse_type_string("pred(sign, sign)")
        i = parse_inst_string("pred(ground -> ground, new -> ground)")
        g = ctx.rt(t, i)
        ip = g.root_ipred()
        assert ip is not None
        ctor, children = ip
        assert ctor == G.ipred_ctor(2)
        assert children[2] == G.NEW_NT
        sg = G.subg(children[0], g)
        assert sorted(c[1] for c in sg.root_prods()) == ["neg", "pos", "zero"]

    def test_ho_inst_over_first_order_type_is_top(self, ctx):
        i = parse_inst_string("pred(ground -> ground)")
        assert ctx.rt(ty("abc"), i).is_top

    def test_ground_below_old_constructions(self, ctx):
        for t in ("abc", "habc", "hlist(abc)", "list(habc)", "hlist(T)"):
            lg = ctx.rt(ty(t), inst("ground"))
            lo = ctx.rt(ty(t), inst("old"))
            assert G.lt(lg, lo), t

    def test_fresh_only_in_new(self, ctx):
        def has_fresh(g):
            return any(G.FRESH in prods for prods in g.rules.values())

        assert has_fresh(ctx.rt(ty("abc"), inst("new")))
        assert not has_fresh(ctx.rt(ty("list(habc)"), inst("nelist(old)")))

    def test_rt_is_cached_and_deterministic(self, ctx):
        a = ctx.rt(ty("list(habc)"), inst("nelist(old)"))
        b = ctx.rt(ty("list(habc)"), inst("nelist(old)"))
        assert a is b

    def test_dropped_alternative_lints(self, ctx):
        # the elist instantiation names no constructor of abc
        g = ctx.rt(ty("abc"), inst("elist"))
        assert not g.root_prods()
        assert any(d.code == "W101" for d in ctx.lints)

    def test_non_regular_instantiation_budget(self, ctx):
        # the tail instantiation keeps growing: w(g), w(w(g)), ...
        src = DEFS + ":- instdef w(I) -> [I|w(w(I))].\n"
        p = expand_equivalences(parse_program(src))
        c2 = TiContext(p.typedefs, p.instdefs)
        with pytest.raises(MiniHalError):
            c2.rt(ty("list(abc)"), inst("w(ground)"))


class TestStates:
    def test_pointwise_ops(self, ctx):
        gl = ctx.rt(ty("list(abc)"), inst("ground"))
        ne = ctx.rt(ty("list(abc)"), inst("nelist(ground)"))
        s1 = TiState({"X": gl, "Y": G.NEW_GRAMMAR})
        s2 = TiState({"X": ne, "Y": G.NEW_GRAMMAR})
        assert state_lt(s2, s1)
        assert not state_lt(s1, s2)
        m = state_conj(s1, s2)
        assert G.lt(m["X"], ne)
        j = state_disj(s1, s2)
        assert j["Y"].is_new
        assert O.enumerate_lang(j["X"], 4) == O.enumerate_lang(gl, 4)

    def test_disj_all_bottom_is_identity(self, ctx):
        gl = ctx.rt(ty("list(abc)"), inst("ground"))
        s1 = TiState({"X": G.BOTTOM})
        s2 = TiState({"X": gl})
        assert state_disj(s1, s2)["X"] == gl

    def test_new_vs_bound_joins_to_top(self, ctx):
        gl = ctx.rt(ty("list(abc)"), inst("ground"))
        j = state_disj(TiState({"X": G.NEW_GRAMMAR}), TiState({"X": gl}))
        assert j.top_vars() == ["X"]

    def test_domain_mismatch_is_an_error(self, ctx):
        with pytest.raises(AssertionError):
            state_conj(TiState({"X": G.NEW_GRAMMAR}), TiState({}))
