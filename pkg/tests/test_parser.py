"""Surface syntax parsing."""

import pytest

from minihal.ast import (
    CallG,
    Conj,
    Const,
    Disj,
    FailG,
    HoCallG,
    Ite,
    Mode,
    MiniHalError,
    PredInst,
    Struct,
    TApp,
    TVar,
    Unif,
    Var,
)
from minihal.parser import parse_inst_string, parse_program, parse_type_string

from helpers import corpus


class TestDeclarations:
    def test_stack_program_counts(self):
        p = parse_program(corpus("stack.hal"))
        assert len(p.instdefs) == 3
        assert len([e for e in p.equivs if e.kind == "mode"]) == 2
        assert sorted(p.preds) == ["empty", "pop", "push"]
        assert len(p.preds["pop"].modes) == 2
        assert p.preds["pop"].modes[0].determinism == "semidet"

    def test_empty_file(self):
        p = parse_program("")
        assert not p.typedefs and not p.instdefs and not p.preds

    def test_typedef_solver_flag(self):
        p = parse_program(
            ":- typedef h -> (a ; b) deriving solver.\n"
            ":- typedef g -> c.\n"
            ":- pred q(h). :- mode q(oo) is det. q(X) :- X = a.\n")
        assert p.typedefs[("h", 0)].is_solver
        assert not p.typedefs[("g", 0)].is_solver

    def test_duplicate_typedef_rejected(self):
        with pytest.raises(MiniHalError):
            parse_program(":- typedef t -> a.\n:- typedef t -> b.\n")

    def test_clauses_without_pred_rejected(self):
        with pytest.raises(MiniHalError):
            parse_program("p(X) :- X = a.\n")

    def test_pred_without_clauses_rejected(self):
        with pytest.raises(MiniHalError):
            parse_program(":- typedef t -> a.\n:- pred p(t).\n"
                          ":- mode p(in) is det.\n")

    def test_head_arity_must_match_type(self):
        with pytest.raises(MiniHalError):
            parse_program(":- typedef t -> a.\n:- pred p(t).\n"
                          ":- mode p(in) is det.\np(X, Y) :- X = a.\n")

    def test_mode_arity_must_match_type(self):
        with pytest.raises(MiniHalError):
            parse_program(":- typedef t -> a.\n:- pred p(t).\n"
                          ":- mode p(in, out) is det.\np(X) :- X = a.\n")


class TestExpressions:
    def test_type_strings(self):
        t = parse_type_string("list(hlist(T))")
        assert t == TApp("list", (TApp("hlist", (TVar("T"),)),))
        ho = parse_type_string("pred(sign, list(T))")
        assert len(ho.args) == 2

    def test_inst_strings(self):
        i = parse_inst_string("nelist(ground)")
        assert i == TApp("nelist", (TApp("ground"),))
        hi = parse_inst_string("pred(ground -> ground, new -> ground)")
        assert isinstance(hi, PredInst)
        assert hi.modes[1] == Mode(TApp("new"), TApp("ground"))

    def test_pred_inst_with_determinism(self):
        hi = parse_inst_string("pred(gg, ng) is det")
        assert hi.determinism == "det"


class TestGoals:
    def _body(self, text):
        src = (":- typedef t -> a ; b.\n:- pred p(t).\n"
               ":- mode p(in) is det.\n" f"p(X) :- {text}.\n")
        return parse_program(src).preds["p"].clauses[0].body

    def test_precedence_conj_binds_tightest(self):
        g = self._body("X = a, X = b ; X = a")
        assert isinstance(g, Disj)
        assert isinstance(g.goals[0], Conj)

    def test_arrow_becomes_ite(self):
        g = self._body("X = a -> X = b ; X = a")
        assert isinstance(g, Ite)

    def test_bare_arrow_gets_fail_else(self):
        g = self._body("X = a -> X = b")
        assert isinstance(g, Ite)
        assert isinstance(g.els, FailG)

    def test_list_sugar(self):
        g = self._body("X = [a, b|Y]")
        rhs = g.rhs
        assert rhs.functor == "." and rhs.args[0] == Struct("a", ())
        assert rhs.args[1].functor == "."
        assert rhs.args[1].args[1] == Var("Y")

    def test_relational_goals(self):
        g = self._body("N > 0, +(N, 1, M)")
        gt, plus = g.goals
        assert isinstance(gt, CallG) and gt.name == ">"
        assert gt.args[1] == Const(0, "int")
        assert isinstance(plus, CallG) and plus.name == "+"

    def test_higher_order_call(self):
        g = self._body("call(H, X, Y)")
        assert isinstance(g, HoCallG)
        assert g.closure == Var("H")
        assert len(g.args) == 2

    def test_fact_clause_gets_true_body(self):
        src = (":- typedef t -> a.\n:- pred p(t).\n:- mode p(in) is det.\n"
               "p(a).\n")
        cl = parse_program(src).preds["p"].clauses[0]
        assert cl.head_args[0] == Struct("a", ())

    def test_comments_ignored(self):
        p = parse_program("% nothing here\n  % more\n")
        assert not p.preds

    def test_syntax_error_carries_location(self):
        with pytest.raises(MiniHalError) as exc:
            parse_program(":- typedef t -> ;.\n")
        assert exc.value.diag.loc is not None
        assert exc.value.diag.code == "E101"
