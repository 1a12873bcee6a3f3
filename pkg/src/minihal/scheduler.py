"""The mode checker proper: schedules body literals against ti-states,
reorders conjunctions, selects procedures for calls, inserts solver-variable
initializations, and checks every mode declaration of every predicate.

Per mode declaration the result is either a `Procedure` (the reordered,
mode-tagged body, ready for printing) or diagnostics:

    E001  a literal (or branch) can never be scheduled
    E002  the body schedules but an argument's final instantiation is
          weaker than the declared success instantiation
    E003  a disjunction joins new against bound (error value in the join)
    W001  a deconstruct may touch an unbound solver variable at run time
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Dict, List, Optional, Tuple, Union

from .ast import (
    Conj,
    Diagnostic,
    Disj,
    Ite,
    Mode,
    NCall,
    NEqHo,
    NEqVF,
    NEqVV,
    NFail,
    NHoCall,
    NTrue,
    PredDef,
    Program,
    SrcLoc,
    TApp,
    TVar,
    goal_literals,
    subst_expr,
)
from . import grammar as G
from .grammar import BOTTOM, NEW_GRAMMAR, NEW_NT, TOP, TiGrammar
from .tigrammar import TiContext, TiState, state_disj
from .frontend import is_builtin_pred

OLD_INST = TApp("old")


class InternalError(Exception):
    """A checker invariant was violated (exit status 3 in the CLI)."""


# ---------------------------------------------------------------------------
# Scheduled goals


@dataclass
class SLit:
    kind: str  # copy | unify | construct | deconstruct | call | ho_construct
    #            | ho_call | init | true | fail
    lhs: Optional[str] = None
    rhs: Optional[str] = None
    functor: Optional[str] = None
    args: tuple = ()
    const: object = None
    pred: Optional[str] = None
    mode_index: Optional[int] = None  # 1-based procedure index
    call_modes: tuple = ()  # per-arg Mode of the selected procedure (calls)
    warning: Optional[Diagnostic] = None
    origin_lid: int = -1
    loc: Optional[SrcLoc] = None
    entry: Optional[TiState] = None  # ti-state just before this literal
    closure_grammar: Optional[TiGrammar] = None  # ho_construct result


@dataclass
class SConj:
    items: tuple


@dataclass
class SDisj:
    branches: tuple


@dataclass
class SIte:
    cond: object
    then: object
    els: object


SNode = Union[SLit, SConj, SDisj, SIte]


def snode_lits(node) -> list:
    out: list = []
    _walk(node, out)
    return out


def _walk(node, out: list) -> None:
    if isinstance(node, SConj):
        for item in node.items:
            _walk(item, out)
    elif isinstance(node, SDisj):
        for br in node.branches:
            _walk(br, out)
    elif isinstance(node, SIte):
        _walk(node.cond, out)
        _walk(node.then, out)
        _walk(node.els, out)
    else:
        out.append(node)


@dataclass
class Procedure:
    pred: str
    mode_index: int  # 1-based
    name: str
    head_vars: tuple
    body: SNode
    final_state: TiState
    entry_state: TiState
    warnings: tuple = ()
    var_types: dict = field(default_factory=dict)  # incl. scheduler freshes


@dataclass
class CheckResult:
    procedures: List[Procedure]
    diagnostics: List[Diagnostic]

    @property
    def ok(self) -> bool:
        return not any(d.is_error for d in self.diagnostics)


# ---------------------------------------------------------------------------
# Scheduling outcomes


@dataclass
class _Progress:
    items: list
    state: TiState
    inserts: list = field(default_factory=list)


@dataclass
class _Blocked:
    reason: str
    detail: str = ""


@dataclass
class _Ok:
    node: SNode
    state: TiState


@dataclass
class _Stuck:
    residual: list  # [(goal, _Blocked)]


@dataclass(frozen=True)
class _InitGoal:
    """Pending `init(v)` inserted by the initialization phase."""

    var: str
    loc: Optional[SrcLoc] = None

    def __str__(self) -> str:
        return f"init({self.var})"

    @property
    def vars(self) -> tuple:
        return (self.var,)


# ---------------------------------------------------------------------------
# Polymorphic matching (collect_set) and success improvement


def collect_set(r1: TiGrammar, r2: TiGrammar) -> list:
    """Triples (tag, parameter, grammar) pairing the parameter placeholders
    of r1 with the sub-grammars of r2 they match."""
    out: list = []
    seen: set = set()
    if r1.kind != "rules" or r2.kind != "rules":
        return out
    _collect(r1.rules, r1.root, r2.rules, r2.root, frozenset(), out, seen)
    return out


def _collect(ra, xa, rb, xb, P, out, seen) -> None:
    if (xa, xb) in P:
        return
    if xa == NEW_NT:
        return
    pa = ra.get(xa, {})
    pb = rb.get(xb, {})
    for kind, tag in (("oparam", "old"), ("gparam", "ground")):
        ctor = G._param_prod(pa, kind)
        if ctor is not None:
            sl = _slice(rb, xb)
            key = (tag, ctor[1], sl.key)
            if key not in seen:
                seen.add(key)
                out.append((tag, ctor[1], sl))
            return
    P2 = P | {(xa, xb)}
    for ctor in sorted(pa):
        if ctor in pb:
            for c1, c2 in zip(pa[ctor], pb[ctor]):
                _collect(ra, c1, rb, c2, P2, out, seen)


def _slice(rules: dict, x: tuple) -> TiGrammar:
    out: dict = {}
    G._copy_reachable(out, rules, x)
    return TiGrammar("rules", x, out)


def _join_all(grammars: list) -> Optional[TiGrammar]:
    if not grammars:
        return None
    return reduce(G.disj, grammars)


def subst_params(ctx: TiContext, g: TiGrammar, matches: list,
                 theta: dict) -> TiGrammar:
    """Rewrite the parameter placeholders of a declared-type ti-grammar with
    the joined grammars collected at the call site (falling back to the
    call-site base grammar when nothing was collected).  Rewritten copies
    live in their own non-terminal namespace."""
    if g.kind != "rules":
        return g
    repl: dict = {}
    for nt, prods in g.rules.items():
        op = G._param_prod(prods, "oparam")
        gp = G._param_prod(prods, "gparam")
        if op is not None:
            v = op[1]
            joined = _join_all([r for tag, vv, r in matches if vv == v])
            repl[nt] = joined if joined is not None \
                else ctx.base(theta[v], "old")
        elif gp is not None:
            v = gp[1]
            joined = _join_all(
                [r for tag, vv, r in matches if vv == v and tag == "ground"])
            repl[nt] = joined if joined is not None \
                else ctx.base(theta[v], "ground")
    if not repl:
        return g
    if g.root in repl:
        return repl[g.root]
    token = hashlib.sha1(
        repr(sorted((G.nt_str(nt), repr(r.key))
                    for nt, r in repl.items())).encode()).hexdigest()[:8]

    def rename(nt: tuple) -> tuple:
        if nt in repl:
            return repl[nt].root
        if nt == NEW_NT:
            return NEW_NT
        return ("sub", nt, token)

    rules: dict = {}
    for nt, prods in g.rules.items():
        if nt in repl:
            continue
        for ctor, children in prods.items():
            G._merge_rules(rules, rename(nt), ctor,
                           tuple(rename(c) for c in children))
    for r in repl.values():
        if r.kind == "rules":
            G._copy_reachable(rules, r.rules, r.root)
    return TiGrammar("rules", rename(g.root), rules)


# ---------------------------------------------------------------------------
# The checker


class Checker:
    def __init__(self, program: Program, allow_init: bool = True):
        self.program = program
        self.ctx = TiContext(program.typedefs, program.instdefs)
        self.allow_init = allow_init
        self._scope_cache: Dict[str, dict] = {}
        # per-mode-check state
        self.vt: Dict[str, object] = {}
        self.diags: List[Diagnostic] = []
        self.fresh_counter = itertools.count(1)
        self.scopes: dict = {}
        self.truncated = False

    # -- entry points ----------------------------------------------------------

    def check_program(self) -> CheckResult:
        procedures: List[Procedure] = []
        diagnostics: List[Diagnostic] = []
        for name in self.program.pred_order:
            pd = self.program.preds[name]
            for k in range(len(pd.modes)):
                proc, diags = self.check_mode(name, k)
                diagnostics.extend(diags)
                if proc is not None:
                    procedures.append(proc)
        diagnostics.extend(self.ctx.lints)
        return CheckResult(procedures, diagnostics)

    def check_mode(self, name: str, k: int):
        """Check one (predicate, mode declaration) pair. Returns
        (Procedure or None, diagnostics)."""
        pd = self.program.preds[name]
        md = pd.modes[k]
        self.vt = dict(pd.var_types or {})
        self.diags = []
        self.fresh_counter = itertools.count(1)
        self.truncated = False
        self.scopes = self._compute_scopes(pd)
        self._attr = (name, k + 1)

        entry_bindings = {}
        bad_decl = []
        for v, t, m in zip(pd.head_vars, pd.arg_types, md.args):
            g = self.ctx.rt(t, m.call)
            if g.is_top:
                bad_decl.append((v, m.call))
            entry_bindings[v] = g
        if bad_decl:
            v, c = bad_decl[0]
            return None, self._emit(
                "E001", f"call instantiation {c} is not valid for the "
                        f"declared type of argument {v}", md.loc)
        entry = TiState(entry_bindings)

        body = pd.body if isinstance(pd.body, Conj) else Conj((pd.body,))
        out = self.schedule_goal(body, entry, self.allow_init)
        if isinstance(out, _Stuck):
            return None, self._stuck_diags(out, md.loc)

        weak = []
        for v, t, m in zip(pd.head_vars, pd.arg_types, md.args):
            sg = self.ctx.rt(t, m.success)
            if not G.lt(out.state[v], sg):
                weak.append((v, m.success))
        if weak:
            names = ", ".join(
                f"{v} (needs {s})" for v, s in weak)
            return None, self._emit(
                "E002", f"success instantiation too weak for argument(s): "
                        f"{names}", md.loc)

        if not self.truncated:
            self._check_permutation(body, out.node)
        proc = Procedure(
            pred=name, mode_index=k + 1, name=f"{name}_mode{k + 1}",
            head_vars=pd.head_vars, body=out.node, final_state=out.state,
            entry_state=entry, warnings=tuple(self.diags),
            var_types=dict(self.vt))
        return proc, list(self.diags)

    def _emit(self, code: str, message: str, loc=None) -> list:
        d = Diagnostic(code, message, loc, self._attr[0], self._attr[1])
        return list(self.diags) + [d]

    def _stuck_diags(self, out: _Stuck, fallback_loc) -> list:
        residual = out.residual
        loc = next((g.loc for g, _ in residual
                    if getattr(g, "loc", None) is not None), fallback_loc)
        reasons = {b.reason for _, b in residual}
        lits = "; ".join(str(g) for g, _ in residual)
        if "gpred-call" in reasons:
            return self._emit(
                "E001", "higher-order object has only ground mode "
                        "information (its call/success modes were lost); "
                        f"cannot schedule: {lits}", loc)
        if "top-join" in reasons:
            detail = next(b.detail for _, b in residual
                          if b.reason == "top-join")
            return self._emit(
                "E003", f"disjunction branches disagree on whether {detail} "
                        f"is bound (join is the error value)", loc)
        return self._emit("E001", f"cannot schedule: {lits}", loc)

    def _check_permutation(self, body, node) -> None:
        want = sorted(l.lid for l in goal_literals(body)
                      if not isinstance(l, NTrue))
        got = sorted(l.origin_lid for l in snode_lits(node)
                     if l.origin_lid >= 0)
        if want != got:
            raise InternalError(
                f"scheduled literals are not a permutation of the input: "
                f"{want} vs {got}")

    # -- scoping ----------------------------------------------------------------

    def _compute_scopes(self, pd: PredDef) -> dict:
        cached = self._scope_cache.get(pd.name)
        if cached is not None:
            return cached
        body = pd.body if isinstance(pd.body, Conj) else Conj((pd.body,))
        paths: Dict[str, tuple] = {}

        def note(v: str, path: tuple) -> None:
            if v in paths:
                old = paths[v]
                common = []
                for a, b in zip(old, path):
                    if a == b:
                        common.append(a)
                    else:
                        break
                paths[v] = tuple(common)
            else:
                paths[v] = path

        def visit(g, path) -> None:
            if isinstance(g, Conj):
                p2 = path + (("node", id(g)),)
                for sub in g.goals:
                    visit(sub, p2)
            elif isinstance(g, Disj):
                p2 = path + (("node", id(g)),)
                for sub in g.goals:
                    visit(sub, p2)
            elif isinstance(g, Ite):
                p2 = path + (("node", id(g)),)
                ct = p2 + (("ct", id(g)),)
                visit(g.cond, ct)
                visit(g.then, ct)
                visit(g.els, p2)
            else:
                for v in g.vars:
                    note(v, path)

        visit(body, ())
        scopes: dict = {}
        head = set(pd.head_vars)
        for v in sorted(paths):
            if v in head:
                continue
            path = paths[v]
            key = path[-1] if path else ("node", id(body))
            scopes.setdefault(key, []).append(v)
        self._scope_cache[pd.name] = scopes
        return scopes

    def _scope_vars(self, key) -> list:
        return self.scopes.get(key, [])

    # -- goal scheduling ----------------------------------------------------------

    def schedule_goal(self, goal, ti: TiState, allow_init: bool):
        """Schedule one construct; on success the resulting state is
        restricted back to the incoming domain."""
        entry_dom = ti.domain
        ti = ti.extend_new(self._scope_vars(("node", id(goal))))
        if isinstance(goal, Conj):
            out = self._schedule_conj(list(goal.goals), ti, allow_init)
        elif isinstance(goal, Disj):
            out = self._schedule_disj(goal, ti, allow_init)
        elif isinstance(goal, Ite):
            out = self._schedule_ite(goal, ti, allow_init)
        else:
            out = self._schedule_conj([goal], ti, allow_init)
        if isinstance(out, _Stuck):
            return out
        return _Ok(out.node, out.state.restrict(entry_dom))

    def _schedule_conj(self, goals: list, ti: TiState, allow_init: bool):
        pending: list = list(goals)
        reasons: list = [None] * len(pending)
        items: list = []
        state = ti

        def commit(idx: int, res: _Progress) -> bool:
            """Apply one scheduling step; True when the conjunction was
            closed off by failure propagation."""
            nonlocal state
            if res.state.bottom_vars():
                items.append(SLit("fail", entry=state))
                state = res.state.map_all(BOTTOM)
                self.truncated = True
                return True
            items.extend(res.items)
            pending[idx: idx + 1] = list(res.inserts)
            reasons[idx: idx + 1] = [None] * len(res.inserts)
            state = res.state
            return False

        while pending:
            progressed = False
            for idx, g in enumerate(pending):
                res = self._try(g, state, allow_init_nested=False)
                if isinstance(res, _Progress):
                    if commit(idx, res):
                        return _Ok(SConj(tuple(items)), state)
                    progressed = True
                    break
                reasons[idx] = res
            if progressed:
                continue
            if allow_init:
                done = self._init_phase(pending, reasons, state, commit, items)
                if done == "closed":
                    return _Ok(SConj(tuple(items)), state)
                if done:
                    continue
            return _Stuck(list(zip(pending, reasons)))
        return _Ok(SConj(tuple(items)), state)

    def _init_phase(self, pending, reasons, state, commit, items):
        """Phase two of the two-phase approach: left-to-right, try to make
        an unscheduled item schedulable, either by inserting init calls
        before a literal or by re-scheduling a nested construct with
        initialization enabled."""
        for idx, g in enumerate(pending):
            if isinstance(g, (Conj, Disj, Ite)):
                res = self._try(g, state, allow_init_nested=True)
                if isinstance(res, _Progress):
                    if commit(idx, res):
                        return "closed"
                    return True
                reasons[idx] = res
                continue
            needed = self._init_candidates(g, state, pending[:idx])
            if needed:
                pending[idx:idx] = [_InitGoal(v, getattr(g, "loc", None))
                                    for v in needed]
                reasons[idx:idx] = [None] * len(needed)
                return True
        return False

    def _init_candidates(self, lit, state, earlier) -> Optional[list]:
        """Variables whose initialization makes `lit` schedulable, or None."""

        def eligible(v: str) -> bool:
            t = self.vt[v]
            if not (self.ctx.is_solver_type(t) or isinstance(t, TVar)):
                return False
            for e in earlier:
                if isinstance(e, (NEqVV, NEqVF, NEqHo)) and e.lhs == v:
                    return False
            return True

        options: List[list] = []
        if isinstance(lit, NEqVV):
            if state[lit.lhs].is_new and state[lit.rhs].is_new:
                options = [[lit.lhs], [lit.rhs]]
        elif isinstance(lit, NEqVF):
            if lit.const is None and state[lit.lhs].is_new:
                new_args = [a for a in lit.args if state[a].is_new]
                if new_args:
                    options.append(new_args)  # enable the construct
                options.append([lit.lhs])  # enable a deconstruct on old
        elif isinstance(lit, NEqHo):
            new_args = [a for a in lit.args if state[a].is_new]
            if new_args and state[lit.lhs].is_new:
                options.append(new_args)
        elif isinstance(lit, NCall) and not (lit.pred == "init"
                                             and len(lit.args) == 1):
            pd = self.program.preds.get(lit.pred)
            if pd is not None:
                per_mode = []
                for md in pd.modes:
                    blocked = []
                    usable = True
                    for a, m in zip(lit.args, md.args):
                        cg = self.ctx.rt(self.vt[a], m.call)
                        if state[a].is_new and not cg.is_new \
                                and not G.lt(state[a], cg):
                            blocked.append(a)
                        elif not G.lt(state[a], cg) and not cg.is_new:
                            usable = False
                            break
                    if usable and blocked:
                        per_mode.append(blocked)
                per_mode.sort(key=len)
                options.extend(per_mode)
        elif isinstance(lit, NHoCall):
            r = state.get(lit.closure)
            if r is not None and not r.is_new and r.kind == "rules":
                ip = r.root_ipred()
                if ip is not None:
                    blocked = []
                    for j, a in enumerate(lit.args):
                        cs = G.subg(ip[1][2 * j], r)
                        if state[a].is_new and not cs.is_new:
                            blocked.append(a)
                    if blocked:
                        options.append(blocked)

        for needed in options:
            if not needed or not all(eligible(v) for v in needed):
                continue
            tentative = state.set(
                *[(v, self.ctx.rt(self.vt[v], OLD_INST)) for v in needed])
            if isinstance(self._try(lit, tentative, False), _Progress):
                return needed
        return None

    def _schedule_disj(self, goal: Disj, ti: TiState, allow_init: bool):
        branches = []
        states = []
        for br in goal.goals:
            out = self.schedule_goal(br, ti, allow_init)
            if isinstance(out, _Stuck):
                return out
            branches.append(out.node)
            states.append(out.state)
        joined = reduce(state_disj, states)
        tops = joined.top_vars()
        if tops:
            return _Stuck([(goal, _Blocked("top-join", ", ".join(tops)))])
        return _Ok(SDisj(tuple(branches)), joined)

    def _schedule_ite(self, goal: Ite, ti: TiState, allow_init: bool):
        ti_ct = ti.extend_new(self._scope_vars(("ct", id(goal))))
        out_c = self.schedule_goal(goal.cond, ti_ct, allow_init)
        if isinstance(out_c, _Stuck):
            return out_c
        if out_c.state.bottom_vars():
            then_node = SConj(())
            ct_state = out_c.state.restrict(ti.domain)
            self.truncated = True
        else:
            out_t = self.schedule_goal(goal.then, out_c.state, allow_init)
            if isinstance(out_t, _Stuck):
                return out_t
            then_node = out_t.node
            ct_state = out_t.state.restrict(ti.domain)
        out_e = self.schedule_goal(goal.els, ti, allow_init)
        if isinstance(out_e, _Stuck):
            return out_e
        joined = state_disj(ct_state, out_e.state)
        tops = joined.top_vars()
        if tops:
            return _Stuck([(goal, _Blocked("top-join", ", ".join(tops)))])
        return _Ok(SIte(out_c.node, then_node, out_e.node), joined)

    # -- literal scheduling -----------------------------------------------------------

    def _try(self, g, state: TiState, allow_init_nested: bool):
        if isinstance(g, (Conj, Disj, Ite)):
            out = self.schedule_goal(g, state, allow_init_nested)
            if isinstance(out, _Stuck):
                first = out.residual[0][1] if out.residual else None
                reason = first.reason if first else "nested"
                detail = first.detail if first else ""
                return _Blocked(reason, detail)
            return _Progress([out.node], out.state)
        if isinstance(g, _InitGoal):
            return self._sched_init(g.var, state, g.loc, origin=-1)
        if isinstance(g, NTrue):
            return _Progress([SLit("true", origin_lid=g.lid, loc=g.loc,
                                   entry=state)], state)
        if isinstance(g, NFail):
            return _Progress([SLit("fail", origin_lid=g.lid, loc=g.loc,
                                   entry=state)], state.map_all(BOTTOM))
        if isinstance(g, NEqVV):
            return self._sched_eq_vv(g, state)
        if isinstance(g, NEqVF):
            return self._sched_eq_vf(g, state)
        if isinstance(g, NEqHo):
            return self._sched_eq_ho(g, state)
        if isinstance(g, NCall):
            if g.pred == "init" and len(g.args) == 1:
                return self._sched_init(g.args[0], state, g.loc,
                                        origin=g.lid)
            return self._sched_call(g, state)
        if isinstance(g, NHoCall):
            return self._sched_ho_call(g, state)
        raise InternalError(f"unknown goal {g!r}")

    def fresh_var(self, prefix: str, type_expr) -> str:
        while True:
            name = f"{prefix}_{next(self.fresh_counter)}"
            if name not in self.vt:
                self.vt[name] = type_expr
                return name

    # equalities x1 = x2 ---------------------------------------------------------

    def _sched_eq_vv(self, lit: NEqVV, state: TiState):
        r1, r2 = state[lit.lhs], state[lit.rhs]
        if r1.is_new and r2.is_new:
            return _Blocked("eq-both-new", str(lit))
        if r1.is_new or r2.is_new:
            dst, src = (lit.lhs, lit.rhs) if r1.is_new else (lit.rhs, lit.lhs)
            g = state[src]
            item = SLit("copy", lhs=dst, rhs=src, origin_lid=lit.lid,
                        loc=lit.loc, entry=state)
            return _Progress([item],
                             state.set((lit.lhs, g), (lit.rhs, g)))
        m = G.conj(r1, r2)
        item = SLit("unify", lhs=lit.lhs, rhs=lit.rhs, origin_lid=lit.lid,
                    loc=lit.loc, entry=state)
        return _Progress([item], state.set((lit.lhs, m), (lit.rhs, m)))

    # equalities x = f(x1..xn) ----------------------------------------------------

    def _sched_eq_vf(self, lit: NEqVF, state: TiState):
        t = self.vt[lit.lhs]
        if lit.const is not None or self.ctx.is_builtin_type(t):
            if state[lit.lhs].is_new:
                item = SLit("construct", lhs=lit.lhs, functor=lit.functor,
                            const=lit.const, origin_lid=lit.lid, loc=lit.loc,
                            entry=state)
                return _Progress(
                    [item], state.set((lit.lhs, self.ctx.base(t, "ground"))))
            item = SLit("unify", lhs=lit.lhs, functor=lit.functor,
                        const=lit.const, origin_lid=lit.lid, loc=lit.loc,
                        entry=state)
            return _Progress([item], state)

        r = state[lit.lhs]
        if r.is_new:
            arg_gs = [state[a] for a in lit.args]
            if any(g.is_new for g in arg_gs):
                return _Blocked("construct-args-new", str(lit))
            root = G.fresh_nt()
            rules: dict = {root: {G.f_ctor(lit.functor, len(lit.args)):
                                  tuple(g.root for g in arg_gs)}}
            for g in arg_gs:
                G._copy_reachable(rules, g.rules, g.root)
            built = TiGrammar("rules", root, rules)
            item = SLit("construct", lhs=lit.lhs, functor=lit.functor,
                        args=lit.args, origin_lid=lit.lid, loc=lit.loc,
                        entry=state)
            return _Progress([item], state.set((lit.lhs, built)))

        # deconstruct (x is not new); allowed also when x may be unbound
        fc = G.f_ctor(lit.functor, len(lit.args))
        prods = r.root_prods()
        if fc not in prods:
            updates = [(lit.lhs, BOTTOM)] + [(a, BOTTOM) for a in lit.args]
            item = SLit("deconstruct", lhs=lit.lhs, functor=lit.functor,
                        args=lit.args, origin_lid=lit.lid, loc=lit.loc,
                        entry=state)
            return _Progress([item], state.set(*updates))
        children = prods[fc]
        slices = [G.subg(c, r) for c in children]
        root = G.fresh_nt()
        rules = {root: {fc: children}}
        for c in children:
            G._copy_reachable(rules, r.rules, c)
        restricted = TiGrammar("rules", root, rules)
        updates = [(lit.lhs, restricted)]
        display: list = []
        inserts: list = []
        for a, sl in zip(lit.args, slices):
            if state[a].is_new:
                display.append(a)
                updates.append((a, sl))
            else:
                fv = self.fresh_var("F", self.vt[a])
                display.append(fv)
                updates.append((fv, sl))
                inserts.append(NEqVV(a, fv, -2, lit.loc))
        warning = None
        if r.root_has_var():
            risky = [a for a in lit.args if self._definitely_non_solver(
                self.vt[a])]
            if risky:
                warning = Diagnostic(
                    "W001", f"{lit.lhs} may be an unbound solver variable "
                            f"here; deconstructing it binds non-solver "
                            f"argument(s) {', '.join(risky)} and can fail "
                            f"at run time", lit.loc, self._attr[0],
                    self._attr[1])
                self.diags.append(warning)
        item = SLit("deconstruct", lhs=lit.lhs, functor=lit.functor,
                    args=tuple(display), warning=warning,
                    origin_lid=lit.lid, loc=lit.loc, entry=state)
        return _Progress([item], state.set(*updates), inserts)

    def _definitely_non_solver(self, t) -> bool:
        if isinstance(t, TVar):
            return False
        from .ast import PredType
        if isinstance(t, PredType):
            return True
        return not self.ctx.is_solver_type(t)

    # first-order calls ---------------------------------------------------------------

    def _sched_call(self, lit: NCall, state: TiState):
        pd = self.program.preds.get(lit.pred)
        if pd is None:
            raise InternalError(f"call to unknown predicate {lit.pred}")
        theta = (self.program.call_thetas or {}).get(lit.lid, {})
        arg_ts = [self.vt[a] for a in lit.args]
        cands = []
        for k, md in enumerate(pd.modes):
            call_gs = [self.ctx.rt(t, m.call)
                       for t, m in zip(arg_ts, md.args)]
            fails = [j for j, (a, cg) in enumerate(zip(lit.args, call_gs))
                     if not G.lt(state[a], cg)]
            if not fails:
                cands.append((k, ()))
            elif all(call_gs[j].is_new for j in fails):
                cands.append((k, tuple(fails)))
        if not cands:
            return _Blocked("call-no-mode", str(lit))
        k, implied = self._select_mode(pd, arg_ts, cands)
        md = pd.modes[k]
        arg_gs = [NEW_GRAMMAR if j in implied else state[a]
                  for j, a in enumerate(lit.args)]
        ps = self._success_grammars(pd, theta, md, arg_gs, arg_ts)
        display: list = []
        updates: list = []
        inserts: list = []
        for j, a in enumerate(lit.args):
            if j in implied:
                fv = self.fresh_var("Fresh", arg_ts[j])
                display.append(fv)
                updates.append((fv, G.conj(NEW_GRAMMAR, ps[j])))
                inserts.append(NEqVV(fv, a, -2, lit.loc))
            else:
                display.append(a)
                updates.append((a, G.conj(state[a], ps[j])))
        item = SLit("call", pred=lit.pred, mode_index=k + 1,
                    args=tuple(display), call_modes=md.args,
                    origin_lid=lit.lid, loc=lit.loc, entry=state)
        return _Progress([item], state.set(*updates), inserts)

    def _select_mode(self, pd: PredDef, arg_ts: list, cands: list):
        if len(cands) == 1:
            return cands[0]
        succ = {}
        calls = {}
        for k, _ in cands:
            md = pd.modes[k]
            succ[k] = tuple(self.ctx.rt(t, m.success)
                            for t, m in zip(arg_ts, md.args))
            calls[k] = tuple(self.ctx.rt(t, m.call)
                             for t, m in zip(arg_ts, md.args))

        def leq(sa, sb) -> bool:
            return all(G.lt(x, y) for x, y in zip(sa, sb))

        def minimal(ks, table):
            return [k for k in ks
                    if not any(k2 != k and leq(table[k2], table[k])
                               and not leq(table[k], table[k2])
                               for k2 in ks)]

        ks = [k for k, _ in cands]
        ks = minimal(ks, succ)
        ks = minimal(ks, calls)
        best = min(ks)
        return next(c for c in cands if c[0] == best)

    def _success_grammars(self, pd: PredDef, theta: dict, md, arg_gs: list,
                          arg_ts: list) -> list:
        if not pd.type_params:
            return [self.ctx.rt(t, m.success)
                    for t, m in zip(arg_ts, md.args)]
        matches: list = []
        seen: set = set()
        for dt, m, g in zip(pd.arg_types, md.args, arg_gs):
            r1 = self.ctx.rt(dt, m.call)
            if r1.kind != "rules" or g.kind != "rules":
                continue
            for tag, v, rg in collect_set(r1, g):
                key = (tag, v, rg.key)
                if key not in seen:
                    seen.add(key)
                    matches.append((tag, v, rg))
        return [subst_params(self.ctx, self.ctx.rt(dt, m.success), matches,
                             theta)
                for dt, m in zip(pd.arg_types, md.args)]

    # higher-order construct h = p(x1..xk) ------------------------------------------

    def _sched_eq_ho(self, lit: NEqHo, state: TiState):
        pd = self.program.preds.get(lit.pred)
        if pd is None:
            raise InternalError(f"closure over unknown predicate {lit.pred}")
        if not state[lit.lhs].is_new:
            return _Blocked("ho-already-bound", str(lit))
        theta = (self.program.call_thetas or {}).get(lit.lid, {})
        k = len(lit.args)
        arg_ts = [self.vt[a] for a in lit.args]
        full_ts = [subst_expr(dt, theta) for dt in pd.arg_types]
        cands = []
        for m_idx, md in enumerate(pd.modes):
            ok = True
            for j, a in enumerate(lit.args):
                if state[a].is_new or not G.lt(
                        state[a], self.ctx.rt(arg_ts[j], md.args[j].call)):
                    ok = False
                    break
            if ok:
                cands.append((m_idx, ()))
        if not cands:
            return _Blocked("ho-construct", str(lit))
        m_idx, _ = self._select_mode_ho(pd, full_ts, [c[0] for c in cands])
        md = pd.modes[m_idx]
        matches: list = []
        if pd.type_params:
            seen: set = set()
            for j, a in enumerate(lit.args):
                r1 = self.ctx.rt(pd.arg_types[j], md.args[j].call)
                if r1.kind != "rules":
                    continue
                for tag, v, rg in collect_set(r1, state[a]):
                    key = (tag, v, rg.key)
                    if key not in seen:
                        seen.add(key)
                        matches.append((tag, v, rg))
        children: list = []
        rules: dict = {}
        for j in range(k, pd.arity):
            tc = self.ctx.rt(full_ts[j], md.args[j].call)
            if pd.type_params:
                ts = subst_params(self.ctx, self.ctx.rt(pd.arg_types[j],
                                                        md.args[j].success),
                                  matches, theta)
            else:
                ts = self.ctx.rt(full_ts[j], md.args[j].success)
            if tc.is_top or ts.is_top:
                return _Blocked("ho-construct-top", str(lit))
            children.append(tc)
            children.append(ts)
        root = G.fresh_nt()
        child_roots = []
        for g in children:
            child_roots.append(g.root)
            G._copy_reachable(rules, g.rules, g.root)
        G._merge_rules(rules, root, G.ipred_ctor(pd.arity - k),
                       tuple(child_roots))
        built = TiGrammar("rules", root, rules)
        item = SLit("ho_construct", lhs=lit.lhs, pred=lit.pred,
                    mode_index=m_idx + 1, args=lit.args,
                    origin_lid=lit.lid, loc=lit.loc, entry=state,
                    closure_grammar=built)
        return _Progress([item], state.set((lit.lhs, built)))

    def _select_mode_ho(self, pd: PredDef, full_ts: list, ks: list):
        if len(ks) == 1:
            return ks[0], ()
        succ = {k: tuple(self.ctx.rt(t, m.success)
                         for t, m in zip(full_ts, pd.modes[k].args))
                for k in ks}
        calls = {k: tuple(self.ctx.rt(t, m.call)
                          for t, m in zip(full_ts, pd.modes[k].args))
                 for k in ks}

        def leq(sa, sb) -> bool:
            return all(G.lt(x, y) for x, y in zip(sa, sb))

        def minimal(kk, table):
            return [k for k in kk
                    if not any(k2 != k and leq(table[k2], table[k])
                               and not leq(table[k], table[k2])
                               for k2 in kk)]

        kk = minimal(ks, succ)
        kk = minimal(kk, calls)
        return min(kk), ()

    # higher-order calls call(h, x_{k+1}..x_n) ------------------------------------------

    def _sched_ho_call(self, lit: NHoCall, state: TiState):
        r = state[lit.closure]
        if r.is_new:
            return _Blocked("ho-call-new", str(lit))
        if r.kind != "rules":
            return _Blocked("ho-call-unready", str(lit))
        ip = r.root_ipred()
        if ip is None:
            if r.root_has(G.GPRED):
                return _Blocked("gpred-call", str(lit))
            return _Blocked("ho-call-unready", str(lit))
        ctor, children = ip
        n = ctor[1]
        if len(lit.args) != n:
            raise InternalError("higher-order call arity mismatch")
        call_slices = [G.subg(children[2 * j], r) for j in range(n)]
        succ_slices = [G.subg(children[2 * j + 1], r) for j in range(n)]
        fails = [j for j, a in enumerate(lit.args)
                 if not G.lt(state[a], call_slices[j])]
        if any(not call_slices[j].is_new for j in fails):
            return _Blocked("ho-call-args", str(lit))
        display: list = []
        updates: list = []
        inserts: list = []
        for j, a in enumerate(lit.args):
            if j in fails:
                fv = self.fresh_var("Fresh", self.vt[a])
                display.append(fv)
                updates.append((fv, G.conj(NEW_GRAMMAR, succ_slices[j])))
                inserts.append(NEqVV(fv, a, -2, lit.loc))
            else:
                display.append(a)
                updates.append((a, G.conj(state[a], succ_slices[j])))
        item = SLit("ho_call", lhs=lit.closure, args=tuple(display),
                    origin_lid=lit.lid, loc=lit.loc, entry=state)
        return _Progress([item], state.set(*updates), inserts)

    # init -------------------------------------------------------------------------------

    def _sched_init(self, var: str, state: TiState, loc, origin: int):
        t = self.vt[var]
        if not (self.ctx.is_solver_type(t) or isinstance(t, TVar)):
            return _Blocked("init-non-solver", var)
        if not state[var].is_new:
            return _Blocked("init-not-new", var)
        item = SLit("init", lhs=var, origin_lid=origin, loc=loc, entry=state)
        return _Progress([item], state.set((var, self.ctx.rt(t, OLD_INST))))


# ---------------------------------------------------------------------------
# Locked re-checking of an emitted procedure (input-output and call
# correctness witness)


def verify_procedure(proc: Procedure, checker: Checker) -> None:
    """Re-check an emitted procedure with its literal order, equality tags
    and procedure choices locked; raises InternalError on any violation of
    call or input-output correctness."""
    program = checker.program
    ctx = checker.ctx
    pd = program.preds[proc.pred]
    md = pd.modes[proc.mode_index - 1]
    vt = proc.var_types
    inits_done: set = set()

    def need(cond: bool, msg: str) -> None:
        if not cond:
            raise InternalError(f"{proc.name}: {msg}")

    def apply_lit(lit: SLit, state: TiState) -> TiState:
        state = state.extend_new(
            [v for v in _slit_vars(lit) if v not in state])
        if lit.kind == "true":
            return state
        if lit.kind == "fail":
            return state.map_all(BOTTOM)
        if lit.kind == "copy":
            need(state[lit.lhs].is_new != state[lit.rhs].is_new,
                 f"copy {lit.lhs} := {lit.rhs} needs exactly one new side")
            g = state[lit.rhs] if state[lit.lhs].is_new else state[lit.lhs]
            return state.set((lit.lhs, g), (lit.rhs, g))
        if lit.kind == "unify":
            if lit.const is not None:
                need(not state[lit.lhs].is_new,
                     "unify against constant on new")
                return state
            need(not state[lit.lhs].is_new and not state[lit.rhs].is_new,
                 f"unify {lit.lhs} == {lit.rhs} with a new side")
            m = G.conj(state[lit.lhs], state[lit.rhs])
            return state.set((lit.lhs, m), (lit.rhs, m))
        if lit.kind == "construct":
            need(state[lit.lhs].is_new, f"construct into bound {lit.lhs}")
            if lit.const is not None:
                return state.set(
                    (lit.lhs, ctx.base(TApp(lit.const.type_name), "ground")))
            gs = [state[a] for a in lit.args]
            need(all(not g.is_new for g in gs),
                 f"construct {lit.lhs} from new argument")
            root = G.fresh_nt()
            rules = {root: {G.f_ctor(lit.functor, len(lit.args)):
                            tuple(g.root for g in gs)}}
            for g in gs:
                G._copy_reachable(rules, g.rules, g.root)
            return state.set((lit.lhs, TiGrammar("rules", root, rules)))
        if lit.kind == "deconstruct":
            r = state[lit.lhs]
            need(not r.is_new, f"deconstruct of new {lit.lhs}")
            fc = G.f_ctor(lit.functor, len(lit.args))
            prods = r.root_prods()
            if fc not in prods:
                return state.map_all(BOTTOM)
            children = prods[fc]
            updates = []
            for a, c in zip(lit.args, children):
                need(state[a].is_new, f"deconstruct output {a} is not new")
                updates.append((a, G.subg(c, r)))
            root = G.fresh_nt()
            rules = {root: {fc: children}}
            for c in children:
                G._copy_reachable(rules, r.rules, c)
            updates.append((lit.lhs, TiGrammar("rules", root, rules)))
            return state.set(*updates)
        if lit.kind == "init":
            need(lit.lhs not in inits_done,
                 f"variable {lit.lhs} initialized twice")
            inits_done.add(lit.lhs)
            need(state[lit.lhs].is_new, f"init of bound {lit.lhs}")
            t = vt[lit.lhs]
            need(ctx.is_solver_type(t) or isinstance(t, TVar),
                 f"init of non-solver variable {lit.lhs}")
            return state.set((lit.lhs, ctx.rt(t, OLD_INST)))
        if lit.kind == "call":
            callee = program.preds[lit.pred]
            cmd = callee.modes[lit.mode_index - 1]
            arg_ts = [vt[a] for a in lit.args]
            for a, t, m in zip(lit.args, arg_ts, cmd.args):
                need(G.lt(state[a], ctx.rt(t, m.call)),
                     f"call argument {a} not within {m.call}")
            # re-apply the polymorphic success improvement the checker used
            theta = (program.call_thetas or {}).get(lit.origin_lid, {})
            ps = checker._success_grammars(
                callee, theta, cmd, [state[a] for a in lit.args], arg_ts)
            return state.set(*[(a, G.conj(state[a], g))
                               for a, g in zip(lit.args, ps)])
        if lit.kind == "ho_construct":
            need(state[lit.lhs].is_new, "closure target not new")
            callee = program.preds[lit.pred]
            cmd = callee.modes[lit.mode_index - 1]
            for j, a in enumerate(lit.args):
                need(not state[a].is_new, "closure over new argument")
                need(G.lt(state[a], ctx.rt(vt[a], cmd.args[j].call)),
                     f"closure argument {a} too weak")
            need(lit.closure_grammar is not None,
                 "closure construct lacks its recorded grammar")
            return state.set((lit.lhs, lit.closure_grammar))
        if lit.kind == "ho_call":
            r = state[lit.lhs]
            ip = r.root_ipred()
            need(ip is not None, "higher-order call on non-closure")
            _, children = ip
            updates = []
            for j, a in enumerate(lit.args):
                cs = G.subg(children[2 * j], r)
                need(G.lt(state[a], cs), f"ho call argument {a} too weak")
                updates.append(
                    (a, G.conj(state[a], G.subg(children[2 * j + 1], r))))
            return state.set(*updates)
        raise InternalError(f"unknown scheduled literal kind {lit.kind}")

    def walk(node, state: TiState) -> TiState:
        if isinstance(node, SConj):
            for item in node.items:
                state = walk(item, state)
            return state
        if isinstance(node, SDisj):
            dom = state.domain
            outs = [walk(br, state).restrict(dom) for br in node.branches]
            joined = reduce(state_disj, outs)
            need(not joined.top_vars(), "join of branches reached top")
            return joined
        if isinstance(node, SIte):
            dom = state.domain
            sc = walk(node.cond, state)
            st = walk(node.then, sc).restrict(dom)
            se = walk(node.els, state).restrict(dom)
            joined = state_disj(st, se)
            need(not joined.top_vars(), "join of if-then-else reached top")
            return joined
        return apply_lit(node, state)

    state = TiState({v: ctx.rt(t, m.call) for v, t, m in
                     zip(pd.head_vars, pd.arg_types, md.args)})
    final = walk(proc.body, state)
    for v, t, m in zip(pd.head_vars, pd.arg_types, md.args):
        need(G.lt(final[v], ctx.rt(t, m.success)),
             f"final instantiation of {v} exceeds declared success")


def _slit_vars(lit: SLit) -> list:
    out = []
    for v in (lit.lhs, lit.rhs):
        if v is not None:
            out.append(v)
    out.extend(lit.args)
    return out
