"""Frontend passes: equivalence expansion, clause normalization and
per-clause type assignment.

After `load_program(source)` a program satisfies:

  * no type/inst/mode equivalence names remain anywhere,
  * every predicate has one disjunctive body whose literals are equalities
    over distinct variables, first-order calls, higher-order constructs or
    higher-order calls,
  * every clause variable has exactly one type and every call site carries
    the substitution from the callee's declared types to the call-site
    types.
"""

from __future__ import annotations

import itertools
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

from .ast import (
    BUILTIN_TYPES,
    CONS,
    CallG,
    Clause,
    Conj,
    Const,
    Diagnostic,
    Disj,
    Equiv,
    FailG,
    HoCallG,
    InstDef,
    Ite,
    Mode,
    ModeDecl,
    MiniHalError,
    NCall,
    NEqHo,
    NEqVF,
    NEqVV,
    NFail,
    NHoCall,
    NTrue,
    PredDef,
    PredInst,
    PredType,
    Program,
    SrcLoc,
    Struct,
    TApp,
    TVar,
    TrueG,
    TypeDef,
    Unif,
    Var,
    expr_vars,
    goal_literals,
    parse_error,
    subst_expr,
    type_error,
)
from .parser import parse_program
from .tigrammar import TiContext

GROUND = TApp("ground")
OLD = TApp("old")
NEW = TApp("new")

IN = Mode(GROUND, GROUND)
OUT = Mode(NEW, GROUND)

# Base-mode macros; Fig.-1 style files may redefine in/1 and out/1, user
# definitions silently override these.
PRELUDE_MODE_MACROS = [
    Equiv("mode", "oo", (), Mode(OLD, OLD)),
    Equiv("mode", "no", (), Mode(NEW, OLD)),
    Equiv("mode", "og", (), Mode(OLD, GROUND)),
    Equiv("mode", "gg", (), Mode(GROUND, GROUND)),
    Equiv("mode", "ng", (), Mode(NEW, GROUND)),
    Equiv("mode", "in", (), IN),
    Equiv("mode", "out", (), OUT),
    Equiv("mode", "in", ("I",), Mode(TVar("I"), TVar("I"))),
    Equiv("mode", "out", ("I",), Mode(NEW, TVar("I"))),
]

INT = TApp("int")


def _builtin(name, arg_types, modes):
    return PredDef(
        name=name,
        arg_types=tuple(arg_types),
        modes=tuple(ModeDecl(tuple(ms), det) for ms, det in modes),
        clauses=(),
    )


BUILTIN_PREDS: Dict[str, PredDef] = {
    "+": _builtin("+", (INT, INT, INT), [
        ((IN, IN, OUT), "det"),
        ((IN, OUT, IN), "det"),
        ((OUT, IN, IN), "det"),
    ]),
    "-": _builtin("-", (INT, INT, INT), [
        ((IN, IN, OUT), "det"),
        ((IN, OUT, IN), "det"),
        ((OUT, IN, IN), "det"),
    ]),
    ">": _builtin(">", (INT, INT), [((IN, IN), "semidet")]),
    "<": _builtin("<", (INT, INT), [((IN, IN), "semidet")]),
    ">=": _builtin(">=", (INT, INT), [((IN, IN), "semidet")]),
    "=<": _builtin("=<", (INT, INT), [((IN, IN), "semidet")]),
    "init": _builtin("init", (TVar("T"),), [((Mode(NEW, OLD),), "det")]),
}


def is_builtin_pred(name: str) -> bool:
    return name in BUILTIN_PREDS


# ---------------------------------------------------------------------------
# Equivalence expansion


class _Expander:
    def __init__(self, program: Program):
        self.macros: Dict[tuple, Equiv] = {}
        for eq in PRELUDE_MODE_MACROS:
            self.macros[("mode", eq.name, eq.arity)] = eq
        for eq in program.equivs:
            self.macros[(eq.kind, eq.name, eq.arity)] = eq
        self.program = program

    def _macro(self, kind: str, name: str, arity: int) -> Optional[Equiv]:
        return self.macros.get((kind, name, arity))

    def expand_type(self, t, stack: tuple = ()):
        if isinstance(t, TVar):
            return t
        if isinstance(t, PredType):
            return PredType(tuple(self.expand_type(a, stack) for a in t.args))
        mac = self._macro("type", t.name, len(t.args))
        if mac is not None:
            key = ("type", t.name, len(t.args))
            if key in stack:
                raise parse_error(
                    "circular type equivalences are not allowed", mac.loc)
            theta = dict(zip(mac.params,
                             [self.expand_type(a, stack) for a in t.args]))
            return self.expand_type(subst_expr(mac.body, theta),
                                    stack + (key,))
        return TApp(t.name, tuple(self.expand_type(a, stack) for a in t.args))

    def expand_inst(self, i, stack: tuple = ()):
        if isinstance(i, TVar):
            return i
        if isinstance(i, PredInst):
            return PredInst(
                tuple(self.expand_mode_arg(m, stack) for m in i.modes),
                i.determinism)
        mac = self._macro("inst", i.name, len(i.args))
        if mac is not None:
            key = ("inst", i.name, len(i.args))
            if key in stack:
                raise parse_error(
                    "circular instantiation equivalences are not allowed",
                    mac.loc)
            theta = dict(zip(mac.params,
                             [self.expand_inst(a, stack) for a in i.args]))
            return self.expand_inst(subst_expr(mac.body, theta),
                                    stack + (key,))
        return TApp(i.name, tuple(self.expand_inst(a, stack) for a in i.args))

    def expand_mode_arg(self, m, stack: tuple = ()) -> Mode:
        """Resolve a mode-declaration argument to an expanded `c -> s`."""
        if isinstance(m, Mode):
            return Mode(self.expand_inst(m.call, stack),
                        self.expand_inst(m.success, stack))
        if isinstance(m, TVar):
            raise parse_error(f"mode parameter {m} where a mode was expected")
        if isinstance(m, PredInst):
            raise parse_error(
                "higher-order instantiation used directly as a mode")
        mac = self._macro("mode", m.name, len(m.args))
        if mac is None:
            raise parse_error(
                f"{m} is not a mode (no modedef {m.name}/{len(m.args)})")
        key = ("mode", m.name, len(m.args))
        if key in stack:
            raise parse_error("circular mode equivalences are not allowed",
                              mac.loc)
        theta = dict(zip(mac.params,
                         [self.expand_inst(a, stack) for a in m.args]))
        return self.expand_mode_arg(subst_expr(mac.body, theta),
                                    stack + (key,))


def _check_no_new(i, loc=None, top: bool = False) -> None:
    """`new` may only occur as a whole call/success instantiation, and, for
    higher-order instantiations, at the outermost argument positions."""
    if isinstance(i, TVar):
        return
    if isinstance(i, PredInst):
        for m in i.modes:
            _check_no_new(m.call, loc, top=True)
            _check_no_new(m.success, loc, top=True)
        return
    if i.name == "new" and not i.args:
        if not top:
            raise parse_error("new nested in instantiation", loc)
        return
    for a in i.args:
        _check_no_new(a, loc, top=False)


def _check_ground_inst(i, loc=None) -> None:
    if expr_vars(i):
        raise parse_error(
            f"instantiation {i} in a mode declaration is not ground", loc)


def expand_equivalences(program: Program) -> Program:
    """Replace every type/inst/mode equivalence by its definition and
    validate the resulting definitions."""
    ex = _Expander(program)

    typedefs = {}
    for key, td in program.typedefs.items():
        alts = tuple(
            (ctor, tuple(ex.expand_type(a) for a in args))
            for ctor, args in td.alts)
        for ctor, args in alts:
            for a in args:
                extra = expr_vars(a) - set(td.params)
                if extra:
                    raise parse_error(
                        f"type definition {td.name}/{td.arity} uses unknown "
                        f"parameter {sorted(extra)[0]}", td.loc)
        typedefs[key] = replace(td, alts=alts)

    instdefs = {}
    for key, idf in program.instdefs.items():
        alts = tuple(
            (ctor, tuple(ex.expand_inst(a) for a in args))
            for ctor, args in idf.alts)
        for ctor, args in alts:
            for a in args:
                _check_no_new(a, idf.loc, top=False)
                extra = expr_vars(a) - set(idf.params)
                if extra:
                    raise parse_error(
                        f"instantiation definition {idf.name}/{idf.arity} "
                        f"uses unknown parameter {sorted(extra)[0]}", idf.loc)
        instdefs[key] = replace(idf, alts=alts)

    preds = {}
    for name, pd in program.preds.items():
        arg_types = tuple(ex.expand_type(t) for t in pd.arg_types)
        for t in arg_types:
            _check_types_defined(t, typedefs, pd.loc)
        modes = []
        for md in pd.modes:
            args = tuple(ex.expand_mode_arg(m) for m in md.args)
            for m in args:
                _check_ground_inst(m.call, md.loc)
                _check_ground_inst(m.success, md.loc)
                _check_no_new(m.call, md.loc, top=True)
                _check_no_new(m.success, md.loc, top=True)
            modes.append(replace(md, args=args))
        preds[name] = replace(pd, arg_types=arg_types, modes=tuple(modes))

    out = Program(typedefs=typedefs, instdefs=instdefs, equivs=(),
                  preds=preds, pred_order=program.pred_order)

    # regularity of every type definition (catches erk-style definitions)
    ctx = TiContext(typedefs, instdefs)
    for (tname, arity), td in typedefs.items():
        head = TApp(tname, tuple(TVar(p) for p in td.params))
        ctx.grammar_of_type(head)
    return out


def _check_types_defined(t, typedefs, loc) -> None:
    if isinstance(t, TVar):
        return
    if isinstance(t, PredType):
        for a in t.args:
            _check_types_defined(a, typedefs, loc)
        return
    if t.name in BUILTIN_TYPES and not t.args:
        return
    if (t.name, len(t.args)) not in typedefs:
        raise parse_error(
            f"undefined type constructor {t.name}/{len(t.args)}", loc)
    for a in t.args:
        _check_types_defined(a, typedefs, loc)


# ---------------------------------------------------------------------------
# Normalization


class _Normalizer:
    """Rewrites one predicate's clauses into a single disjunctive body of
    flat literals over distinct variables."""

    def __init__(self, pred: PredDef, ctors: set, pred_names: dict,
                 lid_counter):
        self.pred = pred
        self.ctors = ctors  # {(name, arity)}
        self.pred_names = pred_names  # name -> arity
        self.lid_counter = lid_counter
        self.clause_index = 0
        self.fresh_counter = 0
        self.used_names: set = set()

    def fresh(self) -> str:
        while True:
            name = f"V_{self.clause_index + 1}_{self.fresh_counter}"
            self.fresh_counter += 1
            if name not in self.used_names:
                self.used_names.add(name)
                return name

    def lid(self) -> int:
        return next(self.lid_counter)

    # -- head canonicalization -------------------------------------------------

    def canonical_head(self) -> tuple:
        clauses = self.pred.clauses
        names = []
        taken = set()
        for cl in clauses:
            taken |= _clause_var_names(cl)
        for j in range(self.pred.arity):
            args_j = [cl.head_args[j] for cl in clauses]
            if all(isinstance(a, Var) for a in args_j) and \
                    len({a.name for a in args_j}) == 1 and \
                    args_j[0].name not in names:
                names.append(args_j[0].name)
                continue
            base = f"A{j + 1}"
            while base in taken or base in names:
                base += "_"
            names.append(base)
        return tuple(names)

    def normalize_pred(self) -> PredDef:
        head_vars = self.canonical_head()
        disjuncts = []
        used_locals: set = set()
        for idx, cl in enumerate(self.pred.clauses):
            self.clause_index = idx
            cl = self._rename_clause_locals(cl, head_vars, used_locals)
            self.used_names = _clause_var_names(cl) | set(head_vars)
            lits: list = []
            for j, arg in enumerate(cl.head_args):
                if isinstance(arg, Var) and arg.name == head_vars[j]:
                    continue
                lits.extend(self._bind(head_vars[j], arg))
            body_goal = self._normalize_goal(cl.body)
            if isinstance(body_goal, Conj):
                lits.extend(body_goal.goals)
            else:
                lits.append(body_goal)
            disjuncts.append(self._tidy_conj(lits))
        body = disjuncts[0] if len(disjuncts) == 1 else Disj(tuple(disjuncts))
        return replace(self.pred, head_vars=head_vars, body=body)

    def _tidy_conj(self, lits: list) -> Conj:
        """Drop no-op `true` literals unless they are all there is."""
        kept = [l for l in lits if not isinstance(l, NTrue)]
        if not kept:
            kept = [lits[-1]] if lits else [NTrue(self.lid())]
        return Conj(tuple(kept))

    def _rename_clause_locals(self, cl: Clause, head_vars: tuple,
                              used_locals: set) -> Clause:
        own = _clause_var_names(cl)
        locals_ = set()
        for v in own:
            at_position = any(
                isinstance(a, Var) and a.name == v and head_vars[j] == v
                for j, a in enumerate(cl.head_args))
            if not at_position:
                locals_.add(v)
        mapping = {}
        for v in sorted(locals_):
            if v in used_locals or (v in head_vars and v in locals_):
                nv = f"{v}_c{self.clause_index + 1}"
                while nv in own or nv in used_locals:
                    nv += "_"
                mapping[v] = nv
        used_locals.update(mapping.get(v, v) for v in locals_)
        if not mapping:
            return cl
        return Clause(
            tuple(_rename_term(a, mapping) for a in cl.head_args),
            _rename_goal(cl.body, mapping), cl.loc)

    # -- goal and term flattening ---------------------------------------------

    def _normalize_goal(self, g):
        if isinstance(g, Conj):
            flat: list = []
            for sub in g.goals:
                item = self._normalize_goal(sub)
                if isinstance(item, Conj):
                    flat.extend(item.goals)
                else:
                    flat.append(item)
            return self._tidy_conj(flat)
        if isinstance(g, Disj):
            return Disj(tuple(self._as_conj(self._normalize_goal(sub))
                              for sub in g.goals))
        if isinstance(g, Ite):
            return Ite(self._as_conj(self._normalize_goal(g.cond)),
                       self._as_conj(self._normalize_goal(g.then)),
                       self._as_conj(self._normalize_goal(g.els)))
        if isinstance(g, TrueG):
            return NTrue(self.lid(), g.loc)
        if isinstance(g, FailG):
            return NFail(self.lid(), g.loc)
        if isinstance(g, Unif):
            lits = self._normalize_unif(g)
            return lits[0] if len(lits) == 1 else Conj(tuple(lits))
        if isinstance(g, CallG):
            return self._normalize_call(g)
        if isinstance(g, HoCallG):
            return self._normalize_hocall(g)
        raise TypeError(f"unexpected goal {g!r}")

    def _as_conj(self, g):
        if isinstance(g, Conj):
            return g
        return Conj((g,))

    def _flatten(self, term, pre: list) -> str:
        """Reduce a term to a variable, appending defining equalities."""
        if isinstance(term, Var):
            return term.name
        v = self.fresh()
        pre.extend(self._bind(v, term))
        return v

    def _bind(self, var: str, term) -> list:
        """Literals equating `var` with `term` (term flattened)."""
        if isinstance(term, Var):
            return [NEqVV(var, term.name, self.lid(), term.loc)]
        if isinstance(term, Const):
            return [NEqVF(var, str(term.value), (), self.lid(), term.loc,
                          const=term)]
        pre: list = []
        f, args = term.functor, term.args
        argvars = [self._flatten(a, pre) for a in args]
        post: list = []
        argvars = self._distinct_args(argvars, {var}, post)
        if (f, len(args)) not in self.ctors and f in self.pred_names \
                and len(args) <= self.pred_names[f]:
            lit = NEqHo(var, f, tuple(argvars), self.lid(), term.loc)
        else:
            lit = NEqVF(var, f, tuple(argvars), self.lid(), term.loc)
        return pre + [lit] + post

    def _distinct_args(self, argvars: list, forbidden: set,
                       sink: list) -> list:
        """Replace repeated (or forbidden) argument variables with fresh
        ones, appending the recovery equations to `sink`."""
        seen = set(forbidden)
        out = []
        for v in argvars:
            if v in seen:
                nv = self.fresh()
                sink.append(NEqVV(nv, v, self.lid()))
                out.append(nv)
            else:
                seen.add(v)
                out.append(v)
        return out

    def _normalize_unif(self, g: Unif) -> list:
        lhs, rhs = g.lhs, g.rhs
        if not isinstance(lhs, Var) and isinstance(rhs, Var):
            lhs, rhs = rhs, lhs
        if isinstance(lhs, Var):
            if isinstance(rhs, Var):
                if lhs.name == rhs.name:
                    return [NTrue(self.lid(), g.loc)]
                return [NEqVV(lhs.name, rhs.name, self.lid(), g.loc)]
            return self._bind(lhs.name, rhs)
        # both sides are non-variables
        v = self.fresh()
        return self._bind(v, lhs) + self._bind(v, rhs)

    def _normalize_call(self, g: CallG) -> Conj:
        pre: list = []
        argvars = [self._flatten(a, pre) for a in g.args]
        post: list = []
        argvars = self._distinct_args(argvars, set(), post)
        call = NCall(g.name, tuple(argvars), self.lid(), g.loc)
        return Conj(tuple(pre + [call] + post))

    def _normalize_hocall(self, g: HoCallG) -> Conj:
        pre: list = []
        closure = self._flatten(g.closure, pre)
        argvars = [self._flatten(a, pre) for a in g.args]
        post: list = []
        argvars = self._distinct_args(argvars, {closure}, post)
        call = NHoCall(closure, tuple(argvars), self.lid(), g.loc)
        return Conj(tuple(pre + [call] + post))


def _clause_var_names(cl: Clause) -> set:
    out: set = set()
    for a in cl.head_args:
        _term_vars(a, out)
    _goal_term_vars(cl.body, out)
    return out


def _term_vars(t, out: set) -> None:
    if isinstance(t, Var):
        out.add(t.name)
    elif isinstance(t, Struct):
        for a in t.args:
            _term_vars(a, out)


def _goal_term_vars(g, out: set) -> None:
    if isinstance(g, (Conj, Disj)):
        for sub in g.goals:
            _goal_term_vars(sub, out)
    elif isinstance(g, Ite):
        for sub in (g.cond, g.then, g.els):
            _goal_term_vars(sub, out)
    elif isinstance(g, Unif):
        _term_vars(g.lhs, out)
        _term_vars(g.rhs, out)
    elif isinstance(g, CallG):
        for a in g.args:
            _term_vars(a, out)
    elif isinstance(g, HoCallG):
        _term_vars(g.closure, out)
        for a in g.args:
            _term_vars(a, out)


def _rename_term(t, mapping: dict):
    if isinstance(t, Var):
        return Var(mapping.get(t.name, t.name), t.loc)
    if isinstance(t, Struct):
        return Struct(t.functor,
                      tuple(_rename_term(a, mapping) for a in t.args), t.loc)
    return t


def _rename_goal(g, mapping: dict):
    if isinstance(g, Conj):
        return Conj(tuple(_rename_goal(s, mapping) for s in g.goals))
    if isinstance(g, Disj):
        return Disj(tuple(_rename_goal(s, mapping) for s in g.goals))
    if isinstance(g, Ite):
        return Ite(_rename_goal(g.cond, mapping),
                   _rename_goal(g.then, mapping),
                   _rename_goal(g.els, mapping))
    if isinstance(g, Unif):
        return Unif(_rename_term(g.lhs, mapping),
                    _rename_term(g.rhs, mapping), g.loc)
    if isinstance(g, CallG):
        return CallG(g.name, tuple(_rename_term(a, mapping) for a in g.args),
                     g.loc)
    if isinstance(g, HoCallG):
        return HoCallG(_rename_term(g.closure, mapping),
                       tuple(_rename_term(a, mapping) for a in g.args), g.loc)
    return g


def normalize(program: Program) -> Program:
    """Flatten equalities, merge clauses into one disjunctive body per
    predicate and make all literal arguments distinct variables."""
    ctors = set()
    for td in program.typedefs.values():
        for ctor, args in td.alts:
            ctors.add((ctor, len(args)))
    pred_names = {name: pd.arity for name, pd in program.preds.items()}
    for name, pd in BUILTIN_PREDS.items():
        pred_names.setdefault(name, pd.arity)
    lid_counter = itertools.count()
    preds = {}
    for name, pd in program.preds.items():
        if not pd.clauses:
            preds[name] = pd
            continue
        preds[name] = _Normalizer(pd, ctors, pred_names,
                                  lid_counter).normalize_pred()
    with_builtins = dict(preds)
    for name, pd in BUILTIN_PREDS.items():
        with_builtins.setdefault(name, pd)
    return program.with_preds(with_builtins)


# ---------------------------------------------------------------------------
# Type assignment


class _TypeSolver:
    """Per-predicate term unification of type expressions. The predicate's
    own declared parameters are rigid; call sites get fresh copies of the
    callee's parameters."""

    def __init__(self, program: Program, pred: PredDef):
        self.program = program
        self.pred = pred
        self.bindings: Dict[str, object] = {}
        self.var_types: Dict[str, object] = {}
        self.counter = itertools.count()
        self.thetas: Dict[int, dict] = {}
        self.ctor_index: Dict[tuple, list] = {}
        for td in program.typedefs.values():
            for ctor, args in td.alts:
                self.ctor_index.setdefault((ctor, len(args)), []).append(td)

    def uvar(self):
        return TVar(f"?{next(self.counter)}")

    def is_uvar(self, t) -> bool:
        return isinstance(t, TVar) and t.name.startswith("?")

    def resolve(self, t):
        while self.is_uvar(t) and t.name in self.bindings:
            t = self.bindings[t.name]
        return t

    def deep(self, t):
        t = self.resolve(t)
        if isinstance(t, TApp):
            return TApp(t.name, tuple(self.deep(a) for a in t.args))
        if isinstance(t, PredType):
            return PredType(tuple(self.deep(a) for a in t.args))
        return t

    def _occurs(self, name: str, t) -> bool:
        t = self.resolve(t)
        if isinstance(t, TVar):
            return t.name == name
        if isinstance(t, (TApp, PredType)):
            return any(self._occurs(name, a) for a in t.args)
        return False

    def unify(self, t1, t2, loc=None) -> None:
        t1, t2 = self.resolve(t1), self.resolve(t2)
        if self.is_uvar(t1):
            if self.is_uvar(t2) and t1.name == t2.name:
                return
            if self._occurs(t1.name, t2):
                raise type_error(f"cannot construct infinite type {t2}", loc)
            self.bindings[t1.name] = t2
            return
        if self.is_uvar(t2):
            self.unify(t2, t1, loc)
            return
        if isinstance(t1, TVar) and isinstance(t2, TVar):
            if t1.name != t2.name:
                raise type_error(
                    f"type parameters {t1} and {t2} do not match", loc)
            return
        if isinstance(t1, TApp) and isinstance(t2, TApp) \
                and t1.name == t2.name and len(t1.args) == len(t2.args):
            for a, b in zip(t1.args, t2.args):
                self.unify(a, b, loc)
            return
        if isinstance(t1, PredType) and isinstance(t2, PredType) \
                and len(t1.args) == len(t2.args):
            for a, b in zip(t1.args, t2.args):
                self.unify(a, b, loc)
            return
        raise type_error(f"type mismatch: {self.deep(t1)} vs {self.deep(t2)}",
                         loc)

    def type_of(self, var: str):
        if var not in self.var_types:
            self.var_types[var] = self.uvar()
        return self.var_types[var]

    # -- constraint generation ---------------------------------------------------

    def run(self) -> Tuple[dict, dict]:
        for v, t in zip(self.pred.head_vars, self.pred.arg_types):
            self.var_types[v] = t
        literals = goal_literals(self.pred.body)
        deferred: List = []
        for lit in literals:
            self.constrain(lit, deferred)
        # resolve constructor-overloaded equalities to a fixpoint
        progress = True
        while deferred and progress:
            progress = False
            remaining = []
            for lit in deferred:
                if self._try_eqvf(lit):
                    progress = True
                else:
                    remaining.append(lit)
            deferred = remaining
        for lit in deferred:
            cands = self.ctor_index.get((lit.functor, len(lit.args)), [])
            names = ", ".join(sorted(td.name for td in cands))
            raise type_error(
                f"ambiguous constructor {lit.functor}/{len(lit.args)} "
                f"(could belong to: {names})", lit.loc)
        var_types = {}
        for v in sorted(self.var_types):
            t = self.deep(self.var_types[v])
            if _has_uvar(t):
                raise type_error(
                    f"type of {v} is not determined by the clause "
                    f"(got {t}); add context", None)
            var_types[v] = t
        thetas = {lid: {p: self.deep(t) for p, t in theta.items()}
                  for lid, theta in self.thetas.items()}
        for lid, theta in thetas.items():
            for p, t in theta.items():
                if _has_uvar(t):
                    raise type_error(
                        f"polymorphic call does not determine parameter {p}",
                        None)
        return var_types, thetas

    def constrain(self, lit, deferred: list) -> None:
        if isinstance(lit, NEqVV):
            self.unify(self.type_of(lit.lhs), self.type_of(lit.rhs), lit.loc)
        elif isinstance(lit, NEqVF):
            if lit.const is not None:
                self.unify(self.type_of(lit.lhs), TApp(lit.const.type_name),
                           lit.loc)
            elif not self._try_eqvf(lit):
                deferred.append(lit)
        elif isinstance(lit, NEqHo):
            self._constrain_ho_eq(lit)
        elif isinstance(lit, NCall):
            self._constrain_call(lit)
        elif isinstance(lit, NHoCall):
            h_type = PredType(tuple(self.type_of(a) for a in lit.args))
            self.unify(self.type_of(lit.closure), h_type, lit.loc)

    def _callee(self, name: str, loc) -> PredDef:
        pd = self.program.preds.get(name)
        if pd is None:
            raise type_error(f"call to undeclared predicate {name}", loc)
        return pd

    def _fresh_decl(self, pd: PredDef, lid: int) -> list:
        theta = {p: self.uvar() for p in pd.type_params}
        self.thetas[lid] = theta
        return [subst_expr(t, theta) for t in pd.arg_types]

    def _constrain_call(self, lit: NCall) -> None:
        pd = self._callee(lit.pred, lit.loc)
        if len(lit.args) != pd.arity:
            raise type_error(
                f"{lit.pred}/{pd.arity} called with {len(lit.args)} "
                f"arguments", lit.loc)
        dts = self._fresh_decl(pd, lit.lid)
        for a, dt in zip(lit.args, dts):
            self.unify(self.type_of(a), dt, lit.loc)

    def _constrain_ho_eq(self, lit: NEqHo) -> None:
        pd = self._callee(lit.pred, lit.loc)
        k = len(lit.args)
        if k > pd.arity:
            raise type_error(
                f"closure over {lit.pred}/{pd.arity} given {k} arguments",
                lit.loc)
        dts = self._fresh_decl(pd, lit.lid)
        for a, dt in zip(lit.args, dts[:k]):
            self.unify(self.type_of(a), dt, lit.loc)
        self.unify(self.type_of(lit.lhs), PredType(tuple(dts[k:])), lit.loc)

    def _try_eqvf(self, lit: NEqVF) -> bool:
        t = self.resolve(self.type_of(lit.lhs))
        key = (lit.functor, len(lit.args))
        if self.is_uvar(t):
            cands = self.ctor_index.get(key, [])
            if not cands:
                raise type_error(
                    f"unknown constructor {lit.functor}/{len(lit.args)}",
                    lit.loc)
            if len(cands) > 1:
                return False
            td = cands[0]
            inst = TApp(td.name, tuple(self.uvar() for _ in td.params))
            self.unify(t, inst, lit.loc)
            t = self.resolve(t)
        if isinstance(t, TVar):
            raise type_error(
                f"cannot equate parameter-typed variable {lit.lhs} with a "
                f"structured term", lit.loc)
        if isinstance(t, PredType):
            raise type_error(
                f"cannot deconstruct higher-order variable {lit.lhs}",
                lit.loc)
        td = self.program.typedefs.get((t.name, len(t.args)))
        if td is None:
            raise type_error(
                f"type {t} has no constructors (builtin or undefined)",
                lit.loc)
        for ctor, args in td.alts:
            if ctor == lit.functor and len(args) == len(lit.args):
                theta = dict(zip(td.params, t.args))
                for a, ft in zip(lit.args, args):
                    self.unify(self.type_of(a), subst_expr(ft, theta),
                               lit.loc)
                return True
        raise type_error(
            f"type {t} has no constructor {lit.functor}/{len(lit.args)}",
            lit.loc)


def _has_uvar(t) -> bool:
    if isinstance(t, TVar):
        return t.name.startswith("?")
    if isinstance(t, (TApp, PredType)):
        return any(_has_uvar(a) for a in t.args)
    return False


def assign_types(program: Program) -> Program:
    """Give every clause variable a unique type and record call-site type
    substitutions for polymorphic analysis."""
    preds = {}
    thetas: Dict[int, dict] = {}
    for name, pd in program.preds.items():
        if pd.body is None:
            preds[name] = pd
            continue
        solver = _TypeSolver(program, pd)
        var_types, pred_thetas = solver.run()
        thetas.update(pred_thetas)
        preds[name] = replace(pd, var_types=var_types)
    return replace(program.with_preds(preds), call_thetas=thetas)


def load_program(source: str) -> Program:
    """parse -> expand -> normalize -> assign types."""
    return assign_types(normalize(expand_equivalences(parse_program(source))))
