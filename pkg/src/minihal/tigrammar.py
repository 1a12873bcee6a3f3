"""Construction of type-instantiation grammars.

`TiContext` wraps the type and instantiation definition tables of a program
and builds:

  * `grammar_of_type(t)` - the plain tree grammar of a type expression
    (also the regularity check: expansion past a budget raises),
  * `base(t, b)` - the ti-grammar for a base instantiation,
  * `rt(t, i)`  - the ti-grammar for an arbitrary ground instantiation,

plus `TiState`, the per-program-point map from variables to ti-grammars.

Non-terminals produced here are canonically named `ti(<type>,<inst>)` using
the printed form of the expressions, which is what makes the visited-set
checks in the construction algorithms fire on re-entry.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from .ast import (
    BUILTIN_TYPES,
    Diagnostic,
    InstDef,
    InstExpr,
    Mode,
    MiniHalError,
    PredInst,
    PredType,
    TApp,
    TVar,
    TypeDef,
    TypeExpr,
    is_base_inst,
    subst_expr,
)
from . import grammar as G
from .grammar import BOTTOM, NEW_GRAMMAR, NEW_NT, TOP, TiGrammar

EXPANSION_BUDGET = 10_000
# non-regular definitions grow the expression terms without bound; cap the
# structural depth well before Python recursion becomes a problem
EXPR_DEPTH_LIMIT = 64


def expr_depth(e) -> int:
    best = 1
    stack = [(e, 1)]
    while stack:
        t, d = stack.pop()
        best = max(best, d)
        if isinstance(t, (TApp, PredType)):
            for a in t.args:
                stack.append((a, d + 1))
        elif isinstance(t, PredInst):
            for m in t.modes:
                stack.append((m.call, d + 1))
                stack.append((m.success, d + 1))
    return best


def ti_name(t, i) -> tuple:
    return ("ti", str(t), str(i))


def ty_name(t) -> tuple:
    return ("ty", str(t))


class _TopTi(Exception):
    pass


class NonRegularError(MiniHalError):
    def __init__(self, expr, loc=None):
        super().__init__(Diagnostic(
            "E103", f"non-regular definition: expansion of {expr} does not terminate",
            loc))


def _shallow_str(t, depth: int = 3) -> str:
    """Print the first few levels of a (possibly enormous) expression."""
    if depth == 0:
        return "..."
    if isinstance(t, (TApp, PredType)):
        name = t.name if isinstance(t, TApp) else "pred"
        if not t.args:
            return name
        return name + "(" + ", ".join(_shallow_str(a, depth - 1)
                                      for a in t.args) + ")"
    return str(t)


class TiContext:
    """Definition tables plus construction caches and lint sink."""

    def __init__(self, typedefs: Dict[tuple, TypeDef],
                 instdefs: Dict[tuple, InstDef]):
        self.typedefs = typedefs
        self.instdefs = instdefs
        self.lints: List[Diagnostic] = []
        self._rt_cache: Dict[tuple, TiGrammar] = {}
        self._type_cache: Dict[str, TiGrammar] = {}

    # -- definition lookups ---------------------------------------------------

    def is_solver_type(self, t) -> bool:
        if isinstance(t, TApp) and t.name not in BUILTIN_TYPES:
            td = self.typedefs.get((t.name, len(t.args)))
            return td is not None and td.is_solver
        return False

    def is_builtin_type(self, t) -> bool:
        return isinstance(t, TApp) and t.name in BUILTIN_TYPES and not t.args

    def type_rules(self, t) -> Optional[List[Tuple[str, tuple]]]:
        """rules(t): (constructor, child types) alternatives, instantiated.
        None for parameters, builtins and pred types (no rules)."""
        if not isinstance(t, TApp) or self.is_builtin_type(t):
            return None
        if expr_depth(t) > EXPR_DEPTH_LIMIT:
            raise NonRegularError(_shallow_str(t))
        td = self.typedefs.get((t.name, len(t.args)))
        if td is None:
            raise MiniHalError(Diagnostic(
                "E102", f"undefined type constructor {t.name}/{len(t.args)}"))
        theta = dict(zip(td.params, t.args))
        return [(ctor, tuple(subst_expr(a, theta) for a in args))
                for ctor, args in td.alts]

    def inst_rules(self, i) -> List[Tuple[str, tuple]]:
        if not isinstance(i, TApp):
            raise MiniHalError(Diagnostic(
                "E102", f"not an instantiation constructor: {i}"))
        if expr_depth(i) > EXPR_DEPTH_LIMIT:
            raise NonRegularError(_shallow_str(i))
        idf = self.instdefs.get((i.name, len(i.args)))
        if idf is None:
            raise MiniHalError(Diagnostic(
                "E102",
                f"undefined instantiation constructor {i.name}/{len(i.args)}"))
        theta = dict(zip(idf.params, i.args))
        return [(ctor, tuple(subst_expr(a, theta) for a in args))
                for ctor, args in idf.alts]

    # -- grammar(t) ------------------------------------------------------------

    def grammar_of_type(self, t) -> TiGrammar:
        """The least rule set generated by the type definitions, rooted at t.
        Raises NonRegularError when expansion exceeds the budget."""
        key = str(t)
        hit = self._type_cache.get(key)
        if hit is not None:
            return hit
        rules: dict = {}
        pending = [t]
        seen = {str(t)}
        while pending:
            if len(seen) > EXPANSION_BUDGET:
                raise NonRegularError(t)
            cur = pending.pop()
            alts = self.type_rules(cur)
            if alts is None:
                continue
            nt = ty_name(cur)
            for ctor, child_ts in alts:
                children = []
                for ct in child_ts:
                    children.append(ty_name(ct))
                    if str(ct) not in seen:
                        seen.add(str(ct))
                        pending.append(ct)
                G._merge_rules(rules, nt, G.f_ctor(ctor, len(child_ts)),
                               tuple(children))
        return self._cache_type(key, TiGrammar("rules", ty_name(t), rules))

    def _cache_type(self, key: str, g: TiGrammar) -> TiGrammar:
        self._type_cache[key] = g
        return g

    # -- base(t, b) --------------------------------------------------------------

    def base(self, t, b: str) -> TiGrammar:
        if b == "new":
            return NEW_GRAMMAR
        out: dict = {}
        budget = [0]
        root = self._base(t, b, frozenset(), out, budget)
        return TiGrammar("rules", root, out)

    def _base(self, t, b: str, P: frozenset, out: dict, budget: list) -> tuple:
        if b == "new":
            G._merge_rules(out, NEW_NT, G.FRESH, ())
            return NEW_NT
        name = ti_name(t, b)
        if name in P:
            return name
        budget[0] += 1
        if budget[0] > EXPANSION_BUDGET:
            raise NonRegularError(t)
        if isinstance(t, TVar):
            G._merge_rules(out, name, G.gparam(t.name), ())
            if b == "old":
                G._merge_rules(out, name, G.oparam(t.name), ())
            return name
        if isinstance(t, PredType):
            # old is identical to ground for higher-order objects
            gname = ti_name(t, "ground")
            G._merge_rules(out, gname, G.GPRED, ())
            return gname
        if self.is_builtin_type(t):
            G._merge_rules(out, name, G.builtin_ctor(t.name), ())
            return name
        P2 = P | {name}
        for ctor, child_ts in self.type_rules(t):
            children = tuple(self._base(ct, b, P2, out, budget)
                             for ct in child_ts)
            G._merge_rules(out, name, G.f_ctor(ctor, len(children)), children)
        if b == "old" and self.is_solver_type(t):
            G._merge_rules(out, name, G.VAR, ())
        return name

    # -- rt(t, i) ------------------------------------------------------------------

    def rt(self, t, i) -> TiGrammar:
        """Ti-grammar for type t and ground instantiation i; TOP on a mode
        error (non-base instantiation over a parameter or arity mismatch)."""
        key = (str(t), str(i))
        hit = self._rt_cache.get(key)
        if hit is not None:
            return hit
        out: dict = {}
        budget = [0]
        try:
            root = self._rt(t, i, frozenset(), out, budget)
        except _TopTi:
            self._rt_cache[key] = TOP
            return TOP
        g = TiGrammar("rules", root, out)
        self._rt_cache[key] = g
        return g

    def _rt(self, t, i, P: frozenset, out: dict, budget: list) -> tuple:
        name = ti_name(t, i)
        if name in P:
            return name
        if is_base_inst(i):
            return self._base(t, i.name, P, out, budget)
        budget[0] += 1
        if budget[0] > EXPANSION_BUDGET:
            raise NonRegularError(t)
        if isinstance(i, PredInst):
            if not isinstance(t, PredType) or len(t.args) != len(i.modes):
                raise _TopTi()
            children = []
            for tj, m in zip(t.args, i.modes):
                children.append(self._rt(tj, m.call, P, out, budget))
                children.append(self._rt(tj, m.success, P, out, budget))
            G._merge_rules(out, name, G.ipred_ctor(len(i.modes)),
                           tuple(children))
            return name
        if isinstance(t, TVar):
            raise _TopTi()
        if isinstance(t, PredType):
            # a first-order instantiation constructor over a ho type can
            # never match (pred types have no tree constructors)
            self.lints.append(Diagnostic(
                "W101", f"instantiation {i} has no constructors in common "
                        f"with higher-order type {t}"))
            out.setdefault(name, {})
            return name
        trules = self.type_rules(t)
        P2 = P | {name}
        out.setdefault(name, {})
        for ctor, i_children in self.inst_rules(i):
            match = None
            if trules is not None:
                for tc, t_children in trules:
                    if tc == ctor and len(t_children) == len(i_children):
                        match = t_children
                        break
            if match is None:
                self.lints.append(Diagnostic(
                    "W101", f"instantiation {i} names constructor "
                            f"{ctor}/{len(i_children)} which type {t} does "
                            f"not have; alternative ignored"))
                continue
            children = tuple(
                self._rt(tj, ij, P2, out, budget)
                for tj, ij in zip(match, i_children))
            G._merge_rules(out, name, G.f_ctor(ctor, len(children)), children)
        return name

    def rt_mode(self, t, m: Mode) -> Tuple[TiGrammar, TiGrammar]:
        return self.rt(t, m.call), self.rt(t, m.success)


# ---------------------------------------------------------------------------
# Ti-states


class TiState:
    """Map from program variables to ti-grammars at a program point."""

    __slots__ = ("bindings",)

    def __init__(self, bindings: Optional[dict] = None):
        self.bindings = dict(bindings) if bindings else {}

    def __contains__(self, var: str) -> bool:
        return var in self.bindings

    def __getitem__(self, var: str) -> TiGrammar:
        return self.bindings[var]

    def get(self, var: str) -> Optional[TiGrammar]:
        return self.bindings.get(var)

    @property
    def domain(self) -> frozenset:
        return frozenset(self.bindings)

    def set(self, *pairs) -> "TiState":
        b = dict(self.bindings)
        for var, g in pairs:
            b[var] = g
        return TiState(b)

    def extend_new(self, variables) -> "TiState":
        b = dict(self.bindings)
        for v in variables:
            if v not in b:
                b[v] = NEW_GRAMMAR
        return TiState(b)

    def restrict(self, variables) -> "TiState":
        return TiState({v: g for v, g in self.bindings.items()
                        if v in variables})

    def map_all(self, g: TiGrammar) -> "TiState":
        return TiState({v: g for v in self.bindings})

    def bottom_vars(self) -> list:
        return sorted(v for v, g in self.bindings.items() if g.is_bottom)

    def top_vars(self) -> list:
        return sorted(v for v, g in self.bindings.items() if g.is_top)

    def items(self):
        return self.bindings.items()

    def __repr__(self) -> str:
        parts = ", ".join(f"{v}" for v in sorted(self.bindings))
        return f"<TiState {{{parts}}}>"


def _check_domains(s1: TiState, s2: TiState) -> None:
    if s1.domain != s2.domain:
        raise AssertionError(
            f"ti-state domain mismatch: {sorted(s1.domain)} vs "
            f"{sorted(s2.domain)}")


def state_conj(s1: TiState, s2: TiState) -> TiState:
    _check_domains(s1, s2)
    return TiState({v: G.conj(g, s2[v]) for v, g in s1.items()})


def state_disj(s1: TiState, s2: TiState) -> TiState:
    _check_domains(s1, s2)
    return TiState({v: G.disj(g, s2[v]) for v, g in s1.items()})


def state_lt(s1: TiState, s2: TiState) -> bool:
    _check_domains(s1, s2)
    return all(G.lt(g, s2[v]) for v, g in s1.items())
