"""Syntax trees shared by the whole checker.

Three layers live here:

  * expression terms for types, instantiations and modes (`TVar`, `TApp`,
    `PredType`, `PredInst`, `Mode`),
  * the program-level declarations produced by the parser,
  * goal trees, both in surface form (arbitrary terms as arguments) and in
    normalized form (literals over distinct variables only).

Everything is immutable; passes return rewritten copies.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

BUILTIN_TYPES = {"int", "float", "char", "string"}
BASE_INSTS = {"new", "old", "ground"}

NIL = "[]"
CONS = "."


# ---------------------------------------------------------------------------
# Source locations and diagnostics


@dataclass(frozen=True)
class SrcLoc:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Diagnostic:
    code: str  # E001 unschedulable, E002 success-too-weak, E003 top-join,
    # E1xx parse/type errors, W001 runtime-mode-risk, W1xx lints
    message: str
    loc: Optional[SrcLoc] = field(default=None, compare=False)
    pred: Optional[str] = None
    mode_index: Optional[int] = None

    @property
    def is_error(self) -> bool:
        return self.code.startswith("E")

    def render(self) -> str:
        where = f"{self.loc}: " if self.loc else ""
        ctx = ""
        if self.pred is not None:
            ctx = f" [{self.pred}" + (
                f" mode {self.mode_index}]" if self.mode_index is not None else "]"
            )
        return f"{where}{self.code}: {self.message}{ctx}"


class MiniHalError(Exception):
    """Parse or type error carrying a diagnostic."""

    def __init__(self, diag: Diagnostic):
        super().__init__(diag.render())
        self.diag = diag


def parse_error(message: str, loc: Optional[SrcLoc] = field(default=None, compare=False)) -> MiniHalError:
    return MiniHalError(Diagnostic("E101", message, loc))


def type_error(message: str, loc: Optional[SrcLoc] = field(default=None, compare=False)) -> MiniHalError:
    return MiniHalError(Diagnostic("E102", message, loc))


# ---------------------------------------------------------------------------
# Type / instantiation / mode expressions


@dataclass(frozen=True)
class TVar:
    """A type or instantiation parameter."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TApp:
    """Constructor application; 0-ary covers base instantiations and atoms."""

    name: str
    args: tuple = ()

    def __str__(self) -> str:
        return app_str(self.name, self.args)


@dataclass(frozen=True)
class Mode:
    call: "InstExpr"
    success: "InstExpr"

    def __str__(self) -> str:
        return f"{self.call} -> {self.success}"


@dataclass(frozen=True)
class PredType:
    """Higher-order type pred(t_1, ..., t_n)."""

    args: tuple

    def __str__(self) -> str:
        return "pred(" + ", ".join(str(a) for a in self.args) + ")"


@dataclass(frozen=True)
class PredInst:
    """Higher-order instantiation pred(c_1 -> s_1, ..., c_n -> s_n)."""

    modes: tuple  # tuple[Mode, ...]
    determinism: Optional[str] = None  # parsed, stored, ignored

    def __str__(self) -> str:
        return "pred(" + ", ".join(str(m) for m in self.modes) + ")"


TypeExpr = Union[TVar, TApp, PredType]
InstExpr = Union[TVar, TApp, PredInst]


def app_str(name: str, args: tuple) -> str:
    """Print an application, using list sugar for the cons/nil constructors."""
    if name == NIL and not args:
        return "[]"
    if name == CONS and len(args) == 2:
        return f"[{args[0]}|{args[1]}]"
    if not args:
        return name
    return name + "(" + ", ".join(str(a) for a in args) + ")"


def is_base_inst(i: InstExpr) -> bool:
    return isinstance(i, TApp) and i.name in BASE_INSTS and not i.args

def is_new(i: InstExpr) -> bool:
    return isinstance(i, TApp) and i.name == "new" and not i.args


def expr_vars(e) -> set:
    """Free parameters of a type/inst/mode expression."""
    out: set = set()
    _collect_vars(e, out)
    return out


def _collect_vars(e, out: set) -> None:
    if isinstance(e, TVar):
        out.add(e.name)
    elif isinstance(e, TApp):
        for a in e.args:
            _collect_vars(a, out)
    elif isinstance(e, PredType):
        for a in e.args:
            _collect_vars(a, out)
    elif isinstance(e, PredInst):
        for m in e.modes:
            _collect_vars(m.call, out)
            _collect_vars(m.success, out)
    elif isinstance(e, Mode):
        _collect_vars(e.call, out)
        _collect_vars(e.success, out)


def subst_expr(e, theta: dict):
    """Apply a parameter substitution to a type/inst expression."""
    if isinstance(e, TVar):
        return theta.get(e.name, e)
    if isinstance(e, TApp):
        return TApp(e.name, tuple(subst_expr(a, theta) for a in e.args))
    if isinstance(e, PredType):
        return PredType(tuple(subst_expr(a, theta) for a in e.args))
    if isinstance(e, PredInst):
        return PredInst(
            tuple(Mode(subst_expr(m.call, theta), subst_expr(m.success, theta))
                  for m in e.modes),
            e.determinism,
        )
    if isinstance(e, Mode):
        return Mode(subst_expr(e.call, theta), subst_expr(e.success, theta))
    raise TypeError(f"not a substitutable expression: {e!r}")


# ---------------------------------------------------------------------------
# Surface terms (clause bodies before normalization)


@dataclass(frozen=True)
class Var:
    name: str
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Struct:
    functor: str
    args: tuple = ()
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return app_str(self.functor, self.args)


@dataclass(frozen=True)
class Const:
    """Builtin-type constant literal (int, float or string)."""

    value: object
    type_name: str  # int / float / string
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        if self.type_name == "string":
            return '"%s"' % self.value
        return str(self.value)


Term = Union[Var, Struct, Const]


# ---------------------------------------------------------------------------
# Goals


@dataclass(frozen=True)
class Conj:
    goals: tuple

    def __str__(self) -> str:
        return ", ".join(str(g) for g in self.goals) if self.goals else "true"


@dataclass(frozen=True)
class Disj:
    goals: tuple

    def __str__(self) -> str:
        return "( " + " ; ".join(str(g) for g in self.goals) + " )"


@dataclass(frozen=True)
class Ite:
    cond: "Goal"
    then: "Goal"
    els: "Goal"

    def __str__(self) -> str:
        return f"( {self.cond} -> {self.then} ; {self.els} )"


@dataclass(frozen=True)
class Unif:
    lhs: Term
    rhs: Term
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{self.lhs} = {self.rhs}"


@dataclass(frozen=True)
class CallG:
    name: str
    args: tuple = ()
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return app_str(self.name, self.args)


@dataclass(frozen=True)
class HoCallG:
    closure: Term
    args: tuple
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        inner = ", ".join([str(self.closure)] + [str(a) for a in self.args])
        return f"call({inner})"


@dataclass(frozen=True)
class TrueG:
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class FailG:
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return "fail"


Goal = Union[Conj, Disj, Ite, Unif, CallG, HoCallG, TrueG, FailG]


# ---------------------------------------------------------------------------
# Declarations and programs


@dataclass(frozen=True)
class TypeDef:
    name: str
    params: tuple  # parameter names
    alts: tuple  # tuple[(ctor name, tuple[TypeExpr, ...]), ...]
    is_solver: bool
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class InstDef:
    name: str
    params: tuple
    alts: tuple  # tuple[(ctor name, tuple[InstExpr, ...]), ...]
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class Equiv:
    """`typedef a = b` style macro for types, insts or modes."""

    kind: str  # "type" | "inst" | "mode"
    name: str
    params: tuple
    body: object  # TypeExpr | InstExpr | Mode
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class ModeDecl:
    args: tuple  # tuple[Mode | unexpanded expr, ...]; Modes after expansion
    determinism: Optional[str]
    loc: Optional[SrcLoc] = field(default=None, compare=False)


@dataclass(frozen=True)
class Clause:
    head_args: tuple  # tuple[Term, ...]
    body: Goal
    loc: Optional[SrcLoc] = field(default=None, compare=False)


@dataclass(frozen=True)
class PredDef:
    name: str
    arg_types: tuple  # tuple[TypeExpr, ...]
    modes: tuple  # tuple[ModeDecl, ...]
    clauses: tuple  # tuple[Clause, ...]
    loc: Optional[SrcLoc] = field(default=None, compare=False)
    # Filled by normalization:
    head_vars: tuple = ()  # tuple[str, ...]
    body: Optional[Goal] = None  # single disjunctive body over normalized literals
    # Filled by type assignment:
    var_types: Optional[dict] = None  # var name -> TypeExpr

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    @property
    def type_params(self) -> tuple:
        out: list = []
        seen: set = set()
        for t in self.arg_types:
            for v in sorted(expr_vars(t)):
                if v not in seen:
                    seen.add(v)
                    out.append(v)
        return tuple(out)


@dataclass(frozen=True)
class Program:
    typedefs: dict  # (name, arity) -> TypeDef
    instdefs: dict  # (name, arity) -> InstDef
    equivs: tuple  # tuple[Equiv, ...] (consumed by expansion)
    preds: dict  # name -> PredDef
    pred_order: tuple = ()  # source order of predicate names
    # Call-site type substitutions, filled by type assignment:
    # literal id -> {param -> TypeExpr}
    call_thetas: Optional[dict] = None

    def pred(self, name: str) -> PredDef:
        return self.preds[name]

    def with_preds(self, preds: dict, **kw) -> "Program":
        return replace(self, preds=preds, **kw)


# ---------------------------------------------------------------------------
# Normalized literals (bodies after `normalize`)
#
# Every literal carries a unique id (`lid`) used to key call-site type
# substitutions and to check the permutation invariant after scheduling.


@dataclass(frozen=True)
class NEqVV:
    lhs: str
    rhs: str
    lid: int = -1
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{self.lhs} = {self.rhs}"

    @property
    def vars(self) -> tuple:
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class NEqVF:
    lhs: str
    functor: str
    args: tuple  # tuple[str, ...]
    lid: int = -1
    loc: Optional[SrcLoc] = field(default=None, compare=False)
    const: Optional[Const] = None  # set when rhs is a builtin-type constant

    def __str__(self) -> str:
        rhs = str(self.const) if self.const is not None else app_str(
            self.functor, tuple(Var(a) for a in self.args))
        return f"{self.lhs} = {rhs}"

    @property
    def vars(self) -> tuple:
        return (self.lhs,) + self.args


@dataclass(frozen=True)
class NEqHo:
    """Higher-order construct  h = p(x_1, ..., x_k)."""

    lhs: str
    pred: str
    args: tuple
    lid: int = -1
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{self.lhs} = {app_str(self.pred, tuple(Var(a) for a in self.args))}"

    @property
    def vars(self) -> tuple:
        return (self.lhs,) + self.args


@dataclass(frozen=True)
class NCall:
    pred: str
    args: tuple
    lid: int = -1
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return app_str(self.pred, tuple(Var(a) for a in self.args))

    @property
    def vars(self) -> tuple:
        return self.args


@dataclass(frozen=True)
class NHoCall:
    closure: str
    args: tuple
    lid: int = -1
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        inner = ", ".join([self.closure] + list(self.args))
        return f"call({inner})"

    @property
    def vars(self) -> tuple:
        return (self.closure,) + self.args


@dataclass(frozen=True)
class NTrue:
    lid: int = -1
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return "true"

    vars: tuple = ()


@dataclass(frozen=True)
class NFail:
    lid: int = -1
    loc: Optional[SrcLoc] = field(default=None, compare=False)

    def __str__(self) -> str:
        return "fail"

    vars: tuple = ()


NLiteral = Union[NEqVV, NEqVF, NEqHo, NCall, NHoCall, NTrue, NFail]


def goal_literals(g) -> list:
    """All normalized literals of a goal tree, in source order."""
    out: list = []
    _walk_literals(g, out)
    return out


def _walk_literals(g, out: list) -> None:
    if isinstance(g, Conj) or isinstance(g, Disj):
        for sub in g.goals:
            _walk_literals(sub, out)
    elif isinstance(g, Ite):
        _walk_literals(g.cond, out)
        _walk_literals(g.then, out)
        _walk_literals(g.els, out)
    else:
        out.append(g)


def goal_vars(g) -> set:
    """Variable names occurring anywhere in a normalized goal tree."""
    return {v for lit in goal_literals(g) for v in getattr(lit, "vars", ())}
