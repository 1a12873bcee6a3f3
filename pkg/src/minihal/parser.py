"""Parser for the mini-HAL surface syntax.

Declarations: `:- typedef`, `:- instdef`, `:- modedef`, `:- pred`,
`:- mode ... is <det>.`; clauses are ordinary `head :- goal.` or facts.
`%` starts a line comment.  Goal precedence is the standard one: `,` binds
tightest, then `->`, then `;` (so `a -> b ; c` is an if-then-else).
"""

from __future__ import annotations

import re
from typing import List, Optional, Tuple

from .ast import (
    CONS,
    NIL,
    CallG,
    Clause,
    Conj,
    Const,
    Disj,
    Equiv,
    FailG,
    Goal,
    HoCallG,
    InstDef,
    Ite,
    Mode,
    ModeDecl,
    MiniHalError,
    PredDef,
    PredInst,
    PredType,
    Program,
    SrcLoc,
    Struct,
    TApp,
    TVar,
    Term,
    TrueG,
    TypeDef,
    Unif,
    Var,
    parse_error,
)

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>%[^\n]*)
  | (?P<float>\d+\.\d+)
  | (?P<int>\d+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<punct>:-|->|>=|=<|==|=|\(|\)|\[|\]|\||,|;|\.|>|<|\+|-|\*|/)
""", re.VERBOSE)

# symbolic atoms usable as predicate functors / infix relations
RELOPS = {">", "<", ">=", "=<"}
SYMBOLIC_FUNCTORS = {"+", "-", "*", "/"} | RELOPS


class Token:
    __slots__ = ("kind", "text", "loc")

    def __init__(self, kind: str, text: str, loc: SrcLoc):
        self.kind = kind
        self.text = text
        self.loc = loc

    def __repr__(self) -> str:
        return f"Token({self.kind},{self.text!r})"


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise parse_error(f"unexpected character {source[pos]!r}",
                              SrcLoc(line, col))
        text = m.group(0)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, SrcLoc(line, col)))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", SrcLoc(line, col)))
    return tokens


class Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0

    # -- token helpers ---------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind == "punct"

    def at_name(self, text: str) -> bool:
        return self.peek().kind == "name" and self.peek().text == text

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise parse_error(f"expected {text!r}, found {tok.text!r}", tok.loc)
        return tok

    def expect_kind(self, kind: str) -> Token:
        tok = self.next()
        if tok.kind != kind:
            raise parse_error(f"expected {kind}, found {tok.text!r}", tok.loc)
        return tok

    # -- program ---------------------------------------------------------------

    def parse_program(self) -> "RawProgram":
        raw = RawProgram()
        while self.peek().kind != "eof":
            if self.at(":-"):
                self.next()
                self.parse_declaration(raw)
            else:
                raw.clauses.append(self.parse_clause())
            self.expect(".")
        return raw

    def parse_declaration(self, raw: "RawProgram") -> None:
        tok = self.expect_kind("name")
        if tok.text == "typedef":
            self.parse_typedef(raw, tok.loc)
        elif tok.text == "instdef":
            self.parse_instdef(raw, tok.loc)
        elif tok.text == "modedef":
            self.parse_modedef(raw, tok.loc)
        elif tok.text == "pred":
            self.parse_preddecl(raw, tok.loc)
        elif tok.text == "mode":
            self.parse_modedecl(raw, tok.loc)
        else:
            raise parse_error(f"unknown declaration {tok.text!r}", tok.loc)

    def parse_def_head(self) -> Tuple[str, tuple, SrcLoc]:
        tok = self.expect_kind("name")
        params: list = []
        if self.at("("):
            self.next()
            while True:
                v = self.expect_kind("var")
                params.append(v.text)
                if self.at(","):
                    self.next()
                    continue
                break
            self.expect(")")
        if len(set(params)) != len(params):
            raise parse_error("definition parameters must be distinct", tok.loc)
        return tok.text, tuple(params), tok.loc

    def parse_typedef(self, raw: "RawProgram", loc: SrcLoc) -> None:
        name, params, hloc = self.parse_def_head()
        if self.at("="):
            self.next()
            body = self.parse_type_expr()
            raw.equivs.append(Equiv("type", name, params, body, hloc))
            return
        self.expect("->")
        alts = self.parse_alts(self.parse_type_expr)
        is_solver = False
        if self.at_name("deriving"):
            self.next()
            tok = self.expect_kind("name")
            if tok.text != "solver":
                raise parse_error("expected 'solver' after 'deriving'", tok.loc)
            is_solver = True
        raw.add_typedef(TypeDef(name, params, alts, is_solver, hloc))

    def parse_instdef(self, raw: "RawProgram", loc: SrcLoc) -> None:
        name, params, hloc = self.parse_def_head()
        if self.at("="):
            self.next()
            body = self.parse_inst_expr()
            raw.equivs.append(Equiv("inst", name, params, body, hloc))
            return
        self.expect("->")
        alts = self.parse_alts(self.parse_inst_expr)
        raw.add_instdef(InstDef(name, params, alts, hloc))

    def parse_modedef(self, raw: "RawProgram", loc: SrcLoc) -> None:
        name, params, hloc = self.parse_def_head()
        if self.at("="):
            self.next()
        else:
            self.expect("->")
        body = self.parse_mode_arg()
        raw.equivs.append(Equiv("mode", name, params, body, hloc))

    def parse_alts(self, sub) -> tuple:
        """Alternatives `f1(...) ; f2(...) ; ...`, optionally parenthesized;
        each alternative's top symbol is a tree constructor."""
        wrapped = self.at("(")
        if wrapped:
            self.next()
        alts = [self.parse_alt(sub)]
        while self.at(";"):
            self.next()
            alts.append(self.parse_alt(sub))
        if wrapped:
            self.expect(")")
        seen = set()
        for ctor, args in alts:
            key = (ctor, len(args))
            if key in seen:
                raise parse_error(
                    f"duplicate alternative {ctor}/{len(args)}")
            seen.add(key)
        return tuple(alts)

    def parse_alt(self, sub) -> Tuple[str, tuple]:
        tok = self.peek()
        if self.at("["):
            self.next()
            if self.at("]"):
                self.next()
                return NIL, ()
            head = sub()
            self.expect("|")
            tail = sub()
            self.expect("]")
            return CONS, (head, tail)
        if tok.kind != "name":
            raise parse_error(
                f"expected tree constructor, found {tok.text!r}", tok.loc)
        self.next()
        args: list = []
        if self.at("("):
            self.next()
            args.append(sub())
            while self.at(","):
                self.next()
                args.append(sub())
            self.expect(")")
        return tok.text, tuple(args)

    # -- type / inst / mode expressions -----------------------------------------

    def parse_type_expr(self):
        tok = self.peek()
        if tok.kind == "var":
            self.next()
            return TVar(tok.text)
        if self.at("["):
            # list-sugar type: [] or [T|Ts] used inside alternatives
            alt = self.parse_alt(self.parse_type_expr)
            return TApp(alt[0], alt[1])
        if tok.kind != "name":
            raise parse_error(f"expected type expression, found {tok.text!r}",
                              tok.loc)
        self.next()
        if tok.text == "pred" and self.at("("):
            self.next()
            args = [self.parse_type_expr()]
            while self.at(","):
                self.next()
                args.append(self.parse_type_expr())
            self.expect(")")
            return PredType(tuple(args))
        args = []
        if self.at("("):
            self.next()
            args.append(self.parse_type_expr())
            while self.at(","):
                self.next()
                args.append(self.parse_type_expr())
            self.expect(")")
        return TApp(tok.text, tuple(args))

    def parse_inst_expr(self):
        tok = self.peek()
        if tok.kind == "var":
            self.next()
            return TVar(tok.text)
        if self.at("["):
            alt = self.parse_alt(self.parse_inst_expr)
            return TApp(alt[0], alt[1])
        if tok.kind != "name":
            raise parse_error(
                f"expected instantiation expression, found {tok.text!r}",
                tok.loc)
        self.next()
        if tok.text == "pred" and self.at("("):
            self.next()
            modes = [self.parse_mode_arg()]
            while self.at(","):
                self.next()
                modes.append(self.parse_mode_arg())
            self.expect(")")
            det = None
            if self.at_name("is"):
                self.next()
                det = self.expect_kind("name").text
            return PredInst(tuple(modes), det)
        args = []
        if self.at("("):
            self.next()
            args.append(self.parse_inst_expr())
            while self.at(","):
                self.next()
                args.append(self.parse_inst_expr())
            self.expect(")")
        return TApp(tok.text, tuple(args))

    def parse_mode_arg(self):
        """A mode `c -> s`, possibly parenthesized, or a mode-macro
        reference such as `in` or `out(nelist(ground))` (resolved during
        equivalence expansion)."""
        if self.at("("):
            self.next()
            inner = self.parse_mode_arg()
            self.expect(")")
            return inner
        lhs = self.parse_inst_expr()
        if self.at("->"):
            self.next()
            rhs = self.parse_mode_arg()
            if isinstance(rhs, Mode):
                # right-nested arrows would be a malformed mode
                raise parse_error("nested '->' in mode expression")
            return Mode(lhs, rhs)
        return lhs

    # -- pred / mode declarations ------------------------------------------------

    def parse_preddecl(self, raw: "RawProgram", loc: SrcLoc) -> None:
        tok = self.expect_kind("name")
        args: list = []
        if self.at("("):
            self.next()
            args.append(self.parse_type_expr())
            while self.at(","):
                self.next()
                args.append(self.parse_type_expr())
            self.expect(")")
        raw.add_preddecl(tok.text, tuple(args), tok.loc)

    def parse_modedecl(self, raw: "RawProgram", loc: SrcLoc) -> None:
        tok = self.expect_kind("name")
        args: list = []
        if self.at("("):
            self.next()
            args.append(self.parse_mode_arg())
            while self.at(","):
                self.next()
                args.append(self.parse_mode_arg())
            self.expect(")")
        det = None
        if self.at_name("is"):
            self.next()
            det = self.expect_kind("name").text
        raw.add_modedecl(tok.text, ModeDecl(tuple(args), det, tok.loc))

    # -- clauses -------------------------------------------------------------------

    def parse_clause(self) -> Tuple[str, Clause]:
        tok = self.peek()
        if tok.kind != "name":
            raise parse_error(f"expected clause head, found {tok.text!r}",
                              tok.loc)
        self.next()
        args: list = []
        if self.at("("):
            self.next()
            args.append(self.parse_term())
            while self.at(","):
                self.next()
                args.append(self.parse_term())
            self.expect(")")
        if self.at(":-"):
            self.next()
            body = self.parse_goal()
        else:
            body = TrueG(tok.loc)
        return tok.text, Clause(tuple(args), body, tok.loc)

    # -- goals ------------------------------------------------------------------------

    def parse_goal(self) -> Goal:
        """disjunction level; `c -> t ; e` folds into an if-then-else."""
        left = self.parse_arrow()
        if self.at(";"):
            self.next()
            rest = self.parse_goal()
            if isinstance(left, _Arrow):
                return Ite(left.cond, left.then, rest)
            if isinstance(rest, Disj):
                return Disj((left,) + rest.goals)
            return Disj((left, rest))
        if isinstance(left, _Arrow):
            return Ite(left.cond, left.then, FailG())
        return left

    def parse_arrow(self):
        left = self.parse_conj()
        if self.at("->"):
            self.next()
            right = self.parse_conj()
            return _Arrow(left, right)
        return left

    def parse_conj(self) -> Goal:
        goals = [self.parse_unary_goal()]
        while self.at(","):
            self.next()
            goals.append(self.parse_unary_goal())
        return goals[0] if len(goals) == 1 else Conj(tuple(goals))

    def parse_unary_goal(self) -> Goal:
        tok = self.peek()
        if self.at("("):
            self.next()
            inner = self.parse_goal()
            self.expect(")")
            return inner
        if tok.kind == "name" and tok.text == "true" \
                and not self._next_is_paren():
            self.next()
            return TrueG(tok.loc)
        if tok.kind == "name" and tok.text == "fail" \
                and not self._next_is_paren():
            self.next()
            return FailG(tok.loc)
        if tok.kind == "name" and tok.text == "call" and self._next_is_paren():
            self.next()
            self.next()  # "("
            args = [self.parse_term()]
            while self.at(","):
                self.next()
                args.append(self.parse_term())
            self.expect(")")
            if len(args) < 1:
                raise parse_error("call/N needs a closure argument", tok.loc)
            return HoCallG(args[0], tuple(args[1:]), tok.loc)
        # predicate call or the left-hand term of =\relation
        if tok.kind == "name" or (tok.kind == "punct"
                                  and tok.text in SYMBOLIC_FUNCTORS
                                  and self._next_is_paren()):
            name = tok.text
            self.next()
            args = []
            if self.at("("):
                self.next()
                args.append(self.parse_term())
                while self.at(","):
                    self.next()
                    args.append(self.parse_term())
                self.expect(")")
            term = Struct(name, tuple(args), tok.loc)
            if self.at("=") or (self.peek().kind == "punct"
                                and self.peek().text in RELOPS):
                return self._finish_relation(term, tok)
            return CallG(name, tuple(args), tok.loc)
        # other term starts: variable, number, string, list
        term = self.parse_term()
        return self._finish_relation(term, tok)

    def _finish_relation(self, lhs: Term, tok: Token) -> Goal:
        nxt = self.peek()
        if self.at("="):
            self.next()
            rhs = self.parse_term()
            return Unif(lhs, rhs, tok.loc)
        if nxt.kind == "punct" and nxt.text in RELOPS:
            self.next()
            rhs = self.parse_term()
            return CallG(nxt.text, (lhs, rhs), tok.loc)
        raise parse_error(
            f"expected '=' or comparison after term, found {nxt.text!r}",
            nxt.loc)

    def _next_is_paren(self) -> bool:
        return self.peek(1).kind == "punct" and self.peek(1).text == "("

    # -- terms ----------------------------------------------------------------------------

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok.kind == "var":
            self.next()
            return Var(tok.text, tok.loc)
        if tok.kind == "int":
            self.next()
            return Const(int(tok.text), "int", tok.loc)
        if tok.kind == "float":
            self.next()
            return Const(float(tok.text), "float", tok.loc)
        if tok.kind == "string":
            self.next()
            return Const(tok.text[1:-1], "string", tok.loc)
        if self.at("["):
            return self.parse_list()
        if tok.kind == "name" or (tok.kind == "punct"
                                  and tok.text in SYMBOLIC_FUNCTORS
                                  and self._next_is_paren()):
            self.next()
            args = []
            if self.at("("):
                self.next()
                args.append(self.parse_term())
                while self.at(","):
                    self.next()
                    args.append(self.parse_term())
                self.expect(")")
            return Struct(tok.text, tuple(args), tok.loc)
        raise parse_error(f"expected term, found {tok.text!r}", tok.loc)

    def parse_list(self) -> Term:
        open_tok = self.expect("[")
        if self.at("]"):
            self.next()
            return Struct(NIL, (), open_tok.loc)
        items = [self.parse_term()]
        while self.at(","):
            self.next()
            items.append(self.parse_term())
        if self.at("|"):
            self.next()
            tail: Term = self.parse_term()
        else:
            tail = Struct(NIL, (), open_tok.loc)
        self.expect("]")
        for item in reversed(items):
            tail = Struct(CONS, (item, tail), open_tok.loc)
        return tail


class _Arrow:
    """Transient `cond -> then` node used while parsing goals."""

    def __init__(self, cond: Goal, then: Goal):
        self.cond = cond
        self.then = then


# ---------------------------------------------------------------------------
# Raw program assembly


class RawProgram:
    """Parsed declarations before grouping into complete predicates."""

    def __init__(self):
        self.typedefs: dict = {}
        self.instdefs: dict = {}
        self.equivs: list = []
        self.pred_types: dict = {}  # name -> (arg types, loc)
        self.pred_modes: dict = {}  # name -> [ModeDecl]
        self.clauses: list = []  # (name, Clause)
        self.pred_order: list = []

    def add_typedef(self, td: TypeDef) -> None:
        key = (td.name, td.arity)
        if key in self.typedefs:
            raise parse_error(
                f"duplicate type definition {td.name}/{td.arity}", td.loc)
        self.typedefs[key] = td

    def add_instdef(self, idf: InstDef) -> None:
        key = (idf.name, idf.arity)
        if key in self.instdefs:
            raise parse_error(
                f"duplicate instantiation definition {idf.name}/{idf.arity}",
                idf.loc)
        self.instdefs[key] = idf

    def add_preddecl(self, name: str, arg_types: tuple, loc: SrcLoc) -> None:
        if name in self.pred_types:
            raise parse_error(f"duplicate pred declaration for {name}", loc)
        self.pred_types[name] = (arg_types, loc)
        self.pred_order.append(name)

    def add_modedecl(self, name: str, md: ModeDecl) -> None:
        self.pred_modes.setdefault(name, []).append(md)

    def assemble(self) -> Program:
        preds: dict = {}
        clause_map: dict = {}
        for name, cl in self.clauses:
            clause_map.setdefault(name, []).append(cl)
        for name in self.pred_order:
            arg_types, loc = self.pred_types[name]
            modes = tuple(self.pred_modes.get(name, ()))
            if not modes:
                raise parse_error(f"predicate {name} has no mode declaration",
                                  loc)
            clauses = tuple(clause_map.pop(name, ()))
            if not clauses:
                raise parse_error(f"predicate {name} has no clauses", loc)
            for cl in clauses:
                if len(cl.head_args) != len(arg_types):
                    raise parse_error(
                        f"clause head arity {len(cl.head_args)} does not "
                        f"match declared type of {name}/{len(arg_types)}",
                        cl.loc)
            for md in modes:
                if len(md.args) != len(arg_types):
                    raise parse_error(
                        f"mode declaration arity does not match type of "
                        f"{name}/{len(arg_types)}", md.loc)
            preds[name] = PredDef(name, arg_types, modes, clauses, loc)
        for name in clause_map:
            raise parse_error(
                f"clauses for {name} without a pred declaration",
                clause_map[name][0].loc)
        for name in self.pred_modes:
            if name not in self.pred_types:
                raise parse_error(
                    f"mode declaration for undeclared predicate {name}")
        return Program(
            typedefs=dict(self.typedefs),
            instdefs=dict(self.instdefs),
            equivs=tuple(self.equivs),
            preds=preds,
            pred_order=tuple(self.pred_order),
        )


def parse_program(source: str) -> Program:
    """Parse mini-HAL source text into an unexpanded program."""
    return Parser(source).parse_program().assemble()


def parse_type_string(text: str):
    """Parse a standalone type expression (used by the dump-ti CLI mode)."""
    p = Parser(text)
    t = p.parse_type_expr()
    if p.peek().kind != "eof":
        raise parse_error("trailing input after type expression")
    return t


def parse_inst_string(text: str):
    p = Parser(text)
    i = p.parse_inst_expr()
    if p.peek().kind != "eof":
        raise parse_error("trailing input after instantiation expression")
    return i
