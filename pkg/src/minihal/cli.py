"""Batch driver: `modal check FILE`, `modal dump-ti FILE --type T --inst I`
and `modal oracle [--depth D --samples N --seed S]`.

Exit status: 0 clean, 1 mode error(s) (or warnings under --werror),
2 parse/type error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .ast import Diagnostic, MiniHalError, NIL, CONS
from .frontend import _Expander, load_program
from .grammar import GrammarMergeError
from .oracle import run_property_suite
from .parser import parse_inst_string, parse_program, parse_type_string
from .scheduler import (
    Checker,
    InternalError,
    Procedure,
    SConj,
    SDisj,
    SIte,
    SLit,
    snode_lits,
    _slit_vars,
)
from .tigrammar import TiContext
from . import frontend

RELOPS = {">", "<", ">=", "=<"}
ARITH = {"+", "-"}


# ---------------------------------------------------------------------------
# Procedure rendering


def _app(functor: str, args: list) -> str:
    if functor == NIL and not args:
        return "[]"
    if functor == CONS and len(args) == 2:
        return f"[{args[0]}|{args[1]}]"
    return functor + (f"({', '.join(args)})" if args else "")


def _flatten_items(node) -> list:
    if isinstance(node, SConj):
        out: list = []
        for item in node.items:
            out.extend(_flatten_items(item))
        return out
    return [node]


def _inline_constants(items: list) -> tuple:
    """Fold single-use normalization constants (`V_1_0 := 1`) back into the
    call that consumes them, recovering the source's constant arguments."""
    counts: dict = {}
    for item in items:
        for lit in (snode_lits(item) if not isinstance(item, SLit)
                    else [item]):
            for v in _slit_vars(lit):
                counts[v] = counts.get(v, 0) + 1
    inline: dict = {}
    dropped: set = set()
    for idx, item in enumerate(items):
        if isinstance(item, SLit) and item.kind == "construct" \
                and item.const is not None and item.lhs.startswith("V_") \
                and counts.get(item.lhs) == 2:
            for later in items[idx + 1:]:
                if isinstance(later, SLit) and later.kind in (
                        "call", "ho_call") and item.lhs in later.args:
                    inline[item.lhs] = str(item.const)
                    dropped.add(id(item))
                    break
    return inline, dropped


def _render_items(items: list) -> str:
    inline, dropped = _inline_constants(items)
    parts = []
    for item in items:
        if id(item) in dropped:
            continue
        parts.append(_render_node(item, inline))
    if not parts:
        return "true"
    return ", ".join(parts)


def _render_node(node, inline: dict) -> str:
    if isinstance(node, SConj):
        return _render_items(_flatten_items(node))
    if isinstance(node, SDisj):
        return "( " + " ; ".join(
            _render_items(_flatten_items(br)) for br in node.branches) + " )"
    if isinstance(node, SIte):
        return ("( " + _render_items(_flatten_items(node.cond)) + " -> "
                + _render_items(_flatten_items(node.then)) + " ; "
                + _render_items(_flatten_items(node.els)) + " )")
    return _render_lit(node, inline)


def _render_lit(lit: SLit, inline: dict) -> str:
    arg = lambda a: inline.get(a, a)
    if lit.kind == "true":
        return "true"
    if lit.kind == "fail":
        return "fail"
    if lit.kind == "copy":
        return f"{lit.lhs} := {lit.rhs}"
    if lit.kind == "unify":
        rhs = str(lit.const) if lit.const is not None else lit.rhs
        return f"{lit.lhs} == {rhs}"
    if lit.kind == "construct":
        rhs = str(lit.const) if lit.const is not None else _app(
            lit.functor, [arg(a) for a in lit.args])
        return f"{lit.lhs} := {rhs}"
    if lit.kind == "deconstruct":
        if not lit.args:
            # nothing is bound by a constant deconstruct: print it as the
            # equality test it compiles to
            return f"{lit.lhs} == {_app(lit.functor, [])}"
        return f"{lit.lhs} =: " + _app(lit.functor,
                                       [arg(a) for a in lit.args])
    if lit.kind == "init":
        return f"init({lit.lhs})"
    if lit.kind == "call":
        args = [arg(a) for a in lit.args]
        if lit.pred in RELOPS and len(args) == 2:
            return f"{args[0]} {lit.pred} {args[1]}"
        if lit.pred in ARITH:
            suffix = "".join(
                "out" if m.call == frontend.NEW else "in"
                for m in lit.call_modes)
            return f"{lit.pred}_{suffix}({', '.join(args)})"
        return f"{lit.pred}_mode{lit.mode_index}({', '.join(args)})"
    if lit.kind == "ho_construct":
        rhs = _app(lit.pred, [arg(a) for a in lit.args])
        return f"{lit.lhs} := {rhs}"
    if lit.kind == "ho_call":
        inner = ", ".join([lit.lhs] + [arg(a) for a in lit.args])
        return f"call({inner})"
    raise InternalError(f"cannot render literal kind {lit.kind}")


def render_procedure(proc: Procedure) -> str:
    """The paper-style listing: one clause per top-level disjunct."""
    head = proc.name
    if proc.head_vars:
        head += f"({', '.join(proc.head_vars)})"
    body = proc.body
    if isinstance(body, SConj) and len(body.items) == 1 \
            and isinstance(body.items[0], SDisj):
        body = body.items[0]
    clauses = body.branches if isinstance(body, SDisj) else (body,)
    lines = []
    for br in clauses:
        lines.append(f"{head} :- {_render_items(_flatten_items(br))}.")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Commands


def _print_diags(diags: List[Diagnostic]) -> None:
    def key(d: Diagnostic):
        loc = d.loc
        return (loc.line if loc else 1 << 30, loc.col if loc else 0,
                d.code, d.message)

    for d in sorted(diags, key=key):
        print(d.render(), file=sys.stderr)


def cmd_check(args) -> int:
    try:
        with open(args.file, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        print(f"E100: cannot read {args.file}: {exc}", file=sys.stderr)
        return 2
    try:
        program = load_program(source)
    except MiniHalError as exc:
        _print_diags([exc.diag])
        return 2
    checker = Checker(program, allow_init=not args.no_init)
    try:
        result = checker.check_program()
    except (InternalError, GrammarMergeError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    if args.emit_procedures:
        chunks = [render_procedure(p) for p in result.procedures]
        if chunks:
            print("\n\n".join(chunks))
    _print_diags(result.diagnostics)
    failed = any(d.is_error for d in result.diagnostics)
    if args.werror and result.diagnostics:
        failed = True
    return 1 if failed else 0


def cmd_dump_ti(args) -> int:
    try:
        with open(args.file, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        print(f"E100: cannot read {args.file}: {exc}", file=sys.stderr)
        return 2
    try:
        parsed = parse_program(source)
        ex = _Expander(parsed)
        t = ex.expand_type(parse_type_string(args.type))
        i = ex.expand_inst(parse_inst_string(args.inst))
        expanded = frontend.expand_equivalences(parsed)
        ctx = TiContext(expanded.typedefs, expanded.instdefs)
        print(ctx.rt(t, i).dump())
    except MiniHalError as exc:
        _print_diags([exc.diag])
        return 2
    return 0


def cmd_oracle(args) -> int:
    res = run_property_suite(samples=args.samples, depth=args.depth,
                             seed=args.seed)
    print(f"oracle: {res.samples} samples, {res.checks} checks, "
          f"{len(res.failures)} failures")
    for label, seed in res.failures[:20]:
        print(f"  FAIL {label} (sample seed {seed})")
    return 1 if res.failures else 0


def build_argparser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="modal",
        description="Mode checker for mini-HAL programs")
    sub = ap.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="mode-check a program")
    p_check.add_argument("file")
    p_check.add_argument("--no-init", action="store_true",
                         help="disable automatic solver initialization")
    p_check.add_argument("--werror", action="store_true",
                         help="treat warnings as errors")
    p_check.add_argument("--no-emit", dest="emit_procedures",
                         action="store_false",
                         help="suppress procedure output")
    p_check.set_defaults(func=cmd_check, emit_procedures=True)

    p_dump = sub.add_parser("dump-ti",
                            help="print the ti-grammar of a type and "
                                 "instantiation")
    p_dump.add_argument("file")
    p_dump.add_argument("--type", required=True)
    p_dump.add_argument("--inst", required=True)
    p_dump.set_defaults(func=cmd_dump_ti)

    p_oracle = sub.add_parser("oracle",
                              help="run the grammar property suite")
    p_oracle.add_argument("--depth", type=int, default=4)
    p_oracle.add_argument("--samples", type=int, default=1000)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.set_defaults(func=cmd_oracle)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_argparser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
