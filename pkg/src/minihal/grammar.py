"""Deterministic regular tree grammars with special leaves, plus the lattice
operations used by mode checking: ordering (`lt`), abstract conjunction
(`conj`) and abstract disjunction (`disj`).

Representation
--------------

A grammar is either one of the distinguished values BOTTOM (empty language,
"execution fails here") / TOP (mode error), or a root non-terminal plus a
rule map  {non-terminal -> {constructor -> children tuple}}.  Keeping one
entry per (non-terminal, constructor) makes the grammars deterministic by
construction.

Non-terminals are nested tuples with a canonical spelling, so that derived
names such as meet(x, y) compare equal whenever they were built from the
same operands; that is what terminates the coinductive pair-set recursions.

Constructors:

    ("f", name, arity)     ordinary tree constructor
    ("fresh",)             #fresh#   (the `new` grammar's only value)
    ("var",)               #var#     (initialized, unbound solver value)
    ("gparam", v)          $ground(v)$
    ("oparam", v)          $old(v)$
    ("gpred",)             $gpred$
    ("ipred", n)           $ipred$ with 2n children (call/success slices)
    ("builtin", t)         opaque leaf for the builtin types int/float/...
"""

from __future__ import annotations

import itertools
import threading
from typing import Dict, Iterable, Optional, Tuple

NEW_NT = ("new",)

FRESH = ("fresh",)
VAR = ("var",)
GPRED = ("gpred",)


def f_ctor(name: str, arity: int) -> tuple:
    return ("f", name, arity)


def gparam(v: str) -> tuple:
    return ("gparam", v)


def oparam(v: str) -> tuple:
    return ("oparam", v)


def ipred_ctor(n_args: int) -> tuple:
    return ("ipred", n_args)


def builtin_ctor(type_name: str) -> tuple:
    return ("builtin", type_name)


_gen_counter = itertools.count()


def fresh_nt() -> tuple:
    return ("gen", next(_gen_counter))


def nt_str(nt: tuple) -> str:
    kind = nt[0]
    if kind == "new":
        return "new"
    if kind == "ti":
        return f"ti({nt[1]},{nt[2]})"
    if kind == "meet":
        return f"meet({nt_str(nt[1])},{nt_str(nt[2])})"
    if kind == "join":
        return f"join({nt_str(nt[1])},{nt_str(nt[2])})"
    if kind == "gen":
        return f"g{nt[1]}"
    if kind == "sub":
        return f"{nt_str(nt[1])}'{nt[2]}"
    if kind == "ty":
        return nt[1]
    raise ValueError(f"unknown non-terminal {nt!r}")


def rhs_str(ctor: tuple, children: tuple) -> str:
    kind = ctor[0]
    names = [nt_str(c) for c in children]
    if kind == "f":
        name = ctor[1]
        if name == "[]" and not names:
            return "[]"
        if name == "." and len(names) == 2:
            return f"[{names[0]}|{names[1]}]"
        return name + (f"({', '.join(names)})" if names else "")
    if kind == "fresh":
        return "#fresh#"
    if kind == "var":
        return "#var#"
    if kind == "gparam":
        return f"$ground({ctor[1]})$"
    if kind == "oparam":
        return f"$old({ctor[1]})$"
    if kind == "gpred":
        return "$gpred$"
    if kind == "ipred":
        return f"$ipred$({', '.join(names)})"
    if kind == "builtin":
        return f"${ctor[1]}$"
    raise ValueError(f"unknown constructor {ctor!r}")


class GrammarMergeError(Exception):
    """Two rule sets disagreed on a shared non-terminal: broken invariant."""


def _merge_rules(dst: dict, nt: tuple, ctor: tuple, children: tuple) -> None:
    prods = dst.setdefault(nt, {})
    old = prods.get(ctor)
    if old is not None and old != children:
        raise GrammarMergeError(
            f"conflicting rules for {nt_str(nt)} / {rhs_str(ctor, children)}")
    prods[ctor] = children


class TiGrammar:
    """Immutable tree grammar value; BOTTOM and TOP are module singletons."""

    __slots__ = ("kind", "root", "rules", "_key", "_hash")

    def __init__(self, kind: str, root: Optional[tuple] = None,
                 rules: Optional[dict] = None):
        self.kind = kind
        self.root = root
        self.rules = rules if rules is not None else {}
        if kind == "rules":
            key = (
                "rules",
                root,
                tuple(sorted(
                    (nt, tuple(sorted(prods.items())))
                    for nt, prods in self.rules.items())),
            )
        else:
            key = (kind,)
        self._key = key
        self._hash = hash(key)

    # -- value semantics ----------------------------------------------------

    @property
    def key(self):
        return self._key

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return isinstance(other, TiGrammar) and self._key == other._key

    def __repr__(self) -> str:
        if self.kind != "rules":
            return f"<TiGrammar {self.kind}>"
        return f"<TiGrammar root={nt_str(self.root)} #rules={len(self.rules)}>"

    # -- queries -------------------------------------------------------------

    @property
    def is_bottom(self) -> bool:
        return self.kind == "bottom"

    @property
    def is_top(self) -> bool:
        return self.kind == "top"

    @property
    def is_new(self) -> bool:
        return self.kind == "rules" and self.root == NEW_NT

    def prods(self, nt: tuple) -> dict:
        return self.rules.get(nt, {})

    def root_prods(self) -> dict:
        return self.rules.get(self.root, {})

    def root_has(self, ctor: tuple) -> bool:
        return ctor in self.root_prods()

    def root_has_var(self) -> bool:
        return VAR in self.root_prods()

    def root_ipred(self) -> Optional[Tuple[tuple, tuple]]:
        """(ctor, children) of the root's $ipred$ production, if any."""
        for ctor, children in self.root_prods().items():
            if ctor[0] == "ipred":
                return ctor, children
        return None

    def dump(self) -> str:
        """One production per line, root productions first."""
        if self.kind == "bottom":
            return "<bottom>"
        if self.kind == "top":
            return "<top>"
        lines = []
        for nt in _reach_order(self.rules, self.root):
            for ctor in sorted(self.prods(nt)):
                lines.append(f"{nt_str(nt)} -> "
                             f"{rhs_str(ctor, self.prods(nt)[ctor])}")
        return "\n".join(lines)


BOTTOM = TiGrammar("bottom")
TOP = TiGrammar("top")
NEW_GRAMMAR = TiGrammar("rules", NEW_NT, {NEW_NT: {FRESH: ()}})


def make_grammar(root: tuple, rules: Iterable[Tuple[tuple, tuple, tuple]]) -> TiGrammar:
    """Build a grammar from (nt, ctor, children) triples; the `new` rule is
    supplied automatically when referenced."""
    table: dict = {}
    refs_new = root == NEW_NT
    for nt, ctor, children in rules:
        _merge_rules(table, nt, ctor, children)
        refs_new = refs_new or NEW_NT in children
    if refs_new and NEW_NT not in table:
        table[NEW_NT] = {FRESH: ()}
    return TiGrammar("rules", root, table)


def _reach_order(rules: dict, root: tuple) -> list:
    """Non-terminals reachable from root, root first, deterministic order."""
    seen = [root]
    seen_set = {root}
    i = 0
    while i < len(seen):
        nt = seen[i]
        i += 1
        for ctor in sorted(rules.get(nt, {})):
            for child in rules[nt][ctor]:
                if child not in seen_set:
                    seen_set.add(child)
                    seen.append(child)
    return seen


def _copy_reachable(dst: dict, src: dict, x: tuple) -> None:
    for nt in _reach_order(src, x):
        if nt == NEW_NT:
            _merge_rules(dst, NEW_NT, FRESH, ())
            continue
        for ctor, children in src.get(nt, {}).items():
            _merge_rules(dst, nt, ctor, children)


def subg(x: tuple, g: TiGrammar) -> TiGrammar:
    """The sub-grammar of g rooted at x (rules reachable from x)."""
    if g.kind != "rules":
        raise ValueError("subg on bottom/top grammar")
    if x not in g.rules and x != NEW_NT:
        raise KeyError(f"non-terminal {nt_str(x)} not in grammar")
    out: dict = {}
    _copy_reachable(out, g.rules, x)
    return TiGrammar("rules", x, out)


def root(g: TiGrammar) -> tuple:
    if g.kind != "rules":
        raise ValueError("root undefined on bottom/top grammar")
    return g.root


def normalize(g: TiGrammar) -> TiGrammar:
    """Drop productions that can never derive a finite tree; collapse to
    BOTTOM when the root itself becomes unproductive."""
    if g.kind != "rules":
        return g
    productive = {NEW_NT}
    changed = True
    while changed:
        changed = False
        for nt, prods in g.rules.items():
            if nt in productive:
                continue
            for children in prods.values():
                if all(c in productive for c in children):
                    productive.add(nt)
                    changed = True
                    break
    if g.root not in productive:
        return BOTTOM
    pruned: dict = {NEW_NT: {FRESH: ()}}
    for nt, prods in g.rules.items():
        if nt not in productive:
            continue
        kept = {c: ch for c, ch in prods.items()
                if all(x in productive for x in ch)}
        if kept and nt != NEW_NT:
            pruned[nt] = kept
    out: dict = {}
    _copy_reachable(out, pruned, g.root)
    return TiGrammar("rules", g.root, out)


# ---------------------------------------------------------------------------
# Ordering


_lt_memo: Dict[tuple, bool] = {}
_lt_lock = threading.Lock()


def lt(g1: TiGrammar, g2: TiGrammar) -> bool:
    """The pre-order r1 ⪯ r2 (bounded language inclusion for same-type
    grammars). Results are memoized globally by grammar content."""
    if g2.is_top:
        return True
    if g1.is_top:
        return False
    if g1.is_bottom:
        return True
    if g2.is_bottom:
        return False
    memo_key = (g1.key, g2.key)
    hit = _lt_memo.get(memo_key)
    if hit is not None:
        return hit
    result = _lt(g1.rules, g1.root, g2.rules, g2.root, frozenset())
    with _lt_lock:
        _lt_memo[memo_key] = result
    return result


def _param_prod(prods: dict, kind: str) -> Optional[tuple]:
    for ctor in prods:
        if ctor[0] == kind:
            return ctor
    return None


def _lt(ra: dict, xa: tuple, rb: dict, xb: tuple, P: frozenset) -> bool:
    if (xa, xb) in P:
        return True
    a_new = xa == NEW_NT
    b_new = xb == NEW_NT
    if b_new and not a_new:
        return False
    if a_new:
        return b_new
    pa = ra.get(xa, {})
    pb = rb.get(xb, {})
    op = _param_prod(pa, "oparam")
    if op is not None:
        return _param_prod(pb, "oparam") == op
    gp = _param_prod(pa, "gparam")
    if gp is not None:
        return gp in pb
    if GPRED in pa:
        return GPRED in pb
    ip = _param_prod(pa, "ipred")
    if ip is not None:
        if GPRED in pb:
            return True
        ipb = _param_prod(pb, "ipred")
        if ipb is None or ipb != ip:
            return False
        P2 = P | {(xa, xb)}
        ca = pa[ip]
        cb = pb[ipb]
        for i in range(ip[1]):
            # contravariant in call positions, covariant in success positions
            if not _lt(rb, cb[2 * i], ra, ca[2 * i], P2):
                return False
            if not _lt(ra, ca[2 * i + 1], rb, cb[2 * i + 1], P2):
                return False
        return True
    P2 = P | {(xa, xb)}
    for ctor in sorted(pa):
        if ctor not in pb:
            return False
        for c1, c2 in zip(pa[ctor], pb[ctor]):
            if not _lt(ra, c1, rb, c2, P2):
                return False
    return True


# ---------------------------------------------------------------------------
# Abstract conjunction / disjunction


class _TopResult(Exception):
    pass


def _nt_key(nt: tuple) -> str:
    return repr(nt)


def meet_name(xa: tuple, xb: tuple) -> tuple:
    a, b = sorted((xa, xb), key=_nt_key)
    return ("meet", a, b)


def join_name(xa: tuple, xb: tuple) -> tuple:
    a, b = sorted((xa, xb), key=_nt_key)
    return ("join", a, b)


def _is_special(prods: dict) -> bool:
    return any(c[0] in ("oparam", "gparam", "gpred", "ipred") for c in prods)


def conj(g1: TiGrammar, g2: TiGrammar) -> TiGrammar:
    """Abstract conjunction: `new` is an identity, otherwise the meet."""
    if g1.is_top or g2.is_top:
        return TOP
    if g1.is_bottom or g2.is_bottom:
        return BOTTOM
    out: dict = {}
    try:
        r = _conj(g1.rules, g1.root, g2.rules, g2.root, frozenset(), out)
    except _TopResult:
        return TOP
    return normalize(TiGrammar("rules", r, out))


def _conj(ra: dict, xa: tuple, rb: dict, xb: tuple, P: frozenset,
          out: dict) -> tuple:
    if xb == NEW_NT:
        _copy_reachable(out, ra, xa)
        return xa
    mname = meet_name(xa, xb)
    if mname in P:
        return mname
    if xa == NEW_NT:
        _copy_reachable(out, rb, xb)
        return xb
    pa = ra.get(xa, {})
    pb = rb.get(xb, {})
    # the algorithm cases inspect the left operand; swap if only the right
    # one is special (conjunction is commutative)
    if not _is_special(pa) and _is_special(pb):
        ra, xa, rb, xb = rb, xb, ra, xa
        pa, pb = pb, pa
    if _param_prod(pa, "oparam") is not None:
        _copy_reachable(out, rb, xb)
        return xb
    if _param_prod(pa, "gparam") is not None:
        _copy_reachable(out, ra, xa)
        return xa
    if GPRED in pa:
        _copy_reachable(out, rb, xb)
        return xb
    ip = _param_prod(pa, "ipred")
    if ip is not None:
        if GPRED in pb:
            _copy_reachable(out, ra, xa)
            return xa
        ipb = _param_prod(pb, "ipred")
        if ipb is None or ipb != ip:
            raise _TopResult()
        ca, cb = pa[ip], pb[ipb]
        children = []
        for i in range(ip[1]):
            children.append(_disj(ra, ca[2 * i], rb, cb[2 * i], P, out))
            children.append(_conj(ra, ca[2 * i + 1], rb, cb[2 * i + 1], P, out))
        _merge_rules(out, mname, ip, tuple(children))
        return mname
    P2 = P | {mname}
    out.setdefault(mname, {})
    for ctor in sorted(pa):
        if ctor in pb:
            children = tuple(
                _conj(ra, c1, rb, c2, P2, out)
                for c1, c2 in zip(pa[ctor], pb[ctor]))
            _merge_rules(out, mname, ctor, children)
    return mname


def disj(g1: TiGrammar, g2: TiGrammar) -> TiGrammar:
    """Abstract disjunction: exact on `new`, otherwise the (inexact) join.
    Joining `new` with a bound grammar loses the fresh/bound distinction and
    yields TOP."""
    if g1.is_top or g2.is_top:
        return TOP
    if g1.is_bottom:
        return g2
    if g2.is_bottom:
        return g1
    if g1.is_new and g2.is_new:
        return NEW_GRAMMAR
    if g1.is_new or g2.is_new:
        return TOP
    out: dict = {}
    try:
        r = _disj(g1.rules, g1.root, g2.rules, g2.root, frozenset(), out)
    except _TopResult:
        return TOP
    return normalize(TiGrammar("rules", r, out))


def _disj(ra: dict, xa: tuple, rb: dict, xb: tuple, P: frozenset,
          out: dict) -> tuple:
    a_new = xa == NEW_NT
    b_new = xb == NEW_NT
    if a_new and b_new:
        _merge_rules(out, NEW_NT, FRESH, ())
        return NEW_NT
    if a_new or b_new:
        raise _TopResult()
    jname = join_name(xa, xb)
    if jname in P:
        return jname
    pa = ra.get(xa, {})
    pb = rb.get(xb, {})
    if not _is_special(pa) and _is_special(pb):
        ra, xa, rb, xb = rb, xb, ra, xa
        pa, pb = pb, pa
    if _param_prod(pa, "oparam") is not None:
        _copy_reachable(out, ra, xa)
        return xa
    if _param_prod(pa, "gparam") is not None:
        _copy_reachable(out, rb, xb)
        return xb
    if GPRED in pa:
        _copy_reachable(out, ra, xa)
        return xa
    ip = _param_prod(pa, "ipred")
    if ip is not None:
        if GPRED in pb:
            _copy_reachable(out, rb, xb)
            return xb
        ipb = _param_prod(pb, "ipred")
        if ipb is None or ipb != ip:
            raise _TopResult()
        ca, cb = pa[ip], pb[ipb]
        children = []
        for i in range(ip[1]):
            children.append(_conj(ra, ca[2 * i], rb, cb[2 * i], P, out))
            children.append(_disj(ra, ca[2 * i + 1], rb, cb[2 * i + 1], P, out))
        _merge_rules(out, jname, ip, tuple(children))
        return jname
    P2 = P | {jname}
    out.setdefault(jname, {})
    for ctor in sorted(pa):
        if ctor in pb:
            children = tuple(
                _disj(ra, c1, rb, c2, P2, out)
                for c1, c2 in zip(pa[ctor], pb[ctor]))
            _merge_rules(out, jname, ctor, children)
        else:
            _merge_rules(out, jname, ctor, pa[ctor])
            for child in pa[ctor]:
                _copy_reachable(out, ra, child)
    for ctor in sorted(pb):
        if ctor not in pa:
            _merge_rules(out, jname, ctor, pb[ctor])
            for child in pb[ctor]:
                _copy_reachable(out, rb, child)
    return jname


def clear_caches() -> None:
    with _lt_lock:
        _lt_memo.clear()
