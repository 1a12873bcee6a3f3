"""Brute-force semantics for tree grammars.

`enumerate_lang` computes the exact set of trees of height <= d derivable
from a grammar's root by naive fixpoint, treating the special leaves
(#var#, $ground(v)$, $old(v)$, $gpred$, #fresh#) as opaque constants.  It
is the independent baseline the lattice operations are validated against:

    meet exactness     [[r1 /\ r2]]_d == [[r1]]_d  intersect  [[r2]]_d
    join superset      [[r1 \/ r2]]_d >= [[r1]]_d  union      [[r2]]_d
    lt soundness       lt(r1, r2)  ==>  [[r1]]_d subset [[r2]]_d

together with reflexivity and transitivity of lt on random deterministic
grammars.  Trees are interned to integers so the set algebra stays cheap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from . import grammar as G
from .grammar import TiGrammar

MAX_DEPTH = 6
TREE_BUDGET = 1_000_000


class OracleBudgetError(Exception):
    pass


class _Interner:
    """Dense integer ids for trees (ctor, child ids)."""

    def __init__(self, budget: int = TREE_BUDGET):
        self.table: Dict[tuple, int] = {}
        self.nodes: List[tuple] = []
        self.budget = budget

    def node(self, ctor: tuple, children: tuple) -> int:
        key = (ctor, children)
        tid = self.table.get(key)
        if tid is None:
            if len(self.nodes) >= self.budget:
                raise OracleBudgetError(
                    f"enumeration exceeded {self.budget} distinct trees")
            tid = len(self.nodes)
            self.table[key] = tid
            self.nodes.append(key)
        return tid

    def to_tuple(self, tid: int) -> tuple:
        ctor, children = self.nodes[tid]
        return (ctor,) + tuple(self.to_tuple(c) for c in children)


def _lang_ids(g: TiGrammar, depth: int, interner: _Interner) -> Set[int]:
    """Ids of all trees of height <= depth derivable from root(g)."""
    if g.is_bottom:
        return set()
    if g.is_top:
        raise ValueError("cannot enumerate the error grammar")
    # langs[nt] at iteration h holds trees of height <= h
    langs: Dict[tuple, Set[int]] = {nt: set() for nt in g.rules}
    for _ in range(depth):
        new_langs: Dict[tuple, Set[int]] = {}
        for nt, prods in g.rules.items():
            acc = set(langs[nt])
            for ctor in sorted(prods):
                children = prods[ctor]
                if not children:
                    acc.add(interner.node(ctor, ()))
                    continue
                child_sets = [langs.get(c, ()) for c in children]
                if any(not cs for cs in child_sets):
                    continue
                stack = [()]
                for cs in child_sets:
                    stack = [pre + (cid,) for pre in stack
                             for cid in sorted(cs)]
                    if len(stack) > interner.budget:
                        raise OracleBudgetError("combination blow-up")
                for combo in stack:
                    acc.add(interner.node(ctor, combo))
            new_langs[nt] = acc
        langs = new_langs
    return langs.get(g.root, set())


def enumerate_lang(g: TiGrammar, depth: int) -> frozenset:
    """The bounded language as nested (ctor, subtree...) tuples."""
    if depth > MAX_DEPTH:
        raise ValueError(f"depth {depth} exceeds budget {MAX_DEPTH}")
    interner = _Interner()
    ids = _lang_ids(g, depth, interner)
    return frozenset(interner.to_tuple(t) for t in ids)


def check_meet(r1: TiGrammar, r2: TiGrammar, depth: int) -> bool:
    """Bounded language of the meet equals the intersection exactly."""
    interner = _Interner()
    got = _lang_ids(G.conj(r1, r2), depth, interner)
    want = _lang_ids(r1, depth, interner) & _lang_ids(r2, depth, interner)
    return got == want


def check_join(r1: TiGrammar, r2: TiGrammar, depth: int) -> bool:
    """Bounded language of the join contains the union (join is inexact)."""
    interner = _Interner()
    j = G.disj(r1, r2)
    if j.is_top:
        return True
    got = _lang_ids(j, depth, interner)
    want = _lang_ids(r1, depth, interner) | _lang_ids(r2, depth, interner)
    return got >= want


def check_lt(r1: TiGrammar, r2: TiGrammar, depth: int) -> bool:
    """lt implies bounded language inclusion."""
    if not G.lt(r1, r2):
        return True
    interner = _Interner()
    return _lang_ids(r1, depth, interner) <= _lang_ids(r2, depth, interner)


# ---------------------------------------------------------------------------
# Random deterministic grammars


def random_signature(rng: random.Random) -> list:
    """Up to 4 constructors of arity <= 2, at least one constant, at most
    one binary constructor (keeps depth-4 languages enumerable)."""
    n = rng.randint(2, 4)
    ctors = [G.f_ctor("k0", 0)]
    binary_used = False
    for idx in range(1, n):
        arity = rng.choice([0, 0, 1, 1, 2])
        if arity == 2 and binary_used:
            arity = rng.choice([0, 1])
        if arity == 2:
            binary_used = True
        ctors.append(G.f_ctor(f"k{idx}", arity))
    return ctors


def random_grammar(rng: random.Random, signature: list) -> Optional[TiGrammar]:
    """A random deterministic, all-productive grammar over the signature.
    Returns None when the draw happens to have an empty root language."""
    n_nts = rng.randint(1, 5)
    nts = [G.fresh_nt() for _ in range(n_nts)]
    triples = []
    for nt in nts:
        picked = [c for c in signature if rng.random() < 0.6]
        if not picked:
            picked = [rng.choice(signature)]
        for ctor in picked:
            children = tuple(rng.choice(nts) for _ in range(ctor[2]))
            triples.append((nt, ctor, children))
    g = G.normalize(G.make_grammar(nts[0], triples))
    return None if g.is_bottom else g


@dataclass
class SuiteResult:
    samples: int = 0
    checks: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_property_suite(samples: int = 1000, depth: int = 4,
                       seed: int = 0) -> SuiteResult:
    """Seeded random property suite over same-signature grammar pairs."""
    rng = random.Random(seed)
    res = SuiteResult()
    while res.samples < samples:
        sample_seed = rng.getrandbits(32)
        srng = random.Random(sample_seed)
        sig = random_signature(srng)
        gs = [random_grammar(srng, sig) for _ in range(3)]
        if any(g is None for g in gs):
            continue
        r1, r2, r3 = gs
        try:
            checks = [
                ("meet", check_meet(r1, r2, depth)),
                ("join", check_join(r1, r2, depth)),
                ("lt-incl", check_lt(r1, r2, depth) and check_lt(r2, r1, depth)),
                ("lt-refl", G.lt(r1, r1) and G.lt(r2, r2)),
            ]
        except OracleBudgetError:
            continue  # resample: language too large to enumerate
        rel = {(a, b): G.lt(x, y)
               for a, x in enumerate(gs) for b, y in enumerate(gs)}
        trans_ok = all(
            not (rel[(a, b)] and rel[(b, c)]) or rel[(a, c)]
            for a in range(3) for b in range(3) for c in range(3))
        checks.append(("lt-trans", trans_ok))
        res.samples += 1
        for label, ok in checks:
            res.checks += 1
            if not ok:
                res.failures.append((label, sample_seed))
    return res
