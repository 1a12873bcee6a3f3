"""Deterministic generator of well-moded list-shuffling programs used by
the throughput acceptance check.  Each program declares a chain of
predicates over lists; construct literals are emitted in scrambled order so
the scheduler actually has to reorder them."""

from __future__ import annotations

import random

HEADER = """\
:- typedef abc -> a ; b ; c.
:- typedef list(T) -> ([] ; [T|list(T)]).
:- instdef list(I) -> ([]; [I|list(I)]).
:- instdef nelist(I) -> [I|list(I)].
:- modedef out(I) -> (new -> I).
:- modedef in(I) -> (I -> I).
"""


def generate_program(seed: int, max_literals: int = 200) -> str:
    rng = random.Random(seed)
    n_preds = rng.randint(2, 5)
    per_pred = max(3, max_literals // n_preds)
    chunks = [HEADER]
    for p in range(n_preds):
        chunks.append(_gen_pred(rng, p, per_pred))
    return "\n".join(chunks)


def _gen_pred(rng: random.Random, index: int, budget: int) -> str:
    name = f"p{index}"
    decls = [f":- pred {name}(list(abc), list(abc)).",
             f":- mode {name}(in, out) is semidet."]
    # 2*steps construct literals + optional deconstruct/call + final copy
    steps = max(1, (budget - 3) // 2)
    body = []
    prev = "L0"
    if rng.random() < 0.5:
        body.append("L0 = [E0|T0]")
        prev = "T0"
    for i in range(steps):
        body.append(f"X{i}E = {rng.choice('abc')}")
        body.append(f"X{i} = [X{i}E|{prev}]")
        prev = f"X{i}"
    rng.shuffle(body)
    if index > 0 and rng.random() < 0.7:
        body.append(f"p{rng.randrange(index)}({prev}, R)")
        prev = "R"
    body.append(f"Out = {prev}")
    clause = f"{name}(L0, Out) :- " + ", ".join(body) + "."
    return "\n".join(decls + [clause, ""])


def generate_corpus(count: int = 50, base_seed: int = 7,
                    max_literals: int = 200) -> list:
    return [generate_program(base_seed + i, max_literals)
            for i in range(count)]
