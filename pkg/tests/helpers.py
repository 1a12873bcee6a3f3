"""Shared test helpers: corpus loading and alpha-renaming-tolerant
comparison of rendered procedures."""

from __future__ import annotations

import pathlib
import re

from minihal import Checker, load_program, render_procedure

PROGRAMS = pathlib.Path(__file__).parent / "programs"

# names the checker or normalizer invents; golden comparisons treat them up
# to consistent renaming
_FRESH = re.compile(r"\b(?:V_\d+_\d+|F_\d+|Fresh_\d+|A\d+_*)\b")
_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|[^\sA-Za-z_]+|\s+")


def corpus(name: str) -> str:
    return (PROGRAMS / name).read_text(encoding="utf-8")


def check_source(source: str, allow_init: bool = True):
    program = load_program(source)
    checker = Checker(program, allow_init=allow_init)
    return checker.check_program(), checker


def check_corpus(name: str, allow_init: bool = True):
    return check_source(corpus(name), allow_init=allow_init)


def rendered(result) -> dict:
    return {p.name: render_procedure(p) for p in result.procedures}


def canon(text: str) -> str:
    """Rename generated variables to f1, f2, ... in order of appearance."""
    mapping: dict = {}

    def repl(m: re.Match) -> str:
        name = m.group(0)
        if name not in mapping:
            mapping[name] = f"f{len(mapping) + 1}"
        return mapping[name]

    return _FRESH.sub(repl, text)


def alpha_eq(got: str, want: str) -> bool:
    return canon(got.strip()) == canon(want.strip())


def assert_alpha_eq(got: str, want: str) -> None:
    assert alpha_eq(got, want), (
        f"rendered procedure differs\n--- got ---\n{got}\n--- want ---\n"
        f"{want}\n--- canon got ---\n{canon(got)}\n--- canon want ---\n"
        f"{canon(want)}")
