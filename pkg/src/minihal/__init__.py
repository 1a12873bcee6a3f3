"""Mode checker and clause-body reordering pass for mini-HAL programs."""

from .ast import Diagnostic, MiniHalError, Program
from .frontend import (
    assign_types,
    expand_equivalences,
    load_program,
    normalize,
)
from .parser import parse_program
from .scheduler import Checker, CheckResult, Procedure, verify_procedure
from .cli import main, render_procedure

__all__ = [
    "Checker",
    "CheckResult",
    "Diagnostic",
    "MiniHalError",
    "Procedure",
    "Program",
    "assign_types",
    "expand_equivalences",
    "load_program",
    "main",
    "normalize",
    "parse_program",
    "render_procedure",
    "verify_procedure",
]
