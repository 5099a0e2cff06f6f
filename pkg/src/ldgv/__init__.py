"""Label-dependent session types: parser, checker, evaluator and the LSST embedding."""

from .ast import alpha_eq, dual
from .checker import CheckError, Checker, check_program
from .parser import parse_expr, parse_ldgv, parse_lsst, parse_type
from .printer import show, show_program

__all__ = [
    "CheckError",
    "Checker",
    "alpha_eq",
    "check_program",
    "dual",
    "parse_expr",
    "parse_ldgv",
    "parse_lsst",
    "parse_type",
    "show",
    "show_program",
]
