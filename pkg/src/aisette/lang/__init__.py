"""Lexer, parser, printer and type checker for ``.bsq`` sources."""

from .checker import TypedModule, check_source, typecheck
from .lexer import tokenize
from .parser import parse_expr, parse_module
from .printer import print_module

__all__ = ["TypedModule", "check_source", "typecheck", "tokenize", "parse_expr", "parse_module", "print_module"]
