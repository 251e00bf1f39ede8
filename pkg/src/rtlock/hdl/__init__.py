"""Verilog-2005 subset front end: lexer, parser, canonical printer, AST tools."""

from .ast import (
    AlwaysBlock, Assign, AstModule, Binary, Block, Case, CaseArm, Concat,
    Const, ContAssign, Expr, If, Index, Instance, Item, NetDecl, Param, Port,
    Ref, Repeat, Slice, Stmt, Ternary, Unary,
)
from .extract import extract_module_from_completion
from .lexer import TokKind, Token, lex
from .parse_errors import ExtractError, ParseError
from .parser import parse_module
from .paths import (
    Path, declared_names, format_path, get_at, parse_path, rename_identifiers,
    replace_at, rewrite,
)
from .printer import format_const, print_module
from .widths import decl_widths, max_eval_width, self_width

__all__ = [
    "AlwaysBlock", "Assign", "AstModule", "Binary", "Block", "Case", "CaseArm",
    "Concat", "Const", "ContAssign", "Expr", "ExtractError", "If", "Index",
    "Instance", "Item", "NetDecl", "Param", "ParseError", "Path", "Port",
    "Ref", "Repeat", "Slice", "Stmt", "Ternary", "TokKind", "Token", "Unary",
    "decl_widths", "declared_names", "extract_module_from_completion",
    "format_const", "format_path", "get_at", "lex", "max_eval_width",
    "parse_module", "parse_path", "print_module", "rename_identifiers",
    "replace_at", "rewrite", "self_width",
]
