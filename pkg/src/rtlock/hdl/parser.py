"""Recursive-descent parser for the synthesizable Verilog-2005 subset.

Supported constructs:
  - one module per source, ANSI or non-ANSI port declarations
  - parameter / localparam with constant-expression values
  - wire / reg declarations (wire declarations may carry an initializer,
    which desugars to a continuous assign)
  - assign, always @(*) / @(posedge sig) / @(negedge sig)
  - if/else, case (with comma label lists and default), begin/end
  - blocking and non-blocking assignments
  - the standard two-state operators, concat, replication, bit- and
    part-select; declaration ranges and replication counts fold to
    constants (parameters allowed)
  - child-module instantiation (parsed only; never elaborated)

Everything else raises ParseError with kind="unsupported".  The parser
normalizes as it goes: branch/arm bodies always become Block nodes and
declaration ranges become plain widths, so printing followed by re-parsing
is structurally stable.
"""

from __future__ import annotations

from . import ast
from .lexer import MAX_WIDTH, Token, TokKind, lex, parse_literal
from .parse_errors import ParseError

_MAX_DEPTH = 200

# op -> binding power; higher binds tighter (Verilog-2005 precedence).
_BINARY_BP = {
    "||": 1, "&&": 2,
    "|": 3, "^": 4, "~^": 4, "^~": 4, "&": 5,
    "==": 6, "!=": 6,
    "<": 7, "<=": 7, ">": 7, ">=": 7,
    "<<": 8, ">>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
}

_UNARY_OPS = {"~", "!", "-", "+", "&", "|", "^", "~&", "~|", "~^"}


def parse_module(source: str) -> ast.AstModule:
    """Parse exactly one module; trailing content beyond it is an error."""
    toks = lex(source)
    p = _Parser(toks)
    mod = p.module()
    p.expect_eof()
    return mod


class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0
        self.depth = 0

    # ---- token plumbing ----

    def cur(self) -> Token:
        return self.toks[self.pos]

    def at(self, text: str) -> bool:
        t = self.cur()
        return t.text == text and t.kind in (TokKind.KEYWORD, TokKind.OP, TokKind.PUNCT)

    def at_kind(self, kind: TokKind) -> bool:
        return self.cur().kind == kind

    def take(self) -> Token:
        t = self.cur()
        if t.kind is not TokKind.EOF:
            self.pos += 1
        return t

    def eat(self, text: str) -> Token:
        if not self.at(text):
            raise self.err(f"expected '{text}'")
        return self.take()

    def eat_if(self, text: str) -> bool:
        if self.at(text):
            self.take()
            return True
        return False

    def ident(self) -> str:
        t = self.cur()
        if t.kind is not TokKind.IDENT:
            raise self.err("expected identifier")
        self.take()
        return t.text

    def err(self, msg: str, kind: str = "syntax", construct: str | None = None) -> ParseError:
        t = self.cur()
        got = f" (got {t.text!r})" if t.text else " (got end of input)"
        return ParseError(msg + got, kind=kind, line=t.line, col=t.col, construct=construct)

    def expect_eof(self) -> None:
        if self.cur().kind is not TokKind.EOF:
            raise self.err("a single module per source is supported; trailing content",
                           kind="unsupported", construct="multiple modules")

    # ---- module ----

    def module(self) -> ast.AstModule:
        self.eat("module")
        name = self.ident()
        b = _ModuleBuilder(name)

        if self.eat_if("#"):
            self.eat("(")
            while not self.at(")"):
                self.eat("parameter")
                self._param_decl(b, local=False)
                if not self.eat_if(","):
                    break
            self.eat(")")

        if self.eat_if("("):
            if not self.at(")"):
                self._port_list(b)
            self.eat(")")
        self.eat(";")

        while not self.at("endmodule"):
            if self.cur().kind is TokKind.EOF:
                raise self.err("missing 'endmodule'")
            self.module_item(b)
        self.eat("endmodule")
        return b.finish(self)

    def _port_list(self, b: "_ModuleBuilder") -> None:
        # ANSI style carries directions inline; plain identifier lists defer
        # to body declarations.
        direction = None
        is_reg = False
        width, ranged = 1, False
        while True:
            if self.at("input") or self.at("output") or self.at("inout"):
                direction = self.take().text
                is_reg = self.eat_if("reg")
                if self.eat_if("wire"):
                    pass
                width, ranged = self.opt_range(b)
            elif self.at("wire") or self.at("reg"):
                if direction is None:
                    raise self.err("port direction required before wire/reg")
                is_reg = self.take().text == "reg"
                width, ranged = self.opt_range(b)
            name = self.ident()
            if direction is None:
                b.add_header_port(name, self)
            else:
                b.add_port(ast.Port(name, direction, width, is_reg, ranged), self)
            if not self.eat_if(","):
                break

    def opt_range(self, b: "_ModuleBuilder") -> tuple[int, bool]:
        """Parse an optional ``[msb:lsb]`` and fold it to a width."""
        if not self.at("["):
            return 1, False
        self.eat("[")
        msb = self.const_expr(b)
        self.eat(":")
        lsb = self.const_expr(b)
        self.eat("]")
        if lsb != 0 or msb < lsb:
            raise self.err(f"only descending [N:0] ranges are supported, got [{msb}:{lsb}]",
                           kind="unsupported", construct="non-[N:0] range")
        width = msb - lsb + 1
        if width > MAX_WIDTH:
            raise self.err(f"range width {width} exceeds the {MAX_WIDTH}-bit bound",
                           kind="unsupported", construct="wide range")
        return width, True

    def _param_decl(self, b: "_ModuleBuilder", local: bool) -> None:
        while True:
            name = self.ident()
            self.eat("=")
            value = self.const_expr_node(b)
            b.add_param(ast.Param(name, value, local), self)
            if self.at(",") and self.toks[self.pos + 1].kind is TokKind.IDENT \
                    and self.toks[self.pos + 2].text == "=":
                self.take()
                continue
            break

    # ---- module items ----

    def module_item(self, b: "_ModuleBuilder") -> None:
        if self.at("parameter") or self.at("localparam"):
            local = self.take().text == "localparam"
            self._param_decl(b, local)
            self.eat(";")
            return
        if self.at("input") or self.at("output") or self.at("inout"):
            direction = self.take().text
            is_reg = self.eat_if("reg")
            width, ranged = self.opt_range(b)
            while True:
                name = self.ident()
                b.declare_nonansi(name, direction, width, is_reg, ranged, self)
                if not self.eat_if(","):
                    break
            self.eat(";")
            return
        if self.at("wire") or self.at("reg"):
            kind = self.take().text
            width, ranged = self.opt_range(b)
            while True:
                name = self.ident()
                init = None
                if self.eat_if("="):
                    if kind == "reg":
                        raise self.err("reg initializers are not supported",
                                       kind="unsupported", construct="reg initializer")
                    init = self.expr(b)
                b.declare_net(kind, name, width, ranged, init, self)
                if not self.eat_if(","):
                    break
            self.eat(";")
            return
        if self.at("assign"):
            self.take()
            target = self.lvalue(b)
            self.eat("=")
            rhs = self.expr(b)
            self.eat(";")
            b.items.append(ast.ContAssign(target, rhs))
            return
        if self.at("always"):
            self.take()
            b.items.append(self.always_block(b))
            return
        if self.at_kind(TokKind.IDENT):
            b.items.append(self.instance(b))
            return
        raise self.err("expected a module item")

    def always_block(self, b: "_ModuleBuilder") -> ast.AlwaysBlock:
        self.eat("@")
        edge = None
        clock = None
        if self.eat_if("("):
            if self.eat_if("*"):
                pass
            elif self.at("posedge") or self.at("negedge"):
                edge = self.take().text
                clock = self.ident()
                if self.at("or") or self.at(","):
                    raise self.err("multi-signal sensitivity lists are not supported",
                                   kind="unsupported", construct="multi-edge sensitivity")
            else:
                raise self.err("only @(*) and single-edge sensitivity are supported",
                               kind="unsupported", construct="named sensitivity list")
            self.eat(")")
        elif self.eat_if("*"):
            pass
        else:
            raise self.err("expected sensitivity list")
        body = self.stmt_as_block(b, in_seq=edge is not None)
        return ast.AlwaysBlock(edge, clock, body)

    def instance(self, b: "_ModuleBuilder") -> ast.Instance:
        mod_name = self.ident()
        if self.at("#"):
            raise self.err("instance parameter overrides are not supported",
                           kind="unsupported", construct="instance parameters")
        inst_name = self.ident()
        self.eat("(")
        conns: list[tuple[str | None, ast.Expr]] = []
        if not self.at(")"):
            while True:
                if self.eat_if("."):
                    port = self.ident()
                    self.eat("(")
                    expr = None if self.at(")") else self.expr(b)
                    self.eat(")")
                    if expr is not None:
                        conns.append((port, expr))
                else:
                    conns.append((None, self.expr(b)))
                if not self.eat_if(","):
                    break
        self.eat(")")
        self.eat(";")
        return ast.Instance(mod_name, inst_name, tuple(conns))

    # ---- statements ----

    def stmt_as_block(self, b: "_ModuleBuilder", in_seq: bool) -> ast.Block:
        """Parse one statement, normalizing to a Block."""
        s = self.stmt(b, in_seq)
        if isinstance(s, ast.Block):
            return s
        return ast.Block((s,))

    def stmt(self, b: "_ModuleBuilder", in_seq: bool) -> ast.Stmt:
        self.depth += 1
        if self.depth > _MAX_DEPTH:
            raise ParseError("statement nesting too deep", kind="syntax",
                             line=self.cur().line, col=self.cur().col)
        try:
            if self.at("begin"):
                self.take()
                if self.at(":"):
                    raise self.err("named blocks are not supported",
                                   kind="unsupported", construct="named block")
                stmts = []
                while not self.at("end"):
                    if self.cur().kind is TokKind.EOF:
                        raise self.err("missing 'end'")
                    stmts.append(self.stmt(b, in_seq))
                self.eat("end")
                return ast.Block(tuple(stmts))
            if self.at("if"):
                self.take()
                self.eat("(")
                cond = self.expr(b)
                self.eat(")")
                then = self.stmt_as_block(b, in_seq)
                other = None
                if self.eat_if("else"):
                    other = self.stmt_as_block(b, in_seq)
                return ast.If(cond, then, other)
            if self.at("case"):
                self.take()
                self.eat("(")
                subject = self.expr(b)
                self.eat(")")
                arms = []
                default = None
                while not self.at("endcase"):
                    if self.cur().kind is TokKind.EOF:
                        raise self.err("missing 'endcase'")
                    if self.eat_if("default"):
                        self.eat_if(":")
                        default = self.stmt_as_block(b, in_seq)
                        continue
                    labels = [self.expr(b)]
                    while self.eat_if(","):
                        labels.append(self.expr(b))
                    self.eat(":")
                    arms.append(ast.CaseArm(tuple(labels), self.stmt_as_block(b, in_seq)))
                self.eat("endcase")
                return ast.Case(subject, tuple(arms), default)
            if self.at("#"):
                raise self.err("delays are not supported",
                               kind="unsupported", construct="delay control")
            # assignment
            target = self.lvalue(b)
            if self.at("<="):
                self.take()
                blocking = False
            elif self.at("="):
                self.take()
                blocking = True
            else:
                raise self.err("expected '=' or '<='")
            rhs = self.expr(b)
            self.eat(";")
            return ast.Assign(target, rhs, blocking)
        finally:
            self.depth -= 1

    def lvalue(self, b: "_ModuleBuilder") -> ast.Expr:
        name = self.ident()
        if self.at("."):
            raise self.err("hierarchical names are not supported",
                           kind="unsupported", construct="hierarchical name")
        if self.at("["):
            return self._select(b, name)
        return ast.Ref(name)

    # ---- expressions ----

    def expr(self, b: "_ModuleBuilder") -> ast.Expr:
        self.depth += 1
        if self.depth > _MAX_DEPTH:
            raise ParseError("expression nesting too deep", kind="syntax",
                             line=self.cur().line, col=self.cur().col)
        try:
            return self.ternary(b)
        finally:
            self.depth -= 1

    def ternary(self, b: "_ModuleBuilder") -> ast.Expr:
        cond = self.binary(b, 1)
        if self.eat_if("?"):
            then = self.expr(b)
            self.eat(":")
            other = self.expr(b)
            return ast.Ternary(cond, then, other)
        return cond

    def binary(self, b: "_ModuleBuilder", min_bp: int) -> ast.Expr:
        left = self.unary(b)
        while True:
            t = self.cur()
            if t.kind is not TokKind.OP:
                return left
            bp = _BINARY_BP.get(t.text)
            if bp is None or bp < min_bp:
                return left
            self.take()
            right = self.binary(b, bp + 1)
            left = ast.Binary(t.text, left, right)

    def unary(self, b: "_ModuleBuilder") -> ast.Expr:
        t = self.cur()
        if t.kind is TokKind.OP and t.text in _UNARY_OPS:
            self.take()
            return ast.Unary(t.text, self.unary(b))
        return self.primary(b)

    def primary(self, b: "_ModuleBuilder") -> ast.Expr:
        t = self.cur()
        if self.eat_if("("):
            e = self.expr(b)
            self.eat(")")
            return e
        if self.at("{"):
            return self.concat(b)
        if t.kind is TokKind.NUMBER:
            self.take()
            width, value, sized = parse_literal(t.text)
            return ast.Const(width, value, sized)
        if t.kind is TokKind.IDENT:
            name = self.ident()
            if self.at("."):
                raise self.err("hierarchical names are not supported",
                               kind="unsupported", construct="hierarchical name")
            if self.at("["):
                return self._select(b, name)
            return ast.Ref(name)
        raise self.err("expected an expression")

    def _select(self, b: "_ModuleBuilder", name: str) -> ast.Expr:
        self.eat("[")
        # look ahead for the +: / -: indexed part-select punctuation
        depth = 1
        for i in range(self.pos, len(self.toks) - 1):
            text = self.toks[i].text
            if text == "[":
                depth += 1
            elif text == "]":
                depth -= 1
                if depth == 0:
                    break
            elif depth == 1 and text in ("+", "-") \
                    and self.toks[i + 1].text == ":":
                raise self.err("indexed part-selects are not supported",
                               kind="unsupported", construct="indexed part-select")
        first = self.expr(b)
        if self.eat_if(":"):
            msb = self._fold(first, b)
            lsb = self.const_expr(b)
            self.eat("]")
            if msb < lsb:
                raise self.err("part-select must be [msb:lsb] with msb >= lsb",
                               kind="semantic")
            return ast.Slice(name, msb, lsb)
        self.eat("]")
        return ast.Index(name, first)

    def concat(self, b: "_ModuleBuilder") -> ast.Expr:
        self.eat("{")
        first = self.expr(b)
        if self.at("{"):  # replication: {count{value}}
            count = self._fold(first, b)
            if count < 1 or count > MAX_WIDTH:
                raise self.err("replication count out of range", kind="semantic")
            self.eat("{")
            value = self.expr(b)
            if self.eat_if(","):
                raise self.err("replication takes a single operand; wrap a concat "
                               "in braces")
            self.eat("}")
            self.eat("}")
            return ast.Repeat(count, value)
        parts = [first]
        while self.eat_if(","):
            parts.append(self.expr(b))
        self.eat("}")
        return ast.Concat(tuple(parts))

    # ---- constant folding (ranges, replication counts, parameter values) ----

    def const_expr(self, b: "_ModuleBuilder") -> int:
        return self._fold(self.expr(b), b)

    def const_expr_node(self, b: "_ModuleBuilder") -> ast.Const:
        e = self.expr(b)
        if isinstance(e, ast.Const):
            return e
        value = self._fold(e, b)
        return ast.Const(32, value, sized=False)

    def _fold(self, e: ast.Expr, b: "_ModuleBuilder") -> int:
        if isinstance(e, ast.Const):
            return e.value
        if isinstance(e, ast.Ref):
            p = b.params.get(e.name)
            if p is None:
                raise self.err(f"'{e.name}' is not a parameter; ranges and counts "
                               "must be compile-time constants", kind="semantic")
            return p.value.value
        if isinstance(e, ast.Unary) and e.op in ("-", "+", "~"):
            v = self._fold(e.operand, b)
            if e.op == "-":
                return -v
            if e.op == "~":
                return ~v
            return v
        if isinstance(e, ast.Binary):
            l = self._fold(e.left, b)
            r = self._fold(e.right, b)
            try:
                return {
                    "+": lambda: l + r, "-": lambda: l - r, "*": lambda: l * r,
                    "/": lambda: l // r if r else 0, "%": lambda: l % r if r else 0,
                    "<<": lambda: l << min(r, MAX_WIDTH), ">>": lambda: l >> min(r, MAX_WIDTH),
                    "&": lambda: l & r, "|": lambda: l | r, "^": lambda: l ^ r,
                }[e.op]()
            except KeyError:
                raise self.err(f"operator '{e.op}' not allowed in constant expressions",
                               kind="semantic") from None
        raise self.err("expected a compile-time constant expression", kind="semantic")


class _ModuleBuilder:
    """Accumulates declarations, then validates and freezes the module."""

    def __init__(self, name: str):
        self.name = name
        self.port_order: list[str] = []
        self.port_map: dict[str, ast.Port | None] = {}  # None until declared (non-ANSI)
        self.params: dict[str, ast.Param] = {}
        self.param_order: list[str] = []
        self.nets: dict[str, ast.NetDecl] = {}
        self.items: list[ast.Item] = []

    def _check_fresh(self, name: str, p: _Parser) -> None:
        if name in self.port_map or name in self.params or name in self.nets:
            raise ParseError(f"duplicate declaration of '{name}'", kind="semantic",
                             line=p.cur().line, col=p.cur().col)

    def add_header_port(self, name: str, p: _Parser) -> None:
        self._check_fresh(name, p)
        self.port_order.append(name)
        self.port_map[name] = None

    def add_port(self, port: ast.Port, p: _Parser) -> None:
        self._check_fresh(port.name, p)
        self.port_order.append(port.name)
        self.port_map[port.name] = port

    def add_param(self, param: ast.Param, p: _Parser) -> None:
        self._check_fresh(param.name, p)
        self.params[param.name] = param
        self.param_order.append(param.name)

    def declare_nonansi(self, name, direction, width, is_reg, ranged, p: _Parser) -> None:
        if name not in self.port_map:
            raise ParseError(f"'{name}' declared {direction} but not in the port list",
                             kind="semantic", line=p.cur().line, col=p.cur().col)
        existing = self.port_map[name]
        if existing is not None:
            raise ParseError(f"port '{name}' declared twice", kind="semantic",
                             line=p.cur().line, col=p.cur().col)
        self.port_map[name] = ast.Port(name, direction, width, is_reg, ranged)

    def declare_net(self, kind, name, width, ranged, init, p: _Parser) -> None:
        # "reg y;" after "output y;" upgrades the port rather than declaring a net.
        existing = self.port_map.get(name)
        if existing is not None and kind == "reg":
            self.port_map[name] = ast.Port(existing.name, existing.direction,
                                           existing.width, True, existing.ranged)
            return
        self._check_fresh(name, p)
        self.nets[name] = ast.NetDecl(kind, name, width, ranged)
        self.items.append(self.nets[name])
        if init is not None:
            self.items.append(ast.ContAssign(ast.Ref(name), init))

    def finish(self, p: _Parser) -> ast.AstModule:
        ports = []
        for name in self.port_order:
            port = self.port_map[name]
            if port is None:
                raise ParseError(f"port '{name}' has no direction declaration",
                                 kind="semantic", line=p.cur().line, col=p.cur().col)
            ports.append(port)
        mod = ast.AstModule(
            self.name,
            tuple(ports),
            tuple(self.params[n] for n in self.param_order),
            tuple(self.items),
        )
        _validate(mod, p)
        return mod


def _validate(mod: ast.AstModule, p: _Parser) -> None:
    declared: dict[str, str] = {}
    for port in mod.ports:
        declared[port.name] = "reg" if (port.direction == "output" and port.is_reg) \
            else port.direction
    for param in mod.params:
        declared[param.name] = "param"
    for item in mod.items:
        if isinstance(item, ast.NetDecl):
            declared[item.name] = item.kind

    def sem(msg: str) -> ParseError:
        return ParseError(msg, kind="semantic", line=p.cur().line, col=p.cur().col)

    def check_expr(e: ast.Expr) -> None:
        if isinstance(e, ast.Ref):
            if e.name not in declared:
                raise sem(f"undeclared identifier '{e.name}'")
        elif isinstance(e, (ast.Index, ast.Slice)):
            if e.name not in declared:
                raise sem(f"undeclared identifier '{e.name}'")
            if isinstance(e, ast.Index):
                check_expr(e.index)
        elif isinstance(e, ast.Unary):
            check_expr(e.operand)
        elif isinstance(e, ast.Binary):
            check_expr(e.left)
            check_expr(e.right)
        elif isinstance(e, ast.Ternary):
            check_expr(e.cond)
            check_expr(e.then)
            check_expr(e.other)
        elif isinstance(e, ast.Concat):
            for part in e.parts:
                check_expr(part)
        elif isinstance(e, ast.Repeat):
            check_expr(e.value)

    def target_class(e: ast.Expr) -> str:
        name = e.name if isinstance(e, (ast.Ref, ast.Index, ast.Slice)) else None
        if name is None or name not in declared:
            raise sem("assignment target must be a declared signal")
        return declared[name]

    def check_stmt(s: ast.Stmt) -> None:
        if isinstance(s, ast.Assign):
            cls = target_class(s.target)
            if cls != "reg":
                raise sem("procedural assignment targets must be declared reg")
            if isinstance(s.target, ast.Index):
                check_expr(s.target.index)
            check_expr(s.rhs)
        elif isinstance(s, ast.If):
            check_expr(s.cond)
            check_stmt(s.then)
            if s.other is not None:
                check_stmt(s.other)
        elif isinstance(s, ast.Case):
            check_expr(s.subject)
            for arm in s.arms:
                for label in arm.labels:
                    check_expr(label)
                check_stmt(arm.body)
            if s.default is not None:
                check_stmt(s.default)
        elif isinstance(s, ast.Block):
            for sub in s.stmts:
                check_stmt(sub)

    for item in mod.items:
        if isinstance(item, ast.ContAssign):
            cls = target_class(item.target)
            if cls not in ("wire", "output", "inout"):
                raise sem("continuous assignment targets must be nets")
            if isinstance(item.target, ast.Index):
                check_expr(item.target.index)
            check_expr(item.rhs)
        elif isinstance(item, ast.AlwaysBlock):
            if item.clock is not None and item.clock not in declared:
                raise sem(f"undeclared identifier '{item.clock}'")
            check_stmt(item.body)
        elif isinstance(item, ast.Instance):
            for _, expr in item.conns:
                check_expr(expr)
