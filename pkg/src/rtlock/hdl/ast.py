"""Typed AST for the supported synthesizable Verilog-2005 subset.

All nodes are frozen dataclasses: immutable after construction, safe to
share across threads, and comparable structurally with ``==``.  Collections
are tuples so that node identity is purely value-based.

Width conventions: declaration ranges are folded to plain bit counts at
parse time (``[7:0]`` becomes ``width=8``), and every constant literal
carries an explicit width (unsized decimals default to 32 bits, flagged
with ``sized=False``).
"""

from __future__ import annotations

from dataclasses import dataclass, field


# ---------------------------------------------------------------- expressions


class Expr:
    """Base class for expression nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    """Integer literal. ``sized`` distinguishes ``8'h2a`` from bare ``42``."""

    width: int
    value: int
    sized: bool = True


@dataclass(frozen=True)
class Ref(Expr):
    """Reference to a declared port, net, reg, or parameter."""

    name: str


@dataclass(frozen=True)
class Index(Expr):
    """Single bit-select ``name[expr]``; the index may be a runtime value."""

    name: str
    index: Expr


@dataclass(frozen=True)
class Slice(Expr):
    """Constant part-select ``name[msb:lsb]`` with msb >= lsb."""

    name: str
    msb: int
    lsb: int


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Ternary(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass(frozen=True)
class Concat(Expr):
    parts: tuple[Expr, ...]


@dataclass(frozen=True)
class Repeat(Expr):
    """Replication ``{count{value}}``; the count folds to a constant."""

    count: int
    value: Expr


# ----------------------------------------------------------------- statements


class Stmt:
    """Base class for procedural statements."""

    __slots__ = ()


@dataclass(frozen=True)
class Assign(Stmt):
    """Procedural assignment; ``blocking`` selects ``=`` vs ``<=``."""

    target: Expr  # Ref | Index | Slice
    rhs: Expr
    blocking: bool


@dataclass(frozen=True)
class If(Stmt):
    """``if``/``else``. Branch bodies are always Block nodes (canonical form)."""

    cond: Expr
    then: "Block"
    other: "Block | None" = None


@dataclass(frozen=True)
class CaseArm:
    labels: tuple[Expr, ...]
    body: "Block"


@dataclass(frozen=True)
class Case(Stmt):
    subject: Expr
    arms: tuple[CaseArm, ...]
    default: "Block | None" = None


@dataclass(frozen=True)
class Block(Stmt):
    stmts: tuple[Stmt, ...]


# ---------------------------------------------------------------- module items


class Item:
    """Base class for module-body items."""

    __slots__ = ()


@dataclass(frozen=True)
class NetDecl(Item):
    """Internal ``wire`` or ``reg`` declaration (ports live on the module)."""

    kind: str  # "wire" | "reg"
    name: str
    width: int
    ranged: bool = False  # explicit [msb:lsb] was written even when width == 1

    def __post_init__(self):
        if self.width > 1:  # multi-bit declarations always carry a range
            object.__setattr__(self, "ranged", True)


@dataclass(frozen=True)
class ContAssign(Item):
    target: Expr  # Ref | Index | Slice
    rhs: Expr


@dataclass(frozen=True)
class AlwaysBlock(Item):
    """``always @(posedge clk)``/``@(negedge clk)`` when edge is set, else ``@(*)``."""

    edge: str | None
    clock: str | None
    body: Block


@dataclass(frozen=True)
class Instance(Item):
    """Child-module instantiation; parsed but never elaborated."""

    module: str
    name: str
    conns: tuple[tuple[str | None, Expr], ...]  # (.port(expr)) or positional (None, expr)


# --------------------------------------------------------------------- module


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "input" | "output" | "inout"
    width: int
    is_reg: bool = False
    ranged: bool = False

    def __post_init__(self):
        if self.width > 1:
            object.__setattr__(self, "ranged", True)


@dataclass(frozen=True)
class Param:
    name: str
    value: Const
    local: bool = False


@dataclass(frozen=True)
class AstModule:
    name: str
    ports: tuple[Port, ...]
    params: tuple[Param, ...] = field(default=())
    items: tuple[Item, ...] = field(default=())

    def port(self, name: str) -> Port | None:
        for p in self.ports:
            if p.name == name:
                return p
        return None
