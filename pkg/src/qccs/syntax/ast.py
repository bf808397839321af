"""Abstract syntax of qCCS terms and classical expressions.

All nodes are frozen dataclasses.  Expressions evaluate exactly over
``Fraction`` and ``Bits`` values (see ``qccs.values``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from ..values import Bits, Value, as_value


class EvalError(ValueError):
    pass


# ═══════════════════════════════════════════════════════════════════════
# Classical expressions
# ═══════════════════════════════════════════════════════════════════════


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: Value

    def __post_init__(self):
        object.__setattr__(self, "value", as_value(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # + - *
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str  # cmp, substr, remstr, len, cat
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


class BExpr:
    __slots__ = ()


@dataclass(frozen=True)
class BConst(BExpr):
    value: bool


@dataclass(frozen=True)
class BNot(BExpr):
    arg: BExpr


@dataclass(frozen=True)
class BBin(BExpr):
    op: str  # and, or, =>
    left: BExpr
    right: BExpr


@dataclass(frozen=True)
class Compare(BExpr):
    op: str  # = < > <= >=
    left: Expr
    right: Expr


def cmp_bits(x: Bits, y: Bits, z: Bits) -> Bits:
    """Bits of ``x`` at the positions where ``y`` and ``z`` agree."""
    if not (len(x) == len(y) == len(z)):
        raise EvalError("cmp needs three strings of equal length")
    return Bits([a for a, b, c in zip(x, y, z) if b == c])


def substr_bits(x: Bits, mask: Bits) -> Bits:
    """Bits of ``x`` selected by the 1-positions of ``mask``."""
    if len(x) != len(mask):
        raise EvalError("substr needs a mask of the same length")
    return Bits([a for a, m in zip(x, mask) if m])


def remstr_bits(x: Bits, mask: Bits) -> Bits:
    if len(x) != len(mask):
        raise EvalError("remstr needs a mask of the same length")
    return Bits([a for a, m in zip(x, mask) if not m])


FUNCTIONS = {
    "cmp": (3, cmp_bits),
    "substr": (2, substr_bits),
    "remstr": (2, remstr_bits),
    "len": (1, lambda x: Fraction(len(x))),
    "cat": (2, lambda x, y: Bits(tuple(x) + tuple(y))),
}


def eval_expr(e: Expr, env: dict | None = None) -> Value:
    env = env or {}
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        if e.name not in env:
            raise EvalError(f"unbound classical variable {e.name}")
        return env[e.name]
    if isinstance(e, Neg):
        v = eval_expr(e.arg, env)
        if isinstance(v, Bits):
            raise EvalError("cannot negate a bit string")
        return -v
    if isinstance(e, BinOp):
        a, b = eval_expr(e.left, env), eval_expr(e.right, env)
        if isinstance(a, Bits) or isinstance(b, Bits):
            raise EvalError(f"arithmetic '{e.op}' on bit strings")
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        raise EvalError(f"unknown operator {e.op}")
    if isinstance(e, Call):
        arity, fn = FUNCTIONS[e.fn]
        args = [eval_expr(a, env) for a in e.args]
        if len(args) != arity:
            raise EvalError(f"{e.fn} takes {arity} argument(s)")
        if any(not isinstance(a, Bits) for a in args):
            raise EvalError(f"{e.fn} expects bit strings")
        return fn(*args)
    raise TypeError(f"not an expression: {e!r}")


def _order(a: Value, b: Value, op: str) -> bool:
    if isinstance(a, Bits) or isinstance(b, Bits):
        raise EvalError(f"ordering '{op}' on bit strings")
    return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[op]


def eval_bexpr(b: BExpr, env: dict | None = None) -> bool:
    env = env or {}
    if isinstance(b, BConst):
        return b.value
    if isinstance(b, BNot):
        return not eval_bexpr(b.arg, env)
    if isinstance(b, BBin):
        x = eval_bexpr(b.left, env)
        if b.op == "and":
            return x and eval_bexpr(b.right, env)
        if b.op == "or":
            return x or eval_bexpr(b.right, env)
        if b.op == "=>":
            return (not x) or eval_bexpr(b.right, env)
        raise EvalError(f"unknown connective {b.op}")
    if isinstance(b, Compare):
        x, y = eval_expr(b.left, env), eval_expr(b.right, env)
        if b.op == "=":
            return x == y
        return _order(x, y, b.op)
    raise TypeError(f"not a boolean expression: {b!r}")


def expr_vars(e) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, (Const, BConst)):
        return frozenset()
    if isinstance(e, (Neg,)):
        return expr_vars(e.arg)
    if isinstance(e, BNot):
        return expr_vars(e.arg)
    if isinstance(e, (BinOp, BBin, Compare)):
        return expr_vars(e.left) | expr_vars(e.right)
    if isinstance(e, Call):
        out = frozenset()
        for a in e.args:
            out |= expr_vars(a)
        return out
    raise TypeError(f"not an expression: {e!r}")


def subst_expr(e, env: dict):
    """Replace variables bound in ``env`` by constants, folding closed subterms."""
    if isinstance(e, Var):
        return Const(env[e.name]) if e.name in env else e
    if isinstance(e, (Const, BConst)):
        return e
    if isinstance(e, Neg):
        out = Neg(subst_expr(e.arg, env))
    elif isinstance(e, BinOp):
        out = BinOp(e.op, subst_expr(e.left, env), subst_expr(e.right, env))
    elif isinstance(e, Call):
        out = Call(e.fn, tuple(subst_expr(a, env) for a in e.args))
    elif isinstance(e, BNot):
        out = BNot(subst_expr(e.arg, env))
    elif isinstance(e, BBin):
        out = BBin(e.op, subst_expr(e.left, env), subst_expr(e.right, env))
    elif isinstance(e, Compare):
        out = Compare(e.op, subst_expr(e.left, env), subst_expr(e.right, env))
    else:
        raise TypeError(f"not an expression: {e!r}")
    return fold(out)


def fold(e):
    """Evaluate a closed expression to a constant when evaluation succeeds."""
    if isinstance(e, (Const, BConst)) or expr_vars(e):
        return e
    try:
        if isinstance(e, BExpr):
            return BConst(eval_bexpr(e))
        return Const(eval_expr(e))
    except EvalError:
        return e


# ═══════════════════════════════════════════════════════════════════════
# Process terms
# ═══════════════════════════════════════════════════════════════════════


class Proc:
    """Base class of process terms."""

    __slots__ = ()

    @property
    def qv(self) -> frozenset:
        cached = self.__dict__.get("_qv")
        if cached is None:
            cached = _qv(self)
            object.__setattr__(self, "_qv", cached)
        return cached


@dataclass(frozen=True)
class Nil(Proc):
    pass


@dataclass(frozen=True)
class Tau(Proc):
    cont: Proc


@dataclass(frozen=True)
class CInput(Proc):
    chan: str
    var: str
    cont: Proc


@dataclass(frozen=True)
class COutput(Proc):
    chan: str
    expr: Expr
    cont: Proc


@dataclass(frozen=True)
class QInput(Proc):
    chan: str
    qvar: str
    cont: Proc


@dataclass(frozen=True)
class QOutput(Proc):
    chan: str
    qvar: str
    cont: Proc


@dataclass(frozen=True)
class SuperOpApp(Proc):
    op: str
    qvars: tuple
    cont: Proc

    def __post_init__(self):
        object.__setattr__(self, "qvars", tuple(self.qvars))


@dataclass(frozen=True)
class Measure(Proc):
    meas: str
    qvars: tuple
    var: str
    cont: Proc

    def __post_init__(self):
        object.__setattr__(self, "qvars", tuple(self.qvars))


@dataclass(frozen=True)
class Sum(Proc):
    left: Proc
    right: Proc


@dataclass(frozen=True)
class Par(Proc):
    left: Proc
    right: Proc


@dataclass(frozen=True)
class Relabel(Proc):
    cont: Proc
    fn: tuple  # sorted ((old, new), ...)

    def __post_init__(self):
        items = self.fn.items() if isinstance(self.fn, dict) else self.fn
        object.__setattr__(self, "fn", tuple(sorted(tuple(p) for p in items)))

    def mapping(self) -> dict:
        return dict(self.fn)


@dataclass(frozen=True)
class Restrict(Proc):
    cont: Proc
    chans: frozenset

    def __post_init__(self):
        object.__setattr__(self, "chans", frozenset(self.chans))


@dataclass(frozen=True)
class If(Proc):
    cond: BExpr
    cont: Proc


@dataclass(frozen=True)
class ConstApp(Proc):
    name: str
    qargs: tuple = ()
    cargs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "qargs", tuple(self.qargs))
        object.__setattr__(self, "cargs", tuple(self.cargs))


PREFIXES = (Tau, CInput, COutput, QInput, QOutput, SuperOpApp, Measure)


def _qv(t: Proc) -> frozenset:
    if isinstance(t, Nil):
        return frozenset()
    if isinstance(t, (Tau, CInput, COutput, Relabel, Restrict, If)):
        return t.cont.qv
    if isinstance(t, QInput):
        return t.cont.qv - {t.qvar}
    if isinstance(t, QOutput):
        return t.cont.qv | {t.qvar}
    if isinstance(t, (SuperOpApp, Measure)):
        return t.cont.qv | frozenset(t.qvars)
    if isinstance(t, (Sum, Par)):
        return t.left.qv | t.right.qv
    if isinstance(t, ConstApp):
        return frozenset(t.qargs)
    raise TypeError(f"not a process term: {t!r}")


def children(t: Proc) -> list[Proc]:
    if isinstance(t, (Sum, Par)):
        return [t.left, t.right]
    if isinstance(t, (Nil, ConstApp)):
        return []
    return [t.cont]


def subterms(t: Proc) -> Iterable[Proc]:
    stack = [t]
    while stack:
        x = stack.pop()
        yield x
        stack.extend(children(x))


def size(t: Proc) -> int:
    return sum(1 for _ in subterms(t))


def make_sum(terms: list[Proc]) -> Proc:
    if not terms:
        return Nil()
    out = terms[0]
    for x in terms[1:]:
        out = Sum(out, x)
    return out


# ═══════════════════════════════════════════════════════════════════════
# Definitions environment
# ═══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class Definition:
    name: str
    qparams: tuple
    cparams: tuple
    body: Proc


@dataclass
class Defs:
    """Everything a source file declares besides the main term."""

    qubits: tuple = ()
    channels: dict = field(default_factory=dict)  # classical name -> tuple of values
    qchannels: set = field(default_factory=set)
    superops: dict = field(default_factory=dict)  # name -> SuperOp
    measurements: dict = field(default_factory=dict)  # name -> ProjMeasurement
    relabels: dict = field(default_factory=dict)  # name -> dict
    consts: dict = field(default_factory=dict)  # name -> Definition
    families: dict = field(default_factory=dict)  # name -> kind
    init: object = None  # optional initial state spec from the source
    main: Proc | None = None

    def domain(self, chan: str) -> tuple:
        try:
            return self.channels[chan]
        except KeyError:
            raise KeyError(f"undeclared classical channel {chan}") from None

    def is_qchan(self, c: str) -> bool:
        return c in self.qchannels

    def merged(self, other: "Defs") -> "Defs":
        """Union of two environments; clashing names must agree."""
        out = Defs(
            qubits=self.qubits + tuple(q for q in other.qubits if q not in self.qubits),
            channels=dict(self.channels),
            qchannels=set(self.qchannels) | set(other.qchannels),
            superops=dict(self.superops),
            measurements=dict(self.measurements),
            relabels=dict(self.relabels),
            consts=dict(self.consts),
            families=dict(self.families),
            init=self.init,
        )
        for tab_name in ("channels", "superops", "measurements", "relabels", "consts", "families"):
            mine, theirs = getattr(out, tab_name), getattr(other, tab_name)
            for k, v in theirs.items():
                if k in mine and mine[k] is not v and not _same(mine[k], v):
                    raise ValueError(f"conflicting declarations of {k}")
                mine[k] = v
        return out


def _same(a, b) -> bool:
    import numpy as np

    if hasattr(a, "kraus") and hasattr(b, "kraus"):
        return len(a.kraus) == len(b.kraus) and all(
            x.shape == y.shape and np.allclose(x, y) for x, y in zip(a.kraus, b.kraus))
    if hasattr(a, "outcomes") and hasattr(b, "outcomes"):
        return len(a.outcomes) == len(b.outcomes) and all(
            la == lb and np.allclose(x, y) for (la, x), (lb, y) in zip(a.outcomes, b.outcomes))
    try:
        return bool(a == b)
    except Exception:
        return False
