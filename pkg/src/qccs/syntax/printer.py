"""Pretty printer.  ``to_text(parse(s))`` reparses to an alpha-equivalent term.

``normal_form`` renames every bound variable to a canonical name so that
alpha-equivalent terms print identically; it is used as the term part of
configuration keys.
"""

from __future__ import annotations

import numpy as np

from ..values import format_value
from .ast import (
    BBin, BConst, BNot, Call, CInput, COutput, Compare, Const, ConstApp, Defs, If, Measure,
    Neg, Nil, Par, QInput, QOutput, Relabel, Restrict, Sum, SuperOpApp, Tau, Var, BinOp,
    expr_vars, fold,
)

PAR, SUM, PREFIX, POSTFIX, ATOM = range(5)


def _level(t) -> int:
    if isinstance(t, Par):
        return PAR
    if isinstance(t, Sum):
        return SUM
    if isinstance(t, (Relabel, Restrict)):
        return POSTFIX
    if isinstance(t, (Nil, ConstApp)):
        return ATOM
    return PREFIX


def expr_text(e, env: dict | None = None, normalize: bool = False) -> str:
    env = env or {}
    if normalize and not isinstance(e, (Const, BConst, Var)) and not expr_vars(e):
        e = fold(e)
    if isinstance(e, Const):
        return format_value(e.value)
    if isinstance(e, Var):
        return env.get(e.name, e.name)
    if isinstance(e, Neg):
        return f"-({expr_text(e.arg, env, normalize)})"
    if isinstance(e, BinOp):
        return f"({expr_text(e.left, env, normalize)} {e.op} {expr_text(e.right, env, normalize)})"
    if isinstance(e, Call):
        return f"{e.fn}(" + ", ".join(expr_text(a, env, normalize) for a in e.args) + ")"
    if isinstance(e, BConst):
        return "true" if e.value else "false"
    if isinstance(e, BNot):
        return f"not ({expr_text(e.arg, env, normalize)})"
    if isinstance(e, BBin):
        return f"({expr_text(e.left, env, normalize)} {e.op} {expr_text(e.right, env, normalize)})"
    if isinstance(e, Compare):
        return f"{expr_text(e.left, env, normalize)} {e.op} {expr_text(e.right, env, normalize)}"
    raise TypeError(f"not an expression: {e!r}")


class _Printer:
    def __init__(self, normalize: bool):
        self.normalize = normalize

    def run(self, t, ctx: int = PAR, cenv=None, qenv=None, depth=(0, 0)) -> str:
        cenv = cenv or {}
        qenv = qenv or {}
        s = self._render(t, cenv, qenv, depth)
        if _level(t) < ctx:
            return f"({s})"
        return s

    def _bind_c(self, x, cenv, depth):
        if not self.normalize:
            return x, cenv, depth
        nx = f"_x{depth[0]}"
        return nx, {**cenv, x: nx}, (depth[0] + 1, depth[1])

    def _bind_q(self, q, qenv, depth):
        if not self.normalize:
            return q, qenv, depth
        nq = f"_q{depth[1]}"
        return nq, {**qenv, q: nq}, (depth[0], depth[1] + 1)

    def _render(self, t, cenv, qenv, depth) -> str:
        qn = lambda q: qenv.get(q, q)
        ex = lambda e: expr_text(e, cenv, self.normalize)
        cont = lambda c, ce=cenv, qe=qenv, d=depth: self.run(c, PREFIX, ce, qe, d)
        if isinstance(t, Nil):
            return "nil"
        if isinstance(t, Tau):
            return "tau." + cont(t.cont)
        if isinstance(t, CInput):
            x, ce, d = self._bind_c(t.var, cenv, depth)
            return f"{t.chan}?{x}." + cont(t.cont, ce, qenv, d)
        if isinstance(t, COutput):
            e = ex(t.expr)
            if isinstance(t.expr, Neg):
                e = f"({e})"
            return f"{t.chan}!{e}." + cont(t.cont)
        if isinstance(t, QInput):
            q, qe, d = self._bind_q(t.qvar, qenv, depth)
            return f"{t.chan}?{q}." + cont(t.cont, cenv, qe, d)
        if isinstance(t, QOutput):
            return f"{t.chan}!{qn(t.qvar)}." + cont(t.cont)
        if isinstance(t, SuperOpApp):
            return f"{t.op}[{', '.join(qn(q) for q in t.qvars)}]." + cont(t.cont)
        if isinstance(t, Measure):
            x, ce, d = self._bind_c(t.var, cenv, depth)
            qs = ", ".join(qn(q) for q in t.qvars)
            return f"{t.meas}[{qs}; {x}]." + cont(t.cont, ce, qenv, d)
        if isinstance(t, Sum):
            return self.run(t.left, SUM, cenv, qenv, depth) + " + " + self.run(t.right, PREFIX, cenv, qenv, depth)
        if isinstance(t, Par):
            return self.run(t.left, PAR, cenv, qenv, depth) + " || " + self.run(t.right, SUM, cenv, qenv, depth)
        if isinstance(t, Relabel):
            fn = ", ".join(f"{a}->{b}" for a, b in t.fn)
            return self.run(t.cont, POSTFIX, cenv, qenv, depth) + f"[{fn}]"
        if isinstance(t, Restrict):
            chans = ", ".join(sorted(t.chans))
            return self.run(t.cont, POSTFIX, cenv, qenv, depth) + f" \\ {{{chans}}}"
        if isinstance(t, If):
            return f"if {ex(t.cond)} then " + cont(t.cont)
        if isinstance(t, ConstApp):
            if not t.qargs and not t.cargs:
                return t.name
            qs = ", ".join(qn(q) for q in t.qargs)
            if t.cargs:
                return f"{t.name}({qs}; {', '.join(ex(e) for e in t.cargs)})"
            return f"{t.name}({qs})"
        raise TypeError(f"not a process term: {t!r}")


def to_text(t) -> str:
    return _Printer(False).run(t)


def normal_form(t) -> str:
    cached = t.__dict__.get("_nf")
    if cached is None:
        cached = _Printer(True).run(t)
        object.__setattr__(t, "_nf", cached)
    return cached


def alpha_equivalent(a, b) -> bool:
    return normal_form(a) == normal_form(b)


# ═══════════════════════════════════════════════════════════════════════
# Whole files
# ═══════════════════════════════════════════════════════════════════════


def _num(z: complex) -> str:
    z = complex(z)
    if abs(z.imag) <= 0:
        return repr(float(z.real))
    return f"[{float(z.real)!r}, {float(z.imag)!r}]"


def matrix_text(m) -> str:
    m = np.asarray(m)
    return "[" + ", ".join("[" + ", ".join(_num(x) for x in row) + "]" for row in m) + "]"


def source_text(defs: Defs) -> str:
    """Render a full environment as source.  Families appear as their expanded members."""
    out = []
    if defs.qubits:
        out.append("qubits " + " ".join(defs.qubits) + ";")
    for c, dom in defs.channels.items():
        out.append(f"chan {c} : {{" + ", ".join(format_value(v) for v in dom) + "};")
    for c in sorted(defs.qchannels):
        out.append(f"qchan {c};")
    for name, op in defs.superops.items():
        out.append(f"superop {name} = kraus(" + ", ".join(matrix_text(k) for k in op.kraus) + ");")
    for name, m in defs.measurements.items():
        outs = ", ".join(f"{format_value(_as_val(lab))}: {matrix_text(E)}" for lab, E in m.outcomes)
        out.append(f"meas {name} = projectors({outs});")
    for name, fn in defs.relabels.items():
        out.append(f"relabel {name} = {{" + ", ".join(f"{a}->{b}" for a, b in fn.items()) + "};")
    if defs.init is not None:
        kind, val = defs.init
        out.append(f'init = "{val}";' if kind == "ket" else f"init = {matrix_text(val)};")
    for d in defs.consts.values():
        head = d.name
        if d.qparams or d.cparams:
            head += "(" + ", ".join(d.qparams) + ("; " + ", ".join(d.cparams) if d.cparams else "") + ")"
        out.append(f"def {head} = {to_text(d.body)};")
    if defs.main is not None:
        out.append(f"main = {to_text(defs.main)};")
    return "\n".join(out) + "\n"


def _as_val(v):
    from ..values import as_value
    return as_value(v)
