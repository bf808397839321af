"""Free variables, legality checking and capture-avoiding substitution."""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    BExpr, CInput, COutput, ConstApp, Defs, Expr, If, Measure, Nil, Par, Proc, QInput,
    QOutput, Relabel, Restrict, Sum, SuperOpApp, Tau, expr_vars, subst_expr,
)


def qv(t: Proc) -> frozenset:
    return t.qv


def fv(t: Proc) -> frozenset:
    cached = t.__dict__.get("_fv")
    if cached is not None:
        return cached
    if isinstance(t, Nil):
        out = frozenset()
    elif isinstance(t, (Tau, QInput, QOutput, SuperOpApp, Relabel, Restrict)):
        out = fv(t.cont)
    elif isinstance(t, CInput):
        out = fv(t.cont) - {t.var}
    elif isinstance(t, Measure):
        out = fv(t.cont) - {t.var}
    elif isinstance(t, COutput):
        out = expr_vars(t.expr) | fv(t.cont)
    elif isinstance(t, If):
        out = expr_vars(t.cond) | fv(t.cont)
    elif isinstance(t, (Sum, Par)):
        out = fv(t.left) | fv(t.right)
    elif isinstance(t, ConstApp):
        out = frozenset()
        for e in t.cargs:
            out |= expr_vars(e)
    else:
        raise TypeError(f"not a process term: {t!r}")
    object.__setattr__(t, "_fv", out)
    return out


# ═══════════════════════════════════════════════════════════════════════
# Legality
# ═══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class LegalityReport:
    ok: bool
    condition: str = ""  # "1", "2", "3" for the no-cloning conditions, else a short tag
    path: tuple = ()
    message: str = ""

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "legal"
        where = "/".join(self.path) or "<root>"
        return f"condition {self.condition} violated at {where}: {self.message}"


def _walk(t: Proc, defs: Defs | None, path: tuple, used: set):
    if isinstance(t, QOutput):
        if t.qvar in t.cont.qv:
            return LegalityReport(False, "1", path, f"{t.qvar} is used after being sent on {t.chan}")
    if isinstance(t, Par):
        both = t.left.qv & t.right.qv
        if both:
            names = ", ".join(sorted(both))
            return LegalityReport(False, "2", path, f"parallel components share {names}")
    if isinstance(t, (SuperOpApp, Measure)):
        if len(set(t.qvars)) != len(t.qvars):
            return LegalityReport(False, "distinct", path, f"repeated qubit in {list(t.qvars)}")
        if defs is not None:
            table = defs.superops if isinstance(t, SuperOpApp) else defs.measurements
            name = t.op if isinstance(t, SuperOpApp) else t.meas
            if name not in table:
                return LegalityReport(False, "unbound", path, f"unknown operator {name}")
            if table[name].arity != len(t.qvars):
                return LegalityReport(False, "arity", path,
                                      f"{name} acts on {table[name].arity} qubit(s), given {len(t.qvars)}")
    if isinstance(t, ConstApp):
        if len(set(t.qargs)) != len(t.qargs):
            return LegalityReport(False, "distinct", path, f"repeated qubit argument to {t.name}")
        if defs is not None:
            d = defs.consts.get(t.name)
            if d is None:
                return LegalityReport(False, "3", path, f"constant {t.name} has no definition")
            if len(d.qparams) != len(t.qargs) or len(d.cparams) != len(t.cargs):
                return LegalityReport(False, "arity", path, f"wrong number of arguments to {t.name}")
            if t.name not in used:
                used.add(t.name)
                r = check_definition(d, defs, used)
                if not r.ok:
                    return r
        return LegalityReport(True)
    if isinstance(t, Sum):
        r = _walk(t.left, defs, path + ("sum.left",), used)
        return r if not r.ok else _walk(t.right, defs, path + ("sum.right",), used)
    if isinstance(t, Par):
        r = _walk(t.left, defs, path + ("par.left",), used)
        return r if not r.ok else _walk(t.right, defs, path + ("par.right",), used)
    if isinstance(t, Nil):
        return LegalityReport(True)
    return _walk(t.cont, defs, path + (type(t).__name__.lower(),), used)


def check_definition(d, defs: Defs, used: set | None = None) -> LegalityReport:
    used = used if used is not None else {d.name}
    path = (f"def {d.name}",)
    if len(set(d.qparams)) != len(d.qparams):
        return LegalityReport(False, "distinct", path, "repeated quantum parameter")
    extra_q = d.body.qv - set(d.qparams)
    if extra_q:
        return LegalityReport(False, "3", path, f"body uses quantum variables {sorted(extra_q)} beyond its parameters")
    extra_c = fv(d.body) - set(d.cparams)
    if extra_c:
        return LegalityReport(False, "3", path, f"body has free classical variables {sorted(extra_c)}")
    return _walk(d.body, defs, path, used)


def check_legal(t: Proc, defs: Defs | None = None) -> LegalityReport:
    """First violated legality condition, searching depth first, left to right."""
    return _walk(t, defs, (), set())


def is_closed(t: Proc) -> bool:
    return not fv(t)


# ═══════════════════════════════════════════════════════════════════════
# Substitution
# ═══════════════════════════════════════════════════════════════════════


def fresh(base: str, avoid) -> str:
    name = base + "'"
    while name in avoid:
        name += "'"
    return name


def all_qnames(t: Proc) -> set:
    """Every quantum variable name occurring in ``t``, free or bound."""
    out = set()
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, (QInput, QOutput)):
            out.add(x.qvar)
        elif isinstance(x, (SuperOpApp, Measure)):
            out.update(x.qvars)
        elif isinstance(x, ConstApp):
            out.update(x.qargs)
        if isinstance(x, (Sum, Par)):
            stack.extend([x.left, x.right])
        elif not isinstance(x, (Nil, ConstApp)):
            stack.append(x.cont)
    return out


def substitute(t: Proc, cvals: dict | None = None, qrename: dict | None = None) -> Proc:
    """Simultaneous substitution ``t[v/x, r/q]`` avoiding capture of quantum binders."""
    cvals = dict(cvals or {})
    qrename = {k: v for k, v in (qrename or {}).items() if k != v}
    if len(set(qrename.values())) != len(qrename):
        raise ValueError("quantum renaming must be injective")
    return _sub(t, cvals, qrename)


def _sub(t: Proc, env: dict, qm: dict) -> Proc:
    if env:
        env = {k: v for k, v in env.items() if k in fv(t)}
    if qm:
        qm = {k: v for k, v in qm.items() if k in t.qv}
    if not env and not qm:
        return t
    r = lambda q: qm.get(q, q)
    if isinstance(t, Tau):
        return Tau(_sub(t.cont, env, qm))
    if isinstance(t, CInput):
        e2 = {k: v for k, v in env.items() if k != t.var}
        return CInput(t.chan, t.var, _sub(t.cont, e2, qm))
    if isinstance(t, COutput):
        return COutput(t.chan, subst_expr(t.expr, env), _sub(t.cont, env, qm))
    if isinstance(t, QOutput):
        return QOutput(t.chan, r(t.qvar), _sub(t.cont, env, qm))
    if isinstance(t, QInput):
        q2 = {k: v for k, v in qm.items() if k != t.qvar}
        binder = t.qvar
        if binder in q2.values():
            avoid = all_qnames(t.cont) | set(q2) | set(q2.values())
            nb = fresh(binder, avoid)
            q2[binder] = nb
            binder = nb
        return QInput(t.chan, binder, _sub(t.cont, env, q2))
    if isinstance(t, SuperOpApp):
        return SuperOpApp(t.op, tuple(r(q) for q in t.qvars), _sub(t.cont, env, qm))
    if isinstance(t, Measure):
        e2 = {k: v for k, v in env.items() if k != t.var}
        return Measure(t.meas, tuple(r(q) for q in t.qvars), t.var, _sub(t.cont, e2, qm))
    if isinstance(t, Sum):
        return Sum(_sub(t.left, env, qm), _sub(t.right, env, qm))
    if isinstance(t, Par):
        return Par(_sub(t.left, env, qm), _sub(t.right, env, qm))
    if isinstance(t, Relabel):
        return Relabel(_sub(t.cont, env, qm), t.fn)
    if isinstance(t, Restrict):
        return Restrict(_sub(t.cont, env, qm), t.chans)
    if isinstance(t, If):
        return If(subst_expr(t.cond, env), _sub(t.cont, env, qm))
    if isinstance(t, ConstApp):
        return ConstApp(t.name, tuple(r(q) for q in t.qargs),
                        tuple(subst_expr(e, env) for e in t.cargs))
    raise TypeError(f"cannot substitute into {t!r}")
