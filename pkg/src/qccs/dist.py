"""Finite distributions, relation lifting and weak transitions over a pLTS.

Both lifting and weak derivatives are decided by linear feasibility
programs (HiGHS through ``scipy.optimize.linprog``).

Weak derivatives use an occupation-measure program on a *phase graph*:
nodes are ``(phase, state)`` pairs, phase 0 before the visible step and
phase 1 after it.  Variables are the mass routed through each move and the
mass that stops at each final node; conservation holds at every node.  Any
feasible point is realised by a stationary randomised scheduler that stops
almost surely (flow on a closed non-stopping cycle carries no stopped mass),
so the program is exact on cyclic and acyclic systems alike.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

TOL = 1e-9
FEAS_MARGIN = 1e-7
TAU = "tau"


class DistError(ValueError):
    pass


# ═══════════════════════════════════════════════════════════════════════
# Distributions
# ═══════════════════════════════════════════════════════════════════════


class Distribution(Mapping):
    """Finite-support probability distribution.  Zero weights are dropped."""

    __slots__ = ("_w", "_hash")

    def __init__(self, weights=(), check: bool = True):
        acc: dict = {}
        items = weights.items() if isinstance(weights, Mapping) else weights
        for s, p in items:
            p = float(p)
            if p < -TOL:
                raise DistError(f"negative weight {p} for {s!r}")
            if p > 0:
                acc[s] = acc.get(s, 0.0) + p
        if check and abs(sum(acc.values()) - 1.0) > TOL:
            raise DistError(f"weights sum to {sum(acc.values())!r}, not 1")
        self._w = acc
        self._hash = None

    def __getitem__(self, s):
        return self._w.get(s, 0.0)

    def __iter__(self):
        return iter(self._w)

    def __len__(self):
        return len(self._w)

    def __contains__(self, s):
        return s in self._w

    def support(self) -> frozenset:
        return frozenset(self._w)

    def items(self):
        return self._w.items()

    def mass(self, states: Iterable) -> float:
        return sum(self._w.get(s, 0.0) for s in states)

    def map(self, f: Callable) -> "Distribution":
        """Push forward along ``f`` (weights of colliding images add up)."""
        return Distribution(((f(s), p) for s, p in self._w.items()), check=False)

    def close_to(self, other: "Distribution", tol: float = TOL) -> bool:
        keys = set(self._w) | set(other._w)
        return all(abs(self[k] - other[k]) <= tol for k in keys)

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.close_to(other)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._w))
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{s!r}: {p:.6g}" for s, p in self._w.items())
        return "{" + inner + "}"


def point(s) -> Distribution:
    return Distribution({s: 1.0}, check=False)


def convex_sum(weighted: Iterable[tuple[float, Distribution]], tol: float = TOL) -> Distribution:
    weighted = list(weighted)
    total = sum(float(p) for p, _ in weighted)
    if any(float(p) < -tol for p, _ in weighted):
        raise DistError("negative convex weight")
    if abs(total - 1.0) > tol:
        raise DistError(f"convex weights sum to {total!r}, not 1")
    acc: dict = {}
    for p, d in weighted:
        p = float(p)
        if p <= 0:
            continue
        for s, q in d.items():
            acc[s] = acc.get(s, 0.0) + p * q
    return Distribution(acc, check=False)


# ═══════════════════════════════════════════════════════════════════════
# pLTS
# ═══════════════════════════════════════════════════════════════════════


class PLTS:
    """Finite pLTS over integer state indices ``0..n-1``.

    ``trans[s]`` is the list of ``(label, Distribution over indices)`` leaving
    ``s``.  ``labels_of`` optional display forms live in ``display``.
    """

    def __init__(self, n_states: int, trans: Sequence[Sequence[tuple]],
                 tau: Hashable = TAU, display: Sequence[str] | None = None):
        self.n = n_states
        self.trans = [list(t) for t in trans]
        self.tau = tau
        self.display = list(display) if display is not None else [str(i) for i in range(n_states)]
        if len(self.trans) != n_states:
            raise DistError("transition table does not cover every state")
        for s, ts in enumerate(self.trans):
            for lab, d in ts:
                for t in d:
                    if not (isinstance(t, (int, np.integer)) and 0 <= t < n_states):
                        raise DistError(f"transition {s} --{lab}--> targets unknown state {t!r}")
        self._by_label = None

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], tau: Hashable = TAU) -> "PLTS":
        """Build from ``(source, label, {target: p})`` over arbitrary hashable states."""
        edges = list(edges)
        names: dict = {}

        def idx(x):
            if x not in names:
                names[x] = len(names)
            return names[x]

        raw = []
        for s, lab, tgt in edges:
            i = idx(s)
            tgt_items = tgt.items() if isinstance(tgt, Mapping) else tgt
            raw.append((i, lab, [(idx(t), p) for t, p in tgt_items]))
        trans = [[] for _ in names]
        for i, lab, tg in raw:
            trans[i].append((lab, Distribution(tg)))
        p = cls(len(names), trans, tau, display=[str(x) for x in names])
        p.names = names
        return p

    def labels(self) -> set:
        return {lab for ts in self.trans for lab, _ in ts}

    def by_label(self, s: int) -> dict:
        if self._by_label is None:
            tab = []
            for ts in self.trans:
                m: dict = {}
                for lab, d in ts:
                    m.setdefault(lab, []).append(d)
                tab.append(m)
            self._by_label = tab
        return self._by_label[s]

    def successors(self, s: int, label) -> list:
        return self.by_label(s).get(label, [])

    def is_tau_acyclic(self) -> bool:
        color = [0] * self.n
        for root in range(self.n):
            if color[root]:
                continue
            stack = [(root, iter(self._tau_succ(root)))]
            color[root] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[node] = 2
                    stack.pop()
                elif color[nxt] == 1:
                    return False
                elif color[nxt] == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(self._tau_succ(nxt))))
        return True

    def _tau_succ(self, s):
        out = set()
        for d in self.successors(s, self.tau):
            out.update(d)
        return out

    def to_document(self, label_str: Callable = str, fingerprints: Sequence[str] | None = None) -> dict:
        states = []
        for i in range(self.n):
            st = {"index": i, "term": self.display[i]}
            if fingerprints is not None:
                st["fingerprint"] = fingerprints[i]
            states.append(st)
        trans = []
        for s in range(self.n):
            for lab, d in self.trans[s]:
                tg = sorted(((t, p) for t, p in d.items()), key=lambda x: x[0])
                trans.append({"source": s, "label": label_str(lab),
                              "targets": [[round(p, 12), t] for t, p in tg]})
        return {"states": states, "transitions": trans}


# ═══════════════════════════════════════════════════════════════════════
# Lifting
# ═══════════════════════════════════════════════════════════════════════


def _in_rel(rel, s, t) -> bool:
    if callable(rel):
        return bool(rel(s, t))
    return (s, t) in rel


class _LP:
    """Tiny sparse equality-constrained feasibility program, x >= 0."""

    def __init__(self):
        self.nvar = 0
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.rhs: list[float] = []
        self.ub: dict[int, float] = {}

    def var(self, ub: float | None = None) -> int:
        i = self.nvar
        self.nvar += 1
        if ub is not None:
            self.ub[i] = ub
        return i

    def eq(self, coeffs: dict, rhs: float):
        r = len(self.rhs)
        for j, c in coeffs.items():
            if c != 0:
                self.rows.append(r)
                self.cols.append(j)
                self.vals.append(c)
        self.rhs.append(rhs)

    def solve(self, cost: dict | None = None):
        """Return the solution vector, or None when infeasible."""
        if self.nvar == 0:
            return np.zeros(0) if all(abs(b) <= FEAS_MARGIN for b in self.rhs) else None
        m = len(self.rhs)
        c = np.zeros(self.nvar)
        if cost:
            for j, v in cost.items():
                c[j] = v
        bounds = [(0, self.ub.get(j)) for j in range(self.nvar)]
        if m == 0:
            return np.zeros(self.nvar)
        A = coo_matrix((self.vals, (self.rows, self.cols)), shape=(m, self.nvar)).tocsr()
        b = np.array(self.rhs)
        res = linprog(c, A_eq=A, b_eq=b, bounds=bounds, method="highs",
                      options={"primal_feasibility_tolerance": 1e-9})
        if res.status != 0 or res.x is None:
            return None
        x = np.clip(res.x, 0, None)
        if np.max(np.abs(A @ x - b), initial=0.0) > FEAS_MARGIN:
            return None
        return x


@dataclass
class LiftResult:
    ok: bool
    # witness decomposition: list of (weight, s, t) with s R t; sums give d and e
    witness: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def lift_check(rel, d: Distribution, e: Distribution) -> LiftResult:
    """Does ``d`` lift(rel) ``e`` hold?  Decided as a transportation problem."""
    lp = _LP()
    w = {}
    for s in d:
        for t in e:
            if _in_rel(rel, s, t):
                w[(s, t)] = lp.var()
    for s, p in d.items():
        lp.eq({w[k]: 1.0 for k in w if k[0] == s}, p)
    for t, p in e.items():
        lp.eq({w[k]: 1.0 for k in w if k[1] == t}, p)
    x = lp.solve()
    if x is None:
        return LiftResult(False)
    wit = [(float(x[j]), s, t) for (s, t), j in w.items() if x[j] > 1e-12]
    return LiftResult(True, wit)


def left_decompose(rel, pieces: Sequence[tuple[float, Distribution]], theta: Distribution) -> list[Distribution]:
    """Split ``theta`` along a convex decomposition of the left-hand side.

    Given ``sum_i p_i D_i`` lift(rel) ``theta``, returns ``Theta_i`` with
    ``D_i`` lift(rel) ``Theta_i`` and ``sum_i p_i Theta_i = theta``.
    """
    total = convex_sum(pieces)
    lr = lift_check(rel, total, theta)
    if not lr.ok:
        raise DistError("left-hand side is not related to theta by the lifted relation")
    # Theta_i = sum_s D_i(s) * sum_{j: s_j = s} (q_j / D(s)) * point(t_j)
    by_src: dict = {}
    for q, s, t in lr.witness:
        by_src.setdefault(s, []).append((q, t))
    out = []
    for _, di in pieces:
        acc: dict = {}
        for s, ps in di.items():
            ds = total[s]
            for q, t in by_src.get(s, []):
                acc[t] = acc.get(t, 0.0) + ps * q / ds
        out.append(Distribution(acc, check=False))
    return out


def compose(rel1: Iterable[tuple], rel2: Iterable[tuple]) -> set:
    r2: dict = {}
    for m, t in rel2:
        r2.setdefault(m, set()).add(t)
    return {(s, t) for s, m in rel1 for t in r2.get(m, ())}


# ═══════════════════════════════════════════════════════════════════════
# Weak derivatives
# ═══════════════════════════════════════════════════════════════════════


WEAK = "weak"
STRONG = "strong"


@dataclass
class PhaseGraph:
    """Reachable moves for ``start ==label==>`` (or the strong single step).

    ``moves`` lists ``(node, {node: p})``; ``finals`` are the nodes at which
    mass may stop; ``start`` is the initial node distribution.
    """

    start: dict
    moves: list
    finals: list
    nodes: list

    def final_state(self, node) -> int:
        return node[1]


def phase_graph(plts: PLTS, start: Distribution, label, mode: str = WEAK) -> PhaseGraph:
    tau = plts.tau
    if mode == STRONG:
        moves = []
        finals = set()
        for s in start:
            for d in plts.successors(s, label):
                moves.append(((0, s), {(1, t): p for t, p in d.items()}))
                finals.update((1, t) for t in d)
        nodes = sorted({(0, s) for s in start} | finals)
        return PhaseGraph({(0, s): p for s, p in start.items()}, moves, sorted(finals), nodes)

    last = 0 if label == tau else 1
    seen = set()
    stack = [(0, s) for s in start]
    moves = []
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        ph, s = node
        for d in plts.successors(s, tau):
            tgt = {(ph, t): p for t, p in d.items()}
            moves.append((node, tgt))
            stack.extend(k for k in tgt if k not in seen)
        if ph == 0 and last == 1:
            for d in plts.successors(s, label):
                tgt = {(1, t): p for t, p in d.items()}
                moves.append((node, tgt))
                stack.extend(k for k in tgt if k not in seen)
    nodes = sorted(seen)
    finals = [nd for nd in nodes if nd[0] == last]
    return PhaseGraph({(0, s): p for s, p in start.items()}, moves, finals, nodes)


def _almost_sure(graph: PhaseGraph, allowed_final: Callable[[Any], bool]):
    """Nodes from which some scheduler stops at an allowed final node with probability 1,
    and the moves that stay inside that set."""
    finals_ok = {nd for nd in graph.finals if allowed_final(nd)}
    win = set(graph.nodes)
    moves = graph.moves
    while True:
        kept = [(src, tg) for src, tg in moves if src in win and all(k in win for k in tg)]
        # positive reachability of finals_ok inside `win` using kept moves
        pred: dict = {}
        for i, (src, tg) in enumerate(kept):
            for k in tg:
                pred.setdefault(k, []).append(src)
        reach = set(n for n in finals_ok if n in win)
        stack = list(reach)
        while stack:
            k = stack.pop()
            for src in pred.get(k, ()):
                if src not in reach:
                    reach.add(src)
                    stack.append(src)
        if reach == win:
            return win, kept, finals_ok
        win = reach
        if not win:
            return win, [], finals_ok


@dataclass
class MatchResult:
    ok: bool
    theta: Distribution | None = None
    # on an equivalence-relation match: the witness flow is implicit in block masses
    witness: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


class DerivativeProgram:
    """Feasibility program over the derivatives of one ``(start, label, mode)``.

    ``stop_vars`` maps each final state to the LP column of the mass stopped
    there; callers add their own columns and rows before ``solve``.
    """

    def __init__(self, graph: PhaseGraph, allowed_final: Callable[[int], bool] | None = None):
        self.graph = graph
        self.lp = _LP()
        self.feasible_shape = True
        allow = (lambda nd: allowed_final(nd[1])) if allowed_final else (lambda nd: True)
        win, moves, finals_ok = _almost_sure(graph, allow)
        if any(nd not in win for nd in graph.start):
            self.feasible_shape = False
            self.stop_vars = {}
            return
        lp = self.lp
        inflow: dict = {nd: {} for nd in win}
        outflow: dict = {nd: {} for nd in win}
        for src, tg in moves:
            j = lp.var()
            outflow[src][j] = outflow[src].get(j, 0.0) + 1.0
            for k, p in tg.items():
                inflow[k][j] = inflow[k].get(j, 0.0) + p
        self.stop_vars = {}
        for nd in sorted(finals_ok):
            if nd in win:
                j = lp.var()
                self.stop_vars[nd[1]] = j
                outflow[nd][j] = 1.0
        for nd in sorted(win):
            row = dict(outflow[nd])
            for j, p in inflow[nd].items():
                row[j] = row.get(j, 0.0) - p
            lp.eq(row, graph.start.get(nd, 0.0))

    def solve(self):
        if not self.feasible_shape:
            return None
        return self.lp.solve()

    def theta(self, x) -> Distribution:
        return Distribution({t: x[j] for t, j in self.stop_vars.items() if x[j] > 1e-12}, check=False)


class WeakOracle:
    """Answers matching queries ``start ==label==> Theta`` with ``target lift(rel) Theta``.

    Phase graphs are cached per ``(start, label)``; instances hold no other
    mutable state.
    """

    def __init__(self, plts: PLTS, mode: str = WEAK):
        self.plts = plts
        self.mode = mode
        self._graphs: dict = {}

    def graph(self, start: Distribution, label) -> PhaseGraph:
        key = (start, label)
        g = self._graphs.get(key)
        if g is None:
            g = phase_graph(self.plts, start, label, self.mode)
            self._graphs[key] = g
        return g

    def derivatives_exist(self, start: Distribution, label) -> bool:
        prog = DerivativeProgram(self.graph(start, label))
        return prog.solve() is not None

    def match_blocks(self, start: Distribution, label, target_mass: dict, block_of) -> MatchResult:
        """Match against an equivalence relation given by ``block_of``.

        ``target_mass`` maps block ids to the mass the derivative must carry.
        """
        allowed = lambda t: block_of(t) in target_mass
        prog = DerivativeProgram(self.graph(start, label), allowed)
        if not prog.feasible_shape:
            return MatchResult(False)
        rows: dict = {b: {} for b in target_mass}
        for t, j in prog.stop_vars.items():
            rows[block_of(t)][j] = 1.0
        for b, m in target_mass.items():
            if not rows[b] and m > TOL:
                return MatchResult(False)
            prog.lp.eq(rows[b], m)
        x = prog.solve()
        if x is None:
            return MatchResult(False)
        return MatchResult(True, prog.theta(x))

    def match(self, start: Distribution, label, target: Distribution, rel) -> MatchResult:
        """General relation: flow ``w(s, t)`` from target support to stopping states."""
        prog = DerivativeProgram(self.graph(start, label),
                                 lambda t: any(_in_rel(rel, s, t) for s in target))
        if not prog.feasible_shape:
            return MatchResult(False)
        lp = prog.lp
        w = {}
        for s in target:
            for t, j in prog.stop_vars.items():
                if _in_rel(rel, s, t):
                    w[(s, t)] = lp.var()
        for s, p in target.items():
            lp.eq({w[k]: 1.0 for k in w if k[0] == s}, p)
        for t, j in prog.stop_vars.items():
            row = {w[k]: 1.0 for k in w if k[1] == t}
            row[j] = -1.0
            lp.eq(row, 0.0)
        x = prog.solve()
        if x is None:
            return MatchResult(False)
        wit = [(float(x[j]), s, t) for (s, t), j in w.items() if x[j] > 1e-12]
        return MatchResult(True, prog.theta(x), wit)


def weak_derivatives(plts: PLTS, start, label, mode: str = WEAK) -> "Callable":
    """Derivative oracle for ``start``: call it with ``(target, rel)``."""
    if not isinstance(start, Distribution):
        start = point(start)
    oracle = WeakOracle(plts, mode)

    def query(target: Distribution, rel) -> MatchResult:
        return oracle.match(start, label, target, rel)

    query.oracle = oracle
    return query


# ═══════════════════════════════════════════════════════════════════════
# Brute-force reference (small acyclic systems only)
# ═══════════════════════════════════════════════════════════════════════


def derivative_vertices(plts: PLTS, start: Distribution, label, mode: str = WEAK,
                        limit: int = 200000) -> list[Distribution]:
    """Derivatives under every memoryless deterministic scheduler.

    On τ-acyclic systems the derivative set is the convex hull of these.
    """
    g = phase_graph(plts, start, label, mode)
    final = set(g.finals)
    choices: dict = {nd: [] for nd in g.nodes}
    for nd in g.nodes:
        if nd in final:
            choices[nd].append(None)
    for src, tg in g.moves:
        choices[src].append(tg)
    nodes = [nd for nd in g.nodes if choices[nd]]
    out = []
    total = 1
    for nd in nodes:
        total *= len(choices[nd])
        if total > limit:
            raise DistError("too many schedulers for brute-force enumeration")
    for pick in itertools.product(*(choices[nd] for nd in nodes)):
        sched = dict(zip(nodes, pick))
        mass = dict(g.start)
        stopped: dict = {}
        ok = True
        # acyclic: iterate until all mass settled
        for _ in range(len(g.nodes) + 2):
            if not mass:
                break
            nxt: dict = {}
            for nd, p in mass.items():
                if nd not in sched:
                    ok = False
                    break
                c = sched[nd]
                if c is None:
                    stopped[nd[1]] = stopped.get(nd[1], 0.0) + p
                else:
                    for k, q in c.items():
                        nxt[k] = nxt.get(k, 0.0) + p * q
            if not ok:
                break
            mass = nxt
        if ok and not mass:
            out.append(Distribution(stopped, check=False))
    uniq = []
    for d in out:
        if not any(d.close_to(u) for u in uniq):
            uniq.append(d)
    return uniq
