"""Dense linear algebra over small qubit registers.

Matrices are plain ``numpy`` complex arrays.  A register fixes the tensor
order: the first variable is the most significant index position, so
``tensor(A, B)`` acting on ``(q1, q2)`` means ``A`` on ``q1`` and ``B`` on ``q2``.

Everything here is immutable once built.  Arrays held by ``DensityOp``,
``SuperOp`` and ``ProjMeasurement`` are marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

TOL = 1e-9
EIG_TOL = 1e-7
P_FLOOR = 1e-12
MAX_QUBITS = 8


class QLinError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    m = np.array(a, dtype=complex)
    m.setflags(write=False)
    return m


# ═══════════════════════════════════════════════════════════════════════
# Registers
# ═══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class QReg:
    """An ordered set of qubit names."""

    vars: tuple[str, ...]
    max_qubits: int = MAX_QUBITS

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        if len(set(self.vars)) != len(self.vars):
            raise QLinError(f"duplicate qubit names in register {self.vars}")
        if len(self.vars) > self.max_qubits:
            raise QLinError(
                f"register of {len(self.vars)} qubits exceeds the cap of {self.max_qubits}"
            )

    @property
    def n(self) -> int:
        return len(self.vars)

    @property
    def dim(self) -> int:
        return 2 ** len(self.vars)

    def index(self, v: str) -> int:
        try:
            return self.vars.index(v)
        except ValueError:
            raise QLinError(f"unknown quantum variable {v!r}") from None

    def positions(self, names: Iterable[str]) -> list[int]:
        return [self.index(v) for v in names]

    def sub(self, names: Iterable[str]) -> "QReg":
        """Subregister keeping the canonical order of this register."""
        keep = set(names)
        for v in keep:
            self.index(v)
        return QReg(tuple(v for v in self.vars if v in keep), self.max_qubits)

    def complement(self, names: Iterable[str]) -> tuple[str, ...]:
        drop = set(names)
        return tuple(v for v in self.vars if v not in drop)

    def __contains__(self, v) -> bool:
        return v in self.vars


# ═══════════════════════════════════════════════════════════════════════
# Named vectors and gates
# ═══════════════════════════════════════════════════════════════════════

_S2 = 1 / np.sqrt(2)
_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([_S2, _S2], dtype=complex),
    "-": np.array([_S2, -_S2], dtype=complex),
}

GATES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _S2,
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}


def gate(name: str) -> np.ndarray:
    try:
        return GATES[name].copy()
    except KeyError:
        raise QLinError(f"unknown gate {name!r}") from None


def ket(s: str) -> np.ndarray:
    """State vector for a string over ``01+-``, e.g. ``ket("0+")``."""
    if not s:
        return np.ones(1, dtype=complex)
    out = np.ones(1, dtype=complex)
    for ch in s:
        if ch not in _KETS:
            raise QLinError(f"bad ket character {ch!r} in {s!r}")
        out = np.kron(out, _KETS[ch])
    return out


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def ket_projector(s: str) -> np.ndarray:
    return projector(ket(s))


def tensor(a, b) -> np.ndarray:
    """Kronecker product; ``a`` occupies the high-order positions."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def tensor_all(mats: Sequence) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def _nqubits(dim: int) -> int:
    k = int(round(np.log2(dim))) if dim > 0 else -1
    if k < 0 or 2**k != dim:
        raise QLinError(f"dimension {dim} is not a power of two")
    return k


def embed(op, on: Sequence[str], reg: QReg) -> np.ndarray:
    """Extend ``op`` (acting on the qubits ``on``, in that order) to all of ``reg``."""
    op = np.asarray(op, dtype=complex)
    on = tuple(on)
    if len(set(on)) != len(on):
        raise QLinError(f"repeated qubit in {on}")
    pos = reg.positions(on)
    k = len(on)
    if op.shape != (2**k, 2**k):
        raise QLinError(f"operator of shape {op.shape} cannot act on {k} qubit(s)")
    n = reg.n
    rest = [v for v in reg.vars if v not in on]
    full = np.kron(op, np.eye(2 ** (n - k), dtype=complex))
    if n == 0:
        return full
    order = list(on) + rest  # axis order of `full`
    perm = [order.index(v) for v in reg.vars]
    t = full.reshape([2] * (2 * n))
    t = t.transpose(perm + [n + p for p in perm])
    return t.reshape(2**n, 2**n)


# ═══════════════════════════════════════════════════════════════════════
# States, channels, measurements
# ═══════════════════════════════════════════════════════════════════════


def is_hermitian(m, tol: float = TOL) -> bool:
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T), initial=0.0) <= tol


class DensityOp:
    """A density operator on a register.

    Validation (Hermitian, eigenvalues >= -tol, unit trace) runs unless
    ``check=False`` is passed, which internal code uses for results of
    operations that preserve validity by construction.
    """

    __slots__ = ("reg", "mat")

    def __init__(self, reg: QReg, mat, check: bool = True, tol: float = TOL):
        m = np.asarray(mat, dtype=complex)
        if m.shape != (reg.dim, reg.dim):
            raise QLinError(f"matrix shape {m.shape} does not fit register of dim {reg.dim}")
        if check:
            if not is_hermitian(m, tol):
                raise QLinError("density operator is not Hermitian")
            if abs(np.trace(m) - 1) > tol:
                raise QLinError(f"density operator has trace {np.trace(m).real:.12g}")
            if reg.dim and np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -tol:
                raise QLinError("density operator is not positive")
        if m.flags.writeable:
            m = m.copy()
            m.setflags(write=False)
        object.__setattr__(self, "reg", reg)
        object.__setattr__(self, "mat", m)

    def __setattr__(self, k, v):
        raise AttributeError("DensityOp is immutable")

    @classmethod
    def from_ket(cls, reg: QReg, s: str) -> "DensityOp":
        if len(s) != reg.n:
            raise QLinError(f"ket {s!r} has wrong length for register {reg.vars}")
        return cls(reg, ket_projector(s))

    @classmethod
    def from_vector(cls, reg: QReg, vec) -> "DensityOp":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise QLinError("zero vector")
        return cls(reg, projector(v / nrm))

    @classmethod
    def maximally_mixed(cls, reg: QReg) -> "DensityOp":
        return cls(reg, np.eye(reg.dim) / reg.dim)

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def close_to(self, other: "DensityOp", tol: float = TOL) -> bool:
        return self.reg.vars == other.reg.vars and bool(
            np.max(np.abs(self.mat - other.mat), initial=0.0) <= tol
        )

    def tensor(self, other: "DensityOp") -> "DensityOp":
        reg = QReg(self.reg.vars + other.reg.vars, max(self.reg.max_qubits, other.reg.max_qubits))
        return DensityOp(reg, np.kron(self.mat, other.mat), check=False)

    def __repr__(self):
        return f"DensityOp(reg={self.reg.vars}, dim={self.reg.dim})"


@dataclass(frozen=True, eq=False)
class SuperOp:
    """Kraus presentation of a completely positive map on ``arity`` qubits.

    ``acts_on`` is optional: a named super-operator in a source file is
    declared once and then applied to whatever qubits a term names.
    """

    kraus: tuple
    trace_preserving: bool = True
    acts_on: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        ks = tuple(_frozen(k) for k in self.kraus)
        if not ks:
            raise QLinError("a super-operator needs at least one Kraus operator")
        d = ks[0].shape[0]
        for k in ks:
            if k.shape != (d, d):
                raise QLinError("Kraus operators must be square and of equal size")
        _nqubits(d)
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "acts_on", tuple(self.acts_on))
        if self.acts_on and 2 ** len(self.acts_on) != d:
            raise QLinError(f"{len(self.acts_on)} target qubit(s) but Kraus dim {d}")
        s = sum(k.conj().T @ k for k in ks)
        if self.trace_preserving:
            if np.max(np.abs(s - np.eye(d)), initial=0.0) > TOL:
                raise QLinError(f"super-operator {self.name or ''} is not trace preserving")
        elif np.linalg.eigvalsh((s + s.conj().T) / 2).max() > 1 + TOL:
            raise QLinError(f"super-operator {self.name or ''} increases trace")

    @property
    def arity(self) -> int:
        return _nqubits(self.kraus[0].shape[0])

    def on(self, qubits: Sequence[str]) -> "SuperOp":
        return SuperOp(self.kraus, self.trace_preserving, tuple(qubits), self.name)

    def then(self, other: "SuperOp") -> "SuperOp":
        """Composite map: first ``self`` then ``other`` (same arity)."""
        if self.arity != other.arity:
            raise QLinError("cannot compose super-operators of different arity")
        ks = [b @ a for a in self.kraus for b in other.kraus]
        ks = [k for k in ks if np.max(np.abs(k)) > TOL] or ks[:1]
        return SuperOp(tuple(ks), self.trace_preserving and other.trace_preserving,
                       self.acts_on, f"{self.name};{other.name}")

    def choi(self) -> np.ndarray:
        d = self.kraus[0].shape[0]
        out = np.zeros((d * d, d * d), dtype=complex)
        for k in self.kraus:
            v = k.reshape(-1)
            out += np.outer(v, v.conj())
        return out


@dataclass(frozen=True, eq=False)
class ProjMeasurement:
    """Projective measurement ``sum_m lambda_m E_m``.

    Outcome labels are usually real eigenvalues; basis measurements over
    several qubits use bit strings as labels instead, which plays the same
    role (distinct labels, one projector each).
    """

    outcomes: tuple  # of (label, projector)
    acts_on: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        outs = tuple((lab, _frozen(E)) for lab, E in self.outcomes)
        if not outs:
            raise QLinError("measurement with no outcomes")
        d = outs[0][1].shape[0]
        _nqubits(d)
        labels = [lab for lab, _ in outs]
        for i, a in enumerate(labels):
            for b in labels[i + 1:]:
                if _labels_clash(a, b):
                    raise QLinError(f"measurement outcomes {a!r} and {b!r} coincide")
        total = np.zeros((d, d), dtype=complex)
        for lab, E in outs:
            if E.shape != (d, d):
                raise QLinError("projectors must have equal size")
            if not is_hermitian(E) or np.max(np.abs(E @ E - E)) > TOL:
                raise QLinError(f"outcome {lab!r} is not an orthogonal projector")
            total = total + E
        if np.max(np.abs(total - np.eye(d))) > TOL:
            raise QLinError("projectors do not sum to the identity")
        object.__setattr__(self, "outcomes", outs)
        object.__setattr__(self, "acts_on", tuple(self.acts_on))
        if self.acts_on and 2 ** len(self.acts_on) != d:
            raise QLinError(f"{len(self.acts_on)} target qubit(s) but projector dim {d}")

    @property
    def arity(self) -> int:
        return _nqubits(self.outcomes[0][1].shape[0])

    @property
    def non_degenerate(self) -> bool:
        return all(round(np.trace(E).real) == 1 for _, E in self.outcomes)

    def on(self, qubits: Sequence[str]) -> "ProjMeasurement":
        return ProjMeasurement(self.outcomes, tuple(qubits), self.name)

    def observable(self) -> np.ndarray:
        return sum(float(lab) * E for lab, E in self.outcomes)


def _labels_clash(a: Hashable, b: Hashable) -> bool:
    if isinstance(a, (int, float, complex)) and isinstance(b, (int, float, complex)):
        return abs(complex(a) - complex(b)) <= EIG_TOL
    try:
        return a == b
    except Exception:
        return False


# ═══════════════════════════════════════════════════════════════════════
# Operations on density operators
# ═══════════════════════════════════════════════════════════════════════


def _resolve_targets(obj, on, reg: QReg) -> tuple[str, ...]:
    targets = tuple(on) if on is not None else obj.acts_on
    if not targets and obj.arity:
        raise QLinError("no target qubits given")
    if len(targets) != obj.arity:
        raise QLinError(f"{obj.name or 'operator'} acts on {obj.arity} qubit(s), got {len(targets)}")
    if len(set(targets)) != len(targets):
        raise QLinError(f"repeated target qubit in {targets}")
    reg.positions(targets)
    return targets


def _left(op: np.ndarray, rt: np.ndarray, pos: list[int]) -> np.ndarray:
    k = len(pos)
    ot = op.reshape([2] * (2 * k))
    out = np.tensordot(ot, rt, axes=(list(range(k, 2 * k)), pos))
    return np.moveaxis(out, list(range(k)), pos)


def _right_dagger(rt: np.ndarray, op: np.ndarray, pos: list[int], n: int) -> np.ndarray:
    # rho @ op^dagger on the column axes
    k = len(pos)
    ot = op.conj().reshape([2] * (2 * k))
    cols = [n + p for p in pos]
    out = np.tensordot(rt, ot, axes=(cols, list(range(k, 2 * k))))
    # new axes are appended at the end in order; move them back
    return np.moveaxis(out, list(range(2 * n - k, 2 * n)), cols)


def conjugate(op, rho: DensityOp, on: Sequence[str]) -> np.ndarray:
    """``Ẽ ρ Ẽ†`` for ``Ẽ`` the embedding of ``op`` (unnormalised matrix)."""
    reg = rho.reg
    n = reg.n
    pos = reg.positions(on)
    rt = rho.mat.reshape([2] * (2 * n)) if n else rho.mat
    if n == 0:
        return rho.mat.copy()
    op = np.asarray(op, dtype=complex)
    t = _left(op, rt, pos)
    t = _right_dagger(t, op, pos, n)
    return t.reshape(reg.dim, reg.dim)


def apply_superop(e: SuperOp, rho: DensityOp, on: Sequence[str] | None = None) -> DensityOp:
    targets = _resolve_targets(e, on, rho.reg)
    acc = np.zeros_like(rho.mat)
    for k in e.kraus:
        acc = acc + conjugate(k, rho, targets)
    acc = (acc + acc.conj().T) / 2
    if not e.trace_preserving:
        tr = np.trace(acc).real
        if tr <= P_FLOOR:
            raise QLinError("super-operator annihilated the state")
        acc = acc / tr
    return DensityOp(rho.reg, acc, check=False)


def partial_trace(rho: DensityOp, over: Iterable[str]) -> DensityOp:
    """Trace out the qubits ``over``; the result lives on the remaining ones."""
    reg = rho.reg
    over = set(over)
    pos = sorted(reg.positions(over))
    if not pos:
        return rho
    n = reg.n
    keep = [i for i in range(n) if i not in pos]
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = [letters[i] for i in range(n)]
    col = [letters[n + i] for i in range(n)]
    for p in pos:
        col[p] = row[p]
    out_idx = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    expr = "".join(row) + "".join(col) + "->" + out_idx
    t = np.einsum(expr, rho.mat.reshape([2] * (2 * n)))
    d = 2 ** len(keep)
    sub = QReg(tuple(reg.vars[i] for i in keep), reg.max_qubits)
    return DensityOp(sub, t.reshape(d, d), check=False)


def reduced(rho: DensityOp, keep: Iterable[str]) -> DensityOp:
    keep = set(keep)
    return partial_trace(rho, [v for v in rho.reg.vars if v not in keep])


def measure(m: ProjMeasurement, rho: DensityOp, on: Sequence[str] | None = None,
            p_floor: float = P_FLOOR) -> list:
    """Outcomes ``(label, p, post_state)`` with branches of probability <= p_floor dropped.

    The surviving probabilities are renormalised so that they sum to one.
    """
    targets = _resolve_targets(m, on, rho.reg)
    raw = []
    for lab, E in m.outcomes:
        post = conjugate(E, rho, targets)
        p = float(np.trace(post).real)
        if p > p_floor:
            raw.append((lab, p, post))
    total = sum(p for _, p, _ in raw)
    out = []
    for lab, p, post in raw:
        st = post / p
        st = (st + st.conj().T) / 2
        out.append((lab, p / total, DensityOp(rho.reg, st, check=False)))
    return out


def expectation(E, rho: DensityOp, on: Sequence[str]) -> float:
    """``tr(Ẽ ρ)`` for an operator on the qubits ``on``."""
    sub = reduced(rho, on)
    # reduced() keeps canonical order; permute E accordingly
    order = [v for v in rho.reg.vars if v in set(on)]
    E_c = embed(E, tuple(on), QReg(tuple(order), rho.reg.max_qubits))
    return float(np.trace(E_c @ sub.mat).real)


def spectral(a, name: str = "") -> ProjMeasurement:
    """Spectral decomposition of a Hermitian matrix as a projective measurement."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise QLinError("spectral decomposition needs a square matrix")
    if not is_hermitian(a):
        raise QLinError("spectral decomposition of a non-Hermitian matrix")
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    groups: list[list[int]] = []
    for i in range(len(w)):
        if groups and abs(w[i] - w[groups[-1][0]]) <= EIG_TOL:
            groups[-1].append(i)
        else:
            groups.append([i])
    outs = []
    for g in groups:
        lam = float(np.mean(w[g]))
        vecs = v[:, g]
        outs.append((lam, vecs @ vecs.conj().T))
    return ProjMeasurement(tuple(outs), name=name)


# ═══════════════════════════════════════════════════════════════════════
# Constructors for common channels and measurements
# ═══════════════════════════════════════════════════════════════════════


def unitary_channel(u, name: str = "") -> SuperOp:
    u = np.asarray(u, dtype=complex)
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > TOL:
        raise QLinError(f"{name or 'matrix'} is not unitary")
    return SuperOp((u,), True, name=name)


def set_channel(s: str, name: str = "") -> SuperOp:
    """Prepare the product state ``|s>`` regardless of input: ``{|s><i|}_i``."""
    v = ket(s)
    d = len(v)
    ks = tuple(np.outer(v, np.eye(d)[i]) for i in range(d))
    return SuperOp(ks, True, name=name or f"set({s})")


def dephase_channel(k: int = 1) -> SuperOp:
    d = 2**k
    ks = tuple(np.diag(np.eye(d)[i]) for i in range(d))
    return SuperOp(ks, True, name="dephase")


def hadamard_pattern(bits: Sequence[int]) -> np.ndarray:
    """Tensor product with ``H`` where the bit is 1 and ``I`` where it is 0."""
    return tensor_all([GATES["H"] if b else GATES["I"] for b in bits])


def basis_measurement(bases: Sequence[int], label=None) -> ProjMeasurement:
    """Per-qubit measurement in Z (base 0) or X (base 1); outcomes are bit tuples.

    ``|+>`` reads as 0 and ``|->`` as 1.  ``label`` maps the outcome bit tuple
    to the stored label (default: the tuple itself).
    """
    k = len(bases)
    outs = []
    for i in range(2**k):
        bits = tuple((i >> (k - 1 - j)) & 1 for j in range(k))
        s = "".join(("+-" if b else "01")[x] for b, x in zip(bases, bits))
        lab = label(bits) if label else bits
        outs.append((lab, ket_projector(s)))
    return ProjMeasurement(tuple(outs))


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
