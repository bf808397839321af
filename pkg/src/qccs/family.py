"""Finite families of super-operators used to approximate closure under
all super-operators acting on the qubits a configuration does not own."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import qlin
from .qlin import SuperOp


class FamilyError(ValueError):
    pass


@dataclass(frozen=True)
class Generator:
    name: str
    op: SuperOp
    targets: tuple | None = None  # fixed targets, or None for "any free qubits"

    @property
    def arity(self) -> int:
        return self.op.arity


@dataclass
class SuperOpFamily:
    """Generators plus an expansion policy.

    A *member* is a sequence of ``(generator name, target qubits)`` of length
    ``1..depth``; members are applied left to right.  ``depth=1`` is the
    apply-each-once policy.
    """

    generators: list = field(default_factory=list)
    depth: int = 2
    name: str = "custom"

    def __post_init__(self):
        for g in self.generators:
            if not g.op.trace_preserving:
                raise FamilyError(f"family member {g.name} is not trace preserving")
        self._by_name = {g.name: g for g in self.generators}
        self._cache: dict = {}

    def atoms(self, free: tuple) -> list[tuple]:
        """Single generator applications to qubits in ``free`` (canonical order kept)."""
        out = []
        fs = set(free)
        for g in self.generators:
            if g.targets is not None:
                if set(g.targets) <= fs:
                    out.append((g.name, tuple(g.targets)))
                continue
            for tg in itertools.permutations(free, g.arity):
                out.append((g.name, tg))
        return out

    def members(self, free: tuple) -> list[tuple]:
        free = tuple(free)
        got = self._cache.get(free)
        if got is None:
            atoms = self.atoms(free)
            got = []
            for k in range(1, self.depth + 1):
                got.extend(itertools.product(atoms, repeat=k))
            self._cache[free] = got
        return got

    def apply(self, member: tuple, rho: qlin.DensityOp) -> qlin.DensityOp:
        for gname, tg in member:
            rho = qlin.apply_superop(self._by_name[gname].op, rho, tg)
        return rho

    def check_targets(self, owned) -> None:
        owned = set(owned)
        for g in self.generators:
            if g.targets is not None and set(g.targets) & owned:
                raise FamilyError(
                    f"family member {g.name} targets {sorted(set(g.targets) & owned)}, "
                    "which the process owns")

    def all_superops(self) -> list[SuperOp]:
        return [g.op for g in self.generators]

    @staticmethod
    def member_text(member: tuple) -> str:
        return ";".join(f"{g}[{','.join(t)}]" for g, t in member)


def default_family(depth: int = 2) -> SuperOpFamily:
    """Hadamard, X, Z, dephasing and reset on any free qubit, CNOT on free pairs.

    Reset prepares ``|0>``; it plays the role of swapping the qubit with a
    fresh ancilla and discarding it.
    """
    gens = [
        Generator("H", qlin.unitary_channel(qlin.GATES["H"], "H")),
        Generator("X", qlin.unitary_channel(qlin.GATES["X"], "X")),
        Generator("Z", qlin.unitary_channel(qlin.GATES["Z"], "Z")),
        Generator("dephase", qlin.dephase_channel(1)),
        Generator("reset", qlin.set_channel("0", "reset")),
        Generator("CNOT", qlin.unitary_channel(qlin.GATES["CNOT"], "CNOT")),
    ]
    return SuperOpFamily(gens, depth, name="default")


def identity_family() -> SuperOpFamily:
    return SuperOpFamily([], 1, name="identity")


def family_from_document(doc: dict) -> SuperOpFamily:
    """``{"depth": 2, "generators": [{"name": "H", "gate": "H"} | {"name": .., "kraus": [..]}]}``

    Matrices use nested lists with ``[re, im]`` pairs for complex entries.
    A generator may pin its ``targets``.  ``{"preset": "default"}`` selects
    the default family.
    """
    if doc.get("preset") == "default":
        return default_family(int(doc.get("depth", 2)))
    if doc.get("preset") == "identity":
        return identity_family()
    gens = []
    for g in doc.get("generators", []):
        name = g["name"]
        if "gate" in g:
            op = qlin.unitary_channel(qlin.gate(g["gate"]), name)
        elif "kraus" in g:
            op = qlin.SuperOp(tuple(_matrix(k) for k in g["kraus"]), True, name=name)
        elif "set" in g:
            op = qlin.set_channel(g["set"], name)
        elif g.get("dephase"):
            op = qlin.dephase_channel(1)
        else:
            raise FamilyError(f"generator {name} needs 'gate', 'kraus' or 'set'")
        tg = tuple(g["targets"]) if "targets" in g else None
        gens.append(Generator(name, op, tg))
    return SuperOpFamily(gens, int(doc.get("depth", 1)), name=doc.get("name", "custom"))


def load_family(path) -> SuperOpFamily:
    with open(path, encoding="utf-8") as fh:
        return family_from_document(json.load(fh))


def _matrix(rows) -> np.ndarray:
    return np.array([[complex(*x) if isinstance(x, list) else complex(x) for x in row] for row in rows])
