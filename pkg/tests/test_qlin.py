"""Quantum kernel: registers, channels, measurements and partial traces."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qccs import qlin
from qccs.family import default_family
from qccs.qlin import DensityOp, QLinError, QReg

from oracles import partial_trace_basis


def rand_state(rng, reg, rank=None):
    return DensityOp(reg, qlin.random_density(rng, reg.dim, rank))


# ═══════════════════════════════════════════════════════════════════════
# Registers and embeddings
# ═══════════════════════════════════════════════════════════════════════


class TestRegister:
    def test_order_and_complement(self):
        reg = QReg(("a", "b", "c"))
        assert reg.positions(["c", "a"]) == [2, 0]
        assert reg.complement(["b"]) == ("a", "c")
        assert "b" in reg and "z" not in reg

    def test_duplicates_and_cap(self):
        with pytest.raises(QLinError):
            QReg(("a", "a"))
        with pytest.raises(QLinError):
            QReg(tuple(f"q{i}" for i in range(9)))

    def test_first_variable_is_most_significant(self):
        reg = QReg(("a", "b"))
        rho = DensityOp.from_ket(reg, "10")
        assert rho.mat[2, 2] == pytest.approx(1.0)

    def test_embed_matches_kron_on_reversed_targets(self):
        reg = QReg(("a", "b"))
        cnot_ba = qlin.embed(qlin.GATES["CNOT"], ("b", "a"), reg)
        # control b, target a: |01> -> |11>
        v = qlin.ket("01")
        assert np.allclose(cnot_ba @ v, qlin.ket("11"))

    def test_embed_rejects_bad_input(self):
        reg = QReg(("a", "b"))
        with pytest.raises(QLinError):
            qlin.embed(qlin.GATES["H"], ("z",), reg)
        with pytest.raises(QLinError):
            qlin.embed(qlin.GATES["CNOT"], ("a",), reg)


# ═══════════════════════════════════════════════════════════════════════
# Density operators and channels
# ═══════════════════════════════════════════════════════════════════════


class TestDensityOp:
    def test_validation(self):
        reg = QReg(("a",))
        with pytest.raises(QLinError):
            DensityOp(reg, np.diag([0.7, 0.7]))
        with pytest.raises(QLinError):
            DensityOp(reg, np.array([[1.5, 0], [0, -0.5]]))
        with pytest.raises(QLinError):
            DensityOp(reg, np.array([[0.5, 0.5j], [0.1, 0.5]]))

    def test_read_only(self):
        rho = DensityOp.from_ket(QReg(("a",)), "+")
        with pytest.raises(ValueError):
            rho.mat[0, 0] = 0

    def test_apply_matches_embedded_unitary(self, rng):
        reg = QReg(("a", "b", "c"))
        rho = rand_state(rng, reg)
        u = qlin.random_unitary(rng, 4)
        out = qlin.apply_superop(qlin.unitary_channel(u), rho, ("c", "a"))
        U = qlin.embed(u, ("c", "a"), reg)
        assert np.allclose(out.mat, U @ rho.mat @ U.conj().T, atol=1e-12)

    def test_set_channel_forgets_input(self, rng):
        reg = QReg(("a",))
        out = qlin.apply_superop(qlin.set_channel("+"), rand_state(rng, reg), ("a",))
        assert out.close_to(DensityOp.from_ket(reg, "+"))

    def test_non_trace_preserving_rejected_when_claimed(self):
        with pytest.raises(QLinError):
            qlin.SuperOp((np.diag([1.0, 0.0]),), True)

    def test_composition(self, rng):
        reg = QReg(("a",))
        rho = rand_state(rng, reg)
        h = qlin.unitary_channel(qlin.GATES["H"])
        d = qlin.dephase_channel()
        once = qlin.apply_superop(h.then(d), rho, ("a",))
        twice = qlin.apply_superop(d, qlin.apply_superop(h, rho, ("a",)), ("a",))
        assert once.close_to(twice)


class TestPartialTrace:
    def test_bell_projector(self):
        reg = QReg(("a", "b"))
        bell = (qlin.ket("00") + qlin.ket("11")) / np.sqrt(2)
        rho = DensityOp.from_vector(reg, bell)
        red = qlin.partial_trace(rho, ["b"])
        assert np.max(np.abs(red.mat - np.eye(2) / 2)) <= 1e-9

    @given(st.integers(1, 4), st.integers(0, 2**31 - 1), st.data())
    @settings(max_examples=40)
    def test_agrees_with_basis_sum(self, n, seed, data):
        rng = np.random.default_rng(seed)
        reg = QReg(tuple(f"x{i}" for i in range(n)))
        rho = rand_state(rng, reg)
        traced = data.draw(st.lists(st.integers(0, n - 1), unique=True))
        got = qlin.partial_trace(rho, [reg.vars[i] for i in traced])
        want = partial_trace_basis(rho.mat, n, sorted(traced))
        assert np.allclose(got.mat, want, atol=1e-12)

    def test_trace_commutes_with_channels_elsewhere(self, rng):
        reg = QReg(("a", "b"))
        rho = rand_state(rng, reg)
        e = qlin.unitary_channel(qlin.random_unitary(rng, 2))
        lhs = qlin.partial_trace(qlin.apply_superop(e, rho, ("a",)), ["a"])
        assert lhs.close_to(qlin.partial_trace(rho, ["a"]))


# ═══════════════════════════════════════════════════════════════════════
# Measurements
# ═══════════════════════════════════════════════════════════════════════


class TestMeasurement:
    def test_probabilities_sum_to_one(self, rng):
        reg = QReg(("a", "b", "c"))
        m = qlin.basis_measurement([0, 1])
        for _ in range(200):
            rho = rand_state(rng, reg, rank=int(rng.integers(1, 9)))
            outs = qlin.measure(m, rho, ("c", "a"))
            assert abs(sum(p for _, p, _ in outs) - 1.0) <= 1e-9
            for _, _, post in outs:
                assert abs(post.trace() - 1.0) <= 1e-9

    def test_born_rule(self):
        reg = QReg(("a",))
        outs = qlin.measure(qlin.basis_measurement([0]), DensityOp.from_ket(reg, "+"), ("a",))
        assert [(lab, round(p, 12)) for lab, p, _ in outs] == [((0,), 0.5), ((1,), 0.5)]

    def test_zero_branches_pruned(self):
        reg = QReg(("a",))
        outs = qlin.measure(qlin.basis_measurement([0]), DensityOp.from_ket(reg, "1"), ("a",))
        assert [lab for lab, _, _ in outs] == [(1,)]

    def test_x_basis_labels(self):
        reg = QReg(("a",))
        outs = qlin.measure(qlin.basis_measurement([1]), DensityOp.from_ket(reg, "-"), ("a",))
        assert [lab for lab, _, _ in outs] == [(1,)]

    def test_projectors_must_sum_to_identity(self):
        with pytest.raises(QLinError):
            qlin.ProjMeasurement(((0, qlin.ket_projector("0")),))

    def test_spectral_merges_degenerate_eigenvalues(self):
        m = qlin.spectral(np.diag([1.0, 1.0, -1.0, 2.0]))
        assert sorted(round(lab, 9) for lab, _ in m.outcomes) == [-1.0, 1.0, 2.0]
        with pytest.raises(QLinError):
            qlin.spectral(np.array([[0, 1], [0, 0]]))

    def test_expectation_respects_target_order(self):
        reg = QReg(("a", "b"))
        rho = DensityOp.from_ket(reg, "01")
        E = qlin.ket_projector("10")
        assert qlin.expectation(E, rho, ("b", "a")) == pytest.approx(1.0)
        assert qlin.expectation(E, rho, ("a", "b")) == pytest.approx(0.0)


class TestDefaultFamily:
    def test_members_are_trace_preserving(self):
        fam = default_family()
        for op in fam.all_superops():
            s = sum(k.conj().T @ k for k in op.kraus)
            assert np.max(np.abs(s - np.eye(s.shape[0]))) <= 1e-9

    def test_member_expansion(self):
        fam = default_family(depth=1)
        atoms = fam.members(("a", "b"))
        # five single-qubit generators on two qubits, CNOT on both orders
        assert len(atoms) == 5 * 2 + 2
        assert len(default_family(depth=2).members(("a",))) == 5 + 25
        assert fam.members(()) == []
