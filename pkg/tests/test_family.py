"""Super-operator families."""

import json

import numpy as np
import pytest

from qccs import qlin
from qccs.family import (
    FamilyError, Generator, SuperOpFamily, default_family, family_from_document, identity_family,
    load_family,
)


class TestFamilies:
    def test_identity_family_is_empty(self):
        assert identity_family().members(("a", "b")) == []

    def test_members_apply_left_to_right(self):
        fam = default_family()
        reg = qlin.QReg(("a",))
        rho = qlin.DensityOp.from_ket(reg, "0")
        out = fam.apply((("X", ("a",)), ("H", ("a",))), rho)
        assert out.close_to(qlin.DensityOp.from_ket(reg, "-"))

    def test_rejects_non_trace_preserving(self):
        bad = qlin.SuperOp((np.diag([1.0, 0.0]),), False)
        with pytest.raises(FamilyError):
            SuperOpFamily([Generator("P0", bad)])

    def test_pinned_targets(self):
        fam = SuperOpFamily([Generator("H", qlin.unitary_channel(qlin.GATES["H"]), ("e",))], 1)
        assert fam.members(("e", "f")) == [(("H", ("e",)),)]
        assert fam.members(("f",)) == []
        with pytest.raises(FamilyError):
            fam.check_targets({"e"})

    def test_member_text(self):
        assert SuperOpFamily.member_text((("CNOT", ("a", "b")), ("H", ("a",)))) == "CNOT[a,b];H[a]"


class TestDocuments:
    def test_presets(self):
        assert family_from_document({"preset": "default", "depth": 1}).depth == 1
        assert family_from_document({"preset": "identity"}).name == "identity"

    def test_generators(self, tmp_path):
        doc = {"name": "mine", "depth": 2, "generators": [
            {"name": "H", "gate": "H"},
            {"name": "flip", "kraus": [[[0, 1], [1, 0]]]},
            {"name": "plus", "set": "+"},
            {"name": "deph", "dephase": True},
        ]}
        path = tmp_path / "fam.json"
        path.write_text(json.dumps(doc))
        fam = load_family(path)
        assert [g.name for g in fam.generators] == ["H", "flip", "plus", "deph"]
        assert len(fam.members(("a",))) == 4 + 16

    def test_complex_entries(self):
        fam = family_from_document({"generators": [{"name": "S", "kraus": [[[1, 0], [0, [0, 1]]]]}]})
        assert np.allclose(fam.generators[0].op.kraus[0], np.diag([1, 1j]))

    def test_bad_generator(self):
        with pytest.raises(FamilyError):
            family_from_document({"generators": [{"name": "x"}]})
        with pytest.raises(qlin.QLinError):
            family_from_document({"generators": [{"name": "x", "kraus": [[[1, 0], [0, 0]]]}]})
