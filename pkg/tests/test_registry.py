import numpy as np
import pytest

from alloyopt.errors import (
    DuplicateSymbolError,
    EnthalpyAsymmetryError,
    EnthalpyDiagonalError,
    EnthalpyShapeError,
    MissingColumnError,
    NonPositiveValueError,
)
from alloyopt.registry import (
    ELEMENT_COLUMNS,
    MixingEnthalpyTable,
    load_registry,
    pair_enthalpy,
    save_registry,
)

HEADER = ",".join(ELEMENT_COLUMNS)


def write_pair(tmp_path, element_rows, enthalpy_rows):
    epath = tmp_path / "elements.csv"
    hpath = tmp_path / "enthalpy.csv"
    epath.write_text(HEADER + "\n" + "\n".join(element_rows) + "\n")
    hpath.write_text("\n".join(enthalpy_rows) + "\n")
    return epath, hpath


TWO_ELEMENTS = [
    "Ni,28,10,1.24,1.91,0.0587,8908,4,14.0",
    "Ti,22,4,1.47,1.54,0.0479,4506,2,11.0",
]
TWO_ENTHALPY = ["symbol,Ni,Ti", "Ni,0.0,-30.0", "Ti,-30.0,0.0"]


class TestLoad:
    def test_default_39_element_registry(self, reg39):
        assert reg39.n == 39
        assert reg39.enthalpy.values.shape == (39, 39)

    def test_two_element_symmetric_pair(self, tmp_path):
        reg = load_registry(*write_pair(tmp_path, TWO_ELEMENTS, TWO_ENTHALPY))
        assert reg.n == 2
        assert pair_enthalpy(reg, 0, 1) == -30.0
        assert pair_enthalpy(reg, 1, 0) == -30.0

    def test_missing_column(self, tmp_path):
        epath = tmp_path / "elements.csv"
        epath.write_text("symbol,atomic_number\nNi,28\n")
        hpath = tmp_path / "enthalpy.csv"
        hpath.write_text("symbol,Ni\nNi,0.0\n")
        with pytest.raises(MissingColumnError):
            load_registry(epath, hpath)

    def test_non_positive_quantity(self, tmp_path):
        rows = ["Ni,28,10,1.24,1.91,0.0587,8908,4,14.0",
                "Ti,22,4,-1.47,1.54,0.0479,4506,2,11.0"]
        with pytest.raises(NonPositiveValueError):
            load_registry(*write_pair(tmp_path, rows, TWO_ENTHALPY))

    def test_duplicate_symbol(self, tmp_path):
        rows = [TWO_ELEMENTS[0], TWO_ELEMENTS[0]]
        enthalpy = ["symbol,Ni,Ni", "Ni,0.0,1.0", "Ni,1.0,0.0"]
        with pytest.raises(DuplicateSymbolError):
            load_registry(*write_pair(tmp_path, rows, enthalpy))

    def test_asymmetric_enthalpy(self, tmp_path):
        enthalpy = ["symbol,Ni,Ti", "Ni,0.0,-30.0", "Ti,-29.0,0.0"]
        with pytest.raises(EnthalpyAsymmetryError):
            load_registry(*write_pair(tmp_path, TWO_ELEMENTS, enthalpy))

    def test_wrong_size_enthalpy(self, tmp_path):
        enthalpy = ["symbol,Ni", "Ni,0.0"]
        with pytest.raises(EnthalpyShapeError):
            load_registry(*write_pair(tmp_path, TWO_ELEMENTS, enthalpy))

    def test_nonzero_diagonal(self, tmp_path):
        enthalpy = ["symbol,Ni,Ti", "Ni,0.0,-30.0", "Ti,-30.0,5.0"]
        with pytest.raises(EnthalpyDiagonalError):
            load_registry(*write_pair(tmp_path, TWO_ELEMENTS, enthalpy))


class TestPairEnthalpy:
    def test_diagonal_zero(self, reg39):
        for i in range(reg39.n):
            assert pair_enthalpy(reg39, i, i) == 0.0

    def test_full_matrix_symmetry(self, reg39):
        v = reg39.enthalpy.values
        assert np.array_equal(v, v.T)

    def test_out_of_range(self, reg3):
        with pytest.raises(IndexError):
            pair_enthalpy(reg3, 0, 3)
        with pytest.raises(IndexError):
            pair_enthalpy(reg3, -1, 0)

    def test_hand_written_fixture_lookup(self, reg3):
        # direct file-style oracle: values written into the fixture
        expected = {(0, 1): -30.0, (0, 2): 12.0, (1, 2): -7.5}
        for (i, j), h in expected.items():
            assert pair_enthalpy(reg3, i, j) == h
            assert pair_enthalpy(reg3, j, i) == h


class TestRoundTrip:
    def test_save_load_bit_exact(self, reg39, tmp_path):
        epath = tmp_path / "e.csv"
        hpath = tmp_path / "h.csv"
        save_registry(reg39, epath, hpath)
        back = load_registry(epath, hpath)
        assert back.symbols == reg39.symbols
        assert np.array_equal(back.enthalpy.values, reg39.enthalpy.values)
        for a, b in zip(back.elements, reg39.elements):
            assert a == b

    def test_asymmetry_rejected_at_table_construction(self):
        bad = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(EnthalpyAsymmetryError):
            MixingEnthalpyTable(values=bad)
