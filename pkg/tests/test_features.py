import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alloyopt.errors import CompositionError, DimensionMismatchError
from alloyopt.features import (
    Composition,
    compute_features,
    compute_features_array,
    compute_jacobian,
)
from alloyopt.registry import MixingEnthalpyTable, Registry

from .conftest import random_compositions


def mp_features(x, reg):
    """Independent straight-line oracle at 50 significant digits."""
    mp.mp.dps = 50
    n = reg.n
    s = [mp.mpf(repr(float(v))) / 100 for v in x]
    H = reg.enthalpy.values
    y1 = mp.mpf(0)
    for i in range(n):
        for j in range(i + 1, n):
            y1 += 4 * s[i] * s[j] * mp.mpf(repr(float(H[i, j])))
    y2 = mp.mpf(0)
    for i, e in enumerate(reg.elements):
        vol = (
            mp.mpf(e.atoms_per_unit_cell)
            * mp.mpf(repr(e.molar_mass))
            / (mp.mpf(repr(e.density)) * mp.mpf(repr(float(reg.avogadro))))
        )
        y2 += s[i] * mp.cbrt(vol)
    num = sum(s[i] * e.valence_electrons for i, e in enumerate(reg.elements))
    den = sum(s[i] * e.atomic_number for i, e in enumerate(reg.elements))
    y3 = num / den
    y4 = sum(s[i] * mp.mpf(repr(e.atomic_radius)) for i, e in enumerate(reg.elements))
    y5 = mp.sqrt(
        sum(
            s[i] * (1 - mp.mpf(repr(e.atomic_radius)) / y4) ** 2
            for i, e in enumerate(reg.elements)
        )
    )
    y6 = sum(s[i] * mp.mpf(repr(e.electronegativity)) for i, e in enumerate(reg.elements))
    y7 = mp.sqrt(
        sum(
            s[i] * (1 - mp.mpf(repr(e.electronegativity)) / y6) ** 2
            for i, e in enumerate(reg.elements)
        )
    )
    return [float(v) for v in (y1, y2, y3, y4, y5, y6, y7)]


class TestComposition:
    def test_negative_rejected(self):
        with pytest.raises(CompositionError):
            Composition(np.array([101.0, -1.0]))

    def test_bad_sum_rejected(self):
        with pytest.raises(CompositionError):
            Composition(np.array([60.0, 39.0]))

    def test_dimension_mismatch(self, reg3):
        with pytest.raises(DimensionMismatchError):
            compute_features(np.array([50.0, 50.0]), reg3)


class TestComputeFeatures:
    def test_pure_element_limits(self, reg10):
        for i in (0, 4, 9):
            x = np.zeros(reg10.n)
            x[i] = 100.0
            f = compute_features(x, reg10)
            assert f.dh_mix == 0.0
            assert f.r_delta == 0.0
            assert f.chi_delta == 0.0
            assert f.r_mean == reg10.elements[i].atomic_radius
            assert f.chi_mean == reg10.elements[i].electronegativity

    def test_equiatomic_binary_enthalpy(self, reg3):
        x = np.array([50.0, 50.0, 0.0])
        f = compute_features(x, reg3)
        # 4 * 0.5 * 0.5 * H12 collapses to H12
        assert f.dh_mix == pytest.approx(-30.0, rel=1e-14)

    def test_matches_extended_precision_oracle(self, reg10):
        rng = np.random.default_rng(42)
        for x in random_compositions(10, 5, rng):
            full = np.zeros(reg10.n)
            full[:5] = x
            got = compute_features_array(full, reg10)
            want = mp_features(full, reg10)
            for g, w in zip(got, want):
                assert g == pytest.approx(w, rel=1e-12)

    def test_vec_convention_switch(self, reg3):
        from alloyopt.registry import Registry

        x = np.array([20.0, 30.0, 50.0])
        f_default = compute_features(x, reg3)
        swapped = Registry(
            elements=reg3.elements,
            enthalpy=reg3.enthalpy,
            vec_convention="atomic_number",
        )
        f_swapped = compute_features(x, swapped)
        assert f_default.vec == pytest.approx(1.0 / f_swapped.vec, rel=1e-14)

    def test_permutation_invariance(self, reg3):
        x = np.array([20.0, 30.0, 50.0])
        perm = [2, 0, 1]
        reg_p = Registry(
            elements=tuple(reg3.elements[i] for i in perm),
            enthalpy=MixingEnthalpyTable(values=reg3.enthalpy.values[np.ix_(perm, perm)]),
        )
        f = compute_features_array(x, reg3)
        f_p = compute_features_array(x[perm], reg_p)
        np.testing.assert_allclose(f, f_p, rtol=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
    def test_delta_features_nonnegative(self, weights):
        reg = _REG3_CACHE[0]
        x = np.array(weights)
        x = x / x.sum() * 100.0
        f = compute_features(x, reg)
        assert f.r_delta >= 0.0
        assert f.chi_delta >= 0.0


class TestComputeJacobian:
    def test_linear_columns_are_constant(self, reg10):
        rng = np.random.default_rng(3)
        cols = []
        for x in random_compositions(4, reg10.n, rng):
            J = compute_jacobian(x, reg10).matrix
            cols.append(J[:, [1, 3, 5]])
        for other in cols[1:]:
            np.testing.assert_allclose(other, cols[0], rtol=1e-14)
        np.testing.assert_allclose(cols[0][:, 1], reg10.radius / 100.0, rtol=1e-14)

    def test_matches_central_differences(self, reg10):
        rng = np.random.default_rng(7)
        h = 1e-5
        for x in random_compositions(20, reg10.n, rng):
            J = compute_jacobian(x, reg10).matrix
            for i in range(reg10.n):
                xp = x.copy()
                xm = x.copy()
                xp[i] += h
                xm[i] -= h
                # perturb off the simplex: evaluate the raw formulas directly
                fd = (_raw_features(xp, reg10) - _raw_features(xm, reg10)) / (2 * h)
                for j in range(7):
                    # relative 1e-6, falling back to absolute 1e-9 near zero
                    assert abs(J[i, j] - fd[j]) < max(1e-6 * abs(fd[j]), 1e-9)

    def test_pure_element_flags_spread_columns(self, reg10):
        x = np.zeros(reg10.n)
        x[2] = 100.0
        jac = compute_jacobian(x, reg10)
        assert set(jac.flagged_columns) == {4, 6}
        np.testing.assert_array_equal(jac.matrix[:, 4], 0.0)
        np.testing.assert_array_equal(jac.matrix[:, 6], 0.0)

    def test_directional_derivative_second_order_decay(self, reg10):
        rng = np.random.default_rng(11)
        x = random_compositions(1, reg10.n, rng)[0]
        d = rng.normal(size=reg10.n)
        d -= d.mean()  # stay on the sum-100 hyperplane
        J = compute_jacobian(x, reg10).matrix
        analytic = J.T @ d
        errors = []
        for eps in (1e-3, 1e-4, 1e-5):
            fd = (
                compute_features_array(x + eps * d, reg10)
                - compute_features_array(x - eps * d, reg10)
            ) / (2 * eps)
            errors.append(np.abs(fd - analytic))
        scale = np.maximum(np.abs(analytic), 1e-12)
        # second-order decay, unless already at the FD roundoff floor
        e3, e4 = np.max(errors[0] / scale), np.max(errors[1] / scale)
        assert e4 < e3 / 10.0 or e3 < 1e-8
        assert np.max(errors[2] / scale) < 1e-5


def _raw_features(x, reg):
    """Feature formulas on a raw (possibly off-simplex) vector, for FD."""
    s = x / 100.0
    H = reg.enthalpy.values
    y1 = 2.0 * s @ (H @ s)
    y2 = s @ reg.lattice_coeff
    y3 = (s @ reg.valence) / (s @ reg.atomic_number)
    y4 = s @ reg.radius
    y5 = np.sqrt(max(s @ (1.0 - reg.radius / y4) ** 2, 0.0))
    y6 = s @ reg.chi
    y7 = np.sqrt(max(s @ (1.0 - reg.chi / y6) ** 2, 0.0))
    return np.array([y1, y2, y3, y4, y5, y6, y7])


_REG3_CACHE = []


@pytest.fixture(autouse=True, scope="module")
def _cache_reg3(request):
    # hypothesis given() cannot take fixtures; stash one per module
    from alloyopt.registry import default_registry, subset_registry

    _REG3_CACHE.clear()
    _REG3_CACHE.append(subset_registry(default_registry(), ("Ni", "Ti", "Cu")))
    yield
    _REG3_CACHE.clear()
