import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hokpool.errors import DimensionError, InvalidInputError, InvalidParameterError, InvariantError
from hokpool.tensor_core import (
    TuckerFactors,
    hosvd,
    inner,
    is_supersymmetric,
    mode_multiply,
    outer_power,
    power_normalize,
    reconstruct,
    sum_outer_powers,
    sym_vector_length,
    sym_vectorize,
    symmetrize,
)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def random_symmetric(rng, d, r):
    return symmetrize(rng.standard_normal((d,) * r))


def rel_frob(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestOuterPower:
    def test_basis_vector(self):
        t = outer_power([1.0, 0.0], 3)
        expected = np.zeros((2, 2, 2))
        expected[0, 0, 0] = 1.0
        np.testing.assert_array_equal(t, expected)

    def test_ones_square(self):
        np.testing.assert_array_equal(outer_power([1.0, 1.0], 2), np.ones((2, 2)))

    def test_entry_value(self):
        # 0.2 * 0.8 * 0.8
        assert outer_power([0.2, 0.8], 3)[0, 1, 1] == pytest.approx(0.128, abs=1e-15)

    def test_empty_vector_rejected(self):
        with pytest.raises(InvalidInputError):
            outer_power([], 2)

    def test_order_out_of_range(self):
        with pytest.raises(InvalidParameterError):
            outer_power([1.0], 0)
        with pytest.raises(InvalidParameterError):
            outer_power([1.0], 5)

    @given(arrays(float, st.integers(1, 5), elements=finite), st.integers(1, 4))
    def test_exact_permutation_invariance(self, v, r):
        t = outer_power(v, r)
        for perm in itertools.permutations(range(r)):
            np.testing.assert_array_equal(t, t.transpose(perm))

    def test_sum_outer_powers_matches_loop(self, rng):
        rows = rng.standard_normal((7, 4))
        for r in (1, 2, 3, 4):
            expected = sum(outer_power(row, r) for row in rows)
            np.testing.assert_allclose(sum_outer_powers(rows, r), expected, rtol=1e-12, atol=1e-12)


class TestInner:
    def test_unit_basis(self):
        a = outer_power([1.0, 0.0], 3)
        assert inner(a, a) == 1.0

    def test_brute_force_125(self):
        u, w = np.array([1.0, 2.0]), np.array([3.0, 1.0])
        a, b = outer_power(u, 3), outer_power(w, 3)
        brute = sum(
            u[i] * u[j] * u[k] * w[i] * w[j] * w[k] for i, j, k in itertools.product(range(2), repeat=3)
        )
        assert brute == 125.0
        assert inner(a, b) == pytest.approx(125.0, rel=1e-14)

    def test_zero_tensor(self, rng):
        t = random_symmetric(rng, 3, 3)
        assert inner(t, np.zeros_like(t)) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            inner(np.zeros((2, 2)), np.zeros((3, 3)))

    @settings(max_examples=200)
    @given(st.integers(1, 8), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_power_of_dot_product_nonnegative(self, d, r, seed):
        gen = np.random.default_rng(seed)
        u, w = gen.random(d), gen.random(d)
        dot = float(u @ w)
        if abs(dot) <= 1e-3:
            return
        assert abs(inner(outer_power(u, r), outer_power(w, r)) - dot**r) <= 1e-9 * abs(dot**r)

    @settings(max_examples=300)
    @given(st.integers(1, 8), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_power_of_dot_product_signed(self, d, r, seed):
        # cancellation error scales with (|u||w| / |u.w|)^r, so the bound does too
        gen = np.random.default_rng(seed)
        u, w = gen.standard_normal(d), gen.standard_normal(d)
        dot = float(u @ w)
        if abs(dot) <= 1e-3:
            return
        cond = (np.linalg.norm(u) * np.linalg.norm(w) / abs(dot)) ** r
        err = abs(inner(outer_power(u, r), outer_power(w, r)) - dot**r) / abs(dot**r)
        assert err <= 1e-13 * max(cond, 1.0) or err <= 1e-9


class TestSymVectorize:
    def test_small_length(self):
        assert len(sym_vectorize(outer_power([0.3, 0.7], 3))) == 4

    def test_hok_length_by_enumeration(self):
        d, r = 53, 3
        count = sum(1 for idx in itertools.product(range(d), repeat=r) if list(idx) == sorted(idx))
        assert count == 26235
        assert len(sym_vectorize(np.zeros((d,) * r))) == count

    @pytest.mark.parametrize("r", [1, 2, 3, 4])
    def test_length_formula(self, r):
        for d in range(1, 21):
            assert sym_vector_length(d, r) == math.comb(d + r - 1, r)
            if d ** r <= 20000:
                assert len(sym_vectorize(np.zeros((d,) * r))) == math.comb(d + r - 1, r)

    def test_inner_product_preserved(self, rng):
        worst = 0.0
        for _ in range(100):
            d, r = int(rng.integers(1, 7)), int(rng.integers(1, 5))
            a, b = random_symmetric(rng, d, r), random_symmetric(rng, d, r)
            full = inner(a, b)
            worst = max(worst, abs(sym_vectorize(a) @ sym_vectorize(b) - full) / max(abs(full), 1e-300))
        assert worst < 1e-10

    def test_rejects_asymmetric(self, rng):
        with pytest.raises(InvariantError):
            sym_vectorize(rng.standard_normal((3, 3, 3)))

    def test_multiplicity_weights(self):
        # d=2, r=2: entries (0,0), (0,1), (1,1) with multiplicities 1, 2, 1
        t = np.array([[1.0, 2.0], [2.0, 3.0]])
        np.testing.assert_allclose(sym_vectorize(t), [1.0, 2.0 * math.sqrt(2.0), 3.0])


class TestModeMultiply:
    def test_identity(self, rng):
        t = rng.standard_normal((3, 4, 2))
        out = mode_multiply(t, [np.eye(3), np.eye(4), np.eye(2)])
        np.testing.assert_array_equal(out, t)

    def test_order_one_is_matvec(self, rng):
        v, m = rng.standard_normal(4), rng.standard_normal((3, 4))
        np.testing.assert_allclose(mode_multiply(v, [m]), m @ v, rtol=1e-14)

    def test_against_nested_loops(self, rng):
        s = rng.standard_normal((2, 2, 2))
        p = [rng.standard_normal((2, 2)) for _ in range(3)]
        expected = np.zeros((2, 2, 2))
        for i1, i2, i3 in itertools.product(range(2), repeat=3):
            for j1, j2, j3 in itertools.product(range(2), repeat=3):
                expected[i1, i2, i3] += s[j1, j2, j3] * p[0][i1, j1] * p[1][i2, j2] * p[2][i3, j3]
        np.testing.assert_allclose(mode_multiply(s, p), expected, rtol=0, atol=1e-12)

    def test_rectangular_factors(self, rng):
        s = rng.standard_normal((2, 3))
        out = mode_multiply(s, [rng.standard_normal((5, 2)), rng.standard_normal((4, 3))])
        assert out.shape == (5, 4)

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            mode_multiply(np.zeros((2, 2)), [np.eye(3), np.eye(2)])
        with pytest.raises(DimensionError):
            mode_multiply(np.zeros((2, 2)), [np.eye(2)])


class TestHosvd:
    def test_rank_one_basis(self):
        e1 = np.array([1.0, 0.0, 0.0])
        core, u = hosvd(outer_power(e1, 3))
        nonzero = np.abs(core) > 1e-12
        assert nonzero.sum() == 1
        assert abs(core[nonzero][0]) == pytest.approx(1.0)
        np.testing.assert_allclose(np.abs(u[:, 0]), e1, atol=1e-12)

    def test_rank_two_round_trip(self, rng):
        u, w = rng.standard_normal(5), rng.standard_normal(5)
        t = outer_power(u, 3) + outer_power(w, 3)
        assert rel_frob(reconstruct(hosvd(t)), t) < 1e-8

    def test_psd_derived_round_trip(self, rng):
        for _ in range(10):
            rows = rng.standard_normal((20, 6))
            t = sum_outer_powers(rows, 3)
            factors = hosvd(t)
            assert rel_frob(reconstruct(factors), t) < 1e-8
            np.testing.assert_allclose(factors.factor.T @ factors.factor, np.eye(6), atol=1e-10)

    def test_sign_convention(self, rng):
        _, u = hosvd(random_symmetric(rng, 5, 3))
        idx = np.argmax(np.abs(u), axis=0)
        assert np.all(u[idx, np.arange(5)] >= 0)

    def test_deterministic(self, rng):
        t = random_symmetric(rng, 6, 3)
        a, b = hosvd(t), hosvd(t.copy())
        np.testing.assert_array_equal(a.factor, b.factor)

    def test_zero_tensor_convention(self):
        core, u = hosvd(np.zeros((3, 3, 3)))
        np.testing.assert_array_equal(core, np.zeros((3, 3, 3)))
        np.testing.assert_array_equal(u, np.eye(3))

    def test_order_one(self, rng):
        v = rng.standard_normal(4)
        assert rel_frob(reconstruct(hosvd(v)), v) < 1e-12

    def test_truncation(self, rng):
        u, w = rng.standard_normal(6), rng.standard_normal(6)
        t = outer_power(u, 3) + outer_power(w, 3)
        core, fac = hosvd(t, rank=2)
        assert core.shape == (2, 2, 2) and fac.shape == (6, 2)
        # rank-2 tensor: truncating at 2 loses nothing
        assert rel_frob(reconstruct(TuckerFactors(core, fac)), t) < 1e-8
        with pytest.raises(InvalidParameterError):
            hosvd(t, rank=7)


class TestPowerNormalize:
    def test_alpha_one_identity(self, rng):
        t = random_symmetric(rng, 7, 3)
        assert rel_frob(power_normalize(t, 1.0), t) < 1e-8

    def test_operating_point_output_symmetric(self, rng):
        out = power_normalize(sum_outer_powers(rng.random((30, 8)), 3), 0.1)
        assert is_supersymmetric(out)
        assert np.all(np.isfinite(out))

    def test_signs_follow_input_core(self, rng):
        t = random_symmetric(rng, 5, 3)
        core, u = hosvd(t)
        projected = mode_multiply(power_normalize(t, 0.3), [u.T] * 3)
        big = np.abs(core) > 1e-8
        np.testing.assert_array_equal(np.sign(projected[big]), np.sign(core[big]))
        np.testing.assert_allclose(np.abs(projected[big]), np.abs(core[big]) ** 0.3, rtol=1e-8)

    @pytest.mark.parametrize("alpha", [0.0, -0.5, 1.5])
    def test_bad_alpha(self, alpha):
        with pytest.raises(InvalidParameterError):
            power_normalize(np.ones((2, 2, 2)), alpha)

    def test_symmetrize_idempotent(self, rng):
        s = symmetrize(rng.standard_normal((3, 3, 3, 3)))
        assert is_supersymmetric(s)
        np.testing.assert_allclose(symmetrize(s), s, atol=1e-15)
