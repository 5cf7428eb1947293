"""Polynomial functionals and multivector fields against dense oracles."""

import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqft.functionals import (LambdaPoly, LambdaScalar, MultiVectorField,
                              PolyFunctional, canonical_antisym, diff_supnorm,
                              evaluate, eval_derivative, mult, pullback_linear,
                              random_multivector, spacetime_support, wick_polynomial)

N = 10


def _vec(rng, n=N):
    return np.array([rng.uniform(-1, 1) for _ in range(n)])


class TestEvaluate:
    def test_constant(self, rng):
        F = PolyFunctional.constant(N, 2.5)
        assert F.evaluate(_vec(rng)) == 2.5

    def test_square_monomial(self):
        F = PolyFunctional.site_monomial(N, (4, 4))
        phi = np.zeros(N)
        phi[4] = 3.0
        assert F.evaluate(phi) == 9.0

    def test_equal_slots_vanish(self, rng):
        X = random_multivector(rng, N, 2, 2)
        phi, h = _vec(rng), _vec(rng)
        assert X.evaluate(phi, h, h) == 0

    def test_wrong_slot_count(self, rng):
        X = random_multivector(rng, N, 2, 1)
        with pytest.raises(ValueError):
            X.evaluate(_vec(rng), _vec(rng))

    def test_dense_oracle(self, rng):
        X = random_multivector(rng, N, 2, 2, entries_per_degree=3)
        phi, h1, h2 = _vec(rng), _vec(rng), _vec(rng)
        total = 0
        for d in X.terms:
            T = np.asarray(X.to_dense(d), dtype=complex)
            for _ in range(d):
                T = np.tensordot(T, phi, axes=([0], [0]))
            T = np.tensordot(T, h1, axes=([0], [0]))
            T = np.tensordot(T, h2, axes=([0], [0]))
            total += T
        assert abs(X.evaluate(phi, h1, h2) - total) < 1e-12

    @given(st.permutations(list(range(4))))
    @settings(max_examples=24, deadline=None)
    def test_slot_permutation_sign(self, perm):
        rng = random.Random(7)
        X = random_multivector(rng, N, 4, 1, entries_per_degree=2)
        hs = [_vec(rng) for _ in range(4)]
        phi = _vec(rng)
        base = X.evaluate(phi, *hs)
        permuted = X.evaluate(phi, *(hs[p] for p in perm))
        _, sign = canonical_antisym(perm)
        assert permuted == pytest.approx(sign * base, abs=1e-12)

    def test_multilinearity(self, rng):
        X = random_multivector(rng, N, 1, 2)
        phi, h1, h2 = _vec(rng), _vec(rng), _vec(rng)
        lhs = X.evaluate(phi, 2.0 * h1 + 0.3 * h2)
        rhs = 2.0 * X.evaluate(phi, h1) + 0.3 * X.evaluate(phi, h2)
        assert lhs == pytest.approx(rhs, abs=1e-12)


class TestDerivatives:
    def test_linear_functional(self, rng):
        u = _vec(rng)
        F = PolyFunctional.linear(u)
        phi = _vec(rng)
        K = np.asarray(F.eval_derivative(phi, 1), dtype=complex)
        assert np.abs(K - u).max() < 1e-14
        K2 = np.asarray(F.eval_derivative(phi, 2), dtype=complex)
        assert np.abs(K2).max() == 0

    def test_square_kernel(self):
        F = PolyFunctional.site_monomial(N, (4, 4))
        phi = np.zeros(N)
        phi[4] = 3.0
        K = np.asarray(F.eval_derivative(phi, 1), dtype=complex)
        assert K[4] == 6.0
        assert np.abs(np.delete(K, 4)).max() == 0

    def test_order_zero_matches_evaluate(self, rng):
        F = random_multivector(rng, N, 0, 3)
        phi = _vec(rng)
        assert F.eval_derivative(phi, 0) == pytest.approx(F.evaluate(phi))

    def test_central_difference_on_random_cubics(self, rng):
        for _ in range(5):
            F = random_multivector(rng, N, 0, 3, entries_per_degree=2)
            phi = _vec(rng)
            K = np.asarray(F.eval_derivative(phi, 1), dtype=complex)
            eps = 1e-6
            for a in range(N):
                step = np.zeros(N)
                step[a] = eps
                fd = (F.evaluate(phi + step) - F.evaluate(phi - step)) / (2 * eps)
                scale = max(1.0, abs(fd))
                assert abs(K[a] - fd) / scale < 1e-6

    def test_symmetric_antisymmetric_structure(self, rng):
        X = random_multivector(rng, 6, 2, 2, entries_per_degree=2)
        K = np.asarray(X.eval_derivative(_vec(rng, 6), 2), dtype=complex)
        assert np.abs(K - K.transpose(1, 0, 2, 3)).max() < 1e-12
        assert np.abs(K + K.transpose(0, 1, 3, 2)).max() < 1e-12


class TestPullback:
    def test_identity_map(self, rng):
        X = random_multivector(rng, N, 1, 2)
        out = pullback_linear(X, np.eye(N))
        assert diff_supnorm(X, out) == 0

    def test_linear_through_matrix(self, rng):
        u = _vec(rng)
        L = np.array([[rng.uniform(-1, 1) for _ in range(N)] for _ in range(N)])
        F = PolyFunctional.linear(u)
        out = pullback_linear(F, L)
        phi = _vec(rng)
        assert out.evaluate(phi) == pytest.approx(u @ (L @ phi), abs=1e-12)

    def test_contravariant_composition(self, rng):
        X = random_multivector(rng, 6, 0, 2, entries_per_degree=2)
        L1 = np.array([[rng.uniform(-1, 1) for _ in range(6)] for _ in range(6)])
        L2 = np.array([[rng.uniform(-1, 1) for _ in range(6)] for _ in range(6)])
        twice = pullback_linear(pullback_linear(X, L1), L2)
        once = pullback_linear(X, L1 @ L2)
        assert diff_supnorm(twice, once) <= 1e-12

    def test_symbolic_lambda_degree(self):
        F = PolyFunctional.site_monomial(6, (2, 2))
        A = np.eye(6)
        B = np.zeros((6, 6))
        B[2, 3] = 1.0
        poly = pullback_linear(F, (A, B), symbolic_lambda=True)
        assert isinstance(poly, LambdaPoly)
        assert poly.degree == 2

    def test_symbolic_matches_direct_exactly(self, rng):
        X = random_multivector(rng, 6, 0, 2, entries_per_degree=2, mode="rational")
        A = np.empty((6, 6), dtype=object)
        B = np.empty((6, 6), dtype=object)
        for i in range(6):
            for j in range(6):
                A[i, j] = Fraction(rng.randint(-2, 2), rng.randint(1, 3))
                B[i, j] = Fraction(rng.randint(-2, 2), rng.randint(1, 3))
        poly = pullback_linear(X, (A, B), symbolic_lambda=True)
        for lam in (Fraction(0), Fraction(1, 2), Fraction(1)):
            direct = pullback_linear(X, A + lam * B)
            assert diff_supnorm(poly.at(lam), direct) == 0


class TestSupport:
    def test_constant_empty(self):
        assert spacetime_support(PolyFunctional.constant(N, 1.0)) == frozenset()

    def test_product_monomial(self):
        F = PolyFunctional.site_monomial(N, (2, 7))
        assert spacetime_support(F) == {2, 7}

    def test_antisym_indices_count(self, rng):
        X = MultiVectorField(2, N).add_monomial((1,), (3, 8), 1.0)
        assert spacetime_support(X) == {1, 3, 8}


class TestWickPolynomial:
    def test_linear_kernel(self):
        u1 = np.zeros(N)
        u1[3] = 1.0
        F = wick_polynomial([None, u1])
        phi = _vec(random.Random(0))
        assert F.evaluate(phi) == pytest.approx(phi[3])

    def test_rank_two_square(self):
        u2 = np.zeros((N, N))
        u2[3, 3] = 1.0
        F = wick_polynomial([None, None, u2])
        phi = np.zeros(N)
        phi[3] = 2.0
        assert F.evaluate(phi) == pytest.approx(4.0)

    def test_second_derivative_recovers_kernel(self, rng):
        u2 = np.zeros((N, N))
        u2[2, 5] = u2[5, 2] = 0.7
        u2[1, 1] = -0.3
        F = wick_polynomial([None, None, u2])
        K = np.asarray(F.eval_derivative(_vec(rng), 2), dtype=complex)
        assert np.abs(K - 2 * u2).max() < 1e-12

    def test_asymmetric_kernel_warns_and_symmetrises(self, rng):
        u2 = np.zeros((N, N))
        u2[1, 4] = 1.0
        with pytest.warns(UserWarning, match="symmetrised"):
            F = wick_polynomial([None, None, u2])
        phi = _vec(rng)
        assert F.evaluate(phi) == pytest.approx(phi[1] * phi[4])


class TestLambdaScalar:
    def test_ring_operations(self):
        p = LambdaScalar.affine(Fraction(1), Fraction(2))
        q = p * p + 1
        assert q.coeffs == [Fraction(2), Fraction(4), Fraction(4)]
        assert q.at(Fraction(1, 2)) == Fraction(5)
        assert q.integrate01() == Fraction(2) + Fraction(2) + Fraction(4, 3)

    def test_shift(self):
        p = LambdaScalar([1, 1])
        assert p.shift(2).coeffs == [0, 0, 1, 1]


class TestStorageInvariants:
    def test_antisymmetric_keys_strictly_sorted(self, rng):
        X = random_multivector(rng, N, 3, 2)
        for bucket in X.terms.values():
            for (w, a) in bucket:
                assert list(w) == sorted(w)
                assert list(a) == sorted(a) and len(set(a)) == len(a)

    def test_repeated_antisym_index_drops(self):
        X = MultiVectorField(2, N)
        X.add_monomial((), (3, 3), 1.0)
        assert X.is_zero()

    def test_swap_accumulates_with_sign(self):
        X = MultiVectorField(2, N)
        X.add_monomial((), (5, 2), 1.0)
        X.add_monomial((), (2, 5), 1.0)
        assert X.is_zero()

    def test_mult_counts_orderings(self):
        assert mult((1, 1, 2)) == 3
        assert mult((1, 2, 3)) == 6
        assert mult(()) == 1

    def test_tensor_entry_round_trip(self, rng):
        X = random_multivector(rng, N, 1, 3, entries_per_degree=3, mode="rational")
        rebuilt = MultiVectorField.from_entries(1, N, list(X.coefficient_entries()))
        assert diff_supnorm(X, rebuilt) == 0
