"""Group law, quotients, invariant fields, and automorphisms.

The main oracle represents the class-4 chain algebra by strictly upper
triangular 5x5 matrices, where exp/log are exact polynomials; the group
product must match matrix exp-multiply-log to near machine precision.
"""

import numpy as np
import pytest

from nilctrl import (
    LieAlgebra,
    NilGroup,
    UnsupportedClassError,
    bch_coefficients,
)

from helpers import filiform3, filiform4, heisenberg, rotate_algebra


# ---------------------------------------------------------------------------
# Matrix-representation oracle for the class-4 chain algebra
# ---------------------------------------------------------------------------

def _unit(i: int, j: int) -> np.ndarray:
    E = np.zeros((5, 5))
    E[i - 1, j - 1] = 1.0
    return E


def _chain_rep() -> list:
    """Faithful rep: [M1,M2]=M3, [M1,M3]=M4, [M1,M4]=M5, others zero."""
    M1 = _unit(1, 2) + _unit(2, 3) + _unit(3, 4) + _unit(4, 5)
    return [M1, -_unit(1, 2), _unit(1, 3), -_unit(1, 4), _unit(1, 5)]


def _expm_nil(N: np.ndarray) -> np.ndarray:
    out, term = np.eye(5), np.eye(5)
    for p in range(1, 5):
        term = term @ N / p
        out = out + term
    return out


def _logm_unip(P: np.ndarray) -> np.ndarray:
    N = P - np.eye(5)
    out, term = np.zeros((5, 5)), np.eye(5)
    for p in range(1, 5):
        term = term @ N
        out = out + ((-1) ** (p + 1)) * term / p
    return out


def _matrix_product_oracle(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    rep = _chain_rep()
    X = sum(c * M for c, M in zip(x, rep))
    Y = sum(c * M for c, M in zip(y, rep))
    Z = _logm_unip(_expm_nil(X) @ _expm_nil(Y))
    z1 = Z[1, 2]
    z = np.array([z1, z1 - Z[0, 1], Z[0, 2], -Z[0, 3], Z[0, 4]])
    # Consistency: the log must lie in the span of the representation.
    back = sum(c * M for c, M in zip(z, rep))
    assert np.max(np.abs(back - Z)) < 1e-12
    return z


class TestMatrixOracle:
    def test_representation_matches_structure_constants(self):
        alg = filiform4()
        rep = _chain_rep()
        for i in range(5):
            for j in range(5):
                comm = rep[i] @ rep[j] - rep[j] @ rep[i]
                expect = sum(alg.structure[k, i, j] * rep[k]
                             for k in range(5))
                assert np.max(np.abs(comm - expect)) == 0.0

    def test_product_matches_matrix_oracle(self, rng):
        group = NilGroup(filiform4())
        for _ in range(50):
            x, y = rng.uniform(-1.5, 1.5, size=(2, 5))
            assert np.allclose(group.product(x, y),
                               _matrix_product_oracle(x, y), atol=1e-12)

    def test_inverse_matches_matrix_oracle(self, rng):
        group = NilGroup(filiform4())
        for _ in range(10):
            x = rng.uniform(-1.5, 1.5, size=5)
            z = _matrix_product_oracle(x, np.asarray(group.inverse(x)))
            assert np.max(np.abs(z)) < 1e-12


# ---------------------------------------------------------------------------
# Group-law structure
# ---------------------------------------------------------------------------

class TestGroupLaw:
    def test_heisenberg_closed_form(self, rng):
        group = NilGroup(heisenberg())
        for _ in range(20):
            x, y = rng.normal(size=(2, 3))
            expect = np.array([
                x[0] + y[0], x[1] + y[1],
                x[2] + y[2] + 0.5 * (x[0] * y[1] - x[1] * y[0])])
            assert np.allclose(group.product(x, y), expect, atol=1e-14)

    def test_associativity(self, rng):
        group = NilGroup(filiform4())
        for _ in range(30):
            x, y, w = rng.uniform(-2, 2, size=(3, 5))
            lhs = group.product(group.product(x, y), w)
            rhs = group.product(x, group.product(y, w))
            assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_identity_and_inverse(self, rng):
        group = NilGroup(filiform3())
        x = rng.normal(size=4)
        assert np.allclose(group.product(x, group.identity()), x)
        assert np.allclose(group.product(group.identity(), x), x)
        assert np.max(np.abs(group.product(x, group.inverse(x)))) < 1e-12
        assert np.max(np.abs(group.product(group.inverse(x), x))) < 1e-12

    def test_abelian_product_is_addition(self, rng):
        group = NilGroup(LieAlgebra(np.zeros((3, 3, 3))))
        x, y = rng.normal(size=(2, 3))
        assert np.allclose(group.product(x, y), x + y)

    def test_batched_product_matches_loop(self, rng):
        group = NilGroup(filiform4())
        X = rng.normal(size=(7, 5))
        y = rng.normal(size=5)
        batch = group.product(X, y)
        for i in range(7):
            assert np.allclose(batch[i], group.product(X[i], y), atol=1e-14)

    def test_rotated_basis_product_conjugates(self, rng):
        # Expressing the algebra in a rotated basis must rotate the group
        # law accordingly: Q(x * y) computed in the rotated group equals
        # the original product of Qx and Qy.
        alg = filiform3()
        n = alg.dim
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        C = np.einsum("kij,ia,jb,kc->cab", alg.structure, Q, Q, Q)
        rot = NilGroup(LieAlgebra(C, validate=True, tol=1e-10))
        orig = NilGroup(alg)
        x, y = rng.normal(size=(2, n))
        lhs = Q @ rot.product(x, y)
        rhs = orig.product(Q @ x, Q @ y)
        assert np.allclose(lhs, rhs, atol=1e-10)

    def test_class_cap_enforced(self):
        chain5 = LieAlgebra.from_brackets(
            6, [(1, 2, 3, 1.0), (1, 3, 4, 1.0), (1, 4, 5, 1.0),
                (1, 5, 6, 1.0)])
        assert chain5.nilpotency_class == 5
        with pytest.raises(UnsupportedClassError):
            NilGroup(chain5)


# ---------------------------------------------------------------------------
# Central lattice quotients
# ---------------------------------------------------------------------------

class TestLattice:
    def test_reduce_wraps_lattice_coordinate(self):
        group = NilGroup(heisenberg(), lattice=(3,))
        assert np.allclose(group.reduce([0.2, -0.3, 1.75]), [0.2, -0.3, 0.75])
        assert np.allclose(group.reduce([0.0, 0.0, -0.25]), [0.0, 0.0, 0.75])

    def test_distance_circle_aware(self):
        group = NilGroup(heisenberg(), lattice=(3,))
        a = np.array([0.0, 0.0, 0.05])
        b = np.array([0.0, 0.0, 0.95])
        assert group.distance(a, b) == pytest.approx(0.1)
        c = np.array([0.3, 0.0, 0.95])
        assert group.distance(a, c) == pytest.approx(0.3)

    def test_quotient_product_well_defined(self, rng):
        # Shifting an argument by a full lattice step must not change the
        # reduced product (central directions commute with everything).
        group = NilGroup(heisenberg(), lattice=(3,))
        x, y = rng.normal(size=(2, 3))
        base = group.product(x, y)
        shifted = group.product(x + np.array([0.0, 0.0, 3.0]), y)
        assert group.distance(base, shifted) < 1e-12

    def test_noncentral_lattice_rejected(self):
        with pytest.raises(ValueError, match="central"):
            NilGroup(heisenberg(), lattice=(1,))

    def test_duplicate_lattice_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            NilGroup(heisenberg(), lattice=(3, 3))

    def test_out_of_range_lattice_rejected(self):
        with pytest.raises(ValueError, match="range"):
            NilGroup(heisenberg(), lattice=(4,))

    def test_quotient_associativity(self, rng):
        group = NilGroup(heisenberg(), lattice=(3,))
        for _ in range(10):
            x, y, w = rng.normal(size=(3, 3))
            lhs = group.product(group.product(x, y), w)
            rhs = group.product(x, group.product(y, w))
            assert group.distance(lhs, rhs) < 1e-12


# ---------------------------------------------------------------------------
# Invariant vector fields and series coefficients
# ---------------------------------------------------------------------------

class TestInvariantField:
    def test_series_coefficient_values(self):
        assert np.array_equal(bch_coefficients(3),
                              [1.0, -0.5, 1.0 / 12.0, 0.0])
        assert np.array_equal(bch_coefficients(0), [1.0])
        with pytest.raises(UnsupportedClassError):
            bch_coefficients(4)

    def test_heisenberg_closed_form_field(self, rng):
        # Generator e1 + e2 induces zdot = (x2 - x1) / 2 on the third axis.
        group = NilGroup(heisenberg())
        Z = np.array([1.0, 1.0, 0.0])
        x = rng.normal(size=3)
        val = group.invariant_field(Z, x)
        assert np.allclose(val, [1.0, 1.0, 0.5 * (x[1] - x[0])], atol=1e-14)

    def test_field_is_translation_derivative(self, rng):
        # The field value at x must equal d/ds at s=0 of (sZ) * x, checked
        # with a five-point finite-difference stencil.
        group = NilGroup(filiform4())
        h = 1e-3
        for _ in range(10):
            Z = rng.normal(size=5)
            x = rng.uniform(-1.5, 1.5, size=5)
            f = lambda s: group.product(s * Z, x)
            fd = (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)
            assert np.max(np.abs(group.invariant_field(Z, x) - fd)) < 1e-8

    def test_field_batched(self, rng):
        group = NilGroup(filiform3())
        Z = rng.normal(size=4)
        X = rng.normal(size=(6, 4))
        batch = group.invariant_field(Z, X)
        for i in range(6):
            assert np.allclose(batch[i], group.invariant_field(Z, X[i]))

    def test_field_at_identity_is_generator(self, rng):
        group = NilGroup(filiform4())
        Z = rng.normal(size=5)
        assert np.allclose(group.invariant_field(Z, group.identity()), Z)


# ---------------------------------------------------------------------------
# Automorphisms
# ---------------------------------------------------------------------------

class TestAutomorphisms:
    def test_heisenberg_scaling_automorphism(self):
        group = NilGroup(heisenberg())
        A = np.diag([2.0, 0.5, 1.0])
        assert group.automorphism_residual(A) < 1e-14
        group.check_automorphism(A)

    def test_non_automorphism_rejected(self):
        group = NilGroup(heisenberg())
        with pytest.raises(ValueError, match="automorphism"):
            group.check_automorphism(np.diag([2.0, 1.0, 1.0]))

    def test_derivation_exponential_is_automorphism(self, rng):
        # exp(D) for a derivation D is always an automorphism: check on
        # random members of the derivation space.
        from scipy.linalg import expm
        alg = filiform3()
        group = NilGroup(alg)
        basis = alg.derivation_space()
        for _ in range(5):
            D = np.tensordot(rng.normal(size=len(basis)), basis, axes=1)
            A = expm(0.3 * D)
            assert group.automorphism_residual(A) < 1e-9

    def test_apply_is_group_morphism(self, rng):
        from scipy.linalg import expm
        alg = filiform4()
        group = NilGroup(alg)
        v = rng.normal(size=5)
        A = expm(alg.ad(v))  # inner automorphism
        x, y = rng.normal(size=(2, 5))
        lhs = group.automorphism_apply(A, group.product(x, y))
        rhs = group.product(group.automorphism_apply(A, x),
                            group.automorphism_apply(A, y))
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_lattice_compatibility_enforced(self):
        group = NilGroup(heisenberg(), lattice=(3,))
        # Scales the central direction by 4: algebra automorphism, but the
        # unit lattice is not preserved.
        with pytest.raises(ValueError, match="unimodular"):
            group.check_automorphism(np.diag([2.0, 2.0, 4.0]))
        # Product of the plane scalings equal to one keeps the lattice.
        group.check_automorphism(np.diag([2.0, 0.5, 1.0]))

    def test_rotated_algebra_automorphism_residual(self, rng):
        alg = rotate_algebra(heisenberg(), rng)
        group = NilGroup(alg)
        assert group.automorphism_residual(np.eye(3)) < 1e-12
