"""Simply connected nilpotent groups in exponential coordinates.

For a nilpotent algebra of class k <= 4 the group product is the
Baker-Campbell-Hausdorff series, which truncates exactly at bracket depth 4:

    x * y = x + y + 1/2 [x,y] + 1/12 ([x,[x,y]] + [y,[y,x]]) - 1/24 [y,[x,[x,y]]]

Quotients by central unit lattices are supported: selected basis directions
must be central, and their coordinates are kept canonical in [0, 1).

The invariant vector field generated by an algebra element Z evaluates to

    Z(x) = sum_p c_p ad(x)^p Z,   c_0 = 1, c_1 = -1/2, c_2 = 1/12, c_3 = 0,

which is the derivative at s = 0 of s |-> (sZ) * x.  This series, with these
coefficient values, is what reproduces the closed-form control equations of
the worked examples (e.g. zdot = (u/2)(y - x) on the Heisenberg group) and is
taken as ground truth throughout.
"""

from __future__ import annotations

import numpy as np

from .algebra import LieAlgebra
from .errors import UnsupportedClassError

# Coefficients of the invariant-field series, index p = bracket depth.
# c_p = (-1)^p B_p / p! with the B_1 = +1/2 Bernoulli convention.
_SERIES_COEFFS = (1.0, -0.5, 1.0 / 12.0, 0.0)

MAX_CLASS = 4


def bch_coefficients(max_order: int = 3) -> np.ndarray:
    """Invariant-field series coefficients c_0 .. c_max_order."""
    if max_order >= len(_SERIES_COEFFS):
        raise UnsupportedClassError(
            f"series coefficients are hard-coded through order "
            f"{len(_SERIES_COEFFS) - 1}; order {max_order} is unsupported")
    return np.array(_SERIES_COEFFS[:max_order + 1])


class NilGroup:
    """Group of a nilpotent algebra (class <= 4), optionally with a central
    unit lattice quotient along selected basis directions."""

    def __init__(self, algebra: LieAlgebra, lattice=()):
        self.algebra = algebra
        self.series = algebra.lower_central_series()
        self.class_k = len(self.series)
        if self.class_k > MAX_CLASS:
            raise UnsupportedClassError(
                f"nilpotency class {self.class_k} exceeds the supported "
                f"maximum {MAX_CLASS} (group law hard-coded to depth 4)")
        lattice = tuple(int(j) for j in lattice)
        n = algebra.dim
        if len(set(lattice)) != len(lattice):
            raise ValueError(f"duplicate lattice directions in {lattice}")
        for j in lattice:
            if not 1 <= j <= n:
                raise ValueError(
                    f"lattice direction {j} out of range 1..{n} (1-based)")
            col = algebra.structure[:, j - 1, :]
            if np.max(np.abs(col), initial=0.0) > 1e-12:
                raise ValueError(
                    f"lattice direction e{j} is not central: "
                    f"|[e{j}, .]| up to {np.max(np.abs(col)):.3e}")
        self.lattice = lattice
        self._lattice_idx = np.array([j - 1 for j in lattice], dtype=int)
        self.dim = n

    # -- elementary maps --------------------------------------------------

    def identity(self) -> np.ndarray:
        return np.zeros(self.dim)

    def reduce(self, x: np.ndarray) -> np.ndarray:
        """Canonical representative: lattice coordinates wrapped into [0, 1)."""
        x = np.array(x, dtype=float)
        if self._lattice_idx.size:
            x[..., self._lattice_idx] = np.mod(x[..., self._lattice_idx], 1.0)
        return x

    def product(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """BCH product x * y, reduced to canonical form; supports batches."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        br = self.algebra.bracket
        out = x + y
        if self.class_k >= 2:
            xy = br(x, y)
            out = out + 0.5 * xy
            if self.class_k >= 3:
                xxy = br(x, xy)
                yyx = br(y, -xy)
                out = out + (xxy + yyx) / 12.0
                if self.class_k >= 4:
                    out = out - br(y, xxy) / 24.0
        return self.reduce(out)

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return self.reduce(-np.asarray(x, float))

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Sup-norm distance of coordinates, circle-aware on lattice axes."""
        d = np.abs(np.asarray(x, float) - np.asarray(y, float))
        if self._lattice_idx.size:
            m = np.mod(d[..., self._lattice_idx], 1.0)
            d[..., self._lattice_idx] = np.minimum(m, 1.0 - m)
        return np.max(d, axis=-1)

    # -- invariant vector fields ------------------------------------------

    def invariant_field(self, Z: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Value at x of the invariant field generated by Z.

        Evaluates sum_{p < class} c_p ad(x)^p Z; ``x`` may carry batch axes,
        and ``Z`` may either be a single vector or match the batch shape.
        """
        Z = np.asarray(Z, float)
        x = np.asarray(x, float)
        term = np.broadcast_to(Z, np.broadcast_shapes(Z.shape, x.shape)).copy()
        out = _SERIES_COEFFS[0] * term
        for p in range(1, self.class_k):
            term = self.algebra.bracket(x, term)
            c = _SERIES_COEFFS[p]
            if c != 0.0:
                out = out + c * term
        return out

    # -- automorphisms ----------------------------------------------------

    def automorphism_residual(self, A: np.ndarray) -> float:
        """Worst defect of A[e_i, e_j] = [A e_i, A e_j] over basis pairs."""
        A = np.asarray(A, float)
        C = self.algebra.structure
        lhs = np.einsum('ka,aij->kij', A, C)
        rhs = np.einsum('kab,ai,bj->kij', C, A, A)
        return float(np.max(np.abs(lhs - rhs)))

    def check_automorphism(self, A: np.ndarray, tol: float = 1e-8) -> None:
        """Raise if A is not an algebra automorphism compatible with the lattice."""
        A = np.asarray(A, float)
        res = self.automorphism_residual(A)
        if res > tol:
            raise ValueError(
                f"matrix is not an algebra automorphism: residual {res:.3e} "
                f"> {tol:.1e}")
        if self._lattice_idx.size:
            idx = self._lattice_idx
            block = A[np.ix_(idx, idx)]
            off = A[np.ix_(np.setdiff1d(np.arange(self.dim), idx), idx)]
            if off.size and np.max(np.abs(off)) > 1e-8:
                raise ValueError(
                    "automorphism does not preserve the lattice subspace")
            if np.max(np.abs(block - np.round(block)), initial=0.0) > 1e-8 \
                    or abs(abs(np.linalg.det(block)) - 1.0) > 1e-8:
                raise ValueError(
                    "automorphism must act on the lattice by a unimodular "
                    "integer matrix for the quotient to be well defined")

    def automorphism_apply(self, A: np.ndarray, x: np.ndarray,
                           tol: float = 1e-8) -> np.ndarray:
        """Apply a (validated) algebra automorphism to group coordinates."""
        self.check_automorphism(A, tol=tol)
        return self.reduce(np.asarray(x, float) @ np.asarray(A, float).T)
