"""Finite-dimensional real Lie algebras given by structure constants.

The algebra is stored as a tensor ``C`` with ``C[k, i, j]`` the coefficient of
``e_k`` in ``[e_i, e_j]``.  On top of the bracket this module provides:

* validation (antisymmetry and the Jacobi identity),
* derivations (Leibniz-rule check and the full solution space of the
  Leibniz constraints),
* the real generalized-eigenspace splitting of a derivation, grouped by the
  real parts of its eigenvalues, together with the induced grading check,
* the lower central series and orthogonal graded complements used by the
  triangular-form machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidStructureError, NotNilpotentError

# Numerical-rank cutoff, relative to the largest singular value.
RANK_RTOL = 1e-10


def _orth_columns(M: np.ndarray, rtol: float = RANK_RTOL,
                  scale: float = 0.0) -> np.ndarray:
    """Orthonormal basis of the column span of M (n x r, possibly r = 0).

    ``scale`` puts an absolute floor under the rank cutoff.  Without a
    floor, a matrix made of pure rounding noise reads as full rank, since
    the cutoff is relative to its own largest singular value.
    """
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    cutoff = rtol * max(s[0] if s.size else 0.0, scale)
    rank = int(np.sum(s > cutoff))
    return U[:, :rank]


def _null_space(M: np.ndarray, rtol: float = RANK_RTOL,
                scale: float = 0.0) -> np.ndarray:
    """Orthonormal basis of the kernel of M (columns).

    ``scale`` sets an absolute floor for the rank cutoff, as in
    :func:`_orth_columns`.
    """
    n = M.shape[1]
    if M.size == 0 or not np.any(M):
        return np.eye(n)
    U, s, Vt = np.linalg.svd(M)
    cutoff = rtol * max(s[0], scale)
    rank = int(np.sum(s > cutoff))
    return Vt[rank:].T


class LieAlgebra:
    """A real Lie algebra on R^n described by its structure constants."""

    def __init__(self, structure: np.ndarray, labels=None, validate: bool = True,
                 tol: float = 1e-12):
        structure = np.asarray(structure, dtype=float)
        if structure.ndim != 3 or len(set(structure.shape)) != 1:
            raise InvalidStructureError(
                f"structure tensor must be (n, n, n), got {structure.shape}")
        self.structure = structure
        self.structure.setflags(write=False)
        self.dim = structure.shape[0]
        self.labels = tuple(labels) if labels is not None else tuple(
            f"e{i + 1}" for i in range(self.dim))
        if validate:
            self.validate(tol=tol)

    @classmethod
    def from_brackets(cls, dim: int, brackets, labels=None, **kwargs) -> "LieAlgebra":
        """Build from a list of entries ``(i, j, k, coeff)``, 1-based indices.

        Each entry declares ``[e_i, e_j] = coeff * e_k`` (summed over repeated
        ``(i, j, k)``); the antisymmetric counterpart is filled in
        automatically.  Conflicting redundant entries are rejected.
        """
        C = np.zeros((dim, dim, dim))
        given = np.zeros((dim, dim, dim), dtype=bool)
        for entry in brackets:
            i, j, k, coeff = entry
            i, j, k = int(i) - 1, int(j) - 1, int(k) - 1
            if not (0 <= i < dim and 0 <= j < dim and 0 <= k < dim):
                raise InvalidStructureError(
                    f"bracket entry {entry}: index out of range for dim {dim}")
            if given[k, j, i] and not np.isclose(C[k, j, i], -float(coeff)):
                raise InvalidStructureError(
                    f"bracket entry {entry} conflicts with its antisymmetric "
                    f"counterpart already given as {C[k, j, i]}")
            C[k, i, j] += float(coeff)
            C[k, j, i] -= float(coeff)
            given[k, i, j] = True
        return cls(C, labels=labels, **kwargs)

    # -- basic operations -------------------------------------------------

    def bracket(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Lie bracket [X, Y]; both arguments may carry leading batch axes."""
        return np.einsum('kij,...i,...j->...k', self.structure,
                         np.asarray(X, float), np.asarray(Y, float))

    def ad(self, X: np.ndarray) -> np.ndarray:
        """Matrix of ad(X) = [X, .] in the standard basis."""
        return np.einsum('kij,i->kj', self.structure, np.asarray(X, float))

    def jacobi_residual(self) -> float:
        """Worst-case Jacobi defect over basis triples (scale-normalized)."""
        C = self.structure
        # [[e_i, e_j], e_l]_k = sum_a C[k, a, l] C[a, i, j]
        T = np.einsum('kal,aij->kijl', C, C)
        J = T + np.einsum('kijl->kjli', T) + np.einsum('kijl->klij', T)
        scale = max(1.0, float(np.max(np.abs(C))) ** 2)
        return float(np.max(np.abs(J))) / scale

    def antisymmetry_residual(self) -> float:
        C = self.structure
        scale = max(1.0, float(np.max(np.abs(C))))
        return float(np.max(np.abs(C + np.swapaxes(C, 1, 2)))) / scale

    def validate(self, tol: float = 1e-12) -> None:
        """Check antisymmetry and the Jacobi identity; raise on failure."""
        ra = self.antisymmetry_residual()
        if ra > tol:
            raise InvalidStructureError(
                f"structure constants are not antisymmetric: residual {ra:.3e}")
        rj = self.jacobi_residual()
        if rj > tol:
            raise InvalidStructureError(
                f"Jacobi identity fails: residual {rj:.3e}")

    # -- derivations ------------------------------------------------------

    def derivation_residual(self, D: np.ndarray) -> float:
        """Worst Leibniz defect ||D[e_i,e_j] - [De_i,e_j] - [e_i,De_j]||_inf."""
        D = np.asarray(D, float)
        C = self.structure
        lhs = np.einsum('ka,aij->kij', D, C)
        rhs = (np.einsum('kaj,ai->kij', C, D)
               + np.einsum('kia,aj->kij', C, D))
        return float(np.max(np.abs(lhs - rhs)))

    def is_derivation(self, D: np.ndarray, tol: float = 1e-9) -> bool:
        return self.derivation_residual(D) <= tol

    def derivation_space(self) -> np.ndarray:
        """Basis of the space of derivations, shape (count, n, n).

        Solves the linear Leibniz constraint system; the returned matrices
        span all D with D[X, Y] = [DX, Y] + [X, DY].
        """
        n = self.dim
        C = self.structure
        rows = []
        for i in range(n):
            for j in range(i + 1, n):
                # Constraint rows for the pair (i, j), one per component k;
                # unknowns are the n^2 entries of D, flattened row-major.
                block = np.zeros((n, n * n))
                for k in range(n):
                    for a in range(n):
                        block[k, k * n + a] += C[a, i, j]       # D[k,a] C[a,i,j]
                        block[k, a * n + i] -= C[k, a, j]       # [De_i, e_j]
                        block[k, a * n + j] -= C[k, i, a]       # [e_i, De_j]
                rows.append(block)
        if not rows:
            return np.eye(n * n).reshape(-1, n, n)
        A = np.vstack(rows)
        basis = _null_space(A)
        return basis.T.reshape(-1, n, n)

    # -- lower central series and gradation -------------------------------

    def lower_central_series(self, rtol: float = RANK_RTOL) -> list[np.ndarray]:
        """Orthonormal bases of u^1 > u^2 > ... > u^k (the nonzero terms).

        u^1 = u and u^{i+1} = [u^i, u].  Raises NotNilpotentError if the
        dimensions stabilize at a nonzero value.
        """
        n = self.dim
        series = [np.eye(n)]
        current = series[0]
        # Rank decisions compare bracket images against the overall size of
        # the structure constants, so an image that is nothing but rounding
        # noise collapses to zero instead of reading as full rank.
        scale = float(np.max(np.abs(self.structure), initial=0.0))
        while True:
            # Span of [X, e_j] over basis X of the current term and all e_j.
            gens = np.einsum('kij,im->kmj', self.structure, current)
            nxt = _orth_columns(gens.reshape(n, -1), rtol=rtol, scale=scale)
            if nxt.shape[1] == 0:
                return series
            if nxt.shape[1] >= current.shape[1]:
                raise NotNilpotentError(
                    f"lower central series stabilizes at dimension "
                    f"{nxt.shape[1]}; the algebra is not nilpotent")
            series.append(nxt)
            current = nxt

    @property
    def nilpotency_class(self) -> int:
        return len(self.lower_central_series())

    def graded_complements(self) -> "Gradation":
        """Orthogonal complements V_i of u^{i+1} inside u^i, as a Gradation."""
        series = self.lower_central_series()
        series.append(np.zeros((self.dim, 0)))
        blocks = []
        for i in range(len(series) - 1):
            upper = series[i + 1]
            proj = np.eye(self.dim) - upper @ upper.T
            W = _orth_columns(proj @ series[i], scale=1.0)
            expect = series[i].shape[1] - upper.shape[1]
            if W.shape[1] != expect:
                raise InvalidStructureError(
                    f"graded complement V_{i + 1} has dimension {W.shape[1]}, "
                    f"expected {expect}")
            blocks.append(W)
        return Gradation(algebra=self, blocks=tuple(blocks))


@dataclass(frozen=True, eq=False)
class Gradation:
    """Coordinates adapted to the graded complements V_1, ..., V_k.

    ``adapted`` stacks the orthonormal block bases into one orthogonal matrix;
    adapted coordinate ``x^i`` is the slice of block ``i`` (1-based, following
    the usual superscript notation).
    """

    algebra: LieAlgebra
    blocks: tuple
    adapted: np.ndarray = field(init=False)

    def __post_init__(self):
        A = np.hstack(self.blocks) if self.blocks else np.zeros((0, 0))
        gram = A.T @ A - np.eye(A.shape[1])
        if A.size and np.max(np.abs(gram)) > 1e-10:
            raise InvalidStructureError(
                f"graded blocks are not orthonormal: residual "
                f"{np.max(np.abs(gram)):.3e}")
        A.setflags(write=False)
        object.__setattr__(self, 'adapted', A)

    @property
    def class_k(self) -> int:
        return len(self.blocks)

    @property
    def dims(self) -> tuple:
        return tuple(b.shape[1] for b in self.blocks)

    @property
    def component_index(self) -> np.ndarray:
        """1-based block label of each adapted coordinate."""
        return np.repeat(np.arange(1, self.class_k + 1), self.dims)

    def block_slice(self, i: int) -> slice:
        """Adapted-coordinate slice of block i (1-based)."""
        start = sum(self.dims[:i - 1])
        return slice(start, start + self.dims[i - 1])

    def to_adapted(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, float) @ self.adapted

    def from_adapted(self, xa: np.ndarray) -> np.ndarray:
        return np.asarray(xa, float) @ self.adapted.T

    def component(self, x: np.ndarray, i: int) -> np.ndarray:
        """Adapted component x^i of a vector in standard coordinates."""
        return self.to_adapted(x)[..., self.block_slice(i)]


@dataclass(frozen=True, eq=False)
class Derivation:
    """A matrix acting on the algebra, checked against the Leibniz rule."""

    algebra: LieAlgebra
    matrix: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        M = np.asarray(self.matrix, float)
        if M.shape != (self.algebra.dim, self.algebra.dim):
            raise InvalidStructureError(
                f"derivation matrix must be {self.algebra.dim}x"
                f"{self.algebra.dim}, got {M.shape}")
        res = self.algebra.derivation_residual(M)
        if res > self.tol:
            raise InvalidStructureError(
                f"matrix is not a derivation: Leibniz residual {res:.3e} "
                f"> {self.tol:.1e}")
        M.setflags(write=False)
        object.__setattr__(self, 'matrix', M)

    @property
    def residual(self) -> float:
        return self.algebra.derivation_residual(self.matrix)

    def spectral(self, **kwargs) -> "SpectralDecomposition":
        return spectral_decompose(self.matrix, **kwargs)

    def grading_residual(self, **kwargs) -> float:
        return check_grading(self.algebra, self.spectral(), **kwargs)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Real generalized eigenspaces of a matrix, grouped by eigenvalue real part.

    ``levels`` is a tuple of ``(value, basis)`` pairs sorted by value; each
    basis is orthonormal with shape (n, d).  Real parts within ``merge_tol``
    of each other share a level and values within ``zero_tol`` of zero are
    assigned to the zero level.
    """

    matrix: np.ndarray
    levels: tuple
    merge_tol: float
    zero_tol: float

    def _select(self, pred) -> np.ndarray:
        n = self.matrix.shape[0]
        picks = [b for lam, b in self.levels if pred(lam)]
        return np.hstack(picks) if picks else np.zeros((n, 0))

    @property
    def positive_basis(self) -> np.ndarray:
        return self._select(lambda lam: lam > 0)

    @property
    def zero_basis(self) -> np.ndarray:
        return self._select(lambda lam: lam == 0.0)

    @property
    def negative_basis(self) -> np.ndarray:
        return self._select(lambda lam: lam < 0)

    @property
    def hyperbolic_basis(self) -> np.ndarray:
        """Concatenated bases of all nonzero levels."""
        return self._select(lambda lam: lam != 0.0)

    def level_values(self) -> tuple:
        return tuple(lam for lam, _ in self.levels)

    def invariance_residual(self) -> float:
        """Worst defect of invariance of each level under the matrix."""
        worst = 0.0
        for _, B in self.levels:
            if B.shape[1] == 0:
                continue
            img = self.matrix @ B
            worst = max(worst, float(np.max(np.abs(img - B @ (B.T @ img)))))
        return worst

    def project(self, X: np.ndarray, basis: np.ndarray) -> np.ndarray:
        return (np.asarray(X, float) @ basis) @ basis.T


def spectral_decompose(D: np.ndarray, merge_tol: float = 1e-9,
                       zero_tol: float = 1e-9,
                       rank_rtol: float = RANK_RTOL) -> SpectralDecomposition:
    """Split R^n into real generalized eigenspaces of D grouped by Re(eigenvalue).

    Each level's subspace is computed as the kernel of the real polynomial in
    D that annihilates the level's eigenvalues (conjugate pairs contribute
    real quadratic factors), with numerical rank read off a singular value
    cutoff of ``rank_rtol`` times the largest singular value.
    """
    D = np.asarray(D, float)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ValueError(f"matrix must be square, got {D.shape}")
    eigs = np.linalg.eigvals(D)

    # Group eigenvalues into real-part clusters (merge within merge_tol,
    # snap to the zero level within zero_tol).
    order = np.argsort(eigs.real)
    clusters: list[list[int]] = []
    for idx in order:
        re = eigs.real[idx]
        if clusters and re - eigs.real[clusters[-1][-1]] <= merge_tol:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    # Merge any cluster touching zero into a single zero cluster.
    zero_members: list[int] = []
    keep = []
    for cl in clusters:
        if any(abs(eigs.real[i]) <= zero_tol for i in cl):
            zero_members.extend(cl)
        else:
            keep.append(cl)

    def level_basis(members) -> np.ndarray:
        M = np.eye(n)
        scale = 1.0  # product of factor norms, floors the rank cutoff
        done = set()
        for i in members:
            if i in done:
                continue
            a = eigs[i]
            if abs(a.imag) <= 1e-12:
                factor = D - a.real * np.eye(n)
                done.add(i)
            else:
                # Pair the factor with the conjugate eigenvalue; the partner
                # index (if present among members) is consumed as well.
                factor = (D @ D - 2 * a.real * D
                          + (abs(a) ** 2) * np.eye(n))
                done.add(i)
                partner = [j for j in members if j not in done
                           and abs(eigs[j] - np.conj(a)) < 1e-6]
                if partner:
                    done.add(partner[0])
            M = M @ factor
            scale *= max(float(np.linalg.norm(factor, 2)), 1e-30)
        return _null_space(M, rtol=rank_rtol, scale=scale)

    levels = []
    if zero_members:
        levels.append((0.0, level_basis(zero_members)))
    for cl in keep:
        value = float(np.mean(eigs.real[cl]))
        levels.append((value, level_basis(cl)))
    levels.sort(key=lambda lb: lb[0])

    total = sum(b.shape[1] for _, b in levels)
    if total != n:
        raise ValueError(
            f"generalized eigenspace dimensions sum to {total}, expected {n}; "
            f"rank thresholds failed for this matrix")
    for _, b in levels:
        b.setflags(write=False)
    D = D.copy()
    D.setflags(write=False)
    return SpectralDecomposition(matrix=D, levels=tuple(levels),
                                 merge_tol=merge_tol, zero_tol=zero_tol)


def check_grading(algebra: LieAlgebra, dec: SpectralDecomposition,
                  match_tol: float = 1e-6) -> float:
    """Worst defect of [g_a, g_b] c g_{a+b} over all level pairs.

    Brackets of basis vectors from levels a and b must land in the level
    whose value matches a + b (within ``match_tol``); if no level matches,
    the bracket must vanish.  Returns the maximal residual norm.
    """
    worst = 0.0
    values = dec.level_values()
    for la, Ba in dec.levels:
        for lb, Bb in dec.levels:
            if Ba.shape[1] == 0 or Bb.shape[1] == 0:
                continue
            W = algebra.bracket(Ba.T[:, None, :], Bb.T[None, :, :])
            target = la + lb
            diffs = [abs(v - target) for v in values]
            best = int(np.argmin(diffs)) if diffs else -1
            if best >= 0 and diffs[best] <= match_tol:
                Bt = dec.levels[best][1]
                resid = W - (W @ Bt) @ Bt.T
            else:
                resid = W
            if resid.size:
                worst = max(worst, float(np.max(np.abs(resid))))
    return worst
