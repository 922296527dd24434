"""Shared builders for the test suite: bundled algebras and random systems."""

from __future__ import annotations

import numpy as np

from nilctrl import ControlLaw, LieAlgebra, LinearSystem, NilGroup


# ---------------------------------------------------------------------------
# Bundled algebras
# ---------------------------------------------------------------------------

def abelian(n: int) -> LieAlgebra:
    return LieAlgebra(np.zeros((n, n, n)))


def heisenberg() -> LieAlgebra:
    """Dim 3, class 2: bracket of the first two basis vectors is the third."""
    return LieAlgebra.from_brackets(3, [(1, 2, 3, 1.0)])


def filiform3() -> LieAlgebra:
    """Dim 4, class 3 filiform chain."""
    return LieAlgebra.from_brackets(4, [(1, 2, 3, 1.0), (1, 3, 4, 1.0)])


def filiform4() -> LieAlgebra:
    """Dim 5, class 4 filiform chain."""
    return LieAlgebra.from_brackets(
        5, [(1, 2, 3, 1.0), (1, 3, 4, 1.0), (1, 4, 5, 1.0)])


def bundled_algebras() -> dict:
    return {
        "abelian1": abelian(1),
        "abelian2": abelian(2),
        "abelian3": abelian(3),
        "heisenberg": heisenberg(),
        "filiform3": filiform3(),
        "filiform4": filiform4(),
    }


def r2_system(**kwargs) -> LinearSystem:
    """Plane saddle: dx = x + u, dy = -y + u, u in [-1, 1]."""
    return LinearSystem(NilGroup(abelian(2)), np.diag([1.0, -1.0]),
                        [[1.0, 1.0]], [[-1.0, 1.0]], name="r2", **kwargs)


def heisenberg_quotient_system(**kwargs) -> LinearSystem:
    return LinearSystem(NilGroup(heisenberg(), lattice=(3,)),
                        np.diag([1.0, -1.0, 0.0]), [[1.0, 1.0, 0.0]],
                        [[-1.0, 1.0]], name="heisenberg", **kwargs)


def heisenberg_full_system(**kwargs) -> LinearSystem:
    return LinearSystem(NilGroup(heisenberg()), np.diag([1.0, -1.0, 0.0]),
                        [[1.0, 1.0, 0.0]], [[-1.0, 1.0]],
                        name="heisenberg-unbounded", **kwargs)


# ---------------------------------------------------------------------------
# Random algebras / systems
# ---------------------------------------------------------------------------

def rotate_algebra(alg: LieAlgebra, rng: np.random.Generator) -> LieAlgebra:
    """The same algebra expressed in a random orthonormal basis."""
    n = alg.dim
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    C = np.einsum("kij,ia,jb,kc->cab", alg.structure, Q, Q, Q)
    return LieAlgebra(C, validate=True, tol=1e-10)


def direct_sum(alg: LieAlgebra, extra_abelian: int) -> LieAlgebra:
    """Append commuting extra directions to an algebra."""
    if extra_abelian == 0:
        return alg
    n = alg.dim + extra_abelian
    C = np.zeros((n, n, n))
    C[:alg.dim, :alg.dim, :alg.dim] = alg.structure
    return LieAlgebra(C)


def random_derivation(alg: LieAlgebra, rng: np.random.Generator,
                      radius: float = 0.35) -> np.ndarray:
    """Random derivation rescaled so exp(tD) stays tame over short horizons."""
    basis = alg.derivation_space()
    coeffs = rng.normal(size=len(basis))
    D = np.tensordot(coeffs, basis, axes=1)
    norm = np.linalg.norm(D, 2)
    if norm > 1e-12:
        D *= radius / max(radius, norm)
    return D


def random_system(rng: np.random.Generator, base: str = "heisenberg",
                  extra_abelian: int = 0, n_controls: int = 1,
                  name: str = "") -> LinearSystem:
    """Random-basis nilpotent system with a tame random derivation drift."""
    base_alg = {"heisenberg": heisenberg, "filiform3": filiform3,
                "filiform4": filiform4}[base]()
    alg = rotate_algebra(direct_sum(base_alg, extra_abelian), rng)
    n = alg.dim
    D = random_derivation(alg, rng)
    controls = rng.normal(size=(n_controls, n)) * 0.8
    omega = np.column_stack([-rng.uniform(0.5, 1.0, n_controls),
                             rng.uniform(0.5, 1.0, n_controls)])
    return LinearSystem(NilGroup(alg), D, controls, omega, name=name)


def aligned_law(rng: np.random.Generator, omega: np.ndarray,
                horizon: float = 5.0, quantum: float = 0.02,
                n_pieces: int = 3) -> ControlLaw:
    """Piecewise law whose switch times are multiples of ``quantum``."""
    edges = np.sort(rng.choice(np.arange(1, int(round(horizon / quantum))),
                               size=n_pieces - 1, replace=False)) * quantum
    bounds = np.concatenate([[0.0], edges, [horizon]])
    pieces = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        val = rng.uniform(omega[:, 0], omega[:, 1])
        pieces.append((hi - lo, val))
    return ControlLaw(tuple(pieces))
