"""Torus extensions, decomposable splittings, and triangular-form solving.

Three related constructions live here:

* :class:`SemidirectSystem` — control systems on ``H x_rho u`` where H is a
  torus (R/Z)^d acting on a nilpotent algebra u through a one-parameter
  automorphism family ``rho(theta) = exp(sum_i theta_i A_i)``: the torus
  coordinates integrate the controls directly, while the nil coordinates see
  the drift plus the rho-twisted invariant control field.

* :func:`build_from_decomposable` — splits a system on a nilpotent group
  into that semidirect shape when its structure allows it: the nonzero
  spectral part of the drift must close under the bracket, and the zero part
  must be exactly the central lattice torus.  The connecting map
  ``psi(h, x) = exp(x) * torus_embed(h)`` is returned and is a group
  isomorphism onto the original group.

* :class:`TriangularForm` / :func:`triangular_solve` — coordinates adapted
  to the graded complements make the drift block lower-triangular and the
  invariant fields feed-forward (component i only reads components < i), so
  the system solves as a cascade of variation-of-constants integrals, one
  block at a time, evaluated by composite Simpson quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .algebra import Derivation, LieAlgebra, spectral_decompose
from .dynamics import ControlLaw, LinearSystem, Trajectory, integrate_law
from .errors import NotApplicableError
from .group import NilGroup


class SemidirectSystem:
    """Controls on a torus acting on a nilpotent group by automorphisms.

    State is (theta, x) with theta in (R/Z)^d and x in the nil factor:

        theta_dot = B^T u                     (torus controls)
        x_dot     = D x + (rho(theta) W_u)(x),   W_u = sum_j u_j Z_j

    The generators A_i must be derivations of the nil algebra (so rho(theta)
    stays an automorphism), must commute pairwise, and must satisfy
    exp(A_i) = identity (unit periods).
    """

    def __init__(self, torus_dim: int, rho_generators, nil_group: NilGroup,
                 drift, torus_controls, nil_controls, omega,
                 step: float = 1e-3, name: str = ""):
        d = int(torus_dim)
        q = nil_group.dim
        gens = np.asarray(rho_generators, float).reshape(d, q, q) if d else \
            np.zeros((0, q, q))
        for i in range(d):
            res = nil_group.algebra.derivation_residual(gens[i])
            if res > 1e-9:
                raise ValueError(
                    f"rho generator {i + 1} is not an algebra derivation "
                    f"(Leibniz residual {res:.3e}); exp would leave Aut(u)")
            per = np.max(np.abs(expm(gens[i]) - np.eye(q)))
            if per > 1e-8:
                raise ValueError(
                    f"rho generator {i + 1} does not have unit period: "
                    f"|exp(A) - I| = {per:.3e}")
            for j in range(i):
                comm = gens[i] @ gens[j] - gens[j] @ gens[i]
                if np.max(np.abs(comm)) > 1e-10:
                    raise ValueError(
                        f"rho generators {j + 1} and {i + 1} do not commute "
                        f"(residual {np.max(np.abs(comm)):.3e})")
        Derivation(nil_group.algebra, np.asarray(drift, float))
        self.torus_dim = d
        self.rho_generators = gens
        self.nil_group = nil_group
        self.drift = np.asarray(drift, float)
        self.torus_controls = np.atleast_2d(np.asarray(torus_controls, float)) \
            if d else np.zeros((np.atleast_2d(nil_controls).shape[0], 0))
        self.nil_controls = np.atleast_2d(np.asarray(nil_controls, float))
        self.omega = np.asarray(omega, float).reshape(-1, 2)
        m = self.nil_controls.shape[0]
        if self.torus_controls.shape != (m, d):
            raise ValueError(
                f"torus controls must be ({m}, {d}), got "
                f"{self.torus_controls.shape}")
        if np.any(self.omega[:, 0] > 0) or np.any(self.omega[:, 1] < 0):
            raise ValueError("omega must contain u = 0 in every coordinate")
        self.step = float(step)
        self.name = name

    @property
    def dim(self) -> int:
        return self.torus_dim + self.nil_group.dim

    @property
    def control_dim(self) -> int:
        return self.nil_controls.shape[0]

    def rho(self, theta) -> np.ndarray:
        """Automorphism exp(sum_i theta_i A_i) of the nil factor."""
        q = self.nil_group.dim
        if self.torus_dim == 0:
            return np.eye(q)
        theta = np.atleast_1d(np.asarray(theta, float))
        return expm(np.tensordot(theta, self.rho_generators, axes=1))

    def split(self, p: np.ndarray):
        p = np.asarray(p, float)
        return p[..., :self.torus_dim], p[..., self.torus_dim:]

    def join(self, theta, x) -> np.ndarray:
        return np.concatenate([np.atleast_1d(theta), np.atleast_1d(x)], axis=-1)

    def reduce(self, p: np.ndarray) -> np.ndarray:
        theta, x = self.split(np.array(p, float))
        theta = np.mod(theta, 1.0)
        return self.join(theta, self.nil_group.reduce(x))

    def identity(self) -> np.ndarray:
        return np.zeros(self.dim)

    def product(self, p1, p2) -> np.ndarray:
        """Group product (h1, x1)(h2, x2) = (h1 + h2, x1 * rho(h1) x2)."""
        t1, x1 = self.split(np.asarray(p1, float))
        t2, x2 = self.split(np.asarray(p2, float))
        return self.join(np.mod(t1 + t2, 1.0),
                         self.nil_group.product(x1, self.rho(t1) @ x2))

    def inverse(self, p) -> np.ndarray:
        t, x = self.split(np.asarray(p, float))
        return self.join(np.mod(-t, 1.0), -(self.rho(-t) @ x))

    def distance(self, p1, p2) -> float:
        t1, x1 = self.split(np.asarray(p1, float))
        t2, x2 = self.split(np.asarray(p2, float))
        dt = np.abs(t1 - t2)
        if dt.size:
            m = np.mod(dt, 1.0)
            dt = np.minimum(m, 1.0 - m)
        dx = self.nil_group.distance(x1, x2)
        return float(max(np.max(dt, initial=0.0), dx))

    def check_control_value(self, u) -> None:
        u = np.atleast_1d(np.asarray(u, float))
        if u.size != self.control_dim:
            raise ValueError(
                f"control dimension {u.size} != expected {self.control_dim}")
        if np.any(u < self.omega[:, 0] - 1e-12) or np.any(u > self.omega[:, 1] + 1e-12):
            raise ValueError(f"control value {u} outside omega box {self.omega}")

    def vector_field(self, p, u) -> np.ndarray:
        theta, x = self.split(np.asarray(p, float))
        u = np.atleast_1d(np.asarray(u, float))
        W = self.rho(theta) @ (u @ self.nil_controls)
        xdot = x @ self.drift.T + self.nil_group.invariant_field(W, x)
        return self.join(u @ self.torus_controls, xdot)

    def simulate(self, p0, law: ControlLaw, horizon: float = None,
                 keep: int = 1) -> Trajectory:
        if horizon is None:
            horizon = law.total_duration
        times, states = integrate_law(
            lambda val: (lambda s: self.vector_field(s, val)),
            p0, law, horizon, self.step, reduce=self.reduce,
            check_value=self.check_control_value, keep=keep)
        return Trajectory(times=times, states=states, law=law)


@dataclass(frozen=True, eq=False)
class DecomposableSplit:
    """Result of splitting a system across a torus-times-hyperbolic structure."""

    source: LinearSystem
    semidirect: SemidirectSystem
    hyperbolic_basis: np.ndarray     # (n, q) columns spanning the nonzero part
    torus_embedding: np.ndarray      # (n, d) unit vectors of lattice directions

    def psi(self, p) -> np.ndarray:
        """Isomorphism (theta, x_nil) -> exp(X) * torus point, in source coords."""
        theta, xn = self.semidirect.split(np.asarray(p, float))
        X = xn @ self.hyperbolic_basis.T
        g = theta @ self.torus_embedding.T
        return self.source.group.product(X, g)

    def psi_inv(self, y) -> np.ndarray:
        y = np.asarray(y, float)
        S = np.hstack([self.hyperbolic_basis, self.torus_embedding])
        coeffs = np.linalg.solve(S, np.atleast_1d(y))
        q = self.hyperbolic_basis.shape[1]
        return self.semidirect.reduce(
            self.semidirect.join(coeffs[q:], coeffs[:q]))

    def homomorphism_residual(self, rng, samples: int = 32) -> float:
        """Worst |psi(p1 p2) - psi(p1) psi(p2)| over random pairs."""
        worst = 0.0
        d, q = self.semidirect.torus_dim, self.semidirect.nil_group.dim
        for _ in range(samples):
            ps = [self.semidirect.join(rng.uniform(0, 1, d),
                                       rng.normal(0, 1, q)) for _ in range(2)]
            lhs = self.psi(self.semidirect.product(ps[0], ps[1]))
            rhs = self.source.group.product(self.psi(ps[0]), self.psi(ps[1]))
            worst = max(worst, float(self.source.group.distance(lhs, rhs)))
        return worst

    def transport_residual(self, p0, law: ControlLaw, horizon: float) -> float:
        """Worst gap between conjugated semidirect flow and source flow."""
        semi = self.semidirect.simulate(p0, law, horizon)
        direct = self.source.simulate(self.psi(p0), law, horizon)
        worst = 0.0
        for i in range(len(semi.times)):
            worst = max(worst, float(self.source.group.distance(
                self.psi(semi.states[i]), direct.states[i])))
        return worst


def build_from_decomposable(system: LinearSystem) -> DecomposableSplit:
    """Split a lattice-quotient system across its drift spectral structure.

    Requires (i) the nonzero spectral part of the drift to be closed under
    the bracket and (ii) the zero part to coincide with the span of the
    central lattice directions (a torus factor).  Raises NotApplicableError
    otherwise — e.g. on the Heisenberg quotient, where the bracket of the
    two hyperbolic directions escapes into the center.
    """
    grp = system.group
    alg = grp.algebra
    n = alg.dim
    dec = spectral_decompose(system.drift)
    H = dec.hyperbolic_basis
    Z0 = dec.zero_basis
    q = H.shape[1]

    # (i) bracket closure of the nonzero part
    worst = 0.0
    for a in range(q):
        for b in range(q):
            w = alg.bracket(H[:, a], H[:, b])
            worst = max(worst, float(np.max(np.abs(w - H @ (H.T @ w)),
                                            initial=0.0)))
    if worst > 1e-9:
        raise NotApplicableError(
            f"nonzero spectral part is not a subalgebra: bracket escapes by "
            f"{worst:.3e}; the system does not decompose across this split")

    # (ii) zero part must be exactly the central lattice torus
    lat = [j - 1 for j in grp.lattice]
    E = np.zeros((n, len(lat)))
    for col, j in enumerate(lat):
        E[j, col] = 1.0
    if Z0.shape[1] != len(lat):
        raise NotApplicableError(
            f"zero spectral part has dimension {Z0.shape[1]} but the lattice "
            f"covers {len(lat)} directions; the zero part is not a torus")
    if Z0.size and np.max(np.abs(Z0 - E @ (E.T @ Z0))) > 1e-9:
        raise NotApplicableError(
            "zero spectral part is not spanned by the lattice directions")

    # nil-factor algebra in the hyperbolic basis
    Cp = np.empty((q, q, q))
    for a in range(q):
        for b in range(q):
            Cp[:, a, b] = H.T @ alg.bracket(H[:, a], H[:, b])
    nil_alg = LieAlgebra(Cp, validate=True, tol=1e-8)
    nil_grp = NilGroup(nil_alg)

    gens = np.array([H.T @ alg.ad(E[:, i]) @ H for i in range(len(lat))]) \
        if lat else np.zeros((0, q, q))
    drift_nil = H.T @ system.drift @ H
    inv_res = np.max(np.abs(system.drift @ H - H @ drift_nil), initial=0.0)
    if inv_res > 1e-9:
        raise NotApplicableError(
            f"drift does not preserve the hyperbolic subspace: {inv_res:.3e}")

    S = np.hstack([H, E])
    coeffs = np.linalg.solve(S, system.controls.T)     # (q + d, m)
    nil_controls = coeffs[:q].T
    torus_controls = coeffs[q:].T

    semi = SemidirectSystem(
        torus_dim=len(lat), rho_generators=gens, nil_group=nil_grp,
        drift=drift_nil, torus_controls=torus_controls,
        nil_controls=nil_controls, omega=system.omega, step=system.step,
        name=(system.name + "-split") if system.name else "split")
    return DecomposableSplit(source=system, semidirect=semi,
                             hyperbolic_basis=H, torus_embedding=E)


# ---------------------------------------------------------------------------
# Triangular form and the cascade solver
# ---------------------------------------------------------------------------

class TriangularForm:
    """System coordinates adapted to the graded complements V_1, ..., V_k.

    In the adapted basis the drift is block lower-triangular (certified at
    construction) and the invariant-field component in block i depends only
    on blocks < i, so each block solves by variation of constants given the
    blocks below it.
    """

    def __init__(self, system: LinearSystem):
        self.system = system
        self.gradation = system.group.algebra.graded_complements()
        P = self.gradation.adapted
        self.adapted = P
        self.drift_adapted = P.T @ system.drift @ P
        k = self.gradation.class_k
        self.dims = self.gradation.dims
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)])
        worst = 0.0
        for i in range(k):
            for j in range(i + 1, k):
                blk = self.block(self.drift_adapted, i + 1, j + 1)
                if blk.size:
                    worst = max(worst, float(np.max(np.abs(blk))))
        if worst > 1e-10:
            raise ValueError(
                f"drift is not block lower-triangular in adapted coordinates "
                f"(residual {worst:.3e})")
        self.upper_residual = worst

    @property
    def class_k(self) -> int:
        return self.gradation.class_k

    def block_slice(self, i: int) -> slice:
        return slice(self.offsets[i - 1], self.offsets[i])

    def block(self, M: np.ndarray, i: int, j: int) -> np.ndarray:
        """Block (i, j) of an adapted-coordinates matrix (1-based labels)."""
        return M[self.block_slice(i), self.block_slice(j)]

    def ad_adapted(self, x: np.ndarray) -> np.ndarray:
        """Matrix of ad(x) written in the adapted basis; x in standard coords."""
        P = self.adapted
        return P.T @ self.system.group.algebra.ad(np.asarray(x, float)) @ P

    def component_rhs(self, i: int, x_low: np.ndarray, W: np.ndarray) -> np.ndarray:
        """Inhomogeneity G^i: lower-block drift feed plus field component i.

        ``x_low`` holds adapted blocks 1..i-1 (last axis, possibly batched)
        and ``W`` the control-scaled generator(s) in standard coordinates.
        """
        x_low = np.asarray(x_low, float)
        pre = self.offsets[i - 1]
        Dfeed = self.drift_adapted[self.block_slice(i), :pre]
        xa = np.zeros(x_low.shape[:-1] + (self.offsets[-1],))
        xa[..., :pre] = x_low
        xs = self.gradation.from_adapted(xa)
        fld = self.system.group.invariant_field(W, xs)
        comp = self.gradation.to_adapted(fld)[..., self.block_slice(i)]
        return x_low @ Dfeed.T + comp

    def solve(self, x0: np.ndarray, source, horizon: float,
              quad_step: float = 2e-2) -> Trajectory:
        """Cascade solution by block-wise variation of constants.

        ``source`` is either a ControlLaw (applied through the system's
        control generators) or a callable mapping time to a generator in
        standard coordinates.  Block i is advanced on a grid of spacing
        quad_step / 2^(k-i) with composite Simpson panels, so every
        quadrature node of block i falls on exact grid points of the lower
        blocks — no interpolation, and fourth-order convergence in
        quad_step.  For a ControlLaw whose switch times are multiples of
        quad_step, panel endpoints take one-sided control values, keeping
        full order across switches.  States come back on the coarse grid,
        in standard (unreduced, covering-space) coordinates.
        """
        k = self.class_k
        N = int(round(horizon / quad_step))
        if abs(N * quad_step - horizon) > 1e-9 or N < 1:
            raise ValueError(
                f"horizon {horizon} must be a positive multiple of "
                f"quad_step {quad_step}")
        x0a = self.gradation.to_adapted(np.asarray(x0, float))
        # Generator samples on the finest half-grid (block 1 midpoints);
        # at a grid point that is also a control switch, the left panel must
        # see the outgoing value and the right panel the incoming one.
        fine = quad_step / 2 ** k
        t_fine = np.arange(2 * N * 2 ** (k - 1) + 1) * fine
        if isinstance(source, ControlLaw):
            ctl = self.system.controls
            W_plus = np.array([source.value_at(t) @ ctl for t in t_fine])
            W_minus = np.array([source.value_at(t, side="left") @ ctl
                                for t in t_fine])
        else:
            W_plus = np.array([np.asarray(source(t), float) for t in t_fine])
            W_minus = W_plus
        two_sided = W_minus is not W_plus and bool(
            np.any(W_minus != W_plus))
        levels = []
        for i in range(1, k + 1):
            delta = quad_step / 2 ** (k - i)
            Mi = N * 2 ** (k - i)
            Dii = self.block(self.drift_adapted, i, i)
            E = expm(delta * Dii)
            Eh = expm(0.5 * delta * Dii)
            # Inhomogeneity at panel nodes (spacing delta / 2).
            pre = self.offsets[i - 1]
            x_low = np.zeros((2 * Mi + 1, pre))
            for j in range(1, i):
                stride = 2 ** (i - 1 - j)
                x_low[:, self.offsets[j - 1]:self.offsets[j]] = \
                    levels[j - 1][::stride][:2 * Mi + 1]
            sub = slice(None, None, 2 ** (i - 1))
            G = self.component_rhs(i, x_low, W_plus[sub][:2 * Mi + 1])
            G_end = self.component_rhs(i, x_low, W_minus[sub][:2 * Mi + 1]) \
                if two_sided else G
            GE = G @ E.T
            GEh = G @ Eh.T
            xi = np.empty((Mi + 1, self.dims[i - 1]))
            xi[0] = x0a[self.block_slice(i)]
            w = delta / 6.0
            for m in range(Mi):
                xi[m + 1] = (E @ xi[m]
                             + w * (GE[2 * m] + 4.0 * GEh[2 * m + 1]
                                    + G_end[2 * m + 2]))
            levels.append(xi)
        out = np.hstack([levels[i][::2 ** (k - 1 - i)][:N + 1]
                         for i in range(k)])
        times = np.arange(N + 1) * quad_step
        return Trajectory(times=times,
                          states=self.gradation.from_adapted(out), law=None)


def triangular_form(system: LinearSystem) -> TriangularForm:
    """Adapted-coordinates form of the system (certified block-triangular)."""
    return TriangularForm(system)


def triangular_solve(tf: TriangularForm, x0, source, horizon: float,
                     quad_step: float = 2e-2) -> Trajectory:
    """Cascade variation-of-constants solution; see TriangularForm.solve."""
    return tf.solve(x0, source, horizon, quad_step=quad_step)


def law_generator_path(system: LinearSystem, law: ControlLaw):
    """Time-dependent generator t -> sum_j u_j(t) Z_j for a control law."""
    return lambda t: law.value_at(t) @ system.controls


def block_structure_check(tf: TriangularForm, n_samples: int = 100,
                          seed: int = 0) -> dict:
    """Verify the band/dependency pattern of adapted bracket powers.

    For random x, the p-th power of ad(x) in adapted coordinates must have
    block (i, j) equal to zero whenever i < p + j, and the surviving blocks
    may only depend on the adapted components x^1 ... x^{i-j-p+1}.  Returns
    the worst residual of each kind.
    """
    rng = np.random.default_rng(seed)
    k = tf.class_k
    n = tf.system.dim
    pattern = 0.0
    dependency = 0.0
    for _ in range(n_samples):
        x = rng.normal(0.0, 1.0, n)
        B = tf.ad_adapted(x)
        Bp = B.copy()
        for p in range(1, k):
            for i in range(1, k + 1):
                for j in range(1, k + 1):
                    blk = tf.block(Bp, i, j)
                    if blk.size == 0:
                        continue
                    if i < p + j:
                        pattern = max(pattern, float(np.max(np.abs(blk))))
                    else:
                        # Perturb adapted components above i-j-p+1; the block
                        # must not move.
                        top = i - j - p + 1
                        xa = tf.gradation.to_adapted(x)
                        xa2 = xa.copy()
                        hi = tf.offsets[top]
                        xa2[hi:] += rng.normal(0.0, 1.0, n - hi)
                        x2 = tf.gradation.from_adapted(xa2)
                        B2 = tf.ad_adapted(x2)
                        B2p = np.linalg.matrix_power(B2, p)
                        dependency = max(dependency, float(
                            np.max(np.abs(tf.block(B2p, i, j) - blk))))
            Bp = Bp @ B
    return {"pattern_residual": pattern, "dependency_residual": dependency}
