"""Control systems whose drift flow is a one-parameter automorphism group.

A system couples a nilpotent group (see :mod:`nilctrl.group`) with a drift
matrix D that is a derivation of the algebra, plus invariant control fields
generated by algebra elements Z_j with values constrained to a box Omega:

    xdot = D x + sum_j u_j(t) Z_j(x),      u(t) in Omega (piecewise constant)

Integration is fixed-step classical Runge-Kutta, with steps aligned to the
control switching times (a step never straddles a discontinuity).  The drift
flow e^{tD} is a group automorphism for every t, which yields the exact
translation identity

    phi(t, x0 * g, u) = phi(t, x0, u) * e^{tD} g

checked by :func:`check_flow_property`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .algebra import Derivation
from .group import NilGroup


@dataclass(frozen=True, eq=False)
class ControlLaw:
    """Piecewise-constant control signal: a tuple of (duration, value) pieces."""

    pieces: tuple

    def __post_init__(self):
        norm = []
        for dur, val in self.pieces:
            dur = float(dur)
            val = np.atleast_1d(np.asarray(val, float))
            if dur <= 0.0:
                raise ValueError(f"piece duration must be positive, got {dur}")
            if not np.all(np.isfinite(val)):
                raise ValueError("control values must be finite")
            val.setflags(write=False)
            norm.append((dur, val))
        if not norm:
            raise ValueError("a control law needs at least one piece")
        m = norm[0][1].size
        if any(v.size != m for _, v in norm):
            raise ValueError("all pieces must share the control dimension")
        object.__setattr__(self, 'pieces', tuple(norm))

    @classmethod
    def constant(cls, value, duration: float) -> "ControlLaw":
        return cls(((duration, np.atleast_1d(np.asarray(value, float))),))

    @classmethod
    def zero(cls, m: int, duration: float) -> "ControlLaw":
        return cls.constant(np.zeros(m), duration)

    @property
    def control_dim(self) -> int:
        return self.pieces[0][1].size

    @property
    def total_duration(self) -> float:
        return float(sum(d for d, _ in self.pieces))

    def value_at(self, t: float, side: str = "right") -> np.ndarray:
        """Piece value at time t; ``side`` picks which limit wins at a switch.

        The default is right-continuous (a switch time belongs to the piece
        it starts); ``side="left"`` returns the value of the piece that ends
        there instead.  The final value extends to t == T either way.
        """
        if side not in ("right", "left"):
            raise ValueError(f"side must be 'right' or 'left', got {side!r}")
        acc = 0.0
        for dur, val in self.pieces:
            acc += dur
            if t < acc - 1e-9 or (side == "left" and t <= acc + 1e-9):
                return val
        if t <= acc + 1e-9:
            return self.pieces[-1][1]
        raise ValueError(f"time {t} beyond law duration {acc}")

    def truncate(self, tau: float) -> "ControlLaw":
        """Initial segment of duration tau (splits a piece if needed)."""
        if tau <= 0 or tau > self.total_duration + 1e-12:
            raise ValueError(
                f"truncation time {tau} outside (0, {self.total_duration}]")
        out, acc = [], 0.0
        for dur, val in self.pieces:
            if acc + dur >= tau - 1e-15:
                out.append((tau - acc, val))
                break
            out.append((dur, val))
            acc += dur
        return ControlLaw(tuple(out))

    def reversed(self, negate: bool = False) -> "ControlLaw":
        """Pieces in reverse order, optionally with negated values."""
        sign = -1.0 if negate else 1.0
        return ControlLaw(tuple((d, sign * v) for d, v in reversed(self.pieces)))


def concatenate_laws(first: ControlLaw, tau: float, second: ControlLaw) -> ControlLaw:
    """Follow ``first`` until ``tau``, then ``second`` from its start."""
    head = first.truncate(tau)
    return ControlLaw(head.pieces + second.pieces)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution: times (T,), states (T, n), and the law that drove it."""

    times: np.ndarray
    states: np.ndarray
    law: ControlLaw

    def __post_init__(self):
        for arr in (self.times, self.states):
            arr.setflags(write=False)

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, t: float) -> np.ndarray:
        """State at a sampled time (nearest grid point within 1e-9)."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9:
            raise ValueError(f"time {t} is not on the sample grid")
        return self.states[idx]


def rk4_step(f, x: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step; ``x`` may carry batch axes."""
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def piece_schedule(law: ControlLaw, horizon: float, step: float,
                   check_value=None):
    """Per-piece (duration, value, n_steps), clipped to the horizon.

    Every piece is integrated with a uniform sub-step <= ``step`` chosen so
    that steps never straddle a switching time.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if law.total_duration < horizon - 1e-9:
        raise ValueError(
            f"law duration {law.total_duration} shorter than horizon {horizon}")
    sched, acc = [], 0.0
    for dur, val in law.pieces:
        if check_value is not None:
            check_value(val)
        d = min(dur, horizon - acc)
        if d <= 1e-15:
            break
        n_steps = max(1, int(np.ceil(d / step - 1e-12)))
        sched.append((d, val, n_steps))
        acc += d
        if acc >= horizon - 1e-12:
            break
    return sched


def integrate_law(field_for, x0: np.ndarray, law: ControlLaw, horizon: float,
                  step: float, reduce=None, check_value=None, keep: int = 1):
    """Fixed-step RK4 over a piecewise-constant law, switch-aligned.

    ``field_for(value)`` must return the autonomous right-hand side active
    while the control holds that value.  Returns (times, states) sampled at
    every ``keep``-th step plus all piece boundaries.
    """
    x = np.asarray(x0, float)
    if reduce is not None:
        x = reduce(x)
    times, states = [0.0], [x]
    t0, count = 0.0, 0
    for d, val, n_steps in piece_schedule(law, horizon, step, check_value):
        h = d / n_steps
        f = field_for(val)
        for i in range(n_steps):
            x = rk4_step(f, x, h)
            if reduce is not None:
                x = reduce(x)
            count += 1
            if count % keep == 0 or i == n_steps - 1:
                times.append(t0 + (i + 1) * h)
                states.append(x)
        t0 += d
    return np.array(times), np.array(states)


class LinearSystem:
    """Drift derivation plus invariant control fields on a nilpotent group."""

    def __init__(self, group: NilGroup, drift: np.ndarray, controls,
                 omega, step: float = 1e-3, name: str = ""):
        self.group = group
        n = group.dim
        drift = np.asarray(drift, float)
        Derivation(group.algebra, drift)  # validates the Leibniz rule
        controls = np.atleast_2d(np.asarray(controls, float))
        if controls.shape[1] != n:
            raise ValueError(
                f"control vectors must have dimension {n}, got {controls.shape}")
        omega = np.asarray(omega, float).reshape(-1, 2)
        if omega.shape[0] != controls.shape[0]:
            raise ValueError("omega needs one [lo, hi] pair per control")
        if np.any(omega[:, 0] > 0) or np.any(omega[:, 1] < 0):
            raise ValueError("omega must contain u = 0 in every coordinate")
        if group.lattice:
            cols = drift[:, [j - 1 for j in group.lattice]]
            if np.max(np.abs(cols)) > 1e-12:
                raise ValueError(
                    "drift must vanish on lattice directions for the quotient "
                    f"flow to be well defined (max entry {np.max(np.abs(cols)):.3e})")
        for arr in (drift, controls, omega):
            arr.setflags(write=False)
        self.drift = drift
        self.controls = controls
        self.omega = omega
        self.step = float(step)
        self.name = name
        self._flow_cache: dict[float, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.group.dim

    @property
    def control_dim(self) -> int:
        return self.controls.shape[0]

    def check_control_value(self, u: np.ndarray) -> None:
        u = np.atleast_1d(np.asarray(u, float))
        if u.size != self.control_dim:
            raise ValueError(
                f"control dimension {u.size} != expected {self.control_dim}")
        if np.any(u < self.omega[:, 0] - 1e-12) or np.any(u > self.omega[:, 1] + 1e-12):
            raise ValueError(f"control value {u} outside omega box {self.omega}")

    def vector_field(self, x: np.ndarray, u) -> np.ndarray:
        """Right-hand side D x + (sum_j u_j Z_j)(x); batched in x (and u)."""
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        W = u @ self.controls  # (..., n) generator scaled by the control value
        return x @ self.drift.T + self.group.invariant_field(W, x)

    # -- drift flow --------------------------------------------------------

    def drift_matrix(self, t: float) -> np.ndarray:
        M = self._flow_cache.get(t)
        if M is None:
            M = expm(t * self.drift)
            self._flow_cache[t] = M
        return M

    def drift_flow(self, t: float, x: np.ndarray) -> np.ndarray:
        """Automorphism flow e^{tD} applied to coordinates, reduced."""
        return self.group.reduce(np.asarray(x, float) @ self.drift_matrix(t).T)

    # -- integration -------------------------------------------------------

    def simulate(self, x0: np.ndarray, law: ControlLaw,
                 horizon: float = None, keep: int = 1) -> Trajectory:
        """Integrate from x0; samples every ``keep``-th step plus the endpoint."""
        if horizon is None:
            horizon = law.total_duration
        times, states = integrate_law(
            lambda val: (lambda s: self.vector_field(s, val)),
            x0, law, horizon, self.step, reduce=self.group.reduce,
            check_value=self.check_control_value, keep=keep)
        return Trajectory(times=times, states=states, law=law)

    def reversed_system(self) -> "LinearSystem":
        """Time-reversed dynamics: negated drift, mirrored control box.

        A trajectory of the reversed system driven by w(s) retraces, in
        forward time, the original system driven by u(r) = -w(T - r).
        """
        return LinearSystem(self.group, -self.drift, self.controls,
                            self.omega[:, ::-1] * -1.0, step=self.step,
                            name=self.name + "-reversed" if self.name else "")


def check_flow_property(system: LinearSystem, g: np.ndarray, x0: np.ndarray,
                        law: ControlLaw, horizon: float) -> float:
    """Residual of the translation identity of the controlled flow.

    Compares the trajectory started at x0 * g with the pointwise product
    phi(t, x0, u) * e^{tD} g over the whole sample grid and returns the
    worst group distance.  Exactly zero when g is the identity.
    """
    grp = system.group
    base = system.simulate(x0, law, horizon)
    shifted = system.simulate(grp.product(x0, g), law, horizon)
    # e^{tD} g along the sampled grid, advanced incrementally per step.
    flows = np.empty_like(base.states)
    g = np.asarray(g, float)
    prev_t, cur = 0.0, g.copy()
    for i, t in enumerate(base.times):
        if t > prev_t:
            cur = cur @ system.drift_matrix(t - prev_t).T
            prev_t = t
        flows[i] = cur
    ref = grp.product(base.states, flows)
    return float(np.max(grp.distance(shifted.states, ref)))
