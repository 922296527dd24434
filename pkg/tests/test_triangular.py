"""Adapted coordinates, block dependency patterns, and the cascade solver."""

import numpy as np
import pytest
from scipy.linalg import expm

from nilctrl import (
    ControlLaw,
    LinearSystem,
    NilGroup,
    block_structure_check,
    law_generator_path,
    triangular_form,
    triangular_solve,
)

from helpers import (
    filiform3,
    filiform4,
    heisenberg_full_system,
    heisenberg_quotient_system,
    r2_system,
)


def _filiform3_system(**kwargs) -> LinearSystem:
    # Diagonal weights must be additive along the chain brackets.
    return LinearSystem(NilGroup(filiform3()), np.diag([1.0, -1.0, 0.0, 1.0]),
                        [[1.0, 1.0, 0.0, 0.0]], [[-1.0, 1.0]], **kwargs)


def _filiform4_system(**kwargs) -> LinearSystem:
    return LinearSystem(NilGroup(filiform4()),
                        np.diag([1.0, -1.0, 0.0, 1.0, 2.0]),
                        [[1.0, 1.0, 0.0, 0.0, 0.0]], [[-1.0, 1.0]], **kwargs)


def _heisenberg_closed_form(t):
    return np.array([np.exp(t) - 1.0, 1.0 - np.exp(-t), t - np.sinh(t)])


# ---------------------------------------------------------------------------
# Adapted form structure
# ---------------------------------------------------------------------------

class TestAdaptedForm:
    def test_drift_blocks_read_off(self):
        tf = triangular_form(heisenberg_full_system())
        assert tf.class_k == 2
        assert tf.dims == (2, 1)
        D11 = tf.block(tf.drift_adapted, 1, 1)
        assert sorted(np.linalg.eigvals(D11).real) == pytest.approx([-1.0, 1.0])
        assert tf.block(tf.drift_adapted, 2, 2) == pytest.approx(0.0)
        assert tf.upper_residual < 1e-12

    def test_ad_adapted_matches_hand_matrix(self, rng):
        tf = triangular_form(heisenberg_full_system())
        x = rng.normal(size=3)
        ad = np.zeros((3, 3))
        ad[2, 0] = -x[1]
        ad[2, 1] = x[0]
        P = tf.adapted
        assert np.allclose(tf.ad_adapted(x), P.T @ ad @ P, atol=1e-12)

    def test_component_rhs_reads_only_lower_blocks(self, rng):
        tf = triangular_form(_filiform4_system())
        W = rng.normal(size=5)
        for i in range(2, tf.class_k + 1):
            pre = tf.offsets[i - 1]
            x_low = rng.normal(size=pre)
            g1 = tf.component_rhs(i, x_low, W)
            g2 = tf.component_rhs(i, x_low, W)
            assert np.array_equal(g1, g2)
            assert g1.shape == (tf.dims[i - 1],)

    @pytest.mark.parametrize("make", [
        heisenberg_full_system, _filiform3_system, _filiform4_system])
    def test_block_power_patterns(self, make):
        res = block_structure_check(triangular_form(make()), n_samples=50)
        assert res["pattern_residual"] < 1e-9
        assert res["dependency_residual"] < 1e-9


# ---------------------------------------------------------------------------
# Cascade solver against closed forms and the stepper
# ---------------------------------------------------------------------------

class TestSolve:
    def test_step2_closed_form(self):
        tf = triangular_form(heisenberg_full_system())
        traj = triangular_solve(tf, np.zeros(3), ControlLaw.constant(1.0, 2.0),
                                2.0)
        for t, s in zip(traj.times[::25], traj.states[::25]):
            assert np.max(np.abs(s - _heisenberg_closed_form(t))) < 1e-6

    def test_single_block_class1(self):
        tf = triangular_form(r2_system())
        traj = triangular_solve(tf, np.zeros(2), ControlLaw.constant(1.0, 2.0),
                                2.0)
        assert np.max(np.abs(traj.endpoint
                             - [np.e ** 2 - 1, 1 - np.e ** -2])) < 1e-7

    def test_zero_source_is_drift_flow(self, rng):
        system = _filiform4_system()
        tf = triangular_form(system)
        x0 = rng.normal(size=5) * 0.5
        traj = triangular_solve(tf, x0, ControlLaw.zero(1, 1.0), 1.0)
        for t, s in zip(traj.times[::10], traj.states[::10]):
            assert np.max(np.abs(s - expm(t * system.drift) @ x0)) < 1e-9

    def test_matches_fine_stepper_on_chain(self, rng):
        system = _filiform4_system()
        tf = triangular_form(system)
        x0 = rng.normal(size=5) * 0.3
        law = ControlLaw(((1.0, [0.8]), (1.0, [-0.6]), (1.0, [0.3])))
        ref = system.simulate(x0, law, 3.0, keep=20)
        sol = triangular_solve(tf, x0, law, 3.0)
        assert np.allclose(sol.times, ref.times)
        assert np.max(np.abs(sol.states - ref.states)) < 1e-6

    def test_fourth_order_in_quad_step(self):
        tf = triangular_form(heisenberg_full_system())
        law = ControlLaw.constant(1.0, 2.0)
        errs = []
        for q in (4e-2, 2e-2, 1e-2):
            traj = triangular_solve(tf, np.zeros(3), law, 2.0, quad_step=q)
            errs.append(np.max(np.abs(traj.endpoint
                                      - _heisenberg_closed_form(2.0))))
        assert errs[0] / errs[1] > 8.0
        assert errs[1] / errs[2] > 8.0

    def test_aligned_switches_keep_accuracy(self):
        system = heisenberg_full_system()
        tf = triangular_form(system)
        aligned = ControlLaw(((0.5, [1.0]), (0.5, [-1.0])))
        skewed = ControlLaw(((0.505, [1.0]), (0.495, [-1.0])))
        out = {}
        for tag, law in (("aligned", aligned), ("skewed", skewed)):
            ref = system.simulate(np.zeros(3), law, 1.0).endpoint
            sol = triangular_solve(tf, np.zeros(3), law, 1.0).endpoint
            out[tag] = np.max(np.abs(sol - ref))
        assert out["aligned"] < 1e-8
        assert out["skewed"] > 10 * out["aligned"]

    def test_callable_source_closed_form(self):
        # Plane saddle driven by W(t) = (cos t, cos t): variation of
        # constants gives (sin t - cos t + e^t)/2 and
        # (sin t + cos t - e^-t)/2.
        tf = triangular_form(r2_system())
        traj = triangular_solve(tf, np.zeros(2),
                                lambda t: np.array([np.cos(t), np.cos(t)]),
                                2.0)
        t = traj.times
        expect = np.column_stack([
            (np.sin(t) - np.cos(t) + np.exp(t)) / 2,
            (np.sin(t) + np.cos(t) - np.exp(-t)) / 2])
        assert np.max(np.abs(traj.states - expect)) < 1e-7

    def test_law_generator_path_equivalent_for_smooth_law(self):
        system = heisenberg_full_system()
        tf = triangular_form(system)
        law = ControlLaw.constant(0.7, 1.5)
        a = triangular_solve(tf, np.zeros(3), law, 1.5)
        b = triangular_solve(tf, np.zeros(3),
                             law_generator_path(system, law), 1.5)
        assert np.max(np.abs(a.states - b.states)) < 1e-13

    def test_horizon_must_align_with_quad_step(self):
        tf = triangular_form(r2_system())
        with pytest.raises(ValueError, match="multiple"):
            triangular_solve(tf, np.zeros(2), ControlLaw.constant(1.0, 2.0),
                             1.234567)

    def test_quotient_covering_coordinates(self):
        # The cascade returns covering-space coordinates; reducing them must
        # reproduce the wrapped stepper trajectory.
        system = heisenberg_quotient_system()
        tf = triangular_form(system)
        law = ControlLaw.constant(1.0, 2.0)
        sol = triangular_solve(tf, np.zeros(3), law, 2.0)
        ref = system.simulate(np.zeros(3), law, 2.0, keep=20)
        red = np.apply_along_axis(system.group.reduce, 1, sol.states)
        assert np.max(system.group.distance(red, ref.states)) < 1e-6
        assert abs(sol.states[-1, 2] - (2.0 - np.sinh(2.0))) < 1e-6
