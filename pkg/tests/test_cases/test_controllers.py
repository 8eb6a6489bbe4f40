import numpy as np
import pytest

from chained_tube_mpc.controllers import (
    CondensedProblem,
    NominalTrajectory,
    Prediction,
    baseline_cmpc,
    baseline_dempc,
    baseline_tmpc,
    control_action,
    evaluate_cost,
    inner_violation,
    outer_candidate,
    outer_violation,
    preview_disturbance,
    project,
    rollout,
    shift_inner,
    solve_inner,
    solve_outer,
    split_initial_error,
)
from chained_tube_mpc.controllers.tube import inner_initial_set
from chained_tube_mpc.enums import SolveStatus, Variant
from chained_tube_mpc.errors import (
    CandidateRejected,
    FatalInfeasible,
    InfeasibleError,
    InvariantViolation,
    MissingBroadcast,
    SizeMismatch,
    ValidationError,
)
from chained_tube_mpc.geometry import box, box_bounds

from tests.parameters.common import SEEDS, WEAK_CHAIN_COUPLING, WEAK_CHAIN_X0
from tests.plugins.runtime import HORIZON


def _inner_references(design, x0, stamp=0):
    parts = design.system.split_state(np.asarray(x0, dtype=float))
    return {i: solve_inner(i, parts[i], design, HORIZON, stamp) for i in range(len(design))}


class TestNominalTrajectory:
    """Tests for the trajectory value object and its helpers."""

    def test_zeros(self):
        """Test the equilibrium trajectory."""
        traj = NominalTrajectory.zeros(owner=2, stamp=4, n=2, m=1, N=3)
        assert traj.states.shape == (4, 2)
        assert traj.inputs.shape == (3, 1)
        assert (traj.horizon, traj.n, traj.m, traj.owner, traj.stamp) == (3, 2, 1, 2, 4)
        assert traj.cost == 0.0

    def test_arrays_are_frozen(self):
        """Test published trajectories cannot be changed in place."""
        traj = NominalTrajectory.zeros(0, 0, 1, 1, 2)
        with pytest.raises(ValueError):
            traj.states[0, 0] = 1.0

    def test_length_mismatch(self):
        """Test N + 1 states are required for N inputs."""
        with pytest.raises(SizeMismatch):
            NominalTrajectory(np.zeros((3, 1)), np.zeros((3, 1)), 0, 0)

    def test_rollout_with_disturbance(self):
        """Test the known disturbance enters every step."""
        states = rollout(np.array([[0.5]]), np.array([[1.0]]), [1.0], [[0.0], [1.0]], np.array([[0.25], [0.0]]))
        assert np.allclose(states[:, 0], [1.0, 0.75, 1.375])

    def test_evaluate_cost(self):
        """Test the stage sum with and without a terminal weight."""
        states = [[1.0], [2.0], [3.0]]
        inputs = [[1.0], [1.0]]
        assert evaluate_cost(states, inputs, [[1.0]], [[2.0]]) == pytest.approx(9.0)
        assert evaluate_cost(states, inputs, [[1.0]], [[2.0]], P=[[3.0]]) == pytest.approx(36.0)
        with pytest.raises(SizeMismatch):
            evaluate_cost(states[:2], inputs, [[1.0]], [[2.0]], P=[[3.0]])


class TestShiftAndPreview:
    """Tests for the shifted reference and the coupling preview."""

    def test_shift_appends_terminal_feedback(self, weak_chain, weak_design):
        """Test the shifted trajectory keeps the dynamics and adds K_T x_N."""
        d = weak_design[0]
        prev = solve_inner(0, [WEAK_CHAIN_X0[0]], weak_design, HORIZON, stamp=3)
        shifted = shift_inner(prev, weak_chain[0], d.K_T, d.XF_hat)
        assert shifted.stamp == 4
        assert shifted.horizon == HORIZON
        assert np.array_equal(shifted.states[:-1], prev.states[1:])
        assert np.allclose(shifted.inputs[-1], d.K_T @ prev.terminal_state)
        assert shifted.dynamics_error(weak_chain[0].A, weak_chain[0].B) <= 1e-12

    def test_shift_outside_terminal_set(self, weak_chain, weak_design):
        """Test a terminal state outside XF_hat cannot be shifted."""
        d = weak_design[0]
        states = np.full((HORIZON + 1, 1), 5.0)
        prev = NominalTrajectory(states, np.zeros((HORIZON, 1)), 0, 0)
        with pytest.raises(InvariantViolation):
            shift_inner(prev, weak_chain[0], d.K_T, d.XF_hat)

    def test_preview_sums_neighbours(self, weak_chain):
        """Test the middle subsystem sees both neighbours."""
        left = NominalTrajectory(np.ones((HORIZON + 1, 1)), np.ones((HORIZON, 1)), 0, 2)
        right = NominalTrajectory(2 * np.ones((HORIZON + 1, 1)), np.zeros((HORIZON, 1)), 2, 2)
        preview = preview_disturbance(1, weak_chain[1], {2: right, 0: left})
        assert preview.horizon == HORIZON
        assert preview.stamp == 2
        assert np.allclose(preview.d_seq, 3 * WEAK_CHAIN_COUPLING)

    def test_preview_missing_neighbour(self, weak_chain):
        """Test an absent broadcast names the neighbour."""
        left = NominalTrajectory.zeros(0, 0, 1, 1, HORIZON)
        with pytest.raises(MissingBroadcast) as e:
            preview_disturbance(1, weak_chain[1], {0: left})
        assert e.value.neighbour == 2

    def test_preview_stale_stamp(self, weak_chain):
        """Test a broadcast of another time step is rejected."""
        left = NominalTrajectory.zeros(0, 0, 1, 1, HORIZON)
        right = NominalTrajectory.zeros(2, 1, 1, 1, HORIZON)
        with pytest.raises(MissingBroadcast):
            preview_disturbance(1, weak_chain[1], {0: left, 2: right})

    def test_preview_without_neighbours(self, one_truck):
        """Test an isolated subsystem gets an empty preview."""
        preview = preview_disturbance(0, one_truck[0], {}, stamp=7)
        assert preview.horizon == 0
        assert preview.stamp == 7


class TestCondensing:
    """Tests for the condensed prediction and cost."""

    @pytest.mark.parametrize("seed", SEEDS[:4])
    def test_prediction_matches_rollout(self, seed):
        """Test the affine prediction against explicit simulation."""
        rng = np.random.default_rng(seed)
        A, B = rng.normal(size=(2, 2)) * 0.5, rng.normal(size=(2, 1))
        d_seq = rng.normal(size=(4, 2))
        prediction = Prediction(A, B, 4, d_seq)
        x0, inputs = rng.normal(size=2), rng.normal(size=(4, 1))
        states, split_inputs = prediction.split(prediction.pack(x0, inputs))
        assert np.allclose(states, rollout(A, B, x0, inputs, d_seq))
        assert np.allclose(split_inputs, inputs)

    @pytest.mark.parametrize("seed", SEEDS[:4])
    def test_condensed_cost(self, seed):
        """Test the quadratic form equals the stage and terminal costs."""
        rng = np.random.default_rng(seed)
        A, B = rng.normal(size=(2, 2)) * 0.5, rng.normal(size=(2, 1))
        d_seq = rng.normal(size=(3, 2))
        Q, R, P = np.diag([1.0, 2.0]), np.array([[0.5]]), np.diag([3.0, 1.0])
        prediction = Prediction(A, B, 3, d_seq)
        problem = CondensedProblem(prediction, Q, R, P)
        z = rng.normal(size=prediction.size)
        states, inputs = prediction.split(z)
        assert problem.value(z) == pytest.approx(evaluate_cost(states, inputs, Q, R, P), rel=1e-10)

    def test_opposite_rows_become_equalities(self):
        """Test a zero-width set yields equality constraints."""
        prediction = Prediction(np.array([[0.5]]), np.array([[1.0]]), 2)
        problem = CondensedProblem(prediction, np.eye(1), np.eye(1), np.eye(1))
        problem.state_in(2, box_bounds([0.0], [0.0]))
        qp = problem.qp()
        assert qp.A_eq.shape[0] == 1
        assert qp.A_in.shape[0] == 0


class TestInnerProblem:
    """Tests for the decentralized inner problem."""

    @pytest.mark.parametrize("i", [0, 1, 2])
    def test_solution_respects_constraints(self, weak_chain, weak_design, i):
        """Test the inner trajectory stays in the tightened sets."""
        x_i = np.array([WEAK_CHAIN_X0[i]])
        traj = solve_inner(i, x_i, weak_design, HORIZON, stamp=2)
        assert traj.owner == i
        assert traj.stamp == 2
        initial = inner_initial_set(weak_design[i], weak_design.variant)
        assert inner_violation(x_i, traj, weak_chain[i], weak_design[i], initial) <= 1e-8
        d = weak_design[i]
        assert traj.cost == pytest.approx(evaluate_cost(traj.states, traj.inputs, d.Q, d.R, d.P), rel=1e-9)

    def test_original_variant_uses_inner_tube(self, weak_design):
        """Test the larger initial set gives a cost no higher than the default."""
        x_i = np.array([WEAK_CHAIN_X0[0]])
        default = solve_inner(0, x_i, weak_design, HORIZON)
        relaxed = solve_inner(0, x_i, weak_design, HORIZON, variant=Variant.original)
        assert relaxed.cost <= default.cost + 1e-9
        assert weak_design[0].Z.contains(x_i - relaxed.initial_state)

    def test_equilibrium(self, weak_design):
        """Test the origin gives the zero trajectory."""
        traj = solve_inner(1, [0.0], weak_design, HORIZON)
        assert np.allclose(traj.states, 0.0, atol=1e-9)
        assert traj.cost == pytest.approx(0.0, abs=1e-12)

    def test_infeasible(self, weak_design):
        """Test a state far outside the tightened sets."""
        with pytest.raises(InfeasibleError):
            solve_inner(0, [20.0], weak_design, HORIZON)

    @pytest.mark.parametrize("N", [0, -1, 2.5])
    def test_invalid_horizon(self, weak_design, N):
        """Test the horizon must be a positive integer."""
        with pytest.raises(ValidationError):
            solve_inner(0, [0.0], weak_design, N)


class TestOuterProblem:
    """Tests for the distributed outer problem and its candidate."""

    def test_split_initial_error(self, weak_design):
        """Test the error splits into S and H or not at all."""
        d = weak_design[1]
        for z in (0.0, 0.1, -0.25):
            h = split_initial_error(np.array([z]), np.zeros(1), d)
            assert h is not None
            assert d.H.contains(h, tol=1e-7)
            assert d.S.contains(np.array([z]) - h, tol=1e-7)
        assert split_initial_error(np.array([2.0]), np.zeros(1), d) is None

    def test_candidate_is_feasible(self, weak_chain, weak_design):
        """Test the constructed candidate satisfies the outer constraints."""
        refs = _inner_references(weak_design, WEAK_CHAIN_X0)
        x_i = np.array([WEAK_CHAIN_X0[1]])
        preview = preview_disturbance(1, weak_chain[1], {0: refs[0], 2: refs[2]})
        candidate = outer_candidate(1, x_i, refs[1], preview, weak_design)
        assert candidate is not None
        assert outer_violation(x_i, candidate, refs[1], preview, weak_chain[1], weak_design[1]) <= 1e-7

    @pytest.mark.parametrize("i", [0, 1, 2])
    def test_optimum_improves_on_candidate(self, weak_chain, weak_design, i):
        """Test the outer optimum is feasible and no worse than the candidate."""
        refs = _inner_references(weak_design, WEAK_CHAIN_X0)
        x_i = np.array([WEAK_CHAIN_X0[i]])
        preview = preview_disturbance(i, weak_chain[i], {j: refs[j] for j in weak_chain.neighbours(i)})
        candidate = outer_candidate(i, x_i, refs[i], preview, weak_design)
        outer = solve_outer(i, x_i, refs[i], preview, weak_design, HORIZON, candidate)
        assert outer_violation(x_i, outer, refs[i], preview, weak_chain[i], weak_design[i]) <= 1e-8
        assert outer.cost <= candidate.cost + 1e-9
        assert outer.stamp == refs[i].stamp

    def test_rejected_candidate(self, weak_chain, weak_design, mocker):
        """Test a solver reporting infeasibility despite a feasible candidate."""
        refs = _inner_references(weak_design, WEAK_CHAIN_X0)
        x_i = np.array([WEAK_CHAIN_X0[1]])
        preview = preview_disturbance(1, weak_chain[1], {0: refs[0], 2: refs[2]})
        mocker.patch.object(CondensedProblem, "solve", side_effect=InfeasibleError("forced"))
        with pytest.raises(CandidateRejected):
            solve_outer(1, x_i, refs[1], preview, weak_design, HORIZON)

    def test_horizon_mismatch(self, weak_chain, weak_design):
        """Test the reference must cover the horizon."""
        refs = _inner_references(weak_design, WEAK_CHAIN_X0)
        preview = preview_disturbance(0, weak_chain[0], {1: refs[1]})
        with pytest.raises(SizeMismatch):
            solve_outer(0, [WEAK_CHAIN_X0[0]], refs[0], preview, weak_design, HORIZON + 1)

    def test_control_action(self, weak_chain, weak_design):
        """Test the tube policy around the outer trajectory."""
        refs = _inner_references(weak_design, WEAK_CHAIN_X0)
        x_i = np.array([WEAK_CHAIN_X0[0]])
        preview = preview_disturbance(0, weak_chain[0], {1: refs[1]})
        outer = solve_outer(0, x_i, refs[0], preview, weak_design, HORIZON)
        u = control_action(x_i, outer, weak_design)
        expected = outer.first_input + weak_design[0].K_hat @ (x_i - outer.initial_state)
        assert np.allclose(u, expected)
        assert weak_chain[0].U.contains(u)


class TestBaselines:
    """Tests for the comparison controllers."""

    def test_cmpc(self, weak_chain, weak_design):
        """Test the centralized step returns admissible inputs for every agent."""
        step = baseline_cmpc(np.array(WEAK_CHAIN_X0), weak_design, HORIZON, stamp=1)
        assert step.statuses == [SolveStatus.optimal] * 3
        for i, (u, traj) in enumerate(zip(step.inputs, step.trajectories)):
            assert weak_chain[i].U.contains(u)
            assert traj.owner == i
            assert np.allclose(traj.initial_state, [WEAK_CHAIN_X0[i]])

    def test_cmpc_infeasible(self, weak_design):
        """Test an inadmissible state is fatal for the first subsystem."""
        with pytest.raises(FatalInfeasible) as e:
            baseline_cmpc(np.array([20.0, 0.0, 0.0]), weak_design, HORIZON, stamp=3)
        assert (e.value.t, e.value.i, e.value.stage) == (3, 0, "cmpc")

    def test_tmpc_uses_inner_feedback(self, weak_design):
        """Test the decentralized tube policy."""
        x = np.array(WEAK_CHAIN_X0)
        step = baseline_tmpc(x, weak_design, HORIZON)
        for i, (u, traj) in enumerate(zip(step.inputs, step.trajectories)):
            d = weak_design[i]
            assert np.allclose(u, traj.first_input + d.K_T @ (x[i : i + 1] - traj.initial_state))
            assert d.Z.contains(x[i : i + 1] - traj.initial_state)

    def test_tmpc_infeasible(self, weak_design):
        """Test the tube baseline reports the failing subsystem."""
        with pytest.raises(FatalInfeasible) as e:
            baseline_tmpc(np.array([0.0, 20.0, 0.0]), weak_design, HORIZON)
        assert (e.value.i, e.value.stage) == (1, "tmpc")

    def test_dempc_saturates(self, weak_design):
        """Test an infeasible local problem applies the projected outer gain."""
        step = baseline_dempc(np.array([9.0, 0.5, 0.0]), weak_design, 1)
        assert step.statuses == [SolveStatus.saturated, SolveStatus.optimal, SolveStatus.optimal]
        assert step.trajectories[0] is None
        assert np.allclose(step.inputs[0], [-1.0])

    def test_project(self):
        """Test the projection onto a box."""
        B = box(np.zeros(2), 1.0)
        assert np.array_equal(project([0.5, -0.5], B), [0.5, -0.5])
        assert np.allclose(project([3.0, 0.2], B), [1.0, 0.2])
        assert np.allclose(project([-2.0, -2.0], B), [-1.0, -1.0])


if __name__ == "__main__":
    pytest.main()
