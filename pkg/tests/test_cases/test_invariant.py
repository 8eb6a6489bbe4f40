import time

import numpy as np
import pytest

from chained_tube_mpc.errors import IterationLimitError, NotSchurError, ValidationError
from chained_tube_mpc.geometry import (
    box,
    box_bounds,
    from_points,
    hausdorff_gap,
    is_subset,
    linear_map,
    max_admissible_invariant,
    max_robust_invariant,
    minkowski_sum,
    origin,
    rpi_outer_approx,
)


ROTATION = 0.7 * np.array([[np.cos(0.5), -np.sin(0.5)], [np.sin(0.5), np.cos(0.5)]])


class TestRPIOuterApproximation:
    """Tests for the epsilon outer approximation of the minimal RPI set."""

    def test_scalar_geometric_series(self):
        """Test ``x+ = x / 2 + w`` with ``|w| <= 1`` gives ``[-2, 2]``."""
        Z = rpi_outer_approx(np.array([[0.5]]), box(np.zeros(1), 1.0), eps=1e-6)
        assert Z.support([1.0]) == pytest.approx(2.0, abs=1e-5)
        assert Z.support([-1.0]) == pytest.approx(2.0, abs=1e-5)

    @pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
    def test_planar_set_is_invariant_and_tight(self, eps):
        """Test invariance and closeness to the partial sums."""
        W = box(np.zeros(2), 0.1)
        Z = rpi_outer_approx(ROTATION, W, eps)
        assert is_subset(minkowski_sum(linear_map(ROTATION, Z), W), Z, margin=-1e-8)
        partial = W
        power = np.eye(2)
        for _ in range(60):
            power = ROTATION @ power
            partial = minkowski_sum(partial, linear_map(power, W))
        assert is_subset(partial, Z, margin=-1e-8)
        assert hausdorff_gap(partial, Z) <= 2 * eps

    def test_slow_closed_loop_with_rich_disturbance(self):
        """Test a lightly damped loop and an 18-gon disturbance, which need well over a hundred terms."""
        A_cl = 0.94 * np.array([[np.cos(0.3), -np.sin(0.3)], [np.sin(0.3), np.cos(0.3)]])
        angles = 2 * np.pi * np.arange(18) / 18
        W = from_points(0.05 * np.column_stack([np.cos(angles), 0.5 * np.sin(angles)]))
        started = time.perf_counter()
        Z = rpi_outer_approx(A_cl, W, eps=1e-4)
        assert time.perf_counter() - started < 60.0
        assert is_subset(minkowski_sum(linear_map(A_cl, Z), W), Z, margin=-1e-8)
        bound = 0.05 / (1 - 0.94)
        assert 0.05 <= Z.support([1.0, 0.0]) <= bound + 1e-4

    def test_many_vertices_are_decimated(self):
        """Test a round disturbance yields a few hundred vertices instead of thousands, still invariant and tight."""
        A_cl = 0.5 * np.array([[np.cos(1.0), -np.sin(1.0)], [np.sin(1.0), np.cos(1.0)]])
        angles = 2 * np.pi * np.arange(200) / 200
        W = from_points(0.1 * np.column_stack([np.cos(angles), np.sin(angles)]))
        Z = rpi_outer_approx(A_cl, W, eps=1e-4)
        assert Z.vertices.shape[0] < 1000
        assert is_subset(minkowski_sum(linear_map(A_cl, Z), W), Z, margin=-1e-8)
        partial = W
        power = np.eye(2)
        for _ in range(40):
            power = A_cl @ power
            partial = minkowski_sum(partial, linear_map(power, W))
        assert is_subset(partial, Z, margin=-1e-8)
        assert hausdorff_gap(partial, Z) <= 2e-4

    def test_zero_disturbance_gives_origin(self):
        """Test ``W = {0}`` is its own invariant set."""
        Z = rpi_outer_approx(ROTATION, origin(2), eps=1e-4)
        assert hausdorff_gap(Z, origin(2)) == 0.0

    def test_lower_dimensional_disturbance(self):
        """Test a segment disturbance is inflated and stays robustly invariant."""
        A_cl = 0.5 * np.eye(2)
        W = box_bounds([-1.0, 0.0], [1.0, 0.0])
        Z = rpi_outer_approx(A_cl, W, eps=1e-3)
        assert is_subset(minkowski_sum(linear_map(A_cl, Z), W), Z, margin=-1e-8)
        assert 2.0 <= Z.support([1.0, 0.0]) <= 2.05
        assert 0.0 < Z.support([0.0, 1.0]) <= 0.05

    def test_not_schur_raises(self):
        """Test unstable closed loops are rejected."""
        with pytest.raises(NotSchurError):
            rpi_outer_approx(np.array([[1.5]]), box(np.zeros(1), 1.0), eps=1e-4)

    def test_iteration_cap(self):
        """Test a slow closed loop hits a tight cap."""
        with pytest.raises(IterationLimitError):
            rpi_outer_approx(np.array([[0.99]]), box(np.zeros(1), 1.0), eps=1e-6, max_iter=3)

    def test_invalid_eps(self):
        """Test eps must be positive."""
        with pytest.raises(ValidationError):
            rpi_outer_approx(np.array([[0.5]]), box(np.zeros(1), 1.0), eps=0.0)


class TestInvariantSets:
    """Tests for maximal (robust) positively invariant sets."""

    def test_contractive_scalar_keeps_constraints(self):
        """Test ``x+ = x / 2`` leaves ``[-1, 1]`` invariant as is."""
        X = box(np.zeros(1), 1.0)
        assert hausdorff_gap(max_admissible_invariant(np.array([[0.5]]), X), X) <= 1e-12

    def test_planar_maximal_invariant(self):
        """Test the result is invariant and inside the constraints."""
        A_cl = np.array([[0.9, 0.5], [-0.2, 0.6]])
        X = box(np.zeros(2), 1.0)
        O = max_admissible_invariant(A_cl, X)
        assert is_subset(O, X, margin=-1e-9)
        assert is_subset(linear_map(A_cl, O), O, margin=-1e-8)
        assert O.origin_margin() > 0

    def test_robust_invariant_with_small_disturbance(self):
        """Test a small disturbance keeps the whole interval."""
        X = box(np.zeros(1), 1.0)
        O = max_robust_invariant(np.array([[0.5]]), X, box(np.zeros(1), 0.2))
        assert hausdorff_gap(O, X) <= 1e-12

    def test_robust_invariant_empties_under_large_disturbance(self):
        """Test ``r -> 2 r - 1.2`` drives the interval to nothing."""
        O = max_robust_invariant(np.array([[0.5]]), box(np.zeros(1), 1.0), box(np.zeros(1), 0.6))
        assert O.is_empty

    def test_iteration_cap_carries_partial(self):
        """Test the last iterate is attached to the error."""
        A_cl = np.array([[0.0, 1.0], [-0.98, 0.0]])
        with pytest.raises(IterationLimitError) as e:
            max_admissible_invariant(A_cl, box_bounds([-1.0, -0.1], [1.0, 0.1]), iter_cap=1)
        assert e.value.partial is not None


if __name__ == "__main__":
    pytest.main()
