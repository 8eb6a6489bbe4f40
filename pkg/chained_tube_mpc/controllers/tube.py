# chained-tube-mpc - distributed tube model predictive control
# Copyright (C) 2023  OpenWeather
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""Inner decentralized and outer distributed tube MPC problems."""

import logging

from typing import Optional

import numpy as np

from numpy import ndarray

from chained_tube_mpc.controllers.condensing import CondensedProblem, Prediction
from chained_tube_mpc.controllers.trajectory import DisturbancePreview, NominalTrajectory, evaluate_cost
from chained_tube_mpc.enums import Variant
from chained_tube_mpc.errors import (
    CandidateRejected,
    InfeasibleError,
    NumericalFailureError,
    SizeMismatch,
    UnboundedError,
    ValidationError,
)
from chained_tube_mpc.geometry import HPolytope
from chained_tube_mpc.model import SubsystemModel
from chained_tube_mpc.numkernel import solve_lp
from chained_tube_mpc.synthesis import SubsystemDesign, TubeDesign


logger = logging.getLogger(__name__)

AUDIT_TOL = 1e-8


def _local_state(x_i: ndarray, n: int) -> ndarray:
    x_i = np.asarray(x_i, dtype=float).reshape(-1)
    if x_i.size != n:
        raise SizeMismatch(f"Local state has size {x_i.size}, expected {n}")
    return x_i


def _check_horizon(N: int) -> None:
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ValidationError(f"Horizon must be a positive integer, got {N!r}")


def inner_initial_set(d: SubsystemDesign, variant: Variant) -> HPolytope:
    """Set the initial inner error ``x - x_hat`` is confined to.

    :param d: subsystem design
    :param variant: ``S + H`` for nested, ``Z`` for original
    """
    if variant is Variant.original:
        return d.Z
    return d.S_plus_H


def _max_violation(P: HPolytope, points: ndarray) -> float:
    P = P.canonicalize()
    points = np.atleast_2d(points)
    if not points.size:
        return 0.0
    return float(np.max(points @ P.A.T - P.b, initial=0.0))


def inner_violation(
    x_i: ndarray, traj: NominalTrajectory, model: SubsystemModel, d: SubsystemDesign, initial: HPolytope
) -> float:
    """Largest violation of the inner problem constraints by a trajectory.

    :param x_i: measured local state
    :param traj: inner nominal trajectory
    :param model: subsystem model
    :param d: subsystem design
    :param initial: initial error set
    """
    return max(
        traj.dynamics_error(model.A, model.B),
        _max_violation(initial, x_i - traj.initial_state),
        _max_violation(d.X_hat, traj.states[:-1]),
        _max_violation(d.U_hat, traj.inputs),
        _max_violation(d.XF_hat, traj.terminal_state),
    )


def outer_violation(
    x_i: ndarray,
    traj: NominalTrajectory,
    own_ref: NominalTrajectory,
    preview: DisturbancePreview,
    model: SubsystemModel,
    d: SubsystemDesign,
) -> float:
    """Largest violation of the outer problem constraints, the BRF constraint included.

    :param x_i: measured local state
    :param traj: outer nominal trajectory
    :param own_ref: inner reference of the same time step
    :param preview: known coupling sequence
    :param model: subsystem model
    :param d: subsystem design
    """
    d_seq = preview.d_seq if preview.horizon else None
    return max(
        traj.dynamics_error(model.A, model.B, d_seq),
        _max_violation(d.S, x_i - traj.initial_state),
        _max_violation(d.X_hathat, traj.states[:-1]),
        _max_violation(d.U_hathat, traj.inputs),
        _max_violation(d.XF_hathat, traj.terminal_state),
        _max_violation(d.H, traj.states[1:] - own_ref.states[1:]),
    )


def solve_inner(
    i: int, x_i: ndarray, design: TubeDesign, N: int, stamp: int = 0, variant: Optional[Variant] = None
) -> NominalTrajectory:
    """Optimal inner nominal trajectory for the measured local state.

    Minimizes the quadratic cost over ``x_hat_t`` and the input sequence
    subject to the undisturbed local dynamics, the inner tightened sets, the
    initial tube constraint and the inner terminal set.

    :param i: subsystem index
    :param x_i: measured local state
    :param design: validated tube design
    :param N: horizon
    :param stamp: current time step
    :param variant: initial constraint override, defaults to the design variant
    """
    _check_horizon(N)
    model, d = design.system[i], design[i]
    x_i = _local_state(x_i, model.n)
    initial = inner_initial_set(d, variant or design.variant)

    problem = CondensedProblem(Prediction(model.A, model.B, N), d.Q, d.R, d.P)
    problem.initial_error_in(x_i, initial)
    for k in range(N):
        problem.state_in(k, d.X_hat)
        problem.input_in(k, d.U_hat)
    problem.state_in(N, d.XF_hat)
    states, inputs, cost, _ = problem.solve()

    traj = NominalTrajectory(states, inputs, i, stamp, cost)
    violation = inner_violation(x_i, traj, model, d, initial)
    if violation > AUDIT_TOL:
        raise NumericalFailureError(f"Inner solution of subsystem {i + 1} violates its constraints by {violation:.3e}")
    return traj


def split_initial_error(x_i: ndarray, x_hat0: ndarray, d: SubsystemDesign) -> Optional[ndarray]:
    """Find ``h`` in H with ``x_i - x_hat0 - h`` in S, None if there is none.

    :param x_i: measured local state
    :param x_hat0: inner nominal initial state
    :param d: subsystem design
    """
    S, H = d.S.canonicalize(), d.H.canonicalize()
    n = S.dim
    z = x_i - x_hat0
    # variables (s, h) with s + h = z
    A = np.block([[S.A, np.zeros((S.n_rows, n))], [np.zeros((H.n_rows, n)), H.A]])
    b = np.concatenate([S.b, H.b])
    try:
        solution = solve_lp(np.zeros(2 * n), A, b, np.hstack([np.eye(n), np.eye(n)]), z)
    except (InfeasibleError, UnboundedError, NumericalFailureError):
        return None
    return solution.x[n:]


def outer_candidate(
    i: int, x_i: ndarray, own_ref: NominalTrajectory, preview: DisturbancePreview, design: TubeDesign
) -> Optional[NominalTrajectory]:
    """The feasible outer solution built from the inner reference.

    ``x_hathat_t = x_hat_t + h`` with the error split into S and H, then
    ``u_hathat_k = u_hat_k + K_hat (x_hathat_k - x_hat_k)`` rolled out
    through the outer dynamics. None if the error cannot be split.

    :param i: subsystem index
    :param x_i: measured local state
    :param own_ref: inner reference of this time step
    :param preview: known coupling sequence
    :param design: tube design
    """
    model, d = design.system[i], design[i]
    x_i = _local_state(x_i, model.n)
    h = split_initial_error(x_i, own_ref.initial_state, d)
    if h is None:
        return None
    N = own_ref.horizon
    states = np.zeros((N + 1, model.n))
    inputs = np.zeros((N, model.m))
    states[0] = own_ref.initial_state + h
    for k in range(N):
        inputs[k] = own_ref.inputs[k] + d.K_hat @ (states[k] - own_ref.states[k])
        states[k + 1] = model.A @ states[k] + model.B @ inputs[k]
        if preview.horizon:
            states[k + 1] += preview.d_seq[k]
    return NominalTrajectory(states, inputs, i, own_ref.stamp, evaluate_cost(states, inputs, d.Q, d.R, d.P))


def solve_outer(
    i: int,
    x_i: ndarray,
    own_ref: NominalTrajectory,
    preview: DisturbancePreview,
    design: TubeDesign,
    N: int,
    candidate: Optional[NominalTrajectory] = None,
) -> NominalTrajectory:
    """Optimal outer nominal trajectory, kept within H of the inner reference.

    The outer dynamics carry the known coupling preview. If the QP reports
    infeasibility while the constructed candidate satisfies every
    constraint, :class:`CandidateRejected` is raised instead.

    :param i: subsystem index
    :param x_i: measured local state
    :param own_ref: inner reference of this time step
    :param preview: known coupling sequence of this time step
    :param design: validated tube design
    :param N: horizon
    :param candidate: precomputed candidate, built here if None
    """
    _check_horizon(N)
    model, d = design.system[i], design[i]
    x_i = _local_state(x_i, model.n)
    if own_ref.horizon != N or (preview.horizon and preview.horizon != N):
        raise SizeMismatch(f"Reference horizon {own_ref.horizon} and preview horizon {preview.horizon} must be {N}")
    d_seq = preview.d_seq if preview.horizon else None

    problem = CondensedProblem(Prediction(model.A, model.B, N, d_seq), d.Q, d.R, d.P)
    problem.initial_error_in(x_i, d.S)
    for k in range(N):
        problem.state_in(k, d.X_hathat)
        problem.input_in(k, d.U_hathat)
    for k in range(1, N + 1):
        problem.state_in(k, d.H, offset=own_ref.states[k])
    problem.state_in(N, d.XF_hathat)
    try:
        states, inputs, cost, _ = problem.solve()
    except InfeasibleError:
        logger.debug(f"outer QP of subsystem {i + 1} infeasible at t={own_ref.stamp}, checking the candidate")
        if candidate is None:
            candidate = outer_candidate(i, x_i, own_ref, preview, design)
        if candidate is not None and outer_violation(x_i, candidate, own_ref, preview, model, d) <= AUDIT_TOL:
            raise CandidateRejected(
                f"Outer QP of subsystem {i + 1} at t={own_ref.stamp} reported infeasibility "
                "although the candidate solution is feasible"
            )
        raise

    traj = NominalTrajectory(states, inputs, i, own_ref.stamp, cost)
    violation = outer_violation(x_i, traj, own_ref, preview, model, d)
    if violation > AUDIT_TOL:
        raise NumericalFailureError(f"Outer solution of subsystem {i + 1} violates its constraints by {violation:.3e}")
    return traj


def control_action(x_i: ndarray, outer: NominalTrajectory, design: TubeDesign) -> ndarray:
    """Tube policy ``u = u_hathat_t + K_hat (x - x_hathat_t)``.

    :param x_i: measured local state
    :param outer: outer trajectory of this time step
    :param design: tube design
    """
    d = design[outer.owner]
    x_i = _local_state(x_i, outer.n)
    return outer.first_input + d.K_hat @ (x_i - outer.initial_state)
