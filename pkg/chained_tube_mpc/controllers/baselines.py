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

"""Comparison controllers sharing the tube design parameters.

* CMPC: one nominal MPC on the global plant.
* TMPC: the decentralized inner tube MPC alone.
* DeMPC: per-subsystem nominal MPC that ignores the coupling.
"""

import logging

from typing import List, NamedTuple, Optional

import numpy as np

from numpy import ndarray
from scipy.linalg import block_diag

from chained_tube_mpc.controllers.condensing import CondensedProblem, Prediction
from chained_tube_mpc.controllers.trajectory import NominalTrajectory
from chained_tube_mpc.controllers.tube import solve_inner
from chained_tube_mpc.enums import SolveStatus, Variant
from chained_tube_mpc.errors import FatalInfeasible, InfeasibleError, NumericalFailureError, SizeMismatch
from chained_tube_mpc.geometry import HPolytope, cartesian_product
from chained_tube_mpc.numkernel import QpProblem, solve_qp
from chained_tube_mpc.synthesis import TubeDesign


logger = logging.getLogger(__name__)


class BaselineStep(NamedTuple):
    """Per-agent outcome of one baseline control step."""

    inputs: List[ndarray]
    statuses: List[SolveStatus]
    trajectories: List[Optional[NominalTrajectory]]


def _global_state(x: ndarray, n: int) -> ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != n:
        raise SizeMismatch(f"Global state has size {x.size}, expected {n}")
    return x


def baseline_cmpc(x: ndarray, design: TubeDesign, N: int, stamp: int = 0) -> BaselineStep:
    """Centralized nominal MPC; the first optimal input is applied directly.

    Constraints are the products of the local sets, the terminal set the
    product of the outer terminal sets and the terminal cost block-diagonal.

    :param x: global state
    :param design: tube design
    :param N: horizon
    :param stamp: current time step
    """
    sys = design.system
    x = _global_state(x, sys.n)
    Q = block_diag(*[d.Q for d in design])
    R = block_diag(*[d.R for d in design])
    P = block_diag(*[d.P for d in design])
    terminal = cartesian_product(*[d.XF_hathat for d in design])

    problem = CondensedProblem(Prediction(sys.A, sys.B, N), Q, R, P)
    problem.fix_initial(x)
    for k in range(N):
        problem.state_in(k, sys.X)
        problem.input_in(k, sys.U)
    problem.state_in(N, terminal)
    try:
        states, inputs, cost, _ = problem.solve()
    except (InfeasibleError, NumericalFailureError) as e:
        # one global problem, reported against the first subsystem
        raise FatalInfeasible(stamp, 0, "cmpc") from e

    trajectories: List[Optional[NominalTrajectory]] = []
    applied = []
    for s in sys:
        rows, cols = sys.state_slice(s.index), sys.input_slice(s.index)
        trajectories.append(NominalTrajectory(states[:, rows], inputs[:, cols], s.index, stamp, cost))
        applied.append(inputs[0, cols].copy())
    return BaselineStep(applied, [SolveStatus.optimal] * len(sys), trajectories)


def baseline_tmpc(x: ndarray, design: TubeDesign, N: int, stamp: int = 0) -> BaselineStep:
    """Decentralized tube MPC with ``u = u_hat + K_T (x - x_hat)``.

    The inner problem is re-solved every step with the inner tube Z as
    initial error set.

    :param x: global state
    :param design: tube design
    :param N: horizon
    :param stamp: current time step
    """
    sys = design.system
    x_parts = sys.split_state(_global_state(x, sys.n))
    inputs, trajectories = [], []
    for s in sys:
        d = design[s.index]
        try:
            traj = solve_inner(s.index, x_parts[s.index], design, N, stamp, variant=Variant.original)
        except (InfeasibleError, NumericalFailureError) as e:
            raise FatalInfeasible(stamp, s.index, "tmpc") from e
        inputs.append(traj.first_input + d.K_T @ (x_parts[s.index] - traj.initial_state))
        trajectories.append(traj)
    return BaselineStep(inputs, [SolveStatus.optimal] * len(sys), trajectories)


def project(point: ndarray, P: HPolytope) -> ndarray:
    """Euclidean projection onto a polytope.

    :param point: point to project
    :param P: non-empty polytope
    """
    point = np.asarray(point, dtype=float).reshape(-1)
    if P.contains(point, tol=0.0):
        return point
    n = point.size
    P = P.canonicalize()
    solution = solve_qp(QpProblem(2 * np.eye(n), -2 * point, P.A, P.b))
    return solution.x


def baseline_dempc(x: ndarray, design: TubeDesign, N: int, stamp: int = 0) -> BaselineStep:
    """Decentralized nominal MPC on the untightened local sets, coupling ignored.

    An infeasible local problem is not fatal: the outer gain input
    ``K_hat x_i`` projected onto ``U_i`` is applied and the step is
    flagged as saturated.

    :param x: global state
    :param design: tube design
    :param N: horizon
    :param stamp: current time step
    """
    sys = design.system
    x_parts = sys.split_state(_global_state(x, sys.n))
    inputs: List[ndarray] = []
    statuses: List[SolveStatus] = []
    trajectories: List[Optional[NominalTrajectory]] = []
    for s in sys:
        d = design[s.index]
        x_i = x_parts[s.index]
        problem = CondensedProblem(Prediction(s.A, s.B, N), d.Q, d.R, d.P)
        problem.fix_initial(x_i)
        for k in range(N):
            problem.state_in(k, s.X)
            problem.input_in(k, s.U)
        problem.state_in(N, d.XF_hathat)
        try:
            states, traj_inputs, cost, _ = problem.solve()
        except InfeasibleError:
            logger.warning(f"DeMPC problem of subsystem {s.index + 1} infeasible at t={stamp}, saturating")
            inputs.append(project(d.K_hat @ x_i, s.U))
            statuses.append(SolveStatus.saturated)
            trajectories.append(None)
            continue
        inputs.append(traj_inputs[0].copy())
        statuses.append(SolveStatus.optimal)
        trajectories.append(NominalTrajectory(states, traj_inputs, s.index, stamp, cost))
    return BaselineStep(inputs, statuses, trajectories)
