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

"""Closed-loop simulation of the chain of tubes and of the baselines.

Every step of :class:`ClosedLoop` runs two phases separated by the broadcast
barrier. Inside a phase the agents only read their own state and memory, so
they may run in any order or on an executor; results are gathered by index.
"""

from concurrent.futures import Executor
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from numpy import ndarray

from chained_tube_mpc.controllers import (
    BaselineStep,
    NominalTrajectory,
    baseline_cmpc,
    baseline_dempc,
    baseline_tmpc,
    control_action,
    outer_candidate,
    outer_violation,
    preview_disturbance,
    shift_inner,
    solve_inner,
    solve_outer,
)
from chained_tube_mpc.enums import ControllerType, SolveStatus
from chained_tube_mpc.errors import (
    CandidateRejected,
    FatalInfeasible,
    InfeasibleError,
    InvariantViolation,
    MissingBroadcast,
    NumericalFailureError,
    ValidationError,
)
from chained_tube_mpc.log import SelfLoggerMixin
from chained_tube_mpc.model import CoupledSystem, step_true_plant
from chained_tube_mpc.runtime.agent import AgentState
from chained_tube_mpc.runtime.bus import Broadcast, BroadcastBus
from chained_tube_mpc.runtime.simlog import SimLog, StepRecord
from chained_tube_mpc.synthesis import TubeDesign


INNER_ERRORS = (InfeasibleError, NumericalFailureError)
OUTER_ERRORS = (InfeasibleError, NumericalFailureError, CandidateRejected, MissingBroadcast)

BASELINES: Dict[ControllerType, Callable[..., BaselineStep]] = {
    ControllerType.cmpc: baseline_cmpc,
    ControllerType.tmpc: baseline_tmpc,
    ControllerType.dempc: baseline_dempc,
}


class _InnerResult(NamedTuple):
    reference: NominalTrajectory
    status: SolveStatus


class _OuterResult(NamedTuple):
    outer: NominalTrajectory
    u: ndarray
    candidate_cost: float
    candidate_violation: float


class _Failure(NamedTuple):
    stage: str
    error: Exception


def _check_run_args(sys: CoupledSystem, design: TubeDesign, steps: int, N: int) -> None:
    if len(design) != len(sys):
        raise ValidationError("Design does not belong to the simulated system")
    if not isinstance(steps, (int, np.integer)) or steps < 0:
        raise ValidationError(f"Step count must be a non-negative integer, got {steps!r}")
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ValidationError(f"Horizon must be a positive integer, got {N!r}")


def _stage_costs(sys: CoupledSystem, design: TubeDesign, x: ndarray, u: ndarray) -> Tuple[float, ...]:
    """True stage costs ``x_i' Q_i x_i + u_i' R_i u_i`` per agent."""
    costs = []
    for s in sys:
        x_i, u_i = x[sys.state_slice(s.index)], u[sys.input_slice(s.index)]
        d = design[s.index]
        costs.append(float(x_i @ d.Q @ x_i + u_i @ d.R @ u_i))
    return tuple(costs)


class ClosedLoop(SelfLoggerMixin):
    """Chain-of-tubes controller running against the true plant.

    :param sys: coupled system
    :param design: validated tube design
    :param N: horizon
    :param period: inner update period T
    :param order: agent visiting order, defaults to increasing index
    :param executor: runs the agents of a phase concurrently if given
    """

    def __init__(
        self,
        sys: CoupledSystem,
        design: TubeDesign,
        N: int,
        period: int = 1,
        order: Optional[Sequence[int]] = None,
        executor: Optional[Executor] = None,
    ) -> None:
        if not isinstance(period, (int, np.integer)) or period < 1:
            raise ValidationError(f"Inner period must be a positive integer, got {period!r}")
        order = tuple(range(len(sys))) if order is None else tuple(int(i) for i in order)
        if sorted(order) != list(range(len(sys))):
            raise ValidationError(f"Agent order {order} is not a permutation of 0..{len(sys) - 1}")
        self.sys = sys
        self.design = design
        self.N = N
        self.period = period
        self.order = order
        self.executor = executor
        self.bus = BroadcastBus(sys)
        self.agents = [AgentState(i) for i in range(len(sys))]

    def _map(self, fn: Callable[[int], Any]) -> Dict[int, Any]:
        """Apply ``fn`` to every agent in the configured order, keyed by index."""
        if self.executor is None:
            return {i: fn(i) for i in self.order}
        return dict(zip(self.order, self.executor.map(fn, self.order)))

    def _inner(self, i: int, x_i: ndarray, t: int) -> Union[_InnerResult, _Failure]:
        agent = self.agents[i]
        if agent.solves_at(t, self.period) or agent.reference is None:
            try:
                return _InnerResult(solve_inner(i, x_i, self.design, self.N, stamp=t), SolveStatus.optimal)
            except INNER_ERRORS as e:
                return _Failure("inner", e)
        try:
            d = self.design[i]
            return _InnerResult(shift_inner(agent.reference, self.sys[i], d.K_T, d.XF_hat), SolveStatus.shifted)
        except InvariantViolation as e:
            return _Failure("shift", e)

    def _outer(self, i: int, x_i: ndarray, t: int, inbox: Dict[int, NominalTrajectory]) -> Union[_OuterResult, _Failure]:
        reference = self.agents[i].reference
        try:
            preview = preview_disturbance(i, self.sys[i], inbox, stamp=t)
            candidate = outer_candidate(i, x_i, reference, preview, self.design)
            if candidate is None:
                candidate_cost, candidate_violation = float("nan"), float("inf")
            else:
                candidate_cost = float(candidate.cost)
                candidate_violation = outer_violation(x_i, candidate, reference, preview, self.sys[i], self.design[i])
            outer = solve_outer(i, x_i, reference, preview, self.design, self.N, candidate=candidate)
        except OUTER_ERRORS as e:
            return _Failure("outer", e)
        return _OuterResult(outer, control_action(x_i, outer, self.design), candidate_cost, candidate_violation)

    @staticmethod
    def _first_failure(results: Dict[int, Any]) -> Optional[Tuple[int, _Failure]]:
        for i in sorted(results):
            if isinstance(results[i], _Failure):
                return i, results[i]
        return None

    def step(self, t: int, x: ndarray) -> StepRecord:
        """Run one time step from the measured global state.

        Raises :class:`FatalInfeasible` without a log; :meth:`simulate` attaches it.

        :param t: time step
        :param x: measured global state
        """
        parts = self.sys.split_state(x)

        inner = self._map(lambda i: self._inner(i, parts[i], t))
        failure = self._first_failure(inner)
        if failure is not None:
            i, f = failure
            raise FatalInfeasible(t, i, f.stage) from f.error
        for i in range(len(self.sys)):
            self.agents[i].accept_reference(inner[i].reference, inner[i].status is SolveStatus.optimal)
            self.bus.publish(Broadcast(i, t, inner[i].reference))
        inboxes = self.bus.deliver(t)

        outer = self._map(lambda i: self._outer(i, parts[i], t, inboxes[i]))
        failure = self._first_failure(outer)
        if failure is not None:
            i, f = failure
            raise FatalInfeasible(t, i, f.stage) from f.error
        for i in range(len(self.sys)):
            self.agents[i].accept_outer(outer[i].outer)

        u = np.concatenate([outer[i].u for i in range(len(self.sys))])
        M = len(self.sys)
        return StepRecord(
            t=t,
            x=np.array(x, dtype=float),
            u=u,
            inner=tuple(inner[i].reference for i in range(M)),
            outer=tuple(outer[i].outer for i in range(M)),
            inner_status=tuple(inner[i].status for i in range(M)),
            outer_status=(SolveStatus.optimal,) * M,
            stage_costs=_stage_costs(self.sys, self.design, np.asarray(x, dtype=float), u),
            candidate_costs=tuple(outer[i].candidate_cost for i in range(M)),
            candidate_violations=tuple(outer[i].candidate_violation for i in range(M)),
        )

    def simulate(self, x0: ndarray, steps: int, design_hash: str = "") -> SimLog:
        """Run ``steps`` closed-loop steps from ``x0``.

        :param x0: global initial state
        :param steps: number of steps
        :param design_hash: content hash recorded in the log
        """
        _check_run_args(self.sys, self.design, steps, self.N)
        x = CoupledSystem._check_vector(x0, self.sys.n, "initial state")
        log = SimLog(
            ControllerType.chain,
            tuple(s.n for s in self.sys),
            tuple(s.m for s in self.sys),
            self.N,
            self.period,
            steps,
            design_hash,
        )
        log.final_state = x.copy()
        self.logger.info(f"running chain of tubes for {steps} steps, N={self.N}, T={self.period}")
        for t in range(steps):
            try:
                record = self.step(t, x)
            except FatalInfeasible as e:
                self.logger.error(f"{e}, log truncated after {len(log)} steps")
                log.truncate(e.t, e.i, e.stage)
                e.log = log
                raise e
            x = step_true_plant(self.sys, x, record.u)
            log.append(record, x)
            self.logger.debug(f"t={t} |x|_inf={np.max(np.abs(x), initial=0.0):.3e}")
        self.logger.info(f"chain of tubes finished, total cost {log.total_cost:.6g}")
        return log


class BaselineLoop(SelfLoggerMixin):
    """One of the comparison controllers running against the true plant.

    :param sys: coupled system
    :param design: tube design providing weights and sets
    :param N: horizon
    :param which: baseline controller
    """

    def __init__(self, sys: CoupledSystem, design: TubeDesign, N: int, which: ControllerType) -> None:
        which = ControllerType(which)
        if which not in BASELINES:
            raise ValidationError(f"{which.value} is not a baseline controller")
        self.sys = sys
        self.design = design
        self.N = N
        self.which = which
        self._law = BASELINES[which]

    def simulate(self, x0: ndarray, steps: int, design_hash: str = "") -> SimLog:
        """Run ``steps`` closed-loop steps from ``x0``.

        :param x0: global initial state
        :param steps: number of steps
        :param design_hash: content hash recorded in the log
        """
        _check_run_args(self.sys, self.design, steps, self.N)
        x = CoupledSystem._check_vector(x0, self.sys.n, "initial state")
        M = len(self.sys)
        log = SimLog(
            self.which, tuple(s.n for s in self.sys), tuple(s.m for s in self.sys), self.N, 1, steps, design_hash
        )
        log.final_state = x.copy()
        self.logger.info(f"running {self.which.value} for {steps} steps, N={self.N}")
        for t in range(steps):
            try:
                outcome = self._law(x, self.design, self.N, stamp=t)
            except FatalInfeasible as e:
                self.logger.error(f"{e}, log truncated after {len(log)} steps")
                log.truncate(e.t, e.i, e.stage)
                e.log = log
                raise e
            u = np.concatenate(outcome.inputs)
            record = StepRecord(
                t=t,
                x=x.copy(),
                u=u,
                inner=tuple(outcome.trajectories),
                outer=(None,) * M,
                inner_status=tuple(outcome.statuses),
                outer_status=(SolveStatus.skipped,) * M,
                stage_costs=_stage_costs(self.sys, self.design, x, u),
            )
            x = step_true_plant(self.sys, x, u)
            log.append(record, x)
        if log.saturations:
            self.logger.warning(f"{self.which.value} saturated {log.saturations} agent steps")
        self.logger.info(f"{self.which.value} finished, total cost {log.total_cost:.6g}")
        return log


def run(
    sys: CoupledSystem,
    design: TubeDesign,
    x0: ndarray,
    steps: int,
    N: int,
    T: int = 1,
    order: Optional[Sequence[int]] = None,
    executor: Optional[Executor] = None,
    design_hash: str = "",
) -> SimLog:
    """Simulate the chain-of-tubes controller.

    :param sys: coupled system
    :param design: validated tube design
    :param x0: global initial state
    :param steps: number of steps
    :param N: horizon
    :param T: inner update period
    :param order: agent visiting order inside a phase
    :param executor: concurrent agent execution
    :param design_hash: content hash recorded in the log
    """
    return ClosedLoop(sys, design, N, T, order, executor).simulate(x0, steps, design_hash)


def run_baseline(
    sys: CoupledSystem,
    design: TubeDesign,
    x0: ndarray,
    steps: int,
    N: int,
    which: Union[ControllerType, str],
    design_hash: str = "",
) -> SimLog:
    """Simulate one of the comparison controllers.

    :param sys: coupled system
    :param design: tube design
    :param x0: global initial state
    :param steps: number of steps
    :param N: horizon
    :param which: cmpc, tmpc or dempc
    :param design_hash: content hash recorded in the log
    """
    return BaselineLoop(sys, design, N, ControllerType(which)).simulate(x0, steps, design_hash)


def replay_inputs(sys: CoupledSystem, x0: ndarray, inputs: ndarray) -> ndarray:
    """States of the true plant under a recorded input sequence.

    :param sys: coupled system
    :param x0: global initial state
    :param inputs: K x m inputs
    """
    states: List[ndarray] = [CoupledSystem._check_vector(x0, sys.n, "initial state")]
    for u in np.asarray(inputs, dtype=float).reshape(-1, sys.m):
        states.append(step_true_plant(sys, states[-1], u))
    return np.vstack(states)
