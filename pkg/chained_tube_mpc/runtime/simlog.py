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

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from numpy import ndarray

from chained_tube_mpc.controllers import NominalTrajectory
from chained_tube_mpc.enums import ControllerType, SolveStatus


@dataclass(frozen=True, eq=False)
class StepRecord(object):
    """Everything that happened at one time step.

    For baselines ``inner`` holds the controller's nominal trajectory and
    ``outer`` is empty.
    """

    t: int
    x: ndarray
    u: ndarray
    inner: Tuple[Optional[NominalTrajectory], ...]
    outer: Tuple[Optional[NominalTrajectory], ...]
    inner_status: Tuple[SolveStatus, ...]
    outer_status: Tuple[SolveStatus, ...]
    stage_costs: Tuple[float, ...]
    candidate_costs: Tuple[float, ...] = ()
    candidate_violations: Tuple[float, ...] = ()


@dataclass(eq=False)
class SimLog(object):
    """Closed-loop history of one run.

    :param controller: controller that produced the run
    :param state_sizes: local state dimensions
    :param input_sizes: local input dimensions
    :param horizon: prediction horizon N
    :param period: inner re-solve period T
    :param steps: requested number of steps
    :param design_hash: content hash of the design inputs
    """

    controller: ControllerType
    state_sizes: Tuple[int, ...]
    input_sizes: Tuple[int, ...]
    horizon: int
    period: int
    steps: int
    design_hash: str = ""
    records: List[StepRecord] = field(default_factory=list)
    final_state: Optional[ndarray] = None
    truncated: bool = False
    fatal: Optional[dict] = None

    def append(self, record: StepRecord, x_next: ndarray) -> None:
        """Add a completed step and the state it led to.

        :param record: step record
        :param x_next: global state at ``t + 1``
        """
        self.records.append(record)
        self.final_state = np.array(x_next, dtype=float)

    def truncate(self, t: int, i: int, stage: str) -> None:
        """Mark the log as cut short by a fatal infeasibility.

        :param t: time step
        :param i: subsystem index
        :param stage: failing stage
        """
        self.truncated = True
        self.fatal = {"t": t, "i": i, "stage": stage}

    def __len__(self) -> int:
        return len(self.records)

    @property
    def agents(self) -> int:
        """Number of subsystems."""
        return len(self.state_sizes)

    def _offsets(self, sizes: Sequence[int]) -> ndarray:
        return np.concatenate([[0], np.cumsum(sizes)]).astype(int)

    def state_slice(self, i: int) -> slice:
        """Slice of subsystem ``i`` in the global state.

        :param i: subsystem index
        """
        offsets = self._offsets(self.state_sizes)
        return slice(int(offsets[i]), int(offsets[i + 1]))

    def input_slice(self, i: int) -> slice:
        """Slice of subsystem ``i`` in the global input.

        :param i: subsystem index
        """
        offsets = self._offsets(self.input_sizes)
        return slice(int(offsets[i]), int(offsets[i + 1]))

    @property
    def states(self) -> ndarray:
        """True states ``x_0..x_K``, (K + 1) x n; only ``x_0`` if nothing was applied."""
        rows = [r.x for r in self.records]
        if self.final_state is not None:
            rows.append(self.final_state)
        if not rows:
            return np.zeros((0, sum(self.state_sizes)))
        return np.vstack(rows)

    @property
    def inputs(self) -> ndarray:
        """Applied inputs, K x m."""
        if not self.records:
            return np.zeros((0, sum(self.input_sizes)))
        return np.vstack([r.u for r in self.records])

    @property
    def statuses(self) -> ndarray:
        """Per-agent status codes of the first stage, K x M."""
        return np.array([[int(s) for s in r.inner_status] for r in self.records], dtype=int).reshape(-1, self.agents)

    @property
    def outer_statuses(self) -> ndarray:
        """Per-agent outer status codes, K x M."""
        return np.array([[int(s) for s in r.outer_status] for r in self.records], dtype=int).reshape(-1, self.agents)

    @property
    def stage_costs(self) -> ndarray:
        """Per-agent true stage costs, K x M."""
        return np.array([r.stage_costs for r in self.records], dtype=float).reshape(-1, self.agents)

    @property
    def total_cost(self) -> float:
        """Sum of the true stage costs over steps and agents, no terminal term."""
        return float(np.sum(self.stage_costs))

    def agent_cost(self, i: int) -> float:
        """Sum of the true stage costs of one agent.

        :param i: subsystem index
        """
        return float(np.sum(self.stage_costs[:, i]))

    @property
    def final_norm(self) -> float:
        """``|x_K|_inf`` of the last state."""
        states = self.states
        if not states.size:
            return float("nan")
        return float(np.max(np.abs(states[-1])))

    @property
    def saturations(self) -> int:
        """Number of saturated agent steps."""
        return int(np.sum(self.statuses == int(SolveStatus.saturated)))

    @property
    def completed(self) -> bool:
        """Whether all requested steps ran."""
        return not self.truncated and len(self.records) == self.steps

    def _trajectory_array(self, i: int, which: str, attr: str) -> ndarray:
        size = self.state_sizes[i] if attr == "states" else self.input_sizes[i]
        length = self.horizon + 1 if attr == "states" else self.horizon
        out = np.full((len(self.records), length, size), np.nan)
        for k, r in enumerate(self.records):
            trajectories = getattr(r, which)
            if i < len(trajectories) and trajectories[i] is not None:
                out[k] = getattr(trajectories[i], attr)
        return out

    def inner_states(self, i: int) -> ndarray:
        """Inner nominal state trajectories of agent ``i``, K x (N + 1) x n_i; NaN where absent.

        :param i: subsystem index
        """
        return self._trajectory_array(i, "inner", "states")

    def inner_inputs(self, i: int) -> ndarray:
        """Inner nominal input trajectories of agent ``i``, K x N x m_i.

        :param i: subsystem index
        """
        return self._trajectory_array(i, "inner", "inputs")

    def outer_states(self, i: int) -> ndarray:
        """Outer nominal state trajectories of agent ``i``, K x (N + 1) x n_i.

        :param i: subsystem index
        """
        return self._trajectory_array(i, "outer", "states")

    def outer_inputs(self, i: int) -> ndarray:
        """Outer nominal input trajectories of agent ``i``, K x N x m_i.

        :param i: subsystem index
        """
        return self._trajectory_array(i, "outer", "inputs")

    def tube_errors(self, i: int) -> Tuple[ndarray, ndarray, ndarray]:
        """Return ``(z, s, e)`` of agent ``i`` per step, each K x n_i.

        ``z = x - x_hat``, ``s = x - x_hathat`` and ``e = x_hathat - x_hat``
        at the first step of each trajectory; NaN where a trajectory is absent.

        :param i: subsystem index
        """
        x = self.states[: len(self.records), self.state_slice(i)]
        x_hat = self.inner_states(i)[:, 0, :] if self.records else np.zeros((0, self.state_sizes[i]))
        x_hathat = self.outer_states(i)[:, 0, :] if self.records else np.zeros((0, self.state_sizes[i]))
        return x - x_hat, x - x_hathat, x_hathat - x_hat

    @property
    def candidate_costs(self) -> ndarray:
        """Per-agent cost of the constructed outer candidate, K x M; NaN where absent."""
        return self._per_agent("candidate_costs")

    @property
    def outer_costs(self) -> ndarray:
        """Per-agent optimal outer cost, K x M; NaN where absent."""
        out = np.full((len(self.records), self.agents), np.nan)
        for k, r in enumerate(self.records):
            for i, traj in enumerate(r.outer):
                if traj is not None and traj.cost is not None:
                    out[k, i] = traj.cost
        return out

    @property
    def candidate_violations(self) -> ndarray:
        """Per-agent constraint violation of the outer candidate, K x M."""
        return self._per_agent("candidate_violations")

    def _per_agent(self, name: str) -> ndarray:
        out = np.full((len(self.records), self.agents), np.nan)
        for k, r in enumerate(self.records):
            values = getattr(r, name)
            if values:
                out[k] = values
        return out

    @property
    def meta(self) -> dict:
        """Run metadata."""
        return {
            "controller": self.controller.value,
            "state_sizes": list(self.state_sizes),
            "input_sizes": list(self.input_sizes),
            "horizon": self.horizon,
            "period": self.period,
            "steps": self.steps,
            "design_hash": self.design_hash,
            "recorded": len(self.records),
            "truncated": self.truncated,
            "fatal": self.fatal,
        }
