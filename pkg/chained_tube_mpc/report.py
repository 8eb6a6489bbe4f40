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

"""Markdown comparison of the closed-loop costs of all controllers."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from chained_tube_mpc.enums import ControllerType
from chained_tube_mpc.runtime import SimLog


CONVERGENCE_THRESHOLD = 0.05

ROWS: Tuple[Tuple[ControllerType, str], ...] = (
    (ControllerType.tmpc, "TMPC"),
    (ControllerType.dempc, "DeMPC"),
    (ControllerType.chain, "Chain of tubes"),
    (ControllerType.cmpc, "CMPC"),
)

# expected J_CMPC <= J_chain <= J_DeMPC <= J_TMPC
ORDERING = (ControllerType.cmpc, ControllerType.chain, ControllerType.dempc, ControllerType.tmpc)

COST_CONVENTION = (
    "Costs are sums over all applied steps t = 0..K-1 of the true stage costs "
    "x_i' Q_i x_i + u_i' R_i u_i, without a factor 1/2 and without a terminal term. "
    "The global plant cost is the sum over all trucks."
)


def _fmt(value: float) -> str:
    return f"{value:.4f}"


@dataclass
class ComparisonReport(object):
    """Closed-loop logs of the compared controllers.

    :param logs: complete or truncated log per controller
    :param failures: error message per controller that stopped early
    """

    logs: Dict[ControllerType, SimLog] = field(default_factory=dict)
    failures: Dict[ControllerType, str] = field(default_factory=dict)

    def add(self, log: SimLog, failure: Optional[str] = None) -> None:
        """Register a log and, if it was cut short, the reason.

        :param log: simulation log
        :param failure: error message
        """
        self.logs[log.controller] = log
        if failure:
            self.failures[log.controller] = failure

    @property
    def agents(self) -> int:
        """Number of trucks."""
        return max((log.agents for log in self.logs.values()), default=0)

    def complete(self, controller: ControllerType) -> bool:
        """Whether a controller ran all its steps.

        :param controller: controller
        """
        log = self.logs.get(controller)
        return log is not None and log.completed

    def ordering_holds(self) -> Optional[bool]:
        """Whether ``J_CMPC <= J_chain <= J_DeMPC <= J_TMPC``; None unless all four completed."""
        if not all(self.complete(c) for c in ORDERING):
            return None
        costs = [self.logs[c].total_cost for c in ORDERING]
        return all(a <= b for a, b in zip(costs, costs[1:]))

    def truck_spread(self, i: int) -> Optional[float]:
        """Relative spread ``(max - min) / max`` of one truck's cost over the completed runs.

        :param i: truck index
        """
        costs = [log.agent_cost(i) for log in self.logs.values() if log.completed]
        if len(costs) < 2:
            return None
        top = max(costs)
        return 0.0 if top == 0 else (top - min(costs)) / top

    def _row(self, controller: ControllerType, label: str) -> List[str]:
        log = self.logs.get(controller)
        if log is None:
            return [label, "not run"] + [""] * self.agents
        note = "" if log.completed else " (truncated)"
        return [label, _fmt(log.total_cost) + note] + [_fmt(log.agent_cost(i)) for i in range(self.agents)]

    def to_markdown(self) -> str:
        """Render the table, the ordering check and the per-run diagnostics."""
        header = ["Controller", "Global plant"] + [f"Truck i={i + 1}" for i in range(self.agents)]
        lines = [
            "# Cost comparison",
            "",
            "| " + " | ".join(header) + " |",
            "|" + "|".join(["---"] * len(header)) + "|",
        ]
        for controller, label in ROWS:
            lines.append("| " + " | ".join(self._row(controller, label)) + " |")
        lines += ["", COST_CONVENTION, ""]

        ordering = self.ordering_holds()
        verdict = "not available (a run did not complete)" if ordering is None else str(ordering).lower()
        lines.append(f"Ordering J_CMPC <= J_chain <= J_DeMPC <= J_TMPC: {verdict}")
        spreads = []
        for i in range(self.agents):
            spread = self.truck_spread(i)
            spreads.append(f"truck {i + 1}: " + ("n/a" if spread is None else f"{100 * spread:.2f}%"))
        lines.append("Relative spread of truck costs across controllers: " + ", ".join(spreads))
        lines += ["", "## Runs", ""]

        for controller, label in ROWS:
            log = self.logs.get(controller)
            if log is None:
                continue
            final = log.final_norm
            converged = bool(np.isfinite(final) and final <= CONVERGENCE_THRESHOLD)
            parts = [
                f"steps {len(log)}/{log.steps}",
                f"final |x|_inf {final:.6g}",
                f"converged below {CONVERGENCE_THRESHOLD}: {str(converged).lower()}",
            ]
            if log.saturations:
                parts.append(f"saturated agent steps {log.saturations}")
            lines.append(f"- {label}: " + ", ".join(parts))
            if controller in self.failures:
                lines.append(f"  - stopped: {self.failures[controller]}")
        return "\n".join(lines) + "\n"
