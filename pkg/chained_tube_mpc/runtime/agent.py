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

from dataclasses import dataclass
from typing import Optional

from chained_tube_mpc.controllers import NominalTrajectory
from chained_tube_mpc.errors import ValidationError


@dataclass
class AgentState(object):
    """Mutable per-agent controller memory.

    :param index: subsystem index
    :param lam: number of inner solves so far
    :param reference: current inner reference
    :param outer: last outer trajectory
    """

    index: int
    lam: int = 0
    reference: Optional[NominalTrajectory] = None
    outer: Optional[NominalTrajectory] = None

    def solves_at(self, t: int, period: int) -> bool:
        """Whether the inner problem is re-solved at ``t``, i.e. ``t == lam * period``.

        :param t: time step
        :param period: inner update period
        """
        return t == self.lam * period

    def accept_reference(self, reference: NominalTrajectory, solved: bool) -> None:
        """Store a new inner reference, advancing the counter after a solve.

        :param reference: solved or shifted inner trajectory
        :param solved: whether it came from an inner solve
        """
        if self.reference is not None and reference.stamp <= self.reference.stamp:
            raise ValidationError(
                f"Agent {self.index + 1} got reference stamped {reference.stamp} after {self.reference.stamp}"
            )
        self.reference = reference
        if solved:
            self.lam += 1

    def accept_outer(self, outer: NominalTrajectory) -> None:
        """Store the outer trajectory of the current step.

        :param outer: outer trajectory
        """
        if self.reference is None or outer.stamp != self.reference.stamp:
            raise ValidationError(f"Agent {self.index + 1} got outer trajectory stamped {outer.stamp} off its reference")
        self.outer = outer
