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
from threading import Lock
from typing import Dict, Tuple

from chained_tube_mpc.controllers import NominalTrajectory
from chained_tube_mpc.errors import MissingBroadcast, ValidationError
from chained_tube_mpc.log import SelfLoggerMixin
from chained_tube_mpc.model import CoupledSystem


@dataclass(frozen=True)
class Broadcast(object):
    """Inner reference published by one agent.

    :param sender: publishing subsystem
    :param stamp: time step
    :param trajectory: inner nominal trajectory
    """

    sender: int
    stamp: int
    trajectory: NominalTrajectory


class BroadcastBus(SelfLoggerMixin):
    """Synchronous, lossless bus with barrier delivery.

    Messages published during a phase are held back until :meth:`deliver`
    is called for their stamp; delivery requires every agent to have
    published and hands each message only to the agents that list the
    sender as a dynamic neighbour.

    :param system: coupled system defining the neighbour relation
    """

    def __init__(self, system: CoupledSystem) -> None:
        self._count = len(system)
        self._receivers: Dict[int, Tuple[int, ...]] = {
            i: tuple(j for j in range(self._count) if i in system.neighbours(j)) for i in range(self._count)
        }
        self._pending: Dict[int, Broadcast] = {}
        self._stamp = None
        self._lock = Lock()

    def receivers(self, sender: int) -> Tuple[int, ...]:
        """Agents a message from ``sender`` is delivered to.

        :param sender: subsystem index
        """
        return self._receivers[sender]

    def publish(self, message: Broadcast) -> None:
        """Queue a message until the next barrier.

        :param message: broadcast
        """
        if message.trajectory.owner != message.sender or message.trajectory.stamp != message.stamp:
            raise ValidationError(f"Broadcast from {message.sender + 1} does not match its trajectory")
        with self._lock:
            if self._stamp is None:
                self._stamp = message.stamp
            if message.stamp != self._stamp:
                raise ValidationError(f"Broadcast stamped {message.stamp} while phase {self._stamp} is open")
            if message.sender in self._pending:
                raise ValidationError(f"Agent {message.sender + 1} already published at t={message.stamp}")
            self._pending[message.sender] = message

    def deliver(self, stamp: int) -> Dict[int, Dict[int, NominalTrajectory]]:
        """Close the phase and return every agent's inbox, sender to trajectory.

        :param stamp: time step being closed
        """
        with self._lock:
            missing = [i for i in range(self._count) if i not in self._pending]
            if missing:
                self._pending.clear()
                self._stamp = None
                raise MissingBroadcast(missing[0], f"Agent {missing[0] + 1} did not publish at t={stamp}")
            if self._stamp != stamp:
                raise ValidationError(f"Closing phase {stamp} but messages are stamped {self._stamp}")
            inboxes: Dict[int, Dict[int, NominalTrajectory]] = {i: {} for i in range(self._count)}
            for sender in sorted(self._pending):
                for receiver in self._receivers[sender]:
                    inboxes[receiver][sender] = self._pending[sender].trajectory
            self._pending.clear()
            self._stamp = None
        self.logger.debug(f"delivered broadcasts of t={stamp}")
        return inboxes
