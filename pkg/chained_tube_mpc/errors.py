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

from typing import TYPE_CHECKING, Any, Optional


if TYPE_CHECKING:
    from chained_tube_mpc.runtime.simlog import SimLog


class TubeMPCBaseError(Exception):
    """Base class for all the application errors."""


class ValidationError(TubeMPCBaseError):
    """If configuration or input data is invalid."""


class DimensionMismatch(TubeMPCBaseError):
    """If operands live in spaces of different dimension."""


class SizeMismatch(TubeMPCBaseError):
    """If vector or matrix sizes are inconsistent with a model."""


class EmptySetError(TubeMPCBaseError):
    """If an operation requires a non-empty set and gets an empty one."""


class UnboundedError(TubeMPCBaseError):
    """If a set or a linear program is unbounded in the requested direction."""


class UnsupportedError(TubeMPCBaseError):
    """If an exact set operation is requested beyond the supported dimension."""


class NotSchurError(TubeMPCBaseError):
    """If a closed-loop matrix is required to be Schur and it is not."""


class NotStabilizableError(TubeMPCBaseError):
    """If a Riccati iteration diverges."""


class IterationLimitError(TubeMPCBaseError):
    """If an iterative algorithm hits its cap.

    :param message: error message
    :param partial: the last iterate, if any
    """

    def __init__(self, message: str, partial: Any = None) -> None:
        super().__init__(message)
        self.partial = partial


class InfeasibleError(TubeMPCBaseError):
    """If a linear or quadratic program has no feasible point."""


class NumericalFailureError(TubeMPCBaseError):
    """If a solver breaks down numerically."""


class SynthesisFailure(TubeMPCBaseError):
    """If an offline synthesis check fails.

    :param check: name of the failed check
    :param message: details
    """

    def __init__(self, check: str, message: str = "") -> None:
        super().__init__(f"{check}: {message}" if message else check)
        self.check = check


class InvariantViolation(TubeMPCBaseError):
    """If a trajectory leaves a set it is supposed to stay in."""


class MissingBroadcast(TubeMPCBaseError):
    """If a neighbour reference is absent or carries a wrong stamp.

    :param neighbour: index of the absent neighbour
    :param message: details
    """

    def __init__(self, neighbour: int, message: str = "") -> None:
        super().__init__(message or f"No broadcast from neighbour {neighbour}")
        self.neighbour = neighbour


class CandidateRejected(TubeMPCBaseError):
    """If the outer solver reports infeasibility while the guaranteed candidate is feasible."""


class FatalInfeasible(TubeMPCBaseError):
    """If a guaranteed optimization turns infeasible during a run.

    :param t: timestep
    :param i: subsystem index, 0-based
    :param stage: "inner", "shift", "outer" or a baseline name
    :param log: partial simulation log
    """

    def __init__(self, t: int, i: int, stage: str, log: Optional["SimLog"] = None) -> None:
        super().__init__(f"{stage} problem of subsystem {i + 1} infeasible at t={t}")
        self.t = t
        self.i = i
        self.stage = stage
        self.log = log


class StorageError(TubeMPCBaseError):
    """If a problem appears in a storage adapter."""
