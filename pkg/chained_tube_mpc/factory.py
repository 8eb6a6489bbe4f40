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

from concurrent.futures import Executor
from functools import partial
from typing import Callable, Optional, Union

from numpy import ndarray

from chained_tube_mpc.enums import ControllerType
from chained_tube_mpc.errors import ValidationError
from chained_tube_mpc.model import CoupledSystem
from chained_tube_mpc.runtime import SimLog, run, run_baseline
from chained_tube_mpc.synthesis import TubeDesign


Runner = Callable[..., SimLog]


class ControllersFactory(object):
    """Closed-loop runners sharing one plant, design and horizon.

    :param system: coupled system
    :param design: validated tube design
    :param horizon: prediction horizon N
    :param period: inner update period T of the chain of tubes
    :param executor: concurrent agent execution of the chain of tubes
    :param design_hash: content hash recorded in every log
    """

    def __init__(
        self,
        system: CoupledSystem,
        design: TubeDesign,
        horizon: int,
        period: int = 1,
        executor: Optional[Executor] = None,
        design_hash: str = "",
    ) -> None:
        self.system = system
        self.design = design
        self.horizon = horizon
        self.period = period
        self.executor = executor
        self.design_hash = design_hash

    def simulate(self, controller: Union[ControllerType, str], x0: ndarray, steps: int) -> SimLog:
        """Run one controller from ``x0``.

        :param controller: controller name
        :param x0: global initial state
        :param steps: number of steps
        """
        controller = ControllerType(controller)
        runner = controller_factory(controller)
        kwargs = {"design_hash": self.design_hash}
        if controller is ControllerType.chain:
            kwargs.update({"T": self.period, "executor": self.executor})
        return runner(self.system, self.design, x0, steps, self.horizon, **kwargs)


def controller_factory(controller: Optional[Union[ControllerType, str]] = None) -> Runner:
    """Return the runner of a controller based on its name.

    Runners take ``(sys, design, x0, steps, N, **options)`` and return a
    :class:`~chained_tube_mpc.runtime.SimLog`.

    :param controller: controller name, the chain of tubes by default
    """
    if controller is None:
        return run
    try:
        controller = ControllerType(controller)
    except ValueError:
        raise ValidationError(f"There is no controller {controller!r}")
    if controller is ControllerType.chain:
        return run
    return partial(run_baseline, which=controller)
