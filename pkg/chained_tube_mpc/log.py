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

import logging

from typing import Union


LOGGER_PREFIX = "chained_tube_mpc"
_format = "%(levelname)s %(asctime)s %(name)s: %(message)s"


def set_logging_level(level: Union[str, int]) -> None:
    """Configure the package loggers.

    :param level: logging level name or number
    """
    if isinstance(level, str):
        level = level.upper()
    logging.basicConfig(format=_format)
    logging.getLogger(LOGGER_PREFIX).setLevel(level)


class SelfLoggerMixin(object):
    """Mixin giving every instance a logger named after its class."""

    __logger: logging.Logger = None  # type: ignore[assignment]

    @property
    def logger(self) -> logging.Logger:
        """Return the class logger."""
        if self.__logger is None:
            self.__logger = logging.getLogger(f"{LOGGER_PREFIX}.{self.__class__.__name__}")
        return self.__logger
