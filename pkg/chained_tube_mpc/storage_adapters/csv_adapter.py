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

"""Plain CSV export of closed-loop logs.

One row per applied step with the columns ``t, x1..xn, u1..um,
status_1..status_M, cost_1..cost_M``. Reals are written with 17 significant
digits so a float64 log can be replayed exactly; statuses are the integer
codes of :class:`~chained_tube_mpc.enums.SolveStatus`.
"""

import csv

from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from numpy import ndarray

from chained_tube_mpc.errors import StorageError
from chained_tube_mpc.log import SelfLoggerMixin
from chained_tube_mpc.runtime.simlog import SimLog


def _real(value: float) -> str:
    return f"{float(value):.17g}"


def csv_header(log: SimLog) -> List[str]:
    """Column names of a log export.

    :param log: simulation log
    """
    n, m = sum(log.state_sizes), sum(log.input_sizes)
    return (
        ["t"]
        + [f"x{k + 1}" for k in range(n)]
        + [f"u{k + 1}" for k in range(m)]
        + [f"status_{i + 1}" for i in range(log.agents)]
        + [f"cost_{i + 1}" for i in range(log.agents)]
    )


class CSVLogAdapter(SelfLoggerMixin):
    """Writes and reads ``<root>/<controller>.csv``.

    :param root: output directory
    """

    file_ext: str = ".csv"

    def __init__(self, root: Union[str, Path]) -> None:
        self.directory = Path(root)

    def path(self, log: SimLog) -> Path:
        """File a log is exported to.

        :param log: simulation log
        """
        return self.directory / f"{log.controller.value}{self.file_ext}"

    def write(self, log: SimLog) -> Path:
        """Export a log, replacing any previous export of the same controller.

        :param log: simulation log
        """
        path = self.path(log)
        states, inputs, statuses, costs = log.states, log.inputs, log.statuses, log.stage_costs
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            self.logger.debug(f"trying to write {path}")
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(csv_header(log))
                for k, record in enumerate(log.records):
                    writer.writerow(
                        [str(record.t)]
                        + [_real(v) for v in states[k]]
                        + [_real(v) for v in inputs[k]]
                        + [str(int(s)) for s in statuses[k]]
                        + [_real(c) for c in costs[k]]
                    )
            self.logger.debug(f"{path} written, {len(log)} rows")
        except Exception as e:
            self.logger.exception(e)
            raise e
        return path

    def read(self, path: Union[str, Path]) -> Tuple[List[str], ndarray]:
        """Return the header and the rows of an export as a float array.

        :param path: CSV file
        """
        try:
            with open(path, "r", newline="", encoding="utf-8") as f:
                rows = list(csv.reader(f))
        except OSError as e:
            raise StorageError(f"Cannot read {path}: {e}")
        if not rows:
            raise StorageError(f"{path} is empty")
        header, body = rows[0], rows[1:]
        data = np.array([[float(v) for v in row] for row in body], dtype=float).reshape(-1, len(header))
        return header, data
