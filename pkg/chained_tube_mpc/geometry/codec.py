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

"""Plain-text polytope blocks.

A block is a ``dim m`` header followed by ``m`` lines ``a_1 ... a_dim b``.
Numbers use the shortest representation that round-trips a float64.
"""

from typing import List

import numpy as np

from chained_tube_mpc.errors import ValidationError
from chained_tube_mpc.geometry.polytope import HPolytope


def _fmt(value: float) -> str:
    return repr(float(value))


def dumps(P: HPolytope) -> str:
    """Serialize a polytope into a text block.

    :param P: polytope
    """
    lines: List[str] = [f"{P.dim} {P.n_rows}"]
    for row, offset in zip(P.A, P.b):
        lines.append(" ".join([_fmt(v) for v in row] + [_fmt(offset)]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> HPolytope:
    """Parse a text block produced by :func:`dumps`.

    :param text: serialized block
    """
    lines = [line for line in text.strip().splitlines() if line.strip()]
    if not lines:
        raise ValidationError("Empty polytope block")
    header = lines[0].split()
    try:
        dim, m = int(header[0]), int(header[1])
    except (IndexError, ValueError):
        raise ValidationError(f"Invalid polytope header: {lines[0]!r}")
    if len(header) != 2 or dim < 1 or m < 1:
        raise ValidationError(f"Invalid polytope header: {lines[0]!r}")
    if len(lines) != m + 1:
        raise ValidationError(f"Polytope block declares {m} rows, found {len(lines) - 1}")
    try:
        data = np.array([[float(v) for v in line.split()] for line in lines[1:]], dtype=float)
    except ValueError as e:
        raise ValidationError(f"Invalid number in polytope block: {e}")
    if data.shape != (m, dim + 1):
        raise ValidationError(f"Polytope rows must have {dim + 1} entries")
    return HPolytope(data[:, :dim], data[:, dim])
