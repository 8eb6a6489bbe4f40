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

from enum import Enum, IntEnum


class ControllerType(Enum):
    """Enum for closed-loop controllers."""

    chain = "chain"
    cmpc = "cmpc"
    tmpc = "tmpc"
    dempc = "dempc"


class Variant(Enum):
    """Enum for the inner initial constraint and H-set construction."""

    nested = "nested"
    original = "original"


class SolveStatus(IntEnum):
    """Enum for per-agent optimization outcomes recorded in simulation logs."""

    optimal = 0
    shifted = 1
    saturated = 2
    infeasible = 3
    skipped = 4


class DesignCheck(Enum):
    """Enum for the named checks of offline synthesis and validation."""

    constraint_sets = "compact constraint sets with the origin inside"
    stabilizable = "(A_ii, B_ii) stabilizable"
    local_schur = "A_ii + B_ii K_T Schur"
    outer_schur = "A_ii + B_ii K_hat Schur"
    global_schur = "A + B K_T Schur"
    global_outer_schur = "A + B K_hat Schur"
    z_rpi = "Z RPI for (A_ii + B_ii K_T, W)"
    tightened_sets = "tightened sets non-empty with the origin inside"
    uncertainty_reduction = "V inside the interior of W"
    s_rpi = "S RPI for (A_ii + B_ii K_hat, V)"
    tube_nesting = "S inside the interior of Z"
    h_rpi = "H RPI for (A_ii + B_ii K_hat, D)"
    s_plus_h = "S + H inside Z"
    h_in_box = "H inside box(0, delta)"
    outer_terminal = "outer terminal sets jointly invariant"
    inner_terminal = "inner terminal set admissible and invariant"
    terminal_nesting = "XF_hat inside XF_hathat - H"
    terminal_cost = "P solves the Lyapunov equation"
