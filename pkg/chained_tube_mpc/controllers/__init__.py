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

# nopycln: file
from .baselines import BaselineStep, baseline_cmpc, baseline_dempc, baseline_tmpc, project
from .condensing import CondensedProblem, Prediction
from .trajectory import (
    DisturbancePreview,
    NominalTrajectory,
    evaluate_cost,
    preview_disturbance,
    rollout,
    shift_inner,
)
from .tube import (
    control_action,
    inner_violation,
    outer_candidate,
    outer_violation,
    solve_inner,
    solve_outer,
    split_initial_error,
)
