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
from .codec import dumps, loads
from .invariant import max_admissible_invariant, max_robust_invariant, rpi_outer_approx
from .polytope import (
    HPolytope,
    box,
    box_bounds,
    cartesian_product,
    from_points,
    hausdorff_gap,
    inscribed_box_radius,
    intersect,
    is_subset,
    linear_map,
    minkowski_sum,
    minkowski_sum_all,
    origin,
    pontryagin_diff,
    preimage,
    subset_margin,
    support,
    supports,
)
