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
from .config import ModelConfig, RunConfig, SynthesisOptions, content_hash
from .controllers import (
    NominalTrajectory,
    control_action,
    outer_candidate,
    preview_disturbance,
    shift_inner,
    solve_inner,
    solve_outer,
)
from .enums import ControllerType, DesignCheck, SolveStatus, Variant
from .factory import ControllersFactory, controller_factory
from .model import CoupledSystem, SubsystemModel, build_chain, build_four_trucks, decompose, step_true_plant
from .runtime import SimLog, run, run_baseline
from .storage_adapters.csv_adapter import CSVLogAdapter
from .storage_adapters.hdf5.hdf5_storage_adapter import HDF5DesignCache, HDF5SimLogArchive
from .synthesis import AssumptionReport, TubeDesign, synthesize, validate
