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

import json
import os

from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, Optional, Union

import h5py
import hdf5plugin
import numpy as np

from deker_tools.path import is_empty
from h5py import Dataset, Group
from numpy import ndarray

from chained_tube_mpc.config import ModelConfig, SynthesisOptions
from chained_tube_mpc.errors import StorageError
from chained_tube_mpc.geometry import dumps, loads
from chained_tube_mpc.log import SelfLoggerMixin
from chained_tube_mpc.model import CoupledSystem
from chained_tube_mpc.runtime.simlog import SimLog
from chained_tube_mpc.storage_adapters.enums import CacheGroups
from chained_tube_mpc.storage_adapters.hdf5.hdf5_options import HDF5Options
from chained_tube_mpc.synthesis import MATRIX_FIELDS, SET_FIELDS, AssumptionReport, SubsystemDesign, TubeDesign


os.environ["HDF5_PLUGIN_PATH"] = hdf5plugin.PLUGIN_PATH
os.environ["HDF5_USE_FILE_LOCKING"] = "FALSE"


def _package_version() -> str:
    try:
        return version("chained-tube-mpc")
    except PackageNotFoundError:
        return "unknown"


class HDF5StringMixin(object):
    """JSON and text datasets stored as fixed-length byte strings."""

    @staticmethod
    def write_string(group: Group, name: str, value: Union[str, dict]) -> Dataset:
        """Create a scalar string dataset.

        :param group: parent group
        :param name: dataset name
        :param value: text, or a dictionary dumped to JSON
        """
        if not isinstance(value, str):
            value = json.dumps(value, default=str, sort_keys=True)
        data = value.encode("utf-8")
        ds = group.create_dataset(name, data=data, dtype=f"S{max(len(data), 1)}", shape=())
        ds.flush()
        return ds

    @staticmethod
    def read_string(group: Group, name: str) -> str:
        """Read a scalar string dataset.

        :param group: parent group
        :param name: dataset name
        """
        ds: Optional[Dataset] = group.get(name)
        if ds is None:
            raise StorageError(f"No {name!r} dataset in {group.file.filename}")
        return ds[()].decode("utf-8")


class HDF5DesignCache(SelfLoggerMixin, HDF5StringMixin):
    """Tube designs stored as ``<root>/cache/<hash>.hdf5``.

    Each file holds ``/meta`` and ``/report`` JSON strings and one
    ``/subsystem_<i>`` group per subsystem with the gains and weights as
    float64 datasets and the sets as text blocks under ``sets/``.

    :param root: output directory
    """

    file_ext: str = ".hdf5"
    cache_dir: str = "cache"

    def __init__(self, root: Union[str, Path]) -> None:
        self.directory = Path(root) / self.cache_dir

    def path(self, design_hash: str) -> Path:
        """File a design with this hash is stored in.

        :param design_hash: content hash of model and options
        """
        return self.directory / f"{design_hash}{self.file_ext}"

    def exists(self, design_hash: str) -> bool:
        """Whether a design with this hash is cached.

        :param design_hash: content hash of model and options
        """
        if not self.directory.exists() or is_empty(self.directory):
            return False
        return self.path(design_hash).is_file()

    def save(self, design: TubeDesign, design_hash: str, model: Optional[ModelConfig] = None) -> Path:
        """Write a design, replacing any file with the same hash.

        :param design: validated tube design
        :param design_hash: content hash of model and options
        :param model: model configuration the design was built from
        """
        path = self.path(design_hash)
        meta = {
            "hash": design_hash,
            "options": design.options.as_dict,
            "model": model.as_dict if model is not None else None,
            "subsystems": len(design),
            "version": _package_version(),
        }
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            self.logger.debug(f"trying to create {path}")
            with h5py.File(path, "w", locking=False) as f:
                self.logger.debug(f"{path} opened in 'w'-mode")
                self.write_string(f, CacheGroups.meta.value, meta)
                self.write_string(f, CacheGroups.report.value, design.report.as_dict)
                for d in design:
                    group = f.create_group(CacheGroups.subsystem.value.format(index=d.index))
                    group.attrs["delta"] = d.delta
                    for name in MATRIX_FIELDS:
                        group.create_dataset(name, data=np.asarray(getattr(d, name), dtype=np.float64)).flush()
                    sets = group.create_group(CacheGroups.sets.value)
                    for name in SET_FIELDS:
                        self.write_string(sets, name, dumps(getattr(d, name)))
                f.flush()
            self.logger.debug(f"{path} created and closed")
        except Exception as e:
            self.logger.exception(e)
            raise e
        return path

    def read_meta(self, design_hash: str) -> Dict[str, Any]:
        """Metadata of a cached design.

        :param design_hash: content hash of model and options
        """
        path = self.path(design_hash)
        self.logger.debug(f"trying to read meta from {path}")
        with h5py.File(path, mode="r", locking=False) as f:
            meta = json.loads(self.read_string(f, CacheGroups.meta.value))
        self.logger.debug(f"{path} meta read OK and closed")
        return meta

    def load(self, design_hash: str, system: CoupledSystem) -> TubeDesign:
        """Read a cached design back for the system it was built for.

        :param design_hash: content hash of model and options
        :param system: coupled system rebuilt from the same model
        """
        path = self.path(design_hash)
        if not path.is_file():
            raise StorageError(f"No cached design {design_hash}")
        self.logger.debug(f"trying to read design from {path}")
        with h5py.File(path, mode="r", locking=False) as f:
            self.logger.debug(f"{path} opened in 'r'-mode")
            meta = json.loads(self.read_string(f, CacheGroups.meta.value))
            if meta.get("hash") != design_hash:
                raise StorageError(f"{path} holds design {meta.get('hash')}, expected {design_hash}")
            if meta.get("subsystems") != len(system):
                raise StorageError(f"{path} holds {meta.get('subsystems')} subsystems, system has {len(system)}")
            report = AssumptionReport.from_dict(json.loads(self.read_string(f, CacheGroups.report.value)))
            subsystems = []
            for i in range(len(system)):
                group: Optional[Group] = f.get(CacheGroups.subsystem.value.format(index=i))
                if group is None:
                    raise StorageError(f"{path} has no group for subsystem {i + 1}")
                fields: Dict[str, Any] = {name: np.array(group[name][()], dtype=float) for name in MATRIX_FIELDS}
                sets = group[CacheGroups.sets.value]
                fields.update({name: loads(self.read_string(sets, name)) for name in SET_FIELDS})
                subsystems.append(SubsystemDesign(index=i, delta=float(group.attrs["delta"]), **fields))
        self.logger.debug(f"{path} design read OK and closed")
        return TubeDesign(system, tuple(subsystems), SynthesisOptions.from_dict(meta["options"]), report)


class HDF5SimLogArchive(SelfLoggerMixin, HDF5StringMixin):
    """Full closed-loop logs stored as ``<root>/<controller>.hdf5``.

    :param root: output directory
    :param options: chunking and compression of the datasets
    """

    file_ext: str = ".hdf5"

    def __init__(self, root: Union[str, Path], options: Optional[HDF5Options] = None) -> None:
        self.directory = Path(root)
        self.options = options or HDF5Options()

    def path(self, log: SimLog) -> Path:
        """File a log is archived in.

        :param log: simulation log
        """
        return self.directory / f"{log.controller.value}{self.file_ext}"

    def _dataset(self, group: Group, name: str, data: ndarray) -> None:
        data = np.asarray(data)
        ds = group.create_dataset(name, data=data, **self.options.dataset_kwargs(data.shape))
        ds.flush()

    def write(self, log: SimLog) -> Path:
        """Archive a log, replacing any previous archive of the same controller.

        :param log: simulation log
        """
        path = self.path(log)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            self.logger.debug(f"trying to create {path}")
            with h5py.File(path, "w", locking=False) as f:
                self.logger.debug(f"{path} opened in 'w'-mode")
                self.write_string(f, CacheGroups.meta.value, log.meta)
                self._dataset(f, "states", log.states)
                self._dataset(f, "inputs", log.inputs)
                self._dataset(f, "statuses", log.statuses)
                self._dataset(f, "outer_statuses", log.outer_statuses)
                self._dataset(f, "stage_costs", log.stage_costs)
                self._dataset(f, "outer_costs", log.outer_costs)
                self._dataset(f, "candidate_costs", log.candidate_costs)
                self._dataset(f, "candidate_violations", log.candidate_violations)
                for i in range(log.agents):
                    group = f.create_group(f"agent_{i}")
                    self._dataset(group, "inner_states", log.inner_states(i))
                    self._dataset(group, "inner_inputs", log.inner_inputs(i))
                    self._dataset(group, "outer_states", log.outer_states(i))
                    self._dataset(group, "outer_inputs", log.outer_inputs(i))
                    for name, values in zip(("z", "s", "e"), log.tube_errors(i)):
                        self._dataset(group, name, values)
                f.flush()
            self.logger.debug(f"{path} created and closed")
        except Exception as e:
            self.logger.exception(e)
            raise e
        return path

    def read_meta(self, path: Union[str, Path]) -> Dict[str, Any]:
        """Metadata of an archived log.

        :param path: archive file
        """
        with h5py.File(path, mode="r", locking=False) as f:
            return json.loads(self.read_string(f, CacheGroups.meta.value))

    def read_data(self, path: Union[str, Path], name: str) -> ndarray:
        """One dataset of an archived log, e.g. ``states`` or ``agent_0/z``.

        :param path: archive file
        :param name: dataset path inside the file
        """
        self.logger.debug(f"trying to read {name} from {path}")
        with h5py.File(path, mode="r", locking=False) as f:
            ds: Optional[Dataset] = f.get(name)
            if ds is None:
                raise StorageError(f"No {name!r} dataset in {path}")
            data = ds[()]
        self.logger.debug(f"{path} data read OK and closed")
        return data
