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

import hashlib
import json

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from chained_tube_mpc.enums import ControllerType, Variant
from chained_tube_mpc.errors import ValidationError
from chained_tube_mpc.storage_adapters.hdf5.hdf5_options import HDF5Options


DATA_DIR = Path(__file__).parent / "data"
FOUR_TRUCKS_CONFIG = DATA_DIR / "four_trucks.json"
FOUR_TRUCKS_X0 = (1.8, -2.0, 0.5, 7.1, -0.9, -7.0, -1.8, 2.0)

Bound = Union[float, List[float]]


def _read_json(path: Union[str, Path]) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"Cannot read config {path}: {e}")


def _per_unit(value: Bound, count: int, name: str) -> List[float]:
    values = [float(value)] * count if np.isscalar(value) else [float(v) for v in value]  # type: ignore[union-attr]
    if len(values) != count:
        raise ValidationError(f"{name} needs {count} entries, got {len(values)}")
    if not all(np.isfinite(v) and v > 0 for v in values):
        raise ValidationError(f"{name} entries must be positive and finite")
    return values


@dataclass()
class ModelConfig(object):
    """Mass-spring-damper chain.

    Truck ``i`` is joined to truck ``i + 1`` by ``springs[i]`` and
    ``dampers[i]``. Bounds are symmetric; scalars apply to every truck.

    :param masses: truck masses
    :param springs: spring constants between consecutive trucks
    :param dampers: damper coefficients between consecutive trucks
    :param position_bound: ``|position| <=`` bound
    :param velocity_bound: ``|velocity| <=`` bound
    :param force_bound: ``|force| <=`` bound
    :param Ts: sampling time, seconds
    """

    masses: List[float]
    springs: List[float]
    dampers: List[float]
    position_bound: Bound = 2.0
    velocity_bound: Bound = 8.0
    force_bound: Bound = 4.0
    Ts: float = 0.1

    def __post_init__(self) -> None:
        """Validate the chain parameters."""
        count = len(self.masses)
        if count < 1:
            raise ValidationError("A chain needs at least one truck")
        self.masses = _per_unit(self.masses, count, "masses")
        if len(self.springs) != count - 1 or len(self.dampers) != count - 1:
            raise ValidationError(f"{count} trucks need {count - 1} springs and dampers")
        self.springs = [float(v) for v in self.springs]
        self.dampers = [float(v) for v in self.dampers]
        if not all(np.isfinite(v) and v >= 0 for v in self.springs + self.dampers):
            raise ValidationError("Spring and damper coefficients must be non-negative and finite")
        for name in ("position_bound", "velocity_bound", "force_bound"):
            _per_unit(getattr(self, name), count, name)
        if not (np.isfinite(self.Ts) and self.Ts > 0):
            raise ValidationError(f"Sampling time must be positive, got {self.Ts}")
        self.Ts = float(self.Ts)

    @property
    def count(self) -> int:
        """Number of trucks."""
        return len(self.masses)

    def bounds(self, name: str) -> List[float]:
        """Per-truck bound list.

        :param name: ``position_bound``, ``velocity_bound`` or ``force_bound``
        """
        return _per_unit(getattr(self, name), self.count, name)

    @property
    def as_dict(self) -> dict:
        """Serialize self into a dictionary."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        """Build a model config, rejecting unknown keys.

        :param data: parsed JSON
        """
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"Unknown model config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ValidationError(f"Invalid model config: {e}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ModelConfig":
        """Read a JSON model config.

        :param path: file path
        """
        return cls.from_dict(_read_json(path))

    @classmethod
    def four_trucks(cls) -> "ModelConfig":
        """The shipped benchmark chain."""
        return cls.load(FOUR_TRUCKS_CONFIG)


@dataclass()
class SynthesisOptions(object):
    """Offline design parameters.

    :param q_weight: state weight, ``Q_i = q_weight * I``
    :param r_weight: input weight, ``R_i = r_weight * I``
    :param q_matrices: explicit per-subsystem state weights, override ``q_weight``
    :param r_matrices: explicit per-subsystem input weights, override ``r_weight``
    :param eps: RPI approximation tolerance
    :param variant: inner initial constraint and H-set construction
    :param outer_q_weight: state weight of a distinct outer gain, None for the outer gain equal to the inner one
    :param outer_r_weight: input weight of a distinct outer gain
    :param inner_set_scale: factor in (0, 1] applied to the inner tightened sets
    :param rpi_max_iter: cap on the number of RPI series terms
    :param terminal_max_iter: cap on the coupled terminal set fixed point iterations
    :param oinf_max_iter: cap on invariant set iterations
    """

    q_weight: float = 1.0
    r_weight: float = 1.0
    q_matrices: Optional[List[List[List[float]]]] = None
    r_matrices: Optional[List[List[List[float]]]] = None
    eps: float = 1e-4
    variant: Variant = Variant.nested
    outer_q_weight: Optional[float] = None
    outer_r_weight: Optional[float] = None
    inner_set_scale: float = 1.0
    rpi_max_iter: int = 500
    terminal_max_iter: int = 100
    oinf_max_iter: int = 200

    def __post_init__(self) -> None:
        """Validate weights, tolerances and caps."""
        if isinstance(self.variant, str):
            try:
                self.variant = Variant(self.variant)
            except ValueError:
                raise ValidationError(f"Unknown variant {self.variant!r}; expected one of {[v.value for v in Variant]}")
        if self.q_weight < 0 or self.r_weight <= 0:
            raise ValidationError("q_weight must be non-negative and r_weight positive")
        if (self.outer_q_weight is None) != (self.outer_r_weight is None):
            raise ValidationError("outer_q_weight and outer_r_weight must be given together")
        if self.outer_q_weight is not None and (self.outer_q_weight < 0 or self.outer_r_weight <= 0):  # type: ignore
            raise ValidationError("outer_q_weight must be non-negative and outer_r_weight positive")
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if not (0 < self.inner_set_scale <= 1):
            raise ValidationError(f"inner_set_scale must be in (0, 1], got {self.inner_set_scale}")
        for name in ("rpi_max_iter", "terminal_max_iter", "oinf_max_iter"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")

    @property
    def distinct_outer_gain(self) -> bool:
        """Whether the outer gain gets its own weights."""
        return self.outer_q_weight is not None

    def weights(self, i: int, n: int, m: int) -> tuple:
        """Return ``(Q_i, R_i)`` for a subsystem.

        :param i: subsystem index
        :param n: state dimension
        :param m: input dimension
        """
        Q = np.array(self.q_matrices[i], dtype=float) if self.q_matrices else self.q_weight * np.eye(n)
        R = np.array(self.r_matrices[i], dtype=float) if self.r_matrices else self.r_weight * np.eye(m)
        if Q.shape != (n, n) or R.shape != (m, m):
            raise ValidationError(f"Weights of subsystem {i} have shapes {Q.shape}, {R.shape}; expected {(n, n)}, {(m, m)}")
        return Q, R

    @property
    def as_dict(self) -> dict:
        """Serialize self into a dictionary."""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["variant"] = self.variant.value  # type: ignore[union-attr]
        return data

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "SynthesisOptions":
        """Build options, rejecting unknown keys.

        :param data: parsed JSON
        """
        data = data or {}
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValidationError(f"Unknown synthesis option keys: {sorted(unknown)}")
        return cls(**data)


def content_hash(model: ModelConfig, options: SynthesisOptions) -> str:
    """SHA-256 of the canonical JSON of a model and its synthesis options.

    :param model: model config
    :param options: synthesis options
    """
    payload = json.dumps({"model": model.as_dict, "synthesis": options.as_dict}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass()
class RunConfig(object):
    """Everything a simulation or comparison run needs.

    Precedence is defaults, then the config file, then command line flags.

    :param model: plant description
    :param synthesis: offline design options
    :param horizon: prediction horizon N
    :param period: inner re-solve period T
    :param steps: number of closed-loop steps
    :param x0: global initial state, None for the benchmark state
    :param controller: controller to simulate
    :param out: output directory
    :param archive: HDF5 options of the simulation archives
    """

    model: ModelConfig = field(default_factory=ModelConfig.four_trucks)
    synthesis: SynthesisOptions = field(default_factory=SynthesisOptions)
    horizon: int = 10
    period: int = 1
    steps: int = 50
    x0: Optional[List[float]] = None
    controller: ControllerType = ControllerType.chain
    out: str = "out"
    archive: HDF5Options = field(default_factory=HDF5Options)

    def __post_init__(self) -> None:
        """Validate run parameters."""
        if isinstance(self.controller, str):
            try:
                self.controller = ControllerType(self.controller)
            except ValueError:
                raise ValidationError(
                    f"Unknown controller {self.controller!r}; expected one of {[c.value for c in ControllerType]}"
                )
        for name in ("horizon", "period", "steps"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")
        n = 2 * self.model.count
        if self.x0 is None:
            if n != len(FOUR_TRUCKS_X0):
                raise ValidationError(f"x0 is required for a chain of {self.model.count} trucks")
            self.x0 = list(FOUR_TRUCKS_X0)
        self.x0 = [float(v) for v in self.x0]
        if len(self.x0) != n:
            raise ValidationError(f"x0 has {len(self.x0)} entries, the model has {n} states")
        if not all(np.isfinite(self.x0)):
            raise ValidationError("x0 must be finite")
        if not isinstance(self.out, (str, Path)) or not str(self.out).strip():
            raise ValidationError("out must be a directory path")
        self.out = str(self.out)

    @property
    def x0_array(self) -> np.ndarray:
        """Initial state as an array."""
        return np.asarray(self.x0, dtype=float)

    @property
    def design_hash(self) -> str:
        """Key of the design cache entry."""
        return content_hash(self.model, self.synthesis)

    @property
    def as_dict(self) -> dict:
        """Serialize self into a dictionary (the config file format)."""
        return {
            "model": self.model.as_dict,
            "synthesis": self.synthesis.as_dict,
            "horizon": self.horizon,
            "period": self.period,
            "steps": self.steps,
            "x0": self.x0,
            "controller": self.controller.value,  # type: ignore[union-attr]
            "out": self.out,
            "archive": self.archive.as_dict,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Optional[Path] = None) -> "RunConfig":
        """Build a run config from parsed JSON.

        ``model`` may be an inline object or a path, resolved against ``base_dir``.

        :param data: parsed JSON
        :param base_dir: directory relative model paths are resolved against
        """
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"Unknown run config keys: {sorted(unknown)}")
        model = data.pop("model", None)
        if isinstance(model, str):
            path = Path(model)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            data["model"] = ModelConfig.load(path)
        elif isinstance(model, dict):
            data["model"] = ModelConfig.from_dict(model)
        elif model is not None:
            raise ValidationError("model must be a path or an object")
        data["synthesis"] = SynthesisOptions.from_dict(data.pop("synthesis", None))
        data["archive"] = HDF5Options.from_dict(data.pop("archive", None))
        try:
            return cls(**data)
        except TypeError as e:
            raise ValidationError(f"Invalid run config: {e}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        """Read a JSON run config.

        :param path: file path
        """
        path = Path(path)
        return cls.from_dict(_read_json(path), base_dir=path.parent)

    def with_overrides(self, **flags: Any) -> "RunConfig":
        """Return a copy with every non-None flag applied.

        :param flags: field values, e.g. from the command line
        """
        changes = {k: v for k, v in flags.items() if v is not None}
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ValidationError(f"Unknown run config fields: {sorted(unknown)}")
        return replace(self, **changes)


def benchmark_x0() -> Sequence[float]:
    """Initial state of the four-truck benchmark."""
    return FOUR_TRUCKS_X0
