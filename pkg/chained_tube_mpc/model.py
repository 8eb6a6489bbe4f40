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

"""Coupled LTI plants, their non-overlapping decomposition and the truck chain."""

import logging

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from numpy import ndarray

from chained_tube_mpc.config import ModelConfig
from chained_tube_mpc.errors import SizeMismatch, ValidationError
from chained_tube_mpc.geometry import HPolytope, box_bounds, cartesian_product, linear_map, minkowski_sum_all
from chained_tube_mpc.numkernel import as_matrix, zoh_discretize


logger = logging.getLogger(__name__)

ZERO_BLOCK_TOL = 1e-12
RESIDUAL_TOL = 1e-9
ASSUMPTION_MARGIN = 1e-9

Block = Tuple[ndarray, ndarray]


@dataclass(frozen=True, eq=False)
class SubsystemModel(object):
    """Local dynamics ``x_i+ = A x_i + B u_i + sum_j (A_ij x_j + B_ij u_j)``.

    :param index: position in the system, 0-based
    :param A: local state matrix A_ii
    :param B: local input matrix B_ii
    :param couplings: neighbour index to (A_ij, B_ij)
    :param X: state constraint set
    :param U: input constraint set
    :param residuals: couplings outside the declared topology, treated as unknown disturbance
    """

    index: int
    A: ndarray
    B: ndarray
    couplings: Dict[int, Block] = field(default_factory=dict)
    X: Optional[HPolytope] = None
    U: Optional[HPolytope] = None
    residuals: Dict[int, Block] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check block shapes against the local dimensions."""
        A = as_matrix(self.A, f"A_{self.index}{self.index}")
        B = as_matrix(self.B, f"B_{self.index}{self.index}")
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise SizeMismatch(f"Subsystem {self.index}: A {A.shape} and B {B.shape} are inconsistent")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        for name in ("couplings", "residuals"):
            blocks = {}
            for j, (A_ij, B_ij) in sorted(getattr(self, name).items()):
                A_ij, B_ij = as_matrix(A_ij, "A_ij"), as_matrix(B_ij, "B_ij")
                if A_ij.shape[0] != self.n or B_ij.shape[0] != self.n:
                    raise SizeMismatch(f"Subsystem {self.index}: coupling blocks from {j} need {self.n} rows")
                if j == self.index:
                    raise ValidationError(f"Subsystem {self.index} cannot be its own neighbour")
                blocks[int(j)] = (A_ij, B_ij)
            object.__setattr__(self, name, blocks)
        if self.X is not None and self.X.dim != self.n:
            raise SizeMismatch(f"Subsystem {self.index}: X has dimension {self.X.dim}, expected {self.n}")
        if self.U is not None and self.U.dim != self.m:
            raise SizeMismatch(f"Subsystem {self.index}: U has dimension {self.U.dim}, expected {self.m}")

    @property
    def n(self) -> int:
        """Local state dimension."""
        return self.A.shape[0]

    @property
    def m(self) -> int:
        """Local input dimension."""
        return self.B.shape[1]

    @property
    def neighbours(self) -> Tuple[int, ...]:
        """Sorted indices of the dynamic neighbours."""
        return tuple(sorted(self.couplings))

    def check_constraints(self, margin: float = ASSUMPTION_MARGIN) -> None:
        """Require compact X and U with the origin strictly inside.

        :param margin: clearance of the origin from every facet
        """
        for name, P in (("X", self.X), ("U", self.U)):
            if P is None:
                raise ValidationError(f"Subsystem {self.index} has no {name} set")
            if P.is_empty or not P.is_bounded:
                raise ValidationError(f"{name}_{self.index + 1} must be non-empty and bounded")
            if P.origin_margin() <= margin:
                raise ValidationError(f"{name}_{self.index + 1} must contain the origin in its interior")


class CoupledSystem(object):
    """Global plant ``x+ = A x + B u`` split into subsystems.

    The plant matrices are kept as given; :meth:`assemble` rebuilds them
    from the blocks.

    :param subsystems: subsystem models ordered by index
    :param A: global state matrix, assembled from the blocks if None
    :param B: global input matrix, assembled from the blocks if None
    """

    def __init__(
        self,
        subsystems: Sequence[SubsystemModel],
        A: Optional[ndarray] = None,
        B: Optional[ndarray] = None,
    ) -> None:
        self._subsystems = tuple(subsystems)
        if not self._subsystems:
            raise ValidationError("A coupled system needs at least one subsystem")
        for i, s in enumerate(self._subsystems):
            if s.index != i:
                raise ValidationError(f"Subsystem at position {i} has index {s.index}")
        self._state_offsets = np.concatenate([[0], np.cumsum([s.n for s in self._subsystems])]).astype(int)
        self._input_offsets = np.concatenate([[0], np.cumsum([s.m for s in self._subsystems])]).astype(int)
        for s in self._subsystems:
            for j, (A_ij, B_ij) in list(s.couplings.items()) + list(s.residuals.items()):
                if not 0 <= j < len(self._subsystems):
                    raise ValidationError(f"Subsystem {s.index} couples to unknown subsystem {j}")
                other = self._subsystems[j]
                if A_ij.shape != (s.n, other.n) or B_ij.shape != (s.n, other.m):
                    raise SizeMismatch(f"Coupling blocks {s.index}<-{j} have shapes {A_ij.shape}, {B_ij.shape}")
        assembled_A, assembled_B = self.assemble()
        self._A = assembled_A if A is None else as_matrix(A, "A")
        self._B = assembled_B if B is None else as_matrix(B, "B")
        if self._A.shape != (self.n, self.n) or self._B.shape != (self.n, self.m):
            raise SizeMismatch(f"Global matrices {self._A.shape}, {self._B.shape} do not match the partition")

    @property
    def subsystems(self) -> Tuple[SubsystemModel, ...]:
        """Subsystem models."""
        return self._subsystems

    def __len__(self) -> int:
        return len(self._subsystems)

    def __iter__(self) -> Iterator[SubsystemModel]:
        return iter(self._subsystems)

    def __getitem__(self, i: int) -> SubsystemModel:
        return self._subsystems[i]

    @property
    def n(self) -> int:
        """Global state dimension."""
        return int(self._state_offsets[-1])

    @property
    def m(self) -> int:
        """Global input dimension."""
        return int(self._input_offsets[-1])

    @property
    def A(self) -> ndarray:
        """Global state matrix of the plant."""
        return self._A

    @property
    def B(self) -> ndarray:
        """Global input matrix of the plant."""
        return self._B

    def state_slice(self, i: int) -> slice:
        """Slice of subsystem ``i`` in the global state.

        :param i: subsystem index
        """
        return slice(int(self._state_offsets[i]), int(self._state_offsets[i + 1]))

    def input_slice(self, i: int) -> slice:
        """Slice of subsystem ``i`` in the global input.

        :param i: subsystem index
        """
        return slice(int(self._input_offsets[i]), int(self._input_offsets[i + 1]))

    def split_state(self, x: ndarray) -> List[ndarray]:
        """Split a global state into local states.

        :param x: global state
        """
        x = self._check_vector(x, self.n, "state")
        return [x[self.state_slice(i)].copy() for i in range(len(self))]

    def split_input(self, u: ndarray) -> List[ndarray]:
        """Split a global input into local inputs.

        :param u: global input
        """
        u = self._check_vector(u, self.m, "input")
        return [u[self.input_slice(i)].copy() for i in range(len(self))]

    @staticmethod
    def _check_vector(v: ndarray, size: int, name: str) -> ndarray:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != size:
            raise SizeMismatch(f"Global {name} has size {v.size}, expected {size}")
        return v

    def neighbours(self, i: int) -> Tuple[int, ...]:
        """Dynamic neighbours of subsystem ``i``.

        :param i: subsystem index
        """
        return self._subsystems[i].neighbours

    def assemble(self) -> Tuple[ndarray, ndarray]:
        """Global (A, B) rebuilt from the local, coupling and residual blocks."""
        A = np.zeros((self.n, self.n))
        B = np.zeros((self.n, self.m))
        for s in self._subsystems:
            rows = self.state_slice(s.index)
            A[rows, self.state_slice(s.index)] = s.A
            B[rows, self.input_slice(s.index)] = s.B
            for j, (A_ij, B_ij) in list(s.couplings.items()) + list(s.residuals.items()):
                A[rows, self.state_slice(j)] = A_ij
                B[rows, self.input_slice(j)] = B_ij
        return A, B

    @cached_property
    def X(self) -> HPolytope:
        """Product of the local state sets."""
        return cartesian_product(*[s.X for s in self._subsystems])

    @cached_property
    def U(self) -> HPolytope:
        """Product of the local input sets."""
        return cartesian_product(*[s.U for s in self._subsystems])

    @property
    def residual_magnitude(self) -> float:
        """Largest entry of the couplings kept as residual disturbance."""
        values = [
            max(float(np.max(np.abs(A_ij), initial=0.0)), float(np.max(np.abs(B_ij), initial=0.0)))
            for s in self._subsystems
            for A_ij, B_ij in s.residuals.values()
        ]
        return max(values, default=0.0)

    def with_constraints(self, X_sets: Sequence[HPolytope], U_sets: Sequence[HPolytope]) -> "CoupledSystem":
        """Copy with new local constraint sets.

        :param X_sets: state sets per subsystem
        :param U_sets: input sets per subsystem
        """
        if len(X_sets) != len(self) or len(U_sets) != len(self):
            raise SizeMismatch(f"Need {len(self)} state and input sets")
        subsystems = [replace(s, X=X, U=U) for s, X, U in zip(self._subsystems, X_sets, U_sets)]
        return CoupledSystem(subsystems, self._A, self._B)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(subsystems={len(self)}, n={self.n}, m={self.m})"


def _is_zero(block: ndarray, tol: float = ZERO_BLOCK_TOL) -> bool:
    return block.size == 0 or bool(np.all(np.abs(block) <= tol))


def decompose(
    A_global: ndarray,
    B_global: ndarray,
    state_sizes: Sequence[int],
    input_sizes: Sequence[int],
    X_sets: Optional[Sequence[HPolytope]] = None,
    U_sets: Optional[Sequence[HPolytope]] = None,
    topology: Optional[Sequence[Sequence[int]]] = None,
) -> CoupledSystem:
    """Split a global plant into subsystems and find the neighbour sets.

    A block pair ``[A_ij B_ij]`` is a coupling iff some entry exceeds 1e-12 in
    magnitude. With ``topology`` only the listed neighbours count as couplings;
    the other non-zero blocks become residuals if they exceed 1e-9 and are
    otherwise ignored by the disturbance sets. The plant keeps every block.

    :param A_global: global state matrix
    :param B_global: global input matrix
    :param state_sizes: local state dimensions
    :param input_sizes: local input dimensions
    :param X_sets: local state sets
    :param U_sets: local input sets
    :param topology: allowed neighbours per subsystem
    """
    A_global = as_matrix(A_global, "A")
    B_global = as_matrix(B_global, "B")
    state_sizes = [int(v) for v in state_sizes]
    input_sizes = [int(v) for v in input_sizes]
    if len(state_sizes) != len(input_sizes) or not state_sizes:
        raise SizeMismatch("State and input partitions must have the same non-zero length")
    if any(v < 1 for v in state_sizes) or any(v < 0 for v in input_sizes):
        raise SizeMismatch("Partition sizes must be positive")
    n, m = sum(state_sizes), sum(input_sizes)
    if A_global.shape != (n, n) or B_global.shape != (n, m):
        raise SizeMismatch(f"Partition ({n}, {m}) does not match A {A_global.shape} and B {B_global.shape}")
    count = len(state_sizes)
    for name, sets in (("X_sets", X_sets), ("U_sets", U_sets), ("topology", topology)):
        if sets is not None and len(sets) != count:
            raise SizeMismatch(f"{name} has {len(sets)} entries for {count} subsystems")

    so = np.concatenate([[0], np.cumsum(state_sizes)]).astype(int)
    io = np.concatenate([[0], np.cumsum(input_sizes)]).astype(int)
    subsystems = []
    largest_residual = 0.0
    for i in range(count):
        rows = slice(so[i], so[i + 1])
        couplings: Dict[int, Block] = {}
        residuals: Dict[int, Block] = {}
        allowed = None if topology is None else set(topology[i])
        for j in range(count):
            if j == i:
                continue
            A_ij = A_global[rows, so[j] : so[j + 1]].copy()
            B_ij = B_global[rows, io[j] : io[j + 1]].copy()
            if _is_zero(A_ij) and _is_zero(B_ij):
                continue
            if allowed is None or j in allowed:
                couplings[j] = (A_ij, B_ij)
                continue
            magnitude = max(float(np.max(np.abs(A_ij), initial=0.0)), float(np.max(np.abs(B_ij), initial=0.0)))
            largest_residual = max(largest_residual, magnitude)
            if magnitude > RESIDUAL_TOL:
                residuals[j] = (A_ij, B_ij)
        subsystems.append(
            SubsystemModel(
                index=i,
                A=A_global[rows, rows].copy(),
                B=B_global[rows, io[i] : io[i + 1]].copy(),
                couplings=couplings,
                X=None if X_sets is None else X_sets[i],
                U=None if U_sets is None else U_sets[i],
                residuals=residuals,
            )
        )
    if topology is not None:
        if largest_residual > RESIDUAL_TOL:
            logger.warning(
                f"couplings outside the declared topology reach {largest_residual:.3e}; "
                "they are kept in the plant and treated as disturbance"
            )
        else:
            logger.info(f"couplings outside the declared topology are at most {largest_residual:.3e}, ignored")
    return CoupledSystem(subsystems, A_global, B_global)


def coupling_disturbance_set(sys: CoupledSystem, i: int) -> HPolytope:
    """``W_i``: the sum of ``A_ij X_j + B_ij U_j`` over neighbours and residual couplings.

    :param sys: coupled system with constraint sets
    :param i: subsystem index
    """
    s = sys[i]
    terms = []
    for j, (A_ij, B_ij) in list(s.couplings.items()) + list(s.residuals.items()):
        other = sys[j]
        if other.X is None or other.U is None:
            raise ValidationError(f"Subsystem {j} has no constraint sets")
        terms.append(linear_map(A_ij, other.X))
        if other.m:
            terms.append(linear_map(B_ij, other.U))
    return minkowski_sum_all(terms, s.n)


def step_true_plant(sys: CoupledSystem, x_global: ndarray, u_global: ndarray) -> ndarray:
    """One step of the global plant ``A x + B u``.

    :param sys: coupled system
    :param x_global: global state
    :param u_global: global input
    """
    x = CoupledSystem._check_vector(x_global, sys.n, "state")
    u = CoupledSystem._check_vector(u_global, sys.m, "input")
    return sys.A @ x + sys.B @ u


def chain_continuous(config: ModelConfig) -> Tuple[ndarray, ndarray]:
    """Continuous-time mass-spring-damper chain.

    Truck state is (position, velocity) relative to equilibrium and the
    input is the horizontal force, so ``m_i a_i = u_i + spring and damper forces``.

    :param config: chain parameters
    """
    count = config.count
    Ac = np.zeros((2 * count, 2 * count))
    Bc = np.zeros((2 * count, count))
    for i, mass in enumerate(config.masses):
        p, v = 2 * i, 2 * i + 1
        Ac[p, v] = 1.0
        Bc[v, i] = 1.0 / mass
    for link, (k, c) in enumerate(zip(config.springs, config.dampers)):
        for own, other in ((link, link + 1), (link + 1, link)):
            v = 2 * own + 1
            mass = config.masses[own]
            Ac[v, 2 * own] -= k / mass
            Ac[v, 2 * own + 1] -= c / mass
            Ac[v, 2 * other] += k / mass
            Ac[v, 2 * other + 1] += c / mass
    return Ac, Bc


def chain_constraints(config: ModelConfig) -> Tuple[List[HPolytope], List[HPolytope]]:
    """Local box constraints ``|p| <= p_max, |v| <= v_max, |u| <= u_max``.

    :param config: chain parameters
    """
    X_sets, U_sets = [], []
    for p, v, f in zip(config.bounds("position_bound"), config.bounds("velocity_bound"), config.bounds("force_bound")):
        X_sets.append(box_bounds([-p, -v], [p, v]))
        U_sets.append(box_bounds([-f], [f]))
    return X_sets, U_sets


def build_chain(config: ModelConfig) -> CoupledSystem:
    """ZOH-discretized truck chain decomposed into one subsystem per truck.

    Neighbours follow the continuous-time links; the fill-in the matrix
    exponential creates between distant trucks is kept as residual coupling.

    :param config: chain parameters
    """
    Ac, Bc = chain_continuous(config)
    Ad, Bd = zoh_discretize(Ac, Bc, config.Ts)
    count = config.count
    topology = [[j for j in (i - 1, i + 1) if 0 <= j < count] for i in range(count)]
    X_sets, U_sets = chain_constraints(config)
    logger.info(f"truck chain with {count} trucks discretized at Ts={config.Ts}")
    return decompose(Ad, Bd, [2] * count, [1] * count, X_sets, U_sets, topology=topology)


def build_four_trucks(Ts: float = 0.1) -> CoupledSystem:
    """The four-truck benchmark, equivalent to the shipped default config.

    :param Ts: sampling time, seconds
    """
    return build_chain(replace(ModelConfig.four_trucks(), Ts=Ts))
