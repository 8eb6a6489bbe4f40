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

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from numpy import ndarray

from chained_tube_mpc.errors import InvariantViolation, MissingBroadcast, SizeMismatch
from chained_tube_mpc.model import SubsystemModel


DYNAMICS_TOL = 1e-9
SHIFT_TOL = 1e-8


def _as_rows(values: ndarray, width: int, name: str) -> ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return np.zeros((0, width))
    arr = arr.reshape(-1, width) if arr.ndim == 1 and width else arr
    if arr.ndim != 2 or arr.shape[1] != width:
        raise SizeMismatch(f"{name} must have {width} columns, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class NominalTrajectory(object):
    """Nominal state and input sequences ``x_t..x_t+N``, ``u_t..u_t+N-1``.

    :param states: (N + 1) x n array
    :param inputs: N x m array
    :param owner: subsystem index
    :param stamp: time step the trajectory starts at
    :param cost: optimal value of the problem that produced it, if any
    """

    states: ndarray
    inputs: ndarray
    owner: int
    stamp: int
    cost: Optional[float] = None

    def __post_init__(self) -> None:
        """Freeze the arrays and check the lengths."""
        states = np.array(self.states, dtype=float, ndmin=2)
        inputs = np.array(self.inputs, dtype=float)
        if inputs.ndim == 1:
            steps = max(states.shape[0] - 1, 0)
            inputs = inputs.reshape(steps, -1) if inputs.size else np.zeros((steps, 0))
        if states.shape[0] != inputs.shape[0] + 1:
            raise SizeMismatch(f"{states.shape[0]} states do not match {inputs.shape[0]} inputs")
        states.setflags(write=False)
        inputs.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    @property
    def horizon(self) -> int:
        """Number of steps N."""
        return self.inputs.shape[0]

    @property
    def n(self) -> int:
        """State dimension."""
        return self.states.shape[1]

    @property
    def m(self) -> int:
        """Input dimension."""
        return self.inputs.shape[1]

    @property
    def initial_state(self) -> ndarray:
        """``x_t``."""
        return self.states[0]

    @property
    def first_input(self) -> ndarray:
        """``u_t``."""
        return self.inputs[0]

    @property
    def terminal_state(self) -> ndarray:
        """``x_t+N``."""
        return self.states[-1]

    def dynamics_error(self, A: ndarray, B: ndarray, d_seq: Optional[ndarray] = None) -> float:
        """Largest mismatch of ``x_k+1 = A x_k + B u_k (+ d_k)``.

        :param A: state matrix
        :param B: input matrix
        :param d_seq: known disturbance per step
        """
        predicted = self.states[:-1] @ A.T + self.inputs @ B.T
        if d_seq is not None:
            predicted = predicted + d_seq
        if not predicted.size:
            return 0.0
        return float(np.max(np.abs(predicted - self.states[1:])))

    @classmethod
    def zeros(cls, owner: int, stamp: int, n: int, m: int, N: int) -> "NominalTrajectory":
        """The equilibrium trajectory.

        :param owner: subsystem index
        :param stamp: time step
        :param n: state dimension
        :param m: input dimension
        :param N: horizon
        """
        return cls(np.zeros((N + 1, n)), np.zeros((N, m)), owner, stamp, 0.0)


@dataclass(frozen=True, eq=False)
class DisturbancePreview(object):
    """Known coupling ``d_k = sum_j A_ij x_j,k + B_ij u_j,k`` over the horizon.

    :param d_seq: N x n array
    :param owner: receiving subsystem
    :param stamp: time step of the broadcasts it was built from
    """

    d_seq: ndarray
    owner: int
    stamp: int

    def __post_init__(self) -> None:
        """Freeze the sequence."""
        d_seq = np.array(self.d_seq, dtype=float, ndmin=2)
        d_seq.setflags(write=False)
        object.__setattr__(self, "d_seq", d_seq)

    @property
    def horizon(self) -> int:
        """Number of steps N."""
        return self.d_seq.shape[0]


def rollout(A: ndarray, B: ndarray, x0: ndarray, inputs: ndarray, d_seq: Optional[ndarray] = None) -> ndarray:
    """States of ``x_k+1 = A x_k + B u_k (+ d_k)`` from ``x0``.

    :param A: state matrix
    :param B: input matrix
    :param x0: initial state
    :param inputs: N x m inputs
    :param d_seq: N x n known disturbance
    """
    inputs = np.asarray(inputs, dtype=float).reshape(-1, B.shape[1])
    states = np.zeros((inputs.shape[0] + 1, A.shape[0]))
    states[0] = np.asarray(x0, dtype=float).reshape(-1)
    for k, u in enumerate(inputs):
        states[k + 1] = A @ states[k] + B @ u
        if d_seq is not None:
            states[k + 1] += d_seq[k]
    return states


def shift_inner(prev: NominalTrajectory, model: SubsystemModel, K_T: ndarray, XF_hat) -> NominalTrajectory:
    """Drop the first step and append the terminal feedback step.

    The new last input is ``K_T x_N`` and the new last state ``(A + B K_T) x_N``,
    so the shifted trajectory stays consistent with the nominal dynamics.

    :param prev: trajectory stamped ``t``
    :param model: owning subsystem
    :param K_T: inner tube gain
    :param XF_hat: inner terminal set
    """
    x_N = prev.terminal_state
    violation = XF_hat.violation(x_N)
    if violation > SHIFT_TOL:
        raise InvariantViolation(
            f"Terminal state of subsystem {prev.owner + 1} at t={prev.stamp} leaves the inner terminal set by {violation:.3e}"
        )
    u_N = K_T @ x_N
    states = np.vstack([prev.states[1:], (model.A + model.B @ K_T) @ x_N])
    inputs = np.vstack([prev.inputs[1:], u_N])
    return NominalTrajectory(states, inputs, prev.owner, prev.stamp + 1)


def preview_disturbance(
    i: int,
    model: SubsystemModel,
    broadcasts: Mapping[int, NominalTrajectory],
    stamp: Optional[int] = None,
) -> DisturbancePreview:
    """Sum the neighbours' broadcast references through the coupling blocks.

    Neighbours are visited in increasing index so the result does not
    depend on the order broadcasts arrived in.

    :param i: receiving subsystem
    :param model: receiving subsystem model
    :param broadcasts: neighbour index to its inner reference
    :param stamp: required stamp, defaults to the stamp of the broadcasts
    """
    N = None
    d_seq = None
    for j in model.neighbours:
        if j not in broadcasts:
            raise MissingBroadcast(j, f"Subsystem {i + 1} has no broadcast from neighbour {j + 1}")
        ref = broadcasts[j]
        if stamp is None:
            stamp = ref.stamp
        if ref.stamp != stamp:
            raise MissingBroadcast(j, f"Broadcast from {j + 1} is stamped {ref.stamp}, expected {stamp}")
        if N is None:
            N = ref.horizon
            d_seq = np.zeros((N, model.n))
        elif ref.horizon != N:
            raise SizeMismatch(f"Broadcast from {j + 1} has horizon {ref.horizon}, expected {N}")
        A_ij, B_ij = model.couplings[j]
        d_seq = d_seq + ref.states[:-1] @ A_ij.T + ref.inputs @ B_ij.T
    if d_seq is None:
        d_seq = np.zeros((0, model.n))
    return DisturbancePreview(d_seq, i, -1 if stamp is None else stamp)


def evaluate_cost(
    states: ndarray,
    inputs: ndarray,
    Q: ndarray,
    R: ndarray,
    P: Optional[ndarray] = None,
) -> float:
    """``sum_k |x_k|_Q^2 + |u_k|_R^2`` plus ``|x_N|_P^2`` when P is given.

    With P the states must be one longer than the inputs. Without P the
    stage sum runs over the inputs and a trailing state is ignored.

    :param states: K x n or (K + 1) x n
    :param inputs: K x m
    :param Q: state weight
    :param R: input weight
    :param P: terminal weight
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    states = _as_rows(states, Q.shape[0], "states")
    inputs = _as_rows(inputs, R.shape[0], "inputs")
    K = inputs.shape[0]
    if P is not None and states.shape[0] != K + 1:
        raise SizeMismatch(f"{states.shape[0]} states and {K} inputs with a terminal weight")
    if P is None and states.shape[0] not in (K, K + 1):
        raise SizeMismatch(f"{states.shape[0]} states do not match {K} inputs")
    stage = states[:K]
    cost = float(np.einsum("ki,ij,kj->", stage, Q, stage)) + float(np.einsum("ki,ij,kj->", inputs, R, inputs))
    if P is not None:
        x_N = states[-1]
        cost += float(x_N @ np.atleast_2d(P) @ x_N)
    return cost
