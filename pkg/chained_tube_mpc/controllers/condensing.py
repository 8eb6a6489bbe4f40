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

"""Condensed MPC problems: states eliminated through the dynamics.

Decision vector ``z = (x_0, u_0, ..., u_N-1)``; every predicted state is
the affine function ``x_k = S_k z + s_k`` of it.
"""

from typing import List, Optional, Tuple

import numpy as np

from numpy import ndarray
from scipy.linalg import block_diag

from chained_tube_mpc.geometry import HPolytope
from chained_tube_mpc.numkernel import QpProblem, QpSolution, solve_qp


EQUALITY_TOL = 1e-12


class Prediction(object):
    """Affine maps from the decision vector to predicted states and inputs.

    :param A: state matrix
    :param B: input matrix
    :param N: horizon
    :param d_seq: known additive disturbance per step, N x n
    """

    def __init__(self, A: ndarray, B: ndarray, N: int, d_seq: Optional[ndarray] = None) -> None:
        n, m = B.shape
        self.n, self.m, self.N = n, m, N
        self.size = n + m * N
        self.S = np.zeros((N + 1, n, self.size))
        self.s = np.zeros((N + 1, n))
        self.S[0, :, :n] = np.eye(n)
        for k in range(N):
            self.S[k + 1] = A @ self.S[k]
            self.S[k + 1, :, n + k * m : n + (k + 1) * m] += B
            self.s[k + 1] = A @ self.s[k]
            if d_seq is not None and len(d_seq):
                self.s[k + 1] += d_seq[k]

    def input_selector(self, k: int) -> ndarray:
        """Rows picking ``u_k`` out of the decision vector.

        :param k: step
        """
        E = np.zeros((self.m, self.size))
        E[:, self.n + k * self.m : self.n + (k + 1) * self.m] = np.eye(self.m)
        return E

    def split(self, z: ndarray) -> Tuple[ndarray, ndarray]:
        """Return (states, inputs) of a decision vector.

        :param z: decision vector
        """
        states = self.S @ z + self.s
        inputs = z[self.n :].reshape(self.N, self.m)
        return states, inputs

    def pack(self, x0: ndarray, inputs: ndarray) -> ndarray:
        """Decision vector of an initial state and an input sequence.

        :param x0: initial state
        :param inputs: N x m inputs
        """
        return np.concatenate([np.asarray(x0, dtype=float).reshape(-1), np.asarray(inputs, dtype=float).reshape(-1)])


class CondensedProblem(object):
    """Builder of ``min z' H z / 2 + f' z`` with polyhedral constraints on states and inputs.

    :param prediction: prediction model
    :param Q: stage state weight
    :param R: stage input weight
    :param P: terminal weight
    """

    def __init__(self, prediction: Prediction, Q: ndarray, R: ndarray, P: ndarray) -> None:
        self.prediction = prediction
        N = prediction.N
        S, s = prediction.S, prediction.s
        Q_bar = block_diag(*([Q] * N + [P]))
        S_all = S.reshape(-1, prediction.size)
        s_all = s.reshape(-1)
        E = np.vstack([prediction.input_selector(k) for k in range(N)]) if N else np.zeros((0, prediction.size))
        R_bar = block_diag(*([R] * N)) if N else np.zeros((0, 0))
        H = 2 * (S_all.T @ Q_bar @ S_all + E.T @ R_bar @ E)
        self.H = (H + H.T) / 2
        self.f = 2 * S_all.T @ Q_bar @ s_all
        self.constant = float(s_all @ Q_bar @ s_all)
        self._rows: List[ndarray] = []
        self._offsets: List[ndarray] = []
        self._eq_rows: List[ndarray] = []
        self._eq_offsets: List[ndarray] = []

    def _add(self, A: ndarray, b: ndarray) -> None:
        """Add ``A z <= b``, turning opposite row pairs of zero width into equalities."""
        A_eq, b_eq, keep = _extract_equalities(A, b)
        if A_eq.shape[0]:
            self._eq_rows.append(A_eq)
            self._eq_offsets.append(b_eq)
        if np.any(keep):
            self._rows.append(A[keep])
            self._offsets.append(b[keep])

    def state_in(self, k: int, P: HPolytope, offset: Optional[ndarray] = None) -> None:
        """Constrain ``x_k - offset`` to P.

        :param k: step
        :param P: polytope
        :param offset: reference subtracted from the state
        """
        pred = self.prediction
        rhs = P.b - P.A @ pred.s[k]
        if offset is not None:
            rhs = rhs + P.A @ offset
        self._add(P.A @ pred.S[k], rhs)

    def input_in(self, k: int, P: HPolytope) -> None:
        """Constrain ``u_k`` to P.

        :param k: step
        :param P: polytope
        """
        self._add(P.A @ self.prediction.input_selector(k), P.b)

    def initial_error_in(self, x: ndarray, P: HPolytope) -> None:
        """Constrain ``x - x_0`` to P.

        :param x: measured state
        :param P: tube cross-section
        """
        pred = self.prediction
        selector = pred.S[0]
        self._add(-P.A @ selector, P.b - P.A @ x)

    def fix_initial(self, x: ndarray) -> None:
        """Require ``x_0 = x``.

        :param x: measured state
        """
        self._eq_rows.append(self.prediction.S[0])
        self._eq_offsets.append(np.asarray(x, dtype=float).reshape(-1))

    def qp(self) -> QpProblem:
        """Assemble the quadratic program."""
        size = self.prediction.size
        A_in = np.vstack(self._rows) if self._rows else np.zeros((0, size))
        b_in = np.concatenate(self._offsets) if self._offsets else np.zeros(0)
        A_eq = np.vstack(self._eq_rows) if self._eq_rows else np.zeros((0, size))
        b_eq = np.concatenate(self._eq_offsets) if self._eq_offsets else np.zeros(0)
        return QpProblem(self.H, self.f, A_in, b_in, A_eq, b_eq)

    def solve(self) -> Tuple[ndarray, ndarray, float, QpSolution]:
        """Solve and return (states, inputs, cost, solution).

        Raises :class:`~chained_tube_mpc.errors.InfeasibleError` from the solver.
        """
        solution = solve_qp(self.qp())
        states, inputs = self.prediction.split(solution.x)
        return states, inputs, solution.value + self.constant, solution

    def value(self, z: ndarray) -> float:
        """Cost of a decision vector.

        :param z: decision vector
        """
        return float(0.5 * z @ self.H @ z + self.f @ z + self.constant)


def _extract_equalities(A: ndarray, b: ndarray) -> Tuple[ndarray, ndarray, ndarray]:
    """Find pairs ``a z <= beta``, ``-a z <= -beta`` and return them as equalities.

    Returns (A_eq, b_eq, mask of the rows kept as inequalities).
    """
    keep = np.ones(A.shape[0], dtype=bool)
    eq_rows, eq_offsets = [], []
    norms = np.linalg.norm(A, axis=1)
    for i in range(A.shape[0]):
        if not keep[i] or norms[i] == 0:
            continue
        for j in range(i + 1, A.shape[0]):
            if not keep[j]:
                continue
            scale = max(norms[i], 1.0)
            if np.max(np.abs(A[i] + A[j])) <= EQUALITY_TOL * scale and abs(b[i] + b[j]) <= EQUALITY_TOL * scale:
                keep[i] = keep[j] = False
                eq_rows.append(A[i])
                eq_offsets.append(b[i])
                break
    n = A.shape[1]
    return np.asarray(eq_rows, dtype=float).reshape(-1, n), np.asarray(eq_offsets, dtype=float), keep
