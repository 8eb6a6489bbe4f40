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

import logging

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg as sla

from numpy import ndarray

from chained_tube_mpc.errors import (
    IterationLimitError,
    NotSchurError,
    NotStabilizableError,
    NumericalFailureError,
    ValidationError,
)


logger = logging.getLogger(__name__)

SCHUR_MARGIN = 1e-9
RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 10000
DIVERGENCE_NORM = 1e12


@dataclass(frozen=True)
class LqrResult:
    """Discrete LQR gain and cost-to-go.

    :param K: feedback gain, u = K x
    :param P: cost-to-go matrix
    """

    K: ndarray
    P: ndarray


def as_matrix(value: object, name: str = "matrix") -> ndarray:
    """Convert scalars and nested sequences to a finite 2-D float array.

    :param value: scalar, vector or matrix
    :param name: name used in error messages
    """
    arr = np.array(value, dtype=float, ndmin=2)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def spectral_radius(A: ndarray) -> float:
    """Return the largest eigenvalue modulus of a square matrix.

    :param A: square matrix
    """
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValidationError(f"spectral radius needs a square matrix, got {A.shape}")
    try:
        return float(np.max(np.abs(np.linalg.eigvals(A))))
    except np.linalg.LinAlgError as e:
        raise NumericalFailureError(f"Eigenvalue computation failed: {e}")


def is_schur(A: ndarray, margin: float = SCHUR_MARGIN) -> bool:
    """Check that the spectral radius is below ``1 - margin``.

    :param A: square matrix
    :param margin: distance kept from the unit circle
    """
    return spectral_radius(A) < 1.0 - margin


def zoh_discretize(Ac: ndarray, Bc: ndarray, Ts: float) -> Tuple[ndarray, ndarray]:
    """Exact zero-order-hold discretization.

    Exponentiates the augmented matrix ``[[Ac, Bc], [0, 0]] * Ts``; the upper
    blocks of the result are ``(Ad, Bd)``.

    :param Ac: continuous state matrix
    :param Bc: continuous input matrix
    :param Ts: sampling time, seconds
    """
    Ac = as_matrix(Ac, "Ac")
    Bc = as_matrix(Bc, "Bc")
    if Ts <= 0:
        raise ValidationError(f"Sampling time must be positive, got {Ts}")
    n, m = Bc.shape
    if Ac.shape != (n, n):
        raise ValidationError(f"Ac shape {Ac.shape} does not match Bc shape {Bc.shape}")

    augmented = np.zeros((n + m, n + m))
    augmented[:n, :n] = Ac
    augmented[:n, n:] = Bc
    try:
        expm = sla.expm(augmented * Ts)
    except (ValueError, np.linalg.LinAlgError) as e:
        raise NumericalFailureError(f"Matrix exponential failed: {e}")
    if not np.all(np.isfinite(expm)):
        raise NumericalFailureError("Matrix exponential overflowed")
    return expm[:n, :n], expm[:n, n:]


def _riccati_step(P: ndarray, A: ndarray, B: ndarray, Q: ndarray, R: ndarray) -> ndarray:
    BtP = B.T @ P
    gain = np.linalg.solve(R + BtP @ B, BtP @ A)
    P_next = Q + A.T @ P @ A - A.T @ P @ B @ gain
    return (P_next + P_next.T) / 2


def _riccati_iterate(P: ndarray, A: ndarray, B: ndarray, Q: ndarray, R: ndarray, max_iter: int) -> ndarray:
    for iteration in range(max_iter):
        P_next = _riccati_step(P, A, B, Q, R)
        if not np.all(np.isfinite(P_next)) or np.max(np.abs(P_next)) > DIVERGENCE_NORM:
            raise NotStabilizableError(f"Riccati iteration diverged after {iteration} iterations")
        if np.max(np.abs(P_next - P)) < RICCATI_TOL:
            return P_next
        P = P_next
    raise IterationLimitError(f"Riccati iteration did not converge in {max_iter} iterations", partial=P)


def dlqr(A: ndarray, B: ndarray, Q: ndarray, R: ndarray) -> LqrResult:
    """Infinite horizon discrete LQR in the ``u = K x`` convention.

    The algebraic Riccati solution is polished by the Riccati fixed-point
    iteration until successive iterates agree to 1e-12; if the algebraic
    solver fails the iteration starts from ``Q``.

    :param A: state matrix
    :param B: input matrix
    :param Q: state weight, positive semidefinite
    :param R: input weight, positive definite
    """
    A, B, Q, R = (as_matrix(v, name) for v, name in ((A, "A"), (B, "B"), (Q, "Q"), (R, "R")))
    n, m = B.shape
    if A.shape != (n, n) or Q.shape != (n, n) or R.shape != (m, m):
        raise ValidationError(f"Inconsistent LQR data: A{A.shape} B{B.shape} Q{Q.shape} R{R.shape}")
    if np.min(np.linalg.eigvalsh((R + R.T) / 2)) <= 0:
        raise ValidationError("R must be positive definite")

    try:
        start = sla.solve_discrete_are(A, B, Q, R)
    except (ValueError, np.linalg.LinAlgError) as e:
        logger.debug(f"algebraic Riccati solver failed ({e}), iterating from Q")
        start = Q.copy()
    if not np.all(np.isfinite(start)):
        start = Q.copy()

    P = _riccati_iterate(start, A, B, Q, R, RICCATI_MAX_ITER)
    K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    if not is_schur(A + B @ K, 0.0):
        raise NotStabilizableError("Riccati fixed point does not stabilize (A, B)")
    return LqrResult(K=K, P=P)


def dlyap(A_cl: ndarray, Q: ndarray) -> ndarray:
    """Solve ``P = A_cl' P A_cl + Q``.

    :param A_cl: Schur matrix
    :param Q: positive semidefinite weight
    """
    A_cl = as_matrix(A_cl, "A_cl")
    Q = as_matrix(Q, "Q")
    if not is_schur(A_cl):
        raise NotSchurError(f"Lyapunov equation needs a Schur matrix, spectral radius {spectral_radius(A_cl)}")
    try:
        P = sla.solve_discrete_lyapunov(A_cl.T, Q)
    except (ValueError, np.linalg.LinAlgError) as e:
        raise NumericalFailureError(f"Lyapunov solver failed: {e}")
    return (P + P.T) / 2
