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

"""Invariant set algorithms for ``x+ = A_cl x + w``."""

import logging

from typing import Optional

import numpy as np

from numpy import ndarray

from chained_tube_mpc.errors import (
    DimensionMismatch,
    EmptySetError,
    IterationLimitError,
    NotSchurError,
    NumericalFailureError,
    UnboundedError,
    ValidationError,
)
from chained_tube_mpc.geometry._hull import check_dim, counterclockwise, extreme_points, planar_sum
from chained_tube_mpc.geometry.polytope import (
    HPolytope,
    box,
    from_points,
    intersect,
    is_subset,
    linear_map,
    minkowski_sum,
    origin,
    pontryagin_diff,
    preimage,
    supports,
)
from chained_tube_mpc.numkernel.linalg import SCHUR_MARGIN, as_matrix, is_schur, spectral_radius


logger = logging.getLogger(__name__)

RPI_MAX_ITER = 500
INVARIANT_MAX_ITER = 200
ORIGIN_MARGIN = 1e-12
ZERO_SET_TOL = 1e-12
INVARIANCE_TOL = 1e-9
RPI_CHECK_TOL = 1e-8
SIMPLIFY_ABOVE = 256
SIMPLIFY_ROUNDS = 6


def _check_system(A_cl: ndarray, P: HPolytope) -> ndarray:
    A_cl = as_matrix(A_cl, "A_cl")
    if A_cl.shape != (P.dim, P.dim):
        raise DimensionMismatch(f"Closed loop {A_cl.shape} does not act on a {P.dim}-dimensional set")
    if not is_schur(A_cl, SCHUR_MARGIN):
        raise NotSchurError(f"Closed loop is not Schur, spectral radius {spectral_radius(A_cl):.12g}")
    return A_cl


def _decimate(ring: ndarray, tol: float) -> ndarray:
    """Drop vertices of a counterclockwise convex polygon that lie within ``tol`` of the chord replacing them.

    The kept vertices span an inner polygon whose ``tol`` neighbourhood covers the input.
    """
    k = ring.shape[0]
    closed = np.vstack([ring, ring[:1]])

    def fits(i: int, j: int) -> bool:
        inside = closed[i + 1 : j] - closed[i]
        if inside.shape[0] == 0:
            return True
        chord = closed[j] - closed[i]
        t = np.clip(inside @ chord / (chord @ chord), 0.0, 1.0)
        return bool(np.max(np.linalg.norm(inside - t[:, None] * chord, axis=1)) <= tol)

    kept = [0]
    i = 0
    while i < k:
        step = 1
        while i + 2 * step <= k and fits(i, i + 2 * step):
            step *= 2
        lo, hi = i + step, min(i + 2 * step, k + 1)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if fits(i, mid):
                lo = mid
            else:
                hi = mid
        i = lo
        kept.append(i)
    # the last kept index is k, the first vertex again
    return ring[kept[:-1]]


def _simplified(exact: HPolytope, A_cl: ndarray, W: HPolytope, alpha: float, eps: float) -> Optional[HPolytope]:
    """Invariant outer bound of ``F_s / (1 - alpha)`` with fewer vertices, or None.

    The decimated ``F_s`` grown by ``box(0, tol)`` overshoots ``F_s`` by at
    most ``gamma W`` along every row mapped by ``A_cl^T``; scaling it by
    ``1 / (1 - alpha - gamma)`` makes it robustly invariant. ``tol`` shrinks
    until the supports exceed those of ``F_s`` by at most ``eps``.
    """
    ring = counterclockwise(exact.vertices)
    axes = np.vstack([np.eye(2), -np.eye(2)])
    for tol in eps * 0.25 ** np.arange(1, SIMPLIFY_ROUNDS + 1):
        inner = _decimate(ring, tol)
        if 2 * inner.shape[0] >= ring.shape[0]:
            return None
        bound = from_points(planar_sum([inner, box(np.zeros(2), tol).vertices]))
        mapped = bound.A @ A_cl
        overshoot = (supports(bound, mapped) - supports(exact, mapped)) / supports(W, bound.A)
        gamma = max(0.0, float(np.max(overshoot)))
        if alpha + gamma >= 1:
            continue
        factor = 1.0 / (1.0 - alpha - gamma)
        inflation = max(
            float(np.max(factor * supports(bound, exact.A) - exact.b)),
            float(np.max(factor * bound.b - supports(exact, bound.A))),
            float(np.max(factor * supports(bound, axes) - supports(exact, axes))),
        )
        logger.debug(f"RPI simplification: tol={tol:.1e}, {inner.shape[0]} of {ring.shape[0]} vertices, gamma={gamma:.3e}")
        if inflation <= eps:
            return bound.scale(factor)
    return None


def rpi_outer_approx(A_cl: ndarray, W: HPolytope, eps: float, max_iter: int = RPI_MAX_ITER) -> HPolytope:
    """Epsilon outer approximation of the minimal robust positively invariant set.

    Finds the smallest ``s`` with ``A_cl^s W`` inside ``alpha W`` such that
    scaling ``F_s = W + A_cl W + ... + A_cl^(s-1) W`` by ``1 / (1 - alpha)``
    inflates its supports by at most ``eps / 2``. In the plane a set with
    many vertices is replaced by a decimated invariant outer bound whose
    supports stay within ``eps`` of ``F_s``; otherwise the scaled ``F_s`` is
    returned.
    ``W = {0}`` gives ``{0}``; a ``W`` without the origin in its interior is
    replaced by ``W + box(0, eps)``.

    :param A_cl: Schur closed-loop matrix
    :param W: bounded disturbance set containing the origin
    :param eps: approximation tolerance
    :param max_iter: cap on ``s``
    """
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    A_cl = _check_system(A_cl, W)
    if W.is_empty:
        raise EmptySetError("Disturbance set is empty")
    if not W.is_bounded:
        raise UnboundedError("Disturbance set is unbounded")
    n = W.dim
    check_dim(n)

    if np.max(np.abs(W.vertices)) <= ZERO_SET_TOL:
        logger.debug("zero disturbance, invariant set is the origin")
        return origin(n)

    W_used = W.canonicalize()
    if W_used.origin_margin() <= ORIGIN_MARGIN:
        logger.debug("origin not interior to the disturbance set, inflating by eps")
        W_used = minkowski_sum(W_used, box(np.zeros(n), eps))
        if W_used.origin_margin() <= ORIGIN_MARGIN:
            raise ValidationError("Disturbance set must contain the origin")

    V = W_used.vertices
    axes = np.vstack([np.eye(n), -np.eye(n)])
    power = np.eye(n)
    spread = np.zeros(2 * n)
    alpha = np.inf
    for s in range(1, max_iter + 1):
        spread += np.max(axes @ power @ V.T, axis=1)
        power = A_cl @ power
        alpha = float(np.max(np.max(W_used.A @ power @ V.T, axis=1) / W_used.b))
        if alpha < 1 and alpha / (1 - alpha) * float(np.max(spread)) <= eps / 2:
            break
    else:
        raise IterationLimitError(f"RPI approximation needs more than {max_iter} terms (alpha={alpha:.3e})", partial=s)
    logger.debug(f"RPI approximation: s={s}, alpha={alpha:.3e}")

    images = [V]
    for _ in range(1, s):
        images.append(images[-1] @ A_cl.T)
    if n == 2:
        cloud = planar_sum(images)
    else:
        cloud = V
        for image in images[1:]:
            cloud = extreme_points((cloud[:, None, :] + image[None, :, :]).reshape(-1, n))
    exact = from_points(cloud)
    Z = None
    if n == 2 and exact.vertices.shape[0] > SIMPLIFY_ABOVE:
        Z = _simplified(exact, A_cl, W_used, alpha, eps)
    if Z is None:
        Z = exact.scale(1.0 / (1.0 - alpha))

    if not is_subset(minkowski_sum(linear_map(A_cl, Z), W), Z, -RPI_CHECK_TOL):
        raise NumericalFailureError("RPI approximation failed its a posteriori invariance check")
    return Z


def _row_margin(P: HPolytope, A: ndarray, b: ndarray) -> float:
    """``min (b_i - support(P, a_i)) / |a_i|`` over the non-zero rows."""
    norms = np.linalg.norm(A, axis=1)
    nonzero = norms > 1e-14
    if np.any(b[~nonzero] < -INVARIANCE_TOL):
        return -np.inf
    if not np.any(nonzero):
        return np.inf
    A, b, norms = A[nonzero], b[nonzero], norms[nonzero]
    return float(np.min((b - supports(P, A)) / norms))


def max_robust_invariant(
    A_cl: ndarray,
    X: HPolytope,
    D: Optional[HPolytope] = None,
    iter_cap: int = INVARIANT_MAX_ITER,
) -> HPolytope:
    """Largest subset of X that is robustly invariant for ``x+ = A_cl x + d``, ``d`` in D.

    Iterates ``O_{k+1} = O_k cap {x : A_cl x in O_k - D}`` from ``O_0 = X``
    and stops once the new constraints are implied by ``O_k`` within 1e-9.
    May return the empty set when the disturbance is too large.

    :param A_cl: Schur closed-loop matrix
    :param X: constraint set
    :param D: disturbance set, None for the disturbance-free case
    :param iter_cap: iteration cap
    """
    A_cl = _check_system(A_cl, X)
    if X.is_empty:
        raise EmptySetError("Constraint set is empty")
    if D is not None and D.dim != X.dim:
        raise DimensionMismatch(f"Disturbance of dimension {D.dim} for a {X.dim}-dimensional set")

    omega = X.canonicalize()
    for k in range(iter_cap):
        target = omega if D is None else pontryagin_diff(omega, D)
        if target.is_empty:
            logger.debug(f"robust invariant iteration emptied at step {k}")
            return HPolytope.empty(X.dim)
        step = preimage(A_cl, target)
        if _row_margin(omega, step.A, step.b) >= -INVARIANCE_TOL:
            logger.debug(f"invariant set found after {k} iterations, {omega.n_rows} rows")
            return omega
        omega = intersect(omega, step)
        if omega.is_empty:
            return omega
    raise IterationLimitError(f"Invariant set iteration did not converge in {iter_cap} steps", partial=omega)


def max_admissible_invariant(A_cl: ndarray, X: HPolytope, iter_cap: int = INVARIANT_MAX_ITER) -> HPolytope:
    """Maximal positively invariant subset of X for ``x+ = A_cl x``.

    On hitting the cap an :class:`IterationLimitError` carries the last,
    not yet invariant, iterate as ``partial``.

    :param A_cl: Schur closed-loop matrix
    :param X: bounded constraint set with the origin inside
    :param iter_cap: iteration cap
    """
    return max_robust_invariant(A_cl, X, None, iter_cap)
