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

"""Vertex and facet enumeration for polytopes of dimension at most three."""

from itertools import combinations, islice
from typing import Iterator, Sequence, Tuple

import numpy as np

from numpy import ndarray
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree

from chained_tube_mpc.errors import InfeasibleError, NumericalFailureError, UnsupportedError
from chained_tube_mpc.numkernel.solvers import solve_lp


MAX_EXACT_DIM = 3
VERTEX_TOL = 1e-9
RANK_TOL = 1e-10
DET_TOL = 1e-12
INTERIOR_TOL = 1e-9
_CHUNK = 50000


def check_dim(n: int) -> None:
    """Raise if exact vertex algorithms are requested in too high a dimension.

    :param n: ambient dimension
    """
    if n > MAX_EXACT_DIM:
        raise UnsupportedError(f"Exact vertex operations are limited to dimension {MAX_EXACT_DIM}, got {n}")


def cluster_labels(points: ndarray, tol: float) -> ndarray:
    """Label points so that any two closer than ``tol`` (max norm) share a label.

    Clusters are the connected components of the ``tol``-neighbour graph.

    :param points: k x n array, k >= 1
    :param tol: merge distance
    """
    k = points.shape[0]
    pairs = cKDTree(points).query_pairs(tol, p=np.inf, output_type="ndarray")
    graph = coo_matrix((np.ones(pairs.shape[0]), (pairs[:, 0], pairs[:, 1])), shape=(k, k))
    return connected_components(graph, directed=False)[1]


def unique_points(points: ndarray, tol: float = VERTEX_TOL) -> ndarray:
    """Keep the first point of every cluster of points closer than ``tol`` (max norm).

    :param points: k x n array
    :param tol: merge distance
    """
    if points.shape[0] <= 1:
        return points.reshape(-1, points.shape[1])
    _, first = np.unique(cluster_labels(points, tol), return_index=True)
    return points[np.sort(first)]


def _combination_chunks(m: int, n: int) -> Iterator[ndarray]:
    it = combinations(range(m), n)
    while True:
        chunk = list(islice(it, _CHUNK))
        if not chunk:
            return
        yield np.asarray(chunk, dtype=int)


def _vertices_by_subsets(A: ndarray, b: ndarray, tol: float) -> ndarray:
    """Solve every n-row subset and keep the feasible points.

    Only used for flat polytopes, which have few rows.
    """
    n = A.shape[1]
    found = []
    for chunk in _combination_chunks(A.shape[0], n):
        systems = A[chunk]
        rhs = b[chunk]
        regular = np.abs(np.linalg.det(systems)) > DET_TOL
        if not np.any(regular):
            continue
        points = np.linalg.solve(systems[regular], rhs[regular][..., None])[..., 0]
        feasible = np.all(points @ A.T <= b + tol, axis=1)
        if np.any(feasible):
            found.append(points[feasible])
    if not found:
        return np.zeros((0, n))
    return unique_points(np.vstack(found), tol)


def chebyshev_center(A: ndarray, b: ndarray, cap: float = 1.0) -> Tuple[ndarray, float]:
    """Center and radius (capped at ``cap``) of the largest ball inside ``A x <= b``.

    Raises :class:`InfeasibleError` for an empty polyhedron.

    :param A: constraint rows
    :param b: offsets
    :param cap: radius bound keeping the LP bounded
    """
    m, n = A.shape
    norms = np.linalg.norm(A, axis=1)
    rows = np.vstack([np.hstack([A, norms[:, None]]), np.eye(1, n + 1, n)])
    solution = solve_lp(np.eye(1, n + 1, n)[0], rows, np.append(b, cap))
    return solution.x[:n], float(solution.x[n])


def enumerate_vertices(A: ndarray, b: ndarray) -> ndarray:
    """Vertices of a bounded polyhedron; an empty result means it is empty.

    Full-dimensional sets go through a Qhull halfspace intersection around
    their Chebyshev center, flat ones through the ``n``-row subsets.

    :param A: unit-norm constraint rows
    :param b: offsets
    """
    m, n = A.shape
    check_dim(n)
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    tol = VERTEX_TOL * scale

    if n == 1:
        a = A[:, 0]
        upper = b[a > 0] / a[a > 0]
        lower = b[a < 0] / a[a < 0]
        if upper.size == 0 or lower.size == 0:
            return np.zeros((0, 1))
        hi, lo = float(np.min(upper)), float(np.max(lower))
        if lo > hi + tol:
            return np.zeros((0, 1))
        if hi - lo <= tol:
            return np.array([[(hi + lo) / 2]])
        return np.array([[lo], [hi]])

    try:
        center, radius = chebyshev_center(A, b, scale)
    except InfeasibleError:
        radius = -np.inf
    if radius <= INTERIOR_TOL * scale:
        return _vertices_by_subsets(A, b, tol)
    try:
        intersection = HalfspaceIntersection(np.hstack([A, -b[:, None]]), center)
    except (QhullError, ValueError) as e:
        raise NumericalFailureError(f"Halfspace intersection failed: {e}")
    points = intersection.intersections
    points = points[np.all(np.isfinite(points), axis=1)]
    return unique_points(points, tol)


def affine_frame(points: ndarray) -> Tuple[ndarray, ndarray, ndarray]:
    """Return (center, basis, normals) of the affine hull of a point cloud.

    ``basis`` spans the directions the cloud extends in, ``normals`` the
    orthogonal complement.

    :param points: k x n array, k >= 1
    """
    center = np.mean(points, axis=0)
    centered = points - center
    n = points.shape[1]
    if points.shape[0] == 1:
        return center, np.zeros((n, 0)), np.eye(n)
    _, singular, vt = np.linalg.svd(centered, full_matrices=centered.shape[0] < n)
    scale = max(1.0, float(np.max(np.abs(points))))
    rank = int(np.sum(singular > RANK_TOL * scale))
    return center, vt[:rank].T, vt[rank:].T


def affine_rank(points: ndarray) -> int:
    """Dimension of the affine hull of a point cloud.

    :param points: k x n array
    """
    if points.shape[0] == 0:
        return -1
    return affine_frame(points)[1].shape[1]


def _full_hull(points: ndarray) -> ConvexHull:
    try:
        return ConvexHull(points)
    except (QhullError, ValueError) as e:
        raise NumericalFailureError(f"Convex hull failed: {e}")


def extreme_points(points: ndarray) -> ndarray:
    """Reduce a point cloud to the vertices of its convex hull.

    :param points: k x n array, n <= 3
    """
    check_dim(points.shape[1])
    if points.shape[0] <= 1:
        return points
    center, basis, _ = affine_frame(points)
    r = basis.shape[1]
    if r == 0:
        return center[None, :]
    reduced = (points - center) @ basis
    if r == 1:
        return points[[int(np.argmin(reduced[:, 0])), int(np.argmax(reduced[:, 0]))]]
    hull = _full_hull(reduced)
    return unique_points(points[np.sort(hull.vertices)])


def hull_halfspaces(points: ndarray) -> Tuple[ndarray, ndarray]:
    """H-representation of the convex hull of a point cloud.

    Lower-dimensional clouds are hulled inside their affine hull and lifted
    back with a pair of opposite rows per missing direction.

    :param points: k x n array, k >= 1, n <= 3
    """
    n = points.shape[1]
    check_dim(n)
    center, basis, normals = affine_frame(points)
    r = basis.shape[1]
    rows, offsets = [], []

    if r == 1:
        t = (points - center) @ basis[:, 0]
        rows += [basis[:, 0], -basis[:, 0]]
        offsets += [float(np.max(t)) + basis[:, 0] @ center, float(np.max(-t)) - basis[:, 0] @ center]
    elif r >= 2:
        hull = _full_hull((points - center) @ basis)
        for equation in hull.equations:
            normal = basis @ equation[:-1]
            rows.append(normal)
            offsets.append(-equation[-1] + normal @ center)

    for k in range(normals.shape[1]):
        u = normals[:, k]
        rows += [u, -u]
        offsets += [u @ center, -(u @ center)]

    return np.asarray(rows, dtype=float).reshape(-1, n), np.asarray(offsets, dtype=float)


def counterclockwise(points: ndarray) -> ndarray:
    """Order planar points by angle around their centroid.

    :param points: k x 2 array
    """
    center = np.mean(points, axis=0)
    return points[np.argsort(np.arctan2(points[:, 1] - center[1], points[:, 0] - center[0]))]


def planar_sum(vertex_sets: Sequence[ndarray]) -> ndarray:
    """Vertices of the Minkowski sum of convex polygons.

    Every polygon is walked counterclockwise from its lowest (then leftmost)
    vertex; the sum starts at the sum of those vertices and follows all
    edges merged by angle, so the cost is one sort over all edges.

    :param vertex_sets: k_i x 2 point arrays, one per summand
    """
    start = np.zeros(2)
    edges = []
    for points in vertex_sets:
        ring = counterclockwise(extreme_points(np.asarray(points, dtype=float).reshape(-1, 2)))
        ring = np.roll(ring, -int(np.lexsort((ring[:, 0], ring[:, 1]))[0]), axis=0)
        start += ring[0]
        if ring.shape[0] > 1:
            edges.append(np.roll(ring, -1, axis=0) - ring)
    if not edges:
        return start[None, :]
    edges = np.vstack(edges)
    angles = np.mod(np.arctan2(edges[:, 1], edges[:, 0]), 2 * np.pi)
    path = start + np.cumsum(edges[np.argsort(angles, kind="stable")], axis=0)
    return extreme_points(np.vstack([start, path]))
