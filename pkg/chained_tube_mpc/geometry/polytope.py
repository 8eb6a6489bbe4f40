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

from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from numpy import ndarray

from chained_tube_mpc.errors import (
    DimensionMismatch,
    EmptySetError,
    InfeasibleError,
    UnboundedError,
    ValidationError,
)
from chained_tube_mpc.geometry._hull import (
    MAX_EXACT_DIM,
    VERTEX_TOL,
    affine_rank,
    check_dim,
    cluster_labels,
    enumerate_vertices,
    extreme_points,
    hull_halfspaces,
    planar_sum,
)
from chained_tube_mpc.numkernel.solvers import solve_lp


logger = logging.getLogger(__name__)

ZERO_ROW_TOL = 1e-14
PARALLEL_TOL = 1e-12
REDUNDANCY_TOL = 1e-12
SUPPORT_CHUNK = 1 << 22

Vector = Union[Sequence[float], ndarray]


class HPolytope(object):
    """Convex polyhedron ``{x : A x <= b}``.

    Instances are immutable. Derived data (canonical form, vertices,
    emptiness, boundedness) is computed lazily and cached.

    :param A: m x n constraint matrix
    :param b: offsets, length m
    :param canonical: rows are already unit-norm and irredundant
    :param empty: known emptiness, None if unknown
    :param bounded: known boundedness, None if unknown
    """

    def __init__(
        self,
        A: Union[ndarray, Sequence[Sequence[float]]],
        b: Vector,
        *,
        canonical: bool = False,
        empty: Optional[bool] = None,
        bounded: Optional[bool] = None,
    ) -> None:
        A = np.array(A, dtype=float, ndmin=2)
        b = np.array(b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[1] < 1:
            raise ValidationError(f"Constraint matrix must be m x n with n >= 1, got shape {A.shape}")
        if A.shape[0] < 1:
            raise ValidationError("Polytope needs at least one constraint")
        if A.shape[0] != b.size:
            raise DimensionMismatch(f"{A.shape[0]} constraint rows but {b.size} offsets")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValidationError("Polytope data must be finite")
        A.setflags(write=False)
        b.setflags(write=False)
        self._A = A
        self._b = b
        self._canonical = canonical
        self._empty = empty
        self._bounded = bounded

    @classmethod
    def empty(cls, dim: int) -> "HPolytope":
        """Return the canonical empty set of a given dimension.

        :param dim: ambient dimension
        """
        A = np.zeros((2, dim))
        A[0, 0], A[1, 0] = 1.0, -1.0
        return cls(A, [-1.0, -1.0], canonical=True, empty=True, bounded=True)

    @property
    def A(self) -> ndarray:
        """Constraint rows."""
        return self._A

    @property
    def b(self) -> ndarray:
        """Constraint offsets."""
        return self._b

    @property
    def dim(self) -> int:
        """Ambient dimension."""
        return self._A.shape[1]

    @property
    def n_rows(self) -> int:
        """Number of constraints."""
        return self._A.shape[0]

    @property
    def is_canonical(self) -> bool:
        """Whether rows are known to be unit-norm and irredundant."""
        return self._canonical

    def _resolve_flags(self) -> None:
        if self._canonical:
            empty, bounded = self._emptiness_and_boundedness(self._A, self._b)
        else:
            canonical = self.canonicalize()
            empty, bounded = canonical.is_empty, canonical.is_bounded
        if self._empty is None:
            self._empty = empty
        if self._bounded is None:
            self._bounded = bounded

    @property
    def is_empty(self) -> bool:
        """Whether the polyhedron has no points."""
        if self._empty is None:
            self._resolve_flags()
        return self._empty  # type: ignore[return-value]

    @property
    def is_bounded(self) -> bool:
        """Whether the polyhedron is bounded (the empty set is)."""
        if self._bounded is None:
            self._resolve_flags()
        return self._bounded  # type: ignore[return-value]

    def _emptiness_and_boundedness(self, A: ndarray, b: ndarray) -> Tuple[bool, bool]:
        """Return (empty, bounded) using 2n LPs along the axes."""
        n = A.shape[1]
        bounded = True
        for j in range(n):
            for sign in (1.0, -1.0):
                direction = np.zeros(n)
                direction[j] = sign
                try:
                    solve_lp(direction, A, b)
                except InfeasibleError:
                    return True, True
                except UnboundedError:
                    bounded = False
        return False, bounded

    def canonicalize(self) -> "HPolytope":
        """Return the polytope with unit rows and every redundant row removed.

        Parallel duplicates keep the tightest offset. In dimension <= 3 a
        bounded, full-dimensional polytope keeps exactly the rows supporting a
        facet; otherwise one LP per row decides redundancy against the rows
        still kept, and a row is dropped only if its removal does not enlarge
        the set beyond round-off.
        """
        if self._canonical:
            return self
        return self._canonical_form

    @cached_property
    def _canonical_form(self) -> "HPolytope":
        n = self.dim
        norms = np.linalg.norm(self._A, axis=1)
        zero = norms <= ZERO_ROW_TOL
        if np.any(self._b[zero] < -VERTEX_TOL):
            return HPolytope.empty(n)
        A = self._A[~zero] / norms[~zero, None]
        b = self._b[~zero] / norms[~zero]
        if A.shape[0] == 0:
            raise UnboundedError("Polytope without non-trivial constraints is the whole space")

        A, b = _merge_parallel(A, b)

        empty, bounded = self._empty, self._bounded
        if bounded and empty is None and n <= MAX_EXACT_DIM:
            empty = False
        elif bounded is None or empty is None:
            empty, bounded = self._emptiness_and_boundedness(A, b)
        if empty:
            return HPolytope.empty(n)

        vertices = None
        if bounded and n <= MAX_EXACT_DIM:
            vertices = enumerate_vertices(A, b)
            if vertices.shape[0] == 0:
                return HPolytope.empty(n)
            if affine_rank(vertices) == n:
                keep = _facet_rows(A, b, vertices)
                result = HPolytope(A[keep], b[keep], canonical=True, empty=False, bounded=True)
                result.__dict__["vertices"] = vertices
                return result

        keep = _irredundant_rows(A, b)
        result = HPolytope(A[keep], b[keep], canonical=True, empty=False, bounded=bounded)
        if vertices is not None:
            result.__dict__["vertices"] = vertices
        return result

    @cached_property
    def vertices(self) -> ndarray:
        """Vertices of a bounded polytope of dimension <= 3 (k x n array)."""
        canonical = self.canonicalize()
        if canonical is not self:
            return canonical.vertices
        if self.is_empty:
            return np.zeros((0, self.dim))
        if not self.is_bounded:
            raise UnboundedError("Unbounded polyhedron has no finite vertex set")
        check_dim(self.dim)
        return enumerate_vertices(self._A, self._b)

    def support(self, d: Vector) -> float:
        """Return ``max d x`` over the polytope.

        :param d: direction
        """
        return support(self, d)

    def contains(self, x: Vector, tol: float = 1e-9) -> bool:
        """Check ``A x <= b + tol``.

        :param x: point
        :param tol: absolute tolerance
        """
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DimensionMismatch(f"Point of size {x.size} in a {self.dim}-dimensional polytope")
        if self.is_empty:
            return False
        return bool(np.all(self._A @ x <= self._b + tol))

    def violation(self, x: Vector) -> float:
        """Largest constraint violation of a point, 0 inside.

        :param x: point
        """
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DimensionMismatch(f"Point of size {x.size} in a {self.dim}-dimensional polytope")
        canonical = self.canonicalize()
        return max(0.0, float(np.max(canonical.A @ x - canonical.b)))

    def origin_margin(self) -> float:
        """Smallest canonical offset: positive iff the origin is interior."""
        canonical = self.canonicalize()
        if canonical.is_empty:
            return -np.inf
        return float(np.min(canonical.b))

    def scale(self, rho: float) -> "HPolytope":
        """Return ``rho * P``.

        :param rho: non-negative factor
        """
        if rho < 0:
            raise ValidationError(f"Scale factor must be non-negative, got {rho}")
        if self.is_empty:
            return self
        if rho == 0:
            return box(np.zeros(self.dim), 0.0)
        result = HPolytope(
            self._A, self._b * rho, canonical=self._canonical, empty=self._empty, bounded=self._bounded
        )
        if "vertices" in self.__dict__:
            result.__dict__["vertices"] = self.__dict__["vertices"] * rho
        return result

    def negate(self) -> "HPolytope":
        """Return ``-P``."""
        result = HPolytope(-self._A, self._b, canonical=self._canonical, empty=self._empty, bounded=self._bounded)
        if "vertices" in self.__dict__:
            result.__dict__["vertices"] = -self.__dict__["vertices"]
        return result

    def translate(self, v: Vector) -> "HPolytope":
        """Return ``P + v``.

        :param v: offset vector
        """
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != self.dim:
            raise DimensionMismatch(f"Translation of size {v.size} for a {self.dim}-dimensional polytope")
        if self.is_empty:
            return self
        result = HPolytope(
            self._A, self._b + self._A @ v, canonical=self._canonical, empty=self._empty, bounded=self._bounded
        )
        if "vertices" in self.__dict__:
            result.__dict__["vertices"] = self.__dict__["vertices"] + v
        return result

    def __repr__(self) -> str:
        state = "empty" if self._empty else f"{self.n_rows} rows"
        return f"{self.__class__.__name__}(dim={self.dim}, {state})"

    def __str__(self) -> str:
        return self.__repr__()


def _merge_parallel(A: ndarray, b: ndarray) -> Tuple[ndarray, ndarray]:
    """Collapse rows with identical normals to the tightest one, keeping first-seen order."""
    labels = cluster_labels(A, PARALLEL_TOL)
    _, first = np.unique(labels, return_index=True)
    first = np.sort(first)
    offsets = np.full(labels.max() + 1, np.inf)
    np.minimum.at(offsets, labels, b)
    return A[first], offsets[labels[first]]


def _facet_rows(A: ndarray, b: ndarray, vertices: ndarray) -> ndarray:
    n = A.shape[1]
    scale = max(1.0, float(np.max(np.abs(b))))
    keep = np.zeros(A.shape[0], dtype=bool)
    touching = np.abs(vertices @ A.T - b) <= VERTEX_TOL * scale
    for i in range(A.shape[0]):
        on_row = vertices[touching[:, i]]
        keep[i] = on_row.shape[0] >= n and affine_rank(on_row) >= n - 1
    return keep


def _irredundant_rows(A: ndarray, b: ndarray) -> ndarray:
    keep = np.ones(A.shape[0], dtype=bool)
    for i in range(A.shape[0]):
        others = keep.copy()
        others[i] = False
        A_test = np.vstack([A[others], A[i]])
        b_test = np.concatenate([b[others], [b[i] + 1.0]])
        value = solve_lp(A[i], A_test, b_test).value
        if value <= b[i] + REDUNDANCY_TOL * max(1.0, abs(b[i])):
            keep[i] = False
    return keep


def _check_same_dim(P: HPolytope, Q: HPolytope) -> None:
    if P.dim != Q.dim:
        raise DimensionMismatch(f"Polytopes live in dimensions {P.dim} and {Q.dim}")


def box(center: Vector, radius: float) -> HPolytope:
    """Axis-aligned box ``center +- radius`` (the infinity-norm ball).

    :param center: box center
    :param radius: non-negative half width
    """
    center = np.asarray(center, dtype=float).reshape(-1)
    if radius < 0 or not np.isfinite(radius):
        raise ValidationError(f"Box radius must be finite and non-negative, got {radius}")
    return box_bounds(center - radius, center + radius)


def box_bounds(lower: Vector, upper: Vector) -> HPolytope:
    """Axis-aligned box ``lower <= x <= upper``.

    :param lower: lower bounds
    :param upper: upper bounds
    """
    lower = np.asarray(lower, dtype=float).reshape(-1)
    upper = np.asarray(upper, dtype=float).reshape(-1)
    if lower.size != upper.size:
        raise DimensionMismatch(f"Bounds of sizes {lower.size} and {upper.size}")
    if np.any(lower > upper):
        raise ValidationError("Lower bounds must not exceed upper bounds")
    n = lower.size
    A = np.vstack([np.eye(n), -np.eye(n)])
    b = np.concatenate([upper, -lower])
    result = HPolytope(A, b, canonical=True, empty=False, bounded=True)
    if n <= MAX_EXACT_DIM:
        corners = np.array(np.meshgrid(*zip(lower, upper), indexing="ij")).reshape(n, -1).T
        result.__dict__["vertices"] = np.unique(corners, axis=0)
    return result


def origin(dim: int) -> HPolytope:
    """The singleton ``{0}``.

    :param dim: ambient dimension
    """
    return box(np.zeros(dim), 0.0)


def from_points(points: ndarray) -> HPolytope:
    """Convex hull of a point cloud in dimension <= 3.

    :param points: k x n array
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValidationError("Convex hull needs a non-empty k x n point array")
    extreme = extreme_points(points)
    A, b = hull_halfspaces(extreme)
    if extreme.shape[0] > points.shape[1] and affine_rank(extreme) == points.shape[1]:
        # hull facets are irredundant, only coplanar triangles repeat a row
        A, b = _merge_parallel(A, b)
        result = HPolytope(A, b, canonical=True, empty=False, bounded=True)
        result.__dict__["vertices"] = extreme
        return result
    return HPolytope(A, b, empty=False, bounded=True).canonicalize()


def support(P: HPolytope, d: Vector) -> float:
    """Support function ``max_{x in P} d x``.

    Uses the vertex set in dimension <= 3 and an LP otherwise.

    :param P: non-empty polytope
    :param d: direction
    """
    d = np.asarray(d, dtype=float).reshape(-1)
    if d.size != P.dim:
        raise DimensionMismatch(f"Direction of size {d.size} for a {P.dim}-dimensional polytope")
    if not np.all(np.isfinite(d)):
        raise ValidationError("Support direction must be finite")
    if P.is_empty:
        raise EmptySetError("Support of an empty set")
    if not np.any(d):
        return 0.0
    if P.dim <= MAX_EXACT_DIM and P.is_bounded:
        return float(np.max(P.vertices @ d))
    return solve_lp(d, P.A, P.b).value


def supports(P: HPolytope, directions: ndarray) -> ndarray:
    """Vectorized support function over the rows of ``directions``.

    :param P: non-empty polytope
    :param directions: k x n array
    """
    directions = np.asarray(directions, dtype=float).reshape(-1, P.dim)
    if P.is_empty:
        raise EmptySetError("Support of an empty set")
    if P.dim <= MAX_EXACT_DIM and P.is_bounded:
        V = P.vertices
        step = max(1, SUPPORT_CHUNK // max(1, V.shape[0]))
        values = [np.max(directions[k : k + step] @ V.T, axis=1) for k in range(0, directions.shape[0], step)]
        return np.concatenate(values) if values else np.zeros(0)
    return np.array([support(P, d) for d in directions])


def minkowski_sum(P: HPolytope, Q: HPolytope) -> HPolytope:
    """Exact ``P + Q``: merged edges in the plane, vertex sums and a convex hull otherwise.

    A singleton operand reduces to a translation, which works in any
    dimension.

    :param P: non-empty bounded polytope
    :param Q: non-empty bounded polytope
    """
    _check_same_dim(P, Q)
    if P.is_empty or Q.is_empty:
        raise EmptySetError("Minkowski sum with an empty set")
    if not (P.is_bounded and Q.is_bounded):
        raise UnboundedError("Minkowski sum needs bounded operands")
    for first, second in ((P, Q), (Q, P)):
        if second.dim <= MAX_EXACT_DIM and second.vertices.shape[0] == 1:
            return first.canonicalize().translate(second.vertices[0])
    check_dim(P.dim)
    if P.dim == 2:
        return from_points(planar_sum([P.vertices, Q.vertices]))
    sums = (P.vertices[:, None, :] + Q.vertices[None, :, :]).reshape(-1, P.dim)
    return from_points(sums)


def minkowski_sum_all(parts: Sequence[HPolytope], dim: int) -> HPolytope:
    """Minkowski sum of a sequence; the empty sum is ``{0}``.

    :param parts: summands
    :param dim: ambient dimension
    """
    if dim == 2 and len(parts) > 1 and all(p.dim == 2 and not p.is_empty and p.is_bounded for p in parts):
        return from_points(planar_sum([p.vertices for p in parts]))
    result = origin(dim)
    for part in parts:
        result = minkowski_sum(result, part)
    return result


def pontryagin_diff(P: HPolytope, Q: HPolytope) -> HPolytope:
    """Exact ``P - Q = {x : x + Q in P}`` by per-row offset reduction.

    :param P: polytope
    :param Q: non-empty polytope
    """
    _check_same_dim(P, Q)
    if Q.is_empty:
        raise EmptySetError("Pontryagin difference by an empty set")
    if P.is_empty:
        return HPolytope.empty(P.dim)
    P = P.canonicalize()
    reduced = P.b - supports(Q, P.A)
    return HPolytope(P.A, reduced, bounded=True if P.is_bounded else None).canonicalize()


def linear_map(M: Union[ndarray, Sequence[Sequence[float]]], P: HPolytope) -> HPolytope:
    """Exact image ``M P``, including rank-deficient and non-square maps.

    :param M: k x n matrix
    :param P: bounded polytope of dimension n
    """
    M = np.array(M, dtype=float, ndmin=2)
    if M.shape[1] != P.dim:
        raise DimensionMismatch(f"Map with {M.shape[1]} columns applied to a {P.dim}-dimensional polytope")
    if P.is_empty:
        return HPolytope.empty(M.shape[0])
    if not P.is_bounded:
        raise UnboundedError("Linear map needs a bounded polytope")
    k = M.shape[0]
    if P.dim > MAX_EXACT_DIM or k > MAX_EXACT_DIM:
        if k == P.dim and np.linalg.cond(M) < 1e12:
            canonical = P.canonicalize()
            return HPolytope(canonical.A @ np.linalg.inv(M), canonical.b, bounded=True, empty=False).canonicalize()
        check_dim(max(P.dim, k))
    return from_points(P.vertices @ M.T)


def preimage(M: Union[ndarray, Sequence[Sequence[float]]], P: HPolytope) -> HPolytope:
    """``{x : M x in P}``; not canonicalized, may be unbounded.

    :param M: k x n matrix
    :param P: polytope of dimension k
    """
    M = np.array(M, dtype=float, ndmin=2)
    if M.shape[0] != P.dim:
        raise DimensionMismatch(f"Map with {M.shape[0]} rows into a {P.dim}-dimensional polytope")
    if P.is_empty:
        return HPolytope.empty(M.shape[1])
    canonical = P.canonicalize()
    return HPolytope(canonical.A @ M, canonical.b)


def intersect(P: HPolytope, Q: HPolytope) -> HPolytope:
    """``P cap Q``.

    :param P: polytope
    :param Q: polytope
    """
    _check_same_dim(P, Q)
    if P.is_empty or Q.is_empty:
        return HPolytope.empty(P.dim)
    bounded = True if (P._bounded is True or Q._bounded is True) else None
    return HPolytope(np.vstack([P.A, Q.A]), np.concatenate([P.b, Q.b]), bounded=bounded).canonicalize()


def cartesian_product(*parts: HPolytope) -> HPolytope:
    """``P_1 x P_2 x ...`` with block-diagonal rows.

    :param parts: factor polytopes
    """
    if not parts:
        raise ValidationError("Cartesian product needs at least one factor")
    dims = [p.dim for p in parts]
    if any(p.is_empty for p in parts):
        return HPolytope.empty(sum(dims))
    canon = [p.canonicalize() for p in parts]
    rows = sum(p.n_rows for p in canon)
    A = np.zeros((rows, sum(dims)))
    b = np.zeros(rows)
    r = c = 0
    for p in canon:
        A[r : r + p.n_rows, c : c + p.dim] = p.A
        b[r : r + p.n_rows] = p.b
        r += p.n_rows
        c += p.dim
    bounded = all(p.is_bounded for p in canon)
    return HPolytope(A, b, canonical=True, empty=False, bounded=bounded)


def is_subset(P: HPolytope, Q: HPolytope, margin: float = 0.0) -> bool:
    """Check ``support(P, a) <= beta - margin`` for every canonical row of Q.

    A positive margin tests strict-interior inclusion, a negative one adds
    tolerance.

    :param P: candidate subset
    :param Q: candidate superset
    :param margin: required clearance
    """
    return subset_margin(P, Q) >= margin


def subset_margin(P: HPolytope, Q: HPolytope) -> float:
    """Return ``min over canonical rows (a, beta) of Q of beta - support(P, a)``.

    ``+inf`` if P is empty, ``-inf`` if only Q is.

    :param P: candidate subset
    :param Q: candidate superset
    """
    _check_same_dim(P, Q)
    if P.is_empty:
        return np.inf
    if Q.is_empty:
        return -np.inf
    Q = Q.canonicalize()
    return float(np.min(Q.b - supports(P, Q.A)))


def inscribed_box_radius(S: HPolytope, Z: HPolytope) -> float:
    """Largest ``r`` with ``S + box(0, r)`` inside Z.

    Negative if S is not even contained in Z.

    :param S: inner set
    :param Z: outer set
    """
    _check_same_dim(S, Z)
    if S.is_empty:
        raise EmptySetError("Inscribed radius of an empty set")
    Z = Z.canonicalize()
    if Z.is_empty:
        return -np.inf
    clearance = Z.b - supports(S, Z.A)
    return float(np.min(clearance / np.sum(np.abs(Z.A), axis=1)))


def hausdorff_gap(P: HPolytope, Q: HPolytope) -> float:
    """Largest support difference along both sets' canonical rows and the axes.

    :param P: non-empty polytope
    :param Q: non-empty polytope
    """
    _check_same_dim(P, Q)
    eye = np.eye(P.dim)
    directions = np.vstack([P.canonicalize().A, Q.canonicalize().A, eye, -eye])
    return float(np.max(np.abs(supports(P, directions) - supports(Q, directions))))
