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

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from numpy import ndarray
from scipy.optimize import linprog

from chained_tube_mpc.errors import InfeasibleError, NumericalFailureError, UnboundedError, ValidationError


logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
RANK_DEFICIENT = 1e-14
SYMMETRY_TOL = 1e-12
FEASIBILITY_TOL = 1e-9
KKT_TOL = 1e-8

# HiGHS status codes returned by scipy.optimize.linprog
_LP_OPTIMAL = 0
_LP_INFEASIBLE = 2
_LP_UNBOUNDED = 3
_LP_UNBOUNDED_OR_INFEASIBLE = 4


class LpSolution(NamedTuple):
    """Optimal point and value of a linear program."""

    x: ndarray
    value: float


class QpSolution(NamedTuple):
    """Optimal point of a quadratic program with its certificate."""

    x: ndarray
    value: float
    multipliers_in: ndarray
    multipliers_eq: ndarray
    active: Tuple[int, ...]
    iterations: int


def _check_condition(A: ndarray) -> None:
    if A.size == 0:
        return
    singular = np.linalg.svd(A, compute_uv=False)
    if singular[0] == 0:
        return
    # exact rank deficiency is legitimate, only near-singular directions are flagged
    significant = singular[singular > RANK_DEFICIENT * singular[0]]
    ratio = singular[0] / significant[-1]
    if ratio > CONDITION_LIMIT:
        raise NumericalFailureError(f"Constraint matrix condition estimate {ratio:.3e} too large")


def solve_lp(
    c: ndarray,
    A: ndarray,
    b: ndarray,
    A_eq: Optional[ndarray] = None,
    b_eq: Optional[ndarray] = None,
) -> LpSolution:
    """Maximize ``c x`` subject to ``A x <= b`` (and optionally ``A_eq x = b_eq``).

    Solved with the HiGHS dual simplex, which is deterministic for identical input.

    :param c: objective direction
    :param A: inequality matrix
    :param b: inequality offsets
    :param A_eq: equality matrix
    :param b_eq: equality offsets
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    A = np.asarray(A, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[0] != b.size:
        raise ValidationError(f"LP has {A.shape[0]} rows and {b.size} offsets")
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValidationError("LP data must be finite")
    _check_condition(A)

    kwargs = {}
    if A_eq is not None and np.size(A_eq):
        kwargs = {"A_eq": np.asarray(A_eq, dtype=float).reshape(-1, n), "b_eq": np.asarray(b_eq, dtype=float)}

    def run(objective: ndarray):
        return linprog(
            objective,
            A_ub=A if A.shape[0] else None,
            b_ub=b if A.shape[0] else None,
            bounds=[(None, None)] * n,
            method="highs-ds",
            **kwargs,
        )

    result = run(-c)
    if result.status == _LP_UNBOUNDED_OR_INFEASIBLE:
        # presolve could not tell; a zero objective cannot be unbounded
        if run(np.zeros(n)).status in (_LP_INFEASIBLE, _LP_UNBOUNDED_OR_INFEASIBLE):
            raise InfeasibleError("LP is infeasible")
        raise UnboundedError("LP is unbounded")
    if result.status == _LP_INFEASIBLE:
        raise InfeasibleError("LP is infeasible")
    if result.status == _LP_UNBOUNDED:
        raise UnboundedError("LP is unbounded")
    if result.status != _LP_OPTIMAL or result.x is None:
        raise NumericalFailureError(f"LP solver failed: {result.message}")
    x = np.asarray(result.x, dtype=float)
    return LpSolution(x=x, value=float(c @ x))


@dataclass
class QpProblem:
    """Strictly convex quadratic program ``min 1/2 x'Hx + f'x``.

    :param H: symmetric cost matrix
    :param f: linear cost
    :param A_in: inequality matrix, ``A_in x <= b_in``
    :param b_in: inequality offsets
    :param A_eq: equality matrix, ``A_eq x = b_eq``
    :param b_eq: equality offsets
    """

    H: ndarray
    f: ndarray
    A_in: ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    b_in: ndarray = field(default_factory=lambda: np.zeros(0))
    A_eq: ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    b_eq: ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        """Normalize shapes and check convexity."""
        self.H = np.asarray(self.H, dtype=float)
        n = self.H.shape[0]
        if self.H.shape != (n, n):
            raise ValidationError(f"H must be square, got {self.H.shape}")
        if np.max(np.abs(self.H - self.H.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(self.H))):
            raise ValidationError("H must be symmetric")
        self.f = np.asarray(self.f, dtype=float).reshape(-1)
        if self.f.size != n:
            raise ValidationError(f"f has size {self.f.size}, expected {n}")
        self.A_in = np.asarray(self.A_in, dtype=float).reshape(-1, n)
        self.b_in = np.asarray(self.b_in, dtype=float).reshape(-1)
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        if self.A_in.shape[0] != self.b_in.size or self.A_eq.shape[0] != self.b_eq.size:
            raise ValidationError("Constraint matrices and offsets have inconsistent sizes")
        for name in ("H", "f", "A_in", "b_in", "A_eq", "b_eq"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"QP data {name} must be finite")
        self._check_convexity()

    def _check_convexity(self) -> None:
        n = self.n
        if self.A_eq.shape[0]:
            _, singular, vt = np.linalg.svd(self.A_eq)
            rank = int(np.sum(singular > 1e-12 * max(1.0, singular[0])))
            basis = vt[rank:].T
        else:
            basis = np.eye(n)
        if basis.shape[1] == 0:
            return
        reduced = basis.T @ self.H @ basis
        smallest = np.min(np.linalg.eigvalsh((reduced + reduced.T) / 2))
        if smallest <= 1e-12 * max(1.0, np.max(np.abs(self.H))):
            raise ValidationError("H is not positive definite on the null space of A_eq")

    @property
    def n(self) -> int:
        """Number of decision variables."""
        return self.H.shape[0]

    def objective(self, x: ndarray) -> float:
        """Evaluate the cost at ``x``.

        :param x: decision vector
        """
        return float(0.5 * x @ self.H @ x + self.f @ x)

    def max_violation(self, x: ndarray) -> float:
        """Return the largest constraint violation at ``x`` (0 if feasible).

        :param x: decision vector
        """
        violation = 0.0
        if self.A_in.shape[0]:
            violation = max(violation, float(np.max(self.A_in @ x - self.b_in)))
        if self.A_eq.shape[0]:
            violation = max(violation, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        return violation


def _feasible_point(p: QpProblem) -> ndarray:
    """Phase one: any feasible point, or InfeasibleError."""
    if p.A_in.shape[0] == 0 and p.A_eq.shape[0] == 0:
        return np.zeros(p.n)
    solution = solve_lp(np.zeros(p.n), p.A_in, p.b_in, p.A_eq if p.A_eq.shape[0] else None, p.b_eq)
    return solution.x


def _independent(rows: ndarray, candidate: ndarray) -> bool:
    if rows.shape[0] == 0:
        return bool(np.linalg.norm(candidate) > 0)
    stacked = np.vstack([rows, candidate])
    return np.linalg.matrix_rank(stacked) > np.linalg.matrix_rank(rows)


def _solve_kkt(H: ndarray, g: ndarray, A_w: ndarray) -> Tuple[ndarray, ndarray]:
    n, k = H.shape[0], A_w.shape[0]
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = H
    kkt[:n, n:] = A_w.T
    kkt[n:, :n] = A_w
    rhs = np.concatenate([-g, np.zeros(k)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def solve_qp(p: QpProblem, max_iter: Optional[int] = None) -> QpSolution:
    """Primal active-set method for a strictly convex QP.

    Phase one is an LP feasibility problem; its failure is the authoritative
    infeasibility signal. Pivoting is deterministic: the blocking constraint
    with the lowest index enters, and the lowest-index constraint with a
    negative multiplier leaves.

    :param p: problem data
    :param max_iter: iteration cap, defaults to ``50 * (n + m)``
    """
    n = p.n
    m_in = p.A_in.shape[0]
    m_eq = p.A_eq.shape[0]
    max_iter = max_iter or 50 * (n + m_in + m_eq + 1)

    x = _feasible_point(p)

    # working set over inequality indices; equality rows are always active
    working: List[int] = []
    rows = p.A_eq.copy()
    if m_in:
        residual = p.A_in @ x - p.b_in
        for i in range(m_in):
            if residual[i] >= -FEASIBILITY_TOL and _independent(rows, p.A_in[i]):
                working.append(i)
                rows = np.vstack([rows, p.A_in[i]])

    scale = max(1.0, float(np.max(np.abs(p.H))), float(np.max(np.abs(p.f), initial=0.0)))
    for iteration in range(max_iter):
        A_w = np.vstack([p.A_eq, p.A_in[working]]) if working else p.A_eq
        g = p.H @ x + p.f
        step, multipliers = _solve_kkt(p.H, g, A_w)

        if np.linalg.norm(step, np.inf) <= 1e-12 * max(1.0, float(np.linalg.norm(x, np.inf))):
            lam_in = multipliers[m_eq:]
            negative = [pos for pos, value in enumerate(lam_in) if value < -1e-12 * scale]
            if not negative:
                multipliers_in = np.zeros(m_in)
                multipliers_in[working] = lam_in
                return QpSolution(
                    x=x,
                    value=p.objective(x),
                    multipliers_in=multipliers_in,
                    multipliers_eq=multipliers[:m_eq],
                    active=tuple(sorted(working)),
                    iterations=iteration,
                )
            leaving = min(negative, key=lambda pos: working[pos])
            working.pop(leaving)
            continue

        alpha = 1.0
        blocking: Optional[int] = None
        if m_in:
            rates = p.A_in @ step
            slacks = np.maximum(p.b_in - p.A_in @ x, 0.0)
            candidates = rates > 1e-14
            candidates[working] = False
            ratios = np.full(m_in, np.inf)
            ratios[candidates] = slacks[candidates] / rates[candidates]
            # argmin keeps the lowest index on ties
            first = int(np.argmin(ratios))
            if ratios[first] < alpha:
                alpha = float(ratios[first])
                blocking = first
        x = x + alpha * step
        if blocking is not None:
            working.append(blocking)

    raise NumericalFailureError(f"Active-set method did not converge in {max_iter} iterations")


def kkt_residuals(p: QpProblem, solution: QpSolution) -> Tuple[float, float, float]:
    """Return (stationarity, primal violation, complementarity) residuals.

    :param p: problem data
    :param solution: candidate optimum with multipliers
    """
    x = solution.x
    grad = p.H @ x + p.f + p.A_in.T @ solution.multipliers_in + p.A_eq.T @ solution.multipliers_eq
    stationarity = float(np.linalg.norm(grad, np.inf)) if grad.size else 0.0
    primal = p.max_violation(x)
    slack = p.b_in - p.A_in @ x if p.A_in.shape[0] else np.zeros(0)
    complementarity = float(np.max(np.abs(solution.multipliers_in * slack), initial=0.0))
    return stationarity, primal, complementarity
