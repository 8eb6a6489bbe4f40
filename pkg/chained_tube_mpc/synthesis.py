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

"""Offline synthesis of the inner and outer tubes of every subsystem."""

import logging

from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from numpy import ndarray
from scipy.linalg import block_diag

from chained_tube_mpc.config import SynthesisOptions
from chained_tube_mpc.enums import DesignCheck, Variant
from chained_tube_mpc.errors import (
    EmptySetError,
    IterationLimitError,
    NotSchurError,
    NotStabilizableError,
    NumericalFailureError,
    SynthesisFailure,
    UnboundedError,
    ValidationError,
)
from chained_tube_mpc.geometry import (
    HPolytope,
    box,
    hausdorff_gap,
    inscribed_box_radius,
    intersect,
    linear_map,
    max_admissible_invariant,
    max_robust_invariant,
    minkowski_sum,
    minkowski_sum_all,
    origin,
    pontryagin_diff,
    preimage,
    rpi_outer_approx,
    subset_margin,
)
from chained_tube_mpc.log import SelfLoggerMixin
from chained_tube_mpc.model import CoupledSystem, SubsystemModel, coupling_disturbance_set
from chained_tube_mpc.numkernel import dlqr, dlyap, spectral_radius


logger = logging.getLogger(__name__)

CHECK_TOL = 1e-8
ZERO_SET_TOL = 1e-12
TERMINAL_CONVERGENCE = 1e-9
COLLAPSE_RADIUS = 1e-6

SET_FIELDS = (
    "W",
    "Z",
    "L",
    "V",
    "S",
    "H",
    "D",
    "X_hat",
    "U_hat",
    "X_hathat",
    "U_hathat",
    "XF_hat",
    "XF_hathat",
)
MATRIX_FIELDS = ("K_T", "K_hat", "Q", "R", "P")


@dataclass(frozen=True, eq=False)
class SubsystemDesign(object):
    """Tube ingredients of one subsystem.

    ``D`` is the disturbance set ``H`` was computed for, including the
    gain-mismatch term when the outer gain differs from the inner one.
    ``delta`` is ``inf`` for a subsystem without coupling.
    """

    index: int
    K_T: ndarray
    K_hat: ndarray
    W: HPolytope
    Z: HPolytope
    L: HPolytope
    V: HPolytope
    S: HPolytope
    H: HPolytope
    D: HPolytope
    X_hat: HPolytope
    U_hat: HPolytope
    X_hathat: HPolytope
    U_hathat: HPolytope
    XF_hat: HPolytope
    XF_hathat: HPolytope
    Q: ndarray
    R: ndarray
    P: ndarray
    delta: float

    @property
    def isolated(self) -> bool:
        """Whether no disturbance reaches this subsystem."""
        return _is_zero_set(self.W)

    @cached_property
    def S_plus_H(self) -> HPolytope:
        """``S + H``, the inner initial error set of the nested variant."""
        return minkowski_sum(self.S, self.H)


@dataclass(frozen=True)
class CheckResult(object):
    """Outcome of one named check.

    :param check: check name
    :param subsystem: subsystem index, None for global checks
    :param passed: verdict
    :param margin: achieved margin; positive or within tolerance means pass
    :param vacuous: the check holds trivially (no coupling)
    """

    check: DesignCheck
    subsystem: Optional[int]
    passed: bool
    margin: float
    vacuous: bool = False

    @property
    def label(self) -> str:
        """Human-readable check name with its subsystem."""
        where = "global" if self.subsystem is None else f"subsystem {self.subsystem + 1}"
        return f"{self.check.value} [{where}]"

    @property
    def as_dict(self) -> dict:
        """Serialize self into a dictionary."""
        return {
            "check": self.check.name,
            "subsystem": self.subsystem,
            "passed": self.passed,
            "margin": _json_float(self.margin),
            "vacuous": self.vacuous,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CheckResult":
        """Build a result from its dictionary form.

        :param data: output of :attr:`as_dict`
        """
        return cls(
            check=DesignCheck[data["check"]],
            subsystem=data["subsystem"],
            passed=bool(data["passed"]),
            margin=float(data["margin"]),
            vacuous=bool(data.get("vacuous", False)),
        )


def _json_float(value: float) -> Any:
    if np.isfinite(value):
        return float(value)
    return "inf" if value > 0 else "-inf"


@dataclass(frozen=True)
class AssumptionReport(object):
    """Pass or fail per named check with the achieved margins."""

    checks: Tuple[CheckResult, ...] = ()

    @property
    def passed(self) -> bool:
        """Whether every check passed."""
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> Tuple[CheckResult, ...]:
        """Failed checks in evaluation order."""
        return tuple(c for c in self.checks if not c.passed)

    def find(self, check: DesignCheck, subsystem: Optional[int] = None) -> Tuple[CheckResult, ...]:
        """Results of one check, optionally for one subsystem.

        :param check: check name
        :param subsystem: subsystem index
        """
        return tuple(c for c in self.checks if c.check is check and (subsystem is None or c.subsystem == subsystem))

    @property
    def as_dict(self) -> dict:
        """Serialize self into a dictionary."""
        return {"passed": self.passed, "checks": [c.as_dict for c in self.checks]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AssumptionReport":
        """Build a report from its dictionary form.

        :param data: output of :attr:`as_dict`
        """
        return cls(tuple(CheckResult.from_dict(c) for c in data.get("checks", [])))

    def to_text(self) -> str:
        """One line per check: verdict, name and margin."""
        lines = []
        for c in self.checks:
            verdict = "PASS" if c.passed else "FAIL"
            note = " (vacuous)" if c.vacuous else ""
            lines.append(f"{verdict}  {c.label}  margin={c.margin:.6g}{note}")
        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class TubeDesign(object):
    """All offline ingredients of the chain of tubes.

    :param system: the coupled plant the design belongs to
    :param subsystems: per-subsystem designs ordered by index
    :param options: options the design was synthesized with
    :param report: validation report of the design
    """

    system: CoupledSystem
    subsystems: Tuple[SubsystemDesign, ...]
    options: SynthesisOptions = field(default_factory=SynthesisOptions)
    report: AssumptionReport = field(default_factory=AssumptionReport)

    def __len__(self) -> int:
        return len(self.subsystems)

    def __iter__(self) -> Iterator[SubsystemDesign]:
        return iter(self.subsystems)

    def __getitem__(self, i: int) -> SubsystemDesign:
        return self.subsystems[i]

    @property
    def variant(self) -> Variant:
        """Inner initial constraint and H construction in use."""
        return self.options.variant  # type: ignore[return-value]

    def replace_subsystem(self, i: int, **changes: Any) -> "TubeDesign":
        """Copy with fields of subsystem ``i`` replaced, report cleared.

        :param i: subsystem index
        :param changes: field values
        """
        subsystems = list(self.subsystems)
        subsystems[i] = replace(subsystems[i], **changes)
        return TubeDesign(self.system, tuple(subsystems), self.options)

    def with_report(self, report: AssumptionReport) -> "TubeDesign":
        """Copy carrying a validation report.

        :param report: validation report
        """
        return TubeDesign(self.system, self.subsystems, self.options, report)


def _is_zero_set(P: HPolytope) -> bool:
    return bool(np.max(np.abs(P.vertices), initial=0.0) <= ZERO_SET_TOL)


def _closed_loop(s: SubsystemModel, K: ndarray) -> ndarray:
    return s.A + s.B @ K


def _admissible(X: HPolytope, K: ndarray, U: HPolytope) -> HPolytope:
    """``X cap {x : K x in U}``."""
    return intersect(X, preimage(K, U))


def _origin_radius(P: HPolytope) -> float:
    if P.is_empty:
        return -np.inf
    return inscribed_box_radius(origin(P.dim), P)


def _mismatch_term(s: SubsystemModel, K_hat: ndarray, K_T: ndarray, XF_hathat: HPolytope) -> Optional[HPolytope]:
    """``B (K_hat - K_T) XF_hathat``, None when the gains coincide."""
    gap = K_hat - K_T
    if np.max(np.abs(gap), initial=0.0) == 0:
        return None
    return linear_map(s.B @ gap, XF_hathat)


_GEOMETRY_ERRORS = (
    EmptySetError,
    IterationLimitError,
    NotSchurError,
    NotStabilizableError,
    NumericalFailureError,
    UnboundedError,
    ValidationError,
)


class TubeSynthesizer(SelfLoggerMixin):
    """Runs the offline design steps for every subsystem.

    Each step finishes for all subsystems before the next starts, since
    steps 5, 8 and 9 read neighbour results.

    :param system: coupled plant with constraint sets
    :param options: weights, tolerances and variant
    """

    def __init__(self, system: CoupledSystem, options: Optional[SynthesisOptions] = None) -> None:
        self.system = system
        self.options = options or SynthesisOptions()
        self._count = len(system)

    @contextmanager
    def _step(self, check: DesignCheck, i: Optional[int] = None) -> Iterator[None]:
        try:
            yield
        except SynthesisFailure:
            raise
        except _GEOMETRY_ERRORS as e:
            where = "" if i is None else f" for subsystem {i + 1}"
            self.logger.info(f"synthesis step failed{where}: {e}")
            raise SynthesisFailure(check.value, f"{check.value} failed{where}: {e}")

    def _fail(self, check: DesignCheck, message: str) -> None:
        self.logger.info(f"synthesis failed: {message}")
        raise SynthesisFailure(check.value, message)

    def run(self) -> TubeDesign:
        """Execute the design steps in order and validate the result."""
        options = self.options
        sys = self.system
        eps = options.eps
        rho = options.inner_set_scale

        for s in sys:
            with self._step(DesignCheck.constraint_sets, s.index):
                s.check_constraints()

        # gains
        weights = [options.weights(s.index, s.n, s.m) for s in sys]
        K_T, K_hat = [], []
        for s, (Q, R) in zip(sys, weights):
            with self._step(DesignCheck.stabilizable, s.index):
                K_T.append(dlqr(s.A, s.B, Q, R).K)
                if options.distinct_outer_gain:
                    Q_hat = options.outer_q_weight * np.eye(s.n)  # type: ignore[operator]
                    R_hat = options.outer_r_weight * np.eye(s.m)  # type: ignore[operator]
                    K_hat.append(dlqr(s.A, s.B, Q_hat, R_hat).K)
                else:
                    K_hat.append(K_T[-1])
        for check, gains in ((DesignCheck.global_schur, K_T), (DesignCheck.global_outer_schur, K_hat)):
            radius = spectral_radius(sys.A + sys.B @ block_diag(*gains))
            if radius >= 1.0:
                self._fail(check, f"{check.value} violated: spectral radius {radius:.9g}")
        self.logger.info("gains computed, global closed loop Schur")

        # inner tubes
        W, Z = [], []
        for s in sys:
            with self._step(DesignCheck.z_rpi, s.index):
                W.append(coupling_disturbance_set(sys, s.index))
                Z.append(rpi_outer_approx(_closed_loop(s, K_T[s.index]), W[-1], eps, options.rpi_max_iter))

        # inner tightened sets
        X_hat, U_hat = [], []
        for s in sys:
            with self._step(DesignCheck.tightened_sets, s.index):
                X_hat.append(pontryagin_diff(s.X, Z[s.index]).scale(rho))
                U_hat.append(pontryagin_diff(s.U, linear_map(K_T[s.index], Z[s.index])).scale(rho))
            self._require_interior(s.index, X_hat=X_hat[-1], U_hat=U_hat[-1])
        self.logger.info(f"inner tubes and tightened sets computed (scale {rho})")

        # input deviation bounds and reduced disturbance sets
        L = [minkowski_sum(s.U, U_hat[s.index].negate()) for s in sys]
        V = []
        for s in sys:
            with self._step(DesignCheck.uncertainty_reduction, s.index):
                V.append(self._reduced_disturbance(s, Z, L))
            if not _is_zero_set(W[s.index]):
                margin = subset_margin(V[-1], W[s.index])
                if margin <= 0:
                    self._fail(
                        DesignCheck.uncertainty_reduction,
                        f"V_{s.index + 1} not inside the interior of W_{s.index + 1} "
                        f"(margin {margin:.6g})",
                    )

        # outer tubes
        S, delta = [], []
        for s in sys:
            with self._step(DesignCheck.s_rpi, s.index):
                S.append(rpi_outer_approx(_closed_loop(s, K_hat[s.index]), V[s.index], eps, options.rpi_max_iter))
            if _is_zero_set(W[s.index]):
                delta.append(np.inf)
                continue
            radius = inscribed_box_radius(S[-1], Z[s.index])
            if radius <= 0:
                self._fail(
                    DesignCheck.tube_nesting,
                    f"S_{s.index + 1} not inside the interior of Z_{s.index + 1} "
                    f"(margin {radius:.6g})",
                )
            delta.append(radius)
        self.logger.info(f"outer tubes computed, delta={[float(d) for d in delta]}")

        # outer tightened sets
        X_hathat, U_hathat = [], []
        for s in sys:
            with self._step(DesignCheck.tightened_sets, s.index):
                X_hathat.append(pontryagin_diff(s.X, S[s.index]))
                U_hathat.append(pontryagin_diff(s.U, linear_map(K_hat[s.index], S[s.index])))
            self._require_interior(s.index, X_hathat=X_hathat[-1], U_hathat=U_hathat[-1])

        # outer terminal sets do not depend on H
        XF_hathat = self._outer_terminal_sets(K_hat, X_hathat, U_hathat)

        XF_hat: List[Optional[HPolytope]] = [None] * self._count
        if options.variant is Variant.original:
            for s in sys:
                XF_hat[s.index] = self._inner_terminal_set(s, K_T[s.index], X_hat[s.index], U_hat[s.index])

        # BRF sets
        D, H = [], []
        for s in sys:
            with self._step(DesignCheck.h_rpi, s.index):
                if options.variant is Variant.original:
                    terms = [
                        linear_map(A_ij + B_ij @ K_T[j], XF_hat[j])  # type: ignore[arg-type]
                        for j, (A_ij, B_ij) in s.couplings.items()
                    ]
                else:
                    terms = []
                    for j, (A_ij, B_ij) in s.couplings.items():
                        terms.append(linear_map(A_ij, X_hat[j]))
                        if sys[j].m:
                            terms.append(linear_map(B_ij, U_hat[j]))
                mismatch = _mismatch_term(s, K_hat[s.index], K_T[s.index], XF_hathat[s.index])
                if mismatch is not None:
                    terms.append(mismatch)
                D.append(minkowski_sum_all(terms, s.n))
                H.append(rpi_outer_approx(_closed_loop(s, K_hat[s.index]), D[-1], eps, options.rpi_max_iter))
            nested = subset_margin(minkowski_sum(S[s.index], H[-1]), Z[s.index])
            if nested < -CHECK_TOL:
                self._fail(
                    DesignCheck.s_plus_h,
                    f"S_{s.index + 1} + H_{s.index + 1} not inside Z_{s.index + 1} (margin {nested:.6g})",
                )
            if np.isfinite(delta[s.index]):
                inside = subset_margin(H[-1], box(np.zeros(s.n), delta[s.index]))
                if inside < -CHECK_TOL:
                    self._fail(
                        DesignCheck.h_in_box,
                        f"H_{s.index + 1} not inside box(0, delta_{s.index + 1}) (margin {inside:.6g})",
                    )
        self.logger.info("BRF sets computed")

        # inner terminal sets nested in the outer ones
        if options.variant is Variant.nested:
            for s in sys:
                with self._step(DesignCheck.terminal_nesting, s.index):
                    shrunk = pontryagin_diff(XF_hathat[s.index], H[s.index])
                if shrunk.is_empty:
                    self._fail(DesignCheck.terminal_nesting, f"XF_hathat_{s.index + 1} - H_{s.index + 1} is empty")
                XF_hat[s.index] = self._inner_terminal_set(
                    s, K_T[s.index], intersect(X_hat[s.index], shrunk), U_hat[s.index]
                )

        # terminal costs
        P = []
        for s, (Q, R) in zip(sys, weights):
            with self._step(DesignCheck.terminal_cost, s.index):
                K = K_hat[s.index]
                P.append(dlyap(_closed_loop(s, K), Q + K.T @ R @ K))

        subsystems = tuple(
            SubsystemDesign(
                index=s.index,
                K_T=K_T[s.index],
                K_hat=K_hat[s.index],
                W=W[s.index],
                Z=Z[s.index],
                L=L[s.index],
                V=V[s.index],
                S=S[s.index],
                H=H[s.index],
                D=D[s.index],
                X_hat=X_hat[s.index],
                U_hat=U_hat[s.index],
                X_hathat=X_hathat[s.index],
                U_hathat=U_hathat[s.index],
                XF_hat=XF_hat[s.index],  # type: ignore[arg-type]
                XF_hathat=XF_hathat[s.index],
                Q=weights[s.index][0],
                R=weights[s.index][1],
                P=P[s.index],
                delta=float(delta[s.index]),
            )
            for s in sys
        )
        design = TubeDesign(sys, subsystems, options)
        report = validate(design)
        if not report.passed:
            first = report.failures[0]
            self._fail(first.check, f"{first.label} failed on re-verification (margin {first.margin:.6g})")
        self.logger.info(f"synthesis finished, {len(report.checks)} checks passed")
        return design.with_report(report)

    def _require_interior(self, i: int, **sets: HPolytope) -> None:
        for name, P in sets.items():
            if P.is_empty or P.origin_margin() <= 0:
                self._fail(
                    DesignCheck.tightened_sets,
                    f"{name}_{i + 1} is empty or does not contain the origin in its interior",
                )

    def _reduced_disturbance(self, s: SubsystemModel, Z: Sequence[HPolytope], L: Sequence[HPolytope]) -> HPolytope:
        """``V_i``: neighbour tube errors plus the residual couplings at full size."""
        sys = self.system
        terms = []
        for j, (A_ij, B_ij) in s.couplings.items():
            terms.append(linear_map(A_ij, Z[j]))
            if sys[j].m:
                terms.append(linear_map(B_ij, L[j]))
        for j, (A_ij, B_ij) in s.residuals.items():
            terms.append(linear_map(A_ij, sys[j].X))
            if sys[j].m:
                terms.append(linear_map(B_ij, sys[j].U))
        return minkowski_sum_all(terms, s.n)

    def _outer_terminal_sets(
        self, K_hat: Sequence[ndarray], X_hathat: Sequence[HPolytope], U_hathat: Sequence[HPolytope]
    ) -> List[HPolytope]:
        """Shrink local invariant sets until their product is invariant for the coupled closed loop."""
        sys = self.system
        options = self.options
        omega = []
        for s in sys:
            with self._step(DesignCheck.outer_terminal, s.index):
                omega.append(
                    max_admissible_invariant(
                        _closed_loop(s, K_hat[s.index]),
                        _admissible(X_hathat[s.index], K_hat[s.index], U_hathat[s.index]),
                        options.oinf_max_iter,
                    )
                )

        for iteration in range(options.terminal_max_iter):
            shrunk = []
            for s in sys:
                with self._step(DesignCheck.outer_terminal, s.index):
                    D = _terminal_disturbance(sys, s, K_hat, omega)
                    new = max_robust_invariant(_closed_loop(s, K_hat[s.index]), omega[s.index], D, options.oinf_max_iter)
                if _origin_radius(new) < COLLAPSE_RADIUS:
                    self._fail(
                        DesignCheck.outer_terminal,
                        f"outer terminal set of subsystem {s.index + 1} collapsed at iteration {iteration}",
                    )
                shrunk.append(new)
            gap = max(hausdorff_gap(new, old) for new, old in zip(shrunk, omega))
            omega = shrunk
            self.logger.debug(f"terminal fixed point iteration {iteration}: change {gap:.3e}")
            if gap < TERMINAL_CONVERGENCE:
                self.logger.info(f"outer terminal sets converged after {iteration + 1} iterations")
                return omega
        self._fail(
            DesignCheck.outer_terminal,
            f"outer terminal sets did not converge in {options.terminal_max_iter} iterations",
        )
        return omega

    def _inner_terminal_set(self, s: SubsystemModel, K_T: ndarray, X: HPolytope, U_hat: HPolytope) -> HPolytope:
        with self._step(DesignCheck.inner_terminal, s.index):
            XF = max_admissible_invariant(_closed_loop(s, K_T), _admissible(X, K_T, U_hat), self.options.oinf_max_iter)
        if _origin_radius(XF) <= 0:
            self._fail(DesignCheck.inner_terminal, f"inner terminal set of subsystem {s.index + 1} has empty interior")
        return XF


def _terminal_disturbance(
    sys: CoupledSystem, s: SubsystemModel, K_hat: Sequence[ndarray], omega: Sequence[HPolytope]
) -> HPolytope:
    """``sum_j (A_ij + B_ij K_hat_j) omega_j`` over the neighbours of ``s``."""
    terms = [linear_map(A_ij + B_ij @ K_hat[j], omega[j]) for j, (A_ij, B_ij) in s.couplings.items()]
    return minkowski_sum_all(terms, s.n)


def synthesize(
    sys: CoupledSystem,
    options: Optional[SynthesisOptions] = None,
    Q_list: Optional[Sequence[ndarray]] = None,
    R_list: Optional[Sequence[ndarray]] = None,
    eps: Optional[float] = None,
) -> TubeDesign:
    """Build and validate the tube design of every subsystem.

    Explicit ``Q_list``, ``R_list`` and ``eps`` override the options.

    :param sys: coupled plant with constraint sets
    :param options: synthesis options
    :param Q_list: per-subsystem state weights
    :param R_list: per-subsystem input weights
    :param eps: RPI approximation tolerance
    """
    options = options or SynthesisOptions()
    changes: Dict[str, Any] = {}
    if Q_list is not None:
        changes["q_matrices"] = [np.asarray(Q, dtype=float).tolist() for Q in Q_list]
    if R_list is not None:
        changes["r_matrices"] = [np.asarray(R, dtype=float).tolist() for R in R_list]
    if eps is not None:
        changes["eps"] = eps
    if changes:
        options = replace(options, **changes)
    for name in ("q_matrices", "r_matrices"):
        matrices = getattr(options, name)
        if matrices is not None and len(matrices) != len(sys):
            raise ValidationError(f"{name} has {len(matrices)} entries for {len(sys)} subsystems")
    for s in sys:
        Q, _ = options.weights(s.index, s.n, s.m)
        if np.min(np.linalg.eigvalsh((Q + Q.T) / 2)) < -1e-12:
            raise ValidationError(f"Q_{s.index + 1} must be positive semidefinite")
    return TubeSynthesizer(sys, options).run()


def _rpi_margin(A_cl: ndarray, P: HPolytope, disturbance: HPolytope) -> float:
    return subset_margin(minkowski_sum(linear_map(A_cl, P), disturbance), P)


def _schur_margin(A_cl: ndarray) -> float:
    return 1.0 - spectral_radius(A_cl)


def validate(design: TubeDesign) -> AssumptionReport:
    """Re-verify every design property from the stored sets and gains.

    Inclusions pass within 1e-8; the strict interior checks need a positive
    margin. Nothing is raised, a failure is a report entry.

    :param design: design to check
    """
    sys = design.system
    results: List[CheckResult] = []

    def record(check: DesignCheck, i: Optional[int], margin: float, strict: bool = False, vacuous: bool = False):
        passed = vacuous or (margin > 0 if strict else margin >= -CHECK_TOL)
        results.append(CheckResult(check, i, bool(passed), float(margin), vacuous))

    def guarded(check: DesignCheck, i: Optional[int], compute, strict: bool = False) -> None:
        try:
            record(check, i, compute(), strict)
        except _GEOMETRY_ERRORS as e:
            logger.warning(f"{check.value} could not be evaluated: {e}")
            record(check, i, -np.inf, strict)

    K_T = [d.K_T for d in design]
    K_hat = [d.K_hat for d in design]
    guarded(DesignCheck.global_schur, None, lambda: _schur_margin(sys.A + sys.B @ block_diag(*K_T)), strict=True)
    guarded(
        DesignCheck.global_outer_schur, None, lambda: _schur_margin(sys.A + sys.B @ block_diag(*K_hat)), strict=True
    )

    for d, s in zip(design, sys):
        i = s.index
        A_T, A_hat = _closed_loop(s, d.K_T), _closed_loop(s, d.K_hat)
        guarded(DesignCheck.local_schur, i, lambda: _schur_margin(A_T), strict=True)
        guarded(DesignCheck.outer_schur, i, lambda: _schur_margin(A_hat), strict=True)
        guarded(DesignCheck.z_rpi, i, lambda: _rpi_margin(A_T, d.Z, d.W))
        guarded(
            DesignCheck.tightened_sets,
            i,
            lambda: min(P.origin_margin() for P in (d.X_hat, d.U_hat, d.X_hathat, d.U_hathat)),
            strict=True,
        )
        if d.isolated:
            record(DesignCheck.uncertainty_reduction, i, np.inf, vacuous=True)
        else:
            guarded(DesignCheck.uncertainty_reduction, i, lambda: subset_margin(d.V, d.W), strict=True)
        guarded(DesignCheck.s_rpi, i, lambda: _rpi_margin(A_hat, d.S, d.V))
        if d.isolated:
            record(DesignCheck.tube_nesting, i, np.inf, vacuous=True)
        else:
            guarded(DesignCheck.tube_nesting, i, lambda: inscribed_box_radius(d.S, d.Z), strict=True)
        guarded(DesignCheck.h_rpi, i, lambda: _rpi_margin(A_hat, d.H, d.D))
        guarded(DesignCheck.s_plus_h, i, lambda: subset_margin(minkowski_sum(d.S, d.H), d.Z))
        if np.isfinite(d.delta):
            guarded(DesignCheck.h_in_box, i, lambda: subset_margin(d.H, box(np.zeros(s.n), d.delta)))
        else:
            record(DesignCheck.h_in_box, i, np.inf, vacuous=True)
        guarded(
            DesignCheck.outer_terminal,
            i,
            lambda: _rpi_margin(A_hat, d.XF_hathat, _terminal_disturbance(sys, s, K_hat, [e.XF_hathat for e in design])),
        )
        guarded(DesignCheck.inner_terminal, i, lambda: _inner_terminal_margin(A_T, d))
        if design.variant is Variant.nested:
            guarded(DesignCheck.terminal_nesting, i, lambda: subset_margin(minkowski_sum(d.XF_hat, d.H), d.XF_hathat))
        guarded(DesignCheck.terminal_cost, i, lambda: _lyapunov_margin(A_hat, d))
    return AssumptionReport(tuple(results))


def _inner_terminal_margin(A_T: ndarray, d: SubsystemDesign) -> float:
    """Invariance of ``XF_hat`` under ``A_T`` and admissibility in ``X_hat``, ``U_hat``."""
    invariance = subset_margin(linear_map(A_T, d.XF_hat), d.XF_hat)
    states = subset_margin(d.XF_hat, d.X_hat)
    inputs = subset_margin(linear_map(d.K_T, d.XF_hat), d.U_hat)
    return min(invariance, states, inputs)


def _lyapunov_margin(A_cl: ndarray, d: SubsystemDesign) -> float:
    residual = A_cl.T @ d.P @ A_cl + d.Q + d.K_hat.T @ d.R @ d.K_hat - d.P
    return -float(np.max(np.abs(residual))) / max(1.0, float(np.max(np.abs(d.P))))
