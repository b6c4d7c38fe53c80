"""Dense two-phase primal simplex for small equality-form linear programs."""

import logging

from dataclasses import dataclass
from enum import Enum, auto
from typing import List, Optional

import numpy as np

from .exceptions import PEFDomainException, PEFSolverException


class LpStatus(Enum):  # pylint: disable=R0903
    """Defines linear program outcomes."""

    FEASIBLE = auto()
    OPTIMAL = auto()
    INFEASIBLE = auto()
    UNBOUNDED = auto()
    ITERATION_LIMIT = auto()


class LpProblem:
    """The program ``A x = b, x >= 0`` with an optional objective ``min c.x``.

    Args:
        a_eq (array_like): Equality constraint matrix, one row per constraint.
        b_eq (array_like): Right hand side.
        objective (array_like): Cost vector to minimize. Defaults to None,
            meaning a pure feasibility problem.

    Raises:
        PEFDomainException: Shapes are inconsistent or entries are not finite.
    """

    def __init__(self, a_eq, b_eq, objective=None):

        self.a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
        self.b_eq = np.asarray(b_eq, dtype=float).reshape(-1)
        self.objective = None if objective is None else np.asarray(objective, dtype=float).reshape(-1)

        rows, cols = self.a_eq.shape
        if self.b_eq.size != rows:
            raise PEFDomainException(f"Right hand side has {self.b_eq.size} entries for {rows} rows.")
        if self.objective is not None and self.objective.size != cols:
            raise PEFDomainException(f"Objective has {self.objective.size} entries for {cols} columns.")
        if not (np.all(np.isfinite(self.a_eq)) and np.all(np.isfinite(self.b_eq))):
            raise PEFDomainException("Linear program data must be finite.")

    @property
    def shape(self):
        return self.a_eq.shape


@dataclass
class LpResult:
    """Outcome of a simplex solve.

    Attributes:
        status (LpStatus): How the solve ended.
        x (np.ndarray): A verified feasible point, when one exists.
        witness (np.ndarray): For infeasible problems, a vector w with
            ``A.T @ w >= 0`` and ``b @ w < 0``.
        objective (float): Optimal objective value, when an objective was given.
        iterations (int): Total pivots over both phases.
    """

    status: LpStatus
    x: Optional[np.ndarray] = None  # pylint: disable=unsubscriptable-object
    witness: Optional[np.ndarray] = None  # pylint: disable=unsubscriptable-object
    objective: Optional[float] = None  # pylint: disable=unsubscriptable-object
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status in (LpStatus.FEASIBLE, LpStatus.OPTIMAL)


class SimplexSolver:
    """Two-phase tableau simplex with Bland's anti-cycling rule.

    Args:
        feasibility_tol (float): Residual accepted for a feasible point and
            the phase one optimum treated as zero.
        max_iterations (int): Pivot budget per phase.
    """

    def __init__(self, feasibility_tol: float = 1e-8, max_iterations: int = 50_000):

        self.feasibility_tol = feasibility_tol
        self.max_iterations = max_iterations
        self.cost_tol = 1e-10
        self.pivot_tol = 1e-11
        self._log = logging.getLogger(__name__)

    def solve(self, problem: LpProblem) -> LpResult:
        """Solve a linear program.

        Args:
            problem (LpProblem): The program to solve.

        Raises:
            PEFSolverException: The final point failed verification.

        Returns:
            LpResult: The verdict with a point or an infeasibility witness.
        """

        a_eq, b_eq = problem.a_eq, problem.b_eq
        rows, cols = a_eq.shape

        # Rows with negative right hand side are negated so artificials start feasible
        signs = np.where(b_eq < 0, -1.0, 1.0)
        tableau = np.zeros((rows + 1, cols + rows + 1))
        tableau[:rows, :cols] = a_eq * signs[:, None]
        tableau[:rows, cols:cols + rows] = np.eye(rows)
        tableau[:rows, -1] = b_eq * signs
        tableau[rows, :cols] = -tableau[:rows, :cols].sum(axis=0)
        tableau[rows, -1] = -tableau[:rows, -1].sum()
        basis = list(range(cols, cols + rows))

        outcome, pivots = self._iterate(tableau, basis, cols)
        if outcome == 'limit':
            return LpResult(LpStatus.ITERATION_LIMIT, iterations=pivots)

        residual = -tableau[rows, -1]
        scale = max(1.0, float(np.max(np.abs(b_eq), initial=0.0)))
        if residual > self.feasibility_tol * scale:
            # Phase one duals, read from the artificial reduced costs
            duals = 1.0 - tableau[rows, cols:cols + rows]
            witness = -signs * duals
            self._log.debug("LP infeasible after %s pivots, phase one value %s", pivots, residual)
            return LpResult(LpStatus.INFEASIBLE, witness=witness, iterations=pivots)

        tableau, basis = self._drop_artificials(tableau, basis, cols)

        total = pivots
        if problem.objective is not None:
            cost = problem.objective
            body = tableau[:-1]
            tableau[-1, :cols] = cost - cost[basis] @ body[:, :cols]
            tableau[-1, -1] = -cost[basis] @ body[:, -1]

            outcome, pivots = self._iterate(tableau, basis, cols)
            total += pivots
            if outcome == 'limit':
                return LpResult(LpStatus.ITERATION_LIMIT, iterations=total)
            if outcome == 'unbounded':
                return LpResult(LpStatus.UNBOUNDED, iterations=total)

        point = np.zeros(cols)
        point[basis] = tableau[:-1, -1]
        point = self._verify(problem, point)
        self._log.debug("LP solved with %s pivots", total)

        if problem.objective is None:
            return LpResult(LpStatus.FEASIBLE, x=point, iterations=total)

        return LpResult(LpStatus.OPTIMAL, x=point, objective=float(problem.objective @ point),
                        iterations=total)

    def _iterate(self, tableau, basis: List[int], entering_limit: int):
        rows = len(basis)
        for pivots in range(self.max_iterations):
            reduced = tableau[-1, :entering_limit]
            candidates = np.flatnonzero(reduced < -self.cost_tol)
            if candidates.size == 0:
                return 'optimal', pivots

            # Bland: lowest index entering, lowest basic index among ratio ties
            col = int(candidates[0])
            column = tableau[:rows, col]
            eligible = column > self.pivot_tol
            if not eligible.any():
                return 'unbounded', pivots

            ratios = np.full(rows, np.inf)
            ratios[eligible] = tableau[:rows, -1][eligible] / column[eligible]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
            row = min(ties, key=lambda i: basis[i])

            self._pivot(tableau, row, col)
            basis[row] = col

        return 'limit', self.max_iterations

    @staticmethod
    def _pivot(tableau, row, col):
        tableau[row] /= tableau[row, col]
        factors = tableau[:, col].copy()
        factors[row] = 0.0
        tableau -= np.outer(factors, tableau[row])

    def _drop_artificials(self, tableau, basis, cols):
        rows = len(basis)
        keep = []
        for row in range(rows):
            if basis[row] >= cols:
                candidates = np.flatnonzero(np.abs(tableau[row, :cols]) > self.pivot_tol)
                if candidates.size == 0:
                    self._log.debug("Dropping redundant constraint row %s", row)
                    continue
                self._pivot(tableau, row, int(candidates[0]))
                basis[row] = int(candidates[0])
            keep.append(row)

        reduced = np.vstack([tableau[keep], tableau[-1:]])
        reduced = np.hstack([reduced[:, :cols], reduced[:, -1:]])
        reduced[-1] = 0.0

        return reduced, [basis[row] for row in keep]

    def _verify(self, problem, point):
        scale = max(1.0, float(np.max(np.abs(problem.b_eq), initial=0.0)))
        if np.min(point, initial=0.0) < -self.feasibility_tol:
            raise PEFSolverException("Simplex returned a point with negative entries.", 'verification', point)

        point = np.clip(point, 0.0, None)
        error = float(np.max(np.abs(problem.a_eq @ point - problem.b_eq), initial=0.0))
        if error > self.feasibility_tol * scale:
            raise PEFSolverException(
                f"Simplex point violates the constraints by {error:.3g}.", 'verification', point
            )

        return point
