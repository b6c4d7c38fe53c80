"""Local-polytope geometry by linear programming.

Membership of a behaviour in the local polytope, identification of the CHSH
simplex a nonlocal (2,2,2) behaviour lives in, its unique decomposition into
one PR box and eight local deterministic boxes, and the strength of
non-locality.
"""

import functools
import itertools
import logging

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bell import (
    CHSH_SCENARIO,
    Behaviour,
    Scenario,
    chsh_value,
    chsh_values,
    ld_box,
    ld_enumerate,
    mix,
    no_signalling_check,
    pr_box,
    pr_boxes,
    special_boxes,
)
from .exceptions import PEFDomainException, PEFSolverException
from .lp import LpProblem, LpResult, LpStatus, SimplexSolver

_log = logging.getLogger(__name__)

# Strict violation margin for CHSH functionals
VIOLATION_TOL = 1e-10

# Largest barycentric residual accepted for a decomposition
RESIDUAL_TOL = 1e-9

# LD boxes saturating each CHSH functional, keyed by (alpha, beta, gamma)
SIMPLEX_LD_LABELS: Dict[Tuple[int, int, int], Tuple[str, ...]] = {
    (0, 0, 0): ('0000', '0101', '0010', '0111', '1000', '1101', '1011', '1110'),
    (0, 0, 1): ('0001', '0011', '0100', '0110', '1001', '1010', '1100', '1111'),
    (0, 1, 0): ('0000', '0010', '0101', '0111', '1001', '1010', '1100', '1111'),
    (0, 1, 1): ('0001', '0011', '0100', '0110', '1000', '1011', '1101', '1110'),
    (1, 0, 0): ('0000', '0011', '0101', '0110', '1000', '1010', '1101', '1111'),
    (1, 0, 1): ('0001', '0010', '0100', '0111', '1001', '1011', '1100', '1110'),
    (1, 1, 0): ('0001', '0010', '0100', '0111', '1000', '1010', '1101', '1111'),
    (1, 1, 1): ('0000', '0011', '0101', '0110', '1001', '1011', '1100', '1110'),
}


def lp_feasible(problem: LpProblem, solver: Optional[SimplexSolver] = None) -> LpResult:  # pylint: disable=unsubscriptable-object
    """Decide feasibility of ``A x = b, x >= 0`` (and optimize, if an objective is set).

    Args:
        problem (LpProblem): The linear program.
        solver (SimplexSolver): Solver to use. Defaults to a fresh one.

    Raises:
        PEFSolverException: The solver could not produce a verified answer.

    Returns:
        LpResult: A verified point, or a Farkas witness for infeasible programs.
    """

    result = (solver or SimplexSolver()).solve(problem)
    if result.status in (LpStatus.ITERATION_LIMIT, LpStatus.UNBOUNDED) and problem.objective is None:
        raise PEFSolverException("Feasibility problem did not terminate cleanly.", result.status.name)

    return result


@dataclass
class SeparatingFunctional:
    """An affine functional f(v) = coefficients . v + offset.

    A witness of nonlocality is nonnegative on every local deterministic
    behaviour and negative on the behaviour it separates.
    """

    coefficients: np.ndarray
    offset: float

    def evaluate(self, b: Behaviour) -> float:
        return float(self.coefficients @ b.probs + self.offset)


@dataclass
class MembershipVerdict:
    """Result of ``local_membership``.

    Attributes:
        local (bool): Whether the behaviour lies in the local polytope.
        weights (Dict[str, float]): LD weights reconstructing the behaviour
            (only positive weights are listed), when local.
        witness (SeparatingFunctional): Separating functional, when nonlocal.
        reconstruction_error (float): Max entrywise error of the weights, when local.
    """

    local: bool
    weights: Optional[Dict[str, float]] = None  # pylint: disable=unsubscriptable-object
    witness: Optional[SeparatingFunctional] = None  # pylint: disable=unsubscriptable-object
    reconstruction_error: Optional[float] = None  # pylint: disable=unsubscriptable-object

    def to_dict(self) -> dict:
        doc = {'local': self.local}
        if self.local:
            doc['weights'] = dict(sorted(self.weights.items()))
            doc['reconstruction_error'] = self.reconstruction_error
        else:
            doc['witness'] = {
                'coefficients': [float(value) for value in self.witness.coefficients],
                'offset': float(self.witness.offset),
            }

        return doc


@functools.lru_cache(maxsize=8)
def _ld_vertices(scenario: Scenario) -> Tuple[Tuple[str, ...], np.ndarray]:
    boxes = ld_enumerate(scenario)
    matrix = np.stack([box.probs for box in boxes], axis=1)
    matrix.setflags(write=False)

    return tuple(box.label for box in boxes), matrix


def local_membership(b: Behaviour, vertices: Optional[Sequence[Behaviour]] = None) -> MembershipVerdict:  # pylint: disable=unsubscriptable-object
    """Test whether a behaviour is a convex mixture of local deterministic behaviours.

    Args:
        b (Behaviour): The behaviour to test.
        vertices (Sequence[Behaviour]): Labelled LD behaviours to use. Defaults
            to the full enumeration for the behaviour's scenario.

    Raises:
        PEFResourceException: The LD enumeration is too large.

    Returns:
        MembershipVerdict: Weights over LD labels, or a separating functional.
    """

    if vertices is None:
        labels, matrix = _ld_vertices(b.scenario)
    else:
        labels = tuple(vertex.label or f"LD#{index}" for index, vertex in enumerate(vertices))
        matrix = np.stack([vertex.probs for vertex in vertices], axis=1)

    dim = b.scenario.size
    a_eq = np.vstack([matrix, np.ones((1, matrix.shape[1]))])
    b_eq = np.concatenate([b.probs, [1.0]])
    result = lp_feasible(LpProblem(a_eq, b_eq))

    if result.feasible:
        error = float(np.max(np.abs(matrix @ result.x - b.probs)))
        weights = {label: float(w) for label, w in zip(labels, result.x) if w > 0}
        _log.debug("Behaviour %s is local with %s LD components", b, len(weights))
        return MembershipVerdict(True, weights=weights, reconstruction_error=error)

    witness = SeparatingFunctional(result.witness[:dim], float(result.witness[dim]))
    _log.debug("Behaviour %s is nonlocal, witness value %s", b, witness.evaluate(b))

    return MembershipVerdict(False, witness=witness)


def chsh_simplex(alpha: int, beta: int, gamma: int) -> List[Behaviour]:
    """The nine vertices of the nonlocal simplex of B^{alpha beta gamma}.

    Returns:
        List[Behaviour]: The PR box followed by the eight saturating LD boxes.
    """

    lds = [ld_box(*(int(bit) for bit in label)) for label in SIMPLEX_LD_LABELS[(alpha, beta, gamma)]]

    return [pr_box(alpha, beta, gamma)] + lds


def violated_inequality(b: Behaviour) -> Optional[Tuple[int, int, int]]:  # pylint: disable=unsubscriptable-object
    """The CHSH functional a (2,2,2) behaviour violates, if any.

    Returns:
        Optional[Tuple[int, int, int]]: (alpha, beta, gamma) with B > 2, or
        None when no functional exceeds the local bound.
    """

    values = chsh_values(b)
    violated = [bits for bits, value in values.items() if value > 2 + VIOLATION_TOL]
    if not violated:
        return None
    if len(violated) > 1:
        _log.warning("Behaviour %s violates %s CHSH inequalities; it cannot be no-signalling",
                     b, len(violated))

    return max(violated, key=lambda bits: values[bits])


@dataclass
class AttackDecomposition:
    """Weights on one PR box and eight LD boxes reproducing a target.

    Attributes:
        pr (Tuple[int, int, int]): The PR box (alpha, beta, gamma), or None.
        lambda_pr (float): Weight of the PR box.
        ld_weights (Dict[str, float]): Weight of each LD box by ``LD:abcd`` label.
        entropy_bits (float): Conditional Shannon entropy per trial of the
            decomposition, equal to ``lambda_pr``.
        reconstruction_error (float): Max entrywise error of the mixture.
    """

    pr: Optional[Tuple[int, int, int]]  # pylint: disable=unsubscriptable-object
    lambda_pr: float
    ld_weights: Dict[str, float] = field(default_factory=dict)
    entropy_bits: float = 0.0
    reconstruction_error: float = 0.0

    @property
    def pr_label(self) -> Optional[str]:  # pylint: disable=unsubscriptable-object
        return None if self.pr is None else 'PR:' + ''.join(str(bit) for bit in self.pr)

    def components(self) -> List[Tuple[str, float, Behaviour]]:
        """(label, weight, behaviour) for each extremal box with positive weight."""

        parts = []
        if self.pr is not None and self.lambda_pr > 0:
            parts.append((self.pr_label, self.lambda_pr, pr_box(*self.pr)))
        for label, weight in self.ld_weights.items():
            if weight > 0:
                parts.append((label, weight, ld_box(*(int(bit) for bit in label[3:]))))

        return parts

    def to_dict(self) -> dict:
        return {
            'pr': None if self.pr is None else list(self.pr),
            'lambda_pr': self.lambda_pr,
            'ld_weights': dict(sorted(self.ld_weights.items())),
            'entropy_bits': self.entropy_bits,
            'reconstruction_error': self.reconstruction_error,
        }


def decompose_nonlocal(b: Behaviour) -> AttackDecomposition:
    """Decompose a nonlocal no-signalling behaviour into its CHSH simplex vertices.

    The weights solve the 9-vertex barycentric system by least squares; the
    vertices are affinely independent, so the residual must vanish. A
    behaviour on the local boundary (B = 2) gets a decomposition with no PR
    weight.

    Args:
        b (Behaviour): A (2,2,2) no-signalling behaviour with B >= 2.

    Raises:
        PEFDomainException: The behaviour is signalling or strictly local.
        PEFSolverException: The barycentric residual is not negligible.

    Returns:
        AttackDecomposition: The PR weight and the eight LD weights.
    """

    if b.scenario != CHSH_SCENARIO:
        raise PEFDomainException("The nonlocal decomposition is defined for the (2,2,2) scenario.")

    signalling = no_signalling_check(b)
    if not signalling.no_signalling:
        raise PEFDomainException(f"Behaviour is signalling (violation {signalling.violation:.3g}).")

    bits = violated_inequality(b)
    boundary = bits is None
    if boundary:
        values = chsh_values(b)
        bits = max(values, key=values.get)
        if values[bits] < 2 - VIOLATION_TOL:
            raise PEFDomainException(
                "Behaviour is local; use local_membership for a decomposition over LD boxes."
            )

    vertices = chsh_simplex(*bits)
    system = np.vstack([np.stack([vertex.probs for vertex in vertices], axis=1), np.ones((1, 9))])
    rhs = np.concatenate([b.probs, [1.0]])
    weights = np.linalg.lstsq(system, rhs, rcond=None)[0]

    residual = float(np.max(np.abs(system @ weights - rhs)))
    if residual > RESIDUAL_TOL:
        raise PEFSolverException(f"Barycentric residual {residual:.3g} is not negligible.", 'residual', weights)
    if np.min(weights) < -RESIDUAL_TOL:
        raise PEFDomainException("Behaviour lies outside the nonlocal simplex of its violated inequality.")

    weights = np.clip(weights, 0.0, None)
    if boundary:
        weights[0] = 0.0

    reconstruction = system[:-1] @ weights
    lambda_pr = float(weights[0])
    decomposition = AttackDecomposition(
        pr=None if boundary else bits,
        lambda_pr=lambda_pr,
        ld_weights={vertex.label: float(w) for vertex, w in zip(vertices[1:], weights[1:])},
        entropy_bits=lambda_pr,
        reconstruction_error=float(np.max(np.abs(reconstruction - b.probs))),
    )
    _log.debug("Decomposed %s into simplex %s with lambda_pr %s", b, bits, lambda_pr)

    return decomposition


def nonlocality_strength(b: Behaviour) -> float:
    """Scaled total variation distance from a behaviour to the local polytope.

    Solves ``min sum(t+ + t-)`` over LD weights q with ``V q + t+ - t- = b``
    and returns half the optimum divided by the number of settings tuples.

    Raises:
        PEFSolverException: The linear program did not reach an optimum.
    """

    labels, matrix = _ld_vertices(b.scenario)
    dim, count = matrix.shape
    identity = np.eye(dim)
    a_eq = np.vstack([
        np.hstack([matrix, identity, -identity]),
        np.concatenate([np.ones(count), np.zeros(2 * dim)])[None, :],
    ])
    b_eq = np.concatenate([b.probs, [1.0]])
    cost = np.concatenate([np.zeros(count), np.ones(2 * dim)])

    result = lp_feasible(LpProblem(a_eq, b_eq, cost))
    if result.status != LpStatus.OPTIMAL:
        raise PEFSolverException("Distance to the local polytope not found.", result.status.name)

    _log.debug("Nonlocality LP over %s LD vertices took %s pivots", len(labels), result.iterations)

    return 0.5 * max(result.objective, 0.0) / b.scenario.settings_count


@dataclass
class SuiteEntry:
    """One verdict of the counterexample suite."""

    name: str
    scenario: str
    expected_local: bool
    local: bool

    @property
    def passed(self) -> bool:
        return self.expected_local == self.local


def pair_mixture_verdicts() -> List[SuiteEntry]:
    """Membership verdicts for equal mixtures of all 28 pairs of PR boxes."""

    entries = []
    for first, second in itertools.combinations(pr_boxes(), 2):
        mixture = mix([first, second], [0.5, 0.5])
        verdict = local_membership(mixture)
        entries.append(SuiteEntry(f"{first.label}+{second.label}", str(CHSH_SCENARIO), True, verdict.local))

    return entries


def counterexample_suite() -> List[SuiteEntry]:
    """Membership verdicts for the equal mixtures of extremal boxes in each scenario.

    In (2,2,2) all PR pair mixtures are local; the (2,2,3) pair, every
    (2,3,2) resolution and the (3,2,2) GHZ correlation are nonlocal.
    """

    boxes = special_boxes()
    entries = pair_mixture_verdicts()

    cglmp = mix([boxes['nl_box_223'], boxes['nl_box_223_relabelled']], [0.5, 0.5])
    entries.append(SuiteEntry('NL223+NL223:relabelled', str(cglmp.scenario), False,
                              local_membership(cglmp).local))

    for bits, (uniform, deterministic) in boxes['nl_boxes_232'].items():
        mixture = mix([uniform, deterministic], [0.5, 0.5])
        name = 'NL232:' + ''.join(str(bit) for bit in bits)
        entries.append(SuiteEntry(name, str(mixture.scenario), False, local_membership(mixture).local))

    ghz = boxes['ghz_mixture_322']
    entries.append(SuiteEntry(ghz.label, str(ghz.scenario), False, local_membership(ghz).local))

    failed = [entry.name for entry in entries if not entry.passed]
    if failed:
        _log.warning("Counterexample verdicts differ from expectation: %s", failed)

    return entries


def chsh_simplex_check() -> Dict[Tuple[int, int, int], bool]:
    """Confirm the tabulated simplex vertices saturate their functional.

    Returns:
        Dict[Tuple[int, int, int], bool]: Per functional, whether the eight
        listed LD boxes are exactly the LD boxes with value 2.
    """

    checks = {}
    for bits, labels in SIMPLEX_LD_LABELS.items():
        saturating = {box.label[3:] for box in ld_enumerate(CHSH_SCENARIO) if chsh_value(box, *bits) == 2}
        checks[bits] = saturating == set(labels)

    return checks
