"""Probability estimation factors.

A PEF with power beta is a positive score F on (outcomes, settings) cells
with E[F(C,Z) p(C|Z)**beta] <= 1 for every distribution of the trial model.
For the (2,2,2) no-signalling model it suffices to check the 24 extremal
distributions. This module checks validity, optimizes PEFs for an
anticipated distribution, builds PEFs from entropy estimators and reports
robustness and the power threshold above which the optimum stops changing.
"""

import itertools
import json
import logging
import math

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize

from .bell import (
    CHSH_SCENARIO,
    JointDistribution,
    Scenario,
    SettingsDistribution,
    SliceCoords,
    joint,
    ns_extremals,
    slice_behaviour,
    uniform_settings,
)
from .exceptions import (
    PEFDomainException,
    PEFInputException,
    PEFParameterException,
    PEFSolverException,
)

# Power above which the (2,2,2) optimum no longer depends on beta
THRESHOLD_BETA = math.log2(4 / 3)

# Smallest value an optimized PEF may take
DEFAULT_FLOOR = 1e-12

# Validity tolerance on the extremal constraints
VALIDITY_TOL = 1e-9

_LN2 = math.log(2)


def model_tag(scenario: Scenario) -> str:
    """The ``ns-nmk`` tag of the no-signalling model of a scenario.

    Dimensions above 9 are kept comma separated, as in ``ns-2,10,2``.
    """

    sizes = (scenario.parties, scenario.settings_per_party, scenario.outcomes_per_setting)
    if max(sizes) > 9:
        return f"ns-{scenario}"

    return 'ns-' + ''.join(str(size) for size in sizes)


def scenario_from_tag(tag: str) -> Scenario:
    """Inverse of ``model_tag``.

    Raises:
        PEFInputException: The tag does not name a no-signalling model.
    """

    if not isinstance(tag, str) or not tag.startswith('ns-'):
        raise PEFInputException(f"Unknown PEF model {tag!r}.")

    sizes = tag[3:]
    if ',' not in sizes:
        if len(sizes) != 3 or not sizes.isdigit():
            raise PEFInputException(f"Unknown PEF model {tag!r}.")
        sizes = ','.join(sizes)

    try:
        return Scenario.parse(sizes)
    except PEFDomainException as err:
        raise PEFInputException(f"Unknown PEF model {tag!r}.") from err


class Pef:
    """A positive trial score F with power beta, held as log2 F.

    Args:
        log2_values (array_like): log2 F over (settings, outcomes) cells in
            canonical order.
        beta (float): The power.
        scenario (Scenario): The Bell scenario. Defaults to (2,2,2).

    Raises:
        PEFDomainException: beta is not positive, a value is not finite or
            the vector has the wrong size.
    """

    def __init__(self, log2_values, beta: float, scenario: Scenario = CHSH_SCENARIO):

        arr = np.array(log2_values, dtype=float).reshape(-1)
        if arr.size != scenario.size:
            raise PEFDomainException(f"PEF needs {scenario.size} values, got {arr.size}.")
        if not np.all(np.isfinite(arr)):
            raise PEFDomainException("PEF values must be positive and finite.")
        if not beta > 0:
            raise PEFDomainException(f"PEF power must be positive, got {beta}.")

        arr.setflags(write=False)
        self.log2_values = arr
        self.beta = float(beta)
        self.scenario = scenario

    @classmethod
    def from_values(cls, values, beta: float, scenario: Scenario = CHSH_SCENARIO) -> 'Pef':
        """Build a PEF from its (strictly positive) values."""

        values = np.asarray(values, dtype=float)
        if np.any(values <= 0):
            raise PEFDomainException("PEF values must be strictly positive.")

        return cls(np.log2(values), beta, scenario)

    @classmethod
    def constant(cls, beta: float, value: float = 1.0, scenario: Scenario = CHSH_SCENARIO) -> 'Pef':
        return cls.from_values(np.full(scenario.size, value), beta, scenario)

    @property
    def values(self) -> np.ndarray:
        return np.exp2(self.log2_values)

    @property
    def log2_g(self) -> np.ndarray:
        """log2 G where F = G**beta."""

        return self.log2_values / self.beta

    def to_dict(self, worst_constraint: Optional[float] = None) -> dict:  # pylint: disable=unsubscriptable-object
        doc = {
            'beta': self.beta,
            'values': [float(value) for value in self.values],
            'log2_values': [float(value) for value in self.log2_values],
            'model': model_tag(self.scenario),
        }
        if worst_constraint is not None:
            doc['validity'] = {'worst_constraint': worst_constraint}

        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> 'Pef':
        """Rebuild a PEF from its JSON document; ``log2_values`` win over ``values``.

        The scenario comes from the ``model`` tag and defaults to (2,2,2) when
        the tag is absent.

        Raises:
            PEFInputException: The document is incomplete or invalid, or its
                values do not fit the tagged scenario.
        """

        try:
            scenario = scenario_from_tag(doc['model']) if 'model' in doc else CHSH_SCENARIO
            if 'log2_values' in doc:
                return cls(doc['log2_values'], doc['beta'], scenario)
            return cls.from_values(doc['values'], doc['beta'], scenario)
        except (KeyError, TypeError, PEFDomainException) as err:
            raise PEFInputException(f"Invalid PEF document: {err}") from err

    def __repr__(self):
        return f"<Pef beta={self.beta!r}>"


def load_pef(path: str) -> Pef:
    """Read a PEF JSON file.

    Raises:
        PEFInputException: The file is missing or invalid.
    """

    try:
        with open(path, 'r') as handle:
            doc = json.load(handle)
    except (OSError, ValueError) as err:
        raise PEFInputException(f"Cannot read PEF file: {err}", path=path) from err

    try:
        return Pef.from_dict(doc)
    except PEFInputException as err:
        raise PEFInputException(err.message, path=path) from err


class EntropyEstimator:
    """An affine score K on (settings, outcomes) cells.

    Valid when E[K] <= E[-log2 p(C|Z)] at every extremal distribution.
    """

    def __init__(self, values, scenario: Scenario = CHSH_SCENARIO):

        arr = np.array(values, dtype=float).reshape(-1)
        if arr.size != scenario.size:
            raise PEFDomainException(f"Estimator needs {scenario.size} values, got {arr.size}.")

        arr.setflags(write=False)
        self.values = arr
        self.scenario = scenario

    def expectation(self, d: JointDistribution) -> float:
        return float(d.flat @ self.values)


def k_star() -> EntropyEstimator:
    """The estimator K*(abxy) = 1 if a xor b = xy, else -3."""

    values = [1.0 if a ^ b == x * y else -3.0
              for (x, y), (a, b) in itertools.product(itertools.product((0, 1), repeat=2), repeat=2)]

    return EntropyEstimator(values)


def is_valid_estimator(k: EntropyEstimator, extremals: Sequence[JointDistribution], tol: float = 1e-12) -> bool:
    """Check the estimator inequality at each extremal distribution."""

    for extremal in extremals:
        conditional = extremal.conditional().sum(axis=0).reshape(-1)
        surprisal = -np.log2(conditional, out=np.zeros_like(conditional), where=conditional > 0)
        if k.expectation(extremal) > float(extremal.flat @ surprisal) + tol:
            return False

    return True


def model_extremals(settings: Optional[SettingsDistribution] = None) -> List[JointDistribution]:  # pylint: disable=unsubscriptable-object
    """The 24 extremal joint distributions of the (2,2,2) no-signalling model."""

    settings = settings or uniform_settings(CHSH_SCENARIO)

    return [joint(box, settings) for box in ns_extremals()]


def _cell_terms(extremals: Sequence[JointDistribution]):
    """Per extremal, the cell probabilities and log conditional probabilities."""

    weights = np.stack([extremal.flat for extremal in extremals])
    conditional = np.stack([extremal.conditional().sum(axis=0).reshape(-1) for extremal in extremals])
    log_conditional = np.log(conditional, out=np.zeros_like(conditional), where=conditional > 0)

    return weights, log_conditional


def constraint_weights(extremals: Sequence[JointDistribution], beta: float) -> np.ndarray:
    """Matrix W with W[i, j] = p_i(cell j) * p_i(c|z)**beta."""

    weights, log_conditional = _cell_terms(extremals)

    return weights * np.exp(beta * log_conditional)


def constraint_values(values: np.ndarray, beta: float, extremals: Sequence[JointDistribution]) -> np.ndarray:
    """E[F p(C|Z)**beta] at each extremal for a nonnegative score array."""

    return constraint_weights(extremals, beta) @ np.asarray(values, dtype=float)


def constraint_excess(f: Pef, extremals: Sequence[JointDistribution]) -> np.ndarray:
    """E[F p(C|Z)**beta] - 1 at each extremal, evaluated without cancellation."""

    weights, log_conditional = _cell_terms(extremals)
    exponents = _LN2 * f.log2_values[None, :] + f.beta * log_conditional

    return (weights * np.expm1(exponents)).sum(axis=1) + (weights.sum(axis=1) - 1.0)


@dataclass
class ValidityReport:
    """Outcome of ``is_valid_pef``."""

    valid: bool
    worst_constraint: float
    worst_index: int
    worst_label: Optional[str] = None  # pylint: disable=unsubscriptable-object


def is_valid_pef(f: Pef, extremals: Sequence[JointDistribution], tol: float = VALIDITY_TOL) -> ValidityReport:
    """Check the PEF inequality at each extremal distribution.

    Validity at the extremals extends to their convex hull.

    Returns:
        ValidityReport: The verdict and the largest constraint value.
    """

    excess = constraint_excess(f, extremals)
    worst = int(np.argmax(excess))

    return ValidityReport(bool(excess[worst] <= tol), 1.0 + float(excess[worst]), worst,
                          extremals[worst].label)


def logprob_rate(f: Pef, d: JointDistribution) -> float:
    """The log-prob rate E_d[log2 F] / beta."""

    return float(d.flat @ f.log2_values) / f.beta


def net_logprob_rate(f: Pef, d: JointDistribution, n: int, epsilon: float) -> float:
    """The log-prob rate with the finite-n penalty log2(epsilon) / (n beta)."""

    if n < 1:
        raise PEFParameterException("n must be a positive integer.")
    if not 0 < epsilon < 1:
        raise PEFParameterException("epsilon must lie in (0, 1).")

    return logprob_rate(f, d) + math.log2(epsilon) / (n * f.beta)


def power_rescale(f: Pef, gamma: float) -> Pef:
    """F**gamma as a PEF with power gamma * beta, for gamma in (0, 1]; the log-prob rate is unchanged."""

    if not 0 < gamma <= 1:
        raise PEFParameterException("gamma must lie in (0, 1].")

    return Pef(gamma * f.log2_values, gamma * f.beta, f.scenario)


@dataclass
class PefOptConfig:
    """Parameters of a PEF optimization.

    Attributes:
        beta (float): The PEF power.
        target (JointDistribution): The anticipated distribution rho.
        n (int): Planned number of trials, used for the net rate.
        epsilon (float): Error bound, used for the net rate.
        floor (float): Smallest permitted PEF value.
        restarts (int): Number of solver starts.
        seed (int): Seed for the perturbed starting points.
        gap_tol (float): Duality gap on the rate at which the barrier stops.
        kkt_tol (float): Largest relative KKT residual accepted as converged.

    Raises:
        PEFParameterException: A parameter is out of range.
    """

    beta: float
    target: JointDistribution
    n: int = 1
    epsilon: float = 1e-4
    floor: float = DEFAULT_FLOOR
    restarts: int = 10
    seed: int = 0
    gap_tol: float = 1e-9
    kkt_tol: float = 1e-6

    def __post_init__(self):
        if not self.beta > 0:
            raise PEFParameterException("beta must be positive.")
        if not 0 < self.epsilon < 1:
            raise PEFParameterException("epsilon must lie in (0, 1).")
        if not 0 < self.floor <= 1:
            raise PEFParameterException("floor must lie in (0, 1].")
        if not 0 < self.kkt_tol < 1:
            raise PEFParameterException("kkt_tol must lie in (0, 1).")
        if self.n < 1 or self.restarts < 1:
            raise PEFParameterException("n and restarts must be positive integers.")
        if self.target.has_side_information:
            raise PEFParameterException("The anticipated distribution carries no side information.")


@dataclass
class OptimizationResult:
    """Outcome of ``optimize_pef``.

    Attributes:
        pef (Pef): The best PEF found.
        rate (float): Its log-prob rate at the target.
        net_rate (float): Its net log-prob rate for the configured n and epsilon.
        converged (bool): Whether every convergence criterion was met.
        status (str): ``converged`` or the reason it was not.
        kkt_residual (float): Relative KKT residual at the solution, see ``PefOptimizer.kkt_residual``.
        max_violation (float): Largest extremal constraint excess.
        restart_spread (float): Range of the rates reached by the restarts.
        iterations (int): Newton steps of the returned run.
    """

    pef: Pef
    rate: float
    net_rate: float
    converged: bool
    status: str
    kkt_residual: float
    max_violation: float
    restart_spread: float
    iterations: int
    restart_rates: List[float] = field(default_factory=list)


class PefOptimizer:
    """Log-barrier Newton solver for the PEF program.

    Maximizes sum_j rho_j log2(F_j) / beta subject to W F <= 1 and
    F >= floor, where W holds the extremal constraint weights. The iterate
    is the offset v = F - 1 so the constraint slacks are computed without
    cancellation; the barrier parameter grows geometrically until the
    duality gap on the rate falls below the configured tolerance.

    Args:
        growth (float): Factor applied to the barrier parameter per stage.
        newton_tol (float): Half squared Newton decrement ending a centering stage.
        max_newton (int): Newton step budget per centering stage.
    """

    def __init__(self, growth: float = 10.0, newton_tol: float = 1e-11, max_newton: int = 200):

        self.growth = growth
        self.newton_tol = newton_tol
        self.max_newton = max_newton
        self._log = logging.getLogger(__name__)

    def optimize(self, cfg: PefOptConfig, extremals: Sequence[JointDistribution]) -> OptimizationResult:
        """Run every restart and return the best verified PEF."""

        weights = constraint_weights(extremals, cfg.beta)
        slack0 = 1.0 - weights.sum(axis=1)
        cost = cfg.target.flat / (cfg.beta * _LN2)
        lower = cfg.floor - 1.0
        rng = np.random.Generator(np.random.Philox(cfg.seed))

        runs = []
        for restart in range(cfg.restarts):
            start = np.full(cost.size, -0.01)
            if restart:
                start = -rng.uniform(0.005, 0.05, size=cost.size)
            runs.append(self._barrier(start, weights, slack0, cost, lower, cfg.gap_tol))

        finished = [run for run in runs if run['converged']] or runs
        best = max(finished, key=lambda run: run['rate'])
        rates = [run['rate'] for run in finished]
        spread = max(rates) - min(rates)

        pef = Pef(np.log1p(best['v']) / _LN2, cfg.beta, cfg.target.scenario)
        excess = constraint_excess(pef, extremals)
        violation = max(float(excess.max()), 0.0)

        status = 'converged'
        if not best['converged']:
            status = best['status']
        elif violation >= VALIDITY_TOL:
            status = 'infeasible_iterate'
        elif best['kkt'] >= cfg.kkt_tol:
            status = 'kkt_residual'
        elif spread > 1e-6:
            status = 'restart_disagreement'

        result = OptimizationResult(
            pef=pef,
            rate=logprob_rate(pef, cfg.target),
            net_rate=net_logprob_rate(pef, cfg.target, cfg.n, cfg.epsilon),
            converged=status == 'converged',
            status=status,
            kkt_residual=best['kkt'],
            max_violation=violation,
            restart_spread=spread,
            iterations=best['iterations'],
            restart_rates=[run['rate'] for run in runs],
        )

        if result.converged:
            self._log.debug("PEF at beta %s: rate %s after %s Newton steps", cfg.beta, result.rate,
                            result.iterations)
        else:
            self._log.warning("PEF optimization at beta %s did not converge (%s); returning best iterate",
                              cfg.beta, status)

        return result

    def _barrier(self, v, weights, slack0, cost, lower, gap_tol):
        barrier_terms = weights.shape[0] + v.size
        t = 1.0
        iterations = 0
        status = 'converged'

        while True:
            v, steps, centred = self._centre(v, t, weights, slack0, cost, lower)
            iterations += steps
            if not centred:
                status = 'centering_failed'
                break
            if barrier_terms / t <= gap_tol:
                break
            t *= self.growth

        return {
            'v': v,
            'rate': float(cost @ np.log1p(v)),
            'converged': status == 'converged',
            'status': status,
            'iterations': iterations,
            'kkt': self.kkt_residual(v, t, weights, slack0, cost, lower),
        }

    @staticmethod
    def kkt_residual(v, t, weights, slack0, cost, lower) -> float:
        """Relative KKT residual of the iterate v = F - 1.

        Two multiplier estimates are scored by the larger of their
        stationarity and complementarity residuals, relative to the largest
        objective marginal: the central path duals 1 / (t * slack), and a
        nonnegative least squares fit that penalizes multipliers on slack
        constraints. The smaller score is returned.
        """

        slacks = np.concatenate([slack0 - weights @ v, v - lower])
        marginal = cost / (1.0 + v)
        system = np.hstack([weights.T, -np.eye(v.size)])
        scale = max(float(np.max(np.abs(marginal))), 1.0)

        def score(multipliers):
            stationarity = np.max(np.abs(marginal - system @ multipliers))
            complementarity = np.max(np.abs(multipliers * slacks))
            return float(max(stationarity, complementarity) / scale)

        central = score(1.0 / (t * slacks))
        try:
            fitted, _ = scipy.optimize.nnls(np.vstack([system, np.diag(slacks)]),
                                            np.concatenate([marginal, np.zeros(slacks.size)]),
                                            maxiter=50 * slacks.size)
        except RuntimeError:
            return central

        return min(central, score(fitted))

    def _centre(self, v, t, weights, slack0, cost, lower):
        for step in range(self.max_newton):
            slack = slack0 - weights @ v
            gap = v - lower
            shifted = 1.0 + v
            scaled = weights / slack[:, None]

            grad = -t * cost / shifted + weights.T @ (1.0 / slack) - 1.0 / gap
            hess = scaled.T @ scaled
            hess[np.diag_indices_from(hess)] += t * cost / shifted ** 2 + 1.0 / gap ** 2

            direction = self._newton_direction(hess, grad)
            decrement = float(-grad @ direction)
            if decrement / 2 <= self.newton_tol:
                return v, step, True

            # Damped step keeps the iterate strictly inside the domain
            size = 1.0 / (1.0 + math.sqrt(decrement)) if decrement > 0.0625 else 1.0
            while True:
                candidate = v + size * direction
                if (np.all(slack0 - weights @ candidate > 0) and np.all(candidate > lower)
                        and np.all(candidate > -1.0)):
                    break
                size /= 2
                if size < 1e-16:
                    return v, step, False
            v = candidate

        return v, self.max_newton, False

    @staticmethod
    def _newton_direction(hess, grad):
        # Symmetric diagonal scaling before the Cholesky solve
        scale = 1.0 / np.sqrt(np.diag(hess))
        scaled = hess * scale[:, None] * scale[None, :]
        try:
            factor = scipy.linalg.cho_factor(scaled)
            return -scale * scipy.linalg.cho_solve(factor, scale * grad)
        except np.linalg.LinAlgError:
            return -scale * scipy.linalg.lstsq(scaled, scale * grad)[0]


def optimize_pef(cfg: PefOptConfig, extremals: Optional[Sequence[JointDistribution]] = None) -> OptimizationResult:  # pylint: disable=unsubscriptable-object
    """Find the PEF with the largest log-prob rate at the anticipated distribution.

    Args:
        cfg (PefOptConfig): Power, target and solver parameters.
        extremals (Sequence[JointDistribution]): Extremal distributions of the
            trial model. Defaults to the 24 (2,2,2) no-signalling extremals
            with the target's settings distribution.

    Returns:
        OptimizationResult: The PEF, its rates and the convergence record.
        Results that miss a convergence criterion are returned with
        ``converged`` False and the best iterate.
    """

    if extremals is None:
        settings = SettingsDistribution(cfg.target.scenario, cfg.target.settings_marginal())
        extremals = model_extremals(settings)

    return PefOptimizer().optimize(cfg, extremals)


def pef_from_estimator(k: EntropyEstimator, eps: float, extremals: Sequence[JointDistribution],
                       bisections: int = 40) -> Pef:
    """The PEF F = 2**((K - eps) gamma) with power gamma for the largest feasible gamma found.

    Starting at gamma = 1 the power is halved until F is valid, then refined
    upward by bisection.

    Args:
        k (EntropyEstimator): A valid entropy estimator.
        eps (float): Rate offset in (0, 1/2).
        extremals (Sequence[JointDistribution]): Extremal distributions of the model.
        bisections (int): Bisection steps after a feasible power is found.

    Raises:
        PEFParameterException: eps is outside (0, 1/2).
        PEFSolverException: No feasible power was found.

    Returns:
        Pef: The estimator-derived PEF; its log-prob rate at any d is E_d[K] - eps.
    """

    if not 0 < eps < 0.5:
        raise PEFParameterException("eps must lie in (0, 1/2).")

    offsets = k.values - eps

    def feasible(gamma):
        return bool(np.all(constraint_excess(Pef(offsets * gamma, gamma, k.scenario), extremals) <= 0))

    gamma = 1.0
    if feasible(gamma):
        low = gamma
        while feasible(2 * low) and low < 1024:
            low *= 2
        high = 2 * low
    else:
        for _ in range(1000):
            gamma /= 2
            if feasible(gamma):
                break
        else:
            raise PEFSolverException("No feasible power found for the estimator.", 'no_feasible_power')
        low, high = gamma, 2 * gamma

    for _ in range(bisections):
        middle = (low + high) / 2
        if feasible(middle):
            low = middle
        else:
            high = middle

    return Pef(offsets * low, low, k.scenario)


def f_k(k: int, extremals: Optional[Sequence[JointDistribution]] = None) -> Pef:  # pylint: disable=unsubscriptable-object
    """The PEF built from K* with offset e**-k."""

    return pef_from_estimator(k_star(), math.exp(-k), extremals or model_extremals())


@dataclass
class RobustnessReport:
    """Robustness of a PEF's rate between two distributions.

    Attributes:
        bound (float): (L - l) times the total variation distance.
        actual_gap (float): |O_rho - O_sigma|.
        tv (float): Total variation distance of rho and sigma.
        radius (float): O_rho / (L - l), the distance within which sigma
            keeps a positive rate.
        spread (float): L - l, the range of log2 G.
    """

    bound: float
    actual_gap: float
    tv: float
    radius: float
    spread: float

    @property
    def holds(self) -> bool:
        return self.actual_gap <= self.bound + 1e-12


def robustness(f: Pef, rho: JointDistribution, sigma: JointDistribution) -> RobustnessReport:
    """Bound the change in log-prob rate when the distribution moves from rho to sigma.

    Raises:
        PEFDomainException: The PEF is constant, so no bound applies.
    """

    log2_g = f.log2_g
    spread = float(log2_g.max() - log2_g.min())
    if spread <= 0:
        raise PEFDomainException("Robustness is undefined for a constant PEF.")

    rate_rho = float(rho.flat @ log2_g)
    rate_sigma = float(sigma.flat @ log2_g)
    tv = 0.5 * float(np.abs(rho.flat - sigma.flat).sum())

    return RobustnessReport(
        bound=spread * tv,
        actual_gap=abs(rate_rho - rate_sigma),
        tv=tv,
        radius=rate_rho / spread,
        spread=spread,
    )


def threshold_counterexample(settings: Optional[SettingsDistribution] = None) -> np.ndarray:  # pylint: disable=unsubscriptable-object
    """The score (1/3)[a xor b = xy] / s(xy), valid only at powers of at least log2(4/3).

    It has zeros, so it is returned as a raw array for ``constraint_values``.
    """

    settings = settings or uniform_settings(CHSH_SCENARIO)
    values = np.zeros(16)
    for (x, y), (a, b) in itertools.product(itertools.product((0, 1), repeat=2), repeat=2):
        if a ^ b == x * y:
            values[4 * (2 * x + y) + 2 * a + b] = 1.0 / (3.0 * settings.probs[2 * x + y])

    return values


@dataclass
class BetaThresholdReport:
    """Evidence that the (2,2,2) optimum is independent of beta above log2(4/3).

    Attributes:
        threshold (float): log2(4/3).
        betas (List[float]): Powers compared.
        max_deviation (float): Largest entrywise difference of the optimal PEF values.
        below_offset (float): Distance below the threshold of the tested power.
        pr_value_below (float): Counterexample constraint at PR:000 below the threshold.
        pr_value_at (float): Counterexample constraint at PR:000 at the threshold.
        ld_values (List[float]): Distinct counterexample constraints at the LD boxes.
        converged (bool): Whether every optimization converged.
    """

    threshold: float
    betas: List[float]
    max_deviation: float
    below_offset: float
    pr_value_below: float
    pr_value_at: float
    ld_values: List[float]
    converged: bool

    @property
    def consistent(self) -> bool:
        return (self.max_deviation <= 1e-6
                and self.pr_value_at <= 1 + 1e-12
                and self.pr_value_below > 1
                and all(value <= 1 + 1e-12 for value in self.ld_values))

    def to_dict(self) -> dict:
        doc = dict(self.__dict__)
        doc['consistent'] = self.consistent

        return doc


def beta_threshold_report(target: Optional[JointDistribution] = None,  # pylint: disable=unsubscriptable-object
                          betas: Sequence[float] = (THRESHOLD_BETA, 0.5, 0.7, 1.0),
                          below_offset: float = 0.05, restarts: int = 1) -> BetaThresholdReport:
    """Compare optimal PEFs across powers above the threshold and test the counterexample.

    Args:
        target (JointDistribution): Anticipated distribution. Defaults to the
            slice point (S=2.6, S'=0) with uniform settings.
        betas (Sequence[float]): Powers at or above the threshold.
        below_offset (float): How far below the threshold to test.
        restarts (int): Solver restarts per power.
    """

    settings = uniform_settings(CHSH_SCENARIO)
    target = target or joint(slice_behaviour(SliceCoords(2.6, 0.0)), settings)
    extremals = model_extremals(settings)

    results = [optimize_pef(PefOptConfig(beta, target, restarts=restarts), extremals) for beta in betas]
    stacked = np.stack([result.pef.values for result in results])
    deviation = float(np.max(stacked.max(axis=0) - stacked.min(axis=0)))

    counterexample = threshold_counterexample(settings)
    below = constraint_values(counterexample, THRESHOLD_BETA - below_offset, extremals)
    at = constraint_values(counterexample, THRESHOLD_BETA, extremals)
    ld_values = sorted({round(float(value), 12) for value in at[8:]})

    return BetaThresholdReport(
        threshold=THRESHOLD_BETA,
        betas=[float(beta) for beta in betas],
        max_deviation=deviation,
        below_offset=below_offset,
        pr_value_below=float(below[0]),
        pr_value_at=float(at[0]),
        ld_values=ld_values,
        converged=all(result.converged for result in results),
    )


def beta_grid(low: float = 1e-3, high: float = 1e-1, count: int = 200) -> np.ndarray:
    """Log-spaced powers for sweeps."""

    if not 0 < low < high or count < 2:
        raise PEFParameterException("Beta grid needs 0 < low < high and at least two points.")

    return np.geomspace(low, high, count)


@dataclass
class SweepRow:
    """Optimal rate at one power, with the net rate for each planned n."""

    beta: float
    rate: float
    net_rates: Tuple[float, ...]
    converged: bool


def rate_sweep(target: JointDistribution, betas: Sequence[float], ns: Sequence[int], epsilon: float,
               restarts: int = 1, seed: int = 0) -> List[SweepRow]:
    """Optimize a PEF at every power of a grid.

    Each grid cell uses the seed ``seed + index`` for its restarts.
    """

    settings = SettingsDistribution(target.scenario, target.settings_marginal())
    extremals = model_extremals(settings)

    rows = []
    for index, beta in enumerate(betas):
        cfg = PefOptConfig(float(beta), target, epsilon=epsilon, restarts=restarts, seed=seed + index)
        result = optimize_pef(cfg, extremals)
        nets = tuple(net_logprob_rate(result.pef, target, n, epsilon) for n in ns)
        rows.append(SweepRow(float(beta), result.rate, nets, result.converged))

    return rows


def best_beta(rows: Sequence[SweepRow], n_index: int = 0) -> SweepRow:
    """The sweep row with the largest net rate for the n at ``n_index``."""

    return max(rows, key=lambda row: row.net_rates[n_index])


def slice_rate(f: Pef, coords: SliceCoords, settings: Optional[SettingsDistribution] = None) -> float:  # pylint: disable=unsubscriptable-object
    """Log-prob rate of a PEF at a slice point."""

    settings = settings or uniform_settings(CHSH_SCENARIO)

    return logprob_rate(f, joint(slice_behaviour(coords), settings))


def slice_zero_rate_intercept(f: Pef, s_prime: float = 0.0,
                              settings: Optional[SettingsDistribution] = None) -> Optional[float]:  # pylint: disable=unsubscriptable-object
    """The S at which a PEF's rate vanishes along a line of constant S'.

    The rate is affine in S along the line, so two evaluations fix it.

    Returns:
        Optional[float]: The intercept, or None if the rate does not depend on S.
    """

    first, second = 0.0, 4.0 - abs(s_prime)
    rate_first = slice_rate(f, SliceCoords(first, s_prime), settings)
    rate_second = slice_rate(f, SliceCoords(second, s_prime), settings)
    if rate_second == rate_first:
        return None

    return first - rate_first * (second - first) / (rate_second - rate_first)


def slice_rate_grid(f: Pef, s_count: int = 41, s_prime_count: int = 81,
                    settings: Optional[SettingsDistribution] = None) -> List[Tuple[float, float, float]]:  # pylint: disable=unsubscriptable-object
    """Rates of a fixed PEF over the quantum part of the slice with 2 <= S <= 2 sqrt 2 and |S'| <= 2.

    Returns:
        List[Tuple[float, float, float]]: (S', S, rate) triples.
    """

    rows = []
    for s_prime in np.linspace(-2.0, 2.0, s_prime_count):
        for s_val in np.linspace(2.0, 2 * math.sqrt(2), s_count):
            # The disc lies inside the no-signalling diamond
            if s_val ** 2 + s_prime ** 2 > 8:
                continue
            coords = SliceCoords(float(s_val), float(s_prime))
            rows.append((float(s_prime), float(s_val), slice_rate(f, coords, settings)))

    return rows


def estimator_report(k: EntropyEstimator, extremals: Sequence[JointDistribution]) -> Dict[str, float]:
    """Expectation of the estimator at each labelled extremal."""

    return {extremal.label: k.expectation(extremal) for extremal in extremals}
