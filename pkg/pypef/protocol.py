"""Trial streams, PEF products and min-entropy certificates.

Trials are sampled from a joint distribution with a counter-based generator
seeded per block, the PEF product is accumulated in the log domain, and a
certificate reports the success event together with the min-entropy bounds
that hold when it occurs.
"""

import csv
import hashlib
import itertools
import logging
import math

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .bell import (
    CHSH_SCENARIO,
    MAX_ENUMERATION_ENTRIES,
    Behaviour,
    JointDistribution,
    Scenario,
)
from .entropy import AttackModel, iid_product
from .exceptions import (
    PEFInputException,
    PEFParameterException,
    PEFResourceException,
    PEFVerificationException,
)
from .pef import Pef

_log = logging.getLogger(__name__)

# Trials drawn per seeded block
BLOCK_SIZE = 65536

# Largest number of trial sequences enumerated by the exact checks
MAX_SEQUENCES = 1_000_000

# Slack granted to exact probability checks
EXACT_TOL = 1e-12

_SETTINGS_COLUMNS = ('x', 'y', 'z')
_OUTCOMES_COLUMNS = ('a', 'b', 'c')


@dataclass(frozen=True)
class TrialRecord:
    """One trial: its 1-based index, settings, outcomes and optional attack label."""

    index: int
    settings: Tuple[int, ...]
    outcomes: Tuple[int, ...]
    e: Optional[str] = None  # pylint: disable=unsubscriptable-object


def _sample_cells(probs: np.ndarray, n: int, seed: int, block_size: int = BLOCK_SIZE,
                  workers: int = 1) -> np.ndarray:
    """Draw n flat cell indices by inverse CDF, one seeded Philox stream per block."""

    if n < 0:
        raise PEFParameterException("Number of trials must be nonnegative.")
    if n == 0:
        return np.zeros(0, dtype=np.int64)

    cdf = np.cumsum(np.asarray(probs, dtype=float).reshape(-1))
    blocks = [(start, min(block_size, n - start)) for start in range(0, n, block_size)]
    seeds = np.random.SeedSequence(seed).spawn(len(blocks))

    def draw(job):
        (_, size), child = job
        rng = np.random.Generator(np.random.Philox(child))
        cells = np.searchsorted(cdf, rng.random(size) * cdf[-1], side='right')
        return np.minimum(cells, cdf.size - 1)

    # Blocks are reduced in order, so the result does not depend on ``workers``
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, zip(blocks, seeds)))
    else:
        parts = [draw(job) for job in zip(blocks, seeds)]

    return np.concatenate(parts)


def _records(d: JointDistribution, cells: np.ndarray) -> List[TrialRecord]:
    scenario = d.scenario
    settings = scenario.settings_tuples()
    outcomes = scenario.outcomes_tuples()
    e_index, z_index, c_index = np.unravel_index(cells, d.probs.shape)

    labels = d.e_labels
    return [
        TrialRecord(i + 1, settings[z], outcomes[c], None if labels is None else labels[e])
        for i, (e, z, c) in enumerate(zip(e_index.tolist(), z_index.tolist(), c_index.tolist()))
    ]


def simulate(d: JointDistribution, n: int, seed: int, workers: int = 1) -> List[TrialRecord]:
    """Sample n independent trials from a joint distribution.

    Args:
        d (JointDistribution): The per-trial distribution; side-information
            labels, when present, are copied into the records.
        n (int): Number of trials.
        seed (int): Seed of the generator; equal seeds give equal streams.
        workers (int): Threads drawing blocks concurrently.

    Returns:
        List[TrialRecord]: Records indexed from 1.
    """

    records = _records(d, _sample_cells(d.probs, n, seed, workers=workers))
    _log.debug("Simulated %s trials with seed %s", n, seed)

    return records


def _cell_indices(scenario: Scenario, trials: Sequence[TrialRecord]) -> np.ndarray:
    outcomes = scenario.outcomes_count
    return np.array([scenario.settings_index(t.settings) * outcomes + scenario.outcomes_index(t.outcomes)
                     for t in trials], dtype=np.int64)


def accumulate(f: Pef, trials: Sequence[TrialRecord]) -> float:
    """The log2 PEF product of a trial stream, summed with compensation.

    Raises:
        PEFInputException: A record lies outside the scenario's alphabets.
    """

    cells = _cell_indices(f.scenario, trials)
    if cells.size == 0:
        return 0.0

    return math.fsum(f.log2_values[cells].tolist())


@dataclass
class Certificate:
    """The outcome of a protocol run.

    Attributes:
        n (int): Number of trials.
        beta (float): The PEF power.
        epsilon (float): Error bound.
        log2_p (float): log2 of the success threshold p.
        kappa (float): Completeness bound.
        log2_pef_product (float): log2 of the PEF product.
        success (bool): Whether (epsilon * product)**(-1/beta) <= p.
        bound_smooth (float): Smooth min-entropy bound log2(kappa) - log2(p), or
            None when the run failed.
        bound_plain (float): The bound (1 + 1/beta) log2(kappa) - log2(p) for the
            unconditioned distribution, or None when the run failed.
        digest (str): SHA-256 of the trial file, when certified from a file.
    """

    n: int
    beta: float
    epsilon: float
    log2_p: float
    kappa: float
    log2_pef_product: float
    success: bool
    bound_smooth: Optional[float] = None  # pylint: disable=unsubscriptable-object
    bound_plain: Optional[float] = None  # pylint: disable=unsubscriptable-object
    digest: Optional[str] = None  # pylint: disable=unsubscriptable-object

    @property
    def smoothing(self) -> float:
        return self.epsilon / self.kappa

    @property
    def p(self) -> float:
        return float(np.exp2(self.log2_p))

    def to_dict(self) -> dict:
        return {
            'n': self.n,
            'beta': self.beta,
            'epsilon': self.epsilon,
            'p': self.p,
            'log2_p': self.log2_p,
            'kappa': self.kappa,
            'log2_pef_product': self.log2_pef_product,
            'success': self.success,
            'bound_smooth': self.bound_smooth,
            'bound_plain': self.bound_plain,
            'smoothing': self.smoothing,
            'digest': self.digest,
        }


def certify(f: Pef, trials: Sequence[TrialRecord], epsilon: float, p: Optional[float] = None,  # pylint: disable=unsubscriptable-object
            kappa: float = 1.0, log2_p: Optional[float] = None, digest: Optional[str] = None) -> Certificate:  # pylint: disable=unsubscriptable-object
    """Evaluate the success event and the min-entropy bounds of a run.

    Give the threshold either as ``p`` or as ``log2_p``; thresholds for long
    runs lie below the float range and must use ``log2_p``.

    Args:
        f (Pef): The PEF applied to every trial.
        trials (Sequence[TrialRecord]): The trial stream.
        epsilon (float): Error bound in (0, 1).
        p (float): Success threshold.
        kappa (float): Completeness bound in (0, 1].
        log2_p (float): log2 of the success threshold.
        digest (str): Digest of the trial file, copied to the certificate.

    Raises:
        PEFParameterException: A parameter is out of range or p < |C|**-n.

    Returns:
        Certificate: Bounds are None unless the run succeeded.
    """

    if not 0 < epsilon < 1:
        raise PEFParameterException("epsilon must lie in (0, 1).")
    if not 0 < kappa <= 1:
        raise PEFParameterException("kappa must lie in (0, 1].")
    if (p is None) == (log2_p is None):
        raise PEFParameterException("Give exactly one of p and log2_p.")
    if p is not None:
        if not p > 0:
            raise PEFParameterException("p must be positive.")
        log2_p = math.log2(p)

    n = len(trials)
    floor = -n * math.log2(f.scenario.outcomes_count)
    if log2_p < floor:
        raise PEFParameterException(f"log2(p) = {log2_p} is below -n log2|C| = {floor}.")

    product = accumulate(f, trials)
    success = (product + math.log2(epsilon)) / f.beta >= -log2_p

    certificate = Certificate(n, f.beta, epsilon, float(log2_p), kappa, product, bool(success), digest=digest)
    if success:
        certificate.bound_smooth = math.log2(kappa) - log2_p
        certificate.bound_plain = (1 + 1 / f.beta) * math.log2(kappa) - log2_p

    _log.debug("Certified %s trials: success %s, log2 product %s", n, success, product)

    return certificate


def choose_log2_p(f: Pef, d: JointDistribution, n: int, epsilon: float, quantile: float = 0.05) -> float:
    """A success threshold met with probability about 1 - quantile when trials follow d.

    The log2 PEF product is approximated as normal with the per-trial mean
    and variance of log2 F under d.

    Returns:
        float: log2 p, never below -n log2|C|.
    """

    if not 0 < quantile < 1:
        raise PEFParameterException("quantile must lie in (0, 1).")
    if not 0 < epsilon < 1:
        raise PEFParameterException("epsilon must lie in (0, 1).")

    weights = d.flat
    mean = float(weights @ f.log2_values)
    variance = float(weights @ (f.log2_values - mean) ** 2)
    anticipated = n * mean + norm.ppf(quantile) * math.sqrt(n * variance)
    log2_p = -(anticipated + math.log2(epsilon)) / f.beta

    return max(log2_p, -n * math.log2(f.scenario.outcomes_count))


def _sequence_log2_f(f: Pef, n: int) -> np.ndarray:
    """log2 of the PEF product over every (settings, outcomes) sequence, ordered like ``iid_product``."""

    table = f.log2_values.reshape(f.scenario.settings_count, f.scenario.outcomes_count)
    sequences = table
    for _ in range(n - 1):
        sequences = (sequences[:, None, :, None] + table[None, :, None, :]).reshape(
            sequences.shape[0] * table.shape[0], sequences.shape[1] * table.shape[1]
        )

    return sequences


def _check_enumerable(d: JointDistribution, n: int):
    per_trial = d.probs.size
    if n < 1:
        raise PEFParameterException("Enumeration needs at least one trial.")
    if per_trial ** n > MAX_SEQUENCES:
        raise PEFResourceException(per_trial ** n, MAX_SEQUENCES)


@dataclass
class ErrorBoundReport:
    """Exact failure probabilities of the PEF error bound.

    Attributes:
        n (int): Trials enumerated.
        failure (Dict[float, float]): For each epsilon, the probability that
            the conditional outcome probability reaches (epsilon * product)**(-1/beta).
        max_excess (float): Largest failure probability minus epsilon.
        supermartingale_endpoint (float): E[product * mu(C|Z)**beta].
    """

    n: int
    failure: Dict[float, float]
    max_excess: float
    supermartingale_endpoint: float

    @property
    def holds(self) -> bool:
        return self.max_excess <= EXACT_TOL and self.supermartingale_endpoint <= 1 + EXACT_TOL

    def to_dict(self) -> dict:
        return {
            'n': self.n,
            'failure': {repr(eps): prob for eps, prob in self.failure.items()},
            'max_excess': self.max_excess,
            'supermartingale_endpoint': self.supermartingale_endpoint,
            'holds': self.holds,
        }


def exact_error_check(f: Pef, d: JointDistribution, n: int,
                      epsilon_grid: Optional[Sequence[float]] = None) -> ErrorBoundReport:  # pylint: disable=unsubscriptable-object
    """Enumerate every trial sequence of the IID product of d and check the PEF error bound.

    Args:
        f (Pef): The PEF.
        d (JointDistribution): The per-trial distribution, optionally with side
            information; conditional probabilities are then taken given e.
        n (int): Number of trials.
        epsilon_grid (Sequence[float]): Error bounds to check. Defaults to
            0.01, 0.02, ..., 0.99.

    Raises:
        PEFResourceException: The sequence space is too large to enumerate.
        PEFVerificationException: Some failure probability exceeds its epsilon.

    Returns:
        ErrorBoundReport: The exact probabilities and the supermartingale endpoint.
    """

    _check_enumerable(d, n)
    if epsilon_grid is None:
        epsilon_grid = [k / 100 for k in range(1, 100)]

    product = iid_product(d.probs, n)
    totals = product.sum(axis=2, keepdims=True)
    conditional = np.zeros_like(product)
    np.divide(product, totals, out=conditional, where=totals > 0)
    support = product > 0

    log2_mu = np.full(product.shape, -np.inf)
    np.log2(conditional, out=log2_mu, where=support)
    log2_f = np.broadcast_to(_sequence_log2_f(f, n), product.shape)
    score = log2_f + f.beta * log2_mu

    failure = {}
    for eps in epsilon_grid:
        event = support & (score + math.log2(eps) >= 0)
        failure[float(eps)] = math.fsum(product[event].tolist())

    endpoint = math.fsum((product[support] * np.exp2(score[support])).tolist())
    report = ErrorBoundReport(
        n=n,
        failure=failure,
        max_excess=max(prob - eps for eps, prob in failure.items()),
        supermartingale_endpoint=endpoint,
    )

    if not report.holds:
        raise PEFVerificationException("PEF error bound fails on an enumerated distribution.", report.to_dict())

    return report


def supermartingale_path(f: Pef, trials: Sequence[TrialRecord], d: JointDistribution) -> np.ndarray:
    """Running log2 of prod F(c_i, z_i) mu(c_i | z_i[, e_i])**beta along a run.

    Conditional probabilities come from d, using each record's e label when d
    carries side information.
    """

    conditional = d.conditional()
    indices = _cell_indices(f.scenario, trials)
    rows, cols = np.divmod(indices, f.scenario.outcomes_count)
    if d.has_side_information:
        e_rows = [d.e_labels.index(t.e) if t.e in d.e_labels else -1 for t in trials]
        if -1 in e_rows:
            raise PEFInputException("Trial carries an unknown side-information label.")
    else:
        e_rows = [0] * len(trials)

    mu = conditional[np.asarray(e_rows, dtype=np.int64), rows, cols]
    with np.errstate(divide='ignore'):
        steps = f.log2_values[indices] + f.beta * np.log2(mu)

    return np.cumsum(steps)


@dataclass
class AttackTrace:
    """A sampled attack run with its realized statistics.

    Attributes:
        trials (List[TrialRecord]): Records carrying the e labels.
        e_fractions (Dict[str, float]): Fraction of trials per e label.
        marginal (Behaviour): Empirical behaviour with e summed out, or None
            when some settings tuple was never drawn.
        component_deviation (float): Largest difference between an empirical
            per-e conditional behaviour and its attack component.
        marginal_deviation (float): Largest difference between the empirical
            marginal behaviour and the attack target.
    """

    trials: List[TrialRecord]
    e_fractions: Dict[str, float]
    marginal: Optional[Behaviour]  # pylint: disable=unsubscriptable-object
    component_deviation: float
    marginal_deviation: float


def _empirical_rows(counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    totals = counts.sum(axis=-1, keepdims=True)
    rows = np.zeros_like(counts, dtype=float)
    np.divide(counts, totals, out=rows, where=totals > 0)

    return rows, totals[..., 0] > 0


def attack_trace(a: AttackModel, n: int, seed: int) -> AttackTrace:
    """Sample an attack run and compare its statistics with the attack.

    A joint cell (e, settings, outcomes) is drawn per trial, so a
    single-component attack yields the same stream as ``simulate`` on its
    marginal.
    """

    joint = a.single_trial
    cells = _sample_cells(joint.probs, n, seed)
    trials = _records(joint, cells)

    counts = np.bincount(cells, minlength=joint.probs.size).reshape(joint.probs.shape).astype(float)
    fractions = counts.sum(axis=(1, 2)) / max(n, 1)

    per_e, seen = _empirical_rows(counts)
    expected = joint.conditional()
    component_deviation = float(np.max(np.abs(per_e - expected)[seen], initial=0.0))

    marginal_rows, marginal_seen = _empirical_rows(counts.sum(axis=0))
    target = a.target.conditional()[0]
    marginal_deviation = float(np.max(np.abs(marginal_rows - target)[marginal_seen], initial=0.0))
    marginal = Behaviour(joint.scenario, marginal_rows) if marginal_seen.all() else None

    return AttackTrace(
        trials=trials,
        e_fractions={label: float(frac) for label, frac in zip(joint.e_labels, fractions)},
        marginal=marginal,
        component_deviation=component_deviation,
        marginal_deviation=marginal_deviation,
    )


def _batch_signalling(tables: np.ndarray, scenario: Scenario) -> float:
    """Largest marginal spread of a batch of (settings, outcomes) tables."""

    parties = scenario.parties
    tensor = tables.reshape((-1,) + scenario.settings_shape + scenario.outcomes_shape)
    worst = 0.0
    for size in range(1, parties):
        for group in itertools.combinations(range(parties), size):
            others = [party for party in range(parties) if party not in group]
            marginal = tensor.sum(axis=tuple(1 + parties + party for party in others))
            moved = np.moveaxis(marginal, [1 + party for party in others],
                                list(range(marginal.ndim - len(others), marginal.ndim)))
            spread = np.ptp(moved.reshape(moved.shape[:marginal.ndim - len(others)] + (-1,)), axis=-1)
            worst = max(worst, float(spread.max(initial=0.0)))

    return worst


@dataclass
class ExperimentModelReport:
    """Both trial-model conditions checked on an enumerated attack product.

    Attributes:
        n (int): Trials enumerated.
        settings_residual (float): Largest deviation of the next trial's
            settings distribution, given the past and e, from the fixed one.
        signalling (float): Largest marginal spread of the next trial's
            conditional behaviour given the past and e.
        component_deviation (float): Largest deviation of that behaviour from
            the attack component named by the next trial's e.
    """

    n: int
    settings_residual: float
    signalling: float
    component_deviation: float
    tol: float = EXACT_TOL

    @property
    def holds(self) -> bool:
        return max(self.settings_residual, self.signalling, self.component_deviation) <= self.tol

    def to_dict(self) -> dict:
        doc = dict(self.__dict__)
        doc['holds'] = self.holds

        return doc


def check_experiment_model(attack: AttackModel, n: int) -> ExperimentModelReport:
    """Check the trial-model conditions on the n-fold product of an attack.

    For every trial, every history of settings and outcomes and every
    sequence of e labels, the next trial's settings must follow the fixed
    settings distribution and its behaviour must be the no-signalling
    component selected by its e label.

    Raises:
        PEFResourceException: The product is too large to enumerate.
    """

    joint = attack.single_trial
    scenario = joint.scenario
    per_trial = joint.probs
    entries = per_trial.size ** n
    if n < 1:
        raise PEFParameterException("Enumeration needs at least one trial.")
    if entries > MAX_ENUMERATION_ENTRIES:
        raise PEFResourceException(entries, MAX_ENUMERATION_ENTRIES)

    settings = joint.settings_marginal()
    components = joint.conditional()
    weighted = joint.e_weights() > 0

    tensor = per_trial
    for _ in range(n - 1):
        tensor = np.multiply.outer(tensor, per_trial)

    residual = signalling = deviation = 0.0
    for trial in range(n):
        later = [axis for j in range(trial + 1, n) for axis in (3 * j + 1, 3 * j + 2)]
        reduced = tensor.sum(axis=tuple(later)) if later else tensor
        # Current trial's (e, settings, outcomes) last, every other axis is conditioned on
        current = [3 * trial, 3 * trial + 1, 3 * trial + 2]
        reduced = np.moveaxis(reduced, current, [-3, -2, -1])
        blocks = reduced.reshape((-1,) + per_trial.shape)

        e_totals = blocks.sum(axis=(2, 3))
        live = e_totals > 0
        settings_given = np.zeros(blocks.shape[:3])
        np.divide(blocks.sum(axis=3), e_totals[..., None], out=settings_given, where=e_totals[..., None] > 0)
        residual = max(residual, float(np.max(np.abs(settings_given - settings)[live], initial=0.0)))

        behaviour, _ = _empirical_rows(blocks)
        signalling = max(signalling, _batch_signalling(behaviour[live], scenario))
        gap = np.abs(behaviour - components[None])[live & weighted[None, :]]
        deviation = max(deviation, float(np.max(gap, initial=0.0)))

    report = ExperimentModelReport(n, residual, signalling, deviation)
    _log.debug("Experiment model check over %s trials: %s", n, report)

    return report


def trial_columns(scenario: Scenario, with_e: bool = False) -> List[str]:
    """CSV header for a scenario with at most three parties."""

    if scenario.parties > len(_SETTINGS_COLUMNS):
        raise PEFParameterException("Trial files support at most three parties.")

    columns = ['trial'] + list(_SETTINGS_COLUMNS[:scenario.parties]) + list(_OUTCOMES_COLUMNS[:scenario.parties])
    if with_e:
        columns.append('e')

    return columns


def write_trials(trials: Sequence[TrialRecord], path: str, scenario: Scenario = CHSH_SCENARIO):
    """Write a trial CSV with header ``trial,x,y,a,b[,e]``."""

    with_e = any(t.e is not None for t in trials)
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(trial_columns(scenario, with_e))
        for t in trials:
            row = [t.index, *t.settings, *t.outcomes]
            if with_e:
                row.append('' if t.e is None else t.e)
            writer.writerow(row)


def read_trials(path: str, scenario: Scenario = CHSH_SCENARIO) -> List[TrialRecord]:
    """Read a trial CSV.

    Raises:
        PEFInputException: The file is missing, its header is wrong, indices
            are not contiguous from 1 or a symbol is outside its alphabet.
    """

    parties = scenario.parties
    try:
        with open(path, 'r', newline='') as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header not in (trial_columns(scenario), trial_columns(scenario, with_e=True)):
                raise PEFInputException(f"Unexpected trial header {header!r}.", path=path, line=1)
            with_e = len(header) == 2 * parties + 2

            trials = []
            for line, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise PEFInputException(f"Expected {len(header)} fields, got {len(row)}.", path=path, line=line)
                try:
                    values = [int(value) for value in row[:2 * parties + 1]]
                except ValueError as err:
                    raise PEFInputException(f"Non-integer field: {err}", path=path, line=line) from err

                record = TrialRecord(values[0], tuple(values[1:parties + 1]), tuple(values[parties + 1:]),
                                     (row[-1] or None) if with_e else None)
                if record.index != len(trials) + 1:
                    raise PEFInputException(f"Trial index {record.index} out of sequence.", path=path, line=line)
                try:
                    scenario.settings_index(record.settings)
                    scenario.outcomes_index(record.outcomes)
                except PEFInputException as err:
                    raise PEFInputException(err.message, path=path, line=line) from err
                trials.append(record)
    except OSError as err:
        raise PEFInputException(f"Cannot read trial file: {err}", path=path) from err

    _log.debug("Read %s trials from %s", len(trials), path)

    return trials


def file_digest(path: str) -> str:
    """SHA-256 hex digest of a file."""

    digest = hashlib.sha256()
    try:
        with open(path, 'rb') as handle:
            for chunk in iter(lambda: handle.read(1 << 16), b''):
                digest.update(chunk)
    except OSError as err:
        raise PEFInputException(f"Cannot read file: {err}", path=path) from err

    return digest.hexdigest()

