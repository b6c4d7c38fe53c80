"""Bell scenarios, behaviours, settings distributions and extremal boxes.

All probability vectors use one canonical coordinate order: lexicographic over
settings tuples, and within each settings block lexicographic over outcome
tuples. For the (2,2,2) scenario this gives the blocks xy = 00, 01, 10, 11
with outcomes ab = 00, 01, 10, 11 inside each block.
"""

import itertools
import json
import logging
import math

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exceptions import PEFDomainException, PEFInputException, PEFResourceException

_log = logging.getLogger(__name__)

# Tolerance for normalization and no-signalling checks
NORMALIZATION_TOL = 1e-9

# Largest number of stored entries an LD enumeration may produce
MAX_ENUMERATION_ENTRIES = 20_000_000


@dataclass(frozen=True)
class Scenario:
    """An (n, m, k) Bell scenario.

    Args:
        parties (int): Number of spatially separated parties n.
        settings_per_party (int): Number of measurement settings m per party.
        outcomes_per_setting (int): Number of outcomes k per setting.
    """

    parties: int
    settings_per_party: int
    outcomes_per_setting: int

    def __post_init__(self):
        for name in ('parties', 'settings_per_party', 'outcomes_per_setting'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise PEFDomainException(f"Scenario {name} must be a positive integer, got {value!r}.")

    @classmethod
    def parse(cls, text: str) -> 'Scenario':
        """Build a scenario from the ``n,m,k`` notation.

        Raises:
            PEFInputException: The text is not three comma separated integers.
        """

        try:
            parties, settings, outcomes = (int(part) for part in text.split(','))
        except ValueError as err:
            raise PEFInputException(f"Scenario must be given as n,m,k, got {text!r}.") from err

        return cls(parties, settings, outcomes)

    def __str__(self):
        return f"{self.parties},{self.settings_per_party},{self.outcomes_per_setting}"

    @property
    def settings_count(self) -> int:
        """Number of settings tuples, m**n."""

        return self.settings_per_party ** self.parties

    @property
    def outcomes_count(self) -> int:
        """Number of outcome tuples, k**n."""

        return self.outcomes_per_setting ** self.parties

    @property
    def size(self) -> int:
        """Coordinate count of a behaviour, (k*m)**n."""

        return self.settings_count * self.outcomes_count

    @property
    def settings_shape(self) -> Tuple[int, ...]:
        return (self.settings_per_party,) * self.parties

    @property
    def outcomes_shape(self) -> Tuple[int, ...]:
        return (self.outcomes_per_setting,) * self.parties

    def settings_tuples(self) -> List[Tuple[int, ...]]:
        """All settings tuples in canonical order."""

        return list(itertools.product(range(self.settings_per_party), repeat=self.parties))

    def outcomes_tuples(self) -> List[Tuple[int, ...]]:
        """All outcome tuples in canonical order."""

        return list(itertools.product(range(self.outcomes_per_setting), repeat=self.parties))

    def settings_index(self, settings: Sequence[int]) -> int:
        """Canonical index of a settings tuple.

        Raises:
            PEFInputException: The tuple is outside the settings alphabet.
        """

        return self._index(settings, self.settings_shape, 'settings')

    def outcomes_index(self, outcomes: Sequence[int]) -> int:
        """Canonical index of an outcome tuple.

        Raises:
            PEFInputException: The tuple is outside the outcome alphabet.
        """

        return self._index(outcomes, self.outcomes_shape, 'outcomes')

    @staticmethod
    def _index(symbols, shape, kind):
        if len(symbols) != len(shape) or any(s < 0 or s >= d for s, d in zip(symbols, shape)):
            raise PEFInputException(f"{kind} {tuple(symbols)} outside alphabet of shape {shape}.")

        return int(np.ravel_multi_index(tuple(symbols), shape))


CHSH_SCENARIO = Scenario(2, 2, 2)


class Behaviour:
    """Conditional outcome probabilities of a Bell scenario.

    Args:
        scenario (Scenario): The scenario the behaviour belongs to.
        probs (array_like): Probabilities in canonical order, flat or shaped
            (settings, outcomes).
        label (str): Optional name such as ``PR:000`` or ``LD:0101``.
        validate (bool): Check range and per-settings normalization.

    Raises:
        PEFDomainException: The vector has the wrong size or is not normalized.
    """

    def __init__(self, scenario: Scenario, probs, label: Optional[str] = None, validate: bool = True):  # pylint: disable=unsubscriptable-object

        table = np.array(probs, dtype=float)
        if table.size != scenario.size:
            raise PEFDomainException(
                f"Behaviour for scenario {scenario} needs {scenario.size} entries, got {table.size}."
            )

        table = table.reshape(scenario.settings_count, scenario.outcomes_count)
        table.setflags(write=False)

        self.scenario = scenario
        self.label = label
        self._table = table

        if validate:
            self._validate()

    def _validate(self):
        if np.any(self._table < -NORMALIZATION_TOL) or np.any(self._table > 1 + NORMALIZATION_TOL):
            raise PEFDomainException("Behaviour entries must lie in [0, 1].")

        block_error = np.max(np.abs(self._table.sum(axis=1) - 1.0))
        if block_error > NORMALIZATION_TOL:
            raise PEFDomainException(
                f"Behaviour is not normalized within each settings block (error {block_error:.3g})."
            )

    @property
    def table(self) -> np.ndarray:
        """Read-only (settings, outcomes) view of the probabilities."""

        return self._table

    @property
    def probs(self) -> np.ndarray:
        """Read-only flat probability vector in canonical order."""

        return self._table.reshape(-1)

    @property
    def tensor(self) -> np.ndarray:
        """Probabilities indexed as ``[x1, ..., xn, a1, ..., an]``."""

        return self._table.reshape(self.scenario.settings_shape + self.scenario.outcomes_shape)

    def prob(self, settings: Sequence[int], outcomes: Sequence[int]) -> float:
        """Probability of ``outcomes`` given ``settings``."""

        return float(self._table[self.scenario.settings_index(settings),
                                 self.scenario.outcomes_index(outcomes)])

    def allclose(self, other: 'Behaviour', tol: float = 1e-12) -> bool:
        """Entrywise comparison with another behaviour of the same scenario."""

        return self.scenario == other.scenario and bool(np.max(np.abs(self._table - other.table)) <= tol)

    def __repr__(self):
        name = f" {self.label}" if self.label else ""
        return f"<Behaviour{name} scenario={self.scenario}>"


class SettingsDistribution:
    """A distribution over settings tuples with every entry strictly positive.

    Raises:
        PEFDomainException: Entries are not positive or do not sum to one.
    """

    def __init__(self, scenario: Scenario, probs):

        arr = np.array(probs, dtype=float).reshape(-1)
        if arr.size != scenario.settings_count:
            raise PEFDomainException(
                f"Settings distribution needs {scenario.settings_count} entries, got {arr.size}."
            )
        if np.any(arr <= 0):
            raise PEFDomainException("Every settings tuple must have positive probability.")
        if abs(arr.sum() - 1.0) > NORMALIZATION_TOL:
            raise PEFDomainException("Settings distribution does not sum to one.")

        arr.setflags(write=False)
        self.scenario = scenario
        self.probs = arr

    def __repr__(self):
        return f"<SettingsDistribution scenario={self.scenario}>"


def uniform_settings(scenario: Scenario = CHSH_SCENARIO) -> SettingsDistribution:
    """The equiprobable settings distribution."""

    return SettingsDistribution(scenario, np.full(scenario.settings_count, 1.0 / scenario.settings_count))


class JointDistribution:
    """A distribution over (settings, outcomes) pairs, optionally extended by a label e.

    Probabilities are held as an array of shape (e, settings, outcomes). A
    distribution without side information has a single e slot and no labels.

    Args:
        scenario (Scenario): The Bell scenario.
        probs (array_like): Probabilities, flat in canonical order (e-major
            when labels are given) or already shaped.
        e_labels (Sequence[str]): Labels of the side-information values.
            Defaults to None.
        label (str): Optional name, usually the label of the behaviour it
            was built from.

    Raises:
        PEFDomainException: The array has the wrong size, negative entries or
            does not sum to one.
    """

    def __init__(self, scenario: Scenario, probs, e_labels: Optional[Sequence[str]] = None,  # pylint: disable=unsubscriptable-object
                 label: Optional[str] = None):  # pylint: disable=unsubscriptable-object

        e_count = 1 if e_labels is None else len(e_labels)
        arr = np.array(probs, dtype=float)
        if arr.size != e_count * scenario.size:
            raise PEFDomainException(
                f"Joint distribution needs {e_count * scenario.size} entries, got {arr.size}."
            )

        arr = arr.reshape(e_count, scenario.settings_count, scenario.outcomes_count)
        if np.any(arr < -NORMALIZATION_TOL):
            raise PEFDomainException("Joint distribution has negative entries.")
        if abs(math.fsum(arr.ravel()) - 1.0) > NORMALIZATION_TOL:
            raise PEFDomainException("Joint distribution does not sum to one.")

        arr = np.clip(arr, 0.0, None)
        arr.setflags(write=False)

        self.scenario = scenario
        self.probs = arr
        self.e_labels = None if e_labels is None else tuple(str(name) for name in e_labels)
        self.label = label

    @property
    def has_side_information(self) -> bool:
        return self.e_labels is not None

    @property
    def table(self) -> np.ndarray:
        """(settings, outcomes) probabilities with e marginalized."""

        return self.probs.sum(axis=0)

    @property
    def flat(self) -> np.ndarray:
        """Flat (settings, outcomes) probabilities in canonical order."""

        return self.table.reshape(-1)

    def settings_marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def e_weights(self) -> np.ndarray:
        """Probability of each side-information value."""

        return self.probs.sum(axis=(1, 2))

    def conditional(self) -> np.ndarray:
        """p(c | z, e) shaped like ``probs``; zero where p(z, e) is zero."""

        totals = self.probs.sum(axis=2, keepdims=True)
        out = np.zeros_like(self.probs)
        np.divide(self.probs, totals, out=out, where=totals > 0)

        return out

    def marginal(self) -> 'JointDistribution':
        """The distribution with side information summed out."""

        return JointDistribution(self.scenario, self.table)

    def behaviour(self) -> Behaviour:
        """The conditional behaviour p(c | z) of the e-marginal.

        Raises:
            PEFDomainException: Some settings tuple has zero probability.
        """

        marginal = self.settings_marginal()
        if np.any(marginal <= 0):
            raise PEFDomainException("Behaviour is undefined where settings have zero probability.")

        return Behaviour(self.scenario, self.table / marginal[:, None])

    def component(self, label: str) -> 'JointDistribution':
        """The distribution conditioned on one side-information value.

        Raises:
            PEFDomainException: The label is unknown or has zero weight.
        """

        if self.e_labels is None or label not in self.e_labels:
            raise PEFDomainException(f"No side-information value {label!r}.")

        block = self.probs[self.e_labels.index(label)]
        weight = block.sum()
        if weight <= 0:
            raise PEFDomainException(f"Side-information value {label!r} has zero weight.")

        return JointDistribution(self.scenario, block / weight)

    def __repr__(self):
        labels = f" e={len(self.e_labels)}" if self.e_labels else ""
        return f"<JointDistribution scenario={self.scenario}{labels}>"


@dataclass(frozen=True)
class SliceCoords:
    """Coordinates (S, S') of the two dimensional no-signalling slice.

    Raises:
        PEFDomainException: The point lies outside the no-signalling diamond.
    """

    S: float
    S_prime: float

    def __post_init__(self):
        tol = 1e-12
        if abs(self.S + self.S_prime) > 4 + tol or abs(self.S - self.S_prime) > 4 + tol:
            raise PEFDomainException(
                f"Slice point (S={self.S}, S'={self.S_prime}) is outside the no-signalling region."
            )

    @property
    def is_quantum(self) -> bool:
        """True inside the disc S**2 + S'**2 <= 8."""

        return self.S ** 2 + self.S_prime ** 2 <= 8


def _parity_label(prefix, bits):
    return prefix + ':' + ''.join(str(bit) for bit in bits)


def pr_box(alpha: int, beta: int, gamma: int) -> Behaviour:
    """The PR box with a xor b = xy xor alpha x xor beta y xor gamma.

    Args:
        alpha (int): Bit multiplying Alice's setting.
        beta (int): Bit multiplying Bob's setting.
        gamma (int): Constant parity offset.

    Returns:
        Behaviour: Entries 1/2 where the parity condition holds, else 0.
    """

    table = np.zeros((4, 4))
    for (x, y), (a, b) in itertools.product(itertools.product((0, 1), repeat=2), repeat=2):
        if a ^ b == (x * y) ^ (alpha * x) ^ (beta * y) ^ gamma:
            table[2 * x + y, 2 * a + b] = 0.5

    return Behaviour(CHSH_SCENARIO, table, label=_parity_label('PR', (alpha, beta, gamma)))


def ld_box(alpha: int, beta: int, gamma: int, delta: int) -> Behaviour:
    """The local deterministic box with a = alpha x xor beta and b = gamma y xor delta."""

    table = np.zeros((4, 4))
    for x, y in itertools.product((0, 1), repeat=2):
        a = (alpha * x) ^ beta
        b = (gamma * y) ^ delta
        table[2 * x + y, 2 * a + b] = 1.0

    return Behaviour(CHSH_SCENARIO, table, label=_parity_label('LD', (alpha, beta, gamma, delta)))


def ld_behaviour(scenario: Scenario, assignment: Sequence[Sequence[int]]) -> Behaviour:
    """The deterministic behaviour of an outcome assignment.

    Args:
        scenario (Scenario): The Bell scenario.
        assignment (Sequence[Sequence[int]]): ``assignment[i][x]`` is the
            outcome party i reports for setting x.

    Returns:
        Behaviour: Entry 1 where every party's outcome matches the assignment.
    """

    table = np.zeros((scenario.settings_count, scenario.outcomes_count))
    for s_index, settings in enumerate(scenario.settings_tuples()):
        outcomes = tuple(assignment[party][x] for party, x in enumerate(settings))
        table[s_index, scenario.outcomes_index(outcomes)] = 1.0

    digits = [outcome for party in assignment for outcome in party]

    return Behaviour(scenario, table, label=_parity_label('LD', digits))


def ld_enumerate(scenario: Scenario, max_entries: int = MAX_ENUMERATION_ENTRIES) -> List[Behaviour]:
    """Enumerate every local deterministic behaviour of a scenario.

    For the (2,2,2) scenario the boxes come in ``ld_box`` order over
    (alpha, beta, gamma, delta) and carry ``LD:abcd`` labels.

    Args:
        scenario (Scenario): The Bell scenario.
        max_entries (int): Largest number of stored probabilities permitted.

    Raises:
        PEFResourceException: The enumeration would exceed ``max_entries``.

    Returns:
        List[Behaviour]: All k**(n*m) deterministic behaviours.
    """

    count = scenario.outcomes_per_setting ** (scenario.parties * scenario.settings_per_party)
    if count * scenario.size > max_entries:
        raise PEFResourceException(count * scenario.size, max_entries)

    if scenario == CHSH_SCENARIO:
        return [ld_box(*bits) for bits in itertools.product((0, 1), repeat=4)]

    per_party = list(itertools.product(range(scenario.outcomes_per_setting),
                                       repeat=scenario.settings_per_party))
    boxes = [ld_behaviour(scenario, assignment)
             for assignment in itertools.product(per_party, repeat=scenario.parties)]
    _log.debug("Enumerated %s LD behaviours for scenario %s", len(boxes), scenario)

    return boxes


def pr_boxes() -> List[Behaviour]:
    """The eight PR boxes in (alpha, beta, gamma) order."""

    return [pr_box(*bits) for bits in itertools.product((0, 1), repeat=3)]


def ns_extremals() -> List[Behaviour]:
    """The 24 extremal points of the (2,2,2) no-signalling polytope, PR boxes first."""

    return pr_boxes() + ld_enumerate(CHSH_SCENARIO)


def mix(behaviours: Sequence[Behaviour], weights: Sequence[float], label: Optional[str] = None) -> Behaviour:  # pylint: disable=unsubscriptable-object
    """Convex combination of behaviours of one scenario.

    Raises:
        PEFDomainException: Weights are negative, do not sum to one, or the
            scenarios differ.
    """

    weights = np.asarray(weights, dtype=float)
    if len(behaviours) != weights.size or not behaviours:
        raise PEFDomainException("Need one weight per behaviour.")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > NORMALIZATION_TOL:
        raise PEFDomainException("Mixture weights must be a probability vector.")

    scenario = behaviours[0].scenario
    if any(b.scenario != scenario for b in behaviours):
        raise PEFDomainException("Cannot mix behaviours of different scenarios.")

    table = np.tensordot(weights, np.stack([b.table for b in behaviours]), axes=1)

    return Behaviour(scenario, table, label=label)


def maximally_random(scenario: Scenario = CHSH_SCENARIO) -> Behaviour:
    """The behaviour with every outcome equally likely."""

    return Behaviour(scenario, np.full(scenario.size, 1.0 / scenario.outcomes_count), label='uniform')


def _require_chsh(b: Behaviour):
    if b.scenario != CHSH_SCENARIO:
        raise PEFDomainException(f"Operation needs a (2,2,2) behaviour, got scenario {b.scenario}.")


def correlators(b: Behaviour) -> np.ndarray:
    """Correlators E[x, y] = sum over ab of (-1)**(a+b) p(ab|xy)."""

    _require_chsh(b)
    signs = np.array([1.0, -1.0, -1.0, 1.0])

    return (b.table @ signs).reshape(2, 2)


def chsh_value(b: Behaviour, alpha: int, beta: int, gamma: int) -> float:
    """Value of the CHSH functional B^{alpha beta gamma}.

    Returns:
        float: A number in [-4, 4]; the local bound is 2.
    """

    corr = correlators(b)
    total = (corr[0, 0]
             + (-1) ** beta * corr[0, 1]
             + (-1) ** alpha * corr[1, 0]
             + (-1) ** (alpha + beta + 1) * corr[1, 1])

    return float((-1) ** gamma * total)


def chsh_values(b: Behaviour) -> Dict[Tuple[int, int, int], float]:
    """All eight CHSH values keyed by (alpha, beta, gamma)."""

    return {bits: chsh_value(b, *bits) for bits in itertools.product((0, 1), repeat=3)}


def slice_behaviour(c: SliceCoords) -> Behaviour:
    """The maximally random behaviour with CHSH values S (for B^000) and S' (for B^111).

    The grid is s1 s2 s2 s1 for xy=00, s3 s4 s4 s3 for xy=01 and 10, and
    s2 s1 s1 s2 for xy=11.
    """

    s_val, s_prime = c.S, c.S_prime
    s1 = (4 + s_val - s_prime) / 16
    s2 = (4 + s_prime - s_val) / 16
    s3 = (4 + s_val + s_prime) / 16
    s4 = (4 - s_val - s_prime) / 16
    table = [
        [s1, s2, s2, s1],
        [s3, s4, s4, s3],
        [s3, s4, s4, s3],
        [s2, s1, s1, s2],
    ]

    return Behaviour(CHSH_SCENARIO, table, label=f"slice:{s_val!r},{s_prime!r}")


def tsirelson_behaviour() -> Behaviour:
    """The slice point with maximal quantum violation S = 2*sqrt(2), S' = 0."""

    return slice_behaviour(SliceCoords(2 * math.sqrt(2), 0.0))


def joint(b: Behaviour, s: SettingsDistribution) -> JointDistribution:
    """The joint distribution p(c, z) = p(c|z) s(z).

    Raises:
        PEFDomainException: Scenarios differ.
    """

    if b.scenario != s.scenario:
        raise PEFDomainException("Behaviour and settings distribution belong to different scenarios.")

    return JointDistribution(b.scenario, b.table * s.probs[:, None], label=b.label)


def tv_distance(first: JointDistribution, second: JointDistribution) -> float:
    """Total variation distance between the e-marginals of two joint distributions."""

    return 0.5 * float(np.abs(first.table - second.table).sum())


class SignallingReport(NamedTuple):
    """Outcome of ``no_signalling_check``."""

    no_signalling: bool
    violation: float


def no_signalling_check(b: Behaviour, tol: float = NORMALIZATION_TOL) -> SignallingReport:
    """Check that every group of parties has marginals independent of the others' settings.

    Args:
        b (Behaviour): The behaviour to check.
        tol (float): Largest tolerated spread of a marginal.

    Returns:
        SignallingReport: The verdict and the largest marginal spread found.
    """

    n = b.scenario.parties
    tensor = b.tensor
    worst = 0.0
    for size in range(1, n):
        for group in itertools.combinations(range(n), size):
            others = [party for party in range(n) if party not in group]
            # Sum the other parties' outcomes
            marginal = tensor.sum(axis=tuple(n + party for party in others))
            # Put the other parties' settings last and measure their influence
            moved = np.moveaxis(marginal, others, list(range(marginal.ndim - len(others), marginal.ndim)))
            spread = np.ptp(moved.reshape(moved.shape[:marginal.ndim - len(others)] + (-1,)), axis=-1)
            worst = max(worst, float(spread.max()))

    return SignallingReport(worst <= tol, worst)


def nl_box_223(relabelled: bool = False) -> Behaviour:
    """Nonlocal extremal box of the (2,2,3) scenario: 1/3 where b - a = xy (mod 3).

    Args:
        relabelled (bool): Apply x <-> x', y <-> y', giving b - a = x'y' (mod 3).
    """

    scenario = Scenario(2, 2, 3)
    table = np.zeros((scenario.settings_count, scenario.outcomes_count))
    for x, y in itertools.product((0, 1), repeat=2):
        shift = (1 - x) * (1 - y) if relabelled else x * y
        for a, b in itertools.product(range(3), repeat=2):
            if (b - a) % 3 == shift:
                table[scenario.settings_index((x, y)), scenario.outcomes_index((a, b))] = 1.0 / 3

    return Behaviour(scenario, table, label='NL223:relabelled' if relabelled else 'NL223')


_CORRELATED = ((0.5, 0.0), (0.0, 0.5))
_ANTI_CORRELATED = ((0.0, 0.5), (0.5, 0.0))
_BOB_ZERO = ((0.5, 0.0), (0.5, 0.0))

# Cells of the two (2,3,2) extremal boxes; None marks a free cell
_BOX_232_UNIFORM = (
    ('c', 'c', 'c'),
    ('c', 'a', None),
    ('c', None, None),
)
_BOX_232_DETERMINISTIC = (
    ('c', 'c', 'z'),
    ('c', 'a', 'z'),
    ('c', None, 'z'),
)


def _box_232(cells, resolution, label):
    scenario = Scenario(2, 3, 2)
    blocks = {'c': _CORRELATED, 'a': _ANTI_CORRELATED, 'z': _BOB_ZERO}
    free = iter(resolution)
    table = np.zeros((scenario.settings_count, scenario.outcomes_count))
    for x, row in enumerate(cells):
        for y, cell in enumerate(row):
            if cell is None:
                cell = 'a' if next(free) else 'c'
            table[scenario.settings_index((x, y))] = np.ravel(blocks[cell])

    return Behaviour(scenario, table, label=label)


def nl_boxes_232(resolution: Sequence[int]) -> Tuple[Behaviour, Behaviour]:
    """The two (2,3,2) extremal boxes with their free cells resolved.

    Args:
        resolution (Sequence[int]): Four bits, 0 for perfect correlation and 1
            for anti-correlation, resolving in turn the uniform box's cells
            (1,2), (2,1), (2,2) and the deterministic box's cell (2,1).

    Returns:
        Tuple[Behaviour, Behaviour]: The all-uniform box and the box with
        Bob's third setting deterministic.
    """

    if len(resolution) != 4 or any(bit not in (0, 1) for bit in resolution):
        raise PEFDomainException(f"Resolution must be four bits, got {resolution!r}.")

    tag = ''.join(str(bit) for bit in resolution)

    return (_box_232(_BOX_232_UNIFORM, resolution[:3], f"NL232U:{tag}"),
            _box_232(_BOX_232_DETERMINISTIC, resolution[3:], f"NL232D:{tag}"))


def ghz_mixture_322() -> Behaviour:
    """The tripartite GHZ correlation P(abc|xyz) = (1 + (-1)**(a+b+c) E_xyz) / 8.

    E_000 = 1, E_011 = E_101 = E_110 = -1 and the odd-parity settings have
    vanishing correlators.
    """

    scenario = Scenario(3, 2, 2)
    correlator = {(0, 0, 0): 1.0, (0, 1, 1): -1.0, (1, 0, 1): -1.0, (1, 1, 0): -1.0}
    table = np.zeros((scenario.settings_count, scenario.outcomes_count))
    for s_index, settings in enumerate(scenario.settings_tuples()):
        value = correlator.get(settings, 0.0)
        for o_index, outcomes in enumerate(scenario.outcomes_tuples()):
            table[s_index, o_index] = (1 + (-1) ** sum(outcomes) * value) / 8

    return Behaviour(scenario, table, label='GHZ322')


def special_boxes() -> Dict[str, object]:
    """The named higher-scenario boxes.

    Returns:
        Dict[str, object]: ``nl_box_223`` and ``nl_box_223_relabelled``
        (Behaviour), ``nl_boxes_232`` (dict from resolution tuple to the box
        pair) and ``ghz_mixture_322`` (Behaviour).
    """

    return {
        'nl_box_223': nl_box_223(),
        'nl_box_223_relabelled': nl_box_223(relabelled=True),
        'nl_boxes_232': {bits: nl_boxes_232(bits) for bits in itertools.product((0, 1), repeat=4)},
        'ghz_mixture_322': ghz_mixture_322(),
    }


def load_behaviour(path: str) -> Tuple[Behaviour, Optional[SettingsDistribution]]:  # pylint: disable=unsubscriptable-object
    """Read a behaviour JSON file.

    The file holds ``{"scenario": [n, m, k], "order": "lex", "probs": [...]}``
    and optionally ``"settings": [...]``.

    Raises:
        PEFInputException: The file is missing, malformed or describes an
            invalid behaviour.

    Returns:
        Tuple[Behaviour, Optional[SettingsDistribution]]: The behaviour and
        its settings distribution, if the file gives one.
    """

    try:
        with open(path, 'r') as handle:
            doc = json.load(handle)
    except (OSError, ValueError) as err:
        raise PEFInputException(f"Cannot read behaviour file: {err}", path=path) from err

    try:
        if doc.get('order', 'lex') != 'lex':
            raise PEFInputException(f"Unsupported coordinate order {doc['order']!r}.", path=path)
        scenario = Scenario(*doc['scenario'])
        behaviour = Behaviour(scenario, doc['probs'], label=doc.get('label'))
        settings = SettingsDistribution(scenario, doc['settings']) if doc.get('settings') else None
    except (KeyError, TypeError, PEFDomainException) as err:
        raise PEFInputException(f"Invalid behaviour file: {err}", path=path) from err

    _log.debug("Loaded behaviour %s from %s", behaviour, path)

    return behaviour, settings


def behaviour_to_dict(b: Behaviour, settings: Optional[SettingsDistribution] = None) -> dict:  # pylint: disable=unsubscriptable-object
    """The JSON document for a behaviour."""

    doc = {
        'scenario': [b.scenario.parties, b.scenario.settings_per_party, b.scenario.outcomes_per_setting],
        'order': 'lex',
        'probs': [float(value) for value in b.probs],
    }
    if b.label:
        doc['label'] = b.label
    if settings is not None:
        doc['settings'] = [float(value) for value in settings.probs]

    return doc


def dump_behaviour(b: Behaviour, path: str, settings: Optional[SettingsDistribution] = None):  # pylint: disable=unsubscriptable-object
    """Write a behaviour JSON file; floats round-trip exactly."""

    with open(path, 'w') as handle:
        json.dump(behaviour_to_dict(b, settings), handle, indent=2)
        handle.write('\n')

