"""Entropy functionals and optimal IID attacks.

Conditional Shannon entropy, average and worst-case conditional min-entropy
(at zero smoothing), the IID attack that reproduces a target behaviour with
the least conditional entropy, and the bounds relating the smooth entropies.
"""

import logging
import math

from dataclasses import dataclass
from enum import Enum, auto
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import xlogy

from .bell import (
    CHSH_SCENARIO,
    Behaviour,
    JointDistribution,
    SettingsDistribution,
    ld_box,
    no_signalling_check,
)
from .exceptions import PEFDomainException, PEFParameterException, PEFVerificationException
from .polytope import AttackDecomposition, decompose_nonlocal, local_membership, violated_inequality

_log = logging.getLogger(__name__)

Distribution = Union[JointDistribution, np.ndarray]  # pylint: disable=invalid-name


class Conditioning(Enum):  # pylint: disable=R0903
    """What the outcomes are conditioned on."""

    SETTINGS = auto()
    SETTINGS_AND_E = auto()


def _as_array(d: Distribution, condition_on: Conditioning = Conditioning.SETTINGS_AND_E) -> np.ndarray:
    """An (e, settings, outcomes) probability array."""

    probs = d.probs if isinstance(d, JointDistribution) else np.asarray(d, dtype=float)
    if probs.ndim != 3:
        raise PEFDomainException("Expected probabilities shaped (e, settings, outcomes).")
    if condition_on == Conditioning.SETTINGS:
        probs = probs.sum(axis=0, keepdims=True)

    return probs


def cond_shannon(d: Distribution, condition_on: Conditioning = Conditioning.SETTINGS) -> float:
    """Conditional Shannon entropy of the outcomes in bits.

    Args:
        d (JointDistribution): The distribution, or an (e, settings, outcomes) array.
        condition_on (Conditioning): Condition on the settings only, or on the
            settings and the side information.

    Returns:
        float: -sum p(c,z[,e]) log2 p(c|z[,e]), with 0 log 0 = 0.
    """

    probs = _as_array(d, condition_on)
    totals = probs.sum(axis=2, keepdims=True)
    conditional = np.zeros_like(probs)
    np.divide(probs, totals, out=conditional, where=totals > 0)

    entropy = -float(xlogy(probs, conditional).sum()) / math.log(2)

    return max(entropy, 0.0)


def guessing_probability(d: Distribution, condition_on: Conditioning = Conditioning.SETTINGS_AND_E) -> float:
    """Average probability of guessing the outcomes, sum over (z, e) of max_c p(c, z, e)."""

    return float(_as_array(d, condition_on).max(axis=2).sum())


def minentropy_avg(d: Distribution, condition_on: Conditioning = Conditioning.SETTINGS_AND_E) -> float:
    """Average conditional min-entropy, -log2 of the guessing probability."""

    return max(-math.log2(guessing_probability(d, condition_on)), 0.0)


def minentropy_worst(d: Distribution, condition_on: Conditioning = Conditioning.SETTINGS_AND_E) -> float:
    """Worst-case conditional min-entropy, -log2 max p(c|z,e) over conditioning events of positive weight."""

    probs = _as_array(d, condition_on)
    totals = probs.sum(axis=2)
    support = totals > 0
    largest = np.max(probs.max(axis=2)[support] / totals[support])

    return max(-math.log2(float(largest)), 0.0)


def ns_attack_size(scenario) -> int:
    """One plus the dimension of the scenario's no-signalling polytope."""

    return (scenario.settings_per_party * (scenario.outcomes_per_setting - 1) + 1) ** scenario.parties


@dataclass
class AttackModel:
    """An IID attack: a joint distribution over (outcomes, settings, e) used every trial.

    Attributes:
        single_trial (JointDistribution): The per-trial distribution, with e labels.
        trial_count (int): Number of trials n.
        decomposition (AttackDecomposition): The polytope decomposition the
            attack was built from, if any.

    Raises:
        PEFDomainException: The distribution has no side information, too many
            components, or a signalling component.
    """

    single_trial: JointDistribution
    trial_count: int = 1
    decomposition: Optional[AttackDecomposition] = None  # pylint: disable=unsubscriptable-object

    def __post_init__(self):
        if not self.single_trial.has_side_information:
            raise PEFDomainException("An attack needs side-information labels.")
        if self.trial_count < 1:
            raise PEFParameterException("An attack spans at least one trial.")

        limit = ns_attack_size(self.single_trial.scenario)
        if len(self.single_trial.e_labels) > limit:
            raise PEFDomainException(
                f"Attack has {len(self.single_trial.e_labels)} components; at most {limit} are needed."
            )

        for label in self.single_trial.e_labels:
            report = no_signalling_check(self.single_trial.component(label).behaviour())
            if not report.no_signalling:
                raise PEFDomainException(f"Attack component {label} is signalling.")

    @property
    def target(self) -> JointDistribution:
        """The reproduced joint distribution, with e summed out."""

        return self.single_trial.marginal()

    @property
    def entropy_bits(self) -> float:
        """Conditional Shannon entropy H(C|ZE) per trial."""

        return cond_shannon(self.single_trial, Conditioning.SETTINGS_AND_E)

    def components(self) -> List[Tuple[str, float]]:
        return [(label, float(weight))
                for label, weight in zip(self.single_trial.e_labels, self.single_trial.e_weights())]

    def to_dict(self, target_ref: Optional[str] = None) -> dict:  # pylint: disable=unsubscriptable-object
        return {
            'target': target_ref,
            'components': [{'e': label, 'weight': weight} for label, weight in self.components()],
            'entropy_bits_per_trial': self.entropy_bits,
        }


def iid_product(table: np.ndarray, n: int) -> np.ndarray:
    """The n-fold product of an (e, settings, outcomes) array.

    Sequences are flattened lexicographically with the first trial most
    significant in each coordinate.
    """

    if n < 1:
        raise PEFParameterException("Product needs at least one trial.")

    table = np.asarray(table, dtype=float)
    product = table
    for _ in range(n - 1):
        product = np.einsum('abc,def->adbecf', product, table).reshape(
            product.shape[0] * table.shape[0],
            product.shape[1] * table.shape[1],
            product.shape[2] * table.shape[2],
        )

    return product


def iid_minentropy_rate(a: AttackModel) -> float:
    """Average min-entropy per trial of an IID attack.

    The guessing probability of a product factorizes, so this is the single
    trial value for every n.
    """

    return minentropy_avg(a.single_trial)


def optimal_iid_attack(target: Behaviour, s: SettingsDistribution, trial_count: int = 1) -> AttackModel:
    """The IID attack reproducing a (2,2,2) target with least conditional entropy.

    Nonlocal targets use the PR plus eight LD decomposition of their CHSH
    simplex; local targets are mixed from LD boxes only.

    Args:
        target (Behaviour): The observed behaviour.
        s (SettingsDistribution): The settings distribution.
        trial_count (int): Number of trials the attack spans.

    Raises:
        PEFDomainException: The target is signalling or not a (2,2,2) behaviour.

    Returns:
        AttackModel: Components labelled ``PR:abc`` / ``LD:abcd``.
    """

    if target.scenario != CHSH_SCENARIO:
        raise PEFDomainException("Optimal attacks are synthesized for the (2,2,2) scenario.")

    report = no_signalling_check(target)
    if not report.no_signalling:
        raise PEFDomainException(f"Attack target is signalling (violation {report.violation:.3g}).")

    decomposition = None
    if violated_inequality(target) is not None:
        decomposition = decompose_nonlocal(target)
        parts = decomposition.components()
    else:
        verdict = local_membership(target)
        if not verdict.local:
            raise PEFDomainException("Target violates no CHSH inequality yet is not local.")
        parts = [(label, weight, ld_box(*(int(bit) for bit in label[3:])))
                 for label, weight in verdict.weights.items()]

    labels = [label for label, _, _ in parts]
    probs = np.stack([weight * box.table * s.probs[:, None] for _, weight, box in parts])
    single = JointDistribution(CHSH_SCENARIO, probs / probs.sum(), e_labels=labels)
    attack = AttackModel(single, trial_count, decomposition)
    _log.debug("Attack on %s uses %s components, entropy %s", target, len(labels), attack.entropy_bits)

    return attack


def hmin(target: Behaviour, s: SettingsDistribution) -> float:
    """Least conditional Shannon entropy per trial over IID attacks reproducing the target."""

    return optimal_iid_attack(target, s).entropy_bits


@dataclass
class AepParams:
    """Error parameters of the asymptotic equipartition bound.

    Raises:
        PEFParameterException: eps_a outside (0, 1), eps_s negative, delta not
            positive, or eps_a + 2 eps_s >= 1.
    """

    eps_a: float
    eps_s: float
    delta: float

    def __post_init__(self):
        if not 0 < self.eps_a < 1:
            raise PEFParameterException("eps_a must lie in (0, 1).")
        if self.eps_s < 0:
            raise PEFParameterException("eps_s must be nonnegative.")
        if self.delta <= 0:
            raise PEFParameterException("delta must be positive.")
        if self.eps_a + 2 * self.eps_s >= 1:
            raise PEFParameterException("eps_a + 2 eps_s must be below 1.")


def aep_upper_bound(attack: AttackModel, params: AepParams, n: Optional[int] = None) -> float:  # pylint: disable=unsubscriptable-object
    """Per-trial upper bound on the smooth average min-entropy of an IID attack.

    H(C|ZE) + log2(1 / (1 - eps_a - 2 eps_s)) / n + delta, valid for n large
    enough given delta.
    """

    n = attack.trial_count if n is None else n

    return attack.entropy_bits + math.log2(1.0 / (1.0 - params.eps_a - 2 * params.eps_s)) / n + params.delta


@dataclass
class SmoothBoundReport:
    """Both sides of the worst-case / average min-entropy relation.

    Attributes:
        lower (float): Worst-case min-entropy of the distribution.
        average (float): Average min-entropy of the distribution.
        upper (float): Worst-case min-entropy of the truncated witness plus log2(1/eps_prime).
        witness_distance (float): Total variation distance of the witness.
        smoothing (float): Smoothing budget eps + eps_prime of the worst-case side.
    """

    lower: float
    average: float
    upper: float
    witness_distance: float
    smoothing: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.average + 1e-12 and self.average <= self.upper + 1e-12


def smooth_bound_relation(d: Distribution, eps: float, eps_prime: float) -> SmoothBoundReport:
    """Relate average and worst-case min-entropy through an explicit nearby witness.

    Blocks (z, e) whose largest conditional probability exceeds p / eps_prime,
    where p is the guessing probability, are removed and the rest rescaled.
    The witness is within eps_prime in total variation and its worst-case
    min-entropy is at least the average one minus log2(1/eps_prime).

    Args:
        d (JointDistribution): The distribution, or an (e, settings, outcomes) array.
        eps (float): Smoothing of the average side, in [0, 1].
        eps_prime (float): Extra smoothing of the worst-case side, in (0, 1).

    Raises:
        PEFParameterException: A parameter is out of range.
        PEFVerificationException: The relation failed for this distribution.

    Returns:
        SmoothBoundReport: The two sides with the average in between.
    """

    if not 0 <= eps <= 1:
        raise PEFParameterException("eps must lie in [0, 1].")
    if not 0 < eps_prime < 1:
        raise PEFParameterException("eps_prime must lie in (0, 1).")

    probs = _as_array(d)
    totals = probs.sum(axis=2)
    block_max = probs.max(axis=2)
    guess = float(block_max.sum())

    conditional_max = np.zeros_like(totals)
    np.divide(block_max, totals, out=conditional_max, where=totals > 0)
    keep = (totals > 0) & (conditional_max <= guess / eps_prime)

    truncated = probs * keep[:, :, None]
    kept_weight = float(truncated.sum())
    witness = truncated / kept_weight
    distance = 0.5 * float(np.abs(witness - probs).sum())

    report = SmoothBoundReport(
        lower=minentropy_worst(probs),
        average=minentropy_avg(probs),
        upper=minentropy_worst(witness) + math.log2(1.0 / eps_prime),
        witness_distance=distance,
        smoothing=eps + eps_prime,
    )

    if not report.holds or distance > eps_prime + 1e-12:
        raise PEFVerificationException("Min-entropy relation failed.", report.__dict__)

    return report
