"""Test the entropy module."""

import math

import numpy as np

from pypef.bell import (
    CHSH_SCENARIO,
    Behaviour,
    JointDistribution,
    SliceCoords,
    joint,
    ld_box,
    ld_enumerate,
    maximally_random,
    pr_box,
    slice_behaviour,
    tsirelson_behaviour,
    uniform_settings,
)
from pypef.entropy import (
    AepParams,
    AttackModel,
    Conditioning,
    aep_upper_bound,
    cond_shannon,
    guessing_probability,
    hmin,
    iid_minentropy_rate,
    iid_product,
    minentropy_avg,
    minentropy_worst,
    ns_attack_size,
    optimal_iid_attack,
    smooth_bound_relation,
)
from pypef.exceptions import PEFDomainException, PEFParameterException
from pypef.polytope import chsh_simplex
from tests import BasePEFTestCase


class TestEntropyFunctionals(BasePEFTestCase):
    """Test the Shannon and min-entropy functionals."""

    def test_pr_box(self):
        """Verify a PR box carries one bit given the settings."""

        d = joint(pr_box(0, 0, 0), uniform_settings())

        self.assertAlmostEqual(cond_shannon(d), 1.0, places=14, msg="Wrong Shannon entropy!")
        self.assertAlmostEqual(minentropy_avg(d), 1.0, places=14, msg="Wrong average min-entropy!")
        self.assertAlmostEqual(minentropy_worst(d), 1.0, places=14, msg="Wrong worst-case min-entropy!")

    def test_deterministic_and_uniform(self):
        """Verify the extreme cases of zero and two bits."""

        settings = uniform_settings()
        self.assertEqual(cond_shannon(joint(ld_box(1, 0, 1, 1), settings)), 0.0, "LD box has entropy!")
        self.assertAlmostEqual(minentropy_avg(joint(maximally_random(), settings)), 2.0, places=14,
                               msg="Uniform box should have two bits!")
        self.assertAlmostEqual(guessing_probability(joint(maximally_random(), settings)), 0.25, places=15,
                               msg="Wrong guessing probability!")

    def test_conditioning_on_e(self):
        """Verify conditioning on side information lowers the entropy."""

        probs = np.stack([0.5 * joint(ld_box(0, 0, 0, 0), uniform_settings()).table,
                          0.5 * joint(ld_box(0, 1, 0, 1), uniform_settings()).table])
        d = JointDistribution(CHSH_SCENARIO, probs, e_labels=['LD:0000', 'LD:0101'])

        self.assertAlmostEqual(cond_shannon(d, Conditioning.SETTINGS), 1.0, places=14, msg="Marginal bit lost!")
        self.assertEqual(cond_shannon(d, Conditioning.SETTINGS_AND_E), 0.0, "E should reveal the outcome!")
        self.assertEqual(minentropy_avg(d), 0.0, "E should reveal the outcome!")

    def test_worst_below_average(self):
        """Verify worst-case min-entropy never exceeds the average one."""

        rng = np.random.Generator(np.random.Philox(11))
        for _ in range(50):
            probs = rng.dirichlet(np.ones(48)).reshape(3, 4, 4)
            self.assertLessEqual(minentropy_worst(probs), minentropy_avg(probs) + 1e-12, "Order violated!")
            self.assertLessEqual(minentropy_avg(probs), cond_shannon(probs, Conditioning.SETTINGS_AND_E) + 1e-12,
                                 "Min-entropy exceeds Shannon entropy!")


class TestOptimalAttack(BasePEFTestCase):
    """Test optimal_iid_attack."""

    def test_slice_points(self):
        """Verify the attack entropy equals (S - 2) / 2 on the slice."""

        for s_val in (2.2, 2.6, 2 * math.sqrt(2)):
            target = slice_behaviour(SliceCoords(s_val, 0.0))
            attack = optimal_iid_attack(target, uniform_settings())

            self.assertAlmostEqual(attack.entropy_bits, (s_val - 2) / 2, delta=1e-12, msg=f"Wrong hmin at S={s_val}!")
            self.assertLessEqual(len(attack.components()), ns_attack_size(CHSH_SCENARIO), "Too many components!")
            self.assertTrue(attack.target.behaviour().allclose(target, 1e-12), "Attack misses its target!")

    def test_random_simplex_points(self):
        """Verify the attack entropy equals the PR weight on random simplex points."""

        rng = np.random.Generator(np.random.Philox(5))
        matrix = np.stack([vertex.probs for vertex in chsh_simplex(1, 1, 0)], axis=1)
        for _ in range(100):
            weights = rng.dirichlet(np.ones(9))
            target = Behaviour(CHSH_SCENARIO, matrix @ weights)
            attack = optimal_iid_attack(target, uniform_settings())

            self.assertAlmostEqual(attack.entropy_bits, weights[0], delta=1e-12, msg="Entropy differs from PR weight!")
            self.assertLessEqual(len(attack.components()), 9, "Too many components!")

    def test_tsirelson_support(self):
        """Verify the Tsirelson point needs nine attack components."""

        attack = optimal_iid_attack(tsirelson_behaviour(), uniform_settings())

        self.assertEqual(len(attack.components()), 9, "Expected nine components!")
        self.assertAlmostEqual(hmin(tsirelson_behaviour(), uniform_settings()), math.sqrt(2) - 1, places=12,
                               msg="Wrong hmin!")

    def test_local_target(self):
        """Verify local targets are attacked with LD boxes only."""

        attack = optimal_iid_attack(slice_behaviour(SliceCoords(1.5, 0.5)), uniform_settings())

        self.assertEqual(attack.entropy_bits, 0.0, "Local targets leave no entropy!")
        self.assertTrue(all(label.startswith('LD:') for label, _ in attack.components()), "Non-LD component!")

    def test_attack_validation(self):
        """Verify attacks with too many or signalling components are rejected."""

        boxes = ld_enumerate(CHSH_SCENARIO)[:10]
        probs = np.stack([0.1 * joint(box, uniform_settings()).table for box in boxes])
        with self.assertRaises(PEFDomainException):
            AttackModel(JointDistribution(CHSH_SCENARIO, probs, e_labels=[box.label for box in boxes]))

        table = np.zeros((4, 4))
        for index in range(4):
            table[index, 2 * (index % 2)] = 1.0
        signalling = JointDistribution(CHSH_SCENARIO, (table / 4)[None], e_labels=['bad'])
        with self.assertRaises(PEFDomainException):
            AttackModel(signalling)


class TestIidBounds(BasePEFTestCase):
    """Test the IID product identities and the AEP bound."""

    def test_product_identity(self):
        """Verify the per-trial min-entropy of the explicit product."""

        attack = optimal_iid_attack(slice_behaviour(SliceCoords(2.6, 0.0)), uniform_settings())
        for n in (2, 3):
            product = iid_product(attack.single_trial.probs, n)
            self.assertAlmostEqual(iid_minentropy_rate(attack), minentropy_avg(product) / n, delta=1e-12,
                                   msg=f"Product identity fails at n={n}!")

        self.assertLessEqual(iid_minentropy_rate(attack), attack.entropy_bits + 1e-12,
                             "Min-entropy rate exceeds the Shannon rate!")

    def test_product_shape(self):
        """Verify the product sums to one and orders the first trial most significant."""

        probs = joint(pr_box(0, 0, 0), uniform_settings()).probs
        product = iid_product(probs, 2)

        self.assertEqual(product.shape, (1, 16, 16), "Wrong product shape!")
        self.assertAlmostEqual(float(product.sum()), 1.0, places=14, msg="Product does not sum to one!")
        self.assertAlmostEqual(product[0, 4 * 3 + 0, 4 * 1 + 0], probs[0, 3, 1] * probs[0, 0, 0], places=15,
                               msg="Wrong sequence order!")

    def test_aep_bound(self):
        """Verify the AEP bound exceeds the Shannon rate and shrinks with n."""

        attack = optimal_iid_attack(slice_behaviour(SliceCoords(2.6, 0.0)), uniform_settings())
        params = AepParams(eps_a=0.1, eps_s=0.05, delta=0.01)

        small, large = aep_upper_bound(attack, params, 10), aep_upper_bound(attack, params, 1000)
        self.assertGreater(small, large, "Bound should shrink with n!")
        self.assertGreater(large, attack.entropy_bits, "Bound should exceed the Shannon rate!")

        with self.assertRaises(PEFParameterException):
            AepParams(eps_a=0.6, eps_s=0.3, delta=0.01)

    def test_smooth_bound_relation(self):
        """Verify the truncated witness bounds the average min-entropy from above."""

        rng = np.random.Generator(np.random.Philox(3))
        for _ in range(50):
            probs = rng.dirichlet(np.full(48, 0.3)).reshape(3, 4, 4)
            report = smooth_bound_relation(probs, 0.0, 0.1)
            self.assertTrue(report.holds, "Relation failed!")
            self.assertLessEqual(report.witness_distance, 0.1 + 1e-12, "Witness too far!")

        with self.assertRaises(PEFParameterException):
            smooth_bound_relation(probs, 0.0, 1.0)
