"""Test the Bell scenario module."""

import itertools
import json
import math
import os
import tempfile

import numpy as np

from pypef.bell import (
    CHSH_SCENARIO,
    Behaviour,
    JointDistribution,
    Scenario,
    SliceCoords,
    chsh_value,
    chsh_values,
    correlators,
    dump_behaviour,
    ghz_mixture_322,
    joint,
    ld_box,
    ld_enumerate,
    load_behaviour,
    maximally_random,
    mix,
    nl_box_223,
    nl_boxes_232,
    no_signalling_check,
    ns_extremals,
    pr_box,
    slice_behaviour,
    special_boxes,
    tsirelson_behaviour,
    tv_distance,
    uniform_settings,
)
from pypef.exceptions import PEFDomainException, PEFInputException, PEFResourceException
from tests import BasePEFTestCase, fixture_path


class TestScenario(BasePEFTestCase):
    """Test the Scenario class."""

    def test_sizes(self):
        """Verify coordinate counts of a few scenarios."""

        self.assertEqual(CHSH_SCENARIO.size, 16, "Wrong (2,2,2) size!")
        self.assertEqual(Scenario(2, 2, 3).size, 36, "Wrong (2,2,3) size!")
        self.assertEqual(Scenario(2, 3, 2).size, 36, "Wrong (2,3,2) size!")
        self.assertEqual(Scenario(3, 2, 2).size, 64, "Wrong (3,2,2) size!")

    def test_parse(self):
        """Verify the n,m,k notation."""

        self.assertEqual(Scenario.parse('2,3,2'), Scenario(2, 3, 2), "Parsed wrong scenario!")

        with self.assertRaises(PEFInputException):
            Scenario.parse('2,2')

        with self.assertRaises(PEFDomainException):
            Scenario(0, 2, 2)

    def test_indices(self):
        """Verify canonical indices are lexicographic."""

        self.assertEqual(CHSH_SCENARIO.settings_index((1, 0)), 2, "Wrong settings index!")
        self.assertEqual(CHSH_SCENARIO.outcomes_index((0, 1)), 1, "Wrong outcomes index!")

        with self.assertRaises(PEFInputException):
            CHSH_SCENARIO.outcomes_index((0, 2))


class TestBoxes(BasePEFTestCase):
    """Test the PR, LD and slice behaviours."""

    def test_pr_boxes(self):
        """Verify each PR box reaches 4 on its own CHSH functional and is no-signalling."""

        for bits in itertools.product((0, 1), repeat=3):
            box = pr_box(*bits)
            self.assertAlmostEqual(chsh_value(box, *bits), 4.0, places=12, msg=f"PR{bits} misses 4!")
            self.assertTrue(no_signalling_check(box).no_signalling, f"PR{bits} signals!")
            self.assertEqual(box.label, 'PR:' + ''.join(map(str, bits)), "Wrong PR label!")

    def test_pr_box_parity(self):
        """Verify PR:000 is supported where a xor b = xy."""

        box = pr_box(0, 0, 0)
        self.assertEqual(box.prob((1, 1), (0, 1)), 0.5, "Missing support cell!")
        self.assertEqual(box.prob((1, 1), (0, 0)), 0.0, "Unexpected support cell!")

    def test_ld_boxes(self):
        """Verify LD boxes are deterministic and satisfy every CHSH inequality."""

        boxes = ld_enumerate(CHSH_SCENARIO)
        self.assertEqual(len(boxes), 16, "Wrong LD count!")
        self.assertEqual(boxes[5].label, 'LD:0101', "Unexpected LD order!")
        for box in boxes:
            self.assertTrue(np.all(np.isin(box.probs, (0.0, 1.0))), f"{box.label} is not deterministic!")
            self.assertLessEqual(max(abs(v) for v in chsh_values(box).values()), 2 + 1e-12,
                                 f"{box.label} violates CHSH!")

        # a = x xor 1, b = 0
        self.assertEqual(ld_box(1, 1, 0, 0).prob((0, 1), (1, 0)), 1.0, "Wrong LD assignment!")

    def test_ld_enumerate_limit(self):
        """Verify the enumeration refuses to exceed its entry limit."""

        with self.assertRaises(PEFResourceException):
            ld_enumerate(Scenario(3, 2, 2), max_entries=100)

    def test_ns_extremals(self):
        """Verify there are 24 labelled extremals, PR boxes first."""

        extremals = ns_extremals()
        self.assertEqual(len(extremals), 24, "Wrong extremal count!")
        self.assertTrue(all(box.label.startswith('PR:') for box in extremals[:8]), "PR boxes not first!")
        self.assertEqual(len({box.label for box in extremals}), 24, "Labels are not unique!")

    def test_slice_values(self):
        """Verify the slice point has CHSH values S and S'."""

        for s_val, s_prime in ((2.6, 0.0), (2.2, -0.7), (0.0, 3.0), (-1.5, 2.0)):
            box = slice_behaviour(SliceCoords(s_val, s_prime))
            self.assertAlmostEqual(chsh_value(box, 0, 0, 0), s_val, places=12, msg="Wrong S!")
            self.assertAlmostEqual(chsh_value(box, 1, 1, 1), s_prime, places=12, msg="Wrong S'!")
            self.assertTrue(no_signalling_check(box).no_signalling, "Slice point signals!")

    def test_slice_outside_diamond(self):
        """Verify slice coordinates outside the no-signalling region are rejected."""

        with self.assertRaises(PEFDomainException):
            SliceCoords(3.0, 2.0)

        self.assertTrue(SliceCoords(2.0, 2.0).is_quantum, "(2, 2) is on the quantum disc!")
        self.assertFalse(SliceCoords(2.9, 0.0).is_quantum, "(2.9, 0) is outside the quantum disc!")

    def test_tsirelson(self):
        """Verify the maximal quantum violation and its tabulated entries."""

        box = tsirelson_behaviour()
        root = math.sqrt(2)
        self.assertAlmostEqual(chsh_value(box, 0, 0, 0), 2 * root, places=12, msg="Wrong violation!")
        self.assertAlmostEqual(box.prob((0, 0), (0, 0)), (root + 1) / (4 * root), places=14, msg="Wrong a!")
        self.assertAlmostEqual(box.prob((0, 0), (0, 1)), (root - 1) / (4 * root), places=14, msg="Wrong b!")

    def test_correlators(self):
        """Verify correlators of the uniform box vanish and of PR:000 are +-1."""

        self.assertAllClose(correlators(maximally_random()), np.zeros((2, 2)), 1e-15)
        self.assertAllClose(correlators(pr_box(0, 0, 0)), [[1, 1], [1, -1]], 1e-15)

    def test_signalling_detected(self):
        """Verify a behaviour where Alice reads Bob's setting is flagged."""

        table = np.zeros((4, 4))
        for x, y in itertools.product((0, 1), repeat=2):
            table[2 * x + y, 2 * y] = 1.0
        report = no_signalling_check(Behaviour(CHSH_SCENARIO, table))

        self.assertFalse(report.no_signalling, "Signalling went unnoticed!")
        self.assertAlmostEqual(report.violation, 1.0, places=12, msg="Wrong violation size!")

    def test_mix(self):
        """Verify mixtures and their validation."""

        halfway = mix([pr_box(0, 0, 0), maximally_random()], [0.5, 0.5])
        self.assertAlmostEqual(chsh_value(halfway, 0, 0, 0), 2.0, places=12, msg="Wrong mixture!")

        with self.assertRaises(PEFDomainException):
            mix([pr_box(0, 0, 0)], [0.4])

        with self.assertRaises(PEFDomainException):
            mix([pr_box(0, 0, 0), nl_box_223()], [0.5, 0.5])

    def test_invalid_behaviour(self):
        """Verify unnormalized tables are rejected."""

        with self.assertRaises(PEFDomainException):
            Behaviour(CHSH_SCENARIO, np.full(16, 0.3))

        with self.assertRaises(PEFDomainException):
            Behaviour(CHSH_SCENARIO, np.full(15, 0.25))


class TestSpecialBoxes(BasePEFTestCase):
    """Test the boxes of the larger scenarios."""

    def test_catalogue(self):
        """Verify special_boxes lists every named box."""

        boxes = special_boxes()
        self.assertEqual(len(boxes['nl_boxes_232']), 16, "Expected all 16 resolutions!")
        self.assertTrue(boxes['nl_box_223'].allclose(nl_box_223()), "Wrong (2,2,3) box!")
        self.assertTrue(boxes['ghz_mixture_322'].allclose(ghz_mixture_322()), "Wrong GHZ mixture!")

        uniform, _ = boxes['nl_boxes_232'][(1, 0, 0, 1)]
        self.assertTrue(uniform.allclose(nl_boxes_232((1, 0, 0, 1))[0]), "Resolution key mismatch!")

    def test_no_signalling(self):
        """Verify every named box is normalized and no-signalling."""

        boxes = [nl_box_223(), nl_box_223(relabelled=True), ghz_mixture_322()]
        for bits in itertools.product((0, 1), repeat=4):
            boxes.extend(nl_boxes_232(bits))

        for box in boxes:
            self.assertTrue(no_signalling_check(box).no_signalling, f"{box.label} signals!")

    def test_nl_box_223(self):
        """Verify the (2,2,3) box is supported where b - a = xy mod 3."""

        box = nl_box_223()
        self.assertAlmostEqual(box.prob((1, 1), (2, 0)), 1 / 3, places=15, msg="Missing support cell!")
        self.assertEqual(box.prob((1, 1), (0, 0)), 0.0, "Unexpected support cell!")

        relabelled = nl_box_223(relabelled=True)
        self.assertAlmostEqual(relabelled.prob((0, 0), (0, 1)), 1 / 3, places=15, msg="Wrong relabelling!")

    def test_nl_boxes_232_resolution(self):
        """Verify the resolution bits select correlated or anti-correlated cells."""

        uniform, deterministic = nl_boxes_232((1, 0, 0, 1))
        self.assertEqual(uniform.prob((1, 2), (0, 1)), 0.5, "Cell (1,2) should be anti-correlated!")
        self.assertEqual(uniform.prob((2, 1), (0, 0)), 0.5, "Cell (2,1) should be correlated!")
        self.assertEqual(deterministic.prob((2, 1), (0, 1)), 0.5, "Cell (2,1) should be anti-correlated!")
        self.assertEqual(deterministic.prob((0, 2), (1, 0)), 0.5, "Bob's third setting should output 0!")

        with self.assertRaises(PEFDomainException):
            nl_boxes_232((0, 1))

    def test_ghz(self):
        """Verify the GHZ correlators."""

        box = ghz_mixture_322()
        self.assertAlmostEqual(box.prob((0, 0, 0), (0, 0, 0)), 0.25, places=15, msg="Wrong E_000 term!")
        self.assertAlmostEqual(box.prob((0, 1, 1), (0, 0, 0)), 0.0, places=15, msg="Wrong E_011 term!")
        self.assertAlmostEqual(box.prob((0, 0, 1), (0, 0, 0)), 0.125, places=15, msg="Wrong odd term!")


class TestJointDistribution(BasePEFTestCase):
    """Test joint distributions and their side information."""

    def test_joint(self):
        """Verify p(c, z) = p(c|z) s(z) and the way back."""

        box = tsirelson_behaviour()
        d = joint(box, uniform_settings())

        self.assertAlmostEqual(float(d.flat.sum()), 1.0, places=14, msg="Joint does not sum to one!")
        self.assertAllClose(d.settings_marginal(), np.full(4, 0.25), 1e-15)
        self.assertTrue(d.behaviour().allclose(box, 1e-14), "Behaviour does not round trip!")
        self.assertFalse(d.has_side_information, "Unexpected side information!")

    def test_components(self):
        """Verify conditioning on a side-information value."""

        probs = np.stack([0.25 * joint(pr_box(0, 0, 0), uniform_settings()).table,
                          0.75 * joint(ld_box(0, 0, 0, 0), uniform_settings()).table])
        d = JointDistribution(CHSH_SCENARIO, probs, e_labels=['PR:000', 'LD:0000'])

        self.assertAllClose(d.e_weights(), [0.25, 0.75], 1e-15)
        self.assertTrue(d.component('LD:0000').behaviour().allclose(ld_box(0, 0, 0, 0)), "Wrong component!")

        with self.assertRaises(PEFDomainException):
            d.component('PR:111')

    def test_tv_distance(self):
        """Verify total variation distance of two joints."""

        first = joint(pr_box(0, 0, 0), uniform_settings())
        second = joint(pr_box(0, 0, 1), uniform_settings())
        self.assertAlmostEqual(tv_distance(first, second), 1.0, places=15, msg="Disjoint supports!")
        self.assertEqual(tv_distance(first, first), 0.0, "Distance to itself!")


class TestBehaviourFiles(BasePEFTestCase):
    """Test reading and writing behaviour files."""

    def test_load_fixture(self):
        """Verify the bundled slice file matches the computed slice point."""

        behaviour, settings = load_behaviour(fixture_path('slice_2_6.json'))

        self.assertTrue(behaviour.allclose(slice_behaviour(SliceCoords(2.6, 0.0)), 1e-12), "Wrong fixture!")
        self.assertAllClose(settings.probs, np.full(4, 0.25), 0)

    def test_dump_load(self):
        """Verify a dumped behaviour loads bit for bit."""

        box = tsirelson_behaviour()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'box.json')
            dump_behaviour(box, path, uniform_settings())
            loaded, settings = load_behaviour(path)

        self.assertTrue(loaded.allclose(box, 0.0), "Floats did not round trip exactly!")
        self.assertIsNotNone(settings, "Settings were lost!")

    def test_bad_files(self):
        """Verify missing and malformed files raise input errors."""

        with self.assertRaises(PEFInputException):
            load_behaviour(fixture_path('does_not_exist.json'))

        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'bad.json')
            with open(path, 'w') as handle:
                json.dump({'scenario': [2, 2, 2], 'probs': [0.5] * 16}, handle)

            with self.assertRaises(PEFInputException) as context:
                load_behaviour(path)

        self.assertEqual(context.exception.path, path, "Error does not name the file!")
