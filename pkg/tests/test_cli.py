"""Test the pypef command line."""

import csv
import json
import math
import os
import tempfile

from pypef.bell import dump_behaviour, slice_behaviour, tsirelson_behaviour, SliceCoords
from pypef.cli import EXIT_INPUT, EXIT_OK, build_parser, main
from tests import BasePEFTestCase, fixture_path


class TestCommandLine(BasePEFTestCase):
    """Run commands end to end through main."""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name):
        """A path in the test's scratch directory."""

        return os.path.join(self.tmp, name)

    def read_json(self, name):
        """Load a JSON output file."""

        with open(self.path(name), 'r') as handle:
            return json.load(handle)

    def test_parser(self):
        """Verify every command is registered and --version exits."""

        parser = build_parser()
        args = parser.parse_args(['certify', '--p', '2^-40', '--n', '10'])

        self.assertEqual(args.command, 'certify', "Wrong command!")
        self.assertEqual(args.p, '2^-40', "p should stay text for parsing!")

        with self.assertRaises(SystemExit):
            parser.parse_args(['--version'])

    def test_counterexamples(self):
        """Verify the counterexample suite passes."""

        self.assertEqual(main(['counterexamples', '--out', self.path('suite.json')]), EXIT_OK, "Suite failed!")
        self.assertTrue(self.read_json('suite.json')['all_passed'], "A verdict is wrong!")

    def test_decompose(self):
        """Verify the Tsirelson behaviour decomposes with PR weight sqrt 2 - 1."""

        dump_behaviour(tsirelson_behaviour(), self.path('tsirelson.json'))

        status = main(['decompose', '--behaviour', self.path('tsirelson.json'), '--out', self.path('out.json')])
        doc = self.read_json('out.json')

        self.assertEqual(status, EXIT_OK, "Decompose failed!")
        self.assertAlmostEqual(doc['lambda_pr'], math.sqrt(2) - 1, places=6, msg="Wrong PR weight!")
        self.assertEqual(doc['pr'], [0, 0, 0], "Wrong PR box!")

    def test_attack(self):
        """Verify the optimal attack on S = 2.6 has nine components and its entropy figures."""

        status = main(['attack', '--behaviour', fixture_path('slice_2_6.json'), '--out', self.path('attack.json')])
        doc = self.read_json('attack.json')

        self.assertEqual(status, EXIT_OK, "Attack failed!")
        self.assertEqual(len(doc['components']), 9, "Expected one PR and eight LD components!")
        self.assertAlmostEqual(doc['entropy_bits_per_trial'], 0.3, places=9, msg="Wrong attack entropy!")
        self.assertAlmostEqual(doc['minentropy_avg_per_trial'], -math.log2(0.85), places=9,
                               msg="Wrong min-entropy rate!")
        self.assertLessEqual(doc['minentropy_avg_per_trial'], doc['entropy_bits_per_trial'] + 1e-12,
                             "Min-entropy rate above the Shannon figure!")

    def test_membership(self):
        """Verify local and nonlocal verdicts."""

        dump_behaviour(slice_behaviour(SliceCoords(1.5, 0.5)), self.path('local.json'))

        main(['membership', '--behaviour', self.path('local.json'), '--out', self.path('local_out.json')])
        main(['membership', '--behaviour', fixture_path('slice_2_6.json'), '--out', self.path('nl_out.json')])

        self.assertTrue(self.read_json('local_out.json')['local'], "Local point reported nonlocal!")
        self.assertFalse(self.read_json('nl_out.json')['local'], "S=2.6 reported local!")
        self.assertIn('witness', self.read_json('nl_out.json'), "Missing witness!")

    def test_pipeline(self):
        """Verify simulate, optimize and certify chain, and certify is reproducible."""

        behaviour = fixture_path('slice_2_6.json')
        self.assertEqual(main(['simulate', '--behaviour', behaviour, '--n', '2000', '--seed', '42',
                               '--out', self.path('trials.csv')]), EXIT_OK, "Simulate failed!")
        self.assertEqual(main(['optimize', '--behaviour', behaviour, '--beta', '0.05', '--restarts', '1',
                               '--out', self.path('pef.json')]), EXIT_OK, "Optimize failed!")

        certify = ['certify', '--pef', self.path('pef.json'), '--trials', self.path('trials.csv'),
                   '--p', '2^-100', '--epsilon', '0.01']
        self.assertEqual(main(certify + ['--out', self.path('first.json')]), EXIT_OK, "Certify failed!")
        self.assertEqual(main(certify + ['--out', self.path('second.json')]), EXIT_OK, "Certify failed!")

        with open(self.path('first.json'), 'rb') as first, open(self.path('second.json'), 'rb') as second:
            self.assertEqual(first.read(), second.read(), "Certificates differ!")

        doc = self.read_json('first.json')
        self.assertEqual(doc['n'], 2000, "Wrong trial count!")
        self.assertEqual(doc['log2_p'], -100.0, "Wrong threshold!")
        self.assertEqual(len(doc['digest']), 64, "Missing digest!")

    def test_rates_csv(self):
        """Verify the rates table from a config file."""

        status = main(['rates', '--behaviour', fixture_path('slice_2_6.json'), '--config',
                       fixture_path('config_rates.json'), '--out', self.path('rates.csv')])
        with open(self.path('rates.csv'), 'r', newline='') as handle:
            rows = list(csv.reader(handle))

        self.assertEqual(status, EXIT_OK, "Sweep did not converge!")
        self.assertEqual(rows[0], ['kind', 'beta', 'rate', 'net_n1000', 'net_n2000'], "Wrong header!")
        self.assertEqual([row[0] for row in rows[1:]], ['sweep'] * 5 + ['argmax_n1000', 'argmax_n2000'],
                         "Wrong rows!")

    def test_heatmap(self):
        """Verify the heatmap maps one PEF over the quantum part of the slice."""

        with open(self.path('heatmap.json'), 'w') as handle:
            json.dump({'heatmap-betas': [0.1], 'heatmap-grid': [3, 5], 'restarts': 1}, handle)

        status = main(['heatmap', '--config', self.path('heatmap.json'), '--out', self.path('map.json')])
        doc = self.read_json('map.json')

        self.assertNotEqual(status, EXIT_INPUT, "Heatmap rejected its config!")
        self.assertEqual(doc['anchor'], {'S': 2.6, 'S_prime': 0.0}, "Wrong anchor!")
        self.assertEqual(len(doc['maps']), 1, "Expected one map per beta!")

        rows = doc['maps'][0]['rows']
        self.assertTrue(all(s_val ** 2 + s_prime ** 2 <= 8 for s_prime, s_val, _ in rows), "Point off the disc!")
        self.assertGreater(doc['maps'][0]['intercept'], 2.0, "Intercept below the local bound!")

    def test_input_errors(self):
        """Verify invalid input exits with 2."""

        missing = self.path('missing.json')

        self.assertEqual(main(['decompose', '--behaviour', missing]), EXIT_INPUT, "Missing file accepted!")
        self.assertEqual(main(['simulate', '--behaviour', fixture_path('slice_2_6.json')]), EXIT_INPUT,
                         "Simulate without --out accepted!")
        self.assertEqual(main(['optimize', '--epsilon', '2']), EXIT_INPUT, "Bad epsilon accepted!")
        self.assertEqual(main(['certify', '--trials', fixture_path('trials_small.csv')]), EXIT_INPUT,
                         "Certify without a PEF accepted!")
