#!/usr/bin/env python3
"""
Unit tests for cli.py
"""

import io
import json
import shutil
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
import sys

# Add selling/scripts to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'selling' / 'scripts'))

from cli import EXIT_OK, EXIT_USAGE, UsageError, build_parser, flag_layer, parse_param, run


def run_quietly(argv):
    """Run the CLI and return (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = run(argv)
    return code, out.getvalue(), err.getvalue()


class TestArguments(unittest.TestCase):
    """Test flag parsing into configuration layers"""

    def test_parse_param(self):
        """Test values are parsed as YAML"""
        self.assertEqual(parse_param('gamma=0.7'), ('gamma', 0.7))
        self.assertEqual(parse_param('marginals=[{family: uniform}]'),
                         ('marginals', [{'family': 'uniform'}]))

    def test_parse_param_malformed(self):
        """Test name=value is required"""
        with self.assertRaises(UsageError) as cm:
            parse_param('gamma')

        self.assertIn('--param expects name=value', str(cm.exception))

    def test_flag_layer(self):
        """Test explicit flags map onto configuration sections"""
        args = build_parser().parse_args(
            ['check', '--kernel', 'ar1', '--param', 'gamma=0.3', '--T', '3', '--delta', '0.9',
             '--skip', 'best_response,two_period', '--samples', '50', '--format', 'json'])
        layer = flag_layer(args)

        self.assertEqual(layer['kernel'], {'name': 'ar1', 'params': {'gamma': 0.3}})
        self.assertEqual(layer['solve'], {'horizon': 3, 'discount': 0.9})
        self.assertEqual(layer['checks'], {'samples': 50, 'best_response': False, 'two_period': False})
        self.assertEqual(layer['output'], {'formats': ['json']})

    def test_flag_layer_omits_unset(self):
        """Test flags left out do not override lower layers"""
        layer = flag_layer(build_parser().parse_args(['solve']))

        self.assertEqual(layer, {})


class TestCommands(unittest.TestCase):
    """Test commands end to end"""

    def setUp(self):
        self.temp_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_list_kernels(self):
        """Test the kernel catalogue listing"""
        code, out, _ = run_quietly(['list-kernels'])

        self.assertEqual(code, EXIT_OK)
        self.assertIn('quadratic_tilt', out)
        self.assertIn('hazard_scale', out)

    def test_presets(self):
        """Test listing and showing presets"""
        code, out, _ = run_quietly(['presets'])
        self.assertEqual(code, EXIT_OK)
        self.assertIn('power_t2', out)

        code, out, _ = run_quietly(['presets', '--preset', 'shrinking_uniform_t2'])
        self.assertEqual(code, EXIT_OK)
        self.assertIn('expected k1: 0.5', out)

    def test_unknown_preset(self):
        """Test a missing preset is a usage error"""
        code, _, err = run_quietly(['solve', '--preset', 'nope'])

        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("Preset 'nope' not found", err)

    def test_missing_kernel(self):
        """Test solving without a kernel"""
        code, _, err = run_quietly(['solve'])

        self.assertEqual(code, EXIT_USAGE)
        self.assertIn('No kernel configured', err)

    def test_unknown_kernel(self):
        """Test unknown kernel names"""
        code, _, err = run_quietly(['solve', '--kernel', 'gaussian'])

        self.assertEqual(code, EXIT_USAGE)
        self.assertIn('gaussian', err)

    def test_bad_param(self):
        """Test malformed --param"""
        code, _, err = run_quietly(['solve', '--kernel', 'power', '--param', 'oops'])

        self.assertEqual(code, EXIT_USAGE)
        self.assertIn('name=value', err)

    def test_argparse_errors(self):
        """Test unknown subcommands and --version"""
        self.assertEqual(run_quietly(['fit'])[0], EXIT_USAGE)
        self.assertEqual(run_quietly(['--version'])[0], EXIT_OK)

    def test_validate(self):
        """Test validation prints the summary and warnings"""
        code, out, _ = run_quietly(['validate', '--kernel', 'power', '--T', '3'])

        self.assertEqual(code, EXIT_OK)
        self.assertIn('Configuration is valid', out)
        self.assertIn('two_period only applies to T = 2', out)

    def test_simulate_zero_paths(self):
        """Test zero paths writes empty transcripts without solving"""
        code, _, _ = run_quietly(['simulate', '--kernel', 'power', '--paths', '0',
                                  '--out', str(self.temp_dir)])

        self.assertEqual(code, EXIT_OK)
        transcripts = (self.temp_dir / 'power_T2_simulate_transcripts.csv').read_text()
        self.assertEqual(transcripts.splitlines()[1],
                         'path,theta_1,theta_2,report_1,report_2,sale_period,price,buyer_payoff,seller_revenue')
        document = json.loads((self.temp_dir / 'power_T2_simulate.json').read_text())
        self.assertEqual(document['result']['summary']['paths'], 0)

    def test_solve_writes_outputs(self):
        """Test solve writes the policy table, summary and threshold curve"""
        code, out, _ = run_quietly(['solve', '--kernel', 'shrinking_uniform', '--n-theta', '201',
                                    '--out', str(self.temp_dir)])

        self.assertEqual(code, EXIT_OK)
        self.assertIn('k1:', out)
        names = sorted(p.name for p in self.temp_dir.iterdir())
        self.assertEqual(names, ['shrinking_uniform_T2_solve.json',
                                 'shrinking_uniform_T2_solve_policy.csv',
                                 'shrinking_uniform_T2_solve_threshold.dat'])
        document = json.loads((self.temp_dir / 'shrinking_uniform_T2_solve.json').read_text())
        self.assertAlmostEqual(document['result']['thresholds']['k1'], 0.5, places=6)
        self.assertAlmostEqual(document['result']['revenue']['expected_revenue'], 0.25, places=6)
        self.assertEqual(document['meta']['command'], 'solve')

    def test_solve_is_reproducible(self):
        """Test two runs of one configuration produce byte-identical files"""
        first = self.temp_dir / 'first'
        second = self.temp_dir / 'second'
        argv = ['solve', '--kernel', 'quadratic_tilt', '--n-theta', '101', '--format', 'json,csv']
        run_quietly(argv + ['--out', str(first)])
        run_quietly(argv + ['--out', str(second)])

        for name in ('quadratic_tilt_T2_solve.json', 'quadratic_tilt_T2_solve_policy.csv'):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)

    def test_dry_run(self):
        """Test --dry-run renders but writes nothing"""
        code, out, _ = run_quietly(['simulate', '--kernel', 'power', '--paths', '0', '--dry-run',
                                    '--out', str(self.temp_dir / 'dry')])

        self.assertEqual(code, EXIT_OK)
        self.assertIn('Would write', out)
        self.assertFalse((self.temp_dir / 'dry').exists())

    def test_check(self):
        """Test check passes for the shrinking uniform policy"""
        code, out, _ = run_quietly(['check', '--kernel', 'shrinking_uniform', '--n-theta', '201',
                                    '--samples', '31', '--skip', 'best_response,two_period',
                                    '--format', 'json,csv', '--out', str(self.temp_dir)])

        self.assertEqual(code, EXIT_OK, out)
        document = json.loads((self.temp_dir / 'shrinking_uniform_T2_check.json').read_text())
        self.assertEqual(document['result']['overall'], 'pass')
        self.assertNotIn('best_response', document['result']['checks'])

    def test_sweep_needs_axis(self):
        """Test sweep without an axis"""
        code, _, err = run_quietly(['sweep', '--kernel', 'power'])

        self.assertEqual(code, EXIT_USAGE)
        self.assertIn('sweep needs an axis and values', err)

    def test_sweep(self):
        """Test a discount sweep passes its direction checks"""
        code, out, _ = run_quietly(['sweep', '--kernel', 'quadratic_tilt', '--n-theta', '101',
                                    '--axis', 'delta', '--values', '0,1', '--format', 'csv',
                                    '--out', str(self.temp_dir)])

        self.assertEqual(code, EXIT_OK, out)
        rows = (self.temp_dir / 'quadratic_tilt_T2_sweep.csv').read_text().splitlines()
        self.assertEqual(rows[1], 'delta,revenue,k1,early_sale')
        self.assertEqual(len(rows), 4)


if __name__ == '__main__':
    unittest.main()
