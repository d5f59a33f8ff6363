#!/usr/bin/env python3
"""
Unit tests for path_resolver.py
"""

import unittest
from pathlib import Path
import sys

# Add selling/scripts to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'selling' / 'scripts'))

from config_parser import RunConfig
from path_resolver import OutputPathResolver, PathResolutionError


def make_config(**output):
    return RunConfig.from_dict({
        'kernel': {'name': 'quadratic_tilt'},
        'solve': {'horizon': 3},
        'output': output,
    })


class TestOutputPathResolver(unittest.TestCase):
    """Test OutputPathResolver class"""

    def setUp(self):
        self.config = make_config(directory='results/run')
        self.resolver = OutputPathResolver(self.config)

    def test_default_naming(self):
        """Test the default {kernel}_T{T}_{command} template"""
        self.assertEqual(self.resolver.resolve_stem('solve'), 'quadratic_tilt_T3_solve')

    def test_resolve_path(self):
        """Test directory, stem and extension"""
        path = self.resolver.resolve_path('solve', 'json')

        self.assertEqual(path, Path('results/run') / 'quadratic_tilt_T3_solve.json')

    def test_extensions(self):
        """Test the suffix of every format"""
        self.assertEqual(self.resolver.resolve_path('sweep', 'csv').suffix, '.csv')
        self.assertEqual(self.resolver.resolve_path('sweep', 'plot').suffix, '.dat')

    def test_part_suffix(self):
        """Test parts distinguish several files of one format"""
        path = self.resolver.resolve_path('sweep', 'plot', part='earlySale')

        self.assertEqual(path.name, 'quadratic_tilt_T3_sweep_early_sale.dat')

    def test_output_root_override(self):
        """Test --out replaces output.directory"""
        resolver = OutputPathResolver(self.config, Path('/tmp/elsewhere'))

        self.assertEqual(resolver.resolve_path('check', 'json').parent, Path('/tmp/elsewhere'))

    def test_hash_variable(self):
        """Test {hash} expands to a 12-digit prefix of the config hash"""
        config = make_config(naming='{command}-{hash}')
        stem = OutputPathResolver(config).resolve_stem('simulate')

        self.assertEqual(stem, f"simulate-{config.hash[:12]}")

    def test_unknown_variable(self):
        """Test unknown naming variables"""
        resolver = OutputPathResolver(make_config(naming='{kernel}_{date}'))

        with self.assertRaises(PathResolutionError) as cm:
            resolver.resolve_stem('solve')

        self.assertIn('{date}', str(cm.exception))
        self.assertIn('{kernel}', str(cm.exception))

    def test_naming_with_separator(self):
        """Test templates may not create subdirectories"""
        resolver = OutputPathResolver(make_config(naming='{kernel}/{command}'))

        with self.assertRaises(PathResolutionError) as cm:
            resolver.resolve_stem('solve')

        self.assertIn('invalid file name', str(cm.exception))

    def test_unknown_format(self):
        """Test unknown output formats"""
        with self.assertRaises(PathResolutionError) as cm:
            self.resolver.resolve_path('solve', 'xlsx')

        self.assertIn("Unknown output format: 'xlsx'", str(cm.exception))

    def test_snake_case_conversion(self):
        """Test part names are converted to snake_case"""
        self.assertEqual(self.resolver._to_snake_case('earlySale'), 'early_sale')
        self.assertEqual(self.resolver._to_snake_case('k1'), 'k1')
        self.assertEqual(self.resolver._to_snake_case('early-sale'), 'early_sale')


if __name__ == '__main__':
    unittest.main()
