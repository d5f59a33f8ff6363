#!/usr/bin/env python3
"""
Unit tests for config_resolver.py
"""

import unittest
import tempfile
import shutil
from pathlib import Path
import sys

# Add selling/scripts to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'selling' / 'scripts'))

from config_parser import ConfigError
from config_resolver import DEFAULTS, ConfigResolver, ConfigurationError


class TestConfigResolver(unittest.TestCase):
    """Test layered configuration resolution"""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_defaults_only(self):
        """Test the defaults layer alone"""
        merged = ConfigResolver().resolve()

        self.assertEqual(merged['solve']['horizon'], DEFAULTS['solve']['horizon'])
        self.assertEqual(merged['_config_sources'], ['defaults'])

    def test_flags_win(self):
        """Test higher layers override lower ones"""
        resolver = ConfigResolver()
        resolver.add_layer('preset', {'kernel': {'name': 'power'}, 'solve': {'horizon': 3}})
        resolver.add_layer('flags', {'solve': {'horizon': 4}})

        merged = resolver.resolve()
        self.assertEqual(merged['solve']['horizon'], 4)
        self.assertEqual(merged['kernel']['name'], 'power')
        self.assertEqual(merged['_config_sources'], ['defaults', 'preset', 'flags'])

    def test_dicts_merge_recursively(self):
        """Test nested mappings merge key by key"""
        resolver = ConfigResolver()
        resolver.add_layer('file', {'kernel': {'name': 'quadratic_tilt',
                                               'params': {'strength': 1.0, 'hazard_scale': 2.0}}})
        resolver.add_layer('flags', {'kernel': {'params': {'strength': 1.5}}})

        params = resolver.resolve()['kernel']['params']
        self.assertEqual(params, {'strength': 1.5, 'hazard_scale': 2.0})

    def test_lists_are_replaced(self):
        """Test lists from a higher layer replace lower ones"""
        resolver = ConfigResolver()
        resolver.add_layer('flags', {'output': {'formats': ['json']}})

        self.assertEqual(resolver.resolve()['output']['formats'], ['json'])

    def test_layers_are_copied(self):
        """Test later mutation of a layer does not leak into the resolver"""
        layer = {'solve': {'horizon': 3}}
        resolver = ConfigResolver()
        resolver.add_layer('file', layer)
        layer['solve']['horizon'] = 9

        self.assertEqual(resolver.resolve()['solve']['horizon'], 3)

    def test_empty_layers_skipped(self):
        """Test empty layers are not recorded"""
        resolver = ConfigResolver()
        resolver.add_layer('flags', {})

        self.assertEqual(resolver.resolve()['_config_sources'], ['defaults'])

    def test_non_mapping_layer(self):
        """Test a layer that is not a mapping"""
        with self.assertRaises(ConfigurationError) as cm:
            ConfigResolver().add_layer('file', ['kernel'])

        self.assertIn("'file' must be a mapping", str(cm.exception))

    def test_add_file(self):
        """Test loading a layer from YAML"""
        path = self.test_dir / 'run.yaml'
        path.write_text("kernel:\n  name: shrinking_uniform\n")

        resolver = ConfigResolver().add_file(path)
        self.assertEqual(resolver.resolve()['kernel']['name'], 'shrinking_uniform')
        self.assertEqual(resolver.get_config_source('kernel.name'), str(path))

    def test_add_missing_file(self):
        """Test a missing configuration file"""
        with self.assertRaises(ConfigurationError) as cm:
            ConfigResolver().add_file(self.test_dir / 'missing.yaml')

        self.assertIn('Configuration file not found', str(cm.exception))

    def test_get_config_source(self):
        """Test tracing a setting to its layer"""
        resolver = ConfigResolver()
        resolver.add_layer('preset', {'solve': {'horizon': 3}})
        resolver.add_layer('flags', {'solve': {'discount': 0.5}})

        self.assertEqual(resolver.get_config_source('solve.horizon'), 'preset')
        self.assertEqual(resolver.get_config_source('solve.discount'), 'flags')
        self.assertEqual(resolver.get_config_source('solve.mode'), 'defaults')
        self.assertIsNone(resolver.get_config_source('solve.nothing'))

    def test_resolve_run(self):
        """Test resolving to a validated RunConfig"""
        resolver = ConfigResolver()
        resolver.add_layer('flags', {'kernel': {'name': 'quadratic_tilt'}, 'solve': {'discount': 0.5}})

        config = resolver.resolve_run()
        self.assertEqual(config.kernel_name, 'quadratic_tilt')
        self.assertEqual(config.solve_config().discount, 0.5)
        self.assertEqual(config.simulate['rng'], 'pcg64')

    def test_resolve_run_without_kernel(self):
        """Test a chain with no kernel anywhere"""
        with self.assertRaises(ConfigError) as cm:
            ConfigResolver().resolve_run()

        self.assertIn('No kernel configured', str(cm.exception))

    def test_show_resolution_order(self):
        """Test the human-readable chain lists the highest layer first"""
        resolver = ConfigResolver()
        resolver.add_layer('preset:power_t2', {'kernel': {'name': 'power'}})
        resolver.add_layer('flags', {'solve': {'horizon': 2}})

        text = resolver.show_resolution_order()
        self.assertIn('1. HIGHEST: flags', text)
        self.assertIn('kernel: power', text)
        self.assertLess(text.index('flags'), text.index('defaults'))


if __name__ == '__main__':
    unittest.main()
