#!/usr/bin/env python3
"""
Unit tests for enumeration.py
"""

import unittest
from pathlib import Path
import sys

import numpy as np

# Add selling/scripts to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'selling' / 'scripts'))

from enumeration import compare_with_grid, solve_by_enumeration
from kernels import build_kernel
from solver import CallablePolicy, SolveConfig, SolverError, solve


class TestEnumeration(unittest.TestCase):
    """Test the exhaustive discrete-type optimizer"""

    def setUp(self):
        self.kernel = build_kernel('shrinking_uniform')

    def test_expected_value(self):
        """Test the midpoint rule reproduces revenue 1/4 exactly"""
        enumerated = solve_by_enumeration(self.kernel, 2, 1.0, n_types=20)

        self.assertAlmostEqual(enumerated.expected_value, 0.25, places=10)

    def test_levels(self):
        """Test level sizes and probabilities"""
        enumerated = solve_by_enumeration(self.kernel, 3, 0.9, n_types=6)

        self.assertEqual([level.theta.size for level in enumerated.levels], [6, 36, 216])
        for level in enumerated.levels:
            self.assertAlmostEqual(float(level.probability.sum()), 1.0, places=12)

    def test_first_period_decisions(self):
        """Test types above 1/2 sell at t=1"""
        enumerated = solve_by_enumeration(self.kernel, 2, 1.0, n_types=10)
        first = enumerated.levels[0]

        np.testing.assert_array_equal(first.sell, first.theta > 0.5)

    def test_unsold_after_sale(self):
        """Test histories after a sale are marked sold"""
        enumerated = solve_by_enumeration(self.kernel, 2, 1.0, n_types=4)
        second = enumerated.levels[1]

        np.testing.assert_array_equal(second.unsold, np.repeat([True, True, False, False], 4))

    def test_history_limit(self):
        """Test the enumeration refuses oversized problems"""
        with self.assertRaises(SolverError) as cm:
            solve_by_enumeration(self.kernel, 6, 1.0, n_types=20)

        self.assertIn('histories', str(cm.exception))
        self.assertEqual(cm.exception.state, {'types': 20, 'horizon': 6})

    def test_agrees_with_grid(self):
        """Test the grid policy makes the same decisions"""
        result = solve(self.kernel, SolveConfig(horizon=2, discount=1.0))
        enumerated = solve_by_enumeration(self.kernel, 2, 1.0, n_types=20)
        comparison = compare_with_grid(enumerated, result.policy())

        self.assertTrue(comparison.passed, comparison.to_dict())
        self.assertGreater(comparison.states, 0)

    def test_default_tolerance(self):
        """Test comparisons default to the policy's tie tolerance"""
        result = solve(self.kernel, SolveConfig(horizon=2, discount=1.0, tie_tolerance=1e-7))
        enumerated = solve_by_enumeration(self.kernel, 2, 1.0, n_types=20)
        comparison = compare_with_grid(enumerated, result.policy())

        self.assertEqual(comparison.tolerance, 1e-7)
        self.assertEqual(comparison.near_indifferent, 0)
        self.assertEqual(comparison.agree, comparison.states)

    def test_agrees_with_grid_three_periods(self):
        """Test every reachable state of the 20-type, three-period tree matches the grid policy"""
        for mode in ('one_object', 'repeated_sales'):
            with self.subTest(mode=mode):
                config = SolveConfig(horizon=3, discount=0.9, mode=mode, n_theta=201, n_distortion=61)
                result = solve(self.kernel, config)
                enumerated = solve_by_enumeration(self.kernel, 3, 0.9, n_types=20, mode=mode)
                comparison = compare_with_grid(enumerated, result.policy())

                self.assertTrue(comparison.passed, comparison.to_dict())
                self.assertEqual(comparison.agree, comparison.states)
                self.assertEqual([level.theta.size for level in enumerated.levels], [20, 400, 8000])

    def test_detects_mismatch(self):
        """Test a never-sell policy disagrees above the threshold"""
        enumerated = solve_by_enumeration(self.kernel, 2, 1.0, n_types=20)
        policy = CallablePolicy.never(self.kernel, 2, 1.0)

        with self.assertLogs('enumeration', level='WARNING'):
            comparison = compare_with_grid(enumerated, policy)

        self.assertFalse(comparison.passed)
        self.assertEqual(comparison.mismatches[0]['t'], 1)
        self.assertTrue(comparison.mismatches[0]['enumerated_sell'])


if __name__ == '__main__':
    unittest.main()
