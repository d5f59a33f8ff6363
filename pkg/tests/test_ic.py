#!/usr/bin/env python3
"""
Unit tests for ic.py
"""

import unittest
from pathlib import Path
from types import SimpleNamespace
import sys

import numpy as np

# Add selling/scripts to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'selling' / 'scripts'))

from ic import (CHECKS, CheckResult, ICCheckError, ICContext, ICReport, assumption1_check,
                best_response_oracle, corollary2_check, d_function, envelope_check,
                expost_ir_check, first_period_slack, integral_monotonicity_check, run_checks,
                two_period_ic_check)
from kernels import build_kernel
from revenue import TransferRule, threshold_surcharge
from solver import CallablePolicy, SolveConfig, solve


class TestReports(unittest.TestCase):
    """Test check results and the overall verdict"""

    def test_fail_needs_witness(self):
        """Test a failure without a witness is refused"""
        with self.assertRaises(ICCheckError) as cm:
            CheckResult('envelope', 'fail', 0.5)

        self.assertIn('failed without a witness', str(cm.exception))

    def test_unknown_status(self):
        """Test statuses are validated"""
        with self.assertRaises(ICCheckError):
            CheckResult('envelope', 'ok')

    def test_overall(self):
        """Test fail beats inconclusive beats pass"""
        report = ICReport()
        report.add(assumption1_check())
        self.assertEqual(report.overall, 'pass')

        report.add(CheckResult('corollary2', 'inconclusive'))
        self.assertEqual(report.overall, 'inconclusive')

        report.add(CheckResult('envelope', 'fail', 1.0, {'t': 1}))
        self.assertEqual(report.overall, 'fail')
        self.assertEqual(report.to_dict()['checks']['envelope']['witness'], {'t': 1})

    def test_unknown_toggle(self):
        """Test unknown check names are rejected before any work"""
        policy = CallablePolicy.never(build_kernel('power'), 2, 1.0)

        with self.assertRaises(ICCheckError) as cm:
            run_checks(policy, toggles={'myopic': True})

        self.assertIn('Unknown check(s): myopic', str(cm.exception))

    def test_check_names(self):
        """Test the registered checks"""
        self.assertIn('integral_monotonicity', CHECKS)
        self.assertIn('assumption1', CHECKS)
        self.assertNotIn('myopic', CHECKS)


class TestShrinkingUniformChecks(unittest.TestCase):
    """Test every check on the two-period shrinking uniform policy"""

    @classmethod
    def setUpClass(cls):
        result = solve(build_kernel('shrinking_uniform'), SolveConfig(horizon=2))
        cls.ctx = ICContext(result.policy())

    def test_d_function_last_period(self):
        """Test D_T equals the allocation"""
        self.assertEqual(float(d_function(self.ctx, 2, 0.6, 0.6, distortion=0.1)), 1.0)
        self.assertEqual(float(d_function(self.ctx, 2, 0.3, 0.6, distortion=0.5)), 0.0)

    def test_d_function_first_period(self):
        """Test D_1 = q_1 when no later sale is reachable"""
        self.assertAlmostEqual(float(d_function(self.ctx, 1, 0.8, 0.8)), 1.0)
        self.assertAlmostEqual(float(d_function(self.ctx, 1, 0.3, 0.3)), 0.0)

    def test_d_function_arguments(self):
        """Test missing histories and periods out of range"""
        with self.assertRaises(ICCheckError) as cm:
            d_function(self.ctx, 2, 0.5, 0.5)
        self.assertIn('needs a distortion or a history', str(cm.exception))

        with self.assertRaises(ICCheckError) as cm:
            d_function(self.ctx, 3, 0.5, 0.5, distortion=0.1)
        self.assertIn('outside 1..2', str(cm.exception))

    def test_integral_monotonicity(self):
        """Test the integral inequality holds"""
        result = integral_monotonicity_check(self.ctx, samples=41)

        self.assertEqual(result.status, 'pass', result.to_dict())
        self.assertGreater(result.details['pairs'], 0)

    def test_corollary2(self):
        """Test the sufficient conditions hold"""
        result = corollary2_check(self.ctx)

        self.assertEqual(result.status, 'pass', result.details)
        self.assertTrue(result.details['conditions']['fosd']['passed'])

    def test_two_period(self):
        """Test the direct two-period inequalities"""
        result = two_period_ic_check(self.ctx, samples=41)

        self.assertEqual(result.status, 'pass', result.to_dict())

    def test_best_response_envelope(self):
        """Test truth-telling is a best response under envelope transfers"""
        result = best_response_oracle(self.ctx, n_types=40)

        self.assertEqual(result.status, 'pass', result.to_dict())
        self.assertEqual(result.details['scheme'], 'envelope')

    def test_best_response_virtual_fails(self):
        """Test charging the virtual value invites underreporting"""
        result = best_response_oracle(self.ctx, SimpleNamespace(scheme='virtual'), n_types=20)

        self.assertEqual(result.status, 'fail')
        self.assertEqual(result.witness['t'], 1)
        self.assertLess(result.witness['best_report'], result.witness['theta'])

    def test_best_response_surcharge_fails(self):
        """Test a surcharge above 0.75 makes shading the report profitable"""
        rule = TransferRule(self.ctx.policy, 'envelope', threshold_surcharge(0.2, 0.75))
        result = best_response_oracle(self.ctx, rule, n_types=40)

        self.assertEqual(result.status, 'fail')
        self.assertGreater(result.worst, result.tolerance)
        self.assertGreater(result.witness['theta'], 0.75)
        self.assertLessEqual(result.witness['best_report'], 0.75)

    def test_best_response_state_limit(self):
        """Test oversized oracles are inconclusive"""
        result = best_response_oracle(self.ctx, n_types=200, max_states=1000)

        self.assertEqual(result.status, 'inconclusive')
        self.assertEqual(result.details['reason'], 'state space too large')

    def test_best_response_type_count(self):
        """Test the oracle needs two types"""
        with self.assertRaises(ICCheckError):
            best_response_oracle(self.ctx, n_types=1)

    def test_expost_ir(self):
        """Test the buyer payoff at a sale is the distortion"""
        result = expost_ir_check(self.ctx, paths=2000)

        self.assertEqual(result.status, 'pass')
        self.assertGreaterEqual(result.worst, 0.0)

    def test_envelope(self):
        """Test rents match the envelope formula and the ex-ante rent is 1/8"""
        result = envelope_check(self.ctx, n_states=50)

        self.assertEqual(result.status, 'pass', result.to_dict())
        self.assertAlmostEqual(result.details['ex_ante_rent'], 0.125, places=3)

    def test_run_checks(self):
        """Test toggles select the checks that run"""
        report = run_checks(self.ctx.policy, toggles={'best_response': False, 'two_period': False},
                            samples=31, context=self.ctx)

        self.assertNotIn('best_response', report.checks)
        self.assertIn('assumption1', report.checks)
        self.assertEqual(report.overall, 'pass', report.to_dict())


class TestQuadraticTiltChecks(unittest.TestCase):
    """Test the checks on the two-period quadratic tilt policy, where q2 falls in theta_1"""

    DELTA = 0.6

    @classmethod
    def setUpClass(cls):
        result = solve(build_kernel('quadratic_tilt'), SolveConfig(horizon=2, discount=cls.DELTA))
        cls.ctx = ICContext(result.policy())
        cls.k1 = 3.0 / (6.0 - 2.0 * cls.DELTA)

    def test_corollary2_inconclusive(self):
        """Test the sufficient conditions do not apply"""
        self.assertEqual(corollary2_check(self.ctx).status, 'inconclusive')

    def test_integral_monotonicity(self):
        """Test the integral inequality holds"""
        result = integral_monotonicity_check(self.ctx, samples=41)

        self.assertEqual(result.status, 'pass', result.to_dict())

    def test_two_period(self):
        """Test the direct two-period inequalities"""
        result = two_period_ic_check(self.ctx, samples=41, first_samples=11)

        self.assertEqual(result.status, 'pass', result.to_dict())
        self.assertGreaterEqual(result.worst, -1e-6)

    def test_first_period_slack_closed_form(self):
        """Test slack is (1 - delta/3)(theta_1 - k1) for reports below k1 < theta_1"""
        rng = np.random.default_rng(5)
        reports = rng.uniform(0.02, self.k1 - 0.01, 20)
        thetas = rng.uniform(self.k1 + 0.01, 0.98, 20)
        grid = np.unique(np.concatenate([reports, thetas]))
        self.assertEqual(grid.size, 40)

        slack = first_period_slack(self.ctx, grid)
        rows = np.searchsorted(grid, reports)
        cols = np.searchsorted(grid, thetas)
        expected = (1.0 - self.DELTA / 3.0) * (thetas - self.k1)

        np.testing.assert_allclose(slack[rows, cols], expected, atol=1e-6)

    def test_first_period_slack_same_side(self):
        """Test slack vanishes when report and type sit on the same side of k1"""
        below = np.linspace(0.1, self.k1 - 0.05, 5)
        above = np.linspace(self.k1 + 0.05, 0.95, 5)
        slack = first_period_slack(self.ctx, np.concatenate([below, above]))

        np.testing.assert_allclose(slack[:5, :5], 0.0, atol=1e-6)
        np.testing.assert_allclose(slack[5:, 5:], 0.0, atol=1e-6)

    def test_first_period_slack_needs_increasing_grid(self):
        """Test unsorted grids are refused"""
        with self.assertRaises(ICCheckError) as cm:
            first_period_slack(self.ctx, [0.5, 0.2])

        self.assertIn('strictly increasing', str(cm.exception))

    def test_best_response_envelope(self):
        """Test truth-telling is a best response under envelope transfers"""
        result = best_response_oracle(self.ctx, n_types=40)

        self.assertEqual(result.status, 'pass', result.to_dict())


class TestPowerChecks(unittest.TestCase):
    """Test the checks on the two-period power policy"""

    @classmethod
    def setUpClass(cls):
        result = solve(build_kernel('power'), SolveConfig(horizon=2))
        cls.ctx = ICContext(result.policy())

    def test_two_period(self):
        """Test the direct two-period inequalities"""
        result = two_period_ic_check(self.ctx, samples=41, first_samples=11)

        self.assertEqual(result.status, 'pass', result.to_dict())

    def test_best_response_envelope(self):
        """Test truth-telling is a best response under envelope transfers"""
        result = best_response_oracle(self.ctx, n_types=40)

        self.assertEqual(result.status, 'pass', result.to_dict())

    def test_best_response_surcharge_fails(self):
        """Test the surcharge is caught on the power policy too"""
        rule = TransferRule(self.ctx.policy, 'envelope', threshold_surcharge(0.2, 0.75))
        result = best_response_oracle(self.ctx, rule, n_types=40)

        self.assertEqual(result.status, 'fail')
        self.assertGreater(result.worst, result.tolerance)


class TestThreePeriodOracle(unittest.TestCase):
    """Test the oracle on a three-period policy"""

    def test_shrinking_uniform_three_periods(self):
        """Test envelope transfers pass and the surcharge fails with 40 types"""
        config = SolveConfig(horizon=3, discount=0.9, n_theta=101, n_distortion=41,
                             n_quadrature=32, precise_nodes=32)
        result = solve(build_kernel('shrinking_uniform'), config)
        ctx = ICContext(result.policy(), n_theta=41, n_distortion=21)

        truthful = best_response_oracle(ctx, n_types=40)
        self.assertEqual(truthful.status, 'pass', truthful.to_dict())
        self.assertEqual(truthful.details['states'], 40 ** 4)

        rule = TransferRule(ctx.policy, 'envelope', threshold_surcharge(0.2, 0.75))
        surcharged = best_response_oracle(ctx, rule, n_types=40)
        self.assertEqual(surcharged.status, 'fail')


class TestOtherKernels(unittest.TestCase):
    """Test verdicts on other kernels"""

    def test_power_corollary2_inconclusive(self):
        """Test the power policy fails a sufficient condition but passes the integral check"""
        result = solve(build_kernel('power'), SolveConfig(horizon=2))
        ctx = ICContext(result.policy())

        self.assertEqual(corollary2_check(ctx).status, 'inconclusive')
        self.assertEqual(integral_monotonicity_check(ctx, samples=41).status, 'pass')

    def test_two_period_needs_horizon_two(self):
        """Test the two-period check is inconclusive for other horizons"""
        policy = CallablePolicy.never(build_kernel('power'), 3, 1.0)
        result = two_period_ic_check(ICContext(policy, n_theta=11, n_distortion=11))

        self.assertEqual(result.status, 'inconclusive')

    def test_ar1_repeated_sales(self):
        """Test the sufficient conditions hold for AR(1) repeated sales"""
        kernel = build_kernel('ar1', {'gamma': 0.5})
        result = solve(kernel, SolveConfig(horizon=2, discount=0.9, mode='repeated_sales'))
        ctx = ICContext(result.policy())

        self.assertEqual(corollary2_check(ctx).status, 'pass')
        self.assertTrue(np.isfinite(integral_monotonicity_check(ctx, samples=31).worst))


if __name__ == '__main__':
    unittest.main()
