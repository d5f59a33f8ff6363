#!/usr/bin/env python3
"""
Unit tests for kernels.py
"""

import unittest
from pathlib import Path
import sys

import numpy as np

# Add selling/scripts to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'selling' / 'scripts'))

from kernels import (KERNEL_CATALOG, KernelError, KernelSingularityError, Marginal, build_kernel,
                     density_normalization_check, finite_difference_check, fosd_check, is_ifr,
                     list_kernels, validate_kernel_params)


class TestInitialDistribution(unittest.TestCase):
    """Test F1, f1, hazard and inverse hazard"""

    def setUp(self):
        self.kernel = build_kernel('shrinking_uniform')

    def test_uniform_initial(self):
        """Test the uniform F1 at an interior point"""
        self.assertAlmostEqual(self.kernel.initial_cdf(0.3), 0.3)
        self.assertAlmostEqual(self.kernel.initial_pdf(0.3), 1.0)

    def test_bounds(self):
        """Test F1 at both ends of the support for every kernel"""
        for name in list_kernels():
            with self.subTest(kernel=name):
                kernel = build_kernel(name)
                self.assertEqual(kernel.initial_cdf(kernel.support_lo), 0.0)
                self.assertEqual(kernel.initial_cdf(kernel.support_hi), 1.0)

    def test_out_of_support(self):
        """Test valuations outside the support"""
        with self.assertRaises(KernelError) as cm:
            self.kernel.initial_cdf(1.5)

        self.assertIn('outside the support', str(cm.exception))

    def test_hazard(self):
        """Test the uniform hazard rate 1 / (1 - theta)"""
        self.assertAlmostEqual(self.kernel.hazard(0.5), 2.0)
        self.assertTrue(np.isinf(self.kernel.hazard(1.0)))

    def test_inverse_hazard(self):
        """Test (1 - F1) / f1 for the uniform F1"""
        np.testing.assert_allclose(self.kernel.inverse_hazard(np.array([0.0, 0.5, 0.8, 1.0])),
                                   [1.0, 0.5, 0.2, 0.0], atol=1e-14)

    def test_hazard_scale(self):
        """Test hazard_scale multiplies the uniform hazard"""
        kernel = build_kernel('power', {'hazard_scale': 3.0})

        self.assertAlmostEqual(kernel.hazard(0.5), 6.0, places=10)
        self.assertAlmostEqual(kernel.inverse_hazard(0.25), 0.75 / 3.0, places=10)

    def test_is_ifr(self):
        """Test the uniform F1 has an increasing hazard rate"""
        self.assertTrue(is_ifr(self.kernel))
        self.assertTrue(is_ifr(build_kernel('power', {'hazard_scale': 2.0})))


class TestTransitions(unittest.TestCase):
    """Test transition laws of the built-in kernels"""

    def test_shrinking_uniform(self):
        """Test CDF and derivative of the shrinking uniform kernel"""
        kernel = build_kernel('shrinking_uniform')

        self.assertAlmostEqual(kernel.transition_cdf(0.4, 0.8), 0.5)
        self.assertAlmostEqual(kernel.transition_dcdf_dprev(0.4, 0.8), -0.625)

    def test_power(self):
        """Test the power-law CDF theta ** theta_prev"""
        kernel = build_kernel('power')

        self.assertAlmostEqual(kernel.transition_cdf(0.25, 0.5), 0.5)

    def test_quadratic_tilt_neutral_point(self):
        """Test the tilt vanishes at theta_prev = 1/2"""
        kernel = build_kernel('quadratic_tilt')
        theta = np.linspace(0.0, 1.0, 11)

        np.testing.assert_allclose(kernel.transition_cdf(theta, 0.5), theta, atol=1e-15)

    def test_cdf_clamps_outside_support(self):
        """Test the CDF is 0 below and 1 above the conditional support"""
        kernel = build_kernel('shrinking_uniform')

        self.assertEqual(kernel.transition_cdf(0.9, 0.5), 1.0)
        ar1 = build_kernel('ar1', {'gamma': 0.5})
        self.assertEqual(ar1.transition_cdf(0.1, 0.8), 0.0)

    def test_pdf_outside_support(self):
        """Test the density refuses points outside the conditional support"""
        kernel = build_kernel('shrinking_uniform')

        with self.assertRaises(KernelError) as cm:
            kernel.transition_pdf(0.9, 0.5)

        self.assertIn('outside the conditional', str(cm.exception))

    def test_transitions_start_at_two(self):
        """Test t = 1 has no transition"""
        with self.assertRaises(KernelError) as cm:
            build_kernel('power').transition_cdf(0.5, 0.5, t=1)

        self.assertIn('transitions start at t=2', str(cm.exception))

    def test_support_endpoints(self):
        """Test F_t = 0 at lo, 1 at hi and dF/dtheta_prev = 0 at both ends"""
        prev = np.linspace(0.05, 0.95, 19)
        for name in list_kernels():
            with self.subTest(kernel=name):
                kernel = build_kernel(name)
                lo, hi = kernel.conditional_support(prev)
                np.testing.assert_allclose(kernel.transition_cdf(lo, prev), 0.0, atol=1e-12)
                np.testing.assert_allclose(kernel.transition_cdf(hi, prev), 1.0, atol=1e-12)
                if name == 'ar1':
                    continue
                np.testing.assert_allclose(kernel.transition_dcdf_dprev(lo, prev), 0.0, atol=1e-12)
                if name != 'shrinking_uniform':
                    np.testing.assert_allclose(kernel.transition_dcdf_dprev(hi, prev), 0.0, atol=1e-12)

    def test_ppf_inverts_cdf(self):
        """Test the quantile function inverts the CDF"""
        u = np.linspace(0.05, 0.95, 7)
        for name in list_kernels():
            with self.subTest(kernel=name):
                kernel = build_kernel(name)
                theta = kernel.transition_ppf(u, 0.6)
                np.testing.assert_allclose(kernel.transition_cdf(theta, 0.6), u, atol=1e-10)

    def test_transition_mean(self):
        """Test conditional means against closed forms"""
        self.assertAlmostEqual(build_kernel('shrinking_uniform').transition_mean(0.8), 0.4, places=10)
        self.assertAlmostEqual(build_kernel('independent').transition_mean(0.3), 0.5, places=10)
        ar1 = build_kernel('ar1', {'gamma': 0.3})
        self.assertAlmostEqual(ar1.transition_mean(0.9), 0.3 * 0.9 + 0.7 * 0.5, places=10)

    def test_sample_paths(self):
        """Test sampled paths stay inside the conditional supports"""
        kernel = build_kernel('shrinking_uniform')
        paths = kernel.sample_paths(4, 500, np.random.default_rng(1))

        self.assertEqual(paths.shape, (500, 4))
        self.assertTrue(np.all(np.diff(paths, axis=1) <= 0))
        self.assertTrue(np.all((paths >= 0) & (paths <= 1)))

    def test_sample_paths_reproducible(self):
        """Test a seeded generator reproduces the same paths"""
        kernel = build_kernel('quadratic_tilt')
        first = kernel.sample_paths(3, 10, np.random.default_rng(5))
        second = kernel.sample_paths(3, 10, np.random.default_rng(5))

        np.testing.assert_array_equal(first, second)


class TestImpulseResponse(unittest.TestCase):
    """Test r = -(dF/dtheta_prev) / f"""

    def test_shrinking_uniform(self):
        """Test r = theta / theta_prev"""
        self.assertAlmostEqual(build_kernel('shrinking_uniform').impulse_response(0.4, 0.8), 0.5)

    def test_independent(self):
        """Test independent valuations carry no persistence"""
        kernel = build_kernel('independent')
        self.assertEqual(kernel.impulse_response(0.2, 0.9), 0.0)
        self.assertEqual(kernel.impulse_response(0.7, 0.1, strict=False), 0.0)

    def test_quadratic_tilt(self):
        """Test the tilt kernel at theta_prev = 0.6, theta = 0.5 (density 1)"""
        kernel = build_kernel('quadratic_tilt')

        self.assertAlmostEqual(kernel.transition_pdf(0.5, 0.6), 1.0)
        self.assertAlmostEqual(kernel.impulse_response(0.5, 0.6), 0.5)

    def test_quadratic_tilt_closed_form(self):
        """Test r = theta (1 - theta) / (1 - p - theta + 2 p theta) on a grid"""
        kernel = build_kernel('quadratic_tilt')
        theta, prev = np.meshgrid(np.linspace(0.05, 0.95, 10), np.linspace(0.05, 0.95, 10))
        expected = theta * (1 - theta) / (1 - prev - theta + 2 * prev * theta)

        np.testing.assert_allclose(kernel.impulse_response(theta, prev), expected, rtol=1e-12)

    def test_power(self):
        """Test r = -theta ln(theta) / theta_prev"""
        kernel = build_kernel('power')
        theta = np.exp(-1.0)

        self.assertAlmostEqual(kernel.impulse_response(theta, 0.5), theta / 0.5, places=12)

    def test_ar1_constant(self):
        """Test the AR(1) impulse response equals gamma"""
        kernel = build_kernel('ar1', {'gamma': 0.7})
        paths = kernel.sample_paths(3, 50, np.random.default_rng(0))
        r = kernel.impulse_response(paths[:, 1], paths[:, 0])

        np.testing.assert_allclose(r, 0.7, atol=1e-12)

    def test_singularity(self):
        """Test zero densities raise and name the point"""
        kernel = build_kernel('independent', {'marginals': [{'family': 'beta', 'a': 2.0, 'b': 2.0}]})

        with self.assertRaises(KernelSingularityError) as cm:
            build_kernel('power').impulse_response(0.5, 0.0)

        self.assertIn('theta_prev=', str(cm.exception))
        self.assertEqual(cm.exception.theta_prev, 0.0)
        self.assertEqual(kernel.impulse_response(0.0, 0.5, strict=False), 0.0)

    def test_inverse_hazard_singularity(self):
        """Test a vanishing f1 with mass remaining to the right"""
        kernel = build_kernel('independent', {'marginals': [{'family': 'beta', 'a': 2.0, 'b': 2.0}]})

        with self.assertRaises(KernelSingularityError) as cm:
            kernel.inverse_hazard(0.0)

        self.assertIn('vanishes', str(cm.exception))

    def test_shrinking_uniform_extension(self):
        """Test misreports above theta_prev extend r = theta / theta_prev"""
        kernel = build_kernel('shrinking_uniform')

        self.assertAlmostEqual(kernel.impulse_response(0.9, 0.6, strict=False), 1.5)


class TestPropertyChecks(unittest.TestCase):
    """Test fosd, normalisation and finite-difference checks"""

    def test_fosd_built_ins(self):
        """Test every built-in kernel satisfies FOSD"""
        for name in list_kernels():
            with self.subTest(kernel=name):
                report = fosd_check(build_kernel(name))
                self.assertTrue(report.passed, report.to_dict())

    def test_fosd_power_maximum_at_edges(self):
        """Test the power kernel's derivative peaks at 0, at theta in {0, 1}"""
        report = fosd_check(build_kernel('power'))

        self.assertAlmostEqual(report.max_derivative, 0.0, places=14)
        self.assertIn(report.argmax[0], (0.0, 1.0))

    def test_fosd_independent_exact_zero(self):
        """Test independent valuations give exact zeros"""
        report = fosd_check(build_kernel('independent'))

        self.assertEqual(report.max_derivative, 0.0)

    def test_density_normalization(self):
        """Test densities integrate to one"""
        for name in list_kernels():
            if name == 'power':
                continue
            with self.subTest(kernel=name):
                self.assertLess(density_normalization_check(build_kernel(name), n=12), 1e-8)

    def test_density_normalization_power(self):
        """Test the power kernel, whose density is singular at 0 for small theta_prev"""
        self.assertLess(density_normalization_check(build_kernel('power'), n=6), 1e-4)

    def test_finite_differences(self):
        """Test analytic dF/dtheta_prev against central differences"""
        for name in list_kernels():
            with self.subTest(kernel=name):
                self.assertLess(finite_difference_check(build_kernel(name), n=20), 1e-6)


class TestCatalogue(unittest.TestCase):
    """Test the kernel catalogue and parameter validation"""

    def test_list_kernels(self):
        """Test the five built-in kernels"""
        self.assertEqual(list_kernels(),
                         ['ar1', 'independent', 'power', 'quadratic_tilt', 'shrinking_uniform'])

    def test_parameter_docs(self):
        """Test every parameter carries documentation"""
        for name, entry in KERNEL_CATALOG.items():
            self.assertTrue(entry.description)
            for pname, spec in entry.params.items():
                with self.subTest(kernel=name, param=pname):
                    self.assertTrue(spec.doc)

    def test_defaults_filled(self):
        """Test validation fills defaults"""
        self.assertEqual(validate_kernel_params('quadratic_tilt'),
                         {'strength': 2.0, 'hazard_scale': 1.0})

    def test_unknown_kernel(self):
        """Test unknown kernel names"""
        with self.assertRaises(KernelError) as cm:
            build_kernel('gaussian')

        self.assertIn("Unknown kernel: 'gaussian'", str(cm.exception))

    def test_unknown_parameter(self):
        """Test unknown parameters"""
        with self.assertRaises(KernelError) as cm:
            build_kernel('power', {'strength': 1.0})

        self.assertIn('strength', str(cm.exception))
        self.assertIn('hazard_scale', str(cm.exception))

    def test_out_of_range(self):
        """Test range checks report the allowed interval"""
        with self.assertRaises(KernelError) as cm:
            build_kernel('quadratic_tilt', {'strength': 2.5})

        self.assertIn('[0, 2]', str(cm.exception))

    def test_non_numeric(self):
        """Test non-numeric parameter values"""
        with self.assertRaises(KernelError) as cm:
            build_kernel('ar1', {'gamma': 'high'})

        self.assertIn('must be a number', str(cm.exception))

    def test_describe_round_trip(self):
        """Test parameters() rebuilds an equivalent kernel"""
        kernel = build_kernel('ar1', {'gamma': 0.3, 'innovation': {'family': 'beta', 'a': 2, 'b': 3}})
        again = build_kernel('ar1', kernel.parameters())

        self.assertEqual(again.describe(), kernel.describe())

    def test_marginal_family(self):
        """Test unsupported marginal families"""
        with self.assertRaises(KernelError) as cm:
            Marginal(0.0, 1.0, 'lognormal')

        self.assertIn("Unsupported marginal family: 'lognormal'", str(cm.exception))


if __name__ == '__main__':
    unittest.main()
