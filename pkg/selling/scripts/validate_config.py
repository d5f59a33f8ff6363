#!/usr/bin/env python3
"""
Run Configuration Validation Utility

Validates run configuration files and reports settings that are legal but
likely to give poor or surprising results.

Usage:
    python selling/scripts/validate_config.py <config.yaml> [more.yaml ...]

Examples:
    # Validate one configuration
    python selling/scripts/validate_config.py selling/examples/quadratic_tilt.yaml

    # Validate with detailed output
    python selling/scripts/validate_config.py selling/examples/quadratic_tilt.yaml --verbose
"""

import argparse
import sys
from pathlib import Path
from typing import List

from config_parser import TOOL_VERSION, ConfigError, ConfigParser, RunConfig
from revenue import TREE_HORIZON

SEPARATOR = "─" * 60


def format_success(message: str) -> str:
    return f"✓ {message}"


def format_error(message: str) -> str:
    return f"✗ {message}"


def format_warning(message: str) -> str:
    return f"⚠ {message}"


def format_info(message: str) -> str:
    return f"ℹ {message}"


def print_summary(config: RunConfig, verbose: bool = False) -> None:
    solve = config.solve_config()
    print("\n" + SEPARATOR)
    print("Configuration Summary:")
    print(SEPARATOR)
    print(f"Kernel:          {config.kernel_name}")
    for name, value in sorted(config.kernel_params.items()):
        print(f"  {name}: {value}")
    print(f"Horizon:         {solve.horizon}")
    print(f"Discount:        {solve.discount}")
    print(f"Mode:            {solve.mode}")
    print(f"Config hash:     {config.hash[:12]}")

    enabled = [name for name, on in sorted(config.check_toggles().items()) if on]
    print(f"\nEnabled checks ({len(enabled)}):")
    for name in enabled:
        print(f"  • {name}")

    if verbose:
        print("\n" + SEPARATOR)
        print("Detailed Settings:")
        print(SEPARATOR)
        for key, value in sorted(solve.to_dict().items()):
            print(f"  solve.{key}: {value}")
        for section in ('simulate', 'sweep', 'output'):
            for key, value in sorted(getattr(config, section).items()):
                print(f"  {section}.{key}: {value}")


def validate_run(config_path: Path, verbose: bool = False) -> bool:
    """
    Validate one run configuration file and print a report.

    Returns:
        True if validation passed, False otherwise
    """
    parser = ConfigParser(config_path)

    print(f"\nValidating configuration: {config_path}")
    print(SEPARATOR)

    if not parser.config_path.exists():
        print(format_error("Configuration file not found"))
        print(f"\n{format_info('To start from a preset:')}")
        print("  python selling/scripts/cli.py presets")
        return False

    try:
        config = parser.load()
    except ConfigError as e:
        print(format_error("Validation failed"))
        print(f"\n{e}")
        return False

    print(format_success("Configuration is valid"))
    print_summary(config, verbose)

    warnings = check_common_issues(config)
    if warnings:
        print("\n" + SEPARATOR)
        print("Warnings:")
        print(SEPARATOR)
        for warning in warnings:
            print(format_warning(warning))

    print("\n" + SEPARATOR)
    return True


def check_common_issues(config: RunConfig) -> List[str]:
    """
    Settings that are valid but probably not what was intended.

    Returns:
        List of warning messages
    """
    warnings = []
    solve = config.solve_config()
    checks = config.check_toggles()

    if solve.n_theta < 101 or solve.n_distortion < 41:
        warnings.append(
            f"Coarse state grid ({solve.n_theta} x {solve.n_distortion}). "
            f"Thresholds may be off by more than 1e-3."
        )
    if solve.horizon > TREE_HORIZON:
        warnings.append(
            f"Horizon {solve.horizon} > {TREE_HORIZON}: expected revenue falls back to grid "
            f"values and probe paths instead of tree quadrature."
        )
    if checks.get('two_period', True) and solve.horizon != 2:
        warnings.append("checks.two_period only applies to T = 2 and will be skipped.")
    if checks.get('myopic') and config.kernel_name != 'ar1':
        warnings.append(
            "checks.myopic is enabled for a non-AR(1) kernel. The generic one-step test runs, "
            "but the closed-form AR(1) bound is not reported."
        )
    if solve.mode == 'repeated_sales' and checks.get('corollary2') is False:
        warnings.append(
            "corollary2 is disabled for a repeated-sales policy, where it is usually the "
            "sharpest sufficient condition."
        )
    paths = config.simulate.get('paths')
    if paths is not None and 0 < paths < 1000:
        warnings.append(f"simulate.paths = {paths}: standard errors will be large.")
    sweep = config.sweep
    if sweep.get('axis') and not sweep.get('values'):
        warnings.append(f"sweep.axis '{sweep['axis']}' has no values; 'sweep' needs --values.")
    if solve.discount == 0 and solve.horizon > 1:
        warnings.append("discount = 0 makes every period after the first irrelevant.")
    return warnings


def main():
    parser = argparse.ArgumentParser(
        description="Validate selling-time run configuration files",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s selling/examples/quadratic_tilt.yaml
  %(prog)s selling/examples/quadratic_tilt.yaml --verbose
        """
    )
    parser.add_argument('configs', nargs='+', help='Run configuration file(s)')
    parser.add_argument('-v', '--verbose', action='store_true',
                        help='Show every resolved setting')
    parser.add_argument('--version', action='version',
                        version=f'selling-time config validator {TOOL_VERSION}')
    args = parser.parse_args()

    results = [validate_run(Path(p), args.verbose) for p in args.configs]
    if len(results) > 1:
        print(f"Passed: {sum(results)} / {len(results)}")
    sys.exit(0 if all(results) else 2)


if __name__ == "__main__":
    main()
