#!/usr/bin/env python3
"""
selling-time command line

Subcommands:
    solve         Solve the optimal selling-time policy and write tables + thresholds
    check         Solve, then run the incentive-compatibility checks
    simulate      Solve, then simulate the mechanism on random type paths
    sweep         Re-solve along one parameter axis
    list-kernels  Show the kernel catalogue with parameter documentation
    validate      Resolve and validate a configuration without computing
    presets       List presets or show one preset

Exit codes: 0 ok, 1 check failed, 2 usage or configuration error,
3 numeric failure.

Examples:
    python selling/scripts/cli.py solve --kernel quadratic_tilt --T 2 --delta 1.0
    python selling/scripts/cli.py check --preset power_t2
    python selling/scripts/cli.py sweep --kernel quadratic_tilt --axis delta --values 0,0.5,1
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from config_parser import TOOL_NAME, TOOL_VERSION, ConfigError, RunConfig
from config_resolver import ConfigResolver, ConfigurationError
from ic import ICCheckError, run_checks
from kernels import KERNEL_CATALOG, KernelError, KernelSingularityError, build_kernel, list_kernels
from output_writer import OutputError, OutputWriter
from path_resolver import PathResolutionError
from preset_loader import PresetError, PresetLoader
from quadrature import QuadratureError
from revenue import (RevenueError, SimulationSummary, TranscriptSet, myopic_check,
                     outcome_distribution, simulate, sweep, transfers_from_policy)
from solver import SolveConfigError, SolverError, solve
from thresholds import extract_thresholds
from validate_config import (SEPARATOR, check_common_issues, format_error, format_info,
                             format_success, format_warning, print_summary)
from virtual import GridError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    """Exception raised for malformed command-line flags."""
    pass


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------

def _csv_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(',') if item.strip()]


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in _csv_list(text)]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from e


def parse_param(text: str):
    """'name=value' with the value parsed as YAML (numbers, lists, mappings)."""
    name, sep, raw = text.partition('=')
    if not sep or not name.strip():
        raise UsageError(f"--param expects name=value, got '{text}'")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise UsageError(f"Cannot parse value of --param {name}: {e}") from e
    return name.strip(), value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='Run configuration YAML file')
    common.add_argument('--preset', help='Preset id (see the presets subcommand)')
    common.add_argument('--out', type=Path, help='Output directory (overrides output.directory)')
    common.add_argument('--format', type=_csv_list,
                        help='Comma-separated output formats: csv,json,plot')
    common.add_argument('--dry-run', action='store_true', help='Render outputs without writing files')
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for progress, -vv for debug logging')

    solving = argparse.ArgumentParser(add_help=False)
    solving.add_argument('--kernel', help='Kernel name (see list-kernels)')
    solving.add_argument('--param', action='append', default=[], metavar='NAME=VALUE',
                         help='Kernel parameter; repeatable')
    solving.add_argument('--T', dest='horizon', type=int, help='Horizon')
    solving.add_argument('--delta', dest='discount', type=float, help='Discount factor in [0, 1]')
    solving.add_argument('--mode', choices=['one_object', 'repeated_sales'])
    solving.add_argument('--n-theta', dest='n_theta', type=int, help='Valuation grid size')

    parser = argparse.ArgumentParser(
        prog='selling-time',
        description='Optimal selling time under persistent private valuations',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s solve --kernel quadratic_tilt --T 2 --delta 1.0
  %(prog)s check --kernel power --T 2
  %(prog)s simulate --preset shrinking_uniform_t2 --paths 100000 --seed 7
  %(prog)s sweep --kernel quadratic_tilt --axis delta --values 0,0.5,1
        """
    )
    parser.add_argument('--version', action='version', version=f'{TOOL_NAME} {TOOL_VERSION}')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('solve', parents=[common, solving], help='Solve the selling-time problem')

    check = sub.add_parser('check', parents=[common, solving], help='Run incentive checks')
    check.add_argument('--samples', type=int, help='Sample points per check')
    check.add_argument('--oracle-types', dest='oracle_types', type=int,
                       help='Type-grid size of the best-response oracle')
    check.add_argument('--skip', type=_csv_list, default=[], help='Comma-separated checks to skip')
    check.add_argument('--seed', type=int, help='Sampling seed')

    sim = sub.add_parser('simulate', parents=[common, solving], help='Monte Carlo simulation')
    sim.add_argument('--paths', type=int, help='Number of simulated paths')
    sim.add_argument('--seed', type=int, help='Root seed')
    sim.add_argument('--rng', help='Bit generator: pcg64 | philox | sfc64')

    sw = sub.add_parser('sweep', parents=[common, solving], help='Parameter sweep')
    sw.add_argument('--axis', help='delta | gamma | hazard_scale | strength | upper')
    sw.add_argument('--values', type=_float_list, help='Comma-separated axis values')

    sub.add_parser('list-kernels', parents=[common], help='Show the kernel catalogue')
    sub.add_parser('validate', parents=[common, solving], help='Validate the resolved configuration')
    sub.add_parser('presets', parents=[common], help='List presets or show --preset')
    return parser


def flag_layer(args: argparse.Namespace) -> Dict[str, Any]:
    """Configuration layer built from explicitly given flags."""
    layer: Dict[str, Any] = {}

    def put(section: str, key: str, value: Any) -> None:
        if value is not None:
            layer.setdefault(section, {})[key] = value

    kernel: Dict[str, Any] = {}
    if getattr(args, 'kernel', None):
        kernel['name'] = args.kernel
    params = dict(parse_param(p) for p in getattr(args, 'param', []))
    if params:
        kernel['params'] = params
    if kernel:
        layer['kernel'] = kernel

    for key in ('horizon', 'discount', 'mode', 'n_theta'):
        put('solve', key, getattr(args, key, None))
    for key in ('samples', 'oracle_types'):
        put('checks', key, getattr(args, key, None))
    for name in getattr(args, 'skip', []) or []:
        put('checks', name, False)
    for key in ('paths', 'seed', 'rng'):
        put('simulate', key, getattr(args, key, None))
    put('sweep', 'axis', getattr(args, 'axis', None))
    put('sweep', 'values', getattr(args, 'values', None))
    put('output', 'formats', args.format)
    return layer


def resolve_config(args: argparse.Namespace) -> RunConfig:
    resolver = ConfigResolver()
    if args.preset:
        resolver.add_layer(f"preset:{args.preset}", PresetLoader().load_preset(args.preset))
    if args.config:
        resolver.add_file(args.config)
    resolver.add_layer('flags', flag_layer(args))
    if args.verbose >= 2:
        print(resolver.show_resolution_order())
    return resolver.resolve_run()


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def _writer(config: RunConfig, args: argparse.Namespace) -> OutputWriter:
    return OutputWriter(config, output_root=args.out, dry_run=args.dry_run)


def _report_files(writer: OutputWriter) -> None:
    verb = 'Would write' if writer.dry_run else 'Wrote'
    for file in writer.written:
        print(format_info(f"{verb} {file.path}"))


def _solve(config: RunConfig):
    kernel = build_kernel(config.kernel_name, config.kernel_params)
    result = solve(kernel, config.solve_config())
    return kernel, result


def cmd_solve(config: RunConfig, args: argparse.Namespace) -> int:
    _, result = _solve(config)
    thresholds = extract_thresholds(result, seed=config.simulate.get('seed', 0))
    distribution = outcome_distribution(result.policy())
    writer = _writer(config, args)
    writer.write_solve(result, thresholds, extra={'revenue': distribution.to_dict()})

    k1 = thresholds.k1
    print(format_success(f"Solved {config.kernel_name} with T={result.horizon}"))
    print(f"  k1:               {'none' if k1 is None else f'{k1:.6g}'}")
    print(f"  expected revenue: {distribution.expected_revenue:.6g}")
    for flag in thresholds.non_threshold():
        print(format_warning(f"Not a threshold rule: {flag}"))
    if result.counter.clamped:
        print(format_warning(f"{result.counter.clamped} of {result.counter.queries} distortion lookups clamped to the grid"))
    _report_files(writer)
    return EXIT_OK


def cmd_check(config: RunConfig, args: argparse.Namespace) -> int:
    kernel, result = _solve(config)
    policy = result.policy()
    toggles = config.check_toggles()
    run_myopic = toggles.pop('myopic', False)
    seed = config.simulate.get('seed', 0)
    report = run_checks(policy, toggles=toggles,
                        samples=config.checks.get('samples', 200),
                        oracle_types=config.checks.get('oracle_types', 40),
                        tolerance=config.checks.get('tolerance', 1e-6), seed=seed)
    extra = {}
    myopic_failed = False
    if run_myopic:
        myopic = myopic_check(kernel, result.config, n_theta=config.checks.get('samples', 101),
                              policy=policy)
        extra['myopic'] = myopic.to_dict()
        myopic_failed = myopic.status == 'fail'

    writer = _writer(config, args)
    writer.write_check(report, extra)

    print(f"\nIncentive checks for {config.kernel_name} (T={result.horizon})")
    print(SEPARATOR)
    statuses = [(name, c.status) for name, c in sorted(report.checks.items())]
    if run_myopic:
        statuses.append(('myopic', extra['myopic']['status']))
    for name, status in statuses:
        fmt = {'pass': format_success, 'fail': format_error}.get(status, format_warning)
        print(fmt(f"{name}: {status}"))
    print(SEPARATOR)
    _report_files(writer)
    if report.overall == 'fail' or myopic_failed:
        print(format_error("At least one check failed"))
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_simulate(config: RunConfig, args: argparse.Namespace) -> int:
    settings = config.simulate
    paths = settings.get('paths', 10_000)
    seed = settings.get('seed', 0)
    if paths == 0:
        transcripts = TranscriptSet.empty(config.solve_config().horizon)
        summary = SimulationSummary(0, seed)
        transfers = None
    else:
        _, result = _solve(config)
        policy = result.policy()
        transfers = transfers_from_policy(policy, seed=seed)
        transcripts, summary = simulate(policy, transfers, paths=paths, seed=seed,
                                        chunk_size=settings.get('chunk_size', 100_000),
                                        workers=result.config.max_workers,
                                        rng=settings.get('rng', 'pcg64'))
    writer = _writer(config, args)
    writer.write_simulate(transcripts, summary, transfers)

    print(format_success(f"Simulated {summary.paths} paths (seed {seed})"))
    if summary.paths:
        print(f"  mean revenue:     {summary.mean_revenue:.6g} (SE {summary.revenue_se:.2g})")
        print(f"  mean buyer payoff: {summary.mean_buyer_payoff:.6g}")
        if summary.min_buyer_payoff < -1e-12:
            print(format_warning(f"Negative realised buyer payoff: {summary.min_buyer_payoff:.3g}"))
    _report_files(writer)
    return EXIT_OK


def cmd_sweep(config: RunConfig, args: argparse.Namespace) -> int:
    axis = config.sweep.get('axis')
    values = config.sweep.get('values')
    if not axis or not values:
        raise UsageError("sweep needs an axis and values (--axis, --values or the sweep section)")
    result = sweep(config.kernel_name, axis, values, config.solve_config(),
                   params=config.kernel_params, tolerance=config.checks.get('tolerance', 1e-6))
    writer = _writer(config, args)
    writer.write_sweep(result)

    print(f"\nSweep over {axis} ({config.kernel_name})")
    print(SEPARATOR)
    print(f"{axis:>12} {'revenue':>12} {'k1':>12}")
    for value, revenue, k1 in zip(result.values, result.revenue, result.k1):
        print(f"{value:>12.6g} {revenue:>12.6g} {'-' if k1 is None else f'{k1:.6g}':>12}")
    print(SEPARATOR)
    for name, ok in sorted(result.checks.items()):
        print((format_success if ok else format_error)(name))
    _report_files(writer)
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def cmd_list_kernels(args: argparse.Namespace) -> int:
    print("\nAvailable kernels:")
    print(SEPARATOR)
    for name in list_kernels():
        entry = KERNEL_CATALOG[name]
        print(f"{name}")
        print(f"  {entry.description}")
        for pname, spec in entry.params.items():
            default = '' if spec.default is None else f" = {spec.default}"
            print(f"  • {pname}{default}  {spec.describe_range()}  {spec.doc}")
        print()
    return EXIT_OK


def cmd_validate(config: RunConfig, args: argparse.Namespace) -> int:
    print(format_success("Configuration is valid"))
    print_summary(config, verbose=args.verbose > 0)
    warnings = check_common_issues(config)
    if warnings:
        print("\n" + SEPARATOR)
        print("Warnings:")
        print(SEPARATOR)
        for warning in warnings:
            print(format_warning(warning))
    return EXIT_OK


def cmd_presets(args: argparse.Namespace) -> int:
    loader = PresetLoader()
    if args.preset:
        info = loader.get_preset_info(args.preset)
        print(f"\n{info['preset_id']}: {info['title']}")
        print(SEPARATOR)
        print(f"Kernel:  {info['kernel']}")
        print(f"Horizon: {info['horizon']}")
        if info['description']:
            print(info['description'])
        for key, value in sorted(info['expected'].items()):
            print(f"  expected {key}: {value}")
        return EXIT_OK
    print("\nAvailable presets:")
    print(SEPARATOR)
    for preset_id, group, title in loader.list_presets():
        print(f"  {preset_id:<24} [{group}] {title}")
    return EXIT_OK


COMMAND_HANDLERS = {
    'solve': cmd_solve,
    'check': cmd_check,
    'simulate': cmd_simulate,
    'sweep': cmd_sweep,
    'validate': cmd_validate,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    configure_logging(args.verbose)

    try:
        if args.command == 'list-kernels':
            return cmd_list_kernels(args)
        if args.command == 'presets':
            return cmd_presets(args)
        config = resolve_config(args)
        logger.debug("Resolved configuration %s", config.hash)
        return COMMAND_HANDLERS[args.command](config, args)
    except (KernelSingularityError, QuadratureError, GridError) as e:
        print(format_error(f"Numeric failure: {e}"), file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ConfigurationError, PresetError, KernelError, SolveConfigError,
            PathResolutionError, OutputError, RevenueError, ICCheckError, UsageError) as e:
        print(format_error(str(e)), file=sys.stderr)
        return EXIT_USAGE
    except SolverError as e:
        print(format_error(f"Numeric failure: {e}"), file=sys.stderr)
        if e.state:
            print(format_info(f"State: {e.state}"), file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
