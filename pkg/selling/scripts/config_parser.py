"""
Run Configuration Parser

Reads, validates and serialises run configurations (YAML files such as
selling/examples/quadratic_tilt.yaml).

Usage:
    from config_parser import load_config, ConfigError

    try:
        config = load_config("selling/examples/quadratic_tilt.yaml")
        print(f"Kernel: {config.kernel_name}")
    except ConfigError as e:
        print(f"Configuration error: {e}")
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from kernels import KernelError, validate_kernel_params
from revenue import BIT_GENERATORS, SWEEP_AXES
from solver import SolveConfig, SolveConfigError

TOOL_NAME = 'selling-time'
TOOL_VERSION = '0.1.0'


class ConfigError(Exception):
    """Exception raised for configuration-related errors."""
    pass


def config_hash(data: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
    canonical = json.dumps(data, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


@dataclass
class RunConfig:
    """A validated run configuration."""
    kernel_name: str
    kernel_params: Dict[str, Any] = field(default_factory=dict)
    solve: Dict[str, Any] = field(default_factory=dict)
    checks: Dict[str, Any] = field(default_factory=dict)
    simulate: Dict[str, Any] = field(default_factory=dict)
    sweep: Dict[str, Any] = field(default_factory=dict)
    output: Dict[str, Any] = field(default_factory=dict)

    def solve_config(self) -> SolveConfig:
        return SolveConfig.from_dict(self.solve)

    def check_toggles(self) -> Dict[str, bool]:
        return {k: v for k, v in self.checks.items() if k in ConfigParser.SUPPORTED_CHECKS}

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy({
            'kernel': {'name': self.kernel_name, 'params': self.kernel_params},
            'solve': self.solve,
            'checks': self.checks,
            'simulate': self.simulate,
            'sweep': self.sweep,
            'output': self.output,
        })

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        return ConfigParser().validate(data)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


class ConfigParser:
    """Parser for run configuration files."""

    # Required fields in configuration
    REQUIRED_FIELDS = ['kernel']

    SUPPORTED_SECTIONS = ['kernel', 'solve', 'checks', 'simulate', 'sweep', 'output']

    SUPPORTED_CHECKS = ['integral_monotonicity', 'corollary2', 'two_period', 'best_response',
                        'expost_ir', 'envelope', 'myopic']

    CHECK_SETTINGS = {'samples': 2, 'oracle_types': 2, 'tolerance': 0}

    SUPPORTED_FORMATS = ['csv', 'json', 'plot']

    SIMULATE_FIELDS = ['paths', 'seed', 'rng', 'chunk_size', 'scheme']

    OUTPUT_FIELDS = ['directory', 'formats', 'naming']

    def __init__(self, config_path: Optional[Path] = None):
        """
        Initialize the configuration parser.

        Args:
            config_path: Path to a YAML run configuration
        """
        self.config_path = Path(config_path) if config_path else None

    def read(self) -> Dict[str, Any]:
        """
        Read the YAML file without validating it.

        Raises:
            ConfigError: If the file is missing or not valid YAML
        """
        if self.config_path is None or not self.config_path.exists():
            raise ConfigError(
                f"Configuration file not found: {self.config_path}\n\n"
                f"Start from a preset instead:\n"
                f"  python selling/scripts/cli.py presets"
            )
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(
                f"Invalid YAML syntax in {self.config_path}\n\n"
                f"Error: {str(e)}\n\n"
                f"Common YAML issues:\n"
                f"  - Incorrect indentation (use spaces, not tabs)\n"
                f"  - Missing colon after key"
            ) from e
        except OSError as e:
            raise ConfigError(
                f"Failed to read configuration file: {self.config_path}\n"
                f"Error: {str(e)}"
            ) from e
        if data is None:
            raise ConfigError(f"Configuration file is empty: {self.config_path}")
        if not isinstance(data, dict):
            raise ConfigError(
                f"Configuration must be a mapping at the top level\n"
                f"Got: {type(data).__name__}"
            )
        return data

    def load(self) -> RunConfig:
        """
        Load and validate the configuration file.

        Raises:
            ConfigError: If the file is missing, malformed or invalid
        """
        return self.validate(self.read())

    def validate(self, config: Optional[Dict[str, Any]]) -> RunConfig:
        """
        Validate a configuration mapping and build a RunConfig.

        Raises:
            ConfigError: Naming the first offending field
        """
        if config is None:
            raise ConfigError("Configuration is empty")
        config = {k: v for k, v in config.items() if not str(k).startswith('_')}

        missing = [name for name in self.REQUIRED_FIELDS if name not in config]
        if missing:
            raise ConfigError(
                f"Missing required field(s): {', '.join(missing)}\n\n"
                f"Required fields:\n" +
                '\n'.join(f"  - {name}" for name in self.REQUIRED_FIELDS)
            )
        unknown = sorted(set(config) - set(self.SUPPORTED_SECTIONS))
        if unknown:
            raise ConfigError(
                f"Unknown section(s): {', '.join(unknown)}\n\n"
                f"Supported sections:\n" +
                '\n'.join(f"  - {name}" for name in self.SUPPORTED_SECTIONS)
            )
        for section in self.SUPPORTED_SECTIONS:
            value = config.get(section)
            if value is not None and not isinstance(value, dict):
                raise ConfigError(
                    f"'{section}' must be an object/dictionary\n"
                    f"Got: {type(value).__name__}"
                )

        name, params = self._validate_kernel(config['kernel'])
        solve = dict(config.get('solve') or {})
        try:
            SolveConfig.from_dict(solve)
        except SolveConfigError as e:
            raise ConfigError(f"solve: {e}") from e
        checks = self._validate_checks(dict(config.get('checks') or {}))
        simulate = self._validate_simulate(dict(config.get('simulate') or {}))
        sweep = self._validate_sweep(dict(config.get('sweep') or {}))
        output = self._validate_output(dict(config.get('output') or {}))
        return RunConfig(name, params, solve, checks, simulate, sweep, output)

    def _validate_kernel(self, kernel: Dict[str, Any]):
        name = kernel.get('name')
        if not isinstance(name, str) or not name.strip():
            raise ConfigError("kernel.name must be a non-empty string")
        params = kernel.get('params') or {}
        if not isinstance(params, dict):
            raise ConfigError(f"kernel.params must be a mapping\nGot: {type(params).__name__}")
        unknown = sorted(set(kernel) - {'name', 'params'})
        if unknown:
            raise ConfigError(f"Unknown kernel field(s): {', '.join(unknown)}\nSupported: name, params")
        try:
            validate_kernel_params(name, params)
        except KernelError as e:
            raise ConfigError(f"kernel: {e}") from e
        return name, dict(params)

    def _validate_checks(self, checks: Dict[str, Any]) -> Dict[str, Any]:
        for key, value in checks.items():
            if key in self.SUPPORTED_CHECKS:
                if not isinstance(value, bool):
                    raise ConfigError(f"checks.{key} must be a boolean (true/false)")
            elif key in self.CHECK_SETTINGS:
                minimum = self.CHECK_SETTINGS[key]
                if key == 'tolerance':
                    if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                        raise ConfigError("checks.tolerance must be a number >= 0")
                elif isinstance(value, bool) or not isinstance(value, int) or value < minimum:
                    raise ConfigError(f"checks.{key} must be an integer >= {minimum}")
            else:
                raise ConfigError(
                    f"Unknown check setting: '{key}'\n\n"
                    f"Supported checks:\n" +
                    '\n'.join(f"  - {c}" for c in self.SUPPORTED_CHECKS) +
                    f"\n\nSettings: {', '.join(self.CHECK_SETTINGS)}"
                )
        return checks

    def _validate_simulate(self, simulate: Dict[str, Any]) -> Dict[str, Any]:
        unknown = sorted(set(simulate) - set(self.SIMULATE_FIELDS))
        if unknown:
            raise ConfigError(
                f"Unknown simulate field(s): {', '.join(unknown)}\n"
                f"Supported: {', '.join(self.SIMULATE_FIELDS)}"
            )
        for key, minimum in (('paths', 0), ('seed', 0), ('chunk_size', 1)):
            value = simulate.get(key)
            if value is not None and (isinstance(value, bool) or not isinstance(value, int) or value < minimum):
                raise ConfigError(f"simulate.{key} must be an integer >= {minimum}\nGot: {value!r}")
        rng = simulate.get('rng')
        if rng is not None and rng not in BIT_GENERATORS:
            raise ConfigError(
                f"Unsupported simulate.rng: '{rng}'\n"
                f"Supported generators: {', '.join(BIT_GENERATORS)}"
            )
        scheme = simulate.get('scheme')
        if scheme is not None and scheme != 'virtual':
            raise ConfigError(f"simulate.scheme must be 'virtual'\nGot: {scheme!r}")
        return simulate

    def _validate_sweep(self, sweep: Dict[str, Any]) -> Dict[str, Any]:
        axis = sweep.get('axis')
        if axis is not None and axis not in SWEEP_AXES:
            raise ConfigError(
                f"Unsupported sweep.axis: '{axis}'\n\n"
                f"Supported axes:\n" + '\n'.join(f"  - {a}" for a in SWEEP_AXES)
            )
        values = sweep.get('values')
        if values is not None:
            if not isinstance(values, list) or not values:
                raise ConfigError("sweep.values must be a non-empty list of numbers")
            if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in values):
                raise ConfigError(f"sweep.values must contain numbers only\nGot: {values!r}")
        unknown = sorted(set(sweep) - {'axis', 'values'})
        if unknown:
            raise ConfigError(f"Unknown sweep field(s): {', '.join(unknown)}\nSupported: axis, values")
        return sweep

    def _validate_output(self, output: Dict[str, Any]) -> Dict[str, Any]:
        unknown = sorted(set(output) - set(self.OUTPUT_FIELDS))
        if unknown:
            raise ConfigError(
                f"Unknown output field(s): {', '.join(unknown)}\n"
                f"Supported: {', '.join(self.OUTPUT_FIELDS)}"
            )
        formats = output.get('formats')
        if formats is not None:
            if not isinstance(formats, list) or not formats:
                raise ConfigError("output.formats must be a non-empty list")
            bad = [f for f in formats if f not in self.SUPPORTED_FORMATS]
            if bad:
                raise ConfigError(
                    f"Unsupported output format(s): {', '.join(map(str, bad))}\n"
                    f"Supported formats: {', '.join(self.SUPPORTED_FORMATS)}"
                )
        for key in ('directory', 'naming'):
            value = output.get(key)
            if value is not None and (not isinstance(value, str) or not value.strip()):
                raise ConfigError(f"output.{key} must be a non-empty string")
        return output

    def list_sections(self, config: Dict[str, Any]) -> List[str]:
        return [s for s in self.SUPPORTED_SECTIONS if s in config]


def load_config(config_path: Union[str, Path]) -> RunConfig:
    """
    Load and validate a run configuration file.

    Raises:
        ConfigError: If configuration is missing, invalid, or malformed
    """
    return ConfigParser(Path(config_path)).load()


def validate_config(config_path: Union[str, Path]) -> None:
    """
    Raises:
        ConfigError: If validation fails
    """
    ConfigParser(Path(config_path)).load()
