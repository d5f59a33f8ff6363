#!/usr/bin/env python3
"""
Output Path Resolver

Resolves output file names from naming templates.
"""

import re
from pathlib import Path
from typing import Dict, Optional

from config_parser import RunConfig


class PathResolutionError(Exception):
    """Exception raised for path resolution errors."""
    pass


# Suffix per output format
EXTENSIONS = {'csv': '.csv', 'json': '.json', 'plot': '.dat'}


class OutputPathResolver:
    """
    Resolves output paths using the run configuration.

    Supports naming variables:
    - {kernel}: kernel name (e.g., quadratic_tilt)
    - {command}: subcommand (e.g., solve)
    - {T}: horizon
    - {hash}: first 12 hex digits of the config hash
    """

    SUPPORTED_VARIABLES = ['{kernel}', '{command}', '{T}', '{hash}']
    DEFAULT_NAMING = '{kernel}_T{T}_{command}'

    def __init__(self, config: RunConfig, output_root: Optional[Path] = None):
        """
        Args:
            config: Validated run configuration
            output_root: Overrides output.directory when given
        """
        self.config = config
        directory = config.output.get('directory', 'results')
        self.output_root = Path(output_root) if output_root else Path(directory)
        self.naming = config.output.get('naming', self.DEFAULT_NAMING)

    def resolve_stem(self, command: str) -> str:
        return self._substitute_variables(self.naming, command)

    def resolve_path(self, command: str, fmt: str, part: Optional[str] = None) -> Path:
        """
        Full path of one output file.

        Args:
            command: Subcommand producing the file
            fmt: 'csv', 'json' or 'plot'
            part: Optional suffix for commands writing several files of one format

        Raises:
            PathResolutionError: On unknown formats or naming variables
        """
        if fmt not in EXTENSIONS:
            raise PathResolutionError(
                f"Unknown output format: '{fmt}'\n"
                f"Supported formats: {', '.join(EXTENSIONS)}"
            )
        stem = self.resolve_stem(command)
        if part:
            stem = f"{stem}_{self._to_snake_case(part)}"
        return self.output_root / f"{stem}{EXTENSIONS[fmt]}"

    def _substitute_variables(self, template: str, command: str) -> str:
        values: Dict[str, str] = {
            'kernel': self.config.kernel_name,
            'command': command,
            'T': str(self.config.solve_config().horizon),
            'hash': self.config.hash[:12],
        }
        unknown = [v for v in re.findall(r'\{([^{}]*)\}', template) if v not in values]
        if unknown:
            raise PathResolutionError(
                f"Unknown naming variable(s): {', '.join('{' + v + '}' for v in unknown)}\n"
                f"Supported variables: {', '.join(self.SUPPORTED_VARIABLES)}"
            )
        result = template
        for key, value in values.items():
            result = result.replace('{' + key + '}', value)
        if not result or '/' in result or '\\' in result:
            raise PathResolutionError(f"Naming template resolves to an invalid file name: '{result}'")
        return result

    def _to_snake_case(self, name: str) -> str:
        name = name.replace('-', '_')
        return re.sub(r'(?<!^)(?=[A-Z])', '_', name).lower()
