#!/usr/bin/env python3
"""
Configuration Resolver

Layers run configuration sources and resolves them by priority.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from config_parser import ConfigError, ConfigParser, RunConfig


class ConfigurationError(Exception):
    """Exception raised for configuration resolution errors."""
    pass


DEFAULTS: Dict[str, Any] = {
    'solve': {'horizon': 2, 'discount': 1.0, 'mode': 'one_object'},
    'checks': {
        'integral_monotonicity': True, 'corollary2': True, 'two_period': True,
        'best_response': True, 'expost_ir': True, 'envelope': True, 'myopic': False,
        'samples': 200, 'oracle_types': 40, 'tolerance': 1e-6,
    },
    'simulate': {'paths': 10000, 'seed': 0, 'rng': 'pcg64', 'chunk_size': 100000},
    'output': {'directory': 'results', 'formats': ['csv', 'json', 'plot'],
               'naming': '{kernel}_T{T}_{command}'},
}


class ConfigResolver:
    """
    Resolves a run configuration from layered sources.

    Priority order (highest to lowest):
    1. Command-line flags
    2. Configuration file
    3. Preset
    4. Built-in defaults

    Rules:
    - Dicts are merged recursively
    - Lists and scalars from a higher layer replace lower ones
    """

    def __init__(self, defaults: Optional[Dict[str, Any]] = None):
        """
        Args:
            defaults: Lowest-priority layer (DEFAULTS when omitted)
        """
        self.config_chain: List[Tuple[str, Dict[str, Any]]] = []
        self.add_layer('defaults', DEFAULTS if defaults is None else defaults)

    def add_layer(self, source: str, data: Optional[Dict[str, Any]]) -> 'ConfigResolver':
        """Add a layer above every existing one; None or empty layers are skipped."""
        if not data:
            return self
        if not isinstance(data, dict):
            raise ConfigurationError(
                f"Configuration layer '{source}' must be a mapping\n"
                f"Got: {type(data).__name__}"
            )
        self.config_chain.append((source, self._deep_copy(data)))
        return self

    def add_file(self, path: Path) -> 'ConfigResolver':
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"Configuration file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding='utf-8'))
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML in {path}: {e}") from e
        return self.add_layer(str(path), data)

    def resolve(self) -> Dict[str, Any]:
        """
        Merge the chain from lowest to highest priority.

        Returns:
            Merged configuration with '_config_sources' listing the layers used
        """
        merged: Dict[str, Any] = {}
        for _, data in self.config_chain:
            merged = self._merge_dict(merged, data)
        merged['_config_sources'] = [source for source, _ in self.config_chain]
        return merged

    def resolve_run(self) -> RunConfig:
        """
        Raises:
            ConfigError: If the merged configuration is invalid
        """
        merged = self.resolve()
        if 'kernel' not in merged:
            raise ConfigError(
                "No kernel configured.\n"
                f"Config sources: {merged['_config_sources']}\n"
                "Pass --kernel, --preset or --config"
            )
        return ConfigParser().validate(merged)

    def _merge_dict(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        result = self._deep_copy(base)
        for key, value in override.items():
            if isinstance(value, dict) and isinstance(result.get(key), dict):
                result[key] = self._merge_dict(result[key], value)
            else:
                result[key] = self._deep_copy(value)
        return result

    def _deep_copy(self, obj: Any) -> Any:
        if isinstance(obj, dict):
            return {k: self._deep_copy(v) for k, v in obj.items()}
        elif isinstance(obj, list):
            return [self._deep_copy(item) for item in obj]
        else:
            return obj

    def get_config_source(self, key: str) -> Optional[str]:
        """
        Source of a dotted key such as 'solve.horizon'.

        Useful for debugging: "Where did this setting come from?"
        """
        parts = key.split('.')
        for source, data in reversed(self.config_chain):
            node: Any = data
            for part in parts:
                if not isinstance(node, dict) or part not in node:
                    break
                node = node[part]
            else:
                return source
        return None

    def show_resolution_order(self) -> str:
        lines = ["Configuration Resolution Order:"]
        lines.append("=" * 60)
        for i, (source, data) in enumerate(reversed(self.config_chain), 1):
            priority = "HIGHEST" if i == 1 else f"Level {i}"
            lines.append(f"{i}. {priority}: {source}")
            kernel = data.get('kernel', {})
            if isinstance(kernel, dict) and 'name' in kernel:
                lines.append(f"   kernel: {kernel['name']}")
            sections = ', '.join(k for k in data if k != 'kernel')
            if sections:
                lines.append(f"   sections: {sections}")
            lines.append("")
        return "\n".join(lines)
