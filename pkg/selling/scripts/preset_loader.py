"""
Preset Loader

Discovers and loads run-configuration presets stored as
selling/presets/<group>/<preset>.yaml. A preset is a run configuration plus
an optional 'preset' block with a title, a description and the values the
run is expected to reproduce.

Usage:
    from preset_loader import PresetLoader

    loader = PresetLoader()
    presets = loader.list_presets()
    config = loader.load_preset("quadratic_tilt_t2")
"""

import copy
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml


class PresetError(Exception):
    """Exception raised for preset-related errors."""
    pass


class PresetLoader:
    """Loader for run-configuration presets."""

    METADATA_KEY = 'preset'

    def __init__(self, presets_dir: Optional[Path] = None):
        """
        Args:
            presets_dir: Presets directory; defaults to selling/presets next to the scripts
        """
        if presets_dir is None:
            self.presets_dir = Path(__file__).parent.parent / "presets"
        else:
            self.presets_dir = Path(presets_dir)

        if not self.presets_dir.exists():
            raise PresetError(f"Presets directory not found: {self.presets_dir}")

    def list_presets(self) -> List[Tuple[str, str, str]]:
        """
        Returns:
            Sorted (preset_id, group, title) tuples
        """
        presets = []
        for group_dir in self.presets_dir.iterdir():
            if not group_dir.is_dir():
                continue
            for preset_file in group_dir.glob("*.yaml"):
                try:
                    data = self._load_preset_file(preset_file)
                except PresetError:
                    continue
                meta = data.get(self.METADATA_KEY) or {}
                presets.append((preset_file.stem, group_dir.name, meta.get('title', preset_file.stem)))
        return sorted(presets)

    def load_preset(self, preset_id: str) -> Dict[str, Any]:
        """
        Load a preset's run configuration (without its metadata block).

        Raises:
            PresetError: If the preset is missing or invalid
        """
        data = self._load(preset_id)
        return {k: v for k, v in data.items() if k != self.METADATA_KEY}

    def get_preset_info(self, preset_id: str) -> Dict[str, Any]:
        data = self._load(preset_id)
        meta = data.get(self.METADATA_KEY) or {}
        return {
            'preset_id': preset_id,
            'title': meta.get('title', preset_id),
            'kernel': data['kernel'].get('name'),
            'horizon': (data.get('solve') or {}).get('horizon'),
            'description': meta.get('description', '').split('\n')[0] or None,
            'expected': meta.get('expected', {}),
        }

    def customize_preset(self, preset_data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
        """Return a copy of preset_data with overrides merged in (dicts recursively)."""
        customized = copy.deepcopy(preset_data)

        def merge(base, extra):
            for key, value in extra.items():
                if isinstance(value, dict) and isinstance(base.get(key), dict):
                    merge(base[key], value)
                else:
                    base[key] = copy.deepcopy(value)

        merge(customized, overrides)
        return customized

    def _load(self, preset_id: str) -> Dict[str, Any]:
        path = self._find_preset_path(preset_id)
        if not path:
            available = [p[0] for p in self.list_presets()]
            raise PresetError(
                f"Preset '{preset_id}' not found.\n\n"
                f"Available presets:\n" +
                '\n'.join(f"  - {p}" for p in available)
            )
        data = self._load_preset_file(path)
        self._validate_preset(data, preset_id)
        return data

    def _find_preset_path(self, preset_id: str) -> Optional[Path]:
        for group_dir in self.presets_dir.iterdir():
            if not group_dir.is_dir():
                continue
            preset_file = group_dir / f"{preset_id}.yaml"
            if preset_file.exists():
                return preset_file
        return None

    def _load_preset_file(self, preset_path: Path) -> Dict[str, Any]:
        try:
            with open(preset_path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise PresetError(f"Invalid YAML in preset {preset_path.name}:\n{str(e)}") from e
        except OSError as e:
            raise PresetError(f"Failed to read preset {preset_path.name}:\n{str(e)}") from e

        if data is None:
            raise PresetError(f"Preset {preset_path.name} is empty")
        if not isinstance(data, dict):
            raise PresetError(f"Preset {preset_path.name} must be a mapping")
        return data

    def _validate_preset(self, data: Dict[str, Any], preset_id: str) -> None:
        kernel = data.get('kernel')
        if not isinstance(kernel, dict) or 'name' not in kernel:
            raise PresetError(f"Preset '{preset_id}' is missing kernel.name")
        meta = data.get(self.METADATA_KEY)
        if meta is not None and not isinstance(meta, dict):
            raise PresetError(f"Preset '{preset_id}': '{self.METADATA_KEY}' must be a mapping")
