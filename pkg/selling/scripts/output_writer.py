#!/usr/bin/env python3
"""
Output Writer

Renders solver, check, simulation and sweep results as CSV, JSON and
two-column plot data. Every file carries the tool version and the config
hash; nothing time-dependent is written, so reruns of one configuration
produce identical bytes.
"""

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from config_parser import TOOL_NAME, TOOL_VERSION, RunConfig
from path_resolver import OutputPathResolver, PathResolutionError

logger = logging.getLogger(__name__)


class OutputError(Exception):
    """Exception raised for output rendering or writing errors."""
    pass


@dataclass
class WrittenFile:
    """Represents a rendered (and possibly written) output file."""
    path: Path
    content: str
    fmt: str
    command: str


def format_number(value: Any) -> str:
    """Shortest round-trip text for floats; everything else via str()."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ''
    # numpy scalars
    if hasattr(value, 'item'):
        return format_number(value.item())
    return str(value)


def _plain(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, 'tolist'):
        return _plain(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


class OutputWriter:
    """
    Writes result files for one run configuration.

    Supports:
    - CSV tables with a '#' header comment
    - JSON documents with a 'meta' block
    - Two-column plot data
    - dry_run (render without touching the filesystem)
    """

    def __init__(self, config: RunConfig, output_root: Optional[Path] = None,
                 formats: Optional[Sequence[str]] = None, dry_run: bool = False,
                 overwrite: bool = True):
        self.config = config
        self.resolver = OutputPathResolver(config, output_root)
        self.formats = list(formats or config.output.get('formats', ['csv', 'json', 'plot']))
        self.dry_run = dry_run
        self.overwrite = overwrite
        self.written: List[WrittenFile] = []

    def meta(self, command: str) -> Dict[str, Any]:
        return {
            'tool': TOOL_NAME,
            'version': TOOL_VERSION,
            'command': command,
            'config_hash': self.config.hash,
            'config': self.config.to_dict(),
        }

    def csv_text(self, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        buffer = io.StringIO()
        buffer.write(f"# {TOOL_NAME} {TOOL_VERSION} config {self.config.hash}\n")
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
        return buffer.getvalue()

    def json_text(self, command: str, payload: Dict[str, Any]) -> str:
        document = {'meta': self.meta(command), 'result': payload}
        try:
            return json.dumps(_plain(document), sort_keys=True, indent=2, allow_nan=False) + '\n'
        except (TypeError, ValueError) as e:
            raise OutputError(f"Result for '{command}' is not JSON serialisable: {e}") from e

    def plot_text(self, columns: Tuple[str, str], points: Iterable[Tuple[Any, Any]]) -> str:
        lines = [f"# {TOOL_NAME} {TOOL_VERSION} config {self.config.hash}",
                 f"# {columns[0]} {columns[1]}"]
        lines.extend(f"{format_number(x)} {format_number(y)}" for x, y in points)
        return '\n'.join(lines) + '\n'

    def emit(self, command: str, fmt: str, content: str, part: Optional[str] = None) -> Optional[WrittenFile]:
        """Write one file unless its format is disabled; returns None when skipped."""
        if fmt not in self.formats:
            return None
        try:
            path = self.resolver.resolve_path(command, fmt, part)
        except PathResolutionError as e:
            raise OutputError(f"Cannot name output file: {e}") from e
        file = WrittenFile(path, content, fmt, command)
        if not self.dry_run:
            self._write_file(file)
        self.written.append(file)
        return file

    def _write_file(self, file: WrittenFile) -> None:
        """
        Write a rendered file to disk.

        Creates parent directories if they don't exist.
        """
        if file.path.exists() and not self.overwrite:
            raise OutputError(
                f"File already exists: {file.path}\n"
                f"Remove it or choose another --out directory."
            )
        try:
            file.path.parent.mkdir(parents=True, exist_ok=True)
            file.path.write_text(file.content, encoding='utf-8')
        except OSError as e:
            raise OutputError(f"Failed to write {file.path}: {e}") from e
        logger.info("Wrote %s", file.path)

    # Per-command layouts

    def write_solve(self, result, thresholds=None, extra: Optional[Dict[str, Any]] = None) -> List[WrittenFile]:
        rows = result.rows()
        header = ['t', 'theta', 'distortion', 'psi', 'continuation', 'q', 'value']
        self.emit('solve', 'csv', self.csv_text(header, ([r[h] for h in header] for r in rows)),
                  part='policy')
        summary = result.summary()
        if thresholds is not None:
            summary['thresholds'] = thresholds.to_dict()
        if extra:
            summary.update(extra)
        self.emit('solve', 'json', self.json_text('solve', summary))
        if thresholds is not None:
            points = [(row['distortion'], row['k'])
                      for t, curve in sorted(summary['thresholds']['periods'].items())
                      for row in curve if t == '2']
            self.emit('solve', 'plot', self.plot_text(('distortion', 'k2'), points),
                      part='threshold')
        return self.written

    def write_check(self, report, extra: Optional[Dict[str, Any]] = None) -> List[WrittenFile]:
        payload = report.to_dict()
        if extra:
            payload.update(extra)
        self.emit('check', 'json', self.json_text('check', payload))
        header = ['check', 'status', 'worst', 'tolerance']
        rows = [[name, c['status'], c.get('worst'), c.get('tolerance')]
                for name, c in payload['checks'].items()]
        if 'myopic' in payload:
            rows.append(['myopic', payload['myopic']['status'], None, None])
        self.emit('check', 'csv', self.csv_text(header, rows))
        return self.written

    def write_simulate(self, transcripts, summary, transfers=None) -> List[WrittenFile]:
        self.emit('simulate', 'csv', self.csv_text(transcripts.header(), transcripts.rows()),
                  part='transcripts')
        payload = {'summary': summary.to_dict()}
        if transfers is not None:
            payload['transfers'] = transfers.describe()
        self.emit('simulate', 'json', self.json_text('simulate', payload))
        return self.written

    def write_sweep(self, result) -> List[WrittenFile]:
        payload = result.to_dict()
        self.emit('sweep', 'json', self.json_text('sweep', payload))
        header = [result.axis, 'revenue', 'k1', 'early_sale']
        rows = zip(result.values, result.revenue, result.k1, result.sold_by(1))
        self.emit('sweep', 'csv', self.csv_text(header, rows))
        for column in ('revenue', 'k1', 'early_sale'):
            self.emit('sweep', 'plot', self.plot_text((result.axis, column), result.plot_data(column)),
                      part=column)
        return self.written
