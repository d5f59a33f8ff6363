#!/usr/bin/env python3
"""
Threshold Extraction

Finds where the selling margin crosses zero: k1 along the first-period curve
L = L1(theta), and k_t(L) for later periods on each distortion node. Grid
brackets are refined with brentq against the policy's precise margin.

Grid cells that no on-path state reaches (for example theta > L at t >= 2
after a no-sale history of the shrinking-uniform process) can show crossings
that never matter. Probe paths simulated under the policy mark the
distortion cells where sales actually happen; per-period curves report only
those, and every raw crossing is kept under diagnostics.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize

from solver import GridPolicy, SolveResult, run_policy
from virtual import initial_distortion

logger = logging.getLogger(__name__)


@dataclass
class Crossing:
    """A zero of the margin; upward means selling starts above it."""
    value: float
    upward: bool


def _refine(func, lo: float, hi: float) -> float:
    try:
        return float(optimize.brentq(func, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps))
    except ValueError:
        # bracket lost its sign change after refinement near the tie tolerance
        return 0.5 * (lo + hi)


def _crossings(nodes: np.ndarray, sampled: np.ndarray, func) -> List[Crossing]:
    positive = sampled > 0
    found = []
    for i in np.nonzero(positive[:-1] != positive[1:])[0]:
        found.append(Crossing(_refine(func, float(nodes[i]), float(nodes[i + 1])),
                              upward=bool(positive[i + 1])))
    return found


@dataclass
class ThresholdCurve:
    """Crossings of the period-t margin along theta, per distortion node."""
    t: int
    distortion: np.ndarray
    crossings: List[List[Crossing]]
    active: np.ndarray

    def thresholds(self, on_path: bool = True) -> np.ndarray:
        """k_t per distortion node; NaN where absent, not a single upward crossing, or inactive."""
        out = np.full(self.distortion.size, np.nan)
        for j, cell in enumerate(self.crossings):
            if on_path and not self.active[j]:
                continue
            if len(cell) == 1 and cell[0].upward:
                out[j] = cell[0].value
        return out

    def non_threshold_cells(self) -> List[int]:
        return [j for j, cell in enumerate(self.crossings)
                if self.active[j] and (len(cell) > 1 or (cell and not cell[0].upward))]


@dataclass
class ThresholdSet:
    """First-period threshold plus per-period threshold curves."""
    horizon: int
    first_crossings: List[Crossing]
    first_sells_everywhere: bool
    curves: Dict[int, ThresholdCurve] = field(default_factory=dict)
    probe_paths: int = 0
    sales_by_period: Dict[int, int] = field(default_factory=dict)

    @property
    def first_is_threshold(self) -> bool:
        return len(self.first_crossings) <= 1 and all(c.upward for c in self.first_crossings)

    @property
    def k1(self) -> Optional[float]:
        """Selling threshold at t=1; None when the first period never sells or is not a threshold rule."""
        if not self.first_is_threshold:
            return None
        if self.first_crossings:
            return self.first_crossings[0].value
        return -np.inf if self.first_sells_everywhere else None

    def non_threshold(self) -> List[str]:
        flags = []
        if not self.first_is_threshold:
            flags.append(f"t=1: {len(self.first_crossings)} crossings")
        for t, curve in sorted(self.curves.items()):
            cells = curve.non_threshold_cells()
            if cells:
                flags.append(f"t={t}: {len(cells)} active distortion cells without a single upward crossing")
        return flags

    def to_dict(self) -> Dict[str, Any]:
        k1 = self.k1
        periods = {}
        raw = {}
        for t, curve in sorted(self.curves.items()):
            ks = curve.thresholds(on_path=True)
            periods[str(t)] = [{'distortion': float(curve.distortion[j]), 'k': float(ks[j])}
                               for j in range(ks.size) if np.isfinite(ks[j])]
            raw[str(t)] = [{'distortion': float(curve.distortion[j]),
                            'crossings': [c.value for c in cell],
                            'active': bool(curve.active[j])}
                           for j, cell in enumerate(curve.crossings) if cell]
        return {
            'k1': None if k1 is None or not np.isfinite(k1) else float(k1),
            'first_period': {
                'crossings': [c.value for c in self.first_crossings],
                'is_threshold': self.first_is_threshold,
                'sells_everywhere': self.first_sells_everywhere,
            },
            'periods': periods,
            'non_threshold': self.non_threshold(),
            'probe_paths': self.probe_paths,
            'sales_by_period': {str(t): n for t, n in sorted(self.sales_by_period.items())},
            'diagnostics': {'raw_crossings': raw},
        }


def _probe_activity(result: SolveResult, policy: GridPolicy, paths: int,
                    seed: int) -> Tuple[Dict[int, np.ndarray], Dict[int, int]]:
    grid = result.grid
    active = {t: np.zeros(grid.distortion_nodes.size, dtype=bool) for t in range(2, result.horizon + 1)}
    sales = {t: 0 for t in range(1, result.horizon + 1)}
    if paths == 0:
        return active, sales
    types = result.kernel.sample_paths(result.horizon, paths, np.random.default_rng(seed))
    outcome = run_policy(policy, types)
    nodes = grid.distortion_nodes
    for t in range(1, result.horizon + 1):
        sold = outcome.decisions[:, t - 1]
        sales[t] = int(np.count_nonzero(sold))
        if t == 1 or not np.any(sold):
            continue
        dist = np.clip(outcome.distortion[sold, t - 1], 0.0, nodes[-1])
        upper = np.clip(np.searchsorted(nodes, dist), 1, nodes.size - 1)
        nearer_lower = (dist - nodes[upper - 1]) <= (nodes[upper] - dist)
        active[t][np.where(nearer_lower, upper - 1, upper)] = True
    return active, sales


def extract_thresholds(result: SolveResult, probe_paths: Optional[int] = None,
                       seed: int = 0) -> ThresholdSet:
    """
    Extract threshold structure from a solved result and attach it as result.thresholds.

    Args:
        result: Output of solve()
        probe_paths: Number of on-path probes (default: result.config.probe_paths)
        seed: Probe seed
    """
    policy = result.policy()
    kernel = result.kernel
    tie = result.config.tie_tolerance
    probe_paths = result.config.probe_paths if probe_paths is None else probe_paths

    first = result.first

    def first_margin(x):
        return float(policy.margin(1, x, initial_distortion(kernel, x))) - tie

    first_crossings = _crossings(first.theta, first.margin - tie, first_margin)
    sells_everywhere = bool(np.all(first.policy))

    active, sales = _probe_activity(result, policy, probe_paths, seed)
    thresholds = ThresholdSet(result.horizon, first_crossings, sells_everywhere,
                              probe_paths=probe_paths, sales_by_period=sales)

    theta = result.grid.theta_nodes
    dist = result.grid.distortion_nodes
    for t in range(2, result.horizon + 1):
        table = result.stages[t]
        cells = []
        for j in range(dist.size):
            level = float(dist[j])

            def margin(x, level=level, t=t):
                return float(policy.margin(t, x, level)) - tie

            cells.append(_crossings(theta, table.margin[:, j] - tie, margin))
        thresholds.curves[t] = ThresholdCurve(t, dist.copy(), cells, active[t])

    for flag in thresholds.non_threshold():
        logger.warning("Non-threshold margin structure: %s", flag)
    result.thresholds = thresholds
    return thresholds
