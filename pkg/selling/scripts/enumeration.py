#!/usr/bin/env python3
"""
Exhaustive Path Enumeration

An independent optimizer for short horizons: types are restricted to the
midpoints of equal cells, every type history is enumerated, and continuation
values are exact sums over the discrete transition probabilities. Its
sell/wait decisions are compared with a grid policy at every reachable state.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np

from kernels import Kernel
from quadrature import DiscreteTypeRule
from solver import MODES, Policy, SolverError, decision_margin, stage_value
from virtual import distortion_update, initial_distortion

logger = logging.getLogger(__name__)


@dataclass
class EnumerationLevel:
    """All type histories of length t, in lexicographic order of type indices."""
    t: int
    last: np.ndarray
    theta: np.ndarray
    distortion: np.ndarray
    probability: np.ndarray
    unsold: np.ndarray
    margin: Optional[np.ndarray] = None
    sell: Optional[np.ndarray] = None
    value: Optional[np.ndarray] = None


@dataclass
class EnumerationResult:
    kernel: Kernel
    horizon: int
    discount: float
    mode: str
    types: DiscreteTypeRule
    levels: List[EnumerationLevel]

    @property
    def expected_value(self) -> float:
        first = self.levels[0]
        return float(np.dot(first.probability, first.value))


@dataclass
class EnumerationComparison:
    """Agreement between enumerated and grid decisions at reachable states."""
    states: int
    agree: int
    near_indifferent: int
    tolerance: float
    mismatches: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> Dict[str, Any]:
        return {'states': self.states, 'agree': self.agree,
                'near_indifferent': self.near_indifferent, 'tolerance': self.tolerance,
                'mismatches': self.mismatches[:20], 'passed': self.passed}


def solve_by_enumeration(kernel: Kernel, horizon: int, discount: float,
                         types: Optional[DiscreteTypeRule] = None, n_types: int = 20,
                         mode: str = 'one_object', tie_tolerance: float = 1e-9,
                         seller_cost: Union[float, List[float]] = 0.0,
                         max_histories: int = 5_000_000) -> EnumerationResult:
    """
    Solve the discrete-type problem by enumerating every type history.

    Raises:
        SolverError: If the number of histories exceeds max_histories
    """
    if mode not in MODES:
        raise SolverError(f"Unsupported mode: '{mode}'")
    types = types or DiscreteTypeRule.uniform_cells(kernel.support_lo, kernel.support_hi, n_types)
    n = types.types.size
    if n ** horizon > max_histories:
        raise SolverError(
            f"Enumeration needs {n}^{horizon} = {n ** horizon} histories, "
            f"above the limit of {max_histories}",
            state={'types': n, 'horizon': horizon}
        )

    def cost(t):
        return float(seller_cost[t - 1]) if isinstance(seller_cost, (list, tuple)) else float(seller_cost)

    x = types.types
    transitions = {}
    index = np.arange(n)
    levels = [EnumerationLevel(1, index, x.copy(), np.asarray(initial_distortion(kernel, x), dtype=float),
                               types.initial_probabilities(kernel), np.ones(n, dtype=bool))]
    for t in range(2, horizon + 1):
        prev = levels[-1]
        _, probs, _ = types.nodes(kernel, x, t)
        transitions[t] = probs
        moved = distortion_update(prev.distortion[:, None], x[None, :], prev.theta[:, None],
                                  kernel, t, strict=False)
        levels.append(EnumerationLevel(
            t,
            np.tile(index, prev.last.size),
            np.tile(x, prev.last.size),
            np.asarray(moved, dtype=float).ravel(),
            (prev.probability[:, None] * probs[prev.last]).ravel(),
            np.repeat(prev.unsold, n),
        ))

    for t in range(horizon, 0, -1):
        level = levels[t - 1]
        net = level.theta - level.distortion - cost(t)
        if t == horizon:
            continuation = np.zeros(net.shape)
        else:
            child = levels[t].value.reshape(level.last.size, n)
            continuation = discount * np.sum(transitions[t + 1][level.last] * child, axis=1)
        level.margin = decision_margin(net, continuation, mode)
        level.sell = level.margin > tie_tolerance
        level.value = stage_value(net, continuation, level.sell, mode)

    if mode == 'one_object':
        for t in range(2, horizon + 1):
            prev = levels[t - 2]
            levels[t - 1].unsold = np.repeat(prev.unsold & ~prev.sell, n)
    logger.debug("Enumerated %d histories over %d types", n ** horizon, n)
    return EnumerationResult(kernel, horizon, discount, mode, types, levels)


def compare_with_grid(enumerated: EnumerationResult, policy: Policy,
                      tolerance: Optional[float] = None) -> EnumerationComparison:
    """
    Compare sell/wait decisions at every reachable, not-yet-sold enumerated state.

    States whose enumerated margin is within tolerance (default: the policy's
    tie tolerance) are counted as near-indifferent rather than compared. Pass
    the type spacing to skip states where the discrete continuation value
    may differ from the continuous one.
    """
    tolerance = policy.tie_tolerance if tolerance is None else tolerance
    states = agree = near = 0
    mismatches = []
    for level in enumerated.levels:
        reachable = (level.probability > 0) & level.unsold
        if not np.any(reachable):
            continue
        theta = level.theta[reachable]
        dist = level.distortion[reachable]
        mine = level.sell[reachable]
        theirs = np.asarray(policy.decide(level.t, theta, dist))
        decisive = np.abs(level.margin[reachable]) > tolerance
        states += int(reachable.sum())
        near += int(np.count_nonzero(~decisive))
        same = mine == theirs
        agree += int(np.count_nonzero(same & decisive))
        for i in np.nonzero(~same & decisive)[0]:
            mismatches.append({'t': level.t, 'theta': float(theta[i]), 'distortion': float(dist[i]),
                               'enumerated_sell': bool(mine[i]), 'grid_sell': bool(theirs[i]),
                               'enumerated_margin': float(level.margin[reachable][i])})
    if mismatches:
        logger.warning("Enumeration disagrees with the grid policy at %d states", len(mismatches))
    return EnumerationComparison(states, agree, near, tolerance, mismatches)
