#!/usr/bin/env python3
"""
Optimal Selling-Time Solver

Backward induction on states (t, theta, L), where psi = theta - L is the
virtual valuation and c_t an optional seller cost:

    net_t  = psi - c_t
    M_t    = delta * E[V_{t+1}(theta', L * r(theta', theta)) | theta]
    sell   iff net_t > 0 and net_t - M_t > tie_tolerance
    V_t    = net_t if sell else M_t                  (one_object)
    V_t    = max(net_t, 0) + M_t                     (repeated_sales)

The last period is evaluated exactly (M_T = 0). Intermediate periods are
tabulated on a StateGrid with Gauss-Legendre expectations and bilinear
lookups. The first period, where L is a function of theta, is tabulated
along theta only, with expectations split at the next-stage switching
points so that thresholds come out at quadrature precision.

Usage:
    from kernels import build_kernel
    from solver import SolveConfig, solve

    result = solve(build_kernel("quadratic_tilt"), SolveConfig(horizon=2, discount=1.0))
    policy = result.policy()
"""

import logging
import math
import os
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from kernels import Kernel
from quadrature import (SPACES, GaussLegendreRule, quantile_nodes, sign_change_roots,
                        split_edges)
from virtual import (CoverageCounter, StateGrid, distortion_update, initial_distortion,
                     path_distortions)

logger = logging.getLogger(__name__)

MODES = ['one_object', 'repeated_sales']
MAX_WORKERS_ENV = 'SELLING_MAX_WORKERS'


class SolverError(Exception):
    """Exception raised for numeric failures; carries the offending state."""

    def __init__(self, message: str, state: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.state = state


class SolveConfigError(SolverError):
    """Exception raised for invalid solver settings."""
    pass


def worker_count(requested: Optional[int] = None) -> int:
    """Worker threads: explicit request, else SELLING_MAX_WORKERS, else 1."""
    if requested:
        return int(requested)
    raw = os.environ.get(MAX_WORKERS_ENV)
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        logger.warning("Ignoring non-integer %s=%r", MAX_WORKERS_ENV, raw)
        return 1
    return max(1, value)


def map_chunks(func: Callable, chunks: List[Any], workers: int) -> List[Any]:
    """Apply func to each chunk, in a thread pool when more than one worker is allowed."""
    if workers <= 1 or len(chunks) <= 1:
        return [func(chunk) for chunk in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, chunks))


@dataclass
class SolveConfig:
    """Solver settings."""
    horizon: int = 2
    discount: float = 1.0
    mode: str = 'one_object'
    n_theta: int = 401
    n_distortion: int = 121
    n_quadrature: int = 64
    tie_tolerance: float = 1e-9
    l_min: Optional[float] = None
    l_max: Optional[float] = None
    quadrature_space: str = 'support'
    seller_cost: Union[float, List[float]] = 0.0
    refine_band: float = 0.02
    precise_nodes: int = 48
    breakpoint_scan: int = 33
    probe_paths: int = 2000
    max_workers: Optional[int] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """
        Raises:
            SolveConfigError: Naming the first invalid field
        """
        def fail(name, value, expected):
            raise SolveConfigError(
                f"Invalid solve setting '{name}': {value!r}\n"
                f"Expected: {expected}"
            )

        if isinstance(self.horizon, bool) or not isinstance(self.horizon, int) or self.horizon < 1:
            fail('horizon', self.horizon, 'integer >= 1')
        if not isinstance(self.discount, (int, float)) or not 0.0 <= self.discount <= 1.0:
            fail('discount', self.discount, 'number in [0, 1]')
        if self.mode not in MODES:
            fail('mode', self.mode, ' | '.join(MODES))
        for name in ('n_theta', 'n_distortion', 'n_quadrature', 'precise_nodes'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 2:
                fail(name, value, 'integer >= 2')
        if not isinstance(self.breakpoint_scan, int) or self.breakpoint_scan < 3:
            fail('breakpoint_scan', self.breakpoint_scan, 'integer >= 3')
        if not isinstance(self.tie_tolerance, (int, float)) or not self.tie_tolerance > 0:
            fail('tie_tolerance', self.tie_tolerance, 'number > 0')
        if self.quadrature_space not in SPACES:
            fail('quadrature_space', self.quadrature_space, ' | '.join(SPACES))
        if not isinstance(self.refine_band, (int, float)) or self.refine_band < 0:
            fail('refine_band', self.refine_band, 'number >= 0')
        if not isinstance(self.probe_paths, int) or self.probe_paths < 0:
            fail('probe_paths', self.probe_paths, 'integer >= 0')
        if self.max_workers is not None and (not isinstance(self.max_workers, int) or self.max_workers < 1):
            fail('max_workers', self.max_workers, 'integer >= 1 or null')
        for name in ('l_min', 'l_max'):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, (int, float)) or value <= 0):
                fail(name, value, 'number > 0 or null')
        if isinstance(self.seller_cost, (list, tuple)):
            if len(self.seller_cost) != self.horizon:
                fail('seller_cost', self.seller_cost, f'number or list of {self.horizon} numbers')
            if not all(isinstance(c, (int, float)) for c in self.seller_cost):
                fail('seller_cost', self.seller_cost, 'numbers')
        elif not isinstance(self.seller_cost, (int, float)):
            fail('seller_cost', self.seller_cost, 'number or list of numbers')

    def cost(self, t: int) -> float:
        if isinstance(self.seller_cost, (list, tuple)):
            return float(self.seller_cost[t - 1])
        return float(self.seller_cost)

    def replace(self, **changes) -> 'SolveConfig':
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if isinstance(data['seller_cost'], tuple):
            data['seller_cost'] = list(data['seller_cost'])
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SolveConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SolveConfigError(
                f"Unknown solve setting(s): {', '.join(unknown)}\n"
                f"Supported settings: {', '.join(sorted(known))}"
            )
        return cls(**data)


# ----------------------------------------------------------------------
# Decision rule
# ----------------------------------------------------------------------

def decision_margin(net: np.ndarray, continuation: np.ndarray, mode: str) -> np.ndarray:
    """Signed margin whose positivity (beyond the tie tolerance) means sell."""
    if mode == 'repeated_sales':
        return net
    return net - continuation


def stage_value(net: np.ndarray, continuation: np.ndarray, sell: np.ndarray, mode: str) -> np.ndarray:
    if mode == 'repeated_sales':
        return np.where(sell, net, 0.0) + continuation
    return np.where(sell, net, continuation)


def _require_finite(name: str, values: np.ndarray, t: int, theta: np.ndarray,
                    distortion: Optional[np.ndarray] = None) -> None:
    bad = ~np.isfinite(values)
    if not np.any(bad):
        return
    index = tuple(np.argwhere(bad)[0])
    state = {'t': t, 'theta': float(np.broadcast_to(theta, values.shape)[index])}
    if distortion is not None:
        state['distortion'] = float(np.broadcast_to(distortion, values.shape)[index])
    raise SolverError(
        f"Non-finite {name} at t={t}: {values[index]!r} (state {state})\n"
        f"Check the kernel densities near this point or narrow the distortion range.",
        state=state
    )


@dataclass
class StageTable:
    """Period-t tables on the (theta, L) grid."""
    t: int
    net: np.ndarray
    continuation: np.ndarray
    margin: np.ndarray
    policy: np.ndarray
    value: np.ndarray


@dataclass
class FirstPeriodTable:
    """Period-1 tables along theta, where L = L1(theta)."""
    theta: np.ndarray
    distortion: np.ndarray
    net: np.ndarray
    continuation: np.ndarray
    margin: np.ndarray
    policy: np.ndarray
    value: np.ndarray


class StageModel:
    """Net value, margin and value of period t at arbitrary states."""

    def __init__(self, t: int, config: SolveConfig, grid: Optional[StateGrid] = None,
                 table: Optional[StageTable] = None, counter: Optional[CoverageCounter] = None):
        self.t = t
        self.config = config
        self.terminal = table is None
        if not self.terminal:
            self._value = grid.interpolator(table.value, counter)
            self._margin = grid.interpolator(table.margin, counter)

    def net(self, theta, distortion):
        return np.asarray(theta) - np.asarray(distortion) - self.config.cost(self.t)

    def margin(self, theta, distortion):
        if self.terminal or self.config.mode == 'repeated_sales':
            return self.net(theta, distortion)
        return self._margin(theta, distortion)

    def value(self, theta, distortion):
        if self.terminal:
            return np.maximum(self.net(theta, distortion), 0.0)
        return self._value(theta, distortion)


def precise_expectation(kernel: Kernel, stage: StageModel, theta_prev, distortion,
                        func: Optional[Callable] = None, nodes: int = 48, scan: int = 33,
                        tie_tolerance: float = 1e-9) -> np.ndarray:
    """
    E[func(theta', L * r(theta', theta_prev))] over the period-stage.t transition,
    integrated in quantile space with panels split where stage.margin switches sign.

    func defaults to stage.value.
    """
    theta_prev = np.atleast_1d(np.asarray(theta_prev, dtype=float))
    distortion = np.broadcast_to(np.asarray(distortion, dtype=float), theta_prev.shape)
    t = stage.t
    func = func or stage.value
    if theta_prev.size == 0:
        return np.empty(0)

    lo, hi = kernel.conditional_support(theta_prev, t)
    lo, hi = np.broadcast_arrays(lo, hi)

    def switch(rows, x):
        moved = distortion_update(distortion[rows], x, theta_prev[rows], kernel, t, strict=False)
        return stage.margin(x, moved) - tie_tolerance

    roots = sign_change_roots(switch, lo, hi, scan=scan)
    u_edges = None
    if roots.shape[1]:
        missing = np.isnan(roots)
        u_roots = np.asarray(kernel.transition_cdf(np.where(missing, lo[:, None], roots),
                                                   theta_prev[:, None], t), dtype=float)
        u_roots = np.where(missing, np.nan, u_roots)
        u_edges = split_edges(np.zeros(theta_prev.shape), np.ones(theta_prev.shape), u_roots)
    theta_next, weights = quantile_nodes(kernel, theta_prev, t, nodes, u_edges)
    moved = distortion_update(distortion[:, None], theta_next, theta_prev[:, None], kernel, t,
                              strict=False)
    return np.sum(weights * np.asarray(func(theta_next, moved)), axis=1)


@dataclass
class SolveResult:
    """Solved tables plus diagnostics. Tables are not modified after solve()."""
    kernel: Kernel
    config: SolveConfig
    grid: StateGrid
    first: FirstPeriodTable
    stages: Dict[int, StageTable]
    diagnostics: Dict[str, Any]
    counter: CoverageCounter = field(default_factory=CoverageCounter, repr=False)
    thresholds: Any = None
    _models: Dict[int, StageModel] = field(default_factory=dict, repr=False)
    _policy: Any = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def stage_model(self, t: int) -> StageModel:
        if t < 2 or t > self.horizon:
            raise SolverError(f"No stage model for t={t} (horizon {self.horizon})")
        if t not in self._models:
            table = None if t == self.horizon else self.stages[t]
            self._models[t] = StageModel(t, self.config, self.grid, table, self.counter)
        return self._models[t]

    def expectation(self, t: int, theta, distortion, func: Optional[Callable] = None) -> np.ndarray:
        """E over theta_{t+1} of func (default V_{t+1}) from states at period t."""
        cfg = self.config
        return precise_expectation(self.kernel, self.stage_model(t + 1), theta, distortion,
                                   func=func, nodes=cfg.precise_nodes,
                                   scan=cfg.breakpoint_scan, tie_tolerance=cfg.tie_tolerance)

    def policy(self) -> 'GridPolicy':
        if self._policy is None:
            self._policy = GridPolicy(self)
        return self._policy

    def value_at(self, t: int, theta, distortion):
        """V_t at arbitrary states (period 1 ignores distortion and uses L1(theta))."""
        if t == 1:
            return np.interp(theta, self.first.theta, self.first.value)
        return self.stage_model(t).value(theta, distortion)

    def rows(self) -> List[Dict[str, Any]]:
        """One row per grid node: t, theta, L, psi, M, q, V."""
        out = []
        f = self.first
        for i in range(f.theta.size):
            out.append({'t': 1, 'theta': float(f.theta[i]), 'distortion': float(f.distortion[i]),
                        'psi': float(f.theta[i] - f.distortion[i]),
                        'continuation': float(f.continuation[i]),
                        'q': int(f.policy[i]), 'value': float(f.value[i])})
        theta = self.grid.theta_nodes
        dist = self.grid.distortion_nodes
        for t in sorted(self.stages):
            table = self.stages[t]
            for i in range(theta.size):
                for j in range(dist.size):
                    out.append({'t': t, 'theta': float(theta[i]), 'distortion': float(dist[j]),
                                'psi': float(theta[i] - dist[j]),
                                'continuation': float(table.continuation[i, j]),
                                'q': int(table.policy[i, j]), 'value': float(table.value[i, j])})
        return out

    def summary(self) -> Dict[str, Any]:
        data = {
            'kernel': self.kernel.describe(),
            'solve': self.config.to_dict(),
            'diagnostics': dict(self.diagnostics, coverage=self.counter.to_dict()),
        }
        if self.thresholds is not None:
            data['thresholds'] = self.thresholds.to_dict()
        return data


def _solve_terminal(t: int, config: SolveConfig, grid: StateGrid) -> StageTable:
    theta = grid.theta_nodes[:, None]
    dist = grid.distortion_nodes[None, :]
    net = np.broadcast_to(theta - dist - config.cost(t), grid.shape).copy()
    continuation = np.zeros(grid.shape)
    margin = decision_margin(net, continuation, config.mode)
    sell = margin > config.tie_tolerance
    return StageTable(t, net, continuation, margin, sell, stage_value(net, continuation, sell, config.mode))


def _grid_expectation(kernel: Kernel, grid: StateGrid, stage: StageModel,
                      rule: GaussLegendreRule, workers: int) -> Tuple[np.ndarray, int]:
    theta = grid.theta_nodes
    dist = grid.distortion_nodes
    nodes, weights, fallback = rule.nodes(kernel, theta, stage.t)
    ratio = np.asarray(kernel.impulse_response(nodes, theta[:, None], stage.t, strict=False))

    block = max(1, (1 << 18) // (nodes.shape[1] * dist.size))
    chunks = [slice(i, min(i + block, theta.size)) for i in range(0, theta.size, block)]

    def run(rows):
        with np.errstate(invalid='ignore'):
            moved = np.where(dist[None, None, :] == 0, 0.0, ratio[rows, :, None] * dist[None, None, :])
        theta_next = np.broadcast_to(nodes[rows, :, None], moved.shape)
        values = stage.value(theta_next, moved)
        return np.einsum('iq,iql->il', weights[rows], values)

    return np.concatenate(map_chunks(run, chunks, workers), axis=0), fallback


def _interpolation_residual(kernel: Kernel, grid: StateGrid, stage: StageModel, table: StageTable,
                            config: SolveConfig, samples: int = 64) -> float:
    """Largest |grid M - precise M| over a fixed subsample of grid nodes."""
    rng = np.random.default_rng(0)
    i = rng.integers(0, grid.shape[0], samples)
    j = rng.integers(0, grid.shape[1], samples)
    precise = config.discount * precise_expectation(
        kernel, stage, grid.theta_nodes[i], grid.distortion_nodes[j],
        nodes=config.precise_nodes, scan=config.breakpoint_scan, tie_tolerance=config.tie_tolerance)
    return float(np.max(np.abs(precise - table.continuation[i, j])))


def solve(kernel: Kernel, config: Optional[SolveConfig] = None) -> SolveResult:
    """
    Compute the optimal selling policy by backward induction.

    Raises:
        SolverError: On non-finite values, with the offending state
        KernelSingularityError: If F1 has a zero density inside the support
    """
    config = config or SolveConfig()
    started = time.perf_counter()
    T = config.horizon
    grid = StateGrid.build(kernel, T, config.n_theta, config.n_distortion, config.l_min, config.l_max)
    counter = CoverageCounter()
    rule = GaussLegendreRule(config.n_quadrature, config.quadrature_space)
    workers = worker_count(config.max_workers)
    diagnostics: Dict[str, Any] = {'quadrature_fallback_rows': 0, 'interpolation_residual': {}}

    stages: Dict[int, StageTable] = {}
    next_stage: Optional[StageModel] = None
    for t in range(T, 1, -1):
        step = time.perf_counter()
        if t == T:
            table = _solve_terminal(t, config, grid)
        else:
            expected, fallback = _grid_expectation(kernel, grid, next_stage, rule, workers)
            diagnostics['quadrature_fallback_rows'] += fallback
            continuation = config.discount * expected
            net = (grid.theta_nodes[:, None] - grid.distortion_nodes[None, :]
                   - config.cost(t)) * np.ones(grid.shape)
            _require_finite('continuation value', continuation, t,
                            grid.theta_nodes[:, None], grid.distortion_nodes[None, :])
            margin = decision_margin(net, continuation, config.mode)
            sell = margin > config.tie_tolerance
            table = StageTable(t, net, continuation, margin, sell,
                               stage_value(net, continuation, sell, config.mode))
            diagnostics['interpolation_residual'][t] = _interpolation_residual(
                kernel, grid, next_stage, table, config)
        stages[t] = table
        next_stage = StageModel(t, config, grid, None if t == T else table, counter)
        logger.debug("Stage t=%d solved in %.3fs", t, time.perf_counter() - step)

    theta = grid.theta_nodes
    distortion = np.asarray(initial_distortion(kernel, theta), dtype=float)
    net = theta - distortion - config.cost(1)
    if T == 1:
        continuation = np.zeros(theta.shape)
    else:
        continuation = config.discount * precise_expectation(
            kernel, next_stage, theta, distortion, nodes=config.precise_nodes,
            scan=config.breakpoint_scan, tie_tolerance=config.tie_tolerance)
    _require_finite('first-period continuation value', continuation, 1, theta, distortion)
    margin = decision_margin(net, continuation, config.mode)
    sell = margin > config.tie_tolerance
    first = FirstPeriodTable(theta, distortion, net, continuation, margin, sell,
                             stage_value(net, continuation, sell, config.mode))

    if counter.clamped:
        logger.warning("%d of %d interpolation queries left the distortion grid (max L seen %.4g > %.4g)",
                       counter.clamped, counter.queries, counter.max_distortion, grid.l_max)
    logger.info("Solved %s (T=%d, delta=%g, mode=%s) in %.2fs", kernel.name, T,
                config.discount, config.mode, time.perf_counter() - started)
    return SolveResult(kernel, config, grid, first, stages, diagnostics, counter)


def solve_repeated_sales(kernel: Kernel, config: Optional[SolveConfig] = None) -> SolveResult:
    """Relaxed benchmark: sell in every period with positive net virtual value."""
    return solve(kernel, (config or SolveConfig()).replace(mode='repeated_sales'))


def continuation_value(result: SolveResult, t: int, theta, distortion):
    """M = delta * E[V_{t+1}] at states of period t; zero at the last period."""
    theta = np.asarray(theta, dtype=float)
    if t >= result.horizon:
        return np.zeros(theta.shape)[()]
    value = result.config.discount * result.expectation(t, np.atleast_1d(theta), distortion)
    return value.reshape(theta.shape)[()]


@dataclass
class MPrimeResult:
    """max over s > t of delta^(s-t) E[psi_s | state] and where it is attained."""
    value: float
    period: Optional[int]
    expectations: Dict[int, float]
    premise_holds: bool


def m_prime(kernel: Kernel, t: int, theta: float, distortion: float, discount: float,
            horizon: int, nodes: int = 16, seller_cost: Union[float, List[float]] = 0.0,
            max_points: int = 2_000_000) -> MPrimeResult:
    """
    Nested-quadrature cross-check of the continuation value. It equals M only
    when every downstream virtual value is positive; a violated premise is
    logged.
    """
    if t >= horizon:
        return MPrimeResult(0.0, None, {}, True)

    def cost(s):
        return float(seller_cost[s - 1]) if isinstance(seller_cost, (list, tuple)) else float(seller_cost)

    depth = horizon - t
    per_level = max(2, min(nodes, int(max_points ** (1.0 / depth))))
    thetas = np.array([float(theta)])
    dists = np.array([float(distortion)])
    weights = np.array([1.0])
    best, period, premise = -math.inf, None, True
    expectations: Dict[int, float] = {}
    for s in range(t + 1, horizon + 1):
        theta_next, w = quantile_nodes(kernel, thetas, s, per_level)
        moved = distortion_update(dists[:, None], theta_next, thetas[:, None], kernel, s, strict=False)
        psi = theta_next - moved - cost(s)
        weights = (weights[:, None] * w).ravel()
        thetas, dists, psi = theta_next.ravel(), moved.ravel(), psi.ravel()
        if np.any(psi[weights > 0] <= 0):
            premise = False
        expectations[s] = float(np.dot(weights, psi))
        candidate = discount ** (s - t) * expectations[s]
        if candidate > best:
            best, period = candidate, s
    if not premise:
        logger.warning("m_prime premise violated at t=%d, theta=%g: some downstream psi <= 0",
                       t, theta)
    return MPrimeResult(float(best), period, expectations, premise)


# ----------------------------------------------------------------------
# Policies
# ----------------------------------------------------------------------

@dataclass
class PathOutcome:
    """Decisions of a policy along report paths."""
    types: np.ndarray
    reports: np.ndarray
    distortion: np.ndarray
    decisions: np.ndarray

    @property
    def sale_period(self) -> np.ndarray:
        """First period with a sale (1-based), 0 when the object is never sold."""
        sold = self.decisions.any(axis=1)
        return np.where(sold, np.argmax(self.decisions, axis=1) + 1, 0)

    @property
    def virtual_values(self) -> np.ndarray:
        return self.reports - self.distortion


class Policy(ABC):
    """A selling rule over states (t, theta, L): sell iff margin > tie_tolerance."""

    def __init__(self, kernel: Kernel, horizon: int, discount: float, mode: str = 'one_object',
                 tie_tolerance: float = 1e-9, seller_cost: Union[float, List[float]] = 0.0):
        if mode not in MODES:
            raise SolveConfigError(f"Unsupported mode: '{mode}'\nSupported modes: {', '.join(MODES)}")
        self.kernel = kernel
        self.horizon = horizon
        self.discount = discount
        self.mode = mode
        self.tie_tolerance = tie_tolerance
        self.seller_cost = seller_cost

    def cost(self, t: int) -> float:
        if isinstance(self.seller_cost, (list, tuple)):
            return float(self.seller_cost[t - 1])
        return float(self.seller_cost)

    def net_value(self, t: int, theta, distortion):
        return np.asarray(theta, dtype=float) - np.asarray(distortion, dtype=float) - self.cost(t)

    @abstractmethod
    def margin(self, t: int, theta, distortion) -> np.ndarray:
        """Signed selling margin at states of period t."""

    def decide(self, t: int, theta, distortion) -> np.ndarray:
        return np.asarray(self.margin(t, theta, distortion)) > self.tie_tolerance

    def run(self, types: np.ndarray, reports: Optional[np.ndarray] = None) -> PathOutcome:
        return run_policy(self, types, reports)


class GridPolicy(Policy):
    """Optimal policy of a SolveResult; margins near zero are recomputed precisely."""

    def __init__(self, result: SolveResult):
        cfg = result.config
        super().__init__(result.kernel, cfg.horizon, cfg.discount, cfg.mode,
                         cfg.tie_tolerance, cfg.seller_cost)
        self.result = result
        self.refine_band = cfg.refine_band

    def margin(self, t, theta, distortion):
        theta, distortion = np.broadcast_arrays(np.asarray(theta, dtype=float),
                                                np.asarray(distortion, dtype=float))
        net = self.net_value(t, theta, distortion)
        if self.mode == 'repeated_sales' or t == self.horizon:
            return net
        if t == 1:
            approx = np.interp(theta, self.result.first.theta, self.result.first.margin)
        else:
            approx = self.result.stage_model(t).margin(theta, distortion)
        near = np.abs(approx) < self.refine_band
        if not np.any(near):
            return approx
        exact = np.array(approx, dtype=float, copy=True)
        expected = self.result.expectation(t, theta[near], distortion[near])
        exact[near] = net[near] - self.discount * expected
        return exact


class CallablePolicy(Policy):
    """Policy from a margin rule rule(t, theta, L) -> array."""

    def __init__(self, kernel: Kernel, horizon: int, discount: float,
                 rule: Callable[[int, np.ndarray, np.ndarray], np.ndarray],
                 mode: str = 'one_object', tie_tolerance: float = 1e-9, name: str = 'custom'):
        super().__init__(kernel, horizon, discount, mode, tie_tolerance)
        self.rule = rule
        self.name = name

    @classmethod
    def never(cls, kernel: Kernel, horizon: int, discount: float) -> 'CallablePolicy':
        return cls(kernel, horizon, discount,
                   lambda t, theta, dist: -np.ones(np.broadcast(theta, dist).shape), name='never')

    def margin(self, t, theta, distortion):
        theta, distortion = np.broadcast_arrays(np.asarray(theta, dtype=float),
                                                np.asarray(distortion, dtype=float))
        return np.asarray(self.rule(t, theta, distortion), dtype=float)


def myopic_policy(kernel: Kernel, config: SolveConfig) -> CallablePolicy:
    """Sell at the first t with psi_t > 0 and psi_t > delta * E[psi_{t+1} | state]."""
    T, delta = config.horizon, config.discount

    def rule(t, theta, distortion):
        net = theta - distortion - config.cost(t)
        if t >= T:
            return net
        flat_theta = theta.ravel()
        flat_dist = distortion.ravel()
        theta_next, w = quantile_nodes(kernel, flat_theta, t + 1, config.precise_nodes)
        moved = distortion_update(flat_dist[:, None], theta_next, flat_theta[:, None], kernel,
                                  t + 1, strict=False)
        expected = np.sum(w * (theta_next - moved - config.cost(t + 1)), axis=1).reshape(theta.shape)
        return np.minimum(net, net - delta * expected)

    return CallablePolicy(kernel, T, delta, rule, 'one_object', config.tie_tolerance, name='myopic')


def run_policy(policy: Policy, types: np.ndarray, reports: Optional[np.ndarray] = None) -> PathOutcome:
    """
    Apply a policy along type paths with exact distortion propagation.

    Args:
        types: (n, T) true type paths
        reports: (n, T) reported paths; truthful when omitted
    """
    types = np.atleast_2d(np.asarray(types, dtype=float))
    reports = types if reports is None else np.atleast_2d(np.asarray(reports, dtype=float))
    n, T = reports.shape
    if T != policy.horizon:
        raise SolverError(f"Paths have {T} periods but the policy horizon is {policy.horizon}")
    distortion = path_distortions(policy.kernel, reports, strict=False)
    decisions = np.zeros((n, T), dtype=bool)
    unsold = np.ones(n, dtype=bool)
    for t in range(1, T + 1):
        rows = unsold if policy.mode == 'one_object' else np.ones(n, dtype=bool)
        if np.any(rows):
            decisions[rows, t - 1] = policy.decide(t, reports[rows, t - 1], distortion[rows, t - 1])
        if policy.mode == 'one_object':
            unsold &= ~decisions[:, t - 1]
    return PathOutcome(types, reports, distortion, decisions)
