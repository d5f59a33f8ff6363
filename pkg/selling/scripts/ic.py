#!/usr/bin/env python3
"""
Incentive-Compatibility Checks

Verifies a selling policy against the buyer's reporting incentives:

- d_function: the sensitivity D_t(report, theta) of the buyer's continuation
  utility, D_t = q_t - delta * c * integral of D_{t+1} dF_{t+1}(.|theta)/dtheta,
  with c = 1 - q_t for a single object and c = 1 for repeated sales
- integral_monotonicity_check: the integral inequality that, together with
  the envelope formula, characterises incentive compatibility
- corollary2_check: four sufficient conditions (own-report monotonicity,
  FOSD, action monotonicity, downstream monotonicity)
- two_period_ic_check: direct nested quadrature of the two-period inequalities
- best_response_oracle: a dynamic program over the buyer's reports on a
  discrete type grid
- expost_ir_check, envelope_check, assumption1_check

Checks certify only the sampled states with the stated tolerances.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from kernels import fosd_check
from quadrature import (DiscreteTypeRule, panel_rule, quantile_nodes, sign_change_roots,
                        split_edges)
from solver import GridPolicy, Policy, run_policy
from virtual import CoverageCounter, StateGrid, distortion_update, initial_distortion

logger = logging.getLogger(__name__)

STATUSES = ['pass', 'fail', 'inconclusive']
CHECKS = ['integral_monotonicity', 'corollary2', 'two_period', 'best_response',
          'expost_ir', 'envelope', 'assumption1']


class ICCheckError(Exception):
    """Exception raised for invalid check requests."""
    pass


@dataclass
class CheckResult:
    """Outcome of one check; a failure always carries a witness."""
    name: str
    status: str
    worst: Optional[float] = None
    witness: Optional[Dict[str, Any]] = None
    tolerance: Optional[float] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ICCheckError(f"Unknown check status: '{self.status}'")
        if self.status == 'fail' and self.witness is None:
            raise ICCheckError(f"Check '{self.name}' failed without a witness")

    @property
    def passed(self) -> bool:
        return self.status == 'pass'

    def to_dict(self) -> Dict[str, Any]:
        return {'status': self.status, 'worst': self.worst, 'witness': self.witness,
                'tolerance': self.tolerance, 'details': self.details}


@dataclass
class ICReport:
    """Per-check verdicts; overall is fail > inconclusive > pass."""
    checks: Dict[str, CheckResult] = field(default_factory=dict)

    def add(self, result: CheckResult) -> None:
        self.checks[result.name] = result

    @property
    def overall(self) -> str:
        statuses = {c.status for c in self.checks.values()}
        for status in ('fail', 'inconclusive'):
            if status in statuses:
                return status
        return 'pass'

    def to_dict(self) -> Dict[str, Any]:
        return {'overall': self.overall,
                'checks': {name: c.to_dict() for name, c in sorted(self.checks.items())}}


History = Optional[Tuple[float, float]]


class ICContext:
    """
    Policy plus the tables the checks share: D_t(theta, theta; L) and the
    buyer's information rent B_t(theta, L) for 2 <= t < T on a coarse grid.
    Both are exact at t = T.
    """

    def __init__(self, policy: Policy, n_theta: int = 101, n_distortion: int = 61,
                 nodes: int = 16, scan: int = 33, outer_scan: int = 129, seed: int = 0):
        self.policy = policy
        self.kernel = policy.kernel
        self.horizon = policy.horizon
        self.discount = policy.discount
        self.one_object = policy.mode == 'one_object'
        self.tie = policy.tie_tolerance
        self.nodes = nodes
        self.scan = scan
        self.outer_scan = outer_scan
        self.seed = seed
        self.counter = CoverageCounter()
        if isinstance(policy, GridPolicy):
            cfg = policy.result.config
            l_min, l_max = cfg.l_min, cfg.l_max
        else:
            l_min = l_max = None
        self.grid = StateGrid.build(self.kernel, self.horizon, n_theta, n_distortion, l_min, l_max)
        self._g: Dict[int, Any] = {}
        self._b: Dict[int, Any] = {}
        self._build_tables()

    @property
    def lo(self) -> float:
        return self.kernel.support_lo

    @property
    def hi(self) -> float:
        return self.kernel.support_hi

    def _build_tables(self) -> None:
        theta = self.grid.theta_nodes
        dist = self.grid.distortion_nodes
        th = np.repeat(theta, dist.size)
        ls = np.tile(dist, theta.size)
        for t in range(self.horizon - 1, 1, -1):
            g = d_values(self, t, th, th, ls).reshape(self.grid.shape)
            self._g[t] = self.grid.interpolator(g, self.counter)
            b = self._rent(t, th, ls).reshape(self.grid.shape)
            self._b[t] = self.grid.interpolator(b, self.counter)

    def allocation(self, t: int, report, distortion) -> np.ndarray:
        return np.asarray(self.policy.decide(t, report, distortion), dtype=float)

    def g_value(self, t: int, theta, distortion) -> np.ndarray:
        """D_t(theta, theta) at mechanism distortion L."""
        if t == self.horizon:
            return self.allocation(t, theta, distortion)
        return self._g[t](theta, distortion)

    def b_value(self, t: int, theta, distortion) -> np.ndarray:
        """Expected information rent from period t on under sale-price transfers."""
        if t == self.horizon:
            return self.allocation(t, theta, distortion) * np.asarray(distortion)
        return self._b[t](theta, distortion)

    def _rent(self, t: int, theta: np.ndarray, distortion: np.ndarray) -> np.ndarray:
        q = self.allocation(t, theta, distortion)
        if t == self.horizon:
            return q * distortion
        nxt, w = quantile_nodes(self.kernel, theta, t + 1, 2 * self.nodes)
        moved = distortion_update(distortion[:, None], nxt, theta[:, None], self.kernel, t + 1, strict=False)
        carry = 1.0 - q if self.one_object else 1.0
        return q * distortion + self.discount * carry * np.sum(w * self.b_value(t + 1, nxt, moved), axis=1)

    def report_distortion(self, t: int, report, history: History):
        """Mechanism distortion after reporting `report` at t following `history`."""
        if t == 1:
            return np.asarray(initial_distortion(self.kernel, report), dtype=float)
        prev_report, prev_distortion = history
        return np.asarray(distortion_update(prev_distortion, report, prev_report, self.kernel, t,
                                            strict=False), dtype=float)

    def histories(self, t: int, count: int) -> List[History]:
        """Representative on-path histories (previous report, previous distortion) before period t."""
        if t == 1:
            return [None]
        paths = max(200, 50 * count)
        types = self.kernel.sample_paths(self.horizon, paths, np.random.default_rng(self.seed))
        outcome = run_policy(self.policy, types)
        alive = np.ones(paths, dtype=bool)
        if self.one_object:
            alive = ~outcome.decisions[:, :t - 1].any(axis=1)
        if not np.any(alive):
            return []
        prev = outcome.reports[alive, t - 2]
        dist = outcome.distortion[alive, t - 2]
        order = np.argsort(prev)
        picks = np.unique(np.linspace(0, order.size - 1, min(count, order.size)).round().astype(int))
        return [(float(prev[order[k]]), float(dist[order[k]])) for k in picks]


def _inner_integral(ctx: ICContext, t: int, reports, thetas, dists) -> np.ndarray:
    """Integral of D_{t+1}(x, x) dF_{t+1}(x | theta)/dtheta after a period-t report."""
    kernel = ctx.kernel
    s = t + 1
    lo, hi = (np.broadcast_to(a, thetas.shape).astype(float) for a in kernel.conditional_support(thetas, s))

    def switch(rows, x):
        moved = distortion_update(dists[rows], x, reports[rows], kernel, s, strict=False)
        return np.asarray(ctx.policy.margin(s, x, moved)) - ctx.tie

    roots = sign_change_roots(switch, lo, hi, scan=ctx.scan)
    nodes, w = panel_rule(split_edges(lo, hi, roots), ctx.nodes)
    moved = distortion_update(dists[:, None], nodes, reports[:, None], kernel, s, strict=False)
    g = ctx.g_value(s, nodes, moved)
    derivative = np.asarray(kernel.transition_dcdf_dprev(nodes, thetas[:, None], s))
    return np.sum(w * g * derivative, axis=1)


def d_values(ctx: ICContext, t: int, reports, thetas, dists) -> np.ndarray:
    """Vectorised D_t(report, theta) given the mechanism distortion at the report."""
    reports, thetas, dists = (np.atleast_1d(np.asarray(a, dtype=float))
                              for a in np.broadcast_arrays(reports, thetas, dists))
    q = ctx.allocation(t, reports, dists)
    if t == ctx.horizon:
        return q
    carry = 1.0 - q if ctx.one_object else np.ones(q.shape)
    out = q.copy()
    live = carry > 0
    if np.any(live):
        inner = _inner_integral(ctx, t, reports[live], thetas[live], dists[live])
        out[live] = q[live] - ctx.discount * carry[live] * inner
    return out


def d_function(ctx: ICContext, t: int, report, theta, distortion=None, history: History = None):
    """
    D_t(report, theta) for a report following `history`.

    Args:
        distortion: Mechanism distortion at the report; derived from the
            history (or from F1 at t = 1) when omitted
        history: (previous report, previous distortion) for t >= 2
    """
    if not 1 <= t <= ctx.horizon:
        raise ICCheckError(f"Period t={t} outside 1..{ctx.horizon}")
    if distortion is None:
        if t > 1 and history is None:
            raise ICCheckError("d_function needs a distortion or a history for t >= 2")
        distortion = ctx.report_distortion(t, report, history)
    shape = np.broadcast(np.asarray(report), np.asarray(theta), np.asarray(distortion)).shape
    return d_values(ctx, t, report, theta, distortion).reshape(shape)[()]


# ----------------------------------------------------------------------
# Integral monotonicity
# ----------------------------------------------------------------------

def cumulative_truthful_d(ctx: ICContext, t: int, histories: List[History],
                          points: np.ndarray, nodes: int = 8) -> np.ndarray:
    """
    Integral of D_t(x, x) from the lower bound to each point, per history.

    Returns:
        Array (len(histories), len(points)); points must lie in the support
    """
    points = np.asarray(points, dtype=float)
    H = len(histories)
    prev = np.array([np.nan if h is None else h[0] for h in histories])
    prev_dist = np.array([np.nan if h is None else h[1] for h in histories])
    kernel = ctx.kernel

    def report_dist(rows, x):
        if t == 1:
            return np.asarray(initial_distortion(kernel, x), dtype=float)
        return distortion_update(prev_dist[rows], x, prev[rows], kernel, t, strict=False)

    def switch(rows, x):
        return np.asarray(ctx.policy.margin(t, x, report_dist(rows, x))) - ctx.tie

    lo = np.full(H, ctx.lo)
    hi = np.full(H, ctx.hi)
    roots = sign_change_roots(switch, lo, hi, scan=ctx.outer_scan)
    base = np.broadcast_to(np.sort(points), (H, points.size))
    edges = split_edges(lo, hi, np.concatenate([base, roots], axis=1) if roots.size else base)
    x, w = panel_rule(edges, nodes)
    rows = np.broadcast_to(np.arange(H)[:, None], x.shape)
    dist = report_dist(rows.ravel(), x.ravel())
    d = d_values(ctx, t, x.ravel(), x.ravel(), dist).reshape(x.shape)
    panels = (w * d).reshape(H, -1, nodes).sum(axis=2)
    cumulative = np.concatenate([np.zeros((H, 1)), np.cumsum(panels, axis=1)], axis=1)
    index = (edges[:, None, :] < points[None, :, None]).sum(axis=2)
    return np.take_along_axis(cumulative, index, axis=1)


def _rhs_matrix(ctx: ICContext, t: int, history: History, reports: np.ndarray,
                thetas: np.ndarray) -> np.ndarray:
    """
    Integral of D_t(report, x) over x from report to theta, with the order of
    integration swapped:
        q (theta - report) - delta c * integral of D_{t+1} [F(.|theta) - F(.|report)]
    """
    kernel = ctx.kernel
    dists = np.atleast_1d(ctx.report_distortion(t, reports, history))
    q = ctx.allocation(t, reports, dists)
    spread = thetas[None, :] - reports[:, None]
    if t == ctx.horizon:
        return q[:, None] * spread
    s = t + 1

    def switch(rows, x):
        moved = distortion_update(dists[rows], x, reports[rows], kernel, s, strict=False)
        return np.asarray(ctx.policy.margin(s, x, moved)) - ctx.tie

    I = reports.size
    roots = sign_change_roots(switch, np.full(I, ctx.lo), np.full(I, ctx.hi), scan=ctx.outer_scan)
    lo_j, hi_j = (np.broadcast_to(a, thetas.shape) for a in kernel.conditional_support(thetas, s))
    carry = 1.0 - q if ctx.one_object else np.ones(I)
    out = q[:, None] * spread
    for i in np.nonzero(carry > 0)[0]:
        lo_i, hi_i = kernel.conditional_support(reports[i], s)
        fixed = np.array([float(lo_i), float(hi_i)])
        extra = np.concatenate([roots[i][~np.isnan(roots[i])], fixed])
        breaks = np.concatenate([np.broadcast_to(extra, (thetas.size, extra.size)),
                                 lo_j[:, None], hi_j[:, None]], axis=1)
        edges = split_edges(np.full(thetas.size, ctx.lo), np.full(thetas.size, ctx.hi), breaks)
        x, w = panel_rule(edges, ctx.nodes)
        moved = distortion_update(dists[i], x, reports[i], kernel, s, strict=False)
        g = ctx.g_value(s, x, moved)
        shift = (np.asarray(kernel.transition_cdf(x, thetas[:, None], s)) -
                 np.asarray(kernel.transition_cdf(x, reports[i], s)))
        out[i] -= ctx.discount * carry[i] * np.sum(w * g * shift, axis=1)
    return out


def monotonicity_slack(ctx: ICContext, t: int, reports, thetas, history: History = None) -> np.ndarray:
    """
    LHS - RHS of the integral monotonicity inequality for every (report, theta) pair.

    Returns:
        Array (len(reports), len(thetas))
    """
    reports = np.atleast_1d(np.asarray(reports, dtype=float))
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    points = np.union1d(reports, thetas)
    phi = cumulative_truthful_d(ctx, t, [history], points)[0]
    lhs = phi[np.searchsorted(points, thetas)][None, :] - phi[np.searchsorted(points, reports)][:, None]
    return lhs - _rhs_matrix(ctx, t, history, reports, thetas)


def integral_monotonicity_check(ctx: ICContext, samples: int = 200, histories: int = 3,
                                tolerance: float = 1e-6) -> CheckResult:
    """Check the integral inequality on a samples x samples grid of (report, theta) per history."""
    grid = np.linspace(ctx.lo, ctx.hi, samples)
    worst, witness, pairs = np.inf, None, 0
    skipped = []
    for t in range(1, ctx.horizon + 1):
        reps = ctx.histories(t, histories)
        if not reps:
            skipped.append(t)
            continue
        for history in reps:
            slack = monotonicity_slack(ctx, t, grid, grid, history)
            np.fill_diagonal(slack, np.inf)
            pairs += samples * (samples - 1)
            i, j = np.unravel_index(np.argmin(slack), slack.shape)
            if slack[i, j] < worst:
                worst = float(slack[i, j])
                witness = {'t': t, 'history': None if history is None else list(history),
                           'report': float(grid[i]), 'theta': float(grid[j])}
    if witness is None:
        return CheckResult('integral_monotonicity', 'inconclusive', tolerance=tolerance,
                           details={'reason': 'no reachable histories', 'skipped_periods': skipped})
    status = 'pass' if worst >= -tolerance else 'fail'
    logger.info("Integral monotonicity: min slack %.3g over %d pairs (%s)", worst, pairs, status)
    return CheckResult('integral_monotonicity', status, worst, witness, tolerance,
                       {'pairs': pairs, 'skipped_periods': skipped})


# ----------------------------------------------------------------------
# Sufficient conditions
# ----------------------------------------------------------------------

def _first_drop(values: np.ndarray, axis_values: np.ndarray) -> Optional[int]:
    """Index where a 0/1 sequence falls from 1 to 0, if any."""
    drops = np.nonzero(values[:-1] > values[1:])[0]
    return int(drops[0]) if drops.size else None


def corollary2_check(ctx: ICContext, samples: int = 101, histories: int = 3) -> CheckResult:
    """Grid-check the four sufficient conditions; any failure makes the verdict inconclusive."""
    grid = np.linspace(ctx.lo, ctx.hi, samples)
    conditions: Dict[str, Any] = {}
    witness = None

    own = {'passed': True}
    for t in range(1, ctx.horizon + 1):
        for history in ctx.histories(t, histories):
            q = ctx.allocation(t, grid, ctx.report_distortion(t, grid, history))
            k = _first_drop(q, grid)
            if k is not None and own['passed']:
                own = {'passed': False, 't': t, 'history': history, 'report': float(grid[k])}
    conditions['own_report_monotone'] = own

    fosd = fosd_check(ctx.kernel, periods=tuple(range(2, max(3, ctx.horizon + 1))))
    conditions['fosd'] = fosd.to_dict()

    conditions['action_monotone'] = {
        'passed': not ctx.kernel.action_dependent,
        'note': 'action-free kernel' if not ctx.kernel.action_dependent else 'not verified',
    }

    downstream = {'passed': True}
    for t in range(1, ctx.horizon):
        for history in ctx.histories(t, histories):
            dist = ctx.report_distortion(t, grid, history)
            unsold = 1.0 - ctx.allocation(t, grid, dist) if ctx.one_object else np.ones(samples)
            prev_report = np.broadcast_to(grid[:, None], (samples, samples))
            future = np.broadcast_to(grid[None, :], (samples, samples))
            level = np.broadcast_to(dist[:, None], (samples, samples))
            alive = np.broadcast_to(unsold[:, None], (samples, samples)).copy()
            for s in range(t + 1, ctx.horizon + 1):
                level = distortion_update(level, future, prev_report, ctx.kernel, s, strict=False)
                q = ctx.allocation(s, future, level) * alive
                drops = q[:-1, :] > q[1:, :]
                if np.any(drops) and downstream['passed']:
                    a, y = np.argwhere(drops)[0]
                    downstream = {'passed': False, 't': t, 's': s, 'history': history,
                                  'earlier_report': float(grid[a]), 'later_report': float(grid[y])}
                if ctx.one_object:
                    alive = alive * (1.0 - q)
                prev_report = future
    conditions['downstream_monotone'] = downstream

    failed = [name for name, c in conditions.items() if not c['passed']]
    for name in failed:
        if 'report' in conditions[name] or 'earlier_report' in conditions[name]:
            witness = dict(conditions[name], condition=name)
            break
    status = 'pass' if not failed else 'inconclusive'
    return CheckResult('corollary2', status, witness=witness,
                       details={'conditions': conditions, 'failed': failed})


# ----------------------------------------------------------------------
# Two-period inequalities
# ----------------------------------------------------------------------

def _sale_intervals(ctx: ICContext, first_reports: np.ndarray) -> List[np.ndarray]:
    """Per first-period report, the (k, 2) array of period-2 report intervals with a sale."""
    kernel = ctx.kernel
    dists = np.atleast_1d(ctx.report_distortion(1, first_reports, None))
    q1 = ctx.allocation(1, first_reports, dists)

    def switch(rows, x):
        moved = distortion_update(dists[rows], x, first_reports[rows], kernel, 2, strict=False)
        return np.asarray(ctx.policy.margin(2, x, moved)) - ctx.tie

    n = first_reports.size
    roots = sign_change_roots(switch, np.full(n, ctx.lo), np.full(n, ctx.hi), scan=ctx.outer_scan)
    edges = split_edges(np.full(n, ctx.lo), np.full(n, ctx.hi), roots)
    mids = 0.5 * (edges[:, :-1] + edges[:, 1:])
    rows = np.broadcast_to(np.arange(n)[:, None], mids.shape)
    moved = distortion_update(dists[rows], mids, first_reports[rows], kernel, 2, strict=False)
    selling = ctx.allocation(2, mids, moved) > 0
    if ctx.one_object:
        selling &= (q1 == 0)[:, None]
    out = []
    for i in range(n):
        keep = selling[i] & (edges[i, 1:] > edges[i, :-1])
        out.append(np.stack([edges[i, :-1][keep], edges[i, 1:][keep]], axis=1))
    return out


def _sale_measure(intervals: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Length of the sale set below each x."""
    if intervals.size == 0:
        return np.zeros(x.shape)
    return np.clip(x[..., None] - intervals[:, 0], 0.0, intervals[:, 1] - intervals[:, 0]).sum(axis=-1)


def _interval_derivative_integral(ctx: ICContext, intervals: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Integral over the sale intervals of dF_2(y | x)/dx dy, for each x."""
    total = np.zeros(x.shape)
    if intervals.size == 0:
        return total
    lo, hi = (np.broadcast_to(a, x.shape) for a in ctx.kernel.conditional_support(x, 2))
    for a, b in intervals:
        left = np.maximum(a, lo)
        right = np.maximum(left, np.minimum(b, hi))
        y, w = panel_rule(np.stack([left, right], axis=-1), ctx.nodes)
        total += np.sum(w * np.asarray(ctx.kernel.transition_dcdf_dprev(y, x[..., None], 2)), axis=-1)
    return total


def first_period_slack(ctx: ICContext, grid, panel_nodes: int = 8) -> np.ndarray:
    """
    LHS - RHS of the two-period first-period inequality.

    Args:
        grid: increasing first-period points

    Returns:
        Array (n, n) with rows indexed by report and columns by true type
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ICCheckError("First-period slack needs a strictly increasing grid")
    # cumulative over x panels between grid points and first-period switches
    q1_grid = ctx.allocation(1, grid, ctx.report_distortion(1, grid, None))
    edges = np.union1d(grid, first_period_switches(ctx))
    x, w = panel_rule(edges[None, :], panel_nodes)
    x, w = x[0], w[0]
    q1_x = ctx.allocation(1, x, ctx.report_distortion(1, x, None))
    own_intervals = _sale_intervals(ctx, x)
    own = np.array([_interval_derivative_integral(ctx, iv, np.array([xi]))[0]
                    for xi, iv in zip(x, own_intervals)])
    integrand = q1_x - ctx.discount * own
    cum = np.concatenate([[0.0], np.cumsum((w * integrand).reshape(-1, panel_nodes).sum(axis=1))])
    at = np.searchsorted(edges, grid)
    lhs = cum[at][None, :] - cum[at][:, None]

    rhs = np.empty((grid.size, grid.size))
    for i, intervals in enumerate(_sale_intervals(ctx, grid)):
        inner = _interval_derivative_integral(ctx, intervals, x)
        c = np.concatenate([[0.0], np.cumsum((w * inner).reshape(-1, panel_nodes).sum(axis=1))])
        rhs[i] = (grid - grid[i]) * q1_grid[i] - ctx.discount * (c[at] - c[at[i]])
    return lhs - rhs


def two_period_ic_check(ctx: ICContext, samples: int = 200, first_samples: int = 21,
                        tolerance: float = 1e-6, panel_nodes: int = 8) -> CheckResult:
    """
    Check the second-period inequality over (first report, second report,
    second type) and the first-period inequality over (first report, first
    type), by nested quadrature of the integrals as written.
    """
    if ctx.horizon != 2:
        return CheckResult('two_period', 'inconclusive', tolerance=tolerance,
                           details={'reason': f'horizon is {ctx.horizon}, not 2'})
    grid = np.linspace(ctx.lo, ctx.hi, samples)
    worst, witness = np.inf, None

    # second period: integral of q2(x) from report to type vs (type - report) q2(report)
    firsts = np.linspace(ctx.lo, ctx.hi, first_samples)
    for first, intervals in zip(firsts, _sale_intervals(ctx, firsts)):
        measure = _sale_measure(intervals, grid)
        inside = ((grid[:, None] >= intervals[:, 0]) & (grid[:, None] < intervals[:, 1])).any(axis=1) \
            if intervals.size else np.zeros(samples, dtype=bool)
        lhs = measure[None, :] - measure[:, None]
        rhs = (grid[None, :] - grid[:, None]) * inside[:, None]
        slack = lhs - rhs
        i, j = np.unravel_index(np.argmin(slack), slack.shape)
        if slack[i, j] < worst:
            worst = float(slack[i, j])
            witness = {'inequality': 'second_period', 'first_report': float(first),
                       'report': float(grid[i]), 'theta': float(grid[j])}

    slack = first_period_slack(ctx, grid, panel_nodes)
    np.fill_diagonal(slack, np.inf)
    i, j = np.unravel_index(np.argmin(slack), slack.shape)
    if slack[i, j] < worst:
        worst = float(slack[i, j])
        witness = {'inequality': 'first_period', 'report': float(grid[i]), 'theta': float(grid[j])}

    status = 'pass' if worst >= -tolerance else 'fail'
    return CheckResult('two_period', status, worst, witness, tolerance,
                       {'samples': samples, 'first_samples': first_samples})


# ----------------------------------------------------------------------
# Best-response oracle
# ----------------------------------------------------------------------

def _payments(ctx: ICContext, t: int, scheme: str, perturbation: Optional[Callable],
              reports: np.ndarray, dists: np.ndarray, q: np.ndarray,
              rent_now: Optional[np.ndarray], rent_next: Optional[np.ndarray],
              probs_next: Optional[np.ndarray]) -> np.ndarray:
    """Payments for every (history, report) cell of period t."""
    if scheme == 'virtual':
        pay = q * (reports - dists)
    elif scheme == 'envelope':
        expected = 0.0
        if rent_next is not None:
            expected = np.einsum('hxj,xj->hx', rent_next, probs_next)
        pay = reports * q - rent_now + ctx.discount * expected
    else:
        raise ICCheckError(f"Unknown transfer scheme: '{scheme}'\nSupported: virtual, envelope")
    if perturbation is not None:
        pay = pay + q * np.asarray(perturbation(t, reports, dists), dtype=float)
    return pay


def best_response_oracle(ctx: ICContext, transfers: Any = None, n_types: int = 40,
                         max_states: int = 5_000_000, tolerance: Optional[float] = None) -> CheckResult:
    """
    Largest gain from optimal misreporting over truthful reporting on a
    discrete type grid, across all periods, report histories and true types.

    transfers may expose `scheme` ('envelope' or 'virtual') and
    `perturbation(t, report, distortion)` added to the payment at a sale;
    None means envelope transfers.
    """
    if n_types < 2:
        raise ICCheckError(f"Oracle needs at least 2 types, got {n_types}")
    T = ctx.horizon
    size = n_types ** (T + 1)
    if size > max_states:
        return CheckResult('best_response', 'inconclusive',
                           details={'reason': 'state space too large', 'states': size,
                                    'limit': max_states, 'types': n_types, 'horizon': T})
    scheme = getattr(transfers, 'scheme', 'envelope')
    perturbation = getattr(transfers, 'perturbation', None)
    rule = DiscreteTypeRule.uniform_cells(ctx.lo, ctx.hi, n_types)
    tolerance = 2.0 * rule.spacing if tolerance is None else tolerance
    x = rule.types
    n = x.size
    kernel = ctx.kernel

    # forward pass: mechanism state for every report history
    levels = []
    prev_report = np.array([np.nan])
    prev_dist = np.array([np.nan])
    sold = np.array([False])
    for t in range(1, T + 1):
        H = prev_report.size
        reports = np.broadcast_to(x, (H, n))
        if t == 1:
            dists = np.asarray(initial_distortion(kernel, reports), dtype=float)
        else:
            dists = distortion_update(prev_dist[:, None], reports, prev_report[:, None], kernel, t,
                                      strict=False)
        q = ctx.allocation(t, reports, dists)
        if ctx.one_object:
            q = q * (~sold)[:, None]
        levels.append({'reports': reports, 'dists': np.asarray(dists), 'q': q, 'sold': sold})
        prev_report = reports.ravel().copy()
        prev_dist = np.asarray(dists).ravel()
        sold = (sold[:, None] | (q > 0)).ravel() if ctx.one_object else np.zeros(H * n, dtype=bool)

    probs = {t: rule.nodes(kernel, x, t)[1] for t in range(2, T + 1)}

    # envelope rents U_t(x_k; history) at the grid points
    rents = {}
    if scheme == 'envelope':
        for t in range(1, T + 1):
            level = levels[t - 1]
            H = level['reports'].shape[0]
            rent = np.zeros((H, n))
            live = np.nonzero(~level['sold'])[0]
            if live.size:
                if t == 1:
                    hist = [None]
                else:
                    parent = levels[t - 2]
                    pr = parent['reports'].ravel()
                    pd = parent['dists'].ravel()
                    hist = [(float(pr[h]), float(pd[h])) for h in live]
                rent[live] = cumulative_truthful_d(ctx, t, hist, x)
            rents[t] = rent

    worst, witness = 0.0, None
    best_next = truth_next = None
    for t in range(T, 0, -1):
        level = levels[t - 1]
        q, reports, dists = level['q'], level['reports'], level['dists']
        H = q.shape[0]
        rent_next = rents[t + 1].reshape(H, n, n) if scheme == 'envelope' and t < T else None
        pay = _payments(ctx, t, scheme, perturbation, reports, dists, q,
                        rents.get(t), rent_next, probs.get(t + 1))
        # value[h, report, true type]
        value = q[:, :, None] * x[None, None, :] - pay[:, :, None]
        truth_value = value.copy()
        if t < T:
            P = probs[t + 1]
            value = value + ctx.discount * np.einsum('hxj,kj->hxk', best_next.reshape(H, n, n), P)
            truth_value = truth_value + ctx.discount * np.einsum('hxj,kj->hxk',
                                                                 truth_next.reshape(H, n, n), P)
        best = value.max(axis=1)
        truthful = truth_value[:, np.arange(n), np.arange(n)]
        gain = best - truthful
        h, k = np.unravel_index(np.argmax(gain), gain.shape)
        if gain[h, k] > worst:
            worst = float(gain[h, k])
            witness = {'t': t, 'history': int(h), 'theta': float(x[k]),
                       'best_report': float(x[int(np.argmax(value[h, :, k]))])}
        best_next, truth_next = best, truthful

    status = 'pass' if worst <= tolerance else 'fail'
    if status == 'fail':
        logger.info("Best-response oracle found a profitable misreport: gain %.4g", worst)
    return CheckResult('best_response', status, worst,
                       witness, tolerance,
                       {'types': n, 'scheme': scheme, 'states': size})


# ----------------------------------------------------------------------
# Participation and envelope consistency
# ----------------------------------------------------------------------

def expost_ir_check(ctx: ICContext, paths: int = 10_000, seed: int = 0,
                    tolerance: float = 1e-12) -> CheckResult:
    """Buyer payoff theta_t - psi_t = L_t at every sale along simulated truthful paths."""
    fosd = fosd_check(ctx.kernel, periods=tuple(range(2, max(3, ctx.horizon + 1))))
    if not fosd.passed:
        return CheckResult('expost_ir', 'inconclusive', tolerance=tolerance,
                           details={'reason': 'kernel violates FOSD', 'fosd': fosd.to_dict()})
    types = ctx.kernel.sample_paths(ctx.horizon, paths, np.random.default_rng(seed))
    outcome = run_policy(ctx.policy, types)
    payoff = np.where(outcome.decisions, outcome.types - outcome.virtual_values, 0.0)
    sales = int(outcome.decisions.sum())
    if sales == 0:
        return CheckResult('expost_ir', 'pass', 0.0, tolerance=tolerance,
                           details={'paths': paths, 'sales': 0})
    masked = np.where(outcome.decisions, payoff, np.inf)
    n, t = np.unravel_index(np.argmin(masked), masked.shape)
    worst = float(masked[n, t])
    status = 'pass' if worst >= -tolerance else 'fail'
    witness = {'path': int(n), 't': int(t) + 1, 'types': outcome.types[n].tolist()}
    return CheckResult('expost_ir', status, worst, witness, tolerance,
                       {'paths': paths, 'sales': sales})


def envelope_check(ctx: ICContext, n_states: int = 100, seed: int = 0,
                   tolerance: float = 1e-3) -> CheckResult:
    """
    Compare the buyer's expected information rent under sale-price transfers
    (direct truthful recursion) with L_t * D_t(theta, theta) at random on-path
    states, and the ex-ante rent with the envelope integral of D_1 against 1 - F1.
    """
    rng = np.random.default_rng(seed)
    types = ctx.kernel.sample_paths(ctx.horizon, n_states, rng)
    periods = rng.integers(1, ctx.horizon + 1, n_states)
    outcome = run_policy(ctx.policy, types)
    theta = types[np.arange(n_states), periods - 1]
    dist = outcome.distortion[np.arange(n_states), periods - 1]

    worst, witness = 0.0, None
    for t in range(1, ctx.horizon + 1):
        rows = periods == t
        if not np.any(rows):
            continue
        direct = ctx._rent(t, theta[rows], dist[rows]) if t < ctx.horizon else \
            ctx.allocation(t, theta[rows], dist[rows]) * dist[rows]
        reconstructed = dist[rows] * d_values(ctx, t, theta[rows], theta[rows], dist[rows])
        gap = np.abs(direct - reconstructed)
        k = int(np.argmax(gap))
        if gap[k] > worst:
            worst = float(gap[k])
            witness = {'t': t, 'theta': float(theta[rows][k]), 'distortion': float(dist[rows][k]),
                       'direct': float(direct[k]), 'reconstructed': float(reconstructed[k])}

    # ex ante: E[B_1] against the integral of D_1 (1 - F1)
    u, w = quantile_nodes_initial(ctx, 8)
    l1 = np.asarray(initial_distortion(ctx.kernel, u), dtype=float)
    rent = float(np.dot(w, ctx._rent(1, u, l1) if ctx.horizon > 1 else ctx.allocation(1, u, l1) * l1))
    grid = np.union1d(np.linspace(ctx.lo, ctx.hi, 257), first_period_switches(ctx))
    x, wx = panel_rule(grid[None, :], 8)
    x, wx = x[0], wx[0]
    d1 = d_values(ctx, 1, x, x, initial_distortion(ctx.kernel, x))
    envelope = float(np.sum(wx * d1 * (1.0 - np.asarray(ctx.kernel.initial_cdf(x)))))
    ex_ante_gap = abs(rent - envelope)

    status = 'pass' if worst <= tolerance and ex_ante_gap <= tolerance else 'fail'
    if status == 'fail' and witness is None:
        witness = {'ex_ante_rent': rent, 'envelope_integral': envelope}
    return CheckResult('envelope', status, max(worst, ex_ante_gap), witness, tolerance,
                       {'states': n_states, 'ex_ante_rent': rent, 'envelope_integral': envelope})


def first_period_switches(ctx: ICContext) -> np.ndarray:
    """Types where the truthful first-period decision switches."""
    roots = sign_change_roots(
        lambda rows, x: np.asarray(ctx.policy.margin(1, x, ctx.report_distortion(1, x, None))) - ctx.tie,
        np.array([ctx.lo]), np.array([ctx.hi]), scan=ctx.outer_scan)
    return roots[~np.isnan(roots)]


def quantile_nodes_initial(ctx: ICContext, n: int, panels: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """Quantile-space nodes of F1, with panels split where the first-period decision switches."""
    switches = np.asarray(ctx.kernel.initial_cdf(first_period_switches(ctx)), dtype=float)
    edges = np.union1d(np.linspace(0.0, 1.0, panels + 1), switches)
    u, w = panel_rule(edges[None, :], n)
    return np.asarray(ctx.kernel.initial_ppf(u[0]), dtype=float), w[0]


def assumption1_check() -> CheckResult:
    """Single crossing holds identically for the buyer utility v(theta, q) = theta * q."""
    return CheckResult('assumption1', 'pass',
                       details={'note': 'v(theta, q) = theta q has increasing differences'})


def run_checks(policy: Policy, transfers: Any = None, toggles: Optional[Dict[str, bool]] = None,
               samples: int = 200, oracle_types: int = 40, tolerance: float = 1e-6,
               seed: int = 0, context: Optional[ICContext] = None) -> ICReport:
    """Run the enabled checks (all by default) and collect them in an ICReport."""
    toggles = dict({name: True for name in CHECKS}, **(toggles or {}))
    unknown = sorted(set(toggles) - set(CHECKS))
    if unknown:
        raise ICCheckError(f"Unknown check(s): {', '.join(unknown)}\nAvailable: {', '.join(CHECKS)}")
    ctx = context or ICContext(policy, seed=seed)
    report = ICReport()
    if toggles['integral_monotonicity']:
        report.add(integral_monotonicity_check(ctx, samples=samples, tolerance=tolerance))
    if toggles['corollary2']:
        report.add(corollary2_check(ctx))
    if toggles['two_period'] and ctx.horizon == 2:
        report.add(two_period_ic_check(ctx, samples=samples, tolerance=tolerance))
    if toggles['best_response']:
        report.add(best_response_oracle(ctx, transfers, n_types=oracle_types))
    if toggles['expost_ir']:
        report.add(expost_ir_check(ctx, seed=seed))
    if toggles['envelope']:
        report.add(envelope_check(ctx, seed=seed))
    if toggles['assumption1']:
        report.add(assumption1_check())
    logger.info("IC checks: %s", ', '.join(f"{k}={v.status}" for k, v in sorted(report.checks.items())))
    return report
