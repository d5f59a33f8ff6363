#!/usr/bin/env python3
"""
Revenue, Transfers and Simulation

Prices the solved mechanism and evaluates it:

- TransferRule: the buyer pays psi_t at the sale period ('virtual' scheme) or
  the envelope payments of the discrete oracle ('envelope' scheme)
- expected_revenue / outcome_distribution: nested quadrature over the
  type-path tree with panels split where the policy switches
- simulate: seeded Monte Carlo transcripts with a deterministic reduction
- myopic_check: the one-step-lookahead optimality condition
- sweep: re-solve along a parameter axis and check the comparative statics

Usage:
    from revenue import expected_revenue, simulate, transfers_from_policy

    policy = result.policy()
    revenue = expected_revenue(policy)
    transcripts, summary = simulate(policy, transfers_from_policy(policy), paths=100_000, seed=7)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from kernels import Kernel, build_kernel
from quadrature import panel_rule, quantile_nodes, sign_change_roots, split_edges
from solver import (GridPolicy, Policy, SolveConfig, SolveResult, map_chunks, myopic_policy,
                    run_policy, solve, worker_count)
from virtual import StateGrid, distortion_update, initial_distortion

logger = logging.getLogger(__name__)

SCHEMES = ['virtual', 'envelope']
SWEEP_AXES = ['delta', 'gamma', 'hazard_scale', 'strength', 'upper']
TREE_HORIZON = 4
BIT_GENERATORS = {'pcg64': np.random.PCG64, 'philox': np.random.Philox, 'sfc64': np.random.SFC64}


class RevenueError(Exception):
    """Exception raised for invalid revenue or simulation requests."""
    pass


def _as_policy(policy) -> Policy:
    if isinstance(policy, SolveResult):
        return policy.policy()
    if not isinstance(policy, Policy):
        raise RevenueError(f"Expected a Policy or SolveResult, got {type(policy).__name__}")
    return policy


# ----------------------------------------------------------------------
# Transfers
# ----------------------------------------------------------------------

def threshold_surcharge(amount: float = 0.2, above: float = 0.75) -> Callable:
    """Perturbation adding `amount` to the price of every sale reported above `above`."""
    def perturbation(t, reports, distortion):
        return np.where(np.asarray(reports) > above, amount, 0.0)
    perturbation.description = f"+{amount} when report > {above}"
    return perturbation


@dataclass
class TransferRule:
    """
    Payment rule paired with a policy.

    The virtual scheme charges psi_t (plus any perturbation) at the sale
    state and nothing otherwise.
    """
    policy: Policy
    scheme: str = 'virtual'
    perturbation: Optional[Callable] = None
    verification: Any = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise RevenueError(
                f"Unknown transfer scheme: '{self.scheme}'\n"
                f"Supported schemes: {', '.join(SCHEMES)}"
            )

    def price(self, t: int, reports, distortion) -> np.ndarray:
        price = np.asarray(reports, dtype=float) - np.asarray(distortion, dtype=float)
        if self.perturbation is not None:
            price = price + np.asarray(self.perturbation(t, reports, distortion), dtype=float)
        return price

    def payments(self, outcome) -> np.ndarray:
        """(n, T) payments along simulated report paths."""
        if self.scheme != 'virtual':
            raise RevenueError(
                "Path payments are available for the 'virtual' scheme only; "
                "envelope payments are evaluated on the discrete oracle grid"
            )
        pay = np.zeros(outcome.decisions.shape)
        for t in range(1, pay.shape[1] + 1):
            sold = outcome.decisions[:, t - 1]
            if np.any(sold):
                pay[sold, t - 1] = self.price(t, outcome.reports[sold, t - 1],
                                              outcome.distortion[sold, t - 1])
        return pay

    def describe(self) -> Dict[str, Any]:
        data = {'scheme': self.scheme,
                'perturbation': getattr(self.perturbation, 'description', None)
                if self.perturbation is not None else None}
        if self.verification is not None:
            data['verification'] = self.verification.to_dict()
        return data


def transfers_from_policy(policy, scheme: str = 'virtual', perturbation: Optional[Callable] = None,
                          verify: bool = True, n_states: int = 100, seed: int = 0) -> TransferRule:
    """
    Transfer rule for a solved policy.

    With verify=True the buyer's information rent under sale-price transfers
    is compared with the envelope reconstruction L_t * D_t at random on-path
    states; the CheckResult is kept on rule.verification.
    """
    policy = _as_policy(policy)
    rule = TransferRule(policy, scheme, perturbation)
    if verify:
        from ic import ICContext, envelope_check
        rule.verification = envelope_check(ICContext(policy, seed=seed), n_states=n_states, seed=seed)
        if not rule.verification.passed:
            logger.warning("Envelope reconstruction differs from sale-price rents by %.3g",
                           rule.verification.worst)
    return rule


# ----------------------------------------------------------------------
# Quadrature over the type-path tree
# ----------------------------------------------------------------------

@dataclass
class OutcomeDistribution:
    """Sale-period law and expected revenue of a policy."""
    horizon: int
    sale_probability: Dict[int, float]
    expected_revenue: float
    discounted_by_period: Dict[int, float]
    method: str
    points: int = 0

    @property
    def no_sale_probability(self) -> float:
        return max(0.0, 1.0 - sum(self.sale_probability.values()))

    def sold_by(self, t: int) -> float:
        return sum(p for s, p in self.sale_probability.items() if s <= t)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'horizon': self.horizon,
            'expected_revenue': self.expected_revenue,
            'sale_probability': {str(t): p for t, p in sorted(self.sale_probability.items())},
            'sold_by': {str(t): self.sold_by(t) for t in range(1, self.horizon + 1)},
            'no_sale_probability': self.no_sale_probability,
            'revenue_by_period': {str(t): v for t, v in sorted(self.discounted_by_period.items())},
            'method': self.method,
            'points': self.points,
        }


def _first_level(policy: Policy, nodes: int, scan: int) -> Tuple[np.ndarray, np.ndarray]:
    """F1 quantile nodes with panels split at first-period switches."""
    kernel = policy.kernel

    def switch(rows, x):
        return np.asarray(policy.margin(1, x, initial_distortion(kernel, x))) - policy.tie_tolerance

    lo = np.array([kernel.support_lo])
    hi = np.array([kernel.support_hi])
    roots = sign_change_roots(switch, lo, hi, scan=scan)
    u_roots = np.asarray(kernel.initial_cdf(np.nan_to_num(roots, nan=kernel.support_hi)), dtype=float)
    u_roots = np.where(np.isnan(roots), np.nan, u_roots)
    u, w = panel_rule(split_edges(np.zeros(1), np.ones(1), u_roots), nodes)
    return np.asarray(kernel.initial_ppf(u[0]), dtype=float), w[0]


def _next_level(policy: Policy, t: int, theta: np.ndarray, dist: np.ndarray,
                nodes: int, scan: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Period-t children of each state, split where the period-t decision switches."""
    kernel = policy.kernel
    lo, hi = (np.broadcast_to(a, theta.shape).astype(float) for a in kernel.conditional_support(theta, t))

    def switch(rows, x):
        moved = distortion_update(dist[rows], x, theta[rows], kernel, t, strict=False)
        return np.asarray(policy.margin(t, x, moved)) - policy.tie_tolerance

    roots = sign_change_roots(switch, lo, hi, scan=scan)
    if roots.size:
        u_roots = np.asarray(kernel.transition_cdf(np.nan_to_num(roots, nan=0.0), theta[:, None], t),
                             dtype=float)
        u_roots = np.where(np.isnan(roots), np.nan, u_roots)
    else:
        u_roots = roots
    zeros = np.zeros(theta.size)
    x, w = quantile_nodes(kernel, theta, t, nodes, split_edges(zeros, zeros + 1.0, u_roots))
    moved = distortion_update(dist[:, None], x, theta[:, None], kernel, t, strict=False)
    return x, np.asarray(moved, dtype=float), w


def _tree_distribution(policy: Policy, nodes: int, scan: int, max_points: int) -> OutcomeDistribution:
    T = policy.horizon
    per_level = max(4, min(nodes, int(max_points ** (1.0 / T))))
    theta, weight = _first_level(policy, per_level, scan)
    dist = np.asarray(initial_distortion(policy.kernel, theta), dtype=float)
    probability, revenue = {}, {}
    points = theta.size
    for t in range(1, T + 1):
        sell = np.asarray(policy.decide(t, theta, dist))
        price = theta - dist
        probability[t] = float(np.sum(weight[sell]))
        revenue[t] = policy.discount ** (t - 1) * math.fsum(weight[sell] * price[sell])
        if t == T:
            break
        keep = ~sell if policy.mode == 'one_object' else np.ones(theta.size, dtype=bool)
        if not np.any(keep):
            for s in range(t + 1, T + 1):
                probability[s], revenue[s] = 0.0, 0.0
            break
        x, moved, w = _next_level(policy, t + 1, theta[keep], dist[keep], per_level, scan)
        theta = x.ravel()
        dist = moved.ravel()
        weight = (weight[keep][:, None] * w).ravel()
        points += theta.size
    return OutcomeDistribution(T, probability, math.fsum(revenue.values()), revenue, 'tree', points)


def value_revenue(result: SolveResult, panels: int = 64, nodes: int = 8) -> float:
    """E[V_1(theta, L1(theta))] under F1, from the solved first-period table."""
    u, w = panel_rule(np.linspace(0.0, 1.0, panels + 1), nodes)
    theta = np.asarray(result.kernel.initial_ppf(u), dtype=float)
    return float(np.dot(w, np.interp(theta, result.first.theta, result.first.value)))


def outcome_distribution(policy, nodes: int = 24, scan: int = 33, max_points: int = 2_000_000,
                         probe_paths: int = 200_000, seed: int = 0) -> OutcomeDistribution:
    """
    Sale-period probabilities and expected discounted revenue.

    Horizons up to 4 use tree quadrature; longer horizons use the first-period
    value table for revenue and seeded paths for the sale-period law.
    """
    policy = _as_policy(policy)
    if policy.horizon <= TREE_HORIZON:
        return _tree_distribution(policy, nodes, scan, max_points)
    if not isinstance(policy, GridPolicy):
        raise RevenueError(
            f"Horizon {policy.horizon} exceeds the tree limit of {TREE_HORIZON}; "
            "grid evaluation needs a solved GridPolicy"
        )
    types = policy.kernel.sample_paths(policy.horizon, probe_paths, np.random.default_rng(seed))
    periods = run_policy(policy, types).sale_period
    probability = {t: float(np.mean(periods == t)) for t in range(1, policy.horizon + 1)}
    return OutcomeDistribution(policy.horizon, probability, value_revenue(policy.result), {},
                               'grid', probe_paths)


def expected_revenue(policy, nodes: int = 24, scan: int = 33) -> float:
    """Expected discounted revenue with price psi_t at the sale period."""
    return outcome_distribution(policy, nodes=nodes, scan=scan).expected_revenue


# ----------------------------------------------------------------------
# Simulation
# ----------------------------------------------------------------------

TRANSCRIPT_FIELDS = ['path', 'sale_period', 'price', 'buyer_payoff', 'seller_revenue']


@dataclass
class Transcript:
    """One simulated path."""
    types: List[float]
    reports: List[float]
    sale_period: Optional[int]
    price: float
    buyer_payoff: float
    seller_revenue: float


@dataclass
class TranscriptSet:
    """Columnar transcripts; sale_period is 0 when nothing was sold."""
    types: np.ndarray
    reports: np.ndarray
    sale_period: np.ndarray
    price: np.ndarray
    buyer_payoff: np.ndarray
    seller_revenue: np.ndarray

    @classmethod
    def empty(cls, horizon: int) -> 'TranscriptSet':
        return cls(np.empty((0, horizon)), np.empty((0, horizon)), np.empty(0, dtype=int),
                   np.empty(0), np.empty(0), np.empty(0))

    def __len__(self) -> int:
        return int(self.sale_period.size)

    def __getitem__(self, i: int) -> Transcript:
        period = int(self.sale_period[i])
        return Transcript(self.types[i].tolist(), self.reports[i].tolist(), period or None,
                          float(self.price[i]), float(self.buyer_payoff[i]),
                          float(self.seller_revenue[i]))

    def header(self) -> List[str]:
        T = self.types.shape[1]
        return (['path'] + [f'theta_{t}' for t in range(1, T + 1)] +
                [f'report_{t}' for t in range(1, T + 1)] + TRANSCRIPT_FIELDS[1:])

    def rows(self):
        for i in range(len(self)):
            yield ([i] + self.types[i].tolist() + self.reports[i].tolist() +
                   [int(self.sale_period[i]), float(self.price[i]), float(self.buyer_payoff[i]),
                    float(self.seller_revenue[i])])


@dataclass
class SimulationSummary:
    paths: int
    seed: int
    mean_revenue: Optional[float] = None
    revenue_se: Optional[float] = None
    mean_buyer_payoff: Optional[float] = None
    buyer_payoff_se: Optional[float] = None
    min_buyer_payoff: Optional[float] = None
    sale_probability: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'paths': self.paths, 'seed': self.seed, 'mean_revenue': self.mean_revenue,
                'revenue_se': self.revenue_se, 'mean_buyer_payoff': self.mean_buyer_payoff,
                'buyer_payoff_se': self.buyer_payoff_se, 'min_buyer_payoff': self.min_buyer_payoff,
                'sale_probability': {str(t): p for t, p in sorted(self.sale_probability.items())}}


def _mean_and_se(sums: List[float], squares: List[float], n: int) -> Tuple[float, float]:
    mean = math.fsum(sums) / n
    if n < 2:
        return mean, 0.0
    variance = max(0.0, (math.fsum(squares) - n * mean * mean) / (n - 1))
    return mean, math.sqrt(variance / n)


def simulate(policy, transfers: Optional[TransferRule] = None, paths: int = 10_000, seed: int = 0,
             chunk_size: int = 100_000, workers: Optional[int] = None, rng: str = 'pcg64',
             reports: Optional[Callable[[np.ndarray], np.ndarray]] = None
             ) -> Tuple[TranscriptSet, SimulationSummary]:
    """
    Simulate the mechanism on independent type paths.

    Chunk k draws from SeedSequence(seed).spawn(...)[k], so results do not
    depend on the number of worker threads.

    Args:
        reports: Optional map from type paths to report paths (truthful when omitted)
    """
    policy = _as_policy(policy)
    transfers = transfers or TransferRule(policy)
    T = policy.horizon
    if paths < 0:
        raise RevenueError(f"Number of paths must be >= 0, got {paths}")
    if paths == 0:
        return TranscriptSet.empty(T), SimulationSummary(0, seed)
    if chunk_size < 1:
        raise RevenueError(f"chunk_size must be >= 1, got {chunk_size}")
    if rng not in BIT_GENERATORS:
        raise RevenueError(f"Unknown bit generator: '{rng}'\nSupported: {', '.join(BIT_GENERATORS)}")

    sizes = [min(chunk_size, paths - start) for start in range(0, paths, chunk_size)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    discount = policy.discount ** np.arange(T)

    def run(job):
        size, child = job
        types = policy.kernel.sample_paths(T, size, np.random.Generator(BIT_GENERATORS[rng](child)))
        said = types if reports is None else np.asarray(reports(types), dtype=float)
        outcome = run_policy(policy, types, said)
        pay = transfers.payments(outcome)
        buyer = (outcome.decisions * types - pay) @ discount
        seller = pay @ discount
        return types, said, outcome.sale_period, pay.sum(axis=1), buyer, seller

    chunks = map_chunks(run, list(zip(sizes, seeds)), worker_count(workers))
    transcripts = TranscriptSet(*(np.concatenate([c[k] for c in chunks]) for k in range(6)))
    revenue, revenue_se = _mean_and_se([float(np.sum(c[5])) for c in chunks],
                                       [float(np.sum(c[5] ** 2)) for c in chunks], paths)
    buyer, buyer_se = _mean_and_se([float(np.sum(c[4])) for c in chunks],
                                   [float(np.sum(c[4] ** 2)) for c in chunks], paths)
    periods = transcripts.sale_period
    summary = SimulationSummary(
        paths, seed, revenue, revenue_se, buyer, buyer_se, float(np.min(transcripts.buyer_payoff)),
        {t: float(np.count_nonzero(periods == t)) / paths for t in range(1, T + 1)},
    )
    logger.info("Simulated %d paths: revenue %.6f (SE %.2g)", paths, revenue, revenue_se)
    return transcripts, summary


# ----------------------------------------------------------------------
# Myopic stopping rule
# ----------------------------------------------------------------------

def myopic_threshold_ar1(gamma: float, delta: float, mu_eps: float) -> float:
    """
    psi level above which the myopic rule is optimal for the AR(1) process.

    Raises:
        RevenueError: If gamma is outside (0, 1) or delta * gamma == 1
    """
    if not 0 < gamma < 1:
        raise RevenueError(f"AR(1) myopic threshold needs 0 < gamma < 1, got {gamma}")
    if delta * gamma == 1:
        raise RevenueError("AR(1) myopic threshold is undefined when delta * gamma = 1")
    return (delta * (1 - gamma ** 2) - (1 - gamma)) * mu_eps / (gamma * (1 - delta * gamma))


@dataclass
class MyopicReport:
    passed: bool
    applicable: int
    checked: int
    premise_failures: int
    violations: List[Dict[str, Any]] = field(default_factory=list)
    policy_agreement: Optional[float] = None

    @property
    def status(self) -> str:
        if self.violations:
            return 'fail'
        return 'pass' if self.applicable else 'inconclusive'

    def to_dict(self) -> Dict[str, Any]:
        return {'status': self.status, 'applicable': self.applicable, 'checked': self.checked,
                'premise_failures': self.premise_failures, 'violations': self.violations[:20],
                'policy_agreement': self.policy_agreement}


def _one_step(kernel: Kernel, t: int, theta: np.ndarray, dist: np.ndarray, nodes: int):
    x, w = quantile_nodes(kernel, theta, t, nodes)
    moved = distortion_update(dist[:, None], x, theta[:, None], kernel, t, strict=False)
    return x, np.asarray(moved, dtype=float), w


def _grid_states(kernel: Kernel, grid: StateGrid, t: int) -> Tuple[np.ndarray, np.ndarray]:
    """Interior theta nodes with L1(theta) at t = 1, the full (theta, L) tensor later."""
    theta = grid.theta_nodes[1:-1]
    if t == 1:
        return theta, np.asarray(initial_distortion(kernel, theta), dtype=float)
    return (np.repeat(theta, grid.distortion_nodes.size),
            np.tile(grid.distortion_nodes, theta.size))


def myopic_check(kernel: Kernel, config: SolveConfig, n_theta: int = 101, n_distortion: int = 41,
                 nodes: int = 16, policy: Optional[Policy] = None) -> MyopicReport:
    """
    Check E[psi_{s+1} | state] > delta * E[psi_{s+2} | state] at every grid
    state of every period s < T (the right side is 0 when s + 1 = T).

    States where some downstream psi is non-positive fall outside the premise
    and are counted but not judged. When a policy is given, its decisions are
    compared with the myopic rule at the grid states of every period.
    """
    T, delta = config.horizon, config.discount
    grid = StateGrid.build(kernel, T, n_theta, n_distortion, config.l_min, config.l_max)
    applicable = checked = premise_failures = 0
    violations = []
    for s in range(1, T):
        theta, dist = _grid_states(kernel, grid, s)
        size = theta.size
        x1, l1, w1 = _one_step(kernel, s + 1, theta, dist, nodes)
        psi1 = x1 - l1 - config.cost(s + 1)
        lhs = np.sum(w1 * psi1, axis=1)
        premise = np.all(psi1 > 0, axis=1)
        rhs = np.zeros(size)
        if s + 2 <= T:
            x2, l2, w2 = _one_step(kernel, s + 2, x1.ravel(), l1.ravel(), nodes)
            psi2 = (x2 - l2 - config.cost(s + 2)).reshape(size, -1)
            w12 = (w1[:, :, None] * w2.reshape(size, x1.shape[1], -1)).reshape(size, -1)
            rhs = delta * np.sum(w12 * psi2, axis=1)
            premise &= np.all(psi2 > 0, axis=1)
        checked += size
        premise_failures += int(np.count_nonzero(~premise))
        applicable += int(np.count_nonzero(premise))
        for i in np.nonzero(premise & ~(lhs > rhs))[0]:
            violations.append({'t': s, 'theta': float(theta[i]), 'distortion': float(dist[i]),
                               'expected_next': float(lhs[i]), 'discounted_after': float(rhs[i])})

    agreement = None
    if policy is not None:
        rule = myopic_policy(kernel, config)
        same = total = 0
        for t in range(1, T + 1):
            theta, dist = _grid_states(kernel, grid, t)
            same += int(np.count_nonzero(np.asarray(rule.decide(t, theta, dist)) ==
                                         np.asarray(policy.decide(t, theta, dist))))
            total += theta.size
        agreement = same / total
    report = MyopicReport(not violations and applicable > 0, applicable, checked, premise_failures,
                          violations, agreement)
    logger.info("Myopic check: %s (%d applicable states, %d violations)",
                report.status, applicable, len(violations))
    return report


# ----------------------------------------------------------------------
# Comparative statics
# ----------------------------------------------------------------------

def revenue_integrals(kernel: Kernel, horizon: int, nodes: int = 24,
                      max_points: int = 2_000_000) -> Dict[str, Any]:
    """
    Revenue functionals that ignore the allocation: the integral of
    theta f1 - (1 - F1) over the support, and the unconditional expected
    virtual value E[psi_t] of every later period.
    """
    u, w = panel_rule(np.linspace(0.0, 1.0, 33), 8)
    theta = np.asarray(kernel.initial_ppf(u), dtype=float)
    dist = np.asarray(initial_distortion(kernel, theta), dtype=float)
    first = float(np.dot(w, theta - dist))
    later = {}
    per_level = max(4, min(nodes, int(max_points ** (1.0 / max(1, horizon)))))
    for t in range(2, horizon + 1):
        x, moved, wt = _one_step(kernel, t, theta, dist, per_level)
        w = (w[:, None] * wt).ravel()
        theta, dist = x.ravel(), moved.ravel()
        later[str(t)] = float(np.dot(w, theta - dist))
    return {'first_period': first, 'expected_virtual_value': later}


@dataclass
class SweepResult:
    axis: str
    values: List[float]
    revenue: List[float]
    k1: List[Optional[float]]
    sale_probability: List[Dict[int, float]]
    integrals: List[Dict[str, Any]]
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def sold_by(self, t: int) -> List[float]:
        return [sum(p for s, p in probs.items() if s <= t) for probs in self.sale_probability]

    def plot_data(self, column: str = 'revenue') -> List[Tuple[float, float]]:
        series = {'revenue': self.revenue, 'k1': self.k1, 'early_sale': self.sold_by(1)}
        if column not in series:
            raise RevenueError(f"Unknown sweep column: '{column}'\nAvailable: {', '.join(series)}")
        return [(v, y) for v, y in zip(self.values, series[column]) if y is not None]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'axis': self.axis,
            'points': [
                {'value': v, 'revenue': r, 'k1': k,
                 'sale_probability': {str(t): p for t, p in sorted(probs.items())},
                 'integrals': integ}
                for v, r, k, probs, integ in zip(self.values, self.revenue, self.k1,
                                                 self.sale_probability, self.integrals)
            ],
            'checks': self.checks,
            'passed': self.passed,
        }


def sweep(kernel_name: str, axis: str, values: List[float], config: SolveConfig,
          params: Optional[Dict[str, Any]] = None, tolerance: float = 1e-6) -> SweepResult:
    """
    Re-solve along one axis and record revenue, k1 and the sale-period law.

    The delta axis also checks that revenue is nondecreasing and that the
    probability of a first-period sale is nonincreasing in delta.
    """
    from thresholds import extract_thresholds

    if axis not in SWEEP_AXES:
        raise RevenueError(f"Unknown sweep axis: '{axis}'\nSupported axes: {', '.join(SWEEP_AXES)}")
    if not values:
        raise RevenueError("Sweep needs at least one value")
    values = [float(v) for v in values]
    out = SweepResult(axis, values, [], [], [], [])
    for value in values:
        kernel_params = dict(params or {})
        cfg = config
        if axis == 'delta':
            cfg = config.replace(discount=value)
        else:
            kernel_params[axis] = value
        kernel = build_kernel(kernel_name, kernel_params)
        result = solve(kernel, cfg)
        k1 = extract_thresholds(result, probe_paths=0).k1
        dist = outcome_distribution(result)
        out.revenue.append(dist.expected_revenue)
        out.k1.append(None if k1 is None or not np.isfinite(k1) else float(k1))
        out.sale_probability.append(dist.sale_probability)
        out.integrals.append(revenue_integrals(kernel, cfg.horizon))
        logger.info("Sweep %s=%g: revenue %.6f, k1 %s", axis, value, dist.expected_revenue, k1)

    if axis == 'delta' and len(values) > 1:
        order = np.argsort(values)
        revenue = np.asarray(out.revenue)[order]
        early = np.asarray(out.sold_by(1))[order]
        out.checks['revenue_nondecreasing_in_delta'] = bool(np.all(np.diff(revenue) >= -tolerance))
        out.checks['early_sale_nonincreasing_in_delta'] = bool(np.all(np.diff(early) <= tolerance))
        for name, ok in out.checks.items():
            if not ok:
                logger.warning("Sweep direction check failed: %s", name)
    return out
