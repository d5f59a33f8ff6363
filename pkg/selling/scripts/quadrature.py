#!/usr/bin/env python3
"""
Quadrature Helpers

Gauss-Legendre rules mapped onto conditional supports, piecewise rules split
at breakpoints, and a vectorised sign-change locator used to find where a
selling margin crosses zero.

Two transition rules produce (nodes, probability weights) per conditioning
value:
- GaussLegendreRule: continuous kernels, in support or quantile space
- DiscreteTypeRule: a finite type set with cell probabilities
"""

import logging
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

SPACES = ['support', 'quantile']


class QuadratureError(Exception):
    """Exception raised for invalid quadrature requests."""
    pass


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]; cached and read-only."""
    if n < 1:
        raise QuadratureError(f"Gauss-Legendre rule needs at least one node, got {n}")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def map_nodes(lo, hi, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Map an n-point rule onto [lo, hi] (broadcast); returns arrays of shape (..., n)."""
    x, w = gauss_legendre(n)
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def panel_rule(edges: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Piecewise rule on the panels between consecutive sorted edges.

    Args:
        edges: Array of shape (..., K + 1), sorted along the last axis
        n: Nodes per panel

    Returns:
        (nodes, weights), each of shape (..., K * n)
    """
    edges = np.asarray(edges, dtype=float)
    if edges.shape[-1] < 2:
        raise QuadratureError("panel_rule needs at least two edges")
    nodes, weights = map_nodes(edges[..., :-1], edges[..., 1:], n)
    shape = edges.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def sign_change_roots(func: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      lo: np.ndarray, hi: np.ndarray, scan: int = 33,
                      iterations: int = 60) -> np.ndarray:
    """
    Locate sign changes of func on per-row intervals.

    func(rows, x) evaluates the function of row rows[...] at points x (same
    shape). Each interval is scanned at `scan` evenly spaced points and every
    bracketed change is refined by bisection.

    Returns:
        Array (P, K) of roots sorted per row, NaN-padded; K is the largest
        number of roots found in any row (0 if none).
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    rows = lo.shape[0]
    grid = lo[:, None] + np.linspace(0.0, 1.0, scan)[None, :] * (hi - lo)[:, None]
    index = np.broadcast_to(np.arange(rows)[:, None], grid.shape)
    positive = np.asarray(func(index, grid)) > 0
    change = positive[:, :-1] != positive[:, 1:]
    if not np.any(change):
        return np.empty((rows, 0))

    row_of, col_of = np.nonzero(change)
    a = grid[row_of, col_of]
    b = grid[row_of, col_of + 1]
    a_positive = positive[row_of, col_of]
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        mid_positive = np.asarray(func(row_of, mid)) > 0
        same = mid_positive == a_positive
        a = np.where(same, mid, a)
        b = np.where(same, b, mid)
    found = 0.5 * (a + b)

    counts = np.bincount(row_of, minlength=rows)
    width = int(counts.max())
    roots = np.full((rows, width), np.nan)
    # nonzero() walks rows in order, so positions within a row are sequential
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    position = np.arange(row_of.size) - starts[row_of]
    roots[row_of, position] = found
    return roots


def split_edges(lo: np.ndarray, hi: np.ndarray, breakpoints: Optional[np.ndarray]) -> np.ndarray:
    """Sorted edges [lo, breakpoints..., hi] per row; NaN breakpoints collapse onto hi."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if breakpoints is None or breakpoints.shape[-1] == 0:
        return np.stack([lo, hi], axis=-1)
    inner = np.where(np.isnan(breakpoints), hi[..., None], breakpoints)
    inner = np.clip(inner, lo[..., None], hi[..., None])
    return np.sort(np.concatenate([lo[..., None], inner, hi[..., None]], axis=-1), axis=-1)


def quantile_nodes(kernel, theta_prev: np.ndarray, t: int, n: int,
                   u_edges: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Probability nodes of the period-t transition from each theta_prev in
    quantile space u = F(theta | theta_prev).

    Args:
        u_edges: Optional sorted panel edges in [0, 1], shape (P, K + 1)

    Returns:
        (theta nodes, weights) of shape (P, K * n); weights sum to 1 per row
    """
    theta_prev = np.atleast_1d(np.asarray(theta_prev, dtype=float))
    if u_edges is None:
        u_edges = np.broadcast_to(np.array([0.0, 1.0]), theta_prev.shape + (2,))
    u, w = panel_rule(u_edges, n)
    theta = np.asarray(kernel.transition_ppf(u, theta_prev[:, None], t))
    return theta, w


class GaussLegendreRule:
    """
    n-node Gauss-Legendre expectation rule for kernel transitions.

    In support space the nodes are mapped onto the conditional support and
    weighted by the density; rows whose mass misses 1 by more than
    mass_tolerance fall back to quantile space.
    """

    def __init__(self, n: int, space: str = 'support', mass_tolerance: float = 1e-6):
        if space not in SPACES:
            raise QuadratureError(
                f"Unsupported quadrature space: '{space}'\n"
                f"Supported spaces: {', '.join(SPACES)}"
            )
        if n < 2:
            raise QuadratureError(f"Quadrature needs at least 2 nodes, got {n}")
        self.n = n
        self.space = space
        self.mass_tolerance = mass_tolerance

    def nodes(self, kernel, theta_prev: np.ndarray, t: int) -> Tuple[np.ndarray, np.ndarray, int]:
        """
        Returns:
            (nodes, weights, fallback_rows); nodes and weights have shape (P, n)
        """
        theta_prev = np.atleast_1d(np.asarray(theta_prev, dtype=float))
        if self.space == 'quantile':
            theta, w = quantile_nodes(kernel, theta_prev, t, self.n)
            return theta, w, 0

        lo, hi = kernel.conditional_support(theta_prev, t)
        theta, w = map_nodes(lo, hi, self.n)
        with np.errstate(divide='ignore', invalid='ignore'):
            density = np.asarray(kernel.transition_pdf(theta, theta_prev[:, None], t))
            weights = w * density
        mass = weights.sum(axis=1)
        bad = ~np.isfinite(mass) | (np.abs(mass - 1.0) > self.mass_tolerance)
        fallback = int(np.count_nonzero(bad))
        if fallback:
            q_theta, q_w = quantile_nodes(kernel, theta_prev[bad], t, self.n)
            theta[bad] = q_theta
            weights[bad] = q_w
            logger.debug("Quadrature fell back to quantile space on %d of %d rows (t=%d)",
                         fallback, theta_prev.size, t)
        return theta, weights, fallback


class DiscreteTypeRule:
    """Finite type set: node k carries the probability of cell [edges[k], edges[k+1])."""

    def __init__(self, types: np.ndarray, edges: np.ndarray):
        types = np.asarray(types, dtype=float)
        edges = np.asarray(edges, dtype=float)
        if edges.shape != (types.size + 1,):
            raise QuadratureError(
                f"DiscreteTypeRule needs len(edges) == len(types) + 1, "
                f"got {edges.size} edges for {types.size} types"
            )
        self.types = types
        self.edges = edges

    @classmethod
    def uniform_cells(cls, lo: float, hi: float, count: int) -> 'DiscreteTypeRule':
        """Midpoints of `count` equal cells of [lo, hi]."""
        edges = np.linspace(lo, hi, count + 1)
        return cls(0.5 * (edges[:-1] + edges[1:]), edges)

    @property
    def spacing(self) -> float:
        return float(np.max(np.diff(self.edges)))

    def initial_probabilities(self, kernel) -> np.ndarray:
        cdf = np.asarray(kernel.initial_cdf(self.edges))
        return np.diff(cdf)

    def nodes(self, kernel, theta_prev: np.ndarray, t: int) -> Tuple[np.ndarray, np.ndarray, int]:
        theta_prev = np.atleast_1d(np.asarray(theta_prev, dtype=float))
        cdf = np.asarray(kernel.transition_cdf(self.edges[None, :], theta_prev[:, None], t))
        # the last cell is closed on the right
        cdf[:, -1] = 1.0
        weights = np.diff(cdf, axis=1)
        theta = np.broadcast_to(self.types, weights.shape).copy()
        return theta, weights, 0
