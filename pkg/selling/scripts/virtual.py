#!/usr/bin/env python3
"""
Virtual Valuations and the Solver State

The virtual valuation of a type path depends on the history only through the
cumulative distortion L_t:

    L_1     = (1 - F1(theta_1)) / f1(theta_1)
    L_{t+1} = L_t * r_{t+1}(theta_{t+1}, theta_t)
    psi_t   = theta_t - L_t

so the solver works on states (t, theta, L). This module defines that state,
the (theta, L) grid, and bilinear interpolation on it with a coverage counter
for queries that leave the L range.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from kernels import Kernel, KernelSingularityError

logger = logging.getLogger(__name__)


class GridError(Exception):
    """Exception raised for invalid state grids or table shapes."""
    pass


@dataclass(frozen=True)
class PathState:
    """Sufficient statistic of a type history at period t."""
    t: int
    theta: float
    distortion: float

    def __post_init__(self):
        if self.t < 1:
            raise GridError(f"PathState period must be >= 1, got t={self.t}")
        if not self.distortion >= 0:
            raise GridError(f"PathState distortion must be >= 0, got {self.distortion}")

    @property
    def virtual_value(self) -> float:
        return self.theta - self.distortion


def virtual_value(state: PathState) -> float:
    """psi = theta - L."""
    return state.theta - state.distortion


def initial_distortion(kernel: Kernel, theta):
    """L_1 = (1 - F1) / f1; raises KernelSingularityError where f1 vanishes."""
    return kernel.inverse_hazard(theta)


def distortion_update(distortion, theta_next, theta_prev, kernel: Kernel, t: int = 2,
                      strict: bool = True):
    """
    L * r_t(theta_next, theta_prev); zero distortion stays zero for any arguments.

    With strict=False, off-support points use the kernel's impulse-response
    extension (reports rather than true types).
    """
    distortion, theta_next, theta_prev = np.broadcast_arrays(
        np.asarray(distortion, dtype=float),
        np.asarray(theta_next, dtype=float),
        np.asarray(theta_prev, dtype=float),
    )
    live = distortion != 0
    result = np.zeros(distortion.shape)
    if np.any(live):
        ratio = kernel.impulse_response(theta_next[live], theta_prev[live], t, strict=strict)
        result[live] = distortion[live] * np.asarray(ratio, dtype=float)
    return result[()] if result.ndim == 0 else result


def start_state(kernel: Kernel, theta1: float) -> PathState:
    return PathState(1, float(theta1), float(initial_distortion(kernel, theta1)))


def advance(state: PathState, theta_next: float, kernel: Kernel, strict: bool = True) -> PathState:
    distortion = distortion_update(state.distortion, theta_next, state.theta, kernel,
                                   state.t + 1, strict=strict)
    return PathState(state.t + 1, float(theta_next), float(distortion))


def path_distortions(kernel: Kernel, paths: np.ndarray, strict: bool = False) -> np.ndarray:
    """Cumulative distortions along each row of an (n, T) path array."""
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    out = np.empty(paths.shape)
    if paths.size == 0:
        return out
    out[:, 0] = initial_distortion(kernel, paths[:, 0])
    for t in range(2, paths.shape[1] + 1):
        out[:, t - 1] = distortion_update(out[:, t - 2], paths[:, t - 1], paths[:, t - 2],
                                          kernel, t, strict=strict)
    return out


def path_virtual_values(kernel: Kernel, paths: np.ndarray, strict: bool = False) -> np.ndarray:
    """psi_t along each row of an (n, T) path array."""
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    return paths - path_distortions(kernel, paths, strict=strict)


class CoverageCounter:
    """Thread-safe count of interpolation queries clamped into the grid."""

    def __init__(self):
        self._lock = threading.Lock()
        self.clamped = 0
        self.queries = 0
        self.max_distortion = 0.0

    def record(self, clamped: int, queries: int, max_distortion: float) -> None:
        with self._lock:
            self.clamped += clamped
            self.queries += queries
            self.max_distortion = max(self.max_distortion, max_distortion)

    def to_dict(self):
        return {'clamped': self.clamped, 'queries': self.queries,
                'max_distortion_seen': self.max_distortion}


class StateGrid:
    """
    Tensor grid over (theta, L).

    theta_nodes span the kernel support inclusively; distortion_nodes are an
    exact zero followed by a geometric ladder from l_min to l_max.
    """

    def __init__(self, theta_nodes: np.ndarray, distortion_nodes: np.ndarray, horizon: int):
        theta_nodes = np.asarray(theta_nodes, dtype=float)
        distortion_nodes = np.asarray(distortion_nodes, dtype=float)
        if theta_nodes.ndim != 1 or theta_nodes.size < 2 or np.any(np.diff(theta_nodes) <= 0):
            raise GridError("theta_nodes must be a strictly increasing 1-D array of size >= 2")
        if (distortion_nodes.ndim != 1 or distortion_nodes.size < 2
                or distortion_nodes[0] != 0.0 or np.any(np.diff(distortion_nodes) <= 0)):
            raise GridError(
                "distortion_nodes must start at an exact 0 node and increase strictly "
                "(size >= 2)"
            )
        if horizon < 1:
            raise GridError(f"Horizon must be >= 1, got {horizon}")
        self.theta_nodes = theta_nodes
        self.distortion_nodes = distortion_nodes
        self.horizon = horizon

    @classmethod
    def build(cls, kernel: Kernel, horizon: int, n_theta: int, n_distortion: int,
              l_min: Optional[float] = None, l_max: Optional[float] = None) -> 'StateGrid':
        """Default bounds: l_max = 10 * max finite inverse hazard on the theta grid, l_min = 1e-6 * l_max."""
        theta = np.linspace(kernel.support_lo, kernel.support_hi, n_theta)
        if l_max is None:
            try:
                inverse = np.asarray(kernel.inverse_hazard(theta[:-1]), dtype=float)
            except KernelSingularityError:
                inverse = np.array([kernel.support_hi - kernel.support_lo])
            finite = inverse[np.isfinite(inverse)]
            peak = float(finite.max()) if finite.size else 0.0
            l_max = 10.0 * (peak if peak > 0 else kernel.support_hi - kernel.support_lo)
        if l_min is None:
            l_min = 1e-6 * l_max
        if not 0 < l_min < l_max:
            raise GridError(f"Distortion bounds must satisfy 0 < l_min < l_max, got {l_min}, {l_max}")
        if n_distortion < 2:
            raise GridError(f"n_distortion must be >= 2, got {n_distortion}")
        ladder = np.geomspace(l_min, l_max, n_distortion - 1)
        grid = cls(theta, np.concatenate(([0.0], ladder)), horizon)
        logger.debug("State grid: %d theta nodes, %d distortion nodes in [0] + [%g, %g]",
                     n_theta, n_distortion, l_min, l_max)
        return grid

    @property
    def shape(self):
        return (self.theta_nodes.size, self.distortion_nodes.size)

    @property
    def theta_step(self) -> float:
        return float(np.max(np.diff(self.theta_nodes)))

    @property
    def l_max(self) -> float:
        return float(self.distortion_nodes[-1])

    def interpolator(self, table: np.ndarray, counter: Optional[CoverageCounter] = None) -> 'GridInterpolator':
        return GridInterpolator(self, table, counter)


class GridInterpolator:
    """Bilinear lookup of a (theta, L) table with clamping at the grid edges."""

    def __init__(self, grid: StateGrid, table: np.ndarray, counter: Optional[CoverageCounter] = None):
        table = np.asarray(table, dtype=float)
        if table.shape != grid.shape:
            raise GridError(f"Table shape {table.shape} does not match grid shape {grid.shape}")
        self.grid = grid
        self.counter = counter
        self._interp = RegularGridInterpolator(
            (grid.theta_nodes, grid.distortion_nodes), table, method='linear'
        )

    def __call__(self, theta, distortion) -> np.ndarray:
        theta, distortion = np.broadcast_arrays(np.asarray(theta, dtype=float),
                                                np.asarray(distortion, dtype=float))
        g = self.grid
        over = distortion > g.l_max
        if self.counter is not None and theta.size:
            self.counter.record(int(np.count_nonzero(over)), int(theta.size),
                                float(np.max(distortion, initial=0.0)))
        points = np.stack([np.clip(theta, g.theta_nodes[0], g.theta_nodes[-1]),
                           np.clip(distortion, 0.0, g.l_max)], axis=-1)
        return self._interp(points.reshape(-1, 2)).reshape(theta.shape)
