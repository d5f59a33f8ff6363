#!/usr/bin/env python3
"""
Valuation Kernels for the Selling-Time Solver

A kernel describes how the buyer's private valuation evolves: an initial
distribution F1 on [lo, hi] plus conditional transitions F_t(theta_t | theta_prev)
for t >= 2, each with an analytic density and the partial derivative
dF_t/dtheta_prev. The built-in kernels are the processes used throughout the
worked examples (shrinking uniform, power, quadratic tilt, independent, AR(1)).

Usage:
    from kernels import build_kernel, KernelError

    kernel = build_kernel("power")
    kernel.transition_cdf(0.25, 0.5)        # 0.5
    kernel.impulse_response(0.4, 0.8)

All evaluation methods broadcast over numpy arrays and are pure, so a kernel
can be shared between threads once constructed.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate, stats

logger = logging.getLogger(__name__)


class KernelError(Exception):
    """Exception raised for invalid kernel parameters or out-of-domain queries."""
    pass


class KernelSingularityError(KernelError):
    """Raised when an impulse response or distortion needs a zero density."""

    def __init__(self, message: str, theta: Any = None, theta_prev: Any = None):
        super().__init__(message)
        self.theta = theta
        self.theta_prev = theta_prev


def _scalar(value: np.ndarray) -> Any:
    """Return numpy scalars for 0-d results, arrays otherwise."""
    return value[()] if isinstance(value, np.ndarray) else value


class Marginal:
    """
    A one-dimensional law on [lo, hi] backed by a frozen scipy.stats distribution.

    Families:
    - uniform: flat density
    - beta: Beta(a, b) rescaled to [lo, hi]; Beta(1, s) multiplies the
      uniform hazard rate by s
    """

    FAMILIES = ['uniform', 'beta']

    def __init__(self, lo: float = 0.0, hi: float = 1.0, family: str = 'uniform',
                 a: float = 1.0, b: float = 1.0):
        if family not in self.FAMILIES:
            raise KernelError(
                f"Unsupported marginal family: '{family}'\n\n"
                f"Supported families:\n" +
                '\n'.join(f"  - {name}" for name in self.FAMILIES)
            )
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise KernelError(f"Marginal bounds must satisfy lo < hi, got [{lo}, {hi}]")
        if family == 'beta' and (a <= 0 or b <= 0):
            raise KernelError(f"Beta parameters must be positive, got a={a}, b={b}")

        self.lo = float(lo)
        self.hi = float(hi)
        self.family = family
        self.a = float(a)
        self.b = float(b)

        scale = self.hi - self.lo
        if family == 'uniform':
            self._dist = stats.uniform(loc=self.lo, scale=scale)
        else:
            self._dist = stats.beta(self.a, self.b, loc=self.lo, scale=scale)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]], lo: float, hi: float) -> 'Marginal':
        """Build a marginal from a config mapping such as {family: beta, a: 2, b: 2}."""
        if data is None:
            return cls(lo, hi)
        if isinstance(data, Marginal):
            return data
        if not isinstance(data, dict):
            raise KernelError(
                f"Marginal specification must be a mapping, got {type(data).__name__}"
            )
        unknown = set(data) - {'family', 'a', 'b'}
        if unknown:
            raise KernelError(
                f"Unknown marginal field(s): {', '.join(sorted(unknown))}\n"
                f"Allowed fields: family, a, b"
            )
        return cls(lo, hi, data.get('family', 'uniform'),
                   data.get('a', 1.0), data.get('b', 1.0))

    def to_dict(self) -> Dict[str, Any]:
        if self.family == 'uniform':
            return {'family': 'uniform'}
        return {'family': self.family, 'a': self.a, 'b': self.b}

    def cdf(self, x):
        return np.clip(self._dist.cdf(x), 0.0, 1.0)

    def sf(self, x):
        return np.clip(self._dist.sf(x), 0.0, 1.0)

    def pdf(self, x):
        return self._dist.pdf(x)

    def ppf(self, u):
        return np.clip(self._dist.ppf(u), self.lo, self.hi)

    def mean(self) -> float:
        return float(self._dist.mean())

    def __repr__(self) -> str:
        return f"Marginal({self.family}, [{self.lo}, {self.hi}])"


class Kernel(ABC):
    """
    Markov valuation process on a real interval.

    Subclasses implement the transition law on its conditional support through
    _cdf, _pdf, _dcdf_dprev and _ppf; the public methods take care of domain
    checks, clamping outside the conditional support, and broadcasting.

    The action argument of transition methods exists for interface
    completeness. Built-in kernels ignore it.
    """

    name = 'kernel'
    action_dependent = False

    def __init__(self, support_lo: float, support_hi: float, initial: Marginal):
        if not (0.0 <= support_lo < support_hi < np.inf):
            raise KernelError(
                f"Kernel support must satisfy 0 <= lo < hi < inf, "
                f"got [{support_lo}, {support_hi}]"
            )
        self.support_lo = float(support_lo)
        self.support_hi = float(support_hi)
        self.initial = initial
        self._tolerance = 1e-12 * max(1.0, self.support_hi)

    # ------------------------------------------------------------------
    # Initial distribution
    # ------------------------------------------------------------------

    def _check_domain(self, theta, where: str) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        bad = (theta < self.support_lo - self._tolerance) | (theta > self.support_hi + self._tolerance)
        if np.any(bad):
            offending = theta[bad].flat[0] if theta.ndim else float(theta)
            raise KernelError(
                f"{where}: valuation {offending!r} is outside the support "
                f"[{self.support_lo}, {self.support_hi}] of kernel '{self.name}'"
            )
        return np.clip(theta, self.support_lo, self.support_hi)

    def initial_cdf(self, theta):
        theta = self._check_domain(theta, 'initial_cdf')
        return _scalar(self.initial.cdf(theta))

    def initial_pdf(self, theta):
        theta = self._check_domain(theta, 'initial_pdf')
        return _scalar(self.initial.pdf(theta))

    def initial_ppf(self, u):
        return _scalar(self.initial.ppf(np.asarray(u, dtype=float)))

    def inverse_hazard(self, theta):
        """
        Return (1 - F1) / f1, the first-period distortion.

        Raises:
            KernelSingularityError: If f1 vanishes where F1 < 1
        """
        theta = self._check_domain(theta, 'inverse_hazard')
        survival = self.initial.sf(theta)
        density = self.initial.pdf(theta)
        singular = (density <= 0) & (survival > 0)
        if np.any(singular):
            point = theta[singular].flat[0] if theta.ndim else float(theta)
            raise KernelSingularityError(
                f"Initial density of kernel '{self.name}' vanishes at theta={point!r} "
                f"while 1 - F1 > 0; the first-period distortion is infinite",
                theta=point
            )
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = np.where(survival > 0, survival / np.where(density > 0, density, 1.0), 0.0)
        return _scalar(ratio)

    def hazard(self, theta):
        """Return f1 / (1 - F1); infinite where F1 = 1 (not an error)."""
        theta = self._check_domain(theta, 'hazard')
        survival = self.initial.sf(theta)
        density = self.initial.pdf(theta)
        with np.errstate(divide='ignore', invalid='ignore'):
            rate = np.where(survival > 0, density / np.where(survival > 0, survival, 1.0), np.inf)
        return _scalar(rate)

    # ------------------------------------------------------------------
    # Transitions
    # ------------------------------------------------------------------

    @abstractmethod
    def conditional_support(self, theta_prev, t: int = 2) -> Tuple[np.ndarray, np.ndarray]:
        """Return arrays (lo, hi) of the support of theta_t given theta_prev."""

    @abstractmethod
    def _cdf(self, theta, theta_prev, t):
        """CDF for theta inside the conditional support."""

    @abstractmethod
    def _pdf(self, theta, theta_prev, t):
        """Density for theta inside the conditional support."""

    @abstractmethod
    def _dcdf_dprev(self, theta, theta_prev, t):
        """dF/dtheta_prev for theta inside the conditional support."""

    @abstractmethod
    def _ppf(self, u, theta_prev, t):
        """Quantile function of the conditional law."""

    def _prepare(self, theta, theta_prev, t: int, where: str):
        if t < 2:
            raise KernelError(f"{where}: transitions start at t=2, got t={t}")
        theta_prev = self._check_domain(theta_prev, where)
        theta, theta_prev = np.broadcast_arrays(np.asarray(theta, dtype=float), theta_prev)
        lo, hi = self.conditional_support(theta_prev, t)
        lo, hi = np.broadcast_arrays(lo, hi)
        return theta, theta_prev, lo, hi

    def transition_cdf(self, theta, theta_prev, t: int = 2, action: Any = None):
        """F_t(theta | theta_prev); clamps to 0 below and 1 above the conditional support."""
        theta, theta_prev, lo, hi = self._prepare(theta, theta_prev, t, 'transition_cdf')
        inside = (theta >= lo) & (theta < hi)
        with np.errstate(divide='ignore', invalid='ignore'):
            value = np.where(inside, self._cdf(np.where(inside, theta, lo), theta_prev, t), 0.0)
        value = np.where(theta >= hi, 1.0, value)
        return _scalar(np.clip(value, 0.0, 1.0))

    def transition_pdf(self, theta, theta_prev, t: int = 2, action: Any = None):
        """
        f_t(theta | theta_prev).

        Raises:
            KernelError: If theta lies outside the conditional support
        """
        theta, theta_prev, lo, hi = self._prepare(theta, theta_prev, t, 'transition_pdf')
        tol = self._tolerance
        outside = (theta < lo - tol) | (theta > hi + tol)
        if np.any(outside):
            index = np.argwhere(outside)[0] if outside.ndim else ()
            raise KernelError(
                f"transition_pdf: theta={theta[tuple(index)]!r} is outside the conditional "
                f"support [{lo[tuple(index)]!r}, {hi[tuple(index)]!r}] "
                f"given theta_prev={theta_prev[tuple(index)]!r}"
            )
        with np.errstate(divide='ignore', invalid='ignore'):
            value = self._pdf(np.clip(theta, lo, hi), theta_prev, t)
        return _scalar(np.asarray(value, dtype=float))

    def transition_dcdf_dprev(self, theta, theta_prev, t: int = 2, action: Any = None):
        """dF_t(theta | theta_prev)/dtheta_prev; zero outside the conditional support."""
        theta, theta_prev, lo, hi = self._prepare(theta, theta_prev, t, 'transition_dcdf_dprev')
        inside = (theta >= lo) & (theta <= hi)
        with np.errstate(divide='ignore', invalid='ignore'):
            value = self._dcdf_dprev(np.where(inside, theta, lo), theta_prev, t)
        return _scalar(np.where(inside, value, 0.0))

    def transition_ppf(self, u, theta_prev, t: int = 2, action: Any = None):
        theta_prev = self._check_domain(theta_prev, 'transition_ppf')
        u, theta_prev = np.broadcast_arrays(np.clip(np.asarray(u, dtype=float), 0.0, 1.0), theta_prev)
        lo, hi = self.conditional_support(theta_prev, t)
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            value = self._ppf(u, theta_prev, t)
        return _scalar(np.clip(value, lo, hi))

    def impulse_response(self, theta, theta_prev, t: int = 2, action: Any = None,
                         strict: bool = True):
        """
        Return r = -(dF_t/dtheta_prev) / f_t at (theta, theta_prev).

        With strict=True the point must lie in the conditional support with a
        positive density. With strict=False, off-support points (misreports)
        use the kernel's extension of r.

        Raises:
            KernelSingularityError: If the density vanishes (strict mode)
            KernelError: If theta is off-support (strict mode)
        """
        if not strict:
            theta, theta_prev, lo, hi = self._prepare(theta, theta_prev, t, 'impulse_response')
            with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
                value = self._impulse_extension(theta, theta_prev, t, lo, hi)
            return _scalar(np.asarray(value, dtype=float))

        density = np.asarray(self.transition_pdf(theta, theta_prev, t), dtype=float)
        theta_b, theta_prev_b = np.broadcast_arrays(np.asarray(theta, dtype=float),
                                                    np.asarray(theta_prev, dtype=float))
        singular = ~(density > 0) | ~np.isfinite(density)
        if np.any(singular):
            index = tuple(np.argwhere(singular)[0]) if singular.ndim else ()
            raise KernelSingularityError(
                f"impulse_response: density of kernel '{self.name}' is "
                f"{density[index]!r} at theta={theta_b[index]!r}, "
                f"theta_prev={theta_prev_b[index]!r}",
                theta=float(theta_b[index]), theta_prev=float(theta_prev_b[index])
            )
        derivative = np.asarray(self.transition_dcdf_dprev(theta, theta_prev, t), dtype=float)
        return _scalar(-derivative / density)

    def _impulse_extension(self, theta, theta_prev, t, lo, hi):
        """Default extension: clamp the point into the conditional support."""
        clamped = np.clip(theta, lo, hi)
        density = self._pdf(clamped, theta_prev, t)
        derivative = self._dcdf_dprev(clamped, theta_prev, t)
        ok = (density > 0) & np.isfinite(density)
        return np.where(ok, -derivative / np.where(ok, density, 1.0), 0.0)

    def transition_mean(self, theta_prev, t: int = 2, nodes: int = 64):
        """E[theta_t | theta_prev] by Gauss-Legendre quadrature in quantile space."""
        x, w = np.polynomial.legendre.leggauss(nodes)
        u = 0.5 * (x + 1.0)
        theta_prev = np.asarray(theta_prev, dtype=float)
        values = self.transition_ppf(u, theta_prev[..., None], t)
        return _scalar(np.asarray(values) @ (0.5 * w))

    def sample_paths(self, horizon: int, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n type paths of length horizon by inverse-transform sampling."""
        uniforms = rng.random((n, horizon))
        paths = np.empty((n, horizon))
        if n == 0:
            return paths
        paths[:, 0] = self.initial_ppf(uniforms[:, 0])
        for t in range(2, horizon + 1):
            paths[:, t - 1] = self.transition_ppf(uniforms[:, t - 1], paths[:, t - 2], t)
        return paths

    def parameters(self) -> Dict[str, Any]:
        """Parameters that rebuild this kernel through build_kernel."""
        return {}

    def describe(self) -> Dict[str, Any]:
        return {'name': self.name, 'params': self.parameters(),
                'support': [self.support_lo, self.support_hi]}

    def __repr__(self) -> str:
        params = ', '.join(f"{k}={v!r}" for k, v in self.parameters().items())
        return f"{type(self).__name__}({params})"


def _hazard_scaled_initial(lo: float, hi: float, hazard_scale: float) -> Marginal:
    if hazard_scale == 1.0:
        return Marginal(lo, hi)
    return Marginal(lo, hi, 'beta', 1.0, hazard_scale)


class ShrinkingUniformKernel(Kernel):
    """theta_t ~ U[0, theta_{t-1}]; r = theta_t / theta_{t-1}."""

    name = 'shrinking_uniform'

    def __init__(self, upper: float = 1.0, hazard_scale: float = 1.0):
        super().__init__(0.0, upper, _hazard_scaled_initial(0.0, upper, hazard_scale))
        self.upper = float(upper)
        self.hazard_scale = float(hazard_scale)

    def conditional_support(self, theta_prev, t=2):
        theta_prev = np.asarray(theta_prev, dtype=float)
        return np.zeros_like(theta_prev), theta_prev

    def _cdf(self, theta, theta_prev, t):
        return np.where(theta_prev > 0, theta / np.where(theta_prev > 0, theta_prev, 1.0), 1.0)

    def _pdf(self, theta, theta_prev, t):
        return np.where(theta_prev > 0, 1.0 / np.where(theta_prev > 0, theta_prev, 1.0), np.inf)

    def _dcdf_dprev(self, theta, theta_prev, t):
        safe = np.where(theta_prev > 0, theta_prev, 1.0)
        return np.where(theta_prev > 0, -theta / safe ** 2, 0.0)

    def _ppf(self, u, theta_prev, t):
        return u * theta_prev

    def _impulse_extension(self, theta, theta_prev, t, lo, hi):
        # theta/theta_prev on all of [0, upper]^2; zero after a zero report
        safe = np.where(theta_prev > 0, theta_prev, 1.0)
        return np.where(theta_prev > 0, np.maximum(theta, 0.0) / safe, 0.0)

    def parameters(self):
        return {'upper': self.upper, 'hazard_scale': self.hazard_scale}


class PowerKernel(Kernel):
    """F_t(theta | p) = theta ** p on [0, 1]."""

    name = 'power'

    def __init__(self, hazard_scale: float = 1.0):
        super().__init__(0.0, 1.0, _hazard_scaled_initial(0.0, 1.0, hazard_scale))
        self.hazard_scale = float(hazard_scale)

    def conditional_support(self, theta_prev, t=2):
        theta_prev = np.asarray(theta_prev, dtype=float)
        return np.zeros_like(theta_prev), np.ones_like(theta_prev)

    def _cdf(self, theta, theta_prev, t):
        return np.power(theta, theta_prev)

    def _pdf(self, theta, theta_prev, t):
        return theta_prev * np.power(theta, theta_prev - 1.0)

    def _dcdf_dprev(self, theta, theta_prev, t):
        positive = theta > 0
        safe = np.where(positive, theta, 1.0)
        return np.where(positive, np.power(safe, theta_prev) * np.log(safe), 0.0)

    def _ppf(self, u, theta_prev, t):
        positive = theta_prev > 0
        exponent = 1.0 / np.where(positive, theta_prev, 1.0)
        return np.where(positive, np.power(u, exponent), 0.0)

    def _impulse_extension(self, theta, theta_prev, t, lo, hi):
        theta = np.clip(theta, 0.0, 1.0)
        positive = theta > 0
        safe = np.where(positive, theta, 1.0)
        prev = np.maximum(theta_prev, np.finfo(float).tiny)
        return np.where(positive, -safe * np.log(safe) / prev, 0.0)

    def parameters(self):
        return {'hazard_scale': self.hazard_scale}


class QuadraticTiltKernel(Kernel):
    """F_t(theta | p) = theta - strength * (p - 1/2) * theta * (1 - theta) on [0, 1]."""

    name = 'quadratic_tilt'

    def __init__(self, strength: float = 2.0, hazard_scale: float = 1.0):
        if not 0.0 <= strength <= 2.0:
            raise KernelError(f"quadratic_tilt strength must lie in [0, 2], got {strength}")
        super().__init__(0.0, 1.0, _hazard_scaled_initial(0.0, 1.0, hazard_scale))
        self.strength = float(strength)
        self.hazard_scale = float(hazard_scale)

    def _tilt(self, theta_prev):
        return self.strength * (theta_prev - 0.5)

    def conditional_support(self, theta_prev, t=2):
        theta_prev = np.asarray(theta_prev, dtype=float)
        return np.zeros_like(theta_prev), np.ones_like(theta_prev)

    def _cdf(self, theta, theta_prev, t):
        return theta - self._tilt(theta_prev) * theta * (1.0 - theta)

    def _pdf(self, theta, theta_prev, t):
        return 1.0 - self._tilt(theta_prev) * (1.0 - 2.0 * theta)

    def _dcdf_dprev(self, theta, theta_prev, t):
        return -self.strength * theta * (1.0 - theta) * np.ones_like(theta_prev)

    def _ppf(self, u, theta_prev, t):
        a = self._tilt(theta_prev)
        denominator = (1.0 - a) + np.sqrt((1.0 - a) ** 2 + 4.0 * a * u)
        return np.where(denominator > 0, 2.0 * u / np.where(denominator > 0, denominator, 1.0), 0.0)

    def parameters(self):
        return {'strength': self.strength, 'hazard_scale': self.hazard_scale}


class IndependentKernel(Kernel):
    """theta_t drawn independently from the period-t marginal; r = 0."""

    name = 'independent'

    def __init__(self, marginals: Optional[List[Any]] = None, lo: float = 0.0, hi: float = 1.0):
        built = [Marginal.from_dict(m, lo, hi) for m in (marginals or [None])]
        if not built:
            raise KernelError("independent kernel needs at least one marginal")
        super().__init__(lo, hi, built[0])
        self.marginals = built

    def marginal(self, t: int) -> Marginal:
        """Marginal of period t; the last entry repeats for later periods."""
        return self.marginals[min(t, len(self.marginals)) - 1]

    def conditional_support(self, theta_prev, t=2):
        theta_prev = np.asarray(theta_prev, dtype=float)
        return np.full_like(theta_prev, self.support_lo), np.full_like(theta_prev, self.support_hi)

    def _cdf(self, theta, theta_prev, t):
        return self.marginal(t).cdf(theta) * np.ones_like(theta_prev)

    def _pdf(self, theta, theta_prev, t):
        return self.marginal(t).pdf(theta) * np.ones_like(theta_prev)

    def _dcdf_dprev(self, theta, theta_prev, t):
        return np.zeros(np.broadcast(theta, theta_prev).shape)

    def _ppf(self, u, theta_prev, t):
        return self.marginal(t).ppf(u) * np.ones_like(theta_prev)

    def _impulse_extension(self, theta, theta_prev, t, lo, hi):
        return np.zeros(np.broadcast(theta, theta_prev).shape)

    def impulse_response(self, theta, theta_prev, t=2, action=None, strict=True):
        if strict:
            return super().impulse_response(theta, theta_prev, t, action, strict)
        theta, theta_prev = np.broadcast_arrays(np.asarray(theta, dtype=float),
                                                np.asarray(theta_prev, dtype=float))
        return _scalar(np.zeros(theta.shape))

    def transition_mean(self, theta_prev, t=2, nodes=64):
        return _scalar(np.full(np.shape(theta_prev), self.marginal(t).mean()))

    def parameters(self):
        return {'marginals': [m.to_dict() for m in self.marginals],
                'lo': self.support_lo, 'hi': self.support_hi}


class AR1Kernel(Kernel):
    """theta_t = gamma * theta_{t-1} + (1 - gamma) * eps_t with eps_t ~ G on [lo, hi]."""

    name = 'ar1'

    def __init__(self, gamma: float = 0.5, lo: float = 0.0, hi: float = 1.0,
                 innovation: Optional[Any] = None, hazard_scale: float = 1.0):
        if not 0.0 <= gamma < 1.0:
            raise KernelError(f"ar1 gamma must lie in [0, 1), got {gamma}")
        super().__init__(lo, hi, _hazard_scaled_initial(lo, hi, hazard_scale))
        self.gamma = float(gamma)
        self.innovation = Marginal.from_dict(innovation, lo, hi)
        self.hazard_scale = float(hazard_scale)

    def _standardize(self, theta, theta_prev):
        return (theta - self.gamma * theta_prev) / (1.0 - self.gamma)

    def conditional_support(self, theta_prev, t=2):
        theta_prev = np.asarray(theta_prev, dtype=float)
        shift = self.gamma * theta_prev
        scale = 1.0 - self.gamma
        return shift + scale * self.support_lo, shift + scale * self.support_hi

    def _cdf(self, theta, theta_prev, t):
        return self.innovation.cdf(self._standardize(theta, theta_prev))

    def _pdf(self, theta, theta_prev, t):
        return self.innovation.pdf(self._standardize(theta, theta_prev)) / (1.0 - self.gamma)

    def _dcdf_dprev(self, theta, theta_prev, t):
        density = self.innovation.pdf(self._standardize(theta, theta_prev))
        return -self.gamma * density / (1.0 - self.gamma)

    def _ppf(self, u, theta_prev, t):
        return self.gamma * theta_prev + (1.0 - self.gamma) * self.innovation.ppf(u)

    def impulse_response(self, theta, theta_prev, t=2, action=None, strict=True):
        if strict:
            density = np.asarray(self.transition_pdf(theta, theta_prev, t), dtype=float)
            if np.any(~(density > 0)):
                raise KernelSingularityError(
                    f"impulse_response: innovation density of kernel 'ar1' vanishes",
                    theta=theta, theta_prev=theta_prev
                )
        shape = np.broadcast(np.asarray(theta), np.asarray(theta_prev)).shape
        return _scalar(np.full(shape, self.gamma))

    def _impulse_extension(self, theta, theta_prev, t, lo, hi):
        return np.full(np.broadcast(theta, theta_prev).shape, self.gamma)

    def transition_mean(self, theta_prev, t=2, nodes=64):
        theta_prev = np.asarray(theta_prev, dtype=float)
        return _scalar(self.gamma * theta_prev + (1.0 - self.gamma) * self.innovation.mean())

    def parameters(self):
        return {'gamma': self.gamma, 'lo': self.support_lo, 'hi': self.support_hi,
                'innovation': self.innovation.to_dict(), 'hazard_scale': self.hazard_scale}


# ----------------------------------------------------------------------
# Catalogue
# ----------------------------------------------------------------------

@dataclass
class ParamSpec:
    """Documentation and range for one kernel parameter."""
    default: Any
    doc: str
    lo: Optional[float] = None
    hi: Optional[float] = None
    lo_open: bool = False
    hi_open: bool = False
    kind: str = 'float'

    def check(self, kernel_name: str, name: str, value: Any) -> Any:
        if self.kind != 'float':
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise KernelError(
                f"Parameter '{name}' of kernel '{kernel_name}' must be a number, "
                f"got {type(value).__name__}"
            )
        value = float(value)
        too_low = self.lo is not None and (value < self.lo or (self.lo_open and value == self.lo))
        too_high = self.hi is not None and (value > self.hi or (self.hi_open and value == self.hi))
        if too_low or too_high or not np.isfinite(value):
            raise KernelError(
                f"Parameter '{name}' of kernel '{kernel_name}' is out of range: {value}\n"
                f"Allowed range: {self.describe_range()}"
            )
        return value

    def describe_range(self) -> str:
        if self.kind != 'float':
            return self.kind
        left = '(' if self.lo_open else '['
        right = ')' if self.hi_open else ']'
        lo = '-inf' if self.lo is None else f"{self.lo:g}"
        hi = 'inf' if self.hi is None else f"{self.hi:g}"
        return f"{left}{lo}, {hi}{right}"


@dataclass
class KernelEntry:
    """A named kernel factory with its parameter documentation."""
    factory: Callable[..., Kernel]
    description: str
    params: Dict[str, ParamSpec] = field(default_factory=dict)


_HAZARD_SCALE = ParamSpec(1.0, "Scales the hazard rate of a uniform F1 (Beta(1, s) law; 1 = uniform)",
                          lo=0.0, lo_open=True)

KERNEL_CATALOG: Dict[str, KernelEntry] = {
    'shrinking_uniform': KernelEntry(
        ShrinkingUniformKernel,
        "theta_t uniform on [0, theta_{t-1}]; F1 uniform on [0, upper]",
        {'upper': ParamSpec(1.0, "Upper end of the valuation interval", lo=0.0, lo_open=True),
         'hazard_scale': _HAZARD_SCALE},
    ),
    'power': KernelEntry(
        PowerKernel,
        "F_t(theta | p) = theta^p on [0, 1]; F1 uniform",
        {'hazard_scale': _HAZARD_SCALE},
    ),
    'quadratic_tilt': KernelEntry(
        QuadraticTiltKernel,
        "F_t(theta | p) = theta - strength (p - 1/2) theta (1 - theta) on [0, 1]; F1 uniform",
        {'strength': ParamSpec(2.0, "Persistence of the tilt", lo=0.0, hi=2.0),
         'hazard_scale': _HAZARD_SCALE},
    ),
    'independent': KernelEntry(
        IndependentKernel,
        "theta_t independent across periods with per-period marginals",
        {'marginals': ParamSpec(None, "List of {family: uniform|beta, a, b}; last repeats",
                                kind='list'),
         'lo': ParamSpec(0.0, "Lower valuation bound", lo=0.0),
         'hi': ParamSpec(1.0, "Upper valuation bound", lo=0.0, lo_open=True)},
    ),
    'ar1': KernelEntry(
        AR1Kernel,
        "theta_t = gamma theta_{t-1} + (1 - gamma) eps_t, eps_t ~ innovation on [lo, hi]",
        {'gamma': ParamSpec(0.5, "Persistence", lo=0.0, hi=1.0, hi_open=True),
         'lo': ParamSpec(0.0, "Lower valuation bound", lo=0.0),
         'hi': ParamSpec(1.0, "Upper valuation bound", lo=0.0, lo_open=True),
         'innovation': ParamSpec(None, "Innovation law {family: uniform|beta, a, b}",
                                 kind='mapping'),
         'hazard_scale': _HAZARD_SCALE},
    ),
}


def list_kernels() -> List[str]:
    return sorted(KERNEL_CATALOG)


def validate_kernel_params(name: str, params: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Check a kernel name and parameter map against the catalogue.

    Returns:
        Parameter map with defaults filled in

    Raises:
        KernelError: If the name is unknown or a parameter is unknown or out of range
    """
    if name not in KERNEL_CATALOG:
        raise KernelError(
            f"Unknown kernel: '{name}'\n\n"
            f"Available kernels:\n" +
            '\n'.join(f"  - {k}" for k in list_kernels())
        )
    entry = KERNEL_CATALOG[name]
    params = dict(params or {})
    unknown = sorted(set(params) - set(entry.params))
    if unknown:
        raise KernelError(
            f"Unknown parameter(s) for kernel '{name}': {', '.join(unknown)}\n"
            f"Supported parameters: {', '.join(sorted(entry.params)) or '(none)'}"
        )
    resolved = {}
    for key, spec in entry.params.items():
        value = params.get(key, spec.default)
        if value is None:
            continue
        resolved[key] = spec.check(name, key, value)
    return resolved


def build_kernel(name: str, params: Optional[Dict[str, Any]] = None) -> Kernel:
    """
    Construct a built-in kernel by name.

    Args:
        name: Catalogue name (see list_kernels())
        params: Parameter overrides

    Returns:
        Kernel instance

    Raises:
        KernelError: If the name or parameters are invalid
    """
    resolved = validate_kernel_params(name, params)
    kernel = KERNEL_CATALOG[name].factory(**resolved)
    logger.debug("Built kernel %r", kernel)
    return kernel


# ----------------------------------------------------------------------
# Property checks
# ----------------------------------------------------------------------

@dataclass
class FOSDReport:
    """Result of a first-order stochastic dominance scan."""
    passed: bool
    max_derivative: float
    argmax: Tuple[float, float]
    tolerance: float
    points: int

    def to_dict(self) -> Dict[str, Any]:
        return {'passed': self.passed, 'max_derivative': self.max_derivative,
                'argmax': {'theta': self.argmax[0], 'theta_prev': self.argmax[1]},
                'tolerance': self.tolerance, 'points': self.points}


def _prev_grid(kernel: Kernel, n: int, margin: float = 0.0) -> np.ndarray:
    span = kernel.support_hi - kernel.support_lo
    return np.linspace(kernel.support_lo + margin * span, kernel.support_hi - margin * span, n)


def fosd_check(kernel: Kernel, n: int = 51, periods: Tuple[int, ...] = (2,),
               tolerance: float = 1e-12) -> FOSDReport:
    """Scan dF_t/dtheta_prev over a grid of (theta, theta_prev); FOSD means it is <= 0."""
    best = (-np.inf, (np.nan, np.nan))
    points = 0
    prev = _prev_grid(kernel, n)
    for t in periods:
        theta = np.linspace(kernel.support_lo, kernel.support_hi, n)
        grid_theta, grid_prev = np.meshgrid(theta, prev, indexing='ij')
        derivative = np.asarray(kernel.transition_dcdf_dprev(grid_theta, grid_prev, t))
        points += derivative.size
        index = np.unravel_index(np.argmax(derivative), derivative.shape)
        if derivative[index] > best[0]:
            best = (float(derivative[index]),
                    (float(grid_theta[index]), float(grid_prev[index])))
    return FOSDReport(passed=best[0] <= tolerance, max_derivative=best[0],
                      argmax=best[1], tolerance=tolerance, points=points)


def is_ifr(kernel: Kernel, n: int = 201) -> bool:
    """True when the hazard rate of F1 is nondecreasing on a grid."""
    theta = np.linspace(kernel.support_lo, kernel.support_hi, n)[:-1]
    rate = np.asarray(kernel.hazard(theta))
    return bool(np.all(np.diff(rate) >= -1e-12))


def density_normalization_check(kernel: Kernel, n: int = 50, t: int = 2) -> float:
    """Largest |integral of f_t(. | theta_prev) - 1| over interior theta_prev."""
    worst = 0.0
    for theta_prev in _prev_grid(kernel, n, margin=0.01):
        lo, hi = kernel.conditional_support(theta_prev, t)
        mass, _ = integrate.quad(lambda x: float(kernel.transition_pdf(x, theta_prev, t)),
                                 float(lo), float(hi), limit=200, epsabs=1e-13, epsrel=1e-12)
        worst = max(worst, abs(mass - 1.0))
    initial_mass, _ = integrate.quad(lambda x: float(kernel.initial_pdf(x)),
                                     kernel.support_lo, kernel.support_hi, limit=200)
    return max(worst, abs(initial_mass - 1.0))


def finite_difference_check(kernel: Kernel, n: int = 50, h: float = 1e-5, t: int = 2) -> float:
    """Largest gap between analytic dF/dtheta_prev and a central difference, away from edges."""
    worst = 0.0
    for theta_prev in _prev_grid(kernel, n, margin=0.02):
        lo_minus, hi_minus = kernel.conditional_support(theta_prev - h, t)
        lo_plus, hi_plus = kernel.conditional_support(theta_prev + h, t)
        lo = max(float(lo_minus), float(lo_plus))
        hi = min(float(hi_minus), float(hi_plus))
        if hi - lo <= 4 * h:
            continue
        span = hi - lo
        theta = np.linspace(lo + 0.02 * span, hi - 0.02 * span, n)
        analytic = np.asarray(kernel.transition_dcdf_dprev(theta, theta_prev, t))
        numeric = (np.asarray(kernel.transition_cdf(theta, theta_prev + h, t)) -
                   np.asarray(kernel.transition_cdf(theta, theta_prev - h, t))) / (2 * h)
        worst = max(worst, float(np.max(np.abs(analytic - numeric))))
    return worst
