"""Barenblatt profiles, optimal functions, and the two scaling transforms."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import Params, c_of_mass, k_of_mass
from .errors import DomainError, ResolutionError, TruncationWarning
from .radial import RadialFunction, RadialGrid, build_grid, evaluate_at, sphere_area

DEFAULT_TAIL_TOL = 1e-10
MAX_RADIUS = 5.0e3
MIN_CORE_NODES = 8


@dataclass(frozen=True)
class BarenblattSpec:
    params: Params
    M: float
    sigma: float

    def __post_init__(self):
        if not (self.M > 0.0 and math.isfinite(self.M)):
            raise DomainError(f"mass must be positive, got M={self.M!r}")
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive, got sigma={self.sigma!r}")

    @property
    def C_M(self) -> float:
        return c_of_mass(self.params, self.M)

    @property
    def K_M(self) -> float:
        return k_of_mass(self.params, self.M)

    @property
    def second_moment(self) -> float:
        return self.sigma * self.K_M

    def __call__(self, r) -> np.ndarray:
        m, d = self.params.m, self.params.d
        r = np.asarray(r, dtype=float)
        return self.sigma ** (-0.5 * d) * (self.C_M + r * r / self.sigma) ** (1.0 / (m - 1.0))

    def tail_second_moment(self, R: float) -> float:
        """Leading-order second moment of B_sigma carried by |x| > R."""
        m, d = self.params.m, self.params.d
        e = 2.0 / (m - 1.0) + d + 2.0
        amp = self.sigma ** (-0.5 * d - 1.0 / (m - 1.0))
        return sphere_area(d) * amp * R ** e / (-e)


def default_radius(params: Params, M: float, sigma: float, tol: float = DEFAULT_TAIL_TOL) -> float:
    """Radius beyond which B_sigma carries < tol of its second moment (capped).

    Inverts the leading power-law term of the tail; the cap keeps the core
    resolved for very slowly decaying profiles, whose remaining tail is then
    handled by the analytic correction in the quadrature.
    """
    spec = BarenblattSpec(params, M, sigma)
    m, d = params.m, params.d
    e = 2.0 / (m - 1.0) + d + 2.0
    amp = sphere_area(d) * sigma ** (-0.5 * d - 1.0 / (m - 1.0)) / (-e)
    R = (tol * spec.second_moment / amp) ** (1.0 / e)
    # the asymptotic form is only meaningful well outside the core
    R = max(R, 10.0 * math.sqrt(sigma * spec.C_M))
    return float(min(R, MAX_RADIUS * math.sqrt(sigma)))


def grid_for(params: Params, M: float, sigma: float, n: int = 2000, q: float = 2.0,
             tol: float = DEFAULT_TAIL_TOL) -> RadialGrid:
    return build_grid(params.d, n, default_radius(params, M, sigma, tol), q)


def barenblatt(params: Params, M: float, sigma: float, grid: RadialGrid,
               tail_tol: float = 1e-6) -> RadialFunction:
    """Sample B_sigma at mass M on ``grid``.

    Warns with :class:`TruncationWarning` when the part of the second moment
    lying beyond the grid radius exceeds ``tail_tol`` relative; the quadrature
    still adds that part back analytically.
    """
    if grid.d != params.d:
        raise DomainError(f"grid dimension {grid.d} does not match d={params.d}")
    spec = BarenblattSpec(params, M, sigma)
    deficit = spec.tail_second_moment(grid.R) / spec.second_moment
    if deficit > tail_tol:
        warnings.warn(TruncationWarning(
            f"grid radius {grid.R:g} leaves {deficit:.3g} of the second moment in the tail",
            deficit=deficit), stacklevel=2)
    return RadialFunction(grid, spec(grid.nodes), params.tail_exponent)


def optimal_f(params: Params, M: float, sigma: float, grid: RadialGrid,
              tail_tol: float = 1e-6) -> RadialFunction:
    """f = sigma^(-d/(4p)) (C_M + r^2/sigma)^(-1/(p-1)), so that f^(2p) = B_sigma."""
    u = barenblatt(params, M, sigma, grid, tail_tol)
    p, d = params.p, params.d
    spec = BarenblattSpec(params, M, sigma)
    r = grid.nodes
    vals = sigma ** (-d / (4.0 * p)) * (spec.C_M + r * r / sigma) ** (-1.0 / (p - 1.0))
    return RadialFunction(grid, vals, u.tail_exponent / (2.0 * p))


def _core_width(u: RadialFunction) -> float:
    """sqrt(second moment / mass) from the samples, without tail terms."""
    r = u.grid.nodes
    w = u.grid.weights * r ** (u.grid.d - 1)
    mass = float(np.dot(w, u.values))
    if mass <= 0.0:
        raise DomainError("profile has no mass on the grid")
    return math.sqrt(float(np.dot(w, u.values * r * r)) / mass)


def rescale_mass_preserving(u: RadialFunction, lam: float) -> RadialFunction:
    """u_lam(x) = lam^d u(lam x), resampled on the same grid."""
    if not lam > 0.0:
        raise DomainError(f"scale factor must be positive, got {lam!r}")
    if lam == 1.0:
        return u
    grid = u.grid
    if lam > 1.0:
        width = _core_width(u) / lam
        if np.count_nonzero(grid.nodes <= width) < MIN_CORE_NODES:
            raise ResolutionError(
                f"lambda={lam:g} squeezes the profile to width {width:.3g}, "
                f"below the resolution of the grid near the origin")
    vals = lam ** grid.d * evaluate_at(u, lam * grid.nodes)
    return RadialFunction(grid, vals, u.tail_exponent)


def rescale_homogeneous(u: RadialFunction, lam: float) -> RadialFunction:
    if not lam > 0.0:
        raise DomainError(f"scale factor must be positive, got {lam!r}")
    return lam * u if lam != 1.0 else u


def homogeneous_sigma(params: Params, sigma: float, lam: float) -> float:
    """Best-match scale of lam*B_sigma, which is again a Barenblatt profile."""
    return lam ** params.mass_exponent * sigma
