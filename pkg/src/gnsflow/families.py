"""Seeded synthetic profile families used by the property sweeps and the CLI."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .constants import Params
from .errors import DomainError
from .profiles import BarenblattSpec
from .radial import RadialFunction, RadialGrid

FAMILIES = ("two-scale-mix", "tilted-power", "compact-bump")


@dataclass(frozen=True)
class FamilySpec:
    name: str
    trials: int = 200
    seed: int = 42

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise DomainError(f"unknown family {self.name!r}; expected one of {', '.join(FAMILIES)}")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")


def two_scale_mix(params: Params, grid: RadialGrid, c: float, s1: float, s2: float, M: float) -> RadialFunction:
    """c B_s1 + (1-c) B_s2, both at mass M."""
    r = grid.nodes
    vals = c * BarenblattSpec(params, M, s1)(r) + (1.0 - c) * BarenblattSpec(params, M, s2)(r)
    return RadialFunction(grid, vals, params.tail_exponent)


def tilted_power(params: Params, grid: RadialGrid, eps: float, sigma: float, M: float) -> RadialFunction:
    """B_sigma (1 + eps r^2/(1+r^2)); eps > -1 keeps it positive."""
    if not eps > -1.0:
        raise DomainError("tilt must exceed -1")
    r = grid.nodes
    vals = BarenblattSpec(params, M, sigma)(r) * (1.0 + eps * r * r / (1.0 + r * r))
    return RadialFunction(grid, vals, params.tail_exponent)


def compact_bump(params: Params, grid: RadialGrid, h: float, width: float, sigma: float, M: float) -> RadialFunction:
    """B_sigma + h (1 - r^2/width^2)_+^2."""
    r = grid.nodes
    bump = np.clip(1.0 - (r / width) ** 2, 0.0, None) ** 2
    vals = BarenblattSpec(params, M, sigma)(r) + h * bump
    return RadialFunction(grid, vals, params.tail_exponent)


def reference_mix(params: Params, grid: RadialGrid, M: float | None = None) -> RadialFunction:
    """(B_1 + B_4)/2 at mass M (default: the reference mass of ``params``)."""
    return two_scale_mix(params, grid, 0.5, 1.0, 4.0, params.mass if M is None else M)


def _log_uniform(rng, lo, hi):
    return math.exp(rng.uniform(math.log(lo), math.log(hi)))


def generate_family(spec: FamilySpec, params: Params, grid: RadialGrid) -> list[RadialFunction]:
    """Deterministic list of ``spec.trials`` positive profiles with finite second moment.

    Member 0 of ``two-scale-mix`` is the reference mixture (c, s1, s2) = (1/2, 1, 4).
    """
    rng = np.random.default_rng(spec.seed)
    M0 = params.mass
    out = []
    for k in range(spec.trials):
        M = M0 * _log_uniform(rng, 0.5, 2.0)
        if spec.name == "two-scale-mix":
            c = rng.uniform(0.1, 0.9)
            s1 = _log_uniform(rng, 0.3, 3.0)
            s2 = s1 * _log_uniform(rng, 1.2, 6.0)
            if k == 0:
                c, s1, s2, M = 0.5, 1.0, 4.0, M0
            out.append(two_scale_mix(params, grid, c, s1, s2, M))
        elif spec.name == "tilted-power":
            eps = rng.uniform(-0.6, 1.5)
            sigma = _log_uniform(rng, 0.5, 3.0)
            out.append(tilted_power(params, grid, eps, sigma, M))
        else:
            sigma = _log_uniform(rng, 0.5, 3.0)
            peak = BarenblattSpec(params, M, sigma)(0.0)
            h = float(peak) * rng.uniform(0.05, 1.0)
            width = rng.uniform(0.5, 3.0) * math.sqrt(sigma)
            out.append(compact_bump(params, grid, h, width, sigma, M))
    return out


def mixed_family(params: Params, grid: RadialGrid, trials: int = 200, seed: int = 42) -> list[RadialFunction]:
    """``trials`` members split as evenly as possible over the three families."""
    members = []
    for i, name in enumerate(FAMILIES):
        n = trials // 3 + (1 if i < trials % 3 else 0)
        members.extend(generate_family(FamilySpec(name, n, seed + i), params, grid))
    return members


def family_digest(members) -> str:
    """SHA-256 of the concatenated samples, for determinism checks."""
    h = hashlib.sha256()
    for u in members:
        h.update(np.ascontiguousarray(u.values).tobytes())
    return h.hexdigest()
