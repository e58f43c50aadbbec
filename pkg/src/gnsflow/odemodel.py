"""Reduced (entropy, scale, Fisher) system and the Gronwall chain behind the improved inequality.

    f' = -j
    sigma' = -kappa_1 sigma^a f
    j' = -4 j + (closure)

Two closures are provided. ``"frozen"`` (default) takes both steps of the
chain with equality, j' + 4j = kappa_1 kappa_2 sigma_0^(-b) f f', so that
j - 4f - C_md sigma_0^(-b) f^2 is conserved. ``"literal"`` keeps sigma(t) in
the coupling, j' + 4j = kappa_2 j sigma'/sigma; started on the equality
manifold it stalls with j < 4f, see the decisions ledger.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .constants import Params, c_md, k_of_mass, kappas
from .errors import DomainError

ODE_HEADER = ("t", "f", "sigma", "j")
CLOSURES = ("frozen", "literal")


@dataclass(frozen=True)
class OdeState:
    t: float
    f: float
    sigma: float
    j: float
    kappa_1: float
    kappa_2: float


@dataclass
class OdeTrajectory:
    t: np.ndarray
    f: np.ndarray
    sigma: np.ndarray
    j: np.ndarray
    params: Params
    mass: float
    kappa_1: float
    kappa_2: float
    closure: str
    hit_zero: bool          # terminated because f reached 0
    chain: np.ndarray | None = None   # running integral of j' + 4j along the closure

    @property
    def states(self) -> list[OdeState]:
        return [OdeState(*row, self.kappa_1, self.kappa_2)
                for row in zip(self.t, self.f, self.sigma, self.j)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ODE_HEADER)
        for row in zip(self.t, self.f, self.sigma, self.j):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def integrate_system(f0: float, sigma0: float, j0: float, params: Params, t_max: float,
                     closure: str = "frozen", mass: float | None = None, n_out: int = 2001,
                     rtol: float = 1e-12, f_stop: float = 1e-12) -> OdeTrajectory:
    """Integrate the reduced system with an explicit embedded 8(5,3) Runge-Kutta pair.

    Integration stops early when f reaches 0 or drops below ``f_stop * f0``;
    below that level the rounding in j0 - 4 f0 dominates the dynamics.
    """
    if closure not in CLOSURES:
        raise DomainError(f"unknown closure {closure!r}, expected one of {CLOSURES}")
    if not (f0 >= 0.0 and sigma0 > 0.0 and t_max > 0.0):
        raise DomainError("need f0 >= 0, sigma0 > 0, t_max > 0")
    if j0 < 4.0 * f0:
        raise DomainError(f"initial point outside the admissible cone: j0={j0} < 4 f0={4 * f0}")
    M = params.mass if mass is None else mass
    k1, k2 = kappas(params, M)
    a, b = params.a, params.b
    coupling = k1 * k2 * sigma0 ** (-b)

    def rhs(_t, y):
        f, s, j, _ = y
        ds = -k1 * max(s, 0.0) ** a * f
        if closure == "frozen":
            src = -coupling * f * j
        else:
            src = k2 * j * ds / s
        return (-j, ds, src - 4.0 * j, src)

    def hit_zero(_t, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1

    def converged(_t, y):
        return y[0] - f_stop * f0

    converged.terminal = True
    converged.direction = -1

    t_eval = np.linspace(0.0, t_max, n_out)
    scale = max(f0, j0, sigma0, 1e-300)
    if f0 == 0.0 and j0 == 0.0:
        # equilibrium: nothing moves
        z = np.zeros_like(t_eval)
        return OdeTrajectory(t_eval, z, np.full_like(t_eval, sigma0), z.copy(), params, M, k1, k2,
                             closure, False, z.copy())
    # components only decay, so a pure relative error control is appropriate
    sol = solve_ivp(rhs, (0.0, t_max), (f0, sigma0, j0, 0.0), method="DOP853", t_eval=t_eval,
                    events=(hit_zero, converged), rtol=rtol, atol=1e-30 * scale)
    if sol.status < 0:
        raise ArithmeticError(f"ODE integration failed: {sol.message}")
    t, (f, s, j, q) = sol.t, sol.y
    stopped = False
    for k, ev in enumerate(sol.t_events):
        if len(ev):
            ye = sol.y_events[k][0]
            t = np.append(t, ev[0])
            f = np.append(f, 0.0 if k == 0 else ye[0])
            s = np.append(s, ye[1])
            j = np.append(j, ye[2])
            q = np.append(q, ye[3])
            stopped = k == 0
    return OdeTrajectory(t, f, s, j, params, M, k1, k2, closure, stopped, q)


@dataclass(frozen=True)
class GronwallReport:
    f0: float
    sigma0: float
    j0: float
    j0_reconstructed: float      # 4 f0 + (j - 4f)(T) - int_0^T (j' + 4j) dt along the trajectory
    improved_threshold: float    # 4 f0 + C_md sigma0^(-b) f0^2
    improved_residual: float     # threshold - j0_reconstructed; <= tol means the inequality is reproduced
    integration_residual: float  # |j0_reconstructed - j0|
    envelope_excess: float       # max f(t) e^(4t) / f0 - 1
    min_cone_gap: float          # min (j - 4f)
    sigma_end: float
    sigma_bound: float           # lower bound on sigma_inf^b, raised to 1/b
    sigma_residual: float        # sigma_bound^b - sigma_end^b  (<= 0 when it holds)

    def as_dict(self) -> dict:
        from dataclasses import asdict
        return asdict(self)


def gronwall_report(traj: OdeTrajectory, converge_tol: float = 1e-12) -> GronwallReport:
    """Numerical reproduction of the integrated inequality chain and the sigma_inf bound."""
    p = traj.params
    f0, s0, j0 = float(traj.f[0]), float(traj.sigma[0]), float(traj.j[0])
    d, m, b = p.d, p.m, p.b
    K = k_of_mass(p, traj.mass)
    cmd = c_md(p, traj.mass)
    if f0 == 0.0:
        return GronwallReport(f0, s0, j0, j0, 0.0, 0.0, 0.0, 0.0, float(np.min(traj.j - 4 * traj.f)),
                              s0, s0, 0.0)
    if not (traj.hit_zero or traj.f[-1] <= (1.0 + 1e-3) * converge_tol * f0):
        raise DomainError(f"trajectory not converged (f_end/f0={traj.f[-1] / f0:.3g}); increase t_max")
    # int_0^T (j' + 4j) dt was carried along as a fourth component of the integration
    integral = float(traj.chain[-1])
    jT, fT = float(traj.j[-1]), float(traj.f[-1])
    j0_rec = 4.0 * f0 + (jT - 4.0 * fT) - integral
    threshold = 4.0 * f0 + cmd * s0 ** (-b) * f0 * f0
    env = float(np.max(traj.f * np.exp(4.0 * traj.t)) / f0 - 1.0)
    bound_b = s0 ** b - d * d * (1.0 - m) ** 3 / (4.0 * m * K) * f0
    s_end = float(traj.sigma[-1])
    return GronwallReport(
        f0=f0, sigma0=s0, j0=j0,
        j0_reconstructed=j0_rec,
        improved_threshold=threshold,
        improved_residual=threshold - j0_rec,
        integration_residual=abs(j0_rec - j0),
        envelope_excess=env,
        min_cone_gap=float(np.min(traj.j - 4.0 * traj.f)),
        sigma_end=s_end,
        sigma_bound=bound_b ** (1.0 / b) if bound_b > 0.0 else 0.0,
        sigma_residual=bound_b - s_end ** b,
    )


def improved_decay_bound(f0: float, t: np.ndarray, sigma_t: np.ndarray, params: Params,
                         mass: float) -> np.ndarray:
    """Solution of y' = -4y - C_md y^2 / sigma(t)^b, y(0) = f0, at the times t.

    sigma(t) is interpolated linearly between the given samples.
    """
    cmd = c_md(params, mass)
    b = params.b
    t = np.asarray(t, dtype=float)
    sig = np.asarray(sigma_t, dtype=float)

    def rhs(tt, y):
        s = float(np.interp(tt, t, sig))
        return -4.0 * y - cmd * y * y / s ** b

    sol = solve_ivp(rhs, (t[0], t[-1]), [f0], method="DOP853", t_eval=t, rtol=1e-11, atol=1e-18)
    return sol.y[0]


@dataclass(frozen=True)
class EnvelopeReport:
    max_excess_improved: float    # max (F_flow - y_improved); <= 0 up to solver error
    max_excess_exponential: float # max (F_flow / (F0 e^{-4t}) - 1)
    ode_minus_flow: np.ndarray    # f_ode(t) - F_flow(t) at the saves, closure trajectory from the flow's start


def comparison_envelope(trace, closure: str = "frozen") -> EnvelopeReport:
    """Compare a flow trace with the decay envelopes the reduced models predict."""
    t = trace.t
    F = trace.column("entropy")
    S = trace.column("sigma")
    J = trace.column("fisher")
    M = trace.states[0].mass
    p = trace.params
    y = improved_decay_bound(F[0], t, S, p, M)
    traj = integrate_system(F[0], S[0], J[0], p, float(t[-1]), closure=closure, mass=M,
                            n_out=len(t))
    f_ode = np.interp(t, traj.t, traj.f)
    return EnvelopeReport(
        max_excess_improved=float(np.max(F - y)),
        max_excess_exponential=float(np.max(F / (F[0] * np.exp(-4.0 * t)) - 1.0)),
        ode_minus_flow=f_ode - F,
    )
