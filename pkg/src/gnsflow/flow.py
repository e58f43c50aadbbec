"""Confined fast diffusion with the Barenblatt scale tied to the second moment.

    u_t + div(u (sigma^a grad u^(m-1) - 2x)) = 0,   sigma(t) = int |x|^2 u / K_M

Discretisation: vertex-centred finite volumes on the radial grid (faces at the
midpoints in the grid variable s), written in terms of the potential

    Phi = sigma^a u^(m-1) - r^2,   flux = u dPhi/dr,

with upwinded face densities. A sampled Barenblatt profile has constant Phi,
so it is stationary to rounding error. Each step is linearised backward
Euler: Phi(u + delta) ~ Phi(u) - c delta with c = (1-m) sigma^a u^(m-2), which
gives one tridiagonal solve per step. sigma is updated after the step (or kept
fixed when ``freeze_sigma`` is set).
"""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .constants import Params, c_md, k_of_mass, kappas
from .errors import DomainError, StiffnessError
from .functionals import drift_residual, fisher_information, relative_entropy
from .radial import RadialFunction, RadialGrid, integrate_radial, spline_derivative_values

TRACE_HEADER = ("t", "sigma", "mass", "second_moment", "entropy", "fisher", "remainder")
INITIAL_FLOOR = 1e-30


@dataclass
class FlowControls:
    dt_max: float = 1e-3
    dt_min: float = 1e-10
    cfl: float = 0.4
    freeze_sigma: bool = False
    floor: float = INITIAL_FLOOR


@dataclass(frozen=True)
class FlowState:
    t: float
    u: RadialFunction
    sigma: float
    mass: float
    m2: float
    entropy: float = math.nan
    fisher: float = math.nan
    remainder: float = math.nan

    def row(self) -> tuple:
        return (self.t, self.sigma, self.mass, self.m2, self.entropy, self.fisher, self.remainder)


@dataclass
class FlowTrace:
    states: list
    params: Params
    K_M: float
    kappa_1: float
    kappa_2: float
    C_md: float
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        idx = TRACE_HEADER.index(name)
        return np.array([s.row()[idx] for s in self.states])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def write_csv(self, path):
        rows = [TRACE_HEADER] + [[repr(float(v)) for v in s.row()] for s in self.states]
        _atomic_write(path, _csv_text(rows))

    def metadata(self) -> dict:
        p = self.params
        return {
            "d": p.d, "m": p.m, "p": p.p,
            "K_M": self.K_M, "kappa_1": self.kappa_1, "kappa_2": self.kappa_2, "C_md": self.C_md,
            **self.meta,
        }

    def write_metadata(self, path):
        _atomic_write(path, json.dumps(self.metadata(), indent=2, default=float) + "\n")


def _csv_text(rows) -> str:
    import io
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _atomic_write(path, text: str):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- spatial operator ---------------------------------------------------------------

class Solver:
    """Geometry and linearised implicit step for one grid and parameter set."""

    def __init__(self, params: Params, grid: RadialGrid, K_M: float):
        if params.d < 2 or grid.d != params.d:
            raise DomainError(f"the flow module needs d >= 2 and a matching grid (d={params.d}, grid d={grid.d})")
        if not params.m > params.m_1:
            raise DomainError(f"flow needs m in (m_1, 1), got m={params.m}")
        self.params = params
        self.grid = grid
        self.K_M = K_M
        r = grid.nodes
        d = grid.d
        s = np.linspace(0.0, 1.0, grid.n)
        h = s[1] - s[0]
        faces = grid.R * (0.5 * (s[1:] + s[:-1])) ** grid.q
        # trapezoid-in-s volumes: the conserved sum is then a high-order mass quadrature
        vol = grid.sphere_factor * r ** (d - 1) * grid.q * grid.R * s ** (grid.q - 1.0) * h
        vol[-1] *= 0.5
        vol[0] = grid.sphere_factor * faces[0] ** d / d
        self.volumes = vol
        self.areas = grid.sphere_factor * faces ** (d - 1)        # interior faces only
        self.dr = np.diff(r)
        self.r2 = r * r

    def potential(self, u: np.ndarray, sigma: float) -> np.ndarray:
        return sigma ** self.params.a * u ** (self.params.m - 1.0) - self.r2

    def max_dt(self, u: np.ndarray, sigma: float, cfl: float) -> float:
        """CFL bound 0.4 min dr/|velocity| for the drift part."""
        g = np.abs(np.diff(self.potential(u, sigma))) / self.dr
        if not np.any(g > 0.0):
            return math.inf
        return cfl * float(np.min(self.dr[g > 0.0] / g[g > 0.0]))

    def advance(self, u: np.ndarray, sigma: float, dt: float) -> np.ndarray:
        """One linearised backward-Euler step; may return negative values (caller rejects)."""
        m, a = self.params.m, self.params.a
        n = u.size
        phi = self.potential(u, sigma)
        c = (1.0 - m) * sigma ** a * u ** (m - 2.0)
        g = np.diff(phi) / self.dr                    # radial velocity dPhi/dr at faces
        ubar = 0.5 * (u[:-1] + u[1:])
        flux0 = ubar * g                              # outward mass flux through face k+1/2
        # flux(delta) = flux0 + A_l delta_k + A_r delta_{k+1}
        coef = ubar / self.dr
        A_l = coef * c[:-1] + 0.5 * g
        A_r = -coef * c[1:] + 0.5 * g
        # V_i delta_i / dt = area_{i-1/2} flux_{i-1/2} - area_{i+1/2} flux_{i+1/2}
        S = self.areas
        diag = self.volumes / dt
        main = diag.copy()
        upper = np.zeros(n)
        lower = np.zeros(n)
        rhs = np.zeros(n)
        # face k between node k and k+1 contributes -S flux to node k and +S flux to node k+1
        main[:-1] += S * A_l
        upper[1:] += S * A_r                          # coefficient of delta_{k+1} in row k
        main[1:] -= S * A_r
        lower[:-1] -= S * A_l                         # coefficient of delta_k in row k+1
        rhs[:-1] -= S * flux0
        rhs[1:] += S * flux0
        ab = np.vstack([upper, main, lower])
        delta = solve_banded((1, 1), ab, rhs)
        return u + delta


# -- diagnostics -------------------------------------------------------------------

def remainder(u: RadialFunction, sigma: float, params: Params) -> float:
    """r = 2 int u^m (|grad z|^2 - (1-m) (div z)^2) for z = w(r) x/|x|."""
    d, m = params.d, params.m
    if d < 2 or u.grid.d != d:
        raise DomainError("remainder is restricted to d >= 2 on a matching grid")
    w = drift_residual(u, sigma, params)
    dw = spline_derivative_values(u.grid, w)
    r = u.grid.nodes
    wr = np.zeros_like(w)
    wr[1:] = w[1:] / r[1:]
    wr[0] = dw[0]
    q = dw * dw + (d - 1) * wr * wr - (1.0 - m) * (dw + (d - 1) * wr) ** 2
    dens = u.values ** m * q
    dens[0] = 0.0 if d > 1 else dens[0]
    return 2.0 * integrate_radial(RadialFunction(u.grid, dens, m * u.tail_exponent))


def diagnostics(state: FlowState, params: Params) -> tuple[float, float, float, float]:
    """(f, j, sigma, r) at the state's own sigma."""
    if params.d < 2:
        raise DomainError("diagnostics are restricted to d >= 2")
    u, sigma = state.u, state.sigma
    f = relative_entropy(u, sigma, params, state.mass)
    j = fisher_information(u, sigma, params)
    return f, j, sigma, remainder(u, sigma, params)


def _measure(t, u: RadialFunction, sigma, params, full=True) -> FlowState:
    mass = integrate_radial(u)
    m2 = integrate_radial(u, 2)
    st = FlowState(t=t, u=u, sigma=sigma, mass=mass, m2=m2)
    if not full:
        return st
    f, j, _, rem = diagnostics(st, params)
    return FlowState(t=t, u=u, sigma=sigma, mass=mass, m2=m2, entropy=f, fisher=j, remainder=rem)


def initial_state(u0: RadialFunction, params: Params, controls: FlowControls | None = None) -> FlowState:
    controls = controls or FlowControls()
    if not u0.is_nonnegative():
        raise DomainError("initial datum must be non-negative")
    vals = np.maximum(u0.values, controls.floor * float(np.max(u0.values)))
    u = RadialFunction(u0.grid, vals, u0.tail_exponent)
    mass = integrate_radial(u)
    sigma = integrate_radial(u, 2) / k_of_mass(params, mass)
    return _measure(0.0, u, sigma, params)


def _accept(u_old: RadialFunction, vals: np.ndarray) -> RadialFunction:
    u = RadialFunction(u_old.grid, vals)
    # keep a sane tail: must stay second-moment integrable
    if not u.tail_exponent < -(u.grid.d + 2.0):
        u = RadialFunction(u_old.grid, vals, u_old.tail_exponent)
    return u


def step(state: FlowState, dt: float, params: Params, K_M: float | None = None,
         controls: FlowControls | None = None, solver: Solver | None = None) -> FlowState:
    """Advance by exactly dt (sub-stepping on rejection); diagnostics refreshed."""
    controls = controls or FlowControls()
    if K_M is None:
        K_M = k_of_mass(params, state.mass)
    solver = solver or Solver(params, state.u.grid, K_M)
    u, sigma = _integrate(solver, state.u, state.sigma, dt, controls, dt_hist=None)
    return _measure(state.t + dt, u, sigma, params)


def _integrate(solver: Solver, u: RadialFunction, sigma: float, span: float,
               controls: FlowControls, dt_hist, t0: float = 0.0):
    """March over a time span of length ``span``."""
    done = 0.0
    dt_try = controls.dt_max
    while span - done > 1e-14 * max(1.0, span):
        dt = min(dt_try, controls.dt_max, solver.max_dt(u.values, sigma, controls.cfl), span - done)
        while True:
            vals = solver.advance(u.values, sigma, dt)
            if np.all(vals > 0.0) and np.all(np.isfinite(vals)):
                break
            dt *= 0.5
            if dt < controls.dt_min:
                state = FlowState(t=t0 + done, u=u, sigma=sigma, mass=math.nan, m2=math.nan)
                raise StiffnessError(f"step rejected below dt_min at t={t0 + done:.6g}", state=state)
        u = _accept(u, vals)
        if not controls.freeze_sigma:
            sigma = integrate_radial(u, 2) / solver.K_M
        done += dt
        if dt_hist is not None:
            dt_hist.append(dt)
        dt_try = 2.0 * dt
    return u, sigma


def run(u0: RadialFunction, params: Params, t_max: float, save_dt: float,
        controls: FlowControls | None = None) -> FlowTrace:
    controls = controls or FlowControls()
    if not (t_max > 0.0 and save_dt > 0.0):
        raise DomainError("t_max and save_dt must be positive")
    st = initial_state(u0, params, controls)
    K_M = k_of_mass(params, st.mass)
    solver = Solver(params, u0.grid, K_M)
    kap1, kap2 = kappas(params, st.mass)
    states = [st]
    dts: list[float] = []
    tails = [_tail_report(st)]
    n_saves = int(round(t_max / save_dt))
    u, sigma = st.u, st.sigma
    for k in range(1, n_saves + 1):
        t_target = min(k * save_dt, t_max)
        u, sigma = _integrate(solver, u, sigma, t_target - states[-1].t, controls, dts, states[-1].t)
        st = _measure(t_target, u, sigma, params)
        states.append(st)
        tails.append(_tail_report(st))
    meta = {
        "cells": u0.grid.n, "R": u0.grid.R, "q": u0.grid.q,
        "t_max": t_max, "save_dt": save_dt, "freeze_sigma": controls.freeze_sigma,
        "steps": len(dts), "dt_min_used": min(dts) if dts else None, "dt_max_used": max(dts) if dts else None,
        "truncation": tails,
    }
    return FlowTrace(states=states, params=params, K_M=K_M, kappa_1=kap1, kappa_2=kap2,
                     C_md=c_md(params, st.mass), meta=meta)


def _tail_report(st: FlowState) -> dict:
    """Mass and second moment that the quadrature adds beyond R."""
    u = st.u
    inner_m = integrate_radial(u, 0, tail=False)
    inner_2 = integrate_radial(u, 2, tail=False)
    return {"t": st.t, "tail_mass": st.mass - inner_m, "tail_second_moment": st.m2 - inner_2}


# -- checks against the differential relations -------------------------------------

@dataclass(frozen=True)
class RelationReport:
    entropy_rate: float          # max |dF/dt + I| / max I
    sigma_rate: float            # max |dsigma/dt + kappa_1 sigma^a F| / max |dsigma/dt|
    fisher_ineq: float           # max (dj/dt + 4j - kappa_2 j sigma'/sigma) / j  (should be <= 0 up to FD error)
    fisher_ineq_exact: float     # max of a d (1-m)(j-4f) sigma'/sigma - r, evaluated without differencing
    balance: float               # max |dj/dt + 4j - a sigma'/sigma (j - 4d(1-m) f) + r| / max j
    min_remainder: float
    fisher_gap: float            # min (j - 4f)

    def as_dict(self) -> dict:
        return asdict(self)


def verify_ode_relations(trace: FlowTrace) -> RelationReport:
    if len(trace.states) < 3:
        raise DomainError("need at least 3 snapshots")
    p = trace.params
    a, d, m = p.a, p.d, p.m
    t = trace.t
    F = trace.column("entropy")
    J = trace.column("fisher")
    S = trace.column("sigma")
    Rm = trace.column("remainder")
    dF = np.gradient(F, t)[1:-1]
    dS = np.gradient(S, t)[1:-1]
    dJ = np.gradient(J, t)[1:-1]
    Fi, Ji, Si, Ri = F[1:-1], J[1:-1], S[1:-1], Rm[1:-1]

    def _rel(num, den):
        # absolute once the reference scale itself is at rounding level (stationary traces)
        den = max(float(np.max(np.abs(den))), 1e-9)
        return float(np.max(np.abs(num))) / den

    ent = _rel(dF + Ji, J)
    sig = _rel(dS + trace.kappa_1 * Si ** a * Fi, dS)
    lhs = dJ + 4.0 * Ji - trace.kappa_2 * Ji * dS / Si
    with np.errstate(invalid="ignore", divide="ignore"):
        ineq = np.where(Ji > 0.0, lhs / Ji, 0.0)
    sdot = -trace.kappa_1 * S ** a * F
    exact = a * d * (1.0 - m) * (J - 4.0 * F) * sdot / S - Rm
    bal = dJ + 4.0 * Ji - a * dS / Si * (Ji - 4.0 * d * (1.0 - m) * Fi) + Ri
    return RelationReport(
        entropy_rate=ent,
        sigma_rate=sig,
        fisher_ineq=float(np.max(ineq)),
        fisher_ineq_exact=float(np.max(exact)),
        balance=_rel(bal, J),
        min_remainder=float(np.min(Rm)),
        fisher_gap=float(np.min(J - 4.0 * F)),
    )


def sigma_infinity_bound(u0: RadialFunction, params: Params) -> float:
    """Lower bound on lim sigma(t) from the initial datum alone.

    sigma_inf^b >= (d/2)(m - m_c) sigma_0^b + d^2 (1-m)^2 / (4 m K_M) int u0^m
    """
    d, m, b = params.d, params.m, params.b
    M = integrate_radial(u0)
    K = k_of_mass(params, M)
    s0 = integrate_radial(u0, 2) / K
    um = integrate_radial(RadialFunction(u0.grid, u0.values ** m, m * u0.tail_exponent))
    val = 0.5 * d * (m - params.m_c) * s0 ** b + d * d * (1.0 - m) ** 2 / (4.0 * m * K) * um
    return val ** (1.0 / b)


def sigma_infinity_estimate(trace: FlowTrace) -> float:
    """sigma at the last save minus the largest further decrease compatible with f <= f_T e^(-4(t-T))."""
    last = trace.states[-1]
    return last.sigma - trace.kappa_1 * last.sigma ** trace.params.a * last.entropy / 4.0
