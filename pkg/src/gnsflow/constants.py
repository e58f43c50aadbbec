"""Exponents and closed-form constants of the (d, p) Gagliardo-Nirenberg family.

Every quantity is a pure function of ``(d, p)`` and a reference mass. Gamma
factors are evaluated in the log domain because ``Gamma(2/(p-1))`` overflows
long before ``p`` gets close to 1.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import integrate, optimize

from .errors import CriticalCaseError, DomainError, QuadratureError

# Keys of the exported JSON object / CSV row, in order.
EXPORT_KEYS = (
    "m_star", "c_m", "k_m", "sigma_star", "c_gn", "k_pd", "c_pd", "c_ck",
    "frak_c", "c_md", "kappa_1", "kappa_2", "normalization_rhs",
)


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for x > 0."""
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"log_gamma requires 0 < x < inf, got {x!r}")
    return math.lgamma(x)


@dataclass(frozen=True)
class Params:
    """All exponents derived from (d, p); the single source of truth for m, gamma, ..."""

    d: int
    p: float
    m: float
    gamma: float
    theta: float
    m_c: float
    m_1: float
    m_tilde_1: float
    alpha: float
    beta: float
    eta: float
    mass: float

    @property
    def a(self) -> float:
        """Diffusion scaling exponent d(m - m_c)/2 attached to sigma in the flow."""
        return 0.5 * self.d * (self.m - self.m_c)

    @property
    def b(self) -> float:
        """Entropy scaling exponent d(1 - m)/2; note a + b = 1."""
        return 0.5 * self.d * (1.0 - self.m)

    @property
    def mass_exponent(self) -> float:
        """Exponent 2(1-m)/(d(m-m_c)) of C_M = C_1 M^(-exponent)."""
        return 2.0 * (1.0 - self.m) / (self.d * (self.m - self.m_c))

    @property
    def tail_exponent(self) -> float:
        """Power-law decay rate 2/(m-1) of every Barenblatt profile."""
        return 2.0 / (self.m - 1.0)


def _check_dp(d, p):
    if int(d) != d or d < 2:
        raise DomainError(f"dimension must be an integer >= 2, got d={d!r}")
    if not p > 1.0 or not math.isfinite(p):
        raise DomainError(f"exponent must satisfy 1 < p < inf, got p={p!r}")
    if d >= 3:
        p_crit = d / (d - 2.0)
        if abs(p - p_crit) <= 1e-14 * p_crit:
            raise CriticalCaseError(
                f"critical case unsupported: p = d/(d-2) = {p_crit:g} for d={d}")
        if p > p_crit:
            raise DomainError(f"exponent must satisfy p < d/(d-2) = {p_crit:g} for d={d}, got p={p!r}")


def m_from_p(p: float) -> float:
    return (p + 1.0) / (2.0 * p)


def p_from_m(m: float) -> float:
    return 1.0 / (2.0 * m - 1.0)


def log_m_star(d: int, p: float) -> float:
    """log of M* = integral of (1+|x|^2)^(-2p/(p-1)) over R^d."""
    m = m_from_p(p)
    m_c = (d - 2.0) / d
    return (0.5 * d * math.log(math.pi)
            + log_gamma(d * (m - m_c) / (2.0 * (1.0 - m)))
            - log_gamma(1.0 / (1.0 - m)))


def derive_params(d: int, p: float, mass: float | str | None = None) -> Params:
    """Build :class:`Params` for ``(d, p)``.

    ``mass`` may be a positive number, or ``None`` / ``"M*"`` for the reference
    mass M*, for which C_M = 1.
    """
    _check_dp(d, p)
    d = int(d)
    p = float(p)
    m = m_from_p(p)
    if mass is None or (isinstance(mass, str) and mass.strip().lower() in ("m*", "mstar", "m_star")):
        mass = math.exp(log_m_star(d, p))
    else:
        mass = float(mass)
        if not mass > 0.0 or not math.isfinite(mass):
            raise DomainError(f"mass must be positive and finite, got {mass!r}")
    m_c = (d - 2.0) / d
    return Params(
        d=d,
        p=p,
        m=m,
        gamma=(d + 2.0 - p * (d - 2.0)) / (d - p * (d - 4.0)),
        theta=(p - 1.0) / p * d / (d + 2.0 - p * (d - 2.0)),
        m_c=m_c,
        m_1=(d - 1.0) / d,
        m_tilde_1=d / (d + 2.0),
        alpha=d / p + 2.0 - d,
        beta=d * (p - 1.0) / (2.0 * p),
        eta=1.0 / (p * (d + 2.0 - p * (d - 2.0))),
        mass=mass,
    )


def params_from_m(d: int, m: float, mass=None) -> Params:
    """Same as :func:`derive_params` but parameterized by the diffusion exponent."""
    if not 0.5 < m < 1.0:
        raise DomainError(f"diffusion exponent must satisfy 1/2 < m < 1, got m={m!r}")
    return derive_params(d, p_from_m(m), mass)


# -- mass-dependent Barenblatt constants -------------------------------------------

def c_of_mass(params: Params, mass: float) -> float:
    """C_M = (M*/M)^(2(1-m)/(d(m-m_c)))."""
    return math.exp(params.mass_exponent * (log_m_star(params.d, params.p) - math.log(mass)))


def c1(params: Params) -> float:
    return math.exp(params.mass_exponent * log_m_star(params.d, params.p))


def k1(params: Params) -> float:
    d, m = params.d, params.m
    return d * (1.0 - m) / ((d + 2.0) * m - d) * c1(params)


def k_of_mass(params: Params, mass: float) -> float:
    """K_M = second moment of B_1 at mass M = K_1 M^gamma."""
    return k1(params) * mass ** params.gamma


def barenblatt_m_integral(params: Params, mass: float) -> float:
    """Integral of B_1^m at mass M, = 2m/((d+2)m-d) C_1 M^gamma."""
    d, m = params.d, params.m
    return 2.0 * m / ((d + 2.0) * m - d) * c1(params) * mass ** params.gamma


def c_md(params: Params, mass: float) -> float:
    """Constant of the improved entropy / entropy-production inequality (mass dependent)."""
    d, m = params.d, params.m
    return d ** 3 / (2.0 * m * k_of_mass(params, mass)) * (m - params.m_c) * (m - params.m_1) * (1.0 - m) ** 2


def kappas(params: Params, mass: float) -> tuple[float, float]:
    d, m = params.d, params.m
    kappa_1 = 2.0 * d * (1.0 - m) ** 2 / (m * k_of_mass(params, mass))
    kappa_2 = 0.5 * (m - params.m_c) * (m - params.m_1) * d * d
    return kappa_1, kappa_2


def sigma_star(params: Params, numerator: str = "proof") -> float:
    """Scale of the normalized problem.

    ``numerator="proof"`` solves m(1-m)/(2m-1)^2 sigma^a = d(m-m_1)/(1-m), i.e.
    numerator d - p(d-2). ``"printed"`` uses d + 2 - p(d-2) instead and exists
    only as a negative control.
    """
    d, p = params.d, params.p
    if numerator == "proof":
        top = d - p * (d - 2.0)
    elif numerator == "printed":
        top = d + 2.0 - p * (d - 2.0)
    else:
        raise DomainError(f"unknown sigma_star numerator {numerator!r}")
    base = 4.0 * top / ((p - 1.0) ** 2 * (p + 1.0))
    return base ** (4.0 * p / (d - p * (d - 4.0)))


def log_c_gn(params: Params) -> float:
    """log of the optimal constant of the scale-invariant inequality."""
    d, p, eta = params.d, params.p, params.eta
    s = (p + 1.0) / (p - 1.0)
    return (eta * ((p + 1.0) * math.log(p - 1.0) - (d + 1.0 - p * (d - 1.0)) * math.log(p + 1.0))
            + math.log((d + 2.0 - p * (d - 2.0)) / (2.0 * (p - 1.0))) / (2.0 * p)
            + (p - 1.0) * eta * (log_gamma(s) - 0.5 * d * math.log(2.0 * math.pi * d) - log_gamma(s - 0.5 * d)))


def k_pd_mform(params: Params, sig_star: float) -> float:
    d, m, g = params.d, params.m, params.gamma
    ms = math.exp(log_m_star(d, params.p))
    return (((2.0 * m - 1.0) / (1.0 - m)) ** 2 * d * (m - params.m_c) / ((d + 2.0) * m - d)
            * ms ** (1.0 - g) * sig_star ** (-d * (m - params.m_1)))


def k_pd_pform(params: Params, sig_star: float) -> float:
    """p-form of K_pd with the sigma* exponent d(p-1)/(2p) - 1."""
    d, p, g = params.d, params.p, params.gamma
    ms = math.exp(log_m_star(d, p))
    return (4.0 / (p - 1.0) ** 2 * (d - p * (d - 4.0)) / (d + 2.0 - p * (d - 2.0))
            * ms ** (1.0 - g) * sig_star ** (d * (p - 1.0) / (2.0 * p) - 1.0))


def c_pd_mform(params: Params, sig_star: float) -> float:
    d, m, g = params.d, params.m, params.gamma
    ms = math.exp(log_m_star(d, params.p))
    return ((2.0 * m - 1.0) ** 2 / (8.0 * (1.0 - m) ** 2) * ((d + 2.0) * m - d) * d * d
            * (m - params.m_c) * (m - params.m_1) * ms ** (g - 1.0) / sig_star)


def c_pd_pform(params: Params, sig_star: float) -> float:
    d, p, g = params.d, params.p, params.gamma
    ms = math.exp(log_m_star(d, p))
    return ((d - p * (d - 4.0)) * (d - p * (d - 2.0)) * (d + 2.0 - p * (d - 2.0))
            / (16.0 * p ** 3 * (p - 1.0) ** 2) * ms ** (g - 1.0) / sig_star)


def lambda_optimum(params: Params) -> float:
    """Minimum of lam^alpha + lam^(-beta) over lam > 0."""
    al, be = params.alpha, params.beta
    s = al + be
    return s / (al ** (al / s) * be ** (be / s))


@dataclass(frozen=True)
class ConstantSet:
    M_star: float
    C_1: float
    K_1: float
    C_M: float
    K_M: float
    B1m_integral: float
    sigma_star: float
    C_GN: float
    K_pd: float
    C_pd: float
    C_CK: float
    frak_C: float
    C_md: float
    kappa_1: float
    kappa_2: float
    normalization_rhs: float

    def export(self) -> dict:
        """Flat dict with the public key names, in export order."""
        values = (self.M_star, self.C_M, self.K_M, self.sigma_star, self.C_GN, self.K_pd,
                  self.C_pd, self.C_CK, self.frak_C, self.C_md, self.kappa_1, self.kappa_2,
                  self.normalization_rhs)
        return dict(zip(EXPORT_KEYS, values))

    def to_json(self) -> str:
        return json.dumps(self.export(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(EXPORT_KEYS)
        writer.writerow([repr(v) for v in self.export().values()])
        return buf.getvalue()


def compute_constants(params: Params, sigma_star_numerator: str = "proof") -> ConstantSet:
    """Evaluate every closed-form constant for ``params`` (mass = ``params.mass``)."""
    d, p, g = params.d, params.p, params.gamma
    M = params.mass
    m_star = math.exp(log_m_star(d, p))
    s_star = sigma_star(params, sigma_star_numerator)
    kap1, kap2 = kappas(params, M)
    cpd = c_pd_mform(params, s_star)
    cck = ((p - 1.0) / (p + 1.0) * (d + 2.0 - p * (d - 2.0)) / (32.0 * p)
           * s_star ** (d * (p - 1.0) / (4.0 * p)) * m_star ** (1.0 - g))
    return ConstantSet(
        M_star=m_star,
        C_1=c1(params),
        K_1=k1(params),
        C_M=c_of_mass(params, M),
        K_M=k_of_mass(params, M),
        B1m_integral=barenblatt_m_integral(params, M),
        sigma_star=s_star,
        C_GN=math.exp(log_c_gn(params)),
        K_pd=k_pd_mform(params, s_star),
        C_pd=cpd,
        C_CK=cck,
        frak_C=cpd * cck ** 2,
        C_md=c_md(params, M),
        kappa_1=kap1,
        kappa_2=kap2,
        # second moment / mass^gamma of any profile whose matched scale is sigma*
        normalization_rhs=s_star * k1(params),
    )


# -- independent cross-checks ------------------------------------------------------

@dataclass(frozen=True)
class ConsistencyReport:
    appendix_identity: float      # (a) relative residual of K_pd C_GN^(2 p gamma) vs lambda optimum
    appendix_lhs: float
    appendix_rhs: float
    lambda_star: float            # (b) numerical minimizer for F_p
    lambda_formula: float         #     sigma*^(-1/2)
    k_pd_oracle: float
    k_pd_oracle_residual: float
    gn_quotient: float            # (c) GN quotient at F_p
    gn_quotient_residual: float
    k_pd_form_residual: float     # (d)
    c_pd_form_residual: float
    ipp_lhs: float                # (e) d * int B_1^m
    ipp_rhs: float                #     2m/(1-m) K_M
    ipp_residual: float

    def as_dict(self) -> dict:
        return asdict(self)


def _radial_quad(fn, d, tol):
    sphere = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    total, err = 0.0, 0.0
    # split at r = 1 so the algebraic tail is handled by the infinite-range transform
    for lo, hi in ((0.0, 1.0), (1.0, np.inf)):
        val, e = integrate.quad(lambda r: fn(r) * r ** (d - 1), lo, hi, epsabs=0.0, epsrel=tol, limit=400)
        total += val
        err += e
    if err > 100.0 * tol * abs(total) + 1e-300:
        raise QuadratureError(f"radial quadrature did not converge (error estimate {err:.3g})", achieved=err)
    return sphere * total


def optimal_profile_integrals(params: Params, tol: float = 1e-12) -> tuple[float, float, float]:
    """(int |grad F_p|^2, int F_p^(p+1), int F_p^(2p)) by adaptive quadrature of the exact profile."""
    d, p = params.d, params.p
    e = -1.0 / (p - 1.0)
    grad2 = _radial_quad(lambda r: (2.0 * e * r * (1.0 + r * r) ** (e - 1.0)) ** 2, d, tol)
    lp1 = _radial_quad(lambda r: (1.0 + r * r) ** (e * (p + 1.0)), d, tol)
    l2p = _radial_quad(lambda r: (1.0 + r * r) ** (2.0 * e * p), d, tol)
    return grad2, lp1, l2p


def cross_check_constants(params: Params, tol: float = 1e-12) -> ConsistencyReport:
    """Residuals tying the closed forms to each other and to quadrature of F_p."""
    cs = compute_constants(params)
    d, p, m, g = params.d, params.p, params.m, params.gamma
    # (a)
    lhs = cs.K_pd * cs.C_GN ** (2.0 * p * g)
    rhs = lambda_optimum(params)
    # (b) golden-section minimization of lam -> a lam^alpha + b lam^-beta
    a_, b_, c_ = optimal_profile_integrals(params, tol)
    al, be = params.alpha, params.beta

    def energy(log_lam):
        lam = math.exp(log_lam)
        return a_ * lam ** al + b_ * lam ** (-be)

    res = optimize.minimize_scalar(energy, bracket=(-1.0, 1.0), method="golden",
                                   options={"xtol": 1e-12})
    lam_star = math.exp(res.x)
    k_oracle = energy(res.x) / c_ ** g
    # (c)
    th = params.theta
    quotient = c_ ** (1.0 / (2.0 * p)) / (a_ ** (th / 2.0) * b_ ** ((1.0 - th) / (p + 1.0)))
    # (e)
    ipp_l = d * cs.B1m_integral
    ipp_r = 2.0 * m / (1.0 - m) * cs.K_M
    return ConsistencyReport(
        appendix_identity=abs(lhs / rhs - 1.0),
        appendix_lhs=lhs,
        appendix_rhs=rhs,
        lambda_star=lam_star,
        lambda_formula=cs.sigma_star ** -0.5,
        k_pd_oracle=k_oracle,
        k_pd_oracle_residual=abs(k_oracle / cs.K_pd - 1.0),
        gn_quotient=quotient,
        gn_quotient_residual=abs(quotient / cs.C_GN - 1.0),
        k_pd_form_residual=abs(k_pd_pform(params, cs.sigma_star) / cs.K_pd - 1.0),
        c_pd_form_residual=abs(c_pd_pform(params, cs.sigma_star) / cs.C_pd - 1.0),
        ipp_lhs=ipp_l,
        ipp_rhs=ipp_r,
        ipp_residual=abs(ipp_l / ipp_r - 1.0),
    )


def endpoint_scan(d: int, p_grid) -> list[dict]:
    """C_pd, C_CK and K_pd over a grid of p; inadmissible points are flagged, not raised."""
    rows = []
    for p in p_grid:
        row = {"p": float(p), "c_pd": math.nan, "c_ck": math.nan, "k_pd": math.nan, "status": "ok"}
        try:
            cs = compute_constants(derive_params(d, p))
        except CriticalCaseError:
            row["status"] = "critical, skipped"
        except DomainError as exc:
            row["status"] = f"out of range: {exc}"
        else:
            row.update(c_pd=cs.C_pd, c_ck=cs.C_CK, k_pd=cs.K_pd)
        rows.append(row)
    return rows
