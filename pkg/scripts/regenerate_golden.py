"""Regenerate src/gnsflow/golden.json with an arbitrary-precision oracle.

Nothing here touches the package's grids or quadrature: constants come from
mpmath evaluations of the closed forms and from a direct lambda-minimization of
the Gagliardo-Nirenberg energy of the optimal profile; functional values come
from adaptive mpmath quadrature of closed-form Barenblatt expressions.

    python3 scripts/regenerate_golden.py [--out PATH] [--dps 40]
"""
from __future__ import annotations

import argparse
import json
import os
import tempfile
from pathlib import Path

import mpmath as mp

OUT = Path(__file__).resolve().parents[1] / "src" / "gnsflow" / "golden.json"


def sphere_area(d):
    return 2 * mp.pi ** (mp.mpf(d) / 2) / mp.gamma(mp.mpf(d) / 2)


def radial(fn, d):
    """integral over R^d of a radial function."""
    return sphere_area(d) * mp.quad(lambda r: fn(r) * r ** (d - 1), [0, 1, 10, 100, mp.inf])


def exponents(d, p):
    d, p = mp.mpf(d), mp.mpf(p)
    m = (p + 1) / (2 * p)
    gamma = (d + 2 - p * (d - 2)) / (d - p * (d - 4))
    theta = d * (p - 1) / (p * (d + 2 - (d - 2) * p))
    return m, gamma, theta


def optimal_profile_terms(d, p):
    """(int |grad F|^2, int F^(p+1), int F^(2p)) for F = (1+r^2)^(-1/(p-1))."""
    p = mp.mpf(p)
    k = 1 / (p - 1)
    grad = radial(lambda r: (2 * k * r) ** 2 * (1 + r * r) ** (-2 * k - 2), d)
    lp1 = radial(lambda r: (1 + r * r) ** (-k * (p + 1)), d)
    l2p = radial(lambda r: (1 + r * r) ** (-2 * k * p), d)
    return grad, lp1, l2p


def constants_oracle(d, p):
    p = mp.mpf(p)
    m, gamma, theta = exponents(d, p)
    grad, lp1, l2p = optimal_profile_terms(d, p)
    # f_lam = lam^(d/2p) F(lam x) keeps int f^(2p); energy = grad lam^al + lp1 lam^-be
    al = 2 + d / p - d
    be = d - d * (p + 1) / (2 * p)
    dE = lambda t: al * grad * mp.e ** (al * t) - be * lp1 * mp.e ** (-be * t)
    t_star = mp.findroot(dE, 0)
    lam = mp.e ** t_star
    k_pd = (grad * lam ** al + lp1 * lam ** (-be)) / l2p ** gamma
    c_gn = l2p ** (1 / (2 * p)) / (grad ** (theta / 2) * lp1 ** ((1 - theta) / (p + 1)))
    out = {"d": d, "p": float(p), "lambda_star": lam, "sigma_star": lam ** -2, "k_pd": k_pd,
           "c_gn": c_gn, "m_star": l2p, "grad": grad, "lp1": lp1}
    # closed forms for the stability constants, evaluated at this precision
    s_star = lam ** -2
    ms = l2p
    c_pd = ((d - p * (d - 4)) * (d - p * (d - 2)) * (d + 2 - p * (d - 2))
            / (16 * p ** 3 * (p - 1) ** 2) * ms ** (gamma - 1) / s_star)
    c_ck = ((p - 1) / (p + 1) * (d + 2 - p * (d - 2)) / (32 * p)
            * s_star ** (d * (p - 1) / (4 * p)) * ms ** (1 - gamma))
    out.update(c_pd=c_pd, c_ck=c_ck, frak_c=c_pd * c_ck ** 2)
    return out


class Barenblatt:
    """B_sigma at mass M* (C_M = 1) in closed form, with its radial derivative."""

    def __init__(self, d, m, sigma):
        self.d, self.m, self.s = d, mp.mpf(m), mp.mpf(sigma)
        self.e = 1 / (self.m - 1)

    def __call__(self, r):
        return self.s ** (-mp.mpf(self.d) / 2) * (1 + r * r / self.s) ** self.e

    def deriv(self, r):
        return self.s ** (-mp.mpf(self.d) / 2) * self.e * (1 + r * r / self.s) ** (self.e - 1) * 2 * r / self.s


def mixture(d, m, c, s1, s2):
    b1, b2 = Barenblatt(d, m, s1), Barenblatt(d, m, s2)
    u = lambda r: c * b1(r) + (1 - c) * b2(r)
    du = lambda r: c * b1.deriv(r) + (1 - c) * b2.deriv(r)
    return u, du


def functionals_oracle(d, m, u, du, sigma):
    m = mp.mpf(m)
    B = Barenblatt(d, m, sigma)
    a = mp.mpf(d) * (m - (d - 2) / mp.mpf(d)) / 2
    b = mp.mpf(d) * (1 - m) / 2
    ent = radial(lambda r: (u(r) ** m - B(r) ** m - m * B(r) ** (m - 1) * (u(r) - B(r))) / (m - 1), d)

    def w(r):
        # grad u^(m-1) - grad B_sigma^(m-1)
        return (m - 1) * u(r) ** (m - 2) * du(r) - (m - 1) * B(r) ** (m - 2) * B.deriv(r)

    fisher = sigma ** a * m / (1 - m) * radial(lambda r: u(r) * w(r) ** 2, d)
    # L1 distances need the sign changes of u - B
    grid = [mp.mpf(x) / 20 for x in range(0, 400)]
    roots = []
    for x0, x1 in zip(grid[:-1], grid[1:]):
        if (u(x0) - B(x0)) * (u(x1) - B(x1)) < 0:
            roots.append(mp.findroot(lambda r: u(r) - B(r), (x0, x1), solver="anderson"))
    cuts = [0] + roots + [r for r in (10, 100) if r > (roots[-1] if roots else 0)] + [mp.inf]
    area = sphere_area(d)
    l1 = area * mp.quad(lambda r: abs(u(r) - B(r)) * r ** (d - 1), cuts)
    l1x2 = area * mp.quad(lambda r: abs(u(r) - B(r)) * r ** (d + 1), cuts)
    b1m = radial(lambda r: Barenblatt(d, m, 1)(r) ** m, d)
    ck_lhs = ent / sigma ** b
    ck_rhs = m / (8 * b1m) * (l1 + l1x2 / sigma) ** 2
    mass = radial(u, d)
    m2 = radial(lambda r: r * r * u(r), d)
    return {"sigma": sigma, "mass": mass, "second_moment": m2, "entropy": ent, "fisher": fisher,
            "l1": l1, "l1x2": l1x2, "ck_lhs": ck_lhs, "ck_rhs": ck_rhs, "sign_changes": roots}


def to_plain(obj):
    if isinstance(obj, dict):
        return {k: to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, mp.mpf):
        return float(obj)
    return obj


def build(dps: int) -> dict:
    mp.mp.dps = dps
    consts = {f"{d},{p}": constants_oracle(d, p) for d, p in [(2, 2), (2, 3), (3, 2), (4, 1.5), (3, 1.5)]}
    d, m = 2, mp.mpf(3) / 4
    u, du = mixture(d, m, mp.mpf(1) / 2, 1, 4)
    mix = functionals_oracle(d, m, u, du, mp.mpf(5) / 2)
    B1 = Barenblatt(d, m, 1)
    b1_at_4 = functionals_oracle(d, m, B1, B1.deriv, mp.mpf(4))
    b1_at_4 = {k: b1_at_4[k] for k in ("sigma", "entropy", "fisher")}
    return to_plain({"dps": dps, "constants": consts,
                     "mixture_half_b1_b4": mix, "b1_against_sigma4": b1_at_4})


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=OUT)
    ap.add_argument("--dps", type=int, default=40)
    args = ap.parse_args(argv)
    data = build(args.dps)
    fd, tmp = tempfile.mkstemp(dir=args.out.parent, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
