import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gnsflow.acceptance import admissible_pairs, golden
from gnsflow.constants import (EXPORT_KEYS, compute_constants, cross_check_constants, derive_params,
                               endpoint_scan, lambda_optimum, log_gamma, m_from_p, p_from_m,
                               params_from_m, sigma_star)
from gnsflow.errors import CriticalCaseError, DomainError

PI = math.pi


def test_reference_exponents(p22):
    assert p22.m == 0.75
    assert p22.gamma == pytest.approx(2 / 3, rel=1e-15)
    assert p22.theta == 0.25
    assert p22.a + p22.b == pytest.approx(1.0)


def test_reference_pack_closed_forms(p22):
    c = compute_constants(p22)
    assert c.M_star == pytest.approx(PI / 3, rel=1e-12)
    assert c.K_M == pytest.approx(PI / 6, rel=1e-12)
    assert c.B1m_integral == pytest.approx(PI / 2, rel=1e-12)
    assert c.kappa_1 == pytest.approx(2 / PI, rel=1e-12)
    assert c.kappa_2 == pytest.approx(3 / 8, rel=1e-12)
    assert c.C_md == pytest.approx(3 / (8 * PI), rel=1e-12)
    assert c.sigma_star == pytest.approx((8 / 3) ** (4 / 3), rel=1e-14)
    assert c.C_GN == pytest.approx(2 ** 0.25 * (6 * PI) ** (-1 / 8), rel=1e-14)
    assert c.frak_C == pytest.approx(c.C_pd * c.C_CK ** 2, rel=1e-15)


@pytest.mark.parametrize("key", sorted(golden()["constants"]))
def test_against_oracle(key):
    d, p = key.split(",")
    c = compute_constants(derive_params(int(d), float(p), "M*"))
    g = golden()["constants"][key]
    for ours, theirs in [("sigma_star", "sigma_star"), ("K_pd", "k_pd"), ("C_GN", "c_gn"),
                         ("C_pd", "c_pd"), ("C_CK", "c_ck"), ("frak_C", "frak_c"), ("M_star", "m_star")]:
        assert getattr(c, ours) == pytest.approx(g[theirs], rel=1e-12), ours


def test_log_gamma_matches_known_values():
    assert log_gamma(0.5) == pytest.approx(0.5 * math.log(PI), rel=1e-15)
    assert log_gamma(10.0) == pytest.approx(math.log(362880.0), rel=1e-15)
    with pytest.raises(DomainError):
        log_gamma(0.0)


@given(st.floats(1.0001, 50.0))
def test_m_p_roundtrip(p):
    assert p_from_m(m_from_p(p)) == pytest.approx(p, rel=1e-12)


def test_domain_errors():
    with pytest.raises(CriticalCaseError):
        derive_params(4, 2.0)
    with pytest.raises(CriticalCaseError):
        derive_params(3, 3.0)
    with pytest.raises(DomainError):
        derive_params(3, 3.5)
    with pytest.raises(DomainError):
        derive_params(2, 1.0)
    with pytest.raises(DomainError):
        derive_params(1, 2.0)
    with pytest.raises(DomainError):
        params_from_m(2, 0.4)
    with pytest.raises(DomainError):
        derive_params(2, 2.0, mass=-1.0)


@pytest.mark.parametrize("d,p", admissible_pairs(50))
def test_appendix_identity(d, p):
    P = derive_params(d, p)
    c = compute_constants(P)
    assert c.K_pd * c.C_GN ** (2 * p * P.gamma) == pytest.approx(lambda_optimum(P), rel=1e-10)


@pytest.mark.parametrize("d,p", [(2, 2.0), (2, 3.0), (3, 2.0), (4, 1.5), (5, 1.4)])
def test_cross_checks(d, p):
    r = cross_check_constants(derive_params(d, p))
    assert r.appendix_identity < 1e-12
    assert r.k_pd_oracle_residual < 1e-9
    assert r.gn_quotient_residual < 1e-9
    assert r.k_pd_form_residual < 1e-12
    assert r.c_pd_form_residual < 1e-12
    assert r.ipp_residual < 1e-12
    assert r.lambda_star == pytest.approx(r.lambda_formula, rel=1e-6)


def test_printed_numerator_differs(p22):
    assert sigma_star(p22, "printed") == pytest.approx(9.31819162, rel=1e-8)
    with pytest.raises(DomainError):
        sigma_star(p22, "other")


def test_mass_scaling(p22):
    c1 = compute_constants(p22)
    c2 = compute_constants(derive_params(2, 2, 2 * p22.mass))
    assert c2.K_M / c1.K_M == pytest.approx(2 ** p22.gamma, rel=1e-13)
    assert c2.C_md / c1.C_md == pytest.approx(2 ** -p22.gamma, rel=1e-13)
    # mass-free constants stay put
    assert c2.K_pd == c1.K_pd and c2.sigma_star == c1.sigma_star


def test_export_formats(p22):
    c = compute_constants(p22)
    assert tuple(json.loads(c.to_json())) == EXPORT_KEYS
    header, row = c.to_csv().strip().split("\n")
    assert tuple(header.split(",")) == EXPORT_KEYS
    assert float(row.split(",")[EXPORT_KEYS.index("k_pd")]) == c.K_pd


def test_endpoint_scan_flags_bad_points():
    rows = endpoint_scan(3, [1.5, 3.0, 4.0])
    assert rows[0]["status"] == "ok" and np.isfinite(rows[0]["c_pd"])
    assert rows[1]["status"].startswith("critical")
    assert rows[2]["status"].startswith("out of range")


def test_endpoint_scan_near_one_is_monotone():
    ps = 1.0 + np.logspace(-4, -1, 8)
    c_ck = [r["c_ck"] for r in endpoint_scan(2, ps)]
    assert np.all(np.diff(c_ck) > 0)
