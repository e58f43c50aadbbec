import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gnsflow.acceptance import golden
from gnsflow.constants import compute_constants, derive_params, params_from_m
from gnsflow.errors import DomainError, NonIntegrableError, VacuumError
from gnsflow.families import reference_mix, tilted_power, two_scale_mix
from gnsflow.functionals import (DEFICIT_KEYS, best_match_sigma, ck_bound, ck_variant_bound, eep_terms,
                                 fisher_information, gn_deficit, improved_eep_residual, manifold_distance,
                                 moments, normalize_to_sigma_star, relative_entropy)
from gnsflow.profiles import barenblatt, grid_for, optimal_f, rescale_mass_preserving
from gnsflow.radial import RadialFunction, build_grid, integrate_radial

PI = math.pi
G = golden()


@pytest.fixture(scope="module")
def grid(m34):
    return grid_for(m34, m34.mass, 4.0, n=2000)


@pytest.fixture(scope="module")
def mix(m34, grid):
    return reference_mix(m34, grid)


def f_of(u, P):
    return u.map(lambda v: v ** (1.0 / (2 * P.p)), u.tail_exponent / (2 * P.p))


def test_moments(m34, grid, mix):
    B1 = barenblatt(m34, m34.mass, 1.0, grid)
    assert moments(B1) == pytest.approx((PI / 3, PI / 6), rel=1e-10)
    assert moments(mix) == pytest.approx((PI / 3, PI / 6 * 2.5), rel=1e-10)
    assert moments(RadialFunction(grid, np.zeros(grid.n))) == (0.0, 0.0)


def test_moment_divergence(grid):
    u = RadialFunction(grid, (1 + grid.nodes ** 2) ** -1.5, -3.0)
    with pytest.raises(NonIntegrableError):
        moments(u)


@pytest.mark.parametrize("s0", [0.5, 1.0, 3.0])
def test_match_barenblatt(m34, grid, s0):
    r = best_match_sigma(barenblatt(m34, m34.mass, s0, grid), m34)
    assert r.sigma == pytest.approx(s0, rel=1e-10)
    assert abs(r.entropy) <= 1e-9
    assert r.argmin_check <= 1e-5


def test_match_mixture_against_oracle(m34, mix):
    g = G["mixture_half_b1_b4"]
    r = best_match_sigma(mix, m34)
    assert r.sigma == pytest.approx(2.5, rel=1e-10)
    assert r.entropy == pytest.approx(g["entropy"], rel=1e-8)
    assert r.argmin_check <= 1e-5
    assert fisher_information(mix, r.sigma, m34) == pytest.approx(g["fisher"], rel=1e-7)


def test_match_after_rescale(m34, grid):
    B1 = barenblatt(m34, m34.mass, 1.0, grid)
    assert best_match_sigma(rescale_mass_preserving(B1, 1.5), m34).sigma == pytest.approx(1 / 2.25, rel=1e-8)


def test_match_zero_mass(m34, grid):
    with pytest.raises(DomainError):
        best_match_sigma(RadialFunction(grid, np.zeros(grid.n)), m34)


def test_mismatched_entropy_against_oracle(m34, grid):
    g = G["b1_against_sigma4"]
    B1 = barenblatt(m34, m34.mass, 1.0, grid)
    F = relative_entropy(B1, 4.0, m34)
    I = fisher_information(B1, 4.0, m34)
    assert F == pytest.approx(g["entropy"], rel=1e-8)
    assert I == pytest.approx(g["fisher"], rel=1e-7)
    assert I >= 4 * F
    assert abs(relative_entropy(B1, 1.0, m34)) <= 1e-10
    with pytest.raises(DomainError):
        relative_entropy(B1, 0.0, m34)


@given(st.floats(0.5, 2.0), st.floats(0.1, 0.9), st.floats(1.2, 3.0))
def test_entropy_scaling_law(lam, c, ratio):
    P = params_from_m(2, 0.75, "M*")
    g = grid_for(P, P.mass, 4.0, n=2000)
    u = two_scale_mix(P, g, c, 1.0, ratio, P.mass)
    F = relative_entropy(u, 2.0, P)
    ul = rescale_mass_preserving(u, lam)
    Fl = relative_entropy(ul, 2.0 / lam ** 2, P)
    assert Fl == pytest.approx(lam ** (P.d * (P.m - 1)) * F, rel=1e-6)


@given(st.floats(0.5, 3.0))
def test_entropy_homogeneity_law(lam):
    P = params_from_m(2, 0.75, "M*")
    g = grid_for(P, P.mass, 4.0, n=2000)
    u = reference_mix(P, g)
    s_lam = lam ** P.mass_exponent * 2.5
    assert relative_entropy(u * lam, s_lam, P) == pytest.approx(lam ** P.m * relative_entropy(u, 2.5, P),
                                                                 rel=1e-6)


def test_fisher_vacuum(m34, grid):
    vals = barenblatt(m34, m34.mass, 1.0, grid).values.copy()
    vals[100:200] = 0.0
    with pytest.raises(VacuumError):
        fisher_information(RadialFunction(grid, vals, m34.tail_exponent), 1.0, m34)


def test_fisher_stationary(m34, grid):
    assert abs(fisher_information(barenblatt(m34, m34.mass, 2.0, grid), 2.0, m34)) <= 1e-9


def test_optimal_profile_deficit(p22):
    g = grid_for(p22, p22.mass, 1.0, n=4000)
    r = gn_deficit(optimal_f(p22, p22.mass, 1.0, g), p22)
    assert r.grad_term == pytest.approx(2 * PI / 3, rel=1e-10)
    assert r.lp1_term == pytest.approx(PI / 2, rel=1e-10)
    assert r.l2p_norm_pow == pytest.approx(PI / 3, rel=1e-10)
    assert r.gn_deficit == pytest.approx(0.3978034005, abs=1e-8)
    assert not r.normalized


def test_equality_case(p22):
    c = compute_constants(p22)
    g = grid_for(p22, p22.mass, c.sigma_star, n=2000)
    r = gn_deficit(optimal_f(p22, p22.mass, c.sigma_star, g), p22, c)
    assert abs(r.gn_deficit) <= 1e-6
    assert r.manifold_distance <= 1e-8
    assert r.normalized


def test_normalize(p22, grid22):
    c = compute_constants(p22)
    f = optimal_f(p22, p22.mass, 1.0, grid22)
    fn, lam = normalize_to_sigma_star(f, p22, c)
    assert lam == pytest.approx(c.sigma_star ** -0.5, abs=1e-6)
    assert abs(gn_deficit(fn, p22, c).gn_deficit) <= 1e-6
    l2p = lambda h: integrate_radial(h.map(lambda v: v ** 4, 4 * h.tail_exponent))
    assert l2p(fn) == pytest.approx(l2p(f), rel=1e-8)
    again, lam1 = normalize_to_sigma_star(fn, p22, c)
    assert lam1 == pytest.approx(1.0, abs=1e-6)


def test_zero_input(p22, grid22):
    with pytest.raises(DomainError):
        gn_deficit(RadialFunction(grid22, np.zeros(grid22.n)), p22)


def test_manifold_distance_identity(p22, grid22):
    c = compute_constants(p22)
    u = reference_mix(p22, grid22)
    fn, _ = normalize_to_sigma_star(f_of(u, p22), p22, c)
    un = fn.map(lambda v: v ** 4, 4 * fn.tail_exponent)
    match = best_match_sigma(un, p22)
    p = p22.p
    assert manifold_distance(fn, p22, match) == pytest.approx((p - 1) / (p + 1) * match.entropy, rel=1e-10)


def test_deficit_report_formats(p22, grid22):
    r = gn_deficit(f_of(reference_mix(p22, grid22), p22), p22)
    assert tuple(json.loads(r.to_json())) == DEFICIT_KEYS
    header, row = r.to_csv().strip().split("\n")
    assert tuple(header.split(",")) == DEFICIT_KEYS
    assert row.split(",")[-1] in ("true", "false")


def test_ck_against_oracle(m34, mix):
    g = G["mixture_half_b1_b4"]
    lhs, rhs = ck_bound(mix, m34)
    assert lhs == pytest.approx(g["ck_lhs"], rel=1e-8)
    # |u - B| has kinks at the sign changes; the corrected rule converges at third order
    assert rhs == pytest.approx(g["ck_rhs"], rel=5e-5)
    assert lhs > rhs
    lhs, rhs = ck_variant_bound(mix, m34)
    assert lhs > rhs


def test_ck_barenblatt_and_bump(m34, grid):
    B = barenblatt(m34, m34.mass, 1.5, grid)
    for fn in (ck_bound, ck_variant_bound):
        lhs, rhs = fn(B, m34)
        assert abs(lhs) <= 1e-10 and abs(rhs) <= 1e-10
        lhs, rhs = fn(B * 1.1, m34)
        assert lhs >= rhs - 1e-9


def test_ck_range(m34, grid):
    # every admissible (d, p) has m > d/(d+2); force the exponent below it
    P = dataclasses.replace(m34, m_tilde_1=0.8)
    u = barenblatt(m34, m34.mass, 1.0, grid)
    with pytest.raises(DomainError):
        ck_bound(u, P)
    with pytest.raises(DomainError):
        ck_variant_bound(u, P)


def test_eep(m34, grid, mix):
    e = eep_terms(mix, m34)
    assert e.fisher - 4 * e.entropy > 0.28
    assert e.improvement > 0 and e.residual >= 0
    assert improved_eep_residual(barenblatt(m34, m34.mass, 1.0, grid), m34) == pytest.approx(0, abs=1e-9)


@given(st.floats(-0.5, 1.0), st.floats(0.6, 2.5))
def test_eep_tilted(eps, sigma):
    P = params_from_m(2, 0.75, "M*")
    g = grid_for(P, P.mass, 3.0, n=2000)
    e = eep_terms(tilted_power(P, g, eps, sigma, P.mass), P)
    assert e.entropy >= -1e-9
    assert e.residual >= -1e-8
    assert e.fisher - 4 * e.entropy >= -1e-8
