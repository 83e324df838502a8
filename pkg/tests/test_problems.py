"""Problem data: manufactured solutions, derivatives, assumptions."""

import numpy as np
import pytest

from shishkin_hdg.problems import (get_problem, paper_problem, pde_residual,
                                   polynomial_problem, verify_assumptions)


def _fd(f, x, y, h, which):
    if which == "x":
        return (f(x + h, y) - f(x - h, y)) / (2 * h)
    return (f(x, y + h) - f(x, y - h)) / (2 * h)


def test_exact_derivatives_match_finite_differences():
    spec = paper_problem(1e-2)
    ex = spec.exact
    rng = np.random.default_rng(0)
    x = rng.uniform(0.05, 0.95, 20)
    y = rng.uniform(0.05, 0.95, 20)
    h = 1e-6
    assert np.allclose(ex.u_x(x, y), _fd(ex.u, x, y, h, "x"), atol=1e-5)
    assert np.allclose(ex.u_y(x, y), _fd(ex.u, x, y, h, "y"), atol=1e-5)
    lap_fd = (_fd(ex.u_x, x, y, h, "x") + _fd(ex.u_y, x, y, h, "y"))
    assert np.allclose(ex.laplacian(x, y), lap_fd, rtol=1e-4, atol=1e-4)


def test_exact_solution_boundary_conditions():
    spec = paper_problem(1e-3)
    s = np.linspace(0.0, 1.0, 33)
    z = np.zeros_like(s)
    for xb, yb in [(z, s), (z + 1.0, s), (s, z), (s, z + 1.0)]:
        assert np.max(np.abs(spec.exact.u(xb, yb))) < 1e-13


def test_pde_residual_zero_for_manufactured_data():
    rng = np.random.default_rng(1)
    x = rng.uniform(0.0, 1.0, 50)
    y = rng.uniform(0.0, 1.0, 50)
    for spec in (paper_problem(1e-1), paper_problem(1e-3),
                 polynomial_problem(1.0), polynomial_problem(1e-2)):
        res = pde_residual(spec, x, y)
        scale = max(1.0, np.max(np.abs(spec.f(x, y))))
        assert np.max(np.abs(res)) < 1e-12 * scale


def test_flux_definition():
    spec = paper_problem(1e-2)
    ex = spec.exact
    x, y = np.array([0.3]), np.array([0.7])
    assert np.isclose(ex.q1(x, y)[0], -1e-2 * ex.u_x(x, y)[0])
    assert np.isclose(ex.q2(x, y)[0], -1e-2 * ex.u_y(x, y)[0])


def test_coefficient_values():
    spec = paper_problem(1e-3)
    x, y = np.array([0.25]), np.array([0.5])
    assert np.isclose(spec.beta1(x, y)[0], 1.75)
    assert np.isclose(spec.beta2(x, y)[0], 3.0 - 0.125)
    assert np.isclose(spec.c(x, y)[0], 1.0)
    assert np.isclose(spec.div_beta(x, y)[0], -1.0 - 0.75)
    assert spec.beta_lb == (1.0, 2.0)
    assert spec.c0 == 1.5


def test_assumptions_pass_for_paper_problem():
    rep = verify_assumptions(paper_problem(1e-4))
    assert rep.passed
    assert rep.failures() == []
    # c - div(beta)/2 = 3/2 + (3/2) y^2 has margin 0 over c0 at y=0
    assert abs(rep.min_coercivity_margin) < 1e-12
    assert rep.min_beta1_margin >= 0.0
    assert rep.min_beta2_margin >= 0.0


def test_assumptions_fail_for_misdeclared_bound():
    spec = paper_problem(1e-4)
    bad = type(spec)(spec.name, spec.epsilon, spec.beta1, spec.beta2, spec.c,
                     spec.div_beta, spec.f, beta_lb=(3.0, 2.0), c0=spec.c0,
                     exact=spec.exact)
    rep = verify_assumptions(bad)
    assert not rep.passed
    assert any("beta1" in msg for msg in rep.failures())


def test_registry():
    assert get_problem("paper-sec5", 1e-3).name == "paper-sec5"
    assert get_problem("poly-q2", 1.0).name == "poly-q2"
    with pytest.raises(ValueError):
        get_problem("nope", 1e-3)
    with pytest.raises(ValueError):
        paper_problem(0.0)
