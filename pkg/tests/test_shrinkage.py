"""Tests for the shrinkage-factor catalog and scalar penalized least squares."""

import math

import numpy as np
import pytest

from steinlab.errors import DomainError
from steinlab.shrinkage import (
    apply_estimator,
    brute_force_pls_oracle,
    make_factor,
    pls_objective,
    solve_penalized_ls,
)

DS_FACTORS = [
    make_factor("scad", lam=1.0, alpha=3.7),
    make_factor("mcp", lam=1.0, alpha=2.0),
    make_factor("quad", a=2.0),
]


# ---------------------------------------------------------------------------
# Piecewise values
# ---------------------------------------------------------------------------


def test_scad_piecewise_values():
    f = make_factor("scad", lam=1.0, alpha=3.7)
    assert f.phi(0.5) == pytest.approx(0.5, rel=1e-15)
    assert f.phi(2.0) == pytest.approx(math.sqrt(2.0), rel=1e-15)
    # third band at w = 9: (-9 + 3.7 * 3) / 1.7
    assert f.phi(9.0) == pytest.approx((-9.0 + 3.7 * 3.0) / 1.7, rel=1e-14)
    assert f.phi(14.0) == 0.0
    assert f.support_end == pytest.approx(3.7 ** 2, rel=1e-15)


def test_mcp_vanishes_continuously_at_support_end():
    f = make_factor("mcp", lam=1.0, alpha=2.0)
    assert f.support_end == 4.0
    assert f.phi(4.0) == pytest.approx(0.0, abs=1e-15)
    eps = 1e-9
    assert f.phi(4.0 - eps) == pytest.approx(0.0, abs=1e-8)


def test_quad_breakpoint_continuity():
    f = make_factor("quad", a=2.0)
    # breakpoint (2a+1-sqrt(4a+1))/2 = 1 for a = 2, and phi(1) = (a-1)^2 = 1
    w0 = f.breakpoints[0]
    assert w0 == pytest.approx(1.0, rel=1e-15)
    assert f.phi(1.0) == pytest.approx(1.0, rel=1e-14)


def test_js_family_values():
    js = make_factor("js", p=5)
    assert js.phi(0.3) == 3.0 and js.phi(100.0) == 3.0
    jsp = make_factor("js_plus", p=5)
    assert jsp.phi(2.0) == 2.0
    assert jsp.phi(7.0) == 3.0
    ridge = make_factor("ridge", lam=3.0)
    assert ridge.phi(8.0) == pytest.approx(2.0, rel=1e-15)
    soft = make_factor("soft", lam=2.0)
    assert soft.phi(1.0) == 1.0
    assert soft.phi(9.0) == pytest.approx(6.0, rel=1e-15)
    hard = make_factor("hard", lam=2.0)
    assert hard.phi(3.9) == 3.9
    assert hard.phi(4.1) == 0.0


def test_phi_continuity_at_all_breakpoints():
    for f in DS_FACTORS:
        for b in f.breakpoints:
            left = f.phi(b * (1.0 - 1e-13))
            right = f.phi(b * (1.0 + 1e-13))
            assert abs(left - right) <= 1e-12


def test_parameter_validation_messages():
    with pytest.raises(DomainError, match="alpha"):
        make_factor("scad", lam=1.0, alpha=2.0)
    with pytest.raises(DomainError, match="alpha"):
        make_factor("mcp", lam=1.0, alpha=1.0)
    with pytest.raises(DomainError, match="p"):
        make_factor("js", p=2)
    with pytest.raises(DomainError, match="lam"):
        make_factor("ridge", lam=0.0)
    with pytest.raises(DomainError, match="a"):
        make_factor("quad", a=-1.0)
    with pytest.raises(DomainError):
        make_factor("nope")


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------


def test_dphi_matches_finite_differences_away_from_kinks():
    rng = np.random.default_rng(21)
    factors = DS_FACTORS + [
        make_factor("js", p=5),
        make_factor("js_plus", p=5),
        make_factor("ridge", lam=0.7),
        make_factor("soft", lam=1.3),
        make_factor("hard", lam=1.1),
    ]
    h = 1e-6
    for f in factors:
        hi = f.support_end if math.isfinite(f.support_end) else 30.0
        for _ in range(200):
            w = float(rng.uniform(1e-3, hi * 1.2))
            if any(abs(w - b) < 1e-3 for b in f.breakpoints) or w < h:
                continue
            num = (f.phi(w + h) - f.phi(w - h)) / (2 * h)
            assert abs(f.dphi(w) - num) <= 1e-4, (f.name, w)


def test_endpoint_derivatives_scad_mcp():
    # slope at the debias point: -1/(2(alpha-2)) for scad, -1/(2(alpha-1)) for mcp
    scad = make_factor("scad", lam=1.0, alpha=3.7)
    a = scad.support_end
    assert scad.dphi(a * (1 - 2.0 ** -40)) == pytest.approx(-1.0 / (2 * 1.7), abs=1e-10)
    mcp = make_factor("mcp", lam=1.0, alpha=2.0)
    assert mcp.dphi(4.0 * (1 - 2.0 ** -40)) == pytest.approx(-0.5, abs=1e-10)
    # right-hand convention: exactly zero from the support end on
    assert scad.dphi(a) == 0.0
    assert mcp.dphi(4.0) == 0.0


def test_quad_tail_derivative_ratio():
    f = make_factor("quad", a=2.0)
    a = 2.0
    w = a * (1 - 2.0 ** -20)
    assert f.dphi(w) == pytest.approx(0.0, abs=1e-5)
    ratio = (a - w) * f.dphi(w) / f.phi(w)
    assert ratio == pytest.approx(-2.0, rel=1e-2)


# ---------------------------------------------------------------------------
# Debiased-shrinkage compliance
# ---------------------------------------------------------------------------


def test_ds_compliance_grids():
    for f in DS_FACTORS:
        assert f.ds_compliant
        a = f.support_end
        w = np.linspace(1e-9, a * (1 - 1e-9), 4001)
        phi = f.phi(w)
        assert np.all(phi > 0), f.name
        assert np.all(phi <= w * (1 + 1e-12)), f.name
        beyond = np.linspace(a, 3 * a, 301)
        assert np.all(f.phi(beyond) == 0.0), f.name
        slopes = f.dphi(np.linspace(0.0, 3 * a, 2001))
        assert np.all(np.isfinite(slopes)), f.name
        assert np.max(np.abs(slopes)) < 10.0, f.name


def test_tail_hint_normalization():
    # phi(w) / (a-w)^b -> scale, checked at distance 1e-6 from the support end
    for f in DS_FACTORS:
        hint = f.tail_hint
        a = f.support_end
        w = a - 1e-6
        ratio = f.phi(w) / (a - w) ** hint.exponent
        assert ratio == pytest.approx(hint.scale, rel=1e-2), f.name


# ---------------------------------------------------------------------------
# Estimator application
# ---------------------------------------------------------------------------


def test_apply_estimator_js_zeroes_at_w_equal_phi():
    js = make_factor("js", p=4)
    x = np.array([math.sqrt(2.0), 0.0, 0.0, 0.0])
    res = apply_estimator(js, x)
    assert res.w == pytest.approx(2.0, rel=1e-15)
    assert np.allclose(res.estimate, 0.0, atol=1e-15)


def test_apply_estimator_hard_threshold_kills_small_x():
    hard = make_factor("hard", lam=1.0)
    x = np.array([0.3, 0.4])  # w = 0.25
    res = apply_estimator(hard, x)
    assert np.all(res.estimate == 0.0)
    assert res.shrink_weight == 0.0


def test_apply_estimator_identity_beyond_support():
    rng = np.random.default_rng(5)
    for f in DS_FACTORS + [make_factor("hard", lam=1.0)]:
        x = rng.normal(size=6)
        x *= math.sqrt(f.support_end * 1.5) / math.sqrt(float(x @ x))
        res = apply_estimator(f, x)
        assert res.shrink_weight == 1.0
        assert np.array_equal(res.estimate, x)


def test_apply_estimator_result_invariant():
    rng = np.random.default_rng(17)
    factors = DS_FACTORS + [make_factor("js_plus", p=6), make_factor("ridge", lam=2.0)]
    for f in factors:
        for _ in range(50):
            x = rng.normal(size=6) * rng.uniform(0.1, 4.0)
            res = apply_estimator(f, x)
            assert np.array_equal(res.estimate, res.shrink_weight * x)


def test_js_plus_never_flips_signs():
    jsp = make_factor("js_plus", p=5)
    rng = np.random.default_rng(23)
    for _ in range(300):
        x = rng.normal(size=5) * rng.uniform(0.05, 3.0)
        res = apply_estimator(jsp, x)
        assert np.all(res.estimate * x >= 0.0)
        assert 0.0 <= res.shrink_weight <= 1.0


def test_apply_estimator_at_origin():
    z = np.zeros(5)
    res = apply_estimator(make_factor("js_plus", p=5), z)
    assert np.all(res.estimate == 0.0) and res.shrink_weight == 0.0
    with pytest.raises(DomainError):
        apply_estimator(make_factor("js", p=5), z)


# ---------------------------------------------------------------------------
# Penalized least squares
# ---------------------------------------------------------------------------


def test_solver_reference_points():
    assert solve_penalized_ls("lasso", 3.0, lam=1.0) == pytest.approx(2.0, rel=1e-15)
    assert solve_penalized_ls("scad", 5.0, lam=1.0, alpha=3.7) == 5.0
    for pen, kw in (("ridge", {}), ("lasso", {}), ("hard", {}),
                    ("scad", {"alpha": 3.7}), ("mcp", {"alpha": 2.0})):
        assert solve_penalized_ls(pen, 0.0, lam=1.0, **kw) == 0.0
    assert solve_penalized_ls("hard", 0.999, lam=1.0) == 0.0
    assert solve_penalized_ls("ridge", 2.0, lam=1.0) == pytest.approx(1.0, rel=1e-15)


def test_solver_matches_estimator_route():
    # the scalar minimizer must equal (1 - phi(x^2)/x^2) x for every family
    pairs = [
        ("ridge", make_factor("ridge", lam=0.8), {"lam": 0.8}),
        ("lasso", make_factor("soft", lam=1.2), {"lam": 1.2}),
        ("hard", make_factor("hard", lam=0.9), {"lam": 0.9}),
        ("scad", make_factor("scad", lam=1.1, alpha=3.7), {"lam": 1.1, "alpha": 3.7}),
        ("mcp", make_factor("mcp", lam=0.7, alpha=2.5), {"lam": 0.7, "alpha": 2.5}),
    ]
    rng = np.random.default_rng(31)
    for pen, factor, kw in pairs:
        for _ in range(400):
            x = float(rng.uniform(-8.0, 8.0))
            direct = solve_penalized_ls(pen, x, **kw)
            via_phi = apply_estimator(factor, np.array([x])).estimate[0]
            assert direct == pytest.approx(via_phi, abs=1e-10), (pen, x)


def test_oracle_reference_points():
    got = brute_force_pls_oracle("mcp", 1.5, lam=1.0, alpha=2.0,
                                 grid_halfwidth=3.0, grid_step=1e-4)
    assert abs(got - solve_penalized_ls("mcp", 1.5, lam=1.0, alpha=2.0)) <= 2e-4
    assert brute_force_pls_oracle("hard", 0.999, lam=1.0,
                                  grid_halfwidth=3.0, grid_step=1e-4) == 0.0
    got = brute_force_pls_oracle("ridge", 2.0, lam=1.0,
                                 grid_halfwidth=3.0, grid_step=1e-4)
    assert abs(got - 1.0) <= 2e-4


def test_solver_against_grid_oracle_sweep():
    rng = np.random.default_rng(101)
    for pen, kw in (("ridge", {}), ("lasso", {}), ("hard", {}),
                    ("scad", {"alpha": 3.7}), ("mcp", {"alpha": 2.0})):
        for _ in range(60):
            x = float(rng.uniform(-6.0, 6.0))
            direct = solve_penalized_ls(pen, x, lam=1.0, **kw)
            grid = brute_force_pls_oracle(pen, x, lam=1.0, **kw,
                                          grid_halfwidth=7.0, grid_step=1e-4)
            assert abs(direct - grid) <= 2e-4, (pen, x, direct, grid)


def test_objective_is_what_the_solver_minimizes():
    # sampled thetas never beat the claimed minimizer
    rng = np.random.default_rng(77)
    for pen, kw in (("ridge", {}), ("lasso", {}), ("hard", {}),
                    ("scad", {"alpha": 3.7}), ("mcp", {"alpha": 2.0})):
        for _ in range(40):
            x = float(rng.uniform(-5.0, 5.0))
            star = solve_penalized_ls(pen, x, lam=1.0, **kw)
            fstar = pls_objective(pen, star, x, lam=1.0, **kw)
            samples = rng.uniform(-8.0, 8.0, size=200)
            fvals = pls_objective(pen, samples, x, lam=1.0, **kw)
            assert np.all(fvals >= fstar - 1e-9), (pen, x)
