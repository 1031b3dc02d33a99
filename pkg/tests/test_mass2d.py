import math

import numpy as np
import pytest

from keyhole.channel import make_channel_model
from keyhole.geometry2d import Geometry2D
from keyhole.mass2d import (ClusterInputs, MassBreakdown,
                            exterior_isolation_prob,
                            full_connectivity_first_order,
                            internal_isolation_bridge_term,
                            internal_isolation_first_term, mass_closed_form,
                            mass_numeric, multi_external_bridge_prob)
from keyhole.specfun import lower_inc_gamma


def make_geometry(**kw):
    base = dict(w=20.0, L=100.0, eps=0.3, gap_center_x=50.0, x0=50.0, y0=-2.0)
    base.update(kw)
    return Geometry2D(**base)


@pytest.fixture(scope="module")
def model():
    return make_channel_model(K=4.0, beta=1e-3, alpha=0.75, C=6)


def test_mass_vanishes_with_gap(model):
    g = make_geometry(eps=1e-9)
    assert mass_numeric(g, model).total == pytest.approx(0.0, abs=1e-6)


def test_alpha_zero_leaves_direct_term_only():
    g = make_geometry()
    m = make_channel_model(K=4.0, beta=1e-3, alpha=0.0, C=6)
    br = mass_numeric(g, m)
    assert br.per_c[0][1] > 0.0
    assert all(v == 0.0 for c, v in br.per_c if c >= 1)


def test_breakdown_total_consistency(model):
    br = mass_numeric(make_geometry(), model)
    assert br.total == pytest.approx(sum(v for _, v in br.per_c), rel=1e-12)
    assert all(v >= 0.0 for _, v in br.per_c)


def test_left_only_is_half_of_both(model):
    g2 = make_geometry()
    g1 = make_geometry(sides="left_only")
    assert mass_numeric(g1, model).total == pytest.approx(
        0.5 * mass_numeric(g2, model).total, rel=1e-9)


def test_closed_form_direct_term_structure(model):
    g = make_geometry(sides="left_only")
    theta = g.theta()
    lam = model.lambda_coeff(0)
    mu = model.fit.mu
    s = 2.0 / mu
    leading = theta * (lower_inc_gamma(s, lam * 22.0 ** mu)
                       - lower_inc_gamma(s, lam * 2.0 ** mu)) / (mu * lam ** s)
    cubic = (theta ** 3 / 6.0) * (22.0 ** 2 * math.exp(-lam * 22.0 ** mu)
                                  - 2.0 ** 2 * math.exp(-lam * 2.0 ** mu))
    got = mass_closed_form(g, model).per_c[0][1]
    assert got == pytest.approx(leading + cubic, rel=1e-12)


def test_truncation_drops_reflected_mass():
    g = make_geometry()
    m6 = make_channel_model(K=4.0, beta=1e-3, alpha=1.0, C=6)
    m0 = make_channel_model(K=4.0, beta=1e-3, alpha=1.0, C=0)
    full = mass_numeric(g, m6)
    direct = mass_numeric(g, m0)
    assert direct.total == pytest.approx(full.per_c[0][1], rel=1e-9)
    assert full.total > direct.total


@pytest.mark.parametrize("alpha", [0.5, 0.65, 0.8, 0.95, 1.0])
def test_closed_form_matches_quadrature(alpha):
    g = make_geometry()
    m = make_channel_model(K=4.0, beta=1e-3, alpha=alpha, C=6)
    quad = mass_numeric(g, m).total
    closed = mass_closed_form(g, m).total
    assert abs(closed - quad) / quad <= 0.05


def test_closed_form_warns_at_large_theta(model):
    g = make_geometry(eps=15.0, y0=-0.5, gap_center_x=50.0)
    with pytest.warns(UserWarning):
        mass_closed_form(g, model)


def test_mass_monotonicity_in_parameters(model):
    totals_eps = [mass_numeric(make_geometry(eps=e), model).total
                  for e in (0.1, 0.2, 0.3, 0.4, 0.5)]
    assert all(a < b for a, b in zip(totals_eps, totals_eps[1:]))

    totals_alpha = [mass_numeric(make_geometry(),
                                 make_channel_model(K=4.0, beta=1e-3, alpha=a, C=6)).total
                    for a in (0.5, 0.7, 0.9)]
    assert all(a < b for a, b in zip(totals_alpha, totals_alpha[1:]))

    totals_w = [mass_numeric(make_geometry(w=w), model).total
                for w in (10.0, 15.0, 20.0)]
    assert all(a < b for a, b in zip(totals_w, totals_w[1:]))

    totals_y0 = [mass_numeric(make_geometry(y0=y), model).total
                 for y in (-4.0, -2.0, -1.0, -0.5)]
    assert all(a < b for a, b in zip(totals_y0, totals_y0[1:]))


def test_reflection_contributions_decay(model):
    g = make_geometry(w=15.0)
    br = mass_numeric(g, model)   # alpha = 0.75
    values = [v for _, v in br.per_c if v > 1e-12 * br.total]
    assert all(a > b for a, b in zip(values, values[1:]))
    # the tail stays below 1% across the whole reflectivity sweep
    for alpha in (0.5, 0.75, 1.0):
        m = make_channel_model(K=4.0, beta=1e-3, alpha=alpha, C=6)
        br = mass_numeric(g, m)
        tail = sum(v for c, v in br.per_c if c >= 3)
        assert tail / br.total < 0.01


def test_isolation_probability_basics():
    inputs = ClusterInputs(rho=0.1, V=2000.0)
    assert exterior_isolation_prob(0.0, inputs) == 1.0
    assert exterior_isolation_prob(12.0, ClusterInputs(rho=0.0, V=10.0)) == 1.0
    assert exterior_isolation_prob(12.0, inputs) == pytest.approx(math.exp(-1.2))


def test_isolation_log_linear_in_gap(model):
    rho = 0.1
    eps_grid = np.linspace(0.1, 0.5, 9)
    logs = [math.log(exterior_isolation_prob(
        mass_numeric(make_geometry(eps=e), model).total,
        ClusterInputs(rho=rho, V=2000.0))) for e in eps_grid]
    slope, intercept = np.polyfit(eps_grid, logs, 1)
    pred = slope * eps_grid + intercept
    ss_res = float(np.sum((np.array(logs) - pred) ** 2))
    ss_tot = float(np.sum((np.array(logs) - np.mean(logs)) ** 2))
    assert slope < 0.0
    assert 1.0 - ss_res / ss_tot > 0.99


def test_cluster_inputs_derivation():
    ci = ClusterInputs(rho=0.1, V=2000.0)
    assert ci.N == pytest.approx(200.0)
    ci2 = ClusterInputs(N=150.0, V=1500.0)
    assert ci2.rho == pytest.approx(0.1)
    with pytest.raises(ValueError):
        ClusterInputs(rho=0.1, N=100.0, V=2000.0)
    with pytest.raises(ValueError):
        ClusterInputs(V=2000.0)


def test_multi_external_bridge():
    assert multi_external_bridge_prob(0.42, 1) == pytest.approx(0.42)
    assert multi_external_bridge_prob(1.0, 7) == 1.0
    assert multi_external_bridge_prob(0.3, 3) == pytest.approx(0.657)
    with pytest.raises(ValueError):
        multi_external_bridge_prob(1.2, 2)
    with pytest.raises(ValueError):
        multi_external_bridge_prob(0.5, 0)


def test_internal_first_term_trivial_limits(model):
    g = make_geometry()
    assert internal_isolation_first_term(
        g, model, ClusterInputs(rho=0.0, V=2000.0)) == 0.0
    big = internal_isolation_first_term(
        g, model, ClusterInputs(rho=0.2, V=2000.0), "erf_quadrature")
    huge = internal_isolation_first_term(
        g, model, ClusterInputs(rho=2.0, V=2000.0), "erf_quadrature")
    assert huge < big


def test_internal_first_term_oracles_agree_small_domain(model):
    # the two quadrature routes must agree; the box is small to keep it fast
    g = make_geometry(w=8.0, L=14.0, gap_center_x=7.0, x0=7.0)
    inputs = ClusterInputs(rho=0.05, V=g.w * g.L)
    direct = internal_isolation_first_term(g, model, inputs, "direct_quadrature")
    erf = internal_isolation_first_term(g, model, inputs, "erf_quadrature")
    assert direct == pytest.approx(erf, rel=1e-5)


def test_internal_bridge_trivial_limits(model):
    g = make_geometry()
    assert internal_isolation_bridge_term(
        g, model, ClusterInputs(rho=0.0, V=2000.0)) == 0.0
    strong = make_channel_model(K=4.0, beta=50.0, alpha=0.75, C=6)
    assert internal_isolation_bridge_term(
        g, strong, ClusterInputs(rho=0.1, V=2000.0)) == pytest.approx(0.0, abs=1e-30)


def test_internal_bridge_rect_matches_quadrature_scale(model):
    # the bounding-box closed form and the polyline quadrature agree in order
    # of magnitude; boxes overcount, so the closed form sits above
    g = make_geometry(w=8.0, L=14.0, gap_center_x=7.0, x0=7.0)
    inputs = ClusterInputs(rho=0.05, V=g.w * g.L)
    quad = internal_isolation_bridge_term(g, model, inputs)
    rect = internal_isolation_bridge_term(g, model, inputs, method="rect_closed_form")
    assert quad > 0.0
    assert rect >= quad
    assert rect / quad < 50.0


def test_internal_terms_negligible_at_reference(model):
    g = make_geometry()
    inputs = ClusterInputs(rho=0.1, V=2000.0)
    ext = exterior_isolation_prob(mass_numeric(g, model).total, inputs)
    first = internal_isolation_first_term(g, model, inputs, "erf_quadrature")
    bridge = internal_isolation_bridge_term(g, model, inputs)
    assert first <= ext / 10.0
    assert bridge <= ext / 10.0


def test_full_connectivity_assembly(model):
    g = make_geometry()
    res = full_connectivity_first_order(g, model, ClusterInputs(rho=0.1, V=2000.0))
    assert 0.0 <= res.p_fc <= 1.0
    assert res.p_fc == pytest.approx(1.0 - res.exterior_isolation, abs=1e-6)
    assert not res.clamped

    sparse = full_connectivity_first_order(
        make_geometry(eps=1e-8), model, ClusterInputs(rho=0.1, V=2000.0))
    assert sparse.p_fc == pytest.approx(0.0, abs=1e-4)


def test_full_connectivity_dense_limit(model):
    g = make_geometry()
    res = full_connectivity_first_order(g, model, ClusterInputs(rho=5.0, V=2000.0))
    assert res.p_fc == pytest.approx(1.0, abs=1e-6)
