from __future__ import annotations

import numpy as np
import pytest

from lazyoqw.clt import clt_report, steady_state
from lazyoqw.exceptions import NormalizationError, StructureError
from lazyoqw.model import MicroscopicSpec, maximally_mixed
from lazyoqw.zoo import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_Y,
    CircleParams,
    Example2Params,
    Example3Params,
    build_circle,
    build_example2,
    build_example3,
    build_microscopic,
    circle_analytic,
    circle_spec,
    example2_analytic,
    example3_analytic,
    gksl_residual,
    residual_constant,
    zoo_analytic,
    zoo_model,
)

from oracles import loglog_slope


def _draws(seed, count):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        v = rng.normal(size=3)
        yield rng, dict(
            gamma=rng.uniform(0.01, 1), lam=rng.uniform(0.05, 1), nbar=rng.uniform(0, 3),
            delta=rng.uniform(0.01, 0.1), n_vec=tuple(v / np.linalg.norm(v)),
        )


def _rel(a, b):
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_zero_jumps_give_lazy_model():
    spec = MicroscopicSpec(np.zeros((2, 2)), (np.zeros((2, 2)),) * 2, 0.05)
    model = build_microscopic(spec)
    assert model.residual == 0.0
    np.testing.assert_array_equal(model.ops[0], np.eye(2))


def test_microscopic_builder_reproduces_circle():
    p = CircleParams(gamma=0.1, nbar=1, lam=0.3, delta=0.05)
    a = build_microscopic(circle_spec(p))
    b = build_circle(p)
    for x, y in zip(a.ops, b.ops):
        np.testing.assert_allclose(x, y, atol=1e-15)


def test_residual_is_exactly_quadratic_in_delta():
    res = []
    deltas = [0.08, 0.04, 0.02, 0.01]
    for dl in deltas:
        res.append(build_microscopic(circle_spec(CircleParams(delta=dl, n_vec=(0.6, 0.0, 0.8)))).residual)
    assert 3.5 <= res[0] / res[1] <= 4.5
    assert abs(loglog_slope(deltas, res) - 2) <= 0.3


def test_residual_constant_reported():
    model = build_microscopic(circle_spec(CircleParams()))
    assert residual_constant(model) == pytest.approx(model.residual / 0.05**2)
    assert model.residual <= residual_constant(model) * 0.05**2 * (1 + 1e-12)


def test_caller_tolerance_is_enforced():
    with pytest.raises(NormalizationError) as info:
        build_microscopic(circle_spec(CircleParams()), tol=1e-8)
    assert info.value.residual > 1e-8


def test_gksl_residual_zero_for_trivial_generator():
    spec = MicroscopicSpec(np.zeros((2, 2)), (np.zeros((2, 2)),) * 2, 0.1)
    model = build_microscopic(spec)
    assert gksl_residual(model, np.diag([0.3, 0.7])) == 0.0


def test_gksl_residual_scales_linearly_at_discrete_steady_state():
    deltas = [0.08, 0.04, 0.02, 0.01]
    res = []
    for dl in deltas:
        model = build_circle(CircleParams(delta=dl))
        res.append(gksl_residual(model, steady_state(model, "kraus")))
    assert abs(loglog_slope(deltas, res) - 1) <= 0.3


def test_gksl_residual_detects_wrong_state():
    model = build_circle(CircleParams())
    assert gksl_residual(model, maximally_mixed(2)) > 1e-2
    assert gksl_residual(model, steady_state(model)) <= 1e-12


def test_gksl_residual_needs_microscopic_model(line_walk):
    with pytest.raises(StructureError):
        gksl_residual(line_walk, maximally_mixed(2))


def test_circle_gamma_zero_has_no_motion():
    model = build_circle(CircleParams(gamma=0.0))
    assert not np.any(model.ops[1]) and not np.any(model.ops[2])


def test_circle_nz_one_has_no_drift():
    m, _ = circle_analytic(CircleParams(n_vec=(0, 0, 1)))
    assert m == 0.0


def test_circle_fig5_values():
    m, s2 = circle_analytic(CircleParams())
    assert m == pytest.approx(0.00222, abs=5e-6)
    assert s2 == pytest.approx(0.00645, abs=5e-6)


def test_circle_params_validation():
    with pytest.raises(StructureError):
        CircleParams(n_vec=(1, 1, 0))
    with pytest.raises(StructureError):
        CircleParams(delta=0)
    with pytest.raises(StructureError):
        CircleParams(gamma=-1)


def test_circle_analytic_matches_pipeline_on_random_draws():
    worst = 0.0
    for _, kw in _draws(1, 100):
        p = CircleParams(**kw)
        rep = clt_report(build_circle(p))
        m, s2 = circle_analytic(p)
        worst = max(worst, _rel(m, rep.m), _rel(s2, rep.C))
    assert worst <= 1e-8


def test_example2_analytic_matches_pipeline_on_random_draws():
    worst = 0.0
    for rng, kw in _draws(2, 100):
        p = Example2Params(gamma_y_plus=rng.uniform(0.01, 1), gamma_y_minus=rng.uniform(0.01, 1), **kw)
        rep = clt_report(build_example2(p))
        m, C = example2_analytic(p)
        worst = max(worst, _rel(m, rep.m), _rel(C, rep.C))
    assert worst <= 1e-8


def test_example3_analytic_matches_pipeline_on_random_draws():
    worst = 0.0
    for rng, kw in _draws(3, 100):
        p = Example3Params(gamma_x=rng.uniform(0.01, 1), gamma_y=rng.uniform(0.01, 1),
                           nbar=kw["nbar"], lam=kw["lam"], delta=kw["delta"])
        rep = clt_report(build_example3(p))
        m, C = example3_analytic(p)
        worst = max(worst, _rel(m, rep.m), _rel(C, rep.C))
    assert worst <= 1e-8


def test_example2_without_y_coupling_reduces_to_circle():
    p2 = Example2Params(gamma_y_plus=0.0, gamma_y_minus=0.0)
    rep = clt_report(build_example2(p2))
    circ = clt_report(build_circle(CircleParams()))
    assert rep.m[1] == 0.0 and rep.C[1, 1] == 0.0
    assert rep.m[0] == pytest.approx(circ.m[0], rel=1e-12)
    assert rep.C[0, 0] == pytest.approx(circ.C[0, 0], rel=1e-12)


def test_example2_offdiagonal_vanishes_at_equal_rates():
    p = Example2Params(gamma_y_plus=0.37, gamma_y_minus=0.37, n_vec=(0.6, 0.48, 0.64))
    rep = clt_report(build_example2(p))
    assert abs(rep.C[0, 1]) <= 1e-14
    m, C = example2_analytic(p)
    assert m[1] == 0.0 and C[0, 1] == 0.0


def test_example2_yy_is_exact():
    p = Example2Params()
    rep = clt_report(build_example2(p))
    assert rep.C[1, 1] == pytest.approx(p.delta * (p.gamma_y_plus + p.gamma_y_minus), abs=1e-12)
    assert rep.m[1] == pytest.approx(0.0, abs=1e-15)


def test_example3_swap_symmetry():
    a = clt_report(build_example3(Example3Params(gamma_x=0.7, gamma_y=0.2)))
    b = clt_report(build_example3(Example3Params(gamma_x=0.2, gamma_y=0.7)))
    np.testing.assert_allclose(a.m, b.m[::-1], rtol=1e-10)
    assert a.C[0, 1] == pytest.approx(b.C[0, 1], rel=1e-10)
    np.testing.assert_allclose(np.diag(a.C), np.diag(b.C)[::-1], rtol=1e-10)


def test_example3_equal_rates_equal_drift():
    m, _ = example3_analytic(Example3Params(gamma_x=0.4, gamma_y=0.4))
    assert m[0] == m[1]


def test_example3_rejects_other_axes():
    with pytest.raises(StructureError):
        Example3Params(n_vec=(1.0, 0.0, 0.0))


def test_example3_operators():
    model = build_example3(Example3Params(gamma_x=0.55, gamma_y=0.45, nbar=1, lam=0.3, delta=0.05))
    np.testing.assert_allclose(model.ops[1], np.sqrt(0.05 * 0.55 * 2) * SIGMA_MINUS)
    np.testing.assert_allclose(model.ops[4], np.sqrt(0.05 * 0.45) * SIGMA_PLUS)
    np.testing.assert_allclose(model.micro.H0, 0.3 * SIGMA_Y)


def test_zoo_registry():
    assert zoo_model("circle", {"gamma": 0.2}).micro.jumps[0][1, 0] == pytest.approx(np.sqrt(0.4))
    m, C = zoo_analytic("example3")
    assert C.shape == (2, 2)
    with pytest.raises(StructureError):
        zoo_model("nope")
    with pytest.raises(StructureError):
        zoo_model("circle", {"bogus": 1})
    with pytest.raises(StructureError):
        zoo_model("paper-line", {"gamma": 1})
