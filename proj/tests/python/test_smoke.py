import json
import math

import numpy as np
import pytest

import specflow as sf


def scalar_path(a=-1.0, b=1.0):
    ess = [-1.0, 1.0]
    return sf.line_path(sf.FramedOperator(np.array([[a]]), ess), sf.FramedOperator(np.array([[b]]), ess))


def test_scalar_path_all_estimators_agree():
    path = scalar_path()
    report = sf.sf_integral_bounded(path, sf.weight("bump", delta=0.5, m=2), quad_tol=1e-10, grid=16)
    assert report["sf_partition"] == report["sf_crossing"] == report["rounded_total"] == 1
    assert abs(report["total"] - 1.0) < 1e-9
    assert set(report) == {
        "sf_partition", "sf_crossing", "integral_value", "boundary_term", "total",
        "rounded_total", "integer_defect", "quadrature_error_estimate", "wall_time",
    }
    assert sf.sf_partition(sf.reversed(path), 8) == -1
    events = sf.crossing_events(path, 8)
    assert len(events) == 1
    t, _, direction = events[0]
    assert abs(t - 0.5) < 1e-8 and direction == 1


def test_unbounded_scalar_gaussian():
    ess = []
    d0 = sf.FramedOperator(np.array([[-1.0]]), ess)
    d1 = sf.FramedOperator(np.array([[1.0]]), ess)
    path = sf.line_path(d0, d1, unbounded=True)
    report = sf.sf_integral_unbounded(path, sf.weight("gaussian", epsilon=1.0), quad_tol=1e-12)
    assert report["rounded_total"] == 1
    assert abs(report["total"] - 1.0) < 1e-9


def test_weights():
    w = sf.weight("bump", delta=0.5, m=2)
    assert w.compact and w.support == (-0.5, 0.5)
    x = np.linspace(-0.7, 0.7, 15)
    assert np.allclose(w.antiderivative(x) + w.antiderivative(-x), 0.0, atol=1e-14)
    total, _ = sf.integrate(lambda s: float(w.density(s)), -0.5, 0.5, 1e-12)
    assert abs(total - 1.0) < 1e-10
    assert math.isclose(sf.weight("resolvent", p=1, variant="half_shift").mass, math.pi, rel_tol=1e-12)
    with pytest.raises(sf.InvalidSpec):
        sf.weight("bump", delta=-1.0)
    with pytest.raises(sf.InvalidSpec):
        sf.weight("triangle")


def test_loop_and_hypothesis_errors():
    loop = sf.trig_loop(3, 4, 0.2, 3)
    assert abs(sf.loop_integral(loop, sf.weight("bump"), 1e-10)) < 1e-8 * (1 + sf.arc_length(loop))
    with pytest.raises(sf.HypothesisViolation):
        sf.sf_integral_bounded(scalar_path(), sf.weight("bump", delta=1.0), 1e-8)
    with pytest.raises(sf.Error):
        sf.sf_integral_bounded(scalar_path(), sf.weight("gaussian"), 1e-8)


def test_operator_and_retract():
    rng = np.random.default_rng(5)
    m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    f = sf.FramedOperator(2.0 * (m + m.conj().T), [-0.4, 3.0])
    g = sf.retract(f, 1.0)
    data = g.essential_data()
    assert data["in_f_pm1"] and g.op_norm() <= 1.0 + 1e-12
    assert np.array_equal(sf.retract(f, 0.0).block, f.block)
    with pytest.raises(sf.InvalidInput):
        sf.FramedOperator(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_doi_identity():
    rng = np.random.default_rng(11)
    for _ in range(3):
        a = rng.normal(size=(6, 6))
        b = rng.normal(size=(6, 6))
        A = sf.FramedOperator(a + a.T)
        B = sf.FramedOperator(b + b.T)
        assert sf.perturbation_residual("tanh", A, B) < 1e-10 * 10
    assert sf.divided_difference("x2", 1.0, 3.0) == 4.0


def test_partition_matches_crossing_on_random_paths():
    for seed in range(5):
        path = sf.trig_path(seed, 6, amplitude=0.15, base_radius=0.35, drift=0.4)
        assert sf.sf_partition(path, 32) == sf.sf_crossing(path, 32)


def test_run_config_and_acceptance():
    config = {
        "scenarios": [
            {"id": "doi", "kind": "doi_check", "dim": 8, "path_spec": {"function": "tanh"}},
            {"id": "flat", "kind": "loop_test", "dim": 3, "path_spec": {"amplitude": 0.0}},
        ]
    }
    reports = [json.loads(r) for r in sf.run_config(json.dumps(config))]
    assert [r["scenario_id"] for r in reports] == ["doi", "flat"]
    assert all(r["pass"] for r in reports)
    assert reports[1]["report"]["integral_value"] == 0.0
    with pytest.raises(sf.ConfigError):
        sf.run_config('{"scenarios": [{"id": "x", "kind": "nope"}]}')
    results = sf.run_acceptance("C06")
    assert len(results) == 1 and results[0]["pass"]
