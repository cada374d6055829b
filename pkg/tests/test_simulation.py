"""Synthetic designs, substream reproducibility, oracles, selection metrics."""

import numpy as np
import pytest

from confscreen import (
    SimScenario,
    ValidationError,
    evaluate_selection,
    gen_misspecified,
    generate,
    oracle_phi,
    roc_auc,
    roc_curve,
    run_replicates,
    substream,
    uniform_closed_form_phi,
)

UNIFORM = SimScenario(
    kind="uniform_closed_form",
    n=100,
    p=3,
    theta=1.0,
    seed=5,
    alphas=(0.3, 0.3, 0.4),
    betas=(1.0, 0.5, 0.0),
)


def test_scenario_validation():
    with pytest.raises(ValidationError):
        SimScenario(kind="nope", n=100, p=3)
    with pytest.raises(ValidationError):
        SimScenario(kind="low_dim", n=100, p=3)  # needs p >= 15
    with pytest.raises(ValidationError):
        SimScenario(kind="uniform_closed_form", n=100, p=2, alphas=(0.9, 0.9), betas=(0, 0))
    with pytest.raises(ValidationError):
        SimScenario(kind="low_dim", n=100, p=15, rho=1.0)


def test_substream_reproducible_and_independent_of_order():
    a = substream(7, 3).random(5)
    b = substream(7, 3).random(5)
    np.testing.assert_array_equal(a, b)
    # Drawing replicate 0 first must not change replicate 3's stream.
    _ = substream(7, 0).random(1000)
    c = substream(7, 3).random(5)
    np.testing.assert_array_equal(a, c)
    assert not np.array_equal(substream(7, 4).random(5), a)


def test_generate_reproducible():
    sc = SimScenario(kind="low_dim", n=50, p=15, seed=1)
    d1 = generate(sc, 0)
    d2 = generate(sc, 0)
    np.testing.assert_array_equal(d1.dataset.outcome, d2.dataset.outcome)
    np.testing.assert_array_equal(d1.dataset.covariates, d2.dataset.covariates)


def test_low_dim_shapes_and_labels():
    sc = SimScenario(kind="low_dim", n=80, p=20, seed=2)
    sim = generate(sc, 0)
    assert sim.dataset.n == 80 and sim.dataset.p == 20
    assert sim.labels[:5] == ("confounder",) * 5
    assert sim.labels[5:10] == ("precision",) * 5
    assert sim.labels[10:15] == ("instrument",) * 5
    assert sim.labels[15:] == ("spurious",) * 5


def test_ar1_correlation():
    sc = SimScenario(kind="low_dim", n=50000, p=15, rho=0.5, seed=3)
    c = generate(sc, 0).dataset.covariates
    r = np.corrcoef(c[:, 0], c[:, 1])[0, 1]
    r2 = np.corrcoef(c[:, 0], c[:, 2])[0, 1]
    assert r == pytest.approx(0.5, abs=0.02)
    assert r2 == pytest.approx(0.25, abs=0.02)
    assert c[:, 5].std(ddof=1) == pytest.approx(1.0, abs=0.02)


def test_misspecified_design_moments():
    sc = SimScenario(kind="misspecified", n=20000, p=15, theta=0.0, seed=4)
    sim = gen_misspecified(sc, 0)
    # Exposure-model intercept -15 is offset by the mean of the cubic terms.
    assert 0.3 < sim.dataset.exposure.mean() < 0.7


def test_uniform_design_ranges_and_labels():
    sim = generate(UNIFORM, 0)
    c = sim.dataset.covariates
    assert c.min() >= 0.0 and c.max() <= 1.0
    assert sim.labels == ("confounder", "confounder", "instrument")


def test_uniform_closed_form_values():
    assert uniform_closed_form_phi(UNIFORM, 0) == pytest.approx(0.13)
    assert uniform_closed_form_phi(UNIFORM, 1) == pytest.approx(0.08)
    assert uniform_closed_form_phi(UNIFORM, 2) == pytest.approx(0.4 / 3 * 0.4)


def test_oracle_uniform_matches_closed_form():
    for j in range(3):
        mc = oracle_phi(UNIFORM, j, mc_size=400_000, oracle_seed=9)
        closed = uniform_closed_form_phi(UNIFORM, j)
        assert abs(mc.value - closed) < 4.0 * mc.mc_se + 1e-4


def test_oracle_gaussian_spurious_is_zero():
    sc = SimScenario(kind="low_dim", n=100, p=20, rho=0.0, theta=0.0, seed=5)
    mc = oracle_phi(sc, 17, mc_size=10_000)
    assert mc.value == pytest.approx(0.0, abs=1e-12)


def test_oracle_gaussian_precision_variable():
    # Precision variable with rho = 0: tau_j = 0.6 c_j but E independent of c_j,
    # so the arm means coincide and phi = 0.
    sc = SimScenario(kind="low_dim", n=100, p=15, rho=0.0, theta=0.0, seed=6)
    mc = oracle_phi(sc, 6, mc_size=400_000)
    assert abs(mc.value) < 4.0 * mc.mc_se + 1e-3


def test_oracle_target_out_of_range():
    with pytest.raises(ValidationError):
        oracle_phi(UNIFORM, 5, mc_size=100)


def test_oracle_group_uniform():
    mc = oracle_phi(UNIFORM, (0, 1), mc_size=400_000, oracle_seed=10)
    # Additive design: the two-member group score is the sum of member scores.
    closed = uniform_closed_form_phi(UNIFORM, 0) + uniform_closed_form_phi(UNIFORM, 1)
    assert abs(mc.value - closed) < 4.0 * mc.mc_se + 1e-3


def test_evaluate_selection():
    labels = ["confounder", "confounder", "precision", "spurious"]
    sens, spec = evaluate_selection([0, 2], labels)
    assert sens == 0.5 and spec == 0.5
    sens, spec = evaluate_selection([0, 1], labels)
    assert sens == 1.0 and spec == 1.0


def test_roc_curve_perfect_ranking():
    labels = ["confounder", "confounder", "spurious", "spurious"]
    points = roc_curve([0.9, 0.8, 0.1, 0.05], labels)
    assert points.shape == (5, 2)
    np.testing.assert_allclose(points[0], [0.0, 0.0])
    np.testing.assert_allclose(points[2], [1.0, 0.0])
    np.testing.assert_allclose(points[-1], [1.0, 1.0])
    assert roc_auc(points) == pytest.approx(1.0)


def test_roc_curve_worst_ranking():
    labels = ["confounder", "spurious"]
    points = roc_curve([0.0, 1.0], labels)
    assert roc_auc(points) == pytest.approx(0.0)


def test_run_replicates_smoke():
    sc = SimScenario(kind="low_dim", n=200, p=15, seed=8, replicates=2)
    res = run_replicates(sc, "tmle", rule=("top_k", 5))
    assert res.sensitivity.shape == (2,)
    assert res.phi_hats.shape == (2, 15)
    assert res.roc_mean.shape == (16, 2)
    assert 0.0 <= res.aggregates["mean_sensitivity"] <= 1.0


def test_run_replicates_deterministic():
    sc = SimScenario(kind="low_dim", n=150, p=15, seed=9, replicates=2)
    a = run_replicates(sc, "dr", rule=("top_k", 3))
    b = run_replicates(sc, "dr", rule=("top_k", 3), threads=3)
    np.testing.assert_array_equal(a.phi_hats, b.phi_hats)
    np.testing.assert_array_equal(a.sensitivity, b.sensitivity)
