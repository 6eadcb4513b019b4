"""Generator determinism, distributional checks, and scenario parameters."""

import numpy as np
import pytest
from scipy.stats import chi2

from allopca import (
    DegreesOfFreedomError,
    LargePLargeN,
    ModelSpec,
    RegimeSpec,
    Traditional,
    WeakIdentifiability,
    gen_dataset,
    random_gamma,
    scenario_large_p,
    scenario_table1,
    scenario_table2,
    scenario_table3,
    substream,
    sums_of_squares,
)


def small_spec(seed=0, p=3, q=2, n=15, alpha=None, lambdas=(2.0, 1.0, 0.5)):
    if alpha is None:
        alpha = np.ones(q)
    return ModelSpec(
        p=p, q=q, n=n,
        mu=np.zeros(p), alpha=np.asarray(alpha, dtype=float),
        lambdas=np.asarray(lambdas, dtype=float),
        gamma_basis=random_gamma(p, seed),
        master_seed=seed,
    )


# --------------------------------------------------------------------------
# substreams and random_gamma
# --------------------------------------------------------------------------


def test_substream_determinism_and_independence():
    a = substream(7, 3, 0).standard_normal(8)
    b = substream(7, 3, 0).standard_normal(8)
    c = substream(7, 3, 1).standard_normal(8)
    d = substream(8, 3, 0).standard_normal(8)
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()
    assert a.tobytes() != d.tobytes()
    with pytest.raises(ValueError):
        substream(-1, 0)
    with pytest.raises(ValueError):
        substream(1, -2)


def test_random_gamma_orthonormal_and_deterministic():
    for p in (2, 5, 10):
        g = random_gamma(p, 123)
        assert np.abs(g.T @ g - np.eye(p)).max() <= 1e-8
        assert g.tobytes() == random_gamma(p, 123).tobytes()
    assert random_gamma(4, 1).tobytes() != random_gamma(4, 2).tobytes()
    with pytest.raises(ValueError):
        random_gamma(1, 0)


def test_random_gamma_angles_cover_the_circle():
    # leading-eigenvector angles mod pi should be uniform across seeds
    angles = np.empty(1000)
    for seed in range(1000):
        v = random_gamma(2, seed)[:, 0]
        angles[seed] = np.arctan2(v[1], v[0]) % np.pi
    counts = np.bincount((angles / np.pi * 8).astype(int), minlength=8)
    expected = 1000 / 8.0
    stat = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2.sf(stat, df=7) > 0.001


# --------------------------------------------------------------------------
# ModelSpec
# --------------------------------------------------------------------------


def test_model_spec_validation():
    with pytest.raises(ValueError):  # increasing lambdas
        small_spec(lambdas=(1.0, 2.0, 3.0))
    with pytest.raises(ValueError):  # nonpositive lambda
        small_spec(lambdas=(2.0, 1.0, 0.0))
    with pytest.raises(ValueError):  # alpha shape
        small_spec(alpha=np.ones(3))
    with pytest.raises(ValueError):  # n too small
        small_spec(n=3)
    with pytest.raises(ValueError):  # basis not orthonormal
        ModelSpec(p=2, q=1, n=10, mu=np.zeros(2), alpha=np.ones(1),
                  lambdas=np.array([2.0, 1.0]), gamma_basis=np.ones((2, 2)),
                  master_seed=0)


def test_model_spec_sigma_and_properties():
    spec = small_spec(seed=3)
    sigma = spec.sigma()
    assert np.allclose(sigma, sigma.T)
    assert np.allclose(np.sort(np.linalg.eigvalsh(sigma)), np.sort(spec.lambdas))
    assert spec.lambda1 == 2.0 and spec.lambda2 == 1.0
    assert np.allclose(spec.gamma_basis[:, 0], spec.gamma1)


# --------------------------------------------------------------------------
# gen_dataset
# --------------------------------------------------------------------------


def test_gen_dataset_shapes_and_centering():
    spec = small_spec(seed=4, n=25)
    data, gamma1, sigma = gen_dataset(spec, 0)
    assert data.y.shape == (25, 3) and data.x.shape == (25, 2)
    assert np.abs(data.x.sum(axis=0)).max() <= 1e-9 * 25 * np.abs(data.x).max()
    assert np.allclose(gamma1, spec.gamma1)
    assert np.allclose(sigma, spec.sigma())


def test_gen_dataset_deterministic_per_replication():
    spec = small_spec(seed=5)
    d1, _, _ = gen_dataset(spec, 3)
    d2, _, _ = gen_dataset(spec, 3)
    d3, _, _ = gen_dataset(spec, 4)
    assert d1.y.tobytes() == d2.y.tobytes()
    assert d1.x.tobytes() == d2.x.tobytes()
    assert d1.y.tobytes() != d3.y.tobytes()
    with pytest.raises(ValueError):
        gen_dataset(spec, -1)


def test_gen_dataset_noise_covariance():
    spec = small_spec(seed=6, n=5000)
    data, gamma1, sigma = gen_dataset(spec, 0)
    e = data.y - spec.mu - np.outer(data.x @ spec.alpha, gamma1)
    n = e.shape[0]
    cov = e.T @ e / n
    var = np.outer(np.diag(sigma), np.diag(sigma)) + sigma ** 2
    se = np.sqrt(var / n)
    assert np.all(np.abs(cov - sigma) <= 5.0 * se)


def test_gen_dataset_regression_scatter_moment():
    # with alpha = 0 the regression scatter is central Wishart: E[S_R] = q Sigma
    spec = small_spec(seed=7, q=2, n=15, alpha=np.zeros(2))
    sigma = spec.sigma()
    reps = 20000
    draws = np.empty((reps, 3, 3))
    for r in range(reps):
        data, _, _ = gen_dataset(spec, r)
        draws[r] = sums_of_squares(data).s_reg
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(reps)
    assert np.all(np.abs(mean - 2.0 * sigma) <= 4.0 * se)


def test_gen_dataset_noiseless_limit():
    spec = small_spec(seed=8, n=30, lambdas=(1e-12, 1e-12, 1e-12))
    data, gamma1, _ = gen_dataset(spec, 0)
    ss = sums_of_squares(data)
    c = float(np.sum((data.x @ spec.alpha) ** 2))
    target = c * np.outer(gamma1, gamma1)
    err = np.linalg.norm(ss.s_total - target)
    assert err <= 1e-6 * np.linalg.norm(target)


# --------------------------------------------------------------------------
# named scenarios
# --------------------------------------------------------------------------


def test_scenario_table1_settings():
    spec = scenario_table1(20, seed=0)
    assert (spec.p, spec.q, spec.n) == (10, 5, 20)
    assert spec.lambda1 - spec.lambda2 == 1.0
    assert np.all(spec.lambdas[1:] == 1.0)
    assert np.all(spec.alpha == 1.0)
    assert np.all(spec.mu == 0.0)
    again = scenario_table1(20, seed=0)
    assert spec.gamma_basis.tobytes() == again.gamma_basis.tobytes()
    with pytest.raises(DegreesOfFreedomError):
        scenario_table1(7, seed=0)


def test_scenario_table2_settings():
    assert scenario_table2(100, 1.0, 0).lambda1 == pytest.approx(1.01)
    assert scenario_table2(20, 0.5, 0).lambda1 == pytest.approx(1.0 + 20 ** -0.5)
    # continuity with the baseline scenario as eta -> 0
    assert scenario_table2(100, 1e-9, 0).lambda1 == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ValueError):
        scenario_table2(100, 0.0, 0)
    with pytest.raises(DegreesOfFreedomError):
        scenario_table2(6, 1.0, 0)


def test_scenario_table3_settings():
    spec = scenario_table3(20, "weak_spike", 0)
    assert spec.n == 10 and spec.q == 5 and spec.p == 20
    strong = scenario_table3(100, "strong_spike", 0)
    assert strong.lambda1 == pytest.approx(100 ** 0.8)
    assert strong.lambda2 == pytest.approx(100 ** 0.4)
    weak = scenario_table3(500, "weak_spike", 0)
    assert weak.lambda1 == pytest.approx(500 ** 0.25)
    assert weak.lambda2 == 1.0
    with pytest.raises(ValueError):
        scenario_table3(50, "no_such_case", 0)
    with pytest.raises(ValueError):
        scenario_table3(10, "weak_spike", 0)
    with pytest.raises(DegreesOfFreedomError):
        scenario_table3(11, "weak_spike", 0)


def test_scenario_grids_all_valid():
    for n in (20, 50, 100, 200, 500):
        scenario_table1(n, 0)
        for eta in (1.0 / 3.0, 0.5, 1.0):
            scenario_table2(n, eta, 0)
    for p in (20, 50, 100):
        scenario_table3(p, "weak_spike", 0)
        scenario_table3(p, "strong_spike", 0)


def test_scenario_large_p_custom():
    spec = scenario_large_p(40, 0.9, -0.5, 0.0, 0)
    assert spec.n == int(40 ** 0.9)
    assert spec.lambda1 == pytest.approx(1.0 + 40 ** -0.5)
    with pytest.raises(ValueError):
        scenario_large_p(40, 0.9, 0.3, 0.5, 0)  # beta2 >= beta


# --------------------------------------------------------------------------
# regimes
# --------------------------------------------------------------------------


def test_regime_validation():
    with pytest.raises(ValueError):
        WeakIdentifiability(0.0)
    with pytest.raises(ValueError):
        LargePLargeN(0.0, 0.5)
    with pytest.raises(ValueError):
        LargePLargeN(0.8, 1.5)
    with pytest.raises(ValueError):
        RegimeSpec(Traditional(), (50,))
    with pytest.raises(ValueError):
        RegimeSpec(Traditional(), (50, 50))
    with pytest.raises(ValueError):
        RegimeSpec("traditional", (20, 50))


def test_regime_dispatch():
    trad = RegimeSpec(Traditional(), (20, 50, 100))
    assert trad.point_label(20) == "n=20"
    assert trad.model_spec(20, 0).lambda1 == 2.0

    weak = RegimeSpec(WeakIdentifiability(1.0), (20, 50, 100))
    assert weak.model_spec(100, 0).lambda1 == pytest.approx(1.01)

    large = RegimeSpec(LargePLargeN(0.8, 0.8, 0.4), (20, 50))
    assert large.point_label(20) == "p=20"
    spec = large.model_spec(50, 0)
    assert spec.n == int(50 ** 0.8)
    assert spec.lambda1 == pytest.approx(50 ** 0.8)
