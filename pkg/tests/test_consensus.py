import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.base import clone

from conftest import make_table
from namecct.consensus import (
    CulturalConsensus,
    ReportMatrix,
    agreement_rate,
    average_consensus,
    binarize_reports,
    cct_expectation,
    cct_fit,
    cct_maximization,
    read_fit,
    synth_generate,
    write_fit,
)

nan = np.nan


def direct_e_step(X, c):
    """Straight product form, no logs; only for small matrices."""
    z = []
    for row in X:
        a = b = 1.0
        for x, cn in zip(row, c):
            if x != x:
                continue
            a *= x * cn + (1 - x) * (1 - cn)
            b *= x * (1 - cn) + (1 - x) * cn
        z.append(a / (a + b))
    return z


def direct_m_step(X, z):
    c = []
    for n in range(len(X[0])):
        terms = [X[m][n] * z[m] + (1 - X[m][n]) * (1 - z[m]) for m in range(len(X)) if X[m][n] == X[m][n]]
        c.append(sum(terms) / len(terms))
    return c


def direct_fit(X, c0=0.9, tol=1e-8, max_iter=500):
    c = [c0] * len(X[0])
    z = None
    for _ in range(max_iter):
        z_new = direct_e_step(X, c)
        c_new = direct_m_step(X, z_new)
        done = z is not None and max(abs(p - q) for p, q in zip(z_new, z)) < tol and max(
            abs(p - q) for p, q in zip(c_new, c)) < tol
        z, c = z_new, c_new
        if done:
            break
    return z, c


def test_expectation_examples():
    assert cct_expectation(np.array([[1.0]]), [0.9])[0] == pytest.approx(0.9, abs=1e-15)
    assert cct_expectation(np.array([[1.0, 1.0]]), [0.9, 0.9])[0] == pytest.approx(0.81 / 0.82, abs=1e-15)
    assert cct_expectation(np.array([[1.0, 0.0]]), [0.9, 0.9])[0] == 0.5


def test_expectation_ignores_missing():
    X = np.array([[1.0, nan], [nan, 0.0]])
    assert cct_expectation(X, [0.8, 0.7]).tolist() == pytest.approx([0.8, 0.3])


def test_expectation_no_underflow_with_many_sources():
    X = np.ones((1, 401))
    X[0, :200] = 0
    # one net vote: z = c, while both direct products underflow to zero
    assert cct_expectation(X, np.full(401, 0.99))[0] == pytest.approx(0.99, rel=1e-12)
    with np.errstate(all="ignore"):
        assert math.isnan(direct_e_step(X, [0.99] * 401)[0])


@given(arrays(float, (4, 3), elements=st.sampled_from([0.0, 1.0, nan])),
       st.lists(st.floats(0.05, 0.95), min_size=3, max_size=3))
@settings(max_examples=200)
def test_expectation_matches_direct_product(X, c):
    np.testing.assert_allclose(cct_expectation(X, c), direct_e_step(X, c), rtol=1e-12, atol=1e-14)


def test_maximization_examples():
    assert cct_maximization(np.array([[1.0], [0.0]]), [1.0, 0.0])[0] == 1.0
    assert cct_maximization(np.array([[1.0], [1.0]]), [1.0, 0.0])[0] == 0.5
    assert cct_maximization(np.array([[1.0], [1.0]]), [0.9, 0.9])[0] == pytest.approx(0.9, abs=1e-15)


def test_maximization_only_over_reported_names():
    X = np.array([[1.0, nan], [nan, 1.0], [0.0, 1.0]])
    z = [0.8, 0.6, 0.1]
    np.testing.assert_allclose(cct_maximization(X, z), direct_m_step(X.tolist(), z), rtol=1e-14)


def test_fit_all_ones():
    X = np.ones((5, 3))
    # first E-step from c0 = 0.9: 0.729 / 0.730
    assert cct_expectation(X, [0.9] * 3)[0] == pytest.approx(0.729 / 0.730, rel=1e-14)
    fit = cct_fit(X)
    assert fit.converged
    np.testing.assert_allclose(fit.z, 1.0, atol=1e-8)
    np.testing.assert_allclose(fit.c, 1.0, atol=1e-8)


def _random_reports(rng, m=40, n=6, missing=0.3):
    c = rng.uniform(0.6, 0.95, n)
    z = rng.integers(0, 2, m)
    X = synth_generate(c, z, seed=int(rng.integers(1 << 31))).values
    X[rng.random(X.shape) < missing] = nan
    X[np.isnan(X).all(axis=1), 0] = 1.0
    X[0, np.isnan(X).all(axis=0)] = 1.0
    return X


@pytest.mark.parametrize("seed", range(5))
def test_fit_matches_direct_oracle(seed):
    X = _random_reports(np.random.default_rng(seed))
    fit = cct_fit(X)
    z, c = direct_fit(X.tolist())
    np.testing.assert_allclose(fit.z, z, atol=1e-9)
    np.testing.assert_allclose(fit.c, c, atol=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_label_flip_is_exact(seed):
    X = _random_reports(np.random.default_rng(seed))
    a, b = cct_fit(X), cct_fit(1.0 - X)
    assert np.array_equal(b.z, 1.0 - a.z)
    assert np.array_equal(b.c, a.c)
    assert a.iterations == b.iterations


@pytest.mark.parametrize("seed", range(10))
def test_permutation_equivariance_is_exact(seed):
    rng = np.random.default_rng(seed)
    X = _random_reports(rng)
    pr, pc = rng.permutation(X.shape[0]), rng.permutation(X.shape[1])
    a, b = cct_fit(X), cct_fit(X[pr][:, pc])
    assert np.array_equal(b.z, a.z[pr])
    assert np.array_equal(b.c, a.c[pc])


@pytest.mark.parametrize("seed", range(3))
def test_initialization_invariance(seed):
    X = _random_reports(np.random.default_rng(seed), m=200)
    fits = [cct_fit(X, c0) for c0 in (0.55, 0.7, 0.9, 0.99)]
    for f in fits[1:]:
        assert np.max(np.abs(f.z - fits[0].z)) < 1e-6


def test_fixed_point_property():
    X = _random_reports(np.random.default_rng(3), m=300)
    fit = cct_fit(X, tol=1e-10)
    z = cct_expectation(X, fit.c)
    c = cct_maximization(X, z)
    assert np.max(np.abs(z - fit.z)) <= 1e-10
    assert np.max(np.abs(c - fit.c)) <= 1e-10


def test_bounds_every_iteration():
    X = _random_reports(np.random.default_rng(4))
    for k in range(1, 30):
        fit = cct_fit(X, max_iter=k)
        assert np.all((0 <= fit.z) & (fit.z <= 1))
        assert np.all((0 <= fit.c) & (fit.c <= 1))


def test_non_convergence_is_reported():
    X = _random_reports(np.random.default_rng(5))
    fit = cct_fit(X, max_iter=2)
    assert not fit.converged and fit.iterations == 2


def test_bad_initial_competence():
    with pytest.raises(ValueError):
        cct_fit(np.ones((2, 2)), c0=0.5)


def test_report_validation():
    with pytest.raises(ValueError, match="0 or 1"):
        cct_fit(np.array([[0.5]]))
    with pytest.raises(ValueError, match="every name"):
        cct_fit(np.array([[1.0, 0.0], [nan, nan]]))
    with pytest.raises(ValueError, match="every source"):
        cct_fit(np.array([[1.0, nan], [0.0, nan]]))


def test_recovers_planted_competences():
    rng = np.random.default_rng(0)
    c_true = rng.uniform(0.6, 0.95, 10)
    z_true = rng.integers(0, 2, 2000)
    fit = cct_fit(synth_generate(c_true, z_true, seed=1))
    assert np.max(np.abs(fit.c - c_true)) < 0.03


def test_synth_generate_examples():
    z = np.array([0, 1, 1, 0])
    assert np.array_equal(synth_generate(np.ones(3), z, seed=0).values, np.tile(z[:, None], 3))
    a, b = synth_generate([0.7, 0.8], z, seed=42), synth_generate([0.7, 0.8], z, seed=42)
    assert np.array_equal(a.values, b.values)


def test_synth_agreement_law_of_large_numbers():
    eps, m = 0.02, 200_000
    z = np.random.default_rng(0).integers(0, 2, m)
    r = synth_generate([0.5 + eps], z, seed=9)
    rate = agreement_rate(r, z)[0]
    sd = math.sqrt((0.5 + eps) * (0.5 - eps) / m)
    assert abs(rate - (0.5 + eps)) < 3 * sd


def test_binarize_examples():
    t = make_table({
        "s": {"anna": (99, 1), "kim": (4, 6), "alex": (5, 5)},
        "u": {"anna": (9, 1), "alex": (5, 5)},
    })
    r, skipped = binarize_reports(t)
    assert r.sources == ("s", "u")
    assert r.names == ("anna", "kim")
    assert skipped == ["alex"]
    np.testing.assert_array_equal(r.values, [[1.0, 1.0], [0.0, nan]])


def test_average_consensus_examples():
    t = make_table({"a": {"x": (9, 1), "y": (1, 9), "w": (1, 0)}, "b": {"x": (10, 0), "y": (9, 1)}})
    avg = average_consensus(t)
    assert avg["x"] == pytest.approx(0.95)
    assert avg["y"] == pytest.approx(0.5)
    assert avg["w"] == 1.0
    assert "nobody" not in avg


def test_average_consensus_within_source_range(fixture_table):
    avg = average_consensus(fixture_table)
    for name in fixture_table.names:
        ps = fixture_table.p_f_by_source(name).values()
        assert min(ps) - 1e-15 <= avg[name] <= max(ps) + 1e-15


def test_fit_serialization_round_trip(tmp_path, fixture_table):
    r, _ = binarize_reports(fixture_table)
    fit = cct_fit(r)
    write_fit(fit, tmp_path / "run_")
    comp, cons = read_fit(tmp_path / "run_")
    assert comp == fit.competences()
    assert cons == fit.consensus()
    for name, z in cons.items():
        assert float(f"{z:.12g}") == float(f"{fit.consensus()[name]:.12g}")


def test_estimator_api():
    rng = np.random.default_rng(2)
    X = _random_reports(rng)
    est = CulturalConsensus(init_competence=0.8)
    assert est.get_params() == {"init_competence": 0.8, "tol": 1e-8, "max_iter": 500}
    est.fit(X)
    fit = cct_fit(X, 0.8)
    np.testing.assert_array_equal(est.consensus_, fit.z)
    np.testing.assert_array_equal(est.transform(X)[:, 0], cct_expectation(X, fit.c))
    proba = est.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert set(est.predict(X)) <= {-1, 0, 1}
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(ValueError):
        est.transform(X[:, :2])


def test_report_matrix_shape_check():
    with pytest.raises(ValueError):
        ReportMatrix(np.ones((2, 2)), ("a",), ("s", "t"))
