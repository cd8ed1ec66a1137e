import numpy as np
import pytest
from conftest import worked_example_model
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import grid_bounded_regression, planted_two_leaf

from comptree.basis import standard_catalog
from comptree.solver import (
    Dataset,
    FitConfig,
    coordinate_descent,
    fit,
    path_constants,
    predict,
    regress_bounded,
    regress_bounded_columns,
    risk,
    rss,
    solve_insertion,
    trace_csv,
)
from comptree.tree import PLUS, TIMES, Leaf, Model, Op, evaluate, iter_leaves, random_model, serialize


# --- path constants ------------------------------------------------------------

def test_worked_example_path_constants(small_basis):
    b, k = path_constants(worked_example_model(small_basis), ("left", "right"), [1.0, 1.0, 1.0])
    assert b == pytest.approx(0.002, abs=1e-15)
    assert k == pytest.approx(0.02, abs=1e-15)


def test_root_path_is_identity(small_basis):
    assert path_constants(worked_example_model(small_basis), (), [0.2, 0.3, 0.4]) == (0.0, 1.0)


def test_bad_path(small_basis):
    with pytest.raises(ValueError):
        path_constants(worked_example_model(small_basis), "LLL", [0.2, 0.3, 0.4])


def test_path_constant_identity():
    basis = standard_catalog(10)
    rng = np.random.default_rng(7)
    for _ in range(100):
        m = random_model(int(rng.integers(0, 7)), 3, basis, rng)
        X = rng.uniform(size=(25, 3))
        out = evaluate(m, X)
        for path, leaf in iter_leaves(m.root):
            b, k = path_constants(m, path, X)
            leaf_val = leaf.weight * basis[leaf.phi].norm * basis[leaf.phi].raw(X[:, leaf.dim - 1])
            np.testing.assert_allclose(m.intercept + b + k * leaf_val, out, rtol=1e-10, atol=1e-12)


# --- bounded simple regression ---------------------------------------------------

def test_clip_example():
    a = np.linspace(-1, 1, 11)
    t = 2 * a + 0.3
    sol = regress_bounded(t, a)
    assert sol.w == 1.0
    assert sol.w0 == pytest.approx(np.mean(t))
    assert not sol.degenerate


def test_constant_target():
    sol = regress_bounded(np.full(6, 1.7), np.arange(6.0))
    assert sol.w == 0.0
    assert sol.w0 == pytest.approx(1.7)
    assert sol.rss == pytest.approx(0.0, abs=1e-24)


def test_zero_regressor_under_times():
    sol = solve_insertion(np.arange(5.0), 0.0, 1.0, np.zeros(5), np.ones(5), TIMES)
    assert sol.degenerate
    assert sol.w == 0.0


def test_insertion_targets():
    y, b, k, c, phi = np.array([1.0, 2.0]), np.array([0.1, 0.2]), np.array([2.0, 3.0]), np.array([0.5, 0.25]), np.array([0.4, 0.8])
    plus = solve_insertion(y, b, k, c, phi, PLUS)
    ref = regress_bounded(y - b - k * c, k * phi)
    assert plus == ref
    times = solve_insertion(y, b, k, c, phi, TIMES)
    assert times == regress_bounded(y - b, k * c * phi)
    with pytest.raises(ValueError):
        solve_insertion(y, b, k, c, phi, "-")


def test_grid_optimality():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(3, 40))
        a = rng.normal(size=n) * rng.uniform(0.1, 3)
        t = rng.uniform(-3, 3) * a + rng.normal(size=n) * rng.uniform(0, 2)
        sol = regress_bounded(t, a)
        assert sol.rss <= grid_bounded_regression(t, a) + 1e-8
        r = t - sol.w0 - sol.w * a
        assert sol.rss == pytest.approx(float(r @ r), rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_columns_match_scalar(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 30))
    A = rng.normal(size=(n, 5)) * rng.uniform(0, 2, size=5)
    A[:, 0] = 1.0  # constant column is degenerate
    t = rng.normal(size=n)
    w, r = regress_bounded_columns(t, A)
    for j in range(5):
        sol = regress_bounded(t, A[:, j])
        assert w[j] == pytest.approx(sol.w, abs=1e-12)
        assert r[j] == pytest.approx(sol.rss, rel=1e-9, abs=1e-10)


# --- prediction and risk ------------------------------------------------------

def test_risk_examples():
    m = Model(1.0)
    d = Dataset(np.zeros((1, 2)), [3.0])
    assert risk(m, d, "sq") == pytest.approx(2.0)
    assert risk(m, d, "clipped") == pytest.approx(1.0)
    perfect = Dataset(np.zeros((4, 2)), np.ones(4))
    assert risk(m, perfect, "sq") == 0.0 and risk(m, perfect, "clipped") == 0.0
    with pytest.raises(ValueError):
        risk(m, d, "abs")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_clipped_never_above_squared(ys):
    d = Dataset(np.zeros((len(ys), 1)), ys)
    m = Model(0.0)
    c, s = risk(m, d, "clipped"), risk(m, d, "sq")
    assert c <= s + 1e-15 and c <= 1.0


def test_predict_width_mismatch():
    m = Model(0.0, Leaf(1.0, 1, 1), p=2, basis=standard_catalog(2))
    with pytest.raises(ValueError):
        predict(m, np.zeros((3, 3)))


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), [1.0, 2.0])
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), [1.0])


# --- coordinate descent -------------------------------------------------------

def _single_leaf_data(seed=0, n=60):
    rng = np.random.default_rng(seed)
    basis = standard_catalog(6)
    X = rng.uniform(size=(n, 2))
    y = 0.2 + 0.6 * np.cos(np.pi * X[:, 1]) + 0.05 * rng.normal(size=n)
    return basis, Dataset(X, y)


def test_cd_fixed_point():
    basis, d = _single_leaf_data()
    direct = regress_bounded(d.y, basis[2].raw(d.X[:, 1]))
    m = Model(direct.w0, Leaf(direct.w, 2, 2), p=2, basis=basis)
    out, hist = coordinate_descent(m, d, return_history=True)
    assert len(hist) == 2
    assert out.intercept == pytest.approx(m.intercept, abs=1e-12)
    assert out.root.weight == pytest.approx(m.root.weight, abs=1e-12)


def test_cd_recovers_single_leaf_regression():
    basis, d = _single_leaf_data(1)
    direct = regress_bounded(d.y, basis[2].raw(d.X[:, 1]))
    m = Model(direct.w0 + 0.3, Leaf(direct.w - 0.4, 2, 2), p=2, basis=basis)
    out = coordinate_descent(m, d, FitConfig(cd_passes_max=1))
    assert rss(out, d) == pytest.approx(direct.rss, abs=1e-10)


def test_cd_does_not_mutate_input():
    basis, d = _single_leaf_data(2)
    m = Model(0.0, Leaf(0.1, 2, 2), p=2, basis=basis)
    coordinate_descent(m, d)
    assert m.root.weight == 0.1 and m.intercept == 0.0


def test_cd_monotone_history():
    basis = standard_catalog(8)
    rng = np.random.default_rng(5)
    for _ in range(100):
        m = random_model(int(rng.integers(0, 6)), 3, basis, rng)
        X = rng.uniform(size=(40, 3))
        d = Dataset(X, rng.normal(size=40))
        out, hist = coordinate_descent(m, d, FitConfig(cd_passes_max=10, cd_rel_tol=0.0), return_history=True)
        assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(hist, hist[1:]))
        assert np.all(np.abs(out.weights) <= 1.0)


def test_cd_requires_leaf():
    with pytest.raises(ValueError):
        coordinate_descent(Model(0.0, basis=standard_catalog(2)), Dataset(np.zeros((2, 1)), [0.0, 1.0]))


# --- greedy search ------------------------------------------------------------

@pytest.mark.parametrize("phi,dim", [(1, 1), (4, 3), (7, 2)])
def test_planted_single_leaf(phi, dim):
    basis = standard_catalog(10)
    rng = np.random.default_rng(phi * 10 + dim)
    X = rng.uniform(size=(150, 3))
    y = 0.1 + 0.7 * basis[phi].norm * basis[phi].raw(X[:, dim - 1])
    m = fit(Dataset(X, y), basis, FitConfig(iters=0))
    assert rss(m, Dataset(X, y)) <= 1e-18
    assert (m.root.phi, m.root.dim) == (phi, dim)
    assert m.root.weight == pytest.approx(0.7)


def test_zero_target():
    basis = standard_catalog(4)
    d = Dataset(np.random.default_rng(0).uniform(size=(30, 2)), np.zeros(30))
    m = fit(d, basis, FitConfig(iters=3))
    assert m.intercept == 0.0
    assert np.all(m.weights == 0.0)
    assert rss(m, d) == 0.0


def test_greedy_rss_non_increasing():
    basis = standard_catalog(6)
    rng = np.random.default_rng(9)
    for seed in range(10):
        X = rng.uniform(size=(80, 3))
        y = np.sin(3 * X[:, 0]) * X[:, 1] + 0.1 * rng.normal(size=80)
        trace = []
        m = fit(Dataset(X, y), basis, FitConfig(iters=5, early_stop=False), trace=trace)
        rs = [row.rss for row in trace]
        assert all(b <= a + 1e-9 for a, b in zip(rs, rs[1:]))
        assert m.n_leaves == 6
        assert np.all(np.abs(m.weights) <= 1.0)


def test_early_stop_on_exact_fit():
    basis = standard_catalog(4)
    X = np.random.default_rng(1).uniform(size=(50, 2))
    y = 0.5 * np.sin(np.pi * X[:, 0])
    trace = []
    m = fit(Dataset(X, y), basis, FitConfig(iters=5), trace=trace)
    assert m.n_leaves == 1 and len(trace) == 1


def test_recovers_planted_pair():
    basis = standard_catalog(2)
    d, truth = planted_two_leaf(0, basis=basis)
    m = fit(d, basis, FitConfig(iters=2))
    assert rss(m, d) <= 1e-12


def test_fold_option_handles_small_init_weight():
    # planted product whose init leaf gets a tiny weight; the literal rule clips the new weight
    basis = standard_catalog(2)
    d, _ = planted_two_leaf(17, basis=basis)
    literal = rss(fit(d, basis, FitConfig(iters=2)), d)
    folded = fit(d, basis, FitConfig(iters=2, fold_product_weight=True))
    assert rss(folded, d) <= 1e-12 < literal
    assert np.all(np.abs(folded.weights) <= 1.0)


def test_fit_deterministic():
    basis = standard_catalog(8)
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(60, 4))
    d = Dataset(X, X[:, 0] * X[:, 2] + rng.normal(size=60) * 0.1)
    assert serialize(fit(d, basis, FitConfig(iters=4))) == serialize(fit(d, basis, FitConfig(iters=4)))


def test_tie_prefers_plus_and_low_ids():
    # y constant in every candidate, so all scores tie; the first candidate (+, phi 1, dim 1) wins
    basis = standard_catalog(3)
    X = np.random.default_rng(0).uniform(size=(20, 2))
    y = 0.3 * np.sin(np.pi * X[:, 0]) + 1.0
    m = fit(Dataset(X, y), basis, FitConfig(iters=1, early_stop=False))
    assert isinstance(m.root, Op) and m.root.op == PLUS
    assert (m.root.right.phi, m.root.right.dim) == (1, 1)


def test_trace_csv_format():
    basis = standard_catalog(3)
    X = np.random.default_rng(0).uniform(size=(20, 2))
    trace = []
    fit(Dataset(X, X[:, 0] * X[:, 1]), basis, FitConfig(iters=2, early_stop=False), trace=trace)
    lines = trace_csv(trace).splitlines()
    assert lines[0] == "iter,leaf_path,op,phi,dim,w,rss"
    assert len(lines) == 4
    assert lines[1].startswith("0,,init,")


def test_fit_rejects_out_of_domain():
    with pytest.raises(ValueError):
        fit(Dataset(np.array([[2.0], [0.5]]), [1.0, 2.0]), standard_catalog(2))


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(iters=-1)
