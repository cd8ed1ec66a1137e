import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comptree.basis import (
    DEFAULT_SPEC,
    BasisFunction,
    DomainError,
    catalog_spec,
    ensemble_basis,
    evaluate,
    from_spec,
    parse_spec,
    standard_catalog,
)


def test_default_spec_size_and_order():
    b = from_spec(DEFAULT_SPEC)
    assert b.q == 16 + 3 + 9 + 10
    fams = [f.family for f in b]
    assert fams[:2] == ["fourier-sin", "fourier-cos"]
    assert fams[16:19] == ["trunc-poly"] * 3
    assert fams[19:28] == ["trunc-poly-knot"] * 9
    assert fams[28:] == ["bspline-1"] * 10


def test_spec_blocks_expand_in_catalog_order():
    a = from_spec("bspline:2,fourier:1")
    b = from_spec("fourier:1,bspline:2")
    assert a == b
    assert [f.family for f in a] == ["fourier-sin", "fourier-cos", "bspline-1", "bspline-1"]


def test_truncation_to_q():
    b = from_spec(DEFAULT_SPEC, q=5)
    assert b.q == 5
    assert [f.id for f in b] == [1, 2, 3, 4, 5]


@pytest.mark.parametrize("spec", ["", "fourier", "fourier:x", "wavelet:3", "poly:4", "poly:-1", "poly:2,poly:1"])
def test_bad_specs(spec):
    with pytest.raises(ValueError):
        parse_spec(spec)


def test_q_larger_than_expansion():
    with pytest.raises(ValueError):
        from_spec("poly:3", q=4)


@pytest.mark.parametrize("q", [1, 10, 38, 39, 40, 100])
def test_catalog_spec_covers_q(q):
    assert from_spec(catalog_spec(q), q=q).q == q


def test_standard_catalog_prefix_stable():
    small, large = standard_catalog(10), standard_catalog(40)
    assert small.functions == large.functions[:10]


def test_standard_catalog_deterministic():
    assert standard_catalog(40) == standard_catalog(40)
    assert standard_catalog(40, domain=(0.0, 2.0)) == standard_catalog(40, domain=(0.0, 2.0))


def test_catalog_sup_norm_bounded():
    grid = np.linspace(0.0, 1.0, 10_000)
    for f in standard_catalog(100):
        assert np.max(np.abs(evaluate(f, grid))) <= 1 + 1e-9, f.label


def test_catalog_sup_norm_on_other_domain():
    grid = np.linspace(-2.0, 3.0, 10_000)
    for f in from_spec(DEFAULT_SPEC, domain=(-2.0, 3.0)):
        assert np.max(np.abs(evaluate(f, grid))) <= 1 + 1e-9, f.label


def test_scalar_values():
    b = standard_catalog(40)
    assert evaluate(b[1], 0.5) == pytest.approx(1.0)
    assert evaluate(b[2], 0.0) == pytest.approx(1.0)
    assert isinstance(evaluate(b[1], 0.5), float)


def test_hat_peaks_at_center():
    b = from_spec("bspline:10")
    for f in b:
        center, _ = f.param
        assert evaluate(f, center) == pytest.approx(1.0)


def test_domain_violation():
    f = standard_catalog(1)[1]
    with pytest.raises(DomainError):
        evaluate(f, 1.5)
    with pytest.raises(DomainError):
        evaluate(f, float("nan"))
    with pytest.raises(DomainError):
        standard_catalog(3).design(np.array([[0.2, -0.1]]))


def test_design_shape_and_values():
    b = standard_catalog(5)
    X = np.random.default_rng(0).uniform(size=(7, 3))
    Phi = b.design(X)
    assert Phi.shape == (5, 7, 3)
    assert Phi[2, 4, 1] == pytest.approx(evaluate(b[3], X[4, 1]))


def test_unknown_family():
    with pytest.raises(ValueError):
        BasisFunction(1, "legendre", 2.0)


def test_ensemble_examples():
    e = ensemble_basis(3)
    assert e.ensemble_only
    assert evaluate(e[1], 0.0) == pytest.approx(math.sqrt(2))
    assert evaluate(e[2], 0.5) == pytest.approx(-math.sqrt(2))


def _midpoint(n=100_000):
    return -1.0 + (np.arange(n) + 0.5) * (2.0 / n)


def test_ensemble_orthonormality():
    z = _midpoint()
    e = ensemble_basis(5)
    vals = [evaluate(f, z) for f in e]
    for i in range(5):
        for j in range(5):
            # integral of (1/2) phi_i phi_j over [-1, 1]
            est = float(np.mean(vals[i] * vals[j]))
            assert est == pytest.approx(float(i == j), abs=1e-4)


def test_ensemble_sup_exceeds_one():
    assert evaluate(ensemble_basis(1)[1], 0.0) > 1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 120), st.floats(0.0, 1.0))
def test_any_catalog_value_bounded(q, x):
    for f in standard_catalog(q):
        assert abs(evaluate(f, x)) <= 1 + 1e-9
