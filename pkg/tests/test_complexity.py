import warnings

import numpy as np
import pandas as pd
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from eclab.complexity import (
    EconomicComplexity,
    compute_complexity,
    compute_complexity_eigen,
    compute_complexity_fixed_point,
    country_transition_matrix,
    rank_table,
    rescale_minmax,
)
from eclab.exceptions import (
    ConstantSeries,
    DegenerateMatrix,
    DegenerateSpectrum,
    DisconnectedGraphWarning,
    NoConvergence,
    RepeatedEigenvalue,
    ValidationError,
)
from eclab.specialization import SpecializationMatrix
from generators import random_binary

NESTED = np.array([[1, 1, 1], [1, 1, 0], [1, 0, 0]])
R = np.sqrt(1.5)


def sympy_transition(M):
    M = sympy.Matrix(M.tolist())
    kc = [sum(M.row(i)) for i in range(M.rows)]
    kl = [sum(M.col(j)) for j in range(M.cols)]
    return sympy.Matrix(
        M.rows, M.rows,
        lambda c, d: sum(sympy.Rational(M[c, l] * M[d, l], kc[c] * kl[l]) for l in range(M.cols)),
    )


class TestNestedOracle:
    def test_characteristic_polynomial(self):
        W = sympy_transition(NESTED)
        lam = sympy.symbols("lam")
        roots = sympy.roots(W.charpoly(lam).as_expr(), lam)
        assert set(roots) == {sympy.Integer(1), sympy.Rational(1, 4), sympy.Rational(1, 9)}
        vec = (W - sympy.Rational(1, 4) * sympy.eye(3)).nullspace()[0]
        vec = vec / vec[0] * 2
        assert list(vec) == [2, -1, -4]

    def test_library_matrix_matches_sympy(self):
        W = np.array(sympy_transition(NESTED).tolist(), dtype=float)
        np.testing.assert_allclose(country_transition_matrix(NESTED), W, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("method", ["eigen", "iterate"])
    def test_scores(self, method):
        s = compute_complexity(SpecializationMatrix.from_array(NESTED), method)
        np.testing.assert_allclose(s.eci_z, [R, 0, -R], atol=1e-4)
        np.testing.assert_allclose(s.pci_z, [-R, 0, R], atol=1e-4)

    def test_eigenvector_from_oracle(self):
        v = np.array([2.0, -1.0, -4.0])
        z = (v - v.mean()) / v.std()
        s = compute_complexity_eigen(NESTED)
        np.testing.assert_allclose(s.eci_z, z, atol=1e-12)
        assert s.eigenvalue == pytest.approx(0.25, abs=1e-10)

    def test_rank_follows_diversity(self):
        s = compute_complexity_eigen(SpecializationMatrix(("x", "y", "z"), ("a", "b", "c"), NESTED))
        assert rank_table(s)["entity"].tolist() == ["x", "y", "z"]


class TestDegenerate:
    @pytest.mark.parametrize("fn", [compute_complexity_eigen, compute_complexity_fixed_point])
    def test_all_ones(self, fn):
        with pytest.raises(DegenerateSpectrum):
            fn(np.ones((3, 4), dtype=int))

    def test_identity_repeated(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DisconnectedGraphWarning)
            with pytest.raises(RepeatedEigenvalue):
                compute_complexity_eigen(np.eye(4, dtype=int))

    @pytest.mark.parametrize("method", ["eigen", "iterate"])
    def test_block_diagonal_warns(self, method):
        M = np.kron(np.eye(2, dtype=int), np.ones((2, 2), dtype=int))
        with pytest.warns(DisconnectedGraphWarning):
            try:
                compute_complexity(M, method)
            except (DegenerateSpectrum, RepeatedEigenvalue):
                pass

    def test_empty_row(self):
        with pytest.raises(DegenerateMatrix):
            compute_complexity_eigen(np.array([[1, 0], [0, 0], [1, 1]]))

    def test_no_convergence_carries_scores(self, rng):
        M = random_binary(rng, 12, 12, 0.5)
        with pytest.raises(NoConvergence) as err:
            compute_complexity_fixed_point(M, max_iter=1)
        assert err.value.n_iter == 1
        assert err.value.scores.eci_z.shape == (12,)

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            compute_complexity(NESTED, "magic")


class TestMethodAgreement:
    def test_random_correlation(self, rng):
        for _ in range(50):
            M = random_binary(rng, 10, 12, rng.uniform(0.3, 0.7))
            a = compute_complexity_eigen(M).eci_z
            b = compute_complexity_fixed_point(M).eci_z
            assert abs(np.corrcoef(a, b)[0, 1]) > 1 - 1e-9

    def test_power_iteration_path(self, rng):
        for _ in range(10):
            M = random_binary(rng, 15, 10, 0.5)
            dense = compute_complexity_eigen(M)
            power = compute_complexity_eigen(M, dense_limit=0)
            np.testing.assert_allclose(power.eci_z, dense.eci_z, atol=1e-7)
            assert power.eigenvalue == pytest.approx(dense.eigenvalue, abs=1e-10)

    def test_sign_matches_diversity(self, rng):
        for _ in range(20):
            M = random_binary(rng, 10, 10, 0.5)
            s = compute_complexity_eigen(M)
            assert np.corrcoef(s.eci_z, M.sum(axis=1))[0, 1] >= 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 12), st.integers(4, 12))
def test_standardized_and_equivariant(seed, n, k):
    rng = np.random.default_rng(seed)
    M = random_binary(rng, n, k, 0.5)
    s = compute_complexity_eigen(M)
    for v in (s.eci_z, s.pci_z):
        assert abs(v.mean()) < 1e-9
        assert abs(v.std() - 1) < 1e-9
    rows, cols = rng.permutation(n), rng.permutation(k)
    p = compute_complexity_eigen(M[np.ix_(rows, cols)])
    # when -eci is a rearrangement of eci no order-free rule can fix the sign
    sign = 1.0
    if np.allclose(np.sort(s.eci_z), np.sort(-s.eci_z), atol=1e-9):
        sign = np.sign(p.eci_z @ s.eci_z[rows])
    np.testing.assert_allclose(p.eci_z, sign * s.eci_z[rows], atol=1e-9)
    np.testing.assert_allclose(p.pci_z, sign * s.pci_z[cols], atol=1e-9)


class TestRescale:
    def test_reference_value(self):
        out = rescale_minmax(np.array([-2.221, -0.453, 2.538]))
        assert out.values[1] == pytest.approx(-0.257, abs=1e-3)
        assert (out.source_min, out.source_max) == (-2.221, 2.538)

    def test_endpoints_and_linearity(self):
        np.testing.assert_allclose(rescale_minmax(np.array([0.0, 1.0, 2.0])).values, [-1, 0, 1])
        out = rescale_minmax(np.array([3.0, -7.0, 5.0])).values
        assert out.max() == 1 and out.min() == -1

    def test_series_index_kept(self):
        out = rescale_minmax(pd.Series([1.0, 2.0], index=["a", "b"])).values
        assert list(out.index) == ["a", "b"]

    def test_constant(self):
        with pytest.raises(ConstantSeries):
            rescale_minmax(np.ones(3))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30, unique=True))
def test_rescale_monotone(values):
    # values closer than float resolution may collapse onto one output, so order is weak here
    v = np.array(values)
    out = rescale_minmax(v).values
    order = np.argsort(v)
    assert (np.diff(out[order]) >= 0).all()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-10**6, 10**6), min_size=2, max_size=30, unique=True))
def test_rescale_preserves_order(values):
    v = np.array(values, dtype=float)
    out = rescale_minmax(v).values
    assert (np.argsort(out) == np.argsort(v)).all()


class TestRankTable:
    def test_simple(self):
        t = rank_table(pd.Series([0.5, -0.5], index=["A", "B"]))
        assert t["rank"].tolist() == [1, 2] and t["entity"].tolist() == ["A", "B"]

    def test_tie(self):
        t = rank_table(pd.Series([0.5, 0.5], index=["B", "A"]))
        assert t["entity"].tolist() == ["A", "B"]


class TestFrames:
    def test_eci_frame_columns(self):
        s = compute_complexity_eigen(SpecializationMatrix(("x", "y", "z"), ("a", "b", "c"), NESTED))
        f = s.eci_frame()
        assert list(f.columns) == ["entity", "raw", "z", "rescaled", "rank"]
        assert f["rescaled"].tolist() == [1.0, 0.0, -1.0]
        meta = s.metadata()
        assert meta["method"] == "eigen" and meta["eigenvalue"] == pytest.approx(0.25)

    def test_fixed_point_metadata(self):
        s = compute_complexity_fixed_point(NESTED)
        assert s.method == "fixed-point" and 0 < s.n_iter < 1000 and s.residual < 1e-9


class TestEstimator:
    def test_fit_transform_equals_eci(self, rng):
        M = random_binary(rng, 10, 8, 0.5)
        est = EconomicComplexity()
        out = est.fit_transform(M)
        np.testing.assert_allclose(out, est.eci_, atol=1e-9)
        assert clone(est).get_params() == {"method": "eigen", "tol": 1e-9, "max_iter": 1000}

    def test_dataframe_input(self):
        X = pd.DataFrame(NESTED, index=["x", "y", "z"], columns=["a", "b", "c"])
        est = EconomicComplexity(method="iterate").fit(X)
        assert est.scores_.countries == ("x", "y", "z")
        assert est.n_iter_ > 0


def test_sign_fallback_without_diversity_spread():
    # constant diversity; the country holding the rarer activities ranks higher
    M = np.array([[0, 0, 1, 1], [1, 1, 0, 0], [1, 0, 0, 1], [0, 0, 1, 1]])
    s = compute_complexity_eigen(M)
    mean_ubiquity = M @ M.sum(axis=0) / M.sum(axis=1)
    assert np.corrcoef(s.eci_z, mean_ubiquity)[0, 1] < 0
    np.testing.assert_allclose(compute_complexity_eigen(M[::-1]).eci_z, s.eci_z[::-1], atol=1e-9)
