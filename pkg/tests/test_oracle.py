import math

import numpy as np
import pytest
from scipy.optimize import brentq

from tiqnet import catalog
from tiqnet.errors import NotAdmissibleFinite
from tiqnet.kernels import Fragment, LatticeKernel, cube_fragment
from tiqnet.oracle import (
    check_no_zero_eigs,
    discretize_operators,
    finite_admissibility_margin,
    log_qef_finite,
    operator_average_check,
    temporal_convergence_study,
    toeplitz_average_check,
)
from tiqnet.qef import QuadratureGrid, temporal_rate_fragment
from tiqnet.spectra import WeightedNetwork

SITE = Fragment.from_sites([(0,)])


@pytest.fixture(scope="module")
def bench_ops():
    return discretize_operators(catalog.benchmark(), SITE, 10.0, 200)


@pytest.fixture(scope="module")
def skewed_ops():
    return discretize_operators(catalog.skewed(), cube_fragment(1, 2), 8.0, 120)


@pytest.fixture(scope="module")
def zero_ops():
    spec = catalog.benchmark().spec
    w = WeightedNetwork(spec, LatticeKernel.zeros(1, 2, 2))
    return discretize_operators(w, cube_fragment(1, 2), 5.0, 40)


def top_eig_exponential_kernel(T):
    """Largest eigenvalue of f -> int_0^T exp(-|t-s|)/2 f(s) ds.

    Even eigenfunctions cos(w (t - T/2)) give 1/(1 + w^2) with w tan(wT/2) = 1.
    """
    w = brentq(lambda w: w * math.tan(w * T / 2) - 1, 1e-12, math.pi / T - 1e-12)
    return 1 / (1 + w * w)


class TestDiscretization:
    def test_shapes(self, bench_ops, skewed_ops):
        assert bench_ops.size == 400 and bench_ops.h == pytest.approx(0.05)
        assert skewed_ops.Vhat.shape == (2 * 2 * 120,) * 2

    @pytest.mark.parametrize("which", ["bench_ops", "skewed_ops"])
    def test_symmetry_classes(self, which, request):
        ops = request.getfixturevalue(which)
        herm, skew = ops.symmetry_residuals()
        assert herm <= 1e-10 and skew <= 1e-10
        assert np.linalg.eigvalsh(ops.Vhat)[0] >= -1e-8
        assert ops.min_covariance_eig() >= -1e-8

    def test_zero_weighting(self, zero_ops):
        assert not np.any(zero_ops.Vhat) and not np.any(zero_ops.Lhat)

    def test_benchmark_top_eigenvalue_matches_continuum(self, bench_ops):
        top = np.linalg.eigvalsh(bench_ops.Vhat)[-1]
        assert top == pytest.approx(top_eig_exponential_kernel(10.0), rel=1e-3)

    def test_top_eigenvalue_approaches_symbol_sup(self):
        tops = [np.linalg.eigvalsh(discretize_operators(catalog.benchmark(), SITE, T, 20 * T).Vhat)[-1]
                for T in (10, 20, 40)]
        assert tops[0] < tops[1] < tops[2] < 1
        assert 1 - tops[2] < 0.01

    @pytest.mark.xfail(strict=True, reason="finite-T section at T=10 sits 6.5% below the symbol sup")
    def test_top_eigenvalue_within_three_percent_at_t10(self, bench_ops):
        assert abs(np.linalg.eigvalsh(bench_ops.Vhat)[-1] - 1) <= 0.03

    @pytest.mark.parametrize(
        "kw",
        [{"Nt": 4}, {"T": 0.0}, {"G": Fragment.from_sites([(0, 0)])}, {"Nt": 50, "max_rows": 10}],
    )
    def test_errors(self, kw):
        args = dict(G=SITE, T=5.0, Nt=20) | kw
        with pytest.raises(ValueError):
            discretize_operators(catalog.benchmark(), **args)


class TestZeroEigenvalues:
    def test_zero_operator(self, zero_ops):
        assert check_no_zero_eigs(zero_ops) == (False, 0.0)

    def test_benchmark_positive(self, bench_ops):
        ok, mn = check_no_zero_eigs(bench_ops)
        assert ok and mn > 1e-10

    def test_refinement_scaling(self):
        # Lhat = J x (exponential-kernel matrix); its smallest singular value
        # tracks the lowest Nystrom mode, about h^2 / 4, so halving h divides it by 4
        mins = [check_no_zero_eigs(discretize_operators(catalog.benchmark(), SITE, 10.0, nt))[1]
                for nt in (100, 200, 400)]
        h = 10.0 / np.array([100, 200, 400])
        np.testing.assert_allclose(mins, h**2 / 4, rtol=0.01)

    @pytest.mark.xfail(strict=True, reason="compact operator: smallest eigenvalue shrinks with the grid")
    def test_refinement_stable_within_ten_percent(self):
        a = check_no_zero_eigs(discretize_operators(catalog.benchmark(), SITE, 10.0, 200))[1]
        b = check_no_zero_eigs(discretize_operators(catalog.benchmark(), SITE, 10.0, 400))[1]
        assert abs(a - b) <= 0.1 * a


class TestLogQef:
    def test_theta_zero(self, bench_ops, zero_ops):
        assert log_qef_finite(bench_ops, 0.0) == 0.0
        assert log_qef_finite(zero_ops, 0.7) == 0.0

    @pytest.mark.parametrize("which", ["bench_ops", "skewed_ops"])
    def test_derivative_at_zero(self, which, request):
        ops = request.getfixturevalue(which)
        h = 1e-4
        slope = (log_qef_finite(ops, h) - log_qef_finite(ops, -h)) / (2 * h)
        tr = 0.5 * np.trace(ops.Vhat).real
        assert abs(slope - tr) <= 1e-6 * tr

    def test_benchmark_closed_form(self, bench_ops):
        # aligned Phi and Psi make ln Xi = theta Tr(Vhat)/2 at every horizon
        for theta in (0.5, 1.0, 3.0):
            assert log_qef_finite(bench_ops, theta) == pytest.approx(theta * 5.0, rel=1e-10)

    def test_monotone_in_theta(self, skewed_ops):
        vals = [log_qef_finite(skewed_ops, t) for t in np.linspace(0, 0.6, 8)]
        assert np.all(np.diff(vals) > 0)

    def test_not_admissible(self):
        ops = discretize_operators(catalog.classical_only(), SITE, 10.0, 100)
        assert finite_admissibility_margin(ops, 0.5) > 0
        assert finite_admissibility_margin(ops, 1.2) < 0
        with pytest.raises(NotAdmissibleFinite):
            log_qef_finite(ops, 1.2)

    def test_nystrom_refinement(self):
        w = catalog.skewed()
        vals = [log_qef_finite(discretize_operators(w, SITE, 6.0, nt), 0.3) for nt in (24, 48, 96, 192)]
        diffs = np.abs(np.diff(vals))
        assert diffs[0] > diffs[1] > diffs[2]

    def test_benchmark_nystrom_at_roundoff(self):
        vals = [log_qef_finite(discretize_operators(catalog.benchmark(), SITE, 6.0, nt), 1.0)
                for nt in (24, 48, 96)]
        np.testing.assert_allclose(vals, 3.0, rtol=1e-12)


class TestConvergenceStudy:
    def test_benchmark(self):
        rows = temporal_convergence_study(catalog.benchmark(), SITE, 1.0, [10, 25, 50])
        assert [r["Nt"] for r in rows] == [200, 500, 1000]
        for r in rows:
            assert r["rate"] == pytest.approx(0.5, rel=1e-12)
            assert abs(r["rate"] - 0.5) <= 0.05 * 0.5

    def test_theta_zero(self):
        rows = temporal_convergence_study(catalog.skewed(), SITE, 0.0, [5, 10])
        assert all(r["rate"] == 0.0 for r in rows)

    @pytest.mark.slow
    def test_skewed_trend(self):
        rows = temporal_convergence_study(catalog.skewed(), SITE, 0.331, [10, 25, 50])
        errs = [r["error"] for r in rows]
        assert errs[0] > errs[1] > errs[2]
        target = temporal_rate_fragment(catalog.skewed(), SITE, 0.331, QuadratureGrid(1))[0]
        assert rows[0]["target"] == pytest.approx(target, rel=1e-14)


class TestToeplitzAverage:
    def test_single_kernel_identity(self, rng):
        f = LatticeKernel({(0,): rng.normal(size=(2, 2)), (1,): rng.normal(size=(2, 2)),
                           (-2,): rng.normal(size=(2, 2))})
        for row in toeplitz_average_check([f], [1, 3, 7]):
            assert row["lhs"] == pytest.approx(np.trace(f[(0,)]), abs=1e-14)
            assert row["error"] <= 1e-14

    @pytest.mark.parametrize("L", [8, 16, 32])
    def test_shift_pair(self, L):
        up = LatticeKernel({(1,): np.ones((1, 1))})
        down = LatticeKernel({(-1,): np.ones((1, 1))})
        (row,) = toeplitz_average_check([up, down], [L])
        assert row["lhs"] == pytest.approx((L - 1) / L, abs=1e-15)
        assert row["rhs"] == pytest.approx(1.0, abs=1e-15)
        assert row["error"] == pytest.approx(1 / L, abs=1e-15)

    def test_same_shift_vanishes(self):
        up = LatticeKernel({(1,): np.ones((1, 1))})
        for row in toeplitz_average_check([up, up], [2, 5]):
            assert row["lhs"] == 0 and row["rhs"] == 0

    def test_error_decays(self, rng):
        ks = [LatticeKernel({(0,): rng.normal(size=(2, 2)), (1,): rng.normal(size=(2, 2)),
                             (-1,): rng.normal(size=(2, 2))}) for _ in range(3)]
        rows = toeplitz_average_check(ks, [4, 8, 16, 32])
        errs = np.array([r["error"] for r in rows])
        assert np.all(errs[1:] <= errs[:-1] * 0.6)

    def test_two_dimensional_cube(self):
        up = LatticeKernel({(1, 0): np.ones((1, 1))})
        down = LatticeKernel({(-1, 0): np.ones((1, 1))})
        (row,) = toeplitz_average_check([up, down], [4])
        assert row["error"] == pytest.approx(0.25, abs=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError):
            toeplitz_average_check([], [2])
        with pytest.raises(ValueError):
            toeplitz_average_check([LatticeKernel.identity(1, 2), LatticeKernel.identity(2, 2)], [2])
        with pytest.raises(ValueError):
            toeplitz_average_check([LatticeKernel.identity(1, 2), LatticeKernel.identity(1, 3)], [2])


class TestOperatorAverage:
    def test_linear(self):
        rows = operator_average_check(catalog.skewed(), cube_fragment(1, 2), [5, 10], 1)
        for r in rows:
            assert r["rel_error"] <= 1e-6

    def test_quadratic_benchmark(self):
        rows = operator_average_check(catalog.benchmark(), SITE, [10, 25, 50], 2)
        rel = [r["rel_error"] for r in rows]
        assert rel[0] > rel[1] > rel[2]
        assert rel[2] <= 0.02
        assert rows[0]["rhs"] == pytest.approx(0.5, abs=1e-8)  # (1/2pi) int 2/(1+l^2)^2

    def test_cubic(self):
        rows = operator_average_check(catalog.skewed(), SITE, [10, 20], 3)
        assert rows[0]["error"] > rows[1]["error"]

    def test_zero_weighting(self):
        w = WeightedNetwork(catalog.benchmark().spec, LatticeKernel.zeros(1, 2, 2))
        for r in operator_average_check(w, SITE, [5, 10], 2):
            assert r["lhs"] == 0 and r["rhs"] == 0

    def test_degree_checked(self):
        with pytest.raises(ValueError):
            operator_average_check(catalog.benchmark(), SITE, [5], 4)
