import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tiqnet.kernels import (
    Fragment,
    LatticeKernel,
    block_kernel,
    cube_fragment,
    fragment_discrepancy,
    inverse_sft,
    kernel_adjoint,
    kernel_multiply,
    kernel_norm1,
    restrict_to_fragment,
    sft_eval,
    torus_nodes,
    wrap_torus,
)

from netgen import random_kernel

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _sigma(rng, nu, count):
    return rng.uniform(-np.pi, np.pi, size=(count, nu))


class TestLatticeKernel:
    def test_blocks_are_copied_and_frozen(self):
        blk = np.eye(2)
        f = LatticeKernel({(0,): blk})
        blk[0, 0] = 5.0
        assert f[(0,)][0, 0] == 1.0
        with pytest.raises(ValueError):
            f[(0,)][0, 0] = 3.0

    def test_missing_offset_reads_as_zero(self):
        f = LatticeKernel({(1,): np.ones((2, 3))})
        assert np.array_equal(f[(4,)], np.zeros((2, 3)))
        assert f.shape == (2, 3)

    def test_inconsistent_blocks_rejected(self):
        with pytest.raises(ValueError):
            LatticeKernel({(0,): np.eye(2), (1,): np.eye(3)})

    def test_wrong_offset_length_rejected(self):
        with pytest.raises(ValueError):
            LatticeKernel({(0,): np.eye(2), (0, 1): np.eye(2)})

    def test_empty_kernel_needs_shape(self):
        with pytest.raises(ValueError):
            LatticeKernel({}, nu=1)
        z = LatticeKernel.zeros(2, 3, 1)
        assert z.shape == (3, 1) and z.nu == 2 and len(z) == 0

    def test_records_round_trip(self, rng):
        f = random_kernel(rng, 2, 2, 3)
        g = LatticeKernel.from_records(f.to_records(), nu=2)
        assert g.allclose(f, atol=0.0)

    def test_arithmetic(self, rng):
        f = random_kernel(rng, 1, 2, 2)
        g = random_kernel(rng, 1, 2, 2)
        sig = _sigma(rng, 1, 20)
        np.testing.assert_allclose((f + g).sft(sig), f.sft(sig) + g.sft(sig), atol=1e-13)
        np.testing.assert_allclose((f - g).sft(sig), f.sft(sig) - g.sft(sig), atol=1e-13)
        np.testing.assert_allclose((2.5 * f).sft(sig), 2.5 * f.sft(sig), atol=1e-13)
        np.testing.assert_allclose((-f).sft(sig), -f.sft(sig), atol=1e-13)

    def test_matrix_constants_multiply_on_either_side(self, rng):
        f = random_kernel(rng, 1, 2, 2)
        X = rng.normal(size=(2, 2))
        sig = _sigma(rng, 1, 10)
        np.testing.assert_allclose((X @ f).sft(sig), X @ f.sft(sig), atol=1e-13)
        np.testing.assert_allclose((f @ X).sft(sig), f.sft(sig) @ X, atol=1e-13)


class TestSft:
    def test_identity_kernel(self, rng):
        f = LatticeKernel.identity(2, 2)
        for sig in _sigma(rng, 2, 5):
            np.testing.assert_allclose(sft_eval(f, sig), np.eye(2), atol=0)

    def test_cosine(self, rng):
        f = LatticeKernel({(1,): 0.5 * np.eye(2), (-1,): 0.5 * np.eye(2)})
        sig = _sigma(rng, 1, 30)
        vals = sft_eval(f, sig)
        np.testing.assert_allclose(vals, np.cos(sig[:, 0])[:, None, None] * np.eye(2), atol=1e-15)

    def test_single_point_shape(self):
        f = LatticeKernel({(0, 1): np.ones((2, 3))})
        assert sft_eval(f, np.zeros(2)).shape == (2, 3)
        assert sft_eval(f, np.zeros((4, 2))).shape == (4, 2, 3)

    def test_dimension_mismatch(self):
        f = LatticeKernel({(0,): np.eye(2)})
        with pytest.raises(ValueError, match="coordinates"):
            sft_eval(f, np.zeros(2))

    @given(seeds)
    def test_real_kernel_hermitian_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        nu = int(rng.integers(1, 4))
        f = random_kernel(rng, nu, 2, 3, radius=2)
        sig = _sigma(rng, nu, 100)
        lhs = np.conj(np.swapaxes(f.sft(sig), -1, -2))
        rhs = np.swapaxes(f.sft(-sig), -1, -2)
        assert np.max(np.abs(lhs - rhs)) <= 1e-14

    def test_wrap_torus_interval(self, rng):
        x = wrap_torus(rng.uniform(-20, 20, size=200))
        assert np.all(x >= -np.pi) and np.all(x < np.pi)

    def test_inverse_sft_recovers_blocks(self, rng):
        f = random_kernel(rng, 2, 2, 2, radius=2)
        nodes = torus_nodes(2, 8)
        offs = list(itertools.product(range(-3, 4), repeat=2))
        blocks = inverse_sft(f.sft(nodes), nodes, offs)
        for off, blk in zip(offs, blocks):
            np.testing.assert_allclose(blk, f[off], atol=1e-13)


class TestMultiply:
    def test_unit(self, rng):
        g = random_kernel(rng, 1, 2, 3)
        assert kernel_multiply(LatticeKernel.identity(1, 2), g).allclose(g)

    def test_inverse_shifts(self):
        up = LatticeKernel({(1,): [[1.0]]})
        down = LatticeKernel({(-1,): [[1.0]]})
        h = kernel_multiply(up, down)
        assert h.support == [(0,)]
        assert h[(0,)][0, 0] == 1.0

    def test_mismatch(self):
        with pytest.raises(ValueError):
            kernel_multiply(LatticeKernel.identity(1, 2), LatticeKernel.identity(1, 3))
        with pytest.raises(ValueError):
            kernel_multiply(LatticeKernel.identity(1, 2), LatticeKernel.identity(2, 2))

    @given(seeds)
    def test_sft_is_multiplicative(self, seed):
        rng = np.random.default_rng(seed)
        nu = int(rng.integers(1, 3))
        f = random_kernel(rng, nu, 2, 3, radius=2)
        g = random_kernel(rng, nu, 3, 2, radius=2)
        h = f @ g
        sig = _sigma(rng, nu, 50)
        err = np.max(np.abs(h.sft(sig) - f.sft(sig) @ g.sft(sig)))
        assert err <= 1e-12

    @given(seeds)
    def test_support_is_contained_in_sumset(self, seed):
        rng = np.random.default_rng(seed)
        f = random_kernel(rng, 1, 2, 2, radius=2)
        g = random_kernel(rng, 1, 2, 2, radius=1)
        sums = {(a[0] + b[0],) for a in f.support for b in g.support}
        assert set((f @ g).support) <= sums


class TestAdjointAndNorm:
    def test_adjoint_of_j(self):
        g = kernel_adjoint(LatticeKernel({(0,): J2}))
        np.testing.assert_array_equal(g[(0,)], -J2)

    def test_adjoint_moves_offset(self, rng):
        A = rng.normal(size=(2, 3))
        g = kernel_adjoint(LatticeKernel({(1,): A}))
        assert g.support == [(-1,)]
        np.testing.assert_array_equal(g[(-1,)], A.T)

    @given(seeds)
    def test_adjoint_is_pointwise_conjugate_transpose(self, seed):
        rng = np.random.default_rng(seed)
        f = random_kernel(rng, 2, 2, 3, complex_=True)
        sig = _sigma(rng, 2, 20)
        np.testing.assert_allclose(
            f.adjoint().sft(sig), np.conj(np.swapaxes(f.sft(sig), -1, -2)), atol=1e-13
        )
        assert f.adjoint().adjoint().allclose(f, atol=0.0)

    def test_norm_examples(self):
        f = LatticeKernel({(0, 0): np.eye(2), (1, 0): 2 * np.eye(2)})
        assert kernel_norm1(f) == pytest.approx(3.0)
        assert kernel_norm1(LatticeKernel.zeros(1, 2, 2)) == 0.0

    @given(seeds)
    def test_submultiplicative(self, seed):
        rng = np.random.default_rng(seed)
        f = random_kernel(rng, 1, 2, 2)
        g = random_kernel(rng, 1, 2, 2)
        assert (f @ g).norm1() <= f.norm1() * g.norm1() * (1 + 1e-12)

    @given(seeds)
    def test_symbol_norm_bounded_by_norm1(self, seed):
        rng = np.random.default_rng(seed)
        f = random_kernel(rng, 2, 3, 2)
        sig = _sigma(rng, 2, 40)
        ops = np.linalg.norm(f.sft(sig), ord=2, axis=(-2, -1))
        assert np.max(ops) <= f.norm1() * (1 + 1e-12)


class TestBlockKernel:
    def test_layout(self, rng):
        a = random_kernel(rng, 1, 2, 2)
        b = random_kernel(rng, 1, 2, 1)
        k = block_kernel([[a, b], [None, LatticeKernel.identity(1, 1)]])
        assert k.shape == (3, 3)
        sig = _sigma(rng, 1, 5)
        vals = k.sft(sig)
        np.testing.assert_allclose(vals[:, :2, :2], a.sft(sig), atol=1e-14)
        np.testing.assert_allclose(vals[:, :2, 2:], b.sft(sig), atol=1e-14)
        np.testing.assert_allclose(vals[:, 2:, :2], 0.0, atol=0)

    def test_missing_row_size(self):
        with pytest.raises(ValueError):
            block_kernel([[None, None], [LatticeKernel.identity(1, 2), None]])


class TestFragments:
    def test_cube_sizes(self):
        assert len(cube_fragment(2, 3)) == 9
        assert cube_fragment(1, 1).sites == ((0,),)

    def test_order_is_lexicographic(self):
        G = Fragment.from_sites([(1, 0), (0, 1), (0, 0)])
        assert G.sites == ((0, 0), (0, 1), (1, 0))
        with pytest.raises(ValueError):
            Fragment(2, ((1, 0), (0, 0)))
        with pytest.raises(ValueError):
            Fragment(1, ((0,), (0,)))

    @pytest.mark.parametrize("ell, expected", [((0,), 0.0), ((1,), 0.25), ((5,), 1.0)])
    def test_discrepancy_examples(self, ell, expected):
        assert fragment_discrepancy(cube_fragment(1, 4), ell) == pytest.approx(expected)

    @pytest.mark.parametrize("nu, L", [(1, 4), (2, 3), (3, 2)])
    def test_cube_discrepancy_closed_form(self, nu, L):
        G = cube_fragment(nu, L)
        for ell in itertools.product(range(-L, L + 1), repeat=nu):
            closed = 1.0 - np.prod([max(0.0, 1.0 - abs(x) / L) for x in ell])
            assert fragment_discrepancy(G, ell) == pytest.approx(closed, abs=1e-15)

    @given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), min_size=1, max_size=8, unique=True))
    def test_discrepancy_symmetry_and_sum(self, sites):
        G = Fragment.from_sites(sites)
        diffs = G.differences()
        for ell in diffs:
            neg = tuple(-x for x in ell)
            assert fragment_discrepancy(G, ell) == pytest.approx(fragment_discrepancy(G, neg))
        # every pair (j, k) of sites contributes to exactly one offset j - k
        total = sum(1.0 - fragment_discrepancy(G, ell) for ell in diffs)
        assert total == pytest.approx(len(G))


class TestRestriction:
    def test_identity(self):
        G = cube_fragment(2, 2)
        np.testing.assert_array_equal(restrict_to_fragment(LatticeKernel.identity(2, 3), G), np.eye(12))

    def test_shift_sits_below_diagonal(self):
        # block (a, b) holds f_{G[a] - G[b]}, so offset +1 lands on the subdiagonal
        G = cube_fragment(1, 3)
        M = restrict_to_fragment(LatticeKernel({(1,): [[1.0]]}), G)
        np.testing.assert_array_equal(M, np.eye(3, k=-1))

    @given(seeds)
    def test_hermitian_symbols_give_hermitian_restrictions(self, seed):
        rng = np.random.default_rng(seed)
        g = random_kernel(rng, 2, 2, 2, radius=1, complex_=True)
        f = g + g.adjoint()
        G = Fragment.from_sites({tuple(s) for s in rng.integers(-2, 3, size=(5, 2)).tolist()})
        M = f.restrict(G)
        np.testing.assert_allclose(M, M.conj().T, atol=1e-14)

    def test_rectangular(self, rng):
        f = random_kernel(rng, 1, 2, 3)
        G, H = cube_fragment(1, 2), Fragment.from_sites([(0,), (3,), (5,)])
        M = f.restrict(G, H)
        assert M.shape == (4, 9)
        np.testing.assert_array_equal(M[2:4, 3:6], f[(1 - 3,)])


def test_fragment_rejects_repeated_sites():
    with pytest.raises(ValueError, match="distinct"):
        Fragment.from_sites([(0,), (1,), (0,)])
