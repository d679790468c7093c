"""
Finite horizons, finite fragments and the averaging limits
==========================================================

The infinite-horizon rates are limits of finite computations.  Here the
finite objects are built directly: the covariance and commutator kernels of
a fragment are sampled on a time grid, the quadratic-exponential functional
is evaluated as a determinant, and the per-unit-time value is watched as the
horizon grows.
"""

import numpy as np

from tiqnet import catalog
from tiqnet.kernels import Fragment, LatticeKernel, cube_fragment
from tiqnet.oracle import (
    check_no_zero_eigs,
    discretize_operators,
    log_qef_finite,
    operator_average_check,
    temporal_convergence_study,
    toeplitz_average_check,
)
from tiqnet.qef import QuadratureGrid, qef_rate, temporal_rate_fragment

site = Fragment.from_sites([(0,)])

# %%
# Skewed chain, one site, theta = 0.331 (half the admissibility bound).  The
# error shrinks roughly like 1/T.
net = catalog.skewed()
for row in temporal_convergence_study(net, site, 0.331, [10, 25, 50]):
    print(f"T={row['T']:4.0f}  Nt={row['Nt']:5d}  lnXi/T={row['rate']:.8f}  "
          f"limit={row['target']:.8f}  error={row['error']:.2e}")

# %%
# For the benchmark the finite-horizon value is already exact: aligned
# covariance and commutator make ln Xi = theta Tr(V)/2 at every horizon.
ops = discretize_operators(catalog.benchmark(), site, 10.0, 200)
print("benchmark lnXi/T at T=10:", log_qef_finite(ops, 1.0) / 10.0)

# %%
# The largest eigenvalue of the covariance operator approaches the peak of
# its symbol (1 here) only as the horizon grows; at T = 10 it is still about
# 6% short.  The smallest commutator eigenvalue shrinks with the time step,
# as expected for a compact operator.
top = np.linalg.eigvalsh(ops.Vhat)[-1]
print(f"top eigenvalue at T=10: {top:.5f}")
for nt in (100, 200, 400):
    _, smallest = check_no_zero_eigs(discretize_operators(catalog.benchmark(), site, 10.0, nt))
    print(f"  Nt={nt}: smallest |eig L| = {smallest:.3e}")

# %%
# Fragments: the rate per site of an L-site block approaches the lattice rate
# with an error proportional to the boundary fraction 1/L.
grid = QuadratureGrid(1)
limit = qef_rate(net, 0.3, grid).upsilon
for L in (1, 2, 4, 8):
    rate, _ = temporal_rate_fragment(net, cube_fragment(1, L), 0.3, grid)
    print(f"L={L}: per-site rate {rate / L:.8f}, error {abs(rate / L - limit):.2e}")

# %%
# The averaging lemmas behind both limits.  For block Toeplitz matrices the
# normalized trace of a product converges to the torus average of the symbol
# product; a pair of opposite shifts misses exactly one site in L.
up = LatticeKernel({(1,): np.ones((1, 1))})
down = LatticeKernel({(-1,): np.ones((1, 1))})
for row in toeplitz_average_check([up, down], [8, 16, 32]):
    print(f"L={row['L']}: lhs={row['lhs']:.5f} rhs={row['rhs']:.1f} error={row['error']:.5f}")

# %%
# The time-domain counterpart: traces of powers of the covariance operator
# per unit time approach frequency averages of powers of the density.
for row in operator_average_check(catalog.benchmark(), site, [10, 25, 50], 2):
    print(f"T={row['T']:.0f}: lhs={row['lhs']:.5f} rhs={row['rhs']:.5f} "
          f"relative error={row['rel_error']:.2%}")
