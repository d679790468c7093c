"""Random network generators shared by the test modules."""

import itertools

import numpy as np
import scipy.linalg

from tiqnet.kernels import LatticeKernel
from tiqnet.network import NetworkSpec, assemble_dynamics, ccr_symplectic, stability_margin
from tiqnet.kernels import torus_nodes


def offsets_in_ball(nu, radius):
    return [off for off in itertools.product(range(-radius, radius + 1), repeat=nu)]


def random_kernel(rng, nu, rows, cols, radius=2, density=0.6, complex_=False):
    terms = {}
    for off in offsets_in_ball(nu, radius):
        if rng.random() < density:
            blk = rng.normal(size=(rows, cols))
            if complex_:
                blk = blk + 1j * rng.normal(size=(rows, cols))
            terms[off] = blk
    if not terms:
        terms[(0,) * nu] = rng.normal(size=(rows, cols))
    return LatticeKernel(terms, nu=nu, shape=(rows, cols))


def random_theta(rng, n):
    """Nonsingular antisymmetric CCR matrix X (J/2) X^T with X near identity."""
    X = np.eye(n) + 0.3 * rng.normal(size=(n, n))
    return X @ (0.5 * ccr_symplectic(n)) @ X.T


def random_symmetric_energy(rng, nu, n, radius=1, scale=0.3):
    terms = {}
    zero = (0,) * nu
    R0 = scale * rng.normal(size=(n, n))
    terms[zero] = 0.5 * (R0 + R0.T)
    for off in offsets_in_ball(nu, radius):
        if off == zero or off in terms:
            continue
        blk = scale * rng.normal(size=(n, n))
        terms[off] = blk
        terms[tuple(-x for x in off)] = blk.T
    return LatticeKernel(terms, nu=nu, shape=(n, n))


def symplectic_gain(rng, nu, m, r, shift=None):
    """Field gain D = shift x (selector E) x (symplectic T) with D J_m D^T = J_r."""
    Jm = ccr_symplectic(m)
    H = rng.normal(size=(m, m))
    T = scipy.linalg.expm(0.3 * Jm @ (H + H.T))
    half_m, half_r = m // 2, r // 2
    E = np.zeros((r, m))
    for k in range(half_r):
        E[k, k] = 1.0
        E[half_r + k, half_m + k] = 1.0
    if shift is None:
        shift = tuple(int(x) for x in rng.integers(-1, 2, size=nu))
    return LatticeKernel({tuple(shift): E @ T}, nu=nu)


def random_spec(rng, nu=1, n=2, m=2, r=2, radius=1, canonical_theta=False):
    theta = 0.5 * ccr_symplectic(n) if canonical_theta else random_theta(rng, n)
    R = random_symmetric_energy(rng, nu, n, radius)
    M = random_kernel(rng, nu, m, n, radius, density=0.5)
    D = symplectic_gain(rng, nu, m, r)
    return NetworkSpec(theta, R, M, D)


def random_stable_spec(rng, nu=1, n=2, m=2, r=2, radius=1, tries=200):
    """Canonical CCR, strong on-site coupling plus small random terms; stable on a grid."""
    nodes = torus_nodes(nu, 16)
    for _ in range(tries):
        theta = 0.5 * ccr_symplectic(n)
        R = random_symmetric_energy(rng, nu, n, radius, scale=0.1)
        M = random_kernel(rng, nu, m, n, radius, density=0.4) * 0.1
        base = np.zeros((m, n))
        base[: min(m, n), : min(m, n)] = np.eye(min(m, n))
        M = M + LatticeKernel.constant(base, nu)
        spec = NetworkSpec(theta, R, M, symplectic_gain(rng, nu, m, r))
        if stability_margin(assemble_dynamics(spec), nodes) > 0.2:
            return spec
    raise RuntimeError("no stable network found")
