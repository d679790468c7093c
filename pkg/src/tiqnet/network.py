"""Translation invariant networks of open quantum harmonic oscillators.

A network is described by its CCR matrix ``theta`` and three kernels: the
energy kernel ``R`` (Hamiltonian), the coupling kernel ``M`` and the field
gain ``D``.  The QSDE coefficient kernels follow from

    A = 2 theta (R + M^* J_m M),     B = 2 theta M^*,     C = 2 D J_m M,

as products in the block Toeplitz algebra, which makes the first two
physical realizability (PR) conditions hold identically.  Everything else
here is evaluated pointwise over the torus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import InvariantViolation, NotHurwitz, SampleTooCloseToSpectrum
from .kernels import LatticeKernel, block_kernel, inverse_sft, torus_nodes

__all__ = [
    "NetworkSpec",
    "DynamicsKernels",
    "PRResiduals",
    "SeriesComposite",
    "assemble_dynamics",
    "ccr_symplectic",
    "certified_stability_margin",
    "compose_series",
    "covariance_by_integral",
    "invariant_covariance_kernel",
    "invariant_covariance_sft",
    "jj_unitarity_residual",
    "pr_residuals",
    "solve_ale",
    "spectral_abscissa",
    "stability_margin",
    "transfer_function",
    "validation_report",
]

HURWITZ_TOL = 1e-9
SPECTRUM_TOL = 1e-6
# largest state dimension handled by the dense Kronecker solve
KRONECKER_MAX_N = 16


def ccr_symplectic(k: int) -> np.ndarray:
    """The matrix ``J_k = [[0, I], [-I, 0]]`` of order ``k`` (``k`` even)."""
    if k <= 0 or k % 2:
        raise ValueError(f"J_k needs a positive even order, got {k}")
    return np.kron(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(k // 2))


@dataclass(frozen=True)
class NetworkSpec:
    """Energy/coupling description of a translation invariant network.

    Attributes
    ----------
    theta : (n, n) ndarray
        Real antisymmetric nonsingular CCR matrix of one site.
    R : LatticeKernel, n x n
        Energy kernel with ``R_{-l} = R_l^T``.
    M : LatticeKernel, m x n
        Coupling kernel.
    D : LatticeKernel, r x m
        Feedthrough kernel of the output fields.
    """

    theta: np.ndarray
    R: LatticeKernel
    M: LatticeKernel
    D: LatticeKernel

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        self.validate()

    @property
    def nu(self) -> int:
        return self.R.nu

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def m(self) -> int:
        return self.M.rows

    @property
    def r(self) -> int:
        return self.D.rows

    def validate(self) -> None:
        th = self.theta
        if th.ndim != 2 or th.shape[0] != th.shape[1]:
            raise InvariantViolation("theta must be a square matrix")
        n = th.shape[0]
        if n % 2:
            raise InvariantViolation("n must be even")
        if not np.allclose(th, -th.T, rtol=0.0, atol=1e-12):
            raise InvariantViolation("theta must be antisymmetric")
        if abs(np.linalg.det(th)) < 1e-12 * max(1.0, np.linalg.norm(th)) ** n:
            raise InvariantViolation("theta must be nonsingular")
        if len({self.R.nu, self.M.nu, self.D.nu}) != 1:
            raise InvariantViolation("R, M, D must live on the same lattice")
        if self.R.shape != (n, n):
            raise InvariantViolation(f"R blocks must be {n}x{n}, got {self.R.shape}")
        if self.M.cols != n:
            raise InvariantViolation(f"M blocks must have {n} columns, got {self.M.cols}")
        m, r = self.M.rows, self.D.rows
        if m % 2:
            raise InvariantViolation("m must be even")
        if r % 2:
            raise InvariantViolation("r must be even")
        if r > m:
            raise InvariantViolation("r must not exceed m")
        if self.D.cols != m:
            raise InvariantViolation(f"D blocks must have {m} columns, got {self.D.cols}")
        for name, k in (("R", self.R), ("M", self.M), ("D", self.D)):
            if not k.is_real:
                raise InvariantViolation(f"{name} must have real blocks")
        for off in self.R.support:
            mirror = tuple(-x for x in off)
            if not np.allclose(self.R[off], self.R[mirror].T, rtol=0.0, atol=1e-12):
                # name the pair by its lexicographically larger member
                raise InvariantViolation(f"R symmetry at offset {list(max(off, mirror))}")


@dataclass(frozen=True)
class DynamicsKernels:
    """QSDE coefficient kernels ``(A, B, C, D)``."""

    A: LatticeKernel
    B: LatticeKernel
    C: LatticeKernel
    D: LatticeKernel

    def __post_init__(self):
        n, m, r = self.A.rows, self.B.cols, self.C.rows
        if self.A.shape != (n, n) or self.B.shape != (n, m):
            raise ValueError("A must be n x n and B n x m")
        if self.C.shape != (r, n) or self.D.shape != (r, m):
            raise ValueError("C must be r x n and D r x m")
        if len({self.A.nu, self.B.nu, self.C.nu, self.D.nu}) != 1:
            raise ValueError("kernels live on different lattices")

    @property
    def nu(self) -> int:
        return self.A.nu

    @property
    def n(self) -> int:
        return self.A.rows

    @property
    def m(self) -> int:
        return self.B.cols

    @property
    def r(self) -> int:
        return self.C.rows

    def symbols(self, sigma):
        """SFTs ``(A(s), B(s), C(s), D(s))`` at the given torus point(s)."""
        return tuple(k.sft(sigma) for k in (self.A, self.B, self.C, self.D))


def assemble_dynamics(spec: NetworkSpec) -> DynamicsKernels:
    Jm = ccr_symplectic(spec.m)
    Mstar = spec.M.adjoint()
    two_theta = 2.0 * spec.theta
    A = two_theta @ (spec.R + Mstar @ Jm @ spec.M)
    B = two_theta @ Mstar
    C = 2.0 * (spec.D @ Jm @ spec.M)
    if len(C) == 0:
        C = LatticeKernel.zeros(spec.nu, spec.r, spec.n)
    if len(B) == 0:
        B = LatticeKernel.zeros(spec.nu, spec.n, spec.m)
    return DynamicsKernels(A.pruned(), B.pruned(), C.pruned(), spec.D)


def _opnorm(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x, ord=2, axis=(-2, -1))


def _herm(x: np.ndarray) -> np.ndarray:
    return x.conj().swapaxes(-1, -2)


class PRResiduals(NamedTuple):
    pr1: float
    pr2: float
    pr3: float


def pr_residuals(dyn: DynamicsKernels, theta, sigma_grid) -> PRResiduals:
    """Largest operator-norm residuals of the three PR identities on a grid."""
    A, B, C, D = dyn.symbols(np.atleast_2d(sigma_grid))
    theta = np.asarray(theta, dtype=float)
    Jm, Jr = ccr_symplectic(dyn.m), ccr_symplectic(dyn.r)
    r1 = A @ theta + theta @ _herm(A) + B @ Jm @ _herm(B)
    r2 = theta @ _herm(C) + B @ Jm @ _herm(D)
    r3 = D @ Jm @ _herm(D) - Jr
    return PRResiduals(*(float(np.max(_opnorm(x))) for x in (r1, r2, r3)))


def transfer_function(dyn: DynamicsKernels, sigma, s) -> np.ndarray:
    """Field-to-field transfer ``C (sI - A)^{-1} B + D`` at paired samples."""
    sig = np.atleast_2d(sigma)
    s = np.broadcast_to(np.asarray(s, dtype=complex), (sig.shape[0],))
    A, B, C, D = dyn.symbols(sig)
    eye = np.eye(dyn.n)
    resolvent_B = np.linalg.solve(s[:, None, None] * eye - A, B)
    return C @ resolvent_B + D


def _check_distance(A: np.ndarray, s: np.ndarray, tol: float) -> None:
    eig = np.linalg.eigvals(A)
    dist = np.min(np.abs(eig - s[:, None]), axis=-1)
    if np.any(dist < tol):
        k = int(np.argmin(dist))
        raise SampleTooCloseToSpectrum(
            f"s={s[k]} lies within {dist[k]:.3g} of the spectrum of A(sigma)"
        )


def jj_unitarity_residual(dyn: DynamicsKernels, sigma_samples, s_samples, tol=SPECTRUM_TOL):
    """max ||F(sigma, s) J_m F(-sigma, -s)^T - J_r|| over paired samples."""
    sig = np.atleast_2d(np.asarray(sigma_samples, dtype=float))
    s = np.broadcast_to(np.asarray(s_samples, dtype=complex), (sig.shape[0],))
    _check_distance(dyn.A.sft(sig), s, tol)
    _check_distance(dyn.A.sft(-sig), -s, tol)
    F = transfer_function(dyn, sig, s)
    F_diam = transfer_function(dyn, -sig, -s).swapaxes(-1, -2)
    res = F @ ccr_symplectic(dyn.m) @ F_diam - ccr_symplectic(dyn.r)
    return float(np.max(_opnorm(res)))


def spectral_abscissa(A: np.ndarray) -> np.ndarray:
    return np.max(np.linalg.eigvals(A).real, axis=-1)


def stability_margin(dyn: DynamicsKernels, sigma_grid) -> float:
    """Minus the largest real part of the eigenvalues of A(sigma) on the grid."""
    return float(-np.max(spectral_abscissa(dyn.A.sft(np.atleast_2d(sigma_grid)))))


def certified_stability_margin(dyn: DynamicsKernels, n_sigma: int = 64) -> float:
    """Lower bound on the continuum stability margin from a uniform grid.

    Every torus point lies within ``h = sqrt(nu) pi / n_sigma`` of a node, and
    ``||A(sigma) - A(node)|| <= L h`` with ``L = sum |l| ||A_l||``.  The
    Bauer-Fike theorem then moves each eigenvalue by at most
    ``cond(V) L h``, with ``V`` the eigenvector matrix at the node.  A
    positive return value certifies stability on the whole torus.
    """
    nodes = torus_nodes(dyn.nu, n_sigma)
    A = dyn.A.sft(nodes)
    w, V = np.linalg.eig(A)
    cond = np.linalg.cond(V)
    h = np.sqrt(dyn.nu) * np.pi / n_sigma
    lip = dyn.A.lipschitz_constant()
    if lip == 0:
        # constant symbol: the grid value is the continuum value, even when
        # A is defective and cond(V) is infinite
        return float(-np.max(w.real))
    slack = -np.max(w.real, axis=-1) - cond * lip * h
    return float(np.min(slack))


def _kronecker_ale(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    # col(A P + P A^*) = (conj(A) (+) A) col(P) with column-major col()
    n = A.shape[-1]
    eye = np.eye(n)
    K = np.einsum("...ij,kl->...ikjl", A.conj(), eye).reshape(A.shape[:-2] + (n * n, n * n))
    K = K + np.einsum("ij,...kl->...ikjl", eye, A).reshape(K.shape)
    q = Q.swapaxes(-1, -2).reshape(Q.shape[:-2] + (n * n,))
    p = np.linalg.solve(K, -q[..., None])[..., 0]
    return p.reshape(Q.shape[:-2] + (n, n)).swapaxes(-1, -2)


def solve_ale(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``A P + P A^* + Q = 0`` for a stack of Hurwitz matrices.

    Uses the Kronecker-sum linear system for ``n <= 16`` and the Schur-based
    Bartels-Stewart solver otherwise.  The result is symmetrized.
    """
    A = np.asarray(A, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    n = A.shape[-1]
    if n <= KRONECKER_MAX_N:
        P = _kronecker_ale(A, Q)
    else:
        flatA = A.reshape(-1, n, n)
        flatQ = Q.reshape(-1, n, n)
        P = np.stack(
            [scipy.linalg.solve_continuous_lyapunov(a, -q) for a, q in zip(flatA, flatQ)]
        ).reshape(A.shape)
    return 0.5 * (P + _herm(P))


def covariance_by_integral(A: np.ndarray, B: np.ndarray, doublings: int = 40) -> np.ndarray:
    """``int_0^t exp(tau A) B B^* exp(tau A^*) d tau`` by interval doubling.

    Independent of the Kronecker solve: a short-interval integral from the
    Van Loan block exponential is doubled as E(2t) = E(t) + e^{tA} E(t) e^{tA^*}
    until ``t = h 2^doublings``.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[-1]
    h = 1.0 / max(1.0, float(np.max(np.linalg.norm(A, ord=2, axis=(-2, -1)))))
    h *= 2.0 ** -20
    Q = B @ _herm(B)
    blk = np.zeros(A.shape[:-2] + (2 * n, 2 * n), dtype=complex)
    blk[..., :n, :n] = -A
    blk[..., :n, n:] = Q
    blk[..., n:, n:] = _herm(A)
    F = scipy.linalg.expm(h * blk)
    expA = _herm(F[..., n:, n:])
    E = expA @ F[..., :n, n:]
    for _ in range(doublings):
        E = E + expA @ E @ _herm(expA)
        expA = expA @ expA
    return 0.5 * (E + _herm(E))


def invariant_covariance_sft(dyn: DynamicsKernels, sigma) -> np.ndarray:
    """Invariant real covariance symbol P(sigma) from the ALE at each point."""
    sig = np.asarray(sigma, dtype=float)
    single = sig.ndim == 1
    sig = np.atleast_2d(sig)
    A = dyn.A.sft(sig)
    B = dyn.B.sft(sig)
    absc = spectral_abscissa(A)
    if np.any(absc >= -HURWITZ_TOL):
        k = int(np.argmax(absc))
        raise NotHurwitz(f"A(sigma) has spectral abscissa {absc[k]:.3g} at sigma={sig[k]}")
    P = solve_ale(A, B @ _herm(B))
    return P[0] if single else P


@dataclass(frozen=True)
class CovarianceTable:
    nodes: np.ndarray
    P: np.ndarray
    blocks: dict

    def kernel(self) -> LatticeKernel:
        return LatticeKernel(self.blocks, nu=self.nodes.shape[1])


def invariant_covariance_kernel(dyn: DynamicsKernels, n_sigma: int = 64, offsets=None):
    """Tabulate P(sigma) on the uniform torus grid and invert requested blocks.

    Returns a :class:`CovarianceTable`; ``blocks`` maps each offset to the
    real matrix ``P_l`` (imaginary parts are discarded after being checked
    against ``1e-10`` relative to the table scale).
    """
    nodes = torus_nodes(dyn.nu, n_sigma)
    P = invariant_covariance_sft(dyn, nodes)
    if offsets is None:
        offsets = [(0,) * dyn.nu]
    offsets = [tuple(int(x) for x in np.atleast_1d(o)) for o in offsets]
    raw = inverse_sft(P, nodes, offsets)
    scale = max(1.0, float(np.max(np.abs(P))))
    if np.max(np.abs(raw.imag), initial=0.0) > 1e-10 * scale:
        raise ValueError("inverse SFT of P(sigma) is not real; grid too coarse?")
    blocks = {off: raw[i].real for i, off in enumerate(offsets)}
    return CovarianceTable(nodes, P, blocks)


@dataclass(frozen=True)
class SeriesComposite:
    """Cascade in which the outputs of ``upstream`` drive ``downstream``.

    ``dynamics`` is built from kernel products following the cascade block
    formula.  ``R`` and ``M`` are the energy and coupling kernels of the
    composite; they are finite products of the factors' kernels, so the
    composite can also be expressed as a :class:`NetworkSpec`.
    """

    dynamics: DynamicsKernels
    theta: np.ndarray
    R: LatticeKernel
    M: LatticeKernel
    D: LatticeKernel

    def as_spec(self) -> NetworkSpec:
        return NetworkSpec(self.theta, self.R, self.M, self.D)

    def parameter_table(self, sigma):
        """SFT samples ``(R(sigma), M(sigma))`` of the composite parameters."""
        return self.R.sft(sigma), self.M.sft(sigma)


def compose_series(upstream, downstream) -> SeriesComposite:
    """Series connection of two networks, each given as a ``NetworkSpec``."""
    s1, s2 = upstream, downstream
    if s1.r != s2.m:
        raise ValueError(f"upstream has {s1.r} outputs but downstream takes {s2.m} inputs")
    if s1.nu != s2.nu:
        raise ValueError("networks live on different lattices")
    d1, d2 = assemble_dynamics(s1), assemble_dynamics(s2)
    nu = s1.nu
    Z = LatticeKernel.zeros
    A = block_kernel([[d1.A, Z(nu, s1.n, s2.n)], [d2.B @ d1.C, d2.A]])
    B = block_kernel([[d1.B], [d2.B @ d1.D]])
    C = block_kernel([[d2.D @ d1.C, d2.C]])
    D = d2.D @ d1.D
    Jm1 = ccr_symplectic(s1.m)
    D1s_M2 = s1.D.adjoint() @ s2.M
    R12 = -1.0 * (s1.M.adjoint() @ Jm1 @ D1s_M2)
    R = block_kernel([[s1.R, R12], [R12.adjoint(), s2.R]])
    M = block_kernel([[s1.M, D1s_M2]])
    theta = scipy.linalg.block_diag(s1.theta, s2.theta)
    dyn = DynamicsKernels(A.pruned(), B.pruned(), C.pruned(), D.pruned())
    if len(dyn.D) == 0:
        dyn = DynamicsKernels(dyn.A, dyn.B, dyn.C, Z(nu, s2.r, s1.m))
    return SeriesComposite(dyn, theta, R, M, D if len(D) else Z(nu, s2.r, s1.m))


def validation_report(spec: NetworkSpec, n_sigma: int = 33, n_samples: int = 20, seed: int = 0):
    """PR, (J,J)-unitarity and stability figures as a JSON-ready dict."""
    dyn = assemble_dynamics(spec)
    nodes = torus_nodes(spec.nu, n_sigma)
    res = pr_residuals(dyn, spec.theta, nodes)
    rng = np.random.default_rng(seed)
    margin = stability_margin(dyn, nodes)
    sig = rng.uniform(-np.pi, np.pi, size=(n_samples, spec.nu))
    # real parts to the right of the spectrum keep s away from both spectra
    shift = max(1.0, 2.0 * float(np.max(np.abs(np.linalg.eigvals(dyn.A.sft(sig))))))
    s = shift + rng.uniform(0.0, 1.0, n_samples) + 1j * rng.normal(size=n_samples)
    jj = jj_unitarity_residual(dyn, sig, s)
    return {
        "pr1": res.pr1,
        "pr2": res.pr2,
        "pr3": res.pr3,
        "jj": jj,
        "stability_margin": margin,
        "certified_stability_margin": certified_stability_margin(dyn, max(n_sigma, 64)),
    }
