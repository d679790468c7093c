"""Quantum spectral density of the weighted process Z = S X.

For a stable network the invariant two-point covariance of ``Z`` has real
part ``V`` and imaginary part ``Lambda``.  Their spatio-temporal Fourier
transforms factor through the transfer function
``F(sigma, s) = S(sigma) (sI - A(sigma))^{-1} B(sigma)``:

    Phi = F F^*,        Psi = F J_m F^*      (at s = i lambda).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotHurwitz, SingularResolvent
from .kernels import Fragment, LatticeKernel, inverse_sft, torus_nodes
from .network import (
    HURWITZ_TOL,
    DynamicsKernels,
    NetworkSpec,
    assemble_dynamics,
    ccr_symplectic,
    invariant_covariance_sft,
    spectral_abscissa,
)

__all__ = [
    "WeightedNetwork",
    "SpectralSample",
    "FragmentSpectralSample",
    "covariance_kernel_time",
    "fragment_spectral_density",
    "quantum_spectral_density",
    "spectral_density_arrays",
    "st_transfer",
]


def _herm(x):
    return x.conj().swapaxes(-1, -2)


class WeightedNetwork:
    """A stable network together with a weighting kernel ``S`` (q x n).

    Parameters
    ----------
    spec : NetworkSpec
    S : LatticeKernel
        Weighting kernel; any number of rows ``q >= 1``.
    dynamics : DynamicsKernels, optional
        Precomputed coefficient kernels.  Defaults to
        ``assemble_dynamics(spec)``.
    """

    def __init__(self, spec: NetworkSpec, S: LatticeKernel, dynamics: DynamicsKernels | None = None):
        if S.nu != spec.nu:
            raise ValueError("S lives on a different lattice than the network")
        if S.cols != spec.n:
            raise ValueError(f"S must have {spec.n} columns, got {S.cols}")
        self.spec = spec
        self.S = S
        self.dynamics = dynamics if dynamics is not None else assemble_dynamics(spec)
        self._P_cache: dict[bytes, np.ndarray] = {}

    @property
    def nu(self) -> int:
        return self.spec.nu

    @property
    def q(self) -> int:
        return self.S.rows

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def theta(self) -> np.ndarray:
        return self.spec.theta

    def __repr__(self):
        return f"WeightedNetwork(nu={self.nu}, n={self.n}, m={self.m}, q={self.q})"

    def symbols(self, sigma):
        """``(A(sigma), B(sigma), S(sigma))`` stacked over the given points."""
        sig = np.atleast_2d(sigma)
        return self.dynamics.A.sft(sig), self.dynamics.B.sft(sig), self.S.sft(sig)

    def covariance(self, sigma) -> np.ndarray:
        """Invariant covariance symbol P(sigma), cached per grid."""
        sig = np.ascontiguousarray(np.atleast_2d(sigma), dtype=float)
        key = sig.tobytes()
        if key not in self._P_cache:
            self._P_cache[key] = invariant_covariance_sft(self.dynamics, sig)
        return self._P_cache[key]


@dataclass(frozen=True)
class SpectralSample:
    sigma: np.ndarray
    lam: float
    Phi: np.ndarray
    Psi: np.ndarray


@dataclass(frozen=True)
class FragmentSpectralSample:
    G: Fragment
    lam: float
    PhiG: np.ndarray
    PsiG: np.ndarray
    refinement_error: float


def st_transfer(wnet: WeightedNetwork, sigma, s) -> np.ndarray:
    """``S(sigma) (sI - A(sigma))^{-1} B(sigma)``; broadcasts ``s`` over extra axes.

    With ``sigma`` of shape ``(N, nu)`` and ``s`` of shape ``(N, K)`` (or
    ``(K,)``) the result has shape ``(N, K, q, m)``; a single point ``sigma``
    of shape ``(nu,)`` with scalar ``s`` gives a ``(q, m)`` matrix.
    """
    sig = np.asarray(sigma, dtype=float)
    single = sig.ndim == 1 and np.ndim(s) == 0
    sig = np.atleast_2d(sig)
    A, B, S = wnet.symbols(sig)
    s = np.asarray(s, dtype=complex)
    if s.ndim == 0:
        s = np.broadcast_to(s, (sig.shape[0], 1))
    elif s.ndim == 1:
        s = np.broadcast_to(s, (sig.shape[0], s.shape[0]))
    eye = np.eye(wnet.n)
    pencil = s[..., None, None] * eye - A[:, None]
    eig = np.linalg.eigvals(A)
    dist = np.min(np.abs(eig[:, None, :] - s[..., None]), axis=-1)
    if np.any(dist < 1e-12 * max(1.0, float(np.max(np.abs(eig))))):
        raise SingularResolvent("s lies on the spectrum of A(sigma)")
    X = np.linalg.solve(pencil, np.broadcast_to(B[:, None], pencil.shape[:-1] + (wnet.m,)))
    F = S[:, None] @ X
    return F[0, 0] if single else F


def _require_stable(wnet: WeightedNetwork, sig: np.ndarray) -> None:
    absc = spectral_abscissa(wnet.dynamics.A.sft(sig))
    if np.any(absc >= -HURWITZ_TOL):
        raise NotHurwitz(f"A(sigma) is not Hurwitz (abscissa {np.max(absc):.3g})")


def spectral_density_arrays(wnet: WeightedNetwork, sigma, lambdas):
    """Phi and Psi on the product of torus points and frequencies.

    Returns two arrays of shape ``(N_sigma, N_lambda, q, q)``.
    """
    sig = np.atleast_2d(np.asarray(sigma, dtype=float))
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    _require_stable(wnet, sig)
    F = st_transfer(wnet, sig, 1j * lam)
    Fh = _herm(F)
    Phi = F @ Fh
    Psi = F @ ccr_symplectic(wnet.m) @ Fh
    Phi = 0.5 * (Phi + _herm(Phi))
    Psi = 0.5 * (Psi - _herm(Psi))
    return Phi, Psi


def quantum_spectral_density(wnet: WeightedNetwork, sigma, lam: float) -> SpectralSample:
    sig = np.asarray(sigma, dtype=float).reshape(wnet.nu)
    Phi, Psi = spectral_density_arrays(wnet, sig[None], [lam])
    return SpectralSample(sig, float(lam), Phi[0, 0], Psi[0, 0])


def _fragment_blocks(values: np.ndarray, nodes: np.ndarray, G: Fragment) -> np.ndarray:
    """Assemble ``(f_{G[a]-G[b]})`` from an inverse SFT of ``values`` (N, ..., q, q)."""
    sites = G.as_array()
    diffs = G.differences()
    blocks = inverse_sft(values, nodes, diffs)
    lookup = {d: i for i, d in enumerate(diffs)}
    q = values.shape[-1]
    nG = len(G)
    lead = values.shape[1:-2]
    out = np.zeros(lead + (q * nG, q * nG), dtype=complex)
    for a in range(nG):
        for b in range(nG):
            d = tuple(int(x) for x in sites[a] - sites[b])
            out[..., a * q:(a + 1) * q, b * q:(b + 1) * q] = blocks[lookup[d]]
    return out


def fragment_density_arrays(wnet: WeightedNetwork, G: Fragment, lambdas, n_sigma: int = 64):
    """Phi_G and Psi_G at each frequency via torus quadrature (Plancherel)."""
    if G.nu != wnet.nu:
        raise ValueError("fragment lives on a different lattice")
    nodes = torus_nodes(wnet.nu, n_sigma)
    Phi, Psi = spectral_density_arrays(wnet, nodes, lambdas)
    PhiG = _fragment_blocks(Phi, nodes, G)
    PsiG = _fragment_blocks(Psi, nodes, G)
    PhiG = 0.5 * (PhiG + _herm(PhiG))
    PsiG = 0.5 * (PsiG - _herm(PsiG))
    return PhiG, PsiG


def fragment_spectral_density(
    wnet: WeightedNetwork, G: Fragment, lam: float, n_sigma: int = 64
) -> FragmentSpectralSample:
    """Restriction of the spectral density to a finite fragment.

    The refinement error compares the ``n_sigma`` result with the one from
    half as many torus nodes per axis.
    """
    PhiG, PsiG = fragment_density_arrays(wnet, G, [lam], n_sigma)
    coarse_Phi, coarse_Psi = fragment_density_arrays(wnet, G, [lam], max(1, n_sigma // 2))
    err = max(
        float(np.max(np.abs(PhiG - coarse_Phi))), float(np.max(np.abs(PsiG - coarse_Psi)))
    )
    return FragmentSpectralSample(G, float(lam), PhiG[0], PsiG[0], err)


def _time_kernel_symbols(wnet: WeightedNetwork, nodes: np.ndarray, taus: np.ndarray):
    """Per-sigma symbols S e^{tau A} P S^* and S e^{tau A} Theta S^* for tau >= 0."""
    A, _, S = wnet.symbols(nodes)
    P = wnet.covariance(nodes)
    Sh = _herm(S)
    E = scipy.linalg.expm(taus[:, None, None, None] * A[None])  # (T, N, n, n)
    V = S @ E @ P @ Sh
    L = S @ E @ wnet.theta @ Sh
    return V, L


def covariance_kernel_time(wnet: WeightedNetwork, tau, offsets, n_sigma: int = 64):
    """Real and imaginary invariant covariance blocks ``V_l(tau)``, ``Lambda_l(tau)``.

    ``tau`` may be a scalar or 1-D array; ``offsets`` a list of lattice
    offsets.  Returns arrays of shape ``(len(tau), len(offsets), q, q)``
    (leading axis dropped for scalar ``tau``).
    """
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    offs = [tuple(int(x) for x in np.atleast_1d(o)) for o in offsets]
    nodes = torus_nodes(wnet.nu, n_sigma)
    _require_stable(wnet, nodes)
    V = np.zeros((len(taus), len(offs), wnet.q, wnet.q))
    L = np.zeros_like(V)
    pos = taus >= 0
    for mask, sign in ((pos, 1.0), (~pos, -1.0)):
        if not np.any(mask):
            continue
        # negative lags: V_l(-t) = V_{-l}(t)^T and Lambda_l(-t) = -Lambda_{-l}(t)^T
        use_offs = offs if sign > 0 else [tuple(-x for x in o) for o in offs]
        Vs, Ls = _time_kernel_symbols(wnet, nodes, sign * taus[mask])
        Vb = np.stack([inverse_sft(v, nodes, use_offs) for v in Vs]).real
        Lb = np.stack([inverse_sft(x, nodes, use_offs) for x in Ls]).real
        if sign < 0:
            Vb, Lb = Vb.swapaxes(-1, -2), -Lb.swapaxes(-1, -2)
        V[mask], L[mask] = Vb, Lb
    if np.ndim(tau) == 0:
        return V[0], L[0]
    return V, L
