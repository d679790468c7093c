"""Finite-fragment, finite-horizon ground truth.

The QEF over a time window ``[0, T]`` and a fragment ``G`` is a Fredholm-type
determinant of the integral operators with kernels ``V_G`` and ``Lambda_G``.
Here those operators are discretized by the Nystrom method on midpoint
nodes, which turns every spectral statement into a dense eigenvalue problem
small enough for a desk computer.

The module also checks the two trace-averaging facts behind the limit
theorems: traces of products of block Toeplitz matrices over growing cubes,
and traces of powers of the Nystrom operators over growing horizons.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NotAdmissibleFinite
from .kernels import Fragment, LatticeKernel, cube_fragment, inverse_sft, kernel_multiply, torus_nodes
from .qef import ADMISSIBILITY_TOL, QuadratureGrid, _logcosh, _tanhc, temporal_rate_fragment
from .spectra import WeightedNetwork, _require_stable, fragment_density_arrays

__all__ = [
    "DiscretizedOperators",
    "MAX_ROWS",
    "check_no_zero_eigs",
    "discretize_operators",
    "finite_admissibility_margin",
    "lag_kernels",
    "log_qef_finite",
    "operator_average_check",
    "temporal_convergence_study",
    "toeplitz_average_check",
]

MAX_ROWS = 4000


def _herm(x):
    return x.conj().swapaxes(-1, -2)


@dataclass(frozen=True)
class DiscretizedOperators:
    """Nystrom matrices of the covariance and commutator operators.

    Attributes
    ----------
    G : Fragment
    T : float
        Time horizon.
    Nt : int
        Number of midpoint nodes ``t_i = (i + 1/2) T / Nt``.
    Vhat, Lhat : ndarray
        Square matrices of size ``q #G Nt`` ordered (time, site, component),
        with entries ``h V_G(t_i - t_j)`` and ``h Lambda_G(t_i - t_j)``.
        Both are real; ``Vhat`` is symmetric and ``Lhat`` antisymmetric, so
        they are Hermitian and skew-Hermitian as complex matrices.
    """

    G: Fragment
    T: float
    Nt: int
    Vhat: np.ndarray
    Lhat: np.ndarray

    @property
    def h(self) -> float:
        return self.T / self.Nt

    @property
    def size(self) -> int:
        return self.Vhat.shape[0]

    def symmetry_residuals(self) -> tuple[float, float]:
        """``(||Vhat - Vhat^*||, ||Lhat + Lhat^*||)`` in max norm."""
        return (
            float(np.max(np.abs(self.Vhat - _herm(self.Vhat)), initial=0.0)),
            float(np.max(np.abs(self.Lhat + _herm(self.Lhat)), initial=0.0)),
        )

    def min_covariance_eig(self) -> float:
        """Smallest eigenvalue of ``Vhat + i Lhat`` (quantum covariance positivity)."""
        M = self.Vhat + 1j * self.Lhat
        return float(np.linalg.eigvalsh(0.5 * (M + _herm(M)))[0])


def lag_kernels(wnet: WeightedNetwork, offsets, h: float, n_lags: int, n_sigma: int = 64):
    """``V_l(k h)`` and ``Lambda_l(k h)`` for ``k = 0 .. n_lags - 1``.

    Same quantities as :func:`~tiqnet.spectra.covariance_kernel_time` on a
    uniform lag grid, but the propagators are built as powers of one
    exponential ``e^{h A(sigma)}`` instead of one exponential per lag.

    Returns arrays of shape ``(n_lags, len(offsets), q, q)``.
    """
    import scipy.linalg

    nodes = torus_nodes(wnet.nu, n_sigma)
    _require_stable(wnet, nodes)
    A, _, S = wnet.symbols(nodes)
    P = wnet.covariance(nodes)
    Sh = _herm(S)
    step = scipy.linalg.expm(h * A)
    left = S.copy()  # S e^{k h A}
    Vs = np.empty((n_lags,) + (len(nodes), wnet.q, wnet.q), dtype=complex)
    Ls = np.empty_like(Vs)
    PS = P @ Sh
    TS = wnet.theta @ Sh
    for k in range(n_lags):
        Vs[k] = left @ PS
        Ls[k] = left @ TS
        left = left @ step
    offs = [tuple(int(x) for x in np.atleast_1d(o)) for o in offsets]
    V = np.moveaxis(inverse_sft(np.moveaxis(Vs, 1, 0), nodes, offs), 1, 0).real
    L = np.moveaxis(inverse_sft(np.moveaxis(Ls, 1, 0), nodes, offs), 1, 0).real
    return V, L


def _fragment_lag_blocks(blocks: np.ndarray, G: Fragment, offsets) -> np.ndarray:
    """``(n_lags, q #G, q #G)`` matrices ``[X_{G[a] - G[b]}]_{a, b}``."""
    lookup = {d: i for i, d in enumerate(offsets)}
    sites = G.as_array()
    nG = len(G)
    q = blocks.shape[-1]
    out = np.zeros((blocks.shape[0], q * nG, q * nG))
    for a in range(nG):
        for b in range(nG):
            d = tuple(int(x) for x in sites[a] - sites[b])
            out[:, a * q:(a + 1) * q, b * q:(b + 1) * q] = blocks[:, lookup[d]]
    return out


def _toeplitz_in_time(lagged: np.ndarray, sign: float) -> np.ndarray:
    """Assemble the matrix with blocks ``X(t_i - t_j)`` from ``X(k h)``, ``k >= 0``.

    Negative lags use ``X(-tau) = sign * X(tau)^T`` on the whole fragment
    block, which is ``+1`` for ``V_G`` and ``-1`` for ``Lambda_G``.
    """
    Nt, Q, _ = lagged.shape
    i = np.arange(Nt)
    d = i[:, None] - i[None, :]
    blocks = lagged[np.abs(d)]  # (Nt, Nt, Q, Q)
    neg = d < 0
    blocks[neg] = sign * blocks[neg].swapaxes(-1, -2)
    return blocks.transpose(0, 2, 1, 3).reshape(Nt * Q, Nt * Q)


def discretize_operators(
    wnet: WeightedNetwork,
    G: Fragment,
    T: float,
    Nt: int,
    n_sigma: int = 64,
    max_rows: int = MAX_ROWS,
) -> DiscretizedOperators:
    """Midpoint Nystrom discretization of the fragment operators on ``[0, T]``.

    With ``h = T / Nt`` the matrices carry entries ``h X(t_i - t_j)``, which
    equals the symmetric ``sqrt(h) X sqrt(h)`` weighting, so their spectra
    approximate those of the integral operators directly.

    Raises
    ------
    ValueError
        If ``Nt < 8``, ``T <= 0`` or the matrix would exceed ``max_rows`` rows.
    """
    if Nt < 8:
        raise ValueError("Nt must be at least 8")
    if not T > 0:
        raise ValueError("horizon T must be positive")
    if G.nu != wnet.nu:
        raise ValueError("fragment lives on a different lattice")
    rows = wnet.q * len(G) * Nt
    if rows > max_rows:
        raise ValueError(f"{rows} rows exceed the limit of {max_rows}")
    h = T / Nt
    offsets = G.differences()
    V, L = lag_kernels(wnet, offsets, h, Nt, n_sigma)
    VG = _fragment_lag_blocks(V, G, offsets)
    LG = _fragment_lag_blocks(L, G, offsets)
    Vhat = h * _toeplitz_in_time(VG, 1.0)
    Lhat = h * _toeplitz_in_time(LG, -1.0)
    Vhat = 0.5 * (Vhat + Vhat.T)
    Lhat = 0.5 * (Lhat - Lhat.T)
    return DiscretizedOperators(G, float(T), int(Nt), Vhat, Lhat)


def check_no_zero_eigs(ops: DiscretizedOperators, tol: float = 1e-10) -> tuple[bool, float]:
    """Report whether ``Lhat`` stays away from zero eigenvalues.

    Returns ``(min |eig(Lhat)| > tol, min |eig(Lhat)|)``.  Informational only;
    the QEF evaluation stays regular when eigenvalues vanish.
    """
    y = np.linalg.eigvalsh(ops.Lhat.T @ ops.Lhat)
    smallest = float(np.sqrt(max(y[0], 0.0))) if y.size else 0.0
    return smallest > tol, smallest


def _even_parts(Vhat: np.ndarray, Lhat: np.ndarray, theta: float):
    """``(sum lncosh(theta eig H), eig(K^1/2 Vhat K^1/2))`` in real arithmetic.

    ``cosh`` and ``tanhc`` are even, so both only depend on
    ``H^2 = -Lhat^2 = Lhat^T Lhat``, a real symmetric matrix.  Working with
    ``H^2`` avoids a complex eigensolver; the functions are smooth in ``x^2``
    so nothing is lost in accuracy.
    """
    y, Q = np.linalg.eigh(Lhat.T @ Lhat)
    x = theta * np.sqrt(np.clip(y, 0.0, None))
    root = np.sqrt(_tanhc(x))
    Vq = Q.T @ Vhat @ Q
    Kv = root[:, None] * Vq * root[None, :]
    mu = np.linalg.eigvalsh(0.5 * (Kv + Kv.T))
    return float(np.sum(_logcosh(x))), mu


def log_qef_finite(ops: DiscretizedOperators, theta: float) -> float:
    """``ln Xi`` for the discretized operators.

    ``ln Xi = -1/2 [ln det cosh(theta H) + ln det(I - theta K^1/2 Vhat K^1/2)]``
    with ``H = -i Lhat`` and ``K = tanhc(theta H)``.

    Raises
    ------
    NotAdmissibleFinite
        If ``theta lambda_max(K^1/2 Vhat K^1/2)`` reaches 1.
    """
    if theta == 0:
        return 0.0
    lc, mu = _even_parts(ops.Vhat, ops.Lhat, theta)
    top = theta * float(mu[-1]) if mu.size else 0.0
    if top >= 1.0 - ADMISSIBILITY_TOL:
        raise NotAdmissibleFinite(
            f"theta={theta:g}: theta*lambda_max reaches {top:.6g} >= 1 on the finite horizon"
        )
    return -0.5 * (lc + float(np.sum(np.log1p(-theta * mu))))


def finite_admissibility_margin(ops: DiscretizedOperators, theta: float) -> float:
    """``1 - theta lambda_max(K^1/2 Vhat K^1/2)``."""
    if theta == 0:
        return 1.0
    _, mu = _even_parts(ops.Vhat, ops.Lhat, theta)
    return 1.0 - theta * float(mu[-1]) if mu.size else 1.0


def temporal_convergence_study(
    wnet: WeightedNetwork,
    G: Fragment,
    theta: float,
    T_list: Sequence[float],
    nt_per_T: float = 20,
    n_sigma: int = 64,
    grid: QuadratureGrid | None = None,
) -> list[dict]:
    """Rows ``{T, Nt, rate, error}`` with ``rate = ln Xi / T``.

    ``error`` is measured against the infinite-horizon fragment rate from
    :func:`~tiqnet.qef.temporal_rate_fragment`.
    """
    target = 0.0
    if theta != 0:
        target, _ = temporal_rate_fragment(wnet, G, theta, grid)
    rows = []
    for T in T_list:
        Nt = max(8, int(round(nt_per_T * T)))
        ops = discretize_operators(wnet, G, T, Nt, n_sigma)
        rate = log_qef_finite(ops, theta) / T
        rows.append({"T": float(T), "Nt": Nt, "rate": rate, "target": target, "error": abs(rate - target)})
    return rows


def toeplitz_average_check(kernels: Sequence[LatticeKernel], L_list: Sequence[int]) -> list[dict]:
    """Normalized traces of products of block Toeplitz matrices over cubes.

    ``lhs = Tr(prod_s f^(s)_G) / L^nu`` on the cube of side ``L`` and
    ``rhs = (2 pi)^-nu int Tr prod_s F^(s)(sigma) d sigma``, which is the trace
    of the offset-0 block of the kernel product and is evaluated exactly.
    """
    kernels = list(kernels)
    if not kernels:
        raise ValueError("need at least one kernel")
    nu = kernels[0].nu
    for a, b in zip(kernels, kernels[1:]):
        if b.nu != nu:
            raise ValueError("kernels live on different lattices")
        if a.cols != b.rows:
            raise ValueError(f"cannot chain {a.shape} with {b.shape}")
    if kernels[0].rows != kernels[-1].cols:
        raise ValueError("product must be square to take a trace")
    prod = kernels[0]
    for f in kernels[1:]:
        prod = kernel_multiply(prod, f)
    rhs = float(np.real(np.trace(prod[(0,) * nu])))
    rows = []
    for L in L_list:
        G = cube_fragment(nu, int(L))
        M = kernels[0].restrict(G)
        for f in kernels[1:]:
            M = M @ f.restrict(G)
        lhs = float(np.real(np.trace(M))) / L ** nu
        rows.append({"L": int(L), "lhs": lhs, "rhs": rhs, "error": abs(lhs - rhs)})
    return rows


def operator_average_check(
    wnet: WeightedNetwork,
    G: Fragment,
    T_list: Sequence[float],
    N: int,
    nt_per_T: float = 20,
    n_sigma: int = 64,
    grid: QuadratureGrid | None = None,
) -> list[dict]:
    """``Tr(Vhat^N) / T`` against ``(2 pi)^-1 int Tr Phi_G(lambda)^N d lambda``.

    Returns rows ``{T, Nt, lhs, rhs, error, rel_error}``.
    """
    if N not in (1, 2, 3):
        raise ValueError("monomial degree N must be 1, 2 or 3")
    if grid is None:
        grid = QuadratureGrid(wnet.nu)
    PhiG, _ = fragment_density_arrays(wnet, G, grid.lambda_nodes, n_sigma)
    powers = np.linalg.matrix_power(PhiG, N)
    rhs = float(np.sum(grid.lambda_weights * np.real(np.trace(powers, axis1=-2, axis2=-1)))) / (2 * np.pi)
    rows = []
    for T in T_list:
        Nt = max(8, int(round(nt_per_T * T)))
        ops = discretize_operators(wnet, G, T, Nt, n_sigma)
        lhs = float(np.trace(np.linalg.matrix_power(ops.Vhat, N))) / T
        err = abs(lhs - rhs)
        rows.append({
            "T": float(T),
            "Nt": Nt,
            "lhs": lhs,
            "rhs": rhs,
            "error": err,
            "rel_error": err / abs(rhs) if rhs else err,
        })
    return rows
