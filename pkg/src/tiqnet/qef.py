"""Growth rates of the quadratic-exponential functional (QEF).

The spatio-temporal rate per unit time and lattice site is an integral over
torus x frequency axis of ``-ln det D_theta`` with

    D_theta = cos(theta Psi) - theta Phi sinc(theta Psi).

Every matrix function is routed through the Hermitian matrix ``H = -i Psi``:
``cos(theta Psi) = cosh(theta H)``, ``sinc(theta Psi) = sinhc(theta H)`` and
``tanc(theta Psi) = tanhc(theta H)``, so that

    ln det D_theta = ln det cosh(theta H) + ln det(I - theta T^1/2 Phi T^1/2),

with ``T = tanhc(theta H)``, is real and admissibility shows up as the top
eigenvalue of ``theta T^1/2 Phi T^1/2`` reaching 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import HomotopyDiverged, NotAdmissible, NotHermitian
from .kernels import Fragment, torus_nodes
from .spectra import WeightedNetwork, fragment_density_arrays, spectral_density_arrays

__all__ = [
    "QuadratureGrid",
    "SpectralTable",
    "RateRecord",
    "RateProfile",
    "admissibility_margin",
    "asymptotic_admissibility",
    "classical_rate",
    "d_matrix",
    "homotopy_rate",
    "matrix_trig",
    "max_admissible_theta",
    "mean_square_rate",
    "mean_square_rate_spectral",
    "qef_integrand",
    "qef_integrand_arrays",
    "qef_rate",
    "riccati_direct",
    "riccati_u1",
    "small_theta_expansion",
    "tail_bound",
    "temporal_rate_fragment",
]

ADMISSIBILITY_TOL = 1e-10
THETA_SENTINEL = 1e3
SENTINEL_MARGIN_TOL = 1e-6
MAX_NU = 3


def _herm(x):
    return x.conj().swapaxes(-1, -2)


# -- scalar functions extended by continuity at 0 ----------------------------

def _tanhc(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0, np.tanh(xs) / xs)


def _sinhc(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 + x2 / 6.0 + x2 * x2 / 120.0, np.sinh(xs) / xs)


def _logcosh(x):
    a = np.abs(np.asarray(x, dtype=float))
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def _funm(U, values):
    """U diag(values) U^* for stacked eigendecompositions."""
    return (U * values[..., None, :]) @ _herm(U)


# -- grids and tabulated spectra ---------------------------------------------

@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor grid on torus x real line.

    Torus: ``n_sigma`` uniform nodes per axis with weight ``(2 pi / n_sigma)^nu``.
    Frequency: Gauss-Legendre nodes ``u_k`` on ``(-pi/2, pi/2)`` mapped by
    ``lambda = c tan(u)`` with weights ``c w_k / cos(u_k)^2``.
    """

    nu: int
    n_sigma: int = 64
    n_lambda: int = 257
    lambda_scale: float = 1.0
    allow_large_nu: bool = False
    sigma_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    sigma_weight: float = field(init=False, repr=False, compare=False)
    lambda_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    lambda_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.nu < 1:
            raise ValueError("nu must be >= 1")
        if self.nu > MAX_NU and not self.allow_large_nu:
            raise ValueError(f"nu={self.nu} exceeds {MAX_NU}; pass allow_large_nu=True")
        if self.n_sigma < 1 or self.n_lambda < 1:
            raise ValueError("grid sizes must be positive")
        if not self.lambda_scale > 0:
            raise ValueError("lambda_scale must be positive")
        x, w = np.polynomial.legendre.leggauss(self.n_lambda)
        u = 0.5 * np.pi * x
        lam = self.lambda_scale * np.tan(u)
        lw = 0.5 * np.pi * w * self.lambda_scale / np.cos(u) ** 2
        object.__setattr__(self, "sigma_nodes", torus_nodes(self.nu, self.n_sigma))
        object.__setattr__(self, "sigma_weight", (2 * np.pi / self.n_sigma) ** self.nu)
        object.__setattr__(self, "lambda_nodes", lam)
        object.__setattr__(self, "lambda_weights", lw)

    def halved(self) -> "QuadratureGrid":
        """Roughly half the density along each axis, for error estimates."""
        return QuadratureGrid(
            self.nu,
            max(1, self.n_sigma // 2),
            max(1, self.n_lambda // 2 | 1),
            self.lambda_scale,
            self.allow_large_nu,
        )

    def weights(self) -> np.ndarray:
        """Product weights of shape ``(n_sigma**nu, n_lambda)``."""
        return self.sigma_weight * np.broadcast_to(
            self.lambda_weights, (len(self.sigma_nodes), self.n_lambda)
        )

    def describe(self) -> dict:
        return {
            "nu": self.nu,
            "n_sigma": self.n_sigma,
            "n_lambda": self.n_lambda,
            "lambda_scale": self.lambda_scale,
        }


@dataclass(frozen=True)
class SpectralTable:
    """Phi, Psi sampled on a quadrature grid, with product weights.

    ``norm`` is the constant turning weighted sums into normalized averages,
    ``(2 pi)^(nu + 1)`` for the spatio-temporal integrals.
    """

    Phi: np.ndarray
    Psi: np.ndarray
    weights: np.ndarray
    nu: int

    @classmethod
    def from_network(cls, wnet: WeightedNetwork, grid: QuadratureGrid) -> "SpectralTable":
        if grid.nu != wnet.nu:
            raise ValueError("grid and network live on different lattices")
        Phi, Psi = spectral_density_arrays(wnet, grid.sigma_nodes, grid.lambda_nodes)
        return cls(Phi, Psi, grid.weights(), wnet.nu)

    @property
    def norm(self) -> float:
        return (2 * np.pi) ** (self.nu + 1)

    def integrate(self, values: np.ndarray) -> float:
        """``(2 (2 pi)^(nu+1))^-1 * sum(weights * values)``."""
        return float(np.sum(self.weights * values) / (2.0 * self.norm))


def _table(source, grid: QuadratureGrid | None) -> SpectralTable:
    if isinstance(source, SpectralTable):
        return source
    if grid is None:
        grid = QuadratureGrid(source.nu)
    return SpectralTable.from_network(source, grid)


# -- matrix trigonometric calculus -------------------------------------------

def matrix_trig(H: np.ndarray, theta: float):
    """``(cosh(theta H), sinhc(theta H), tanhc(theta H))`` for Hermitian ``H``."""
    H = np.asarray(H)
    if not np.allclose(H, _herm(H), rtol=0.0, atol=1e-12 * max(1.0, float(np.max(np.abs(H), initial=0)))):
        raise NotHermitian("matrix_trig expects a Hermitian argument")
    w, U = np.linalg.eigh(0.5 * (H + _herm(H)))
    x = theta * w
    return _funm(U, np.cosh(x)), _funm(U, _sinhc(x)), _funm(U, _tanhc(x))


def _hermitian_parts(Psi):
    H = -1j * np.asarray(Psi)
    return 0.5 * (H + _herm(H))


def _admissibility_parts(Phi, Psi, theta, eig=None):
    """Eigen-data shared by the integrand and the margin.

    ``eig`` may carry a precomputed ``eigh(-i Psi)``, which does not depend
    on ``theta``.
    """
    w, U = eig if eig is not None else np.linalg.eigh(_hermitian_parts(Psi))
    x = theta * w
    root = _funm(U, np.sqrt(_tanhc(x)))
    K = root @ Phi @ root
    mu = np.linalg.eigvalsh(0.5 * (K + _herm(K)))
    return x, mu


def qef_integrand_arrays(Phi, Psi, theta: float, check: bool = True):
    """``-ln det D_theta`` over stacked samples, plus ``theta * lambda_max``.

    Raises :class:`NotAdmissible` (when ``check``) if any sample has
    ``theta lambda_max(T^1/2 Phi T^1/2) >= 1 - 1e-10``.
    """
    if theta == 0:
        shape = np.shape(Phi)[:-2]
        return np.zeros(shape), np.zeros(shape)
    x, mu = _admissibility_parts(Phi, Psi, theta)
    top = theta * mu[..., -1]
    if check and np.any(top >= 1.0 - ADMISSIBILITY_TOL):
        raise NotAdmissible(
            f"theta={theta:g}: theta*lambda_max reaches {np.max(top):.6g} >= 1"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        logdet = np.sum(_logcosh(x), axis=-1) + np.sum(np.log1p(-theta * mu), axis=-1)
    return -logdet, top


def qef_integrand(sample, theta: float) -> float:
    """``-ln det D_theta`` at one :class:`~tiqnet.spectra.SpectralSample`."""
    g, _ = qef_integrand_arrays(sample.Phi, sample.Psi, theta)
    return float(g)


def d_matrix(Phi, Psi, theta: float) -> np.ndarray:
    """``D_theta = cosh(theta H) - theta Phi sinhc(theta H)`` with ``H = -i Psi``."""
    w, U = np.linalg.eigh(_hermitian_parts(Psi))
    x = theta * w
    return _funm(U, np.cosh(x)) - theta * Phi @ _funm(U, _sinhc(x))


def riccati_direct(Phi, Psi, theta: float) -> np.ndarray:
    """Closed-form ``U_theta = -D_theta^{-1} dD_theta/dtheta``.

    Uses ``-dD/dtheta = Phi cosh(theta H) - H sinh(theta H)``, which avoids
    inverting ``Psi``.
    """
    H = _hermitian_parts(Psi)
    w, U = np.linalg.eigh(H)
    x = theta * w
    ch = _funm(U, np.cosh(x))
    Dm = ch - theta * Phi @ _funm(U, _sinhc(x))
    rhs = Phi @ ch - _funm(U, w * np.sinh(x))
    out = np.linalg.solve(Dm, rhs)
    return out


def riccati_u1(Phi, Psi, theta: float) -> np.ndarray:
    """Literal closed form ``Psi (Psi cos - Phi sin)^{-1} (Phi cos + Psi sin)``.

    Requires ``Psi cos(theta Psi) - Phi sin(theta Psi)`` to be invertible,
    which fails wherever ``Psi`` is singular.
    """
    w, U = np.linalg.eigh(_hermitian_parts(Psi))
    x = theta * w
    cos_ = _funm(U, np.cosh(x))
    sin_ = 1j * _funm(U, np.sinh(x))
    return Psi @ np.linalg.solve(Psi @ cos_ - Phi @ sin_, Phi @ cos_ + Psi @ sin_)


# -- admissibility -----------------------------------------------------------

def admissibility_margin(source, theta: float, grid: QuadratureGrid | None = None) -> float:
    """``1 - theta max lambda_max(T^1/2 Phi T^1/2)`` over the grid."""
    if theta == 0:
        return 1.0
    tab = _table(source, grid)
    _, mu = _admissibility_parts(tab.Phi, tab.Psi, theta)
    return float(1.0 - theta * np.max(mu[..., -1]))


def asymptotic_admissibility(source, grid: QuadratureGrid | None = None) -> float:
    """Limit of ``max theta lambda_max(T^1/2 Phi T^1/2)`` as ``theta -> inf``.

    Per sample ``theta tanhc(theta H) -> |H|^-1`` on the range of ``H`` and
    grows without bound on its kernel, so the limit is
    ``lambda_max(|H|^-1/2 Phi |H|^-1/2)`` unless ``Phi`` has weight on the
    kernel of ``H`` (then ``inf``).  A value ``<= 1`` means every ``theta``
    is admissible on the grid, even though the margin tends to 0.
    """
    tab = _table(source, grid)
    w, U = np.linalg.eigh(_hermitian_parts(tab.Psi))
    Phi_e = _herm(U) @ tab.Phi @ U
    scale = max(float(np.max(np.abs(w), initial=0.0)), float(np.max(np.abs(tab.Phi))), 1e-300)
    null = np.abs(w) <= 1e-12 * scale
    diag = np.real(np.diagonal(Phi_e, axis1=-2, axis2=-1))
    if np.any(null & (diag > 1e-12 * scale)):
        return math.inf
    inv_root = np.where(null, 0.0, 1.0 / np.sqrt(np.where(null, 1.0, np.abs(w))))
    Kmat = inv_root[..., :, None] * Phi_e * inv_root[..., None, :]
    return float(np.max(np.linalg.eigvalsh(0.5 * (Kmat + _herm(Kmat)))[..., -1]))


def max_admissible_theta(
    source,
    grid: QuadratureGrid | None = None,
    tol: float = SENTINEL_MARGIN_TOL,
    theta_cap: float = THETA_SENTINEL,
    rtol: float = 1e-10,
) -> float:
    """Supremum of ``theta`` with ``margin(theta) > tol``.

    Returns ``inf`` when the margin still exceeds ``tol`` at ``theta_cap`` or
    when :func:`asymptotic_admissibility` shows that no ``theta`` breaks
    admissibility on the grid.

    Bisection is valid because ``theta tanhc(theta x) = tanh(theta x)/x`` is
    nondecreasing in ``theta``, so the margin is nonincreasing.
    """
    tab = _table(source, grid)
    if admissibility_margin(tab, theta_cap) > tol:
        return math.inf
    if asymptotic_admissibility(tab) <= 1.0 + 1e-9:
        return math.inf
    lo, hi = 0.0, theta_cap
    # classical bound gives a finite lower bracket
    lam_phi = float(np.max(np.linalg.eigvalsh(tab.Phi)[..., -1]))
    if lam_phi > 0:
        lo = min((1.0 - tol) / lam_phi, theta_cap)
        if admissibility_margin(tab, lo) <= tol:
            lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if admissibility_margin(tab, mid) > tol:
            lo = mid
        else:
            hi = mid
    return lo


# -- rates -------------------------------------------------------------------

@dataclass(frozen=True)
class RateRecord:
    theta: float
    upsilon: float
    margin: float
    method: str
    err_est: float = float("nan")


@dataclass
class RateProfile:
    """Sequence of rate records plus method-specific diagnostics."""

    records: list[RateRecord] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, k):
        return self.records[k]

    @property
    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])

    @property
    def upsilons(self) -> np.ndarray:
        return np.array([r.upsilon for r in self.records])

    def at(self, theta: float) -> RateRecord:
        k = int(np.argmin(np.abs(self.thetas - theta)))
        return self.records[k]


def _rate_from_table(tab: SpectralTable, theta: float) -> tuple[float, float]:
    g, top = qef_integrand_arrays(tab.Phi, tab.Psi, theta)
    margin = 1.0 - float(np.max(top)) if theta else 1.0
    return tab.integrate(g), margin


def qef_rate(source, theta, grid: QuadratureGrid | None = None, estimate_error: bool = True):
    """Spatio-temporal QEF rate.

    ``theta`` may be a scalar (returns a :class:`RateRecord`) or a sequence
    (returns a :class:`RateProfile`).  The error estimate is the difference
    from the same computation on :meth:`QuadratureGrid.halved`.
    """
    if grid is None and not isinstance(source, SpectralTable):
        grid = QuadratureGrid(source.nu)
    tab = _table(source, grid)
    coarse = None
    if estimate_error and grid is not None and not isinstance(source, SpectralTable):
        coarse = SpectralTable.from_network(source, grid.halved())
    thetas = np.atleast_1d(np.asarray(theta, dtype=float))
    records = []
    for th in thetas:
        if th < 0 or not np.isfinite(th):
            raise ValueError(f"theta must be finite and >= 0, got {th}")
        ups, margin = _rate_from_table(tab, float(th))
        err = float("nan")
        if coarse is not None:
            err = abs(ups - _rate_from_table(coarse, float(th))[0])
        records.append(RateRecord(float(th), ups, margin, "quadrature", err))
    if np.ndim(theta) == 0:
        return records[0]
    return RateProfile(records, {"grid": grid.describe() if grid else None})


def temporal_rate_fragment(
    wnet: WeightedNetwork, G: Fragment, theta: float, grid: QuadratureGrid | None = None
):
    """Infinite-horizon QEF rate of a finite fragment.

    Returns ``(rate, symmetry_residual)`` where the residual compares the
    integrand at ``lambda`` and ``-lambda`` (equal for real networks).
    """
    grid = grid or QuadratureGrid(wnet.nu)
    lam, lw = grid.lambda_nodes, grid.lambda_weights
    if theta == 0:
        return 0.0, 0.0
    PhiG, PsiG = fragment_density_arrays(wnet, G, lam, grid.n_sigma)
    g, _ = qef_integrand_arrays(PhiG, PsiG, theta)
    # Gauss nodes are symmetric, so reversing the axis maps lambda -> -lambda
    sym = float(np.max(np.abs(g - g[::-1])))
    return float(np.sum(lw * g) / (4 * np.pi)), sym


def classical_rate(source, theta: float, grid: QuadratureGrid | None = None) -> float:
    """Rate obtained by discarding the commutator spectrum (Psi = 0)."""
    tab = _table(source, grid)
    if theta == 0:
        return 0.0
    lam = np.linalg.eigvalsh(tab.Phi)
    theta_star = 1.0 / float(np.max(lam[..., -1]))
    if theta >= theta_star * (1.0 - ADMISSIBILITY_TOL):
        raise NotAdmissible(f"theta={theta:g} is not below the classical bound {theta_star:.6g}")
    return tab.integrate(-np.sum(np.log1p(-theta * lam), axis=-1))


def small_theta_expansion(source, theta: float, grid: QuadratureGrid | None = None) -> float:
    """Classical rate plus the leading commutator correction (error o(theta^3))."""
    tab = _table(source, grid)
    if theta == 0:
        return 0.0
    base = classical_rate(tab, theta)
    q = tab.Phi.shape[-1]
    eye = np.eye(q)
    corr = np.linalg.solve(eye - theta * tab.Phi, (eye - theta / 3.0 * tab.Phi) @ tab.Psi @ tab.Psi)
    tr = np.trace(corr, axis1=-2, axis2=-1).real
    return base + 0.5 * theta**2 * tab.integrate(tr)


def mean_square_rate(wnet: WeightedNetwork, grid: QuadratureGrid | None = None) -> float:
    """Mean square cost per unit time and site from the ALE solution on the torus."""
    grid = grid or QuadratureGrid(wnet.nu)
    nodes = grid.sigma_nodes
    S = wnet.S.sft(nodes)
    P = wnet.covariance(nodes)
    tr = np.trace(S @ P @ _herm(S), axis1=-2, axis2=-1).real
    return float(0.5 * np.mean(tr))


def mean_square_rate_spectral(source, grid: QuadratureGrid | None = None) -> float:
    """Same quantity by integrating Tr Phi over torus x frequency axis."""
    tab = _table(source, grid)
    return tab.integrate(np.trace(tab.Phi, axis1=-2, axis2=-1).real)


def homotopy_rate(
    source,
    theta_max: float,
    n_steps: int = 200,
    grid: QuadratureGrid | None = None,
    checkpoint_every: int = 10,
    check_tol: float = 1e-6,
) -> RateProfile:
    """QEF rate profile on ``[0, theta_max]`` by Riccati continuation.

    At every grid node ``U' = Psi^2 + U^2`` with ``U(0) = Phi`` is integrated
    by classical RK4; the rate derivative is the weighted trace average of
    ``U`` and the rate itself is carried as an extra ODE component.  Every
    ``checkpoint_every`` steps ``U`` is compared with its closed form and the
    run aborts with :class:`HomotopyDiverged` if they drift apart.
    """
    tab = _table(source, grid)
    if theta_max <= 0 or n_steps < 1:
        raise ValueError("need theta_max > 0 and n_steps >= 1")
    end_margin = admissibility_margin(tab, theta_max)
    if end_margin <= 0:
        raise NotAdmissible(f"theta_max={theta_max:g} violates admissibility")
    h = theta_max / n_steps
    Psi2 = tab.Psi @ tab.Psi
    eig = np.linalg.eigh(_hermitian_parts(tab.Psi))

    def margin(theta):
        _, mu = _admissibility_parts(tab.Phi, tab.Psi, theta, eig)
        return float(1.0 - theta * np.max(mu[..., -1]))

    def dU(U):
        return Psi2 + U @ U

    def drate(U):
        return tab.integrate(np.trace(U, axis1=-2, axis2=-1).real)

    U = tab.Phi.astype(complex)
    ups = 0.0
    records = [RateRecord(0.0, 0.0, 1.0, "homotopy")]
    derivative = [drate(U)]
    deviations = []
    herm_resid = 0.0
    for k in range(1, n_steps + 1):
        k1 = dU(U)
        U2 = U + 0.5 * h * k1
        k2 = dU(U2)
        U3 = U + 0.5 * h * k2
        k3 = dU(U3)
        U4 = U + h * k3
        k4 = dU(U4)
        ups += h / 6.0 * (drate(U) + 2 * drate(U2) + 2 * drate(U3) + drate(U4))
        U = U + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        theta = k * h
        if not np.all(np.isfinite(U)):
            raise HomotopyDiverged(f"Riccati solution blew up at theta={theta:g}")
        herm_resid = max(herm_resid, float(np.max(np.abs(U - _herm(U)))))
        derivative.append(drate(U))
        if k % checkpoint_every == 0 or k == n_steps:
            direct = riccati_direct(tab.Phi, tab.Psi, theta)
            dev = float(np.max(np.abs(U - direct)))
            deviations.append((theta, dev))
            if dev > check_tol:
                raise HomotopyDiverged(
                    f"checkpoint at theta={theta:g}: deviation {dev:.3g} > {check_tol:g}"
                )
        records.append(RateRecord(theta, ups, margin(theta), "homotopy"))
    diag = {
        "checkpoint_deviation": deviations,
        "max_checkpoint_deviation": max(d for _, d in deviations),
        "hermitian_residual": herm_resid,
        "derivative": derivative,
        "step": h,
    }
    return RateProfile(records, diag)


def tail_bound(source, alpha: float, theta_grid: Sequence[float], grid: QuadratureGrid | None = None):
    """``min_theta (rate(theta) - alpha theta)`` over ``theta_grid``.

    Returns ``(bound, argmin_theta)``; the bound caps the asymptotic log-tail
    rate of the quadratic cost per unit time and site at level ``alpha``.
    """
    tab = _table(source, grid)
    best, arg = math.inf, math.nan
    for th in theta_grid:
        ups, _ = _rate_from_table(tab, float(th))
        val = ups - alpha * th
        if val < best:
            best, arg = val, float(th)
    return best, arg
