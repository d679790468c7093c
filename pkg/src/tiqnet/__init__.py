"""Numerics for translation invariant networks of linear quantum stochastic systems.

The package assembles a lattice network from its energy and coupling
kernels, checks physical realizability and stability, computes invariant
covariances and quantum spectral densities, and evaluates the growth rate of
the quadratic-exponential functional per unit time and lattice site.

Submodules
----------
kernels
    Block Toeplitz kernels on the integer lattice and their Fourier symbols.
network
    Network description, coefficient assembly, validation, covariances.
spectra
    Weighted output process: transfer function and spectral densities.
qef
    Growth rates, admissibility, Riccati continuation, expansions.
oracle
    Finite-horizon, finite-fragment reference computations.
io, cli
    Network files and the ``tiqnet`` command.
"""

from .errors import (
    HomotopyDiverged,
    InvariantViolation,
    NotAdmissible,
    NotAdmissibleFinite,
    NotHermitian,
    NotHurwitz,
    ParseError,
    SampleTooCloseToSpectrum,
    SingularResolvent,
    TiqnetError,
)
from .kernels import Fragment, LatticeKernel, cube_fragment, fragment_discrepancy, sft_eval
from .network import (
    DynamicsKernels,
    NetworkSpec,
    assemble_dynamics,
    ccr_symplectic,
    compose_series,
    invariant_covariance_kernel,
    invariant_covariance_sft,
    pr_residuals,
    stability_margin,
)
from .spectra import WeightedNetwork, fragment_spectral_density, quantum_spectral_density, st_transfer
from .qef import (
    QuadratureGrid,
    RateProfile,
    RateRecord,
    admissibility_margin,
    classical_rate,
    homotopy_rate,
    max_admissible_theta,
    mean_square_rate,
    qef_rate,
    small_theta_expansion,
    tail_bound,
    temporal_rate_fragment,
)
from .oracle import discretize_operators, log_qef_finite
from .io import parse_network_file

__all__ = [
    "DynamicsKernels",
    "Fragment",
    "HomotopyDiverged",
    "InvariantViolation",
    "LatticeKernel",
    "NetworkSpec",
    "NotAdmissible",
    "NotAdmissibleFinite",
    "NotHermitian",
    "NotHurwitz",
    "ParseError",
    "QuadratureGrid",
    "RateProfile",
    "RateRecord",
    "SampleTooCloseToSpectrum",
    "SingularResolvent",
    "TiqnetError",
    "WeightedNetwork",
    "admissibility_margin",
    "assemble_dynamics",
    "ccr_symplectic",
    "classical_rate",
    "compose_series",
    "cube_fragment",
    "discretize_operators",
    "fragment_discrepancy",
    "fragment_spectral_density",
    "homotopy_rate",
    "invariant_covariance_kernel",
    "invariant_covariance_sft",
    "log_qef_finite",
    "max_admissible_theta",
    "mean_square_rate",
    "parse_network_file",
    "pr_residuals",
    "qef_rate",
    "quantum_spectral_density",
    "sft_eval",
    "small_theta_expansion",
    "st_transfer",
    "stability_margin",
    "tail_bound",
    "temporal_rate_fragment",
]
