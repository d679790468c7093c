"""Reference networks with known closed-form behaviour.

``benchmark``
    One-dimensional, decoupled sites, ``A = -I``, ``B = J``: the transfer
    function is ``(s - 1)/(s + 1) I``, the weighted output has
    ``Phi = I/(1 + lambda^2)`` and ``Psi = J/(1 + lambda^2)``, and the QEF rate
    is exactly ``theta / 2`` for every ``theta``.
``coupled_chain``
    Benchmark plus nearest-neighbour energy coupling ``R_{+-1} = eps I``.
``classical_only``
    Benchmark observed through one quadrature, so ``Psi = 0`` and the rate
    reduces to its classical form with bound ``theta* = 1``.
``skewed``
    A chain with an on-site energy term and a non-uniform weighting.  Its
    ``Phi`` and ``Psi`` are not aligned, the admissibility bound is finite and
    nothing about it is degenerate, which makes it a useful stress case.
"""

from __future__ import annotations

import numpy as np

from .kernels import LatticeKernel
from .network import NetworkSpec, ccr_symplectic
from .spectra import WeightedNetwork

__all__ = ["benchmark", "classical_only", "coupled_chain", "skewed", "with_weighting"]


def _base(R: LatticeKernel | None = None) -> NetworkSpec:
    J = ccr_symplectic(2)
    I2 = np.eye(2)
    R = R if R is not None else LatticeKernel.zeros(1, 2, 2)
    return NetworkSpec(0.5 * J, R, LatticeKernel.constant(I2, 1), LatticeKernel.constant(I2, 1))


def with_weighting(spec: NetworkSpec, S) -> WeightedNetwork:
    S = S if isinstance(S, LatticeKernel) else LatticeKernel.constant(np.atleast_2d(S), spec.nu)
    return WeightedNetwork(spec, S)


def benchmark() -> WeightedNetwork:
    return with_weighting(_base(), np.eye(2))


def coupled_chain(eps: float = 0.1) -> WeightedNetwork:
    R = LatticeKernel({(1,): eps * np.eye(2), (-1,): eps * np.eye(2)})
    return with_weighting(_base(R), np.eye(2))


def classical_only() -> WeightedNetwork:
    return with_weighting(_base(), np.array([[1.0, 0.0]]))


def skewed() -> WeightedNetwork:
    R = LatticeKernel({
        (0,): np.array([[0.3, 0.1], [0.1, -0.2]]),
        (1,): 0.1 * np.eye(2),
        (-1,): 0.1 * np.eye(2),
    })
    return with_weighting(_base(R), np.diag([1.0, 0.5]))
