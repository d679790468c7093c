"""Finite-support block Toeplitz kernels on the integer lattice Z^nu.

A kernel ``f`` maps lattice offsets ``l`` to ``p x q`` blocks ``f_l`` and
generates the infinite block Toeplitz matrix ``(f_{j-k})``.  Products of
such matrices are convolutions of kernels, and the spatial Fourier
transform (SFT)

    F(sigma) = sum_l exp(-i l.sigma) f_l,      sigma in [-pi, pi)^nu,

turns them into pointwise matrix products.  With finite support every SFT
is a trigonometric polynomial and is evaluated exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "LatticeKernel",
    "Fragment",
    "block_kernel",
    "cube_fragment",
    "fragment_discrepancy",
    "inverse_sft",
    "kernel_adjoint",
    "kernel_multiply",
    "kernel_norm1",
    "restrict_to_fragment",
    "sft_eval",
    "torus_nodes",
    "wrap_torus",
]


def _as_offset(offset, nu: int | None = None) -> tuple[int, ...]:
    off = tuple(int(x) for x in np.atleast_1d(offset))
    if nu is not None and len(off) != nu:
        raise ValueError(f"offset {list(off)} does not have {nu} coordinates")
    return off


class LatticeKernel:
    """Immutable finite-support map ``Z^nu -> C^{p x q}``.

    Parameters
    ----------
    terms : mapping or iterable of (offset, block) pairs
        Offsets must be distinct integer tuples of length ``nu``.
    nu : int, optional
        Lattice dimension; inferred from the first offset when omitted.
    shape : (int, int), optional
        Block shape; required when ``terms`` is empty.
    """

    __slots__ = ("_nu", "_shape", "_terms")
    # keep ndarray @ kernel routed to __rmatmul__
    __array_ufunc__ = None

    def __init__(self, terms, nu: int | None = None, shape: tuple[int, int] | None = None):
        items = list(terms.items()) if isinstance(terms, Mapping) else list(terms)
        if nu is None:
            if not items:
                raise ValueError("nu is required for an empty kernel")
            nu = len(_as_offset(items[0][0]))
        if nu < 1:
            raise ValueError("lattice dimension must be >= 1")
        stored: dict[tuple[int, ...], np.ndarray] = {}
        for offset, block in items:
            off = _as_offset(offset, nu)
            if off in stored:
                raise ValueError(f"duplicate offset {list(off)}")
            blk = np.array(block)
            if blk.ndim == 0:
                blk = blk.reshape(1, 1)
            if blk.ndim != 2:
                raise ValueError(f"block at offset {list(off)} is not a matrix")
            if shape is None:
                shape = blk.shape
            elif blk.shape != tuple(shape):
                raise ValueError(
                    f"block at offset {list(off)} has shape {blk.shape}, expected {tuple(shape)}"
                )
            if not np.iscomplexobj(blk):
                blk = blk.astype(float)
            blk.setflags(write=False)
            stored[off] = blk
        if shape is None:
            raise ValueError("shape is required for an empty kernel")
        self._nu = int(nu)
        self._shape = (int(shape[0]), int(shape[1]))
        self._terms = dict(sorted(stored.items()))

    # -- constructors -------------------------------------------------------

    @classmethod
    def zeros(cls, nu: int, rows: int, cols: int) -> "LatticeKernel":
        return cls({}, nu=nu, shape=(rows, cols))

    @classmethod
    def constant(cls, block, nu: int) -> "LatticeKernel":
        """Kernel supported at the origin only (a block diagonal matrix)."""
        return cls({(0,) * nu: np.atleast_2d(block)}, nu=nu)

    @classmethod
    def identity(cls, nu: int, size: int) -> "LatticeKernel":
        return cls.constant(np.eye(size), nu)

    @classmethod
    def from_records(cls, records: Sequence[Mapping], nu: int, shape=None) -> "LatticeKernel":
        """Build from the literal format ``[{"offset": [...], "block": [[...]]}, ...]``."""
        terms = []
        for rec in records:
            terms.append((rec["offset"], np.asarray(rec["block"], dtype=float)))
        return cls(terms, nu=nu, shape=shape)

    def to_records(self) -> list[dict]:
        out = []
        for off, blk in self._terms.items():
            if np.iscomplexobj(blk):
                raise ValueError("kernel literals hold real blocks only")
            out.append({"offset": list(off), "block": blk.tolist()})
        return out

    # -- basic properties ---------------------------------------------------

    @property
    def nu(self) -> int:
        return self._nu

    @property
    def shape(self) -> tuple[int, int]:
        return self._shape

    @property
    def rows(self) -> int:
        return self._shape[0]

    @property
    def cols(self) -> int:
        return self._shape[1]

    @property
    def terms(self) -> dict[tuple[int, ...], np.ndarray]:
        return dict(self._terms)

    @property
    def support(self) -> list[tuple[int, ...]]:
        return list(self._terms)

    @property
    def is_real(self) -> bool:
        return all(not np.iscomplexobj(b) or not np.any(b.imag) for b in self._terms.values())

    def __len__(self) -> int:
        return len(self._terms)

    def __getitem__(self, offset) -> np.ndarray:
        off = _as_offset(offset, self._nu)
        blk = self._terms.get(off)
        if blk is None:
            return np.zeros(self._shape)
        return blk

    def __repr__(self) -> str:
        return f"LatticeKernel(nu={self._nu}, shape={self._shape}, support={self.support})"

    def offsets_array(self) -> np.ndarray:
        if not self._terms:
            return np.zeros((0, self._nu), dtype=int)
        return np.array(list(self._terms), dtype=int)

    def blocks_array(self) -> np.ndarray:
        if not self._terms:
            return np.zeros((0,) + self._shape)
        return np.stack(list(self._terms.values()))

    def allclose(self, other: "LatticeKernel", atol: float = 1e-12) -> bool:
        if self.nu != other.nu or self.shape != other.shape:
            return False
        for off in set(self._terms) | set(other._terms):
            if not np.allclose(self[off], other[off], rtol=0.0, atol=atol):
                return False
        return True

    def pruned(self, atol: float = 0.0) -> "LatticeKernel":
        """Drop blocks whose entries are all within ``atol`` of zero."""
        kept = {k: v for k, v in self._terms.items() if np.max(np.abs(v), initial=0.0) > atol}
        return LatticeKernel(kept, nu=self._nu, shape=self._shape)

    def radius(self) -> int:
        """Largest sup-norm of an offset in the support (0 for empty kernels)."""
        if not self._terms:
            return 0
        return int(np.max(np.abs(self.offsets_array())))

    def lipschitz_constant(self) -> float:
        """Bound on the sigma-derivative of the SFT: sum_l |l| ||f_l||."""
        return float(
            sum(np.linalg.norm(off) * np.linalg.norm(blk, 2) for off, blk in self._terms.items())
        )

    # -- algebra ------------------------------------------------------------

    def sft(self, sigma) -> np.ndarray:
        return sft_eval(self, sigma)

    def adjoint(self) -> "LatticeKernel":
        return kernel_adjoint(self)

    def norm1(self) -> float:
        return kernel_norm1(self)

    def restrict(self, fragment: "Fragment", cols: "Fragment | None" = None) -> np.ndarray:
        return restrict_to_fragment(self, fragment, cols)

    def _binary(self, other: "LatticeKernel", sign: float) -> "LatticeKernel":
        if not isinstance(other, LatticeKernel):
            return NotImplemented
        if other.nu != self.nu or other.shape != self.shape:
            raise ValueError(f"cannot add kernels {self!r} and {other!r}")
        acc = {k: np.array(v) for k, v in self._terms.items()}
        for k, v in other._terms.items():
            acc[k] = acc[k] + sign * v if k in acc else sign * v
        return LatticeKernel(acc, nu=self.nu, shape=self.shape)

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __neg__(self):
        return LatticeKernel({k: -v for k, v in self._terms.items()}, nu=self.nu, shape=self.shape)

    def __mul__(self, scalar):
        if isinstance(scalar, LatticeKernel) or np.ndim(scalar) != 0:
            return NotImplemented
        return LatticeKernel(
            {k: scalar * v for k, v in self._terms.items()}, nu=self.nu, shape=self.shape
        )

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, LatticeKernel):
            return kernel_multiply(self, other)
        other = np.asarray(other)
        if other.ndim != 2:
            return NotImplemented
        return kernel_multiply(self, LatticeKernel.constant(other, self.nu))

    def __rmatmul__(self, other):
        other = np.asarray(other)
        if other.ndim != 2:
            return NotImplemented
        return kernel_multiply(LatticeKernel.constant(other, self.nu), self)


def wrap_torus(sigma) -> np.ndarray:
    """Map torus coordinates into [-pi, pi)."""
    sigma = np.asarray(sigma, dtype=float)
    return (sigma + np.pi) % (2 * np.pi) - np.pi


def sft_eval(kernel: LatticeKernel, sigma) -> np.ndarray:
    """Spatial Fourier transform of ``kernel`` at one or many torus points.

    ``sigma`` of shape ``(nu,)`` gives a ``(p, q)`` matrix; shape ``(N, nu)``
    gives a stack ``(N, p, q)``.
    """
    sig = np.asarray(sigma, dtype=float)
    single = sig.ndim == 1
    sig = np.atleast_2d(sig)
    if sig.ndim != 2 or sig.shape[1] != kernel.nu:
        raise ValueError(
            f"sigma has {sig.shape[-1]} coordinates but the kernel lives on Z^{kernel.nu}"
        )
    if len(kernel) == 0:
        out = np.zeros((sig.shape[0],) + kernel.shape, dtype=complex)
    else:
        phases = np.exp(-1j * (sig @ kernel.offsets_array().T))
        out = np.einsum("nk,kpq->npq", phases, kernel.blocks_array())
    return out[0] if single else out


def kernel_multiply(f: LatticeKernel, g: LatticeKernel) -> LatticeKernel:
    """Kernel of the block Toeplitz product: h_j = sum_k f_{j-k} g_k."""
    if f.nu != g.nu:
        raise ValueError(f"lattice dimensions differ: {f.nu} vs {g.nu}")
    if f.cols != g.rows:
        raise ValueError(f"inner block dimensions differ: {f.shape} @ {g.shape}")
    acc: dict[tuple[int, ...], np.ndarray] = {}
    for a, fa in f.terms.items():
        for b, gb in g.terms.items():
            off = tuple(x + y for x, y in zip(a, b))
            prod = fa @ gb
            if off in acc:
                acc[off] = acc[off] + prod
            else:
                acc[off] = prod
    acc = {k: v for k, v in acc.items() if np.any(v != 0)}
    return LatticeKernel(acc, nu=f.nu, shape=(f.rows, g.cols))


def kernel_adjoint(f: LatticeKernel) -> LatticeKernel:
    """Kernel of the conjugate transpose matrix: blocks f_{-l}^* at offset l."""
    terms = {tuple(-x for x in off): blk.conj().T for off, blk in f.terms.items()}
    return LatticeKernel(terms, nu=f.nu, shape=(f.cols, f.rows))


def kernel_norm1(f: LatticeKernel) -> float:
    """Sum over the support of the largest singular value of each block."""
    return float(sum(np.linalg.norm(blk, 2) for blk in f.terms.values()))


def block_kernel(rows: Sequence[Sequence[LatticeKernel | None]]) -> LatticeKernel:
    """Assemble a kernel from a 2-D grid of kernels; ``None`` entries are zero.

    Each block row must contain at least one kernel (to fix its height) and
    likewise each block column.
    """
    nrow, ncol = len(rows), len(rows[0])
    heights = [None] * nrow
    widths = [None] * ncol
    nu = None
    for i, row in enumerate(rows):
        if len(row) != ncol:
            raise ValueError("ragged block layout")
        for j, k in enumerate(row):
            if k is None:
                continue
            nu = k.nu if nu is None else nu
            if k.nu != nu:
                raise ValueError("kernels live on different lattices")
            if heights[i] not in (None, k.rows) or widths[j] not in (None, k.cols):
                raise ValueError("inconsistent block sizes")
            heights[i], widths[j] = k.rows, k.cols
    if nu is None or None in heights or None in widths:
        raise ValueError("every block row and column needs one explicit kernel")
    r0 = np.concatenate([[0], np.cumsum(heights)])
    c0 = np.concatenate([[0], np.cumsum(widths)])
    support = sorted({off for row in rows for k in row if k is not None for off in k.support})
    terms = {}
    for off in support:
        dtype = complex if any(
            np.iscomplexobj(k[off]) for row in rows for k in row if k is not None
        ) else float
        blk = np.zeros((r0[-1], c0[-1]), dtype=dtype)
        for i, row in enumerate(rows):
            for j, k in enumerate(row):
                if k is not None:
                    blk[r0[i]:r0[i + 1], c0[j]:c0[j + 1]] = k[off]
        terms[off] = blk
    return LatticeKernel(terms, nu=nu, shape=(int(r0[-1]), int(c0[-1])))


@dataclass(frozen=True)
class Fragment:
    """Finite set of lattice sites in lexicographic order."""

    nu: int
    sites: tuple[tuple[int, ...], ...]
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.sites) == 0:
            raise ValueError("a fragment needs at least one site")
        if any(len(s) != self.nu for s in self.sites):
            raise ValueError(f"all sites must have {self.nu} coordinates")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("fragment sites must be distinct")
        if list(self.sites) != sorted(self.sites):
            raise ValueError("fragment sites must be in lexicographic order")
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.sites)})

    @classmethod
    def from_sites(cls, sites: Iterable, nu: int | None = None) -> "Fragment":
        raw = [_as_offset(s) for s in sites]
        if not raw:
            raise ValueError("a fragment needs at least one site")
        tup = sorted(set(raw))
        if len(tup) != len(raw):
            raise ValueError("fragment sites must be distinct")
        return cls(nu if nu is not None else len(tup[0]), tuple(tup))

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, site) -> bool:
        return _as_offset(site) in self.index

    def as_array(self) -> np.ndarray:
        return np.array(self.sites, dtype=int)

    def differences(self) -> list[tuple[int, ...]]:
        """Sorted set G - G of offsets between sites."""
        arr = self.as_array()
        diff = (arr[:, None, :] - arr[None, :, :]).reshape(-1, self.nu)
        return sorted({tuple(int(x) for x in d) for d in diff})


def cube_fragment(nu: int, L: int) -> Fragment:
    """The cube {0, ..., L-1}^nu."""
    if L < 1:
        raise ValueError("cube side must be >= 1")
    return Fragment(nu, tuple(itertools.product(range(L), repeat=nu)))


def fragment_discrepancy(G: Fragment, ell) -> float:
    """Relative discrepancy #(G minus (G + ell)) / #G between G and a translate."""
    ell = _as_offset(ell, G.nu)
    shifted = {tuple(a + b for a, b in zip(s, ell)) for s in G.sites}
    return sum(1 for s in G.sites if s not in shifted) / len(G)


def restrict_to_fragment(
    f: LatticeKernel, G: Fragment, cols: Fragment | None = None
) -> np.ndarray:
    """Dense restriction ``(f_{G[a] - H[b]})_{a, b}`` with ``H = cols or G``."""
    H = G if cols is None else cols
    if G.nu != f.nu or H.nu != f.nu:
        raise ValueError("fragment and kernel live on different lattices")
    p, q = f.shape
    dtype = complex if not f.is_real else float
    out = np.zeros((p * len(G), q * len(H)), dtype=dtype)
    terms = f.terms
    for a, ja in enumerate(G.sites):
        for b, kb in enumerate(H.sites):
            blk = terms.get(tuple(x - y for x, y in zip(ja, kb)))
            if blk is not None:
                out[a * p:(a + 1) * p, b * q:(b + 1) * q] = blk.real if dtype is float else blk
    return out


def torus_nodes(nu: int, n: int) -> np.ndarray:
    """Uniform tensor grid ``-pi + 2 pi k / n`` on the torus, shape ``(n**nu, nu)``."""
    if n < 1:
        raise ValueError("grid size must be >= 1")
    axis = -np.pi + 2 * np.pi * np.arange(n) / n
    mesh = np.meshgrid(*([axis] * nu), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def inverse_sft(values: np.ndarray, nodes: np.ndarray, offsets) -> np.ndarray:
    """Trapezoid inverse SFT ``(2 pi)^-nu int exp(i l.sigma) F(sigma) d sigma``.

    ``values`` has shape ``(N, ...)`` on the uniform grid ``nodes``; returns a
    stack with one entry per offset.
    """
    offs = np.atleast_2d(np.asarray(offsets, dtype=float))
    phases = np.exp(1j * (offs @ np.asarray(nodes).T)) / len(nodes)
    return np.tensordot(phases, values, axes=(1, 0))
