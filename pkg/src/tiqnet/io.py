"""Reading and writing network description files.

A network file is a JSON document

.. code-block:: json

    {"version": 1, "nu": 1, "n": 2, "m": 2, "r": 2,
     "theta": [[0, 0.5], [-0.5, 0]],
     "R": [], "M": [{"offset": [0], "block": [[1, 0], [0, 1]]}],
     "D": [{"offset": [0], "block": [[1, 0], [0, 1]]}],
     "S": [{"offset": [0], "block": [[1, 0], [0, 1]]}]}

Kernels are lists of ``{offset, block}`` records.  ``S`` (the weighting
kernel) is optional.  An empty kernel list is allowed; its block shape then
follows from the declared dimensions.
"""

from __future__ import annotations

import json
import os
from typing import Any

import numpy as np

from .errors import InvariantViolation, ParseError
from .kernels import Fragment, LatticeKernel, cube_fragment
from .network import NetworkSpec

__all__ = [
    "FORMAT_VERSION",
    "dump_network",
    "load_network",
    "network_from_dict",
    "network_to_dict",
    "parse_fragment",
    "parse_network_file",
]

FORMAT_VERSION = 1


def _need(doc: dict, key: str):
    if key not in doc:
        raise ParseError(f"missing field '{key}'")
    return doc[key]


def _int_field(doc: dict, key: str) -> int:
    val = _need(doc, key)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ParseError(f"field '{key}' must be an integer, got {val!r}")
    return val


def _matrix(value, name: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field '{name}' is not a numeric matrix") from exc
    if arr.ndim != 2:
        raise ParseError(f"field '{name}' must be a 2-D matrix")
    return arr


def _kernel(value, name: str, nu: int, shape: tuple[int, int]) -> LatticeKernel:
    if not isinstance(value, list):
        raise ParseError(f"kernel '{name}' must be a list of records")
    terms = []
    for k, rec in enumerate(value):
        if not isinstance(rec, dict) or "offset" not in rec or "block" not in rec:
            raise ParseError(f"kernel '{name}' record {k} needs 'offset' and 'block'")
        off = rec["offset"]
        if not isinstance(off, list) or len(off) != nu or not all(
            isinstance(x, int) and not isinstance(x, bool) for x in off
        ):
            raise ParseError(f"kernel '{name}' record {k}: offset must be {nu} integers")
        blk = _matrix(rec["block"], f"{name}[{k}].block")
        if blk.shape != shape:
            raise InvariantViolation(
                f"kernel '{name}' at offset {off}: block is {blk.shape[0]}x{blk.shape[1]}, "
                f"expected {shape[0]}x{shape[1]}"
            )
        terms.append((tuple(off), blk))
    offsets = [t[0] for t in terms]
    if len(set(offsets)) != len(offsets):
        raise ParseError(f"kernel '{name}' repeats an offset")
    return LatticeKernel(terms, nu=nu, shape=shape)


def network_from_dict(doc: dict[str, Any]) -> tuple[NetworkSpec, LatticeKernel | None]:
    """Build ``(spec, S)`` from a decoded network document.

    Raises
    ------
    ParseError
        Malformed or missing fields, or an unsupported version.
    InvariantViolation
        Well-formed data that breaks a structural invariant.
    """
    if not isinstance(doc, dict):
        raise ParseError("network document must be a JSON object")
    version = _need(doc, "version")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported version {version!r}; expected {FORMAT_VERSION}")
    nu = _int_field(doc, "nu")
    if nu < 1:
        raise ParseError("nu must be a positive integer")
    n, m, r = (_int_field(doc, k) for k in ("n", "m", "r"))
    for name, val in (("n", n), ("m", m), ("r", r)):
        if val < 1:
            raise InvariantViolation(f"{name} must be positive")
        if val % 2:
            raise InvariantViolation(f"{name} must be even")
    if r > m:
        raise InvariantViolation("r must not exceed m")
    theta = _matrix(_need(doc, "theta"), "theta")
    if theta.shape != (n, n):
        raise InvariantViolation(f"theta must be {n}x{n}")
    R = _kernel(_need(doc, "R"), "R", nu, (n, n))
    M = _kernel(_need(doc, "M"), "M", nu, (m, n))
    D = _kernel(_need(doc, "D"), "D", nu, (r, m))
    spec = NetworkSpec(theta, R, M, D)
    S = None
    if doc.get("S") is not None:
        raw = doc["S"]
        if not isinstance(raw, list) or not raw:
            raise ParseError("kernel 'S' must be a non-empty list of records")
        first = raw[0].get("block") if isinstance(raw[0], dict) else None
        q = _matrix(first, "S[0].block").shape[0] if first is not None else 0
        S = _kernel(raw, "S", nu, (q, n))
    return spec, S


def network_to_dict(spec: NetworkSpec, S: LatticeKernel | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "version": FORMAT_VERSION,
        "nu": spec.nu,
        "n": spec.n,
        "m": spec.m,
        "r": spec.r,
        "theta": spec.theta.tolist(),
        "R": spec.R.to_records(),
        "M": spec.M.to_records(),
        "D": spec.D.to_records(),
    }
    if S is not None:
        doc["S"] = S.to_records()
    return doc


def parse_network_file(path) -> tuple[NetworkSpec, LatticeKernel | None]:
    """Read a network file; returns the spec and the optional weighting kernel."""
    if not os.path.exists(path):
        raise ParseError(f"no such file: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return network_from_dict(doc)


load_network = parse_network_file


def dump_network(path, spec: NetworkSpec, S: LatticeKernel | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(spec, S), fh, indent=1)
        fh.write("\n")


def parse_fragment(text: str, nu: int) -> Fragment:
    """Fragment from ``cube:L`` or an explicit JSON site list such as ``[[0],[1]]``."""
    text = text.strip()
    if text.startswith("cube:"):
        try:
            L = int(text[5:])
        except ValueError as exc:
            raise ParseError(f"bad cube size in {text!r}") from exc
        if L < 1:
            raise ParseError("cube side must be >= 1")
        return cube_fragment(nu, L)
    try:
        sites = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"fragment must be 'cube:L' or a JSON site list, got {text!r}") from exc
    if not isinstance(sites, list) or not sites:
        raise ParseError("fragment site list must be a non-empty list")
    sites = [[s] if isinstance(s, int) else s for s in sites]
    if any(not isinstance(s, list) or len(s) != nu for s in sites):
        raise ParseError(f"each fragment site needs {nu} integer coordinates")
    try:
        return Fragment.from_sites(sites, nu=nu)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
