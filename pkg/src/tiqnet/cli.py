"""Command-line front end.

Every subcommand reads one network file (see :mod:`tiqnet.io`), writes its
table as CSV (header row, 17 significant digits) to ``--output`` or stdout,
and writes a JSON summary next to it (``<output>.json``, or the path given by
``--summary``) that records the grids, tolerances and library versions used.

Exit codes: 0 success, 2 risk-sensitivity not admissible, 3 validation
failure (malformed file, broken invariant, unstable network or failed
checks), 1 any other library error.  Errors are reported as a JSON object on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import network as _network
from . import oracle as _oracle
from . import qef as _qef
from .errors import InvariantViolation, NotAdmissible, NotHurwitz, ParseError, TiqnetError
from .io import dump_network, parse_fragment, parse_network_file
from .kernels import LatticeKernel, cube_fragment, torus_nodes
from .spectra import WeightedNetwork, spectral_density_arrays

__all__ = ["RunConfig", "build_parser", "main", "run"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_ADMISSIBLE = 2
EXIT_VALIDATION = 3

VALIDATE_TOL = {"pr1": 1e-10, "pr2": 1e-10, "pr3": 1e-10, "jj": 1e-8}


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # pragma: no cover - only without an installed dist
        return "unknown"


@dataclass
class RunConfig:
    """Everything a subcommand needs; also the reproducibility header."""

    command: str
    inputs: list[str]
    n_sigma: int = 64
    n_lambda: int = 257
    thetas: list[float] = field(default_factory=list)
    fragment: str | None = None
    output: str | None = None
    summary: str | None = None
    options: dict = field(default_factory=dict)
    tolerances: dict = field(
        default_factory=lambda: {
            "admissibility": _qef.ADMISSIBILITY_TOL,
            "sentinel_theta": _qef.THETA_SENTINEL,
            "sentinel_margin": _qef.SENTINEL_MARGIN_TOL,
            "hurwitz": _network.HURWITZ_TOL,
            "validate": dict(VALIDATE_TOL),
        }
    )

    def __post_init__(self):
        if self.n_sigma < 1 or self.n_lambda < 1:
            raise ValueError("grid sizes must be positive")
        for th in self.thetas:
            if not math.isfinite(th) or th < 0:
                raise ValueError(f"theta values must be finite and >= 0, got {th}")


# -- output helpers ------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _csv_text(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _header(cfg: RunConfig, extra: dict | None = None) -> dict:
    head = {
        "tool": "tiqnet",
        "version": _version(),
        "numpy": np.__version__,
        "scipy": __import__("scipy").__version__,
        "config": asdict(cfg),
    }
    if extra:
        head.update(extra)
    return head


def _emit(cfg: RunConfig, columns, rows, summary: dict) -> None:
    text = _csv_text(columns, rows)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    target = cfg.summary or (cfg.output + ".json" if cfg.output else None)
    if target:
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(summary), fh, indent=1, sort_keys=True)
            fh.write("\n")


def _emit_json(cfg: RunConfig, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), indent=1, sort_keys=True) + "\n"
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- shared plumbing -------------------------------------------------------------

def _load(cfg: RunConfig, k: int = 0):
    spec, S = parse_network_file(cfg.inputs[k])
    note = "from file"
    if S is None:
        S = LatticeKernel.identity(spec.nu, spec.n)
        note = "identity (file has no S)"
    return spec, WeightedNetwork(spec, S), note


def _grid(cfg: RunConfig, nu: int) -> _qef.QuadratureGrid:
    return _qef.QuadratureGrid(
        nu,
        cfg.n_sigma,
        cfg.n_lambda,
        cfg.options.get("lambda_scale", 1.0),
        cfg.options.get("allow_large_nu", False),
    )


# -- subcommands -----------------------------------------------------------------

def _cmd_validate(cfg: RunConfig) -> int:
    spec, S = parse_network_file(cfg.inputs[0])
    report = _network.validation_report(spec, n_sigma=cfg.options.get("validate_nsigma", 33))
    checks = {k: report[k] <= tol for k, tol in VALIDATE_TOL.items()}
    checks["stable"] = report["stability_margin"] > 0
    ok = all(checks.values())
    payload = _header(cfg, {"report": report, "checks": checks, "passed": ok})
    payload["network"] = {"nu": spec.nu, "n": spec.n, "m": spec.m, "r": spec.r,
                          "q": None if S is None else S.rows}
    _emit_json(cfg, payload)
    return EXIT_OK if ok else EXIT_VALIDATION


def _cmd_spectra(cfg: RunConfig) -> int:
    spec, wnet, note = _load(cfg)
    lam = cfg.options["lambdas"]
    nodes = torus_nodes(spec.nu, cfg.n_sigma)
    Phi, Psi = spectral_density_arrays(wnet, nodes, lam)
    q = wnet.q
    cols = [f"sigma{k}" for k in range(spec.nu)] + ["lambda"]
    ent = [(i, j) for i in range(q) for j in range(q)]
    for name in ("Phi", "Psi"):
        for i, j in ent:
            cols += [f"re_{name}_{i}{j}", f"im_{name}_{i}{j}"]
    rows = []
    for a, sig in enumerate(nodes):
        for b, lv in enumerate(lam):
            row = {f"sigma{k}": sig[k] for k in range(spec.nu)}
            row["lambda"] = lv
            for name, arr in (("Phi", Phi), ("Psi", Psi)):
                for i, j in ent:
                    row[f"re_{name}_{i}{j}"] = arr[a, b, i, j].real
                    row[f"im_{name}_{i}{j}"] = arr[a, b, i, j].imag
            rows.append(row)
    _emit(cfg, cols, rows, _header(cfg, {"S": note, "rows": len(rows)}))
    return EXIT_OK


def _cmd_rate(cfg: RunConfig) -> int:
    spec, wnet, note = _load(cfg)
    grid = _grid(cfg, spec.nu)
    prof = _qef.qef_rate(wnet, list(cfg.thetas), grid)
    rows = [{"theta": r.theta, "upsilon": r.upsilon, "margin": r.margin, "err_est": r.err_est}
            for r in prof]
    _emit(cfg, ["theta", "upsilon", "margin", "err_est"], rows,
          _header(cfg, {"S": note, "grid": grid.describe(), "results": rows}))
    return EXIT_OK


def _cmd_classical(cfg: RunConfig) -> int:
    spec, wnet, note = _load(cfg)
    grid = _grid(cfg, spec.nu)
    tab = _qef.SpectralTable.from_network(wnet, grid)
    rows = [{"theta": th, "upsilon_classical": _qef.classical_rate(tab, th)} for th in cfg.thetas]
    _emit(cfg, ["theta", "upsilon_classical"], rows,
          _header(cfg, {"S": note, "grid": grid.describe(), "results": rows}))
    return EXIT_OK


def _cmd_expansion(cfg: RunConfig) -> int:
    spec, wnet, note = _load(cfg)
    grid = _grid(cfg, spec.nu)
    tab = _qef.SpectralTable.from_network(wnet, grid)
    rows = [{"theta": th,
             "expansion": _qef.small_theta_expansion(tab, th),
             "upsilon_classical": _qef.classical_rate(tab, th)} for th in cfg.thetas]
    _emit(cfg, ["theta", "expansion", "upsilon_classical"], rows,
          _header(cfg, {"S": note, "grid": grid.describe(), "results": rows}))
    return EXIT_OK


def _cmd_homotopy(cfg: RunConfig) -> int:
    spec, wnet, note = _load(cfg)
    grid = _grid(cfg, spec.nu)
    prof = _qef.homotopy_rate(wnet, cfg.options["theta_max"], cfg.options["steps"], grid)
    deriv = prof.diagnostics["derivative"]
    rows = [{"theta": r.theta, "upsilon": r.upsilon, "derivative": d, "margin": r.margin}
            for r, d in zip(prof, deriv)]
    diag = {k: v for k, v in prof.diagnostics.items() if k != "derivative"}
    _emit(cfg, ["theta", "upsilon", "derivative", "margin"], rows,
          _header(cfg, {"S": note, "grid": grid.describe(), "diagnostics": diag}))
    return EXIT_OK


def _cmd_tailbound(cfg: RunConfig) -> int:
    spec, wnet, note = _load(cfg)
    grid = _grid(cfg, spec.nu)
    tab = _qef.SpectralTable.from_network(wnet, grid)
    rows = []
    for alpha in cfg.options["alphas"]:
        bound, arg = _qef.tail_bound(tab, alpha, cfg.thetas)
        rows.append({"alpha": alpha, "bound": bound, "theta_argmin": arg})
    _emit(cfg, ["alpha", "bound", "theta_argmin"], rows,
          _header(cfg, {"S": note, "grid": grid.describe(), "results": rows}))
    return EXIT_OK


def _cmd_oracle(cfg: RunConfig) -> int:
    spec, wnet, note = _load(cfg)
    G = parse_fragment(cfg.fragment or "cube:1", spec.nu)
    horizons = cfg.options["horizons"]
    nts = cfg.options.get("nts") or [max(8, int(round(20 * T))) for T in horizons]
    if len(nts) == 1 and len(horizons) > 1:
        nts = nts * len(horizons)
    if len(nts) != len(horizons):
        raise ValueError("--nt needs one value or one per horizon")
    grid = _grid(cfg, spec.nu)
    rows = []
    for theta in cfg.thetas:
        target = 0.0
        if theta:
            target, _ = _qef.temporal_rate_fragment(wnet, G, theta, grid)
        for T, Nt in zip(horizons, nts):
            ops = _oracle.discretize_operators(wnet, G, T, Nt, cfg.n_sigma)
            lnxi = _oracle.log_qef_finite(ops, theta)
            _, min_eig = _oracle.check_no_zero_eigs(ops)
            rows.append({"theta": theta, "T": T, "Nt": Nt, "log_xi": lnxi, "rate": lnxi / T,
                         "target": target, "error": abs(lnxi / T - target),
                         "min_abs_eig_L": min_eig})
    cols = ["theta", "T", "Nt", "log_xi", "rate", "target", "error", "min_abs_eig_L"]
    _emit(cfg, cols, rows, _header(cfg, {"S": note, "fragment_sites": [list(s) for s in G.sites],
                                         "grid": grid.describe()}))
    return EXIT_OK


def _load_kernel_list(path: str) -> list[LatticeKernel]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(doc, dict) or "nu" not in doc or "kernels" not in doc:
        raise ParseError("kernel file needs fields 'nu' and 'kernels'")
    return [LatticeKernel.from_records(recs, nu=doc["nu"]) for recs in doc["kernels"]]


def _cmd_avgcheck(cfg: RunConfig) -> int:
    kind = cfg.options["kind"]
    if kind == "toeplitz":
        kernels = _load_kernel_list(cfg.inputs[0])
        rows = _oracle.toeplitz_average_check(kernels, cfg.options["sides"])
        _emit(cfg, ["L", "lhs", "rhs", "error"], rows, _header(cfg))
        return EXIT_OK
    spec, wnet, note = _load(cfg)
    G = parse_fragment(cfg.fragment or "cube:1", spec.nu)
    rows = _oracle.operator_average_check(
        wnet, G, cfg.options["horizons"], cfg.options["degree"],
        cfg.options.get("nt_per_T", 20), cfg.n_sigma, _grid(cfg, spec.nu),
    )
    _emit(cfg, ["T", "Nt", "lhs", "rhs", "error", "rel_error"], rows, _header(cfg, {"S": note}))
    return EXIT_OK


def _cmd_compose(cfg: RunConfig) -> int:
    s1, _ = parse_network_file(cfg.inputs[0])
    s2, _ = parse_network_file(cfg.inputs[1])
    comp = _network.compose_series(s1, s2)
    nodes = torus_nodes(comp.dynamics.nu, 33)
    res = _network.pr_residuals(comp.dynamics, comp.theta, nodes)
    spec = comp.as_spec()
    rebuilt = _network.assemble_dynamics(spec)
    mismatch = max(
        float(np.max(np.abs(getattr(rebuilt, k).sft(nodes) - getattr(comp.dynamics, k).sft(nodes))))
        for k in ("A", "B", "C", "D")
    )
    payload = _header(cfg, {"pr1": res.pr1, "pr2": res.pr2, "pr3": res.pr3,
                            "assembly_mismatch": mismatch,
                            "network": {"nu": spec.nu, "n": spec.n, "m": spec.m, "r": spec.r}})
    if cfg.output:
        dump_network(cfg.output, spec)
        with open(cfg.summary or cfg.output + ".summary.json", "w", encoding="utf-8") as fh:
            json.dump(_jsonable(payload), fh, indent=1, sort_keys=True)
            fh.write("\n")
    else:
        from .io import network_to_dict

        payload["composite"] = network_to_dict(spec)
        _emit_json(RunConfig(cfg.command, cfg.inputs), payload)
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "spectra": _cmd_spectra,
    "rate": _cmd_rate,
    "classical": _cmd_classical,
    "expansion": _cmd_expansion,
    "homotopy": _cmd_homotopy,
    "tailbound": _cmd_tailbound,
    "oracle": _cmd_oracle,
    "avgcheck": _cmd_avgcheck,
    "compose": _cmd_compose,
}


# -- argument parsing ------------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tiqnet", description="Translation invariant quantum network analysis")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grids=True):
        sp.add_argument("-o", "--output", help="output file (default: stdout)")
        sp.add_argument("--summary", help="JSON summary path (default: <output>.json)")
        if grids:
            sp.add_argument("--nsigma", type=int, default=64, help="torus nodes per axis")
            sp.add_argument("--nlambda", type=int, default=257, help="frequency nodes")
            sp.add_argument("--lambda-scale", type=float, default=1.0)
            sp.add_argument("--allow-large-nu", action="store_true")

    sp = sub.add_parser("validate", help="PR, (J,J)-unitarity and stability report")
    sp.add_argument("network")
    sp.add_argument("--nsigma", type=int, default=33)
    common(sp, grids=False)

    sp = sub.add_parser("spectra", help="dump Phi and Psi on a grid")
    sp.add_argument("network")
    sp.add_argument("--nsigma", type=int, default=8)
    sp.add_argument("--lambdas", type=_floats, default=[-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0])
    common(sp, grids=False)

    for name, helptext in (("rate", "QEF growth rate by quadrature"),
                           ("classical", "rate with the commutator spectrum dropped"),
                           ("expansion", "small-theta expansion of the rate")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("network")
        sp.add_argument("--theta", type=_floats, required=True)
        common(sp)

    sp = sub.add_parser("homotopy", help="rate profile by Riccati continuation")
    sp.add_argument("network")
    sp.add_argument("--theta-max", type=float, required=True)
    sp.add_argument("--steps", type=int, default=200)
    common(sp)

    sp = sub.add_parser("tailbound", help="min over theta of rate - alpha theta")
    sp.add_argument("network")
    sp.add_argument("--alpha", type=_floats, required=True)
    sp.add_argument("--theta", type=_floats, required=True)
    common(sp)

    sp = sub.add_parser("oracle", help="finite-horizon QEF of a fragment")
    sp.add_argument("network")
    sp.add_argument("--fragment", default="cube:1")
    sp.add_argument("--horizon", type=_floats, required=True)
    sp.add_argument("--nt", type=_ints, default=None)
    sp.add_argument("--theta", type=_floats, required=True)
    common(sp)

    sp = sub.add_parser("avgcheck", help="trace averaging checks")
    sp.add_argument("kind", choices=["toeplitz", "operator"])
    sp.add_argument("input", help="kernel list file (toeplitz) or network file (operator)")
    sp.add_argument("--L", type=_ints, default=[8, 16, 32], help="cube sides (toeplitz)")
    sp.add_argument("--fragment", default="cube:1")
    sp.add_argument("--horizon", type=_floats, default=[10.0, 25.0, 50.0])
    sp.add_argument("--degree", type=int, default=2)
    sp.add_argument("--nt-per-T", type=float, default=20.0)
    common(sp)

    sp = sub.add_parser("compose", help="series connection of two networks")
    sp.add_argument("upstream")
    sp.add_argument("downstream")
    common(sp, grids=False)
    return p


def _config_from_args(ns: argparse.Namespace) -> RunConfig:
    cmd = ns.command
    opts: dict = {}
    inputs = {"compose": [getattr(ns, "upstream", None), getattr(ns, "downstream", None)],
              "avgcheck": [getattr(ns, "input", None)]}.get(cmd, [getattr(ns, "network", None)])
    if hasattr(ns, "lambda_scale"):
        opts["lambda_scale"] = ns.lambda_scale
        opts["allow_large_nu"] = ns.allow_large_nu
    thetas = list(getattr(ns, "theta", None) or [])
    n_sigma = getattr(ns, "nsigma", 64)
    if cmd == "validate":
        opts["validate_nsigma"] = ns.nsigma
    elif cmd == "spectra":
        opts["lambdas"] = ns.lambdas
    elif cmd == "homotopy":
        opts["theta_max"] = ns.theta_max
        opts["steps"] = ns.steps
        thetas = [ns.theta_max]
    elif cmd == "tailbound":
        opts["alphas"] = ns.alpha
    elif cmd == "oracle":
        opts["horizons"] = ns.horizon
        opts["nts"] = ns.nt
    elif cmd == "avgcheck":
        opts.update(kind=ns.kind, sides=ns.L, horizons=ns.horizon, degree=ns.degree,
                    nt_per_T=ns.nt_per_T)
    return RunConfig(
        command=cmd,
        inputs=inputs,
        n_sigma=n_sigma,
        n_lambda=getattr(ns, "nlambda", 257),
        thetas=thetas,
        fragment=getattr(ns, "fragment", None),
        output=ns.output,
        summary=ns.summary,
        options=opts,
    )


def _fail(code: int, exc: BaseException) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def run(cfg: RunConfig) -> int:
    """Execute one configured command; returns the process exit code."""
    try:
        return _COMMANDS[cfg.command](cfg)
    except NotAdmissible as exc:
        return _fail(EXIT_NOT_ADMISSIBLE, exc)
    except (ParseError, InvariantViolation, NotHurwitz) as exc:
        return _fail(EXIT_VALIDATION, exc)
    except (TiqnetError, ValueError, OSError) as exc:
        return _fail(EXIT_ERROR, exc)


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(ns)
    except ValueError as exc:
        return _fail(EXIT_ERROR, exc)
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
