"""Command-line entry point: ``solve``, ``scan`` and ``matrix`` commands.

Data files are deterministic: identical flags give byte-identical CSV/JSON.
The run manifest (with its timestamp) goes to a companion ``*.manifest.json``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import eigh

from . import __version__
from .core import (
    C_CODATA,
    BasisError,
    Constants,
    ConvergenceError,
    DiracError,
    DomainError,
    PotentialSpec,
)
from .driver import (
    COUPLINGS,
    Scan1DConfig,
    TrialFamily,
    default_density_grid,
    dft_fallacy_scan,
    fig5_scan,
    maxmin_spurious,
    outer_minimize,
    shower_scan,
    virial_check,
)
from .matrix import (
    build_blocks,
    collapse_demo,
    conjugation_asymmetry,
    diagonalize,
    even_tempered_uppers,
    kinetic_balance_basis,
    nepp_apply,
    same_radial_basis,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class StageError(Exception):
    """Numerical failure tagged with the pipeline stage that raised it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.report = getattr(exc, "report", None)


@dataclass
class RunManifest:
    command: str
    parameters: dict
    constants_used: dict
    tool_version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())


# ----------------------------------------------------------------------------
# formatting and output


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".15g")


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary sibling and rename, so partial files never appear."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def companion(path: Path, tag: str) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.{tag}{path.suffix}")


def manifest_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def emit(out: str | None, files: dict[Path, str], manifest: RunManifest, stdout_text: str) -> None:
    """Write data files then the manifest; without ``--out`` print to stdout."""
    if out is None:
        sys.stdout.write(stdout_text)
        return
    for path, text in files.items():
        atomic_write(path, text)
    atomic_write(manifest_path(Path(out)), dumps(asdict(manifest)))


# ----------------------------------------------------------------------------
# argument parsing


def parse_grid(spec: str) -> np.ndarray:
    """``lo:hi:count`` (linear), ``lo:hi:count:log`` or a comma list."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
            raise DomainError(f"grid must be lo:hi:count[:log], got {spec!r}")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1 or (count > 1 and not hi > lo):
            raise DomainError(f"invalid grid {spec!r}")
        if len(parts) == 4:
            if not lo > 0:
                raise DomainError("log grid needs lo > 0")
            return np.geomspace(lo, hi, count)
        return np.linspace(lo, hi, count)
    try:
        return np.array([float(x) for x in spec.split(",") if x.strip()])
    except ValueError as exc:
        raise DomainError(f"cannot parse grid {spec!r}") from exc


def parse_ints(spec: str) -> list[int]:
    try:
        vals = [int(x) for x in spec.split(",") if x.strip()]
    except ValueError as exc:
        raise DomainError(f"cannot parse integer list {spec!r}") from exc
    if not vals or min(vals) < 1:
        raise DomainError("n list must contain integers >= 1")
    return vals


def parse_uppers(spec: str) -> tuple[float, float, int]:
    try:
        zeta0, ratio, count = spec.split(",")
        return float(zeta0), float(ratio), int(count)
    except ValueError as exc:
        raise DomainError(f"--uppers must be zeta0,ratio,count, got {spec!r}") from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--Z", type=float, default=1.0, help="nuclear charge")
    p.add_argument("--c", type=float, default=C_CODATA, help="speed of light (a.u.)")
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def _trial_flags(p: argparse.ArgumentParser, default_trial: str = "sto") -> None:
    p.add_argument("--trial", choices=("sto", "exact-power"), default=default_trial)
    p.add_argument("--n", type=int, default=1, help="STO principal number (power n-1)")
    p.add_argument("--coupling", choices=COUPLINGS, default=None,
                   help="default: kb for sto, same-radial for exact-power")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dirac-minmax", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="min-max ground energy for a trial family")
    _common(p)
    _trial_flags(p)
    p.add_argument("--zeta", type=float, default=None, help="seed exponent (default n*Z)")
    p.add_argument("--zeta-range", default=None, help="lo:hi:count grid scanned before refinement")
    p.add_argument("--config", default=None)

    scan = sub.add_parser("scan", help="parameter scans written as CSV")
    ssub = scan.add_subparsers(dest="scan", required=True)
    p = ssub.add_parser("shower", help="eps(lambda) trajectories per zeta")
    _common(p)
    _trial_flags(p)
    p.add_argument("--zeta", default="0.96:1.04:5")
    p.add_argument("--lambda", dest="lam", default="0:0.0146:60")
    p.add_argument("--config", default=None)
    p = ssub.add_parser("fig5", help="both stationary branches along zeta")
    _common(p)
    p.add_argument("--zeta", default="0.1:3:30")
    p.add_argument("--config", default=None)
    p = ssub.add_parser("dft-fallacy", help="same energy, different densities for each n")
    _common(p)
    p.add_argument("--n", default="1,2,3")
    p.add_argument("--r", default=None, help="density grid (default 0.02/Z..8/Z, 200 points)")
    p.add_argument("--config", default=None)
    p = ssub.add_parser("maxmin", help="spurious negative-branch values along zeta")
    _common(p)
    _trial_flags(p)
    p.add_argument("--zeta", default="0.001:2:50:log")
    p.add_argument("--config", default=None)

    mat = sub.add_parser("matrix", help="finite-basis demonstrations")
    msub = mat.add_subparsers(dest="matrix", required=True)
    for name, helptext in (("collapse", "balanced vs detuned lower basis"),
                           ("nepp", "negative-energy pseudopotential spectrum"),
                           ("conjugation", "charge-conjugation spectral symmetry")):
        p = msub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--uppers", default="0.5,2,4", help="even-tempered zeta0,ratio,count")
        p.add_argument("--power", type=float, default=0.0, help="radial power of the uppers")
        p.add_argument("--detune", type=float, default=4.0)
        p.add_argument("--Eg", default="exact", help="'exact' or a number (total energy)")
        p.add_argument("--lowers", choices=("kb", "same-radial"), default=None,
                       help="lower basis (conjugation default: same-radial, else kb)")
        p.add_argument("--config", default=None)
    return parser


def read_config(path: str) -> list[str]:
    """Flat ``key=value`` file to flag tokens; ``#`` starts a comment."""
    tokens = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        tokens += [f"--{key.lstrip('-')}", value]
    return tokens


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        ncmd = 1 if args.command == "solve" else 2
        argv = list(argv)
        # config values first so explicit flags override them
        args = parser.parse_args(argv[:ncmd] + read_config(args.config) + argv[ncmd:])
    return args


def make_potential(args) -> PotentialSpec:
    if args.Z < 0:
        raise DomainError("Z must be >= 0")
    return PotentialSpec(args.Z, Constants(c=args.c))


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "config")}


# ----------------------------------------------------------------------------
# commands


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (ConvergenceError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def cmd_solve(args) -> int:
    pot = make_potential(args)
    if args.zeta is not None and not args.zeta > 0:
        raise DomainError("zeta must be positive")
    trial = TrialFamily(args.trial.replace("_", "-"), args.n)
    coupling = args.coupling or ("kb" if trial.kind == "sto" else "same-radial")
    rng = None
    if args.zeta_range:
        g = parse_grid(args.zeta_range)
        rng = Scan1DConfig(float(g[0]), float(g[-1]), len(g))
    res = _stage("outer minimization", outer_minimize, trial, coupling, pot, rng, args.zeta)
    virial = _stage("virial check", virial_check, res, pot)
    exact = pot.exact_1s_shifted()
    doc = {
        "eps_minmax": res.eps_minmax,
        "eps_minus_mc2": res.eps_shift,
        "zeta_star": res.zeta_star,
        "lambda_star": res.lambda_star,
        "exact_formula_value": pot.exact_1s(),
        "gap_to_exact": res.eps_shift - exact,
        "virial_residual": virial,
        "certified": res.certified,
        "coupling": coupling,
        "trial": trial.kind,
        "n": trial.n,
    }
    if res.kappa_param is not None:
        doc["kappa_param"] = res.kappa_param
    text = dumps(doc)
    manifest = RunManifest("solve", _params(args), pot.const.as_dict())
    emit(args.out, {Path(args.out): text} if args.out else {}, manifest, text)
    return EXIT_OK


def cmd_scan(args) -> int:
    pot = make_potential(args)
    if args.out is None:
        raise DomainError("scan commands need --out")
    out = Path(args.out)
    files: dict[Path, str] = {}
    if args.scan == "shower":
        trial = TrialFamily(args.trial, args.n)
        coupling = args.coupling or ("kb" if trial.kind == "sto" else "same-radial")
        if coupling == "resolvent":
            raise DomainError("shower needs a one-parameter coupling family")
        zetas, lams = parse_grid(args.zeta), parse_grid(args.lam)
        recs, maxima = _stage("shower scan", shower_scan, zetas, lams, trial, coupling, pot)
        files[out] = csv_text(["zeta", "lambda", "eps_minus_mc2"],
                              [(r.params["zeta"], r.params["lambda"], r.values["eps_minus_mc2"]) for r in recs])
        files[companion(out, "maxima")] = csv_text(
            ["zeta", "lambda_star", "eps_max_minus_mc2"],
            [(m.params["zeta"], m.values["lambda_star"], m.values["eps_max_minus_mc2"]) for m in maxima])
    elif args.scan == "fig5":
        zetas = parse_grid(args.zeta)
        if np.any(zetas <= 0):
            raise DomainError("zeta grid must be positive")
        recs = _stage("fig5 scan", fig5_scan, zetas, pot)
        cols = ["eps_plus_minus_mc2", "eps_minus_plus_mc2", "pot_plus", "pot_minus"]
        files[out] = csv_text(["zeta"] + cols, [[r.params["zeta"]] + [r.values[k] for k in cols] for r in recs])
    elif args.scan == "dft-fallacy":
        ns = parse_ints(args.n)
        r = parse_grid(args.r) if args.r else None
        recs = _stage("dft-fallacy scan", dft_fallacy_scan, ns, pot, r)
        files[out] = csv_text(
            ["n", "zeta_star", "lambda_star", "eps_minus_mc2", "deviation_from_exact"],
            [(d.n, d.zeta_star, d.lambda_star, d.eps_shift, d.deviation) for d in recs])
        grid = default_density_grid(pot.Z) if r is None else r
        files[companion(out, "density")] = csv_text(
            ["r"] + [f"density_n{d.n}" for d in recs],
            [[x] + [d.density[i] for d in recs] for i, x in enumerate(grid)])
    elif args.scan == "maxmin":
        trial = TrialFamily(args.trial, args.n)
        coupling = args.coupling or "kb"
        zetas = parse_grid(args.zeta)
        (_, _), recs = _stage("max-min scan", maxmin_spurious, trial, coupling, pot, zetas)
        files[out] = csv_text(["zeta", "eps_minus_plus_mc2"],
                              [(r.params["zeta"], r.values["eps_minus_plus_mc2"]) for r in recs])
    manifest = RunManifest(f"scan {args.scan}", _params(args), pot.const.as_dict())
    emit(str(out), files, manifest, "")
    return EXIT_OK


def _basis(args, default_lowers: str):
    zeta0, ratio, count = parse_uppers(args.uppers)
    ups = even_tempered_uppers(zeta0, ratio, count, args.power)
    kind = args.lowers or default_lowers
    return ups, (kinetic_balance_basis(ups) if kind == "kb" else same_radial_basis(ups)), kind


def cmd_matrix(args) -> int:
    pot = make_potential(args)
    if args.matrix == "collapse":
        ups, _, _ = _basis(args, "kb")
        rep = _stage("collapse demo", collapse_demo, ups, pot, args.detune)
        doc = asdict(rep)
        doc["collapsed"] = rep.collapsed
    elif args.matrix == "nepp":
        _, basis, kind = _basis(args, "kb")
        blocks = _stage("block construction", build_blocks, basis, pot)
        spec = _stage("diagonalization", diagonalize, blocks)
        E_g = pot.exact_1s() if args.Eg == "exact" else float(args.Eg)
        H, S = _stage("nepp", nepp_apply, blocks, E_g, E_g)
        after = eigh(H, S, eigvals_only=True) + E_g
        gap = spec.classification.gap
        bound = min(E_g, gap[0]) if gap else E_g
        doc = {
            "E_g": E_g,
            "lowers": kind,
            "spectrum_before": spec.eigenvalues,
            "spectrum_after": after,
            "negative_count": len(spec.classification.negative_branch),
            "min_eigenvalue": float(after[0]),
            "bound": bound,
            "bound_satisfied": bool(after[0] >= bound - 1e-10),
        }
    else:
        _, basis, kind = _basis(args, "same-radial")
        asym = _stage("conjugation", conjugation_asymmetry, basis, pot)
        doc = {
            "lowers": kind,
            "asymmetry": asym["same_basis"],
            "mirrored_asymmetry": asym["mirrored"],
            "relative_asymmetry": asym["same_basis"] / pot.mc2,
            "mc2": pot.mc2,
        }
    text = dumps(doc)
    manifest = RunManifest(f"matrix {args.matrix}", _params(args), pot.const.as_dict())
    emit(args.out, {Path(args.out): text} if args.out else {}, manifest, text)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "scan": cmd_scan, "matrix": cmd_matrix}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else EXIT_VALIDATION
    except StageError as exc:
        print(f"error: numerical failure in {exc}", file=sys.stderr)
        if exc.report:
            print(dumps({"basis_report": exc.report}), file=sys.stderr, end="")
        return EXIT_NUMERICAL
    except BasisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(dumps({"basis_report": exc.report}), file=sys.stderr, end="")
        return EXIT_NUMERICAL
    except ConvergenceError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DiracError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
