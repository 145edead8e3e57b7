"""Command-line entry point: ``mcgraph run | coeffs | verify | print-config``.

A run reads a TOML document with the sections ``[geometry]``, ``[grid]``,
``[source]``, ``[solver]``, ``[verify]`` and ``[output]``, solves, verifies
and writes everything into one run directory.  Relative output directories
are resolved against ``$MCGRAPH_OUTPUT_ROOT`` (default: the working
directory).

Exit codes: 0 success, 1 a check or the solver failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import shutil
import sys
import time
from contextlib import nullcontext
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.fft

from . import __version__
from .coefficients import CapacityError, recursion_table
from .grid_fields import GeometrySign, GridSpec, ScalarField, VectorField, read_field, write_field
from .solver import (Bump, CurvatureSpec, MagnitudeBreachError, SeriesSolution, SolverConfig,
                     SupportError, solve_series)
from .verify import GradientBreachError, run_verification

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "RunManifest",
    "DEFAULT_CONFIG",
    "load_config",
    "build_config",
    "born_infeld_mode",
    "electrostatic_fields",
    "run",
    "verify_run",
    "main",
]

OUTPUT_ROOT_ENV = "MCGRAPH_OUTPUT_ROOT"

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2

DEFAULT_CONFIG = {
    "geometry": {"sign": "euclidean"},
    "grid": {"extent": 8.0, "points": 64, "padding": 2},
    "source": {"kind": "gaussian", "amplitude": 3.0, "width": 1.0, "center": [0.0, 0.0, 0.0],
               "separation": 1.5, "axis": 0, "bumps": [], "path": "", "scale": 1.0,
               "charge": 0.3, "beta": 0.3, "pseudo": False},
    "solver": {"epsilon": 0.04, "order_K": 4, "variant": "sqrt", "guard": 0.05,
               "support_threshold": 1e-6},
    "verify": {"enabled": True, "oracle": True, "oracle_tol": 1e-10, "oracle_max_iter": 200,
               "slopes": True, "slope_epsilons": [0.04, 0.02, 0.01],
               "identity_defect": 1e-5, "divfree_defect": 1e-7, "oracle_gap": 1e-9,
               "farfield_error": 0.02, "slope_tolerance": 0.3, "coulomb_defect": 1e-6},
    "output": {"directory": "runs", "name": "", "profiles": True, "dump_terms": True},
}

SOURCE_KINDS = ("gaussian", "dipole", "multi_bump", "born_infeld", "file")


class ConfigError(ValueError):
    """The configuration does not validate; carries ``section.key`` context."""


@dataclass
class RunManifest:
    config_path: str
    config: dict
    output_dir: str
    artifacts: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    version: str = __version__
    threads: int | None = None
    passed: bool | None = None

    def to_dict(self) -> dict:
        return {"config_path": self.config_path, "config": self.config,
                "output_dir": self.output_dir, "artifacts": self.artifacts,
                "timings": self.timings, "version": self.version, "threads": self.threads,
                "passed": self.passed}


# ---------------------------------------------------------------- config

def _merge(raw: dict) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a table")
    for section, values in raw.items():
        if section not in cfg:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, val in values.items():
            if key not in cfg[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
            cfg[section][key] = val
    return cfg


def _num(cfg, section, key, *, positive=False, integer=False, minimum=None):
    val = cfg[section][key]
    where = f"{section}.{key}"
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {val!r}")
    if integer and not isinstance(val, int):
        raise ConfigError(f"{where}: expected an integer, got {val!r}")
    if not math.isfinite(val):
        raise ConfigError(f"{where}: must be finite")
    if positive and val <= 0:
        raise ConfigError(f"{where}: must be positive, got {val!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {val!r}")
    return val


def _bool(cfg, section, key):
    val = cfg[section][key]
    if not isinstance(val, bool):
        raise ConfigError(f"{section}.{key}: expected true or false, got {val!r}")
    return val


def _vec3(val, where):
    if (not isinstance(val, (list, tuple)) or len(val) != 3
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in val)):
        raise ConfigError(f"{where}: expected three numbers, got {val!r}")
    return tuple(float(x) for x in val)


def _source(cfg: dict, base_dir: Path) -> CurvatureSpec:
    s = cfg["source"]
    kind = s["kind"]
    if kind not in SOURCE_KINDS:
        raise ConfigError(f"source.kind: expected one of {SOURCE_KINDS}, got {kind!r}")
    amp = _num(cfg, "source", "amplitude")
    width = _num(cfg, "source", "width", positive=True)
    center = _vec3(s["center"], "source.center")
    if kind == "gaussian":
        return CurvatureSpec.gaussian(amp, width, center)
    if kind == "dipole":
        axis = _num(cfg, "source", "axis", integer=True, minimum=0)
        if axis > 2:
            raise ConfigError("source.axis: must be 0, 1 or 2")
        return CurvatureSpec.dipole(amp, width, _num(cfg, "source", "separation", positive=True), axis)
    if kind == "multi_bump":
        bumps = s["bumps"]
        if not isinstance(bumps, list) or not bumps:
            raise ConfigError("source.bumps: multi_bump needs a non-empty list of tables")
        out = []
        for i, b in enumerate(bumps):
            where = f"source.bumps[{i}]"
            if not isinstance(b, dict) or set(b) - {"amplitude", "width", "center"}:
                raise ConfigError(f"{where}: expected a table with amplitude, width, center")
            try:
                a, w = float(b["amplitude"]), float(b["width"])
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"{where}: amplitude and width must be numbers") from None
            if not (math.isfinite(a) and math.isfinite(w) and w > 0):
                raise ConfigError(f"{where}: needs a finite amplitude and a positive width")
            out.append(Bump(a, w, _vec3(b.get("center", [0.0, 0.0, 0.0]), f"{where}.center")))
        return CurvatureSpec.multi_bump(out)
    if kind == "born_infeld":
        return CurvatureSpec.gaussian(_num(cfg, "source", "charge"), width, center)
    path = s["path"]
    if not isinstance(path, str) or not path:
        raise ConfigError("source.path: file sources need a path")
    p = Path(path)
    if not p.is_absolute():
        p = base_dir / p
    if not p.exists():
        raise ConfigError(f"source.path: {p} does not exist")
    scale = _num(cfg, "source", "scale")
    return replace(CurvatureSpec.from_file(p), scale=float(scale))


def build_config(cfg: dict, base_dir: Path | str = ".") -> SolverConfig:
    """Validate a merged configuration table and build the solver config."""
    try:
        sign = GeometrySign.parse(cfg["geometry"]["sign"])
    except (ValueError, AttributeError, TypeError):
        raise ConfigError(f"geometry.sign: unknown sign {cfg['geometry']['sign']!r}") from None
    n = _num(cfg, "grid", "points", integer=True, minimum=4)
    extent = _num(cfg, "grid", "extent", positive=True)
    padding = _num(cfg, "grid", "padding", integer=True, minimum=2)
    try:
        grid = GridSpec(float(extent), int(n), int(padding))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    eps = _num(cfg, "solver", "epsilon", positive=True)
    K = _num(cfg, "solver", "order_K", integer=True, minimum=0)
    variant = cfg["solver"]["variant"]
    if variant not in ("sqrt", "cubic"):
        raise ConfigError(f"solver.variant: expected 'sqrt' or 'cubic', got {variant!r}")
    guard = _num(cfg, "solver", "guard", positive=True)
    if guard >= 1:
        raise ConfigError("solver.guard: must be below 1")
    support = _num(cfg, "solver", "support_threshold", positive=True)
    for key in ("enabled", "oracle", "slopes"):
        _bool(cfg, "verify", key)
    for key in ("oracle_tol", "identity_defect", "divfree_defect", "oracle_gap",
                "farfield_error", "slope_tolerance", "coulomb_defect"):
        _num(cfg, "verify", key, positive=True)
    _num(cfg, "verify", "oracle_max_iter", integer=True, minimum=1)
    eps_list = cfg["verify"]["slope_epsilons"]
    if (not isinstance(eps_list, list) or len(eps_list) < 2
            or any(isinstance(e, bool) or not isinstance(e, (int, float)) or e <= 0 for e in eps_list)):
        raise ConfigError("verify.slope_epsilons: need at least two positive numbers")
    for key in ("profiles", "dump_terms"):
        _bool(cfg, "output", key)
    for key in ("directory", "name"):
        if not isinstance(cfg["output"][key], str):
            raise ConfigError(f"output.{key}: expected a string")
    source = _source(cfg, Path(base_dir))
    config = SolverConfig(sign, float(eps), int(K), variant, grid, source,
                          {"guard": float(guard), "support_threshold": float(support)})
    if cfg["source"]["kind"] == "born_infeld":
        beta = _num(cfg, "source", "beta", positive=True)
        pseudo = _bool(cfg, "source", "pseudo")
        config = born_infeld_mode(source, float(beta), pseudo=pseudo, base=config)
    return config


def load_config(path: str | Path) -> tuple[dict, SolverConfig]:
    """Parse and validate a TOML file; returns (merged table, solver config)."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = _merge(raw)
    return cfg, build_config(cfg, path.parent)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return str(v)


def default_config_text() -> str:
    lines = []
    for section, values in DEFAULT_CONFIG.items():
        lines.append(f"[{section}]")
        for key, val in values.items():
            lines.append(f"{key} = {_toml_value(val)}")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------- Born-Infeld

def born_infeld_mode(rho: CurvatureSpec, beta: float, *, pseudo: bool = False,
                     base: SolverConfig | None = None) -> SolverConfig:
    """Configuration solving electrostatics with Born's aether law.

    With ``E = w / beta^2`` and ``D = v / beta^2`` Born's law
    ``D = E / sqrt(1 - beta^4 |E|^2)`` is the Minkowskian v-to-w map and
    ``div D = 4 pi rho`` becomes ``div v = 3 H`` with
    ``H = (4 pi / 3) beta^2 rho``, so ``eps = beta^2`` and
    ``H0 = (4 pi / 3) rho``.  ``pseudo=True`` flips the sign of ``beta^4``
    and selects the Euclidean geometry.
    """
    if isinstance(beta, bool) or not isinstance(beta, (int, float)) or not (math.isfinite(beta) and beta > 0):
        raise ValueError(f"beta must be a positive number, got {beta!r}")
    if rho.kind == "file":
        source = replace(rho, scale=rho.scale * 4.0 * math.pi / 3.0, beta=float(beta))
    else:
        source = CurvatureSpec("born_infeld", rho.bumps, scale=rho.scale * 4.0 * math.pi / 3.0,
                               beta=float(beta))
    base = base or SolverConfig()
    sign = GeometrySign.EUCLIDEAN if pseudo else GeometrySign.MINKOWSKIAN
    return replace(base, sign=sign, epsilon=float(beta) ** 2, source=source)


def electrostatic_fields(solution: SeriesSolution) -> tuple[VectorField, VectorField]:
    """``(E, D) = (w, v) / beta^2`` for a Born-Infeld run."""
    beta = solution.config.source.beta
    if beta is None:
        raise ValueError("solution was not computed in Born-Infeld mode")
    s = 1.0 / beta**2
    return solution.w.scaled(s), solution.v.scaled(s)


def coulomb_defect(solution: SeriesSolution, D: VectorField) -> float:
    """``|div D - 4 pi rho|_inf / (4 pi |rho|_inf)`` on the full grid."""
    rho = solution.H0.values / solution.config.source.scale
    div = np.einsum("ii...->...", D.jacobian)
    scale = 4.0 * math.pi * float(np.abs(rho).max())
    if scale == 0.0:
        return float(np.abs(div).max())
    return float(np.abs(div - 4.0 * math.pi * rho).max()) / scale


# ------------------------------------------------------------------ run

def _output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))


def _run_dir(cfg: dict, config_path: Path) -> Path:
    directory = Path(cfg["output"]["directory"])
    if not directory.is_absolute():
        directory = _output_root() / directory
    name = cfg["output"]["name"] or config_path.stem
    return directory / name


def _profiles(solution: SeriesSolution) -> dict[str, list]:
    """Samples of ``u``, ``|v|``, ``|w|`` along the axes and the main diagonal."""
    spec = solution.config.grid
    n = spec.n
    mid = n // 2
    u = solution.u.values
    vm = solution.v.magnitude()
    wm = solution.w.magnitude()
    ax = spec.axis
    lines = {
        "x": (np.arange(n), np.full(n, mid), np.full(n, mid)),
        "y": (np.full(n, mid), np.arange(n), np.full(n, mid)),
        "z": (np.full(n, mid), np.full(n, mid), np.arange(n)),
        "diagonal": (np.arange(n), np.arange(n), np.arange(n)),
    }
    out = {}
    for name, (i, j, k) in lines.items():
        x, y, z = ax[i], ax[j], ax[k]
        s = np.sign(x + y + z) * np.sqrt(x**2 + y**2 + z**2) if name == "diagonal" else {
            "x": x, "y": y, "z": z}[name]
        out[name] = [(float(a), float(b), float(c), float(d), float(u[p, q, r]),
                      float(vm[p, q, r]), float(wm[p, q, r]))
                     for a, b, c, d, p, q, r in zip(s, x, y, z, i, j, k)]
    return out


def _thresholds(cfg: dict) -> dict:
    v = cfg["verify"]
    return {k: float(v[k]) for k in ("identity_defect", "divfree_defect", "oracle_gap",
                                     "farfield_error", "slope_tolerance")}


def _threads_ctx(threads: int | None):
    return scipy.fft.set_workers(threads) if threads else nullcontext()


def _solve_and_check(cfg: dict, config: SolverConfig, timings: dict):
    t = time.perf_counter()
    solution = solve_series(config)
    timings["solve"] = time.perf_counter() - t
    report = None
    warnings = list(solution.warnings)
    checks = {}
    if cfg["verify"]["enabled"]:
        t = time.perf_counter()
        report = run_verification(solution, thresholds=_thresholds(cfg),
                                  oracle=cfg["verify"]["oracle"],
                                  oracle_tol=float(cfg["verify"]["oracle_tol"]),
                                  oracle_max_iter=int(cfg["verify"]["oracle_max_iter"]),
                                  slopes=cfg["verify"]["slopes"],
                                  slope_epsilons=tuple(cfg["verify"]["slope_epsilons"]))
        timings["verify"] = time.perf_counter() - t
        checks = report.checks
    em = None
    if config.source.beta is not None:
        E, D = electrostatic_fields(solution)
        defect = coulomb_defect(solution, D)
        thr = float(cfg["verify"]["coulomb_defect"])
        checks["coulomb_law"] = {"value": defect, "threshold": thr, "passed": defect <= thr}
        em = (E, D)
    return solution, report, checks, warnings, em


def run(config_path: str | Path, *, threads: int | None = None) -> RunManifest:
    """Solve, verify and write one run; raises :class:`ConfigError` before
    touching the file system when the configuration is invalid."""
    config_path = Path(config_path)
    cfg, config = load_config(config_path)
    out = _run_dir(cfg, config_path)
    timings: dict = {}
    t0 = time.perf_counter()
    with _threads_ctx(threads):
        solution, report, checks, warnings, em = _solve_and_check(cfg, config, timings)
    # Everything below only writes; nothing is created before the solve succeeded.
    out.mkdir(parents=True, exist_ok=True)
    artifacts: list[str] = []

    def dump(name: str, F, quantity: str):
        for p in write_field(out / name, F, quantity, config.sign):
            artifacts.append(p.name)

    t = time.perf_counter()
    shutil.copyfile(config_path, out / "config.toml")
    artifacts.append("config.toml")
    (out / "resolved_config.json").write_text(json.dumps(
        {"table": cfg, "solver": config.to_dict()}, indent=2) + "\n")
    artifacts.append("resolved_config.json")
    dump("H0.mcg", solution.H0.without_jet(), "H0")
    if cfg["output"]["dump_terms"]:
        for k, term in enumerate(solution.terms.terms):
            dump(f"term_{2 * k + 1:02d}.mcg", VectorField(term.spec, term.components),
                 f"v^({2 * k + 1})")
    dump("v.mcg", VectorField(solution.v.spec, solution.v.components), "v")
    dump("w.mcg", VectorField(solution.w.spec, solution.w.components), "w")
    dump("u.mcg", solution.u.without_jet(), "u")
    if em is not None:
        dump("E.mcg", VectorField(em[0].spec, em[0].components), "E")
        dump("D.mcg", VectorField(em[1].spec, em[1].components), "D")
    cert = solution.certificate.to_dict()
    if not solution.certificate.inside:
        warnings.append("certificate.inside=false: the majorant radius does not cover this epsilon")
    (out / "certificate.json").write_text(json.dumps(cert, indent=2) + "\n")
    artifacts.append("certificate.json")
    (out / "diagnostics.json").write_text(json.dumps(solution.diagnostics, indent=2, default=float) + "\n")
    artifacts.append("diagnostics.json")
    passed = all(c["passed"] for c in checks.values())
    rep = report.to_dict() if report is not None else {"checks": {}}
    rep["checks"] = checks
    rep["passed"] = passed
    rep["verification_enabled"] = report is not None
    rep["certificate"] = cert
    rep["warnings"] = warnings
    (out / "report.json").write_text(json.dumps(rep, indent=2, default=_json_default) + "\n")
    artifacts.append("report.json")
    if cfg["output"]["profiles"]:
        for name, rows in _profiles(solution).items():
            fname = f"profile_{name}.csv"
            with open(out / fname, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["s", "x", "y", "z", "u", "v_mag", "w_mag"])
                wr.writerows(rows)
            artifacts.append(fname)
    timings["write"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t0
    manifest = RunManifest(str(config_path.resolve()), config.to_dict(), str(out.resolve()),
                           artifacts, timings, threads=threads, passed=passed)
    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return manifest


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def verify_run(run_dir: str | Path, *, threads: int | None = None, rtol: float = 1e-13) -> dict:
    """Re-solve a stored run and compare every field dump, then re-run the checks.

    Returns a summary dict with ``reproduced`` and ``passed`` flags.
    """
    run_dir = Path(run_dir)
    mpath = run_dir / "manifest.json"
    if not mpath.exists() or not (run_dir / "config.toml").exists():
        raise ConfigError(f"{run_dir}: not a run directory (manifest.json or config.toml missing)")
    manifest = json.loads(mpath.read_text())
    cfg = json.loads((run_dir / "resolved_config.json").read_text())["table"]
    base = Path(manifest["config_path"]).parent
    config = build_config(_merge(cfg), base)
    timings: dict = {}
    with _threads_ctx(threads):
        solution, report, checks, _, em = _solve_and_check(cfg, config, timings)
    fresh = {"H0.mcg": solution.H0.values, "v.mcg": solution.v.components,
             "w.mcg": solution.w.components, "u.mcg": solution.u.values}
    for k, term in enumerate(solution.terms.terms):
        fresh[f"term_{2 * k + 1:02d}.mcg"] = term.components
    if em is not None:
        fresh["E.mcg"], fresh["D.mcg"] = em[0].components, em[1].components
    diffs = {}
    for name, arr in fresh.items():
        if name not in manifest["artifacts"]:
            continue
        stored, _ = read_field(run_dir / name)
        data = stored.values if isinstance(stored, ScalarField) else stored.components
        scale = max(float(np.abs(arr).max()), 1e-300)
        diffs[name] = float(np.abs(data - arr).max()) / scale
    reproduced = all(d <= rtol for d in diffs.values())
    passed = all(c["passed"] for c in checks.values())
    summary = {"run_dir": str(run_dir.resolve()), "reproduced": reproduced, "rtol": rtol,
               "relative_differences": diffs, "checks": checks, "passed": passed,
               "timings": timings}
    (run_dir / "verify.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    return summary


# ------------------------------------------------------------------ CLI

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcgraph", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"mcgraph {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve and verify one configuration")
    r.add_argument("config")
    r.add_argument("--threads", type=int, default=None, help="FFT worker threads (1: bit-exact)")
    c = sub.add_parser("coeffs", help="print the majorant coefficients as CSV")
    c.add_argument("--K", type=int, required=True)
    v = sub.add_parser("verify", help="re-solve a run directory and compare")
    v.add_argument("run_dir")
    v.add_argument("--threads", type=int, default=None)
    sub.add_parser("print-config", help="print the default configuration")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "print-config":
            sys.stdout.write(default_config_text())
            return EXIT_OK
        if args.command == "coeffs":
            if args.K < 0:
                print("error: --K must be non-negative", file=sys.stderr)
                return EXIT_USAGE
            table = recursion_table(args.K)
            wr = csv.writer(sys.stdout)
            wr.writerow(["k", "R", "value"])
            for row in table.rows():
                wr.writerow([row[0], row[1], repr(row[2])])
            return EXIT_OK
        if args.command == "run":
            manifest = run(args.config, threads=args.threads)
            print(f"run directory: {manifest.output_dir}")
            print(f"artifacts: {len(manifest.artifacts)}")
            report = json.loads((Path(manifest.output_dir) / "report.json").read_text())
            for w in report["warnings"]:
                print(f"warning: {w}", file=sys.stderr)
            for name, chk in report["checks"].items():
                print(f"{'PASS' if chk['passed'] else 'FAIL'} {name}: {chk.get('value')}")
            return EXIT_OK if manifest.passed else EXIT_CHECK
        if args.command == "verify":
            summary = verify_run(args.run_dir, threads=args.threads)
            print(f"reproduced: {summary['reproduced']}")
            for name, chk in summary["checks"].items():
                print(f"{'PASS' if chk['passed'] else 'FAIL'} {name}: {chk.get('value')}")
            return EXIT_OK if summary["reproduced"] and summary["passed"] else EXIT_CHECK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MagnitudeBreachError, SupportError, GradientBreachError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_USAGE  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
