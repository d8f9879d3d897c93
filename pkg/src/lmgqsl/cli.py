"""Command-line interface: configuration, experiment dispatch and table output.

Usage: ``lmgqsl <command> [--key value ...] [--config FILE] [--out DIR]``.
A config file holds ``key = value`` lines; command-line flags win over it.
Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.linalg import LinAlgError

from . import __version__
from . import experiments as ex
from .errors import ConfigError, NumericalError
from .qsl_metrics import QubitAngles, refined_metrics
from .quench import decompose_quench, decoherence_series, energy_moments, strength_and_A
from .spectral import classical_dos, diagonalize, dos_histogram, level_curves
from .spin_core import build_basis, build_lmg

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, help)
PARAMS: dict[str, tuple[Any, str]] = {
    "n": (int, "environment size N (even)"),
    "alpha": (float, "control parameter alpha"),
    "lambda": (float, "coupling strength lambda (default: analytic critical value)"),
    "tau_e": (float, "evolution time tau_e"),
    "theta": (float, "qubit polar angle"),
    "phi": (float, "qubit azimuthal angle"),
    "frame": (str, "energy frame of the quenched branch: critical or interaction"),
    "dt": (float, "time-step override for the decoherence series"),
    "bins": (int, "number of energy bins"),
    "resolution": (int, "phase-space grid points per axis for the classical DOS"),
    "lambda_min": (float, "lambda grid start"),
    "lambda_max": (float, "lambda grid stop"),
    "lambda_step": (float, "lambda grid step"),
    "alpha_min": (float, "alpha grid start"),
    "alpha_max": (float, "alpha grid stop"),
    "alpha_step": (float, "alpha grid step"),
    "n_min": (int, "smallest environment size"),
    "n_max": (int, "largest environment size"),
    "n_step": (int, "environment size step"),
    "tau_min": (float, "tau_e grid start"),
    "tau_max": (float, "tau_e grid stop"),
    "tau_step": (float, "tau_e grid step"),
    "format": (str, "output format: csv or json"),
    "figures": (_bool, "render PNG figures next to the tables"),
}

_COMMON = {"format": "csv", "figures": True}
_QUBIT = {"theta": math.pi / 2, "phi": 0.0, "frame": "critical"}
_LAMBDA_GRID = {"lambda_min": 0.05, "lambda_max": 2.0, "lambda_step": 0.005}

COMMANDS: dict[str, dict[str, Any]] = {
    "spectrum": {"n": 40, "alpha_min": 0.0, "alpha_max": 1.0, "alpha_step": 0.005},
    "dos": {"n": 2000, "alpha": 0.3, "bins": 100, "resolution": 4000},
    "quench": {"n": 1000, "alpha": 0.4, "lambda": None, "tau_e": 10.0, "dt": None,
               "bins": 100, **_QUBIT},
    "qsl-scan": {"n": 1000, "alpha": 0.4, "tau_e": 1.0, **_LAMBDA_GRID, **_QUBIT},
    "scaling": {"alpha": 0.4, "tau_e": 1.0, "lambda": None, "n_min": 200, "n_max": 2000,
                "n_step": 200, "frame": "critical"},
    "critical-locus": {"n": 1000, "tau_e": 1.0, "alpha_min": 0.0, "alpha_max": 0.72,
                       "alpha_step": 0.08, **_LAMBDA_GRID, "frame": "critical"},
    "heatmap": {"n": 1000, "alpha": 0.4, "tau_min": 1.0, "tau_max": 10.0, "tau_step": 1.0,
                **_LAMBDA_GRID, **_QUBIT},
    "nm-scan": {"n": 1000, "alpha": 0.4, "tau_e": 8.0, **_LAMBDA_GRID, "frame": "critical"},
}
for _defaults in COMMANDS.values():
    _defaults.update(_COMMON)


@dataclass
class RunConfig:
    command: str
    params: dict[str, Any]
    out: Path = Path(".")

    def __getitem__(self, key: str) -> Any:
        return self.params[key]


@dataclass
class OutputTable:
    name: str
    columns: list[str]
    rows: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def to_csv(self) -> str:
        lines = [f"# {k}: {_fmt(v)}" for k, v in self.metadata.items()]
        lines.append(",".join(self.columns))
        lines += [",".join(_fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "metadata": {k: _jsonable(v) for k, v in self.metadata.items()},
            "columns": self.columns,
            "rows": [[float(_fmt(v)) for v in row] for row in self.rows],
        }
        return json.dumps(doc, indent=1) + "\n"


def _fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(f"{float(value):.12g}")
    return value if value is None else str(value)


def read_table(path: str | os.PathLike) -> OutputTable:
    """Parse a table written by :func:`write_tables` (CSV or JSON)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        doc = json.loads(text)
        rows = np.array(doc["rows"], dtype=float).reshape(-1, len(doc["columns"]))
        return OutputTable(doc["name"], doc["columns"], rows, doc["metadata"])
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = value
        elif line:
            body.append(line)
    columns = body[0].split(",")
    rows = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]], dtype=float)
    return OutputTable(path.stem, columns, rows.reshape(-1, len(columns)), meta)


# ---------------------------------------------------------------- configuration


def _canonical(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError("config", f"{path}:{lineno}: expected 'key = value'")
        values[_canonical(key)] = value.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmgqsl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, defaults in COMMANDS.items():
        p = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--out", help="output directory (default: current directory)")
        for key in defaults:
            flag = "--" + key.replace("_", "-")
            if key == "figures":
                p.add_argument("--figures", dest="figures", action="store_const", const="true")
                p.add_argument("--no-figures", dest="figures", action="store_const",
                               const="false")
                continue
            p.add_argument(flag, dest=key, metavar=key.upper(), help=PARAMS[key][1])
    return parser


def _coerce(key: str, raw: Any) -> Any:
    if raw is None or not isinstance(raw, str):
        return raw
    if raw.lower() in ("none", ""):
        return None
    kind = PARAMS[key][0]
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return kind(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {getattr(kind, '__name__', kind)}")


def parse_config(argv: list[str] | None = None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    defaults = COMMANDS[command]
    params = dict(defaults)
    if "config" in args:
        for key, value in read_config_file(args.pop("config")).items():
            if key not in defaults:
                raise ConfigError(key, f"unknown key for command {command!r}")
            params[key] = value
    out = Path(args.pop("out", "."))
    params.update(args)
    params = {k: _coerce(k, v) for k, v in params.items()}
    config = RunConfig(command, params, out)
    validate(config)
    return config


def _require(cond: bool, key: str, message: str) -> None:
    if not cond:
        raise ConfigError(key, message)


def validate(config: RunConfig) -> None:
    p = config.params
    if "n" in p:
        _require(p["n"] >= 2 and p["n"] % 2 == 0, "n", f"N must be even and >= 2, got {p['n']}")
    if "alpha" in p:
        _require(0 <= p["alpha"] <= 1, "alpha", f"must lie in [0, 1], got {p['alpha']}")
    if p.get("lambda") is not None:
        _require(p["lambda"] >= 0, "lambda", "must be >= 0")
    needs_lc = config.command in ("quench", "scaling") and p.get("lambda") is None
    if needs_lc or config.command in ("qsl-scan", "heatmap", "nm-scan"):
        _require(p["alpha"] <= ex.ALPHA_C, "alpha",
                 "the critical coupling needs alpha <= 0.8")
    if config.command == "dos":
        _require(p["alpha"] < 1, "alpha", "classical DOS needs alpha < 1")
        _require(p["resolution"] >= 10, "resolution", "must be >= 10")
    for key in ("tau_e", "tau_min", "tau_step", "lambda_step", "alpha_step", "n_step"):
        if key in p:
            _require(p[key] > 0, key, "must be positive")
    if "dt" in p and p["dt"] is not None:
        _require(p["dt"] > 0, "dt", "must be positive")
    if "theta" in p:
        _require(0 <= p["theta"] <= math.pi, "theta", "must lie in [0, pi]")
        _require(0 <= p["phi"] < 2 * math.pi, "phi", "must lie in [0, 2pi)")
    if "frame" in p:
        _require(p["frame"] in ("critical", "interaction"), "frame",
                 "must be 'critical' or 'interaction'")
    if "bins" in p:
        _require(p["bins"] >= 10, "bins", "must be >= 10")
    _require(p["format"] in ("csv", "json"), "format", "must be 'csv' or 'json'")
    for lo, hi in (("lambda_min", "lambda_max"), ("alpha_min", "alpha_max"),
                   ("n_min", "n_max"), ("tau_min", "tau_max")):
        if lo in p:
            _require(p[lo] <= p[hi], lo, f"{lo} exceeds {hi}")
    if "lambda_min" in p:
        _require(p["lambda_min"] >= 0, "lambda_min", "must be >= 0")
        try:
            _lambda_grid(p)
        except ValueError as exc:
            raise ConfigError("lambda_step", str(exc)) from exc
    if config.command == "spectrum":
        _require(0 <= p["alpha_min"] and p["alpha_max"] <= 1, "alpha_min",
                 "alpha grid must lie in [0, 1]")
        _require(len(_alpha_grid(p)) >= 5, "alpha_step", "alpha grid needs >= 5 points")
    if config.command == "critical-locus":
        _require(0 <= p["alpha_min"] and p["alpha_max"] <= 0.72 + 1e-12, "alpha_max",
                 "critical locus alphas must lie in [0, 0.72]")
        for a in _alpha_grid(p):
            try:
                ex.lambda_grid(float(a), p["lambda_min"], p["lambda_max"], p["lambda_step"])
            except ValueError as exc:
                raise ConfigError("lambda_step", f"alpha={a:g}: {exc}") from exc
    if config.command == "scaling":
        sizes = _size_grid(p)
        _require(len(sizes) >= 5, "n_step", "size scaling needs at least 5 sizes")
        _require(all(n % 2 == 0 and n >= 2 for n in sizes), "n_min", "all sizes must be even")


def _lambda_grid(p) -> ex.ScanGrid:
    return ex.lambda_grid(p.get("alpha", 0.0), p["lambda_min"], p["lambda_max"],
                          p["lambda_step"], require_critical="alpha" in p)


def _alpha_grid(p) -> np.ndarray:
    return ex.uniform_grid(p["alpha_min"], p["alpha_max"], p["alpha_step"])


def _size_grid(p) -> list[int]:
    return list(range(p["n_min"], p["n_max"] + 1, p["n_step"]))


# ---------------------------------------------------------------- commands


def _grid_hash(values) -> str:
    text = ",".join(_fmt(float(v)) for v in np.asarray(values).ravel())
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _metadata(config: RunConfig, grids: dict[str, Any], **results) -> dict[str, Any]:
    meta: dict[str, Any] = {"command": config.command, "version": __version__}
    meta.update({f"param.{k}": v for k, v in sorted(config.params.items())})
    meta.update({f"grid_sha256.{k}": _grid_hash(v) for k, v in grids.items()})
    meta.update({f"result.{k}": v for k, v in results.items()})
    return meta


def _table(name, columns, rows, meta) -> OutputTable:
    rows = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    return OutputTable(name, list(columns), rows, meta)


def _run_spectrum(config: RunConfig):
    p = config.params
    alphas = _alpha_grid(p)
    meta = _metadata(config, {"alpha": alphas})
    level_rows, curv_rows = [], []
    for code, block in ((1, "even"), (-1, "odd"), (0, "full")):
        lc = level_curves(p["n"], alphas, block)
        n_levels = lc.energies.shape[1]
        if code:
            for n in range(n_levels):
                level_rows += [(a, code, n, e) for a, e in zip(lc.alphas, lc.energies[:, n])]
        for n in range(n_levels):
            curv_rows += [(a, code, n, c) for a, c in zip(lc.curvature_alphas, lc.curvature[:, n])]
    tables = {
        "levels": _table("levels", ("alpha", "parity", "level", "energy"), level_rows, meta),
        "curvature": _table("curvature", ("alpha", "parity", "level", "curvature"),
                            curv_rows, meta),
    }
    return tables, {"levels": [n for n in (10, 20) if n <= p["n"]]}


def _run_dos(config: RunConfig):
    p = config.params
    basis = build_basis(p["n"])
    spec = diagonalize(build_lmg(basis, p["alpha"], "even"), eigvals_only=True)
    hist = dos_histogram(spec, p["bins"])
    cl = classical_dos(p["n"], p["alpha"], hist.energies, p["resolution"])
    meta = _metadata(config, {"energy": hist.energies},
                     histogram_peak=hist.energies[np.argmax(hist.density)],
                     classical_peak=cl.energies[np.argmax(cl.density)],
                     classical_integral=cl.norm)
    cols = ("energy", "density", "density_normalized")
    return {
        "histogram": _table("histogram", cols,
                            np.column_stack([hist.energies, hist.density, hist.normalized()]),
                            meta),
        "classical": _table("classical", cols,
                            np.column_stack([cl.energies, cl.density, cl.normalized()]), meta),
    }, {}


def _critical_or(p) -> float:
    return ex.analytic_critical_coupling(p["alpha"]) if p.get("lambda") is None else p["lambda"]


def _run_quench(config: RunConfig):
    p = config.params
    lam = _critical_or(p)
    dec = decompose_quench(p["n"], p["alpha"], lam, p["frame"])
    series = decoherence_series(dec, p["tau_e"], dt=p["dt"])
    omega, a = strength_and_A(dec, p["bins"])
    mean, var = energy_moments(dec)
    sample = refined_metrics(dec, [p["tau_e"]], QubitAngles(p["theta"], p["phi"]))[0]
    meta = _metadata(config, {"t": series.t, "energy": omega.energies}, lambda_used=lam,
                     mean_energy=mean, variance=var, tau_qsl=sample.tau_qsl, nm=sample.nm)
    w, e = dec.active()
    return {
        "strength": _table("strength", ("energy", "omega", "A"),
                           np.column_stack([omega.energies, omega.density, a.density]), meta),
        "levels": _table("levels", ("energy", "weight", "weighted"),
                         np.column_stack([e, w, w * e]), meta),
        "series": _table("series", ("t", "re_M", "im_M", "abs_M", "rate"),
                         np.column_stack([series.t, series.M.real, series.M.imag,
                                          np.abs(series.M), series.rate]), meta),
        "moments": _table("moments", ("lambda", "mean", "variance", "tau_qsl", "nm"),
                          [(lam, mean, var, sample.tau_qsl, sample.nm)], meta),
    }, {}


def _run_scan(config: RunConfig, metric: str):
    p = config.params
    grid = _lambda_grid(p)
    fn = ex.lambda_scan if metric == "tau_qsl" else ex.nm_scan
    kwargs = {"theta": p["theta"]} if "theta" in p else {}
    scan = fn(grid, p["n"], p["alpha"], p["tau_e"], frame=p["frame"], **kwargs)
    lc = ex.analytic_critical_coupling(p["alpha"])
    meta = _metadata(config, {"lambda": grid.values}, argmax_lambda=scan.argmax,
                     max_value=scan.max_value, lambda_c_analytic=lc)
    rows = [(lam, s.tau_qsl, s.gamma_inf, s.nm) for lam, s in zip(grid.values, scan.samples)]
    return {"scan": _table("scan", ("lambda", "tau_qsl", "gamma_inf", "nm"), rows, meta)}, {
        "mark": lc
    }


def _run_scaling(config: RunConfig):
    p = config.params
    sizes = _size_grid(p)
    lam = _critical_or(p)
    fit, taus = ex.size_scaling(sizes, p["alpha"], p["tau_e"], lam, p["frame"])
    meta = _metadata(config, {"N": sizes}, lambda_used=lam, mu=fit.mu)
    return {
        "tau_qsl": _table("tau_qsl", ("N", "tau_qsl", "one_minus_tau"),
                          np.column_stack([sizes, taus, p["tau_e"] - taus]), meta),
        "fit": _table("fit", ("mu", "intercept", "rss", "n_points"),
                      [(fit.mu, fit.intercept, fit.rss, fit.n)], meta),
    }, {}


def _run_locus(config: RunConfig):
    p = config.params
    alphas = _alpha_grid(p)
    lam_range = (p["lambda_min"], p["lambda_max"], p["lambda_step"])
    rows = ex.critical_locus(alphas, p["n"], p["tau_e"], lam_range, p["frame"])
    meta = _metadata(config, {"alpha": alphas},
                     max_abs_deviation=float(np.max(np.abs(rows[:, 1] - rows[:, 2]))))
    return {"locus": _table("locus", ("alpha", "lambda_c_numeric", "lambda_c_analytic"),
                            rows, meta)}, {}


def _run_heatmap(config: RunConfig):
    p = config.params
    taus = ex.uniform_grid(p["tau_min"], p["tau_max"], p["tau_step"])
    grid = _lambda_grid(p)
    hm = ex.qsl_heatmap(taus, grid, p["n"], p["alpha"], p["theta"], p["frame"])
    meta = _metadata(config, {"tau_e": taus, "lambda": grid.values})
    long_rows = [(t, lam, hm.tau_qsl[i, j]) for i, t in enumerate(taus)
                 for j, lam in enumerate(hm.lambdas)]
    max_rows = [(t, hm.lambdas[j], hm.tau_qsl[i, j]) for i, (t, j) in
                enumerate(zip(taus, hm.row_argmax))]
    return {
        "tau_qsl": _table("tau_qsl", ("tau_e", "lambda", "tau_qsl"), long_rows, meta),
        "row_max": _table("row_max", ("tau_e", "lambda_argmax", "tau_qsl_max"), max_rows, meta),
    }, {}


RUNNERS = {
    "spectrum": _run_spectrum,
    "dos": _run_dos,
    "quench": _run_quench,
    "qsl-scan": lambda c: _run_scan(c, "tau_qsl"),
    "scaling": _run_scaling,
    "critical-locus": _run_locus,
    "heatmap": _run_heatmap,
    "nm-scan": lambda c: _run_scan(c, "nm"),
}


def compute(config: RunConfig) -> tuple[dict[str, OutputTable], dict]:
    """Run the experiment for ``config``; returns (tables by panel, plot options)."""
    return RUNNERS[config.command](config)


def write_tables(config: RunConfig, tables: dict[str, OutputTable], plot_opts: dict) -> list[Path]:
    """Write every table (and the figure) or nothing: partial files are removed."""
    fmt = config.params["format"]
    stem = config.command.replace("-", "_")
    written: list[Path] = []
    try:
        config.out.mkdir(parents=True, exist_ok=True)
        for name, table in tables.items():
            path = config.out / f"{stem}_{name}.{fmt}"
            text = table.to_csv() if fmt == "csv" else table.to_json()
            _atomic_write(path, text.encode("utf-8"), written)
        if config.params["figures"]:
            from . import plotting

            path = config.out / f"{stem}.png"
            tmp = path.with_name(path.stem + ".part.png")
            written.append(tmp)
            plotting.RENDERERS[config.command](tables, tmp, **plot_opts)
            os.replace(tmp, path)
            written[-1] = path
    except OSError:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return written


def _atomic_write(path: Path, data: bytes, written: list[Path]) -> None:
    tmp = path.with_name(path.name + ".part")
    written.append(tmp)
    tmp.write_bytes(data)
    os.replace(tmp, path)
    written[-1] = path


def run(config: RunConfig) -> list[Path]:
    tables, plot_opts = compute(config)
    return write_tables(config, tables, plot_opts)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(f"lmgqsl: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        paths = run(config)
    except (NumericalError, LinAlgError, FloatingPointError) as exc:
        print(f"lmgqsl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"lmgqsl: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"lmgqsl: I/O failure on {exc.filename or config.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
