"""Command-line front end.

Usage::

    lindspec {spectrum,steady,gap,scan,evolve,fit-bifurcation,sectors} --config run.json
             [--out PATH] [--threads N] [--seed S]

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 analysis failure.
"""
import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import analysis, dynamics, spectra
from . import operators as ops
from .errors import ConfigError, LindspecError, NotFoundError
from .liouville import build_liouvillian
from .models import BUILDERS, build_model, model_params
from .symmetry import number_parity_symmetry, sector_decompose

log = logging.getLogger("lindspec")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_ANALYSIS = 0, 2, 3, 4


@dataclass
class SolverConfig:
    mode: str = "shift_invert"
    k: int = 6
    shift: float = None
    zero_tol: float = None
    im_tol: float = None
    residual_tol: float = 1e-9
    seed: int = 42


@dataclass
class ScanConfig:
    parameter: str = None
    min: float = None
    max: float = None
    steps: int = None
    n: list = field(default_factory=list)
    cutoff: int = None
    symmetry: int = None
    sector: int = None
    # precomputed (N, G_B) pairs for fit-bifurcation; skips the scans
    points: list = None

    def grid(self):
        return np.linspace(self.min, self.max, self.steps)


@dataclass
class EvolveConfig:
    t_max: float = 10.0
    steps: int = 101
    initial: str = "ground"


@dataclass
class OutputConfig:
    path: str = None
    format: str = "csv"


@dataclass
class RunConfig:
    model: dict
    solver: SolverConfig = field(default_factory=SolverConfig)
    scan: ScanConfig = None
    evolve: EvolveConfig = field(default_factory=EvolveConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    symmetry: int = 2

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{name}: unknown field(s) {unknown}")
    return cls(**data)


def _positive(name, value, allow_none=True):
    if value is None and allow_none:
        return
    if not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{name}: must be a positive number, got {value!r}")


def parse_config(data):
    """Validate a decoded JSON mapping into a RunConfig."""
    if not isinstance(data, dict):
        raise ConfigError("top level: expected an object")
    unknown = sorted(set(data) - {f.name for f in dataclasses.fields(RunConfig)})
    if unknown:
        raise ConfigError(f"top level: unknown field(s) {unknown}")
    model = data.get("model")
    if not isinstance(model, dict) or "type" not in model:
        raise ConfigError("model: expected an object with a 'type' field")
    if model["type"] not in BUILDERS:
        raise ConfigError(f"model.type: unknown model {model['type']!r}; "
                          f"expected one of {sorted(BUILDERS)}")
    solver = _section(SolverConfig, data.get("solver"), "solver")
    if solver.mode not in ("dense", "shift_invert"):
        raise ConfigError(f"solver.mode: expected 'dense' or 'shift_invert', got {solver.mode!r}")
    if not isinstance(solver.k, int) or solver.k < 1:
        raise ConfigError(f"solver.k: must be a positive integer, got {solver.k!r}")
    for name in ("zero_tol", "im_tol", "residual_tol"):
        _positive(f"solver.{name}", getattr(solver, name))
    scan = None
    if data.get("scan") is not None:
        scan = _section(ScanConfig, data["scan"], "scan")
        if scan.points is None:
            if scan.parameter not in model_params(model["type"]):
                raise ConfigError(f"scan.parameter: {scan.parameter!r} is not a parameter of "
                                  f"model {model['type']!r}")
            if not isinstance(scan.steps, int) or scan.steps < 2:
                raise ConfigError(f"scan.steps: need an integer >= 2, got {scan.steps!r}")
            if scan.min is None or scan.max is None or not scan.max > scan.min:
                raise ConfigError("scan.min/scan.max: need min < max")
        if not isinstance(scan.n, list):
            raise ConfigError("scan.n: expected a list of N values")
    evolve = _section(EvolveConfig, data.get("evolve"), "evolve")
    _positive("evolve.t_max", evolve.t_max, allow_none=False)
    if not isinstance(evolve.steps, int) or evolve.steps < 2:
        raise ConfigError(f"evolve.steps: need an integer >= 2, got {evolve.steps!r}")
    if evolve.initial not in ("ground", "mixed", "top"):
        raise ConfigError(f"evolve.initial: expected ground|mixed|top, got {evolve.initial!r}")
    output = _section(OutputConfig, data.get("output"), "output")
    if output.format not in ("csv", "json"):
        raise ConfigError(f"output.format: expected csv or json, got {output.format!r}")
    sym = data.get("symmetry", 2)
    if not isinstance(sym, int) or sym < 2:
        raise ConfigError(f"symmetry: need an integer >= 2, got {sym!r}")
    return RunConfig(dict(model), solver, scan, evolve, output, sym)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from exc
    return parse_config(data)


def _header(cfg):
    return f"lindspec {__version__} config={cfg.digest()}"


def _table(cfg, header, rows):
    buf = io.StringIO()
    buf.write(f"# {_header(cfg)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x):
    return f"{x:.15g}" if isinstance(x, float) else x


def _json(cfg, payload):
    return json.dumps({"meta": _header(cfg), **payload}, indent=2, sort_keys=True) + "\n"


def _model(cfg):
    try:
        return build_model(cfg.model)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def _spectrum(cfg, sm):
    k = cfg.solver.k
    if k > sm.size:
        log.warning("k=%d exceeds the Liouvillian size %d; clamped", k, sm.size)
        k = sm.size
    opts = dict(zero_tol=cfg.solver.zero_tol, im_tol=cfg.solver.im_tol)
    if cfg.solver.mode == "dense" or k >= sm.size - 1:
        spec = spectra.full_spectrum(sm, left=False, **opts)
        spec.pairs = spec.pairs[:k]
        return spec
    return spectra.leading_spectrum(sm, k=k, shift=cfg.solver.shift, seed=cfg.solver.seed,
                                    residual_tol=cfg.solver.residual_tol, **opts)


def cmd_spectrum(cfg, workers):
    spec = _spectrum(cfg, build_liouvillian(_model(cfg)))
    if cfg.output.format == "json":
        return _json(cfg, spec.to_dict())
    rows = [[p.index, _fmt(p.value.real), _fmt(p.value.imag), _fmt(abs(p.trace)),
             f"{p.residual:.6g}"] for p in spec.pairs]
    return _table(cfg, ["index", "re", "im", "trace_abs", "residual"], rows)


def cmd_steady(cfg, workers):
    model = _model(cfg)
    sm = build_liouvillian(model)
    rho = spectra.steady_state(sm, spectrum=_spectrum(cfg, sm) if cfg.solver.k > 1 else None)
    if cfg.output.format == "json":
        return _json(cfg, {"dim": model.dim, "re": rho.real.tolist(), "im": rho.imag.tolist(),
                           "purity": float(np.trace(rho @ rho).real)})
    rows = [[m, n, _fmt(float(rho[m, n].real)), _fmt(float(rho[m, n].imag))]
            for m in range(model.dim) for n in range(model.dim)]
    return _table(cfg, ["row", "col", "re", "im"], rows)


def cmd_gap(cfg, workers):
    spec = _spectrum(cfg, build_liouvillian(_model(cfg)))
    gap, im = spectra.liouvillian_gap(spec)
    if cfg.output.format == "json":
        return _json(cfg, {"gap": gap, "im_lambda1": im})
    return _table(cfg, ["gap", "im_lambda1"], [[_fmt(gap), _fmt(im)]])


def _family(cfg):
    kind = cfg.model["type"]
    base = {k: v for k, v in cfg.model.items() if k not in ("n", "cutoff", cfg.scan.parameter)}

    def family(zeta, n, cutoff=None):
        conf = {**base, cfg.scan.parameter: float(zeta)}
        if kind.endswith("thermo"):
            conf.update(n=n, cutoff=cutoff)
        elif kind != "two_level":
            conf["cutoff"] = cfg.model.get("cutoff") if cutoff is None else cutoff
        return build_model(conf)

    return family


def _n_values(cfg):
    if cfg.scan.n:
        return cfg.scan.n
    return [cfg.model.get("n", 1)]


def _cutoff(cfg):
    if cfg.scan.cutoff is not None:
        return cfg.scan.cutoff
    return cfg.model.get("cutoff")


def _require_scan(cfg):
    if cfg.scan is None:
        raise ConfigError("scan: this command needs a 'scan' block")


def _run_scan(cfg, n, workers):
    family = _family(cfg)
    return analysis.scan(family, cfg.scan.grid(), n, k=cfg.solver.k, cutoff=_cutoff(cfg),
                         symmetry=cfg.scan.symmetry, sector=cfg.scan.sector, workers=workers,
                         seed=cfg.solver.seed)


def cmd_scan(cfg, workers):
    _require_scan(cfg)
    records = [r for n in _n_values(cfg) for r in _run_scan(cfg, n, workers)]
    if cfg.output.format == "json":
        return _json(cfg, {"records": [{k: (v if not isinstance(v, float) or math.isfinite(v)
                                            else None) for k, v in r.row().items()}
                                       for r in records]})
    return analysis.scan_csv(records, _header(cfg))


def _initial_state(cfg, dim):
    if cfg.evolve.initial == "mixed":
        return np.eye(dim, dtype=complex) / dim
    k = 0 if cfg.evolve.initial == "ground" else dim - 1
    return ops.basis_projector(dim, k)


def cmd_evolve(cfg, workers):
    model = _model(cfg)
    sm = build_liouvillian(model)
    times = np.linspace(0.0, cfg.evolve.t_max, cfg.evolve.steps)
    if model.kind == "two_level":
        obs = {"sx": ops.sigma_x(), "sy": ops.sigma_y(), "sz": ops.sigma_z()}
    else:
        obs = {"n": ops.number(model.dim)}
    rec = dynamics.evolve_trajectory(sm, _initial_state(cfg, model.dim), times, obs)
    rec.tracks["trace"] = np.array([np.trace(s).real for s in rec.states])
    if cfg.output.format == "json":
        return _json(cfg, {"t": times.tolist(), **{k: v.tolist() for k, v in rec.tracks.items()}})
    return f"# {_header(cfg)}\n" + rec.to_csv()


def cmd_fit_bifurcation(cfg, workers):
    _require_scan(cfg)
    table = []
    if cfg.scan.points is not None:
        table = [{"N": float(n), "G_B": float(g), "error": None} for n, g in cfg.scan.points]
    else:
        family = _family(cfg)
        for n in _n_values(cfg):
            try:
                gb = analysis.locate_bifurcation(
                    family, n, cfg.scan.grid(), cfg.solver.k, _cutoff(cfg), cfg.scan.symmetry,
                    cfg.scan.sector, cfg.solver.im_tol, cfg.solver.seed, workers)
                table.append({"N": float(n), "G_B": gb, "error": None})
            except NotFoundError as exc:
                log.warning("N=%s: %s", n, exc)
                table.append({"N": float(n), "G_B": None, "error": str(exc)})
    usable = [(row["N"], row["G_B"]) for row in table if row["G_B"] is not None]
    report = {"table": table}
    status = EXIT_OK
    if len(usable) < 4:
        report["error"] = f"only {len(usable)} usable N values; the fit needs 4"
        status = EXIT_ANALYSIS
    else:
        fit = analysis.power_law_fit(usable)
        report.update({"A": fit.amplitude, "exponent": fit.exponent, "G_c": fit.critical_value,
                       "residual": fit.residual, "covariance": fit.covariance})
    return _json(cfg, report), status


def cmd_sectors(cfg, workers):
    model = _model(cfg)
    sm = build_liouvillian(model, explicit=True)
    dec = sector_decompose(sm, number_parity_symmetry(model.dim, cfg.symmetry))
    k = cfg.solver.k
    summary = dec.summary(k=k, workers=workers, seed=cfg.solver.seed)
    return _json(cfg, summary)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "steady": cmd_steady,
    "gap": cmd_gap,
    "scan": cmd_scan,
    "evolve": cmd_evolve,
    "fit-bifurcation": cmd_fit_bifurcation,
    "sectors": cmd_sectors,
}


def build_parser():
    p = argparse.ArgumentParser(prog="lindspec", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output file (default: output.path, else stdout)")
    p.add_argument("--threads", type=int, help="worker threads for scans and sectors")
    p.add_argument("--seed", type=int, help="seed for iterative-solver start vectors")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _writable(path):
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise OSError(f"cannot write to {path}")
    if os.path.isdir(path):
        raise OSError(f"{path} is a directory")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.solver.seed = args.seed
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output.path
    try:
        if out:
            _writable(out)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    workers = args.threads or analysis.default_workers()
    try:
        result = COMMANDS[args.command](cfg, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LindspecError, ArithmeticError, np.linalg.LinAlgError, RuntimeError,
            ValueError) as exc:
        print(f"analysis failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    text, status = result if isinstance(result, tuple) else (result, EXIT_OK)
    try:
        if out:
            with open(out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return status
