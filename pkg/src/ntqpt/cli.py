"""Command-line front end: ``ntqpt {spectrum,quench,sweep,exponents,validate}``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import replace
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .cache import SpectrumCache
from .config import COMMANDS, PRESETS, RunConfig, load_preset, parse_config
from .errors import NtqptError
from .models import semiclassical_critical_energy
from .parallel import ordered_map
from .scaling import collect_size_records, exponents_from_records, sweep_order_parameter
from .spectral import diagonalize_by_parity, pair_doublets
from .validation import run_oracle_suite

log = logging.getLogger("ntqpt")

SPECTRUM_COLUMNS = ("index", "energy", "excitation_energy", "parity", "doublet_id", "splitting")
SWEEP_COLUMNS = ("model", "N", "lambda_i", "lambda_f", "E_f_excitation", "reduced_e", "order_param_intensive",
                 "order_param_extensive", "work_per_particle", "trunc_deficit")
DEFAULT_ANCHOR = {"spectrum": "fig2", "quench": "fig2", "sweep": "fig2", "exponents": "table1", "validate": None}


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def _float_repr(obj):
    """JSON-ready copy with every float rendered to 17 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _float_repr(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_float_repr(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float("%.17g" % obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def json_text(obj) -> str:
    return json.dumps(_float_repr(obj), indent=2, sort_keys=True) + "\n"


def _lam_tag(x: float) -> str:
    return ("%g" % x).replace("-", "m").replace(".", "p")


def _spectrum_task(cfg: RunConfig, cache, N: int):
    spec = cfg.sweep_spec().spec_for(N)
    raw = diagonalize_by_parity(spec, cache=cache)
    ec = semiclassical_critical_energy(spec) - raw.ground_energy
    paired = pair_doublets(raw, ec, criterion=cfg.pairing)
    doublet = {}
    for j, d in enumerate(paired.doublets()):
        doublet[(1, d.index_plus)] = (j, d.splitting)
        doublet[(-1, d.index_minus)] = (j, d.splitting)
    e, par, idx = paired.merged()
    rows = []
    for i, (energy, p, k) in enumerate(zip(e, par, idx)):
        j, s = doublet.get((int(p), int(k)), (-1, float("nan")))
        rows.append(dict(index=i, energy=float(energy), excitation_energy=float(energy - paired.ground_energy),
                         parity=int(p), doublet_id=j, splitting=s))
    return spec, rows, paired.diagnostics


def run(cfg: RunConfig, preset: str | None = None, config_text: str | None = None) -> int:
    """Execute one command; write outputs and a manifest into ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = SpectrumCache.from_env(cfg.cache_dir)
    files: dict[str, str] = {}
    failures: list[str] = []
    extra: dict = {}

    def write(name, text):
        (out / name).write_text(text)
        files[name] = hashlib.sha256(text.encode()).hexdigest()

    if cfg.command == "validate":
        checks = run_oracle_suite()
        width = max(len(c.name) for c in checks)
        lines = [f"{c.name:<{width}}  {c.value:.3e}  <  {c.tolerance:.0e}  {'PASS' if c.passed else 'FAIL'}"
                 for c in checks]
        print("\n".join(lines))
        failures = [c.name for c in checks if not c.passed]
        print(f"{len(checks) - len(failures)}/{len(checks)} checks passed")
        write("validate.txt", "\n".join(lines) + "\n")
    elif cfg.command == "spectrum":
        results = ordered_map(partial(_spectrum_task, cfg, cache), cfg.sizes, cfg.workers)
        diag = {}
        for spec, rows, d in results:
            write(f"spectrum_{spec.model.value}_N{spec.N}_lam{_lam_tag(spec.lam)}.csv",
                  csv_text(SPECTRUM_COLUMNS, rows))
            diag[str(spec.N)] = d
        extra["pairing_diagnostics"] = diag
    elif cfg.command in ("quench", "sweep"):
        curves = sweep_order_parameter(cfg.sweep_spec(), cache=cache, workers=cfg.workers)
        rows = []
        for curve in curves:
            for pt in curve.points:
                if pt.result is None:
                    failures.append(f"N={curve.N} grid={fmt(pt.grid_value)}: {pt.error}")
                else:
                    rows.append(pt.result.row())
        write(f"sweep_{cfg.model.value}_lf{_lam_tag(cfg.lambda_f)}.csv", csv_text(SWEEP_COLUMNS, rows))
    elif cfg.command == "exponents":
        sw = cfg.sweep_spec()
        records = collect_size_records(sw, cache=cache, workers=cfg.workers)
        for r in records:
            failures.extend(f"N={r.N} {det}: {msg}" for det, msg in r.errors.items() if det == sw.detector)
        try:
            report = exponents_from_records(sw, records)
        except NtqptError as exc:
            failures.append(str(exc))
        else:
            d = report.as_dict()
            d["precursors"] = {str(r.N): dict(critical_energy=r.critical_energy, **r.precursors) for r in records}
            write(f"exponents_{cfg.model.value}.json", json_text(d))
            loglog = [dict(series=name, N=n, ln_N=float(np.log(n)), ln_value=float(np.log(v)))
                      for name, fit in (("zeta", report.zeta), ("nu", report.nu)) for n, v in fit.points]
            write(f"exponents_{cfg.model.value}_loglog.csv", csv_text(("series", "N", "ln_N", "ln_value"), loglog))
            print(f"{report.model}: zeta = {report.zeta.exponent:.4f} +- {report.zeta.stderr_exponent:.4f}, "
                  f"nu = {report.nu.exponent:.4f} +- {report.nu.stderr_exponent:.4f}, "
                  f"beta = {report.beta:.4f} +- {report.beta_err:.4f} [{report.quality}]")
    else:  # pragma: no cover - guarded by the parser
        raise NtqptError(f"unknown command {cfg.command}")

    settings = cfg.as_dict()
    for k in ("workers", "out_dir", "cache_dir"):  # execution details, not physics
        settings.pop(k)
    manifest = dict(command=cfg.command, anchor=cfg.anchor or DEFAULT_ANCHOR[cfg.command], preset=preset,
                    version=__version__, config=settings, files=dict(sorted(files.items())),
                    config_sha256=hashlib.sha256(config_text.encode()).hexdigest() if config_text else None,
                    failures=failures, **extra)
    (out / "manifest.json").write_text(json_text(manifest))
    for f in failures:
        log.error("failed: %s", f)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ntqpt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="TOML run file")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--workers", type=int)
        p.add_argument("--cache", help="spectrum cache directory (overrides $NTQPT_CACHE_DIR)")
        p.add_argument("--out", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    text = None
    try:
        if args.config and args.preset:
            raise NtqptError("use --config or --preset, not both")
        if args.config:
            text = args.config.read_text()
            cfg = parse_config(text, command=args.command)
        elif args.preset:
            cfg = load_preset(args.preset, command=args.command)
        elif args.command == "validate":
            cfg = RunConfig(command="validate")
        else:
            raise NtqptError(f"{args.command} needs --config or --preset")
        overrides = {k: v for k, v in (("workers", args.workers), ("cache_dir", args.cache), ("out_dir", args.out))
                     if v is not None}
        if overrides.get("workers", 1) < 1:
            raise NtqptError("--workers must be >= 1")
        cfg = replace(cfg, **overrides)
        return run(cfg, preset=args.preset, config_text=text)
    except (NtqptError, OSError) as exc:
        print(f"ntqpt: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
