"""Run configuration: strict TOML parsing, defaults and named presets.

Grammar (TOML)::

    command = "sweep"            # spectrum | quench | sweep | exponents | validate
    anchor = "fig2"              # optional: fig2 | fig3 | table1

    [model]
    name = "LMG"                 # BH | LMG | Dicke
    J_hop = 1.0                  # BH only
    omega = 1.0                  # Dicke only
    omega0 = 1.0                 # Dicke only
    n_max = "auto"               # Dicke only: "auto" or a positive integer

    [run]
    sizes = [200, 500]
    lambda_f = 0.7               # default -7 (BH), 0.7 (LMG), 0.75 (Dicke)
    # exactly one of the next three for quench / sweep
    lambda_i = 0.4
    lambda_i_grid = [0.3, 0.4, 0.5]
    target_e_grid = [-0.5, 0.0, 0.5]
    branch = 1
    epsilon_scale = 1.0
    pairing = "semiclassical"    # semiclassical | splitting

    [detector]
    name = "density_peak"        # doublet_splitting | density_peak | min_gap
    threshold_fraction = 0.5
    window = 11
    bandwidth_spacings = 5.0

    [output]
    dir = "out"
    workers = 1
    cache = "/path/to/cache"     # optional

Unknown keys and sections are errors, reported with their line number.
"""
from __future__ import annotations

import re
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError
from .models import Model, ModelSpec
from .scaling import DEFAULT_LAMBDA_F, SweepSpec
from .spectral import DETECTORS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

COMMANDS = ("spectrum", "quench", "sweep", "exponents", "validate")
ANCHORS = ("fig2", "fig3", "table1")
SCHEMA = {
    None: {"command": str, "anchor": str},
    "model": {"name": str, "J_hop": float, "omega": float, "omega0": float, "n_max": (str, int)},
    "run": {"sizes": list, "lambda_f": float, "lambda_i": float, "lambda_i_grid": list, "target_e_grid": list,
            "branch": int, "epsilon_scale": float, "pairing": str},
    "detector": {"name": str, "threshold_fraction": float, "window": int, "bandwidth_spacings": float},
    "output": {"dir": str, "workers": int, "cache": str},
}
DETECTOR_PARAMS = {
    "doublet_splitting": ("threshold_fraction", "window"),
    "density_peak": ("bandwidth_spacings",),
    "min_gap": ("window",),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: Model | None = None
    sizes: tuple = ()
    lambda_f: float | None = None
    lambda_i: float | None = None
    lambda_i_grid: tuple | None = None
    target_e_grid: tuple | None = None
    branch: int = 1
    epsilon_scale: float = 1.0
    pairing: str = "semiclassical"
    detector: str = "density_peak"
    detector_params: dict = field(default_factory=dict)
    j_hop: float = 1.0
    omega: float = 1.0
    omega0: float = 1.0
    n_max: int | None = None  # None: adaptive
    out_dir: str = "out"
    workers: int = 1
    cache_dir: str | None = None
    anchor: str | None = None

    def template(self) -> ModelSpec:
        n_max = self.n_max if self.model is Model.DICKE else None
        return ModelSpec(self.model, self.sizes[0], self.lambda_f, j_hop=self.j_hop, omega=self.omega,
                         omega0=self.omega0, n_max=n_max)

    def sweep_spec(self) -> SweepSpec:
        grid = self.lambda_i_grid
        if self.lambda_i is not None:
            grid = (self.lambda_i,)
        return SweepSpec(self.template(), self.sizes, self.lambda_f, lambda_i_grid=grid,
                         target_e_grid=self.target_e_grid, epsilon_scale=self.epsilon_scale,
                         detector=self.detector, detector_params=dict(self.detector_params),
                         branch=self.branch, pairing=self.pairing, fixed_n_max=self.n_max)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.value if self.model else None
        for k in ("sizes", "lambda_i_grid", "target_e_grid"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d


def _line_of(text: str | None, section: str | None, key: str) -> int | None:
    """Line number of ``key`` inside ``[section]`` (None: top level)."""
    if not text:
        return None
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        head = re.match(r"\s*\[\s*([^\]]+?)\s*\]", line)
        if head:
            current = head.group(1)
            if section is not None and current == section and key is None:
                return i
            continue
        if current == section and re.match(rf"\s*{re.escape(key)}\s*=", line):
            return i
    return None


def _check_type(value, expected, where, line):
    if expected is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif expected is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(expected, tuple):
        ok = any(_check_type_ok(value, t) for t in expected)
    else:
        ok = isinstance(value, expected)
    if not ok:
        raise ConfigurationError(f"{where}: wrong type {type(value).__name__}", line)


def _check_type_ok(value, t):
    try:
        _check_type(value, t, "", None)
        return True
    except ConfigurationError:
        return False


def _numbers(values, where, line, integer=False):
    out = []
    for v in values:
        good = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not good:
            raise ConfigurationError(f"{where}: expected a list of {'integers' if integer else 'numbers'}", line)
        out.append(int(v) if integer else float(v))
    return tuple(out)


def config_from_dict(data: dict, text: str | None = None, command: str | None = None) -> RunConfig:
    """Validate a parsed configuration tree and apply defaults."""
    for key, value in data.items():
        if key in SCHEMA and key is not None:
            if not isinstance(value, dict):
                raise ConfigurationError(f"[{key}] must be a section", _line_of(text, None, key))
            for sub, v in value.items():
                line = _line_of(text, key, sub)
                if sub not in SCHEMA[key]:
                    raise ConfigurationError(f"unknown key {key}.{sub}", line)
                _check_type(v, SCHEMA[key][sub], f"{key}.{sub}", line)
        elif key in SCHEMA[None]:
            _check_type(value, SCHEMA[None][key], key, _line_of(text, None, key))
        else:
            line = _line_of(text, None, key) or _line_of(text, key, None)
            raise ConfigurationError(f"unknown key or section {key!r}", line)
    model_s, run_s = data.get("model", {}), data.get("run", {})
    det_s, out_s = data.get("detector", {}), data.get("output", {})

    cmd = command or data.get("command")
    if cmd not in COMMANDS:
        raise ConfigurationError(f"command must be one of {COMMANDS}, got {cmd!r}", _line_of(text, None, "command"))
    anchor = data.get("anchor")
    if anchor is not None and anchor not in ANCHORS:
        raise ConfigurationError(f"anchor must be one of {ANCHORS}", _line_of(text, None, "anchor"))
    kw = dict(command=cmd, anchor=anchor)
    if cmd == "validate":
        return RunConfig(**kw, out_dir=out_s.get("dir", "out"), workers=out_s.get("workers", 1),
                         cache_dir=out_s.get("cache"))

    if "name" not in model_s:
        raise ConfigurationError("model.name is required", _line_of(text, "model", None))
    model = Model.parse(model_s["name"])
    for key, only in (("J_hop", Model.BH), ("omega", Model.DICKE), ("omega0", Model.DICKE), ("n_max", Model.DICKE)):
        if key in model_s and model is not only:
            raise ConfigurationError(f"model.{key} only applies to {only.value}", _line_of(text, "model", key))
    n_max = model_s.get("n_max", "auto")
    if isinstance(n_max, str):
        if n_max != "auto":
            raise ConfigurationError('model.n_max must be "auto" or an integer', _line_of(text, "model", "n_max"))
        n_max = None
    elif n_max < 1:
        raise ConfigurationError("model.n_max must be positive", _line_of(text, "model", "n_max"))

    if "sizes" not in run_s:
        raise ConfigurationError("run.sizes is required", _line_of(text, "run", None))
    sizes = _numbers(run_s["sizes"], "run.sizes", _line_of(text, "run", "sizes"), integer=True)
    if not sizes or any(n < 1 for n in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigurationError("run.sizes must be positive and strictly increasing", _line_of(text, "run", "sizes"))

    given = [k for k in ("lambda_i", "lambda_i_grid", "target_e_grid") if k in run_s]
    if cmd in ("quench", "sweep") and len(given) != 1:
        raise ConfigurationError(f"{cmd} needs exactly one of lambda_i, lambda_i_grid, target_e_grid; got {given or 'none'}",
                                 _line_of(text, "run", given[1]) if len(given) > 1 else None)
    if cmd in ("spectrum", "exponents") and given:
        raise ConfigurationError(f"run.{given[0]} is not used by {cmd}", _line_of(text, "run", given[0]))
    grids = {}
    for k in ("lambda_i_grid", "target_e_grid"):
        if k in run_s:
            grids[k] = _numbers(run_s[k], f"run.{k}", _line_of(text, "run", k))
            if not grids[k]:
                raise ConfigurationError(f"run.{k} is empty", _line_of(text, "run", k))
    if cmd == "exponents" and len(sizes) < 3:
        raise ConfigurationError("exponent fits need at least 3 sizes", _line_of(text, "run", "sizes"))
    branch = run_s.get("branch", 1)
    if branch not in (1, -1):
        raise ConfigurationError("run.branch must be 1 or -1", _line_of(text, "run", "branch"))
    eps = float(run_s.get("epsilon_scale", 1.0))
    if eps == 0:
        raise ConfigurationError("run.epsilon_scale must be nonzero", _line_of(text, "run", "epsilon_scale"))
    pairing = run_s.get("pairing", "semiclassical")
    if pairing not in ("semiclassical", "splitting"):
        raise ConfigurationError("run.pairing must be semiclassical or splitting", _line_of(text, "run", "pairing"))

    detector = det_s.get("name", "density_peak")
    if detector not in DETECTORS:
        raise ConfigurationError(f"detector.name must be one of {DETECTORS}", _line_of(text, "detector", "name"))
    params = {}
    for k, v in det_s.items():
        if k == "name":
            continue
        if k not in DETECTOR_PARAMS[detector]:
            raise ConfigurationError(f"detector.{k} does not apply to {detector}", _line_of(text, "detector", k))
        params[k] = v

    workers = out_s.get("workers", 1)
    if workers < 1:
        raise ConfigurationError("output.workers must be >= 1", _line_of(text, "output", "workers"))
    return RunConfig(
        **kw, model=model, sizes=sizes, lambda_f=float(run_s.get("lambda_f", DEFAULT_LAMBDA_F[model])),
        lambda_i=float(run_s["lambda_i"]) if "lambda_i" in run_s else None,
        lambda_i_grid=grids.get("lambda_i_grid"), target_e_grid=grids.get("target_e_grid"),
        branch=branch, epsilon_scale=eps, pairing=pairing, detector=detector, detector_params=params,
        j_hop=float(model_s.get("J_hop", 1.0)), omega=float(model_s.get("omega", 1.0)),
        omega0=float(model_s.get("omega0", 1.0)), n_max=n_max,
        out_dir=out_s.get("dir", "out"), workers=workers, cache_dir=out_s.get("cache"))


def parse_config(text: str, command: str | None = None) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigurationError(f"syntax error: {exc}", int(m.group(1)) if m else None) from exc
    return config_from_dict(data, text, command)


def _grid(lo, hi, n):
    return [float(x) for x in np.round(np.linspace(lo, hi, n), 12)]


E_GRID = _grid(-0.9, 0.9, 19)
PRESETS = {
    "table1-lmg": {"command": "exponents", "anchor": "table1", "model": {"name": "LMG"},
                   "run": {"sizes": [500, 2000, 8000], "lambda_f": 0.7}},
    "table1-bh": {"command": "exponents", "anchor": "table1", "model": {"name": "BH"},
                  "run": {"sizes": [500, 2000, 8000], "lambda_f": -7.0}},
    "table1-dicke": {"command": "exponents", "anchor": "table1", "model": {"name": "Dicke"},
                     "run": {"sizes": [16, 32, 64], "lambda_f": 0.75}, "detector": {"name": "doublet_splitting"}},
    "table1-lmg-reduced": {"command": "exponents", "anchor": "table1", "model": {"name": "LMG"},
                           "run": {"sizes": [250, 500, 1000, 2000, 4000], "lambda_f": 0.7}},
    "table1-bh-reduced": {"command": "exponents", "anchor": "table1", "model": {"name": "BH"},
                          "run": {"sizes": [250, 500, 1000, 2000, 4000], "lambda_f": -7.0}},
    "table1-dicke-reduced": {"command": "exponents", "anchor": "table1", "model": {"name": "Dicke"},
                             "run": {"sizes": [8, 12, 16, 24], "lambda_f": 0.75},
                             "detector": {"name": "doublet_splitting"}},
    "fig3-lmg": {"command": "exponents", "anchor": "fig3", "model": {"name": "LMG"},
                 "run": {"sizes": [500, 1000, 2000, 4000, 8000], "lambda_f": 0.7}},
    "fig2-lmg": {"command": "sweep", "anchor": "fig2", "model": {"name": "LMG"},
                 "run": {"sizes": [500, 2000, 8000], "lambda_f": 0.7, "target_e_grid": E_GRID}},
    "fig2-bh": {"command": "sweep", "anchor": "fig2", "model": {"name": "BH"},
                "run": {"sizes": [500, 2000, 8000], "lambda_f": -7.0, "target_e_grid": E_GRID}},
    "fig2-dicke": {"command": "sweep", "anchor": "fig2", "model": {"name": "Dicke"},
                   "run": {"sizes": [16, 32, 64], "lambda_f": 0.75, "target_e_grid": E_GRID}},
    "fig2-lmg-small": {"command": "sweep", "anchor": "fig2", "model": {"name": "LMG"},
                       "run": {"sizes": [200, 500], "lambda_f": 0.7, "target_e_grid": E_GRID}},
}


def load_preset(name: str, command: str | None = None, overrides: dict | None = None) -> RunConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in PRESETS[name].items()}
    for section, values in (overrides or {}).items():
        data.setdefault(section, {}).update(values)
    return config_from_dict(data, None, command)
