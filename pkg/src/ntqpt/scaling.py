"""Energy-targeted quench sweeps, power-law fits and critical exponents."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .errors import ConfigurationError, DetectorError, FitError, NtqptError, TargetingError, TruncationError
from .models import (
    Model,
    ModelSpec,
    build_coherent_state,
    mean_field_photon_number,
    resolve_truncation,
    semiclassical_critical_coupling,
    variational_ground_state,
)
from .parallel import ordered_map
from .quench import QuenchResult, QuenchSetup, run_quench
from .spectral import DETECTORS, detect_precursor

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_F = {Model.BH: -7.0, Model.LMG: 0.7, Model.DICKE: 0.75}
DICKE_NU_CITED = (1.30, 0.02)
SCAN_POINTS = 32


def initial_coupling_range(spec_f: ModelSpec) -> tuple[float, float]:
    """(far, near) ends of the ordered-phase lambda_i range scanned for targets."""
    lc = semiclassical_critical_coupling(spec_f)
    if spec_f.model is Model.BH:
        return 10 * lc, lc * (1 + 1e-6)
    if spec_f.model is Model.LMG:
        return -1.0, lc - 1e-6
    return 3 * lc, lc * (1 + 1e-6)


def quench_energy(setup: QuenchSetup, lambda_i: float, branch: int = 1) -> float:
    """Excitation energy deposited by quenching the lambda_i mean-field state."""
    spec_f = setup.spec
    mf = variational_ground_state(spec_f.with_lambda(lambda_i), branch=branch)
    psi = build_coherent_state(spec_f, mf.params)
    return setup.hamiltonian.quadratic(psi.amplitudes) - setup.ground_energy


@dataclass(frozen=True)
class TargetedQuench:
    lambda_i: float
    result: QuenchResult
    scan_monotone: bool
    clamped: bool = False

    def __iter__(self):
        yield self.lambda_i
        yield self.result


def target_energy(setup: QuenchSetup, target_excitation: float, branch: int = 1,
                  scan: tuple[float, float] | None = None, points: int = SCAN_POINTS) -> TargetedQuench:
    """Find lambda_i whose quench lands on ``target_excitation``.

    A coarse scan from the far end of the ordered range toward the critical
    coupling brackets the first crossing; bisection then converges to
    ``|E_f - target| < 1e-6 * width``. A target below a minimum attained at
    the null quench returns the null quench with ``clamped=True``.
    """
    far, near = scan or initial_coupling_range(setup.spec)
    grid = np.linspace(far, near, points)
    energies = np.array([quench_energy(setup, x, branch) for x in grid])
    tol = 1e-6 * setup.spectrum.width
    lam_f = setup.spec.lam
    lo_e, hi_e = float(energies.min()), float(energies.max())
    if min(far, near) <= lam_f <= max(far, near):
        e_null = quench_energy(setup, lam_f, branch)
        lo_e = min(lo_e, e_null)
        if target_excitation <= e_null + tol and e_null <= energies.min():
            return TargetedQuench(lam_f, run_quench(setup, lam_f, branch), True, clamped=True)
    d = energies - target_excitation
    hits = np.nonzero(d[:-1] * d[1:] <= 0)[0]
    if len(hits) == 0:
        raise TargetingError(f"target {target_excitation:.6g} not bracketed by the lambda_i scan", (lo_e, hi_e))
    k = int(hits[0])
    steps = np.sign(np.diff(energies[:k + 2]))
    monotone = bool(np.all(steps == steps[0]))
    a, b = grid[k], grid[k + 1]
    fa = d[k]
    best = (abs(d[k]), a) if abs(d[k]) <= abs(d[k + 1]) else (abs(d[k + 1]), b)
    for _ in range(200):
        if best[0] < tol:
            break
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        fm = quench_energy(setup, mid, branch) - target_excitation
        if abs(fm) < best[0]:
            best = (abs(fm), mid)
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
    if best[0] >= tol:
        raise TargetingError(f"bisection stalled {best[0]:.3g} from target {target_excitation:.6g}", (lo_e, hi_e))
    lam = float(best[1])
    return TargetedQuench(lam, run_quench(setup, lam, branch), monotone)


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    template: ModelSpec
    sizes: tuple
    lambda_f: float | None = None
    lambda_i_grid: tuple | None = None
    target_e_grid: tuple | None = None
    epsilon_scale: float = 1.0
    detector: str = "density_peak"
    detector_params: dict = field(default_factory=dict)
    branch: int = 1
    pairing: str = "semiclassical"
    scan: tuple | None = None
    fixed_n_max: int | None = None  # Dicke: None selects the adaptive cutoff

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigurationError(f"sizes must be strictly increasing, got {list(self.sizes)}")
        object.__setattr__(self, "sizes", sizes)
        if self.lambda_f is None:
            object.__setattr__(self, "lambda_f", DEFAULT_LAMBDA_F[self.template.model])
        if self.lambda_i_grid is not None and self.target_e_grid is not None:
            raise ConfigurationError("give lambda_i_grid or target_e_grid, not both")
        for name in ("lambda_i_grid", "target_e_grid"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(x) for x in v))
        if self.detector not in DETECTORS:
            raise ConfigurationError(f"unknown detector {self.detector!r}")
        if self.branch not in (1, -1):
            raise ConfigurationError("branch must be +1 or -1")
        if self.epsilon_scale == 0:
            raise ConfigurationError("epsilon_scale must be nonzero")

    @property
    def model(self) -> Model:
        return self.template.model

    def spec_for(self, N: int) -> ModelSpec:
        kw = {} if self.model is not Model.DICKE else {"n_max": self.fixed_n_max or 4 * N}
        spec = replace(self.template, N=N, lam=self.lambda_f, **kw)
        if self.model is Model.DICKE and self.fixed_n_max is None:
            # lambda_i grids fix the initial states; otherwise the scan's far end bounds nu_c
            lams = list(self.lambda_i_grid or [(self.scan or initial_coupling_range(spec))[0]])
            nu2 = max(mean_field_photon_number(spec.with_lambda(x)) for x in lams)
            spec = resolve_truncation(spec, nu2)
        return spec


@dataclass(frozen=True)
class SweepPoint:
    grid_value: float
    lambda_i: float | None
    result: QuenchResult | None
    error: str | None = None


@dataclass(frozen=True)
class SweepCurve:
    N: int
    points: tuple

    def ok(self) -> list[QuenchResult]:
        return [p.result for p in self.points if p.result is not None]

    def max_slope(self) -> float:
        """Largest |d O / d e| between neighbouring successful points."""
        rs = sorted(self.ok(), key=lambda r: r.e)
        e = np.array([r.e for r in rs])
        o = np.array([r.order_parameter for r in rs])
        de = np.diff(e)
        keep = de > 0
        return float(np.max(np.abs(np.diff(o)[keep] / de[keep]))) if keep.any() else 0.0


def _sweep_size(sw: SweepSpec, N: int, cache=None) -> SweepCurve:
    setup = QuenchSetup.prepare(sw.spec_for(N), cache=cache, pairing=sw.pairing)
    points = []
    if sw.lambda_i_grid is not None:
        for lam in sw.lambda_i_grid:
            try:
                points.append(SweepPoint(lam, lam, run_quench(setup, lam, sw.branch, sw.epsilon_scale)))
            except NtqptError as exc:
                points.append(SweepPoint(lam, lam, None, f"{type(exc).__name__}: {exc}"))
        return SweepCurve(N, tuple(points))
    Ec = setup.critical_energy
    for e in sw.target_e_grid or ():
        try:
            lam, _ = target_energy(setup, Ec * (1 + e / sw.epsilon_scale), sw.branch, sw.scan)
            # rerun with the display scaling applied to e
            points.append(SweepPoint(e, lam, run_quench(setup, lam, sw.branch, sw.epsilon_scale)))
        except NtqptError as exc:
            points.append(SweepPoint(e, None, None, f"{type(exc).__name__}: {exc}"))
    return SweepCurve(N, tuple(points))


def sweep_order_parameter(sw: SweepSpec, cache=None, workers: int = 1) -> list[SweepCurve]:
    """One curve of (e, order parameter) per system size, sorted by N."""
    if sw.lambda_i_grid is None and sw.target_e_grid is None:
        raise ConfigurationError("a sweep needs lambda_i_grid or target_e_grid")
    return ordered_map(partial(_sweep_size, sw, cache=cache), sw.sizes, workers)


# --------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class PowerLawFit:
    """``value = amplitude * N**(-exponent)`` fitted on ln-ln axes."""

    exponent: float
    amplitude: float
    stderr_exponent: float
    r_squared: float
    points: tuple

    def as_dict(self) -> dict:
        return dict(exponent=self.exponent, stderr=self.stderr_exponent, amplitude=self.amplitude,
                    r_squared=self.r_squared, points=[[n, v] for n, v in self.points],
                    log_points=[[math.log(n), math.log(v)] for n, v in self.points])


def fit_power_law(points) -> PowerLawFit:
    pts = tuple((float(n), float(v)) for n, v in points)
    if len(pts) < 3:
        raise FitError(f"need at least 3 points, got {len(pts)}")
    for n, v in pts:
        if not (v > 0 and math.isfinite(v)):
            raise FitError(f"value {v!r} at N={n:g} is not positive")
        if not n > 0:
            raise FitError(f"size N={n!r} is not positive")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        raise FitError("all sizes are equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    sse = float(resid @ resid)
    sst = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if sst == 0 else 1.0 - sse / sst
    stderr = math.sqrt(sse / (len(pts) - 2) / sxx)
    return PowerLawFit(-slope, math.exp(intercept), stderr, r2, pts)


def ratio_with_error(zeta, dzeta, nu, dnu) -> tuple[float, float]:
    beta = zeta / nu
    return beta, math.sqrt((dzeta / nu) ** 2 + (zeta * dnu / nu**2) ** 2)


# --------------------------------------------------------------------------
# exponents


@dataclass(frozen=True)
class SizeRecord:
    N: int
    critical_energy: float
    precursors: dict  # detector -> excitation energy
    order: dict  # detector -> (lambda_i, intensive, extensive)
    errors: dict


def _size_record(sw: SweepSpec, detectors, N: int, cache=None) -> SizeRecord:
    setup = QuenchSetup.prepare(sw.spec_for(N), cache=cache, pairing=sw.pairing)
    precursors, order, errors = {}, {}, {}
    for det in detectors:
        params = sw.detector_params if det == sw.detector else {}
        try:
            est = detect_precursor(setup.spectrum, det, **params)
            precursors[det] = est.energy
            lam, res = target_energy(setup, est.energy, sw.branch, sw.scan)
            order[det] = (lam, res.order_parameter, res.order_parameter_extensive)
        except (DetectorError, TargetingError, TruncationError) as exc:
            errors[det] = f"{type(exc).__name__}: {exc}"
    return SizeRecord(N, setup.critical_energy, precursors, order, errors)


@dataclass(frozen=True)
class ExponentReport:
    model: str
    lambda_f: float
    detector: str
    sizes: tuple
    zeta: PowerLawFit
    nu: PowerLawFit
    beta: float
    beta_err: float
    zeta_extensive: PowerLawFit | None
    quality: str
    monotone_order: bool
    monotone_precursor: bool
    nu_cited: tuple | None = None
    beta_cited: tuple | None = None
    sensitivity: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = dict(model=self.model, lambda_f=self.lambda_f, detector=self.detector, sizes=list(self.sizes),
                   zeta=self.zeta.exponent, zeta_err=self.zeta.stderr_exponent, zeta_r2=self.zeta.r_squared,
                   nu=self.nu.exponent, nu_err=self.nu.stderr_exponent, nu_r2=self.nu.r_squared,
                   beta=self.beta, beta_err=self.beta_err, quality=self.quality,
                   monotone_order=self.monotone_order, monotone_precursor=self.monotone_precursor,
                   fits=dict(zeta=self.zeta.as_dict(), nu=self.nu.as_dict(),
                             zeta_extensive=self.zeta_extensive.as_dict() if self.zeta_extensive else None),
                   sensitivity=self.sensitivity, failures=self.failures)
        if self.nu_cited:
            out.update(nu_cited=self.nu_cited[0], nu_cited_err=self.nu_cited[1],
                       beta_cited=self.beta_cited[0], beta_cited_err=self.beta_cited[1])
        return out


def _fits(records, det):
    rows = [r for r in records if det in r.order]
    zeta = fit_power_law([(r.N, r.order[det][1]) for r in rows])
    nu = fit_power_law([(r.N, abs(r.precursors[det] - r.critical_energy) / r.N) for r in rows])
    try:
        ext = fit_power_law([(r.N, r.order[det][2]) for r in rows])
    except FitError:
        ext = None
    return rows, zeta, nu, ext


def exponents_from_records(sw: SweepSpec, records) -> ExponentReport:
    rows = [r for r in records if sw.detector in r.order]
    failures = {r.N: r.errors[sw.detector] for r in records if sw.detector in r.errors}
    if len(rows) < 3:
        raise FitError(f"only {len(rows)} size(s) survived ({failures})")
    rows, zeta, nu, ext = _fits(records, sw.detector)
    beta, beta_err = ratio_with_error(zeta.exponent, zeta.stderr_exponent, nu.exponent, nu.stderr_exponent)
    if abs(beta * nu.exponent - zeta.exponent) > 1e-12 * max(1.0, abs(zeta.exponent)):
        raise AssertionError("beta * nu != zeta")
    ops = [r.order[sw.detector][1] for r in rows]
    devs = [v for _, v in nu.points]
    sensitivity = {}
    for det in DETECTORS:
        if det == sw.detector:
            continue
        try:
            _, z, n, _ = _fits(records, det)
            b, _ = ratio_with_error(z.exponent, z.stderr_exponent, n.exponent, n.stderr_exponent)
            sensitivity[det] = dict(zeta=z.exponent, nu=n.exponent, beta=b)
        except (FitError, ZeroDivisionError) as exc:
            sensitivity[det] = dict(error=str(exc))
    cited = beta_cited = None
    if sw.model is Model.DICKE:
        cited = DICKE_NU_CITED
        beta_cited = ratio_with_error(zeta.exponent, zeta.stderr_exponent, *cited)
    quality = "clean" if zeta.r_squared > 0.98 and nu.r_squared > 0.98 else "noisy"
    return ExponentReport(
        model=sw.model.value, lambda_f=sw.lambda_f, detector=sw.detector, sizes=tuple(r.N for r in rows),
        zeta=zeta, nu=nu, beta=beta, beta_err=beta_err, zeta_extensive=ext, quality=quality,
        monotone_order=bool(np.all(np.diff(ops) < 0)), monotone_precursor=bool(np.all(np.diff(devs) < 0)),
        nu_cited=cited, beta_cited=beta_cited, sensitivity=sensitivity,
        failures={str(k): v for k, v in failures.items()})


def collect_size_records(sw: SweepSpec, cache=None, workers: int = 1, detectors=DETECTORS) -> list[SizeRecord]:
    return ordered_map(partial(_size_record, sw, tuple(detectors), cache=cache), sw.sizes, workers)


def extract_exponents(sw: SweepSpec, cache=None, workers: int = 1) -> ExponentReport:
    """zeta from the order parameter at E_c^(N), nu from |E_c^(N) - E_c| / N."""
    return exponents_from_records(sw, collect_size_records(sw, cache, workers))
