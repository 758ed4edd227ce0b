"""Sudden quenches from symmetry-broken coherent states and their long-time
equilibrium ensemble, with a raw time-average and a canonical reference."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .banded import BandedSymmetricMatrix
from .errors import ConfigurationError, TruncationError
from .models import (
    ModelSpec,
    StateVector,
    build_coherent_state,
    build_hamiltonian,
    build_order_parameter,
    semiclassical_critical_energy,
    variational_ground_state,
)
from .spectral import ParitySpectrum, diagonalize_by_parity, pair_doublets

log = logging.getLogger(__name__)

DEFICIT_LIMIT = 1e-8


@dataclass(frozen=True)
class Coefficients:
    """Overlaps ``C_{i alpha}`` of a state with each parity sector's eigenvectors."""

    by_parity: dict
    trunc_deficit: float = 0.0

    @property
    def norm2(self) -> float:
        return float(sum(np.dot(c, c) for c in self.by_parity.values()))


def expand_initial_state(psi0: StateVector | np.ndarray, spectrum: ParitySpectrum) -> Coefficients:
    amps = psi0.amplitudes if isinstance(psi0, StateVector) else np.asarray(psi0, dtype=float)
    deficit = psi0.trunc_deficit if isinstance(psi0, StateVector) else 0.0
    if amps.shape != (spectrum.dim,):
        raise ConfigurationError(f"state has dimension {amps.shape}, spectrum has {spectrum.dim}")
    out = {}
    for p, sec in spectrum.sectors.items():
        out[p] = sec.vectors.T @ sec.project(amps) if len(sec) else np.zeros(0)
    c = Coefficients(out, deficit)
    if abs(c.norm2 - 1.0) > max(1e-10, 2 * deficit):
        raise TruncationError("expansion lost norm", abs(1.0 - c.norm2))
    return c


@dataclass(frozen=True)
class EquilibriumEnsemble:
    """Diagonal weights per sector plus ``C_{i+} C_{i-}`` for each paired doublet."""

    weights: dict
    cross: np.ndarray
    spectrum: ParitySpectrum
    total_weight: float

    @property
    def diagonal(self):
        return [(p, i, float(w)) for p in (1, -1) for i, w in enumerate(self.weights[p])]

    def weight_asymmetry(self) -> np.ndarray:
        """``(w+ - w-)/(w+ + w-)`` for every paired doublet."""
        pr = self.spectrum.pairing
        wp, wm = self.weights[1][pr.plus], self.weights[-1][pr.minus]
        tot = wp + wm
        return np.divide(wp - wm, tot, out=np.zeros_like(tot), where=tot > 0)


def build_equilibrium_ensemble(C: Coefficients, spectrum: ParitySpectrum, coherent: bool = True) -> EquilibriumEnsemble:
    """Long-time average of the projector on the evolved state.

    Doublets recorded in ``spectrum.pairing`` keep their coherence; everything
    else dephases. ``coherent=False`` gives the plain diagonal ensemble.
    """
    weights = {p: c * c for p, c in C.by_parity.items()}
    pr = spectrum.pairing
    if coherent and len(pr):
        cross = C.by_parity[1][pr.plus] * C.by_parity[-1][pr.minus]
    else:
        cross = np.zeros(0)
    total = float(sum(w.sum() for w in weights.values()))
    return EquilibriumEnsemble(weights, cross, spectrum, total)


@dataclass(frozen=True)
class SpectralElements:
    """``<v|A|v>`` per sector and ``<v_{i+}|A|v_{i-}>`` per paired doublet."""

    diag: dict
    cross: np.ndarray

    @classmethod
    def compute(cls, spectrum: ParitySpectrum, A: BandedSymmetricMatrix) -> "SpectralElements":
        diag = {}
        for p, sec in spectrum.sectors.items():
            if not len(sec):
                diag[p] = np.zeros(0)
                continue
            block = spectrum.block(A, p, p)
            diag[p] = np.einsum("ij,ij->j", sec.vectors, block @ sec.vectors)
        pr = spectrum.pairing
        if len(pr):
            vp = spectrum.sectors[1].vectors[:, pr.plus]
            vm = spectrum.sectors[-1].vectors[:, pr.minus]
            cross = np.einsum("ij,ij->j", vp, spectrum.block(A, 1, -1) @ vm)
        else:
            cross = np.zeros(0)
        return cls(diag, cross)


def expectation(ens: EquilibriumEnsemble, A: BandedSymmetricMatrix | SpectralElements,
                spectrum: ParitySpectrum | None = None, *, intensive: bool = False, odd: bool = False) -> float:
    """``Tr[rho_eq A]``. With ``odd`` the diagonal part must vanish (parity-odd A)."""
    spectrum = spectrum or ens.spectrum
    el = A if isinstance(A, SpectralElements) else SpectralElements.compute(spectrum, A)
    diag = float(sum(np.dot(ens.weights[p], el.diag[p]) for p in ens.weights))
    if odd and abs(diag) > 1e-10:
        raise AssertionError(f"diagonal part of a parity-odd observable is {diag:.3e}")
    value = diag + (2.0 * float(np.dot(ens.cross, el.cross)) if len(ens.cross) else 0.0)
    return value / spectrum.spec.N if intensive else value


@dataclass
class QuenchSetup:
    """Everything about H(lambda_f) reused across quenches: paired spectrum,
    critical energy and cached matrix elements of H and O."""

    spectrum: ParitySpectrum
    ground_energy: float
    critical_energy: float  # excitation energy
    hamiltonian: BandedSymmetricMatrix
    order_elements: SpectralElements
    energy_elements: SpectralElements
    meta: dict = field(default_factory=dict)

    @property
    def spec(self) -> ModelSpec:
        return self.spectrum.spec

    @classmethod
    def prepare(cls, spec_f: ModelSpec, cache=None, pairing: str = "semiclassical", spectrum=None,
                **pair_options) -> "QuenchSetup":
        raw = spectrum if spectrum is not None else diagonalize_by_parity(spec_f, cache=cache)
        e0 = raw.ground_energy
        ec_abs = semiclassical_critical_energy(spec_f)
        ec = ec_abs - e0
        log.info("%s N=%d lambda_f=%g: E_c = %.10g absolute, %.10g excitation", spec_f.model.value,
                 spec_f.N, spec_f.lam, ec_abs, ec)
        if pairing == "none":
            paired = pair_doublets(raw, -math.inf, side="below")
        else:
            paired = pair_doublets(raw, ec, criterion=pairing, **pair_options)
        H = build_hamiltonian(spec_f)
        O = build_order_parameter(spec_f)
        meta = dict(ec_absolute=ec_abs, ground_energy=e0, pairing=pairing)
        return cls(paired, e0, ec, H, SpectralElements.compute(paired, O),
                   SpectralElements.compute(paired, H), meta)


@dataclass(frozen=True)
class QuenchResult:
    model: str
    N: int
    lambda_i: float
    lambda_f: float
    E_f: float  # excitation energy above the ground state of H(lambda_f)
    e: float
    order_parameter: float  # intensive
    order_parameter_extensive: float
    work: float  # per particle
    trunc_deficit: float
    critical_energy: float
    weight_asymmetry: float
    branch: int = 1

    def row(self) -> dict:
        return dict(model=self.model, N=self.N, lambda_i=self.lambda_i, lambda_f=self.lambda_f,
                    E_f_excitation=self.E_f, reduced_e=self.e, order_param_intensive=self.order_parameter,
                    order_param_extensive=self.order_parameter_extensive, work_per_particle=self.work,
                    trunc_deficit=self.trunc_deficit)


def run_quench(setup: QuenchSetup | ModelSpec, lambda_i: float, branch: int = 1, epsilon_scale: float = 1.0,
               *, coherent: bool = True, cache=None) -> QuenchResult:
    """Steps i-iv: variational ground state of H(lambda_i), sudden switch to
    H(lambda_f), equilibrium ensemble, order parameter."""
    if isinstance(setup, ModelSpec):
        setup = QuenchSetup.prepare(setup, cache=cache)
    spec_f = setup.spec
    mf = variational_ground_state(spec_f.with_lambda(lambda_i), branch=branch)
    psi = build_coherent_state(spec_f, mf.params)
    C = expand_initial_state(psi, setup.spectrum)
    deficit = max(psi.trunc_deficit, abs(1.0 - C.norm2))
    if deficit > DEFICIT_LIMIT:
        raise TruncationError(f"quench from lambda_i={lambda_i:g} loses weight", deficit)
    ens = build_equilibrium_ensemble(C, setup.spectrum, coherent=coherent)
    e_abs = expectation(ens, setup.energy_elements)
    direct = setup.hamiltonian.quadratic(psi.amplitudes)
    if abs(e_abs - direct) > 1e-8 * max(abs(direct), 1.0):
        raise AssertionError(f"energy not conserved: {e_abs!r} vs {direct!r}")
    order = expectation(ens, setup.order_elements, odd=True)
    E_f = e_abs - setup.ground_energy
    Ec = setup.critical_energy
    asym = ens.weight_asymmetry()
    pw = ens.weights[1][setup.spectrum.pairing.plus] + ens.weights[-1][setup.spectrum.pairing.minus]
    mean_asym = float(np.dot(pw, np.abs(asym)) / pw.sum()) if len(asym) and pw.sum() > 0 else 0.0
    N = spec_f.N
    return QuenchResult(
        model=spec_f.model.value, N=N, lambda_i=float(lambda_i), lambda_f=spec_f.lam, E_f=E_f,
        e=epsilon_scale * (E_f - Ec) / Ec, order_parameter=order / N, order_parameter_extensive=order,
        work=(e_abs - mf.energy) / N, trunc_deficit=deficit, critical_energy=Ec,
        weight_asymmetry=mean_asym, branch=branch)


def time_average_oracle(psi0: StateVector | np.ndarray, spectrum: ParitySpectrum, A: BandedSymmetricMatrix,
                        T: float, samples: int, chunk: int = 1000) -> float:
    """Average of ``<psi(t)|A|psi(t)>`` over ``samples`` equally spaced times in ``[0, T]``.

    Raw unitary dynamics in the eigenbasis; meant for small dimensions.
    """
    amps = psi0.amplitudes if isinstance(psi0, StateVector) else np.asarray(psi0, dtype=float)
    V = spectrum.vectors()
    E = spectrum.energies
    c = V.T @ amps
    Ab = V.T @ (A.to_sparse() @ V)
    total = 0.0
    times = np.linspace(0.0, T, samples)
    for s in range(0, samples, chunk):
        t = times[s:s + chunk]
        phi = c[:, None] * np.exp(-1j * np.outer(E - E[0], t))
        total += float(np.real(np.einsum("it,it->", phi.conj(), Ab @ phi)))
    return total / samples


def thermal_reference(spec: ModelSpec | ParitySpectrum, beta: float, A: BandedSymmetricMatrix) -> float:
    """Canonical average over parity eigenstates, with max-shifted Boltzmann weights."""
    if beta <= 0:
        raise ConfigurationError(f"beta must be positive, got {beta!r}")
    spectrum = spec if isinstance(spec, ParitySpectrum) else diagonalize_by_parity(spec)
    el = SpectralElements.compute(spectrum, A)
    e0 = spectrum.ground_energy
    num = den = 0.0
    for p, sec in spectrum.sectors.items():
        w = np.exp(-beta * (sec.energies - e0))
        num += float(np.dot(w, el.diag[p]))
        den += float(w.sum())
    return num / den
