"""Brute-force oracle checks for small systems, used by ``ntqpt validate``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import fock_operators
from .models import Model, ModelSpec, build_hamiltonian, build_order_parameter, build_parity
from .spectral import diagonalize_by_parity

COUPLINGS = {Model.BH: (-7.0, 0.0, 3.0), Model.LMG: (0.0, 0.4, 0.95), Model.DICKE: (0.0, 0.3, 0.9)}


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.value < self.tolerance


def _spec(model: Model, N: int, lam: float) -> ModelSpec:
    return ModelSpec(model, N, lam, n_max=6 if model is Model.DICKE else None)


def check_spec(spec: ModelSpec) -> list[Check]:
    tag = f"{spec.model.value} N={spec.N} lambda={spec.lam:g}"
    ref = fock_operators(spec)
    H = build_hamiltonian(spec).to_dense()
    S = build_parity(spec).to_dense()
    O = build_order_parameter(spec).to_dense()
    out = [
        Check(f"{tag}: H vs Fock", float(np.max(np.abs(H - ref["H"]))), 1e-12),
        Check(f"{tag}: S vs Fock", float(np.max(np.abs(S - ref["S"]))), 1e-12),
        Check(f"{tag}: O vs Fock", float(np.max(np.abs(O - ref["O"]))), 1e-12),
        Check(f"{tag}: [H,S]", float(np.max(np.abs(H @ S - S @ H))), 1e-12),
        Check(f"{tag}: {{O,S}}", float(np.max(np.abs(O @ S + S @ O))), 1e-12),
        Check(f"{tag}: S^2 - 1", float(np.max(np.abs(S @ S - np.eye(len(S))))), 1e-15),
    ]
    if "S_c0" in ref:
        out.append(Check(f"{tag}: swap vs exp(i pi c0+c0)", float(np.max(np.abs(S - ref["S_c0"]))), 1e-12))
    spectrum = diagonalize_by_parity(spec)
    out.append(Check(f"{tag}: parity blocks vs dense spectrum",
                     float(np.max(np.abs(spectrum.energies - np.linalg.eigvalsh(ref["H"])))), 1e-10))
    worst = 0.0
    for p, sec in spectrum.sectors.items():
        if len(sec):
            v = sec.full_vectors()
            worst = max(worst, float(np.max(np.linalg.norm(S @ v - p * v, axis=0))))
    out.append(Check(f"{tag}: eigenvector parity", worst, 1e-8))
    return out


def run_oracle_suite(max_N: int = 6) -> list[Check]:
    checks = []
    for model, lams in COUPLINGS.items():
        for N in range(1, max_N + 1):
            for lam in lams:
                checks.extend(check_spec(_spec(model, N, lam)))
    return checks
