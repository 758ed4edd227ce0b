"""Brute-force operators on the full truncated Fock space.

Every model is written with explicit bosonic ladder matrices (the Dicke spin
through two Schwinger bosons), assembled with Kronecker products and then
projected on the conserved particle-number sector. Nothing here shares code
with :mod:`ntqpt.models`; it exists to check it.
"""
from __future__ import annotations

import numpy as np
from scipy import linalg

from .models import Model, ModelSpec


def annihilator(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1)


def _modes(cutoffs):
    """Annihilators for each mode on the tensor space, plus identity."""
    eyes = [np.eye(c + 1) for c in cutoffs]
    ops = []
    for i, c in enumerate(cutoffs):
        factors = list(eyes)
        factors[i] = annihilator(c)
        op = factors[0]
        for f in factors[1:]:
            op = np.kron(op, f)
        ops.append(op)
    return ops


def _sector(cutoffs, counts):
    """Column selector for Fock states ``|n_0, n_1, ...>`` listed in ``counts``."""
    strides = np.cumprod([1] + [c + 1 for c in cutoffs[::-1]])[::-1][1:]
    full = int(np.prod([c + 1 for c in cutoffs]))
    P = np.zeros((full, len(counts)))
    for j, occ in enumerate(counts):
        P[int(np.dot(occ, strides)), j] = 1.0
    return P


def _two_mode_sector(N):
    # ordered by the first mode's occupation 0..N
    return [(n, N - n) for n in range(N + 1)]


def fock_operators(spec: ModelSpec) -> dict[str, np.ndarray]:
    """Dense ``H``, ``S`` and ``O`` in the model basis, built by brute force."""
    N = spec.N
    if spec.model is Model.BH:
        cut = [N, N]
        aL, aR = _modes(cut)
        nL, nR = aL.T @ aL, aR.T @ aR
        one = np.eye(len(nL))
        H = (-spec.j_hop * (aL.T @ aR + aR.T @ aL)
             - spec.lam / (2 * N) * (nL @ (nL - one) + nR @ (nR - one)))
        swap = _swap_operator(N)
        O = nL - nR
        P = _sector(cut, _two_mode_sector(N))
        ops = {"H": H, "S": swap, "O": O}
        # exp(i pi c0+ c0) with c0 = (aL + aR)/sqrt 2, equal to (-1)^N times the swap
        c0 = (aL + aR) / np.sqrt(2)
        ops["S_c0"] = (-1) ** N * _parity_exp(P.T @ (c0.T @ c0) @ P)
        return {k: (v if k == "S_c0" else P.T @ v @ P) for k, v in ops.items()}
    if spec.model is Model.LMG:
        cut = [N, N]
        t, s = _modes(cut)  # first mode t so the sector is ordered by n_t
        Q = s.T @ t + t.T @ s
        H = spec.lam * (t.T @ t) - (1 - spec.lam) / N * (Q @ Q)
        S = _parity_exp(t.T @ t)
        P = _sector(cut, _two_mode_sector(N))
        return {k: P.T @ v @ P for k, v in {"H": H, "S": S, "O": Q}.items()}

    cut = [N, N, spec.n_max]
    bu, bd, a = _modes(cut)  # Schwinger bosons: J+ = bu+ bd, J = N/2
    Jp = bu.T @ bd
    Jx = (Jp + Jp.T) / 2
    Jz = (bu.T @ bu - bd.T @ bd) / 2
    H = spec.omega0 * Jz + spec.omega * (a.T @ a) + 2 * spec.lam / np.sqrt(N) * ((a + a.T) @ Jx)
    # J + Jz = number of excited atoms
    S = _parity_exp(bu.T @ bu + a.T @ a)
    counts = [(nu, N - nu, k) for nu in range(N + 1) for k in range(spec.n_max + 1)]
    P = _sector(cut, counts)
    return {k: P.T @ v @ P for k, v in {"H": H, "S": S, "O": Jx}.items()}


def _parity_exp(number_op: np.ndarray) -> np.ndarray:
    """``exp(i pi n)`` by exact diagonalization of a number-like operator."""
    w, v = linalg.eigh(number_op)
    phase = np.exp(1j * np.pi * w)
    out = (v * phase) @ v.T
    assert np.max(np.abs(out.imag)) < 1e-9
    return out.real


def _swap_operator(N: int) -> np.ndarray:
    dim = (N + 1) ** 2
    X = np.zeros((dim, dim))
    for nl in range(N + 1):
        for nr in range(N + 1):
            X[nr * (N + 1) + nl, nl * (N + 1) + nr] = 1.0
    return X
