"""Parity-resolved spectra, doublet pairing and ESQPT precursors."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy import linalg, optimize

from .banded import BandedSymmetricMatrix
from .errors import DetectorError, DiagonalizationError
from .models import Model, ModelSpec, build_hamiltonian, ordered_side, parity_labels

log = logging.getLogger(__name__)

DETECTORS = ("doublet_splitting", "density_peak", "min_gap")


def fix_signs(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip columns so their first entry with ``|x| > tol`` is positive."""
    big = np.abs(vectors) > tol
    first = np.argmax(big, axis=0)
    lead = vectors[first, np.arange(vectors.shape[1])]
    signs = np.where(lead < 0, -1.0, 1.0)
    return vectors * signs


def diagonalize(H: BandedSymmetricMatrix, check_samples: int = 8):
    """Full eigendecomposition of a banded symmetric matrix (LAPACK ``sbevd``).

    Returns ascending eigenvalues and orthonormal, sign-fixed eigenvectors
    (columns). A residual check on a few spread-out vectors guards accuracy.
    """
    try:
        w, v = linalg.eig_banded(H.lower_band(), lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise DiagonalizationError(f"banded eigensolver failed for dim={H.dim}: {exc}") from exc
    v = fix_signs(v)
    scale = max(float(np.max(np.abs(w))), H.max_abs(), 1e-300)
    sample = np.unique(np.linspace(0, H.dim - 1, min(check_samples, H.dim)).astype(int))
    res = H.matvec(v[:, sample]) - v[:, sample] * w[sample]
    worst = float(np.max(np.linalg.norm(res, axis=0))) / scale
    if not worst < 1e-10:
        raise DiagonalizationError(f"residual {worst:.2e} exceeds 1e-10 (dim={H.dim}, bandwidth={H.bandwidth})")
    return w, v


def parity_sectors(spec: ModelSpec) -> dict[int, sp.csr_matrix]:
    """Orthonormal bases (sparse columns) of the S = +1 and S = -1 subspaces."""
    dim = spec.dim
    labels = parity_labels(spec)
    if labels is not None:
        out = {}
        for p in (1, -1):
            idx = np.nonzero(labels == p)[0]
            out[p] = sp.csr_matrix((np.ones(len(idx)), (idx, np.arange(len(idx)))), shape=(dim, len(idx)))
        return out
    # BH: (|n> +- |N-n>)/sqrt 2, plus the central |N/2> in the + sector
    N = spec.N
    half = (N + 1) // 2
    n = np.arange(half)
    r = 1 / math.sqrt(2)
    out = {}
    for p in (1, -1):
        rows = np.concatenate([n, N - n])
        cols = np.concatenate([n, n])
        vals = np.concatenate([np.full(half, r), np.full(half, p * r)])
        ncol = half
        if p == 1 and N % 2 == 0:
            rows = np.append(rows, N // 2)
            cols = np.append(cols, half)
            vals = np.append(vals, 1.0)
            ncol += 1
        out[p] = sp.csr_matrix((vals, (rows, cols)), shape=(dim, ncol))
    return out


@dataclass(frozen=True)
class ParitySector:
    parity: int
    basis: sp.csr_matrix
    energies: np.ndarray
    vectors: np.ndarray  # eigenvectors in the sector basis

    def __len__(self):
        return len(self.energies)

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.basis.T @ x

    def full_vectors(self, cols=None) -> np.ndarray:
        v = self.vectors if cols is None else self.vectors[:, cols]
        return np.asarray(self.basis @ v)


class Doublet(NamedTuple):
    index_plus: int
    index_minus: int
    energy_plus: float
    energy_minus: float
    splitting: float


@dataclass(frozen=True)
class Pairing:
    """Doublets ``(plus[j], minus[j])`` as sector-local level indices."""

    plus: np.ndarray
    minus: np.ndarray
    splitting: np.ndarray
    cutoff: float | None = None
    side: str = "below"
    orphans: int = 0

    def __len__(self):
        return len(self.plus)

    @classmethod
    def empty(cls, cutoff=None, side="below"):
        z = np.zeros(0, dtype=int)
        return cls(z, z, np.zeros(0), cutoff, side)


@dataclass(frozen=True)
class Level:
    energy: float
    parity: int
    index: int  # position inside its parity sector


@dataclass(frozen=True)
class ParitySpectrum:
    spec: ModelSpec
    sectors: dict
    pairing: Pairing = field(default_factory=Pairing.empty)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ground_energy(self) -> float:
        return min(float(s.energies[0]) for s in self.sectors.values() if len(s))

    @property
    def top_energy(self) -> float:
        return max(float(s.energies[-1]) for s in self.sectors.values() if len(s))

    @property
    def width(self) -> float:
        return self.top_energy - self.ground_energy

    @property
    def dim(self) -> int:
        return sum(len(s) for s in self.sectors.values())

    def merged(self):
        """All levels sorted by energy: ``(energies, parities, local_index)``."""
        e = np.concatenate([self.sectors[p].energies for p in (1, -1)])
        par = np.concatenate([np.full(len(self.sectors[p]), p) for p in (1, -1)])
        idx = np.concatenate([np.arange(len(self.sectors[p])) for p in (1, -1)])
        order = np.argsort(e, kind="stable")
        return e[order], par[order], idx[order]

    @property
    def levels(self) -> list[Level]:
        e, par, idx = self.merged()
        return [Level(float(a), int(b), int(c)) for a, b, c in zip(e, par, idx)]

    @property
    def energies(self) -> np.ndarray:
        return self.merged()[0]

    def vectors(self) -> np.ndarray:
        """Eigenvectors in the model basis, columns in merged energy order."""
        _, par, idx = self.merged()
        full = {p: self.sectors[p].full_vectors() for p in (1, -1)}
        return np.column_stack([full[p][:, i] for p, i in zip(par, idx)])

    def doublets(self) -> Iterator[Doublet]:
        ep, em = self.sectors[1].energies, self.sectors[-1].energies
        for i, j, s in zip(self.pairing.plus, self.pairing.minus, self.pairing.splitting):
            yield Doublet(int(i), int(j), float(ep[i]), float(em[j]), float(s))

    def block(self, A: BandedSymmetricMatrix, p: int, q: int) -> sp.csr_matrix:
        """``U_p^T A U_q`` in the sector bases."""
        return sp.csr_matrix(self.sectors[p].basis.T @ (A.to_sparse() @ self.sectors[q].basis))


def diagonalize_by_parity(spec: ModelSpec, cache=None) -> ParitySpectrum:
    """Block-diagonalize H(spec) by parity and solve each block separately."""
    if cache is not None:
        hit = cache.get(spec)
        if hit is not None:
            return hit
    H = build_hamiltonian(spec).to_sparse()
    sectors = {}
    for p, U in parity_sectors(spec).items():
        if U.shape[1] == 0:
            sectors[p] = ParitySector(p, U, np.zeros(0), np.zeros((0, 0)))
            continue
        block = BandedSymmetricMatrix.from_sparse(U.T @ H @ U)
        w, v = diagonalize(block)
        w.setflags(write=False)
        v.setflags(write=False)
        sectors[p] = ParitySector(p, sp.csr_matrix(U), w, v)
    out = ParitySpectrum(spec, sectors)
    if cache is not None:
        cache.put(out)
    return out


# --------------------------------------------------------------------------
# doublets


def _edge_ordered(energies: np.ndarray, side: str) -> np.ndarray:
    return energies if side == "below" else energies[::-1]


def _local_spacing(e: np.ndarray, window: int) -> np.ndarray:
    """Mean nearest-neighbour gap over ``window`` consecutive levels around each level."""
    gaps = np.abs(np.diff(e))
    if len(gaps) == 0:
        return np.full(len(e), np.inf)
    half = window // 2
    out = np.empty(len(e))
    for k in range(len(e)):
        lo = max(0, min(k - half, len(gaps) - (window - 1)))
        hi = min(len(gaps), lo + window - 1)
        out[k] = gaps[lo:hi].mean()
    return out


def raw_doublets(spectrum: ParitySpectrum, side: str):
    """k-th level of each sector counted from the ordered edge."""
    ep = _edge_ordered(spectrum.sectors[1].energies, side)
    em = _edge_ordered(spectrum.sectors[-1].energies, side)
    m = min(len(ep), len(em))
    return ep[:m], em[:m]


def pair_doublets(spectrum: ParitySpectrum, cutoff_energy: float, side: str | None = None,
                  criterion: str = "semiclassical", threshold: float = 0.5, window: int = 11) -> ParitySpectrum:
    """Pair the k-th + level with the k-th - level on the ordered side of the cutoff.

    ``cutoff_energy`` is an excitation energy. ``side`` says where the doublets
    live ('below' or 'above' the cutoff); by default it follows the model.
    With ``criterion='splitting'`` the pairing instead runs from the ordered
    edge while splittings stay below ``threshold`` local mean spacings.
    """
    side = side or ordered_side(spectrum.spec) or "below"
    if side not in ("below", "above"):
        raise ValueError(f"side must be 'below' or 'above', got {side!r}")
    e0 = spectrum.ground_energy
    ep, em = raw_doublets(spectrum, side)
    split = np.abs(ep - em)
    if criterion == "semiclassical":
        if side == "below":
            inside_p = spectrum.sectors[1].energies - e0 < cutoff_energy
            inside_m = spectrum.sectors[-1].energies - e0 < cutoff_energy
            count = int(np.sum(np.minimum(ep, em) - e0 < cutoff_energy))
        else:
            inside_p = spectrum.sectors[1].energies - e0 > cutoff_energy
            inside_m = spectrum.sectors[-1].energies - e0 > cutoff_energy
            count = int(np.sum(np.maximum(ep, em) - e0 > cutoff_energy))
        orphans = max(int(inside_p.sum()), int(inside_m.sum())) - count
    elif criterion == "splitting":
        local = _local_spacing(ep, window)
        bad = np.nonzero(split >= threshold * local)[0]
        count = int(bad[0]) if len(bad) else len(split)
        orphans = 0
    else:
        raise ValueError(f"unknown pairing criterion {criterion!r}")
    if orphans > 0:
        log.warning("pairing left %d orphan level(s) on the ordered side", orphans)
    k = np.arange(count)
    if side == "below":
        plus, minus = k, k
    else:
        plus = len(spectrum.sectors[1]) - 1 - k
        minus = len(spectrum.sectors[-1]) - 1 - k
    mean_spacing = spectrum.width / max(spectrum.dim - 1, 1)
    max_split = float(split[:count].max()) if count else 0.0
    diagnostics = dict(spectrum.diagnostics)
    diagnostics.update(
        pairing_criterion=criterion, pairing_side=side, pairing_cutoff=float(cutoff_energy),
        paired=count, orphans=max(orphans, 0), max_splitting=max_split, mean_spacing=mean_spacing,
        non_degenerate_pairs=bool(count and max_split > 0.1 * mean_spacing),
    )
    pairing = Pairing(plus, minus, split[:count], float(cutoff_energy), side, max(orphans, 0))
    return replace(spectrum, pairing=pairing, diagnostics=diagnostics)


# --------------------------------------------------------------------------
# precursors


@dataclass(frozen=True)
class PrecursorEstimate:
    energy: float  # excitation energy of E_c^(N)
    detector: str
    detail: dict


def _density_peak(x: np.ndarray, bw: float):
    """Maximum of a Gaussian-kernel level density over sorted levels ``x``."""
    reach = 10 * bw

    def density(t):
        lo, hi = np.searchsorted(x, [t - reach, t + reach])
        return float(np.exp(-0.5 * ((t - x[lo:hi]) / bw) ** 2).sum())

    step = bw / 4
    grid = np.arange(x[0], x[-1] + step, step)
    vals = np.empty(len(grid))
    for s in range(0, len(grid), 512):
        g = grid[s:s + 512]
        lo, hi = np.searchsorted(x, [g[0] - reach, g[-1] + reach])
        vals[s:s + 512] = np.exp(-0.5 * ((g[:, None] - x[None, lo:hi]) / bw) ** 2).sum(axis=1)
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda t: -density(t), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-10 * max(x[-1] - x[0], 1.0)})
    return float(res.x), float(-res.fun)


def _density_peak_profile(x: np.ndarray, bw: float, points: int = 201) -> np.ndarray:
    """Smoothed density on a coarse grid away from the spectrum edges."""
    grid = np.linspace(x[0] + 3 * bw, x[-1] - 3 * bw, points)
    lo, hi = np.searchsorted(x, [grid[0] - 10 * bw, grid[-1] + 10 * bw])
    return np.exp(-0.5 * ((grid[:, None] - x[None, lo:hi]) / bw) ** 2).sum(axis=1)


def detect_precursor(spectrum: ParitySpectrum, detector: str = "density_peak", *,
                     threshold_fraction: float = 0.5, window: int = 11,
                     bandwidth_spacings: float = 5.0, side: str | None = None) -> PrecursorEstimate:
    """Finite-size ESQPT precursor ``E_c^(N)`` as an excitation energy.

    doublet_splitting
        first doublet, counted from the ordered edge, whose splitting exceeds
        ``threshold_fraction`` of the local mean spacing (``window`` levels of
        the + sector).
    density_peak
        maximum of the Gaussian-smoothed level density of the whole spectrum,
        kernel width ``bandwidth_spacings`` global mean spacings.
    min_gap
        centre of the smallest nearest-neighbour gap of the + sector, edges
        (``window`` levels on each end) excluded.
    """
    e0 = spectrum.ground_energy
    if detector == "doublet_splitting":
        side = side or ordered_side(spectrum.spec) or "below"
        ep, em = raw_doublets(spectrum, side)
        if len(ep) < 2:
            raise DetectorError("too few levels for doublet detection")
        split = np.abs(ep - em)
        local = _local_spacing(ep, window)
        if split[0] >= 0.1 * threshold_fraction * local[0]:
            raise DetectorError("no degenerate doublet at the ordered edge of the spectrum")
        over = np.nonzero(split > threshold_fraction * local)[0]
        if len(over) == 0:
            raise DetectorError("doublet splitting never exceeds the threshold (spectrum entirely degenerate)")
        k = int(over[0])
        energy = 0.5 * (ep[k] + em[k]) - e0
        detail = dict(threshold_fraction=threshold_fraction, window=window, side=side, doublet=k,
                      splitting=float(split[k]), local_spacing=float(local[k]))
    elif detector == "density_peak":
        x = spectrum.energies - e0
        if len(x) < 3:
            raise DetectorError("too few levels for a density estimate")
        spacing = (x[-1] - x[0]) / (len(x) - 1)
        bw = bandwidth_spacings * spacing
        energy, peak = _density_peak(x, bw)
        if energy - x[0] < bw or x[-1] - energy < bw:
            raise DetectorError(f"level density peaks at the spectrum edge ({energy:.6g}); no interior maximum")
        # a flat density (equally spaced levels) has no critical peak
        interior = _density_peak_profile(x, bw)
        prominence = peak / float(np.median(interior)) - 1.0
        if prominence < 1e-6:
            raise DetectorError(f"level density is flat (prominence {prominence:.2e}); no critical peak")
        detail = dict(bandwidth=bw, bandwidth_spacings=bandwidth_spacings, mean_spacing=spacing, peak_density=peak,
                      prominence=prominence)
    elif detector == "min_gap":
        e = spectrum.sectors[1].energies
        gaps = np.diff(e)
        if len(gaps) <= 2 * window:
            raise DetectorError("too few levels for a gap scan")
        inner = gaps[window:len(gaps) - window]
        k = window + int(np.argmin(inner))
        contrast = float(gaps[k] / np.median(inner))
        if contrast > 1 - 1e-9:
            raise DetectorError("nearest-neighbour gaps are uniform; no gap minimum")
        energy = 0.5 * (e[k] + e[k + 1]) - e0
        detail = dict(window=window, gap=float(gaps[k]), level=k, contrast=contrast)
    else:
        raise ValueError(f"unknown detector {detector!r}; expected one of {DETECTORS}")
    if not (-1e-9 <= energy <= spectrum.width + 1e-9):
        raise DetectorError(f"precursor {energy:.6g} outside the spectrum")
    return PrecursorEstimate(float(energy), detector, detail)
