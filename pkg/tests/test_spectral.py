import numpy as np
import pytest

from ntqpt import (
    BandedSymmetricMatrix,
    DetectorError,
    ModelSpec,
    build_hamiltonian,
    build_parity,
    detect_precursor,
    diagonalize,
    diagonalize_by_parity,
    pair_doublets,
)
from ntqpt.spectral import DETECTORS


def test_two_by_two():
    w, v = diagonalize(BandedSymmetricMatrix(2, {0: [0.0, 0.0], 1: [-1.0]}))
    assert np.allclose(w, [-1, 1])
    assert np.all(v[0] > 0)  # sign convention


def test_lmg_three_by_three():
    w, _ = diagonalize(build_hamiltonian(ModelSpec("LMG", 2, 0.0)))
    assert np.allclose(w, [-2, -2, 0], atol=1e-14)


def test_random_banded_matches_dense():
    rng = np.random.default_rng(7)
    m = BandedSymmetricMatrix(50, {k: rng.standard_normal(50 - k) for k in range(4)})
    w, v = diagonalize(m)
    assert np.max(np.abs(w - np.linalg.eigvalsh(m.to_dense()))) < 1e-10
    assert np.max(np.abs(v.T @ v - np.eye(50))) < 1e-10


def test_determinism():
    h = build_hamiltonian(ModelSpec("LMG", 300, 0.7))
    w1, v1 = diagonalize(h)
    w2, v2 = diagonalize(h)
    assert np.array_equal(w1, w2) and np.array_equal(v1, v2)
    a = diagonalize_by_parity(ModelSpec("BH", 101, 5.0))
    b = diagonalize_by_parity(ModelSpec("BH", 101, 5.0))
    for p in (1, -1):
        assert np.array_equal(a.sectors[p].vectors, b.sectors[p].vectors)


def test_lmg_parity_blocks_by_hand():
    s = diagonalize_by_parity(ModelSpec("LMG", 2, 0.0))
    assert np.allclose(s.sectors[1].energies, [-2, 0])
    assert np.allclose(s.sectors[-1].energies, [-2])
    levels = s.levels
    assert [lv.parity for lv in levels if abs(lv.energy) < 1e-12] == [1]


def test_bh_single_particle_sectors():
    s = diagonalize_by_parity(ModelSpec("BH", 1, 0.0))
    assert np.allclose(s.sectors[1].energies, [-1])
    assert np.allclose(s.sectors[-1].energies, [1])


@pytest.mark.parametrize("spec", [
    ModelSpec("LMG", 200, 0.7), ModelSpec("LMG", 201, 0.3), ModelSpec("BH", 300, -7.0),
    ModelSpec("BH", 301, 5.0), ModelSpec("Dicke", 6, 0.9, n_max=30), ModelSpec("Dicke", 5, 0.3, n_max=21),
])
def test_blocks_reproduce_full_spectrum(spec):
    s = diagonalize_by_parity(spec)
    w, _ = diagonalize(build_hamiltonian(spec))
    assert np.max(np.abs(s.energies - w)) < 1e-10
    S = build_parity(spec).to_sparse()
    rng = np.random.default_rng(0)
    for p, sec in s.sectors.items():
        assert np.all(np.diff(sec.energies) >= 0)
        v = sec.full_vectors()
        assert np.max(np.linalg.norm(S @ v - p * v, axis=0)) < 1e-8
        cols = rng.choice(v.shape[1], size=min(20, v.shape[1]), replace=False)
        gram = v[:, cols].T @ v[:, cols]
        assert np.max(np.abs(gram - np.eye(len(cols)))) < 1e-8
    full = s.vectors()
    assert np.max(np.abs(full.T @ full - np.eye(spec.dim))) < 1e-8


def test_doublets_below_precursor_are_degenerate(lmg2000):
    s = lmg2000.spectrum
    ecn = detect_precursor(s).energy
    e0 = s.ground_energy
    mids = np.array([0.5 * (d.energy_plus + d.energy_minus) for d in s.doublets()]) - e0
    # the last few doublets before the precursor split visibly; see the project notes
    deep = mids < 0.9 * ecn
    assert deep.sum() > 100
    assert np.max(s.pairing.splitting[deep]) < 1e-8 * s.width


def test_pairing_structure(lmg2000):
    s = lmg2000.spectrum
    assert len(set(s.pairing.plus)) == len(s.pairing.plus)
    assert len(set(s.pairing.minus)) == len(s.pairing.minus)
    assert s.diagnostics["orphans"] == 0


def test_cutoff_below_first_excitation():
    raw = diagonalize_by_parity(ModelSpec("LMG", 400, 0.5))
    gap = raw.sectors[1].energies[1] - raw.ground_energy
    s = pair_doublets(raw, 0.5 * gap)
    assert len(s.pairing) == 1
    assert s.pairing.plus[0] == 0 and s.pairing.minus[0] == 0


def test_normal_phase_pairing_is_flagged():
    raw = diagonalize_by_parity(ModelSpec("LMG", 2000, 0.95))
    s = pair_doublets(raw, raw.width)
    d = s.diagnostics
    assert d["non_degenerate_pairs"]
    assert 0.1 < d["max_splitting"] / d["mean_spacing"] < 10


def test_splitting_shrinks_with_n_at_fixed_fraction(lmg500_spectrum, lmg2000):
    def max_split(spectrum):
        ec = -spectrum.ground_energy
        s = pair_doublets(spectrum, 0.8 * ec)
        return np.max(s.pairing.splitting) / spectrum.width

    assert max_split(lmg2000.spectrum) < max_split(lmg500_spectrum)


def test_splitting_criterion_pairs_a_prefix(lmg2000):
    s = pair_doublets(lmg2000.spectrum, 0.0, criterion="splitting")
    assert 0 < len(s.pairing) < len(lmg2000.spectrum.sectors[1])


def test_precursor_approaches_critical_energy():
    devs = []
    for N in (500, 2000, 8000):
        s = diagonalize_by_parity(ModelSpec("LMG", N, 0.7))
        est = detect_precursor(s, "density_peak")
        assert 0 <= est.energy <= s.width
        devs.append(abs(est.energy - (-s.ground_energy)) / N)
    assert devs[0] > devs[1] > devs[2]


def test_trivial_spectrum_has_no_precursor():
    s = diagonalize_by_parity(ModelSpec("LMG", 200, 1.0))
    for det in DETECTORS:
        with pytest.raises(DetectorError):
            detect_precursor(s, det)


def test_detectors_agree(lmg2000):
    s = lmg2000.spectrum
    a = detect_precursor(s, "doublet_splitting")
    b = detect_precursor(s, "density_peak")
    spacing = s.width / (s.dim - 1)
    assert abs(a.energy - b.energy) < 5 * spacing
    assert a.detail["threshold_fraction"] == 0.5 and b.detail["bandwidth_spacings"] == 5.0


def test_unknown_detector():
    with pytest.raises(ValueError):
        detect_precursor(diagonalize_by_parity(ModelSpec("LMG", 50, 0.7)), "magic")
