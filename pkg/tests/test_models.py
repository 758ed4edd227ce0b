import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntqpt import (
    CoherentParams,
    ConfigurationError,
    Model,
    ModelSpec,
    PhaseError,
    TruncationError,
    build_coherent_state,
    build_hamiltonian,
    build_order_parameter,
    build_parity,
    semiclassical_critical_energy,
    variational_ground_state,
)
from ntqpt.fock import fock_operators
from ntqpt.models import exact_ground_energy, resolve_truncation

MODELS = ("BH", "LMG", "Dicke")


def spec(model, N, lam, n_max=6):
    return ModelSpec(model, N, lam, n_max=n_max if model == "Dicke" else None)


# -- specification checks


def test_dimensions_and_n_max_rules():
    assert ModelSpec("BH", 7, 1.0).dim == 8
    assert ModelSpec("LMG", 7, 1.0).dim == 8
    assert ModelSpec("Dicke", 3, 1.0, n_max=5).dim == 24
    with pytest.raises(ConfigurationError):
        ModelSpec("BH", 4, 1.0, n_max=3)
    with pytest.raises(ConfigurationError):
        ModelSpec("LMG", 0, 1.0)
    with pytest.raises(ConfigurationError):
        ModelSpec("Dicke", 2, 1.0, n_max=0)


def test_bh_single_particle():
    h = build_hamiltonian(ModelSpec("BH", 1, 3.7)).to_dense()
    assert np.array_equal(h, [[0.0, -1.0], [-1.0, 0.0]])
    assert np.allclose(np.linalg.eigvalsh(h), [-1, 1])


def test_bh_two_particles():
    # the attractive sign convention places this example at lambda = -2
    h = build_hamiltonian(ModelSpec("BH", 2, -2.0))
    assert np.allclose(h.diagonal(0), [1, 0, 1], atol=1e-15)
    assert np.allclose(h.diagonal(1), [-math.sqrt(2)] * 2)
    assert h.bandwidth == 1


def test_lmg_two_particles():
    h = build_hamiltonian(ModelSpec("LMG", 2, 0.0))
    assert np.allclose(h.diagonal(0), [-1, -2, -1])
    assert np.allclose(h.diagonal(1), 0)
    assert np.allclose(h.diagonal(2), [-1])
    assert np.allclose(np.linalg.eigvalsh(h.to_dense()), [-2, -2, 0])


def test_dicke_noninteracting_spectrum():
    s = ModelSpec("Dicke", 4, 0.0, n_max=5)
    h = build_hamiltonian(s)
    m, k = np.meshgrid(np.arange(-2, 3), np.arange(6), indexing="ij")
    assert np.allclose(np.sort(np.linalg.eigvalsh(h.to_dense())), np.sort((m + k).ravel()))
    assert build_hamiltonian(s.with_lambda(0.3)).bandwidth == s.n_max + 2


def test_parity_examples():
    assert np.array_equal(build_parity(ModelSpec("BH", 2, 1.0)).to_dense(), np.fliplr(np.eye(3)))
    assert np.array_equal(build_parity(ModelSpec("LMG", 3, 1.0)).diagonal(0), [1, -1, 1, -1])


def test_order_parameter_examples():
    assert np.array_equal(build_order_parameter(ModelSpec("BH", 2, 1.0)).diagonal(0), [-2, 0, 2])
    assert np.allclose(build_order_parameter(ModelSpec("LMG", 2, 1.0)).diagonal(1), [math.sqrt(2)] * 2)


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.parametrize("N", range(1, 7))
def test_builders_match_fock_space(model, N):
    for lam in (-1.3, 0.45, 2.2):
        s = spec(model, N, lam)
        ref = fock_operators(s)
        assert np.max(np.abs(build_hamiltonian(s).to_dense() - ref["H"])) < 1e-12
        assert np.max(np.abs(build_parity(s).to_dense() - ref["S"])) < 1e-12
        assert np.max(np.abs(build_order_parameter(s).to_dense() - ref["O"])) < 1e-12
        if "S_c0" in ref:
            assert np.max(np.abs(build_parity(s).to_dense() - ref["S_c0"])) < 1e-12


@settings(max_examples=40, deadline=None)
@given(model=st.sampled_from(MODELS), N=st.integers(1, 12), lam=st.floats(-10, 10))
def test_symmetry_properties(model, N, lam):
    s = spec(model, N, lam, n_max=4)
    H, S, O = (f(s).to_dense() for f in (build_hamiltonian, build_parity, build_order_parameter))
    assert np.max(np.abs(H @ S - S @ H)) < 1e-12 * max(1.0, abs(lam))
    assert np.array_equal(S @ S, np.eye(len(S)))
    assert np.max(np.abs(S @ O @ S + O)) < 1e-12


# -- coherent states


def test_coherent_examples():
    psi = build_coherent_state(ModelSpec("BH", 5, 1.0), CoherentParams.bh(1.0, 0.0))
    assert np.array_equal(psi.amplitudes, [0, 0, 0, 0, 0, 1])
    r = 1 / math.sqrt(2)
    psi = build_coherent_state(ModelSpec("BH", 2, 1.0), CoherentParams.bh(r, r))
    assert np.allclose(psi.amplitudes, [0.5, r, 0.5])
    psi = build_coherent_state(ModelSpec("LMG", 4, 1.0), CoherentParams.lmg(0.0))
    assert np.array_equal(psi.amplitudes, [1, 0, 0, 0, 0])


def test_lmg_closed_form_normalization():
    N, beta = 12, 0.7
    n = np.arange(N + 1)
    binom = np.array([math.comb(N, k) for k in n], dtype=float)
    expected = (1 + beta**2) ** (-N / 2) * np.sqrt(binom) * beta**n
    psi = build_coherent_state(ModelSpec("LMG", N, 0.5), CoherentParams.lmg(beta))
    assert np.allclose(psi.amplitudes, expected, atol=1e-14)


def test_large_n_amplitudes_stay_finite():
    psi = build_coherent_state(ModelSpec("LMG", 8000, 0.5), CoherentParams.lmg(1.0))
    assert np.all(np.isfinite(psi.amplitudes))
    assert abs(np.linalg.norm(psi.amplitudes) - 1) < 1e-10


@settings(max_examples=25, deadline=None)
@given(model=st.sampled_from(MODELS), N=st.integers(1, 40), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_coherent_norm(model, N, a, b):
    if model == "BH":
        t = math.atan2(b, a)
        p = CoherentParams.bh(math.cos(t), math.sin(t))
    elif model == "LMG":
        p = CoherentParams.lmg(a)
    else:
        p = CoherentParams.dicke(a, b)
    s = spec(model, N, 1.0, n_max=60)
    psi = build_coherent_state(s, p)
    assert abs(np.linalg.norm(psi.amplitudes) - 1) < 1e-10


def test_bh_params_must_be_normalized():
    with pytest.raises(ConfigurationError):
        CoherentParams.bh(0.5, 0.5)


def test_dicke_truncation_error_reports_tail():
    with pytest.raises(TruncationError) as info:
        build_coherent_state(ModelSpec("Dicke", 2, 1.0, n_max=4), CoherentParams.dicke(0.5, 3.0))
    assert info.value.tail_weight > 1e-10


def test_adaptive_truncation_converges():
    s = ModelSpec("Dicke", 8, 0.75)
    r = resolve_truncation(s, nu_c2=10.0)
    assert r.n_max >= 4 * 10
    assert abs(exact_ground_energy(r) - exact_ground_energy(r.with_n_max(2 * r.n_max))) < 1e-8


# -- mean field


def test_variational_bh_noninteracting():
    mf = variational_ground_state(ModelSpec("BH", 50, 0.0), strict=False)
    g0, g1 = mf.params.values
    # a quadratic minimum pins the angle only to ~sqrt(machine epsilon)
    assert abs(g0 - 1 / math.sqrt(2)) < 1e-7 and abs(g1 - 1 / math.sqrt(2)) < 1e-7
    assert abs(mf.energy + 50) < 1e-9
    assert abs(mf.order_parameter) < 1e-7 and not mf.broken


def test_variational_lmg_trivial_limit():
    mf = variational_ground_state(ModelSpec("LMG", 30, 1.0), strict=False)
    assert abs(mf.params.values[0]) < 1e-8
    assert abs(mf.energy) < 1e-12


def test_variational_normal_phase_is_rejected():
    with pytest.raises(PhaseError):
        variational_ground_state(ModelSpec("LMG", 30, 0.9))
    with pytest.raises(PhaseError):
        variational_ground_state(ModelSpec("BH", 30, 1.0))
    with pytest.raises(ConfigurationError):
        variational_ground_state(ModelSpec("LMG", 30, 0.5), branch=0)


def test_variational_dicke():
    s = ModelSpec("Dicke", 16, 0.75)
    mf = variational_ground_state(s, branch=1)
    exact = exact_ground_energy(resolve_truncation(s, 16.0))
    assert mf.order_parameter > 0
    assert mf.energy < -8
    assert exact <= mf.energy < exact + 0.05 * abs(exact)


def test_branch_mirror():
    s = ModelSpec("BH", 40, 5.0)
    up, down = variational_ground_state(s, 1), variational_ground_state(s, -1)
    assert up.order_parameter > 0 and abs(up.order_parameter + down.order_parameter) < 1e-12
    assert abs(up.energy - down.energy) < 1e-9


@pytest.mark.parametrize("model,lam", [("BH", 4.0), ("LMG", 0.7), ("Dicke", 0.9)])
def test_variational_bounds_exact(model, lam):
    s = ModelSpec(model, 10, lam)
    if model == "Dicke":
        s = resolve_truncation(s, 10.0)
    assert variational_ground_state(s).energy >= exact_ground_energy(s) - 1e-10


def test_variational_gap_shrinks_with_n():
    gaps = []
    for N in (10, 100, 1000):
        s = ModelSpec("LMG", N, 0.7)
        gaps.append((variational_ground_state(s).energy - exact_ground_energy(s)) / N)
    assert all(g >= -1e-12 for g in gaps)
    assert gaps[0] > gaps[1] > gaps[2]


# -- semiclassics


def test_critical_energies():
    assert semiclassical_critical_energy(ModelSpec("Dicke", 64, 0.75)) == -32
    assert semiclassical_critical_energy(ModelSpec("LMG", 100, 0.7)) == 0
    assert semiclassical_critical_energy(ModelSpec("BH", 100, -7.0), per_particle=True) == 2.75
    assert semiclassical_critical_energy(ModelSpec("BH", 100, -7.0)) == 275


def test_model_parse():
    assert Model.parse("dicke") is Model.DICKE
    with pytest.raises(ConfigurationError):
        Model.parse("ising")
