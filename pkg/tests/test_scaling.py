import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntqpt import FitError, ModelSpec, QuenchSetup, SweepSpec, fit_power_law, sweep_order_parameter, target_energy
from ntqpt.cli import json_text
from ntqpt.errors import ConfigurationError, TargetingError
from ntqpt.models import variational_ground_state
from ntqpt.scaling import (
    DICKE_NU_CITED,
    SizeRecord,
    exponents_from_records,
    quench_energy,
    ratio_with_error,
)

SIZES = (100, 200, 400, 800, 1600)


def test_exact_power_law():
    fit = fit_power_law([(n, 3 * n**-0.5) for n in SIZES])
    assert abs(fit.exponent - 0.5) < 1e-9
    assert abs(fit.amplitude - 3) < 1e-9
    assert fit.r_squared == pytest.approx(1, abs=1e-12)


def test_constant_values():
    fit = fit_power_law([(n, 0.25) for n in SIZES])
    assert abs(fit.exponent) < 1e-12 and fit.r_squared == 1.0


def test_noisy_synthetic_recovers_table_value():
    rng = np.random.default_rng(7)
    sizes = np.geomspace(250, 64000, 9)
    fit = fit_power_law([(n, 0.8 * n**-0.107 * (1 + 0.03 * rng.standard_normal())) for n in sizes])
    assert abs(fit.exponent - 0.107) < 0.01


@given(st.floats(-2, 2), st.floats(0.01, 100))
@settings(max_examples=50, deadline=None)
def test_power_law_property(zeta, amp):
    fit = fit_power_law([(n, amp * n**-zeta) for n in SIZES])
    assert fit.exponent == pytest.approx(zeta, abs=1e-9)
    assert fit.amplitude == pytest.approx(amp, rel=1e-8)


@pytest.mark.parametrize("points,match", [
    ([(10, 1.0), (20, 0.0), (40, 0.5)], "N=20"),
    ([(10, 1.0), (20, -1.0), (40, 0.5)], "N=20"),
    ([(10, 1.0), (20, 0.5)], "at least 3"),
    ([(10, 1.0), (10, 0.5), (10, 0.2)], "equal"),
])
def test_fit_errors(points, match):
    with pytest.raises(FitError, match=match):
        fit_power_law(points)


def test_beta_error_propagation():
    beta, err = ratio_with_error(0.2, 0.01, 2.0, 0.1)
    assert beta == 0.1
    assert err == pytest.approx(math.sqrt(0.005**2 + 0.005**2))


def _records(zeta, nu, sizes=SIZES):
    out = []
    for n in sizes:
        ec_n = 10.0 + 2.0 * n ** (1 - nu)
        out.append(SizeRecord(n, 10.0, {"density_peak": ec_n}, {"density_peak": (0.0, n**-zeta, n ** (1 - zeta))}, {}))
    return out


@given(st.floats(0.01, 0.5), st.floats(0.5, 2.0))
@settings(max_examples=30, deadline=None)
def test_beta_nu_identity(zeta, nu):
    sw = SweepSpec(ModelSpec("LMG", 100, 0.7), SIZES, target_e_grid=(0.0,))
    rep = exponents_from_records(sw, _records(zeta, nu))
    assert abs(rep.beta * rep.nu.exponent - rep.zeta.exponent) <= 1e-12
    assert rep.zeta.exponent == pytest.approx(zeta, abs=1e-9)
    assert rep.nu.exponent == pytest.approx(nu, abs=1e-9)
    assert rep.quality == "clean" and rep.monotone_order and rep.monotone_precursor


def test_report_needs_three_sizes_and_flags_missing():
    sw = SweepSpec(ModelSpec("LMG", 100, 0.7), SIZES, target_e_grid=(0.0,))
    recs = _records(0.1, 1.0)
    recs[1] = SizeRecord(recs[1].N, 10.0, {}, {}, {"density_peak": "DetectorError: flat"})
    rep = exponents_from_records(sw, recs)
    assert rep.sizes == (100, 400, 800, 1600) and "200" in rep.failures
    with pytest.raises(FitError, match="survived"):
        exponents_from_records(sw, recs[:3])


def test_dicke_report_carries_cited_nu():
    sw = SweepSpec(ModelSpec("Dicke", 8, 0.75), (8, 12, 16), target_e_grid=(0.0,), detector="density_peak")
    rep = exponents_from_records(sw, _records(0.2, 1.3, (8, 12, 16)))
    d = rep.as_dict()
    assert (d["nu_cited"], d["nu_cited_err"]) == DICKE_NU_CITED
    assert d["beta_cited"] == pytest.approx(0.2 / 1.3)
    assert d["nu"] == pytest.approx(1.3, abs=1e-9)


def test_sweep_spec_validation():
    t = ModelSpec("LMG", 10, 0.7)
    with pytest.raises(ConfigurationError):
        SweepSpec(t, (200, 100), target_e_grid=(0.0,))
    with pytest.raises(ConfigurationError):
        SweepSpec(t, (100,), lambda_i_grid=(0.1,), target_e_grid=(0.0,))
    assert SweepSpec(ModelSpec("BH", 10, -7.0), (10,)).lambda_f == -7.0
    with pytest.raises(ConfigurationError):
        sweep_order_parameter(SweepSpec(t, (10,)))


# --------------------------------------------------------------------------
# targeting


def test_target_zero_is_the_null_quench(lmg2000):
    tq = target_energy(lmg2000, 0.0)
    assert tq.clamped and tq.lambda_i == 0.7
    mf = variational_ground_state(lmg2000.spec)
    assert tq.result.order_parameter == pytest.approx(abs(mf.order_parameter), rel=2e-2)


def test_target_critical_energy_converges(lmg2000):
    target = lmg2000.critical_energy
    lam, res = target_energy(lmg2000, target)
    assert abs(res.E_f - target) < 1e-6 * lmg2000.spectrum.width
    assert abs(quench_energy(lmg2000, lam) - target) < 1e-6 * lmg2000.spectrum.width


def test_unreachable_target_reports_interval(lmg2000):
    with pytest.raises(TargetingError) as info:
        target_energy(lmg2000, 10 * lmg2000.spectrum.width)
    lo, hi = info.value.attainable
    assert lo <= hi < 10 * lmg2000.spectrum.width


def test_scan_is_monotone_on_bracket():
    setup = QuenchSetup.prepare(ModelSpec("BH", 200, -7.0))
    tq = target_energy(setup, 0.5 * setup.critical_energy)
    assert tq.scan_monotone and not tq.clamped


# --------------------------------------------------------------------------
# sweeps


def test_lmg_curve_shape():
    sw = SweepSpec(ModelSpec("LMG", 500, 0.7), (500, 2000), target_e_grid=(-0.9, 1.8))
    for curve in sweep_order_parameter(sw):
        deep, normal = curve.points
        mf = variational_ground_state(sw.spec_for(curve.N)).order_parameter
        assert deep.result.order_parameter > 0.1
        assert deep.result.order_parameter == pytest.approx(abs(mf), rel=0.1)
        assert normal.result.order_parameter < 1e-8


def test_bh_ordered_at_positive_e():
    sw = SweepSpec(ModelSpec("BH", 200, -7.0), (200,), target_e_grid=(-0.5, 0.2))
    (curve,) = sweep_order_parameter(sw)
    neg, pos = (p.result for p in curve.points)
    assert pos.e == pytest.approx(0.2, abs=1e-4) and neg.e == pytest.approx(-0.5, abs=1e-4)
    assert pos.order_parameter > 0.1 > 100 * neg.order_parameter


def test_failed_points_do_not_stop_the_sweep():
    sw = SweepSpec(ModelSpec("LMG", 100, 0.7), (100,), target_e_grid=(-0.5, 50.0, 0.5))
    (curve,) = sweep_order_parameter(sw)
    assert [p.result is None for p in curve.points] == [False, True, False]
    assert curve.points[1].error.startswith("TargetingError")


def test_report_bytes_are_reproducible():
    sw = SweepSpec(ModelSpec("LMG", 100, 0.7), (150, 250, 400), target_e_grid=(0.0,))
    from ntqpt import extract_exponents
    a = json_text(extract_exponents(sw).as_dict())
    b = json_text(extract_exponents(sw).as_dict())
    assert a == b and json.loads(a)["sizes"] == [150, 250, 400]


def test_dicke_small_size_curve_is_smoother():
    # a narrower scan keeps the adaptive photon cutoff (and the runtime) small
    sw = SweepSpec(ModelSpec("Dicke", 16, 0.75), (16, 32), target_e_grid=(-0.45, -0.15, 0.15),
                   scan=(1.2, 0.5000005))
    c16, c32 = sweep_order_parameter(sw)
    assert len(c16.ok()) == len(c32.ok()) == 3
    assert c32.max_slope() > c16.max_slope()
