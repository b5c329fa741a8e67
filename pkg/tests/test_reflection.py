import numpy as np
import pytest
from hypothesis import given, strategies as st

from niscal.constants import MHz_to_rad, gap_units_to_bias
from niscal.reflection import (
    FitError,
    RateEstimates,
    ReflectionFitParams,
    ReflectionTrace,
    ZeroBiasReference,
    error_circle_confidence,
    estimate_rates,
    extract_asymptotic_damping,
    fit_normalized_trace,
    fit_reflection_traces,
    normalize_trace,
    normalized_model,
    reflection_model,
    synthesize_traces,
)

W_R = 2 * np.pi * 4.67e9
FREQS = np.linspace(4.62e9, 4.72e9, 401)


def test_critical_coupling_gives_exact_zero():
    p = ReflectionFitParams(gamma_tr=3e7, gamma_x=1e7, gamma_T=2e7, fano=1.0, resonance=W_R)
    assert reflection_model(W_R, p) == 0


@given(
    gtr=st.floats(1e5, 1e9), gx=st.floats(0, 1e9), gt=st.floats(0, 1e9),
    re=st.floats(0.2, 1.5), im=st.floats(-0.5, 0.5),
)
def test_far_detuned_limit_is_minus_fano(gtr, gx, gt, re, im):
    p = ReflectionFitParams(gtr, gx, gt, complex(re, im), W_R)
    total = gtr + gx + gt
    for sign in (-1, 1):
        value = reflection_model(W_R + sign * 1e6 * total, p)
        assert abs(value + p.fano) < 1e-4


def test_on_resonance_value_with_measured_rates():
    p = ReflectionFitParams(MHz_to_rad(1.78), MHz_to_rad(0.46), MHz_to_rad(17.39), 1.0, W_R)
    # (γ_tr - γ_T - γ_x)/(γ_tr + γ_T + γ_x) for r = 1
    assert reflection_model(W_R, p).real == pytest.approx((1.78 - 17.85) / (1.78 + 17.85), rel=1e-14)
    assert reflection_model(W_R, p).real == pytest.approx(-0.8186449312277127, rel=1e-12)


def test_lossless_resonator_has_unit_magnitude():
    p = ReflectionFitParams(1e7, 0.0, 0.0, 1.0, W_R)
    w = np.linspace(W_R - 1e8, W_R + 1e8, 51)
    np.testing.assert_allclose(np.abs(reflection_model(w, p)), 1.0, rtol=1e-14)


def test_params_validation():
    with pytest.raises(ValueError):
        ReflectionFitParams(-1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        ReflectionFitParams(1.0, 0.0, 0.0, fano=0.0)
    with pytest.raises(ValueError):
        ReflectionFitParams(1.0, 0.0, 0.0, fano=2.5)


def test_trace_validation():
    with pytest.raises(ValueError):
        ReflectionTrace(0.0, [2.0, 1.0], [1, 1])
    with pytest.raises(ValueError):
        ReflectionTrace(0.0, [1.0, 2.0], [1, np.inf])


def test_normalize_requires_matching_grid():
    a = ReflectionTrace(0.0, FREQS, np.ones(FREQS.size))
    b = ReflectionTrace(1e-3, FREQS[::-1][::-1] * 1.0000001, np.ones(FREQS.size))
    with pytest.raises(ValueError):
        normalize_trace(b, a)
    with pytest.raises(ArithmeticError):
        normalize_trace(a, ReflectionTrace(0.0, FREQS, np.zeros(FREQS.size)))


@pytest.fixture(scope="module")
def synthetic(device_model):
    gap = device_model.junction.gap_energy
    biases = gap_units_to_bias(np.array([2.0, 4.0, 7.0]), gap)
    return synthesize_traces(device_model, biases, FREQS)


def test_noiseless_single_trace_recovery(synthetic):
    zero, traces, truth = synthetic
    for trace, p in zip(traces, truth):
        fit = fit_normalized_trace(normalize_trace(trace, zero))
        for name in ("gamma_tr", "gamma_x", "gamma_T", "resonance"):
            assert getattr(fit.params, name) == pytest.approx(getattr(p, name), rel=1e-6)
        assert abs(fit.params.fano - p.fano) < 1e-6
        assert fit.zero_bias_resonance == pytest.approx(W_R, rel=1e-9)
        assert fit.rms_residual < 1e-9


def test_noiseless_joint_recovery(synthetic):
    zero, traces, truth = synthetic
    result = fit_reflection_traces(traces, zero)
    assert result.converged
    assert result.gamma_tr == pytest.approx(truth[0].gamma_tr, rel=1e-6)
    assert result.gamma_x == pytest.approx(truth[0].gamma_x, rel=1e-6)
    np.testing.assert_allclose(result.gamma_T, [p.gamma_T for p in truth], rtol=1e-6)
    for fit in result.traces:
        lo, hi = fit.intervals["gamma_T"]
        assert hi - lo <= 1e-6 * fit.params.gamma_T


def test_joint_fit_with_shared_fano(synthetic):
    zero, traces, truth = synthetic
    result = fit_reflection_traces(traces, zero, share_fano=True, confidence=False)
    assert result.gamma_tr == pytest.approx(truth[0].gamma_tr, rel=1e-6)
    assert all(f.intervals == {} for f in result.traces)


def test_fit_with_fixed_shared_parameters(synthetic):
    zero, traces, truth = synthetic
    shared = {"gamma_tr": truth[0].gamma_tr, "gamma_x": truth[0].gamma_x, "zero_bias_resonance": W_R}
    fit = fit_normalized_trace(normalize_trace(traces[1], zero), shared=shared)
    assert fit.params.gamma_tr == truth[0].gamma_tr
    assert fit.params.gamma_T == pytest.approx(truth[1].gamma_T, rel=1e-6)


def test_fit_from_explicit_start(synthetic):
    zero, traces, truth = synthetic
    start = ReflectionFitParams(1.2 * truth[0].gamma_tr, 0.8 * truth[0].gamma_x, 1.1 * truth[0].gamma_T,
                                1.0, truth[0].resonance + 1e6)
    fit = fit_normalized_trace(normalize_trace(traces[0], zero), init=start)
    assert fit.params.gamma_T == pytest.approx(truth[0].gamma_T, rel=1e-6)


def test_unnormalized_trace_is_rejected(synthetic):
    zero, traces, _ = synthetic
    with pytest.raises(ValueError):
        fit_normalized_trace(traces[0])


def test_fit_error_on_evaluation_budget(synthetic):
    zero, traces, _ = synthetic
    with pytest.raises(FitError) as info:
        fit_normalized_trace(normalize_trace(traces[0], zero), max_nfev=1)
    assert info.value.best is not None


def test_error_circle_brackets_fit_and_grows_with_radius(synthetic):
    zero, traces, _ = synthetic
    fit = fit_normalized_trace(normalize_trace(traces[1], zero))
    small = error_circle_confidence(fit, radius=1e-3)
    large = error_circle_confidence(fit, radius=1e-2)
    for name, (lo, hi) in small.items():
        value = getattr(fit.params, name)
        assert lo <= value <= hi
        assert large[name][0] <= lo and hi <= large[name][1]
    # on the circle boundary the prediction is one radius from the center
    center = normalized_model(fit.params.resonance, fit.params, fit.zero_bias_resonance)
    from dataclasses import replace
    edge = replace(fit.params, gamma_T=small["gamma_T"][1])
    dist = abs(normalized_model(fit.params.resonance, edge, fit.zero_bias_resonance) - center)
    assert dist == pytest.approx(1e-3, rel=1e-3)


def test_noisy_coverage_is_reasonable(device_model):
    from niscal.montecarlo import replicate_rng

    bias = gap_units_to_bias(5.0, device_model.junction.gap_energy)
    zero, (trace,), (truth,) = synthesize_traces(device_model, [bias], FREQS, background=lambda w: 1.0)
    clean = normalize_trace(trace, zero).values
    covered = 0
    for i in range(20):
        g = replicate_rng(3, i)
        noisy = clean * (1 + 0.01 / np.sqrt(2) * (g.standard_normal(FREQS.size) + 1j * g.standard_normal(FREQS.size)))
        t = ReflectionTrace(bias, FREQS, noisy, normalized=True)
        fit = fit_normalized_trace(t)
        iv = error_circle_confidence(fit, t)
        covered += all(iv[n][0] <= getattr(truth, n) <= iv[n][1] for n in ("gamma_tr", "gamma_x", "gamma_T"))
    assert covered >= 12


def test_reference_mismatch_changes_model():
    p = ReflectionFitParams(1e7, 3e6, 5e7, 1.0, W_R)
    w = np.linspace(W_R - 5e7, W_R + 5e7, 11)
    a = normalized_model(w, p, W_R, ZeroBiasReference())
    b = normalized_model(w, p, W_R, ZeroBiasReference(gamma_T=1e6))
    assert np.max(np.abs(a - b)) > 1e-3


def test_asymptotic_damping_extraction_exact(device_model):
    gap = device_model.junction.gap_energy
    gb = 1.1e8
    vb = gap_units_to_bias(np.array([2.0, 3.0, 5.0, 8.0]), gap)
    from niscal.tunneling import damping_rate_highbias

    gt = damping_rate_highbias(0.5 * vb, gap, gb)
    value, sigma = extract_asymptotic_damping(vb, gt, gap)
    assert value == pytest.approx(gb, rel=1e-14)
    assert sigma < 1e-6 * gb
    value, sigma = extract_asymptotic_damping(vb, gt, gap, sigma=np.full(4, 1e6))
    assert value == pytest.approx(gb, rel=1e-14)
    assert sigma > 0
    with pytest.raises(ValueError):
        extract_asymptotic_damping([0.0], [1.0], gap)


def test_estimate_rates_single_trace_has_nan_excess_sigma(synthetic, device_model):
    zero, traces, _ = synthetic
    result = fit_reflection_traces(traces[-1:], zero)
    rates = estimate_rates(result, device_model.junction.gap_energy)
    assert np.isnan(rates.gamma_x_sigma)
    assert isinstance(rates.gamma_tr, float)
    with pytest.raises(ValueError):
        estimate_rates(result, device_model.junction.gap_energy, min_gap_units=50.0)


def test_rate_estimates_validation():
    with pytest.raises(ValueError):
        RateEstimates(1.0, 1.0, 1.0, gamma_tr_sigma=-1.0)
