"""Acceptance criteria, one test per criterion.

Each test prints a ``criterion N: PASS/FAIL`` line; the collected lines are
repeated in the pytest terminal summary. Tolerances are the contract values
and are not to be loosened.
"""

import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from niscal import pipeline
from niscal.calibration import noise_temperature
from niscal.constants import E_CHARGE, HBAR, K_B, MHz_to_rad, gap_units_to_bias
from niscal.montecarlo import MonteCarloConfig, range_sweep_study, replicate_rng
from niscal.reflection import (
    ReflectionFitParams,
    ReflectionTrace,
    error_circle_confidence,
    fit_normalized_trace,
    fit_reflection_traces,
    normalize_trace,
    reflection_model,
    synthesize_traces,
)
from niscal.thermal import Reservoir, ReservoirLabel, reservoir_power, steady_state_occupation
from niscal.tunneling import (
    JunctionParams,
    damping_rate_exact,
    damping_rate_highbias,
    effective_photon_number,
    forward_tunneling_rate,
    log_forward_tunneling_rate,
    photon_number_highbias,
)

OMEGA_R = 2 * np.pi * 4.67e9
FREQS = np.linspace(4.62e9, 4.72e9, 401)


def test_criterion_1_end_to_end_gain(tmp_path, acceptance):
    start = time.perf_counter()
    cfg = pipeline.RunConfig.from_dict({"output_dir": str(tmp_path)})
    model = pipeline.synthesize(cfg)
    pipeline.fit_reflection(cfg)
    result, _ = pipeline.calibrate_run(cfg)
    elapsed = time.perf_counter() - start
    err = abs(result.gain_dB - 51.84)
    sig = result.gain_sigma_dB
    ok = model.gain_dB == pytest.approx(51.84) and err < 0.15 and 0.05 <= sig <= 0.15 and elapsed < 120
    acceptance(1, ok, f"G = {result.gain_dB:.3f} dB (|err| {err:.3f} < 0.15), "
                      f"sigma_G = {sig:.3f} dB in [0.05, 0.15], {elapsed:.1f} s < 120 s")


def test_criterion_2_range_study(device_model, acceptance):
    start = time.perf_counter()
    cfg = MonteCarloConfig.measured_defaults(device_model, seed=0, repetitions=100, noise_sigma=2.5e-12)
    result = range_sweep_study(cfg)
    elapsed = time.perf_counter() - start
    i9 = result.at(gap_units_to_bias(9.0, device_model.junction.gap_energy))
    at9 = result.mean_rel_error[i9]
    tracking = result.rms_reported_sigma / result.rms_rel_error - 1.0
    worst = np.max(np.abs(tracking))
    ok = 0.013 <= at9 <= 0.03 and worst <= 0.30 and elapsed < 300 and not result.n_failed.any()
    acceptance(2, ok, f"mean |da|/a at 9 = {100 * at9:.2f}% in [1.3, 3]%, "
                      f"max |sigma/err - 1| = {100 * worst:.1f}% <= 30%, {elapsed:.1f} s < 300 s")


def test_criterion_3_noise_temperature(acceptance):
    gain = 10 ** (51.84 / 10)
    bandwidth = 4.75e9 - 4.6e9
    p0 = gain * K_B * 11.0 * bandwidth
    t = noise_temperature(p0, gain, bandwidth)
    rel = abs(t / 11.0 - 1)
    acceptance(3, rel <= 1e-9, f"T_amp = {t!r} K, relative error {rel:.1e} <= 1e-9")


def test_criterion_4_sommerfeld(acceptance):
    junction = JunctionParams(normal_temperature=0.1, dynes_parameter=1e-4)
    gap = junction.gap_energy
    gb = 1e8
    dev = {}
    for x in (5, 7, 10, 20):
        v = x * gap / E_CHARGE
        dg = abs(damping_rate_exact(v, gb, junction, OMEGA_R) / damping_rate_highbias(v, gap, gb) - 1)
        dn = abs(effective_photon_number(v, junction, OMEGA_R) / photon_number_highbias(v, gap, OMEGA_R) - 1)
        dev[x] = (dg, dn)
    at10 = max(dev[10])
    monotone = all(dev[a][k] > dev[b][k] for a, b in ((5, 7), (7, 10), (10, 20)) for k in (0, 1))
    acceptance(4, at10 < 0.01 and monotone,
               f"max deviation at eV = 10 Delta: {at10:.2e} < 1e-2; monotone over 5,7,10,20: {monotone}")


def test_criterion_5_detailed_balance(acceptance):
    gap = JunctionParams().gap_energy
    worst = 0.0
    for temperature in (0.01, 0.1, 0.3):
        j = JunctionParams(normal_temperature=temperature)
        for e in np.logspace(-2, np.log10(20), 30) * gap:
            d = log_forward_tunneling_rate(-e, j) + e / j.thermal_energy - log_forward_tunneling_rate(e, j)
            worst = max(worst, abs(np.expm1(d)))
    acceptance(5, worst <= 1e-6, f"max |F(-E)/(exp(-E/kT) F(E)) - 1| = {worst:.1e} <= 1e-6")


def _trapezoid(e_over_gap, junction, n=10**6):
    t = junction.thermal_energy / junction.gap_energy
    x = np.linspace(min(-1.5, -40 * t), max(1.5, e_over_gap + 40 * t), n)
    z = x + 1j * junction.dynes_parameter
    dos = np.abs(np.real(z / np.sqrt(z * z - 1)))
    fermi = lambda u: 1.0 / (np.exp(u / t) + 1.0)
    integrand = dos * (fermi(x - e_over_gap) - fermi(x)) / (1.0 - np.exp(-e_over_gap / t))
    return np.trapezoid(integrand, x) * junction.gap_energy / (2 * np.pi * HBAR)


def test_criterion_6_quadrature_oracle(acceptance):
    j = JunctionParams()
    worst = max(abs(forward_tunneling_rate(e * j.gap_energy, j) / _trapezoid(e, j) - 1) for e in (0.5, 2.0, 10.0))
    acceptance(6, worst <= 1e-6, f"max relative difference to 1e6-point trapezoid = {worst:.1e} <= 1e-6")


def test_criterion_7_reflection_round_trip(device_model, acceptance):
    gap = device_model.junction.gap_energy
    biases = gap_units_to_bias(np.array([1.5, 3.0, 6.0, 9.0]), gap)
    zero, traces, truth = synthesize_traces(device_model, biases, FREQS)
    result = fit_reflection_traces(traces, zero)
    errs = [abs(result.gamma_tr / truth[0].gamma_tr - 1), abs(result.gamma_x / truth[0].gamma_x - 1),
            abs(result.zero_bias_resonance / OMEGA_R - 1)]
    for fit, p in zip(result.traces, truth):
        errs += [abs(fit.params.gamma_T / p.gamma_T - 1), abs(fit.params.resonance / p.resonance - 1),
                 abs(fit.params.fano - p.fano)]
    noiseless = max(errs)

    bias = gap_units_to_bias(5.0, gap)
    zero, (trace,), (p5,) = synthesize_traces(device_model, [bias], FREQS)
    clean = normalize_trace(trace, zero).values
    covered = 0
    for i in range(100):
        g = replicate_rng(2024, i)
        noise = 0.01 / np.sqrt(2) * (g.standard_normal(FREQS.size) + 1j * g.standard_normal(FREQS.size))
        noisy = ReflectionTrace(bias, FREQS, clean * (1 + noise), normalized=True)
        fit = fit_normalized_trace(noisy)
        iv = error_circle_confidence(fit, noisy)
        covered += all(iv[n][0] <= getattr(p5, n) <= iv[n][1] for n in ("gamma_tr", "gamma_x", "gamma_T"))
    ok = noiseless <= 1e-6 and covered >= 60
    acceptance(7, ok, f"noiseless max relative error {noiseless:.1e} <= 1e-6; "
                      f"1% noise coverage {covered}/100 >= 60 (all three rates at once)")


def test_criterion_8_critical_coupling(acceptance):
    exact = []
    far = []
    for gtr, gx in ((2e7, 5e6), (1.1e7, 2.9e6), (3e8, 1e8)):
        p = ReflectionFitParams(gtr, gx, gtr - gx, 1.0, OMEGA_R)
        exact.append(reflection_model(OMEGA_R, p))
        for r in (1.0, 0.9 + 0.1j, 1.3 - 0.2j):
            q = ReflectionFitParams(gtr, gx, gtr - gx, r, OMEGA_R)
            total = gtr + gx + (gtr - gx)
            for sign in (-1, 1):
                far.append(abs(reflection_model(OMEGA_R + sign * 1e6 * total, q) + r))
    ok = all(v == 0 for v in exact) and max(far) <= 1e-4
    acceptance(8, ok, f"on-resonance values {[complex(v) for v in exact]} exactly 0; "
                      f"far-detuned max |Gamma + r| = {max(far):.1e} <= 1e-4")


def test_criterion_9_power_balance(acceptance):
    worst = [0.0]
    count = [0]

    @settings(max_examples=1000, deadline=None, database=None)
    @given(st.lists(st.tuples(st.sampled_from(list(ReservoirLabel)), st.floats(0.0, 1e9), st.floats(0.0, 1e3)),
                    min_size=1, max_size=6).filter(lambda rs: any(r[1] > 0 for r in rs)))
    def check(spec):
        reservoirs = [Reservoir(*s) for s in spec]
        n_r = steady_state_occupation(reservoirs)
        powers = [reservoir_power(r, n_r, OMEGA_R) for r in reservoirs]
        gross = sum(HBAR * OMEGA_R * r.damping_rate * (r.photon_number + n_r) for r in reservoirs)
        rel = abs(sum(powers)) / gross if gross > 0 else 0.0
        worst[0] = max(worst[0], rel)
        count[0] += 1
        assert rel <= 1e-12

    check()
    acceptance(9, worst[0] <= 1e-12 and count[0] >= 1000,
               f"{count[0]} cases, max |sum P_i| / gross exchange = {worst[0]:.1e} <= 1e-12")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
