import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from niscal.constants import E_CHARGE, HBAR, K_B, MHz_to_rad, gap_units_to_bias, junction_voltage
from niscal.thermal import (
    Reservoir,
    ReservoirLabel,
    SystemModel,
    build_model,
    highbias_coefficients,
    output_power,
    reservoir_power,
    steady_state_occupation,
    transmitted_power_exact,
    transmitted_power_highbias,
    transmitted_power_sweep,
    tunneling_reservoir,
)

OMEGA = 2 * np.pi * 4.67e9
labels = list(ReservoirLabel)

reservoir_sets = st.lists(
    st.tuples(
        st.sampled_from(labels),
        st.floats(0.0, 1e9),
        st.floats(0.0, 1e3),
    ),
    min_size=1,
    max_size=6,
).filter(lambda rs: any(r[1] > 0 for r in rs))


def power_balance_residual(reservoirs):
    """|Σ P_i| relative to the gross exchanged power Σ ħω γ_i (N_i + N_r).

    Each net power is a difference of an inflow γ N_i and an outflow γ N_r;
    the gross flows set the floating-point scale of the sum.
    """
    n_r = steady_state_occupation(reservoirs)
    powers = np.array([reservoir_power(r, n_r, OMEGA) for r in reservoirs])
    gross = sum(HBAR * OMEGA * r.damping_rate * (r.photon_number + n_r) for r in reservoirs)
    return abs(np.sum(powers)) / gross if gross > 0 else 0.0


@settings(max_examples=1000)
@given(reservoir_sets)
def test_power_balance_at_steady_state(spec):
    reservoirs = [Reservoir(*s) for s in spec]
    assert power_balance_residual(reservoirs) <= 1e-12


def test_steady_state_is_weighted_mean():
    rs = [Reservoir("transmission_line", 1.0, 0.0), Reservoir("tunneling_env", 3.0, 4.0)]
    assert steady_state_occupation(rs) == 3.0


def test_steady_state_requires_damping():
    with pytest.raises(ValueError):
        steady_state_occupation([Reservoir("excess", 0.0, 1.0)])


def test_reservoir_validation():
    with pytest.raises(ValueError):
        Reservoir("excess", -1.0, 0.0)
    with pytest.raises(ValueError):
        Reservoir("excess", 1.0, -0.5)
    with pytest.raises(ValueError):
        Reservoir("nonsense", 1.0, 0.0)


def test_reservoir_power_sign():
    hot = Reservoir("tunneling_env", 2.0, 5.0)
    assert reservoir_power(hot, 1.0, OMEGA) == pytest.approx(HBAR * OMEGA * 2.0 * 4.0)
    assert reservoir_power(hot, 6.0, OMEGA) < 0


def test_system_model_label_checks(device_model):
    with pytest.raises(ValueError):
        SystemModel(device_model.junction, device_model.circuit, device_model.excess, device_model.excess)
    with pytest.raises(ValueError):
        device_model.with_gain(gain_linear=0.0)


def test_build_model_reproduces_rates(device_model):
    assert device_model.gamma_bar == pytest.approx(MHz_to_rad(17.39), rel=1e-12)
    assert device_model.line.damping_rate == MHz_to_rad(1.78)
    assert device_model.gain_dB == pytest.approx(51.84, rel=1e-14)
    # P_noise = G k_B T_amp Δf with T_amp = 11 K, Δf = 150 MHz
    assert device_model.noise_power == pytest.approx(10**5.184 * K_B * 11 * 150e6, rel=1e-12)
    assert device_model.noise_power == pytest.approx(3.4799037087e-9, rel=1e-9)


def test_highbias_coefficients_frozen(device_model):
    a, b, c = highbias_coefficients(device_model)
    gtr, gb, gx = MHz_to_rad(1.78), MHz_to_rad(17.39), MHz_to_rad(0.46)
    assert a == pytest.approx(gtr * gb / (gtr + gb + gx) * E_CHARGE / 2, rel=1e-14)
    assert device_model.gain_linear * a == pytest.approx(1.212438032543899e-07, rel=1e-12)
    assert b < 0 and c < 0


def test_highbias_power_matches_exact_far_above_gap(device_model):
    gap = device_model.junction.gap_energy
    for x in (8.0, 20.0):
        v = gap_units_to_bias(x, gap)
        exact = transmitted_power_exact(v, device_model)
        approx = transmitted_power_highbias(v, device_model)
        assert approx == pytest.approx(exact, rel=2e-3 if x == 8.0 else 1e-4)
    with pytest.raises(ValueError):
        transmitted_power_highbias(0.0, device_model)


def test_transmitted_power_symmetric_and_monotone(device_model):
    gap = device_model.junction.gap_energy
    v = gap_units_to_bias(np.array([1.5, 3.0, 6.0]), gap)
    p = transmitted_power_sweep(v, device_model)
    assert np.all(np.diff(p) > 0)
    assert transmitted_power_exact(-v[1], device_model) == pytest.approx(p[1], rel=1e-12)


def test_zero_bias_power_is_negligible(device_model):
    # tunneling bath at 100 mK and line at 10 mK: only a tiny thermal flux
    p0 = transmitted_power_exact(0.0, device_model)
    assert 0 < p0 < 1e-18
    assert output_power(p0, device_model) == pytest.approx(3.48e-9, rel=1e-3)


def test_tunneling_reservoir_large_bias_photon_number(device_model):
    gap = device_model.junction.gap_energy
    v = gap_units_to_bias(10.0, gap)
    res = tunneling_reservoir(v, device_model)
    ev = E_CHARGE * junction_voltage(v)
    assert res.photon_number == pytest.approx(ev / (2 * HBAR * OMEGA) - 0.5 - gap**2 / (2 * HBAR * OMEGA * ev), rel=1e-4)
    assert res.damping_rate == pytest.approx(device_model.gamma_bar * (1 + gap**2 / (2 * ev**2)), rel=1e-4)


def test_build_model_excess_override():
    m = build_model(1e8, 1e7, 3e6, excess_photon_number=2.5)
    assert m.excess.photon_number == 2.5
    assert m.line.photon_number < 1e-9
