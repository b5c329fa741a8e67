"""Power balance between the resonator mode and its dissipative reservoirs.

Sign convention: :func:`reservoir_power` is positive when energy flows from
the reservoir *into* the resonator. Transmitted power is reported the other
way round, positive when it is delivered to the transmission line.
"""

import enum
from dataclasses import dataclass, replace

import numpy as np

from .constants import E_CHARGE, HBAR, K_B, TWO_PI, junction_voltage
from .tunneling import (
    CircuitParams,
    JunctionParams,
    asymptotic_damping,
    photon_number_from_temperature,
    tunneling_sums,
)


class ReservoirLabel(str, enum.Enum):
    TRANSMISSION_LINE = "transmission_line"
    TUNNELING_ENV = "tunneling_env"
    EXCESS = "excess"


@dataclass(frozen=True)
class Reservoir:
    label: ReservoirLabel
    damping_rate: float
    photon_number: float

    def __post_init__(self):
        object.__setattr__(self, "label", ReservoirLabel(self.label))
        if not self.damping_rate >= 0:
            raise ValueError("damping_rate must be non-negative")
        if not self.photon_number >= 0:
            raise ValueError("photon_number must be non-negative")


@dataclass(frozen=True)
class SystemModel:
    """Junction and circuit with the fixed reservoirs and the amplifier chain.

    The tunneling reservoir is bias dependent and is built on demand by
    :func:`tunneling_reservoir`.
    """

    junction: JunctionParams
    circuit: CircuitParams
    line: Reservoir
    excess: Reservoir
    gain_linear: float = 1.0
    noise_power: float = 0.0

    def __post_init__(self):
        if self.line.label is not ReservoirLabel.TRANSMISSION_LINE:
            raise ValueError("line reservoir must carry the transmission_line label")
        if self.excess.label is not ReservoirLabel.EXCESS:
            raise ValueError("excess reservoir must carry the excess label")
        if not self.gain_linear > 0:
            raise ValueError("gain_linear must be positive")
        if not self.noise_power >= 0:
            raise ValueError("noise_power must be non-negative")

    @property
    def omega_r(self):
        return self.circuit.resonator_frequency

    @property
    def gamma_bar(self):
        return asymptotic_damping(self.circuit, self.junction)

    @property
    def gain_dB(self):
        return 10.0 * np.log10(self.gain_linear)

    def with_gain(self, gain_linear=None, noise_power=None):
        return replace(
            self,
            gain_linear=self.gain_linear if gain_linear is None else gain_linear,
            noise_power=self.noise_power if noise_power is None else noise_power,
        )


def tuned_resistance(circuit, gamma_bar):
    """Tunneling resistance R_T that makes the circuit produce ``gamma_bar``."""
    beta = circuit.coupling_capacitance / circuit.total_capacitance
    return 2.0 * beta**2 * circuit.resonator_impedance * circuit.resonator_frequency / gamma_bar


def build_model(
    gamma_bar,
    gamma_tr,
    gamma_x,
    omega_r=TWO_PI * 4.67e9,
    junction=None,
    gain_dB=0.0,
    noise_temperature=0.0,
    bandwidth=150e6,
    bath_temperature=0.01,
    excess_photon_number=None,
    coupling_capacitance=4e-15,
    junction_capacitance=2e-15,
    stray_capacitance=2e-15,
    resonator_impedance=50.0,
):
    """Assemble a :class:`SystemModel` from damping rates (rad/s).

    The capacitances are placeholders; the junction's tunneling resistance
    is chosen so the circuit reproduces ``gamma_bar`` exactly. Line and
    excess baths are thermal at ``bath_temperature`` unless
    ``excess_photon_number`` is given. The noise power is
    ``G k_B T_amp Δf``.
    """
    junction = JunctionParams() if junction is None else junction
    circuit = CircuitParams(
        coupling_capacitance=coupling_capacitance,
        junction_capacitance=junction_capacitance,
        stray_capacitance=stray_capacitance,
        resonator_impedance=resonator_impedance,
        resonator_frequency=omega_r,
    )
    junction = replace(junction, tunneling_resistance=tuned_resistance(circuit, gamma_bar))
    n_bath = float(photon_number_from_temperature(bath_temperature, omega_r))
    n_x = n_bath if excess_photon_number is None else excess_photon_number
    gain = 10.0 ** (gain_dB / 10.0)
    return SystemModel(
        junction=junction,
        circuit=circuit,
        line=Reservoir(ReservoirLabel.TRANSMISSION_LINE, gamma_tr, n_bath),
        excess=Reservoir(ReservoirLabel.EXCESS, gamma_x, n_x),
        gain_linear=gain,
        noise_power=gain * K_B * noise_temperature * bandwidth,
    )


def reservoir_power(reservoir, resonator_occupation, omega_r):
    """Net power ħω_r γ_i (N_i - N_r) flowing from a reservoir into the resonator."""
    return HBAR * omega_r * reservoir.damping_rate * (reservoir.photon_number - resonator_occupation)


def steady_state_occupation(reservoirs):
    """Resonator occupation at which the reservoir powers sum to zero."""
    rates = np.array([r.damping_rate for r in reservoirs], dtype=float)
    numbers = np.array([r.photon_number for r in reservoirs], dtype=float)
    total = rates.sum()
    if not total > 0:
        raise ValueError("at least one reservoir needs a positive damping rate")
    n_r = float(np.dot(rates, numbers) / total)
    # rounding can push a weighted mean a hair outside its support
    return min(max(n_r, numbers[rates > 0].min()), numbers[rates > 0].max())


def tunneling_reservoir(bias_full, model):
    """Exact tunneling reservoir (γ_T, N_T) at full SINIS bias ``bias_full``."""
    v = junction_voltage(bias_full)
    s_plus, s_minus = tunneling_sums(v, model.junction, model.omega_r)
    gamma_t = model.gamma_bar * np.pi / model.omega_r * (s_plus - s_minus)
    if not s_plus > s_minus:
        raise ValueError("tunneling environment has no positive damping at this bias")
    return Reservoir(ReservoirLabel.TUNNELING_ENV, gamma_t, s_minus / (s_plus - s_minus))


def transmitted_power_exact(bias_full, model):
    """Power delivered into the transmission line from the exact steady state (W)."""
    tunneling = tunneling_reservoir(bias_full, model)
    n_r = steady_state_occupation([tunneling, model.line, model.excess])
    return -reservoir_power(model.line, n_r, model.omega_r)


def transmitted_power_sweep(biases_full, model):
    return np.array([transmitted_power_exact(v, model) for v in np.asarray(biases_full, dtype=float)])


def highbias_coefficients(model):
    """Coefficients (a, b, c) of P_tr ≈ a V + b + c / V in the single-junction voltage V.

    This is the high-bias closed form rearranged as a Laurent polynomial;
    multiply by the gain to get the coefficients of the output power.
    """
    gb = model.gamma_bar
    gtr, ntr = model.line.damping_rate, model.line.photon_number
    gx, nx = model.excess.damping_rate, model.excess.photon_number
    total = gb + gtr + gx
    prefactor = gtr * gb / total
    hw = HBAR * model.omega_r
    delta = model.junction.gap_energy
    a = prefactor * E_CHARGE / 2.0
    b = prefactor * hw * (gx * (nx - ntr) / gb - ntr - 0.5)
    c = -prefactor * delta**2 * (1.0 + gb / total) / (4.0 * E_CHARGE)
    return a, b, c


def transmitted_power_highbias(bias_full, model):
    """High-bias approximation of the transmitted power (W)."""
    v = junction_voltage(np.asarray(bias_full, dtype=float))
    if np.any(v == 0):
        raise ValueError("high-bias transmitted power is undefined at zero bias")
    a, b, c = highbias_coefficients(model)
    out = a * v + b + c / v
    return out[()] if out.ndim == 0 else out


def output_power(transmitted, model):
    """Power at the output of the amplifier chain, G P_tr + P_noise (W)."""
    return model.gain_linear * transmitted + model.noise_power
