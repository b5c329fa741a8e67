"""Photon-assisted tunneling through a voltage-biased NIS junction.

Energies are in joules, rates in 1/s or rad/s. Every bias argument in this
module is the voltage across a *single* junction; convert a full SINIS bias
with :func:`niscal.constants.junction_voltage` first.

The forward-tunneling kernel uses the identity

    [f(ε - E) - f(ε)] / [1 - exp(-E/kT)] = f(ε - E) [1 - f(ε)]

which is finite at E = 0 (where it reduces to kT·(-∂f/∂ε)) and never
suffers from cancellation.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .constants import E_CHARGE, HBAR, K_B, TWO_PI, ueV_to_J


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate, error_bound):
        super().__init__(f"{message} (estimate={estimate:.6e}, error bound={error_bound:.3e})")
        self.estimate = estimate
        self.error_bound = error_bound


@dataclass(frozen=True)
class JunctionParams:
    """One NIS junction.

    Attributes
    ----------
    gap_energy : float
        Superconducting half-gap Δ in J.
    dynes_parameter : float
        Dimensionless Dynes broadening γ_D.
    tunneling_resistance : float
        Tunneling resistance R_T of one junction in Ω.
    normal_temperature : float
        Quasiparticle temperature T_N in K, shared by both electrodes.
    """

    gap_energy: float = ueV_to_J(200.0)
    dynes_parameter: float = 1e-4
    tunneling_resistance: float = 10e3
    normal_temperature: float = 0.1

    def __post_init__(self):
        if not self.gap_energy > 0:
            raise ValueError("gap_energy must be positive")
        if not self.dynes_parameter >= 0:
            raise ValueError("dynes_parameter must be non-negative")
        if not self.tunneling_resistance > 0:
            raise ValueError("tunneling_resistance must be positive")
        if not self.normal_temperature > 0:
            raise ValueError("normal_temperature must be positive")

    @property
    def thermal_energy(self):
        return K_B * self.normal_temperature


@dataclass(frozen=True)
class CircuitParams:
    """Lumped circuit around the junction and the resonator mode.

    Capacitances in F, impedances in Ω, ``resonator_frequency`` is the
    angular frequency ω_r in rad/s.
    """

    coupling_capacitance: float
    junction_capacitance: float
    stray_capacitance: float
    resonator_impedance: float
    resonator_frequency: float
    line_impedance: float = 50.0

    def __post_init__(self):
        caps = (self.coupling_capacitance, self.junction_capacitance, self.stray_capacitance)
        if min(caps) < 0:
            raise ValueError("capacitances must be non-negative")
        if not self.coupling_capacitance > 0:
            raise ValueError("coupling_capacitance must be positive")
        if not self.resonator_impedance > 0:
            raise ValueError("resonator_impedance must be positive")
        if not self.resonator_frequency > 0:
            raise ValueError("resonator_frequency must be positive")
        if not self.line_impedance > 0:
            raise ValueError("line_impedance must be positive")

    @property
    def total_capacitance(self):
        return self.coupling_capacitance + self.junction_capacitance + self.stray_capacitance


def fermi_occupation(energy, temperature):
    """Fermi-Dirac occupation 1/(exp(ε/k_B T) + 1)."""
    if not np.all(np.asarray(temperature) > 0):
        raise ValueError("temperature must be positive")
    return special.expit(-np.asarray(energy) / (K_B * temperature))


def _dos_reduced(x, gamma_d):
    z = x + 1j * gamma_d
    return np.abs(np.real(z / np.sqrt(z * z - 1.0)))


def dynes_dos(energy, params):
    """Dynes-broadened BCS density of states normalized to the normal state.

    Uses the principal branch of the complex square root. With a vanishing
    Dynes parameter the density of states is singular at ``|ε| = Δ`` and a
    ``ValueError`` is raised there.
    """
    x = np.asarray(energy, dtype=float) / params.gap_energy
    if params.dynes_parameter == 0 and np.any(np.abs(x) == 1.0):
        raise ValueError("density of states is singular at |energy| = gap for zero Dynes parameter")
    out = _dos_reduced(x, params.dynes_parameter)
    return out[()] if out.ndim == 0 else out


def log_forward_tunneling_rate(energy_gain, params, rtol=1e-9):
    """Natural logarithm of the normalized forward tunneling rate F(E) (F in 1/s).

    Deep below the gap F(E) falls like exp(E/k_B T_N) and underflows double
    precision long before the logarithm does, so the occupation factor is
    divided by its maximum before integrating and the scale is added back
    in log space.

    The integral over quasiparticle energies is evaluated by adaptive
    Gauss-Kronrod quadrature on ``|ε| <= |E| + Δ + 40 k_B T_N`` with
    break points at the gap edges and at the two Fermi steps.

    Raises
    ------
    QuadratureError
        If the quadrature error bound exceeds ``1e3 * rtol`` relative.
    """
    if not rtol >= 50 * np.finfo(float).eps:
        raise ValueError("rtol must be at least 50 machine epsilons")
    delta = params.gap_energy
    e = float(energy_gain) / delta
    t = params.thermal_energy / delta
    gd = params.dynes_parameter
    half = abs(e) + 1.0 + 40.0 * t
    # log f(x - e)(1 - f(x)) peaks at x = e/2
    shift = 2.0 * special.log_expit(0.5 * e / t)

    def integrand(x):
        occ = np.exp(special.log_expit((e - x) / t) + special.log_expit(x / t) - shift)
        return _dos_reduced(x, gd) * occ

    candidates = {-1.0, 1.0, 0.0, e, 0.5 * e, 1.0 + e, -1.0 + e, 1.0 - e, -1.0 - e}
    points = sorted(p for p in candidates if -half < p < half)
    value, abserr, *rest = integrate.quad(
        integrand, -half, half, points=points, epsabs=0.0, epsrel=rtol, limit=2000, full_output=1
    )
    if not value > 0:
        raise QuadratureError("forward tunneling integral is not positive", value, abserr)
    if abserr > 1e3 * rtol * value:
        raise QuadratureError("forward tunneling integral did not converge", value, abserr)
    return float(np.log(value) + shift + np.log(delta / (TWO_PI * HBAR)))


def forward_tunneling_rate(energy_gain, params, rtol=1e-9):
    """Normalized forward tunneling rate F(E) in 1/s.

    F(E) = (1/2πħ) ∫ n_S(ε) f(ε - E) [1 - f(ε)] dε, the rate per unit
    conductance quantum at which an electron gains energy E. See
    :func:`log_forward_tunneling_rate` for the quadrature; the result
    underflows to 0 for E far below -Δ at low temperature.
    """
    return float(np.exp(log_forward_tunneling_rate(energy_gain, params, rtol)))


def asymptotic_damping(circuit, junction):
    """High-bias damping rate γ̄_T = 2 C_c² Z_r ω_r / [(C_c + C_j + C_m)² R_T] in rad/s."""
    c_tot = circuit.total_capacitance
    if c_tot == 0:
        raise ValueError("total capacitance is zero")
    return (
        2.0
        * circuit.coupling_capacitance**2
        * circuit.resonator_impedance
        * circuit.resonator_frequency
        / (c_tot**2 * junction.tunneling_resistance)
    )


def tunneling_sums(bias_per_junction, junction, omega_r):
    """Return (S₊, S₋) with S_± = Σ_τ F(τ eV ± ħω_r)."""
    ev = E_CHARGE * bias_per_junction
    hw = HBAR * omega_r
    s_plus = forward_tunneling_rate(ev + hw, junction) + forward_tunneling_rate(-ev + hw, junction)
    s_minus = forward_tunneling_rate(ev - hw, junction) + forward_tunneling_rate(-ev - hw, junction)
    return s_plus, s_minus


def damping_rate_exact(bias_per_junction, gamma_bar, junction, omega_r):
    """Tunneling-induced damping rate γ_T(V) of the resonator mode, in rad/s."""
    if not gamma_bar > 0:
        raise ValueError("gamma_bar must be positive")
    s_plus, s_minus = tunneling_sums(bias_per_junction, junction, omega_r)
    return gamma_bar * np.pi / omega_r * (s_plus - s_minus)


def effective_temperature(bias_per_junction, junction, omega_r):
    """Effective temperature T_T(V) of the tunneling environment, in K."""
    s_plus, s_minus = tunneling_sums(bias_per_junction, junction, omega_r)
    if s_minus == 0.0:
        return 0.0
    ratio = s_plus / s_minus
    if not ratio > 1.0:
        raise ValueError(f"emission/absorption ratio {ratio!r} <= 1; effective temperature undefined")
    return HBAR * omega_r / (K_B * np.log(ratio))


def effective_photon_number(bias_per_junction, junction, omega_r):
    """Bose occupation of the tunneling environment, S₋/(S₊ - S₋).

    Equivalent to ``photon_number_from_temperature(effective_temperature(...))``
    without the round trip through a logarithm.
    """
    s_plus, s_minus = tunneling_sums(bias_per_junction, junction, omega_r)
    if not s_plus > s_minus:
        raise ValueError("emission/absorption ratio <= 1; photon number undefined")
    return s_minus / (s_plus - s_minus)


def photon_number_from_temperature(temperature, omega_r):
    """Bose-Einstein occupation 1/(exp(ħω_r/k_B T) - 1)."""
    temperature = np.asarray(temperature, dtype=float)
    if not np.all(temperature > 0):
        raise ValueError("temperature must be positive")
    x = HBAR * omega_r / (K_B * temperature)
    out = np.exp(-x) / -np.expm1(-x)
    return out[()] if out.ndim == 0 else out


def damping_rate_highbias(bias_per_junction, gap, gamma_bar):
    """Sommerfeld approximation γ̄_T [1 + Δ²/(2 (eV)²)] for eV ≫ Δ."""
    ev = E_CHARGE * np.asarray(bias_per_junction, dtype=float)
    if np.any(ev == 0):
        raise ValueError("high-bias damping rate is undefined at zero bias")
    return gamma_bar * (1.0 + 0.5 * gap**2 / ev**2)


def photon_number_highbias(bias_per_junction, gap, omega_r):
    """Sommerfeld approximation eV/(2ħω_r) - 1/2 - Δ²/(2ħω_r eV).

    No clamping: outside eV ≫ Δ the result can be negative.
    """
    ev = E_CHARGE * np.asarray(bias_per_junction, dtype=float)
    if np.any(ev == 0):
        raise ValueError("high-bias photon number is undefined at zero bias")
    hw = HBAR * omega_r
    return ev / (2.0 * hw) - 0.5 - gap**2 / (2.0 * hw * ev)
