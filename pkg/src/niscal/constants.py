"""Physical constants (CODATA 2018, via scipy) and unit helpers.

Everything inside the package is SI: energies in J, rates in rad/s,
frequencies in Hz. Human-facing layers convert with the helpers below.
"""

from scipy import constants as _c

HBAR = _c.hbar
K_B = _c.k
E_CHARGE = _c.e

MICRO_EV = 1e-6 * _c.e  # J per µeV
TWO_PI = 2.0 * _c.pi


def ueV_to_J(value):
    return value * MICRO_EV


def J_to_ueV(value):
    return value / MICRO_EV


def MHz_to_rad(value):
    """Convert a rate quoted as γ/(2π) in MHz to rad/s."""
    return TWO_PI * 1e6 * value


def rad_to_MHz(value):
    return value / (TWO_PI * 1e6)


def junction_voltage(bias_full):
    """Voltage across one NIS junction of a symmetric SINIS structure.

    This is the only place where the full bias V_b is halved.
    """
    return 0.5 * bias_full


def gap_units_to_bias(x, gap_energy):
    """Full bias V_b for a bias quoted as eV_b/(2Δ)."""
    return 2.0 * x * gap_energy / E_CHARGE


def bias_to_gap_units(bias_full, gap_energy):
    return E_CHARGE * bias_full / (2.0 * gap_energy)
