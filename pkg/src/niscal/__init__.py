"""Gain and noise-temperature calibration of cryogenic amplification chains
with a voltage-biased SINIS junction as a tunable microwave source."""

__version__ = "0.1.0"

from .constants import junction_voltage
from .tunneling import (
    CircuitParams,
    JunctionParams,
    QuadratureError,
    asymptotic_damping,
    damping_rate_exact,
    damping_rate_highbias,
    dynes_dos,
    effective_photon_number,
    effective_temperature,
    fermi_occupation,
    forward_tunneling_rate,
    log_forward_tunneling_rate,
    photon_number_from_temperature,
    photon_number_highbias,
)
from .thermal import (
    Reservoir,
    ReservoirLabel,
    SystemModel,
    build_model,
    output_power,
    reservoir_power,
    steady_state_occupation,
    transmitted_power_exact,
    transmitted_power_highbias,
)
from .reflection import (
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
)
from .calibration import (
    CalibrationResult,
    PowerFitError,
    PowerTrace,
    SpectrumTrace,
    calibrate,
    extract_gain,
    fit_power_curve,
    integrate_spectrum,
    noise_temperature,
    propagate_gain_uncertainty,
)
from .montecarlo import (
    MonteCarloConfig,
    RangeStudyResult,
    expected_coefficient,
    range_sweep_study,
    synthesize_power_data,
)
