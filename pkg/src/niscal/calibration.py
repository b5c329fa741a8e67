"""Total gain and noise temperature of the amplification chain.

The output power above the gap is fitted with ``a V + b + c/V`` in the
single-junction voltage ``V = V_b/2``; the gain follows from ``a`` and the
damping rates, the noise temperature from the zero-bias output power.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np

from .constants import E_CHARGE, K_B, junction_voltage


class PowerFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class PowerTrace:
    """Output power (W) versus full SINIS bias (V), optionally with 1σ per point."""

    bias_full: np.ndarray
    power: np.ndarray
    sigma: np.ndarray = None

    def __post_init__(self):
        v = np.asarray(self.bias_full, dtype=float)
        p = np.asarray(self.power, dtype=float)
        if v.ndim != 1 or p.shape != v.shape:
            raise ValueError("bias and power must be 1-D arrays of equal length")
        if np.any(np.diff(v) <= 0):
            raise ValueError("biases must be strictly increasing")
        if not np.all(np.isfinite(p)):
            raise ValueError("powers must be finite")
        object.__setattr__(self, "bias_full", v)
        object.__setattr__(self, "power", p)
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != v.shape or np.any(s <= 0):
                raise ValueError("sigma must be positive and match the biases")
            object.__setattr__(self, "sigma", s)

    def window(self, lo, hi):
        keep = (self.bias_full >= lo) & (self.bias_full <= hi)
        return PowerTrace(self.bias_full[keep], self.power[keep],
                          None if self.sigma is None else self.sigma[keep])


@dataclass(frozen=True)
class SpectrumTrace:
    """Power spectral density (W/Hz) on a frequency grid (Hz), integrated over ``band``."""

    frequencies: np.ndarray
    spectral_density: np.ndarray
    band: tuple

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        d = np.asarray(self.spectral_density, dtype=float)
        if f.shape != d.shape or f.ndim != 1 or np.any(np.diff(f) <= 0):
            raise ValueError("spectral density needs a strictly increasing frequency grid")
        if np.any(d < 0):
            raise ValueError("spectral density must be non-negative")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "spectral_density", d)


@dataclass
class PowerFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    window: tuple
    n_points: int
    residual_rms: float

    @property
    def a(self):
        return self.coefficients[0]

    @property
    def a_sigma(self):
        return float(np.sqrt(self.covariance[0, 0]))

    def predict(self, bias_full):
        v = junction_voltage(np.asarray(bias_full, dtype=float))
        a, b, c = self.coefficients
        return a * v + b + c / v


@dataclass
class CalibrationResult:
    a: float
    b: float
    c: float
    covariance: np.ndarray
    gain_linear: float
    gain_dB: float
    gain_sigma_dB: float
    noise_temperature: float
    fit_window: tuple
    n_points: int = 0
    bandwidth: float = 150e6
    zero_bias_power: float = float("nan")
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "a_W_per_V": self.a,
            "b_W": self.b,
            "c_W_V": self.c,
            "covariance_abc": np.asarray(self.covariance).tolist(),
            "a_sigma_W_per_V": float(np.sqrt(self.covariance[0][0])),
            "gain_linear": self.gain_linear,
            "gain_dB": self.gain_dB,
            "gain_sigma_dB": self.gain_sigma_dB,
            "noise_temperature_K": self.noise_temperature,
            "zero_bias_power_W": self.zero_bias_power,
            "bandwidth_Hz": self.bandwidth,
            "fit_window_bias_V": list(self.fit_window),
            "n_points": self.n_points,
            **self.extras,
        }


def integrate_spectrum(spectrum):
    """Trapezoidal integral of the spectral density over ``spectrum.band`` (W)."""
    lo, hi = spectrum.band
    f, d = spectrum.frequencies, spectrum.spectral_density
    if not (f[0] <= lo < hi <= f[-1]):
        raise ValueError(f"band {spectrum.band} lies outside the frequency grid [{f[0]}, {f[-1]}]")
    inner = (f > lo) & (f < hi)
    grid = np.concatenate([[lo], f[inner], [hi]])
    vals = np.concatenate([[np.interp(lo, f, d)], d[inner], [np.interp(hi, f, d)]])
    return float(np.trapezoid(vals, grid))


def fit_power_curve(trace, window=None):
    """Linear least squares of P_out = a V + b + c/V with V = V_b/2.

    Parameters
    ----------
    trace : PowerTrace
    window : (float, float), optional
        Inclusive full-bias range (V) of points entering the fit.

    Returns
    -------
    PowerFit
        Coefficients (a in W/V, b in W, c in W·V) and their covariance.
        With per-point σ the covariance is absolute; otherwise it is scaled
        by the residual variance (NaN with exactly three points).
    """
    if window is not None:
        trace = trace.window(*window)
    v = junction_voltage(trace.bias_full)
    if v.size < 3:
        raise PowerFitError(f"need at least 3 points in the fit window, got {v.size}")
    if np.any(v == 0):
        raise PowerFitError("zero bias cannot enter the power fit")
    design = np.column_stack([v, np.ones_like(v), 1.0 / v])
    y = trace.power
    if trace.sigma is not None:
        design_w = design / trace.sigma[:, None]
        y_w = y / trace.sigma
    else:
        design_w, y_w = design, y
    norms = np.linalg.norm(design_w, axis=0)
    scaled = design_w / norms
    if np.linalg.matrix_rank(scaled) < 3:
        raise PowerFitError("design matrix is singular")
    sol, *_ = np.linalg.lstsq(scaled, y_w, rcond=None)
    coef = sol / norms
    inv = np.linalg.inv(scaled.T @ scaled) / np.outer(norms, norms)
    resid = y - design @ coef
    dof = v.size - 3
    if trace.sigma is not None:
        cov = inv
    elif dof > 0:
        cov = inv * np.sum(resid**2) / dof
    else:
        warnings.warn("three points leave no residual degrees of freedom; covariance is undefined")
        cov = np.full((3, 3), np.nan)
    cov = 0.5 * (cov + cov.T)
    lo, hi = trace.bias_full[0], trace.bias_full[-1]
    return PowerFit(coef, cov, (float(lo), float(hi)), int(v.size), float(np.sqrt(np.mean(resid**2))))


def gain_prefactor(rates):
    """γ_tr γ̄_T / (γ̄_T + γ_tr + γ_x) in rad/s."""
    return rates.gamma_tr * rates.gamma_bar_T / (rates.gamma_bar_T + rates.gamma_tr + rates.gamma_x)


def extract_gain(a, rates):
    """Total gain from the linear coefficient ``a`` (W/V).

    Returns
    -------
    (gain_linear, gain_dB)
    """
    if not a > 0:
        raise ValueError("linear power coefficient must be positive")
    if not (rates.gamma_tr > 0 and rates.gamma_bar_T > 0 and rates.gamma_x >= 0):
        raise ValueError("damping rates must be positive")
    gain = 2.0 * a / (E_CHARGE * gain_prefactor(rates))
    return gain, 10.0 * np.log10(gain)


def coefficient_from_gain(gain_linear, rates):
    """Linear coefficient a implied by a known gain; inverse of :func:`extract_gain`."""
    return gain_linear * 0.5 * E_CHARGE * gain_prefactor(rates)


def noise_temperature(zero_bias_power, gain, bandwidth):
    """Input-referred noise temperature P_out(0) / (G k_B Δf) in K."""
    if not gain > 0:
        raise ValueError("gain must be positive")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    return zero_bias_power / (gain * K_B * bandwidth)


def propagate_gain_uncertainty(a, sigma_a, rates):
    """First-order 1σ of the gain in dB, treating a and the three rates as independent."""
    if sigma_a < 0:
        raise ValueError("sigma_a must be non-negative")
    gb, gtr, gx = rates.gamma_bar_T, rates.gamma_tr, rates.gamma_x
    total = gb + gtr + gx
    sig_x = 0.0 if np.isnan(rates.gamma_x_sigma) else rates.gamma_x_sigma
    # partial derivatives of ln G
    terms = [
        sigma_a / a,
        (1.0 / total - 1.0 / gb) * rates.gamma_bar_T_sigma,
        (1.0 / total - 1.0 / gtr) * rates.gamma_tr_sigma,
        sig_x / total,
    ]
    return float(10.0 / np.log(10.0) * np.sqrt(np.sum(np.square(terms))))


def check_zero_bias_assumption(zero_bias_power, gain, transmitted_at_zero, limit=0.01):
    """Warn when G·P_tr(0) is not negligible against P_out(0). Returns the ratio."""
    ratio = abs(gain * transmitted_at_zero) / abs(zero_bias_power) if zero_bias_power else np.inf
    if ratio >= limit:
        warnings.warn(
            f"transmitted power at zero bias is {ratio:.2%} of P_out(0); the noise temperature is biased"
        )
    return ratio


def calibrate(trace, rates, window, bandwidth=150e6, zero_bias_power=None):
    """Fit the power curve and turn it into a :class:`CalibrationResult`.

    ``zero_bias_power`` defaults to the trace value at V_b = 0, which must
    then be present.
    """
    fit = fit_power_curve(trace, window)
    gain, gain_db = extract_gain(fit.a, rates)
    sigma_db = propagate_gain_uncertainty(fit.a, fit.a_sigma, rates)
    if zero_bias_power is None:
        at_zero = np.flatnonzero(trace.bias_full == 0)
        if at_zero.size == 0:
            raise ValueError("no zero-bias point in the power trace; pass zero_bias_power")
        zero_bias_power = float(trace.power[at_zero[0]])
    t_amp = noise_temperature(zero_bias_power, gain, bandwidth)
    a, b, c = (float(x) for x in fit.coefficients)
    return CalibrationResult(
        a=a, b=b, c=c, covariance=fit.covariance, gain_linear=float(gain), gain_dB=float(gain_db),
        gain_sigma_dB=sigma_db, noise_temperature=float(t_amp), fit_window=fit.window,
        n_points=fit.n_points, bandwidth=bandwidth, zero_bias_power=zero_bias_power,
    )
