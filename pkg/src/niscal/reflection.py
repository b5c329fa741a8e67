"""Reflection coefficient of the resonator and damping-rate extraction.

Each bias trace is divided by the zero-bias trace, which removes the
frequency-dependent background of the measurement chain. The ratio of two
reflection coefficients is then fitted by nonlinear least squares.

Two degeneracies of the normalized data shape the parametrization:

* γ_T and γ_x only enter a single reflection coefficient through their sum,
  so γ_x is pinned by the zero-bias trace where γ_T takes a fixed reference
  value (default 0).
* Scaling γ_tr and every Fano factor by the same number leaves the ratio
  unchanged, so the zero-bias Fano factor is a fixed reference (default 1).

Both references live in :class:`ZeroBiasReference`.
"""

from dataclasses import dataclass, field, replace
import itertools
import warnings

import numpy as np
from scipy import optimize

from .constants import E_CHARGE, TWO_PI, junction_voltage


class FitError(RuntimeError):
    """Nonlinear fit did not converge; ``best`` holds the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class ReflectionTrace:
    """Complex reflection versus probe frequency at one full bias ``bias_full`` (V)."""

    bias_full: float
    frequencies: np.ndarray
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if f.ndim != 1 or v.shape != f.shape:
            raise ValueError("frequencies and values must be 1-D arrays of equal length")
        if f.size < 2 or np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("reflection values must be finite")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)

    @property
    def omega(self):
        return TWO_PI * self.frequencies


@dataclass(frozen=True)
class ReflectionFitParams:
    """Parameters of one reflection coefficient; rates and resonance in rad/s."""

    gamma_tr: float
    gamma_x: float
    gamma_T: float
    fano: complex = 1.0 + 0.0j
    resonance: float = 0.0

    def __post_init__(self):
        for name in ("gamma_tr", "gamma_x", "gamma_T"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 < abs(self.fano) < 2:
            raise ValueError("|fano| must lie in (0, 2)")
        object.__setattr__(self, "fano", complex(self.fano))


@dataclass(frozen=True)
class ZeroBiasReference:
    """Fixed quantities of the zero-bias trace used for normalization."""

    fano: complex = 1.0 + 0.0j
    gamma_T: float = 0.0


@dataclass(frozen=True)
class RateEstimates:
    """Damping rates (rad/s) with 1σ uncertainties (rad/s).

    ``gamma_x_sigma`` is NaN when only one bias point was available.
    """

    gamma_tr: float
    gamma_bar_T: float
    gamma_x: float
    gamma_tr_sigma: float = 0.0
    gamma_bar_T_sigma: float = 0.0
    gamma_x_sigma: float = 0.0

    def __post_init__(self):
        for name in ("gamma_tr_sigma", "gamma_bar_T_sigma", "gamma_x_sigma"):
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class TraceFit:
    """Fit of one normalized trace."""

    bias_full: float
    params: ReflectionFitParams
    zero_bias_resonance: float
    rms_residual: float
    cost: float
    nfev: int
    jacobian: np.ndarray = field(repr=False, default=None)
    intervals: dict = field(default_factory=dict)


@dataclass
class ReflectionFitResult:
    """Joint fit over all bias traces plus the independent per-trace fits."""

    gamma_tr: float
    gamma_x: float
    zero_bias_resonance: float
    reference: ZeroBiasReference
    traces: list
    independent: list
    cost: float
    converged: bool

    @property
    def biases(self):
        return np.array([t.bias_full for t in self.traces])

    @property
    def gamma_T(self):
        return np.array([t.params.gamma_T for t in self.traces])

    def interval_sigma(self, name):
        """Per-trace half-widths of the error-circle interval for ``name``."""
        return np.array([0.5 * (t.intervals[name][1] - t.intervals[name][0]) for t in self.traces])


def reflection_model(omega_p, params):
    """Voltage reflection coefficient of the resonator with a Fano correction."""
    omega_p = np.asarray(omega_p, dtype=float)
    r = params.fano
    detuning = omega_p - params.resonance
    kappa = params.gamma_T + params.gamma_x
    total = kappa + params.gamma_tr
    num = (2.0 - r) * params.gamma_tr - r * kappa + 2j * r * detuning
    den = total - 2j * detuning
    if np.any(den == 0):
        raise ValueError("zero total damping at zero detuning")
    return num / den


def normalized_model(omega_p, params, zero_bias_resonance, reference=ZeroBiasReference()):
    """Ratio of the biased reflection coefficient to the zero-bias one."""
    zero = ReflectionFitParams(
        params.gamma_tr, params.gamma_x, reference.gamma_T, reference.fano, zero_bias_resonance
    )
    return reflection_model(omega_p, params) / reflection_model(omega_p, zero)


def normalize_trace(trace, zero_bias, floor=1e-12):
    """Divide ``trace`` pointwise by the zero-bias trace."""
    if trace.frequencies.shape != zero_bias.frequencies.shape or not np.array_equal(
        trace.frequencies, zero_bias.frequencies
    ):
        raise ValueError("traces must share an identical frequency grid")
    if np.any(np.abs(zero_bias.values) < floor):
        raise ArithmeticError("zero-bias reflection vanishes on the grid; cannot normalize")
    return ReflectionTrace(trace.bias_full, trace.frequencies, trace.values / zero_bias.values, normalized=True)


# --- fitting ---------------------------------------------------------------

class _Scale:
    """Dimensionless units: offsets from the grid center in 1 % of the span."""

    def __init__(self, omega):
        self.center = 0.5 * (omega[0] + omega[-1])
        self.unit = (omega[-1] - omega[0]) / 100.0

    def x(self, omega):
        return (omega - self.center) / self.unit


def _algebraic_starts(x, y, reference):
    """Candidate starts from a linearized rational fit (Levy's method).

    The normalized trace is a ratio of two quadratics in x. Its poles are
    {biased pole, zero-bias zero} and its zeros {biased zero, zero-bias
    pole}; every assignment with both resonator poles in the lower half plane
    yields one candidate (γ_tr, γ_x, w0, γ_T, w1, r1) in scaled units.
    """
    a = np.column_stack([x**2, x, np.ones_like(x), -y * x, -y])
    sol, *_ = np.linalg.lstsq(a, y * x**2, rcond=None)
    n2, n1, n0, d1, d0 = sol
    den_roots = np.roots([1.0, d1, d0])
    num_roots = np.roots([n2, n1, n0]) if abs(n2) > 1e-12 else np.array([])
    starts = []
    if num_roots.size != 2:
        return starts
    for p1, z0 in itertools.permutations(den_roots):
        for z1, p0 in itertools.permutations(num_roots):
            if p1.imag >= 0 or p0.imag >= 0:
                continue
            total1 = -2.0 * p1.imag
            total0 = -2.0 * p0.imag
            gamma_tr = (-1j * (z0 - p0) * reference.fano).real
            if gamma_tr <= 0:
                continue
            q1 = -1j * (z1 - p1)
            r1 = gamma_tr / q1
            if not 0 < abs(r1) < 2:
                r1 = 1.0 + 0j
            gamma_x = max(total0 - gamma_tr - reference.gamma_T, 1e-3 * total0)
            gamma_t = max(total1 - gamma_tr - gamma_x, 1e-3 * total1)
            starts.append(np.array([gamma_tr, gamma_x, p0.real, gamma_t, p1.real, r1.real, r1.imag]))
    return starts


def _heuristic_start(x, y):
    """Fallback start: dip of |Γᴺ| for the biased resonance, peak for zero bias."""
    mag = np.abs(y)
    w1 = x[np.argmin(mag)]
    w0 = x[np.argmax(mag)]
    half = 0.5 * (mag.min() + np.median(mag))
    below = x[mag < half]
    width = max(below.max() - below.min(), 1.0) if below.size else 10.0
    return np.array([0.5 * width / 5, 0.1 * width / 5, w0, width, w1, 1.0, 0.0])


_SINGLE_NAMES = ("gamma_tr", "gamma_x", "w0", "gamma_T", "w1", "fano_re", "fano_im")


def _ratio(x, gtr, gx, w0, gt, w1, r1, reference_scaled):
    r0, gt0 = reference_scaled
    k1 = gt + gx
    num1 = (2.0 - r1) * gtr - r1 * k1 + 2j * r1 * (x - w1)
    den1 = gtr + k1 - 2j * (x - w1)
    k0 = gt0 + gx
    num0 = (2.0 - r0) * gtr - r0 * k0 + 2j * r0 * (x - w0)
    den0 = gtr + k0 - 2j * (x - w0)
    return num1 * den0 / (den1 * num0)


def _to_params(values, scale):
    return ReflectionFitParams(
        gamma_tr=max(values["gamma_tr"], 0.0) * scale.unit,
        gamma_x=max(values["gamma_x"], 0.0) * scale.unit,
        gamma_T=max(values["gamma_T"], 0.0) * scale.unit,
        fano=complex(values["fano_re"], values["fano_im"]),
        resonance=scale.center + values["w1"] * scale.unit,
    )


def _least_squares(fun, x0, lower, max_nfev):
    return optimize.least_squares(
        fun,
        x0,
        bounds=(lower, np.full_like(x0, np.inf)),
        method="trf",
        xtol=1e-10,
        ftol=1e-14,
        gtol=1e-14,
        x_scale="jac",
        max_nfev=max_nfev,
    )


def _lower_bounds(names):
    return np.array([0.0 if name.startswith("gamma") else -np.inf for name in names])


def fit_normalized_trace(trace, shared=None, init=None, reference=ZeroBiasReference(), max_nfev=200):
    """Fit one normalized trace.

    Parameters
    ----------
    trace : ReflectionTrace
        Normalized trace (Γ(V_b)/Γ(0)).
    shared : dict, optional
        Values (rad/s) to hold fixed, any of ``gamma_tr``, ``gamma_x``,
        ``zero_bias_resonance``.
    init : ReflectionFitParams, optional
        Starting point. By default starts come from a linearized rational
        fit, with a magnitude-based fallback.

    Raises
    ------
    FitError
        When no start converges within ``max_nfev`` evaluations.
    """
    if not trace.normalized:
        raise ValueError("trace must be normalized by the zero-bias trace")
    shared = dict(shared or {})
    omega = trace.omega
    scale = _Scale(omega)
    x = scale.x(omega)
    y = trace.values
    ref_scaled = (reference.fano, reference.gamma_T / scale.unit)

    fixed = {}
    if "gamma_tr" in shared:
        fixed["gamma_tr"] = shared["gamma_tr"] / scale.unit
    if "gamma_x" in shared:
        fixed["gamma_x"] = shared["gamma_x"] / scale.unit
    if "zero_bias_resonance" in shared:
        fixed["w0"] = scale.x(shared["zero_bias_resonance"])
    free = [n for n in _SINGLE_NAMES if n not in fixed]

    def residual(theta):
        v = dict(zip(free, theta))
        v.update(fixed)
        model = _ratio(x, v["gamma_tr"], v["gamma_x"], v["w0"], v["gamma_T"], v["w1"],
                       complex(v["fano_re"], v["fano_im"]), ref_scaled)
        diff = model - y
        return np.concatenate([diff.real, diff.imag])

    if init is not None:
        starts = [np.array([
            init.gamma_tr / scale.unit, init.gamma_x / scale.unit,
            scale.x(shared.get("zero_bias_resonance", init.resonance)),
            init.gamma_T / scale.unit, scale.x(init.resonance), init.fano.real, init.fano.imag,
        ])]
    else:
        starts = _algebraic_starts(x, y, reference) or []
        starts.append(_heuristic_start(x, y))

    lower = _lower_bounds(free)
    best = None
    for start in starts:
        full = dict(zip(_SINGLE_NAMES, start))
        full.update(fixed)
        x0 = np.array([full[n] for n in free])
        x0 = np.where(lower == 0.0, np.maximum(x0, 1e-6), x0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = _least_squares(residual, x0, lower, max_nfev)
        if best is None or res.cost < best.cost:
            best = res
    values = dict(zip(free, best.x), **fixed)
    params = _to_params(values, scale)
    if best.status <= 0:
        raise FitError(f"reflection fit did not converge at V_b={trace.bias_full:g} V", best=params)
    n = y.size
    return TraceFit(
        bias_full=trace.bias_full,
        params=params,
        zero_bias_resonance=scale.center + values["w0"] * scale.unit,
        rms_residual=float(np.sqrt(2.0 * best.cost / n)),
        cost=float(best.cost),
        nfev=int(best.nfev),
        jacobian=best.jac,
    )


def fit_reflection_traces(traces, zero_bias, reference=ZeroBiasReference(), share_fano=False,
                          max_nfev=200, confidence=True):
    """Joint fit of all bias traces with shared γ_tr, γ_x and zero-bias resonance.

    Every trace is first fitted on its own; those fits seed the joint fit and
    their scatter in γ_x is its quoted uncertainty. Traces must share the
    zero-bias frequency grid.
    """
    if not traces:
        raise ValueError("need at least one bias trace")
    normalized = [normalize_trace(t, zero_bias) for t in traces]
    independent = [fit_normalized_trace(t, reference=reference, max_nfev=max_nfev) for t in normalized]

    omega = zero_bias.omega
    scale = _Scale(omega)
    x = scale.x(omega)
    ref_scaled = (reference.fano, reference.gamma_T / scale.unit)
    m = len(normalized)
    data = np.stack([t.values for t in normalized])

    g_tr0 = np.median([f.params.gamma_tr for f in independent]) / scale.unit
    g_x0 = np.median([f.params.gamma_x for f in independent]) / scale.unit
    w00 = scale.x(np.median([f.zero_bias_resonance for f in independent]))
    per = []
    for f in independent:
        per.append([f.params.gamma_T / scale.unit, scale.x(f.params.resonance)])
    fanos = np.array([f.params.fano for f in independent])
    if share_fano:
        fano_part = [np.mean(fanos).real, np.mean(fanos).imag]
        n_per = 2
    else:
        n_per = 4
        per = [p + [r.real, r.imag] for p, r in zip(per, fanos)]
        fano_part = []
    theta0 = np.concatenate([[g_tr0, g_x0, w00], fano_part, np.ravel(per)])
    n_head = 3 + len(fano_part)

    def unpack(theta):
        gtr, gx, w0 = theta[:3]
        blocks = theta[n_head:].reshape(m, n_per)
        gt, w1 = blocks[:, 0], blocks[:, 1]
        if share_fano:
            r1 = np.full(m, complex(theta[3], theta[4]))
        else:
            r1 = blocks[:, 2] + 1j * blocks[:, 3]
        return gtr, gx, w0, gt, w1, r1

    def residual(theta):
        gtr, gx, w0, gt, w1, r1 = unpack(theta)
        model = _ratio(x[None, :], gtr, gx, w0, gt[:, None], w1[:, None], r1[:, None], ref_scaled)
        diff = (model - data).ravel()
        return np.concatenate([diff.real, diff.imag])

    names = ["gamma_tr", "gamma_x", "w0"] + ["fano"] * len(fano_part) + (
        ["gamma_T", "w1"] + ["fano"] * (n_per - 2)) * m
    lower = _lower_bounds(names)
    theta0 = np.where(lower == 0.0, np.maximum(theta0, 1e-6), theta0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = _least_squares(residual, theta0, lower, max_nfev)
    gtr, gx, w0, gt, w1, r1 = unpack(res.x)
    w0_abs = scale.center + w0 * scale.unit
    fits = []
    for i, trace in enumerate(normalized):
        params = ReflectionFitParams(
            gamma_tr=gtr * scale.unit, gamma_x=gx * scale.unit, gamma_T=gt[i] * scale.unit,
            fano=r1[i], resonance=scale.center + w1[i] * scale.unit,
        )
        diff = normalized_model(trace.omega, params, w0_abs, reference) - trace.values
        fits.append(TraceFit(
            bias_full=trace.bias_full, params=params, zero_bias_resonance=w0_abs,
            rms_residual=float(np.sqrt(np.mean(np.abs(diff) ** 2))),
            cost=float(0.5 * np.sum(np.abs(diff) ** 2)), nfev=int(res.nfev),
        ))
    result = ReflectionFitResult(
        gamma_tr=gtr * scale.unit, gamma_x=gx * scale.unit, zero_bias_resonance=w0_abs,
        reference=reference, traces=fits, independent=independent, cost=float(res.cost),
        converged=res.status > 0,
    )
    if not result.converged:
        raise FitError("joint reflection fit did not converge", best=result)
    if confidence:
        for fit in fits:
            fit.intervals = error_circle_confidence(fit, reference=reference)
    return result


# --- uncertainties ---------------------------------------------------------

def _boundary(distance, value, radius, direction, rtol, lower=0.0):
    """Outermost parameter value along ``direction`` still inside the circle."""
    step = max(abs(value), 1.0) * 1e-3 if value == 0 else abs(value) * 1e-3
    inside = value
    for _ in range(200):
        trial = value + direction * step
        if direction < 0 and trial <= lower:
            if distance(lower) <= radius:
                return lower
            outside = lower
            break
        if distance(trial) > radius:
            outside = trial
            break
        inside = trial
        step *= 2.0
    else:
        return inside
    # relative to the half-width, not the value, so narrow intervals stay resolved
    tol = rtol * max(abs(outside - value), 1e-300)
    while abs(outside - inside) > tol:
        mid = 0.5 * (inside + outside)
        if distance(mid) > radius:
            outside = mid
        else:
            inside = mid
    return inside


def error_circle_confidence(fit, trace=None, reference=ZeroBiasReference(), radius=None, rtol=1e-4,
                            names=("gamma_tr", "gamma_x", "gamma_T")):
    """Error-circle intervals for the damping rates of one fitted trace.

    The circle sits in the complex Γᴺ plane at the fitted on-resonance value
    with radius equal to the RMS fit error (or ``radius``). For each rate in
    turn, with the others held, the interval is bounded by the values where
    the on-resonance prediction leaves the circle.

    Returns
    -------
    dict
        ``name -> (low, high)`` in rad/s.
    """
    if radius is None:
        if trace is not None:
            diff = normalized_model(trace.omega, fit.params, fit.zero_bias_resonance, reference) - trace.values
            radius = float(np.sqrt(np.mean(np.abs(diff) ** 2)))
        else:
            radius = fit.rms_residual
    probe = fit.params.resonance
    center = normalized_model(probe, fit.params, fit.zero_bias_resonance, reference)
    out = {}
    for name in names:
        value = getattr(fit.params, name)
        if radius == 0:
            out[name] = (value, value)
            continue

        def distance(v, name=name):
            p = replace(fit.params, **{name: max(v, 0.0)})
            return abs(normalized_model(probe, p, fit.zero_bias_resonance, reference) - center)

        lo = _boundary(distance, value, radius, -1, rtol)
        hi = _boundary(distance, value, radius, +1, rtol)
        out[name] = (lo, hi)
    return out


def extract_asymptotic_damping(biases_full, gamma_T, gap_energy, sigma=None):
    """Least-squares γ̄_T from γ_T(V) ≈ γ̄_T [1 + Δ²/(2 (eV)²)].

    Parameters
    ----------
    biases_full, gamma_T : array_like
        Full SINIS biases (V) and fitted damping rates (rad/s).
    sigma : array_like, optional
        1σ of each γ_T; when given the fit is weighted and the uncertainty
        propagated, otherwise it comes from the residual scatter.

    Returns
    -------
    (gamma_bar, sigma_gamma_bar)
    """
    v = junction_voltage(np.atleast_1d(np.asarray(biases_full, dtype=float)))
    y = np.atleast_1d(np.asarray(gamma_T, dtype=float))
    if v.size == 0:
        raise ValueError("no bias points")
    if np.any(v == 0):
        raise ValueError("zero bias cannot enter the high-bias extraction")
    g = 1.0 + 0.5 * gap_energy**2 / (E_CHARGE * v) ** 2
    if sigma is not None and np.all(np.asarray(sigma) > 0):
        w = 1.0 / np.asarray(sigma, dtype=float) ** 2
        gamma_bar = np.sum(w * g * y) / np.sum(w * g * g)
        return float(gamma_bar), float(1.0 / np.sqrt(np.sum(w * g * g)))
    gamma_bar = np.sum(g * y) / np.sum(g * g)
    if v.size < 2:
        return float(gamma_bar), 0.0
    resid = y - gamma_bar * g
    s2 = np.sum(resid**2) / (v.size - 1)
    return float(gamma_bar), float(np.sqrt(s2 / np.sum(g * g)))


def estimate_rates(result, gap_energy, min_gap_units=1.0):
    """Collapse a joint reflection fit into :class:`RateEstimates`.

    Only traces with eV_b/(2Δ) above ``min_gap_units`` enter the γ̄_T
    extraction. γ_tr's uncertainty is the mean error-circle half-width, γ_x's
    the spread of the independent per-trace fits (NaN for one trace).
    """
    biases = result.biases
    keep = E_CHARGE * np.abs(biases) / (2.0 * gap_energy) > min_gap_units
    if not np.any(keep):
        raise ValueError("no trace lies above the critical coupling point")
    sig_t = result.interval_sigma("gamma_T")[keep] if result.traces[0].intervals else None
    gamma_bar, gamma_bar_sigma = extract_asymptotic_damping(
        biases[keep], result.gamma_T[keep], gap_energy, sigma=sig_t
    )
    if result.traces[0].intervals:
        sig_tr = float(np.mean(result.interval_sigma("gamma_tr")[keep]))
    else:
        sig_tr = 0.0
    gx_independent = np.array([f.params.gamma_x for f in result.independent])[keep]
    sig_x = float(np.std(gx_independent, ddof=1)) if gx_independent.size > 1 else float("nan")
    return RateEstimates(
        gamma_tr=float(result.gamma_tr), gamma_bar_T=float(gamma_bar), gamma_x=float(result.gamma_x),
        gamma_tr_sigma=sig_tr, gamma_bar_T_sigma=float(gamma_bar_sigma),
        gamma_x_sigma=sig_x,
    )


def synthesize_traces(model, biases_full, frequencies, gamma_T=None, fano=1.0 + 0.0j,
                      lamb_coefficient=-0.1, reference=ZeroBiasReference(), noise=0.0,
                      rng=None, background=None):
    """Raw reflection traces for ``biases_full`` plus the zero-bias trace.

    γ_T defaults to the exact tunneling damping of ``model`` at each bias;
    the zero-bias trace uses the reference γ_T and Fano factor so that the
    generating parameters are recoverable. The resonance shifts by
    ``lamb_coefficient · γ_T``. ``background(ω)`` multiplies every trace
    (a cable delay and attenuation by default); complex Gaussian noise of
    relative size ``noise`` is added to the raw values.

    Returns
    -------
    (zero_bias_trace, [bias_traces], [ReflectionFitParams])
    """
    from .thermal import tunneling_reservoir

    frequencies = np.asarray(frequencies, dtype=float)
    omega = TWO_PI * frequencies
    if background is None:
        def background(w):
            return 0.8 * np.exp(-1j * w * 2e-9)
    rng = np.random.default_rng() if rng is None else rng
    if gamma_T is None:
        gamma_T = [tunneling_reservoir(v, model).damping_rate for v in biases_full]
    gtr, gx = model.line.damping_rate, model.excess.damping_rate

    def trace_for(bias, params):
        clean = reflection_model(omega, params) * background(omega)
        if noise > 0:
            sigma = noise * np.abs(clean) / np.sqrt(2.0)
            clean = clean + sigma * (rng.standard_normal(omega.size) + 1j * rng.standard_normal(omega.size))
        return ReflectionTrace(bias, frequencies, clean)

    zero_params = ReflectionFitParams(gtr, gx, reference.gamma_T, reference.fano,
                                      model.omega_r + lamb_coefficient * reference.gamma_T)
    zero = trace_for(0.0, zero_params)
    traces, truth = [], []
    for bias, gt in zip(biases_full, gamma_T):
        params = ReflectionFitParams(gtr, gx, gt, fano, model.omega_r + lamb_coefficient * gt)
        traces.append(trace_for(bias, params))
        truth.append(params)
    return zero, traces, truth
