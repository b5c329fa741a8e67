"""Synthetic power data and the fitting-range study of the linear coefficient.

Synthetic output powers are the exact steady-state prediction plus i.i.d.
Gaussian noise. Each replicate draws from its own PCG64 stream seeded by
``SeedSequence(seed, spawn_key=(replicate,))``, so results do not depend on
evaluation order.
"""

from dataclasses import dataclass, field, asdict
import functools
import hashlib
import json

import numpy as np

from .calibration import PowerFitError, PowerTrace, fit_power_curve
from .constants import gap_units_to_bias
from .thermal import highbias_coefficients, output_power, transmitted_power_sweep

GENERATOR = "numpy PCG64 via SeedSequence(seed, spawn_key=(replicate,))"

# 13 points in eV_b/(2Δ) ∈ [1.07, 8.83], continued up to 10
DEFAULT_STEP = (8.83 - 1.07) / 12


def default_bias_grid(gap_energy, lower=1.07, upper=10.0, step=DEFAULT_STEP):
    """Full biases (V) on an even grid in eV_b/(2Δ) starting at ``lower``."""
    x = lower + step * np.arange(int(np.floor((upper - lower) / step + 1e-9)) + 1)
    return gap_units_to_bias(x, gap_energy)


@dataclass(frozen=True)
class MonteCarloConfig:
    model: object
    bias_grid: tuple
    window_lower: float
    upper_sweep: tuple
    noise_sigma: float = 2.5e-12
    repetitions: int = 100
    seed: int = 0

    def __post_init__(self):
        grid = tuple(float(v) for v in self.bias_grid)
        sweep = tuple(float(v) for v in self.upper_sweep)
        object.__setattr__(self, "bias_grid", grid)
        object.__setattr__(self, "upper_sweep", sweep)
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not grid or not sweep:
            raise ValueError("bias grid and upper sweep must be non-empty")
        if np.any(np.diff(grid) <= 0) or np.any(np.diff(sweep) <= 0):
            raise ValueError("bias grid and upper sweep must be increasing")
        if min(sweep) <= self.window_lower:
            raise ValueError("every upper bound must exceed the window lower edge")

    @classmethod
    def measured_defaults(cls, model, seed=0, repetitions=100, noise_sigma=2.5e-12):
        """Grid and sweep of the measured device: 13 points on [1.07, 8.83] continued
        to 10, window from 1.07, upper bounds 3.5 to 10 in steps of 0.5 (units of 2Δ/e)."""
        gap = model.junction.gap_energy
        return cls(
            model=model,
            bias_grid=tuple(default_bias_grid(gap)),
            window_lower=float(gap_units_to_bias(1.07, gap)),
            upper_sweep=tuple(gap_units_to_bias(np.arange(3.5, 10.0 + 1e-9, 0.5), gap)),
            noise_sigma=noise_sigma,
            repetitions=repetitions,
            seed=seed,
        )

    def digest(self):
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()


@functools.lru_cache(maxsize=32)
def _exact_output(model, grid):
    return output_power(transmitted_power_sweep(np.array(grid), model), model)


def exact_output_power(config):
    """Noise-free output power on the configured grid (W)."""
    return _exact_output(config.model, config.bias_grid).copy()


def replicate_rng(seed, replicate_index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replicate_index,))))


def synthesize_power_data(config, replicate_index):
    """Exact output power plus Gaussian noise for one replicate."""
    clean = exact_output_power(config)
    if config.noise_sigma == 0:
        return PowerTrace(np.array(config.bias_grid), clean)
    rng = replicate_rng(config.seed, replicate_index)
    return PowerTrace(np.array(config.bias_grid), clean + config.noise_sigma * rng.standard_normal(clean.size))


def expected_coefficient(model):
    """Linear output-power coefficient implied by the model's gain and rates (W/V)."""
    return model.gain_linear * highbias_coefficients(model)[0]


@dataclass
class RangeStudyResult:
    """Per upper bound: relative error and reported 1σ of a, both divided by a_exp.

    ``rms_*`` columns compare like with like (root-mean-square error against
    root-mean-square reported σ); ``mean_rel_error`` is the mean absolute
    relative error.
    """

    upper_bounds: np.ndarray
    mean_rel_error: np.ndarray
    median_rel_error: np.ndarray
    rms_rel_error: np.ndarray
    mean_signed_error: np.ndarray
    spread: np.ndarray
    mean_reported_sigma: np.ndarray
    rms_reported_sigma: np.ndarray
    n_points: np.ndarray
    n_failed: np.ndarray
    a_expected: float
    metadata: dict = field(default_factory=dict)

    def at(self, upper):
        """Index of the sweep entry closest to ``upper`` (V)."""
        return int(np.argmin(np.abs(self.upper_bounds - upper)))


def range_sweep_study(config):
    """Fit a V + b + c/V over [window_lower, upper] for every upper bound and replicate."""
    a_exp = expected_coefficient(config.model)
    traces = [synthesize_power_data(config, i) for i in range(config.repetitions)]
    n_up = len(config.upper_sweep)
    stats = {k: np.full(n_up, np.nan) for k in (
        "mean", "median", "rms", "signed", "spread", "sig_mean", "sig_rms")}
    n_points = np.zeros(n_up, dtype=int)
    n_failed = np.zeros(n_up, dtype=int)
    for j, upper in enumerate(config.upper_sweep):
        rel, sig = [], []
        for trace in traces:
            try:
                fit = fit_power_curve(trace, (config.window_lower, upper))
            except PowerFitError:
                n_failed[j] += 1
                continue
            n_points[j] = fit.n_points
            rel.append((fit.a - a_exp) / a_exp)
            sig.append(fit.a_sigma / a_exp)
        if not rel:
            continue
        rel, sig = np.array(rel), np.array(sig)
        stats["mean"][j] = np.mean(np.abs(rel))
        stats["median"][j] = np.median(np.abs(rel))
        stats["rms"][j] = np.sqrt(np.mean(rel**2))
        stats["signed"][j] = np.mean(rel)
        stats["spread"][j] = np.std(rel)
        stats["sig_mean"][j] = np.mean(sig)
        stats["sig_rms"][j] = np.sqrt(np.mean(sig**2))
    return RangeStudyResult(
        upper_bounds=np.array(config.upper_sweep),
        mean_rel_error=stats["mean"],
        median_rel_error=stats["median"],
        rms_rel_error=stats["rms"],
        mean_signed_error=stats["signed"],
        spread=stats["spread"],
        mean_reported_sigma=stats["sig_mean"],
        rms_reported_sigma=stats["sig_rms"],
        n_points=n_points,
        n_failed=n_failed,
        a_expected=a_exp,
        metadata={
            "seed": config.seed,
            "generator": GENERATOR,
            "config_sha256": config.digest(),
            "repetitions": config.repetitions,
            "noise_sigma_W": config.noise_sigma,
        },
    )
