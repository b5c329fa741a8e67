"""Configuration and the four calibration workflows behind the CLI.

A run is configured by a YAML document whose keys carry their units
(``gap_energy_ueV``, ``frequency_GHz`` ...). Missing keys fall back to
:data:`DEFAULTS`; the merged document is validated against :data:`SCHEMA`
before anything is computed.
"""

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import __version__
from . import io
from .calibration import calibrate, check_zero_bias_assumption, fit_power_curve, integrate_spectrum, PowerTrace
from .constants import (
    MHz_to_rad, TWO_PI, bias_to_gap_units, gap_units_to_bias, rad_to_MHz, ueV_to_J,
)
from .montecarlo import MonteCarloConfig, default_bias_grid, range_sweep_study, replicate_rng, synthesize_power_data
from .reflection import (
    RateEstimates, ZeroBiasReference, estimate_rates, fit_reflection_traces, normalize_trace,
    normalized_model, synthesize_traces,
)
from .thermal import build_model, output_power, transmitted_power_exact
from .tunneling import JunctionParams

DEFAULTS = {
    "junction": {
        "gap_energy_ueV": 200.0,
        "dynes_parameter": 1e-4,
        "normal_temperature_K": 0.1,
    },
    "resonator": {
        "frequency_GHz": 4.67,
        "bath_temperature_K": 0.01,
    },
    "reflection": {
        "min_gap_units": 1.0,
        "rate_extraction_min_gap_units": 2.0,
        "reference_fano_re": 1.0,
        "reference_fano_im": 0.0,
        "reference_gamma_T_MHz": 0.0,
        "share_fano": False,
    },
    "calibration": {
        "window_gap_units": [1.07, 8.83],
        "band_GHz": [4.6, 4.75],
    },
    "inputs": {},
    "synthesis": {
        "gamma_tr_MHz": 1.78,
        "gamma_bar_T_MHz": 17.39,
        "gamma_x_MHz": 0.46,
        "gain_dB": 51.84,
        "noise_temperature_K": 11.0,
        "power_noise_pW": 2.5,
        "subgap_gap_units": [0.2, 0.4, 0.6, 0.8],
        "grid_step_gap_units": (8.83 - 1.07) / 12,
        "grid_max_gap_units": 10.0,
        "reflection_noise": 0.005,
        "reflection_bias_gap_units": [1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        "frequency_span_GHz": [4.62, 4.72],
        "n_frequencies": 401,
        "lamb_coefficient": -0.1,
        "fano_re": 1.0,
        "fano_im": 0.0,
    },
    "montecarlo": {
        "repetitions": 100,
        "noise_pW": 2.5,
        "window_lower_gap_units": 1.07,
        "upper_sweep_gap_units": [3.5, 10.0, 0.5],
    },
    "seed": 0,
    "output_dir": "niscal_out",
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "junction": {
            "type": "object", "additionalProperties": False,
            "properties": {"gap_energy_ueV": _pos, "dynes_parameter": _nonneg, "normal_temperature_K": _pos},
        },
        "resonator": {
            "type": "object", "additionalProperties": False,
            "properties": {"frequency_GHz": _pos, "bath_temperature_K": _pos},
        },
        "reflection": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "min_gap_units": _nonneg, "rate_extraction_min_gap_units": _nonneg,
                "reference_fano_re": _num, "reference_fano_im": _num,
                "reference_gamma_T_MHz": _nonneg, "share_fano": {"type": "boolean"},
            },
        },
        "calibration": {
            "type": "object", "additionalProperties": False,
            "properties": {"window_gap_units": _pair, "band_GHz": _pair},
        },
        "inputs": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "reflection_csv": {"type": "string"},
                "power_csv": {"type": "string"},
                "rates_json": {"type": "string"},
                "spectra": {
                    "type": "array",
                    "items": {
                        "type": "object", "additionalProperties": False,
                        "required": ["bias_voltage_V", "path"],
                        "properties": {"bias_voltage_V": _num, "path": {"type": "string"}},
                    },
                },
            },
        },
        "synthesis": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "gamma_tr_MHz": _pos, "gamma_bar_T_MHz": _pos, "gamma_x_MHz": _nonneg,
                "gain_dB": _num, "noise_temperature_K": _nonneg, "power_noise_pW": _nonneg,
                "subgap_gap_units": {"type": "array", "items": _pos},
                "grid_step_gap_units": _pos, "grid_max_gap_units": _pos,
                "reflection_noise": _nonneg,
                "reflection_bias_gap_units": {"type": "array", "items": _pos, "minItems": 1},
                "frequency_span_GHz": _pair, "n_frequencies": {"type": "integer", "minimum": 10},
                "lamb_coefficient": _num, "fano_re": _num, "fano_im": _num,
            },
        },
        "montecarlo": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "repetitions": {"type": "integer", "minimum": 1},
                "noise_pW": _nonneg,
                "window_lower_gap_units": _pos,
                "upper_sweep_gap_units": {"type": "array", "items": _pos, "minItems": 3, "maxItems": 3},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
}


class ConfigError(ValueError):
    pass


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    """Validated run configuration; ``raw`` is the merged key-value document."""

    raw: dict
    base_dir: Path

    @classmethod
    def from_dict(cls, data, base_dir="."):
        merged = _merge(DEFAULTS, data or {})
        try:
            jsonschema.validate(merged, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config error at {where}: {exc.message}") from None
        for key in ("window_gap_units", "band_GHz"):
            lo, hi = merged["calibration"][key]
            if not lo < hi:
                raise ConfigError(f"calibration.{key}: lower edge must be below upper edge")
        cfg = cls(merged, Path(base_dir))
        cfg.junction  # run the dataclass invariants now
        return cfg

    @classmethod
    def load(cls, path=None, overrides=None):
        data = {}
        base = Path(".")
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"{path}: config file not found")
            try:
                data = yaml.safe_load(path.read_text()) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: top level must be a mapping")
            base = path.parent
        return cls.from_dict(_merge(data, overrides or {}), base)

    def path(self, key):
        value = self.raw["inputs"].get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def require(self, key, fallback=None):
        p = self.path(key)
        if p is None and fallback is not None and Path(fallback).is_file():
            p = Path(fallback)
        if p is None:
            raise io.InputError(f"inputs.{key} is not set")
        if not p.is_file():
            raise io.InputError(f"{p}: no such file")
        return p

    @property
    def output_dir(self):
        return Path(self.raw["output_dir"])

    @property
    def seed(self):
        return int(self.raw["seed"])

    @property
    def junction(self):
        j = self.raw["junction"]
        try:
            return JunctionParams(
                gap_energy=ueV_to_J(j["gap_energy_ueV"]),
                dynes_parameter=j["dynes_parameter"],
                normal_temperature=j["normal_temperature_K"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def gap(self):
        return self.junction.gap_energy

    @property
    def omega_r(self):
        return TWO_PI * 1e9 * self.raw["resonator"]["frequency_GHz"]

    @property
    def reference(self):
        r = self.raw["reflection"]
        return ZeroBiasReference(
            complex(r["reference_fano_re"], r["reference_fano_im"]), MHz_to_rad(r["reference_gamma_T_MHz"])
        )

    @property
    def window(self):
        lo, hi = self.raw["calibration"]["window_gap_units"]
        # widen by a hair so grid points computed from the same edges stay inside
        return (float(gap_units_to_bias(lo, self.gap)) * (1 - 1e-9),
                float(gap_units_to_bias(hi, self.gap)) * (1 + 1e-9))

    @property
    def band(self):
        lo, hi = self.raw["calibration"]["band_GHz"]
        return 1e9 * lo, 1e9 * hi

    @property
    def bandwidth(self):
        lo, hi = self.band
        return hi - lo

    def model(self):
        s = self.raw["synthesis"]
        return build_model(
            gamma_bar=MHz_to_rad(s["gamma_bar_T_MHz"]),
            gamma_tr=MHz_to_rad(s["gamma_tr_MHz"]),
            gamma_x=MHz_to_rad(s["gamma_x_MHz"]),
            omega_r=self.omega_r,
            junction=self.junction,
            gain_dB=s["gain_dB"],
            noise_temperature=s["noise_temperature_K"],
            bandwidth=self.bandwidth,
            bath_temperature=self.raw["resonator"]["bath_temperature_K"],
        )

    def digest(self):
        """SHA-256 of the merged configuration, excluding the output location."""
        content = {k: v for k, v in self.raw.items() if k != "output_dir"}
        return hashlib.sha256(json.dumps(content, sort_keys=True).encode()).hexdigest()

    def provenance(self):
        return {"tool": "niscal", "version": __version__, "config_sha256": self.digest()}


def rates_to_dict(rates):
    out = {}
    for name in ("gamma_tr", "gamma_bar_T", "gamma_x"):
        value = getattr(rates, name)
        sigma = getattr(rates, name + "_sigma")
        out[f"{name}_rad_per_s"] = value
        out[f"{name}_sigma_rad_per_s"] = sigma
        out[f"{name}_over_2pi_MHz"] = rad_to_MHz(value)
        out[f"{name}_sigma_over_2pi_MHz"] = rad_to_MHz(sigma)
    return out


def rates_from_dict(data):
    def get(key):
        value = data.get(key)
        return float("nan") if value is None else float(value)

    try:
        return RateEstimates(
            gamma_tr=get("gamma_tr_rad_per_s"), gamma_bar_T=get("gamma_bar_T_rad_per_s"),
            gamma_x=get("gamma_x_rad_per_s"), gamma_tr_sigma=get("gamma_tr_sigma_rad_per_s"),
            gamma_bar_T_sigma=get("gamma_bar_T_sigma_rad_per_s"),
            gamma_x_sigma=get("gamma_x_sigma_rad_per_s"),
        )
    except (TypeError, ValueError) as exc:
        raise io.InputError(f"rates document: {exc}") from None


def format_rates(rates):
    lines = []
    for label, name in (("gamma_tr", "gamma_tr"), ("gamma_bar_T", "gamma_bar_T"), ("gamma_x", "gamma_x")):
        value = rad_to_MHz(getattr(rates, name))
        sigma = getattr(rates, name + "_sigma")
        err = "not estimable" if np.isnan(sigma) else f"{rad_to_MHz(sigma):.4f}"
        lines.append(f"{label}/2pi = {value:.4f} +/- {err} MHz")
    return "\n".join(lines)


def fit_reflection(cfg, out_dir=None):
    """Reflection CSV -> rates.json and one residual CSV per bias trace."""
    out_dir = Path(out_dir or cfg.output_dir)
    traces = io.read_reflection_csv(cfg.require("reflection_csv", out_dir / "reflection.csv"))
    zero, biased = io.split_zero_bias(traces)
    floor = cfg.raw["reflection"]["min_gap_units"]
    biased = [t for t in biased if bias_to_gap_units(abs(t.bias_full), cfg.gap) > floor]
    if not biased:
        raise io.InputError("no bias trace above the critical coupling point")
    result = fit_reflection_traces(
        biased, zero, reference=cfg.reference, share_fano=cfg.raw["reflection"]["share_fano"]
    )
    min_units = min(cfg.raw["reflection"]["rate_extraction_min_gap_units"],
                    max(bias_to_gap_units(result.biases, cfg.gap)) - 1e-9)
    rates = estimate_rates(result, cfg.gap, min_gap_units=min_units)
    per_trace = []
    for fit, trace in zip(result.traces, biased):
        norm = normalize_trace(trace, zero)
        model = normalized_model(norm.omega, fit.params, fit.zero_bias_resonance, cfg.reference)
        resid = norm.values - model
        name = f"residual_bias_{fit.bias_full:.6e}V.csv"
        io.write_csv(
            out_dir / name, ("frequency_Hz", "re_data", "im_data", "re_model", "im_model", "re_resid", "im_resid"),
            zip(norm.frequencies, norm.values.real, norm.values.imag, model.real, model.imag, resid.real, resid.imag),
        )
        per_trace.append({
            "bias_voltage_V": fit.bias_full,
            "gamma_T_rad_per_s": fit.params.gamma_T,
            "gamma_T_interval_rad_per_s": list(fit.intervals["gamma_T"]),
            "resonance_rad_per_s": fit.params.resonance,
            "fano": fit.params.fano,
            "rms_residual": fit.rms_residual,
            "residual_csv": name,
        })
    doc = {
        **rates_to_dict(rates),
        "zero_bias_resonance_rad_per_s": result.zero_bias_resonance,
        "traces": per_trace,
        "provenance": cfg.provenance(),
    }
    io.write_json(out_dir / "rates.json", doc)
    return rates, result


def _power_trace(cfg, out_dir):
    fallback = out_dir / "power.csv"
    spectra = cfg.raw["inputs"].get("spectra")
    if cfg.path("power_csv") is not None or (not spectra and fallback.is_file()):
        return io.read_power_csv(cfg.require("power_csv", fallback))
    if not spectra:
        raise io.InputError("inputs.power_csv or inputs.spectra is required")
    rows = []
    for entry in spectra:
        path = Path(entry["path"])
        path = path if path.is_absolute() else cfg.base_dir / path
        spectrum = io.read_spectrum_csv(path, cfg.band)
        rows.append((entry["bias_voltage_V"], integrate_spectrum(spectrum)))
    rows.sort()
    return PowerTrace([r[0] for r in rows], [r[1] for r in rows])


def calibrate_run(cfg, rates=None, out_dir=None, plot=False):
    """Power data + rates -> report.json and the measured-vs-fitted power CSV."""
    out_dir = Path(out_dir or cfg.output_dir)
    if rates is None:
        rates_path = cfg.path("rates_json") or out_dir / "rates.json"
        rates = rates_from_dict(io.read_json(rates_path))
    trace = _power_trace(cfg, out_dir)
    window = cfg.window
    inside = np.count_nonzero((trace.bias_full >= window[0]) & (trace.bias_full <= window[1]))
    if inside < 3:
        raise io.InputError(f"fit window holds {inside} points; at least 3 are required")
    result = calibrate(trace, rates, window, bandwidth=cfg.bandwidth)
    model = build_model(rates.gamma_bar_T, rates.gamma_tr, rates.gamma_x, omega_r=cfg.omega_r,
                        junction=cfg.junction, bath_temperature=cfg.raw["resonator"]["bath_temperature_K"])
    ratio = check_zero_bias_assumption(result.zero_bias_power, result.gain_linear,
                                       transmitted_power_exact(0.0, model))
    fit = fit_power_curve(trace, window)
    result.extras = {
        "fit_window_gap_units": list(cfg.raw["calibration"]["window_gap_units"]),
        "a_full_bias_W_per_V": result.a / 2.0,
        "c_full_bias_W_V": result.c * 2.0,
        "zero_bias_transmitted_fraction": ratio,
    }
    report = {
        "rates": rates_to_dict(rates),
        "calibration": result.to_dict(),
        "provenance": cfg.provenance(),
    }
    io.write_json(out_dir / "report.json", report)
    sel = (trace.bias_full >= window[0]) & (trace.bias_full <= window[1])
    fitted = np.where(sel, fit.predict(np.where(trace.bias_full == 0, np.nan, trace.bias_full)), np.nan)
    io.write_csv(
        out_dir / "power_fit.csv", ("bias_voltage_V", "bias_gap_units", "power_W", "fitted_W", "in_window"),
        zip(trace.bias_full, bias_to_gap_units(trace.bias_full, cfg.gap), trace.power, fitted, sel.astype(int)),
    )
    if plot:
        _plot_power(out_dir / "power_fit.svg", trace, fit, sel, cfg.gap)
    return result, report


def synthesize(cfg, out_dir=None):
    """Write synthetic reflection and power CSVs plus the generating truth."""
    out_dir = Path(out_dir or cfg.output_dir)
    s = cfg.raw["synthesis"]
    model = cfg.model()
    gap = cfg.gap
    lo, hi = s["frequency_span_GHz"]
    freqs = np.linspace(1e9 * lo, 1e9 * hi, s["n_frequencies"])
    refl_biases = gap_units_to_bias(np.array(s["reflection_bias_gap_units"]), gap)
    zero, traces, truth = synthesize_traces(
        model, refl_biases, freqs, fano=complex(s["fano_re"], s["fano_im"]),
        lamb_coefficient=s["lamb_coefficient"], reference=cfg.reference,
        noise=s["reflection_noise"], rng=replicate_rng(cfg.seed, 1 << 20),
    )
    io.write_reflection_csv(out_dir / "reflection.csv", [zero] + traces,
                            comments=[f"synthetic, seed={cfg.seed}"])

    grid = default_bias_grid(gap, upper=s["grid_max_gap_units"], step=s["grid_step_gap_units"])
    sub = gap_units_to_bias(np.array(s["subgap_gap_units"]), gap)
    biases = np.unique(np.concatenate([[0.0], sub, grid]))
    mc = MonteCarloConfig(model=model, bias_grid=tuple(biases), window_lower=float(biases[0]),
                          upper_sweep=(float(biases[-1]),), noise_sigma=1e-12 * s["power_noise_pW"],
                          seed=cfg.seed)
    power = synthesize_power_data(mc, 0)
    io.write_power_csv(out_dir / "power.csv", power, comments=[f"synthetic, seed={cfg.seed}"])
    io.write_json(out_dir / "truth.json", {
        "gain_dB": model.gain_dB,
        "gain_linear": model.gain_linear,
        "noise_power_W": model.noise_power,
        "gamma_tr_rad_per_s": model.line.damping_rate,
        "gamma_x_rad_per_s": model.excess.damping_rate,
        "gamma_bar_T_rad_per_s": model.gamma_bar,
        "gamma_T_rad_per_s": [p.gamma_T for p in truth],
        "reflection_bias_V": refl_biases,
        "provenance": cfg.provenance(),
    })
    return model


def range_study(cfg, out_dir=None, plot=False):
    """Fitting-range study -> range_study.csv (metadata in a comment line)."""
    out_dir = Path(out_dir or cfg.output_dir)
    m = cfg.raw["montecarlo"]
    model = cfg.model()
    gap = cfg.gap
    s = cfg.raw["synthesis"]
    lo, hi, step = m["upper_sweep_gap_units"]
    config = MonteCarloConfig(
        model=model,
        bias_grid=tuple(default_bias_grid(gap, lower=m["window_lower_gap_units"],
                                          upper=s["grid_max_gap_units"], step=s["grid_step_gap_units"])),
        window_lower=float(gap_units_to_bias(m["window_lower_gap_units"], gap)) * (1 - 1e-9),
        upper_sweep=tuple(gap_units_to_bias(np.arange(lo, hi + 1e-9, step), gap)),
        noise_sigma=1e-12 * m["noise_pW"],
        repetitions=m["repetitions"],
        seed=cfg.seed,
    )
    result = range_sweep_study(config)
    result.metadata["config"] = cfg.provenance()
    io.write_range_study_csv(out_dir / "range_study.csv", result, gap)
    if plot:
        _plot_range(out_dir / "range_study.svg", result, gap)
    return result


def _plot_power(path, trace, fit, sel, gap):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = bias_to_gap_units(trace.bias_full, gap)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, 1e9 * trace.power, ".", label="measured")
    xs = np.linspace(x[sel].min(), x[sel].max(), 200)
    ax.plot(xs, 1e9 * fit.predict(gap_units_to_bias(xs, gap)), "-", label="a V + b + c/V")
    ax.set_xlabel("eV_b / 2Δ")
    ax.set_ylabel("P_out (nW)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_range(path, result, gap):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = bias_to_gap_units(result.upper_bounds, gap)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(x, result.mean_rel_error, "o", label="mean |δa|/a_exp")
    ax.semilogy(x, result.mean_reported_sigma, "x", label="mean reported 1σ")
    ax.set_xlabel("upper bound eV_b,max / 2Δ")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
