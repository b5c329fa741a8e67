"""CSV and JSON formats.

CSV files are comma separated with ``#``-prefixed comment lines; the last
comment line before the data names the columns. Floats are written with 17
significant digits so files round-trip exactly.
"""

import json
import math
from pathlib import Path

import numpy as np

from .calibration import PowerTrace, SpectrumTrace
from .reflection import ReflectionTrace

REFLECTION_COLUMNS = ("bias_voltage_V", "frequency_Hz", "re_gamma", "im_gamma")
POWER_COLUMNS = ("bias_voltage_V", "power_W", "sigma_W")
SPECTRUM_COLUMNS = ("frequency_Hz", "psd_W_per_Hz")
RANGE_COLUMNS = (
    "upper_bound_V", "mean_rel_error", "mean_reported_sigma", "n_failed",
    "upper_bound_gap_units", "median_rel_error", "rms_rel_error", "rms_reported_sigma",
    "mean_signed_error", "spread", "n_points",
)


class InputError(ValueError):
    """Malformed or missing input data."""


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns, rows, comments=()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {c}" for c in comments]
    lines.append("# " + ",".join(columns))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def read_csv(path, min_cols, max_cols=None):
    """Numeric rows of a CSV file as a 2-D float array.

    A non-comment header row made of column names is tolerated.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    rows = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        try:
            values = [float(f) for f in fields]
        except ValueError:
            if not rows and not any(_is_number(f) for f in fields):
                continue
            raise InputError(f"{path}:{lineno}: non-numeric field in {raw!r}") from None
        if len(values) < min_cols or (max_cols is not None and len(values) > max_cols):
            raise InputError(f"{path}:{lineno}: expected {min_cols}..{max_cols or min_cols} columns")
        rows.append(values)
    if not rows:
        raise InputError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InputError(f"{path}: inconsistent number of columns")
    return np.array(rows, dtype=float)


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_reflection_csv(path, traces, comments=()):
    rows = []
    for t in traces:
        for f, g in zip(t.frequencies, t.values):
            rows.append((t.bias_full, f, g.real, g.imag))
    write_csv(path, REFLECTION_COLUMNS, rows, comments)


def read_reflection_csv(path):
    """Reflection traces grouped by bias, sorted by bias."""
    data = read_csv(path, 4, 4)
    traces = []
    for bias in sorted(set(data[:, 0])):
        block = data[data[:, 0] == bias]
        block = block[np.argsort(block[:, 1], kind="stable")]
        try:
            traces.append(ReflectionTrace(float(bias), block[:, 1], block[:, 2] + 1j * block[:, 3]))
        except ValueError as exc:
            raise InputError(f"{path}: bias block {bias!r}: {exc}") from None
    return traces


def split_zero_bias(traces):
    """Separate the V_b = 0 trace from the biased ones."""
    zero = [t for t in traces if t.bias_full == 0]
    if not zero:
        raise InputError("normalization requires V_b = 0 trace")
    return zero[0], [t for t in traces if t.bias_full != 0]


def write_power_csv(path, trace, comments=()):
    if trace.sigma is None:
        rows = zip(trace.bias_full, trace.power)
        columns = POWER_COLUMNS[:2]
    else:
        rows = zip(trace.bias_full, trace.power, trace.sigma)
        columns = POWER_COLUMNS
    write_csv(path, columns, list(rows), comments)


def read_power_csv(path):
    data = read_csv(path, 2, 3)
    order = np.argsort(data[:, 0], kind="stable")
    data = data[order]
    try:
        return PowerTrace(data[:, 0], data[:, 1], data[:, 2] if data.shape[1] == 3 else None)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_spectrum_csv(path, frequencies, density, comments=()):
    write_csv(path, SPECTRUM_COLUMNS, list(zip(frequencies, density)), comments)


def read_spectrum_csv(path, band):
    data = read_csv(path, 2, 2)
    try:
        return SpectrumTrace(data[:, 0], data[:, 1], tuple(band))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_range_study_csv(path, result, gap_energy):
    from .constants import bias_to_gap_units

    rows = zip(
        result.upper_bounds, result.mean_rel_error, result.mean_reported_sigma, result.n_failed,
        bias_to_gap_units(result.upper_bounds, gap_energy), result.median_rel_error,
        result.rms_rel_error, result.rms_reported_sigma, result.mean_signed_error, result.spread,
        result.n_points,
    )
    meta = dict(result.metadata, a_expected_W_per_V=result.a_expected)
    write_csv(path, RANGE_COLUMNS, list(rows), comments=["metadata: " + json.dumps(meta, sort_keys=True)])


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return None if math.isnan(value) or math.isinf(value) else value
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
