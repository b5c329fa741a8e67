"""Full calibration on synthetic data, driven through the same pipeline as the CLI.

Reflection and power CSVs are synthesized with a known gain. The reflection
traces give the damping rates. The output power above the gap gives the
slope a, which together with the rates yields G and T_amp.

Run: python demos/04_gain_calibration.py [output_dir]
"""

import json
import sys
import tempfile
from pathlib import Path

from niscal import pipeline

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="niscal_demo_"))
cfg = pipeline.RunConfig.load(Path(__file__).with_name("config.yaml"), {"output_dir": str(out)})

model = pipeline.synthesize(cfg)
print(f"injected G = {model.gain_dB:.2f} dB, T_amp = 11 K; files in {out}")

rates, _ = pipeline.fit_reflection(cfg)
print("\n" + pipeline.format_rates(rates))

result, report = pipeline.calibrate_run(cfg, plot=True)
print(f"\na = {result.a:.5e} ± {report['calibration']['a_sigma_W_per_V']:.1e} W/V over "
      f"{result.n_points} points")
print(f"G = {result.gain_dB:.3f} ± {result.gain_sigma_dB:.3f} dB")
print(f"T_amp = {result.noise_temperature:.3f} K")
print("\nreport.json keys:", ", ".join(sorted(json.loads((out / "report.json").read_text())["calibration"])))
