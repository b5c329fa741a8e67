"""From reservoir power balance to the power at the amplifier output.

Besides the transmission line it is read out through, the resonator
exchanges energy with the tunneling environment of the junction and with
an unexplained excess bath. In steady state the net flows cancel, which fixes
the resonator occupation and therefore the power delivered to the line.
The amplification chain multiplies that power by G and adds its own noise.

Run: python demos/02_power_and_noise.py
"""

import numpy as np

from niscal.calibration import noise_temperature
from niscal.constants import MHz_to_rad, bias_to_gap_units, gap_units_to_bias
from niscal.thermal import (
    build_model,
    highbias_coefficients,
    output_power,
    reservoir_power,
    steady_state_occupation,
    transmitted_power_exact,
    transmitted_power_highbias,
    tunneling_reservoir,
)

model = build_model(
    gamma_bar=MHz_to_rad(17.39), gamma_tr=MHz_to_rad(1.78), gamma_x=MHz_to_rad(0.46),
    gain_dB=51.84, noise_temperature=11.0, bandwidth=150e6,
)
gap = model.junction.gap_energy

# One bias point in detail: the three flows and their sum.
vb = gap_units_to_bias(5.0, gap)
tunnel = tunneling_reservoir(vb, model)
baths = [tunnel, model.line, model.excess]
n_r = steady_state_occupation(baths)
print(f"eV_b/(2Δ) = 5: N_T = {tunnel.photon_number:.3f}, resonator N_r = {n_r:.3f}")
for bath in baths:
    print(f"  {bath.label.value:18s} γ/2π = {bath.damping_rate / 2 / np.pi / 1e6:7.3f} MHz  "
          f"P = {reservoir_power(bath, n_r, model.omega_r):+.4e} W")
print(f"  sum = {sum(reservoir_power(b, n_r, model.omega_r) for b in baths):+.1e} W")

# Across the bias sweep the exact power approaches a V + b + c/V.
a, b, c = highbias_coefficients(model)
print(f"\nhigh-bias form: a = {a:.4e} W/V, b = {b:.4e} W, c = {c:.4e} W·V  (V = V_b/2)")
print(" eV_b/2Δ   P_tr exact (W)   high-bias (W)   rel. diff")
for x in (1.07, 2.0, 4.0, 6.0, 8.83):
    v = gap_units_to_bias(x, gap)
    exact = transmitted_power_exact(v, model)
    approx = transmitted_power_highbias(v, model)
    print(f"{x:8.2f}   {exact:.6e}   {approx:.6e}   {abs(approx / exact - 1):.2e}")

# At zero bias the line sees only amplifier noise; that is the noise temperature.
p0 = output_power(transmitted_power_exact(0.0, model), model)
print(f"\nP_out(0) = {p0 * 1e9:.3f} nW  ->  T_amp = {noise_temperature(p0, model.gain_linear, 150e6):.4f} K")
print(f"bias grid point 9 in gap units is V_b = {gap_units_to_bias(9, gap) * 1e3:.2f} mV "
      f"(check: {bias_to_gap_units(gap_units_to_bias(9, gap), gap):.1f})")
