"""How a voltage-biased NIS junction heats a microwave resonator.

Electrons tunneling through the junction can emit or absorb a photon of the
resonator mode. Summing the four photon-assisted processes gives the
damping rate γ_T that the junction adds to the mode and the effective
photon number N_T of the bath it represents. Far above the gap both follow
simple closed forms; this script shows how quickly the exact values get
there.

Run: python demos/01_tunneling_rates.py [--plot]
"""

import argparse

import numpy as np

from niscal.constants import E_CHARGE, HBAR, J_to_ueV
from niscal.tunneling import (
    JunctionParams,
    damping_rate_exact,
    damping_rate_highbias,
    effective_photon_number,
    effective_temperature,
    forward_tunneling_rate,
    photon_number_highbias,
)

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--plot", action="store_true", help="save tunneling_rates.png")
args = parser.parse_args()

junction = JunctionParams()  # Δ = 200 µeV, γ_D = 1e-4, T_N = 100 mK
omega_r = 2 * np.pi * 4.67e9
gap = junction.gap_energy
gamma_bar = 2 * np.pi * 17.39e6

print(f"gap Δ = {J_to_ueV(gap):.0f} µeV, photon energy ħω_r = {J_to_ueV(HBAR * omega_r):.2f} µeV")

# The normalized forward rate F(E): tiny below the gap, linear far above it.
print("\nForward tunneling rate F(E) per conductance quantum")
for e in (-0.5, 0.0, 0.5, 1.0, 2.0, 10.0):
    f = forward_tunneling_rate(e * gap, junction)
    print(f"  E = {e:5.1f} Δ   F = {f:.4e} 1/s")

# Per-junction bias in units of Δ/e. Below eV ≈ Δ the mode barely notices
# the junction; above it the damping saturates at γ̄_T.
print("\n eV/Δ   γ_T/γ̄_T (exact)  (high-bias)   N_T (exact)  (high-bias)   T_T (K)")
xs = np.array([0.5, 0.9, 1.1, 1.5, 2, 3, 5, 7, 10, 20])
rows = []
for x in xs:
    v = x * gap / E_CHARGE
    g = damping_rate_exact(v, gamma_bar, junction, omega_r) / gamma_bar
    n = effective_photon_number(v, junction, omega_r)
    t = effective_temperature(v, junction, omega_r)
    gh = damping_rate_highbias(v, gap, gamma_bar) / gamma_bar
    nh = photon_number_highbias(v, gap, omega_r)
    rows.append((g, gh, n, nh))
    print(f"{x:5.1f}   {g:14.6f}  {gh:11.6f}  {n:12.4f}  {nh:11.4f}  {t:9.3f}")

# The relative deviation shrinks roughly like (Δ/eV)⁴.
print("\nRelative deviation of the high-bias forms")
for x, (g, gh, n, nh) in zip(xs, rows):
    if x >= 5:
        print(f"  eV = {x:4.0f} Δ: γ_T {abs(g / gh - 1):.2e}, N_T {abs(n / nh - 1):.2e}")

if args.plot:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fine = np.linspace(0.2, 10, 120)
    g = [damping_rate_exact(x * gap / E_CHARGE, gamma_bar, junction, omega_r) / gamma_bar for x in fine]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(fine, g, label="exact")
    ax.plot(fine[fine > 1.2], damping_rate_highbias(fine[fine > 1.2] * gap / E_CHARGE, gap, 1.0), "--",
            label="high bias")
    ax.set_xlabel("eV / Δ")
    ax.set_ylabel("γ_T / γ̄_T")
    ax.legend()
    fig.tight_layout()
    fig.savefig("tunneling_rates.png", dpi=120)
    print("\nwrote tunneling_rates.png")
