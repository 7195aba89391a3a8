"""Ground- and excited-state spin levels, MW lines and the two-peak PLE spectrum.

Run: python3 demos/01_spin_levels_and_ple.py
"""
import numpy as np

from vsic import fitkit as fk, lindblad as lb, spincore as sc

sys = sc.SpinSystem.preset("main_text")
print(f"2D_gs = {2 * sys.d_gs} MHz, 2D_es = {2 * sys.d_es} MHz, B0 = {sys.b0} G")

# Zeeman-split ground quartet: three |dm| = 1 lines
mw = sc.mw_transition_frequencies(sys)
print("MW1, MW2, MW3 =", ", ".join(f"{f:.2f}" for f in mw.frequencies), "MHz")

# optical lines: the |m| = 3/2 pair sits 2(D_es - D_gs) above the |m| = 1/2 pair
print(f"A2 - A1 separation = {sc.peak_separation(sys):.1f} MHz")

# a PLE scan needs ground-state mixing, otherwise optical pumping empties the line
model = lb.FineStructureModel.from_spin_system(sys, mw_mixing=(1.0, 1.0, 1.0))
spec = lb.ple_spectrum(model, np.linspace(-800, 800, 801))
fit = fk.fit_lorentzian(spec, 2)
print(f"fitted peaks at {fit['center1']:.2f} and {fit['center2']:.2f} MHz, "
      f"separation {fit['separation']:.2f} MHz")
print(f"widths {fit['fwhm1']:.1f} and {fit['fwhm2']:.1f} MHz (A1 broader: faster ISC)")

no_mix = lb.ple_spectrum(model.with_(mw_mixing=(0, 0, 0)), [model.line_detuning("A2")])
print(f"A2 signal without MW mixing: {no_mix.y[0]:.2e} vs {spec.y.max():.2e} with mixing")

# g-factor bound from line broadening in field
w = sc.double_lorentzian_fwhm(2.0, 87.6)
print(f"two 87.6 MHz lines displaced by 2 MHz look {w:.3f} MHz wide")
