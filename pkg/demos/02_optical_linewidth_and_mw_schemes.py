"""Power broadening of the A2 line and the A2/A1 amplitude ratio under broadband MW.

Run: python3 demos/02_optical_linewidth_and_mw_schemes.py
"""
import numpy as np

from vsic import constants as C, lindblad as lb

m = lb.FineStructureModel()
tr = lb.ple_linewidth(m, [0.05, 0.1, 0.2, 0.5, 1.0, 2.0])
for om, w in zip(tr.x, tr.y):
    print(f"Omega_L = {om:5.2f} MHz -> FWHM = {w:6.2f} MHz")
w0 = lb.weak_drive_linewidth(m, [0.05, 0.1, 0.15, 0.2])
print(f"weak-drive limit {w0:.2f} MHz; lifetime limit Gamma/2pi = {C.GAMMA_ES2_TOTAL / (2 * np.pi):.2f} MHz")

# Broadband MW centred on each line: which ground pairs are mixed decides which
# optical line is fed. Ten-level model with gamma1 = 3 gamma2.
ten = lb.FineStructureModel(variant="ten_level")
print("MW lines:", ", ".join(f"{f:.2f}" for f in lb.gs_transitions(ten)), "MHz")
for centre in (254, 256, 258, 260, 262):
    r = lb.a2_a1_ratio(ten, lb.MwScheme(centre))
    print(f"MW centre {centre} MHz: A2/A1 = {r:.3f}")

sym = lb.a2_a1_ratio(lb.FineStructureModel(gamma_1=C.GAMMA_2), lb.MwScheme(258))
print(f"equal ISC rates: A2/A1 = {sym:.6f}")
