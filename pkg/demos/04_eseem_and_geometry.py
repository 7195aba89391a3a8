"""ESEEM: envelope, its four frequencies, fitting couplings and locating the nucleus.

Run: python3 demos/04_eseem_and_geometry.py
"""
import numpy as np

from vsic import eseem as es, pulsesim as ps
from vsic.trace import Trace

p = es.EseemParams(10.0, 29.0, 77.9)  # kHz
f = es.modulation_frequencies(p)
print("w_alpha, w_beta, w_-, w_+ =", ", ".join(f"{x:.2f}" for x in f), "kHz")
print(f"k = {es.modulation_depth(p):.2f}, Mims depth 4/k = {es.mims_depth(p):.3f}")

# the closed-form envelope against an explicit electron-nuclear propagation
tau = np.linspace(0, 200, 801)
oracle = ps.eseem_quantum_oracle(ps.NuclearCoupling(10.0, 29.0, 77.9), tau)
print(f"formula vs quantum propagation: max diff {np.max(np.abs(es.envelope(p, tau) - oracle)):.1e}")

# resolving w_alpha and w_beta needs a few ms of modulation
long_tau = np.arange(0, 4000, 0.5)
sp = es.echo_spectrum(Trace(long_tau, es.envelope(p, long_tau)))
print("spectral peaks:", ", ".join(f"{pk.frequency:.2f}" for pk in sorted(sp.peaks)), "kHz")

# fit a noisy, decaying echo. With T2 known, divide it out and fit directly.
rng = np.random.default_rng(3)
tau = np.linspace(0, 600, 2401)
decay = np.exp(-(2 * tau / 850.0) ** 3)
y = es.envelope(p, tau) * decay + rng.normal(0, 0.005, tau.size)
keep = decay > 0.3
fit = es.fit_envelope(Trace(tau[keep], y[keep] / decay[keep]), omega_i=77.9)
print(f"known T2:  A_par = {fit.a_par:.2f} kHz, A_perp = {fit.a_perp:.2f} kHz")

# With T2 unknown, fit the decay too. Its amplitude soaks up the mean modulation
# level, so the envelope fit needs a free overall scale.
flat, dfit = es.remove_decay(Trace(tau, y), "divide")
keep = np.exp(-(tau / dfit["T"]) ** dfit["n"]) > 0.3
fit = es.fit_envelope(Trace(tau[keep], flat.y[keep]), omega_i=77.9, free_scale=True)
print(f"fitted T2: A_par = {fit.a_par:.2f} kHz, A_perp = {fit.a_perp:.2f} kHz "
      f"(decay T = {dfit['T']:.0f} us, n = {dfit['n']:.2f}, scale {fit.scale:.3f})")

# point-dipole geometry: both sign conventions of A_par
for br in es.geometry_from_hyperfine(10.0, 29.0):
    g = br.geometry
    print(f"A_par = {br.a_par:+.0f} kHz: r = {g.r:.2f} A, theta = {g.theta:.1f} deg")
