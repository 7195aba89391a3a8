"""Fitting g2 and polarisation data, and the same workflow from the command line.

Run: python3 demos/06_fitting_and_cli.py
"""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from vsic import fitkit as fk
from vsic.trace import Trace

tau = np.linspace(-400, 400, 801)  # ns
rng = np.random.default_rng(0)
g2 = fk.g2_model(tau, 1 / (1 - 0.24), 0.9, 5.5, 103.7) + rng.normal(0, 0.01, tau.size)
r = fk.fit_g2(Trace(tau, g2, x_unit="ns"))
print(f"g2(0) = {r['g2_zero']:.3f}, tau1 = {r['tau1']:.2f} ns, tau2 = {r['tau2']:.1f} ns, "
      f"single emitter: {r['single_emitter']}")

phi = np.arange(0, 181, 5.0)
pol = fk.fit_polarization(phi, fk.polarization_model(phi, 1.0, 12.0, 0.02))
print(f"polarisation contrast {pol['contrast']:.3f} at phi0 = {pol['phi0']:.2f} deg")

cli = [sys.executable, "-m", "vsic.cli"]
with tempfile.TemporaryDirectory() as d:
    out = Path(d) / "ple.csv"
    subprocess.run(cli + ["simulate", "ple", "--preset", "main_text", "--out", str(out)], check=True)
    print(out.read_text().splitlines()[0], "... plus", out.name + ".json")
    res = subprocess.run(cli + ["fit", "lorentzian", str(out), "--peaks", "2"],
                         check=True, capture_output=True, text=True)
    print("separation from the CLI fit:", json.loads(res.stdout)["derived"]["separation"])
    bad = Path(d) / "empty.seq"
    bad.write_text("# nothing\n")
    res = subprocess.run(cli + ["run", str(bad)], capture_output=True, text=True)
    print(f"empty sequence -> exit {res.returncode}: {res.stderr.strip()}")
