"""
Harmonic spectrum in velocity and length gauge
==============================================

A sin^2 pulse drives the soft-Coulomb atom.  The dipole acceleration is
taken from the Ehrenfest force, windowed and Fourier transformed.  The
velocity-gauge run (A(t)) and the length-gauge run (E(t) = -dA/dt) are
gauge transforms of each other, so the two spectra must coincide.
"""

import numpy as np

from gaugetdse import Scenario
from gaugetdse.analysis import harmonic_spectrum

omega, field, cycles = 0.148, 0.01, 4
scenario = Scenario.from_dict({
    "name": "demo-harmonics",
    "grid": {"n_points": 1601, "dx": 0.05, "x_min": -40.0, "n_particles": 1},
    "particles": [{"mass": 1.0, "charge": -1.0}],
    "nuclei": [{"charge": 1.0, "position": 0.0}],
    "gauge": {
        "form": "coulomb",
        "A": [{"time": {"kind": "sin2-pulse", "amplitude": field / omega, "omega": omega,
                        "n_cycles": cycles}}],
    },
    "plan": {"dt": 0.005, "n_steps": int(round(cycles * 2 * np.pi / omega / 0.005)),
             "record_every": 1},
})

spectra = {g: harmonic_spectrum(scenario, gauge=g, omega=omega, max_order=5)
           for g in ("velocity", "length")}

print("order   velocity      length")
for n, pv, pl in zip(spectra["length"].metadata["orders"], spectra["velocity"].metadata["peaks"],
                     spectra["length"].metadata["peaks"]):
    print(f"{n:5d}   {pv:.4e}   {pl:.4e}")
