"""Physical constants, parameter presets and default model rates.

Units used throughout the package unless a function says otherwise:

* spin/optical frequencies in MHz (cycles, h = 1), times in microseconds,
  decay rates in 1/us;
* nuclear (ESEEM) frequencies in kHz;
* magnetic field in gauss.

Every number that is not a physical constant is collected here so that
tests and scripts can pin them explicitly.
"""

import scipy.constants as sc

# -- physical constants -------------------------------------------------------

#: Bohr magneton over Planck constant, MHz per gauss.
BOHR_MHZ_PER_G = 1.3996
#: 29Si nuclear gyromagnetic ratio magnitude, kHz per gauss.
GAMMA_SI29_KHZ_PER_G = 0.8465
#: Si electron-nuclear dipolar coefficient, MHz * Angstrom^3.
ETA_SI_MHZ_A3 = 15.72
#: Optical gap of the V1 line, eV (informational).
OPTICAL_GAP_EV = 1.44
#: V1 zero-phonon-line wavelength, m.
ZPL_WAVELENGTH_M = 861e-9
#: Refractive index of 4H-SiC near 861 nm.
N_4H_SIC = 2.6

H_EV_S = sc.physical_constants["Planck constant in eV/Hz"][0]

# -- spin presets (ZFS given as the printed full splitting 2D) ----------------

PRESETS = {
    "main_text": {
        "two_d_gs": 4.5,
        "two_d_es": 985.0,
        "g_gs": 2.0028,
        "g_es": 2.0033,
        "b0": 92.0,
    },
    "s7": {
        "two_d_gs": 9.0,
        "two_d_es": 975.0,
        "g_gs": 2.0028,
        "g_es": 2.0033,
        "b0": 92.0,
    },
}

# -- optical / fine-structure rates -------------------------------------------

#: Excited-state lifetime of the A2 manifold, us.
TAU_ES_US = 5.5e-3
#: Shelving (metastable doublet) lifetime, us.
TAU_SHELF_US = 103.7e-3
#: Fraction of the A2 excited-state decay that goes through intersystem crossing.
ISC_FRACTION_ES2 = 0.10

GAMMA_ES2_TOTAL = 1.0 / TAU_ES_US
GAMMA_2 = ISC_FRACTION_ES2 * GAMMA_ES2_TOTAL
GAMMA_1 = 3.0 * GAMMA_2
GAMMA_R = GAMMA_ES2_TOTAL - GAMMA_2
GAMMA_3 = 1.0 / TAU_SHELF_US
GAMMA_4 = 1.0 / TAU_SHELF_US
#: Ground-state spin relaxation, 1/us.
GAMMA_RELAX = 1.0 / 260.0
#: Doublet dephasing, 1/us.
GAMMA_S = 10.0
#: Coherent doublet mixing, MHz.
LAMBDA_DS = 10.0

#: Optical drive used for PLE scans (weak drive), MHz.
OMEGA_L_PLE = 1.0
#: Optical drive used for initialisation / readout pulses in sequences, MHz.
OMEGA_L_PUMP = 5.0
#: Incoherent mixing rate of a continuous MW drive, 1/us.
MW_MIX_RATE = 1.0
#: MW3 mixing rate applied together with the A2 laser during initialisation, 1/us.
MW3_PUMP_RATE = 5.0
#: Broadband MW bandwidth (full width), MHz.
MW_BANDWIDTH = 10.0
#: Depolarising rate of the off-resonant (730 nm) laser, 1/us.
OFFRES_DEPOL_RATE = 0.5

# -- spin-control defaults ----------------------------------------------------

#: MW drive amplitude, MHz. Population oscillates at 2*c*drive on a pair with
#: ladder element c, so the MW1 pair runs at sqrt(3)*drive = 257.5 kHz.
MW_DRIVE_MHZ = 0.148668
#: Free-induction dephasing time, us.
T2_STAR_US = 30.0
#: Hahn-echo coherence time, us.
T2_US = 850.0
#: Stretch exponent of the echo decay.
T2_EXPONENT = 3.0
