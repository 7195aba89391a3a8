"""Spin-3/2 operators, static spin Hamiltonians and closed-form spectroscopy helpers.

Basis order everywhere is |+3/2>, |+1/2>, |-1/2>, |-3/2>. Frequencies are in
MHz, fields in gauss. ZFS constants are stored as ``D`` (the coefficient of
S_z^2); the zero-field splitting between the |m|=3/2 and |m|=1/2 manifolds is
``2*D``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.constants as sc
from scipy.optimize import brentq

from . import constants as C

M_VALUES = np.array([1.5, 0.5, -0.5, -1.5])
SPIN = 1.5


class SpinOperators(NamedTuple):
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


def spin_matrices() -> SpinOperators:
    """Return the S=3/2 matrices in the |+3/2>, |+1/2>, |-1/2>, |-3/2> basis."""
    m = M_VALUES
    splus = np.zeros((4, 4), dtype=complex)
    # <m+1|S+|m> = sqrt(S(S+1) - m(m+1))
    for i in range(1, 4):
        splus[i - 1, i] = np.sqrt(SPIN * (SPIN + 1) - m[i] * (m[i] + 1))
    sminus = splus.conj().T
    sx = (splus + sminus) / 2
    sy = (splus - sminus) / 2j
    sz = np.diag(m).astype(complex)
    return SpinOperators(sx, sy, sz)


@dataclass(frozen=True)
class SpinSystem:
    """Static parameters of the quartet defect.

    ``d_gs`` and ``d_es`` are the S_z^2 coefficients (half of the printed
    ``2D`` splittings). Use :meth:`from_splittings` or :meth:`preset` to build
    from the full splittings.
    """

    d_gs: float = C.PRESETS["main_text"]["two_d_gs"] / 2
    d_es: float = C.PRESETS["main_text"]["two_d_es"] / 2
    g_gs: float = C.PRESETS["main_text"]["g_gs"]
    g_es: float = C.PRESETS["main_text"]["g_es"]
    b0: float = C.PRESETS["main_text"]["b0"]
    bohr_magneton_over_h: float = C.BOHR_MHZ_PER_G

    def __post_init__(self):
        vals = (self.d_gs, self.d_es, self.g_gs, self.g_es, self.b0, self.bohr_magneton_over_h)
        if not np.all(np.isfinite(vals)):
            raise ValueError("SpinSystem parameters must be finite")
        if self.b0 < 0:
            raise ValueError("b0 must be >= 0 (the field is axial)")

    @classmethod
    def from_splittings(cls, two_d_gs, two_d_es, g_gs=2.0028, g_es=2.0033, b0=92.0,
                        bohr_magneton_over_h=C.BOHR_MHZ_PER_G):
        return cls(two_d_gs / 2, two_d_es / 2, g_gs, g_es, b0, bohr_magneton_over_h)

    @classmethod
    def preset(cls, name="main_text", **overrides):
        try:
            p = dict(C.PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(C.PRESETS)}") from None
        p.update(overrides)
        return cls.from_splittings(**p)

    @property
    def zeeman_gs(self) -> float:
        """g_gs * muB * B0 / h in MHz."""
        return self.g_gs * self.bohr_magneton_over_h * self.b0

    @property
    def zeeman_es(self) -> float:
        return self.g_es * self.bohr_magneton_over_h * self.b0


def _axial_hamiltonian(d, zeeman):
    m = M_VALUES
    return np.diag(d * m**2 + zeeman * m).astype(complex)


def gs_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """Ground-state Hamiltonian D_gs S_z^2 + g_gs muB B0 S_z (MHz)."""
    return _axial_hamiltonian(sys.d_gs, sys.zeeman_gs)


def es_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """Excited-state Hamiltonian D_es S_z^2 + g_es muB B0 S_z (MHz)."""
    return _axial_hamiltonian(sys.d_es, sys.zeeman_es)


class MwTransitions(NamedTuple):
    """Ground-state |dm|=1 transition frequencies in MHz.

    mw1: |-1/2> <-> |-3/2>, mw2: |+1/2> <-> |-1/2>, mw3: |+3/2> <-> |+1/2>.
    ``degenerate`` is True outside the ordered regime (Zeeman <= 2|D|), where
    the three lines are no longer ascending in the order above.
    """

    mw1: float
    mw2: float
    mw3: float
    degenerate: bool

    @property
    def frequencies(self):
        return (self.mw1, self.mw2, self.mw3)


def mw_transition_frequencies(sys: SpinSystem) -> MwTransitions:
    e = np.real(np.diag(gs_hamiltonian(sys)))
    # pairs in basis indices: (2,3) -> MW1, (1,2) -> MW2, (0,1) -> MW3
    mw1 = abs(e[2] - e[3])
    mw2 = abs(e[1] - e[2])
    mw3 = abs(e[0] - e[1])
    degenerate = not sys.zeeman_gs > 2 * abs(sys.d_gs)
    return MwTransitions(float(mw1), float(mw2), float(mw3), degenerate)


@dataclass(frozen=True)
class OpticalTransitionSet:
    """Spin-conserving optical line offsets (MHz) keyed by m_S.

    Offsets are measured from the gap Delta E_gs,es as defined for the |m|=1/2
    lines, so the |m|=3/2 lines carry the extra 2(D_es - D_gs).
    """

    offsets: dict
    delta_e: float = C.OPTICAL_GAP_EV
    peak_separation: float = field(default=0.0)

    def distinct(self, decimals=9):
        return sorted(set(np.round(list(self.offsets.values()), decimals)))


def optical_transitions(sys: SpinSystem) -> OpticalTransitionSet:
    dz = (sys.g_es - sys.g_gs) * sys.bohr_magneton_over_h * sys.b0
    sep = 2 * (sys.d_es - sys.d_gs)
    offsets = {
        1.5: sep + 1.5 * dz,
        0.5: 0.5 * dz,
        -0.5: -0.5 * dz,
        -1.5: sep - 1.5 * dz,
    }
    return OpticalTransitionSet(offsets=offsets, peak_separation=sep)


def peak_separation(sys: SpinSystem) -> float:
    """Separation of the A2 and A1 optical lines, 2 (D_es - D_gs)."""
    return 2 * (sys.d_es - sys.d_gs)


# -- double Lorentzian ---------------------------------------------------------

class ResolvedDoubletError(ValueError):
    """The two displaced lines are resolved (centre of the sum is a local minimum)."""


def double_lorentzian_profile(f, f0, a):
    """Sum of two unit-height Lorentzians of FWHM ``a`` centred at -f0/2 and +f0/2."""
    f = np.asarray(f, dtype=float)
    h2 = (a / 2) ** 2
    return h2 / ((f - f0 / 2) ** 2 + h2) + h2 / ((f + f0 / 2) ** 2 + h2)


def resolved_threshold(a):
    """Largest displacement for which the sum keeps its maximum at the centre."""
    return a / np.sqrt(3.0)


def double_lorentzian_fwhm(f0, a):
    """Apparent FWHM of two equal Lorentzians (FWHM ``a``) displaced by ``f0``.

    Valid while the doublet is unresolved, ``f0 <= a/sqrt(3)``; beyond that the
    centre of the sum is a local minimum and a ResolvedDoubletError is raised.
    """
    if a <= 0:
        raise ValueError("single-line FWHM a must be > 0")
    if f0 < 0:
        raise ValueError("displacement f0 must be >= 0")
    if f0 > resolved_threshold(a) * (1 + 1e-12):
        raise ResolvedDoubletError(
            f"f0={f0} exceeds a/sqrt(3)={resolved_threshold(a):.6g}: doublet is resolved"
        )
    f02 = f0 * f0
    a2 = a * a
    return float(np.sqrt(2 * f02 + np.sqrt(5 * f02 * f02 + 2 * f02 * a2 + a2 * a2)))


def displacement_from_fwhm(delta_f, a):
    """Invert :func:`double_lorentzian_fwhm` for the displacement f0.

    Apparent widths at or below ``a`` carry no displacement and map to 0.
    """
    if delta_f <= a:
        return 0.0
    f_max = resolved_threshold(a)
    w_max = double_lorentzian_fwhm(f_max, a)
    if delta_f > w_max * (1 + 1e-12):
        raise ResolvedDoubletError(
            f"apparent width {delta_f} exceeds the unresolved maximum {w_max:.6g}"
        )
    if delta_f >= w_max:
        return float(f_max)
    return float(brentq(lambda f0: double_lorentzian_fwhm(f0, a) - delta_f, 0.0, f_max,
                        xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


class GFactorDifference(NamedTuple):
    value: float
    low: float
    high: float
    f0: float


def g_factor_difference_from_displacement(f0, b0, bohr_magneton_over_h=C.BOHR_MHZ_PER_G):
    """g_es - g_gs from the splitting f0 (MHz) of the |m|=3/2 optical lines."""
    if b0 <= 0:
        raise ValueError("b0 must be > 0 to infer a g-factor difference")
    return f0 / (3 * bohr_magneton_over_h * b0)


def g_factor_difference(delta_f_b, delta_f_0, b0, sigma_b=0.0, sigma_0=0.0,
                        bohr_magneton_over_h=C.BOHR_MHZ_PER_G) -> GFactorDifference:
    """Bound g_es - g_gs from line widths measured with and without field.

    The displacement is obtained by inverting the double-Lorentzian width with
    ``a = delta_f_0``; the interval comes from evaluating every corner of the
    input box (delta_f_b +- sigma_b, delta_f_0 +- sigma_0).
    """
    if b0 <= 0:
        raise ValueError("b0 must be > 0 to infer a g-factor difference")

    def dg(wb, w0):
        return g_factor_difference_from_displacement(
            displacement_from_fwhm(wb, w0), b0, bohr_magneton_over_h)

    f0 = displacement_from_fwhm(delta_f_b, delta_f_0)
    central = dg(delta_f_b, delta_f_0)
    corners = [dg(delta_f_b + sb, delta_f_0 + s0)
               for sb in (-sigma_b, sigma_b) for s0 in (-sigma_0, sigma_0)]
    return GFactorDifference(central, min(corners + [central]), max(corners + [central]), f0)


# -- field alignment -----------------------------------------------------------

def outer_splitting(theta_deg, two_d, b0, g, bohr_magneton_over_h=C.BOHR_MHZ_PER_G):
    """Difference of the two outer |dm|=1 resonances for a field tilted by theta."""
    ops = spin_matrices()
    z = g * bohr_magneton_over_h * b0
    t = np.radians(theta_deg)
    h = (two_d / 2) * ops.sz @ ops.sz + z * (np.cos(t) * ops.sz + np.sin(t) * ops.sx)
    e = np.linalg.eigvalsh(h)
    f = np.diff(e)
    return float(abs(f[2] - f[0]))


def alignment_angle_from_splitting(measured_splitting, two_d_v2, b0, g,
                                   bohr_magneton_over_h=C.BOHR_MHZ_PER_G,
                                   tol=1e-6, max_angle=45.0):
    """Field tilt (degrees) that reproduces a measured outer-resonance splitting.

    Requires the high-field regime g muB B0 > |2 D|, where the splitting falls
    monotonically from its aligned value ``2*two_d_v2`` as the field tilts.
    """
    z = g * bohr_magneton_over_h * b0
    if not z > abs(two_d_v2):
        raise ValueError(f"Zeeman frequency {z:.4g} MHz is not above |2D| = {abs(two_d_v2)} MHz")

    def split(theta):
        return outer_splitting(theta, two_d_v2, b0, g, bohr_magneton_over_h)

    s0 = split(0.0)
    if measured_splitting > s0 + tol:
        raise ValueError(
            f"measured splitting {measured_splitting} MHz exceeds the aligned value {s0:.6f} MHz"
        )
    if measured_splitting >= s0:
        return 0.0
    if measured_splitting < split(max_angle):
        raise ValueError(f"splitting {measured_splitting} MHz needs a tilt beyond {max_angle} deg")
    return float(brentq(lambda t: split(t) - measured_splitting, 0.0, max_angle, xtol=1e-12))


# -- Stark shift and Einstein coefficient ----------------------------------------

def stark_dipole_conversion(tuning_coefficient):
    """Dipole-moment difference (e*Angstrom) for a Stark coefficient in MHz/(MV/m).

    The line shift is delta_p * E / h, so delta_p = h * coefficient.
    """
    if tuning_coefficient < 0:
        raise ValueError("tuning coefficient must be >= 0")
    # MHz/(MV/m) is numerically Hz*m/V
    hz_m_per_v = float(tuning_coefficient)
    return C.H_EV_S * hz_m_per_v * 1e10


def stark_coefficient_from_dipole(delta_p):
    """Inverse of :func:`stark_dipole_conversion`; returns MHz/(MV/m)."""
    if delta_p < 0:
        raise ValueError("dipole difference must be >= 0")
    return delta_p * 1e-10 / C.H_EV_S


def einstein_a_rate(n, omega, mu):
    """Spontaneous emission rate (1/s).

    n: refractive index, omega: angular frequency (rad/s), mu: transition
    dipole (C*m).
    """
    return n * omega**3 * abs(mu) ** 2 / (3 * np.pi * sc.epsilon_0 * sc.hbar * sc.c**3)


def transition_dipole_from_rate(rate, n, omega):
    """Transition dipole (C*m) that produces a given spontaneous rate."""
    return np.sqrt(rate * 3 * np.pi * sc.epsilon_0 * sc.hbar * sc.c**3 / (n * omega**3))
