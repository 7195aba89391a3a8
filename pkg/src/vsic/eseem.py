"""Electron-spin-echo envelope modulation from a single weakly coupled nucleus.

Frequencies are in kHz (cycles, i.e. the usual omega/2pi numbers) and echo
delays in microseconds, so phases are 2 pi f tau 1e-3. The electron pair is
m_alpha = -3/2, m_beta = -1/2.

The printed depth parameter ``k`` enters as 1/k. It is related to the
conventional Mims depth ``sin^2(eta_alpha - eta_beta)`` by 1/k = depth/4,
see :func:`mims_depth`.
"""

from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np

from . import constants as C
from ._lsq import levenberg_marquardt
from .trace import Trace

M_ALPHA = -1.5
M_BETA = -0.5


@dataclass(frozen=True)
class EseemParams:
    a_par: float
    a_perp: float
    omega_i: float
    m_alpha: float = M_ALPHA
    m_beta: float = M_BETA

    def __post_init__(self):
        if self.omega_i < 0:
            raise ValueError("omega_i must be >= 0")

    @classmethod
    def at_field(cls, a_par, a_perp, b0=C.PRESETS["main_text"]["b0"]):
        """Larmor frequency from the 29Si gyromagnetic ratio at field b0 (G)."""
        return cls(a_par, a_perp, larmor_frequency(b0))


def larmor_frequency(b0):
    """29Si Larmor frequency in kHz at b0 gauss."""
    return C.GAMMA_SI29_KHZ_PER_G * b0


class ModulationFrequencies(NamedTuple):
    omega_alpha: float
    omega_beta: float
    omega_minus: float
    omega_plus: float


def modulation_frequencies(p: EseemParams) -> ModulationFrequencies:
    def w(m):
        return float(np.hypot(p.omega_i + m * p.a_par, m * p.a_perp))

    wa, wb = w(p.m_alpha), w(p.m_beta)
    return ModulationFrequencies(wa, wb, wa - wb, wa + wb)


def modulation_depth(p: EseemParams) -> float:
    """k = (2 omega_alpha omega_beta / (A_perp omega_I))^2; inf when there is no mixing."""
    if p.a_perp == 0 or p.omega_i == 0:
        return float("inf")
    f = modulation_frequencies(p)
    return float((2 * f.omega_alpha * f.omega_beta / (p.a_perp * p.omega_i)) ** 2)


def mims_depth(p: EseemParams) -> float:
    """Conventional depth sin^2 of the quantisation-axis tilt, equal to 4/k."""
    k = modulation_depth(p)
    return 0.0 if np.isinf(k) else 4.0 / k


def _bracket(f, tau):
    ph = 2 * np.pi * 1e-3 * np.asarray(tau, float)
    return (2 - 2 * np.cos(f.omega_alpha * ph) - 2 * np.cos(f.omega_beta * ph)
            + np.cos(f.omega_minus * ph) + np.cos(f.omega_plus * ph))


def envelope(p: EseemParams, tau):
    """Echo amplitude -<S_y> at delay tau (us); bounded in [1 - 8/k, 1]."""
    k = modulation_depth(p)
    tau = np.asarray(tau, float)
    if np.isinf(k):
        return np.ones_like(tau)
    return 1 - _bracket(modulation_frequencies(p), tau) / k


# -- Fourier analysis -------------------------------------------------------------

class Peak(NamedTuple):
    frequency: float
    amplitude: float


class EchoSpectrum(NamedTuple):
    peaks: List[Peak]
    bin_width: float
    freqs: np.ndarray
    magnitude: np.ndarray


def echo_spectrum(trace: Trace, n_peaks=4, rel_floor=1e-3) -> EchoSpectrum:
    """Hann-windowed magnitude spectrum of an echo trace (x in us, f in kHz).

    The mean is removed first. Up to ``n_peaks`` local maxima above
    ``rel_floor`` times the largest one (and above the round-off level of the
    input) are returned, largest first, with parabolic sub-bin interpolation.
    """
    if len(trace) < 8:
        raise ValueError("echo trace needs at least 8 samples")
    if not trace.is_uniform:
        raise ValueError("echo_spectrum needs uniform delay sampling")
    dt = trace.step * 1e-3  # ms, so frequencies come out in kHz
    y = trace.y - np.mean(trace.y)
    n = y.size
    mag = np.abs(np.fft.rfft(y * np.hanning(n)))
    freqs = np.fft.rfftfreq(n, dt)
    bin_width = 1.0 / (n * dt)
    noise = 1e-12 * max(np.max(np.abs(trace.y)), 1e-300) * n
    peaks = []
    if mag.max() > noise:
        idx = [i for i in range(1, mag.size - 1) if mag[i] > mag[i - 1] and mag[i] >= mag[i + 1]]
        idx = [i for i in idx if mag[i] >= rel_floor * mag.max() and mag[i] > noise]
        idx.sort(key=lambda i: -mag[i])
        for i in idx[:n_peaks]:
            a, b, c = np.log(mag[i - 1:i + 2] + 1e-300)
            den = a - 2 * b + c
            shift = 0.5 * (a - c) / den if den != 0 else 0.0
            peaks.append(Peak(float(freqs[i] + shift * bin_width),
                              float(np.exp(b - 0.25 * (a - c) * shift))))
    return EchoSpectrum(peaks, bin_width, freqs, mag)


# -- geometry -------------------------------------------------------------------------

@dataclass(frozen=True)
class NuclearGeometry:
    r: float
    theta: float
    eta_si: float = C.ETA_SI_MHZ_A3

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be > 0")
        if not 0 <= self.theta <= 90:
            raise ValueError("theta must lie in [0, 90] degrees")


def hyperfine_from_geometry(g: NuclearGeometry):
    """Point-dipole (A_par, A_perp) in kHz for distance r (A) and polar angle theta (deg)."""
    c = g.eta_si * 1e3 / g.r**3
    th = np.radians(g.theta)
    return float(c * (3 * np.cos(th) ** 2 - 1)), float(c * 3 * np.sin(th) * np.cos(th))


class GeometryBranch(NamedTuple):
    geometry: NuclearGeometry
    a_par: float
    a_perp: float
    residual: float


class GeometryError(ValueError):
    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


def _solve_geometry(a_par, a_perp, eta):
    scale = max(np.hypot(a_par, a_perp), 1e-300)

    def res(x):
        r, th = x
        g = NuclearGeometry(abs(r) if r else 1e-9, float(np.clip(th, 0, 90)), eta)
        ap, at = hyperfine_from_geometry(g)
        return np.array([ap - a_par, at - a_perp]) / scale

    rs = np.geomspace(1.0, 50.0, 60)
    ths = np.linspace(0.5, 89.5, 90)
    best = None
    for r in rs:
        c = eta * 1e3 / r**3
        th = np.radians(ths)
        d = np.hypot(c * (3 * np.cos(th) ** 2 - 1) - a_par, 3 * c * np.sin(th) * np.cos(th) - a_perp)
        j = int(np.argmin(d))
        if best is None or d[j] < best[0]:
            best = (d[j], r, ths[j])
    lsq = levenberg_marquardt(res, [best[1], best[2]], scale=np.array([best[1], 1.0]))
    r, th = lsq.x
    th = float(np.clip(th, 0.0, 90.0))
    g = NuclearGeometry(abs(float(r)), th, eta)
    return g, float(np.sqrt(lsq.rss))


def geometry_from_hyperfine(a_par, a_perp, eta_si=C.ETA_SI_MHZ_A3, tol=1e-8):
    """Dipolar (r, theta) solutions for the measured couplings.

    Both sign conventions of A_par are tried (the echo only fixes A_par up to
    the sign convention of the electron-nuclear frame), and A_perp enters by
    magnitude. Each branch is seeded from a (r, theta) grid and refined by
    damped least squares; branches with relative residual above ``tol`` are
    dropped. The branch matching the given sign of A_par comes first.
    """
    if a_par == 0 and a_perp == 0:
        raise ValueError("at least one hyperfine component must be non-zero")
    out = []
    cands = []
    signs = (1.0,) if a_par == 0 else (1.0, -1.0)
    for s in signs:
        g, res = _solve_geometry(s * a_par, abs(a_perp), eta_si)
        br = GeometryBranch(g, s * a_par, abs(a_perp), res)
        cands.append(br)
        if res <= tol:
            out.append(br)
    if not out:
        raise GeometryError("no dipolar geometry reproduces the couplings", cands)
    return out


# -- fitting ------------------------------------------------------------------------------

class EseemFit(NamedTuple):
    a_par: float
    a_perp: float
    k: float
    residual: float
    covariance: object
    omega_i: float
    scale: float = 1.0


class EseemFitError(RuntimeError):
    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


def hyperfine_from_frequencies(omega_alpha, omega_beta, omega_i):
    """Invert the two nuclear frequencies for (A_par, |A_perp|), or None if inconsistent."""
    a_par = (omega_alpha**2 - 9 * omega_beta**2 + 8 * omega_i**2) / (6 * omega_i)
    a_perp2 = 4 * (omega_beta**2 - (omega_i + M_BETA * a_par) ** 2)
    if a_perp2 < 0:
        return None
    return float(a_par), float(np.sqrt(a_perp2))


def fit_envelope(trace: Trace, omega_i=None, b0=C.PRESETS["main_text"]["b0"],
                 free_scale=False) -> EseemFit:
    """Least-squares fit of the envelope to a normalised echo trace (x in us).

    omega_I is held fixed (default from b0). Starts come from the spectral
    peaks (both assignments of the two strongest lines) plus the best points
    of a coarse (A_par, A_perp) grid; the lowest residual wins.

    With ``free_scale`` the model is ``s * envelope`` with s fitted too. Use it
    when the normalisation is uncertain, e.g. after dividing by a decay fitted
    to the modulated trace (its amplitude absorbs the mean modulation level).
    """
    wi = larmor_frequency(b0) if omega_i is None else float(omega_i)
    tau, y = trace.x, trace.y
    if np.ptp(y) <= 1e-9 * max(np.max(np.abs(y)), 1.0):
        raise EseemFitError("no modulation detected")

    def model(p):
        e = envelope(EseemParams(p[0], p[1], wi), tau)
        return p[2] * e if free_scale else e

    def res(p):
        return model(p) - y

    def seed(ap, at):
        if not free_scale:
            return [ap, at]
        e = envelope(EseemParams(ap, at, wi), tau)
        return [ap, at, float(e @ y / (e @ e))]

    starts = []
    try:
        spec = echo_spectrum(trace)
        fr = [pk.frequency for pk in spec.peaks]
        near = sorted(fr, key=lambda f: abs(f - wi))[:2]
        if len(near) == 2:
            for wa, wb in ((near[0], near[1]), (near[1], near[0])):
                s = hyperfine_from_frequencies(wa, wb, wi)
                if s is not None:
                    starts.append(seed(*s))
    except ValueError:
        pass
    grid = [(ap, at) for ap in np.linspace(-0.6 * wi, 0.6 * wi, 13)
            for at in np.linspace(0.05 * wi, 0.9 * wi, 12)]
    scored = sorted((seed(*g) for g in grid), key=lambda s: float(np.sum(res(s) ** 2)))
    starts += scored[:3]

    scale = np.array([wi, wi, 1.0] if free_scale else [wi, wi])
    best = None
    for s in starts:
        lsq = levenberg_marquardt(res, list(s), scale=scale)
        if best is None or lsq.rss < best.rss:
            best = lsq
    if best is None or not best.converged:
        raise EseemFitError("ESEEM fit did not converge",
                            None if best is None else float(best.rss))
    a_par, a_perp = float(best.x[0]), abs(float(best.x[1]))
    if a_perp == 0:
        raise EseemFitError("no modulation detected", float(best.rss))
    k = modulation_depth(EseemParams(a_par, a_perp, wi))
    sc = float(best.x[2]) if free_scale else 1.0
    return EseemFit(a_par, a_perp, k, float(best.rss), best.covariance(), wi, sc)


def remove_decay(trace: Trace, mode="divide", kind="stretched_echo"):
    """Normalise an echo by a fitted decay, returning (normalised trace, decay fit).

    ``divide`` returns y / D(t); ``subtract`` returns 1 + (y - D(t)) / D(0),
    with D(t) = A exp(-(t/T)^n) fitted to the raw trace.
    """
    from .fitkit import decay_model, fit_decay
    fit = fit_decay(trace, kind)
    d = decay_model(trace.x, fit["amplitude"], fit["T"], fit["n"])
    if mode == "divide":
        y = trace.y / d
    elif mode == "subtract":
        y = 1 + (trace.y - d) / fit["amplitude"]
    else:
        raise ValueError("mode must be 'divide' or 'subtract'")
    return trace.with_y(y, y_label="normalised echo"), fit
