"""Model fits and linear inversions used by the analysis procedures.

All nonlinear fits go through one damped least-squares core
(:func:`vsic._lsq.levenberg_marquardt`) with deterministic seeds, so the
same input always gives bit-identical output.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ._lsq import levenberg_marquardt
from .trace import Trace


class FitError(RuntimeError):
    """A fit did not converge or the data carry no usable signal."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PopulationError(ValueError):
    """Population reconstruction failed; ``solution`` holds the unconstrained result."""

    def __init__(self, message, solution=None, condition=None):
        super().__init__(message)
        self.solution = solution
        self.condition = condition


@dataclass
class FitResult:
    names: tuple
    values: np.ndarray
    units: tuple
    rss: float
    stderr: Optional[np.ndarray]
    converged: bool
    iterations: int
    flags: dict = field(default_factory=dict)
    derived: dict = field(default_factory=dict)

    def __getitem__(self, name):
        if name in self.names:
            return float(self.values[self.names.index(name)])
        if name in self.derived:
            return self.derived[name]
        raise KeyError(name)

    def error(self, name):
        if self.stderr is None:
            return None
        return float(self.stderr[self.names.index(name)])

    def as_dict(self):
        out = {
            "parameters": {n: float(v) for n, v in zip(self.names, self.values)},
            "units": dict(zip(self.names, self.units)),
            "stderr": None if self.stderr is None
            else {n: float(s) for n, s in zip(self.names, self.stderr)},
            "rss": float(self.rss),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }
        if self.flags:
            out["flags"] = {k: v for k, v in self.flags.items()}
        if self.derived:
            out["derived"] = {k: v for k, v in self.derived.items()}
        return out


def _weights(trace):
    if trace.sigma is None:
        return np.ones_like(trace.y)
    if np.any(trace.sigma <= 0):
        raise ValueError("sigma must be > 0 everywhere")
    return 1.0 / trace.sigma


def _run(model, jac, trace, p0, scale=None, **kw):
    w = _weights(trace)
    x, y = trace.x, trace.y

    def res(p):
        return w * (model(x, p) - y)

    def jfun(p):
        return w[:, None] * jac(x, p)

    return levenberg_marquardt(res, p0, jac=None if jac is None else jfun, scale=scale, **kw)


def _result(lsq, names, units, **extra):
    return FitResult(tuple(names), lsq.x.copy(), tuple(units), lsq.rss, lsq.stderr(),
                     lsq.converged, lsq.iterations, **extra)


# -- Lorentzian ---------------------------------------------------------------

def lorentzian(x, center, fwhm, amplitude):
    """Peak-height normalised Lorentzian."""
    h2 = (fwhm / 2.0) ** 2
    return amplitude * h2 / ((x - center) ** 2 + h2)


def _lor_model(n):
    def model(x, p):
        y = np.full_like(x, p[0])
        for k in range(n):
            c, w, a = p[1 + 3 * k: 4 + 3 * k]
            y = y + lorentzian(x, c, w, a)
        return y

    def jac(x, p):
        cols = [np.ones_like(x)]
        for k in range(n):
            c, w, a = p[1 + 3 * k: 4 + 3 * k]
            h2 = (w / 2) ** 2
            den = (x - c) ** 2 + h2
            cols.append(a * h2 * 2 * (x - c) / den**2)
            cols.append(a * (w / 2) * (x - c) ** 2 / den**2)
            cols.append(h2 / den)
        return np.column_stack(cols)

    return model, jac


def _half_width_seed(x, y, i, base):
    half = base + (y[i] - base) / 2
    lo = i
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = i
    while hi < len(y) - 1 and y[hi] > half:
        hi += 1
    return max(x[hi] - x[lo], 2 * np.min(np.diff(x)))


def fit_lorentzian(trace: Trace, n_peaks: int = 1) -> FitResult:
    """Fit ``offset + sum_k L(x; center_k, fwhm_k, amplitude_k)``.

    Seeds are moment style estimates: offset from the lower decile, centres at
    the highest remaining maxima, widths from the half-maximum crossings.
    Peaks are returned sorted by centre. A flat trace is not fitted; it returns
    zero amplitude with ``flags['degenerate'] = True``.
    """
    if n_peaks not in (1, 2):
        raise ValueError("n_peaks must be 1 or 2")
    need = 5 * (3 * n_peaks + 1)
    if len(trace) < need:
        raise ValueError(f"need at least {need} points for {n_peaks} peak(s), got {len(trace)}")
    order = np.argsort(trace.x)
    x, y = trace.x[order], trace.y[order]
    names = ["offset"]
    units = [trace.y_unit]
    for k in range(1, n_peaks + 1):
        names += [f"center{k}", f"fwhm{k}", f"amplitude{k}"]
        units += [trace.x_unit, trace.x_unit, trace.y_unit]

    span = np.ptp(y)
    if span <= 1e-12 * max(np.max(np.abs(y)), 1e-300):
        vals = [float(np.mean(y))]
        for k in range(n_peaks):
            vals += [float(np.mean(x)), float(np.ptp(x)), 0.0]
        return FitResult(tuple(names), np.array(vals), tuple(units), 0.0, None, True, 0,
                         flags={"degenerate": True})

    base = float(np.quantile(y, 0.1))
    p0 = [base]
    work = y.copy()
    for _ in range(n_peaks):
        i = int(np.argmax(work))
        w = _half_width_seed(x, work, i, base)
        p0 += [x[i], w, work[i] - base]
        # blank out this peak before looking for the next
        work = np.where(np.abs(x - x[i]) < 1.5 * w, base, work)
    model, jac = _lor_model(n_peaks)
    scale = np.array([span] + [np.ptp(x), np.ptp(x), span] * n_peaks)
    lsq = _run(model, jac, Trace(x, y, None if trace.sigma is None else trace.sigma[order]),
               p0, scale=scale)
    if not lsq.converged:
        raise FitError("Lorentzian fit did not converge", best=lsq.x)
    p = lsq.x.copy()
    se = lsq.stderr()
    # canonical ordering: positive widths, peaks sorted by centre
    blocks = []
    for k in range(n_peaks):
        c, wd, a = p[1 + 3 * k: 4 + 3 * k]
        s = None if se is None else se[1 + 3 * k: 4 + 3 * k]
        blocks.append((c, abs(wd), a, s))
    blocks.sort(key=lambda b: b[0])
    vals = [p[0]]
    errs = None if se is None else [se[0]]
    for c, wd, a, s in blocks:
        vals += [c, wd, a]
        if errs is not None:
            errs += list(s)
    res = FitResult(tuple(names), np.array(vals), tuple(units), lsq.rss,
                    None if errs is None else np.array(errs), lsq.converged, lsq.iterations,
                    flags={"degenerate": False})
    if n_peaks == 2:
        res.derived["separation"] = float(vals[4] - vals[1])
    return res


# -- g2 -----------------------------------------------------------------------

def g2_model(tau, n, beta, tau1, tau2):
    """Three-level antibunching model with emitter number ``n``."""
    t = np.abs(tau)
    return (1 - beta * np.exp(-t / tau1) - (1 - beta) * np.exp(-t / tau2)) / n + (n - 1) / n


def _g2_jac(x, p):
    n, beta, t1, t2 = p
    t = np.abs(x)
    e1 = np.exp(-t / t1)
    e2 = np.exp(-t / t2)
    core = 1 - beta * e1 - (1 - beta) * e2
    d_n = -core / n**2 + 1 / n**2
    d_b = (-e1 + e2) / n
    d_t1 = -beta * e1 * t / t1**2 / n
    d_t2 = -(1 - beta) * e2 * t / t2**2 / n
    return np.column_stack([d_n, d_b, d_t1, d_t2])


def single_emitter(g2_zero: float) -> bool:
    """True when g2(0) is below the 0.5 single-emitter threshold."""
    return bool(g2_zero < 0.5)


def fit_g2(trace: Trace) -> FitResult:
    """Fit the three-level g2 model; reports ``g2_zero = (N-1)/N``.

    Seeds: 1/N from the dip depth, tau1 from the 1/e point of the dip, and a
    small fixed grid over (beta, tau2/tau1). The best of the grid is kept.
    """
    x, y = trace.x, trace.y
    t = np.abs(x)
    order = np.argsort(t)
    ts, ys = t[order], y[order]
    depth = 1.0 - ys[0]
    if depth <= 0:
        raise FitError("no antibunching dip in the trace")
    inv_n = min(max(depth, 1e-3), 1.0)
    n0 = 1.0 / inv_n
    target = 1 - depth / np.e
    idx = np.nonzero(ys >= target)[0]
    tau_e = ts[idx[0]] if idx.size else ts[-1] / 2
    tau_e = max(tau_e, ts[1] if ts.size > 1 else 1.0)

    def model(xx, p):
        return g2_model(xx, *p)

    best = None
    for beta0 in (0.9, 0.5):
        for ratio in (3.0, 10.0, 30.0):
            p0 = [n0, beta0, tau_e, tau_e * ratio]
            try:
                lsq = _run(model, _g2_jac, trace, p0, scale=np.array([1, 1, tau_e, tau_e]))
            except FloatingPointError:
                continue
            if best is None or lsq.rss < best.rss:
                best = lsq
    if best is None or not best.converged:
        raise FitError("g2 fit did not converge", best=None if best is None else best.x)
    p = best.x.copy()
    se = best.stderr()
    if p[2] > p[3]:
        # the labels of the two components are interchangeable via beta -> 1-beta
        p = np.array([p[0], 1 - p[1], p[3], p[2]])
        if se is not None:
            se = se[[0, 1, 3, 2]]
    g0 = (p[0] - 1) / p[0]
    flags = {"degenerate_times": bool(abs(p[2] - p[3]) <= 1e-3 * max(p[2], p[3]))}
    return FitResult(("N", "beta", "tau1", "tau2"), p,
                     ("", "", trace.x_unit, trace.x_unit), best.rss, se, best.converged,
                     best.iterations, flags=flags,
                     derived={"g2_zero": float(g0), "single_emitter": single_emitter(g0)})


# -- sinusoid seeds -------------------------------------------------------------

def dominant_frequency(x, y, floor=1e-9):
    """Frequency of the largest non-DC spectral component (cycles per x unit).

    Uniform grids use a zero-padded FFT with parabolic peak interpolation;
    non-uniform grids fall back to a Lomb-Scargle periodogram.
    Returns None when no component rises above ``floor`` times the signal scale.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float) - np.mean(y)
    if np.max(np.abs(y)) == 0.0:
        return None
    dx = np.diff(x)
    if np.allclose(dx, dx[0], rtol=1e-9):
        npad = 8 * int(2 ** np.ceil(np.log2(len(y))))
        spec = np.abs(np.fft.rfft(y, npad))
        freqs = np.fft.rfftfreq(npad, dx[0])
        k = int(np.argmax(spec[1:])) + 1
        if spec[k] <= floor * np.sum(np.abs(y)):
            return None
        if 0 < k < len(spec) - 1:
            a, b, c = spec[k - 1], spec[k], spec[k + 1]
            den = a - 2 * b + c
            shift = 0.5 * (a - c) / den if den != 0 else 0.0
            return float((k + shift) * (freqs[1] - freqs[0]))
        return float(freqs[k])
    from scipy.signal import lombscargle
    span = x.max() - x.min()
    f = np.linspace(0.5 / span, 0.5 / np.min(dx), 20000)
    pw = lombscargle(x, y, 2 * np.pi * f)
    return float(f[int(np.argmax(pw))])


# -- Rabi -----------------------------------------------------------------------

def rabi_model(t, offset, amplitude, frequency, phase):
    return offset + amplitude * np.cos(2 * np.pi * frequency * t + phase)


def _rabi_jac(t, p):
    off, amp, f, ph = p
    arg = 2 * np.pi * f * t + ph
    c, s = np.cos(arg), np.sin(arg)
    return np.column_stack([np.ones_like(t), c, -amp * s * 2 * np.pi * t, -amp * s])


def fit_rabi(trace: Trace, min_periods: float = 2.0) -> FitResult:
    """Sinusoid fit seeded by the dominant DFT component.

    Reports frequency (cycles per x unit), visibility ``(Imax - Imin)/(Imax + Imin)``
    from the fitted extremes, phase in radians and offset.
    """
    x, y = trace.x, trace.y
    f0 = dominant_frequency(x, y)
    if f0 is None or np.ptp(y) <= 1e-12 * max(np.max(np.abs(y)), 1e-300):
        raise FitError("no oscillation detected (flat trace)")
    span = x.max() - x.min()
    if f0 * span < min_periods:
        raise FitError(f"only {f0 * span:.2f} periods sampled, need {min_periods}")
    off0 = float(np.mean(y))
    amp0 = float(np.ptp(y) / 2)
    # linear solve for the phase given the seed frequency
    a = np.column_stack([np.ones_like(x), np.cos(2 * np.pi * f0 * x), np.sin(2 * np.pi * f0 * x)])
    c = np.linalg.lstsq(a, y, rcond=None)[0]
    amp0 = float(np.hypot(c[1], c[2])) or amp0
    ph0 = float(np.arctan2(-c[2], c[1]))
    off0 = float(c[0])

    def model(xx, p):
        return rabi_model(xx, *p)

    lsq = _run(model, _rabi_jac, trace, [off0, amp0, f0, ph0],
               scale=np.array([max(abs(off0), amp0), amp0, f0, 1.0]))
    if not lsq.converged:
        raise FitError("Rabi fit did not converge", best=lsq.x)
    off, amp, f, ph = lsq.x
    se = lsq.stderr()
    if amp < 0:
        amp, ph = -amp, ph + np.pi
    ph = float(np.mod(ph, 2 * np.pi))
    imax, imin = off + amp, off - amp
    vis = (imax - imin) / (imax + imin) if (imax + imin) != 0 else np.nan
    vals = np.array([f, vis, ph, off, amp])
    errs = None
    if se is not None:
        s_vis = abs(vis) * np.hypot(se[1] / amp if amp else 0.0, se[0] / off if off else 0.0)
        errs = np.array([se[2], s_vis, se[3], se[0], se[1]])
    return FitResult(("frequency", "visibility", "phase", "offset", "amplitude"), vals,
                     ("1/" + trace.x_unit if trace.x_unit else "", "", "rad", trace.y_unit,
                      trace.y_unit), lsq.rss, errs, lsq.converged, lsq.iterations)


# -- decays --------------------------------------------------------------------

DECAY_KINDS = {"gaussian_fid": 2.0, "exponential": 1.0, "stretched_echo": None}


def decay_model(t, amplitude, T, n, offset=0.0):
    return offset + amplitude * np.exp(-(np.abs(t) / T) ** n)


def fit_decay(trace: Trace, kind: str = "exponential", offset: bool = False,
              n_seed: float = 3.0) -> FitResult:
    """Fit ``amplitude * exp(-(t/T)^n) [+ offset]``.

    ``kind`` fixes n = 2 (gaussian_fid) or n = 1 (exponential), or leaves it
    free (stretched_echo, seeded at ``n_seed``). Without an offset the trace
    must decay; a trace that ends higher than it starts raises FitError.
    """
    if kind not in DECAY_KINDS:
        raise ValueError(f"kind must be one of {sorted(DECAY_KINDS)}")
    order = np.argsort(trace.x)
    t, y = trace.x[order], trace.y[order]
    sig = None if trace.sigma is None else trace.sigma[order]
    tr = Trace(t, y, sig)
    if not offset and y[-1] >= y[0]:
        raise FitError("trace is not decaying")
    n_fixed = DECAY_KINDS[kind]
    c0 = float(y[-1]) if offset else 0.0
    a0 = float(y[0] - c0)
    if a0 == 0:
        raise FitError("zero amplitude")
    frac = (y - c0) / a0
    below = np.nonzero(frac <= np.exp(-1))[0]
    T0 = float(t[below[0]] - t[0]) if below.size else float(np.ptp(t))
    T0 = max(T0, float(np.min(np.diff(t))))
    if n_fixed == 1.0 and not offset and np.all(y > 0):
        # log-linear regression gives an exact seed for pure exponentials
        slope, icpt = np.polyfit(t, np.log(y), 1)
        if slope < 0:
            T0, a0 = -1.0 / slope, float(np.exp(icpt))

    free_n = n_fixed is None
    names = ["amplitude", "T"] + (["n"] if free_n else []) + (["offset"] if offset else [])
    units = [trace.y_unit, trace.x_unit] + ([""] if free_n else []) + \
        ([trace.y_unit] if offset else [])

    def unpack(p):
        a, T = p[0], p[1]
        i = 2
        n = n_fixed
        if free_n:
            n = p[i]
            i += 1
        c = p[i] if offset else 0.0
        return a, T, n, c

    def model(xx, p):
        a, T, n, c = unpack(p)
        return decay_model(xx, a, T, n, c)

    def jac(xx, p):
        a, T, n, c = unpack(p)
        u = np.abs(xx) / T
        un = np.where(u > 0, u ** n, 0.0)
        e = np.exp(-un)
        cols = [e, a * e * n * un / T]
        if free_n:
            lg = np.where(u > 0, np.log(np.where(u > 0, u, 1.0)), 0.0)
            cols.append(-a * e * un * lg)
        if offset:
            cols.append(np.ones_like(xx))
        return np.column_stack(cols)

    seeds_n = [n_seed, 1.0, 2.0] if free_n else [None]
    best = None
    for ns in seeds_n:
        p0 = [a0, T0] + ([ns] if free_n else []) + ([c0] if offset else [])
        sc_ = [abs(a0), T0] + ([1.0] if free_n else []) + ([abs(a0)] if offset else [])
        try:
            lsq = _run(model, jac, tr, p0, scale=np.array(sc_))
        except FloatingPointError:
            continue
        if best is None or lsq.rss < best.rss:
            best = lsq
    if best is None or not best.converged:
        raise FitError("decay fit did not converge", best=None if best is None else best.x)
    p = best.x.copy()
    p[1] = abs(p[1])
    out = _result(best, names, units)
    out.values = p
    out.derived["n"] = float(n_fixed if not free_n else p[2])
    return out


def fid_model(t, amplitude, T, detuning, phase, offset, n=2.0):
    return offset + amplitude * np.exp(-(np.abs(t) / T) ** n) * np.cos(2 * np.pi * detuning * t + phase)


def fit_fid(trace: Trace, n: float = 2.0) -> FitResult:
    """Fit a detuned free-induction decay, Gaussian envelope by default."""
    t, y = trace.x, trace.y
    f0 = dominant_frequency(t, y)
    if f0 is None:
        raise FitError("no oscillation detected")
    off0 = float(np.mean(y[-max(len(y) // 10, 1):]))
    env = np.abs(y - off0)
    a0 = float(np.max(env))
    # envelope seed from the decay of the local maxima
    above = np.nonzero(env >= a0 / np.e)[0]
    T0 = float(t[above[-1]] - t[0]) if above.size else float(np.ptp(t) / 2)
    T0 = max(T0, 2.0 / f0 if f0 else T0)
    best = None
    for ph0 in (0.0, np.pi / 2, np.pi, 3 * np.pi / 2):
        def model(xx, p):
            return fid_model(xx, *p, n=n)
        lsq = _run(model, None, trace, [a0, T0, f0, ph0, off0],
                   scale=np.array([a0, T0, f0, 1.0, max(abs(off0), a0)]))
        if best is None or lsq.rss < best.rss:
            best = lsq
    if not best.converged:
        raise FitError("FID fit did not converge", best=best.x)
    p = best.x.copy()
    if p[0] < 0:
        p[0], p[3] = -p[0], p[3] + np.pi
    if p[2] < 0:
        p[2], p[3] = -p[2], -p[3]
    p[1] = abs(p[1])
    p[3] = np.mod(p[3], 2 * np.pi)
    out = _result(best, ["amplitude", "T", "detuning", "phase", "offset"],
                  [trace.y_unit, trace.x_unit, "", "rad", trace.y_unit])
    out.values = p
    return out


# -- polarisation ---------------------------------------------------------------

def polarization_model(phi_deg, amplitude, phi0_deg, offset):
    return amplitude * np.cos(2 * np.radians(phi_deg - phi0_deg)) ** 2 + offset


def fit_polarization(angles, intensities) -> FitResult:
    """Fit ``A cos^2(2 (phi - phi0)) + C`` to half-wave-plate angles in degrees.

    The model is linear in (1, cos 4phi, sin 4phi); that solve gives the seed
    and the damped least-squares step polishes it. phi0 is reported in [0, 90).
    """
    phi = np.asarray(angles, float)
    y = np.asarray(intensities, float)
    if phi.shape != y.shape:
        raise ValueError("angles and intensities differ in length")
    r = np.radians(phi)
    a = np.column_stack([np.ones_like(r), np.cos(4 * r), np.sin(4 * r)])
    if phi.size < 3 or np.linalg.matrix_rank(a) < 3:
        raise FitError("angle sampling is rank deficient for the cos^2 model")
    c = np.linalg.lstsq(a, y, rcond=None)[0]
    half = np.hypot(c[1], c[2])
    amp0 = 2 * half
    phi00 = np.degrees(np.arctan2(c[2], c[1]) / 4)
    off0 = c[0] - half

    def model(xx, p):
        return polarization_model(xx, *p)

    def jac(xx, p):
        amp, p0, _ = p
        arg = 2 * np.radians(xx - p0)
        return np.column_stack([np.cos(arg) ** 2,
                                amp * 2 * np.cos(arg) * np.sin(arg) * 2 * np.pi / 180,
                                np.ones_like(xx)])

    tr = Trace(phi, y)
    lsq = _run(model, jac, tr, [amp0, phi00, off0],
               scale=np.array([max(amp0, 1e-300), 1.0, max(abs(off0), amp0, 1e-300)]))
    amp, p0, off = lsq.x
    if amp < 0:
        amp, p0, off = -amp, p0 + 45.0, off + amp
    p0 = float(np.mod(p0, 90.0))
    contrast = amp / (amp + 2 * off) if (amp + 2 * off) != 0 else np.nan
    out = _result(lsq, ["amplitude", "phi0", "offset"], ["", "deg", ""])
    out.values = np.array([amp, p0, off])
    out.derived["contrast"] = float(contrast)
    return out


# -- populations from Rabi visibilities ------------------------------------------

class Visibilities(NamedTuple):
    """Rabi fringe visibilities for the (3/2,1/2), (1/2,-1/2), (-1/2,-3/2) pairs."""

    v_32_12: float
    v_12_m12: float
    v_m12_m32: float


POPULATION_ORDER = ("-3/2", "-1/2", "+1/2", "+3/2")


def visibilities_from_populations(p, strict=False) -> Visibilities:
    """Forward model for readout sensitive only to |+-3/2>.

    ``p`` is ordered (p_-3/2, p_-1/2, p_+1/2, p_+3/2). A pair whose fringe has
    zero signal at both extremes has no defined visibility: it is returned as
    NaN, or raises ValueError when ``strict`` is set.
    """
    pm32, pm12, p12, p32 = np.asarray(p, float)
    if np.any(np.asarray(p) < -1e-12):
        raise ValueError("populations must be non-negative")
    if abs(pm32 + pm12 + p12 + p32 - 1) > 1e-9:
        raise ValueError("populations must sum to 1")
    d1 = 2 * pm32 + p12 + p32
    d2 = 2 * pm32 + pm12 + p12
    d3 = 2 * p32 + pm32 + pm12
    if strict and min(d1, d2, d3) <= 0:
        raise ValueError("zero denominator in the visibility model")

    def ratio(num, den):
        return num / den if den > 0 else float("nan")

    return Visibilities(ratio(p12 - p32, d1), ratio(pm12 - p12, d2), ratio(pm12 - pm32, d3))


def _visibility_matrix(v):
    v1, v2, v3 = v
    return np.array([
        [2 * v1, 0.0, v1 - 1, v1 + 1],
        [2 * v2, v2 - 1, v2 + 1, 0.0],
        [v3 + 1, v3 - 1, 0.0, 2 * v3],
        [1.0, 1.0, 1.0, 1.0],
    ])


def populations_from_visibilities(v, check_order=True, tol=1e-9, max_condition=1e10):
    """Solve the three visibility equations plus normalisation for p.

    Each visibility relation is linear and homogeneous in p once the
    denominator is cleared, so together with sum(p) = 1 this is a 4x4 linear
    system. The ordering p_-3/2 ~ p_+3/2 <= p_+1/2 <= p_-1/2 is checked after
    the solve when ``check_order`` is set.

    Returns (p, condition_number).
    """
    v = tuple(float(x) for x in v)
    if not all(np.isfinite(v)):
        raise ValueError("visibilities must be finite")
    if any(abs(x) > 1 for x in v):
        raise ValueError("visibilities must lie in [-1, 1]")
    a = _visibility_matrix(v)
    cond = float(np.linalg.cond(a))
    b = np.array([0.0, 0.0, 0.0, 1.0])
    if not np.isfinite(cond) or cond > max_condition:
        sol = np.linalg.lstsq(a, b, rcond=None)[0]
        raise PopulationError(f"visibility system is singular (condition {cond:.3g})",
                              solution=sol, condition=cond)
    p = np.linalg.solve(a, b)
    if check_order:
        pm32, pm12, p12, p32 = p
        ok = max(pm32, p32) <= p12 + tol and p12 <= pm12 + tol and np.all(p >= -tol)
        if not ok:
            raise PopulationError("reconstructed populations violate the ordering assumption",
                                  solution=p, condition=cond)
    return p, cond
