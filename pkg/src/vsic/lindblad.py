"""Fine-structure master equation: Liouvillian, steady states, time evolution, PLE.

Conventions
-----------
Hamiltonians are in MHz (cycles), rates in 1/us, times in us. The coherent
part of the generator therefore carries a factor 2*pi:

    d rho / dt = -2 pi i [H, rho] + sum_k gamma_k D[O_k] rho

Density matrices are vectorised row-major (``rho.reshape(-1)``), so
vec(A rho B) = (A kron B^T) vec(rho).

Two level schemes are available. ``six_level`` uses the kets
gs1, gs2, es1, es2, ds1, ds2 (index 1 collects |m|=1/2, index 2 collects
|m|=3/2). ``ten_level`` resolves the four ground and four excited spin
sublevels (order +3/2, +1/2, -1/2, -3/2) and keeps the two doublet states.
"""

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import constants as C
from .spincore import SpinSystem
from .trace import Trace

SIX_LABELS = ("gs1", "gs2", "es1", "es2", "ds1", "ds2")
TEN_LABELS = ("gs+3/2", "gs+1/2", "gs-1/2", "gs-3/2",
              "es+3/2", "es+1/2", "es-1/2", "es-3/2", "ds1", "ds2")
TEN_M = (1.5, 0.5, -0.5, -1.5)
# adjacent gs pairs addressed by MW1, MW2, MW3 (indices into TEN_M)
MW_PAIRS = {"MW1": (2, 3), "MW2": (1, 2), "MW3": (0, 1)}
TWO_PI = 2 * np.pi


class SolverError(RuntimeError):
    """Raised for singular steady states or integration limits."""


@dataclass(frozen=True)
class FineStructureModel:
    """Level and rate description feeding the Liouvillian.

    ``mw_mixing`` holds incoherent mixing rates (1/us) for the MW1, MW2 and MW3
    pairs. The six-level scheme has no resolved pairs and mixes gs1 and gs2 at
    the largest of the three rates. ``offres_rate`` adds
    depolarising jumps among all ground sublevels (off-resonant excitation).
    """

    d_gs: float = C.PRESETS["main_text"]["two_d_gs"] / 2
    d_es: float = C.PRESETS["main_text"]["two_d_es"] / 2
    omega_l: float = C.OMEGA_L_PLE
    delta_l: float = 0.0
    gamma_r: float = C.GAMMA_R
    gamma_1: float = C.GAMMA_1
    gamma_2: float = C.GAMMA_2
    gamma_3: float = C.GAMMA_3
    gamma_4: float = C.GAMMA_4
    gamma_R: float = C.GAMMA_RELAX
    gamma_S: float = C.GAMMA_S
    lam: float = C.LAMBDA_DS
    variant: str = "six_level"
    b0: float = C.PRESETS["main_text"]["b0"]
    g_gs: float = C.PRESETS["main_text"]["g_gs"]
    g_es: float = C.PRESETS["main_text"]["g_es"]
    bohr_magneton_over_h: float = C.BOHR_MHZ_PER_G
    mw_mixing: tuple = (0.0, 0.0, 0.0)
    offres_rate: float = 0.0

    def __post_init__(self):
        if self.variant not in ("six_level", "ten_level"):
            raise ValueError(f"unknown variant {self.variant!r}")
        rates = dict(gamma_r=self.gamma_r, gamma_1=self.gamma_1, gamma_2=self.gamma_2,
                     gamma_3=self.gamma_3, gamma_4=self.gamma_4, gamma_R=self.gamma_R,
                     gamma_S=self.gamma_S, offres_rate=self.offres_rate)
        for k, v in rates.items():
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{k} must be finite and >= 0, got {v}")
        object.__setattr__(self, "mw_mixing", tuple(float(r) for r in self.mw_mixing))
        if len(self.mw_mixing) != 3 or any(r < 0 for r in self.mw_mixing):
            raise ValueError("mw_mixing must hold three rates >= 0 (MW1, MW2, MW3)")

    @classmethod
    def from_spin_system(cls, sys: SpinSystem, variant="six_level", **kw):
        return cls(d_gs=sys.d_gs, d_es=sys.d_es, b0=sys.b0, g_gs=sys.g_gs, g_es=sys.g_es,
                   bohr_magneton_over_h=sys.bohr_magneton_over_h, variant=variant, **kw)

    @property
    def labels(self):
        return SIX_LABELS if self.variant == "six_level" else TEN_LABELS

    @property
    def dim(self):
        return len(self.labels)

    def line_detuning(self, line):
        """Laser detuning resonant with the A1 or A2 line at zero field."""
        half = self.d_es - self.d_gs
        if line == "A2":
            return half
        if line == "A1":
            return -half
        raise ValueError(f"unknown optical line {line!r}")

    def with_(self, **kw) -> "FineStructureModel":
        return replace(self, **kw)

    def mw_rate(self, channel):
        return self.mw_mixing[("MW1", "MW2", "MW3").index(channel)]

    def index(self, label):
        return self.labels.index(label)

    def gs_indices(self):
        return [0, 1] if self.variant == "six_level" else [0, 1, 2, 3]

    def es_indices(self):
        return [2, 3] if self.variant == "six_level" else [4, 5, 6, 7]


def _op(n, i, j):
    """|i><j|"""
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1.0
    return m


def build_hamiltonian(model: FineStructureModel) -> np.ndarray:
    """Rotating-frame Hamiltonian in MHz.

    Each spin-conserving pair k sits at detuning Delta_k = delta_l - delta_k,
    where delta_k = +(D_es - D_gs) for the |m|=3/2 (A2) pair and -(D_es - D_gs)
    for the |m|=1/2 (A1) pair; the ground level carries +Delta_k/2 and the
    excited level -Delta_k/2. The ten-level scheme adds g muB B0 m on each
    ground and excited sublevel.
    """
    half = model.d_es - model.d_gs
    n = model.dim
    h = np.zeros((n, n), dtype=complex)
    if model.variant == "six_level":
        for gs, es, dk in ((0, 2, -half), (1, 3, half)):
            delta = model.delta_l - dk
            h[gs, gs] = delta / 2
            h[es, es] = -delta / 2
            h[gs, es] = h[es, gs] = model.omega_l
        ds1, ds2 = 4, 5
    else:
        zg = model.g_gs * model.bohr_magneton_over_h * model.b0
        ze = model.g_es * model.bohr_magneton_over_h * model.b0
        for k, m in enumerate(TEN_M):
            dk = half if abs(m) == 1.5 else -half
            delta = model.delta_l - dk
            gs, es = k, 4 + k
            h[gs, gs] = delta / 2 + zg * m
            h[es, es] = -delta / 2 + ze * m
            h[gs, es] = h[es, gs] = model.omega_l
        ds1, ds2 = 8, 9
    h[ds1, ds2] = h[ds2, ds1] = model.lam
    return h


def jump_operators(model: FineStructureModel):
    """List of (rate, operator) pairs for the dissipative part."""
    n = model.dim
    ops = []
    if model.variant == "six_level":
        gs1, gs2, es1, es2, ds1, ds2 = range(6)
        ops += [(model.gamma_r, _op(n, gs1, es1)), (model.gamma_r, _op(n, gs2, es2))]
        ops += [(model.gamma_1, _op(n, ds1, es1)), (model.gamma_2, _op(n, ds2, es2)),
                (model.gamma_3, _op(n, gs1, ds1)), (model.gamma_4, _op(n, gs2, ds2))]
        ops.append((model.gamma_R, _op(n, gs1, gs2) + _op(n, gs2, gs1)))
        # the pairs are not resolved here: any MW drive mixes gs1 and gs2
        mix = max(model.mw_mixing) + model.offres_rate
        if mix > 0:
            ops += [(mix, _op(n, gs1, gs2)), (mix, _op(n, gs2, gs1))]
    else:
        ds1, ds2 = 8, 9
        for k, m in enumerate(TEN_M):
            gs, es = k, 4 + k
            ops.append((model.gamma_r, _op(n, gs, es)))
            if abs(m) == 0.5:
                ops.append((model.gamma_1, _op(n, ds1, es)))
                ops.append((model.gamma_3 / 2, _op(n, gs, ds1)))
            else:
                ops.append((model.gamma_2, _op(n, ds2, es)))
                ops.append((model.gamma_4 / 2, _op(n, gs, ds2)))
        for a, b in ((0, 1), (1, 2), (2, 3)):
            ops.append((model.gamma_R, _op(n, a, b) + _op(n, b, a)))
        for ch, rate in zip(("MW1", "MW2", "MW3"), model.mw_mixing):
            if rate > 0:
                a, b = MW_PAIRS[ch]
                ops += [(rate, _op(n, a, b)), (rate, _op(n, b, a))]
        if model.offres_rate > 0:
            for a in range(4):
                for b in range(4):
                    if a != b:
                        ops.append((model.offres_rate, _op(n, a, b)))
    ops.append((model.gamma_S, _op(n, ds1, ds1) - _op(n, ds2, ds2)))
    return [(r, o) for r, o in ops if r > 0]


def liouvillian_from(h, jumps) -> np.ndarray:
    """Row-major superoperator for -2 pi i [H, .] + sum gamma D[O]."""
    n = h.shape[0]
    eye = np.eye(n)
    lv = -1j * TWO_PI * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, o in jumps:
        od = o.conj().T
        odo = od @ o
        lv += rate * (np.kron(o, o.conj()) - 0.5 * np.kron(odo, eye) - 0.5 * np.kron(eye, odo.T))
    return lv


def build_liouvillian(model: FineStructureModel) -> np.ndarray:
    return liouvillian_from(build_hamiltonian(model), jump_operators(model))


# -- density matrices -------------------------------------------------------------

@dataclass
class DensityMatrix:
    """Density matrix with level labels."""

    data: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise ValueError("density matrix must be square")

    @property
    def populations(self):
        return np.real(np.diag(self.data)).copy()

    def population(self, label):
        return float(np.real(self.data[self.labels.index(label), self.labels.index(label)]))

    def violations(self, herm_tol=1e-10, trace_tol=1e-10, pos_tol=1e-9):
        """List of invariant violations (empty when valid)."""
        out = []
        d = self.data
        herm = np.max(np.abs(d - d.conj().T))
        if herm > herm_tol:
            out.append(f"not hermitian ({herm:.3g})")
        tr = abs(np.trace(d) - 1)
        if tr > trace_tol:
            out.append(f"trace off by {tr:.3g}")
        ev = np.linalg.eigvalsh((d + d.conj().T) / 2).min()
        if ev < -pos_tol:
            out.append(f"negative eigenvalue {ev:.3g}")
        return out

    def is_valid(self, **tol):
        return not self.violations(**tol)


class StateAudit:
    """Collects invariant checks on every state returned by the solvers.

    Off by default; :func:`enable_audit` switches it on (the test-suite does
    this for the whole run).
    """

    def __init__(self):
        self.checked = 0
        self.failures = []

    def record(self, rho: DensityMatrix, where: str):
        self.checked += 1
        bad = rho.violations()
        if bad:
            self.failures.append((where, bad))


_AUDIT = None


def enable_audit() -> StateAudit:
    global _AUDIT
    if _AUDIT is None:
        _AUDIT = StateAudit()
    return _AUDIT


def audit(rho: DensityMatrix, where: str):
    if _AUDIT is not None:
        _AUDIT.record(rho, where)
    return rho


def hermitize(rho):
    return (rho + rho.conj().T) / 2


def gs_mixture(model: FineStructureModel, weights=None) -> DensityMatrix:
    """Diagonal state on the ground levels (uniform when weights is None)."""
    n = model.dim
    gs = model.gs_indices()
    w = np.ones(len(gs)) if weights is None else np.asarray(weights, float)
    rho = np.zeros((n, n), dtype=complex)
    rho[gs, gs] = w / w.sum()
    return DensityMatrix(rho, model.labels)


# -- steady state -----------------------------------------------------------------

def _null_space_levels(lv, n, labels, rtol):
    u, s, vh = np.linalg.svd(lv)
    null = vh[s <= rtol * s[0]].conj()
    involved = set()
    for v in null:
        m = hermitize(v.reshape(n, n))
        for i in np.nonzero(np.abs(np.diag(m)) > 1e-8 * np.max(np.abs(m)))[0]:
            involved.add(labels[i])
    return null.shape[0], sorted(involved, key=labels.index)


def steady_state_from(lv, labels, check_unique=True, rtol=1e-13) -> DensityMatrix:
    """Unit-trace null vector of a Liouvillian."""
    n = len(labels)
    if check_unique:
        s = np.linalg.svd(lv, compute_uv=False)
        if s[-2] <= rtol * s[0]:
            dim, lv_names = _null_space_levels(lv, n, labels, rtol)
            raise SolverError(
                f"steady state is not unique (null space dimension {dim}); "
                f"disconnected levels: {', '.join(lv_names)}"
            )
    tr_row = np.eye(n).reshape(-1)
    a = np.vstack([lv, tr_row[None, :]])
    b = np.zeros(n * n + 1, dtype=complex)
    b[-1] = 1.0
    x = np.linalg.lstsq(a, b, rcond=None)[0]
    rho = hermitize(x.reshape(n, n))
    rho /= np.trace(rho).real
    return audit(DensityMatrix(rho, labels), "steady_state")


def steady_state(model: FineStructureModel, check_unique=True) -> DensityMatrix:
    """Stationary state of the model.

    Raises SolverError when the null space of the Liouvillian is degenerate,
    naming the levels involved (e.g. two ground levels with no connecting
    process).
    """
    return steady_state_from(build_liouvillian(model), model.labels, check_unique)


# -- time evolution ---------------------------------------------------------------

def rk4_increment(generator, h):
    """One RK4 step for dx/dt = G x, returned as the increment M - I."""
    g = h * generator
    g2 = g @ g
    return g + g2 / 2 + g2 @ g / 6 + g2 @ g2 / 24


def rk4_step_matrix(generator, h):
    """Exact one-step RK4 map for the linear ODE dx/dt = G x."""
    return np.eye(generator.shape[0], dtype=complex) + rk4_increment(generator, h)


def _power_increment(x, n):
    """Return (I + x)^n - I by binary powering.

    Working with the increment keeps its small entries accurate (the same
    idea as expm1), so the round-off of long step chains stays near
    eps * ||G|| t instead of growing with the step count.
    """
    result = None
    base = x
    while n:
        if n & 1:
            result = base.copy() if result is None else result + base + result @ base
        n >>= 1
        if n:
            base = 2 * base + base @ base
    return np.zeros_like(x) if result is None else result


def _n_steps(generator_norm, dt, step_fraction, max_steps):
    if dt < 0:
        raise ValueError("time grid must be non-decreasing")
    if dt == 0 or generator_norm == 0:
        return 0
    n = int(np.ceil(dt * generator_norm / step_fraction))
    if n > max_steps:
        raise SolverError(
            f"{n} RK4 steps needed (limit {max_steps}); the generator is too stiff "
            "for this interval, consider rescaling the fastest rates"
        )
    return n


DEFAULT_STEP_FRACTION = 1 / 200


def propagator(generator, t, step_fraction=DEFAULT_STEP_FRACTION, max_steps=10**15, norm=None):
    """Fixed-step RK4 propagator over time t.

    The step is h = t / n with n = ceil(t ||G||_2 / step_fraction), and the n
    identical steps are composed by repeated squaring.
    """
    if norm is None:
        norm = np.linalg.norm(generator, 2)
    n = _n_steps(norm, t, step_fraction, max_steps)
    eye = np.eye(generator.shape[0], dtype=complex)
    if n == 0:
        return eye
    return eye + _power_increment(rk4_increment(generator, t / n), n)


def evolve_from(lv, rho0, t_grid, labels, step_fraction=DEFAULT_STEP_FRACTION, max_steps=10**15):
    rho0 = np.asarray(rho0.data if isinstance(rho0, DensityMatrix) else rho0, dtype=complex)
    n = rho0.shape[0]
    t = np.asarray(t_grid, float)
    if t.ndim != 1 or (t.size and t[0] < 0):
        raise ValueError("t_grid must be a 1-D array of non-negative times")
    norm = np.linalg.norm(lv, 2)
    x = rho0.reshape(-1)
    out = []
    last = 0.0
    cache = {}
    for ti in t:
        dt = ti - last
        key = round(dt, 15)
        if key not in cache:
            cache[key] = propagator(lv, dt, step_fraction, max_steps, norm)
        x = cache[key] @ x
        rho = hermitize(x.reshape(n, n))
        x = rho.reshape(-1)
        out.append(audit(DensityMatrix(rho, labels), "evolve"))
        last = ti
    return out


def evolve(model: FineStructureModel, rho0, t_grid, step_fraction=DEFAULT_STEP_FRACTION, max_steps=10**15):
    """Density matrices at the times in ``t_grid`` (us), starting from rho0 at t = 0.

    Fixed-step fourth-order Runge-Kutta with h <= step_fraction / ||L||_2.
    Because the equation is linear, each step is the matrix polynomial
    I + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24; many equal steps are composed
    by binary powering, and maps for repeated intervals are cached.
    """
    return evolve_from(build_liouvillian(model), rho0, t_grid, model.labels,
                       step_fraction, max_steps)


# -- spectra ------------------------------------------------------------------------

def _signal(model, rho: DensityMatrix, weighted):
    s = float(np.sum(rho.populations[model.es_indices()]))
    return s * model.gamma_r if weighted else s


def ple_spectrum(model: FineStructureModel, delta_grid, weighted=False, check_unique=False) -> Trace:
    """Steady-state excited-state population versus laser detuning (MHz)."""
    d = np.asarray(delta_grid, float)
    if not np.all(np.isfinite(d)):
        raise ValueError("delta_grid must be finite")
    y = np.empty_like(d)
    for i, di in enumerate(d):
        y[i] = _signal(model, steady_state(model.with_(delta_l=float(di)), check_unique), weighted)
    return Trace(d, y, x_label="laser detuning", y_label="PLE", x_unit="MHz",
                 y_unit="1/us" if weighted else "population",
                 meta={"variant": model.variant, "omega_l": model.omega_l})


def _fit_peak(model, center, half_span, n_points):
    from .fitkit import fit_lorentzian
    grid = np.linspace(center - half_span, center + half_span, n_points)
    return fit_lorentzian(ple_spectrum(model, grid), 1)


def es_linewidth(model, line="A2"):
    """Natural FWHM (MHz) of an optical line from the excited-state decay rates."""
    isc = model.gamma_2 if line == "A2" else model.gamma_1
    return (model.gamma_r + isc) / TWO_PI


def ple_linewidth(model: FineStructureModel, omega_grid, n_points=121, span=6.0) -> Trace:
    """FWHM of the A2 line versus optical drive.

    For each drive the A2 peak is scanned over +-span times the expected
    (natural or power-broadened) width and fitted with a single Lorentzian.
    Failed fits give NaN and are listed in ``meta['failed']``.
    """
    om = np.asarray(omega_grid, float)
    if np.any(om <= 0) or np.any(np.diff(om) <= 0):
        raise ValueError("omega_grid must be positive and ascending")
    centre = model.line_detuning("A2")
    g0 = es_linewidth(model, "A2")
    fw = np.full(om.shape, np.nan)
    failed = []
    prev = g0
    for i, o in enumerate(om):
        m = model.with_(omega_l=float(o))
        width_guess = max(prev, g0, 2 * np.sqrt(2) * o)
        try:
            r = _fit_peak(m, centre, span * width_guess, n_points)
            if r.flags.get("degenerate"):
                raise RuntimeError("flat scan")
            fw[i] = r["fwhm1"]
            prev = fw[i]
        except Exception as e:  # per-point marker, scan continues
            failed.append((float(o), str(e)))
    return Trace(om, fw, x_label="optical Rabi frequency", y_label="FWHM", x_unit="MHz",
                 y_unit="MHz", meta={"failed": failed})


def weak_drive_linewidth(model: FineStructureModel, omega_grid) -> float:
    """Zero-drive FWHM from a linear fit of FWHM^2 against Omega^2."""
    tr = ple_linewidth(model, omega_grid)
    ok = np.isfinite(tr.y)
    if ok.sum() < 2:
        raise SolverError("too few successful linewidth fits for extrapolation")
    slope, icpt = np.polyfit(tr.x[ok] ** 2, tr.y[ok] ** 2, 1)
    if icpt <= 0:
        raise SolverError("extrapolated squared width is not positive")
    return float(np.sqrt(icpt))


# -- MW schemes ----------------------------------------------------------------------

@dataclass(frozen=True)
class MwScheme:
    """Continuous broadband MW: pairs within center +- bandwidth/2 are mixed at ``rate``."""

    center: float
    bandwidth: float = C.MW_BANDWIDTH
    rate: float = C.MW_MIX_RATE

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be > 0")
        if self.rate < 0:
            raise ValueError("rate must be >= 0")

    def mixing_rates(self, transitions):
        """Per-pair rates (MW1, MW2, MW3) for the given transition frequencies."""
        return tuple(self.rate if abs(f - self.center) <= self.bandwidth / 2 else 0.0
                     for f in transitions)


def gs_transitions(model: FineStructureModel):
    from .spincore import mw_transition_frequencies
    sys = SpinSystem(model.d_gs, model.d_es, model.g_gs, model.g_es, model.b0,
                     model.bohr_magneton_over_h)
    return mw_transition_frequencies(sys).frequencies


def line_amplitude(model: FineStructureModel, line, n_points=61, span=3.0):
    """Fitted peak amplitude of one optical line (steady-state PLE)."""
    centre = model.line_detuning(line)
    w = max(es_linewidth(model, line), 2 * np.sqrt(2) * model.omega_l)
    r = _fit_peak(model, centre, span * w, n_points)
    return r["amplitude1"] + r["offset"]


def a2_a1_ratio(model: FineStructureModel, scheme: MwScheme) -> float:
    """Ratio of fitted A2 and A1 PLE peak heights under a broadband MW scheme.

    The six-level scheme cannot tell the three MW pairs apart, so it only
    accepts schemes that drive all of them (or none).
    """
    rates = scheme.mixing_rates(gs_transitions(model))
    if model.variant != "ten_level" and len(set(rates)) > 1:
        raise ValueError("a selective MW scheme needs the ten_level variant to resolve the pairs")
    m = model.with_(mw_mixing=rates)
    return line_amplitude(m, "A2") / line_amplitude(m, "A1")


# -- optical pumping -------------------------------------------------------------------

class PumpingResult(NamedTuple):
    t: np.ndarray
    populations: np.ndarray  # (len(t), dim)
    labels: tuple
    states: list

    def gs(self, m):
        """Population trace of ground sublevel m (e.g. -0.5)."""
        return self.populations[:, TEN_M.index(m)]


def pumping_trajectory(model: FineStructureModel, mw3_rate, t_grid, omega_l=None,
                       step_fraction=DEFAULT_STEP_FRACTION) -> PumpingResult:
    """A2 pumping with continuous MW3 mixing from a depolarised ground state."""
    if model.variant != "ten_level":
        raise ValueError("pumping_trajectory needs the ten_level variant")
    m = model.with_(delta_l=model.line_detuning("A2"),
                    omega_l=C.OMEGA_L_PUMP if omega_l is None else omega_l,
                    mw_mixing=(0.0, 0.0, float(mw3_rate)))
    states = evolve(m, gs_mixture(m), t_grid, step_fraction=step_fraction)
    pops = np.array([s.populations for s in states])
    return PumpingResult(np.asarray(t_grid, float), pops, m.labels, states)
