"""Ground-state spin simulator for pulse sequences.

The spin state is a 4x4 density matrix over (+3/2, +1/2, -1/2, -3/2), or
8x8 with a spin-1/2 nucleus attached (electron (x) nucleus). Everything runs
in the frame rotating with each MW pair, so pulses are resonant and free
evolution only carries the configured detunings, a quasi-static field offset
(for T2*) and the secular hyperfine coupling.

Optical steps go through the fine-structure rate model: each laser pulse is
turned into a transfer matrix on ground-state populations (laser on for the
pulse, then a dark interval long enough for the shelving states to empty).
Ground-state coherences do not survive a laser pulse and the nucleus is
carried through unchanged (reduced state). Gauss-Hermite averaging over the
quasi-static offset produces the Gaussian T2* decay; the echo decay
exp(-(T/T2)^n) is applied to electron coherences as a function of the total
free-evolution time T of the shot.
"""

import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from .. import constants as C
from .. import lindblad as lb
from ..eseem import EseemParams, envelope, larmor_frequency
from ..spincore import SpinSystem, spin_matrices
from ..trace import Trace
from .dsl import Angle, Laser, MwPulse, PulseSequence, Readout, Wait, parse_sequence, resolve, format_sequence

M_VALUES = np.array(lb.TEN_M)
PAIRS = lb.MW_PAIRS
SETTLE_US = 3.0  # ~30 shelving lifetimes


@dataclass(frozen=True)
class NuclearCoupling:
    """Secular hyperfine coupling to one spin-1/2 nucleus; all in kHz."""

    a_par: float
    a_perp: float
    omega_i: float

    def __post_init__(self):
        if self.omega_i < 0:
            raise ValueError("omega_i must be >= 0")

    @classmethod
    def at_field(cls, a_par, a_perp, b0=C.PRESETS["main_text"]["b0"]):
        return cls(a_par, a_perp, larmor_frequency(b0))

    @property
    def params(self) -> EseemParams:
        return EseemParams(self.a_par, self.a_perp, self.omega_i)


@dataclass(frozen=True)
class SimConfig:
    """Control and decoherence settings for sequence simulation.

    ``detuning`` maps MW channels to the drive detuning in MHz (FID fringes).
    ``initial`` is None for the depolarised state, a label such as "-1/2",
    or four populations in the (+3/2, +1/2, -1/2, -3/2) order.
    ``readout`` is "ideal" (signal = population of the manifold the line
    addresses) or "emission" (photons emitted during the readout window,
    from the rate model).
    """

    mw_drive: float = C.MW_DRIVE_MHZ
    t2_star: Optional[float] = None
    t2: Optional[float] = None
    t2_exponent: float = C.T2_EXPONENT
    detuning: tuple = (("MW1", 0.0), ("MW2", 0.0), ("MW3", 0.0))
    pump_drive: float = C.OMEGA_L_PUMP
    mw_pump_rate: float = C.MW3_PUMP_RATE
    offres_rate: float = C.OFFRES_DEPOL_RATE
    readout: str = "ideal"
    initial: object = None
    gh_nodes: int = 40
    a2_detuning: Optional[float] = None

    def __post_init__(self):
        det = dict(self.detuning)
        bad = set(det) - set(PAIRS)
        if bad:
            raise ValueError(f"unknown detuning channel(s) {sorted(bad)}")
        object.__setattr__(self, "detuning",
                           tuple((ch, float(det.get(ch, 0.0))) for ch in ("MW1", "MW2", "MW3")))
        if self.readout not in ("ideal", "emission"):
            raise ValueError("readout must be 'ideal' or 'emission'")
        for name in ("t2_star", "t2"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be > 0")
        if self.mw_drive <= 0:
            raise ValueError("mw_drive must be > 0")

    def with_(self, **kw):
        d = asdict(self)
        d.update(kw)
        return SimConfig(**d)


# -- MW pulses ----------------------------------------------------------------------------

def _ladder(channel):
    a, b = PAIRS[channel]
    return abs(spin_matrices().sx[a, b])


def pair_operator(channel, phase_deg):
    """cos(phi) Sx + sin(phi) Sy restricted to the addressed pair, divided by the ladder element."""
    s = spin_matrices()
    a, b = PAIRS[channel]
    mask = np.zeros((4, 4))
    mask[a, b] = mask[b, a] = 1
    phi = np.radians(phase_deg)
    g = (np.cos(phi) * s.sx + np.sin(phi) * s.sy) * mask
    return g / _ladder(channel)


def mw_unitary(channel, half_angle, phase_deg=0.0):
    """exp(-i half_angle G): G squares to the projector on the pair, so this is closed form."""
    g = pair_operator(channel, phase_deg)
    proj = np.abs(g) ** 2 @ np.ones(4) > 0
    pi = np.diag(proj.astype(float))
    return (np.eye(4) - pi) + np.cos(half_angle) * pi - 1j * np.sin(half_angle) * g


def pulse_half_angle(pulse: MwPulse, mw_drive):
    """Half rotation angle; a duration t drives exp(-i 2 pi Omega t (Sx cos + Sy sin))."""
    if isinstance(pulse.rotation, Angle):
        return pulse.rotation.radians / 2
    return 2 * np.pi * mw_drive * _ladder(pulse.channel) * pulse.rotation.us


def rabi_frequency(channel, mw_drive=C.MW_DRIVE_MHZ):
    """Population oscillation frequency (MHz) of a pair at drive mw_drive."""
    return 2 * mw_drive * _ladder(channel)


# -- optical maps ------------------------------------------------------------------------

def _ten_level(model: lb.FineStructureModel):
    if model.variant == "ten_level":
        return model
    return model.with_(variant="ten_level")


def line_position(model, channel, override=None):
    """Laser detuning for a named line: A2 is the higher-energy one, A1 the lower."""
    if channel == "A2" and override is not None:
        return float(override)
    half = abs(model.d_es - model.d_gs)
    return half if channel == "A2" else -half


def addressed_manifold(model, channel, cfg: SimConfig):
    """Ground indices (TEN_M order) whose optical line the readout laser hits."""
    det = line_position(model, channel, cfg.a2_detuning)
    res32 = model.d_es - model.d_gs      # resonance of the |m| = 3/2 pair
    res12 = -(model.d_es - model.d_gs)
    return [0, 3] if abs(det - res32) <= abs(det - res12) else [1, 2]


def _laser_model(model, channel, with_mw, optics):
    pump_drive, mw_pump_rate, offres_rate, a2_detuning = optics
    m = _ten_level(model)
    rates = [0.0, 0.0, 0.0]
    for ch in with_mw:
        rates[("MW1", "MW2", "MW3").index(ch)] = mw_pump_rate
    if channel == "OFFRES":
        return m.with_(omega_l=0.0, offres_rate=offres_rate, mw_mixing=tuple(rates))
    return m.with_(omega_l=pump_drive, delta_l=line_position(m, channel, a2_detuning),
                   mw_mixing=tuple(rates), offres_rate=0.0)


def _optics(cfg: SimConfig):
    return (cfg.pump_drive, cfg.mw_pump_rate, cfg.offres_rate, cfg.a2_detuning)


@lru_cache(maxsize=256)
def _laser_transfer(model, channel, duration_us, with_mw, optics):
    """(T, w): gs population transfer matrix and emitted photons per unit gs population.

    Six-level models are promoted to the ten-level scheme with the same rates,
    since the ground sublevels must be resolved here.
    """
    lm = _laser_model(model, channel, with_mw, optics)
    lv = lb.build_liouvillian(lm)
    n = lm.dim
    es = lm.es_indices()
    dim = n * n
    # augment with an accumulator for the integrated excited-state population
    aug = np.zeros((dim + 1, dim + 1), dtype=complex)
    aug[:dim, :dim] = lv
    for e in es:
        aug[dim, e * n + e] = 1.0
    p_on = lb.propagator(aug, duration_us) if duration_us > 0 else np.eye(dim + 1)
    dark = lm.with_(omega_l=0.0, mw_mixing=(0.0, 0.0, 0.0), offres_rate=0.0, gamma_R=0.0)
    p_dark = lb.propagator(lb.build_liouvillian(dark), SETTLE_US)
    gs = lm.gs_indices()
    T = np.zeros((4, 4))
    w = np.zeros(4)
    for j, g in enumerate(gs):
        x = np.zeros(dim + 1, dtype=complex)
        x[g * n + g] = 1.0
        x = p_on @ x
        w[j] = lm.gamma_r * x[dim].real
        rho = lb.hermitize((p_dark @ x[:dim]).reshape(n, n))
        lb.audit(lb.DensityMatrix(rho, lm.labels), "laser map")
        T[:, j] = np.real(np.diag(rho))[gs]
    return T, w


# -- the shot -----------------------------------------------------------------------------

class Shot(NamedTuple):
    states: List[np.ndarray]   # one density matrix per quasi-static offset node
    weights: np.ndarray
    readouts: List[float]


def _level_energies(cfg: SimConfig):
    det = dict(cfg.detuning)
    # rotating-frame energies (MHz) reproducing the per-pair detunings
    e = np.zeros(4)
    e[2] = det["MW1"]
    e[1] = e[2] + det["MW2"]
    e[0] = e[1] + det["MW3"]
    return e


def _offset_nodes(cfg: SimConfig):
    if cfg.t2_star is None:
        return np.zeros(1), np.ones(1)
    x, w = np.polynomial.hermite.hermgauss(cfg.gh_nodes)
    sigma = 1.0 / (np.sqrt(2) * np.pi * cfg.t2_star)
    return np.sqrt(2) * sigma * x, w / np.sqrt(np.pi)


def _initial_state(cfg: SimConfig, nuclear: bool):
    if cfg.initial is None:
        p = np.full(4, 0.25)
    elif isinstance(cfg.initial, str):
        lab = cfg.initial.replace("gs", "")
        table = {"+3/2": 0, "3/2": 0, "+1/2": 1, "1/2": 1, "-1/2": 2, "-3/2": 3}
        if lab not in table:
            raise ValueError(f"unknown initial state {cfg.initial!r}")
        p = np.zeros(4)
        p[table[lab]] = 1.0
    else:
        p = np.asarray(cfg.initial, float)
        if p.shape != (4,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("initial populations must be 4 non-negative numbers summing to 1")
    rho = np.diag(p).astype(complex)
    return np.kron(rho, np.eye(2) / 2) if nuclear else rho


def _hyperfine_blocks(coupling: NuclearCoupling):
    """Per electron level: eigenvalues (MHz) and eigenvectors of the nuclear Hamiltonian."""
    iz = np.diag([0.5, -0.5])
    ix = np.array([[0, 0.5], [0.5, 0]])
    out = []
    for m in M_VALUES:
        h = 1e-3 * ((coupling.omega_i + m * coupling.a_par) * iz + m * coupling.a_perp * ix)
        out.append(np.linalg.eigh(h))
    return out


class SequenceSimulator:
    """Runs resolved element lists; caches laser maps on the (hashable) model and config."""

    def __init__(self, model: lb.FineStructureModel, coupling: Optional[NuclearCoupling] = None,
                 config: Optional[SimConfig] = None):
        self.model = model
        self.coupling = coupling
        self.cfg = config or SimConfig()
        self.nuclear = coupling is not None
        self.energies = _level_energies(self.cfg)
        self.offsets, self.weights = _offset_nodes(self.cfg)
        self._hf = _hyperfine_blocks(coupling) if self.nuclear else None
        self._pulse_cache: Dict = {}

    # single operations -------------------------------------------------------------
    def _free_unitary(self, t_us, offset):
        phase = np.exp(-2j * np.pi * (self.energies + offset * M_VALUES) * t_us)
        if not self.nuclear:
            return np.diag(phase)
        u = np.zeros((8, 8), dtype=complex)
        for k, (lam, vec) in enumerate(self._hf):
            u[2 * k:2 * k + 2, 2 * k:2 * k + 2] = phase[k] * (vec * np.exp(-2j * np.pi * lam * t_us)) @ vec.conj().T
        return u

    def _coherence_mask(self):
        e = np.repeat(np.arange(4), 2) if self.nuclear else np.arange(4)
        return e[:, None] != e[None, :]

    def _pulse(self, el: MwPulse):
        key = (el.channel, pulse_half_angle(el, self.cfg.mw_drive), el.phase_deg)
        if key not in self._pulse_cache:
            u = mw_unitary(el.channel, key[1], key[2])
            self._pulse_cache[key] = np.kron(u, np.eye(2)) if self.nuclear else u
        return self._pulse_cache[key]

    def _electron_pops(self, rho):
        d = np.real(np.diag(rho))
        return d.reshape(4, 2).sum(axis=1) if self.nuclear else d

    def _apply_laser(self, rho, T):
        p = T @ self._electron_pops(rho)
        p = np.clip(p, 0.0, None)
        p /= p.sum()
        if not self.nuclear:
            return np.diag(p).astype(complex)
        rho_n = np.einsum("ajak->jk", rho.reshape(4, 2, 4, 2))
        return np.kron(np.diag(p), rho_n)

    def run(self, elements) -> Shot:
        states = [_initial_state(self.cfg, self.nuclear) for _ in self.offsets]
        readouts = []
        t_free = 0.0
        touched = False
        mask = self._coherence_mask()
        for el in elements:
            if isinstance(el, MwPulse):
                u = self._pulse(el)
                states = [u @ r @ u.conj().T for r in states]
                touched = True
            elif isinstance(el, Wait):
                t = el.duration.us
                if t == 0:
                    continue
                us = [self._free_unitary(t, off) for off in self.offsets]
                states = [u @ r @ u.conj().T for u, r in zip(us, states)]
                if self.cfg.t2 is not None:
                    n, t2 = self.cfg.t2_exponent, self.cfg.t2
                    f = np.exp(-((t_free + t) / t2) ** n + (t_free / t2) ** n)
                    for r in states:
                        r[mask] *= f
                t_free += t
            elif isinstance(el, Laser):
                T, _ = _laser_transfer(self.model, el.channel, el.duration.us, el.with_mw, _optics(self.cfg))
                states = [self._apply_laser(r, T) for r in states]
                t_free = 0.0
                touched = True
            elif isinstance(el, Readout):
                if not touched:
                    warnings.warn("readout before any laser or MW element", RuntimeWarning, stacklevel=3)
                T, w = _laser_transfer(self.model, el.channel, el.duration.us, (), _optics(self.cfg))
                if self.cfg.readout == "ideal":
                    idx = addressed_manifold(self.model, el.channel, self.cfg)
                    sig = sum(wt * self._electron_pops(r)[idx].sum() for wt, r in zip(self.weights, states))
                else:
                    sig = sum(wt * (w @ self._electron_pops(r)) for wt, r in zip(self.weights, states))
                readouts.append(float(sig))
                states = [self._apply_laser(r, T) for r in states]
                t_free = 0.0
            else:
                raise TypeError(f"unknown element {el!r}")
            for r in states:
                r[:] = (r + r.conj().T) / 2
            _audit_state(sum(w * r for w, r in zip(self.weights, states)), "sequence element")
        return Shot(states, self.weights, readouts)

    def mean_state(self, shot: Shot):
        return sum(w * r for w, r in zip(shot.weights, shot.states))


def _audit_state(rho, where):
    if lb._AUDIT is None:
        return
    n = rho.shape[0]
    labels = tuple(f"s{i}" for i in range(n))
    lb.audit(lb.DensityMatrix(rho, labels), where)


def _default_model(sys, model):
    if model is not None:
        return model
    sys = sys or SpinSystem.preset("main_text")
    return lb.FineStructureModel.from_spin_system(sys, "ten_level")


def simulate_sequence(seq, sys: Optional[SpinSystem] = None, model: Optional[lb.FineStructureModel] = None,
                      coupling: Optional[NuclearCoupling] = None, config: Optional[SimConfig] = None) -> Trace:
    """Readout signal versus the swept symbol (us).

    ``seq`` is a :class:`PulseSequence` or sequence text. The trace value is
    the last readout of each shot; all readouts are kept in
    ``meta['readouts']``. With no sweep the trace has a single point at 0.
    """
    if isinstance(seq, str):
        seq = parse_sequence(seq)
    if not any(isinstance(el, Readout) for el in seq.elements):
        raise ValueError("sequence has no readout")
    model = _default_model(sys, model)
    sim = SequenceSimulator(model, coupling, config)
    xs = seq.sweep.values_us() if seq.sweep is not None else np.zeros(1)
    ys = np.empty(xs.size)
    allr = []
    for i, x in enumerate(xs):
        shot = sim.run(resolve(seq, x))
        ys[i] = shot.readouts[-1]
        allr.append(shot.readouts)
    return Trace(xs, ys, x_label=seq.sweep.symbol if seq.sweep else "t", y_label="readout",
                 x_unit="us", y_unit="population" if sim.cfg.readout == "ideal" else "photons",
                 meta={"sequence": format_sequence(seq), "readouts": allr})


# -- named experiments ----------------------------------------------------------------------

def eseem_quantum_oracle(coupling: NuclearCoupling, tau):
    """Two-pulse echo amplitude from brute-force propagation on electron (x) nucleus.

    Ideal pi/2(x) - tau - pi(x) - tau on the (-1/2, -3/2) pair, starting in
    -1/2 with the nucleus maximally mixed, under the secular Hamiltonian
    omega_I Iz + Sz (A_par Iz + A_perp Ix) (kHz, tau in us). Returns the
    in-plane pair coherence along the refocusing axis, which is 1 at tau = 0.
    """
    tau = np.atleast_1d(np.asarray(tau, float))
    cfg = SimConfig(initial="-1/2")
    sim = SequenceSimulator(lb.FineStructureModel(variant="ten_level"), coupling, cfg)
    half = np.kron(mw_unitary("MW1", np.pi / 4, 0.0), np.eye(2))
    full = np.kron(mw_unitary("MW1", np.pi / 2, 0.0), np.eye(2))
    a, b = PAIRS["MW1"]
    sy = np.zeros((4, 4), dtype=complex)
    sy[a, b], sy[b, a] = -1j, 1j
    obs = np.kron(sy, np.eye(2))
    rho0 = _initial_state(cfg, True)
    out = np.empty(tau.size)
    for i, t in enumerate(tau):
        u = sim._free_unitary(t, 0.0)
        seq = u @ full @ u @ half
        r = seq @ rho0 @ seq.conj().T
        out[i] = np.real(np.trace(obs @ r))
    return out if out.size > 1 else float(out[0])


def hahn_echo_trace(tau_grid, sys: Optional[SpinSystem] = None, coupling: Optional[NuclearCoupling] = None,
                    t2=C.T2_US, n=C.T2_EXPONENT, backend="analytic") -> Trace:
    """Echo amplitude times exp[-(2 tau / T2)^n]; modulation from the analytic form or the oracle."""
    tau = np.asarray(tau_grid, float)
    if np.any(np.diff(tau) < 0):
        raise ValueError("tau_grid must be ascending")
    decay = np.exp(-(2 * tau / t2) ** n)
    if coupling is None:
        mod = np.ones_like(tau)
    elif backend == "analytic":
        mod = envelope(coupling.params, tau)
    elif backend == "oracle":
        mod = np.atleast_1d(eseem_quantum_oracle(coupling, tau))
    else:
        raise ValueError("backend must be 'analytic' or 'oracle'")
    meta = {"t2": t2, "n": n, "backend": backend}
    if coupling is not None:
        meta.update(a_par=coupling.a_par, a_perp=coupling.a_perp, omega_i=coupling.omega_i)
    return Trace(tau, mod * decay, x_label="tau", y_label="echo", x_unit="us", meta=meta)
