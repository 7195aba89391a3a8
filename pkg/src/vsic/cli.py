"""Command-line interface: ``vsic simulate | fit | run``.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 input or
sequence parse error, 5 fit failure. Messages go to standard error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import constants as C
from . import eseem as es
from . import fitkit as fk
from . import io as vio
from . import lindblad as lb
from . import pulsesim as ps
from .spincore import SpinSystem
from .trace import Trace

SIM_KINDS = ("ple", "odmr", "rabi", "fid", "echo", "pumping", "linewidth", "a2a1")
FIT_KINDS = ("lorentzian", "g2", "rabi", "decay", "eseem", "polarization", "populations")

EXIT_CONFIG, EXIT_SOLVER, EXIT_PARSE, EXIT_FIT = 2, 3, 4, 5


class ConfigError(ValueError):
    pass


# -- run configuration ------------------------------------------------------------------

# key -> (type, unit suffix accepted on input)
PARAM_TYPES = {
    "two_d_gs": ("float", "MHz"), "two_d_es": ("float", "MHz"), "g_gs": ("float", ""),
    "g_es": ("float", ""), "b0": ("float", "G"),
    "variant": ("str", ""), "omega_l": ("float", "MHz"), "gamma_r": ("float", ""),
    "gamma_1": ("float", ""), "gamma_2": ("float", ""), "gamma_3": ("float", ""),
    "gamma_4": ("float", ""), "gamma_R": ("float", ""), "gamma_S": ("float", ""),
    "lam": ("float", "MHz"),
    "mw_rate": ("float", ""), "mw_bandwidth": ("float", "MHz"), "odmr_linewidth": ("float", "MHz"),
    "mw_drive": ("float", "MHz"), "t2_star": ("ofloat", "us"), "t2": ("ofloat", "us"),
    "t2_exponent": ("float", ""), "pump_drive": ("float", "MHz"), "mw_pump_rate": ("float", ""),
    "offres_rate": ("float", ""), "readout": ("str", ""),
    "detuning_mw1": ("float", "MHz"), "detuning_mw2": ("float", "MHz"), "detuning_mw3": ("float", "MHz"),
    "a_par": ("ofloat", "kHz"), "a_perp": ("ofloat", "kHz"), "omega_i": ("ofloat", "kHz"),
    "start": ("ofloat", ""), "stop": ("ofloat", ""), "points": ("oint", ""),
    "channel": ("str", ""), "noise": ("float", ""), "seed": ("oint", ""),
}


def _base_params(preset):
    if preset not in C.PRESETS:
        raise ConfigError(f"unknown preset {preset!r} (choose from {sorted(C.PRESETS)})")
    p = dict(C.PRESETS[preset])
    p.update(variant="ten_level", omega_l=C.OMEGA_L_PLE, gamma_r=C.GAMMA_R, gamma_1=C.GAMMA_1,
             gamma_2=C.GAMMA_2, gamma_3=C.GAMMA_3, gamma_4=C.GAMMA_4, gamma_R=C.GAMMA_RELAX,
             gamma_S=C.GAMMA_S, lam=C.LAMBDA_DS, mw_rate=C.MW_MIX_RATE, mw_bandwidth=C.MW_BANDWIDTH,
             odmr_linewidth=1.0, mw_drive=C.MW_DRIVE_MHZ, t2_star=None, t2=None,
             t2_exponent=C.T2_EXPONENT, pump_drive=C.OMEGA_L_PUMP, mw_pump_rate=C.MW3_PUMP_RATE,
             offres_rate=C.OFFRES_DEPOL_RATE, readout="ideal", detuning_mw1=0.0, detuning_mw2=0.0,
             detuning_mw3=0.0, a_par=None, a_perp=None, omega_i=None, start=None, stop=None,
             points=None, channel="MW1", noise=0.0, seed=None)
    return p


KIND_DEFAULTS = {
    "ple": dict(variant="six_level", start=-800.0, stop=800.0, points=1601),
    "odmr": dict(start=245.0, stop=270.0, points=251),
    "rabi": {},
    "fid": dict(t2_star=C.T2_STAR_US, detuning_mw1=0.2),
    "echo": dict(t2=C.T2_US, a_par=10.0, a_perp=29.0),
    "pumping": dict(start=0.0, stop=80.0, points=81),
    "linewidth": dict(variant="six_level", start=0.05, stop=0.2, points=4),
    "a2a1": dict(start=252.0, stop=272.0, points=21),
    "run": {},
}


def parse_value(key, value):
    if key not in PARAM_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    typ, unit = PARAM_TYPES[key]
    if value is None or (isinstance(value, str) and value.strip().lower() in ("none", "null")):
        if typ.startswith("o"):
            return None
        raise ConfigError(f"{key} may not be empty")
    if typ == "str":
        return str(value)
    text = str(value).strip()
    if unit and text.endswith(unit):
        text = text[: -len(unit)].strip()
    try:
        if typ.endswith("int"):
            v = float(text)
            if v != int(v):
                raise ValueError
            return int(v)
        return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def resolve_config(kind, preset="main_text", config_path=None, sets=(), extra=None):
    """Preset defaults < subcommand defaults < config file < --set < dedicated flags."""
    params = _base_params(preset)
    params.update(KIND_DEFAULTS.get(kind, {}))
    layers = []
    if config_path:
        try:
            layers.append(vio.read_config(config_path))
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read config {config_path}: {e}") from None
    kv = {}
    for s in sets:
        if "=" not in s:
            raise ConfigError(f"--set expects key=value, got {s!r}")
        k, v = s.split("=", 1)
        kv[k.strip()] = v.strip()
    layers.append(kv)
    layers.append({k: v for k, v in (extra or {}).items() if v is not None})
    for layer in layers:
        for k, v in layer.items():
            params[k] = parse_value(k, v)
    if params["variant"] not in ("six_level", "ten_level"):
        raise ConfigError(f"unknown variant {params['variant']!r}")
    if params["noise"] and params["seed"] is None:
        raise ConfigError("noise injection needs an explicit --seed")
    return params


def spin_system(p):
    return SpinSystem.from_splittings(p["two_d_gs"], p["two_d_es"], p["g_gs"], p["g_es"], p["b0"])


def fine_model(p, variant=None):
    sys_ = spin_system(p)
    return lb.FineStructureModel.from_spin_system(
        sys_, variant or p["variant"], omega_l=p["omega_l"], gamma_r=p["gamma_r"],
        gamma_1=p["gamma_1"], gamma_2=p["gamma_2"], gamma_3=p["gamma_3"], gamma_4=p["gamma_4"],
        gamma_R=p["gamma_R"], gamma_S=p["gamma_S"], lam=p["lam"])


def sim_config(p):
    return ps.SimConfig(mw_drive=p["mw_drive"], t2_star=p["t2_star"], t2=p["t2"],
                        t2_exponent=p["t2_exponent"], pump_drive=p["pump_drive"],
                        mw_pump_rate=p["mw_pump_rate"], offres_rate=p["offres_rate"],
                        readout=p["readout"],
                        detuning=(("MW1", p["detuning_mw1"]), ("MW2", p["detuning_mw2"]),
                                  ("MW3", p["detuning_mw3"])))


def coupling(p):
    if p["a_par"] is None and p["a_perp"] is None:
        return None
    wi = p["omega_i"] if p["omega_i"] is not None else es.larmor_frequency(p["b0"])
    return ps.NuclearCoupling(p["a_par"] or 0.0, p["a_perp"] or 0.0, wi)


def _grid(p):
    if None in (p["start"], p["stop"], p["points"]):
        raise ConfigError("start, stop and points are required")
    if p["points"] < 1:
        raise ConfigError("points must be >= 1")
    return np.linspace(p["start"], p["stop"], p["points"])


# -- simulations ------------------------------------------------------------------------------

def _with_sweep(seq, p):
    if seq.sweep is None or all(p[k] is None for k in ("start", "stop", "points")):
        return seq
    s = seq.sweep
    start = ps.Duration(repr(float(p["start"])), "us") if p["start"] is not None else s.start
    stop = ps.Duration(repr(float(p["stop"])), "us") if p["stop"] is not None else s.stop
    pts = p["points"] if p["points"] is not None else s.points
    return ps.PulseSequence(seq.elements, ps.SweepDecl(s.symbol, start, stop, pts))


def run_sequence(text, p):
    seq = _with_sweep(ps.parse_sequence(text), p)
    return ps.simulate_sequence(seq, model=fine_model(p, "ten_level"), coupling=coupling(p),
                                config=sim_config(p))


def simulate(kind, p) -> Trace:
    if kind == "ple":
        rates = (p["mw_rate"],) * 3
        return lb.ple_spectrum(fine_model(p).with_(mw_mixing=rates), _grid(p))
    if kind == "odmr":
        return ps.odmr(_grid(p), model=fine_model(p, "ten_level"), linewidth=p["odmr_linewidth"],
                       rate=p["mw_rate"])
    if kind == "rabi":
        if p["channel"] not in ("MW1", "MW2", "MW3"):
            raise ConfigError(f"unknown channel {p['channel']!r}")
        name = {"MW1": "rabi", "MW2": "rabi_mw2"}.get(p["channel"])
        text = ps.bundled_sequence(name) if name else ps.bundled_sequence("rabi").replace("MW1", "MW3")
        return run_sequence(text, p)
    if kind == "fid":
        return run_sequence(ps.bundled_sequence("fid"), p)
    if kind == "echo":
        return run_sequence(ps.bundled_sequence("hahn_echo"), p)
    if kind == "pumping":
        t = _grid(p)
        r = lb.pumping_trajectory(fine_model(p, "ten_level"), p["mw_pump_rate"], t, omega_l=p["pump_drive"])
        return Trace(t, r.gs(-0.5), x_label="tau_init", y_label="p(-1/2)", x_unit="us", y_unit="population")
    if kind == "linewidth":
        return lb.ple_linewidth(fine_model(p), _grid(p))
    if kind == "a2a1":
        m = fine_model(p)
        f = _grid(p)
        y = np.array([lb.a2_a1_ratio(m, lb.MwScheme(fi, p["mw_bandwidth"], p["mw_rate"])) for fi in f])
        return Trace(f, y, x_label="MW centre", y_label="A2/A1", x_unit="MHz")
    raise ConfigError(f"unknown simulation {kind!r}")


def _add_noise(tr: Trace, p):
    if not p["noise"]:
        return tr
    rng = np.random.default_rng(p["seed"])
    return tr.with_y(tr.y + rng.normal(0.0, p["noise"], tr.y.size))


def _emit(tr: Trace, p, command, kind, out, fmt, extra_meta=None):
    prov = {"command": command, "kind": kind, "version": __version__}
    prov.update({f"param.{k}": v for k, v in p.items()})
    if extra_meta:
        prov.update(extra_meta)
    if fmt == "json":
        payload = {"x": tr.x.tolist(), "y": tr.y.tolist(), "provenance": prov}
        if tr.sigma is not None:
            payload["sigma"] = tr.sigma.tolist()
        text = json.dumps(payload, sort_keys=True) + "\n"
    else:
        text = vio.format_trace(Trace(tr.x, tr.y, tr.sigma), prov)
    if out:
        Path(out).write_text(text)
        vio.write_json({"command": command, "kind": kind, "version": __version__, "params": p},
                       str(out) + ".json")
    else:
        sys.stdout.write(text)


# -- fits -----------------------------------------------------------------------------------------

def fit(kind, args):
    if kind == "populations":
        if args.v is None or len(args.v) != 3:
            raise ConfigError("fit populations needs --v V1 V2 V3")
        pops, cond = fk.populations_from_visibilities(tuple(args.v))
        return {"populations": dict(zip(("-3/2", "-1/2", "+1/2", "+3/2"), map(float, pops))),
                "condition": float(cond)}
    if args.input is None:
        raise ConfigError(f"fit {kind} needs an input CSV")
    tr = vio.read_trace(args.input)
    if kind == "lorentzian":
        return fk.fit_lorentzian(tr, args.peaks).as_dict()
    if kind == "g2":
        return fk.fit_g2(tr).as_dict()
    if kind == "rabi":
        return fk.fit_rabi(tr).as_dict()
    if kind == "decay":
        return fk.fit_decay(tr, args.kind_decay, offset=args.offset).as_dict()
    if kind == "polarization":
        return fk.fit_polarization(tr.x, tr.y).as_dict()
    if kind == "eseem":
        if args.remove_decay:
            tr, _ = es.remove_decay(tr, args.remove_decay)
        r = es.fit_envelope(tr, omega_i=args.omega_i, b0=args.b0,
                            free_scale=args.free_scale or bool(args.remove_decay))
        cov = None if r.covariance is None else np.asarray(r.covariance).tolist()
        return {"parameters": {"a_par": r.a_par, "a_perp": r.a_perp, "k": r.k, "scale": r.scale},
                "units": {"a_par": "kHz", "a_perp": "kHz", "k": "", "scale": ""},
                "omega_i": r.omega_i, "rss": r.residual, "covariance": cov}
    raise ConfigError(f"unknown fit {kind!r}")


# -- entry point -------------------------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(prog="vsic", description="V1 centre spin/optics simulation and fitting")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--preset", default="main_text")
        p.add_argument("--config", help="flat key = value file or a JSON sidecar")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--out", help="CSV path (a .json sidecar is written next to it)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int)
        p.add_argument("--noise", type=float, help="additive Gaussian noise (needs --seed)")

    s = sub.add_parser("simulate", help="run a named simulation")
    s.add_argument("kind", choices=SIM_KINDS)
    common(s)
    s.add_argument("--channel")
    s.add_argument("--a-par", dest="a_par")
    s.add_argument("--a-perp", dest="a_perp")

    r = sub.add_parser("run", help="simulate a pulse-sequence file")
    r.add_argument("sequence", help="path, or the name of a bundled sequence (e.g. hahn_echo)")
    common(r)

    f = sub.add_parser("fit", help="fit a CSV trace")
    f.add_argument("fit_kind", choices=FIT_KINDS, metavar="kind")
    f.add_argument("input", nargs="?")
    f.add_argument("--peaks", type=int, default=1)
    f.add_argument("--kind", dest="kind_decay", default="exponential",
                   choices=("exponential", "gaussian_fid", "stretched_echo"))
    f.add_argument("--offset", action="store_true")
    f.add_argument("--omega-i", dest="omega_i", type=float)
    f.add_argument("--b0", type=float, default=C.PRESETS["main_text"]["b0"])
    f.add_argument("--remove-decay", choices=("divide", "subtract"),
                   help="normalise by a fitted stretched decay first (implies --free-scale)")
    f.add_argument("--free-scale", action="store_true", help="fit an overall ESEEM amplitude")
    f.add_argument("--v", nargs="+", type=float)
    return ap


def _read_sequence(arg):
    path = Path(arg)
    if path.exists():
        return path.read_text()
    try:
        return ps.bundled_sequence(arg)
    except (FileNotFoundError, OSError):
        raise FileNotFoundError(f"no such sequence file or bundled sequence: {arg}") from None


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "fit":
            res = fit(args.fit_kind, args)
            sys.stdout.write(json.dumps(res, indent=2, sort_keys=True) + "\n")
            return 0
        extra = {"noise": args.noise, "seed": args.seed}
        if args.command == "simulate":
            extra.update(channel=args.channel, a_par=args.a_par, a_perp=args.a_perp)
            p = resolve_config(args.kind, args.preset, args.config, args.set, extra)
            tr = _add_noise(simulate(args.kind, p), p)
            _emit(tr, p, "simulate", args.kind, args.out, args.format)
        else:
            text = _read_sequence(args.sequence)
            p = resolve_config("run", args.preset, args.config, args.set, extra)
            tr = _add_noise(run_sequence(text, p), p)
            _emit(tr, p, "run", Path(args.sequence).stem, args.out, args.format,
                  {"sequence": tr.meta.get("sequence")})
        return 0
    except ConfigError as e:
        print(f"vsic: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ps.ParseError, vio.CsvError, FileNotFoundError, IsADirectoryError) as e:
        print(f"vsic: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (fk.FitError, fk.PopulationError, es.EseemFitError) as e:
        print(f"vsic: fit failed: {e}", file=sys.stderr)
        return EXIT_FIT
    except (lb.SolverError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"vsic: solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as e:
        code = EXIT_FIT if args.command == "fit" else EXIT_CONFIG
        print(f"vsic: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
