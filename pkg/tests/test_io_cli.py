import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vsic import cli, eseem as es, fitkit as fk, io as vio, lindblad as lb
from vsic.pulsesim.simulate import SETTLE_US
from vsic.trace import Trace

DATA = Path(__file__).parent / "data"


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr() if capsys is not None else None
    return code, out


def data_rows(path):
    return [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]


# -- CSV contract ----------------------------------------------------------------------------

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(finite, finite, finite), min_size=1, max_size=30), st.booleans())
def test_csv_write_read_write_fixpoint(rows, with_sigma):
    a = np.array(rows)
    tr = Trace(a[:, 0], a[:, 1], a[:, 2] if with_sigma else None)
    text = vio.format_trace(tr, {"b0": 92.0, "note": "a=b, c\nd"})
    back = vio.parse_trace(text)
    assert np.array_equal(back.x, tr.x) and np.array_equal(back.y, tr.y)
    if with_sigma:
        assert np.array_equal(back.sigma, tr.sigma)
    assert back.meta["note"] == "a=b, c\nd"
    assert vio.format_trace(back, back.meta) == text


def test_csv_without_header_and_errors():
    tr = vio.parse_trace("0,1\n1,2.5\n")
    assert list(tr.y) == [1.0, 2.5]
    with pytest.raises(vio.CsvError) as e:
        vio.parse_trace("x,y\n0,1\n1,abc\n")
    assert e.value.line == 3
    with pytest.raises(vio.CsvError) as e:
        vio.parse_trace("x,y\n0,1\n1,2,3\n")
    assert e.value.line == 3
    with pytest.raises(vio.CsvError):
        vio.parse_trace("# only=1\n")


def test_read_config_flat_and_sidecar(tmp_path):
    flat = tmp_path / "c.txt"
    flat.write_text("# comment\nb0 = 80\nvariant = ten_level\nt2 = null\n")
    assert vio.read_config(flat) == {"b0": 80, "variant": "ten_level", "t2": None}
    side = tmp_path / "s.json"
    vio.write_json({"params": {"b0": 70.0}}, side)
    assert vio.read_config(side) == {"b0": 70.0}


# -- configuration --------------------------------------------------------------------------

def test_unknown_key_is_config_error(tmp_path, capsys):
    code, out = run(["simulate", "odmr", "--set", "bogus=1", "--out", tmp_path / "o.csv"], capsys)
    assert code == 2 and "bogus" in out.err


def test_bad_preset_and_noise_without_seed(tmp_path, capsys):
    assert run(["simulate", "odmr", "--preset", "nope"], capsys)[0] == 2
    assert run(["simulate", "odmr", "--noise", "0.01"], capsys)[0] == 2


def test_unit_suffixes_accepted():
    p = cli.resolve_config("echo", sets=["b0=80G"], extra={"a_par": "12kHz"})
    assert p["b0"] == 80.0 and p["a_par"] == 12.0


def test_presets_enumerate_every_key():
    for name in ("main_text", "s7"):
        p = cli.resolve_config("odmr", preset=name)
        assert set(p) == set(cli.PARAM_TYPES)


def test_sidecar_rerun_is_bit_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["simulate", "odmr", "--set", "points=41", "--set", "b0=90", "--out", a], capsys)[0] == 0
    side = json.loads(Path(str(a) + ".json").read_text())
    assert set(side["params"]) == set(cli.PARAM_TYPES)
    assert run(["simulate", "odmr", "--config", str(a) + ".json", "--out", b], capsys)[0] == 0
    assert a.read_text() == b.read_text()


def test_seeded_noise_reproducible(tmp_path, capsys):
    outs = []
    for name in ("n1.csv", "n2.csv"):
        path = tmp_path / name
        run(["simulate", "odmr", "--set", "points=21", "--noise", "0.01", "--seed", "7", "--out", path],
            capsys)
        outs.append(path.read_text())
    assert outs[0] == outs[1]
    clean = tmp_path / "c.csv"
    run(["simulate", "odmr", "--set", "points=21", "--out", clean], capsys)
    assert vio.read_trace(clean).y.tolist() != vio.read_trace(tmp_path / "n1.csv").y.tolist()


def test_json_output_format(capsys):
    code, out = run(["simulate", "pumping", "--set", "points=5", "--format", "json"], capsys)
    assert code == 0
    obj = json.loads(out.out)
    assert len(obj["x"]) == 5 and obj["provenance"]["kind"] == "pumping"


# -- simulate ---------------------------------------------------------------------------------

def test_simulate_ple_separation(tmp_path, capsys):
    out = tmp_path / "ple.csv"
    assert run(["simulate", "ple", "--preset", "main_text", "--out", out], capsys)[0] == 0
    code, res = run(["fit", "lorentzian", out, "--peaks", "2"], capsys)
    assert code == 0
    sep = json.loads(res.out)["derived"]["separation"]
    assert abs(sep - 980.5) <= 1.0


def test_simulate_rabi_ratio(tmp_path, capsys):
    freqs = {}
    for ch in ("MW1", "MW2"):
        out = tmp_path / f"{ch}.csv"
        assert run(["simulate", "rabi", "--channel", ch, "--out", out], capsys)[0] == 0
        code, res = run(["fit", "rabi", out], capsys)
        assert code == 0
        freqs[ch] = json.loads(res.out)["parameters"]["frequency"]
    assert abs(freqs["MW2"] / freqs["MW1"] - 2 / np.sqrt(3)) <= 1e-4


def test_simulate_echo_fourier_peaks(tmp_path, capsys):
    out = tmp_path / "echo.csv"
    argv = ["simulate", "echo", "--a-par", "10kHz", "--a-perp", "29kHz", "--set", "t2=none",
            "--set", "stop=4000", "--set", "points=8001", "--out", out]
    assert run(argv, capsys)[0] == 0
    tr = vio.read_trace(out)
    spec = es.echo_spectrum(tr.with_y(tr.y - tr.y.mean()))
    want = es.modulation_frequencies(es.EseemParams(10, 29, es.larmor_frequency(92.0)))
    got = sorted(p.frequency for p in spec.peaks)
    assert len(got) == 4
    assert np.all(np.abs(np.array(got) - np.array(sorted(want))) <= spec.bin_width)


def test_simulate_pumping_rises(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert run(["simulate", "pumping", "--out", out], capsys)[0] == 0
    tr = vio.read_trace(out)
    assert tr.y[0] == pytest.approx(0.25, abs=1e-12)
    assert tr.y[-1] >= 0.9


def test_solver_error_exit_code(monkeypatch, capsys):
    def boom(*a, **k):
        raise lb.SolverError("no unique steady state")
    monkeypatch.setattr(cli.lb, "ple_spectrum", boom)
    code, out = run(["simulate", "ple"], capsys)
    assert code == 3 and "steady state" in out.err


# -- fit ----------------------------------------------------------------------------------------

def test_fit_golden_eseem(capsys):
    code, out = run(["fit", "eseem", DATA / "eseem_golden.csv", "--omega-i", "77.9"], capsys)
    assert code == 0
    par = json.loads(out.out)["parameters"]
    assert abs(par["a_par"] - 10.0) <= 1e-6
    assert abs(par["a_perp"] - 29.0) <= 1e-6


def test_fit_malformed_row_exit_4(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0,1\n1,2\n2,oops\n")
    code, out = run(["fit", "lorentzian", bad], capsys)
    assert code == 4 and "line 4" in out.err


def test_fit_missing_file_exit_4(tmp_path, capsys):
    assert run(["fit", "rabi", tmp_path / "none.csv"], capsys)[0] == 4


def test_fit_failure_exit_5(tmp_path, capsys):
    flat = tmp_path / "flat.csv"
    vio.write_trace(Trace(np.linspace(0, 10, 50), np.ones(50)), flat)
    assert run(["fit", "eseem", flat], capsys)[0] == 5


def test_fit_populations(capsys):
    p = (0.01, 0.975, 0.01, 0.005)
    v = fk.visibilities_from_populations(p)
    code, out = run(["fit", "populations", "--v", *(repr(float(x)) for x in v)], capsys)
    assert code == 0
    pops = json.loads(out.out)["populations"]
    assert [pops[k] for k in ("-3/2", "-1/2", "+1/2", "+3/2")] == pytest.approx(p, abs=1e-10)
    # a triple outside the forward model's range is reported, not silently returned
    assert run(["fit", "populations", "--v", "0.97", "0.95", "0.02"], capsys)[0] == 5


def test_fit_decay_and_g2(tmp_path, capsys):
    t = np.linspace(0, 400, 200)
    path = tmp_path / "d.csv"
    vio.write_trace(Trace(t, 0.8 * np.exp(-(t / 120.0) ** 2)), path)
    code, out = run(["fit", "decay", path, "--kind", "gaussian_fid"], capsys)
    assert code == 0 and json.loads(out.out)["parameters"]["T"] == pytest.approx(120.0, rel=1e-6)
    tau = np.linspace(-0.6, 0.6, 601)
    g2 = Trace(tau, fk.g2_model(tau, 0.24, 0.5, 5.5e-3, 103.7e-3))
    path = tmp_path / "g2.csv"
    vio.write_trace(g2, path)
    assert run(["fit", "g2", path], capsys)[0] == 0


# -- run -----------------------------------------------------------------------------------------

def test_run_hahn_echo_matches_simulate(tmp_path, capsys):
    a, b = tmp_path / "sim.csv", tmp_path / "run.csv"
    common = ["--set", "points=61", "--set", "stop=120"]
    assert run(["simulate", "echo", *common, "--out", a], capsys)[0] == 0
    assert run(["run", "hahn_echo", *common, "--set", "t2=850", "--set", "a_par=10",
                "--set", "a_perp=29", "--out", b], capsys)[0] == 0
    assert data_rows(a) == data_rows(b)


def test_run_init_fidelity_matches_pumping(tmp_path, capsys):
    out = tmp_path / "init.csv"
    assert run(["run", "init_fidelity", "--out", out], capsys)[0] == 0
    tr = vio.read_trace(out)
    m = lb.FineStructureModel(variant="ten_level")
    traj = lb.pumping_trajectory(m, 5.0, tr.x)
    settle = lb.propagator(lb.build_liouvillian(m.with_(omega_l=0.0, gamma_R=0.0)), SETTLE_US)
    y = []
    for s in traj.states:
        p = np.real(np.diag((settle @ s.data.reshape(-1)).reshape(10, 10)))
        y.append(p[0] + p[3])
    assert np.max(np.abs(np.array(y) - tr.y)) <= 1e-10


def test_run_seq_file_and_errors(tmp_path, capsys):
    empty = tmp_path / "empty.seq"
    empty.write_text("# nothing here\n\n")
    code, out = run(["run", empty], capsys)
    assert code == 4 and "empty sequence" in out.err
    bad = tmp_path / "bad.seq"
    bad.write_text("mw MW1 pi\nwait 5xs\nreadout A2 150ns\n")
    code, out = run(["run", bad], capsys)
    assert code == 4 and "line 2, column 6" in out.err
    ok = tmp_path / "ok.seq"
    ok.write_text("sweep t 0us 4us 9\nmw MW1 t\nreadout A2 150ns\n")
    code, out = run(["run", ok], capsys)
    assert code == 0
    assert len(vio.parse_trace(out.out)) == 9
