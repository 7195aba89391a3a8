import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vsic import fitkit as fk
from vsic._lsq import numeric_jacobian
from vsic.trace import Trace


def rel(a, b):
    return abs(a - b) / abs(b)


def test_single_lorentzian_exact():
    x = np.linspace(-400, 400, 401)
    y = 0.05 + fk.lorentzian(x, 12.3, 87.6, 1.7)
    r = fk.fit_lorentzian(Trace(x, y), 1)
    assert rel(r["fwhm1"], 87.6) <= 1e-8
    assert rel(r["center1"], 12.3) <= 1e-8
    assert rel(r["amplitude1"], 1.7) <= 1e-8
    assert r.converged and not r.flags["degenerate"]


def test_two_lorentzians_separation():
    x = np.linspace(-600, 1600, 1101)
    y = fk.lorentzian(x, 0.0, 60.0, 1.0) + fk.lorentzian(x, 980.0, 60.0, 0.8)
    r = fk.fit_lorentzian(Trace(x, y), 2)
    assert r["separation"] == pytest.approx(980.0, abs=0.1)
    assert r["amplitude1"] == pytest.approx(1.0, rel=1e-6)


def test_flat_lorentzian_degenerate():
    x = np.linspace(0, 1, 50)
    r = fk.fit_lorentzian(Trace(x, np.full(50, 3.0)), 1)
    assert r.flags["degenerate"]
    assert r["amplitude1"] == 0.0


def test_lorentzian_jacobian_matches_fd():
    model, jac = fk._lor_model(2)
    x = np.linspace(-50, 50, 31)
    p = np.array([0.1, -3.0, 12.0, 2.0, 7.0, 20.0, 1.0])
    fd = numeric_jacobian(lambda q: model(x, q), p)
    assert np.allclose(jac(x, p), fd, atol=1e-4, rtol=1e-4)


def test_g2_jacobian_matches_fd():
    x = np.linspace(-300, 300, 61)
    p = np.array([1.3, 0.9, 5.5, 103.7])
    fd = numeric_jacobian(lambda q: fk.g2_model(x, *q), p)
    assert np.allclose(fk._g2_jac(x, p), fd, atol=1e-4, rtol=1e-4)


def test_g2_recovery():
    n = 1 / (1 - 0.24)
    tau = np.linspace(-400, 400, 801)
    y = fk.g2_model(tau, n, 0.9, 5.5, 103.7)
    r = fk.fit_g2(Trace(tau, y, x_unit="ns"))
    for name, want in (("N", n), ("beta", 0.9), ("tau1", 5.5), ("tau2", 103.7)):
        assert rel(r[name], want) <= 1e-6, name
    assert r["g2_zero"] == pytest.approx(0.24, rel=1e-6)
    assert r["single_emitter"]


def test_g2_pure_antibunching():
    assert fk.g2_model(0.0, 1.0, 1.0, 5.0, 50.0) == 0.0
    assert fk.single_emitter(0.24)
    assert not fk.single_emitter(0.6)


def test_rabi_frequency():
    t = np.linspace(0, 20, 801)  # us
    y = 0.5 + 0.3 * np.cos(2 * np.pi * 0.2575 * t + 0.4)
    r = fk.fit_rabi(Trace(t, y))
    assert rel(r["frequency"], 0.2575) <= 1e-6
    assert r["visibility"] == pytest.approx(0.6, rel=1e-6)
    assert r["phase"] == pytest.approx(0.4, abs=1e-6)
    assert 293.8 / 257.5 == pytest.approx(1.141, abs=1e-3)
    assert abs(293.8 / 257.5 - 2 / np.sqrt(3)) < 0.02


def test_rabi_flat_raises():
    t = np.linspace(0, 20, 101)
    with pytest.raises(fk.FitError):
        fk.fit_rabi(Trace(t, np.ones_like(t)))


def test_decay_stretched():
    t = np.linspace(0, 2000, 201)
    y = 0.9 * np.exp(-(t / 850.0) ** 3)
    r = fk.fit_decay(Trace(t, y), "stretched_echo")
    assert rel(r["T"], 850.0) <= 1e-6
    assert rel(r["n"], 3.0) <= 1e-6


def test_decay_gaussian():
    t = np.linspace(0, 100, 201)
    y = np.exp(-(t / 30.0) ** 2)
    r = fk.fit_decay(Trace(t, y), "gaussian_fid")
    assert rel(r["T"], 30.0) <= 1e-6


def test_decay_exponential_vs_loglinear():
    t = np.linspace(0, 50, 101)
    y = 2.0 * np.exp(-t / 12.5)
    r = fk.fit_decay(Trace(t, y), "exponential")
    slope, _ = np.polyfit(t, np.log(y), 1)
    assert abs(r["T"] - (-1 / slope)) <= 1e-9 * 12.5


def test_decay_with_offset_and_rising():
    t = np.linspace(0, 80, 161)
    y = 0.95 - 0.7 * np.exp(-t / 9.0)
    r = fk.fit_decay(Trace(t, y), "exponential", offset=True)
    assert rel(r["T"], 9.0) <= 1e-6
    with pytest.raises(fk.FitError):
        fk.fit_decay(Trace(t, y), "exponential")


def test_fid_fit():
    t = np.linspace(0, 90, 901)
    y = 0.5 + 0.4 * np.exp(-(t / 30.0) ** 2) * np.cos(2 * np.pi * 0.2 * t)
    r = fk.fit_fid(Trace(t, y))
    assert rel(r["T"], 30.0) <= 1e-6
    assert rel(r["detuning"], 0.2) <= 1e-6


def test_polarization():
    phi = np.arange(0, 181, 5.0)
    y = fk.polarization_model(phi, 1.0, 23.4, 0.0)
    r = fk.fit_polarization(phi, y)
    assert r["contrast"] == pytest.approx(1.0, abs=1e-9)
    assert r["phi0"] == pytest.approx(23.4, abs=0.1)
    y2 = fk.polarization_model(phi, 0.6, 23.4, 0.1)
    r2 = fk.fit_polarization(phi, y2)
    assert abs(r2["phi0"] - r["phi0"]) < 1e-6
    assert rel(r2["amplitude"], 0.6) <= 1e-6
    with pytest.raises(fk.FitError):
        fk.fit_polarization([0, 90, 180], [1, 1, 1])


def test_fits_deterministic():
    t = np.linspace(0, 20, 301)
    y = 0.5 + 0.3 * np.cos(2 * np.pi * 0.3 * t) + 0.01 * np.sin(7 * t)
    a = fk.fit_rabi(Trace(t, y))
    b = fk.fit_rabi(Trace(t, y))
    assert np.array_equal(a.values, b.values)


HIGH_FIDELITY_P = (0.01, 0.975, 0.01, 0.005)


def test_population_round_trip_high_fidelity():
    v = fk.visibilities_from_populations(HIGH_FIDELITY_P)
    p, cond = fk.populations_from_visibilities(v)
    assert np.max(np.abs(p - HIGH_FIDELITY_P)) <= 1e-12
    assert cond < 1e10


def test_uniform_populations():
    v = fk.visibilities_from_populations([0.25] * 4)
    assert np.allclose(v, 0)
    p, _ = fk.populations_from_visibilities(v)
    assert np.allclose(p, 0.25, atol=1e-14)


def test_extreme_polarisation():
    v = fk.visibilities_from_populations([0, 1, 0, 0])
    assert v.v_12_m12 == 1.0


def constrained_p(rng):
    # p_-1/2 > p_+1/2 >= max(p_-3/2, p_+3/2)
    while True:
        raw = rng.dirichlet(np.ones(4))
        pm32, p32, p12, pm12 = np.sort(raw[:2]).tolist() + np.sort(raw[2:]).tolist()
        if p12 >= max(pm32, p32):
            p = np.array([pm32, pm12, p12, p32])
            if rng.random() < 0.5:
                p[[0, 3]] = p[[3, 0]]
            return p


def test_population_round_trip_random():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        p = constrained_p(rng)
        q, _ = fk.populations_from_visibilities(fk.visibilities_from_populations(p))
        assert np.max(np.abs(q - p)) <= 1e-10


def test_population_ordering_violation():
    v = fk.visibilities_from_populations([0.1, 0.2, 0.3, 0.4])
    with pytest.raises(fk.PopulationError) as e:
        fk.populations_from_visibilities(v)
    assert np.allclose(e.value.solution, [0.1, 0.2, 0.3, 0.4])


def test_population_conditioning_sweep():
    conds = []
    for eps in (1e-2, 1e-4, 1e-6):
        try:
            _, c = fk.populations_from_visibilities((1 - eps, 1 - eps, 1 - eps), check_order=False)
            conds.append(c)
        except fk.PopulationError as e:
            conds.append(e.condition)
    assert conds[0] < conds[1] < conds[2]
    with pytest.raises(fk.PopulationError):
        fk.populations_from_visibilities((1.0, 1.0, 1.0), check_order=False)


@settings(max_examples=100)
@given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda l: sum(l) > 1e-3))
def test_visibilities_in_range(raw):
    p = np.array(raw) / sum(raw)
    try:
        v = fk.visibilities_from_populations(p)
    except ValueError:
        return
    assert all(-1 - 1e-12 <= x <= 1 + 1e-12 for x in v if np.isfinite(x))


def test_zero_denominator():
    v = fk.visibilities_from_populations([0, 1, 0, 0])
    assert np.isnan(v.v_32_12)
    with pytest.raises(ValueError):
        fk.visibilities_from_populations([0, 1, 0, 0], strict=True)
