import numpy as np
import pytest

from sbx.core import (ConfigError, DegenerateDataError, GHZ, ValidationError,
                      from_lab_units)
from sbx.fit import SpectrumData, fit_spectrum, model_t_sq, scan_match

DEVICES = {
    "I": (0.007, 4.04, 0.03, 3.6, 4.4),
    "II": (0.21, 7.23, 1.1, 2.0, 12.0),
}


def synthetic(name, noise=0.0, seed=0):
    a, d, n, lo, hi = DEVICES[name]
    p = from_lab_units(delta_ghz=d, alpha=a, omega_c_ghz=65, t_mk=90, n_factor=n)
    x = np.linspace(lo, hi, 201) * GHZ
    clean = model_t_sq(SpectrumData(x, np.ones_like(x), p.theta, p.omega_c), a, p.delta, n)
    y = clean * (1 + noise * np.random.default_rng(seed).standard_normal(x.size))
    return SpectrumData(x, y, p.theta, p.omega_c), (a, p.delta, n)


def rel_err(res, truth):
    return np.array([res.alpha, res.delta, res.n_factor]) / np.array(truth) - 1


def test_device_one_noisy_recovery():
    errs = []
    for seed in range(5):
        data, truth = synthetic("I", 0.01, seed)
        res = fit_spectrum(data, (truth[0] * 1.5, truth[1] * 1.01, truth[2] * 1.3), seed=seed)
        errs.append(rel_err(res, truth))
    med = np.median(np.abs(errs), axis=0)
    assert med[0] < 0.2 and med[1] < 0.01 and med[2] < 0.1


def test_device_two_noise_free():
    data, truth = synthetic("II")
    res = fit_spectrum(data, (truth[0] * 1.5, truth[1] * 1.01, truth[2] * 1.3))
    assert np.all(np.abs(rel_err(res, truth)) < 1e-4)
    assert res.residual < 1e-6
    assert 0 < res.alpha < 0.5


def test_profile_certificate():
    data, truth = synthetic("II")
    res = fit_spectrum(data, truth)
    x = np.array([res.alpha, res.delta, res.n_factor])
    base = np.sum((model_t_sq(data, *x) - data.t_sq) ** 2)
    for i in range(3):
        for f in (0.95, 1.05):
            y = x.copy()
            y[i] *= f
            assert np.sum((model_t_sq(data, *y) - data.t_sq) ** 2) > base


def test_order_invariant_objective():
    data, truth = synthetic("I", 0.01, 3)
    perm = np.random.default_rng(1).permutation(data.x.size)
    r = model_t_sq(data, *truth) - data.t_sq
    # model evaluated pointwise, so shuffling the pairs leaves the sum unchanged
    assert np.sum(r[perm] ** 2) == pytest.approx(np.sum(r ** 2), rel=1e-14)


def test_seed_reproducible():
    data, truth = synthetic("I", 0.01, 7)
    init = (truth[0] * 1.5, truth[1] * 1.01, truth[2] * 1.3)
    a = fit_spectrum(data, init, seed=11)
    b = fit_spectrum(data, init, seed=11)
    assert (a.alpha, a.delta, a.n_factor, a.residual) == (b.alpha, b.delta, b.n_factor, b.residual)
    assert np.array_equal(a.covariance, b.covariance)


def test_flat_data_degenerate():
    data, truth = synthetic("I")
    flat = SpectrumData(data.x, np.ones_like(data.x), data.theta, data.omega_c)
    with pytest.raises(DegenerateDataError):
        fit_spectrum(flat, truth)


@pytest.mark.parametrize("x,y", [
    (np.linspace(1, 2, 5), np.ones(5)),
    (np.linspace(2, 1, 10), np.ones(10)),
    (np.linspace(1, 2, 10), np.r_[np.ones(9), np.nan]),
])
def test_spectrum_validation(x, y):
    with pytest.raises(ValidationError):
        SpectrumData(x, y, 0.5, 10.0)


@pytest.fixture(scope="module")
def device_three_cuts():
    p = from_lab_units(delta_ghz=8, alpha=0.8, omega_c_ghz=65, t_mk=90, n_factor=8)
    wp = np.linspace(2, 10, 24) * GHZ
    e0 = np.linspace(-15, 15, 24) * GHZ
    c1 = SpectrumData(wp, np.ones_like(wp), p.theta, p.omega_c)
    c2 = SpectrumData(e0, np.ones_like(e0), p.theta, p.omega_c, axis="eps0", omega_p=5 * GHZ)
    y1 = model_t_sq(c1, 0.8, p.delta, 8, path="exact")
    y2 = model_t_sq(c2, 0.8, p.delta, 8, path="exact")
    return [SpectrumData(wp, y1, p.theta, p.omega_c),
            SpectrumData(e0, y2, p.theta, p.omega_c, axis="eps0", omega_p=5 * GHZ)]


def test_scan_device_three(device_three_cuts):
    rows = scan_match(device_three_cuts, np.array([6, 8, 10]) * GHZ, [5, 8, 10], threads=4)
    assert len(rows) == 9
    top = rows[0]
    assert top.delta == pytest.approx(8 * GHZ) and top.n_factor == 8
    assert top.alpha == pytest.approx(0.8, abs=1e-3)
    # larger N pairs with larger best-fit alpha
    at8 = sorted((r for r in rows if r.delta == pytest.approx(8 * GHZ)), key=lambda r: r.n_factor)
    assert at8[0].alpha < at8[1].alpha < at8[2].alpha


def test_scan_single_candidate(device_three_cuts):
    rows = scan_match(device_three_cuts[:1], [8 * GHZ], [8])
    assert len(rows) == 1 and rows[0].alpha == pytest.approx(0.8, abs=1e-3)


def test_scan_empty():
    with pytest.raises(ConfigError):
        scan_match([], [1.0], [1.0])


def test_from_csv(tmp_path):
    f = tmp_path / "s.csv"
    rows = "\n".join(f"{3.5 + 0.1 * i},{1 - 0.01 * i},1" for i in range(10))
    f.write_text("omega_p_ghz,t_sq,weight\n" + rows + "\n\n")
    d = SpectrumData.from_csv(f, theta=0.5, omega_c=10.0)
    assert d.axis == "omega_p" and d.x.size == 10
    assert d.x[0] == pytest.approx(3.5 * GHZ)
    assert np.all(d.weights == 1)
    g = tmp_path / "e.csv"
    g.write_text("eps0_ghz,t_sq\n" + "\n".join(f"{i},{0.9}" for i in range(-4, 6)))
    e = SpectrumData.from_csv(g, theta=0.5, omega_c=10.0, omega_p=5 * GHZ)
    assert e.axis == "eps0" and e.weights is None


@pytest.mark.parametrize("text,where", [
    ("freq,t_sq\n1,1\n", ":1:"),
    ("omega_p_ghz,t_sq\n1,1\n2,abc\n", ":3:"),
    ("omega_p_ghz,t_sq\n1,1,3\n", ":2:"),
])
def test_from_csv_errors(tmp_path, text, where):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(ConfigError, match=where):
        SpectrumData.from_csv(f, theta=0.5, omega_c=10.0)
