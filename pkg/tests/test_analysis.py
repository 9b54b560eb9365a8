import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lindspec import analysis, spectra
from lindspec import operators as ops
from lindspec.errors import FitError, InvalidStateError, NotFoundError, ParameterError
from lindspec.liouville import build_liouvillian
from lindspec.models import kerr_model, two_level_model

from conftest import random_density, random_hermitian


def test_expectation_examples(rng):
    assert analysis.expectation(ops.basis_projector(4, 1), ops.number(4)) == pytest.approx(1.0)
    vac = spectra.steady_state(build_liouvillian(kerr_model(1, 1, 0, 1, 5)))
    assert analysis.expectation(vac, ops.number(5)) == pytest.approx(0, abs=1e-12)
    rho, o = random_density(rng, 5), random_hermitian(rng, 5)
    direct = sum(rho[i, j] * o[j, i] for i in range(5) for j in range(5))
    assert analysis.expectation(rho, o) == pytest.approx(direct.real)
    with pytest.raises(ParameterError):
        analysis.expectation(rho, ops.dense(ops.destroy(5)))


def test_fidelity_examples(rng):
    p0, p1 = ops.basis_projector(2, 0), ops.basis_projector(2, 1)
    assert analysis.fidelity(p0, p1) == 0
    assert analysis.fidelity(p0, np.eye(2) / 2) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    rho = random_density(rng, 6)
    assert analysis.fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)


@given(st.integers(2, 6), st.integers(0, 2**31), st.integers(1, 6))
@settings(max_examples=50)
def test_fidelity_bounds_and_symmetry(d, seed, rank):
    rng = np.random.default_rng(seed)
    a = random_density(rng, d, min(rank, d))
    b = random_density(rng, d)
    f = analysis.fidelity(a, b)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(analysis.fidelity(b, a), abs=1e-7)


def test_fidelity_validation():
    with pytest.raises(InvalidStateError):
        analysis.fidelity(np.diag([1.2, -0.2]), np.eye(2) / 2)
    with pytest.raises(InvalidStateError):
        analysis.fidelity(np.eye(2), np.eye(2) / 2)
    with pytest.raises(InvalidStateError):
        analysis.fidelity(np.array([[0.5, 1], [0, 0.5]]), np.eye(2) / 2)


def test_trace_distance():
    assert analysis.trace_distance(ops.basis_projector(2, 0), ops.basis_projector(2, 1)) == 1


@pytest.fixture(scope="module")
def kerr_scan():
    fam = analysis.kerr_family(10.0, 10.0, 1.0)
    return analysis.scan(fam, np.linspace(1.6, 3.0, 15), 5, k=4, workers=2, keep_states=True)


def test_scan_records(kerr_scan):
    assert [r.zeta for r in kerr_scan] == sorted(r.zeta for r in kerr_scan)
    for r in kerr_scan:
        assert r.ok, r.status
        assert r.gap >= 0
        assert r.tail <= 1e-8
        for f in (r.fid_xi, r.fid_plus, r.fid_minus):
            assert np.isnan(f) or 0 <= f <= 1


def test_scan_density_crosses_branches(kerr_scan):
    dens = [r.density for r in kerr_scan]
    assert dens[0] < 0.2 and dens[-1] > 1.0
    assert np.all(np.diff(dens) > -1e-6)


def test_scan_gap_single_interior_minimum(kerr_scan):
    gaps = np.array([r.gap for r in kerr_scan])
    i = int(np.argmin(gaps))
    assert 0 < i < len(gaps) - 1
    assert np.all(np.diff(gaps[:i + 1]) < 0) and np.all(np.diff(gaps[i:]) > 0)


def test_scan_fidelity_switch(kerr_scan):
    real = [r for r in kerr_scan if not np.isnan(r.fid_plus)]
    assert real[0].fid_minus > real[0].fid_plus
    assert real[-1].fid_plus > real[-1].fid_minus


def test_scan_steady_state_matches_zero_mode():
    # away from degeneracy the normalized zero mode is the steady state
    m = kerr_model(2.0, 1.0, 1.5, 1.0, 14)
    sm = build_liouvillian(m)
    spec = spectra.leading_spectrum(sm, k=3)
    assert spec.gap > 10 * spec.zero_tol
    r0 = spec.pairs[0].right
    assert np.abs(r0 / np.trace(r0) - spectra.steady_state(sm)).max() <= 1e-9


def test_scan_errors_are_recorded():
    def broken(zeta, n, cutoff=None):
        if zeta > 1.5:
            raise ParameterError("boom")
        return two_level_model(zeta, 0.5, 1.0)

    recs = analysis.scan(broken, [1.0, 2.0], 1, k=3, workers=1)
    assert recs[0].ok and "boom" in recs[1].status
    with pytest.raises(ParameterError):
        analysis.scan(broken, [2.0, 1.0], 1)
    with pytest.raises(ParameterError):
        analysis.scan(broken, [], 1)


def test_scan_csv_columns(kerr_scan):
    text = analysis.scan_csv(kerr_scan[:2], comment="demo")
    lines = text.splitlines()
    assert lines[0] == "# demo"
    assert lines[1] == ",".join(analysis.SCAN_COLUMNS)
    assert len(lines) == 4


def two_level_family(zeta, n, cutoff=None):
    return two_level_model(zeta, 0.5, 1.0)


def test_bifurcation_two_level():
    grid = np.linspace(0.5, 1.5, 11)
    recs = analysis.scan(two_level_family, grid, 1, k=4, workers=1)

    def im(z):
        return spectra.full_spectrum(build_liouvillian(two_level_model(z, 0.5, 1.0))).lambda1.imag

    gb = analysis.bifurcation_point(recs, evaluate=im)
    assert gb == pytest.approx(1.0, rel=1e-3)
    # without refinement the grid bracket is returned
    assert analysis.bifurcation_point(recs) == pytest.approx(1.0)


def test_bifurcation_not_found():
    recs = analysis.scan(two_level_family, np.linspace(0.1, 0.5, 5), 1, k=4, workers=1)
    with pytest.raises(NotFoundError) as info:
        analysis.bifurcation_point(recs)
    assert info.value.diagnostics["points"] == 5


def test_power_law_synthetic_round_trip():
    n = np.array([5, 8, 11, 14, 17, 20])
    fit = analysis.power_law_fit(list(zip(n, 2 + 5 * n ** -0.7)))
    assert fit.critical_value == pytest.approx(2, abs=1e-6)
    assert fit.amplitude == pytest.approx(5, abs=1e-6)
    assert fit.exponent == pytest.approx(0.7, abs=1e-6)
    assert fit.residual <= 1e-10
    d = json.loads(fit.to_json())
    assert set(d) >= {"amplitude", "exponent", "critical_value", "residual", "covariance"}


def test_power_law_noisy_reports_residual(rng):
    n = np.arange(4, 30, 3).astype(float)
    g = 10 + 20 * n ** -0.9 * (1 + 1e-3 * rng.standard_normal(n.size))
    fit = analysis.power_law_fit(list(zip(n, g)))
    assert fit.exponent == pytest.approx(0.9, abs=0.05)
    assert fit.residual > 0
    assert np.all(np.diag(fit.covariance) > 0)


def test_power_law_fixed_critical_value():
    n = np.array([2.0, 4.0, 8.0, 16.0])
    fit = analysis.power_law_fit(list(zip(n, 1 + 3 * n ** -0.5)), critical_value=1.0)
    assert fit.exponent == pytest.approx(0.5) and fit.amplitude == pytest.approx(3)


def test_power_law_preconditions():
    with pytest.raises(FitError):
        analysis.power_law_fit([(5, 3.0), (8, 2.5)])
    with pytest.raises(FitError):
        analysis.power_law_fit([(5, 3.0), (4, 2.5), (8, 2.2), (9, 2.1)])


def test_track_eigenvalues():
    rows = [[0, -1 + 1j, -1 - 1j], [0, -1.1 - 0.9j, -1.1 + 0.9j], [0, -1.2 + 0.8j, -1.2 - 0.8j]]
    tr = analysis.track_eigenvalues(rows)
    assert np.all(tr[:, 1].imag > 0) and np.all(tr[:, 2].imag < 0)


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("LINDSPEC_THREADS", "3")
    assert analysis.default_workers() == 3


@pytest.mark.slow
def test_kerr_fidelity_window_narrows_with_n():
    fam = analysis.kerr_family(10.0, 10.0, 1.0)
    widths = []
    for n, center in ((5, 2.40), (10, 2.29), (15, 2.25)):
        recs = analysis.scan(fam, np.linspace(center - 0.2, center + 0.2, 81), n, k=4)
        lo, hi = analysis.fidelity_window(recs)
        widths.append(hi - lo)
    assert widths[0] > widths[1] > widths[2] > 0
