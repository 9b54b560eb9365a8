import json

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from lindspec import operators as ops
from lindspec import analysis, spectra, symmetry
from lindspec.errors import IncompleteKernelError, PairingError, SymmetryError
from lindspec.liouville import build_liouvillian
from lindspec.models import kerr_model, two_photon_model, two_photon_thermo
from lindspec.spectra import EigenPair

from conftest import random_model


@pytest.fixture(scope="module")
def two_photon():
    return build_liouvillian(two_photon_model(-2.0, 0.8, 2.5, 1.0, 0.4, 10))


def multiset_distance(a, b):
    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    r, c = linear_sum_assignment(cost)
    return cost[r, c].max()


def test_parity_labels():
    s = symmetry.number_parity_symmetry(2, 2)
    # |0><1| sits at vec index 1
    assert s.labels[1] == 1 and s.z(1) == pytest.approx(-1)
    s3 = symmetry.number_parity_symmetry(5, 3)
    for m in range(5):
        for l in range(5):
            e = np.zeros((5, 5))
            e[m, l] = 1
            j = s3.labels[m * 5 + l]
            assert j == (m - l) % 3
            assert np.allclose(s3.apply(e), np.exp(2j * np.pi * (m - l) / 3) * e, atol=1e-15)


def test_parity_flips_sigma_x():
    s = symmetry.number_parity_symmetry(2, 2)
    assert np.allclose(s.apply(ops.sigma_x()), -ops.sigma_x())
    assert s.sector_of(ops.sigma_x()) == 1
    assert s.sector_of(np.eye(2)) == 0


def test_invalid_order():
    with pytest.raises(ValueError):
        symmetry.number_parity_symmetry(4, 1)


def test_check_symmetry(two_photon):
    par = symmetry.number_parity_symmetry(10, 2)
    assert symmetry.check_symmetry(two_photon, par)
    assert symmetry.check_symmetry(two_photon, par, probes=5)
    kerr = build_liouvillian(kerr_model(1.0, 0.5, 0.7, 1.0, 10))
    assert not symmetry.check_symmetry(kerr, par)
    free = build_liouvillian(kerr_model(1.0, 0.5, 0.7, 1.0, 10), explicit=False)
    assert not symmetry.check_symmetry(free, par)


def test_identity_symmetry_commutes(rng):
    sm = build_liouvillian(random_model(rng, 5))
    assert symmetry.check_symmetry(sm, symmetry.identity_symmetry(5))


def test_refuses_broken_symmetry():
    kerr = build_liouvillian(kerr_model(1.0, 0.5, 0.7, 1.0, 6))
    with pytest.raises(SymmetryError):
        symmetry.sector_decompose(kerr, symmetry.number_parity_symmetry(6, 2))


def test_block_sizes_and_partition(two_photon):
    dec = symmetry.sector_decompose(two_photon, symmetry.number_parity_symmetry(10, 2))
    assert dec.sizes == {0: 50, 1: 50}
    idx = np.concatenate([s.indices for s in dec.sectors])
    assert np.array_equal(np.sort(idx), np.arange(100))


def test_block_spectra_equal_full(two_photon):
    dec = symmetry.sector_decompose(two_photon, symmetry.number_parity_symmetry(10, 2))
    full = spectra.full_spectrum(two_photon, left=False).values
    merged = dec.full_spectrum(left=False).values
    assert len(merged) == len(full)
    assert multiset_distance(full, merged) <= 1e-8


def test_steady_state_from_even_block(two_photon):
    dec = symmetry.sector_decompose(two_photon, symmetry.number_parity_symmetry(10, 2))
    full = spectra.steady_state(two_photon)
    assert np.abs(dec.steady_state() - full).max() <= 1e-10
    par = symmetry.number_parity_symmetry(10, 2)
    assert np.allclose(par.apply(full), full, atol=1e-12)


def test_slowest_broken_mode_is_odd():
    m = two_photon_thermo(-10.0, 10.0, 25.0, 1.0, 1.0, 6, cutoff=48)
    sm = build_liouvillian(m)
    par = symmetry.number_parity_symmetry(m.dim, 2)
    spec = symmetry.sector_decompose(sm, par).leading_spectrum(k=3)
    assert spec.pairs[0].sector == 0
    assert spec.pairs[1].sector == 1
    r1 = spec.pairs[1].right
    assert ops.hs_norm(par.apply(r1) + r1) <= 1e-8
    assert abs(ops.hs_inner(spec.pairs[0].right, r1)) <= 1e-10


def test_parallel_sector_solves_match(two_photon):
    dec = symmetry.sector_decompose(two_photon, symmetry.number_parity_symmetry(10, 2))
    serial = dec.leading_spectra(k=4, workers=1)
    threaded = dec.leading_spectra(k=4, workers=2)
    for j in serial:
        assert np.allclose(serial[j].values, threaded[j].values, atol=1e-12)


def test_generic_unitary_matches_parity(two_photon):
    d = 10
    v = np.diag(np.exp(1j * np.pi * np.arange(d)))
    # a scrambled basis to force the numeric path
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    s = symmetry.symmetry_from_unitary(v, 2)
    assert sorted(np.bincount(s.labels)) == [50, 50]
    m = two_photon_model(-2.0, 0.8, 2.5, 1.0, 0.4, d)
    from lindspec.models import ModelSpec
    rot = ModelSpec(q @ ops.dense(m.hamiltonian) @ q.conj().T,
                    tuple((q @ ops.dense(g) @ q.conj().T, r) for g, r in m.jumps), d)
    sm = build_liouvillian(rot)
    sv = symmetry.symmetry_from_unitary(q @ v @ q.conj().T, 2)
    assert symmetry.check_symmetry(sm, sv)
    dec = symmetry.sector_decompose(sm, sv)
    assert sorted(dec.sizes.values()) == [50, 50]
    full = spectra.full_spectrum(two_photon, left=False).values
    assert multiset_distance(full, dec.full_spectrum(left=False).values) <= 1e-8


def test_generic_unitary_rejects_bad_order():
    with pytest.raises(SymmetryError):
        symmetry.symmetry_from_unitary(np.diag([1, 1j]), 2)
    with pytest.raises(SymmetryError):
        symmetry.symmetry_from_unitary(np.array([[1, 1], [0, 1]]), 2)


def qubit_modes():
    return [EigenPair(0.0, np.eye(2) / np.sqrt(2), sector=0),
            EigenPair(-1e-9, ops.sigma_x() / np.sqrt(2), sector=1)]


def test_broken_basis_qubit():
    par = symmetry.number_parity_symmetry(2, 2)
    plus = np.full((2, 2), 0.5)
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]])
    states = symmetry.symmetry_broken_basis(qubit_modes(), par)
    assert np.allclose(states[0], plus, atol=1e-10)
    assert np.allclose(states[1], minus, atol=1e-10)
    assert np.allclose(par.apply(states[0]), states[1])
    assert np.allclose(par.apply(states[0], power=2), states[0], atol=1e-12)


def test_broken_basis_round_trip():
    par = symmetry.number_parity_symmetry(2, 2)
    prepared = symmetry.prepare_sector_modes(qubit_modes(), par)
    states = symmetry.symmetry_broken_basis(qubit_modes(), par, scale=0.3)
    back = symmetry.invert_broken_basis(states, par)
    assert np.allclose(back[0], prepared[0], atol=1e-10)
    assert np.allclose(back[1], 0.3 * prepared[1], atol=1e-10)


def test_broken_basis_z3_cycle():
    d, n = 6, 3
    par = symmetry.number_parity_symmetry(d, n)
    rng = np.random.default_rng(3)
    r1 = np.zeros((d, d), dtype=complex)
    for m in range(d):
        for l in range(d):
            if (m - l) % n == 1:
                r1[m, l] = rng.standard_normal() + 1j * rng.standard_normal()
    modes = [EigenPair(0.0, np.eye(d) / d, sector=0), EigenPair(0.0, r1, sector=1),
             EigenPair(0.0, r1.conj().T * 1j, sector=2)]
    states = symmetry.symmetry_broken_basis(modes, par)
    for l, s in enumerate(states):
        assert np.trace(s).real == pytest.approx(1.0)
        assert np.allclose(s, s.conj().T)
        assert np.linalg.eigvalsh(s).min() >= -1e-9
        assert np.allclose(par.apply(s), states[(l + 1) % n], atol=1e-12)
        assert np.allclose(par.apply(s, power=n), s, atol=1e-12)
    assert np.linalg.eigvalsh(states[0]).min() == pytest.approx(0, abs=1e-8)


def test_broken_basis_errors():
    par = symmetry.number_parity_symmetry(2, 2)
    with pytest.raises(IncompleteKernelError):
        symmetry.symmetry_broken_basis(qubit_modes()[:1], par)
    slow = [qubit_modes()[0], EigenPair(-0.5, ops.sigma_x() / np.sqrt(2), sector=1)]
    with pytest.raises(IncompleteKernelError):
        symmetry.symmetry_broken_basis(slow, par)
    wrong = [qubit_modes()[0], EigenPair(0.0, ops.sigma_z() / np.sqrt(2), sector=1)]
    with pytest.raises(SymmetryError):
        symmetry.symmetry_broken_basis(wrong, par)
    par3 = symmetry.number_parity_symmetry(3, 3)
    a = np.zeros((3, 3), dtype=complex)
    a[1, 0] = 1
    b = np.zeros((3, 3), dtype=complex)
    b[1, 2] = 1
    bad = [EigenPair(0.0, np.eye(3) / 3, sector=0), EigenPair(0.0, a, sector=1),
           EigenPair(0.0, b, sector=2)]
    with pytest.raises(PairingError):
        symmetry.symmetry_broken_basis(bad, par3)


def test_summary_json(two_photon):
    dec = symmetry.sector_decompose(two_photon, symmetry.number_parity_symmetry(10, 2))
    d = json.loads(dec.summary_json(k=3))
    assert d["order"] == 2
    assert [s["size"] for s in d["sectors"]] == [50, 50]
    assert len(d["sectors"][1]["leading"]) == 3


def test_broken_basis_two_photon_deep_broken_phase():
    m = two_photon_thermo(-10.0, 10.0, 30.0, 1.0, 1.0, 10, cutoff=80)
    sm = build_liouvillian(m)
    par = symmetry.number_parity_symmetry(m.dim, 2)
    dec = symmetry.sector_decompose(sm, par)
    parts = dec.leading_spectra(k=2)
    modes = [parts[0].pairs[0], parts[1].pairs[0]]
    states = symmetry.symmetry_broken_basis(modes, par)
    rho = dec.steady_state(spectrum=parts[0])
    for s in states:
        assert abs(np.trace(s) - 1) <= 1e-10
        assert np.linalg.eigvalsh(s)[0] >= -1e-9
    assert np.allclose(par.apply(states[0]), states[1], atol=1e-10)
    mix = 0.5 * (states[0] + states[1])
    assert 1 - analysis.fidelity(rho, mix) < 1e-2
    # the broken states coincide with the split of the odd mode
    split = spectra.hermitian_split(parts[1].pairs[0])
    best = max(analysis.fidelity(states[0], split.plus), analysis.fidelity(states[0], split.minus))
    assert best > 0.99
