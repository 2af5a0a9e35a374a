import numpy as np
import pytest

from arrayg2 import (
    AtomArray,
    LinearAmplitudeZeroError,
    NearDefectiveError,
    PhotonMode,
    ScatteringSetup,
    ValidationError,
    WaveguideParams,
    amplitudes_s,
    build_heff_free_space,
    build_heff_waveguide,
    build_two_excitation,
    c_constants,
    chiral_chain,
    coupling_free_space,
    coupling_waveguide,
    eigendecompose,
    g2_trace,
    green_single,
    kernel_q,
    kernel_q_two_exc,
    sigma_eigen,
    single_atom,
    square_array,
    t_matrix_single,
)
from arrayg2.scattering import c_constants_explicit
from arrayg2.spectral import green_direct
from oracles import weak_drive_g2

Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])


def test_mode_validation():
    with pytest.raises(ValidationError):
        PhotonMode(Z, Z)
    with pytest.raises(ValidationError):
        PhotonMode(Z, 2 * X)
    with pytest.raises(ValidationError):
        PhotonMode("sideways")
    with pytest.raises(ValidationError):
        ScatteringSetup(PhotonMode(Z, X), PhotonMode(Z, X))
    with pytest.raises(ValidationError):
        ScatteringSetup(PhotonMode("forward"), PhotonMode("forward"))
    with pytest.raises(ValidationError):
        ScatteringSetup(PhotonMode("forward"), PhotonMode(-Z, X))


def test_free_space_coupling_examples():
    arr = AtomArray([[0, 0, 0], [0.3, 0, 0], [0, 0.2, 0]], [[0, 1.0, 0]] * 3)
    np.testing.assert_array_equal(coupling_free_space(arr, PhotonMode(Z, X)), 0)
    arr2 = AtomArray([[0, 0, 0], [0.3, 0, 0], [0, 0.2, 0]], [[1.0, 0, 0], [0.6, 0.8, 0], [0, 1.0, 0]])
    g = coupling_free_space(arr2, PhotonMode(Z, X))
    np.testing.assert_allclose(g, -1j * np.array([1.0, 0.6, 0.0]))
    sq = square_array()
    np.testing.assert_allclose(sq.g_in, sq.g_in[0])


def test_waveguide_coupling_examples():
    p = WaveguideParams(0.5, 0.5, 0.0, [0.0, 0.5])
    np.testing.assert_allclose(coupling_waveguide(p, "forward"), np.sqrt(0.5) * np.array([1, -1]), atol=1e-15)
    p0 = WaveguideParams(1.0, 0.0, 0.1, [0.0, 0.3])
    np.testing.assert_array_equal(coupling_waveguide(p0, "backward"), 0)
    ch = chiral_chain()
    np.testing.assert_allclose(np.abs(ch.g_out), np.sqrt(0.01 / 1.01))


def test_amplitudes():
    s = eigendecompose(np.array([[-0.5j]]))
    assert amplitudes_s(s, np.array([2.0]), 0.3, "absorption")[0] == pytest.approx(2 / (0.3 + 0.5j))
    sq = square_array()
    g = np.array([1, 2j, -1, 0.5])
    np.testing.assert_allclose(
        amplitudes_s(sq.spectrum, g, 1.1, "emission"),
        amplitudes_s(sq.spectrum, g.conj(), 1.1, "absorption"), atol=1e-12,
    )
    # a perfectly cascaded chain is a Jordan block: no eigenbasis, dense route only
    wg = WaveguideParams(1.0, 0.0, 0.1, 0.22 * np.arange(4))
    h = build_heff_waveguide(wg)
    with pytest.raises(NearDefectiveError):
        eigendecompose(h)
    gb = np.exp(-1j * 2 * np.pi * wg.z_positions)
    inv = np.linalg.inv(0.2 * np.eye(4) - h.matrix)
    np.testing.assert_allclose(amplitudes_s(h, gb, 0.2, "emission"), gb.conj() @ inv, atol=1e-12)
    # the last atom has nothing downstream, so it only reaches the detector directly
    s_plus = amplitudes_s(h, gb, 0.2, "emission")
    assert s_plus[-1] == pytest.approx(gb[-1].conj() / (0.2 + 0.55j))
    with pytest.raises(ValidationError):
        amplitudes_s(h, gb, 0.2, "sideways")


def test_t_matrix():
    g = np.array([0.7 - 0.2j])
    green = np.array([[1 / (0.5j)]])
    assert t_matrix_single(g, g, green) == pytest.approx(abs(g[0]) ** 2 / 0.5j)
    assert t_matrix_single(g, np.zeros(1), green) == 0


def test_square_t_matrix_dominated_by_subradiant_pole():
    sq = square_array()
    s = sq.spectrum
    w = 3.9
    ebar = sq.g_out.conj()
    terms = np.array([ebar @ s.residues[k] @ sq.g_in / (w - s.eigenvalues[k]) for k in range(4)])
    total = t_matrix_single(sq.g_out, sq.g_in, green_single(s, w))
    assert terms.sum() == pytest.approx(total)
    sub = np.argmin(np.abs(s.eigenvalues.real - w) + np.where(np.abs(terms) > 1e-12, 0, 1e9))
    assert abs(s.eigenvalues[sub].real - w) < 0.01 and s.decay_rates[sub] / 2 < 0.07
    assert abs(terms[sub]) > 0.8 * abs(total)


@pytest.mark.parametrize("w", [0.0, 0.5, -0.5, 2.0, -2.0])
def test_single_atom_closed_form(w):
    sc = single_atom(w)
    c = sc.c_constants()
    assert c[0] == pytest.approx(1.0, abs=1e-13)
    tau = np.arange(0, 20.0001, 0.01)
    tr = sc.trace(tau)
    ref = np.abs(1 - np.exp(1j * w * tau - tau / 2)) ** 2
    assert np.max(np.abs(tr.g2 - ref)) < 1e-10
    assert tr.g2_zero < 1e-20


def test_single_atom_chain_limit():
    sc = chiral_chain(n_atoms=1, xi=0.3, gamma_r=0.2, detuning=0.4)
    tau = np.linspace(0, 10, 101)
    ref = np.abs(1 - np.exp(1j * 0.4 * tau - 1.2 * tau / 2)) ** 2
    np.testing.assert_allclose(sc.trace(tau).g2, ref, atol=1e-12)


def test_explicit_constants_match_fast_path(scenario_corpus, rng):
    for _, h, gin, gout in scenario_corpus[::3]:
        s = eigendecompose(h)
        te = build_two_excitation(h)
        w = float(rng.uniform(-2, 2))
        fast = c_constants(s, gin, gout, w)
        via_inv = c_constants_explicit(s, gin, gout, w, lambda big: kernel_q(sigma_eigen(s, big)))
        via_pairs = c_constants_explicit(s, gin, gout, w, lambda big: kernel_q_two_exc(te, big))
        np.testing.assert_allclose(via_inv, fast, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(via_pairs, fast, rtol=1e-8, atol=1e-11)


def test_prefactor_invariance(rng):
    sq = square_array()
    base = sq.c_constants()
    for _ in range(10):
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        c = c_constants(sq.spectrum, a * sq.g_in, b * sq.g_out, sq.detuning)
        assert np.linalg.norm(c - base) / np.linalg.norm(base) < 1e-10


def test_square_selection_rule():
    c = square_array().c_constants()
    assert np.sum(np.abs(c) < 1e-10) == 2


def test_linear_amplitude_zero():
    # dipoles along the incidence axis do not couple to a normally incident photon
    arr = AtomArray([[0, 0, 0], [0.2, 0, 0]], [[0, 0, 1.0]] * 2)
    s = eigendecompose(build_heff_free_space(arr))
    g = coupling_free_space(arr, PhotonMode(Z, X))
    with pytest.raises(LinearAmplitudeZeroError):
        c_constants(s, g, g, 0.3)
    s = eigendecompose(build_heff_waveguide(WaveguideParams(0.9, 0.1, 0.1, 0.22 * np.arange(3))))
    with pytest.raises(LinearAmplitudeZeroError):
        c_constants(s, np.ones(3), np.zeros(3), 0.3)


@pytest.mark.parametrize(
    "sc",
    [square_array(), square_array(theta=0.3, detuning=-1.2), chiral_chain(), chiral_chain(xi=0.3, detuning=-0.5)],
    ids=["square-op", "square-off", "chain-op", "chain-xi03"],
)
def test_weak_drive_oracle(sc):
    tau = np.array([0.0, 0.3, 1.0, 2.5, 7.0, 18.0])
    ours = sc.trace(tau).g2
    ref = weak_drive_g2(sc.hamiltonian.matrix, sc.g_in, sc.g_out, sc.detuning, tau)
    np.testing.assert_allclose(ours, ref, rtol=1e-8, atol=1e-12)


def test_weak_drive_oracle_corpus(scenario_corpus):
    tau = np.array([0.0, 1.0, 4.0])
    for _, h, gin, gout in scenario_corpus:
        s = eigendecompose(h)
        c = c_constants(s, gin, gout, 0.37)
        ours = g2_trace(c, s, 0.37, tau).g2
        ref = weak_drive_g2(h.matrix, gin, gout, 0.37, tau)
        np.testing.assert_allclose(ours, ref, rtol=1e-7, atol=1e-10)


def test_chain_all_states_contribute():
    c = chiral_chain().c_constants()
    assert np.all(np.abs(c) > 0.05)


def test_trace_properties(scenario_corpus):
    tau = np.arange(0, 60.0001, 0.02)
    for _, h, gin, gout in scenario_corpus:
        s = eigendecompose(h)
        tr = g2_trace(c_constants(s, gin, gout, 0.1), s, 0.1, tau)
        assert np.all(tr.g2 >= 0)
        # |g2 - 1| <= 2x + x^2 with x = sum |C| exp(-gamma_min tau / 2)
        x = np.abs(tr.c_constants).sum() * np.exp(-s.decay_rates.min() * tau / 2)
        assert np.all(np.abs(tr.g2 - 1) <= 2 * x + x**2 + 1e-12)
        late = 2 * np.log(2e3 * np.abs(tr.c_constants).sum()) / s.decay_rates.min()
        far = g2_trace(tr.c_constants, s, 0.1, late + np.linspace(0, 10, 11)).g2
        assert np.all(np.abs(far - 1) < 1.01e-3)
        z = 1 - tr.contributions().sum(axis=1)
        np.testing.assert_allclose(np.abs(z) ** 2, tr.g2, rtol=1e-12, atol=1e-14)
        assert tr.g2_zero == pytest.approx(tr.g2[0], rel=1e-12, abs=1e-15)


def test_trace_validates_grid():
    sc = single_atom()
    with pytest.raises(ValidationError):
        sc.trace([0.0, -1.0])
    with pytest.raises(ValidationError):
        sc.trace([-0.1, 0.0])
