import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccagate.model import (SM_TILDE, SP_TILDE, SQRT2, SZ_TILDE, SystemParams, atom_basis,
                           atom_ket, effective_space, full_space, h0, h1, h_cavity_fiber,
                           h_corotating, h_eff, h_lab, h_rotated, lab_space, low_fock_indices,
                           mode_op, normal_mode_defects, normal_modes, photon_number,
                           product_state, s_operator, single_excitation_spectrum)
from ccagate.operators import commutator, embed, number

PHASES = [0.0, math.pi / 3, math.pi]


# --- parameters -----------------------------------------------------------

def test_params_derived_quantities(params):
    assert params.tau == pytest.approx(2 * math.pi)
    assert params.lam == pytest.approx(0.01 / 8)
    assert params.theta == pytest.approx(0.01 * math.pi / 4)
    assert params.strong_fiber and params.strong_drive
    assert params.drive_phase_cancels
    assert not params.replace(omega_drive=50.5).drive_phase_cancels
    assert not params.replace(nu=0.1).strong_fiber


@pytest.mark.parametrize("bad", [dict(g=-0.1), dict(delta=0.0), dict(nu=-1.0),
                                 dict(omega_drive=0.0), dict(omega_mw=-1.0),
                                 dict(cutoff_c=1), dict(td_steps=0)])
def test_params_validation(params, bad):
    with pytest.raises(ValueError):
        params.replace(**bad)


# --- atomic basis ---------------------------------------------------------

def test_dressed_basis_single_atom():
    plus, minus, zero = atom_ket("+"), atom_ket("-"), atom_ket("0")
    np.testing.assert_allclose(SZ_TILDE @ plus, plus, atol=1e-15)
    np.testing.assert_allclose(SZ_TILDE @ minus, -minus, atol=1e-15)
    np.testing.assert_array_equal(SZ_TILDE @ zero, 0)
    np.testing.assert_allclose(SP_TILDE @ minus, plus, atol=1e-15)
    np.testing.assert_allclose(SM_TILDE @ plus, minus, atol=1e-15)


def test_atom_basis_map_on_full_space(params):
    sp = full_space(params)
    ab = atom_basis(sp)
    for j, atoms in enumerate([("+", "0"), ("0", "+")]):
        psi = product_state(sp, atoms)
        np.testing.assert_allclose((ab.sz[j] @ psi).vec, psi.vec, atol=1e-15)
    psi = product_state(sp, ("-", "-"))
    np.testing.assert_allclose((s_operator(sp) @ psi).vec, 0, atol=1e-15)


# --- lab-frame cavity/fiber coupling --------------------------------------

def test_cavity_fiber_zero_coupling(params):
    assert np.max(np.abs(h_cavity_fiber(params.replace(nu=0.0)).mat)) == 0


@pytest.mark.parametrize("phi", PHASES)
def test_single_excitation_spectrum(params, phi):
    spec = single_excitation_spectrum(params.replace(fiber_phase=phi))
    np.testing.assert_allclose(spec, [-SQRT2 * 10, 0.0, SQRT2 * 10], atol=1e-10)


def test_cavity_fiber_matrix_element(params):
    phi = 0.7
    h = h_cavity_fiber(params.replace(fiber_phase=phi), cutoff=3)
    sp = h.space
    b1 = sp.basis_index((0, 0, 1))
    assert h.mat[b1, sp.basis_index((1, 0, 0))] == pytest.approx(10.0)
    assert h.mat[b1, sp.basis_index((0, 1, 0))] == pytest.approx(10.0 * np.exp(-1j * phi))
    assert h.is_hermitian()


@pytest.mark.parametrize("phi", PHASES)
def test_normal_mode_identities(params, phi):
    d = normal_mode_defects(params.replace(fiber_phase=phi))
    assert d["diagonal_form"] < 1e-10
    assert d["dark_mode"] < 1e-10
    assert d["dark_commutator"] < 1e-10


@pytest.mark.parametrize("phi", PHASES)
def test_normal_mode_cross_commutators(params, phi):
    cutoff = 5
    c, cp, cm = normal_modes(params.replace(fiber_phase=phi), cutoff)
    sp = c.space
    keep = np.flatnonzero(np.all([sp.occupations(l) <= cutoff - 3 for l in sp.labels], axis=0))
    sub = np.ix_(keep, keep)
    for other in (cp, cm):
        assert np.max(np.abs(commutator(c, other.dag()).mat[sub])) < 1e-12
    comm = commutator(cp, cm.dag()).mat[sub]
    assert np.max(np.abs(comm)) < 1e-12


def test_printed_phase_convention_is_not_dark():
    # (a1 - e^{+i phi} a2)/sqrt2 fails to decouple once phi != 0; e^{-i phi} is required
    p = SystemParams(g=0.1, nu=1.0, omega_drive=50, omega_mw=10, fiber_phase=math.pi / 3)
    cutoff = 5
    h = h_cavity_fiber(p, cutoff)
    sp = lab_space(cutoff)
    a1, a2 = mode_op(sp, "a1"), mode_op(sp, "a2")
    c_printed = (a1 - np.exp(1j * p.fiber_phase) * a2) * (1 / SQRT2)
    keep = np.flatnonzero(np.all([sp.occupations(l) <= cutoff - 3 for l in sp.labels], axis=0))
    defect = np.max(np.abs(commutator(h, c_printed).mat[np.ix_(keep, keep)]))
    assert defect > 0.1


# --- normal-mode frame ----------------------------------------------------

def test_h0_examples(params):
    sp = full_space(params)
    H = h0(params)
    vac = product_state(sp, ("0", "0"))
    np.testing.assert_array_equal((H @ vac).vec, 0)
    plus = product_state(sp, ("+", "0"))
    np.testing.assert_allclose((H @ plus).vec, 50.0 * plus.vec, atol=1e-12)
    one_cp = product_state(sp, ("0", "0"), {"cp": 1})
    np.testing.assert_allclose((H @ one_cp).vec, SQRT2 * 10 * one_cp.vec, atol=1e-12)
    one_cm = product_state(sp, ("0", "0"), {"cm": 1})
    np.testing.assert_allclose((H @ one_cm).vec, -SQRT2 * 10 * one_cm.vec, atol=1e-12)
    assert H.is_hermitian()


def test_h0_drive_term_in_dressed_basis(params):
    sp = effective_space(params)
    ab = atom_basis(sp)
    expected = 50.0 * (ab.sz[0] + ab.sz[1]).mat
    np.testing.assert_allclose(h0(params, sp).mat, expected, atol=1e-13)


def test_h1_zero_coupling(params):
    assert np.max(np.abs(h1(params.replace(g=0.0), 0.4).mat)) == 0


def test_h1_matrix_elements(params):
    sp = full_space(params)
    H = h1(params, 0.0)
    out1 = product_state(sp, ("i", "0"))
    in1 = product_state(sp, ("1", "0"), {"c": 1})
    assert out1.overlap(H @ in1) == pytest.approx(0.1 / SQRT2)
    out2 = product_state(sp, ("0", "i"))
    in2 = product_state(sp, ("0", "1"), {"c": 1})
    assert out2.overlap(H @ in2) == pytest.approx(-0.1 / SQRT2)
    # the split modes couple with weight 1/2 and the same sign for both atoms
    in3 = product_state(sp, ("0", "1"), {"cp": 1})
    assert out2.overlap(H @ in3) == pytest.approx(0.05)


@given(st.floats(0, 20))
def test_h1_hermitian(t):
    p = SystemParams(g=0.3, nu=2.0, omega_drive=5.0, omega_mw=1.0, cutoff_full_c=3, cutoff_pm=2)
    assert h1(p, t).is_hermitian()


def test_h_lab_is_h0_plus_h1(params):
    t = 0.813
    np.testing.assert_allclose(h_lab(params).matrix(t), (h0(params) + h1(params, t)).mat,
                               atol=1e-13)


# --- rotated frame --------------------------------------------------------

SMALL = SystemParams(g=0.2, nu=3.0, omega_drive=7.0, omega_mw=1.0, fiber_phase=0.4,
                     cutoff_full_c=3, cutoff_pm=2)


def test_rotated_at_zero_is_h1():
    np.testing.assert_allclose(h_rotated(SMALL).matrix(0.0), h1(SMALL, 0.0).mat, atol=1e-12)


@given(st.floats(0, 10))
def test_rotated_norm_invariance(t):
    h_r = h_rotated(SMALL).matrix(t)
    assert np.linalg.norm(h_r) == pytest.approx(np.linalg.norm(h1(SMALL, t).mat), rel=1e-12)
    assert np.max(np.abs(h_r - h_r.conj().T)) < 1e-12


def test_rotated_is_conjugated_h1():
    # independent route: explicit e^{iH0 t} H1 e^{-iH0 t} via scipy
    from scipy.linalg import expm
    t = 1.37
    u = expm(-1j * h0(SMALL).mat * t)
    expected = u.conj().T @ h1(SMALL, t).mat @ u
    np.testing.assert_allclose(h_rotated(SMALL).matrix(t), expected, atol=1e-11)


def test_rotated_frequency_content_without_drive_and_fiber():
    # omega_drive must be positive; 1e-12 is indistinguishable from zero here
    p = SystemParams(g=0.3, nu=0.0, omega_drive=1e-12, omega_mw=1.0, cutoff_full_c=3,
                     cutoff_pm=2)
    n = 64
    ts = 2 * math.pi * np.arange(n) / n
    samples = np.array([h_rotated(p).matrix(t) for t in ts])
    spectrum = np.fft.fft(samples, axis=0) / n
    power = np.max(np.abs(spectrum), axis=(1, 2))
    allowed = {1, n - 1}
    assert max(power[k] for k in range(n) if k not in allowed) < 1e-9
    assert min(power[k] for k in allowed) > 0.05


# --- effective Hamiltonian ------------------------------------------------

def test_h_eff_examples(params):
    sp = effective_space(params)
    H = h_eff(params).matrix(0.0)
    for atoms in [("-", "-"), ("0", "0"), ("+", "+")]:
        for n in range(3):
            psi = product_state(sp, atoms, {"c": n})
            np.testing.assert_allclose(H @ psi.vec, 0, atol=1e-15)
    out = product_state(sp, ("+", "0"), {"c": 1})
    inp = product_state(sp, ("+", "0"))
    assert np.vdot(out.vec, H @ inp.vec) == pytest.approx(0.1 / (2 * SQRT2))


@given(st.floats(0, 7))
def test_h_eff_conserved_quantities(t):
    p = SystemParams(g=0.3, nu=10, omega_drive=50, omega_mw=10, cutoff_full_c=3, cutoff_pm=3)
    sp = full_space(p)
    H = h_eff(p, sp)(t)
    n_cp = embed(number(3, "cp"), sp, "cp")
    n_cm = embed(number(3, "cm"), sp, "cm")
    proj = np.diag([0.0, 1.0, 1.0])
    pm_pop = embed(proj, sp, "atom1") + embed(proj, sp, "atom2")
    for q in (n_cp, n_cm, pm_pop):
        assert np.max(np.abs(commutator(H, q).mat)) < 1e-15


@pytest.mark.parametrize("effective", [False, True])
def test_corotating_generator_identity(effective):
    p = SMALL
    sp = effective_space(p) if effective else full_space(p)
    k = h_corotating(p, sp, effective=effective).mat
    n = np.diag(photon_number(sp).mat).real
    for t in (0.3, 2.9):
        rot = np.exp(1j * p.delta * n * t)
        lhs = (rot[:, None] * k * rot.conj()[None, :]) - p.delta * np.diag(n)
        rhs = h_eff(p, sp).matrix(t) if effective else h_lab(p, sp).matrix(t)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_builders_are_deterministic():
    make = lambda: SystemParams(g=0.2, nu=3.0, omega_drive=7.0, omega_mw=1.0, fiber_phase=0.4,
                                cutoff_full_c=3, cutoff_pm=2)
    a, b = make(), make()
    assert a is not b
    np.testing.assert_array_equal(h0(a).mat, h0(b).mat)
    np.testing.assert_array_equal(h1(a, 0.77).mat, h1(b, 0.77).mat)
    np.testing.assert_array_equal(h_rotated(a).matrix(1.1), h_rotated(b).matrix(1.1))
    np.testing.assert_array_equal(h_eff(a).matrix(1.1), h_eff(b).matrix(1.1))
    np.testing.assert_array_equal(h_cavity_fiber(a).mat, h_cavity_fiber(b).mat)


def test_low_fock_indices(params):
    sp = full_space(params)
    idx = low_fock_indices(sp, 0)
    assert len(idx) == 9
    assert len(low_fock_indices(sp, 1)) == 9 * 4
