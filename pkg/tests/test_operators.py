import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from ccagate.model import SIGMA_PLUS, SZ_TILDE
from ccagate.operators import (ConvergenceError, HilbertSpace, Ket, NonHermitianError, Operator,
                               TimeOperator, block_structure, commutator, converged_propagate,
                               destroy, embed, expm_general, expm_propagator, number,
                               propagate_td, tensor, tensor_all)

from conftest import random_hermitian, random_unitary


def single(label, mat):
    return Operator(HilbertSpace(((label, mat.shape[0]),)), mat)


# --- spaces ---------------------------------------------------------------

def test_space_dims_and_index():
    sp = HilbertSpace.of(atom1=3, atom2=3, c=4)
    assert sp.dim == 36
    assert sp.labels == ("atom1", "atom2", "c")
    assert sp.basis_index((1, 2, 3)) == 1 * 12 + 2 * 4 + 3
    assert sp.occupations("c")[sp.basis_index((2, 0, 3))] == 3


def test_space_rejects_duplicates_and_collisions():
    with pytest.raises(ValueError):
        HilbertSpace((("a", 2), ("a", 3)))
    with pytest.raises(ValueError):
        HilbertSpace.of(a=2) * HilbertSpace.of(a=2)
    with pytest.raises(KeyError):
        HilbertSpace.of(a=2).index("b")


# --- tensor / embed -------------------------------------------------------

def test_tensor_diagonal():
    t = tensor(single("x", np.diag([1.0, 2.0])), single("y", np.diag([3.0, 4.0])))
    np.testing.assert_array_equal(t.mat, np.diag([3, 4, 6, 8]))


def test_tensor_identities():
    t = tensor(single("x", np.eye(2)), single("y", np.eye(3)))
    np.testing.assert_array_equal(t.mat, np.eye(6))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_tensor_sigma_plus_times_destroy(n):
    cutoff = 5
    t = tensor(single("atom", SIGMA_PLUS), destroy(cutoff, "c"))
    # index arithmetic: row = atom * cutoff + photon
    row = 2 * cutoff + (n - 1)
    col = 1 * cutoff + n
    assert t.mat[row, col] == pytest.approx(math.sqrt(n))
    assert np.count_nonzero(t.mat) == cutoff - 1


def test_tensor_kets():
    a = Ket(HilbertSpace.of(x=2), [1, 0])
    b = Ket(HilbertSpace.of(y=2), [0, 1])
    np.testing.assert_array_equal(tensor(a, b).vec, [0, 1, 0, 0])
    with pytest.raises(TypeError):
        tensor(a, single("z", np.eye(2)))


def test_embed_identity_and_first_factor(rng):
    sp = HilbertSpace.of(a=3, b=2, c=4)
    np.testing.assert_array_equal(embed(np.eye(3), sp, "a").mat, np.eye(sp.dim))
    op = random_hermitian(rng, 3)
    expected = np.kron(op, np.eye(8))
    np.testing.assert_array_equal(embed(op, sp, "a").mat, expected)


def test_embed_number_on_mode_c():
    sp = HilbertSpace.of(atom1=3, atom2=3, c=4, cp=3, cm=3)
    n_c = embed(number(4, "c"), sp, "c")
    psi = sp.basis(1, 2, 1, 0, 0)
    np.testing.assert_allclose((n_c @ psi).vec, psi.vec)


def test_embed_errors():
    sp = HilbertSpace.of(a=3, b=2)
    with pytest.raises(KeyError):
        embed(np.eye(3), sp, "z")
    with pytest.raises(ValueError):
        embed(np.eye(2), sp, "a")


# --- destroy --------------------------------------------------------------

def test_destroy_cutoff_two():
    np.testing.assert_array_equal(destroy(2).mat, [[0, 1], [0, 0]])


@pytest.mark.parametrize("cutoff", [2, 5, 9])
def test_number_from_destroy(cutoff):
    a = destroy(cutoff)
    np.testing.assert_allclose((a.dag() @ a).mat, np.diag(np.arange(cutoff)), atol=1e-14)


def test_commutator_truncation_artifact():
    a = destroy(6)
    comm = commutator(a, a.dag()).mat
    np.testing.assert_allclose(np.diag(comm)[:-1], 1.0)
    assert np.diag(comm)[-1] == pytest.approx(-5.0)


def test_destroy_rejects_small_cutoff():
    with pytest.raises(ValueError):
        destroy(1)


# --- exponentials ---------------------------------------------------------

def test_expm_zero_is_identity():
    sp = HilbertSpace.of(x=4)
    np.testing.assert_array_equal(expm_propagator(sp.zero(), 1.3).mat, np.eye(4))


def test_expm_sigma_z_pi():
    u = expm_propagator(single("atom", SZ_TILDE), math.pi)
    # -1 on the |1>,|i> subspace, +1 on |0>
    np.testing.assert_allclose(u.mat, np.diag([1, -1, -1]), atol=1e-14)


@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_expm_semigroup(seed, t1, t2):
    h = single("x", random_hermitian(np.random.default_rng(seed), 6))
    lhs = expm_propagator(h, t1) @ expm_propagator(h, t2)
    np.testing.assert_allclose(lhs.mat, expm_propagator(h, t1 + t2).mat, atol=1e-10)


def test_expm_matches_scipy_and_unitary(rng):
    h = random_hermitian(rng, 7)
    u = expm_propagator(single("x", h), 0.7)
    np.testing.assert_allclose(u.mat, scipy.linalg.expm(-0.7j * h), atol=1e-12)
    assert u.unitarity_defect() < 1e-10


def test_expm_rejects_non_hermitian():
    with pytest.raises(NonHermitianError):
        expm_propagator(single("x", np.array([[0, 1], [0, 0]])), 1.0)


@given(st.integers(0, 10_000), st.floats(0.01, 20))
def test_expm_general_matches_scipy(seed, scale):
    r = np.random.default_rng(seed)
    m = scale * (r.normal(size=(5, 5)) + 1j * r.normal(size=(5, 5)))
    ref = scipy.linalg.expm(m)
    np.testing.assert_allclose(expm_general(m), ref, rtol=1e-9,
                               atol=1e-12 * np.max(np.abs(ref)))


def test_expm_general_nilpotent():
    # exp of a strictly upper-triangular matrix terminates: I + N + N^2/2
    n = np.diag([1.0, 2.0], k=1)
    expected = np.eye(3) + n + n @ n / 2
    np.testing.assert_allclose(expm_general(n), expected, atol=1e-15)


# --- time-ordered propagation ----------------------------------------------

def sigma_z_family(f):
    sp = HilbertSpace.of(atom=3)
    return TimeOperator(sp, lambda t: f(t) * SZ_TILDE.astype(complex))


def test_propagate_constant_reduces_to_expm(rng):
    h = random_hermitian(rng, 5)
    sp = HilbertSpace.of(x=5)
    u = propagate_td(TimeOperator(sp, lambda t: h), 0.2, 1.7, steps=100)
    np.testing.assert_allclose(u.mat, expm_propagator(Operator(sp, h), 1.5).mat, atol=1e-8)


def test_propagate_commuting_family_matches_quadrature():
    f = lambda t: 1.0 + 0.6 * math.sin(3 * t) + 0.2 * t ** 2
    integral, _ = quad(f, 0.0, 2.0, epsabs=1e-14)
    u = propagate_td(sigma_z_family(f), 0.0, 2.0, steps=4000)
    expected = scipy.linalg.expm(-1j * integral * SZ_TILDE)
    np.testing.assert_allclose(u.mat, expected, atol=1e-6)


def test_propagate_second_order_convergence():
    sp = HilbertSpace.of(x=3)
    a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    b = np.diag([1.0, -0.5, 0.3]).astype(complex)
    h = TimeOperator(sp, lambda t: a * math.cos(2 * t) + b * (1 + t))
    us = {n: propagate_td(h, 0.0, 2.0, n).mat for n in (40, 80, 160, 320)}
    # Richardson extrapolation from the two finest grids
    ref = (4 * us[320] - us[160]) / 3
    errs = [np.linalg.norm(us[n] - ref) for n in (40, 80, 160)]
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5
    assert Operator(sp, us[320]).unitarity_defect() < 1e-8


def test_propagate_block_detection_matches_dense(rng):
    sp = HilbertSpace.of(x=6)
    h1, h2 = random_hermitian(rng, 3), random_hermitian(rng, 3)

    def fn(t):
        m = np.zeros((6, 6), dtype=complex)
        m[np.ix_([0, 2, 4], [0, 2, 4])] = h1 * math.cos(t)
        m[np.ix_([1, 3, 5], [1, 3, 5])] = h2 * (1 + t)
        return m

    h = TimeOperator(sp, fn)
    blocks = block_structure([fn(0.3)])
    assert sorted(map(tuple, blocks)) == [(0, 2, 4), (1, 3, 5)]
    dense = propagate_td(h, 0.0, 1.0, 50, blocks=None)
    auto = propagate_td(h, 0.0, 1.0, 50)
    np.testing.assert_allclose(auto.mat, dense.mat, atol=1e-13)


def test_propagate_errors():
    sp = HilbertSpace.of(x=2)
    h = TimeOperator(sp, lambda t: np.eye(2, dtype=complex))
    with pytest.raises(ValueError):
        propagate_td(h, 1.0, 1.0, 10)
    with pytest.raises(ValueError):
        propagate_td(h, 0.0, 1.0, 0)
    bad = TimeOperator(sp, lambda t: np.array([[0, t], [0, 0]], dtype=complex))
    with pytest.raises(NonHermitianError):
        propagate_td(bad, 0.0, 1.0, 4)


def test_converged_propagate_reports_and_fails():
    h = sigma_z_family(lambda t: math.cos(5 * t))
    u, rep = converged_propagate(h, 0.0, 1.0, 100, tol=1e-7)
    assert rep.converged and rep.change < 1e-7
    assert rep.history[-1] == (rep.steps, rep.change)
    np.testing.assert_allclose(u.mat, scipy.linalg.expm(-1j * math.sin(5) / 5 * SZ_TILDE),
                               atol=1e-8)
    with pytest.raises(ConvergenceError):
        converged_propagate(sigma_z_family(lambda t: math.cos(5 * t) * (1 + t)),
                            0.0, 1.0, 2, tol=1e-14, max_doublings=2)


# --- invariants -----------------------------------------------------------

@given(st.integers(0, 10_000))
def test_tensor_associative(seed):
    r = np.random.default_rng(seed)
    a, b, c = (single(lbl, random_hermitian(r, d)) for lbl, d in (("a", 2), ("b", 3), ("c", 2)))
    # complex products round differently per grouping; compare at rounding level
    np.testing.assert_allclose(tensor(tensor(a, b), c).mat, tensor(a, tensor(b, c)).mat,
                               rtol=1e-15, atol=1e-15)
    assert tensor_all([a, b, c]).space.labels == ("a", "b", "c")


@given(st.integers(0, 10_000), st.sampled_from([("atom1", "c"), ("atom2", "cp"), ("c", "cm")]))
def test_embeds_on_distinct_factors_commute(seed, pair):
    r = np.random.default_rng(seed)
    sp = HilbertSpace.of(atom1=3, atom2=3, c=3, cp=2, cm=2)
    x = embed(random_hermitian(r, sp.factor_dim(pair[0])), sp, pair[0])
    y = embed(random_hermitian(r, sp.factor_dim(pair[1])), sp, pair[1])
    assert np.max(np.abs(commutator(x, y).mat)) == 0.0


@given(st.integers(0, 10_000))
def test_unitary_preserves_norm(seed):
    r = np.random.default_rng(seed)
    sp = HilbertSpace.of(x=8)
    u = Operator(sp, random_unitary(r, 8))
    psi = Ket(sp, r.normal(size=8) + 1j * r.normal(size=8)).normalized()
    assert abs((u @ psi).norm() - 1) < 1e-10


def test_operators_are_immutable():
    op = destroy(3)
    with pytest.raises(ValueError):
        op.mat[0, 1] = 5.0
