"""Tests for noncommutative forms, b, B, d and Chern characters."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from ncindex import common
from ncindex import nc_forms
from ncindex.algebra_core import from_matrix
from ncindex.algebra_core import make_matrix_algebra
from ncindex.algebra_core import named_algebra
from ncindex.nc_forms import NCForm

ALGEBRAS = {name: named_algebra(name) for name in ('m2', 'z3')}


def _trace_cochain(alg):
    weights = np.eye(alg.order).reshape(-1)
    return nc_forms.CochainOnForms(lambda n, comp: complex(weights @ comp),
                                   frozenset({0}), common.Parity.EVEN)


def _projector(n, rank, rng):
    mat = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q_mat, _ = np.linalg.qr(mat)
    return q_mat[:, :rank] @ q_mat[:, :rank].conj().T


def test_d_of_degree_zero(m2):
    a0 = m2.basis(1)
    x = NCForm(m2, 2, {0: a0.coeffs})
    image = nc_forms.d(x).component(1)
    assert_allclose(image[m2.dim], a0.coeffs)
    assert_allclose(image[:m2.dim], 0)


def test_b_of_degree_one_is_commutator(m2):
    a0, a1 = m2.basis(1), m2.basis(2)
    comp = nc_forms.outer([nc_forms.unitized(a0), a1.coeffs])
    image = nc_forms.hochschild_b(NCForm(m2, 1, {1: comp})).component(0)
    assert_allclose(image, (a0 * a1 - a1 * a0).coeffs)


def test_b_kills_degree_zero(m2):
    x = NCForm(m2, 1, {0: m2.basis(3).coeffs})
    assert nc_forms.hochschild_b(x).max_abs() == 0.0


def test_connes_b_of_degree_zero_is_d(m2):
    x = NCForm(m2, 1, {0: m2.basis(2).coeffs})
    assert_allclose(nc_forms.connes_B(x).component(1),
                    nc_forms.d(x).component(1))


@pytest.mark.parametrize('name', sorted(ALGEBRAS))
@given(degree=st.integers(0, 4), seed=st.integers(0, 2 ** 32 - 1))
@settings(max_examples=10, deadline=None)
def test_operator_identities(name, degree, seed):
    alg = ALGEBRAS[name]
    rng = np.random.default_rng(seed)
    x = nc_forms.random_form(alg, degree, rng, top_degree=degree + 2)
    b_x, cb_x = nc_forms.hochschild_b(x), nc_forms.connes_B(x)
    assert nc_forms.hochschild_b(b_x).max_abs() < 1e-12
    assert nc_forms.connes_B(cb_x).max_abs() < 1e-12
    mixed = nc_forms.hochschild_b(cb_x) + nc_forms.connes_B(b_x)
    assert mixed.max_abs() < 1e-12
    assert nc_forms.d(nc_forms.d(x)).max_abs() < 1e-12


def test_truncation_is_flagged(m2, rng):
    x = nc_forms.random_form(m2, 2, rng)
    assert not x.truncation_loss
    assert nc_forms.d(x).truncation_loss
    assert nc_forms.connes_B(x).truncation_loss
    assert not nc_forms.hochschild_b(x).truncation_loss


def test_random_form_support(m2, rng):
    x = nc_forms.random_form(m2, 2, rng, support=[0])
    comp = x.component(2)
    assert comp.shape == (5, 4, 4)
    assert np.count_nonzero(comp) == 2


def test_chern_of_rank_one_projector(m2):
    e = from_matrix(m2, np.diag([1.0, 0.0]))
    chern = nc_forms.chern_idempotent(e, 4)
    assert nc_forms.pair(_trace_cochain(m2), chern) == pytest.approx(1.0)


def test_trace_of_rank_two_projector():
    alg = make_matrix_algebra(3)
    e = from_matrix(alg, np.diag([1.0, 1.0, 0.0]))
    value = nc_forms.pair(_trace_cochain(alg), nc_forms.chern_idempotent(e, 0))
    assert value == pytest.approx(2.0)


def test_chern_idempotent_is_a_cycle(rng):
    alg = make_matrix_algebra(4)
    for _ in range(3):
        e = from_matrix(alg, _projector(4, 2, rng))
        chern = nc_forms.chern_idempotent(e, 3)
        assert nc_forms.boundary(chern).max_abs(below=3) < 1e-10


def test_chern_invertible_is_a_cycle(rng):
    alg = make_matrix_algebra(3)
    mat = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) \
        + 3 * np.eye(3)
    chern = nc_forms.chern_invertible(from_matrix(alg, mat), 4)
    assert nc_forms.boundary(chern).max_abs(below=4) < 1e-10


def test_chern_of_the_unit_vanishes_in_odd_degrees(m2):
    chern = nc_forms.chern_invertible(m2.unit(), 3)
    assert chern.max_abs() == 0.0


def test_not_idempotent(m2):
    with pytest.raises(common.NotIdempotent):
        nc_forms.chern_idempotent(m2.unit() * 2.0, 2)


def test_parity_mismatch(m2, rng):
    x = nc_forms.random_form(m2, 1, rng)
    with pytest.raises(common.ParityMismatch):
        nc_forms.pair(_trace_cochain(m2), x)


def test_strict_pairing_rejects_unsupported_degrees(m2):
    e = from_matrix(m2, np.diag([1.0, 0.0]))
    chern = nc_forms.chern_idempotent(e, 2)
    with pytest.raises(common.DegreeUnsupported):
        nc_forms.pair(_trace_cochain(m2), chern, strict=True)


def test_form_json(z3, rng):
    x = nc_forms.random_form(z3, 2, rng, top_degree=3)
    back = nc_forms.form_from_json(z3, nc_forms.form_to_json(x))
    assert back.top_degree == 3
    assert_allclose(back.component(2), x.component(2))


@pytest.mark.parametrize('top', [2, 3])
def test_homology_of_the_complex_numbers(top):
    assert nc_forms.homology_ranks(named_algebra('c'), top) == (1, 0)
