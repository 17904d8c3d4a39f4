"""Tests for finite dimensional algebras, traces and inversion."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from ncindex import algebra_core
from ncindex import common
from ncindex.algebra_core import circle_element
from ncindex.algebra_core import from_matrix
from ncindex.algebra_core import invert
from ncindex.algebra_core import make_circle_algebra
from ncindex.algebra_core import make_matrix_algebra
from ncindex.algebra_core import matrix_of
from ncindex.algebra_core import named_algebra

M3 = make_matrix_algebra(3)


@pytest.mark.parametrize('name', ['c', 'm2', 'z3', 'z5', 's3'])
def test_named_algebras_are_associative_and_unital(name):
    alg = named_algebra(name)
    assert algebra_core.associativity_residual(alg) == 0.0
    assert algebra_core.unit_residual(alg) == 0.0


def test_unknown_algebra_name():
    with pytest.raises(common.ConfigInvalid):
        named_algebra('q7')


@given(st.integers(0, 2 ** 32 - 1))
@settings(deadline=None)
def test_matrix_product_matches_numpy(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    prod = from_matrix(M3, a) * from_matrix(M3, b)
    assert_allclose(matrix_of(prod), a @ b, atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
@settings(deadline=None)
def test_inverse_is_two_sided(seed):
    rng = np.random.default_rng(seed)
    mat = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) \
        + 4 * np.eye(3)
    a = from_matrix(M3, mat)
    a_inv = invert(a)
    assert_allclose((a * a_inv).coeffs, M3.unit_coeffs, atol=1e-10)
    assert_allclose((a_inv * a).coeffs, M3.unit_coeffs, atol=1e-10)


def test_singular_element(m2):
    with pytest.raises(common.Singular):
        invert(m2.basis(0))


def test_parent_mismatch(m2, z3):
    with pytest.raises(common.ParentMismatch):
        m2.unit() * z3.unit()


def test_not_a_group():
    with pytest.raises(common.NotAGroup):
        algebra_core.make_group_algebra([[0, 0], [0, 0]])
    with pytest.raises(common.NotAGroup):
        algebra_core.make_group_algebra([[0, 1], [1, 1]])


def test_group_algebra_of_cyclic_group(z3):
    g = z3.basis(1)
    assert_allclose((g * g * g).coeffs, z3.unit_coeffs)


def test_symmetric_group_is_noncommutative():
    s3 = named_algebra('s3')
    products = [(s3.basis(i) * s3.basis(j) - s3.basis(j) * s3.basis(i)
                 ).norm() for i in range(6) for j in range(6)]
    assert max(products) == 1.0


def test_symmetric_group_table():
    table = algebra_core.symmetric_group_table(3)
    assert table[0] == list(range(6))
    assert all(sorted(row) == list(range(6)) for row in table)
    assert all(sorted(col) == list(range(6)) for col in zip(*table))


def test_traces(m2, z3):
    tau = algebra_core.matrix_trace(m2)
    assert tau.is_trace
    assert tau.lattice_generator == 1.0
    assert tau(m2.unit()) == 2.0
    tau3 = algebra_core.group_trace(z3)
    assert tau3.is_trace
    assert tau3(z3.unit()) == 1.0
    assert tau3.lattice_generator == pytest.approx(1 / 3)


def test_non_trace_functional(m2):
    phi = algebra_core.LinearFunctional(m2, np.array([1.0, 0, 0, 0]))
    assert not algebra_core.verify_trace(phi)


def test_circle_modes():
    alg = make_circle_algebra(2)
    z = circle_element(alg, {1: 1.0})
    z_inv = circle_element(alg, {-1: 1.0})
    assert_allclose((z * z_inv).coeffs, alg.unit_coeffs)
    assert alg.basis_labels[alg.dim - 1] == 'z^-1'
    assert algebra_core.circle_mode(4, 5) == -1
    with pytest.raises(ValueError):
        circle_element(alg, {3: 1.0})


def test_crossed_product_by_a_swap():
    swap = [[0, 1], [1, 0]]
    alg = algebra_core.make_crossed_product(swap,
                                            algebra_core.cyclic_table(2))
    assert alg.dim == 4
    assert algebra_core.associativity_residual(alg) == 0.0
    assert algebra_core.unit_residual(alg) == 0.0
    # u delta_0 u^-1 = delta_1
    u = alg.basis(0 * 2 + 1) + alg.basis(1 * 2 + 1)
    delta0 = alg.basis(0)
    moved = u * delta0 * invert(u)
    assert_allclose(moved.coeffs, alg.basis(2).coeffs, atol=1e-12)


def test_direct_sum_unit(m2, z3):
    alg = algebra_core.direct_sum(m2, z3)
    assert alg.dim == 7
    assert algebra_core.unit_residual(alg) == 0.0


def test_load_algebra_from_json(m2):
    doc = algebra_core.dump_algebra(m2)
    alg = algebra_core.load_algebra(doc)
    assert_allclose(alg.structure_constants, m2.structure_constants)
    assert alg.kind == 'matrix'


def test_load_rejects_non_associative(m2):
    doc = algebra_core.dump_algebra(m2)
    doc['c'][0][0][0] = [2.0, 0.0]
    with pytest.raises(ValueError):
        algebra_core.load_algebra(doc)
