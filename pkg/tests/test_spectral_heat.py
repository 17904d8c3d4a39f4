"""Tests for heat kernels, the JLO cocycle and the residue cocycle."""

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st
from numpy.polynomial import Polynomial
from numpy.testing import assert_allclose

from ncindex import common
from ncindex import nc_forms
from ncindex import spectral_heat as sh
from ncindex.algebra_core import circle_element
from ncindex.algebra_core import named_algebra


def _winding(triple, k):
    return circle_element(triple.source, {k: 1.0})


def test_heat_of_diagonal_dirac():
    alg = named_algebra('c')
    triple = sh.dense_triple(np.eye(2)[None], np.diag([0.0, 1.0]), alg)
    assert_allclose(triple.heat(1.0), np.diag([1.0, np.exp(-1.0)]),
                    atol=1e-15)
    assert triple.heat(1.0) is triple.heat(1.0)


def test_heat_needs_positive_time():
    alg = named_algebra('c')
    triple = sh.dense_triple(np.eye(2)[None], np.diag([0.0, 1.0]), alg)
    with pytest.raises(ValueError):
        triple.heat(0.0)


def test_dirac_must_be_hermitian():
    alg = named_algebra('c')
    with pytest.raises(ValueError):
        sh.dense_triple(np.eye(2)[None], np.array([[0, 1], [0, 0]]), alg)


def test_divided_differences_known_values():
    nodes = np.array([[0.0, 1.0], [2.0, 2.0], [-30.0, 0.0]])
    expected = [np.e - 1, np.exp(2.0), (1 - np.exp(-30.0)) / 30]
    assert_allclose(sh.divided_difference_exp(nodes), expected, rtol=1e-12)
    value = sh.divided_difference_exp(np.zeros((1, 3)))
    assert_allclose(value, 0.5, rtol=1e-12)


@given(start=st.floats(-20, 5),
       gaps=st.lists(st.floats(0.5, 8), min_size=1, max_size=4))
@settings(max_examples=30, deadline=None)
def test_divided_differences_match_recursion(start, gaps):
    nodes = list(start + np.cumsum([0.0] + gaps))
    with mpmath.workdps(40):
        table = [mpmath.exp(x) for x in nodes]
        for length in range(1, len(nodes)):
            table = [(table[i + 1] - table[i])
                     / (nodes[i + length] - nodes[i])
                     for i in range(len(table) - 1)]
        expected = float(table[0])
    value = sh.divided_difference_exp(np.array([nodes]))[0]
    assert_allclose(value, expected, rtol=1e-9)


def test_simplex_volume():
    assert_allclose(sh.simplex_heat_integral(np.zeros((1, 4))), 1 / 6,
                    rtol=1e-12)


def test_jlo_pairing_of_winding_one():
    triple = sh.circle_triple(16, 1)
    value = sh.jlo_pairing(triple, _winding(triple, 1), 1.0)
    assert_allclose(value, 1.0, atol=1e-6)


@pytest.mark.parametrize('k', [-2, 2])
def test_jlo_pairing_of_higher_winding(k):
    triple = sh.circle_triple(16, 2)
    assert_allclose(sh.jlo_pairing(triple, _winding(triple, k), 1.0), k,
                    atol=1e-6)


def test_jlo_is_independent_of_t():
    triple = sh.circle_triple(16, 1)
    spread = sh.jlo_pairing_t_independence(triple, _winding(triple, 1),
                                           [0.5, 1.0, 2.0])
    assert spread < 1e-6


@pytest.mark.slow
def test_jlo_on_wide_window():
    triple = sh.circle_triple(64, 1)
    value = sh.jlo_pairing(triple, _winding(triple, 1), 1.0)
    assert_allclose(value, 1.0, atol=1e-6)


def test_jlo_checks_arguments():
    triple = sh.circle_triple(8, 1)
    u = _winding(triple, 1)
    with pytest.raises(common.ParityMismatch):
        sh.jlo(triple, 2, 1.0, [u, u, u])
    with pytest.raises(ValueError):
        sh.jlo(triple, 1, 1.0, [u])
    with pytest.raises(ValueError):
        sh.jlo(triple, 1, -1.0, [u, u])


def test_even_supertrace_of_unit(m2, rng):
    triple = sh.random_triple(m2, 4, common.Parity.EVEN, rng)
    value = sh.jlo(triple, 0, 1.0, [m2.unit()])
    assert abs(value) < 1e-10


def test_monte_carlo_agrees_with_exact(m2, rng):
    triple = sh.random_triple(m2, 4, common.Parity.ODD, rng)
    slots = [m2.element(rng.normal(size=4)), m2.element(rng.normal(size=4))]
    exact = sh.jlo(triple, 1, 1.0, slots)
    mean, stderr = sh.duhamel_monte_carlo(triple, 1, 1.0, slots,
                                          samples=20000, rng=rng)
    assert stderr > 0
    assert abs(mean - exact) < 4 * stderr + 1e-12


def test_retraction_keeps_pairing():
    triple = sh.circle_triple(16, 2)
    jlo_value, chi_value, diff = sh.retraction_compare(
        triple, _winding(triple, -2), t=1.0)
    assert_allclose(chi_value, -2, atol=1e-9)
    assert_allclose(jlo_value, -2, atol=1e-6)
    assert abs(diff) < 1e-6


def test_retraction_family_ends_at_sign():
    triple = sh.circle_triple(8, 1)
    end = sh.retraction_family(triple, 1.0)
    evals, _ = end.spectrum
    assert_allclose(np.abs(evals), 1.0)
    with pytest.raises(ValueError):
        sh.retraction_family(triple, 1.5)


def test_bounded_module_needs_invertible_dirac():
    alg = named_algebra('c')
    triple = sh.dense_triple(np.eye(2)[None], np.diag([0.0, 1.0]), alg)
    with pytest.raises(common.ZeroMode):
        sh.bounded_module(triple)


def test_zeta_of_identity():
    triple = sh.circle_triple(8, 1)
    zeta = sh.zeta_trace(triple, triple.source.unit())
    assert zeta.poles() == {1.0: 2}
    assert_allclose(zeta.residue(1.0), 2.0)
    assert_allclose(zeta.value(2.0), 4 + np.pi ** 2 / 3, rtol=1e-12)


def test_zeta_of_shift_has_no_pole():
    triple = sh.circle_triple(8, 1)
    zeta = sh.zeta_trace(triple, _winding(triple, 1))
    assert zeta.residue(1.0) == 0


def test_zeta_of_finite_symbol():
    exact = np.array([1.0, 0.0, 2.0, 0.0, 3.0])
    symbol = sh.Symbol(2, exact, Polynomial([0]), Polynomial([0]))
    zeta = sh.ZetaTrace(symbol)
    expected = 2.0 ** -1.3 + 2 * 0.5 ** -1.3 + 3 * 2.0 ** -1.3
    assert_allclose(zeta.value(1.3), expected, rtol=1e-12)
    assert zeta.poles() == {}


def test_zeta_needs_circle_backend(m2, rng):
    triple = sh.random_triple(m2, 4, common.Parity.ODD, rng)
    with pytest.raises(common.BackendUnsupported):
        sh.zeta_trace(triple, m2.unit())


def test_symbol_shift_and_commutator():
    dirac = sh.Symbol.dirac(1)
    assert dirac.value(0) == 0.5
    assert dirac.shift(1).value(2) == 3
    op = sh.CircleOperator({1: sh.Symbol.constant(1.0)})
    comm = op.commutator(dirac)
    assert comm.terms[1].value(5) == 1
    assert comm.terms[1].value(0) == 0.5
    assert comm.terms[1].value(-1) == 1.5


def test_residue_constants():
    assert_allclose(sh.residue_constant([0]), 1.0)
    assert_allclose(sh.residue_constant([1, 0]), 1 / 6)


@pytest.mark.parametrize('k', [-1, 1, 2])
def test_residue_pairing_is_winding(k):
    triple = sh.circle_triple(16, 2)
    assert_allclose(sh.residue_pairing(triple, _winding(triple, k)), k,
                    atol=1e-9)


def test_residue_cochain_parity():
    triple = sh.circle_triple(8, 1)
    with pytest.raises(common.ParityMismatch):
        sh.residue_cochain(2, triple)


def test_residue_cocycle_on_dense_chern_form():
    triple = sh.circle_triple(16, 2)
    u = _winding(triple, 1)
    dense = sh.residue_cocycle(1, triple, nc_forms.chern_invertible(u, 1))
    assert_allclose(dense.scalar, sh.residue_pairing(triple, u, 1),
                    atol=1e-12)
