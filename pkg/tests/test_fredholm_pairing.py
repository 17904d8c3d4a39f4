"""Tests for Fredholm modules, chi/eta cochains and index pairings."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ncindex import common
from ncindex import fredholm_pairing as fp
from ncindex import nc_forms
from ncindex.algebra_core import circle_element
from ncindex.gauge_anomaly import copies_module

INV = common.ClassKind.INVERTIBLE
IDEM = common.ClassKind.IDEMPOTENT


def _winding(module, k):
    return circle_element(module.source, {k: 1.0})


@pytest.mark.parametrize('k', [-3, -2, -1, 1, 2, 3])
def test_toeplitz_pairing_is_winding(k):
    module = fp.toeplitz_module(12, max(1, abs(k)))
    u = _winding(module, k)
    assert_allclose(fp.index_pairing(module, u, INV), k, atol=1e-9)
    assert fp.operator_index_oracle(module, u) == -k


def test_trivial_class_pairs_to_zero():
    module = fp.toeplitz_module(8, 1)
    unit = module.source.unit()
    assert abs(fp.index_pairing(module, unit, INV)) < 1e-12
    assert fp.operator_index_oracle(module, unit) == 0


def test_direct_sum_adds_pairings():
    module = fp.toeplitz_module(8, 1)
    doubled = fp.direct_sum_modules(module, module)
    u = _winding(module, 1)
    assert_allclose(fp.index_pairing(doubled, u, INV), 2, atol=1e-9)


def test_direct_sum_needs_one_algebra():
    with pytest.raises(common.ParentMismatch):
        fp.direct_sum_modules(fp.toeplitz_module(8, 1),
                              fp.toeplitz_module(8, 1))


def test_even_pairing_matches_oracle(m2):
    module = copies_module(m2, 2, 1)
    e = m2.basis(0)
    assert fp.minimal_degree(module) == 0
    assert_allclose(fp.index_pairing(module, e, IDEM), 1, atol=1e-10)
    assert fp.operator_index_oracle(module, e) == 1


def test_random_even_module_pairing(m2, rng):
    module = fp.random_module(m2, 4, common.Parity.EVEN, rng)
    e = m2.basis(0)
    value = fp.index_pairing(module, e, IDEM)
    assert_allclose(value, fp.operator_index_oracle(module, e), atol=1e-9)


def test_conjugation_keeps_pairing(rng):
    module = fp.toeplitz_module(8, 1)
    unitary = np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, module.size)))
    moved = fp.conjugate_module(module, unitary)
    u = _winding(module, 1)
    assert_allclose(fp.index_pairing(moved, u, INV), 1, atol=1e-9)


def test_parity_mismatch(m2):
    module = fp.toeplitz_module(8, 1)
    with pytest.raises(common.ParityMismatch):
        fp.index_pairing(module, module.source.unit(), IDEM)
    with pytest.raises(common.ParityMismatch):
        fp.index_pairing(copies_module(m2, 1, 1), m2.unit(), INV)


def test_module_rejects_non_involution(m2):
    rho = fp.basic_rep(m2)
    with pytest.raises(ValueError):
        fp.FredholmModule(m2, rho, 2 * np.eye(2), common.Parity.ODD, 1)


def test_even_module_needs_grading(m2):
    rho = fp.basic_rep(m2)
    with pytest.raises(ValueError):
        fp.FredholmModule(m2, rho, np.eye(2), common.Parity.EVEN, 0)


def test_minimal_degree():
    assert fp.minimal_degree(fp.toeplitz_module(8, 1)) == 1
    module = fp.toeplitz_module(8, 1)
    lifted = fp.FredholmModule(module.source, module.rho, module.F,
                               common.Parity.ODD, 2, meta=module.meta)
    assert fp.minimal_degree(lifted) == 3


def test_window_too_small():
    with pytest.raises(ValueError):
        fp.toeplitz_module(2, 3)


@pytest.mark.parametrize('n', [1, 3])
def test_transgression_on_toeplitz(n):
    module = fp.toeplitz_module(8, 1)
    assert fp.transgression_check(n, module, trials=3) < 1e-9


def test_transgression_on_random_module(m2, rng):
    module = fp.random_module(m2, 4, common.Parity.ODD, rng)
    assert fp.transgression_check(1, module, trials=3) < 1e-9


def test_scalar_target_has_no_odd_part(m2, rng):
    module = fp.random_module(m2, 4, common.Parity.ODD, rng)
    x = nc_forms.random_form(m2, 1, rng)
    assert np.all(fp.chi_odd_part(1, module, x) == 0)
    y = nc_forms.random_form(m2, 3, rng)
    assert np.all(fp.eta_odd_part(2, module, y) == 0)


def test_bivariant_residual_on_scalar_target():
    module = fp.toeplitz_module(8, 1)
    assert fp.bivariant_residual(1, module, trials=2) < 1e-9


def test_chi_coefficients_are_finite():
    values = [fp.chi_coefficient(n) for n in range(6)]
    assert all(np.isfinite(values))


def test_homomorphism_residual(m2, rng):
    assert fp.homomorphism_residual(fp.toeplitz_module(16, 2)) < 1e-12
    module = fp.random_module(m2, 6, common.Parity.ODD, rng)
    assert fp.homomorphism_residual(module) < 1e-10


def test_summability_profile_of_shift():
    module = fp.toeplitz_module(8, 1)
    profile = fp.summability_profile(module, _winding(module, 1), 1.0)
    assert_allclose(profile[0], 2.0)
    assert_allclose(profile[-1], 2.0, atol=1e-12)


def _pairs(mat):
    return [[[z.real, z.imag] for z in row] for row in mat]


def test_load_module(m2):
    rho = fp.basic_rep(m2)
    sign = np.diag([1.0, -1.0]).astype(complex)
    doc = {'algebra': 'm2', 'h_dim': 2, 'parity': 'odd', 'p': 1,
           'rho': [_pairs(r) for r in rho], 'F': _pairs(sign)}
    module = fp.load_module(json.dumps(doc))
    assert module.parity == common.Parity.ODD
    assert module.h_dim == 2
    assert_allclose(module.F, sign)
    assert fp.homomorphism_residual(module) < 1e-12


def test_load_module_rejects_non_homomorphism(m2):
    rho = 2.0 * fp.basic_rep(m2)
    sign = np.diag([1.0, -1.0])
    doc = {'algebra': 'm2', 'h_dim': 2, 'parity': 'odd', 'p': 1,
           'rho': [_pairs(r) for r in rho], 'F': _pairs(sign)}
    with pytest.raises(ValueError, match='homomorphism'):
        fp.load_module(doc)


def test_direct_sum_of_windows_keeps_interior():
    module = fp.toeplitz_module(8, 1)
    doubled = fp.direct_sum_modules(module, module)
    assert fp.homomorphism_residual(doubled) < 1e-12
    assert fp.operator_index_oracle(doubled, _winding(doubled, 1)) == -2


def test_load_module_checks_h_dim(m2):
    rho = fp.basic_rep(m2)
    doc = {'algebra': 'm2', 'h_dim': 3, 'parity': 'odd', 'p': 1,
           'rho': [_pairs(r) for r in rho], 'F': _pairs(np.eye(2))}
    with pytest.raises(ValueError):
        fp.load_module(doc)


def test_degree_below_summability():
    module = fp.toeplitz_module(8, 1)
    lifted = fp.FredholmModule(module.source, module.rho, module.F,
                               common.Parity.ODD, 3, meta=module.meta)
    with pytest.raises(common.SummabilityViolation):
        fp.chi_cochain(1, lifted)
