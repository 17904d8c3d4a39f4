"""Tests for gauge loops, the renormalized action and its anomaly."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ncindex import common
from ncindex import gauge_anomaly as ga
from ncindex.algebra_core import circle_element
from ncindex.algebra_core import circle_mode
from ncindex.algebra_core import from_matrix
from ncindex.algebra_core import matrix_of
from ncindex.algebra_core import matrix_trace
from ncindex.fredholm_pairing import toeplitz_module
from ncindex.nc_forms import NCForm


@pytest.fixture
def chiral():
    return ga.chiral_circle_model(window=8)


def _multiplier(model):
    return circle_element(model.source, {-1: 0.5, 0: 0.4, 1: 0.5})


def _zero_mode_anomaly(loop):
    alg = loop.model.source
    modes = [circle_mode(j, alg.dim) for j in range(alg.dim)]
    phis = 2 * np.pi * np.arange(256) / 256
    waves = np.exp(1j * np.outer(modes, phis))
    u = (loop.coeffs + alg.unit_coeffs) @ waves
    du = loop.velocity @ waves
    return np.mean(du / u, axis=1)


@pytest.mark.parametrize('k', [-2, -1, 0, 1, 2])
def test_index_of_winding_loop(chiral, k):
    loop = ga.winding_loop(chiral, k, grid=32)
    assert_allclose(ga.index_via_anomaly(loop), k, atol=1e-4)


def test_anomaly_paths_agree(chiral):
    result = ga.anomaly(ga.winding_loop(chiral, 1, grid=32))
    assert result.max_deviation < 1e-5
    assert_allclose(result.from_action, 2j * np.pi, atol=1e-6)


def test_dressing_leaves_index(chiral):
    loop = ga.winding_loop(chiral, 1, grid=32, amplitude=0.7,
                           dressing=_multiplier(chiral))
    assert_allclose(ga.index_via_anomaly(loop), 1, atol=1e-4)


def test_counterterms_shift_by_exact_terms(chiral, rng):
    loop = ga.winding_loop(chiral, 1, grid=32, amplitude=0.4,
                           dressing=_multiplier(chiral))
    plain = ga.index_via_anomaly(loop)
    for _ in range(3):
        coefficients = rng.normal(scale=0.5, size=chiral.p + 1) \
            + 1j * rng.normal(scale=0.5, size=chiral.p + 1)
        shifted = ga.index_via_anomaly(loop, list(coefficients))
        assert abs(plain - shifted) < 1e-6


def test_dressed_loop_anomaly():
    model = ga.chiral_circle_model(window=24)
    loop = ga.winding_loop(model, 1, grid=32, amplitude=0.3,
                           dressing=_multiplier(model))
    samples = ga.potential_path(loop).samples
    assert np.linalg.matrix_rank(samples[8], tol=1e-6) > model.size // 2
    result = ga.anomaly(loop)
    assert result.max_deviation < 1e-5
    assert_allclose(result.from_action, _zero_mode_anomaly(loop), atol=1e-6)
    assert np.ptp(result.from_action.imag) > 0.1


def test_residue_at_zero_of_growing_diagonals(chiral):
    modes = chiral.modes.astype(float)
    even = ga.residue_at_zero(chiral, np.diag(np.abs(modes)), 2.0)
    assert_allclose(even, 1.0, atol=1e-12)
    odd = ga.residue_at_zero(chiral, np.diag(modes), 2.0)
    assert abs(odd) < 1e-12
    assert ga.residue_at_zero(chiral, np.eye(chiral.size), 4.0) == 0


def test_residue_needs_room_for_tails(chiral):
    with pytest.raises(ValueError):
        ga.residue_at_zero(chiral, np.eye(chiral.size), 12.0)


def test_bott_projector_must_be_constant(chiral):
    average = circle_element(chiral.source, {-1: 1 / 3, 0: 1 / 3, 1: 1 / 3})
    with pytest.raises(ValueError):
        ga.bott_loop(chiral, average, grid=8)


@pytest.mark.slow
def test_index_on_default_window():
    model = ga.chiral_circle_model()
    for k in (-2, 2):
        loop = ga.winding_loop(model, k)
        assert_allclose(ga.index_via_anomaly(loop), k, atol=1e-4)
        assert ga.anomaly(loop).max_deviation < 1e-5


def test_bott_loop_on_module(m2):
    model = ga.module_gauge_model(ga.copies_module(m2, 2, 1))
    loop = ga.bott_loop(model, m2.basis(0), grid=32)
    assert_allclose(ga.index_via_anomaly(loop), 1, atol=1e-6)


def test_trivial_loop_has_no_anomaly(chiral):
    loop = ga.GaugeLoop(chiral, np.zeros((16, chiral.source.dim)))
    result = ga.anomaly(loop)
    assert np.max(np.abs(result.from_action)) < 1e-12
    assert np.max(np.abs(result.from_residues)) < 1e-12


def test_loop_starts_at_identity(chiral):
    coeffs = np.ones((8, chiral.source.dim))
    with pytest.raises(ValueError):
        ga.GaugeLoop(chiral, coeffs)


def test_w_term(chiral):
    zero = np.zeros((chiral.size, chiral.size))
    assert ga.w_term(chiral, 3, zero) == 0
    with pytest.raises(common.NonSummable):
        ga.w_term(chiral, 1, zero)
    with pytest.raises(ValueError):
        ga.w_term(chiral, 0, zero)


def test_w_action_of_nilpotent_potential(m2):
    model = ga.module_gauge_model(ga.copies_module(m2, 1, 1))
    step = np.zeros((model.size, model.size), dtype=complex)
    step[0, -1] = 0.7
    a = model.Q @ step
    assert_allclose(ga.w_action(model, a), ga.w_term(model, 1, a),
                    atol=1e-12)
    assert abs(ga.w_term(model, 2, a)) < 1e-12


def _cubic_term_mean(grid):
    model = ga.chiral_circle_model(window=16)
    loop = ga.winding_loop(model, 1, grid=grid, amplitude=0.3,
                           dressing=_multiplier(model))
    path = ga.potential_path(loop)
    return np.mean([ga.w_term(model, 3, a) for a in path.samples])


def test_cubic_term_is_finite():
    assert np.isfinite(_cubic_term_mean(64))


@pytest.mark.slow
def test_cubic_term_converges_in_grid():
    assert abs(_cubic_term_mean(64) - _cubic_term_mean(128)) < 1e-8


def test_w_term_on_finite_module(m2):
    model = ga.module_gauge_model(ga.copies_module(m2, 1, 1))
    a = 0.1 * np.eye(model.size)
    assert_allclose(ga.w_term(model, 1, a), 0.1 * model.size)
    with pytest.raises(common.BackendUnsupported):
        ga.w_renorm(model, 1, a)


def test_counterterm_degree_is_bounded(chiral):
    zero = np.zeros((chiral.size, chiral.size))
    with pytest.raises(ValueError):
        ga.counterterm(chiral, zero, [1.0, 1.0, 1.0])


def test_gauge_model_needs_even_module():
    with pytest.raises(common.ParityMismatch):
        ga.module_gauge_model(toeplitz_module(8, 1))


def test_spectral_derivative():
    thetas = np.arange(32) / 32
    deriv = ga.spectral_derivative(np.sin(2 * np.pi * thetas))
    assert_allclose(deriv, 2 * np.pi * np.cos(2 * np.pi * thetas),
                    atol=1e-10)


def test_algebra_exp(m2):
    h = from_matrix(m2, np.diag([1.0, 2.0]))
    value = matrix_of(ga.algebra_exp(h, 0.5))
    assert_allclose(value, np.diag([np.exp(0.5) - 1, np.e - 1]), atol=1e-12)


def test_determinant_of_constant_path(m2):
    value, lattice = ga.hs_determinant(ga.unitary_path(m2.zero()),
                                       matrix_trace(m2))
    assert abs(value) < 1e-12
    assert lattice == 1.0


def test_determinant_of_unitary_path(m2):
    h = from_matrix(m2, np.diag([1.0, 2.0]))
    value, _ = ga.hs_determinant(ga.unitary_path(h), matrix_trace(m2))
    assert_allclose(value, 3 / (2 * np.pi), atol=1e-9)


@pytest.mark.parametrize('k', [1, 3])
def test_determinant_of_closed_loop(m2, k):
    path = ga.looped_path(m2.zero(), m2.basis(0), k)
    value, _ = ga.hs_determinant(path, matrix_trace(m2))
    assert_allclose(value, k, atol=1e-10)


def test_path_velocity_matches_difference(m2):
    h = from_matrix(m2, np.array([[1.0, 0.5], [0.5, -1.0]]))
    path = ga.looped_path(h, m2.basis(0), 2)
    assert_allclose(ga.path_velocity(path, 0.3).coeffs,
                    ga.path_velocity(path.value, 0.3).coeffs, atol=1e-6)


def test_divergent_path_fails_quadrature(m2):
    unit = m2.unit()
    path = ga.AlgebraPath(lambda s: unit,
                          lambda s: unit * (1.0 / (s - 1.0 / 3) ** 2))
    with pytest.raises(common.QuadratureNonConvergence):
        ga.hs_determinant(path, matrix_trace(m2))


def test_regulator_of_unit(m2):
    model = ga.module_gauge_model(ga.copies_module(m2, 1, 1))
    theta = NCForm(m2, 2, {})
    result = ga.regulator(model, ga.unitary_path(m2.zero()), theta)
    assert_allclose(result.value, 1.0, atol=1e-12)
    assert result.path_id == 'default'


def test_regulator_needs_path_and_module(m2, chiral):
    model = ga.module_gauge_model(ga.copies_module(m2, 1, 1))
    theta = NCForm(m2, 2, {})
    with pytest.raises(common.PathMissing):
        ga.regulator(model, None, theta)
    with pytest.raises(common.BackendUnsupported):
        ga.regulator(chiral, ga.unitary_path(chiral.source.zero()),
                     NCForm(chiral.source, 2, {}))


def test_load_winding_loop():
    loop = ga.load_loop('{"kind": "winding", "k": 2, "grid": 32, '
                        '"window": 8}')
    assert loop.grid == 32
    assert_allclose(ga.index_via_anomaly(loop), 2, atol=1e-4)


def test_load_dressed_loop():
    doc = {'kind': 'winding', 'k': 1, 'grid': 32, 'window': 8,
           'amplitude': 0.3, 'dressing': {'-1': 0.5, '0': 0.4, '1': 0.5}}
    loop = ga.load_loop(doc)
    assert np.max(np.abs(loop.coeffs[:, 1:])) > 0.01
    assert_allclose(ga.index_via_anomaly(loop), 1, atol=1e-4)


def test_load_bott_loop():
    doc = {'kind': 'bott', 'algebra': 'm2', 'projector': [1, 0, 0, 0],
           'grid': 32, 'plus_copies': 2, 'minus_copies': 1}
    assert_allclose(ga.index_via_anomaly(ga.load_loop(doc)), 1, atol=1e-6)


def test_load_unknown_loop():
    with pytest.raises(common.ConfigInvalid):
        ga.load_loop({'kind': 'spiral'})


def test_transgression_sum_of_scalar_potential(m2):
    model = ga.module_gauge_model(ga.copies_module(m2, 1, 1))
    zero = np.zeros((model.size, model.size))
    assert ga.transgression_sum(model, 1, zero) == 0
    value = ga.transgression_sum(model, 1, 0.1 * np.eye(model.size))
    expected = -model.size * 1.05 / 11 ** 3 / 6 / common.SQRT_2PI_I
    assert_allclose(value, expected, rtol=1e-12)
