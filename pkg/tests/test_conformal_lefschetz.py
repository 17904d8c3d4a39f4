"""Tests for conformal maps, fixed points and the Lefschetz trace."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ncindex import common
from ncindex import conformal_lefschetz as cl
from ncindex.conformal_lefschetz import Jet
from ncindex.conformal_lefschetz import Region
from ncindex.conformal_lefschetz import TestFunction


@pytest.fixture
def bump():
    return TestFunction.gaussian(1.0, 0j)


def _only_fixed_point(g, region):
    records = cl.find_fixed_points(g, region)
    assert len(records) == 1
    return records[0]


def test_jet_quotient():
    num = Jet(0j, [1, 1, 0, 0])
    den = Jet(0j, [1, -1, 0, 0])
    assert_allclose((num / den).coeffs, [1, 2, 2, 2])


def test_jet_quotient_divides_valuation():
    quot = Jet(0j, [0, 0, 1]) / Jet(0j, [0, 1, 1])
    assert_allclose(quot.coeffs, [0, 1])
    with pytest.raises(ValueError):
        Jet(0j, [1, 0, 0]) / Jet(0j, [0, 1, 0])
    with pytest.raises(ZeroDivisionError):
        Jet(0j, [1, 0]) / Jet(0j, [0, 0])


def test_smooth_function_is_abstract(bump):
    with pytest.raises(TypeError):
        cl.SmoothFunction()  # pylint: disable=abstract-class-instantiated
    assert isinstance(bump * bump, cl.SmoothFunction)


def test_jet_compose():
    outer = Jet(1 + 0j, [0, 0, 1, 0])
    inner = Jet(0j, [1, 1, 1, 0])
    assert_allclose(outer.compose(inner).coeffs, [0, 0, 1, 2])


def test_jets_at_different_points():
    with pytest.raises(ValueError):
        Jet(0j, [1]) + Jet(1 + 0j, [1])


@pytest.mark.parametrize('g, order', [
    (cl.polynomial_map([0, 2]), 1),
    (cl.moebius(1, 0, -1, 1), 2),
    (cl.polynomial_map([0, 1, 0, 1]), 3),
])
def test_fixed_point_orders(g, order):
    fp = _only_fixed_point(g, Region.square(0.5))
    assert abs(fp.z0) < 1e-8
    assert fp.order == order
    assert fp.to_dict()['order'] == order


def test_identity_has_no_isolated_fixed_points():
    assert cl.find_fixed_points(cl.moebius(1, 0, 0, 1), Region.square(1)) \
        == []


def test_moebius_pole_is_excluded():
    g = cl.moebius(2, 1, 1, 3)
    assert not g.in_domain(-3 + 0j)
    assert g.in_domain(0j)


def test_compose_with_inverse():
    g = cl.moebius(2, 1, 1, 3)
    assert cl.compose_maps(g, cl.inverse(g)).is_identity
    affine = cl.polynomial_map([1, 2])
    assert_allclose(cl.compose_maps(affine, cl.inverse(affine)).params,
                    [0, 1])


def test_constant_map_is_rejected():
    with pytest.raises(ValueError):
        cl.polynomial_map([3])
    with pytest.raises(ValueError):
        cl.moebius(1, 1, 1, 1)


def test_contribution_of_expanding_map(bump):
    g = cl.polynomial_map([0, 2])
    fp = _only_fixed_point(g, Region.square(1))
    assert_allclose(cl.lefschetz_contribution(g, fp, bump), -1.0)
    assert_allclose(cl.closed_form_contribution(g, fp, bump), -1.0)


def test_contribution_of_identity_point(bump):
    g = cl.polynomial_map([0, 2])
    fp = cl.FixedPointRecord(0j, None, g)
    assert cl.lefschetz_contribution(g, fp, bump) == 0


def test_order_mismatch(bump):
    g = cl.polynomial_map([0, 2])
    with pytest.raises(common.OrderMismatch):
        cl.lefschetz_contribution(g, cl.FixedPointRecord(0j, 2, g), bump)


def test_no_closed_form_past_order_three(bump):
    g = cl.polynomial_map([0, 1, 0, 0, 0, 1])
    with pytest.raises(common.DegreeUnsupported):
        cl.closed_form_contribution(g, cl.FixedPointRecord(0j, 4, g), bump)


def test_closed_form_of_order_two(rng):
    g = cl.polynomial_map([0, 1, 0.5 + 0.2j, 0.3])
    fp = _only_fixed_point(g, Region.square(0.5))
    a = cl.random_test_function(rng)
    report = cl.discrepancy_report(g, fp, a)
    assert report['order'] == 2
    assert_allclose(complex(*report['ratio']), 1.0, atol=1e-10)


def test_closed_form_of_order_three_is_half(rng):
    g = cl.polynomial_map([0, 1, 0, 0.5, 0.2])
    fp = _only_fixed_point(g, Region.square(0.5))
    a = cl.random_test_function(rng)
    report = cl.discrepancy_report(g, fp, a)
    assert report['order'] == 3
    assert_allclose(complex(*report['ratio']), 0.5, atol=1e-9)


def test_affine_chart_invariance(rng):
    g = cl.polynomial_map([0, 1, 1 + 0.5j, 0.25])
    a = cl.random_test_function(rng)
    chart = cl.affine_chart(1.3 * np.exp(0.4j), 0.3 - 0.2j)
    moved = cl.compose_maps(cl.inverse(chart), cl.compose_maps(g, chart))
    start = cl.inverse(chart)(0j)
    fp = _only_fixed_point(g, Region.square(0.5))
    fp_moved = _only_fixed_point(moved, Region.square(0.5, start))
    value = cl.lefschetz_contribution(g, fp, a)
    value_moved = cl.lefschetz_contribution(moved, fp_moved,
                                            cl.pull_back(a, chart))
    assert_allclose(value_moved, value, rtol=1e-9)


def test_modular_factor():
    g = cl.moebius(2, 1, 1, 3)
    assert_allclose(cl.MapLogDerivative(g).value(1 + 0j), -0.5)
    affine = cl.polynomial_map([0.3, 2])
    assert cl.MapLogDerivative(affine).value(0.7 + 0j) == 0


def test_modular_delta_raises_form_degree(bump):
    x = cl.GroupoidElement.single(cl.moebius(2, 1, 1, 3), bump)
    assert cl.modular_delta(x).form_degree == 1


def test_phi_trace(bump):
    x = cl.GroupoidElement.single(cl.polynomial_map([0, 2]), bump)
    assert_allclose(cl.phi_trace(x, Region.square(2)), -1.0)


def test_trace_property():
    x = cl.GroupoidElement.single(cl.moebius(2, 0.5, 0, 1),
                                  TestFunction.gaussian(1.0, 0.2))
    y = cl.GroupoidElement.single(cl.moebius(1.5j, -0.3, 0, 1),
                                  TestFunction.gaussian(1.5, -0.1j))
    assert cl.trace_property_check(x, y, Region.square(10)) < 1e-8


def test_support_violation(bump):
    g = cl.moebius(1, 0, 1, 1, exclusions=((-1 + 0j, 0.5),))
    with pytest.raises(common.SupportViolation):
        cl.GroupoidElement.single(g, TestFunction.gaussian(1.0, -1.0))


@pytest.mark.slow
def test_cauchy_oracle_of_expanding_map(bump):
    value = cl.cauchy_quadrature_oracle(cl.polynomial_map([0, 2]), bump)
    assert_allclose(value, -1.0, atol=1e-6)


@pytest.mark.parametrize('kind', ['fundamental', 'chern1', 'todd'])
def test_cocycle_property(kind):
    assert cl.cocycle_property_check(kind, trials=5) < 1e-6


def test_todd_on_identity_components(rng):
    ident = cl.moebius(1, 0, 0, 1)
    a = [cl.GroupoidElement.single(ident, cl.random_test_function(rng))
         for _ in range(3)]
    todd = cl.todd_pair('todd', *a)
    assert_allclose(todd, cl.todd_pair('fundamental', *a), atol=1e-10)
    assert_allclose(cl.todd_nabla(*a), todd, atol=1e-8)


def test_todd_needs_identity_components(bump):
    x = cl.GroupoidElement.single(cl.polynomial_map([0, 2]), bump)
    with pytest.raises(common.UnsupportedFixedManifold):
        cl.todd_pair('todd', x, x, x)


def test_bott_pairing(rng):
    assert_allclose(cl.bott_pairing(), 1.0, atol=1e-6)
    mat = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    unitary, _ = np.linalg.qr(mat)
    assert_allclose(cl.bott_pairing(cl.BottProjector(unitary)), 1.0,
                    atol=1e-6)
    constant = cl.ConstantProjector(np.diag([1.0, 0.0]))
    assert abs(cl.bott_pairing(constant)) < 1e-12


def test_schatten_of_zero_function():
    zero = TestFunction.gaussian(poly=np.zeros((1, 1)))
    report = cl.schatten_decay_check(zero, grid=8)
    assert np.all(report.singular_values == 0)
    assert all(total == 0 for total in report.totals.values())


def test_schatten_sums_grow(bump):
    report = cl.schatten_decay_check(bump, grid=12, powers=[2.0, 4.0])
    assert np.all(np.diff(report.singular_values) <= 0)
    for sums in report.partial_sums.values():
        assert np.all(np.diff(sums) >= 0)


@pytest.mark.slow
def test_schatten_refinement(bump):
    change = cl.schatten_refinement(bump)
    assert change[4.0] < change[2.0]


def _scene_doc():
    return {'maps': {'g': {'kind': 'polynomial', 'params': [[0, 0], [2, 0]]}},
            'functions': {'a': {'terms': [{'alpha': 1.0}]}},
            'element': [{'map': 'g', 'function': 'a'}],
            'region': [-2, 2, -2, 2]}


def test_load_scene():
    report = cl.load_scene(_scene_doc()).report()
    assert len(report['fixed_points']) == 1
    assert_allclose(report['phi'], [-1.0, 0.0], atol=1e-12)


def test_malformed_scene():
    doc = _scene_doc()
    del doc['maps']
    with pytest.raises(common.ConfigInvalid):
        cl.load_scene(doc)
    doc = _scene_doc()
    doc['maps']['g']['kind'] = 'spiral'
    with pytest.raises(common.ConfigInvalid):
        cl.load_scene(doc)
