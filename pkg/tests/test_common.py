"""Tests for configuration, tolerances and shared types."""

import configparser

import pytest

from ncindex import common


def test_integer_verdict():
    verdict = common.IntegerVerdict.of(2.9999999 + 1e-9j)
    assert verdict.nearest == 3
    assert verdict.residual < 1e-6
    assert common.IntegerVerdict.of(-1.2).nearest == -1


def test_parity_of():
    assert common.Parity.of(3) == common.Parity.ODD
    assert common.Parity.of(0) == common.Parity.EVEN


def test_tolerances_from_defaults():
    assert common.tol('integer') == pytest.approx(1e-6)
    assert common.tol('newton') == pytest.approx(1e-12)
    assert common.float_list('lefschetz', 'schatten_powers') \
        == [2.0, 2.5, 3.0, 4.0]


def test_missing_config_is_written(tmp_path):
    path = tmp_path / 'ncindex.ini'
    cfg = common.load_config(str(path))
    assert path.is_file()
    written = configparser.ConfigParser()
    written.read(str(path))
    assert written.get('base', 'seed') == cfg.get('base', 'seed')


def test_config_file_overrides(tmp_path):
    path = tmp_path / 'ncindex.ini'
    path.write_text('[tolerances]\ninteger = 1e-3\n')
    common.use_config(common.load_config(str(path)))
    assert common.tol('integer') == pytest.approx(1e-3)
    assert common.tol('newton') == pytest.approx(1e-12)


def test_errors_share_a_base():
    for err in (common.Singular, common.ConfigInvalid, common.SchemaMismatch,
                common.OrderMismatch, common.NonSummable):
        assert issubclass(err, common.NcIndexError)


def test_integer_verdict_uses_tolerance():
    assert common.IntegerVerdict.of(2.0 + 1e-8).integral
    assert not common.IntegerVerdict.of(2.01).integral
