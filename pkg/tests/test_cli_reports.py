"""Tests for experiment configs, suites, reports and regressions."""

import json
import os
import sys

import pytest
from loguru import logger

from ncindex import cli_reports
from ncindex import common
from ncindex import main
from ncindex.cli_reports import Check
from ncindex.cli_reports import ExperimentConfig

SMALL_FORMS = {'command': 'forms-identities', 'algebra': 'm2', 'N': 2,
               'samples': 2, 'projectors': 2, 'seed': 42}


@pytest.fixture(autouse=True)
def restore_logger():
    """main() rebinds the loguru sink to the captured stderr."""
    yield
    logger.remove()
    logger.add(lambda message: sys.stderr.write(message))


def _write_report(report, path):
    report.write(str(path))
    return str(path)


def test_check_near_uses_complex_deviation():
    check = Check.near('x', 1 + 1e-7j, 1.0, 1e-6)
    assert check.passed
    assert check.value == 1.0
    assert check.deviation == pytest.approx(1e-7)
    assert not Check.near('y', 1.1, 1.0, 1e-6).passed


def test_stable_hash_ignores_key_order():
    assert cli_reports.stable_hash({'a': 1, 'b': 2}) \
        == cli_reports.stable_hash({'b': 2, 'a': 1})


def test_toeplitz_suite():
    config = ExperimentConfig.from_dict({'command': 'toeplitz', 'k': 1,
                                         'window': 64})
    report = cli_reports.run(config)
    assert report.passed
    assert report.checks[0].value == pytest.approx(1.0, abs=1e-9)


def test_forms_suite_writes_tables(tmp_path):
    report = cli_reports.run(ExperimentConfig.from_dict(SMALL_FORMS))
    assert report.passed
    path = tmp_path / 'forms.json'
    report.write(str(path), with_csv=True)
    doc = json.loads(path.read_text())
    assert doc['passed']
    assert doc['command'] == 'forms-identities'
    assert os.path.exists(tmp_path / 'forms_residuals.csv')


def test_defaults_are_coerced():
    config = ExperimentConfig.from_dict({'command': 'jlo', 'seed': 1})
    assert config.parameters['ks'] == [-2, -1, 1, 2]
    assert config.parameters['ts'] == [0.5, 1.0, 2.0]


@pytest.mark.parametrize('doc', [
    {},
    {'command': 'nonsense'},
    {'command': 'toeplitz', 'kk': 1},
    {'command': 'toeplitz', 'k': 'one'},
    {'command': 'anomaly', 'seed': -1},
    {'command': 'anomaly', 'seed': 2 ** 64},
    {'command': 'anomaly'},
])
def test_invalid_configs(doc):
    with pytest.raises(common.ConfigInvalid):
        ExperimentConfig.from_dict(doc)


def test_seed_argument_overrides_document():
    config = ExperimentConfig.from_dict({'command': 'anomaly', 'seed': 1}, 7)
    assert config.seed == 7


def test_config_hash():
    first = ExperimentConfig.from_dict({'command': 'toeplitz', 'k': 1})
    second = ExperimentConfig.from_dict({'command': 'toeplitz', 'k': 1,
                                         'window': 64})
    third = ExperimentConfig.from_dict({'command': 'toeplitz', 'k': 2})
    assert first.config_hash == second.config_hash
    assert first.config_hash != third.config_hash


def test_suite_errors_become_failures():
    config = ExperimentConfig.from_dict({'command': 'toeplitz', 'k': 3,
                                         'window': 2})
    report = cli_reports.run(config, strict=False)
    assert not report.passed
    assert report.checks[-1].error.startswith('ValueError')
    with pytest.raises(ValueError):
        cli_reports.run(config, strict=True)


def test_list_suites():
    listing = cli_reports.list_suites()
    assert 'toeplitz:' in listing
    assert 'lefschetz [seeded]:' in listing
    assert set(cli_reports.suite_schemas()) == set(cli_reports.SUITES)


def test_regress_identical_reports(tmp_path):
    report = cli_reports.run(ExperimentConfig.from_dict(SMALL_FORMS))
    base = _write_report(report, tmp_path / 'base.json')
    new = _write_report(report, tmp_path / 'new.json')
    summary = cli_reports.regress(base, new)
    assert summary.rows == []
    assert summary.clean


def test_regress_ignores_version(tmp_path):
    config = ExperimentConfig.from_dict({'command': 'toeplitz', 'k': 1,
                                         'window': 16})
    report = cli_reports.run(config)
    base = _write_report(report, tmp_path / 'base.json')
    report.version = '99.0'
    new = _write_report(report, tmp_path / 'new.json')
    assert cli_reports.regress(base, new).clean


def test_regress_flags_drift(tmp_path):
    config = ExperimentConfig.from_dict({'command': 'toeplitz', 'k': 1,
                                         'window': 16})
    report = cli_reports.run(config)
    base = _write_report(report, tmp_path / 'base.json')
    report.checks[0] = Check.near(report.checks[0].name, 1.5, 1.0, 1e-9)
    new = _write_report(report, tmp_path / 'new.json')
    summary = cli_reports.regress(base, new)
    assert summary.flagged == [report.checks[0].name]
    assert summary.rows[0]['status'] == 'failing'


def test_regress_flags_removed_checks(tmp_path):
    config = ExperimentConfig.from_dict({'command': 'toeplitz', 'k': 1,
                                         'window': 16})
    report = cli_reports.run(config)
    base = _write_report(report, tmp_path / 'base.json')
    removed = report.checks.pop()
    new = _write_report(report, tmp_path / 'new.json')
    assert cli_reports.regress(base, new).flagged == [removed.name]


def test_regress_needs_matching_reports(tmp_path):
    toeplitz = cli_reports.run(ExperimentConfig.from_dict(
        {'command': 'toeplitz', 'k': 1, 'window': 16}))
    other = cli_reports.run(ExperimentConfig.from_dict(
        {'command': 'toeplitz', 'k': 2, 'window': 16}))
    base = _write_report(toeplitz, tmp_path / 'base.json')
    new = _write_report(other, tmp_path / 'new.json')
    with pytest.raises(common.SchemaMismatch):
        cli_reports.regress(base, new)
    broken = tmp_path / 'broken.json'
    broken.write_text('{"command": "toeplitz"}')
    with pytest.raises(common.SchemaMismatch):
        cli_reports.regress(base, str(broken))


def test_main_list(tmp_path, capsys):
    ini = str(tmp_path / 'ncindex.ini')
    assert main.main(['--ini', ini, 'list']) == 0
    assert 'toeplitz' in capsys.readouterr().out
    assert os.path.exists(ini)


def test_main_runs_and_regresses(tmp_path):
    ini = str(tmp_path / 'ncindex.ini')
    config = tmp_path / 'toeplitz.json'
    config.write_text(json.dumps({'command': 'toeplitz', 'k': -1,
                                  'window': 16}))
    report = tmp_path / 'reports' / 'toeplitz.json'
    out = str(report)
    assert main.main(['--ini', ini, 'toeplitz', '--config', str(config),
                      '--out', out]) == 0
    doc = json.loads(report.read_text())
    assert doc['passed']
    assert main.main(['--ini', ini, 'regress', out, out]) == 0


def test_main_rejects_config_of_other_command(tmp_path):
    ini = str(tmp_path / 'ncindex.ini')
    config = tmp_path / 'bott.json'
    config.write_text(json.dumps({'command': 'bott'}))
    assert main.main(['--ini', ini, 'toeplitz', '--config',
                      str(config)]) == 2


@pytest.mark.slow
@pytest.mark.parametrize('command', ['toeplitz', 'residue', 'anomaly',
                                     'determinant', 'trace-check', 'todd',
                                     'bott'])
def test_suite_defaults_pass(command):
    config = ExperimentConfig.from_dict({'command': command}, seed=42)
    assert cli_reports.run(config).passed
