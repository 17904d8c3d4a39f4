"""
Experiment configs, the suite registry, report emission and regression
comparison of stored reports.
"""

import csv
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
import hashlib
import json
import os
import time
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np
from loguru import logger

from ncindex import common
from ncindex import conformal_lefschetz as lefschetz
from ncindex import gauge_anomaly
from ncindex import nc_forms
from ncindex import spectral_heat
from ncindex.algebra_core import circle_element
from ncindex.algebra_core import from_matrix
from ncindex.algebra_core import make_matrix_algebra
from ncindex.algebra_core import matrix_trace
from ncindex.algebra_core import named_algebra
from ncindex.fredholm_pairing import index_pairing
from ncindex.fredholm_pairing import operator_index_oracle
from ncindex.fredholm_pairing import toeplitz_module

__author__ = 'Tiziano Bettio'
__copyright__ = """
Copyright (c) 2020 Tiziano Bettio

Permission is hereby granted, free of charge, to any person obtaining a copy
of this software and associated documentation files (the "Software"), to deal
in the Software without restriction, including without limitation the rights
to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
copies of the Software, and to permit persons to whom the Software is
furnished to do so, subject to the following conditions:

The above copyright notice and this permission notice shall be included in all
copies or substantial portions of the Software.

THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
SOFTWARE.
"""
__license__ = 'MIT'
__version__ = '0.3'

RESERVED_KEYS = ('command', 'seed')
SEED_LIMIT = 2 ** 64
DRESSING_MODES = {-1: 0.5, 0: 0.4, 1: 0.5}


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(',', ':'))


def stable_hash(value: Any) -> str:
    return hashlib.sha256(canonical_json(value).encode('utf-8')).hexdigest()


# Records


@dataclass
class Check:
    """
    One verdict of a suite.

    Quantitative checks carry a target and pass iff the deviation of the
    value from it is at most the tolerance. Checks without a target are
    conditions decided by the suite.
    """
    name: str
    value: Optional[float]
    target: Optional[float] = None
    tolerance: Optional[float] = None
    passed: bool = False
    deviation: Optional[float] = None
    error: Optional[str] = None

    @classmethod
    def near(cls, name: str, value: complex, target: float,
             tolerance: float) -> 'Check':
        value = complex(value)
        deviation = float(abs(value - target))
        return cls(name, float(value.real), float(target), float(tolerance),
                   deviation <= tolerance, deviation)

    @classmethod
    def condition(cls, name: str, value: float, passed: bool) -> 'Check':
        return cls(name, float(value), passed=bool(passed))

    @classmethod
    def failure(cls, name: str, err: Exception) -> 'Check':
        return cls(name, None, error=f'{type(err).__name__}: {err}')


@dataclass
class Collector:
    """Checks and tables a suite fills in order."""
    checks: List[Check] = field(default_factory=list)
    tables: Dict[str, List[dict]] = field(default_factory=dict)

    def add(self, check: Check) -> None:
        level = 'INFO' if check.passed else 'WARNING'
        logger.log(level, f'{check.name}: {check.value} '
                          f'({"pass" if check.passed else "FAIL"})')
        self.checks.append(check)

    def row(self, table: str, **values) -> None:
        self.tables.setdefault(table, []).append(values)


@dataclass
class Report:
    """Result of one suite run."""
    command: str
    version: str
    config_hash: str
    checks: List[Check]
    wall_time: float = 0.0
    tables: Dict[str, List[dict]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def payload(self) -> dict:
        """Deterministic part of the report."""
        return {'command': self.command, 'version': self.version,
                'config_hash': self.config_hash,
                'checks': [asdict(c) for c in self.checks],
                'tables': self.tables, 'passed': self.passed}

    def to_dict(self) -> dict:
        out = self.payload()
        out['wall_time'] = self.wall_time
        return out

    def write(self, path: str, with_csv: Optional[bool] = None) -> None:
        """JSON report at path; one CSV per table next to it if enabled."""
        cfg = common.config()
        with_csv = cfg.getboolean('reports', 'csv') if with_csv is None \
            else with_csv
        folder = os.path.dirname(path)
        if folder:
            os.makedirs(folder, exist_ok=True)
        with open(path, 'w') as fhandler:
            json.dump(self.to_dict(), fhandler, sort_keys=True,
                      indent=cfg.getint('reports', 'indent'))
        logger.info(f'Report written to "{path}"')
        if not with_csv:
            return
        stem = os.path.splitext(path)[0]
        for name, rows in self.tables.items():
            keys = sorted({k for row in rows for k in row})
            with open(f'{stem}_{name}.csv', 'w', newline='') as fhandler:
                writer = csv.DictWriter(fhandler, fieldnames=keys)
                writer.writeheader()
                writer.writerows(rows)


# Suite registry


Runner = Callable[[Dict[str, Any], Optional[int], Collector], None]


@dataclass(frozen=True)
class Suite:
    name: str
    description: str
    runner: Runner
    schema: Dict[str, Dict[str, Any]]
    randomized: bool = False


SUITES: Dict[str, Suite] = {}


def suite(name: str, description: str, randomized: bool = False,
          **params: Tuple[str, Any]) -> Callable[[Runner], Runner]:
    """Register a runner under ``name`` with typed parameter defaults."""
    def register(runner: Runner) -> Runner:
        schema = {k: {'type': kind, 'default': default}
                  for k, (kind, default) in params.items()}
        SUITES[name] = Suite(name, description, runner, schema, randomized)
        return runner
    return register


def _as_list(raw, cast) -> List:
    if isinstance(raw, str):
        raw = [v for v in raw.split(',') if v.strip()]
    return [cast(v) for v in raw]


_COERCE = {'int': int, 'float': float, 'str': str,
           'ints': lambda raw: _as_list(raw, int),
           'floats': lambda raw: _as_list(raw, float)}


@dataclass
class ExperimentConfig:
    """Validated command, parameters and seed of a run."""
    command: str
    parameters: Dict[str, Any]
    seed: Optional[int] = None
    output_path: Optional[str] = None

    @classmethod
    def from_dict(cls, doc: Dict[str, Any], seed: Optional[int] = None,
                  output_path: Optional[str] = None) -> 'ExperimentConfig':
        """
        Parse a config document; ``seed`` overrides the document's seed.

        Unknown keys, unknown commands and randomized suites without a seed
        raise ConfigInvalid.
        """
        if not doc:
            raise common.ConfigInvalid('Empty experiment config')
        command = doc.get('command')
        if command not in SUITES:
            raise common.ConfigInvalid(f'Unknown command {command!r}')
        entry = SUITES[command]
        unknown = sorted(set(doc) - set(entry.schema) - set(RESERVED_KEYS))
        if unknown:
            raise common.ConfigInvalid(f'Unknown keys for {command}: '
                                       f'{", ".join(unknown)}')
        params = {}
        for key, spec in entry.schema.items():
            raw = doc.get(key, spec['default'])
            try:
                params[key] = _COERCE[spec['type']](raw)
            except (TypeError, ValueError) as err:
                raise common.ConfigInvalid(f'{key}: {err}') from None
        seed = doc.get('seed') if seed is None else seed
        if seed is not None:
            seed = int(seed)
            if not 0 <= seed < SEED_LIMIT:
                raise common.ConfigInvalid(f'Seed {seed} is not a 64-bit '
                                           f'unsigned integer')
        elif entry.randomized:
            raise common.ConfigInvalid(f'{command} is randomized and needs '
                                       f'a seed')
        return cls(command, params, seed, output_path)

    @property
    def config_hash(self) -> str:
        return stable_hash({'command': self.command,
                            'parameters': self.parameters,
                            'seed': self.seed})


def run(config: ExperimentConfig, strict: Optional[bool] = None) -> Report:
    """
    Run one suite. Suite errors become failed checks unless ``strict``,
    which lets them propagate.
    """
    strict = common.config().getboolean('base', 'strict') if strict is None \
        else strict
    entry = SUITES[config.command]
    out = Collector()
    logger.info(f'Running {config.command} (seed {config.seed})')
    start = time.perf_counter()
    try:
        entry.runner(config.parameters, config.seed, out)
    except (common.NcIndexError, ValueError, ArithmeticError,
            np.linalg.LinAlgError) as err:
        if strict:
            raise
        logger.error(f'{config.command} aborted: {err}')
        out.checks.append(Check.failure(config.command, err))
    wall = time.perf_counter() - start
    report = Report(config.command, common.__version__, config.config_hash,
                    out.checks, wall, out.tables)
    logger.info(f'{config.command} finished in {wall:.2f}s: '
                f'{"pass" if report.passed else "FAIL"}')
    return report


def suite_schemas() -> Dict[str, dict]:
    return {name: {'description': s.description, 'randomized': s.randomized,
                   'parameters': s.schema}
            for name, s in sorted(SUITES.items())}


def list_suites() -> str:
    """Available commands with their parameter schemas as JSON."""
    lines = []
    for name, doc in suite_schemas().items():
        seeded = ' [seeded]' if doc['randomized'] else ''
        lines.append(f'{name}{seeded}: {doc["description"]}')
        lines.append(f'  {json.dumps(doc["parameters"], sort_keys=True)}')
    return '\n'.join(lines)


# Regression


@dataclass
class RegressionSummary:
    """Rows of checks that drifted or changed status."""
    rows: List[dict]

    @property
    def flagged(self) -> List[str]:
        return [r['name'] for r in self.rows if r['flagged']]

    @property
    def clean(self) -> bool:
        return not self.flagged


def _load_report(path: str) -> dict:
    with open(path, 'r') as fhandler:
        doc = json.load(fhandler)
    missing = {'command', 'version', 'config_hash', 'checks'} - set(doc)
    if missing:
        raise common.SchemaMismatch(f'{path} lacks '
                                    f'{", ".join(sorted(missing))}')
    return doc


def regress(baseline_path: str, report_path: str) -> RegressionSummary:
    """
    Compare a report with its baseline.

    A check is flagged when it newly fails, disappears, or moved by more
    than its tolerance. Version changes are ignored; reports of different
    commands or configs do not compare.
    """
    base, new = _load_report(baseline_path), _load_report(report_path)
    if base['command'] != new['command']:
        raise common.SchemaMismatch(f'Commands differ: {base["command"]} vs '
                                    f'{new["command"]}')
    if base['config_hash'] != new['config_hash']:
        raise common.SchemaMismatch('Reports were run with different '
                                    'configs')
    old_checks = {c['name']: c for c in base['checks']}
    new_checks = {c['name']: c for c in new['checks']}
    rows = []
    for name in sorted(set(old_checks) | set(new_checks)):
        old, cur = old_checks.get(name), new_checks.get(name)
        if cur is None:
            rows.append({'name': name, 'status': 'removed', 'drift': None,
                         'flagged': True})
            continue
        if old is None:
            rows.append({'name': name, 'status': 'added', 'drift': None,
                         'flagged': not cur['passed']})
            continue
        drift = 0.0
        if old['value'] is not None and cur['value'] is not None:
            drift = abs(cur['value'] - old['value'])
        beyond = cur.get('tolerance') is not None \
            and drift > cur['tolerance']
        newly_failing = old['passed'] and not cur['passed']
        if drift == 0 and old['passed'] == cur['passed']:
            continue
        status = 'unchanged' if old['passed'] == cur['passed'] else (
            'failing' if newly_failing else 'fixed')
        rows.append({'name': name, 'status': status, 'drift': drift,
                     'flagged': bool(beyond or newly_failing)})
    summary = RegressionSummary(rows)
    for row in summary.rows:
        if row['flagged']:
            logger.warning(f'Regression in {row["name"]}: {row["status"]}, '
                           f'drift {row["drift"]}')
    logger.info(f'{len(rows)} changed checks, {len(summary.flagged)} flagged')
    return summary


# Suites


def _random_projector(n: int, rank: int,
                      rng: np.random.Generator) -> np.ndarray:
    mat = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q_mat, _ = np.linalg.qr(mat)
    frame = q_mat[:, :rank]
    return frame @ frame.conj().T


def _random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    mat = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (mat + mat.conj().T) / 2


def _winding(alg, k: int):
    return circle_element(alg, {k: 1.0})


@suite('forms-identities', 'b^2, B^2, bB + Bb and d^2 on random forms, '
       'closedness of Chern cycles of projectors', randomized=True,
       algebra=('str', 'm2'), N=('int', 6), samples=('int', 20),
       projectors=('int', 10))
def _forms_identities(params, seed, out):
    alg = named_algebra(params['algebra'])
    rng = np.random.default_rng(seed)
    top = params['N']
    worst = {'b^2': 0.0, 'B^2': 0.0, 'bB+Bb': 0.0, 'd^2': 0.0}
    for n in range(top + 1):
        for _ in range(params['samples']):
            x = nc_forms.random_form(alg, n, rng, top_degree=n + 2)
            b_x, cb_x = nc_forms.hochschild_b(x), nc_forms.connes_B(x)
            mixed = nc_forms.hochschild_b(cb_x) + nc_forms.connes_B(b_x)
            found = {'b^2': nc_forms.hochschild_b(b_x).max_abs(),
                     'B^2': nc_forms.connes_B(cb_x).max_abs(),
                     'bB+Bb': mixed.max_abs(),
                     'd^2': nc_forms.d(nc_forms.d(x)).max_abs()}
            for key, value in found.items():
                worst[key] = max(worst[key], value)
        out.row('residuals', degree=n, **{k: v for k, v in worst.items()})
    for key, value in worst.items():
        out.add(Check.near(f'{key} residual', value, 0.0, 1e-12))
    if alg.kind != 'matrix' or params['projectors'] == 0:
        return
    defect = 0.0
    for _ in range(params['projectors']):
        rank = int(rng.integers(1, alg.order)) if alg.order > 1 else 1
        e = from_matrix(alg, _random_projector(alg.order, rank, rng))
        chern = nc_forms.chern_idempotent(e, top + 1)
        residual = nc_forms.boundary(chern).max_abs(below=top + 1)
        defect = max(defect, residual)
    out.add(Check.near('chern cycle boundary', defect, 0.0, 1e-10))


@suite('toeplitz', 'chi pairing with the winding k loop on a mode window '
       'against the operator index', k=('int', 1), window=('int', 64))
def _toeplitz(params, seed, out):
    k = params['k']
    module = toeplitz_module(params['window'], max(1, abs(k)))
    u = _winding(module.source, k)
    value = index_pairing(module, u, common.ClassKind.INVERTIBLE)
    out.add(Check.near(f'toeplitz index k={k}', value, k, 1e-9))
    oracle = operator_index_oracle(module, u)
    out.add(Check.near(f'toeplitz oracle k={k}', -oracle, k, 0.0))


@suite('jlo', 'JLO pairing of winding loops, its t independence and the '
       'Monte Carlo cross check of the heat integrals', randomized=True,
       ks=('ints', '-2, -1, 1, 2'), window=('int', 64),
       ts=('floats', '0.5, 1, 2'), mc_samples=('int', 20000))
def _jlo(params, seed, out):
    ks = params['ks']
    triple = spectral_heat.circle_triple(params['window'],
                                         max([1] + [abs(k) for k in ks]))
    for k in ks:
        u = _winding(triple.source, k)
        value = spectral_heat.jlo_pairing(triple, u, params['ts'][0])
        out.row('pairings', k=k, real=value.real, imag=value.imag)
        out.add(Check.near(f'jlo pairing k={k}', value, k, 1e-6))
        spread = spectral_heat.jlo_pairing_t_independence(triple, u,
                                                          params['ts'])
        out.add(Check.near(f'jlo t spread k={k}', spread, 0.0, 1e-6))
        _, _, diff = spectral_heat.retraction_compare(triple, u,
                                                      t=params['ts'][0])
        out.add(Check.near(f'jlo vs chi k={k}', diff, 0.0, 1e-6))
    rng = np.random.default_rng(seed)
    alg = make_matrix_algebra(2)
    dense = spectral_heat.random_triple(alg, 4, common.Parity.ODD, rng)
    slots = [alg.element(rng.standard_normal(alg.dim)) for _ in range(2)]
    exact = spectral_heat.jlo(dense, 1, 1.0, slots)
    estimate, stderr = spectral_heat.duhamel_monte_carlo(
        dense, 1, 1.0, slots, params['mc_samples'], rng)
    out.add(Check.near('monte carlo heat integral', estimate - exact, 0.0,
                       3 * stderr))


@suite('residue', 'Residue cocycle pairing with winding loops',
       ks=('ints', '-1, 1, 2'), window=('int', 64))
def _residue(params, seed, out):
    ks = params['ks']
    degree = max([1] + [abs(k) for k in ks])
    triple = spectral_heat.circle_triple(params['window'], degree)
    for k in ks:
        value = spectral_heat.residue_pairing(
            triple, _winding(triple.source, k))
        out.row('pairings', k=k, real=value.real, imag=value.imag)
        out.add(Check.near(f'residue pairing k={k}', value, k, 1e-9))


@suite('anomaly', 'Index as the loop integral of the anomaly, both '
       'anomaly evaluations and counterterm invariance', randomized=True,
       ks=('ints', '-2, -1, 0, 1, 2'), window=('int', 64),
       grid=('int', 128), amplitude=('float', 0.3))
def _anomaly(params, seed, out):
    rng = np.random.default_rng(seed)
    model = gauge_anomaly.chiral_circle_model(params['window'])
    for k in params['ks']:
        loop = gauge_anomaly.winding_loop(model, k, params['grid'])
        result = gauge_anomaly.anomaly(loop)
        value = np.sum(result.from_action) / loop.grid / (2j * np.pi)
        out.row('indices', k=k, real=value.real, imag=value.imag,
                deviation=result.max_deviation)
        out.add(Check.near(f'anomaly index k={k}', value, k, 1e-4))
        out.add(Check.near(f'anomaly paths k={k}', result.max_deviation,
                           0.0, 1e-5))
        coefficients = list(rng.standard_normal(model.p + 1))
        shifted = gauge_anomaly.index_via_anomaly(loop, coefficients)
        out.add(Check.near(f'counterterm shift k={k}', shifted - value, 0.0,
                           1e-6))
        dressed = gauge_anomaly.winding_loop(
            model, k, params['grid'], params['amplitude'],
            circle_element(model.source, DRESSING_MODES))
        result = gauge_anomaly.anomaly(dressed)
        out.add(Check.near(f'dressed anomaly paths k={k}',
                           result.max_deviation, 0.0, 1e-5))


@suite('determinant', 'Hilbert-Schmidt determinant of loops and its '
       'additivity', randomized=True, algebra=('str', 'm2'), k=('int', 1))
def _determinant(params, seed, out):
    scalar = named_algebra('c')
    path = gauge_anomaly.unitary_path(scalar.unit() * (2 * np.pi))
    value, _ = gauge_anomaly.hs_determinant(path, matrix_trace(scalar))
    out.add(Check.near('determinant of exp(2 pi i s)', value, 1.0, 1e-10))
    alg = named_algebra(params['algebra'])
    rng = np.random.default_rng(seed)
    h = from_matrix(alg, _random_hermitian(alg.order, rng))
    rank = max(1, alg.order // 2)
    e = from_matrix(alg, _random_projector(alg.order, rank, rng))
    tau = matrix_trace(alg)
    looped, _ = gauge_anomaly.hs_determinant(
        gauge_anomaly.looped_path(h, e, params['k']), tau)
    expected = tau(h) / (2 * np.pi) + params['k'] * rank
    out.add(Check.near('determinant additivity', looped - expected, 0.0,
                       1e-9))


def _random_germ(rng: np.random.Generator, order: int):
    coeffs = rng.standard_normal(order + 3) + 1j * rng.standard_normal(
        order + 3)
    coeffs[0] = 0.0
    coeffs[1:order] = 0.0
    coeffs[1] += 1.0
    if order == 1:
        coeffs[1] = 1.0 + (1.5 + rng.uniform()) * np.exp(
            2j * np.pi * rng.uniform())
    return lefschetz.germ(coeffs)


@suite('lefschetz', 'Fixed point contributions: jet engine against the '
       'listed closed forms, the Cauchy kernel oracle and affine charts',
       randomized=True, maps=('int', 50))
def _lefschetz(params, seed, out):
    rng = np.random.default_rng(seed)
    near = lefschetz.Region.square(0.5)
    for order in (1, 2):
        worst = 0.0
        for _ in range(params['maps']):
            g = _random_germ(rng, order)
            a = lefschetz.random_test_function(rng)
            fp = lefschetz.find_fixed_points(g, near)[0]
            jet = lefschetz.lefschetz_contribution(g, fp, a)
            listed = lefschetz.closed_form_contribution(g, fp, a)
            worst = max(worst, abs(jet - listed) / max(1.0, abs(jet)))
        out.add(Check.near(f'closed form order {order}', worst, 0.0, 1e-12))
    g = _random_germ(rng, 3)
    a = lefschetz.random_test_function(rng)
    row = lefschetz.discrepancy_report(g, lefschetz.find_fixed_points(
        g, near)[0], a)
    out.row('discrepancy', order=3, jet_real=row['jet'][0],
            jet_imag=row['jet'][1], listed_real=row['listed'][0],
            listed_imag=row['listed'][1])
    out.add(Check.near('order 3 listed/jet ratio', complex(*row['ratio']),
                       0.5, 1e-9))

    doubling = lefschetz.polynomial_map([0.0, 2.0])
    bump = lefschetz.TestFunction.gaussian(1.0)
    fp = lefschetz.find_fixed_points(doubling, near)[0]
    jet = lefschetz.lefschetz_contribution(doubling, fp, bump)
    oracle = lefschetz.cauchy_quadrature_oracle(doubling, bump)
    out.add(Check.near('cauchy oracle', oracle - jet, 0.0,
                       common.tol('quadrature')))

    alpha = rng.uniform(0.5, 2.0) * np.exp(2j * np.pi * rng.uniform())
    beta = complex(*rng.normal(size=2))
    chart = lefschetz.affine_chart(alpha, beta)
    g = lefschetz.polynomial_map([0.0, 1.0, 1.0 + 0.5j, 0.25])
    moved = lefschetz.compose_maps(lefschetz.compose_maps(chart, g),
                                   lefschetz.inverse(chart))
    a = lefschetz.random_test_function(rng)
    before = lefschetz.lefschetz_contribution(
        g, lefschetz.find_fixed_points(g, near)[0], a)
    target = lefschetz.find_fixed_points(
        moved, lefschetz.Region.square(0.5, beta))
    fp = min(target, key=lambda r: abs(r.z0 - beta))
    after = lefschetz.lefschetz_contribution(
        moved, fp, lefschetz.pull_back(a, lefschetz.inverse(chart)))
    out.add(Check.near('affine chart invariance', after - before, 0.0,
                       1e-10))


def _random_affine(rng: np.random.Generator, name: str):
    scale = rng.uniform(1.3, 2.0) * np.exp(2j * np.pi * rng.uniform())
    shift = complex(*rng.normal(scale=0.3, size=2))
    return lefschetz.moebius(scale, shift, 0.0, 1.0, label=name)


@suite('trace-check', 'Phi(xy) = Phi(yx) on random pairs of affine '
       'Moebius terms', randomized=True, pairs=('int', 20))
def _trace_check(params, seed, out):
    rng = np.random.default_rng(seed)
    region = lefschetz.Region.square(10.0)
    worst = 0.0
    for _ in range(params['pairs']):
        x = lefschetz.GroupoidElement.single(
            _random_affine(rng, 'g'), lefschetz.random_test_function(rng))
        y = lefschetz.GroupoidElement.single(
            _random_affine(rng, 'h'), lefschetz.random_test_function(rng))
        worst = max(worst, lefschetz.trace_property_check(x, y, region))
    out.add(Check.near('trace property', worst, 0.0, 1e-8))


@suite('todd', 'Cocycle properties of the fixed manifold classes and the '
       'connection form of the Todd class', randomized=True,
       trials=('int', 20))
def _todd(params, seed, out):
    for kind in ('fundamental', 'chern1', 'todd'):
        defect = lefschetz.cocycle_property_check(kind, params['trials'],
                                                  seed)
        out.add(Check.near(f'{kind} cocycle defect', defect, 0.0, 1e-6))
    rng = np.random.default_rng(seed)
    ident = lefschetz.moebius(1.0, 0.0, 0.0, 1.0, label='e')
    worst = 0.0
    for _ in range(params['trials']):
        a = [lefschetz.GroupoidElement.single(
            ident, lefschetz.random_test_function(rng)) for _ in range(3)]
        worst = max(worst, abs(lefschetz.todd_pair('todd', *a)
                               - lefschetz.todd_nabla(*a)))
    out.add(Check.near('todd vs connection form', worst, 0.0, 1e-8))


@suite('bott', 'Pairing of the fundamental class with the Bott projector',
       randomized=True, angles=('int', 64))
def _bott(params, seed, out):
    value = lefschetz.bott_pairing(angles=params['angles'])
    out.add(Check.near('bott pairing', value, 1.0, 1e-6))
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    unitary, _ = np.linalg.qr(mat)
    rotated = lefschetz.bott_pairing(lefschetz.BottProjector(unitary),
                                     params['angles'])
    out.add(Check.near('bott pairing conjugated', rotated, 1.0, 1e-6))


@suite('schatten', 'Schatten sums of the propagated Cauchy kernel under '
       'grid refinement', grids=('ints', '48, 64'), alpha=('float', -1.5))
def _schatten(params, seed, out):
    cfg = common.config()
    bump = lefschetz.TestFunction.gaussian(1.0)
    change = lefschetz.schatten_refinement(bump, params['grids'],
                                           params['alpha'])
    converging = cfg.getfloat('lefschetz', 'schatten_tolerance')
    diverging = cfg.getfloat('lefschetz', 'schatten_divergence')
    for p, value in sorted(change.items()):
        out.row('refinement', p=p, relative_change=value)
        if p > 2:
            out.add(Check.near(f'schatten p={p} refinement', value, 0.0,
                               converging))
        else:
            out.add(Check.condition(f'schatten p={p} divergence trend',
                                    value, value > diverging))
