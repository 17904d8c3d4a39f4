"""
Common constants, configuration defaults, types and errors.
"""

import configparser
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
import os
from typing import Optional

from loguru import logger

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

# Global Constants
SQRT_2PI_I = complex(1.0, 1.0) * 1.7724538509055159  # sqrt(2*pi*i)
ODD_TRACE_FACTOR = complex(-1.0, -1.0)                 # C1 supertrace factor
ZERO_MODE_EIGENVALUE = 0.5

# Paths
CONFIG_FILE = 'ncindex.ini'

# Config
DEFAULTCONFIG = {
    'base': OrderedDict([('log_level', 'INFO'), ('seed', '42'),
                         ('strict', 'False'), ('out_dir', 'reports/')]),
    'tolerances': OrderedDict([('associativity', '1e-12'),
                               ('unit', '1e-12'),
                               ('trace', '1e-10'),
                               ('invert_residual', '1e-8'),
                               ('idempotent', '1e-10'),
                               ('homomorphism', '1e-10'),
                               ('involution', '1e-12'),
                               ('rank_cutoff', '1e-9'),
                               ('coincide', '1e-8'),
                               ('integer', '1e-6'),
                               ('jet_valuation', '1e-10'),
                               ('newton', '1e-12'),
                               ('root_residual', '1e-10'),
                               ('quadrature', '1e-4')]),
    'heat': OrderedDict([('t', '1.0'), ('max_degree', '61'),
                         ('term_tolerance', '1e-14'),
                         ('monte_carlo_samples', '100000'),
                         ('monte_carlo_chunk', '10000'),
                         ('k_max', '6')]),
    'anomaly': OrderedDict([('grid', '128'), ('window', '64'),
                            ('residue_k_max', '2')]),
    'lefschetz': OrderedDict([('start_grid', '40'), ('newton_steps', '200'),
                              ('schatten_grids', '48, 64'),
                              ('schatten_powers', '2, 2.5, 3, 4'),
                              ('schatten_alpha', '-1.5'),
                              ('schatten_box', '4.0'),
                              ('schatten_tolerance', '0.02'),
                              ('schatten_divergence', '0.1')]),
    'reports': OrderedDict([('csv', 'False'), ('indent', '2')])
}

# Types


class Parity(Enum):
    """Parity of modules, cochains and K-theory classes."""
    EVEN = 0
    ODD = 1

    @classmethod
    def of(cls, n: int) -> 'Parity':
        """Parity of the integer ``n``."""
        return cls.EVEN if n % 2 == 0 else cls.ODD


class Backend(Enum):
    """Evaluation backend of spectral data."""
    DENSE = 'dense'
    CIRCLE_EXACT = 'circle_exact'


class ClassKind(Enum):
    """Kind of K-theory representative."""
    IDEMPOTENT = 'idempotent'
    INVERTIBLE = 'invertible'


@dataclass
class IntegerVerdict:
    """
    Nearest integer of a numerically integral quantity.

    Attributes:
        value: the computed complex value.
        nearest: nearest integer to the real part.
        residual: distance of ``value`` to ``nearest``.
    """
    value: complex
    nearest: int
    residual: float

    @classmethod
    def of(cls, value: complex) -> 'IntegerVerdict':
        """Build the verdict for ``value``."""
        value = complex(value)
        nearest = int(round(value.real))
        return cls(value, nearest, abs(value - nearest))

    @property
    def integral(self) -> bool:
        """Whether the residual is within the ``integer`` tolerance."""
        return self.residual <= tol('integer')


# Errors


class NcIndexError(Exception):
    """Base class of all library errors."""


class NotAGroup(NcIndexError):
    """Multiplication table fails the group axioms."""


class ParentMismatch(NcIndexError):
    """Elements of different algebras were combined."""


class Singular(NcIndexError):
    """Element is not invertible within tolerance."""


class NotIdempotent(NcIndexError):
    """Element fails e*e == e."""


class DegreeUnsupported(NcIndexError):
    """Form carries mass in degrees a cochain does not support."""


class ParityMismatch(NcIndexError):
    """Parities of cochain, module or class disagree."""


class SummabilityViolation(NcIndexError):
    """Cochain degree below the summability degree."""


class IllConditioned(NcIndexError):
    """Singular values cluster at the rank cutoff."""


class ZeroMode(NcIndexError):
    """Dirac operator has a kernel and no shift is configured."""


class BackendUnsupported(NcIndexError):
    """Operation needs the exact circle backend."""


class DerivativeCapExceeded(NcIndexError):
    """Residue terms remain nonzero at the derivative cap."""


class NonSummable(NcIndexError):
    """Trace monomial diverges without renormalization."""


class PathMissing(NcIndexError):
    """No homotopy path was supplied."""


class RootConditioning(NcIndexError):
    """Newton iteration left a residual above tolerance."""


class OrderMismatch(NcIndexError):
    """Jet valuation disagrees with the recorded fixed point order."""


class SupportViolation(NcIndexError):
    """Test function support leaves the domain of its map."""


class QuadratureNonConvergence(NcIndexError):
    """Adaptive quadrature stalled above tolerance."""


class UnsupportedFixedManifold(NcIndexError):
    """Fixed point manifold geometry beyond the supported cases."""


class ConfigInvalid(NcIndexError):
    """Experiment configuration rejected."""


class SchemaMismatch(NcIndexError):
    """Report files are not comparable."""


def load_config(cfg_file: Optional[str] = None) -> configparser.ConfigParser:
    """
    Return a ConfigParser seeded from DEFAULTCONFIG.

    If ``cfg_file`` is given and missing, the defaults are written there.
    """
    cfg = configparser.ConfigParser()
    cfg.read_dict(DEFAULTCONFIG)
    if cfg_file is None:
        return cfg
    if not os.path.isfile(cfg_file):
        logger.info(f'Creating default config at "{cfg_file}"')
        with open(cfg_file, 'w') as fhandler:
            cfg.write(fhandler)
    else:
        cfg.read(cfg_file)
    return cfg


_CONFIG = load_config()


def config() -> configparser.ConfigParser:
    """Active configuration."""
    return _CONFIG


def use_config(cfg: configparser.ConfigParser) -> None:
    """Replace the active configuration."""
    global _CONFIG  # pylint: disable=global-statement
    _CONFIG = cfg


def tol(name: str) -> float:
    """Tolerance ``name`` from the active configuration."""
    return _CONFIG.getfloat('tolerances', name)


def float_list(section: str, key: str):
    """Comma separated float list from the active configuration."""
    return [float(i) for i in _CONFIG.get(section, key).split(',')]
