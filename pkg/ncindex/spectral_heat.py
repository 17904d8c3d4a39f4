"""
Truncated spectral triples: heat operator, JLO cocycle, retraction to the
bounded module and the residue cocycle on the exact circle backend.
"""

from dataclasses import dataclass
from dataclasses import field
from functools import cached_property
from itertools import product as cartesian
from math import ceil
from math import factorial
from math import log2
import threading
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import mpmath
import numpy as np
from loguru import logger
from numpy.polynomial import Polynomial
from scipy import sparse
from scipy.special import factorial as sp_factorial
from scipy.special import gamma

from ncindex import common
from ncindex import nc_forms
from ncindex.algebra_core import AlgebraElement
from ncindex.algebra_core import FiniteAlgebra
from ncindex.algebra_core import circle_mode
from ncindex.algebra_core import invert
from ncindex.algebra_core import make_circle_algebra
from ncindex.fredholm_pairing import SCALARS
from ncindex.fredholm_pairing import FredholmModule
from ncindex.fredholm_pairing import XValue
from ncindex.fredholm_pairing import chern_terms
from ncindex.fredholm_pairing import index_pairing
from ncindex.fredholm_pairing import padded_rep
from ncindex.nc_forms import CochainOnForms
from ncindex.nc_forms import NCForm

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

Slot = Union[AlgebraElement, np.ndarray]
TAYLOR_TERMS = 18


@dataclass(frozen=True, eq=False)
class SpectralTriple:
    """
    Finite truncation of a spectral triple (H, rho, D).

    Attributes:
        source: algebra acting through rho.
        rho: images of the basis, shape (dim, h, h).
        D: hermitian Dirac operator.
        parity: EVEN (D odd for the grading) or ODD.
        grading: diagonal +-1 grading of H in the even case.
        backend: DENSE, or CIRCLE_EXACT for Fourier windows with
            D = diag(m) and the zero mode moved to 1/2.
        meta: modes and symbol_degree of circle windows.
    """
    source: FiniteAlgebra
    rho: np.ndarray
    D: np.ndarray  # pylint: disable=invalid-name
    parity: common.Parity
    grading: Optional[np.ndarray] = None
    backend: common.Backend = common.Backend.DENSE
    meta: Dict[str, object] = field(default_factory=dict)
    _heat_cache: Dict[float, np.ndarray] = field(default_factory=dict,
                                                 repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock,
                                  repr=False)

    def __post_init__(self) -> None:
        size = self.D.shape[0]
        if self.rho.shape != (self.source.dim, size, size):
            raise ValueError(f'rho has shape {self.rho.shape}')
        if np.max(np.abs(self.D - self.D.conj().T)) > common.tol('involution'):
            raise ValueError('D is not hermitian')
        if self.parity == common.Parity.EVEN:
            if self.grading is None or len(self.grading) != size:
                raise ValueError('Even triples need a grading')
            gam = np.diag(self.grading)
            if np.max(np.abs(gam @ self.D + self.D @ gam)) > \
                    common.tol('involution'):
                raise ValueError('D is not odd for the grading')
        if self.backend == common.Backend.CIRCLE_EXACT and \
                'modes' not in self.meta:
            raise ValueError('Circle backend without mode data')

    @property
    def h_dim(self) -> int:
        return self.D.shape[0]

    @cached_property
    def spectrum(self) -> Tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and orthonormal eigenvectors of D."""
        if self.backend == common.Backend.CIRCLE_EXACT:
            return np.real(np.diag(self.D)).copy(), np.eye(self.h_dim)
        evals, evecs = np.linalg.eigh(self.D)
        return evals, evecs

    @cached_property
    def supertrace_weights(self) -> np.ndarray:
        """tau(X) = Tr(W X): the grading, or the odd trace factor."""
        if self.parity == common.Parity.EVEN:
            return np.diag(np.asarray(self.grading, dtype=complex))
        return common.ODD_TRACE_FACTOR * np.eye(self.h_dim)

    def image(self, a: Slot) -> np.ndarray:
        """rho(a); a vector of length dim + 1 is read in A+."""
        coeffs = a.coeffs if isinstance(a, AlgebraElement) else np.asarray(a)
        img = np.tensordot(coeffs[:self.source.dim], self.rho, axes=1)
        if len(coeffs) == self.source.dim + 1:
            img = img + coeffs[-1] * np.eye(self.h_dim)
        return img

    def heat(self, t: float) -> np.ndarray:
        """exp(-t D^2), cached per t."""
        if t <= 0:
            raise ValueError(f't must be positive, got {t}')
        with self._lock:
            cached = self._heat_cache.get(t)
            if cached is not None:
                logger.debug(f'Heat cache hit t={t}')
                return cached
            evals, evecs = self.spectrum
            mat = (evecs * np.exp(-t * evals ** 2)) @ evecs.conj().T
            self._heat_cache[t] = mat
            return mat


def circle_triple(window: int, degree: int) -> SpectralTriple:
    """
    Odd triple of the circle algebra on the modes [-window, window].

    rho is Laurent multiplication, D = diag(m) with the zero mode at 1/2.
    """
    if 2 * window + 1 < 2 * degree + 4:
        raise ValueError(f'Window {window} too small for degree {degree}')
    alg = make_circle_algebra(degree)
    modes = np.arange(-window, window + 1)
    size = len(modes)
    rho = np.array([np.eye(size, k=-circle_mode(j, alg.dim))
                    for j in range(alg.dim)], dtype=complex)
    diag = np.where(modes == 0, common.ZERO_MODE_EIGENVALUE, modes)
    meta = {'modes': modes, 'symbol_degree': degree, 'zero_shift': True}
    return SpectralTriple(alg, rho, np.diag(diag).astype(complex),
                          common.Parity.ODD,
                          backend=common.Backend.CIRCLE_EXACT, meta=meta)


def dense_triple(rho: np.ndarray, dirac: np.ndarray, source: FiniteAlgebra,
                 grading: Optional[np.ndarray] = None) -> SpectralTriple:
    """Dense triple; even when a grading is given."""
    parity = common.Parity.ODD if grading is None else common.Parity.EVEN
    return SpectralTriple(source, np.asarray(rho, dtype=complex),
                          np.asarray(dirac, dtype=complex), parity, grading)


def random_triple(alg: FiniteAlgebra, h_dim: int, parity: common.Parity,
                  rng: np.random.Generator) -> SpectralTriple:
    """Triple with a random hermitian D on copies of the basic module."""
    if parity == common.Parity.EVEN:
        half = h_dim // 2
        rep = padded_rep(alg, half, rng)
        rho = np.zeros((alg.dim, 2 * half, 2 * half), dtype=complex)
        rho[:, :half, :half] = rep
        rho[:, half:, half:] = rep
        block = rng.normal(size=(half, half)) + 1j * rng.normal(
            size=(half, half))
        dirac = np.zeros((2 * half, 2 * half), dtype=complex)
        dirac[:half, half:] = block
        dirac[half:, :half] = block.conj().T
        grading = np.concatenate([np.ones(half), -np.ones(half)])
        return dense_triple(rho, dirac, alg, grading)
    rho = padded_rep(alg, h_dim, rng)
    herm = rng.normal(size=(h_dim, h_dim)) + 1j * rng.normal(
        size=(h_dim, h_dim))
    return dense_triple(rho, (herm + herm.conj().T) / 2, alg)


# Divided differences


def divided_difference_exp(nodes: np.ndarray) -> np.ndarray:
    """
    Divided differences of exp at each row of real nodes.

    The Opitz matrix of the nodes is exponentiated by scaling and squaring.
    Its entries at the scaled nodes come from a Taylor series around the
    row center and all entries are positive, so the squarings keep relative
    accuracy at any order and spread. Coincident nodes need no special case.
    """
    y = np.atleast_2d(np.asarray(nodes, dtype=float))
    rows, size = y.shape
    order = size - 1
    if order == 0:
        return np.exp(y[:, 0])
    spread = float(np.max(np.ptp(y, axis=1)))
    steps = max(0, ceil(log2(spread))) if spread > 1.0 else 0
    z = y / 2.0 ** steps
    center = (z.max(axis=1) + z.min(axis=1)) / 2
    w = z - center[:, None]
    inv_fact = 1.0 / sp_factorial(np.arange(order + TAYLOR_TERMS + 1))
    table = np.zeros((rows, size, size))
    hom = w[:, :, None] ** np.arange(TAYLOR_TERMS + 1)
    for length in range(size):
        if length:
            fresh = np.empty((rows, size - length, TAYLOR_TERMS + 1))
            fresh[:, :, 0] = 1.0
            new_node = w[:, length:]
            for q in range(1, TAYLOR_TERMS + 1):
                fresh[:, :, q] = hom[:, :size - length, q] \
                    + new_node * fresh[:, :, q - 1]
            hom = fresh
        coeffs = inv_fact[length:length + TAYLOR_TERMS + 1]
        starts = np.arange(size - length)
        table[:, starts, starts + length] = hom[:, :size - length] @ coeffs
    table *= np.exp(center)[:, None, None]
    gap = np.subtract.outer(np.arange(size), np.arange(size))
    scale = np.where(gap <= 0, 2.0 ** gap, 0.0)
    for _ in range(steps):
        table = np.matmul(table, table) * scale
    return table[:, 0, order]


def simplex_heat_integral(exponents: np.ndarray) -> np.ndarray:
    """int over the simplex of exp(-sum s_i x_i), per row of exponents."""
    return divided_difference_exp(-np.asarray(exponents, dtype=float))


# JLO


def _check_parity(triple: SpectralTriple, n: int) -> None:
    if n % 2 != triple.parity.value:
        raise common.ParityMismatch(f'Degree {n} against a '
                                    f'{triple.parity.name} triple')


def _eigen_frame(triple: SpectralTriple, slots: Sequence[Slot]
                 ) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Supertrace folded a0 and commutators [D, a_i] in the eigenbasis."""
    _, evecs = triple.spectrum
    dirac = triple.D

    def rotate(mat: np.ndarray) -> np.ndarray:
        if triple.backend == common.Backend.CIRCLE_EXACT:
            return mat
        return evecs.conj().T @ mat @ evecs

    head = rotate(triple.supertrace_weights @ triple.image(slots[0]))
    comms = []
    for a in slots[1:]:
        img = triple.image(a)
        comms.append(rotate(dirac @ img - img @ dirac))
    return head, comms


def _path_sum(head: np.ndarray, comms: List[np.ndarray], squares: np.ndarray,
              t: float) -> complex:
    """
    Sum over eigenbasis index paths of the exact simplex integrals.

    Paths follow the nonzero pattern of the commutators, so banded circle
    operators stay cheap.
    """
    size = head.shape[0]
    paths = np.arange(size)[:, None]
    weights = np.ones(size, dtype=complex)
    for mat in comms:
        csr = sparse.csr_matrix(mat)
        last = paths[:, -1]
        counts = csr.indptr[last + 1] - csr.indptr[last]
        total = int(counts.sum())
        if total == 0:
            return 0j
        owner = np.repeat(np.arange(len(paths)), counts)
        offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts,
                                               counts)
        pos = np.repeat(csr.indptr[last], counts) + offsets
        paths = np.hstack([paths[owner], csr.indices[pos][:, None]])
        weights = weights[owner] * csr.data[pos]
    weights = weights * head[paths[:, -1], paths[:, 0]]
    keep = weights != 0
    if not np.any(keep):
        return 0j
    integrals = simplex_heat_integral(t * squares[paths[keep]])
    return complex(np.sum(weights[keep] * integrals))


def jlo(triple: SpectralTriple, n: int, t: float,
        a: Sequence[Slot]) -> complex:
    """
    JLO component on (a0, ..., an).

    (-1)^n t^(n/2) times the simplex integral of
    tau(a0 e^(-s0 t D^2) [D, a1] e^(-s1 t D^2) ... [D, an] e^(-sn t D^2)),
    evaluated exactly in the eigenbasis of D.
    """
    _check_parity(triple, n)
    if len(a) != n + 1:
        raise ValueError(f'Degree {n} needs {n + 1} entries, got {len(a)}')
    if t <= 0:
        raise ValueError(f't must be positive, got {t}')
    head, comms = _eigen_frame(triple, a)
    evals, _ = triple.spectrum
    value = _path_sum(head, comms, evals ** 2, t)
    return (-1) ** n * t ** (n / 2) * value


def jlo_pairing(triple: SpectralTriple, k_class: AlgebraElement, t: float,
                kind: common.ClassKind = common.ClassKind.INVERTIBLE
                ) -> complex:
    """
    Sum over degrees of JLO with ch(k_class).

    Stops once two consecutive degrees fall below the term tolerance.
    """
    cfg = common.config()
    max_degree = cfg.getint('heat', 'max_degree')
    tolerance = cfg.getfloat('heat', 'term_tolerance')
    expected = common.Parity.EVEN if kind == common.ClassKind.IDEMPOTENT \
        else common.Parity.ODD
    if triple.parity != expected:
        raise common.ParityMismatch(f'{kind.value} class against a '
                                    f'{triple.parity.name} triple')
    total = 0j
    small = 0
    n = triple.parity.value
    while n <= max_degree:
        term = 0j
        for coeff, slots in chern_terms(k_class, kind, n):
            term += coeff * jlo(triple, n, t, slots)
        total += term
        small = small + 1 if abs(term) < tolerance else 0
        if small == 2:
            logger.debug(f'JLO pairing t={t} converged at degree {n}')
            return total
        n += 2
    logger.warning(f'JLO pairing t={t} stopped at max degree {max_degree}')
    return total


def jlo_pairing_t_independence(triple: SpectralTriple,
                               k_class: AlgebraElement,
                               t_list: Sequence[float],
                               kind: common.ClassKind =
                               common.ClassKind.INVERTIBLE) -> float:
    """Largest spread of the JLO pairing over t_list."""
    values = [jlo_pairing(triple, k_class, t, kind) for t in t_list]
    spread = max(abs(x - y) for x in values for y in values)
    logger.debug(f'JLO spread over {list(t_list)}: {spread:.3e}')
    return spread


def duhamel_monte_carlo(triple: SpectralTriple, n: int, t: float,
                        a: Sequence[Slot], samples: Optional[int] = None,
                        rng: Optional[np.random.Generator] = None
                        ) -> Tuple[complex, float]:
    """
    Monte Carlo estimate of jlo(n, t, a) with uniform simplex samples.

    Returns the mean and its standard error.
    """
    _check_parity(triple, n)
    cfg = common.config()
    samples = samples or cfg.getint('heat', 'monte_carlo_samples')
    chunk = cfg.getint('heat', 'monte_carlo_chunk')
    rng = rng or np.random.default_rng(cfg.getint('base', 'seed'))
    head, comms = _eigen_frame(triple, a)
    evals, _ = triple.spectrum
    squares = t * evals ** 2
    values = []
    done = 0
    while done < samples:
        count = min(chunk, samples - done)
        simplex = rng.dirichlet(np.ones(n + 1), size=count)
        acc = head[None] * np.exp(-simplex[:, 0, None] * squares)[:, None, :]
        for i, mat in enumerate(comms, start=1):
            acc = np.matmul(acc, mat)
            acc = acc * np.exp(-simplex[:, i, None] * squares)[:, None, :]
        values.append(np.trace(acc, axis1=1, axis2=2))
        done += count
    data = np.concatenate(values) / factorial(n)
    scale = (-1) ** n * t ** (n / 2)
    stderr = np.sqrt(np.var(data.real) + np.var(data.imag)) \
        / np.sqrt(len(data))
    return complex(scale * data.mean()), float(abs(scale) * stderr)


# Retraction


def retraction_family(triple: SpectralTriple, s: float) -> SpectralTriple:
    """The triple with D_s = D |D|^(-s), 0 <= s <= 1."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f's must lie in [0, 1], got {s}')
    evals, evecs = triple.spectrum
    if np.any(np.abs(evals) < common.tol('rank_cutoff')):
        raise common.ZeroMode('D has a kernel')
    moved = evals * np.abs(evals) ** (-s)
    dirac = (evecs * moved) @ evecs.conj().T
    return SpectralTriple(triple.source, triple.rho, dirac, triple.parity,
                          triple.grading, triple.backend, dict(triple.meta))


def bounded_module(triple: SpectralTriple) -> FredholmModule:
    """The bounded module F = D / |D| at the end of the retraction."""
    evals, evecs = triple.spectrum
    if np.any(np.abs(evals) < common.tol('rank_cutoff')):
        raise common.ZeroMode('D has a kernel and no shift is configured')
    sign = (evecs * np.sign(evals)) @ evecs.conj().T
    meta = {}
    if triple.backend == common.Backend.CIRCLE_EXACT:
        sign = np.diag(np.sign(evals)).astype(complex)
        meta = {'modes': triple.meta['modes'],
                'symbol_degree': triple.meta['symbol_degree'],
                'kind': 'toeplitz'}
    return FredholmModule(triple.source, triple.rho, sign, triple.parity,
                          triple.parity.value, triple.grading, meta=meta)


def retraction_compare(triple: SpectralTriple, k_class: AlgebraElement,
                       kind: common.ClassKind = common.ClassKind.INVERTIBLE,
                       t: Optional[float] = None
                       ) -> Tuple[complex, complex, complex]:
    """JLO pairing against the bounded chi pairing of the retracted module."""
    t = common.config().getfloat('heat', 't') if t is None else t
    module = bounded_module(triple)
    chi_value = index_pairing(module, k_class, kind)
    jlo_value = jlo_pairing(triple, k_class, t, kind)
    diff = jlo_value - chi_value
    logger.info(f'Retraction: jlo={jlo_value:.9f} chi={chi_value:.9f}')
    return jlo_value, chi_value, diff


# Exact circle backend


@dataclass
class Symbol:
    """
    Function of the mode m: exact values for |m| <= radius, polynomial
    tails beyond.
    """
    radius: int
    exact: np.ndarray
    plus: Polynomial
    minus: Polynomial

    @classmethod
    def constant(cls, value: complex) -> 'Symbol':
        poly = Polynomial([complex(value)])
        return cls(0, np.array([complex(value)]), poly, poly)

    @classmethod
    def dirac(cls, power: int = 1) -> 'Symbol':
        """d(m)^power, d(m) = m with d(0) = 1/2."""
        poly = Polynomial([0, 1]) ** power
        zero = complex(common.ZERO_MODE_EIGENVALUE ** power)
        return cls(0, np.array([zero]), poly, poly)

    def value(self, m: int) -> complex:
        if abs(m) <= self.radius:
            return complex(self.exact[m + self.radius])
        return complex((self.plus if m > 0 else self.minus)(m))

    def widened(self, radius: int) -> 'Symbol':
        if radius <= self.radius:
            return self
        exact = np.array([self.value(m) for m in range(-radius, radius + 1)])
        return Symbol(radius, exact, self.plus, self.minus)

    def shift(self, j: int) -> 'Symbol':
        """m -> phi(m + j)."""
        if j == 0:
            return self
        radius = self.radius + abs(j)
        exact = np.array([self.value(m + j)
                          for m in range(-radius, radius + 1)])
        move = Polynomial([j, 1])
        return Symbol(radius, exact, self.plus(move), self.minus(move))

    def _binary(self, other: 'Symbol', op) -> 'Symbol':
        radius = max(self.radius, other.radius)
        left, right = self.widened(radius), other.widened(radius)
        return Symbol(radius, op(left.exact, right.exact),
                      op(left.plus, right.plus), op(left.minus, right.minus))

    def __add__(self, other: 'Symbol') -> 'Symbol':
        return self._binary(other, lambda x, y: x + y)

    def __sub__(self, other: 'Symbol') -> 'Symbol':
        return self._binary(other, lambda x, y: x - y)

    def __mul__(self, other: Union['Symbol', complex]) -> 'Symbol':
        if isinstance(other, Symbol):
            return self._binary(other, lambda x, y: x * y)
        return Symbol(self.radius, self.exact * other, self.plus * other,
                      self.minus * other)

    def is_zero(self) -> bool:
        return not (np.any(self.exact) or np.any(self.plus.coef)
                    or np.any(self.minus.coef))


@dataclass
class CircleOperator:
    """
    Operator on l2(Z) as sum_j z^j phi_j(m): e_m -> phi_j(m) e_(m+j).
    """
    terms: Dict[int, Symbol]

    @classmethod
    def identity(cls) -> 'CircleOperator':
        return cls({0: Symbol.constant(1.0)})

    @classmethod
    def of(cls, alg: FiniteAlgebra, coeffs: np.ndarray) -> 'CircleOperator':
        """Laurent multiplication by an element, unit part last in A+."""
        terms = {}
        for j in range(alg.dim):
            if coeffs[j] != 0:
                terms[circle_mode(j, alg.dim)] = Symbol.constant(coeffs[j])
        if len(coeffs) == alg.dim + 1 and coeffs[-1] != 0:
            unit = Symbol.constant(coeffs[-1])
            terms[0] = terms[0] + unit if 0 in terms else unit
        return cls(terms)

    def __matmul__(self, other: 'CircleOperator') -> 'CircleOperator':
        out: Dict[int, Symbol] = {}
        for i, phi in self.terms.items():
            for j, psi in other.terms.items():
                term = phi.shift(j) * psi
                out[i + j] = out[i + j] + term if i + j in out else term
        return CircleOperator({k: v for k, v in out.items()
                               if not v.is_zero()})

    def commutator(self, diagonal: Symbol) -> 'CircleOperator':
        """[diag, X] for a diagonal symbol."""
        out = {}
        for j, phi in self.terms.items():
            term = (diagonal.shift(j) - diagonal) * phi
            if not term.is_zero():
                out[j] = term
        return CircleOperator(out)

    def is_zero(self) -> bool:
        return not self.terms


@dataclass
class ZetaTrace:
    """
    z -> Tr(X |D|^-(z + shift)) for a diagonal part given by a Symbol.

    The value is a finite eigen-sum over |m| <= radius plus Hurwitz zeta
    terms c zeta(z + shift - i, radius + 1) from the polynomial tails.
    """
    symbol: Symbol
    shift: float = 0.0

    @cached_property
    def hurwitz(self) -> List[Tuple[complex, int]]:
        """(c_i, i) with the two tails folded onto positive m."""
        plus = self.symbol.plus.coef
        minus = self.symbol.minus.coef
        out = []
        for i in range(max(len(plus), len(minus))):
            c = (plus[i] if i < len(plus) else 0) \
                + (-1) ** i * (minus[i] if i < len(minus) else 0)
            if c != 0:
                out.append((complex(c), i))
        return out

    def _finite(self, z) -> mpmath.mpc:
        total = mpmath.mpc(0)
        radius = self.symbol.radius
        for m in range(-radius, radius + 1):
            c = self.symbol.exact[m + radius]
            if c != 0:
                eig = common.ZERO_MODE_EIGENVALUE if m == 0 else abs(m)
                total += c * mpmath.power(eig, -(z + self.shift))
        return total

    def value(self, z: complex) -> complex:
        """Meromorphic continuation at a regular point."""
        start = self.symbol.radius + 1
        total = self._finite(z)
        for c, i in self.hurwitz:
            total += c * mpmath.zeta(z + self.shift - i, start)
        return complex(total)

    def poles(self) -> Dict[float, complex]:
        """Simple poles z0 -> residue."""
        return {i + 1 - self.shift: c for c, i in self.hurwitz}

    def residue(self, z0: float) -> complex:
        return complex(self.poles().get(z0, 0j))

    def finite_part(self, z0: float) -> complex:
        """Constant Laurent coefficient at z0."""
        start = self.symbol.radius + 1
        total = self._finite(z0)
        for c, i in self.hurwitz:
            exponent = z0 + self.shift - i
            if exponent == 1:
                total += -c * mpmath.digamma(start)
            else:
                total += c * mpmath.zeta(exponent, start)
        return complex(total)


def _circle_operator(triple: SpectralTriple, a: Slot) -> CircleOperator:
    if triple.backend != common.Backend.CIRCLE_EXACT:
        raise common.BackendUnsupported('Exact symbols need the circle '
                                        'backend')
    coeffs = a.coeffs if isinstance(a, AlgebraElement) else np.asarray(a)
    return CircleOperator.of(triple.source, coeffs)


def zeta_trace(triple: SpectralTriple, a: Union[Slot, CircleOperator],
               s_shift: float = 0) -> ZetaTrace:
    """Tr(a |D|^-(z + s_shift)) as an exact zeta function."""
    op = a if isinstance(a, CircleOperator) else _circle_operator(triple, a)
    diag = op.terms.get(0, Symbol.constant(0.0))
    return ZetaTrace(diag, float(s_shift))


def residue_constant(orders: Sequence[int]) -> float:
    """c(k0, ..., kn) = 1 / (k0! ... kn! (k0+1)(k0+k1+2)...)."""
    denom = 1.0
    partial = 0
    for i, k in enumerate(orders):
        partial += k
        denom *= factorial(k) * (partial + i + 1)
    return 1.0 / denom


def _derivatives(op: CircleOperator, k_max: int) -> List[CircleOperator]:
    """op, [D^2, op], [D^2, [D^2, op]], ..."""
    square = Symbol.dirac(2)
    out = [op]
    for _ in range(k_max):
        out.append(out[-1].commutator(square))
    return out


def _residue_value(triple: SpectralTriple, n: int,
                   slots: Sequence[Slot]) -> complex:
    """
    Residue formula for the even part of the local cocycle in degree n.

    Cyclic words dx_(n-i+1) ... dx_n x_0 dx_1 ... dx_(n-i), with
    [D^2, .]^k derivatives assigned by position, traced against
    |D|^(-2(z + k) - n).
    """
    k_max = common.config().getint('heat', 'k_max')
    dirac = Symbol.dirac(1)
    ops = [_circle_operator(triple, slots[0])]
    for a in slots[1:]:
        ops.append(_circle_operator(triple, a).commutator(dirac))
    if any(op.is_zero() for op in ops):
        return 0j
    ders = [_derivatives(op, k_max) for op in ops]
    total = 0j
    capped = False
    for orders in cartesian(range(k_max + 1), repeat=n + 1):
        k = sum(orders)
        if k > k_max:
            continue
        inner = 0j
        for i in range(n + 1):
            order = list(range(n - i + 1, n + 1)) + [0] \
                + list(range(1, n - i + 1))
            word = ders[order[0]][orders[0]]
            for pos in range(1, n + 1):
                word = word @ ders[order[pos]][orders[pos]]
            pole = zeta_trace(triple, word, 2 * k + n).residue(0.0) / 2
            inner += (-1) ** (i * (n - 1)) * pole
        if inner == 0:
            continue
        if k == k_max:
            capped = True
        total += (-1) ** (k + n) * residue_constant(orders) \
            * gamma(k + n / 2) * inner
    if capped:
        raise common.DerivativeCapExceeded(f'Nonzero residues at k={k_max}')
    return common.ODD_TRACE_FACTOR * total


def residue_cochain(n: int, triple: SpectralTriple) -> CochainOnForms:
    """The local residue cocycle in degree n as a cochain on forms."""
    _check_parity(triple, n)
    alg = triple.source

    def wrap(value: complex) -> XValue:
        out = XValue.zero(SCALARS)
        out.even_part = SCALARS.element([value])
        return out

    def evaluate_terms(degree: int, slots: Sequence[np.ndarray]) -> XValue:
        return wrap(_residue_value(triple, degree, slots))

    def evaluate(degree: int, comp: np.ndarray) -> XValue:
        value = 0j
        for index in zip(*np.nonzero(comp)):
            slots = [np.eye(alg.dim + 1)[index[0]]]
            slots += [np.eye(alg.dim)[i] for i in index[1:]]
            value += comp[index] * _residue_value(triple, degree, slots)
        return wrap(value)

    return CochainOnForms(evaluate, frozenset({n}), common.Parity.of(n),
                          evaluate_terms, lambda: XValue.zero(SCALARS))


def residue_cocycle(n: int, triple: SpectralTriple, x: NCForm) -> XValue:
    """Residue cocycle of degree n evaluated on x."""
    return residue_cochain(n, triple)(x)


def residue_pairing(triple: SpectralTriple, u: AlgebraElement,
                    max_degree: int = 3) -> complex:
    """Pairing of the residue cocycle with ch(u) through max_degree."""
    u_inv = invert(u)
    total = 0j
    for n in range(triple.parity.value, max_degree + 1, 2):
        phi = residue_cochain(n, triple)
        value = phi.on_terms(n, nc_forms.chern_invertible_terms(u, n, u_inv))
        total += value.scalar
    return total
