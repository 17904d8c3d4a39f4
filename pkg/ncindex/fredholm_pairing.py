"""
Bounded p-summable modules, their Chern character cocycles and the eta
cochain, together with index pairings and an operator index oracle.
"""

from dataclasses import dataclass
from dataclasses import field
from functools import cached_property
from functools import lru_cache
import json
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
from loguru import logger
from scipy.special import gamma

from ncindex import common
from ncindex import nc_forms
from ncindex.algebra_core import AlgebraElement
from ncindex.algebra_core import FiniteAlgebra
from ncindex.algebra_core import circle_mode
from ncindex.algebra_core import invert
from ncindex.algebra_core import load_algebra
from ncindex.algebra_core import make_circle_algebra
from ncindex.algebra_core import make_matrix_algebra
from ncindex.algebra_core import matrix_of
from ncindex.algebra_core import named_algebra
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

SCALARS = make_matrix_algebra(1)

Word = List[Tuple[Optional[int], np.ndarray]]


@dataclass(frozen=True, eq=False)
class FredholmModule:
    """
    Finite truncation of a bounded p-summable module (H, rho, F).

    Operators act on H (x) R through the left regular representation of the
    target R, so every matrix has size h_dim * R.dim. Ordinary modules use
    the scalars as target.

    Attributes:
        source: algebra A acting through rho.
        rho: images of the basis of A, shape (A.dim, size, size).
        F: symmetry with F*F = 1.
        parity: EVEN or ODD.
        p: summability degree.
        grading: diagonal +-1 grading on the h_dim factor (even case).
        target: the algebra R.
        meta: window data of circle models (modes, symbol_degree,
            form_support).
    """
    source: FiniteAlgebra
    rho: np.ndarray
    F: np.ndarray  # pylint: disable=invalid-name
    parity: common.Parity
    p: int
    grading: Optional[np.ndarray] = None
    target: FiniteAlgebra = SCALARS
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        size = self.F.shape[0]
        if self.rho.shape != (self.source.dim, size, size):
            raise ValueError(f'rho has shape {self.rho.shape}')
        if not self.target.has_unit or size % self.target.dim:
            raise ValueError('Target must be unital and divide the size')
        eye = np.eye(size)
        if np.max(np.abs(self.F @ self.F - eye)) > common.tol('involution'):
            raise ValueError('F*F differs from the identity')
        if self.parity == common.Parity.EVEN:
            if self.grading is None or len(self.grading) != self.h_dim:
                raise ValueError('Even modules need a grading')
            gam = self.gamma_matrix
            if np.max(np.abs(gam @ self.F + self.F @ gam)) > \
                    common.tol('involution'):
                raise ValueError('F is not odd for the grading')
        residual = homomorphism_residual(self)
        if residual > common.tol('homomorphism'):
            raise ValueError(f'rho is not a homomorphism (residual '
                             f'{residual:.2e})')

    @property
    def h_dim(self) -> int:
        """Dimension of H."""
        return self.F.shape[0] // self.target.dim

    @property
    def size(self) -> int:
        """Matrix size of the operators."""
        return self.F.shape[0]

    @cached_property
    def weights(self) -> np.ndarray:
        """Supertrace weights on H: the grading, or the odd trace factor."""
        if self.parity == common.Parity.EVEN:
            return np.asarray(self.grading, dtype=complex)
        return np.full(self.h_dim, common.ODD_TRACE_FACTOR)

    @cached_property
    def gamma_matrix(self) -> np.ndarray:
        """Supertrace weights as an operator."""
        if self.parity == common.Parity.EVEN:
            diag = np.asarray(self.grading, dtype=complex)
        else:
            diag = np.full(self.h_dim, common.ODD_TRACE_FACTOR)
        return np.kron(np.diag(diag), np.eye(self.target.dim))

    @cached_property
    def rho_plus(self) -> np.ndarray:
        """rho on the unitization, formal unit last."""
        return np.concatenate([self.rho, np.eye(self.size)[None]])

    @cached_property
    def comm(self) -> np.ndarray:
        """Commutators [F, rho(e_i)]."""
        return np.matmul(self.F, self.rho) - np.matmul(self.rho, self.F)

    @cached_property
    def comm_plus(self) -> np.ndarray:
        """Commutators on the unitization."""
        zero = np.zeros((1, self.size, self.size), dtype=complex)
        return np.concatenate([self.comm, zero])

    def image(self, a: Union[AlgebraElement, np.ndarray]) -> np.ndarray:
        """rho(a); a vector of length dim + 1 is read in A+."""
        coeffs = a.coeffs if isinstance(a, AlgebraElement) else np.asarray(a)
        stack = self.rho_plus if len(coeffs) == self.source.dim + 1 \
            else self.rho
        return np.tensordot(coeffs, stack, axes=1)


@dataclass(eq=False)
class XValue:
    """
    Value in the X-complex of the target R.

    Attributes:
        target: the algebra R.
        even_part: element of R.
        odd_part: tensor of shape (R.dim + 1, R.dim) projected onto the
            commutator quotient of one-forms.
    """
    target: FiniteAlgebra
    even_part: AlgebraElement
    odd_part: np.ndarray

    @classmethod
    def zero(cls, target: FiniteAlgebra) -> 'XValue':
        """The zero value."""
        return cls(target, target.zero(),
                   np.zeros((target.dim + 1, target.dim), dtype=complex))

    def __add__(self, other: Union['XValue', float]) -> 'XValue':
        if not isinstance(other, XValue):
            if other == 0:
                return self
            return NotImplemented
        return XValue(self.target, self.even_part + other.even_part,
                      self.odd_part + other.odd_part)

    __radd__ = __add__

    def __sub__(self, other: 'XValue') -> 'XValue':
        return self + other * -1.0

    def __mul__(self, scalar: complex) -> 'XValue':
        return XValue(self.target, self.even_part * scalar,
                      self.odd_part * scalar)

    __rmul__ = __mul__

    @property
    def scalar(self) -> complex:
        """The even part as a number, for scalar targets."""
        if self.target.dim != 1:
            raise ValueError('Not a scalar target')
        return complex(self.even_part.coeffs[0])

    def max_abs(self) -> float:
        """Largest coefficient modulus of both parts."""
        return max(float(np.max(np.abs(self.even_part.coeffs))),
                   float(np.max(np.abs(self.odd_part), initial=0.0)))


@lru_cache(maxsize=None)
def natural_projector(target: FiniteAlgebra) -> np.ndarray:
    """Orthogonal projector of one-forms onto the complement of b(2-forms)."""
    bmat = nc_forms.operator_matrix(target, 2, 1, 2, nc_forms.hochschild_b)
    u_mat, sing, _ = np.linalg.svd(bmat)
    cutoff = common.tol('rank_cutoff') * max(sing.max(initial=0.0), 1.0)
    basis = u_mat[:, :int(np.sum(sing > cutoff))]
    return np.eye(bmat.shape[0]) - basis @ basis.conj().T


def _natural(target: FiniteAlgebra, tensor: np.ndarray) -> np.ndarray:
    """Natural projection of r0 dr1 tensors (R x R or R+ x R)."""
    full = np.zeros((target.dim + 1, target.dim), dtype=complex)
    full[:tensor.shape[0]] = tensor
    proj = natural_projector(target) @ full.reshape(-1)
    return proj.reshape(target.dim + 1, target.dim)


def natural_d(value: XValue) -> np.ndarray:
    """Natural d of the even part."""
    target = value.target
    tensor = np.zeros((target.dim + 1, target.dim), dtype=complex)
    tensor[target.dim] = value.even_part.coeffs
    return _natural(target, tensor)


def natural_b(value: XValue) -> AlgebraElement:
    """b of the odd part, r0 dr1 -> [r0, r1]."""
    form = NCForm(value.target, 1, {1: value.odd_part})
    return value.target.element(nc_forms.hochschild_b(form).component(0))


def x_boundary(value: XValue) -> XValue:
    """Boundary of the X-complex."""
    return XValue(value.target, natural_b(value), natural_d(value))


def _fold(tensor: np.ndarray, word: Word,
          free_axis: Optional[int] = None) -> np.ndarray:
    """
    Contract a coefficient tensor against a word of operators.

    Each word entry is (axis, stack) with stack[i] the operator of basis
    index i on that axis, or (None, matrix) for a fixed factor. The free
    axis, if any, is kept as the leading output axis.
    """
    axes = [ax for ax, _ in word if ax is not None]
    if free_axis is not None:
        axes.append(free_axis)
    acc = None
    prefix = None
    for ax, op in word:
        if ax is None:
            if acc is None:
                prefix = op if prefix is None else prefix @ op
            else:
                acc = acc @ op
        elif acc is None:
            acc = np.tensordot(np.transpose(tensor, axes), op,
                               axes=([0], [0]))
        else:
            lead = acc.shape[0]
            rest = acc.shape[1:-2]
            size = acc.shape[-1]
            left = np.moveaxis(acc, 0, -2).reshape(-1, lead * size)
            acc = (left @ op.reshape(lead * size, -1)).reshape(
                rest + (size, op.shape[-1]))
    if prefix is not None:
        acc = prefix @ acc
    return acc


def _trace(module: FredholmModule, mats: np.ndarray) -> np.ndarray:
    """Supertrace with values in R."""
    h_dim, r_dim = module.h_dim, module.target.dim
    mat4 = mats.reshape(mats.shape[:-2] + (h_dim, r_dim, h_dim, r_dim))
    return np.einsum('...ptps,p,s->...t', mat4, module.weights,
                     module.target.unit_coeffs)


def _entries(module: FredholmModule, mats: np.ndarray) -> np.ndarray:
    """R-valued matrix entries, shape (..., h, h, R.dim)."""
    h_dim, r_dim = module.h_dim, module.target.dim
    mat4 = mats.reshape(mats.shape[:-2] + (h_dim, r_dim, h_dim, r_dim))
    return np.einsum('...ptqs,s->...pqt', mat4, module.target.unit_coeffs)


def _odd(module: FredholmModule, kernel: np.ndarray,
         plain: np.ndarray) -> np.ndarray:
    """Natural trace of sum_a kernel[a] d(plain[a])."""
    left = _entries(module, kernel)
    right = _entries(module, plain)
    tensor = np.einsum('alkr,akls->rs', left, right)
    return _natural(module.target, tensor)


class _Slots:
    """Tensor with per-slot plain and commutator operator stacks."""

    def __init__(self, tensor: np.ndarray, plain: List[np.ndarray],
                 comm: List[np.ndarray]) -> None:
        self.tensor = tensor
        self.plain = plain
        self.comm = comm

    @classmethod
    def dense(cls, module: FredholmModule, degree: int,
              tensor: np.ndarray) -> '_Slots':
        """Slots of a dense degree ``degree`` component."""
        first_plain = module.rho_plus if degree else module.rho
        first_comm = module.comm_plus if degree else module.comm
        return cls(tensor, [first_plain] + [module.rho] * degree,
                   [first_comm] + [module.comm] * degree)

    @classmethod
    def rank_one(cls, module: FredholmModule,
                 slots: Sequence[np.ndarray]) -> '_Slots':
        """Slots of a rank one tensor given by its slot vectors."""
        base = cls.dense(module, len(slots) - 1, None)
        plain = [np.tensordot(v, s, axes=1)[None]
                 for v, s in zip(slots, base.plain)]
        comm = [np.tensordot(v, s, axes=1)[None]
                for v, s in zip(slots, base.comm)]
        return cls(np.ones((1,) * len(slots)), plain, comm)

    def commutators(self, axes: Sequence[int]) -> Word:
        """Word of commutators over ``axes``."""
        return [(ax, self.comm[ax]) for ax in axes]


def chi_coefficient(n: int) -> float:
    """(-1)^n Gamma(1 + n/2) / (n + 1)!"""
    return (-1) ** n * gamma(1 + n / 2) / gamma(n + 2)


def _chi_even(module: FredholmModule, n: int, sl: _Slots) -> np.ndarray:
    total = np.zeros(module.target.dim, dtype=complex)
    for rot in range(n + 1):
        order = [(rot + j) % (n + 1) for j in range(n + 1)]
        word = [(order[0], sl.plain[order[0]])] + sl.commutators(order[1:])
        total += (-1) ** (rot * n) * _trace(module, _fold(sl.tensor, word))
    return chi_coefficient(n) * total


def _chi_odd(module: FredholmModule, n: int, sl: _Slots) -> np.ndarray:
    m = n + 1
    total = np.zeros((module.target.dim + 1, module.target.dim),
                     dtype=complex)
    for i in range(1, m + 1):
        word = sl.commutators(range(i + 1, m + 1)) \
            + [(None, module.gamma_matrix), (0, sl.plain[0])] \
            + sl.commutators(range(1, i))
        kernel = _fold(sl.tensor, word, free_axis=i)
        total += _odd(module, kernel, sl.plain[i])
    return chi_coefficient(n) * total


def _eta_even(module: FredholmModule, n: int, sl: _Slots) -> np.ndarray:
    m = n + 1
    fixed = (None, module.F)
    word = [fixed, (0, sl.plain[0])] + sl.commutators(range(1, m + 1))
    total = _trace(module, _fold(sl.tensor, word))
    for i in range(1, m + 1):
        word = sl.commutators(range(i, m + 1)) + [fixed, (0, sl.plain[0])] \
            + sl.commutators(range(1, i))
        total = total + (-1) ** (m * i) * _trace(module,
                                                _fold(sl.tensor, word))
    return gamma(n / 2 + 1) / gamma(n + 3) * 0.5 * total


def _eta_odd(module: FredholmModule, n: int, sl: _Slots) -> np.ndarray:
    m = n + 2
    fixed = (None, module.F)
    total = np.zeros((module.target.dim + 1, module.target.dim),
                     dtype=complex)
    for i in range(1, m + 1):
        head = sl.commutators(range(i + 1, m + 1)) \
            + [(None, module.gamma_matrix)]
        tail = sl.commutators(range(1, i))
        right = _fold(sl.tensor, head + [(0, sl.plain[0]), fixed] + tail,
                      free_axis=i)
        left = _fold(sl.tensor, head + [fixed, (0, sl.plain[0])] + tail,
                     free_axis=i)
        total += _odd(module, i * right + (n + 3 - i) * left, sl.plain[i])
    return gamma(n / 2 + 1) / gamma(n + 4) * 0.5 * total


def _check_degree(n: int, module: FredholmModule) -> None:
    if n % 2 != module.parity.value:
        raise common.ParityMismatch(f'Degree {n} against a '
                                    f'{module.parity.name} module')
    if n < module.p:
        raise common.SummabilityViolation(f'Degree {n} below p={module.p}')


def _cochain(module: FredholmModule, low: int, even_fn, odd_fn, n: int,
             parity: common.Parity) -> CochainOnForms:
    target = module.target
    scalar = target.dim == 1

    def value(degree: int, sl: _Slots) -> XValue:
        out = XValue.zero(target)
        if degree == low:
            out.even_part = target.element(even_fn(module, n, sl))
        elif not scalar:
            out.odd_part = odd_fn(module, n, sl)
        return out

    def evaluate(degree: int, comp: np.ndarray) -> XValue:
        return value(degree, _Slots.dense(module, degree, comp))

    def evaluate_terms(degree: int, slots: Sequence[np.ndarray]) -> XValue:
        return value(degree, _Slots.rank_one(module, slots))

    return CochainOnForms(evaluate, frozenset({low, low + 1}), parity,
                          evaluate_terms, lambda: XValue.zero(target),
                          not scalar)


def chi_cochain(n: int, module: FredholmModule) -> CochainOnForms:
    """The cocycle chi^n: degree n to R, degree n + 1 to one-forms."""
    _check_degree(n, module)
    return _cochain(module, n, _chi_even, _chi_odd, n, common.Parity.of(n))


def eta_cochain(n: int, module: FredholmModule) -> CochainOnForms:
    """The eta cochain eta^(n+1), supported in degrees n + 1 and n + 2."""
    _check_degree(n, module)
    return _cochain(module, n + 1, _eta_even, _eta_odd, n,
                    common.Parity.of(n + 1))


def chi_even(n: int, module: FredholmModule, x: NCForm) -> XValue:
    """chi^n evaluated on x."""
    return chi_cochain(n, module)(x)


def eta(n_plus_1: int, module: FredholmModule, x: NCForm) -> XValue:
    """eta^(n+1) evaluated on x."""
    return eta_cochain(n_plus_1 - 1, module)(x)


def chi_odd_part(n: int, module: FredholmModule, x: NCForm) -> np.ndarray:
    """The one-form component of chi^n on x, in the commutator quotient."""
    return chi_even(n, module, x).odd_part


def eta_odd_part(n_plus_1: int, module: FredholmModule,
                 x: NCForm) -> np.ndarray:
    """The one-form component of eta^(n+1) on x."""
    return eta(n_plus_1, module, x).odd_part


def transgression_check(n: int, module: FredholmModule, trials: int = 100,
                        seed: int = 7) -> float:
    """
    Max relative residual of chi^n - chi^(n+2) = [boundary, eta^(n+1)].

    The right hand side is (-1)^n eta((b+B)x) plus the X-complex boundary of
    eta(x), on random forms of degrees n .. n+3. Each trial draws from its
    own generator seeded by (seed, trial).
    """
    alg = module.source
    support = module.meta.get('form_support')
    chi_n = chi_cochain(n, module)
    chi_n2 = chi_cochain(n + 2, module)
    eta_n1 = eta_cochain(n, module)
    worst = 0.0
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        for degree in range(n, n + 4):
            x = nc_forms.random_form(alg, degree, rng, top_degree=n + 4,
                                     support=support)
            lhs = chi_n(x) - chi_n2(x)
            rhs = eta_n1(nc_forms.boundary(x)) * (-1) ** n \
                + x_boundary(eta_n1(x))
            scale = max(1.0, lhs.max_abs(), rhs.max_abs())
            worst = max(worst, (lhs - rhs).max_abs() / scale)
    logger.debug(f'Transgression n={n}: residual {worst:.3e}')
    return worst


def bivariant_residual(n: int, module: FredholmModule, trials: int = 20,
                       seed: int = 7) -> float:
    """Transgression residual for a module with a non scalar target."""
    residual = transgression_check(n, module, trials, seed)
    logger.info(f'Bivariant transgression residual {residual:.3e} '
                f'(target dim {module.target.dim})')
    return residual


def minimal_degree(module: FredholmModule) -> int:
    """Smallest admissible cocycle degree n >= p of the module parity."""
    n = module.p
    if n % 2 != module.parity.value:
        n += 1
    return n


def chern_terms(x: AlgebraElement, kind: common.ClassKind,
                degree: int) -> List[nc_forms.Term]:
    """Rank one terms of the degree ``degree`` Chern component of x."""
    if kind == common.ClassKind.IDEMPOTENT:
        nc_forms.check_idempotent(x)
        return nc_forms.chern_idempotent_terms(x, degree)
    return nc_forms.chern_invertible_terms(x, degree, invert(x))


def index_pairing(module: FredholmModule, k_class: AlgebraElement,
                  kind: common.ClassKind, n: Optional[int] = None
                  ) -> complex:
    """
    Pairing of chi^n with ch(k_class) at the minimal admissible degree.

    For odd modules the pairing of u is minus the operator index of the
    compression PuP, P = (1 + F)/2; for even modules it equals the index of
    rho_-(e) F rho_+(e).
    """
    expected = common.Parity.EVEN if kind == common.ClassKind.IDEMPOTENT \
        else common.Parity.ODD
    if module.parity != expected:
        raise common.ParityMismatch(f'{kind.value} class against a '
                                    f'{module.parity.name} module')
    if module.target.dim != 1:
        raise ValueError('Index pairings need a scalar target')
    n = minimal_degree(module) if n is None else n
    phi = chi_cochain(n, module)
    value = phi.on_terms(n, chern_terms(k_class, kind, n))
    return value.scalar


def _numerical_rank(mat: np.ndarray) -> int:
    if mat.size == 0:
        return 0
    sing = np.linalg.svd(mat, compute_uv=False)
    cutoff = common.tol('rank_cutoff') * max(sing.max(initial=0.0), 1.0)
    near = (sing > cutoff * 1e-2) & (sing < cutoff * 1e2)
    if np.any(near):
        raise common.IllConditioned(f'Singular values {sing[near]} near the '
                                    f'rank cutoff')
    return int(np.sum(sing > cutoff))


def operator_index_oracle(module: FredholmModule,
                          u_or_e: AlgebraElement) -> int:
    """
    dim ker - dim coker of the compressed operator.

    Odd window models compress rho(u) to the positive modes; the domain
    stays a symbol degree away from the window edge so the kernels are the
    ones of the infinite Toeplitz operator. Even models use
    rho_-(e) F rho_+(e) between the ranges of rho_+(e) and rho_-(e).
    """
    if module.parity == common.Parity.ODD:
        if 'modes' not in module.meta:
            raise ValueError('The odd oracle needs a window model')
        modes = np.asarray(module.meta['modes'])
        spread = int(module.meta['symbol_degree'])
        positive = modes >= 0
        domain = positive & (modes <= modes.max() - spread)
        mat = module.image(u_or_e)
        kernel = domain.sum() - _numerical_rank(mat[positive][:, domain])
        adjoint = mat.conj().T
        cokernel = domain.sum() - _numerical_rank(
            adjoint[positive][:, domain])
        return int(kernel - cokernel)
    image = module.image(u_or_e)
    plus = module.gamma_matrix.diagonal().real > 0
    e_plus = image[np.ix_(plus, plus)]
    e_minus = image[np.ix_(~plus, ~plus)]
    f_mp = module.F[np.ix_(~plus, plus)]
    src = _range_basis(e_plus)
    dst = _range_basis(e_minus)
    rank = _numerical_rank(dst.conj().T @ e_minus @ f_mp @ e_plus @ src)
    return int((src.shape[1] - rank) - (dst.shape[1] - rank))


def _range_basis(mat: np.ndarray) -> np.ndarray:
    u_mat, sing, _ = np.linalg.svd(mat)
    cutoff = common.tol('rank_cutoff') * max(sing.max(initial=0.0), 1.0)
    return u_mat[:, :int(np.sum(sing > cutoff))]


def toeplitz_module(window: int, degree: int) -> FredholmModule:
    """
    Odd module of the circle algebra on the modes [-window, window].

    rho is Laurent multiplication and F the sign of the mode, with the zero
    mode positive. Commutators have finite support, so traces are exact as
    long as the window leaves room around it.
    """
    if 2 * window + 1 < 2 * degree + 4:
        raise ValueError(f'Window {window} too small for degree {degree}')
    alg = make_circle_algebra(degree)
    modes = np.arange(-window, window + 1)
    size = len(modes)
    rho = np.array([np.eye(size, k=-circle_mode(j, alg.dim))
                    for j in range(alg.dim)], dtype=complex)
    sign = np.diag(np.where(modes >= 0, 1.0, -1.0)).astype(complex)
    support = [j for j in range(alg.dim) if abs(circle_mode(j, alg.dim)) <= 1]
    meta = {'modes': modes, 'symbol_degree': degree, 'kind': 'toeplitz',
            'form_support': support}
    return FredholmModule(alg, rho, sign, common.Parity.ODD, 1, meta=meta)


def quasihomomorphism_module(rho_plus: np.ndarray, rho_minus: np.ndarray,
                             source: FiniteAlgebra, p: int = 0,
                             target: Optional[FiniteAlgebra] = None
                             ) -> FredholmModule:
    """
    Even module of a pair of homomorphisms on H+ + H-, F = [[0, 1], [1, 0]].

    Images are scalar matrices of shape (dim, h, h), or R-valued entries
    of shape (dim, h, h, R.dim) when a target R is given.
    """
    target = SCALARS if target is None else target
    plus = _regular(rho_plus, target)
    minus = _regular(rho_minus, target)
    if plus.shape != minus.shape:
        raise ValueError('rho_+ and rho_- act on spaces of different size')
    half = plus.shape[1]
    size = 2 * half
    rho = np.zeros((source.dim, size, size), dtype=complex)
    rho[:, :half, :half] = plus
    rho[:, half:, half:] = minus
    swap = np.zeros((size, size), dtype=complex)
    swap[:half, half:] = np.eye(half)
    swap[half:, :half] = np.eye(half)
    h_half = half // target.dim
    grading = np.concatenate([np.ones(h_half), -np.ones(h_half)])
    return FredholmModule(source, rho, swap, common.Parity.EVEN, p, grading,
                          target)


def _regular(images: np.ndarray, target: FiniteAlgebra) -> np.ndarray:
    """R-valued matrices to operators through the left regular rep."""
    images = np.asarray(images, dtype=complex)
    if images.ndim == 3:
        if target.dim == 1:
            return images
        images = np.multiply.outer(images, target.unit_coeffs)
    dim, h_dim = images.shape[0], images.shape[1]
    big = np.einsum('apqr,rst->aptqs', images, target.structure_constants)
    return big.reshape(dim, h_dim * target.dim, h_dim * target.dim)


def _random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    mat = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q_mat, r_mat = np.linalg.qr(mat)
    diag = r_mat.diagonal()
    return q_mat * (diag / np.abs(diag))


def basic_rep(alg: FiniteAlgebra) -> np.ndarray:
    """Faithful representation: matrix units or the left regular rep."""
    if alg.kind == 'matrix':
        return np.array([matrix_of(alg.basis(i)) for i in range(alg.dim)])
    return np.array([alg.left_regular(alg.basis(i).coeffs)
                     for i in range(alg.dim)])


def padded_rep(alg: FiniteAlgebra, size: int,
               rng: np.random.Generator) -> np.ndarray:
    base = basic_rep(alg)
    k = base.shape[1]
    if k > size:
        raise ValueError(f'Representation of size {k} does not fit in {size}')
    rep = np.zeros((alg.dim, size, size), dtype=complex)
    rep[:, :k, :k] = base
    unitary = _random_unitary(size, rng)
    return unitary @ rep @ unitary.conj().T


def random_module(alg: FiniteAlgebra, h_dim: int, parity: common.Parity,
                  rng: np.random.Generator) -> FredholmModule:
    """Dense module with randomly rotated rho and F."""
    if parity == common.Parity.EVEN:
        half = h_dim // 2
        plus = padded_rep(alg, half, rng)
        minus = padded_rep(alg, half, rng)
        module = quasihomomorphism_module(plus, minus, alg)
        unitary = _random_unitary(half, rng)
        rotation = np.zeros((2 * half, 2 * half), dtype=complex)
        rotation[:half, :half] = np.eye(half)
        rotation[half:, half:] = unitary
        sym = rotation @ module.F @ rotation.conj().T
        return FredholmModule(alg, module.rho, sym, parity, 0,
                              module.grading)
    rho = padded_rep(alg, h_dim, rng)
    unitary = _random_unitary(h_dim, rng)
    signs = np.where(np.arange(h_dim) < h_dim // 2, 1.0, -1.0)
    sym = unitary @ np.diag(signs) @ unitary.conj().T
    return FredholmModule(alg, rho, sym, parity, 1)


def direct_sum_modules(first: FredholmModule,
                       second: FredholmModule) -> FredholmModule:
    """Block sum of two modules over the same algebra."""
    if first.source is not second.source:
        raise common.ParentMismatch('Modules over different algebras')
    if first.parity != second.parity or first.target is not second.target:
        raise ValueError('Modules differ in parity or target')
    n1, n2 = first.size, second.size
    rho = np.zeros((first.source.dim, n1 + n2, n1 + n2), dtype=complex)
    rho[:, :n1, :n1] = first.rho
    rho[:, n1:, n1:] = second.rho
    sym = np.zeros((n1 + n2, n1 + n2), dtype=complex)
    sym[:n1, :n1] = first.F
    sym[n1:, n1:] = second.F
    grading = None
    if first.parity == common.Parity.EVEN:
        grading = np.concatenate([first.grading, second.grading])
    meta = {}
    if 'modes' in first.meta and 'modes' in second.meta:
        meta = {'modes': np.concatenate([first.meta['modes'],
                                         second.meta['modes']]),
                'symbol_degree': max(first.meta['symbol_degree'],
                                     second.meta['symbol_degree']),
                'interior': np.concatenate([_interior(first),
                                            _interior(second)])}
    return FredholmModule(first.source, rho, sym, first.parity,
                          max(first.p, second.p), grading, first.target,
                          meta)


def conjugate_module(module: FredholmModule,
                     unitary: np.ndarray) -> FredholmModule:
    """Module with rho replaced by U^-1 rho U for an even invertible U."""
    if module.parity == common.Parity.EVEN:
        gam = module.gamma_matrix
        if np.max(np.abs(gam @ unitary - unitary @ gam)) > \
                common.tol('involution'):
            raise ValueError('Conjugating operator is not even')
    rho = np.linalg.solve(unitary, module.rho @ unitary)
    return FredholmModule(module.source, rho, module.F, module.parity,
                          module.p, module.grading, module.target,
                          dict(module.meta))


def _interior(module: FredholmModule) -> np.ndarray:
    """Rows a symbol product cannot push across the window edge."""
    if 'interior' in module.meta:
        return np.asarray(module.meta['interior'])
    if 'modes' not in module.meta:
        return np.ones(module.size, dtype=bool)
    modes = np.asarray(module.meta['modes'])
    deg = int(module.meta['symbol_degree'])
    return np.abs(modes) <= modes.max() - 2 * deg


def homomorphism_residual(module: FredholmModule) -> float:
    """
    max |rho(e_i e_j) - rho(e_i) rho(e_j)| over basis pairs.

    Window models only compare interior modes and pairs whose product stays
    inside the symbol range.
    """
    alg = module.source
    c = alg.structure_constants
    rows = _interior(module)
    pairs = [(i, j) for i in range(alg.dim) for j in range(alg.dim)]
    if 'modes' in module.meta:
        deg = int(module.meta['symbol_degree'])
        pairs = [(i, j) for i, j in pairs
                 if abs(circle_mode(i, alg.dim) + circle_mode(j, alg.dim))
                 <= deg]
    worst = 0.0
    for i, j in pairs:
        prod = np.tensordot(c[i, j], module.rho, axes=1)
        diff = prod - module.rho[i] @ module.rho[j]
        worst = max(worst, float(np.max(np.abs(diff[rows][:, rows]))))
    return worst


def summability_profile(module: FredholmModule, a: AlgebraElement,
                        p: float) -> np.ndarray:
    """Partial sums of s_i^p over the singular values of [F, rho(a)]."""
    op = module.image(a)
    sing = np.linalg.svd(module.F @ op - op @ module.F, compute_uv=False)
    return np.cumsum(np.sort(sing)[::-1] ** p)


def _complex_array(raw) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def load_module(doc: Union[str, dict]) -> FredholmModule:
    """
    Module from JSON with keys algebra, h_dim, parity, p, rho, F, grading.

    ``algebra`` is a name understood by named_algebra or an algebra
    document; matrices are nested [re, im] pairs.
    """
    if isinstance(doc, str):
        if doc.lstrip().startswith('{'):
            doc = json.loads(doc)
        else:
            with open(doc, 'r') as fhandler:
                doc = json.load(fhandler)
    spec = doc['algebra']
    alg = named_algebra(spec) if isinstance(spec, str) else load_algebra(spec)
    parity = common.Parity[str(doc['parity']).upper()]
    rho = _complex_array(doc['rho'])
    sym = _complex_array(doc['F'])
    if rho.shape[1] != int(doc['h_dim']):
        raise ValueError('h_dim does not match rho')
    grading = doc.get('grading')
    if grading is not None:
        grading = np.asarray(grading, dtype=float)
    return FredholmModule(alg, rho, sym, parity, int(doc['p']), grading)
