"""
Finite dimensional associative algebras given by structure constants.
"""

from dataclasses import dataclass
from dataclasses import field
from itertools import permutations
import json
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
from loguru import logger

from ncindex import common

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


@dataclass(frozen=True, eq=False)
class FiniteAlgebra:
    """
    Associative algebra over C presented by structure constants.

    Attributes:
        dim: number of basis elements.
        basis_labels: label per basis element.
        structure_constants: c[i, j, k] with e_i e_j = sum_k c[i, j, k] e_k.
        unit_coeffs: coefficients of the unit, None for non unital algebras.
        kind: presentation kind ('matrix', 'group', 'crossed', 'circle', ...).
        order: size n of M_n, |G| for group algebras, N for circle algebras.
    """
    dim: int
    basis_labels: Tuple[str, ...]
    structure_constants: np.ndarray
    unit_coeffs: Optional[np.ndarray] = None
    kind: str = 'custom'
    order: int = 0
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        c = np.asarray(self.structure_constants, dtype=complex)
        if c.shape != (self.dim,) * 3:
            raise ValueError(f'Structure constants must have shape '
                             f'{(self.dim,) * 3}, got {c.shape}')
        if len(self.basis_labels) != self.dim:
            raise ValueError('Expected one label per basis element')
        c.setflags(write=False)
        object.__setattr__(self, 'structure_constants', c)
        if self.unit_coeffs is not None:
            unit = np.asarray(self.unit_coeffs, dtype=complex)
            unit.setflags(write=False)
            object.__setattr__(self, 'unit_coeffs', unit)

    @property
    def has_unit(self) -> bool:
        """Whether the algebra is unital."""
        return self.unit_coeffs is not None

    def element(self, coeffs: Sequence[complex]) -> 'AlgebraElement':
        """Element with the given coefficient vector."""
        return AlgebraElement(self, np.asarray(coeffs, dtype=complex))

    def basis(self, i: int) -> 'AlgebraElement':
        """The i-th basis element."""
        coeffs = np.zeros(self.dim, dtype=complex)
        coeffs[i] = 1.0
        return AlgebraElement(self, coeffs)

    def zero(self) -> 'AlgebraElement':
        """The zero element."""
        return AlgebraElement(self, np.zeros(self.dim, dtype=complex))

    def unit(self) -> 'AlgebraElement':
        """The unit; raises ValueError for non unital algebras."""
        if not self.has_unit:
            raise ValueError('Algebra has no unit')
        return AlgebraElement(self, self.unit_coeffs.copy())

    def left_regular(self, coeffs: np.ndarray) -> np.ndarray:
        """Matrix L with (L x)_k = (a x)_k."""
        return np.einsum('i,ijk->kj', coeffs, self.structure_constants)

    def right_regular(self, coeffs: np.ndarray) -> np.ndarray:
        """Matrix R with (R x)_k = (x a)_k."""
        return np.einsum('j,ijk->ki', coeffs, self.structure_constants)

    def product(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Product of coefficient vectors."""
        return np.einsum('i,j,ijk->k', x, y, self.structure_constants)


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """Element of a FiniteAlgebra as a coefficient vector."""
    parent: FiniteAlgebra
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != (self.parent.dim,):
            raise ValueError(f'Expected {self.parent.dim} coefficients, got '
                             f'shape {coeffs.shape}')
        object.__setattr__(self, 'coeffs', coeffs)

    def _check(self, other: 'AlgebraElement') -> None:
        if other.parent is not self.parent:
            raise common.ParentMismatch('Elements belong to different '
                                        'algebras')

    def __add__(self, other: 'AlgebraElement') -> 'AlgebraElement':
        self._check(other)
        return AlgebraElement(self.parent, self.coeffs + other.coeffs)

    def __sub__(self, other: 'AlgebraElement') -> 'AlgebraElement':
        self._check(other)
        return AlgebraElement(self.parent, self.coeffs - other.coeffs)

    def __neg__(self) -> 'AlgebraElement':
        return AlgebraElement(self.parent, -self.coeffs)

    def __mul__(self, other: Union['AlgebraElement', complex]
               ) -> 'AlgebraElement':
        if isinstance(other, AlgebraElement):
            return multiply(self, other)
        return AlgebraElement(self.parent, self.coeffs * other)

    def __rmul__(self, other: complex) -> 'AlgebraElement':
        return AlgebraElement(self.parent, self.coeffs * other)

    def norm(self) -> float:
        """Max norm of the coefficients."""
        return float(np.max(np.abs(self.coeffs), initial=0.0))


@dataclass(eq=False)
class LinearFunctional:
    """
    Linear functional on a FiniteAlgebra.

    Attributes:
        parent: the algebra.
        weights: phi(e_i) per basis element.
        is_trace: set by verify_trace.
        lattice_generator: generator of the image of K_0 under phi, if known.
    """
    parent: FiniteAlgebra
    weights: np.ndarray
    is_trace: bool = False
    lattice_generator: Optional[float] = None

    def __call__(self, a: AlgebraElement) -> complex:
        if a.parent is not self.parent:
            raise common.ParentMismatch('Functional applied to a foreign '
                                        'element')
        return complex(np.dot(self.weights, a.coeffs))


def multiply(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    """Product a*b by structure constant contraction."""
    if a.parent is not b.parent:
        raise common.ParentMismatch('Cannot multiply elements of different '
                                    'algebras')
    return AlgebraElement(a.parent, a.parent.product(a.coeffs, b.coeffs))


def invert(a: AlgebraElement) -> AlgebraElement:
    """Inverse of ``a`` via the left regular representation."""
    alg = a.parent
    if not alg.has_unit:
        raise ValueError('Inversion needs a unital algebra')
    left = alg.left_regular(a.coeffs)
    try:
        x = np.linalg.solve(left, alg.unit_coeffs)
    except np.linalg.LinAlgError as err:
        raise common.Singular(f'Element is singular: {err}') from None
    residual = max(np.max(np.abs(alg.product(a.coeffs, x) - alg.unit_coeffs)),
                   np.max(np.abs(alg.product(x, a.coeffs) - alg.unit_coeffs)))
    if not np.isfinite(residual) or residual > common.tol('invert_residual'):
        raise common.Singular(f'Inversion residual {residual:.3e} too large')
    return AlgebraElement(alg, x)


def verify_trace(phi: LinearFunctional) -> bool:
    """Check phi(e_i e_j) == phi(e_j e_i) on all basis pairs."""
    gram = np.einsum('ijk,k->ij', phi.parent.structure_constants, phi.weights)
    defect = float(np.max(np.abs(gram - gram.T), initial=0.0))
    phi.is_trace = defect <= common.tol('trace')
    logger.debug(f'Trace defect {defect:.3e} -> {phi.is_trace}')
    return phi.is_trace


def associativity_residual(alg: FiniteAlgebra) -> float:
    """Max over basis triples of |(e_i e_j) e_k - e_i (e_j e_k)|."""
    c = alg.structure_constants
    residual = 0.0
    for i in range(alg.dim):
        left = np.einsum('jm,mkl->jkl', c[i], c)
        right = np.einsum('jkm,ml->jkl', c, c[i])
        residual = max(residual, float(np.max(np.abs(left - right))))
    return residual


def unit_residual(alg: FiniteAlgebra) -> float:
    """Max deviation of unit*e_i and e_i*unit from e_i."""
    if not alg.has_unit:
        return 0.0
    eye = np.eye(alg.dim)
    left = alg.left_regular(alg.unit_coeffs)
    right = alg.right_regular(alg.unit_coeffs)
    return float(max(np.max(np.abs(left - eye)), np.max(np.abs(right - eye))))


def _checked(alg: FiniteAlgebra) -> FiniteAlgebra:
    if associativity_residual(alg) > common.tol('associativity'):
        raise ValueError('Structure constants are not associative')
    if unit_residual(alg) > common.tol('unit'):
        raise ValueError('Unit coefficients do not act as a unit')
    return alg


def make_matrix_algebra(n: int) -> FiniteAlgebra:
    """M_n(C) with matrix units e_ij at index i*n + j."""
    if n < 1:
        raise ValueError('n must be positive')
    c = np.zeros((n * n,) * 3, dtype=complex)
    for i in range(n):
        for j in range(n):
            for l in range(n):
                c[i * n + j, j * n + l, i * n + l] = 1.0
    unit = np.eye(n, dtype=complex).reshape(-1)
    labels = tuple(f'e{i + 1}{j + 1}' for i in range(n) for j in range(n))
    return FiniteAlgebra(n * n, labels, c, unit, 'matrix', n)


def matrix_of(a: AlgebraElement) -> np.ndarray:
    """The n x n matrix of an element of M_n."""
    if a.parent.kind != 'matrix':
        raise ValueError('Not a matrix algebra element')
    n = a.parent.order
    return a.coeffs.reshape(n, n)


def from_matrix(alg: FiniteAlgebra, mat: np.ndarray) -> AlgebraElement:
    """Element of M_n with the given matrix."""
    if alg.kind != 'matrix':
        raise ValueError('Not a matrix algebra')
    return alg.element(np.asarray(mat, dtype=complex).reshape(-1))


def _check_group(table: np.ndarray) -> int:
    """Return the identity index or raise NotAGroup."""
    n = table.shape[0]
    if table.ndim != 2 or table.shape != (n, n) or n == 0:
        raise common.NotAGroup('Table must be square and non empty')
    if table.min() < 0 or table.max() >= n:
        raise common.NotAGroup('Table entries out of range')
    rng = np.arange(n)
    identities = [e for e in range(n)
                  if np.array_equal(table[e], rng)
                  and np.array_equal(table[:, e], rng)]
    if not identities:
        raise common.NotAGroup('No identity element')
    ident = identities[0]
    for g in range(n):
        if ident not in table[g] or ident not in table[:, g]:
            raise common.NotAGroup(f'Element {g} has no inverse')
    # left[a, b, c] = (ab)c and right[a, b, c] = a(bc)
    left = table[table[:, :, None], rng[None, None, :]]
    right = table[rng[:, None, None], table[None, :, :]]
    if not np.array_equal(left, right):
        raise common.NotAGroup('Table is not associative')
    return ident


def make_group_algebra(mult_table: Sequence[Sequence[int]],
                       labels: Optional[Sequence[str]] = None
                       ) -> FiniteAlgebra:
    """Convolution algebra C[G] of the group with the given table."""
    table = np.asarray(mult_table, dtype=int)
    ident = _check_group(table)
    n = table.shape[0]
    c = np.zeros((n, n, n), dtype=complex)
    for g in range(n):
        c[g, np.arange(n), table[g]] = 1.0
    unit = np.zeros(n, dtype=complex)
    unit[ident] = 1.0
    labels = tuple(labels) if labels is not None else tuple(
        f'g{g}' for g in range(n))
    return FiniteAlgebra(n, labels, c, unit, 'group', n,
                         {'table': table.tolist(), 'identity': ident})


def cyclic_table(n: int) -> List[List[int]]:
    """Multiplication table of Z/n."""
    return [[(i + j) % n for j in range(n)] for i in range(n)]


def symmetric_group_table(n: int) -> List[List[int]]:
    """Multiplication table of S_n, (gh)(x) = g(h(x))."""
    perms = list(permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    return [[index[tuple(g[h[x]] for x in range(n))] for h in perms]
            for g in perms]


def make_circle_algebra(degree: int) -> FiniteAlgebra:
    """
    C[Z/N], N = 2*degree + 1, read as trigonometric polynomials.

    The basis element of index j mod N stands for z^j, j in [-degree, degree].
    """
    n = 2 * degree + 1
    alg = make_group_algebra(cyclic_table(n),
                             [f'z^{circle_mode(i, n)}' for i in range(n)])
    return FiniteAlgebra(alg.dim, alg.basis_labels, alg.structure_constants,
                         alg.unit_coeffs, 'circle', n, alg.meta)


def circle_mode(index: int, n: int) -> int:
    """Centered representative of ``index`` mod ``n``."""
    half = n // 2
    return (index + half) % n - half


def circle_element(alg: FiniteAlgebra, modes: Dict[int, complex]
                   ) -> AlgebraElement:
    """Trigonometric polynomial sum_j modes[j] z^j in a circle algebra."""
    coeffs = np.zeros(alg.dim, dtype=complex)
    for mode, value in modes.items():
        if abs(mode) > alg.dim // 2:
            raise ValueError(f'Mode {mode} outside the circle algebra')
        coeffs[mode % alg.dim] += value
    return alg.element(coeffs)


def make_crossed_product(action: Sequence[Sequence[int]],
                         mult_table: Sequence[Sequence[int]]
                         ) -> FiniteAlgebra:
    """
    C(X) x| G for a finite group acting on a finite set.

    ``action[g][y]`` is g.y. Basis delta_x u_g sits at index x*|G| + g and
    (delta_x u_g)(delta_y u_h) = delta_x delta_{x, g.y} u_{gh}.
    """
    table = np.asarray(mult_table, dtype=int)
    ident = _check_group(table)
    act = np.asarray(action, dtype=int)
    order, points = act.shape
    if order != table.shape[0]:
        raise ValueError('Action and group sizes differ')
    for g in range(order):
        if sorted(act[g]) != list(range(points)):
            raise ValueError(f'Action of {g} is not a permutation')
        for h in range(order):
            if not np.array_equal(act[table[g, h]], act[g][act[h]]):
                raise ValueError('Action is not a homomorphism')
    dim = points * order
    c = np.zeros((dim,) * 3, dtype=complex)
    for x in range(points):
        for g in range(order):
            for h in range(order):
                y = int(np.nonzero(act[g] == x)[0][0])
                c[x * order + g, y * order + h, x * order + table[g, h]] = 1.0
    unit = np.zeros(dim, dtype=complex)
    unit[np.arange(points) * order + ident] = 1.0
    labels = tuple(f'd{x}u{g}' for x in range(points) for g in range(order))
    return FiniteAlgebra(dim, labels, c, unit, 'crossed', order,
                         {'points': points})


def direct_sum(alg_a: FiniteAlgebra, alg_b: FiniteAlgebra) -> FiniteAlgebra:
    """Direct sum A + B, unital iff both summands are."""
    dim = alg_a.dim + alg_b.dim
    c = np.zeros((dim,) * 3, dtype=complex)
    c[:alg_a.dim, :alg_a.dim, :alg_a.dim] = alg_a.structure_constants
    c[alg_a.dim:, alg_a.dim:, alg_a.dim:] = alg_b.structure_constants
    unit = None
    if alg_a.has_unit and alg_b.has_unit:
        unit = np.concatenate([alg_a.unit_coeffs, alg_b.unit_coeffs])
    labels = tuple(f'a.{l}' for l in alg_a.basis_labels) + tuple(
        f'b.{l}' for l in alg_b.basis_labels)
    return FiniteAlgebra(dim, labels, c, unit, 'sum', 0)


def matrix_trace(alg: FiniteAlgebra) -> LinearFunctional:
    """Matrix trace on M_n."""
    if alg.kind != 'matrix':
        raise ValueError('Not a matrix algebra')
    weights = np.eye(alg.order, dtype=complex).reshape(-1)
    phi = LinearFunctional(alg, weights, lattice_generator=1.0)
    verify_trace(phi)
    return phi


def group_trace(alg: FiniteAlgebra) -> LinearFunctional:
    """Evaluation at the identity, normalized so tau(1) = 1."""
    if alg.kind not in ('group', 'circle'):
        raise ValueError('Not a group algebra')
    phi = LinearFunctional(alg, alg.unit_coeffs.copy(),
                           lattice_generator=1.0 / alg.order)
    verify_trace(phi)
    return phi


def load_algebra(doc: Union[str, dict]) -> FiniteAlgebra:
    """
    Algebra from its JSON presentation.

    ``doc`` is a path, a JSON string or an already parsed dict with keys
    dim, labels, c (nested [re, im] pairs) and optionally unit.
    """
    if isinstance(doc, str):
        if doc.lstrip().startswith('{'):
            doc = json.loads(doc)
        else:
            with open(doc, 'r') as fhandler:
                doc = json.load(fhandler)
    raw = np.asarray(doc['c'], dtype=float)
    c = raw[..., 0] + 1j * raw[..., 1]
    unit = None
    if doc.get('unit') is not None:
        raw_unit = np.asarray(doc['unit'], dtype=float)
        unit = raw_unit[..., 0] + 1j * raw_unit[..., 1]
    dim = int(doc['dim'])
    labels = tuple(doc.get('labels') or [f'e{i}' for i in range(dim)])
    return _checked(FiniteAlgebra(dim, labels, c, unit,
                                  doc.get('kind', 'custom'),
                                  int(doc.get('order', 0))))


def dump_algebra(alg: FiniteAlgebra) -> dict:
    """JSON presentation of ``alg``."""
    c = alg.structure_constants
    doc = {'dim': alg.dim, 'labels': list(alg.basis_labels),
           'c': np.stack([c.real, c.imag], axis=-1).tolist(),
           'kind': alg.kind, 'order': alg.order}
    if alg.has_unit:
        doc['unit'] = np.stack([alg.unit_coeffs.real, alg.unit_coeffs.imag],
                               axis=-1).tolist()
    return doc


def named_algebra(name: str) -> FiniteAlgebra:
    """Algebras addressable from experiment configs."""
    name = name.lower()
    if name == 'c':
        return make_matrix_algebra(1)
    if name.startswith('m') and name[1:].isdigit():
        return make_matrix_algebra(int(name[1:]))
    if name.startswith('z') and name[1:].isdigit():
        return make_group_algebra(cyclic_table(int(name[1:])))
    if name == 's3':
        return make_group_algebra(symmetric_group_table(3))
    raise common.ConfigInvalid(f'Unknown algebra "{name}"')
