"""
Noncommutative differential forms with the operators d, b and B, Chern
character chains and cochain pairings.

A degree n form over A is stored as one dense tensor. Degree 0 has shape
(dim,); degree n >= 1 has shape (dim + 1, dim, ..., dim) where slot 0 is the
unitization A+ with the formal unit at index ``dim`` and every other slot
holds the A-part of a d-factor. Operators act on all retained degrees;
contributions pushed above the top degree are dropped and flagged.
"""

from dataclasses import dataclass
from dataclasses import field
from math import factorial
from typing import Callable
from typing import Dict
from typing import Iterable
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
from loguru import logger

from ncindex import common
from ncindex.algebra_core import AlgebraElement
from ncindex.algebra_core import FiniteAlgebra
from ncindex.algebra_core import invert

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

Slots = List[np.ndarray]
Term = Tuple[complex, Slots]


@dataclass(eq=False)
class NCForm:
    """
    Truncated chain of noncommutative forms.

    Attributes:
        parent: the algebra A.
        top_degree: highest retained degree N.
        components: degree -> coefficient tensor (missing degrees are zero).
        truncation_loss: set when an operator dropped nonzero mass above N.
    """
    parent: FiniteAlgebra
    top_degree: int
    components: Dict[int, np.ndarray] = field(default_factory=dict)
    truncation_loss: bool = False

    def __post_init__(self) -> None:
        for n in list(self.components):
            if n > self.top_degree or n < 0:
                raise ValueError(f'Degree {n} outside [0, {self.top_degree}]')
            comp = np.asarray(self.components[n], dtype=complex)
            if comp.shape != component_shape(self.parent, n):
                raise ValueError(f'Degree {n} component has shape '
                                 f'{comp.shape}')
            self.components[n] = comp

    def component(self, n: int) -> np.ndarray:
        """Component of degree n, zero filled."""
        if n in self.components:
            return self.components[n]
        return np.zeros(component_shape(self.parent, n), dtype=complex)

    @property
    def degrees(self) -> List[int]:
        """Degrees carrying nonzero mass."""
        return sorted(n for n, comp in self.components.items()
                      if np.any(comp != 0))

    def __add__(self, other: 'NCForm') -> 'NCForm':
        return _combine(self, other, 1.0)

    def __sub__(self, other: 'NCForm') -> 'NCForm':
        return _combine(self, other, -1.0)

    def __mul__(self, scalar: complex) -> 'NCForm':
        return NCForm(self.parent, self.top_degree,
                      {n: c * scalar for n, c in self.components.items()},
                      self.truncation_loss)

    __rmul__ = __mul__

    def max_abs(self, below: Optional[int] = None) -> float:
        """Max coefficient modulus, optionally only on degrees < below."""
        values = [float(np.max(np.abs(c), initial=0.0))
                  for n, c in self.components.items()
                  if below is None or n < below]
        return max(values, default=0.0)


@dataclass(eq=False)
class CochainOnForms:
    """
    Linear functional on forms, evaluated degree by degree.

    Attributes:
        evaluator: (degree, component tensor) -> value.
        supported_degrees: degrees where the cochain may be nonzero.
        parity: EVEN or ODD.
        term_evaluator: optional (degree, slot list) -> value on rank one
            tensors, used when dense components are impractical.
        zero: factory of the zero value, plain 0.0 when missing.
        valued_in_x: the cochain maps two adjacent degrees into the even and
            odd parts of an X-complex, so form parity is not checked.
    """
    evaluator: Callable[[int, np.ndarray], object]
    supported_degrees: frozenset
    parity: common.Parity
    term_evaluator: Optional[Callable[[int, Slots], object]] = None
    zero: Optional[Callable[[], object]] = None
    valued_in_x: bool = False

    def null(self) -> object:
        """The zero value of this cochain."""
        return 0.0 if self.zero is None else self.zero()

    def __call__(self, x: NCForm) -> object:
        value = self.null()
        for n in sorted(x.components):
            if n in self.supported_degrees:
                value = value + self.evaluator(n, x.components[n])
        return value

    def on_terms(self, n: int, terms: Iterable[Term]) -> object:
        """Value on a sum of rank one degree n tensors."""
        value = self.null()
        if n not in self.supported_degrees:
            return value
        for coeff, slots in terms:
            if self.term_evaluator is not None:
                value = value + self.term_evaluator(n, slots) * coeff
            else:
                value = value + self.evaluator(n, outer(slots)) * coeff
        return value


def component_shape(alg: FiniteAlgebra, n: int) -> Tuple[int, ...]:
    """Tensor shape of degree n forms over ``alg``."""
    if n == 0:
        return (alg.dim,)
    return (alg.dim + 1,) + (alg.dim,) * n


def _combine(x: NCForm, y: NCForm, sign: float) -> NCForm:
    if x.parent is not y.parent:
        raise common.ParentMismatch('Forms over different algebras')
    top = max(x.top_degree, y.top_degree)
    comps = {n: c.copy() for n, c in x.components.items()}
    for n, comp in y.components.items():
        comps[n] = comps[n] + sign * comp if n in comps else sign * comp
    return NCForm(x.parent, top, comps,
                  x.truncation_loss or y.truncation_loss)


def outer(slots: Sequence[np.ndarray]) -> np.ndarray:
    """Outer product of slot vectors."""
    out = np.asarray(slots[0], dtype=complex)
    for vec in slots[1:]:
        out = np.multiply.outer(out, vec)
    return out


def unitized(a: AlgebraElement, unit_coeff: complex = 0.0) -> np.ndarray:
    """Coordinates of a + unit_coeff * 1+ in A+."""
    return np.append(a.coeffs, unit_coeff)


def _plus_left(alg: FiniteAlgebra) -> np.ndarray:
    """P[i, j, k]: product A+ x A -> A."""
    prod = np.zeros((alg.dim + 1, alg.dim, alg.dim), dtype=complex)
    prod[:alg.dim] = alg.structure_constants
    prod[alg.dim] = np.eye(alg.dim)
    return prod


def _plus_right(alg: FiniteAlgebra) -> np.ndarray:
    """P[j, i, k]: product A x A+ -> A."""
    prod = np.zeros((alg.dim, alg.dim + 1, alg.dim), dtype=complex)
    prod[:, :alg.dim] = alg.structure_constants
    prod[:, alg.dim] = np.eye(alg.dim)
    return prod


def _pad_unit(alg: FiniteAlgebra, comp: np.ndarray) -> np.ndarray:
    """Embed a tensor with an A-valued slot 0 into A+."""
    pad = [(0, 1)] + [(0, 0)] * (comp.ndim - 1)
    return np.pad(comp, pad)


def _a_part(alg: FiniteAlgebra, n: int, comp: np.ndarray) -> np.ndarray:
    return comp if n == 0 else comp[:alg.dim]


def _flag(x: NCForm, dropped: np.ndarray, op: str) -> bool:
    if np.any(dropped != 0):
        logger.warning(f'TruncationLoss: {op} pushed mass above degree '
                       f'{x.top_degree}')
        return True
    return False


def d(x: NCForm) -> NCForm:
    """Universal differential, a0 da1.. -> da0 da1.."""
    alg = x.parent
    out = {}
    loss = x.truncation_loss
    for n, comp in x.components.items():
        image = np.zeros((alg.dim + 1,) + (alg.dim,) * (n + 1),
                         dtype=complex)
        image[alg.dim] = _a_part(alg, n, comp)
        if n + 1 > x.top_degree:
            loss = _flag(x, image, 'd') or loss
            continue
        out[n + 1] = out.get(n + 1, 0) + image
    return NCForm(alg, x.top_degree, out, loss)


def hochschild_b(x: NCForm) -> NCForm:
    """Hochschild boundary b, lowering the degree by one."""
    alg = x.parent
    out = {}
    plus_left = _plus_left(alg)
    plus_right = _plus_right(alg)
    c = alg.structure_constants
    for n, comp in x.components.items():
        if n == 0:
            continue
        # a0 a1 da2 .. dan
        image = np.moveaxis(np.tensordot(comp, plus_left,
                                         axes=([0, 1], [0, 1])), -1, 0)
        # an a0 da1 .. dan-1
        last = np.tensordot(comp, plus_right, axes=([n, 0], [0, 1]))
        image = image + (-1) ** n * np.moveaxis(last, -1, 0)
        if n > 1:
            image = _pad_unit(alg, image)
        for i in range(1, n):
            term = np.tensordot(comp, c, axes=([i, i + 1], [0, 1]))
            image = image + (-1) ** i * np.moveaxis(term, -1, i)
        out[n - 1] = out.get(n - 1, 0) + image
    return NCForm(alg, x.top_degree, out, x.truncation_loss)


def connes_B(x: NCForm) -> NCForm:  # pylint: disable=invalid-name
    """Connes operator B, raising the degree by one."""
    alg = x.parent
    out = {}
    loss = x.truncation_loss
    for n, comp in x.components.items():
        body = _a_part(alg, n, comp)
        rotated = np.zeros(body.shape, dtype=complex)
        for i in range(n + 1):
            axes = [(p - i) % (n + 1) for p in range(n + 1)]
            rotated = rotated + (-1) ** (n * i) * np.transpose(body, axes)
        image = np.zeros((alg.dim + 1,) + body.shape, dtype=complex)
        image[alg.dim] = rotated
        if n + 1 > x.top_degree:
            loss = _flag(x, image, 'B') or loss
            continue
        out[n + 1] = out.get(n + 1, 0) + image
    return NCForm(alg, x.top_degree, out, loss)


def boundary(x: NCForm) -> NCForm:
    """The total boundary b + B."""
    return hochschild_b(x) + connes_B(x)


def check_idempotent(e: AlgebraElement) -> None:
    defect = (e * e - e).norm()
    if defect > common.tol('idempotent'):
        raise common.NotIdempotent(f'e*e - e has size {defect:.3e}')


def chern_idempotent_terms(e: AlgebraElement, degree: int) -> List[Term]:
    """
    Rank one factorisation of the degree ``degree`` part of ch(e).

    ch_0 = e and ch_2k = (-1)^k (2k)!/k! (e - 1+/2) (de)^2k.
    """
    if degree % 2:
        return []
    if degree == 0:
        return [(1.0, [e.coeffs])]
    k = degree // 2
    coeff = (-1) ** k * factorial(2 * k) / factorial(k)
    return [(coeff, [unitized(e, -0.5)] + [e.coeffs] * degree)]


def chern_invertible_terms(u: AlgebraElement, degree: int,
                           u_inv: Optional[AlgebraElement] = None
                           ) -> List[Term]:
    """
    Rank one factorisation of the degree ``degree`` part of ch(u).

    ch_2k+1 = (2 pi i)^(-1/2) (-1)^k k! u^-1 du (du^-1 du)^k, where u is
    read in A+ as 1+ + (u - 1).
    """
    if degree % 2 == 0:
        return []
    alg = u.parent
    if u_inv is None:
        u_inv = invert(u)
    k = (degree - 1) // 2
    coeff = (-1) ** k * factorial(k) / common.SQRT_2PI_I
    unit = alg.unit()
    slot_u = (u - unit).coeffs
    slot_v = (u_inv - unit).coeffs
    slots = [unitized(u_inv - unit, 1.0)]
    for i in range(degree):
        slots.append(slot_u if i % 2 == 0 else slot_v)
    return [(coeff, slots)]


def chern_idempotent(e: AlgebraElement, top_degree: int) -> NCForm:
    """ch(e) as an even chain through ``top_degree``."""
    check_idempotent(e)
    comps = {}
    for n in range(0, top_degree + 1, 2):
        for coeff, slots in chern_idempotent_terms(e, n):
            comps[n] = comps.get(n, 0) + coeff * outer(slots)
    return NCForm(e.parent, top_degree, comps)


def chern_invertible(u: AlgebraElement, top_degree: int) -> NCForm:
    """ch(u) as an odd chain through ``top_degree``."""
    u_inv = invert(u)
    comps = {}
    for n in range(1, top_degree + 1, 2):
        for coeff, slots in chern_invertible_terms(u, n, u_inv):
            comps[n] = comps.get(n, 0) + coeff * outer(slots)
    return NCForm(u.parent, top_degree, comps)


def form_parity(x: NCForm) -> Optional[common.Parity]:
    """Parity of a homogeneous parity form, None if mixed or zero."""
    parities = {n % 2 for n in x.degrees}
    if len(parities) != 1:
        return None
    return common.Parity(parities.pop())


def pair(phi: CochainOnForms, x: NCForm, strict: bool = False) -> object:
    """Pairing sum_n phi(x_n)."""
    parity = form_parity(x)
    if not phi.valued_in_x and parity is not None and parity != phi.parity:
        raise common.ParityMismatch(f'{phi.parity.name} cochain against '
                                    f'{parity.name} form')
    outside = [n for n in x.degrees if n not in phi.supported_degrees]
    if outside and strict:
        raise common.DegreeUnsupported(f'Form has mass in degrees {outside}')
    return phi(x)


def pair_terms(phi: CochainOnForms, terms: Dict[int, List[Term]]) -> object:
    """Pairing with a chain given degree wise as rank one terms."""
    value = phi.null()
    for n in sorted(terms):
        value = value + phi.on_terms(n, terms[n])
    return value


def random_form(alg: FiniteAlgebra, degree: int, rng: np.random.Generator,
                top_degree: Optional[int] = None,
                support: Optional[Sequence[int]] = None) -> NCForm:
    """
    Random homogeneous form of the given degree.

    ``support`` restricts the A-coordinates of every slot; the formal unit
    of slot 0 is always allowed.
    """
    shape = component_shape(alg, degree)
    comp = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if support is not None:
        mask = np.zeros(alg.dim, dtype=bool)
        mask[list(support)] = True
        first = mask if degree == 0 else np.append(mask, True)
        full = first
        for _ in range(degree):
            full = np.multiply.outer(full, mask)
        comp = comp * full
    top = degree if top_degree is None else top_degree
    return NCForm(alg, top, {degree: comp})


def form_to_json(x: NCForm) -> dict:
    """JSON document of a form: degree -> nested [re, im] pairs."""
    return {'dim': x.parent.dim, 'top_degree': x.top_degree,
            'components': {str(n): np.stack([c.real, c.imag],
                                            axis=-1).tolist()
                           for n, c in sorted(x.components.items())}}


def form_from_json(alg: FiniteAlgebra, doc: dict) -> NCForm:
    """Inverse of form_to_json."""
    if int(doc['dim']) != alg.dim:
        raise ValueError('Form and algebra dimensions differ')
    comps = {}
    for key, raw in doc['components'].items():
        arr = np.asarray(raw, dtype=float)
        comps[int(key)] = arr[..., 0] + 1j * arr[..., 1]
    return NCForm(alg, int(doc['top_degree']), comps)


def operator_matrix(alg: FiniteAlgebra, src: int, dst: int, top: int,
                     op: Callable[[NCForm], NCForm]) -> np.ndarray:
    """Matrix of ``op`` from degree src to degree dst."""
    shape = component_shape(alg, src)
    size = int(np.prod(shape))
    cols = []
    for idx in range(size):
        basis = np.zeros(size, dtype=complex)
        basis[idx] = 1.0
        x = NCForm(alg, top, {src: basis.reshape(shape)})
        cols.append(op(x).component(dst).reshape(-1))
    return np.array(cols).T


def homology_ranks(alg: FiniteAlgebra, top_degree: int) -> Tuple[int, int]:
    """
    Even and odd homology ranks of the (b+B)-complex truncated at N.

    The truncation is the quotient by b(Omega^(N+1)) + Omega^(>N), which is
    a subcomplex, so the quotient is a genuine Z/2-graded complex. Intended
    for small algebras.
    """
    top = top_degree
    cutoff = common.tol('rank_cutoff')
    sizes = [int(np.prod(component_shape(alg, n))) for n in range(top + 1)]
    # complement of b(Omega^(N+1)) inside Omega^N
    b_top = operator_matrix(alg, top + 1, top, top + 1, hochschild_b)
    u_mat, sing, _ = np.linalg.svd(b_top)
    rank_w = int(np.sum(sing > cutoff * max(sing.max(initial=0.0), 1.0)))
    quotient = u_mat[:, rank_w:].conj().T
    coords = [np.eye(size) for size in sizes[:-1]] + [quotient]
    dims = [c.shape[0] for c in coords]
    offsets = np.concatenate([[0], np.cumsum(dims)])
    total = np.zeros((offsets[-1], offsets[-1]), dtype=complex)
    for src in range(top + 1):
        lift = coords[src].conj().T
        for dst, op in ((src - 1, hochschild_b), (src + 1, connes_B)):
            if dst < 0 or dst > top:
                continue
            mat = coords[dst] @ operator_matrix(alg, src, dst, top, op) @ lift
            total[offsets[dst]:offsets[dst + 1],
                  offsets[src]:offsets[src + 1]] = mat
    parity = np.concatenate([np.full(dims[n], n % 2) for n in range(top + 1)])
    ranks = []
    for p in (0, 1):
        block = total[np.ix_(parity != p, parity == p)]
        sing = np.linalg.svd(block, compute_uv=False) if block.size else \
            np.zeros(0)
        ranks.append(int(np.sum(sing > cutoff * max(sing.max(initial=0.0),
                                                    1.0))))
    even_dim = int(np.sum(parity == 0))
    odd_dim = int(np.sum(parity == 1))
    return even_dim - ranks[0] - ranks[1], odd_dim - ranks[1] - ranks[0]
