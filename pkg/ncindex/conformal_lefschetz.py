"""
Partially defined conformal maps of the plane: fixed point orders, jets,
localized Lefschetz contributions, the groupoid trace and its cocycles.
"""

import abc
from dataclasses import dataclass
from dataclasses import field
from functools import cached_property
from math import factorial
import json
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
from loguru import logger
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as poly2d
from scipy import integrate
from scipy.signal import convolve2d
from scipy.special import comb
from scipy.special import softmax

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

CLUSTER_RADIUS = 1e-4
SUPPORT_TOL = 1e-10
GAUSSIAN_REACH = 7.0
MAP_KINDS = ('moebius', 'polynomial', 'germ')


# Jets


@dataclass(frozen=True, eq=False)
class Jet:
    """
    Truncated Taylor expansion sum_k c_k (z - base)^k, k <= order.

    Coefficients beyond the order are unknown rather than zero, so binary
    operations truncate to the lower order.
    """
    base: complex
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        object.__setattr__(self, 'coeffs', coeffs)

    @classmethod
    def identity(cls, base: complex, order: int) -> 'Jet':
        """The coordinate z around base."""
        coeffs = np.zeros(order + 1, dtype=complex)
        coeffs[0] = base
        if order:
            coeffs[1] = 1.0
        return cls(base, coeffs)

    @classmethod
    def monomial(cls, base: complex, power: int, order: int) -> 'Jet':
        """(z - base)^power."""
        coeffs = np.zeros(order + 1, dtype=complex)
        if power <= order:
            coeffs[power] = 1.0
        return cls(base, coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def coefficient(self, k: int) -> complex:
        return complex(self.coeffs[k]) if k <= self.order else 0j

    def derivative_at(self, k: int) -> complex:
        """k-th derivative at the base point."""
        return factorial(k) * self.coefficient(k)

    def _pair(self, other: 'Jet') -> Tuple[np.ndarray, np.ndarray]:
        if abs(other.base - self.base) > common.tol('coincide'):
            raise ValueError('Jets at different base points')
        size = min(len(self.coeffs), len(other.coeffs))
        return self.coeffs[:size], other.coeffs[:size]

    def __add__(self, other: Union['Jet', complex]) -> 'Jet':
        if not isinstance(other, Jet):
            coeffs = self.coeffs.copy()
            coeffs[0] += other
            return Jet(self.base, coeffs)
        left, right = self._pair(other)
        return Jet(self.base, left + right)

    __radd__ = __add__

    def __neg__(self) -> 'Jet':
        return Jet(self.base, -self.coeffs)

    def __sub__(self, other: Union['Jet', complex]) -> 'Jet':
        return self + (-other)

    def __mul__(self, other: Union['Jet', complex]) -> 'Jet':
        if not isinstance(other, Jet):
            return Jet(self.base, self.coeffs * other)
        left, right = self._pair(other)
        return Jet(self.base, np.convolve(left, right)[:len(left)])

    __rmul__ = __mul__

    def valuation(self, tol: Optional[float] = None) -> int:
        """Index of the first coefficient above tol; order + 1 if none."""
        tol = common.tol('jet_valuation') if tol is None else tol
        above = np.flatnonzero(np.abs(self.coeffs) > tol)
        return int(above[0]) if len(above) else self.order + 1

    def __truediv__(self, other: Union['Jet', complex]) -> 'Jet':
        """Series quotient; the valuation of other is divided out first."""
        if not isinstance(other, Jet):
            return Jet(self.base, self.coeffs / other)
        shift = other.valuation()
        if shift > other.order:
            raise ZeroDivisionError('Division by a vanishing jet')
        if self.valuation() < shift:
            raise ValueError('Quotient is not holomorphic at the base point')
        num, den = self._pair(other)
        num, den = num[shift:], den[shift:]
        out = np.zeros(len(num), dtype=complex)
        for k in range(len(num)):
            out[k] = (num[k] - np.dot(den[1:k + 1], out[k - 1::-1][:k])) \
                / den[0]
        return Jet(self.base, out)

    def deriv(self) -> 'Jet':
        """d/dz, one order lower."""
        k = np.arange(1, len(self.coeffs))
        return Jet(self.base, self.coeffs[1:] * k)

    def compose(self, inner: 'Jet') -> 'Jet':
        """self(inner(z)), with inner(base of inner) = base of self."""
        if abs(inner.coefficient(0) - self.base) > common.tol('coincide'):
            raise ValueError('Inner jet does not start at the base point')
        size = min(len(self.coeffs), len(inner.coeffs))
        step = Jet(inner.base, inner.coeffs[:size]) - self.base
        out = Jet(inner.base, np.full(size, 0j))
        for c in self.coeffs[size - 1::-1]:
            out = out * step + c
        return out


# Conformal maps


@dataclass(frozen=True, eq=False)
class ConformalMap:
    """
    Holomorphic injective map on the plane minus excluded closed disks.

    Attributes:
        kind: 'moebius' (params a, b, c, d), 'polynomial' (ascending
            coefficients) or 'germ' (coefficients in z - base).
        params: the coefficients.
        exclusions: (center, radius) of the excluded disks; the pole of a
            Moebius map is always excluded.
        label: group label.
        base: expansion point of a germ.
    """
    kind: str
    params: np.ndarray
    exclusions: Tuple[Tuple[complex, float], ...] = ()
    label: str = 'g'
    base: complex = 0j

    def __post_init__(self) -> None:
        if self.kind not in MAP_KINDS:
            raise ValueError(f'Unknown map kind {self.kind!r}')
        params = np.asarray(self.params, dtype=complex).ravel()
        object.__setattr__(self, 'params', params)
        if self.kind == 'moebius':
            if len(params) != 4:
                raise ValueError('Moebius maps take a, b, c, d')
            a, b, c, d = params
            if abs(a * d - b * c) < common.tol('rank_cutoff'):
                raise ValueError('Moebius determinant vanishes')
            if c != 0 and not any(abs(-d / c - center) <= radius
                                  for center, radius in self.exclusions):
                object.__setattr__(self, 'exclusions', tuple(
                    self.exclusions) + ((complex(-d / c), 0.0),))
        elif self.kind == 'polynomial':
            if len(Polynomial(params).trim().coef) < 2:
                raise ValueError('Constant maps are not conformal')
        elif len(params) < 2:
            raise ValueError('A germ needs a linear coefficient')

    @property
    def matrix(self) -> np.ndarray:
        return self.params.reshape(2, 2)

    @cached_property
    def polynomial(self) -> Optional[Polynomial]:
        """The map as a polynomial when it is one (affine Moebius too)."""
        if self.kind == 'polynomial':
            return Polynomial(self.params)
        if self.kind == 'moebius' and self.params[2] == 0:
            a, b, _, d = self.params
            return Polynomial([b / d, a / d])
        return None

    @cached_property
    def is_identity(self) -> bool:
        ident = np.zeros(len(self.params), dtype=complex)
        if self.kind == 'moebius':
            a, b, c, d = self.params
            return b == 0 and c == 0 and a == d
        if self.kind == 'polynomial':
            ident[1] = 1.0
        else:
            ident[0], ident[1] = self.base, 1.0
        return bool(np.all(self.params == ident))

    def __call__(self, z):
        if self.kind == 'moebius':
            a, b, c, d = self.params
            return (a * z + b) / (c * z + d)
        if self.kind == 'polynomial':
            return self.polynomial(z)
        return Polynomial(self.params)(z - self.base)

    def jet(self, z0: complex, order: int) -> Jet:
        """Taylor jet of the map at z0."""
        z0 = complex(z0)
        if self.kind == 'moebius':
            a, b, c, d = self.params
            pad = np.zeros(order + 1)
            num = Jet(z0, np.r_[a * z0 + b, a, pad])
            den = Jet(z0, np.r_[c * z0 + d, c, pad])
            return Jet(z0, (num / den).coeffs[:order + 1])
        if self.kind == 'polynomial':
            coeffs = self.polynomial(Polynomial([z0, 1.0])).coef
        else:
            if abs(z0 - self.base) > common.tol('coincide'):
                raise ValueError('A germ has a jet at its base point only')
            coeffs = self.params
        out = np.zeros(order + 1, dtype=complex)
        size = min(len(coeffs), order + 1)
        out[:size] = coeffs[:size]
        return Jet(z0, out)

    def derivative(self, z: complex, k: int = 1) -> complex:
        return self.jet(z, k).derivative_at(k)

    def in_domain(self, z: complex) -> bool:
        return all(abs(z - center) > radius
                   for center, radius in self.exclusions)


def moebius(a: complex, b: complex, c: complex, d: complex,
            exclusions: Sequence[Tuple[complex, float]] = (),
            label: str = 'g') -> ConformalMap:
    """z -> (a z + b) / (c z + d)."""
    return ConformalMap('moebius', np.array([a, b, c, d]), tuple(exclusions),
                        label)


def polynomial_map(coeffs: Sequence[complex],
                   exclusions: Sequence[Tuple[complex, float]] = (),
                   label: str = 'g') -> ConformalMap:
    """z -> sum_k coeffs[k] z^k."""
    return ConformalMap('polynomial', np.asarray(coeffs), tuple(exclusions),
                        label)


def germ(coeffs: Sequence[complex], base: complex = 0j,
         label: str = 'g') -> ConformalMap:
    """Power series sum_k coeffs[k] (z - base)^k."""
    return ConformalMap('germ', np.asarray(coeffs), (), label, complex(base))


def affine_chart(alpha: complex, beta: complex) -> ConformalMap:
    """w = alpha z + beta."""
    if alpha == 0:
        raise ValueError('Charts need alpha != 0')
    return moebius(alpha, beta, 0, 1, label='chart')


def compose_maps(outer: ConformalMap, inner: ConformalMap) -> ConformalMap:
    """
    outer o inner. The composite keeps the exclusions of inner plus its
    own pole.
    """
    label = f'{outer.label}{inner.label}'
    if outer.kind == 'moebius' and inner.kind == 'moebius':
        mat = outer.matrix @ inner.matrix
        return moebius(*mat.ravel(), exclusions=inner.exclusions, label=label)
    if outer.polynomial is not None and inner.polynomial is not None:
        comp = outer.polynomial(inner.polynomial)
        return polynomial_map(comp.coef, inner.exclusions, label)
    raise ValueError(f'Cannot compose {outer.kind} with {inner.kind}')


def inverse(g: ConformalMap) -> ConformalMap:
    """Inverse of a Moebius or affine map."""
    if g.kind == 'moebius':
        a, b, c, d = g.params
        return moebius(d, -b, -c, a, label=f'{g.label}^-1')
    if g.polynomial is not None and g.polynomial.degree() == 1:
        b, a = g.polynomial.coef
        return polynomial_map([-b / a, 1 / a], label=f'{g.label}^-1')
    raise ValueError('Only Moebius and affine maps are inverted')


def univalence_defect(g: ConformalMap, center: complex, radius: float,
                      samples: int = 64) -> float:
    """
    Smallest |g(z) - g(w)| / |z - w| over sampled pairs of a disk; zero
    or negative values mean the map is not injective there.
    """
    rng = np.random.default_rng(0)
    pts = center + radius * np.sqrt(rng.uniform(size=samples)) \
        * np.exp(2j * np.pi * rng.uniform(size=samples))
    vals = g(pts)
    iu = np.triu_indices(samples, 1)
    ratio = np.abs(vals[:, None] - vals[None, :])[iu] \
        / np.abs(pts[:, None] - pts[None, :])[iu]
    return float(ratio.min())


# Fixed points


@dataclass(frozen=True)
class Region:
    """Closed search rectangle."""
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @classmethod
    def square(cls, radius: float, center: complex = 0j) -> 'Region':
        return cls(center.real - radius, center.real + radius,
                   center.imag - radius, center.imag + radius)

    def contains(self, z: complex) -> bool:
        return self.x_min <= z.real <= self.x_max \
            and self.y_min <= z.imag <= self.y_max

    def starts(self, n: int) -> np.ndarray:
        xs = np.linspace(self.x_min, self.x_max, n)
        ys = np.linspace(self.y_min, self.y_max, n)
        return (xs[:, None] + 1j * ys[None, :]).ravel()


@dataclass(eq=False)
class FixedPointRecord:
    """
    Fixed point of a map.

    Attributes:
        z0: the point.
        order: valuation of g(z) - z at z0; None for infinite order.
        parent: the map.
        jet: jet of g(z) - z at z0.
    """
    z0: complex
    order: Optional[int]
    parent: ConformalMap
    jet: Optional[Jet] = None

    def to_dict(self) -> dict:
        out = {'z0': [self.z0.real, self.z0.imag], 'order': self.order,
               'map': self.parent.label}
        if self.jet is not None:
            out['jet'] = [[c.real, c.imag] for c in self.jet.coeffs]
        return out


def _newton(q: Polynomial, z: complex, steps: int) -> complex:
    dq = q.deriv()
    for _ in range(steps):
        slope = dq(z)
        if slope == 0:
            break
        step = q(z) / slope
        z -= step
        if abs(step) < common.tol('newton') * max(1.0, abs(z)):
            break
    return complex(z)


def _cluster(roots: Sequence[complex]) -> List[Tuple[complex, int]]:
    """Group roots closer than CLUSTER_RADIUS; centroid and multiplicity."""
    groups: List[List[complex]] = []
    for root in roots:
        for group in groups:
            if abs(np.mean(group) - root) < CLUSTER_RADIUS:
                group.append(root)
                break
        else:
            groups.append([root])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def _newton_roots(q: Polynomial, region: Region) -> List[Tuple[complex, int]]:
    """Roots of q by Newton iteration with deflation from a start grid."""
    cfg = common.config()
    steps = cfg.getint('lefschetz', 'newton_steps')
    starts = region.starts(cfg.getint('lefschetz', 'start_grid'))
    work = q
    roots = []
    while work.degree() > 0:
        z = starts[np.argmin(np.abs(work(starts)))]
        z = _newton(q, _newton(work, z, steps), steps)
        roots.append(z)
        work = work // Polynomial([-z, 1.0])
    return _cluster(roots)


def _polish(q: Polynomial, z: complex, multiplicity: int) -> complex:
    """Newton on q^(m-1), which has a simple root at a root of order m."""
    steps = common.config().getint('lefschetz', 'newton_steps')
    dq = q.deriv(multiplicity - 1)
    z = _newton(dq, z, steps)
    residual = abs(dq(z)) / max(1.0, abs(dq.deriv()(z)))
    if residual > common.tol('root_residual'):
        raise common.RootConditioning(f'Newton residual {residual:.3e} at '
                                      f'{z:.6g}')
    return z


def find_fixed_points(g: ConformalMap, region: Region
                      ) -> List[FixedPointRecord]:
    """
    Isolated fixed points of g in region and in its domain, with orders.

    Infinite order fixed points (the identity) are not isolated and are
    left out.
    """
    if g.is_identity:
        logger.debug(f'{g.label} is the identity: no isolated fixed points')
        return []
    if g.kind == 'germ':
        q = Polynomial(g.params - np.r_[g.base, 1.0,
                                        np.zeros(len(g.params) - 2)])
        candidates = [] if abs(q.coef[0]) > common.tol('root_residual') \
            else [(g.base, 0)]
    else:
        if g.kind == 'moebius':
            a, b, c, d = g.params
            q = Polynomial([-b, d - a, c]).trim()
        else:
            q = (g.polynomial - Polynomial([0, 1])).trim()
        if q.degree() < 1:
            return []
        candidates = _newton_roots(q, region)
    records = []
    for z, mult in candidates:
        if not region.contains(z) or not g.in_domain(z):
            continue
        if mult:
            z = _polish(q, z, mult)
        top = (mult or len(g.params)) + 2
        diff = g.jet(z, top) - Jet.identity(z, top)
        order = diff.valuation()
        if mult and order != mult:
            raise common.RootConditioning(f'Root of multiplicity {mult} has '
                                          f'valuation {order}')
        records.append(FixedPointRecord(complex(z), order, g, diff))
    logger.debug(f'{g.label}: {len(records)} fixed points in region')
    return records


# Test functions


class SmoothFunction(abc.ABC):
    """Smooth function of z, zbar with holomorphic jets along z."""

    @abc.abstractmethod
    def value(self, z):
        """Values at the points z."""

    @abc.abstractmethod
    def jet(self, z0: complex, order: int) -> Jet:
        """Jet in z at z0 with zbar frozen at conj(z0)."""

    @abc.abstractmethod
    def dzbar(self, z):
        """d/dzbar at the points z."""

    def __mul__(self, other: 'SmoothFunction') -> 'SmoothFunction':
        return ProductFunction(self, other)


@dataclass(frozen=True, eq=False)
class GaussianTerm:
    """P(z, zbar) exp(-alpha |z - center|^2); poly[i, j] of z^i zbar^j."""
    poly: np.ndarray
    alpha: float
    center: complex

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError('Gaussian terms need alpha > 0')
        poly = np.atleast_2d(np.asarray(self.poly, dtype=complex))
        object.__setattr__(self, 'poly', poly)

    @property
    def reach(self) -> float:
        """Radius past which the term is negligible."""
        degree = sum(self.poly.shape) - 2
        return (GAUSSIAN_REACH + degree) / np.sqrt(self.alpha)

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        return poly2d.polyval2d(z, z.conj(), self.poly) \
            * np.exp(-self.alpha * np.abs(z - self.center) ** 2)

    def __mul__(self, other: 'GaussianTerm') -> 'GaussianTerm':
        alpha = self.alpha + other.alpha
        center = (self.alpha * self.center + other.alpha * other.center) \
            / alpha
        scale = np.exp(-self.alpha * other.alpha / alpha
                       * abs(self.center - other.center) ** 2)
        return GaussianTerm(convolve2d(self.poly, other.poly) * scale, alpha,
                            center)

    def dz(self) -> 'GaussianTerm':
        """(d_z P - alpha (zbar - conj c) P) exp(...)."""
        shifted = convolve2d(self.poly, np.array([[-np.conj(self.center),
                                                   1.0]]))
        deriv = poly2d.polyder(self.poly, axis=0)
        return GaussianTerm(_padded_sum(deriv, -self.alpha * shifted),
                            self.alpha, self.center)

    def dzbar(self) -> 'GaussianTerm':
        """(d_zbar P - alpha (z - c) P) exp(...)."""
        shifted = convolve2d(self.poly, np.array([[-self.center], [1.0]]))
        deriv = poly2d.polyder(self.poly, axis=1)
        return GaussianTerm(_padded_sum(deriv, -self.alpha * shifted),
                            self.alpha, self.center)

    def jet(self, z0: complex, order: int) -> Jet:
        zbar = np.conj(z0)
        hol = self.poly @ zbar ** np.arange(self.poly.shape[1])
        shifted = Polynomial(hol)(Polynomial([z0, 1.0])).coef
        poly = np.zeros(order + 1, dtype=complex)
        size = min(len(shifted), order + 1)
        poly[:size] = shifted[:size]
        rate = self.alpha * (zbar - np.conj(self.center))
        k = np.arange(order + 1)
        gauss = np.exp(-rate * (z0 - self.center)) * (-rate) ** k \
            / np.array([factorial(i) for i in k])
        return Jet(z0, np.convolve(poly, gauss)[:order + 1])

    def integral(self) -> complex:
        """Exact integral over the plane against dx dy."""
        rows, cols = self.poly.shape
        c = self.center
        total = 0j
        for k in range(min(rows, cols)):
            i = np.arange(rows)
            j = np.arange(cols)
            left = np.where(i >= k, comb(i, k) * c ** np.maximum(i - k, 0), 0)
            right = np.where(j >= k, comb(j, k)
                             * np.conj(c) ** np.maximum(j - k, 0), 0)
            moment = np.pi * factorial(k) / self.alpha ** (k + 1)
            total += (left @ self.poly @ right) * moment
        return complex(total)


def _padded_sum(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    shape = np.maximum(first.shape, second.shape)
    out = np.zeros(shape, dtype=complex)
    out[:first.shape[0], :first.shape[1]] += first
    out[:second.shape[0], :second.shape[1]] += second
    return out


@dataclass(frozen=True, eq=False)
class TestFunction(SmoothFunction):
    """
    Finite sum of Gaussian terms, closed under products, derivatives and
    exact integration over the plane.
    """
    __test__ = False
    terms: Tuple[GaussianTerm, ...]

    @classmethod
    def gaussian(cls, alpha: float = 1.0, center: complex = 0j,
                 poly: Optional[np.ndarray] = None) -> 'TestFunction':
        poly = np.ones((1, 1)) if poly is None else poly
        return cls((GaussianTerm(poly, alpha, complex(center)),))

    def value(self, z):
        return sum(t.value(z) for t in self.terms)

    def jet(self, z0: complex, order: int) -> Jet:
        out = Jet(complex(z0), np.zeros(order + 1, dtype=complex))
        for term in self.terms:
            out = out + term.jet(complex(z0), order)
        return out

    @cached_property
    def dz_function(self) -> 'TestFunction':
        return TestFunction(tuple(t.dz() for t in self.terms))

    @cached_property
    def dzbar_function(self) -> 'TestFunction':
        return TestFunction(tuple(t.dzbar() for t in self.terms))

    def dzbar(self, z):
        return self.dzbar_function.value(z)

    def integral(self) -> complex:
        return sum((t.integral() for t in self.terms), 0j)

    def scaled(self, factor: complex) -> 'TestFunction':
        return TestFunction(tuple(GaussianTerm(t.poly * factor, t.alpha,
                                               t.center) for t in self.terms))

    def __add__(self, other: 'TestFunction') -> 'TestFunction':
        return TestFunction(self.terms + other.terms)

    def __sub__(self, other: 'TestFunction') -> 'TestFunction':
        return self + other.scaled(-1.0)

    def __mul__(self, other):
        if isinstance(other, TestFunction):
            return TestFunction(tuple(s * o for s in self.terms
                                      for o in other.terms))
        if isinstance(other, SmoothFunction):
            return ProductFunction(self, other)
        return self.scaled(other)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ProductFunction(SmoothFunction):
    first: SmoothFunction
    second: SmoothFunction

    def value(self, z):
        return self.first.value(z) * self.second.value(z)

    def jet(self, z0: complex, order: int) -> Jet:
        return self.first.jet(z0, order) * self.second.jet(z0, order)

    def dzbar(self, z):
        return self.first.dzbar(z) * self.second.value(z) \
            + self.first.value(z) * self.second.dzbar(z)


@dataclass(frozen=True, eq=False)
class ComposedFunction(SmoothFunction):
    """f o g for a conformal map g."""
    function: SmoothFunction
    map: ConformalMap

    def value(self, z):
        return self.function.value(self.map(z))

    def jet(self, z0: complex, order: int) -> Jet:
        inner = self.map.jet(z0, order)
        return self.function.jet(inner.coefficient(0), order).compose(inner)

    def dzbar(self, z):
        return self.function.dzbar(self.map(z)) \
            * np.conj(self.map.derivative(z))


@dataclass(frozen=True, eq=False)
class MapLogDerivative(SmoothFunction):
    """d_z ln g'(z) = g''/g'."""
    map: ConformalMap

    def value(self, z):
        jet = self.map.jet(complex(z), 2)
        return 2 * jet.coefficient(2) / jet.coefficient(1)

    def jet(self, z0: complex, order: int) -> Jet:
        first = self.map.jet(complex(z0), order + 2).deriv()
        return first.deriv() / Jet(first.base, first.coeffs[:order + 1])

    def dzbar(self, z):
        return 0j


def random_test_function(rng: np.random.Generator,
                         degree: int = 1) -> TestFunction:
    """Gaussian with a random polynomial factor near the origin."""
    shape = (degree + 1, degree + 1)
    poly = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    center = complex(*rng.normal(scale=0.5, size=2))
    return TestFunction.gaussian(float(rng.uniform(0.5, 2.0)), center, poly)


def pull_back(f: SmoothFunction, g: ConformalMap) -> SmoothFunction:
    """f o g."""
    return f if g.is_identity else ComposedFunction(f, g)


def check_support(f: SmoothFunction, g: ConformalMap) -> None:
    """Sampled check that f vanishes on the excluded disks of g."""
    phis = np.exp(2j * np.pi * np.arange(16) / 16)
    for center, radius in g.exclusions:
        if radius <= 0:
            continue
        pts = np.concatenate([[center], center + 0.5 * radius * phis,
                              center + radius * phis])
        peak = max(abs(f.value(p)) for p in pts)
        if peak > SUPPORT_TOL:
            raise common.SupportViolation(
                f'Function reaches {peak:.2e} inside the excluded disk '
                f'around {center:.4g} of {g.label}')


# The groupoid algebra


@dataclass(frozen=True, eq=False)
class GroupoidTerm:
    """f U*_g."""
    map: ConformalMap
    function: SmoothFunction

    @property
    def label(self) -> str:
        return self.map.label


@dataclass(eq=False)
class GroupoidElement:
    """
    Finite sum of terms f U*_g with supp f in Dom(g).

    Products follow (f1 U*_g1)(f2 U*_g2) = f1 (f2 o g1) U*_(g2 g1).
    """
    terms: List[GroupoidTerm]
    form_degree: int = 0

    def __post_init__(self) -> None:
        for term in self.terms:
            check_support(term.function, term.map)

    @classmethod
    def single(cls, g: ConformalMap, f: SmoothFunction) -> 'GroupoidElement':
        return cls([GroupoidTerm(g, f)])

    def __add__(self, other: 'GroupoidElement') -> 'GroupoidElement':
        return GroupoidElement(self.terms + other.terms,
                               max(self.form_degree, other.form_degree))

    def __mul__(self, other: 'GroupoidElement') -> 'GroupoidElement':
        terms = []
        for left in self.terms:
            for right in other.terms:
                func = left.function * pull_back(right.function, left.map)
                terms.append(GroupoidTerm(compose_maps(right.map, left.map),
                                          func))
        return GroupoidElement(terms, self.form_degree + other.form_degree)


def lefschetz_contribution(g: ConformalMap, fp: FixedPointRecord,
                           a: SmoothFunction) -> complex:
    """
    -1/(n-1)! d^(n-1)/dz^(n-1) (H a) at z0, H = (z - z0)^n / (g(z) - z).

    Infinite order points contribute zero.
    """
    n = fp.order
    if n is None:
        return 0j
    top = 2 * n + 4
    diff = g.jet(fp.z0, top) - Jet.identity(fp.z0, top)
    if diff.valuation() != n:
        raise common.OrderMismatch(f'g(z) - z has valuation '
                                   f'{diff.valuation()} at {fp.z0:.6g}, '
                                   f'expected {n}')
    h = Jet.monomial(fp.z0, n, top) / diff
    return -(h * a.jet(fp.z0, n - 1)).coefficient(n - 1)


def closed_form_contribution(g: ConformalMap, fp: FixedPointRecord,
                             a: SmoothFunction) -> complex:
    """Listed closed forms of the contribution for orders 1, 2, 3."""
    gj = g.jet(fp.z0, 5)
    d = [gj.derivative_at(k) for k in range(6)]
    aj = a.jet(fp.z0, 2)
    a0, a1, a2 = aj.derivative_at(0), aj.derivative_at(1), aj.derivative_at(2)
    if fp.order == 1:
        return a0 / (1 - d[1])
    if fp.order == 2:
        return 2 / d[2] * (d[3] / d[2] * a0 / 3 - a1)
    if fp.order == 3:
        ratio = d[4] / d[3]
        return 3 / (2 * d[3]) * (d[5] / d[3] * a0 / 10 - ratio ** 2 * a0 / 8
                                 + ratio * a1 / 2 - a2)
    raise common.DegreeUnsupported(f'No closed form for order {fp.order}')


def discrepancy_report(g: ConformalMap, fp: FixedPointRecord,
                       a: SmoothFunction) -> dict:
    """Jet value against the listed closed form."""
    jet_value = lefschetz_contribution(g, fp, a)
    listed = closed_form_contribution(g, fp, a)
    ratio = listed / jet_value if jet_value != 0 else None
    if ratio is not None and abs(ratio - 1) > common.tol('coincide'):
        logger.warning(f'Order {fp.order} closed form differs from the jet '
                       f'formula by a factor {ratio:.6g}')
    return {'order': fp.order, 'jet': [jet_value.real, jet_value.imag],
            'listed': [listed.real, listed.imag],
            'ratio': None if ratio is None else [ratio.real, ratio.imag]}


def fixed_point_table(x: GroupoidElement, region: Region) -> List[dict]:
    """One row per term and isolated fixed point."""
    rows = []
    for term in x.terms:
        for fp in find_fixed_points(term.map, region):
            value = lefschetz_contribution(term.map, fp, term.function)
            row = fp.to_dict()
            row['contribution'] = [value.real, value.imag]
            rows.append(row)
    return rows


def phi_trace(x: GroupoidElement, region: Region) -> complex:
    """Sum of the Lefschetz contributions of all isolated fixed points."""
    total = 0j
    for row in fixed_point_table(x, region):
        total += complex(*row['contribution'])
    return total


def trace_property_check(x: GroupoidElement, y: GroupoidElement,
                         region: Region) -> float:
    """|Phi(xy) - Phi(yx)|."""
    residual = abs(phi_trace(x * y, region) - phi_trace(y * x, region))
    logger.debug(f'Trace property residual {residual:.3e}')
    return residual


def modular_delta(x: GroupoidElement) -> GroupoidElement:
    """delta(f U*_g) = (d ln g') f U*_g, as a one-form."""
    terms = [GroupoidTerm(t.map, MapLogDerivative(t.map) * t.function)
             for t in x.terms]
    return GroupoidElement(terms, x.form_degree + 1)


# Quadrature oracle


def _support_anchor(a: TestFunction) -> Tuple[complex, float]:
    center = a.terms[0].center
    return center, max(abs(t.center - center) + t.reach for t in a.terms)


def _polar_quad(func, radius: float) -> Tuple[complex, float]:
    opts = {'epsabs': 1e-9, 'epsrel': 1e-9}
    real, err_r = integrate.dblquad(lambda phi, r: func(r, phi).real,
                                    0.0, radius, 0.0, 2 * np.pi, **opts)
    imag, err_i = integrate.dblquad(lambda phi, r: func(r, phi).imag,
                                    0.0, radius, 0.0, 2 * np.pi, **opts)
    return complex(real, imag), err_r + err_i


def cauchy_quadrature_oracle(g: ConformalMap, a: TestFunction,
                             region: Optional[Region] = None) -> complex:
    """
    int (d_zbar a)(z) / (pi (g(z) - z)) dx dy.

    Polar quadrature around every fixed point in the support, glued by a
    Gaussian partition of unity; the polar measure cancels the simple pole.
    """
    center, reach = _support_anchor(a)
    region = region or Region.square(reach, center)
    anchors = np.array([fp.z0 for fp in find_fixed_points(g, region)]
                       or [center])
    if len(anchors) > 1:
        gaps = np.abs(anchors[:, None] - anchors[None, :])
        sigma = 0.5 * gaps[gaps > 0].min()
    else:
        sigma = 1.0

    total, error = 0j, 0.0
    for j, anchor in enumerate(anchors):
        radius = max(abs(t.center - anchor) + t.reach for t in a.terms)

        def integrand(r: float, phi: float, j=j, anchor=anchor) -> complex:
            if r == 0:
                return 0j
            z = anchor + r * np.exp(1j * phi)
            weight = softmax(-np.abs(z - anchors) ** 2 / sigma ** 2)[j]
            return r * weight * a.dzbar(z) / (np.pi * (g(z) - z))

        value, err = _polar_quad(integrand, radius)
        total += value
        error += err
    if error > common.tol('quadrature'):
        raise common.QuadratureNonConvergence(f'Quadrature error '
                                              f'{error:.2e}')
    logger.debug(f'Cauchy oracle for {g.label}: {total:.8f} '
                 f'(error {error:.1e})')
    return total


# Cyclic 2-cocycles on the fixed manifold


def _identity_functions(x: GroupoidElement) -> List[Tuple[TestFunction,
                                                         complex]]:
    """(function, modular factor) per term of a trivially acting element."""
    out = []
    for term in x.terms:
        if not term.map.is_identity:
            raise common.UnsupportedFixedManifold(
                f'{term.label} acts nontrivially; only identity components '
                f'are supported')
        if not isinstance(term.function, TestFunction):
            raise common.UnsupportedFixedManifold('Fixed manifold integrals '
                                                  'need Gaussian test '
                                                  'functions')
        out.append((term.function, MapLogDerivative(term.map).value(0j)))
    return out


def _fundamental(f0: TestFunction, f1: TestFunction,
                 f2: TestFunction) -> complex:
    """int f0 df1 ^ df2 with dz ^ dzbar = -2i dx dy."""
    form = f1.dz_function * f2.dzbar_function \
        - f1.dzbar_function * f2.dz_function
    return -2j * (f0 * form).integral()


def _chern1(f0: TestFunction, f1: TestFunction, f2: TestFunction,
            m1: complex, m2: complex) -> complex:
    """int f0 (df1 ^ delta f2 + delta f1 ^ df2)."""
    form = (f1 * f2.dzbar_function).scaled(m1) \
        - (f2 * f1.dzbar_function).scaled(m2)
    return -2j * (f0 * form).integral()


def _nabla(f0: TestFunction, f1: TestFunction, f2: TestFunction,
           m1: complex, m2: complex) -> complex:
    """int f0 nabla f1 ^ nabla f2, nabla = d - delta / 2."""
    n1 = f1.dz_function - f1.scaled(m1 / 2)
    n2 = f2.dz_function - f2.scaled(m2 / 2)
    form = n1 * f2.dzbar_function - f1.dzbar_function * n2
    return -2j * (f0 * form).integral()


def _cochain(kind: str, f0: TestFunction, f1: TestFunction,
             f2: TestFunction, m1: complex = 0j, m2: complex = 0j) -> complex:
    if kind == 'fundamental':
        return _fundamental(f0, f1, f2)
    if kind == 'chern1':
        return _chern1(f0, f1, f2, m1, m2)
    if kind == 'todd':
        return _fundamental(f0, f1, f2) - 0.5 * _chern1(f0, f1, f2, m1, m2)
    raise ValueError(f'Unknown cocycle {kind!r}')


def todd_pair(kind: str, a0: GroupoidElement, a1: GroupoidElement,
              a2: GroupoidElement) -> complex:
    """
    Fundamental class, first Chern class or Todd class of the fixed
    manifold paired with a0 da1 da2.
    """
    total = 0j
    for f0, _ in _identity_functions(a0):
        for f1, m1 in _identity_functions(a1):
            for f2, m2 in _identity_functions(a2):
                total += _cochain(kind, f0, f1, f2, m1, m2)
    return total


def todd_nabla(a0: GroupoidElement, a1: GroupoidElement,
               a2: GroupoidElement) -> complex:
    """Todd class through the connection form int a0 nabla a1 nabla a2."""
    total = 0j
    for f0, _ in _identity_functions(a0):
        for f1, m1 in _identity_functions(a1):
            for f2, m2 in _identity_functions(a2):
                total += _nabla(f0, f1, f2, m1, m2)
    return total


def cocycle_property_check(kind: str = 'fundamental', trials: int = 20,
                           seed: int = 3) -> float:
    """Largest Hochschild coboundary and cyclicity defect on random data."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        a = [random_test_function(rng) for _ in range(4)]
        coboundary = _cochain(kind, a[0] * a[1], a[2], a[3]) \
            - _cochain(kind, a[0], a[1] * a[2], a[3]) \
            + _cochain(kind, a[0], a[1], a[2] * a[3]) \
            - _cochain(kind, a[3] * a[0], a[1], a[2])
        cyclic = _cochain(kind, a[0], a[1], a[2]) \
            - _cochain(kind, a[2], a[0], a[1])
        worst = max(worst, abs(coboundary), abs(cyclic))
    logger.info(f'{kind} cocycle defect over {trials} trials: {worst:.2e}')
    return worst


# Bott projector


@dataclass(frozen=True, eq=False)
class BottProjector:
    """
    e(z) = psi psi* / |psi|^2 with psi = (1, z), optionally conjugated by a
    constant unitary.
    """
    unitary: Optional[np.ndarray] = None

    def frame(self, z: complex) -> Tuple[np.ndarray, np.ndarray,
                                         np.ndarray]:
        """e, d_z e and d_zbar e at z."""
        psi = np.array([1.0, z])
        dpsi = np.array([0.0, 1.0])
        norm = 1.0 + abs(z) ** 2
        e = np.outer(psi, psi.conj()) / norm
        de = np.outer(dpsi, psi.conj()) / norm - e * np.conj(z) / norm
        debar = np.outer(psi, dpsi) / norm - e * z / norm
        if self.unitary is None:
            return e, de, debar
        u, uh = self.unitary, self.unitary.conj().T
        return u @ e @ uh, u @ de @ uh, u @ debar @ uh


@dataclass(frozen=True, eq=False)
class ConstantProjector:
    matrix: np.ndarray

    def frame(self, z: complex) -> Tuple[np.ndarray, np.ndarray,
                                         np.ndarray]:
        zero = np.zeros_like(self.matrix, dtype=complex)
        return self.matrix, zero, zero


def bott_pairing(projector=None, angles: int = 64) -> complex:
    """
    (1 / 2 pi i) int tr(e de de) over the plane.

    Angles are summed with the trapezoid rule, exact for the trigonometric
    dependence of the integrand; the radial integral is adaptive.
    """
    projector = projector or BottProjector()
    phis = 2 * np.pi * np.arange(angles) / angles

    def density(z: complex) -> complex:
        e, de, debar = projector.frame(z)
        return -2j * np.trace(e @ (de @ debar - debar @ de))

    def radial(r: float) -> complex:
        return 2 * np.pi * r * np.mean([density(r * np.exp(1j * p))
                                        for p in phis])

    opts = {'limit': 200, 'epsabs': 1e-10}
    real, err_r = integrate.quad(lambda r: radial(r).real, 0, np.inf, **opts)
    imag, err_i = integrate.quad(lambda r: radial(r).imag, 0, np.inf, **opts)
    if err_r + err_i > 1e-6:
        raise common.QuadratureNonConvergence(f'Radial error '
                                              f'{err_r + err_i:.2e}')
    return complex(real, imag) / (2j * np.pi)


# Schatten decay of the propagated potential


@dataclass
class SchattenReport:
    """Singular values of the discretized kernel and their power sums."""
    grid: int
    alpha: float
    singular_values: np.ndarray
    partial_sums: Dict[float, np.ndarray] = field(default_factory=dict)

    @property
    def totals(self) -> Dict[float, float]:
        return {p: float(s[-1]) for p, s in self.partial_sums.items()}


def schatten_decay_check(a: SmoothFunction, alpha: Optional[float] = None,
                         grid: Optional[int] = None,
                         g: Optional[ConformalMap] = None,
                         powers: Optional[Sequence[float]] = None
                         ) -> SchattenReport:
    """
    Singular values of the kernel a(w) / (pi (z - w)) on a cell centered
    grid, as an operator on L^2 with weight (1 + |z|^2)^alpha.

    Composition with g is bounded with bounded inverse on supp a, so g only
    enters through the support check.
    """
    cfg = common.config()
    alpha = cfg.getfloat('lefschetz', 'schatten_alpha') if alpha is None \
        else alpha
    grid = grid or int(common.float_list('lefschetz', 'schatten_grids')[0])
    powers = powers or common.float_list('lefschetz', 'schatten_powers')
    box = cfg.getfloat('lefschetz', 'schatten_box')
    if g is not None:
        check_support(a, g)
    step = 2 * box / grid
    axis = -box + step * (np.arange(grid) + 0.5)
    pts = (axis[:, None] + 1j * axis[None, :]).ravel()
    diff = pts[:, None] - pts[None, :]
    np.fill_diagonal(diff, 1.0)
    kernel = a.value(pts)[None, :] / (np.pi * diff)
    np.fill_diagonal(kernel, 0.0)
    weight = np.sqrt((1 + np.abs(pts) ** 2) ** alpha)
    mat = weight[:, None] * kernel / weight[None, :] * step ** 2
    sing = np.linalg.svd(mat, compute_uv=False)
    sums = {p: np.cumsum(sing ** p) for p in powers}
    return SchattenReport(grid, alpha, sing, sums)


def schatten_refinement(a: SmoothFunction,
                        grids: Optional[Sequence[int]] = None,
                        alpha: Optional[float] = None) -> Dict[float, float]:
    """Relative change of each Schatten sum between two grids."""
    grids = grids or [int(v) for v in
                      common.float_list('lefschetz', 'schatten_grids')]
    coarse = schatten_decay_check(a, alpha, grids[0]).totals
    fine = schatten_decay_check(a, alpha, grids[1]).totals
    change = {p: abs(fine[p] - coarse[p]) / max(coarse[p], 1e-300)
              for p in coarse}
    for p, value in change.items():
        logger.info(f'Schatten p={p}: relative change {value:.3%} between '
                    f'grids {grids[0]} and {grids[1]}')
    return change


# Scene files


def _complex(raw) -> complex:
    if isinstance(raw, (list, tuple)):
        return complex(raw[0], raw[1])
    return complex(raw)


def _load_map(name: str, doc: dict) -> ConformalMap:
    params = [_complex(v) for v in doc['params']]
    exclusions = tuple((complex(x, y), float(r))
                       for x, y, r in doc.get('exclusions', []))
    kind = doc.get('kind')
    if kind == 'germ':
        return germ(params, _complex(doc.get('base', 0)), name)
    if kind not in MAP_KINDS:
        raise common.ConfigInvalid(f'Unknown map kind {kind!r}')
    return ConformalMap(kind, np.array(params), exclusions, name)


def _load_function(doc: dict) -> TestFunction:
    terms = []
    for term in doc['terms']:
        poly = np.asarray(term.get('poly', [[1.0]]), dtype=complex)
        if 'poly_imag' in term:
            poly = poly + 1j * np.asarray(term['poly_imag'])
        terms.append(GaussianTerm(poly, float(term['alpha']),
                                  _complex(term.get('center', 0))))
    return TestFunction(tuple(terms))


@dataclass(eq=False)
class Scene:
    """Maps, test functions and the groupoid element they build."""
    maps: Dict[str, ConformalMap]
    functions: Dict[str, TestFunction]
    element: GroupoidElement
    region: Region

    def report(self) -> dict:
        rows = fixed_point_table(self.element, self.region)
        total = sum((complex(*r['contribution']) for r in rows), 0j)
        return {'fixed_points': rows, 'phi': [total.real, total.imag],
                'infinite_order_convention': 'zero'}


def load_scene(doc: Union[str, dict]) -> Scene:
    """
    Scene from JSON: {"maps": {name: {"kind", "params", "exclusions"}},
    "functions": {name: {"terms": [{"alpha", "center", "poly"}]}},
    "element": [{"map", "function"}], "region": [x0, x1, y0, y1]}.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        maps = {k: _load_map(k, v) for k, v in doc['maps'].items()}
        functions = {k: _load_function(v)
                     for k, v in doc['functions'].items()}
        terms = [GroupoidTerm(maps[t['map']], functions[t['function']])
                 for t in doc['element']]
        region = Region(*[float(v) for v in doc.get('region',
                                                    [-4, 4, -4, 4])])
    except (KeyError, TypeError, ValueError) as err:
        raise common.ConfigInvalid(f'Malformed scene: {err}') from None
    for name, g in maps.items():
        disk = doc['maps'][name].get('univalent_disk')
        if g.kind == 'polynomial' and disk is not None:
            if univalence_defect(g, complex(disk[0], disk[1]),
                                 float(disk[2])) <= 0:
                raise common.ConfigInvalid(f'{name} is not injective on '
                                           f'its disk')
    return Scene(maps, functions, GroupoidElement(terms), region)
