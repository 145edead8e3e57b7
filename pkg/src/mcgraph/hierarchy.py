"""Order-by-order source terms of the series hierarchy.

Two equivalent forms are provided.  The square-root form expands
``v / sqrt(1 -/+ |v|^2) - v`` with the coefficients ``M_j``; minus its
order-(2k+1) part is ``V^(2k+1)`` and the next term is the solenoidal
projection of ``V^(2k+1)`` (``w`` is curl-free, the higher ``v`` terms are
divergence-free).
The cubic form collects the order-(2k+1) part of ``+/- v x (v . grad) v``,
whose curl-inverse is the next term.

All products are pointwise.  Derivatives are propagated exactly with the
product rule from the derivative jets carried by the stack entries, so the
sources come with their own Jacobians.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .coefficients import maclaurin_coeff
from .grid_fields import GeometrySign, GridSpec, ScalarField, VectorField, _LEVI

__all__ = [
    "MultiIndexSet",
    "TermStack",
    "StructureError",
    "multi_indices",
    "build_V",
    "build_cubic_rhs",
    "build_V_divergence",
]


class StructureError(ValueError):
    """A build was requested with missing lower-order terms."""


@dataclass(frozen=True)
class MultiIndexSet:
    """All ``2j``-tuples of non-negative integers with sum ``s``."""

    j: int
    s: int
    tuples: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.tuples)


@lru_cache(maxsize=None)
def multi_indices(j: int, s: int) -> MultiIndexSet:
    """Lexicographically sorted compositions of ``s`` into ``2j`` parts.

    Built by stars and bars: every choice of ``2j - 1`` bar positions among
    ``s + 2j - 1`` slots gives one tuple.
    """
    if j < 1 or s < 0:
        raise ValueError("need j >= 1 and s >= 0")
    parts = 2 * j
    slots = s + parts - 1
    out = []
    for bars in itertools.combinations(range(slots), parts - 1):
        prev = -1
        ell = []
        for b in bars:
            ell.append(b - prev - 1)
            prev = b
        ell.append(slots - prev - 1)
        out.append(tuple(ell))
    out.sort()
    return MultiIndexSet(j, s, tuple(out))


@dataclass
class TermStack:
    """Append-only list of hierarchy terms ``v^(2k+1)``, ``k = 0, 1, ...``.

    ``order`` is the number of exact derivative levels every entry carries
    (1: Jacobian, 2: Jacobian and second derivatives).
    """

    sign: GeometrySign
    order: int = 1
    terms: list[VectorField] = field(default_factory=list)

    def append(self, term: VectorField) -> None:
        if self.terms and term.spec != self.terms[0].spec:
            raise ValueError("all terms must share one grid")
        if term.order < self.order:
            raise ValueError(f"term carries {term.order} derivative levels, stack needs {self.order}")
        self.terms.append(term.truncated(self.order))

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, k: int) -> VectorField:
        return self.terms[k]

    @property
    def spec(self) -> GridSpec:
        return self.terms[0].spec


# Jets are tuples (value, first derivatives, second derivatives); missing
# levels are None.  Scalar jets: (N^3, 3 N^3, 3 3 N^3); vector jets add a
# leading component axis.

def _vjet(F: VectorField, order: int):
    return (F.components, F.jacobian if order >= 1 else None, F.d2 if order >= 2 else None)


def _dot(a, b, order):
    val = np.einsum("i...,i...->...", a[0], b[0])
    d1 = d2 = None
    if order >= 1:
        d1 = np.einsum("ik...,i...->k...", a[1], b[0]) + np.einsum("i...,ik...->k...", a[0], b[1])
    if order >= 2:
        d2 = (np.einsum("ikl...,i...->kl...", a[2], b[0])
              + np.einsum("ik...,il...->kl...", a[1], b[1])
              + np.einsum("il...,ik...->kl...", a[1], b[1])
              + np.einsum("i...,ikl...->kl...", a[0], b[2]))
    return val, d1, d2


def _mul(a, b, order):
    val = a[0] * b[0]
    d1 = d2 = None
    if order >= 1:
        d1 = a[1] * b[0] + a[0] * b[1]
    if order >= 2:
        d2 = (a[2] * b[0] + np.einsum("k...,l...->kl...", a[1], b[1])
              + np.einsum("l...,k...->kl...", a[1], b[1]) + a[0] * b[2])
    return val, d1, d2


def _scale_vec(s, v, order):
    val = s[0] * v[0]
    d1 = d2 = None
    if order >= 1:
        d1 = np.einsum("k...,i...->ik...", s[1], v[0]) + s[0] * v[1]
    if order >= 2:
        d2 = (np.einsum("kl...,i...->ikl...", s[2], v[0])
              + np.einsum("k...,il...->ikl...", s[1], v[1])
              + np.einsum("l...,ik...->ikl...", s[1], v[1])
              + s[0] * v[2])
    return val, d1, d2


def _cross(a, b, order):
    val = np.einsum("ijk,j...,k...->i...", _LEVI, a[0], b[0])
    d1 = None
    if order >= 1:
        d1 = (np.einsum("ijk,jl...,k...->il...", _LEVI, a[1], b[0])
              + np.einsum("ijk,j...,kl...->il...", _LEVI, a[0], b[1]))
    return val, d1, None


def _convective(a, b, order):
    """``(a . grad) b``; level ``order`` needs ``b`` at level ``order + 1``."""
    val = np.einsum("j...,ij...->i...", a[0], b[1])
    d1 = None
    if order >= 1:
        d1 = (np.einsum("jl...,ij...->il...", a[1], b[1])
              + np.einsum("j...,ijl...->il...", a[0], b[2]))
    return val, d1, None


def _balanced_sum(items: list):
    """Pairwise-balanced sum of jets, in list order."""
    if not items:
        return None
    while len(items) > 1:
        nxt = []
        for p in range(0, len(items) - 1, 2):
            a, b = items[p], items[p + 1]
            nxt.append(tuple(None if x is None or y is None else x + y for x, y in zip(a, b)))
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def _scale(jet, c):
    return tuple(None if x is None else c * x for x in jet)


def _require(stack: TermStack, k: int):
    if k < 1:
        raise StructureError("k must be >= 1")
    if len(stack) < k:
        raise StructureError(f"order {2 * k + 1} needs terms 0..{k - 1}, stack holds {len(stack)}")


def build_V(k: int, stack: TermStack, order: int | None = None) -> VectorField:
    """Minus the order-(2k+1) coefficient of ``v / sqrt(1 -/+ |v|^2) - v``.

    ``V = -sum_{h=1}^{k} v^(2(k-h)+1) sum_{j=1}^{h} M_j
    sum_{|l|_{2j} = h-j} prod_{i=1}^{j} v^(2 l_{2i-1}+1) . v^(2 l_{2i}+1)``,
    with the sign of ``M_j`` picked by the stack geometry.  Carries
    derivative levels up to ``order`` (default: the stack's).
    """
    _require(stack, k)
    order = stack.order if order is None else order
    if order > stack.order:
        raise StructureError("cannot produce more derivative levels than the stack carries")
    vs = [_vjet(stack[m], order) for m in range(k)]
    dots: dict[tuple[int, int], tuple] = {}

    def dot(a, b):
        key = (min(a, b), max(a, b))
        if key not in dots:
            dots[key] = _dot(vs[key[0]], vs[key[1]], order)
        return dots[key]

    outer = []
    for h in range(1, k + 1):
        inner = []
        for j in range(1, h + 1):
            mj = float(maclaurin_coeff(j, stack.sign))
            prods = []
            for ell in multi_indices(j, h - j).tuples:
                p = dot(ell[0], ell[1])
                for i in range(1, j):
                    p = _mul(p, dot(ell[2 * i], ell[2 * i + 1]), order)
                prods.append(p)
            inner.append(_scale(_balanced_sum(prods), mj))
        s = _balanced_sum(inner)
        outer.append(_scale_vec(s, vs[k - h], order))
    total = _scale(_balanced_sum(outer), -1.0)
    return VectorField(stack.spec, total[0], total[1], total[2])


def build_V_divergence(k: int, stack: TermStack) -> ScalarField:
    """``div V^(2k+1)`` from the exact Jacobian of :func:`build_V`."""
    V = build_V(k, stack, order=1)
    return ScalarField(V.spec, np.einsum("ii...->...", V.jacobian))


def build_cubic_rhs(k: int, stack: TermStack, order: int | None = None) -> VectorField:
    """Order-(2k+1) part of ``+/- v x (v . grad) v``.

    ``+/- sum_{a+b+c = k-1} v^(2a+1) x (v^(2b+1) . grad) v^(2c+1)``.  The
    result carries derivative levels up to ``order`` (default: one less than
    the stack).
    """
    _require(stack, k)
    order = stack.order - 1 if order is None else order
    if order > stack.order - 1:
        raise StructureError("the convective term costs one derivative level")
    if order > 1:
        raise StructureError("cubic sources are built with at most one derivative level")
    vs = [_vjet(stack[m], stack.order) for m in range(k)]
    conv: dict[tuple[int, int], tuple] = {}
    terms = []
    for a in range(k):
        for b in range(k - a):
            c = k - 1 - a - b
            if (b, c) not in conv:
                conv[(b, c)] = _convective(vs[b], vs[c], order)
            terms.append(_cross(vs[a], conv[(b, c)], order))
    total = _scale(_balanced_sum(terms), float(stack.sign.pm))
    return VectorField(stack.spec, total[0], total[1] if order >= 1 else None, None)
