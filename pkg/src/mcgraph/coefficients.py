"""Exact coefficient algebra for the series hierarchy and its majorant.

``M_j`` are the Maclaurin coefficients of ``1/sqrt(1 -/+ z)``.  The majorant
coefficients ``R_{2k+1}`` bound the size of the order-(2k+1) term in units of
the first one; their generating function ``G(xi) = sum R_{2k+1} xi^{2k+1}``
is the inverse of ``xi(g) = 2g - g/sqrt(1 - g^2)`` near the origin, so
``R`` can be cross-checked against a formal series reversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .grid_fields import GeometrySign

__all__ = [
    "CapacityError",
    "RecursionTable",
    "ConvergenceCertificate",
    "maclaurin_coeff",
    "recursion_table",
    "invert_generating_function",
    "convergence_radius",
    "convergence_radius_critical_point",
    "generating_function",
    "certify",
]

# Largest number of multi-indices materialised by recursion_table.
MAX_MULTI_INDICES = 5_000_000


class CapacityError(MemoryError):
    """The requested table would enumerate too many multi-indices."""


def maclaurin_coeff(j: int, sign: GeometrySign) -> Fraction:
    """Coefficient of ``z^j`` in the expansion used by geometry ``sign``.

    The Euclidean geometry expands ``1/sqrt(1 - z)``, all coefficients
    positive; the Minkowskian one expands ``1/sqrt(1 + z)``, which flips the
    sign of odd ``j``.  In both cases the magnitude is
    ``(2j-1)!! / (j! 2^j) = binom(2j, j) / 4^j``.
    """
    if j < 0:
        raise ValueError("j must be non-negative")
    mag = Fraction(math.comb(2 * j, j), 4**j)
    if sign is GeometrySign.MINKOWSKIAN and j % 2:
        return -mag
    return mag


@dataclass(frozen=True)
class RecursionTable:
    max_k: int
    M: tuple[Fraction, ...]
    R: tuple[Fraction, ...]

    def partial_sum(self, xi: float, K: int | None = None) -> float:
        """``sum_{k <= K} R_{2k+1} xi^{2k+1}`` in floating point."""
        K = self.max_k if K is None else K
        if K > self.max_k:
            raise ValueError(f"table only holds k <= {self.max_k}")
        return float(sum(float(self.R[k]) * xi ** (2 * k + 1) for k in range(K + 1)))

    def rows(self):
        """CSV rows ``(k, "p/q", float)``."""
        for k, r in enumerate(self.R):
            yield k, f"{r.numerator}/{r.denominator}", float(r)


def _count_multi_indices(K: int) -> int:
    total = 0
    for h in range(1, K + 1):
        for j in range(1, h + 1):
            s = h - j
            total += math.comb(s + 2 * j - 1, 2 * j - 1)
    return total


def recursion_table(K: int) -> RecursionTable:
    """Exact ``R_{2k+1}`` for ``k = 0..K``.

    ``R_{2k+1} = sum_{h=1}^{k} R_{2(k-h)+1} sum_{j=1}^{h} M_j
    sum_{|l|_{2j} = h-j} prod_{i=1}^{2j} R_{2 l_i + 1}`` with ``R_1 = 1``.
    The innermost sum depends only on ``(j, h - j)``, so it is evaluated once
    per pair, over integer numerators sharing a common denominator.
    """
    from .hierarchy import multi_indices

    if K < 0:
        raise ValueError("K must be non-negative")
    if _count_multi_indices(K) > MAX_MULTI_INDICES:
        raise CapacityError(f"K={K} needs more than {MAX_MULTI_INDICES} multi-indices")
    M = [maclaurin_coeff(j, GeometrySign.EUCLIDEAN) for j in range(K + 1)]
    R = [Fraction(1)]
    inner: dict[tuple[int, int], Fraction] = {}

    def inner_sum(j: int, s: int) -> Fraction:
        key = (j, s)
        if key not in inner:
            den = math.lcm(*(R[m].denominator for m in range(s + 1)))
            num = [R[m].numerator * (den // R[m].denominator) for m in range(s + 1)]
            acc = 0
            for ell in multi_indices(j, s).tuples:
                acc += math.prod(num[m] for m in ell)
            inner[key] = Fraction(acc, den ** (2 * j))
        return inner[key]

    for k in range(1, K + 1):
        total = Fraction(0)
        for h in range(1, k + 1):
            part = Fraction(0)
            for j in range(1, h + 1):
                part += M[j] * inner_sum(j, h - j)
            total += R[k - h] * part
        R.append(total)
    return RecursionTable(K, tuple(M), tuple(R))


def _series_mul(a: list[Fraction], b: list[Fraction], n: int) -> list[Fraction]:
    out = [Fraction(0)] * n
    for i, ai in enumerate(a[:n]):
        if ai:
            for j, bj in enumerate(b[: n - i]):
                if bj:
                    out[i + j] += ai * bj
    return out


def invert_generating_function(K: int) -> list[Fraction]:
    """Maclaurin coefficients ``c_0..c_{2K+1}`` of the inverse of ``xi(g)``.

    Lagrange inversion: with ``xi = g / phi(g)`` and
    ``phi = 1 / (1 - sum_{j>=1} M_j g^{2j})``, the inverse has
    ``c_n = [g^{n-1}] phi(g)^n / n``.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    n_max = 2 * K + 1
    n = n_max  # series truncated at degree n_max - 1
    one_minus = [Fraction(0)] * n
    one_minus[0] = Fraction(1)
    for j in range(1, n // 2 + 1):
        if 2 * j < n:
            one_minus[2 * j] = -maclaurin_coeff(j, GeometrySign.EUCLIDEAN)
    # reciprocal of a series with unit constant term
    phi = [Fraction(0)] * n
    phi[0] = Fraction(1)
    for d in range(1, n):
        phi[d] = -sum(one_minus[i] * phi[d - i] for i in range(1, d + 1))
    coeffs = [Fraction(0)] * (n_max + 1)
    power = [Fraction(1)] + [Fraction(0)] * (n - 1)
    for m in range(1, n_max + 1):
        power = _series_mul(power, phi, n)
        coeffs[m] = power[m - 1] / m
    return coeffs


def convergence_radius() -> float:
    """``(2^{2/3} - 1)^{3/2}``, the radius of the majorant series."""
    return float((2.0 ** (2.0 / 3.0) - 1.0) ** 1.5)


def convergence_radius_critical_point() -> float:
    """The same radius from the critical point ``cos(psi) = 2^{-1/3}`` of
    ``xi = 2 sin(psi) - tan(psi)``."""
    psi = math.acos(2.0 ** (-1.0 / 3.0))
    return abs(2.0 * math.sin(psi) - math.tan(psi))


def _xi_of_g(g: float) -> float:
    return 2.0 * g - g / math.sqrt(1.0 - g * g)


def generating_function(xi: float) -> float:
    """``G(xi)``: the root ``g`` in ``[0, g*]`` of ``2g - g/sqrt(1-g^2) = xi``.

    ``g* = sin(psi*)`` is where the map stops being monotone.  Bracketed
    bisection (Brent) followed by Newton polishing.  Raises ``ValueError``
    outside ``[0, xi*]``.
    """
    if xi < 0:
        return -generating_function(-xi)
    xs = convergence_radius()
    if xi > xs:
        raise ValueError(f"xi = {xi} exceeds the radius {xs}")
    if xi == 0.0:
        return 0.0
    g_star = math.sqrt(1.0 - 2.0 ** (-2.0 / 3.0))
    if xi == xs:
        return g_star
    g = brentq(lambda t: _xi_of_g(t) - xi, 0.0, g_star, xtol=1e-300, rtol=4 * np.finfo(float).eps,
               maxiter=400)
    for _ in range(3):
        d = 2.0 - (1.0 - g * g) ** -1.5
        if d <= 0:
            break
        step = (_xi_of_g(g) - xi) / d
        g -= step
        if abs(step) <= 1e-16 * abs(g):
            break
    return g


@dataclass(frozen=True)
class ConvergenceCertificate:
    """Advisory check of the majorant criterion on a discrete norm proxy."""

    xi_g: float
    xi_star: float
    inside: bool
    majorant_tail: float
    order_K: int
    advisory: bool = field(default=True)

    def to_dict(self) -> dict:
        tail = self.majorant_tail
        return {"xi_g": self.xi_g, "xi_star": self.xi_star, "inside": self.inside,
                "majorant_tail": tail if math.isfinite(tail) else "+inf",
                "order_K": self.order_K,
                "status": "advisory (sup-norm proxy, not a Hoelder-norm bound)"}


def certify(xi_g: float, K: int, table: RecursionTable | None = None) -> ConvergenceCertificate:
    """Compare ``xi_g`` with the radius and bound the truncated majorant tail.

    Never raises for large ``xi_g``; an outside point gets ``inside=False``
    and an infinite tail.
    """
    if not xi_g >= 0:
        raise ValueError("xi_g must be non-negative")
    xs = convergence_radius()
    inside = bool(xi_g < xs)
    if not inside:
        return ConvergenceCertificate(float(xi_g), xs, False, math.inf, K)
    table = table if table is not None and table.max_k >= K else _cached_table(K)
    tail = generating_function(xi_g) - table.partial_sum(xi_g, K)
    return ConvergenceCertificate(float(xi_g), xs, True, max(tail, 0.0), K)


@lru_cache(maxsize=8)
def _cached_table(K: int) -> RecursionTable:
    return recursion_table(K)
