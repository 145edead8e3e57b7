import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcgraph.grid_fields import GeometrySign, GridSpec, VectorField, divergence
from mcgraph.hierarchy import (
    StructureError,
    TermStack,
    build_cubic_rhs,
    build_V,
    build_V_divergence,
    multi_indices,
)
from mcgraph.solver import CurvatureSpec, first_order_term


class TestMultiIndices:
    @given(st.integers(1, 4), st.integers(0, 6))
    def test_count_and_sums(self, j, s):
        m = multi_indices(j, s)
        assert len(m) == math.comb(s + 2 * j - 1, 2 * j - 1)
        assert all(len(t) == 2 * j and sum(t) == s and min(t) >= 0 for t in m.tuples)
        assert list(m.tuples) == sorted(set(m.tuples))

    def test_small_case(self):
        assert multi_indices(1, 2).tuples == ((0, 2), (1, 1), (2, 0))

    @pytest.mark.parametrize("j, s", [(0, 1), (1, -1)])
    def test_invalid(self, j, s):
        with pytest.raises(ValueError):
            multi_indices(j, s)


@pytest.fixture(scope="module")
def stack_setup():
    g = GridSpec(8.0, 32)
    H0 = CurvatureSpec.dipole().sample(g)
    return g, H0


class TestTermStack:
    def test_append_truncates(self, stack_setup):
        g, H0 = stack_setup
        st_ = TermStack(GeometrySign.EUCLIDEAN, order=1)
        st_.append(first_order_term(H0, order=2))
        assert st_[0].order == 1
        assert st_.spec == g

    def test_rejects_missing_levels(self, stack_setup):
        g, _ = stack_setup
        st_ = TermStack(GeometrySign.EUCLIDEAN, order=2)
        with pytest.raises(ValueError, match="derivative levels"):
            st_.append(VectorField.zeros(g, order=1))

    def test_rejects_other_grid(self, stack_setup):
        g, _ = stack_setup
        st_ = TermStack(GeometrySign.EUCLIDEAN, order=0)
        st_.append(VectorField.zeros(g))
        with pytest.raises(ValueError, match="one grid"):
            st_.append(VectorField.zeros(GridSpec(8.0, 16)))


def synthetic_stack(g, sign, order, count):
    """Terms with simple closed-form jets: v_m = c_m * (x, y, z) * e^(-r^2/2)."""
    x = g.coords
    b = np.exp(-np.sum(x**2, axis=0) / 2)
    st_ = TermStack(sign, order)
    for m in range(count):
        c = 1.0 + 0.5 * m
        comps = c * x * b
        jac = c * (np.eye(3).reshape(3, 3, 1, 1, 1) * b - np.einsum("i...,j...->ij...", x, x) * b)
        d2 = None
        if order >= 2:
            d2 = np.empty((3, 3, 3) + g.shape)
            for i in range(3):
                for j in range(3):
                    for k in range(3):
                        t = (-(i == j) * x[k] - (i == k) * x[j] - (j == k) * x[i] + x[i] * x[j] * x[k])
                        d2[i, j, k] = c * t * b
        st_.append(VectorField(g, comps, jac, d2))
    return st_


class TestBuildV:
    @pytest.mark.parametrize("sign", list(GeometrySign))
    def test_first_order_closed_form(self, sign):
        g = GridSpec(4.0, 16)
        st_ = synthetic_stack(g, sign, 1, 1)
        v = st_[0].components
        q = np.sum(v**2, axis=0)
        m1 = 0.5 * sign.pm
        V = build_V(1, st_)
        np.testing.assert_allclose(V.components, -m1 * q * v, atol=1e-15)

    @pytest.mark.parametrize("sign", list(GeometrySign))
    def test_matches_series_expansion(self, sign):
        # With parallel terms v_m = a_m * e, -V^(2k+1) is the eps^(2k+1) part
        # of v/sqrt(1 -/+ |v|^2) - v for v = sum a_m eps^(2m+1) e, a scalar series.
        g = GridSpec(4.0, 16)
        st_ = synthetic_stack(g, sign, 1, 4)
        e = st_[0].components
        a = [1.0 + 0.5 * m for m in range(4)]
        # scalar reference: coefficients of t / sqrt(1 -/+ s t^2) in powers of eps
        # with t(eps) = sum a_m eps^(2m+1) and s = |e|^2, expanded exactly
        s = np.sum(e**2, axis=0)
        ref = _scalar_V(a, s, sign.pm, 3)
        for k in range(1, 4):
            V = build_V(k, st_)
            np.testing.assert_allclose(V.components, -ref[k] * e, rtol=1e-12, atol=1e-15)

    def test_jacobian_matches_spectral(self):
        # wide box and fine grid so the spectral derivative is round-off accurate
        g = GridSpec(6.0, 96)
        st_ = synthetic_stack(g, GeometrySign.EUCLIDEAN, 1, 3)
        V = build_V(2, st_)
        div_exact = build_V_divergence(2, st_).values
        div_spec = divergence(VectorField(g, V.components)).values
        assert np.abs(div_exact - div_spec).max() < 1e-12

    def test_needs_lower_terms(self):
        g = GridSpec(4.0, 16)
        st_ = synthetic_stack(g, GeometrySign.EUCLIDEAN, 1, 1)
        with pytest.raises(StructureError, match="needs terms"):
            build_V(2, st_)
        with pytest.raises(StructureError):
            build_V(0, st_)
        with pytest.raises(StructureError, match="derivative levels"):
            build_V(1, st_, order=2)


def _scalar_V(a, s, pm, K):
    """Order-(2k+1) coefficients of t/sqrt(1 - pm s t^2) - t, t = sum a_m eps^(2m+1)."""
    n = 2 * K + 2
    t = [0.0] * n
    for m, am in enumerate(a):
        if 2 * m + 1 < n:
            t[2 * m + 1] = am
    t = [np.asarray(c, dtype=float) * np.ones_like(s) for c in t]

    def mul(p, q):
        out = [np.zeros_like(s) for _ in range(n)]
        for i in range(n):
            for j in range(n - i):
                out[i + j] = out[i + j] + p[i] * q[j]
        return out

    t2 = mul(t, t)
    total = [np.zeros_like(s) for _ in range(n)]
    power = [np.ones_like(s)] + [np.zeros_like(s) for _ in range(n - 1)]
    for j in range(K + 1):
        cj = float(Fraction(math.comb(2 * j, j), 4**j)) * pm**j
        term = mul(power, t)
        total = [x + cj * s**j * y for x, y in zip(total, term)]
        power = mul(power, t2)
    return [total[2 * k + 1] - t[2 * k + 1] for k in range(K + 1)]


class TestCubicRhs:
    @pytest.mark.parametrize("sign", list(GeometrySign))
    def test_first_source(self, sign):
        g = GridSpec(4.0, 16)
        st_ = synthetic_stack(g, sign, 2, 1)
        v = st_[0]
        conv = np.einsum("j...,ij...->i...", v.components, v.jacobian)
        expected = sign.pm * np.cross(v.components, conv, axis=0)
        S = build_cubic_rhs(1, st_)
        np.testing.assert_allclose(S.components, expected, atol=1e-15)

    def test_radial_terms_give_zero_source(self):
        # v parallel to x with radial magnitude: (v . grad) v is parallel to v too
        g = GridSpec(4.0, 16)
        st_ = synthetic_stack(g, GeometrySign.EUCLIDEAN, 2, 3)
        for k in range(1, 4):
            assert build_cubic_rhs(k, st_).sup() < 1e-15

    def test_source_of_gradient_field_is_solenoidal(self, grid64):
        H0 = CurvatureSpec.dipole().sample(grid64)
        st_ = TermStack(GeometrySign.EUCLIDEAN, 2)
        st_.append(first_order_term(H0, order=2))
        S = build_cubic_rhs(1, st_, order=1)
        div = np.abs(np.einsum("ii...->...", S.jacobian))
        nv = st_[0].sup()
        nj = np.sqrt(np.sum(st_[0].jacobian**2, axis=(0, 1))).max()
        assert div.max() / (nv * nj**2) < 1e-12

    def test_order_limits(self):
        g = GridSpec(4.0, 16)
        st_ = synthetic_stack(g, GeometrySign.EUCLIDEAN, 1, 1)
        with pytest.raises(StructureError, match="derivative level"):
            build_cubic_rhs(1, st_, order=1)
