import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcgraph.grid_fields import (
    DumpFormatError,
    GeometrySign,
    GridSpec,
    NonFiniteSampleError,
    ScalarField,
    VectorField,
    curl,
    divergence,
    gradient,
    laplacian,
    read_field,
    sample_scalar,
    sample_vector,
    source_window,
    sup_norms,
    write_field,
)


def gauss(x, y, z, s=1.0):
    return np.exp(-(x**2 + y**2 + z**2) / (2 * s * s))


class TestGeometrySign:
    @pytest.mark.parametrize("text", ["euclidean", "Euclid", "upper", "+"])
    def test_parse_upper(self, text):
        assert GeometrySign.parse(text) is GeometrySign.EUCLIDEAN

    @pytest.mark.parametrize("text", ["minkowskian", "MINKOWSKI", "lower", "-"])
    def test_parse_lower(self, text):
        assert GeometrySign.parse(text) is GeometrySign.MINKOWSKIAN

    def test_pm_and_flip(self):
        assert GeometrySign.EUCLIDEAN.pm == 1
        assert GeometrySign.MINKOWSKIAN.pm == -1
        for s in GeometrySign:
            assert s.flipped().flipped() is s
            assert s.flipped().pm == -s.pm

    def test_unknown(self):
        with pytest.raises(ValueError, match="unknown geometry sign"):
            GeometrySign.parse("lorentzian")


class TestGridSpec:
    def test_cell_centred_nodes(self):
        g = GridSpec(2.0, 8)
        assert g.h == pytest.approx(0.5)
        np.testing.assert_allclose(g.axis, -2.0 + (np.arange(8) + 0.5) * 0.5)
        assert g.axis[0] == -g.axis[-1]
        assert g.shape == (8, 8, 8)
        assert g.cell_volume == pytest.approx(0.125)

    def test_inner_mask_is_half_box(self):
        g = GridSpec(4.0, 16)
        inner = g.inner_mask
        assert np.all(np.abs(g.coords[:, inner]) <= 2.0 + 1e-12)
        assert inner.sum() == 8**3

    @pytest.mark.parametrize("n", [7, 6, 9, 0, -8])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError, match="points_per_axis"):
            GridSpec(1.0, n)

    @pytest.mark.parametrize("extent", [0.0, -1.0, float("inf"), float("nan")])
    def test_rejects_bad_extent(self, extent):
        with pytest.raises(ValueError, match="extent"):
            GridSpec(extent, 8)

    def test_rejects_small_padding(self):
        with pytest.raises(ValueError, match="padding_factor"):
            GridSpec(1.0, 8, 1)

    def test_hashable_and_frozen(self):
        g = GridSpec(1.0, 8)
        assert {g: 1}[GridSpec(1.0, 8)] == 1
        with pytest.raises(AttributeError):
            g.extent = 2.0


class TestFields:
    def test_arrays_are_read_only(self, grid32):
        f = ScalarField.zeros(grid32)
        with pytest.raises(ValueError):
            f.values[0, 0, 0] = 1.0

    def test_shape_checked(self, grid32):
        with pytest.raises(ValueError, match="shape"):
            ScalarField(grid32, np.zeros((4, 4, 4)))
        with pytest.raises(ValueError, match="shape"):
            VectorField(grid32, np.zeros(grid32.shape))

    def test_nonfinite_rejected(self, grid32):
        a = np.zeros(grid32.shape)
        a[1, 2, 3] = np.nan
        with pytest.raises(NonFiniteSampleError):
            ScalarField(grid32, a)

    def test_arithmetic_carries_jets(self, grid32):
        s = grid32.shape
        a = VectorField(grid32, np.ones((3,) + s), np.ones((3, 3) + s))
        b = VectorField(grid32, 2 * np.ones((3,) + s), 3 * np.ones((3, 3) + s))
        c = 2.0 * a - b
        assert np.all(c.components == 0.0)
        assert np.all(c.jacobian == -1.0)
        d = a + VectorField(grid32, np.ones((3,) + s))
        assert d.jacobian is None
        assert (-a).sup() == pytest.approx(np.sqrt(3.0))

    def test_mismatched_grids(self, grid32):
        with pytest.raises(ValueError, match="different grids"):
            ScalarField.zeros(grid32) + ScalarField.zeros(GridSpec(4.0, 32))

    def test_truncated_drops_levels(self, grid32):
        v = VectorField.zeros(grid32, order=2)
        assert v.order == 2
        assert v.truncated(1).order == 1
        assert v.truncated(0).order == 0

    def test_sample_reports_node(self, grid32):
        with pytest.raises(NonFiniteSampleError, match="node"):
            sample_scalar(lambda x, y, z: 1.0 / (x - grid32.axis[3]), grid32)

    def test_sample_vector_needs_three(self, grid32):
        with pytest.raises(ValueError, match="three components"):
            sample_vector(lambda x, y, z: (x, y), grid32)


class TestSpectralOperators:
    """Rapidly decaying fields are effectively periodic, so spectral
    derivatives are accurate to round-off."""

    def test_gradient_of_gaussian(self, grid64):
        f = sample_scalar(gauss, grid64)
        g = gradient(f)
        exact = -grid64.coords * gauss(*grid64.coords)
        np.testing.assert_allclose(g.components, exact, atol=1e-12)

    def test_laplacian_of_gaussian(self, grid64):
        x = grid64.coords
        r2 = np.sum(x**2, axis=0)
        f = sample_scalar(gauss, grid64)
        np.testing.assert_allclose(laplacian(f).values, (r2 - 3.0) * gauss(*x), atol=1e-11)

    def test_curl_grad_vanishes(self, grid32):
        f = sample_scalar(lambda x, y, z: gauss(x - 0.3, y, z + 0.2) * (1 + x * y), grid32)
        c = curl(gradient(f))
        assert c.sup() < 1e-12

    def test_div_curl_vanishes(self, grid32):
        A = sample_vector(lambda x, y, z: (y * gauss(x, y, z), z * z * gauss(x, y, z), x * gauss(x, y, z)),
                          grid32)
        assert np.abs(divergence(curl(A)).values).max() < 1e-12

    def test_jets_take_precedence(self, grid32):
        s = grid32.shape
        v = VectorField(grid32, np.zeros((3,) + s), np.broadcast_to(np.eye(3).reshape(3, 3, 1, 1, 1), (3, 3) + s))
        assert np.all(divergence(v).values == 3.0)
        assert sup_norms(v) == (0.0, pytest.approx(np.sqrt(3.0)))


class TestSourceWindow:
    def test_profile(self, grid64):
        chi, grad = source_window(grid64)
        r = grid64.radius
        assert np.all(chi[r <= 0.87 * grid64.extent] == 1.0)
        assert np.all(chi[r >= grid64.extent] == 0.0)
        assert np.all((chi >= 0) & (chi <= 1))
        assert np.all(grad[:, r <= 0.87 * grid64.extent] == 0.0)

    def test_gradient_matches_radial_profile(self):
        g = GridSpec(8.0, 64)
        chi, grad = source_window(g)

        def profile(r):
            t = np.clip((r - 0.87 * g.extent) / (0.13 * g.extent), 1e-300, 1 - 1e-16)
            a, b = np.exp(-1 / t), np.exp(-1 / (1 - t))
            return 1 - a / (a + b)

        band = (g.radius > 0.88 * g.extent) & (g.radius < 0.99 * g.extent)
        r = g.radius[band]
        dr = 1e-6
        fd = (profile(r + dr) - profile(r - dr)) / (2 * dr)
        np.testing.assert_allclose(chi[band], profile(r), atol=1e-14)
        radial = np.sum(grad[:, band] * g.coords[:, band], axis=0) / r
        np.testing.assert_allclose(radial, fd, rtol=1e-6, atol=1e-9)


class TestDumps:
    def test_roundtrip_vector(self, tmp_path, grid32, rng):
        v = VectorField(grid32, rng.standard_normal((3,) + grid32.shape))
        path, side = write_field(tmp_path / "v.mcg", v, "v", GeometrySign.MINKOWSKIAN)
        back, meta = read_field(path)
        assert isinstance(back, VectorField)
        assert np.array_equal(back.components, v.components)
        assert back.spec == grid32
        assert meta["geometry_sign"] == "minkowskian"
        assert json.loads(side.read_text())["kind"] == "vector"

    def test_layout_is_x_fastest(self, tmp_path):
        g = GridSpec(1.0, 8)
        f = sample_scalar(lambda x, y, z: x + 0 * y, g)
        path, _ = write_field(tmp_path / "f.mcg", f, "f")
        raw = np.frombuffer(path.read_bytes()[16:], dtype="<f8")
        np.testing.assert_array_equal(raw[:8], g.axis)

    @settings(max_examples=20, deadline=None)
    @given(arrays(np.float64, (8, 8, 8), elements=st.floats(-1e300, 1e300)))
    def test_roundtrip_any_finite_scalar(self, tmp_path_factory, data):
        g = GridSpec(3.0, 8)
        path, _ = write_field(tmp_path_factory.mktemp("d") / "s.mcg", ScalarField(g, data), "s")
        back, _ = read_field(path)
        assert np.array_equal(back.values, data)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.mcg"
        p.write_bytes(b"NOPE" + bytes(100))
        with pytest.raises(DumpFormatError, match="magic"):
            read_field(p)

    def test_truncated(self, tmp_path, grid32):
        path, _ = write_field(tmp_path / "u.mcg", ScalarField.zeros(grid32), "u")
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DumpFormatError, match="payload"):
            read_field(path)
        path.write_bytes(b"MC")
        with pytest.raises(DumpFormatError, match="header"):
            read_field(path)
