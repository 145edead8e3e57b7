"""Uniform-grid scalar and vector fields on the cube [-L, L]^3.

Fields live on a cell-centred grid ``x_i = -L + (i + 1/2) h`` with
``h = 2L/N``.  Arrays are indexed ``[ix, iy, iz]``; the on-disk dump uses
x-fastest order, which is the Fortran order of that array.

A field may carry an exact derivative "jet" next to its samples: a scalar
field can hold its gradient and Hessian, a vector field its Jacobian
``J[i, j] = d_j F_i`` and second derivatives ``D2[i, j, k] = d_j d_k F_i``.
Fields produced by the free-space potential machinery carry such jets, which
lets every differential operator below avoid differentiating data that is not
periodic on the box.  Fields without a jet are differentiated spectrally on
the periodic extension of the box, which is accurate for compactly supported
data.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "GeometrySign",
    "GridSpec",
    "ScalarField",
    "VectorField",
    "NonFiniteSampleError",
    "DumpFormatError",
    "sample_scalar",
    "sample_vector",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "jacobian",
    "sup_norms",
    "source_window",
    "write_field",
    "read_field",
]

DUMP_MAGIC = b"MCG1"
_HEADER = struct.Struct("<4sId")

# Source taper: exactly 1 for r <= WINDOW_INNER * L (which contains the inner
# half-box), smoothly 0 for r >= WINDOW_OUTER * L.
WINDOW_INNER = 0.87
WINDOW_OUTER = 1.0


class GeometrySign(enum.Enum):
    """Signature of the ambient space.

    ``EUCLIDEAN`` takes the upper sign of every +/- pair, ``MINKOWSKIAN`` the
    lower one.
    """

    EUCLIDEAN = "euclidean"
    MINKOWSKIAN = "minkowskian"

    @property
    def pm(self) -> int:
        """+1 for the upper (Euclidean) sign, -1 for the lower one."""
        return 1 if self is GeometrySign.EUCLIDEAN else -1

    @classmethod
    def parse(cls, value: "str | GeometrySign") -> "GeometrySign":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key in ("euclidean", "euclid", "upper", "+"):
            return cls.EUCLIDEAN
        if key in ("minkowskian", "minkowski", "lower", "-"):
            return cls.MINKOWSKIAN
        raise ValueError(f"unknown geometry sign {value!r}")

    def flipped(self) -> "GeometrySign":
        return GeometrySign.MINKOWSKIAN if self is GeometrySign.EUCLIDEAN else GeometrySign.EUCLIDEAN


class NonFiniteSampleError(ValueError):
    """A sampled expression produced NaN or inf at some node."""


class DumpFormatError(ValueError):
    """A field dump is truncated or carries a wrong header."""


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred cubic grid.

    Parameters
    ----------
    extent : float
        Half-width L of the cube [-L, L]^3.
    points_per_axis : int
        Number of nodes N per axis (even, at least 8).
    padding_factor : int
        Enlargement of the box used for free-space convolution (>= 2).
    """

    extent: float
    points_per_axis: int
    padding_factor: int = 2

    def __post_init__(self):
        n = self.points_per_axis
        if not isinstance(n, (int, np.integer)) or n < 8 or n % 2:
            raise ValueError(f"points_per_axis must be an even integer >= 8, got {n!r}")
        if not (np.isfinite(self.extent) and self.extent > 0):
            raise ValueError(f"extent must be positive, got {self.extent!r}")
        if not isinstance(self.padding_factor, (int, np.integer)) or self.padding_factor < 2:
            raise ValueError(f"padding_factor must be an integer >= 2, got {self.padding_factor!r}")

    @property
    def n(self) -> int:
        return int(self.points_per_axis)

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.points_per_axis

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n,) * 3

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @cached_property
    def axis(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return -self.extent + (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape (3, N, N, N)."""
        a = self.axis
        return np.array(np.meshgrid(a, a, a, indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coords**2, axis=0))

    @cached_property
    def inner_mask(self) -> np.ndarray:
        """Nodes of the inner half-box ``|x|_inf <= L/2``."""
        return np.all(np.abs(self.coords) <= 0.5 * self.extent + 1e-12 * self.h, axis=0)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the N-periodic box along one axis."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    def to_dict(self) -> dict:
        return {"extent": float(self.extent), "points_per_axis": self.n,
                "padding_factor": int(self.padding_factor)}


def _readonly(a: np.ndarray | None) -> np.ndarray | None:
    if a is None:
        return None
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _check_shape(a, shape, what):
    if a is not None and a.shape != shape:
        raise ValueError(f"{what} has shape {a.shape}, expected {shape}")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Samples of a real scalar field, optionally with exact derivatives."""

    spec: GridSpec
    values: np.ndarray
    grad: np.ndarray | None = None
    hess: np.ndarray | None = None

    def __post_init__(self):
        s = self.spec.shape
        object.__setattr__(self, "values", _readonly(self.values))
        object.__setattr__(self, "grad", _readonly(self.grad))
        object.__setattr__(self, "hess", _readonly(self.hess))
        _check_shape(self.values, s, "values")
        _check_shape(self.grad, (3,) + s, "grad")
        _check_shape(self.hess, (3, 3) + s, "hess")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteSampleError("scalar field has non-finite samples")

    @classmethod
    def zeros(cls, spec: GridSpec, with_jet: bool = False) -> "ScalarField":
        s = spec.shape
        if with_jet:
            return cls(spec, np.zeros(s), np.zeros((3,) + s), np.zeros((3, 3) + s))
        return cls(spec, np.zeros(s))

    def _combine(self, other, a, b):
        if not isinstance(other, ScalarField):
            return NotImplemented
        if other.spec != self.spec:
            raise ValueError("fields live on different grids")

        def lin(p, q):
            return None if p is None or q is None else a * p + b * q

        return ScalarField(self.spec, a * self.values + b * other.values,
                           lin(self.grad, other.grad), lin(self.hess, other.hess))

    def scaled(self, c: float) -> "ScalarField":
        return ScalarField(self.spec, c * self.values,
                           None if self.grad is None else c * self.grad,
                           None if self.hess is None else c * self.hess)

    def without_jet(self) -> "ScalarField":
        return ScalarField(self.spec, self.values)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __neg__(self):
        return self.scaled(-1.0)

    def __mul__(self, c):
        if isinstance(c, (int, float, np.floating)):
            return self.scaled(float(c))
        return NotImplemented

    __rmul__ = __mul__

    def sup(self, region: np.ndarray | None = None) -> float:
        a = np.abs(self.values)
        return float(a[region].max() if region is not None else a.max())


@dataclass(frozen=True, eq=False)
class VectorField:
    """Samples of a real 3-vector field, optionally with exact derivatives."""

    spec: GridSpec
    components: np.ndarray
    jacobian: np.ndarray | None = None
    d2: np.ndarray | None = None

    def __post_init__(self):
        s = self.spec.shape
        object.__setattr__(self, "components", _readonly(self.components))
        object.__setattr__(self, "jacobian", _readonly(self.jacobian))
        object.__setattr__(self, "d2", _readonly(self.d2))
        _check_shape(self.components, (3,) + s, "components")
        _check_shape(self.jacobian, (3, 3) + s, "jacobian")
        _check_shape(self.d2, (3, 3, 3) + s, "d2")
        if not np.all(np.isfinite(self.components)):
            raise NonFiniteSampleError("vector field has non-finite samples")

    @classmethod
    def zeros(cls, spec: GridSpec, order: int = 0) -> "VectorField":
        s = spec.shape
        return cls(spec, np.zeros((3,) + s),
                   np.zeros((3, 3) + s) if order >= 1 else None,
                   np.zeros((3, 3, 3) + s) if order >= 2 else None)

    @property
    def order(self) -> int:
        """Number of exact derivative levels carried (0, 1 or 2)."""
        if self.jacobian is None:
            return 0
        return 2 if self.d2 is not None else 1

    def _combine(self, other, a, b):
        if not isinstance(other, VectorField):
            return NotImplemented
        if other.spec != self.spec:
            raise ValueError("fields live on different grids")

        def lin(p, q):
            return None if p is None or q is None else a * p + b * q

        return VectorField(self.spec, a * self.components + b * other.components,
                           lin(self.jacobian, other.jacobian), lin(self.d2, other.d2))

    def scaled(self, c: float) -> "VectorField":
        return VectorField(self.spec, c * self.components,
                           None if self.jacobian is None else c * self.jacobian,
                           None if self.d2 is None else c * self.d2)

    def truncated(self, order: int) -> "VectorField":
        """Drop derivative levels above ``order``."""
        return VectorField(self.spec, self.components,
                           self.jacobian if order >= 1 else None,
                           self.d2 if order >= 2 else None)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __neg__(self):
        return self.scaled(-1.0)

    def __mul__(self, c):
        if isinstance(c, (int, float, np.floating)):
            return self.scaled(float(c))
        return NotImplemented

    __rmul__ = __mul__

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.components**2, axis=0))

    def sup(self, region: np.ndarray | None = None) -> float:
        m = self.magnitude()
        return float(m[region].max() if region is not None else m.max())


def _evaluate(expr: Callable, spec: GridSpec, ncomp: int) -> np.ndarray:
    x, y, z = spec.coords
    with np.errstate(all="ignore"):
        out = expr(x, y, z)
    if ncomp == 1:
        vals = np.broadcast_to(np.asarray(out, dtype=np.float64), spec.shape).copy()
    else:
        vals = np.array([np.broadcast_to(np.asarray(c, dtype=np.float64), spec.shape)
                         for c in out])
        if vals.shape != (3,) + spec.shape:
            raise ValueError("vector expression must return three components")
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = np.argwhere(bad)[0]
        node = tuple(int(i) for i in idx[-3:])
        where = tuple(float(spec.axis[i]) for i in node)
        raise NonFiniteSampleError(f"non-finite value at node {node}, x = {where}")
    return vals


def sample_scalar(expr: Callable, spec: GridSpec) -> ScalarField:
    """Sample ``expr(x, y, z)`` (vectorised over arrays) at the grid nodes."""
    return ScalarField(spec, _evaluate(expr, spec, 1))


def sample_vector(expr: Callable, spec: GridSpec) -> VectorField:
    """Sample a vector expression returning a 3-sequence of components."""
    return VectorField(spec, _evaluate(expr, spec, 3))


# Spectral differentiation on the periodic box.

def _ik(spec: GridSpec, axis: int) -> np.ndarray:
    k = spec.wavenumbers.copy()
    k[spec.n // 2] = 0.0  # odd derivative of the Nyquist mode is not representable
    shape = [1, 1, 1]
    shape[axis] = spec.n
    return (1j * k).reshape(shape)


def _spectral_d(values: np.ndarray, spec: GridSpec, axis: int) -> np.ndarray:
    fh = np.fft.fft(values, axis=axis)
    return np.real(np.fft.ifft(fh * _ik(spec, axis), axis=axis))


def _spectral_jacobian(comps: np.ndarray, spec: GridSpec) -> np.ndarray:
    return np.array([[_spectral_d(comps[i], spec, j) for j in range(3)] for i in range(3)])


def jacobian(F: VectorField) -> np.ndarray:
    """``J[i, j] = d_j F_i``, exact when carried by the field, spectral otherwise."""
    if F.jacobian is not None:
        return F.jacobian
    return _spectral_jacobian(F.components, F.spec)


def gradient(f: ScalarField) -> VectorField:
    """Gradient of a scalar field.

    Uses the carried jet when present (the result then carries the Hessian as
    its Jacobian); otherwise a per-axis trigonometric-interpolation
    derivative.
    """
    if f.grad is not None:
        return VectorField(f.spec, f.grad, f.hess)
    return VectorField(f.spec, np.array([_spectral_d(f.values, f.spec, a) for a in range(3)]))


def divergence(F: VectorField) -> ScalarField:
    if F.jacobian is not None:
        grad = None
        if F.d2 is not None:
            grad = np.einsum("iik...->k...", F.d2)
        return ScalarField(F.spec, np.einsum("ii...->...", F.jacobian), grad)
    return ScalarField(F.spec, sum(_spectral_d(F.components[a], F.spec, a) for a in range(3)))


_LEVI = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _LEVI[_i, _j, _k] = 1.0
    _LEVI[_i, _k, _j] = -1.0


def curl(F: VectorField) -> VectorField:
    """``(curl F)_i = eps_ijk d_j F_k``."""
    J = jacobian(F)
    c = np.einsum("ijk,kj...->i...", _LEVI, J)
    jac = None
    if F.d2 is not None:
        jac = np.einsum("ijk,kjl...->il...", _LEVI, F.d2)
    return VectorField(F.spec, c, jac)


def laplacian(f: ScalarField) -> ScalarField:
    if f.hess is not None:
        return ScalarField(f.spec, np.einsum("ii...->...", f.hess))
    spec = f.spec
    k2 = spec.wavenumbers**2
    ksq = k2[:, None, None] + k2[None, :, None] + k2[None, None, :]
    return ScalarField(spec, np.real(np.fft.ifftn(-ksq * np.fft.fftn(f.values))))


def sup_norms(F: VectorField, region: np.ndarray | None = None) -> tuple[float, float]:
    """``(max |F|, max |grad F|)`` with the Frobenius norm of the Jacobian."""
    J = jacobian(F)
    jn = np.sqrt(np.sum(J**2, axis=(0, 1)))
    if region is not None:
        return float(F.magnitude()[region].max()), float(jn[region].max())
    return float(F.magnitude().max()), float(jn.max())


def source_window(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Radial C-infinity taper applied to convolution sources.

    Returns the window and its gradient.  The window is exactly 1 on the
    ball of radius ``WINDOW_INNER * L`` (which contains the inner half-box)
    and exactly 0 beyond ``WINDOW_OUTER * L``; being radial it leaves the
    shell theorem intact for radially symmetric sources.
    """
    r0 = WINDOW_INNER * spec.extent
    r1 = WINDOW_OUTER * spec.extent
    r = spec.radius
    t = np.clip((r - r0) / (r1 - r0), 0.0, 1.0)
    inside = (t > 0) & (t < 1)
    a = np.zeros_like(t)
    b = np.zeros_like(t)
    a[inside] = np.exp(-1.0 / t[inside])
    b[inside] = np.exp(-1.0 / (1.0 - t[inside]))
    a[t >= 1] = 1.0
    b[t <= 0] = 1.0
    chi = 1.0 - a / (a + b)
    # d/dt of a/(a+b) = (a' b - a b') / (a+b)^2 with a' = a/t^2, b' = -b/(1-t)^2
    dchi_dt = np.zeros_like(t)
    ti, ai, bi = t[inside], a[inside], b[inside]
    dchi_dt[inside] = -(ai * bi * (1.0 / ti**2 + 1.0 / (1.0 - ti) ** 2)) / (ai + bi) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        rhat = np.where(r > 0, spec.coords / r, 0.0)
    grad = dchi_dt / (r1 - r0) * rhat
    return chi, grad


def write_field(path: str | Path, field: ScalarField | VectorField, quantity: str,
                sign: GeometrySign | None = None) -> tuple[Path, Path]:
    """Write a binary dump plus its JSON sidecar; returns both paths."""
    path = Path(path)
    spec = field.spec
    if isinstance(field, VectorField):
        data = np.stack([np.asfortranarray(c) for c in field.components])
        body = b"".join(np.asarray(c, dtype="<f8").tobytes(order="F") for c in data)
        kind = "vector"
    else:
        body = np.asarray(field.values, dtype="<f8").tobytes(order="F")
        kind = "scalar"
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DUMP_MAGIC, spec.n, float(spec.extent)))
        fh.write(body)
    meta = {"quantity": quantity, "kind": kind,
            "geometry_sign": None if sign is None else sign.value,
            "points_per_axis": spec.n, "extent": float(spec.extent),
            "padding_factor": int(spec.padding_factor), "byte_order": "little",
            "layout": "x-fastest"}
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps(meta, indent=2) + "\n")
    return path, side


def read_field(path: str | Path) -> tuple[ScalarField | VectorField, dict]:
    """Read a dump written by :func:`write_field`; returns (field, sidecar)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DumpFormatError(f"{path}: shorter than the header")
    magic, n, extent = _HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC:
        raise DumpFormatError(f"{path}: bad magic {magic!r}")
    side = path.with_name(path.name + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    spec = GridSpec(extent, int(n), int(meta.get("padding_factor", 2)))
    count = (len(raw) - _HEADER.size) // 8
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if count == n**3 and (len(raw) - _HEADER.size) == 8 * n**3:
        return ScalarField(spec, flat.reshape(spec.shape, order="F")), meta
    if count == 3 * n**3 and (len(raw) - _HEADER.size) == 24 * n**3:
        comps = flat.reshape((3, n * n * n))
        return VectorField(spec, np.array([c.reshape(spec.shape, order="F") for c in comps])), meta
    raise DumpFormatError(f"{path}: payload of {len(raw) - _HEADER.size} bytes fits neither N^3 nor 3N^3")
