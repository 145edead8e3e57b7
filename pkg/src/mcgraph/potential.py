"""Free-space Newtonian potential on the grid.

``N = (-Delta)^{-1}`` is convolution with ``1/(4 pi |x|)``.  Sources are
treated as their trigonometric (band-limited) interpolants and convolved with
a truncated Green's function ``T(|x|) / (4 pi |x|)`` with a smooth cut-off
``T(r) = erfc((r - R) / d) / 2``.  Its Fourier transform has the closed form

    G(k) = (1 - exp(-d^2 |k|^2 / 4) cos(R |k|)) / |k|^2,   G(0) = R^2/2 + d^2/4.

With ``R - 6d`` beyond the box diagonal the kernel equals ``1/(4 pi |x|)``
at every node separation, so the discrete aperiodic convolution is exact for
band-limited sources and potentials, gradients and Hessians come out at
round-off accuracy.  A sharp cut-off would leave a ringing shell in the
sampled Laplacian; the smooth one keeps ``trace(Hess N) = -identity`` to
round-off for arbitrary data.  Kernel samples are obtained by separable
DCT-I / DST-I transforms of ``G``, ``k_i G`` and ``k_i k_j G`` on a
4N-periodic lattice and are then laid out on the zero-padded (Hockney) box.

Every source is multiplied by the radial taper of
:func:`mcgraph.grid_fields.source_window` first; the taper equals one on the
inner half-box.
"""

from __future__ import annotations

import threading
import warnings
from typing import Iterable

import numpy as np
import scipy.fft as sfft

from .grid_fields import GridSpec, ScalarField, VectorField, divergence, jacobian, source_window

__all__ = [
    "KernelPlan",
    "SupportWarning",
    "get_plan",
    "clear_plans",
    "newtonian_potential",
    "gradient_potential",
    "solenoidal_project",
    "curl_potential",
    "support_ratio",
]

# Ratio of the largest source magnitude in the taper region to the overall
# maximum above which a public call warns about truncated support.
SUPPORT_THRESHOLD = 1e-6

_HESS_KEYS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


class SupportWarning(UserWarning):
    """A convolution source is not negligible near the box boundary."""


def _transform(F: np.ndarray, odd: tuple[int, ...], n: int) -> np.ndarray:
    """Inverse lattice sum of an octant array with given parity per axis.

    Even axes use DCT-I over indices 0..2N, odd axes DST-I over 1..2N-1.
    Odd axes return the sine sum without the factor i.
    """
    out = F
    m2 = 2 * n
    for ax in range(3):
        if ax in odd:
            sl = [slice(None)] * 3
            sl[ax] = slice(1, m2)
            tmp = np.zeros(out.shape)
            tmp[tuple(sl)] = sfft.dst(out[tuple(sl)], type=1, axis=ax)
            out = tmp
        else:
            out = sfft.dct(out, type=1, axis=ax)
    return out / (4 * n) ** 3


def _octant_kernels(spec: GridSpec, keys: Iterable) -> dict:
    n, h = spec.n, spec.h
    # cut-off centred between the box diagonal and its first periodic image
    radius = 2.0 * n * h
    width = (2.0 - np.sqrt(3.0)) * n * h / 6.5
    k = 2.0 * np.pi * np.arange(2 * n + 1) / (4 * n * h)
    ks = np.meshgrid(k, k, k, indexing="ij", sparse=True)
    k2 = ks[0] ** 2 + ks[1] ** 2 + ks[2] ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        G = (1.0 - np.exp(-0.25 * width**2 * k2) * np.cos(radius * np.sqrt(k2))) / k2
    G[0, 0, 0] = radius**2 / 2.0 + width**2 / 4.0
    out = {}
    for key in keys:
        if key == "G":
            out[key] = _transform(G, (), n)
        elif key[0] == "g":
            # symbol i k_i G: the odd sum contributes another factor i
            i = key[1]
            out[key] = -_transform(ks[i] * G, (i,), n)
        else:
            i, j = key[1], key[2]
            if i == j:
                out[key] = -_transform(ks[i] ** 2 * G, (), n)
            else:
                # symbol -k_i k_j G, two odd sums give i^2 = -1
                out[key] = _transform(ks[i] * ks[j] * G, (i, j), n)
        out[key] /= h**3
    return out


def _odd_axes(key) -> tuple[int, ...]:
    if key == "G":
        return ()
    if key[0] == "g":
        return (key[1],)
    return () if key[1] == key[2] else (key[1], key[2])


class KernelPlan:
    """Precomputed padded transforms of the free-space kernels for one grid.

    Kernels are built lazily, one per derivative pattern: ``"G"`` (the
    potential), ``("g", i)`` (its i-th derivative) and ``("H", i, j)``
    (second derivatives, ``i <= j``).  Plans are immutable once a kernel is
    built and safe to share.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.padded = spec.padding_factor * spec.n
        self._kernels: dict = {}
        self._lock = threading.Lock()
        self._window, self._window_grad = source_window(spec)
        self.max_tail_ratio = 0.0

    @property
    def window(self) -> np.ndarray:
        return self._window

    @property
    def window_grad(self) -> np.ndarray:
        return self._window_grad

    def _ensure(self, keys) -> None:
        missing = [k for k in keys if k not in self._kernels]
        if not missing:
            return
        with self._lock:
            missing = [k for k in keys if k not in self._kernels]
            if not missing:
                return
            n, p = self.spec.n, self.padded
            octant = _octant_kernels(self.spec, missing)
            off = np.arange(p)
            off = np.where(off < p // 2, off, off - p)
            valid = np.abs(off) <= n - 1
            idx = np.where(valid, np.abs(off), 0)
            for key, oc in octant.items():
                arr = oc[np.ix_(idx, idx, idx)]
                for ax in range(3):
                    shape = [1, 1, 1]
                    shape[ax] = p
                    mask = valid.reshape(shape)
                    arr = arr * mask
                    if ax in _odd_axes(key):
                        arr = arr * np.sign(off).reshape(shape)
                self._kernels[key] = sfft.rfftn(arr)

    def _forward(self, source: np.ndarray) -> np.ndarray:
        n, p = self.spec.n, self.padded
        buf = np.zeros((p, p, p))
        buf[:n, :n, :n] = source
        return sfft.rfftn(buf)

    def _apply(self, fsrc: np.ndarray, key) -> np.ndarray:
        n, p = self.spec.n, self.padded
        full = sfft.irfftn(fsrc * self._kernels[key], s=(p, p, p))
        return full[:n, :n, :n] * self.spec.cell_volume

    def convolve(self, source: np.ndarray, keys) -> dict:
        """Convolve a raw (already tapered) source with several kernels."""
        keys = list(keys)
        self._ensure(keys)
        fsrc = self._forward(source)
        return {key: self._apply(fsrc, key) for key in keys}

    def taper(self, values: np.ndarray, grad: np.ndarray | None = None):
        """Apply the source window; also returns the tapered gradient if given."""
        tail = float(np.abs(values[self._window < 1.0]).max(initial=0.0))
        peak = float(np.abs(values).max(initial=0.0))
        if peak > 0:
            self.max_tail_ratio = max(self.max_tail_ratio, tail / peak)
        tv = self._window * values
        if grad is None:
            return tv, None
        return tv, self._window_grad * values + self._window * grad

    def potential_jet(self, values: np.ndarray, order: int = 2):
        """``N s``, ``grad N s`` and ``Hess N s`` of a raw source (tapered here)."""
        s, _ = self.taper(values)
        keys = ["G"]
        if order >= 1:
            keys += [("g", i) for i in range(3)]
        if order >= 2:
            keys += [("H",) + ij for ij in _HESS_KEYS]
        res = self.convolve(s, keys)
        grad = np.array([res[("g", i)] for i in range(3)]) if order >= 1 else None
        hess = _assemble_hessian(res) if order >= 2 else None
        return res["G"], grad, hess

    def gradient_jet(self, values: np.ndarray, grad: np.ndarray | None, order: int):
        """``grad N s`` with Jacobian (and second derivatives when ``grad`` is given)."""
        s, ds = self.taper(values, grad)
        keys = [("g", i) for i in range(3)]
        if order >= 1:
            keys += [("H",) + ij for ij in _HESS_KEYS]
        res = self.convolve(s, keys)
        g = np.array([res[("g", i)] for i in range(3)])
        hess = _assemble_hessian(res) if order >= 1 else None
        d2 = None
        if order >= 2:
            if ds is None:
                raise ValueError("second derivatives need the source gradient")
            # d_k d_l grad_i N s = d_i d_l N (d_k s) ... arranged as d2[i, k, l]
            d2 = np.empty((3, 3, 3) + self.spec.shape)
            for m in range(3):
                hm = _assemble_hessian(self.convolve(ds[m], [("H",) + ij for ij in _HESS_KEYS]))
                d2[:, :, m] = hm
        return g, hess, d2


def _assemble_hessian(res: dict) -> np.ndarray:
    first = res[("H", 0, 0)]
    out = np.empty((3, 3) + first.shape)
    for i, j in _HESS_KEYS:
        out[i, j] = res[("H", i, j)]
        out[j, i] = out[i, j]
    return out


_PLANS: dict = {}
_PLANS_LOCK = threading.Lock()


def get_plan(spec: GridSpec) -> KernelPlan:
    """Shared plan for ``spec`` (built once per process)."""
    with _PLANS_LOCK:
        plan = _PLANS.get(spec)
        if plan is None:
            if len(_PLANS) >= 4:
                _PLANS.pop(next(iter(_PLANS)))
            plan = _PLANS[spec] = KernelPlan(spec)
        return plan


def clear_plans() -> None:
    """Drop every cached plan (frees the kernel transforms)."""
    with _PLANS_LOCK:
        _PLANS.clear()


def support_ratio(values: np.ndarray, spec: GridSpec) -> float:
    """Largest ``|values|`` where the source taper is below one, over the peak."""
    peak = float(np.abs(values).max(initial=0.0))
    if peak == 0.0:
        return 0.0
    window, _ = source_window(spec)
    return float(np.abs(values[window < 1.0]).max(initial=0.0)) / peak


def _check_support(values: np.ndarray, plan: KernelPlan, what: str) -> None:
    ratio = support_ratio(values, plan.spec)
    if ratio > SUPPORT_THRESHOLD:
        warnings.warn(f"{what}: source magnitude inside the boundary taper is "
                      f"{ratio:.2e} of its peak", SupportWarning, stacklevel=3)


def newtonian_potential(f: ScalarField, plan: KernelPlan | None = None, *,
                        order: int = 2, warn: bool = True) -> ScalarField:
    """``N f``, i.e. the decaying solution of ``-Delta u = f``.

    The result carries its exact gradient and Hessian (``order`` = 2).
    """
    plan = plan or get_plan(f.spec)
    if warn:
        _check_support(f.values, plan, "newtonian_potential")
    u, g, hs = plan.potential_jet(f.values, order)
    return ScalarField(f.spec, u, g, hs)


def gradient_potential(f: ScalarField, plan: KernelPlan | None = None, *,
                       order: int = 1, warn: bool = True) -> VectorField:
    """``grad N f``; callers supply scaling and sign.

    ``divergence`` of the result is ``-f``.  ``order`` selects how many
    exact derivative levels the result carries; level 2 uses ``f.grad`` if
    present and a spectral gradient of ``f`` otherwise.
    """
    plan = plan or get_plan(f.spec)
    if warn:
        _check_support(f.values, plan, "gradient_potential")
    grad = None
    if order >= 2:
        grad = f.grad if f.grad is not None else _spectral_grad(f)
    g, hs, d2 = plan.gradient_jet(f.values, grad, order)
    return VectorField(f.spec, g, hs, d2)


def _spectral_grad(f: ScalarField) -> np.ndarray:
    from .grid_fields import gradient

    return gradient(ScalarField(f.spec, f.values)).components


def solenoidal_project(V: VectorField, plan: KernelPlan | None = None, *,
                       order: int | None = None, warn: bool = True) -> VectorField:
    """``P V = V + grad N (div V)``: removes the decaying gradient part of ``V``.

    The output carries derivative levels up to ``order`` (default: those of
    ``V``, at least one).
    """
    plan = plan or get_plan(V.spec)
    order = max(V.order, 1) if order is None else order
    div = divergence(V if order <= V.order else V.truncated(V.order))
    if warn:
        _check_support(div.values, plan, "solenoidal_project")
    grad_div = div.grad if order >= 2 else None
    if order >= 2 and grad_div is None:
        grad_div = _spectral_grad(div)
    g, hs, d2 = plan.gradient_jet(div.values, grad_div, order)
    J = jacobian(V) if order >= 1 else None
    out_d2 = None
    if order >= 2:
        if V.d2 is None:
            raise ValueError("order-2 projection needs V.d2")
        out_d2 = V.d2 + d2
    return VectorField(V.spec, V.components + g, None if J is None else J + hs, out_d2)


def curl_potential(S: VectorField, plan: KernelPlan | None = None, *,
                   order: int = 1, warn: bool = True) -> VectorField:
    """``curl N S``: the decaying divergence-free ``X`` with ``curl X = S``
    whenever ``S`` is divergence-free (Biot-Savart form).

    Level 2 derivatives need ``S.jacobian``.
    """
    plan = plan or get_plan(S.spec)
    if warn:
        for c in S.components:
            _check_support(c, plan, "curl_potential")
    spec = S.spec
    # per source component c: grad N s_c, Hess N s_c, and d2 from grad s_c
    G = np.empty((3, 3) + spec.shape)          # G[c, j] = d_j N s_c
    Hs = np.empty((3, 3, 3) + spec.shape) if order >= 1 else None
    D3 = np.empty((3, 3, 3, 3) + spec.shape) if order >= 2 else None
    for c in range(3):
        grad_c = None
        if order >= 2:
            if S.jacobian is None:
                raise ValueError("order-2 curl potential needs S.jacobian")
            grad_c = S.jacobian[c]
        g, hs, d2 = plan.gradient_jet(S.components[c], grad_c, order)
        G[c] = g
        if order >= 1:
            Hs[c] = hs
        if order >= 2:
            D3[c] = d2
    from .grid_fields import _LEVI

    val = np.einsum("ijk,kj...->i...", _LEVI, G)
    jac = np.einsum("ijk,kjl...->il...", _LEVI, Hs) if order >= 1 else None
    d2 = np.einsum("ijk,kjlm...->ilm...", _LEVI, D3) if order >= 2 else None
    return VectorField(spec, val, jac, d2)
