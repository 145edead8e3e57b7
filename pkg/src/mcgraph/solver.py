"""Series solution of the prescribed mean-curvature equation over R^3.

With ``H = eps * H0`` the unknown flux ``v = +/- grad u / sqrt(1 +/- |grad u|^2)``
is expanded in odd powers of ``eps``.  The first term is the Newtonian field
``v^(1) = -grad N(3 H0)``; every higher term is divergence-free and obtained
from the lower ones, either as ``P V^(2k+1)`` (square-root form) or as
``curl N`` of the cubic convective source.  ``u`` follows from
``-Delta u = rho`` with

    rho = -/+ 3 eps H0  +/-  sum_{k>=1} eps^(2k+1) div V^(2k+1).

Sign conventions: the upper sign is the Euclidean geometry; ``N`` inverts
``-Delta``.  The hierarchy terms do not depend on ``eps``, so a
:class:`SeriesCore` can be assembled for several ``eps`` and truncation
orders without recomputing them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .coefficients import ConvergenceCertificate, certify
from .grid_fields import (GeometrySign, GridSpec, ScalarField, VectorField, read_field,
                          sup_norms)
from .hierarchy import TermStack, build_cubic_rhs, build_V
from .potential import KernelPlan, get_plan, support_ratio

__all__ = [
    "Bump",
    "CurvatureSpec",
    "SolverConfig",
    "SeriesCore",
    "SeriesSolution",
    "MagnitudeBreachError",
    "SupportError",
    "first_order_term",
    "compute_core",
    "assemble",
    "solve_series",
    "reconstruct_w",
    "reconstruct_u",
    "norm_proxy",
]

VARIANTS = ("sqrt", "cubic")


class MagnitudeBreachError(ArithmeticError):
    """``|v|`` approached the singular value 1 of the v-to-w map."""


class SupportError(ValueError):
    """The curvature source is not confined to the inner half-box."""


@dataclass(frozen=True)
class Bump:
    """Gaussian ``amplitude * exp(-|x - center|^2 / (2 width^2))``."""

    amplitude: float
    width: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def integral(self) -> float:
        return self.amplitude * (2.0 * math.pi) ** 1.5 * self.width**3


@dataclass(frozen=True)
class CurvatureSpec:
    """Description of ``H0``.

    ``kind`` is one of ``"gaussian"``, ``"dipole"``, ``"multi_bump"``,
    ``"born_infeld"`` (a Gaussian charge density ``rho``, with
    ``H0 = (4 pi / 3) rho``) or ``"file"`` (a scalar field dump).
    """

    kind: str = "gaussian"
    bumps: tuple[Bump, ...] = (Bump(3.0, 1.0),)
    path: str | None = None
    scale: float = 1.0
    beta: float | None = None

    @classmethod
    def gaussian(cls, amplitude=3.0, width=1.0, center=(0.0, 0.0, 0.0)) -> "CurvatureSpec":
        return cls("gaussian", (Bump(float(amplitude), float(width), tuple(map(float, center))),))

    @classmethod
    def dipole(cls, amplitude=3.0, width=1.0, separation=1.5, axis=0) -> "CurvatureSpec":
        c = [0.0, 0.0, 0.0]
        c[axis] = 0.5 * separation
        plus = tuple(c)
        minus = tuple(-x for x in c)
        return cls("dipole", (Bump(float(amplitude), float(width), plus),
                              Bump(-float(amplitude), float(width), minus)))

    @classmethod
    def multi_bump(cls, bumps) -> "CurvatureSpec":
        return cls("multi_bump", tuple(b if isinstance(b, Bump) else Bump(*b) for b in bumps))

    @classmethod
    def born_infeld(cls, charge=0.3, width=1.0, beta=0.3, center=(0.0, 0.0, 0.0)) -> "CurvatureSpec":
        return cls("born_infeld", (Bump(float(charge), float(width), tuple(map(float, center))),),
                   scale=4.0 * math.pi / 3.0, beta=float(beta))

    @classmethod
    def from_file(cls, path) -> "CurvatureSpec":
        return cls("file", (), path=str(path))

    def sample(self, spec: GridSpec) -> ScalarField:
        """``H0`` on the grid, with its analytic gradient for presets."""
        if self.kind == "file":
            f, _ = read_field(self.path)
            if not isinstance(f, ScalarField):
                raise ValueError(f"{self.path} holds a vector field")
            if f.spec.n != spec.n or not math.isclose(f.spec.extent, spec.extent):
                raise ValueError(f"{self.path} was written on a different grid")
            return ScalarField(spec, self.scale * f.values)
        x = spec.coords
        vals = np.zeros(spec.shape)
        grad = np.zeros((3,) + spec.shape)
        for b in self.bumps:
            d = x - np.asarray(b.center, dtype=float).reshape(3, 1, 1, 1)
            g = b.amplitude * np.exp(-np.sum(d**2, axis=0) / (2.0 * b.width**2))
            vals += g
            grad -= d / b.width**2 * g
        return ScalarField(spec, self.scale * vals, self.scale * grad)

    def integral(self) -> float | None:
        """Closed-form ``int H0`` for presets (None for file sources)."""
        if self.kind == "file":
            return None
        return self.scale * sum(b.integral() for b in self.bumps)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "scale": self.scale}
        if self.kind == "file":
            d["path"] = self.path
        else:
            d["bumps"] = [{"amplitude": b.amplitude, "width": b.width, "center": list(b.center)}
                          for b in self.bumps]
        if self.beta is not None:
            d["beta"] = self.beta
        return d


DEFAULT_TOLERANCES = {
    "guard": 0.05,
    "support_threshold": 1e-6,
}


@dataclass(frozen=True)
class SolverConfig:
    sign: GeometrySign = GeometrySign.EUCLIDEAN
    epsilon: float = 0.04
    order_K: int = 4
    variant: str = "sqrt"
    grid: GridSpec = GridSpec(8.0, 64, 2)
    source: CurvatureSpec = CurvatureSpec()
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    jet_order: int | None = None

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be a positive number")
        if not isinstance(self.order_K, (int, np.integer)) or self.order_K < 0:
            raise ValueError("order_K must be a non-negative integer")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.jet_order not in (None, 1, 2):
            raise ValueError("jet_order must be 1 or 2")
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(self.tolerances)
        object.__setattr__(self, "tolerances", tol)

    @property
    def derivative_levels(self) -> int:
        if self.jet_order is not None:
            return self.jet_order
        return 2 if self.variant == "cubic" else 1

    @property
    def guard(self) -> float:
        return float(self.tolerances["guard"])

    def to_dict(self) -> dict:
        return {"sign": self.sign.value, "epsilon": self.epsilon, "order_K": self.order_K,
                "variant": self.variant, "grid": self.grid.to_dict(),
                "source": self.source.to_dict(), "tolerances": dict(self.tolerances),
                "jet_order": self.derivative_levels}


def norm_proxy(F: VectorField, region: np.ndarray | None = None) -> float:
    """``max(|F|_inf, |grad F|_inf)``, the computable stand-in for the
    Hoelder norm used by the convergence certificate."""
    a, b = sup_norms(F, region)
    return max(a, b)


def first_order_term(H0: ScalarField, plan: KernelPlan | None = None, *,
                     order: int = 1) -> VectorField:
    """``v^(1) = -grad N(3 H0)``: ``div v^(1) = 3 H0`` and ``curl v^(1) = 0``."""
    plan = plan or get_plan(H0.spec)
    grad = None
    if order >= 2:
        if H0.grad is None:
            from .grid_fields import gradient

            grad = -3.0 * gradient(H0.without_jet()).components
        else:
            grad = -3.0 * H0.grad
    g, hs, d2 = plan.gradient_jet(-3.0 * H0.values, grad, order)
    return VectorField(H0.spec, g, hs, d2)


@dataclass
class SeriesCore:
    """``eps``-independent part of a solution: terms, their ``div V`` and
    the potentials ``N(rho_k)`` with derivative jets."""

    sign: GeometrySign
    variant: str
    H0: ScalarField
    stack: TermStack
    div_V: list = field(default_factory=list)       # k -> ndarray, index 0 unused
    u_parts: list = field(default_factory=list)     # k -> (u, grad, hess) of N(rho_k)
    diagnostics: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.stack) - 1

    @property
    def spec(self) -> GridSpec:
        return self.H0.spec


def compute_core(H0: ScalarField, sign: GeometrySign, K: int, variant: str = "sqrt", *,
                 order: int | None = None, plan: KernelPlan | None = None,
                 with_u: bool = True) -> SeriesCore:
    """Hierarchy terms ``v^(2k+1)``, ``k = 0..K``, and the pieces of ``u``."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    order = (2 if variant == "cubic" else 1) if order is None else order
    plan = plan or get_plan(H0.spec)
    t0 = time.perf_counter()
    stack = TermStack(sign, order)
    stack.append(first_order_term(H0, plan, order=order))
    div_V: list = [None]
    for k in range(1, K + 1):
        if variant == "sqrt":
            V = build_V(k, stack)
            g = np.einsum("ii...->...", V.jacobian)
            grad_g = np.einsum("iik...->k...", V.d2) if order >= 2 else None
            gp, hs, d2 = plan.gradient_jet(g, grad_g, order)
            term = VectorField(H0.spec, V.components + gp, V.jacobian + hs,
                               None if order < 2 else V.d2 + d2)
            div_V.append(g)
        else:
            from .potential import curl_potential

            rhs = build_cubic_rhs(k, stack, order=order - 1)
            term = curl_potential(rhs, plan, order=order, warn=False)
            div_V.append(None)
        stack.append(term)
    if with_u and variant == "cubic":
        for k in range(1, K + 1):
            V = build_V(k, stack, order=1)
            div_V[k] = np.einsum("ii...->...", V.jacobian)
    u_parts = []
    if with_u:
        pm = sign.pm
        u_parts.append(plan.potential_jet(-pm * 3.0 * H0.values, 2))
        for k in range(1, K + 1):
            u_parts.append(plan.potential_jet(pm * div_V[k], 2))
    diag = {
        "core_seconds": time.perf_counter() - t0,
        "term_sup_norms": [float(t.sup()) for t in stack.terms],
        "term_sup_norms_inner": [float(t.sup(H0.spec.inner_mask)) for t in stack.terms],
        "window_tail_ratio": plan.max_tail_ratio,
        "first_term_boundary_magnitude": _boundary_magnitude(stack[0]),
    }
    return SeriesCore(sign, variant, H0, stack, div_V, u_parts, diag)


def _boundary_magnitude(F: VectorField) -> float:
    """Largest ``|F|`` on the outermost layer of nodes."""
    m = F.magnitude()
    faces = [m[0], m[-1], m[:, 0], m[:, -1], m[:, :, 0], m[:, :, -1]]
    return float(max(f.max() for f in faces))


def assemble(stack: TermStack, epsilon: float, K: int | None = None) -> VectorField:
    """``v = sum_{k<=K} eps^(2k+1) v^(2k+1)`` (ascending k)."""
    K = len(stack) - 1 if K is None else K
    if K > len(stack) - 1:
        raise ValueError(f"stack holds terms up to k={len(stack) - 1}")
    out = stack[0].scaled(epsilon)
    for k in range(1, K + 1):
        out = out + stack[k].scaled(epsilon ** (2 * k + 1))
    return out


def reconstruct_w(v: VectorField, sign: GeometrySign, guard: float = 0.05) -> VectorField:
    """``w = v / sqrt(1 -/+ |v|^2)`` pointwise.

    The Euclidean map is singular at ``|v| = 1``; a radicand at or below
    ``guard^2`` raises :class:`MagnitudeBreachError`.  Jets are carried
    through when ``v`` has a Jacobian.
    """
    q = np.sum(v.components**2, axis=0)
    rad = 1.0 - sign.pm * q
    if sign is GeometrySign.EUCLIDEAN:
        low = rad <= guard**2
        if low.any():
            node = tuple(int(i) for i in np.argwhere(low)[0])
            raise MagnitudeBreachError(
                f"1 - |v|^2 = {rad[node]:.3e} <= guard^2 at node {node}")
    f = rad**-0.5
    comps = f * v.components
    jac = None
    if v.jacobian is not None:
        # d_j f = +/- f^3 v . d_j v
        vdv = np.einsum("i...,ij...->j...", v.components, v.jacobian)
        df = sign.pm * f**3 * vdv
        jac = f * v.jacobian + np.einsum("i...,j...->ij...", v.components, df)
    return VectorField(v.spec, comps, jac)


def reconstruct_u(core: SeriesCore, epsilon: float, K: int | None = None) -> ScalarField:
    """``u = N(rho)`` with exact gradient and Hessian."""
    K = core.K if K is None else K
    if not core.u_parts:
        raise ValueError("core was computed without the u pieces")
    vals = np.zeros(core.spec.shape)
    grad = np.zeros((3,) + core.spec.shape)
    hess = np.zeros((3, 3) + core.spec.shape)
    for k in range(K + 1):
        c = epsilon ** (2 * k + 1)
        u, g, hs = core.u_parts[k]
        vals += c * u
        grad += c * g
        hess += c * hs
    return ScalarField(core.spec, vals, grad, hess)


@dataclass
class SeriesSolution:
    config: SolverConfig
    terms: TermStack
    v: VectorField
    w: VectorField
    u: ScalarField
    H0: ScalarField
    certificate: ConvergenceCertificate
    diagnostics: dict
    core: SeriesCore | None = None
    warnings: list = field(default_factory=list)

    @property
    def H(self) -> ScalarField:
        return self.H0.scaled(self.config.epsilon)


def check_support(H0: ScalarField, threshold: float) -> float:
    """Largest ``|H0|`` where the source taper is below one, relative to the peak."""
    ratio = support_ratio(H0.values, H0.spec)
    if ratio > threshold:
        raise SupportError(f"H0 inside the boundary taper reaches {ratio:.2e} of its peak "
                           f"(threshold {threshold:.1e})")
    return ratio


def solve_series(config: SolverConfig, core: SeriesCore | None = None) -> SeriesSolution:
    """Run the hierarchy to order ``2K+1`` and assemble ``v``, ``w``, ``u``.

    A precomputed ``core`` with the same source, sign and variant is reused.
    """
    t0 = time.perf_counter()
    notes = []
    if core is None:
        H0 = config.source.sample(config.grid)
        support = check_support(H0, float(config.tolerances["support_threshold"]))
        core = compute_core(H0, config.sign, config.order_K, config.variant,
                            order=config.derivative_levels)
    else:
        if core.K < config.order_K or core.sign is not config.sign:
            raise ValueError("core does not match the configuration")
        support = check_support(core.H0, float(config.tolerances["support_threshold"]))
    eps, K = config.epsilon, config.order_K
    v = assemble(core.stack, eps, K)
    vmax = v.magnitude()
    if config.sign is GeometrySign.EUCLIDEAN and vmax.max() >= 1.0 - config.guard:
        node = tuple(int(i) for i in np.unravel_index(np.argmax(vmax), vmax.shape))
        x = tuple(float(config.grid.axis[i]) for i in node)
        raise MagnitudeBreachError(f"|v| = {vmax.max():.4f} >= 1 - guard at node {node}, x = {x}")
    w = reconstruct_w(v, config.sign, config.guard)
    u = reconstruct_u(core, eps, K)
    proxy = norm_proxy(core.stack[0])
    cert = certify(eps * proxy, K)
    if not cert.inside:
        notes.append(f"xi_g = {cert.xi_g:.4f} is not below the radius {cert.xi_star:.6f}; "
                     "the majorant argument gives no convergence guarantee (it is only sufficient)")
    inner = config.grid.inner_mask
    grad_u = np.asarray(u.grad)
    consistency = float(np.sqrt(np.sum((grad_u - config.sign.pm * w.components) ** 2, axis=0))[inner].max())
    scale = max(float(w.sup(inner)), 1e-300)
    diag = dict(core.diagnostics)
    diag.update({
        "first_term_norm_proxy": proxy,
        "support_ratio": support,
        "source_integral_grid": float(core.H0.values.sum() * config.grid.cell_volume),
        "source_integral_exact": config.source.integral(),
        "grad_u_vs_w_relative": consistency / scale,
        "v_sup": float(vmax.max()),
        "solve_seconds": time.perf_counter() - t0,
    })
    return SeriesSolution(config, core.stack, v, w, u, core.H0, cert, diag, core, notes)


def with_epsilon(config: SolverConfig, epsilon: float, K: int | None = None) -> SolverConfig:
    return replace(config, epsilon=epsilon, order_K=config.order_K if K is None else K)


def load_source(path: str | Path) -> CurvatureSpec:
    return CurvatureSpec.from_file(path)
