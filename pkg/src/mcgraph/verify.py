"""Independent checks of a series solution.

* the PDE residual ``+/- div(grad u / sqrt(1 +/- |grad u|^2)) - 3H``;
* the identities ``v . curl v = 0`` and ``grad |v|^2 . curl v = 0`` that any
  solution satisfies while arbitrary fields do not;
* a damped Picard iteration solving the PDE directly, used as an oracle;
* the monopole far field of ``u``;
* solenoidality of the hierarchy terms and of the cubic sources.

Residuals and defects are measured on the inner half-box.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid_fields import (GeometrySign, ScalarField, VectorField, curl, divergence, gradient,
                          jacobian, sup_norms)
from .hierarchy import TermStack, build_cubic_rhs
from .potential import KernelPlan, get_plan

__all__ = [
    "VerificationReport",
    "OracleResult",
    "OracleDivergenceError",
    "GradientBreachError",
    "residual",
    "residual_field",
    "identity_checks",
    "fixed_point_oracle",
    "farfield_check",
    "term_divergence_defects",
    "cubic_source_divergence",
    "slope_fit",
    "residual_slopes",
    "run_verification",
]


class OracleDivergenceError(RuntimeError):
    """The Picard iteration stopped contracting."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


class GradientBreachError(ArithmeticError):
    """``|grad u|`` reached the light-cone bound of the Minkowskian equation."""


def _jet(u: ScalarField):
    g = u.grad if u.grad is not None else gradient(u).components
    hs = u.hess
    if hs is None:
        hs = jacobian(VectorField(u.spec, g))
    return g, hs


def residual_field(u: ScalarField, H: ScalarField, sign: GeometrySign,
                   guard: float = 0.05) -> np.ndarray:
    """Pointwise ``+/- div(grad u / sqrt(1 +/- q)) - 3H`` with ``q = |grad u|^2``.

    Written in non-divergence form,
    ``div(f grad u) = f Lap u -/+ (grad u . Hess u grad u) (1 +/- q)^(-3/2)``,
    using the exact derivatives carried by ``u`` when present.
    """
    g, hs = _jet(u)
    pm = sign.pm
    q = np.sum(g**2, axis=0)
    if sign is GeometrySign.MINKOWSKIAN:
        big = np.sqrt(q) >= 1.0 - guard
        if big.any():
            node = tuple(int(i) for i in np.argwhere(big)[0])
            raise GradientBreachError(f"|grad u| = {math.sqrt(q[node]):.4f} >= 1 - guard at node {node}")
    rad = 1.0 + pm * q
    lap = np.einsum("ii...->...", hs)
    ghg = np.einsum("i...,ij...,j...->...", g, hs, g)
    div_flux = lap / np.sqrt(rad) - pm * ghg / rad**1.5
    return pm * div_flux - 3.0 * H.values


def residual(u: ScalarField, H: ScalarField, sign: GeometrySign, guard: float = 0.05,
             region: np.ndarray | None = None) -> float:
    """Sup of the PDE residual over ``region`` (default: inner half-box)."""
    region = u.spec.inner_mask if region is None else region
    return float(np.abs(residual_field(u, H, sign, guard))[region].max())


def identity_checks(v: VectorField, region: np.ndarray | None = None) -> tuple[float, float]:
    """Normalised sup-norms of ``v . curl v`` and ``grad|v|^2 . curl v``.

    The first is divided by ``|v|^2 |grad v|``, the second by
    ``|v| |grad v|^2`` (sup-norms over ``region``, default inner half-box).
    """
    region = v.spec.inner_mask if region is None else region
    J = jacobian(v)
    c = curl(VectorField(v.spec, v.components, J)).components
    vc = np.einsum("i...,i...->...", v.components, c)
    grad_q = 2.0 * np.einsum("ij...,i...->j...", J, v.components)
    qc = np.einsum("i...,i...->...", grad_q, c)
    nv, nj = sup_norms(VectorField(v.spec, v.components, J), region)
    if nv == 0.0 or nj == 0.0:
        return 0.0, 0.0
    return (float(np.abs(vc)[region].max() / (nv**2 * nj)),
            float(np.abs(qc)[region].max() / (nv * nj**2)))


@dataclass
class OracleResult:
    u: ScalarField
    iterations: int
    theta: float
    trace: list
    residual: float


def fixed_point_oracle(H: ScalarField, sign: GeometrySign, tol: float = 1e-10,
                       max_iter: int = 200, *, theta: float = 0.8, guard: float = 0.05,
                       plan: KernelPlan | None = None, return_info: bool = False):
    """Solve the PDE by damped Picard iteration with an exact linear part.

    Writing the equation as ``-Lap u = -/+ 3H + div((f - 1) grad u)`` with
    ``f = (1 +/- |grad u|^2)^(-1/2)``, each step sets
    ``u <- (1 - theta) u + theta N(rhs(u))``.  The damping is halved whenever
    the update grows; five consecutive growths abort with
    :class:`OracleDivergenceError`.
    """
    plan = plan or get_plan(H.spec)
    spec = H.spec
    pm = sign.pm
    vals = np.zeros(spec.shape)
    grad = np.zeros((3,) + spec.shape)
    hess = np.zeros((3, 3) + spec.shape)
    trace = []
    prev = math.inf
    growth = 0
    for it in range(1, max_iter + 1):
        q = np.sum(grad**2, axis=0)
        if sign is GeometrySign.MINKOWSKIAN and np.sqrt(q).max() >= 1.0 - guard:
            raise OracleDivergenceError("iterate left the region |grad u| < 1 - guard", trace)
        rad = 1.0 + pm * q
        f = rad**-0.5
        lap = np.einsum("ii...->...", hess)
        ghg = np.einsum("i...,ij...,j...->...", grad, hess, grad)
        rhs = -pm * 3.0 * H.values + (f - 1.0) * lap - pm * ghg / rad**1.5
        nu, ng, nh = plan.potential_jet(rhs, 2)
        new_vals = (1.0 - theta) * vals + theta * nu
        diff = float(np.abs(new_vals - vals).max())
        vals = new_vals
        grad = (1.0 - theta) * grad + theta * ng
        hess = (1.0 - theta) * hess + theta * nh
        trace.append({"iteration": it, "update": diff, "theta": theta})
        if diff < tol:
            break
        if diff > prev:
            growth += 1
            theta *= 0.5
            if growth >= 5:
                raise OracleDivergenceError(
                    f"update grew for {growth} consecutive steps (last {diff:.3e})", trace)
        else:
            growth = 0
        prev = diff
    else:
        raise OracleDivergenceError(f"no convergence to {tol:g} in {max_iter} steps", trace)
    u = ScalarField(spec, vals, grad, hess)
    if not return_info:
        return u
    return OracleResult(u, len(trace), theta, trace, residual(u, H, sign, guard))


def farfield_check(u: ScalarField, H0: ScalarField, epsilon: float, sign: GeometrySign,
                   radius_fraction: float = 0.8) -> float | None:
    """Relative error of the shell average of ``u |x|`` against the monopole
    value ``-/+ (3 / 4 pi) eps int H0``.

    Returns ``None`` when ``int H0`` vanishes (no monopole to compare with).
    """
    spec = u.spec
    total = float(H0.values.sum() * spec.cell_volume)
    scale = float(np.abs(H0.values).sum() * spec.cell_volume)
    if scale == 0.0 or abs(total) <= 1e-10 * scale:
        return None
    r = spec.radius
    shell = np.abs(r - radius_fraction * spec.extent) <= spec.h
    avg = float(np.mean(u.values[shell] * r[shell]))
    target = -sign.pm * 3.0 / (4.0 * math.pi) * epsilon * total
    return abs(avg - target) / abs(target)


def _first_term_scale(stack: TermStack, region) -> tuple[float, float]:
    return sup_norms(stack[0], region)


def term_divergence_defects(stack: TermStack, region: np.ndarray | None = None) -> list[float]:
    """``|div v^(2k+1)|`` for ``k >= 1``, in units of ``|v^(1)|^(2k) |grad v^(1)|``.

    The unit is the natural size of an order-(2k+1) term's derivative, so the
    measure stays meaningful when a term itself vanishes.
    """
    region = stack.spec.inner_mask if region is None else region
    nv, nj = _first_term_scale(stack, region)
    out = []
    for k in range(1, len(stack)):
        J = jacobian(stack[k])
        d = float(np.abs(np.einsum("ii...->...", J))[region].max())
        unit = nv ** (2 * k) * nj
        out.append(d / unit if unit > 0 else 0.0)
    return out


def cubic_source_divergence(stack: TermStack, k_max: int | None = None,
                            region: np.ndarray | None = None) -> list[float]:
    """``|div S_k|`` of the cubic sources ``S_k``, ``k = 1..k_max``, in units of
    ``|v^(1)|^(2k-1) |grad v^(1)|^2``.

    Needs a stack carrying second derivatives (the source Jacobian is built
    from them).
    """
    if stack.order < 2:
        raise ValueError("cubic source divergence needs a stack with second derivatives")
    region = stack.spec.inner_mask if region is None else region
    k_max = len(stack) if k_max is None else k_max
    nv, nj = _first_term_scale(stack, region)
    out = []
    for k in range(1, k_max + 1):
        S = build_cubic_rhs(k, stack, order=1)
        d = float(np.abs(divergence(S).values)[region].max())
        unit = nv ** (2 * k - 1) * nj**2
        out.append(d / unit if unit > 0 else 0.0)
    return out


def slope_fit(eps: list[float], values: list[float]) -> float:
    """Least-squares slope of ``log(values)`` against ``log(eps)``."""
    return float(np.polyfit(np.log(eps), np.log(values), 1)[0])


def residual_slopes(core, epsilons=(0.04, 0.02, 0.01), orders=(0, 1, 2),
                    guard: float = 0.05) -> dict:
    """Residual sups and fitted slopes for each truncation order."""
    from .solver import reconstruct_u

    out = {}
    for K in orders:
        res = []
        for e in epsilons:
            u = reconstruct_u(core, e, K)
            res.append(residual(u, core.H0.scaled(e), core.sign, guard))
        out[K] = {"epsilons": list(epsilons), "residuals": res, "slope": slope_fit(list(epsilons), res)}
    return out


@dataclass
class VerificationReport:
    residual_sup: float
    residual_slope_fit: dict
    identity_defects: dict
    divfree_defects: list
    oracle_gap: float | None
    farfield_ratio_error: float | None
    notes: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["residual_slope_fit"] = {str(k): v for k, v in self.residual_slope_fit.items()}
        d["passed"] = self.passed
        return d


DEFAULT_THRESHOLDS = {
    "identity_defect": 1e-5,
    "divfree_defect": 1e-7,
    "oracle_gap": 1e-9,
    "farfield_error": 0.02,
    "slope_tolerance": 0.3,
}


def run_verification(solution, *, thresholds: dict | None = None, oracle: bool = True,
                     oracle_tol: float = 1e-10, oracle_max_iter: int = 200,
                     slopes: bool = True, slope_epsilons=(0.04, 0.02, 0.01),
                     slope_orders=(0, 1, 2)) -> VerificationReport:
    """Run every check on a :class:`~mcgraph.solver.SeriesSolution`."""
    th = dict(DEFAULT_THRESHOLDS)
    th.update(thresholds or {})
    cfg = solution.config
    sign = cfg.sign
    H = solution.H
    notes = list(solution.warnings)
    checks = {}
    res = residual(solution.u, H, sign, cfg.guard)
    slope_data = {}
    if slopes and solution.core is not None:
        orders = [K for K in slope_orders if K <= solution.core.K]
        slope_data = residual_slopes(solution.core, slope_epsilons, orders, cfg.guard)
        for K, d in slope_data.items():
            ok = abs(d["slope"] - (2 * K + 3)) <= th["slope_tolerance"]
            checks[f"residual_slope_K{K}"] = {"value": d["slope"], "target": 2 * K + 3,
                                              "passed": bool(ok)}
    d1, d2 = identity_checks(solution.v)
    checks["identity_triple_product"] = {"value": d1, "threshold": th["identity_defect"],
                                         "passed": d1 <= th["identity_defect"]}
    checks["identity_gradient_curl"] = {"value": d2, "threshold": th["identity_defect"],
                                        "passed": d2 <= th["identity_defect"]}
    div_defects = term_divergence_defects(solution.terms)
    for k, dd in enumerate(div_defects, start=1):
        checks[f"term_divergence_k{k}"] = {"value": dd, "threshold": th["divfree_defect"],
                                           "passed": dd <= th["divfree_defect"]}
    gap = None
    if oracle:
        try:
            info = fixed_point_oracle(H, sign, oracle_tol, oracle_max_iter, guard=cfg.guard,
                                      return_info=True)
            region = cfg.grid.inner_mask
            gap = float(np.abs(info.u.values - solution.u.values)[region].max())
            checks["oracle_gap"] = {"value": gap, "threshold": th["oracle_gap"],
                                    "iterations": info.iterations,
                                    "passed": gap <= th["oracle_gap"]}
        except OracleDivergenceError as exc:
            notes.append(f"oracle: {exc}")
            checks["oracle_gap"] = {"value": None, "passed": False, "error": str(exc)}
    ff = farfield_check(solution.u, solution.H0, cfg.epsilon, sign)
    if ff is None:
        notes.append("far-field check not applicable: total curvature vanishes")
    else:
        checks["farfield"] = {"value": ff, "threshold": th["farfield_error"],
                              "passed": ff <= th["farfield_error"]}
    if not solution.certificate.inside:
        notes.append("convergence certificate: outside the certified radius (advisory)")
    return VerificationReport(res, slope_data, {"triple_product": d1, "gradient_curl": d2},
                              div_defects, gap, ff, notes, checks)
