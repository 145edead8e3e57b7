import json
import math

import numpy as np
import pytest

from mcgraph.grid_fields import GeometrySign, GridSpec, ScalarField, VectorField, gradient, laplacian
from mcgraph.solver import CurvatureSpec, SolverConfig, solve_series
from mcgraph.verify import (
    GradientBreachError,
    OracleDivergenceError,
    cubic_source_divergence,
    farfield_check,
    fixed_point_oracle,
    identity_checks,
    residual,
    residual_field,
    run_verification,
    slope_fit,
    term_divergence_defects,
)

from helpers import helical_field

E, M = GeometrySign.EUCLIDEAN, GeometrySign.MINKOWSKIAN


class TestResidual:
    @pytest.mark.parametrize("sign", [E, M])
    def test_zero(self, grid32, sign):
        z = ScalarField.zeros(grid32)
        assert residual(z, z, sign) == 0.0

    def test_linear_limit(self, grid32):
        # with a tiny gradient the operator is the Laplacian
        f = CurvatureSpec.gaussian().sample(grid32)
        u = ScalarField(grid32, 1e-8 * f.values)
        lap = residual_field(u, ScalarField.zeros(grid32), E)
        np.testing.assert_allclose(lap, laplacian(u).values, atol=1e-20, rtol=1e-6)

    def test_minkowskian_breach(self, grid32):
        x = grid32.coords[0]
        u = ScalarField(grid32, 0.98 * x, np.array([0.98 + 0 * x, 0 * x, 0 * x]),
                        np.zeros((3, 3) + grid32.shape))
        with pytest.raises(GradientBreachError, match="node"):
            residual(u, ScalarField.zeros(grid32), M)
        # the Euclidean operator is regular for any gradient
        assert residual(u, ScalarField.zeros(grid32), E) == 0.0


class TestIdentityChecks:
    def test_gradient_field(self, grid64):
        f = CurvatureSpec.dipole().sample(grid64)
        d1, d2 = identity_checks(gradient(f))
        assert d1 < 1e-12 and d2 < 1e-12

    @pytest.mark.parametrize("seed", range(4))
    def test_random_helical_fields_violate(self, grid64, seed):
        d1, d2 = identity_checks(helical_field(grid64, seed))
        assert d1 >= 0.1 and d2 >= 0.1

    def test_zero(self, grid32):
        assert identity_checks(VectorField.zeros(grid32)) == (0.0, 0.0)


class TestOracle:
    def test_zero_curvature_one_step(self, grid32):
        res = fixed_point_oracle(ScalarField.zeros(grid32), E, return_info=True)
        assert res.iterations == 1
        assert res.u.sup() == 0.0

    @pytest.mark.parametrize("sign", [E, M])
    def test_residual_within_tolerance(self, grid32, sign):
        H = CurvatureSpec.gaussian().sample(grid32).scaled(0.02)
        tol = 1e-10
        res = fixed_point_oracle(H, sign, tol, return_info=True)
        assert res.residual <= 10 * tol
        assert all(t["update"] >= 0 for t in res.trace)

    def test_signs_differ_at_third_order(self, grid32):
        H0 = CurvatureSpec.gaussian().sample(grid32)
        sums = []
        for eps in (0.02, 0.01):
            H = H0.scaled(eps)
            uE = fixed_point_oracle(H, E, 1e-13)
            uM = fixed_point_oracle(H, M, 1e-13)
            # the first-order parts are opposite, so the sum starts at eps^3
            sums.append(np.abs(uE.values + uM.values).max())
        assert math.log2(sums[0] / sums[1]) == pytest.approx(3.0, abs=0.1)

    def test_divergence_detected(self, grid32):
        H = CurvatureSpec.gaussian().sample(grid32).scaled(0.5)
        with pytest.raises(OracleDivergenceError) as info:
            fixed_point_oracle(H, M, 1e-10, max_iter=50)
        assert isinstance(info.value.trace, list)


class TestFarfield:
    def test_dipole_not_applicable(self, grid32):
        H0 = CurvatureSpec.dipole().sample(grid32)
        assert farfield_check(ScalarField.zeros(grid32), H0, 0.02, E) is None

    def test_exact_monopole(self):
        g = GridSpec(8.0, 64)
        H0 = CurvatureSpec.gaussian().sample(g)
        total = H0.values.sum() * g.cell_volume
        u = ScalarField(g, -3 * 0.02 * total / (4 * math.pi * g.radius))
        assert farfield_check(u, H0, 0.02, E) < 1e-12


class TestDivergenceDefects:
    def test_sqrt_terms(self, multi_bump_cores):
        for core in multi_bump_cores.values():
            assert max(term_divergence_defects(core.stack)) < 1e-12

    def test_cubic_needs_second_derivatives(self, multi_bump_cores):
        with pytest.raises(ValueError, match="second derivatives"):
            cubic_source_divergence(multi_bump_cores[E].stack)


class TestSlopeFit:
    @pytest.mark.parametrize("p", [3, 5, 7])
    def test_power_law(self, p):
        eps = [0.04, 0.02, 0.01]
        assert slope_fit(eps, [2.5 * e**p for e in eps]) == pytest.approx(p, abs=1e-12)


class TestRunVerification:
    def test_report(self, gaussian_cores):
        sol = solve_series(SolverConfig(epsilon=0.04), gaussian_cores[E])
        rep = run_verification(sol, oracle=False)
        assert rep.passed, rep.checks
        assert rep.oracle_gap is None
        for K in (0, 1, 2):
            assert rep.checks[f"residual_slope_K{K}"]["target"] == 2 * K + 3
        json.dumps(rep.to_dict())

    def test_dipole_notes_farfield(self, grid32):
        sol = solve_series(SolverConfig(grid=grid32, order_K=1, source=CurvatureSpec.dipole()))
        rep = run_verification(sol, oracle=False, slopes=False)
        assert "farfield" not in rep.checks
        assert any("far-field" in n for n in rep.notes)

    def test_failing_threshold_is_reported(self, gaussian_cores):
        sol = solve_series(SolverConfig(epsilon=0.04), gaussian_cores[E])
        rep = run_verification(sol, oracle=False, slopes=False, thresholds={"farfield_error": 1e-12})
        assert not rep.passed
        assert rep.checks["farfield"]["passed"] is False
