import math

import numpy as np
import pytest

from icl_lab.errors import DomainError, PoleError
from icl_lab.numerics import pinv
from icl_lab.theory import (TheoryInputs, solve_q, theory_components,
                            theory_constants, theory_endpoints)

BASE = dict(rho=0.1, r=0.1, eta=0.2, gamma=1.0, mu1=0.5)


def inp(beta, **over):
    kw = dict(BASE)
    kw.update(over)
    return TheoryInputs(beta=beta, **kw)


class TestSolveQ:
    def test_fixed_point_identity(self):
        c = theory_constants(inp(0.0))
        for beta in (0.1, 0.3, 0.5, 0.7, 0.9, 0.999):
            q = solve_q(beta, (0.5, 0.5), (c.a1**2, c.a2**2))
            total = sum(0.5 * a * q / (1 + a * q)
                        for a in (c.a1**2, c.a2**2))
            assert total == pytest.approx(beta, abs=1e-10)

    def test_beta_zero(self):
        assert solve_q(0.0, (0.5, 0.5), (1.0, 1.0)) == 0.0

    def test_saturation(self):
        assert solve_q(1.0, (0.5, 0.5), (1.0, 1.0)) == math.inf
        assert solve_q(1.7, (0.5, 0.5), (1.0, 1.0)) == math.inf

    def test_unreachable_beta_with_singular_block(self):
        # a_2 = 0 caps the projected fraction at mu_1
        with pytest.raises(DomainError):
            solve_q(0.6, (0.5, 0.5), (1.0, 0.0))

    def test_monotone_in_beta(self):
        qs = [solve_q(b, (0.5, 0.5), (0.4, 0.01))
              for b in (0.1, 0.3, 0.5, 0.7, 0.9)]
        assert all(b > a for a, b in zip(qs, qs[1:]))


class TestConstants:
    def test_stated_values_at_reference_point(self):
        c = theory_constants(inp(0.5))
        assert c.kappa == pytest.approx(0.55)
        assert c.a1 == pytest.approx(0.2 * 1.1)
        assert c.a2 == pytest.approx(0.1)
        assert c.Sigma_bar == pytest.approx(0.5 * 1.1 + 0.5 * 1.0)
        assert c.g1 == pytest.approx(-1.0 / (0.1 + 0.55))
        assert c.g2 == pytest.approx(-1.0 / 1.55)
        assert c.alpha1 == pytest.approx((0.55 - 1.0) / (0.1 + 0.55))
        assert c.delta2 == pytest.approx(1.0 / 1.55 - 2.0)

    def test_r_zero_pole(self):
        with pytest.raises(PoleError):
            theory_constants(inp(0.5, r=0.0))

    def test_constants_match_finite_d_operators(self):
        """Oracle: build the d x d block operators and read off scalars."""
        d, m, n = 400, 200, 400
        rho, r, eta = 0.1, 0.1, 0.2
        sigma0 = np.diag([rho] * m + [1.0] * (d - m))
        sigma = np.diag([rho + 1.0] * m + [1.0] * (d - m))
        A = np.diag([eta * (rho + 1.0)] * m + [r] * (d - m))
        g0 = (1 + 1 / n) * sigma0 + (np.trace(sigma0) / n) * np.eye(d)
        g0inv = np.linalg.inv(g0)
        D1 = np.eye(d) - g0inv @ sigma
        Dpre = g0inv - eta * np.linalg.inv(A)
        c = theory_constants(inp(0.5))
        # finite-d corrections are O(1/d); compare loosely
        assert D1[0, 0] == pytest.approx(c.alpha1, abs=0.01)
        assert D1[-1, -1] == pytest.approx(c.alpha2, abs=0.01)
        assert Dpre[0, 0] * sigma[0, 0] == pytest.approx(c.delta1, abs=0.02)
        assert Dpre[-1, -1] == pytest.approx(c.delta2, abs=0.02)
        assert -g0inv[0, 0] == pytest.approx(c.g1, abs=0.02)
        sa = (np.trace(A) * A + A @ A) / d
        assert sa[0, 0] == pytest.approx(c.s1, abs=0.01)
        assert sa[-1, -1] == pytest.approx(c.s2, abs=0.01)


class TestComponents:
    def test_projected_mass_identity(self):
        for beta in (0.2, 0.5, 0.9, 1.3, 2.0):
            comp = theory_components(inp(beta))
            mass = 0.5 * comp.w1 + 0.5 * comp.w2
            assert mass == pytest.approx(min(beta, 1.0), abs=1e-10)

    def test_pole_guard(self):
        with pytest.raises(PoleError):
            theory_components(inp(1.0))
        with pytest.raises(PoleError):
            theory_components(inp(1.0000001))

    def test_saturated_branch_has_no_leakage(self):
        comp = theory_components(inp(1.5))
        assert comp.T12 == 0.0 and comp.v1 == 0.0 and comp.v2 == 0.0
        assert comp.w1 == 1.0 and comp.w2 == 1.0

    def test_zero_beta_reduces_to_endpoint(self):
        comp = theory_components(inp(0.0))
        F0, _, _ = theory_endpoints(inp(0.0))
        assert comp.F == pytest.approx(F0, rel=1e-12)
        assert comp.T_inv == 0.0 and comp.T_inv_Sigma == 0.0

    def test_blowup_near_one(self):
        far = theory_components(inp(0.5)).F
        near = theory_components(inp(0.995)).F
        assert near > 10 * far

    def test_variance_functionals_match_random_projection(self):
        """Oracle: realized Pi_M at d = 800 reproduces T_var and T_var_Sigma."""
        d, m = 800, 400
        rho, r, eta = 0.1, 0.1, 0.2
        n = 800
        beta = 0.4
        A = np.diag([eta * (rho + 1.0)] * m + [r] * (d - m))
        sigma0 = np.diag([rho] * m + [1.0] * (d - m))
        sigma = np.diag([rho + 1.0] * m + [1.0] * (d - m))
        g0inv = np.linalg.inv((1 + 1 / n) * sigma0
                              + (np.trace(sigma0) / n) * np.eye(d))
        Dpre = g0inv - eta * np.linalg.inv(A)
        rng = np.random.default_rng(0)
        tvars, tvarsigs = [], []
        for _ in range(3):
            M = A @ rng.standard_normal((d, int(beta * d)))
            Pi = M @ pinv(M)
            V_S = -g0inv + Dpre @ Pi
            sa = (np.trace(A) * A + A @ A) / d
            tvars.append(np.trace(V_S @ sa @ V_S.T) / d)
            tvarsigs.append(np.trace(V_S @ sigma @ V_S.T) / d)
        comp = theory_components(inp(beta))
        assert np.mean(tvars) == pytest.approx(comp.T_var, rel=0.02)
        assert np.mean(tvarsigs) == pytest.approx(comp.T_var_Sigma, rel=0.02)


class TestEndpoints:
    def test_f0_reference_value(self):
        F0, _, _ = theory_endpoints(inp(0.0))
        assert F0 == pytest.approx(1.888, abs=0.002)

    def test_finf_is_large_beta_limit(self):
        _, Finf, _ = theory_endpoints(inp(0.0))
        far = theory_components(inp(2000.0)).F
        assert far == pytest.approx(Finf, rel=1e-3)

    def test_fprime0_matches_numerical_derivative(self):
        _, _, fp0 = theory_endpoints(inp(0.0))
        h = 1e-6
        num = (theory_components(inp(h)).F
               - theory_components(inp(0.0)).F) / h
        assert fp0 == pytest.approx(num, rel=1e-3)

    def test_strictly_decreasing_above_one(self):
        vals = [theory_components(inp(b)).F
                for b in (1.1, 1.3, 1.6, 2.0, 3.0, 10.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_small_r_gap_scaling(self):
        # r^2 (F(inf) - F(0)) -> mu2 (1 + gamma Sigma_bar) eta^2
        r = 1e-4
        F0, Finf, _ = theory_endpoints(inp(0.0, r=r))
        c = theory_constants(inp(0.0, r=r))
        target = 0.5 * (1 + 1.0 * c.Sigma_bar) * 0.2**2
        assert r**2 * (Finf - F0) == pytest.approx(target, rel=0.01)

    def test_interference_minimum_below_one(self):
        # with small r the global minimum of F lies in [0, 1): the whole
        # beta > 1 branch sits above everything the left branch offers
        left = [theory_components(inp(0.05 * i, r=0.01)).F
                for i in range(20)]
        right = [theory_components(inp(b, r=0.01)).F
                 for b in (1.1, 1.5, 2.0, 5.0)]
        _, Finf, _ = theory_endpoints(inp(0.0, r=0.01))
        assert min(left) < min(min(right), Finf)

    def test_initial_slope_negative_for_small_r_and_gamma(self):
        # mu1 >= rho^2 / (1 + rho^2) holds at mu1 = 0.5, rho = 0.1
        _, _, fp0 = theory_endpoints(inp(0.0, r=1e-3, gamma=0.05))
        assert fp0 < 0.0


class TestInputValidation:
    @pytest.mark.parametrize("bad", [
        dict(rho=-0.1), dict(eta=0.0), dict(eta=1.0), dict(gamma=0.0),
        dict(mu1=0.0), dict(mu1=1.0), dict(beta=-0.5),
    ])
    def test_rejects(self, bad):
        with pytest.raises(DomainError):
            inp(bad.pop("beta", 0.5), **bad)
