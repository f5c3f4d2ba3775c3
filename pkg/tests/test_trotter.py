import math
from fractions import Fraction

import numpy as np
import pytest

from schwinger.errors import DomainError
from schwinger.model import ModelParams, split_interaction
from schwinger.oracle import exact_evolution, spectral_norm, unitarity_residual
from schwinger.trotter import (
    commutator_bound_rho,
    measured_trotter_error,
    pf2_operator,
    pf2_step,
    trotter_bound,
    trotter_steps,
    trotter_steps_from_rho,
)

from oracles import rho_exact

# rho(N=8, x=0.1, mu=1, Lambda=2), evaluated once with exact rationals
RHO_GOLDEN = Fraction(9523, 3000)


def test_rho_golden_matches_rational_oracle():
    assert rho_exact(8, Fraction(1, 10), 1, 2) == RHO_GOLDEN
    p = ModelParams(x=0.1, mu=1.0, n_sites=8, lambda_cutoff=2)
    assert commutator_bound_rho(p) == pytest.approx(float(RHO_GOLDEN), rel=1e-14)


def test_rho_single_site_and_zero_coupling():
    p = ModelParams(x=0.3, mu=0.7, n_sites=1, lambda_cutoff=3)
    expected = (8 * 0.3 * 0.49 + 2 * 0.3 * 35) / 12 + (2 * 0.3 * 0.7 * 5 + 32 * 0.09 * 0.7 + 16 * 0.09 * 7) / 24
    assert commutator_bound_rho(p) == pytest.approx(expected, rel=1e-14)
    assert commutator_bound_rho(p.replace(x=0.0)) == 0.0


class TestSteps:
    def test_one_step_when_loose(self):
        assert trotter_steps_from_rho(0.5, 1.0, 1.0).steps == 1

    def test_square_root(self):
        plan = trotter_steps_from_rho(4.0, 1.0, 1.0)
        assert plan.steps == 2 and plan.tau == 0.5

    def test_golden_chain(self):
        p = ModelParams(x=0.1, mu=1.0, n_sites=8, lambda_cutoff=2)
        plan = trotter_steps(p, 5.0, 0.01)
        assert plan.steps == math.isqrt(math.floor(RHO_GOLDEN * 125 * 100)) + 1 == 200

    def test_domain(self):
        with pytest.raises(DomainError):
            trotter_steps_from_rho(1.0, 0.0, 0.1)


P22 = ModelParams(x=0.1, mu=1.0, n_sites=2, lambda_cutoff=2)


class TestOperator:
    def test_zero_time_identity(self):
        terms = split_interaction(P22)
        assert np.abs(pf2_operator(terms, 0.0, 3) - np.eye(16)).max() <= 1e-14

    def test_free_evolution_exact(self):
        p = P22.replace(x=0.0, n_sites=3)
        terms = split_interaction(p)
        exact = exact_evolution(terms.full(), 1.3)
        assert np.abs(pf2_operator(terms, 1.3, 4) - exact).max() <= 1e-13

    def test_merge_equals_unmerged(self):
        terms = split_interaction(P22.replace(x=0.8, n_sites=3))
        a = pf2_operator(terms, 1.0, 5, merge=True)
        b = pf2_operator(terms, 1.0, 5, merge=False)
        assert np.abs(a - b).max() <= 1e-12

    def test_power_of_single_step(self):
        terms = split_interaction(P22.replace(x=1.0))
        one = pf2_operator(terms, 0.25, 1)
        assert np.abs(pf2_operator(terms, 1.0, 4) - np.linalg.matrix_power(one, 4)).max() <= 1e-12

    def test_unitary(self):
        terms = split_interaction(P22.replace(x=1.0, n_sites=3))
        assert unitarity_residual(pf2_operator(terms, 2.0, 3)) <= 1e-10

    def test_symmetric_step_reverses(self):
        # a symmetric second-order step satisfies S(tau) S(-tau) = 1
        terms = split_interaction(P22.replace(x=0.7))
        assert np.abs(pf2_step(terms, 0.3) @ pf2_step(terms, -0.3) - np.eye(16)).max() <= 1e-13

    def test_rejects_bad_r(self):
        with pytest.raises(DomainError):
            pf2_operator(split_interaction(P22), 1.0, 0)


class TestError:
    def test_second_order_ratio(self):
        p = P22.replace(x=1.0)
        e = [measured_trotter_error(p, 0.5, r) for r in (8, 16, 32)]
        assert e[0] / e[1] == pytest.approx(4.0, rel=0.05)
        assert e[1] / e[2] == pytest.approx(4.0, rel=0.02)

    def test_converges(self):
        assert measured_trotter_error(P22.replace(x=1.0), 0.05, 2**10) < 1e-8

    @pytest.mark.parametrize("x", [0.1, 1.0])
    @pytest.mark.parametrize("t", [0.5, 1.0])
    def test_below_bound(self, x, t):
        p = P22.replace(x=x)
        for r in (1, 3, 7):
            assert measured_trotter_error(p, t, r) <= trotter_bound(p, t, r)

    @pytest.mark.parametrize("x", [0.1, 1.0])
    def test_slope_per_series(self, x):
        rs = np.array([1, 2, 4, 8, 16])
        errs = [measured_trotter_error(P22.replace(x=x), 0.5, int(r)) for r in rs]
        slope = np.polyfit(np.log(rs), np.log(errs), 1)[0]
        assert -2.2 <= slope <= -1.8

    def test_zero_coupling_exact(self):
        assert measured_trotter_error(P22.replace(x=0.0), 1.0, 2) <= 1e-13

    def test_matches_direct_spectral_norm(self):
        p = P22.replace(x=0.4)
        terms = split_interaction(p)
        diff = exact_evolution(terms.full(), 0.8) - pf2_operator(terms, 0.8, 2, merge=False)
        assert measured_trotter_error(p, 0.8, 2) == pytest.approx(np.linalg.norm(diff, 2), rel=1e-10)
        assert spectral_norm(diff) > 0
