import math

import numpy as np
import pytest

from schwinger import _kernels
from schwinger.dyson import (
    LN2,
    DysonConfig,
    certify_segment,
    discretization_count,
    dyson_orders,
    dyson_series_matrix,
    lambert_w0,
    measured_dyson_error,
    next_pow2,
    segment_count,
    segment_schedule,
    segmented_evolution,
    t0_for_beta,
    truncation_order,
    truncation_tail_bound,
)
from schwinger.errors import CapacityError, DomainError
from schwinger.model import ModelParams, build_electric_term, build_hamiltonian, build_interaction_term, build_mass_term
from schwinger.oracle import exact_evolution, interaction_picture_unitary, spectral_norm

from oracles import brute_force_dyson, fixed_point_omega

P22 = ModelParams(x=0.1, mu=1.0, n_sites=2, lambda_cutoff=2)
MODES = {"strict": (False, "factorial"), "weighted": (True, "factorial"), "unweighted": (True, "none")}


class TestLambert:
    def test_fixed_points(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-15)
        assert lambert_w0(1.0) == pytest.approx(fixed_point_omega(), abs=1e-15)

    @pytest.mark.parametrize("z", [-1 / math.e + 1e-12, -0.2, 1e-9, 3.0, 1e3, 1e30])
    def test_inverse(self, z):
        w = lambert_w0(z)
        assert w * math.exp(w) == pytest.approx(z, rel=1e-9, abs=1e-15)

    def test_domain(self):
        with pytest.raises(DomainError):
            lambert_w0(-1.0)


class TestTruncation:
    def test_ln2_golden(self):
        order = truncation_order(1.0, LN2, 1e-6)
        # frozen from an independent mpmath evaluation: Lambert form gives 8, explicit 16
        assert (order.K, order.lambert_K, order.explicit_K, order.branch) == (8, 8, 16, "lambert")
        tail = 2 * math.fsum(LN2**k / math.factorial(k) for k in range(9, 9 + 1))
        assert truncation_tail_bound(1.0, LN2, 8) == pytest.approx(tail, rel=1e-12)
        assert truncation_tail_bound(1.0, LN2, 7) > 1e-6

    def test_certified(self):
        for vt in (0.01, 0.3, 1.0, 5.0):
            for eps in (0.5, 1e-3, 1e-9):
                order = truncation_order(vt, 1.0, eps)
                assert truncation_tail_bound(vt, 1.0, order.K) <= eps
                assert order.K >= 2 * vt

    def test_loose_tolerance(self):
        assert truncation_order(1.0, 1e-3, 0.99).K <= 2

    def test_trivial(self):
        assert truncation_order(0.0, 1.0, 0.1).K == 0


class TestDiscretization:
    V, H0, T = 0.2, 5.0, LN2 / 0.4

    def test_golden_both_variants(self):
        # frozen from an independent mpmath evaluation of the three lower bounds
        K = truncation_order(self.V, self.T, 1e-3).K
        assert K == 4
        free = discretization_count(self.V, self.H0, self.T, 1e-3, K, collisions=False)
        coll = discretization_count(self.V, self.H0, self.T, 1e-3, K, collisions=True)
        assert (free.M, free.branch) == (16384, "error")
        assert (coll.M, coll.branch) == (32768, "error")
        assert free.candidates["error"] == pytest.approx(9172.752772943023, rel=1e-12)
        assert coll.candidates["error"] == pytest.approx(25479.86881373062, rel=1e-12)
        assert free.candidates["order"] == pytest.approx(9 / math.log(2), rel=1e-15)

    def test_no_h0(self):
        d = discretization_count(1.0, 0.0, 1.0, 1e-2, 6, collisions=False)
        assert d.M == next_pow2(max(25 / math.log(2), 4 * math.e / 1e-2))
        assert d.candidates["h0"] == 0.0

    def test_next_pow2(self):
        assert [next_pow2(v) for v in (0.2, 1, 2, 3, 1024, 1025)] == [1, 1, 2, 4, 1024, 2048]

    def test_domain(self):
        with pytest.raises(DomainError):
            discretization_count(1, 1, 1, 0.0, 2, True)


class TestOrders:
    @pytest.mark.parametrize("mode", sorted(MODES))
    @pytest.mark.parametrize("K,M", [(1, 5), (2, 4), (3, 8)])
    def test_brute_force(self, mode, K, M):
        p = P22.replace(x=0.9)
        v = build_interaction_term(p).to_dense()
        d = (build_electric_term(p) + build_mass_term(p)).values
        collisions, weighting = MODES[mode]
        ours = dyson_orders(p, 1.3, K, M, collisions, weighting=weighting).sum(axis=0)
        assert np.abs(ours - brute_force_dyson(v, d, 1.3, K, M, mode)).max() <= 1e-13

    @pytest.mark.parametrize("backend", _kernels.available_backends())
    def test_backends_agree(self, backend):
        p = P22.replace(x=0.5, n_sites=3)
        ref = dyson_orders(p, 0.7, 4, 32, True, backend="python")
        assert np.abs(dyson_orders(p, 0.7, 4, 32, True, backend=backend) - ref).max() <= 1e-14

    def test_first_orders_shared(self):
        p = P22.replace(x=0.9)
        a = dyson_orders(p, 1.0, 3, 16, collisions=False)
        b = dyson_orders(p, 1.0, 3, 16, collisions=True)
        assert np.array_equal(a[:2], b[:2])

    def test_k_zero_and_one(self):
        p = P22.replace(x=0.9)
        assert np.array_equal(dyson_series_matrix(p, DysonConfig(0, 4, True, 1.0)), np.eye(16))
        v = build_interaction_term(p).to_dense()
        d = (build_electric_term(p) + build_mass_term(p)).values
        delta = 1.0 / 8
        s = sum(np.exp(1j * m * delta * d)[:, None] * v * np.exp(-1j * m * delta * d)[None, :] for m in range(8))
        assert np.abs(dyson_series_matrix(p, DysonConfig(1, 8, False, 1.0)) - (np.eye(16) - 1j * delta * s)).max() \
            <= 1e-15

    def test_product_cap(self):
        with pytest.raises(CapacityError):
            dyson_orders(P22, 1.0, 4, 2**20, True)


class TestMeasuredError:
    def test_zero_coupling(self):
        rep = measured_dyson_error(P22.replace(x=0.0), DysonConfig(2, 8, True, 1.0, eps1=0.1, eps2=0.1))
        assert rep.trunc_plus_disc <= 1e-14 and rep.against_bound

    def test_monotone_in_k(self):
        p = P22.replace(x=0.5)
        u = interaction_picture_unitary(p, 0.5)
        orders = dyson_orders(p, 0.5, 4, 4096, True)
        errs = [spectral_norm(u - orders[: k + 1].sum(axis=0)) for k in range(1, 5)]
        assert all(a >= b for a, b in zip(errs, errs[1:]))

    @pytest.mark.parametrize("collisions", [False, True])
    def test_certified_config(self, collisions):
        nb_v, h0 = 0.2, 5.0
        cfg = certify_segment(nb_v, h0, LN2 / 0.4, 5e-3, 5e-3, collisions)
        rep = measured_dyson_error(P22, cfg)
        assert rep.against_bound and rep.trunc_plus_disc <= 1e-2

    def test_near_unitary(self):
        cfg = certify_segment(0.2, 5.0, LN2 / 0.4, 5e-3, 5e-3, True)
        dm = dyson_series_matrix(P22, cfg)
        eps = cfg.eps1 + cfg.eps2
        assert np.linalg.norm(dm.conj().T @ dm - np.eye(16), 2) <= 2 * eps + eps**2


class TestSegments:
    def test_t0(self):
        assert t0_for_beta(1) == pytest.approx(1.0, abs=1e-12)
        assert t0_for_beta(2) == pytest.approx(math.sqrt(3) - 1, abs=1e-12)
        assert t0_for_beta(30) == pytest.approx(LN2, abs=1e-9)
        vals = [t0_for_beta(k) for k in range(1, 12)]
        assert all(a > b > LN2 for a, b in zip(vals, vals[1:]))

    def test_segment_count(self):
        assert segment_count(1.6, 5.0, LN2) == 12
        assert segment_count(2.0, LN2 / 2, LN2) == 1
        assert segment_count(1.0, 1e-9, LN2) == 1
        with pytest.raises(DomainError):
            segment_count(0.0, 1.0, LN2)

    def test_schedule(self):
        s = segment_schedule(P22, 8.0, 1e-2)
        assert s.r == math.ceil(0.2 * 8 / LN2)
        assert s.t_full * (s.r - 1) + s.t_last == pytest.approx(8.0)
        assert 0 < s.t_last <= s.t_full

    def test_single_segment_reduces(self):
        p = P22
        w, sched = segmented_evolution(p, 1.0, 1e-2, return_schedule=True)
        assert sched.r == 1
        d = (build_electric_term(p) + build_mass_term(p)).values
        cfg = sched.config
        dm = dyson_series_matrix(p, DysonConfig(cfg.K, cfg.M, True, 1.0))
        assert np.abs(w - np.exp(-1j * d)[:, None] * dm).max() <= 1e-14

    def test_free(self):
        p = P22.replace(x=1e-300)
        d = (build_electric_term(p) + build_mass_term(p)).values
        assert np.abs(segmented_evolution(p, 1.0, 0.1) - np.diag(np.exp(-1j * d))).max() <= 1e-14

    def test_long_time_error(self):
        exact = exact_evolution(build_hamiltonian(P22), 2.0)
        assert spectral_norm(exact - segmented_evolution(P22, 2.0, 1e-2)) <= 1e-2

    def test_zero_coupling_rejected(self):
        with pytest.raises(DomainError):
            segment_schedule(P22.replace(x=0.0), 1.0, 0.1)
