"""End-to-end acceptance checks, one test per criterion.

Tolerances and grids are pinned here; each test also enforces its runtime
budget so a slow regression fails instead of silently passing.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from schwinger.costs import compare, ip_subroutine_costs, ip_total, trotter_subroutine_costs
from schwinger.dyson import (
    LN2,
    certify_segment,
    discretization_count,
    dyson_orders,
    dyson_series_matrix,
    measured_dyson_error,
    truncation_tail_bound,
)
from schwinger.model import (
    ModelParams,
    build_electric_term,
    build_gauss_operator,
    build_hamiltonian,
    build_interaction_term,
    build_mass_term,
    build_quench_state,
    norm_bounds,
    site_lcu_one_norm,
)
from schwinger.oracle import (
    exact_evolution,
    expectation_trajectory,
    interaction_frame,
    interaction_picture_unitary,
    leakage_norm,
    spectral_norm,
)
from schwinger.planner import leakage_bound, make_plan
from schwinger.trotter import measured_trotter_error, trotter_bound

from oracles import brute_force_dyson, table2, table3

BASE = ModelParams(x=0.1, mu=1.0, n_sites=2, lambda_cutoff=2)


def _h0(p):
    return (build_electric_term(p) + build_mass_term(p)).values


def test_ac1_interaction_picture_identity():
    h = build_hamiltonian(BASE)
    v = build_interaction_term(BASE)
    h0 = build_electric_term(BASE) + build_mass_term(BASE)
    for t in (0.3, 0.7, 1.5):
        start = time.perf_counter()
        u_i = interaction_picture_unitary(BASE, t)
        lhs = exact_evolution(h, t)
        rhs = np.exp(-1j * t * h0.values)[:, None] * u_i
        assert spectral_norm(lhs - rhs) <= 1e-12
        # U_I also solves i dU/dt = V(t) U (central difference, O(h^2) accurate)
        step = 1e-5
        deriv = (interaction_picture_unitary(BASE, t + step) - interaction_picture_unitary(BASE, t - step)) / (2 * step)
        vt = interaction_frame(v, h0, t)
        vt = vt.to_dense() if hasattr(vt, "to_dense") else np.asarray(vt)
        assert np.abs(1j * deriv - vt @ u_i).max() <= 1e-8
        assert time.perf_counter() - start < 1.0


def _pooled_slope(series):
    """Common least-squares slope of log(err) against log(r) with one intercept per series."""
    num = den = 0.0
    for rs, errs in series:
        lx, ly = np.log(rs), np.log(errs)
        num += np.sum((lx - lx.mean()) * (ly - ly.mean()))
        den += np.sum((lx - lx.mean()) ** 2)
    return num / den


def test_ac2_trotter_bound_and_order():
    start = time.perf_counter()
    rs = np.array([1, 2, 4, 8, 16])
    series = []
    for n, x, t in itertools.product((2, 3), (0.1, 1.0), (0.5, 1.0)):
        p = BASE.replace(n_sites=n, x=x)
        errs = np.array([measured_trotter_error(p, t, int(r)) for r in rs])
        bounds = np.array([trotter_bound(p, t, int(r)) for r in rs])
        assert np.all(errs <= bounds), (n, x, t, errs, bounds)
        series.append((rs, errs))
    slope = _pooled_slope(series)
    assert -2.2 <= slope <= -1.8, slope
    assert time.perf_counter() - start < 120


def test_ac3_dyson_truncation_bound():
    """Orders K=1..4 against 2(t||V||)^(K+1)/(K+1)! with M at 64 times the discretization bound.

    The discretization bound is taken at eps2 = 1e-3; with M = 64 * M_bound its
    error term C/M (at most eps2/64) is the allowed slack.
    """
    start = time.perf_counter()
    nb = norm_bounds(BASE)
    v, h0, eps2 = nb.v_norm, nb.h0_norm, 1e-3
    for collisions in (False, True):
        for scaled in (0.05, 0.1, 0.2):
            t = scaled / v
            u_i = interaction_picture_unitary(BASE, t)
            disc = {K: discretization_count(v, h0, t, eps2, K, collisions) for K in range(1, 5)}
            grids = {K: 64 * d.M for K, d in disc.items()}
            for M in sorted(set(grids.values())):
                orders = dyson_orders(BASE, t, 4, M, collisions, max_products=10**7)
                for K in (k for k in grids if grids[k] == M):
                    slack = disc[K].candidates["error"] * eps2 / M
                    err = spectral_norm(u_i - orders[: K + 1].sum(axis=0))
                    assert err <= truncation_tail_bound(v, t, K) + slack, (collisions, scaled, K, err)
    assert time.perf_counter() - start < 180


@pytest.mark.parametrize("collisions", [False, True])
@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_ac4_discretization_bounds(eps, collisions):
    alpha_v = site_lcu_one_norm(BASE)
    h0 = norm_bounds(BASE).h0_norm
    cfg = certify_segment(alpha_v, h0, LN2 / alpha_v, eps, eps, collisions, alpha_v=alpha_v)
    rep = measured_dyson_error(BASE, cfg, max_products=10**7)
    assert rep.against_bound and rep.trunc_plus_disc <= 2 * eps


def test_ac4_enumeration_equals_recurrence():
    p = BASE.replace(x=0.7)
    v = build_interaction_term(p).to_dense()
    d = _h0(p)
    modes = {"strict": (False, "factorial"), "weighted": (True, "factorial"), "unweighted": (True, "none")}
    for K, M in itertools.product(range(1, 4), range(1, 9)):
        for mode, (collisions, weighting) in modes.items():
            ours = dyson_orders(p, 0.9, K, M, collisions, weighting=weighting).sum(axis=0)
            ref = brute_force_dyson(v, d, 0.9, K, M, mode)
            assert np.abs(ours - ref).max() <= 1e-13, (K, M, mode)


def test_ac5_leakage_bound():
    start = time.perf_counter()
    for x, t in itertools.product((0.25, 0.5), (0.25, 0.5)):
        small = ModelParams(x=x, mu=1.0, n_sites=2, lambda_cutoff=1)
        big = small.replace(lambda_cutoff=8)
        for delta in (3, 4, 5):
            lambda_t = 1 + math.ceil(4 * x * t) * (delta - 1)
            assert leakage_norm(small, big, t, lambda_t) <= leakage_bound(x, t, delta)
    assert time.perf_counter() - start < 60


@pytest.mark.parametrize("x", [0.1, 1.0])
def test_ac6_gauss_law(x):
    p = ModelParams(x=x, mu=1.0, n_sites=3, lambda_cutoff=4)
    psi = build_quench_state(p, 0)
    h = build_hamiltonian(p)
    times = np.linspace(0.0, 1.0, 21)
    traj = expectation_trajectory(h, build_gauss_operator(p, 1), psi, times)
    assert np.abs(traj).max() <= 1e-8


def test_ac7_cost_goldens():
    assert trotter_subroutine_costs(8, 3, 5)[2].t_gates == 140
    for N, eta in ((8, 3), (9, 3), (4, 2)):
        for r in (1, 2, 7):
            ref = table2(N, eta, r)
            names = {"exp_HM": "HM", "exp_HE": "HE", "exp_H1e": "H1e", "exp_H1o": "H1o", "exp_H2e": "H2e",
                     "exp_H2o": "H2o"}
            calls = dict.fromkeys(ref, 0)
            for row in trotter_subroutine_costs(N, eta, r):
                key = names[row.name.rsplit("_", 1)[0]]
                assert (row.t_gates, row.rotations, row.ancilla) == (ref[key]["t"], ref[key]["rot"], ref[key]["anc"])
                calls[key] += row.calls
            assert calls == {k: v["calls"] for k, v in ref.items()}
    for N, eta, K, M in ((8, 3, 4, 16), (9, 3, 4, 16), (4, 2, 2, 8)):
        for variant, sorted_ in itertools.product(("pga", "mult"), (True, False)):
            ours = {row.name: dict(t=row.t_gates, rot=row.rotations, anc=row.ancilla, calls=row.calls)
                    for row in ip_subroutine_costs(N, eta, K, M, variant, sorted_)}
            assert ours == table3(N, eta, K, M, variant, sorted_)


def test_ac8_comparison_trends():
    start = time.perf_counter()
    x_grid, eps_grid, t_grid = (0.1, 1, 10, 100), (1e-1, 1e-2, 1e-3), list(range(1, 11))
    cmp = compare(x_grid, 1.0, t_grid, eps_grid, n0=8, rho_density=0.5)
    # (a) growth in t at fixed lattice size and cutoff
    for d in cmp.diagnostics:
        assert 1.3 <= d["pf2_t_exponent_fixed"] <= 1.7, d
        assert d["ip_t_exponent_fixed"] <= 1.3, d
    # (b) for x = 0.1 the winner moves from PF2 to IP with longer times and tighter tolerances
    winners = {}
    for row in cmp.rows:
        winners.setdefault((row.x, row.eps, row.lambda0), []).append(row.winner)
    loose = [w for (x, e, _), w in winners.items() if x == 0.1 and e == 0.1]
    assert any(w[0] == "pf2" and "ip" in w[1:] for w in loose)
    first_by_eps = {e: [w[0] for (x, ee, _), w in winners.items() if x == 0.1 and ee == e] for e in eps_grid}
    assert "pf2" in first_by_eps[0.1] and set(first_by_eps[1e-3]) == {"ip"}
    # (c) segment counts with and without sorting
    sorted_total = unsorted_total = 0
    for x, eps, tv in itertools.product(x_grid, eps_grid, t_grid):
        plan = make_plan(x, 1.0, 0.5, tv * 0.5 / x, eps, 8, "ip", 1)
        sorted_total += ip_total(plan, "pga", True).segments_or_steps
        unsorted_total += ip_total(plan, "pga", False).segments_or_steps
    assert unsorted_total / sorted_total == pytest.approx(LN2 / 0.5, rel=0.02)
    assert time.perf_counter() - start < 300


def test_ac9_planner_self_consistency():
    rng = np.random.default_rng(20261019)
    for _ in range(1000):
        x = float(10 ** rng.uniform(-2, 2))
        mu = float(10 ** rng.uniform(-1, 1))
        rho = float(rng.uniform(0.05, 1.0))
        t = float(rng.uniform(0.1, 10.0)) * rho / x
        eps = float(10 ** rng.uniform(-4, -0.5))
        n0 = int(rng.integers(2, 17))
        method = str(rng.choice(["pf2", "ip"]))
        plan = make_plan(x, mu, rho, t, eps, n0, method, sorted=bool(rng.integers(2)))
        assert plan.check() == []
        b = plan.budget
        assert b.components() <= eps * (1 + 1e-12)
        assert math.isclose(b.eps_prime, eps - b.eps_cutoff)
        text = plan.to_json()
        assert text == make_plan(x, mu, rho, t, eps, n0, method, sorted=plan.inputs.sorted).to_json()
        assert json.dumps(json.loads(text), sort_keys=True, separators=(",", ":")) == text


def test_ac_dyson_matrix_path_matches_orders():
    """The matrix entry point used by the CLI sums the same orders."""
    cfg = certify_segment(0.4, norm_bounds(BASE).h0_norm, LN2 / 0.4, 1e-2, 1e-2, True)
    a = dyson_series_matrix(BASE, cfg)
    b = dyson_orders(BASE, cfg.t_seg, cfg.K, cfg.M, True).sum(axis=0)
    assert np.array_equal(a, b)
