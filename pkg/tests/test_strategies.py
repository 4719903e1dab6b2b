import math

import numpy as np
import pytest
from scipy.integrate import quad

from graphflock.equilibrium import build_kernel, game_value, p_matrix
from graphflock.errors import NumericError, ParameterError
from graphflock.graphs import complete, cycle, edge_list_graph, torus
from graphflock.strategies import (
    best_response,
    cost_under_profile,
    custom_profile,
    deviation_gap,
    epsilon_bounds,
    equilibrium_profile,
    mf_profile,
    nash_audit,
    profile_costs,
    zero_profile,
)


def single_vertex():
    return edge_list_graph([], n=1, one_based=False)


class TestProfiles:
    def test_mf_entries(self):
        g = cycle(4)
        prof = mf_profile(g, c=1.0, T=1.0, steps=200)
        assert np.allclose(prof.at(1.0), np.eye(4))
        assert np.allclose(prof.at(0.0), 0.5 * np.eye(4))
        assert np.allclose(prof.at(0.5), (2.0 / 3.0) * np.eye(4))
        off = prof.at(0.3)[~np.eye(4, dtype=bool)]
        assert np.all(off == 0.0)

    def test_equilibrium_profile_rows(self):
        k = build_kernel(cycle(4), 1.0, 1.0, 1.0, steps=200)
        prof = equilibrium_profile(k)
        assert np.allclose(prof.at(0.7), p_matrix(k, 0.7))

    def test_profile_graph_mismatch(self):
        prof = mf_profile(cycle(4), 1.0, 1.0, steps=100)
        with pytest.raises(ParameterError):
            cost_under_profile(cycle(5), prof, 0, sigma=1.0, c=1.0)


class TestCostUnderProfile:
    def test_zero_profile_isolated_vertex(self):
        g = single_vertex()
        prof = zero_profile(g, T=1.0, steps=200)
        for c, sigma in ((1.0, 1.0), (2.0, 0.5)):
            cost = cost_under_profile(g, prof, 0, sigma=sigma, c=c)
            assert cost == pytest.approx(0.5 * c * sigma**2 * 1.0, abs=1e-10)

    def test_equilibrium_profile_average_equals_game_value(self):
        k = build_kernel(complete(50), 1.0, 1.0, 1.0, steps=2000)
        prof = equilibrium_profile(k)
        costs = profile_costs(complete(50), prof, sigma=1.0, c=1.0)
        assert costs.mean() == pytest.approx(game_value(k), abs=1e-6)

    def test_mean_field_cost_closed_form_complete(self):
        # opponents and self are independent OU processes with variance
        # V(t) = sigma^2 t (1 + c(T-t)) / (1 + cT); assemble the cost directly
        n, c, T, sigma = 10, 1.0, 1.0, 1.0
        g = complete(n)
        prof = mf_profile(g, c, T, steps=2000)
        cost = cost_under_profile(g, prof, 0, sigma=sigma, c=c)

        def v(t):
            return sigma**2 * t * (1 + c * (T - t)) / (1 + c * T)

        running = 0.5 * quad(lambda t: (c / (1 + c * (T - t))) ** 2 * v(t), 0, T, epsabs=1e-12)[0]
        terminal = 0.5 * c * v(T) * (1.0 + 1.0 / (n - 1))
        assert cost == pytest.approx(running + terminal, abs=1e-8)

    def test_nonzero_start_drifts_to_rest(self):
        g = cycle(4)
        prof = mf_profile(g, 1.0, 1.0, steps=400)
        x0 = np.array([2.0, 0.0, 0.0, -2.0])
        cost0 = cost_under_profile(g, prof, 0, sigma=1.0, c=1.0)
        cost_x0 = cost_under_profile(g, prof, 0, sigma=1.0, c=1.0, x0=x0)
        assert cost_x0 > cost0

    def test_grid_refinement(self):
        for g in (complete(2), cycle(6)):
            coarse = profile_costs(g, mf_profile(g, 1.0, 1.0, steps=1000), sigma=1.0, c=1.0)
            fine = profile_costs(g, mf_profile(g, 1.0, 1.0, steps=2000), sigma=1.0, c=1.0)
            assert np.abs(coarse - fine).max() <= 1e-8


class TestBestResponse:
    def test_isolated_single_player(self):
        g = single_vertex()
        c, T, sigma = 1.0, 1.0, 1.0
        prof = zero_profile(g, T=T, steps=2000)
        br = best_response(g, prof, 0, c=c, sigma=sigma)
        assert br.value == pytest.approx(0.5 * sigma**2 * math.log(1 + c * T), abs=1e-9)
        expected = c / (1 + c * (T - br.grid))
        assert np.abs(br.feedback[:, 0] - expected).max() <= 1e-9

    def test_fixed_point_of_equilibrium(self):
        g = cycle(6)
        k = build_kernel(g, 1.0, 1.0, 1.0, steps=2000)
        prof = equilibrium_profile(k)
        for i in (0, 2):
            br = best_response(g, prof, i, c=1.0, sigma=1.0)
            worst = 0.0
            for j in (0, 500, 1000, 1500, 2000):
                row = p_matrix(k, prof.grid[j])[i]
                worst = max(worst, np.abs(br.feedback[j] - row).max())
            assert worst <= 1e-6

    def test_vanishing_horizon_value(self):
        # with T -> 0 there is no time to act or accumulate noise
        g = cycle(4)
        prof = mf_profile(g, c=1.0, T=1e-3, steps=100)
        br = best_response(g, prof, 0, c=1.0, sigma=1.0)
        assert abs(br.value) < 5e-3

    def test_blowup_capped(self):
        g = complete(2)
        destabilizing = custom_profile(g, T=1.0, matrix_fn=lambda t: -1e4 * np.eye(2), steps=200)
        with pytest.raises(NumericError):
            best_response(g, destabilizing, 0, c=1.0, sigma=1.0)

    def test_invalid_player(self):
        g = cycle(4)
        prof = mf_profile(g, 1.0, 1.0, steps=100)
        with pytest.raises(ParameterError):
            best_response(g, prof, 4, c=1.0, sigma=1.0)


class TestDeviationGap:
    def test_equilibrium_profile_no_gain(self):
        g = complete(10)
        k = build_kernel(g, 1.0, 1.0, 1.0, steps=2000)
        prof = equilibrium_profile(k)
        for i in (0, 7):
            assert abs(deviation_gap(g, prof, i, c=1.0, sigma=1.0)) <= 1e-6

    def test_mean_field_gap_within_certificate(self):
        g = cycle(20)
        prof = mf_profile(g, 1.0, 1.0, steps=2000)
        eps = epsilon_bounds(g, 1.0, 1.0, 1.0).per_vertex[0]
        gap = deviation_gap(g, prof, 0, c=1.0, sigma=1.0)
        assert 0.0 < gap <= eps
        assert eps == pytest.approx(0.5 * math.sqrt(1.5), abs=1e-12)

    def test_mean_field_isolated_exact(self):
        g = single_vertex()
        prof = mf_profile(g, 1.0, 1.0, steps=2000)
        assert abs(deviation_gap(g, prof, 0, c=1.0, sigma=1.0)) <= 1e-8


class TestEpsilonBounds:
    def test_complete_101(self):
        eps = epsilon_bounds(complete(101), 1.0, 1.0, 1.0)
        assert np.allclose(eps.per_vertex, 0.5 * math.sqrt(3.0 / 100.0), atol=1e-12)
        assert eps.aggregate == pytest.approx(0.5 * math.sqrt(3.0 / 100.0), abs=1e-12)

    def test_cycle_certificate(self):
        eps = epsilon_bounds(cycle(17), 1.0, 1.0, 1.0)
        assert np.allclose(eps.per_vertex, 0.5 * math.sqrt(1.5), atol=1e-12)

    def test_isolated_vertex_zero(self):
        g = edge_list_graph([(1, 2)], n=3)
        eps = epsilon_bounds(g, 1.0, 1.0, 1.0)
        assert eps.per_vertex[2] == 0.0
        assert eps.aggregate == pytest.approx(
            0.5 * math.sqrt(3.0), abs=1e-12
        )  # min degree 0 -> 1 v delta = 1
        assert eps.avg_degree_diagnostic == pytest.approx((1 + 1 + 1) / 3.0, abs=1e-12)

    def test_scaling_in_sigma(self):
        a = epsilon_bounds(cycle(5), 1.0, 1.0, 1.0).per_vertex[0]
        b = epsilon_bounds(cycle(5), 1.0, 1.0, 2.0).per_vertex[0]
        assert b == pytest.approx(4.0 * a, abs=1e-12)


class TestNashAudit:
    def test_mean_field_complete10(self):
        g = complete(10)
        prof = mf_profile(g, 1.0, 1.0, steps=1000)
        report = nash_audit(g, prof, c=1.0, sigma=1.0)
        assert report["all_satisfied"]
        assert len(report["players"]) == 10
        entry = report["players"][0]
        assert set(entry) == {"vertex", "cost", "best_response_value", "gap", "epsilon_bound", "satisfied"}
        assert entry["gap"] <= entry["epsilon_bound"]

    def test_equilibrium_audit_zero_bound(self):
        g = torus(3, 2)
        k = build_kernel(g, 1.0, 1.0, 1.0, steps=1000)
        report = nash_audit(g, equilibrium_profile(k), c=1.0, sigma=1.0)
        assert report["all_satisfied"]
        assert report["max_gap"] <= 1e-5


class TestRiccatiAgainstMonteCarlo:
    def test_k2_policy_evaluation(self):
        # Monte Carlo policy evaluation of the best-response feedback on a
        # single edge, independent of every solver in the package.
        g = complete(2)
        c = sigma = T = 1.0
        steps = 1000
        prof = mf_profile(g, c, T, steps=steps)
        br = best_response(g, prof, 0, c=c, sigma=sigma)

        rng = np.random.default_rng(42)
        paths = 20000
        dt = T / steps
        x = np.zeros((paths, 2))
        running = np.zeros(paths)
        for j in range(steps):
            t = j * dt
            k_row0 = br.feedback[j]
            alpha0 = -(x @ k_row0)
            alpha1 = -c * x[:, 1] / (1 + c * (T - t))
            running += 0.5 * alpha0**2 * dt
            x[:, 0] += alpha0 * dt
            x[:, 1] += alpha1 * dt
            x += sigma * math.sqrt(dt) * rng.standard_normal((paths, 2))
        total = running + 0.5 * c * (x[:, 0] - x[:, 1]) ** 2
        se = total.std(ddof=1) / math.sqrt(paths)
        assert total.mean() == pytest.approx(br.value, abs=3 * se + 5e-3)
