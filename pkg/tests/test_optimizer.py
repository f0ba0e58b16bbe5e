import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from tailqaoa.optimizer import (LevelResult, _Objective, _pick_best, evaluate, fd_gradient,
                                interp_pipeline, interp_start, landscape_scan,
                                multistart_optimize, nelder_mead, projected_bfgs)
from tailqaoa.simulator import VariationalParams, expectation, run_qaoa, success_probability


def brute_landscape(m, sols, res):
    axis = np.linspace(0, math.pi, res)
    E = np.empty((res, res))
    F = np.empty((res, res))
    for i, g in enumerate(axis):
        for j, b in enumerate(axis):
            s = run_qaoa(m, VariationalParams([g], [b]))
            E[i, j] = expectation(s, m)
            F[i, j] = success_probability(s, sols)
    return E, F


class TestLandscape:
    def test_matches_pointwise(self, planted6):
        _, m, sols = planted6
        grid = landscape_scan(m, sols, resolution=9)
        E, F = brute_landscape(m, sols, 9)
        np.testing.assert_allclose(grid.E_values, E, atol=1e-12)
        np.testing.assert_allclose(grid.F_values, F, atol=1e-12)
        assert len(list(grid.rows())) == 81

    def test_threads_identical(self, planted6):
        _, m, sols = planted6
        a = landscape_scan(m, sols, resolution=12)
        b = landscape_scan(m, sols, resolution=12, workers=3)
        assert np.array_equal(a.E_values, b.E_values)

    def test_optimum_beats_identity(self, planted8):
        _, m, sols = planted8
        grid = landscape_scan(m, sols, resolution=64)
        assert grid.E_values.shape == (64, 64)
        assert grid.E_values.min() < grid.E_values[0, 0]
        g, b = grid.argmin_E()
        assert grid.E_values.min() == pytest.approx(evaluate(m, VariationalParams([g], [b]), sols)[0])

    def test_resolution_check(self, toy_model):
        with pytest.raises(ValueError):
            landscape_scan(toy_model, [3], resolution=1)


class TestBFGS:
    def test_quadratic_box(self):
        f = lambda x: float((x[0] - 1.0) ** 2 + 3 * (x[1] - 5.0) ** 2)
        x, fx = projected_bfgs(f, [2.5, 0.5])
        assert x[0] == pytest.approx(1.0, abs=1e-4)
        assert x[1] == math.pi  # pinned to the upper face
        assert fx == pytest.approx(3 * (math.pi - 5) ** 2, abs=1e-6)

    def test_fd_gradient(self):
        f = lambda x: float(np.sin(x[0]) * x[1] ** 2)
        x = np.array([0.3, 1.2])
        np.testing.assert_allclose(fd_gradient(f, x), [np.cos(0.3) * 1.44, 2 * np.sin(0.3) * 1.2],
                                   atol=1e-8)

    @pytest.mark.parametrize("p", [1, 2])
    def test_stationary_at_optimum(self, planted6, p):
        _, m, sols = planted6
        res = multistart_optimize(m, sols, p, n_starts=12, seed=3)
        x = res.params.as_vector()
        interior = (x > 1e-3) & (x < math.pi - 1e-3)
        grad = fd_gradient(_Objective(m), x)
        assert np.linalg.norm(grad[interior]) < 1e-3

    def test_matches_scipy_on_interior_minimum(self, toy_model):
        obj = _Objective(toy_model)
        x, fx = projected_bfgs(obj, [0.5, 0.5])
        ref = minimize(obj, [0.5, 0.5], method="L-BFGS-B", bounds=[(0, math.pi)] * 2,
                       options={"ftol": 1e-14, "gtol": 1e-10})
        assert fx == pytest.approx(ref.fun, abs=1e-6)


class TestMultistart:
    def test_not_worse_than_starts(self, planted6):
        _, m, sols = planted6
        starts = np.random.default_rng(4).uniform(0, math.pi, size=(8, 4))
        res = multistart_optimize(m, sols, 2, starts=starts)
        start_E = [_Objective(m)(s) for s in starts]
        assert res.E <= min(start_E) + 1e-12

    def test_reported_values_fresh(self, planted6):
        _, m, sols = planted6
        res = multistart_optimize(m, sols, 1, n_starts=10, seed=1)
        E, F = evaluate(m, res.params, sols)
        assert abs(res.E - E) < 1e-10 and abs(res.F - F) < 1e-10
        assert res.evals > 0 and res.p == 1

    def test_deterministic_and_thread_independent(self, planted6):
        _, m, sols = planted6
        a = multistart_optimize(m, sols, 1, n_starts=10, seed=5)
        b = multistart_optimize(m, sols, 1, n_starts=10, seed=5, workers=4)
        assert a.gammas == b.gammas and a.betas == b.betas and a.evals == b.evals

    def test_tie_break_lexicographic(self):
        cands = [(np.array([0.5, 0.1]), 1.0), (np.array([0.2, 0.9]), 1.0 + 1e-14),
                 (np.array([0.1, 0.1]), 2.0)]
        assert list(_pick_best(cands)) == [0.2, 0.9]

    def test_bad_starts(self, toy_model):
        with pytest.raises(ValueError):
            multistart_optimize(toy_model, [3], 2, starts=np.zeros((2, 3)))


class TestNelderMead:
    def test_hard_caps(self, planted6):
        _, m, sols = planted6
        for p in (1, 3):
            start = VariationalParams([0.3] * p, [0.4] * p)
            res = nelder_mead(m, sols, start)
            assert res.evals <= 60 * p
        res = nelder_mead(m, sols, VariationalParams([0.3], [0.4]), max_evals=2)
        assert res.evals == 2

    def test_never_worse_than_start(self, planted6):
        _, m, sols = planted6
        start = VariationalParams([0.3, 0.5], [0.4, 0.2])
        res = nelder_mead(m, sols, start)
        assert res.E <= evaluate(m, start, sols)[0] + 1e-12

    def test_matches_scipy_trajectory(self, toy_model):
        # same coefficients, same initial simplex and stopping rule
        x0 = np.array([0.3, 0.4])
        sim = np.array([x0, x0 + [0.05, 0], x0 + [0, 0.05]])
        ref = minimize(_Objective(toy_model), x0, method="Nelder-Mead",
                       options={"initial_simplex": sim, "xatol": 1e-6, "fatol": 1e-6,
                                "maxiter": 10**4, "maxfev": 10**4})
        ours = nelder_mead(toy_model, [3], VariationalParams([0.3], [0.4]),
                           max_evals=10**4, max_iter=10**4)
        np.testing.assert_allclose(ours.params.as_vector(), ref.x, atol=1e-12)
        assert ours.evals == ref.nfev


class TestInterp:
    def test_formula_by_hand(self):
        out = interp_start(VariationalParams([0.2, 0.6], [0.5, 0.1]))
        assert out.gammas == pytest.approx((0.2, 0.4, 0.6))
        assert out.betas == pytest.approx((0.5, 0.3, 0.1))
        one = interp_start(VariationalParams([0.7], [0.3]))
        assert one.gammas == (0.7, 0.7) and one.betas == (0.3, 0.3)

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.floats(0, 3.2), st.floats(0, 3.2)), min_size=1, max_size=12))
    def test_length_and_swap_symmetry(self, pairs):
        g = [a for a, _ in pairs]
        b = [c for _, c in pairs]
        out = interp_start(VariationalParams(g, b))
        swapped = interp_start(VariationalParams(b, g))
        assert out.p == len(pairs) + 1
        assert out.gammas == swapped.betas and out.betas == swapped.gammas
        # endpoints survive unchanged, interior values stay within the input range
        assert out.gammas[0] == pytest.approx(g[0]) and out.gammas[-1] == pytest.approx(g[-1])
        assert min(g) - 1e-12 <= min(out.gammas) and max(out.gammas) <= max(g) + 1e-12

    def test_linear_sequence_stays_linear(self):
        p = 4
        g = [0.1 * (i + 1) for i in range(p)]
        out = interp_start(VariationalParams(g, g))
        assert np.allclose(np.diff(out.gammas), np.diff(out.gammas)[0])

    def test_pipeline(self, planted6):
        _, m, sols = planted6
        base = multistart_optimize(m, sols, 1, n_starts=8, seed=0)
        assert interp_pipeline(m, sols, 1, base) == [base]
        trace = interp_pipeline(m, sols, 4, base)
        assert [r.p for r in trace] == [1, 2, 3, 4]
        for r in trace:
            E, F = evaluate(m, r.params, sols)
            assert abs(r.E - E) < 1e-10 and abs(r.F - F) < 1e-10
        # NM starts from the interpolated point, which reproduces the previous level's state energy
        assert all(b.E <= a.E + 1e-9 for a, b in zip(trace, trace[1:]))
        with pytest.raises(ValueError):
            interp_pipeline(m, sols, 3, trace[1])


def test_level_result_roundtrip():
    r = LevelResult(2, (0.1, 0.2), (0.3, 0.4), 1.5, 0.2, 17, 0.01)
    assert LevelResult.from_dict(r.to_dict()) == r
    assert r.to_dict()["gammas"] == [0.1, 0.2]


def test_density_lowers_success():
    """Denser overlap graphs are harder at fixed depth."""
    from tailqaoa.instance import generate_planted, solution_indices, to_graph, valency_stats
    from tailqaoa.ising import build_ising

    def family(decoys):
        Fs, vals = [], []
        for seed in range(6):
            inst = generate_planted(40, 8, 4, seed=seed, decoy_size=decoys)
            m, sols = build_ising(inst), solution_indices(inst.known_solutions)
            base = multistart_optimize(m, sols, 1, n_starts=20, seed=seed)
            Fs.append(interp_pipeline(m, sols, 3, base)[-1].F)
            vals.append(valency_stats(to_graph(inst)).mean)
        return np.mean(Fs), np.mean(vals)

    F_sparse, v_sparse = family((2, 3))
    F_dense, v_dense = family((10, 14))
    assert v_dense > v_sparse
    assert F_dense < F_sparse


class TestSpecExamples:
    def test_identity_cell(self, planted6):
        _, m, sols = planted6
        grid = landscape_scan(m, sols, resolution=8)
        from tailqaoa.simulator import prepare_plus
        assert grid.E_values[0, 0] == pytest.approx(expectation(prepare_plus(m.n), m), abs=1e-12)
        assert grid.F_values[0, 0] == pytest.approx(len(sols) * 2.0 ** -m.n, abs=1e-12)

    def test_toy_grid_bounded_by_spectrum(self, toy_model):
        grid = landscape_scan(toy_model, [3, 4], resolution=32)
        assert grid.E_values.min() >= -1e-12 and grid.E_values.max() <= 2 + 1e-12

    def test_argmin_E_near_argmax_F(self, planted8):
        _, m, sols = planted8
        grid = landscape_scan(m, sols, resolution=128)
        (g1, b1), (g2, b2) = grid.argmin_E(), grid.argmax_F()
        assert math.hypot(g1 - g2, b1 - b2) < 0.3

    def test_nm_fixed_point(self, planted6):
        _, m, sols = planted6
        opt = multistart_optimize(m, sols, 1, n_starts=12, seed=3)
        res = nelder_mead(m, sols, opt.params)
        assert res.E <= opt.E + 1e-12
        assert np.allclose(res.params.as_vector(), opt.params.as_vector(), atol=0.05)

    def test_nm_toy_from_center(self, toy_model):
        start = VariationalParams([math.pi / 2], [math.pi / 2])
        res = nelder_mead(toy_model, [3, 4], start)
        assert res.E <= evaluate(toy_model, start, [3, 4])[0]

    def test_nm_improves_p3_over_p2(self, planted8):
        _, m, sols = planted8
        base = multistart_optimize(m, sols, 1, n_starts=30, seed=0)
        trace = interp_pipeline(m, sols, 3, base)
        assert trace[2].E < trace[1].E

    def test_interp_zero_and_monotone(self):
        z = interp_start(VariationalParams([0, 0, 0], [0, 0, 0]))
        assert z.gammas == (0, 0, 0, 0) and z.betas == (0, 0, 0, 0)
        out = interp_start(VariationalParams([0.1, 0.3, 0.35, 0.9], [0.2, 0.2, 0.5, 0.6]))
        assert all(b >= a for a, b in zip(out.gammas, out.gammas[1:]))
        assert all(b >= a for a, b in zip(out.betas, out.betas[1:]))
