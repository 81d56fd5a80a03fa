import numba
import numpy as np
import pytest

from fibredist.dataset import SyntheticConfig, generate_synthetic, polymer_subset
from fibredist.learners import (
    ModelKind,
    best_split,
    default_grid,
    estimate_sigma,
    fit_elastic_net,
    fit_forest,
    fit_knn,
    fit_linear,
    fit_mars,
    fit_model,
    fit_model_family,
    fit_svr,
    fit_tree,
    hinge,
    lambda_max,
    model_from_json,
    model_to_json,
    predict,
    predict_forest,
    predict_knn,
    predict_linear,
    predict_mars,
    predict_svr,
    predict_tree,
    rbf_kernel,
    svr_objective,
    truncate_tree,
)
from fibredist.learners.mars import forward_pass
from fibredist.learners.svr import _smo

NAMES3 = ("a", "b", "c")


def random_problem(n=20, p=3, seed=0, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    beta = rng.normal(size=p)
    y = 1.5 + X @ beta + noise * rng.normal(size=n)
    return X, y


class TestDefaultGrid:
    def test_knn(self):
        assert [hp["k"] for hp in default_grid(ModelKind.KNN, 6)] == [3, 5, 7, 9, 11]

    def test_forest(self):
        grid = default_grid(ModelKind.FOREST, 6)
        assert len(grid) == 18
        assert {hp["n_trees"] for hp in grid} == {500}
        assert {hp["mtry"] for hp in grid} == set(range(1, 7))
        assert {hp["min_node_size"] for hp in grid} == {1, 5, 10}

    def test_tree_log_spacing(self):
        cps = [hp["cp"] for hp in default_grid(ModelKind.TREE, 6)]
        assert len(cps) == 10
        logs = np.log10(cps)
        np.testing.assert_allclose(np.diff(logs), logs[1] - logs[0], atol=1e-12)
        assert cps[0] == pytest.approx(1e-4)
        assert cps[-1] == pytest.approx(1e-1)

    def test_elastic_net(self):
        grid = default_grid(ModelKind.ELASTIC_NET, 6)
        assert len(grid) == 125
        alphas = sorted({hp["alpha"] for hp in grid})
        assert alphas == [0.0, 0.25, 0.5, 0.75, 1.0]
        fracs = [hp["lambda_frac"] for hp in grid if hp["alpha"] == 0.5]
        assert len(fracs) == 25
        assert fracs[0] == pytest.approx(1.0)
        assert fracs[-1] == pytest.approx(1e-3)

    def test_svr(self):
        grid = default_grid(ModelKind.SVR_RBF, 6)
        assert [hp["C"] for hp in grid] == [0.25, 0.5, 1.0, 2.0, 4.0]
        assert {hp["epsilon"] for hp in grid} == {0.1}
        assert {hp["sigma"] for hp in grid} == {"auto"}

    def test_mars(self):
        grid = default_grid(ModelKind.MARS, 6)
        assert len(grid) == 10
        assert {hp["degree"] for hp in grid} == {1, 2}
        assert {hp["nprune"] for hp in grid} == {5, 10, 15, 20, 25}

    def test_linear_singleton(self):
        assert default_grid(ModelKind.LINEAR, 6) == [{}]


class TestLinear:
    def test_exact_line_recovery(self):
        x = np.linspace(0, 5, 12)[:, None]
        state = fit_linear(x, 3.0 + 2.0 * x[:, 0])
        assert state["intercept"] == pytest.approx(3.0, abs=1e-10)
        assert state["coef"][0] == pytest.approx(2.0, abs=1e-10)

    def test_constant_target(self):
        X, _ = random_problem()
        state = fit_linear(X, np.full(20, 7.0))
        assert state["intercept"] == pytest.approx(7.0)
        np.testing.assert_allclose(state["coef"], 0.0, atol=1e-10)

    def test_normal_equations_oracle(self):
        X, y = random_problem(n=20, p=3, seed=4)
        state = fit_linear(X, y)
        A = np.column_stack([np.ones(20), X])
        oracle = np.linalg.solve(A.T @ A, A.T @ y)  # independent closed form
        assert abs(state["intercept"] - oracle[0]) < 1e-8
        np.testing.assert_allclose(state["coef"], oracle[1:], atol=1e-8)

    def test_standard_errors_match_closed_form(self):
        X, y = random_problem(n=25, p=2, seed=5)
        state = fit_linear(X, y)
        A = np.column_stack([np.ones(25), X])
        resid = y - A @ np.linalg.solve(A.T @ A, A.T @ y)
        sigma2 = resid @ resid / (25 - 3)
        se = np.sqrt(np.diag(sigma2 * np.linalg.inv(A.T @ A)))
        np.testing.assert_allclose(state["std_errors"], se[1:], rtol=1e-8)
        np.testing.assert_allclose(
            state["t_stats"], state["coef"] / se[1:], rtol=1e-8
        )

    def test_rank_deficient_warns_and_falls_back(self):
        X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
        with pytest.warns(RuntimeWarning, match="rank-deficient"):
            state = fit_linear(X, np.arange(10.0))
        assert state["rank_deficient"]
        pred = predict_linear(state, X)
        np.testing.assert_allclose(pred, np.arange(10.0), atol=1e-8)


def en_kkt_residual(X, y, state):
    """Max violation of the elastic-net stationarity conditions."""
    Xc = X - X.mean(axis=0)
    r = y - state["intercept"] - X @ state["coef"]
    n = len(y)
    lam, alpha = state["lambda"], state["alpha"]
    worst = abs(float(r.mean()))
    for j in range(X.shape[1]):
        g = -float(Xc[:, j] @ r) / n + lam * (1 - alpha) * state["coef"][j]
        if state["coef"][j] != 0.0:
            worst = max(worst, abs(g + lam * alpha * np.sign(state["coef"][j])))
        else:
            worst = max(worst, max(0.0, abs(g) - lam * alpha))
    return worst


class TestElasticNet:
    def test_lambda_max_kills_all_slopes(self):
        X, y = random_problem(n=30, p=4, seed=1)
        for alpha in (0.25, 0.5, 0.75, 1.0):
            lam = lambda_max(X, y, alpha)
            state = fit_elastic_net(X, y, alpha, lam)
            np.testing.assert_array_equal(state["coef"], 0.0)
            assert state["intercept"] == pytest.approx(
                float(y.mean() - X.mean(axis=0) @ state["coef"])
            )

    def test_ridge_corner_shrinks_hard(self):
        # alpha 0 cannot produce exact zeros; the floored lambda_max shrinks
        # slopes to a small fraction of the least-squares solution
        X, y = random_problem(n=30, p=4, seed=2)
        ols = fit_linear(X, y)["coef"]
        state = fit_elastic_net(X, y, 0.0, lambda_max(X, y, 0.0))
        assert np.abs(state["coef"]).max() < 2e-3 * np.abs(ols).max()

    def test_small_lambda_approaches_ols(self):
        X, y = random_problem(n=30, p=3, seed=3)
        ols = fit_linear(X, y)
        state = fit_elastic_net(X, y, 0.0, 1e-8)
        np.testing.assert_allclose(state["coef"], ols["coef"], atol=1e-4)
        assert state["intercept"] == pytest.approx(ols["intercept"], abs=1e-4)

    def test_kkt_oracle_on_10x3(self):
        X, y = random_problem(n=10, p=3, seed=6, noise=0.5)
        state = fit_elastic_net(X, y, 0.5, 0.1)
        assert en_kkt_residual(X, y, state) < 1e-6

    def test_warm_path_matches_cold_fits(self):
        from fibredist.learners import fit_elastic_net_path

        X, y = random_problem(n=25, p=4, seed=7)
        lmax = lambda_max(X, y, 0.5)
        lams = lmax * np.logspace(0, -3, 7)
        path = fit_elastic_net_path(X, y, 0.5, lams)
        for lam, state in zip(lams, path):
            cold = fit_elastic_net(X, y, 0.5, lam)
            np.testing.assert_allclose(state["coef"], cold["coef"], atol=1e-6)


class TestTree:
    def test_constant_target_single_leaf(self):
        X = np.arange(30.0)[:, None]
        state = fit_tree(X, np.full(30, 4.0), cp=0.01)
        assert len(state["feature"]) == 1
        assert predict_tree(state, X)[0] == 4.0

    def test_step_split_near_zero(self):
        x = np.concatenate([np.linspace(-2, -0.1, 20), np.linspace(0.1, 2, 20)])
        y = np.where(x < 0, 0.0, 10.0)
        state = fit_tree(x[:, None], y, cp=0.01)
        assert state["feature"][0] == 0
        assert abs(state["threshold"][0]) < 0.11
        leaves = sorted(predict_tree(state, np.array([[-1.0], [1.0]])))
        assert leaves == [0.0, 10.0]

    def test_high_cp_on_noise_yields_stump(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(60, 2))
        y = rng.normal(size=60)
        sse_root = float(((y - y.mean()) ** 2).sum())
        gain, _, _ = best_split(X, y, min_leaf=7)
        assert gain / sse_root < 0.1  # brute confirmation the bar is uncleared
        state = fit_tree(X, y, cp=0.1)
        assert len(state["feature"]) == 1

    def test_exhaustive_split_oracle(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(50, 3))
        y = X[:, 1] ** 2 + 0.3 * rng.normal(size=50)
        got = best_split(X, y, min_leaf=1)
        best = None
        sse_parent = float(((y - y.mean()) ** 2).sum())
        for j in range(3):
            xs = np.unique(X[:, j])
            for a, b in zip(xs[:-1], xs[1:]):
                t = 0.5 * (a + b)
                left = y[X[:, j] <= t]
                right = y[X[:, j] > t]
                gain = sse_parent - ((left - left.mean()) ** 2).sum() \
                    - ((right - right.mean()) ** 2).sum()
                if best is None or gain > best[0]:
                    best = (gain, j, t)
        assert got[1] == best[1]
        assert got[2] == pytest.approx(best[2])
        assert got[0] == pytest.approx(best[0], rel=1e-10)

    def test_truncation_equals_regrowth(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(120, 3))
        y = X[:, 0] ** 2 + X[:, 1] + 0.2 * rng.normal(size=120)
        grown = fit_tree(X, y, cp=1e-4)
        for cp in (1e-3, 1e-2, 1e-1):
            regrown = fit_tree(X, y, cp=cp)
            derived = truncate_tree(grown, cp)
            np.testing.assert_array_equal(
                predict_tree(derived, X), predict_tree(regrown, X)
            )

    def test_min_split_honored(self):
        X = np.arange(19.0)[:, None]
        y = np.where(X[:, 0] < 9, 0.0, 10.0)
        state = fit_tree(X, y, cp=1e-4)  # 19 rows < min_split of 20
        assert len(state["feature"]) == 1


class TestForest:
    def test_stumps_when_min_node_size_ge_n(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(40, 3))
        y = 50 + 10 * rng.normal(size=40)
        state = fit_forest(X, y, mtry=2, min_node_size=40, n_trees=400, seed=2)
        assert int(state["offsets"][-1]) == 400  # one node per tree
        pred = predict_forest(state, X[:1])
        se = y.std(ddof=1) / np.sqrt(40)
        assert abs(pred[0] - y.mean()) < 3 * se

    def test_predictions_bounded_by_training_targets(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(80, 4))
        y = 100 + 40 * rng.normal(size=80)
        state = fit_forest(X, y, mtry=2, min_node_size=5, n_trees=100, seed=3)
        queries = rng.normal(scale=4, size=(200, 4))
        pred = predict_forest(state, queries)
        assert pred.min() >= y.min() and pred.max() <= y.max()

    def test_same_seed_identical(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(50, 3))
        y = X[:, 0] + rng.normal(size=50)
        a = fit_forest(X, y, 2, 5, 50, seed=9)
        b = fit_forest(X, y, 2, 5, 50, seed=9)
        np.testing.assert_array_equal(predict_forest(a, X), predict_forest(b, X))

    def test_different_seeds_differ(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(50, 3))
        y = X[:, 0] + rng.normal(size=50)
        a = fit_forest(X, y, 2, 5, 50, seed=9)
        b = fit_forest(X, y, 2, 5, 50, seed=10)
        assert not np.array_equal(predict_forest(a, X), predict_forest(b, X))

    def test_learns_signal(self):
        rng = np.random.default_rng(15)
        X = rng.normal(size=(300, 3))
        y = 10 * X[:, 0] ** 2 + rng.normal(size=300)
        state = fit_forest(X[:250], y[:250], 2, 5, 200, seed=4)
        pred = predict_forest(state, X[250:])
        r2 = 1 - np.sum((y[250:] - pred) ** 2) / np.sum((y[250:] - y[250:].mean()) ** 2)
        assert r2 > 0.7


class TestSigma:
    def test_two_rows_distance_one(self):
        X = np.array([[0.0], [1.0]])
        assert estimate_sigma(X, seed=1) == pytest.approx(1.0)

    def test_duplicates_ignored(self):
        rng = np.random.default_rng(16)
        X = rng.normal(size=(20, 3))
        doubled = np.vstack([X, X])
        assert estimate_sigma(doubled, seed=2) == pytest.approx(
            estimate_sigma(X, seed=2), rel=0.25
        )

    def test_exact_when_pairs_fit(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(40, 2))  # 780 pairs <= 1000 -> all pairs used
        ii, jj = np.triu_indices(40, k=1)
        d2 = ((X[ii] - X[jj]) ** 2).sum(axis=1)
        assert estimate_sigma(X, seed=3) == pytest.approx(float(np.median(1.0 / d2)))

    def test_sampled_within_quantile_band(self):
        rng = np.random.default_rng(18)
        X = rng.normal(size=(50, 3))  # 1225 pairs -> sampled
        ii, jj = np.triu_indices(50, k=1)
        inv = 1.0 / ((X[ii] - X[jj]) ** 2).sum(axis=1)
        lo, hi = np.quantile(inv, [0.38, 0.62])
        assert lo <= estimate_sigma(X, seed=4) <= hi

    def test_identical_rows_error(self):
        with pytest.raises(ValueError, match="identical"):
            estimate_sigma(np.ones((5, 2)), seed=5)


@numba.njit(nogil=True)
def _pg_qp(K, y, C, eps, iters, step):
    """Dense QP oracle: projected gradient on the (alpha, alpha*) split,
    with a bisection projection onto the box and the balance constraint."""
    n = len(y)
    a = np.zeros(n)
    astar = np.zeros(n)
    ta = np.empty(n)
    ts = np.empty(n)
    kb = np.empty(n)
    for _ in range(iters):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += K[i, j] * (a[j] - astar[j])
            kb[i] = acc
        for i in range(n):
            ta[i] = a[i] - step * (kb[i] + eps - y[i])
            ts[i] = astar[i] - step * (-kb[i] + eps + y[i])
        lo = -2.0 * C
        hi = 2.0 * C
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            total = 0.0
            for i in range(n):
                av = min(max(ta[i] - mid, 0.0), C)
                sv = min(max(ts[i] + mid, 0.0), C)
                total += av - sv
            if total > 0.0:
                lo = mid
            else:
                hi = mid
        mid = 0.5 * (lo + hi)
        for i in range(n):
            a[i] = min(max(ta[i] - mid, 0.0), C)
            astar[i] = min(max(ts[i] + mid, 0.0), C)
    return a - astar


def pg_qp_oracle(K, y, C, eps, iters=60000):
    L = 2.0 * float(np.linalg.eigvalsh(K).max()) + 1e-9
    return _pg_qp(K, y, float(C), float(eps), iters, 1.0 / L)


class TestSVR:
    def test_single_point_predicts_its_target(self):
        state = fit_svr(np.array([[0.3, 0.7]]), np.array([123.0]), sigma=1.0, C=2.0)
        pred = predict_svr(state, np.array([[5.0, -5.0], [0.3, 0.7]]))
        np.testing.assert_allclose(pred, 123.0)

    def test_epsilon_tube_zero_duals(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([10.02, 9.95, 10.05])  # within 0.1 of the mean
        state = fit_svr(X, y, sigma=1.0, C=1.0, epsilon=0.1)
        assert state["n_support"] == 0
        pred = predict_svr(state, X)
        np.testing.assert_allclose(pred, y.mean(), atol=1e-12)

    def test_objective_matches_qp_oracle_on_8_points(self):
        rng = np.random.default_rng(19)
        X = rng.normal(size=(8, 2))
        y = 3.0 * X[:, 0] + rng.normal(size=8)
        sigma, C, eps = 0.7, 2.0, 0.1
        scale = float(y.std(ddof=1))
        K = rbf_kernel(X, X, sigma)
        beta_fit, _, converged, _ = _smo(K, y / scale, C, eps / scale, 1e-4, 200000)
        assert converged
        beta_oracle = pg_qp_oracle(K, y / scale, C, eps / scale)
        obj_fit = svr_objective(K, y / scale, beta_fit, eps / scale)
        obj_oracle = svr_objective(K, y / scale, beta_oracle, eps / scale)
        assert obj_fit <= obj_oracle + 1e-3

    def test_duals_bounded(self):
        rng = np.random.default_rng(20)
        X = rng.normal(size=(30, 2))
        y = 100 + 30 * np.sin(2 * X[:, 0]) + rng.normal(size=30)
        state = fit_svr(X, y, sigma=0.5, C=1.5)
        assert np.all(np.abs(state["beta"]) <= 1.5 + 1e-12)

    def test_fits_smooth_signal(self):
        rng = np.random.default_rng(21)
        X = rng.uniform(-2, 2, size=(120, 1))
        y = 200 + 60 * np.sin(2 * X[:, 0]) + 2 * rng.normal(size=120)
        state = fit_svr(X, y, sigma=estimate_sigma(X, 1), C=4.0)
        pred = predict_svr(state, X)
        r2 = 1 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
        assert r2 > 0.95


class TestKNN:
    def test_k1_memorizes_training_rows(self):
        X, y = random_problem(n=15, p=2, seed=22)
        state = fit_knn(X, y, k=1)
        np.testing.assert_array_equal(predict_knn(state, X), y)

    def test_k_equals_n_predicts_mean(self):
        X, y = random_problem(n=15, p=2, seed=23)
        state = fit_knn(X, y, k=15)
        np.testing.assert_allclose(predict_knn(state, X), y.mean())

    def test_hand_case(self):
        X = np.array([[1.0], [2.0], [5.0]])
        y = np.array([10.0, 20.0, 60.0])
        state = fit_knn(X, y, k=2)
        assert predict_knn(state, np.array([[0.0]]))[0] == pytest.approx(15.0)

    def test_tie_breaks_by_lower_index(self):
        X = np.array([[1.0], [-1.0], [1.0]])
        y = np.array([5.0, 7.0, 100.0])
        state = fit_knn(X, y, k=2)
        # rows 0 and 2 are equidistant duplicates; row 1 is also at distance 1
        # -> the two lowest-index rows among the tie win
        assert predict_knn(state, np.array([[0.0]]))[0] == pytest.approx(6.0)

    def test_exhaustive_sort_oracle(self):
        rng = np.random.default_rng(24)
        X = rng.normal(size=(60, 4))
        y = rng.normal(size=60)
        state = fit_knn(X, y, k=5)
        queries = rng.normal(size=(200, 4))
        got = predict_knn(state, queries)
        for i, q in enumerate(queries):
            d = np.sqrt(((X - q) ** 2).sum(axis=1))
            order = np.argsort(d, kind="stable")[:5]
            assert got[i] == pytest.approx(float(y[order].mean()), rel=1e-12)


class TestMARS:
    def test_line_recovered_by_hinge_pair(self):
        x = np.linspace(0, 10, 40)[:, None]
        y = 3.0 + 2.0 * x[:, 0]
        state = fit_mars(x, y, degree=1, nprune=10)
        pred = predict_mars(state, x)
        r2 = 1 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
        assert r2 >= 0.999

    def test_hinge_evaluation(self):
        assert hinge(4.0, 2.0, 1) == 2.0
        assert hinge(4.0, 2.0, -1) == 0.0
        assert hinge(1.0, 2.0, -1) == 1.0

    def test_knot_matches_exhaustive_scan(self):
        rng = np.random.default_rng(25)
        x = np.linspace(0, 10, 20)
        y = 1.0 + 1.5 * np.maximum(0.0, x - 3.15) + 0.05 * rng.normal(size=20)
        fwd = forward_pass(x[:, None], y, degree=1)
        first_knot = fwd["terms"][1][0][1]
        knots = np.unique(x)  # 20 values, under the knot cap: exhaustive
        best = None
        for t in knots:
            A = np.column_stack([
                np.ones(20),
                np.maximum(0.0, x - t),
                np.maximum(0.0, t - x),
            ])
            rss = float(np.sum((y - A @ np.linalg.lstsq(A, y, rcond=None)[0]) ** 2))
            if best is None or rss < best[0]:
                best = (rss, t)
        pos_got = int(np.searchsorted(knots, first_knot))
        pos_best = int(np.searchsorted(knots, best[1]))
        assert abs(pos_got - pos_best) <= 1

    def test_interaction_requires_degree_two(self):
        rng = np.random.default_rng(26)
        X = rng.uniform(-1, 1, size=(150, 2))
        y = 5.0 * np.maximum(0, X[:, 0]) * np.maximum(0, X[:, 1]) + 0.05 * rng.normal(size=150)
        add = fit_mars(X, y, degree=1, nprune=15)
        inter = fit_mars(X, y, degree=2, nprune=15)
        rss_add = np.sum((y - predict_mars(add, X)) ** 2)
        rss_inter = np.sum((y - predict_mars(inter, X)) ** 2)
        assert rss_inter < 0.5 * rss_add
        assert max(len(t) for t in inter["terms"]) == 2

    def test_nprune_bounds_terms(self):
        rng = np.random.default_rng(27)
        X = rng.normal(size=(80, 3))
        y = X[:, 0] ** 2 + np.abs(X[:, 1]) + 0.1 * rng.normal(size=80)
        state = fit_mars(X, y, degree=1, nprune=5)
        assert len(state["terms"]) <= 5

    def test_needs_four_rows(self):
        with pytest.raises(ValueError, match="at least 4"):
            fit_mars(np.ones((3, 1)), np.ones(3), 1, 5)


class TestPredictContract:
    def test_linear_fitted_values(self):
        X, y = random_problem(n=25, p=3, seed=28)
        model = fit_model(ModelKind.LINEAR, {}, X, y, NAMES3, seed=1)
        Z = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
        expected = Z @ model.state["coef"] + model.state["intercept"]
        np.testing.assert_allclose(predict(model, X), expected, atol=1e-10)

    def test_duplicated_queries_identical(self):
        X, y = random_problem(n=30, p=3, seed=29)
        for kind in ModelKind:
            hp = default_grid(kind, 3)[0]
            model = fit_model(kind, hp, X, y, NAMES3, seed=2)
            q = np.vstack([X[:5], X[:5]])
            pred = predict(model, q)
            np.testing.assert_array_equal(pred[:5], pred[5:])

    def test_missing_feature_errors(self):
        X, y = random_problem()
        model = fit_model(ModelKind.LINEAR, {}, X, y, NAMES3, seed=1)
        with pytest.raises(ValueError, match="missing kept features"):
            predict(model, X[:, :2], feature_names=("a", "b"))

    def test_refit_determinism_bit_identical(self):
        X, y = random_problem(n=40, p=3, seed=30, noise=0.5)
        for kind in ModelKind:
            hp = default_grid(kind, 3)[0]
            a = fit_model(kind, hp, X, y, NAMES3, seed=11)
            b = fit_model(kind, hp, X, y, NAMES3, seed=11)
            np.testing.assert_array_equal(predict(a, X), predict(b, X))

    def test_serialization_round_trip_bit_identical(self):
        X, y = random_problem(n=30, p=3, seed=31, noise=0.5)
        queries = np.random.default_rng(0).normal(size=(10, 3))
        for kind in ModelKind:
            hp = dict(default_grid(kind, 3)[0])
            if kind is ModelKind.FOREST:
                hp["n_trees"] = 20
            model = fit_model(kind, hp, X, y, NAMES3, seed=3)
            clone = model_from_json(model_to_json(model))
            np.testing.assert_array_equal(predict(model, queries), predict(clone, queries))

    def test_bounded_learners(self):
        X, y = random_problem(n=50, p=3, seed=32, noise=2.0)
        queries = np.random.default_rng(1).normal(scale=5, size=(100, 3))
        for kind in (ModelKind.TREE, ModelKind.FOREST, ModelKind.KNN):
            hp = dict(default_grid(kind, 3)[0])
            if kind is ModelKind.FOREST:
                hp["n_trees"] = 50
            model = fit_model(kind, hp, X, y, NAMES3, seed=4)
            pred = predict(model, queries)
            assert pred.min() >= y.min() - 1e-9
            assert pred.max() <= y.max() + 1e-9

    def test_family_fits_match_solo_fits(self):
        X, y = random_problem(n=40, p=3, seed=33, noise=0.5)
        for kind in ModelKind:
            grid = default_grid(kind, 3)[:6]
            fam = fit_model_family(kind, grid, X, y, NAMES3, seed=5)
            for hp, fam_model in zip(grid, fam):
                solo = fit_model(kind, hp, X, y, NAMES3, seed=5)
                np.testing.assert_allclose(
                    predict(fam_model, X), predict(solo, X), atol=1e-9
                )


class TestMonotoneConcentration:
    def test_flexible_learners_increase_with_concentration(self):
        records, _ = generate_synthetic(
            SyntheticConfig(n_studies=30, rows_per_study=20, noise_sd=15.0,
                            seed=20260810, study_offset_sd=10.0)
        )
        table = polymer_subset(records, "SYNTHPOLY")
        rng = np.random.default_rng(6)
        base = table.X[rng.choice(table.n, size=40, replace=False)]
        c_grid = np.linspace(7, 19, 5)
        for kind, hp in (
            (ModelKind.FOREST, {"mtry": 3, "min_node_size": 5, "n_trees": 200}),
            (ModelKind.KNN, {"k": 5}),
            (ModelKind.SVR_RBF, {"sigma": "auto", "C": 4.0, "epsilon": 0.1}),
        ):
            model = fit_model(kind, hp, table.X, table.y, table.feature_names, seed=7)
            medians = []
            for c in c_grid:
                rows = base.copy()
                rows[:, 0] = c
                medians.append(float(np.median(predict(model, rows, table.feature_names))))
            assert medians[-1] > medians[0] + 30.0
            assert all(b >= a - 8.0 for a, b in zip(medians, medians[1:]))
