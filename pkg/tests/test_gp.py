import dataclasses
import json

import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.stats import kstest

from conftest import fitted_model, random_dataset
from ppbo.geometry import (
    FeasibleInterval,
    ProjectiveQuery,
    coordinate_projection,
    query_with_reference,
)
from ppbo.gp import (
    Hyperparameters,
    Observation,
    SchemaError,
    TgnSchedule,
    fit_map,
    functional_T,
    kernel_eval,
    laplace_precision,
    load_model,
    make_observation,
    model_from_dict,
    model_to_dict,
    posterior_mean_argmax,
    predict,
    predict_mean,
    sample_pseudo_observations,
    save_model,
    smoothed_probit,
    smoothed_probit_quadrature,
)

UNIT = FeasibleInterval(0.0, 1.0)


class TestKernel:
    def test_zero_distance_gives_amplitude_squared(self):
        h = Hyperparameters(sigma_f=1.7, l=0.3, sigma=0.1)
        p = np.array([0.2, 0.8])
        assert kernel_eval(p, p, h) == pytest.approx(1.7**2)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        h = Hyperparameters.default(3)
        for _ in range(20):
            p, q = rng.uniform(size=3), rng.uniform(size=3)
            assert kernel_eval(p, q, h) == pytest.approx(kernel_eval(q, p, h), rel=1e-15)

    def test_closed_form_value(self):
        # sigma_f = 1, l = 1, squared distance 2 -> exp(-1)
        h = Hyperparameters(sigma_f=1.0, l=1.0, sigma=0.1)
        val = kernel_eval(np.array([0.0, 0.0]), np.array([1.0, 1.0]), h)
        assert val == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kernel_eval(np.zeros(2), np.zeros(3), Hyperparameters.default(2))

    def test_hyperparameters_must_be_positive(self):
        with pytest.raises(ValueError):
            Hyperparameters(sigma_f=0.0, l=0.1, sigma=0.1)
        with pytest.raises(ValueError):
            Hyperparameters(sigma_f=1.0, l=-1.0, sigma=0.1)


class TestSmoothedProbit:
    def test_value_at_zero(self):
        assert smoothed_probit(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_reflection_identity(self):
        z = np.linspace(-8, 8, 101)
        np.testing.assert_allclose(smoothed_probit(z) + smoothed_probit(-z), 1.0, atol=1e-14)

    def test_value_at_one_versus_quadrature(self):
        # closed form Phi(1/sqrt(2)) against the 64-node integral route
        val = smoothed_probit(1.0)
        assert val == pytest.approx(0.7602499, abs=1e-6)
        assert val == pytest.approx(smoothed_probit_quadrature(1.0, 64), abs=1e-10)

    def test_matches_quadrature_on_grid(self):
        z = np.arange(-6.0, 6.0 + 1e-9, 0.1)
        diff = np.abs(smoothed_probit(z) - smoothed_probit_quadrature(z, 64))
        assert diff.max() < 1e-8

    def test_strictly_increasing(self):
        z = np.linspace(-10, 10, 2001)
        assert np.all(np.diff(smoothed_probit(z)) > 0)


class TestPseudoObservationSampling:
    def test_uniform_phase_passes_ks(self):
        sched = TgnSchedule(n_uniform=10**9)
        rng = np.random.default_rng(0)
        draws = sample_pseudo_observations(0.37, UNIT, 100_000, sched, 12, rng)
        stat = kstest(draws, "uniform").statistic
        assert stat < 0.01

    def test_late_phase_concentrates_symmetrically(self):
        sched = TgnSchedule(n_uniform=0)
        rng = np.random.default_rng(1)
        draws = sample_pseudo_observations(0.5, UNIT, 100_000, sched, 60, rng)
        assert abs(draws.mean() - 0.5) < 0.02
        assert draws.std() < 0.1  # scale floor 0.05 keeps it tight

    def test_gap_from_alpha_enforced(self):
        sched = TgnSchedule(n_uniform=0, scale_min=0.05)
        rng = np.random.default_rng(2)
        draws = sample_pseudo_observations(0.25, UNIT, 5000, sched, 50, rng)
        assert np.min(np.abs(draws - 0.25)) >= 1e-6

    def test_m_zero_rejected(self):
        with pytest.raises(ValueError):
            sample_pseudo_observations(0.5, UNIT, 0, TgnSchedule(2), 0, np.random.default_rng(0))

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            TgnSchedule(n_uniform=2, scale0=0.01, scale_min=0.05)
        with pytest.raises(ValueError):
            TgnSchedule(n_uniform=2, shape=1.5)
        with pytest.raises(ValueError):
            TgnSchedule(n_uniform=2, decay=1.5)

    def test_observation_requires_beta_gap(self):
        q = ProjectiveQuery(coordinate_projection(2, 0), np.array([0.0, 0.5]))
        with pytest.raises(ValueError):
            Observation(alpha=0.5, query=q, betas=np.array([0.5 + 1e-9]))


def _fd_gradient(dataset, hyper, f, eps=1e-5):
    g = np.zeros_like(f)
    for i in range(f.size):
        fp, fm = f.copy(), f.copy()
        fp[i] += eps
        fm[i] -= eps
        g[i] = (functional_T(dataset, hyper, fp)[0] - functional_T(dataset, hyper, fm)[0]) / (
            2 * eps
        )
    return g


def _fd_hessian(dataset, hyper, f, eps=1e-5):
    H = np.zeros((f.size, f.size))
    for i in range(f.size):
        fp, fm = f.copy(), f.copy()
        fp[i] += eps
        fm[i] -= eps
        H[:, i] = (
            functional_T(dataset, hyper, fp)[1] - functional_T(dataset, hyper, fm)[1]
        ) / (2 * eps)
    return H


class TestFunctionalT:
    def test_value_at_zero_latent(self):
        rng = np.random.default_rng(5)
        ds = random_dataset(rng, 3, 5, 2)
        n = sum(1 + o.m for o in ds)
        hyper = Hyperparameters.default(2)
        val, grad, _ = functional_T(ds, hyper, np.zeros(n))
        # every comparison term is g(0) = 1/2, averaged per observation
        assert val == pytest.approx(-0.5 * len(ds), abs=1e-12)

    @pytest.mark.parametrize("n_obs,m,dim", [(1, 4, 2), (2, 16, 2), (5, 4, 6), (2, 16, 6)])
    def test_gradient_matches_finite_differences(self, n_obs, m, dim):
        rng = np.random.default_rng(n_obs * 100 + m + dim)
        ds = random_dataset(rng, n_obs, m, dim)
        hyper = Hyperparameters.default(dim)
        n = sum(1 + o.m for o in ds)
        f = 0.7 * rng.standard_normal(n)
        _, grad, _ = functional_T(ds, hyper, f)
        g_fd = _fd_gradient(ds, hyper, f)
        assert np.linalg.norm(g_fd - grad) / np.linalg.norm(grad) < 1e-4

    @pytest.mark.parametrize("n_obs,m,dim", [(1, 4, 2), (2, 8, 3), (3, 4, 6)])
    def test_hessian_matches_finite_differences(self, n_obs, m, dim):
        rng = np.random.default_rng(n_obs * 17 + m + dim)
        ds = random_dataset(rng, n_obs, m, dim)
        hyper = Hyperparameters.default(dim)
        n = sum(1 + o.m for o in ds)
        f = 0.7 * rng.standard_normal(n)
        _, _, hess = functional_T(ds, hyper, f)
        H_fd = _fd_hessian(ds, hyper, f)
        assert np.linalg.norm(H_fd - hess) / np.linalg.norm(hess) < 1e-3

    def test_nonfinite_latent_rejected(self):
        rng = np.random.default_rng(0)
        ds = random_dataset(rng, 1, 4, 2)
        with pytest.raises(ValueError):
            functional_T(ds, Hyperparameters.default(2), np.full(5, np.nan))


class TestFitMap:
    def test_winner_above_losers_and_matches_generic_optimizer(self):
        rng = np.random.default_rng(11)
        ds = random_dataset(rng, 1, 8, 2)
        hyper = Hyperparameters.default(2)
        model = fit_map(ds, hyper)
        winner = model.f_map[model.winner_slots[0]]
        losers = np.delete(model.f_map, model.winner_slots[0])
        assert np.all(winner >= losers - 1e-9)

        # independent route: generic unconstrained maximization from restarts
        def neg_t(f):
            return -functional_T(ds, hyper, f)[0]

        def neg_grad(f):
            return -functional_T(ds, hyper, f)[1]

        best = -np.inf
        for k in range(10):
            start = np.random.default_rng(k).standard_normal(model.n) * 0.5
            res = minimize(neg_t, start, jac=neg_grad, method="L-BFGS-B")
            best = max(best, -res.fun)
        ours = functional_T(ds, hyper, model.f_map)[0]
        assert ours >= best - 1e-6

    def test_empty_dataset_gives_prior_model(self):
        hyper = Hyperparameters.default(2)
        model = fit_map([], hyper, dim=2)
        assert model.is_empty and model.n == 0
        mu, cov = predict(model, np.array([[0.2, 0.8]]))
        assert mu[0] == 0.0
        assert cov[0, 0] == pytest.approx(hyper.sigma_f**2)

    def test_duplicated_observation_fits_via_jitter(self):
        rng = np.random.default_rng(4)
        ds = random_dataset(rng, 1, 6, 2)
        dup = Observation(alpha=ds[0].alpha, query=ds[0].query, betas=ds[0].betas)
        model = fit_map([ds[0], dup], Hyperparameters.default(2))
        w0, w1 = model.f_map[model.winner_slots]
        assert abs(w0 - w1) < 1e-6

    def test_trace_non_decreasing_and_tolerance(self):
        for seed in range(6):
            model = fitted_model(seed=seed, n_obs=3, m=8)
            trace = np.array(model.fit_trace)
            assert np.all(np.diff(trace) >= 0.0)
            assert model.grad_norm < 1e-5
            assert trace[-1] >= trace[0]

    def test_objective_not_below_zero_start(self):
        model = fitted_model(seed=9, n_obs=2, m=6)
        ds, hyper = list(model.dataset), model.hyper
        t_map = functional_T(ds, hyper, model.f_map)[0]
        t_zero = functional_T(ds, hyper, np.zeros(model.n))[0]
        assert t_map >= t_zero

    def test_bitwise_deterministic(self):
        a = fitted_model(seed=21, n_obs=3, m=8)
        b = fitted_model(seed=21, n_obs=3, m=8)
        assert np.array_equal(a.f_map, b.f_map)

    def test_warm_start_preserves_validity(self):
        rng = np.random.default_rng(31)
        ds = random_dataset(rng, 3, 6, 2)
        hyper = Hyperparameters.default(2)
        cold = fit_map(ds[:2], hyper)
        warm = fit_map(ds, hyper, warm_start=cold.f_map)
        assert warm.grad_norm < 1e-5
        t_map = functional_T(ds, hyper, warm.f_map)[0]
        t_zero = functional_T(ds, hyper, np.zeros(warm.n))[0]
        assert t_map >= t_zero


class TestLaplacePrecision:
    def test_no_curvature_reduces_to_prior_precision(self, small_model):
        flat = dataclasses.replace(small_model, Lambda=np.zeros_like(small_model.Lambda))
        H = laplace_precision(flat)
        Sigma_inv = np.linalg.inv(small_model.Sigma)
        np.testing.assert_allclose(H, Sigma_inv, rtol=1e-6, atol=1e-8)

    def test_positive_definite_after_repair(self):
        for seed in range(4):
            model = fitted_model(seed=40 + seed, n_obs=3, m=8)
            H = laplace_precision(model)
            assert np.linalg.eigvalsh(H).min() > 0

    def test_symmetry(self, small_model):
        H = laplace_precision(small_model)
        assert np.max(np.abs(H - H.T)) < 1e-10


class TestPredict:
    def test_mean_reproduces_map_at_training_locations(self):
        for seed in range(4):
            model = fitted_model(seed=60 + seed, n_obs=3, m=8)
            mu = predict_mean(model, model.locations)
            assert np.max(np.abs(mu - model.f_map)) < 1e-8

    def test_prior_reversion_far_from_data(self):
        # short lengthscale so a cube-diagonal distance decorrelates fully
        hyper = Hyperparameters(sigma_f=1.0, l=0.01, sigma=0.1)
        q = ProjectiveQuery(coordinate_projection(2, 0), np.array([0.0, 0.0]))
        obs = make_observation(q, 0.4, 8, TgnSchedule(4), 0, np.random.default_rng(0))
        model = fit_map([obs], hyper)
        far = np.array([[0.5, 0.95]])
        mu, cov = predict(model, far)
        assert abs(mu[0]) < 1e-6
        assert abs(cov[0, 0] - hyper.sigma_f**2) < 1e-6

    def test_two_point_covariance_symmetric_psd(self):
        rng = np.random.default_rng(77)
        for seed in range(4):
            model = fitted_model(seed=80 + seed, n_obs=2, m=8)
            pts = rng.uniform(size=(2, 2))
            _, cov = predict(model, pts)
            assert np.max(np.abs(cov - cov.T)) < 1e-12
            assert np.linalg.eigvalsh(cov).min() >= -1e-8

    def test_variances_nonnegative(self, medium_model):
        rng = np.random.default_rng(5)
        _, cov = predict(medium_model, rng.uniform(size=(20, 2)))
        assert np.diag(cov).min() >= 0.0


class TestPosteriorMeanArgmax:
    def test_empty_model_returns_center(self):
        model = fit_map([], Hyperparameters.default(3), dim=3)
        x, val = posterior_mean_argmax(model)
        np.testing.assert_array_equal(x, [0.5, 0.5, 0.5])
        assert val == 0.0

    def test_dominates_training_locations(self, small_model):
        _, mu_star = posterior_mean_argmax(small_model, 10, np.random.default_rng(0))
        train_mu = predict_mean(small_model, small_model.locations)
        assert mu_star >= train_mu.max() - 1e-12

    def test_finds_peak_of_unimodal_posterior(self):
        # one strong observation: mean peaks near the winner location
        q = ProjectiveQuery(coordinate_projection(2, 1), np.array([0.3, 0.0]))
        obs = make_observation(q, 0.7, 25, TgnSchedule(0), 5, np.random.default_rng(0))
        model = fit_map([obs], Hyperparameters.default(2))
        x_star, _ = posterior_mean_argmax(model, 20, np.random.default_rng(1))

        grid = np.linspace(0, 1, 101)
        xx, yy = np.meshgrid(grid, grid, indexing="ij")
        dense = predict_mean(model, np.column_stack([xx.ravel(), yy.ravel()]))
        best = np.column_stack([xx.ravel(), yy.ravel()])[np.argmax(dense)]
        assert np.max(np.abs(x_star - best)) <= 0.05

    def test_deterministic_under_seed(self, medium_model):
        a = posterior_mean_argmax(medium_model, 10, np.random.default_rng(3))
        b = posterior_mean_argmax(medium_model, 10, np.random.default_rng(3))
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]


class TestLineConsistency:
    def test_separable_oracle_answer_is_recovered_on_the_line(self):
        # noiseless separable objective; the answered alpha should be the
        # argmax of the fitted mean restricted to the queried segment
        center = np.array([0.62, 0.31])
        q = ProjectiveQuery(coordinate_projection(2, 0), np.array([0.0, 0.31]))
        alpha_star = center[0]  # line minimizer of |p - c|^2 along e_1
        obs = make_observation(q, alpha_star, 25, TgnSchedule(2), 0, np.random.default_rng(0))
        model = fit_map([obs], Hyperparameters.default(2))
        grid = np.linspace(0, 1, 101)
        pts = grid[:, None] * q.xi.values[None, :] + q.x[None, :]
        mu = predict_mean(model, pts)
        assert abs(grid[np.argmax(mu)] - alpha_star) <= 0.1


class TestSerialization:
    def test_round_trip_predictions_bitwise(self, tmp_path, medium_model):
        path = tmp_path / "model.json"
        save_model(medium_model, path)
        loaded = load_model(path)
        pts = np.random.default_rng(0).uniform(size=(7, 2))
        mu0, cov0 = predict(medium_model, pts)
        mu1, cov1 = predict(loaded, pts)
        assert np.array_equal(mu0, mu1)
        assert np.array_equal(cov0, cov1)
        assert np.array_equal(loaded.f_map, medium_model.f_map)

    def test_truncated_file_rejected(self, tmp_path, small_model):
        path = tmp_path / "model.json"
        save_model(small_model, path)
        raw = path.read_text()
        path.write_text(raw[: len(raw) // 2])
        with pytest.raises(SchemaError):
            load_model(path)

    def test_unknown_version_rejected(self, small_model):
        doc = model_to_dict(small_model)
        doc["version"] = 999
        with pytest.raises(SchemaError, match="version"):
            model_from_dict(doc)

    def test_empty_model_round_trip(self):
        model = fit_map([], Hyperparameters.default(4), dim=4)
        clone = model_from_dict(json.loads(json.dumps(model_to_dict(model))))
        assert clone.is_empty and clone.dim == 4
