import math
from dataclasses import replace

import numpy as np
import pytest

from dphmc.metrics import effective_sample_size
from dphmc.models import (
    BananaSpec,
    GaussianModel,
    GaussianModelSpec,
    Model,
    gaussian_posterior,
    make_model,
    potential_and_grad,
    synth_dataset,
)
from dphmc.samplers import (
    DivergenceError,
    HmcConfig,
    PenaltyConfig,
    SgldConfig,
    SgnhtConfig,
    dp_hmc_run,
    dp_penalty_run,
    dp_sgld_run,
    dp_sgnht_run,
    halton_steps,
    hmc_run,
    leapfrog_noisy,
    penalty_exponent,
    rwmh_run,
)


class FreeParticle(Model):
    """Flat target: all gradients vanish, log-densities are zero."""

    def __init__(self, d=1):
        self.d = d

    def log_prior(self, theta):
        return 0.0

    def grad_log_prior(self, theta):
        return np.zeros(self.d)

    def log_lik_points(self, X, theta):
        return np.zeros(X.shape[0])

    def grad_log_lik_points(self, X, theta):
        return np.zeros((X.shape[0], self.d))


def standard_gaussian_model():
    """U(theta) = theta^2 / 2 via a unit prior and no data."""
    return GaussianModel(GaussianModelSpec(d=1, n=0, mu0=0.0, sigma0=1.0, Sigma=np.eye(1)))


@pytest.fixture
def gaussian_1d():
    rng = np.random.default_rng(101)
    spec = GaussianModelSpec(d=1, n=100, mu0=0.0, sigma0=2.0, Sigma=np.eye(1))
    return synth_dataset(spec, rng)


class TestHaltonSteps:
    def test_range(self):
        seq = halton_steps(0.3, 1000, seed=4)
        assert np.all(seq.values >= 0.5 * 0.3)
        assert np.all(seq.values <= 0.3)

    def test_determinism(self):
        a = halton_steps(1.0, 64, seed=9)
        b = halton_steps(1.0, 64, seed=9)
        assert np.array_equal(a.values, b.values)

    def test_low_discrepancy_mean(self):
        # uniform on [0.5, 1] has mean 0.75; the Halton stream nails it fast
        seq = halton_steps(1.0, 10**4, seed=77)
        assert seq.values.mean() == pytest.approx(0.75, abs=0.01)

    def test_distinct_seeds_differ(self):
        assert not np.array_equal(
            halton_steps(1.0, 32, seed=1).values, halton_steps(1.0, 32, seed=2).values
        )


class TestLeapfrog:
    def test_hand_executed_single_step(self):
        # U = theta^2/2, eta = 0.1, L = 1, start (1, 0):
        #   p <- 0 - 0.05 * 1        = -0.05
        #   theta <- 1 + 0.1*(-0.05) = 0.995
        #   p <- -0.05 - 0.05*0.995  = -0.09975
        model = standard_gaussian_model()
        res = leapfrog_noisy(
            model,
            np.empty((0, 1)),
            np.array([1.0]),
            np.array([0.0]),
            eta=0.1,
            L=1,
            mass=None,
            b_g=math.inf,
            sigma_g=0.0,
            rng=np.random.default_rng(0),
        )
        assert res.theta[0] == pytest.approx(0.995, abs=1e-12)
        assert res.p[0] == pytest.approx(-0.09975, abs=1e-12)
        assert res.grad_evals == 2

    def test_free_particle(self):
        model = FreeParticle(d=3)
        theta = np.array([1.0, -2.0, 0.5])
        p = np.array([0.3, 0.1, -0.7])
        res = leapfrog_noisy(
            model, np.empty((0, 3)), theta, p, 0.2, 5, None, math.inf, 0.0,
            np.random.default_rng(0),
        )
        assert np.allclose(res.theta, theta + 5 * 0.2 * p, atol=1e-12)
        assert np.allclose(res.p, p, atol=1e-12)
        assert res.grad_evals == 6

    def test_involution_at_zero_noise(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        rng = np.random.default_rng(3)
        for _ in range(100):
            theta = rng.normal(size=1)
            p = rng.normal(size=1)
            fwd = leapfrog_noisy(
                model, gaussian_1d.X, theta, p, 0.05, 7, None, math.inf, 0.0, rng
            )
            back = leapfrog_noisy(
                model, gaussian_1d.X, fwd.theta, -fwd.p, 0.05, 7, None, math.inf, 0.0, rng
            )
            assert np.allclose(back.theta, theta, atol=1e-9)
            assert np.allclose(-back.p, p, atol=1e-9)

    def test_gradient_count_scales_with_length(self):
        model = standard_gaussian_model()
        for L in [1, 2, 10]:
            res = leapfrog_noisy(
                model, np.empty((0, 1)), np.array([0.5]), np.array([0.2]), 0.1, L,
                None, math.inf, 0.0, np.random.default_rng(0),
            )
            assert res.grad_evals == L + 1

    def test_divergence_carries_spent_gradients(self):
        model = make_model(BananaSpec(n=4))
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [0.0, 2.0]])
        with pytest.raises(DivergenceError) as excinfo:
            leapfrog_noisy(
                model, X, np.array([50.0, 50.0]), np.array([1.0, 1.0]), 1e12, 10,
                None, math.inf, 0.0, np.random.default_rng(0),
            )
        assert excinfo.value.grad_evals >= 1


class TestDpHmc:
    def test_ledger_counts_exact(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        config = HmcConfig(eta=0.05, L=10, k=50, b_l=2.0, b_g=0.5, tau_l=0.5, tau_g=0.5)
        out = dp_hmc_run(model, gaussian_1d.X, config, np.array([0.0]), seed=7)
        assert out.divergences == 0
        assert out.ledger.llr_queries == 50
        assert out.ledger.grad_queries == 50 * 11
        assert out.ledger.mu == pytest.approx(50 / (2 * 0.25) + 550 / (2 * 0.25), rel=1e-15)

    def test_zero_noise_bitwise_equal_to_hmc(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        config = HmcConfig(eta=0.1, L=5, k=200, tau_l=0.0, tau_g=0.0)
        a = dp_hmc_run(model, gaussian_1d.X, config, np.array([1.0]), seed=42)
        b = hmc_run(model, gaussian_1d.X, config, np.array([1.0]), seed=42)
        assert np.array_equal(a.samples, b.samples)
        assert np.array_equal(a.accepted, b.accepted)
        assert np.array_equal(a.etas, b.etas)

    def test_zero_noise_acceptance_equals_energy_difference(self, gaussian_1d):
        # with no noise and no clipping the penalised exponent reduces to
        # H(theta, p) - H(theta', p')
        model = GaussianModel(gaussian_1d.spec)
        X = gaussian_1d.X
        rng = np.random.default_rng(11)
        for _ in range(10):
            theta = rng.normal(size=1)
            p = rng.normal(size=1)
            res = leapfrog_noisy(model, X, theta, p, 0.1, 5, None, math.inf, 0.0, rng)
            ratios = model.log_lik_points(X, res.theta) - model.log_lik_points(X, theta)
            exponent = (
                float(ratios.sum())
                + (model.log_prior(res.theta) - model.log_prior(theta))
                + 0.5 * float(p @ p)
                - 0.5 * float(res.p @ res.p)
            )
            u_start, _ = potential_and_grad(model, X, theta)
            u_end, _ = potential_and_grad(model, X, res.theta)
            h_diff = (u_start + 0.5 * float(p @ p)) - (u_end + 0.5 * float(res.p @ res.p))
            assert exponent == pytest.approx(h_diff, abs=1e-8)

    def test_posterior_mean_recovery_2d(self):
        rng = np.random.default_rng(2024)
        spec = GaussianModelSpec(d=2, n=100, mu0=0.0, sigma0=3.0)
        dataset = synth_dataset(spec, rng)
        model = GaussianModel(dataset.spec)
        post = gaussian_posterior(dataset.spec, dataset.X)
        config = HmcConfig(eta=0.08, L=10, k=3000)
        out = hmc_run(model, dataset.X, config, post.mean.copy(), seed=5)
        kept = out.samples[out.k // 2 :]
        stds = np.sqrt(np.diag(post.cov))
        for j in range(2):
            ess = effective_sample_size(kept[:, j])
            se = stds[j] / math.sqrt(ess)
            assert abs(kept[:, j].mean() - post.mean[j]) < 4 * se

    def test_divergent_iterations_counted_and_rejected(self):
        model = make_model(BananaSpec(n=8))
        rng = np.random.default_rng(0)
        X = synth_dataset(BananaSpec(n=8), rng).X
        config = HmcConfig(eta=5e5, L=5, k=20)
        out = hmc_run(model, X, config, np.array([3.0, 3.0]), seed=1)
        assert out.divergences > 0
        assert np.all(np.isfinite(out.samples))
        assert not out.accepted[np.isnan(out.llr_clip_frac)].any()

    def test_etas_follow_halton_jitter(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        config = HmcConfig(eta=0.2, L=2, k=100)
        out = hmc_run(model, gaussian_1d.X, config, np.array([0.0]), seed=3)
        assert np.all(out.etas >= 0.1) and np.all(out.etas <= 0.2)
        assert len(np.unique(out.etas)) > 50

    def test_acceptance_penalty_monotone_in_tau(self):
        # fixed proposal: the acceptance exponent strictly decreases with tau_l
        c_l, delta_h = 0.7, 0.4
        exponents = [
            penalty_exponent(delta_h, 2.0 * tau * c_l) for tau in [0.0, 0.5, 1.0, 2.0, 4.0]
        ]
        assert all(a > b for a, b in zip(exponents, exponents[1:]))

    def test_noise_lowers_acceptance_on_average(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        base = HmcConfig(eta=0.1, L=5, k=400)
        quiet = hmc_run(model, gaussian_1d.X, base, np.array([0.0]), seed=9)
        noisy_cfg = replace(base, tau_l=1.0, b_l=5.0)
        noisy = dp_hmc_run(model, gaussian_1d.X, noisy_cfg, np.array([0.0]), seed=9)
        assert noisy.accept_rate < quiet.accept_rate


class TestDpPenalty:
    def test_zero_noise_is_plain_rwmh(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        config = PenaltyConfig(proposal_std=0.3, k=500, tau_l=0.0)
        a = dp_penalty_run(model, gaussian_1d.X, config, np.array([0.2]), seed=21)
        b = rwmh_run(model, gaussian_1d.X, config, np.array([0.2]), seed=21)
        assert np.array_equal(a.samples, b.samples)

    def test_degenerate_proposal_scale(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        config = PenaltyConfig(proposal_std=0.0, k=50, tau_l=1.0, b_l=1.0)
        out = dp_penalty_run(model, gaussian_1d.X, config, np.array([0.7]), seed=2)
        assert np.all(out.samples == 0.7)
        assert out.accept_rate == 1.0

    def test_ledger_one_llr_query_per_iteration(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        config = PenaltyConfig(proposal_std=0.2, k=77, tau_l=10.0, b_l=2.0)
        out = dp_penalty_run(model, gaussian_1d.X, config, np.array([0.0]), seed=3)
        assert out.ledger.llr_queries == 77
        assert out.ledger.grad_queries == 0

    def test_posterior_mean_recovery_1d(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        post = gaussian_posterior(gaussian_1d.spec, gaussian_1d.X)
        config = PenaltyConfig(proposal_std=0.2, k=6000)
        out = rwmh_run(model, gaussian_1d.X, config, post.mean.copy(), seed=13)
        kept = out.samples[out.k // 2 :, 0]
        se = math.sqrt(post.cov[0, 0] / effective_sample_size(kept))
        assert abs(kept.mean() - post.mean[0]) < 4 * se

    def test_tiny_proposal_acceptance_near_one(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        post = gaussian_posterior(gaussian_1d.spec, gaussian_1d.X)
        config = PenaltyConfig(proposal_std=1e-6, k=2000)
        out = rwmh_run(model, gaussian_1d.X, config, post.mean.copy(), seed=17)
        assert out.accept_rate > 0.999


class TestClippingStudySamplers:
    def test_infinite_bound_means_no_clipping(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        config = HmcConfig(eta=0.1, L=5, k=100)
        out = hmc_run(model, gaussian_1d.X, config, np.array([0.0]), seed=4)
        assert out.mean_llr_clip_frac == 0.0
        assert out.mean_grad_clip_frac == 0.0

    def test_zero_bound_clips_every_ratio(self, gaussian_1d):
        # R = 0: acceptance driven by the prior ratio and kinetic term only
        model = GaussianModel(gaussian_1d.spec)
        config = PenaltyConfig(proposal_std=0.5, k=200, b_l=0.0)
        out = rwmh_run(model, gaussian_1d.X, config, np.array([0.0]), seed=8)
        moved = np.unique(out.samples).size > 1
        assert moved
        clipped_iters = out.llr_clip_frac[out.llr_clip_frac > 0]
        assert clipped_iters.size > 0

    def test_clip_fraction_monotone_in_bound(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        fracs = []
        for b_l in [math.inf, 1.0, 0.1, 0.01]:
            config = PenaltyConfig(proposal_std=0.3, k=300, b_l=b_l)
            out = rwmh_run(model, gaussian_1d.X, config, np.array([0.0]), seed=6)
            fracs.append(out.mean_llr_clip_frac)
        assert all(a <= b + 1e-12 for a, b in zip(fracs, fracs[1:]))


class TestSgld:
    def test_full_batch_zero_noise_is_plain_ula(self):
        model = standard_gaussian_model()
        X = np.empty((0, 1))
        config = SgldConfig(eta=0.01, k=1, q=1.0)
        theta0 = np.array([2.0])
        out = dp_sgld_run(model, X, config, theta0, seed=33)
        # reproduce the single update with the same stream
        ss = np.random.SeedSequence(33)
        rng = np.random.default_rng(ss)
        grad = -theta0  # grad log pi for the standard Gaussian
        expected = theta0 + 0.5 * 0.01 * grad + math.sqrt(0.01) * rng.standard_normal(1)
        assert np.allclose(out.samples[0], expected)

    def test_small_step_targets_posterior(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        post = gaussian_posterior(gaussian_1d.spec, gaussian_1d.X)
        config = SgldConfig(eta=0.002, k=20000, q=1.0)
        out = dp_sgld_run(model, gaussian_1d.X, config, post.mean.copy(), seed=3)
        kept = out.samples[out.k // 2 :, 0]
        se = math.sqrt(post.cov[0, 0] / effective_sample_size(kept))
        # allow the ULA discretisation bias on top of the Monte Carlo error
        assert abs(kept.mean() - post.mean[0]) < 4 * se + 0.5 * 0.002

    def test_fixed_seed_determinism(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        config = SgldConfig(eta=0.01, k=100, q=0.3, b_g=1.0, noise_ratio=0.5)
        a = dp_sgld_run(model, gaussian_1d.X, config, np.array([0.0]), seed=1)
        b = dp_sgld_run(model, gaussian_1d.X, config, np.array([0.0]), seed=1)
        assert np.array_equal(a.samples, b.samples)

    def test_ledger_counts(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        config = SgldConfig(eta=0.01, k=123, q=0.5, b_g=1.0, noise_ratio=0.5)
        out = dp_sgld_run(model, gaussian_1d.X, config, np.array([0.0]), seed=1)
        assert out.ledger.grad_queries == 123


class TestSgnht:
    def test_frozen_thermostat_reduces_to_naive_sghmc(self):
        model = standard_gaussian_model()
        X = np.empty((0, 1))
        config = SgnhtConfig(
            eta=0.05, k=3, q=1.0, diffusion=0.0, thermostat_init=0.0, thermostat_frozen=True
        )
        out = dp_sgnht_run(model, X, config, np.array([1.0]), seed=5)
        rng = np.random.default_rng(np.random.SeedSequence(5))
        p = rng.standard_normal(1)
        theta = np.array([1.0])
        expected = []
        for _ in range(3):
            p = p + 0.05 * (-theta)
            theta = theta + 0.05 * p
            expected.append(theta.copy())
        assert np.allclose(out.samples, np.vstack(expected))

    def test_thermostat_keeps_unit_kinetic_energy(self):
        # the friction variable equilibrates where E[p.p / d] = 1
        model = standard_gaussian_model()
        X = np.empty((0, 1))
        config = SgnhtConfig(eta=0.05, k=40000, q=1.0, diffusion=1.0)
        out = dp_sgnht_run(model, X, config, np.array([0.0]), seed=12)
        kinetic = (out.momenta[out.k // 2 :, 0]) ** 2
        ess = effective_sample_size(kinetic)
        se = math.sqrt(2.0 / ess)  # Var(p^2) = 2 under p ~ N(0, 1)
        assert kinetic.mean() == pytest.approx(1.0, abs=4 * se + 0.02)

    def test_fixed_seed_determinism(self, gaussian_1d):
        model = GaussianModel(gaussian_1d.spec)
        config = SgnhtConfig(eta=0.005, k=50, q=0.5, b_g=1.0, noise_ratio=0.3)
        a = dp_sgnht_run(model, gaussian_1d.X, config, np.array([0.0]), seed=2)
        b = dp_sgnht_run(model, gaussian_1d.X, config, np.array([0.0]), seed=2)
        assert np.array_equal(a.samples, b.samples)


class TestChainOutputCsv:
    def test_columns_and_rows(self, tmp_path, gaussian_1d):
        from dphmc.samplers import write_chain_csv

        model = GaussianModel(gaussian_1d.spec)
        config = HmcConfig(eta=0.1, L=2, k=10)
        out = hmc_run(model, gaussian_1d.X, config, np.array([0.0]), seed=1)
        path = tmp_path / "chain.csv"
        write_chain_csv(out, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iter,theta_1,accepted,llr_clip_frac,grad_clip_frac,eta_i"
        assert len(lines) == 11
