"""MCMC samplers: penalty-corrected noisy-leapfrog HMC, the penalty
random-walk sampler, stochastic-gradient Langevin / Nose-Hoover baselines,
and their non-private counterparts for the clipping study.

Conventions shared by all samplers here:

* Per-point gradients of the log-likelihood are clipped to an L2 ball of
  radius ``b_g``; the summed gradient gets a single Gaussian draw with
  standard deviation ``2 * b_g * tau_g`` (sensitivity times noise ratio).
* Per-point log-likelihood ratios are clipped to ``c_l = b_l * ||theta' -
  theta||`` and the summed ratio gets noise with standard deviation
  ``2 * tau_l * c_l``; the acceptance exponent is penalised by half the
  noise variance.
* Momentum negation is never materialised: the kinetic energy is symmetric
  in p, so the energy difference uses the forward-simulated momentum.
* One chain owns one RNG stream, derived deterministically from its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from dphmc.models import Model
from dphmc.privacy import PrivacyLedger, clip_rows, clip_values

__all__ = [
    "HmcConfig",
    "PenaltyConfig",
    "SgldConfig",
    "SgnhtConfig",
    "StepSizeSequence",
    "ChainOutput",
    "DivergenceError",
    "halton_steps",
    "leapfrog_noisy",
    "dp_hmc_run",
    "dp_penalty_run",
    "dp_sgld_run",
    "dp_sgnht_run",
    "hmc_run",
    "rwmh_run",
    "write_chain_csv",
]

# Leapfrog trajectories whose (noisy) energy error passes this are treated
# as divergences: the banana tails can blow up the simulation.
DIVERGENCE_THRESHOLD = 1e6


class DivergenceError(RuntimeError):
    """Leapfrog blow-up; carries the sub-step index and the gradient
    evaluations already spent (they still count against the ledger)."""

    def __init__(self, step: int, grad_evals: int):
        super().__init__(f"leapfrog diverged at sub-step {step}")
        self.step = step
        self.grad_evals = grad_evals


@dataclass
class HmcConfig:
    """Tuning for the noisy-leapfrog sampler.

    ``b_l`` is the log-likelihood-ratio clip rate per unit proposal
    distance, ``b_g`` the per-point gradient clip bound; ``tau_l`` and
    ``tau_g`` are noise-to-sensitivity ratios (0 disables noise).  ``M`` may
    be None (identity), a diagonal, or a full SPD matrix.
    """

    eta: float
    L: int
    k: int
    b_l: float = math.inf
    b_g: float = math.inf
    tau_l: float = 0.0
    tau_g: float = 0.0
    M: np.ndarray | None = None

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.b_l < 0:
            raise ValueError("b_l must be >= 0 (inf disables clipping, 0 clips all)")
        if self.b_g <= 0:
            raise ValueError("b_g must be > 0 (inf disables clipping)")
        if self.tau_l < 0 or self.tau_g < 0:
            raise ValueError("noise ratios must be >= 0")
        if self.tau_g > 0 and not math.isfinite(self.b_g):
            raise ValueError("tau_g > 0 needs a finite gradient clip bound")
        if self.tau_l > 0 and not math.isfinite(self.b_l):
            raise ValueError("tau_l > 0 needs a finite log-likelihood clip rate")


@dataclass
class PenaltyConfig:
    """Tuning for the penalty random-walk sampler.

    ``proposal_std`` may be a scalar or a per-coordinate vector (the
    proposal stays symmetric either way, so no Hastings term appears).
    """

    proposal_std: float | np.ndarray
    k: int
    b_l: float = math.inf
    tau_l: float = 0.0

    def __post_init__(self):
        if not np.isscalar(self.proposal_std):
            self.proposal_std = np.asarray(self.proposal_std, dtype=float)
        if np.any(np.asarray(self.proposal_std) < 0):
            raise ValueError(f"proposal_std must be >= 0, got {self.proposal_std}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.b_l < 0:
            raise ValueError("b_l must be >= 0 (inf disables clipping, 0 clips all)")
        if self.tau_l < 0:
            raise ValueError("tau_l must be >= 0")
        if self.tau_l > 0 and not math.isfinite(self.b_l):
            raise ValueError("tau_l > 0 needs a finite log-likelihood clip rate")


@dataclass
class SgldConfig:
    """Stochastic-gradient Langevin dynamics with Poisson subsampling.

    The update equations are a reconstruction from the literature the
    baselines come from; the zero-noise, full-batch reduction to plain
    unadjusted Langevin is the behavioural contract.
    """

    eta: float
    k: int
    q: float = 1.0
    b_g: float = math.inf
    noise_ratio: float = 0.0

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0 < self.q <= 1:
            raise ValueError(f"q must be in (0, 1], got {self.q}")
        if self.b_g <= 0:
            raise ValueError("b_g must be > 0 (inf disables clipping)")
        if self.noise_ratio < 0:
            raise ValueError("noise_ratio must be >= 0")
        if self.noise_ratio > 0 and not math.isfinite(self.b_g):
            raise ValueError("noise_ratio > 0 needs a finite gradient clip bound")


@dataclass
class SgnhtConfig:
    """Stochastic-gradient Nose-Hoover thermostat (reconstructed baseline).

    ``diffusion`` is the injected-noise coefficient A; ``thermostat_init``
    seeds the friction variable, and freezing it turns the sampler into
    naive stochastic-gradient HMC without friction.
    """

    eta: float
    k: int
    q: float = 1.0
    b_g: float = math.inf
    noise_ratio: float = 0.0
    diffusion: float = 1.0
    thermostat_init: float | None = None
    thermostat_frozen: bool = False

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0 < self.q <= 1:
            raise ValueError(f"q must be in (0, 1], got {self.q}")
        if self.b_g <= 0:
            raise ValueError("b_g must be > 0 (inf disables clipping)")
        if self.noise_ratio < 0 or self.diffusion < 0:
            raise ValueError("noise_ratio and diffusion must be >= 0")
        if self.noise_ratio > 0 and not math.isfinite(self.b_g):
            raise ValueError("noise_ratio > 0 needs a finite gradient clip bound")


@dataclass
class StepSizeSequence:
    """Per-iteration step sizes jittered by a randomised Halton stream."""

    values: np.ndarray
    base_eta: float


@dataclass
class ChainOutput:
    """One chain's samples and per-iteration diagnostics."""

    samples: np.ndarray
    accepted: np.ndarray
    llr_clip_frac: np.ndarray
    grad_clip_frac: np.ndarray
    etas: np.ndarray
    divergences: int
    ledger: PrivacyLedger
    theta0: np.ndarray
    momenta: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.samples.shape[0]

    @property
    def accept_rate(self) -> float:
        return float(self.accepted.mean())

    @property
    def mean_llr_clip_frac(self) -> float:
        return float(np.nanmean(self.llr_clip_frac)) if self.k else 0.0

    @property
    def mean_grad_clip_frac(self) -> float:
        return float(np.nanmean(self.grad_clip_frac)) if self.k else 0.0


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def halton_steps(base_eta: float, k: int, seed) -> StepSizeSequence:
    """Step sizes base_eta * h_i with h_i in [0.5, 1.0] from a shifted
    base-2 Halton (van der Corput) sequence.

    The randomisation is a single modulo-1 shift of the whole stream, so the
    low-discrepancy structure survives and the sequence is reproducible from
    the seed.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if base_eta <= 0:
        raise ValueError(f"base_eta must be > 0, got {base_eta}")
    rng = np.random.default_rng(_seed_sequence(seed))
    shift = rng.random()
    idx = np.arange(1, k + 1, dtype=np.uint64)
    radical = np.zeros(k)
    scale = 0.5
    while idx.any():
        radical += scale * (idx & 1)
        idx >>= 1
        scale *= 0.5
    h = 0.5 + 0.5 * ((radical + shift) % 1.0)
    return StepSizeSequence(values=base_eta * h, base_eta=base_eta)


class _Mass:
    """Positive-definite mass matrix with sampling, solve, and kinetic energy."""

    def __init__(self, M, d: int):
        self.d = d
        if M is None:
            self.kind = "identity"
            return
        arr = np.asarray(M, dtype=float)
        if arr.ndim == 1:
            if arr.shape != (d,) or np.any(arr <= 0):
                raise ValueError("diagonal mass matrix must be positive with length d")
            self.kind = "diag"
            self.diag = arr
            self.sqrt_diag = np.sqrt(arr)
        elif arr.ndim == 2:
            if arr.shape != (d, d):
                raise ValueError(f"mass matrix must be {d}x{d}")
            self.kind = "full"
            self.chol = np.linalg.cholesky(arr)
        else:
            raise ValueError("mass matrix must be 1-D or 2-D")

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.d)
        if self.kind == "identity":
            return z
        if self.kind == "diag":
            return self.sqrt_diag * z
        return self.chol @ z

    def inv_mul(self, p: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return p
        if self.kind == "diag":
            return p / self.diag
        y = np.linalg.solve(self.chol, p)
        return np.linalg.solve(self.chol.T, y)

    def kinetic(self, p: np.ndarray) -> float:
        return 0.5 * float(p @ self.inv_mul(p))


@dataclass
class LeapfrogResult:
    theta: np.ndarray
    p: np.ndarray
    grad_evals: int
    grad_clip_frac: float


def _noisy_grad_log_target(model, X, theta, b_g, sigma_g, rng):
    """Clipped-per-point gradient of log pi, plus one Gaussian draw.

    Returns (gradient, clipped_fraction).  Non-finite raw gradients signal a
    diverging trajectory and are reported as such by the caller.
    """
    if X.shape[0] > 0:
        with np.errstate(over="ignore", invalid="ignore"):
            raw = model.grad_log_lik_points(X, theta)
        if not np.all(np.isfinite(raw)):
            raise FloatingPointError("non-finite per-point gradient")
        if math.isfinite(b_g):
            clipped, mask = clip_rows(raw, b_g)
            frac = float(mask.mean())
        else:
            clipped, frac = raw, 0.0
        g = clipped.sum(axis=0)
    else:
        g, frac = np.zeros(model.d), 0.0
    g = g + model.grad_log_prior(theta)
    if sigma_g > 0:
        g = g + rng.normal(0.0, sigma_g, size=g.shape)
    return g, frac


def leapfrog_noisy(
    model: Model,
    X: np.ndarray,
    theta: np.ndarray,
    p: np.ndarray,
    eta: float,
    L: int,
    mass: np.ndarray | _Mass | None,
    b_g: float,
    sigma_g: float,
    rng: np.random.Generator,
) -> LeapfrogResult:
    """Noisy clipped leapfrog: half kick, L-1 (drift, kick) pairs, drift,
    half kick.  Fresh noise at every momentum update; L + 1 gradient
    evaluations in total.

    Raises :class:`DivergenceError` when the state goes non-finite, carrying
    the sub-step index and the gradient evaluations already consumed.
    """
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    theta = np.array(theta, dtype=float)
    p = np.array(p, dtype=float)
    if not isinstance(mass, _Mass):
        mass = _Mass(mass, theta.shape[0])
    grad_evals = 0
    clip_fracs = []
    step = 0

    def kick(scale):
        nonlocal p, grad_evals, step
        try:
            g, frac = _noisy_grad_log_target(model, X, theta, b_g, sigma_g, rng)
        except FloatingPointError:
            raise DivergenceError(step, grad_evals) from None
        grad_evals += 1
        clip_fracs.append(frac)
        p = p + scale * g
        step += 1
        if not np.all(np.isfinite(p)):
            raise DivergenceError(step, grad_evals)

    def drift():
        nonlocal theta, step
        theta = theta + eta * mass.inv_mul(p)
        step += 1
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(step, grad_evals)

    kick(eta / 2.0)
    for _ in range(L - 1):
        drift()
        kick(eta)
    drift()
    kick(eta / 2.0)
    return LeapfrogResult(theta, p, grad_evals, float(np.mean(clip_fracs)))


def _llr_clip_bound(b_l: float, distance: float) -> float:
    # inf * 0 would be nan; a zero-length proposal clips everything to zero
    if distance == 0.0:
        return 0.0
    return b_l * distance


def penalty_exponent(log_ratio: float, sigma_l: float) -> float:
    """Log acceptance threshold of the penalty correction."""
    return log_ratio - 0.5 * sigma_l**2


def dp_hmc_run(
    model: Model, X: np.ndarray, config: HmcConfig, theta0: np.ndarray, seed
) -> ChainOutput:
    """Run k iterations of penalty-corrected HMC with noisy clipped leapfrog.

    Per iteration: resample momentum, simulate the noisy leapfrog with a
    Halton-jittered step size, clip the per-point log-likelihood ratios at
    ``b_l * ||theta - theta'||``, add calibrated noise, and accept on the
    penalised energy difference.  Diverged trajectories count as rejections
    and are tallied separately.
    """
    X = np.asarray(X, dtype=float)
    theta = np.array(theta0, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta0 must be finite")
    d = theta.shape[0]
    ss = _seed_sequence(seed)
    halton_ss, chain_ss = ss.spawn(2)
    etas = halton_steps(config.eta, config.k, halton_ss).values
    rng = np.random.default_rng(chain_ss)
    mass = _Mass(config.M, d)
    ledger = PrivacyLedger(tau_l=config.tau_l, tau_g=config.tau_g)
    sigma_g = 2.0 * config.b_g * config.tau_g if config.tau_g > 0 else 0.0

    k = config.k
    samples = np.empty((k, d))
    accepted = np.zeros(k, dtype=bool)
    llr_fracs = np.zeros(k)
    grad_fracs = np.zeros(k)
    divergences = 0

    n = X.shape[0]
    for i in range(k):
        p = mass.sample(rng)
        try:
            res = leapfrog_noisy(
                model, X, theta, p, etas[i], config.L, mass, config.b_g, sigma_g, rng
            )
        except DivergenceError as err:
            ledger.record_grad_query(err.grad_evals)
            divergences += 1
            llr_fracs[i] = np.nan
            grad_fracs[i] = np.nan
            samples[i] = theta
            continue
        ledger.record_grad_query(res.grad_evals)
        grad_fracs[i] = res.grad_clip_frac

        distance = float(np.linalg.norm(res.theta - theta))
        c_l = _llr_clip_bound(config.b_l, distance)
        if n > 0:
            with np.errstate(over="ignore", invalid="ignore"):
                ratios = model.log_lik_points(X, res.theta) - model.log_lik_points(X, theta)
            if not np.all(np.isfinite(ratios)):
                # the proposal is so extreme the ratios overflow: a divergence
                divergences += 1
                samples[i] = theta
                continue
            clipped, mask = clip_values(ratios, c_l) if math.isfinite(c_l) else (ratios, np.zeros(n, bool))
            R = float(clipped.sum())
            llr_fracs[i] = float(mask.mean())
        else:
            R = 0.0
        sigma_l = 2.0 * config.tau_l * c_l if config.tau_l > 0 else 0.0
        xi = rng.normal(0.0, sigma_l) if sigma_l > 0 else 0.0
        ledger.record_llr_query()

        delta_p = mass.kinetic(p) - mass.kinetic(res.p)
        prior_ratio = model.log_prior(res.theta) - model.log_prior(theta)
        delta_h = R + delta_p + prior_ratio + xi
        if not math.isfinite(delta_h) or abs(delta_h) > DIVERGENCE_THRESHOLD:
            divergences += 1
            samples[i] = theta
            continue
        u = rng.random()
        log_u = -math.inf if u == 0.0 else math.log(u)
        if log_u < penalty_exponent(delta_h, sigma_l):
            theta = res.theta
            accepted[i] = True
        samples[i] = theta

    return ChainOutput(
        samples=samples,
        accepted=accepted,
        llr_clip_frac=llr_fracs,
        grad_clip_frac=grad_fracs,
        etas=etas,
        divergences=divergences,
        ledger=ledger,
        theta0=np.array(theta0, dtype=float),
    )


def dp_penalty_run(
    model: Model, X: np.ndarray, config: PenaltyConfig, theta0: np.ndarray, seed
) -> ChainOutput:
    """Penalty random-walk Metropolis: symmetric Gaussian proposal, clipped
    per-point log-likelihood ratios, noise-penalised acceptance."""
    X = np.asarray(X, dtype=float)
    theta = np.array(theta0, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta0 must be finite")
    d = theta.shape[0]
    rng = np.random.default_rng(_seed_sequence(seed))
    ledger = PrivacyLedger(tau_l=config.tau_l, tau_g=None)

    k = config.k
    samples = np.empty((k, d))
    accepted = np.zeros(k, dtype=bool)
    llr_fracs = np.zeros(k)
    n = X.shape[0]
    for i in range(k):
        proposal = theta + config.proposal_std * rng.standard_normal(d)
        distance = float(np.linalg.norm(proposal - theta))
        c_l = _llr_clip_bound(config.b_l, distance)
        if n > 0:
            with np.errstate(over="ignore", invalid="ignore"):
                ratios = model.log_lik_points(X, proposal) - model.log_lik_points(X, theta)
            if not np.all(np.isfinite(ratios)):
                samples[i] = theta  # overflowing proposal: plain rejection
                continue
            clipped, mask = clip_values(ratios, c_l) if math.isfinite(c_l) else (ratios, np.zeros(n, bool))
            R = float(clipped.sum())
            llr_fracs[i] = float(mask.mean())
        else:
            R = 0.0
        sigma_l = 2.0 * config.tau_l * c_l if config.tau_l > 0 else 0.0
        xi = rng.normal(0.0, sigma_l) if sigma_l > 0 else 0.0
        ledger.record_llr_query()
        log_ratio = R + (model.log_prior(proposal) - model.log_prior(theta)) + xi
        u = rng.random()
        log_u = -math.inf if u == 0.0 else math.log(u)
        if log_u < penalty_exponent(log_ratio, sigma_l):
            theta = proposal
            accepted[i] = True
        samples[i] = theta

    return ChainOutput(
        samples=samples,
        accepted=accepted,
        llr_clip_frac=llr_fracs,
        grad_clip_frac=np.zeros(k),
        etas=np.full(k, float(np.mean(np.asarray(config.proposal_std)))),
        divergences=0,
        ledger=ledger,
        theta0=np.array(theta0, dtype=float),
    )


def _subsampled_grad_estimate(model, X, theta, q, b_g, sigma, rng):
    """One Poisson-subsampled, clipped, noised estimate of grad log pi.

    A non-finite state or gradient raises :class:`DivergenceError`: the
    unadjusted samplers have no accept step to absorb a blow-up, so the
    whole run is reported as diverged.
    """
    if not np.all(np.isfinite(theta)):
        raise DivergenceError(0, 0)
    n = X.shape[0]
    if q < 1.0:
        mask = rng.random(n) < q
        batch = X[mask]
    else:
        batch = X
    if batch.shape[0] > 0:
        with np.errstate(over="ignore", invalid="ignore"):
            raw = model.grad_log_lik_points(batch, theta)
        if not np.all(np.isfinite(raw)):
            raise DivergenceError(0, 0)
        if math.isfinite(b_g):
            clipped, cmask = clip_rows(raw, b_g)
            frac = float(cmask.mean())
        else:
            clipped, frac = raw, 0.0
        total = clipped.sum(axis=0)
    else:
        total, frac = np.zeros(model.d), 0.0
    if sigma > 0:
        total = total + rng.normal(0.0, sigma, size=total.shape)
    return model.grad_log_prior(theta) + total / q, frac


def dp_sgld_run(
    model: Model, X: np.ndarray, config: SgldConfig, theta0: np.ndarray, seed
) -> ChainOutput:
    """Stochastic-gradient Langevin dynamics with the DP gradient estimate.

    theta <- theta + (eta/2) * grad_estimate + Normal(0, eta I).  There is no
    accept/reject step; privacy comes from the subsampled Gaussian mechanism
    composed k times.
    """
    X = np.asarray(X, dtype=float)
    theta = np.array(theta0, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta0 must be finite")
    d = theta.shape[0]
    rng = np.random.default_rng(_seed_sequence(seed))
    ledger = PrivacyLedger(tau_l=None, tau_g=config.noise_ratio or None)
    sigma = 2.0 * config.b_g * config.noise_ratio if config.noise_ratio > 0 else 0.0

    k = config.k
    samples = np.empty((k, d))
    grad_fracs = np.zeros(k)
    sqrt_eta = math.sqrt(config.eta)
    for i in range(k):
        grad, frac = _subsampled_grad_estimate(
            model, X, theta, config.q, config.b_g, sigma, rng
        )
        ledger.record_grad_query()
        grad_fracs[i] = frac
        theta = theta + 0.5 * config.eta * grad + sqrt_eta * rng.standard_normal(d)
        samples[i] = theta

    return ChainOutput(
        samples=samples,
        accepted=np.ones(k, dtype=bool),
        llr_clip_frac=np.zeros(k),
        grad_clip_frac=grad_fracs,
        etas=np.full(k, config.eta),
        divergences=0,
        ledger=ledger,
        theta0=np.array(theta0, dtype=float),
    )


def dp_sgnht_run(
    model: Model, X: np.ndarray, config: SgnhtConfig, theta0: np.ndarray, seed
) -> ChainOutput:
    """Stochastic-gradient Nose-Hoover thermostat with the DP gradient
    estimate.

    p <- p - xi_t * eta * p + eta * grad_estimate + Normal(0, 2 A eta I)
    theta <- theta + eta * p
    xi_t <- xi_t + eta * (p.p / d - 1)
    """
    X = np.asarray(X, dtype=float)
    theta = np.array(theta0, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta0 must be finite")
    d = theta.shape[0]
    rng = np.random.default_rng(_seed_sequence(seed))
    ledger = PrivacyLedger(tau_l=None, tau_g=config.noise_ratio or None)
    sigma = 2.0 * config.b_g * config.noise_ratio if config.noise_ratio > 0 else 0.0
    xi_t = config.diffusion if config.thermostat_init is None else config.thermostat_init
    inject_std = math.sqrt(2.0 * config.diffusion * config.eta)

    k = config.k
    samples = np.empty((k, d))
    momenta = np.empty((k, d))
    grad_fracs = np.zeros(k)
    p = rng.standard_normal(d)
    for i in range(k):
        grad, frac = _subsampled_grad_estimate(
            model, X, theta, config.q, config.b_g, sigma, rng
        )
        ledger.record_grad_query()
        grad_fracs[i] = frac
        p = p - xi_t * config.eta * p + config.eta * grad
        if inject_std > 0:
            p = p + inject_std * rng.standard_normal(d)
        theta = theta + config.eta * p
        if not config.thermostat_frozen:
            xi_t = xi_t + config.eta * (float(p @ p) / d - 1.0)
        samples[i] = theta
        momenta[i] = p

    return ChainOutput(
        samples=samples,
        accepted=np.ones(k, dtype=bool),
        llr_clip_frac=np.zeros(k),
        grad_clip_frac=grad_fracs,
        etas=np.full(k, config.eta),
        divergences=0,
        ledger=ledger,
        theta0=np.array(theta0, dtype=float),
        momenta=momenta,
    )


def hmc_run(
    model: Model, X: np.ndarray, config: HmcConfig, theta0: np.ndarray, seed
) -> ChainOutput:
    """Non-private HMC: the noisy-leapfrog sampler with both noise ratios
    forced to zero.  The optional log-likelihood-ratio clip stays active for
    the clipping study."""
    return dp_hmc_run(model, X, replace(config, tau_l=0.0, tau_g=0.0), theta0, seed)


def rwmh_run(
    model: Model, X: np.ndarray, config: PenaltyConfig, theta0: np.ndarray, seed
) -> ChainOutput:
    """Non-private random-walk Metropolis with optional ratio clipping."""
    return dp_penalty_run(model, X, replace(config, tau_l=0.0), theta0, seed)


def write_chain_csv(output: ChainOutput, path) -> None:
    """Per-iteration CSV: iter, theta_1..theta_d, accepted, clip fractions, eta."""
    import csv

    d = output.samples.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iter"]
            + [f"theta_{j + 1}" for j in range(d)]
            + ["accepted", "llr_clip_frac", "grad_clip_frac", "eta_i"]
        )
        for i in range(output.k):
            writer.writerow(
                [i + 1]
                + [repr(float(v)) for v in output.samples[i]]
                + [
                    int(output.accepted[i]),
                    repr(float(output.llr_clip_frac[i])),
                    repr(float(output.grad_clip_frac[i])),
                    repr(float(output.etas[i])),
                ]
            )
