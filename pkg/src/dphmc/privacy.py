"""Clipping, the Gaussian mechanism, and tight (epsilon, delta) accounting.

The accounting is built on the privacy loss distribution (PLD) of the
Gaussian mechanism, which is Normal(mu, 2*mu) with mu = Delta^2 / (2*sigma^2).
PLD mass is additive under composition, so a whole run of a sampler is
summarised by a single scalar ``mu`` plus query counts.  The subsampled
accountant composes the Poisson-subsampled Gaussian PLD numerically on a
grid via FFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "AdpBudget",
    "PrivacyLedger",
    "SubsampledGaussianSpec",
    "GridTruncationError",
    "CalibrationError",
    "clip",
    "clip_rows",
    "clip_values",
    "gaussian_mechanism",
    "adp_delta",
    "compose_gaussians",
    "dp_hmc_budget",
    "calibrate_tau",
    "calibrate_penalty_tau",
    "subsampled_accountant",
    "calibrate_subsampled_noise",
]


class GridTruncationError(RuntimeError):
    """The accountant grid lost more probability mass than tolerated.

    Raised with a diagnostic; the fix is a wider domain or more bins.
    """


class CalibrationError(RuntimeError):
    """Bisection failed to meet the requested privacy target."""


@dataclass(frozen=True)
class AdpBudget:
    """An (epsilon, delta) approximate-DP guarantee."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must be in [0, 1], got {self.delta}")


@dataclass(frozen=True)
class SubsampledGaussianSpec:
    """Poisson-subsampled Gaussian mechanism composed ``compositions`` times.

    ``noise_ratio`` is the noise standard deviation relative to the query
    sensitivity (sigma / Delta).
    """

    q: float
    noise_ratio: float
    compositions: int

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise ValueError(f"sampling fraction q must be in (0, 1], got {self.q}")
        if self.noise_ratio <= 0:
            raise ValueError(f"noise_ratio must be > 0, got {self.noise_ratio}")
        if self.compositions < 0:
            raise ValueError(f"compositions must be >= 0, got {self.compositions}")


@dataclass
class PrivacyLedger:
    """Counts of noisy queries made by a sampler, with their noise ratios.

    The samplers increment the counts at the exact points where noise is
    drawn, so the counts equal the number of Gaussian-mechanism invocations.
    A ``tau`` of ``None`` is allowed while the matching count stays zero.
    """

    tau_l: float | None = None
    tau_g: float | None = None
    llr_queries: int = 0
    grad_queries: int = 0

    def record_llr_query(self, count: int = 1) -> None:
        self.llr_queries += count

    def record_grad_query(self, count: int = 1) -> None:
        self.grad_queries += count

    @property
    def mu(self) -> float:
        """Total PLD mass: llr/(2*tau_l^2) + grad/(2*tau_g^2)."""
        return self._term(self.llr_queries, self.tau_l, "tau_l") + self._term(
            self.grad_queries, self.tau_g, "tau_g"
        )

    @staticmethod
    def _term(count: int, tau: float | None, name: str) -> float:
        if count == 0:
            return 0.0
        if tau is None:
            raise ValueError(f"{name} is unset but {count} queries were recorded")
        if tau == 0:
            return math.inf
        return count / (2.0 * tau**2)

    def budget(self, epsilon: float) -> AdpBudget:
        return AdpBudget(epsilon, adp_delta(self.mu, epsilon))


def clip(v: np.ndarray, b: float) -> tuple[np.ndarray, bool]:
    """Rescale ``v`` into the L2 ball of radius ``b``.

    Returns the clipped vector and whether clipping was active
    (``||v|| > b``).  ``b = inf`` disables clipping.  Non-finite input is an
    error rather than being silently clipped: it signals an upstream
    numerical blow-up.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("clip received non-finite components")
    if b <= 0:
        raise ValueError(f"clip bound must be > 0, got {b}")
    norm = float(np.linalg.norm(v))
    if norm <= b:
        return v, False
    return v * (b / norm), True


def clip_rows(rows: np.ndarray, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Clip each row of ``rows`` to L2 norm ``b``; returns (clipped, mask)."""
    rows = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(rows)):
        raise ValueError("clip_rows received non-finite components")
    if b <= 0:
        raise ValueError(f"clip bound must be > 0, got {b}")
    norms = np.linalg.norm(rows, axis=1)
    mask = norms > b
    if not mask.any():
        return rows, mask
    scale = np.ones_like(norms)
    scale[mask] = b / norms[mask]
    return rows * scale[:, None], mask


def clip_values(values: np.ndarray, c: float) -> tuple[np.ndarray, np.ndarray]:
    """Clip scalars into [-c, c]; returns (clipped, mask).  ``c = 0`` maps all to 0."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("clip_values received non-finite values")
    if c < 0:
        raise ValueError(f"clip bound must be >= 0, got {c}")
    mask = np.abs(values) > c
    return np.clip(values, -c, c), mask


def gaussian_mechanism(value: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Release ``value + Normal(0, sigma^2 I)``.  ``sigma = 0`` is the identity."""
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise ValueError("gaussian_mechanism received non-finite value")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return value.copy()
    return value + rng.normal(0.0, sigma, size=value.shape)


def adp_delta(mu: float, epsilon: float) -> float:
    """Tight delta(epsilon) of a mechanism whose PLD is Normal(mu, 2*mu).

    Evaluates ``0.5 * (erfc((eps-mu)/(2 sqrt(mu))) - e^eps erfc((eps+mu)/(2 sqrt(mu))))``.
    The second term is computed through the scaled complementary error
    function: e^eps * erfc(b) = erfcx(b) * exp(eps - b^2) and
    eps - b^2 = -(eps-mu)^2/(4 mu), so both factors stay bounded and the
    product cannot overflow for any epsilon.
    """
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if mu == 0:
        return 0.0
    root = 2.0 * math.sqrt(mu)
    a = (epsilon - mu) / root
    b = (epsilon + mu) / root
    delta = 0.5 * (special.erfc(a) - special.erfcx(b) * math.exp(-a * a))
    # Cancellation near mu ~ 0 can leave a tiny negative residue.
    if delta < 0:
        delta = 0.0
    return min(delta, 1.0)


def compose_gaussians(mechanisms) -> float:
    """Total PLD mass of a composition: mu = sum Delta_i^2 / (2 sigma_i^2).

    ``mechanisms`` is a sequence of ``(sensitivity, sigma)`` pairs.  Order
    does not matter.  A positive-sensitivity query with zero noise has
    infinite privacy loss and is rejected.
    """
    mu = 0.0
    for sensitivity, sigma in mechanisms:
        if sensitivity < 0:
            raise ValueError(f"sensitivity must be >= 0, got {sensitivity}")
        if sensitivity == 0:
            continue
        if sigma <= 0:
            raise ValueError(
                f"sigma must be > 0 for a query with sensitivity {sensitivity}: "
                "composition has infinite privacy loss"
            )
        mu += sensitivity**2 / (2.0 * sigma**2)
    return mu


def dp_hmc_budget(k: int, L: int, tau_l: float, tau_g: float, epsilon: float) -> AdpBudget:
    """Budget of ``k`` iterations of the noisy-leapfrog sampler.

    Each iteration releases one noisy log-likelihood ratio and ``L + 1``
    noisy gradients, so mu = k/(2 tau_l^2) + k(L+1)/(2 tau_g^2).
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k == 0:
        return AdpBudget(epsilon, 0.0)
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    if tau_l <= 0 or tau_g <= 0:
        raise ValueError("noise ratios must be > 0 for a DP budget")
    mu = k / (2.0 * tau_l**2) + k * (L + 1) / (2.0 * tau_g**2)
    return AdpBudget(epsilon, adp_delta(mu, epsilon))


def _solve_mu_for_delta(epsilon: float, delta: float, max_iter: int = 200) -> float:
    """Largest mu with adp_delta(mu, epsilon) <= delta, by bisection.

    delta(eps) is nondecreasing in mu for fixed eps (checked numerically in
    the test suite), delta -> 0 as mu -> 0 and delta -> 1 as mu -> inf, so a
    bracket always exists.
    """
    lo, hi = 0.0, 1.0
    it = 0
    while adp_delta(hi, epsilon) < delta:
        lo, hi = hi, hi * 2.0
        it += 1
        if it > max_iter:
            raise CalibrationError(f"could not bracket mu for delta={delta}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if adp_delta(mid, epsilon) <= delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(hi, 1.0):
            break
    else:
        raise CalibrationError("mu bisection did not converge in 200 iterations")
    return lo


def calibrate_tau(
    target: AdpBudget, k: int, L: int, grad_share: float = 0.5
) -> tuple[float, float]:
    """Noise ratios (tau_l, tau_g) meeting ``target`` for a k-iteration run.

    ``grad_share`` of the total PLD mass is allotted to the k(L+1) gradient
    queries and the rest to the k log-likelihood-ratio queries.  The
    returned ratios satisfy ``dp_hmc_budget(...).delta <= target.delta``
    (within 1e-6 relative).
    """
    if not 0 < target.delta < 1:
        raise ValueError(f"target delta must be in (0, 1), got {target.delta}")
    if target.epsilon <= 0:
        raise ValueError(f"target epsilon must be > 0, got {target.epsilon}")
    if not 0 < grad_share < 1:
        raise ValueError(f"grad_share must be in (0, 1), got {grad_share}")
    if k < 1 or L < 1:
        raise ValueError("k and L must be >= 1")
    mu = _solve_mu_for_delta(target.epsilon, target.delta)
    tau_l = math.sqrt(k / (2.0 * (1.0 - grad_share) * mu))
    tau_g = math.sqrt(k * (L + 1) / (2.0 * grad_share * mu))
    achieved = dp_hmc_budget(k, L, tau_l, tau_g, target.epsilon).delta
    if achieved > target.delta * (1.0 + 1e-6):
        raise CalibrationError(
            f"calibrated taus give delta={achieved}, above target {target.delta}"
        )
    return tau_l, tau_g


def calibrate_penalty_tau(target: AdpBudget, k: int) -> float:
    """Noise ratio tau_l for k log-likelihood-ratio releases meeting ``target``."""
    if not 0 < target.delta < 1:
        raise ValueError(f"target delta must be in (0, 1), got {target.delta}")
    if target.epsilon <= 0:
        raise ValueError(f"target epsilon must be > 0, got {target.epsilon}")
    if k < 1:
        raise ValueError("k must be >= 1")
    mu = _solve_mu_for_delta(target.epsilon, target.delta)
    tau_l = math.sqrt(k / (2.0 * mu))
    achieved = adp_delta(k / (2.0 * tau_l**2), target.epsilon)
    if achieved > target.delta * (1.0 + 1e-6):
        raise CalibrationError(
            f"calibrated tau gives delta={achieved}, above target {target.delta}"
        )
    return tau_l


# -- Poisson-subsampled Gaussian accounting ---------------------------------
#
# Remove/add adjacency throughout: the dominating pair is
#   f0 = N(0, sigma^2)  vs  f1 = (1-q) N(0, sigma^2) + q N(1, sigma^2)
# with the privacy loss  s(t) = log(f1(t)/f0(t)) = log(1-q + q e^{(2t-1)/(2 sigma^2)})
# sampled under t ~ f1.  This is the standard setting for this accountant and
# an approximation to the substitute relation used by the exact samplers.

_DEFAULT_HALF_WIDTH = 30.0
_DEFAULT_NUM_BINS = 2**20


def _mixture_density(t: np.ndarray, q: float, sigma: float) -> np.ndarray:
    norm = 1.0 / math.sqrt(2.0 * math.pi * sigma**2)
    return norm * (
        (1.0 - q) * np.exp(-(t**2) / (2.0 * sigma**2))
        + q * np.exp(-((t - 1.0) ** 2) / (2.0 * sigma**2))
    )


def _privacy_loss(t: float, q: float, sigma: float) -> float:
    z = (2.0 * t - 1.0) / (2.0 * sigma**2)
    if q == 1.0:
        return z
    if z > 30.0:
        # log(1 - q + q e^z) = z + log q + log1p((1-q) e^{-z} / q)
        return z + math.log(q) + math.log1p((1.0 - q) * math.exp(-z) / q)
    return math.log1p(q * math.expm1(z))


def _pld_moments(q: float, sigma: float) -> tuple[float, float]:
    """Mean and variance of the single-step PLD, via quadrature over t."""
    lo, hi = -14.0 * sigma, 1.0 + 14.0 * sigma
    m1, _ = integrate.quad(
        lambda t: _privacy_loss(t, q, sigma) * _mixture_density(t, q, sigma), lo, hi, limit=300
    )
    m2, _ = integrate.quad(
        lambda t: _privacy_loss(t, q, sigma) ** 2 * _mixture_density(t, q, sigma), lo, hi, limit=300
    )
    return m1, max(m2 - m1 * m1, 0.0)


def _loss_inverse_array(s: np.ndarray, q: float, sigma: float) -> np.ndarray:
    """t with loss(t) = s, elementwise; -inf below the loss floor log(1-q)."""
    if q == 1.0:
        return sigma**2 * s + 0.5
    floor = math.log1p(-q)
    out = np.full_like(s, -np.inf)
    mask = s > floor
    sm = s[mask]
    # log(e^s - (1-q)) = s + log1p(-(1-q) e^{-s}), stable for any s > floor
    gap_log = sm + np.log1p(-(1.0 - q) * np.exp(-sm))
    out[mask] = sigma**2 * (gap_log - math.log(q)) + 0.5
    return out


def _pld_grid_mass(
    q: float, sigma: float, half_width: float, num_bins: int
) -> tuple[np.ndarray, np.ndarray, float]:
    """PLD mass vector on the lattice x_j = -L + j*dx, plus the bin width dx.

    Each bin [x_j - dx/2, x_j + dx/2] receives its exact probability
    P(loss(t) in bin) = F(t(edge_hi)) - F(t(edge_lo)) with F the mixture CDF,
    so no density discretisation error enters; the composed result only
    carries the usual mass-at-lattice-point convolution error.
    """
    dx = 2.0 * half_width / num_bins
    x = -half_width + dx * np.arange(num_bins)
    edges = np.concatenate([x - 0.5 * dx, [x[-1] + 0.5 * dx]])
    t_edges = _loss_inverse_array(edges, q, sigma)
    cdf = np.where(
        np.isneginf(t_edges),
        0.0,
        (1.0 - q) * special.ndtr(t_edges / sigma)
        + q * special.ndtr((t_edges - 1.0) / sigma),
    )
    mass = np.diff(cdf)
    lost = 1.0 - (float(cdf[-1]) - float(cdf[0]))
    return x, mass, dx, lost


def subsampled_accountant(
    spec: SubsampledGaussianSpec,
    epsilon: float,
    *,
    half_width: float | None = None,
    num_bins: int = _DEFAULT_NUM_BINS,
    truncation_tol: float = 1e-12,
) -> float:
    """delta(epsilon) of ``compositions`` Poisson-subsampled Gaussian releases.

    Discretises the single-release PLD on a uniform grid, composes by raising
    the FFT of the mass vector to the ``compositions`` power, and evaluates
    delta(eps) = sum_{s > eps} (1 - e^{eps - s}) mass(s).  With q = 1 this
    agrees with :func:`adp_delta` (mu = T / (2 sigma^2)) to well below 1e-6.

    The default grid is [-30, 30] with 2**20 bins, widened automatically when
    the composed PLD would not fit.  Mass lost to truncation is added to the
    returned delta as an upper-bound correction; if that correction exceeds
    ``truncation_tol`` a :class:`GridTruncationError` is raised instead.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    T = spec.compositions
    if T == 0:
        return 0.0
    q, sigma = spec.q, spec.noise_ratio
    if half_width is None:
        m1, v1 = _pld_moments(q, sigma)
        spread = 15.0 * math.sqrt(max(T * v1, v1)) + abs(epsilon) + 10.0
        half_width = max(_DEFAULT_HALF_WIDTH, abs(T * m1) + spread, abs(m1) + spread)
    x, mass, dx, lost = _pld_grid_mass(q, sigma, half_width, num_bins)

    lost = max(lost, 0.0)
    # After T compositions at most 1 - (1 - lost)^T of the mass is misplaced.
    lost_composed = -math.expm1(T * math.log1p(-min(lost, 1.0 - 1e-300)))
    if lost_composed > truncation_tol:
        raise GridTruncationError(
            f"composed grid-truncation mass {lost_composed:.3e} exceeds "
            f"tolerance {truncation_tol:.1e} on domain [-{half_width}, {half_width}]; "
            f"widen the grid"
        )

    half = num_bins // 2
    centred = np.roll(mass, -half)
    transformed = np.fft.rfft(centred)
    composed = np.fft.irfft(transformed**T, n=num_bins)
    composed = np.maximum(np.roll(composed, half), 0.0)

    weights = np.where(x > epsilon, -np.expm1(epsilon - x), 0.0)
    delta = float(np.sum(weights * composed)) + lost_composed
    return min(max(delta, 0.0), 1.0)


def calibrate_subsampled_noise(
    target: AdpBudget, q: float, compositions: int, *, num_bins: int = 2**18
) -> float:
    """Smallest noise ratio meeting ``target`` for a subsampled-Gaussian run.

    Bisects on the noise ratio (delta is decreasing in sigma) and verifies
    the result against the default-resolution accountant, nudging the ratio
    up if the coarser search grid was optimistic.
    """
    if not 0 < target.delta < 1:
        raise ValueError(f"target delta must be in (0, 1), got {target.delta}")
    if compositions < 1:
        raise ValueError(f"compositions must be >= 1, got {compositions}")

    def delta_at(sigma: float, bins: int) -> float:
        spec = SubsampledGaussianSpec(q=q, noise_ratio=sigma, compositions=compositions)
        return subsampled_accountant(spec, target.epsilon, num_bins=bins)

    lo, hi = 1e-3, 1.0
    it = 0
    while delta_at(hi, num_bins) > target.delta:
        hi *= 2.0
        it += 1
        if it > 60:
            raise CalibrationError("could not bracket the noise ratio from above")
    it = 0
    while delta_at(lo, num_bins) < target.delta and lo > 1e-9:
        lo /= 2.0
        it += 1
        if it > 60:
            break
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if delta_at(mid, num_bins) <= target.delta:
            hi = mid
        else:
            lo = mid
        if (hi - lo) <= 1e-4 * hi:
            break
    sigma = hi
    for _ in range(8):
        if delta_at(sigma, _DEFAULT_NUM_BINS) <= target.delta:
            return sigma
        sigma *= 1.001
    raise CalibrationError("verification against the full-resolution accountant failed")
