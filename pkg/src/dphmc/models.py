"""Bayesian targets with analytic reference posteriors and data generators.

Two synthetic models are provided: a correlated Gaussian with a conjugate
Gaussian posterior, and a banana-shaped target obtained by pushing a
Gaussian through (x1, x2) -> (x1, x2 - a*x1^2).  Both expose per-point
log-likelihoods and gradients (the quantities that get clipped and
noised), a log-prior, and vectorised batch variants the samplers use.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Model",
    "GaussianModel",
    "BananaModel",
    "GaussianModelSpec",
    "BananaSpec",
    "ReferencePosterior",
    "Dataset",
    "make_model",
    "gaussian_posterior",
    "banana_posterior",
    "banana_transform",
    "banana_inverse",
    "sample_reference",
    "reference_theta_mean",
    "random_covariance",
    "synth_dataset",
    "potential_and_grad",
    "save_dataset",
    "load_dataset",
]

_LOG_2PI = math.log(2.0 * math.pi)


class Model:
    """A Bayesian model: prior plus a product likelihood over data rows.

    Subclasses implement the batch methods; the per-point accessors are thin
    wrappers.  All log-densities are finite on the whole parameter space and
    differentiable, which the samplers rely on.
    """

    d: int

    def log_prior(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def grad_log_prior(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_lik_points(self, X: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Per-row log-likelihoods, shape (n,)."""
        raise NotImplementedError

    def grad_log_lik_points(self, X: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Per-row gradients of the log-likelihood w.r.t. theta, shape (n, d)."""
        raise NotImplementedError

    def log_lik_point(self, x: np.ndarray, theta: np.ndarray) -> float:
        return float(self.log_lik_points(np.atleast_2d(x), theta)[0])

    def grad_log_lik_point(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return self.grad_log_lik_points(np.atleast_2d(x), theta)[0]


@dataclass
class GaussianModelSpec:
    """Known-covariance Gaussian likelihood with an isotropic Gaussian prior.

    ``Sigma`` may be left as None and filled in by :func:`synth_dataset`
    using the gamma-eigenvalue construction.  ``theta_true`` defaults to the
    prior mean and is only used when generating data.
    """

    d: int
    n: int
    mu0: float = 0.0
    sigma0: float = 100.0
    Sigma: np.ndarray | None = None
    theta_true: np.ndarray | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if self.Sigma is not None:
            self.Sigma = np.asarray(self.Sigma, dtype=float)
            if self.Sigma.shape != (self.d, self.d):
                raise ValueError(f"Sigma must be {self.d}x{self.d}")
            if not np.allclose(self.Sigma, self.Sigma.T, atol=1e-10):
                raise ValueError("Sigma must be symmetric")
            np.linalg.cholesky(self.Sigma)  # raises if not positive definite
        if self.theta_true is not None:
            self.theta_true = np.asarray(self.theta_true, dtype=float)

    @property
    def mu0_vector(self) -> np.ndarray:
        return np.full(self.d, float(self.mu0))

    @property
    def theta_true_vector(self) -> np.ndarray:
        if self.theta_true is None:
            return self.mu0_vector
        return self.theta_true


@dataclass
class BananaSpec:
    """Banana-posterior model; true parameters default to (0, 3)."""

    n: int
    sigma0: float = 1000.0
    sigma1: float = math.sqrt(2000.0)
    sigma2: float = math.sqrt(2500.0)
    a: float = 20.0
    theta_true: tuple[float, float] = (0.0, 3.0)

    def __post_init__(self):
        for name in ("sigma0", "sigma1", "sigma2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


class GaussianModel(Model):
    def __init__(self, spec: GaussianModelSpec):
        if spec.Sigma is None:
            raise ValueError("GaussianModel needs a concrete Sigma; see synth_dataset")
        self.spec = spec
        self.d = spec.d
        self._mu0 = spec.mu0_vector
        self._prior_prec = 1.0 / spec.sigma0**2
        self._chol = np.linalg.cholesky(spec.Sigma)
        self._logdet = 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    def log_prior(self, theta):
        diff = theta - self._mu0
        return float(
            -0.5 * self.d * _LOG_2PI
            - self.d * math.log(self.spec.sigma0)
            - 0.5 * self._prior_prec * diff @ diff
        )

    def grad_log_prior(self, theta):
        return -self._prior_prec * (theta - self._mu0)

    def log_lik_points(self, X, theta):
        diff = X - theta
        # solve L z = diff^T  =>  quadratic form rows are ||z||^2 columns
        z = np.linalg.solve(self._chol, diff.T)
        quad = np.sum(z * z, axis=0)
        return -0.5 * (self.d * _LOG_2PI + self._logdet + quad)

    def grad_log_lik_points(self, X, theta):
        diff = X - theta
        z = np.linalg.solve(self._chol, diff.T)
        return np.linalg.solve(self._chol.T, z).T


class BananaModel(Model):
    d = 2

    def __init__(self, spec: BananaSpec):
        self.spec = spec
        self._tau0 = 1.0 / spec.sigma0**2
        self._tau1 = 1.0 / spec.sigma1**2
        self._tau2 = 1.0 / spec.sigma2**2

    def log_prior(self, theta):
        # density of Ban(0, sigma0^2 I, a): the transform is volume preserving
        t1, t2 = float(theta[0]), float(theta[1])
        w = t2 + self.spec.a * t1 * t1
        return float(
            -_LOG_2PI
            - 2.0 * math.log(self.spec.sigma0)
            - 0.5 * self._tau0 * (t1 * t1 + w * w)
        )

    def grad_log_prior(self, theta):
        t1, t2 = float(theta[0]), float(theta[1])
        w = t2 + self.spec.a * t1 * t1
        g1 = -self._tau0 * (t1 + 2.0 * self.spec.a * t1 * w)
        g2 = -self._tau0 * w
        return np.array([g1, g2])

    def log_lik_points(self, X, theta):
        t1, t2 = float(theta[0]), float(theta[1])
        mean2 = t2 + self.spec.a * t1 * t1
        r1 = X[:, 0] - t1
        r2 = X[:, 1] - mean2
        return (
            -_LOG_2PI
            - math.log(self.spec.sigma1)
            - math.log(self.spec.sigma2)
            - 0.5 * (self._tau1 * r1 * r1 + self._tau2 * r2 * r2)
        )

    def grad_log_lik_points(self, X, theta):
        t1, t2 = float(theta[0]), float(theta[1])
        mean2 = t2 + self.spec.a * t1 * t1
        r1 = self._tau1 * (X[:, 0] - t1)
        r2 = self._tau2 * (X[:, 1] - mean2)
        g1 = r1 + 2.0 * self.spec.a * t1 * r2
        return np.column_stack([g1, r2])


def make_model(spec) -> Model:
    if isinstance(spec, GaussianModelSpec):
        return GaussianModel(spec)
    if isinstance(spec, BananaSpec):
        return BananaModel(spec)
    raise TypeError(f"unknown model spec type: {type(spec)!r}")


@dataclass
class ReferencePosterior:
    """Analytic posterior: either a Gaussian or a banana-warped Gaussian.

    For kind "gaussian", ``mean``/``cov`` describe the posterior directly.
    For kind "banana", they describe the underlying Gaussian (diagonal
    covariance) to which the transform with curvature ``a`` is applied.
    """

    kind: str
    mean: np.ndarray
    cov: np.ndarray
    a: float = 0.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.kind not in ("gaussian", "banana"):
            raise ValueError(f"unknown posterior kind {self.kind!r}")
        np.linalg.cholesky(self.cov)  # positive definite or bust

    @property
    def d(self) -> int:
        return self.mean.shape[0]


def banana_transform(x: np.ndarray, a: float) -> np.ndarray:
    """(x1, x2) -> (x1, x2 - a*x1^2), applied row-wise for 2-D input."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    if x.ndim == 1:
        out[1] = x[1] - a * x[0] ** 2
    else:
        out[:, 1] = x[:, 1] - a * x[:, 0] ** 2
    return out


def banana_inverse(y: np.ndarray, a: float) -> np.ndarray:
    """Inverse transform: (y1, y2) -> (y1, y2 + a*y1^2)."""
    y = np.asarray(y, dtype=float)
    out = y.copy()
    if y.ndim == 1:
        out[1] = y[1] + a * y[0] ** 2
    else:
        out[:, 1] = y[:, 1] + a * y[:, 0] ** 2
    return out


def gaussian_posterior(spec: GaussianModelSpec, X: np.ndarray) -> ReferencePosterior:
    """Conjugate posterior N(mu_n, Sigma_n) of the known-covariance model.

    Sigma_n = (Sigma0^-1 + n Sigma^-1)^-1 and
    mu_n = Sigma_n (Sigma0^-1 mu0 + n Sigma^-1 xbar) with Sigma0 = sigma0^2 I.
    """
    if spec.Sigma is None:
        raise ValueError("posterior needs a concrete Sigma")
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    prior_prec = np.eye(spec.d) / spec.sigma0**2
    if n == 0:
        cov = np.eye(spec.d) * spec.sigma0**2
        return ReferencePosterior("gaussian", spec.mu0_vector, cov)
    lik_prec = np.linalg.inv(spec.Sigma)
    prec = prior_prec + n * lik_prec
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    xbar = X.mean(axis=0)
    mean = cov @ (prior_prec @ spec.mu0_vector + n * lik_prec @ xbar)
    return ReferencePosterior("gaussian", mean, cov)


def banana_posterior(spec: BananaSpec, X: np.ndarray) -> ReferencePosterior:
    """Posterior Ban(mu, Sigma, a) of the banana model, in closed form."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError("banana data must have two columns")
    n = X.shape[0]
    tau0 = 1.0 / spec.sigma0**2
    tau1 = 1.0 / spec.sigma1**2
    tau2 = 1.0 / spec.sigma2**2
    xbar = X.mean(axis=0) if n > 0 else np.zeros(2)
    mean = np.array(
        [n * tau1 * xbar[0] / (n * tau1 + tau0), n * tau2 * xbar[1] / (n * tau2 + tau0)]
    )
    cov = np.diag([1.0 / (n * tau1 + tau0), 1.0 / (n * tau2 + tau0)])
    return ReferencePosterior("banana", mean, cov, a=spec.a)


def sample_reference(ref: ReferencePosterior, m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw m i.i.d. samples from an analytic posterior."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    chol = np.linalg.cholesky(ref.cov)
    z = rng.standard_normal((m, ref.d))
    gauss = ref.mean + z @ chol.T
    if ref.kind == "gaussian":
        return gauss
    return banana_transform(gauss, ref.a)


def reference_theta_mean(ref: ReferencePosterior) -> np.ndarray:
    """Exact posterior mean in parameter space (transform applied for banana)."""
    if ref.kind == "gaussian":
        return ref.mean.copy()
    # E[g(z)] for z ~ N(mean, cov): second coordinate picks up -a E[z1^2]
    mean = ref.mean.copy()
    mean[1] -= ref.a * (ref.cov[0, 0] + ref.mean[0] ** 2)
    return mean


def random_covariance(d: int, rng: np.random.Generator) -> np.ndarray:
    """Random SPD matrix: gamma(0.5, 1) eigenvalues, uniform eigenvectors.

    The eigenvector basis comes from Gram-Schmidt on the columns of a
    Uniform[0, 1] matrix; a rank-deficient draw is resampled.
    """
    for _ in range(100):
        eigvals = rng.gamma(shape=0.5, scale=1.0, size=d)
        M = rng.uniform(0.0, 1.0, size=(d, d))
        Q = _gram_schmidt_columns(M)
        if Q is None or np.any(eigvals <= 0):
            continue
        sigma = (Q * eigvals) @ Q.T
        return 0.5 * (sigma + sigma.T)
    raise RuntimeError("failed to draw a full-rank eigenvector basis")


def _gram_schmidt_columns(M: np.ndarray) -> np.ndarray | None:
    d = M.shape[0]
    Q = np.zeros_like(M)
    for j in range(d):
        v = M[:, j].copy()
        for _ in range(2):  # re-orthogonalise for numerical safety
            v -= Q[:, :j] @ (Q[:, :j].T @ v)
        norm = np.linalg.norm(v)
        if norm < 1e-10:
            return None
        Q[:, j] = v / norm
    return Q


@dataclass
class Dataset:
    """Observations plus the spec that generated them."""

    X: np.ndarray
    spec: GaussianModelSpec | BananaSpec

    @property
    def n(self) -> int:
        return self.X.shape[0]


def synth_dataset(spec, rng: np.random.Generator) -> Dataset:
    """Generate data from a model spec; fills in a random Sigma when absent."""
    if isinstance(spec, GaussianModelSpec):
        if spec.Sigma is None:
            sigma = random_covariance(spec.d, rng)
            spec = GaussianModelSpec(
                d=spec.d,
                n=spec.n,
                mu0=spec.mu0,
                sigma0=spec.sigma0,
                Sigma=sigma,
                theta_true=spec.theta_true,
            )
        chol = np.linalg.cholesky(spec.Sigma)
        z = rng.standard_normal((spec.n, spec.d))
        X = spec.theta_true_vector + z @ chol.T
        return Dataset(X, spec)
    if isinstance(spec, BananaSpec):
        t1, t2 = spec.theta_true
        x1 = rng.normal(t1, spec.sigma1, size=spec.n)
        x2 = rng.normal(t2 + spec.a * t1 * t1, spec.sigma2, size=spec.n)
        return Dataset(np.column_stack([x1, x2]), spec)
    raise TypeError(f"unknown model spec type: {type(spec)!r}")


def potential_and_grad(
    model: Model, X: np.ndarray, theta: np.ndarray
) -> tuple[float, np.ndarray]:
    """Exact potential U = -log pi and its gradient (no clipping, no noise)."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        u = -model.log_prior(theta)
        grad = -model.grad_log_prior(theta)
    else:
        u = -float(np.sum(model.log_lik_points(X, theta))) - model.log_prior(theta)
        grad = -model.grad_log_lik_points(X, theta).sum(axis=0) - model.grad_log_prior(theta)
    return u, grad


# -- on-disk format: CSV of points plus a JSON sidecar -----------------------


def spec_to_jsonable(spec) -> dict:
    if isinstance(spec, GaussianModelSpec):
        return {
            "model": "gaussian",
            "d": spec.d,
            "n": spec.n,
            "mu0": spec.mu0,
            "sigma0": spec.sigma0,
            "Sigma": None if spec.Sigma is None else spec.Sigma.tolist(),
            "theta_true": None if spec.theta_true is None else spec.theta_true.tolist(),
        }
    if isinstance(spec, BananaSpec):
        return {
            "model": "banana",
            "n": spec.n,
            "sigma0": spec.sigma0,
            "sigma1": spec.sigma1,
            "sigma2": spec.sigma2,
            "a": spec.a,
            "theta_true": list(spec.theta_true),
        }
    raise TypeError(f"unknown model spec type: {type(spec)!r}")


def spec_from_jsonable(data: dict):
    kind = data["model"]
    if kind == "gaussian":
        return GaussianModelSpec(
            d=data["d"],
            n=data["n"],
            mu0=data["mu0"],
            sigma0=data["sigma0"],
            Sigma=data["Sigma"],
            theta_true=data["theta_true"],
        )
    if kind == "banana":
        return BananaSpec(
            n=data["n"],
            sigma0=data["sigma0"],
            sigma1=data["sigma1"],
            sigma2=data["sigma2"],
            a=data["a"],
            theta_true=tuple(data["theta_true"]),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_dataset(dataset: Dataset, path: str | Path, seed=None) -> None:
    """Write points as CSV (header x1..xd) with a JSON sidecar next to it."""
    path = Path(path)
    d = dataset.X.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(d)])
        for row in dataset.X:
            writer.writerow([repr(float(v)) for v in row])
    sidecar = {
        "spec": spec_to_jsonable(dataset.spec),
        "seed": seed,
        "orthonormalization": "gram-schmidt",
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    X = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    return Dataset(X, spec_from_jsonable(sidecar["spec"]))
