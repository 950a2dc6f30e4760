"""Sample-quality metrics: MMD with a Gaussian kernel, mean error, and the
split potential-scale-reduction diagnostic.

The MMD estimator is the biased V-statistic, which is guaranteed
nonnegative and therefore plot-friendly.  The kernel convention is
k(x, y) = exp(-||x - y||^2 / (2 w^2)); the width ``w`` is recorded in every
result because "Gaussian kernel" is ambiguous by a factor of two in the
exponent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "MmdResult",
    "median_heuristic_width",
    "mmd",
    "mean_error",
    "split_r_hat",
    "permutation_null_mmd2",
    "effective_sample_size",
]

_SUBSAMPLE = 500


@dataclass(frozen=True)
class MmdResult:
    value: float  # MMD^2, nonnegative for the V-statistic
    kernel_width: float
    estimator_kind: str = "biased"

    @property
    def mmd(self) -> float:
        return float(np.sqrt(max(self.value, 0.0)))


def median_heuristic_width(
    A: np.ndarray, B: np.ndarray, rng: np.random.Generator
) -> float:
    """Kernel width: median distance between 500-point with-replacement
    subsamples of A and B (cross distances).

    Falls back to width 1 with a warning when the median degenerates to
    zero (all points identical).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("median heuristic needs nonempty samples")
    sub_a = A[rng.integers(0, A.shape[0], size=_SUBSAMPLE)]
    sub_b = B[rng.integers(0, B.shape[0], size=_SUBSAMPLE)]
    width = float(np.median(cdist(sub_a, sub_b)))
    if width <= 0.0:
        warnings.warn(
            "median heuristic degenerated to zero; falling back to width 1",
            RuntimeWarning,
            stacklevel=2,
        )
        return 1.0
    return width


def _kernel_mean(A: np.ndarray, B: np.ndarray, width: float) -> float:
    # fixed-size row blocks bound memory at ~32 MB and keep summation
    # order (and hence the result) independent of the sample sizes
    denom = 2.0 * width**2
    block = max(1, 4_000_000 // max(B.shape[0], 1))
    total = 0.0
    for start in range(0, A.shape[0], block):
        sq = cdist(A[start : start + block], B, "sqeuclidean")
        total += float(np.sum(np.exp(-sq / denom)))
    return total / (A.shape[0] * B.shape[0])


def mmd(A: np.ndarray, B: np.ndarray, width: float) -> MmdResult:
    """Biased (V-statistic) squared maximum mean discrepancy.

    MMD^2 = mean k(A, A) + mean k(B, B) - 2 mean k(A, B); the full kernel
    means include the diagonal, which keeps the estimate nonnegative.
    """
    if width <= 0:
        raise ValueError(f"kernel width must be > 0, got {width}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    value = (
        _kernel_mean(A, A, width) + _kernel_mean(B, B, width) - 2.0 * _kernel_mean(A, B, width)
    )
    return MmdResult(value=value, kernel_width=width)


def mean_error(S: np.ndarray, reference_mean: np.ndarray) -> float:
    """Euclidean distance between the sample column mean and a reference mean."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    reference_mean = np.asarray(reference_mean, dtype=float)
    if S.shape[1] != reference_mean.shape[0]:
        raise ValueError("dimension mismatch between sample and reference mean")
    return float(np.linalg.norm(S.mean(axis=0) - reference_mean))


def split_r_hat(chains) -> float:
    """Split potential-scale-reduction factor, maximised over coordinates.

    Each chain is halved (the middle draw of an odd-length chain is
    dropped), the classic between/within variance ratio is computed per
    coordinate, and the maximum is returned.  Zero within-chain variance
    with distinct chains yields +inf.
    """
    arrays = [np.atleast_2d(np.asarray(c, dtype=float)) for c in chains]
    if len(arrays) < 2:
        raise ValueError("split_r_hat needs at least two chains")
    length = arrays[0].shape[0]
    if any(a.shape != arrays[0].shape for a in arrays):
        raise ValueError("chains must share a common shape")
    if length < 4:
        raise ValueError("chains must have length >= 4")
    half = length // 2
    groups = []
    for a in arrays:
        groups.append(a[:half])
        groups.append(a[length - half :])
    stacked = np.stack(groups)  # (2m, half, d)
    means = stacked.mean(axis=1)
    variances = stacked.var(axis=1, ddof=1)
    W = variances.mean(axis=0)
    B = half * means.var(axis=0, ddof=1)
    worst = 0.0
    for j in range(stacked.shape[2]):
        if W[j] == 0.0:
            if B[j] > 0.0:
                return float("inf")
            continue
        var_plus = (half - 1) / half * W[j] + B[j] / half
        worst = max(worst, float(np.sqrt(var_plus / W[j])))
    return worst


def permutation_null_mmd2(
    A: np.ndarray,
    B: np.ndarray,
    width: float,
    n_permutations: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Null distribution of MMD^2 under label permutation of the pooled rows."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    pooled = np.vstack([A, B])
    m = A.shape[0]
    values = np.empty(n_permutations)
    for i in range(n_permutations):
        perm = rng.permutation(pooled.shape[0])
        values[i] = mmd(pooled[perm[:m]], pooled[perm[m:]], width).value
    return values


def effective_sample_size(x: np.ndarray) -> float:
    """Effective sample size of a scalar chain via the initial-positive-sequence
    autocorrelation estimator.  Minimal version, used for Monte Carlo
    standard errors in the acceptance checks."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4:
        return float(n)
    centred = x - x.mean()
    var = float(centred @ centred) / n
    if var == 0.0:
        return float(n)
    # autocovariance via FFT
    size = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centred, size)
    acov = np.fft.irfft(f * np.conjugate(f))[:n].real / n
    rho = acov / acov[0]
    # Geyer: sum consecutive pairs while they stay positive
    total = 0.0
    for t in range(1, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        total += pair
    ess = n / (1.0 + 2.0 * total)
    return float(min(max(ess, 1.0), n))
