"""Static principal-component baseline and singular-value tail sums."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContractViolation, TimeSeries


@dataclass(frozen=True)
class PcaResult:
    """Centered SVD of the data matrix: mean, full basis, singular values."""

    mean: np.ndarray              # (n,)
    basis: np.ndarray             # (n, n), orthogonal, columns sorted
    singular_values: np.ndarray   # (n,), non-increasing

    def __post_init__(self):
        for arr in (self.mean, self.basis, self.singular_values):
            np.asarray(arr).setflags(write=False)

    def leading(self, m: int) -> np.ndarray:
        """The first m basis columns (the rank-m compression subspace)."""
        return self.basis[:, :m]


def principal_components(series: TimeSeries) -> PcaResult:
    """SVD of the mean-removed data matrix.

    The squared singular values sum to the centered Frobenius energy, so
    the tail past m is exactly the best rank-m reconstruction error.
    """
    Z = series.values
    mean = Z.mean(axis=1)
    U, S, _ = np.linalg.svd(Z - mean[:, None], full_matrices=True)
    n = Z.shape[0]
    sv = np.zeros(n)
    sv[: S.shape[0]] = S
    return PcaResult(mean=mean, basis=U, singular_values=sv)


def spectrum_tail(result: PcaResult, m: int, N: int) -> float:
    """Mean residual energy per snapshot beyond the first m components."""
    n = result.singular_values.shape[0]
    if not 0 <= m <= n:
        raise ContractViolation(f"need 0 <= m <= {n}, got {m}")
    return float(np.sum(result.singular_values[m:] ** 2) / N)
