"""Recovery diagnostics, climatology utilities and prediction reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ContractViolation, DegenerateComparisonError, InsufficientDataError,
    ReducedModel, TimeSeries, evaluate_cost, predicted_reduced, project_series,
)


@dataclass(frozen=True)
class SubspaceComparison:
    """Fitted-vs-true subspace and dynamics errors, with the aligning map B."""

    e_Q: float
    e_A: float
    B: np.ndarray


def subspace_error(Qx_true: np.ndarray, Qx_fit: np.ndarray):
    """Relative error between two column-orthonormal bases.

    B = Qx_fit' Qx_true projects the fitted columns onto the true span;
    the error is ||Qx_fit' - B Qx_true'|| / ||Qx_true|| in Frobenius
    norm, zero iff the two matrices span the same subspace.
    """
    Qt = np.asarray(Qx_true, dtype=float)
    Qf = np.asarray(Qx_fit, dtype=float)
    if Qt.shape != Qf.shape:
        raise ContractViolation("bases must have equal shapes")
    m = Qt.shape[1]
    for name, Q in (("true", Qt), ("fitted", Qf)):
        if np.linalg.norm(Q.T @ Q - np.eye(m)) > 1e-8:
            raise ContractViolation(f"{name} basis is not column-orthonormal")
    B = Qf.T @ Qt
    e_Q = float(np.linalg.norm(Qf.T - B @ Qt.T) / np.linalg.norm(Qt))
    return e_Q, B


def dynamics_error(A_true: np.ndarray, A_fit: np.ndarray, B: np.ndarray) -> float:
    """Relative dynamics error modulo the basis change B.

    ||A_true - B^-1 A_fit B|| / ||A_fit||; zero when the two matrices
    represent the same map in their respective coordinates.
    """
    At = np.asarray(A_true, dtype=float)
    Af = np.asarray(A_fit, dtype=float)
    B = np.asarray(B, dtype=float)
    cond = np.linalg.cond(B)
    if not np.isfinite(cond) or cond > 1e8:
        raise DegenerateComparisonError(
            "basis-change matrix is (nearly) singular; the subspaces are "
            "close to orthogonal and the dynamics are not comparable")
    return float(np.linalg.norm(At - np.linalg.solve(B, Af @ B))
                 / np.linalg.norm(Af))


def compare_models(truth: ReducedModel, fitted: ReducedModel,
                   slot: int | None = None) -> SubspaceComparison:
    """e_Q / e_A between two models.

    For slotted models the maximum over slots is reported; for order-r
    dynamics the errors of the A_i are combined as a stacked matrix.
    """
    if (truth.n, truth.m, truth.r) != (fitted.n, fitted.m, fitted.r):
        raise ContractViolation("models have incompatible shapes")
    slots = [slot] if slot is not None else range(truth.n_slots)
    worst = None
    for s in slots:
        e_Q, B = subspace_error(truth.Qx(s), fitted.Qx(s))
        e_A = max(dynamics_error(truth.A[s, i], fitted.A[s, i], B)
                  for i in range(truth.r))
        if worst is None or max(e_Q, e_A) > max(worst.e_Q, worst.e_A):
            worst = SubspaceComparison(e_Q=e_Q, e_A=e_A, B=B)
    return worst


def natural_basis(A: np.ndarray):
    """Singular-vector bases of A, ordered by sensitivity.

    Returns (U_in, U_out): U_in columns are the input directions
    (eigenvectors of A'A) and U_out the corresponding output directions
    (eigenvectors of AA'), with A = U_out diag(s) U_in'.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ContractViolation("A has non-finite entries")
    U, s, Vt = np.linalg.svd(A)
    return Vt.T, U


def monthly_climatology(series: TimeSeries, T: int):
    """Per-phase mean table and the anomaly series.

    Phase of column j is j mod T.  Returns (climatology, anomalies) with
    the climatology of shape (n, T); adding it back phase-by-phase
    reconstructs the input exactly.
    """
    Z = series.values
    n, N = Z.shape
    if N < T:
        raise InsufficientDataError(f"need at least T={T} snapshots, got {N}")
    phase = np.arange(N) % T
    clim = np.zeros((n, T))
    counts = np.bincount(phase, minlength=T)
    np.add.at(clim.T, phase, Z.T)
    clim /= counts
    anomalies = Z - clim[:, phase]
    anom_series = TimeSeries(anomalies, times=series.times,
                             exogenous=series.exogenous,
                             channel_names=series.channel_names)
    return clim, anom_series


#: 1-based channels closest to the classical warm-anomaly regions on the
#: 50-point ocean grid used by the bundled examples.
ENSO_CHANNELS_50 = (16, 17, 24, 28, 29, 32, 33, 37, 41, 42)


def anomaly_index(series: TimeSeries, channels=None, window: int = 3,
                  T: int = 12) -> np.ndarray:
    """Running mean of the channel-averaged anomaly.

    ``channels`` are 1-based indices (defaults to the 10-point warm-pool
    set when the series has 50 channels, else all channels); ``window``
    must be odd and the running mean is truncated, so the result has
    length N - window + 1.
    """
    n, N = series.values.shape
    if channels is None:
        channels = ENSO_CHANNELS_50 if n == 50 else tuple(range(1, n + 1))
    idx = np.asarray(channels, dtype=int) - 1
    if np.any(idx < 0) or np.any(idx >= n):
        raise ContractViolation(f"channel ids must lie in [1, {n}]")
    if window < 1 or window % 2 == 0:
        raise ContractViolation("window must be a positive odd integer")
    if window > N:
        raise InsufficientDataError(f"window {window} exceeds series length {N}")
    _, anom = monthly_climatology(series, T)
    track = anom.values[idx].mean(axis=0)
    kernel = np.full(window, 1.0 / window)
    return np.convolve(track, kernel, mode="valid")


@dataclass(frozen=True)
class PredictionReport:
    """Aligned one-step predictions and their error summary.

    ``predicted_columns`` are the snapshot indices being predicted; the
    actual/predicted tracks cover exactly those columns.  The aggregate
    squared error equals the predictive cost total.
    """

    predicted_columns: np.ndarray
    x_actual: np.ndarray          # (m, P)
    x_predicted: np.ndarray       # (m, P)
    z_actual: np.ndarray          # (n, P)
    z_predicted: np.ndarray       # (n, P)
    channel_rmse: np.ndarray      # (n,)
    x_rmse: np.ndarray            # (m,)
    total_squared_error: float
    aggregate_rmse: float


def prediction_report(model: ReducedModel, series: TimeSeries) -> PredictionReport:
    """One-step prediction tracks and RMSE, consistent with the cost."""
    X, Y, slot_of = project_series(model, series)
    J, Xhat = predicted_reduced(model, X, slot_of)
    t = J + 1
    x_actual = X[:, t]
    ybar_t = model.ybar[slot_of[t]].T
    # back to observation space: modeled prediction plus complement mean
    Qt = model.Q[slot_of[t]]
    z_pred = (np.einsum("jnp,pj->nj", Qt[:, :, : model.m], Xhat)
              + np.einsum("jnp,pj->nj", Qt[:, :, model.m:], ybar_t))
    z_actual = series.values[:, t]
    rz = z_actual - z_pred
    P = t.size
    channel_rmse = np.sqrt(np.sum(rz * rz, axis=1) / P)
    rx = x_actual - Xhat
    x_rmse = np.sqrt(np.sum(rx * rx, axis=1) / P)
    total = float(np.sum(rz * rz))
    return PredictionReport(
        predicted_columns=t, x_actual=x_actual, x_predicted=Xhat,
        z_actual=z_actual, z_predicted=z_pred, channel_rmse=channel_rmse,
        x_rmse=x_rmse, total_squared_error=total,
        aggregate_rmse=float(np.sqrt(total / P)))


def canonical_2d(model: ReducedModel):
    """Canonical (theta, a_1..a_r, b, ybar) curves for a 2-channel model.

    The basis angle of each slot is reduced to (-pi/2, pi/2] and the
    sign indeterminacies of both basis columns are folded into the
    dynamics, drift and complement mean, so two models describing the
    same dynamics yield identical curves.
    """
    if model.n != 2 or model.m != 1:
        raise ContractViolation("canonical form is defined for n=2, m=1 models")
    S = model.n_slots
    theta = np.empty(S)
    sx = np.ones(S)
    sy = np.ones(S)
    for s in range(S):
        qx = model.Q[s][:, 0]
        th = float(np.arctan2(qx[1], qx[0]))
        while th > np.pi / 2:
            th -= np.pi
            sx[s] = -sx[s]
        while th <= -np.pi / 2:
            th += np.pi
            sx[s] = -sx[s]
        theta[s] = th
        qy_expected = np.array([-np.sin(th), np.cos(th)])
        sy[s] = 1.0 if model.Q[s][:, 1] @ qy_expected >= 0 else -1.0

    def nxt(s):  # slot receiving the prediction made from slot s
        if model.slots.mode == "periodic":
            return (s + 1) % S
        if model.slots.mode == "per_step":
            return min(s + 1, S - 1)
        return s

    def back(s, i):  # slot of the state i steps back
        if model.slots.mode == "periodic":
            return (s - i) % S
        if model.slots.mode == "per_step":
            return max(s - i, 0)
        return s

    a = np.empty((S, model.r))
    b = np.empty(S)
    ybar = np.empty(S)
    for s in range(S):
        for i in range(model.r):
            a[s, i] = sx[nxt(s)] * model.A[s, i, 0, 0] * sx[back(s, i)]
        b[s] = sx[nxt(s)] * model.b[s, 0]
        ybar[s] = sy[s] * model.ybar[s, 0]
    return theta, a, b, ybar


def cost_gap_to_floor(model: ReducedModel, series: TimeSeries,
                      c_star: float) -> float:
    """Excess normalized cost over the irreducible noise floor."""
    _, normalized = evaluate_cost(model, series)
    return normalized - c_star
