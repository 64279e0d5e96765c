"""Domain types and shared primitives.

Holds the observation container, the slot indexing scheme for
time-varying parameters, the reduced linear model, the one-step
predictive cost, and the plane-rotation update used by the fitter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np


class PdcError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(PdcError, ValueError):
    """An argument violates a documented precondition."""


class InsufficientDataError(PdcError, ValueError):
    """The series is too short for the requested operation."""


class IllConditionedError(PdcError):
    """A normal-equations system is singular and no ridge was supplied."""


class FitFailureError(PdcError):
    """The fit could not proceed; carries diagnostics in args."""


class DegenerateComparisonError(PdcError):
    """Model comparison is meaningless (e.g. near-orthogonal subspaces)."""


def _as_matrix(values) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise ContractViolation(f"expected a 2-d array, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class TimeSeries:
    """An n x N observation matrix: rows are channels, columns snapshots.

    ``times`` defaults to 1..N.  ``exogenous`` maps a track name to a
    length-N sequence of known external values (e.g. a control signal).
    Missing or non-finite values are rejected outright; no imputation.
    """

    values: np.ndarray
    times: np.ndarray = None  # type: ignore[assignment]
    exogenous: Mapping[str, np.ndarray] = field(default_factory=dict)
    channel_names: tuple[str, ...] | None = None

    def __post_init__(self):
        values = _as_matrix(self.values)
        n, N = values.shape
        if N < 2:
            raise ContractViolation(f"need at least 2 snapshots, got {N}")
        if not np.all(np.isfinite(values)):
            raise ContractViolation("observation matrix contains non-finite entries")
        times = self.times
        if times is None:
            times = np.arange(1.0, N + 1.0)
        times = np.asarray(times, dtype=float)
        if times.shape != (N,):
            raise ContractViolation(f"times must have length {N}, got shape {times.shape}")
        if not np.all(np.diff(times) > 0):
            raise ContractViolation("times must be strictly increasing")
        exo = {}
        for name, track in self.exogenous.items():
            track = np.asarray(track, dtype=float)
            if track.shape != (N,):
                raise ContractViolation(f"exogenous track {name!r} must have length {N}")
            if not np.all(np.isfinite(track)):
                raise ContractViolation(f"exogenous track {name!r} has non-finite entries")
            track.setflags(write=False)
            exo[name] = track
        if self.channel_names is not None and len(self.channel_names) != n:
            raise ContractViolation("channel_names length does not match channel count")
        values = values.copy()
        values.setflags(write=False)
        times = times.copy()
        times.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "exogenous", exo)

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.values.shape[1]


AUTONOMOUS = "autonomous"
PERIODIC = "periodic"
PER_STEP = "per_step"


@dataclass(frozen=True)
class SlotIndexer:
    """Maps a snapshot index j to the parameter slot governing it.

    ``autonomous`` keeps a single parameter set; ``periodic`` cycles
    through ``period`` sets (slot = j mod period); ``per_step`` gives
    every snapshot its own set.
    """

    mode: str = AUTONOMOUS
    period: int | None = None

    def __post_init__(self):
        if self.mode not in (AUTONOMOUS, PERIODIC, PER_STEP):
            raise ContractViolation(f"unknown slot mode {self.mode!r}")
        if self.mode == PERIODIC:
            if self.period is None or int(self.period) < 1:
                raise ContractViolation("periodic mode needs a positive integer period")
            object.__setattr__(self, "period", int(self.period))
        elif self.period is not None:
            raise ContractViolation(f"{self.mode} mode takes no period")

    def n_slots(self, n_snapshots: int) -> int:
        if self.mode == AUTONOMOUS:
            return 1
        if self.mode == PERIODIC:
            return self.period  # type: ignore[return-value]
        return n_snapshots

    def slot_of(self, j: int) -> int:
        if self.mode == AUTONOMOUS:
            return 0
        if self.mode == PERIODIC:
            return j % self.period  # type: ignore[operator]
        return j

    def slots(self, n_snapshots: int) -> np.ndarray:
        """Slot index for every column, as an int array of length N."""
        j = np.arange(n_snapshots)
        if self.mode == AUTONOMOUS:
            return np.zeros(n_snapshots, dtype=int)
        if self.mode == PERIODIC:
            return j % self.period  # type: ignore[operator]
        return j


_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class ReducedModel:
    """Orthogonal basis plus linear predictor, possibly slot-dependent.

    Per slot: an orthogonal n x n matrix Q whose first m columns span the
    modeled subspace, memory matrices A of shape (r, m, m), drift b, and
    the mean of the unmodeled complement.  Arrays are stacked over slots
    along axis 0 and frozen after validation.
    """

    n: int
    m: int
    r: int
    slots: SlotIndexer
    Q: np.ndarray          # (S, n, n)
    A: np.ndarray          # (S, r, m, m)
    b: np.ndarray          # (S, m)
    ybar: np.ndarray       # (S, n - m)

    def __post_init__(self):
        n, m, r = self.n, self.m, self.r
        if not (0 < m < n):
            raise ContractViolation(f"need 0 < m < n, got m={m}, n={n}")
        if r < 1:
            raise ContractViolation(f"memory order must be >= 1, got {r}")
        Q = np.asarray(self.Q, dtype=float)
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        ybar = np.asarray(self.ybar, dtype=float)
        if Q.ndim != 3 or Q.shape[1:] != (n, n):
            raise ContractViolation(f"Q must be (S, {n}, {n}), got {Q.shape}")
        S = Q.shape[0]
        if self.slots.mode == AUTONOMOUS and S != 1:
            raise ContractViolation("autonomous model must have exactly one slot")
        if self.slots.mode == PERIODIC and S != self.slots.period:
            raise ContractViolation("periodic model must have one slot per phase")
        if A.shape != (S, r, m, m):
            raise ContractViolation(f"A must be {(S, r, m, m)}, got {A.shape}")
        if b.shape != (S, m):
            raise ContractViolation(f"b must be {(S, m)}, got {b.shape}")
        if ybar.shape != (S, n - m):
            raise ContractViolation(f"ybar must be {(S, n - m)}, got {ybar.shape}")
        eye = np.eye(n)
        for s in range(S):
            drift = np.linalg.norm(Q[s].T @ Q[s] - eye)
            if drift > _ORTHO_TOL:
                raise ContractViolation(
                    f"slot {s}: Q deviates from orthogonality by {drift:.3e}")
        for arr in (Q, A, b, ybar):
            arr.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "ybar", ybar)

    @property
    def n_slots(self) -> int:
        return self.Q.shape[0]

    def Qx(self, slot: int = 0) -> np.ndarray:
        return self.Q[slot][:, : self.m]

    def Qy(self, slot: int = 0) -> np.ndarray:
        return self.Q[slot][:, self.m:]


def project_split(model: ReducedModel, z: np.ndarray, slot: int = 0):
    """Split an observation into modeled and complement coordinates.

    Returns (x, y) with x = Qx'z and y = Qy'z for the given slot.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (model.n,):
        raise ContractViolation(f"z must have shape ({model.n},), got {z.shape}")
    if not 0 <= slot < model.n_slots:
        raise ContractViolation(f"slot {slot} out of range [0, {model.n_slots})")
    if not np.all(np.isfinite(z)):
        raise ContractViolation("z has non-finite entries")
    w = model.Q[slot].T @ z
    return w[: model.m], w[model.m:]


def predict_expectation(model: ReducedModel, history, slot: int = 0) -> np.ndarray:
    """One-step conditional expectation b + sum_i A_i x_{j-i+1}.

    ``history`` lists the last r reduced states, oldest first.
    """
    hist = [np.asarray(h, dtype=float) for h in history]
    if len(hist) != model.r:
        raise ContractViolation(f"history must have length r={model.r}, got {len(hist)}")
    for h in hist:
        if h.shape != (model.m,):
            raise ContractViolation(f"history entries must have shape ({model.m},)")
    if not 0 <= slot < model.n_slots:
        raise ContractViolation(f"slot {slot} out of range")
    out = model.b[slot].copy()
    # A_i multiplies the state i-1 steps back: hist[-1] is x_j, hist[-2] is x_{j-1}, ...
    for i in range(model.r):
        out += model.A[slot, i] @ hist[model.r - 1 - i]
    return out


def project_series(model: ReducedModel, series: TimeSeries):
    """Project every snapshot with its slot's basis.

    Returns (X, Y, slot_of) with X of shape (m, N) and Y of shape
    (n - m, N); column j uses Q of slot(j).
    """
    Z = series.values
    n, N = Z.shape
    if n != model.n:
        raise ContractViolation(f"model expects n={model.n} channels, series has {n}")
    slot_of = model.slots.slots(N)
    if model.slots.mode == PER_STEP and model.n_slots != N:
        raise ContractViolation("per-step model slot count must equal series length")
    W = np.einsum("jnk,nj->kj", model.Q[slot_of], Z)
    return W[: model.m], W[model.m:], slot_of


def predicted_reduced(model: ReducedModel, X: np.ndarray, slot_of: np.ndarray):
    """Predictions for columns r..N-1 from the r preceding columns.

    Returns (J, Xhat) where J indexes the predictor columns (the
    prediction for column j+1 is made with the parameters of slot(j)).
    """
    r, m = model.r, model.m
    N = X.shape[1]
    if N <= r:
        raise InsufficientDataError(f"need N > r, got N={N}, r={r}")
    J = np.arange(r - 1, N - 1)
    A_cols = model.A[slot_of[J]]                      # (|J|, r, m, m)
    Xhat = model.b[slot_of[J]].T.copy()               # (m, |J|)
    for i in range(r):
        Xhat += np.einsum("jpq,qj->pj", A_cols[:, i], X[:, J - i])
    return J, Xhat


def evaluate_cost(model: ReducedModel, series: TimeSeries):
    """Total and per-step one-step predictive cost.

    Sums, over predicted snapshots r..N-1, the squared residual of the
    complement against its mean and of the reduced state against its
    prediction.  Returns (total, total / (N - r)).
    """
    X, Y, slot_of = project_series(model, series)
    N = X.shape[1]
    if N <= model.r:
        raise InsufficientDataError(f"need N > r, got N={N}, r={model.r}")
    J, Xhat = predicted_reduced(model, X, slot_of)
    rx = X[:, J + 1] - Xhat
    ry = Y[:, J + 1] - model.ybar[slot_of[J + 1]].T
    total = float(np.sum(rx * rx) + np.sum(ry * ry))
    return total, total / (N - model.r)


def apply_plane_rotation(Q: np.ndarray, k: int, l: int, theta: float) -> np.ndarray:
    """Rotate columns k and l of Q by theta (0-based indices, k < l).

    Column k becomes cos(theta) q_k + sin(theta) q_l and column l
    becomes -sin(theta) q_k + cos(theta) q_l, so the projected
    coordinates transform as x_k <- c x_k + s x_l, x_l <- -s x_k + c x_l.
    """
    Q = _as_matrix(Q)
    n = Q.shape[1]
    if not (0 <= k < l < n):
        raise ContractViolation(f"need 0 <= k < l < {n}, got k={k}, l={l}")
    out = Q.copy()
    c, s = np.cos(theta), np.sin(theta)
    qk, ql = Q[:, k], Q[:, l]
    out[:, k] = c * qk + s * ql
    out[:, l] = -s * qk + c * ql
    return out


def reorthonormalize(Q: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt pass to strip accumulated rounding drift."""
    Q = _as_matrix(Q).copy()
    n = Q.shape[1]
    for j in range(n):
        for i in range(j):
            Q[:, j] -= (Q[:, i] @ Q[:, j]) * Q[:, i]
        Q[:, j] /= np.linalg.norm(Q[:, j])
    return Q


def autonomous_model(Q, A, b=None, ybar=None, r: int | None = None) -> ReducedModel:
    """Convenience constructor for a single-slot model.

    ``A`` may be a single m x m matrix (order 1) or a stack of r of them.
    """
    Q = _as_matrix(Q)
    n = Q.shape[0]
    A = np.asarray(A, dtype=float)
    if A.ndim == 2:
        A = A[None]
    if r is not None and A.shape[0] != r:
        raise ContractViolation(f"A stack has {A.shape[0]} matrices, expected r={r}")
    m = A.shape[1]
    b = np.zeros(m) if b is None else np.asarray(b, dtype=float)
    ybar = np.zeros(n - m) if ybar is None else np.asarray(ybar, dtype=float)
    return ReducedModel(
        n=n, m=m, r=A.shape[0], slots=SlotIndexer(AUTONOMOUS),
        Q=Q[None], A=A[None], b=b[None], ybar=ybar[None])
