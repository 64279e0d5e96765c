"""Joint descent over the orthogonal basis and the linear predictor.

Each step proposes a profile over time (or an exogenous track), solves
the weighted normal equations for the linear parameters in closed form,
and takes one plane-rotation step of the basis along the same profile,
sized by a local quadratic model of the cost with a clamped-descent
fallback.  Steps that would raise the cost are rolled back, so the
logged trace of accepted steps is non-increasing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import trials
from .core import (
    AUTONOMOUS, PERIODIC, PER_STEP, ContractViolation, FitFailureError,
    IllConditionedError, InsufficientDataError, ReducedModel, SlotIndexer,
    TimeSeries, evaluate_cost, reorthonormalize,
)
from .pca import principal_components
from .trials import TrialFunction, draw_trial

_REORTHO_EVERY = 500


@dataclass(frozen=True)
class FitConfig:
    """Everything a fit needs besides the data."""

    m: int
    r: int = 1
    slots: SlotIndexer = field(default_factory=SlotIndexer)
    k_tot: int = 1000
    eps_theta: float = 0.5
    L0: float | None = None
    Lf: float | None = None
    mix: Mapping[str, float] | None = None
    seed: int = 0
    ridge: float = 0.0
    stop_tol: float = 1e-6
    stop_window: int = 50
    s_track: str | None = None
    trial_period: float | None = None
    fourier_max_k: int = 8
    restarts: int = 4

    def __post_init__(self):
        if self.m < 1 or self.r < 1:
            raise ContractViolation("need m >= 1 and r >= 1")
        if self.restarts < 0:
            raise ContractViolation("restarts must be non-negative")
        if not 0 < self.eps_theta <= np.pi / 2:
            raise ContractViolation("eps_theta must lie in (0, pi/2]")
        if self.ridge < 0:
            raise ContractViolation("ridge must be non-negative")


@dataclass
class FitReport:
    """Per-step log of one fit."""

    cost_trace: np.ndarray        # normalized cost after each step (index 0 = start)
    accepted: np.ndarray          # bool, True where a rotation step was kept
    trial_kinds: list[str]
    steps: int
    seed: int
    wall_time: float
    final_cost: float             # evaluate_cost of the returned model
    coefficient_ledger: dict = field(default_factory=dict)


def plan_rotation_step(g: float, H: float, eps_theta: float) -> float:
    """Angle from the local quadratic model, clamped to +-eps_theta.

    With positive curvature the quadratic minimizer -g/H is clamped;
    otherwise a descent step -eps_l * g is taken, with eps_l shrunk so
    the step never exceeds eps_theta and vanishes at stationarity.
    """
    if eps_theta <= 0:
        raise ContractViolation("eps_theta must be positive")
    if H > 0:
        return float(np.clip(-g / H, -eps_theta, eps_theta))
    eps_l = eps_theta / np.sqrt(eps_theta ** 2 + g ** 2)
    return float(-eps_l * g)


def _haar_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0]]) if rng.random() < 0.5 else np.array([[-1.0]])
    M = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(M)
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


class _Workspace:
    """Mutable fitting state: slot parameters plus cached projections."""

    def __init__(self, Z, times, slots, Q, A, b, ybar):
        self.Z = Z                              # (n, N), read-only data
        self.times = times
        self.slots = slots
        self.n, self.N = Z.shape
        self.S, _, _ = Q.shape
        self.r, self.m = A.shape[1], A.shape[2]
        if self.N <= self.r:
            raise InsufficientDataError(f"need N > r, got N={self.N}, r={self.r}")
        self.slot_of = slots.slots(self.N)
        counts = np.bincount(self.slot_of, minlength=self.S)
        if np.any(counts == 0):
            raise ContractViolation(
                f"slots {np.nonzero(counts == 0)[0].tolist()} receive no data; "
                "shorten the period or supply more snapshots")
        self._slot_counts = counts
        self.Q = Q.copy()
        self.A = A.copy()
        self.b = b.copy()
        self.ybar = ybar.copy()
        self._J = np.arange(self.r - 1, self.N - 1)
        self._rotations = 0
        self.reproject()

    @classmethod
    def from_model(cls, model: ReducedModel, series: TimeSeries):
        if series.n_channels != model.n:
            raise ContractViolation("model/series channel mismatch")
        return cls(series.values, series.times, model.slots,
                   model.Q, model.A, model.b, model.ybar)

    @classmethod
    def initial(cls, series: TimeSeries, config: FitConfig, Q_init=None):
        n, N = series.values.shape
        if not config.m < n:
            raise ContractViolation(f"need m < n, got m={config.m}, n={n}")
        if not config.r < N:
            raise ContractViolation("memory order must be below the series length")
        S = config.slots.n_slots(N)
        Q0 = principal_components(series).basis if Q_init is None else Q_init
        Q = np.repeat(Q0[None], S, axis=0)
        A = np.zeros((S, config.r, config.m, config.m))
        b = np.zeros((S, config.m))
        ws = cls(series.values, series.times, config.slots, Q, A, b,
                 np.zeros((S, n - config.m)))
        # start the complement mean at the per-slot average of y
        ybar = np.zeros((S, n - config.m))
        np.add.at(ybar, ws.slot_of, ws.Y.T)
        ws.ybar = ybar / ws._slot_counts[:, None]
        return ws

    # -- projections ---------------------------------------------------

    def reproject(self):
        W = np.einsum("jnk,nj->kj", self.Q[self.slot_of], self.Z)
        self.X = np.ascontiguousarray(W[: self.m])
        self.Y = np.ascontiguousarray(W[self.m:])

    def snapshot(self):
        return (self.Q.copy(), self.A.copy(), self.b.copy(), self.ybar.copy(),
                self.X.copy(), self.Y.copy())

    def restore(self, snap):
        self.Q, self.A, self.b, self.ybar, self.X, self.Y = (a.copy() for a in snap)

    # -- cost and residuals --------------------------------------------

    def _xhat(self):
        J = self._J
        Xhat = self.b[self.slot_of[J]].T.copy()
        for i in range(self.r):
            Xhat += np.einsum("jpq,qj->pj", self.A[self.slot_of[J], i],
                              self.X[:, J - i])
        return Xhat

    def cost(self):
        J = self._J
        rx = self.X[:, J + 1] - self._xhat()
        ry = self.Y[:, J + 1] - self.ybar[self.slot_of[J + 1]].T
        total = float(np.sum(rx * rx) + np.sum(ry * ry))
        return total, total / (self.N - self.r)

    # -- weights --------------------------------------------------------

    def slot_weights(self, w_col: np.ndarray) -> np.ndarray:
        """Project per-column weights onto slot-constant profiles."""
        w_slot = np.zeros(self.S)
        np.add.at(w_slot, self.slot_of, w_col)
        return w_slot / self._slot_counts

    # -- linear parameters -----------------------------------------------

    def solve_increments(self, w: np.ndarray, ridge: float = 0.0,
                         include_drift: bool = True):
        """Zero-gradient increments (B_1..B_r, d, v) along profile w.

        The linear parameters move as A_i += B_i w, b += d w, ybar += v w;
        the returned increments minimize the cost exactly along that
        family (joint weighted normal equations for B and d, a scalar
        weighted mean for v).
        """
        J = self._J
        wj = w[J]
        rows = [self.X[:, J - i] for i in range(self.r)]
        if include_drift:
            rows.insert(0, np.ones((1, J.size)))
        U = np.vstack(rows)                                  # (p, |J|)
        rx0 = self.X[:, J + 1] - self._xhat()                # (m, |J|)
        # residual along the family is rx0 - w (d + sum_i B_i x), so the
        # normal equations read  Theta (U w^2 U') = (rx0 w) U'
        Uw = U * wj
        M = Uw @ Uw.T
        rhs = (rx0 * wj) @ U.T
        p = M.shape[0]
        Mr = M if ridge == 0 else M + ridge * np.eye(p)
        try:
            np.linalg.cholesky(Mr + 0.0)
        except np.linalg.LinAlgError:
            raise IllConditionedError(
                "weighted normal equations are singular; retry with ridge > 0")
        theta = np.linalg.solve(Mr, rhs.T).T                 # (m, p)
        if include_drift:
            d = theta[:, 0]
            Bs = theta[:, 1:].reshape(self.m, self.r, self.m).transpose(1, 0, 2)
        else:
            d = np.zeros(self.m)
            Bs = theta.reshape(self.m, self.r, self.m).transpose(1, 0, 2)
        wt = w[J + 1]
        denom = float(np.sum(wt * wt))
        ry0 = self.Y[:, J + 1] - self.ybar[self.slot_of[J + 1]].T
        v = (ry0 * wt).sum(axis=1) / denom if denom > 0 else np.zeros(self.n - self.m)
        return Bs, d, v

    def apply_increments(self, increments, w_slot: np.ndarray):
        Bs, d, v = increments
        self.A += Bs[None] * w_slot[:, None, None, None]
        self.b += d[None] * w_slot[:, None]
        self.ybar += v[None] * w_slot[:, None]

    # -- rotations --------------------------------------------------------

    def rotation_derivatives(self, w: np.ndarray, k: int, h: int):
        """First and second derivative of the cost at angle 0.

        The basis is rotated in the plane of reduced coordinate k and
        complement coordinate h with per-snapshot angle alpha * w_j; the
        derivatives are taken in alpha, exactly for the implemented cost.
        """
        if not 0 <= k < self.m:
            raise ContractViolation(f"k must lie in [0, {self.m})")
        if not 0 <= h < self.n - self.m:
            raise ContractViolation(f"h must lie in [0, {self.n - self.m})")
        J = self._J
        t = J + 1
        Xk, Yh = self.X[k], self.Y[h]
        dXk = w * Yh
        dYh = -w * Xk
        d2Xk = -(w * w) * Xk
        d2Yh = -(w * w) * Yh
        A_cols = self.A[self.slot_of[J]][:, :, :, k]          # (|J|, r, m)
        rx = self.X[:, t] - self._xhat()
        ryh = Yh[t] - self.ybar[self.slot_of[t], h]
        dD = np.zeros((self.m, J.size))
        d2D = np.zeros((self.m, J.size))
        for i in range(self.r):
            dD += A_cols[:, i, :].T * dXk[J - i]
            d2D += A_cols[:, i, :].T * d2Xk[J - i]
        dx = -dD
        dx[k] += dXk[t]
        d2x = -d2D
        d2x[k] += d2Xk[t]
        g = 2.0 * (np.sum(ryh * dYh[t]) + np.sum(rx * dx))
        H = 2.0 * (np.sum(dYh[t] ** 2) + np.sum(ryh * d2Yh[t])
                   + np.sum(dx * dx) + np.sum(rx * d2x))
        return float(g), float(H)

    def rotate(self, k: int, h: int, theta: float, w: np.ndarray,
               w_slot: np.ndarray):
        """Apply the plane rotation with per-slot angle theta * w."""
        phi = theta * w_slot
        c = np.cos(phi)[:, None]
        s = np.sin(phi)[:, None]
        qk = self.Q[:, :, k].copy()
        ql = self.Q[:, :, self.m + h].copy()
        self.Q[:, :, k] = c * qk + s * ql
        self.Q[:, :, self.m + h] = -s * qk + c * ql
        phi_col = theta * w
        cc, ss = np.cos(phi_col), np.sin(phi_col)
        xk = self.X[k].copy()
        yh = self.Y[h].copy()
        self.X[k] = cc * xk + ss * yh
        self.Y[h] = -ss * xk + cc * yh
        self._rotations += 1

    def maintain(self) -> bool:
        """Periodic re-orthonormalization; True if state was touched."""
        if self._rotations < _REORTHO_EVERY:
            return False
        for sidx in range(self.S):
            self.Q[sidx] = reorthonormalize(self.Q[sidx])
        self.reproject()
        self._rotations = 0
        return True

    def randomize(self, rng: np.random.Generator):
        """Re-parametrize both subspaces by random orthogonal maps.

        The cost is invariant: dynamics, drift and complement mean are
        conjugated along with the bases.
        """
        R = _haar_orthogonal(rng, self.m)
        S_ = _haar_orthogonal(rng, self.n - self.m)
        self.Q[:, :, : self.m] = self.Q[:, :, : self.m] @ R.T
        self.Q[:, :, self.m:] = self.Q[:, :, self.m:] @ S_.T
        self.A = np.einsum("pq,siqu,vu->sipv", R, self.A, R)
        self.b = self.b @ R.T
        self.ybar = self.ybar @ S_.T
        self.X = R @ self.X
        self.Y = S_ @ self.Y
        return R, S_

    def to_model(self) -> ReducedModel:
        n = self.n
        return ReducedModel(n=n, m=self.m, r=self.r, slots=self.slots,
                            Q=self.Q.copy(), A=self.A.copy(),
                            b=self.b.copy(), ybar=self.ybar.copy())


# -- public single-shot wrappers ------------------------------------------


def _check_weights(weights, N):
    w = np.asarray(weights, dtype=float)
    if w.shape != (N,):
        raise ContractViolation(f"weights must have length {N}")
    return w


def regress_dynamics(series: TimeSeries, model: ReducedModel, weights,
                     ridge: float = 0.0, include_drift: bool = True):
    """Closed-form zero-gradient increments for the linear parameters.

    Returns (B, d, v) with B of shape (r, m, m): moving A_i by B_i w,
    b by d w and ybar by v w makes the analytic gradients vanish.
    """
    ws = _Workspace.from_model(model, series)
    w = _check_weights(weights, ws.N)
    return ws.solve_increments(w, ridge=ridge, include_drift=include_drift)


def rotation_derivatives(series: TimeSeries, model: ReducedModel,
                         k: int, h: int, weights):
    """d/d(alpha) and d2/d(alpha)2 of the cost under the profiled rotation."""
    ws = _Workspace.from_model(model, series)
    w = _check_weights(weights, ws.N)
    return ws.rotation_derivatives(w, k, h)


def randomize_bases(model: ReducedModel, rng: np.random.Generator) -> ReducedModel:
    """Random orthogonal re-parametrization of both subspaces (cost-preserving)."""
    R = _haar_orthogonal(rng, model.m)
    S_ = _haar_orthogonal(rng, model.n - model.m)
    Q = model.Q.copy()
    Q[:, :, : model.m] = Q[:, :, : model.m] @ R.T
    Q[:, :, model.m:] = Q[:, :, model.m:] @ S_.T
    A = np.einsum("pq,siqu,vu->sipv", R, model.A, R)
    return ReducedModel(n=model.n, m=model.m, r=model.r, slots=model.slots,
                        Q=Q, A=A, b=model.b @ R.T, ybar=model.ybar @ S_.T)


# -- the main loop ----------------------------------------------------------


def _default_mix(slots: SlotIndexer) -> dict[str, float]:
    if slots.mode == AUTONOMOUS:
        return {trials.CONSTANT: 1.0}
    if slots.mode == PERIODIC:
        return {trials.CONSTANT: 0.5, trials.PERIODIC_SIGMOID: 0.5}
    return {trials.CONSTANT: 0.5, trials.TREND_SIGMOID: 0.5}


def _s_values(series: TimeSeries, config: FitConfig) -> np.ndarray:
    if config.s_track is None:
        return series.times
    try:
        return series.exogenous[config.s_track]
    except KeyError:
        raise ContractViolation(f"series has no exogenous track {config.s_track!r}")


def fit(series: TimeSeries, config: FitConfig):
    """Fit a reduced model by alternating closed-form regression and
    profiled plane rotations.

    Returns (model, report).  The descent is run from the principal
    component basis and from ``restarts`` random orthogonal bases (the
    cost landscape over bases has local minima, e.g. when a noise
    direction carries more variance than the dynamics); the lowest-cost
    run wins.  The winning trace of accepted steps is non-increasing by
    construction; the whole fit is deterministic given the seed.
    """
    t0 = time.perf_counter()
    best = None
    for attempt in range(config.restarts + 1):
        rng = np.random.default_rng((config.seed, attempt))
        out = _descend(series, config, rng, scramble_init=attempt > 0)
        if best is None or out[1] < best[1]:
            best = out
    model, final_cost, trace, accepted, kinds, ledger = best
    report = FitReport(
        cost_trace=np.asarray(trace), accepted=np.asarray(accepted, dtype=bool),
        trial_kinds=kinds, steps=len(trace) - 1, seed=config.seed,
        wall_time=time.perf_counter() - t0, final_cost=final_cost,
        coefficient_ledger=ledger)
    return model, report


def _descend(series: TimeSeries, config: FitConfig,
             rng: np.random.Generator, scramble_init: bool = False):
    """One descent run; returns (model, final_cost, trace, accepted, kinds, ledger)."""
    Q_init = None
    if scramble_init:
        Q_init = _haar_orthogonal(rng, series.n_channels)
    ws = _Workspace.initial(series, config, Q_init=Q_init)
    n, m, r = ws.n, ws.m, ws.r
    s_vals = _s_values(series, config)
    s_lo, s_hi = float(np.min(s_vals)), float(np.max(s_vals))
    period = config.trial_period
    if period is None and config.slots.mode == PERIODIC:
        period = float(config.slots.period)
    mix = dict(config.mix) if config.mix is not None else _default_mix(config.slots)
    spacing = float(np.median(np.diff(np.sort(s_vals)))) if ws.N > 1 else 1.0
    L0 = config.L0 if config.L0 is not None else (
        period / 2.0 if period is not None else max(s_hi - s_lo, spacing))
    Lf = config.Lf if config.Lf is not None else min(max(spacing, 1e-6), L0)

    ledger: dict = {}

    def solve(w):
        try:
            return ws.solve_increments(w, ridge=config.ridge)
        except IllConditionedError:
            auto = 1e-10 * max(np.sum(ws.X * ws.X) / m, 1.0)
            try:
                return ws.solve_increments(w, ridge=auto)
            except IllConditionedError as exc:
                raise FitFailureError(
                    f"regression stayed singular after ridge retry (ridge={auto:.3e})"
                ) from exc

    ones = np.ones(ws.N)
    ws.apply_increments(solve(ones), ws.slot_weights(ones))
    _, c_cur = ws.cost()
    trace = [c_cur]
    accepted = [True]
    kinds = ["initial"]
    accepted_costs = [c_cur]

    for step in range(config.k_tot):
        if ws.maintain():
            ws.apply_increments(solve(ones), ws.slot_weights(ones))
            # re-orthonormalization can move the cost by rounding noise;
            # keep the logged value monotone by never letting it rise here
            _, c_m = ws.cost()
            c_cur = min(c_cur, c_m)
        F = draw_trial(rng, mix, step, config.k_tot, L0, Lf, (s_lo, s_hi),
                       period=period, fourier_max_k=config.fourier_max_k)
        w = trials.evaluate_weights_batch(F, s_vals)
        w_slot = ws.slot_weights(w)
        w = w_slot[ws.slot_of]
        kinds.append(F.kind)
        if not np.any(w_slot):
            trace.append(c_cur)
            accepted.append(False)
            continue
        snap0 = ws.snapshot()
        R, S_ = ws.randomize(rng)
        kx = int(rng.integers(m))
        hy = int(rng.integers(n - m))
        inc1 = solve(w)
        ws.apply_increments(inc1, w_slot)
        g, H = ws.rotation_derivatives(w, kx, hy)
        theta = plan_rotation_step(g, H, config.eps_theta)
        snap1 = ws.snapshot()

        def attempt(angle):
            ws.rotate(kx, hy, angle, w, w_slot)
            inc = solve(w)
            ws.apply_increments(inc, w_slot)
            _, c = ws.cost()
            return c, inc

        c_new, inc2 = attempt(theta)
        ok = c_new <= c_cur
        if not ok and H > 0 and g != 0.0:
            ws.restore(snap1)
            fallback = -config.eps_theta / np.sqrt(config.eps_theta ** 2 + g * g) * g
            c_new, inc2 = attempt(fallback)
            ok = c_new <= c_cur
        if ok:
            c_cur = c_new
            accepted.append(True)
            accepted_costs.append(c_cur)
            _ledger_conjugate(ledger, R, S_)
            _ledger_add(ledger, F, inc1, inc2)
        else:
            ws.restore(snap0)
            accepted.append(False)
        trace.append(c_cur)
        if len(accepted_costs) > config.stop_window:
            ref = accepted_costs[-config.stop_window - 1]
            if ref > 0 and (ref - c_cur) / ref < config.stop_tol:
                break

    model = ws.to_model()
    _, final_cost = evaluate_cost(model, series)
    return model, final_cost, trace, accepted, kinds, ledger


def _ledger_conjugate(ledger: dict, R: np.ndarray, S_: np.ndarray):
    """Carry accumulated coefficients through a basis re-parametrization."""
    for entry in ledger.values():
        entry["A"] = np.einsum("pq,iqu,vu->ipv", R, entry["A"], R)
        entry["b"] = entry["b"] @ R.T
        entry["ybar"] = entry["ybar"] @ S_.T


def _ledger_add(ledger: dict, F: TrialFunction, *increments):
    """Accumulate linear-parameter increments for closed-form bases.

    Only kinds with fixed basis functions (Fourier modes, monomials, the
    constant) are tracked; entries are expressed in the reduced basis of
    the final model and are exact once the subspace has converged.
    """
    if F.kind not in (trials.FOURIER_COS, trials.FOURIER_SIN,
                      trials.MONOMIAL, trials.CONSTANT):
        return
    key = (F.kind, int(F.k or 0))
    slot = ledger.setdefault(key, None)
    Bs = sum(inc[0] for inc in increments)
    d = sum(inc[1] for inc in increments)
    v = sum(inc[2] for inc in increments)
    if slot is None:
        ledger[key] = {"A": np.array(Bs), "b": np.array(d), "ybar": np.array(v)}
    else:
        slot["A"] += Bs
        slot["b"] += d
        slot["ybar"] += v
