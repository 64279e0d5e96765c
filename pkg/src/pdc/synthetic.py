"""Seeded generators for the synthetic benchmark scenarios.

Each generator returns the observed series, the generating model in
reduced form, and the irreducible per-step cost contributed by the
actually drawn noise (the floor no fitted model can beat).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    AUTONOMOUS, PERIODIC, ContractViolation, ReducedModel, SlotIndexer,
    TimeSeries, evaluate_cost,
)


@dataclass(frozen=True)
class Auto2D:
    """Scalar AR(1) inside a rotated plane; the complement is pure noise."""

    a: float = 0.6
    theta: float = np.pi / 3
    r_x: float = 0.3
    r_y: float = 0.6
    N: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class AutoMulti:
    """m-dimensional linear dynamics embedded in n dimensions."""

    A: np.ndarray = field(default_factory=lambda: np.array(
        [[0.4569, 0.3237], [-1.0374, 1.0378]]))
    Qx: np.ndarray = field(default_factory=lambda: np.array(
        [[-0.7044, -0.3823, -0.3407, -0.1985, -0.4497],
         [0.5754, -0.1555, -0.1798, 0.2477, -0.7423]]).T)
    r_x: float = 0.3
    r_y: float = 0.6
    N: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class Seasonal2D:
    """2-d plane whose angle, gain, drift and complement mean cycle with period T."""

    T: int = 12
    a_amp: float = 1.2
    b_amp: float = 0.5
    ybar_amp: float = 0.4
    theta_amp: float = np.pi / 6
    r_x: float = 0.3
    r_y: float = 0.6
    N: int = 1000
    seed: int = 0

    def curves(self, t):
        """(a, b, ybar, theta) evaluated at times t."""
        phase = 2.0 * np.pi * np.asarray(t, dtype=float) / self.T
        return (self.a_amp * np.cos(phase) ** 2,
                self.b_amp * np.sin(phase),
                self.ybar_amp * np.cos(phase),
                self.theta_amp * np.sin(phase))


@dataclass(frozen=True)
class Markov2D:
    """Scalar order-3 recursion inside a rotated plane."""

    a1: float = 0.4979
    a2: float = -0.2846
    a3: float = 0.1569
    theta: float = np.pi / 3
    r_x: float = 0.3
    r_y: float = 0.6
    N: int = 1000
    seed: int = 0


ScenarioSpec = Auto2D | AutoMulti | Seasonal2D | Markov2D


def _rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _check_stable(matrix: np.ndarray, what: str):
    rho = np.abs(np.linalg.eigvals(matrix)).max()
    if rho >= 1.0:
        raise ContractViolation(f"{what} is unstable (spectral radius {rho:.4f} >= 1)")


def _check_noise(spec):
    if spec.r_x < 0 or spec.r_y < 0:
        raise ContractViolation("noise amplitudes must be non-negative")
    if spec.N < 2:
        raise ContractViolation("need N >= 2")


def _complete_basis(Qx: np.ndarray) -> np.ndarray:
    """Orthogonal n x n matrix whose first columns orthonormalize Qx."""
    n, m = Qx.shape
    Qf, R = np.linalg.qr(np.column_stack([Qx, np.eye(n)]), mode="reduced")
    Qf = Qf[:, :n]
    # keep the leading columns aligned with the input directions
    for i in range(m):
        if R[i, i] < 0:
            Qf[:, i] = -Qf[:, i]
    return Qf


def generate(spec: ScenarioSpec):
    """Draw one realization of a scenario.

    Returns ``(series, truth, c_star)``: the observations, the exact
    generating model, and the normalized irreducible cost.
    """
    if isinstance(spec, Auto2D):
        return _generate_auto2d(spec)
    if isinstance(spec, AutoMulti):
        return _generate_automulti(spec)
    if isinstance(spec, Seasonal2D):
        return _generate_seasonal(spec)
    if isinstance(spec, Markov2D):
        return _generate_markov(spec)
    raise ContractViolation(f"unknown scenario {type(spec).__name__}")


def _generate_auto2d(spec: Auto2D):
    _check_noise(spec)
    _check_stable(np.array([[spec.a]]), "dynamics")
    rng = np.random.default_rng(spec.seed)
    N = spec.N
    x = np.empty(N)
    y = np.empty(N)
    x[0], y[0] = rng.standard_normal(2)
    ex = spec.r_x * rng.standard_normal(N - 1)
    ey = spec.r_y * rng.standard_normal(N - 1)
    for j in range(N - 1):
        x[j + 1] = spec.a * x[j] + ex[j]
        y[j + 1] = ey[j]
    Z = _rot(spec.theta) @ np.vstack([x, y])
    series = TimeSeries(Z, channel_names=("A", "P"))
    truth = ReducedModel(
        n=2, m=1, r=1, slots=SlotIndexer(AUTONOMOUS),
        Q=_rot(spec.theta)[None], A=np.array([[[[spec.a]]]]),
        b=np.zeros((1, 1)), ybar=np.zeros((1, 1)))
    c_star = float(np.sum(ex ** 2) + np.sum(ey ** 2)) / (N - 1)
    return series, truth, c_star


def _generate_automulti(spec: AutoMulti):
    _check_noise(spec)
    A = np.asarray(spec.A, dtype=float)
    _check_stable(A, "dynamics")
    Qx = np.asarray(spec.Qx, dtype=float)
    n, m = Qx.shape
    if A.shape != (m, m):
        raise ContractViolation(f"A must be {m}x{m} to match Qx")
    Q = _complete_basis(Qx)
    rng = np.random.default_rng(spec.seed)
    N = spec.N
    X = np.empty((m, N))
    Y = np.empty((n - m, N))
    X[:, 0] = rng.standard_normal(m)
    Y[:, 0] = rng.standard_normal(n - m)
    Ex = spec.r_x * rng.standard_normal((m, N - 1))
    Ey = spec.r_y * rng.standard_normal((n - m, N - 1))
    for j in range(N - 1):
        X[:, j + 1] = A @ X[:, j] + Ex[:, j]
        Y[:, j + 1] = Ey[:, j]
    Z = Q @ np.vstack([X, Y])
    series = TimeSeries(Z)
    truth = ReducedModel(
        n=n, m=m, r=1, slots=SlotIndexer(AUTONOMOUS),
        Q=Q[None], A=A[None, None], b=np.zeros((1, m)), ybar=np.zeros((1, n - m)))
    c_star = float(np.sum(Ex ** 2) + np.sum(Ey ** 2)) / (N - 1)
    return series, truth, c_star


def _generate_seasonal(spec: Seasonal2D):
    _check_noise(spec)
    if spec.N < spec.T:
        raise ContractViolation("need at least one full period of data")
    rng = np.random.default_rng(spec.seed)
    N, T = spec.N, spec.T
    t = np.arange(N, dtype=float)
    a_t, b_t, ybar_t, theta_t = spec.curves(t)
    if np.abs(a_t).max() >= 1.0 + 1e-12:
        # gain may touch 1 transiently; only reject a uniformly expanding cycle
        if np.abs(np.prod(a_t[:T])) >= 1.0:
            raise ContractViolation("seasonal gain cycle is unstable")
    x = np.empty(N)
    y = np.empty(N)
    x[0] = rng.standard_normal()
    y[0] = ybar_t[0] + rng.standard_normal()
    ex = spec.r_x * rng.standard_normal(N - 1)
    ey = spec.r_y * rng.standard_normal(N - 1)
    for j in range(N - 1):
        x[j + 1] = a_t[j] * x[j] + b_t[j] + ex[j]
        y[j + 1] = ybar_t[j + 1] + ey[j]
    # column j is expressed in the basis of its own calendar phase
    Z = np.empty((2, N))
    for j in range(N):
        Z[:, j] = _rot(theta_t[j]) @ (x[j], y[j])
    series = TimeSeries(Z, times=t, channel_names=("A", "P"))
    phases = np.arange(T, dtype=float)
    a_s, b_s, ybar_s, theta_s = spec.curves(phases)
    truth = ReducedModel(
        n=2, m=1, r=1, slots=SlotIndexer(PERIODIC, T),
        Q=np.stack([_rot(th) for th in theta_s]),
        A=a_s.reshape(T, 1, 1, 1), b=b_s.reshape(T, 1),
        ybar=ybar_s.reshape(T, 1))
    c_star = float(np.sum(ex ** 2) + np.sum(ey ** 2)) / (N - 1)
    return series, truth, c_star


def _generate_markov(spec: Markov2D):
    _check_noise(spec)
    companion = np.array([[spec.a1, spec.a2, spec.a3],
                          [1.0, 0.0, 0.0],
                          [0.0, 1.0, 0.0]])
    _check_stable(companion, "order-3 recursion")
    rng = np.random.default_rng(spec.seed)
    N, r = spec.N, 3
    if N <= r:
        raise ContractViolation("need N > 3")
    x = np.empty(N)
    y = np.empty(N)
    x[:r] = rng.standard_normal(r)
    y[:r] = rng.standard_normal(r)
    ex = spec.r_x * rng.standard_normal(N - r)
    ey = spec.r_y * rng.standard_normal(N - r)
    for j in range(r - 1, N - 1):
        x[j + 1] = (spec.a1 * x[j] + spec.a2 * x[j - 1] + spec.a3 * x[j - 2]
                    + ex[j - r + 1])
        y[j + 1] = ey[j - r + 1]
    Z = _rot(spec.theta) @ np.vstack([x, y])
    series = TimeSeries(Z, channel_names=("A", "P"))
    A = np.array([spec.a1, spec.a2, spec.a3]).reshape(1, 3, 1, 1)
    truth = ReducedModel(
        n=2, m=1, r=3, slots=SlotIndexer(AUTONOMOUS),
        Q=_rot(spec.theta)[None], A=A,
        b=np.zeros((1, 1)), ybar=np.zeros((1, 1)))
    c_star = float(np.sum(ex ** 2) + np.sum(ey ** 2)) / (N - r)
    return series, truth, c_star


def irreducible_cost_check(truth: ReducedModel, series: TimeSeries, c_star: float) -> float:
    """Absolute gap between the truth-model cost and the noise floor."""
    _, normalized = evaluate_cost(truth, series)
    return abs(normalized - c_star)
