"""Proposal profiles used to localize parameter updates.

Each fitting step perturbs the model along a scalar profile F evaluated
on the time axis or on an exogenous track.  The family covers the
constant profile, smoothed trend and periodic steps, localized bumps,
per-phase indicators, Fourier modes, monomials, and radial kernels for
vector-valued tracks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import ContractViolation

CONSTANT = "constant"
TREND_SIGMOID = "trend_sigmoid"
TREND_BUMP = "trend_bump"
PERIODIC_SIGMOID = "periodic_sigmoid"
PERIODIC_BUMP = "periodic_bump"
DISCRETE_DELTA = "discrete_delta"
FOURIER_COS = "fourier_cos"
FOURIER_SIN = "fourier_sin"
MONOMIAL = "monomial"
RADIAL_GAUSSIAN = "radial_gaussian"

KINDS = (
    CONSTANT, TREND_SIGMOID, TREND_BUMP, PERIODIC_SIGMOID, PERIODIC_BUMP,
    DISCRETE_DELTA, FOURIER_COS, FOURIER_SIN, MONOMIAL, RADIAL_GAUSSIAN,
)

_NEEDS_L = (TREND_SIGMOID, TREND_BUMP, PERIODIC_SIGMOID, PERIODIC_BUMP,
            RADIAL_GAUSSIAN)
_NEEDS_PERIOD = (PERIODIC_SIGMOID, PERIODIC_BUMP, DISCRETE_DELTA,
                 FOURIER_COS, FOURIER_SIN)
PERIODIC_KINDS = _NEEDS_PERIOD


@dataclass(frozen=True)
class TrialFunction:
    """One member of the proposal family.

    ``k`` doubles as the Fourier wavenumber, the monomial degree, or the
    selected phase of a per-phase indicator.  ``s0`` is a scalar center,
    or a vector for the radial kind.  ``subtract_mean`` removes the
    empirical mean over the fitting sample (applied in batch evaluation
    only) so the profile decouples from constant-profile steps.
    """

    kind: str
    s0: float | tuple[float, ...] | None = None
    L: float | None = None
    period: float | None = None
    k: int | None = None
    subtract_mean: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown trial kind {self.kind!r}")
        if self.kind in _NEEDS_L:
            if self.L is None or self.L <= 0:
                raise ContractViolation(f"{self.kind} needs L > 0")
        if self.kind in _NEEDS_PERIOD:
            if self.period is None or self.period <= 0:
                raise ContractViolation(f"{self.kind} needs period > 0")
        if self.kind in (FOURIER_COS, FOURIER_SIN):
            if self.k is None or self.k < 1:
                raise ContractViolation("Fourier wavenumber must be a positive integer")
        if self.kind == MONOMIAL:
            if self.k is None or self.k < 0:
                raise ContractViolation("monomial degree must be a non-negative integer")
        if self.kind == DISCRETE_DELTA:
            T = int(self.period)  # type: ignore[arg-type]
            if self.k is None or not 0 <= self.k < T:
                raise ContractViolation(f"delta phase must lie in [0, {T})")
        if self.kind == RADIAL_GAUSSIAN:
            if self.s0 is None:
                raise ContractViolation("radial kind needs a center vector s0")
            object.__setattr__(self, "s0", tuple(np.atleast_1d(np.asarray(self.s0, float))))
        elif self.kind in (TREND_SIGMOID, TREND_BUMP, PERIODIC_SIGMOID, PERIODIC_BUMP):
            if self.s0 is None:
                object.__setattr__(self, "s0", 0.0)


def _raw(F: TrialFunction, s: np.ndarray) -> np.ndarray:
    """Vectorized profile value without mean subtraction."""
    kind = F.kind
    if kind == CONSTANT:
        return np.ones_like(s, dtype=float)
    if kind == TREND_SIGMOID:
        S = s - F.s0
        return S / np.sqrt(S * S + F.L ** 2)
    if kind == TREND_BUMP:
        S = s - F.s0
        return F.L ** 3 / (S * S + F.L ** 2) ** 1.5
    if kind == PERIODIC_SIGMOID:
        S = 2.0 * np.pi * (s - F.s0) / F.period
        return np.sin(S) / np.sqrt(4.0 * np.sin(S / 2.0) ** 2 + F.L ** 2)
    if kind == PERIODIC_BUMP:
        S = 2.0 * np.pi * (s - F.s0) / F.period
        return F.L ** 3 / (4.0 * np.sin(S / 2.0) ** 2 + F.L ** 2) ** 1.5
    if kind == DISCRETE_DELTA:
        T = int(F.period)
        return (np.rint(s).astype(int) % T == F.k).astype(float)
    if kind == FOURIER_COS:
        return np.cos(F.k * 2.0 * np.pi * s / F.period)
    if kind == FOURIER_SIN:
        return np.sin(F.k * 2.0 * np.pi * s / F.period)
    if kind == MONOMIAL:
        return np.asarray(s, dtype=float) ** F.k
    raise ContractViolation(f"scalar evaluation not defined for {kind}")


def evaluate_weight(F: TrialFunction, s) -> float:
    """Raw profile value at a single point (no mean correction)."""
    if F.kind == RADIAL_GAUSSIAN:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        c = np.asarray(F.s0, dtype=float)
        if s.shape != c.shape:
            raise ContractViolation(
                f"radial center has dimension {c.shape[0]}, s has {s.shape}")
        rr = np.sum((s - c) ** 2) / F.L ** 2
        return float(np.exp(-rr))
    s_arr = np.asarray(s, dtype=float)
    if s_arr.ndim != 0:
        raise ContractViolation(f"{F.kind} expects a scalar s, got shape {s_arr.shape}")
    return float(_raw(F, s_arr[None])[0])


def evaluate_weights_batch(F: TrialFunction, s_list) -> np.ndarray:
    """Profile values over a sample; subtracts their empirical mean if set."""
    if F.kind == RADIAL_GAUSSIAN:
        S = np.asarray(s_list, dtype=float)
        if S.ndim == 1:
            S = S[:, None]
        if S.shape[0] == 0:
            raise ContractViolation("empty sample")
        c = np.asarray(F.s0, dtype=float)
        if S.shape[1] != c.shape[0]:
            raise ContractViolation("sample dimension does not match radial center")
        vals = np.exp(-np.sum((S - c) ** 2, axis=1) / F.L ** 2)
    else:
        s = np.asarray(s_list, dtype=float)
        if s.ndim != 1:
            raise ContractViolation(f"{F.kind} expects a 1-d sample, got shape {s.shape}")
        if s.size == 0:
            raise ContractViolation("empty sample")
        vals = _raw(F, s)
    if F.subtract_mean:
        vals = vals - vals.mean()
    return vals


def anneal_length(step: int, total_steps: int, L0: float, Lf: float) -> float:
    """Geometric length-scale schedule from L0 down to Lf."""
    if not (0 < Lf <= L0):
        raise ContractViolation(f"need 0 < Lf <= L0, got L0={L0}, Lf={Lf}")
    if not (0 <= step <= total_steps):
        raise ContractViolation(f"step {step} outside [0, {total_steps}]")
    if total_steps == 0:
        return float(L0)
    return float(L0 * (Lf / L0) ** (step / total_steps))


#: Kinds that get the empirical-mean correction when drawn.
_SUBTRACT_MEAN_DEFAULT = {TREND_SIGMOID: True, TREND_BUMP: True,
                          PERIODIC_BUMP: True}


def draw_trial(rng: np.random.Generator,
               mix: Mapping[str, float],
               step: int,
               total_steps: int,
               L0: float,
               Lf: float,
               s_range: tuple[float, float] | Sequence[tuple[float, float]],
               period: float | None = None,
               fourier_max_k: int = 8) -> TrialFunction:
    """Sample one proposal from a configured mix of kinds.

    Centers are uniform over the observed range (periodic kinds: over one
    period), length scales follow the annealing schedule, and Fourier
    wavenumbers decay as 2^-k truncated at ``fourier_max_k``.
    """
    if not mix:
        raise ContractViolation("empty trial mix")
    kinds = list(mix.keys())
    probs = np.array([mix[k] for k in kinds], dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ContractViolation("mix weights must be non-negative and sum to 1")
    for kind in kinds:
        if kind not in KINDS:
            raise ContractViolation(f"unknown trial kind {kind!r} in mix")
        if kind in _NEEDS_PERIOD and period is None:
            raise ContractViolation(f"{kind} in mix requires a period")
    kind = kinds[rng.choice(len(kinds), p=probs)]
    if kind == CONSTANT:
        return TrialFunction(CONSTANT)
    L = anneal_length(step, total_steps, L0, Lf)
    sub = _SUBTRACT_MEAN_DEFAULT.get(kind, False)
    if kind in (TREND_SIGMOID, TREND_BUMP):
        lo, hi = s_range  # type: ignore[misc]
        s0 = float(rng.uniform(lo, hi))
        return TrialFunction(kind, s0=s0, L=L, subtract_mean=sub)
    if kind in (PERIODIC_SIGMOID, PERIODIC_BUMP):
        s0 = float(rng.uniform(0.0, period))
        return TrialFunction(kind, s0=s0, L=L, period=period, subtract_mean=sub)
    if kind == DISCRETE_DELTA:
        T = int(period)  # type: ignore[arg-type]
        return TrialFunction(kind, period=T, k=int(rng.integers(T)))
    if kind in (FOURIER_COS, FOURIER_SIN):
        ks = np.arange(1, fourier_max_k + 1)
        pk = 2.0 ** (-ks.astype(float))
        pk /= pk.sum()
        return TrialFunction(kind, period=period, k=int(ks[rng.choice(len(ks), p=pk)]))
    if kind == MONOMIAL:
        ks = np.arange(0, fourier_max_k + 1)
        pk = 2.0 ** (-ks.astype(float))
        pk /= pk.sum()
        return TrialFunction(kind, k=int(ks[rng.choice(len(ks), p=pk)]))
    if kind == RADIAL_GAUSSIAN:
        boxes = np.atleast_2d(np.asarray(s_range, dtype=float))
        s0 = tuple(float(rng.uniform(lo, hi)) for lo, hi in boxes)
        return TrialFunction(kind, s0=s0, L=L)
    raise ContractViolation(f"cannot draw kind {kind!r}")
