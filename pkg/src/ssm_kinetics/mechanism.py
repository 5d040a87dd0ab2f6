"""Consecutive first-order kinetics A -> B -> C.

Holds the parametric ODE right-hand side, its closed-form solution, a classical
RK4 integrator used as an independent oracle and data generator, and dataset
CSV input/output.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Sequence

import numpy as np

SPECIES = ("Ca", "Cb", "Cc")
DATASET_HEADER = ("t", "Ca", "Cb", "Cc")

# Relative gap below which the closed form is treated as singular.
EQUAL_RATE_RELATIVE_GAP = 1e-9


class EqualRateConstants(ValueError):
    """The closed-form solution is singular for k1 == k2."""


class NonFiniteState(RuntimeError):
    """Integration produced a non-finite concentration."""


@dataclass(frozen=True)
class RateConstants:
    """First-order rate constants in 1/s. Physical values are positive."""

    k1: float
    k2: float


@dataclass(frozen=True)
class ConcentrationState:
    """Normalized concentrations of the three species at time ``t``."""

    t: float
    ca: float
    cb: float
    cc: float

    def as_array(self) -> np.ndarray:
        return np.array([self.ca, self.cb, self.cc])

    @classmethod
    def from_array(cls, t: float, values) -> "ConcentrationState":
        ca, cb, cc = (float(v) for v in values)
        return cls(t=float(t), ca=ca, cb=cb, cc=cc)


@dataclass(frozen=True)
class Mechanism:
    """Parametric ODE system dX/dt = f(k, X) with exact parameter derivatives.

    ``rhs_jac_x`` and ``rhs_jac_k`` supply the exact Jacobians of ``rhs`` with
    respect to the concentrations and the rate constants; collocation assembly
    relies on them to build analytic constraint Jacobians.
    """

    species: tuple[str, ...]
    rhs: Callable[[RateConstants, np.ndarray], np.ndarray]
    rhs_jac_x: Callable[[RateConstants, np.ndarray], np.ndarray]
    rhs_jac_k: Callable[[RateConstants, np.ndarray], np.ndarray]
    initial: tuple[float, ...]
    t0: float = 0.0

    @property
    def n_species(self) -> int:
        return len(self.species)


def _abc_rates(k: RateConstants, x: np.ndarray) -> np.ndarray:
    r1 = k.k1 * x[0]
    r2 = k.k2 * x[1]
    return np.array([-r1, r1 - r2, r2])


def _abc_jac_x(k: RateConstants, x: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [-k.k1, 0.0, 0.0],
            [k.k1, -k.k2, 0.0],
            [0.0, k.k2, 0.0],
        ]
    )


def _abc_jac_k(k: RateConstants, x: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [-x[0], 0.0],
            [x[0], -x[1]],
            [0.0, x[1]],
        ]
    )


def rhs_abc(k: RateConstants, state: ConcentrationState) -> np.ndarray:
    """Rates (dCa/dt, dCb/dt, dCc/dt) = (-k1*Ca, k1*Ca - k2*Cb, k2*Cb)."""
    return _abc_rates(k, state.as_array())


def abc_mechanism(ca0: float = 1.0) -> Mechanism:
    """The A -> B -> C mechanism starting from (Ca0, 0, 0) at t=0."""
    return Mechanism(
        species=SPECIES,
        rhs=_abc_rates,
        rhs_jac_x=_abc_jac_x,
        rhs_jac_k=_abc_jac_k,
        initial=(float(ca0), 0.0, 0.0),
    )


def _require_regular(k: RateConstants) -> None:
    if k.k1 <= 0 or k.k2 <= 0:
        raise ValueError(f"rate constants must be positive, got {k}")
    if abs(k.k1 - k.k2) / max(k.k1, k.k2) < EQUAL_RATE_RELATIVE_GAP:
        raise EqualRateConstants(
            f"closed form is singular for k1 ~= k2 (k1={k.k1}, k2={k.k2})"
        )


def analytic_solution(k: RateConstants, ca0: float, t: float) -> ConcentrationState:
    """Closed-form concentrations of consecutive first-order reactions.

    Ca = Ca0*exp(-k1*t), Cb = Ca0*k1/(k2-k1)*(exp(-k1*t) - exp(-k2*t)), and
    Cc closes the mass balance. Requires k1 != k2; the degenerate branch is
    intentionally not implemented (use the RK4 integrator there).
    """
    _require_regular(k)
    if t < 0:
        raise ValueError("t must be non-negative")
    ca = ca0 * math.exp(-k.k1 * t)
    cb = ca0 * k.k1 / (k.k2 - k.k1) * (math.exp(-k.k1 * t) - math.exp(-k.k2 * t)) + 0.0
    cc = ca0 - ca - cb
    return ConcentrationState(t=float(t), ca=ca, cb=cb, cc=cc)


def analytic_curve(k: RateConstants, ca0: float, times) -> np.ndarray:
    """Closed-form concentrations sampled at an array of times, shape (n, 3)."""
    _require_regular(k)
    ts = np.asarray(times, dtype=float)
    if np.any(ts < 0):
        raise ValueError("times must be non-negative")
    ca = ca0 * np.exp(-k.k1 * ts)
    cb = ca0 * k.k1 / (k.k2 - k.k1) * (np.exp(-k.k1 * ts) - np.exp(-k.k2 * ts)) + 0.0
    cc = ca0 - ca - cb
    return np.column_stack([ca, cb, cc])


def integrate_rk4(
    mechanism: Mechanism, k: RateConstants, t_end: float, h: float
) -> list[ConcentrationState]:
    """Classical fixed-step RK4 trajectory from the mechanism's initial state.

    Returns the state at every step, starting with the initial state. The final
    step is shortened so the trajectory lands exactly on ``t_end``.

    Raises
    ------
    NonFiniteState
        If any concentration becomes non-finite during integration.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    if mechanism.n_species != len(SPECIES):
        raise ValueError("only three-species mechanisms are supported")

    x = np.array(mechanism.initial, dtype=float)
    states = [ConcentrationState.from_array(mechanism.t0, x)]
    n_steps = math.ceil(t_end / h - 1e-12) if t_end > 0 else 0
    rhs = mechanism.rhs
    for i in range(n_steps):
        t_next = min((i + 1) * h, t_end)
        dt = t_next - i * h
        f1 = rhs(k, x)
        f2 = rhs(k, x + 0.5 * dt * f1)
        f3 = rhs(k, x + 0.5 * dt * f2)
        f4 = rhs(k, x + dt * f3)
        x = x + (dt / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"non-finite state at t={t_next}")
        states.append(ConcentrationState.from_array(mechanism.t0 + t_next, x))
    return states


def round_half_away_from_zero(value: float, decimals: int) -> float:
    """Round to ``decimals`` places with ties going away from zero."""
    quantum = Decimal(1).scaleb(-decimals)
    rounded = Decimal(value).quantize(quantum, rounding=ROUND_HALF_UP)
    # + 0.0 normalizes a negative zero
    return float(rounded) + 0.0


def generate_dataset(
    k: RateConstants,
    times: Sequence[float],
    rounding: int | None = None,
) -> list[ConcentrationState]:
    """Sample the closed-form solution at the given times.

    ``rounding`` rounds every concentration half-away-from-zero to that many
    decimals, mirroring how tabulated reference data is printed. Times must be
    non-empty, strictly increasing and non-negative.
    """
    if len(times) == 0:
        raise ValueError("times must be non-empty")
    ts = [float(t) for t in times]
    if any(t < 0 for t in ts):
        raise ValueError("times must be non-negative")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("times must be strictly increasing")

    states = []
    for t in ts:
        s = analytic_solution(k, 1.0, t)
        if rounding is not None:
            s = ConcentrationState(
                t=s.t,
                ca=round_half_away_from_zero(s.ca, rounding),
                cb=round_half_away_from_zero(s.cb, rounding),
                cc=round_half_away_from_zero(s.cc, rounding),
            )
        states.append(s)
    return states


def write_dataset_csv(
    path, states: Sequence[ConcentrationState], decimals: int | None = None
) -> None:
    """Write a ``t,Ca,Cb,Cc`` dataset.

    Concentrations are written with full %.17g-style precision unless
    ``decimals`` is given; times always use full precision.
    """
    if decimals is None:
        fmt = lambda v: format(v, ".17g")  # noqa: E731
    else:
        fmt = lambda v: f"{v:.{decimals}f}"  # noqa: E731
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_HEADER)
        for s in states:
            writer.writerow([format(s.t, ".17g"), fmt(s.ca), fmt(s.cb), fmt(s.cc)])


def read_dataset_csv(path) -> list[ConcentrationState]:
    """Read a ``t,Ca,Cb,Cc`` dataset written by :func:`write_dataset_csv`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty dataset file") from None
        if tuple(header) != DATASET_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(DATASET_HEADER)}, "
                f"got {','.join(header)}"
            )
        states = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                t, ca, cb, cc = (float(v) for v in row)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
            states.append(ConcentrationState(t=t, ca=ca, cb=cb, cc=cc))
    if not states:
        raise ValueError(f"{path}: dataset has no rows")
    return states
