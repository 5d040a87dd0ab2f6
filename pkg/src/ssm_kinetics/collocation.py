"""Spline segments and the joint collocation constraint system.

A segment carries observed concentrations at its collocation times plus the
trial-polynomial degree. Two families of constraints are assembled over the
joint unknown vector (polynomial coefficients, rate constants):

* interpolation constraints: the trial polynomial equals the observation at
  each collocation time (affine in the unknowns);
* residual constraints: the trial polynomial satisfies the ODE at each
  residual collocation time (bilinear: products of rate constants and
  coefficients).

The unknown vector layout is fixed: per-species coefficient blocks of length
degree+1 in species order, followed by (k1, k2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .basis import derivative_row, power_row
from .mechanism import ConcentrationState, Mechanism, RateConstants

KIND_INTERPOLATION = "interpolation"
KIND_RESIDUAL = "residual"

MODE_SQUARE = "square"
MODE_LEAST_SQUARES = "least_squares"
MODES = (MODE_SQUARE, MODE_LEAST_SQUARES)

N_RATE_CONSTANTS = 2


class UnderdeterminedSystem(ValueError):
    """Fewer constraint equations than unknowns."""


@dataclass(frozen=True)
class Segment:
    """One spline piece: collocation times, observations, and trial degree.

    ``residual_times`` selects the times at which ODE residual constraints are
    imposed; by default every collocation time is used. Fitting a segment needs
    at least two times, but single-time segments are allowed for constraint
    inspection.
    """

    times: tuple[float, ...]
    observations: tuple[ConcentrationState, ...]
    degree: int
    residual_times: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "observations", tuple(self.observations))
        if len(times) == 0:
            raise ValueError("segment needs at least one collocation time")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("collocation times must be strictly increasing")
        if len(self.observations) != len(times):
            raise ValueError("observations and times must have equal length")
        for t, obs in zip(times, self.observations):
            if obs.t != t:
                raise ValueError(
                    f"observation time {obs.t} does not match collocation time {t}"
                )
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        if self.residual_times is None:
            object.__setattr__(self, "residual_times", times)
        else:
            object.__setattr__(
                self, "residual_times", tuple(float(t) for t in self.residual_times)
            )

    @classmethod
    def from_states(
        cls,
        states: Sequence[ConcentrationState],
        degree: int,
        residual_times: Sequence[float] | None = None,
    ) -> "Segment":
        times = tuple(s.t for s in states)
        rt = tuple(residual_times) if residual_times is not None else None
        return cls(times=times, observations=tuple(states), degree=degree,
                   residual_times=rt)

    @property
    def span(self) -> float:
        return self.times[-1] - self.times[0]


def check_spline_continuity(segments: Sequence[Segment]) -> None:
    """Require consecutive segments to share their boundary time and observation."""
    for left, right in zip(segments, segments[1:]):
        if right.times[0] != left.times[-1]:
            raise ValueError(
                f"segments do not share a boundary time: {left.times[-1]} vs "
                f"{right.times[0]}"
            )
        if right.observations[0] != left.observations[-1]:
            raise ValueError(
                f"segments disagree on the boundary observation at t={right.times[0]}"
            )


@dataclass(frozen=True)
class Constraint:
    """Label and data for one scalar constraint equation."""

    kind: str
    species: str
    species_index: int
    time: float
    observed: float | None = None


def interpolation_constraints(
    segment: Segment, species: tuple[str, ...] = ("Ca", "Cb", "Cc")
) -> tuple[Constraint, ...]:
    """Trial polynomial equals the observation, per species and collocation time."""
    out = []
    for t, obs in zip(segment.times, segment.observations):
        values = obs.as_array()
        for s, name in enumerate(species):
            out.append(
                Constraint(
                    kind=KIND_INTERPOLATION,
                    species=name,
                    species_index=s,
                    time=t,
                    observed=float(values[s]),
                )
            )
    return tuple(out)


def residual_constraints(
    segment: Segment, mechanism: Mechanism
) -> tuple[Constraint, ...]:
    """Trial polynomial satisfies the ODE, per species and residual time."""
    out = []
    for t in segment.residual_times:
        for s, name in enumerate(mechanism.species):
            out.append(
                Constraint(kind=KIND_RESIDUAL, species=name, species_index=s, time=t)
            )
    return tuple(out)


class CollocationSystem:
    """Assembled constraint system over the joint unknown vector.

    The residual map and its analytic Jacobian are reentrant: they hold no
    mutable state and may be evaluated concurrently with distinct unknown
    vectors.
    """

    def __init__(
        self,
        segment: Segment,
        mechanism: Mechanism,
        constraints: tuple[Constraint, ...],
        mode: str,
    ):
        self.segment = segment
        self.mechanism = mechanism
        self.constraints = constraints
        self.mode = mode
        self.coeff_len = segment.degree + 1
        self.n_species = mechanism.n_species
        self.n_coefficients = self.n_species * self.coeff_len
        self.n_unknowns = self.n_coefficients + N_RATE_CONSTANTS
        times = {c.time for c in constraints}
        self._prow = {t: power_row(segment.degree, t) for t in times}
        self._drow = {t: derivative_row(segment.degree, t) for t in times}

    @property
    def n_equations(self) -> int:
        return len(self.constraints)

    @property
    def labels(self) -> tuple[tuple[str, str, float], ...]:
        return tuple((c.kind, c.species, c.time) for c in self.constraints)

    def split(self, u) -> tuple[np.ndarray, RateConstants]:
        """Split an unknown vector into the coefficient matrix and rate constants."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_unknowns,):
            raise ValueError(f"expected unknown vector of length {self.n_unknowns}")
        coeffs = u[: self.n_coefficients].reshape(self.n_species, self.coeff_len)
        return coeffs, RateConstants(k1=float(u[-2]), k2=float(u[-1]))

    def pack(self, coefficients, k: RateConstants) -> np.ndarray:
        """Inverse of :meth:`split`."""
        coeffs = np.asarray(coefficients, dtype=float).reshape(-1)
        if coeffs.size != self.n_coefficients:
            raise ValueError(f"expected {self.n_coefficients} coefficients")
        return np.concatenate([coeffs, [k.k1, k.k2]])

    def _block(self, species_index: int) -> slice:
        return slice(
            species_index * self.coeff_len, (species_index + 1) * self.coeff_len
        )

    def residual(self, u) -> np.ndarray:
        """Constraint violations at ``u``, one entry per constraint."""
        coeffs, k = self.split(u)
        rates = {}
        out = np.empty(self.n_equations)
        for i, c in enumerate(self.constraints):
            prow = self._prow[c.time]
            if c.kind == KIND_INTERPOLATION:
                out[i] = prow @ coeffs[c.species_index] - c.observed
            else:
                if c.time not in rates:
                    x = coeffs @ prow
                    rates[c.time] = self.mechanism.rhs(k, x)
                deriv = self._drow[c.time] @ coeffs[c.species_index]
                out[i] = deriv - rates[c.time][c.species_index]
        return out

    def jacobian(self, u) -> np.ndarray:
        """Exact partial derivatives of the residual map at ``u``.

        Interpolation rows are constant power rows. Residual rows combine the
        derivative row with the mechanism's concentration Jacobian in the
        coefficient columns, and its rate-constant Jacobian in the k columns.
        """
        coeffs, k = self.split(u)
        jacs = {}
        J = np.zeros((self.n_equations, self.n_unknowns))
        for i, c in enumerate(self.constraints):
            prow = self._prow[c.time]
            if c.kind == KIND_INTERPOLATION:
                J[i, self._block(c.species_index)] = prow
                continue
            if c.time not in jacs:
                x = coeffs @ prow
                jacs[c.time] = (
                    self.mechanism.rhs_jac_x(k, x),
                    self.mechanism.rhs_jac_k(k, x),
                )
            jac_x, jac_k = jacs[c.time]
            s = c.species_index
            J[i, self._block(s)] = self._drow[c.time]
            for q in range(self.n_species):
                J[i, self._block(q)] -= jac_x[s, q] * prow
            J[i, -N_RATE_CONSTANTS:] = -jac_k[s]
        return J

    def interpolation_design(self) -> tuple[np.ndarray, np.ndarray]:
        """Design matrix and observations of the interpolation rows alone."""
        rows = [c for c in self.constraints if c.kind == KIND_INTERPOLATION]
        A = np.zeros((len(rows), self.n_coefficients))
        b = np.empty(len(rows))
        for i, c in enumerate(rows):
            A[i, self._block(c.species_index)] = self._prow[c.time]
            b[i] = c.observed
        return A, b

    def dump(self, u) -> str:
        """Plain-text listing: one constraint per line with its value at ``u``."""
        values = self.residual(u)
        lines = [
            f"{c.kind} {c.species} t={c.time:g} : {v:+.9e}"
            for c, v in zip(self.constraints, values)
        ]
        return "\n".join(lines)


def _prune_to_square(
    constraints: tuple[Constraint, ...], n_unknowns: int
) -> tuple[Constraint, ...]:
    # Drop residual constraints from the final collocation time, last species
    # first, until the system is square.
    pruned = list(constraints)
    while len(pruned) > n_unknowns:
        residuals = [c for c in pruned if c.kind == KIND_RESIDUAL]
        if not residuals:
            raise ValueError(
                "cannot prune to a square system: interpolation constraints "
                "alone exceed the unknown count"
            )
        t_last = max(c.time for c in residuals)
        victim = max(
            (c for c in residuals if c.time == t_last),
            key=lambda c: c.species_index,
        )
        pruned.remove(victim)
    return tuple(pruned)


def assemble(
    segment: Segment, mechanism: Mechanism, mode: str = MODE_LEAST_SQUARES
) -> CollocationSystem:
    """Assemble interpolation plus residual constraints for one segment.

    In ``least_squares`` mode every constraint the segment defines is kept; in
    ``square`` mode residual constraints are pruned deterministically (final
    collocation time first, last species first) until the equation count equals
    the unknown count.

    Raises
    ------
    UnderdeterminedSystem
        If fewer equations than unknowns are available in either mode.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    constraints = interpolation_constraints(segment, mechanism.species)
    constraints += residual_constraints(segment, mechanism)
    n_unknowns = mechanism.n_species * (segment.degree + 1) + N_RATE_CONSTANTS
    if len(constraints) < n_unknowns:
        raise UnderdeterminedSystem(
            f"{len(constraints)} equations for {n_unknowns} unknowns"
        )
    if mode == MODE_SQUARE:
        constraints = _prune_to_square(constraints, n_unknowns)
    return CollocationSystem(segment, mechanism, constraints, mode)


def assemble_all(
    segments: Sequence[Segment], mechanism: Mechanism, mode: str = MODE_LEAST_SQUARES
) -> list[CollocationSystem]:
    """Assemble one independent system per spline segment."""
    if len(segments) == 0:
        raise ValueError("at least one segment is required")
    check_spline_continuity(segments)
    return [assemble(seg, mechanism, mode) for seg in segments]
