"""Monomial power-series polynomials in time.

Trial solutions are plain power series c0 + c1*t + ... + cN*t**N evaluated on
raw (unmapped) time. Evaluation uses Horner's scheme; constraint rows are the
corresponding Vandermonde rows built by repeated multiplication.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

# Raw monomials stay well conditioned over the degrees and time horizons this
# library targets; outside that envelope accuracy degrades silently, so warn.
MAX_WELL_CONDITIONED_DEGREE = 8
MAX_WELL_CONDITIONED_TIME = 10.0


def _warn_if_ill_conditioned(degree, t) -> None:
    if np.ndim(t):
        arr = np.abs(np.asarray(t, dtype=float))
        t_max = float(arr.max()) if arr.size else 0.0
    else:
        t_max = abs(t)
    if degree > MAX_WELL_CONDITIONED_DEGREE or t_max > MAX_WELL_CONDITIONED_TIME:
        logger.warning(
            "monomial basis may be ill-conditioned: degree=%d, max |t|=%g",
            degree,
            t_max,
        )


@dataclass(frozen=True)
class Polynomial:
    """Power-series polynomial with coefficients ordered (c0, c1, ..., cN)."""

    coefficients: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.coefficients) == 0:
            raise ValueError("a polynomial needs at least one coefficient")
        object.__setattr__(
            self, "coefficients", tuple(float(c) for c in self.coefficients)
        )

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, t):
        """Evaluate at time ``t`` (scalar or array) with Horner's scheme.

        Evaluation at t=0 returns c0 bit-exactly.
        """
        _warn_if_ill_conditioned(self.degree, t)
        arr = np.asarray(t, dtype=float)
        acc = np.zeros_like(arr) + self.coefficients[-1]
        for coef in self.coefficients[-2::-1]:
            acc = acc * arr + coef
        return float(acc) if arr.ndim == 0 else acc

    def derivative(self) -> "Polynomial":
        """Time derivative: coefficients (1*c1, 2*c2, ..., N*cN)."""
        c = self.coefficients
        if len(c) == 1:
            return Polynomial((0.0,))
        return Polynomial(tuple(n * c[n] for n in range(1, len(c))))


def power_row(degree: int, t: float) -> np.ndarray:
    """Vandermonde row (1, t, t**2, ..., t**degree).

    The dot product of this row with a coefficient vector equals polynomial
    evaluation at ``t``.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    _warn_if_ill_conditioned(degree, t)
    row = np.empty(degree + 1)
    value = 1.0
    for n in range(degree + 1):
        row[n] = value
        value *= t
    return row


def derivative_row(degree: int, t: float) -> np.ndarray:
    """Row representing d/dt of the power row: (0, 1, 2t, ..., N*t**(N-1)).

    Dotting with a coefficient vector of length degree+1 gives the derivative
    of the corresponding polynomial at ``t``.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    row = np.zeros(degree + 1)
    value = 1.0
    for n in range(1, degree + 1):
        row[n] = n * value
        value *= t
    return row


@dataclass(frozen=True)
class TrialPolynomialSet:
    """One trial polynomial per species, in species order."""

    species: tuple[str, ...]
    polynomials: tuple[Polynomial, ...]

    def __post_init__(self) -> None:
        if len(self.species) != len(self.polynomials):
            raise ValueError("species and polynomials must have equal length")
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "polynomials", tuple(self.polynomials))

    @classmethod
    def from_coefficients(
        cls, species: tuple[str, ...], coefficients
    ) -> "TrialPolynomialSet":
        """Build from a (n_species, degree+1) coefficient matrix."""
        polys = tuple(Polynomial(tuple(row)) for row in np.atleast_2d(coefficients))
        return cls(tuple(species), polys)

    def __getitem__(self, key) -> Polynomial:
        if isinstance(key, str):
            return self.polynomials[self.species.index(key)]
        return self.polynomials[key]

    def coefficient_matrix(self) -> np.ndarray:
        return np.array([p.coefficients for p in self.polynomials])

    def evaluate(self, t) -> np.ndarray:
        """Species-ordered values at ``t``; shape (n_species,) or (n_species, len(t))."""
        return np.array([p.evaluate(t) for p in self.polynomials])
