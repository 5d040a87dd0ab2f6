"""Solvers for the assembled collocation system.

The primary path is damped Gauss-Newton with a Levenberg-style multiplier on
the normal equations; it serves square and overdetermined systems uniformly.
A variable-projection solver provides an independent cross-check: for fixed
rate constants the system is affine in the polynomial coefficients, so the
inner problem is a linear least-squares solve and only (k1, k2) remain for the
outer minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.optimize import minimize

from .basis import TrialPolynomialSet
from .collocation import MODE_SQUARE, N_RATE_CONSTANTS, CollocationSystem
from .mechanism import RateConstants

# Damping is grown until this multiplier before the solver gives up on an
# iteration; beyond it, step sizes are at the floating-point noise floor.
MAX_DAMPING = 1e12
MIN_DAMPING = 1e-15

DIAG_MAX_ITERATIONS = "max_iterations_exceeded"
DIAG_NEGATIVE_RATES = "negative_rate_constants"
DIAG_STAGNATION = "numerical_stagnation"
DIAG_RESIDUAL_ABOVE_TOLERANCE = "residual_above_tolerance"

InitialGuessPolicy = Literal["interpolation", "zero"]


class SingularNormalEquations(RuntimeError):
    """Damping was exhausted without producing a usable step."""


class RankDeficientInnerSystem(RuntimeError):
    """The coefficient subproblem of variable projection lost rank."""


@dataclass(frozen=True)
class SolverConfig:
    """Gauss-Newton settings.

    Convergence: in square mode the iterate converges once the residual
    infinity norm falls below ``residual_tolerance``. In least-squares mode the
    gradient criterion applies: the infinity norm of J^T r below
    ``residual_tolerance``, an accepted step below ``step_tolerance`` (scaled
    by 1 + |u|), or cost stagnation at the floating-point noise floor.
    """

    max_iterations: int = 100
    residual_tolerance: float = 1e-12
    step_tolerance: float = 1e-12
    damping_initial: float = 1e-3
    damping_growth: float = 10.0
    damping_shrink: float = 0.1
    initial_guess_policy: InitialGuessPolicy = "interpolation"

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.residual_tolerance <= 0 or self.step_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.damping_initial <= 0:
            raise ValueError("damping_initial must be positive")
        if self.damping_growth <= 1:
            raise ValueError("damping_growth must exceed 1")
        if not 0 < self.damping_shrink < 1:
            raise ValueError("damping_shrink must lie in (0, 1)")
        if self.initial_guess_policy not in ("interpolation", "zero"):
            raise ValueError(f"unknown policy {self.initial_guess_policy!r}")


@dataclass(frozen=True)
class FitResult:
    """Recovered rate constants plus fit diagnostics.

    ``final_residual_norm`` is the infinity norm of the constraint violations
    at the returned iterate.
    """

    rate_constants: RateConstants
    polynomials: TrialPolynomialSet
    final_residual_norm: float
    iterations: int
    converged: bool
    mode: str
    diagnostic: str | None = None


def initial_guess(sys: CollocationSystem, policy: InitialGuessPolicy = "interpolation") -> np.ndarray:
    """Starting unknown vector for the iteration.

    Both rate constants start at the reciprocal of the segment's mean
    collocation spacing. The default policy fills the coefficient blocks with
    the least-squares fit of the interpolation constraints alone (minimum-norm
    when underdetermined); the ``zero`` policy leaves them at zero.
    """
    times = sys.segment.times
    spacing = (times[-1] - times[0]) / (len(times) - 1) if len(times) > 1 else 1.0
    k0 = 1.0 / spacing if spacing > 0 else 1.0
    if policy == "zero":
        coeffs = np.zeros(sys.n_coefficients)
    elif policy == "interpolation":
        A, b = sys.interpolation_design()
        coeffs, *_ = np.linalg.lstsq(A, b, rcond=None)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    return np.concatenate([coeffs, [k0, k0]])


def _result_from_vector(
    sys: CollocationSystem,
    u: np.ndarray,
    iterations: int,
    converged: bool,
    diagnostic: str | None,
) -> FitResult:
    coeffs, k = sys.split(u)
    polys = TrialPolynomialSet.from_coefficients(sys.mechanism.species, coeffs)
    return FitResult(
        rate_constants=k,
        polynomials=polys,
        final_residual_norm=float(np.max(np.abs(sys.residual(u)))),
        iterations=iterations,
        converged=converged,
        mode=sys.mode,
        diagnostic=diagnostic,
    )


def _gauss_newton(
    sys: CollocationSystem, u0: np.ndarray, cfg: SolverConfig
) -> tuple[np.ndarray, int, bool, str | None]:
    u = np.array(u0, dtype=float)
    damping = cfg.damping_initial
    r = sys.residual(u)
    if not np.all(np.isfinite(r)):
        raise SingularNormalEquations("non-finite residual at the starting point")
    cost = float(r @ r)
    square = sys.mode == MODE_SQUARE
    identity = np.eye(sys.n_unknowns)
    accepted_steps = 0

    for _ in range(cfg.max_iterations):
        if np.max(np.abs(r)) <= cfg.residual_tolerance:
            return u, accepted_steps, True, None
        J = sys.jacobian(u)
        gradient = J.T @ r
        if not square and np.max(np.abs(gradient)) <= cfg.residual_tolerance:
            return u, accepted_steps, True, None

        normal = J.T @ J
        accepted = False
        while damping <= MAX_DAMPING:
            try:
                step = np.linalg.solve(normal + damping * identity, -gradient)
            except np.linalg.LinAlgError:
                damping *= cfg.damping_growth
                continue
            candidate = u + step
            r_new = sys.residual(candidate)
            cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                u, r, cost = candidate, r_new, cost_new
                damping = max(damping * cfg.damping_shrink, MIN_DAMPING)
                accepted = True
                accepted_steps += 1
                small_step = np.max(np.abs(step)) <= cfg.step_tolerance * (
                    1.0 + np.max(np.abs(u))
                )
                if small_step:
                    if square and np.max(np.abs(r)) > cfg.residual_tolerance:
                        return u, accepted_steps, False, DIAG_RESIDUAL_ABOVE_TOLERANCE
                    return u, accepted_steps, True, None
                break
            damping *= cfg.damping_growth

        if not accepted:
            # No float-representable descent remains. A Levenberg step with
            # positive damping is a descent direction whenever the gradient is
            # nonzero, so this is numerical stationarity, not a solver failure,
            # unless the normal equations could not be solved at all.
            if not np.all(np.isfinite(gradient)):
                raise SingularNormalEquations("non-finite gradient")
            if square and np.max(np.abs(r)) > cfg.residual_tolerance:
                return u, accepted_steps, False, DIAG_RESIDUAL_ABOVE_TOLERANCE
            return u, accepted_steps, True, DIAG_STAGNATION

    converged = square and bool(np.max(np.abs(r)) <= cfg.residual_tolerance)
    return u, accepted_steps, converged, None if converged else DIAG_MAX_ITERATIONS


def solve(sys: CollocationSystem, config: SolverConfig | None = None) -> FitResult:
    """Solve the collocation system by damped Gauss-Newton.

    Accepted steps have strictly decreasing residual 2-norms. If the converged
    rate constants come out negative, the solve restarts once from the initial
    guess scaled by 1.5; a second negative outcome is returned non-converged
    with a ``negative_rate_constants`` diagnostic.

    Raises
    ------
    SingularNormalEquations
        If damping is exhausted without a usable step away from stationarity.
    """
    cfg = config or SolverConfig()
    if sys.n_equations < sys.n_unknowns:
        raise ValueError(
            f"system has {sys.n_equations} equations for {sys.n_unknowns} unknowns"
        )
    u0 = initial_guess(sys, cfg.initial_guess_policy)
    u, iterations, converged, diagnostic = _gauss_newton(sys, u0, cfg)
    if u[-2] >= 0 and u[-1] >= 0:
        return _result_from_vector(sys, u, iterations, converged, diagnostic)

    u, iterations, converged, diagnostic = _gauss_newton(sys, 1.5 * u0, cfg)
    if u[-2] < 0 or u[-1] < 0:
        return _result_from_vector(sys, u, iterations, False, DIAG_NEGATIVE_RATES)
    return _result_from_vector(sys, u, iterations, converged, diagnostic)


def varpro_projection(
    sys: CollocationSystem, k: RateConstants
) -> tuple[np.ndarray, float]:
    """Inner variable-projection solve at fixed rate constants.

    Returns the least-squares coefficient vector and the 2-norm of the
    projected residual. Valid when the residual constraints are linear in the
    coefficients for fixed rate constants (true for first-order networks).

    Raises
    ------
    RankDeficientInnerSystem
        If the coefficient design matrix loses column rank.
    """
    u0 = sys.pack(np.zeros(sys.n_coefficients), k)
    offset = sys.residual(u0)
    design = sys.jacobian(u0)[:, : sys.n_coefficients]
    coeffs, _, rank, _ = np.linalg.lstsq(design, -offset, rcond=None)
    if rank < sys.n_coefficients:
        raise RankDeficientInnerSystem(
            f"inner system rank {rank} < {sys.n_coefficients} coefficients"
        )
    return coeffs, float(np.linalg.norm(design @ coeffs + offset))


def solve_varpro(
    sys: CollocationSystem,
    k_grid_or_seed: Sequence[float] | Iterable[Sequence[float]] | None = None,
) -> FitResult:
    """Variable-projection cross-check solver.

    Eliminates the coefficient block by an inner linear least-squares solve at
    fixed (k1, k2) and minimizes the projected residual norm over the rate
    constants with Nelder-Mead. ``k_grid_or_seed`` is either a single (k1, k2)
    seed, an iterable of candidate seeds (the best one starts the simplex), or
    None for the same default seed as :func:`initial_guess`.
    """

    def projected_cost(k_vec) -> float:
        _, norm = varpro_projection(sys, RateConstants(float(k_vec[0]), float(k_vec[1])))
        return norm * norm

    if k_grid_or_seed is None:
        times = sys.segment.times
        spacing = (times[-1] - times[0]) / (len(times) - 1) if len(times) > 1 else 1.0
        k0 = 1.0 / spacing if spacing > 0 else 1.0
        seed = np.array([k0, k0])
    else:
        candidates = np.atleast_2d(np.asarray(list(k_grid_or_seed), dtype=float))
        if candidates.shape[1] != N_RATE_CONSTANTS:
            raise ValueError("seeds must be (k1, k2) pairs")
        costs = [projected_cost(k) for k in candidates]
        seed = candidates[int(np.argmin(costs))]

    out = minimize(
        projected_cost,
        seed,
        method="Nelder-Mead",
        options={
            "xatol": 1e-12,
            "fatol": 1e-24,
            "maxiter": 4000,
            "maxfev": 4000,
        },
    )
    k = RateConstants(float(out.x[0]), float(out.x[1]))
    coeffs, _ = varpro_projection(sys, k)
    u = sys.pack(coeffs, k)
    converged = bool(out.success) and k.k1 > 0 and k.k2 > 0
    return _result_from_vector(
        sys, u, int(out.nit), converged,
        None if converged else "projection_search_failed",
    )
