"""Deterministic Nelder-Mead simplex minimizer.

Hand-rolled rather than delegated so that evaluation budgets, restart seeding
and the non-finite-objective diagnostic stay under the package's determinism
contract.  Standard coefficients: reflect 1, expand 2, contract 0.5,
shrink 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteObjectiveError, ValidationError


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    n_evals: int
    converged: bool


def nelder_mead_minimize(
    objective,
    x0,
    initial_step=0.1,
    xatol: float = 1e-8,
    fatol: float = 1e-12,
    max_evals: int = 2000,
) -> NelderMeadResult:
    """Minimize a scalar function of a flat parameter vector.

    ``initial_step`` (scalar or per-coordinate array) sets the starting
    simplex spread around x0.  Converged means both the simplex x-spread and
    f-spread fell below their tolerances before the budget ran out.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size == 0:
        raise ValidationError("x0 must have at least one coordinate")
    step = np.broadcast_to(np.asarray(initial_step, dtype=float), x0.shape).copy()
    if np.any(step == 0.0):
        raise ValidationError("initial_step entries must be non-zero")
    if max_evals < x0.size + 1:
        raise ValidationError("max_evals too small to evaluate the initial simplex")

    n_evals = 0

    def f(x):
        nonlocal n_evals
        n_evals += 1
        val = float(objective(x))
        if not np.isfinite(val):
            raise NonFiniteObjectiveError(f"objective returned {val!r} at x={x!r}")
        return val

    n = x0.size
    simplex = [x0.copy()]
    for i in range(n):
        vertex = x0.copy()
        vertex[i] += step[i]
        simplex.append(vertex)
    values = [f(v) for v in simplex]

    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    converged = False
    while n_evals < max_evals:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        x_spread = max(np.max(np.abs(v - simplex[0])) for v in simplex[1:])
        if values[-1] - values[0] <= fatol and x_spread <= xatol:
            converged = True
            break

        centroid = np.mean(simplex[:-1], axis=0)
        reflected = centroid + alpha * (centroid - simplex[-1])
        f_r = f(reflected)
        if values[0] <= f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
            continue
        if f_r < values[0]:
            expanded = centroid + gamma * (reflected - centroid)
            f_e = f(expanded)
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
            continue
        contracted = centroid + rho * (simplex[-1] - centroid)
        f_c = f(contracted)
        if f_c < values[-1]:
            simplex[-1], values[-1] = contracted, f_c
            continue
        best = simplex[0]
        for i in range(1, n + 1):
            simplex[i] = best + sigma * (simplex[i] - best)
            values[i] = f(simplex[i])

    order = np.argsort(values, kind="stable")
    return NelderMeadResult(
        x=simplex[order[0]].copy(),
        fun=values[order[0]],
        n_evals=n_evals,
        converged=converged,
    )
