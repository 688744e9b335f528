"""Classical outer loops: L-BFGS with strong-Wolfe line search, plus
rand/1/bin differential evolution for the derivative-free variant.

Both optimizers are deterministic given their seed and starting point and
share the OptimizationReport schema. L-BFGS terminates on an energy-error
threshold (1 mHa against the exact ground state when it is available), the
iteration cap, or a failed line search; the failed search returns the best
iterate found, not an exception.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .control import ControlSchedule
from .errors import DataError
from .objective import ProblemContext, _adjoint_value_and_gradient

CHEMICAL_ACCURACY = 1.6e-3  # hartree, 1 kcal/mol
DEFAULT_ERROR_THRESHOLD = 1.0e-3  # hartree, the tighter figure-of-merit


@dataclass
class IterateRecord:
    j_value: float
    error: float | None
    grad_norm: float | None


@dataclass
class OptimizationReport:
    iterates: list[IterateRecord]
    best_x: np.ndarray
    best_value: float
    n_iterations: int
    termination_reason: str  # chemical_accuracy | max_iterations | line_search_failure
    seed: int | None
    wall_time: float
    best_schedule: ControlSchedule | None = field(default=None, repr=False)

    @property
    def best_error(self) -> float | None:
        rec = self.iterates[-1] if self.iterates else None
        return rec.error if rec else None

    def to_dict(self) -> dict:
        return {
            "n_iterations": self.n_iterations,
            "termination_reason": self.termination_reason,
            "seed": self.seed,
            "wall_time_s": self.wall_time,
            "best_value": self.best_value,
            "final_error": self.iterates[-1].error if self.iterates else None,
            "parameters": self.best_x.tolist(),
        }


@dataclass
class LbfgsOptions:
    memory: int = 10
    max_iter: int = 500
    error_threshold: float = DEFAULT_ERROR_THRESHOLD  # vs E_FCI, in hartree
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    ls_max_evals: int = 40


# ---------------------------------------------------------------------------
# L-BFGS engine
# ---------------------------------------------------------------------------


def _two_loop(grad, s_list, y_list, rho_list):
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if y_list:
        gamma = np.dot(s_list[-1], y_list[-1]) / np.dot(y_list[-1], y_list[-1])
        q *= gamma
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return q


def _wolfe_zoom(phi, a_lo, a_hi, f_lo, d_lo, f0, d0, c1, c2, noise, evals_left):
    f_hi, _, _ = phi(a_hi, need_grad=False)
    for _ in range(evals_left):
        # Quadratic interpolation, safeguarded toward bisection.
        denom = 2.0 * (f_hi - f_lo - d_lo * (a_hi - a_lo))
        if abs(denom) > 1e-300:
            a_j = a_lo - d_lo * (a_hi - a_lo) ** 2 / denom
        else:
            a_j = 0.5 * (a_lo + a_hi)
        span = abs(a_hi - a_lo)
        lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
        if not (lo + 0.1 * span <= a_j <= hi - 0.1 * span):
            a_j = 0.5 * (a_lo + a_hi)
        f_j, d_j, g_j = phi(a_j)
        if f_j > f0 + c1 * a_j * d0 + noise or f_j >= f_lo + noise:
            a_hi, f_hi = a_j, f_j
        else:
            if abs(d_j) <= -c2 * d0:
                return a_j, f_j, g_j
            if d_j * (a_hi - a_lo) >= 0:
                a_hi, f_hi = a_lo, f_lo
            a_lo, f_lo, d_lo = a_j, f_j, d_j
        if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
            break
    return None


def _wolfe_search(phi, f0, d0, alpha0, c1, c2, max_evals):
    """Strong-Wolfe search; phi(a) evaluates f, the directional slope, and g.

    A tiny relative noise allowance in the sufficient-decrease test keeps
    floating-point jitter near a minimum from spuriously forcing a zoom.
    """
    noise = 1e-15 * (1.0 + abs(f0))
    a_prev, f_prev, d_prev = 0.0, f0, d0
    a = alpha0
    for i in range(max_evals):
        f, d, g = phi(a)
        if f > f0 + c1 * a * d0 + noise or (i > 0 and f >= f_prev + noise):
            return _wolfe_zoom(
                phi, a_prev, a, f_prev, d_prev, f0, d0, c1, c2, noise, max_evals
            )
        if abs(d) <= -c2 * d0:
            return a, f, g
        if d >= 0:
            return _wolfe_zoom(
                phi, a, a_prev, f, d, f0, d0, c1, c2, noise, max_evals
            )
        a_prev, f_prev, d_prev = a, f, d
        a = min(2.0 * a, 1e8)
    return None


def lbfgs_minimize(
    value_and_grad,
    x0: np.ndarray,
    *,
    options: LbfgsOptions | None = None,
    reference_value: float | None = None,
    seed: int | None = None,
) -> OptimizationReport:
    """Two-loop L-BFGS over a generic differentiable functional.

    ``reference_value`` activates the energy-error termination rule:
    stop as soon as f - reference < error_threshold at an accepted iterate.
    """
    opts = options or LbfgsOptions()
    t_start = time.perf_counter()
    x = np.asarray(x0, dtype=float).copy()
    f, g = value_and_grad(x)

    def error_of(value):
        return value - reference_value if reference_value is not None else None

    iterates = [IterateRecord(f, error_of(f), float(np.linalg.norm(g)))]
    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    rho_list: list[float] = []
    reason = "max_iterations"
    n_done = 0

    err0 = error_of(f)
    max_iter = opts.max_iter
    if err0 is not None and err0 < opts.error_threshold:
        reason = "chemical_accuracy"
        max_iter = 0

    for _ in range(max_iter):
        d = -_two_loop(g, s_list, y_list, rho_list)
        slope = float(np.dot(g, d))
        if slope >= 0.0:
            # Curvature information went stale; restart from steepest descent.
            s_list, y_list, rho_list = [], [], []
            d = -g
            slope = -float(np.dot(g, g))
        if slope == 0.0:
            reason = "line_search_failure"
            break
        gnorm = float(np.linalg.norm(g))
        alpha0 = 1.0 if s_list else min(1.0, 1.0 / max(gnorm, 1e-12))

        cache = {}

        def phi(a, need_grad=True, _x=x, _d=d, _cache=cache):
            key = float(a)
            if key not in _cache or (_cache[key][2] is None and need_grad):
                fv, gv = value_and_grad(_x + a * _d)
                _cache[key] = (fv, float(np.dot(gv, _d)), gv)
            return _cache[key]

        hit = _wolfe_search(
            phi, f, slope, alpha0, opts.wolfe_c1, opts.wolfe_c2, opts.ls_max_evals
        )
        if hit is None:
            reason = "line_search_failure"
            break
        alpha, f_new, g_new = hit
        s = alpha * d
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > opts.memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        x = x + s
        f, g = f_new, g_new
        n_done += 1
        iterates.append(IterateRecord(f, error_of(f), float(np.linalg.norm(g))))
        err = error_of(f)
        if err is not None and err < opts.error_threshold:
            reason = "chemical_accuracy"
            break

    return OptimizationReport(
        iterates=iterates,
        best_x=x,
        best_value=f,
        n_iterations=n_done,
        termination_reason=reason,
        seed=seed,
        wall_time=time.perf_counter() - t_start,
    )


def run_lbfgs(
    ctx: ProblemContext,
    s0: ControlSchedule,
    options: LbfgsOptions | None = None,
    seed: int | None = None,
) -> OptimizationReport:
    """Optimize a control schedule against the molecular objective."""

    def value_and_grad(x):
        schedule = s0.with_vector(x)
        return _adjoint_value_and_gradient(schedule, ctx, "auto")

    report = lbfgs_minimize(
        value_and_grad,
        s0.to_vector(),
        options=options,
        reference_value=ctx.e_fci,
        seed=seed,
    )
    report.best_schedule = s0.with_vector(report.best_x)
    return report


# ---------------------------------------------------------------------------
# Differential evolution (rand/1/bin)
# ---------------------------------------------------------------------------


@dataclass
class DiffEvoOptions:
    generations: int = 150
    f_weight: float = 0.8
    crossover: float = 0.9
    popsize_cap: int = 120
    popsize_factor: int = 15
    target_value: float | None = None  # stop early when best falls below


def diffevo_minimize(
    objective,
    bounds: np.ndarray,
    *,
    options: DiffEvoOptions | None = None,
    seed: int = 0,
) -> OptimizationReport:
    """Seeded best/1/bin differential evolution within box bounds."""
    opts = options or DiffEvoOptions()
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise DataError("bounds must be an (n, 2) array of (low, high) pairs")
    dim = bounds.shape[0]
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(hi <= lo):
        raise DataError("every upper bound must exceed its lower bound")

    t_start = time.perf_counter()
    rng = np.random.default_rng(seed)
    n_pop = min(opts.popsize_factor * dim, opts.popsize_cap)
    n_pop = max(n_pop, 4)
    pop = lo + (hi - lo) * rng.random((n_pop, dim))
    values = np.array([objective(ind) for ind in pop])

    iterates = []
    best_idx = int(np.argmin(values))
    iterates.append(IterateRecord(float(values[best_idx]), None, None))
    reason = "max_iterations"
    gen_done = 0

    for _ in range(opts.generations):
        for i in range(n_pop):
            choices = [j for j in range(n_pop) if j != i]
            b, c = rng.choice(choices, size=2, replace=False)
            mutant = pop[best_idx] + opts.f_weight * (pop[b] - pop[c])
            mutant = np.clip(mutant, lo, hi)
            cross = rng.random(dim) < opts.crossover
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, pop[i])
            v = objective(trial)
            if v <= values[i]:
                pop[i] = trial
                values[i] = v
                if v < values[best_idx]:
                    best_idx = i
        gen_done += 1
        best_idx = int(np.argmin(values))
        iterates.append(IterateRecord(float(values[best_idx]), None, None))
        if (
            opts.target_value is not None
            and values[best_idx] <= opts.target_value
        ):
            reason = "chemical_accuracy"
            break

    return OptimizationReport(
        iterates=iterates,
        best_x=pop[best_idx].copy(),
        best_value=float(values[best_idx]),
        n_iterations=gen_done,
        termination_reason=reason,
        seed=seed,
        wall_time=time.perf_counter() - t_start,
    )


def run_diffevo(
    ctx,
    bounds: np.ndarray,
    options: DiffEvoOptions | None = None,
    seed: int = 0,
) -> OptimizationReport:
    """Derivative-free optimization of a vector-parameterized objective.

    ``ctx`` must expose ``objective_vector(x) -> float``; the attraction-only
    context in the annealing module and test stubs provide it.
    """
    return diffevo_minimize(
        ctx.objective_vector, bounds, options=options, seed=seed
    )
