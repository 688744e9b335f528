"""Trajectory post-processing: speed-limit estimate, driving-norm diagnostic,
and the measurement-count cost model.

The speed-limit bound is the time-dependent Bhattacharyya form,

    T_qsl <= (pi/2) * T / int_0^T sqrt(<psi(t)|[H(t) - E(t)]^2|psi(t)>) dt,

with E(t) the instantaneous expectation of H(t) by default; a flag switches
E(t) to the molecular expectation, the other reading of the ambiguous text.
The integral uses trapezoidal quadrature on the stored time grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .errors import DataError

STATIONARY_SIGMA = 1e-7  # mean std-dev below which the bound is undefined


@dataclass(frozen=True)
class QslReport:
    t_qsl: float
    t_evolution: float
    integrand: np.ndarray  # std-dev samples on the time grid
    quadrature: str = "trapezoid"

    @property
    def ratio(self) -> float:
        """T_qsl / T_evolution; > 1 means the run beat the bound's estimate."""
        return self.t_qsl / self.t_evolution


@dataclass(frozen=True)
class CostReport:
    eta: int
    epsilon: float
    m_measurements: int
    n_iterations: int
    n_params: int
    circuits: int
    runtime_class: str = "O(G * N^4 / epsilon^2)"

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "epsilon": self.epsilon,
            "m_measurements": self.m_measurements,
            "n_iterations": self.n_iterations,
            "n_params": self.n_params,
            "circuits": self.circuits,
            "runtime_class": self.runtime_class,
        }


def qsl_estimate(traj: Trajectory, use_molecular_energy: bool = False) -> QslReport:
    """Bhattacharyya-type speed-limit estimate from the recorded trajectory."""
    variance = traj.variance
    if use_molecular_energy:
        # <[H - E_mol]^2> = var_H + (E_drive - E_mol)^2
        variance = traj.variance + (traj.e_drive - traj.e_mol) ** 2
    sigma = np.sqrt(np.maximum(variance, 0.0))
    total_time = traj.total_time
    integral = float(np.trapezoid(sigma, traj.times))
    if integral <= STATIONARY_SIGMA * total_time:
        raise DataError("stationary trajectory, QSL undefined")
    return QslReport(
        t_qsl=(math.pi / 2.0) * total_time / integral,
        t_evolution=total_time,
        integrand=sigma,
    )


def mean_driving_norm(traj: Trajectory) -> float:
    """Mean of ||H(t_k)||_F / ||H_mol||_F over the integration steps."""
    if traj.norm_ratio.size == 0:
        raise DataError("empty trajectory")
    # one sample per integration step (the t = T sample repeats the last slot)
    return float(np.mean(traj.norm_ratio[:-1])) if traj.norm_ratio.size > 1 else float(
        traj.norm_ratio[0]
    )


def cost_model(
    n_iterations: int, n_params: int, eta: int, epsilon: float
) -> CostReport:
    """Measurement-count model: m = ceil(4 eta^2 / eps^2), circuits = K*P*m."""
    if min(n_iterations, n_params, eta) <= 0 or epsilon <= 0:
        raise DataError("cost model inputs must be positive")
    m = math.ceil(4 * eta * eta / (epsilon * epsilon))
    circuits = n_iterations * n_params * m
    return CostReport(
        eta=eta,
        epsilon=epsilon,
        m_measurements=m,
        n_iterations=n_iterations,
        n_params=n_params,
        circuits=circuits,
    )


def fit_power_law(sizes: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares exponent and prefactor of y = a * N^b on a log-log grid."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if sizes.size < 2:
        raise DataError("power-law fit needs at least two points")
    if np.any(sizes <= 0) or np.any(values <= 0):
        raise DataError("power-law fit needs positive data")
    b, log_a = np.polyfit(np.log(sizes), np.log(values), 1)
    return float(b), float(np.exp(log_a))


def summary_table(rows: list[dict], columns: list[str]) -> str:
    """Aligned text table, one row per converged run (Table-style output)."""
    widths = {c: max(len(c), *(len(str(r.get(c, ""))) for r in rows)) for c in columns}
    header = "  ".join(c.ljust(widths[c]) for c in columns)
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append("  ".join(str(r.get(c, "")).ljust(widths[c]) for c in columns))
    return "\n".join(lines)
