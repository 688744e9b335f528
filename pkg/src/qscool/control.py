"""Five-ingredient control parameterization of the driving perturbation.

A control point bundles (a0, b0, mu, rho, zeff): overall prefactor, scalar
mean-field strength, inverse effective mass mu = 1/(2 m_e), inverse
screening rho = 1/eps, and per-nucleus effective charges. Optimizing the
inverses instead of m_e and eps keeps the parameterized family identical
while removing division singularities from the uniform initialization.

The perturbation coefficients are assembled on the spatial tensors:

  off-diagonal: h_pq = mu*K_pq - sum_i zeff_i*A^i_pq
  diagonal:     h_pp = (b0+mu)*K_pp - sum_i (b0*Z_i + zeff_i)*A^i_pp
  two-body:     g -> (rho+b0)*g on (p=r, q=s); (rho-b0)*g on (p=s, q=r);
                rho*g otherwise  [first matching branch wins]

and the whole tensor is scaled by a0. The diagonal form is the b0-expanded
version of the written b0*(Z_i + zeff_i/b0), which is its analytic
continuation at b0 = 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError
from .molham import (
    FermionCoeffs,
    IntegralSet,
    spin_expand_one_body,
    spin_expand_two_body,
)

PARAMS_PER_KNOT_BASE = 4  # a0, b0, mu, rho; plus one zeff per nucleus

DT_SUPPORTED_RANGE = (0.00125, 0.05)  # a.u., empirical stability window


@dataclass(frozen=True)
class ControlPoint:
    a0: float
    b0: float
    mu: float
    rho: float
    zeff: np.ndarray

    def __post_init__(self):
        z = np.ascontiguousarray(self.zeff, dtype=float)
        z.setflags(write=False)
        object.__setattr__(self, "zeff", z)
        values = [self.a0, self.b0, self.mu, self.rho, *z]
        if not np.all(np.isfinite(values)):
            raise DataError(f"non-finite control parameter in {values}")

    @property
    def n_nuclei(self) -> int:
        return self.zeff.shape[0]


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant schedule: n_ctrl knots spanning n_steps slots.

    Flattened layout is knot-major with [a0, b0, mu, rho, zeff...] per knot.
    """

    total_time: float
    n_steps: int
    points: tuple[ControlPoint, ...] = field(repr=False)

    def __post_init__(self):
        if self.total_time <= 0:
            raise DataError(f"total_time must be positive, got {self.total_time}")
        if self.n_steps % self.n_ctrl != 0:
            raise DataError(
                f"n_steps={self.n_steps} not divisible by n_ctrl={self.n_ctrl}"
            )
        sizes = {p.n_nuclei for p in self.points}
        if len(sizes) != 1:
            raise DimensionError("control points disagree on nucleus count")
        dt = self.dt
        lo, hi = DT_SUPPORTED_RANGE
        if not lo <= dt <= hi:
            warnings.warn(
                f"time step {dt:.5g} a.u. outside the supported range "
                f"[{lo}, {hi}]; integration accuracy is not guaranteed",
                stacklevel=2,
            )

    @property
    def n_ctrl(self) -> int:
        return len(self.points)

    @property
    def n_nuclei(self) -> int:
        return self.points[0].n_nuclei

    @property
    def dt(self) -> float:
        return self.total_time / self.n_steps

    @property
    def n_parameters(self) -> int:
        return self.n_ctrl * (PARAMS_PER_KNOT_BASE + self.n_nuclei)

    def knot_of_step(self, k: int) -> int:
        if not 0 <= k < self.n_steps:
            raise DataError(f"step index {k} out of range [0, {self.n_steps})")
        return (k * self.n_ctrl) // self.n_steps

    def to_vector(self) -> np.ndarray:
        rows = [
            np.concatenate([[p.a0, p.b0, p.mu, p.rho], p.zeff]) for p in self.points
        ]
        return np.concatenate(rows)

    @classmethod
    def from_vector(
        cls,
        vec: np.ndarray,
        *,
        total_time: float,
        n_ctrl: int,
        n_steps: int,
        n_nuclei: int,
    ) -> "ControlSchedule":
        width = PARAMS_PER_KNOT_BASE + n_nuclei
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (n_ctrl * width,):
            raise DimensionError(
                f"vector length {vec.shape} does not match "
                f"n_ctrl*(4+M) = {n_ctrl * width}"
            )
        points = []
        for k in range(n_ctrl):
            w = vec[k * width : (k + 1) * width]
            points.append(
                ControlPoint(a0=w[0], b0=w[1], mu=w[2], rho=w[3], zeff=w[4:])
            )
        return cls(total_time=total_time, n_steps=n_steps, points=tuple(points))

    def with_vector(self, vec: np.ndarray) -> "ControlSchedule":
        return ControlSchedule.from_vector(
            vec,
            total_time=self.total_time,
            n_ctrl=self.n_ctrl,
            n_steps=self.n_steps,
            n_nuclei=self.n_nuclei,
        )


def control_at(schedule: ControlSchedule, k: int) -> ControlPoint:
    """Control point governing integration step k (piecewise constant)."""
    return schedule.points[schedule.knot_of_step(k)]


def init_parameters(
    *,
    total_time: float,
    n_ctrl: int,
    n_steps: int,
    n_nuclei: int,
    seed: int,
) -> ControlSchedule:
    """Seeded initialization: ramps on (a0, b0), U(0,1) on the physical draws.

    a0 ramps 1 -> 0 and b0 ramps 0 -> 1, both evaluated at knot midpoints,
    mirroring a linear annealing schedule. The uniform draws apply to the
    physical ingredients: effective mass, screening constant, and effective
    charges, in the fixed order (m_e, eps, zeff) per knot. The stored knot
    parameters are the inverses mu = 1/(2 m_e) and rho = 1/eps, so their
    initial distributions are heavy-tailed; empirically this is what lets
    the short-duration control problems escape their initial plateau.
    """
    rng = np.random.default_rng(seed)
    knot_width = total_time / n_ctrl
    points = []
    for k in range(n_ctrl):
        t_mid = (k + 0.5) * knot_width
        m_e = max(rng.uniform(), 1e-16)
        eps = max(rng.uniform(), 1e-16)
        zeff = rng.uniform(size=n_nuclei)
        points.append(
            ControlPoint(
                a0=1.0 - t_mid / total_time,
                b0=t_mid / total_time,
                mu=1.0 / (2.0 * m_e),
                rho=1.0 / eps,
                zeff=zeff,
            )
        )
    return ControlSchedule(
        total_time=total_time, n_steps=n_steps, points=tuple(points)
    )


def default_steps(total_time: float, n_ctrl: int, dt_max: float = 0.05) -> int:
    """Smallest multiple of n_ctrl keeping the step within the supported range."""
    slots = max(n_ctrl, int(np.ceil(total_time / (dt_max * n_ctrl))) * n_ctrl)
    return slots


# ---------------------------------------------------------------------------
# Perturbation assembly
# ---------------------------------------------------------------------------


def _eri_branch_masks(n: int) -> tuple[np.ndarray, np.ndarray]:
    p, q, r, s = np.indices((n, n, n, n))
    direct = (p == r) & (q == s)
    exchange = (p == s) & (q == r) & ~direct
    return direct, exchange


def perturbation_spatial_tensors(
    ints: IntegralSet, cp: ControlPoint
) -> tuple[np.ndarray, np.ndarray]:
    """Spatial (h, g) tensors of the perturbation, including the a0 prefactor."""
    if cp.n_nuclei != ints.n_nuclei:
        raise DimensionError(
            f"control point carries {cp.n_nuclei} effective charges for "
            f"{ints.n_nuclei} nuclei"
        )
    K = ints.kinetic
    A = ints.attraction
    charges = ints.nuclear_charges

    h = cp.mu * K - np.einsum("i,ipq->pq", cp.zeff, A)
    diag_idx = np.arange(ints.n_spatial)
    h[diag_idx, diag_idx] += cp.b0 * np.diagonal(K)
    h[diag_idx, diag_idx] -= cp.b0 * np.einsum(
        "i,ip->p", charges, np.diagonal(A, axis1=1, axis2=2)
    )

    direct, exchange = _eri_branch_masks(ints.n_spatial)
    g = cp.rho * ints.eri + cp.b0 * (
        np.where(direct, ints.eri, 0.0) - np.where(exchange, ints.eri, 0.0)
    )
    return cp.a0 * h, cp.a0 * g


def assemble_perturbation(ints: IntegralSet, cp: ControlPoint) -> FermionCoeffs:
    """Spin-orbital coefficient tensors of the perturbation at one knot."""
    h, g = perturbation_spatial_tensors(ints, cp)
    return FermionCoeffs(
        n_spin_orbitals=ints.n_spin_orbitals,
        one_body=spin_expand_one_body(h),
        two_body=spin_expand_two_body(g),
        constant=0.0,
    )
