"""Quantum simulated annealing baseline and the attraction-only control variant.

The annealing interpolation H(t) = A(t) H_hf + B(t) H_mol starts from the
mean-field Hamiltonian H_hf = sum_p eps_p n_p + c, whose constant is fixed
so the reference determinant has exactly the recorded mean-field energy.
Schedules are linear, sampled at slot midpoints like the control module.

The companion control variant drives only the electron-nuclei interaction:
V(t) = f(t) * sum_i Z_i A^i as a one-body operator, one f value per knot,
optimized derivative-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import DEFAULT_EXPMV_TOL, Trajectory, propagate_weighted
from .errors import DataError
from .molham import FermionCoeffs, IntegralSet, build_core_hamiltonian, spin_expand_one_body
from .pauli import (
    OperatorBasis,
    PauliSum,
    exact_ground_state,
    expectation,
    hf_state,
    jordan_wigner,
    to_sparse_matrix,
)


@dataclass(frozen=True)
class AnnealConfig:
    total_time: float
    n_steps: int
    kind: str = "linear"

    def __post_init__(self):
        if self.total_time <= 0:
            raise DataError("annealing time must be positive")
        if self.n_steps < 1:
            raise DataError("need at least one step")
        if self.kind != "linear":
            raise DataError(f"unsupported schedule kind {self.kind!r}")

    def switching(self, t: float) -> tuple[float, float]:
        """A(t), B(t) with A(0)=1, B(0)=0, A(T)=0, B(T)=1."""
        tau = t / self.total_time
        return 1.0 - tau, tau


def build_hf_hamiltonian(ints: IntegralSet) -> PauliSum:
    """Mean-field Hamiltonian sum_p eps_p n_p + c with <HF|H_hf|HF> pinned.

    Each spatial orbital energy is duplicated over its two spin-orbitals;
    the constant is chosen so the occupied determinant reproduces the
    recorded mean-field total energy (the additive constant is otherwise
    arbitrary and only energy differences along the anneal carry meaning).
    """
    if ints.orbital_energies.size != ints.n_spatial:
        raise DataError("orbital energies missing or wrong length")
    n_so = ints.n_spin_orbitals
    eps_so = np.repeat(ints.orbital_energies, 2)
    occupied_sum = float(eps_so[: ints.n_electrons].sum())
    constant = ints.hf_energy - occupied_sum
    one_body = np.diag(eps_so)
    fc = FermionCoeffs(n_so, one_body, np.zeros((n_so,) * 4), constant=constant)
    return jordan_wigner(fc)


class AnnealContext:
    """Cached operators for annealing runs on one molecule."""

    def __init__(self, ints: IntegralSet, tol: float = DEFAULT_EXPMV_TOL):
        self.ints = ints
        self.tol = tol
        n_so = ints.n_spin_orbitals
        hmol_ps = jordan_wigner(build_core_hamiltonian(ints))
        hhf_ps = build_hf_hamiltonian(ints)
        self.basis = OperatorBasis([hhf_ps, hmol_ps], n_so)
        self.h_mol = to_sparse_matrix(hmol_ps, n_so, validate=False)
        self.hmol_frobenius = hmol_ps.frobenius_norm()
        self.psi0 = hf_state(n_so, ints.n_electrons)
        self.e_hf = expectation(self.h_mol, self.psi0)


def anneal_run(
    ints: IntegralSet,
    cfg: AnnealConfig,
    *,
    ctx: AnnealContext | None = None,
    store_states: bool = False,
) -> Trajectory:
    """Propagate the mean-field state through the linear interpolation."""
    ctx = ctx or AnnealContext(ints)
    dt = cfg.total_time / cfg.n_steps
    rows = np.empty((cfg.n_steps, 2))
    for k in range(cfg.n_steps):
        a, b = cfg.switching((k + 0.5) * dt)
        rows[k] = (a, b)
    return propagate_weighted(
        ctx.basis,
        rows,
        dt,
        ctx.psi0,
        ctx.h_mol,
        ctx.hmol_frobenius,
        tol=ctx.tol,
        store_states=store_states,
    )


# ---------------------------------------------------------------------------
# Attraction-only control (the two-orbital shortcut study)
# ---------------------------------------------------------------------------


def h2_scaling_perturbation(ints: IntegralSet, f: float) -> FermionCoeffs:
    """One-body modulation f * sum_i Z_i A^i of the electron-nuclei term."""
    if not np.isfinite(f):
        raise DataError("modulation factor must be finite")
    h_spatial = f * np.einsum(
        "i,ipq->pq", ints.nuclear_charges, ints.attraction
    )
    n_so = ints.n_spin_orbitals
    return FermionCoeffs(
        n_so, spin_expand_one_body(h_spatial), np.zeros((n_so,) * 4)
    )


class AttractionControlContext:
    """Derivative-free objective over per-knot modulation factors.

    ``objective_vector(f)`` evolves the mean-field state under
    H_mol + f_k * sum_i Z_i A^i (piecewise constant, one factor per knot)
    and returns the final molecular energy.
    """

    def __init__(
        self,
        ints: IntegralSet,
        total_time: float,
        n_ctrl: int,
        n_steps: int,
        tol: float = DEFAULT_EXPMV_TOL,
    ):
        if n_steps % n_ctrl != 0:
            raise DataError("n_steps must be divisible by n_ctrl")
        self.ints = ints
        self.total_time = total_time
        self.n_ctrl = n_ctrl
        self.n_steps = n_steps
        self.tol = tol
        n_so = ints.n_spin_orbitals
        hmol_ps = jordan_wigner(build_core_hamiltonian(ints))
        attr_ps = jordan_wigner(h2_scaling_perturbation(ints, 1.0))
        self.basis = OperatorBasis([hmol_ps, attr_ps], n_so)
        self.h_mol = to_sparse_matrix(hmol_ps, n_so, validate=False)
        self.hmol_frobenius = hmol_ps.frobenius_norm()
        self.psi0 = hf_state(n_so, ints.n_electrons)
        self.e_fci = exact_ground_state(self.h_mol)[0]

    def trajectory(self, f_knots: np.ndarray, store_states: bool = False) -> Trajectory:
        f_knots = np.asarray(f_knots, dtype=float)
        if f_knots.shape != (self.n_ctrl,):
            raise DataError(
                f"expected {self.n_ctrl} knot values, got shape {f_knots.shape}"
            )
        per = self.n_steps // self.n_ctrl
        rows = np.column_stack(
            [np.ones(self.n_steps), np.repeat(f_knots, per)]
        )
        return propagate_weighted(
            self.basis,
            rows,
            self.total_time / self.n_steps,
            self.psi0,
            self.h_mol,
            self.hmol_frobenius,
            tol=self.tol,
            store_states=store_states,
        )

    def objective_vector(self, f_knots: np.ndarray) -> float:
        """Final molecular energy; exponentiates once per knot (H is constant
        inside a knot, so this is exactly the per-step evolution)."""
        f_knots = np.asarray(f_knots, dtype=float)
        if f_knots.shape != (self.n_ctrl,):
            raise DataError(
                f"expected {self.n_ctrl} knot values, got shape {f_knots.shape}"
            )
        if self.basis.dim > 64:
            return self.trajectory(f_knots).final_molecular_energy
        dense = self.basis.dense_stack()
        h0, attr = dense[0], dense[1]
        dt_knot = self.total_time / self.n_ctrl
        psi = self.psi0.astype(complex)
        for f in f_knots:
            w, q = np.linalg.eigh(h0 + f * attr)
            psi = q @ (np.exp(-1j * dt_knot * w) * (q.conj().T @ psi))
        return float(np.vdot(psi, h0 @ psi).real)
