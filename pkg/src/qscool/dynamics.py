"""State-vector propagation under the piecewise-constant controlled Hamiltonian.

The propagator walks the integration grid t_k = k*dt, k = 0..K. Within slot
k the Hamiltonian is constant, H_k = H_mol + V(t_k), so each step is a
single matrix exponential applied to the state. The slot operators are
produced by rescaling cached Pauli images of the integral tensors (the
coefficients are linear in the control parameters), so no Jordan-Wigner
work happens inside the time loop.

Instantaneous statistics are recorded at every grid point with the
Hamiltonian of the slot starting there; the final point t = T reuses the
last slot (left-continuous extension). Both the driving expectation
<psi|H(t)|psi> and the molecular expectation <psi|H_mol|psi> are stored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal

from .control import ControlSchedule, assemble_perturbation, control_at
from .errors import ConvergenceError, DataError, NumericalIntegrityError
from .molham import (
    FermionCoeffs,
    IntegralSet,
    build_core_hamiltonian,
    spin_expand_one_body,
    spin_expand_two_body,
)
from .pauli import (
    OperatorBasis,
    SparseOperator,
    check_normalized,
    jordan_wigner,
    to_sparse_matrix,
)

DEFAULT_EXPMV_TOL = 1e-10
MAX_KRYLOV = 90
DENSE_CUTOFF_DIM = 32  # exact per-slot eigendecomposition below this size


# ---------------------------------------------------------------------------
# Krylov matrix exponential
# ---------------------------------------------------------------------------


@dataclass
class LanczosDecomposition:
    """Lanczos factorization of (H, v) good enough to evolve v by +-dt.

    ``evolve(t)`` returns exp(-1j*t*H) v for any |t| <= the dt the
    factorization was converged for (the Krylov error is largest at the
    full step).
    """

    beta0: float
    V: np.ndarray  # (n, m)
    eigvals: np.ndarray  # (m,) of the tridiagonal projection
    eigvecs: np.ndarray  # (m, m), real orthogonal
    converged: bool
    error_estimate: float

    @property
    def m(self) -> int:
        return self.eigvals.shape[0]

    def evolve(self, t: float) -> np.ndarray:
        phases = np.exp(-1j * t * self.eigvals)
        small = self.eigvecs @ (phases * self.eigvecs[0, :])
        return self.beta0 * (self.V @ small)

    def propagator_column(self, t: float) -> np.ndarray:
        """Coefficients of exp(-1j*t*T_m) e1 in the Lanczos basis."""
        return self.eigvecs @ (np.exp(-1j * t * self.eigvals) * self.eigvecs[0, :])


def lanczos_decompose(
    h: sparse.csr_matrix,
    v: np.ndarray,
    dt: float,
    tol: float = DEFAULT_EXPMV_TOL,
    m_max: int = MAX_KRYLOV,
) -> LanczosDecomposition:
    """Adaptive Lanczos factorization targeting exp(-1j*dt*H) v to ``tol``.

    Uses one full reorthogonalization pass per iteration and the standard
    first-neglected-component error estimate. ``converged`` is False when
    the subspace cap is reached first; callers then substep.
    """
    n = v.shape[0]
    beta0 = float(np.linalg.norm(v))
    if beta0 == 0.0:
        return LanczosDecomposition(
            0.0, np.zeros((n, 1), dtype=complex), np.zeros(1), np.eye(1), True, 0.0
        )

    m_cap = min(m_max, n)
    V = np.empty((n, m_cap + 1), dtype=complex)
    V[:, 0] = v / beta0
    alphas: list[float] = []
    betas: list[float] = []
    est = np.inf
    small_streak = 0

    for j in range(m_cap):
        w = h.dot(V[:, j])
        alpha = float(np.vdot(V[:, j], w).real)
        w -= alpha * V[:, j]
        if j > 0:
            w -= betas[-1] * V[:, j - 1]
        # One full reorthogonalization pass keeps the basis clean.
        overlap = V[:, : j + 1].conj().T @ w
        w -= V[:, : j + 1] @ overlap
        beta = float(np.linalg.norm(w))
        alphas.append(alpha)

        evals, evecs = _tridiag_eig(alphas, betas)
        u = evecs @ (np.exp(-1j * dt * evals) * evecs[0, :])
        est = beta0 * beta * abs(u[-1])
        # Demand two consecutive small estimates so an accidental zero in the
        # last component cannot trigger early termination.
        small_streak = small_streak + 1 if est <= 0.5 * tol else 0
        if small_streak >= 2 or beta < 1e-13:
            return LanczosDecomposition(beta0, V[:, : j + 1].copy(), evals, evecs, True, est)
        V[:, j + 1] = w / beta
        betas.append(beta)

    evals, evecs = _tridiag_eig(alphas, betas[: len(alphas) - 1])
    return LanczosDecomposition(beta0, V[:, : len(alphas)].copy(), evals, evecs, False, est)


def _tridiag_eig(alphas: list[float], betas: list[float]):
    if len(alphas) == 1:
        return np.array(alphas), np.eye(1)
    return eigh_tridiagonal(np.array(alphas), np.array(betas[: len(alphas) - 1]))


def _expmv_csr(
    h: sparse.csr_matrix,
    dt: float,
    psi: np.ndarray,
    tol: float,
    m_max: int,
    depth: int = 0,
) -> np.ndarray:
    dec = lanczos_decompose(h, psi, dt, tol=tol, m_max=m_max)
    if dec.converged:
        return dec.evolve(dt)
    if depth >= 40:
        raise ConvergenceError(
            f"matrix exponential did not reach tol={tol:g} within the Krylov cap "
            f"(achieved estimate {dec.error_estimate:.3e})",
            residual=dec.error_estimate,
        )
    half = _expmv_csr(h, dt / 2, psi, tol / 2, m_max, depth + 1)
    return _expmv_csr(h, dt / 2, half, tol / 2, m_max, depth + 1)


def expmv(
    op: SparseOperator,
    dt: float,
    psi: np.ndarray,
    tol: float = DEFAULT_EXPMV_TOL,
    m_max: int = MAX_KRYLOV,
    allow_substep: bool = True,
) -> np.ndarray:
    """exp(-1j*dt*H) psi by adaptive Krylov projection.

    With ``allow_substep`` the step is halved recursively whenever the
    subspace cap is reached; disabling it surfaces the cap as an error that
    carries the achieved error estimate.
    """
    if not op.hermitian:
        raise DataError("expmv requires a hermitian operator")
    if psi.shape[0] != op.dim:
        raise DataError(f"state dimension {psi.shape[0]} != operator dimension {op.dim}")
    psi = np.asarray(psi, dtype=complex)
    if allow_substep:
        out = _expmv_csr(op.matrix, dt, psi, tol, m_max)
    else:
        dec = lanczos_decompose(op.matrix, psi, dt, tol=tol, m_max=m_max)
        if not dec.converged:
            raise ConvergenceError(
                f"Krylov subspace cap {m_max} reached with error estimate "
                f"{dec.error_estimate:.3e} > tol {tol:g}",
                residual=dec.error_estimate,
            )
        out = dec.evolve(dt)
    norm_in = np.linalg.norm(psi)
    if norm_in > 0:
        drift = abs(np.linalg.norm(out) / norm_in - 1.0)
        if drift > 1e-8:
            raise NumericalIntegrityError(
                f"exponential step changed the norm by {drift:.3e}"
            )
    return out


def _dense_step(h_dense: np.ndarray, dt: float, psi: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(h_dense)
    return q @ (np.exp(-1j * dt * w) * (q.conj().T @ psi))




# ---------------------------------------------------------------------------
# Cached control basis
# ---------------------------------------------------------------------------


class ControlBasis:
    """Pauli images of the integral skeletons, rescaled per control knot.

    The driving Hamiltonian is linear in the derived coefficients:

      H(cp) = H_mol + a0*( mu*M_K + b0*M_B + rho*M_G - sum_i zeff_i*M_Ai )

    where M_K is the kinetic one-body image, M_Ai the per-nucleus attraction
    images, M_G the two-body image of the bare (pq|rs), and M_B collects
    every b0-proportional piece (diagonal kinetic/attraction one-body terms
    plus the direct-minus-exchange two-body pattern).
    """

    def __init__(self, ints: IntegralSet):
        self.ints = ints
        n_so = ints.n_spin_orbitals
        self.n_qubits = n_so
        n = ints.n_spatial
        zeros2 = np.zeros((n_so, n_so))
        zeros4 = np.zeros((n_so,) * 4)

        sums = [jordan_wigner(build_core_hamiltonian(ints))]

        kin = FermionCoeffs(n_so, spin_expand_one_body(ints.kinetic), zeros4)
        sums.append(jordan_wigner(kin))

        diag_k = np.diag(np.diagonal(ints.kinetic))
        diag_a = np.diag(
            np.einsum("i,ip->p", ints.nuclear_charges, np.diagonal(ints.attraction, axis1=1, axis2=2))
        )
        p, q, r, s = np.indices((n, n, n, n))
        direct = (p == r) & (q == s)
        exchange = (p == s) & (q == r) & ~direct
        g_b = np.where(direct, ints.eri, 0.0) - np.where(exchange, ints.eri, 0.0)
        b_part = FermionCoeffs(
            n_so, spin_expand_one_body(diag_k - diag_a), spin_expand_two_body(g_b)
        )
        sums.append(jordan_wigner(b_part))

        g_part = FermionCoeffs(n_so, zeros2, spin_expand_two_body(ints.eri))
        sums.append(jordan_wigner(g_part))

        for i in range(ints.n_nuclei):
            att = FermionCoeffs(n_so, spin_expand_one_body(ints.attraction[i]), zeros4)
            sums.append(jordan_wigner(att))

        self.basis = OperatorBasis(sums, n_so)
        self._hmol_frob = self.basis.frobenius_norm(self._unit_weights(0))
        self._hmol = self.basis.single(0)

    @property
    def n_ops(self) -> int:
        return self.basis.n_ops

    @property
    def h_mol(self) -> SparseOperator:
        return self._hmol

    @property
    def h_mol_frobenius(self) -> float:
        return self._hmol_frob

    def _unit_weights(self, b: int) -> np.ndarray:
        w = np.zeros(self.n_ops)
        w[b] = 1.0
        return w

    def weights(self, cp) -> np.ndarray:
        """[H_mol, M_K, M_B, M_G, M_A...] weights for one control point."""
        w = np.empty(self.n_ops)
        w[0] = 1.0
        w[1] = cp.a0 * cp.mu
        w[2] = cp.a0 * cp.b0
        w[3] = cp.a0 * cp.rho
        w[4:] = -cp.a0 * cp.zeff
        return w

    def schedule_weights(self, schedule: ControlSchedule) -> np.ndarray:
        return np.array(
            [self.weights(control_at(schedule, k)) for k in range(schedule.n_steps)]
        )

    def slot_matrix(self, weights: np.ndarray) -> sparse.csr_matrix:
        return self.basis.combine_matrix(weights)

    def norm_ratio(self, weights: np.ndarray) -> float:
        return self.basis.frobenius_norm(weights) / self._hmol_frob

    def derivative_operator(self, b: int) -> sparse.csr_matrix:
        """CSR of basis member b (for adjoint-gradient bilinears)."""
        return self.basis.single(b).matrix


# ---------------------------------------------------------------------------
# Trajectory record
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    e_mol: np.ndarray
    e_drive: np.ndarray
    variance: np.ndarray
    norm_ratio: np.ndarray
    final_state: np.ndarray
    states: list[np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise DataError("trajectory times must be strictly increasing")
        if np.any(self.variance < -1e-10):
            raise NumericalIntegrityError(
                f"negative variance {self.variance.min():.3e} on the trajectory"
            )
        self.variance = np.maximum(self.variance, 0.0)

    @property
    def total_time(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def final_molecular_energy(self) -> float:
        return float(self.e_mol[-1])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "E_mol", "E_drive", "variance", "norm_ratio"])
            for row in zip(
                self.times, self.e_mol, self.e_drive, self.variance, self.norm_ratio
            ):
                writer.writerow([repr(float(x)) for x in row])


def read_trajectory_csv(path: str | Path) -> Trajectory:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(
                [float(rec[c]) for c in ("t", "E_mol", "E_drive", "variance", "norm_ratio")]
            )
    if not rows:
        raise DataError(f"{path} carries no trajectory rows")
    arr = np.array(rows)
    dim_placeholder = np.zeros(1, dtype=complex)
    return Trajectory(
        times=arr[:, 0],
        e_mol=arr[:, 1],
        e_drive=arr[:, 2],
        variance=arr[:, 3],
        norm_ratio=arr[:, 4],
        final_state=dim_placeholder,
    )


# ---------------------------------------------------------------------------
# Propagation engines
# ---------------------------------------------------------------------------


def propagate_weighted(
    basis: OperatorBasis,
    weight_rows: np.ndarray,
    dt: float,
    psi0: np.ndarray,
    h_mol: SparseOperator,
    hmol_frobenius: float,
    *,
    tol: float = DEFAULT_EXPMV_TOL,
    store_states: bool = True,
) -> Trajectory:
    """Generic engine: one weight row per slot over a shared operator basis."""
    check_normalized(psi0)
    n_steps = weight_rows.shape[0]
    dim = basis.dim
    dense = dim <= DENSE_CUTOFF_DIM

    times = dt * np.arange(n_steps + 1)
    e_mol = np.empty(n_steps + 1)
    e_drive = np.empty(n_steps + 1)
    variance = np.empty(n_steps + 1)
    norm_ratio = np.empty(n_steps + 1)
    states = [] if store_states else None

    if dense:
        # Tiny registers: stage the basis densely once, skip CSR assembly.
        dense_ops = basis.dense_stack()
        hmol_dense = h_mol.matrix.toarray()

    psi = np.asarray(psi0, dtype=complex).copy()
    hk = None
    for k in range(n_steps + 1):
        row = weight_rows[min(k, n_steps - 1)]
        if k < n_steps or hk is None:
            if dense:
                hk = np.tensordot(row, dense_ops, axes=(0, 0))
            else:
                hk = basis.combine_matrix(row)
        # at k == n_steps the last slot matrix is reused (left-continuous H(T))
        hpsi = hk @ psi if dense else hk.dot(psi)
        e_d = float(np.vdot(psi, hpsi).real)
        e_drive[k] = e_d
        variance[k] = float(np.vdot(hpsi, hpsi).real) - e_d * e_d
        hmpsi = hmol_dense @ psi if dense else h_mol.matvec(psi)
        e_mol[k] = float(np.vdot(psi, hmpsi).real)
        norm_ratio[k] = (
            np.sqrt(dim) * np.linalg.norm(row @ basis.gamma) / hmol_frobenius
        )
        if store_states:
            states.append(psi.copy())
        if k == n_steps:
            break
        if dense:
            psi = _dense_step(hk, dt, psi)
        else:
            psi = _expmv_csr(hk, dt, psi, tol, MAX_KRYLOV)
        drift = abs(np.linalg.norm(psi) - 1.0)
        if drift > 1e-8:
            raise NumericalIntegrityError(
                f"norm drift {drift:.3e} after step {k}"
            )

    return Trajectory(
        times=times,
        e_mol=e_mol,
        e_drive=e_drive,
        variance=variance,
        norm_ratio=norm_ratio,
        final_state=psi,
        states=states,
    )


def propagate(
    h_mol: SparseOperator,
    ints: IntegralSet,
    schedule: ControlSchedule,
    psi0: np.ndarray,
    *,
    basis: ControlBasis | None = None,
    tol: float = DEFAULT_EXPMV_TOL,
    store_states: bool = True,
    engine: str = "cached",
) -> Trajectory:
    """Propagate psi0 under H_mol + V(t_k) and record the trajectory.

    ``engine="cached"`` rescales precomputed Pauli images per knot;
    ``engine="direct"`` reassembles and re-maps the perturbation every slot
    (slow, used to validate the cached path).
    """
    if engine == "direct":
        return _propagate_direct(
            h_mol, ints, schedule, psi0, tol=tol, store_states=store_states
        )
    if basis is None:
        basis = ControlBasis(ints)
    rows = basis.schedule_weights(schedule)
    return propagate_weighted(
        basis.basis,
        rows,
        schedule.dt,
        psi0,
        h_mol,
        basis.h_mol_frobenius,
        tol=tol,
        store_states=store_states,
    )


def _propagate_direct(h_mol, ints, schedule, psi0, *, tol, store_states):
    check_normalized(psi0)
    n_q = ints.n_spin_orbitals
    hmol_ps = jordan_wigner(build_core_hamiltonian(ints))
    hmol_frob = hmol_ps.frobenius_norm()

    n_steps = schedule.n_steps
    dt = schedule.dt
    times = dt * np.arange(n_steps + 1)
    e_mol = np.empty(n_steps + 1)
    e_drive = np.empty(n_steps + 1)
    variance = np.empty(n_steps + 1)
    norm_ratio = np.empty(n_steps + 1)
    states = [] if store_states else None

    psi = np.asarray(psi0, dtype=complex).copy()
    hk_op = None
    hk_ps = None
    for k in range(n_steps + 1):
        if k < n_steps:
            pert = assemble_perturbation(ints, control_at(schedule, k))
            hk_ps = hmol_ps + jordan_wigner(pert)
            hk_op = to_sparse_matrix(hk_ps, n_q, validate=False)
        hpsi = hk_op.matvec(psi)
        e_d = float(np.vdot(psi, hpsi).real)
        e_drive[k] = e_d
        variance[k] = float(np.vdot(hpsi, hpsi).real) - e_d * e_d
        e_mol[k] = float(np.vdot(psi, h_mol.matvec(psi)).real)
        norm_ratio[k] = hk_ps.frobenius_norm() / hmol_frob
        if store_states:
            states.append(psi.copy())
        if k == n_steps:
            break
        psi = _expmv_csr(hk_op.matrix, dt, psi, tol, MAX_KRYLOV)
        drift = abs(np.linalg.norm(psi) - 1.0)
        if drift > 1e-8:
            raise NumericalIntegrityError(f"norm drift {drift:.3e} after step {k}")

    return Trajectory(
        times=times,
        e_mol=e_mol,
        e_drive=e_drive,
        variance=variance,
        norm_ratio=norm_ratio,
        final_state=psi,
        states=states,
    )
