import numpy as np
import pytest
from scipy.linalg import expm

from qscool.control import ControlPoint, ControlSchedule, init_parameters
from qscool.dynamics import (
    ControlBasis,
    Trajectory,
    expmv,
    lanczos_decompose,
    propagate,
    propagate_weighted,
    read_trajectory_csv,
)
from qscool.errors import ConvergenceError, DataError, NumericalIntegrityError
from qscool.molham import build_core_hamiltonian
from qscool.pauli import (
    PauliSum,
    expectation,
    hf_state,
    jordan_wigner,
    number_operator,
    sz_operator,
    to_sparse_matrix,
)

from conftest import random_pauli_sum_terms


def test_expmv_z_phase():
    op = to_sparse_matrix(PauliSum.from_terms(1, [(1.0, "Z")]), 1)
    psi = np.array([1.0, 0.0], dtype=complex)
    out = expmv(op, np.pi, psi)
    assert abs(out[0]) == pytest.approx(1.0)
    assert out[0] == pytest.approx(-1.0)


def test_expmv_x_quarter_period():
    op = to_sparse_matrix(PauliSum.from_terms(1, [(1.0, "X")]), 1)
    out = expmv(op, np.pi / 2, np.array([1.0, 0.0], dtype=complex))
    assert out[0] == pytest.approx(0.0, abs=1e-12)
    assert out[1] == pytest.approx(-1j, abs=1e-12)


def test_expmv_random_8q_vs_dense_oracle():
    rng = np.random.default_rng(7)
    ps = PauliSum.from_terms(8, random_pauli_sum_terms(8, 40, rng))
    op = to_sparse_matrix(ps, 8)
    v = rng.normal(size=256) + 1j * rng.normal(size=256)
    v /= np.linalg.norm(v)
    krylov = expmv(op, 0.05, v, tol=1e-10)
    dense = expm(-1j * 0.05 * op.matrix.toarray()) @ v
    assert np.linalg.norm(krylov - dense) <= 1e-8


def test_expmv_substeps_long_time():
    rng = np.random.default_rng(17)
    ps = PauliSum.from_terms(6, random_pauli_sum_terms(6, 30, rng))
    op = to_sparse_matrix(ps, 6)
    v = rng.normal(size=64) + 1j * rng.normal(size=64)
    v /= np.linalg.norm(v)
    krylov = expmv(op, 8.0, v, tol=1e-10, m_max=25)
    dense = expm(-1j * 8.0 * op.matrix.toarray()) @ v
    assert np.linalg.norm(krylov - dense) <= 1e-8


def test_expmv_cap_error_without_substepping():
    rng = np.random.default_rng(23)
    ps = PauliSum.from_terms(6, random_pauli_sum_terms(6, 40, rng))
    op = to_sparse_matrix(ps, 6)
    v = rng.normal(size=64) + 1j * rng.normal(size=64)
    v /= np.linalg.norm(v)
    with pytest.raises(ConvergenceError) as excinfo:
        expmv(op, 50.0, v, tol=1e-12, m_max=8, allow_substep=False)
    assert excinfo.value.residual is not None


def test_expmv_requires_hermitian():
    from scipy import sparse
    from qscool.pauli import SparseOperator

    mat = sparse.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex))
    op = SparseOperator(mat, 1, hermitian=False)
    with pytest.raises(DataError):
        expmv(op, 0.1, np.array([1.0, 0.0], dtype=complex))


def test_lanczos_decomposition_fractional_times():
    rng = np.random.default_rng(5)
    ps = PauliSum.from_terms(5, random_pauli_sum_terms(5, 20, rng))
    op = to_sparse_matrix(ps, 5)
    v = rng.normal(size=32) + 1j * rng.normal(size=32)
    dec = lanczos_decompose(op.matrix, v, 0.3, tol=1e-12)
    assert dec.converged
    dense = op.matrix.toarray()
    for frac in (0.25, 0.7, 1.0, -1.0):
        exact = expm(-1j * 0.3 * frac * dense) @ v
        assert np.linalg.norm(dec.evolve(0.3 * frac) - exact) < 1e-9


def _idle_schedule(ints, seed=0, total_time=1.0, n_ctrl=4, n_steps=8):
    s = init_parameters(
        total_time=total_time, n_ctrl=n_ctrl, n_steps=n_steps,
        n_nuclei=ints.n_nuclei, seed=seed,
    )
    points = tuple(
        ControlPoint(0.0, p.b0, p.mu, p.rho, p.zeff) for p in s.points
    )
    return ControlSchedule(total_time=total_time, n_steps=n_steps, points=points)


def test_idle_evolution_conserves_molecular_energy(h2_ints, h2_ctx):
    sched = _idle_schedule(h2_ints)
    traj = propagate(h2_ctx.h_mol, h2_ints, sched, h2_ctx.psi0, basis=h2_ctx.basis)
    assert np.abs(traj.e_mol - traj.e_mol[0]).max() <= 1e-10
    assert np.allclose(traj.norm_ratio, 1.0)


def test_number_and_spin_conservation(h2_ints, h2_ctx):
    sched = init_parameters(
        total_time=1.0, n_ctrl=4, n_steps=8, n_nuclei=2, seed=3
    )
    traj = propagate(h2_ctx.h_mol, h2_ints, sched, h2_ctx.psi0, basis=h2_ctx.basis)
    n_op = to_sparse_matrix(number_operator(4), 4)
    sz_op = to_sparse_matrix(sz_operator(4), 4)
    for state in traj.states:
        assert abs(np.linalg.norm(state) - 1.0) <= 1e-10
        assert expectation(n_op, state) == pytest.approx(2.0, abs=1e-8)
        assert expectation(sz_op, state) == pytest.approx(0.0, abs=1e-8)


def test_cached_engine_matches_direct(h2_ints, h2_ctx):
    sched = init_parameters(
        total_time=0.5, n_ctrl=2, n_steps=4, n_nuclei=2, seed=9
    )
    cached = propagate(h2_ctx.h_mol, h2_ints, sched, h2_ctx.psi0, basis=h2_ctx.basis)
    direct = propagate(h2_ctx.h_mol, h2_ints, sched, h2_ctx.psi0, engine="direct")
    assert np.linalg.norm(cached.final_state - direct.final_state) < 1e-10
    assert np.abs(cached.e_mol - direct.e_mol).max() < 1e-10
    assert np.abs(cached.e_drive - direct.e_drive).max() < 1e-10
    assert np.abs(cached.variance - direct.variance).max() < 1e-8
    assert np.abs(cached.norm_ratio - direct.norm_ratio).max() < 1e-10


def test_step_halving_consistency(h2_ints, h2_ctx):
    s1 = init_parameters(total_time=0.5, n_ctrl=2, n_steps=10, n_nuclei=2, seed=4)
    s2 = ControlSchedule(total_time=0.5, n_steps=20, points=s1.points)
    t1 = propagate(h2_ctx.h_mol, h2_ints, s1, h2_ctx.psi0, basis=h2_ctx.basis)
    t2 = propagate(h2_ctx.h_mol, h2_ints, s2, h2_ctx.psi0, basis=h2_ctx.basis)
    assert abs(t1.final_molecular_energy - t2.final_molecular_energy) <= 1e-6


def test_krylov_states_match_dense_oracle(h4_ints, h4_ctx):
    sched = init_parameters(total_time=0.2, n_ctrl=2, n_steps=4, n_nuclei=4, seed=1)
    traj = propagate(h4_ctx.h_mol, h4_ints, sched, h4_ctx.psi0, basis=h4_ctx.basis)
    rows = h4_ctx.basis.schedule_weights(sched)
    psi = h4_ctx.psi0.copy()
    for k in range(sched.n_steps):
        h_dense = h4_ctx.basis.slot_matrix(rows[k]).toarray()
        psi = expm(-1j * sched.dt * h_dense) @ psi
        assert np.linalg.norm(psi - traj.states[k + 1]) <= 1e-8
    assert np.linalg.norm(psi - traj.final_state) <= 1e-8


def test_control_basis_matches_assembled_perturbation(h2_ints, h2_ctx):
    from qscool.control import assemble_perturbation

    rng = np.random.default_rng(2)
    cp = ControlPoint(*rng.normal(size=4), zeff=rng.normal(size=2))
    weights = h2_ctx.basis.weights(cp)
    combo = h2_ctx.basis.slot_matrix(weights).toarray()
    pert = jordan_wigner(assemble_perturbation(h2_ints, cp))
    hmol = jordan_wigner(build_core_hamiltonian(h2_ints))
    direct = to_sparse_matrix(hmol + pert, 4, validate=False).matrix.toarray()
    assert np.abs(combo - direct).max() < 1e-12


def test_trajectory_csv_roundtrip(tmp_path, h2_ints, h2_ctx):
    sched = init_parameters(total_time=0.5, n_ctrl=2, n_steps=4, n_nuclei=2, seed=0)
    traj = propagate(h2_ctx.h_mol, h2_ints, sched, h2_ctx.psi0, basis=h2_ctx.basis)
    path = tmp_path / "traj.csv"
    traj.write_csv(path)
    again = read_trajectory_csv(path)
    assert np.array_equal(again.times, traj.times)
    assert np.array_equal(again.e_mol, traj.e_mol)
    assert np.array_equal(again.variance, traj.variance)


def test_trajectory_invariants():
    with pytest.raises(DataError):
        Trajectory(
            times=np.array([0.0, 0.0]),
            e_mol=np.zeros(2),
            e_drive=np.zeros(2),
            variance=np.zeros(2),
            norm_ratio=np.ones(2),
            final_state=np.array([1.0 + 0j]),
        )
    with pytest.raises(NumericalIntegrityError):
        Trajectory(
            times=np.array([0.0, 1.0]),
            e_mol=np.zeros(2),
            e_drive=np.zeros(2),
            variance=np.array([0.0, -1e-3]),
            norm_ratio=np.ones(2),
            final_state=np.array([1.0 + 0j]),
        )


def test_unnormalized_initial_state_rejected(h2_ints, h2_ctx):
    sched = init_parameters(total_time=0.5, n_ctrl=2, n_steps=4, n_nuclei=2, seed=0)
    bad = h2_ctx.psi0 * 1.5
    with pytest.raises(NumericalIntegrityError):
        propagate(h2_ctx.h_mol, h2_ints, sched, bad, basis=h2_ctx.basis)
