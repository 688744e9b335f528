import numpy as np
import pytest

from qscool.errors import ConvergenceError, DataError, DimensionError, NumericalIntegrityError
from qscool.molham import FermionCoeffs, build_core_hamiltonian
from qscool.pauli import (
    OperatorBasis,
    PauliSum,
    SparseOperator,
    exact_ground_state,
    expectation,
    hf_state,
    jordan_wigner,
    number_operator,
    sz_operator,
    to_sparse_matrix,
)

from conftest import dense_from_terms, kron_string, random_pauli_sum_terms
from scipy import sparse


def test_jw_number_operator_single_mode():
    fc = FermionCoeffs(1, np.array([[1.0]]), np.zeros((1, 1, 1, 1)))
    ps = jordan_wigner(fc)
    assert ps.n_terms == 2
    assert ps.coefficient("I") == pytest.approx(0.5)
    assert ps.coefficient("Z") == pytest.approx(-0.5)


def test_jw_h2_term_count(h2_ints):
    ps = jordan_wigner(build_core_hamiltonian(h2_ints))
    assert ps.n_terms == 15
    assert ps.is_hermitian()


def test_jw_zero_coefficients_constant_only():
    fc = FermionCoeffs(2, np.zeros((2, 2)), np.zeros((2, 2, 2, 2)), constant=1.25)
    ps = jordan_wigner(fc)
    assert ps.n_terms == 1
    assert ps.coefficient("II") == pytest.approx(1.25)


def test_jw_rejects_nonhermitian_two_body():
    g = np.zeros((4, 4, 4, 4))
    g[0, 2, 0, 2] = 1.0  # conjugate partner g[2,0,2,0] missing
    fc = FermionCoeffs(4, np.zeros((4, 4)), g)
    with pytest.raises(DataError, match="hermitian"):
        jordan_wigner(fc)


def test_sparse_single_x():
    op = to_sparse_matrix(PauliSum.from_terms(1, [(1.0, "X")]), 1)
    assert np.allclose(op.matrix.toarray(), [[0, 1], [1, 0]])


def test_sparse_zz_diagonal():
    op = to_sparse_matrix(PauliSum.from_terms(2, [(1.0, "ZZ")]), 2)
    assert np.allclose(np.diag(op.matrix.toarray()), [1, -1, -1, 1])


def test_sparse_matches_kron_oracle_random():
    rng = np.random.default_rng(42)
    terms = random_pauli_sum_terms(4, 25, rng)
    ps = PauliSum.from_terms(4, terms)
    dense = dense_from_terms(terms, 4)
    assert np.abs(to_sparse_matrix(ps, 4).matrix.toarray() - dense).max() < 1e-14


def test_sparse_h2_hamiltonian_matches_kron_oracle(h2_ints):
    ps = jordan_wigner(build_core_hamiltonian(h2_ints))
    dense = dense_from_terms(ps.terms, 4)
    assert np.abs(to_sparse_matrix(ps, 4).matrix.toarray() - dense).max() < 1e-14


def test_sparse_length_mismatch():
    ps = PauliSum.from_terms(2, [(1.0, "XZ")])
    with pytest.raises(DimensionError):
        to_sparse_matrix(ps, 3)


def test_ground_state_diagonal():
    op = to_sparse_matrix(PauliSum.from_terms(1, [(-0.5, "Z")]), 1)
    energy, state = exact_ground_state(op)
    assert energy == pytest.approx(-0.5)
    assert abs(state[0]) == pytest.approx(1.0)


def test_ground_state_h2_vs_dense_oracle(h2_ctx):
    w = np.linalg.eigh(h2_ctx.h_mol.matrix.toarray())[0]
    assert h2_ctx.e_fci == pytest.approx(w[0], abs=1e-10)
    assert h2_ctx.e_fci < h2_ctx.e_hf


def test_ground_state_h4_vs_dense_oracle(h4_ctx):
    w = np.linalg.eigh(h4_ctx.h_mol.matrix.toarray())[0]
    assert h4_ctx.e_fci == pytest.approx(w[0], abs=1e-9)


def test_ground_state_invariant_under_term_shuffle(h2_ints):
    ps = jordan_wigner(build_core_hamiltonian(h2_ints))
    rng = np.random.default_rng(3)
    terms = ps.terms
    for _ in range(3):
        perm = rng.permutation(len(terms))
        shuffled = PauliSum.from_terms(4, [terms[i] for i in perm])
        e, _ = exact_ground_state(to_sparse_matrix(shuffled, 4))
        e_ref, _ = exact_ground_state(to_sparse_matrix(ps, 4))
        assert e == pytest.approx(e_ref, abs=1e-9)


def test_ground_state_requires_hermitian():
    mat = sparse.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    op = SparseOperator(mat, 1, hermitian=False)
    with pytest.raises(DataError):
        exact_ground_state(op)


def test_expectation_identity_and_z():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    ident = to_sparse_matrix(PauliSum.from_terms(2, [(1.0, "II")]), 2)
    assert expectation(ident, psi) == pytest.approx(1.0)
    z0 = to_sparse_matrix(PauliSum.from_terms(1, [(1.0, "Z")]), 1)
    assert expectation(z0, np.array([1.0, 0.0], dtype=complex)) == pytest.approx(1.0)


def test_expectation_hf_energy(h2_ints, h2_ctx):
    psi = hf_state(4, 2)
    assert expectation(h2_ctx.h_mol, psi) == pytest.approx(h2_ints.hf_energy, abs=1e-8)


def test_expectation_imaginary_part_guard():
    mat = sparse.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex))
    op = SparseOperator(mat, 1, hermitian=True, validate=False)  # lie about it
    psi = np.array([1.0, 1j]) / np.sqrt(2)
    with pytest.raises(NumericalIntegrityError):
        expectation(op, psi)


def test_hermitian_flag_validated():
    mat = sparse.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex))
    with pytest.raises(DataError):
        SparseOperator(mat, 1, hermitian=True)


def _ladder_dense(p, dagger, n):
    """Independent dense ladder image: JW built from explicit kron strings."""
    lowering = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
    op = lowering.conj().T if dagger else lowering
    mats = [kron_string("Z") for _ in range(p)] + [op]
    mats += [np.eye(2, dtype=complex)] * (n - p - 1)
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


@pytest.mark.parametrize("n", [1, 2, 3])
def test_jw_anticommutators_exact(n):
    for p in range(n):
        for q in range(n):
            a_p = _ladder_dense(p, False, n)
            ad_q = _ladder_dense(q, True, n)
            a_q = _ladder_dense(q, False, n)
            anti = a_p @ ad_q + ad_q @ a_p
            target = np.eye(2 ** n) if p == q else np.zeros((2 ** n, 2 ** n))
            assert np.abs(anti - target).max() < 1e-12
            assert np.abs(a_p @ a_q + a_q @ a_p).max() < 1e-12


def test_jw_matches_dense_ladder_construction(h2_ints):
    """Full JW Hamiltonian equals the operator built from dense ladder images."""
    fc = build_core_hamiltonian(h2_ints)
    n = 4
    a = [_ladder_dense(p, False, n) for p in range(n)]
    ad = [_ladder_dense(p, True, n) for p in range(n)]
    dense = fc.constant * np.eye(2 ** n, dtype=complex)
    for p in range(n):
        for q in range(n):
            if fc.one_body[p, q]:
                dense += fc.one_body[p, q] * ad[p] @ a[q]
    for p, q, r, s in np.argwhere(fc.two_body != 0.0):
        dense += 0.5 * fc.two_body[p, q, r, s] * ad[p] @ ad[r] @ a[s] @ a[q]
    mapped = to_sparse_matrix(jordan_wigner(fc), n).matrix.toarray()
    assert np.abs(mapped - dense).max() < 1e-12


@pytest.mark.parametrize("name_idx", [0, 1])
def test_molecular_hamiltonian_symmetries(name_idx, h2_ints, h4_ints):
    ints = [h2_ints, h4_ints][name_idx]
    n_q = ints.n_spin_orbitals
    h = to_sparse_matrix(jordan_wigner(build_core_hamiltonian(ints)), n_q).matrix
    for sym_ps in (number_operator(n_q), sz_operator(n_q)):
        s = to_sparse_matrix(sym_ps, n_q).matrix
        comm = h @ s - s @ h
        worst = np.abs(comm.toarray()).max() if comm.nnz else 0.0
        assert worst <= 1e-10


def test_hf_state_occupation():
    psi = hf_state(4, 2)
    n_op = to_sparse_matrix(number_operator(4), 4)
    sz = to_sparse_matrix(sz_operator(4), 4)
    assert expectation(n_op, psi) == pytest.approx(2.0)
    assert expectation(sz, psi) == pytest.approx(0.0)
    assert psi[0b1100] == 1.0  # qubits 0,1 occupied, MSB convention


def test_operator_basis_combines_and_norms():
    rng = np.random.default_rng(9)
    terms_a = random_pauli_sum_terms(3, 10, rng)
    terms_b = random_pauli_sum_terms(3, 10, rng)
    ps_a = PauliSum.from_terms(3, terms_a)
    ps_b = PauliSum.from_terms(3, terms_b)
    basis = OperatorBasis([ps_a, ps_b], 3)
    w = np.array([0.7, -1.3])
    combo = basis.combine_matrix(w).toarray()
    direct = 0.7 * dense_from_terms(terms_a, 3) - 1.3 * dense_from_terms(terms_b, 3)
    assert np.abs(combo - direct).max() < 1e-13
    assert basis.frobenius_norm(w) == pytest.approx(
        np.linalg.norm(direct, "fro"), rel=1e-12
    )
