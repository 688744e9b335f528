"""Qubit-space operators: Jordan-Wigner mapping, Pauli sums, sparse realization.

Conventions (fixed for the whole package):
  * qubit q hosts spin-orbital q (interleaved spin ordering from molham);
  * basis index bit layout puts qubit 0 in the most significant position,
    matching the plain Kronecker product P_0 (x) P_1 (x) ... (x) P_{N-1};
  * Pauli strings are stored in symplectic form, a pair of bit masks (x, z)
    over index-bit positions, with the standard-string coefficient, i.e.
    string = i^{|x&z|} X^x Z^z so that (1,1) positions carry a Y.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import ConvergenceError, DataError, DimensionError, NumericalIntegrityError
from .molham import FermionCoeffs

MAX_SPARSE_QUBITS = 14
COEFF_DROP_TOL = 1e-12

_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _LETTERS.items()}


def _bitpos(q: int, n: int) -> int:
    return n - 1 - q


class PauliSum:
    """Weighted sum of Pauli strings with canonical (merged) term storage."""

    __slots__ = ("n_qubits", "_coeffs")

    def __init__(self, n_qubits: int, coeffs: dict[tuple[int, int], complex] | None = None):
        self.n_qubits = n_qubits
        self._coeffs: dict[tuple[int, int], complex] = dict(coeffs or {})

    @classmethod
    def from_terms(cls, n_qubits: int, terms) -> "PauliSum":
        """Build from (coefficient, letter-string) pairs, e.g. (0.5, "XZI")."""
        coeffs: dict[tuple[int, int], complex] = {}
        for coeff, letters in terms:
            if len(letters) != n_qubits:
                raise DimensionError(
                    f"string {letters!r} has length {len(letters)}, expected {n_qubits}"
                )
            x = z = 0
            for q, letter in enumerate(letters):
                xb, zb = _BITS[letter]
                pos = _bitpos(q, n_qubits)
                x |= xb << pos
                z |= zb << pos
            coeffs[(x, z)] = coeffs.get((x, z), 0.0) + complex(coeff)
        return cls(n_qubits, coeffs)

    def letters(self, key: tuple[int, int]) -> str:
        x, z = key
        out = []
        for q in range(self.n_qubits):
            pos = _bitpos(q, self.n_qubits)
            out.append(_LETTERS[((x >> pos) & 1, (z >> pos) & 1)])
        return "".join(out)

    @property
    def terms(self) -> list[tuple[complex, str]]:
        """Canonically ordered (coefficient, letter-string) view."""
        return [(c, self.letters(k)) for k, c in sorted(self._coeffs.items())]

    @property
    def n_terms(self) -> int:
        return len(self._coeffs)

    def coefficient(self, letters: str) -> complex:
        one = PauliSum.from_terms(self.n_qubits, [(1.0, letters)])
        (key,) = one._coeffs
        return self._coeffs.get(key, 0.0)

    def items(self):
        return sorted(self._coeffs.items())

    def pruned(self, tol: float = COEFF_DROP_TOL) -> "PauliSum":
        return PauliSum(
            self.n_qubits, {k: c for k, c in self._coeffs.items() if abs(c) > tol}
        )

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        # Standard Pauli strings are hermitian, so hermiticity == real coefficients.
        return all(abs(c.imag) <= tol for c in self._coeffs.values())

    def scaled(self, factor: complex) -> "PauliSum":
        return PauliSum(self.n_qubits, {k: factor * c for k, c in self._coeffs.items()})

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise DimensionError("cannot add Pauli sums on different registers")
        coeffs = dict(self._coeffs)
        for k, c in other._coeffs.items():
            coeffs[k] = coeffs.get(k, 0.0) + c
        return PauliSum(self.n_qubits, coeffs)

    def frobenius_norm(self) -> float:
        total = sum(abs(c) ** 2 for c in self._coeffs.values())
        return float(np.sqrt((1 << self.n_qubits) * total))


# ---------------------------------------------------------------------------
# Jordan-Wigner transform
# ---------------------------------------------------------------------------
# Ladder operators are assembled in XZ-product form (coefficient, x, z) where
# the operator is coeff * X^x Z^z; products pick up (-1)^{|z1 & x2|} from
# commuting Z past X. Conversion to standard strings multiplies by (-i)^{|x&z|}.


def _ladder_xz(p: int, dagger: bool, n: int) -> list[tuple[complex, int, int]]:
    e = 1 << _bitpos(p, n)
    zstr = ((1 << p) - 1) << (n - p) if p else 0
    sign = 0.5 if dagger else -0.5
    return [(0.5, e, zstr), (sign, e, zstr | e)]


def _mul_xz(
    t1: list[tuple[complex, int, int]], t2: list[tuple[complex, int, int]]
) -> list[tuple[complex, int, int]]:
    out = []
    for c1, x1, z1 in t1:
        for c2, x2, z2 in t2:
            c = c1 * c2
            if (z1 & x2).bit_count() & 1:
                c = -c
            out.append((c, x1 ^ x2, z1 ^ z2))
    return out


def _accumulate_xz(acc: dict, terms, weight: complex) -> None:
    for c, x, z in terms:
        key = (x, z)
        acc[key] = acc.get(key, 0.0) + weight * c


def _two_body_hermiticity(g: np.ndarray) -> float:
    # (a+_P a+_R a_S a_Q)^dag = a+_Q a+_S a_R a_P, so hermiticity requires
    # g[Q,P,S,R] == conj(g[P,Q,R,S]).
    return float(np.abs(g - g.transpose(1, 0, 3, 2).conj()).max())


def jordan_wigner(fc: FermionCoeffs, drop_tol: float = COEFF_DROP_TOL) -> PauliSum:
    """Map fermionic coefficients to a canonical, hermitian Pauli sum."""
    n = fc.n_spin_orbitals
    herm = np.abs(fc.one_body - fc.one_body.conj().T).max()
    if herm > 1e-12:
        raise DataError(f"one-body tensor not hermitian (deviation {herm:.3e})")
    herm2 = _two_body_hermiticity(fc.two_body)
    if herm2 > 1e-12:
        raise DataError(f"two-body tensor not hermitian (deviation {herm2:.3e})")

    a_ops = [_ladder_xz(p, False, n) for p in range(n)]
    ad_ops = [_ladder_xz(p, True, n) for p in range(n)]

    acc: dict[tuple[int, int], complex] = {}
    if fc.constant:
        acc[(0, 0)] = complex(fc.constant)

    for p, q in np.argwhere(fc.one_body != 0.0):
        _accumulate_xz(acc, _mul_xz(ad_ops[p], a_ops[q]), fc.one_body[p, q])

    nz = np.argwhere(fc.two_body != 0.0)
    if nz.size:
        # Cache the pair products; there are O(n^2) of each kind.
        dag_pairs: dict[tuple[int, int], list] = {}
        ann_pairs: dict[tuple[int, int], list] = {}
        for p, q, r, s in nz:
            if (p, r) not in dag_pairs:
                dag_pairs[(p, r)] = _mul_xz(ad_ops[p], ad_ops[r])
            if (s, q) not in ann_pairs:
                ann_pairs[(s, q)] = _mul_xz(a_ops[s], a_ops[q])
            _accumulate_xz(
                acc,
                _mul_xz(dag_pairs[(p, r)], ann_pairs[(s, q)]),
                0.5 * fc.two_body[p, q, r, s],
            )

    # XZ form -> standard strings: X^x Z^z = (-i)^{|x&z|} * string(x, z).
    coeffs: dict[tuple[int, int], complex] = {}
    for (x, z), c in acc.items():
        gamma = c * (-1j) ** ((x & z).bit_count() % 4)
        if abs(gamma) > drop_tol:
            coeffs[(x, z)] = gamma
    return PauliSum(n, coeffs)


def number_operator(n_spin_orbitals: int) -> PauliSum:
    """Total particle number, sum_p (I - Z_p)/2."""
    n = n_spin_orbitals
    coeffs: dict[tuple[int, int], complex] = {(0, 0): 0.5 * n}
    for p in range(n):
        coeffs[(0, 1 << _bitpos(p, n))] = -0.5
    return PauliSum(n, coeffs)


def sz_operator(n_spin_orbitals: int) -> PauliSum:
    """Spin projection S_z = (N_alpha - N_beta)/2 under interleaved ordering."""
    n = n_spin_orbitals
    coeffs: dict[tuple[int, int], complex] = {(0, 0): 0.0}
    for p in range(n):
        w = 0.5 if p % 2 == 0 else -0.5
        coeffs[(0, 0)] += 0.5 * w
        coeffs[(0, 1 << _bitpos(p, n))] = -0.5 * w
    return PauliSum(n, {k: c for k, c in coeffs.items() if c != 0.0})


# ---------------------------------------------------------------------------
# Sparse realization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SparseOperator:
    """CSR realization of a qubit operator with a verified hermitian flag."""

    matrix: sparse.csr_matrix
    n_qubits: int
    hermitian: bool = False
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        dim = 1 << self.n_qubits
        if self.matrix.shape != (dim, dim):
            raise DimensionError(
                f"matrix shape {self.matrix.shape} does not match 2^{self.n_qubits}"
            )
        if self.hermitian and validate:
            dev = abs(self.matrix - self.matrix.conjugate().T)
            worst = dev.max() if dev.nnz else 0.0
            if worst > 1e-12:
                raise DataError(f"hermitian flag set but max |H - H^dag| = {worst:.3e}")

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        return self.matrix.dot(psi)


def _parity(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values).astype(np.int64) & 1


def _string_column(x: int, z: int, basis: np.ndarray) -> np.ndarray:
    """Per-column values of the string: S|b> = i^{|x&z|} (-1)^{|z&b|} |b^x>."""
    phase = 1j ** ((x & z).bit_count() % 4)
    signs = 1.0 - 2.0 * _parity(basis & z)
    return phase * signs


def to_sparse_matrix(ps: PauliSum, n_qubits: int, validate: bool = True) -> SparseOperator:
    """Realize a Pauli sum as a CSR matrix (Kronecker-product semantics)."""
    if ps.n_qubits != n_qubits:
        raise DimensionError(
            f"Pauli sum is on {ps.n_qubits} qubits, requested {n_qubits}"
        )
    if n_qubits > MAX_SPARSE_QUBITS:
        raise DimensionError(
            f"refusing to materialize 2^{n_qubits} sparse matrix "
            f"(cap {MAX_SPARSE_QUBITS} qubits)"
        )
    dim = 1 << n_qubits
    basis = np.arange(dim, dtype=np.int64)

    by_x: dict[int, np.ndarray] = {}
    for (x, z), coeff in ps.items():
        col = coeff * _string_column(x, z, basis)
        if x in by_x:
            by_x[x] += col
        else:
            by_x[x] = col

    if not by_x:
        matrix = sparse.csr_matrix((dim, dim), dtype=complex)
        return SparseOperator(matrix, n_qubits, hermitian=True, validate=False)

    rows, cols, data = [], [], []
    for x in sorted(by_x):
        rows.append(basis ^ x)
        cols.append(basis)
        data.append(by_x[x])
    matrix = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    ).tocsr()
    hermitian = ps.is_hermitian()
    return SparseOperator(matrix, n_qubits, hermitian=hermitian, validate=validate)


class OperatorBasis:
    """Several Pauli sums realized on one shared CSR sparsity pattern.

    Supports fast linear combinations: combining B operators touches only
    each operator's own flip-mask blocks plus one permutation copy, with no
    index manipulation, which is what the per-slot Hamiltonian assembly in
    the propagator needs. Frobenius norms of combinations come from
    Pauli-coefficient orthogonality and are O(#terms).
    """

    def __init__(self, sums: list[PauliSum], n_qubits: int):
        if any(ps.n_qubits != n_qubits for ps in sums):
            raise DimensionError("all Pauli sums must share the register size")
        if n_qubits > MAX_SPARSE_QUBITS:
            raise DimensionError(
                f"refusing to materialize 2^{n_qubits} sparse basis "
                f"(cap {MAX_SPARSE_QUBITS} qubits)"
            )
        self.n_qubits = n_qubits
        self.dim = 1 << n_qubits
        self.n_ops = len(sums)

        strings = sorted({key for ps in sums for key in ps._coeffs})
        index = {key: j for j, key in enumerate(strings)}
        self.gamma = np.zeros((self.n_ops, len(strings)), dtype=complex)
        for b, ps in enumerate(sums):
            for key, c in ps._coeffs.items():
                self.gamma[b, index[key]] = c

        x_masks = sorted({x for x, _ in strings})
        self._x_offset = {x: i * self.dim for i, x in enumerate(x_masks)}
        basis = np.arange(self.dim, dtype=np.int64)
        self.nnz = len(x_masks) * self.dim

        # Per-operator column blocks keyed by flip mask (only the masks the
        # operator actually uses, so one-body operators stay tiny).
        self._blocks: list[dict[int, np.ndarray]] = []
        for b, ps in enumerate(sums):
            blocks: dict[int, np.ndarray] = {}
            for (x, z), coeff in ps.items():
                col = coeff * _string_column(x, z, basis)
                if x in blocks:
                    blocks[x] += col
                else:
                    blocks[x] = col
            self._blocks.append(blocks)

        rows = np.concatenate([basis ^ x for x in x_masks])
        cols = np.tile(basis, len(x_masks))
        self._perm = np.lexsort((cols, rows))
        self.indices = cols[self._perm].astype(np.int32)
        self.indptr = np.searchsorted(rows[self._perm], np.arange(self.dim + 1)).astype(
            np.int32
        )

    def combine_matrix(self, weights: np.ndarray) -> sparse.csr_matrix:
        weights = np.asarray(weights)
        raw = np.zeros(self.nnz, dtype=complex)
        for b, w in enumerate(weights):
            if w == 0.0:
                continue
            for x, col in self._blocks[b].items():
                off = self._x_offset[x]
                raw[off : off + self.dim] += w * col
        data = raw[self._perm]
        return sparse.csr_matrix(
            (data, self.indices, self.indptr), shape=(self.dim, self.dim), copy=False
        )

    def dense_stack(self) -> np.ndarray:
        """(n_ops, dim, dim) dense realization, cached; tiny registers only."""
        cached = getattr(self, "_dense_stack", None)
        if cached is None:
            mats = []
            for b in range(self.n_ops):
                w = np.zeros(self.n_ops)
                w[b] = 1.0
                mats.append(self.combine_matrix(w).toarray())
            cached = np.stack(mats)
            self._dense_stack = cached
        return cached

    def combine(self, weights: np.ndarray, hermitian: bool = True) -> SparseOperator:
        return SparseOperator(
            self.combine_matrix(weights), self.n_qubits, hermitian=hermitian, validate=False
        )

    def single(self, b: int) -> SparseOperator:
        w = np.zeros(self.n_ops)
        w[b] = 1.0
        return self.combine(w)

    def frobenius_norm(self, weights: np.ndarray) -> float:
        gamma_tot = np.asarray(weights, dtype=complex) @ self.gamma
        return float(np.sqrt(self.dim) * np.linalg.norm(gamma_tot))


# ---------------------------------------------------------------------------
# States and expectation values
# ---------------------------------------------------------------------------

NORM_TOL = 1e-10


def hf_state(n_qubits: int, n_electrons: int) -> np.ndarray:
    """Determinant with the lowest n_electrons spin-orbitals occupied."""
    if n_electrons > n_qubits:
        raise DataError("more electrons than spin-orbitals")
    dim = 1 << n_qubits
    psi = np.zeros(dim, dtype=complex)
    idx = ((1 << n_electrons) - 1) << (n_qubits - n_electrons) if n_electrons else 0
    psi[idx] = 1.0
    return psi


def check_normalized(psi: np.ndarray, tol: float = NORM_TOL) -> None:
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > tol:
        raise NumericalIntegrityError(f"state norm deviates from 1 by {drift:.3e}")


def expectation(op: SparseOperator, psi: np.ndarray) -> float:
    """<psi|H|psi> for hermitian H, with an imaginary-residue integrity check."""
    if psi.shape[0] != op.dim:
        raise DimensionError(
            f"state dimension {psi.shape[0]} does not match operator {op.dim}"
        )
    if not op.hermitian:
        raise DataError("expectation requires a hermitian operator")
    value = complex(np.vdot(psi, op.matvec(psi)))
    if abs(value.imag) > 1e-8:
        raise NumericalIntegrityError(
            f"expectation has imaginary part {value.imag:.3e}"
        )
    return value.real


def exact_ground_state(
    op: SparseOperator, maxiter: int | None = None
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair by sparse iteration (dense fallback for tiny registers)."""
    if not op.hermitian:
        raise DataError("ground-state solve requires a hermitian operator")
    dim = op.dim
    if dim <= 64:
        w, v = np.linalg.eigh(op.matrix.toarray())
        energy, state = float(w[0]), v[:, 0].astype(complex)
    else:
        v0 = np.ones(dim) / np.sqrt(dim)
        try:
            w, v = eigsh(
                op.matrix, k=1, which="SA", v0=v0, maxiter=maxiter, tol=0
            )
        except ArpackNoConvergence as exc:
            residual = float("nan")
            if exc.eigenvalues.size:
                ev = exc.eigenvalues[0]
                vec = exc.eigenvectors[:, 0]
                residual = float(np.linalg.norm(op.matvec(vec) - ev * vec))
            raise ConvergenceError(
                f"eigensolver did not converge (residual {residual:.3e})",
                residual=residual,
            ) from exc
        energy, state = float(w[0]), v[:, 0].astype(complex)

    residual = float(np.linalg.norm(op.matvec(state) - energy * state))
    if residual > 1e-9:
        raise ConvergenceError(
            f"ground-state residual {residual:.3e} exceeds 1e-9", residual=residual
        )
    state = state / np.linalg.norm(state)
    return energy, state
