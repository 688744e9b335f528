import itertools
from pathlib import Path

import numpy as np
import pytest

from qscool.molham import parse_integral_file
from qscool.objective import make_context

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "fixtures"

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_string(letters: str) -> np.ndarray:
    """Brute-force Kronecker realization of a Pauli letter string."""
    out = PAULI_MATRICES[letters[0]]
    for letter in letters[1:]:
        out = np.kron(out, PAULI_MATRICES[letter])
    return out


def dense_from_terms(terms, n_qubits: int) -> np.ndarray:
    dim = 2 ** n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for coeff, letters in terms:
        out += coeff * kron_string(letters)
    return out


def random_pauli_sum_terms(n_qubits: int, n_terms: int, rng) -> list:
    letters = "IXYZ"
    terms = []
    for _ in range(n_terms):
        s = "".join(rng.choice(list(letters)) for _ in range(n_qubits))
        terms.append((float(rng.normal()), s))
    return terms


def fixture_path(name: str) -> Path:
    return FIXTURE_DIR / f"{name}.mhx"


@pytest.fixture(scope="session")
def h2_ints():
    return parse_integral_file(fixture_path("h2_r0.7414"))


@pytest.fixture(scope="session")
def h4_ints():
    return parse_integral_file(fixture_path("h4_square_r1.2"))


@pytest.fixture(scope="session")
def lih_ints():
    return parse_integral_file(fixture_path("lih_r1.6"))


@pytest.fixture(scope="session")
def h2_ctx(h2_ints):
    return make_context(h2_ints)


@pytest.fixture(scope="session")
def h4_ctx(h4_ints):
    return make_context(h4_ints)


def masked_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    scale = np.maximum(np.abs(a), np.abs(b))
    mask = scale > floor
    if not mask.any():
        return 0.0
    return float((np.abs(a - b)[mask] / scale[mask]).max())
