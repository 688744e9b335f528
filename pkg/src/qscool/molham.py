"""Molecular integral ingestion and static-Hamiltonian assembly.

The on-disk interchange format (MHX) is a JSON document carrying the
spatial-orbital tensors needed to build both the molecular Hamiltonian and
the controllable perturbation: the kinetic matrix K_pq = <p|nabla^2|q>
(stored WITHOUT the -1/2 prefactor), one nuclear-attraction matrix
A^i_pq = <p|1/r_i|q> per nucleus, and the two-electron integrals in
chemists' (pq|rs) convention, reduced to unique-by-symmetry entries.
All quantities are in Hartree atomic units and must already be expressed
in an orthonormal molecular-orbital basis (``mo_basis`` flag), so the
mean-field reference is the determinant occupying the lowest spin-orbitals.

Spin-orbital convention used throughout the package: interleaved, i.e.
spin-orbital 2p is the alpha component of spatial orbital p and 2p+1 the
beta component.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionError, FormatError

SYMMETRY_TOL = 1e-8
HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class Nucleus:
    label: str
    charge: float
    xyz: tuple[float, float, float]  # bohr


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class IntegralSet:
    """Validated spatial-orbital integral data for one molecule.

    Immutable after construction; safe to share across threads.
    """

    n_spatial: int
    n_electrons: int
    nuclei: tuple[Nucleus, ...]
    e_nuc: float
    hf_energy: float
    orbital_energies: np.ndarray  # (n_spatial,)
    kinetic: np.ndarray  # (n_spatial, n_spatial), <p|nabla^2|q>
    attraction: np.ndarray  # (n_nuclei, n_spatial, n_spatial), <p|1/r_i|q>
    eri: np.ndarray = field(repr=False)  # (n,n,n,n), chemists' (pq|rs)

    def __post_init__(self):
        n = self.n_spatial
        object.__setattr__(self, "orbital_energies", _readonly(self.orbital_energies))
        object.__setattr__(self, "kinetic", _readonly(self.kinetic))
        object.__setattr__(self, "attraction", _readonly(self.attraction))
        object.__setattr__(self, "eri", _readonly(self.eri))

        if self.kinetic.shape != (n, n):
            raise DimensionError(
                f"kinetic has shape {self.kinetic.shape}, expected {(n, n)}"
            )
        if self.attraction.shape != (len(self.nuclei), n, n):
            raise DimensionError(
                f"attraction has shape {self.attraction.shape}, expected "
                f"{(len(self.nuclei), n, n)}"
            )
        if self.eri.shape != (n, n, n, n):
            raise DimensionError(
                f"eri has shape {self.eri.shape}, expected {(n, n, n, n)}"
            )
        if self.orbital_energies.shape != (n,):
            raise DimensionError(
                f"orbital_energies has length {self.orbital_energies.shape[0]}, "
                f"expected {n}"
            )
        if self.n_electrons > 2 * n:
            raise DataError(
                f"n_electrons={self.n_electrons} exceeds 2*n_spatial={2 * n}"
            )
        if self.n_electrons <= 0:
            raise DataError("n_electrons must be positive")
        for nuc in self.nuclei:
            if not nuc.charge > 0:
                raise DataError(f"nuclear charge must be positive, got {nuc.charge}")

        _check_symmetric(self.kinetic, "kinetic")
        for i in range(len(self.nuclei)):
            _check_symmetric(self.attraction[i], f"attraction[{i}]")
            diag = np.diagonal(self.attraction[i])
            if np.any(diag <= 0):
                p = int(np.argmin(diag))
                raise DataError(
                    f"attraction[{i}] diagonal entry ({p},{p}) = {diag[p]} is not "
                    "positive (1/r kernel must be)"
                )
        _check_eri_symmetry(self.eri)

    @property
    def n_nuclei(self) -> int:
        return len(self.nuclei)

    @property
    def n_spin_orbitals(self) -> int:
        return 2 * self.n_spatial

    @property
    def nuclear_charges(self) -> np.ndarray:
        return np.array([nuc.charge for nuc in self.nuclei])


def _check_symmetric(m: np.ndarray, name: str, tol: float = SYMMETRY_TOL) -> None:
    dev = np.abs(m - m.T)
    worst = float(dev.max()) if dev.size else 0.0
    if worst > tol:
        p, q = np.unravel_index(int(np.argmax(dev)), dev.shape)
        raise DataError(
            f"{name} is not symmetric: |{name}[{p},{q}] - {name}[{q},{p}]| = "
            f"{worst:.3e} at ({p},{q})"
        )


_ERI_PERMUTATIONS = (
    (0, 1, 2, 3),
    (1, 0, 2, 3),
    (0, 1, 3, 2),
    (1, 0, 3, 2),
    (2, 3, 0, 1),
    (3, 2, 0, 1),
    (2, 3, 1, 0),
    (3, 2, 1, 0),
)


def _check_eri_symmetry(g: np.ndarray, tol: float = SYMMETRY_TOL) -> None:
    for perm in _ERI_PERMUTATIONS[1:]:
        dev = np.abs(g - g.transpose(perm))
        worst = float(dev.max()) if dev.size else 0.0
        if worst > tol:
            idx = np.unravel_index(int(np.argmax(dev)), dev.shape)
            raise DataError(
                f"eri violates permutation symmetry {perm} by {worst:.3e} at "
                f"index {tuple(int(i) for i in idx)}"
            )


def canonical_eri_index(p: int, q: int, r: int, s: int) -> tuple[int, int, int, int]:
    """Canonical representative of the 8-fold symmetry orbit of (pq|rs)."""
    if p < q:
        p, q = q, p
    if r < s:
        r, s = s, r
    if (p, q) < (r, s):
        p, q, r, s = r, s, p, q
    return p, q, r, s


@dataclass(frozen=True)
class FermionCoeffs:
    """Spin-orbital coefficient tensors of a second-quantized operator.

    ``one_body[P, Q]`` multiplies a+_P a_Q; ``two_body[P, Q, R, S]``
    multiplies a+_P a+_R a_S a_Q with the conventional 1/2 prefactor applied
    by the consumer (the tensor stores g, not g/2). ``constant`` is an
    identity offset in hartree.
    """

    n_spin_orbitals: int
    one_body: np.ndarray
    two_body: np.ndarray = field(repr=False)
    constant: float = 0.0

    def __post_init__(self):
        n = self.n_spin_orbitals
        object.__setattr__(self, "one_body", _readonly(self.one_body))
        object.__setattr__(self, "two_body", _readonly(self.two_body))
        if self.one_body.shape != (n, n):
            raise DimensionError(
                f"one_body has shape {self.one_body.shape}, expected {(n, n)}"
            )
        if self.two_body.shape != (n, n, n, n):
            raise DimensionError(
                f"two_body has shape {self.two_body.shape}, expected {(n,) * 4}"
            )
        herm = np.abs(self.one_body - self.one_body.conj().T).max()
        if herm > HERMITICITY_TOL:
            raise DataError(f"one_body is not hermitian (max deviation {herm:.3e})")
        _check_spin_conservation(self.one_body, self.two_body)

    def scaled(self, factor: float) -> "FermionCoeffs":
        return FermionCoeffs(
            self.n_spin_orbitals,
            factor * self.one_body,
            factor * self.two_body,
            factor * self.constant,
        )


def _spin_masks(n_so: int) -> tuple[np.ndarray, np.ndarray]:
    spins = np.arange(n_so) % 2
    same = spins[:, None] == spins[None, :]
    return spins, same


def _check_spin_conservation(h: np.ndarray, g: np.ndarray) -> None:
    n_so = h.shape[0]
    _, same = _spin_masks(n_so)
    if np.any(h[~same] != 0.0):
        raise DataError("one_body couples alpha and beta spin-orbitals")
    # two_body: a+_P a_Q and a+_R a_S must each conserve spin.
    bad = ~(same[:, :, None, None] & same[None, None, :, :])
    if np.any(g[bad] != 0.0):
        raise DataError("two_body couples alpha and beta spin-orbitals")


def spin_expand_one_body(h_spatial: np.ndarray) -> np.ndarray:
    """Expand a spatial one-body matrix to interleaved spin-orbitals."""
    n = h_spatial.shape[0]
    h = np.zeros((2 * n, 2 * n))
    h[0::2, 0::2] = h_spatial
    h[1::2, 1::2] = h_spatial
    return h


def spin_expand_two_body(g_spatial: np.ndarray) -> np.ndarray:
    """Expand chemists' (pq|rs) to spin-orbitals for the a+_P a+_R a_S a_Q ordering.

    The (P,Q) pair and the (R,S) pair each carry one spin delta because the
    underlying integrals are spatial.
    """
    n = g_spatial.shape[0]
    n_so = 2 * n
    g = np.zeros((n_so, n_so, n_so, n_so))
    for sig in (0, 1):
        for tau in (0, 1):
            g[sig::2, sig::2, tau::2, tau::2] = g_spatial
    return g


def build_core_hamiltonian(ints: IntegralSet) -> FermionCoeffs:
    """Assemble the static molecular Hamiltonian coefficients.

    h_pq = -(1/2) K_pq - sum_i Z_i A^i_pq on spatial orbitals, spin-expanded;
    the two-body tensor is the spin expansion of the stored (pq|rs); the
    constant term is the nuclear repulsion.
    """
    charges = ints.nuclear_charges
    h_spatial = -0.5 * ints.kinetic - np.einsum("i,ipq->pq", charges, ints.attraction)
    return FermionCoeffs(
        n_spin_orbitals=ints.n_spin_orbitals,
        one_body=spin_expand_one_body(h_spatial),
        two_body=spin_expand_two_body(ints.eri),
        constant=ints.e_nuc,
    )


# ---------------------------------------------------------------------------
# MHX parsing / serialization
# ---------------------------------------------------------------------------

_REQUIRED_KEYS = (
    "version",
    "n_spatial",
    "n_electrons",
    "e_nuc",
    "hf_energy",
    "mo_basis",
    "nuclei",
    "orbital_energies",
    "kinetic",
    "attraction",
    "eri",
)


def parse_integral_file(path: str | Path) -> IntegralSet:
    """Load and validate an MHX file. Violations raise, never auto-repair."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc

    for key in _REQUIRED_KEYS:
        if key not in doc:
            raise FormatError(f"{path} is missing required field '{key}'")
    if doc["version"] != "1":
        raise FormatError(f"unsupported MHX version {doc['version']!r}")
    if doc["mo_basis"] is not True:
        raise DataError("MHX file must assert mo_basis=true (orthonormal MO tensors)")

    n = int(doc["n_spatial"])
    nuclei = []
    for entry in doc["nuclei"]:
        for key in ("label", "charge", "xyz"):
            if key not in entry:
                raise FormatError(f"nucleus entry missing field '{key}'")
        nuclei.append(
            Nucleus(str(entry["label"]), float(entry["charge"]), tuple(entry["xyz"]))
        )

    kinetic = np.array(doc["kinetic"], dtype=float)
    attraction = np.array(doc["attraction"], dtype=float)
    if attraction.ndim != 3:
        raise DimensionError("attraction must be indexed (nucleus, p, q)")
    if attraction.shape[0] != len(nuclei):
        raise DimensionError(
            f"attraction has {attraction.shape[0]} slabs for {len(nuclei)} nuclei"
        )

    eri = _expand_eri_entries(doc["eri"], n)

    return IntegralSet(
        n_spatial=n,
        n_electrons=int(doc["n_electrons"]),
        nuclei=tuple(nuclei),
        e_nuc=float(doc["e_nuc"]),
        hf_energy=float(doc["hf_energy"]),
        orbital_energies=np.array(doc["orbital_energies"], dtype=float),
        kinetic=kinetic,
        attraction=attraction,
        eri=eri,
    )


def _expand_eri_entries(entries, n: int) -> np.ndarray:
    g = np.zeros((n, n, n, n))
    seen: dict[tuple[int, int, int, int], float] = {}
    for entry in entries:
        if len(entry) != 5:
            raise FormatError(f"eri entry {entry!r} must be [p, q, r, s, value]")
        p, q, r, s = (int(i) for i in entry[:4])
        value = float(entry[4])
        if not all(0 <= i < n for i in (p, q, r, s)):
            raise DimensionError(f"eri index {(p, q, r, s)} out of range for n={n}")
        key = canonical_eri_index(p, q, r, s)
        if key in seen and abs(seen[key] - value) > 1e-10:
            raise DataError(
                f"conflicting eri entries for symmetry orbit of {key}: "
                f"{seen[key]} vs {value}"
            )
        seen[key] = value
        for perm in _ERI_PERMUTATIONS:
            idx = tuple((p, q, r, s)[k] for k in perm)
            g[idx] = value
    return g


def write_integral_file(ints: IntegralSet, path: str | Path) -> None:
    """Serialize an IntegralSet to MHX. Floats round-trip exactly via repr."""
    n = ints.n_spatial
    entries = []
    emitted = set()
    for p in range(n):
        for q in range(p + 1):
            for r in range(n):
                for s in range(r + 1):
                    key = canonical_eri_index(p, q, r, s)
                    if key in emitted:
                        continue
                    emitted.add(key)
                    entries.append([*key, float(ints.eri[key])])
    doc = {
        "version": "1",
        "n_spatial": n,
        "n_electrons": ints.n_electrons,
        "e_nuc": ints.e_nuc,
        "hf_energy": ints.hf_energy,
        "mo_basis": True,
        "nuclei": [
            {"label": nu.label, "charge": nu.charge, "xyz": list(nu.xyz)}
            for nu in ints.nuclei
        ],
        "orbital_energies": ints.orbital_energies.tolist(),
        "kinetic": ints.kinetic.tolist(),
        "attraction": ints.attraction.tolist(),
        "eri": entries,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
