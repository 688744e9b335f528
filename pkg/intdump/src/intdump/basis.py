"""STO-3G basis data and contracted-Gaussian construction for H and Li."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ANGSTROM_TO_BOHR = 1.8897259886

# STO-3G exponents and contraction coefficients (coefficients refer to
# normalized primitives). Li uses a shared-exponent 2sp shell.
STO3G = {
    "H": [
        ("s", [3.425250914, 0.6239137298, 0.1688554040],
         [0.1543289673, 0.5353281423, 0.4446345422]),
    ],
    "Li": [
        ("s", [16.11957475, 2.936200663, 0.7946504870],
         [0.1543289673, 0.5353281423, 0.4446345422]),
        ("sp", [0.6362897469, 0.1478600533, 0.0480886784],
         [-0.09996722919, 0.3995128261, 0.7001154689],
         [0.1559162750, 0.6076837186, 0.3919573931]),
    ],
}

ATOMIC_NUMBER = {"H": 1, "Li": 3}

SUPPORTED_ELEMENTS = set(STO3G)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GeometrySpec:
    """Molecular geometry in angstrom with basis/charge metadata."""

    atoms: tuple[tuple[str, tuple[float, float, float]], ...]
    basis: str = "sto-3g"
    charge: int = 0
    multiplicity: int = 1

    def __post_init__(self):
        if self.basis.lower() not in ("sto-3g", "sto3g"):
            raise GeometryError(f"unsupported basis {self.basis!r} (STO-3G only)")
        if self.multiplicity != 1:
            raise GeometryError("only singlet references are supported")
        for element, _ in self.atoms:
            if element not in SUPPORTED_ELEMENTS:
                raise GeometryError(f"unsupported element {element!r} (H, Li only)")
        if self.n_electrons % 2 != 0:
            raise GeometryError(
                f"odd electron count ({self.n_electrons}); closed-shell RHF needs even"
            )
        if self.n_electrons <= 0:
            raise GeometryError("no electrons")

    @property
    def n_electrons(self) -> int:
        return sum(ATOMIC_NUMBER[el] for el, _ in self.atoms) - self.charge

    @property
    def charges(self) -> np.ndarray:
        return np.array([float(ATOMIC_NUMBER[el]) for el, _ in self.atoms])

    @property
    def coords_bohr(self) -> np.ndarray:
        return np.array([xyz for _, xyz in self.atoms]) * ANGSTROM_TO_BOHR

    @property
    def labels(self) -> list[str]:
        return [el for el, _ in self.atoms]


@dataclass(frozen=True)
class ContractedGaussian:
    """Fixed-center contracted Cartesian Gaussian, coefficients renormalized."""

    center: tuple[float, float, float]  # bohr
    lmn: tuple[int, int, int]
    exponents: tuple[float, ...]
    coefficients: tuple[float, ...]


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def primitive_norm(alpha: float, lmn: tuple[int, int, int]) -> float:
    l, m, n = lmn
    num = (2.0 * alpha / np.pi) ** 0.75 * (4.0 * alpha) ** ((l + m + n) / 2.0)
    den = np.sqrt(
        _double_factorial(2 * l - 1)
        * _double_factorial(2 * m - 1)
        * _double_factorial(2 * n - 1)
    )
    return num / den


def build_basis(geom: GeometrySpec) -> list[ContractedGaussian]:
    """Expand the geometry into contracted functions (s before p per shell)."""
    from .integrals import contracted_overlap  # local import avoids a cycle

    functions: list[ContractedGaussian] = []
    coords = geom.coords_bohr
    for (element, _), center in zip(geom.atoms, coords):
        for shell in STO3G[element]:
            kind, exps = shell[0], shell[1]
            if kind == "s":
                parts = [((0, 0, 0), shell[2])]
            else:  # sp shell: one s and three p functions share exponents
                parts = [((0, 0, 0), shell[2])]
                for axis in range(3):
                    lmn = tuple(1 if i == axis else 0 for i in range(3))
                    parts.append((lmn, shell[3]))
            for lmn, coeffs in parts:
                prim = [
                    c * primitive_norm(a, lmn) for a, c in zip(exps, coeffs)
                ]
                cg = ContractedGaussian(
                    center=tuple(center), lmn=lmn,
                    exponents=tuple(exps), coefficients=tuple(prim),
                )
                # Renormalize the contracted function to unit self-overlap.
                norm = contracted_overlap(cg, cg)
                cg = ContractedGaussian(
                    center=cg.center, lmn=cg.lmn, exponents=cg.exponents,
                    coefficients=tuple(c / np.sqrt(norm) for c in prim),
                )
                functions.append(cg)
    return functions


def nuclear_repulsion(geom: GeometrySpec) -> float:
    coords = geom.coords_bohr
    charges = geom.charges
    e = 0.0
    for i in range(len(charges)):
        for j in range(i + 1, len(charges)):
            e += charges[i] * charges[j] / np.linalg.norm(coords[i] - coords[j])
    return e
