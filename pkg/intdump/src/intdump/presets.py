"""Geometries for every system studied in this project (angstrom)."""

from __future__ import annotations

from .basis import GeometrySpec


def h_chain(n_atoms: int, spacing: float) -> GeometrySpec:
    atoms = tuple(("H", (0.0, 0.0, i * spacing)) for i in range(n_atoms))
    return GeometrySpec(atoms=atoms)


def h4_square(side: float) -> GeometrySpec:
    atoms = (
        ("H", (0.0, 0.0, 0.0)),
        ("H", (side, 0.0, 0.0)),
        ("H", (0.0, side, 0.0)),
        ("H", (side, side, 0.0)),
    )
    return GeometrySpec(atoms=atoms)


def lih(r: float) -> GeometrySpec:
    return GeometrySpec(atoms=(("Li", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, r))))


PRESETS = {
    "h2_r0.7414": h_chain(2, 0.7414),
    "h4_square_r1.2": h4_square(1.2),
    "h4_square_r2.4": h4_square(2.4),
    "h6_linear_r1.0": h_chain(6, 1.0),
    "h6_linear_r2.0": h_chain(6, 2.0),
    "lih_r1.6": lih(1.6),
    "lih_r3.2": lih(3.2),
    "h2_chain_r1.0": h_chain(2, 1.0),
    "h4_chain_r1.0": h_chain(4, 1.0),
    "h8_chain_r1.0": h_chain(8, 1.0),
}
