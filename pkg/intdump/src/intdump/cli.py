"""Command-line entry point: intdump --geom file.xyz --out fixture.mhx."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .basis import GeometryError, GeometrySpec
from .mhx import dump, reconstruction_error
from .presets import PRESETS
from .scf import ScfError


def read_xyz(path: str | Path) -> GeometrySpec:
    """Standard XYZ file: atom count, comment, then 'El x y z' lines (angstrom)."""
    lines = Path(path).read_text().strip().splitlines()
    try:
        count = int(lines[0].split()[0])
    except (IndexError, ValueError) as exc:
        raise GeometryError(f"{path}: first line must be the atom count") from exc
    atoms = []
    for line in lines[2 : 2 + count]:
        parts = line.split()
        if len(parts) < 4:
            raise GeometryError(f"{path}: malformed atom line {line!r}")
        atoms.append((parts[0], (float(parts[1]), float(parts[2]), float(parts[3]))))
    if len(atoms) != count:
        raise GeometryError(f"{path}: expected {count} atoms, found {len(atoms)}")
    return GeometrySpec(atoms=tuple(atoms))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intdump",
        description="Run an STO-3G mean-field calculation and export MHX integrals.",
    )
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--geom", help="XYZ geometry file (angstrom)")
    src.add_argument("--preset", choices=sorted(PRESETS), help="named geometry")
    parser.add_argument("--basis", default="sto-3g")
    parser.add_argument("--out", required=True, help="output MHX path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.preset:
            geom = PRESETS[args.preset]
        else:
            geom = read_xyz(args.geom)
        if args.basis.lower() not in ("sto-3g", "sto3g"):
            raise GeometryError(f"unsupported basis {args.basis!r}")
        scf = dump(geom, args.out)
    except (GeometryError, ScfError, OSError) as exc:
        print(f"intdump: error: {exc}", file=sys.stderr)
        return 1
    rec = reconstruction_error(scf)
    print(
        f"wrote {args.out}: n_spatial={scf.orbital_energies.size} "
        f"E_HF={scf.e_total:.10f} Ha (SCF {scf.n_iterations} iters, "
        f"core-rebuild err {rec:.2e})"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
