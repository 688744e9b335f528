"""MO-basis tensor export in the MHX interchange format."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .basis import GeometrySpec
from .scf import ScfResult, run_rhf


def mo_tensors(scf: ScfResult) -> dict:
    """Rotate the exported tensors into the converged MO basis.

    The MHX kinetic tensor is <p|nabla^2|q>, i.e. -2x the conventional
    kinetic-energy matrix; attraction slabs keep the positive 1/r_i kernel.
    """
    C = scf.mo_coefficients
    kinetic = C.T @ (-2.0 * scf.kinetic_std) @ C
    attraction = np.einsum("pi,xpq,qj->xij", C, scf.attraction, C)
    eri = np.einsum(
        "pi,qj,rk,sl,pqrs->ijkl", C, C, C, C, scf.eri, optimize=True
    )
    return {"kinetic": kinetic, "attraction": attraction, "eri": eri}


def _canonical(p, q, r, s):
    if p < q:
        p, q = q, p
    if r < s:
        r, s = s, r
    if (p, q) < (r, s):
        p, q, r, s = r, s, p, q
    return p, q, r, s


def write_mhx(scf: ScfResult, path: str | Path) -> None:
    geom = scf.geom
    tensors = mo_tensors(scf)
    n = tensors["kinetic"].shape[0]
    eri = tensors["eri"]

    entries = []
    emitted = set()
    for p in range(n):
        for q in range(p + 1):
            for r in range(n):
                for s in range(r + 1):
                    key = _canonical(p, q, r, s)
                    if key in emitted:
                        continue
                    emitted.add(key)
                    entries.append([*key, float(eri[key])])

    coords = geom.coords_bohr
    doc = {
        "version": "1",
        "n_spatial": n,
        "n_electrons": geom.n_electrons,
        "e_nuc": scf.e_nuc,
        "hf_energy": scf.e_total,
        "mo_basis": True,
        "nuclei": [
            {"label": el, "charge": float(z), "xyz": [float(c) for c in xyz]}
            for (el, _), z, xyz in zip(geom.atoms, geom.charges, coords)
        ],
        "orbital_energies": scf.orbital_energies.tolist(),
        "kinetic": tensors["kinetic"].tolist(),
        "attraction": tensors["attraction"].tolist(),
        "eri": entries,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def dump(geom: GeometrySpec, out: str | Path) -> ScfResult:
    """Run the mean-field calculation and emit the MHX fixture."""
    scf = run_rhf(geom)
    write_mhx(scf, out)
    return scf


def reconstruction_error(scf: ScfResult) -> float:
    """Max |h_core(MO) - (-K/2 - sum_i Z_i A^i)(MO)| over the exported tensors."""
    tensors = mo_tensors(scf)
    C = scf.mo_coefficients
    core_mo = C.T @ scf.core @ C
    rebuilt = -0.5 * tensors["kinetic"] - np.einsum(
        "i,ipq->pq", scf.geom.charges, tensors["attraction"]
    )
    return float(np.abs(core_mo - rebuilt).max())
