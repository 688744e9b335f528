"""Closed-shell restricted Hartree-Fock with DIIS acceleration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import GeometrySpec, build_basis, nuclear_repulsion
from .integrals import (
    attraction_matrices,
    eri_tensor,
    kinetic_matrix,
    overlap_matrix,
)


class ScfError(RuntimeError):
    pass


@dataclass
class ScfResult:
    geom: GeometrySpec
    e_total: float
    e_nuc: float
    orbital_energies: np.ndarray
    mo_coefficients: np.ndarray  # (ao, mo)
    overlap: np.ndarray
    kinetic_std: np.ndarray      # <-1/2 nabla^2> in AO basis
    attraction: np.ndarray       # (M, ao, ao), positive 1/r_i kernel
    eri: np.ndarray              # chemists' (pq|rs) in AO basis
    core: np.ndarray             # T - sum_i Z_i A_i in AO basis
    n_iterations: int


def run_rhf(
    geom: GeometrySpec,
    max_iter: int = 200,
    conv: float = 1e-11,
    diis_depth: int = 8,
) -> ScfResult:
    basis = build_basis(geom)
    S = overlap_matrix(basis)
    T = kinetic_matrix(basis)
    A = attraction_matrices(basis, geom.coords_bohr)
    charges = geom.charges
    V = -np.einsum("i,ipq->pq", charges, A)
    h = T + V
    g = eri_tensor(basis)
    e_nn = nuclear_repulsion(geom)
    n_occ = geom.n_electrons // 2

    # Symmetric orthogonalization
    s_val, s_vec = np.linalg.eigh(S)
    if s_val.min() < 1e-8:
        raise ScfError(f"near-singular overlap (min eigenvalue {s_val.min():.3e})")
    X = s_vec @ np.diag(s_val ** -0.5) @ s_vec.T

    def fock(P):
        J = np.einsum("pqrs,rs->pq", g, P)
        K = np.einsum("prqs,rs->pq", g, P)
        return h + J - 0.5 * K

    def density(F):
        Fp = X.T @ F @ X
        eps, Cp = np.linalg.eigh(Fp)
        C = X @ Cp
        P = 2.0 * C[:, :n_occ] @ C[:, :n_occ].T
        return P, C, eps

    P, C, eps = density(h)
    e_old = 0.0
    fock_hist: list[np.ndarray] = []
    err_hist: list[np.ndarray] = []

    for it in range(1, max_iter + 1):
        F = fock(P)
        err = X.T @ (F @ P @ S - S @ P @ F) @ X
        fock_hist.append(F)
        err_hist.append(err)
        if len(fock_hist) > diis_depth:
            fock_hist.pop(0)
            err_hist.pop(0)

        if len(fock_hist) > 1:
            F = _diis_extrapolate(fock_hist, err_hist)

        P, C, eps = density(F)
        e_elec = 0.5 * np.einsum("pq,pq->", P, h + fock(P))
        de = abs(e_elec - e_old)
        grad = np.abs(err).max()
        e_old = e_elec
        if de < conv and grad < 1e-8:
            return ScfResult(
                geom=geom,
                e_total=e_elec + e_nn,
                e_nuc=e_nn,
                orbital_energies=eps,
                mo_coefficients=C,
                overlap=S,
                kinetic_std=T,
                attraction=A,
                eri=g,
                core=h,
                n_iterations=it,
            )
    raise ScfError(f"SCF did not converge in {max_iter} iterations (dE={de:.3e})")


def _diis_extrapolate(focks, errors) -> np.ndarray:
    m = len(focks)
    B = -np.ones((m + 1, m + 1))
    B[m, m] = 0.0
    for i in range(m):
        for j in range(m):
            B[i, j] = np.einsum("pq,pq->", errors[i], errors[j])
    rhs = np.zeros(m + 1)
    rhs[m] = -1.0
    try:
        coef = np.linalg.solve(B, rhs)
    except np.linalg.LinAlgError:
        return focks[-1]
    F = np.zeros_like(focks[0])
    for c, Fi in zip(coef[:m], focks):
        F += c * Fi
    return F
