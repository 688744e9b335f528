"""McMurchie-Davidson one- and two-electron integrals over Cartesian Gaussians.

Angular momenta here never exceed p functions, so the plain recursive
Hermite expansions are more than fast enough.
"""

from __future__ import annotations

import numpy as np
from scipy.special import hyp1f1

from .basis import ContractedGaussian


def boys(n: int, x: float) -> float:
    return float(hyp1f1(n + 0.5, n + 1.5, -x)) / (2.0 * n + 1.0)


def hermite_coef(i: int, j: int, t: int, q_dist: float, a: float, b: float) -> float:
    """Hermite expansion coefficient E_t^{ij} for one Cartesian direction."""
    p = a + b
    q = a * b / p
    if t < 0 or t > i + j:
        return 0.0
    if i == j == t == 0:
        return float(np.exp(-q * q_dist * q_dist))
    if j == 0:
        return (
            hermite_coef(i - 1, j, t - 1, q_dist, a, b) / (2 * p)
            - (q * q_dist / a) * hermite_coef(i - 1, j, t, q_dist, a, b)
            + (t + 1) * hermite_coef(i - 1, j, t + 1, q_dist, a, b)
        )
    return (
        hermite_coef(i, j - 1, t - 1, q_dist, a, b) / (2 * p)
        + (q * q_dist / b) * hermite_coef(i, j - 1, t, q_dist, a, b)
        + (t + 1) * hermite_coef(i, j - 1, t + 1, q_dist, a, b)
    )


def hermite_coulomb(
    t: int, u: int, v: int, n: int, p: float, pc: np.ndarray, r2: float
) -> float:
    """Hermite Coulomb integral R^n_{tuv} over the Boys function."""
    if t == u == v == 0:
        return float((-2.0 * p) ** n) * boys(n, p * r2)
    if t > 0:
        val = pc[0] * hermite_coulomb(t - 1, u, v, n + 1, p, pc, r2)
        if t > 1:
            val += (t - 1) * hermite_coulomb(t - 2, u, v, n + 1, p, pc, r2)
        return val
    if u > 0:
        val = pc[1] * hermite_coulomb(t, u - 1, v, n + 1, p, pc, r2)
        if u > 1:
            val += (u - 1) * hermite_coulomb(t, u - 2, v, n + 1, p, pc, r2)
        return val
    val = pc[2] * hermite_coulomb(t, u, v - 1, n + 1, p, pc, r2)
    if v > 1:
        val += (v - 1) * hermite_coulomb(t, u, v - 2, n + 1, p, pc, r2)
    return val


def _prim_overlap(a, lmn1, A, b, lmn2, B) -> float:
    p = a + b
    s = 1.0
    for d in range(3):
        s *= hermite_coef(lmn1[d], lmn2[d], 0, A[d] - B[d], a, b)
    return s * (np.pi / p) ** 1.5


def _prim_kinetic(a, lmn1, A, b, lmn2, B) -> float:
    """<g_a| -1/2 nabla^2 |g_b> via angular-momentum-shifted overlaps."""
    l2, m2, n2 = lmn2

    def S(dl, dm, dn):
        lmn = (l2 + dl, m2 + dm, n2 + dn)
        if min(lmn) < 0:
            return 0.0
        return _prim_overlap(a, lmn1, A, b, lmn, B)

    term0 = b * (2 * (l2 + m2 + n2) + 3) * S(0, 0, 0)
    term1 = -2.0 * b * b * (S(2, 0, 0) + S(0, 2, 0) + S(0, 0, 2))
    term2 = -0.5 * (
        l2 * (l2 - 1) * S(-2, 0, 0)
        + m2 * (m2 - 1) * S(0, -2, 0)
        + n2 * (n2 - 1) * S(0, 0, -2)
    )
    return term0 + term1 + term2


def _prim_attraction(a, lmn1, A, b, lmn2, B, C) -> float:
    """<g_a| 1/|r - C| |g_b> with a positive kernel (charge applied by caller)."""
    p = a + b
    P = (a * np.asarray(A) + b * np.asarray(B)) / p
    pc = P - np.asarray(C)
    r2 = float(pc @ pc)
    val = 0.0
    for t in range(lmn1[0] + lmn2[0] + 1):
        et = hermite_coef(lmn1[0], lmn2[0], t, A[0] - B[0], a, b)
        for u in range(lmn1[1] + lmn2[1] + 1):
            eu = hermite_coef(lmn1[1], lmn2[1], u, A[1] - B[1], a, b)
            for v in range(lmn1[2] + lmn2[2] + 1):
                ev = hermite_coef(lmn1[2], lmn2[2], v, A[2] - B[2], a, b)
                val += et * eu * ev * hermite_coulomb(t, u, v, 0, p, pc, r2)
    return 2.0 * np.pi / p * val


def _prim_eri(a, lmn1, A, b, lmn2, B, c, lmn3, C, d, lmn4, D) -> float:
    p = a + b
    q = c + d
    alpha = p * q / (p + q)
    P = (a * np.asarray(A) + b * np.asarray(B)) / p
    Q = (c * np.asarray(C) + d * np.asarray(D)) / q
    pq = P - Q
    r2 = float(pq @ pq)

    e1 = [
        [hermite_coef(lmn1[d_], lmn2[d_], t, A[d_] - B[d_], a, b)
         for t in range(lmn1[d_] + lmn2[d_] + 1)]
        for d_ in range(3)
    ]
    e2 = [
        [hermite_coef(lmn3[d_], lmn4[d_], t, C[d_] - D[d_], c, d)
         for t in range(lmn3[d_] + lmn4[d_] + 1)]
        for d_ in range(3)
    ]
    val = 0.0
    for t, et in enumerate(e1[0]):
        for u, eu in enumerate(e1[1]):
            for v, ev in enumerate(e1[2]):
                left = et * eu * ev
                if left == 0.0:
                    continue
                for tau, et2 in enumerate(e2[0]):
                    for nu, eu2 in enumerate(e2[1]):
                        for phi, ev2 in enumerate(e2[2]):
                            right = et2 * eu2 * ev2
                            if right == 0.0:
                                continue
                            sign = (-1.0) ** (tau + nu + phi)
                            val += left * right * sign * hermite_coulomb(
                                t + tau, u + nu, v + phi, 0, alpha, pq, r2
                            )
    return val * 2.0 * np.pi ** 2.5 / (p * q * np.sqrt(p + q))


def _contract2(f, g1: ContractedGaussian, g2: ContractedGaussian, *args) -> float:
    out = 0.0
    for a, ca in zip(g1.exponents, g1.coefficients):
        for b, cb in zip(g2.exponents, g2.coefficients):
            out += ca * cb * f(a, g1.lmn, g1.center, b, g2.lmn, g2.center, *args)
    return out


def contracted_overlap(g1: ContractedGaussian, g2: ContractedGaussian) -> float:
    return _contract2(_prim_overlap, g1, g2)


def contracted_kinetic(g1, g2) -> float:
    return _contract2(_prim_kinetic, g1, g2)


def contracted_attraction(g1, g2, center) -> float:
    return _contract2(_prim_attraction, g1, g2, center)


def contracted_eri(g1, g2, g3, g4) -> float:
    out = 0.0
    for a, ca in zip(g1.exponents, g1.coefficients):
        for b, cb in zip(g2.exponents, g2.coefficients):
            for c, cc in zip(g3.exponents, g3.coefficients):
                for d, cd in zip(g4.exponents, g4.coefficients):
                    out += ca * cb * cc * cd * _prim_eri(
                        a, g1.lmn, g1.center, b, g2.lmn, g2.center,
                        c, g3.lmn, g3.center, d, g4.lmn, g4.center,
                    )
    return out


def overlap_matrix(basis) -> np.ndarray:
    return _symmetric_matrix(basis, contracted_overlap)


def kinetic_matrix(basis) -> np.ndarray:
    """Standard kinetic-energy matrix T = <-1/2 nabla^2>."""
    return _symmetric_matrix(basis, contracted_kinetic)


def _symmetric_matrix(basis, f) -> np.ndarray:
    n = len(basis)
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            m[i, j] = m[j, i] = f(basis[i], basis[j])
    return m


def attraction_matrices(basis, centers) -> np.ndarray:
    """One positive-kernel 1/r_i matrix per nuclear center, shape (M, n, n)."""
    n = len(basis)
    out = np.zeros((len(centers), n, n))
    for k, center in enumerate(centers):
        for i in range(n):
            for j in range(i + 1):
                v = contracted_attraction(basis[i], basis[j], center)
                out[k, i, j] = out[k, j, i] = v
    return out


def eri_tensor(basis) -> np.ndarray:
    """Chemists' (pq|rs) tensor with 8-fold symmetry filled from unique values."""
    n = len(basis)
    g = np.zeros((n, n, n, n))
    done = np.zeros((n, n, n, n), dtype=bool)
    for p in range(n):
        for q in range(p + 1):
            for r in range(n):
                for s in range(r + 1):
                    if (p, q) < (r, s):
                        continue
                    if done[p, q, r, s]:
                        continue
                    val = contracted_eri(basis[p], basis[q], basis[r], basis[s])
                    for idx in (
                        (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
                        (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
                    ):
                        g[idx] = val
                        done[idx] = True
    return g
