"""Hot per-quadrature-point kernels.

Each kernel has a numba ``@njit`` loop implementation and a vectorized numpy
fallback; :mod:`pfluidlab._backend` selects which one is exported.  All kernels
operate on batches of symmetric d x d matrices stored as ``(n, d, d)`` float64
arrays, or on element-local quadrature data shaped ``(ne, nq, ...)``.

Conventions:
  * ``D`` is the symmetric part of a velocity gradient (callers symmetrize).
  * ``p``, ``delta``, ``mu`` are the power-law stress parameters.
  * ``gphi`` are physical basis gradients, ``(ne, nq, nb, d)``.
  * ``wdet`` are quadrature weights already scaled by |det J|, ``(ne, nq)``.
"""

import numpy as np

from ._backend import USE_NUMBA

__all__ = [
    "stress_batch",
    "stress_tangent_batch",
    "scaled_strain_batch",
    "grad_at_qp",
    "stress_residual_elem",
    "stress_tangent_elem",
    "convection_elem",
    "vector_load_elem",
]


# ---------------------------------------------------------------------------
# numpy fallback implementations
# ---------------------------------------------------------------------------


def _frob(D):
    return np.sqrt(np.einsum("nij,nij->n", D, D))


def _stress_batch_np(D, p, delta, mu):
    """S = mu (delta + |D|)^(p-2) D, with S = 0 exactly where D = 0."""
    nrm = _frob(D)
    base = delta + nrm
    w = np.zeros_like(nrm)
    act = (nrm > 0.0) | (delta > 0.0)
    w[act] = mu * base[act] ** (p - 2.0)
    S = w[:, None, None] * D
    return S


def _stress_tangent_batch_np(D, p, delta, mu, eps_reg):
    """Derivative of the stress map, shape (n, d, d, d, d).

    T[n,i,j,k,l] = mu w [ Isym_{ijkl} + (p-2) t/(delta+t) Dhat_ij Dhat_kl ]
    with t = |D| (floored at eps_reg when delta = 0) and Dhat = D/|D|.
    """
    n, d, _ = D.shape
    nrm = _frob(D)
    t = nrm.copy()
    if delta == 0.0:
        t = np.maximum(t, eps_reg)
    w = mu * (delta + t) ** (p - 2.0)
    c2 = (p - 2.0) * t / (delta + t)
    safe = np.maximum(nrm, 1e-300)
    Dhat = D / safe[:, None, None]
    Dhat[nrm == 0.0] = 0.0

    eye = np.eye(d)
    isym = 0.5 * (
        np.einsum("ik,jl->ijkl", eye, eye) + np.einsum("il,jk->ijkl", eye, eye)
    )
    T = w[:, None, None, None, None] * (
        isym[None]
        + c2[:, None, None, None, None] * np.einsum("nij,nkl->nijkl", Dhat, Dhat)
    )
    return T


def _scaled_strain_batch_np(D, p, delta):
    """F = (delta + |D|)^((p-2)/2) D, continuous through D = 0."""
    nrm = _frob(D)
    w = np.zeros_like(nrm)
    act = (nrm > 0.0) | (delta > 0.0)
    w[act] = (delta + nrm[act]) ** (0.5 * (p - 2.0))
    return w[:, None, None] * D


def _grad_at_qp_np(coeffs, cells, gphi, ncomp):
    """Gradient of a vector FE field at quadrature points, (ne, nq, ncomp, d)."""
    ns = coeffs.shape[0] // ncomp
    c = coeffs.reshape(ncomp, ns)
    local = c[:, cells]  # (ncomp, ne, nb)
    return np.einsum("aeI,eqIj->eqaj", local, gphi, optimize=True)


def _stress_residual_elem_np(S, gphi, wdet):
    """Local residual  r[e, a*nb+I] = sum_q w S[a,:].grad(phi_I)."""
    ne, nq, nb, d = gphi.shape
    r = np.einsum("eq,eqaj,eqIj->eaI", wdet, S, gphi, optimize=True)
    return r.reshape(ne, d * nb)


def _stress_tangent_elem_np(T, gphi, wdet):
    """Local tangent  K[e, a*nb+I, c*nb+J] = sum_q w T[a,j,c,l] dphi_I/dj dphi_J/dl."""
    ne, nq, nb, d = gphi.shape
    K = np.einsum("eq,eqajcl,eqIj,eqJl->eaIcJ", wdet, T, gphi, gphi, optimize=True)
    return K.reshape(ne, d * nb, d * nb)


def _convection_elem_np(wvals, phi, gphi, wdet):
    """Scalar transport block  C[e,I,J] = sum_q w phi_I (w . grad phi_J)."""
    return np.einsum("eq,qI,eqj,eqJj->eIJ", wdet, phi, wvals, gphi, optimize=True)


def _vector_load_elem_np(vals, phi, wdet):
    """Local load  r[e, a*nb+I] = sum_q w vals[a] phi_I."""
    ne, nq, d = vals.shape
    nb = phi.shape[1]
    r = np.einsum("eq,eqa,qI->eaI", wdet, vals, phi, optimize=True)
    return r.reshape(ne, d * nb)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _stress_batch_nb(D, p, delta, mu):
        n, d, _ = D.shape
        S = np.zeros((n, d, d))
        for m in range(n):
            s = 0.0
            for i in range(d):
                for j in range(d):
                    s += D[m, i, j] * D[m, i, j]
            nrm = np.sqrt(s)
            if nrm == 0.0 and delta == 0.0:
                continue
            w = mu * (delta + nrm) ** (p - 2.0)
            for i in range(d):
                for j in range(d):
                    S[m, i, j] = w * D[m, i, j]
        return S

    @njit(cache=True)
    def _stress_tangent_batch_nb(D, p, delta, mu, eps_reg):
        n, d, _ = D.shape
        T = np.zeros((n, d, d, d, d))
        for m in range(n):
            s = 0.0
            for i in range(d):
                for j in range(d):
                    s += D[m, i, j] * D[m, i, j]
            nrm = np.sqrt(s)
            t = nrm
            if delta == 0.0 and t < eps_reg:
                t = eps_reg
            w = mu * (delta + t) ** (p - 2.0)
            c2 = (p - 2.0) * t / (delta + t)
            inv = 0.0
            if nrm > 0.0:
                inv = 1.0 / nrm
            for i in range(d):
                for j in range(d):
                    dij = D[m, i, j] * inv
                    for k in range(d):
                        for l in range(d):
                            val = 0.0
                            if i == k and j == l:
                                val += 0.5
                            if i == l and j == k:
                                val += 0.5
                            val += c2 * dij * (D[m, k, l] * inv)
                            T[m, i, j, k, l] = w * val
        return T

    @njit(cache=True)
    def _scaled_strain_batch_nb(D, p, delta):
        n, d, _ = D.shape
        F = np.zeros((n, d, d))
        for m in range(n):
            s = 0.0
            for i in range(d):
                for j in range(d):
                    s += D[m, i, j] * D[m, i, j]
            nrm = np.sqrt(s)
            if nrm == 0.0 and delta == 0.0:
                continue
            w = (delta + nrm) ** (0.5 * (p - 2.0))
            for i in range(d):
                for j in range(d):
                    F[m, i, j] = w * D[m, i, j]
        return F

    @njit(cache=True)
    def _grad_at_qp_nb(coeffs, cells, gphi, ncomp):
        ne, nq, nb, d = gphi.shape
        ns = coeffs.shape[0] // ncomp
        G = np.zeros((ne, nq, ncomp, d))
        for e in range(ne):
            for q in range(nq):
                for a in range(ncomp):
                    for j in range(d):
                        acc = 0.0
                        for I in range(nb):
                            acc += coeffs[a * ns + cells[e, I]] * gphi[e, q, I, j]
                        G[e, q, a, j] = acc
        return G

    @njit(cache=True)
    def _stress_residual_elem_nb(S, gphi, wdet):
        ne, nq, nb, d = gphi.shape
        r = np.zeros((ne, d * nb))
        for e in range(ne):
            for q in range(nq):
                w = wdet[e, q]
                for a in range(d):
                    for I in range(nb):
                        acc = 0.0
                        for j in range(d):
                            acc += S[e, q, a, j] * gphi[e, q, I, j]
                        r[e, a * nb + I] += w * acc
        return r

    @njit(cache=True)
    def _stress_tangent_elem_nb(T, gphi, wdet):
        ne, nq, nb, d = gphi.shape
        K = np.zeros((ne, d * nb, d * nb))
        for e in range(ne):
            for q in range(nq):
                w = wdet[e, q]
                for a in range(d):
                    for I in range(nb):
                        for c in range(d):
                            for J in range(nb):
                                acc = 0.0
                                for j in range(d):
                                    for l in range(d):
                                        acc += (
                                            T[e, q, a, j, c, l]
                                            * gphi[e, q, I, j]
                                            * gphi[e, q, J, l]
                                        )
                                K[e, a * nb + I, c * nb + J] += w * acc
        return K

    @njit(cache=True)
    def _convection_elem_nb(wvals, phi, gphi, wdet):
        ne, nq, nb, d = gphi.shape
        C = np.zeros((ne, nb, nb))
        for e in range(ne):
            for q in range(nq):
                w = wdet[e, q]
                for J in range(nb):
                    adv = 0.0
                    for j in range(d):
                        adv += wvals[e, q, j] * gphi[e, q, J, j]
                    for I in range(nb):
                        C[e, I, J] += w * phi[q, I] * adv
        return C

    @njit(cache=True)
    def _vector_load_elem_nb(vals, phi, wdet):
        ne, nq, d = vals.shape
        nb = phi.shape[1]
        r = np.zeros((ne, d * nb))
        for e in range(ne):
            for q in range(nq):
                w = wdet[e, q]
                for a in range(d):
                    for I in range(nb):
                        r[e, a * nb + I] += w * vals[e, q, a] * phi[q, I]
        return r

    stress_batch = _stress_batch_nb
    stress_tangent_batch = _stress_tangent_batch_nb
    scaled_strain_batch = _scaled_strain_batch_nb
    grad_at_qp = _grad_at_qp_nb
    stress_residual_elem = _stress_residual_elem_nb
    stress_tangent_elem = _stress_tangent_elem_nb
    convection_elem = _convection_elem_nb
    vector_load_elem = _vector_load_elem_nb
else:
    stress_batch = _stress_batch_np
    stress_tangent_batch = _stress_tangent_batch_np
    scaled_strain_batch = _scaled_strain_batch_np
    grad_at_qp = _grad_at_qp_np
    stress_residual_elem = _stress_residual_elem_np
    stress_tangent_elem = _stress_tangent_elem_np
    convection_elem = _convection_elem_np
    vector_load_elem = _vector_load_elem_np

# the numpy variants stay importable for cross-checking and benchmarks
numpy_impls = {
    "stress_batch": _stress_batch_np,
    "stress_tangent_batch": _stress_tangent_batch_np,
    "scaled_strain_batch": _scaled_strain_batch_np,
    "grad_at_qp": _grad_at_qp_np,
    "stress_residual_elem": _stress_residual_elem_np,
    "stress_tangent_elem": _stress_tangent_elem_np,
    "convection_elem": _convection_elem_np,
    "vector_load_elem": _vector_load_elem_np,
}

active_impls = {
    "stress_batch": stress_batch,
    "stress_tangent_batch": stress_tangent_batch,
    "scaled_strain_batch": scaled_strain_batch,
    "grad_at_qp": grad_at_qp,
    "stress_residual_elem": stress_residual_elem,
    "stress_tangent_elem": stress_tangent_elem,
    "convection_elem": convection_elem,
    "vector_load_elem": vector_load_elem,
}
