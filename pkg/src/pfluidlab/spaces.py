"""Conforming Taylor-Hood spaces on the periodic mesh.

Velocity: continuous piecewise-quadratic vectors (one scalar quadratic dof per
vertex and per periodic edge, times the space dimension).  Pressure:
continuous piecewise-linears.  Zero-mean subspaces are enforced at solve time
through scalar Lagrange multipliers, never by eliminating dofs.

The module also provides the two projection operators the error machinery
needs:

  * ``project_div_preserving``: constrained L2 projection onto the velocity
    space that preserves all divergence moments against the pressure space
    (and the componentwise mean).  Realized as a saddle-point solve whose
    multiplier is pinned by one extra scalar unknown, because the constant
    pressure direction is in the kernel of the divergence constraints.
  * ``project_patch_average``: pressure-space quasi-interpolant whose nodal
    value is the basis-weighted patch average; reproduces constants and is
    locally L^r-stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .mesh import SIMPLEX_EDGES, PeriodicMesh, patch
from .quadrature import simplex_rule

__all__ = [
    "TaylorHoodSpace",
    "FEFunction",
    "VectorField",
    "project_div_preserving",
    "project_patch_average",
    "check_projection_orders",
]


def _p2_tabulate(dim, pts):
    """Quadratic Lagrange basis and reference gradients at points (nq, d)."""
    nq = pts.shape[0]
    lam = np.empty((nq, dim + 1))
    lam[:, 0] = 1.0 - pts.sum(axis=1)
    lam[:, 1:] = pts
    glam = np.empty((dim + 1, dim))
    glam[0] = -1.0
    glam[1:] = np.eye(dim)

    edges = SIMPLEX_EDGES[dim]
    nb = (dim + 1) + len(edges)
    phi = np.empty((nq, nb))
    gphi = np.empty((nq, nb, dim))
    for v in range(dim + 1):
        phi[:, v] = lam[:, v] * (2.0 * lam[:, v] - 1.0)
        gphi[:, v, :] = (4.0 * lam[:, v] - 1.0)[:, None] * glam[v]
    for k, (i, j) in enumerate(edges):
        b = dim + 1 + k
        phi[:, b] = 4.0 * lam[:, i] * lam[:, j]
        gphi[:, b, :] = 4.0 * (
            lam[:, i][:, None] * glam[j] + lam[:, j][:, None] * glam[i]
        )
    return phi, gphi


def _p1_tabulate(dim, pts):
    nq = pts.shape[0]
    phi = np.empty((nq, dim + 1))
    phi[:, 0] = 1.0 - pts.sum(axis=1)
    phi[:, 1:] = pts
    glam = np.empty((dim + 1, dim))
    glam[0] = -1.0
    glam[1:] = np.eye(dim)
    gphi = np.broadcast_to(glam[None], (nq, dim + 1, dim)).copy()
    return phi, gphi


class TaylorHoodSpace:
    """Quadratic velocity / linear pressure pair with shared quadrature."""

    def __init__(self, mesh: PeriodicMesh, quad_order: int = 5):
        self.mesh = mesh
        self.dim = mesh.dim
        self.quad_order = quad_order

        ref_pts, ref_w = simplex_rule(mesh.dim, quad_order)
        self.ref_points = ref_pts
        self.phi2, gphi2_ref = _p2_tabulate(mesh.dim, ref_pts)
        self.phi1, gphi1_ref = _p1_tabulate(mesh.dim, ref_pts)

        X0 = mesh.cell_coords[:, 0, :]
        J = np.swapaxes(mesh.cell_coords[:, 1:, :] - X0[:, None, :], 1, 2)
        detJ = np.linalg.det(J)
        Jinv = np.linalg.inv(J)
        fact = 1.0
        for k in range(2, mesh.dim + 1):
            fact *= k
        # reference weights integrate the unit simplex (sum 1/d!)
        self.qweights = np.abs(detJ)[:, None] * ref_w[None, :]        # (ne, nq)
        self.qpoints = X0[:, None, :] + np.einsum(
            "eij,qj->eqi", J, ref_pts
        )                                                             # (ne, nq, d)
        self.grad_phi2 = np.ascontiguousarray(
            np.einsum("qbk,ekj->eqbj", gphi2_ref, Jinv)
        )                                                             # (ne,nq,nb2,d)
        self.grad_phi1 = np.ascontiguousarray(
            np.einsum("qbk,ekj->eqbj", gphi1_ref, Jinv)
        )

        nv = mesh.n_vertices
        self.n_scalar = nv + mesh.n_edges
        self.n_pressure = nv
        self.n_velocity = mesh.dim * self.n_scalar
        self.cells_p2 = np.ascontiguousarray(
            np.hstack([mesh.simplices, nv + mesh.edge_of_cell]), dtype=np.int64
        )
        self.cells_p1 = np.ascontiguousarray(mesh.simplices, dtype=np.int64)
        self.node_coords = np.vstack([mesh.vertices, mesh.edge_midpoints])

        # velocity local-to-global including components (component-major)
        self.cells_vel = np.hstack(
            [a * self.n_scalar + self.cells_p2 for a in range(mesh.dim)]
        )

        self._assemble_static()
        self._proj_lu = None

    # -- static operators ---------------------------------------------------

    def _scatter(self, local, rows_cells, cols_cells, shape):
        rows = np.broadcast_to(rows_cells[:, :, None], local.shape).ravel()
        cols = np.broadcast_to(cols_cells[:, None, :], local.shape).ravel()
        return sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()

    def _assemble_static(self):
        w = self.qweights
        loc_m2 = np.einsum("eq,qI,qJ->eIJ", w, self.phi2, self.phi2)
        self.mass_scalar = self._scatter(
            loc_m2, self.cells_p2, self.cells_p2, (self.n_scalar, self.n_scalar)
        )
        self.mass_velocity = sp.block_diag(
            [self.mass_scalar] * self.dim, format="csr"
        )

        # divergence moments  B[i, a*ns+J] = <d_a phi2_J, phi1_i>
        blocks = []
        for a in range(self.dim):
            loc = np.einsum("eq,qI,eqJ->eIJ", w, self.phi1, self.grad_phi2[..., a])
            blocks.append(
                self._scatter(
                    loc, self.cells_p1, self.cells_p2, (self.n_pressure, self.n_scalar)
                )
            )
        self.div_matrix = sp.hstack(blocks, format="csr")

        vec2 = np.zeros(self.n_scalar)
        np.add.at(vec2, self.cells_p2, np.einsum("eq,qI->eI", w, self.phi2))
        self.mean_velocity = sp.lil_matrix((self.dim, self.n_velocity))
        for a in range(self.dim):
            self.mean_velocity[a, a * self.n_scalar : (a + 1) * self.n_scalar] = vec2
        self.mean_velocity = self.mean_velocity.tocsr()

        vec1 = np.zeros(self.n_pressure)
        np.add.at(vec1, self.cells_p1, np.einsum("eq,qI->eI", w, self.phi1))
        self.mean_pressure = vec1
        self.volume = float(vec1.sum())

    # -- evaluation ----------------------------------------------------------

    def velocity_values(self, coeffs):
        c = coeffs.reshape(self.dim, self.n_scalar)
        return np.einsum("qI,aeI->eqa", self.phi2, c[:, self.cells_p2])

    def velocity_gradients(self, coeffs):
        return _kernels.grad_at_qp(
            np.ascontiguousarray(coeffs), self.cells_p2, self.grad_phi2, self.dim
        )

    def pressure_values(self, coeffs):
        return np.einsum("qI,eI->eq", self.phi1, coeffs[self.cells_p1])

    def integrate(self, qp_scalar):
        """Integral over the box of a scalar sampled at quadrature points."""
        return float(np.sum(self.qweights * qp_scalar))

    def lp_norm(self, qp_field, p):
        """L^p norm of a qp-sampled field, Frobenius magnitude pointwise."""
        mag2 = np.asarray(qp_field) ** 2
        while mag2.ndim > 2:
            mag2 = mag2.sum(axis=-1)
        if p == 2:
            return np.sqrt(self.integrate(mag2))
        return self.integrate(mag2 ** (p / 2.0)) ** (1.0 / p)

    def interpolate_velocity(self, fn):
        """Nodal interpolant of a callable X -> (N, d) velocity field."""
        vals = np.asarray(fn(self.node_coords))
        coeffs = np.empty(self.n_velocity)
        for a in range(self.dim):
            coeffs[a * self.n_scalar : (a + 1) * self.n_scalar] = vals[:, a]
        return FEFunction(self, "velocity", coeffs)

    def interpolate_pressure(self, fn):
        vals = np.asarray(fn(self.mesh.vertices))
        return FEFunction(self, "pressure", vals.astype(float))

    def flat_qpoints(self):
        return self.qpoints.reshape(-1, self.dim)

    # -- loads ----------------------------------------------------------------

    def velocity_load(self, qp_values):
        """Assemble  l[a*ns+I] = integral qp_values[...,a] phi_I."""
        local = _kernels.vector_load_elem(
            np.ascontiguousarray(qp_values), self.phi2, self.qweights
        )
        out = np.zeros(self.n_velocity)
        np.add.at(out, self.cells_vel, local)
        return out

    def pressure_load(self, qp_values):
        local = np.einsum("eq,eq,qI->eI", self.qweights, qp_values, self.phi1)
        out = np.zeros(self.n_pressure)
        np.add.at(out, self.cells_p1, local)
        return out


@dataclass
class FEFunction:
    """Coefficient vector in one of the two spaces of a Taylor-Hood pair."""

    space: TaylorHoodSpace
    kind: str  # "velocity" | "pressure"
    coeffs: np.ndarray

    def values(self):
        if self.kind == "velocity":
            return self.space.velocity_values(self.coeffs)
        return self.space.pressure_values(self.coeffs)

    def gradients(self):
        if self.kind != "velocity":
            raise ValueError("gradients at quadrature points: velocity only")
        return self.space.velocity_gradients(self.coeffs)

    def mean(self):
        """Componentwise mean value over the box."""
        vals = self.values()
        tot = np.einsum("eq,eq...->...", self.space.qweights, vals)
        return tot / self.space.volume

    def copy(self):
        return FEFunction(self.space, self.kind, self.coeffs.copy())


@dataclass
class VectorField:
    """Analytic vector field with optional gradient, both vectorized over points."""

    value: callable  # (N, d) -> (N, d)
    grad: callable = None  # (N, d) -> (N, d, d), (grad)_ij = d_j u_i


def _field_at_qp(space, w):
    """Values and gradients of a velocity input at the quadrature points."""
    if isinstance(w, FEFunction):
        if w.space is not space:
            raise ValueError("FE input must live on the target space's mesh")
        return w.values(), w.gradients()
    X = space.flat_qpoints()
    ne, nq = space.qweights.shape
    vals = np.asarray(w.value(X)).reshape(ne, nq, space.dim)
    if w.grad is None:
        raise ValueError("divergence-preserving projection needs gradients")
    grads = np.asarray(w.grad(X)).reshape(ne, nq, space.dim, space.dim)
    return vals, grads


def _projection_lu(space):
    if space._proj_lu is None:
        nu, npr, d = space.n_velocity, space.n_pressure, space.dim
        mp_col = sp.csr_matrix(space.mean_pressure.reshape(-1, 1))
        K = sp.bmat(
            [
                [space.mass_velocity, space.div_matrix.T, space.mean_velocity.T, None],
                [space.div_matrix, None, None, mp_col],
                [space.mean_velocity, None, None, None],
                [None, mp_col.T, None, None],
            ],
            format="csc",
        )
        space._proj_lu = spla.splu(K)
    return space._proj_lu


def project_div_preserving(space: TaylorHoodSpace, w) -> FEFunction:
    """L2-closest velocity function with identical divergence moments and mean.

    Accepts an analytic ``VectorField`` (value + grad callables) or an
    ``FEFunction`` on the same space (on which the operator is the identity).
    The solve enforces, up to factorization accuracy,

        <div(w - Pw), eta> = 0   for every pressure basis function eta,
        mean(Pw) = mean(w)       componentwise.
    """
    vals, grads = _field_at_qp(space, w)
    rhs_mass = space.velocity_load(vals)
    div_qp = np.trace(grads, axis1=2, axis2=3)
    rhs_div = space.pressure_load(div_qp)
    rhs_mean = np.einsum("eq,eqa->a", space.qweights, vals)

    rhs = np.concatenate([rhs_mass, rhs_div, rhs_mean, [0.0]])
    sol = _projection_lu(space).solve(rhs)
    return FEFunction(space, "velocity", sol[: space.n_velocity])


def project_patch_average(space: TaylorHoodSpace, q) -> FEFunction:
    """Pressure-space quasi-interpolant: nodal value = basis-weighted patch mean.

    nodal_i = (int q phi_i) / (int phi_i); reproduces constants exactly and is
    locally L^r-stable with a constant depending only on the mesh regularity.
    """
    if isinstance(q, FEFunction):
        qvals = q.values()
    else:
        X = space.flat_qpoints()
        ne, nq = space.qweights.shape
        qvals = np.asarray(q(X)).reshape(ne, nq)
    num = space.pressure_load(qvals)
    return FEFunction(space, "pressure", num / space.mean_pressure)


def local_stability_ratio(space: TaylorHoodSpace, q, r: float = 2.0) -> float:
    """max_K (int_K |Pi q|^r) / (int_{S_K} |q|^r) for the patch-average operator."""
    pq = project_patch_average(space, q)
    pvals = pq.values()
    if isinstance(q, FEFunction):
        qvals = q.values()
    else:
        X = space.flat_qpoints()
        qvals = np.asarray(q(X)).reshape(space.qweights.shape)
    num_el = (space.qweights * np.abs(pvals) ** r).sum(axis=1)
    den_el = (space.qweights * np.abs(qvals) ** r).sum(axis=1)
    worst = 0.0
    for K in range(space.mesh.n_simplices):
        members = patch(space.mesh, K).members
        den = den_el[members].sum()
        if den > 0.0:
            worst = max(worst, num_el[K] / den)
    return worst


def check_projection_orders(spaces, vector_field: VectorField, scalar_field) -> dict:
    """Empirical approximation orders of both projections on nested spaces.

    Returns per-level errors, log2 slopes between consecutive levels, and the
    W^{1,r} stability ratios of the divergence-preserving projection.  At
    least 3 nested spaces are required.
    """
    if len(spaces) < 3:
        raise ValueError("need at least 3 nested spaces")
    hs, e_div_l2, e_div_grad, e_scal_l2, stab = [], [], [], [], []
    for space in spaces:
        X = space.flat_qpoints()
        ne, nq = space.qweights.shape
        wv = np.asarray(vector_field.value(X)).reshape(ne, nq, space.dim)
        wg = np.asarray(vector_field.grad(X)).reshape(ne, nq, space.dim, space.dim)
        pw = project_div_preserving(space, vector_field)
        e_div_l2.append(space.lp_norm(wv - pw.values(), 2))
        pg = pw.gradients()
        e_div_grad.append(space.lp_norm(wg - pg, 2))
        stab.append(space.lp_norm(pg, 2) / space.lp_norm(wg, 2))

        qv = np.asarray(scalar_field(X)).reshape(ne, nq)
        pq = project_patch_average(space, scalar_field)
        e_scal_l2.append(space.lp_norm(qv - pq.values(), 2))
        hs.append(space.mesh.h)

    def slopes(errs):
        return [
            float(np.log(errs[i] / errs[i + 1]) / np.log(hs[i] / hs[i + 1]))
            if errs[i] > 0 and errs[i + 1] > 0
            else float("inf")
            for i in range(len(errs) - 1)
        ]

    return {
        "h": hs,
        "div_l2_errors": e_div_l2,
        "div_l2_slopes": slopes(e_div_l2),
        "div_grad_errors": e_div_grad,
        "div_grad_slopes": slopes(e_div_grad),
        "scalar_l2_errors": e_scal_l2,
        "scalar_l2_slopes": slopes(e_scal_l2),
        "grad_stability_ratios": stab,
    }


def infsup_constant(space: TaylorHoodSpace) -> float:
    """Numerical inf-sup constant of the pair, for small spaces.

    Second-smallest singular value of chol(Mp)^-1 B chol(Mu)^-T; the smallest
    one is the constant-pressure direction and is numerically zero.
    """
    Mu = space.mass_velocity.toarray()
    loc = np.einsum("eq,qI,qJ->eIJ", space.qweights, space.phi1, space.phi1)
    ncell, nb1 = space.cells_p1.shape
    rows = np.broadcast_to(space.cells_p1[:, :, None], (ncell, nb1, nb1)).ravel()
    cols = np.broadcast_to(space.cells_p1[:, None, :], (ncell, nb1, nb1)).ravel()
    Mp = sp.coo_matrix(
        (loc.ravel(), (rows, cols)), shape=(space.n_pressure, space.n_pressure)
    ).toarray()
    B = space.div_matrix.toarray()
    Lu = np.linalg.cholesky(Mu)
    Lp = np.linalg.cholesky(Mp)
    Bt = np.linalg.solve(Lp, B) @ np.linalg.inv(Lu).T
    svals = np.linalg.svd(Bt, compute_uv=False)
    return float(np.sort(svals)[1])
