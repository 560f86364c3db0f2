"""Quadrature rules, Taylor-Hood spaces, and the two projection operators."""

import math

import numpy as np
import pytest

from pfluidlab.mesh import build_structured
from pfluidlab.quadrature import simplex_rule
from pfluidlab.spaces import (
    FEFunction,
    TaylorHoodSpace,
    VectorField,
    check_projection_orders,
    infsup_constant,
    local_stability_ratio,
    project_div_preserving,
    project_patch_average,
)


def simplex_moment(powers):
    """Exact integral of prod x_i^{a_i} over the reference simplex."""
    num = 1.0
    for a in powers:
        num *= math.factorial(a)
    return num / math.factorial(sum(powers) + len(powers))


class TestQuadrature:
    @pytest.mark.parametrize("dim", [2, 3])
    @pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 6])
    def test_positive_weights_and_volume(self, dim, order):
        pts, w = simplex_rule(dim, order)
        assert (w > 0).all()
        assert w.sum() == pytest.approx(1.0 / math.factorial(dim), rel=1e-14)

    def test_order1_integrates_constants(self):
        pts, w = simplex_rule(2, 1)
        assert w.sum() == pytest.approx(0.5, rel=1e-15)

    def test_order5_monomial_2d(self):
        pts, w = simplex_rule(2, 5)
        got = (w * pts[:, 0] ** 2 * pts[:, 1] ** 3).sum()
        assert got == pytest.approx(simplex_moment((2, 3)), rel=1e-13)

    @pytest.mark.parametrize("dim", [2, 3])
    @pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 6])
    def test_exactness_up_to_order(self, dim, order):
        pts, w = simplex_rule(dim, order)
        rng = np.random.default_rng(order + 10 * dim)
        for _ in range(10):
            powers = rng.integers(0, order + 1, dim)
            while powers.sum() > order:
                powers = rng.integers(0, order + 1, dim)
            vals = np.ones(len(w))
            for ax, a in enumerate(powers):
                vals *= pts[:, ax] ** a
            assert (w * vals).sum() == pytest.approx(
                simplex_moment(tuple(powers)), rel=1e-12, abs=1e-16
            )

    def test_unsupported_order(self):
        with pytest.raises(ValueError):
            simplex_rule(2, 7)
        with pytest.raises(ValueError):
            simplex_rule(2, 0)


def trig_field():
    return VectorField(
        value=lambda X: np.stack([np.sin(X[:, 1]), np.sin(X[:, 0])], axis=-1),
        grad=lambda X: np.stack(
            [
                np.stack([np.zeros(len(X)), np.cos(X[:, 1])], -1),
                np.stack([np.cos(X[:, 0]), np.zeros(len(X))], -1),
            ],
            axis=1,
        ),
    )


def nondiv_field():
    return VectorField(
        value=lambda X: np.stack([np.sin(X[:, 0]), np.sin(X[:, 1])], axis=-1),
        grad=lambda X: np.stack(
            [
                np.stack([np.cos(X[:, 0]), np.zeros(len(X))], -1),
                np.stack([np.zeros(len(X)), np.cos(X[:, 1])], -1),
            ],
            axis=1,
        ),
    )


@pytest.fixture(scope="module")
def space8():
    return TaylorHoodSpace(build_structured(2, 8))


class TestSpace:
    def test_dof_counts(self, space8):
        mesh = space8.mesh
        assert space8.n_scalar == mesh.n_vertices + mesh.n_edges
        assert space8.n_velocity == 2 * space8.n_scalar
        assert space8.n_pressure == mesh.n_vertices

    def test_partition_of_unity(self, space8):
        assert np.abs(space8.phi2.sum(axis=1) - 1).max() < 1e-14
        assert np.abs(space8.phi1.sum(axis=1) - 1).max() < 1e-14

    def test_interpolation_reproduces_quadratics(self, space8):
        # a periodic quadratic in the FE sense: trig interpolant is not exact,
        # but P2 interpolation of its own member function is
        rng = np.random.default_rng(0)
        coeffs = rng.standard_normal(space8.n_velocity)
        u = FEFunction(space8, "velocity", coeffs)
        vals = u.values()
        grads = u.gradients()
        assert vals.shape == (space8.mesh.n_simplices, len(space8.ref_points), 2)
        assert grads.shape == vals.shape + (2,)

    def test_mean_zero_after_projection(self, space8):
        pw = project_div_preserving(space8, trig_field())
        norm = space8.lp_norm(pw.values(), 2)
        assert np.abs(pw.mean()).max() <= 1e-12 * max(norm, 1.0)

    def test_infsup_stable_across_sizes(self):
        vals = [
            infsup_constant(TaylorHoodSpace(build_structured(2, n))) for n in (4, 8)
        ]
        assert min(vals) > 0.2
        assert max(vals) / min(vals) < 2.0


class TestDivPreservingProjection:
    def test_identity_on_fe_functions(self, space8):
        rng = np.random.default_rng(1)
        u = FEFunction(space8, "velocity", rng.standard_normal(space8.n_velocity))
        pu = project_div_preserving(space8, u)
        scale = np.abs(u.coeffs).max()
        assert np.abs(pu.coeffs - u.coeffs).max() <= 1e-11 * scale

    def test_reproduces_piecewise_linears(self, space8):
        # periodic piecewise-linear fields embed into the quadratic space
        rng = np.random.default_rng(2)
        mesh = space8.mesh
        nv = mesh.n_vertices
        nodal = rng.standard_normal((nv, 2))
        coeffs = np.zeros(space8.n_velocity)
        for a in range(2):
            coeffs[a * space8.n_scalar : a * space8.n_scalar + nv] = nodal[:, a]
            # edge dof of a P1 function = midpoint value = endpoint average
        edge_vals = np.zeros((mesh.n_edges, 2))
        counts = np.zeros(mesh.n_edges)
        from pfluidlab.mesh import SIMPLEX_EDGES

        for e in range(mesh.n_simplices):
            for li, (i, j) in enumerate(SIMPLEX_EDGES[2]):
                eid = mesh.edge_of_cell[e, li]
                edge_vals[eid] = 0.5 * (
                    nodal[mesh.simplices[e, i]] + nodal[mesh.simplices[e, j]]
                )
                counts[eid] += 1
        for a in range(2):
            coeffs[a * space8.n_scalar + nv : (a + 1) * space8.n_scalar] = edge_vals[
                :, a
            ]
        u = FEFunction(space8, "velocity", coeffs)
        pu = project_div_preserving(space8, u)
        assert np.abs(pu.coeffs - u.coeffs).max() <= 1e-11 * np.abs(coeffs).max()

    @pytest.mark.parametrize("field", [trig_field, nondiv_field])
    def test_divergence_moments_preserved(self, space8, field):
        f = field()
        pw = project_div_preserving(space8, f)
        X = space8.flat_qpoints()
        ne, nq = space8.qweights.shape
        div_qp = np.trace(
            f.grad(X).reshape(ne, nq, 2, 2), axis1=2, axis2=3
        )
        rhs = space8.pressure_load(div_qp)
        res = space8.div_matrix @ pw.coeffs - rhs
        assert np.abs(res).max() <= 1e-10

    def test_solenoidal_field_projects_discretely_divfree(self, space8):
        f = VectorField(
            value=lambda X: np.stack(
                [np.sin(X[:, 0]) * np.sin(X[:, 1]), np.cos(X[:, 0]) * np.cos(X[:, 1])],
                -1,
            ),
            grad=lambda X: np.stack(
                [
                    np.stack(
                        [np.cos(X[:, 0]) * np.sin(X[:, 1]), np.sin(X[:, 0]) * np.cos(X[:, 1])],
                        -1,
                    ),
                    np.stack(
                        [-np.sin(X[:, 0]) * np.cos(X[:, 1]), -np.cos(X[:, 0]) * np.sin(X[:, 1])],
                        -1,
                    ),
                ],
                axis=1,
            ),
        )
        pw = project_div_preserving(space8, f)
        assert np.abs(space8.div_matrix @ pw.coeffs).max() <= 1e-10


class TestPatchAverageProjection:
    def test_constants_reproduced(self, space8):
        pq = project_patch_average(space8, lambda X: np.full(X.shape[0], 3.7))
        assert np.abs(pq.coeffs - 3.7).max() <= 1e-13

    def test_local_stability(self, space8):
        rng = np.random.default_rng(3)
        freq = rng.integers(1, 4, 4)
        q = lambda X: (
            np.sin(freq[0] * X[:, 0]) * np.cos(freq[1] * X[:, 1])
            + 0.3 * np.sin(freq[2] * X[:, 0] + freq[3] * X[:, 1])
        )
        assert local_stability_ratio(space8, q, r=2.0) <= 4.0

    def test_sin_approximation_order(self):
        errs, hs = [], []
        for n in (8, 16, 32):
            space = TaylorHoodSpace(build_structured(2, n))
            q = lambda X: np.sin(X[:, 0])
            pq = project_patch_average(space, q)
            X = space.flat_qpoints()
            qv = q(X).reshape(space.qweights.shape)
            errs.append(space.lp_norm(qv - pq.values(), 2))
            hs.append(space.mesh.h)
        slope = np.log(errs[0] / errs[-1]) / np.log(hs[0] / hs[-1])
        assert slope >= 0.9


class TestProjectionOrders:
    def test_report_slopes(self):
        spaces = [TaylorHoodSpace(build_structured(2, n)) for n in (4, 8, 16)]
        rep = check_projection_orders(
            spaces, trig_field(), lambda X: np.sin(X[:, 0])
        )
        assert min(rep["div_l2_slopes"]) >= 1.8
        assert min(rep["scalar_l2_slopes"]) >= 0.9
        assert max(rep["grad_stability_ratios"]) <= 4.0

    def test_requires_three_spaces(self):
        spaces = [TaylorHoodSpace(build_structured(2, n)) for n in (4, 8)]
        with pytest.raises(ValueError):
            check_projection_orders(spaces, trig_field(), lambda X: np.sin(X[:, 0]))
