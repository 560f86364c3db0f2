"""Semi-implicit Euler time stepping for the power-law flow problem.

One step advances (u, pi) in the zero-mean Taylor-Hood pair by solving

    <(u - u_prev)/k, xi> + <S(Du), D xi> + b(u_prev, u, xi) - <div xi, pi> = <f(t), xi>
    <div u, eta> = 0

for all discrete test functions, with the skew-symmetrized transport form

    b(w, v, xi) = 1/2 [ <(grad v) w, xi> - <(grad xi) w, v> ].

The transport velocity is lagged to the previous step, so convection is
linear per step; the stress term is resolved by damped Newton with the
analytic stress derivative.  The saddle-point systems carry one scalar
Lagrange multiplier per zero-mean constraint (d for velocity components, one
for pressure, plus one pin for the constant-pressure kernel of the
divergence constraints) and are solved by sparse LU.

Assembly order is deterministic, so identical configurations reproduce
bit-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .constitutive import PDeltaParams
from .spaces import FEFunction, TaylorHoodSpace, VectorField, project_div_preserving

__all__ = [
    "RunConfig",
    "DiscreteState",
    "StepReport",
    "EnergyReport",
    "StepFailure",
    "convection_form",
    "assemble_residual",
    "solve_timestep",
    "run",
]

CSV_HEADER = "# pfluid-lab v1"


class StepFailure(RuntimeError):
    """Newton or linear solve failed for one time step."""

    def __init__(self, step, message):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class RunConfig:
    """Everything one simulation needs.

    ``forcing(t, X)`` maps a scalar time and an (N, d) array of points to
    (N, d) force values; ``initial`` is a VectorField (projected onto the
    discretely divergence-free space before stepping) or an FEFunction.
    """

    params: PDeltaParams
    space: TaylorHoodSpace
    dt: float
    n_steps: int
    forcing: callable
    initial: object
    newton_rtol: float = 1e-10
    newton_atol: float = 1e-12
    newton_max_iters: int = 50
    max_backtracks: int = 30
    eps_jacobian: float = 1e-12
    csv_path: str | None = None

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"need at least one step, got {self.n_steps}")

    @property
    def final_time(self):
        return self.dt * self.n_steps


@dataclass
class DiscreteState:
    """Velocity/pressure snapshot at time level m."""

    m: int
    t: float
    u: FEFunction
    pressure: FEFunction


@dataclass
class StepReport:
    newton_iters: int
    residual: float
    backtracks: int
    escalations: int
    div_residual: float


@dataclass
class EnergyReport:
    """Per-level energy diagnostics: ||u||_2^2, <S(Du), Du>, <f, u>."""

    m: list = field(default_factory=list)
    t: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    dissipation: list = field(default_factory=list)
    forcing_power: list = field(default_factory=list)
    grad_p_norm_p: list = field(default_factory=list)  # ||Du||_p^p


def _as_qp_fields(space, obj):
    if isinstance(obj, FEFunction):
        return obj.values(), obj.gradients()
    X = space.flat_qpoints()
    ne, nq = space.qweights.shape
    vals = np.asarray(obj.value(X)).reshape(ne, nq, space.dim)
    grads = np.asarray(obj.grad(X)).reshape(ne, nq, space.dim, space.dim)
    return vals, grads


def convection_form(space: TaylorHoodSpace, u, v, w) -> float:
    """Skew-symmetrized trilinear transport form b(u, v, w).

    Arguments are FEFunctions on `space` or VectorFields; evaluated with the
    space's quadrature.  Antisymmetric in (v, w) by construction, so
    b(u, v, v) = 0 up to roundoff.
    """
    uv, _ = _as_qp_fields(space, u) if not isinstance(u, np.ndarray) else (u, None)
    vv, vg = _as_qp_fields(space, v)
    wv, wg = _as_qp_fields(space, w)
    t1 = np.einsum("eq,eqij,eqj,eqi->", space.qweights, vg, uv, wv)
    t2 = np.einsum("eq,eqij,eqj,eqi->", space.qweights, wg, uv, vv)
    return 0.5 * float(t1 - t2)


class _Stepper:
    """Cached operators for repeated time steps on one configuration."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.space = config.space
        space = self.space
        self.Mv = space.mass_velocity.tocsr()
        self.B = space.div_matrix.tocsr()
        self.BT = self.B.T.tocsr()
        self.mu_mat = space.mean_velocity.tocsr()
        self.mp_col = sp.csr_matrix(space.mean_pressure.reshape(-1, 1))
        self.nu = space.n_velocity
        self.np_ = space.n_pressure
        self.d = space.dim
        self.ntot = self.nu + self.np_ + self.d + 1

    # -- pieces ---------------------------------------------------------------

    def _sym_strain(self, u_coeffs):
        G = self.space.velocity_gradients(u_coeffs)
        D = 0.5 * (G + np.swapaxes(G, 2, 3))
        return np.ascontiguousarray(D)

    def stress_residual_vec(self, u_coeffs):
        space = self.space
        D = self._sym_strain(u_coeffs)
        ne, nq = space.qweights.shape
        S = _kernels.stress_batch(
            D.reshape(-1, self.d, self.d),
            self.config.params.p,
            self.config.params.delta,
            self.config.params.mu,
        ).reshape(ne, nq, self.d, self.d)
        local = _kernels.stress_residual_elem(S, space.grad_phi2, space.qweights)
        out = np.zeros(self.nu)
        np.add.at(out, space.cells_vel, local)
        return out, D, S

    def stress_tangent_mat(self, D, eps_j):
        space = self.space
        ne, nq = space.qweights.shape
        T = _kernels.stress_tangent_batch(
            D.reshape(-1, self.d, self.d),
            self.config.params.p,
            self.config.params.delta,
            self.config.params.mu,
            eps_j,
        ).reshape(ne, nq, self.d, self.d, self.d, self.d)
        local = _kernels.stress_tangent_elem(T, space.grad_phi2, space.qweights)
        rows = np.broadcast_to(space.cells_vel[:, :, None], local.shape).ravel()
        cols = np.broadcast_to(space.cells_vel[:, None, :], local.shape).ravel()
        return sp.coo_matrix(
            (local.ravel(), (rows, cols)), shape=(self.nu, self.nu)
        ).tocsr()

    def convection_mat(self, u_prev_coeffs):
        space = self.space
        wvals = np.ascontiguousarray(space.velocity_values(u_prev_coeffs))
        local = _kernels.convection_elem(
            wvals, space.phi2, space.grad_phi2, space.qweights
        )
        rows = np.broadcast_to(space.cells_p2[:, :, None], local.shape).ravel()
        cols = np.broadcast_to(space.cells_p2[:, None, :], local.shape).ravel()
        C = sp.coo_matrix(
            (local.ravel(), (rows, cols)), shape=(space.n_scalar, space.n_scalar)
        ).tocsr()
        N = 0.5 * (C - C.T)
        return sp.block_diag([N] * self.d, format="csr")

    def forcing_vec(self, t):
        space = self.space
        X = space.flat_qpoints()
        ne, nq = space.qweights.shape
        fv = np.asarray(self.config.forcing(t, X)).reshape(ne, nq, self.d)
        return space.velocity_load(np.ascontiguousarray(fv))

    # -- residual and jacobian --------------------------------------------------

    def residual(self, x, u_prev, Nmat, f_vec):
        k = self.config.dt
        u = x[: self.nu]
        pi = x[self.nu : self.nu + self.np_]
        nu_mult = x[self.nu + self.np_ : self.nu + self.np_ + self.d]
        zeta = x[-1]
        s_vec, D, _ = self.stress_residual_vec(u)
        r_mom = (
            self.Mv @ (u - u_prev) / k
            + s_vec
            + Nmat @ u
            - self.BT @ pi
            + self.mu_mat.T @ nu_mult
            - f_vec
        )
        r_cont = self.B @ u + self.space.mean_pressure * zeta
        r_mean_u = self.mu_mat @ u
        r_mean_p = np.array([self.space.mean_pressure @ pi])
        return np.concatenate([r_mom, r_cont, r_mean_u, r_mean_p]), D

    def jacobian(self, D, Nmat, eps_j):
        k = self.config.dt
        A00 = self.Mv / k + Nmat + self.stress_tangent_mat(D, eps_j)
        return sp.bmat(
            [
                [A00, -self.BT, self.mu_mat.T, None],
                [self.B, None, None, self.mp_col],
                [self.mu_mat, None, None, None],
                [None, self.mp_col.T, None, None],
            ],
            format="csc",
        )

    # -- one step -----------------------------------------------------------------

    def step(self, state_prev: DiscreteState):
        cfg = self.config
        t_m = state_prev.t + cfg.dt
        u_prev = state_prev.u.coeffs
        Nmat = self.convection_mat(u_prev)
        f_vec = self.forcing_vec(t_m)

        x = np.zeros(self.ntot)
        x[: self.nu] = u_prev
        x[self.nu : self.nu + self.np_] = state_prev.pressure.coeffs

        eps_j = cfg.eps_jacobian
        escalations = 0
        while True:
            x_new, iters, res_norm, backtracks, ok = self._newton(
                x, u_prev, Nmat, f_vec, eps_j
            )
            if ok:
                break
            escalations += 1
            # stiff degenerate-point linearization: widen the floor and retry
            if escalations > 3:
                raise StepFailure(
                    state_prev.m + 1,
                    f"Newton did not converge (residual {res_norm:.3e}) "
                    f"after {escalations - 1} regularization escalations",
                )
            eps_j *= 10.0

        u = x_new[: self.nu]
        pi = x_new[self.nu : self.nu + self.np_]
        div_res = float(np.abs(self.B @ u).max())
        state = DiscreteState(
            m=state_prev.m + 1,
            t=t_m,
            u=FEFunction(self.space, "velocity", u),
            pressure=FEFunction(self.space, "pressure", pi),
        )
        report = StepReport(
            newton_iters=iters,
            residual=res_norm,
            backtracks=backtracks,
            escalations=escalations,
            div_residual=div_res,
        )
        return state, report, f_vec

    def _newton(self, x0, u_prev, Nmat, f_vec, eps_j):
        cfg = self.config
        x = x0.copy()
        res, D = self.residual(x, u_prev, Nmat, f_vec)
        norm0 = float(np.linalg.norm(res))
        norm = norm0
        backtracks_total = 0
        if norm <= cfg.newton_atol:
            return x, 0, norm, 0, True
        for it in range(1, cfg.newton_max_iters + 1):
            try:
                lu = spla.splu(self.jacobian(D, Nmat, eps_j))
            except RuntimeError:
                return x, it, norm, backtracks_total, False
            dx = lu.solve(-res)
            if not np.all(np.isfinite(dx)):
                return x, it, norm, backtracks_total, False
            alpha = 1.0
            for bt in range(cfg.max_backtracks + 1):
                res_new, D_new = self.residual(x + alpha * dx, u_prev, Nmat, f_vec)
                norm_new = float(np.linalg.norm(res_new))
                if norm_new < norm or norm_new <= cfg.newton_atol:
                    break
                alpha *= 0.5
                backtracks_total += 1
            else:
                return x, it, norm, backtracks_total, False
            x = x + alpha * dx
            res, D, norm = res_new, D_new, norm_new
            if norm <= cfg.newton_atol or norm <= cfg.newton_rtol * norm0:
                return x, it, norm, backtracks_total, True
        return x, cfg.newton_max_iters, norm, backtracks_total, False

    # -- diagnostics -----------------------------------------------------------------

    def energy_terms(self, state: DiscreteState, f_vec=None):
        space = self.space
        u = state.u.coeffs
        kinetic = float(u @ (self.Mv @ u))
        D = self._sym_strain(u)
        ne, nq = space.qweights.shape
        S = _kernels.stress_batch(
            D.reshape(-1, self.d, self.d),
            self.config.params.p,
            self.config.params.delta,
            self.config.params.mu,
        ).reshape(ne, nq, self.d, self.d)
        dissipation = float(np.sum(space.qweights * np.einsum("eqij,eqij->eq", S, D)))
        power = float(f_vec @ u) if f_vec is not None else 0.0
        grad_p = space.lp_norm(D, self.config.params.p) ** self.config.params.p
        return kinetic, dissipation, power, grad_p


def assemble_residual(
    config: RunConfig, state_prev: DiscreteState, u, pi, nu_mult=None, zeta=0.0
):
    """Residual of the time-step system at candidate (u, pi).

    `u`, `pi` are FEFunctions or coefficient arrays; the momentum rows come
    first, then the continuity rows, then the d velocity-mean constraints and
    the pressure-mean constraint.  Multipliers default to zero.
    """
    stepper = _Stepper(config)
    uc = u.coeffs if isinstance(u, FEFunction) else np.asarray(u, float)
    pc = pi.coeffs if isinstance(pi, FEFunction) else np.asarray(pi, float)
    x = np.zeros(stepper.ntot)
    x[: stepper.nu] = uc
    x[stepper.nu : stepper.nu + stepper.np_] = pc
    if nu_mult is not None:
        x[stepper.nu + stepper.np_ : stepper.nu + stepper.np_ + stepper.d] = nu_mult
    x[-1] = zeta
    Nmat = stepper.convection_mat(state_prev.u.coeffs)
    f_vec = stepper.forcing_vec(state_prev.t + config.dt)
    res, _ = stepper.residual(x, state_prev.u.coeffs, Nmat, f_vec)
    return res


def solve_timestep(config: RunConfig, state_prev: DiscreteState):
    """Advance one step from `state_prev`; returns (state, StepReport)."""
    state, report, _ = _Stepper(config).step(state_prev)
    return state, report


def _initial_state(config: RunConfig) -> DiscreteState:
    space = config.space
    if isinstance(config.initial, FEFunction):
        u0 = project_div_preserving(space, config.initial)
    elif isinstance(config.initial, VectorField):
        u0 = project_div_preserving(space, config.initial)
    else:
        raise TypeError("initial must be a VectorField or FEFunction")
    pi0 = FEFunction(space, "pressure", np.zeros(space.n_pressure))
    return DiscreteState(m=0, t=0.0, u=u0, pressure=pi0)


def run(config: RunConfig):
    """Run the full scheme: project the initial velocity, then n_steps steps.

    Returns (states, reports, energy) where states[m] is the level-m snapshot
    (including m = 0), reports[m-1] the Newton diagnostics of step m, and
    energy the per-level EnergyReport.  If `config.csv_path` is set, one CSV
    row per level is streamed out.
    """
    stepper = _Stepper(config)
    state = _initial_state(config)
    states = [state]
    reports = []
    energy = EnergyReport()

    fh = open(config.csv_path, "w") if config.csv_path else None
    try:
        if fh:
            fh.write(CSV_HEADER + "\n")
            fh.write(
                "m,t,newton_iters,residual,backtracks,kinetic,dissipation,"
                "forcing_power,div_inf\n"
            )

        def record(st, rep, f_vec):
            kin, dis, pw, gp = stepper.energy_terms(st, f_vec)
            energy.m.append(st.m)
            energy.t.append(st.t)
            energy.kinetic.append(kin)
            energy.dissipation.append(dis)
            energy.forcing_power.append(pw)
            energy.grad_p_norm_p.append(gp)
            if fh:
                iters = rep.newton_iters if rep else 0
                resid = rep.residual if rep else 0.0
                bts = rep.backtracks if rep else 0
                div = rep.div_residual if rep else 0.0
                fh.write(
                    f"{st.m},{st.t:.17g},{iters},{resid:.17g},{bts},"
                    f"{kin:.17g},{dis:.17g},{pw:.17g},{div:.17g}\n"
                )

        record(state, None, None)
        for _ in range(config.n_steps):
            state, report, f_vec = stepper.step(state)
            states.append(state)
            reports.append(report)
            record(state, report, f_vec)
    finally:
        if fh:
            fh.close()
    return states, reports, energy
