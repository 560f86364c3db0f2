"""Constitutive algebra of shear-rate dependent viscous stress.

The stress law implemented here is the canonical power law with shift

    S(A) = mu (delta + |sym A|)^(p-2) sym A,        p > 1, delta >= 0, mu > 0,

where |.| is the Frobenius norm and sym A = (A + A^T)/2.  Around it sit the
convex-analysis tools that make error analysis of such fluids work:

  * the N-function ``phi`` with phi'(t) = (delta + t)^(p-2) t and its second
    derivative,
  * the shifted N-functions ``phi_a`` with phi_a'(t) = phi'(a+t) t/(a+t),
    which for this law collapse to phi_a'(t) = (delta + a + t)^(p-2) t,
  * convex conjugates psi*(t) = sup_s (st - psi(s)), computed by monotone
    root finding,
  * the strain rescaling F(A) = (delta + |sym A|)^((p-2)/2) sym A whose
    squared L2 differences define the natural distance between two strain
    states,
  * Young-type splittings ts <= eps phi_a(t) + c_eps (phi_a)*(s).

All functions are pure; matrices are plain (d, d) float arrays with d in
{2, 3}.  Batch variants (suffix ``_batch``) operate on (n, d, d) stacks and
avoid adaptive quadrature via a closed-form/series evaluation that is tested
against the quadrature path.

The equivalence-ratio helpers are stated for mu = 1; for general mu the
pointwise product (S(P) - S(Q)) . (P - Q) scales linearly with mu while the
F-based and phi-based quantities do not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from . import _kernels

__all__ = [
    "PDeltaParams",
    "DegenerateJacobianError",
    "EPS_JACOBIAN",
    "sym_part",
    "stress",
    "stress_jacobian",
    "scaled_strain",
    "coercivity_constant",
    "growth_constant",
    "nfunc",
    "nfunc_prime",
    "nfunc_second",
    "shifted_nfunc",
    "shifted_nfunc_prime",
    "nfunc_conjugate",
    "shifted_nfunc_conjugate",
    "young_constant",
    "young_split",
    "quasinorm_constant",
    "quasinorm_split",
    "natural_distance_pointwise",
    "natural_distance_ratios",
    "stress_batch",
    "scaled_strain_batch",
    "stress_jacobian_batch",
    "shifted_nfunc_batch",
    "shifted_nfunc_conjugate_batch",
    "sample_matrices",
]

EPS_JACOBIAN = 1e-12

_QUAD_OPTS = dict(epsabs=1e-300, epsrel=1e-12, limit=200)


class DegenerateJacobianError(ValueError):
    """Raised when the stress derivative is requested at |sym A| ~ 0 with delta = 0.

    The stress map is only continuous there; callers that need a finite
    linearization must regularize (see ``eps_regularize`` of stress_jacobian).
    """


@dataclass(frozen=True)
class PDeltaParams:
    """Parameters of the power-law stress: exponent p, shift delta, scale mu."""

    p: float
    delta: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if not self.mu > 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")

    @property
    def p_conj(self) -> float:
        """Conjugate exponent p' = p/(p-1)."""
        return self.p / (self.p - 1.0)


def _check_matrix(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] not in (2, 3):
        raise ValueError(f"expected a 2x2 or 3x3 matrix, got shape {A.shape}")
    return A


def sym_part(A):
    """Symmetric part (A + A^T)/2 of a 2x2 or 3x3 matrix."""
    A = _check_matrix(A)
    return 0.5 * (A + A.T)


def _frob(D):
    return float(np.sqrt(np.sum(D * D)))


def stress(params: PDeltaParams, A):
    """Power-law stress mu (delta + |sym A|)^(p-2) sym A; exactly 0 at sym A = 0."""
    D = sym_part(A)
    nrm = _frob(D)
    if nrm == 0.0:
        return np.zeros_like(D)
    return params.mu * (params.delta + nrm) ** (params.p - 2.0) * D


def scaled_strain(params: PDeltaParams, A):
    """Strain rescaling F(A) = (delta + |sym A|)^((p-2)/2) sym A.

    Squared L2 differences of this field give the natural distance between
    two strain states; F(0) = 0 for every admissible parameter set.
    """
    D = sym_part(A)
    nrm = _frob(D)
    if nrm == 0.0:
        return np.zeros_like(D)
    return (params.delta + nrm) ** (0.5 * (params.p - 2.0)) * D


def stress_jacobian(params: PDeltaParams, A, eps_regularize: float | None = None):
    """Derivative dS/dA of the stress map, a (d, d, d, d) array.

    Closed form, with D = sym A, w = mu (delta + |D|)^(p-2):

        dS_ij/dA_kl = w [ Isym_ijkl + (p-2) |D|/(delta+|D|) Dhat_ij Dhat_kl ]

    For delta = 0 the derivative blows up at D = 0; by default the call then
    raises ``DegenerateJacobianError`` once |D| < EPS_JACOBIAN, signalling
    that the caller must regularize.  Passing ``eps_regularize`` substitutes
    |D| <- max(|D|, eps_regularize) instead, which is how the time-stepping
    Newton linearization uses it (the residual stays exact either way).
    """
    D = sym_part(A)
    nrm = _frob(D)
    if params.delta == 0.0 and nrm < EPS_JACOBIAN:
        if eps_regularize is None:
            raise DegenerateJacobianError(
                f"stress derivative at |sym A| = {nrm:.3e} with delta = 0; "
                "pass eps_regularize to substitute a floor for |sym A|"
            )
    eps = 0.0 if eps_regularize is None else eps_regularize
    T = _kernels.stress_tangent_batch(
        D[None], params.p, params.delta, params.mu, eps
    )
    return T[0]


def coercivity_constant(params: PDeltaParams) -> float:
    """Largest C0 with  dS(A) : C otimes C >= C0 (delta + |sym A|)^(p-2) |sym C|^2.

    For the power law the contraction equals
    mu w [|Cs|^2 + (p-2) theta (Dhat.Cs)^2] with theta in [0, 1], minimized at
    aligned Cs, giving C0 = mu min(1, p-1).
    """
    return params.mu * min(1.0, params.p - 1.0)


def growth_constant(params: PDeltaParams) -> float:
    """Smallest derived C1 with |dS_ij/dA_kl| <= C1 (delta + |sym A|)^(p-2).

    Entrywise |Isym| <= 1 and |(p-2) theta Dhat_ij Dhat_kl| <= |p-2|, hence
    C1 = mu (1 + |p-2|).
    """
    return params.mu * (1.0 + abs(params.p - 2.0))


# ---------------------------------------------------------------------------
# N-function, shifted variants, conjugates
# ---------------------------------------------------------------------------


def _check_nonneg(name, value):
    if value < 0.0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return float(value)


def nfunc_prime(params: PDeltaParams, t: float) -> float:
    """phi'(t) = (delta + t)^(p-2) t for t >= 0."""
    t = _check_nonneg("t", t)
    if t == 0.0:
        return 0.0
    return (params.delta + t) ** (params.p - 2.0) * t


def nfunc_second(params: PDeltaParams, t: float) -> float:
    """phi''(t) = (delta + t)^(p-3) (delta + (p-1) t); +inf at t = delta = 0, p < 2."""
    t = _check_nonneg("t", t)
    base = params.delta + t
    if base == 0.0:
        return 1.0 if params.p == 2.0 else np.inf
    return base ** (params.p - 3.0) * (params.delta + (params.p - 1.0) * t)


def nfunc(params: PDeltaParams, t: float) -> float:
    """phi(t) = integral of phi' over [0, t].

    Closed form t^p / p when delta = 0, adaptive quadrature (relative
    tolerance 1e-12) otherwise.
    """
    t = _check_nonneg("t", t)
    if t == 0.0:
        return 0.0
    if params.delta == 0.0:
        return t**params.p / params.p
    val, _ = integrate.quad(
        lambda s: (params.delta + s) ** (params.p - 2.0) * s, 0.0, t, **_QUAD_OPTS
    )
    return val


def shifted_nfunc_prime(params: PDeltaParams, a: float, t: float) -> float:
    """phi_a'(t) = phi'(a + t) t/(a + t), with the limit value 0 at t = 0.

    For the power law this collapses to (delta + a + t)^(p-2) t.
    """
    a = _check_nonneg("a", a)
    t = _check_nonneg("t", t)
    if t == 0.0:
        return 0.0
    return (params.delta + a + t) ** (params.p - 2.0) * t


def shifted_nfunc(params: PDeltaParams, a: float, t: float) -> float:
    """phi_a(t) = integral of phi_a' over [0, t], by adaptive quadrature.

    Satisfies the two-sided equivalence phi_a(t) ~ (delta + a + t)^(p-2) t^2
    with constants depending only on p.  a = 0 recovers phi.
    """
    a = _check_nonneg("a", a)
    t = _check_nonneg("t", t)
    if t == 0.0:
        return 0.0
    if params.delta == 0.0 and a == 0.0:
        return t**params.p / params.p
    sigma = params.delta + a
    val, _ = integrate.quad(
        lambda s: (sigma + s) ** (params.p - 2.0) * s, 0.0, t, **_QUAD_OPTS
    )
    return val


def shifted_nfunc_conjugate(params: PDeltaParams, a: float, t: float) -> float:
    """(phi_a)*(t) = sup_{s>=0} (st - phi_a(s)).

    phi_a' is strictly increasing, so the supremum sits at the unique root of
    phi_a'(s) = t, bracketed by doubling and solved with Brent's method
    (relative tolerance 1e-10 on the conjugate value).  Closed form
    t^(p')/p' when delta = a = 0.
    """
    a = _check_nonneg("a", a)
    t = _check_nonneg("t", t)
    if t == 0.0:
        return 0.0
    if params.delta == 0.0 and a == 0.0:
        pc = params.p_conj
        return t**pc / pc

    sigma = params.delta + a

    def fprime(s):
        return (sigma + s) ** (params.p - 2.0) * s - t

    hi = max(sigma, t, 1.0)
    for _ in range(600):
        if fprime(hi) >= 0.0:
            break
        hi *= 2.0
    else:
        raise RuntimeError(
            f"conjugate root bracketing failed: phi_a'({hi:.3e}) still below "
            f"t = {t:.3e} (p = {params.p}, shift = {sigma:.3e})"
        )
    s_star = optimize.brentq(fprime, 0.0, hi, xtol=1e-300, rtol=1e-14, maxiter=300)
    return s_star * t - shifted_nfunc(params, a, s_star)


def nfunc_conjugate(params: PDeltaParams, t: float) -> float:
    """phi*(t), the convex conjugate of the unshifted N-function."""
    return shifted_nfunc_conjugate(params, 0.0, t)


def young_constant(params: PDeltaParams, eps: float) -> float:
    """Constant c_eps for  ts <= eps phi_a(t) + c_eps (phi_a)*(s).

    For the power law, phi_a(lam t) <= lam^p phi_a(t) and
    (phi_a)*(kap s) <= kap^(p') (phi_a)*(s) for lam <= 1 <= kap, which gives
    the sharp constant eps^(1-p') for eps <= 1; it is doubled for safety and
    clamped at eps = 1 for larger eps.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    return 2.0 * min(eps, 1.0) ** (1.0 - params.p_conj)


def young_split(params: PDeltaParams, a: float, t: float, s: float, eps: float):
    """Both sides of the Young splitting; returns (lhs, rhs) with lhs <= rhs.

    lhs = t s,  rhs = eps phi_a(t) + c_eps (phi_a)*(s).
    """
    a = _check_nonneg("a", a)
    t = _check_nonneg("t", t)
    s = _check_nonneg("s", s)
    lhs = t * s
    rhs = eps * shifted_nfunc(params, a, t) + young_constant(
        params, eps
    ) * shifted_nfunc_conjugate(params, a, s)
    return lhs, rhs


# calibrated envelope for the quasi-norm splitting constant; validated by the
# sampled property suite over p in [1.5, 2], delta in [0, 1]
_QUASINORM_SCALE = 64.0


def quasinorm_constant(params: PDeltaParams, eps: float) -> float:
    """c_eps for the quasi-norm splitting (see quasinorm_split)."""
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    return _QUASINORM_SCALE * min(eps, 1.0) ** (1.0 - params.p_conj)


def quasinorm_split(params: PDeltaParams, P, Q, R, eps: float):
    """Pointwise quasi-norm splitting; returns (lhs, rhs) with lhs <= rhs.

    lhs = (S(P) - S(Q)) . (sym R - sym Q)
    rhs = eps |F(P) - F(Q)|^2 + c_eps |F(R) - F(Q)|^2
    """
    SP, SQ = stress(params, P), stress(params, Q)
    lhs = float(np.sum((SP - SQ) * (sym_part(R) - sym_part(Q))))
    FP, FQ, FR = (scaled_strain(params, M) for M in (P, Q, R))
    rhs = eps * float(np.sum((FP - FQ) ** 2)) + quasinorm_constant(
        params, eps
    ) * float(np.sum((FR - FQ) ** 2))
    return lhs, rhs


# ---------------------------------------------------------------------------
# natural distance
# ---------------------------------------------------------------------------


def natural_distance_pointwise(params: PDeltaParams, P, Q) -> dict:
    """The four equivalent pointwise measures of distance between strains.

    Returns a dict with keys
      sFdot        (S(P) - S(Q)) . (P - Q)
      F2           |F(P) - F(Q)|^2
      shifted      phi_{|sym P|}(|sym P - sym Q|)
      second_order phi''(|sym P| + |sym Q|) |sym P - sym Q|^2
    All four vanish simultaneously iff sym P = sym Q, in which case every
    entry is exactly 0.
    """
    Ps, Qs = sym_part(P), sym_part(Q)
    if np.array_equal(Ps, Qs):
        return {"sFdot": 0.0, "F2": 0.0, "shifted": 0.0, "second_order": 0.0}
    diff = Ps - Qs
    dn = _frob(diff)
    sSd = float(np.sum((stress(params, Ps) - stress(params, Qs)) * diff))
    F2 = float(np.sum((scaled_strain(params, Ps) - scaled_strain(params, Qs)) ** 2))
    shifted = shifted_nfunc(params, _frob(Ps), dn)
    second = nfunc_second(params, _frob(Ps) + _frob(Qs)) * dn * dn
    return {"sFdot": sSd, "F2": F2, "shifted": shifted, "second_order": second}


def natural_distance_ratios(record: dict) -> dict:
    """Ratios sFdot/F2, sFdot/shifted, sFdot/second_order; 1 when all vanish."""
    if record["sFdot"] == 0.0 and record["F2"] == 0.0:
        return {"F2": 1.0, "shifted": 1.0, "second_order": 1.0}
    return {
        "F2": record["sFdot"] / record["F2"],
        "shifted": record["sFdot"] / record["shifted"],
        "second_order": record["sFdot"] / record["second_order"],
    }


# ---------------------------------------------------------------------------
# batch helpers
# ---------------------------------------------------------------------------


def stress_batch(params: PDeltaParams, D):
    """Stress on a (n, d, d) stack of already-symmetric matrices."""
    return _kernels.stress_batch(np.ascontiguousarray(D, float), params.p, params.delta, params.mu)


def scaled_strain_batch(params: PDeltaParams, D):
    """Strain rescaling on a (n, d, d) stack of already-symmetric matrices."""
    return _kernels.scaled_strain_batch(np.ascontiguousarray(D, float), params.p, params.delta)


def stress_jacobian_batch(params: PDeltaParams, D, eps_regularize: float = EPS_JACOBIAN):
    """Regularized stress derivative on a (n, d, d) stack (never raises)."""
    return _kernels.stress_tangent_batch(
        np.ascontiguousarray(D, float), params.p, params.delta, params.mu, eps_regularize
    )


def shifted_nfunc_batch(params: PDeltaParams, a, t):
    """phi_a(t) for array arguments via closed form plus binomial series.

    The antiderivative of (sigma + s)^(p-2) s, sigma = delta + a, is evaluated
    directly for t >= sigma/2 and by the series
        sigma^(p-2) sum_j binom(p-2, j) t^(j+2) / (sigma^j (j+2))
    for t < sigma/2, where the direct form would cancel catastrophically.
    Agrees with the quadrature path to ~1e-13 relative (tested).
    """
    p = params.p
    sigma = np.asarray(a, dtype=float) + params.delta
    t = np.asarray(t, dtype=float)
    sigma, t = np.broadcast_arrays(sigma, t)
    out = np.zeros(t.shape)

    pure = (sigma == 0.0) & (t > 0.0)
    out[pure] = t[pure] ** p / p

    direct = (sigma > 0.0) & (t >= 0.5 * sigma)
    if np.any(direct):
        s_, t_ = sigma[direct], t[direct]
        b = s_ + t_
        out[direct] = (b**p - s_**p) / p - s_ * (b ** (p - 1.0) - s_ ** (p - 1.0)) / (
            p - 1.0
        )

    series = (sigma > 0.0) & (t > 0.0) & (t < 0.5 * sigma)
    if np.any(series):
        s_, t_ = sigma[series], t[series]
        x = t_ / s_
        acc = np.zeros_like(t_)
        coef = 1.0  # binom(p-2, j), updated multiplicatively
        xj = np.ones_like(t_)
        for j in range(80):
            acc += coef * xj / (j + 2.0)
            coef *= (p - 2.0 - j) / (j + 1.0)
            xj *= x
            if coef == 0.0:
                break
        out[series] = s_ ** (p - 2.0) * t_**2 * acc
    return out


def shifted_nfunc_conjugate_batch(params: PDeltaParams, a, t):
    """(phi_a)*(t) for array arguments via vectorized bisection.

    Solves (sigma + s)^(p-2) s = t, sigma = delta + a, with 90 bisection steps
    after a doubling bracket, then returns s t - phi_a(s).
    """
    p = params.p
    sigma = np.asarray(a, dtype=float) + params.delta
    t = np.asarray(t, dtype=float)
    sigma, t = np.broadcast_arrays(sigma, t)
    sigma = sigma.astype(float).copy()
    t = t.astype(float).copy()
    out = np.zeros(t.shape)
    act = t > 0.0
    if not np.any(act):
        return out
    sg, tt = sigma[act], t[act]

    if p == 2.0:
        s = tt.copy()
    else:
        def fp(s):
            return (sg + s) ** (p - 2.0) * s

        hi = np.maximum.reduce([sg, tt, np.ones_like(tt)])
        for _ in range(400):
            bad = fp(hi) < tt
            if not np.any(bad):
                break
            hi[bad] *= 2.0
        lo = np.zeros_like(hi)
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            below = fp(mid) < tt
            lo[below] = mid[below]
            hi[~below] = mid[~below]
        s = 0.5 * (lo + hi)

    shift = np.where(sg >= params.delta, sg - params.delta, 0.0)
    out[act] = s * tt - shifted_nfunc_batch(params, shift, s)
    return out


def sample_matrices(rng: np.random.Generator, count: int, dim: int):
    """Component-uniform matrices in [-1, 1]^(d x d), log-uniformly rescaled
    over 16 decades (1e-8 .. 1e8); the standard stress sampling plan."""
    M = rng.uniform(-1.0, 1.0, size=(count, dim, dim))
    scale = 10.0 ** rng.uniform(-8.0, 8.0, size=count)
    return M * scale[:, None, None]
