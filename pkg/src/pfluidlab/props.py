"""Seeded sampling batches for the constitutive invariants.

Each check draws its own deterministic generator stream, mixes plain
component-uniform matrices with scale-stressed ones (norms 1e-8 .. 1e8), and
sweeps the stress parameters over p in [1.5, 2], delta in [0, 1] with delta=0
always included.  Results report the worst observed margin so regressions
show up as drifting numbers before they become failures.

Envelope conventions (mu = 1):
  * the four natural-distance measures agree pairwise within a factor 64,
  * |S(P)-S(Q)| and the shifted derivative agree within a factor 64,
  * S(Q).Q ~ |F(Q)|^2 ~ phi(|sym Q|) within a factor 64,
  * monotonicity (S(P)-S(Q)).(P-Q) >= -1e-14 * |S(P)-S(Q)||P-Q|,
  * Young and quasi-norm splittings hold as inequalities,
  * (phi_a)*(kappa t) <= 4 kappa^2 (phi_a)*(t) for kappa in [0, 1].
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .constitutive import (
    PDeltaParams,
    quasinorm_constant,
    sample_matrices,
    shifted_nfunc_batch,
    shifted_nfunc_conjugate_batch,
    young_constant,
)

__all__ = ["run_property_batches", "RATIO_ENVELOPE"]

RATIO_ENVELOPE = 64.0


def _param_grid(rng, groups):
    """Parameter sets covering the corners plus random interior points."""
    ps = [1.5, 2.0, 1.75]
    ds = [0.0, 1.0, 0.3]
    sets = [(p, d) for p in ps for d in ds]
    while len(sets) < groups:
        sets.append((rng.uniform(1.5, 2.0), rng.uniform(0.0, 1.0)))
    return sets[:groups]


def _draw_pair(rng, n, dim):
    """Half plain uniform, half scale-stressed matrix pairs."""
    n_plain = n // 2
    P = np.concatenate(
        [rng.uniform(-1, 1, (n_plain, dim, dim)), sample_matrices(rng, n - n_plain, dim)]
    )
    Q = np.concatenate(
        [rng.uniform(-1, 1, (n_plain, dim, dim)), sample_matrices(rng, n - n_plain, dim)]
    )
    return P, Q


def _symm(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _fnorm(A):
    return np.sqrt(np.einsum("nij,nij->n", A, A))


def _hammer_batch(params, P, Q):
    """All four natural-distance measures plus the stress-difference pair."""
    Ps, Qs = _symm(P), _symm(Q)
    diff = Ps - Qs
    dn = _fnorm(diff)
    SP = _kernels.stress_batch(np.ascontiguousarray(Ps), params.p, params.delta, params.mu)
    SQ = _kernels.stress_batch(np.ascontiguousarray(Qs), params.p, params.delta, params.mu)
    sFdot = np.einsum("nij,nij->n", SP - SQ, diff)
    FP = _kernels.scaled_strain_batch(np.ascontiguousarray(Ps), params.p, params.delta)
    FQ = _kernels.scaled_strain_batch(np.ascontiguousarray(Qs), params.p, params.delta)
    F2 = np.einsum("nij,nij->n", FP - FQ, FP - FQ)
    pn, qn = _fnorm(Ps), _fnorm(Qs)
    shifted = shifted_nfunc_batch(params, pn, dn)
    tot = pn + qn
    base = params.delta + tot
    second = np.where(
        base > 0.0,
        base ** (params.p - 3.0) * (params.delta + (params.p - 1.0) * tot) * dn * dn,
        0.0,
    )
    sdiff = _fnorm(SP - SQ)
    prime = np.where(
        dn > 0.0, (params.delta + pn + dn) ** (params.p - 2.0) * dn, 0.0
    )
    return {
        "sFdot": sFdot,
        "F2": F2,
        "shifted": shifted,
        "second_order": second,
        "stress_diff": sdiff,
        "shifted_prime": prime,
        "diff_norm": dn,
    }


def _ratio_extremes(num, den, mask):
    if not np.any(mask):
        return 1.0, 1.0
    r = num[mask] / den[mask]
    return float(r.min()), float(r.max())


def run_property_batches(seed: int = 0, count: int = 10000) -> dict:
    """Run every sampling invariant; returns a JSON-serializable report."""
    root = np.random.default_rng(seed)
    groups = 12
    per = max(count // groups, 8)
    checks = {}

    # natural-distance chain, stress-difference equivalence, monotonicity
    lo_all, hi_all = np.inf, -np.inf
    e_lo, e_hi = np.inf, -np.inf
    d_lo, d_hi = np.inf, -np.inf
    mono_worst = np.inf
    rng = np.random.default_rng(root.integers(2**63))
    for p, delta in _param_grid(rng, groups):
        params = PDeltaParams(p=p, delta=delta)
        for dim in (2, 3):
            P, Q = _draw_pair(rng, per // 2 + 1, dim)
            h = _hammer_batch(params, P, Q)
            live = h["diff_norm"] > 0.0
            for other in ("F2", "shifted", "second_order"):
                ok = live & (h[other] > 0.0)
                lo, hi = _ratio_extremes(h["sFdot"], h[other], ok)
                lo_all, hi_all = min(lo_all, lo), max(hi_all, hi)
            ok = live & (h["shifted_prime"] > 0.0)
            lo, hi = _ratio_extremes(h["stress_diff"], h["shifted_prime"], ok)
            e_lo, e_hi = min(e_lo, lo), max(e_hi, hi)

            # one-argument equivalences
            Qs = _symm(Q)
            SQ = _kernels.stress_batch(np.ascontiguousarray(Qs), p, delta, 1.0)
            FQ = _kernels.scaled_strain_batch(np.ascontiguousarray(Qs), p, delta)
            sq = np.einsum("nij,nij->n", SQ, Qs)
            f2 = np.einsum("nij,nij->n", FQ, FQ)
            phiq = shifted_nfunc_batch(params, 0.0, _fnorm(Qs))
            ok = f2 > 0.0
            lo, hi = _ratio_extremes(sq, f2, ok)
            d_lo, d_hi = min(d_lo, lo), max(d_hi, hi)
            ok = phiq > 0.0
            lo, hi = _ratio_extremes(f2, phiq, ok)
            d_lo, d_hi = min(d_lo, lo), max(d_hi, hi)

            scale = h["stress_diff"] * h["diff_norm"]
            ok = scale > 0.0
            if np.any(ok):
                mono_worst = min(
                    mono_worst, float((h["sFdot"][ok] / scale[ok]).min())
                )

    env = RATIO_ENVELOPE
    checks["hammer_chain"] = {
        "ok": bool(1.0 / env <= lo_all and hi_all <= env),
        "worst": float(max(hi_all, 1.0 / lo_all)),
        "range": [lo_all, hi_all],
    }
    checks["stress_diff_equiv"] = {
        "ok": bool(1.0 / env <= e_lo and e_hi <= env),
        "worst": float(max(e_hi, 1.0 / e_lo)),
        "range": [e_lo, e_hi],
    }
    checks["one_point_equiv"] = {
        "ok": bool(1.0 / env <= d_lo and d_hi <= env),
        "worst": float(max(d_hi, 1.0 / d_lo)),
        "range": [d_lo, d_hi],
    }
    checks["monotonicity"] = {"ok": bool(mono_worst >= -1e-14), "worst": mono_worst}

    # Young splitting over random (a, t, s, eps)
    rng = np.random.default_rng(root.integers(2**63))
    worst = -np.inf
    for p, delta in _param_grid(rng, groups):
        params = PDeltaParams(p=p, delta=delta)
        n = per
        a = 10.0 ** rng.uniform(-8, 8, n) * (rng.uniform(0, 1, n) > 0.2)
        t = 10.0 ** rng.uniform(-8, 8, n)
        s = 10.0 ** rng.uniform(-8, 8, n)
        for eps in (0.1, 1.0, 10.0 ** rng.uniform(-2, 1)):
            lhs = t * s
            rhs = eps * shifted_nfunc_batch(params, a, t) + young_constant(
                params, eps
            ) * shifted_nfunc_conjugate_batch(params, a, s)
            worst = max(worst, float((lhs / rhs).max()))
    checks["young"] = {"ok": bool(worst <= 1.0 + 1e-10), "worst": worst}

    # quasi-norm splitting for pointwise triples
    rng = np.random.default_rng(root.integers(2**63))
    worst = -np.inf
    for p, delta in _param_grid(rng, groups):
        params = PDeltaParams(p=p, delta=delta)
        for dim in (2, 3):
            n = per // 2 + 1
            P, Q = _draw_pair(rng, n, dim)
            R, _ = _draw_pair(rng, n, dim)
            Ps, Qs, Rs = _symm(P), _symm(Q), _symm(R)
            SP = _kernels.stress_batch(np.ascontiguousarray(Ps), p, delta, 1.0)
            SQ = _kernels.stress_batch(np.ascontiguousarray(Qs), p, delta, 1.0)
            FP = _kernels.scaled_strain_batch(np.ascontiguousarray(Ps), p, delta)
            FQ = _kernels.scaled_strain_batch(np.ascontiguousarray(Qs), p, delta)
            FR = _kernels.scaled_strain_batch(np.ascontiguousarray(Rs), p, delta)
            lhs = np.einsum("nij,nij->n", SP - SQ, Rs - Qs)
            for eps in (0.1, 1.0):
                rhs = eps * np.einsum(
                    "nij,nij->n", FP - FQ, FP - FQ
                ) + quasinorm_constant(params, eps) * np.einsum(
                    "nij,nij->n", FR - FQ, FR - FQ
                )
                ok = rhs > 0.0
                if np.any(ok):
                    worst = max(worst, float((lhs[ok] / rhs[ok]).max()))
    checks["quasinorm"] = {"ok": bool(worst <= 1.0 + 1e-10), "worst": worst}

    # conjugate scaling law
    rng = np.random.default_rng(root.integers(2**63))
    worst = -np.inf
    for p, delta in _param_grid(rng, groups):
        params = PDeltaParams(p=p, delta=delta)
        n = per
        a = 10.0 ** rng.uniform(-6, 6, n) * (rng.uniform(0, 1, n) > 0.2)
        t = 10.0 ** rng.uniform(-6, 6, n)
        kap = rng.uniform(0.0, 1.0, n)
        big = shifted_nfunc_conjugate_batch(params, a, kap * t)
        ref = shifted_nfunc_conjugate_batch(params, a, t)
        ok = (ref > 0.0) & (kap > 0.0)
        if np.any(ok):
            worst = max(
                worst, float((big[ok] / (4.0 * kap[ok] ** 2 * ref[ok])).max())
            )
    checks["conjugate_scaling"] = {"ok": bool(worst <= 1.0 + 1e-10), "worst": worst}

    # stress derivative vs central differences, away from the degenerate point
    rng = np.random.default_rng(root.integers(2**63))
    worst = 0.0
    for p, delta in _param_grid(rng, groups // 2):
        params = PDeltaParams(p=p, delta=delta)
        for dim in (2, 3):
            n = per // 2 + 1
            A = rng.uniform(-1, 1, (n, dim, dim))
            As = _symm(A)
            keep = _fnorm(As) >= 0.1
            A = np.ascontiguousarray(A[keep])
            if len(A) == 0:
                continue
            T = _kernels.stress_tangent_batch(
                np.ascontiguousarray(_symm(A)), p, delta, 1.0, 0.0
            )
            step = 1e-5
            fd = np.empty_like(T)
            for kk in range(dim):
                for ll in range(dim):
                    E = np.zeros((dim, dim))
                    E[kk, ll] = step
                    Sp = _kernels.stress_batch(
                        np.ascontiguousarray(_symm(A + E)), p, delta, 1.0
                    )
                    Sm = _kernels.stress_batch(
                        np.ascontiguousarray(_symm(A - E)), p, delta, 1.0
                    )
                    fd[:, :, :, kk, ll] = (Sp - Sm) / (2.0 * step)
            scale = np.abs(T).max(axis=(1, 2, 3, 4))
            err = np.abs(T - fd).max(axis=(1, 2, 3, 4)) / scale
            worst = max(worst, float(err.max()))
    checks["jacobian_fd"] = {"ok": bool(worst <= 1e-6), "worst": worst}

    return {
        "seed": seed,
        "count": count,
        "envelope": env,
        "checks": checks,
        "all_ok": bool(all(c["ok"] for c in checks.values())),
    }
