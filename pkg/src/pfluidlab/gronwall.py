"""Numeric verifier for the generalized discrete Gronwall inequality.

The inequality at stake: two non-negative sequences a_m, b_m and two source
sequences r_m, s_m satisfy initial/source smallness

    a_0^2 <= g0 h^2,  b_0^2 <= g0 h^2,  k sum r_m^2 <= g0 h^2,
    k sum s_m^2 <= g0 h^2,              0 < h < 1/sqrt(g0),

and for every m >= 1 the two recursions (d_t x_m := (x_m - x_{m-1})/k)

  (R1)  d_t a_m^2 + g1 (lam + b_m)^{p-2} b_m^2
            <= b_m r_m + g2 b_{m-1} b_m + s_m^2
  (R2)  d_t a_m^2 + g1 (lam + b_m)^{p-2} b_m^2
            <= b_m r_m + g3 b_m b_{m-1}^{1-theta} a_m^theta + s_m^2

with 1 < p <= 2, 0 < theta <= 1, 0 <= lam <= Lam.  Then, under the couplings
h^2 < g0bar k and k < kbar <= 1, one gets max b_m <= 1 and

  (C)   max_{1<=m<=N} a_m^2 + g1 (lam + Lam)^{p-2} k sum_{m=1}^N b_m^2
            <= g4 h^2 exp(2 g5 k M)          for every N <= M,

plus the m=0-inclusive variant with constant 2 g4.

This module derives admissible (g4, g5, kbar, g0bar) by an explicit
constant-chasing proof (every inequality used is recorded in the docstring of
``derive_constants``), checks all hypotheses/recursions/conclusions on
concrete data, and ships a constructive generator of valid instances for
soundness testing.  All checks are pure floating-point arithmetic with an
absolute slack of 1e-12 times the local scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GronwallData",
    "GronwallVerdict",
    "check_hypotheses",
    "check_recursions",
    "derive_constants",
    "verify_conclusion",
    "classical_gronwall_bound",
    "classical_gronwall_check",
    "make_valid_instance",
    "inject_violation",
]

_TOL = 1e-12


def _leq(lhs, rhs):
    return bool(lhs <= rhs + _TOL * (1.0 + abs(lhs) + abs(rhs)))


def _lt(lhs, rhs):
    # strict gates are compared exactly: a slack floor would blind them on
    # small-scale instances
    return bool(lhs < rhs)


@dataclass
class GronwallData:
    """Sequences plus constants feeding the verifier.

    a, b, r, s have length M+1 (index 0..M); a and b must be non-negative.
    """

    k: float
    M: int
    a: np.ndarray
    b: np.ndarray
    r: np.ndarray
    s: np.ndarray
    gamma0: float
    gamma1: float
    gamma2: float
    gamma3: float
    lam: float
    Lam: float
    theta: float
    p: float
    h: float
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.a = np.asarray(self.a, float)
        self.b = np.asarray(self.b, float)
        self.r = np.asarray(self.r, float)
        self.s = np.asarray(self.s, float)
        for name in ("a", "b", "r", "s"):
            if len(getattr(self, name)) != self.M + 1:
                raise ValueError(f"sequence {name} must have length M+1 = {self.M + 1}")
        if np.any(self.a < 0) or np.any(self.b < 0):
            raise ValueError("a and b must be non-negative")
        if not (0.0 < self.k <= 1.0):
            raise ValueError(f"the argument requires 0 < k <= 1, got k = {self.k}")
        if not (1.0 < self.p <= 2.0):
            raise ValueError(f"p must lie in (1, 2], got {self.p}")
        if not (0.0 < self.theta <= 1.0):
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if not (0.0 <= self.lam <= self.Lam):
            raise ValueError("need 0 <= lam <= Lam")
        if min(self.gamma0, self.gamma1, self.gamma2, self.gamma3) <= 0.0:
            raise ValueError("gamma constants must be positive")
        if self.h <= 0.0:
            raise ValueError("h must be positive")

    def to_dict(self):
        return {
            "k": self.k,
            "M": self.M,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "r": self.r.tolist(),
            "s": self.s.tolist(),
            "gamma0": self.gamma0,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "lam": self.lam,
            "Lam": self.Lam,
            "theta": self.theta,
            "p": self.p,
            "h": self.h,
            "labels": self.labels,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            k=float(d["k"]),
            M=int(d["M"]),
            a=np.array(d["a"], float),
            b=np.array(d["b"], float),
            r=np.array(d["r"], float),
            s=np.array(d["s"], float),
            gamma0=float(d["gamma0"]),
            gamma1=float(d["gamma1"]),
            gamma2=float(d["gamma2"]),
            gamma3=float(d["gamma3"]),
            lam=float(d["lam"]),
            Lam=float(d["Lam"]),
            theta=float(d["theta"]),
            p=float(d["p"]),
            h=float(d["h"]),
            labels=dict(d.get("labels", {})),
        )


@dataclass
class GronwallVerdict:
    hypotheses: dict
    recursions_first: list
    recursions_second: list
    constants: dict
    coupling: dict
    applicable: bool
    max_b_ok: bool | None
    main_bound_ok: bool | None
    corollary_ok: bool | None

    @property
    def hypotheses_ok(self) -> bool:
        return all(self.hypotheses.values())

    @property
    def recursions_ok(self) -> bool:
        return all(self.recursions_first) and all(self.recursions_second)

    @property
    def conclusion_ok(self) -> bool | None:
        """True/False when applicable, None when the gates exclude the check."""
        if not self.applicable:
            return None
        return bool(self.max_b_ok and self.main_bound_ok and self.corollary_ok)

    @property
    def clean_pass(self) -> bool:
        return self.applicable and self.conclusion_ok is True

    def to_dict(self):
        return {
            "hypotheses": self.hypotheses,
            "recursions_first": list(map(bool, self.recursions_first)),
            "recursions_second": list(map(bool, self.recursions_second)),
            "constants": self.constants,
            "coupling": self.coupling,
            "applicable": self.applicable,
            "max_b_ok": self.max_b_ok,
            "main_bound_ok": self.main_bound_ok,
            "corollary_ok": self.corollary_ok,
            "conclusion_ok": self.conclusion_ok,
            "status": "pass"
            if self.clean_pass
            else ("not applicable" if not self.applicable else "violated"),
        }


def check_hypotheses(data: GronwallData) -> dict:
    """The five smallness conditions, each evaluated exactly."""
    h2 = data.h**2
    g0 = data.gamma0
    return {
        "a0": _leq(data.a[0] ** 2, g0 * h2),
        "b0": _leq(data.b[0] ** 2, g0 * h2),
        "r_sum": _leq(data.k * float(np.sum(data.r**2)), g0 * h2),
        "s_sum": _leq(data.k * float(np.sum(data.s**2)), g0 * h2),
        "h_side": _lt(data.h, 1.0 / math.sqrt(g0)),
    }


def _quasi_term(gamma1, lam, p, b):
    """g1 (lam + b)^{p-2} b^2, with the limit value 0 at lam = b = 0."""
    if b == 0.0:
        return 0.0
    return gamma1 * (lam + b) ** (p - 2.0) * b * b


def check_recursions(data: GronwallData):
    """Per-m flags for the two recursions, slack 1e-12 * scale."""
    first, second = [], []
    k = data.k
    for m in range(1, data.M + 1):
        dta2 = (data.a[m] ** 2 - data.a[m - 1] ** 2) / k
        lhs = dta2 + _quasi_term(data.gamma1, data.lam, data.p, data.b[m])
        common = data.b[m] * data.r[m] + data.s[m] ** 2
        rhs1 = common + data.gamma2 * data.b[m - 1] * data.b[m]
        rhs2 = common + data.gamma3 * data.b[m] * data.b[m - 1] ** (
            1.0 - data.theta
        ) * data.a[m] ** data.theta
        first.append(_leq(lhs, rhs1))
        second.append(_leq(lhs, rhs2))
    return first, second


def derive_constants(data: GronwallData) -> dict:
    """Admissible (gamma4, gamma5, kbar, gamma0bar) by explicit constant chasing.

    Write Lt = max(Lam, 1) (once max b <= 1 is known, lam + b <= lam + Lt), and

        G      = g1 (lam + Lt)^{p-2}     <= g1 (lam + b_m)^{p-2},
        G_min  = g1 (2 Lt)^{p-2}          (worst lam in [0, Lam]),
        G_max  = g1 Lt^{p-2}              (lam = 0).

    Growth constant, from (R2) with Young splittings that put weight G/4 on
    b_m^2 and b_{m-1}^2 each (the theta-Young step shrinks the b_{m-1}
    coefficient at the price of inflating the a_m coefficient):

        gamma5 = (g3^2 theta / G_min) (4 g3^2 (1-theta) / G_min^2)^{(1-theta)/theta}

    The summed recursion then gives x_N <= D + gamma5 k sum_{m<=N} x_m with
    x_N = a_N^2 + (G/4) k sum b_m^2 and
    D <= g0 h^2 (2 + G_max/4 + 1/G_min), so the implicit discrete Gronwall
    step (valid for gamma5 k <= 1/2, i.e. k < kbar = min(1, 1/(2 gamma5)))
    yields x_N <= D exp(2 gamma5 k N).  Converting x to the conclusion's
    coefficient g1 (lam + Lam)^{p-2} costs a factor rho = (Lt / max(Lam, Lt
    is 1))…, bounded by (1/Lam)^{2-p} when Lam < 1 and 1 otherwise.  gamma4
    is the max of the stage-2 requirement 5 rho g0 (2 + G_max/4 + 1/G_min),
    the m = 0 corollary requirement g0 (1 + rho G_max), and the smallest
    value of the defining display

        g0 <= min{1, (2 Lam)^{2-p}/g1} gamma4 exp(2 gamma5 k M).

    The coupling threshold comes from the contradiction step that forces
    b_N <= 1:

        gamma0bar = (g1 / (2 (1+Lam)^{2(2-p)})) /
            [2 g0 + g0/g1 + g2^2 g0/g1 + g2^2 gamma4 (2 Lam)^{2-p}
                 exp(2 gamma5 k M) / g1^2]
    """
    p, g0, g1, g2, g3 = data.p, data.gamma0, data.gamma1, data.gamma2, data.gamma3
    lam, Lam, theta, k, M = data.lam, data.Lam, data.theta, data.k, data.M

    Lt = max(Lam, 1.0)
    G_min = g1 * (2.0 * Lt) ** (p - 2.0)
    G_max = g1 * Lt ** (p - 2.0)
    rho = ((lam + Lt) / (lam + Lam)) ** (2.0 - p) if Lam < 1.0 else 1.0

    if theta == 1.0:
        gamma5 = g3**2 / G_min
    else:
        gamma5 = (g3**2 * theta / G_min) * (
            4.0 * g3**2 * (1.0 - theta) / G_min**2
        ) ** ((1.0 - theta) / theta)
    kbar = min(1.0, 1.0 / (2.0 * gamma5))

    growth = math.exp(min(2.0 * gamma5 * k * M, 700.0))
    g4_display = g0 * max(1.0, g1 * (2.0 * Lam) ** (p - 2.0)) / growth
    g4_stage2 = 5.0 * rho * g0 * (2.0 + G_max / 4.0 + 1.0 / G_min)
    g4_corollary = g0 * (1.0 + rho * G_max)
    gamma4 = max(g4_display, g4_stage2, g4_corollary)

    denom = (
        2.0 * g0
        + g0 / g1
        + g2**2 * g0 / g1
        + g2**2 * gamma4 * (2.0 * Lam) ** (2.0 - p) * growth / g1**2
    )
    gamma0bar = g1 / (2.0 * (1.0 + Lam) ** (2.0 * (2.0 - p))) / denom

    return {
        "gamma4": gamma4,
        "gamma5": gamma5,
        "kbar": kbar,
        "gamma0bar": gamma0bar,
        "G_min": G_min,
        "G_max": G_max,
        "growth_factor": growth,
    }


def verify_conclusion(data: GronwallData, constants: dict | None = None) -> GronwallVerdict:
    """Full verdict: hypotheses, recursions, coupling gates, and (when all
    gates hold) the two conclusion inequalities plus the m=0-inclusive
    corollary with doubled constant.  A failed gate yields 'not applicable',
    distinct from 'violated'."""
    hyp = check_hypotheses(data)
    rec1, rec2 = check_recursions(data)
    consts = constants if constants is not None else derive_constants(data)

    coupling = {
        "h2_lt_gamma0bar_k": _lt(data.h**2, consts["gamma0bar"] * data.k),
        "k_lt_kbar": _lt(data.k, consts["kbar"]),
    }
    applicable = all(hyp.values()) and all(rec1) and all(rec2) and all(
        coupling.values()
    )

    max_b_ok = main_ok = coro_ok = None
    if applicable:
        b, a, k, M = data.b, data.a, data.k, data.M
        max_b_ok = _leq(float(b[1:].max(initial=0.0)), 1.0) and _leq(
            float(b.max()), 1.0
        )
        Gc = data.gamma1 * (data.lam + data.Lam) ** (data.p - 2.0)
        bound = consts["gamma4"] * data.h**2 * consts["growth_factor"]
        main_ok = True
        run_b2 = 0.0
        run_maxa2 = 0.0
        for N in range(1, M + 1):
            run_b2 += k * b[N] ** 2
            run_maxa2 = max(run_maxa2, a[N] ** 2)
            if not _leq(run_maxa2 + Gc * run_b2, bound):
                main_ok = False
                break
        coro_all = float((a**2).max()) + Gc * k * float((b**2).sum())
        coro_ok = _leq(coro_all, 2.0 * bound)

    return GronwallVerdict(
        hypotheses=hyp,
        recursions_first=rec1,
        recursions_second=rec2,
        constants=consts,
        coupling=coupling,
        applicable=applicable,
        max_b_ok=max_b_ok,
        main_bound_ok=main_ok,
        corollary_ok=coro_ok,
    )


# ---------------------------------------------------------------------------
# classical discrete Gronwall, standalone
# ---------------------------------------------------------------------------


def classical_gronwall_bound(alpha: float, beta, k: float, M: int):
    """Bounds alpha * exp(k sum_{j<m} beta_j) for m = 0..M.

    If x_m <= alpha + k sum_{j<m} beta_j x_j with beta_j >= 0, then
    x_m is bounded by the returned array.
    """
    beta = np.broadcast_to(np.asarray(beta, float), (M + 1,))
    csum = np.concatenate([[0.0], np.cumsum(beta[:-1]) * k])
    return alpha * np.exp(csum)


def classical_gronwall_check(rng: np.random.Generator, M: int = 60) -> float:
    """Worst violation of the classical bound on a random equality recursion.

    Builds x by x_m = alpha + k sum_{j<m} beta_j x_j (the extremal case) and
    returns max(x_m - bound_m); non-positive up to roundoff.
    """
    alpha = 10.0 ** rng.uniform(-3, 3)
    k = 10.0 ** rng.uniform(-3, 0)
    beta = rng.uniform(0.0, 3.0, M + 1)
    x = np.empty(M + 1)
    acc = 0.0
    for m in range(M + 1):
        x[m] = alpha + k * acc
        acc += beta[m] * x[m]
    bound = classical_gronwall_bound(alpha, beta, k, M)
    return float(np.max(x - bound))


# ---------------------------------------------------------------------------
# constructive instance generation (soundness testing)
# ---------------------------------------------------------------------------


def make_valid_instance(rng: np.random.Generator, M: int | None = None) -> GronwallData:
    """Random instance satisfying hypotheses, both recursions, and couplings.

    The construction keeps the stress term below s_m^2 by choosing
    b_m <= (s_m^2/g1)^{1/p} and lets a_m drift up only within the headroom
    b_m r_m + s_m^2 - g1 (lam+b_m)^{p-2} b_m^2, so both recursions hold with
    slack by design; the admissible h comes from the derived coupling.
    """
    M = int(M if M is not None else rng.integers(2, 40))
    # redraw until the derived gates admit a comfortably representable h
    for _ in range(200):
        p = rng.uniform(1.05, 2.0)
        theta = rng.uniform(0.25, 1.0)
        gamma1 = 10.0 ** rng.uniform(-1.0, 1.0)
        gamma2 = 10.0 ** rng.uniform(-1.0, 1.0)
        gamma3 = 10.0 ** rng.uniform(-1.0, 1.0)
        Lam = 10.0 ** rng.uniform(-0.3, 0.6)
        lam = rng.uniform(0.0, Lam)
        gamma0 = 10.0 ** rng.uniform(-1.0, 1.0)

        probe = GronwallData(
            k=0.5,
            M=M,
            a=np.zeros(M + 1),
            b=np.zeros(M + 1),
            r=np.zeros(M + 1),
            s=np.zeros(M + 1),
            gamma0=gamma0,
            gamma1=gamma1,
            gamma2=gamma2,
            gamma3=gamma3,
            lam=lam,
            Lam=Lam,
            theta=theta,
            p=p,
            h=1.0,
        )
        pre = derive_constants(probe)
        if pre["kbar"] < 1e-5:
            continue
        k = min(1.0, pre["kbar"]) * rng.uniform(0.2, 0.95)
        probe.k = k
        consts = derive_constants(probe)
        h_cap = min(
            math.sqrt(consts["gamma0bar"] * k) * 0.98, 0.98 / math.sqrt(gamma0)
        )
        if h_cap >= 1e-3:
            break
    else:
        raise RuntimeError("could not draw an instance with representable gates")
    h = h_cap * rng.uniform(0.3, 1.0)
    h2 = h * h

    a = np.zeros(M + 1)
    b = np.zeros(M + 1)
    r = np.zeros(M + 1)
    s = np.zeros(M + 1)
    a[0] = math.sqrt(gamma0 * h2 * rng.uniform(0.0, 0.9))
    b[0] = math.sqrt(gamma0 * h2 * rng.uniform(0.0, 0.9))

    for seq in (r, s):
        raw = rng.uniform(0.0, 1.0, M + 1)
        tot = raw.sum()
        if tot > 0:
            budget = 0.9 * gamma0 * h2 / k
            seq[:] = np.sqrt(raw / tot * budget)

    for m in range(1, M + 1):
        b[m] = rng.uniform(0.0, 1.0) * (s[m] ** 2 / gamma1) ** (1.0 / p)
        stress = _quasi_term(gamma1, lam, p, b[m])
        if rng.uniform() < 0.4:
            a[m] = a[m - 1] * rng.uniform(0.5, 1.0)
        else:
            headroom = b[m] * r[m] + s[m] ** 2 - stress
            a[m] = math.sqrt(a[m - 1] ** 2 + k * rng.uniform(0.0, 0.95) * max(headroom, 0.0))

    return GronwallData(
        k=k, M=M, a=a, b=b, r=r, s=s,
        gamma0=gamma0, gamma1=gamma1, gamma2=gamma2, gamma3=gamma3,
        lam=lam, Lam=Lam, theta=theta, p=p, h=h,
        labels={"source": "constructive-generator"},
    )


def inject_violation(rng: np.random.Generator, data: GronwallData):
    """Break exactly one condition of a valid instance; returns (data, kind)."""
    kind = rng.choice(["a0", "b0", "r_sum", "s_sum", "h_side", "recursion", "coupling"])
    d = GronwallData.from_dict(data.to_dict())
    h2 = d.h**2
    if kind == "a0":
        d.a[0] = math.sqrt(2.0 * d.gamma0 * h2)
    elif kind == "b0":
        d.b[0] = math.sqrt(2.0 * d.gamma0 * h2)
    elif kind == "r_sum":
        cur = d.k * float(np.sum(d.r**2))
        target = 2.0 * d.gamma0 * h2
        d.r = d.r * math.sqrt(target / cur) if cur > 0 else np.full_like(
            d.r, math.sqrt(target / (d.k * (d.M + 1)))
        )
    elif kind == "s_sum":
        cur = d.k * float(np.sum(d.s**2))
        target = 2.0 * d.gamma0 * h2
        d.s = d.s * math.sqrt(target / cur) if cur > 0 else np.full_like(
            d.s, math.sqrt(target / (d.k * (d.M + 1)))
        )
    elif kind == "h_side":
        d.h = 1.0 / math.sqrt(d.gamma0)
    elif kind == "recursion":
        m = int(rng.integers(1, d.M + 1))
        common = d.b[m] * d.r[m] + d.s[m] ** 2
        rhs1 = common + d.gamma2 * d.b[m - 1] * d.b[m]
        d.a[m] = math.sqrt(d.a[m - 1] ** 2 + d.k * (2.0 * rhs1 + 1.0))
    else:  # coupling
        consts = derive_constants(d)
        d.h = math.sqrt(2.0 * consts["gamma0bar"] * d.k)
    return d, str(kind)
