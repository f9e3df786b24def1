"""Asymptotic post-test error predictor for the two-block covariance family.

Works in the proportional regime (d, m, n, B all large with beta = B/d,
mu1 = m/d, gamma = d/n fixed).  The predictor F(beta) combines a bias term
driven by the random projection onto the post-training data span with three
variance trace functionals, all parameterized by the fixed-point root q of

    beta = sum_k mu_k a_k^2 q / (1 + a_k^2 q).

F has a pole at beta = 1 (the interpolation threshold) and, for beta >= 1,
the projection saturates: w_k = 1, v_k = 0, no cross-subspace leakage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, PoleError

POLE_GUARD = 1e-6
_Q_RESIDUAL = 1e-12


@dataclass(frozen=True)
class TheoryInputs:
    rho: float    # pretrain scale on the first block
    r: float      # interference level on the second block
    eta: float    # supervised-path rate
    gamma: float  # aspect ratio d/n
    mu1: float    # first-block fraction m/d
    beta: float   # data aspect ratio B/d

    def __post_init__(self):
        if self.rho < 0 or self.r < 0:
            raise DomainError("rho and r must be nonnegative")
        if not (0 < self.eta < 1):
            raise DomainError("eta must lie in (0, 1)")
        if self.gamma <= 0:
            raise DomainError("gamma must be positive")
        if not (0 < self.mu1 < 1):
            raise DomainError("mu1 must lie in (0, 1)")
        if self.beta < 0:
            raise DomainError("beta must be nonnegative")

    @property
    def mu2(self) -> float:
        return 1.0 - self.mu1


@dataclass(frozen=True)
class TheoryConstants:
    kappa: float
    a1: float
    a2: float
    Sigma1: float
    Sigma2: float
    alpha1: float
    alpha2: float
    delta1: float
    delta2: float
    delta_t1: float
    delta_t2: float
    g1: float
    g2: float
    s1: float
    s2: float
    Sigma_bar: float


@dataclass(frozen=True)
class TheoryComponents:
    q: float
    w1: float
    w2: float
    v1: float
    v2: float
    T12: float
    Bias: float
    T_inv: float
    T_inv_Sigma: float
    T_var: float
    T_var_Sigma: float
    F: float


def solve_q(beta: float, mu: tuple[float, float],
            a_sq: tuple[float, float]) -> float:
    """Nonnegative root of beta = sum_k mu_k a_k^2 q / (1 + a_k^2 q).

    Bisection on the strictly increasing map, bracket doubled until it
    overshoots; safe arbitrarily close to the beta -> 1 blow-up where a
    Newton step would overshoot.  Returns inf for beta >= 1 (saturation:
    callers use w_k = 1).
    """
    mu1, mu2 = mu
    a1_sq, a2_sq = a_sq
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    if beta >= 1.0:
        return math.inf
    if beta == 0.0:
        return 0.0
    if a1_sq <= 0 and a2_sq <= 0:
        raise DomainError("beta > 0 needs at least one positive a_k^2")

    def rank_fraction(q: float) -> float:
        tot = 0.0
        for mu_k, ak_sq in ((mu1, a1_sq), (mu2, a2_sq)):
            if ak_sq > 0:
                tot += mu_k * ak_sq * q / (1.0 + ak_sq * q)
        return tot

    # supremum of the rank fraction; unreachable beta has no finite root
    sup = (mu1 if a1_sq > 0 else 0.0) + (mu2 if a2_sq > 0 else 0.0)
    if beta >= sup:
        raise DomainError(
            f"beta = {beta} exceeds the reachable rank fraction {sup} "
            "(a zero a_k^2 caps the span)"
        )
    hi = 1.0
    for _ in range(2000):
        if rank_fraction(hi) > beta:
            break
        hi *= 2.0
    else:
        raise DomainError("failed to bracket the fixed point")
    lo = 0.0
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        f = rank_fraction(mid)
        if abs(f - beta) <= _Q_RESIDUAL:
            return mid
        if f < beta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def theory_constants(inp: TheoryInputs, allow_r_pole: bool = False) -> TheoryConstants:
    """Block scalars of the deterministic operators in the proportional limit."""
    if inp.r == 0 and not allow_r_pole:
        raise PoleError("r = 0 puts a pole in delta_2; pass allow_r_pole for "
                        "limit analysis")
    rho, r, eta, gamma, mu1 = inp.rho, inp.r, inp.eta, inp.gamma, inp.mu1
    mu2 = inp.mu2
    kappa = gamma * (mu1 * rho + 1.0 - mu1)
    a1 = eta * (rho + 1.0)
    a2 = r
    Sigma1 = rho + 1.0
    Sigma2 = 1.0
    alpha1 = (kappa - 1.0) / (rho + kappa)
    alpha2 = kappa / (kappa + 1.0)
    delta1 = (1.0 - kappa) / (rho + kappa)
    delta_t1 = delta1 / Sigma1
    delta2 = 1.0 / (1.0 + kappa) - (eta / r if r > 0 else math.inf)
    delta_t2 = delta2
    g1 = -1.0 / (rho + kappa)
    g2 = -1.0 / (1.0 + kappa)
    s_common = mu1 * a1 + mu2 * a2
    return TheoryConstants(
        kappa=kappa, a1=a1, a2=a2, Sigma1=Sigma1, Sigma2=Sigma2,
        alpha1=alpha1, alpha2=alpha2, delta1=delta1, delta2=delta2,
        delta_t1=delta_t1, delta_t2=delta_t2, g1=g1, g2=g2,
        s1=s_common * a1, s2=s_common * a2,
        Sigma_bar=mu1 * Sigma1 + mu2 * Sigma2,
    )


def _weights(inp: TheoryInputs, c: TheoryConstants):
    """(q, w, v, T12) with the beta >= 1 saturation branch folded in."""
    if inp.beta >= 1.0:
        return math.inf, (1.0, 1.0), (0.0, 0.0), 0.0
    q = solve_q(inp.beta, (inp.mu1, inp.mu2), (c.a1**2, c.a2**2))
    w = tuple(a**2 * q / (1.0 + a**2 * q) if a > 0 else 0.0 for a in (c.a1, c.a2))
    v = tuple(wk * (1.0 - wk) for wk in w)
    den = inp.mu1 * v[0] + inp.mu2 * v[1]
    T12 = inp.mu1 * inp.mu2 * v[0] * v[1] / den if den > 0 else 0.0
    return q, w, v, T12


def theory_components(inp: TheoryInputs) -> TheoryComponents:
    """All asymptotic quantities of the error predictor at one (beta, ...)."""
    if abs(inp.beta - 1.0) <= POLE_GUARD:
        raise PoleError(f"beta = {inp.beta} is inside the pole guard band "
                        f"|beta - 1| <= {POLE_GUARD}")
    c = theory_constants(inp)
    mu = (inp.mu1, inp.mu2)
    alpha = (c.alpha1, c.alpha2)
    delta = (c.delta1, c.delta2)
    delta_t = (c.delta_t1, c.delta_t2)
    g = (c.g1, c.g2)
    s = (c.s1, c.s2)
    Sig = (c.Sigma1, c.Sigma2)
    a_sq = (c.a1**2, c.a2**2)

    q, w, v, T12 = _weights(inp, c)

    bias = sum(
        mu[k] * (alpha[k] ** 2 * (1.0 - w[k]) + (alpha[k] + delta[k]) ** 2 * w[k])
        for k in range(2)
    ) + T12 * (delta_t[1] ** 2 - delta_t[0] ** 2) * (Sig[0] ** 2 - Sig[1] ** 2)

    if inp.beta < 1.0:
        if q == 0.0:
            T_inv = 0.0
            T_inv_Sigma = 0.0
        else:
            den = sum(mu[k] * w[k] ** 2 / a_sq[k] for k in range(2))
            T_inv = q * sum(mu[k] * Sig[k] ** 2 * w[k] ** 2 / a_sq[k]
                            for k in range(2)) / den
            T_inv_Sigma = q * sum(mu[k] * Sig[k] * w[k] ** 2 / a_sq[k]
                                  for k in range(2)) / den
    else:
        T_inv = sum(mu[k] * Sig[k] ** 2 / a_sq[k] for k in range(2)) / (inp.beta - 1.0)
        T_inv_Sigma = sum(mu[k] * Sig[k] / a_sq[k] for k in range(2)) / (inp.beta - 1.0)

    def var_functional(weight):
        # cross-block leakage enters through tr(D Pi X Pi D) with X diagonal,
        # whose off-diagonal blocks carry coefficient d1^2 x2 + d2^2 x1;
        # combined with T_kk = mu_k w_k - T12 this factors as below
        return sum(
            mu[k] * weight[k] * (g[k] ** 2 * (1.0 - w[k])
                                 + (g[k] + delta_t[k]) ** 2 * w[k])
            for k in range(2)
        ) - T12 * (delta_t[0] ** 2 - delta_t[1] ** 2) * (weight[0] - weight[1])

    T_var = var_functional(s)
    T_var_Sigma = var_functional(Sig)

    F = (bias + inp.gamma * T_inv * T_var + inp.gamma * c.Sigma_bar * T_var_Sigma
         + inp.gamma**2 * c.Sigma_bar * T_inv_Sigma * T_var)
    return TheoryComponents(
        q=q, w1=w[0], w2=w[1], v1=v[0], v2=v[1], T12=T12, Bias=bias,
        T_inv=T_inv, T_inv_Sigma=T_inv_Sigma, T_var=T_var,
        T_var_Sigma=T_var_Sigma, F=F,
    )


def theory_endpoints(inp: TheoryInputs) -> tuple[float, float, float]:
    """(F(0), F at beta -> inf, F'(0)).

    F(0) keeps only the un-projected bias and the pretrained variance floor;
    the beta -> inf limit replaces every block scalar with its saturated
    (w_k = 1) value.  F'(0) assembles the bias derivative with the
    gamma-scaled variance-penalty derivatives via the chain rule through the
    fixed point: q'(0) = 1/c, w_k'(0) = a_k^2 / c, c = mu1 a1^2 + mu2 a2^2.
    """
    if inp.r == 0:
        raise PoleError("endpoint formulas require r > 0")
    c = theory_constants(inp)
    mu = (inp.mu1, inp.mu2)
    alpha = (c.alpha1, c.alpha2)
    delta = (c.delta1, c.delta2)
    delta_t = (c.delta_t1, c.delta_t2)
    g = (c.g1, c.g2)
    s = (c.s1, c.s2)
    Sig = (c.Sigma1, c.Sigma2)
    a_sq = (c.a1**2, c.a2**2)
    gam, sbar = inp.gamma, c.Sigma_bar

    F0 = sum(mu[k] * alpha[k] ** 2 for k in range(2)) + gam * sbar * sum(
        mu[k] * Sig[k] * g[k] ** 2 for k in range(2)
    )
    Finf = sum(mu[k] * (alpha[k] + delta[k]) ** 2 for k in range(2)) + gam * sbar * sum(
        mu[k] * Sig[k] * (g[k] + delta_t[k]) ** 2 for k in range(2)
    )

    cc = mu[0] * a_sq[0] + mu[1] * a_sq[1]
    bias_prime = (
        sum(mu[k] * a_sq[k] * (2.0 * alpha[k] * delta[k] + delta[k] ** 2)
            for k in range(2)) / cc
        + (mu[0] * mu[1] * a_sq[0] * a_sq[1] / cc**2)
        * (delta_t[1] ** 2 - delta_t[0] ** 2) * (Sig[0] ** 2 - Sig[1] ** 2)
    )
    # small-q expansions: w_k ~ a_k^2 q, so the inverse-trace functionals
    # open linearly with slope sum mu_k a_k^2 X_k / c
    T_inv_prime = sum(mu[k] * a_sq[k] * Sig[k] ** 2 for k in range(2)) / cc**2
    T_inv_Sigma_prime = sum(mu[k] * a_sq[k] * Sig[k] for k in range(2)) / cc**2
    T12_prime = mu[0] * mu[1] * a_sq[0] * a_sq[1] / cc**2
    T_var0 = sum(mu[k] * s[k] * g[k] ** 2 for k in range(2))
    T_var_Sigma_prime = sum(
        mu[k] * Sig[k] * (a_sq[k] / cc)
        * ((g[k] + delta_t[k]) ** 2 - g[k] ** 2)
        for k in range(2)
    ) - T12_prime * (delta_t[0] ** 2 - delta_t[1] ** 2) * (Sig[0] - Sig[1])
    Fprime0 = (
        bias_prime
        + gam * (T_inv_prime * T_var0 + sbar * T_var_Sigma_prime)
        + gam**2 * sbar * T_inv_Sigma_prime * T_var0
    )
    return F0, Finf, Fprime0
