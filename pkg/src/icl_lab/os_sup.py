"""Outcome supervision: loss on the final reasoning step only, its analytic
gradient, the curvature-bound diagnostic, and a GD trainer with stability
telemetry.

The transition matrix M_tau = I + V S_tau controls everything: gradients
carry M_tau^k, so they vanish geometrically in k when all spectral radii sit
below 1 and explode when any sits above.  The trainer logs per-prompt radii
each step so both regimes are observable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, DomainError
from .lsa import LsaParams, cot_rollout
from .numerics import OVERFLOW_LIMIT, spectral_radius
from .taskdata import PromptBatch


@dataclass
class OsConfig:
    k: int = 3
    gamma: float = 1e-2
    steps: int = 100
    clip: float | None = None  # gradient-norm cap; off by default
    w_fixed: bool = True
    telemetry_every: int = 1  # 0 disables per-step stability reports

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.gamma < 0:
            raise ConfigError("gamma must be nonnegative")


@dataclass
class StabilityReport:
    spectral_radii: np.ndarray
    fraction_unstable: float
    hessian_bound: float
    grad_norm: float


def _matpow_apply(M: np.ndarray, w: np.ndarray, k: int) -> list[np.ndarray]:
    """[w, Mw, ..., M^k w] with an overflow guard."""
    out = [w]
    v = w
    for i in range(k):
        v = M @ v
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > OVERFLOW_LIMIT:
            raise DivergenceError(f"matrix power overflow at exponent {i + 1}",
                                  step=i + 1)
        out.append(v)
    return out


def os_loss(params: LsaParams, batch: PromptBatch, k: int) -> float:
    """General (V, W) outcome-supervision loss.

    (1 / 2B) sum_tau || (I + sum_{i=0..k-1} (V S W + I)^i V S) w* ||^2,
    which equals the final-step rollout error from a zero start.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    S_list = batch.require_s()
    V, W = params.V, params.W
    total = 0.0
    for tau in range(batch.B):
        w = batch.Omega[:, tau]
        VS = V @ S_list[tau]
        T = VS @ W + np.eye(params.d)
        u = VS @ w
        acc = u.copy()
        v = u
        for _ in range(k - 1):
            v = T @ v
            if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > OVERFLOW_LIMIT:
                raise DivergenceError("OS loss overflow (unstable regime)")
            acc += v
        r = w + acc
        total += float(r @ r)
    return total / (2.0 * batch.B)


def os_loss_power_form(V: np.ndarray, batch: PromptBatch, k: int) -> float:
    """W = I specialization: (1 / 2B) sum_tau ||(I + V S_tau)^k w*||^2."""
    S_list = batch.require_s()
    d = V.shape[0]
    total = 0.0
    for tau in range(batch.B):
        M = np.eye(d) + V @ S_list[tau]
        v = _matpow_apply(M, batch.Omega[:, tau], k)[-1]
        total += float(v @ v)
    return total / (2.0 * batch.B)


def os_loss_rollout(params: LsaParams, batch: PromptBatch, k: int) -> float:
    """Rollout-based cross-check: mean squared final-step error / 2."""
    S_list = batch.require_s()
    total = 0.0
    for tau in range(batch.B):
        roll = cot_rollout(params, S_list[tau], batch.Omega[:, tau], k)
        r = roll.final - batch.Omega[:, tau]
        total += float(r @ r)
    return total / (2.0 * batch.B)


def os_grad(V: np.ndarray, batch: PromptBatch, k: int) -> np.ndarray:
    """Analytic gradient in the W = I regime.

    grad = (1/B) sum_tau sum_{j=0..k-1}
           (M^T)^j M^k w* w*^T (M^T)^{k-1-j} S^T,   M = I + V S_tau.
    Assembled from matrix-vector products only, O(k d^2) per prompt.
    """
    S_list = batch.require_s()
    d = V.shape[0]
    grad = np.zeros((d, d))
    for tau in range(batch.B):
        S = S_list[tau]
        M = np.eye(d) + V @ S
        w = batch.Omega[:, tau]
        powers = _matpow_apply(M, w, k)  # M^i w, i = 0..k
        a = powers[k]  # (M^T)^0 M^k w
        for j in range(k):
            # row factor: w^T (M^T)^{k-1-j} S^T = (S M^{k-1-j} w)^T
            grad += np.outer(a, S @ powers[k - 1 - j])
            a = M.T @ a
            if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > OVERFLOW_LIMIT:
                raise DivergenceError("gradient overflow (unstable regime)")
    return grad / batch.B


def os_hessian_bound(V: np.ndarray, batch: PromptBatch, k: int) -> float:
    """Near-minimum curvature proxy:
    (1/B) sum_tau k^2 rho(M_tau)^{2k-2} ||w*||^2 ||S_tau||_op."""
    S_list = batch.require_s()
    d = V.shape[0]
    total = 0.0
    for tau in range(batch.B):
        S = S_list[tau]
        rho = spectral_radius(np.eye(d) + V @ S)
        w = batch.Omega[:, tau]
        s_op = float(np.linalg.norm(S, 2))
        total += k**2 * rho ** (2 * k - 2) * float(w @ w) * s_op
    return total / batch.B


def prompt_spectral_radii(V: np.ndarray, batch: PromptBatch) -> np.ndarray:
    S_list = batch.require_s()
    d = V.shape[0]
    return np.array(
        [spectral_radius(np.eye(d) + V @ S_list[tau]) for tau in range(batch.B)]
    )


def stability_report(V: np.ndarray, batch: PromptBatch, k: int,
                     grad: np.ndarray | None = None) -> StabilityReport:
    radii = prompt_spectral_radii(V, batch)
    if grad is None:
        grad = os_grad(V, batch, k)
    return StabilityReport(
        spectral_radii=radii,
        fraction_unstable=float(np.mean(radii > 1.0)),
        hessian_bound=os_hessian_bound(V, batch, k),
        grad_norm=float(np.linalg.norm(grad)),
    )


def os_gd(
    init: LsaParams, batch: PromptBatch, cfg: OsConfig
) -> tuple[LsaParams, list[float], list[StabilityReport]]:
    """Plain GD on the OS loss with per-step stability telemetry.

    Raises DivergenceError on overflow, carrying the last stable iterate.
    Gradient clipping is available but off by default: the instability near
    the edge of the stable region is something to observe, not suppress.
    """
    if not cfg.w_fixed:
        raise ConfigError(
            "analytic OS training fixes W = I; use os_gd_joint_fd for "
            "experimental joint updates"
        )
    V = init.V.copy()
    d = init.d
    losses: list[float] = []
    reports: list[StabilityReport] = []
    for t in range(cfg.steps):
        try:
            g = os_grad(V, batch, cfg.k)
            loss = os_loss_power_form(V, batch, cfg.k)
        except DivergenceError as exc:
            raise DivergenceError(
                f"OS training diverged at step {t}", step=t,
                last_stable=LsaParams(V=V, W=np.eye(d)),
            ) from exc
        if not np.isfinite(loss):
            raise DivergenceError(
                f"non-finite OS loss at step {t}", step=t,
                last_stable=LsaParams(V=V, W=np.eye(d)),
            )
        if cfg.clip is not None:
            gn = float(np.linalg.norm(g))
            if gn > cfg.clip:
                g = g * (cfg.clip / gn)
        losses.append(loss)
        if cfg.telemetry_every and t % cfg.telemetry_every == 0:
            reports.append(stability_report(V, batch, cfg.k, grad=g))
        V = V - cfg.gamma * g
    return LsaParams(V=V, W=np.eye(d)), losses, reports


def os_gd_joint_fd(
    init: LsaParams, batch: PromptBatch, cfg: OsConfig, h: float = 1e-6
) -> tuple[LsaParams, list[float]]:
    """Experimental joint (V, W) descent via central finite differences.

    Not backed by the analysis (which fixes W = I); provided for exploration
    only.  O(d^2) loss evaluations per step, so keep d small.
    """
    params = init.copy()
    losses: list[float] = []
    for _ in range(cfg.steps):
        losses.append(os_loss(params, batch, cfg.k))
        for mat in (params.V, params.W):
            g = np.zeros_like(mat)
            for i in range(mat.shape[0]):
                for j in range(mat.shape[1]):
                    orig = mat[i, j]
                    mat[i, j] = orig + h
                    lp = os_loss(params, batch, cfg.k)
                    mat[i, j] = orig - h
                    lm = os_loss(params, batch, cfg.k)
                    mat[i, j] = orig
                    g[i, j] = (lp - lm) / (2 * h)
            mat -= cfg.gamma * g
    return params, losses
