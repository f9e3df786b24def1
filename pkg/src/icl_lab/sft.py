"""SFT post-training: loss with exponentially converging targets, closed-form
minimal-deviation minimizer, gradient descent with the guaranteed rate, and
the infinite-prompt population limit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError, DomainError
from .lsa import LsaParams
from .numerics import pinv
from .taskdata import PromptBatch, build_phi


@dataclass
class SftConfig:
    eta: float = 0.2
    k: int = 1
    gamma: float | None = None  # None -> B / (c_k * lambda_max(M))
    steps: int = 200
    strict_step: bool = True

    def __post_init__(self):
        if not (0 < self.eta < 1):
            raise ConfigError("eta must lie in (0, 1)")
        if self.k < 1:
            raise ConfigError("k must be >= 1")


def c_k(eta: float, k: int) -> float:
    """sum_{i=0..k} (1-eta)^(2i), evaluated in closed form termwise."""
    rho = 1.0 - eta
    return float(sum(rho ** (2 * i) for i in range(k + 1)))


def sft_loss(params: LsaParams, batch: PromptBatch, cfg: SftConfig) -> float:
    """General (V, W) SFT loss via the per-step residuals.

    Residual at step i for prompt tau:
        R_i = V S (W - I) w* - rho^i (V S W + eta I) w*,  rho = 1 - eta.
    Loss = (1 / 2B) sum_tau sum_{i=0..k} ||R_i||^2.
    """
    S_list = batch.require_s()
    rho = 1.0 - cfg.eta
    V, W = params.V, params.W
    total = 0.0
    for tau in range(batch.B):
        w = batch.Omega[:, tau]
        VS = V @ S_list[tau]
        base = VS @ (W @ w - w)          # V S (W - I) w*
        geom = VS @ (W @ w) + cfg.eta * w  # (V S W + eta I) w*
        for i in range(cfg.k + 1):
            r = base - rho**i * geom
            total += float(r @ r)
    return total / (2.0 * batch.B)


def sft_loss_closed_form(V: np.ndarray, batch: PromptBatch, cfg: SftConfig) -> float:
    """W = I specialization: (c_k / 2B) ||V Phi + eta Omega||_F^2."""
    phi, _ = build_phi(batch)
    resid = V @ phi + cfg.eta * batch.Omega
    return c_k(cfg.eta, cfg.k) / (2.0 * batch.B) * float(np.sum(resid * resid))


def sft_closed_form(
    batch: PromptBatch, gamma0_inv: np.ndarray, eta: float
) -> LsaParams:
    """Minimal-deviation zero-loss minimizer.

    V* = -eta Omega Phi^+ - Gamma0^{-1} (I - Phi Phi^+),  W* = I.
    Solves V Phi = -eta Omega while staying closest (Frobenius) to the
    pretrained initialization on the orthogonal complement of range(Phi).
    """
    phi, _ = build_phi(batch)
    d = phi.shape[0]
    phi_pinv = pinv(phi)
    proj = phi @ phi_pinv
    V = -eta * batch.Omega @ phi_pinv - gamma0_inv @ (np.eye(d) - proj)
    return LsaParams(V=V, W=np.eye(d))


def sft_gd(
    init: LsaParams, batch: PromptBatch, cfg: SftConfig
) -> tuple[LsaParams, list[tuple[float, float]]]:
    """Full-batch GD on the W = I slice of the SFT loss.

    Auto step size gamma = B / (c_k * lambda_max(M)); any gamma beyond
    2B / (c_k * lambda_max(M)) diverges, and is rejected up front when
    ``strict_step`` is set.  The trajectory records (loss, ||V_t - V*||_F)
    per step, with V* the closed-form minimizer, so the guaranteed
    contraction rate is directly assertable.
    """
    phi, M = build_phi(batch)
    B = batch.B
    ck = c_k(cfg.eta, cfg.k)
    lam_max = float(np.max(np.linalg.eigvalsh(M)))
    if lam_max <= 0:
        raise DomainError("M has no positive eigenvalue; nothing to descend")
    gamma = cfg.gamma if cfg.gamma is not None else B / (ck * lam_max)
    if cfg.strict_step and gamma >= 2.0 * B / (ck * lam_max):
        raise ConfigError(
            f"step size {gamma:.4g} violates the stability bound "
            f"{2.0 * B / (ck * lam_max):.4g}"
        )
    # GD is analyzed from the pretrained init V0 = -Gamma0^{-1}, so the
    # minimizer's Gamma0^{-1} is recoverable from the init itself.
    opt = sft_closed_form(batch, -init.V, cfg.eta)
    V = init.V.copy()
    traj: list[tuple[float, float]] = []
    d0 = float(np.linalg.norm(V - opt.V))
    for t in range(cfg.steps):
        resid = V @ phi + cfg.eta * batch.Omega
        V = V - (gamma * ck / B) * (resid @ phi.T)
        loss = ck / (2.0 * B) * float(np.sum((V @ phi + cfg.eta * batch.Omega) ** 2))
        dist = float(np.linalg.norm(V - opt.V))
        traj.append((loss, dist))
        if not np.isfinite(dist) or dist > max(1e6 * (d0 + 1.0), 1e12):
            raise DivergenceError(
                f"SFT gradient descent diverged at step {t}", step=t,
                last_stable=LsaParams(V=V, W=np.eye(init.d)),
            )
    return LsaParams(V=V, W=np.eye(init.d)), traj


def sft_population_limit(
    A: np.ndarray, gamma0_inv: np.ndarray, eta: float, n: int
) -> np.ndarray:
    """Infinite-prompt limit of the closed-form minimizer.

    V_inf = -eta ((n+1)/n A + tr(A)/n A A^+)^+ - Gamma0^{-1} (I - A A^+).
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    A_pinv = pinv(A)
    core = (n + 1) / n * A + (np.trace(A) / n) * (A @ A_pinv)
    return -eta * pinv(core) - gamma0_inv @ (np.eye(d) - A @ A_pinv)


def sft_first_order(
    batch: PromptBatch, A: np.ndarray, gamma0_inv: np.ndarray, eta: float
) -> np.ndarray:
    """First-order approximation of the closed-form minimizer.

    Splits Phi = A Omega + E and expands the pseudoinverse to first order in
    the covariance noise E:
        V_S = -eta Omega M^+ - Gamma0^{-1} (I - M M^+),   M = A Omega
        V_N = -V_S E M^+
    This is the operator whose asymptotic post-test error the theory module
    predicts exactly.
    """
    phi, _ = build_phi(batch)
    d = phi.shape[0]
    M = np.asarray(A, dtype=float) @ batch.Omega
    M_pinv = pinv(M)
    V_S = -eta * batch.Omega @ M_pinv - gamma0_inv @ (np.eye(d) - M @ M_pinv)
    V_N = -V_S @ (phi - M) @ M_pinv
    return V_S + V_N
