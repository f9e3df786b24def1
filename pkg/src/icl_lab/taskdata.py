"""Covariance family and prompt-batch construction.

The pipeline distinguishes four diagonal two-block covariances: the pretrain
covariance (first block scaled by rho), the adaptation shift (mass on the
first block only), the post-test covariance (their sum), and the post-train
covariance (eta * posttest on the first block, interference level r on the
rest).  Two-block specs are stored as scalars and materialized lazily; a
custom dense escape hatch covers general covariance structures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .numerics import RngStream, psd_root

KINDS = ("pretrain", "shift", "posttest", "posttrain", "custom")


@dataclass(frozen=True)
class CovarianceSpec:
    d: int
    m: int
    rho: float = 0.1
    r: float = 0.0
    eta: float = 0.2
    kind: str = "pretrain"
    dense: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown covariance kind {self.kind!r}")
        if self.kind == "custom":
            if self.dense is None:
                raise DomainError("custom kind requires a dense matrix")
            return
        if not (0 < self.m < self.d):
            raise DomainError("require 0 < m < d")
        if self.rho < 0 or self.r < 0:
            raise DomainError("rho and r must be nonnegative")
        if not (0 < self.eta < 1):
            raise DomainError("eta must lie in (0, 1)")


def materialize(spec: CovarianceSpec) -> np.ndarray:
    """d x d matrix for the named kind; posttest is pretrain + shift identically."""
    if spec.kind == "custom":
        return np.array(spec.dense, dtype=float)
    diag = np.empty(spec.d)
    if spec.kind == "pretrain":
        diag[: spec.m] = spec.rho
        diag[spec.m :] = 1.0
    elif spec.kind == "shift":
        diag[: spec.m] = 1.0
        diag[spec.m :] = 0.0
    elif spec.kind == "posttest":
        diag[: spec.m] = spec.rho + 1.0
        diag[spec.m :] = 1.0
    else:  # posttrain
        diag[: spec.m] = spec.eta * (spec.rho + 1.0)
        diag[spec.m :] = spec.r
    return np.diag(diag)


def gamma0(sigma0: np.ndarray, n: int) -> np.ndarray:
    """Pretraining-induced operator: (1 + 1/n) Sigma0 + (tr(Sigma0)/n) I."""
    sigma0 = np.asarray(sigma0, dtype=float)
    if n < 1:
        raise DomainError("prompt length n must be >= 1")
    d = sigma0.shape[0]
    return (1.0 + 1.0 / n) * sigma0 + (np.trace(sigma0) / n) * np.eye(d)


@dataclass
class PromptBatch:
    """B prompts: true weights, per-prompt empirical covariances, derived Phi.

    ``S_list`` (shape (B, d, d)) and ``X_list`` (shape (B, d, n)) are optional:
    at d = n = 600, B = 2000 they dominate memory, and every downstream
    operation that only needs Phi can run without them.  ``phi`` is always
    populated at generation time (columns S_tau @ w_tau).
    """

    B: int
    n: int
    Omega: np.ndarray
    phi: np.ndarray
    S_list: np.ndarray | None = None
    X_list: np.ndarray | None = None
    seed: RngStream | None = None

    @property
    def d(self) -> int:
        return self.Omega.shape[0]

    def require_s(self) -> np.ndarray:
        if self.S_list is None:
            raise DomainError(
                "this operation needs per-prompt covariances; "
                "regenerate the batch with store_s=True"
            )
        return self.S_list


def gen_prompt_batch(
    A: np.ndarray,
    B: int,
    n: int,
    rng: RngStream,
    store_s: bool = True,
    store_x: bool = False,
) -> PromptBatch:
    """Draw w*_tau ~ N(0, I_d) and X_tau with columns ~ N(0, A).

    Prompt tau uses sub-stream ``rng.child(1 + tau)`` (stream 0 draws Omega),
    so generation is reproducible and parallelizable across prompts.  The
    draw sequence does not depend on the store flags.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if B < 1 or n < 1:
        raise DomainError("B and n must be >= 1")
    root = psd_root(A)  # d x k, k = rank(A)
    k = root.shape[1]
    Omega = rng.child(0).generator().standard_normal((d, B))
    phi = np.zeros((d, B))
    S_list = np.zeros((B, d, d)) if store_s else None
    X_list = np.zeros((B, d, n)) if store_x else None
    for tau in range(B):
        gen = rng.child(1 + tau).generator()
        z = gen.standard_normal((k, n))
        w = Omega[:, tau]
        if store_s or store_x:
            x = root @ z if k else np.zeros((d, n))
            phi[:, tau] = x @ (x.T @ w) / n
            if store_s:
                S_list[tau] = x @ x.T / n
            if store_x:
                X_list[tau] = x
        elif k:
            # phi = X X^T w / n with X = root @ z, assembled as matvecs so
            # the d x n sample matrix is never formed
            phi[:, tau] = root @ (z @ (z.T @ (root.T @ w))) / n
    return PromptBatch(B=B, n=n, Omega=Omega, phi=phi, S_list=S_list,
                       X_list=X_list, seed=rng)


def build_phi(batch: PromptBatch) -> tuple[np.ndarray, np.ndarray]:
    """Phi with columns S_tau @ w*_tau, and the Gram matrix M = Phi Phi^T.

    Recomputes from S_list when present (the canonical definition); otherwise
    uses the columns cached at generation time.
    """
    if batch.S_list is not None:
        phi = np.einsum("tij,jt->it", batch.S_list, batch.Omega)
    else:
        phi = batch.phi
    return phi, phi @ phi.T
