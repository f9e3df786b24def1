"""Linear self-attention model under the fixed sparsity pattern.

The attention parameters collapse to two d x d blocks (V_tilde, W_tilde);
the rest of the (2d+2) x (2d+2) matrices is structurally zero except for a
fixed -1 entry in W.  The weight-vector recursion

    w_{i+1} = w_i + V_tilde S (W_tilde w_i - w*)

is the primary execution path (O(k d^2)); the embedding-level forward pass
exists as a differential-testing oracle for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, DomainError, SingularityError
from .numerics import OVERFLOW_LIMIT, spectral_radius
from .taskdata import gamma0


@dataclass
class LsaParams:
    """Nonzero blocks of the sparsity-constrained attention parameters."""

    V: np.ndarray  # block V_31
    W: np.ndarray  # block W_13

    @property
    def d(self) -> int:
        return self.V.shape[0]

    def copy(self) -> "LsaParams":
        return LsaParams(self.V.copy(), self.W.copy())

    def full_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Reconstruct the full (2d+2) x (2d+2) V and W."""
        d = self.d
        n2 = 2 * d + 2
        V = np.zeros((n2, n2))
        W = np.zeros((n2, n2))
        V[d + 1 : 2 * d + 1, 0:d] = self.V
        W[0:d, d + 1 : 2 * d + 1] = self.W
        W[d, 2 * d + 1] = -1.0
        return V, W


@dataclass
class Rollout:
    w_hats: list[np.ndarray]  # w_0 .. w_k
    spectral_log: list[float] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.w_hats[-1]


def pretrained_init(sigma0: np.ndarray, n: int) -> LsaParams:
    """Population-limit pretrained parameters: V = -Gamma0^{-1}, W = I."""
    g = gamma0(sigma0, n)
    d = g.shape[0]
    try:
        g_inv = np.linalg.solve(g, np.eye(d))
    except np.linalg.LinAlgError as exc:
        raise SingularityError(
            "Gamma0 is singular; the pretrain covariance has zero trace"
        ) from exc
    return LsaParams(V=-g_inv, W=np.eye(d))


def _check_overflow(w: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > OVERFLOW_LIMIT:
        raise DivergenceError(
            f"rollout overflow at step {step} (unstable regime)", step=step
        )


def cot_rollout(
    params: LsaParams,
    S: np.ndarray,
    w_star: np.ndarray,
    k: int,
    w0: np.ndarray | None = None,
    track_spectral: bool = False,
) -> Rollout:
    """Iterate the weight recursion k times from w0 (defaults to zero)."""
    S = np.asarray(S, dtype=float)
    w_star = np.asarray(w_star, dtype=float)
    d = params.d
    if S.shape != (d, d) or w_star.shape != (d,):
        raise DomainError("inconsistent dimensions in cot_rollout")
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float).copy()
    hats = [w.copy()]
    log: list[float] = []
    rho_step = None
    if track_spectral:
        rho_step = spectral_radius(np.eye(d) + params.V @ S @ params.W)
    VS = params.V @ S
    for i in range(k):
        w = w + VS @ (params.W @ w - w_star)
        _check_overflow(w, i + 1)
        hats.append(w.copy())
        if track_spectral:
            log.append(rho_step)
    return Rollout(w_hats=hats, spectral_log=log)


def lsa_forward_embedding(
    params: LsaParams,
    X: np.ndarray,
    y: np.ndarray,
    k: int,
    w0: np.ndarray | None = None,
) -> Rollout:
    """Full embedding-level forward pass with column concatenation.

    Builds the (2d+2)-row embedding [x-block; y-row; w-block; ones-row],
    applies f(Z) = Z + V Z (Z^T W Z) / n to the last column k times, appending
    the full output column each step, and reads the weight rows of each
    appended column.  Must agree with :func:`cot_rollout` on S = X X^T / n.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d, n = X.shape
    if y.shape != (n,):
        raise DomainError("y must have one label per prompt column")
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float)
    V, W = params.full_matrices()
    Z = np.zeros((2 * d + 2, n + 1))
    Z[0:d, 0:n] = X
    Z[d, 0:n] = y
    Z[d + 1 : 2 * d + 1, n] = w
    Z[2 * d + 1, n] = 1.0
    hats = [w.copy()]
    for i in range(k):
        last = Z[:, -1]
        out = last + V @ (Z @ (Z.T @ (W @ last))) / n
        _check_overflow(out, i + 1)
        Z = np.hstack([Z, out[:, None]])
        hats.append(out[d + 1 : 2 * d + 1].copy())
    return Rollout(w_hats=hats)
