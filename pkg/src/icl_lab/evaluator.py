"""Post-test error: the exact single-step closed form and a Monte-Carlo
estimator over sampled test prompts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .lsa import LsaParams
from .numerics import OVERFLOW_LIMIT, RngStream, psd_root

_CHUNK_BUDGET = 2 ** 24  # floats per sampled chunk of test prompts


@dataclass
class ErrorReport:
    exact: float | None
    mc_mean: float
    mc_stderr: float
    trials: int
    k_used: int
    diverged: int = 0


def posttest_error_exact(V: np.ndarray, Sigma: np.ndarray, n: int) -> float:
    """E ||w_hat - w*||^2 for the one-step prediction w_hat = -(1/n) V X X^T w*.

    Closed form:
        ||I + V Sigma||_F^2
        + (1/n) (tr(V Sigma^2 V^T) + tr(V Sigma V^T) tr(Sigma)).
    Exact for k = 1, W = I, zero weight initialization.
    """
    V = np.asarray(V, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    d = V.shape[0]
    if n < 1:
        raise DomainError("n must be >= 1")
    VS = V @ Sigma
    term1 = float(np.sum((np.eye(d) + VS) ** 2))
    t_a = float(np.trace(VS @ Sigma @ V.T))
    t_b = float(np.trace(VS @ V.T)) * float(np.trace(Sigma))
    return term1 + (t_a + t_b) / n


def posttest_error_mc(
    params: LsaParams,
    Sigma: np.ndarray,
    n: int,
    k: int,
    trials: int,
    rng: RngStream,
) -> ErrorReport:
    """Monte-Carlo post-test error over sampled prompts.

    Samples X with columns ~ N(0, Sigma) and w* ~ N(0, I), rolls the weight
    recursion k steps from zero, and averages ||w_k - w*||^2.  Diverged
    trials (overflow past 1e150) are excluded from the mean but counted.

    Trials are drawn in fixed-size chunks, one sub-stream per chunk, and
    reduced in chunk order, so the report is deterministic for a given
    (Sigma, n, k, trials, rng) irrespective of any outer parallelism.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    Sigma = np.asarray(Sigma, dtype=float)
    d = params.d
    root = psd_root(Sigma)  # d x p
    p = root.shape[1]
    chunk = max(1, min(4096, _CHUNK_BUDGET // max(1, d * n)))
    V, W = params.V, params.W
    sq_sum = 0.0
    sq_sq_sum = 0.0
    kept = 0
    diverged = 0
    done = 0
    idx = 0
    while done < trials:
        b = min(chunk, trials - done)
        gen = rng.child(idx).generator()
        w_star = gen.standard_normal((b, d))
        if p:
            z = gen.standard_normal((b, p, n))
            X = np.einsum("dp,bpn->bdn", root, z)
        else:
            X = np.zeros((b, d, n))
        S = np.einsum("bdn,ben->bde", X, X) / n
        VS = np.einsum("de,bef->bdf", V, S)
        w = np.zeros((b, d))
        alive = np.ones(b, dtype=bool)
        for _ in range(k):
            drive = np.einsum("de,be->bd", W, w) - w_star
            w = w + np.einsum("bde,be->bd", VS, drive)
            bad = ~np.isfinite(w).all(axis=1) | (np.abs(w).max(axis=1) > OVERFLOW_LIMIT)
            if bad.any():
                alive &= ~bad
                w[bad] = 0.0  # frozen; excluded from the mean below
        err = np.sum((w - w_star) ** 2, axis=1)[alive]
        sq_sum += float(np.sum(err))
        sq_sq_sum += float(np.sum(err**2))
        kept += int(alive.sum())
        diverged += int(b - alive.sum())
        done += b
        idx += 1
    if kept == 0:
        return ErrorReport(exact=None, mc_mean=float("inf"), mc_stderr=float("inf"),
                           trials=trials, k_used=k, diverged=diverged)
    mean = sq_sum / kept
    var = max(0.0, sq_sq_sum / kept - mean**2)
    stderr = float(np.sqrt(var / kept))
    return ErrorReport(exact=None, mc_mean=mean, mc_stderr=stderr,
                       trials=trials, k_used=k, diverged=diverged)
