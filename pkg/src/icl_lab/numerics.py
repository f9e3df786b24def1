"""Dense-matrix primitives: pseudoinverse, spectral radius, seeded Gaussian sampling.

Everything here is pure: identical inputs (including the RNG stream) give
identical outputs, so values can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError

OVERFLOW_LIMIT = 1e150


@dataclass(frozen=True)
class RngStream:
    """A reproducible, splittable random stream.

    ``(seed, stream)`` fully determines the draw sequence.  ``child(i)``
    derives a statistically independent sub-stream; children are built from
    counter tuples, so parallel tasks can each own a stream no matter how
    work is scheduled.
    """

    seed: int
    stream: tuple[int, ...] = field(default=())

    def __post_init__(self):
        s = self.stream
        if isinstance(s, int):
            s = (s,)
        object.__setattr__(self, "stream", tuple(int(x) for x in s))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream + (int(index),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.PCG64(ss))


def _check_finite(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} contains non-finite entries")
    return m


def pinv(m: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD with a relative singular-value cutoff.

    Singular values below ``rel_tol * sigma_max`` are treated as zero.  The
    relative cutoff keeps behavior scale-free, which matters near the
    rank-deficient regime the double-descent experiments drive into.
    """
    m = _check_finite(m)
    if rel_tol <= 0:
        raise DomainError("rel_tol must be positive")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD failed on {m.shape[0]}x{m.shape[1]} matrix "
            f"(fro norm {np.linalg.norm(m):.3e})"
        ) from exc
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]))
    keep = s > rel_tol * s[0]
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (vt.T * inv_s) @ u.T


def svd_rank(m: np.ndarray, rel_tol: float = 1e-10) -> int:
    """Numerical rank under the same cutoff convention as :func:`pinv`."""
    m = _check_finite(m)
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def spectral_radius(m: np.ndarray) -> float:
    """max |eigenvalue| of a square matrix (eigenvalues may be complex)."""
    m = _check_finite(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError("spectral_radius requires a square matrix")
    try:
        ev = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigensolver failed to converge") from exc
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def psd_root(cov: np.ndarray) -> np.ndarray:
    """Square root of a symmetric PSD matrix via eigendecomposition.

    Returns a ``d x k`` factor R with R @ R.T = cov, where k is the number of
    (numerically) positive eigenvalues.  Eigenvalues in
    ``[-1e-12 * ||cov||, 0)`` are clipped to zero; anything more negative is a
    domain error.  Eigendecomposition (not Cholesky) because the post-training
    covariances with r = 0 are singular by design.
    """
    cov = _check_finite(cov, "covariance")
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DomainError("covariance must be square")
    sym = 0.5 * (cov + cov.T)
    w, u = np.linalg.eigh(sym)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    tol = 1e-12 * scale
    if np.any(w < -tol):
        raise DomainError(
            f"covariance is not PSD: min eigenvalue {w.min():.3e} "
            f"(tolerance {-tol:.3e})"
        )
    w = np.clip(w, 0.0, None)
    pos = w > 0
    return u[:, pos] * np.sqrt(w[pos])


def sample_gaussian(cov: np.ndarray, count: int, rng: RngStream) -> np.ndarray:
    """``d x count`` matrix of i.i.d. columns ~ N(0, cov)."""
    if count < 0:
        raise DomainError("count must be nonnegative")
    root = psd_root(cov)
    d = np.asarray(cov).shape[0]
    gen = rng.generator()
    z = gen.standard_normal((root.shape[1], count))
    out = np.zeros((d, count))
    if root.shape[1]:
        out = root @ z
    return out
