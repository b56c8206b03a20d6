"""Comparator algorithms: additive-gap subspace recovery and the plain Gaussian mean.

The additive-gap algorithm perturbs the exact top-k projection matrix with a
symmetric Gaussian matrix whose scale is driven by a noisy estimate of
sigma_k^2 - sigma_{k+1}^2: the larger the gap, the less noise privacy
requires.  It inherently materializes d x d matrices, so memory is O(d^2)
and d is capped by RAM; that cost is the point of comparison for the
sample-and-aggregate route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from .linalg import DENSE_SVD_LIMIT, SubspaceBasis, as_matrix, svd_topk

# Dense eigh below this dimension, implicit LinearOperator + Lanczos above.
_DENSE_EIG_LIMIT = 1024


@dataclass(frozen=True)
class AnalyzeGaussReport:
    """Output of the additive-gap algorithm plus its noise bookkeeping.

    ``noise_std`` is sqrt(1/(2 rho)) / (noisy_gap - 2 sqrt(ln(1/delta)/rho) - 2)
    whenever that denominator is positive; otherwise ``fallback`` is set and
    the basis is the top-k of a pure noise matrix (unit std), the regime
    where the gap is too small for the mechanism to say anything.
    """

    noisy_gap: float
    noise_std: Optional[float]
    basis: SubspaceBasis
    fallback: bool
    rho: float
    delta: float


def analyze_gauss_noise_std(noisy_gap: float, rho: float, delta: float) -> Optional[float]:
    """Closed-form per-entry noise std of the zCDP additive-gap algorithm.

    Returns None when the denominator is non-positive (fallback regime).
    """
    den = noisy_gap - 2.0 * math.sqrt(math.log(1.0 / delta) / rho) - 2.0
    if den <= 0.0:
        return None
    return math.sqrt(1.0 / (2.0 * rho)) / den


def analyze_gauss_noise_std_eps_delta(noisy_gap: float, eps: float, delta: float) -> Optional[float]:
    """Per-entry noise std of the original (eps, delta) variant.

    Uses the sensitivity proxy (1 + sqrt(2 ln(1/delta)))/eps over the margin
    noisy_gap - 2 ln(1/delta)/eps - 2.  Kept as a thin formula for unit
    tests; the estimation path runs the zCDP variant.
    """
    den = noisy_gap - 2.0 * math.log(1.0 / delta) / eps - 2.0
    if den <= 0.0:
        return None
    return (1.0 + math.sqrt(2.0 * math.log(1.0 / delta))) / eps / den


def _symmetric_gaussian(d: int, rng: np.random.Generator) -> np.ndarray:
    """Symmetric d x d matrix with i.i.d. N(0,1) upper triangle (incl. diagonal)."""
    A = rng.standard_normal((d, d))
    E = (A + A.T) / math.sqrt(2.0)
    # (A_ii + A_ii)/sqrt(2) has variance 2; rescale the diagonal back to 1
    np.fill_diagonal(E, np.diag(E) / math.sqrt(2.0))
    return E


def _topk_eigenbasis(V: Optional[np.ndarray], E: np.ndarray, k: int) -> SubspaceBasis:
    """Top-k eigenvectors of Pi + E (Pi factored as V^T V; V may be None)."""
    d = E.shape[0]
    if d <= _DENSE_EIG_LIMIT:
        W = E if V is None else E + V.T @ V
        w, U = np.linalg.eigh(W)
        top = U[:, ::-1][:, :k].T
    else:
        if V is None:
            def matvec(x):
                return E @ x
        else:
            def matvec(x):
                return E @ x + V.T @ (V @ x)
        op = spla.LinearOperator((d, d), matvec=matvec, dtype=float)
        # fixed start vector keeps Lanczos deterministic
        w, U = spla.eigsh(op, k=k, which="LA", v0=np.ones(d))
        top = U[:, ::-1].T
    Q, _ = np.linalg.qr(top.T)
    return SubspaceBasis(np.ascontiguousarray(Q.T))


def _topk_and_spectrum(M: np.ndarray, k: int):
    """Exact top-k right basis plus full singular spectrum via the short side."""
    n, d = M.shape
    if min(n, d) <= DENSE_SVD_LIMIT:
        _, s, Vt = np.linalg.svd(M, full_matrices=False)
        return s, Vt[:k]
    if n <= d:
        G = M @ M.T
        w, U = np.linalg.eigh(G)
        w = w[::-1]
        U = U[:, ::-1]
        s = np.sqrt(np.clip(w, 0.0, None))
        V = (U[:, :k].T @ M) / s[:k, None]
    else:
        G = M.T @ M
        w, U = np.linalg.eigh(G)
        s = np.sqrt(np.clip(w[::-1], 0.0, None))
        V = U[:, ::-1][:, :k].T
    Q, _ = np.linalg.qr(V.T)
    return s, Q.T


def analyze_gauss_zcdp(
    X,
    k: int,
    rho: float,
    delta: float,
    rng: np.random.Generator,
) -> AnalyzeGaussReport:
    """Additive-gap subspace recovery; the whole call costs (2*rho, delta)-zCDP.

    Steps: (1) exact top-k projection and the gap sigma_k^2 - sigma_{k+1}^2;
    (2) noisy gap g = gap + N(0, 2/rho); (3) perturb the projection with a
    symmetric matrix whose upper triangle is i.i.d. N(0, s^2) for
    s = analyze_gauss_noise_std(g, rho, delta); (4) return the top-k
    eigenvectors.  If the noisy gap is too small (denominator <= 0) the
    output is the top-k of pure noise, flagged as fallback, so parameter
    sweeps complete instead of failing.
    """
    M = as_matrix(X)
    n, d = M.shape
    if not 1 <= k < min(n, d):
        raise ValueError("need 1 <= k < min(n, d)")
    if not (rho > 0 and 0 < delta < 1):
        raise ValueError("need rho > 0 and delta in (0, 1)")
    s, V = _topk_and_spectrum(M, k)
    gap = float(s[k - 1] ** 2 - s[k] ** 2)
    g_sigma = math.sqrt(2.0 / rho) if math.isfinite(rho) else 0.0
    g = gap + (rng.normal(0.0, g_sigma) if g_sigma > 0 else 0.0)
    std = analyze_gauss_noise_std(g, rho, delta)
    if std is None:
        E = _symmetric_gaussian(d, rng)
        basis = _topk_eigenbasis(None, E, k)
        return AnalyzeGaussReport(g, None, basis, True, rho, delta)
    if std == 0.0:
        basis = svd_topk(M, k)
    else:
        E = _symmetric_gaussian(d, rng)
        E *= std
        basis = _topk_eigenbasis(V, E, k)
    return AnalyzeGaussReport(g, std, basis, False, rho, delta)


def plain_gaussian_mean(X, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian-mechanism estimate of the row average of a unit-row dataset.

    Adds N(0, sigma^2 I_d) to the exact mean with sigma = 2/(n sqrt(rho)),
    the calibration used by the mean-estimation experiments (l2 sensitivity
    of the mean is 2/n for unit rows).  Expected l2 error is about
    sigma * sqrt(d).
    """
    M = as_matrix(X)
    if not rho > 0:
        raise ValueError("rho must be positive")
    n, d = M.shape
    mean = M.mean(axis=0)
    sigma = 2.0 / (n * math.sqrt(rho)) if math.isfinite(rho) else 0.0
    if sigma == 0.0:
        return mean
    return mean + rng.normal(0.0, sigma, size=d)
