"""Deterministic numerical core: SVD, projections, gap profiles, usefulness.

Rank-k subspaces are always carried in factored form as k orthonormal row
vectors V (the projection is Pi = V^T V); d x d matrices are materialized
only inside explicit test oracles.  All computation is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

# Dense LAPACK SVD below this size; seeded randomized range finder above.
DENSE_SVD_LIMIT = 512
RSVD_OVERSAMPLING = 10
RSVD_POWER_ITERS = 4
# Fixed stream for the randomized backend so svd_topk is deterministic by default.
_RSVD_SEED = 0x53564431

# sigma_k == sigma_{k+1} within this tolerance marks the subspace ambiguous.
TIE_TOL = 1e-10

ROW_NORM_TOL = 1e-9
ORTHO_TOL = 1e-8


def as_matrix(X) -> np.ndarray:
    """Accept a UnitRowDataset or a raw 2-D array and return the ndarray."""
    if isinstance(X, UnitRowDataset):
        return X.data
    M = np.asarray(X, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return M


@dataclass(frozen=True)
class UnitRowDataset:
    """An n x d matrix whose rows are unit vectors."""

    data: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.data, dtype=float)
        if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
            raise ValueError("dataset must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(M)):
            raise ValueError("dataset must be finite")
        norms = np.linalg.norm(M, axis=1)
        worst = np.max(np.abs(norms - 1.0))
        if worst > ROW_NORM_TOL:
            raise ValueError(f"rows must have unit norm (worst deviation {worst:.3e})")
        object.__setattr__(self, "data", M)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def normalize_rows(M) -> UnitRowDataset:
    """Scale each row of M to unit norm and wrap as a UnitRowDataset."""
    M = np.asarray(M, dtype=float)
    norms = np.linalg.norm(M, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero row")
    return UnitRowDataset(M / norms)


@dataclass(frozen=True)
class SubspaceBasis:
    """Rank-k subspace of R^d, factored as k orthonormal row vectors."""

    basis: np.ndarray
    ambiguous: bool = False

    def __post_init__(self):
        V = np.asarray(self.basis, dtype=float)
        if V.ndim != 2 or V.shape[0] < 1:
            raise ValueError("basis must be a k x d matrix with k >= 1")
        G = V @ V.T
        err = np.max(np.abs(G - np.eye(V.shape[0])))
        if err > ORTHO_TOL:
            raise ValueError(f"basis rows are not orthonormal (error {err:.3e})")
        object.__setattr__(self, "basis", V)

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    def apply(self, vectors) -> np.ndarray:
        """Project vectors (last axis = d) onto the subspace, factored as V^T(V x)."""
        x = np.asarray(vectors, dtype=float)
        return (x @ self.basis.T) @ self.basis

    def projection_matrix(self) -> np.ndarray:
        """Materialize Pi = V^T V.  O(d^2) memory; intended for test oracles."""
        return self.basis.T @ self.basis


@dataclass(frozen=True)
class SvdResult:
    """Full or truncated SVD factors, singular values non-increasing."""

    singular_values: np.ndarray
    right_vectors: np.ndarray
    left_vectors: Optional[np.ndarray] = None


@dataclass(frozen=True)
class GapProfile:
    """Spectrum summary at rank k.

    gamma1 = sigma_{k+1}/sigma_k, gamma2 = sqrt(sum_{i>k} sigma_i^2)/sigma_k,
    additive_gap = sigma_k^2 - sigma_{k+1}^2.  When sigma_k == 0 the
    multiplicative gaps are undefined and ``defined`` is False (the gamma
    fields hold NaN rather than an arbitrary number).
    """

    k: int
    sigma: np.ndarray
    gamma1: float
    gamma2: float
    additive_gap: float
    sigma_k_sq_over_nk: float
    defined: bool = True

    def weak_predicate(self, gamma: float) -> bool:
        """Easiness test used by weak estimators: gamma2 <= gamma."""
        return self.defined and self.gamma2 <= gamma

    def strong_predicate(self, gamma: float) -> bool:
        """Easiness test used by strong estimators: gamma1 <= gamma."""
        return self.defined and self.gamma1 <= gamma


def singular_spectrum(X) -> np.ndarray:
    """All singular values of X, non-increasing.

    Uses LAPACK SVD when min(n, d) <= DENSE_SVD_LIMIT and the Gram-matrix
    eigenvalues of the short side above that (O(min^2 * max) instead of a
    full SVD of the rectangle).
    """
    M = as_matrix(X)
    n, d = M.shape
    if min(n, d) <= DENSE_SVD_LIMIT:
        return np.linalg.svd(M, compute_uv=False)
    G = M @ M.T if n <= d else M.T @ M
    w = np.linalg.eigvalsh(G)
    return np.sqrt(np.clip(w[::-1], 0.0, None))


def full_svd(X, want_left: bool = False) -> SvdResult:
    """Dense SVD with right vectors as rows; used as a test oracle."""
    M = as_matrix(X)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return SvdResult(s, Vt, U if want_left else None)


def _randomized_topk(M: np.ndarray, k: int, rng: np.random.Generator):
    """Seeded randomized range finder for the top right-singular subspace.

    Power iterations with QR re-orthonormalization; returns (values, rows)
    for the leading l = k + oversampling components.
    """
    n, d = M.shape
    l = min(k + RSVD_OVERSAMPLING, min(n, d))
    omega = rng.standard_normal((n, l))
    Z = M.T @ omega
    for _ in range(RSVD_POWER_ITERS):
        Z, _ = np.linalg.qr(Z)
        Z = M.T @ (M @ Z)
    Q, _ = np.linalg.qr(Z)
    B = M @ Q
    _, s, Vt = np.linalg.svd(B, full_matrices=False)
    V = Vt @ Q.T
    return s, V


def svd_topk(X, k: int, rng: Optional[np.random.Generator] = None) -> SubspaceBasis:
    """Orthonormal basis of the top-k rows subspace of X.

    Deterministic for a fixed input: the dense backend is used for
    min(n, d) <= DENSE_SVD_LIMIT, and the randomized backend above that runs
    on a fixed internal seed unless an rng is supplied.  A tie
    sigma_k == sigma_{k+1} (within TIE_TOL) flags the result ambiguous; any
    of the tied subspaces is equally good, so the backend's pick is kept.
    """
    M = as_matrix(X)
    n, d = M.shape
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k={k} out of range for a {n}x{d} matrix")
    if min(n, d) <= DENSE_SVD_LIMIT:
        _, s, Vt = np.linalg.svd(M, full_matrices=False)
        V = Vt[:k]
    else:
        if rng is None:
            rng = np.random.default_rng(_RSVD_SEED)
        s, Vfull = _randomized_topk(M, k, rng)
        V = Vfull[:k]
    ambiguous = k < len(s) and (s[k - 1] - s[k]) <= TIE_TOL
    # Guard against rounding drift from the backends.
    V, _ = np.linalg.qr(V.T)
    return SubspaceBasis(np.ascontiguousarray(V.T), ambiguous=bool(ambiguous))


def captured_mass(candidate: SubspaceBasis, X) -> float:
    """||Pi X^T||_F^2 computed in factored form as ||X V^T||_F^2."""
    M = as_matrix(X)
    if candidate.d != M.shape[1]:
        raise ValueError("dimension mismatch between candidate basis and data")
    return float(np.sum((M @ candidate.basis.T) ** 2))


def usefulness_error(candidate: SubspaceBasis, X) -> float:
    """Excess Frobenius mass of the best rank-k subspace over the candidate, per row.

    Returns (max_Pi' ||Pi' X^T||_F^2 - ||Pi X^T||_F^2) / n, which lies in
    [0, 1] for unit-row data and is 0 exactly when the candidate spans a
    top-k subspace.
    """
    M = as_matrix(X)
    if candidate.d != M.shape[1]:
        raise ValueError("dimension mismatch between candidate basis and data")
    s = singular_spectrum(M)
    best = float(np.sum(s[: candidate.k] ** 2))
    got = captured_mass(candidate, M)
    return max(best - got, 0.0) / M.shape[0]


def gap_profile(X, k: int) -> GapProfile:
    """Singular spectrum of X with the derived rank-k gap measures."""
    M = as_matrix(X)
    n, d = M.shape
    if not 1 <= k < min(n, d):
        raise ValueError(f"k={k} must satisfy 1 <= k < min(n, d) = {min(n, d)}")
    s = singular_spectrum(M)
    sk = float(s[k - 1])
    sk1 = float(s[k])
    tail = float(np.sum(s[k:] ** 2))
    additive = sk**2 - sk1**2
    spread = sk**2 * k / n
    if sk <= 0.0:
        return GapProfile(k, s, math.nan, math.nan, additive, spread, defined=False)
    return GapProfile(
        k=k,
        sigma=s,
        gamma1=sk1 / sk,
        gamma2=math.sqrt(tail) / sk,
        additive_gap=additive,
        sigma_k_sq_over_nk=spread,
        defined=True,
    )


def projection_distance(a: SubspaceBasis, b: SubspaceBasis, norm: str = "frobenius") -> float:
    """||Pi_a - Pi_b|| without materializing d x d matrices.

    Frobenius comes from the trace identity ||Pi_a - Pi_b||_F^2 =
    k_a + k_b - 2 ||V_a V_b^T||_F^2, evaluated in the cancellation-free
    residual form ||(I - Pi_b) V_a^T||_F^2 + ||(I - Pi_a) V_b^T||_F^2; the
    spectral norm is read off a small eigenproblem in the combined
    (<= k_a + k_b dimensional) span.
    """
    if a.d != b.d:
        raise ValueError("bases live in different ambient dimensions")
    if norm == "frobenius":
        cross = a.basis @ b.basis.T
        res_a = a.basis - cross @ b.basis
        res_b = b.basis - cross.T @ a.basis
        return math.sqrt(float(np.sum(res_a**2) + np.sum(res_b**2)))
    if norm == "spectral":
        stacked = np.vstack([a.basis, b.basis])
        Q, _ = np.linalg.qr(stacked.T)  # d x r, r <= k_a + k_b
        A = a.basis @ Q
        B = b.basis @ Q
        Mdiff = A.T @ A - B.T @ B
        w = np.linalg.eigvalsh(Mdiff)
        return float(np.max(np.abs(w)))
    raise ValueError(f"unknown norm {norm!r}")


@dataclass(frozen=True)
class PerturbationReport:
    """Both sides of the projection-perturbation and usefulness-drop bounds."""

    alpha: float
    sigma_k: float
    applicable: bool
    projection_dist: float
    projection_bound: float
    projection_holds: Optional[bool]
    usefulness_gap: Optional[float] = None
    usefulness_bound: Optional[float] = None
    usefulness_holds: Optional[bool] = None


def check_perturbation_bound(P, P_prime, k: int, X=None, tol: float = 1e-9) -> PerturbationReport:
    """Evaluate the perturbation bounds between P and a perturbed P'.

    With alpha = ||P - P'||_F and P of rank k, checks
    ||Pi - Pi'||_F <= 2*sqrt(2)*alpha/(sigma_k(P) - alpha), which requires
    sigma_k(P) >= 2*alpha (otherwise the report is marked not applicable).
    When a unit-row dataset X is supplied, additionally checks the
    usefulness-drop bound
    | ||Pi X^T||_F^2 - ||Pi' X^T||_F^2 | <= 2n * ||Pi - Pi'||_F.
    Test oracle only; not used on the estimation path.
    """
    P = as_matrix(P)
    Pp = as_matrix(P_prime)
    if P.shape != Pp.shape:
        raise ValueError("P and P' must have identical shapes")
    alpha = float(np.linalg.norm(P - Pp))
    s = singular_spectrum(P)
    sigma_k = float(s[k - 1])
    if sigma_k <= 0:
        raise ValueError("sigma_k(P) must be positive")
    pi = svd_topk(P, k)
    pi_p = svd_topk(Pp, k)
    dist = projection_distance(pi, pi_p, "frobenius")

    applicable = sigma_k >= 2.0 * alpha
    if applicable and alpha > 0:
        bound = 2.0 * math.sqrt(2.0) * alpha / (sigma_k - alpha)
        holds = dist <= bound + tol
    elif applicable:
        bound = 0.0
        holds = dist <= tol
    else:
        bound = math.inf
        holds = None

    u_gap = u_bound = u_holds = None
    if X is not None:
        M = as_matrix(X)
        u_gap = abs(captured_mass(pi, M) - captured_mass(pi_p, M))
        u_bound = 2.0 * M.shape[0] * dist
        u_holds = u_gap <= u_bound + tol

    return PerturbationReport(
        alpha=alpha,
        sigma_k=sigma_k,
        applicable=bool(applicable),
        projection_dist=dist,
        projection_bound=bound,
        projection_holds=holds,
        usefulness_gap=u_gap,
        usefulness_bound=u_bound,
        usefulness_holds=u_holds,
    )
