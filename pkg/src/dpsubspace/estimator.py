"""Sample-and-aggregate subspace estimators.

The estimator partitions the rows uniformly at random into t subsets,
computes each subset's top-k basis non-privately, and spends the entire
privacy budget on one robust DP aggregation of those bases.  Two
aggregations are provided: ``naive`` averages the projection matrices as
d^2-dimensional vectors, ``ss`` averages the images of q shared Gaussian
reference points (qd-dimensional), which is the practical choice whenever
d is large.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .budget import PrivacyBudget, laplace_mechanism
from .linalg import (
    SubspaceBasis,
    as_matrix,
    gap_profile,
    projection_distance,
    singular_spectrum,
    svd_topk,
)
from .robust_average import (
    AverageRequest,
    DiameterSearchConfig,
    RobustAverageResult,
    robust_dp_average,
    unknown_diameter_average,
)

NAIVE = "naive"
SS = "ss"

# Defaults used by the estimators when a constant is not pinned elsewhere:
# the number of reference points per rank follows the experiment convention.
DEFAULT_Q_PER_RANK = 10
DEFAULT_SEARCH = DiameterSearchConfig(xi_min=1e-6, xi_max=100.0)


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator parameters; exactly one of xi / gamma / neither drives the diameter.

    With ``xi`` set the aggregation runs at that diameter.  With ``gamma``
    set the diameter comes from the parameter recipe of the configured
    aggregator (see :func:`recommend_params`).  With neither, the private
    diameter search over ``search`` is used.
    """

    k: int
    t: int
    budget: PrivacyBudget
    q: Optional[int] = None
    xi: Optional[float] = None
    gamma: Optional[float] = None
    aggregator: str = SS
    search: DiameterSearchConfig = field(default_factory=lambda: DEFAULT_SEARCH)

    def __post_init__(self):
        if self.k < 1 or self.t < 1:
            raise ValueError("k and t must be >= 1")
        if self.aggregator not in (NAIVE, SS):
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        if self.aggregator == SS:
            q = self.q if self.q is not None else DEFAULT_Q_PER_RANK * self.k
            if q < self.k:
                raise ValueError("need q >= k reference points")
            object.__setattr__(self, "q", q)
        if self.xi is not None and not self.xi > 0:
            raise ValueError("xi must be positive")
        if self.gamma is not None and not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")


def _split_rows(n: int, t: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Uniformly random partition into t subsets; the first n mod t get one extra row."""
    perm = rng.permutation(n)
    return np.array_split(perm, t)


def _resolve_xi(cfg: EstimatorConfig, d: int) -> Optional[float]:
    if cfg.xi is not None:
        return cfg.xi
    if cfg.gamma is not None:
        if cfg.aggregator == NAIVE:
            return naive_xi_multiplier() * cfg.gamma
        return ss_xi_multiplier(cfg.k, cfg.q, cfg.t) * cfg.gamma
    return None


def est_subspace(X, cfg: EstimatorConfig, rng: np.random.Generator) -> SubspaceBasis:
    """Private estimate of the top-k rows subspace of X.

    Requires n >= t * k so every subset can span a rank-k subspace.  The
    subset SVDs are non-private; the whole budget is spent inside the
    aggregator.  Aggregation aborts (NoDenseCoreError) propagate to the
    caller: the budget is already spent, so silently retrying would be
    unsound.
    """
    M = as_matrix(X)
    n, d = M.shape
    if n < cfg.t * cfg.k:
        raise ValueError(f"need n >= t*k rows, got n={n}, t={cfg.t}, k={cfg.k}")
    parts = _split_rows(n, cfg.t, rng)
    bases = [svd_topk(M[idx], cfg.k) for idx in parts]
    xi = _resolve_xi(cfg, d)
    if cfg.aggregator == NAIVE:
        return naive_agg(bases, xi, cfg.budget, rng, search=cfg.search)
    return ss_agg(bases, cfg.k, cfg.q, xi, cfg.budget, rng, search=cfg.search)


def _average(points: np.ndarray, xi: Optional[float], budget: PrivacyBudget,
             rng: np.random.Generator, search: DiameterSearchConfig) -> RobustAverageResult:
    if xi is not None:
        return robust_dp_average(AverageRequest(points, xi, budget), rng)
    return unknown_diameter_average(points, search, budget, rng)


def naive_agg(
    bases: Sequence[SubspaceBasis],
    xi: Optional[float],
    budget: PrivacyBudget,
    rng: np.random.Generator,
    search: DiameterSearchConfig = DEFAULT_SEARCH,
) -> SubspaceBasis:
    """Aggregate projections as d^2 vectors, then snap to the nearest rank-k projection.

    Materializes the t projection matrices (O(t d^2) memory), so this route
    is only practical at moderate d.  The nearest rank-k projection of the
    noisy average is obtained by symmetrizing and keeping the top-k
    eigenvectors.
    """
    k, d = bases[0].k, bases[0].d
    if any(b.k != k or b.d != d for b in bases):
        raise ValueError("all bases must share (k, d)")
    flat = np.stack([b.projection_matrix().ravel() for b in bases])
    result = _average(flat, xi, budget, rng, search)
    pi_hat = result.value.reshape(d, d)
    sym = 0.5 * (pi_hat + pi_hat.T)
    w, U = np.linalg.eigh(sym)
    V = U[:, ::-1][:, :k].T
    Vq, _ = np.linalg.qr(V.T)
    return SubspaceBasis(np.ascontiguousarray(Vq.T))


def ss_agg(
    bases: Sequence[SubspaceBasis],
    k: int,
    q: int,
    xi: Optional[float],
    budget: PrivacyBudget,
    rng: np.random.Generator,
    search: DiameterSearchConfig = DEFAULT_SEARCH,
) -> SubspaceBasis:
    """Aggregate by averaging the projections of q shared Gaussian reference points.

    Samples p_1..p_q ~ N(0, I_d) (data-independent, treated as public
    randomness), robustly averages the t stacked image vectors
    (Pi_j p_1, ..., Pi_j p_q) in R^{qd}, reshapes the average to a q x d
    matrix and returns its top-k rows subspace.
    """
    if q < k:
        raise ValueError("need q >= k")
    d = bases[0].d
    if any(b.k != k or b.d != d for b in bases):
        raise ValueError("all bases must share (k, d)")
    refs = rng.standard_normal((q, d))
    images = np.stack([b.apply(refs).ravel() for b in bases])
    result = _average(images, xi, budget, rng, search)
    p_tilde = result.value.reshape(q, d)
    s = singular_spectrum(p_tilde)
    if s[k - 1] <= 1e-8 * max(s[0], 1.0):
        warnings.warn("aggregated reference matrix is nearly rank deficient; "
                      "the returned span is unreliable", RuntimeWarning)
    return svd_topk(p_tilde, k)


# ---------------------------------------------------------------------------
# Parameter recipes


def naive_xi_multiplier() -> float:
    """Diameter per unit gamma for the naive aggregator."""
    return 60.0


def reference_spread_eta(k: int, q: int, t: int, c1: float = 1.0) -> float:
    """Scale by which reference-point images magnify a subspace discrepancy."""
    return c1 * (math.sqrt(k) + math.sqrt(math.log(q * t)))


def ss_xi_multiplier(k: int, q: int, t: int, c1: float = 1.0) -> float:
    """Diameter per unit gamma for the ss aggregator (weak-gap regime)."""
    return 120.0 * reference_spread_eta(k, q, t, c1) * math.sqrt(k)


def ss_strong_xi_multiplier(k: int, q: int, t: int, c1: float = 1.0) -> float:
    """Diameter per unit gamma for the ss aggregator under a strong (top) gap only."""
    return 8.0 * math.sqrt(2.0 * t * k) * reference_spread_eta(k, q, t, c1)


@dataclass(frozen=True)
class ParamRecommendation:
    """Subset count, reference count and diameter recipe for one estimator flavor."""

    estimator: str
    t: int
    q: Optional[int]
    xi_multiplier: float
    eta: Optional[float]
    n_threshold: float
    feasible: bool
    xi: Optional[float] = None


def recommend_params(
    n: int,
    d: int,
    k: int,
    lam: float,
    eps: float,
    delta: float,
    estimator: str,
    gamma: Optional[float] = None,
    c: float = 1.0,
    c1: float = 1.0,
    c2: float = 1.0,
) -> ParamRecommendation:
    """Subset count t, reference count q and diameter multiplier for a target quality lam.

    The unspecified constants c, c1, c2 default to 1; they are calibration
    knobs, and in practice the diameter is found by the private search
    rather than the recipe.  The returned n_threshold = 800 k ln(25k) t is
    the sample size at which the subset-closeness guarantee kicks in;
    ``feasible`` records whether the given n clears it.

    Recipes by flavor (gamma is the known easiness bound):

    - weak_naive: xi = 60 gamma,
      t = c1 (ln(1/delta)/eps + d sqrt(ln(1/delta) ln 20) / (lam eps))
    - weak_ss:    xi = 120 eta sqrt(k) gamma, eta = c1 (sqrt(k)+sqrt(ln(qt)))
    - strong_ss:  xi = 8 sqrt(2tk) eta gamma (same eta, computed after t)
    """
    if min(n, d, k) < 1 or lam <= 0 or eps <= 0 or not 0 < delta < 1:
        raise ValueError("all parameters must be positive (0 < delta < 1)")
    log1d = math.log(1.0 / delta)
    if estimator == "weak_naive":
        t_raw = c1 * (log1d / eps + d * math.sqrt(log1d * math.log(20.0)) / (lam * eps))
        t = max(1, math.ceil(t_raw))
        q = None
        eta = None
        mult = naive_xi_multiplier()
    elif estimator == "weak_ss":
        q = max(k, math.ceil(c2 * k))
        inner = math.sqrt(k) + math.sqrt(math.log(d * k * log1d / (lam * eps)))
        t_raw = c * (log1d / eps + inner * math.sqrt(k * d * log1d) / (lam * eps))
        t = max(1, math.ceil(t_raw))
        eta = reference_spread_eta(k, q, t, c1)
        mult = ss_xi_multiplier(k, q, t, c1)
    elif estimator == "strong_ss":
        q = max(k, math.ceil(c2 * k))
        inner = k + math.log(d * k * log1d / (lam * eps))
        t_raw = c * (log1d / eps + inner * d * k * log1d / (lam**2 * eps**2))
        t = max(1, math.ceil(t_raw))
        eta = reference_spread_eta(k, q, t, c1)
        mult = ss_strong_xi_multiplier(k, q, t, c1)
    else:
        raise ValueError(f"unknown estimator flavor {estimator!r}")
    n_threshold = 800.0 * k * math.log(25.0 * k) * t
    return ParamRecommendation(
        estimator=estimator,
        t=t,
        q=q,
        xi_multiplier=mult,
        eta=eta,
        n_threshold=n_threshold,
        feasible=n >= n_threshold,
        xi=None if gamma is None else mult * gamma,
    )


# ---------------------------------------------------------------------------
# Private rank selection


@dataclass(frozen=True)
class RankSelection:
    noisy_sq_singulars: np.ndarray
    chosen_k: Optional[int]
    beta: float
    eps_prime: float

    @property
    def found(self) -> bool:
        return self.chosen_k is not None


def private_select_k(
    X,
    eps_prime: float,
    beta: float,
    rng: np.random.Generator,
    noise_off: bool = False,
) -> RankSelection:
    """Pick a rank privately from Laplace-noised squared singular values.

    The vector (sigma_1^2, ..., sigma_r^2) has l1 sensitivity 2 under one
    row replacement of a unit-row dataset, so each entry gets Lap(2/eps')
    noise.  The chosen rank is the first index i with noisy sigma_i^2 >=
    ln(i/beta)/eps' and noisy sigma_{i+1}^2 below the same threshold; if no
    index qualifies the selection reports not-found rather than raising.
    ``noise_off`` skips the noise but keeps the eps'-driven thresholds (for
    testing the selection rule in isolation).
    """
    if not (eps_prime > 0 and math.isfinite(eps_prime)):
        raise ValueError("eps_prime must be positive and finite")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    M = as_matrix(X)
    s2 = singular_spectrum(M) ** 2
    # One virtual zero past the spectrum lets the rule fire at full rank.
    padded = np.concatenate([s2, [0.0]])
    noisy = padded.copy() if noise_off else laplace_mechanism(padded, 2.0, eps_prime, rng)
    chosen = None
    for i in range(1, len(s2) + 1):
        threshold = math.log(i / beta) / eps_prime
        if noisy[i - 1] >= threshold and noisy[i] < threshold:
            chosen = i
            break
    return RankSelection(
        noisy_sq_singulars=noisy[:-1],
        chosen_k=chosen,
        beta=beta,
        eps_prime=eps_prime,
    )


# ---------------------------------------------------------------------------
# Subset-closeness Monte Carlo


@dataclass(frozen=True)
class ClosenessReport:
    applicable: bool
    success_fraction: Optional[float]
    bound: Optional[float]
    distances: Optional[np.ndarray] = None
    reason: Optional[str] = None


def subset_closeness_experiment(
    X,
    k: int,
    m: int,
    norm: str,
    trials: int,
    beta: float,
    rng: np.random.Generator,
) -> ClosenessReport:
    """Empirical check that random m-subsets induce nearby top-k subspaces.

    Draws `trials` uniformly random m-row subsets (without replacement),
    measures the projection distance to the full top-k basis, and reports
    the fraction within the distance bound implied by the subset-closeness
    guarantee: 4 sqrt(2n/m) gamma1 in spectral norm, 4 sqrt(2/beta) gamma2
    in Frobenius norm.  Requires the spread condition
    sigma_k^2 >= 0.01 n / k; otherwise the report says not-applicable.
    """
    M = as_matrix(X)
    n = M.shape[0]
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    profile = gap_profile(M, k)
    if profile.sigma_k_sq_over_nk < 0.01:
        return ClosenessReport(False, None, None, reason="sigma_k^2 < 0.01 n/k")
    if not profile.defined:
        return ClosenessReport(False, None, None, reason="sigma_k = 0")
    if norm == "spectral":
        bound = 4.0 * math.sqrt(2.0 * n / m) * profile.gamma1
    elif norm == "frobenius":
        bound = 4.0 * math.sqrt(2.0 / beta) * profile.gamma2
    else:
        raise ValueError(f"unknown norm {norm!r}")
    full = svd_topk(M, k)
    dists = np.empty(trials)
    for trial in range(trials):
        idx = rng.choice(n, size=m, replace=False)
        sub = svd_topk(M[idx], k)
        dists[trial] = projection_distance(full, sub, norm)
    # absolute slack so the exact-rank-k case (bound 0) tolerates roundoff
    fraction = float(np.mean(dists <= bound + 1e-9))
    return ClosenessReport(True, fraction, bound, distances=dists)
