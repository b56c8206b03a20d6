"""Hard-instance machinery: biased codebooks, padding, generators, extractor.

A codebook is a random sign matrix with independent columns whose biases are
drawn through a log-uniform tilt, so some columns are nearly constant
("marked").  Hard instances for rank-k estimation stack k independently
padded-and-permuted codebooks and rescale rows to unit norm; the secret
(which block carries the target codebook, and the k column permutations)
lets an extractor read codebook signs back out of any good subspace
estimate.  The validators check the spectral shape of the construction
empirically at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .linalg import SubspaceBasis, UnitRowDataset, singular_spectrum

DEFAULT_SEARCH_DIRECTIONS = 2000


@dataclass(frozen=True)
class FpcCodebook:
    """n0 x d0 sign matrix with per-column biases (column j has mean biases[j])."""

    entries: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.entries)
        if E.ndim != 2 or not np.all(np.abs(E) == 1):
            raise ValueError("entries must be a +-1 matrix")
        b = np.asarray(self.biases, dtype=float)
        if b.shape != (E.shape[1],) or np.any(np.abs(b) >= 1.0):
            raise ValueError("need one bias in (-1, 1) per column")
        object.__setattr__(self, "entries", E.astype(np.int8))
        object.__setattr__(self, "biases", b)

    @property
    def n0(self) -> int:
        return self.entries.shape[0]

    @property
    def d0(self) -> int:
        return self.entries.shape[1]


def sample_fpc(n0: int, d0: int, rng: np.random.Generator) -> FpcCodebook:
    """Draw a codebook: bias p = (e^t - 1)/(e^t + 1), t uniform on [-ln(5 n0), ln(5 n0)].

    Entries are independent within a column with mean p, columns independent.
    The tilt range caps |p| at (5 n0 - 1)/(5 n0 + 1).
    """
    if n0 < 1 or d0 < 1:
        raise ValueError("n0 and d0 must be >= 1")
    bound = math.log(5.0 * n0)
    t = rng.uniform(-bound, bound, size=d0)
    p = (np.exp(t) - 1.0) / (np.exp(t) + 1.0)
    probs = (1.0 + p) / 2.0
    entries = np.where(rng.random((n0, d0)) < probs[None, :], 1, -1).astype(np.int8)
    return FpcCodebook(entries, p)


def pad_and_permute(X, ell: int, perm: np.ndarray) -> np.ndarray:
    """Append ell all-ones and ell all-minus-ones columns, then permute columns.

    ``perm`` maps source column c to destination perm[c]; its length must be
    d0 + 2*ell.  Row-neighboring is preserved: changing one row of X changes
    exactly one row of the output.
    """
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    n0, d0 = X.shape
    d = d0 + 2 * ell
    perm = np.asarray(perm)
    if perm.shape != (d,) or not np.array_equal(np.sort(perm), np.arange(d)):
        raise ValueError(f"perm must be a permutation of range({d})")
    padded = np.empty((n0, d), dtype=X.dtype)
    padded[:, :d0] = X
    padded[:, d0 : d0 + ell] = 1
    padded[:, d0 + ell :] = -1
    out = np.empty_like(padded)
    out[:, perm] = padded
    return out


@dataclass(frozen=True)
class HardInstanceSecret:
    """Shared secret between generator and extractor: planted block + permutations."""

    s: int
    perms: tuple

    @property
    def k(self) -> int:
        return len(self.perms)


def sample_secret(k: int, d: int, rng: np.random.Generator) -> HardInstanceSecret:
    if not 0 <= k - 1:
        raise ValueError("k must be >= 1")
    s = int(rng.integers(k))
    perms = tuple(rng.permutation(d) for _ in range(k))
    return HardInstanceSecret(s=s, perms=perms)


def planted_direction(ell: int, d0: int, perm: np.ndarray) -> np.ndarray:
    """Unit vector (0^{d0}, 1^ell, -1^ell)/sqrt(2 ell) carried through the permutation."""
    d = d0 + 2 * ell
    base = np.zeros(d)
    base[d0 : d0 + ell] = 1.0
    base[d0 + ell :] = -1.0
    base /= math.sqrt(2 * ell)
    out = np.empty(d)
    out[perm] = base
    return out


@dataclass(frozen=True)
class HardInstance:
    """Unit-row hard instance Y with its generation secret and planted directions."""

    Y: UnitRowDataset
    secret: HardInstanceSecret
    planted: np.ndarray
    n0: int
    d0: int
    ell: int
    k: int

    @property
    def d(self) -> int:
        return self.d0 + 2 * self.ell

    @property
    def pad_alpha(self) -> float:
        """Codebook fraction of the ambient dimension, d0/d."""
        return self.d0 / self.d


def plan_padding(d: int, pad_alpha: float) -> tuple[int, int]:
    """Padding length and codebook width for an ambient dimension and alpha.

    ell = 2 * ceil((1 - alpha) d / 4), d0 = d - 2 ell; alpha is approximately
    d0 / d.  Raises if the resulting d0 is not positive.
    """
    if not 0.0 < pad_alpha < 1.0:
        raise ValueError("pad_alpha must lie in (0, 1)")
    ell = 2 * math.ceil((1.0 - pad_alpha) * d / 4.0)
    d0 = d - 2 * ell
    if d0 < 1:
        raise ValueError(f"pad_alpha={pad_alpha} leaves no codebook columns at d={d}")
    return ell, d0


def generate_hard_instance(
    X: Union[FpcCodebook, np.ndarray],
    k: int,
    ell: int,
    secret: HardInstanceSecret,
    rng: np.random.Generator,
) -> HardInstance:
    """Stack k padded-and-permuted codebooks with X planted at block secret.s.

    Blocks other than secret.s are fresh codebook draws of the same shape.
    The output rows are entries +-1/sqrt(d), hence exactly unit norm, and
    the map is row-neighboring-preserving in X.
    """
    target = X.entries if isinstance(X, FpcCodebook) else np.asarray(X)
    n0, d0 = target.shape
    if secret.k != k:
        raise ValueError("secret carries a different k")
    if not 0 <= secret.s < k:
        raise ValueError("secret block index out of range")
    d = d0 + 2 * ell
    blocks = []
    for t_idx in range(k):
        if t_idx == secret.s:
            block_src = target
        else:
            block_src = sample_fpc(n0, d0, rng).entries
        blocks.append(pad_and_permute(block_src, ell, secret.perms[t_idx]))
    B = np.vstack(blocks).astype(float)
    Y = UnitRowDataset(B / math.sqrt(d))
    planted = np.stack([planted_direction(ell, d0, p) for p in secret.perms])
    return HardInstance(Y=Y, secret=secret, planted=planted, n0=n0, d0=d0, ell=ell, k=k)


def instance_from_parts(
    Y: UnitRowDataset,
    secret: HardInstanceSecret,
    n0: int,
    d0: int,
    ell: int,
    k: int,
) -> HardInstance:
    """Rebuild a HardInstance (planted directions included) from saved pieces."""
    planted = np.stack([planted_direction(ell, d0, p) for p in secret.perms])
    return HardInstance(Y=Y, secret=secret, planted=planted, n0=n0, d0=d0, ell=ell, k=k)


@dataclass(frozen=True)
class WeakGapReport:
    sigma_k_sq: float
    head_bound: float
    head_ok: bool
    tail_ratio: float
    tail_bound: float
    tail_ok: bool

    @property
    def ok(self) -> bool:
        return self.head_ok and self.tail_ok


def validate_weak_gap(inst: HardInstance) -> WeakGapReport:
    """Check the weak-gap shape of a hard instance against its alpha.

    With alpha = pad_alpha and n = k * n0, verifies sigma_k^2(Y) >=
    (1 - 4 alpha) n / k and sum_{i>k} sigma_i^2 / sigma_k^2 <=
    4 alpha k / (1 - 4 alpha).
    """
    s = singular_spectrum(inst.Y)
    k = inst.k
    n = inst.k * inst.n0
    alpha = inst.pad_alpha
    sk2 = float(s[k - 1] ** 2)
    head_bound = (1.0 - 4.0 * alpha) * n / k
    tail = float(np.sum(s[k:] ** 2))
    tail_ratio = tail / sk2 if sk2 > 0 else math.inf
    tail_bound = 4.0 * alpha * k / (1.0 - 4.0 * alpha)
    return WeakGapReport(
        sigma_k_sq=sk2,
        head_bound=head_bound,
        head_ok=sk2 >= head_bound,
        tail_ratio=tail_ratio,
        tail_ok=tail_ratio <= tail_bound,
        tail_bound=tail_bound,
    )


@dataclass(frozen=True)
class StrongGapReport:
    gamma1: float
    gamma1_sq: float
    reference_scale: float

    def within(self, c: float) -> bool:
        """gamma1^2 <= c * reference_scale for a calibration constant c."""
        return self.gamma1_sq <= c * self.reference_scale


def validate_strong_gap(inst: HardInstance) -> StrongGapReport:
    """Measure sigma_{k+1}/sigma_k of a hard instance.

    The construction predicts gamma1^2 of order
    alpha * log(k/alpha) * log(2n/k) up to an unspecified constant, so the
    report carries that reference scale and the measured ratio rather than
    asserting an absolute threshold.
    """
    s = singular_spectrum(inst.Y)
    k = inst.k
    n = inst.k * inst.n0
    alpha = inst.pad_alpha
    gamma1 = float(s[k] / s[k - 1]) if s[k - 1] > 0 else math.inf
    reference = alpha * math.log(k / alpha) * math.log(2.0 * n / k)
    return StrongGapReport(gamma1=gamma1, gamma1_sq=gamma1**2, reference_scale=reference)


@dataclass(frozen=True)
class ExtractResult:
    q: np.ndarray
    score: float
    degraded: bool


def _padding_score(signs_h1: np.ndarray, signs_h2: np.ndarray) -> np.ndarray:
    """min(sum of signs on the +1 half-pad, -sum on the -1 half-pad), row-wise."""
    return np.minimum(signs_h1.sum(axis=-1), -signs_h2.sum(axis=-1))


def extract(
    secret: HardInstanceSecret,
    basis: SubspaceBasis,
    ell: int,
    rng: np.random.Generator,
    n_directions: int = DEFAULT_SEARCH_DIRECTIONS,
) -> ExtractResult:
    """Recover a sign vector over the d0 codebook columns from a subspace estimate.

    De-permutes the basis with the secret's planted-block permutation, then
    searches the k-dimensional span for the vector maximizing the minimum
    sign agreement over the two half-padding windows (first half of the +1
    pad, first half of the -1 pad).  The exact maximizer is intractable, so
    the search uses random unit directions plus a coordinate-wise greedy
    ascent over span coefficients, keeping the first best found.  Output is
    the sign pattern of the selected vector on the first d0 (de-permuted)
    coordinates.
    """
    V = basis.basis
    k, d = V.shape
    d0 = d - 2 * ell
    if d0 < 1:
        raise ValueError("ell too large for the basis dimension")
    perm = np.asarray(secret.perms[secret.s])
    W = V[:, perm]  # de-permuted span basis
    half = ell // 2
    h1 = slice(d0, d0 + half)
    h2 = slice(d0 + ell, d0 + ell + half)

    if not np.all(np.isfinite(W)):
        return ExtractResult(np.ones(d0, dtype=np.int8), -math.inf, True)

    W_h1 = W[:, h1]
    W_h2 = W[:, h2]

    def score_of(coeffs: np.ndarray) -> np.ndarray:
        s1 = np.sign(coeffs @ W_h1)
        s2 = np.sign(coeffs @ W_h2)
        s1[s1 == 0] = 1.0
        s2[s2 == 0] = 1.0
        return _padding_score(s1, s2)

    if k == 1:
        cand = np.array([[1.0], [-1.0]])
    else:
        cand = rng.standard_normal((n_directions, k))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    scores = score_of(cand)
    best_idx = int(np.argmax(scores))
    best = cand[best_idx]
    best_score = float(scores[best_idx])

    # local refinement: axis-wise perturbations with shrinking steps
    if k > 1:
        for step in (1.0, 0.5, 0.25):
            improved = True
            while improved:
                improved = False
                trials = []
                for axis in range(k):
                    for sign in (1.0, -1.0):
                        cand_vec = best + sign * step * np.eye(k)[axis]
                        cand_vec /= np.linalg.norm(cand_vec)
                        trials.append(cand_vec)
                trials = np.asarray(trials)
                trial_scores = score_of(trials)
                idx = int(np.argmax(trial_scores))
                if trial_scores[idx] > best_score:
                    best = trials[idx]
                    best_score = float(trial_scores[idx])
                    improved = True

    u = best @ W
    q = np.sign(u[:d0])
    q[q == 0] = 1.0
    return ExtractResult(q.astype(np.int8), best_score, False)


def marked_columns(M, b: int) -> np.ndarray:
    """Indices of columns of a sign matrix whose entries all equal b."""
    M = np.asarray(M)
    return np.flatnonzero(np.all(M == b, axis=0))


@dataclass(frozen=True)
class AgreementReport:
    """Per-mark agreement of a sign vector with a codebook's marked columns.

    Fractions are None when the corresponding marked set is empty, in which
    case the flags are vacuously true.  For a single vector the
    strongly_correlated flag degenerates to "every marked column agrees"
    (the per-column empirical probability from one sample is 0 or 1).
    """

    fraction_plus: Optional[float]
    fraction_minus: Optional[float]
    strongly_agrees: bool
    strongly_correlated: bool


def agreement_metrics(q, codebook: Union[FpcCodebook, np.ndarray]) -> AgreementReport:
    """Fractions of +1-marked / -1-marked columns matched by q, with the 0.9 flags."""
    M = codebook.entries if isinstance(codebook, FpcCodebook) else np.asarray(codebook)
    q = np.asarray(q)
    if q.shape != (M.shape[1],):
        raise ValueError("q length must match the codebook width")
    fracs = {}
    all_agree = {}
    for b in (1, -1):
        idx = marked_columns(M, b)
        if idx.size == 0:
            fracs[b] = None
            all_agree[b] = True
        else:
            agree = float(np.mean(q[idx] == b))
            fracs[b] = agree
            all_agree[b] = bool(np.all(q[idx] == b))
    strongly_agrees = all(f is None or f >= 0.9 for f in fracs.values())
    return AgreementReport(
        fraction_plus=fracs[1],
        fraction_minus=fracs[-1],
        strongly_agrees=strongly_agrees,
        strongly_correlated=all_agree[1] and all_agree[-1],
    )


def correlation_rate(qs: Sequence[np.ndarray], codebook: Union[FpcCodebook, np.ndarray]) -> bool:
    """Batch version of the 0.9 per-column criterion over repeated extractions.

    Given sign vectors from independent runs, checks that every marked
    column is matched in at least 90% of the runs.
    """
    M = codebook.entries if isinstance(codebook, FpcCodebook) else np.asarray(codebook)
    Q = np.asarray(qs)
    if Q.ndim != 2 or Q.shape[1] != M.shape[1]:
        raise ValueError("qs must be a batch of codebook-width sign vectors")
    for b in (1, -1):
        idx = marked_columns(M, b)
        if idx.size == 0:
            continue
        rates = np.mean(Q[:, idx] == b, axis=0)
        if np.any(rates < 0.9):
            return False
    return True
