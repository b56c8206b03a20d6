"""Privacy budgets and the base noise mechanisms.

Two accounting models are supported and never converted into each other:
``pure_dp`` budgets are (epsilon, delta) pairs, ``zcdp`` budgets are
(rho, delta) pairs.  Composition is done by explicit budget splitting only;
there is no accountant.

Randomness discipline: every randomized routine in the package takes a
``numpy.random.Generator``.  Independent child streams are derived from a
master seed with :func:`substream`, which keys ``numpy.random.SeedSequence``
by an integer path, so concurrent work gets reproducible noise regardless of
scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PURE_DP = "pure_dp"
ZCDP = "zcdp"

_MODELS = (PURE_DP, ZCDP)


def make_rng(seed=None) -> np.random.Generator:
    """Create a Generator from a seed (or fresh entropy when seed is None)."""
    return np.random.default_rng(seed)


def substream(master_seed, *path: int) -> np.random.Generator:
    """Derive an independent child stream at an integer path under a master seed.

    Streams at distinct paths are statistically independent, and the
    derivation does not depend on the order in which streams are created.
    """
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(int(p) for p in path))
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class PrivacyBudget:
    """A (eps_or_rho, delta) privacy budget in one accounting model.

    ``eps_or_rho`` is epsilon under ``pure_dp`` and rho under ``zcdp``.
    ``math.inf`` is the noise-off sentinel used by debug modes: every
    mechanism called with an infinite budget adds zero noise.
    """

    model: str
    eps_or_rho: float
    delta: float = 0.0

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ValueError(f"unknown privacy model {self.model!r}")
        if not self.eps_or_rho > 0:
            raise ValueError("eps_or_rho must be positive")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError("delta must lie in [0, 1)")

    @classmethod
    def zcdp(cls, rho: float, delta: float = 0.0) -> "PrivacyBudget":
        return cls(ZCDP, rho, delta)

    @classmethod
    def pure_dp(cls, eps: float, delta: float = 0.0) -> "PrivacyBudget":
        return cls(PURE_DP, eps, delta)

    @classmethod
    def noise_off(cls, model: str = ZCDP) -> "PrivacyBudget":
        """Debug sentinel: infinite budget, all mechanisms become exact."""
        return cls(model, math.inf, 0.0)

    @property
    def is_noise_off(self) -> bool:
        return math.isinf(self.eps_or_rho)

    def split(self, fractions) -> list["PrivacyBudget"]:
        return split_budget(self, fractions)


def split_budget(parent: PrivacyBudget, fractions) -> list[PrivacyBudget]:
    """Split a budget into children along `fractions` (must sum to 1).

    Conservation is exact: the last child receives the parent minus the
    other children, so the float sums match the parent bit for bit.
    """
    fractions = [float(f) for f in fractions]
    if not fractions:
        raise ValueError("need at least one fraction")
    if any(f <= 0 for f in fractions):
        raise ValueError("fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-12:
        raise ValueError(f"fractions sum to {sum(fractions)}, expected 1")
    eps_parts = [parent.eps_or_rho * f for f in fractions[:-1]]
    delta_parts = [parent.delta * f for f in fractions[:-1]]
    if math.isinf(parent.eps_or_rho):
        eps_parts = [math.inf] * (len(fractions) - 1)
        eps_last = math.inf
    else:
        eps_last = parent.eps_or_rho - sum(eps_parts)
    delta_last = parent.delta - sum(delta_parts)
    eps_parts.append(eps_last)
    delta_parts.append(max(delta_last, 0.0))
    return [
        PrivacyBudget(parent.model, e, dl) for e, dl in zip(eps_parts, delta_parts)
    ]


@dataclass(frozen=True)
class NoiseSpec:
    """Calibration record: sensitivity plus the derived noise parameter.

    For the Gaussian mechanism ``sigma_or_scale`` is sensitivity/sqrt(2*rho);
    for the Laplace mechanism it is sensitivity/eps.
    """

    sensitivity: float
    sigma_or_scale: float
    dimension: int


def gaussian_sigma(sensitivity: float, rho: float) -> float:
    """Per-coordinate std of the rho-zCDP Gaussian mechanism at l2 sensitivity."""
    if sensitivity < 0:
        raise ValueError("sensitivity must be non-negative")
    if not rho > 0:
        raise ValueError("rho must be positive")
    if sensitivity == 0.0:
        return 0.0
    return sensitivity / math.sqrt(2.0 * rho)


def laplace_scale(l1_sensitivity: float, eps: float) -> float:
    """Laplace scale for eps-DP at the given l1 sensitivity."""
    if l1_sensitivity < 0:
        raise ValueError("sensitivity must be non-negative")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if l1_sensitivity == 0.0:
        return 0.0
    return l1_sensitivity / eps


def gaussian_mechanism(v, sensitivity: float, rho: float, rng: np.random.Generator):
    """Add i.i.d. N(0, sigma^2) noise with sigma = sensitivity/sqrt(2*rho).

    Deterministic given the Generator state; with zero sensitivity or an
    infinite budget the input is returned unchanged (as a copy).
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("input vector must be finite")
    sigma = gaussian_sigma(sensitivity, rho)
    if sigma == 0.0:
        return v.copy()
    return v + rng.normal(0.0, sigma, size=v.shape)


def laplace_mechanism(v, l1_sensitivity: float, eps: float, rng: np.random.Generator):
    """Add i.i.d. Laplace noise with scale l1_sensitivity/eps per coordinate."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("input vector must be finite")
    scale = laplace_scale(l1_sensitivity, eps)
    if scale == 0.0:
        return v.copy()
    return v + rng.laplace(0.0, scale, size=v.shape)
