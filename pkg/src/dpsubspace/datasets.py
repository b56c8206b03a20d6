"""Synthetic data generation, dataset files, and the trimmed-mean aggregator.

The canonical dataset file is binary so runs reproduce bit-exactly:
magic ``DSB1``, then little-endian u64 row and column counts, then the
row-major float64 payload.  CSV import exists for interoperability only.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .hardness import HardInstance, HardInstanceSecret
from .linalg import UnitRowDataset, normalize_rows

_MAGIC = b"DSB1"


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the near-rank-k synthetic generator."""

    n: int
    d: int
    k: int
    tau: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1 or self.k < 1 or self.k > self.d:
            raise ValueError("need n, d >= 1 and 1 <= k <= d")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


def gen_synthetic(spec: SyntheticSpec, rng: np.random.Generator) -> UnitRowDataset:
    """Unit-norm points near a random k-dimensional sign-vector span.

    Draws k uniform sign vectors b_1..b_k; each point is a uniformly random
    unit vector of their span plus i.i.d. +-1/tau coordinate noise, then
    normalized.  Larger tau means rows closer to the span; tau = inf turns
    the noise off entirely, making the dataset exactly rank k.
    """
    n, d, k, tau = spec.n, spec.d, spec.k, spec.tau
    B = rng.integers(0, 2, size=(k, d)).astype(float) * 2.0 - 1.0
    coeffs = rng.standard_normal((n, k))
    U = coeffs @ B
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    if math.isinf(tau):
        return normalize_rows(U)
    noise = (rng.integers(0, 2, size=(n, d)).astype(float) * 2.0 - 1.0) / tau
    return normalize_rows(U + noise)


def save_matrix(path: Union[str, Path], M: np.ndarray) -> None:
    """Write a 2-D float64 matrix in the DSB1 binary format."""
    M = np.ascontiguousarray(np.asarray(M, dtype="<f8"))
    if M.ndim != 2:
        raise ValueError("only 2-D matrices are supported")
    n, d = M.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", n, d))
        fh.write(M.tobytes(order="C"))


def load_matrix(path: Union[str, Path]) -> np.ndarray:
    """Read a DSB1 matrix; raises ValueError on a malformed file."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a DSB1 file")
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError(f"{path}: truncated header")
        n, d = struct.unpack("<QQ", header)
        payload = fh.read()
    expected = n * d * 8
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f8").reshape(n, d).astype(float)


def save_dataset(path: Union[str, Path], X: UnitRowDataset) -> None:
    save_matrix(path, X.data)


def load_dataset(path: Union[str, Path]) -> UnitRowDataset:
    return UnitRowDataset(load_matrix(path))


def load_csv_dataset(path: Union[str, Path]) -> UnitRowDataset:
    """Import a comma-separated matrix, validating unit rows."""
    M = np.loadtxt(path, delimiter=",", ndmin=2)
    return UnitRowDataset(M)


def save_secret(path: Union[str, Path], inst: HardInstance) -> None:
    """Sidecar JSON with a hard instance's secret and shape parameters."""
    payload = {
        "s": inst.secret.s,
        "perms": [np.asarray(p).tolist() for p in inst.secret.perms],
        "n0": inst.n0,
        "d0": inst.d0,
        "ell": inst.ell,
        "k": inst.k,
    }
    Path(path).write_text(json.dumps(payload))


def load_secret(path: Union[str, Path]) -> dict:
    """Load a secret sidecar; returns the dict with the secret reconstructed."""
    payload = json.loads(Path(path).read_text())
    for key in ("s", "perms", "n0", "d0", "ell", "k"):
        if key not in payload:
            raise ValueError(f"{path}: missing field {key!r}")
    payload["secret"] = HardInstanceSecret(
        s=int(payload["s"]),
        perms=tuple(np.asarray(p, dtype=int) for p in payload["perms"]),
    )
    return payload


def trimmed_mean(values, lower: float = 0.1, upper: float = 0.9) -> float:
    """Mean of the values between the nearest-rank lower/upper quantiles, inclusive.

    Ties are handled by value: every element equal to a boundary quantile is
    kept, which makes the statistic deterministic under reordering.
    """
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("need at least one value")
    lo = v[max(math.ceil(lower * v.size), 1) - 1]
    hi = v[max(math.ceil(upper * v.size), 1) - 1]
    kept = v[(v >= lo) & (v <= hi)]
    return float(kept.mean())
