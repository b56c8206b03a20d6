import math

import numpy as np
import pytest

from dpsubspace.datasets import SyntheticSpec, gen_synthetic
from dpsubspace.linalg import (
    GapProfile,
    SubspaceBasis,
    UnitRowDataset,
    check_perturbation_bound,
    gap_profile,
    normalize_rows,
    projection_distance,
    singular_spectrum,
    svd_topk,
    usefulness_error,
)

E1E1E2 = UnitRowDataset(np.array([[1.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]]))


def random_basis(d, k, rng):
    G = rng.standard_normal((d, k))
    Q, _ = np.linalg.qr(G)
    return SubspaceBasis(Q.T)


def test_unit_row_validation():
    with pytest.raises(ValueError):
        UnitRowDataset(np.array([[1.0, 1.0]]))
    with pytest.raises(ValueError):
        UnitRowDataset(np.array([[np.nan, 0.0]]))
    X = normalize_rows(np.array([[3.0, 4.0]]))
    assert np.allclose(X.data, [[0.6, 0.8]])


def test_basis_invariants_on_materialized_projection():
    rng = np.random.default_rng(0)
    for d, k in [(10, 2), (40, 5)]:
        b = random_basis(d, k, rng)
        pi = b.projection_matrix()
        assert np.max(np.abs(pi @ pi - pi)) < 1e-7
        assert abs(np.trace(pi) - k) < 1e-6


def test_svd_topk_diagonal_gram():
    basis = svd_topk(E1E1E2, 1)
    assert abs(abs(basis.basis[0, 0]) - 1.0) < 1e-9


def test_svd_topk_full_rank_reproduces_rows():
    rng = np.random.default_rng(1)
    X = normalize_rows(rng.standard_normal((6, 4)))
    basis = svd_topk(X, 4)
    assert np.max(np.abs(basis.apply(X.data) - X.data)) < 1e-8


def test_svd_topk_matches_dense_eigensolver_oracle():
    # 6x4 +-1/2 matrices vs top-2 eigenvectors of X^T X; tie seeds skipped
    ties = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X = (rng.integers(0, 2, size=(6, 4)) * 2 - 1) / 2.0
        s = np.linalg.svd(X, compute_uv=False)
        if s[1] - s[2] < 1e-6:
            ties += 1
            continue
        w, U = np.linalg.eigh(X.T @ X)
        oracle = SubspaceBasis(U[:, ::-1][:, :2].T)
        got = svd_topk(X, 2)
        assert projection_distance(got, oracle, "frobenius") <= 1e-7
    assert ties < 50


def test_svd_topk_randomized_backend_matches_dense():
    # min(n, d) > 512 routes through the seeded range finder
    spec = SyntheticSpec(n=600, d=700, k=3, tau=7000.0)
    X = gen_synthetic(spec, np.random.default_rng(3))
    got = svd_topk(X, 3)
    _, _, Vt = np.linalg.svd(X.data, full_matrices=False)
    oracle = SubspaceBasis(Vt[:3])
    assert projection_distance(got, oracle, "frobenius") <= 1e-7


def test_svd_topk_tie_flag():
    assert svd_topk(np.eye(3), 1).ambiguous
    assert not svd_topk(E1E1E2, 1).ambiguous


def test_usefulness_optimum_is_zero():
    rng = np.random.default_rng(4)
    X = normalize_rows(rng.standard_normal((30, 8)))
    assert usefulness_error(svd_topk(X, 3), X) == 0.0


def test_usefulness_hand_computed():
    wrong = SubspaceBasis(np.array([[0.0, 1.0, 0.0]]))
    assert usefulness_error(wrong, E1E1E2) == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_usefulness_bounded_by_one():
    rng = np.random.default_rng(5)
    for _ in range(20):
        X = normalize_rows(rng.standard_normal((12, 6)))
        cand = random_basis(6, 2, rng)
        err = usefulness_error(cand, X)
        assert 0.0 <= err <= 1.0


def test_gap_profile_exact_rank_k():
    X = gen_synthetic(SyntheticSpec(n=60, d=12, k=3, tau=math.inf), np.random.default_rng(6))
    profile = gap_profile(X, 3)
    assert profile.gamma1 == pytest.approx(0.0, abs=1e-7)
    assert profile.gamma2 == pytest.approx(0.0, abs=1e-7)


def test_gap_profile_hand_computed():
    # spectrum (sqrt(2), 1, 0)
    profile = gap_profile(E1E1E2, 1)
    assert profile.gamma1 == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert profile.gamma2 == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert profile.additive_gap == pytest.approx(1.0, abs=1e-12)


def test_gap_profile_gram_path_matches_full_svd_oracle():
    spec = SyntheticSpec(n=600, d=700, k=3, tau=7000.0)
    X = gen_synthetic(spec, np.random.default_rng(7))
    profile = gap_profile(X, 3)  # Gram path: min(n, d) > 512
    s = np.linalg.svd(X.data, compute_uv=False)
    gamma2_oracle = math.sqrt(np.sum(s[3:] ** 2)) / s[2]
    assert profile.gamma2 == pytest.approx(gamma2_oracle, abs=1e-9)


def test_gap_ordering_invariant():
    rng = np.random.default_rng(8)
    for _ in range(20):
        X = normalize_rows(rng.standard_normal((25, 10)))
        for k in (1, 3, 5):
            p = gap_profile(X, k)
            assert p.gamma1 <= p.gamma2 + 1e-12


def test_gap_profile_undefined_flag():
    X = UnitRowDataset(np.tile([1.0, 0.0, 0.0], (3, 1)))
    profile = gap_profile(X, 2)
    assert not profile.defined
    assert math.isnan(profile.gamma1)


def test_gap_predicates():
    p = GapProfile(k=1, sigma=np.array([2.0, 1.0]), gamma1=0.5, gamma2=0.6,
                   additive_gap=3.0, sigma_k_sq_over_nk=1.0)
    assert p.weak_predicate(0.7) and not p.weak_predicate(0.5)
    assert p.strong_predicate(0.5) and not p.strong_predicate(0.4)


def test_projection_distance_identical_and_orthogonal():
    a = SubspaceBasis(np.array([[1.0, 0.0]]))
    b = SubspaceBasis(np.array([[0.0, 1.0]]))
    assert projection_distance(a, a, "frobenius") == pytest.approx(0.0, abs=1e-12)
    assert projection_distance(a, b, "frobenius") == pytest.approx(math.sqrt(2), abs=1e-12)
    assert projection_distance(a, b, "spectral") == pytest.approx(1.0, abs=1e-12)


def test_projection_distance_matches_dense_oracle():
    rng = np.random.default_rng(9)
    for _ in range(10):
        a = random_basis(40, 3, rng)
        b = random_basis(40, 3, rng)
        diff = a.projection_matrix() - b.projection_matrix()
        assert projection_distance(a, b, "frobenius") == pytest.approx(
            np.linalg.norm(diff), abs=1e-9
        )
        assert projection_distance(a, b, "spectral") == pytest.approx(
            np.linalg.norm(diff, 2), abs=1e-9
        )


def test_frobenius_trace_identity_against_dense():
    rng = np.random.default_rng(10)
    for d in (16, 64):
        a = random_basis(d, 4, rng)
        b = random_basis(d, 4, rng)
        cross = np.sum((a.basis @ b.basis.T) ** 2)
        dense = np.linalg.norm(a.projection_matrix() - b.projection_matrix()) ** 2
        assert abs((2 * 4 - 2 * cross) - dense) < 1e-8


def test_perturbation_bound_trivial_case():
    rng = np.random.default_rng(11)
    P = rng.standard_normal((10, 6))
    report = check_perturbation_bound(P, P.copy(), 2)
    assert report.applicable
    assert report.projection_dist == pytest.approx(0.0, abs=1e-9)
    assert report.projection_holds


def test_perturbation_bound_random_rank_k():
    rng = np.random.default_rng(12)
    for seed in range(10):
        r = np.random.default_rng(seed)
        left = r.standard_normal((30, 2))
        right = r.standard_normal((2, 30))
        P = left @ right
        s = singular_spectrum(P)
        noise = r.standard_normal(P.shape)
        noise *= 0.1 * s[1] / np.linalg.norm(noise)
        report = check_perturbation_bound(P, P + noise, 2)
        assert report.applicable
        assert report.projection_holds


def test_usefulness_drop_bound_many_triples():
    rng = np.random.default_rng(13)
    for _ in range(200):
        X = normalize_rows(rng.standard_normal((8, 12)))
        P = rng.standard_normal((6, 12))
        Pp = rng.standard_normal((6, 12))
        report = check_perturbation_bound(P, Pp, 2, X=X)
        assert report.usefulness_holds
