"""Differentially private subspace estimation from multiplicative spectral gaps.

The package provides:

- ``linalg``: unit-row datasets, factored subspace bases, gap profiles and
  the usefulness metric;
- ``budget``: (eps, delta) / (rho, delta) budgets, splitting, and the
  Gaussian and Laplace mechanisms;
- ``robust_average``: outlier-robust DP averaging with a private diameter
  search;
- ``estimator``: the sample-and-aggregate subspace estimators with both
  aggregation routes, parameter recipes, and private rank selection;
- ``baseline``: additive-gap subspace recovery and the plain Gaussian mean;
- ``hardness``: fingerprinting-codebook hard instances, gap validators, and
  the sign extractor;
- ``datasets`` / ``experiment`` / ``cli``: synthetic data, the binary
  dataset format, and the benchmark pipeline behind the dpsubspace command.
"""

from .baseline import (
    AnalyzeGaussReport,
    analyze_gauss_noise_std,
    analyze_gauss_noise_std_eps_delta,
    analyze_gauss_zcdp,
    plain_gaussian_mean,
)
from .budget import (
    PrivacyBudget,
    NoiseSpec,
    gaussian_mechanism,
    gaussian_sigma,
    laplace_mechanism,
    laplace_scale,
    make_rng,
    split_budget,
    substream,
)
from .datasets import (
    SyntheticSpec,
    gen_synthetic,
    load_csv_dataset,
    load_dataset,
    load_matrix,
    load_secret,
    save_dataset,
    save_matrix,
    save_secret,
    trimmed_mean,
)
from .estimator import (
    EstimatorConfig,
    ParamRecommendation,
    RankSelection,
    est_subspace,
    naive_agg,
    private_select_k,
    recommend_params,
    ss_agg,
    subset_closeness_experiment,
)
from .experiment import (
    ExperimentRun,
    ExperimentResults,
    PRESETS,
    PipelineResult,
    analyze_gauss_mean_pipeline,
    private_mean_pipeline,
    run_experiment,
)
from .hardness import (
    AgreementReport,
    ExtractResult,
    FpcCodebook,
    HardInstance,
    HardInstanceSecret,
    agreement_metrics,
    correlation_rate,
    extract,
    generate_hard_instance,
    instance_from_parts,
    marked_columns,
    pad_and_permute,
    plan_padding,
    planted_direction,
    sample_fpc,
    sample_secret,
    validate_strong_gap,
    validate_weak_gap,
)
from .linalg import (
    GapProfile,
    PerturbationReport,
    SubspaceBasis,
    SvdResult,
    UnitRowDataset,
    check_perturbation_bound,
    gap_profile,
    normalize_rows,
    projection_distance,
    singular_spectrum,
    svd_topk,
    usefulness_error,
)
from .robust_average import (
    AverageRequest,
    DiameterSearchConfig,
    NoDenseCoreError,
    RobustAverageResult,
    neighbor_sensitivity_probe,
    robust_dp_average,
    unknown_diameter_average,
)

__version__ = "0.1.0"
