"""Crime-type prediction from incident coordinates and dispatch times.

End-to-end workflow: ingest incident CSVs, select a cluster count, stack
per-year K-Means centers, derive cluster-distance features, train multiclass
classifiers, and evaluate with smoothed multiclass log loss.
"""

__version__ = "0.1.0"

from .clustering import (
    ClusterModel,
    DensityGrid,
    ElbowReport,
    GapReport,
    StackedCenters,
    cluster_inertia,
    elbow_select,
    gap_statistic,
    kde_density_grid,
    kmeans_fit,
    nearest_center_distance,
    nearest_center_distances,
    stack_yearly_centers,
)
from .evaluation import (
    EvaluationReport,
    SmoothingResult,
    accuracy,
    baseline_uniform_loss,
    evaluate_predictions,
    multiclass_log_loss,
    per_label_diagnostics,
    smoothing_search,
)
from .features import (
    AddressVocabulary,
    FeatureMatrix,
    FeatureSchema,
    PcaModel,
    SpatialReference,
    Standardization,
    address_features,
    build_feature_matrix,
    pca_fit,
    pca_inverse_transform,
    pca_transform,
    spatial_features,
    standardize,
    temporal_features,
)
from .ingest import (
    BoundingBox,
    CountAggregate,
    CrimeRecord,
    CsvSchema,
    SplitDataset,
    aggregate_counts,
    chronological_split,
    clean_records,
    parse_csv,
    split_by_year,
)
from .labels import CLASS_COUNT, CLASS_NAMES, ClassLabel, decode_label, encode_label
from .models import (
    Classifier,
    ImportanceRanking,
    feature_importance,
    load_model,
    predict_proba,
    save_model,
    train_decision_tree,
    train_gaussian_nb,
    train_knn,
    train_logistic_regression,
    train_model,
    train_random_forest,
)
from .pipeline import PipelineConfig, RunManifest, run_pipeline
