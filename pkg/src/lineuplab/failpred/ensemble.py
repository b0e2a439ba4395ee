"""Dual-cohort failure-prediction ensemble.

Twenty base classifiers: ten trained on conservatively rebalanced data
(success:failure ratios 1.2 to 2.0) for precision, ten on aggressively
rebalanced data (0.7 to 1.1) for recall. Four learner families rotate
round-robin across each cohort's ten datasets. The ensemble probability is
the geometric mean of the two cohort means, and the decision threshold is
tuned on validation data over a 50-point grid from 0.25 to 0.75.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from lineuplab.errors import DataError
from lineuplab.failpred import learners
from lineuplab.failpred.learners import TreeParams, class_sample_weights
from lineuplab.imgfeat.standardize import Standardizer, fit_standardizer

SPLIT_FRACTIONS = (0.72, 0.08, 0.20)
THRESHOLD_GRID = np.linspace(0.25, 0.75, 50)

PRECISION_RATIOS = np.linspace(1.2, 2.0, 10)
RECALL_RATIOS = np.linspace(0.7, 1.1, 10)
RECALL_CLASS_WEIGHTS = np.linspace(1.5, 2.5, 10)
PRECISION_DEPTHS = (3, 4, 5, 6, 7, 8)
RECALL_DEPTHS = (8, 9, 10)

PRECISION_FAMILIES = ("logistic", "gradient_boosting", "random_forest", "xgb_style")
RECALL_FAMILIES = ("logistic", "extra_trees", "random_forest", "xgb_style")

LOGISTIC_MAX_ITER = 2000
TREE_ESTIMATOR_CAP = 100


@dataclass(frozen=True)
class LabeledDataset:
    """Feature rows with binary labels; label 1 marks a lineup failure."""

    ids: tuple[str, ...]
    matrix: np.ndarray        # (n, d) float64
    labels: np.ndarray        # (n,) int8
    tag: str = "train"        # train | val | test

    def __post_init__(self):
        if self.matrix.shape[0] != self.labels.shape[0] or len(self.ids) != self.labels.shape[0]:
            raise DataError("dataset rows, labels, and ids must align")

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])

    def take(self, rows, tag: str | None = None) -> "LabeledDataset":
        rows = np.asarray(rows)
        return LabeledDataset(
            ids=tuple(self.ids[i] for i in rows),
            matrix=self.matrix[rows],
            labels=self.labels[rows],
            tag=tag or self.tag,
        )


def dataset_from_arrays(matrix, labels, ids=None, tag="train") -> LabeledDataset:
    matrix = np.asarray(matrix, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int8)
    if matrix.ndim != 2:
        raise DataError("feature matrix must be 2-D")
    if ids is None:
        ids = tuple(str(i) for i in range(matrix.shape[0]))
    return LabeledDataset(ids=tuple(ids), matrix=matrix, labels=labels, tag=tag)


# ---------------------------------------------------------------------------
# Splitting and rebalancing


def _largest_remainder(n: int, fractions) -> list[int]:
    """Integer allocation of n by fractions; remainders break ties by order."""
    exact = [n * f for f in fractions]
    floors = [int(math.floor(e)) for e in exact]
    short = n - sum(floors)
    order = sorted(range(len(fractions)), key=lambda i: (-(exact[i] - floors[i]), i))
    for i in order[:short]:
        floors[i] += 1
    return floors


def stratified_split(data: LabeledDataset, fractions=SPLIT_FRACTIONS, seed: int = 0):
    """Split preserving per-class proportions within one sample.

    Classes are allocated independently by largest remainder, then shuffled
    deterministically and dealt into (train, val, test).
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"split fractions must sum to 1, got {sum(fractions)}")
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in (0, 1):
        rows = np.flatnonzero(data.labels == cls)
        if rows.size < 3:
            raise DataError(f"class {cls} has {rows.size} samples, need at least 3")
        rows = rng.permutation(rows)
        counts = _largest_remainder(rows.size, fractions)
        start = 0
        for part, count in zip(parts, counts):
            part.append(rows[start : start + count])
            start += count
    tags = ("train", "val", "test")
    out = []
    for part, tag in zip(parts, tags):
        rows = np.sort(np.concatenate(part))
        out.append(data.take(rows, tag=tag))
    return tuple(out)


@dataclass(frozen=True)
class RebalanceSpec:
    ratio: float      # successes kept per failure
    seed: int
    objective: str    # "precision" | "recall"

    def __post_init__(self):
        if self.ratio <= 0:
            raise DataError(f"rebalance ratio must be positive, got {self.ratio}")


def rebalance(train: LabeledDataset, spec: RebalanceSpec) -> LabeledDataset:
    """Undersample successes to round(ratio * failures); failures all stay.

    Rounding is half-up for cross-platform stability. Kept rows preserve
    their original order, so downstream training is order-deterministic.
    """
    failures = np.flatnonzero(train.labels == 1)
    successes = np.flatnonzero(train.labels == 0)
    if failures.size == 0:
        raise DataError("rebalance needs at least one failure sample")
    want = int(math.floor(spec.ratio * failures.size + 0.5))
    if want > successes.size:
        raise DataError(
            f"rebalance ratio {spec.ratio} needs {want} successes, only {successes.size} available"
        )
    rng = np.random.default_rng(spec.seed)
    kept = rng.choice(successes, size=want, replace=False)
    rows = np.sort(np.concatenate([failures, kept]))
    return train.take(rows)


# ---------------------------------------------------------------------------
# Base classifier configuration


@dataclass(frozen=True)
class BaseClassifierConfig:
    family: str
    seed: int
    C: float = 1.0
    max_iter: int = LOGISTIC_MAX_ITER
    n_estimators: int = TREE_ESTIMATOR_CAP
    max_depth: int = 6
    min_split: int = 20
    min_leaf: int = 10
    class_weight: float = 1.0   # loss weight on the failure class
    learning_rate: float = 0.1
    leaf_penalty: float = 1.0   # L2 leaf regularization (xgb_style only)

    def tree_params(self) -> TreeParams:
        return TreeParams(
            max_depth=self.max_depth,
            min_split=self.min_split,
            min_leaf=self.min_leaf,
        )


def precision_cohort_specs(seeds) -> tuple[tuple[RebalanceSpec, BaseClassifierConfig], ...]:
    """Ten conservative datasets: ratios 1.2..2.0, fixed 1.2 class weight."""
    out = []
    for i, ratio in enumerate(PRECISION_RATIOS):
        rebalance_seed, learner_seed = seeds[i]
        config = BaseClassifierConfig(
            family=PRECISION_FAMILIES[i % 4],
            seed=learner_seed,
            C=1.0,
            max_depth=PRECISION_DEPTHS[i % len(PRECISION_DEPTHS)],
            min_split=20,
            min_leaf=10,
            class_weight=1.2,
            learning_rate=0.1,
        )
        out.append((RebalanceSpec(float(ratio), rebalance_seed, "precision"), config))
    return tuple(out)


def recall_cohort_specs(seeds) -> tuple[tuple[RebalanceSpec, BaseClassifierConfig], ...]:
    """Ten aggressive datasets: ratios 0.7..1.1, class weights 1.5..2.5."""
    out = []
    for i, ratio in enumerate(RECALL_RATIOS):
        rebalance_seed, learner_seed = seeds[i]
        config = BaseClassifierConfig(
            family=RECALL_FAMILIES[i % 4],
            seed=learner_seed,
            C=0.1,
            max_depth=RECALL_DEPTHS[i % len(RECALL_DEPTHS)],
            min_split=10,
            min_leaf=5,
            class_weight=float(RECALL_CLASS_WEIGHTS[i]),
            learning_rate=0.05,
        )
        out.append((RebalanceSpec(float(ratio), rebalance_seed, "recall"), config))
    return tuple(out)


def _spawn_seed_pairs(seed: int, count: int):
    """Deterministic (rebalance_seed, learner_seed) integer pairs."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [tuple(int(s) for s in child.generate_state(2)) for child in children]


@dataclass(frozen=True)
class EnsembleConfig:
    seed: int = 0
    precision: tuple = ()
    recall: tuple = ()

    @staticmethod
    def default(seed: int = 0) -> "EnsembleConfig":
        pairs = _spawn_seed_pairs(seed, 20)
        return EnsembleConfig(
            seed=seed,
            precision=precision_cohort_specs(pairs[:10]),
            recall=recall_cohort_specs(pairs[10:]),
        )

    def scaled(self, n_estimators: int) -> "EnsembleConfig":
        """Same plan with a smaller tree budget (still capped at 100)."""
        cap = min(n_estimators, TREE_ESTIMATOR_CAP)
        shrink = lambda cohort: tuple(
            (spec, replace(cfg, n_estimators=cap)) for spec, cfg in cohort
        )
        return EnsembleConfig(self.seed, shrink(self.precision), shrink(self.recall))


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainedClassifier:
    spec: RebalanceSpec
    config: BaseClassifierConfig
    model: object  # LogisticModel | ForestModel | BoostedModel

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(X)


def train_base(config: BaseClassifierConfig, X: np.ndarray, y: np.ndarray):
    """Fit one base learner on standardized features."""
    y = np.asarray(y)
    if len(np.unique(y)) < 2:
        raise DataError("base training set must contain both classes")
    w = class_sample_weights(y, config.class_weight)
    if config.family == "logistic":
        return learners.fit_logistic(X, y, w, C=config.C, max_iter=config.max_iter)
    if config.family == "random_forest":
        rng = np.random.default_rng(config.seed)
        return learners.fit_forest(X, y, w, config.n_estimators, config.tree_params(), rng)
    if config.family == "extra_trees":
        rng = np.random.default_rng(config.seed)
        return learners.fit_forest(X, y, w, config.n_estimators, config.tree_params(), rng,
                                   random_thresholds=True)
    if config.family == "gradient_boosting":
        return learners.fit_gradient_boosting(
            X, y, w, config.n_estimators, config.learning_rate, config.tree_params()
        )
    if config.family == "xgb_style":
        return learners.fit_regularized_boosting(
            X, y, w, config.n_estimators, config.learning_rate, config.tree_params(),
            lam=config.leaf_penalty,
        )
    raise DataError(f"unknown learner family {config.family!r}")


@dataclass(frozen=True)
class EnsembleModel:
    precision_models: tuple[TrainedClassifier, ...]
    recall_models: tuple[TrainedClassifier, ...]
    standardizer: Standardizer
    threshold: float
    seed: int = 0
    grid_scores: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not 0.25 <= self.threshold <= 0.75:
            raise DataError(f"threshold {self.threshold} outside [0.25, 0.75]")

    def _cohort_mean(self, models, Z: np.ndarray) -> np.ndarray:
        acc = np.zeros(Z.shape[0])
        for tc in models:
            acc += tc.predict_proba(Z)
        return acc / len(models)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Geometric mean of the cohort means; X is raw (unstandardized)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Z = self.standardizer.transform(X)
        p_prec = self._cohort_mean(self.precision_models, Z)
        p_rec = self._cohort_mean(self.recall_models, Z)
        return np.sqrt(p_prec * p_rec)

    def classify(self, X: np.ndarray) -> np.ndarray:
        """Predicted failure when the probability reaches the threshold."""
        return self.predict_proba(X) >= self.threshold


def train_ensemble(train: LabeledDataset, val: LabeledDataset,
                   config: EnsembleConfig | None = None, seed: int = 0) -> EnsembleModel:
    if config is None:
        config = EnsembleConfig.default(seed)
    standardizer = fit_standardizer([train.matrix])
    Xtr = standardizer.transform(train.matrix)
    train_std = LabeledDataset(train.ids, Xtr, train.labels, train.tag)
    cohorts = []
    for cohort in (config.precision, config.recall):
        if len(cohort) != 10:
            raise DataError(f"each cohort needs 10 specs, got {len(cohort)}")
        fitted = []
        for spec, base_cfg in cohort:
            subset = rebalance(train_std, spec)
            model = train_base(base_cfg, subset.matrix, subset.labels)
            fitted.append(TrainedClassifier(spec=spec, config=base_cfg, model=model))
        cohorts.append(tuple(fitted))
    model = EnsembleModel(
        precision_models=cohorts[0],
        recall_models=cohorts[1],
        standardizer=standardizer,
        threshold=float(THRESHOLD_GRID[0]),
        seed=config.seed,
    )
    threshold, grid_scores = optimize_threshold(model, val, return_scores=True)
    return replace(model, threshold=threshold, grid_scores=grid_scores)


# ---------------------------------------------------------------------------
# Threshold and metrics


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int


def _metrics_from_counts(tp: int, fp: int, fn: int, tn: int) -> Metrics:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(precision, recall, f1, tp, fp, fn, tn)


def binary_metrics(labels: np.ndarray, predicted: np.ndarray) -> Metrics:
    labels = np.asarray(labels).astype(bool)
    predicted = np.asarray(predicted).astype(bool)
    tp = int(np.count_nonzero(labels & predicted))
    fp = int(np.count_nonzero(~labels & predicted))
    fn = int(np.count_nonzero(labels & ~predicted))
    tn = int(np.count_nonzero(~labels & ~predicted))
    return _metrics_from_counts(tp, fp, fn, tn)


def threshold_score(m: Metrics) -> float:
    """F1 when both precision and recall clear 0.5, else F1 - 1."""
    if m.precision >= 0.5 and m.recall >= 0.5:
        return m.f1
    return m.f1 - 1.0


def optimize_threshold(model: EnsembleModel, val: LabeledDataset,
                       return_scores: bool = False):
    """Best grid threshold on validation data; ties go to the lowest value."""
    if val.size == 0:
        raise DataError("threshold optimization needs a non-empty validation set")
    proba = model.predict_proba(val.matrix)
    scores = []
    recalls = []
    for t in THRESHOLD_GRID:
        m = binary_metrics(val.labels, proba >= t)
        scores.append(threshold_score(m))
        recalls.append(m.recall)
    # Raising the threshold can only shrink the predicted-positive set.
    diffs = np.diff(recalls)
    if np.any(diffs > 0):
        raise AssertionError("recall increased along the ascending threshold grid")
    best = int(np.argmax(scores))  # first maximum = lowest threshold
    threshold = float(THRESHOLD_GRID[best])
    if return_scores:
        return threshold, tuple(zip(map(float, THRESHOLD_GRID), map(float, scores)))
    return threshold


def evaluate_classifier(model: EnsembleModel, test: LabeledDataset) -> Metrics:
    if test.size == 0:
        raise DataError("evaluation needs a non-empty dataset")
    return binary_metrics(test.labels, model.classify(test.matrix))


# ---------------------------------------------------------------------------
# Cross-validation


@dataclass(frozen=True)
class StabilityReport:
    per_fold: tuple[Metrics, ...]
    cov_precision: float
    cov_recall: float


def _cov(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    mean = values.mean()
    if mean == 0.0:
        return 0.0
    return float(values.std() / mean)


def cross_validate(config: EnsembleConfig | None, data: LabeledDataset,
                   folds: int = 5, seed: int = 0) -> StabilityReport:
    """Stratified k-fold stability check.

    Each fold's training portion donates a deterministic 10% validation
    carve-out for threshold tuning; metrics come from the held-out fold.
    """
    if config is None:
        config = EnsembleConfig.default(seed)
    rng = np.random.default_rng(seed)
    fold_rows: list[list[np.ndarray]] = [[] for _ in range(folds)]
    for cls in (0, 1):
        rows = np.flatnonzero(data.labels == cls)
        if rows.size < folds:
            raise DataError(f"class {cls} has {rows.size} samples, need at least {folds}")
        rows = rng.permutation(rows)
        for i, chunk in enumerate(np.array_split(rows, folds)):
            fold_rows[i].append(chunk)
    fold_indices = [np.sort(np.concatenate(chunks)) for chunks in fold_rows]
    metrics: list[Metrics] = []
    for held in range(folds):
        train_rows = np.sort(np.concatenate(
            [fold_indices[i] for i in range(folds) if i != held]
        ))
        fit_part = data.take(train_rows, tag="train")
        inner_train, inner_val = _carve_validation(fit_part, rng_seed=seed + held + 1)
        model = train_ensemble(inner_train, inner_val, config=config)
        metrics.append(evaluate_classifier(model, data.take(fold_indices[held], tag="test")))
    return StabilityReport(
        per_fold=tuple(metrics),
        cov_precision=_cov([m.precision for m in metrics]),
        cov_recall=_cov([m.recall for m in metrics]),
    )


def _carve_validation(part: LabeledDataset, rng_seed: int, val_fraction: float = 0.1):
    """Stratified 90/10 train/val carve-out inside one CV fold."""
    rng = np.random.default_rng(rng_seed)
    val_rows = []
    for cls in (0, 1):
        rows = np.flatnonzero(part.labels == cls)
        count = max(1, int(math.floor(rows.size * val_fraction + 0.5)))
        val_rows.append(rng.permutation(rows)[:count])
    val_mask = np.zeros(part.size, dtype=bool)
    val_mask[np.concatenate(val_rows)] = True
    return (
        part.take(np.flatnonzero(~val_mask), tag="train"),
        part.take(np.flatnonzero(val_mask), tag="val"),
    )
