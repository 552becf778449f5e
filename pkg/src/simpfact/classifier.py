"""Baseline severity classifiers: surface features + softmax regression.

One 3-class model per error category, trained by full-batch gradient
descent on multinomial cross-entropy with step-size backtracking. The
training protocol: minority classes are oversampled by duplication until
class counts match the most populous class, a held-out 20% split is scored
every epoch, and the checkpoint maximizing the mean of the class-1 and
class-2 F1 scores is returned. Gibberish (-1) examples are excluded from
classifier data upstream.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import SentencePair, token_surfaces
from .metrics import jaccard, length_change_pct, normalized_edit_distance

__all__ = [
    "FEATURE_NAMES",
    "TrainingDataError",
    "DivergenceError",
    "extract_features",
    "features_from_texts",
    "LabeledDataset",
    "dataset_from_records",
    "SeverityClassifier",
    "TrainConfig",
    "TrainResult",
    "cross_entropy_loss_and_grad",
    "oversample_to_balance",
    "train",
    "ClassReport",
    "EvalReport",
    "evaluate",
    "pipeline_pretrain_then_finetune",
    "save_model",
    "load_model",
]

FEATURE_NAMES = (
    "length_change_pct",
    "edit_distance_token",
    "edit_distance_char",
    "jaccard",
    "unigram_addition",
    "bigram_addition",
    "unigram_deletion",
    "bigram_deletion",
    "numeric_mismatch_count",
    "negation_mismatch",
    "provider_similarity",
    "provider_present",
)

CLASSES = (0, 1, 2)


class TrainingDataError(ValueError):
    """The dataset cannot support training (e.g. a single class)."""


class DivergenceError(RuntimeError):
    """The loss became non-finite during optimization."""


_NUMBER = re.compile(r"\d+")

_NEGATION_WORDS = frozenset(["not", "never", "no", "cannot", "none", "nothing", "neither", "nor"])


def _ngram_novelty(from_tokens: list[str], to_tokens: list[str], n: int) -> float:
    """Fraction of n-gram occurrences in `to` that never occur in `from`."""
    to_grams = [tuple(to_tokens[i : i + n]) for i in range(len(to_tokens) - n + 1)]
    if not to_grams:
        return 0.0
    from_grams = {tuple(from_tokens[i : i + n]) for i in range(len(from_tokens) - n + 1)}
    return sum(1 for gram in to_grams if gram not in from_grams) / len(to_grams)


def _numeric_mismatches(a: str, b: str) -> int:
    numbers_a = _NUMBER.findall(a)
    numbers_b = _NUMBER.findall(b)
    mismatches = sum(1 for x, y in zip(numbers_a, numbers_b) if x != y)
    return mismatches + abs(len(numbers_a) - len(numbers_b))


def _negation_count(tokens: list[str]) -> int:
    return sum(1 for t in tokens if t in _NEGATION_WORDS or t.endswith("n't"))


def features_from_texts(source: str, target: str, provider=None) -> np.ndarray:
    """Feature vector for a (source, target) text pair.

    Missing provider similarity is encoded as 0 with the presence flag 0.
    """
    src_tokens = token_surfaces(source, lowercase=True)
    tgt_tokens = token_surfaces(target, lowercase=True)
    src_set = set(src_tokens)
    tgt_set = set(tgt_tokens)
    if provider is not None:
        from .metrics import embed_similarity

        similarity = embed_similarity(source, target, provider)
        present = 1.0
    else:
        similarity = 0.0
        present = 0.0
    values = (
        length_change_pct(source, target),
        normalized_edit_distance(source, target, unit="token"),
        normalized_edit_distance(source, target, unit="char"),
        jaccard(source, target),
        sum(1 for t in tgt_tokens if t not in src_set) / len(tgt_tokens) if tgt_tokens else 0.0,
        _ngram_novelty(src_tokens, tgt_tokens, 2),
        sum(1 for t in src_tokens if t not in tgt_set) / len(src_tokens) if src_tokens else 0.0,
        _ngram_novelty(tgt_tokens, src_tokens, 2),
        float(_numeric_mismatches(source, target)),
        1.0 if _negation_count(src_tokens) != _negation_count(tgt_tokens) else 0.0,
        float(similarity),
        present,
    )
    vector = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(vector)):
        raise ValueError("non-finite feature value")
    return vector


def extract_features(pair: SentencePair, provider=None) -> np.ndarray:
    """Feature vector for a SentencePair (complex -> simple direction)."""
    return features_from_texts(pair.complex_text, pair.simple_text, provider=provider)


@dataclass
class LabeledDataset:
    """Feature matrix plus labels in {0, 1, 2}."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise ValueError("X must be (n, d) aligned with y")
        bad = set(np.unique(self.y)) - set(CLASSES)
        if bad:
            raise ValueError(f"labels outside {CLASSES}: {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.y)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.X.tobytes())
        h.update(self.y.tobytes())
        return h.hexdigest()


def dataset_from_records(records: Iterable[Mapping], provider=None) -> LabeledDataset:
    """Build a dataset from perturbation-style records with `source_text`,
    `target_text`, and `severity` fields. Severity -1 records are rejected."""
    rows = []
    labels = []
    for record in records:
        severity = record["severity"]
        if severity not in CLASSES:
            raise ValueError(f"severity {severity} not trainable; exclude -1 upstream")
        rows.append(features_from_texts(record["source_text"], record["target_text"], provider=provider))
        labels.append(severity)
    if not rows:
        raise ValueError("no records supplied")
    return LabeledDataset(X=np.vstack(rows), y=np.array(labels))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy_loss_and_grad(
    weights: np.ndarray, bias: np.ndarray, X: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean multinomial cross-entropy and its analytic gradient.

    weights is (classes, features); X is already normalized.
    """
    n = len(X)
    probs = _softmax(X @ weights.T + bias)
    eps = 1e-300  # guards log(0) for pathological parameters
    loss = -float(np.mean(np.log(probs[np.arange(n), y] + eps)))
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y] = 1.0
    delta = probs - onehot
    grad_w = delta.T @ X / n
    grad_b = delta.mean(axis=0)
    return loss, grad_w, grad_b


@dataclass
class SeverityClassifier:
    """Per-category 3-class softmax model with frozen normalization stats."""

    category: str
    weights: np.ndarray
    bias: np.ndarray
    norm_mean: np.ndarray
    norm_std: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def normalize(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.norm_mean) / self.norm_std

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.normalize(X) @ self.weights.T + self.bias)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def mean_cross_entropy(self, X: np.ndarray, y: np.ndarray) -> float:
        loss, _, _ = cross_entropy_loss_and_grad(self.weights, self.bias, self.normalize(X), np.asarray(y))
        return loss

    def copy(self) -> "SeverityClassifier":
        return SeverityClassifier(
            category=self.category,
            weights=self.weights.copy(),
            bias=self.bias.copy(),
            norm_mean=self.norm_mean.copy(),
            norm_std=self.norm_std.copy(),
            feature_names=self.feature_names,
        )


@dataclass
class TrainConfig:
    step_size: float = 0.5
    epochs: int = 300
    seed: int = 0
    holdout_fraction: float = 0.2
    backtracking: bool = True
    max_halvings: int = 40


@dataclass
class TrainResult:
    model: SeverityClassifier
    log: list[dict]
    best_epoch: int | None
    initial_loss: float | None
    final_loss: float | None
    train_X_raw: np.ndarray = field(repr=False, default=None)
    train_y: np.ndarray = field(repr=False, default=None)
    holdout_X_raw: np.ndarray = field(repr=False, default=None)
    holdout_y: np.ndarray = field(repr=False, default=None)


def oversample_to_balance(X: np.ndarray, y: np.ndarray, rng: random.Random) -> tuple[np.ndarray, np.ndarray]:
    """Duplicate minority-class rows until every class count equals the
    maximum. Pure duplication: the multiset of distinct rows is preserved."""
    counts = {cls: int(np.sum(y == cls)) for cls in np.unique(y)}
    target = max(counts.values())
    index_chunks = [np.arange(len(y))]
    for cls, count in sorted(counts.items()):
        class_indices = np.flatnonzero(y == cls)
        deficit = target - count
        full_copies, remainder = divmod(deficit, count)
        for _ in range(full_copies):
            index_chunks.append(class_indices)
        if remainder:
            chosen = sorted(rng.sample(range(count), remainder))
            index_chunks.append(class_indices[chosen])
    order = np.concatenate(index_chunks)
    return X[order], y[order]


def _stratified_split(
    y: np.ndarray, holdout_fraction: float, rng: random.Random
) -> tuple[np.ndarray, np.ndarray]:
    train_idx: list[int] = []
    holdout_idx: list[int] = []
    for cls in np.unique(y):
        class_indices = list(np.flatnonzero(y == cls))
        rng.shuffle(class_indices)
        n_holdout = int(len(class_indices) * holdout_fraction)
        holdout_idx.extend(class_indices[:n_holdout])
        train_idx.extend(class_indices[n_holdout:])
    return np.array(sorted(train_idx), dtype=np.int64), np.array(sorted(holdout_idx), dtype=np.int64)


def _per_class_f1(gold: np.ndarray, predicted: np.ndarray) -> dict[int, float | None]:
    """F1 per class; None when the class has no gold and no predictions."""
    scores: dict[int, float | None] = {}
    for cls in CLASSES:
        tp = int(np.sum((predicted == cls) & (gold == cls)))
        n_pred = int(np.sum(predicted == cls))
        n_gold = int(np.sum(gold == cls))
        if n_pred == 0 and n_gold == 0:
            scores[cls] = None
            continue
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gold if n_gold else 0.0
        scores[cls] = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return scores


def _mean_f1_12(f1s: Mapping[int, float | None]) -> float:
    return ((f1s[1] or 0.0) + (f1s[2] or 0.0)) / 2.0


def train(
    dataset: LabeledDataset,
    config: TrainConfig,
    category: str = "unspecified",
    init_model: SeverityClassifier | None = None,
) -> TrainResult:
    """Train a severity classifier and return the best checkpoint by mean
    of the class-1 and class-2 held-out F1 scores.

    When `init_model` is given, optimization continues from its weights and
    its normalization statistics are reused (kept frozen), so the stage-2
    start loss equals the init model's loss on the new data.
    """
    if len(np.unique(dataset.y)) < 2:
        raise TrainingDataError("training needs at least 2 classes present")
    rng = random.Random(config.seed)
    train_idx, holdout_idx = _stratified_split(dataset.y, config.holdout_fraction, rng)
    if len(np.unique(dataset.y[train_idx])) < 2:
        raise TrainingDataError("training split collapsed to a single class")
    X_train_raw, y_train = oversample_to_balance(dataset.X[train_idx], dataset.y[train_idx], rng)
    X_holdout_raw, y_holdout = dataset.X[holdout_idx], dataset.y[holdout_idx]

    if init_model is not None:
        norm_mean = init_model.norm_mean.copy()
        norm_std = init_model.norm_std.copy()
        weights = init_model.weights.copy()
        bias = init_model.bias.copy()
    else:
        norm_mean = X_train_raw.mean(axis=0)
        norm_std = X_train_raw.std(axis=0, ddof=0)
        norm_std[norm_std == 0] = 1.0  # constant features z-score to 0
        weights = np.zeros((len(CLASSES), dataset.X.shape[1]))
        bias = np.zeros(len(CLASSES))

    def make_model(w: np.ndarray, b: np.ndarray) -> SeverityClassifier:
        return SeverityClassifier(
            category=category,
            weights=w.copy(),
            bias=b.copy(),
            norm_mean=norm_mean,
            norm_std=norm_std,
            feature_names=dataset.feature_names,
        )

    X_train = (X_train_raw - norm_mean) / norm_std
    X_hold = (X_holdout_raw - norm_mean) / norm_std if len(holdout_idx) else X_holdout_raw

    if config.epochs == 0:
        model = make_model(weights, bias)
        return TrainResult(
            model=model, log=[], best_epoch=None, initial_loss=None, final_loss=None,
            train_X_raw=X_train_raw, train_y=y_train,
            holdout_X_raw=X_holdout_raw, holdout_y=y_holdout,
        )

    loss, grad_w, grad_b = cross_entropy_loss_and_grad(weights, bias, X_train, y_train)
    if not math.isfinite(loss):
        raise DivergenceError(f"initial loss non-finite at step size {config.step_size}")
    initial_loss = loss

    log: list[dict] = []
    best: tuple[float, int, SeverityClassifier] | None = None
    for epoch in range(1, config.epochs + 1):
        step = config.step_size
        new_w = weights - step * grad_w
        new_b = bias - step * grad_b
        new_loss, new_gw, new_gb = cross_entropy_loss_and_grad(new_w, new_b, X_train, y_train)
        if config.backtracking:
            halvings = 0
            while new_loss > loss and halvings < config.max_halvings:
                step /= 2
                halvings += 1
                new_w = weights - step * grad_w
                new_b = bias - step * grad_b
                new_loss, new_gw, new_gb = cross_entropy_loss_and_grad(new_w, new_b, X_train, y_train)
            if new_loss > loss:
                new_w, new_b, new_loss, new_gw, new_gb = weights, bias, loss, grad_w, grad_b
        if not math.isfinite(new_loss):
            raise DivergenceError(f"loss became non-finite at step size {step}")
        weights, bias, loss, grad_w, grad_b = new_w, new_b, new_loss, new_gw, new_gb

        if len(holdout_idx):
            probs = _softmax(X_hold @ weights.T + bias)
            predicted = np.argmax(probs, axis=1)
            f1s = _per_class_f1(y_holdout, predicted)
        else:
            f1s = {cls: None for cls in CLASSES}
        mean_f1 = _mean_f1_12(f1s)
        log.append(
            {
                "epoch": epoch,
                "loss": loss,
                "step_size": step,
                "holdout_f1": {str(cls): f1s[cls] for cls in CLASSES},
                "mean_f1_12": mean_f1,
            }
        )
        if best is None or mean_f1 > best[0]:
            best = (mean_f1, epoch, make_model(weights, bias))

    assert best is not None
    return TrainResult(
        model=best[2],
        log=log,
        best_epoch=best[1],
        initial_loss=initial_loss,
        final_loss=loss,
        train_X_raw=X_train_raw,
        train_y=y_train,
        holdout_X_raw=X_holdout_raw,
        holdout_y=y_holdout,
    )


@dataclass
class ClassReport:
    n_gold: int
    n_predicted: int
    precision: float | None
    recall: float | None
    f1: float | None

    def to_record(self) -> dict:
        return {
            "n_gold": self.n_gold,
            "n_predicted": self.n_predicted,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class EvalReport:
    per_class: dict[int, ClassReport]
    accuracy: float
    n_examples: int
    n_excluded: int = 0

    @property
    def macro_f1(self) -> float:
        present = [r.f1 for r in self.per_class.values() if r.f1 is not None]
        return sum(present) / len(present) if present else 0.0

    @property
    def mean_f1_12(self) -> float:
        return (
            (self.per_class[1].f1 or 0.0) + (self.per_class[2].f1 or 0.0)
        ) / 2.0

    def to_record(self) -> dict:
        return {
            "per_class": {str(cls): report.to_record() for cls, report in self.per_class.items()},
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "mean_f1_12": self.mean_f1_12,
            "n_examples": self.n_examples,
            "n_excluded": self.n_excluded,
        }


def evaluate(model: SeverityClassifier, dataset: LabeledDataset, n_excluded: int = 0) -> EvalReport:
    """Per-class precision/recall/F1 on a test set.

    A class with no gold examples and no predictions is reported as absent
    (None fields); F1 is 0 when precision + recall is 0.
    """
    if len(dataset) == 0:
        raise ValueError("empty test set")
    predicted = model.predict(dataset.X)
    gold = dataset.y
    per_class = {}
    for cls in CLASSES:
        tp = int(np.sum((predicted == cls) & (gold == cls)))
        n_pred = int(np.sum(predicted == cls))
        n_gold = int(np.sum(gold == cls))
        if n_pred == 0 and n_gold == 0:
            per_class[cls] = ClassReport(0, 0, None, None, None)
            continue
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gold if n_gold else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[cls] = ClassReport(n_gold, n_pred, precision, recall, f1)
    accuracy = float(np.mean(predicted == gold))
    return EvalReport(per_class=per_class, accuracy=accuracy, n_examples=len(dataset), n_excluded=n_excluded)


@dataclass
class PipelineResult:
    model: SeverityClassifier
    pretrain: TrainResult
    finetune: TrainResult
    stage2_start_loss: float
    stage1_loss_recomputed: float


def pipeline_pretrain_then_finetune(
    synthetic: LabeledDataset,
    real: LabeledDataset,
    pretrain_config: TrainConfig,
    finetune_config: TrainConfig,
    category: str = "unspecified",
) -> PipelineResult:
    """Two-stage training: pretrain on synthetic data, then continue from the
    best pretraining checkpoint on the real annotations.

    Applies to insertion and substitution; the deletion model trains
    directly on its real data with plain train().
    """
    if category == "deletion":
        raise TrainingDataError("deletion trains directly on real data; no synthetic pretraining stage")
    stage1 = train(synthetic, pretrain_config, category=category)
    stage2 = train(real, finetune_config, category=category, init_model=stage1.model)
    recomputed = stage1.model.mean_cross_entropy(stage2.train_X_raw, stage2.train_y)
    return PipelineResult(
        model=stage2.model,
        pretrain=stage1,
        finetune=stage2,
        stage2_start_loss=stage2.initial_loss,
        stage1_loss_recomputed=recomputed,
    )


def save_model(model: SeverityClassifier, path: str | Path, manifest: dict | None = None) -> None:
    payload = {
        "category": model.category,
        "feature_names": list(model.feature_names),
        "norm_mean": model.norm_mean.tolist(),
        "norm_std": model.norm_std.tolist(),
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "manifest": manifest or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> SeverityClassifier:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return SeverityClassifier(
        category=payload["category"],
        weights=np.array(payload["weights"], dtype=np.float64),
        bias=np.array(payload["bias"], dtype=np.float64),
        norm_mean=np.array(payload["norm_mean"], dtype=np.float64),
        norm_std=np.array(payload["norm_std"], dtype=np.float64),
        feature_names=tuple(payload["feature_names"]),
    )
