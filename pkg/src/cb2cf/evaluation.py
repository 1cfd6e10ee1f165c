"""Rank-based evaluation of predicted CF vectors and the k-fold ablation
protocol.

The percentile rank of an item counts catalog items whose cosine to the
predicted vector strictly exceeds the cosine of the item's own original
vector, so ties favor the original; dividing by catalog size minus one puts
0 at a perfect retrieval and 0.5 at random. NDCG(K) retrieves the K most
similar catalog items to the prediction, scores each by its clamped cosine
to the item's original vector, discounts by 1/log2(rank+1), and normalizes
by the ideal ordering induced by the original vector itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .features import Centroids, fit_feature_context, featurize_item
from .model import (Cb2cfModel, SystemSpec, TrainConfig, build_model,
                    bundle_parts, predict, train)
from .sgns import EmbeddingTable, similarity_search

DEFAULT_NDCG_KS = (10, 30, 50, 100, 200, 500, 1000)
REPORT_VERSION = 1


@dataclass
class FoldAssignment:
    assignment: dict[str, int]
    folds: int
    seed: int

    def items_in(self, fold: int) -> list[str]:
        if not 0 <= fold < self.folds:
            raise ValueError(f"fold {fold} outside 0..{self.folds - 1}")
        return sorted(i for i, f in self.assignment.items() if f == fold)

    def items_not_in(self, fold: int) -> list[str]:
        if not 0 <= fold < self.folds:
            raise ValueError(f"fold {fold} outside 0..{self.folds - 1}")
        return sorted(i for i, f in self.assignment.items() if f != fold)


def make_folds(ids: Sequence[str], folds: int = 10, seed: int = 0) -> FoldAssignment:
    """Seeded shuffle then round-robin assignment, so fold sizes differ by
    at most one and a fixed seed reproduces the split exactly."""
    unique = sorted(set(ids))
    if len(unique) != len(ids):
        raise ValueError("duplicate ids")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if len(unique) < folds:
        raise ValueError("fewer items than folds")
    shuffled = list(unique)
    np.random.default_rng(seed).shuffle(shuffled)
    return FoldAssignment({item: p % folds for p, item in enumerate(shuffled)},
                          folds, seed)


def _vector(source, item_id: str) -> np.ndarray:
    if isinstance(source, EmbeddingTable):
        if item_id not in source:
            raise ValueError(f"no vector for item {item_id!r}")
        return source.get(item_id)
    return np.asarray(source[item_id], dtype=np.float64)


def mse_metric(originals, predictions: Mapping[str, np.ndarray]) -> float:
    """Mean over items of the per-coordinate mean squared difference."""
    if not predictions:
        raise ValueError("no predictions")
    total = 0.0
    for item_id, predicted in predictions.items():
        original = _vector(originals, item_id)
        predicted = np.asarray(predicted, dtype=np.float64)
        if predicted.shape != original.shape:
            raise ValueError(f"shape mismatch for {item_id!r}")
        diff = predicted - original
        total += float(np.sum(diff * diff) / diff.size)
    return total / len(predictions)


def _catalog_cosines(predicted: np.ndarray, catalog: EmbeddingTable) -> np.ndarray:
    """Cosine of the predicted vector to every catalog row; zero-norm rows
    get -1.0. Returns None-equivalent handling upstream for zero-norm query."""
    norms = np.linalg.norm(catalog.vectors, axis=1)
    qnorm = float(np.linalg.norm(predicted))
    safe = np.where(norms > 0, norms * qnorm, 1.0)
    return np.where(norms > 0, (catalog.vectors @ predicted) / safe, -1.0)


def percentile_rank(item_id: str, predicted: np.ndarray,
                    catalog: EmbeddingTable) -> int:
    """Number of other catalog items strictly more similar to the predicted
    vector than the item's own original vector. A zero-norm prediction takes
    the worst possible rank."""
    if item_id not in catalog:
        raise ValueError(f"item {item_id!r} not in catalog")
    if len(catalog) < 2:
        raise ValueError("catalog needs at least 2 items")
    predicted = np.asarray(predicted, dtype=np.float64)
    if predicted.shape != (catalog.dim,):
        raise ValueError("predicted vector dimension mismatch")
    if float(np.linalg.norm(predicted)) == 0.0:
        return len(catalog) - 1
    sims = _catalog_cosines(predicted, catalog)
    own = catalog.index[item_id]
    better = sims > sims[own]
    better[own] = False
    return int(np.count_nonzero(better))


def mpr(predictions: Mapping[str, np.ndarray], catalog: EmbeddingTable) -> float:
    """Mean of percentile ranks normalized by catalog size minus one:
    0 is perfect, 0.5 is random."""
    if not predictions:
        raise ValueError("no predictions")
    denom = len(catalog) - 1
    total = sum(percentile_rank(i, v, catalog) for i, v in predictions.items())
    return total / (len(predictions) * denom)


def ndcg_at_k(item_id: str, predicted: np.ndarray, catalog: EmbeddingTable,
              k: int) -> float:
    """Relevance of a retrieved item is its cosine to the original vector,
    clamped at zero. The ideal ranking orders the catalog by the original
    vector itself. Zero ideal gain (below 1e-12) scores 0."""
    if item_id not in catalog:
        raise ValueError(f"item {item_id!r} not in catalog")
    if not 1 <= k <= len(catalog) - 1:
        raise ValueError(f"k must be in 1..{len(catalog) - 1}")
    predicted = np.asarray(predicted, dtype=np.float64)
    original = catalog.get(item_id)
    if float(np.linalg.norm(predicted)) == 0.0:
        return 0.0

    def dcg(ranked_ids: Sequence[str]) -> float:
        total = 0.0
        for position, rid in enumerate(ranked_ids, start=1):
            relevance = max(0.0, _cos(catalog.get(rid), original))
            total += relevance / math.log2(position + 1)
        return total

    retrieved = [rid for rid, _ in similarity_search(predicted, catalog, k,
                                                     exclude={item_id})]
    ideal = [rid for rid, _ in similarity_search(original, catalog, k,
                                                 exclude={item_id})] \
        if float(np.linalg.norm(original)) > 0 else []
    idcg = dcg(ideal) if ideal else 0.0
    if idcg < 1e-12:
        return 0.0
    return dcg(retrieved) / idcg


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return -1.0
    return float(np.dot(a, b) / (na * nb))


def mean_ndcg(predictions: Mapping[str, np.ndarray], catalog: EmbeddingTable,
              k: int) -> float:
    if not predictions:
        raise ValueError("no predictions")
    return sum(ndcg_at_k(i, v, catalog, k) for i, v in predictions.items()) / len(predictions)


@dataclass
class FoldMetrics:
    fold: int | None  # None marks the cross-fold mean row
    mse: float
    mpr: float
    ndcg: dict[int, float]


@dataclass
class SystemReport:
    system: str
    folds: list[FoldMetrics]
    mean: FoldMetrics


@dataclass
class EvalDataset:
    """Profiles plus the full CF catalog they are scored against, and the
    corpus-level text assets shared by every fold."""

    profiles: list
    targets: EmbeddingTable
    word_table: EmbeddingTable | None = None
    centroids: Centroids | None = None


@dataclass
class EvalReport:
    systems: list[SystemReport]
    ndcg_ks: tuple[int, ...]
    folds: int
    seed: int


Predictor = Callable[[list[str]], np.ndarray]


def _fold_seed(base: int, fold: int) -> int:
    return base + 1_000_003 * (fold + 1)


def run_system(system: str | SystemSpec, dataset: EvalDataset,
               folds: FoldAssignment, config: TrainConfig, *,
               ndcg_ks: Sequence[int] = DEFAULT_NDCG_KS,
               min_tag_count: int = 5, temperature: float = 0.1,
               spec_overrides: Mapping | None = None,
               predictor: Predictor | None = None) -> SystemReport:
    """Train and score one system across all folds.

    Every fold refits the item-dependent feature statistics on its training
    items only; predictions for the held-out items are ranked against the
    full catalog. ``predictor`` replaces the model entirely (a testing hook
    mapping test ids to predicted vectors).
    """
    catalog = dataset.targets
    for k in ndcg_ks:
        if not 1 <= k <= len(catalog) - 1:
            raise ValueError(f"ndcg cutoff {k} invalid for catalog of {len(catalog)}")
    if isinstance(system, SystemSpec):
        spec = system
    else:
        spec = SystemSpec.named(system, output_dim=catalog.dim,
                                **(spec_overrides or {}))
    by_id = {p.id: p for p in dataset.profiles}
    for item_id in folds.assignment:
        if item_id not in catalog:
            raise ValueError(f"fold item {item_id!r} has no target vector")
        if predictor is None and item_id not in by_id:
            raise ValueError(f"fold item {item_id!r} has no profile")

    parts = bundle_parts(spec)
    fold_rows: list[FoldMetrics] = []
    for fold in range(folds.folds):
        test_ids = folds.items_in(fold)
        if predictor is not None:
            predicted = predictor(test_ids)
        else:
            train_ids = folds.items_not_in(fold)
            context = fit_feature_context(
                [by_id[i] for i in train_ids],
                word_table=dataset.word_table, centroids=dataset.centroids,
                max_words=spec.text_length, min_tag_count=min_tag_count,
                temperature=temperature)
            train_bundles = [featurize_item(by_id[i], context, parts) for i in train_ids]
            test_bundles = [featurize_item(by_id[i], context, parts) for i in test_ids]
            seed = _fold_seed(config.seed, fold)
            model = build_model(spec, context, seed=seed)
            train(model, train_bundles, catalog, replace(config, seed=seed))
            predicted = predict(model, test_bundles)
        predictions = {item_id: predicted[i] for i, item_id in enumerate(test_ids)}
        fold_rows.append(FoldMetrics(
            fold=fold,
            mse=mse_metric(catalog, predictions),
            mpr=mpr(predictions, catalog),
            ndcg={k: mean_ndcg(predictions, catalog, k) for k in ndcg_ks},
        ))
    mean_row = FoldMetrics(
        fold=None,
        mse=float(np.mean([r.mse for r in fold_rows])),
        mpr=float(np.mean([r.mpr for r in fold_rows])),
        ndcg={k: float(np.mean([r.ndcg[k] for r in fold_rows])) for k in ndcg_ks},
    )
    name = spec.name if isinstance(system, SystemSpec) else system
    return SystemReport(name, fold_rows, mean_row)


def run_evaluation(systems: Sequence[str], dataset: EvalDataset,
                   config: TrainConfig, *, folds: int = 10, seed: int = 0,
                   ndcg_ks: Sequence[int] = DEFAULT_NDCG_KS,
                   min_tag_count: int = 5, temperature: float = 0.1,
                   spec_overrides: Mapping | None = None) -> EvalReport:
    """Run every named system over one shared fold assignment."""
    ids = [p.id for p in dataset.profiles]
    missing = [i for i in ids if i not in dataset.targets]
    if missing:
        raise ValueError(f"{len(missing)} profiles have no target vector "
                         f"(first: {missing[0]!r})")
    assignment = make_folds(ids, folds=folds, seed=seed)
    ks = tuple(ndcg_ks)
    reports = [run_system(name, dataset, assignment, config, ndcg_ks=ks,
                          min_tag_count=min_tag_count, temperature=temperature,
                          spec_overrides=spec_overrides)
               for name in systems]
    return EvalReport(reports, ks, folds, seed)


def report_tsv(report: EvalReport) -> str:
    """Tab-separated rows: one per system and fold plus a mean row per
    system. Floats use repr so identical runs serialize identically."""
    header = ["system", "fold", "mse", "mpr"] + [f"ndcg@{k}" for k in report.ndcg_ks]
    lines = ["\t".join(header)]
    for sys_report in report.systems:
        for row in sys_report.folds + [sys_report.mean]:
            fold_label = "mean" if row.fold is None else str(row.fold)
            cells = [sys_report.system, fold_label, repr(row.mse), repr(row.mpr)]
            cells += [repr(row.ndcg[k]) for k in report.ndcg_ks]
            lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def report_json_dict(report: EvalReport) -> dict:
    def row_dict(row: FoldMetrics) -> dict:
        return {"mse": row.mse, "mpr": row.mpr,
                "ndcg": {str(k): row.ndcg[k] for k in report.ndcg_ks}}

    return {
        "version": REPORT_VERSION,
        "folds": report.folds,
        "seed": report.seed,
        "ndcg_ks": list(report.ndcg_ks),
        "systems": [
            {"system": s.system,
             "folds": [{"fold": r.fold, **row_dict(r)} for r in s.folds],
             "mean": row_dict(s.mean)}
            for s in report.systems
        ],
    }
