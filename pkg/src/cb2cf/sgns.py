"""Skip-gram with negative sampling over word sequences and item sets.

One trainer serves both modes. Word sequences draw a fresh context window
per position; item co-occurrence sets treat the whole set as the window and
emit every ordered pair. Positive pairs maximize log(sigmoid(u.v)) while
sampled negatives maximize log(sigmoid(-u.v')), with negatives drawn from
the unigram distribution raised to the 3/4 power.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LR_FLOOR_FRACTION = 1e-4
NOISE_POWER = 0.75


def sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic function."""
    return np.where(
        np.asarray(x) >= 0,
        1.0 / (1.0 + np.exp(-np.clip(x, -500, 500))),
        np.exp(np.clip(x, -500, 500)) / (1.0 + np.exp(np.clip(x, -500, 500))),
    )


@dataclass
class SgnsConfig:
    dim: int = 40
    epochs: int = 100
    negatives: int = 15
    subsample: float = 1e-4
    window: int = 4
    learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample threshold must be in (0, 1]")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")

    @classmethod
    def item_defaults(cls, **overrides) -> "SgnsConfig":
        return replace(cls(dim=40, subsample=1e-4), **overrides)

    @classmethod
    def word_defaults(cls, **overrides) -> "SgnsConfig":
        return replace(cls(dim=100, subsample=1e-5), **overrides)


@dataclass
class CooccurrenceSets:
    """Item sets in which co-occurrence counts as a positive signal.

    Every set holds at least two distinct ids. ``dropped`` records how many
    undersized candidate sets a loader discarded on the way here.
    """

    sets: list[tuple[str, ...]]
    dropped: int = 0

    def __post_init__(self) -> None:
        normalized = []
        for s in self.sets:
            items = tuple(str(i) for i in s)
            if len(items) < 2:
                raise ValueError("co-occurrence sets need at least 2 items")
            if len(set(items)) != len(items):
                raise ValueError(f"duplicate item in set: {items}")
            normalized.append(items)
        self.sets = normalized

    def __len__(self) -> int:
        return len(self.sets)

    def item_ids(self) -> list[str]:
        seen: set[str] = set()
        for s in self.sets:
            seen.update(s)
        return sorted(seen)


class EmbeddingTable:
    """Ids mapped one-to-one onto rows of a dense float64 vector matrix."""

    def __init__(self, ids: Sequence[str], vectors: np.ndarray) -> None:
        vectors = np.ascontiguousarray(np.asarray(vectors, dtype=np.float64))
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D array")
        if vectors.shape[1] < 1:
            raise ValueError("vector dimension must be >= 1")
        if len(ids) != vectors.shape[0]:
            raise ValueError("ids and vectors differ in length")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("vectors must be finite")
        self.ids = [str(i) for i in ids]
        self.index: dict[str, int] = {t: i for i, t in enumerate(self.ids)}
        if len(self.index) != len(self.ids):
            raise ValueError("duplicate id")
        self.vectors = vectors

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, item_id: object) -> bool:
        return item_id in self.index

    def get(self, item_id: str) -> np.ndarray:
        return self.vectors[self.index[item_id]]

    @classmethod
    def from_mapping(cls, mapping: dict[str, np.ndarray]) -> "EmbeddingTable":
        ids = sorted(mapping)
        return cls(ids, np.array([mapping[i] for i in ids], dtype=np.float64))

    def save(self, path: str | Path) -> None:
        """Vector file: a ``count dim`` header line, then one id per line
        followed by its components. Floats are written with repr so a read
        back returns bit-identical values.
        """
        for item_id in self.ids:
            if not item_id or any(c.isspace() for c in item_id):
                raise ValueError(f"id not writable to a vector file: {item_id!r}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.ids)} {self.dim}\n")
            for item_id, row in zip(self.ids, self.vectors):
                fh.write(item_id + " " + " ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}:1: expected 'count dim' header")
            count, dim = int(header[0]), int(header[1])
            ids: list[str] = []
            rows = np.empty((count, dim), dtype=np.float64)
            for lineno, line in enumerate(fh, 2):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != dim + 1:
                    raise ValueError(f"{path}:{lineno}: expected id and {dim} floats")
                if len(ids) >= count:
                    raise ValueError(f"{path}:{lineno}: more rows than the header declares")
                rows[len(ids)] = [float(x) for x in parts[1:]]
                ids.append(parts[0])
        if len(ids) != count:
            raise ValueError(f"{path}: header declares {count} rows, found {len(ids)}")
        return cls(ids, rows)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, with -1.0 for any zero-norm operand so degenerate
    vectors sort behind every real match."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return -1.0
    return float(np.dot(a, b) / (na * nb))


def build_word_pairs(sentence: Sequence[int], window: int, rng) -> list[tuple[int, int]]:
    """Emit (center, context) pairs with a per-position effective window
    drawn uniformly from 1..window."""
    if window < 1:
        raise ValueError("window must be >= 1")
    pairs: list[tuple[int, int]] = []
    n = len(sentence)
    for i in range(n):
        span = int(rng.integers(1, window + 1))
        for j in range(max(0, i - span), min(n, i + span + 1)):
            if j != i:
                pairs.append((int(sentence[i]), int(sentence[j])))
    return pairs


def build_item_pairs(items: Sequence) -> list[tuple]:
    """Every ordered pair of distinct positions: the set is the window."""
    if len(items) < 2:
        raise ValueError("item sets need at least 2 items")
    if len(set(items)) != len(items):
        raise ValueError("duplicate item in set")
    return [(a, b) for i, a in enumerate(items) for j, b in enumerate(items) if i != j]


def discard_probabilities(counts: np.ndarray, threshold: float) -> np.ndarray:
    """Per-id discard probability max(0, 1 - sqrt(t/f)) for frequency f."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("counts are all zero")
    freqs = np.where(counts > 0, counts / total, 1.0)
    return np.where(counts > 0, np.maximum(0.0, 1.0 - np.sqrt(threshold / freqs)), 0.0)


def subsample(ids: Sequence[int], threshold: float, counts: np.ndarray, rng) -> list[int]:
    """Randomly drop frequent ids. Ids at or below the threshold frequency
    are never dropped. One uniform draw is consumed per element."""
    ids_arr = np.asarray(ids, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.float64)
    if ids_arr.size and (ids_arr.min() < 0 or ids_arr.max() >= len(counts)):
        raise ValueError("stream id outside the counts table")
    if ids_arr.size and np.any(counts[ids_arr] <= 0):
        raise ValueError("stream contains an id with zero count")
    probs = discard_probabilities(counts, threshold)
    keep = rng.random(ids_arr.size) >= probs[ids_arr]
    return [int(i) for i in ids_arr[keep]]


class NoiseSampler:
    """Draws ids proportionally to count**0.75 via inverse-CDF lookup."""

    def __init__(self, counts: np.ndarray, power: float = NOISE_POWER) -> None:
        counts = np.asarray(counts, dtype=np.float64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("counts must be a nonempty 1-D array")
        if np.any(counts < 0) or counts.sum() <= 0:
            raise ValueError("counts must be non-negative with positive total")
        weights = counts ** power
        self.probabilities = weights / weights.sum()
        self._cdf = np.cumsum(self.probabilities)
        self._cdf[-1] = 1.0

    def draw(self, k: int, rng) -> np.ndarray:
        idx = np.searchsorted(self._cdf, rng.random(k), side="right")
        return np.minimum(idx, len(self._cdf) - 1).astype(np.int64)


class SgnsTrainer:
    """Input and output vector tables plus the per-pair SGD update.

    Input vectors start uniform in [-0.5/dim, 0.5/dim]; output vectors start
    at zero, so the very first update on a pair moves only the output side.
    The published embedding is the input table.
    """

    def __init__(self, vocab_size: int, dim: int, rng) -> None:
        if vocab_size < 1 or dim < 1:
            raise ValueError("vocab_size and dim must be >= 1")
        self.input = (rng.random((vocab_size, dim)) - 0.5) / dim
        self.output = np.zeros((vocab_size, dim), dtype=np.float64)

    def train_pair(self, center: int, context: int, negatives: np.ndarray, lr: float) -> None:
        u = self.input[center]
        targets = np.empty(len(negatives) + 1, dtype=np.int64)
        targets[0] = context
        targets[1:] = negatives
        ctx = self.output[targets]  # copy; the u update must see pre-step values
        g = -sigmoid(ctx @ u) * lr
        g[0] += lr
        np.add.at(self.output, targets, g[:, None] * u[None, :])
        u += g @ ctx

    def pair_loss(self, center: int, context: int, negatives: np.ndarray) -> float:
        u = self.input[center]
        pos = sigmoid(float(self.output[context] @ u))
        neg = sigmoid(-(self.output[np.asarray(negatives, dtype=np.int64)] @ u))
        return float(-(math.log(pos + 1e-12) + np.log(neg + 1e-12).sum()))


def _draw_negatives(noise: NoiseSampler, rng, k: int, forbidden: int) -> np.ndarray:
    negatives = noise.draw(k, rng)
    for _ in range(1000):
        clash = negatives == forbidden
        if not clash.any():
            return negatives
        negatives[clash] = noise.draw(int(clash.sum()), rng)
    raise RuntimeError("could not draw negatives distinct from the context")


def train_sgns(data, config: SgnsConfig) -> EmbeddingTable:
    """Train embeddings over word sequences or a CooccurrenceSets instance.

    The learning rate decays linearly with stream position down to a floor
    of 1e-4 times its initial value. A fixed seed gives bit-identical tables
    on repeated runs; training is single-threaded by construction.
    """
    if isinstance(data, CooccurrenceSets):
        sequences: list[Sequence[str]] = list(data.sets)
        item_mode = True
    else:
        sequences = [list(s) for s in data]
        item_mode = False
    sequences = [s for s in sequences if len(s) > 0]
    if not sequences:
        raise ValueError("empty training data")

    counter: Counter[str] = Counter()
    for seq in sequences:
        counter.update(str(t) for t in seq)
    ids = sorted(counter, key=lambda t: (-counter[t], t))
    id_index = {t: i for i, t in enumerate(ids)}
    encoded = [np.array([id_index[str(t)] for t in seq], dtype=np.int64) for seq in sequences]
    counts = np.array([counter[t] for t in ids], dtype=np.float64)

    total_positions = int(sum(len(s) for s in encoded))
    total_units = config.epochs * total_positions
    discard = discard_probabilities(counts, config.subsample)
    noise = NoiseSampler(counts)
    rng = np.random.default_rng(config.seed)
    trainer = SgnsTrainer(len(ids), config.dim, rng)
    floor = LR_FLOOR_FRACTION * config.learning_rate

    units = 0
    for _ in range(config.epochs):
        for seq in encoded:
            lr = max(floor, config.learning_rate * (1.0 - units / total_units))
            keep = rng.random(len(seq)) >= discard[seq]
            kept = seq[keep]
            if item_mode:
                pairs = build_item_pairs(kept.tolist()) if len(kept) >= 2 else []
            else:
                pairs = build_word_pairs(kept, config.window, rng)
            for center, context in pairs:
                negatives = _draw_negatives(noise, rng, config.negatives, context)
                trainer.train_pair(center, context, negatives, lr)
            units += len(seq)
    return EmbeddingTable(ids, trainer.input)


def similarity_search(query: np.ndarray, table: EmbeddingTable, topk: int,
                      exclude: Iterable[str] = ()) -> list[tuple[str, float]]:
    """Top-k ids by cosine similarity, descending, ties broken by ascending
    id. Zero-norm table entries score -1.0 and rank last; a zero-norm query
    is rejected."""
    if topk < 1:
        raise ValueError("topk must be >= 1")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (table.dim,):
        raise ValueError(f"query shape {query.shape} does not match table dim {table.dim}")
    qnorm = float(np.linalg.norm(query))
    if qnorm == 0.0:
        raise ValueError("zero-norm query")
    norms = np.linalg.norm(table.vectors, axis=1)
    safe = np.where(norms > 0, norms * qnorm, 1.0)
    sims = np.where(norms > 0, (table.vectors @ query) / safe, -1.0)
    excluded = set(exclude)
    order = sorted(
        (i for i, item_id in enumerate(table.ids) if item_id not in excluded),
        key=lambda i: (-sims[i], table.ids[i]),
    )
    return [(table.ids[i], float(sims[i])) for i in order[:topk]]
