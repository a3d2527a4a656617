"""Scoring of predicted emphasis phrases against gold spans.

Two matching schemes: direct (word-index overlap of the verbatim-located
prediction with a gold span) and semantic (embedding cosine between the
prediction text and a gold span text). Both enforce the length rule — a
prediction may extend at most three words beyond the gold it matches.
Predictions that cannot be located verbatim in the chunk are invalid and
count neither as true nor false positives.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .embedding import EmbeddingCache, EmbeddingError, EmbeddingProvider, embed
from .script import Chunk, Span, find_ngram, normalize_text, span_text
from .textmetrics import cosine_similarity

log = logging.getLogger(__name__)

LENGTH_SLACK_WORDS = 3
DEFAULT_SEMANTIC_THRESHOLD = 0.75


@dataclass(frozen=True)
class EvalSample:
    sample_id: str
    chunk: Chunk
    gold_spans: tuple[Span, ...]
    predictions: tuple[str, ...]


@dataclass
class Metrics:
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    invalid: int = 0
    mean_pred_regions: float = 0.0
    mean_pred_length_words: float = 0.0
    degenerate: bool = False
    unscored_samples: int = 0


@dataclass(frozen=True)
class MatchResult:
    valid: bool
    gold_index: int | None  # index into the gold list passed in, None = FP


def locate_prediction(chunk: Chunk, prediction: str) -> Span | None:
    """Earliest verbatim location of the normalized prediction, else None."""
    words = normalize_text(prediction).split()
    if not words:
        return None
    start = find_ngram(chunk, words)
    if start is None:
        return None
    return Span(chunk.chunk_id, start, start + len(words) - 1)


def _length_ok(pred_span: Span, gold: Span) -> bool:
    return pred_span.length_words <= gold.length_words + LENGTH_SLACK_WORDS


def match_direct(
    prediction: str, gold_spans: list[Span], chunk: Chunk
) -> MatchResult:
    """Word-overlap match of the located prediction against the golds.

    Among overlapping golds the one with maximal overlap wins (ties: earliest
    gold in list order).
    """
    located = locate_prediction(chunk, prediction)
    if located is None:
        return MatchResult(valid=False, gold_index=None)
    best = None
    best_overlap = 0
    for i, gold in enumerate(gold_spans):
        if not located.overlaps(gold) or not _length_ok(located, gold):
            continue
        overlap = min(located.end, gold.end) - max(located.start, gold.start) + 1
        if overlap > best_overlap:
            best_overlap = overlap
            best = i
    return MatchResult(valid=True, gold_index=best)


def match_semantic(
    prediction: str,
    gold_spans: list[Span],
    chunk: Chunk,
    embedder: EmbeddingProvider,
    threshold: float = DEFAULT_SEMANTIC_THRESHOLD,
    cache: EmbeddingCache | None = None,
) -> MatchResult:
    """Embedding-similarity match between prediction text and gold texts.

    Validity (locatability) is judged exactly as in direct matching; the
    highest-similarity gold above threshold wins (ties: earliest).
    """
    located = locate_prediction(chunk, prediction)
    if located is None:
        return MatchResult(valid=False, gold_index=None)
    pred_vec = embed(embedder, normalize_text(prediction), cache).as_array()
    best = None
    best_sim = -2.0
    for i, gold in enumerate(gold_spans):
        if not _length_ok(located, gold):
            continue
        gold_vec = embed(embedder, span_text(chunk, gold), cache).as_array()
        sim = cosine_similarity(pred_vec, gold_vec)
        if sim >= threshold and sim > best_sim:
            best_sim = sim
            best = i
    return MatchResult(valid=True, gold_index=best)


def score(samples: list[EvalSample], matcher) -> Metrics:
    """Aggregate metrics over samples with one-to-one first-come matching.

    matcher(prediction, unclaimed_golds, chunk) -> MatchResult; golds are
    claimed by the first matching prediction in emission order.
    """
    if not samples:
        raise ValueError("need at least one sample")
    m = Metrics()
    total_golds = 0
    pred_counts = []
    pred_lengths = []
    for sample in samples:
        total_golds += len(sample.gold_spans)
        pred_counts.append(len(sample.predictions))
        claimed: set[int] = set()
        try:
            for prediction in sample.predictions:
                pred_lengths.append(len(normalize_text(prediction).split()))
                unclaimed = [
                    g for i, g in enumerate(sample.gold_spans) if i not in claimed
                ]
                unclaimed_indices = [
                    i for i in range(len(sample.gold_spans)) if i not in claimed
                ]
                result = matcher(prediction, unclaimed, sample.chunk)
                if not result.valid:
                    m.invalid += 1
                elif result.gold_index is None:
                    m.fp += 1
                else:
                    m.tp += 1
                    claimed.add(unclaimed_indices[result.gold_index])
        except EmbeddingError as exc:
            log.warning("sample %s unscored: %s", sample.sample_id, exc)
            m.unscored_samples += 1
            continue
        m.fn += len(sample.gold_spans) - len(claimed)
    m.precision = m.tp / (m.tp + m.fp) if (m.tp + m.fp) > 0 else 0.0
    m.recall = m.tp / (m.tp + m.fn) if (m.tp + m.fn) > 0 else 0.0
    pr = m.precision + m.recall
    m.f1 = 2 * m.precision * m.recall / pr if pr > 0 else 0.0
    m.mean_pred_regions = sum(pred_counts) / len(pred_counts)
    m.mean_pred_length_words = (
        sum(pred_lengths) / len(pred_lengths) if pred_lengths else 0.0
    )
    m.degenerate = (m.tp + m.fp) == 0 and total_golds == 0
    return m


_COLUMNS = [
    ("P-DM", lambda dm, sm: dm.precision),
    ("P-SM", lambda dm, sm: sm.precision),
    ("R-DM", lambda dm, sm: dm.recall),
    ("R-SM", lambda dm, sm: sm.recall),
    ("F1-DM", lambda dm, sm: dm.f1),
    ("F1-SM", lambda dm, sm: sm.f1),
    ("Regions", lambda dm, sm: dm.mean_pred_regions),
    ("Length", lambda dm, sm: dm.mean_pred_length_words),
]


def report(metrics_by_model: dict[str, dict[str, Metrics]]) -> tuple[str, dict]:
    """Plain-text table plus a machine-readable dict, one row per model.

    metrics_by_model maps model name -> {"dm": Metrics, "sm": Metrics}.
    """
    header = ["Model"] + [name for name, _ in _COLUMNS]
    rows = []
    machine: dict[str, dict] = {}
    for model in sorted(metrics_by_model):
        schemes = metrics_by_model[model]
        dm = schemes["dm"]
        sm = schemes["sm"]
        rows.append([model] + [f"{fn(dm, sm):.3f}" for _, fn in _COLUMNS])
        machine[model] = {
            "dm": vars(dm).copy(),
            "sm": vars(sm).copy(),
        }
    widths = [
        max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
        "  ".join("-" * w for w in widths),
    ]
    for r in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)))
    return "\n".join(lines) + "\n", machine


def load_predictions(path: str | Path) -> dict[str, list[str]]:
    """Prediction file: one {"sample_id": ..., "predictions": [...]} per line."""
    out: dict[str, list[str]] = {}
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out[rec["sample_id"]] = list(rec["predictions"])
    return out
