"""Gesture corpus: database loading/validation, embedding precompute, and
synthetic sample augmentation.

Database file: one JSON record per line (append-friendly, diffable). Synthetic
augmentation samples are quarantined (verified=false) until explicitly marked
verified.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .embedding import (
    EmbeddingCache,
    EmbeddingError,
    EmbeddingProvider,
    VectorIndex,
    embed,
)
from .providers import CompletionError
from .script import normalize_text

log = logging.getLogger(__name__)

GESTURE_KINDS = {"iconic", "metaphoric", "deictic"}

DEFAULT_AUGMENT_COUNT = 5

AUGMENT_SYSTEM_PROMPT = (
    "You are a writing assistant for public-speaking datasets. Given a talk "
    "transcript excerpt and its emphasis phrases, write {count} new transcript "
    "excerpts of similar length that are structurally and semantically similar "
    "to the original but adapted to different talk topics. Each new excerpt "
    "must contain emphasis phrases that appear verbatim in its own text. "
    'Answer with a JSON array of objects: [{{"text": "...", "regions": '
    '["...", "..."]}}, ...] and nothing else.'
)


class DatabaseFormatError(Exception):
    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


@dataclass(frozen=True)
class GestureEntry:
    entry_id: str
    region_text: str
    talk_id: str
    clip_uri: str
    duration_s: float
    gesture_kind: str | None = None

    @property
    def word_count(self) -> int:
        return len(normalize_text(self.region_text).split())


@dataclass
class GestureDatabase:
    entries: list[GestureEntry]
    index: VectorIndex | None = None
    manifest: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def entry(self, entry_id: str) -> GestureEntry:
        for e in self.entries:
            if e.entry_id == entry_id:
                return e
        raise KeyError(entry_id)

    def clip_uris(self) -> set[str]:
        return {e.clip_uri for e in self.entries}


@dataclass(frozen=True)
class AnnotatedSample:
    sample_id: str
    text: str
    regions: tuple[str, ...]
    origin: str  # human | synthetic
    verified: bool


def _validate_entry(entry: GestureEntry) -> tuple[list[str], list[str]]:
    """(hard errors, soft warnings) for one entry."""
    errors = []
    warnings = []
    wc = entry.word_count
    if wc < 1:
        errors.append(f"{entry.entry_id}: region_text is empty after normalization")
    elif wc > 30:
        errors.append(f"{entry.entry_id}: region_text has {wc} words (max 30)")
    elif wc > 15:
        warnings.append(f"{entry.entry_id}: region_text has {wc} words (unusually long)")
    if not 0 < entry.duration_s <= 10:
        errors.append(f"{entry.entry_id}: duration_s {entry.duration_s} outside (0, 10]")
    if entry.gesture_kind is not None and entry.gesture_kind not in GESTURE_KINDS:
        errors.append(f"{entry.entry_id}: unknown gesture_kind {entry.gesture_kind!r}")
    return errors, warnings


def load_database(path: str | Path) -> GestureDatabase:
    """Parse and validate a line-delimited database file.

    Hard invariant violations reject the entry (collected in db.errors); the
    length warning is soft and keeps the entry. Malformed JSON raises with the
    line number.
    """
    db = GestureDatabase(entries=[])
    seen_ids: set[str] = set()
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatabaseFormatError(str(exc), line_number=lineno) from exc
            try:
                entry = GestureEntry(
                    entry_id=rec["entry_id"],
                    region_text=rec["region_text"],
                    talk_id=rec["talk_id"],
                    clip_uri=rec["clip_uri"],
                    duration_s=float(rec["duration_s"]),
                    gesture_kind=rec.get("gesture_kind"),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DatabaseFormatError(f"bad record: {exc}", line_number=lineno) from exc
            if entry.entry_id in seen_ids:
                db.errors.append(f"{entry.entry_id}: duplicate entry_id")
                continue
            errors, warnings = _validate_entry(entry)
            db.warnings.extend(warnings)
            if errors:
                db.errors.extend(errors)
                continue
            seen_ids.add(entry.entry_id)
            db.entries.append(entry)
    return db


def save_database(db: GestureDatabase, path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for e in db.entries:
            fh.write(
                json.dumps(
                    {
                        "entry_id": e.entry_id,
                        "region_text": e.region_text,
                        "talk_id": e.talk_id,
                        "clip_uri": e.clip_uri,
                        "duration_s": e.duration_s,
                        "gesture_kind": e.gesture_kind,
                    }
                )
                + "\n"
            )


def precompute_embeddings(
    db: GestureDatabase,
    embedder: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> GestureDatabase:
    """Embed every entry and build the KNN index; atomic (all or nothing)."""
    vectors = []
    for entry in db.entries:
        # EmbeddingError propagates: a partial index is never installed.
        vectors.append((entry.entry_id, embed(embedder, entry.region_text, cache)))
    if not vectors:
        raise ValueError("cannot index an empty database")
    dimension = vectors[0][1].dims
    index = VectorIndex(dimension=dimension)
    for entry_id, vec in vectors:
        index.add(entry_id, vec.as_array())
    db.index = index
    db.manifest = {"model": embedder.model, "entry_count": len(db.entries)}
    return db


def load_samples(path: str | Path) -> list[AnnotatedSample]:
    samples = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                samples.append(
                    AnnotatedSample(
                        sample_id=rec["sample_id"],
                        text=rec["text"],
                        regions=tuple(rec["regions"]),
                        origin=rec["origin"],
                        verified=bool(rec["verified"]),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise DatabaseFormatError(f"bad sample: {exc}", line_number=lineno) from exc
    return samples


def save_samples(samples: list[AnnotatedSample], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "sample_id": s.sample_id,
                        "text": s.text,
                        "regions": list(s.regions),
                        "origin": s.origin,
                        "verified": s.verified,
                    }
                )
                + "\n"
            )


def regions_occur_verbatim(text: str, regions: list[str]) -> bool:
    """Every region phrase must appear (normalized) in the sample text."""
    haystack = f" {normalize_text(text)} "
    for region in regions:
        needle = normalize_text(region)
        if not needle or f" {needle} " not in haystack:
            return False
    return True


def build_augment_prompt(sample: AnnotatedSample, count: int) -> str:
    regions = "; ".join(sample.regions)
    return (
        AUGMENT_SYSTEM_PROMPT.format(count=count)
        + f"\nTranscript: {sample.text}\nEmphasis phrases: {regions}"
    )


def augment_sample(
    sample: AnnotatedSample, provider, count: int = DEFAULT_AUGMENT_COUNT
) -> list[AnnotatedSample]:
    """Generate synthetic siblings of a human-annotated sample.

    Outputs failing the verbatim-occurrence invariant are dropped; a shortfall
    is logged but still returns whatever validated.
    """
    if sample.origin != "human":
        raise ValueError("augmentation only runs on human-annotated samples")
    if count < 1:
        raise ValueError("count must be >= 1")
    completion = provider.complete(build_augment_prompt(sample, count))
    try:
        raw = json.loads(_extract_json_array(completion))
    except (json.JSONDecodeError, ValueError):
        log.warning("augmentation completion for %s was unparseable", sample.sample_id)
        raw = []
    out: list[AnnotatedSample] = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            continue
        text = item.get("text", "")
        regions = [r for r in item.get("regions", []) if isinstance(r, str)]
        if not text or not regions or not regions_occur_verbatim(text, regions):
            log.info("dropped augmented sample %d of %s (invariant)", i, sample.sample_id)
            continue
        out.append(
            AnnotatedSample(
                sample_id=f"{sample.sample_id}-aug{len(out)}",
                text=text,
                regions=tuple(regions),
                origin="synthetic",
                verified=False,
            )
        )
    if len(out) < count:
        log.warning(
            "augmentation shortfall for %s: %d of %d valid",
            sample.sample_id,
            len(out),
            count,
        )
    return out


def mark_verified(sample: AnnotatedSample) -> AnnotatedSample:
    return replace(sample, verified=True)


def _extract_json_array(text: str) -> str:
    start = text.find("[")
    end = text.rfind("]")
    if start == -1 or end == -1 or end < start:
        raise ValueError("no JSON array in completion")
    return text[start : end + 1]
