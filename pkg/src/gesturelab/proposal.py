"""Emphasis proposal: prompt the completion model for emphasis phrases, parse
them, and anchor each phrase to a word-indexed region of the chunk.

Anchoring first tries a verbatim match over normalized word n-grams; failing
that, a sliding window of the phrase's word length is scored by embedding
cosine and the argmax position is accepted when it clears the threshold.
Unanchorable phrases are discarded (and logged with their best score).
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, replace

from .embedding import EmbeddingCache, EmbeddingError, EmbeddingProvider, embed
from .providers import CompletionError, PLAIN_FRAME
from .script import Chunk, Span, find_ngram, normalize_text, span_text
from .textmetrics import cosine_similarity

log = logging.getLogger(__name__)

DEFAULT_FILTER_THRESHOLD = 0.75

EMPHASIS_SYSTEM_PROMPT = (
    "You are an expert in public speaking. The provided Text will be used for "
    "a TED talk. Identify the Emphasis Areas in the Text that should "
    "emphasized when giving the TED talk.The extracted text in the Emphasis "
    "Areas should exactly match phrases in the given Text."
)

VERBATIM_MATCH = "verbatim-match"
SEMANTIC_MATCH = "semantic-match"


class ProposalError(Exception):
    def __init__(self, message: str, chunk_id: str | None = None):
        super().__init__(message)
        self.chunk_id = chunk_id


@dataclass(frozen=True)
class RawPrediction:
    phrase: str
    order: int


@dataclass(frozen=True)
class GestureRegion:
    region_id: str
    span: Span
    source: str  # VERBATIM_MATCH or SEMANTIC_MATCH
    match_similarity: float
    status: str = "proposed"  # proposed | accepted | edited | deleted


def region_id_for(chunk_id: str, start: int, end: int, text: str) -> str:
    """Content-derived id so identical inputs yield identical regions."""
    digest = hashlib.sha256(f"{chunk_id}|{start}|{end}|{text}".encode()).hexdigest()
    return f"r{digest[:12]}"


def build_emphasis_prompt(chunk: Chunk, frame: str = PLAIN_FRAME) -> str:
    """System text plus the chunk, wrapped in the provider's instruction frame."""
    if not chunk.raw_text.strip():
        raise ValueError("cannot build emphasis prompt for an empty chunk")
    return frame.format(system=EMPHASIS_SYSTEM_PROMPT, text=chunk.raw_text)


_NUMBERED_RE = re.compile(r"(?:(?<=\s)|^)\d+[.)]\s*")
_BULLET_RE = re.compile(r"^\s*[-*•]\s+(.*)$")
_QUOTED_RE = re.compile(r"[\"“]([^\"”]+)[\"”]")


def _clean_phrase(raw: str) -> str:
    phrase = raw.strip()
    phrase = phrase.strip("\"'“”‘’")
    phrase = phrase.rstrip(".,;:")
    return phrase.strip()


def parse_region_strings(completion_text: str) -> list[RawPrediction]:
    """Extract candidate phrases from numbered lists, bullets, or quotes.

    Order is preserved and exact repeats are dropped; text with no detectable
    list yields an empty result rather than an error.
    """
    phrases: list[str] = []
    if _NUMBERED_RE.search(completion_text):
        parts = _NUMBERED_RE.split(completion_text)
        # parts[0] is any preamble before the first number ("Emphasis Areas:").
        for part in parts[1:]:
            cleaned = _clean_phrase(part.splitlines()[0] if part else "")
            if cleaned:
                phrases.append(cleaned)
    else:
        for line in completion_text.splitlines():
            m = _BULLET_RE.match(line)
            if m:
                cleaned = _clean_phrase(m.group(1))
                if cleaned:
                    phrases.append(cleaned)
        if not phrases:
            for m in _QUOTED_RE.finditer(completion_text):
                cleaned = _clean_phrase(m.group(1))
                if cleaned:
                    phrases.append(cleaned)

    seen: set[str] = set()
    predictions: list[RawPrediction] = []
    for phrase in phrases:
        if phrase in seen:
            continue
        seen.add(phrase)
        predictions.append(RawPrediction(phrase=phrase, order=len(predictions)))
    return predictions


def _best_window(
    chunk: Chunk,
    phrase_norm: str,
    n_words: int,
    embedder: EmbeddingProvider,
    cache: EmbeddingCache | None,
) -> tuple[int, float] | None:
    """Argmax cosine position for a window of n_words; earliest wins ties."""
    total = len(chunk.tokens)
    if n_words > total:
        return None
    query = embed(embedder, phrase_norm, cache).as_array()
    best_pos = None
    best_score = -2.0
    for pos in range(total - n_words + 1):
        window = chunk.ngram_text(pos, n_words)
        try:
            wvec = embed(embedder, window, cache).as_array()
            score = cosine_similarity(query, wvec)
        except ValueError:
            continue
        if score > best_score:
            best_score = score
            best_pos = pos
    if best_pos is None:
        return None
    return best_pos, best_score


def filter_regions(
    chunk: Chunk,
    predictions: list[RawPrediction],
    embedder: EmbeddingProvider,
    threshold: float = DEFAULT_FILTER_THRESHOLD,
    cache: EmbeddingCache | None = None,
) -> list[GestureRegion]:
    """Anchor predictions to the chunk; verbatim first, then semantic window.

    Regions overlapping an earlier-emitted region are dropped, preserving
    prediction order.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    regions: list[GestureRegion] = []
    for pred in predictions:
        norm = normalize_text(pred.phrase)
        words = norm.split()
        if not words:
            continue
        span = None
        source = None
        similarity = 0.0
        start = find_ngram(chunk, words)
        if start is not None:
            span = Span(chunk.chunk_id, start, start + len(words) - 1)
            source = VERBATIM_MATCH
            similarity = 1.0
        else:
            try:
                best = _best_window(chunk, norm, len(words), embedder, cache)
            except (EmbeddingError, ValueError) as exc:
                log.warning("embedding failed for prediction %r: %s", pred.phrase, exc)
                continue
            if best is not None and best[1] >= threshold:
                span = Span(chunk.chunk_id, best[0], best[0] + len(words) - 1)
                source = SEMANTIC_MATCH
                similarity = best[1]
            else:
                log.info(
                    "discarded prediction %r (best score %s)",
                    pred.phrase,
                    None if best is None else round(best[1], 4),
                )
        if span is None:
            continue
        if any(span.overlaps(r.span) for r in regions):
            continue
        regions.append(
            GestureRegion(
                region_id=region_id_for(
                    chunk.chunk_id, span.start, span.end, span_text(chunk, span)
                ),
                span=span,
                source=source,
                match_similarity=similarity,
            )
        )
    return regions


def propose_regions(
    chunk: Chunk,
    provider,
    embedder: EmbeddingProvider,
    threshold: float = DEFAULT_FILTER_THRESHOLD,
    cache: EmbeddingCache | None = None,
) -> list[GestureRegion]:
    """prompt -> complete -> parse -> filter; regions come back status=proposed."""
    prompt = build_emphasis_prompt(chunk, frame=getattr(provider, "frame", PLAIN_FRAME))
    try:
        completion = provider.complete(prompt)
    except CompletionError as exc:
        raise ProposalError(str(exc), chunk_id=chunk.chunk_id) from exc
    predictions = parse_region_strings(completion)
    return filter_regions(chunk, predictions, embedder, threshold=threshold, cache=cache)


def mark_deleted(region: GestureRegion) -> GestureRegion:
    return replace(region, status="deleted")


def mark_status(region: GestureRegion, status: str) -> GestureRegion:
    return replace(region, status=status)
