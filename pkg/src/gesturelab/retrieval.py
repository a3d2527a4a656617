"""Gesture retrieval and selection: cosine KNN over the gesture database plus
an LLM pick among the top candidates, with a rank-1 fallback so a
recommendation is always produced.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .corpus import GestureDatabase
from .embedding import EmbeddingCache, EmbeddingProvider, embed
from .proposal import GestureRegion
from .providers import CompletionError
from .script import Chunk, normalize_text, span_text

log = logging.getLogger(__name__)

DEFAULT_KNN_K = 3

SELECTION_SYSTEM_PROMPT = (
    "You are an expert in public speaking. You are given a TEXT and a QUERY "
    "phrase within the text that needs to be emphasized. Additionally, you "
    'are provided with CANDIDATE emphasis areas" Your task is to identify the '
    "CANDIDATE emphasis phrase that is most similar to the QUERY phrase in "
    "the TEXT in terms of emphasis context. Always choose only from the "
    "provided list of CANDIDATES."
)

SOURCE_LLM = "llm"
SOURCE_FALLBACK = "fallback-rank1"
SOURCE_USER = "user"


@dataclass(frozen=True)
class GestureCandidate:
    entry_id: str
    similarity: float
    rank: int  # 1-based


@dataclass(frozen=True)
class Recommendation:
    region_id: str
    candidates: tuple[GestureCandidate, ...]
    selected_rank: int
    selection_source: str

    @property
    def selected(self) -> GestureCandidate:
        return self.candidates[self.selected_rank - 1]


def retrieve_candidates(
    region_text: str,
    db: GestureDatabase,
    embedder: EmbeddingProvider,
    k: int = DEFAULT_KNN_K,
    cache: EmbeddingCache | None = None,
) -> list[GestureCandidate]:
    """Top-k database entries by cosine similarity to the region text."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if db.index is None or len(db.index) == 0:
        raise ValueError("database has no embedding index; run precompute first")
    if not normalize_text(region_text):
        raise ValueError("empty region text")
    query = embed(embedder, region_text, cache).as_array()
    ranked = db.index.knn(query, k)
    return [
        GestureCandidate(entry_id=eid, similarity=score, rank=i + 1)
        for i, (eid, score) in enumerate(ranked)
    ]


def build_selection_prompt(
    chunk_text: str,
    region_text: str,
    candidates: list[GestureCandidate],
    db: GestureDatabase,
) -> str:
    """Selection prompt with numbered candidate phrases inline."""
    if not candidates:
        raise ValueError("no candidates to select from")
    items = " ".join(
        f"{c.rank}) {db.entry(c.entry_id).region_text}" for c in candidates
    )
    return (
        f"{SELECTION_SYSTEM_PROMPT} TEXT: {chunk_text}; QUERY: {region_text}; "
        f"CANDIDATES: {items}. Give only the candidate as output."
    )


_LEADING_INDEX_RE = re.compile(r"^\s*(\d+)\s*[.)]?")
_DIGIT_RE = re.compile(r"\b(\d+)\b")


def _parse_selection(completion: str, candidates: list[GestureCandidate], db) -> int | None:
    """Rank named by the completion: leading index, verbatim candidate text,
    or a lone in-range digit. None when nothing on the list is named."""
    k = len(candidates)
    m = _LEADING_INDEX_RE.match(completion)
    if m and 1 <= int(m.group(1)) <= k:
        return int(m.group(1))
    comp_norm = normalize_text(completion)
    for c in candidates:
        text_norm = normalize_text(db.entry(c.entry_id).region_text)
        if text_norm and text_norm in comp_norm:
            return c.rank
    digits = [int(d) for d in _DIGIT_RE.findall(completion) if 1 <= int(d) <= k]
    if len(digits) == 1:
        return digits[0]
    return None


def select_gesture(
    region: GestureRegion,
    candidates: list[GestureCandidate],
    chunk_text: str,
    region_text: str,
    provider,
    db: GestureDatabase,
) -> Recommendation:
    """Ask the provider to pick a candidate; fall back to rank 1 otherwise."""
    if not candidates:
        raise ValueError("no candidates to select from")
    prompt = build_selection_prompt(chunk_text, region_text, candidates, db)
    rank = None
    source = SOURCE_FALLBACK
    try:
        completion = provider.complete(prompt)
        rank = _parse_selection(completion, candidates, db)
        if rank is not None:
            source = SOURCE_LLM
    except CompletionError as exc:
        log.warning("selection provider failed for %s: %s", region.region_id, exc)
    if rank is None:
        rank = 1
    return Recommendation(
        region_id=region.region_id,
        candidates=tuple(candidates),
        selected_rank=rank,
        selection_source=source,
    )


def recommend_chunk(
    chunk: Chunk,
    regions: list[GestureRegion],
    db: GestureDatabase,
    embedder: EmbeddingProvider,
    selection_provider,
    k: int = DEFAULT_KNN_K,
    cache: EmbeddingCache | None = None,
) -> list[Recommendation]:
    """One Recommendation per non-deleted region, in span order."""
    ordered = sorted(
        (r for r in regions if r.status != "deleted"), key=lambda r: r.span.start
    )
    recommendations = []
    for region in ordered:
        text = span_text(chunk, region.span)
        candidates = retrieve_candidates(text, db, embedder, k=k, cache=cache)
        recommendations.append(
            select_gesture(region, candidates, chunk.raw_text, text, selection_provider, db)
        )
    return recommendations
