"""Real-time alignment of recognized words against a chunk, plus cue firing.

Each recognized word updates a buffer of the last three spoken words; the
buffer is compared (Levenshtein similarity ratio) against same-length word
n-grams in a window around the current flow index. The best match above the
threshold advances the flow index to the last word of the matched n-gram, and
any region whose start comes within the cue onset of the new index fires.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .proposal import GestureRegion
from .script import Chunk, normalize_word
from .textmetrics import similarity_ratio

DEFAULT_TRACKER_THRESHOLD = 50.0
DEFAULT_ONSET_WORDS = 4

WINDOW_BACK = 2
WINDOW_FORWARD = 10
PHRASE_WORDS = 3


@dataclass
class SpeechFlowState:
    run_id: str
    chunk_id: str
    flow_index: int = -1
    recent_words: list[str] = field(default_factory=list)
    fired: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class CueEvent:
    region_id: str
    clip_uri: str
    triggered_at_flow_index: int
    onset_words: int


def candidate_windows(
    chunk: Chunk, flow_index: int, n: int = PHRASE_WORDS
) -> list[tuple[int, str]]:
    """(position, n-gram text) pairs inside the tracking window.

    Positions run from two words before to ten words after the flow index,
    clamped to the chunk; a chunk shorter than n degenerates to its full
    length.
    """
    total = len(chunk.tokens)
    if total == 0:
        return []
    n = min(n, total)
    lo = max(0, flow_index - WINDOW_BACK) if flow_index >= 0 else 0
    hi = min(total - n, (flow_index if flow_index >= 0 else 0) + WINDOW_FORWARD)
    return [(p, chunk.ngram_text(p, n)) for p in range(lo, hi + 1)]


def _cues_for(
    state: SpeechFlowState,
    regions: list[GestureRegion],
    clip_for_region,
    onset: int,
) -> list[CueEvent]:
    cues = []
    for region in sorted(regions, key=lambda r: r.span.start):
        if region.status == "deleted" or region.region_id in state.fired:
            continue
        if region.span.start - onset <= state.flow_index:
            state.fired.add(region.region_id)
            cues.append(
                CueEvent(
                    region_id=region.region_id,
                    clip_uri=clip_for_region(region.region_id),
                    triggered_at_flow_index=state.flow_index,
                    onset_words=onset,
                )
            )
    return cues


def start_run(
    chunk: Chunk,
    regions: list[GestureRegion],
    run_id: str,
    clip_for_region=lambda region_id: "",
    onset: int = DEFAULT_ONSET_WORDS,
) -> tuple[SpeechFlowState, list[CueEvent]]:
    """Fresh state with flow index -1; regions starting inside the onset
    window fire immediately (no earlier trigger exists for them)."""
    state = SpeechFlowState(run_id=run_id, chunk_id=chunk.chunk_id)
    cues = _cues_for(state, regions, clip_for_region, onset)
    return state, cues


def on_word(
    state: SpeechFlowState,
    word: str,
    chunk: Chunk,
    regions: list[GestureRegion],
    clip_for_region=lambda region_id: "",
    threshold: float = DEFAULT_TRACKER_THRESHOLD,
    onset: int = DEFAULT_ONSET_WORDS,
) -> list[CueEvent]:
    """Consume one recognized word; mutate state; return newly fired cues.

    Below-threshold matches leave the flow index unchanged (spoken input
    treated as irrelevant to the notes).
    """
    norm = normalize_word(word)
    if not norm:
        return []
    state.recent_words.append(norm)
    if len(state.recent_words) > PHRASE_WORDS:
        state.recent_words.pop(0)
    phrase = " ".join(state.recent_words)
    n = min(len(state.recent_words), len(chunk.tokens))
    best_pos = None
    best_sigma = -1.0
    for pos, text in candidate_windows(chunk, state.flow_index, n=n):
        sigma = similarity_ratio(phrase, text)
        if sigma > best_sigma:
            best_sigma = sigma
            best_pos = pos
    if best_pos is not None and best_sigma >= threshold:
        # max() keeps the index monotone even for short early phrases.
        state.flow_index = max(state.flow_index, best_pos + n - 1)
    return _cues_for(state, regions, clip_for_region, onset)
