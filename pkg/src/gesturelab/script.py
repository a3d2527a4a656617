"""Tokenized representation of presenter notes: tokens, chunks, spans, slides.

All downstream matching (verbatim search, speech tracking, evaluation) works
on normalized word sequences, so the normalization rules here are load-bearing:
lowercase, strip punctuation from word edges only, keep internal apostrophes
and hyphens.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field

# Edge punctuation stripped during normalization. Internal apostrophes and
# hyphens survive because strip() only eats from the ends.
_EDGE_PUNCT = string.punctuation + "‘’“”–—…"

_WORD_RE = re.compile(r"\S+")
_SENTENCE_RE = re.compile(r"[^.!?]*[.!?]+(?:\s+|$)|[^.!?]+$")


class SpanRangeError(Exception):
    """Raised when a span does not fit inside its chunk."""


def normalize_word(surface: str) -> str:
    """Lowercased surface with leading/trailing punctuation removed."""
    return surface.lower().strip(_EDGE_PUNCT)


def normalize_text(text: str) -> str:
    """Space-joined normalized words of free text."""
    return " ".join(t.norm for t in tokenize(text))


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    word_index: int
    char_start: int
    char_end: int


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    slide_id: str
    raw_text: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def norms(self) -> list[str]:
        return [t.norm for t in self.tokens]

    def ngram_text(self, start: int, n: int) -> str:
        """Space-joined norms of tokens[start : start + n]."""
        return " ".join(t.norm for t in self.tokens[start : start + n])


@dataclass(frozen=True)
class Span:
    chunk_id: str
    start: int
    end: int  # inclusive

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise SpanRangeError(f"bad span bounds [{self.start}, {self.end}]")

    @property
    def length_words(self) -> int:
        return self.end - self.start + 1

    def overlaps(self, other: "Span") -> bool:
        return self.chunk_id == other.chunk_id and not (
            self.end < other.start or other.end < self.start
        )


@dataclass(frozen=True)
class Slide:
    slide_id: str
    asset_ref: str | None
    chunks: tuple[Chunk, ...]


@dataclass(frozen=True)
class Script:
    slides: tuple[Slide, ...]

    def __post_init__(self) -> None:
        ids = [s.slide_id for s in self.slides]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate slide ids")

    def chunks(self) -> list[Chunk]:
        return [c for slide in self.slides for c in slide.chunks]

    def chunk(self, chunk_id: str) -> Chunk:
        for c in self.chunks():
            if c.chunk_id == chunk_id:
                return c
        raise KeyError(chunk_id)


def tokenize(raw_text: str) -> list[Token]:
    """Whitespace segmentation with edge-punctuation normalization.

    Words whose normalized form is empty (pure punctuation) are dropped.
    """
    tokens: list[Token] = []
    for m in _WORD_RE.finditer(raw_text):
        norm = normalize_word(m.group())
        if not norm:
            continue
        tokens.append(
            Token(
                surface=m.group(),
                norm=norm,
                word_index=len(tokens),
                char_start=m.start(),
                char_end=m.end(),
            )
        )
    return tokens


def split_sentences(raw_text: str) -> list[str]:
    """Sentence-ish pieces, split after runs of ./!/?; delimiters retained."""
    return [m.group() for m in _SENTENCE_RE.finditer(raw_text) if m.group().strip()]


def chunk_notes(
    raw_text: str,
    target_words: int = 100,
    slide_id: str = "s1",
    chunk_id_prefix: str | None = None,
) -> list[Chunk]:
    """Greedy sentence-respecting chunking to approximately target_words.

    Sentences accumulate until adding the next one would exceed the target;
    a single over-long sentence becomes its own chunk.
    """
    if target_words < 1:
        raise ValueError("target_words must be >= 1")
    prefix = chunk_id_prefix if chunk_id_prefix is not None else slide_id
    sentences = split_sentences(raw_text)
    groups: list[str] = []
    current = ""
    current_words = 0
    for sent in sentences:
        n = len(tokenize(sent))
        if current and current_words + n > target_words:
            groups.append(current)
            current = ""
            current_words = 0
        current += sent
        current_words += n
    if current.strip():
        groups.append(current)

    chunks = []
    for i, text in enumerate(groups):
        toks = tokenize(text)
        if not toks:
            continue
        chunks.append(
            Chunk(
                chunk_id=f"{prefix}-c{i}",
                slide_id=slide_id,
                raw_text=text,
                tokens=tuple(toks),
            )
        )
    return chunks


def span_text(chunk: Chunk, span: Span) -> str:
    """Space-joined norms of the tokens covered by span."""
    if span.chunk_id != chunk.chunk_id:
        raise SpanRangeError(f"span chunk {span.chunk_id!r} != {chunk.chunk_id!r}")
    if span.end >= len(chunk.tokens):
        raise SpanRangeError(
            f"span [{span.start}, {span.end}] outside chunk of {len(chunk.tokens)} tokens"
        )
    return " ".join(t.norm for t in chunk.tokens[span.start : span.end + 1])


def find_ngram(chunk: Chunk, words: list[str]) -> int | None:
    """Earliest start index where chunk norms match words exactly, else None."""
    n = len(words)
    if n == 0 or n > len(chunk.tokens):
        return None
    norms = chunk.norms
    for i in range(len(norms) - n + 1):
        if norms[i : i + n] == words:
            return i
    return None


_SLIDE_HEADER_RE = re.compile(r"^#slide:\s*(\S+)\s*$")


def parse_script(document: str, target_words: int = 100) -> Script:
    """Parse the script import format.

    Slides are separated by a line containing only `---`; the first line of a
    slide block may be `#slide: <id>`.
    """
    blocks: list[list[str]] = [[]]
    for line in document.splitlines():
        if line.strip() == "---":
            blocks.append([])
        else:
            blocks[-1].append(line)

    slides: list[Slide] = []
    auto = 0
    for block in blocks:
        lines = list(block)
        while lines and not lines[0].strip():
            lines.pop(0)
        if not any(line.strip() for line in lines):
            continue
        slide_id = None
        m = _SLIDE_HEADER_RE.match(lines[0].strip()) if lines else None
        if m:
            slide_id = m.group(1)
            lines = lines[1:]
        if slide_id is None:
            auto += 1
            slide_id = f"s{auto}"
        body = "\n".join(lines).strip()
        chunks = chunk_notes(body, target_words=target_words, slide_id=slide_id)
        slides.append(Slide(slide_id=slide_id, asset_ref=None, chunks=tuple(chunks)))
    if not slides:
        raise ValueError("script document contains no slides")
    return Script(slides=tuple(slides))
