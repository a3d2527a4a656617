import json
from pathlib import Path

import pytest

from gesturelab.corpus import load_database, precompute_embeddings
from gesturelab.embedding import StubEmbeddingProvider
from gesturelab.script import Chunk, tokenize

FIXTURES = Path(__file__).parent / "fixtures"


def make_chunk(text: str, chunk_id: str = "c0", slide_id: str = "s1") -> Chunk:
    return Chunk(
        chunk_id=chunk_id,
        slide_id=slide_id,
        raw_text=text,
        tokens=tuple(tokenize(text)),
    )


@pytest.fixture
def stub():
    return StubEmbeddingProvider()


@pytest.fixture
def db_path():
    return FIXTURES / "gesture_db.jsonl"


@pytest.fixture
def db(db_path):
    return load_database(db_path)


@pytest.fixture
def indexed_db(db, stub):
    return precompute_embeddings(db, stub)


@pytest.fixture
def script_path():
    return FIXTURES / "script.txt"


@pytest.fixture
def script_document(script_path):
    return script_path.read_text()


def write_clips(clips_dir: Path, db) -> None:
    """Small deterministic binary stand-ins for the fixture clips."""
    (clips_dir / "clips").mkdir(parents=True, exist_ok=True)
    for entry in db.entries:
        data = (entry.entry_id * 64).encode()[:256]
        (clips_dir / entry.clip_uri).write_bytes(data)
