"""Runtime configuration: provider endpoints, thresholds, and data paths."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass(frozen=True)
class Config:
    emphasis_provider: str = "mock:"
    selection_provider: str = "mock:"
    embedding_provider: str = "stub"
    filter_threshold: float = 0.75
    tracker_threshold: float = 50.0
    onset_words: int = 4
    knn_k: int = 3
    chunk_target_words: int = 100
    database_path: str | None = None
    clips_dir: str | None = None
    data_dir: str = "gesturelab-data"
    embedding_cache: str | None = None

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        with Path(path).open() as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)
