"""String and vector similarity primitives.

similarity_ratio implements the length-sum variant of the Levenshtein ratio:

    sigma = (1 - D(s1, s2) / (|s1| + |s2|)) * 100

so 100 means identical strings and the score degrades with the share of
edited characters.
"""

from __future__ import annotations

import numpy as np


def levenshtein_distance(s1: str, s2: str) -> int:
    """Unit-cost edit distance (insert/delete/substitute) over characters."""
    if s1 == s2:
        return 0
    if not s1:
        return len(s2)
    if not s2:
        return len(s1)
    # Two-row DP; rows indexed by characters of s2.
    prev = list(range(len(s2) + 1))
    for i, c1 in enumerate(s1, start=1):
        curr = [i] + [0] * len(s2)
        for j, c2 in enumerate(s2, start=1):
            cost = 0 if c1 == c2 else 1
            curr[j] = min(prev[j] + 1, curr[j - 1] + 1, prev[j - 1] + cost)
        prev = curr
    return prev[-1]


def similarity_ratio(s1: str, s2: str) -> float:
    """Similarity percentage in [0, 100]; two empty strings score 100."""
    total = len(s1) + len(s2)
    if total == 0:
        return 100.0
    return (1.0 - levenshtein_distance(s1, s2) / total) * 100.0


def cosine_similarity(v1, v2) -> float:
    """cos angle between two nonzero equal-dimension vectors, in [-1, 1]."""
    a = np.asarray(v1, dtype=float)
    b = np.asarray(v2, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero vector")
    return float(np.dot(a, b) / (na * nb))
