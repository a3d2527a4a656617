"""Gesture rehearsal toolkit.

Pipeline: tokenize presenter notes, propose emphasis regions with a completion
model, retrieve matching gesture clips from an embedded corpus, and drive a
live rehearsal tracker that cues each gesture just before its region.
"""

__version__ = "0.1.0"
