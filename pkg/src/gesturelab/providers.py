"""Completion providers: HTTP wire contract, canned-fixture mock, retries.

Wire contract: POST {"prompt": <string>} -> {"completion": <string>}. The mock
provider reads completions from a JSONL fixture keyed by the SHA-256 of the
exact prompt, so deterministic pipelines can be replayed without a model.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from pathlib import Path

log = logging.getLogger(__name__)

# Instruction frames wrap the system text + payload into the shape the target
# model expects. The frame is provider configuration, not pipeline logic.
PLAIN_FRAME = "{system}\nText: {text}"
LLAMA2_FRAME = "<s>[INST] <<SYS>> {system} <</SYS>> Text: {text} [/INST]"


class CompletionError(Exception):
    """Transport failure after exhausting retries."""


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class HttpCompletionProvider:
    def __init__(
        self,
        endpoint: str,
        timeout: float = 60.0,
        max_retries: int = 2,
        retry_wait: float = 0.5,
        frame: str = PLAIN_FRAME,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_retries = max_retries
        self.retry_wait = retry_wait
        self.frame = frame

    def complete(self, prompt: str) -> str:
        import httpx

        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = httpx.post(
                    self.endpoint, json={"prompt": prompt}, timeout=self.timeout
                )
                resp.raise_for_status()
                return resp.json()["completion"]
            except httpx.HTTPError as exc:
                last = exc
                log.warning(
                    "completion request failed (attempt %d/%d): %s",
                    attempt + 1,
                    self.max_retries + 1,
                    exc,
                )
                if attempt < self.max_retries:
                    time.sleep(self.retry_wait)
        raise CompletionError(f"completion request failed: {last}") from last


class MockCompletionProvider:
    """Canned completions keyed by prompt hash.

    Fixture file: one JSONL record per line,
    {"prompt_sha256": <hex or "*">, "completion": <string>}; the "*" record is
    the fallback for unknown prompts (defaults to the empty completion).
    """

    def __init__(
        self,
        fixture_path: str | Path | None = None,
        responses: dict[str, str] | None = None,
        default: str = "",
        frame: str = PLAIN_FRAME,
    ):
        self.responses: dict[str, str] = dict(responses or {})
        self.default = default
        self.frame = frame
        if fixture_path is not None:
            with Path(fixture_path).open() as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    if rec["prompt_sha256"] == "*":
                        self.default = rec["completion"]
                    else:
                        self.responses[rec["prompt_sha256"]] = rec["completion"]

    def add(self, prompt: str, completion: str) -> None:
        self.responses[prompt_hash(prompt)] = completion

    def complete(self, prompt: str) -> str:
        return self.responses.get(prompt_hash(prompt), self.default)


class FailingCompletionProvider:
    """Always raises; for fault-injection tests."""

    def __init__(self, message: str = "provider down"):
        self.message = message
        self.frame = PLAIN_FRAME

    def complete(self, prompt: str) -> str:
        raise CompletionError(self.message)


def write_mock_fixture(path: str | Path, records: dict[str, str], default: str | None = None) -> None:
    """Write a mock fixture file from {prompt: completion} pairs."""
    with Path(path).open("w") as fh:
        for prompt, completion in records.items():
            fh.write(
                json.dumps(
                    {"prompt_sha256": prompt_hash(prompt), "completion": completion}
                )
                + "\n"
            )
        if default is not None:
            fh.write(json.dumps({"prompt_sha256": "*", "completion": default}) + "\n")


def build_completion_provider(spec: str, frame: str = PLAIN_FRAME):
    """Provider from a config string: 'mock:<fixture path>' or 'http:<endpoint>'."""
    if spec.startswith("mock:"):
        return MockCompletionProvider(fixture_path=spec[len("mock:") :], frame=frame)
    if spec.startswith("http:") or spec.startswith("https:"):
        return HttpCompletionProvider(spec, frame=frame)
    raise ValueError(f"unknown completion provider spec: {spec!r}")
