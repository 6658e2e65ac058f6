"""Single choke point for model calls: backends, transcripts, replay."""

from __future__ import annotations

import json
import os
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    AutoranError,
    BackendTimeout,
    HttpError,
    ScriptExhausted,
    ScriptMismatch,
    TranscriptMismatch,
)
from .prompts import Completion, PromptEnvelope

ENV_URL = "AUTORAN_LLM_URL"
ENV_MODEL = "AUTORAN_LLM_MODEL"
ENV_KEY = "AUTORAN_LLM_KEY"

HTTP_TIMEOUT_S = 120.0
HTTP_RETRIES = 2


@dataclass
class TranscriptRecord:
    digest: str
    stage: str
    text: str
    backend_id: str
    latency_ms: float


class Transcript:
    """Append-only call log keyed by envelope digest."""

    def __init__(self):
        self.records: list[TranscriptRecord] = []

    def append(self, env: PromptEnvelope, completion: Completion) -> None:
        self.records.append(
            TranscriptRecord(
                digest=env.digest,
                stage=env.stage,
                text=completion.text,
                backend_id=completion.backend_id,
                latency_ms=completion.latency_ms,
            )
        )

    def __len__(self) -> int:
        return len(self.records)

    def save(self, path: Path | str) -> None:
        rows = [r.__dict__ for r in self.records]
        Path(path).write_text(json.dumps(rows, indent=2) + "\n")

    @classmethod
    def load(cls, path: Path | str) -> "Transcript":
        t = cls()
        for row in json.loads(Path(path).read_text()):
            t.records.append(TranscriptRecord(**row))
        return t


class MockScriptBackend:
    """Scripted responses consumed in order within each stage.

    Script format: JSON array of {stage, match_key, response}; match_key "*"
    matches anything, otherwise it must occur as a substring of the prompt's
    user text.
    """

    backend_id = "mock"

    def __init__(self, entries: list[dict]):
        self._queues: dict[str, deque] = {}
        for entry in entries:
            self._queues.setdefault(entry["stage"], deque()).append(entry)

    @classmethod
    def from_file(cls, path: Path | str) -> "MockScriptBackend":
        return cls(json.loads(Path(path).read_text()))

    def complete(self, env: PromptEnvelope) -> str:
        queue = self._queues.get(env.stage)
        if not queue:
            raise ScriptExhausted(env.stage)
        entry = queue.popleft()
        key = entry.get("match_key", "*")
        if key != "*" and key not in env.user_text:
            raise ScriptMismatch(env.stage, key)
        return entry["response"]


class HttpChatBackend:
    """OpenAI-compatible chat completions over HTTP, temperature pinned to 0."""

    backend_id = "http"

    def __init__(self, url: str | None = None, model: str | None = None, key: str | None = None):
        self.url = url or os.environ.get(ENV_URL, "")
        self.model = model or os.environ.get(ENV_MODEL, "gpt-4")
        self.key = key or os.environ.get(ENV_KEY, "")
        if not self.url:
            raise AutoranError(f"no chat endpoint configured (set {ENV_URL})")

    def complete(self, env: PromptEnvelope) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": env.system_text},
                {"role": "user", "content": env.user_text},
            ],
            "temperature": 0,
            "max_tokens": env.budget,
        }
        delay = 1.0
        for attempt in range(HTTP_RETRIES + 1):
            try:
                resp = httpx.post(self.url, json=body, headers=headers, timeout=HTTP_TIMEOUT_S)
            except httpx.TimeoutException as exc:
                if attempt == HTTP_RETRIES:
                    raise BackendTimeout(str(exc)) from exc
                time.sleep(delay)
                delay *= 2
                continue
            if resp.status_code >= 500 and attempt < HTTP_RETRIES:
                time.sleep(delay)
                delay *= 2
                continue
            if resp.status_code != 200:
                raise HttpError(resp.status_code, resp.text[:200])
            return resp.json()["choices"][0]["message"]["content"]
        raise HttpError(0, "unreachable")


class TranscriptReplayBackend:
    """Replays a recorded transcript; never touches the network."""

    backend_id = "replay"

    def __init__(self, transcript: Transcript):
        self._records = deque(transcript.records)

    @classmethod
    def from_file(cls, path: Path | str) -> "TranscriptReplayBackend":
        return cls(Transcript.load(path))

    def complete(self, env: PromptEnvelope) -> str:
        if not self._records:
            raise TranscriptMismatch(f"transcript exhausted at stage {env.stage!r}")
        record = self._records.popleft()
        if record.digest != env.digest:
            raise TranscriptMismatch(
                f"stage {env.stage!r}: envelope digest {env.digest[:12]} does not "
                f"match recorded {record.digest[:12]}"
            )
        return record.text


class Gateway:
    """Routes envelopes to the active backend and records the transcript."""

    def __init__(self, backend, transcript: Transcript | None = None):
        self.backend = backend
        self.transcript = transcript if transcript is not None else Transcript()

    def complete(self, env: PromptEnvelope) -> Completion:
        if not env.user_text.strip():
            raise AutoranError("prompt user text is empty")
        started = time.perf_counter()
        text = self.backend.complete(env)
        latency_ms = (time.perf_counter() - started) * 1000.0
        completion = Completion(
            text=text,
            backend_id=self.backend.backend_id,
            latency_ms=latency_ms,
            stage=env.stage,
        )
        self.transcript.append(env, completion)
        return completion
