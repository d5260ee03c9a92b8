"""Uniform completion interface over interchangeable model backends.

Three families: a remote HTTP service, a scripted mock keyed by purpose tag and
prompt patterns, and transcript record/replay. Replay keys on a hash covering
template identity, interpolated text, and attachment digests, so recorded
pipelines replay byte-identically with networking disabled.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import canondoc

PURPOSES = (
    "summarize",
    "claims",
    "guidance",
    "categorize",
    "plan",
    "validate-semantic",
    "recommend",
)


class BackendUnavailable(RuntimeError):
    pass


class ReplayMiss(KeyError):
    pass


class CapabilityMismatch(ValueError):
    pass


class UnparseableCompletion(ValueError):
    pass


@dataclass(frozen=True)
class Attachment:
    name: str
    digest: str  # sha256 of the artifact bytes

    @staticmethod
    def of(name: str, data: bytes) -> "Attachment":
        return Attachment(name, hashlib.sha256(data).hexdigest())


@dataclass(frozen=True)
class Prompt:
    template_id: str
    version: str
    text: str
    purpose: str
    attachments: tuple[Attachment, ...] = ()

    def __post_init__(self):
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown purpose {self.purpose!r}")

    @property
    def hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.template_id}@{self.version}\n".encode())
        h.update(self.text.encode("utf-8"))
        for a in self.attachments:
            h.update(f"\n{a.name}:{a.digest}".encode())
        return h.hexdigest()


@dataclass(frozen=True)
class Transcript:
    prompt_hash: str
    prompt_text: str
    purpose: str
    completion: str
    backend_identity: str
    latency_s: float = 0.0

    def to_value(self) -> dict:
        return {
            "prompt_hash": self.prompt_hash,
            "prompt_text": self.prompt_text,
            "purpose": self.purpose,
            "completion": self.completion,
            "backend_identity": self.backend_identity,
            "latency_s": canondoc.canon_float(self.latency_s),
        }

    @staticmethod
    def from_value(v: dict) -> "Transcript":
        return Transcript(
            v["prompt_hash"], v["prompt_text"], v["purpose"], v["completion"],
            v["backend_identity"], v.get("latency_s", 0.0),
        )


class Backend:
    identity: str = "abstract"
    supports_images: bool = False

    def complete(self, prompt: Prompt) -> str:
        self._check_capability(prompt)
        return self._complete(prompt)

    def _check_capability(self, prompt: Prompt) -> None:
        if prompt.attachments and not self.supports_images:
            raise CapabilityMismatch(
                f"backend {self.identity!r} is text-only; prompt carries "
                f"{len(prompt.attachments)} attachment(s)"
            )

    def _complete(self, prompt: Prompt) -> str:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass
class ScriptedRule:
    purpose: str
    pattern: str  # regex applied to the interpolated prompt text
    completion: str


class ScriptedBackend(Backend):
    """Deterministic canned completions keyed by purpose tag + prompt pattern."""

    identity = "scripted"

    def __init__(self, rules: Sequence[ScriptedRule], supports_images: bool = False):
        self.rules = list(rules)
        self.supports_images = supports_images
        self.calls: list[Prompt] = []

    def _complete(self, prompt: Prompt) -> str:
        self.calls.append(prompt)
        for rule in self.rules:
            if rule.purpose == prompt.purpose and re.search(rule.pattern, prompt.text, re.S):
                return rule.completion
        raise BackendUnavailable(
            f"no scripted rule matches purpose {prompt.purpose!r}"
        )


class ReplayBackend(Backend):
    """Replays recorded completions; errors loudly on any unrecorded prompt."""

    def __init__(self, transcripts: dict[str, Transcript], identity: str = "replay"):
        self.transcripts = dict(transcripts)
        self.identity = identity
        self.supports_images = True  # attachments were hashed at record time

    @classmethod
    def load(cls, directory: str | Path) -> "ReplayBackend":
        transcripts = {}
        for p in sorted(Path(directory).glob("*.doc")):
            t = Transcript.from_value(canondoc.loads(p.read_bytes()))
            transcripts[t.prompt_hash] = t
        return cls(transcripts)

    def _complete(self, prompt: Prompt) -> str:
        t = self.transcripts.get(prompt.hash)
        if t is None:
            raise ReplayMiss(
                f"no transcript for purpose {prompt.purpose!r} hash {prompt.hash[:12]}"
            )
        return t.completion


class RecordingBackend(Backend):
    """Wraps another backend and persists one transcript file per completion."""

    def __init__(self, inner: Backend, directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.identity = f"record({inner.identity})"
        self.supports_images = inner.supports_images

    def _complete(self, prompt: Prompt) -> str:
        t0 = time.monotonic()
        completion = self.inner.complete(prompt)
        t = Transcript(
            prompt_hash=prompt.hash,
            prompt_text=prompt.text,
            purpose=prompt.purpose,
            completion=completion,
            backend_identity=self.inner.identity,
            latency_s=time.monotonic() - t0,
        )
        path = self.directory / f"{prompt.hash}.doc"
        tmp = path.with_suffix(".doc.tmp")
        tmp.write_bytes(canondoc.dumps(t.to_value()))
        tmp.rename(path)
        return completion


@dataclass
class RemoteConfig:
    base_url: str
    model: str
    auth_env_var: str = ""
    timeout_s: float = 60.0
    max_tokens: int = 2048
    max_concurrency: int = 4
    supports_images: bool = False


class RemoteBackend(Backend):
    """HTTP completion service client; temperature pinned to 0."""

    _TRANSIENT = {408, 429, 500, 502, 503, 504}

    def __init__(self, config: RemoteConfig):
        import httpx

        self.config = config
        self.identity = f"remote({config.model})"
        self.supports_images = config.supports_images
        self._sem = threading.BoundedSemaphore(config.max_concurrency)
        headers = {}
        token = os.environ.get(config.auth_env_var, "") if config.auth_env_var else ""
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            base_url=config.base_url, timeout=config.timeout_s, headers=headers
        )

    def _complete(self, prompt: Prompt) -> str:
        import httpx

        body = {
            "model": self.config.model,
            "prompt": prompt.text,
            "purpose": prompt.purpose,
            "max_tokens": self.config.max_tokens,
            "temperature": 0,
        }
        last: Exception | None = None
        with self._sem:
            for attempt in range(3):
                try:
                    resp = self._client.post("/complete", json=body)
                except httpx.TransportError as e:
                    last = e
                else:
                    if resp.status_code == 200:
                        return resp.json()["completion"]
                    last = BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
                    if resp.status_code not in self._TRANSIENT:
                        break
                time.sleep(0.2 * 2**attempt)
        raise BackendUnavailable(f"remote backend failed after retries: {last}")


_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.S)


def extract_block(completion: str):
    """Pull the machine-readable fenced block out of a completion."""
    m = _FENCE_RE.search(completion)
    if not m:
        raise UnparseableCompletion("completion contains no fenced block")
    try:
        return json.loads(m.group(1))
    except json.JSONDecodeError as e:
        raise UnparseableCompletion(f"fenced block is not valid JSON: {e}") from e


def complete_structured(backend: Backend, prompt: Prompt):
    """Completion with a structured-output contract: one retry with a reminder."""
    completion = backend.complete(prompt)
    try:
        return extract_block(completion), 0
    except UnparseableCompletion:
        pass
    retry = Prompt(
        template_id=prompt.template_id,
        version=prompt.version,
        text=prompt.text
        + "\n\nReminder: respond with a single fenced ```json block containing the answer.",
        purpose=prompt.purpose,
        attachments=prompt.attachments,
    )
    return extract_block(backend.complete(retry)), 1


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    version: str
    body: str

    @property
    def template_id(self) -> str:
        return self.name

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()

    def render(self, purpose: str, attachments: tuple[Attachment, ...] = (), **fields) -> Prompt:
        return Prompt(
            template_id=self.name,
            version=self.version,
            text=self.body.format(**fields),
            purpose=purpose,
            attachments=attachments,
        )


def load_template(name: str, version: str = "1") -> PromptTemplate:
    fname = f"{name}@{version}.txt"
    body = resources.files("labpipe").joinpath("prompts", fname).read_text(encoding="utf-8")
    return PromptTemplate(name=name, version=version, body=body)
