"""Literature querying and rubric-based novelty scoring."""

from __future__ import annotations

import hashlib
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import canondoc
from .core import Claim, NOVELTY_RUBRIC, NoveltyAssessment, NoveltyCategory, ResearchQuestion
from .llm import Backend, load_template, complete_structured

_CATEGORIZE = load_template("categorize")

#: caveat attached to reports from the live service, which cannot read figures
FIGURE_BLINDNESS_CAVEAT = (
    "Caveat: the remote literature service does not analyze figures; findings "
    "reported only graphically in prior work may be missed."
)


class ClientUnavailable(RuntimeError):
    pass


class EmptyAnswer(RuntimeError):
    pass


@dataclass(frozen=True)
class LiteratureReport:
    question_id: str
    answer_text: str
    citations: tuple[tuple[str, str], ...]  # (identifier, snippet)
    client_identity: str
    attempts: int = 1
    caveats: tuple[str, ...] = ()

    def to_value(self) -> dict:
        return {
            "question_id": self.question_id,
            "answer_text": self.answer_text,
            "citations": [[c[0], c[1]] for c in self.citations],
            "client_identity": self.client_identity,
            "attempts": self.attempts,
            "caveats": list(self.caveats),
        }

    @staticmethod
    def from_value(v: dict) -> "LiteratureReport":
        return LiteratureReport(
            v["question_id"],
            v["answer_text"],
            tuple((c[0], c[1]) for c in v["citations"]),
            v["client_identity"],
            v.get("attempts", 1),
            tuple(v.get("caveats", ())),
        )


class LiteratureClient:
    identity: str = "abstract"

    def ask(self, question: str) -> tuple[str, list[tuple[str, str]]]:
        """Returns (answer_text, citations). Raises ClientUnavailable on failure."""
        raise NotImplementedError


@dataclass
class MockFixture:
    question_pattern: str
    answer: str
    citations: list[tuple[str, str]] = field(default_factory=list)


class MockLiteratureClient(LiteratureClient):
    """Fixture-backed client; unmatched questions get a no-results answer."""

    identity = "mock"

    def __init__(self, fixtures: Sequence[MockFixture], fail_times: int = 0):
        self.fixtures = list(fixtures)
        self.fail_times = fail_times
        self.calls = 0

    def ask(self, question: str):
        self.calls += 1
        if self.fail_times > 0:
            self.fail_times -= 1
            raise ClientUnavailable("simulated transient failure")
        for fx in self.fixtures:
            if re.search(fx.question_pattern, question, re.I):
                return fx.answer, list(fx.citations)
        return "No prior reports of this observation were found in the literature.", []


class ReplayLiteratureClient(LiteratureClient):
    """Replays recorded answers keyed by a hash of the question text."""

    identity = "replay-lit"

    def __init__(self, answers: dict[str, tuple[str, list[tuple[str, str]]]]):
        self.answers = dict(answers)

    @staticmethod
    def question_key(question: str) -> str:
        return hashlib.sha256(question.encode("utf-8")).hexdigest()

    @classmethod
    def load(cls, directory: str | Path) -> "ReplayLiteratureClient":
        answers = {}
        for p in sorted(Path(directory).glob("*.doc")):
            v = canondoc.loads(p.read_bytes())
            answers[v["question_key"]] = (
                v["answer"],
                [(c[0], c[1]) for c in v["citations"]],
            )
        return cls(answers)

    def ask(self, question: str):
        key = self.question_key(question)
        if key not in self.answers:
            raise ClientUnavailable(f"no recorded answer for question hash {key[:12]}")
        return self.answers[key]


@dataclass
class RemoteLiteratureConfig:
    endpoint_url: str
    auth_env_var: str = ""
    timeout_s: float = 120.0
    max_concurrency: int = 2


class RemoteLiteratureClient(LiteratureClient):
    identity = "remote-lit"

    def __init__(self, config: RemoteLiteratureConfig):
        import httpx

        headers = {}
        token = os.environ.get(config.auth_env_var, "") if config.auth_env_var else ""
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(timeout=config.timeout_s, headers=headers)
        self.config = config

    def ask(self, question: str):
        import httpx

        try:
            resp = self._client.post(self.config.endpoint_url, json={"question": question})
        except httpx.TransportError as e:
            raise ClientUnavailable(str(e)) from e
        if resp.status_code != 200:
            raise ClientUnavailable(f"HTTP {resp.status_code}")
        body = resp.json()
        return body["answer"], [(c["id"], c.get("snippet", "")) for c in body.get("citations", [])]


def query_literature(
    question: ResearchQuestion,
    client: LiteratureClient,
    max_attempts: int = 3,
    backoff_s: float = 0.2,
) -> LiteratureReport:
    if not question.text.strip():
        raise ValueError("question must be non-empty")
    last: Exception | None = None
    for attempt in range(1, max_attempts + 1):
        try:
            answer, citations = client.ask(question.text)
        except ClientUnavailable as e:
            last = e
            if attempt < max_attempts:
                time.sleep(backoff_s * 2 ** (attempt - 1))
            continue
        if not answer.strip():
            raise EmptyAnswer(f"empty answer for question {question.claim_id}")
        caveats = (FIGURE_BLINDNESS_CAVEAT,) if isinstance(client, RemoteLiteratureClient) else ()
        return LiteratureReport(
            question_id=question.claim_id,
            answer_text=answer,
            citations=tuple((i, s) for i, s in citations),
            client_identity=client.identity,
            attempts=attempt,
            caveats=caveats,
        )
    raise ClientUnavailable(f"literature client failed after {max_attempts} attempts: {last}")


def categorize_report(
    report: LiteratureReport, claim: Claim, backend: Backend
) -> tuple[NoveltyCategory, str]:
    prompt = _CATEGORIZE.render(
        purpose="categorize", claim=claim.statement, report=report.answer_text
    )
    block, _ = complete_structured(backend, prompt)
    try:
        category = NoveltyCategory(block["category"])
    except (KeyError, ValueError, TypeError) as e:
        raise ValueError(f"backend returned invalid category: {block!r}") from e
    return category, str(block.get("justification", ""))


def score_category(category: NoveltyCategory) -> int:
    return NOVELTY_RUBRIC[category]


def assess_claim(
    claim: Claim,
    question: ResearchQuestion,
    client: LiteratureClient,
    backend: Backend,
) -> NoveltyAssessment:
    report = query_literature(question, client)
    category, _ = categorize_report(report, claim, backend)
    return NoveltyAssessment(
        claim_id=claim.id,
        literature_report=report.answer_text,
        citations=tuple(c[0] for c in report.citations),
        category=category,
        score=score_category(category),
    )
