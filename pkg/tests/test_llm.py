import pytest

from labpipe.llm import (
    Attachment,
    BackendUnavailable,
    CapabilityMismatch,
    Prompt,
    RecordingBackend,
    ReplayBackend,
    ReplayMiss,
    ScriptedBackend,
    ScriptedRule,
    UnparseableCompletion,
    complete_structured,
    extract_block,
    load_template,
)


def make_prompt(text="hello", purpose="summarize", attachments=()):
    return Prompt(template_id="t", version="1", text=text, purpose=purpose,
                  attachments=tuple(attachments))


class TestScripted:
    def test_pattern_lookup(self):
        b = ScriptedBackend([ScriptedRule("summarize", r"hello", "canned")])
        assert b.complete(make_prompt()) == "canned"

    def test_no_match_raises(self):
        b = ScriptedBackend([ScriptedRule("claims", r".", "x")])
        with pytest.raises(BackendUnavailable):
            b.complete(make_prompt())

    def test_deterministic(self):
        b = ScriptedBackend([ScriptedRule("summarize", r".", "same")])
        assert b.complete(make_prompt()) == b.complete(make_prompt())


class TestRecordReplay:
    def test_record_then_replay(self, tmp_path):
        inner = ScriptedBackend([ScriptedRule("summarize", r".", "recorded-answer")])
        rec = RecordingBackend(inner, tmp_path)
        p = make_prompt("some unique text")
        assert rec.complete(p) == "recorded-answer"

        replay = ReplayBackend.load(tmp_path)
        assert replay.complete(p) == "recorded-answer"

    def test_replay_miss_names_purpose_and_hash(self, tmp_path):
        replay = ReplayBackend.load(tmp_path)
        p = make_prompt("never recorded", purpose="claims")
        with pytest.raises(ReplayMiss) as ei:
            replay.complete(p)
        assert "claims" in str(ei.value)
        assert p.hash[:12] in str(ei.value)

    def test_prompt_hash_covers_attachments(self):
        a1 = Attachment.of("img", b"aaa")
        a2 = Attachment.of("img", b"bbb")
        assert make_prompt(attachments=[a1]).hash != make_prompt(attachments=[a2]).hash

    def test_prompt_hash_covers_version(self):
        p1 = Prompt("t", "1", "x", "summarize")
        p2 = Prompt("t", "2", "x", "summarize")
        assert p1.hash != p2.hash


def test_capability_mismatch_for_text_only_backend():
    b = ScriptedBackend([ScriptedRule("summarize", r".", "x")], supports_images=False)
    with pytest.raises(CapabilityMismatch):
        b.complete(make_prompt(attachments=[Attachment.of("img", b"123")]))


class TestStructuredContract:
    def test_extract_block(self):
        assert extract_block('before ```json\n{"a": 1}\n``` after') == {"a": 1}

    def test_no_block_raises(self):
        with pytest.raises(UnparseableCompletion):
            extract_block("no block here")

    def test_retry_once_with_reminder(self):
        b = ScriptedBackend(
            [
                ScriptedRule("claims", r"Reminder", '```json\n[1, 2]\n```'),
                ScriptedRule("claims", r".", "malformed output"),
            ]
        )
        block, retries = complete_structured(b, make_prompt("ask", purpose="claims"))
        assert block == [1, 2]
        assert retries == 1

    def test_second_failure_raises(self):
        b = ScriptedBackend([ScriptedRule("claims", r".", "still bad")])
        with pytest.raises(UnparseableCompletion):
            complete_structured(b, make_prompt("ask", purpose="claims"))


def test_templates_load_and_render():
    t = load_template("claims")
    p = t.render(purpose="claims", summary="text", max_claims=5)
    assert "text" in p.text
    assert t.content_hash == load_template("claims").content_hash


def test_unknown_purpose_rejected():
    with pytest.raises(ValueError):
        Prompt("t", "1", "x", "chat")
