"""Chat-completion client: retries, redaction, offline stubs, normalization."""

from __future__ import annotations

import logging
import socket

import pytest

from scproof.errors import (
    AuthFailed,
    MalformedResponse,
    NoStubForKey,
    RateLimited,
    TransportError,
    UnparseableNormalization,
)
from scproof.llm import (
    LlmConfig,
    PromptBundle,
    complete,
    complete_offline,
    normalize_runner_output,
)
from scproof.runner import parse_kontrol_log

from conftest import GOLDEN, STUBS


@pytest.fixture
def live_cfg(monkeypatch):
    monkeypatch.setenv("TEST_LLM_KEY", "sk-very-secret-value")
    return LlmConfig(
        endpoint_url="https://llm.example/v1",
        model_id="test-model",
        api_key_env_name="TEST_LLM_KEY",
        mode="live",
        request_timeout=1.0,
    )


@pytest.fixture(autouse=True)
def no_sleep(monkeypatch):
    monkeypatch.setattr("scproof.llm.time.sleep", lambda s: None)


def bundle() -> PromptBundle:
    return PromptBundle(system="sys", user="usr", metadata={"defect_kind": "X", "contract": "Y"})


def reply_body(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


# --- complete ------------------------------------------------------------------


def test_complete_returns_first_choice_content(live_cfg):
    seen = {}

    def transport(url, headers, payload, timeout):
        seen.update(url=url, payload=payload, headers=headers)
        return 200, reply_body("contract X {}")

    assert complete(live_cfg, bundle(), transport=transport) == "contract X {}"
    assert seen["url"] == "https://llm.example/v1/chat/completions"
    assert seen["payload"]["model"] == "test-model"
    assert seen["payload"]["messages"][0] == {"role": "system", "content": "sys"}
    assert seen["payload"]["messages"][1] == {"role": "user", "content": "usr"}
    assert seen["headers"]["Authorization"].endswith("sk-very-secret-value")


def test_complete_requires_live_mode():
    cfg = LlmConfig(mode="offline_stub")
    with pytest.raises(AuthFailed):
        complete(cfg, bundle(), transport=lambda *a: (_ for _ in ()).throw(AssertionError))


def test_missing_api_key_fails_before_any_network(live_cfg, monkeypatch):
    monkeypatch.delenv("TEST_LLM_KEY")
    calls = []

    def transport(*args):
        calls.append(args)
        return 200, reply_body("x")

    with pytest.raises(AuthFailed):
        complete(live_cfg, bundle(), transport=transport)
    assert calls == []


def test_http_401_is_auth_failed(live_cfg):
    with pytest.raises(AuthFailed):
        complete(live_cfg, bundle(), transport=lambda *a: (401, None))


def test_empty_choices_is_malformed(live_cfg):
    with pytest.raises(MalformedResponse):
        complete(live_cfg, bundle(), transport=lambda *a: (200, {"choices": []}))


def test_rate_limit_retries_three_times_then_raises(live_cfg):
    attempts = []

    def transport(*args):
        attempts.append(1)
        return 429, None

    with pytest.raises(RateLimited):
        complete(live_cfg, bundle(), transport=transport)
    assert len(attempts) == 3


def test_transport_error_retried_then_succeeds(live_cfg):
    attempts = []

    def transport(*args):
        attempts.append(1)
        if len(attempts) < 3:
            raise TransportError("connection reset")
        return 200, reply_body("recovered")

    assert complete(live_cfg, bundle(), transport=transport) == "recovered"
    assert len(attempts) == 3


def test_logs_never_contain_api_key(live_cfg, caplog):
    with caplog.at_level(logging.DEBUG, logger="scproof.llm"):
        complete(live_cfg, bundle(), transport=lambda *a: (200, reply_body("ok")))
    assert "sk-very-secret-value" not in caplog.text


def test_prompt_bundle_rejects_empty_parts():
    with pytest.raises(ValueError):
        PromptBundle(system="", user="x")
    with pytest.raises(ValueError):
        PromptBundle(system="x", user="")


# --- offline stubs -----------------------------------------------------------------


def test_offline_stub_round_trip():
    reply = complete_offline(
        PromptBundle(
            system="s",
            user="u",
            metadata={"defect_kind": "Reentrancy", "contract": "ReentrancySimple"},
        ),
        STUBS,
    )
    assert "test_proofReentrancyExploit" in reply


def test_offline_stub_unknown_key():
    with pytest.raises(NoStubForKey):
        complete_offline(
            PromptBundle(system="s", user="u", metadata={"defect_kind": "Nope", "contract": "X"}),
            STUBS,
        )


def test_offline_stub_matches_deterministic_fill():
    """The canned ComplexFallback reply is exactly the deterministic fill output."""
    from scproof.detectors import run_detectors
    from scproof.templates import (
        TestSuiteSpec,
        extract_code,
        fill_deterministic,
        load_templates,
    )
    from conftest import load_fixture_ir

    ir = load_fixture_ir("complex_fallback", "vulnerable")
    evidence = run_detectors(ir)[0]
    template = load_templates()[evidence.kind]
    spec = TestSuiteSpec(
        defect_kind=evidence.kind,
        template_id=template.template_id,
        contract_name=ir.name,
        import_path="src/ComplexFallback.sol",
        constructor_args=[],
        helper_contracts_needed=[],
        evidence=evidence,
        contract_source="",
    )
    deterministic = fill_deterministic(template, spec).strip()
    stub = extract_code(
        complete_offline(
            PromptBundle(
                system="s",
                user="u",
                metadata={"defect_kind": "ComplexFallback", "contract": "ComplexFallback"},
            ),
            STUBS,
        )
    ).strip()
    assert stub == deterministic


def test_offline_paths_touch_no_network(monkeypatch):
    def deny(*args, **kwargs):
        raise AssertionError("network operation attempted in offline mode")

    monkeypatch.setattr(socket, "socket", deny)
    monkeypatch.setattr(socket, "create_connection", deny)
    reply = complete_offline(
        PromptBundle(
            system="s",
            user="u",
            metadata={"defect_kind": "AccessControl", "contract": "UnprotectedSelfdestruct"},
        ),
        STUBS,
    )
    assert "cancelContract" in reply


# --- runner-output normalization ----------------------------------------------------


def kontrol_log(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


def test_normalize_kontrol_failure(live_cfg):
    log = kontrol_log("kontrol_fail.txt")
    transport = lambda *a: (200, reply_body("test_accessControl fail"))
    assert normalize_runner_output(live_cfg, log, transport=transport) == {
        "test_accessControl": "fail"
    }


def test_normalize_agrees_with_regex_parser_on_goldens(live_cfg):
    for name in ("kontrol_fail.txt", "kontrol_pass.txt", "kontrol_mixed.txt"):
        log = kontrol_log(name)
        regex_outcomes = {m: o.status.value for m, o in parse_kontrol_log(log).items()}
        canned = "\n".join(f"{m} {s}" for m, s in sorted(regex_outcomes.items()))
        normalized = normalize_runner_output(
            live_cfg, log, transport=lambda *a, canned=canned: (200, reply_body(canned))
        )
        assert normalized == regex_outcomes


def test_normalize_empty_log_rejected(live_cfg):
    with pytest.raises(UnparseableNormalization):
        normalize_runner_output(live_cfg, "   ", transport=lambda *a: (200, reply_body("x pass")))


def test_normalize_drops_methods_absent_from_log(live_cfg):
    log = kontrol_log("kontrol_mixed.txt")
    reply = "test_depositAccounting pass\ntest_hallucinated fail\ntest_accessControl fail"
    normalized = normalize_runner_output(
        live_cfg, log, transport=lambda *a: (200, reply_body(reply))
    )
    assert "test_hallucinated" not in normalized
    assert normalized == {"test_depositAccounting": "pass", "test_accessControl": "fail"}


def test_normalize_bad_format_rejected(live_cfg):
    log = kontrol_log("kontrol_pass.txt")
    with pytest.raises(UnparseableNormalization):
        normalize_runner_output(
            live_cfg, log, transport=lambda *a: (200, reply_body("everything looked fine!"))
        )
