"""Hermetic end-to-end pipeline runs: snapshots in, findings and exit codes out."""

from __future__ import annotations

import json
import socket
import subprocess

import pytest

from scproof.cli import main as cli_main
from scproof.detectors import DefectKind
from scproof.pipeline import cmd_detect, cmd_gen_tests, cmd_run
from scproof.report import exit_code_for, parse_report
from scproof.verdict import Confidence, VerdictKind

from conftest import STUBS, make_offline_config, snapshot_path


def write_mock_script(tmp_path, outcomes: dict) -> str:
    path = tmp_path / "mock_script.json"
    path.write_text(json.dumps(outcomes))
    return str(path)


FALLBACK_BOTH_PASS = {
    "test_proveTransferWorks": "pass",
    "test_proveTransferDoesNotWorkWithLimitedGas": "pass",
}


# --- cmd_detect -----------------------------------------------------------------


def test_detect_listing1_suspected_reentrancy(tmp_path):
    config = make_offline_config(tmp_path)
    report = cmd_detect([snapshot_path("reentrancy", "vulnerable")], config)
    reentrancy = next(f for f in report.findings if f.defect_kind is DefectKind.REENTRANCY)
    assert reentrancy.verdict is VerdictKind.SUSPECTED
    assert reentrancy.evidence.gating_facts["all_calls_gas_capped"] == "true"
    assert all(
        f.verdict in (VerdictKind.CLEAN, VerdictKind.SUSPECTED) for f in report.findings
    )
    assert exit_code_for(report) == 1


def test_detect_listing4_suspected_complex_fallback(tmp_path):
    config = make_offline_config(tmp_path)
    report = cmd_detect([snapshot_path("complex_fallback", "vulnerable")], config)
    verdicts = {f.defect_kind: f.verdict for f in report.findings}
    assert verdicts[DefectKind.COMPLEX_FALLBACK] is VerdictKind.SUSPECTED
    assert all(
        v is VerdictKind.CLEAN
        for k, v in verdicts.items()
        if k is not DefectKind.COMPLEX_FALLBACK
    )


def test_detect_empty_dir_empty_report(tmp_path):
    config = make_offline_config(tmp_path)
    empty = tmp_path / "empty"
    empty.mkdir()
    report = cmd_detect([empty], config)
    assert report.findings == []
    assert report.inputs == []
    assert exit_code_for(report) == 0


def test_detect_safe_corpus_all_clean(tmp_path):
    config = make_offline_config(tmp_path)
    paths = [snapshot_path(d, "safe") for d in ("reentrancy", "complex_fallback", "access_control")]
    report = cmd_detect(paths, config)
    assert all(f.verdict is VerdictKind.CLEAN for f in report.findings)
    assert exit_code_for(report) == 0


# --- cmd_gen_tests ------------------------------------------------------------------


def test_gen_tests_complex_fallback_offline_deterministic(tmp_path):
    config = make_offline_config(tmp_path)
    report = cmd_gen_tests([snapshot_path("complex_fallback", "vulnerable")], config)
    suite = tmp_path / "work" / "suites" / "ComplexFallback" / "complex_fallback"
    test_file = suite / "ComplexFallbackTest.sol"
    assert test_file.is_file()
    text = test_file.read_text()
    assert "contract ComplexFallbackTest is Test" in text
    assert "ContractUnderTest" not in text
    provenance = json.loads((suite / "provenance.json").read_text())
    assert provenance["compiled_ok"] is True
    assert set(provenance["fill_provenance"].values()) == {"deterministic"}
    assert str(test_file) in report.artifacts


def test_gen_tests_reentrancy_from_stub(tmp_path):
    config = make_offline_config(tmp_path)
    cmd_gen_tests([snapshot_path("reentrancy", "vulnerable")], config)
    suite = tmp_path / "work" / "suites" / "ReentrancySimple" / "reentrancy"
    text = (suite / "ReentrancySimpleTest.sol").read_text()
    stub_body = (STUBS / "Reentrancy__ReentrancySimple.reply.txt").read_text()
    assert text.strip() in stub_body  # extracted code block round-trips
    assert (suite / "Attacker.sol").is_file()
    provenance = json.loads((suite / "provenance.json").read_text())
    assert provenance["fill_provenance"]["deposit_call_happy"] == "offline_stub"
    assert provenance["fill_provenance"]["import_path"] == "deterministic"


def test_gen_tests_stage_one_only_kind_writes_no_suite(tmp_path):
    config = make_offline_config(tmp_path)
    report = cmd_gen_tests([snapshot_path("block_env", "vulnerable")], config)
    assert not (tmp_path / "work" / "suites").exists()
    block_env = next(
        f for f in report.findings if f.defect_kind is DefectKind.BLOCK_ENV_DEPENDENCY
    )
    assert block_env.verdict is VerdictKind.SUSPECTED
    assert any("no proof template" in note for note in block_env.notes)


def test_gen_tests_llm_disabled_degrades_low(tmp_path):
    config = make_offline_config(tmp_path, llm_mode="disabled")
    report = cmd_gen_tests([snapshot_path("reentrancy", "vulnerable")], config)
    reentrancy = next(f for f in report.findings if f.defect_kind is DefectKind.REENTRANCY)
    assert reentrancy.verdict is VerdictKind.SUSPECTED
    assert reentrancy.confidence is Confidence.LOW


def test_gen_tests_offline_closure_with_llm_disabled(tmp_path):
    """Fully-deterministic templates need no LLM at all."""
    config = make_offline_config(tmp_path, llm_mode="disabled")
    report = cmd_gen_tests([snapshot_path("complex_fallback", "vulnerable")], config)
    suite = tmp_path / "work" / "suites" / "ComplexFallback" / "complex_fallback"
    assert (suite / "ComplexFallbackTest.sol").is_file()
    provenance = json.loads((suite / "provenance.json").read_text())
    assert provenance["compiled_ok"] is True
    fallback = next(
        f for f in report.findings if f.defect_kind is DefectKind.COMPLEX_FALLBACK
    )
    assert fallback.verdict is VerdictKind.SUSPECTED  # gen-tests never proves


def test_gen_tests_invalid_reply_still_writes_diagnosed_suite(tmp_path):
    bad_stubs = tmp_path / "bad-stubs"
    bad_stubs.mkdir()
    (bad_stubs / "AccessControl__UnprotectedSelfdestruct.reply.txt").write_text(
        "```solidity\npragma solidity 0.8.29;\ncontract Wrong { function test_other() public {} }\n```"
    )
    config = make_offline_config(tmp_path, stub_dir=str(bad_stubs))
    report = cmd_gen_tests([snapshot_path("access_control", "vulnerable")], config)
    suite = tmp_path / "work" / "suites" / "UnprotectedSelfdestruct" / "access_control"
    assert (suite / "UnprotectedSelfdestructTest.sol").is_file()
    provenance = json.loads((suite / "provenance.json").read_text())
    assert provenance["compiled_ok"] is False
    assert any("test_accessControl" in d for d in provenance["diagnostics"])
    access = next(f for f in report.findings if f.defect_kind is DefectKind.ACCESS_CONTROL)
    assert access.verdict is VerdictKind.SUSPECTED
    assert access.confidence is Confidence.LOW


def test_gen_tests_missing_stub_degrades(tmp_path):
    empty_stub_dir = tmp_path / "no-stubs"
    empty_stub_dir.mkdir()
    config = make_offline_config(tmp_path, stub_dir=str(empty_stub_dir))
    report = cmd_gen_tests([snapshot_path("access_control", "vulnerable")], config)
    access = next(f for f in report.findings if f.defect_kind is DefectKind.ACCESS_CONTROL)
    assert access.verdict is VerdictKind.SUSPECTED
    assert access.confidence is Confidence.LOW


# --- cmd_run -----------------------------------------------------------------------


def test_run_scenario_complex_fallback_proven(tmp_path):
    config = make_offline_config(
        tmp_path, mock_script=write_mock_script(tmp_path, FALLBACK_BOTH_PASS)
    )
    report = cmd_run([snapshot_path("complex_fallback", "vulnerable")], config)
    proven = [f for f in report.findings if f.verdict is VerdictKind.PROVEN_VULNERABLE]
    assert len(proven) == 1
    assert proven[0].defect_kind is DefectKind.COMPLEX_FALLBACK
    assert proven[0].confidence is Confidence.HIGH
    assert exit_code_for(report) == 2
    assert any(path.endswith(".log") for path in report.artifacts)


def test_run_access_control_kontrol_fail_scenario(tmp_path):
    config = make_offline_config(
        tmp_path, mock_script=write_mock_script(tmp_path, {"test_accessControl": "fail"})
    )
    report = cmd_run([snapshot_path("access_control", "vulnerable")], config)
    verdicts = {f.defect_kind: f.verdict for f in report.findings}
    assert verdicts[DefectKind.ACCESS_CONTROL] is VerdictKind.PROVEN_VULNERABLE
    assert all(
        v is VerdictKind.CLEAN for k, v in verdicts.items() if k is not DefectKind.ACCESS_CONTROL
    )
    assert exit_code_for(report) == 2


def test_run_reentrancy_both_pass_proven_safe(tmp_path):
    config = make_offline_config(
        tmp_path,
        mock_script=write_mock_script(
            tmp_path,
            {"test_proofWithdrawUsuallyWorks": "pass", "test_proofReentrancyExploit": "pass"},
        ),
    )
    report = cmd_run([snapshot_path("reentrancy", "vulnerable")], config)
    reentrancy = next(f for f in report.findings if f.defect_kind is DefectKind.REENTRANCY)
    assert reentrancy.verdict is VerdictKind.PROVEN_SAFE_FOR_SCENARIO
    assert exit_code_for(report) == 0


def test_run_mock_without_script_yields_error_verdict(tmp_path):
    config = make_offline_config(tmp_path)
    report = cmd_run([snapshot_path("complex_fallback", "vulnerable")], config)
    fallback = next(f for f in report.findings if f.defect_kind is DefectKind.COMPLEX_FALLBACK)
    assert fallback.verdict is VerdictKind.ERROR
    assert exit_code_for(report) == 3


def test_run_backend_missing_degrades_execution(tmp_path):
    config = make_offline_config(
        tmp_path,
        backend="forge",
        allow_local_tools=True,
        forge_path=str(tmp_path / "no-such-forge"),
    )
    report = cmd_run([snapshot_path("access_control", "vulnerable")], config)
    access = next(f for f in report.findings if f.defect_kind is DefectKind.ACCESS_CONTROL)
    assert access.verdict is VerdictKind.SUSPECTED
    assert access.confidence is Confidence.MEDIUM  # suite existed; execution failed


def test_run_per_contract_mock_script(tmp_path):
    script = {"ComplexFallback": FALLBACK_BOTH_PASS}
    config = make_offline_config(tmp_path, mock_script=write_mock_script(tmp_path, script))
    report = cmd_run([snapshot_path("complex_fallback", "vulnerable")], config)
    fallback = next(f for f in report.findings if f.defect_kind is DefectKind.COMPLEX_FALLBACK)
    assert fallback.verdict is VerdictKind.PROVEN_VULNERABLE


# --- composability and hermeticity ------------------------------------------------------


def test_stage_composability(tmp_path):
    """detect -> gen-tests -> run agree on evidence, and gen/run suites match."""
    mock = write_mock_script(tmp_path, FALLBACK_BOTH_PASS)
    path = snapshot_path("complex_fallback", "vulnerable")

    detect_report = cmd_detect([path], make_offline_config(tmp_path / "a"))
    gen_report = cmd_gen_tests([path], make_offline_config(tmp_path / "b"))
    run_report = cmd_run([path], make_offline_config(tmp_path / "c", mock_script=mock))

    def evidence_of(report):
        return {
            f.defect_kind: f.evidence.to_dict() for f in report.findings if f.evidence is not None
        }

    assert evidence_of(detect_report) == evidence_of(gen_report) == evidence_of(run_report)
    gen_suite = (
        tmp_path / "b" / "work" / "suites" / "ComplexFallback" / "complex_fallback"
        / "ComplexFallbackTest.sol"
    )
    run_suite = (
        tmp_path / "c" / "work" / "suites" / "ComplexFallback" / "complex_fallback"
        / "ComplexFallbackTest.sol"
    )
    assert gen_suite.read_text() == run_suite.read_text()


def test_offline_run_spawns_no_processes_and_no_network(tmp_path, monkeypatch):
    def deny_process(*args, **kwargs):
        raise AssertionError(f"subprocess spawned in offline mode: {args}")

    def deny_socket(*args, **kwargs):
        raise AssertionError("network touched in offline mode")

    monkeypatch.setattr(subprocess, "run", deny_process)
    monkeypatch.setattr(subprocess, "Popen", deny_process)
    monkeypatch.setattr(socket, "socket", deny_socket)
    monkeypatch.setattr(socket, "create_connection", deny_socket)

    config = make_offline_config(
        tmp_path, mock_script=write_mock_script(tmp_path, FALLBACK_BOTH_PASS)
    )
    report = cmd_run([snapshot_path("complex_fallback", "vulnerable")], config)
    assert exit_code_for(report) == 2


def test_mock_transparency(tmp_path):
    """Downstream behavior is identical for mock and 'real' results with equal maps."""
    from scproof.runner import BackendKind, ExecutionResult, Status, TestOutcome, run_mock
    from scproof.templates import load_templates
    from scproof.verdict import ExecutedDefect, finalize, load_verdict_tables
    from conftest import load_fixture_ir
    from scproof.detectors import run_detectors

    ir = load_fixture_ir("complex_fallback", "vulnerable")
    evidence = run_detectors(ir)
    template = load_templates()[DefectKind.COMPLEX_FALLBACK]
    tables = load_verdict_tables()
    per_test = {
        "test_proveTransferWorks": TestOutcome(Status.PASS),
        "test_proveTransferDoesNotWorkWithLimitedGas": TestOutcome(Status.PASS),
    }
    mock_result = run_mock(per_test, log_dir=tmp_path)
    forge_like = ExecutionResult(
        backend=BackendKind.FORGE,
        per_test=per_test,
        raw_log_path=mock_result.raw_log_path,
        wall_time=1.23,
        exit_status=0,
    )
    outcomes = []
    for result in (mock_result, forge_like):
        findings = finalize(
            ir,
            evidence,
            {
                DefectKind.COMPLEX_FALLBACK: ExecutedDefect(
                    result=result, table=tables["complex-fallback-v1"], roles=template.roles
                )
            },
        )
        outcomes.append([(f.defect_kind, f.verdict, f.confidence) for f in findings])
    assert outcomes[0] == outcomes[1]


# --- CLI surface -------------------------------------------------------------------------


def test_cli_run_json_output(tmp_path, capsys):
    mock = write_mock_script(tmp_path, FALLBACK_BOTH_PASS)
    out_file = tmp_path / "report.json"
    code = cli_main(
        [
            "run",
            str(snapshot_path("complex_fallback", "vulnerable")),
            "--offline",
            "--backend",
            "mock",
            "--no-compile-check",
            "--mock-script",
            mock,
            "--workdir",
            str(tmp_path / "w"),
            "--stub-dir",
            str(STUBS),
            "--format",
            "json",
            "--out",
            str(out_file),
        ]
    )
    assert code == 2
    report = parse_report(out_file.read_bytes())
    assert report.schema_version == "1"
    assert any(f.verdict is VerdictKind.PROVEN_VULNERABLE for f in report.findings)


def test_cli_detect_text_output(tmp_path, capsys):
    code = cli_main(
        [
            "detect",
            str(snapshot_path("access_control", "vulnerable")),
            "--workdir",
            str(tmp_path / "w"),
        ]
    )
    captured = capsys.readouterr()
    assert code == 1
    assert "AccessControl: suspected" in captured.out


def test_cli_scan_is_run_alias(tmp_path):
    mock = write_mock_script(tmp_path, FALLBACK_BOTH_PASS)
    code = cli_main(
        [
            "scan",
            str(snapshot_path("complex_fallback", "vulnerable")),
            "--offline",
            "--backend",
            "mock",
            "--no-compile-check",
            "--mock-script",
            mock,
            "--workdir",
            str(tmp_path / "w"),
        ]
    )
    assert code == 2


def test_cli_nonempty_workdir_needs_force(tmp_path, capsys):
    workdir = tmp_path / "w"
    workdir.mkdir()
    (workdir / "leftover.txt").write_text("x")
    mock = write_mock_script(tmp_path, FALLBACK_BOTH_PASS)
    common = [
        "run",
        str(snapshot_path("complex_fallback", "vulnerable")),
        "--offline",
        "--backend",
        "mock",
        "--no-compile-check",
        "--mock-script",
        mock,
        "--workdir",
        str(workdir),
        "--stub-dir",
        str(STUBS),
    ]
    assert cli_main(common) == 3
    assert "workdir not empty" in capsys.readouterr().err
    assert cli_main(common + ["--force"]) == 2


def test_cli_config_error_exits_3(tmp_path, capsys):
    code = cli_main(
        [
            "detect",
            str(snapshot_path("reentrancy", "vulnerable")),
            "--defects",
            "NotAKind",
            "--workdir",
            str(tmp_path / "w"),
        ]
    )
    assert code == 3
    assert "error:" in capsys.readouterr().err
