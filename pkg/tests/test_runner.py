"""Backend invocation, report parsing, project materialization."""

from __future__ import annotations

import json
import os
import stat

import pytest

from scproof.errors import BackendNotFound, JsonMalformed, LayoutConflict, OutputUnparseable
from scproof.runner import (
    BackendKind,
    Status,
    TestOutcome,
    materialize_project,
    parse_forge_json,
    parse_kontrol_log,
    run_forge,
    run_kontrol,
    run_mock,
)

from conftest import GOLDEN

LABELS = json.loads((GOLDEN / "labels.json").read_text(encoding="utf-8"))


# --- forge JSON parsing ---------------------------------------------------------


@pytest.mark.parametrize(
    "golden", ["forge_two_pass.json", "forge_mixed.json", "forge_duplicate_names.json"]
)
def test_parse_forge_json_matches_hand_labels(golden):
    outcomes = parse_forge_json((GOLDEN / golden).read_text(encoding="utf-8"))
    assert {m: o.status.value for m, o in outcomes.items()} == LABELS[golden]


def test_parse_forge_json_preserves_failure_reason():
    outcomes = parse_forge_json((GOLDEN / "forge_mixed.json").read_text(encoding="utf-8"))
    assert outcomes["test_proofReentrancyExploit"].detail == "next call did not revert as expected"
    assert outcomes["test_setupSanity"].status is Status.ERROR
    assert outcomes["test_setupSanity"].detail == "Skipped"


def test_parse_forge_json_empty_object():
    assert parse_forge_json("{}") == {}


def test_parse_forge_json_malformed():
    with pytest.raises(JsonMalformed):
        parse_forge_json("not json at all")
    with pytest.raises(JsonMalformed):
        parse_forge_json('{"suite": {"test_results": "nope"}}')
    with pytest.raises(JsonMalformed):
        parse_forge_json('["list"]')


# --- kontrol parsing --------------------------------------------------------------


@pytest.mark.parametrize("golden", ["kontrol_pass.txt", "kontrol_fail.txt", "kontrol_mixed.txt"])
def test_parse_kontrol_log_matches_hand_labels(golden):
    outcomes = parse_kontrol_log((GOLDEN / golden).read_text(encoding="utf-8"))
    assert {m: o.status.value for m, o in outcomes.items()} == LABELS[golden]


def test_parse_kontrol_log_bare_method_name():
    outcomes = parse_kontrol_log("PROOF test_accessControl FAILED\n")
    assert outcomes == {"test_accessControl": TestOutcome(Status.FAIL, "counterexample found")}


def test_parse_kontrol_log_unparseable():
    with pytest.raises(OutputUnparseable):
        parse_kontrol_log("no proofs to be found here")


# --- mock backend ------------------------------------------------------------------


def test_run_mock_identity(tmp_path):
    result = run_mock({"a": "pass", "b": TestOutcome(Status.FAIL, "boom")}, log_dir=tmp_path)
    assert result.backend is BackendKind.MOCK
    assert result.per_test["a"] == TestOutcome(Status.PASS)
    assert result.per_test["b"].detail == "boom"
    log = tmp_path / os.path.basename(result.raw_log_path)
    assert log.is_file() and "MOCK a pass" in log.read_text()


def test_run_mock_empty_script(tmp_path):
    result = run_mock({}, log_dir=tmp_path)
    assert result.per_test == {}
    assert result.exit_status == 0


# --- materialization ----------------------------------------------------------------


class _FakeSpec:
    contract_name = "ComplexFallback"


class _FakeSuite:
    spec = _FakeSpec()
    test_source = "// test contract here\n"


def test_materialize_layout(tmp_path):
    project = materialize_project(
        "// contract source\n",
        _FakeSuite(),
        [("helper_Attacker.sol", "// attacker\n")],
        tmp_path / "proj",
        fuzz_runs=64,
        solc_version="0.8.29",
    )
    assert (project / "src" / "ComplexFallback.sol").read_text() == "// contract source\n"
    assert (project / "test" / "ComplexFallbackTest.sol").read_text() == "// test contract here\n"
    assert (project / "test" / "Attacker.sol").read_text() == "// attacker\n"
    assert (project / "lib" / "forge-std" / "src" / "Test.sol").is_file()
    toml = (project / "foundry.toml").read_text()
    assert 'solc_version = "0.8.29"' in toml
    assert "fuzz = { runs = 64 }" in toml
    assert 'remappings = ["forge-std/=lib/forge-std/src/"]' in toml


def test_materialize_refuses_nonempty_workdir(tmp_path):
    target = tmp_path / "proj"
    target.mkdir()
    (target / "junk.txt").write_text("x")
    with pytest.raises(LayoutConflict):
        materialize_project("src", _FakeSuite(), [], target)
    # force overrides
    materialize_project("src", _FakeSuite(), [], target, force=True)
    assert (target / "foundry.toml").is_file()


# --- backend process handling ---------------------------------------------------------


def fake_exe(tmp_path, name: str, script: str) -> str:
    path = tmp_path / name
    path.write_text("#!/bin/sh\n" + script)
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


def test_run_forge_missing_executable(tmp_path):
    with pytest.raises(BackendNotFound):
        run_forge(tmp_path, "XTest", forge_path=str(tmp_path / "definitely-not-forge"))


def test_run_forge_parses_fake_backend_output(tmp_path):
    golden = GOLDEN / "forge_two_pass.json"
    exe = fake_exe(
        tmp_path,
        "fake-forge",
        f'echo "Compiling 3 files"\ncat "{golden}"\necho "warp speed" >&2\nexit 0\n',
    )
    project = tmp_path / "proj"
    project.mkdir()
    result = run_forge(
        project,
        "ComplexFallbackTest",
        forge_path=exe,
        expected_methods=[
            "test_proveTransferWorks",
            "test_proveTransferDoesNotWorkWithLimitedGas",
        ],
    )
    assert result.backend is BackendKind.FORGE
    assert {m: o.status.value for m, o in result.per_test.items()} == LABELS["forge_two_pass.json"]
    # log fidelity: stdout+stderr persisted byte-for-byte
    log_text = open(result.raw_log_path).read()
    assert "Compiling 3 files" in log_text
    assert "warp speed" in log_text
    assert golden.read_text() .strip() in log_text


def test_run_forge_timeout_yields_error_outcomes(tmp_path):
    exe = fake_exe(tmp_path, "slow-forge", "sleep 5\n")
    project = tmp_path / "proj"
    project.mkdir()
    result = run_forge(
        project, "XTest", timeout=0.2, forge_path=exe, expected_methods=["test_a", "test_b"]
    )
    assert result.exit_status == -1
    assert all(o.status is Status.ERROR for o in result.per_test.values())
    assert set(result.per_test) == {"test_a", "test_b"}


def test_run_forge_unparseable_without_normalizer(tmp_path):
    exe = fake_exe(tmp_path, "weird-forge", 'echo "absolute garbage"\n')
    project = tmp_path / "proj"
    project.mkdir()
    result = run_forge(project, "XTest", forge_path=exe, expected_methods=["test_a"])
    assert result.per_test["test_a"].status is Status.ERROR
    assert "unparseable" in result.per_test["test_a"].detail


def test_run_forge_unparseable_with_normalizer_fallback(tmp_path):
    exe = fake_exe(tmp_path, "weird-forge", 'echo "test_a exploded midway"\n')
    project = tmp_path / "proj"
    project.mkdir()
    result = run_forge(
        project,
        "XTest",
        forge_path=exe,
        expected_methods=["test_a"],
        normalizer=lambda raw: {"test_a": "fail"},
    )
    assert result.per_test["test_a"] == TestOutcome(Status.FAIL)


def test_run_forge_missing_method_marked_error(tmp_path):
    golden = GOLDEN / "forge_two_pass.json"
    exe = fake_exe(tmp_path, "fake-forge", f'cat "{golden}"\n')
    project = tmp_path / "proj"
    project.mkdir()
    result = run_forge(
        project, "T", forge_path=exe, expected_methods=["test_proveTransferWorks", "test_ghost"]
    )
    assert result.per_test["test_ghost"].status is Status.ERROR


def test_run_kontrol_build_then_prove(tmp_path):
    golden = GOLDEN / "kontrol_fail.txt"
    exe = fake_exe(
        tmp_path,
        "fake-kontrol",
        f'if [ "$1" = "build" ]; then echo built; exit 0; fi\ncat "{golden}"\nexit 1\n',
    )
    project = tmp_path / "proj"
    project.mkdir()
    result = run_kontrol(
        project, "test_accessControl", kontrol_path=exe, expected_methods=["test_accessControl"]
    )
    assert result.backend is BackendKind.KONTROL
    assert result.per_test["test_accessControl"].status is Status.FAIL


def test_run_kontrol_build_failure(tmp_path):
    exe = fake_exe(tmp_path, "fake-kontrol", 'echo "kompilation error" >&2\nexit 2\n')
    project = tmp_path / "proj"
    project.mkdir()
    result = run_kontrol(project, "t", kontrol_path=exe, expected_methods=["test_x"])
    assert result.per_test["test_x"].status is Status.ERROR
    assert result.exit_status == 2
