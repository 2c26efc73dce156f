"""Stage 3: materialize a Foundry-style project and run a backend on it.

Backends: forge (concrete/fuzz), kontrol (symbolic), and a scripted mock for
hermetic pipeline tests.  Every run persists the backend's raw stdout+stderr
byte-for-byte next to the project and parses per-test outcomes out of it;
a timed-out or unparseable run still yields an ExecutionResult (error
outcomes), never a hang or a crash.
"""

from __future__ import annotations

import json
import re
import shutil
import subprocess
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import BackendNotFound, JsonMalformed, LayoutConflict, OutputUnparseable

DEFAULT_TESTLIB = Path(__file__).parent / "data" / "testlib" / "Test.sol"

# e.g. "PROOF UnprotectedSelfdestructTest.test_accessControl(address) FAILED"
KONTROL_PROOF_RE = re.compile(
    r"PROOF\s+(?P<name>[A-Za-z0-9_.$]+(?:\([^)]*\))?)\s+(?P<status>PASSED|FAILED)"
)


class BackendKind(str, Enum):
    FORGE = "forge"
    KONTROL = "kontrol"
    MOCK = "mock"


class Status(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    ERROR = "error"


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False  # not a pytest class

    status: Status
    detail: str | None = None


@dataclass
class ExecutionResult:
    backend: BackendKind
    per_test: dict[str, TestOutcome]
    raw_log_path: str
    wall_time: float
    exit_status: int


# --- project materialization -------------------------------------------------


def materialize_project(
    contract_source: str,
    suite,
    helpers: list[tuple[str, str]],
    workdir: str | Path,
    force: bool = False,
    solc_version: str = "0.8.29",
    fuzz_runs: int = 256,
    forge_std_path: str | Path | None = None,
) -> Path:
    """Standard Foundry layout: src/<C>.sol, test/<C>Test.sol, helpers beside
    the test, pinned foundry.toml, and the test library under lib/."""
    workdir = Path(workdir)
    if workdir.exists() and any(workdir.iterdir()) and not force:
        raise LayoutConflict(f"workdir not empty: {workdir} (use force)")
    contract = suite.spec.contract_name
    (workdir / "src").mkdir(parents=True, exist_ok=True)
    (workdir / "test").mkdir(parents=True, exist_ok=True)
    (workdir / "src" / f"{contract}.sol").write_text(contract_source, encoding="utf-8")
    (workdir / "test" / f"{contract}Test.sol").write_text(suite.test_source, encoding="utf-8")
    for name, text in helpers:
        file_name = name.removeprefix("helper_")
        (workdir / "test" / file_name).write_text(text, encoding="utf-8")
    (workdir / "foundry.toml").write_text(
        "\n".join(
            [
                "[profile.default]",
                'src = "src"',
                'test = "test"',
                'libs = ["lib"]',
                f'solc_version = "{solc_version}"',
                f"fuzz = {{ runs = {fuzz_runs} }}",
                'remappings = ["forge-std/=lib/forge-std/src/"]',
                "",
            ]
        ),
        encoding="utf-8",
    )
    lib_dir = workdir / "lib" / "forge-std" / "src"
    lib_dir.mkdir(parents=True, exist_ok=True)
    if forge_std_path:
        src = Path(forge_std_path)
        if src.is_dir():
            shutil.copytree(src, workdir / "lib" / "forge-std", dirs_exist_ok=True)
        else:
            shutil.copy(src, lib_dir / "Test.sol")
    else:
        shutil.copy(DEFAULT_TESTLIB, lib_dir / "Test.sol")
    return workdir


# --- forge ---------------------------------------------------------------------


def run_forge(
    project_dir: str | Path,
    match_contract: str,
    timeout: float = 600.0,
    forge_path: str = "forge",
    expected_methods: list[str] | None = None,
    normalizer=None,
) -> ExecutionResult:
    """forge test with the JSON report; nonzero exit is still parsed."""
    forge = shutil.which(forge_path)
    if forge is None:
        raise BackendNotFound(f"forge executable not found: {forge_path}")
    command = [forge, "test", "--match-contract", match_contract, "--json"]
    return _run_backend(
        BackendKind.FORGE,
        command,
        Path(project_dir),
        timeout,
        _parse_forge_stdout,
        expected_methods or [],
        normalizer,
    )


def parse_forge_json(raw: str) -> dict[str, TestOutcome]:
    """Per-test outcomes from forge's JSON report.

    Statuses map Success -> pass and Failure -> fail; anything else becomes an
    error outcome carrying the raw status. Duplicate test names across suites
    are disambiguated by prefixing the suite name.
    """
    try:
        report = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise JsonMalformed(f"$ ({exc.msg})")
    if not isinstance(report, dict):
        raise JsonMalformed("$ (expected object)")
    outcomes: dict[str, TestOutcome] = {}
    for suite_key, suite in report.items():
        if not isinstance(suite, dict):
            raise JsonMalformed(suite_key)
        results = suite.get("test_results", {})
        if not isinstance(results, dict):
            raise JsonMalformed(f"{suite_key}.test_results")
        suite_name = suite_key.rsplit(":", 1)[-1]
        for test_key, entry in results.items():
            if not isinstance(entry, dict):
                raise JsonMalformed(f"{suite_key}.test_results.{test_key}")
            method = test_key.split("(")[0]
            status = entry.get("status", "")
            if status == "Success":
                outcome = TestOutcome(Status.PASS)
            elif status == "Failure":
                outcome = TestOutcome(Status.FAIL, detail=entry.get("reason") or None)
            else:
                outcome = TestOutcome(Status.ERROR, detail=str(status))
            if method in outcomes:
                method = f"{suite_name}.{method}"
            outcomes[method] = outcome
    return outcomes


def _parse_forge_stdout(raw: str) -> dict[str, TestOutcome]:
    # compilation chatter may precede the JSON object
    candidate = raw[raw.find("{") :] if "{" in raw else raw
    return parse_forge_json(candidate)


# --- kontrol ---------------------------------------------------------------------


def run_kontrol(
    project_dir: str | Path,
    match_test: str,
    timeout: float = 3600.0,
    kontrol_path: str = "kontrol",
    expected_methods: list[str] | None = None,
    normalizer=None,
) -> ExecutionResult:
    """kontrol build + prove; proof summary lines carry the outcomes."""
    kontrol = shutil.which(kontrol_path)
    if kontrol is None:
        raise BackendNotFound(f"kontrol executable not found: {kontrol_path}")
    project_dir = Path(project_dir)
    build = subprocess.run(
        [kontrol, "build"], cwd=project_dir, capture_output=True, text=True, timeout=timeout
    )
    if build.returncode != 0:
        log_path = _write_log(project_dir, BackendKind.KONTROL, build.stdout, build.stderr)
        return ExecutionResult(
            backend=BackendKind.KONTROL,
            per_test=_all_error(expected_methods or [], "kontrol build failed"),
            raw_log_path=str(log_path),
            wall_time=0.0,
            exit_status=build.returncode,
        )
    command = [kontrol, "prove", "--match-test", match_test]
    return _run_backend(
        BackendKind.KONTROL,
        command,
        project_dir,
        timeout,
        parse_kontrol_log,
        expected_methods or [],
        normalizer,
    )


def parse_kontrol_log(raw: str) -> dict[str, TestOutcome]:
    """Regex-first parse of kontrol's plain-text proof summary."""
    outcomes: dict[str, TestOutcome] = {}
    for match in KONTROL_PROOF_RE.finditer(raw):
        name = match.group("name")
        method = name.split("(")[0].split(".")[-1]
        status = Status.PASS if match.group("status") == "PASSED" else Status.FAIL
        detail = None if status is Status.PASS else "counterexample found"
        outcomes[method] = TestOutcome(status, detail)
    if not outcomes:
        raise OutputUnparseable("no proof summary lines found")
    return outcomes


# --- mock -----------------------------------------------------------------------


def run_mock(
    script: dict[str, TestOutcome | str], log_dir: str | Path | None = None
) -> ExecutionResult:
    """Echo a scripted outcome map; used for hermetic pipeline tests."""
    per_test = {
        name: outcome if isinstance(outcome, TestOutcome) else TestOutcome(Status(outcome))
        for name, outcome in script.items()
    }
    log_lines = [f"MOCK {name} {outcome.status.value}" for name, outcome in per_test.items()]
    log_dir = Path(log_dir) if log_dir else Path.cwd()
    log_dir.mkdir(parents=True, exist_ok=True)
    log_path = log_dir / f"mock-{int(time.time() * 1000)}-{len(per_test)}.log"
    log_path.write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    return ExecutionResult(
        backend=BackendKind.MOCK,
        per_test=per_test,
        raw_log_path=str(log_path),
        wall_time=0.0,
        exit_status=0,
    )


# --- shared runner plumbing -------------------------------------------------------


def _run_backend(
    backend: BackendKind,
    command: list[str],
    project_dir: Path,
    timeout: float,
    parser,
    expected_methods: list[str],
    normalizer,
) -> ExecutionResult:
    started = time.monotonic()
    try:
        proc = subprocess.run(
            command, cwd=project_dir, capture_output=True, text=True, timeout=timeout
        )
        stdout, stderr, exit_status = proc.stdout, proc.stderr, proc.returncode
        timed_out = False
    except subprocess.TimeoutExpired as exc:
        stdout = _coerce_text(exc.stdout)
        stderr = _coerce_text(exc.stderr)
        exit_status = -1
        timed_out = True
    wall_time = time.monotonic() - started
    log_path = _write_log(project_dir, backend, stdout, stderr)

    if timed_out:
        detail = "proof-timeout" if backend is BackendKind.KONTROL else "timeout"
        per_test = _all_error(expected_methods, detail)
    else:
        try:
            per_test = parser(stdout)
        except (OutputUnparseable, JsonMalformed) as exc:
            per_test = _try_normalizer(normalizer, stdout + "\n" + stderr, exc, expected_methods)
        for method in expected_methods:
            per_test.setdefault(method, TestOutcome(Status.ERROR, "not observed in backend output"))
    return ExecutionResult(
        backend=backend,
        per_test=per_test,
        raw_log_path=str(log_path),
        wall_time=wall_time,
        exit_status=exit_status,
    )


def _try_normalizer(normalizer, raw, original_error, expected_methods) -> dict[str, TestOutcome]:
    if normalizer is None:
        return _all_error(expected_methods, f"unparseable output: {original_error}")
    try:
        normalized = normalizer(raw)
    except Exception as exc:  # fallback of a fallback: degrade to error outcomes
        return _all_error(expected_methods, f"normalization failed: {exc}")
    return {name: TestOutcome(Status(status)) for name, status in normalized.items()}


def _all_error(expected_methods: list[str], detail: str) -> dict[str, TestOutcome]:
    return {m: TestOutcome(Status.ERROR, detail) for m in expected_methods}


def _write_log(project_dir: Path, backend: BackendKind, stdout: str, stderr: str) -> Path:
    # raw log is the byte-for-byte backend output; no trimming
    log_path = project_dir / f"{backend.value}-run.log"
    log_path.write_text((stdout or "") + (stderr or ""), encoding="utf-8")
    return log_path


def _coerce_text(data) -> str:
    if data is None:
        return ""
    if isinstance(data, bytes):
        return data.decode("utf-8", errors="replace")
    return data
