"""End-to-end orchestration of the three stages over a set of sources.

``cmd_detect`` stops after Stage 1 (findings are clean or suspected, never
proven).  ``cmd_gen_tests`` adds Stage 2 and leaves compiled suites under the
workdir.  ``cmd_run`` executes the suites on the selected backend and
interprets the outcomes.  Contracts are processed through a bounded worker
pool; each contract's stages run sequentially.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import llm as llm_client
from . import runner as backend_runner
from . import templates as template_engine
from .config import PipelineConfig
from .detectors import DefectEvidence, DefectKind, run_detectors
from .errors import (
    BackendNotFound,
    CompilerNotFound,
    EmptyReply,
    NoStubForKey,
    NoTemplateForKind,
    ScproofError,
)
from .ir import ContractIR, SourceUnit, build_ir, compile_to_ast, load_ast_snapshot
from .report import ScanReport, TOOL_VERSION
from .runner import BackendKind, ExecutionResult, TestOutcome
from .templates import GeneratedSuite, TestSuiteSpec, TestTemplate
from .verdict import (
    ExecutedDefect,
    FailedDefect,
    StageOneOnly,
    VerdictTable,
    finalize,
    load_verdict_tables,
)

logger = logging.getLogger(__name__)

# auto backend routing per defect kind; kontrol falls back to forge-fuzz
_BACKEND_AUTO = {
    DefectKind.REENTRANCY: BackendKind.FORGE,
    DefectKind.COMPLEX_FALLBACK: BackendKind.FORGE,
    DefectKind.ACCESS_CONTROL: BackendKind.KONTROL,
    DefectKind.INSUFFICIENT_PARAM_VALIDATION: BackendKind.FORGE,
    DefectKind.DIVISION_BY_ZERO: BackendKind.FORGE,
}


@dataclass
class ContractScan:
    unit: SourceUnit
    ir: ContractIR
    evidence: list[DefectEvidence]
    per_defect: dict[DefectKind, object] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)


# --- source collection -------------------------------------------------------


def collect_source_files(paths: list[str | Path]) -> list[Path]:
    files: list[Path] = []
    for path in paths:
        path = Path(path)
        if path.is_dir():
            files.extend(sorted(path.rglob("*.sol")))
            files.extend(sorted(p for p in path.rglob("*.json") if _looks_like_snapshot(p)))
        else:
            files.append(path)
    return files


def _looks_like_snapshot(path: Path) -> bool:
    try:
        head = path.read_text(encoding="utf-8", errors="ignore")[:2048]
    except OSError:
        return False
    return '"sources"' in head and '"ast"' in head


def load_unit(path: Path, config: PipelineConfig) -> SourceUnit:
    if path.suffix == ".json":
        return load_ast_snapshot(path)
    return compile_to_ast(path, solc_path=config.solc_path, version_hint=None)


# --- stage 1 -------------------------------------------------------------------


def stage_detect(unit: SourceUnit, config: PipelineConfig) -> list[ContractScan]:
    scans = []
    for ir in build_ir(unit):
        evidence = run_detectors(ir, config.enabled_defects)
        scans.append(ContractScan(unit=unit, ir=ir, evidence=evidence))
    return scans


# --- stage 2 -------------------------------------------------------------------


def _suite_spec(scan: ContractScan, template: TestTemplate, evidence: DefectEvidence) -> TestSuiteSpec:
    ir = scan.ir
    return TestSuiteSpec(
        defect_kind=evidence.kind,
        template_id=template.template_id,
        contract_name=ir.name,
        import_path=f"src/{ir.name}.sol",
        constructor_args=template_engine.deterministic_constructor_args(ir.constructor_params),
        helper_contracts_needed=[name for name, _ in template.helpers],
        evidence=evidence,
        contract_source=scan.unit.raw_source,
        constructor_params=list(ir.constructor_params),
    )


def generate_suite(
    scan: ContractScan,
    evidence: DefectEvidence,
    template: TestTemplate,
    config: PipelineConfig,
) -> GeneratedSuite | FailedDefect:
    """Fill the template (deterministically, then via the LLM when needed) and
    validate the result; one repair round on compile failure in live mode."""
    spec = _suite_spec(scan, template, evidence)
    partially_filled = template_engine.fill_deterministic(template, spec)
    helpers = template_engine.fill_helpers(template, spec)
    provenance = {slot.name: "deterministic" for slot in template.deterministic_slots()}

    if template.llm_slots():
        bundle = template_engine.build_prompt(template, spec, partially_filled)
        if config.llm.mode == "offline_stub":
            try:
                reply = llm_client.complete_offline(bundle, config.stub_dir)
            except NoStubForKey as exc:
                return FailedDefect("generation", str(exc))
            source_provenance = "offline_stub"
        elif config.llm.mode == "live":
            try:
                reply = llm_client.complete(config.llm, bundle)
            except ScproofError as exc:
                return FailedDefect("generation", f"llm call failed: {exc}")
            source_provenance = f"llm({config.llm.model_id})"
        else:
            return FailedDefect(
                "generation", "template has llm slots but the llm client is disabled"
            )
        try:
            test_source = template_engine.extract_code(reply)
        except EmptyReply as exc:
            return FailedDefect("generation", str(exc))
        for slot in template.llm_slots():
            provenance[slot.name] = source_provenance
    else:
        test_source = partially_filled

    suite = GeneratedSuite(
        spec=spec, test_source=test_source, helpers=helpers, fill_provenance=provenance
    )
    return _validate_with_retry(suite, template, config, bundle_allowed=template.llm_slots())


def _validate_with_retry(
    suite: GeneratedSuite,
    template: TestTemplate,
    config: PipelineConfig,
    bundle_allowed,
) -> GeneratedSuite:
    """Sets compiled_ok/diagnostics; failed suites are still returned so the
    diagnosed source lands under the workdir."""
    ok, diagnostics = _validate(suite, template, config)
    if not ok and config.llm.mode == "live" and bundle_allowed:
        # one repair round: re-prompt with the compiler diagnostics appended
        repair = template_engine.build_prompt(template, suite.spec, suite.test_source)
        repair.user += "\n\nThe previous attempt failed to compile:\n" + "\n".join(diagnostics)
        try:
            reply = llm_client.complete(config.llm, repair)
            suite.test_source = template_engine.extract_code(reply)
            ok, diagnostics = _validate(suite, template, config)
        except ScproofError as exc:
            ok, diagnostics = False, diagnostics + [f"repair round failed: {exc}"]
    suite.compiled_ok = ok
    suite.diagnostics = [] if ok else diagnostics
    return suite


def _validate(
    suite: GeneratedSuite, template: TestTemplate, config: PipelineConfig
) -> tuple[bool, list[str]]:
    if config.no_compile_check:
        return template_engine.validate_structural(suite.test_source, template)
    with _TempProject(suite, config) as project_dir:
        try:
            return template_engine.validate_suite(
                suite.test_source,
                project_dir,
                test_file_name=f"{suite.spec.contract_name}Test.sol",
                solc_path=config.solc_path,
            )
        except CompilerNotFound as exc:
            return False, [str(exc)]


class _TempProject:
    """Materializes a throwaway project purely for compile validation."""

    def __init__(self, suite: GeneratedSuite, config: PipelineConfig):
        self.suite = suite
        self.config = config

    def __enter__(self) -> Path:
        import tempfile

        self._dir = tempfile.TemporaryDirectory(prefix="scproof-validate-")
        return backend_runner.materialize_project(
            self.suite.spec.contract_source,
            self.suite,
            self.suite.helpers,
            self._dir.name,
            force=True,
            solc_version=self.config.solc_version,
            fuzz_runs=self.config.fuzz_runs,
            forge_std_path=self.config.forge_std_path or None,
        )

    def __exit__(self, *exc_info):
        self._dir.cleanup()


def write_suite(suite: GeneratedSuite, config: PipelineConfig) -> list[str]:
    out_dir = (
        Path(config.workdir)
        / "suites"
        / suite.spec.contract_name
        / _kind_slug(suite.spec.defect_kind)
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    test_path = out_dir / f"{suite.spec.contract_name}Test.sol"
    test_path.write_text(suite.test_source, encoding="utf-8")
    paths.append(str(test_path))
    for name, text in suite.helpers:
        helper_path = out_dir / name.removeprefix("helper_")
        helper_path.write_text(text, encoding="utf-8")
        paths.append(str(helper_path))
    provenance_path = out_dir / "provenance.json"
    provenance_path.write_text(
        json.dumps(
            {
                "template_id": suite.spec.template_id,
                "fill_provenance": suite.fill_provenance,
                "compiled_ok": suite.compiled_ok,
                "validation_mode": "structural" if config.no_compile_check else "compile",
                "diagnostics": suite.diagnostics,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    paths.append(str(provenance_path))
    return paths


def _kind_slug(kind: DefectKind) -> str:
    out = []
    for i, ch in enumerate(kind.value):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


# --- stage 3 -------------------------------------------------------------------


def select_backend(kind: DefectKind, config: PipelineConfig) -> BackendKind:
    if config.backend_mode != "auto":
        return BackendKind(config.backend_mode)
    if config.offline:
        return BackendKind.MOCK
    preferred = _BACKEND_AUTO.get(kind, BackendKind.FORGE)
    if preferred is BackendKind.KONTROL:
        import shutil

        if shutil.which(config.kontrol_path) is None:
            return BackendKind.FORGE
    return preferred


def execute_suite(
    scan: ContractScan,
    suite: GeneratedSuite,
    template: TestTemplate,
    config: PipelineConfig,
) -> ExecutionResult:
    backend = select_backend(suite.spec.defect_kind, config)
    contract = suite.spec.contract_name
    if backend is BackendKind.MOCK:
        script = _mock_script_for(contract, template, config)
        return backend_runner.run_mock(script, log_dir=Path(config.workdir) / "logs")
    project_dir = Path(config.workdir) / "projects" / f"{contract}__{_kind_slug(suite.spec.defect_kind)}"
    backend_runner.materialize_project(
        suite.spec.contract_source,
        suite,
        suite.helpers,
        project_dir,
        force=True,
        solc_version=config.solc_version,
        fuzz_runs=config.fuzz_runs,
        forge_std_path=config.forge_std_path or None,
    )
    normalizer = None
    if config.llm.mode == "live":

        def normalizer(raw):
            return llm_client.normalize_runner_output(config.llm, raw)
    if backend is BackendKind.KONTROL:
        return backend_runner.run_kontrol(
            project_dir,
            match_test="test_",
            kontrol_path=config.kontrol_path,
            expected_methods=template.method_names,
            normalizer=normalizer,
        )
    return backend_runner.run_forge(
        project_dir,
        match_contract=f"{contract}Test",
        forge_path=config.forge_path,
        expected_methods=template.method_names,
        normalizer=normalizer,
    )


def _mock_script_for(
    contract: str, template: TestTemplate, config: PipelineConfig
) -> dict[str, TestOutcome]:
    if not config.mock_script:
        return {
            name: TestOutcome(backend_runner.Status.ERROR, "no mock script configured")
            for name in template.method_names
        }
    raw = json.loads(Path(config.mock_script).read_text(encoding="utf-8"))
    if contract in raw and isinstance(raw[contract], dict):
        raw = raw[contract]
    return {
        name: TestOutcome(backend_runner.Status(raw[name]))
        if name in raw
        else TestOutcome(backend_runner.Status.ERROR, "method absent from mock script")
        for name in template.method_names
    }


# --- full pipeline ---------------------------------------------------------------


@dataclass
class _Stores:
    templates: dict[DefectKind, TestTemplate]
    tables: dict[str, VerdictTable]


def _load_stores(config: PipelineConfig) -> _Stores:
    templates = template_engine.load_templates(config.template_dir or None)
    tables = load_verdict_tables()
    for template in templates.values():
        if template.verdict_table_id not in tables:
            raise ScproofError(
                f"template {template.template_id} references missing verdict table "
                f"{template.verdict_table_id}"
            )
    return _Stores(templates=templates, tables=tables)


def _process_contract(scan: ContractScan, config: PipelineConfig, stores: _Stores, stage: str) -> None:
    for evidence in scan.evidence:
        try:
            template = template_engine.select_template(evidence, stores.templates)
        except NoTemplateForKind:
            scan.per_defect[evidence.kind] = StageOneOnly()
            continue
        outcome = generate_suite(scan, evidence, template, config)
        if isinstance(outcome, FailedDefect):
            scan.per_defect[evidence.kind] = outcome
            continue
        suite = outcome
        scan.artifacts.extend(write_suite(suite, config))
        if not suite.compiled_ok:
            scan.per_defect[evidence.kind] = FailedDefect(
                "generation", "suite does not validate: " + "; ".join(suite.diagnostics[:3])
            )
            continue
        if stage != "run":
            continue
        try:
            result = execute_suite(scan, suite, template, config)
        except (BackendNotFound, OSError) as exc:
            scan.per_defect[evidence.kind] = FailedDefect("execution", str(exc))
            continue
        scan.artifacts.append(result.raw_log_path)
        scan.per_defect[evidence.kind] = ExecutedDefect(
            result=result,
            table=stores.tables[template.verdict_table_id],
            roles=template.roles,
        )


def _scan_paths(paths: list[str | Path], config: PipelineConfig, stage: str) -> ScanReport:
    started = _utc_now()
    files = collect_source_files(paths)
    stores = _load_stores(config) if stage in ("gen", "run") else None

    def scan_file(path: Path) -> list[ContractScan]:
        unit = load_unit(path, config)
        scans = stage_detect(unit, config)
        if stage in ("gen", "run"):
            for scan in scans:
                _process_contract(scan, config, stores, stage)
        return scans

    all_scans: list[ContractScan] = []
    if files:
        with ThreadPoolExecutor(max_workers=config.job_cap) as pool:
            for scans in pool.map(scan_file, files):
                all_scans.extend(scans)

    findings = []
    inputs = []
    artifacts: list[str] = []
    for scan in all_scans:
        inputs.append((scan.unit.path, scan.ir.name))
        findings.extend(
            finalize(scan.ir, scan.evidence, scan.per_defect, config.enabled_defects)
        )
        artifacts.extend(scan.artifacts)

    report = ScanReport(
        tool_version=TOOL_VERSION,
        started_at=started,
        finished_at=_utc_now(),
        inputs=inputs,
        config_digest=config.digest(),
        findings=findings,
        artifacts=artifacts,
    )
    report.sort()
    return report


def cmd_detect(paths: list[str | Path], config: PipelineConfig) -> ScanReport:
    """Stage 1 only: findings are clean or suspected, never proven."""
    return _scan_paths(paths, config, stage="detect")


def cmd_gen_tests(paths: list[str | Path], config: PipelineConfig) -> ScanReport:
    """Stages 1-2: generated suites land under the workdir; partial report."""
    return _scan_paths(paths, config, stage="gen")


def cmd_run(paths: list[str | Path], config: PipelineConfig) -> ScanReport:
    """Full pipeline: detect, generate, execute, interpret."""
    return _scan_paths(paths, config, stage="run")


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
