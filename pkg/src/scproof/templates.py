"""Stage 2: select the per-defect test template, fill it, validate the result.

Templates are Solidity files whose instruction comments double as slot
anchors.  Deterministic slots (contract type, import path, constructor call)
are substituted in-process and their anchors consumed; llm slots keep their
anchors byte-identical so the model sees the instructions.  The registry is
loaded from a directory of ``<kind>/{template.sol, helper_*.sol, manifest}``
entries; manifests use the flat key/value format.
"""

from __future__ import annotations

import json
import logging
import re
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .detectors import DefectEvidence, DefectKind
from .errors import (
    AnchorMissing,
    CompilerNotFound,
    EmptyReply,
    InvalidContractName,
    NoTemplateForKind,
)
from .kvdoc import as_list, load_kv

logger = logging.getLogger(__name__)

PLACEHOLDER = "ContractUnderTest"
UNRESOLVED = "<unresolved>"

DEFAULT_TEMPLATE_DIR = Path(__file__).parent / "data" / "templates"

DEFECT_DESCRIPTIONS = {
    DefectKind.REENTRANCY: (
        "an external call lets the callee re-enter the calling function "
        "before its state is updated, enabling repeated withdrawals"
    ),
    DefectKind.COMPLEX_FALLBACK: (
        "the contract's plain-transfer callback performs gas-expensive work, "
        "so send/transfer payments carrying only the 2300 gas stipend always revert"
    ),
    DefectKind.ACCESS_CONTROL: (
        "a function performing a critical operation is callable by any "
        "address because no msg.sender-based guard protects it"
    ),
    DefectKind.BLOCK_ENV_DEPENDENCY: (
        "contract logic depends on block environment values that block "
        "producers can influence"
    ),
    DefectKind.INSUFFICIENT_PARAM_VALIDATION: (
        "a parameter reaches a sensitive operation without prior validation"
    ),
    DefectKind.FAULTY_ASSERT_REVERT: (
        "a guard condition is vacuous, unsatisfiable, or misuses assert on "
        "external input"
    ),
    DefectKind.DIVISION_BY_ZERO: (
        "a division or modulo denominator can be zero at runtime, causing an "
        "arithmetic panic"
    ),
}

_IDENTIFIER_RE = re.compile(r"^[A-Za-z_$][A-Za-z0-9_$]*$")
_CODE_BLOCK_RE = re.compile(r"```[A-Za-z]*[ \t]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class SlotSpec:
    name: str
    fill_mode: str  # deterministic | llm
    anchor: str
    description: str


@dataclass
class TestTemplate:
    __test__ = False  # not a pytest class

    defect_kind: DefectKind
    template_id: str
    source_text: str
    slots: list[SlotSpec]
    expected_test_methods: list[tuple[str, str]]  # (method name, role tag)
    backend_preference: str  # forge | kontrol | either
    verdict_table_id: str
    helpers: list[tuple[str, str]] = field(default_factory=list)  # (file name, text)

    @property
    def method_names(self) -> list[str]:
        return [name for name, _ in self.expected_test_methods]

    @property
    def roles(self) -> dict[str, str]:
        return dict(self.expected_test_methods)

    def llm_slots(self) -> list[SlotSpec]:
        return [s for s in self.slots if s.fill_mode == "llm"]

    def deterministic_slots(self) -> list[SlotSpec]:
        return [s for s in self.slots if s.fill_mode == "deterministic"]


@dataclass
class TestSuiteSpec:
    __test__ = False  # not a pytest class

    defect_kind: DefectKind
    template_id: str
    contract_name: str
    import_path: str
    constructor_args: list[str]
    helper_contracts_needed: list[str]
    evidence: DefectEvidence
    contract_source: str = ""
    constructor_params: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class GeneratedSuite:
    spec: TestSuiteSpec
    test_source: str
    helpers: list[tuple[str, str]] = field(default_factory=list)
    fill_provenance: dict[str, str] = field(default_factory=dict)
    compiled_ok: bool = False
    diagnostics: list[str] = field(default_factory=list)


# --- registry ---------------------------------------------------------------


def load_templates(template_dir: str | Path | None = None) -> dict[DefectKind, TestTemplate]:
    """Load and sanity-check every template under the directory."""
    template_dir = Path(template_dir) if template_dir else DEFAULT_TEMPLATE_DIR
    registry: dict[DefectKind, TestTemplate] = {}
    for manifest_path in sorted(template_dir.glob("*/manifest")):
        template = _load_one(manifest_path)
        registry[template.defect_kind] = template
    return registry


def _load_one(manifest_path: Path) -> TestTemplate:
    doc = load_kv(manifest_path)
    directory = manifest_path.parent
    source_text = (directory / "template.sol").read_text(encoding="utf-8")
    helpers = [
        (name, (directory / name).read_text(encoding="utf-8"))
        for name in as_list(doc.top.get("helpers", ""))
    ]
    template = TestTemplate(
        defect_kind=DefectKind(doc.top["defect_kind"]),
        template_id=doc.top["template_id"],
        source_text=source_text,
        slots=[
            SlotSpec(
                name=body["name"],
                fill_mode=body["mode"],
                anchor=body["anchor"],
                description=body.get("description", ""),
            )
            for body in doc.sections("slot")
        ],
        expected_test_methods=[
            (body["name"], body["role"]) for body in doc.sections("method")
        ],
        backend_preference=doc.top.get("backend", "either"),
        verdict_table_id=doc.top["verdict_table"],
        helpers=helpers,
    )
    _validate_template(template)
    return template


def _validate_template(template: TestTemplate) -> None:
    for name in template.method_names:
        if name not in template.source_text:
            raise AnchorMissing(f"method {name} of {template.template_id}")
    for slot in template.slots:
        if slot.anchor not in template.source_text and not any(
            slot.anchor in text for _, text in template.helpers
        ):
            raise AnchorMissing(slot.name)
        if slot.fill_mode == "llm" and PLACEHOLDER in slot.anchor:
            raise AnchorMissing(f"{slot.name} (llm anchor must not contain {PLACEHOLDER})")


def select_template(
    evidence: DefectEvidence, registry: dict[DefectKind, TestTemplate]
) -> TestTemplate:
    """The unique template for the evidence kind; Stage-1-only kinds have none."""
    template = registry.get(evidence.kind)
    if template is None:
        raise NoTemplateForKind(evidence.kind)
    return template


# --- deterministic fill ------------------------------------------------------


def deterministic_constructor_args(params: list[tuple[str, str]]) -> list[str]:
    """Zero values and fresh addresses for a constructor call, by type."""
    args = []
    for name, type_string in params:
        base = type_string.split(" ")[0]
        if base.startswith(("uint", "int")):
            args.append("0")
        elif base == "bool":
            args.append("false")
        elif base == "address":
            args.append(f'makeAddr("{name or "ctor"}")')
        elif base in ("string", "bytes"):
            args.append('""')
        else:
            args.append(UNRESOLVED)
    return args


def fill_deterministic(template: TestTemplate, spec: TestSuiteSpec) -> str:
    """Substitute every deterministic slot in the test source; llm anchors stay."""
    _check_contract_name(spec.contract_name)
    return _fill_text(template.source_text, template, spec)


def fill_helpers(template: TestTemplate, spec: TestSuiteSpec) -> list[tuple[str, str]]:
    _check_contract_name(spec.contract_name)
    return [(name, _fill_text(text, template, spec)) for name, text in template.helpers]


def _check_contract_name(name: str) -> None:
    if not _IDENTIFIER_RE.match(name):
        raise InvalidContractName(f"not a Solidity identifier: {name!r}")
    if PLACEHOLDER in name and name != PLACEHOLDER:
        raise InvalidContractName(f"name embeds the placeholder token: {name!r}")


def _fill_text(text: str, template: TestTemplate, spec: TestSuiteSpec) -> str:
    # consume deterministic anchors (their instructions are fulfilled here);
    # absent anchors mean the text is already filled, which keeps fill idempotent
    det_anchors = {slot.anchor for slot in template.deterministic_slots()}
    lines = [line for line in text.splitlines() if line.strip() not in det_anchors]
    filled = "\n".join(lines)
    if text.endswith("\n"):
        filled += "\n"
    filled = filled.replace(PLACEHOLDER, spec.contract_name)
    filled = _apply_constructor_args(filled, spec)
    return filled


def _apply_constructor_args(text: str, spec: TestSuiteSpec) -> str:
    args = [a for a in spec.constructor_args]
    if not args or UNRESOLVED in args:
        return text
    pattern = re.compile(rf"new\s+{re.escape(spec.contract_name)}\s*\(\s*\)")
    return pattern.sub(f"new {spec.contract_name}({', '.join(args)})", text, count=1)


# --- prompting ----------------------------------------------------------------


def build_prompt(template: TestTemplate, spec: TestSuiteSpec, partially_filled: str):
    """Assemble the generation prompt: defect, source, evidence, constructor,
    then the partially filled template."""
    from .llm import PromptBundle

    evidence_lines = [
        f"- {site.function}: {site.detail or site.tag} (statement {site.statement_index})"
        for site in spec.evidence.sites
    ]
    constructor = _constructor_signature(spec)
    user = "\n".join(
        [
            f"Defect under investigation: {spec.defect_kind.value}: "
            f"{DEFECT_DESCRIPTIONS[spec.defect_kind]}.",
            "",
            f"Contract under analysis ({spec.contract_name}):",
            "```solidity",
            spec.contract_source.rstrip("\n"),
            "```",
            "",
            "Static findings:",
            *evidence_lines,
            "",
            f"Constructor signature: {constructor}",
            "",
            "Test template; instruction comments mark the code to complete:",
            "```solidity",
            partially_filled.rstrip("\n"),
            "```",
        ]
    )
    system = (
        "You complete Solidity proof tests from annotated templates. "
        "Keep every test method name exactly as given. "
        "Reply with exactly one Solidity code block, no prose."
    )
    return PromptBundle(
        system=system,
        user=user,
        metadata={"defect_kind": spec.defect_kind.value, "contract": spec.contract_name},
    )


def _constructor_signature(spec: TestSuiteSpec) -> str:
    if spec.constructor_params:
        inner = ", ".join(f"{t} {n}" for n, t in spec.constructor_params)
        return f"constructor({inner})"
    return "constructor()"


# --- llm reply handling ---------------------------------------------------------


def extract_code(llm_reply: str) -> str:
    """First fenced code block; with no fence, the whole reply trimmed."""
    if not llm_reply or not llm_reply.strip():
        raise EmptyReply("empty LLM reply")
    blocks = _CODE_BLOCK_RE.findall(llm_reply)
    if not blocks:
        return llm_reply.strip()
    if len(blocks) > 1:
        logger.warning("LLM reply contained %d code blocks; using the first", len(blocks))
    code = blocks[0].strip()
    if not code:
        raise EmptyReply("first code block is empty")
    return code


# --- validation ------------------------------------------------------------------


def validate_structural(source: str, template: TestTemplate) -> tuple[bool, list[str]]:
    """Cheap structural checks used when compile validation is disabled."""
    diagnostics = []
    for name in template.method_names:
        if not re.search(rf"function\s+{re.escape(name)}\s*\(", source):
            diagnostics.append(f"expected test method missing: {name}")
    if "contract " not in source:
        diagnostics.append("no contract definition found")
    if "pragma solidity" not in source:
        diagnostics.append("missing solidity pragma")
    for open_char, close_char in (("{", "}"), ("(", ")")):
        if source.count(open_char) != source.count(close_char):
            diagnostics.append(f"unbalanced {open_char}{close_char}")
    return (not diagnostics, diagnostics)


def validate_suite(
    source: str,
    project_dir: str | Path,
    test_file_name: str = "Suite.t.sol",
    solc_path: str = "solc",
) -> tuple[bool, list[str]]:
    """Compile the test source against the materialized project layout."""
    solc = shutil.which(solc_path)
    if solc is None:
        raise CompilerNotFound(f"solc executable not found: {solc_path}")
    project_dir = Path(project_dir)
    sources = {}
    for sol in sorted(project_dir.rglob("*.sol")):
        rel = sol.relative_to(project_dir).as_posix()
        sources[rel] = {"content": sol.read_text(encoding="utf-8")}
    sources[f"test/{test_file_name}"] = {"content": source}
    request = {
        "language": "Solidity",
        "sources": sources,
        "settings": {
            "remappings": ["forge-std/=lib/forge-std/src/"],
            "outputSelection": {"*": {"*": []}},
        },
    }
    proc = subprocess.run(
        [solc, "--standard-json"], input=json.dumps(request), capture_output=True, text=True
    )
    try:
        output = json.loads(proc.stdout)
    except json.JSONDecodeError:
        return False, [proc.stderr.strip() or "compiler produced no JSON output"]
    errors = [
        e.get("formattedMessage", e.get("message", ""))
        for e in output.get("errors", [])
        if e.get("severity") == "error"
    ]
    return (not errors, errors)
