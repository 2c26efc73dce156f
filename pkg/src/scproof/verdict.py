"""Interpret per-test outcomes into findings via per-defect verdict tables.

Tables are data files (flat key/value format) mapping role->status patterns
to a verdict and confidence; the first matching row wins and an implicit
default row (error verdict) catches everything else, so the tables stay
exhaustive over {pass, fail, error}^roles.  The degraded paths cover evidence
whose proof could not be generated or executed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .detectors import DefectEvidence, DefectKind, KIND_ORDER
from .kvdoc import as_list, load_kv
from .runner import BackendKind, ExecutionResult, Status

DEFAULT_VERDICT_DIR = Path(__file__).parent / "data" / "verdicts"

_STATUSES = tuple(s.value for s in Status)


class VerdictKind(str, Enum):
    PROVEN_VULNERABLE = "proven_vulnerable"
    PROVEN_SAFE_FOR_SCENARIO = "proven_safe_for_scenario"
    SUSPECTED = "suspected"
    CLEAN = "clean"
    ERROR = "error"


class Confidence(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"
    NONE = "none"


CONFIDENCE_ORDER = {
    Confidence.NONE: 0,
    Confidence.LOW: 1,
    Confidence.MEDIUM: 2,
    Confidence.HIGH: 3,
}


@dataclass(frozen=True)
class VerdictRow:
    pattern: dict[str, str]  # role -> required status; absent role = wildcard
    verdict: VerdictKind
    confidence: Confidence
    note: str

    def matches(self, by_role: dict[str, str]) -> bool:
        return all(by_role.get(role) == status for role, status in self.pattern.items())


@dataclass
class VerdictTable:
    id: str
    defect_kind: DefectKind
    roles: list[str]
    rows: list[VerdictRow]
    default_row: tuple[VerdictKind, Confidence] = (VerdictKind.ERROR, Confidence.NONE)

    def validate(self) -> None:
        for row in self.rows:
            unknown = set(row.pattern) - set(self.roles)
            if unknown:
                raise ValueError(f"table {self.id}: pattern uses unknown roles {unknown}")
        for combo in itertools.product(_STATUSES, repeat=len(self.roles)):
            by_role = dict(zip(self.roles, combo))
            matching = [row for row in self.rows if row.matches(by_role)]
            if len(matching) > 1:
                raise ValueError(
                    f"table {self.id}: combination {by_role} matches {len(matching)} rows"
                )


def load_verdict_tables(verdict_dir: str | Path | None = None) -> dict[str, VerdictTable]:
    verdict_dir = Path(verdict_dir) if verdict_dir else DEFAULT_VERDICT_DIR
    tables: dict[str, VerdictTable] = {}
    for path in sorted(verdict_dir.glob("*.verdict")):
        doc = load_kv(path)
        rows = []
        for body in doc.sections("row"):
            pattern = {}
            for item in as_list(body["pattern"]):
                role, status = item.split(":")
                pattern[role.strip()] = status.strip()
            rows.append(
                VerdictRow(
                    pattern=pattern,
                    verdict=VerdictKind(body["verdict"]),
                    confidence=Confidence(body["confidence"]),
                    note=body.get("note", ""),
                )
            )
        table = VerdictTable(
            id=doc.top["id"],
            defect_kind=DefectKind(doc.top["defect_kind"]),
            roles=as_list(doc.top["roles"]),
            rows=rows,
        )
        table.validate()
        tables[table.id] = table
    return tables


# --- findings ------------------------------------------------------------------


@dataclass
class TestRecord:
    __test__ = False  # not a pytest class

    method: str
    role: str
    backend: str
    status: str

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "role": self.role,
            "backend": self.backend,
            "status": self.status,
        }


@dataclass
class Finding:
    contract: str
    defect_kind: DefectKind
    verdict: VerdictKind
    confidence: Confidence
    evidence: DefectEvidence | None = None
    tests: list[TestRecord] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.verdict is VerdictKind.CLEAN and (self.tests or self.evidence):
            raise ValueError("clean findings carry no tests and no evidence")
        if self.verdict is VerdictKind.SUSPECTED and self.confidence not in (
            Confidence.LOW,
            Confidence.MEDIUM,
        ):
            raise ValueError("suspected findings are low or medium confidence")
        if self.verdict in (
            VerdictKind.PROVEN_VULNERABLE,
            VerdictKind.PROVEN_SAFE_FOR_SCENARIO,
        ) and not self.tests:
            raise ValueError("proven verdicts require executed tests")

    def to_dict(self) -> dict:
        return {
            "contract": self.contract,
            "defect_kind": self.defect_kind.value,
            "verdict": self.verdict.value,
            "confidence": self.confidence.value,
            "evidence": self.evidence.to_dict() if self.evidence else None,
            "tests": [t.to_dict() for t in self.tests],
            "notes": list(self.notes),
        }


# --- interpretation ---------------------------------------------------------------


def interpret(
    table: VerdictTable, result: ExecutionResult, roles: dict[str, str]
) -> tuple[VerdictKind, Confidence, str]:
    """First matching row wins; infrastructure trouble lands on the default row."""
    unknown = [m for m in result.per_test if m not in roles]
    if unknown:
        verdict, confidence = table.default_row
        return verdict, confidence, f"unexpected test methods in result: {', '.join(sorted(unknown))}"
    by_role: dict[str, str] = {}
    for method, role in roles.items():
        outcome = result.per_test.get(method)
        by_role[role] = outcome.status.value if outcome else Status.ERROR.value
    for row in table.rows:
        if row.matches(by_role):
            return row.verdict, row.confidence, row.note
    verdict, confidence = table.default_row
    details = "; ".join(
        f"{m}: {o.detail}" for m, o in sorted(result.per_test.items()) if o.detail
    )
    return verdict, confidence, details or "no verdict row matched"


def degrade(
    evidence: DefectEvidence, stage_failed: str, reason: str
) -> Finding:
    """Suspected finding for evidence whose proof never ran.

    Execution failures keep medium confidence (a compiled test exists);
    generation failures drop to low.  Access-control evidence on contracts
    without any custom msg.sender modifier is the weakest signal and stays low.
    """
    if stage_failed not in ("generation", "execution"):
        raise ValueError(f"unknown stage: {stage_failed}")
    confidence = Confidence.MEDIUM if stage_failed == "execution" else Confidence.LOW
    if (
        evidence.kind is DefectKind.ACCESS_CONTROL
        and evidence.gating_facts.get("has_custom_access_modifiers") == "false"
    ):
        confidence = Confidence.LOW
    return Finding(
        contract=evidence.contract,
        defect_kind=evidence.kind,
        verdict=VerdictKind.SUSPECTED,
        confidence=confidence,
        evidence=evidence,
        notes=[f"suspected: {stage_failed} failed: {reason}"],
    )


# --- per-defect outcome carriers used by finalize ------------------------------------


@dataclass
class ExecutedDefect:
    result: ExecutionResult
    table: VerdictTable
    roles: dict[str, str]  # method -> role


@dataclass
class FailedDefect:
    stage: str  # generation | execution
    reason: str


@dataclass
class StageOneOnly:
    note: str = "no proof template for this defect kind; static evidence only"


def finalize(
    ir,
    evidence_list: list[DefectEvidence],
    per_defect_results: dict[DefectKind, object],
    enabled: set[DefectKind] | None = None,
) -> list[Finding]:
    """One finding per enabled defect kind, in stable DefectKind order."""
    if enabled is None:
        enabled = set(KIND_ORDER)
    evidence_by_kind = {e.kind: e for e in evidence_list}
    findings = []
    for kind in KIND_ORDER:
        if kind not in enabled:
            continue
        evidence = evidence_by_kind.get(kind)
        if evidence is None:
            findings.append(
                Finding(
                    contract=ir.name,
                    defect_kind=kind,
                    verdict=VerdictKind.CLEAN,
                    confidence=Confidence.NONE,
                )
            )
            continue
        outcome = per_defect_results.get(kind)
        if isinstance(outcome, ExecutedDefect):
            findings.append(_executed_finding(ir.name, kind, evidence, outcome))
        elif isinstance(outcome, FailedDefect):
            findings.append(degrade(evidence, outcome.stage, outcome.reason))
        elif isinstance(outcome, StageOneOnly):
            findings.append(
                Finding(
                    contract=ir.name,
                    defect_kind=kind,
                    verdict=VerdictKind.SUSPECTED,
                    confidence=Confidence.MEDIUM,
                    evidence=evidence,
                    notes=[outcome.note],
                )
            )
        else:
            findings.append(
                Finding(
                    contract=ir.name,
                    defect_kind=kind,
                    verdict=VerdictKind.SUSPECTED,
                    confidence=Confidence.MEDIUM,
                    evidence=evidence,
                    notes=["static evidence only; proof stages not run"],
                )
            )
    return findings


def _executed_finding(
    contract: str, kind: DefectKind, evidence: DefectEvidence, outcome: ExecutedDefect
) -> Finding:
    verdict, confidence, note = interpret(outcome.table, outcome.result, outcome.roles)
    tests = [
        TestRecord(
            method=method,
            role=outcome.roles.get(method, "?"),
            backend=outcome.result.backend.value,
            status=outcome.result.per_test[method].status.value,
        )
        for method in sorted(outcome.result.per_test)
    ]
    notes = [note] if note else []
    if verdict is VerdictKind.CLEAN:
        # the defect is inapplicable; the finding stays clean (no evidence or
        # tests attached) and the trail lives in the notes
        notes.append(
            "proof tests executed; outcomes: "
            + ", ".join(f"{t.method}={t.status}" for t in tests)
        )
        return Finding(
            contract=contract,
            defect_kind=kind,
            verdict=VerdictKind.CLEAN,
            confidence=Confidence.NONE,
            notes=notes,
        )
    return Finding(
        contract=contract,
        defect_kind=kind,
        verdict=verdict,
        confidence=confidence,
        evidence=evidence,
        tests=tests,
        notes=notes,
    )
