"""Stable machine-readable scan reports and the human text rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .detectors import DefectEvidence, DefectKind, EvidenceSite, KIND_ORDER
from .ir import SrcLocation
from .verdict import Confidence, Finding, TestRecord, VerdictKind

SCHEMA_VERSION = "1"
TOOL_VERSION = "0.1.0"

_VERDICT_SYMBOLS = {
    VerdictKind.PROVEN_VULNERABLE: "!",
    VerdictKind.PROVEN_SAFE_FOR_SCENARIO: "+",
    VerdictKind.SUSPECTED: "?",
    VerdictKind.CLEAN: ".",
    VerdictKind.ERROR: "E",
}

_KIND_RANK = {kind: rank for rank, kind in enumerate(KIND_ORDER)}


@dataclass
class ScanReport:
    tool_version: str
    started_at: str
    finished_at: str
    inputs: list[tuple[str, str]]  # (file, contract)
    config_digest: str
    findings: list[Finding]
    artifacts: list[str] = field(default_factory=list)
    schema_version: str = SCHEMA_VERSION

    def sort(self) -> None:
        file_of = {contract: file for file, contract in self.inputs}
        self.findings.sort(
            key=lambda f: (file_of.get(f.contract, ""), f.contract, _KIND_RANK[f.defect_kind])
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "inputs": [{"file": file, "contract": contract} for file, contract in self.inputs],
            "config_digest": self.config_digest,
            "findings": [f.to_dict() for f in self.findings],
            "artifacts": list(self.artifacts),
        }


def render_json(report: ScanReport) -> bytes:
    """Canonical JSON: sorted keys, UTF-8, LF, trailing newline."""
    text = json.dumps(report.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def parse_report(data: bytes | str) -> ScanReport:
    obj = json.loads(data)
    return ScanReport(
        schema_version=obj["schema_version"],
        tool_version=obj["tool_version"],
        started_at=obj["started_at"],
        finished_at=obj["finished_at"],
        inputs=[(entry["file"], entry["contract"]) for entry in obj["inputs"]],
        config_digest=obj["config_digest"],
        findings=[_finding_from_dict(f) for f in obj["findings"]],
        artifacts=list(obj["artifacts"]),
    )


def _finding_from_dict(obj: dict) -> Finding:
    return Finding(
        contract=obj["contract"],
        defect_kind=DefectKind(obj["defect_kind"]),
        verdict=VerdictKind(obj["verdict"]),
        confidence=Confidence(obj["confidence"]),
        evidence=_evidence_from_dict(obj["evidence"]) if obj.get("evidence") else None,
        tests=[
            TestRecord(
                method=t["method"], role=t["role"], backend=t["backend"], status=t["status"]
            )
            for t in obj["tests"]
        ],
        notes=list(obj["notes"]),
    )


def _evidence_from_dict(obj: dict) -> DefectEvidence:
    return DefectEvidence(
        kind=DefectKind(obj["kind"]),
        contract=obj["contract"],
        sites=[
            EvidenceSite(
                function=s["function"],
                statement_index=s["statement_index"],
                location=SrcLocation(
                    file=s["location"]["file"],
                    line=s["location"]["line"],
                    column=s["location"]["column"],
                    byte_start=s["location"]["byte_start"],
                    byte_length=s["location"]["byte_length"],
                ),
                tag=s["tag"],
                detail=s.get("detail", ""),
            )
            for s in obj["sites"]
        ],
        gating_facts=dict(obj["gating_facts"]),
        detector_version=obj["detector_version"],
    )


def render_text(report: ScanReport, verbosity: int = 0) -> str:
    """One line per finding, evidence sites at verbosity >=1, tests at >=2."""
    lines = []
    noteworthy = 0
    for finding in report.findings:
        symbol = _VERDICT_SYMBOLS[finding.verdict]
        line = (
            f"{symbol} {finding.contract} {finding.defect_kind.value}: "
            f"{finding.verdict.value} ({finding.confidence.value})"
        )
        if finding.verdict is VerdictKind.SUSPECTED and finding.notes:
            line += f" - {finding.notes[0].removeprefix('suspected: ').rstrip('.')}"
        lines.append(line)
        if finding.verdict is not VerdictKind.CLEAN:
            noteworthy += 1
        if verbosity >= 1 and finding.evidence:
            for site in finding.evidence.sites:
                lines.append(
                    f"    {site.tag} at {site.function} statement {site.statement_index}"
                    f" (line {site.location.line})"
                    + (f": {site.detail}" if site.detail else "")
                )
        if verbosity >= 2:
            for test in finding.tests:
                lines.append(
                    f"    test {test.method} [{test.role}] via {test.backend}: {test.status}"
                )
    if noteworthy == 0:
        lines.append("no findings")
    else:
        lines.append(f"{noteworthy} finding(s)")
    return "\n".join(lines) + "\n"


def exit_code_for(report: ScanReport) -> int:
    """3 on any error verdict, else 2 on proven_vulnerable, 1 on suspected, 0 clean."""
    verdicts = {f.verdict for f in report.findings}
    if VerdictKind.ERROR in verdicts:
        return 3
    if VerdictKind.PROVEN_VULNERABLE in verdicts:
        return 2
    if VerdictKind.SUSPECTED in verdicts:
        return 1
    return 0
