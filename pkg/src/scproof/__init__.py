"""scproof: pattern-gated proof-test pipeline for Solidity contract defects.

Stage 1 matches prerequisite patterns on the compiler AST, Stage 2 fills
defect-specific Solidity test templates (deterministically or via an LLM),
and Stage 3 executes them with Forge/Kontrol (or a scripted mock) and
interprets the outcomes into confidence-rated findings.
"""

from .config import PipelineConfig, load_config
from .detectors import DefectEvidence, DefectKind, EvidenceSite, run_detectors
from .ir import ContractIR, SourceUnit, build_ir, compile_to_ast, load_ast_snapshot
from .pipeline import cmd_detect, cmd_gen_tests, cmd_run
from .report import ScanReport, exit_code_for, parse_report, render_json, render_text
from .templates import GeneratedSuite, TestSuiteSpec, TestTemplate, load_templates
from .verdict import Confidence, Finding, VerdictKind, interpret, load_verdict_tables

__version__ = "0.1.0"

__all__ = [
    "Confidence",
    "ContractIR",
    "DefectEvidence",
    "DefectKind",
    "EvidenceSite",
    "Finding",
    "GeneratedSuite",
    "PipelineConfig",
    "ScanReport",
    "SourceUnit",
    "TestSuiteSpec",
    "TestTemplate",
    "VerdictKind",
    "build_ir",
    "cmd_detect",
    "cmd_gen_tests",
    "cmd_run",
    "compile_to_ast",
    "exit_code_for",
    "interpret",
    "load_ast_snapshot",
    "load_config",
    "load_templates",
    "load_verdict_tables",
    "parse_report",
    "render_json",
    "render_text",
    "run_detectors",
]
