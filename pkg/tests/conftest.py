from __future__ import annotations

from pathlib import Path

import pytest

from scproof.detectors import DefectKind
from scproof.ir import ContractIR, build_ir, load_ast_snapshot
from scproof.kvdoc import load_kv

REPO = Path(__file__).resolve().parents[1]
FIXTURES = REPO / "fixtures"
DATA = Path(__file__).resolve().parent / "data"
GOLDEN = DATA / "golden"
STUBS = DATA / "stubs"


def snapshot_path(kind_dir: str, variant: str) -> Path:
    return FIXTURES / kind_dir / "ast" / f"{variant}.json"


def load_fixture_ir(kind_dir: str, variant: str) -> ContractIR:
    unit = load_ast_snapshot(snapshot_path(kind_dir, variant))
    contracts = build_ir(unit)
    assert len(contracts) == 1
    return contracts[0]


def corpus_pairs() -> list[dict]:
    doc = load_kv(FIXTURES / "corpus.manifest")
    return doc.sections("pair")


@pytest.fixture(scope="session")
def listing_reentrancy() -> ContractIR:
    return load_fixture_ir("reentrancy", "vulnerable")


@pytest.fixture(scope="session")
def listing_complex_fallback() -> ContractIR:
    return load_fixture_ir("complex_fallback", "vulnerable")


@pytest.fixture(scope="session")
def listing_access_control() -> ContractIR:
    return load_fixture_ir("access_control", "vulnerable")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # expose per-phase outcomes so the acceptance module can print pass/fail lines
    outcome = yield
    report = outcome.get_result()
    setattr(item, "rep_" + report.when, report)


def make_offline_config(tmp_path, **overrides):
    from scproof.config import load_config

    base = {
        "offline": True,
        "backend": "mock",
        "no_compile_check": True,
        "workdir": str(tmp_path / "work"),
        "stub_dir": str(STUBS),
        "llm_mode": "offline_stub",
    }
    base.update(overrides)
    return load_config(None, base, env={})


@pytest.fixture
def offline_config(tmp_path):
    return make_offline_config(tmp_path)


def all_kinds() -> list[DefectKind]:
    return list(DefectKind)
