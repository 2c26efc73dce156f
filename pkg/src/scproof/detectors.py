"""Stage 1: prerequisite pattern matchers for the seven defect kinds.

Each detector is a total, pure function of a ContractIR.  A detector returns
DefectEvidence only when its prerequisite pattern holds; returning None means
"clean" for that kind.  Evidence gates the expensive test-generation and
execution stages, so the matchers are deliberately cheap and explainable:
everything is decided on linear statement order within one function body.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .ir import (
    CallMechanism,
    ContractIR,
    FunctionIR,
    GuardFact,
    SrcLocation,
    StatementFact,
)

DETECTOR_VERSION = "1"

# address-typed state variables with these names gate the access-control check
_OWNER_LIKE = re.compile(r"owner|admin|governor", re.IGNORECASE)


class DefectKind(str, Enum):
    REENTRANCY = "Reentrancy"
    COMPLEX_FALLBACK = "ComplexFallback"
    ACCESS_CONTROL = "AccessControl"
    BLOCK_ENV_DEPENDENCY = "BlockEnvDependency"
    INSUFFICIENT_PARAM_VALIDATION = "InsufficientParamValidation"
    FAULTY_ASSERT_REVERT = "FaultyAssertRevert"
    DIVISION_BY_ZERO = "DivisionByZero"


KIND_ORDER = list(DefectKind)


@dataclass
class EvidenceSite:
    function: str
    statement_index: int
    location: SrcLocation
    tag: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "function": self.function,
            "statement_index": self.statement_index,
            "location": self.location.to_dict(),
            "tag": self.tag,
            "detail": self.detail,
        }


@dataclass
class DefectEvidence:
    kind: DefectKind
    contract: str
    sites: list[EvidenceSite]
    gating_facts: dict[str, str] = field(default_factory=dict)
    detector_version: str = DETECTOR_VERSION

    def __post_init__(self):
        if not self.sites:
            raise ValueError("evidence without sites is never emitted")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "contract": self.contract,
            "sites": [s.to_dict() for s in self.sites],
            "gating_facts": dict(sorted(self.gating_facts.items())),
            "detector_version": self.detector_version,
        }


# --- shared helpers -------------------------------------------------------


def _handles_ether_or_tokens(ir: ContractIR) -> bool:
    """The reentrancy gate: payable surface, address-keyed mapping writes, or
    value-carrying external calls."""
    if ir.has_receive or ir.has_payable_fallback:
        return True
    address_mappings = {
        v.name for v in ir.state_vars if v.type_string.startswith("mapping(address")
    }
    for fn in ir.functions:
        if fn.is_payable:
            return True
        for fact in fn.body:
            if fact.writes_state & address_mappings:
                return True
            if any(c.carries_value for c in fact.external_calls):
                return True
    return False


def _guard_mentions(guards: list[GuardFact], symbol: str) -> bool:
    return any(symbol in g.condition_mentions for g in guards)


def _applied_modifier_guards(ir: ContractIR, fn: FunctionIR) -> list[GuardFact]:
    guards: list[GuardFact] = []
    for name in fn.modifiers_applied:
        guards.extend(ir.modifier_guards(name))
    return guards


def _guards_before(fn: FunctionIR, index: int) -> list[GuardFact]:
    return [g for fact in fn.body if fact.index < index for g in fact.guards]


# --- detectors ------------------------------------------------------------


def detect_reentrancy(ir: ContractIR) -> DefectEvidence | None:
    """External call followed by a state write, in a contract that moves value.

    An opaque statement after the call is treated as a potential state write
    (missing the pattern is costlier than a spurious match; Stage 3 settles it).
    """
    if not _handles_ether_or_tokens(ir):
        return None
    sites: list[EvidenceSite] = []
    matched_calls = []
    saw_opaque = False
    for fn in ir.functions:
        for fact in fn.body:
            if not fact.external_calls:
                continue
            later_writes = [
                f
                for f in fn.body
                if f.index > fact.index and (f.writes_state or f.opaque)
            ]
            if not later_writes:
                continue
            matched_calls.extend(fact.external_calls)
            sites.append(
                EvidenceSite(
                    function=fn.name,
                    statement_index=fact.index,
                    location=fact.src_location,
                    tag="external-call",
                    detail=", ".join(c.mechanism.value for c in fact.external_calls),
                )
            )
            for write in later_writes:
                if write.opaque:
                    saw_opaque = True
                sites.append(
                    EvidenceSite(
                        function=fn.name,
                        statement_index=write.index,
                        location=write.src_location,
                        tag="state-write-after-call",
                        detail=", ".join(sorted(write.writes_state)) or "opaque statement",
                    )
                )
    if not sites:
        return None
    gating = {
        "all_calls_gas_capped": _bool_str(all(c.gas_capped_2300 for c in matched_calls))
    }
    if saw_opaque:
        gating["opaque"] = "true"
    return DefectEvidence(DefectKind.REENTRANCY, ir.name, sites, gating)


def detect_complex_fallback(ir: ContractIR) -> DefectEvidence | None:
    """A receive/payable-fallback whose body does gas-expensive work (state
    writes or external calls); plain 2300-gas transfers to it will revert."""
    callbacks = [
        fn
        for fn in ir.functions
        if fn.kind == "receive" or (fn.kind == "fallback" and fn.is_payable)
    ]
    if not callbacks:
        return None
    sites: list[EvidenceSite] = []
    callback_kinds = []
    for fn in callbacks:
        expensive = [f for f in fn.body if f.writes_state or f.external_calls]
        if expensive:
            callback_kinds.append(fn.kind)
        for fact in expensive:
            detail = ", ".join(
                sorted(fact.writes_state) or [c.mechanism.value for c in fact.external_calls]
            )
            sites.append(
                EvidenceSite(
                    function=fn.name,
                    statement_index=fact.index,
                    location=fact.src_location,
                    tag="expensive-statement",
                    detail=detail,
                )
            )
    if not sites:
        return None
    return DefectEvidence(
        DefectKind.COMPLEX_FALLBACK,
        ir.name,
        sites,
        {"callback": ",".join(callback_kinds)},
    )


_CRITICAL_VISIBILITIES = ("external", "public")


def detect_access_control(ir: ContractIR) -> DefectEvidence | None:
    """Critical operation reachable by any caller: no applied modifier guards
    msg.sender and no in-body guard mentions it.

    Constructors are exempt (deploy-time initialization), and a value transfer
    whose target is msg.sender itself is self-service, not privilege-sensitive.
    """
    owner_like = {
        v.name
        for v in ir.state_vars
        if v.type_string.startswith("address") and _OWNER_LIKE.search(v.name)
    }
    sites: list[EvidenceSite] = []
    for fn in ir.functions:
        if fn.kind == "constructor":
            continue
        if fn.kind == "function" and fn.visibility not in _CRITICAL_VISIBILITIES:
            continue
        critical: list[tuple[StatementFact, str]] = []
        for fact in fn.body:
            for call in fact.external_calls:
                if call.mechanism == CallMechanism.SELFDESTRUCT:
                    critical.append((fact, "selfdestruct"))
                elif call.mechanism == CallMechanism.DELEGATECALL:
                    critical.append((fact, "delegatecall"))
                elif call.carries_value and not call.target_is_sender:
                    critical.append((fact, f"value-carrying {call.mechanism.value}"))
            hit_owner = fact.writes_state & owner_like
            if hit_owner:
                critical.append((fact, "write to " + ", ".join(sorted(hit_owner))))
        if not critical:
            continue
        body_guards = [g for fact in fn.body for g in fact.guards]
        guarded = _guard_mentions(
            _applied_modifier_guards(ir, fn) + body_guards, "msg.sender"
        )
        if guarded:
            continue
        for fact, op in critical:
            sites.append(
                EvidenceSite(
                    function=fn.name,
                    statement_index=fact.index,
                    location=fact.src_location,
                    tag="unguarded-critical-op",
                    detail=f"{op} without msg.sender guard",
                )
            )
    if not sites:
        return None
    has_custom = any(
        _guard_mentions(mod.guards, "msg.sender") for mod in ir.modifiers
    )
    return DefectEvidence(
        DefectKind.ACCESS_CONTROL,
        ir.name,
        sites,
        {"has_custom_access_modifiers": _bool_str(has_custom)},
    )


def detect_block_env(ir: ContractIR) -> DefectEvidence | None:
    """Every statement reading block built-ins (timestamp, number, ...)."""
    sites = [
        EvidenceSite(
            function=fn.name,
            statement_index=fact.index,
            location=fact.src_location,
            tag="env-read",
            detail=", ".join(sorted(e.value for e in fact.env_reads)),
        )
        for fn in ir.functions
        for fact in fn.body
        if fact.env_reads
    ]
    if not sites:
        return None
    return DefectEvidence(DefectKind.BLOCK_ENV_DEPENDENCY, ir.name, sites)


def detect_param_validation(ir: ContractIR) -> DefectEvidence | None:
    """A parameter reaches a sensitive use (division denominator, array index,
    call value, loop bound) with no earlier guard mentioning it."""
    sites: list[EvidenceSite] = []
    for fn in ir.functions:
        if not fn.params:
            continue
        modifier_guards = _applied_modifier_guards(ir, fn)
        for fact in fn.body:
            for use in fact.sensitive_uses:
                if use.symbol not in fn.param_names:
                    continue
                earlier = modifier_guards + _guards_before(fn, fact.index)
                if _guard_mentions(earlier, use.symbol):
                    continue
                sites.append(
                    EvidenceSite(
                        function=fn.name,
                        statement_index=fact.index,
                        location=fact.src_location,
                        tag="unvalidated-param-use",
                        detail=f"parameter {use.symbol} used as {use.kind.replace('_', ' ')}",
                    )
                )
    if not sites:
        return None
    return DefectEvidence(DefectKind.INSUFFICIENT_PARAM_VALIDATION, ir.name, sites)


def detect_faulty_assert(ir: ContractIR) -> DefectEvidence | None:
    """Constant guard conditions, and asserts over inputs.

    assert is for internal invariants; a condition over parameters or msg
    values belongs in require (failing asserts burn all gas with panic 0x01).
    """
    sites: list[EvidenceSite] = []
    for fn in ir.functions:
        for fact in fn.body:
            for guard in fact.guards:
                tag = _classify_guard(guard, fn)
                if tag is None:
                    continue
                sites.append(
                    EvidenceSite(
                        function=fn.name,
                        statement_index=fact.index,
                        location=fact.src_location,
                        tag=tag,
                        detail=f"{guard.kind} condition "
                        + (
                            f"is constantly {str(guard.is_constant_condition).lower()}"
                            if guard.is_constant_condition is not None
                            else "tests external input: "
                            + ", ".join(sorted(guard.condition_mentions))
                        ),
                    )
                )
    if not sites:
        return None
    return DefectEvidence(DefectKind.FAULTY_ASSERT_REVERT, ir.name, sites)


def _classify_guard(guard: GuardFact, fn: FunctionIR) -> str | None:
    if guard.is_constant_condition is not None:
        # require(c)/assert(c) revert when c is false; if (c) revert() when true
        reverts_always = (
            guard.is_constant_condition
            if guard.kind == "if_revert"
            else not guard.is_constant_condition
        )
        return "always-revert" if reverts_always else "vacuous-guard"
    if guard.kind == "assert":
        external = fn.param_names | {"msg.sender", "msg.value"}
        if guard.condition_mentions & external:
            return "assert-on-input"
    return None


def detect_division_by_zero(ir: ContractIR) -> DefectEvidence | None:
    """Division/modulo whose denominator may be zero and is not established
    nonzero by an earlier guard."""
    sites: list[EvidenceSite] = []
    for fn in ir.functions:
        modifier_guards = _applied_modifier_guards(ir, fn)
        for fact in fn.body:
            for arith in fact.arithmetic:
                if arith.op not in ("div", "mod"):
                    continue
                if arith.denominator_kind == "nonzero_literal":
                    continue
                if arith.denominator_kind in ("parameter", "state_var"):
                    earlier = modifier_guards + _guards_before(fn, fact.index)
                    if any(
                        arith.denominator_symbol in g.nonzero_mentions for g in earlier
                    ):
                        continue
                sites.append(
                    EvidenceSite(
                        function=fn.name,
                        statement_index=fact.index,
                        location=fact.src_location,
                        tag="unguarded-division",
                        detail=f"{arith.op} by {arith.denominator_symbol or arith.denominator_kind}",
                    )
                )
    if not sites:
        return None
    return DefectEvidence(DefectKind.DIVISION_BY_ZERO, ir.name, sites)


_DETECTORS = {
    DefectKind.REENTRANCY: detect_reentrancy,
    DefectKind.COMPLEX_FALLBACK: detect_complex_fallback,
    DefectKind.ACCESS_CONTROL: detect_access_control,
    DefectKind.BLOCK_ENV_DEPENDENCY: detect_block_env,
    DefectKind.INSUFFICIENT_PARAM_VALIDATION: detect_param_validation,
    DefectKind.FAULTY_ASSERT_REVERT: detect_faulty_assert,
    DefectKind.DIVISION_BY_ZERO: detect_division_by_zero,
}


def run_detectors(ir: ContractIR, enabled: set[DefectKind] | None = None) -> list[DefectEvidence]:
    """Run the enabled detectors in DefectKind order; skip silent ones."""
    if enabled is None:
        enabled = set(KIND_ORDER)
    results = []
    for kind in KIND_ORDER:
        if kind not in enabled:
            continue
        evidence = _DETECTORS[kind](ir)
        if evidence is not None:
            results.append(evidence)
    return results


def _bool_str(value: bool) -> str:
    return "true" if value else "false"
