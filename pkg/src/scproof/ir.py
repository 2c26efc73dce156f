"""Solidity ingestion and the normalized per-contract view the detectors match on.

Sources enter either through the Solidity compiler (standard-JSON mode,
compact AST) or through a committed snapshot of that same compiler output.
``build_ir`` turns one source unit into a list of ContractIR: state
variables, functions and modifiers, and per-statement facts (state
reads/writes, external calls, block-environment reads, guards, arithmetic,
sensitive parameter uses).

Control flow is approximated by linear statement order inside one function
body; nested if/loop bodies are flattened depth-first.  Statements whose
node type the walker does not understand become opaque facts and are
recorded as unsupported constructs instead of failing the build.
"""

from __future__ import annotations

import json
import re
import shutil
import subprocess
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import CompileFailed, CompilerNotFound, MalformedAst, VersionMismatch


class EnvSymbol(str, Enum):
    BLOCK_TIMESTAMP = "block_timestamp"
    BLOCK_NUMBER = "block_number"
    BLOCK_PREVRANDAO = "block_prevrandao"
    BLOCK_DIFFICULTY = "block_difficulty"
    BLOCK_COINBASE = "block_coinbase"
    BLOCK_BASEFEE = "block_basefee"
    BLOCKHASH_CALL = "blockhash_call"


_BLOCK_MEMBERS = {
    "timestamp": EnvSymbol.BLOCK_TIMESTAMP,
    "number": EnvSymbol.BLOCK_NUMBER,
    "prevrandao": EnvSymbol.BLOCK_PREVRANDAO,
    "difficulty": EnvSymbol.BLOCK_DIFFICULTY,
    "coinbase": EnvSymbol.BLOCK_COINBASE,
    "basefee": EnvSymbol.BLOCK_BASEFEE,
}


class CallMechanism(str, Enum):
    LOW_LEVEL_CALL = "low_level_call"
    SEND = "send"
    TRANSFER = "transfer"
    EXTERNAL_FUNCTION_CALL = "external_function_call"
    DELEGATECALL = "delegatecall"
    SELFDESTRUCT = "selfdestruct"


@dataclass(frozen=True)
class SrcLocation:
    file: str
    line: int
    column: int
    byte_start: int
    byte_length: int

    def to_dict(self) -> dict:
        return {
            "file": self.file,
            "line": self.line,
            "column": self.column,
            "byte_start": self.byte_start,
            "byte_length": self.byte_length,
        }


@dataclass(frozen=True)
class ExternalCallFact:
    mechanism: CallMechanism
    carries_value: bool
    gas_capped_2300: bool
    # a transfer straight back to msg.sender is self-service, not a
    # privilege-sensitive payout; the access-control detector keys on this
    target_is_sender: bool = False

    def __post_init__(self):
        if self.gas_capped_2300 and self.mechanism not in (
            CallMechanism.SEND,
            CallMechanism.TRANSFER,
        ):
            raise ValueError("gas_capped_2300 only valid for send/transfer")


@dataclass(frozen=True)
class GuardFact:
    kind: str  # require | assert | if_revert
    condition_mentions: frozenset[str]
    is_constant_condition: bool | None = None
    # symbols the condition forces to be nonzero/positive (e.g. require(x != 0))
    nonzero_mentions: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ArithFact:
    op: str  # div | mod | other
    denominator_kind: str | None = None
    denominator_symbol: str | None = None

    def __post_init__(self):
        if self.denominator_kind in ("parameter", "state_var"):
            if not self.denominator_symbol:
                raise ValueError("denominator_symbol required for parameter/state_var")
        elif self.denominator_symbol is not None:
            raise ValueError("denominator_symbol only valid for parameter/state_var")


@dataclass(frozen=True)
class SensitiveUse:
    kind: str  # div_denominator | array_index | call_value | loop_bound
    symbol: str


@dataclass
class StatementFact:
    index: int
    src_location: SrcLocation
    reads_state: set[str] = field(default_factory=set)
    writes_state: set[str] = field(default_factory=set)
    external_calls: list[ExternalCallFact] = field(default_factory=list)
    env_reads: set[EnvSymbol] = field(default_factory=set)
    guards: list[GuardFact] = field(default_factory=list)
    arithmetic: list[ArithFact] = field(default_factory=list)
    sensitive_uses: list[SensitiveUse] = field(default_factory=list)
    opaque: bool = False

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "src_location": self.src_location.to_dict(),
            "reads_state": sorted(self.reads_state),
            "writes_state": sorted(self.writes_state),
            "external_calls": [
                {
                    "mechanism": c.mechanism.value,
                    "carries_value": c.carries_value,
                    "gas_capped_2300": c.gas_capped_2300,
                    "target_is_sender": c.target_is_sender,
                }
                for c in self.external_calls
            ],
            "env_reads": sorted(e.value for e in self.env_reads),
            "guards": [
                {
                    "kind": g.kind,
                    "condition_mentions": sorted(g.condition_mentions),
                    "is_constant_condition": g.is_constant_condition,
                    "nonzero_mentions": sorted(g.nonzero_mentions),
                }
                for g in self.guards
            ],
            "arithmetic": [
                {
                    "op": a.op,
                    "denominator_kind": a.denominator_kind,
                    "denominator_symbol": a.denominator_symbol,
                }
                for a in self.arithmetic
            ],
            "sensitive_uses": [
                {"kind": u.kind, "symbol": u.symbol} for u in self.sensitive_uses
            ],
            "opaque": self.opaque,
        }


@dataclass
class FunctionIR:
    name: str
    kind: str  # function | receive | fallback | constructor
    visibility: str  # external | public | internal | private
    is_payable: bool
    modifiers_applied: list[str]
    params: list[tuple[str, str]]
    body: list[StatementFact]

    @property
    def param_names(self) -> set[str]:
        return {name for name, _ in self.params}

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "visibility": self.visibility,
            "is_payable": self.is_payable,
            "modifiers_applied": list(self.modifiers_applied),
            "params": [list(p) for p in self.params],
            "body": [s.to_dict() for s in self.body],
        }


@dataclass
class ModifierIR:
    name: str
    guards: list[GuardFact]


@dataclass
class StateVar:
    name: str
    type_string: str


@dataclass
class UnsupportedConstruct:
    node_type: str
    location: SrcLocation | None


@dataclass
class ContractIR:
    name: str
    kind: str  # contract | abstract | interface | library
    state_vars: list[StateVar]
    functions: list[FunctionIR]
    modifiers: list[ModifierIR]
    has_receive: bool
    has_payable_fallback: bool
    constructor_params: list[tuple[str, str]]
    source_path: str = ""
    unsupported: list[UnsupportedConstruct] = field(default_factory=list)

    @property
    def state_var_names(self) -> set[str]:
        return {v.name for v in self.state_vars}

    def modifier_guards(self, name: str) -> list[GuardFact]:
        for mod in self.modifiers:
            if mod.name == name:
                return mod.guards
        return []

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "state_vars": [
                {"name": v.name, "type_string": v.type_string} for v in self.state_vars
            ],
            "functions": [f.to_dict() for f in self.functions],
            "modifiers": [
                {
                    "name": m.name,
                    "guards": [
                        {
                            "kind": g.kind,
                            "condition_mentions": sorted(g.condition_mentions),
                            "is_constant_condition": g.is_constant_condition,
                            "nonzero_mentions": sorted(g.nonzero_mentions),
                        }
                        for g in m.guards
                    ],
                }
                for m in self.modifiers
            ],
            "has_receive": self.has_receive,
            "has_payable_fallback": self.has_payable_fallback,
            "constructor_params": [list(p) for p in self.constructor_params],
            "source_path": self.source_path,
            "unsupported": [
                {
                    "node_type": u.node_type,
                    "location": u.location.to_dict() if u.location else None,
                }
                for u in self.unsupported
            ],
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


@dataclass
class SourceUnit:
    path: str
    solidity_version: str
    ast_root: dict
    raw_source: str
    warnings: list[str] = field(default_factory=list)
    standard_json: dict = field(default_factory=dict)


# --- compiler invocation / snapshot loading ------------------------------


def compile_to_ast(source_path, solc_path: str = "solc", version_hint: str | None = None) -> SourceUnit:
    """Compile one source file with solc --standard-json and keep its AST."""
    source_path = Path(source_path)
    solc = shutil.which(solc_path)
    if solc is None:
        raise CompilerNotFound(f"solc executable not found: {solc_path}")
    if version_hint:
        probe = subprocess.run([solc, "--version"], capture_output=True, text=True)
        if version_hint not in probe.stdout:
            raise VersionMismatch(
                f"compiler reports {probe.stdout.strip().splitlines()[-1]!r}, "
                f"need {version_hint}"
            )
    source_text = source_path.read_text(encoding="utf-8")
    request = {
        "language": "Solidity",
        "sources": {source_path.name: {"content": source_text}},
        "settings": {"outputSelection": {"*": {"": ["ast"]}}},
    }
    proc = subprocess.run(
        [solc, "--standard-json"],
        input=json.dumps(request),
        capture_output=True,
        text=True,
    )
    try:
        output = json.loads(proc.stdout)
    except json.JSONDecodeError:
        raise CompileFailed([proc.stderr.strip() or "compiler produced no JSON output"])
    diagnostics = output.get("errors", [])
    hard_errors = [e.get("formattedMessage", e.get("message", "")) for e in diagnostics if e.get("severity") == "error"]
    if hard_errors:
        raise CompileFailed(hard_errors)
    warnings = [e.get("formattedMessage", e.get("message", "")) for e in diagnostics if e.get("severity") == "warning"]
    sources = output.get("sources", {})
    entry = sources.get(source_path.name)
    if not entry or "ast" not in entry:
        raise CompileFailed(["no source unit produced"])
    ast_root = entry["ast"]
    return SourceUnit(
        path=str(source_path),
        solidity_version=_version_from_ast(ast_root),
        ast_root=ast_root,
        raw_source=source_text,
        warnings=warnings,
        standard_json=output,
    )


def write_snapshot(unit: SourceUnit, path) -> None:
    """Persist the compiler's standard-JSON output verbatim for hermetic reloads."""
    Path(path).write_text(
        json.dumps(unit.standard_json, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_ast_snapshot(json_path) -> SourceUnit:
    """Load a persisted standard-JSON compiler output (one source unit per file)."""
    json_path = Path(json_path)
    try:
        output = json.loads(json_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedAst(f"(not JSON: {exc})")
    if not isinstance(output, dict) or not isinstance(output.get("sources"), dict):
        raise MalformedAst("sources")
    sources = output["sources"]
    if len(sources) != 1:
        raise MalformedAst("sources (expected exactly one source unit)")
    (name, entry), = sources.items()
    if not isinstance(entry, dict) or not isinstance(entry.get("ast"), dict):
        raise MalformedAst(f"sources.{name}.ast")
    ast_root = entry["ast"]
    if ast_root.get("nodeType") != "SourceUnit":
        raise MalformedAst(f"sources.{name}.ast.nodeType")
    warnings = [
        e.get("formattedMessage", e.get("message", ""))
        for e in output.get("errors", [])
        if e.get("severity") == "warning"
    ]
    source_file, raw_source = _resolve_snapshot_source(json_path, ast_root.get("absolutePath", name))
    return SourceUnit(
        path=source_file or str(json_path),
        solidity_version=_version_from_ast(ast_root),
        ast_root=ast_root,
        raw_source=raw_source,
        warnings=warnings,
        standard_json=output,
    )


def _resolve_snapshot_source(json_path: Path, absolute_path: str) -> tuple[str | None, str]:
    # fixture layout keeps snapshots in ast/ one level below the .sol file
    candidates = [
        json_path.parent / absolute_path,
        json_path.parent.parent / absolute_path,
        Path(absolute_path),
    ]
    for candidate in candidates:
        if candidate.is_file():
            return str(candidate), candidate.read_text(encoding="utf-8")
    return None, ""


def _version_from_ast(ast_root: dict) -> str:
    for node in ast_root.get("nodes", []):
        if node.get("nodeType") == "PragmaDirective":
            literals = node.get("literals", [])
            if literals and literals[0] == "solidity":
                return "".join(literals[1:])
    return ""


# --- IR construction ------------------------------------------------------

_STATEMENT_CONTAINERS = ("Block", "UncheckedBlock")


def build_ir(unit: SourceUnit) -> list[ContractIR]:
    """One ContractIR per concrete contract in the unit, facts populated."""
    contract_nodes = [
        n for n in unit.ast_root.get("nodes", []) if n.get("nodeType") == "ContractDefinition"
    ]
    by_name = {n.get("name"): n for n in contract_nodes}
    result = []
    for node in contract_nodes:
        if node.get("contractKind") != "contract" or node.get("abstract"):
            continue
        result.append(_build_contract(unit, node, by_name))
    return result


def _build_contract(unit: SourceUnit, node: dict, by_name: dict) -> ContractIR:
    unsupported: list[UnsupportedConstruct] = []
    parts = [node]
    for base in node.get("baseContracts", []):
        base_name = base.get("baseName", {}).get("name")
        base_node = by_name.get(base_name)
        if base_node is None:
            unsupported.append(UnsupportedConstruct(f"unresolved-base:{base_name}", None))
            continue
        if base_node.get("baseContracts"):
            # only one level of inheritance is flattened
            unsupported.append(UnsupportedConstruct(f"deep-inheritance:{base_name}", None))
        parts.insert(0, base_node)

    state_vars: list[StateVar] = []
    modifier_nodes: dict[str, dict] = {}
    function_nodes: dict[tuple, dict] = {}
    for part in parts:
        for member in part.get("nodes", []):
            node_type = member.get("nodeType")
            if node_type == "VariableDeclaration" and member.get("stateVariable", True):
                if member.get("name") not in {v.name for v in state_vars}:
                    state_vars.append(
                        StateVar(member.get("name", ""), _type_string(member))
                    )
            elif node_type == "ModifierDefinition":
                modifier_nodes[member.get("name", "")] = member
            elif node_type == "FunctionDefinition":
                key = _function_key(member)
                function_nodes[key] = member  # derived overrides base

    ctx = _ContractContext(
        unit=unit,
        state_vars={v.name: v.type_string for v in state_vars},
        unsupported=unsupported,
    )

    modifiers = [
        ModifierIR(name=name, guards=_modifier_guards(ctx, mod_node))
        for name, mod_node in sorted(modifier_nodes.items())
    ]

    functions: list[FunctionIR] = []
    constructor_params: list[tuple[str, str]] = []
    for key in function_nodes:
        fn_node = function_nodes[key]
        fn = _build_function(ctx, fn_node)
        if fn.kind == "constructor":
            constructor_params = list(fn.params)
        functions.append(fn)

    _check_unique_signatures(functions, unsupported)

    has_receive = any(f.kind == "receive" for f in functions)
    has_payable_fallback = any(f.kind == "fallback" and f.is_payable for f in functions)

    return ContractIR(
        name=node.get("name", ""),
        kind="contract",
        state_vars=state_vars,
        functions=functions,
        modifiers=modifiers,
        has_receive=has_receive,
        has_payable_fallback=has_payable_fallback,
        constructor_params=constructor_params,
        source_path=unit.path,
        unsupported=unsupported,
    )


def _function_key(fn_node: dict) -> tuple:
    kind = fn_node.get("kind", "function")
    params = tuple(
        _type_string(p) for p in fn_node.get("parameters", {}).get("parameters", [])
    )
    return (kind, fn_node.get("name", ""), params)


def _check_unique_signatures(functions: list[FunctionIR], unsupported: list) -> None:
    seen = set()
    for fn in functions:
        sig = (fn.kind, fn.name, tuple(t for _, t in fn.params))
        if sig in seen:
            unsupported.append(UnsupportedConstruct(f"duplicate-signature:{fn.name}", None))
        seen.add(sig)


def _type_string(decl: dict) -> str:
    type_desc = decl.get("typeDescriptions", {})
    if type_desc.get("typeString"):
        return type_desc["typeString"]
    type_name = decl.get("typeName", {})
    return type_name.get("name", type_name.get("nodeType", "unknown"))


@dataclass
class _ContractContext:
    unit: SourceUnit
    state_vars: dict[str, str]
    unsupported: list


def _modifier_guards(ctx: _ContractContext, mod_node: dict) -> list[GuardFact]:
    params = {p.get("name") for p in mod_node.get("parameters", {}).get("parameters", [])}
    walker = _FunctionWalker(ctx, params)
    body = mod_node.get("body")
    if body:
        walker.flatten(body.get("statements", []))
    return [g for fact in walker.facts for g in fact.guards]


def _build_function(ctx: _ContractContext, fn_node: dict) -> FunctionIR:
    kind = fn_node.get("kind", "function")
    params = [
        (p.get("name", ""), _type_string(p))
        for p in fn_node.get("parameters", {}).get("parameters", [])
    ]
    if kind == "receive" and params:
        ctx.unsupported.append(UnsupportedConstruct("receive-with-params", None))
        params = []
    walker = _FunctionWalker(ctx, {name for name, _ in params})
    body = fn_node.get("body")
    if body:
        walker.flatten(body.get("statements", []))
    return FunctionIR(
        name=fn_node.get("name", "") or kind,
        kind=kind,
        visibility=fn_node.get("visibility", "public"),
        is_payable=fn_node.get("stateMutability") == "payable",
        modifiers_applied=[
            m.get("modifierName", {}).get("name", "")
            for m in fn_node.get("modifiers", [])
        ],
        params=params,
        body=walker.facts,
    )


_LEAF_STATEMENTS = {
    "ExpressionStatement",
    "VariableDeclarationStatement",
    "Return",
    "EmitStatement",
    "RevertStatement",
    "PlaceholderStatement",
    "Break",
    "Continue",
}


class _FunctionWalker:
    """Flattens one function body into ordered StatementFacts."""

    def __init__(self, ctx: _ContractContext, params: set[str]):
        self.ctx = ctx
        self.params = set(params)
        self.locals: set[str] = set()
        self.facts: list[StatementFact] = []

    # -- statement level --------------------------------------------------

    def flatten(self, statements: list[dict]) -> None:
        for stmt in statements:
            self._statement(stmt)

    def _statement(self, stmt: dict) -> None:
        node_type = stmt.get("nodeType")
        if node_type in _STATEMENT_CONTAINERS:
            self.flatten(stmt.get("statements", []))
            return
        if node_type == "IfStatement":
            self._if_statement(stmt)
            return
        if node_type in ("ForStatement", "WhileStatement", "DoWhileStatement"):
            self._loop_statement(stmt)
            return
        if node_type in _LEAF_STATEMENTS:
            fact = self._new_fact(stmt)
            self._leaf(stmt, fact)
            return
        # assembly, try/catch, anything newer: keep position, drop content
        fact = self._new_fact(stmt)
        fact.opaque = True
        self.ctx.unsupported.append(
            UnsupportedConstruct(node_type or "unknown", fact.src_location)
        )

    def _new_fact(self, stmt: dict) -> StatementFact:
        fact = StatementFact(
            index=len(self.facts), src_location=self._location(stmt.get("src", ""))
        )
        self.facts.append(fact)
        return fact

    def _leaf(self, stmt: dict, fact: StatementFact) -> None:
        node_type = stmt["nodeType"]
        collector = _ExprCollector(self, fact)
        if node_type == "ExpressionStatement":
            collector.walk(stmt.get("expression"))
        elif node_type == "VariableDeclarationStatement":
            for decl in stmt.get("declarations") or []:
                if decl:
                    self.locals.add(decl.get("name", ""))
            collector.walk(stmt.get("initialValue"))
        elif node_type == "Return":
            collector.walk(stmt.get("expression"))
        elif node_type == "EmitStatement":
            collector.walk(stmt.get("eventCall"))
        elif node_type == "RevertStatement":
            collector.walk(stmt.get("errorCall"))
        # PlaceholderStatement / Break / Continue carry no facts

    def _if_statement(self, stmt: dict) -> None:
        fact = self._new_fact(stmt)
        collector = _ExprCollector(self, fact)
        condition = stmt.get("condition")
        collector.walk(condition)
        if _body_reverts(stmt.get("trueBody")):
            fact.guards.append(
                GuardFact(
                    kind="if_revert",
                    condition_mentions=_mentions(condition),
                    is_constant_condition=_constant_bool(condition),
                    nonzero_mentions=_nonzero_mentions(condition),
                )
            )
        if stmt.get("trueBody"):
            self._nested_body(stmt["trueBody"])
        if stmt.get("falseBody"):
            self._nested_body(stmt["falseBody"])

    def _loop_statement(self, stmt: dict) -> None:
        init = stmt.get("initializationExpression")
        if init and init.get("nodeType") == "VariableDeclarationStatement":
            for decl in init.get("declarations") or []:
                if decl:
                    self.locals.add(decl.get("name", ""))
        fact = self._new_fact(stmt)
        collector = _ExprCollector(self, fact)
        if init:
            collector.walk(init.get("initialValue"))
        condition = stmt.get("condition")
        collector.walk(condition)
        collector.walk(stmt.get("loopExpression", {}).get("expression") if stmt.get("loopExpression") else None)
        self._loop_bound_use(condition, fact)
        if stmt.get("body"):
            self._nested_body(stmt["body"])

    def _loop_bound_use(self, condition: dict | None, fact: StatementFact) -> None:
        if not condition or condition.get("nodeType") != "BinaryOperation":
            return
        for side in (condition.get("leftExpression"), condition.get("rightExpression")):
            if side and side.get("nodeType") == "Identifier" and side.get("name") in self.params:
                fact.sensitive_uses.append(SensitiveUse("loop_bound", side["name"]))

    def _nested_body(self, body: dict) -> None:
        if body.get("nodeType") in _STATEMENT_CONTAINERS:
            self.flatten(body.get("statements", []))
        else:
            self._statement(body)

    # -- helpers -----------------------------------------------------------

    def _location(self, src: str) -> SrcLocation:
        start, length = _parse_src(src)
        line, column = _line_col(self.ctx.unit.raw_source, start)
        return SrcLocation(
            file=self.ctx.unit.path,
            line=line,
            column=column,
            byte_start=start,
            byte_length=length,
        )

    def is_state_var(self, name: str) -> bool:
        return (
            name in self.ctx.state_vars
            and name not in self.params
            and name not in self.locals
        )

    def state_type(self, name: str) -> str:
        return self.ctx.state_vars.get(name, "")


def _parse_src(src: str) -> tuple[int, int]:
    try:
        start, length, _ = src.split(":")
        return int(start), int(length)
    except (ValueError, AttributeError):
        return 0, 0


def _line_col(source: str, byte_start: int) -> tuple[int, int]:
    if not source:
        return 0, 0
    prefix = source.encode("utf-8")[:byte_start].decode("utf-8", errors="replace")
    line = prefix.count("\n") + 1
    column = len(prefix) - (prefix.rfind("\n") + 1) + 1
    return line, column


def _body_reverts(body: dict | None) -> bool:
    """True when the branch immediately reverts (if (...) revert-style guard)."""
    if not body:
        return False
    statements = (
        body.get("statements", []) if body.get("nodeType") in _STATEMENT_CONTAINERS else [body]
    )
    for stmt in statements[:1]:
        if stmt.get("nodeType") == "RevertStatement":
            return True
        if stmt.get("nodeType") == "ExpressionStatement":
            expr = stmt.get("expression", {})
            if expr.get("nodeType") == "FunctionCall":
                callee = expr.get("expression", {})
                if callee.get("nodeType") == "Identifier" and callee.get("name") == "revert":
                    return True
    return False


class _ExprCollector:
    """Accumulates facts from one statement's expression tree."""

    def __init__(self, walker: _FunctionWalker, fact: StatementFact):
        self.walker = walker
        self.fact = fact

    def walk(self, node: dict | None, as_write: bool = False) -> None:
        if not node:
            return
        handler = getattr(self, "_n_" + node.get("nodeType", ""), None)
        if handler is not None:
            handler(node, as_write)

    # -- leaf/simple nodes --

    def _n_Identifier(self, node: dict, as_write: bool) -> None:
        name = node.get("name", "")
        if self.walker.is_state_var(name):
            if as_write:
                self.fact.writes_state.add(name)
            else:
                self.fact.reads_state.add(name)

    def _n_Literal(self, node: dict, as_write: bool) -> None:
        pass

    def _n_ElementaryTypeNameExpression(self, node: dict, as_write: bool) -> None:
        pass

    def _n_MemberAccess(self, node: dict, as_write: bool) -> None:
        base = node.get("expression", {})
        member = node.get("memberName", "")
        if base.get("nodeType") == "Identifier" and base.get("name") == "block":
            symbol = _BLOCK_MEMBERS.get(member)
            if symbol:
                self.fact.env_reads.add(symbol)
            return
        if base.get("nodeType") == "Identifier" and base.get("name") in ("msg", "tx"):
            return
        self.walk(base, as_write)

    def _n_IndexAccess(self, node: dict, as_write: bool) -> None:
        base = node.get("baseExpression", {})
        index = node.get("indexExpression")
        self.walk(base, as_write)
        self.walk(index)
        if (
            index is not None
            and index.get("nodeType") == "Identifier"
            and index.get("name") in self.walker.params
            and "[]" in _type_string(base)
        ):
            self.fact.sensitive_uses.append(SensitiveUse("array_index", index["name"]))

    def _n_TupleExpression(self, node: dict, as_write: bool) -> None:
        for component in node.get("components") or []:
            self.walk(component, as_write)

    def _n_Conditional(self, node: dict, as_write: bool) -> None:
        self.walk(node.get("condition"))
        self.walk(node.get("trueExpression"), as_write)
        self.walk(node.get("falseExpression"), as_write)

    def _n_Assignment(self, node: dict, as_write: bool) -> None:
        lhs = node.get("leftHandSide")
        self.walk(lhs, as_write=True)
        if node.get("operator", "=") != "=":
            self.walk(lhs)  # compound assignment also reads the target
        self.walk(node.get("rightHandSide"))

    def _n_UnaryOperation(self, node: dict, as_write: bool) -> None:
        op = node.get("operator", "")
        sub = node.get("subExpression")
        if op in ("++", "--", "delete"):
            self.walk(sub, as_write=True)
            if op != "delete":
                self.walk(sub)
        else:
            self.walk(sub)

    def _n_BinaryOperation(self, node: dict, as_write: bool) -> None:
        op = node.get("operator", "")
        left = node.get("leftExpression")
        right = node.get("rightExpression")
        self.walk(left)
        self.walk(right)
        if op in ("/", "%"):
            self._division(op, right)

    def _n_FunctionCallOptions(self, node: dict, as_write: bool) -> None:
        self.walk(node.get("expression"))
        for option in node.get("options", []):
            self.walk(option)

    def _n_NewExpression(self, node: dict, as_write: bool) -> None:
        pass

    def _n_FunctionCall(self, node: dict, as_write: bool) -> None:
        callee = node.get("expression", {})
        if node.get("kind") == "typeConversion":
            for arg in node.get("arguments", []):
                self.walk(arg)
            return

        options_node = None
        if callee.get("nodeType") == "FunctionCallOptions":
            options_node = callee
            callee = options_node.get("expression", {})

        if callee.get("nodeType") == "Identifier":
            self._builtin_or_internal_call(node, callee, options_node)
        elif callee.get("nodeType") == "MemberAccess":
            self._member_call(node, callee, options_node)
        else:
            self.walk(callee)
            for arg in node.get("arguments", []):
                self.walk(arg)
        if options_node:
            self._call_options(options_node)

    # -- call classification --

    def _builtin_or_internal_call(self, node: dict, callee: dict, options_node) -> None:
        name = callee.get("name", "")
        args = node.get("arguments", [])
        if name in ("require", "assert"):
            condition = args[0] if args else None
            self.fact.guards.append(
                GuardFact(
                    kind=name,
                    condition_mentions=_mentions(condition),
                    is_constant_condition=_constant_bool(condition),
                    nonzero_mentions=_nonzero_mentions(condition),
                )
            )
        elif name == "selfdestruct":
            self.fact.external_calls.append(
                ExternalCallFact(
                    mechanism=CallMechanism.SELFDESTRUCT,
                    carries_value=True,
                    gas_capped_2300=False,
                )
            )
        elif name == "blockhash":
            self.fact.env_reads.add(EnvSymbol.BLOCKHASH_CALL)
        for arg in args:
            self.walk(arg)

    def _member_call(self, node: dict, callee: dict, options_node) -> None:
        member = callee.get("memberName", "")
        base = callee.get("expression", {})
        args = node.get("arguments", [])
        carries_value = _has_value_option(options_node)
        if _type_string(base).startswith("contract "):
            self.fact.external_calls.append(
                ExternalCallFact(
                    mechanism=CallMechanism.EXTERNAL_FUNCTION_CALL,
                    carries_value=carries_value,
                    gas_capped_2300=False,
                    target_is_sender=_is_msg_sender(base),
                )
            )
        elif member in ("transfer", "send") and _is_address_like(base):
            self.fact.external_calls.append(
                ExternalCallFact(
                    mechanism=CallMechanism(member),
                    carries_value=True,
                    gas_capped_2300=True,
                    target_is_sender=_is_msg_sender(base),
                )
            )
        elif member in ("call", "staticcall") and _is_address_like(base):
            self.fact.external_calls.append(
                ExternalCallFact(
                    mechanism=CallMechanism.LOW_LEVEL_CALL,
                    carries_value=carries_value,
                    gas_capped_2300=False,
                    target_is_sender=_is_msg_sender(base),
                )
            )
        elif member == "delegatecall" and _is_address_like(base):
            self.fact.external_calls.append(
                ExternalCallFact(
                    mechanism=CallMechanism.DELEGATECALL,
                    carries_value=False,
                    gas_capped_2300=False,
                    target_is_sender=_is_msg_sender(base),
                )
            )
        self.walk(base)
        for arg in args:
            self.walk(arg)

    def _call_options(self, options_node: dict) -> None:
        names = options_node.get("names", [])
        options = options_node.get("options", [])
        for name, option in zip(names, options):
            if (
                name == "value"
                and option.get("nodeType") == "Identifier"
                and option.get("name") in self.walker.params
            ):
                self.fact.sensitive_uses.append(
                    SensitiveUse("call_value", option["name"])
                )

    def _division(self, op: str, denominator: dict | None) -> None:
        denominator = _unwrap_tuple(denominator)
        kind = "expression"
        symbol = None
        if denominator is None:
            kind = "expression"
        elif denominator.get("nodeType") == "Literal":
            kind = "zero_literal" if _literal_is_zero(denominator) else "nonzero_literal"
        elif denominator.get("nodeType") == "Identifier":
            name = denominator.get("name", "")
            if name in self.walker.params:
                kind, symbol = "parameter", name
                self.fact.sensitive_uses.append(SensitiveUse("div_denominator", name))
            elif self.walker.is_state_var(name):
                kind, symbol = "state_var", name
        self.fact.arithmetic.append(
            ArithFact(
                op={"/": "div", "%": "mod"}[op],
                denominator_kind=kind,
                denominator_symbol=symbol,
            )
        )


def _unwrap_tuple(node: dict | None) -> dict | None:
    while node and node.get("nodeType") == "TupleExpression":
        components = [c for c in node.get("components") or [] if c]
        if len(components) != 1:
            return node
        node = components[0]
    return node


def _has_value_option(options_node: dict | None) -> bool:
    if not options_node:
        return False
    return "value" in options_node.get("names", [])


def _is_address_like(base: dict) -> bool:
    type_string = _type_string(base)
    if type_string.startswith("address"):
        return True
    # payable(<expr>) conversion
    if base.get("nodeType") == "FunctionCall" and base.get("kind") == "typeConversion":
        callee = base.get("expression", {})
        if callee.get("nodeType") == "ElementaryTypeNameExpression":
            name = callee.get("typeName", {}).get("name", callee.get("typeName"))
            if name in ("address", "payable"):
                return True
    return False


def _is_msg_sender(base: dict) -> bool:
    """True when the call target expression is msg.sender (possibly via payable())."""
    node = base
    while (
        node
        and node.get("nodeType") == "FunctionCall"
        and node.get("kind") == "typeConversion"
        and node.get("arguments")
    ):
        node = node["arguments"][0]
    return (
        node is not None
        and node.get("nodeType") == "MemberAccess"
        and node.get("memberName") == "sender"
        and node.get("expression", {}).get("name") == "msg"
    )


# --- condition analysis ----------------------------------------------------


def _mentions(condition: dict | None) -> frozenset[str]:
    out: set[str] = set()
    _collect_mentions(condition, out)
    return frozenset(out)


def _collect_mentions(node: dict | None, out: set[str]) -> None:
    if not isinstance(node, dict):
        return
    node_type = node.get("nodeType")
    if node_type == "Identifier":
        out.add(node.get("name", ""))
        return
    if node_type == "MemberAccess":
        base = node.get("expression", {})
        if base.get("nodeType") == "Identifier" and base.get("name") in ("msg", "tx", "block"):
            out.add(f"{base['name']}.{node.get('memberName', '')}")
            return
    for value in node.values():
        if isinstance(value, dict):
            _collect_mentions(value, out)
        elif isinstance(value, list):
            for item in value:
                _collect_mentions(item, out)


def _constant_bool(condition: dict | None) -> bool | None:
    condition = _unwrap_tuple(condition)
    if (
        condition
        and condition.get("nodeType") == "Literal"
        and condition.get("kind") == "bool"
    ):
        return condition.get("value") == "true"
    return None


def _literal_is_zero(node: dict) -> bool:
    value = str(node.get("value", "")).strip().lower().replace("_", "")
    try:
        return int(value, 0) == 0
    except ValueError:
        return False


def _nonzero_mentions(condition: dict | None) -> frozenset[str]:
    """Symbols the condition forces to be nonzero or positive."""
    out: set[str] = set()
    _collect_nonzero(condition, out)
    return frozenset(out)


def _collect_nonzero(node: dict | None, out: set[str]) -> None:
    if not isinstance(node, dict) or node.get("nodeType") != "BinaryOperation":
        return
    op = node.get("operator", "")
    left = _unwrap_tuple(node.get("leftExpression"))
    right = _unwrap_tuple(node.get("rightExpression"))
    if op == "&&":
        _collect_nonzero(left, out)
        _collect_nonzero(right, out)
        return
    for ident, literal, relation in ((left, right, op), (right, left, _flip(op))):
        if not ident or ident.get("nodeType") != "Identifier":
            continue
        if not literal or literal.get("nodeType") != "Literal":
            continue
        name = ident.get("name", "")
        is_zero = _literal_is_zero(literal)
        if relation == "!=" and is_zero:
            out.add(name)
        elif relation == ">" and not _literal_is_negative(literal):
            out.add(name)
        elif relation == ">=" and _literal_at_least_one(literal):
            out.add(name)
        elif relation == "==" and not is_zero:
            out.add(name)


def _flip(op: str) -> str:
    return {"<": ">", ">": "<", "<=": ">=", ">=": "<="}.get(op, op)


def _literal_is_negative(node: dict) -> bool:
    return str(node.get("value", "")).strip().startswith("-")


def _literal_at_least_one(node: dict) -> bool:
    try:
        return int(str(node.get("value", "")).replace("_", ""), 0) >= 1
    except ValueError:
        return False
