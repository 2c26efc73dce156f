#!/usr/bin/env python3
"""Builds the committed compact-AST snapshots for the fixture corpus.

The snapshots follow the Solidity compiler's standard-JSON output shape
(``{"sources": {"<file>": {"id": 0, "ast": <SourceUnit>}}}``) restricted to
the node vocabulary the pipeline consumes.  Statement and declaration nodes
carry byte-accurate ``src`` offsets located by searching the fixture source;
expression nodes are located within their enclosing statement's span.

Regenerate everything with:  python fixtures/tools/astgen.py
"""

from __future__ import annotations

import json
from pathlib import Path

FIXTURES_DIR = Path(__file__).resolve().parents[1]

UINT = "uint256"
ADDRESS = "address"
ADDRESS_PAYABLE = "address payable"
BOOL = "bool"


class Builder:
    def __init__(self, path: str, source: str):
        self.path = path
        self.source = source
        self._next_id = 0
        self.current_span: tuple[int, int] = (0, len(source))

    def nid(self) -> int:
        self._next_id += 1
        return self._next_id

    # -- src bookkeeping --

    def span(self, snippet: str, occ: int = 0) -> str:
        """Locate a statement-level snippet; sets the search window for
        expression nodes built inside it."""
        start = self._find(snippet, occ, 0, len(self.source))
        self.current_span = (start, len(snippet))
        return f"{start}:{len(snippet)}:0"

    def at(self, snippet: str, occ: int = 0) -> str:
        """Locate an expression snippet inside the current statement span."""
        lo, length = self.current_span
        start = self._find(snippet, occ, lo, lo + length)
        return f"{start}:{len(snippet)}:0"

    def anywhere(self, snippet: str, occ: int = 0) -> str:
        start = self._find(snippet, occ, 0, len(self.source))
        return f"{start}:{len(snippet)}:0"

    def _find(self, snippet: str, occ: int, lo: int, hi: int) -> int:
        window = self.source[lo:hi]
        pos = -1
        for _ in range(occ + 1):
            pos = window.find(snippet, pos + 1)
            if pos < 0:
                raise ValueError(
                    f"{self.path}: snippet {snippet!r} (occurrence {occ}) "
                    f"not found in [{lo}:{hi}]"
                )
        return lo + pos

    # -- expressions --

    def ident(self, name: str, type_string: str, occ: int = 0) -> dict:
        return {
            "id": self.nid(),
            "name": name,
            "nodeType": "Identifier",
            "src": self.at(name, occ),
            "typeDescriptions": {"typeString": type_string},
        }

    def msg(self, member: str) -> dict:
        types = {"sender": ADDRESS, "value": UINT}
        return {
            "id": self.nid(),
            "expression": {
                "id": self.nid(),
                "name": "msg",
                "nodeType": "Identifier",
                "src": self.at("msg." + member).split(":")[0] + ":3:0",
                "typeDescriptions": {"typeString": "msg"},
            },
            "memberName": member,
            "nodeType": "MemberAccess",
            "src": self.at("msg." + member),
            "typeDescriptions": {"typeString": types.get(member, UINT)},
        }

    def block_member(self, member: str) -> dict:
        return {
            "id": self.nid(),
            "expression": {
                "id": self.nid(),
                "name": "block",
                "nodeType": "Identifier",
                "src": self.at("block." + member).split(":")[0] + ":5:0",
                "typeDescriptions": {"typeString": "block"},
            },
            "memberName": member,
            "nodeType": "MemberAccess",
            "src": self.at("block." + member),
            "typeDescriptions": {"typeString": UINT},
        }

    def member(self, expression: dict, member_name: str, type_string: str, snippet: str, occ: int = 0) -> dict:
        return {
            "id": self.nid(),
            "expression": expression,
            "memberName": member_name,
            "nodeType": "MemberAccess",
            "src": self.at(snippet, occ),
            "typeDescriptions": {"typeString": type_string},
        }

    def lit(self, value: str, kind: str, type_string: str, occ: int = 0) -> dict:
        snippet = f'"{value}"' if kind == "string" else value
        return {
            "id": self.nid(),
            "kind": kind,
            "nodeType": "Literal",
            "src": self.at(snippet, occ),
            "typeDescriptions": {"typeString": type_string},
            "value": value,
        }

    def index(self, base: dict, idx: dict, type_string: str, snippet: str, occ: int = 0) -> dict:
        return {
            "id": self.nid(),
            "baseExpression": base,
            "indexExpression": idx,
            "nodeType": "IndexAccess",
            "src": self.at(snippet, occ),
            "typeDescriptions": {"typeString": type_string},
        }

    def binop(self, operator: str, left: dict, right: dict, type_string: str, snippet: str, occ: int = 0) -> dict:
        return {
            "id": self.nid(),
            "leftExpression": left,
            "nodeType": "BinaryOperation",
            "operator": operator,
            "rightExpression": right,
            "src": self.at(snippet, occ),
            "typeDescriptions": {"typeString": type_string},
        }

    def assign(self, lhs: dict, rhs: dict, snippet: str, operator: str = "=", occ: int = 0) -> dict:
        return {
            "id": self.nid(),
            "leftHandSide": lhs,
            "nodeType": "Assignment",
            "operator": operator,
            "rightHandSide": rhs,
            "src": self.at(snippet, occ),
            "typeDescriptions": {"typeString": lhs.get("typeDescriptions", {}).get("typeString", "")},
        }

    def conversion(self, type_name: str, argument: dict, snippet: str, occ: int = 0, mutability: str | None = None) -> dict:
        src = self.at(snippet, occ)
        type_string = ADDRESS_PAYABLE if type_name == "payable" else type_name
        elementary = {
            "id": self.nid(),
            "name": type_name,
            "nodeType": "ElementaryTypeName",
            "src": src.split(":")[0] + f":{len(type_name)}:0",
        }
        if mutability:
            elementary["stateMutability"] = mutability
        return {
            "id": self.nid(),
            "arguments": [argument],
            "expression": {
                "id": self.nid(),
                "nodeType": "ElementaryTypeNameExpression",
                "src": elementary["src"],
                "typeDescriptions": {"typeString": f"type({type_string})"},
                "typeName": elementary,
            },
            "kind": "typeConversion",
            "names": [],
            "nodeType": "FunctionCall",
            "src": src,
            "tryCall": False,
            "typeDescriptions": {"typeString": type_string},
        }

    def payable_conv(self, argument: dict, snippet: str, occ: int = 0) -> dict:
        return self.conversion("payable", argument, snippet, occ, mutability="payable")

    def call(self, callee: dict, arguments: list[dict], type_string: str, snippet: str, occ: int = 0) -> dict:
        return {
            "id": self.nid(),
            "arguments": arguments,
            "expression": callee,
            "kind": "functionCall",
            "names": [],
            "nodeType": "FunctionCall",
            "src": self.at(snippet, occ),
            "tryCall": False,
            "typeDescriptions": {"typeString": type_string},
        }

    def call_options(self, callee: dict, names: list[str], options: list[dict], snippet: str, occ: int = 0) -> dict:
        return {
            "id": self.nid(),
            "expression": callee,
            "names": names,
            "nodeType": "FunctionCallOptions",
            "options": options,
            "src": self.at(snippet, occ),
            "typeDescriptions": {
                "typeString": "function (bytes memory) payable returns (bool,bytes memory)"
            },
        }

    def builtin(self, name: str, occ: int = 0) -> dict:
        return {
            "id": self.nid(),
            "name": name,
            "nodeType": "Identifier",
            "src": self.at(name, occ),
            "typeDescriptions": {"typeString": f"function {name}"},
        }

    # -- statements --

    def expr_stmt(self, src: str, expression: dict) -> dict:
        return {
            "id": self.nid(),
            "expression": expression,
            "nodeType": "ExpressionStatement",
            "src": src,
        }

    def var_decl_stmt(self, src: str, declarations: list[dict | None], initial: dict | None) -> dict:
        return {
            "id": self.nid(),
            "assignments": [d["id"] if d else None for d in declarations],
            "declarations": declarations,
            "initialValue": initial,
            "nodeType": "VariableDeclarationStatement",
            "src": src,
        }

    def ret(self, src: str, expression: dict | None) -> dict:
        return {
            "id": self.nid(),
            "expression": expression,
            "nodeType": "Return",
            "src": src,
        }

    def if_stmt(self, src: str, condition: dict, true_body: dict, false_body: dict | None = None) -> dict:
        node = {
            "id": self.nid(),
            "condition": condition,
            "nodeType": "IfStatement",
            "src": src,
            "trueBody": true_body,
        }
        if false_body is not None:
            node["falseBody"] = false_body
        return node

    def placeholder(self) -> dict:
        return {"id": self.nid(), "nodeType": "PlaceholderStatement", "src": self.anywhere("_;")}

    def block(self, statements: list[dict], src: str = "0:0:0") -> dict:
        return {"id": self.nid(), "nodeType": "Block", "src": src, "statements": statements}

    # -- declarations --

    def local_var(self, name: str, type_string: str, type_name: str) -> dict:
        return {
            "constant": False,
            "id": self.nid(),
            "mutability": "mutable",
            "name": name,
            "nameLocation": self.at(name),
            "nodeType": "VariableDeclaration",
            "src": self.at(f"{type_name} {name}"),
            "stateVariable": False,
            "storageLocation": "default",
            "typeDescriptions": {"typeString": type_string},
            "typeName": {
                "id": self.nid(),
                "name": type_name,
                "nodeType": "ElementaryTypeName",
                "src": self.at(type_name),
                "typeDescriptions": {"typeString": type_string},
            },
            "visibility": "internal",
        }

    def state_var(self, declaration: str, name: str, type_string: str, visibility: str = "private") -> dict:
        src = self.anywhere(declaration)
        self.current_span = (int(src.split(":")[0]), len(declaration))
        return {
            "constant": False,
            "id": self.nid(),
            "mutability": "mutable",
            "name": name,
            "nameLocation": self.at(name),
            "nodeType": "VariableDeclaration",
            "src": src,
            "stateVariable": True,
            "storageLocation": "default",
            "typeDescriptions": {"typeString": type_string},
            "visibility": visibility,
        }

    def param(self, name: str, type_string: str, type_name: str, occ: int = 0) -> dict:
        src = self.anywhere(f"{type_name} {name}", occ)
        return {
            "constant": False,
            "id": self.nid(),
            "mutability": "mutable",
            "name": name,
            "nameLocation": src.split(":")[0] + f":{len(name)}:0",
            "nodeType": "VariableDeclaration",
            "src": src,
            "stateVariable": False,
            "storageLocation": "default",
            "typeDescriptions": {"typeString": type_string},
            "visibility": "internal",
        }

    def param_list(self, parameters: list[dict]) -> dict:
        return {"id": self.nid(), "nodeType": "ParameterList", "parameters": parameters, "src": "0:0:0"}

    def unnamed_return(self, type_string: str, type_name: str, occ: int = 0) -> dict:
        return {
            "constant": False,
            "id": self.nid(),
            "mutability": "mutable",
            "name": "",
            "nodeType": "VariableDeclaration",
            "src": self.anywhere(f"returns ({type_name})", occ),
            "stateVariable": False,
            "storageLocation": "default",
            "typeDescriptions": {"typeString": type_string},
            "visibility": "internal",
        }

    def function(
        self,
        signature: str,
        name: str,
        kind: str,
        visibility: str,
        mutability: str,
        parameters: list[dict],
        returns: list[dict],
        statements: list[dict],
        modifiers: list[str] = (),
    ) -> dict:
        src = self.anywhere(signature)
        return {
            "body": self.block(statements, src),
            "id": self.nid(),
            "implemented": True,
            "kind": kind,
            "modifiers": [
                {
                    "id": self.nid(),
                    "kind": "modifierInvocation",
                    "modifierName": {
                        "id": self.nid(),
                        "name": mod,
                        "nodeType": "IdentifierPath",
                        "src": self.anywhere(f" {mod}").split(":")[0] + f":{len(mod)}:0",
                    },
                    "nodeType": "ModifierInvocation",
                    "src": self.anywhere(f" {mod}").split(":")[0] + f":{len(mod)}:0",
                }
                for mod in modifiers
            ],
            "name": name,
            "nameLocation": "0:0:0" if not name else self.anywhere(signature).split(":")[0] + f":{len(name)}:0",
            "nodeType": "FunctionDefinition",
            "parameters": self.param_list(parameters),
            "returnParameters": self.param_list(returns),
            "scope": 0,
            "src": src,
            "stateMutability": mutability,
            "virtual": False,
            "visibility": visibility,
        }

    def modifier(self, signature: str, name: str, statements: list[dict]) -> dict:
        src = self.anywhere(signature)
        return {
            "body": self.block(statements, src),
            "id": self.nid(),
            "name": name,
            "nameLocation": src.split(":")[0] + f":{len(name)}:0",
            "nodeType": "ModifierDefinition",
            "parameters": self.param_list([]),
            "src": src,
            "virtual": False,
            "visibility": "internal",
        }

    def contract(self, name: str, nodes: list[dict]) -> dict:
        start = self.source.index(f"contract {name}")
        end = self.source.rindex("}") + 1
        cid = self.nid()
        return {
            "abstract": False,
            "baseContracts": [],
            "canonicalName": name,
            "contractDependencies": [],
            "contractKind": "contract",
            "fullyImplemented": True,
            "id": cid,
            "linearizedBaseContracts": [cid],
            "name": name,
            "nameLocation": f"{start + len('contract ')}:{len(name)}:0",
            "nodeType": "ContractDefinition",
            "nodes": nodes,
            "scope": 0,
            "src": f"{start}:{end - start}:0",
            "usedErrors": [],
            "usedEvents": [],
        }

    def unit(self, contract_node: dict) -> dict:
        pragma_snippet = "pragma solidity 0.8.29;"
        pragma_start = self.source.index(pragma_snippet)
        return {
            "absolutePath": self.path,
            "exportedSymbols": {contract_node["name"]: [contract_node["id"]]},
            "id": self.nid(),
            "license": "MIT",
            "nodeType": "SourceUnit",
            "nodes": [
                {
                    "id": self.nid(),
                    "literals": ["solidity", "0.8", ".29"],
                    "nodeType": "PragmaDirective",
                    "src": f"{pragma_start}:{len(pragma_snippet)}:0",
                },
                contract_node,
            ],
            "src": f"0:{len(self.source)}:0",
        }


# --- shared statement recipes ----------------------------------------------


def only_owner_modifier(b: Builder) -> dict:
    require_stmt = (
        "require(\n"
        "            msg.sender == _owner,\n"
        '            "Only the owner of the contract can access this"\n'
        "        );"
    )
    src = b.span(require_stmt)
    call = b.call(
        b.builtin("require"),
        [
            b.binop("==", b.msg("sender"), b.ident("_owner", ADDRESS), BOOL, "msg.sender == _owner"),
            b.lit("Only the owner of the contract can access this", "string", "literal_string"),
        ],
        "tuple()",
        require_stmt,
    )
    return b.modifier(
        "modifier onlyOwner()",
        "onlyOwner",
        [b.expr_stmt(src, call), b.placeholder()],
    )


def owner_constructor(b: Builder) -> dict:
    src = b.span("_owner = msg.sender;")
    stmt = b.expr_stmt(
        src,
        b.assign(b.ident("_owner", ADDRESS), b.msg("sender"), "_owner = msg.sender"),
    )
    return b.function("constructor()", "", "constructor", "public", "nonpayable", [], [], [stmt])


def sender_transfer(b: Builder, argument: dict, snippet: str, occ: int = 0) -> dict:
    """payable(msg.sender).transfer(<argument>)"""
    conv = b.payable_conv(b.msg("sender"), "payable(msg.sender)", occ)
    callee = b.member(conv, "transfer", "function (uint256)", "payable(msg.sender).transfer", occ)
    return b.call(callee, [argument], "tuple()", snippet, occ)


# --- fixtures ----------------------------------------------------------------


def build_reentrancy(b: Builder, cei_order: bool) -> dict:
    balance = b.state_var(
        "mapping(address => uint) private balance", "balance", "mapping(address => uint256)"
    )

    src = b.span("balance[msg.sender] = msg.value;")
    deposit_body = [
        b.expr_stmt(
            src,
            b.assign(
                b.index(
                    b.ident("balance", "mapping(address => uint256)"),
                    b.msg("sender"),
                    UINT,
                    "balance[msg.sender]",
                ),
                b.msg("value"),
                "balance[msg.sender] = msg.value",
            ),
        )
    ]
    deposit = b.function(
        "function deposit() external payable",
        "deposit",
        "function",
        "external",
        "payable",
        [],
        [],
        deposit_body,
    )

    src = b.span("uint addrBal = balance[msg.sender];")
    read_stmt = b.var_decl_stmt(
        src,
        [b.local_var("addrBal", UINT, "uint")],
        b.index(
            b.ident("balance", "mapping(address => uint256)"),
            b.msg("sender"),
            UINT,
            "balance[msg.sender]",
        ),
    )
    src = b.span("payable(msg.sender).transfer(addrBal);")
    transfer_stmt = b.expr_stmt(
        src, sender_transfer(b, b.ident("addrBal", UINT), "payable(msg.sender).transfer(addrBal)")
    )
    src = b.span("balance[msg.sender] = 0;")
    zero_stmt = b.expr_stmt(
        src,
        b.assign(
            b.index(
                b.ident("balance", "mapping(address => uint256)"),
                b.msg("sender"),
                UINT,
                "balance[msg.sender]",
            ),
            b.lit("0", "number", UINT),
            "balance[msg.sender] = 0",
        ),
    )
    withdraw_body = (
        [read_stmt, zero_stmt, transfer_stmt] if cei_order else [read_stmt, transfer_stmt, zero_stmt]
    )
    withdraw = b.function(
        "function withdraw() external",
        "withdraw",
        "function",
        "external",
        "nonpayable",
        [],
        [],
        withdraw_body,
    )
    return b.unit(b.contract("ReentrancySimple", [balance, deposit, withdraw]))


def build_complex_fallback(b: Builder, expensive_receive: bool) -> dict:
    owner = b.state_var("address private _owner", "_owner", ADDRESS)
    donor = b.state_var("address private _latestDonor", "_latestDonor", ADDRESS)
    modifier = only_owner_modifier(b)
    constructor = owner_constructor(b)

    receive_body = []
    if expensive_receive:
        src = b.span("_latestDonor = msg.sender;")
        receive_body = [
            b.expr_stmt(
                src,
                b.assign(
                    b.ident("_latestDonor", ADDRESS), b.msg("sender"), "_latestDonor = msg.sender"
                ),
            )
        ]
    receive = b.function(
        "receive() external payable", "", "receive", "external", "payable", [], [], receive_body
    )

    src = b.span("payable(msg.sender).transfer(address(this).balance);")
    this_balance = b.member(
        b.conversion(
            "address",
            b.ident("this", "contract ComplexFallback"),
            "address(this)",
        ),
        "balance",
        UINT,
        "address(this).balance",
    )
    withdraw = b.function(
        "function withdrawFunding() external onlyOwner",
        "withdrawFunding",
        "function",
        "external",
        "nonpayable",
        [],
        [],
        [
            b.expr_stmt(
                src,
                sender_transfer(
                    b, this_balance, "payable(msg.sender).transfer(address(this).balance)"
                ),
            )
        ],
        modifiers=["onlyOwner"],
    )

    src = b.span("return _latestDonor;")
    getter = b.function(
        "function getLatestDonor() external view onlyOwner returns (address)",
        "getLatestDonor",
        "function",
        "external",
        "view",
        [],
        [b.unnamed_return(ADDRESS, "address")],
        [b.ret(src, b.ident("_latestDonor", ADDRESS))],
        modifiers=["onlyOwner"],
    )
    return b.unit(
        b.contract("ComplexFallback", [owner, donor, modifier, constructor, receive, withdraw, getter])
    )


def build_access_control(b: Builder, guarded_cancel: bool) -> dict:
    employees = b.state_var(
        "mapping(address => uint256) private _employees",
        "_employees",
        "mapping(address => uint256)",
    )
    owner = b.state_var("address private _owner", "_owner", ADDRESS)
    modifier = only_owner_modifier(b)
    constructor = owner_constructor(b)

    src = b.span("_employees[employeeAddress] = msg.value;")
    send_salary = b.function(
        "function sendSalary(address employeeAddress) external payable onlyOwner",
        "sendSalary",
        "function",
        "external",
        "payable",
        [b.param("employeeAddress", ADDRESS, "address")],
        [],
        [
            b.expr_stmt(
                src,
                b.assign(
                    b.index(
                        b.ident("_employees", "mapping(address => uint256)"),
                        b.ident("employeeAddress", ADDRESS),
                        UINT,
                        "_employees[employeeAddress]",
                    ),
                    b.msg("value"),
                    "_employees[employeeAddress] = msg.value",
                ),
            )
        ],
        modifiers=["onlyOwner"],
    )

    require_stmt = (
        "require(\n"
        "            _employees[msg.sender] > 0,\n"
        '            "You cannot receive your salary at this moment"\n'
        "        );"
    )
    src = b.span(require_stmt)
    salary_guard = b.expr_stmt(
        src,
        b.call(
            b.builtin("require"),
            [
                b.binop(
                    ">",
                    b.index(
                        b.ident("_employees", "mapping(address => uint256)"),
                        b.msg("sender"),
                        UINT,
                        "_employees[msg.sender]",
                    ),
                    b.lit("0", "number", UINT),
                    BOOL,
                    "_employees[msg.sender] > 0",
                ),
                b.lit("You cannot receive your salary at this moment", "string", "literal_string"),
            ],
            "tuple()",
            require_stmt,
        ),
    )
    src = b.span("_employees[msg.sender] = 0;")
    salary_zero = b.expr_stmt(
        src,
        b.assign(
            b.index(
                b.ident("_employees", "mapping(address => uint256)"),
                b.msg("sender"),
                UINT,
                "_employees[msg.sender]",
            ),
            b.lit("0", "number", UINT),
            "_employees[msg.sender] = 0",
        ),
    )
    src = b.span("payable(msg.sender).transfer(_employees[msg.sender]);")
    salary_pay = b.expr_stmt(
        src,
        sender_transfer(
            b,
            b.index(
                b.ident("_employees", "mapping(address => uint256)"),
                b.msg("sender"),
                UINT,
                "_employees[msg.sender]",
            ),
            "payable(msg.sender).transfer(_employees[msg.sender])",
        ),
    )
    get_salary = b.function(
        "function getSalary() external",
        "getSalary",
        "function",
        "external",
        "nonpayable",
        [],
        [],
        [salary_guard, salary_zero, salary_pay],
    )

    src = b.span("selfdestruct(payable(msg.sender));")
    cancel = b.function(
        "function cancelContract() external",
        "cancelContract",
        "function",
        "external",
        "nonpayable",
        [],
        [],
        [
            b.expr_stmt(
                src,
                b.call(
                    b.builtin("selfdestruct"),
                    [b.payable_conv(b.msg("sender"), "payable(msg.sender)")],
                    "tuple()",
                    "selfdestruct(payable(msg.sender))",
                ),
            )
        ],
        modifiers=["onlyOwner"] if guarded_cancel else [],
    )
    return b.unit(
        b.contract(
            "UnprotectedSelfdestruct",
            [employees, owner, modifier, constructor, send_salary, get_salary, cancel],
        )
    )


def build_fee_schedule(b: Builder, time_dependent: bool) -> dict:
    base_fee = b.state_var("uint256 private baseFee", "baseFee", UINT)

    src = b.span("baseFee = fee;")
    constructor = b.function(
        "constructor(uint256 fee)",
        "",
        "constructor",
        "public",
        "nonpayable",
        [b.param("fee", UINT, "uint256")],
        [],
        [
            b.expr_stmt(
                src, b.assign(b.ident("baseFee", UINT), b.ident("fee", UINT), "baseFee = fee")
            )
        ],
    )

    statements = []
    if time_dependent:
        header = "if (block.timestamp % 86400 < 43200) {"
        src = b.span(header)
        condition = b.binop(
            "<",
            b.binop(
                "%",
                b.block_member("timestamp"),
                b.lit("86400", "number", UINT),
                UINT,
                "block.timestamp % 86400",
            ),
            b.lit("43200", "number", UINT),
            BOOL,
            "block.timestamp % 86400 < 43200",
        )
        src_early = b.span("return baseFee;")
        early = b.ret(src_early, b.ident("baseFee", UINT))
        statements.append(b.if_stmt(b.anywhere(header), condition, b.block([early])))
        src = b.span("return baseFee * 2;")
        statements.append(
            b.ret(
                src,
                b.binop(
                    "*",
                    b.ident("baseFee", UINT),
                    b.lit("2", "number", UINT),
                    UINT,
                    "baseFee * 2",
                ),
            )
        )
    else:
        src = b.span("return baseFee;")
        statements.append(b.ret(src, b.ident("baseFee", UINT)))

    current_fee = b.function(
        "function currentFee() external view returns (uint256)",
        "currentFee",
        "function",
        "external",
        "view",
        [],
        [b.unnamed_return(UINT, "uint256")],
        statements,
    )
    return b.unit(b.contract("FeeSchedule", [base_fee, constructor, current_fee]))


def build_unchecked_payout(b: Builder, guarded: bool) -> dict:
    statements = []
    if guarded:
        guard = 'require(amount <= address(this).balance, "amount exceeds balance");'
        src = b.span(guard)
        this_balance = b.member(
            b.conversion("address", b.ident("this", "contract UncheckedPayout"), "address(this)"),
            "balance",
            UINT,
            "address(this).balance",
        )
        statements.append(
            b.expr_stmt(
                src,
                b.call(
                    b.builtin("require"),
                    [
                        b.binop(
                            "<=",
                            b.ident("amount", UINT),
                            this_balance,
                            BOOL,
                            "amount <= address(this).balance",
                        ),
                        b.lit("amount exceeds balance", "string", "literal_string"),
                    ],
                    "tuple()",
                    guard,
                ),
            )
        )
    payout = 'payable(msg.sender).call{value: amount}("");'
    src = b.span(payout)
    callee = b.call_options(
        b.member(
            b.payable_conv(b.msg("sender"), "payable(msg.sender)"),
            "call",
            "function (bytes memory) payable returns (bool,bytes memory)",
            "payable(msg.sender).call",
        ),
        ["value"],
        [b.ident("amount", UINT)],
        "payable(msg.sender).call{value: amount}",
    )
    statements.append(
        b.expr_stmt(
            src,
            b.call(
                callee,
                [b.lit("", "string", "literal_string")],
                "tuple(bool,bytes memory)",
                'payable(msg.sender).call{value: amount}("")',
            ),
        )
    )
    pay = b.function(
        "function pay(uint256 amount) external",
        "pay",
        "function",
        "external",
        "nonpayable",
        [b.param("amount", UINT, "uint256")],
        [],
        statements,
    )
    receive = b.function(
        "receive() external payable", "", "receive", "external", "payable", [], [], []
    )
    return b.unit(b.contract("UncheckedPayout", [pay, receive]))


def build_strict_deposits(b: Builder, uses_assert: bool) -> dict:
    total = b.state_var("uint256 private total", "total", UINT)

    if uses_assert:
        guard_snippet = "assert(amount > 0);"
        src = b.span(guard_snippet)
        guard_call = b.call(
            b.builtin("assert"),
            [b.binop(">", b.ident("amount", UINT), b.lit("0", "number", UINT), BOOL, "amount > 0")],
            "tuple()",
            "assert(amount > 0)",
        )
    else:
        guard_snippet = 'require(amount > 0, "amount must be positive");'
        src = b.span(guard_snippet)
        guard_call = b.call(
            b.builtin("require"),
            [
                b.binop(">", b.ident("amount", UINT), b.lit("0", "number", UINT), BOOL, "amount > 0"),
                b.lit("amount must be positive", "string", "literal_string"),
            ],
            "tuple()",
            guard_snippet,
        )
    guard_stmt = b.expr_stmt(src, guard_call)

    src = b.span("total += amount;")
    accumulate = b.expr_stmt(
        src,
        b.assign(b.ident("total", UINT), b.ident("amount", UINT), "total += amount", operator="+="),
    )
    add = b.function(
        "function add(uint256 amount) external",
        "add",
        "function",
        "external",
        "nonpayable",
        [b.param("amount", UINT, "uint256")],
        [],
        [guard_stmt, accumulate],
    )
    return b.unit(b.contract("StrictDeposits", [total, add]))


def build_reward_split(b: Builder, guarded: bool) -> dict:
    holders = b.state_var("uint256 private holders", "holders", UINT)

    src = b.span("holders += 1;")
    register = b.function(
        "function register() external",
        "register",
        "function",
        "external",
        "nonpayable",
        [],
        [],
        [
            b.expr_stmt(
                src,
                b.assign(
                    b.ident("holders", UINT), b.lit("1", "number", UINT), "holders += 1", operator="+="
                ),
            )
        ],
    )

    statements = []
    if guarded:
        guard = 'require(holders > 0, "no holders registered");'
        src = b.span(guard)
        statements.append(
            b.expr_stmt(
                src,
                b.call(
                    b.builtin("require"),
                    [
                        b.binop(
                            ">", b.ident("holders", UINT), b.lit("0", "number", UINT), BOOL, "holders > 0"
                        ),
                        b.lit("no holders registered", "string", "literal_string"),
                    ],
                    "tuple()",
                    guard,
                ),
            )
        )
    src = b.span("return pot / holders;")
    statements.append(
        b.ret(
            src,
            b.binop("/", b.ident("pot", UINT), b.ident("holders", UINT), UINT, "pot / holders"),
        )
    )
    per_share = b.function(
        "function perShare(uint256 pot) external view returns (uint256)",
        "perShare",
        "function",
        "external",
        "view",
        [b.param("pot", UINT, "uint256")],
        [b.unnamed_return(UINT, "uint256")],
        statements,
    )
    return b.unit(b.contract("RewardSplit", [holders, register, per_share]))


FIXTURES = {
    "reentrancy/vulnerable.sol": lambda b: build_reentrancy(b, cei_order=False),
    "reentrancy/safe.sol": lambda b: build_reentrancy(b, cei_order=True),
    "complex_fallback/vulnerable.sol": lambda b: build_complex_fallback(b, expensive_receive=True),
    "complex_fallback/safe.sol": lambda b: build_complex_fallback(b, expensive_receive=False),
    "access_control/vulnerable.sol": lambda b: build_access_control(b, guarded_cancel=False),
    "access_control/safe.sol": lambda b: build_access_control(b, guarded_cancel=True),
    "block_env/vulnerable.sol": lambda b: build_fee_schedule(b, time_dependent=True),
    "block_env/safe.sol": lambda b: build_fee_schedule(b, time_dependent=False),
    "param_validation/vulnerable.sol": lambda b: build_unchecked_payout(b, guarded=False),
    "param_validation/safe.sol": lambda b: build_unchecked_payout(b, guarded=True),
    "faulty_assert/vulnerable.sol": lambda b: build_strict_deposits(b, uses_assert=True),
    "faulty_assert/safe.sol": lambda b: build_strict_deposits(b, uses_assert=False),
    "division_by_zero/vulnerable.sol": lambda b: build_reward_split(b, guarded=False),
    "division_by_zero/safe.sol": lambda b: build_reward_split(b, guarded=True),
}


def main() -> int:
    for rel_path, build in FIXTURES.items():
        source_path = FIXTURES_DIR / rel_path
        source = source_path.read_text(encoding="utf-8")
        builder = Builder(source_path.name, source)
        ast = build(builder)
        snapshot = {"sources": {source_path.name: {"id": 0, "ast": ast}}}
        out_path = source_path.parent / "ast" / (source_path.stem + ".json")
        out_path.parent.mkdir(exist_ok=True)
        out_path.write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"wrote {out_path.relative_to(FIXTURES_DIR)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
