"""Layered pipeline configuration: CLI flag > environment > file > default.

The config file uses the same flat key/value format as the template
manifests, with an ``[llm]`` section for the client settings.  Environment
variables map by upper-snake name under the ``SCPROOF_`` prefix
(``SCPROOF_BACKEND``, ``SCPROOF_LLM_MODE``, ...).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .detectors import DefectKind, KIND_ORDER
from .errors import ConfigInvalid
from .kvdoc import as_list, load_kv
from .llm import LlmConfig

ENV_PREFIX = "SCPROOF_"

BACKEND_MODES = ("auto", "forge", "kontrol", "mock")
LLM_MODES = ("live", "offline_stub", "disabled")

_DEFAULTS = {
    "defects": ",".join(kind.value for kind in KIND_ORDER),
    "backend": "auto",
    "offline": "false",
    "solc_path": "solc",
    "forge_path": "forge",
    "kontrol_path": "kontrol",
    "workdir": "scproof-out",
    "fuzz_runs": "256",
    "job_cap": "2",
    "template_dir": "",
    "stub_dir": "",
    "allow_local_tools": "false",
    "no_compile_check": "false",
    "mock_script": "",
    "forge_std_path": "",
    "solc_version": "0.8.29",
}

_LLM_DEFAULTS = {
    "endpoint_url": "",
    "model_id": "",
    "api_key_env_name": "SCPROOF_API_KEY",
    "temperature": "0",
    "max_output_tokens": "4096",
    "request_timeout": "60",
    "mode": "disabled",
}


@dataclass
class PipelineConfig:
    enabled_defects: set[DefectKind]
    backend_mode: str
    offline: bool
    llm: LlmConfig
    solc_path: str
    forge_path: str
    kontrol_path: str
    workdir: str
    fuzz_runs: int
    job_cap: int
    template_dir: str
    stub_dir: str
    allow_local_tools: bool = False
    no_compile_check: bool = False
    mock_script: str = ""
    forge_std_path: str = ""
    solc_version: str = "0.8.29"

    def to_dict(self) -> dict:
        return {
            "enabled_defects": sorted(kind.value for kind in self.enabled_defects),
            "backend_mode": self.backend_mode,
            "offline": self.offline,
            "llm": self.llm.to_dict(),
            "solc_path": self.solc_path,
            "forge_path": self.forge_path,
            "kontrol_path": self.kontrol_path,
            "workdir": self.workdir,
            "fuzz_runs": self.fuzz_runs,
            "job_cap": self.job_cap,
            "template_dir": self.template_dir,
            "stub_dir": self.stub_dir,
            "allow_local_tools": self.allow_local_tools,
            "no_compile_check": self.no_compile_check,
            "mock_script": self.mock_script,
            "forge_std_path": self.forge_std_path,
            "solc_version": self.solc_version,
        }

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(
    file_path: str | Path | None = None,
    cli_overrides: dict | None = None,
    env: dict | None = None,
) -> PipelineConfig:
    cli_overrides = {k: v for k, v in (cli_overrides or {}).items() if v is not None}
    env = os.environ if env is None else env
    file_top: dict[str, str] = {}
    file_llm: dict[str, str] = {}
    if file_path:
        doc = load_kv(file_path)
        file_top = doc.top
        for section in doc.sections("llm"):
            file_llm.update(section)
        unknown = set(file_top) - set(_DEFAULTS)
        if unknown:
            raise ConfigInvalid(sorted(unknown)[0], "unknown configuration key")

    def pick(key: str) -> str:
        if key in cli_overrides:
            return str(cli_overrides[key])
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            return env[env_key]
        if key in file_top:
            return file_top[key]
        return _DEFAULTS[key]

    def pick_llm(key: str) -> str:
        if f"llm_{key}" in cli_overrides:
            return str(cli_overrides[f"llm_{key}"])
        env_key = f"{ENV_PREFIX}LLM_{key.upper()}"
        if env_key in env:
            return env[env_key]
        if key in file_llm:
            return file_llm[key]
        return _LLM_DEFAULTS[key]

    llm = LlmConfig(
        endpoint_url=pick_llm("endpoint_url"),
        model_id=pick_llm("model_id"),
        api_key_env_name=pick_llm("api_key_env_name"),
        temperature=_number("llm.temperature", pick_llm("temperature")),
        max_output_tokens=_positive_int("llm.max_output_tokens", pick_llm("max_output_tokens")),
        request_timeout=_number("llm.request_timeout", pick_llm("request_timeout")),
        mode=pick_llm("mode"),
    )
    config = PipelineConfig(
        enabled_defects=_parse_defects(pick("defects")),
        backend_mode=pick("backend"),
        offline=_parse_bool("offline", pick("offline")),
        llm=llm,
        solc_path=pick("solc_path"),
        forge_path=pick("forge_path"),
        kontrol_path=pick("kontrol_path"),
        workdir=pick("workdir"),
        fuzz_runs=_positive_int("fuzz_runs", pick("fuzz_runs")),
        job_cap=_positive_int("job_cap", pick("job_cap")),
        template_dir=pick("template_dir"),
        stub_dir=pick("stub_dir"),
        allow_local_tools=_parse_bool("allow_local_tools", pick("allow_local_tools")),
        no_compile_check=_parse_bool("no_compile_check", pick("no_compile_check")),
        mock_script=pick("mock_script"),
        forge_std_path=pick("forge_std_path"),
        solc_version=pick("solc_version"),
    )
    _validate(config)
    return config


def _validate(config: PipelineConfig) -> None:
    if config.backend_mode not in BACKEND_MODES:
        raise ConfigInvalid("backend", f"must be one of {BACKEND_MODES}")
    if config.llm.mode not in LLM_MODES:
        raise ConfigInvalid("llm.mode", f"must be one of {LLM_MODES}")
    if not 0.0 <= config.llm.temperature <= 2.0:
        raise ConfigInvalid("llm.temperature", "must lie in [0, 2]")
    if config.offline:
        if config.llm.mode == "live":
            raise ConfigInvalid("llm.mode", "live mode is not allowed when offline")
        if config.backend_mode in ("forge", "kontrol") and not config.allow_local_tools:
            raise ConfigInvalid(
                "backend",
                "offline runs only use the mock backend unless allow_local_tools is set",
            )


def _parse_defects(value: str) -> set[DefectKind]:
    names = as_list(value)
    if not names:
        return set()
    kinds = set()
    for name in names:
        try:
            kinds.add(DefectKind(name))
        except ValueError:
            raise ConfigInvalid("defects", f"unknown defect kind {name!r}")
    return kinds


def _parse_bool(key: str, value) -> bool:
    if isinstance(value, bool):
        return value
    lowered = str(value).strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigInvalid(key, f"not a boolean: {value!r}")


def _positive_int(key: str, value) -> int:
    try:
        number = int(str(value))
    except ValueError:
        raise ConfigInvalid(key, f"not an integer: {value!r}")
    if number < 1:
        raise ConfigInvalid(key, "must be positive")
    return number


def _number(key: str, value) -> float:
    try:
        return float(str(value))
    except ValueError:
        raise ConfigInvalid(key, f"not a number: {value!r}")
