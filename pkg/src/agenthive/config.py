"""Run-configuration files (TOML).

Example::

    [protocol]
    n = 5
    k_max = 5
    t_debate = 2
    tau_agree = 0.8
    seed = 7
    scheduler = "sequential"

    [ablation]
    cot = true
    role_assignment = true
    weighted_voting = true

    [backend]
    kind = "scripted"

    [[backend.agents]]
    behavior = "OracleBiased"
    p_correct = 0.7

An LLM backend instead sets ``kind = "llm"`` plus ``base_url`` and
``model`` (and optionally ``temperature``, ``max_tokens``, ``timeout``,
``max_attempts``, ``backoff``, ``backoff_factor``, ``max_concurrency``,
``prompt_dir``, ``include_context``, ``reporter_llm``). The API key is read
from ``HIVE_API_KEY``.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .agents import ScriptedBehavior
from .engine import LLMBackendConfig, ProtocolConfig, ScriptedBackendConfig
from .errors import ConfigInvalid
from .llm.client import EndpointConfig

_PROTOCOL_KEYS = {"n", "k_max", "t_debate", "tau_agree", "seed", "scheduler"}
_ABLATION_KEYS = {"cot", "role_assignment", "weighted_voting"}
_ENDPOINT_KEYS = {
    "base_url", "model", "temperature", "max_tokens", "timeout",
    "max_attempts", "backoff", "backoff_factor", "max_concurrency",
}
_LLM_EXTRA_KEYS = {"prompt_dir", "include_context", "reporter_llm"}


def _check_keys(section: str, data: dict[str, Any], allowed: set[str]) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigInvalid(f"unknown keys in [{section}]: {sorted(unknown)}")


def parse_backend(data: dict[str, Any], base_dir: Path | None = None) -> ScriptedBackendConfig | LLMBackendConfig:
    data = dict(data)
    kind = data.pop("kind", None)
    if kind == "scripted":
        _check_keys("backend", data, {"agents"})
        agents = data.get("agents") or []
        if not agents:
            raise ConfigInvalid("scripted backend needs at least one [[backend.agents]] entry")
        return ScriptedBackendConfig(tuple(ScriptedBehavior.from_dict(a) for a in agents))
    if kind == "llm":
        _check_keys("backend", data, _ENDPOINT_KEYS | _LLM_EXTRA_KEYS)
        try:
            endpoint = EndpointConfig(**{k: v for k, v in data.items() if k in _ENDPOINT_KEYS})
        except TypeError as exc:
            raise ConfigInvalid(f"[backend]: {exc}") from None
        prompt_dir = data.get("prompt_dir")
        if prompt_dir is not None and base_dir is not None:
            prompt_dir = str((base_dir / prompt_dir).resolve())
        return LLMBackendConfig(
            endpoint=endpoint,
            prompt_dir=prompt_dir,
            include_context=bool(data.get("include_context", True)),
            reporter_llm=bool(data.get("reporter_llm", True)),
        )
    raise ConfigInvalid(f"[backend] kind must be 'llm' or 'scripted', got {kind!r}")


def config_from_dict(data: dict[str, Any], base_dir: Path | None = None) -> ProtocolConfig:
    _check_keys("top level", data, {"protocol", "ablation", "backend"})
    protocol = data.get("protocol", {})
    ablation = data.get("ablation", {})
    _check_keys("protocol", protocol, _PROTOCOL_KEYS)
    _check_keys("ablation", ablation, _ABLATION_KEYS)
    backend = parse_backend(data["backend"], base_dir) if "backend" in data else None
    try:
        return ProtocolConfig(**protocol, **ablation, backend=backend)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from None


def load_config(path: str | Path) -> ProtocolConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigInvalid(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from None
    return config_from_dict(data, path.parent)


def config_to_dict(config: ProtocolConfig) -> dict[str, Any]:
    """Plain-data echo of a config, e.g. for reports."""
    out: dict[str, Any] = {
        "protocol": {k: getattr(config, k) for k in sorted(_PROTOCOL_KEYS)},
        "ablation": {k: getattr(config, k) for k in sorted(_ABLATION_KEYS)},
    }
    backend = config.backend
    if isinstance(backend, ScriptedBackendConfig):
        out["backend"] = {"kind": "scripted", "agents": [b.to_dict() for b in backend.agents]}
    elif isinstance(backend, LLMBackendConfig):
        ep = backend.endpoint
        out["backend"] = {
            "kind": "llm",
            **{k: getattr(ep, k) for k in sorted(_ENDPOINT_KEYS)},
            "include_context": backend.include_context,
            "reporter_llm": backend.reporter_llm,
        }
    return out
