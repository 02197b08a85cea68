"""Operator configuration.

The knobs that must stay out of reach of mediated calls live here: which
paths the tamper guard protects, the globally safe port range, the network
allowlist, whether SGR color codes survive sanitization, and the
auto-approve switch. The file format is JSON. Nothing in this module is
writable through a tool call; the gateway only ever reads the values it was
constructed with.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional


class ConfigError(ValueError):
    pass


_KNOWN_KEYS = {
    "protected_paths",
    "safe_port_range",
    "approved_domains",
    "allow_sgr",
    "auto_approve",
}


@dataclass(frozen=True)
class OperatorConfig:
    protected_paths: tuple[str, ...] = ()
    safe_port_range: Optional[tuple[int, int]] = None
    approved_domains: tuple[str, ...] = ()
    allow_sgr: bool = False
    auto_approve: bool = False

    def __post_init__(self) -> None:
        if self.safe_port_range is not None:
            lo, hi = self.safe_port_range
            if not (1 <= lo <= hi <= 65535):
                raise ConfigError(f"safe_port_range out of order or out of bounds: {lo}..{hi}")
        for p in self.protected_paths:
            if not p.startswith("/"):
                raise ConfigError(f"protected path must be absolute: {p!r}")


def config_from_dict(doc: dict[str, Any]) -> OperatorConfig:
    unknown = set(doc) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    rng = doc.get("safe_port_range")
    if rng is not None:
        if not (isinstance(rng, list) and len(rng) == 2 and all(isinstance(x, int) for x in rng)):
            raise ConfigError("safe_port_range must be a two-integer list [lo, hi]")
        rng = (rng[0], rng[1])
    paths = doc.get("protected_paths", [])
    domains = doc.get("approved_domains", [])
    if not isinstance(paths, list) or not all(isinstance(p, str) for p in paths):
        raise ConfigError("protected_paths must be a list of strings")
    if not isinstance(domains, list) or not all(isinstance(d, str) for d in domains):
        raise ConfigError("approved_domains must be a list of strings")
    for key in ("allow_sgr", "auto_approve"):
        if key in doc and not isinstance(doc[key], bool):
            raise ConfigError(f"{key} must be a boolean")
    return OperatorConfig(
        protected_paths=tuple(paths),
        safe_port_range=rng,
        approved_domains=tuple(d.lower() for d in domains),
        allow_sgr=bool(doc.get("allow_sgr", False)),
        auto_approve=bool(doc.get("auto_approve", False)),
    )


def load_operator_config(path: str | Path) -> OperatorConfig:
    """Read an operator config JSON file."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(doc)
