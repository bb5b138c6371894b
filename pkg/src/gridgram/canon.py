"""Canonical JSON serialization and hashing.

Every hashed artifact (grammars, designs, derivation logs) is serialized the
same way: sorted keys, no whitespace, UTF-8. Floats are rejected outright so
hashes can never depend on float formatting.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def _reject_floats(obj: Any, path: str = "$") -> None:
    if isinstance(obj, float):
        raise ValueError(f"float at {path} not allowed in canonical JSON")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _reject_floats(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _reject_floats(v, f"{path}[{i}]")


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, minimal separators, no floats."""
    _reject_floats(obj)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def canonical_hash(obj: Any) -> str:
    """sha256 hex digest of the canonical JSON serialization."""
    return sha256_hex(canonical_json(obj))
