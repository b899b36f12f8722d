"""Defines hashing helpers used to label runs."""

import hashlib
import json
from typing import Any


def canonical_json(data: Any) -> str:  # noqa: ANN401
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)


def config_hash(data: Any) -> str:  # noqa: ANN401
    """Hashes a config tree.

    Returns:
        The first 16 characters of the SHA-256 hash of the canonical JSON
        encoding, which does not depend on key order.
    """
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()[:16]
