"""
Content digests for reports and traces.
Two runs of the same (config, seed) must produce the same digest.
"""

import hashlib
import json
from typing import Any


def generate_digest(data: Any) -> str:
    """sha256 hex digest of a canonical JSON rendering of `data`."""
    if isinstance(data, dict):
        json_str = json.dumps(data, sort_keys=True, default=str)
    else:
        json_str = json.dumps(data, default=str)
    return hashlib.sha256(json_str.encode()).hexdigest()


def digest_from_model(model: Any) -> str:
    """Digest of a pydantic model's JSON-mode dump."""
    if hasattr(model, "model_dump"):
        data = model.model_dump(mode="json")
    else:
        data = model.__dict__
    return generate_digest(data)


def digests_match(first: Any, second: Any) -> bool:
    return digest_from_model(first) == digest_from_model(second)
