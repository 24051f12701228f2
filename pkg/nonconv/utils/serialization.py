"""Canonical JSON and CSV writers for result files."""
import csv
import enum
import hashlib
import json
import math
import os
from typing import Any, Iterable, Sequence

import numpy as np
from pydantic import BaseModel


def _clean(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return _clean(value.model_dump(by_alias=True))
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def canonical_json(payload: Any) -> str:
    """Sorted keys, fixed separators, no NaN literals: byte-stable output."""
    return json.dumps(_clean(payload), sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def config_hash(payload: Any) -> str:
    text = json.dumps(_clean(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def write_json(path: str, payload: Any) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(payload))
    return path


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
