import csv
import hashlib
import json
import logging
import math
import os
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence, Union

import numpy as np


logger = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays, enums and non-finite floats to JSON values."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        # inf/nan are not valid JSON
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def canonical_json(document: Any) -> str:
    return json.dumps(_jsonable(document), sort_keys=True, separators=(",", ":"))


def config_digest(document: Dict) -> str:
    """SHA-256 of the canonical JSON form of a configuration."""
    return hashlib.sha256(canonical_json(document).encode("utf-8")).hexdigest()


def write_report(path: Union[str, Path], document: Dict) -> Path:
    """Write a JSON report with sorted keys so identical inputs give identical bytes."""
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    path.write_text(json.dumps(_jsonable(document), indent=2, sort_keys=True) + "\n")
    logger.info("report written to %s", path)
    return path


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in _jsonable(list(row))])
    return path


def write_timestamps(out_dir: Union[str, Path], started: datetime) -> Path:
    """Wall-clock times live in their own file so every other output is reproducible."""
    finished = datetime.now(timezone.utc)
    return write_report(Path(out_dir) / "timestamps.json", {
        "started": started.isoformat(),
        "finished": finished.isoformat(),
    })
