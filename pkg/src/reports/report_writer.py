"""
JSON report documents.

Keys keep insertion order, reals are written with 17 significant digits and
complex numbers as [re, im]. A meta block leads every document; its
timestamp can be suppressed for byte-identical reruns.
"""
import json
import math
import re
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

import numpy as np
from dateutil import tz

from utils.log import get_logger

log = get_logger("cli")

TOOL = "formrep"
_FLOAT_TAG = "\x00f:"
_FLOAT_PATTERN = re.compile(r'"\\u0000f:([^"]*)"')


def format_real(x: float) -> str:
    """17 significant digits; non-finite values become the strings nan, inf, -inf."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_jsonable(obj):
    """Plain JSON structure with tagged reals (resolved by dumps_report)."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return _FLOAT_TAG + format_real(x) if math.isfinite(x) else format_real(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(obj.real)), to_jsonable(float(obj.imag))]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(doc: dict) -> str:
    text = json.dumps(to_jsonable(doc), indent=2, ensure_ascii=True)
    return _FLOAT_PATTERN.sub(lambda m: m.group(1), text) + "\n"


class ReportWriter:
    def __init__(self, tzname: str = "America/Toronto", directory: str = "reports", timestamp: bool = True):
        self.tz = tz.gettz(tzname) or tz.UTC
        self.directory = Path(directory)
        self.timestamp = timestamp

    def _now(self) -> datetime:
        return datetime.now(tz=self.tz)

    def meta(self, command: str, seed: Optional[int], extra: Optional[dict] = None) -> dict:
        block = {"tool": TOOL, "command": command, "seed": seed}
        if extra:
            block.update(extra)
        if self.timestamp:
            block["timestamp"] = self._now().isoformat(timespec="seconds")
        return block

    def document(self, command: str, seed: Optional[int], body: dict, extra: Optional[dict] = None) -> dict:
        return {"meta": self.meta(command, seed, extra), **body}

    def _path_for(self, command: str) -> Path:
        day = self._now().strftime("%Y-%m-%d")
        return self.directory / f"{day}_{command}.json"

    def write(self, doc: dict, out: Optional[str] = None) -> Optional[Path]:
        """Write to `out`, stdout for "-", or reports/<date>_<command>.json when omitted."""
        text = dumps_report(doc)
        if out == "-":
            sys.stdout.write(text)
            return None
        path = Path(out) if out else self._path_for(doc["meta"]["command"])
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        log.info("report written to %s", path)
        return path
