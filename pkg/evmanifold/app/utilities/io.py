import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Union

import pandas as pd

PathLike = Union[str, Path]


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write text next to ``path`` and move it into place"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def write_frame(path: PathLike, frame: pd.DataFrame) -> Path:
    # repr-precision floats keep re-reads exact
    return atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"))


def dump_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path: PathLike, data: Dict[str, Any]) -> Path:
    return atomic_write_text(path, dump_json(data))


def read_json(path: PathLike) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)
