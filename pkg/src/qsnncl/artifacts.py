"""Result files written atomically (temp file in the same directory, then rename)."""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

from .network import SnnModel, save_checkpoint


@contextmanager
def _atomic(path: Path, mode: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_text(path, text: str):
    with _atomic(path, "w") as f:
        f.write(text)


def write_json(path, obj):
    write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_checkpoint(path, model: SnnModel):
    with _atomic(path, "wb") as f:
        save_checkpoint(model, f)


def evaluated_points_csv(points) -> str:
    lines = ["w_decay,threshold_term,overall_avg,min_task_acc,pass"]
    for p in points:
        lines.append(
            f"{p.w_decay:.6g},{p.threshold_term:.6g},{p.overall_avg:.6f},"
            f"{p.min_task_acc:.6f},{str(p.constraint_pass).lower()}"
        )
    return "\n".join(lines) + "\n"
