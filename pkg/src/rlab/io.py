"""JSON, CSV and OBJ input/output."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .metrics import Link


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj, indent: Optional[int] = 2) -> str:
    return json.dumps(obj, default=_default, indent=indent)


def save_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def load_json(path):
    return json.loads(Path(path).read_text())


def load_link(path) -> Link:
    data = load_json(path)
    if "link" in data and "components" not in data:
        data = data["link"]
    return Link.from_dict(data)


def sample_link(link: Link, samples: int):
    """``samples`` points per component, equally spaced in parameter."""
    out = []
    for c in link:
        s = np.linspace(0.0, c.length, samples, endpoint=False)
        out.append((s, c.points(s)))
    return out


def export_csv(link: Link, path, samples: int = 512) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "s", "x", "y", "z"])
        for k, (s, pts) in enumerate(sample_link(link, samples)):
            for si, p in zip(s, pts):
                w.writerow([k, f"{si:.12g}", f"{p[0]:.12g}", f"{p[1]:.12g}", f"{p[2]:.12g}"])
    return path


def export_obj(link: Link, path, samples: int = 512) -> Path:
    """Closed polylines as OBJ line elements, one object per component."""
    path = Path(path)
    lines = []
    base = 1
    for k, (_, pts) in enumerate(sample_link(link, samples)):
        lines.append(f"o component_{k}")
        lines.extend(f"v {p[0]:.12g} {p[1]:.12g} {p[2]:.12g}" for p in pts)
        idx = list(range(base, base + len(pts))) + [base]
        lines.append("l " + " ".join(map(str, idx)))
        base += len(pts)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_rows(path, header: Iterable[str], rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        w.writerows(rows)
    return path
