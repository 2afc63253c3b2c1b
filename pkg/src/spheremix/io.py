"""JSON and CSV readers/writers for mixtures, partitions and point sets.

Python's float ``repr`` is the shortest string that round-trips, so JSON
written here restores every double bit for bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from spheremix.geometry import SphericalPartition
from spheremix.vmf import VmfMixture


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def save_mixture(path, mix: VmfMixture) -> Path:
    return write_json(path, mix.to_dict())


def load_mixture(path) -> VmfMixture:
    return VmfMixture.from_dict(read_json(path))


def save_partition(path, part: SphericalPartition) -> Path:
    return write_json(path, part.to_dict())


def load_partition(path) -> SphericalPartition:
    return SphericalPartition.from_dict(read_json(path))


def write_points_csv(path, points: np.ndarray, dim: int | None = None) -> Path:
    points = np.asarray(points, dtype=float)
    dim = points.shape[1] if points.ndim == 2 and points.shape[0] else dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(dim or 0)])
        for row in points:
            w.writerow([repr(float(v)) for v in row])
    return Path(path)


def read_points_csv(path, dim: int) -> np.ndarray:
    """Rows of ``dim`` floats; a non-numeric first row is taken as a header.

    Raises ``ValueError`` on ragged or non-numeric rows.
    """
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if i == 0:
                    continue
                raise ValueError(f"line {i + 1}: non-numeric value in {row!r}") from None
            if len(vals) != dim:
                raise ValueError(f"line {i + 1}: expected {dim} values, got {len(vals)}")
            rows.append(vals)
    pts = np.array(rows, dtype=float).reshape(-1, dim)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite coordinates")
    return pts


def write_column_csv(path, name: str, values) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([name])
        for v in values:
            w.writerow([repr(float(v))])
    return Path(path)
