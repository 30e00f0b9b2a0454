import csv
import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence
import numpy as np
from facilitation.models.bifurcation import BifurcationCurve
from facilitation.models.dynamics import Trajectory
from facilitation.models.stochastic import EnsembleResult

logger = logging.getLogger(__name__)

TRAJECTORY_HEADER = ["t", "x", "y", "event"]
PWL_TRAJECTORY_HEADER = ["t", "x", "y", "event", "mode"]
CURVE_HEADER = ["F", "xe_h", "gap_residual", "iterations", "bracket_width", "offset_shift"]
ENSEMBLE_HEADER = ["sigma", "xe", "survival", "n", "mean_ext_time", "std_ext_time", "n_extinct", "n_blowup"]
PATH_HEADER = ["t", "x", "y"]


def config_hash(config: Mapping[str, Any]) -> str:
    """First 16 hex digits of SHA-256 over canonical JSON"""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value):
            return "nan"
        return format(value, ".17g")
    return str(value)


def _atomic_write(path: Path, write) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as handle:
            write(handle)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"Wrote {path}")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], hash_value: str) -> Path:
    """`# config-hash:` line, header, rows; replaced atomically"""
    def write(handle):
        handle.write(f"# config-hash: {hash_value}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return _atomic_write(path, write)


def write_json(path: Path, payload: Any) -> Path:
    def write(handle):
        json.dump(payload, handle, sort_keys=True, indent=2, default=str)
        handle.write("\n")
    return _atomic_write(path, write)


def read_csv(path: Path) -> List[dict]:
    """Rows of a file written by write_csv, values left as strings"""
    with open(path, newline="", encoding="utf-8") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    return list(csv.DictReader(lines))

# =============================================================================
# ROW SCHEMAS
# =============================================================================

def trajectory_rows(trajectory: Trajectory) -> List[list]:
    """One row per sample; event column joins the labels recorded at that time"""
    by_time = {}
    for event in trajectory.events:
        by_time.setdefault(event.time, []).append(event.kind)
    rows = []
    for i, (t, (x, y)) in enumerate(zip(trajectory.times, trajectory.states)):
        row = [float(t), float(x), float(y), "|".join(by_time.get(float(t), []))]
        if trajectory.modes is not None:
            row.append(trajectory.modes[i])
        rows.append(row)
    return rows


def trajectory_header(trajectory: Trajectory) -> List[str]:
    return PWL_TRAJECTORY_HEADER if trajectory.modes is not None else TRAJECTORY_HEADER


def curve_rows(curve: BifurcationCurve) -> List[list]:
    rows = []
    for F, xe_h, diag in zip(curve.parameters, curve.values, curve.diagnostics):
        if diag is None:
            rows.append([F, xe_h, None, None, None, None])
        else:
            rows.append([F, xe_h, diag.residual_gap, diag.iterations, diag.bracket_width, diag.offset_shift])
    return rows


def ensemble_rows(result: EnsembleResult) -> List[list]:
    return [
        [c.sigma, c.xe, c.survival, c.n, c.mean_ext_time, c.std_ext_time, c.n_extinct, c.n_blowup]
        for c in result.cells
    ]


def path_rows(times: Optional[np.ndarray], states: Optional[np.ndarray]) -> List[list]:
    if times is None or states is None:
        return []
    return [[float(t), float(x), float(y)] for t, (x, y) in zip(times, states)]
