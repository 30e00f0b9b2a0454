import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import numpy as np
from pydantic import ValidationError
from facilitation import __version__
from facilitation.config import settings
from facilitation.core.exceptions import ParameterError
from facilitation.core.logging import log_run_context
from facilitation.models.run import ORIGINAL_KEYS, SMOOTH_KEYS, RunConfig
from facilitation.services import export_service

logger = logging.getLogger(__name__)

PARAMETER_FLAGS = sorted(SMOOTH_KEYS | ORIGINAL_KEYS)

# =============================================================================
# ARGUMENT PARSING
# =============================================================================

def parse_grid(text: str) -> List[float]:
    """`start:stop:count` inclusive, or a comma list"""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ParameterError(f"Grid must be start:stop:count, got '{text}'")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ParameterError(f"Grid must be start:stop:count, got '{text}'") from exc
        if count < 1:
            raise ParameterError("Grid count must be at least 1", {"grid": text})
        return np.linspace(start, stop, count).tolist()
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ParameterError(f"Cannot parse list '{text}'") from exc


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--out", dest="out_dir", help="Output directory")
    parser.add_argument("--model", choices=["smooth", "pwl"], help="Model form")
    parser.add_argument("--workers", type=int, help="Parallel workers for grid work")
    group = parser.add_argument_group("parameters")
    for name in PARAMETER_FLAGS:
        group.add_argument(f"--{name}", type=float, dest=f"param_{name}")


def add_grid_arguments(parser: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "F_grid": ("--F-grid", "F values, start:stop:count or list"),
        "xe_grid": ("--xe-grid", "xe values, start:stop:count or list"),
        "sigma": ("--sigma", "Noise intensities, list or grid"),
        "F_values": ("--F-values", "One ensemble per F value"),
    }
    for name in names:
        flag, help_text = flags[name]
        parser.add_argument(flag, dest=name, help=help_text)

# =============================================================================
# RUN CONFIGURATION
# =============================================================================

def load_config_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"Cannot read config file {path}", {"reason": str(exc)}) from exc
    if not isinstance(data, dict):
        raise ParameterError("Config file must hold a JSON object", {"path": str(path)})
    # Manifests written by a previous run nest the run configuration
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data


def build_run_config(command: str, args: argparse.Namespace) -> RunConfig:
    """File keys first, flags on top"""
    data = load_config_file(getattr(args, "config", None))
    data["command"] = command
    params = dict(data.get("params", {}))
    for name in PARAMETER_FLAGS:
        value = getattr(args, f"param_{name}", None)
        if value is not None:
            params[name] = value
    data["params"] = params

    grids = dict(data.get("grids", {}))
    for name in ("F_grid", "xe_grid", "sigma", "F_values"):
        value = getattr(args, name, None)
        if value is not None:
            grids[name] = parse_grid(value)
    data["grids"] = grids

    noise = dict(data.get("noise", {}))
    noise.setdefault("seed", settings.default_seed)
    for flag, key in (("seed", "seed"), ("dt", "dt"), ("t_max", "t_max")):
        value = getattr(args, flag, None)
        if value is not None:
            noise[key] = value
    data["noise"] = noise

    for key in ("model", "n", "chart", "out_dir"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    for key in ("compare", "record_path"):
        if getattr(args, key, False):
            data[key] = True
    data.setdefault("out_dir", settings.out_dir)
    try:
        return RunConfig(**data)
    except ValidationError as exc:
        raise ParameterError("Run configuration is invalid", {"errors": exc.errors(include_url=False)}) from exc


def require_grid(values: Optional[Sequence[float]], name: str) -> List[float]:
    if not values:
        raise ParameterError(f"Grid '{name}' is required and must not be empty", {"grid": name})
    return list(values)


def consumer_rate(params: Dict[str, float]) -> Optional[float]:
    """F from the smooth key, or epsS mu / eps in original form"""
    if "F" in params:
        return params["F"]
    if {"epsS", "mu", "eps"} <= set(params):
        return params["epsS"] * params["mu"] / params["eps"]
    return None

# =============================================================================
# OUTPUT
# =============================================================================

@dataclass
class RunContext:
    """Output directory, provenance hash and the list of files a run produced"""
    config: RunConfig
    workers: Optional[int] = None
    files: List[str] = field(default_factory=list)

    @property
    def out(self) -> Path:
        return Path(self.config.out_dir)

    @property
    def hash(self) -> str:
        return export_service.config_hash(self.config.hashable())

    def csv(self, name: str, header: Sequence[str], rows) -> Path:
        path = export_service.write_csv(self.out / name, header, rows, self.hash)
        self.files.append(name)
        return path

    def json(self, name: str, payload: Any) -> Path:
        path = export_service.write_json(self.out / name, payload)
        self.files.append(name)
        return path

    def manifest(self, extra: Optional[Dict[str, Any]] = None) -> Path:
        payload = {
            "config": self.config.hashable(),
            "config_hash": self.hash,
            "files": sorted(self.files),
            "environment": settings.environment,
            "version": __version__,
        }
        payload.update(extra or {})
        return export_service.write_json(self.out / "manifest.json", payload)

    def report(self, payload: Dict[str, Any]) -> None:
        sys.stdout.write(json.dumps(payload, sort_keys=True, default=str) + "\n")
        sys.stdout.flush()

    def log_done(self, summary: str) -> None:
        context = log_run_context(self.config.command, self.hash, self.config.noise.seed)
        logger.info(f"{summary} -> {self.out}", extra={"context": context})
