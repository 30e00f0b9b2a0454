import argparse
import logging
from collections import Counter
from typing import Any, Dict
from facilitation.cli.common import RunContext, add_common_arguments, add_grid_arguments, require_grid
from facilitation.models.run import ModelKind
from facilitation.services import bifurcation_service, params_service, pwl_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("regions", help="Parameter-space region labels over an (xe, F) grid")
    add_common_arguments(parser)
    add_grid_arguments(parser, "xe_grid", "F_grid")
    parser.set_defaults(handler=run)


def run(ctx: RunContext, args: argparse.Namespace) -> Dict[str, Any]:
    cfg = ctx.config
    base = params_service.parse_base(cfg.params)
    xe_grid = require_grid(cfg.grids.xe_grid, "xe_grid")
    F_grid = require_grid(cfg.grids.F_grid, "F_grid")

    if cfg.model is ModelKind.PWL:
        rows = pwl_service.pwl_region_grid(base, xe_grid, F_grid)
        ctx.csv("regions_pwl.csv", ["xe", "F", "label", "margin"],
                [[xe, F, label.value, margin] for xe, F, label, margin in rows])
        counts = Counter(label.value for _, _, label, _ in rows)
    else:
        rows = bifurcation_service.region_grid(base, xe_grid, F_grid, workers=ctx.workers)
        ctx.csv("regions_smooth.csv", ["xe", "F", "label", "margin", "xe_h"],
                [[xe, F, r.label.value, r.margin, r.xe_h] for xe, F, r in rows])
        counts = Counter(r.label.value for _, _, r in rows)

    ratios = params_service.habitat_ratios(base)
    summary = {
        "command": "regions",
        "model": cfg.model.value,
        "cells": len(rows),
        "counts": dict(sorted(counts.items())),
        "ratios": ratios.model_dump(),
    }
    ctx.manifest({"summary": summary})
    ctx.report(summary)
    ctx.log_done(f"{len(rows)} region cells")
    return summary
