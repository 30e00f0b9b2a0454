import argparse
import logging
import math
from typing import Any, Dict
import numpy as np
from facilitation.cli.common import RunContext, add_common_arguments, add_grid_arguments, require_grid
from facilitation.models.run import ModelKind
from facilitation.services import bifurcation_service, export_service, params_service, pwl_service

logger = logging.getLogger(__name__)

PWL_SAMPLES = 201


def register(subparsers) -> None:
    parser = subparsers.add_parser("heteroclinic", help="Heteroclinic bifurcation curve")
    add_common_arguments(parser)
    add_grid_arguments(parser, "F_grid", "xe_grid")
    parser.add_argument("--compare", action="store_true", help="Smooth, PWL and canard columns on one F grid")
    parser.set_defaults(handler=run)


def _pwl_curves(ctx: RunContext, base) -> Dict[str, Any]:
    grids = ctx.config.grids
    if grids.F_grid:
        rows = [[F, pwl_service.xe_het(base, F)] for F in grids.F_grid]
        ctx.csv("heteroclinic_pwl.csv", ["F", "xe_het"], rows)
    else:
        x_geo, x_H = math.sqrt(base.x0 * base.x1), 0.5 * (base.x0 + base.x1)
        xe_grid = grids.xe_grid or np.linspace(x_geo, x_H, PWL_SAMPLES)[1:].tolist()
        rows = [[xe, pwl_service.F_het(base, xe)] for xe in xe_grid]
        ctx.csv("heteroclinic_pwl.csv", ["xe", "F_het"], rows)

    no_return = []
    for xe in np.linspace(base.x0, base.x1, PWL_SAMPLES)[1:-1]:
        x_H = 0.5 * (base.x0 + base.x1)
        if xe < x_H:
            no_return.append([xe, pwl_service.F_B1(base, xe), None])
        elif xe > x_H:
            no_return.append([xe, None, pwl_service.F_B2(base, xe)])
    ctx.csv("no_return_pwl.csv", ["xe", "F_B1", "F_B2"], no_return)
    return {"points": len(rows)}


def run(ctx: RunContext, args: argparse.Namespace) -> Dict[str, Any]:
    cfg = ctx.config
    base = params_service.parse_base(cfg.params)
    summary: Dict[str, Any] = {"command": "heteroclinic", "model": cfg.model.value}

    if cfg.compare:
        F_grid = require_grid(cfg.grids.F_grid, "F_grid")
        curve = bifurcation_service.heteroclinic_curve(base, F_grid, workers=ctx.workers)
        pwl = [pwl_service.xe_het(base, F) for F in curve.parameters]
        canard = bifurcation_service.canard_curve(base, curve.parameters)
        rows = [[F, s, q, c] for F, s, q, c in zip(curve.parameters, curve.values, pwl, canard)]
        ctx.csv("heteroclinic_compare.csv", ["F", "xe_smooth", "xe_pwl", "xe_canard"], rows)
        summary.update({"points": len(rows), "checks": curve.checks})
    elif cfg.model is ModelKind.PWL:
        summary.update(_pwl_curves(ctx, base))
    else:
        F_grid = require_grid(cfg.grids.F_grid, "F_grid")
        curve = bifurcation_service.heteroclinic_curve(base, F_grid, workers=ctx.workers)
        ctx.csv("heteroclinic_smooth.csv", export_service.CURVE_HEADER, export_service.curve_rows(curve))
        summary.update({"points": len(curve), "checks": curve.checks,
                        "bounds": [curve.lower_bound, curve.upper_bound]})
        if curve.failures:
            summary["failures"] = curve.failures

    ctx.manifest({"summary": summary})
    ctx.report(summary)
    ctx.log_done(f"heteroclinic curve ({summary.get('points', 0)} points)")
    return summary
