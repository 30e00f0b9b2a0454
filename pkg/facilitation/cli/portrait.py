import argparse
import logging
from typing import Any, Dict
import numpy as np
from facilitation.cli.common import RunContext, add_common_arguments
from facilitation.core.exceptions import InconclusiveError
from facilitation.models.pwl import PwlMode, PwlState
from facilitation.models.run import ModelKind
from facilitation.models.state import Chart
from facilitation.services import dynamics_service, export_service, params_service, pwl_service, smooth_model_service

logger = logging.getLogger(__name__)

FIELD_SAMPLES = 25


def register(subparsers) -> None:
    parser = subparsers.add_parser("portrait", help="Separatrices, nullclines, field samples, limit cycle")
    add_common_arguments(parser)
    parser.add_argument("--chart", choices=[c.value for c in Chart], help="Also emit a compactified chart field")
    parser.set_defaults(handler=run)


def _chart_rows(p, chart: Chart):
    vector_field = smooth_model_service.chart_field(p, chart)
    grid = np.linspace(-1.0, 1.0, FIELD_SAMPLES)
    rows = []
    for v in grid:
        for u in grid:
            du, dv = vector_field(float(u), float(v))
            rows.append([u, v, du, dv])
    return rows


def _smooth(ctx: RunContext, p) -> Dict[str, Any]:
    summary: Dict[str, Any] = {"separatrices": []}
    cfg = ctx.config.integrator
    for which in dynamics_service.Separatrix:
        trajectory = dynamics_service.trace_separatrix(p, which, cfg=cfg)
        name = f"separatrix_{which.value}.csv"
        ctx.csv(name, export_service.trajectory_header(trajectory), export_service.trajectory_rows(trajectory))
        summary["separatrices"].append(which.value)

    if p.x0 < p.xe < p.x1:
        try:
            cycle = dynamics_service.find_limit_cycle(p)
        except InconclusiveError as exc:
            logger.warning(f"Limit-cycle search failed: {exc.message}")
            summary["limit_cycle_error"] = {"message": exc.message, "details": exc.details}
            return summary
        if cycle is not None:
            ctx.csv("limit_cycle.csv", ["x", "y"], cycle.samples.tolist())
            summary["limit_cycle"] = {"period": cycle.period, "section_point": cycle.section_point,
                                      "amplitude": cycle.amplitude, "multiplier": cycle.multiplier}
    return summary


def _pwl(ctx: RunContext, p) -> Dict[str, Any]:
    q = pwl_service.pwl_params(p, p.xe, p.F)
    data = pwl_service.sliding_data(q)
    y1n, y2n = pwl_service.nullcline_heights(q)
    ctx.csv("sliding_segment.csv", ["T1", "T2", "P_lambda", "y_tangency_1", "y_tangency_2", "stability"],
            [[data.T1, data.T2, data.P_lambda, y1n, y2n, data.stability.value]])

    heights = pwl_service.manifold_heights(q)
    ctx.csv("manifolds.csv", ["manifold", "x", "y"], [
        ["stable_of_x0", q.x0, 0.0], ["stable_of_x0", q.xe, heights.h_s],
        ["unstable_of_x1", q.x1, 0.0], ["unstable_of_x1", q.xe, heights.h_u],
    ])

    start = PwlState(x=0.5 * (q.x0 + q.xe), y=q.fold_height, mode=PwlMode.REGION1)
    trajectory = pwl_service.pwl_integrate(q, start, ctx.config.integrator)
    ctx.csv("trajectory.csv", export_service.trajectory_header(trajectory), export_service.trajectory_rows(trajectory))

    summary: Dict[str, Any] = {"region": pwl_service.pwl_classify_region(q).value}
    cycle = pwl_service.pwl_find_limit_cycle(q)
    if cycle is not None:
        ctx.csv("limit_cycle.csv", ["x", "y"], cycle.samples.tolist())
        summary["limit_cycle"] = {"period": cycle.period, "section_point": cycle.section_point}
    return summary


def run(ctx: RunContext, args: argparse.Namespace) -> Dict[str, Any]:
    cfg = ctx.config
    p = params_service.as_smooth(params_service.parse_params(cfg.params))

    lines = smooth_model_service.nullclines(p)
    ctx.csv("nullclines.csv", ["curve", "x", "y"],
            [[name, x, y] for name, points in lines.items() for x, y in points])
    top = float(lines["consumer"][1, 1])
    xs = np.linspace(0.0, 1.25 * p.x1, FIELD_SAMPLES)
    ys = np.linspace(0.0, top, FIELD_SAMPLES)
    ctx.csv("direction_field.csv", ["x", "y", "dx", "dy"], smooth_model_service.direction_field(p, xs, ys).tolist())

    if cfg.model is ModelKind.PWL:
        summary = _pwl(ctx, p)
    else:
        summary = _smooth(ctx, p)
    if cfg.chart is not None:
        ctx.csv(f"chart_{cfg.chart.value}.csv", ["u", "v", "du", "dv"], _chart_rows(p, cfg.chart))

    summary.update({"command": "portrait", "model": cfg.model.value, "files": sorted(ctx.files)})
    ctx.manifest({"summary": summary})
    ctx.report(summary)
    ctx.log_done(f"portrait with {len(ctx.files)} files")
    return summary
