import argparse
import logging
from typing import Any, Dict, List
from facilitation.cli.common import RunContext, add_common_arguments, add_grid_arguments, consumer_rate, require_grid
from facilitation.core.exceptions import ParameterError
from facilitation.services import export_service, params_service, stochastic_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("stochastic", help="Survival-probability ensembles over (sigma, xe)")
    add_common_arguments(parser)
    add_grid_arguments(parser, "xe_grid", "sigma", "F_values")
    parser.add_argument("--n", type=int, help="Realizations per cell")
    parser.add_argument("--seed", type=int, help="Base seed of the ensemble")
    parser.add_argument("--dt", type=float, help="Euler-Maruyama step")
    parser.add_argument("--t-max", dest="t_max", type=float, help="Simulation horizon")
    parser.add_argument("--record-path", dest="record_path", action="store_true",
                        help="Write one recorded time series per (xe, sigma)")
    parser.set_defaults(handler=run)


def _F_values(ctx: RunContext) -> List[float]:
    if ctx.config.grids.F_values:
        return list(ctx.config.grids.F_values)
    F = consumer_rate(ctx.config.params)
    if F is None:
        raise ParameterError("Missing required parameter: F", {"missing": ["F"]})
    return [F]


def run(ctx: RunContext, args: argparse.Namespace) -> Dict[str, Any]:
    cfg = ctx.config
    base = params_service.parse_base(cfg.params)
    xe_grid = require_grid(cfg.grids.xe_grid, "xe_grid")
    sigma_grid = list(cfg.grids.sigma) if cfg.grids.sigma else [cfg.noise.sigma]

    outputs = []
    for F in _F_values(ctx):
        result = stochastic_service.survival_grid(base, F, sigma_grid, xe_grid, cfg.n, cfg.noise, ctx.workers)
        name = f"survival_F{F:g}.csv"
        ctx.csv(name, export_service.ENSEMBLE_HEADER, export_service.ensemble_rows(result))
        thresholds = {f"{s:g}": result.threshold_xe(s) for s in result.sigma_values}
        outputs.append({"F": F, "file": name, "threshold_xe": thresholds,
                        "blowups": sum(c.n_blowup for c in result.cells)})

        if cfg.record_path:
            for sigma in sigma_grid:
                noise = cfg.noise.model_copy(update={"sigma": sigma})
                for xe in xe_grid:
                    path = stochastic_service.sample_path(base.with_consumer(xe, F), noise)
                    ctx.csv(f"path_F{F:g}_xe{xe:g}_sigma{sigma:g}.csv", export_service.PATH_HEADER,
                            export_service.path_rows(path.times, path.states))

    summary = {
        "command": "stochastic",
        "n": cfg.n,
        "seed": cfg.noise.seed,
        "ensembles": outputs,
    }
    ctx.manifest({"summary": summary, "seed_scheme": "SeedSequence(entropy=seed, spawn_key=(cell, realization)) -> Philox"})
    ctx.report(summary)
    ctx.log_done(f"{len(outputs)} ensembles")
    return summary
