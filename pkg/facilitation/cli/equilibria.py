import argparse
import logging
from typing import Any, Dict
from facilitation.cli.common import RunContext, add_common_arguments
from facilitation.models.params import OriginalParams
from facilitation.models.run import ModelKind
from facilitation.services import params_service, pwl_service, smooth_model_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("equilibria", help="Classified equilibria and closed-form loci")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(ctx: RunContext, args: argparse.Namespace) -> Dict[str, Any]:
    """
    Equilibria with trace/determinant classification plus the loci of the current parameters.
    PWL adds the sliding segment and the saddle eigenvalue comparison.
    """
    cfg = ctx.config
    parsed = params_service.parse_params(cfg.params)
    original = parsed if isinstance(parsed, OriginalParams) else None
    p = params_service.as_smooth(parsed)

    report: Dict[str, Any] = {
        "command": "equilibria",
        "model": cfg.model.value,
        "params": p.model_dump(),
        "equilibria": [r.model_dump(mode="json") for r in smooth_model_service.equilibria(p)],
        "loci": params_service.loci(p, original).model_dump(),
        "transcritical": params_service.transcritical_exchanges(p).model_dump(),
    }
    if original is not None:
        report["original"] = original.model_dump()
        report["rescaled"] = params_service.rescale(original).model_dump()
    if p.is_generic:
        report["hopf"] = params_service.hopf_constants(p).model_dump()
        report["habitat_ratios"] = params_service.habitat_ratios(p).model_dump()
        report["canard_slope"] = params_service.canard_slope(p)
        report["focus_node_threshold"] = params_service.focus_node_threshold(p, p.xe)
    if p.x0 < p.xe < p.x1:
        report["hyperbolicity_ratio"] = params_service.hyperbolicity_ratio(p)

    if cfg.model is ModelKind.PWL:
        q = pwl_service.pwl_params(p, p.xe, p.F)
        report["pwl"] = {
            "sliding": pwl_service.sliding_data(q).model_dump(mode="json"),
            "saddles": pwl_service.saddle_eigenstructure_match(q).model_dump(),
            "region": pwl_service.pwl_classify_region(q).value,
            "loci": pwl_service.pwl_loci(q).model_dump(),
        }

    ctx.json("equilibria.json", report)
    ctx.manifest()
    ctx.report(report)
    ctx.log_done(f"{len(report['equilibria'])} equilibria")
    return report
