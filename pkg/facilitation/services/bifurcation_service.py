import logging
import math
from functools import partial
from typing import List, Optional, Sequence, Tuple
import numpy as np
from facilitation.core.exceptions import BracketError, DomainError, InconclusiveError, ModelError
from facilitation.core.parallel import ordered_map
from facilitation.models.bifurcation import (
    BifurcationCurve,
    CycleOutcome,
    CycleSweepRow,
    HeteroclinicSolution,
    RegionLabel,
    SmoothRegion,
    SolveDiagnostics,
)
from facilitation.models.dynamics import IntegratorConfig
from facilitation.models.params import SaddlePair, SmoothParams
from facilitation.services import dynamics_service, params_service

logger = logging.getLogger(__name__)

SHOOTING_CONFIG = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, max_step=0.5, t_max=200.0)

TOL_HET = 1e-6
BRACKET_PAD = 1e-4
MAX_BISECTIONS = 80


def _gap(base: SaddlePair, F: float, xe: float, cfg: IntegratorConfig) -> float:
    return dynamics_service.section_gap(base.with_consumer(xe, F), cfg)


def heteroclinic_xe(base: SaddlePair, F: float, cfg: IntegratorConfig = SHOOTING_CONFIG,
                    tol: float = TOL_HET, pad: float = BRACKET_PAD) -> HeteroclinicSolution:
    """
    Heteroclinic abscissa xe_h(F) by bisection of the section gap over [x_c, x_H).

    The gap decreases monotonically in xe, so the sign change is unique.
    """
    if not F > 0:
        raise DomainError("F must be positive", {"F": F})
    locus = params_service.loci(base)
    lo, hi = locus.x_c + pad, locus.x_H - pad
    gap_lo, gap_hi = _gap(base, F, lo, cfg), _gap(base, F, hi, cfg)
    if gap_lo * gap_hi > 0:
        raise BracketError(gap_lo, gap_hi, details={"F": F, "bracket": [lo, hi]})

    iterations = 0
    while hi - lo > tol and iterations < MAX_BISECTIONS:
        mid = 0.5 * (lo + hi)
        gap_mid = _gap(base, F, mid, cfg)
        iterations += 1
        if gap_mid == 0.0:
            lo = hi = mid
            gap_lo = gap_hi = 0.0
            break
        if (gap_mid > 0) == (gap_lo > 0):
            lo, gap_lo = mid, gap_mid
        else:
            hi, gap_hi = mid, gap_mid

    xe_h = 0.5 * (lo + hi)
    heights = dynamics_service.section_heights(base.with_consumer(xe_h, F), cfg, refine=True)
    diagnostics = SolveDiagnostics(
        iterations=iterations,
        residual_gap=heights.gap,
        bracket_width=hi - lo,
        offset_shift=heights.shift,
    )
    logger.debug(f"xe_h(F={F:.6g}) = {xe_h:.9f} after {iterations} bisections, gap={heights.gap:.3g}")
    return HeteroclinicSolution(F=F, xe_h=xe_h, diagnostics=diagnostics)


def _solve_point(F: float, base: SaddlePair, cfg: IntegratorConfig) -> dict:
    try:
        solution = heteroclinic_xe(base, F, cfg)
        return {"F": F, "solution": solution}
    except ModelError as exc:
        logger.warning(f"Heteroclinic solve failed at F={F}: {exc.message}")
        return {"F": F, "error": exc.__class__.__name__, "message": exc.message, "details": exc.details}


def heteroclinic_curve(base: SaddlePair, F_grid: Sequence[float], cfg: IntegratorConfig = SHOOTING_CONFIG,
                       workers: Optional[int] = None) -> BifurcationCurve:
    """Solve xe_h on an ascending F grid and attach graph/bounds checks"""
    F_values = np.asarray(list(F_grid), dtype=float)
    if F_values.size and (np.any(F_values <= 0) or np.any(np.diff(F_values) <= 0)):
        raise DomainError("F grid must be positive and strictly ascending", {"F_grid": F_values.tolist()})
    locus = params_service.loci(base)

    results = ordered_map(partial(_solve_point, base=base, cfg=cfg), F_values.tolist(), workers)
    values = np.full(F_values.size, np.nan)
    diagnostics: List[Optional[SolveDiagnostics]] = []
    failures = []
    for i, result in enumerate(results):
        if "solution" in result:
            values[i] = result["solution"].xe_h
            diagnostics.append(result["solution"].diagnostics)
        else:
            diagnostics.append(None)
            failures.append(result)

    solved = values[~np.isnan(values)]
    checks = {
        "monotone_decreasing": bool(np.all(np.diff(solved) < 0)) if solved.size > 1 else True,
        "within_bounds": bool(np.all((solved >= locus.x_c) & (solved < locus.x_H))),
        "n_failed": len(failures),
    }
    if not checks["monotone_decreasing"] or not checks["within_bounds"]:
        logger.warning(f"Heteroclinic curve checks failed: {checks}")
    return BifurcationCurve(
        parameter_name="F",
        parameters=F_values,
        values=values,
        diagnostics=diagnostics,
        lower_bound=locus.x_c,
        upper_bound=locus.x_H,
        failures=failures,
        checks=checks,
    )


def canard_curve(base: SaddlePair, F) -> np.ndarray:
    """Small-F tangent x_H + slope * F of the heteroclinic curve"""
    locus = params_service.loci(base)
    return locus.x_H + params_service.canard_slope(base) * np.asarray(F, dtype=float)


def _label(xe: float, x_H: float, x_c: float, xe_h: Optional[float], tol: float) -> RegionLabel:
    if xe >= x_H:
        return RegionLabel(label=SmoothRegion.OMEGA1, margin=xe - x_H)
    if xe_h is None:
        # xe_h > x_c, so x_c - xe is a lower bound on the distance
        return RegionLabel(label=SmoothRegion.OMEGA4, margin=x_c - xe)
    distance = abs(xe - xe_h)
    if distance < tol:
        return RegionLabel(label=SmoothRegion.OMEGA3, margin=distance, xe_h=xe_h)
    if xe > xe_h:
        return RegionLabel(label=SmoothRegion.OMEGA2, margin=min(distance, x_H - xe), xe_h=xe_h)
    return RegionLabel(label=SmoothRegion.OMEGA4, margin=distance, xe_h=xe_h)


def classify_region(p: SmoothParams, cfg: IntegratorConfig = SHOOTING_CONFIG, tol: float = TOL_HET) -> RegionLabel:
    """
    Omega1-Omega4 label of (xe, F).

    xe >= x_H needs no shooting. Below x_c the label is Omega4 in closed form and
    xe_h is solved only for the margin; a failed solve leaves the x_c - xe bound.
    """
    if not p.x0 < p.xe < p.x1:
        raise DomainError("Region classification needs x0 < xe < x1", {"xe": p.xe})
    locus = params_service.loci(p)
    if p.xe >= locus.x_H:
        return _label(p.xe, locus.x_H, locus.x_c, None, tol)
    if p.xe <= locus.x_c:
        try:
            xe_h = heteroclinic_xe(p.base, p.F, cfg, tol=tol).xe_h
        except ModelError as exc:
            logger.debug(f"Margin below x_c left as a bound at F={p.F}: {exc.message}")
            xe_h = None
        return _label(p.xe, locus.x_H, locus.x_c, xe_h, tol)
    xe_h = heteroclinic_xe(p.base, p.F, cfg, tol=tol).xe_h
    return _label(p.xe, locus.x_H, locus.x_c, xe_h, tol)


def region_grid(base: SaddlePair, xe_grid: Sequence[float], F_grid: Sequence[float],
                cfg: IntegratorConfig = SHOOTING_CONFIG, workers: Optional[int] = None) -> List[Tuple[float, float, RegionLabel]]:
    """
    Labels over xe_grid x F_grid; xe_h is solved once per F.

    A row whose xe_h is unavailable fails only if one of its cells lies in (x_c, x_H).
    """
    for xe in xe_grid:
        if not base.x0 < xe < base.x1:
            raise DomainError("Grid xe outside (x0, x1)", {"xe": xe})
    locus = params_service.loci(base)
    curve = heteroclinic_curve(base, sorted(F_grid), cfg, workers)
    xe_h_by_F = dict(zip(curve.parameters.tolist(), curve.values.tolist()))
    rows = []
    for F in F_grid:
        xe_h = xe_h_by_F[float(F)]
        known = None if math.isnan(xe_h) else xe_h
        for xe in xe_grid:
            if known is None and locus.x_c < xe < locus.x_H:
                raise InconclusiveError("Heteroclinic abscissa unavailable", {"F": F, "xe": xe})
            rows.append((float(xe), float(F), _label(xe, locus.x_H, locus.x_c, known, TOL_HET)))
    return rows


def _absent_outcome(p: SmoothParams) -> CycleOutcome:
    try:
        region = classify_region(p)
    except ModelError as exc:
        logger.warning(f"No cycle and no region label at xe={p.xe}: {exc.message}")
        return CycleOutcome.INCONCLUSIVE
    if region.label is SmoothRegion.OMEGA1:
        return CycleOutcome.STATIC
    if region.label is SmoothRegion.OMEGA4:
        return CycleOutcome.COLLAPSE
    logger.warning(f"No cycle found in {region.label.value} at xe={p.xe}, F={p.F}")
    return CycleOutcome.INCONCLUSIVE


def _sweep_point(xe: float, base: SaddlePair, F: float, cfg: IntegratorConfig) -> CycleSweepRow:
    p = base.with_consumer(xe, F)
    try:
        cycle = dynamics_service.find_limit_cycle(p, cfg)
    except InconclusiveError as exc:
        logger.warning(f"Cycle sweep inconclusive at xe={xe}: {exc.message}")
        return CycleSweepRow(xe=xe, outcome=CycleOutcome.INCONCLUSIVE)
    if cycle is not None:
        return CycleSweepRow(xe=xe, outcome=CycleOutcome.CYCLE, x_amplitude=cycle.x_amplitude,
                             y_amplitude=cycle.y_amplitude, period=cycle.period)
    return CycleSweepRow(xe=xe, outcome=_absent_outcome(p))


def cycle_sweep(base: SaddlePair, xe_grid: Sequence[float], F: float,
                cfg: IntegratorConfig = dynamics_service.CYCLE_CONFIG, workers: Optional[int] = None) -> List[CycleSweepRow]:
    """Amplitude and period of the limit cycle along xe at fixed F"""
    return ordered_map(partial(_sweep_point, base=base, F=F, cfg=cfg), [float(xe) for xe in xe_grid], workers)
