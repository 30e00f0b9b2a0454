import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple
import numpy as np
from scipy.integrate import solve_ivp
from facilitation.core.exceptions import (
    DomainError,
    InconclusiveError,
    NoCrossingError,
    SolverError,
    StiffnessError,
)
from facilitation.models.dynamics import (
    EventKind,
    EventSpec,
    IntegratorConfig,
    LimitCycle,
    LineCrossing,
    NormThreshold,
    Trajectory,
    TrajectoryEvent,
)
from facilitation.models.params import SmoothParams
from facilitation.models.state import State
from facilitation.services import smooth_model_service

logger = logging.getLogger(__name__)

Field2D = Callable[[float, float], Tuple[float, float]]

DEFAULT_CONFIG = IntegratorConfig()
CYCLE_CONFIG = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13, max_step=0.1, t_max=500.0)

RICHARDSON_TOL = 1e-4
MAX_OFFSET_REFINEMENTS = 4
COLLAPSE_X_FACTOR = 0.5
COLLAPSE_Y = 1e-6
MIN_CYCLE_FRACTION = 1e-2
SCAN_HEIGHTS = 8

# =============================================================================
# INTEGRATION
# =============================================================================

@dataclass
class RawEvent:
    """Event callable handed to solve_ivp together with its label"""
    kind: str
    function: Callable[[float, np.ndarray], float]
    direction: int = 0
    terminal: bool = True


def _spec_event(spec: EventSpec) -> RawEvent:
    if isinstance(spec, LineCrossing):
        (px, py), (nx, ny) = spec.point, spec.normal
        return RawEvent(spec.kind.value, lambda t, s: nx * (s[0] - px) + ny * (s[1] - py),
                        spec.direction, spec.terminal)
    cx, cy = spec.center
    radius = spec.radius
    return RawEvent(spec.kind.value, lambda t, s: math.hypot(s[0] - cx, s[1] - cy) - radius,
                    -1 if spec.inward else 1, spec.terminal)


def _wrap(event: RawEvent):
    def g(t, s):
        return event.function(t, s)
    g.terminal = event.terminal
    g.direction = event.direction
    return g


def integrate_field(vector_field: Field2D, s0: Tuple[float, float], cfg: IntegratorConfig,
                    time_direction: int = 1, extra_events: Sequence[RawEvent] = (),
                    t_max: Optional[float] = None) -> Trajectory:
    """
    Dormand-Prince 5(4) integration of a planar field with event location.

    Reversed time integrates -field; reported times still increase from 0.
    """
    sign = float(time_direction)

    def rhs(t, s):
        dx, dy = vector_field(s[0], s[1])
        return [sign * dx, sign * dy]

    events = [_spec_event(spec) for spec in cfg.events] + list(extra_events)
    horizon = t_max if t_max is not None else cfg.t_max
    sol = solve_ivp(
        rhs, (0.0, horizon), np.asarray(s0, dtype=float), method="RK45",
        rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step,
        events=[_wrap(event) for event in events] or None,
    )
    if sol.status < 0:
        raise StiffnessError(sol.message, last_time=float(sol.t[-1]),
                             last_state=tuple(float(v) for v in sol.y[:, -1]))

    steps = np.diff(sol.t)
    if steps.size > 1 and steps[:-1].min() < cfg.min_step:
        i = int(steps[:-1].argmin())
        raise StiffnessError(
            "Step size fell below min_step",
            last_time=float(sol.t[i]),
            last_state=tuple(float(v) for v in sol.y[:, i]),
            details={"step": float(steps[i]), "min_step": cfg.min_step},
        )

    recorded: List[TrajectoryEvent] = []
    if events:
        for event, times, states in zip(events, sol.t_events, sol.y_events):
            for t, s in zip(times, states):
                recorded.append(TrajectoryEvent(float(t), event.kind, (float(s[0]), float(s[1]))))
        recorded.sort(key=lambda e: e.time)

    return Trajectory(
        times=sol.t.copy(),
        states=sol.y.T.copy(),
        events=recorded,
        time_direction=time_direction,
        meta={"nfev": int(sol.nfev), "status": int(sol.status)},
    )


def integrate(p: SmoothParams, s0: State, cfg: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """Integrate the smooth model from s0 under cfg"""
    return integrate_field(lambda x, y: smooth_model_service.field_xy(p, x, y), s0.as_tuple(), cfg)

# =============================================================================
# SEPARATRICES
# =============================================================================

class Separatrix(str, Enum):
    UNSTABLE_OF_X0 = "unstable-of-x0"
    STABLE_OF_X0 = "stable-of-x0"
    UNSTABLE_OF_X1 = "unstable-of-x1"
    STABLE_OF_X1 = "stable-of-x1"


def default_offset(p: SmoothParams) -> float:
    return 1e-6 * (p.x1 - p.x0)


def _separatrix_start(p: SmoothParams, which: Separatrix, offset: float) -> Tuple[Tuple[float, float], int, float]:
    """Initial state, time direction and the governing eigenvalue magnitude"""
    x0, x1, xe, F = p.x0, p.x1, p.xe, p.F
    if which is Separatrix.UNSTABLE_OF_X0:
        return (x0 + offset, 0.0), 1, (x1 - x0) / x1
    if which is Separatrix.STABLE_OF_X1:
        return (x1 - offset, 0.0), -1, (x1 - x0) / x0
    if which is Separatrix.STABLE_OF_X0:
        vx, vy = smooth_model_service.lower_saddle_stable_direction(p)
        if vy < 0:
            vx, vy = -vx, -vy
        return (x0 + offset * vx, offset * vy), -1, abs(F * (x0 - xe))
    vx, vy = smooth_model_service.upper_saddle_unstable_direction(p)
    if vy < 0:
        vx, vy = -vx, -vy
    return (x1 + offset * vx, offset * vy), 1, abs(F * (x1 - xe))


def _shooting_horizon(p: SmoothParams, cfg: IntegratorConfig, offset: float, rate: float) -> float:
    # Slow drift is O(F); leaving the saddle takes log(scale/offset)/rate
    escape = math.log((p.x1 - p.x0) / offset) / rate if rate > 0 else 0.0
    return max(cfg.t_max, 10.0 / p.F) + escape


def _guard_events(p: SmoothParams) -> List[RawEvent]:
    events = []
    y_e = p.y_e
    if p.x0 < p.xe < p.x1:
        xe, radius = p.xe, 1e-7 * (p.x1 - p.x0)
        events.append(RawEvent(EventKind.EQUILIBRIUM.value,
                               lambda t, s: math.hypot(s[0] - xe, s[1] - y_e) - radius, -1))
    bound = 1e3 * max(p.x1, 1.0)
    events.append(RawEvent(EventKind.ESCAPE.value, lambda t, s: math.hypot(s[0], s[1]) - bound, 1))
    return events


def trace_separatrix(p: SmoothParams, which: Separatrix, offset: Optional[float] = None,
                     cfg: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """
    Follow a saddle branch until its first crossing of x = xe or t_max.

    The branch starts at saddle + offset * (unit eigenvector into the open quadrant);
    stable branches run in reversed time.
    """
    which = Separatrix(which)
    offset = default_offset(p) if offset is None else offset
    if not offset > 0:
        raise DomainError("Separatrix offset must be positive", {"offset": offset})
    start, direction, rate = _separatrix_start(p, which, offset)
    xe = p.xe
    section = RawEvent(EventKind.SECTION.value, lambda t, s: s[0] - xe, 0)
    trajectory = integrate_field(
        lambda x, y: smooth_model_service.field_xy(p, x, y), start, cfg,
        time_direction=direction, extra_events=[section, *_guard_events(p)],
        t_max=_shooting_horizon(p, cfg, offset, rate),
    )
    logger.debug(f"{which.value}: {len(trajectory.times)} steps, events={[e.kind for e in trajectory.events]}")
    return trajectory


def _crossing_height(p: SmoothParams, which: Separatrix, offset: float, cfg: IntegratorConfig) -> float:
    trajectory = trace_separatrix(p, which, offset, cfg)
    section = trajectory.first_event(EventKind.SECTION.value)
    equilibrium = trajectory.first_event(EventKind.EQUILIBRIUM.value)
    if section is not None and (equilibrium is None or section.time <= equilibrium.time):
        return section.state[1]
    if equilibrium is not None and which is Separatrix.STABLE_OF_X0:
        # Backward branch ends on the coexistence node
        return p.y_e
    last = trajectory.events[-1].kind if trajectory.events else "t_max"
    raise NoCrossingError(which.value, details={"stopped_by": last, "final_state": list(trajectory.final_state)})


def section_height(p: SmoothParams, which: Separatrix, cfg: IntegratorConfig = DEFAULT_CONFIG,
                   offset: Optional[float] = None, refine: bool = False) -> Tuple[float, Optional[float]]:
    """Crossing height on x = xe and, when refined, the shift under offset halving"""
    offset = default_offset(p) if offset is None else offset
    height = _crossing_height(p, which, offset, cfg)
    if not refine:
        return height, None
    shift = math.inf
    for _ in range(MAX_OFFSET_REFINEMENTS):
        halved = _crossing_height(p, which, offset / 2, cfg)
        shift = abs(halved - height)
        offset, height = offset / 2, halved
        if shift < RICHARDSON_TOL:
            break
    else:
        logger.warning(f"{which.value}: offset refinement stalled, shift={shift:.3g}")
    return height, shift


@dataclass(frozen=True)
class SectionHeights:
    h_u: float
    h_s: float
    shift: Optional[float] = None

    @property
    def gap(self) -> float:
        return self.h_u - self.h_s


def section_heights(p: SmoothParams, cfg: IntegratorConfig = DEFAULT_CONFIG,
                    refine: bool = False) -> SectionHeights:
    if not p.x0 < p.xe < p.x1:
        raise DomainError("Section gap needs x0 < xe < x1", {"xe": p.xe})
    h_u, shift_u = section_height(p, Separatrix.UNSTABLE_OF_X1, cfg, refine=refine)
    h_s, shift_s = section_height(p, Separatrix.STABLE_OF_X0, cfg, refine=refine)
    shift = max(shift_u, shift_s) if refine else None
    return SectionHeights(h_u=h_u, h_s=h_s, shift=shift)


def section_gap(p: SmoothParams, cfg: IntegratorConfig = DEFAULT_CONFIG, refine: bool = False) -> float:
    """
    Signed distance h_u - h_s on x = xe between W^u(x1) and W^s(x0).

    Negative on the oscillation side, positive on the collapse side, zero at the
    heteroclinic connection.
    """
    return section_heights(p, cfg, refine).gap

# =============================================================================
# RETURN MAP AND LIMIT CYCLES
# =============================================================================

class ReturnOutcome(str, Enum):
    RETURNED = "returned"
    EQUILIBRIUM = "equilibrium"
    COLLAPSE = "collapse"
    ESCAPE = "escape"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class SectionReturn:
    outcome: ReturnOutcome
    y: Optional[float]
    time: float
    samples: Optional[np.ndarray] = None


def _collapse_event(p: SmoothParams) -> RawEvent:
    x_limit = COLLAPSE_X_FACTOR * p.x0
    return RawEvent(EventKind.COLLAPSE.value, lambda t, s: max(s[0] - x_limit, s[1] - COLLAPSE_Y), -1)


def poincare_return(p: SmoothParams, y: float, cfg: IntegratorConfig = CYCLE_CONFIG,
                    reverse: bool = False, record: bool = False) -> SectionReturn:
    """One return to the half-line {x = xe, y > y_e}"""
    xe = p.xe
    direction = -1 if reverse else 1
    # Sign of x' on the half-line in integration time
    sign = 1 if reverse else -1
    vector_field = lambda x, yy: smooth_model_service.field_xy(p, x, yy)
    guards = [*_guard_events(p)] + ([] if reverse else [_collapse_event(p)])

    first = integrate_field(
        vector_field, (xe, y), cfg, time_direction=direction,
        extra_events=[RawEvent(EventKind.SECTION.value, lambda t, s: s[0] - xe, -sign), *guards],
    )
    ending = _classify_end(first)
    if ending is not ReturnOutcome.RETURNED:
        return SectionReturn(ending, None, first.final_time)

    second = integrate_field(
        vector_field, first.final_state, cfg, time_direction=direction,
        extra_events=[RawEvent(EventKind.SECTION.value, lambda t, s: s[0] - xe, sign), *guards],
        t_max=max(cfg.t_max - first.final_time, cfg.max_step),
    )
    ending = _classify_end(second)
    total = first.final_time + second.final_time
    if ending is not ReturnOutcome.RETURNED:
        return SectionReturn(ending, None, total)
    samples = np.vstack([first.states, second.states[1:]]) if record else None
    return SectionReturn(ReturnOutcome.RETURNED, second.final_state[1], total, samples)


def _classify_end(trajectory: Trajectory) -> ReturnOutcome:
    if not trajectory.events:
        return ReturnOutcome.TIMEOUT
    kind = trajectory.events[-1].kind
    return {
        EventKind.SECTION.value: ReturnOutcome.RETURNED,
        EventKind.EQUILIBRIUM.value: ReturnOutcome.EQUILIBRIUM,
        EventKind.COLLAPSE.value: ReturnOutcome.COLLAPSE,
        EventKind.ESCAPE.value: ReturnOutcome.ESCAPE,
    }.get(kind, ReturnOutcome.TIMEOUT)


def _seed_heights(p: SmoothParams, cfg: IntegratorConfig) -> Tuple[List[float], float]:
    """Seeds between y_e and the stable manifold of x0 on the section"""
    y_e = p.y_e
    try:
        y_top, _ = section_height(p, Separatrix.STABLE_OF_X0, cfg)
    except SolverError as exc:
        logger.debug(f"Seed ceiling unavailable ({exc.message}); using nullcline scale")
        y_top = math.nan
    if not (y_top > y_e):
        y_top = y_e + (p.x1 - p.x0) ** 2 / (p.x0 * p.x1)
    return [y_e + f * (y_top - y_e) for f in (0.25, 0.5, 0.75)], y_top


def iterate_return_map(step: Callable[[float], Tuple[str, Optional[float]]], seed: float, floor: float,
                       ceiling: float, tol: float = 1e-9, max_iter: int = 200,
                       floor_tol: float = 1e-7, ceiling_tol: float = 0.0) -> Tuple[Optional[float], str, int]:
    """
    Fixed point of a section return map by iteration with guarded Aitken acceleration.

    step(y) returns (outcome, next height); any outcome other than "returned" ends the
    search. Reaching floor (an equilibrium) or ceiling (a separatrix loop) also ends it.
    """
    y = seed
    history = [y]
    for k in range(1, max_iter + 1):
        outcome, y_next = step(y)
        if outcome != ReturnOutcome.RETURNED.value:
            return None, outcome, k
        if abs(y_next - floor) < floor_tol:
            return None, ReturnOutcome.EQUILIBRIUM.value, k
        if ceiling_tol > 0 and ceiling - y_next < ceiling_tol:
            return None, "polycycle", k
        if abs(y_next - y) < tol:
            return y_next, "converged", k
        history.append(y_next)
        y = y_next
        if len(history) >= 3:
            a, b, c = history[-3:]
            denom = c - 2.0 * b + a
            if denom != 0.0:
                accelerated = a - (b - a) ** 2 / denom
                # Extrapolate only forward along the motion and inside the basin
                if (accelerated - c) * (c - b) > 0 and floor + floor_tol < accelerated < ceiling:
                    y = accelerated
                    history = [accelerated]
    raise InconclusiveError(details={"seed": seed, "last": y, "iterations": max_iter})


def _smooth_step(p: SmoothParams, cfg: IntegratorConfig) -> Callable[[float], Tuple[str, Optional[float]]]:
    def step(y: float) -> Tuple[str, Optional[float]]:
        result = poincare_return(p, y, cfg)
        return result.outcome.value, result.y
    return step


def _displacement_signs(p: SmoothParams, cfg: IntegratorConfig, y_top: float, count: int = SCAN_HEIGHTS) -> List[int]:
    """Signs of P(y) - y at evenly spaced heights that return to the section"""
    signs = []
    for y in np.linspace(p.y_e, y_top, count + 2)[1:-1]:
        result = poincare_return(p, float(y), cfg)
        if result.outcome is ReturnOutcome.RETURNED:
            signs.append(int(np.sign(result.y - y)))
    return signs


def find_limit_cycle(p: SmoothParams, cfg: IntegratorConfig = CYCLE_CONFIG, seeds: Optional[Sequence[float]] = None,
                     tol: float = 1e-9, max_iter: int = 200) -> Optional[LimitCycle]:
    """
    Stable limit cycle through the downward branch of x = xe, or None.

    Absent when every seed ends at the equilibrium, collapses, escapes or never
    returns. Fixed points closer to y_e than MIN_CYCLE_FRACTION of the seed band
    count as the equilibrium. Seeds that exhaust the budget fall back to a sign scan
    of the displacement P(y) - y; a sign change there raises InconclusiveError.
    """
    if not p.x0 < p.xe < p.x1:
        raise DomainError("Limit-cycle search needs x0 < xe < x1", {"xe": p.xe})
    reason = smooth_model_service.no_cycle_reason(p)

    default_seeds, y_top = _seed_heights(p, cfg)
    seeds = list(seeds) if seeds is not None else default_seeds
    min_height = MIN_CYCLE_FRACTION * (y_top - p.y_e)
    fixed_points, outcomes, iterations = [], [], 0
    for seed in seeds:
        try:
            value, outcome, used = iterate_return_map(
                _smooth_step(p, cfg), seed, floor=p.y_e, ceiling=y_top, tol=tol, max_iter=max_iter,
                floor_tol=1e-7 * max(1.0, p.y_e),
            )
        except InconclusiveError:
            value, outcome, used = None, "inconclusive", max_iter
        if value is not None and value - p.y_e < min_height:
            value, outcome = None, ReturnOutcome.EQUILIBRIUM.value
        iterations += used
        outcomes.append(outcome)
        if value is not None:
            fixed_points.append(value)

    if not fixed_points:
        if "inconclusive" in outcomes:
            signs = _displacement_signs(p, cfg, y_top)
            if len(set(signs)) > 1:
                raise InconclusiveError("Return map displacement changes sign but no seed converged",
                                        {"xe": p.xe, "F": p.F, "signs": signs})
        logger.debug(f"No limit cycle at xe={p.xe}, F={p.F}: {outcomes} (analytic: {reason})")
        return None
    if reason is not None:
        logger.warning(f"Cycle found at xe={p.xe}, F={p.F} despite '{reason}'")

    spread = max(fixed_points) - min(fixed_points)
    if spread > 1e-6 or len(fixed_points) < len(seeds):
        logger.warning(f"Seeds disagree at xe={p.xe}, F={p.F}: fixed points {fixed_points}, outcomes {outcomes}")

    y_star = fixed_points[0]
    loop = poincare_return(p, y_star, cfg, record=True)
    if loop.outcome is not ReturnOutcome.RETURNED:
        raise InconclusiveError("Converged section point does not return", {"y": y_star})
    try:
        multiplier = return_map_slope(p, y_star, cfg)
    except SolverError as exc:
        logger.debug(f"Multiplier unavailable at y={y_star}: {exc.message}")
        multiplier = None
    samples = loop.samples
    amplitude = (
        float(samples[:, 0].min()), float(samples[:, 0].max()),
        float(samples[:, 1].min()), float(samples[:, 1].max()),
    )
    return LimitCycle(
        section_point=(p.xe, y_star),
        period=loop.time,
        samples=samples,
        amplitude=amplitude,
        residual=abs(loop.y - y_star),
        seeds=list(seeds),
        fixed_points=fixed_points,
        iterations=iterations,
        multiplier=multiplier,
    )


def return_map_slope(p: SmoothParams, y: float, cfg: IntegratorConfig = CYCLE_CONFIG,
                     reverse: bool = False, h: float = 1e-5) -> float:
    """Central-difference derivative of the section return map at y"""
    plus = poincare_return(p, y + h, cfg, reverse=reverse)
    minus = poincare_return(p, y - h, cfg, reverse=reverse)
    if plus.y is None or minus.y is None:
        raise SolverError("Return map undefined near y", {"y": y, "reverse": reverse})
    return (plus.y - minus.y) / (2.0 * h)
