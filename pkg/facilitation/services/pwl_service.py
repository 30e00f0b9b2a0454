import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union
import numpy as np
from pydantic import ValidationError
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar
from facilitation.core.exceptions import ChatteringError, DomainError, InconclusiveError, SolverError
from facilitation.models.dynamics import EventKind, IntegratorConfig, LimitCycle, Trajectory, TrajectoryEvent
from facilitation.models.params import OriginalParams, SaddlePair
from facilitation.models.pwl import (
    HabitatEffect,
    PwlLoci,
    PwlMode,
    PwlParams,
    PwlRegion,
    PwlState,
    SaddleEigenReport,
    SlidingData,
    SlidingStability,
)
from facilitation.models.state import State
from facilitation.services import params_service, smooth_model_service
from facilitation.services.dynamics_service import DEFAULT_CONFIG, ReturnOutcome, SectionHeights, iterate_return_map

logger = logging.getLogger(__name__)

Vector = Tuple[float, float]
Base = Union[SaddlePair, PwlParams]

CHATTER_LIMIT = 10_000
CHUNK_EXPONENT = 30.0
TANGENCY_TOL = 1e-10
PSEUDO_EQ_TOL = 1e-10
CLASSIFY_TOL = 1e-12
POLYCYCLE_TOL = 1e-7


def pwl_params(base: Base, xe: float, F: float) -> PwlParams:
    try:
        return PwlParams(x0=base.x0, x1=base.x1, xe=xe, F=F)
    except ValidationError as exc:
        raise DomainError("PWL parameters need x0 < xe < x1 and F > 0",
                          {"x0": base.x0, "x1": base.x1, "xe": xe, "F": F}) from exc

# =============================================================================
# REGION FIELDS
# =============================================================================

@dataclass(frozen=True)
class LinearRegion:
    """
    Affine flow with a saddle at (center, 0), triangular Jacobian [[r1, -center], [0, r2]].

    Exact solution: x = center + A e^{r1 t} + beta y0 e^{r2 t}, y = y0 e^{r2 t},
    with beta = center / (r1 - r2).
    """
    mode: PwlMode
    center: float
    r1: float
    r2: float

    @property
    def beta(self) -> float:
        return self.center / (self.r1 - self.r2)

    def velocity(self, x: float, y: float) -> Vector:
        return (self.r1 * (x - self.center) - self.center * y, self.r2 * y)

    def jacobian(self) -> np.ndarray:
        return np.array([[self.r1, -self.center], [0.0, self.r2]])

    def coefficient(self, x: float, y: float) -> float:
        return x - self.center - self.beta * y

    def state_at(self, x: float, y: float, t):
        A = self.coefficient(x, y)
        grow = np.exp(self.r2 * np.asarray(t, dtype=float))
        xs = self.center + A * np.exp(self.r1 * np.asarray(t, dtype=float)) + self.beta * y * grow
        return xs, y * grow

    def first_hit(self, x: float, y: float, level: float, horizon: float) -> Optional[float]:
        """Earliest t in (0, horizon] with x(t) = level"""
        A, B = self.coefficient(x, y), self.beta * y
        offset = self.center - level
        g = lambda t: offset + A * math.exp(self.r1 * t) + B * math.exp(self.r2 * t)
        breaks = [0.0]
        # x(t) has at most one turning point
        if A != 0.0 and B != 0.0:
            ratio = -B * self.r2 / (A * self.r1)
            if ratio > 0:
                turn = math.log(ratio) / (self.r1 - self.r2)
                if 0.0 < turn < horizon:
                    breaks.append(turn)
        breaks.append(horizon)
        scale = max(1.0, abs(level))
        for left, right in zip(breaks[:-1], breaks[1:]):
            g_left, g_right = g(left), g(right)
            if left == 0.0 and abs(g_left) <= 1e-13 * scale:
                continue
            if g_right == 0.0:
                return right
            if g_left * g_right < 0:
                return brentq(g, left, right, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        return None


def regions(p: PwlParams) -> Tuple[LinearRegion, LinearRegion]:
    x0, x1, xe, F = p.x0, p.x1, p.xe, p.F
    lower = LinearRegion(PwlMode.REGION1, x0, (x1 - x0) / x1, F * (x0 - xe))
    upper = LinearRegion(PwlMode.REGION2, x1, (x0 - x1) / x0, F * (x1 - xe))
    return lower, upper


def _region(p: PwlParams, mode: PwlMode) -> LinearRegion:
    lower, upper = regions(p)
    return lower if mode is PwlMode.REGION1 else upper


def pwl_field(p: PwlParams, s: PwlState) -> Vector:
    if s.mode is PwlMode.SLIDING:
        raise DomainError("Sliding states evolve under sliding_field", {"x": s.x, "y": s.y})
    try:
        s.check_mode(p.xe)
    except ValueError as exc:
        raise DomainError(str(exc), {"x": s.x, "mode": s.mode.value}) from exc
    return _region(p, s.mode).velocity(s.x, s.y)


def saddle_eigenstructure_match(p: PwlParams) -> SaddleEigenReport:
    """Compare the region saddles with the smooth model's vegetation saddles"""
    lower, upper = regions(p)
    pwl_lower = tuple(sorted(np.diag(lower.jacobian()).tolist()))
    pwl_upper = tuple(sorted(np.diag(upper.jacobian()).tolist()))

    smooth = SaddlePair(x0=p.x0, x1=p.x1).with_consumer(p.xe, p.F)
    reports = smooth_model_service.equilibria(smooth)
    by_name = {report.name.value: report for report in reports}
    smooth_lower = tuple(sorted(pair.real for pair in by_name["lower-vegetation"].eigenpairs))
    smooth_upper = tuple(sorted(pair.real for pair in by_name["upper-vegetation"].eigenpairs))

    pwl_ratio = (abs(lower.r2) / lower.r1) * (abs(upper.r1) / upper.r2)
    smooth_ratio = params_service.hyperbolicity_ratio(smooth)
    return SaddleEigenReport(
        pwl_lower=pwl_lower,
        pwl_upper=pwl_upper,
        smooth_lower=smooth_lower,
        smooth_upper=smooth_upper,
        pwl_ratio=pwl_ratio,
        smooth_ratio=smooth_ratio,
        match=pwl_lower == smooth_lower and pwl_upper == smooth_upper,
    )

# =============================================================================
# TRANSLATED FRAME, FIRST INTEGRALS, SLIDING
# =============================================================================

def to_translated(p: PwlParams, x: float, y: float) -> Vector:
    """Fold-centred frame: (x - xe, y - (x1 - x0)^2 / (2 x0 x1))"""
    return x - p.xe, y - p.fold_height


def from_translated(p: PwlParams, u: float, v: float) -> Vector:
    return u + p.xe, v + p.fold_height


def first_integral(p: PwlParams, side: int, s: State) -> float:
    """
    H1 or H2 evaluated in the fold-centred frame.

    Region flows scale the prefactor and the base by exponentials that cancel, so the
    value is constant along each region's own flow.
    """
    if side not in (1, 2):
        raise DomainError("side must be 1 or 2", {"side": side})
    x0, x1 = p.x0, p.x1
    u, v = to_translated(p, s.x, s.y)
    base = x0 ** 2 + 2.0 * x1 * (v - 1.0) * x0 + x1 ** 2
    if base <= 0:
        raise DomainError("First integral base is not positive", {"base": base, "y": s.y})
    region = _region(p, PwlMode.REGION1 if side == 1 else PwlMode.REGION2)
    prefactor = u + (p.xe - region.center) - region.beta * (v + p.fold_height)
    return prefactor * base ** (-region.r1 / region.r2)


def nullcline_heights(p: PwlParams) -> Vector:
    """Heights on the switching line where each region's x-velocity vanishes"""
    x0, x1, xe = p.x0, p.x1, p.xe
    width = x1 - x0
    return width * (xe - x0) / (x0 * x1), width * (x1 - xe) / (x0 * x1)


def _switch_velocities(p: PwlParams, y: float) -> Tuple[float, float, float, float]:
    y1n, y2n = nullcline_heights(p)
    return (p.x0 * (y1n - y), p.F * (p.x0 - p.xe) * y,
            p.x1 * (y2n - y), p.F * (p.x1 - p.xe) * y)


def sliding_field(p: PwlParams, y: float) -> float:
    """Filippov convex combination of the region fields on x = xe"""
    z1x, z1y, z2x, z2y = _switch_velocities(p, y)
    denom = z2x - z1x
    if denom == 0.0:
        raise DomainError("Sliding field undefined where both fields coincide in x", {"y": y})
    return (z2x * z1y - z1x * z2y) / denom


def pseudo_equilibrium_height(p: PwlParams) -> float:
    x0, x1, xe = p.x0, p.x1, p.xe
    y1n, y2n = nullcline_heights(p)
    return (x0 * (x1 - xe) * y1n - x1 * (x0 - xe) * y2n) / (xe * (x1 - x0))


def sliding_data(p: PwlParams) -> SlidingData:
    x0, x1, lam = p.x0, p.x1, p.lam
    if lam == 0:
        return SlidingData(T1=0.0, T2=0.0, P_lambda=None, stability=SlidingStability.DEGENERATE)
    T1 = (x1 - x0) * lam / (x0 * x1)
    P = -lam * (2 * lam * (x0 + x1) + (x1 - x0) ** 2) / (x0 * x1 * (2 * lam + x0 + x1))
    stability = SlidingStability.STABLE if lam > 0 else SlidingStability.UNSTABLE
    return SlidingData(T1=T1, T2=-T1, P_lambda=P, stability=stability)


def manifold_heights(p: PwlParams) -> SectionHeights:
    """Heights on x = xe of the straight invariant manifolds W^s(x0) and W^u(x1)"""
    x0, x1, xe, F = p.x0, p.x1, p.xe, p.F
    h_s = (xe - x0) * ((x1 - x0) / x1 + F * (xe - x0)) / x0
    h_u = (x1 - xe) * (F * (x1 - xe) + (x1 - x0) / x0) / x1
    return SectionHeights(h_u=h_u, h_s=h_s)

# =============================================================================
# CLOSED-FORM LOCI
# =============================================================================

def F_het(base: Base, xe: float) -> float:
    """Heteroclinic rate 2(xe - x_H)/(x0 x1 - xe^2) on (sqrt(x0 x1), x_H]"""
    product = base.x0 * base.x1
    x_H = 0.5 * (base.x0 + base.x1)
    if not math.sqrt(product) < xe <= x_H:
        raise DomainError("Heteroclinic curve defined for sqrt(x0 x1) < xe <= x_H",
                          {"xe": xe, "x_geo": math.sqrt(product), "x_H": x_H})
    return 2.0 * (xe - x_H) / (product - xe * xe)


def _xe_het(F: float, product: float, x_H: float) -> float:
    # (sqrt(1 + F^2 x0x1 + 2F x_H) - 1)/F without cancellation at small F
    root = math.sqrt(1.0 + F * F * product + 2.0 * F * x_H)
    return (F * product + 2.0 * x_H) / (root + 1.0)


def xe_het(base: Base, F: float) -> float:
    if F <= 0:
        raise DomainError("F must be positive", {"F": F})
    return _xe_het(F, base.x0 * base.x1, 0.5 * (base.x0 + base.x1))


def F_B1(base: Base, xe: float) -> float:
    """Rate at which W^s(x0) meets the region-2 tangency; xe in (x0, x_H)"""
    x0, x1 = base.x0, base.x1
    x_H = 0.5 * (x0 + x1)
    if not x0 < xe < x_H:
        raise DomainError("F_B1 defined for x0 < xe < x_H", {"xe": xe})
    return 2.0 * (x1 - x0) * (x_H - xe) / (x1 * (xe - x0) ** 2)


def F_B2(base: Base, xe: float) -> float:
    """Rate at which W^u(x1) meets the region-1 tangency; xe in (x_H, x1)"""
    x0, x1 = base.x0, base.x1
    x_H = 0.5 * (x0 + x1)
    if not x_H < xe < x1:
        raise DomainError("F_B2 defined for x_H < xe < x1", {"xe": xe})
    return 2.0 * (x1 - x0) * (xe - x_H) / (x0 * (x1 - xe) ** 2)


def _tangency_root(A: float, k: float, h: float) -> float:
    # Positive root of A u^2 + k u - k h = 0
    return 2.0 * k * h / (k + math.sqrt(k * k + 4.0 * A * k * h))


def xe_B1(base: Base, F: float) -> float:
    """Inverse of F_B1: the xe in (x0, x_H) where F_B1(xe) = F"""
    if F <= 0:
        raise DomainError("F must be positive", {"F": F})
    x0, x1 = base.x0, base.x1
    return x0 + _tangency_root(F * x1, 2.0 * (x1 - x0), 0.5 * (x1 - x0))


def xe_B2(base: Base, F: float) -> float:
    """Inverse of F_B2: the xe in (x_H, x1) where F_B2(xe) = F"""
    if F <= 0:
        raise DomainError("F must be positive", {"F": F})
    x0, x1 = base.x0, base.x1
    return x1 - _tangency_root(F * x0, 2.0 * (x1 - x0), 0.5 * (x1 - x0))


def pwl_region_margin(p: PwlParams) -> float:
    """Distance in xe, at fixed F, to the nearest of x_H, xe_het, xe_B1 and xe_B2"""
    boundaries = (p.x_H, xe_het(p, p.F), xe_B1(p, p.F), xe_B2(p, p.F))
    return min(abs(p.xe - b) for b in boundaries)


def pseudo_hopf_constant(base: Base, F: float) -> float:
    return -8.0 / (3.0 * F * (base.x1 - base.x0))


def pwl_loci(base: Base, xe: Optional[float] = None, F: Optional[float] = None) -> PwlLoci:
    if isinstance(base, PwlParams):
        xe = base.xe if xe is None else xe
        F = base.F if F is None else F
    x0, x1 = base.x0, base.x1
    if not 0 < x0 < x1:
        raise DomainError("PWL loci need 0 < x0 < x1", {"x0": x0, "x1": x1})
    x_H = 0.5 * (x0 + x1)
    x_geo = math.sqrt(x0 * x1)
    values = {}
    if F is not None:
        values["V1"] = pseudo_hopf_constant(base, F)
        values["xe_het"] = xe_het(base, F)
    if xe is not None:
        if x_geo < xe <= x_H:
            values["F_het"] = F_het(base, xe)
        if x0 < xe < x_H:
            values["F_B1"] = F_B1(base, xe)
        elif x_H < xe < x1:
            values["F_B2"] = F_B2(base, xe)
    return PwlLoci(
        x0=x0, x1=x1, x_H=x_H, x_geo=x_geo, F=F, xe=xe,
        slope_at_hopf=-8.0 / (x1 - x0) ** 2,
        **values,
    )


def pwl_classify_region(p: PwlParams, tol: float = CLASSIFY_TOL) -> PwlRegion:
    lam = p.lam
    if abs(lam) <= tol:
        return PwlRegion.OMEGA3
    if lam > 0:
        return PwlRegion.OMEGA1 if p.F <= F_B2(p, p.xe) else PwlRegion.OMEGA2
    if p.F <= F_B1(p, p.xe):
        return PwlRegion.OMEGA7
    xe_h = xe_het(p, p.F)
    if abs(p.xe - xe_h) <= tol:
        return PwlRegion.OMEGA5
    return PwlRegion.OMEGA4 if p.xe > xe_h else PwlRegion.OMEGA6


def pwl_region_grid(base: Base, xe_grid: Sequence[float],
                    F_grid: Sequence[float]) -> List[Tuple[float, float, PwlRegion, float]]:
    """(xe, F, label, margin) rows, F-major"""
    rows = []
    for F in F_grid:
        for xe in xe_grid:
            p = pwl_params(base, xe, F)
            rows.append((float(xe), float(F), pwl_classify_region(p), pwl_region_margin(p)))
    return rows


def resilience_distance(p: PwlParams, samples: int = 2001) -> float:
    """Euclidean distance in (xe, F) from p to the heteroclinic curve"""
    region = pwl_classify_region(p)
    if region not in (PwlRegion.OMEGA4, PwlRegion.OMEGA5):
        raise DomainError("Resilience is defined in the limit-cycle region",
                          {"region": region.value, "xe": p.xe, "F": p.F})
    if region is PwlRegion.OMEGA5:
        return 0.0
    product, x_H = p.x0 * p.x1, p.x_H

    def distance(xe_star: float) -> float:
        return math.hypot(p.xe - xe_star, p.F - 2.0 * (xe_star - x_H) / (product - xe_star ** 2))

    grid = np.linspace(p.x_geo, x_H, samples)[1:]
    values = np.array([distance(g) for g in grid])
    i = int(np.argmin(values))
    low, high = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if high <= low:
        return float(values[i])
    refined = minimize_scalar(distance, bounds=(low, high), method="bounded", options={"xatol": 1e-12})
    return float(min(values[i], refined.fun))


def habitat_effect(p_orig: OriginalParams, F: float, h: float = 1e-6) -> HabitatEffect:
    """Horizontal gap between pseudo-Hopf and heteroclinic loci and its D-derivative"""
    params_service.vegetation_equilibria(p_orig)
    if F <= 0:
        raise DomainError("F must be positive", {"F": F})
    product = p_orig.eps / p_orig.alpha

    def xe_of(D: float) -> float:
        return _xe_het(F, product, 0.5 * (1.0 - D))

    D = p_orig.D
    x_H = 0.5 * (1.0 - D)
    root = math.sqrt(1.0 + F * F * product + 2.0 * F * x_H)
    closed = -1.0 / (2.0 * root)
    numeric = (xe_of(D + h) - xe_of(D - h)) / (2.0 * h)
    xe_h = xe_of(D)
    d_o_prime = -0.5 - closed
    return HabitatEffect(
        D=D,
        F=F,
        xe_het=xe_h,
        x_H=x_H,
        d_o=x_H - xe_h,
        dxe_het_dD=closed,
        dxe_het_dD_numeric=numeric,
        d_o_prime_sign=int(np.sign(d_o_prime)),
    )

# =============================================================================
# FILIPPOV INTEGRATION
# =============================================================================

@dataclass
class _Recorder:
    times: List[float]
    states: List[Vector]
    modes: List[str]
    events: List[TrajectoryEvent]

    def add(self, ts, xs, ys, mode: PwlMode) -> None:
        for t, x, y in zip(ts, xs, ys):
            self.times.append(float(t))
            self.states.append((float(x), float(y)))
            self.modes.append(mode.value)

    def event(self, t: float, kind: EventKind, x: float, y: float) -> None:
        self.events.append(TrajectoryEvent(t, kind.value, (x, y)))


def switching_transition(p: PwlParams, y: float, came_from: PwlMode) -> PwlMode:
    """
    Mode entered at height y on x = xe by a state arriving from came_from.

    Crossing when the receiving field keeps pushing the same way, sliding when the
    two fields point into the line from both sides.
    """
    z1x, _, z2x, _ = _switch_velocities(p, y)
    if came_from is PwlMode.REGION1:
        if z1x < 0:
            return PwlMode.REGION1
        if z2x > 0 or p.lam == 0:
            return PwlMode.REGION2
        return PwlMode.SLIDING
    if z2x > 0:
        return PwlMode.REGION2
    if z1x < 0 or p.lam == 0:
        return PwlMode.REGION1
    return PwlMode.SLIDING


def _samples(duration: float, cfg: IntegratorConfig) -> np.ndarray:
    n = max(17, int(math.ceil(duration / cfg.max_step)) + 1)
    return np.linspace(0.0, duration, n)


def _run_region(p: PwlParams, mode: PwlMode, x: float, y: float, horizon: float,
                cfg: IntegratorConfig, rec: Optional[_Recorder], t0: float):
    """Exact propagation in one region until the switching line, collapse or horizon"""
    region = _region(p, mode)
    targets = [(EventKind.SECTION, p.xe)]
    if mode is PwlMode.REGION1:
        targets.append((EventKind.COLLAPSE, p.x0))
    rate = max(abs(region.r1), abs(region.r2))
    elapsed = 0.0
    while elapsed < horizon:
        chunk = min(horizon - elapsed, CHUNK_EXPONENT / rate)
        hits = [(region.first_hit(x, y, level, chunk), kind, level) for kind, level in targets]
        hits = [hit for hit in hits if hit[0] is not None]
        if hits:
            t_hit, kind, level = min(hits, key=lambda hit: hit[0])
            if rec is not None:
                ts = _samples(t_hit, cfg)
                xs, ys = region.state_at(x, y, ts)
                rec.add(t0 + elapsed + ts[1:], xs[1:], ys[1:], mode)
                rec.states[-1] = (level, rec.states[-1][1])
            _, y_hit = region.state_at(x, y, t_hit)
            return elapsed + t_hit, kind, (level, float(y_hit))
        ts = _samples(chunk, cfg)
        xs, ys = region.state_at(x, y, ts)
        if rec is not None:
            rec.add(t0 + elapsed + ts[1:], xs[1:], ys[1:], mode)
        x, y = float(xs[-1]), float(ys[-1])
        elapsed += chunk
    return horizon, None, (x, y)


def _run_sliding(p: PwlParams, y: float, horizon: float, cfg: IntegratorConfig,
                 rec: Optional[_Recorder], t0: float):
    """Sliding motion on x = xe until a tangency, the pseudo-equilibrium or the horizon"""
    y1n, y2n = nullcline_heights(p)
    low, high = min(y1n, y2n), max(y1n, y2n)
    y_P = pseudo_equilibrium_height(p)
    rate = sliding_field(p, y)
    if abs(y - low) <= TANGENCY_TOL and rate < 0:
        return 0.0, PwlMode.REGION2, y
    if abs(y - high) <= TANGENCY_TOL and rate > 0:
        return 0.0, PwlMode.REGION1, y

    def leave_low(t, s):
        return s[0] - low
    leave_low.terminal, leave_low.direction = True, -1

    def leave_high(t, s):
        return s[0] - high
    leave_high.terminal, leave_high.direction = True, 1

    def settle(t, s):
        return abs(s[0] - y_P) - PSEUDO_EQ_TOL
    settle.terminal, settle.direction = True, -1

    events = [leave_low, leave_high]
    if abs(y - y_P) > PSEUDO_EQ_TOL:
        events.append(settle)
    sol = solve_ivp(
        lambda t, s: [sliding_field(p, s[0])], (0.0, horizon), [y],
        method="RK45", rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step,
        events=events,
    )
    if sol.status < 0:
        raise SolverError(f"Sliding integration failed: {sol.message}", {"y": y})
    if rec is not None:
        n = len(sol.t)
        rec.add(t0 + sol.t[1:], np.full(n - 1, p.xe), sol.y[0, 1:], PwlMode.SLIDING)
    duration = float(sol.t[-1])
    y_end = float(sol.y[0, -1])
    if sol.status == 1:
        if len(sol.t_events[0]):
            return duration, PwlMode.REGION2, low
        if len(sol.t_events[1]):
            return duration, PwlMode.REGION1, high
        if rec is not None:
            rec.event(t0 + duration, EventKind.EQUILIBRIUM, p.xe, y_P)
            if horizon > duration:
                rec.add([t0 + horizon], [p.xe], [y_P], PwlMode.SLIDING)
        return horizon, None, y_P
    return duration, None, y_end


def pwl_integrate(p: PwlParams, s0: PwlState, cfg: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """
    Filippov trajectory: exact region flows, crossing or sliding on x = xe.

    Every mode change is recorded as a "mode" event; reaching x = x0 in region 1 ends
    the run with a "collapse" event.
    """
    try:
        s0.check_mode(p.xe)
    except ValueError as exc:
        raise DomainError(str(exc), {"x": s0.x, "mode": s0.mode.value}) from exc
    rec = _Recorder([0.0], [(s0.x, s0.y)], [s0.mode.value], [])
    t, x, y, mode = 0.0, s0.x, s0.y, s0.mode
    if mode is PwlMode.SLIDING:
        x = p.xe
    switches = 0
    handed_off = False

    while t < cfg.t_max:
        remaining = cfg.t_max - t
        if mode is PwlMode.SLIDING:
            duration, next_mode, y = _run_sliding(p, y, remaining, cfg, rec, t)
            t += duration
            if next_mode is None:
                break
            rec.event(t, EventKind.MODE, p.xe, y)
            mode, handed_off = next_mode, True
            continue

        if mode is PwlMode.REGION1 and x <= p.x0:
            rec.event(t, EventKind.COLLAPSE, x, y)
            break
        if x == p.xe and not handed_off:
            entered = switching_transition(p, y, mode)
            if entered is not mode:
                rec.event(t, EventKind.MODE, x, y)
                mode = entered
                continue
        handed_off = False

        duration, kind, (x, y) = _run_region(p, mode, x, y, remaining, cfg, rec, t)
        t += duration
        if kind is EventKind.COLLAPSE:
            rec.event(t, EventKind.COLLAPSE, x, y)
            break
        if kind is EventKind.SECTION:
            switches += 1
            if switches >= CHATTER_LIMIT:
                raise ChatteringError(details={"events": switches, "time": t, "y": y})
            rec.event(t, EventKind.SECTION, x, y)
            entered = switching_transition(p, y, mode)
            if entered is not mode:
                rec.event(t, EventKind.MODE, x, y)
            mode = entered
            handed_off = True

    return Trajectory(
        times=np.asarray(rec.times),
        states=np.asarray(rec.states),
        events=rec.events,
        modes=rec.modes,
        meta={"switches": switches, "final_mode": mode.value},
    )

# =============================================================================
# CROSSING LIMIT CYCLES
# =============================================================================

def _crossing_return(p: PwlParams, y: float, cfg: IntegratorConfig,
                     record: bool = False) -> Tuple[ReturnOutcome, Optional[float], float, Optional[np.ndarray]]:
    """Region 1 then region 2 from (xe, y) back to the line, crossing at both visits"""
    y1n, y2n = nullcline_heights(p)
    rec = _Recorder([0.0], [(p.xe, y)], [PwlMode.REGION1.value], []) if record else None
    t1, kind, (_, y_mid) = _run_region(p, PwlMode.REGION1, p.xe, y, cfg.t_max, cfg, rec, 0.0)
    if kind is EventKind.COLLAPSE:
        return ReturnOutcome.COLLAPSE, None, t1, None
    if kind is None:
        return ReturnOutcome.TIMEOUT, None, t1, None
    if y_mid >= y2n:
        return ReturnOutcome.EQUILIBRIUM, None, t1, None
    t2, kind, (_, y_next) = _run_region(p, PwlMode.REGION2, p.xe, y_mid, max(cfg.t_max - t1, cfg.max_step),
                                        cfg, rec, t1)
    if kind is None:
        return ReturnOutcome.TIMEOUT, None, t1 + t2, None
    if y_next <= y1n:
        return ReturnOutcome.EQUILIBRIUM, None, t1 + t2, None
    samples = np.asarray(rec.states) if record else None
    return ReturnOutcome.RETURNED, y_next, t1 + t2, samples


def pwl_find_limit_cycle(p: PwlParams, cfg: IntegratorConfig = DEFAULT_CONFIG,
                         tol: float = 1e-9, max_iter: int = 500) -> Optional[LimitCycle]:
    """Crossing cycle through x = xe for lam < 0; None otherwise"""
    if p.lam >= 0:
        return None
    floor = max(nullcline_heights(p))
    ceiling = manifold_heights(p).h_s
    if ceiling <= floor:
        logger.debug(f"No PWL cycle at xe={p.xe}, F={p.F}: W^s(x0) below the tangency")
        return None

    def step(y: float) -> Tuple[str, Optional[float]]:
        outcome, y_next, _, _ = _crossing_return(p, y, cfg)
        return outcome.value, y_next

    seeds = [floor + f * (ceiling - floor) for f in (0.25, 0.5, 0.75)]
    fixed_points, outcomes, iterations = [], [], 0
    for seed in seeds:
        try:
            value, outcome, used = iterate_return_map(
                step, seed, floor=floor, ceiling=ceiling, tol=tol, max_iter=max_iter,
                floor_tol=0.0, ceiling_tol=POLYCYCLE_TOL * max(1.0, ceiling),
            )
        except InconclusiveError:
            logger.warning(f"PWL return map inconclusive at xe={p.xe}, F={p.F}, seed={seed}")
            raise
        iterations += used
        outcomes.append(outcome)
        if value is not None:
            fixed_points.append(value)
    if not fixed_points:
        logger.debug(f"No PWL cycle at xe={p.xe}, F={p.F}: {outcomes}")
        return None
    if max(fixed_points) - min(fixed_points) > 1e-6 or len(fixed_points) < len(seeds):
        logger.warning(f"PWL seeds disagree at xe={p.xe}, F={p.F}: {fixed_points}, outcomes {outcomes}")

    y_star = fixed_points[0]
    outcome, y_back, period, samples = _crossing_return(p, y_star, cfg, record=True)
    if outcome is not ReturnOutcome.RETURNED:
        raise InconclusiveError("Converged switching point does not return", {"y": y_star})
    amplitude = (
        float(samples[:, 0].min()), float(samples[:, 0].max()),
        float(samples[:, 1].min()), float(samples[:, 1].max()),
    )
    return LimitCycle(
        section_point=(p.xe, y_star),
        period=period,
        samples=samples,
        amplitude=amplitude,
        residual=abs(y_back - y_star),
        seeds=seeds,
        fixed_points=fixed_points,
        iterations=iterations,
    )
