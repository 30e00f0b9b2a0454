import logging
import math
from typing import Dict, List, Optional, Tuple
import numpy as np
from scipy.optimize import minimize_scalar
from facilitation.models.params import SmoothParams
from facilitation.models.state import (
    Chart,
    ChartField,
    Eigenpair,
    EquilibriumKind,
    EquilibriumName,
    EquilibriumReport,
    State,
)

logger = logging.getLogger(__name__)

Vector = Tuple[float, float]

# =============================================================================
# VECTOR FIELD
# =============================================================================

def resource_nullcline(p: SmoothParams, x):
    """y0(x) = -(x - x0)(x - x1)/(x0 x1); works on floats and arrays"""
    return -(x - p.x0) * (x - p.x1) / (p.x0 * p.x1)


def field_xy(p: SmoothParams, x: float, y: float) -> Vector:
    """Factored field, exact zeros on both axes"""
    return (x * (resource_nullcline(p, x) - y), p.F * y * (x - p.xe))


def field(p: SmoothParams, s: State) -> Vector:
    """
    Velocity of the smooth model at s.

    x' = -x^3/(x0 x1) + (x0 + x1) x^2/(x0 x1) - x y - x
    y' = F (x y - xe y)
    """
    return field_xy(p, s.x, s.y)


def field_array(p: SmoothParams, xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return (xs * (resource_nullcline(p, xs) - ys), p.F * ys * (xs - p.xe))


def jacobian_xy(p: SmoothParams, x: float, y: float) -> np.ndarray:
    x0x1 = p.x0 * p.x1
    dy0 = -(2.0 * x - p.x0 - p.x1) / x0x1
    return np.array([
        [resource_nullcline(p, x) - y + x * dy0, -x],
        [p.F * y, p.F * (x - p.xe)],
    ])


def jacobian(p: SmoothParams, s: State) -> np.ndarray:
    return jacobian_xy(p, s.x, s.y)


def rotation_determinant(p: SmoothParams, s: State) -> float:
    """Theta = -F y P(x, y): sign of the field's turning as xe increases"""
    return -p.F * s.y * field_xy(p, s.x, s.y)[0]

# =============================================================================
# EQUILIBRIA
# =============================================================================

def classify(trace: float, det: float, discriminant: float) -> EquilibriumKind:
    """Linear type from trace, determinant and discriminant; repeated roots count as nodes"""
    if det < 0:
        return EquilibriumKind.SADDLE
    stable = trace <= 0
    if discriminant >= 0:
        return EquilibriumKind.STABLE_NODE if stable else EquilibriumKind.UNSTABLE_NODE
    return EquilibriumKind.STABLE_FOCUS if stable else EquilibriumKind.UNSTABLE_FOCUS


def kind_from_eigenvalues(eigenvalues) -> EquilibriumKind:
    l1, l2 = (complex(value) for value in eigenvalues)
    if abs(l1.imag) > 0 or abs(l2.imag) > 0:
        return EquilibriumKind.STABLE_FOCUS if l1.real <= 0 else EquilibriumKind.UNSTABLE_FOCUS
    a, b = l1.real, l2.real
    if a * b < 0:
        return EquilibriumKind.SADDLE
    return EquilibriumKind.STABLE_NODE if a + b <= 0 else EquilibriumKind.UNSTABLE_NODE


def _unit(vector: Vector) -> Vector:
    norm = math.hypot(*vector)
    return (vector[0] / norm, vector[1] / norm)


def _eigen_from_jacobian(J: np.ndarray, trace: float, discriminant: float) -> Tuple[Eigenpair, Eigenpair]:
    if discriminant < 0:
        root = math.sqrt(-discriminant)
        return (
            Eigenpair(real=trace / 2, imag=root / 2),
            Eigenpair(real=trace / 2, imag=-root / 2),
        )
    root = math.sqrt(discriminant)
    pairs = []
    for value in (0.5 * (trace + root), 0.5 * (trace - root)):
        a, b = J[0]
        c, d = J[1]
        if abs(b) > 0:
            vector = (b, value - a)
        elif abs(c) > 0:
            vector = (value - d, c)
        else:
            vector = (1.0, 0.0) if abs(value - a) <= abs(value - d) else (0.0, 1.0)
        pairs.append(Eigenpair(real=value, vector=_unit(vector)))
    return tuple(pairs)


def _report(name: EquilibriumName, point: State, trace: float, det: float,
            pairs: Tuple[Eigenpair, Eigenpair], rotation: Optional[str] = None,
            flags: List[str] = None) -> EquilibriumReport:
    discriminant = trace * trace - 4.0 * det
    flags = list(flags or [])
    if det == 0:
        flags.append("degenerate")
    if trace == 0 and det > 0:
        flags.append("weak-focus")
    return EquilibriumReport(
        name=name,
        point=point,
        kind=classify(trace, det, discriminant),
        trace=trace,
        det=det,
        discriminant=discriminant,
        eigenpairs=pairs,
        rotation=rotation,
        flags=flags,
    )


def lower_saddle_stable_direction(p: SmoothParams) -> Vector:
    """Eigenvector of (x0, 0) for F(x0 - xe)"""
    denom = p.F * p.x1 * (p.xe - p.x0) + p.x1 - p.x0
    return _unit((p.x0 * p.x1 / denom, 1.0))


def upper_saddle_unstable_direction(p: SmoothParams) -> Vector:
    """Eigenvector of (x1, 0) for F(x1 - xe), positive y component"""
    denom = p.F * p.x0 * (p.x1 - p.xe) + p.x1 - p.x0
    return _unit((-p.x0 * p.x1 / denom, 1.0))


def equilibria(p: SmoothParams) -> List[EquilibriumReport]:
    """Closed-form equilibria classified by trace and determinant"""
    x0, x1, xe, F = p.x0, p.x1, p.xe, p.F
    x0x1 = x0 * x1
    ordering_flags = [] if x0 < xe < x1 else ["non-generic-ordering"]
    reports = []

    reports.append(_report(
        EquilibriumName.EXTINCTION, State(x=0.0, y=0.0),
        trace=-1.0 - F * xe, det=F * xe,
        pairs=(Eigenpair(real=-1.0, vector=(1.0, 0.0)), Eigenpair(real=-F * xe, vector=(0.0, 1.0))),
    ))

    lam_plus, lam_minus = (x1 - x0) / x1, F * (x0 - xe)
    lower_flags = list(ordering_flags)
    if F * x1 * (xe - x0) + x1 - x0 == 0:
        stable_direction = (0.0, 1.0)
        lower_flags.append("eigenvector-degenerate")
    else:
        stable_direction = lower_saddle_stable_direction(p)
    reports.append(_report(
        EquilibriumName.LOWER_VEGETATION, State(x=x0, y=0.0),
        trace=lam_plus + lam_minus, det=lam_plus * lam_minus,
        pairs=(Eigenpair(real=lam_plus, vector=(1.0, 0.0)), Eigenpair(real=lam_minus, vector=stable_direction)),
        flags=lower_flags,
    ))

    lam_plus, lam_minus = F * (x1 - xe), (x0 - x1) / x0
    upper_flags = list(ordering_flags)
    if F * x0 * (x1 - xe) + x1 - x0 == 0:
        unstable_direction = (0.0, 1.0)
        upper_flags.append("eigenvector-degenerate")
    else:
        unstable_direction = upper_saddle_unstable_direction(p)
    reports.append(_report(
        EquilibriumName.UPPER_VEGETATION, State(x=x1, y=0.0),
        trace=lam_plus + lam_minus, det=lam_plus * lam_minus,
        pairs=(Eigenpair(real=lam_plus, vector=unstable_direction), Eigenpair(real=lam_minus, vector=(1.0, 0.0))),
        flags=upper_flags,
    ))

    y_e = p.y_e
    if y_e < 0:
        logger.debug(f"Coexistence point outside the quadrant (y_e={y_e:.6g}); omitted")
        return reports

    trace = xe * (x0 + x1 - 2.0 * xe) / x0x1
    det = F * xe * (x1 - xe) * (xe - x0) / x0x1
    discriminant = trace * trace - 4.0 * det
    J = jacobian_xy(p, xe, y_e)
    pairs = _eigen_from_jacobian(J, trace, discriminant)
    rotation = None
    if discriminant < 0:
        rotation = "counterclockwise" if J[1, 0] > 0 else "clockwise"
    flags = list(ordering_flags)
    if y_e == 0:
        flags.append("transcritical")
    reports.append(_report(
        EquilibriumName.COEXISTENCE, State(x=xe, y=y_e), trace, det, pairs,
        rotation=rotation, flags=flags,
    ))
    return reports

# =============================================================================
# POINCARE COMPACTIFICATION
# =============================================================================

def _chart_u1(p: SmoothParams, u: float, v: float) -> Vector:
    x0, x1, xe, F = p.x0, p.x1, p.xe, p.F
    x0x1 = x0 * x1
    du = -u * (v * (1 + (F * v * xe - F - u - v) * x1) * x0 + x1 * v - 1) / x0x1
    dv = (1 + v * v * x0x1 + (u * x0x1 - x0 - x1) * v) * v / x0x1
    return (du, dv)


def _chart_u2(p: SmoothParams, u: float, v: float) -> Vector:
    x0, x1, xe, F = p.x0, p.x1, p.xe, p.F
    du = -u * (v * ((1 + v + F * u - F * v * xe) * x1 - u) * x0 + u * (u - x1 * v)) / (x0 * x1)
    dv = -v * v * F * (-xe * v + u)
    return (du, dv)


def chart_field(p: SmoothParams, chart: Chart) -> ChartField:
    chart = Chart(chart)
    if chart is Chart.U1:
        return ChartField(chart, lambda u, v: _chart_u1(p, u, v))
    if chart is Chart.U2:
        return ChartField(chart, lambda u, v: _chart_u2(p, u, v))
    return ChartField(chart, lambda u, v: field_xy(p, u, v))


def chart_jacobian(p: SmoothParams, chart: Chart, u: float, v: float) -> np.ndarray:
    x0, x1, xe, F = p.x0, p.x1, p.xe, p.F
    x0x1 = x0 * x1
    s = (x0 + x1) / x0x1
    chart = Chart(chart)
    if chart is Chart.U1:
        return np.array([
            [1 / x0x1 - s * v + 2 * u * v + v * v + F * v - F * xe * v * v,
             -s * u + u * u + 2 * u * v + F * u - 2 * F * xe * u * v],
            [v * v,
             1 / x0x1 - 2 * s * v + 2 * u * v + 3 * v * v],
        ])
    if chart is Chart.U2:
        return np.array([
            [-3 * u * u / x0x1 + 2 * s * u * v - v - v * v - 2 * F * u * v + F * xe * v * v,
             s * u * u - u - 2 * u * v - F * u * u + 2 * F * xe * u * v],
            [-F * v * v,
             -2 * F * u * v + 3 * F * xe * v * v],
        ])
    return jacobian_xy(p, u, v)


def u2_blowup_field(p: SmoothParams, w: float, v: float) -> Vector:
    """Directional blow-up u = v w of the U2 origin"""
    x0, x1, xe, F = p.x0, p.x1, p.xe, p.F
    dw = -(((v + 1) * x1 - v * w) * x0 + v * w * (w - x1)) * w / (x0 * x1)
    dv = -v * v * F * (w - xe)
    return (dw, dv)


def sector_signs(p: SmoothParams, chart: Chart, radius: float = 1e-3, n: int = 72) -> np.ndarray:
    """Sign of the radial flow component on a circle around the chart origin"""
    vector_field = chart_field(p, chart)
    angles = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    signs = np.empty(n)
    for i, angle in enumerate(angles):
        u, v = radius * math.cos(angle), radius * math.sin(angle)
        du, dv = vector_field(u, v)
        signs[i] = np.sign(u * du + v * dv)
    return signs

# =============================================================================
# GEOMETRY HELPERS
# =============================================================================

def nullclines(p: SmoothParams, n: int = 200, y_max: Optional[float] = None) -> Dict[str, np.ndarray]:
    """Polylines of the nullclines inside the first quadrant"""
    xs = np.linspace(p.x0, p.x1, n)
    resource = np.column_stack([xs, np.maximum(resource_nullcline(p, xs), 0.0)])
    top = y_max if y_max is not None else 2.0 * max(resource[:, 1].max(), p.y_e, 1e-3)
    consumer = np.array([[p.xe, 0.0], [p.xe, top]])
    x_axis = np.array([[0.0, 0.0], [1.25 * p.x1, 0.0]])
    y_axis = np.array([[0.0, 0.0], [0.0, top]])
    return {"resource": resource, "consumer": consumer, "x_axis": x_axis, "y_axis": y_axis}


def direction_field(p: SmoothParams, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Rows (x, y, dx, dy) over the tensor grid xs x ys"""
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    U, V = field_array(p, X, Y)
    return np.column_stack([X.ravel(), Y.ravel(), U.ravel(), V.ravel()])


def absorbing_bound(p: SmoothParams, s0: State) -> float:
    """Upper bound on w = x + y/F along the orbit of s0"""
    x0x1 = p.x0 * p.x1
    upper = max(s0.x, p.x1)

    def phi(x: float) -> float:
        return -x ** 3 / x0x1 + (p.x0 + p.x1) * x * x / x0x1 - x + p.F * p.xe * x

    grid = np.linspace(0.0, upper, 401)
    values = phi(grid)
    best = float(values.max())
    i = int(values.argmax())
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if hi > lo:
        refined = minimize_scalar(lambda x: -phi(x), bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12})
        best = max(best, -float(refined.fun))
    w0 = s0.x + s0.y / p.F
    return max(w0, best / (p.F * p.xe))


def no_cycle_reason(p: SmoothParams) -> Optional[str]:
    """Parameter ranges in which periodic orbits are excluded analytically"""
    x_H = p.x_H
    x_c = 2 * p.x0 * p.x1 / (p.x0 + p.x1)
    if p.xe >= x_H:
        return "xe >= x_H"
    if p.xe <= x_c:
        return "xe <= x_c"
    return None
