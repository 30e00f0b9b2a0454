import math
import numpy as np
import pytest
from facilitation.models.state import Chart, EquilibriumKind, EquilibriumName, State
from facilitation.services import smooth_model_service
from tests.builders import smooth


def _by_name(reports):
    return {report.name: report for report in reports}


def _fd_jacobian(fn, u, v, h=1e-6):
    columns = []
    for du, dv in ((h, 0.0), (0.0, h)):
        plus = np.asarray(fn(u + du, v + dv))
        minus = np.asarray(fn(u - du, v - dv))
        columns.append((plus - minus) / (2 * h))
    return np.column_stack(columns)

# =============================================================================
# FIELD
# =============================================================================

def test_field_values():
    p = smooth(xe=2.0, F=1.0)
    assert smooth_model_service.field(p, State(x=0, y=0)) == (0.0, 0.0)
    dx, dy = smooth_model_service.field(p, State(x=2.0, y=1 / 3))
    assert dx == pytest.approx(0.0, abs=1e-15)
    assert dy == pytest.approx(0.0, abs=1e-15)
    assert smooth_model_service.field(p, State(x=1, y=1)) == pytest.approx((-1.0, -1.0))


def test_field_vanishes_on_axes():
    p = smooth(xe=2.0, F=1.0)
    assert smooth_model_service.field_xy(p, 0.0, 0.7)[0] == 0.0
    assert smooth_model_service.field_xy(p, 1.7, 0.0)[1] == 0.0


def test_jacobian_matches_finite_differences():
    p = smooth(xe=1.8, F=2.0)
    rng = np.random.default_rng(3)
    for _ in range(20):
        x, y = rng.uniform(0.1, 3.5), rng.uniform(0.0, 2.0)
        exact = smooth_model_service.jacobian(p, State(x=x, y=y))
        numeric = _fd_jacobian(lambda a, b: smooth_model_service.field_xy(p, a, b), x, y)
        np.testing.assert_allclose(exact, numeric, rtol=1e-6, atol=1e-8)


def test_jacobian_at_saddles():
    p = smooth(xe=2.0, F=1.5)
    origin = smooth_model_service.jacobian(p, State(x=0, y=0))
    np.testing.assert_allclose(origin, np.diag([-1.0, -3.0]))
    lower = smooth_model_service.jacobian(p, State(x=1, y=0))
    assert lower[0, 0] == pytest.approx(2 / 3)


def test_rotation_determinant():
    p = smooth(xe=2.0, F=1.0)
    assert smooth_model_service.rotation_determinant(p, State(x=1.5, y=0)) == 0.0
    assert smooth_model_service.rotation_determinant(p, State(x=2, y=2)) == pytest.approx(20 / 3)


def test_rotation_determinant_is_positive_above_the_resource_nullcline():
    p = smooth(xe=1.8, F=1.3)
    rng = np.random.default_rng(17)
    xs = rng.uniform(0.05, 5.0, 10_000)
    floor = np.maximum(smooth_model_service.resource_nullcline(p, xs), 0.0)
    ys = floor + rng.uniform(1e-3, 3.0, xs.size)
    values = [smooth_model_service.rotation_determinant(p, State(x=x, y=y)) for x, y in zip(xs, ys)]
    assert min(values) > 0

# =============================================================================
# EQUILIBRIA
# =============================================================================

def test_four_equilibria_inside_the_band():
    reports = _by_name(smooth_model_service.equilibria(smooth(xe=2.5, F=1.0)))
    assert set(reports) == set(EquilibriumName)
    assert reports[EquilibriumName.EXTINCTION].kind is EquilibriumKind.STABLE_NODE
    assert reports[EquilibriumName.LOWER_VEGETATION].kind is EquilibriumKind.SADDLE
    assert reports[EquilibriumName.UPPER_VEGETATION].kind is EquilibriumKind.SADDLE
    point = reports[EquilibriumName.COEXISTENCE].point
    assert (point.x, point.y) == pytest.approx((2.5, 0.25))


@pytest.mark.parametrize("F, kind", [
    (0.2, EquilibriumKind.STABLE_NODE),
    (1.0, EquilibriumKind.STABLE_FOCUS),
])
def test_coexistence_node_focus_transition(F, kind):
    reports = _by_name(smooth_model_service.equilibria(smooth(xe=2.5, F=F)))
    assert reports[EquilibriumName.COEXISTENCE].kind is kind


def test_coexistence_trace_vanishes_at_hopf():
    report = _by_name(smooth_model_service.equilibria(smooth(xe=2.0, F=1.0)))[EquilibriumName.COEXISTENCE]
    assert report.trace == 0.0
    assert "weak-focus" in report.flags
    assert report.rotation is not None


def test_coexistence_omitted_outside_the_band():
    names = {r.name for r in smooth_model_service.equilibria(smooth(xe=3.5, F=1.0))}
    assert EquilibriumName.COEXISTENCE not in names


def test_equilibria_match_numeric_eigenvalues():
    p = smooth(xe=1.8, F=0.7)
    for report in smooth_model_service.equilibria(p):
        J = smooth_model_service.jacobian(p, report.point)
        expected = sorted(np.linalg.eigvals(J), key=lambda z: (z.real, z.imag))
        actual = sorted(report.eigenvalues, key=lambda z: (z.real, z.imag))
        np.testing.assert_allclose(actual, expected, atol=1e-9)
        assert report.kind is smooth_model_service.kind_from_eigenvalues(expected)


def _random_generic_params(rng):
    x0 = rng.uniform(0.2, 2.0)
    x1 = x0 + rng.uniform(0.1, 3.0)
    return smooth(xe=rng.uniform(x0, x1), F=rng.uniform(0.01, 20.0), x0=x0, x1=x1)


def test_classification_agrees_with_numeric_eigenvalues_on_random_draws():
    rng = np.random.default_rng(29)
    checked = 0
    for _ in range(10_000):
        p = _random_generic_params(rng)
        for report in smooth_model_service.equilibria(p):
            if abs(report.discriminant) < 1e-9 or abs(report.trace) < 1e-9:
                continue
            J = smooth_model_service.jacobian(p, report.point)
            assert report.kind is smooth_model_service.kind_from_eigenvalues(np.linalg.eigvals(J))
            checked += 1
    assert checked > 39_000


def test_equilibria_are_exact_zeros_of_the_field():
    rng = np.random.default_rng(31)
    for _ in range(1_000):
        p = _random_generic_params(rng)
        for report in smooth_model_service.equilibria(p):
            dx, dy = smooth_model_service.field(p, report.point)
            assert math.hypot(dx, dy) < 1e-12


def test_saddle_eigenvectors_are_eigenvectors():
    p = smooth(xe=1.8, F=0.7)
    for report in smooth_model_service.equilibria(p):
        if report.name not in (EquilibriumName.LOWER_VEGETATION, EquilibriumName.UPPER_VEGETATION):
            continue
        J = smooth_model_service.jacobian(p, report.point)
        for pair in report.eigenpairs:
            vector = np.asarray(pair.vector)
            np.testing.assert_allclose(J @ vector, pair.real * vector, atol=1e-12)


def test_unstable_direction_of_upper_saddle_points_into_quadrant():
    vx, vy = smooth_model_service.upper_saddle_unstable_direction(smooth(xe=1.8, F=1.0))
    assert vy > 0
    assert vx < 0

# =============================================================================
# COMPACTIFICATION
# =============================================================================

def test_u1_origin_is_a_repellor():
    p = smooth(xe=2.0, F=1.0)
    assert smooth_model_service.chart_field(p, Chart.U1)(0.0, 0.0) == (0.0, 0.0)
    J = smooth_model_service.chart_jacobian(p, Chart.U1, 0.0, 0.0)
    np.testing.assert_allclose(np.linalg.eigvals(J), [1 / 3, 1 / 3])
    assert np.all(smooth_model_service.sector_signs(p, Chart.U1) > 0)


def test_u2_origin_is_degenerate():
    p = smooth(xe=2.0, F=1.0)
    J = smooth_model_service.chart_jacobian(p, Chart.U2, 0.0, 0.0)
    np.testing.assert_array_equal(J, np.zeros((2, 2)))


def test_u2_blowup_is_the_chart_field_in_directional_coordinates():
    p = smooth(xe=1.8, F=2.0)
    chart = smooth_model_service.chart_field(p, Chart.U2)
    rng = np.random.default_rng(3)
    for w, v in zip(rng.uniform(-2.0, 2.0, 10), rng.uniform(0.05, 0.5, 10)):
        du, dv = chart(v * w, v)
        dw_blown, dv_blown = smooth_model_service.u2_blowup_field(p, w, v)
        # time rescaled by 1/v
        assert dw_blown == pytest.approx((du - w * dv) / v ** 2, rel=1e-10, abs=1e-12)
        assert dv_blown == pytest.approx(dv / v, rel=1e-10, abs=1e-12)


def test_u2_blowup_origin_is_a_saddle_node():
    p = smooth(xe=2.0, F=1.0)
    assert smooth_model_service.u2_blowup_field(p, 0.3, 0.0) == pytest.approx((-0.3, 0.0))
    dw, dv = smooth_model_service.u2_blowup_field(p, 0.0, 0.1)
    assert dw == 0.0
    assert dv == pytest.approx(p.F * p.xe * 0.01)
    assert smooth_model_service.u2_blowup_field(p, 0.0, -0.1)[1] > 0


def test_u2_origin_sectors():
    signs = smooth_model_service.sector_signs(smooth(xe=2.0, F=1.0), Chart.U2)
    # inflow on the upper half circle except along the v axis, outflow below
    assert signs[0] < 0 and signs[36] < 0
    assert signs[9] < 0 and signs[27] < 0
    assert signs[18] > 0
    assert np.all(signs[37:] > 0)
    assert np.count_nonzero(signs != np.roll(signs, 1)) == 4


@pytest.mark.parametrize("chart", [Chart.U1, Chart.U2])
def test_chart_jacobians_match_finite_differences(chart):
    p = smooth(xe=1.8, F=2.0)
    vector_field = smooth_model_service.chart_field(p, chart)
    rng = np.random.default_rng(11)
    for _ in range(10):
        u, v = rng.uniform(-0.5, 0.5), rng.uniform(0.0, 0.5)
        exact = smooth_model_service.chart_jacobian(p, chart, u, v)
        np.testing.assert_allclose(exact, _fd_jacobian(vector_field, u, v), rtol=1e-6, atol=1e-8)


def test_u3_is_the_model_field():
    p = smooth(xe=1.8, F=2.0)
    vector_field = smooth_model_service.chart_field(p, Chart.U3)
    rng = np.random.default_rng(5)
    for x, y in rng.uniform(0.0, 3.0, size=(20, 2)):
        assert vector_field(x, y) == smooth_model_service.field_xy(p, x, y)

# =============================================================================
# GEOMETRY
# =============================================================================

def test_nullclines_and_direction_field():
    p = smooth(xe=2.5, F=1.0)
    curves = smooth_model_service.nullclines(p, n=50)
    assert curves["resource"].shape == (50, 2)
    assert np.all(curves["resource"][:, 1] >= 0)
    assert np.all(curves["consumer"][:, 0] == 2.5)
    rows = smooth_model_service.direction_field(p, np.linspace(0, 3, 4), np.linspace(0, 1, 3))
    assert rows.shape == (12, 4)


def test_absorbing_bound_dominates_start():
    p = smooth(xe=1.8, F=1.0)
    s0 = State(x=1.5, y=0.3)
    assert smooth_model_service.absorbing_bound(p, s0) >= s0.x + s0.y / p.F


@pytest.mark.parametrize("xe, reason", [(2.5, "xe >= x_H"), (2.0, "xe >= x_H"), (1.4, "xe <= x_c"), (1.8, None)])
def test_no_cycle_reason(xe, reason):
    assert smooth_model_service.no_cycle_reason(smooth(xe=xe, F=1.0)) == reason
