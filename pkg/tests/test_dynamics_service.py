import math
import numpy as np
import pytest
from facilitation.core.exceptions import DomainError, InconclusiveError
from facilitation.models.dynamics import EventKind, IntegratorConfig, LineCrossing
from facilitation.models.state import State
from facilitation.services import dynamics_service, params_service, smooth_model_service
from facilitation.services.dynamics_service import Separatrix
from tests.builders import smooth

# =============================================================================
# INTEGRATION
# =============================================================================

def test_axis_flow_stays_on_axis_and_reaches_upper_equilibrium():
    p = smooth(xe=2.5, F=1.0)
    trajectory = dynamics_service.integrate(p, State(x=1.5, y=0.0), IntegratorConfig(t_max=60.0))
    assert np.all(trajectory.states[:, 1] == 0.0)
    assert np.all(np.diff(trajectory.states[:, 0]) >= -1e-9)
    assert trajectory.final_state[0] == pytest.approx(3.0, abs=1e-6)


def test_equilibrium_start_stays_put():
    p = smooth(xe=2.5, F=1.0)
    trajectory = dynamics_service.integrate(p, State(x=2.5, y=0.25), IntegratorConfig(t_max=20.0))
    assert np.abs(trajectory.states - [2.5, 0.25]).max() < 1e-9


def test_static_region_converges_to_coexistence():
    p = smooth(xe=2.5, F=1.0)
    trajectory = dynamics_service.integrate(p, State(x=1.5, y=0.3))
    x, y = trajectory.final_state
    assert math.hypot(x - 2.5, y - 0.25) < 1e-6
    assert trajectory.states.min() >= -1e-12


def test_line_event_terminates_integration():
    p = smooth(xe=2.5, F=1.0)
    cfg = IntegratorConfig().with_events(LineCrossing(point=(2.5, 0.0), normal=(1.0, 0.0), direction=1))
    trajectory = dynamics_service.integrate(p, State(x=1.5, y=0.0), cfg)
    event = trajectory.first_event(EventKind.SECTION.value)
    assert event is not None
    assert event.state[0] == pytest.approx(2.5)
    assert trajectory.final_state[0] == pytest.approx(2.5)

# =============================================================================
# SEPARATRICES
# =============================================================================

def test_zero_offset_is_rejected():
    with pytest.raises(DomainError):
        dynamics_service.trace_separatrix(smooth(xe=1.9, F=1.0), Separatrix.UNSTABLE_OF_X1, offset=0.0)


def test_unstable_branch_of_upper_saddle_reaches_section():
    p = smooth(xe=1.9, F=1.0)
    trajectory = dynamics_service.trace_separatrix(p, Separatrix.UNSTABLE_OF_X1)
    event = trajectory.first_event(EventKind.SECTION.value)
    assert event is not None
    assert event.state[0] == pytest.approx(1.9)
    assert event.state[1] > 0


def test_stable_branch_runs_backward_and_upward():
    p = smooth(xe=1.9, F=1.0)
    trajectory = dynamics_service.trace_separatrix(p, Separatrix.STABLE_OF_X0)
    assert trajectory.time_direction == -1
    assert trajectory.final_state[1] > trajectory.states[0, 1]


def test_section_gap_needs_coexistence_inside_band():
    with pytest.raises(DomainError):
        dynamics_service.section_gap(smooth(xe=3.5, F=1.0))


def test_section_gap_sign_marks_oscillation_and_collapse_sides():
    assert dynamics_service.section_gap(smooth(xe=1.98, F=1.0)) < 0
    assert dynamics_service.section_gap(smooth(xe=1.55, F=1.0)) > 0


@pytest.mark.slow
@pytest.mark.parametrize("F", [0.5, 1.0, 2.0])
def test_section_gap_is_monotone_in_xe(F):
    gaps = [dynamics_service.section_gap(smooth(xe=xe, F=F)) for xe in np.linspace(1.55, 1.98, 20)]
    assert np.all(np.diff(gaps) < 0)

# =============================================================================
# RETURN MAP
# =============================================================================

def test_return_map_iteration_converges_on_contraction():
    value, outcome, iterations = dynamics_service.iterate_return_map(
        lambda y: ("returned", 0.5 * y + 1.0), seed=0.0, floor=-5.0, ceiling=10.0,
    )
    assert outcome == "converged"
    assert value == pytest.approx(2.0, abs=1e-9)
    assert iterations <= 5


def test_return_map_iteration_reports_equilibrium():
    value, outcome, _ = dynamics_service.iterate_return_map(
        lambda y: ("returned", 0.5 * y), seed=1.0, floor=0.0, ceiling=10.0,
    )
    assert value is None
    assert outcome == "equilibrium"


def test_return_map_iteration_reports_polycycle():
    value, outcome, _ = dynamics_service.iterate_return_map(
        lambda y: ("returned", y + 0.5 * (10.0 - y)), seed=0.0, floor=-1.0, ceiling=10.0, ceiling_tol=1e-3,
    )
    assert value is None
    assert outcome == "polycycle"


def test_return_map_iteration_stops_on_failed_return():
    assert dynamics_service.iterate_return_map(
        lambda y: ("collapse", None), seed=1.0, floor=0.0, ceiling=10.0,
    ) == (None, "collapse", 1)


def test_return_map_iteration_budget_is_inconclusive():
    with pytest.raises(InconclusiveError):
        dynamics_service.iterate_return_map(
            lambda y: ("returned", 3.0 - y), seed=1.0, floor=0.0, ceiling=10.0, max_iter=20,
        )


def test_cycle_search_iterates_even_where_cycles_are_excluded(monkeypatch):
    calls = []
    original_return = dynamics_service.poincare_return

    def counting_return(*args, **kwargs):
        calls.append(args[1])
        return original_return(*args, **kwargs)

    monkeypatch.setattr(dynamics_service, "poincare_return", counting_return)
    assert dynamics_service.find_limit_cycle(smooth(xe=1.45, F=1.0)) is None
    assert len(calls) >= 3


@pytest.mark.slow
@pytest.mark.parametrize("xe", [2.0, 2.5, 1.45, 1.55])
def test_no_cycle_outside_oscillation_band(xe):
    assert dynamics_service.find_limit_cycle(smooth(xe=xe, F=1.0)) is None


def test_cycle_search_treats_fixed_point_at_equilibrium_as_absent(monkeypatch):
    p = smooth(xe=1.9, F=1.0)
    monkeypatch.setattr(dynamics_service, "iterate_return_map",
                        lambda *args, **kwargs: (p.y_e + 1e-5, "converged", 4))
    assert dynamics_service.find_limit_cycle(p, seeds=[p.y_e + 0.1]) is None


def test_cycle_search_scans_displacement_when_seeds_run_out(monkeypatch):
    p = smooth(xe=1.9, F=1.0)

    def exhausted(*args, **kwargs):
        raise InconclusiveError()

    monkeypatch.setattr(dynamics_service, "iterate_return_map", exhausted)
    monkeypatch.setattr(dynamics_service, "_displacement_signs", lambda *args, **kwargs: [-1, -1, -1])
    assert dynamics_service.find_limit_cycle(p, seeds=[p.y_e + 0.1]) is None

    monkeypatch.setattr(dynamics_service, "_displacement_signs", lambda *args, **kwargs: [1, 1, -1])
    with pytest.raises(InconclusiveError):
        dynamics_service.find_limit_cycle(p, seeds=[p.y_e + 0.1])


def test_cycle_search_rejects_equilibrium_outside_band():
    with pytest.raises(DomainError):
        dynamics_service.find_limit_cycle(smooth(xe=3.2, F=1.0))


@pytest.mark.slow
def test_limit_cycle_is_unique_across_seeds():
    p = smooth(xe=1.9, F=1.0)
    cycle = dynamics_service.find_limit_cycle(p)
    assert cycle is not None
    assert len(cycle.fixed_points) == 3
    assert max(cycle.fixed_points) - min(cycle.fixed_points) < 1e-6
    assert cycle.section_point[1] > p.y_e
    assert cycle.residual < 1e-6
    assert p.x0 < cycle.amplitude[0] < p.xe < cycle.amplitude[1] < p.x1


@pytest.mark.slow
def test_cycle_period_near_hopf_matches_leading_period():
    p = smooth(xe=1.99, F=1.0)
    cycle = dynamics_service.find_limit_cycle(p)
    assert cycle is not None
    T0 = params_service.hopf_constants(p).T0
    assert cycle.period == pytest.approx(T0, rel=0.02)


@pytest.mark.slow
def test_cycle_amplitude_grows_like_square_root_of_hopf_distance():
    amplitudes = {}
    for delta in (0.01, 0.02, 0.04):
        cycle = dynamics_service.find_limit_cycle(smooth(xe=2.0 - delta, F=1.0))
        assert cycle is not None
        amplitudes[delta] = cycle.x_amplitude
    assert amplitudes[0.02] / amplitudes[0.01] == pytest.approx(math.sqrt(2), rel=0.25)
    assert amplitudes[0.04] / amplitudes[0.01] == pytest.approx(2.0, rel=0.25)


@pytest.mark.slow
def test_period_grows_toward_the_polycycle():
    periods = [dynamics_service.find_limit_cycle(smooth(xe=xe, F=1.0)).period for xe in (1.99, 1.95, 1.9)]
    assert periods[0] < periods[1] < periods[2]


@pytest.mark.slow
def test_orbits_stay_inside_absorbing_bound():
    rng = np.random.default_rng(11)
    for _ in range(50):
        x0 = rng.uniform(0.5, 1.5)
        x1 = x0 + rng.uniform(0.5, 2.0)
        p = smooth(xe=rng.uniform(x0, x1), F=rng.uniform(0.2, 3.0), x0=x0, x1=x1)
        s0 = State(x=rng.uniform(0.0, x1 + 1.0), y=rng.uniform(0.0, 1.0))
        bound = smooth_model_service.absorbing_bound(p, s0)
        trajectory = dynamics_service.integrate(p, s0, IntegratorConfig(t_max=50.0))
        w = trajectory.states[:, 0] + trajectory.states[:, 1] / p.F
        assert w.max() <= bound + 1e-6


@pytest.mark.slow
def test_stable_cycle_multiplier_inverts_under_time_reversal():
    p = smooth(xe=1.9, F=1.0)
    cycle = dynamics_service.find_limit_cycle(p)
    assert 0.0 < cycle.multiplier < 1.0
    backward = dynamics_service.return_map_slope(p, cycle.section_point[1], reverse=True)
    assert backward > 1.0
    assert backward * cycle.multiplier == pytest.approx(1.0, rel=1e-2)
