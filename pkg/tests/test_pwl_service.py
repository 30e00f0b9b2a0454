import math
import numpy as np
import pytest
from scipy.optimize import brentq
from facilitation.core.exceptions import DomainError
from facilitation.models.dynamics import EventKind, IntegratorConfig
from facilitation.models.pwl import PwlMode, PwlRegion, PwlState, SlidingStability
from facilitation.models.state import State
from facilitation.services import bifurcation_service, params_service, pwl_service
from tests.builders import original, pwl

# =============================================================================
# REGION FIELDS
# =============================================================================

def test_region_saddles_are_fixed():
    p = pwl(xe=1.8, F=1.0)
    assert pwl_service.pwl_field(p, PwlState(x=1.0, y=0.0, mode=PwlMode.REGION1)) == (0.0, 0.0)
    assert pwl_service.pwl_field(p, PwlState(x=3.0, y=0.0, mode=PwlMode.REGION2)) == (0.0, 0.0)


def test_region_field_values():
    p = pwl(xe=1.8, F=1.0)
    dx, dy = pwl_service.pwl_field(p, PwlState(x=1.5, y=0.5, mode=PwlMode.REGION1))
    assert dx == pytest.approx(-1 / 6)
    assert dy == pytest.approx(-0.4)


def test_field_rejects_inconsistent_modes():
    p = pwl(xe=1.8, F=1.0)
    with pytest.raises(DomainError):
        pwl_service.pwl_field(p, PwlState(x=2.5, y=0.5, mode=PwlMode.REGION1))
    with pytest.raises(DomainError):
        pwl_service.pwl_field(p, PwlState(x=1.8, y=0.5, mode=PwlMode.SLIDING))


def test_params_outside_band_are_a_domain_error(base):
    with pytest.raises(DomainError):
        pwl_service.pwl_params(base, 3.5, 1.0)


def test_saddle_eigenvalues_match_smooth_model():
    report = pwl_service.saddle_eigenstructure_match(pwl(xe=2.0, F=1.0))
    assert report.pwl_lower == pytest.approx((-1.0, 2 / 3))
    assert report.pwl_upper == pytest.approx((-2.0, 1.0))
    assert report.match
    assert report.pwl_ratio == pytest.approx(3.0)


def test_hyperbolicity_ratio_is_shared():
    rng = np.random.default_rng(13)
    for _ in range(100):
        x0 = rng.uniform(0.1, 2.0)
        x1 = x0 + rng.uniform(0.1, 3.0)
        xe = rng.uniform(x0 + 0.01 * (x1 - x0), x1 - 0.01 * (x1 - x0))
        report = pwl_service.saddle_eigenstructure_match(pwl(xe=xe, F=rng.uniform(0.1, 5.0), x0=x0, x1=x1))
        assert report.pwl_ratio == pytest.approx(report.smooth_ratio, rel=1e-9)

# =============================================================================
# FIRST INTEGRALS AND SLIDING
# =============================================================================

@pytest.mark.parametrize("side, mode, start", [
    (1, PwlMode.REGION1, (1.5, 0.5)),
    (2, PwlMode.REGION2, (2.5, 0.5)),
])
def test_first_integral_is_conserved_along_region_flow(side, mode, start):
    p = pwl(xe=1.8, F=1.0)
    region = pwl_service._region(p, mode)
    xs, ys = region.state_at(*start, np.linspace(0.0, 1.0, 50))
    values = np.array([pwl_service.first_integral(p, side, State(x=x, y=y)) for x, y in zip(xs, ys)])
    assert np.max(np.abs(values - values[0])) / abs(values[0]) < 1e-6


def test_first_integrals_differ_across_the_line():
    p = pwl(xe=1.8, F=1.0)
    s = State(x=1.8, y=0.5)
    assert pwl_service.first_integral(p, 1, s) != pwl_service.first_integral(p, 2, s)
    with pytest.raises(DomainError):
        pwl_service.first_integral(p, 3, s)


def test_translated_frame_round_trip():
    p = pwl(xe=1.8, F=1.0)
    u, v = pwl_service.to_translated(p, 1.8, 2 / 3)
    assert (u, v) == pytest.approx((0.0, 0.0))
    assert pwl_service.from_translated(p, u, v) == pytest.approx((1.8, 2 / 3))


def test_sliding_data_values():
    p = pwl(xe=1.8, F=1.0)
    data = pwl_service.sliding_data(p)
    assert data.T1 == pytest.approx(-0.133333, rel=1e-5)
    assert data.T2 == pytest.approx(0.133333, rel=1e-5)
    assert data.P_lambda == pytest.approx(0.044444, rel=1e-4)
    assert data.stability is SlidingStability.UNSTABLE


def test_sliding_data_matches_nullclines_and_pseudo_equilibrium():
    p = pwl(xe=1.8, F=1.0)
    y1n, y2n = pwl_service.nullcline_heights(p)
    data = pwl_service.sliding_data(p)
    assert y1n - p.fold_height == pytest.approx(data.T1)
    assert y2n - p.fold_height == pytest.approx(data.T2)
    y_P = pwl_service.pseudo_equilibrium_height(p)
    assert y_P - p.fold_height == pytest.approx(data.P_lambda)
    assert pwl_service.sliding_field(p, y_P) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("xe", [1.8, 1.95, 2.2])
def test_tangencies_are_zeros_of_the_region_velocities(xe):
    p = pwl(xe=xe, F=1.0)
    lower, upper = pwl_service.regions(p)
    data = pwl_service.sliding_data(p)
    for region, expected in ((lower, data.T1), (upper, data.T2)):
        y_tangency = brentq(lambda y: region.velocity(p.xe, y)[0], 0.0, 10.0, xtol=1e-14)
        assert y_tangency - p.fold_height == pytest.approx(expected, abs=1e-9)


def test_sliding_is_degenerate_at_fold():
    data = pwl_service.sliding_data(pwl(xe=2.0, F=1.0))
    assert data.stability is SlidingStability.DEGENERATE
    assert data.P_lambda is None


@pytest.mark.parametrize("lam", [-0.3, -0.2, -0.1, -0.05, 0.05, 0.1, 0.2, 0.3])
def test_pseudo_equilibrium_sign(lam):
    data = pwl_service.sliding_data(pwl(xe=2.0 + lam, F=1.0))
    assert np.sign(data.P_lambda) == -np.sign(lam)


def test_manifold_heights_calibration():
    heights = pwl_service.manifold_heights(pwl(xe=1.8, F=2.0))
    assert heights.h_s == pytest.approx(1.813333, rel=1e-5)
    assert heights.h_u == pytest.approx(1.76)
    assert heights.gap < 0
    assert pwl_service.manifold_heights(pwl(xe=1.8, F=1.0)).gap > 0

# =============================================================================
# LOCI AND REGIONS
# =============================================================================

def test_heteroclinic_locus_values(base):
    assert pwl_service.F_het(base, 1.8) == pytest.approx(5 / 3, rel=1e-12)
    assert pwl_service.xe_het(base, 5 / 3) == pytest.approx(1.8, rel=1e-12)
    assert pwl_service.F_het(base, 2.0) == 0.0
    with pytest.raises(DomainError):
        pwl_service.F_het(base, 1.6)


def test_heteroclinic_inverse_is_consistent(base):
    for F in np.geomspace(1e-3, 1e3, 25):
        assert pwl_service.F_het(base, pwl_service.xe_het(base, F)) == pytest.approx(F, rel=1e-9)


def test_small_rate_merges_with_pseudo_hopf(base):
    assert pwl_service.xe_het(base, 1e-9) == pytest.approx(2.0, abs=1e-8)


def test_large_rate_approaches_geometric_mean(base):
    values = [pwl_service.xe_het(base, F) for F in (1.0, 5.0, 50.0)]
    assert values == sorted(values, reverse=True)
    assert values[-1] == pytest.approx(math.sqrt(3), abs=0.1)
    assert values[-1] > math.sqrt(3)


def test_heteroclinic_slope_at_the_fold_matches_finite_difference(base):
    h = 1e-4
    numeric = (pwl_service.F_het(base, 2.0) - pwl_service.F_het(base, 2.0 - h)) / h
    assert numeric == pytest.approx(pwl_service.pwl_loci(base).slope_at_hopf, abs=1e-3)


@pytest.mark.slow
def test_asymptotes_separate_smooth_and_pwl_curves(base):
    smooth_xe = bifurcation_service.heteroclinic_xe(base, 50.0).xe_h
    pwl_xe = pwl_service.xe_het(base, 50.0)
    assert smooth_xe == pytest.approx(1.5, abs=0.1)
    assert pwl_xe == pytest.approx(math.sqrt(3), abs=0.1)
    assert smooth_xe < pwl_xe


def test_loci_at_parameters():
    loci = pwl_service.pwl_loci(pwl(xe=1.8, F=1.0))
    assert loci.V1 == pytest.approx(-4 / 3)
    assert loci.F_het == pytest.approx(5 / 3)
    assert loci.F_B1 == pytest.approx(0.8 / 1.92)
    assert loci.F_B2 is None
    assert loci.xe_het == pytest.approx(2 * math.sqrt(2) - 1)
    assert loci.slope_at_hopf == pytest.approx(-2.0)


def test_no_return_loci(base):
    assert pwl_service.F_B2(base, 2.5) == pytest.approx(8.0)
    with pytest.raises(DomainError):
        pwl_service.F_B1(base, 2.5)
    with pytest.raises(DomainError):
        pwl_service.F_B2(base, 1.8)


@pytest.mark.parametrize("xe, F, region", [
    (2.5, 10.0, PwlRegion.OMEGA2),
    (2.5, 5.0, PwlRegion.OMEGA1),
    (2.0, 1.0, PwlRegion.OMEGA3),
    (1.8, 5.0, PwlRegion.OMEGA4),
    (1.8, 2.0, PwlRegion.OMEGA4),
    (1.8, 1.0, PwlRegion.OMEGA6),
    (1.8, 0.3, PwlRegion.OMEGA7),
])
def test_classify_region(xe, F, region):
    assert pwl_service.pwl_classify_region(pwl(xe=xe, F=F)) is region


def test_heteroclinic_curve_is_its_own_region(base):
    p = pwl(xe=1.8, F=pwl_service.F_het(base, 1.8))
    assert pwl_service.pwl_classify_region(p) is PwlRegion.OMEGA5
    assert pwl_service.resilience_distance(p) == 0.0


def test_region_grid_labels_every_cell(base):
    rows = pwl_service.pwl_region_grid(base, [1.8, 2.5], [0.3, 1.0, 10.0])
    assert len(rows) == 6
    xe, F, label, margin = rows[0]
    assert (xe, F, label) == (1.8, 0.3, PwlRegion.OMEGA7)
    # nearest boundary is the Bautin curve at xe = 1 + 8 / (4 + sqrt(30.4))
    assert margin == pytest.approx(8 / (4 + math.sqrt(30.4)) - 0.8, abs=1e-9)
    assert all(row[3] >= 0 for row in rows)


@pytest.mark.parametrize("xe", [1.2, 1.6, 1.95])
def test_bautin_inverse_lower(base, xe):
    assert pwl_service.xe_B1(base, pwl_service.F_B1(base, xe)) == pytest.approx(xe, rel=1e-12)


@pytest.mark.parametrize("xe", [2.05, 2.5, 2.9])
def test_bautin_inverse_upper(base, xe):
    assert pwl_service.xe_B2(base, pwl_service.F_B2(base, xe)) == pytest.approx(xe, rel=1e-12)


def test_region_margin_vanishes_on_boundaries(base):
    F = pwl_service.F_B2(base, 2.5)
    assert pwl_service.pwl_region_margin(pwl(xe=2.5, F=F)) == pytest.approx(0.0, abs=1e-12)
    assert pwl_service.pwl_region_margin(pwl(xe=2.0, F=1.0)) == 0.0

# =============================================================================
# RESILIENCE AND HABITAT LOSS
# =============================================================================

def test_resilience_only_in_cycle_region():
    with pytest.raises(DomainError):
        pwl_service.resilience_distance(pwl(xe=1.8, F=1.0))


def test_resilience_grows_away_from_curve(base):
    distances = [pwl_service.resilience_distance(pwl(xe=xe, F=5.0)) for xe in (1.8, 1.85, 1.9, 1.95)]
    assert np.all(np.diff(distances) > 0)
    assert 0 < distances[0] < 1.8 - pwl_service.xe_het(base, 5.0)


def test_resilience_is_continuous():
    p, q = pwl(xe=1.9, F=5.0), pwl(xe=1.9 + 1e-6, F=5.0 + 1e-6)
    assert abs(pwl_service.resilience_distance(p) - pwl_service.resilience_distance(q)) < 1e-5


@pytest.mark.parametrize("D", [0.0, 0.1, 0.2, 0.3])
def test_habitat_loss_moves_heteroclinic_left(D):
    effect = pwl_service.habitat_effect(original(D=D), F=1.0)
    assert effect.dxe_het_dD < 0
    assert effect.dxe_het_dD == pytest.approx(effect.dxe_het_dD_numeric, abs=1e-6)
    assert effect.d_o_prime_sign == -1
    assert effect.x_H == pytest.approx(0.5 * (1 - D))
    pair = params_service.vegetation_equilibria(original(D=D))
    assert effect.xe_het == pytest.approx(pwl_service.xe_het(pair, 1.0), rel=1e-12)

# =============================================================================
# FILIPPOV INTEGRATION
# =============================================================================

def test_axis_start_crosses_and_reaches_upper_saddle():
    p = pwl(xe=1.8, F=1.0)
    trajectory = pwl_service.pwl_integrate(p, PwlState(x=1.5, y=0.0, mode=PwlMode.REGION1),
                                           IntegratorConfig(t_max=40.0))
    assert np.all(trajectory.states[:, 1] == 0.0)
    assert np.all(np.diff(trajectory.states[:, 0]) >= -1e-12)
    assert trajectory.final_state[0] == pytest.approx(3.0, abs=1e-6)
    assert trajectory.meta["final_mode"] == PwlMode.REGION2.value
    assert trajectory.first_event(EventKind.MODE.value) is not None


def test_stable_sliding_settles_on_pseudo_equilibrium():
    p = pwl(xe=2.5, F=1.0)
    y_P = pwl_service.pseudo_equilibrium_height(p)
    assert y_P == pytest.approx(0.4)
    trajectory = pwl_service.pwl_integrate(p, PwlState(x=2.5, y=0.7, mode=PwlMode.SLIDING),
                                           IntegratorConfig(t_max=50.0))
    assert trajectory.final_state[1] == pytest.approx(y_P, abs=1e-8)
    assert trajectory.first_event(EventKind.EQUILIBRIUM.value) is not None
    assert set(trajectory.modes) == {PwlMode.SLIDING.value}


def test_trajectory_collapses_below_heteroclinic_rate():
    p = pwl(xe=1.8, F=1.0)
    trajectory = pwl_service.pwl_integrate(p, PwlState(x=1.5, y=0.3, mode=PwlMode.REGION1),
                                           IntegratorConfig(t_max=1000.0))
    assert trajectory.first_event(EventKind.COLLAPSE.value) is not None


def test_trajectory_persists_above_heteroclinic_rate():
    p = pwl(xe=1.8, F=2.0)
    trajectory = pwl_service.pwl_integrate(p, PwlState(x=1.5, y=0.3, mode=PwlMode.REGION1),
                                           IntegratorConfig(t_max=200.0))
    assert trajectory.first_event(EventKind.COLLAPSE.value) is None
    assert trajectory.meta["switches"] >= 2


def test_inconsistent_start_is_rejected():
    with pytest.raises(DomainError):
        pwl_service.pwl_integrate(pwl(xe=1.8, F=1.0), PwlState(x=1.5, y=0.3, mode=PwlMode.SLIDING))

# =============================================================================
# CROSSING CYCLES
# =============================================================================

def test_crossing_cycle_exists_above_heteroclinic_rate():
    p = pwl(xe=1.8, F=2.0)
    cycle = pwl_service.pwl_find_limit_cycle(p)
    assert cycle is not None
    floor = max(pwl_service.nullcline_heights(p))
    assert floor < cycle.section_point[1] < pwl_service.manifold_heights(p).h_s
    assert cycle.residual < 1e-8
    assert cycle.period > 0
    assert p.x0 < cycle.amplitude[0] < p.xe < cycle.amplitude[1] < p.x1


@pytest.mark.parametrize("xe, F", [(2.0, 1.0), (2.5, 1.0), (1.8, 1.0)])
def test_no_crossing_cycle(xe, F):
    assert pwl_service.pwl_find_limit_cycle(pwl(xe=xe, F=F)) is None


def test_no_crossing_cycle_on_the_heteroclinic_curve(base):
    p = pwl(xe=1.8, F=pwl_service.F_het(base, 1.8))
    assert pwl_service.pwl_find_limit_cycle(p) is None


@pytest.mark.slow
def test_pseudo_hopf_cycle_grows_linearly_in_x():
    amplitudes = {}
    for lam in (0.01, 0.02, 0.04):
        p = pwl(xe=2.0 - lam, F=1.0)
        cycle = pwl_service.pwl_find_limit_cycle(p)
        assert cycle is not None
        assert cycle.section_point[1] > max(pwl_service.nullcline_heights(p))
        amplitudes[lam] = cycle.x_amplitude
    assert amplitudes[0.02] / amplitudes[0.01] == pytest.approx(2.0, rel=0.25)
    assert amplitudes[0.04] / amplitudes[0.01] == pytest.approx(4.0, rel=0.25)
