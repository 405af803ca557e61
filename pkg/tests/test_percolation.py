import math

import numpy as np
import pytest

from fpplab import DomainError, LatticeSpec
from fpplab.percolation import (_bond_uniforms, bond_cluster_census, crosses, crossing_threshold, estimate_pc,
                                estimate_vec_pc, euclidean_speed, flat_edge_geometry, oriented_run, oriented_speed,
                                survival_probability, survival_threshold, survives)

from oracles import crossing_by_flood


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
def test_crossing_matches_ndimage(seed, p):
    spec = LatticeSpec.cube(2, 6)
    open_mask = (_bond_uniforms(spec, seed) < p) & spec.edge_mask()
    assert crosses(2, 6, p, seed) == crossing_by_flood(open_mask, spec)


@pytest.mark.parametrize("seed", range(6))
def test_threshold_consistent_with_crossing(seed):
    # bonds are open when u < p, so the threshold is an infimum
    th = crossing_threshold(2, 5, seed)
    assert crosses(2, 5, np.nextafter(th, 1.0), seed)
    assert not crosses(2, 5, th, seed)


def test_census_counts_all_sites():
    c = bond_cluster_census(2, 10, 0.3, 1)
    assert sum(s * k for s, k in c.histogram.items()) == c.num_sites == 21 * 21
    assert bond_cluster_census(2, 4, 0.0, 1).histogram == {1: 81}
    assert bond_cluster_census(2, 4, 1.0, 1).histogram == {81: 1}


def test_subcritical_tail_decays():
    fit = bond_cluster_census(2, 60, 0.3, 2).tail_fit()
    assert fit.slope < 0


def test_pc_estimate_near_half():
    est = estimate_pc(2, 32, 60, 0)
    assert est.ci_low <= est.estimate <= est.ci_high
    assert abs(est.estimate - 0.5) < 0.05
    rows = est.curve([0.0, 0.5, 1.0])
    assert rows[0][1] == 0.0 and rows[-1][1] == 1.0


def test_pc_worker_invariance():
    a = estimate_pc(2, 10, 16, 3, workers=1)
    b = estimate_pc(2, 10, 16, 3, workers=3)
    assert np.array_equal(a.thresholds, b.thresholds)


def test_probability_validation():
    with pytest.raises(DomainError):
        crosses(2, 4, 1.5, 0)
    with pytest.raises(DomainError):
        oriented_run(-0.1, 10, 0)


# --- oriented percolation --------------------------------------------------


def test_full_occupation_speed_is_one():
    est = oriented_speed(1.0, 200, 5, 0)
    assert est.speed == 1.0 and est.ci_low == 1.0 and est.ci_high == 1.0
    assert est.survival == 1.0


def test_closed_bonds_die_at_once():
    est = oriented_speed(0.0, 50, 5, 0)
    assert est.extinct and math.isnan(est.speed)


def test_right_edge_advances_by_at_most_one():
    steps = np.diff(oriented_run(0.8, 300, 4).right_edge)
    assert np.all(steps <= 1) and np.all(steps % 2 == 1)


def test_coupled_survival_is_monotone_in_q():
    for seed in range(10):
        alive = [survives(q, 150, seed) for q in np.linspace(0.3, 1.0, 15)]
        assert alive == sorted(alive)


def test_survival_threshold_brackets():
    for seed in range(5):
        q = survival_threshold(100, seed)
        assert survives(q, 100, seed)
        assert not survives(q - 1e-9, 100, seed) or q == 0.0


def test_speed_at_point_eight():
    # Durrett-convention edge speed of directed bond percolation at q = 0.8 is about 0.58
    est = oriented_speed(0.8, 1500, 60, 1)
    assert 0.55 < est.speed < 0.61


def test_survival_phases():
    assert survival_probability(0.9, 300, 40, 0)[0] > 0.9
    assert survival_probability(0.4, 300, 40, 0)[0] == 0.0


def test_vec_pc_estimate():
    est = estimate_vec_pc(400, 40, 0)
    # the directed bond percolation threshold on Z^2 is about 0.6447
    assert est.ci_low <= est.estimate <= est.ci_high
    assert 0.62 < est.estimate < 0.68


# --- flat edge -------------------------------------------------------------


def test_flat_edge_limits():
    assert flat_edge_geometry(1.0, 1 / math.sqrt(2)).theta_q == pytest.approx(0.0, abs=1e-12)
    assert flat_edge_geometry(None, 0.0).theta_q == pytest.approx(math.pi / 4, abs=1e-12)


def test_flat_edge_normal():
    g = flat_edge_geometry(0.8, 0.4)
    s = 0.4 / math.sqrt(2)
    assert g.N_q == pytest.approx((0.5 + s, 0.5 - s))
    assert math.tan(g.theta_q) == pytest.approx(g.N_q[1] / g.N_q[0])


def test_flat_edge_domain():
    with pytest.raises(DomainError):
        flat_edge_geometry(None, 0.8)


def test_speed_conversion():
    assert euclidean_speed(1.0) == pytest.approx(1 / math.sqrt(2))
