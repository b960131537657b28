from __future__ import annotations

import numpy as np
import pytest

from secrecy_region import perfect_region as pr
from secrecy_region.model import ChannelSet, SystemConfig, fixture_channels, rates

# Independent oracle values from a generic conic solver (cvxpy + CLARABEL),
# solving the original covariance problem by bisection on the ratio level.
TAU_MAX_P100 = 5.7315441921
AN_TAU0 = 5.581085488
AN_TAU1 = 4.877820249
NOAN_TAU0 = 2.027745010
NOAN_TAU1 = 2.007494006


@pytest.fixture(scope="module")
def cfg():
    return SystemConfig(fixture_channels(), 100.0)


def two_user(h2):
    h1 = np.array([1.0 + 0.5j, -0.3 + 0.8j])
    return ChannelSet(np.array([h1, np.asarray(h2, dtype=complex)]))


def test_multicast_capacity(cfg):
    tau_max, Q0 = pr.multicast_capacity(cfg)
    assert tau_max == pytest.approx(TAU_MAX_P100, rel=1e-7)
    assert np.real(np.trace(Q0)) <= cfg.power * (1 + 1e-7)
    assert rates(pr.CovarianceTriple(Q0, 0 * Q0, 0 * Q0), cfg.channel_set).multicast_rate \
        == pytest.approx(tau_max, abs=1e-7)


@pytest.mark.parametrize("tau, use_an, expected", [
    (0.0, True, AN_TAU0), (1.0, True, AN_TAU1), (0.0, False, NOAN_TAU0), (1.0, False, NOAN_TAU1),
])
def test_qoms_srm_against_oracle(cfg, tau, use_an, expected):
    pt = pr.qoms_srm(tau, cfg, use_an)
    # the search is certified within eps/10 bits of the continuous optimum
    assert pt.secrecy_rate == pytest.approx(expected, abs=cfg.search_epsilon / 10)
    assert pt.secrecy_rate <= expected + 1e-6
    assert pt.solver_calls <= pr.grid_budget(cfg) + 1
    assert pt.multicast_rate_achieved >= tau - 1e-6
    assert pt.qoms_slack <= 1e-3 or tau == 0.0
    assert pt.ranks.rank_ratio_Qc <= pr.RANK_ONE_TOL
    # the refined triple achieves the certified rate
    r = rates(pt.triple, cfg.channel_set)
    assert r.secrecy_rate >= pt.secrecy_rate - 1e-5
    total = sum(np.real(np.trace(m)) for m in (pt.triple.Q0, pt.triple.Qc, pt.triple.Qa))
    assert total <= cfg.power * (1 + 1e-6)


def test_inner_sdp_matches_bisection_oracle(cfg):
    rng = np.random.default_rng(21)
    hi = pr.alpha_grid(cfg)[-1]
    checked = 0
    for _ in range(12):
        alpha = float(rng.uniform(1.0, hi))
        tau_prime = float(2.0 ** rng.uniform(0.0, 5.0) - 1.0)
        sol = pr.inner_sdp(alpha, tau_prime, cfg)
        ref = pr.quasiconvex_oracle(alpha, tau_prime, cfg)
        if ref is None:
            assert sol.status == pr.sdp.INFEASIBLE
            continue
        checked += 1
        assert sol.eta == pytest.approx(ref, rel=1e-4)
    assert checked >= 5


def test_inner_sdp_infeasible_beyond_capacity(cfg):
    tau_prime = 2.0 ** (TAU_MAX_P100 + 0.1) - 1.0
    assert pr.inner_sdp(2.0, tau_prime, cfg).status == pr.sdp.INFEASIBLE
    with pytest.raises(pr.QomsInfeasible):
        pr.qoms_srm(TAU_MAX_P100 + 0.1, cfg)


def test_orthogonal_eavesdropper_closed_form():
    h1 = np.array([1.0 + 0.5j, -0.3 + 0.8j])
    h2 = np.array([-(-0.3 + 0.8j), 1.0 + 0.5j]).conj()   # orthogonal to h1
    cs = ChannelSet(np.array([h1, h2]))
    cfg = SystemConfig(cs, 10.0)
    exact = np.log2(1 + 10.0 * np.linalg.norm(h1) ** 2)
    for use_an in (True, False):
        pt = pr.qoms_srm(0.0, cfg, use_an)
        assert pt.secrecy_rate == pytest.approx(exact, abs=cfg.search_epsilon / 10)


def test_two_user_rank_structure():
    cs = two_user([0.4 - 0.2j, 0.9 + 0.1j])
    cfg = SystemConfig(cs, 10.0, grid_points=4)
    res = pr.region_sweep(cfg)
    for p in res.points:
        assert p.ok
        if p.secrecy_rate > 0:
            assert p.ranks.rank_ratio_Qc <= 1e-6
            assert p.ranks.rank_ratio_Q0 <= 1e-6
            assert p.ranks.rank_ratio_Qa <= 1e-6


def test_zero_power_gives_empty_region():
    cfg = SystemConfig(fixture_channels(), 0.0, grid_points=2)
    tau_max, Q0 = pr.multicast_capacity(cfg)
    assert tau_max == 0.0 and not Q0.any()


def test_small_sweep_is_monotone_and_reports_budget():
    cfg = SystemConfig(fixture_channels(), 10.0, grid_points=4)
    res = pr.region_sweep(cfg)
    s = res.secrecy
    assert np.all(np.isfinite(s))
    assert np.all(np.diff(s) < -1e-4)
    assert s[-1] == 0.0
    assert res.budget["per_point_max"] <= res.budget["per_point_bound"]
    assert res.total_solver_calls == 1 + sum(p.solver_calls for p in res.points)


def test_helpers():
    assert pr.tau_grid(3.0, 4).tolist() == [0.0, 1.0, 2.0, 3.0]
    assert pr.rank_ratio(np.zeros((2, 2))) == 0.0
    assert pr.rank_ratio(np.diag([2.0, 1.0])) == pytest.approx(0.5)
    assert pr.rank_ratio(np.diag([2e-9, 1e-9]), zero_level=1e-8) == 0.0
    z = np.zeros((2, 2))
    d = pr.rank_diagnostics(pr.CovarianceTriple(np.diag([1e-8, 5e-9]), np.diag([10.0, 0.0]), z))
    assert d.rank_ratio_Q0 == 0.0 and d.rank_ratio_Qc == 0.0
    assert pr.prune_tolerance(0.1) == pytest.approx(2 ** 0.01 - 1)
