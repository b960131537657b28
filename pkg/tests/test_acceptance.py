"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Perfect-CSI criteria run on the full 25-point tau grid of the five-user
fixture at 20 dB.  The robust sweeps are far more expensive (one
S-procedure SDP per level test), so they use a shared 5-point grid over
[0, worst-case tau_max at radius 0.3]; the perfect boundary is evaluated on
the same points so every comparison is pointwise.
"""

from __future__ import annotations

import json
import time

import numpy as np
import pytest

from secrecy_region import cli
from secrecy_region import perfect_region as pr
from secrecy_region import robust_region as rr
from secrecy_region import suboptimal as so
from secrecy_region.model import ChannelSet, SystemConfig, fixture_channels, worst_case_eval

from conftest import ACCEPTANCE

P20 = 100.0
ORDER_SLACK = 1e-4
ROBUST_GRID = 5


def report(n: int, name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (name, bool(ok), detail)
    assert ok, f"criterion {n} ({name}): {detail}"


def perfect_cfg(grid=25):
    return SystemConfig(fixture_channels(), P20, grid_points=grid)


def robust_points(radius, taus):
    """Robust boundary at the given tau values (endpoint handled analytically)."""
    cfg = SystemConfig(fixture_channels(radius), P20)
    tau_max, Q0 = rr.wc_multicast_capacity(cfg)
    pts = []
    for t in taus:
        if t >= tau_max * (1 - 1e-12):
            pts.append(pr.endpoint_point(tau_max, Q0, cfg.channel_set))
        else:
            pts.append(rr.robust_qoms_srm(float(t), cfg))
    return cfg, tau_max, pts


def interior(points, tau_max):
    return [p for p in points if 0 < p.tau_ms < tau_max * (1 - 1e-12) and p.secrecy_rate > 0]


def strictly_decreasing(values):
    v = np.asarray([x for x in values if np.isfinite(x)])
    return bool(np.all(np.diff(v) < -ORDER_SLACK)), float(np.max(np.diff(v))) if v.size > 1 else 0.0


# ---------------------------------------------------------------- shared computations

@pytest.fixture(scope="module")
def perfect_sweeps():
    cfg = perfect_cfg()
    return {
        "optimal": pr.region_sweep(cfg),
        "no-an": so.no_an_region(cfg),
        "power-split": so.power_split_region(cfg),
        "tdma": so.tdma_region(cfg),
    }


@pytest.fixture(scope="module")
def robust_sweeps():
    tau_03, _ = rr.wc_multicast_capacity(SystemConfig(fixture_channels(0.3), P20))
    taus = pr.tau_grid(tau_03, ROBUST_GRID)
    out = {"taus": taus}
    for radius in (0.2, 0.3):
        cfg, tau_max, pts = robust_points(radius, taus)
        out[radius] = (cfg, tau_max, pts)
    cfg = perfect_cfg()
    out["perfect"] = [pr.qoms_srm(float(t), cfg) for t in taus]
    return out


# ---------------------------------------------------------------- criteria

def test_criterion_01_fixture_number():
    cfg = SystemConfig(fixture_channels(0.2), P20)
    t0 = time.perf_counter()
    pt = rr.robust_qoms_srm(0.0, cfg, use_an=False)
    dt = time.perf_counter() - t0
    ok = abs(pt.secrecy_rate - 0.8) <= 0.1 and dt < 300
    report(1, "robust no-AN secrecy rate at tau=0, radius 0.2", ok,
           f"{pt.secrecy_rate:.4f} bps/Hz (target 0.8 +- 0.1) in {dt:.1f} s")


def test_criterion_02_region_ordering(perfect_sweeps):
    s = {k: v.secrecy for k, v in perfect_sweeps.items()}
    chain = ("optimal", "power-split", "no-an", "tdma")
    worst = []
    for hi, lo in zip(chain, chain[1:]):
        mask = np.isfinite(s[lo])
        worst.append(float(np.min(s[hi][mask] - s[lo][mask])))
    same_grid = all(np.allclose(v.tau, perfect_sweeps["optimal"].tau) for v in perfect_sweeps.values())
    end_gap = abs(s["optimal"][-1] - s["no-an"][-1])
    ok = same_grid and min(worst) >= -ORDER_SLACK and end_gap <= 1e-2
    report(2, "optimal >= power-split >= no-AN >= TDMA, AN/no-AN meet at the last point", ok,
           f"min margins {', '.join(f'{w:.2e}' for w in worst)}; final-point gap {end_gap:.1e}")


def test_criterion_03_monotone(perfect_sweeps, robust_sweeps):
    worst = {}
    for name, res in perfect_sweeps.items():
        worst[name] = strictly_decreasing(res.secrecy)
    for radius in (0.2, 0.3):
        worst[f"robust-{radius}"] = strictly_decreasing([p.secrecy_rate for p in robust_sweeps[radius][2]])
    ok = all(v[0] for v in worst.values())
    report(3, "boundary strictly decreasing along every sweep", ok,
           "largest step " + ", ".join(f"{k} {v[1]:.2e}" for k, v in worst.items()))


def test_criterion_04_qoms_active(perfect_sweeps, robust_sweeps):
    slacks = [p.qoms_slack for p in interior(perfect_sweeps["optimal"].points,
                                             perfect_sweeps["optimal"].tau_max)]
    for radius in (0.2, 0.3):
        _, tau_max, pts = robust_sweeps[radius]
        slacks += [p.qoms_slack for p in interior(pts, tau_max)]
    worst = float(np.max(slacks))
    report(4, "QoMS constraint active at interior optimal points", worst <= 1e-3,
           f"max slack {worst:.2e} over {len(slacks)} points")


def test_criterion_05_rank_one(perfect_sweeps, robust_sweeps):
    pts = [p for p in perfect_sweeps["optimal"].points if p.secrecy_rate > 0]
    for radius in (0.2, 0.3):
        pts += [p for p in robust_sweeps[radius][2] if p.secrecy_rate > 0]
    worst_qc = max(p.ranks.rank_ratio_Qc for p in pts)
    h1 = np.array([1.0 + 0.5j, -0.3 + 0.8j])
    two = SystemConfig(ChannelSet(np.array([h1, [0.4 - 0.2j, 0.9 + 0.1j]])), 10.0, grid_points=5)
    k2 = [p for p in pr.region_sweep(two).points if p.secrecy_rate > 0]
    worst_k2 = max(max(p.ranks.rank_ratio_Qc, p.ranks.rank_ratio_Q0, p.ranks.rank_ratio_Qa) for p in k2)
    ok = worst_qc <= 1e-6 and worst_k2 <= 1e-6
    report(5, "rank-one Qc (perfect and robust); K=2 rank(Q0)=1, rank(Qa)<=1", ok,
           f"max Qc ratio {worst_qc:.1e} over {len(pts)} points; K=2 max ratio {worst_k2:.1e}")


def test_criterion_06_oracle_equivalence():
    cfg = perfect_cfg()
    rng = np.random.default_rng(2024)
    hi = pr.alpha_grid(cfg)[-1]
    errors, mismatched, probes = [], 0, 0
    while len(errors) < 50 and probes < 200:
        alpha = float(rng.uniform(1.0, hi))
        tau_prime = float(2.0 ** rng.uniform(0.0, 5.7) - 1.0)
        ref = pr.quasiconvex_oracle(alpha, tau_prime, cfg)
        sol = pr.inner_sdp(alpha, tau_prime, cfg)
        probes += 1
        if ref is None:
            mismatched += sol.status != pr.sdp.INFEASIBLE
            continue
        errors.append(abs(sol.eta - ref) / ref)
    worst = max(errors)
    ok = worst <= 1e-4 and mismatched == 0 and len(errors) >= 50
    report(6, "Charnes-Cooper SDP equals direct bisection", ok,
           f"max rel. error {worst:.1e} on {len(errors)} feasible probes "
           f"({probes - len(errors)} infeasible, {mismatched} disagreements)")


def test_criterion_07_soundness(robust_sweeps):
    worst_s, worst_m, n = np.inf, np.inf, 0
    for radius in (0.2, 0.3):
        cfg, _, pts = robust_sweeps[radius]
        for i, p in enumerate(pts):
            if p.secrecy_rate <= 0:
                continue
            wc = worst_case_eval(p.triple, cfg.channel_set, 10_000, seed=i)
            worst_s = min(worst_s, wc.secrecy_rate - p.secrecy_rate)
            worst_m = min(worst_m, wc.multicast_rate - p.multicast_rate_achieved)
            n += 1
    ok = worst_s >= -1e-3 and worst_m >= -1e-3
    report(7, "sampled worst case never below certified rates", ok,
           f"min sampled-minus-certified: secrecy {worst_s:.2e}, multicast {worst_m:.2e} "
           f"({n} triples x 1e4 samples)")


def test_criterion_08_degeneracy():
    cfg0 = SystemConfig(fixture_channels(0.0), P20, grid_points=ROBUST_GRID)
    robust = rr.robust_region_sweep(cfg0)
    perfect = pr.region_sweep(cfg0)
    s = rr.RobustSettings.from_config(cfg0)
    tol = 2 * s.eps + s.eps_b
    gap = float(np.max(np.abs(robust.secrecy - perfect.secrecy)))
    ok = np.allclose(robust.tau, perfect.tau, atol=1e-6) and gap <= tol
    report(8, "zero-radius robust sweep equals perfect sweep", ok,
           f"max gap {gap:.1e} (tolerance {tol:.1e}) on {ROBUST_GRID} points")


def test_criterion_09_budgets(perfect_sweeps, robust_sweeps, tmp_path):
    perfect_ok = all(r.budget["per_point_max"] <= r.budget["per_point_bound"]
                     for k, r in perfect_sweeps.items() if k in ("optimal", "no-an"))
    p_used = perfect_sweeps["optimal"].budget["per_point_max"]
    p_bound = perfect_sweeps["optimal"].budget["per_point_bound"]
    r_used, r_bound = 0, np.inf
    for radius in (0.2, 0.3):
        cfg, _, pts = robust_sweeps[radius]
        bound = rr.robust_budget(cfg, rr.RobustSettings.from_config(cfg)) + 1
        r_used = max(r_used, max(p.solver_calls for p in pts))
        r_bound = min(r_bound, bound)
    # the JSON summary reports actual against bound
    scen = tmp_path / "s.toml"
    scen.write_text('power_db = [0.0]\ngrid_points = 2\nradius = 0.05\nschemes = ["optimal", "robust"]\n'
                    "[channels]\nre = [[1.1, -0.2], [0.3, 0.7], [-0.6, 0.4]]\n"
                    "im = [[0.4, 0.9], [-0.8, 0.2], [0.5, -0.3]]\n")
    code = cli.main(["--scenario", str(scen), "--out", str(tmp_path / "out")])
    runs = json.loads((tmp_path / "out" / "summary.json").read_text())["runs"]
    json_ok = code == 0 and all(r["within_budget"] and "per_point_bound" in r["budget"] for r in runs)
    ok = perfect_ok and r_used <= r_bound and json_ok
    report(9, "solver calls within the search-count bounds", ok,
           f"perfect {p_used} <= {p_bound:.3g}, robust {r_used} <= {r_bound:.3g}, "
           f"JSON summary reports both: {json_ok}")


def test_criterion_10_shrinkage(robust_sweeps):
    s03 = np.array([p.secrecy_rate for p in robust_sweeps[0.3][2]])
    s02 = np.array([p.secrecy_rate for p in robust_sweeps[0.2][2]])
    sp = np.array([p.secrecy_rate for p in robust_sweeps["perfect"]])
    m1, m2 = float(np.min(s02 - s03)), float(np.min(sp - s02))
    ok = m1 >= -ORDER_SLACK and m2 >= -ORDER_SLACK
    report(10, "boundary at radius 0.3 <= radius 0.2 <= perfect", ok,
           f"min margins {m1:.3f} and {m2:.3f} on {len(s03)} shared points")
