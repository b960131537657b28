"""Power sweeps over 5, 10, 15 and 20 dB, checked as pointwise region inclusions.

Skipped unless SECRECY_SLOW=1; a full run takes tens of minutes.
"""

from __future__ import annotations

import numpy as np
import pytest

from secrecy_region import perfect_region as pr
from secrecy_region import robust_region as rr
from secrecy_region import suboptimal as so
from secrecy_region.model import SystemConfig, db_to_linear, fixture_channels

POWERS_DB = (5.0, 10.0, 15.0, 20.0)
SLACK = 1e-4
GRID = 5

pytestmark = pytest.mark.slow


def boundary_at(taus, solve, tau_max):
    out = []
    for t in taus:
        if t >= tau_max * (1 - 1e-12):
            out.append(0.0 if t <= tau_max * (1 + 1e-12) else np.nan)
        else:
            out.append(solve(float(t)))
    return np.array(out)


@pytest.fixture(scope="module")
def perfect():
    res = {}
    for db in POWERS_DB:
        cfg = SystemConfig(fixture_channels(), db_to_linear(db), grid_points=GRID)
        res[db] = (cfg, pr.region_sweep(cfg), so.no_an_region(cfg))
    return res


@pytest.mark.parametrize("db", POWERS_DB)
def test_scheme_ordering_per_power(perfect, db):
    cfg, opt, no_an = perfect[db]
    split = so.power_split_region(cfg)
    tdma = so.tdma_region(cfg)
    chain = (opt.secrecy, split.secrecy, no_an.secrecy, tdma.secrecy)
    for hi, lo in zip(chain, chain[1:]):
        mask = np.isfinite(lo)
        assert np.all(hi[mask] >= lo[mask] - SLACK)


def test_regions_grow_with_power(perfect):
    # every region at lower power lies inside the region at higher power
    for lo_db, hi_db in zip(POWERS_DB, POWERS_DB[1:]):
        small = perfect[lo_db][1]
        cfg_hi, big, _ = perfect[hi_db]
        assert big.tau_max >= small.tau_max
        bigger = boundary_at(small.tau, lambda t: pr.qoms_srm(t, cfg_hi).secrecy_rate, big.tau_max)
        assert np.all(bigger >= small.secrecy - SLACK)


@pytest.mark.parametrize("db", (10.0, 20.0))
def test_robust_inside_perfect_per_power(perfect, db):
    cfg_p, opt, _ = perfect[db]
    cfg = SystemConfig(fixture_channels(0.2), db_to_linear(db), grid_points=3)
    robust = rr.robust_region_sweep(cfg)
    ref = boundary_at(robust.tau, lambda t: pr.qoms_srm(t, cfg_p).secrecy_rate, opt.tau_max)
    assert np.all(robust.secrecy <= ref + SLACK)
