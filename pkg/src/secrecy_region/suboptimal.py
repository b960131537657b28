"""Suboptimal schemes (power splitting, lower bound) and the comparison baselines."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import sdp
from .model import ChannelSet, CovarianceTriple, SystemConfig, worst_case_eval
from .perfect_region import (
    XI_FLOOR,
    QomsInfeasible,
    RatePoint,
    RegionResult,
    SolverFailure,
    endpoint_point,
    failed_point,
    finish_point,
    multicast_capacity,
    prune_tolerance,
    qoms_srm,
    region_sweep,
    tau_grid,
)
from .robust_region import (
    RobustSettings,
    beta_max,
    certified_multicast_rate,
    lifted,
    robust_qoms_srm,
    robust_quadratic,
    robust_region_sweep,
    wc_multicast_capacity,
)
from .search import FAILED, Evaluation, pruned_grid_search, uniform_grid

RHO_GRID_POINTS = 51
SPLIT_RATE_TOL = 1e-4
SPLIT_MAX_STEPS = 20
R0_TOL = 1e-7


@dataclass
class PowerSplitPoint:
    rho: float
    Rc: float
    R0: float
    triple: CovarianceTriple
    solver_calls: int = 0


@dataclass
class LowerBoundSolution:
    status: str
    beta: float
    a: float = np.nan
    xi: float = np.nan
    Z: np.ndarray | None = None
    Gamma: np.ndarray | None = None
    Phi: np.ndarray | None = None
    lambda_slacks: np.ndarray | None = None
    mu_slacks: np.ndarray | None = None
    triple: CovarianceTriple | None = None

    @property
    def u(self) -> float:
        return self.a / self.xi

    @property
    def v(self) -> float:
        return 1.0 / self.xi


def _corners(config: SystemConfig, robust: bool, settings: RobustSettings | None):
    if robust:
        return wc_multicast_capacity(config)
    return multicast_capacity(config)


def _srm(tau: float, config: SystemConfig, robust: bool, settings, use_an: bool = True) -> RatePoint:
    if robust:
        return robust_qoms_srm(tau, config, settings, use_an)
    return qoms_srm(tau, config, use_an)


# ---------------------------------------------------------------- power splitting

def multicast_with_interference(Qc: np.ndarray, Qa: np.ndarray, channels: ChannelSet, power: float,
                                robust: bool, solver=None) -> tuple[float, np.ndarray]:
    """Max-min (worst-case) multicast SINR with Qc, Qa fixed as interference.

    Returns (rate, Q0).  t multiplies only constant matrices, so this is one SDP.
    """
    n = channels.n_tx
    if power <= 0:
        return 0.0, np.zeros((n, n), dtype=complex)
    prob = sdp.SdpProblem()
    Q0 = prob.hermitian("Q0", n)
    t = prob.scalar("t")
    prob.maximize(t)
    interf = Qc + Qa
    for k in range(channels.n_rx):
        h = channels.channels[k]
        eps = channels.radii[k] if robust else 0.0
        if eps == 0:
            prob.add_ineq(sdp.quad(h, Q0) - t * (1.0 + float(np.real(h @ interf @ h.conj()))))
            continue
        d = prob.scalar(f"d{k}")
        L = lifted(h)
        corner = np.zeros((n + 1, n + 1))
        corner[n, n] = 1.0
        ball = np.diag(np.r_[np.ones(n), -eps ** 2]).astype(complex)
        prob.add_lmi(sdp.congruence(L, Q0) - sdp.scalar_matrix(t, L @ interf @ L.conj().T + corner)
                     + sdp.scalar_matrix(d, ball))
    prob.add_ineq(power - sdp.trace(Q0))
    sol = sdp.solve(prob, solver)
    if not sol.usable:
        raise SolverFailure(f"multicast subproblem ended with status {sol.status}")
    return float(np.log2(1.0 + max(sol.values["t"], 0.0))), sol.values["Q0"]


def power_split_point(rho: float, config: SystemConfig, robust: bool = False,
                      settings: RobustSettings | None = None) -> PowerSplitPoint:
    """Secrecy rate with power rho*P, then best multicast rate with the remainder."""
    n = config.channel_set.n_tx
    P = config.power
    calls = 0
    if rho <= 0 or P == 0:
        Rc, Qc, Qa = 0.0, np.zeros((n, n), dtype=complex), np.zeros((n, n), dtype=complex)
    else:
        pt = _srm(0.0, replace(config, power=rho * P), robust, settings)
        Rc, Qc, Qa = pt.secrecy_rate, pt.triple.Qc, pt.triple.Qa
        calls += pt.solver_calls
    R0, Q0 = multicast_with_interference(Qc, Qa, config.channel_set, (1.0 - rho) * P, robust)
    calls += 1
    return PowerSplitPoint(rho, Rc, R0, CovarianceTriple(Q0, Qc, Qa), calls)


def power_split_region(config: SystemConfig, robust: bool = False, rho_grid=None,
                       settings: RobustSettings | None = None) -> RegionResult:
    """Power-splitting boundary, reported on the common tau_ms grid.

    The rho grid gives the (R0, Rc) curve; for each tau grid point the rho
    bracketing R0(rho) = tau is then narrowed by bisection so the reported
    rate is not a coarse staircase.
    """
    if robust:
        settings = settings or RobustSettings.from_config(config)
    rho_grid = np.linspace(0.0, 1.0, RHO_GRID_POINTS) if rho_grid is None else np.asarray(rho_grid)
    if np.any(rho_grid < 0) or np.any(rho_grid > 1):
        raise sdp.ValidationError("rho values must lie in [0, 1]")
    cache: dict[float, PowerSplitPoint] = {}
    statuses: dict[float, str] = {}

    def at(rho: float) -> PowerSplitPoint | None:
        rho = float(rho)
        if rho not in cache and rho not in statuses:
            try:
                cache[rho] = power_split_point(rho, config, robust, settings)
            except (QomsInfeasible, SolverFailure, np.linalg.LinAlgError) as exc:
                statuses[rho] = f"error: {exc}"
        return cache.get(rho)

    for rho in rho_grid:
        at(rho)
    curve = [cache[r] for r in sorted(cache)]
    tau_max = max((p.R0 for p in curve), default=0.0)
    if robust:
        tau_max_ref, _ = wc_multicast_capacity(config)
    else:
        tau_max_ref, _ = multicast_capacity(config)
    points = []
    for tau in tau_grid(tau_max_ref, config.grid_points):
        feasible = [p for p in cache.values() if p.R0 >= tau - R0_TOL]
        if not feasible:
            points.append(failed_point(float(tau), "infeasible"))
            continue
        lo = max(feasible, key=lambda p: (p.Rc, -p.rho))
        for _ in range(SPLIT_MAX_STEPS):
            above = [p for p in cache.values() if p.rho > lo.rho and p.R0 < tau - R0_TOL]
            if not above:
                break
            hi = min(above, key=lambda p: p.rho)
            if hi.Rc - lo.Rc <= SPLIT_RATE_TOL:
                break
            mid = at(0.5 * (lo.rho + hi.rho))
            if mid is None:
                break
            if mid.R0 >= tau - R0_TOL and mid.Rc >= lo.Rc:
                lo = mid
        pt = finish_point(float(tau), lo.Rc, lo.triple, config.channel_set, lo.solver_calls, lo.rho,
                          achieved=lo.R0)
        points.append(pt)
    total = sum(p.solver_calls for p in cache.values())
    res = RegionResult("power-split-robust" if robust else "power-split", points, tau_max_ref, total)
    res.budget = {"rho_curve": [(p.rho, p.R0, p.Rc) for p in sorted(cache.values(), key=lambda p: p.rho)],
                  "rho_failures": statuses, "tau_max_split": tau_max}
    return res


# ---------------------------------------------------------------- lower bound

def lower_bound_inner(beta: float, tau_prime: float, config: SystemConfig,
                      solver: sdp.SolverSettings | None = None) -> LowerBoundSolution:
    """Maximize the ratio of the worst-case numerator to the worst-case denominator.

    Charnes-Cooper variables: xi = 1/v, a = u/v and every block scaled by xi.
    """
    ch = config.channel_set
    H, radii = ch.channels, ch.radii
    n, K = ch.n_tx, ch.n_rx
    prob = sdp.SdpProblem()
    Z = prob.hermitian("Z", n)
    G = prob.hermitian("Gamma", n)
    # with a zero multicast target the multicast covariance only wastes power
    Phi = prob.hermitian("Phi", n) if tau_prime > 0 else None
    xi = prob.scalar("xi")
    a = prob.scalar("a")

    def slack(name, eps):
        return prob.scalar(name) if eps > 0 else None

    prob.maximize(a)
    # numerator: xi + min_h1 h1 (Z + Gamma) h1^H >= a
    robust_quadratic(prob, H[0], radii[0], Z + G, xi - a, slack("nu", radii[0]))
    # denominator: beta (xi + max_h1 h1 Gamma h1^H) <= 1
    robust_quadratic(prob, H[0], radii[0], G * (-beta), 1.0 - beta * xi, slack("omega", radii[0]))
    for k in range(1, K):
        robust_quadratic(prob, H[k], radii[k], G * (beta - 1.0) - Z, (beta - 1.0) * xi,
                         slack(f"lam{k}", radii[k]))
    for k in range(K if Phi is not None else 0):
        robust_quadratic(prob, H[k], radii[k], Phi - (G + Z) * tau_prime, -tau_prime * xi,
                         slack(f"mu{k}", radii[k]))
    used = sdp.trace(Z) + sdp.trace(G)
    if Phi is not None:
        used = used + sdp.trace(Phi)
    prob.add_ineq(config.power * xi - used)
    prob.add_ineq(xi - XI_FLOOR)
    sol = sdp.solve(prob, solver)
    if not sol.usable:
        return LowerBoundSolution(sol.status, beta)
    v = sol.values
    x = v["xi"]
    lam = np.array([v.get(f"lam{k}", 0.0) for k in range(1, K)])
    mu = np.array([v.get(f"mu{k}", 0.0) for k in range(K)])
    Phi_v = v.get("Phi", np.zeros((n, n), dtype=complex))
    triple = CovarianceTriple(Phi_v / x, v["Z"] / x, v["Gamma"] / x)
    return LowerBoundSolution(sdp.OPTIMAL, beta, v["a"], x, v["Z"], v["Gamma"], Phi_v, lam, mu, triple)


def lower_bound_budget(config: SystemConfig) -> float:
    return (beta_max(config) - 1.0) / (2.0 ** config.search_epsilon - 1.0)


def lower_bound_srm(tau_ms: float, config: SystemConfig, solver=None) -> RatePoint:
    tau_prime = 2.0 ** tau_ms - 1.0

    def evaluate(beta):
        sol = lower_bound_inner(beta, tau_prime, config, solver)
        if sol.status == sdp.INFEASIBLE or (sol.status == sdp.OPTIMAL and not sol.a > 0):
            return None
        if sol.status != sdp.OPTIMAL:
            return FAILED
        return Evaluation(sol.a, sol.a, sol)

    grid = uniform_grid(1.0, beta_max(config), 2.0 ** config.search_epsilon - 1.0)
    res = pruned_grid_search(grid, evaluate, prune_tolerance(config.search_epsilon))
    if res is None:
        raise QomsInfeasible("QoMS target infeasible")
    best: LowerBoundSolution = res.payload
    triple = best.triple.clipped()
    achieved = certified_multicast_rate(triple, config.channel_set, solver)
    secrecy = max(0.0, float(np.log2(best.a)))
    pt = finish_point(tau_ms, secrecy, triple, config.channel_set, res.evaluations + 1, best.beta,
                      achieved)
    pt.extra.update(grid_size=res.grid_size, search_failures=res.failures)
    return pt


def lower_bound_region(config: SystemConfig, settings: RobustSettings | None = None,
                       solver=None) -> RegionResult:
    tau_max, Q0 = wc_multicast_capacity(config, solver)
    points, total = [], 1
    for tau in tau_grid(tau_max, config.grid_points):
        if tau >= tau_max:
            pt = endpoint_point(tau_max, Q0, config.channel_set)
        else:
            try:
                pt = lower_bound_srm(float(tau), config, solver)
            except QomsInfeasible:
                pt = failed_point(float(tau), "infeasible")
            except (SolverFailure, np.linalg.LinAlgError) as exc:
                pt = failed_point(float(tau), f"error: {exc}")
        total += pt.solver_calls
        points.append(pt)
    budget = {"per_point_bound": lower_bound_budget(config) + 1.0,
              "per_point_max": max((p.solver_calls for p in points), default=0)}
    return RegionResult("lower-bound", points, tau_max, total, budget)


# ---------------------------------------------------------------- baselines

def no_an_region(config: SystemConfig, robust: bool = False,
                 settings: RobustSettings | None = None) -> RegionResult:
    """The same sweeps with the artificial-noise covariance fixed to zero."""
    if robust:
        return robust_region_sweep(config, settings, use_an=False, scheme="no-an-robust")
    return region_sweep(config, use_an=False, scheme="no-an")


def tdma_region(config: SystemConfig, robust: bool = False,
                settings: RobustSettings | None = None, use_an: bool = False) -> RegionResult:
    """Time sharing with halved rates: segment from (tau_max/2, 0) to (0, g*(0)/2).

    The secrecy corner is the conventional secure-beamforming problem, i.e.
    without artificial noise unless ``use_an`` is set.  Grid points beyond
    tau_max/2 are not achievable and are marked infeasible.
    """
    if robust:
        settings = settings or RobustSettings.from_config(config)
    tau_max, Q0 = _corners(config, robust, settings)
    n = config.channel_set.n_tx
    calls = 1
    if tau_max <= 0:
        pt = finish_point(0.0, 0.0, CovarianceTriple.zeros(n), config.channel_set, calls, np.nan,
                          achieved=0.0)
        return RegionResult("tdma-robust" if robust else "tdma", [pt], 0.0, calls)
    srm = _srm(0.0, config, robust, settings, use_an)
    calls += srm.solver_calls
    g0 = srm.secrecy_rate
    half_tau, half_g = tau_max / 2.0, g0 / 2.0
    points = []
    for tau in tau_grid(tau_max, config.grid_points):
        if tau > half_tau * (1.0 + 1e-12):
            points.append(failed_point(float(tau), "infeasible"))
            continue
        frac = tau / half_tau
        # time sharing has no single covariance triple; only the rate pair is reported
        pt = RatePoint(float(tau), half_g * (1.0 - frac), None, float(tau), 0.0, None, 0, frac)
        points.append(pt)
    res = RegionResult("tdma-robust" if robust else "tdma", points, tau_max, calls)
    res.budget = {"corner_secrecy": g0, "corner_multicast": tau_max}
    return res


def nonrobust_eval(config: SystemConfig, settings: RobustSettings | None = None,
                   n_samples: int = 10_000, seed: int = 0) -> RegionResult:
    """Design for the estimated channels as if exact, then score over the uncertainty balls."""
    nominal = replace(config, channel_set=config.channel_set.with_radii(0.0))
    sweep = region_sweep(nominal, scheme="nonrobust")
    points = []
    for p in sweep.points:
        if not p.ok:
            points.append(p)
            continue
        wc = worst_case_eval(p.triple, config.channel_set, n_samples, seed)
        pt = finish_point(p.tau_ms, wc.secrecy_rate, p.triple, config.channel_set, p.solver_calls,
                          p.search_value, achieved=wc.multicast_rate)
        pt.extra["nominal_secrecy_rate"] = p.secrecy_rate
        points.append(pt)
    return RegionResult("nonrobust", points, sweep.tau_max, sweep.total_solver_calls, sweep.budget)
