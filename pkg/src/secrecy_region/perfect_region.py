"""Secrecy-rate region under perfect CSI.

The QoMS-constrained secrecy rate maximization is split into an outer line
search over alpha (an upper bound on 1 + the strongest eavesdropper SINR) and
an inner linear-fractional program, linearized by the Charnes-Cooper change of
variables Q = block / xi.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import sdp
from .model import ChannelSet, CovarianceTriple, SystemConfig, rates
from .search import FAILED, Evaluation, pruned_grid_search, uniform_grid

XI_FLOOR = 1e-9
RANK_ONE_TOL = 1e-6
ZERO_POWER_FRACTION = 1e-6
FEASIBLE_MARGIN = -1e-9
REFINE_BACKOFF = 1e-7
# solver-accuracy allowance when comparing alpha-search bounds
SEARCH_SLACK = 1e-7
PRUNE_FRACTION_INV = 10.0


class QomsInfeasible(RuntimeError):
    pass


class SolverFailure(RuntimeError):
    pass


@dataclass
class InnerSolution:
    status: str
    alpha: float
    eta: float = np.nan
    Z: np.ndarray | None = None
    Gamma: np.ndarray | None = None
    Phi: np.ndarray | None = None
    xi: float = np.nan
    triple: CovarianceTriple | None = None

    @property
    def feasible(self) -> bool:
        return self.status == sdp.OPTIMAL


@dataclass
class RankDiagnostics:
    rank_ratio_Qc: float
    rank_ratio_Q0: float
    rank_ratio_Qa: float

    @property
    def qc_rank_one(self) -> bool:
        return self.rank_ratio_Qc <= RANK_ONE_TOL

    @property
    def q0_rank_one(self) -> bool:
        return self.rank_ratio_Q0 <= RANK_ONE_TOL

    @property
    def qa_rank_at_most_one(self) -> bool:
        return self.rank_ratio_Qa <= RANK_ONE_TOL


@dataclass
class RatePoint:
    tau_ms: float
    secrecy_rate: float
    triple: CovarianceTriple | None
    multicast_rate_achieved: float = np.nan
    qoms_slack: float = np.nan
    ranks: RankDiagnostics | None = None
    solver_calls: int = 0
    search_value: float = np.nan      # chosen alpha / beta / rho
    status: str = "optimal"
    extra: dict = field(default_factory=dict)

    @property
    def tau_prime(self) -> float:
        return 2.0 ** self.tau_ms - 1.0

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


@dataclass
class RegionResult:
    scheme: str
    points: list
    tau_max: float
    total_solver_calls: int = 0
    budget: dict = field(default_factory=dict)

    @property
    def tau(self) -> np.ndarray:
        return np.array([p.tau_ms for p in self.points])

    @property
    def secrecy(self) -> np.ndarray:
        return np.array([p.secrecy_rate if p.ok else np.nan for p in self.points])


def rank_ratio(M: np.ndarray, zero_level: float = 0.0) -> float:
    """lambda_2 / lambda_1, or 0 when lambda_1 <= zero_level (a numerically zero matrix)."""
    w = np.linalg.eigvalsh(sdp.hermitianize(np.asarray(M, dtype=complex)))[::-1]
    if w.size < 2 or w[0] <= zero_level:
        return 0.0
    return float(max(w[1], 0.0) / w[0])


def rank_diagnostics(triple: CovarianceTriple) -> RankDiagnostics:
    """Second-to-first eigenvalue ratios of each covariance.

    A covariance whose top eigenvalue is below ZERO_POWER_FRACTION of the
    triple's total power is solver noise around zero and reports ratio 0.
    """
    total = sum(float(np.real(np.trace(M))) for M in (triple.Q0, triple.Qc, triple.Qa))
    zero = ZERO_POWER_FRACTION * max(total, 0.0)
    return RankDiagnostics(rank_ratio(triple.Qc, zero), rank_ratio(triple.Q0, zero),
                           rank_ratio(triple.Qa, zero))


def grid_budget(config: SystemConfig) -> float:
    """Uniform-search count bound P ||h1||^2 / (2^eps - 1)."""
    h1 = config.channels[0]
    return config.power * float(np.vdot(h1, h1).real) / (2.0 ** config.search_epsilon - 1.0)


def prune_tolerance(eps: float) -> float:
    """Relative pruning tolerance: a tenth of the outer-search budget, in bits."""
    return 2.0 ** (eps / PRUNE_FRACTION_INV) - 1.0


def alpha_grid(config: SystemConfig) -> np.ndarray:
    h1 = config.channels[0]
    hi = 1.0 + config.power * float(np.vdot(h1, h1).real)
    return uniform_grid(1.0, hi, 2.0 ** config.search_epsilon - 1.0)


# ---------------------------------------------------------------- multicast

def multicast_capacity(config: SystemConfig, settings: sdp.SolverSettings | None = None):
    """Max-min multicast rate with the whole power budget; returns (tau_max, Q0)."""
    H = config.channels
    n = H.shape[1]
    if config.power == 0:
        return 0.0, np.zeros((n, n), dtype=complex)
    prob = sdp.SdpProblem()
    Q0 = prob.hermitian("Q0", n)
    t = prob.scalar("t")
    prob.maximize(t)
    for h in H:
        prob.add_ineq(sdp.quad(h, Q0) - t)
    prob.add_ineq(config.power - sdp.trace(Q0))
    sol = sdp.solve(prob, settings)
    if not sol.usable:
        raise SolverFailure(f"multicast capacity solve ended with status {sol.status}")
    Q = sol.values["Q0"]
    snr = float(np.min([np.real(h @ Q @ h.conj()) for h in H]))
    return float(np.log2(1.0 + max(snr, 0.0))), Q


# ---------------------------------------------------------------- inner problem

def inner_sdp(alpha: float, tau_prime: float, config: SystemConfig, use_an: bool = True,
              settings: sdp.SolverSettings | None = None) -> InnerSolution:
    """Charnes-Cooper SDP for fixed alpha; eta is its optimal value."""
    H = config.channels
    n = H.shape[1]
    h1 = H[0]
    prob = sdp.SdpProblem()
    Z = prob.hermitian("Z", n)
    Phi = prob.hermitian("Phi", n)
    G = prob.hermitian("Gamma", n) if use_an else None
    xi = prob.scalar("xi")

    def q(h, X):
        return sdp.quad(h, X) if X is not None else 0.0

    prob.maximize(xi + q(h1, Z) + q(h1, G))
    prob.add_eq(alpha * xi + alpha * q(h1, G) - 1.0)
    for h in H[1:]:
        prob.add_ineq((alpha - 1.0) * (xi + q(h, G)) - q(h, Z))
    for h in H:
        prob.add_ineq(q(h, Phi) - tau_prime * (q(h, G) + q(h, Z)) - tau_prime * xi)
    budget = config.power * xi - sdp.trace(Z) - sdp.trace(Phi)
    if use_an:
        budget = budget - sdp.trace(G)
    prob.add_ineq(budget)
    prob.add_ineq(xi - XI_FLOOR)
    sol = sdp.solve(prob, settings)
    if not sol.usable:
        return InnerSolution(sol.status, alpha)
    v = sol.values
    x = v["xi"]
    Gv = v["Gamma"] if use_an else np.zeros((n, n), dtype=complex)
    triple = CovarianceTriple(v["Phi"] / x, v["Z"] / x, Gv / x)
    return InnerSolution(sdp.OPTIMAL, alpha, sol.objective, v["Z"], Gv, v["Phi"], x, triple)


def _level_margin(alpha: float, level: float, tau_prime: float, config: SystemConfig,
                  use_an: bool, settings) -> float | None:
    """Largest margin s with h1(Qc + (1 - a alpha) Qa)h1^H + 1 - a alpha >= s; None if infeasible."""
    H = config.channels
    n = H.shape[1]
    h1 = H[0]
    prob = sdp.SdpProblem()
    Q0 = prob.hermitian("Q0", n)
    Qc = prob.hermitian("Qc", n)
    Qa = prob.hermitian("Qa", n) if use_an else None
    s = prob.scalar("s")
    shift = 1.0 - level * alpha

    def q(h, X):
        return sdp.quad(h, X) if X is not None else 0.0

    # s is a nonnegative block, so use s - 1 as the (free-signed) margin
    prob.maximize(s)
    prob.add_ineq(q(h1, Qc) + shift * q(h1, Qa) + shift + 1.0 - s)
    for h in H[1:]:
        prob.add_ineq((alpha - 1.0) * (1.0 + q(h, Qa)) - q(h, Qc))
    for h in H:
        prob.add_ineq(q(h, Q0) - tau_prime * (1.0 + q(h, Qa) + q(h, Qc)))
    total = config.power - sdp.trace(Q0) - sdp.trace(Qc)
    if use_an:
        total = total - sdp.trace(Qa)
    prob.add_ineq(total)
    sol = sdp.solve(prob, settings)
    if sol.usable:
        return sol.objective - 1.0
    return None


def quasiconvex_oracle(alpha: float, tau_prime: float, config: SystemConfig, use_an: bool = True,
                       rel_tol: float = 1e-7, settings: sdp.SolverSettings | None = None) -> float | None:
    """eta(alpha) by bisection on the superlevel sets of the original ratio.

    Works directly in the covariance variables; each level test is one SDP.
    Returns None when the constraints are infeasible.
    """
    h1 = config.channels[0]
    lo = 1.0 / alpha
    hi = (1.0 + config.power * float(np.vdot(h1, h1).real)) / alpha
    m = _level_margin(alpha, lo, tau_prime, config, use_an, settings)
    if m is None or m < FEASIBLE_MARGIN:
        return None
    while hi - lo > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        m = _level_margin(alpha, mid, tau_prime, config, use_an, settings)
        if m is not None and m >= FEASIBLE_MARGIN:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------- refinement

def power_min_refine(alpha: float, eta: float, tau_prime: float, config: SystemConfig,
                     use_an: bool = True, settings=None) -> CovarianceTriple | None:
    """Least-power covariances achieving ratio level eta at this alpha.

    Every solution of this problem is also optimal for the inner problem, has a
    rank-one confidential covariance, and meets the multicast floor with
    equality for at least one receiver.
    """
    H = config.channels
    n = H.shape[1]
    h1 = H[0]
    level = eta * (1.0 - REFINE_BACKOFF)
    shift = 1.0 - level * alpha
    prob = sdp.SdpProblem()
    Q0 = prob.hermitian("Q0", n)
    Qc = prob.hermitian("Qc", n)
    Qa = prob.hermitian("Qa", n) if use_an else None

    def q(h, X):
        return sdp.quad(h, X) if X is not None else 0.0

    total = sdp.trace(Q0) + sdp.trace(Qc)
    if use_an:
        total = total + sdp.trace(Qa)
    prob.minimize(total)
    prob.add_ineq(q(h1, Qc) + shift * q(h1, Qa) + shift)
    for h in H[1:]:
        prob.add_ineq((alpha - 1.0) * (1.0 + q(h, Qa)) - q(h, Qc))
    for h in H:
        prob.add_ineq(q(h, Q0) - tau_prime * (1.0 + q(h, Qa) + q(h, Qc)))
    prob.add_ineq(config.power - total)
    sol = sdp.solve(prob, settings)
    if not sol.usable:
        return None
    v = sol.values
    Qav = v["Qa"] if use_an else np.zeros((n, n), dtype=complex)
    return CovarianceTriple(v["Q0"], v["Qc"], Qav)


# ---------------------------------------------------------------- boundary point

def finish_point(tau_ms: float, secrecy: float, triple: CovarianceTriple, channels: ChannelSet,
                 calls: int, search_value: float, achieved: float | None = None) -> RatePoint:
    triple = triple.clipped()
    if achieved is None:
        achieved = rates(triple, channels).multicast_rate
    return RatePoint(tau_ms, secrecy, triple, achieved, achieved - tau_ms,
                     rank_diagnostics(triple), calls, search_value)


def qoms_srm(tau_ms: float, config: SystemConfig, use_an: bool = True,
             settings: sdp.SolverSettings | None = None, refine: bool = True) -> RatePoint:
    """Best secrecy rate subject to the multicast floor tau_ms."""
    tau_prime = 2.0 ** tau_ms - 1.0

    def evaluate(alpha: float):
        sol = inner_sdp(alpha, tau_prime, config, use_an, settings)
        if not sol.feasible:
            return None if sol.status == sdp.INFEASIBLE else FAILED
        return Evaluation(sol.eta, sol.eta, sol)

    res = pruned_grid_search(alpha_grid(config), evaluate, prune_tolerance(config.search_epsilon),
                             SEARCH_SLACK)
    if res is None:
        raise QomsInfeasible("QoMS target infeasible")
    calls = res.evaluations
    best: InnerSolution = res.payload
    triple = best.triple
    if refine:
        refined = power_min_refine(best.alpha, best.eta, tau_prime, config, use_an, settings)
        calls += 1
        if refined is not None:
            triple = refined
    secrecy = max(0.0, float(np.log2(best.eta)))
    pt = finish_point(tau_ms, secrecy, triple, config.channel_set, calls, best.alpha)
    pt.extra.update(grid_size=res.grid_size, search_failures=res.failures)
    return pt


def endpoint_point(tau_max: float, Q0: np.ndarray, channels: ChannelSet) -> RatePoint:
    """The multicast-capacity corner: all power to the multicast message."""
    n = Q0.shape[0]
    z = np.zeros((n, n), dtype=complex)
    return finish_point(tau_max, 0.0, CovarianceTriple(Q0, z, z.copy()), channels, 0, np.nan,
                        achieved=tau_max)


def tau_grid(tau_max: float, n: int) -> np.ndarray:
    if n == 1:
        return np.array([0.0])
    g = np.linspace(0.0, tau_max, n)
    g[-1] = tau_max
    return g


def failed_point(tau_ms: float, status: str) -> RatePoint:
    return RatePoint(tau_ms, np.nan, None, status=status)


def region_sweep(config: SystemConfig, use_an: bool = True, scheme: str | None = None,
                 settings: sdp.SolverSettings | None = None) -> RegionResult:
    """Boundary of the region on a uniform tau_ms grid over [0, tau_max]."""
    tau_max, Q0 = multicast_capacity(config, settings)
    points = []
    total = 1
    for tau in tau_grid(tau_max, config.grid_points):
        if tau >= tau_max:
            pt = endpoint_point(tau_max, Q0, config.channel_set)
        else:
            try:
                pt = qoms_srm(float(tau), config, use_an, settings)
            except QomsInfeasible:
                pt = failed_point(float(tau), "infeasible")
            except (SolverFailure, np.linalg.LinAlgError) as exc:
                pt = failed_point(float(tau), f"error: {exc}")
        total += pt.solver_calls
        points.append(pt)
    name = scheme or ("optimal" if use_an else "no-an")
    budget = {"per_point_bound": grid_budget(config) + 1.0,
              "per_point_max": max((p.solver_calls for p in points), default=0)}
    return RegionResult(name, points, tau_max, total, budget)


def with_power(config: SystemConfig, power: float) -> SystemConfig:
    return replace(config, power=power)
