"""Worst-case robust secrecy-rate region under norm-bounded CSI errors.

Each receiver's channel is h_k = h~_k + e_k with ||e_k|| <= eps_k.  Every
"for all e_k" quadratic constraint is turned into an LMI with one nonnegative
multiplier (S-procedure).  The inner problem over the covariances is
quasiconcave and solved by bisection on its superlevel sets; the outer
variable beta is searched on a uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .model import ChannelSet, CovarianceTriple, SystemConfig
from .perfect_region import (
    FEASIBLE_MARGIN,
    REFINE_BACKOFF,
    QomsInfeasible,
    RatePoint,
    RegionResult,
    SolverFailure,
    endpoint_point,
    failed_point,
    finish_point,
    prune_tolerance,
    tau_grid,
)
from .search import FAILED, Evaluation, pruned_grid_search, uniform_grid

DIRECT_BACKOFF = 1e-7
PROBE_FRACTION = 0.99
DINKELBACH_STALL = 0.1


@dataclass(frozen=True)
class RobustSettings:
    eps: float = 0.01
    eps_b: float | None = None

    def __post_init__(self):
        if self.eps_b is None:
            object.__setattr__(self, "eps_b", min(1e-4, (1.0 - 2.0 ** (-self.eps)) / 10.0))
        if not 0 < self.eps_b < 1.0 - 2.0 ** (-self.eps):
            raise sdp.ValidationError("eps_b must lie in (0, 1 - 2^-eps)")

    @classmethod
    def from_config(cls, config: SystemConfig) -> RobustSettings:
        return cls(config.search_epsilon, config.bisection_tol)


@dataclass
class RobustInnerSolution:
    status: str
    beta: float
    eta: float = np.nan            # highest level certified feasible
    upper: float = np.nan          # lowest level found infeasible (or the interval top)
    level: float = np.nan
    triple: CovarianceTriple | None = None
    t_slacks: np.ndarray | None = None
    delta_slacks: np.ndarray | None = None
    rho: float = np.nan
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == sdp.OPTIMAL


def lifted(h: np.ndarray) -> np.ndarray:
    """The (n+1) x n matrix [I; h] so that lifted(h) X lifted(h)^H borders X with h."""
    n = h.shape[0]
    return np.vstack([np.eye(n, dtype=complex), np.asarray(h, dtype=complex)[None, :]])


def robust_quadratic(prob: sdp.SdpProblem, h: np.ndarray, eps: float, M, c, slack=None) -> None:
    """Require (h + e) M (h + e)^H + c >= 0 for every ||e|| <= eps.

    ``M`` is a matrix expression, ``c`` a scalar expression in scalar blocks.
    With eps = 0 the exact scalar constraint is used (the bordered LMI would
    need an unbounded multiplier).
    """
    n = h.shape[0]
    if eps == 0 or slack is None:
        prob.add_ineq(sdp.quad(h, M) + c)
        return
    corner = np.zeros((n + 1, n + 1))
    corner[n, n] = 1.0
    ball = np.diag(np.r_[np.ones(n), -eps ** 2]).astype(complex)
    prob.add_lmi(sdp.congruence(lifted(h), M) + sdp.scalar_matrix(slack, ball)
                 + sdp.scalar_matrix(c, corner))


def _combo(n: int, *pairs) -> sdp.HermAffine:
    """Sum of coef * X over (coef, X) pairs, skipping absent blocks."""
    out = sdp.HermAffine(np.zeros((n, n), dtype=complex))
    for coef, X in pairs:
        if X is not None and coef != 0:
            out = out + X * float(coef)
    return out


@dataclass
class RobustBlocks:
    Q0: object
    Qc: object
    Qa: object
    t: list
    delta: list
    rho: object = None
    extra: dict = field(default_factory=dict)


def declare_blocks(prob: sdp.SdpProblem, channels: ChannelSet, use_an: bool,
                   multicast: bool = True) -> RobustBlocks:
    """Variables of the robust problem; ``multicast=False`` drops Q0 (zero QoMS target)."""
    n, K = channels.n_tx, channels.n_rx
    Q0 = prob.hermitian("Q0", n) if multicast else None
    Qc = prob.hermitian("Qc", n)
    Qa = prob.hermitian("Qa", n) if use_an else None
    t = [prob.scalar(f"t{k}") if channels.radii[k] > 0 else None for k in range(1, K)]
    d = [prob.scalar(f"d{k}") if multicast and channels.radii[k] > 0 else None for k in range(K)]
    rho = prob.scalar("rho") if channels.radii[0] > 0 else None
    return RobustBlocks(Q0, Qc, Qa, t, d, rho)


def build_lmis(beta: float, level: float | None, tau_prime: float, blocks: RobustBlocks,
               channels: ChannelSet, prob: sdp.SdpProblem, margin=None,
               margin_weight: np.ndarray | None = None) -> None:
    """Add the eavesdropper (T_k), multicast (S_k) and, when ``level`` is given, the
    legitimate-receiver (U) constraints for fixed beta.

    ``margin`` (a scalar expression) is subtracted from the corner of U; the
    level search maximizes it to get a decisive feasibility test.  With
    ``margin_weight`` = W the margin is instead scaled by the denominator
    beta (1 + (h + e) W (h + e)^H) of a reference noise covariance W.
    """
    H, radii = channels.channels, channels.radii
    n = channels.n_tx
    b = blocks
    for k in range(1, channels.n_rx):
        M = _combo(n, (beta - 1.0, b.Qa), (-1.0, b.Qc))
        robust_quadratic(prob, H[k], radii[k], M, sdp.Affine(const=beta - 1.0), b.t[k - 1])
    for k in range(channels.n_rx if b.Q0 is not None else 0):
        M = _combo(n, (1.0, b.Q0), (-tau_prime, b.Qa), (-tau_prime, b.Qc))
        robust_quadratic(prob, H[k], radii[k], M, sdp.Affine(const=-tau_prime), b.delta[k])
    if level is not None:
        shift = 1.0 - level * beta
        M = _combo(n, (1.0, b.Qc), (shift, b.Qa))
        c = sdp.Affine(const=shift)
        if margin is not None and margin_weight is not None:
            M = M - sdp.scalar_matrix(margin * beta, np.asarray(margin_weight, dtype=complex))
            c = c - margin * beta
        elif margin is not None:
            c = c - margin
        robust_quadratic(prob, H[0], radii[0], M, c, b.rho)


def _power_expr(blocks: RobustBlocks) -> sdp.Affine:
    total = sdp.trace(blocks.Qc)
    if blocks.Q0 is not None:
        total = total + sdp.trace(blocks.Q0)
    if blocks.Qa is not None:
        total = total + sdp.trace(blocks.Qa)
    return total


def _triple(values: dict, n: int) -> CovarianceTriple:
    z = np.zeros((n, n), dtype=complex)
    return CovarianceTriple(values.get("Q0", z), values["Qc"], values.get("Qa", z))


def beta_max(config: SystemConfig) -> float:
    h1 = config.channels[0]
    return 1.0 + config.power * (float(np.linalg.norm(h1)) - float(config.radii[0])) ** 2


def beta_step(eps: float, eps_b: float) -> float:
    return (2.0 ** eps * (1.0 - eps_b) - 1.0) / (1.0 + 2.0 ** eps * eps_b)


def robust_budget(config: SystemConfig, settings: RobustSettings) -> float:
    """Search count bound: sum over the beta grid of the bisection lengths."""
    span = beta_max(config) - 1.0
    if span <= 0:
        return 1.0
    step = beta_step(settings.eps, settings.eps_b)
    m_u = int(np.ceil(span / step))
    i = np.arange(1, m_u + 1)
    terms = np.log2(span / ((1.0 + step * i) * settings.eps_b))
    return float(np.sum(np.maximum(terms, 0.0)))


def bisection_bound(beta: float, config: SystemConfig, settings: RobustSettings) -> float:
    """Iterations needed to shrink [1/beta, beta_max/beta] below eps_b."""
    span = (beta_max(config) - 1.0) / beta
    return float(np.log2(max(span / settings.eps_b, 1.0))) + 1.0


# ---------------------------------------------------------------- multicast

def wc_multicast_capacity(config: SystemConfig, settings: sdp.SolverSettings | None = None):
    """Largest multicast rate guaranteed over every receiver's uncertainty ball."""
    ch = config.channel_set
    n = ch.n_tx
    if config.power == 0:
        return 0.0, np.zeros((n, n), dtype=complex)
    prob = sdp.SdpProblem()
    Q0 = prob.hermitian("Q0", n)
    t = prob.scalar("t")
    prob.maximize(t)
    for k in range(ch.n_rx):
        d = prob.scalar(f"d{k}") if ch.radii[k] > 0 else None
        robust_quadratic(prob, ch.channels[k], ch.radii[k], Q0, -1.0 * t, d)
    prob.add_ineq(config.power - sdp.trace(Q0))
    sol = sdp.solve(prob, settings)
    if not sol.usable:
        raise SolverFailure(f"worst-case multicast capacity solve ended with status {sol.status}")
    return float(np.log2(1.0 + max(sol.values["t"], 0.0))), sol.values["Q0"]


def certified_multicast_rate(triple: CovarianceTriple, channels: ChannelSet,
                             settings: sdp.SolverSettings | None = None) -> float:
    """Exact worst-case multicast rate of a fixed triple (lossless S-procedure)."""
    n = channels.n_tx
    prob = sdp.SdpProblem()
    t = prob.scalar("t")
    prob.maximize(t)
    for k in range(channels.n_rx):
        h, eps = channels.channels[k], channels.radii[k]
        interf = triple.Qa + triple.Qc
        if eps == 0:
            prob.add_ineq(float(np.real(h @ triple.Q0 @ h.conj()))
                          - t * (1.0 + float(np.real(h @ interf @ h.conj()))))
            continue
        d = prob.scalar(f"d{k}")
        L = lifted(h)
        corner = np.zeros((n + 1, n + 1))
        corner[n, n] = 1.0
        ball = np.diag(np.r_[np.ones(n), -eps ** 2]).astype(complex)
        expr = (sdp.HermAffine(L @ triple.Q0 @ L.conj().T)
                - sdp.scalar_matrix(t, L @ interf @ L.conj().T + corner)
                + sdp.scalar_matrix(d, ball))
        prob.add_lmi(expr)
    sol = sdp.solve(prob, settings)
    if not sol.usable:
        return np.nan
    return float(np.log2(1.0 + max(sol.values["t"], 0.0)))


# ---------------------------------------------------------------- inner problem

def _level_test(beta, level, tau_prime, config, use_an, settings, weight=None):
    """Is this level feasible?

    Returns (ok, values, margin_upper) with ok True, False or None (unknown).
    margin_upper bounds the best achievable margin, inf when not certified.
    ``weight`` normalizes the margin as in :func:`build_lmis`.
    """
    prob = sdp.SdpProblem()
    blocks = declare_blocks(prob, config.channel_set, use_an, tau_prime > 0)
    s = prob.scalar("s")
    prob.maximize(s)
    # s >= 0 is a cone block; 1 - s is the signed margin
    build_lmis(beta, level, tau_prime, blocks, config.channel_set, prob, margin=s - 1.0,
               margin_weight=weight)
    prob.add_ineq(config.power - _power_expr(blocks))
    sol = sdp.solve(prob, settings)
    upper = sol.objective - 1.0 + abs(sol.duality_gap) if sol.usable else np.inf
    # any feasible point with a nonnegative margin settles the test; a negative
    # margin only counts as infeasible when it is the certified optimum
    if sol.primal_feasible and sol.objective - 1.0 >= FEASIBLE_MARGIN:
        return True, sol.values, upper
    if sol.usable or sol.status == sdp.INFEASIBLE:
        return False, None, upper
    return None, None, upper


def _pack(status, beta, lo, hi, values, config, iterations) -> RobustInnerSolution:
    if values is None:
        return RobustInnerSolution(status, beta, iterations=iterations)
    ch = config.channel_set
    t = np.array([values.get(f"t{k}", 0.0) for k in range(1, ch.n_rx)])
    d = np.array([values.get(f"d{k}", 0.0) for k in range(ch.n_rx)])
    return RobustInnerSolution(status, beta, lo, hi, lo, _triple(values, ch.n_tx), t, d,
                               values.get("rho", 0.0), iterations)


def _triple_level(beta: float, triple: CovarianceTriple, channels: ChannelSet,
                  solver=None) -> float:
    """Highest level at which a fixed triple satisfies the legitimate-receiver constraint U."""
    h, eps = channels.channels[0], channels.radii[0]
    Qc, Qa = triple.Qc, triple.Qa
    if eps == 0:
        num = 1.0 + float(np.real(h @ (Qc + Qa) @ h.conj()))
        return num / (beta * (1.0 + float(np.real(h @ Qa @ h.conj()))))
    n = h.shape[0]
    L = lifted(h)
    corner = np.zeros((n + 1, n + 1))
    corner[n, n] = 1.0
    ball = np.diag(np.r_[np.ones(n), -eps ** 2]).astype(complex)
    prob = sdp.SdpProblem()
    a = prob.scalar("level")
    r = prob.scalar("r")
    prob.maximize(a)
    prob.add_lmi(sdp.HermAffine(L @ (Qc + Qa) @ L.conj().T + corner)
                 - sdp.scalar_matrix(a, beta * (L @ Qa @ L.conj().T + corner))
                 + sdp.scalar_matrix(r, ball))
    sol = sdp.solve(prob, solver)
    if not sol.usable:
        return -np.inf
    return float(sol.values["level"]) * (1.0 - DIRECT_BACKOFF)


def _direct_inner(beta, tau_prime, config, solver) -> RobustInnerSolution:
    """Without artificial noise the level enters U affinely, so one SDP maximizes it."""
    prob = sdp.SdpProblem()
    blocks = declare_blocks(prob, config.channel_set, False, tau_prime > 0)
    a = prob.scalar("level")
    prob.maximize(a)
    build_lmis(beta, 0.0, tau_prime, blocks, config.channel_set, prob, margin=beta * a)
    prob.add_ineq(config.power - _power_expr(blocks))
    sol = sdp.solve(prob, solver)
    if not sol.usable:
        status = sdp.INFEASIBLE if sol.status == sdp.INFEASIBLE else sdp.NUMERICAL_FAILURE
        return RobustInnerSolution(status, beta, iterations=1)
    top = float(sol.values["level"])
    eta = top * (1.0 - DIRECT_BACKOFF)
    if eta < 1.0 / beta * (1.0 - DIRECT_BACKOFF):
        return RobustInnerSolution(sdp.INFEASIBLE, beta, iterations=1)
    upper = top * (1.0 + DIRECT_BACKOFF) + abs(sol.duality_gap)
    return _pack(sdp.OPTIMAL, beta, eta, upper, sol.values, config, 1)


def robust_inner(beta: float, tau_prime: float, config: SystemConfig,
                 settings: RobustSettings | None = None, use_an: bool = True,
                 bounds: tuple[float, float] | None = None,
                 solver: sdp.SolverSettings | None = None) -> RobustInnerSolution:
    """Bisection on the level over [1/beta, beta_max/beta] (optionally narrowed by ``bounds``).

    ``bounds`` = (lo, hi) must satisfy: lo certified feasible, hi known to be
    an upper bound on the optimum.
    """
    settings = settings or RobustSettings.from_config(config)
    if not use_an:
        return _direct_inner(beta, tau_prime, config, solver)
    lo, hi = 1.0 / beta, beta_max(config) / beta
    iterations = 0
    if bounds is not None:
        lo, hi = max(lo, bounds[0]), min(hi, bounds[1])
    ok, vals, _ = _level_test(beta, lo, tau_prime, config, use_an, solver)
    iterations += 1
    if not ok:
        if bounds is None or lo <= 1.0 / beta:
            status = sdp.INFEASIBLE if ok is False else sdp.NUMERICAL_FAILURE
            return RobustInnerSolution(status, beta, iterations=iterations)
        # the hinted lower level failed numerically; fall back to the full interval
        return robust_inner(beta, tau_prime, config, settings, use_an, None, solver)
    best_vals = vals

    def jump(level, vals):
        # the test's own triple certifies the level N/D of that triple (a Dinkelbach step)
        top = _triple_level(beta, _triple(vals, config.channel_set.n_tx), config.channel_set, solver)
        return max(level, min(top, hi))

    # Dinkelbach phase (denominator-normalized, which converges superlinearly for
    # max-min ratios): re-test at the certified level with the margin scaled by
    # the incumbent's denominator.  With weight W the margin s bounds the
    # optimum by lo + s (1 + (|h1| + eps)^2 lambda_max(W)), since the
    # denominator is at least beta over the ball.
    h_top = (float(np.linalg.norm(config.channels[0])) + float(config.channel_set.radii[0])) ** 2
    while hi - lo > settings.eps_b:
        W = _triple(best_vals, config.channel_set.n_tx).clipped().Qa
        ok, vals, upper = _level_test(beta, lo, tau_prime, config, use_an, solver, W)
        iterations += 1
        if not ok:
            break
        best_vals = vals
        lam = float(np.linalg.eigvalsh(W)[-1]) if W.any() else 0.0
        hi = min(hi, lo + max(upper, 0.0) * (1.0 + h_top * lam))
        new = jump(lo, vals)
        iterations += 1
        gain, lo = new - lo, new
        if gain <= DINKELBACH_STALL * settings.eps_b:
            break
    # closing phase: probe just above the incumbent, else plain bisection
    while hi - lo > settings.eps_b:
        mid = min(lo + PROBE_FRACTION * settings.eps_b, 0.5 * (lo + hi))
        ok, vals, _ = _level_test(beta, mid, tau_prime, config, use_an, solver)
        iterations += 1
        # an unknown outcome is treated as infeasible: that can only lower the certified value
        if ok:
            lo, best_vals = jump(mid, vals), vals
            iterations += 1
        else:
            hi = mid
    return _pack(sdp.OPTIMAL, beta, lo, max(hi, lo), best_vals, config, iterations)


def robust_power_min(beta: float, level: float, tau_prime: float, config: SystemConfig,
                     use_an: bool = True, solver=None) -> CovarianceTriple | None:
    """Least total power meeting all robust constraints at the given level."""
    prob = sdp.SdpProblem()
    blocks = declare_blocks(prob, config.channel_set, use_an, tau_prime > 0)
    total = _power_expr(blocks)
    prob.minimize(total)
    build_lmis(beta, level * (1.0 - REFINE_BACKOFF), tau_prime, blocks, config.channel_set, prob)
    prob.add_ineq(config.power - total)
    sol = sdp.solve(prob, solver)
    if not sol.usable:
        return None
    return _triple(sol.values, config.channel_set.n_tx)


def robust_qoms_srm(tau_ms: float, config: SystemConfig, settings: RobustSettings | None = None,
                    use_an: bool = True, solver: sdp.SolverSettings | None = None,
                    refine: bool = True) -> RatePoint:
    """Best certified worst-case secrecy rate subject to the worst-case multicast floor."""
    settings = settings or RobustSettings.from_config(config)
    tau_prime = 2.0 ** tau_ms - 1.0
    known: dict[float, tuple[float, float]] = {}   # beta -> (certified eta, eta upper bound)
    counter = {"solves": 0, "max_bisection": 0}

    def evaluate(beta: float):
        # beta * eta(beta) is nondecreasing, which brackets eta from evaluated neighbours
        lo, hi = 0.0, np.inf
        for b, (l, u) in known.items():
            if b < beta:
                lo = max(lo, b * l / beta)
            elif b > beta:
                hi = min(hi, b * u / beta)
        bounds = (lo, hi) if lo > 0 or np.isfinite(hi) else None
        sol = robust_inner(beta, tau_prime, config, settings, use_an, bounds, solver)
        counter["solves"] += sol.iterations
        counter["max_bisection"] = max(counter["max_bisection"], sol.iterations)
        if not sol.feasible:
            return None if sol.status == sdp.INFEASIBLE else FAILED
        known[beta] = (sol.eta, sol.upper)
        return Evaluation(sol.eta, sol.upper, sol)

    grid = uniform_grid(1.0, beta_max(config), beta_step(settings.eps, settings.eps_b))
    res = pruned_grid_search(grid, evaluate, prune_tolerance(settings.eps))
    if res is None:
        raise QomsInfeasible("QoMS target infeasible")
    best: RobustInnerSolution = res.payload
    triple = best.triple
    calls = counter["solves"]
    if refine:
        refined = robust_power_min(best.beta, best.eta, tau_prime, config, use_an, solver)
        calls += 1
        if refined is not None:
            triple = refined
    achieved = certified_multicast_rate(triple.clipped(), config.channel_set, solver)
    calls += 1
    secrecy = max(0.0, float(np.log2(best.eta)))
    pt = finish_point(tau_ms, secrecy, triple, config.channel_set, calls, best.beta, achieved)
    pt.extra.update(grid_size=res.grid_size, beta_evaluations=res.evaluations,
                    search_failures=res.failures,
                    max_bisection=counter["max_bisection"])
    return pt


def robust_region_sweep(config: SystemConfig, settings: RobustSettings | None = None,
                        use_an: bool = True, scheme: str | None = None,
                        solver: sdp.SolverSettings | None = None) -> RegionResult:
    settings = settings or RobustSettings.from_config(config)
    tau_max, Q0 = wc_multicast_capacity(config, solver)
    points, total = [], 1
    for tau in tau_grid(tau_max, config.grid_points):
        if tau >= tau_max:
            pt = endpoint_point(tau_max, Q0, config.channel_set)
        else:
            try:
                pt = robust_qoms_srm(float(tau), config, settings, use_an, solver)
            except QomsInfeasible:
                pt = failed_point(float(tau), "infeasible")
            except (SolverFailure, np.linalg.LinAlgError) as exc:
                pt = failed_point(float(tau), f"error: {exc}")
        total += pt.solver_calls
        points.append(pt)
    name = scheme or ("robust" if use_an else "no-an-robust")
    budget = {"per_point_bound": robust_budget(config, settings) + 1.0,
              "per_point_max": max((p.solver_calls for p in points), default=0)}
    return RegionResult(name, points, tau_max, total, budget)
