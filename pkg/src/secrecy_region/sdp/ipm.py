"""Dense primal-dual interior-point method on the homogeneous self-dual embedding.

Solves the real conic pair::

    minimize   c'x                     maximize  -h'z - b'y
    s.t.       G x + s = h,  A x = b    s.t.      G'z + A'y + c = 0
               s in K                             z in K

with K a product of a nonnegative orthant and real PSD cones. Nesterov-Todd
scaling, Mehrotra predictor-corrector. Infeasibility of either side is
read off the embedding (tau -> 0 with a certificate).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"
_REG = 1e-11
_REFINE_STEPS = 3
_TAU_MIN = 1e-100
_REDUCED_TOL = 1e-5       # accepted (flagged inaccurate) when the strict tolerances stall
_STALL_ITERS = 8


@dataclass(frozen=True)
class SolverSettings:
    max_iters: int = 200
    gap_tol: float = 1e-7
    feas_tol: float = 1e-7
    psd_tol: float = 1e-9
    step: float = 0.99


@dataclass
class ConicResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    s: list
    z: list
    pcost: float
    dcost: float
    gap: float
    pres: float
    dres: float
    iterations: int
    primal_feasible: bool = False
    inaccurate: bool = False


class _Cone:
    """Orthant of size ``ml`` followed by groups of ``B`` PSD blocks of order ``n``."""

    def __init__(self, ml: int, sizes: list[tuple[int, int]]):
        self.ml = ml
        self.sizes = sizes
        self.degree = ml + sum(n * B for n, B in sizes)

    def identity(self) -> list:
        return [np.ones(self.ml)] + [np.broadcast_to(np.eye(n), (B, n, n)).copy() for n, B in self.sizes]

    @staticmethod
    def dot(u: list, v: list) -> float:
        return float(sum(np.vdot(a, b) for a, b in zip(u, v)))

    @staticmethod
    def norm(u: list) -> float:
        return float(np.sqrt(sum(np.vdot(a, a) for a in u)))

    @staticmethod
    def add(u: list, v: list, a: float = 1.0) -> list:
        return [p + a * q for p, q in zip(u, v)]


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + np.swapaxes(M, -1, -2))


class _Scaling:
    """Nesterov-Todd scaling point; ``lam`` holds the scaled iterate."""

    def __init__(self, cone: _Cone):
        self.cone = cone
        self.w = np.ones(cone.ml)
        self.lam_l = np.ones(cone.ml)
        self.R = [np.broadcast_to(np.eye(n), (B, n, n)).copy() for n, B in cone.sizes]
        self.Rinv = [r.copy() for r in self.R]
        self.lam_s = [np.ones((B, n)) for n, B in cone.sizes]

    # scaled-space operations
    def lam(self) -> list:
        return [self.lam_l] + [_diag(l) for l in self.lam_s]

    def lam_sq(self) -> list:
        return [self.lam_l ** 2] + [_diag(l ** 2) for l in self.lam_s]

    def lam_div(self, r: list) -> list:
        out = [r[0] / self.lam_l]
        for R_, l in zip(r[1:], self.lam_s):
            out.append(2.0 * R_ / (l[:, :, None] + l[:, None, :]))
        return out

    def winv_t(self, v: list) -> list:
        out = [v[0] / self.w]
        for V, Ri in zip(v[1:], self.Rinv):
            out.append(_sym(Ri @ V @ np.swapaxes(Ri, -1, -2)))
        return out

    def w_t(self, v: list) -> list:
        out = [v[0] * self.w]
        for V, R in zip(v[1:], self.R):
            out.append(_sym(R @ V @ np.swapaxes(R, -1, -2)))
        return out

    def w_inv(self, v: list) -> list:
        out = [v[0] / self.w]
        for V, Ri in zip(v[1:], self.Rinv):
            out.append(_sym(np.swapaxes(Ri, -1, -2) @ V @ Ri))
        return out

    def scale_G(self, Gl: np.ndarray, Gs: list) -> list:
        out = [Gl / self.w[:, None]]
        for G, Ri in zip(Gs, self.Rinv):
            out.append(Ri[:, None] @ G @ np.swapaxes(Ri, -1, -2)[:, None])
        return out

    def max_step(self, d: list) -> float:
        """Largest a with lam + a d in the cone (inf if unbounded)."""
        amax = np.inf
        dl = d[0]
        neg = dl < 0
        if np.any(neg):
            amax = min(amax, float(np.min(-self.lam_l[neg] / dl[neg])))
        for D, l in zip(d[1:], self.lam_s):
            si = 1.0 / np.sqrt(l)
            M = _sym(D * si[:, :, None] * si[:, None, :])
            mins = np.linalg.eigvalsh(M)[:, 0]
            mn = float(np.min(mins))
            if mn < 0:
                amax = min(amax, -1.0 / mn)
        return amax

    def update(self, ds: list, dz: list, a: float) -> None:
        sl = self.lam_l + a * ds[0]
        zl = self.lam_l + a * dz[0]
        self.w = self.w * np.sqrt(sl / zl)
        self.lam_l = np.sqrt(sl * zl)
        for i, l in enumerate(self.lam_s):
            S = _sym(_diag(l) + a * ds[i + 1])
            Z = _sym(_diag(l) + a * dz[i + 1])
            L1 = np.linalg.cholesky(S)
            L2 = np.linalg.cholesky(Z)
            U, lam, Vt = np.linalg.svd(np.swapaxes(L2, -1, -2) @ L1)
            V = np.swapaxes(Vt, -1, -2)
            Rt = L1 @ V / np.sqrt(lam)[:, None, :]
            L1inv = np.linalg.inv(L1)
            Rt_inv = np.sqrt(lam)[:, :, None] * (Vt @ L1inv)
            self.R[i] = self.R[i] @ Rt
            self.Rinv[i] = Rt_inv @ self.Rinv[i]
            self.lam_s[i] = lam


def _diag(l: np.ndarray) -> np.ndarray:
    n = l.shape[-1]
    out = np.zeros(l.shape + (n,))
    idx = np.arange(n)
    out[..., idx, idx] = l
    return out


def _sprod(u: list, v: list) -> list:
    out = [u[0] * v[0]]
    for U, V in zip(u[1:], v[1:]):
        out.append(_sym(U @ V))
    return out


def solve_conic(c, A, b, Gl, hl, Gs, hs, settings: SolverSettings = SolverSettings()) -> ConicResult:
    """Solve the conic pair; ``Gs``/``hs`` are lists of (B, N, n, n) / (B, n, n) arrays."""
    N = c.shape[0]
    p = A.shape[0]
    cone = _Cone(Gl.shape[0], [(G.shape[2], G.shape[0]) for G in Gs])

    def G_mul(x: np.ndarray) -> list:
        return [Gl @ x] + [np.einsum("bjmn,j->bmn", G, x) for G in Gs]

    def GT_mul(z: list) -> np.ndarray:
        out = Gl.T @ z[0]
        for G, Z in zip(Gs, z[1:]):
            out = out + np.einsum("bjmn,bmn->j", G, Z)
        return out

    h = [hl] + list(hs)
    resx0 = max(1.0, float(np.linalg.norm(c)))
    resy0 = max(1.0, float(np.linalg.norm(b)))
    resz0 = max(1.0, _Cone.norm(h))

    x = np.zeros(N)
    y = np.zeros(p)
    tau, kappa = 1.0, 1.0
    W = _Scaling(cone)
    m = cone.degree

    status = NUMERICAL_FAILURE
    pcost = dcost = gap = pres = dres = np.nan
    it = 0
    s = z = cone.identity()
    best = None           # (measure, iteration, snapshot) of the most converged iterate
    for it in range(settings.max_iters + 1):
        # tau underflow means neither a solution nor a clean certificate is coming
        if not (np.isfinite(tau) and tau > _TAU_MIN):
            break
        lam = W.lam()
        s = W.w_t(lam)
        z = W.w_inv(lam)

        hrx = A.T @ y + GT_mul(z)
        hry = A @ x
        Gx = G_mul(x)
        hrz = _Cone.add(Gx, s)
        cx, by, hz = float(c @ x), float(b @ y), _Cone.dot(h, z)
        r1 = hrx + tau * c
        r2 = hry - tau * b
        r3 = _Cone.add(hrz, h, -tau)
        r4 = cx + by + hz + kappa
        sz = _Cone.dot(s, z)
        mu = (sz + tau * kappa) / (m + 1)

        pcost, dcost = cx / tau, -(by + hz) / tau
        gap = sz / tau ** 2
        pres = max(np.linalg.norm(r2) / resy0, _Cone.norm(r3) / resz0) / tau
        dres = float(np.linalg.norm(r1)) / resx0 / tau
        rel_gap = gap / (1.0 + min(abs(pcost), abs(dcost)))
        if pres <= settings.feas_tol and dres <= settings.feas_tol and rel_gap <= settings.gap_tol:
            status = OPTIMAL
            break
        measure = max(pres, dres, rel_gap)
        if np.isfinite(measure) and (best is None or measure < best[0]):
            best = (measure, it, (x, y, s, z, tau, pcost, dcost, gap, pres, dres))
        elif best is not None and it - best[1] >= _STALL_ITERS and best[0] <= _REDUCED_TOL:
            break
        if by + hz < 0:
            pinf = float(np.linalg.norm(hrx)) / resx0 / -(by + hz)
            if pinf <= settings.feas_tol:
                status = INFEASIBLE
                break
        if cx < 0:
            dinf = max(float(np.linalg.norm(hry)) / resy0, _Cone.norm(hrz) / resz0) / -cx
            if dinf <= settings.feas_tol:
                status = UNBOUNDED
                break
        if it == settings.max_iters:
            break

        try:
            Gh = W.scale_G(Gl, Gs)
            H = Gh[0].T @ Gh[0]
            for Gb in Gh[1:]:
                flat = Gb.transpose(1, 0, 2, 3).reshape(N, -1)
                H += flat @ flat.T
            K = np.zeros((N + p, N + p))
            K[:N, :N] = H
            K[:N, N:] = A.T
            K[N:, :N] = A
            Kreg = K.copy()
            Kreg[:N, :N] += _REG * np.eye(N)
            Kreg[N:, N:] -= _REG * np.eye(p)
            with warnings.catch_warnings():
                # an exactly singular pivot means the scaling has degenerated
                warnings.simplefilter("error", sla.LinAlgWarning)
                lu = sla.lu_factor(Kreg, check_finite=False)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError, sla.LinAlgWarning):
            break

        def kkt(rx, ry, rz_scaled):
            # H dx + A'dy = rx + Gh' rz_scaled,  A dx = ry,  dz_scaled = Gh dx - rz_scaled
            rhs = np.concatenate([rx + _GhT(Gh, rz_scaled), ry])
            sol = sla.lu_solve(lu, rhs, check_finite=False)
            for _ in range(_REFINE_STEPS):
                sol = sol + sla.lu_solve(lu, rhs - K @ sol, check_finite=False)
            dx, dy = sol[:N], sol[N:]
            dzs = _Cone.add(_Gh_mul(Gh, dx), rz_scaled, -1.0)
            return dx, dy, dzs

        hs_scaled = W.winv_t(h)
        vx, vy, vz = kkt(-c, b, hs_scaled)
        # denominator of the dtau elimination
        den = float(c @ vx + b @ vy) + _Cone.dot(hs_scaled, vz) - kappa / tau

        def newton(eta: float, rc: list, rk: float):
            q1, q2 = -eta * r1, -eta * r2
            q3 = [-eta * v for v in r3]
            q4 = -eta * r4
            uc = W.lam_div(rc)
            rz_scaled = _Cone.add(W.winv_t(q3), uc, -1.0)
            ux, uy, uz = kkt(q1, q2, rz_scaled)
            num = q4 - rk / tau - (float(c @ ux + b @ uy) + _Cone.dot(hs_scaled, uz))
            dtau = num / den
            dx = ux + dtau * vx
            dy = uy + dtau * vy
            dzs = _Cone.add(uz, vz, dtau)
            dss = _Cone.add(uc, dzs, -1.0)
            dkappa = (rk - kappa * dtau) / tau
            return dx, dy, dss, dzs, dtau, dkappa

        def step_len(dss, dzs, dtau, dkappa):
            a = min(W.max_step(dss), W.max_step(dzs))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        lamsq = W.lam_sq()
        # predictor
        dx, dy, dss, dzs, dtau, dkappa = newton(1.0, [-v for v in lamsq], -tau * kappa)
        a_aff = min(1.0, step_len(dss, dzs, dtau, dkappa))
        sigma = (1.0 - a_aff) ** 3
        # corrector
        corr = _sprod(dss, dzs)
        e = cone.identity()
        rc = [-a - b_ + sigma * mu * e_ for a, b_, e_ in zip(lamsq, corr, e)]
        rk = -tau * kappa - dtau * dkappa + sigma * mu
        dx, dy, dss, dzs, dtau, dkappa = newton(1.0 - sigma, rc, rk)
        a = min(1.0, settings.step * step_len(dss, dzs, dtau, dkappa))
        if not np.isfinite(a) or a < 1e-12:
            break

        x = x + a * dx
        y = y + a * dy
        tau = tau + a * dtau
        kappa = kappa + a * dkappa
        try:
            W.update(dss, dzs, a)
        except np.linalg.LinAlgError:
            break

    if status == INFEASIBLE:
        scale = -1.0 / (b @ y + _Cone.dot(h, z))
        return ConicResult(status, x, y * scale, s, [v * scale for v in z], np.inf, np.inf,
                           np.nan, pres, dres, it)
    if status == UNBOUNDED:
        scale = -1.0 / float(c @ x)
        return ConicResult(status, x * scale, y, [v * scale for v in s], z, -np.inf, -np.inf,
                           np.nan, pres, dres, it)
    if status == NUMERICAL_FAILURE and best is not None and best[0] <= _REDUCED_TOL:
        bx, by_, bs, bz, bt, pc, dc, g, pr, dr = best[2]
        return ConicResult(NUMERICAL_FAILURE, bx / bt, by_ / bt, [v / bt for v in bs], [v / bt for v in bz],
                           pc, dc, g, pr, dr, it, primal_feasible=True, inaccurate=True)
    if not (np.isfinite(tau) and tau > _TAU_MIN):
        return ConicResult(NUMERICAL_FAILURE, x, y, s, z, np.nan, np.nan, np.nan, pres, dres, it)
    if status == NUMERICAL_FAILURE:
        # a stalled dual does not spoil the primal iterate: report it if it is feasible
        xr = x / tau
        sr = _Cone.add(h, G_mul(xr), -1.0)
        eq = float(np.linalg.norm(A @ xr - b)) / resy0
        viol = max([0.0, -float(np.min(sr[0], initial=0.0))]
                   + [-float(np.min(np.linalg.eigvalsh(S))) for S in sr[1:] if S.size])
        ok = eq <= settings.feas_tol and viol <= settings.feas_tol * resz0
        return ConicResult(status, xr, y / tau, sr, [v / tau for v in z], float(c @ xr), np.nan,
                           np.nan, pres, dres, it, primal_feasible=ok)
    return ConicResult(status, x / tau, y / tau, [v / tau for v in s], [v / tau for v in z],
                       pcost, dcost, gap, pres, dres, it, primal_feasible=status == OPTIMAL)


def _GhT(Gh: list, v: list) -> np.ndarray:
    out = Gh[0].T @ v[0]
    for G, V in zip(Gh[1:], v[1:]):
        out = out + np.einsum("bjmn,bmn->j", G, V)
    return out


def _Gh_mul(Gh: list, x: np.ndarray) -> list:
    return [Gh[0] @ x] + [np.einsum("bjmn,j->bmn", G, x) for G in Gh[1:]]


@dataclass
class SdpSolution:
    status: str
    values: dict
    objective: float
    duality_gap: float
    iterations: int
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    primal_feasible: bool = False     # values hold a feasible point even if not optimal
    inaccurate: bool = False          # optimal only to the reduced tolerance

    @property
    def usable(self) -> bool:
        """Optimal, or converged to the reduced tolerance before the strict one stalled."""
        return self.status == OPTIMAL or self.inaccurate


def solve(problem, settings: SolverSettings | None = None) -> SdpSolution:
    """Compile an :class:`SdpProblem` (or take a compiled one) and solve it."""
    from .embedding import unembed
    from .problem import CompiledProblem

    settings = settings or SolverSettings()
    cp = problem if isinstance(problem, CompiledProblem) else problem.compile()
    sizes = sorted(cp.psd_groups)
    Gs = [cp.psd_groups[n][0] for n in sizes]
    hs = [cp.psd_groups[n][1] for n in sizes]
    res = solve_conic(cp.c, cp.A, cp.b, cp.Gl, cp.hl, Gs, hs, settings)

    values = {}
    for name, (lo, hi) in cp.offsets.items():
        if name in cp.var_cones:
            n, idx = cp.var_cones[name]
            values[name] = unembed(res.s[1 + sizes.index(n)][idx])
        else:
            values[name] = float(res.x[lo])
    if res.status == OPTIMAL:
        obj = cp.sense * res.pcost + cp.c0
    elif res.status == INFEASIBLE:
        obj = -np.inf if cp.sense < 0 else np.inf
    elif res.status == UNBOUNDED:
        obj = np.inf if cp.sense < 0 else -np.inf
    elif res.primal_feasible:
        obj = cp.sense * res.pcost + cp.c0      # feasible point (accurate to a reduced tolerance if flagged)
    else:
        obj = np.nan
    return SdpSolution(res.status, values, float(obj), float(res.gap), res.iterations,
                       float(res.pres), float(res.dres), res.primal_feasible, res.inaccurate)
