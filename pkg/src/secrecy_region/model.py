"""Scenario definition and exact / sampled rate evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sdp.embedding import ValidationError, hermitianize

TRACE_SLACK = 1e-6


def db_to_linear(db: float) -> float:
    return float(10.0 ** (db / 10.0))


def default_eps_b(eps: float) -> float:
    return min(1e-4, (1.0 - 2.0 ** (-eps)) / 10.0)


@dataclass(frozen=True)
class ChannelSet:
    """Estimated channel rows (receiver 1 first) and their uncertainty radii."""

    channels: np.ndarray
    radii: np.ndarray | None = None
    require_eavesdropper: bool = field(default=True, compare=False)

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        if not np.all(np.isfinite(H)):
            raise ValidationError("channel entries must be finite")
        K = H.shape[0]
        if self.require_eavesdropper and K < 2:
            raise ValidationError("need at least two receivers (one unauthorized)")
        radii = np.zeros(K) if self.radii is None else np.asarray(self.radii, dtype=float).reshape(-1)
        if radii.shape != (K,):
            raise ValidationError(f"expected {K} radii, got {radii.shape[0]}")
        if np.any(radii < 0) or not np.all(np.isfinite(radii)):
            raise ValidationError("radii must be finite and nonnegative")
        norms = np.linalg.norm(H, axis=1)
        if np.any(radii >= norms):
            raise ValidationError("each radius must be smaller than its channel norm")
        H.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "channels", H)
        object.__setattr__(self, "radii", radii)

    @property
    def n_tx(self) -> int:
        return self.channels.shape[1]

    @property
    def n_rx(self) -> int:
        return self.channels.shape[0]

    @property
    def is_perfect(self) -> bool:
        return bool(np.all(self.radii == 0))

    def with_radii(self, radii) -> ChannelSet:
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (self.n_rx,))
        return ChannelSet(self.channels, radii, self.require_eavesdropper)


@dataclass(frozen=True)
class SystemConfig:
    channel_set: ChannelSet
    power: float
    search_epsilon: float = 0.01
    bisection_tol: float | None = None
    grid_points: int = 25

    def __post_init__(self):
        if not np.isfinite(self.power) or self.power < 0:
            raise ValidationError("power must be finite and nonnegative")
        if self.search_epsilon <= 0:
            raise ValidationError("search epsilon must be positive")
        if self.bisection_tol is None:
            object.__setattr__(self, "bisection_tol", default_eps_b(self.search_epsilon))
        if not 0 < self.bisection_tol < 1.0 - 2.0 ** (-self.search_epsilon):
            raise ValidationError("bisection tolerance must lie in (0, 1 - 2^-eps)")
        if self.grid_points < 1:
            raise ValidationError("grid_points must be positive")

    @property
    def channels(self) -> np.ndarray:
        return self.channel_set.channels

    @property
    def radii(self) -> np.ndarray:
        return self.channel_set.radii


@dataclass
class CovarianceTriple:
    Q0: np.ndarray
    Qc: np.ndarray
    Qa: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.Q0).shape[0]
        for name in ("Q0", "Qc", "Qa"):
            M = np.asarray(getattr(self, name), dtype=complex)
            if M.shape != (n, n):
                raise ValidationError(f"{name} has shape {M.shape}, expected {(n, n)}")
            setattr(self, name, hermitianize(M))

    @classmethod
    def zeros(cls, n: int) -> CovarianceTriple:
        z = np.zeros((n, n), dtype=complex)
        return cls(z, z.copy(), z.copy())

    @property
    def n_tx(self) -> int:
        return self.Q0.shape[0]

    def total_power(self) -> float:
        return float(np.real(np.trace(self.Q0 + self.Qc + self.Qa)))

    def clipped(self) -> CovarianceTriple:
        """Copy with negative eigenvalues (solver noise) clipped to zero."""
        out = []
        for M in (self.Q0, self.Qc, self.Qa):
            w, V = np.linalg.eigh(M)
            out.append((V * np.maximum(w, 0.0)) @ V.conj().T)
        return CovarianceTriple(*out)

    def as_dict(self) -> dict:
        return {k: {"re": getattr(self, k).real.tolist(), "im": getattr(self, k).imag.tolist()}
                for k in ("Q0", "Qc", "Qa")}


@dataclass
class RateBreakdown:
    multicast_per_rx: np.ndarray
    legit_rate: float
    eaves_per_rx: np.ndarray

    @property
    def multicast_rate(self) -> float:
        return float(np.min(self.multicast_per_rx))

    @property
    def secrecy_rate(self) -> float:
        worst = float(np.max(self.eaves_per_rx)) if self.eaves_per_rx.size else 0.0
        return max(0.0, self.legit_rate - worst)


def _quad_forms(H: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Real parts of h M h^H for every row h of ``H`` (any leading shape)."""
    return np.real(np.einsum("...i,ij,...j->...", H, M, H.conj()))


def _rate_terms(H: np.ndarray, triple: CovarianceTriple):
    q0 = _quad_forms(H, triple.Q0)
    qc = _quad_forms(H, triple.Qc)
    qa = _quad_forms(H, triple.Qa)
    multicast = np.log2(1.0 + q0 / (1.0 + qc + qa))
    confidential = np.log2(1.0 + qc / (1.0 + qa))
    return multicast, confidential


def _check_dims(triple: CovarianceTriple, channels: ChannelSet) -> None:
    if triple.n_tx != channels.n_tx:
        raise ValidationError(f"covariances are {triple.n_tx}x{triple.n_tx} but channels have "
                              f"{channels.n_tx} antennas")


def rates(triple: CovarianceTriple, channels: ChannelSet) -> RateBreakdown:
    """Exact rates at the nominal channels (radii ignored)."""
    _check_dims(triple, channels)
    multicast, confidential = _rate_terms(channels.channels, triple)
    return RateBreakdown(multicast, float(confidential[0]), confidential[1:])


def sample_ball(h: np.ndarray, eps: float, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Points h + e with e uniform in the complex ball of radius ``eps``.

    The returned set always contains e = 0 and the two radial extremes.
    """
    n = h.shape[0]
    if eps == 0:
        return h[None, :].copy()
    g = rng.standard_normal((n_samples, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = eps * rng.random(n_samples) ** (1.0 / (2 * n))
    e = (g[:, :n] + 1j * g[:, n:]) * r[:, None]
    u = h / np.linalg.norm(h)
    fixed = np.stack([np.zeros(n, dtype=complex), eps * u, -eps * u])
    return h[None, :] + np.concatenate([fixed, e])


def worst_case_eval(triple: CovarianceTriple, channels: ChannelSet, n_samples: int = 10_000,
                    seed: int | np.random.Generator | None = 0) -> RateBreakdown:
    """Sampled worst case over each receiver's uncertainty ball.

    Multicast and legitimate rates are minimized, eavesdropper rates maximized.
    This is an outer estimate: the true worst case is at least as bad.
    """
    _check_dims(triple, channels)
    if n_samples < 1:
        raise ValidationError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    multicast = np.empty(channels.n_rx)
    confidential = np.empty(channels.n_rx)
    for k, (h, eps) in enumerate(zip(channels.channels, channels.radii)):
        pts = sample_ball(h, float(eps), n_samples, rng)
        m, c = _rate_terms(pts, triple)
        multicast[k] = m.min()
        confidential[k] = c.min() if k == 0 else c.max()
    return RateBreakdown(multicast, float(confidential[0]), confidential[1:])


def ball_extremes(h: np.ndarray, eps: float) -> tuple[float, float]:
    """Smallest and largest squared norm of h + e over the ball ||e|| <= eps."""
    norm = float(np.linalg.norm(h))
    if eps < 0:
        raise ValidationError("radius must be nonnegative")
    if eps >= norm:
        raise ValidationError("radius must be smaller than the channel norm")
    return (norm - eps) ** 2, (norm + eps) ** 2


# Channel fixture with N_t = 2, K = 5 (receiver 1 first).
FIXTURE_CHANNELS = np.array([
    [0.3802 - 1.5972j, 1.2968 + 0.6096j],
    [0.2254 - 0.3066j, -0.9247 + 0.2423j],
    [0.5303 - 0.9545j, 1.9583 + 2.1460j],
    [0.5129 + 0.5054j, -0.0446 - 0.1449j],
    [0.0878 - 0.9963j, 1.0534 + 1.0021j],
])


def fixture_channels(radius: float = 0.0) -> ChannelSet:
    return ChannelSet(FIXTURE_CHANNELS, np.full(FIXTURE_CHANNELS.shape[0], radius))
