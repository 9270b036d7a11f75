"""Alternating MMSE design of the digital precoder, the holographic element
weights and the ground-surface phases.

The objective is the sum MSE between the (optionally gain-scaled) received
vector and the unit-power symbols,

    ``||g H_eff F - I||_F^2 + |g|^2 I sigma^2``,  subject to ``||F||_F^2 <= P_t``,

where ``H_eff = (H_su Y H_hs + H_hu) M``. With ``receive_gain="none"`` the
gain is pinned to one; with ``"common"`` a single receive scalar shared by
all users is optimised jointly with ``F``. Each block update is an exact
minimiser of the objective over its block, so the MSE never increases.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_channel_set, check_reference_waves
from .channel import ChannelSet, NoiseModel
from .surfaces import cascaded_channel

log = logging.getLogger(__name__)

DEFAULT_NOISE_POWER = NoiseModel(1e6).power
DEGENERATE_EPS = 1e-12


def mse(H_eff: np.ndarray, F: np.ndarray, sigma2: float, gain: complex = 1.0) -> float:
    """Expected squared error ``E||g y - x||^2`` for unit-power symbols and
    noise variance ``sigma2`` per user."""
    H_eff, F = np.asarray(H_eff), np.asarray(F)
    if H_eff.shape[1] != F.shape[0] or H_eff.shape[0] != F.shape[1]:
        raise ValueError(f"H_eff {H_eff.shape} and F {F.shape} are not conformable")
    if sigma2 < 0:
        raise ValueError("noise variance must be non-negative")
    n = H_eff.shape[0]
    resid = gain * (H_eff @ F) - np.eye(n)
    return float(np.vdot(resid, resid).real + abs(gain) ** 2 * n * sigma2)


def update_precoder(H_eff: np.ndarray, total_power: float,
                    bisection_tol: float = 1e-10) -> np.ndarray:
    """Power-constrained least-squares precoder.

    Minimises ``||H_eff F - I||_F^2`` subject to ``||F||_F^2 <= total_power``.
    Returns the pseudo-inverse when it fits the budget; otherwise the
    regularised inverse whose power meets the budget within
    ``bisection_tol`` (relative), approached from the feasible side.
    An all-zero channel yields ``F = 0``.
    """
    H = np.asarray(H_eff, dtype=complex)
    if total_power <= 0:
        raise ValueError("total power must be positive")
    n_users = H.shape[0]
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((H.shape[1], n_users), dtype=complex)

    rank_tol = s[0] * max(H.shape) * np.finfo(float).eps
    live = s > rank_tol
    s_live = s[live]
    if np.sum(1.0 / s_live ** 2) <= total_power:
        return (Vh[live].conj().T / s_live) @ U[:, live].conj().T

    # Work with mu = t * s_max^2 so the search is invariant to channel scale.
    s2 = (s_live / s_live[0]) ** 2
    scale = s_live[0] ** 2
    target = total_power * scale

    def power(t):
        return float(np.sum(s2 / (s2 + t) ** 2))

    lo = 1e-12
    while power(lo) < target and lo > 1e-300:
        lo *= 1e-6
    hi = 1.0
    while power(hi) >= target:
        hi *= 2.0
    p_lo, p_hi = power(lo), power(hi)
    for _ in range(2000):
        if p_lo - p_hi <= bisection_tol * target:
            break
        mid = np.sqrt(lo * hi)
        if mid <= lo or mid >= hi:
            break
        p_mid = power(mid)
        if p_mid >= target:
            lo, p_lo = mid, p_mid
        else:
            hi, p_hi = mid, p_mid
    mu = hi * scale
    return (Vh[live].conj().T * (s_live / (s_live ** 2 + mu))) @ U[:, live].conj().T


def wiener_precoder(H_eff: np.ndarray, total_power: float,
                    sigma2: float) -> tuple[np.ndarray, float]:
    """Joint minimiser over ``(F, g)`` of ``||g H F - I||^2 + |g|^2 I sigma2``
    with ``||F||^2 <= total_power``.

    ``F`` is the regularised inverse with loading ``I sigma2 / P`` scaled to
    full power and ``g`` is the reciprocal of that scale. Returns
    ``(F, g)``; an all-zero channel gives ``(0, 0)``.
    """
    H = np.asarray(H_eff, dtype=complex)
    n_users = H.shape[0]
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((H.shape[1], n_users), dtype=complex), 0.0
    live = s > s[0] * max(H.shape) * np.finfo(float).eps
    s, U, Vh = s[live], U[:, live], Vh[live]
    xi = n_users * sigma2 / total_power
    shape = s / (s ** 2 + xi)
    beta = np.sqrt(total_power / np.sum(shape ** 2))
    F = beta * (Vh.conj().T * shape) @ U.conj().T
    return F, 1.0 / beta


@njit(cache=True)
def _unimodular_sweep(A, B, z, E, g, eps, sigma2, adapt):  # pragma: no cover - compiled
    # E holds g (A diag(z) B + C) - I on entry and is kept in sync on exit.
    n = z.shape[0]
    m = E.shape[0]
    for k in range(n):
        beta = 0j
        for a in range(m):
            for b in range(m):
                x = g * A[a, k] * B[k, b]
                beta += x * np.conj(E[a, b] - z[k] * x)
        mag = abs(beta)
        if mag > eps:
            znew = -np.conj(beta) / mag
            dz = znew - z[k]
            for a in range(m):
                for b in range(m):
                    E[a, b] += dz * g * A[a, k] * B[k, b]
            z[k] = znew
        if adapt and g != 0:
            # exact refresh of the common receive gain with everything else fixed
            trace = 0j
            power = 0.0
            for a in range(m):
                E[a, a] += 1.0
                trace += E[a, a] / g
                for b in range(m):
                    power += abs(E[a, b] / g) ** 2
            gnew = np.conj(trace) / (power + m * sigma2)
            if gnew != 0:
                ratio = gnew / g
                for a in range(m):
                    for b in range(m):
                        E[a, b] *= ratio
                g = gnew
            for a in range(m):
                E[a, a] -= 1.0
    return g


def coordinate_sweep(A: np.ndarray, B: np.ndarray, z: np.ndarray, const: np.ndarray,
                     eps: float = DEGENERATE_EPS, gain: complex = 1.0,
                     sigma2: float | None = None) -> tuple[np.ndarray, complex]:
    """One Gauss-Seidel pass of exact unit-modulus coordinate updates.

    Minimises ``||g (A diag(z) B + const) - I||_F^2`` over each ``z_k`` in
    turn. With ``X_k = g A[:, k] B[k, :]`` and ``beta_k = <X_k, E_{-k}>``
    (linear in the first argument, conjugate-linear in the second) the
    minimiser is ``-conj(beta_k) / |beta_k|``; coordinates with
    ``|beta_k| <= eps`` keep their value.

    When ``sigma2`` is given, the receive gain ``g`` is re-optimised in
    closed form after every coordinate (the objective then also carries
    ``|g|^2 I sigma2``). Returns the updated copy of ``z`` and the gain.
    """
    A = np.ascontiguousarray(A, dtype=np.complex128)
    B = np.ascontiguousarray(B, dtype=np.complex128)
    z = np.array(z, dtype=np.complex128)
    E = np.ascontiguousarray(gain * ((A * z) @ B + const) - np.eye(A.shape[0]))
    adapt = sigma2 is not None
    g = _unimodular_sweep(A, B, z, E, complex(gain), float(eps),
                          float(sigma2 or 0.0), adapt)
    return z, complex(g)


def _split(F: np.ndarray, refs: Sequence[np.ndarray]) -> list[np.ndarray]:
    L = [a.shape[1] for a in refs]
    return np.split(F, np.cumsum(L)[:-1], axis=0)


def _feed_to_element(F: np.ndarray, refs: Sequence[np.ndarray]) -> np.ndarray:
    """``blockdiag(A_s) @ F``, shape (S*N, I)."""
    return np.vstack([a @ f for a, f in zip(refs, _split(F, refs))])


def _apply_weights(G: np.ndarray, w: np.ndarray, refs: Sequence[np.ndarray]) -> np.ndarray:
    """``G @ M`` without materialising the block-diagonal ``M``."""
    out, start = [], 0
    for a in refs:
        n = a.shape[0]
        out.append((G[:, start:start + n] * w[start:start + n]) @ a)
        start += n
    return np.hstack(out)


def _wrap_phase(z: np.ndarray) -> np.ndarray:
    theta = np.mod(np.angle(z), 2 * np.pi)
    return np.where(theta >= 2 * np.pi, 0.0, theta)


@dataclass
class OptimizationTrace:
    """Objective value after every outer iteration (index 0: initial point)."""

    mse: list[float] = field(default_factory=list)
    iterations: int = 0
    termination: str = "max-iters"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("iteration,mse\n")
            for i, v in enumerate(self.mse):
                fh.write(f"{i},{v:.9g}\n")


@dataclass
class BeamformerState:
    F: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    refs: tuple[np.ndarray, ...]
    gain: complex = 1.0
    degenerate: bool = False

    @property
    def upsilon(self) -> np.ndarray:
        """Diagonal of the T-RIS matrix, ``exp(j theta)``."""
        return np.exp(1j * self.theta)

    def effective_channel(self, channels: ChannelSet) -> np.ndarray:
        return _apply_weights(cascaded_channel(channels, self.upsilon), self.w, self.refs)


def update_holographic_weights(channels: ChannelSet, upsilon: np.ndarray,
                               state: BeamformerState, eps: float = DEGENERATE_EPS,
                               sigma2: float | None = None) -> np.ndarray:
    """One coordinate sweep over all satellite element weights.

    Passing ``sigma2`` also refreshes ``state.gain`` after every coordinate.
    """
    upsilon = np.asarray(upsilon)
    if upsilon.ndim == 2:
        upsilon = np.diagonal(upsilon)
    G = cascaded_channel(channels, upsilon)
    R = _feed_to_element(state.F, state.refs)
    w, gain = coordinate_sweep(G, R, state.w, 0.0, eps, state.gain, sigma2)
    if sigma2 is not None:
        state.gain = gain
    return w


def update_tris_phases(channels: ChannelSet, state: BeamformerState,
                       eps: float = DEGENERATE_EPS, sigma2: float | None = None) -> np.ndarray:
    """One coordinate sweep over all ground-surface phases.

    The surface enters ``H_eff F`` affinely per element: the element-``k``
    term is ``H_su[:, k] (H_hs M F)[k, :]`` on top of the direct path
    ``H_hu M F``.
    """
    MF = state.w[:, None] * _feed_to_element(state.F, state.refs)
    B = channels.H_hs @ MF
    const = channels.H_hu @ MF
    z, gain = coordinate_sweep(channels.H_su, B, state.upsilon, const, eps, state.gain, sigma2)
    if sigma2 is not None:
        state.gain = gain
    return _wrap_phase(z)


class HolographicMMSEBeamformer(BaseEstimator):
    """Alternating-minimisation beamformer for the satellite/surface downlink.

    Parameters
    ----------
    total_power : float
        Transmit power budget ``P_t`` in watts, shared by the satellite cluster.
    noise_power : float
        Receiver noise variance per user in watts.
    receive_gain : {"common", "none"}
        Whether a common receive scalar enters the MSE.
    max_outer_iters : int
    rel_tol : float
        Stop once one outer iteration improves the MSE by less than this
        fraction.
    bisection_tol : float
        Relative power tolerance of the precoder search (``"none"`` only).
    eps : float
        Coordinates whose coupling magnitude is at most ``eps`` are skipped.
    random_state : int, Generator or None
        Source of the random initial phases.

    Attributes
    ----------
    precoder_, weights_, phases_, gain_ : fitted variables.
    trace_ : OptimizationTrace
    n_iter_ : int
    degenerate_ : bool
        True when both user-side channels are identically zero.
    """

    def __init__(self, total_power=200.0, noise_power=DEFAULT_NOISE_POWER,
                 receive_gain="common", max_outer_iters=100, rel_tol=1e-9,
                 bisection_tol=1e-10, eps=DEGENERATE_EPS, random_state=None):
        self.total_power = total_power
        self.noise_power = noise_power
        self.receive_gain = receive_gain
        self.max_outer_iters = max_outer_iters
        self.rel_tol = rel_tol
        self.bisection_tol = bisection_tol
        self.eps = eps
        self.random_state = random_state

    def _precode(self, H_eff):
        if self.receive_gain == "common":
            return wiener_precoder(H_eff, self.total_power, self.noise_power)
        return update_precoder(H_eff, self.total_power, self.bisection_tol), 1.0

    def _objective(self, state, channels):
        return mse(state.effective_channel(channels), state.F, self.noise_power, state.gain)

    def fit(self, channels: ChannelSet, reference_waves: Sequence[np.ndarray],
            init: BeamformerState | None = None):
        """Optimise the precoder, weights and phases for ``channels``.

        ``reference_waves`` holds one (N, L) feed-to-element matrix per
        satellite. ``init`` overrides the random initial weights and phases.
        """
        if self.receive_gain not in ("common", "none"):
            raise ValueError(f"unknown receive_gain {self.receive_gain!r}")
        channels = check_channel_set(channels)
        refs = check_reference_waves(reference_waves, channels.H_hs.shape[1])
        n_users = channels.num_users
        n_feeds = sum(a.shape[1] for a in refs)
        qk = channels.H_hs.shape[0]

        if init is None:
            rng = np.random.default_rng(self.random_state)
            w = np.exp(2j * np.pi * rng.random(channels.H_hs.shape[1]))
            theta = 2 * np.pi * rng.random(qk)
        else:
            w, theta = np.array(init.w, dtype=complex), np.array(init.theta, dtype=float)
        state = BeamformerState(np.zeros((n_feeds, n_users), dtype=complex), w, theta, refs)
        trace = OptimizationTrace()

        if not channels.H_su.any() and not channels.H_hu.any():
            state.degenerate = True
            trace.mse.append(self._objective(state, channels))
            trace.termination = "degenerate"
            return self._store(state, trace)

        state.F, state.gain = self._precode(state.effective_channel(channels))
        trace.mse.append(self._objective(state, channels))
        for it in range(1, self.max_outer_iters + 1):
            sigma2 = self.noise_power if self.receive_gain == "common" else None
            state.w = update_holographic_weights(channels, state.upsilon, state, self.eps, sigma2)
            state.theta = update_tris_phases(channels, state, self.eps, sigma2)
            state.F, state.gain = self._precode(state.effective_channel(channels))
            trace.mse.append(self._objective(state, channels))
            trace.iterations = it
            prev, cur = trace.mse[-2], trace.mse[-1]
            if prev <= 0 or (prev - cur) < self.rel_tol * prev:
                trace.termination = "tolerance"
                break
        log.debug("optimisation stopped after %d iterations (%s), mse %.6g",
                  trace.iterations, trace.termination, trace.mse[-1])
        return self._store(state, trace)

    def _store(self, state, trace):
        self.state_ = state
        self.precoder_ = state.F
        self.weights_ = state.w
        self.phases_ = state.theta
        self.gain_ = state.gain
        self.trace_ = trace
        self.n_iter_ = trace.iterations
        self.degenerate_ = state.degenerate
        return self

    def effective_channel(self, channels: ChannelSet) -> np.ndarray:
        check_is_fitted(self, "state_")
        return self.state_.effective_channel(check_channel_set(channels))

    def predict(self, channels: ChannelSet) -> np.ndarray:
        """Symbol-to-observation map ``H_eff F`` (I x I) for ``channels``."""
        return self.effective_channel(channels) @ self.precoder_

    def sinr(self, channels: ChannelSet) -> np.ndarray:
        from .evaluation import sinr_per_user
        return sinr_per_user(self.effective_channel(channels), self.precoder_, self.noise_power)

    def score(self, channels: ChannelSet) -> float:
        """Sum-rate in bit/s/Hz achieved on ``channels``."""
        from .evaluation import sum_rate
        return sum_rate(self.sinr(channels))


def optimize(channels: ChannelSet, config, reference_waves: Sequence[np.ndarray],
             init: BeamformerState | None = None, rng=None,
             noise_power: float | None = None) -> tuple[BeamformerState, OptimizationTrace]:
    """Functional front end: run the estimator configured from ``config``."""
    from .channel import noise_power as config_noise
    est = HolographicMMSEBeamformer(
        total_power=config.total_power,
        noise_power=config_noise(config) if noise_power is None else noise_power,
        receive_gain=config.receive_gain,
        max_outer_iters=config.max_outer_iters,
        rel_tol=config.rel_tol,
        bisection_tol=config.bisection_tol,
        random_state=rng,
    ).fit(channels, reference_waves, init=init)
    return est.state_, est.trace_
