"""Channel synthesis: free-space LoS blocks, Rician/Rayleigh fading and the
assembly of the three link matrices of one realisation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import constants

from .scenario import ScenarioConfig, GeometryRealization, SurfaceSpec, steering_vector

REFERENCE_TEMPERATURE = 290.0

# Rician K-factor per (H_su, H_hu) for each case; None disables the link.
# "los" resolves to the configured LoS K-factor.
_CASE_FACTORS = {
    "I": (0.0, None),
    "II": ("los", "los"),
    "III": (0.0, 0.0),
    "IV": (0.0, "los"),
}


@dataclass(frozen=True)
class ChannelSet:
    """Channel matrices of one realisation.

    Attributes
    ----------
    H_hs : ndarray, shape (Q*K, S*N)
        Satellite apertures to base-station surfaces.
    H_su : ndarray, shape (I, Q*K)
        Base-station surfaces to users.
    H_hu : ndarray, shape (I, S*N)
        Direct satellite-to-user links.
    """

    H_hs: np.ndarray
    H_su: np.ndarray
    H_hu: np.ndarray

    def __post_init__(self):
        for name in ("H_hs", "H_su", "H_hu"):
            m = getattr(self, name)
            if m.ndim != 2:
                raise ValueError(f"{name} must be a matrix")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} has non-finite entries")
        qk, sn = self.H_hs.shape
        if self.H_su.shape[1] != qk or self.H_hu.shape[1] != sn \
                or self.H_su.shape[0] != self.H_hu.shape[0]:
            raise ValueError(
                f"inconsistent channel shapes H_hs {self.H_hs.shape}, "
                f"H_su {self.H_su.shape}, H_hu {self.H_hu.shape}")

    @property
    def num_users(self) -> int:
        return self.H_su.shape[0]

    def save(self, path) -> None:
        """Write the three matrices to an ``.npz`` container."""
        np.savez(path, H_hs=self.H_hs, H_su=self.H_su, H_hu=self.H_hu)

    @classmethod
    def load(cls, path) -> "ChannelSet":
        with np.load(Path(path)) as data:
            return cls(data["H_hs"], data["H_su"], data["H_hu"])


@dataclass(frozen=True)
class NoiseModel:
    bandwidth: float
    noise_figure: float = 7.0
    temperature: float = REFERENCE_TEMPERATURE

    @property
    def power(self) -> float:
        """Thermal noise power k_B T B F in watts."""
        return constants.k * self.temperature * self.bandwidth * 10 ** (self.noise_figure / 10)


def noise_power(config: ScenarioConfig) -> float:
    return NoiseModel(config.bandwidth, config.noise_figure).power


def free_space_gain(d: float, lam: float) -> float:
    """Friis amplitude gain ``lam / (4 pi d)``."""
    if not (d > 0 and lam > 0):
        raise ValueError("distance and wavelength must be positive")
    return lam / (4 * np.pi * d)


def los_channel(tx: SurfaceSpec, rx: SurfaceSpec, lam: float) -> np.ndarray:
    """Rank-one far-field LoS matrix of shape (rx elements, tx elements).

    The path loss and the common propagation phase use the centre-to-centre
    distance; element offsets enter only through the steering vectors.
    """
    delta = np.asarray(tx.center, dtype=float) - np.asarray(rx.center, dtype=float)
    d = float(np.linalg.norm(delta))
    if d == 0:
        raise ValueError("transmitter and receiver positions coincide")
    u = delta / d  # from rx towards tx
    g = free_space_gain(d, lam)
    a_rx = steering_vector(rx, u, lam)
    a_tx = steering_vector(tx, u, lam)
    return g * np.exp(-2j * np.pi * d / lam) * np.outer(a_rx, a_tx.conj())


def rician_channel(los: np.ndarray, avg_power: float, k_factor: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Mix the LoS matrix with i.i.d. CN(0, 1) scattering.

    ``k_factor = inf`` returns ``los`` untouched and ``k_factor = 0`` is
    Rayleigh fading with per-entry power ``avg_power``.
    """
    if not k_factor >= 0:
        raise ValueError("Rician K-factor must be non-negative")
    if avg_power < 0:
        raise ValueError("average power must be non-negative")
    los = np.asarray(los, dtype=complex)
    if math.isinf(k_factor):
        return los.copy()
    w = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / np.sqrt(2)
    return (np.sqrt(k_factor / (k_factor + 1)) * los
            + np.sqrt(avg_power / (k_factor + 1)) * w)


def _point(position) -> SurfaceSpec:
    return SurfaceSpec(np.zeros((1, 3)), np.zeros((0, 3)), np.array([0.0, 0.0, 1.0]),
                       np.asarray(position, dtype=float))


def _faded_link(tx: SurfaceSpec, rx: SurfaceSpec, lam: float, k_factor: float,
                rng: np.random.Generator) -> np.ndarray:
    los = los_channel(tx, rx, lam)
    d = np.linalg.norm(tx.center - rx.center)
    return rician_channel(los, free_space_gain(d, lam) ** 2, k_factor, rng)


def synthesize_channels(config: ScenarioConfig, geometry: GeometryRealization,
                        rng: np.random.Generator) -> ChannelSet:
    """Draw the three channel matrices for ``config.channel_case``.

    Each link family draws from its own child stream of ``rng`` so that
    cases sharing a link distribution also share its realisation.
    """
    lam = config.wavelength
    S, Q, I = config.num_satellites, config.num_ris_abs, config.num_users
    N, K = config.rhs_elements, config.tris_elements
    k_su, k_hu = (config.rician_k_los if k == "los" else k
                  for k in _CASE_FACTORS[config.channel_case])
    rng_hs, rng_su, rng_hu = rng.spawn(3)
    users = [_point(p) for p in geometry.user_positions]

    H_hs = np.zeros((Q * K, S * N), dtype=complex)
    for q in range(Q):
        for s in range(S):
            H_hs[q * K:(q + 1) * K, s * N:(s + 1) * N] = _faded_link(
                geometry.rhs[s], geometry.tris[q], lam, config.rician_k_los, rng_hs)

    H_su = np.zeros((I, Q * K), dtype=complex)
    for i in range(I):
        for q in range(Q):
            H_su[i, q * K:(q + 1) * K] = _faded_link(
                geometry.tris[q], users[i], lam, k_su, rng_su)[0]

    H_hu = np.zeros((I, S * N), dtype=complex)
    if k_hu is not None:
        for i in range(I):
            for s in range(S):
                H_hu[i, s * N:(s + 1) * N] = _faded_link(
                    geometry.rhs[s], users[i], lam, k_hu, rng_hu)[0]
    return ChannelSet(H_hs, H_su, H_hu)
