"""Scenario configuration, node geometry and aperture layouts.

Everything lives in a flat-earth local Cartesian frame: ``z`` is height above
the ground plane, the satellites sit on a line parallel to ``x`` and the
RIS-assisted base stations on a line parallel to ``y``, both centred on the
origin.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

SPEED_OF_LIGHT = 299_792_458.0

CHANNEL_CASES = ("I", "II", "III", "IV")
RECEIVE_GAIN_MODES = ("common", "none")


class ScenarioError(ValueError):
    """Raised for malformed scenario documents or invariant violations.

    ``field`` names the offending configuration key when there is one.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class ScenarioConfig:
    """All constants that define a simulation run.

    The defaults reproduce the two-satellite, one-base-station, two-user
    downlink at 12 GHz with 200 W of transmit power.
    """

    num_satellites: int = 2
    num_ris_abs: int = 1
    num_users: int = 2
    rhs_elements: int = 64
    rhs_feeds: int = 10
    tris_elements: int = 64
    carrier_freq: float = 12e9
    bandwidth: float = 1e6
    total_power: float = 200.0
    orbit_altitude: float = 600e3
    inter_satellite_distance: float = 50e3
    ris_abs_height: float = 20.0
    ris_abs_spacing: float = 500.0
    user_distance_range: tuple[float, float] = (20.0, 50.0)
    rhs_element_spacing: float = 0.25
    tris_element_spacing: float = 0.5
    guided_index: float = 1.5
    channel_case: str = "IV"
    rician_k_los: float = 10.0
    noise_figure: float = 7.0
    receive_gain: str = "common"
    max_outer_iters: int = 100
    rel_tol: float = 1e-9
    bisection_tol: float = 1e-10
    master_seed: int = 0
    trials: int = 100

    def __post_init__(self):
        object.__setattr__(
            self, "user_distance_range",
            tuple(float(v) for v in self.user_distance_range))
        object.__setattr__(self, "channel_case", str(self.channel_case).upper())
        validate_config(self)

    @property
    def wavelength(self) -> float:
        return wavelength(self.carrier_freq)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["user_distance_range"] = list(self.user_distance_range)
        return out


_COUNT_FIELDS = ("num_satellites", "num_ris_abs", "num_users", "rhs_elements",
                 "rhs_feeds", "tris_elements", "max_outer_iters", "trials")
_POSITIVE_FIELDS = ("carrier_freq", "bandwidth", "total_power", "orbit_altitude",
                    "guided_index", "rel_tol", "bisection_tol")


def validate_config(cfg: ScenarioConfig) -> None:
    """Check every invariant of ``cfg``; raise :class:`ScenarioError` naming
    the first offending field."""
    for name in _COUNT_FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
            raise ScenarioError(f"{name} must be an integer >= 1, got {value!r}", name)
    for name in _POSITIVE_FIELDS:
        value = getattr(cfg, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ScenarioError(f"{name} must be a positive finite number, got {value!r}", name)
    if cfg.rhs_feeds > cfg.rhs_elements:
        raise ScenarioError(
            f"rhs_feeds ({cfg.rhs_feeds}) cannot exceed rhs_elements ({cfg.rhs_elements})",
            "rhs_feeds")
    if cfg.num_users > cfg.num_satellites * cfg.rhs_feeds:
        raise ScenarioError(
            f"num_users ({cfg.num_users}) exceeds the total number of feeds "
            f"({cfg.num_satellites * cfg.rhs_feeds})", "num_users")
    lo, hi = cfg.user_distance_range
    if len(cfg.user_distance_range) != 2 or lo < 0 or lo > hi:
        raise ScenarioError("user_distance_range must be [min, max] with 0 <= min <= max",
                            "user_distance_range")
    if not 0 < cfg.rhs_element_spacing <= 0.5:
        raise ScenarioError("rhs_element_spacing must lie in (0, 0.5] wavelengths",
                            "rhs_element_spacing")
    if not 0 < cfg.tris_element_spacing <= 1:
        raise ScenarioError("tris_element_spacing must lie in (0, 1] wavelengths",
                            "tris_element_spacing")
    if cfg.channel_case not in CHANNEL_CASES:
        raise ScenarioError(f"channel_case must be one of {CHANNEL_CASES}", "channel_case")
    if not cfg.rician_k_los >= 0:
        raise ScenarioError("rician_k_los must be >= 0 (inf for pure LoS)", "rician_k_los")
    if cfg.receive_gain not in RECEIVE_GAIN_MODES:
        raise ScenarioError(f"receive_gain must be one of {RECEIVE_GAIN_MODES}",
                            "receive_gain")
    for name in ("ris_abs_height", "inter_satellite_distance", "ris_abs_spacing"):
        if getattr(cfg, name) < 0:
            raise ScenarioError(f"{name} must be >= 0", name)
    if not math.isfinite(cfg.noise_figure):
        raise ScenarioError("noise_figure must be finite", "noise_figure")
    if isinstance(cfg.master_seed, bool) or not isinstance(cfg.master_seed, (int, np.integer)) \
            or cfg.master_seed < 0:
        raise ScenarioError("master_seed must be a non-negative integer", "master_seed")


def _coerce(name: str, value: Any) -> Any:
    """Convert a raw document value to the type of field ``name``."""
    default = getattr(ScenarioConfig, name, None)
    if name == "user_distance_range":
        if isinstance(value, str):
            value = [v for v in value.replace("[", "").replace("]", "").split(",") if v.strip()]
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise ScenarioError("user_distance_range must be a pair of numbers", name) from None
    try:
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"cannot interpret {value!r} for {name}", name) from None


def config_from_mapping(mapping: Mapping[str, Any] | None,
                        base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a config from ``mapping``, falling back to ``base`` (or the
    defaults) for every key it does not set."""
    mapping = dict(mapping or {})
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ScenarioError(f"unknown configuration key(s): {', '.join(unknown)}", unknown[0])
    values = (base or ScenarioConfig()).to_dict()
    for key, value in mapping.items():
        values[key] = _coerce(key, value)
    return ScenarioConfig(**values)


def load_scenario(document: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse a YAML key/value scenario document into a validated config.

    Examples
    --------
    >>> cfg = load_scenario("num_satellites: 2\\ntotal_power: 200\\n")
    >>> cfg.total_power
    200.0
    """
    try:
        data = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"malformed scenario document: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a mapping of key: value pairs")
    return config_from_mapping(data, base)


def parse_override(text: str) -> tuple[str, Any]:
    """Split a ``key=value`` override; the value is parsed as YAML scalar."""
    if "=" not in text:
        raise ScenarioError(f"override {text!r} is not of the form KEY=VALUE")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return key, raw.strip() if value is None else value


def wavelength(f: float) -> float:
    """Free-space wavelength in metres for carrier frequency ``f`` in Hz."""
    if not f > 0:
        raise ValueError(f"frequency must be positive, got {f!r}")
    return SPEED_OF_LIGHT / f


@dataclass(frozen=True)
class SurfaceSpec:
    """Layout of one aperture.

    ``element_positions`` and ``feed_positions`` are offsets in metres from
    the aperture centre, expressed along the global axes. ``center`` places
    the aperture in the scene.
    """

    element_positions: np.ndarray
    feed_positions: np.ndarray
    boresight: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def num_elements(self) -> int:
        return self.element_positions.shape[0]

    @property
    def num_feeds(self) -> int:
        return self.feed_positions.shape[0]


def grid_shape(n: int) -> tuple[int, int]:
    """Near-square factorisation ``n = nx * ny`` with ``nx`` the largest
    divisor not exceeding sqrt(n)."""
    nx = math.isqrt(n)
    while n % nx:
        nx -= 1
    return nx, n // nx


def _plane_basis(boresight: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b = boresight / np.linalg.norm(boresight)
    ref = np.array([1.0, 0.0, 0.0]) if abs(b[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = ref - (ref @ b) * b
    u /= np.linalg.norm(u)
    return u, np.cross(b, u)


def planar_surface(n_elements: int, spacing: float, boresight: Sequence[float],
                   center: Sequence[float] = (0.0, 0.0, 0.0), n_feeds: int = 0) -> SurfaceSpec:
    """Lay out ``n_elements`` on a near-square grid with ``spacing`` metres
    between neighbours, in the plane normal to ``boresight``.

    Feeds, if any, sit one spacing outside the first grid column, spread
    uniformly along that edge.
    """
    b = np.asarray(boresight, dtype=float)
    b = b / np.linalg.norm(b)
    u, v = _plane_basis(b)
    nx, ny = grid_shape(n_elements)
    xs = (np.arange(nx) - (nx - 1) / 2) * spacing
    ys = (np.arange(ny) - (ny - 1) / 2) * spacing
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    elements = gx.reshape(-1, 1) * u + gy.reshape(-1, 1) * v
    if n_feeds:
        edge_x = xs[0] - spacing
        span = ny * spacing
        fy = -span / 2 + (np.arange(n_feeds) + 0.5) * span / n_feeds
        feeds = edge_x * u + fy.reshape(-1, 1) * v
    else:
        feeds = np.zeros((0, 3))
    return SurfaceSpec(elements, feeds, b, np.asarray(center, dtype=float))


@dataclass(frozen=True)
class GeometryRealization:
    """Node placement of one trial plus the aperture layouts."""

    satellite_positions: np.ndarray
    ris_abs_positions: np.ndarray
    user_positions: np.ndarray
    serving_ris: np.ndarray
    rhs: tuple[SurfaceSpec, ...]
    tris: tuple[SurfaceSpec, ...]


def build_geometry(config: ScenarioConfig, rng: np.random.Generator) -> GeometryRealization:
    """Place satellites, base stations and users for one trial.

    Users are assigned round-robin to base stations and drawn with uniform
    horizontal distance and uniform azimuth around the serving one.
    """
    lam = config.wavelength
    S, Q, I = config.num_satellites, config.num_ris_abs, config.num_users

    ris = np.zeros((Q, 3))
    ris[:, 1] = (np.arange(Q) - (Q - 1) / 2) * config.ris_abs_spacing
    ris[:, 2] = config.ris_abs_height

    sats = np.zeros((S, 3))
    sats[:, 0] = (np.arange(S) - (S - 1) / 2) * config.inter_satellite_distance
    sats[:, :2] += ris[:, :2].mean(axis=0)
    sats[:, 2] = config.orbit_altitude

    serving = np.arange(I) % Q
    lo, hi = config.user_distance_range
    radius = rng.uniform(lo, hi, size=I)
    azimuth = rng.uniform(0.0, 2 * np.pi, size=I)
    users = np.zeros((I, 3))
    users[:, 0] = ris[serving, 0] + radius * np.cos(azimuth)
    users[:, 1] = ris[serving, 1] + radius * np.sin(azimuth)

    nadir = (0.0, 0.0, -1.0)
    rhs = tuple(
        planar_surface(config.rhs_elements, config.rhs_element_spacing * lam, nadir,
                       center=sats[s], n_feeds=config.rhs_feeds)
        for s in range(S))
    centroid = sats.mean(axis=0)
    tris = tuple(
        planar_surface(config.tris_elements, config.tris_element_spacing * lam,
                       centroid - ris[q], center=ris[q])
        for q in range(Q))
    return GeometryRealization(sats, ris, users, serving, rhs, tris)


def steering_vector(spec: SurfaceSpec, direction: Sequence[float], lam: float) -> np.ndarray:
    """Array response ``exp(+j 2pi/lam <p_n, direction>)`` of ``spec``."""
    u = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return np.exp(1j * (2 * np.pi / lam) * (spec.element_positions @ u))
