"""Reconfigurable aperture models and the end-to-end effective channel.

The satellite aperture maps ``L`` feed signals to ``N`` radiating elements
through fixed guided-wave propagation followed by a tunable unit-modulus
weight per element. The ground surface applies one unit-modulus phase per
element.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .scenario import SurfaceSpec


def reference_wave_matrix(spec: SurfaceSpec, guided_index: float, lam: float) -> np.ndarray:
    """Guided-wave phases from every feed to every element, shape (N, L)."""
    if spec.num_feeds == 0:
        raise ValueError("surface has no feeds")
    dist = np.linalg.norm(
        spec.element_positions[:, None, :] - spec.feed_positions[None, :, :], axis=-1)
    return np.exp(-2j * np.pi * guided_index * dist / lam)


def assemble_holographic_matrix(w: np.ndarray, refs: Sequence[np.ndarray]) -> np.ndarray:
    """Block-diagonal ``M`` with block ``s`` equal to ``diag(w_s) @ A_s``."""
    w = np.asarray(w)
    sizes = [a.shape[0] for a in refs]
    if w.ndim != 1 or w.size != sum(sizes):
        raise ValueError(f"weights of length {w.size} do not match {sum(sizes)} elements")
    blocks, start = [], 0
    for a, n in zip(refs, sizes):
        blocks.append(w[start:start + n, None] * a)
        start += n
    return block_diag(*blocks)


def assemble_tris_matrix(theta: np.ndarray, size: int | None = None) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or (size is not None and theta.size != size):
        raise ValueError(f"expected {size} phases, got shape {theta.shape}")
    return np.diag(np.exp(1j * theta))


def cascaded_channel(channels, upsilon) -> np.ndarray:
    """``H_su @ diag(upsilon) @ H_hs + H_hu``, shape (I, S*N).

    ``upsilon`` may be the diagonal of the surface matrix or the full matrix.
    """
    upsilon = np.asarray(upsilon)
    if upsilon.ndim == 2:
        upsilon = np.diagonal(upsilon)
    if upsilon.size != channels.H_su.shape[1]:
        raise ValueError("surface phases do not match H_su")
    return (channels.H_su * upsilon) @ channels.H_hs + channels.H_hu


def effective_channel(channels, upsilon, M: np.ndarray) -> np.ndarray:
    """Feed-to-user channel ``(H_su Y H_hs + H_hu) M``, shape (I, S*L)."""
    G = cascaded_channel(channels, upsilon)
    if M.shape[0] != G.shape[1]:
        raise ValueError(f"M has {M.shape[0]} rows, channel has {G.shape[1]} columns")
    return G @ M
