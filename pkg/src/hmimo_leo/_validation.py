"""Input checks shared by the estimator and the functional API."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .channel import ChannelSet


def check_channel_set(channels) -> ChannelSet:
    """Accept a :class:`ChannelSet` or a ``(H_hs, H_su, H_hu)`` triple."""
    if isinstance(channels, ChannelSet):
        return channels
    try:
        H_hs, H_su, H_hu = channels
    except (TypeError, ValueError):
        raise TypeError("expected a ChannelSet or a (H_hs, H_su, H_hu) triple") from None
    return ChannelSet(*(np.asarray(m, dtype=complex) for m in (H_hs, H_su, H_hu)))


def check_reference_waves(refs: Sequence[np.ndarray], n_elements: int) -> tuple[np.ndarray, ...]:
    """Validate per-satellite (N, L) reference-wave matrices against the
    total element count ``n_elements``."""
    refs = tuple(np.asarray(a, dtype=complex) for a in refs)
    if not refs or any(a.ndim != 2 or a.shape[1] == 0 for a in refs):
        raise ValueError("reference waves must be a non-empty list of (N, L) matrices")
    total = sum(a.shape[0] for a in refs)
    if total != n_elements:
        raise ValueError(f"reference waves cover {total} elements, channel has {n_elements}")
    return refs
