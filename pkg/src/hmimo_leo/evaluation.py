"""Link metrics and the Monte Carlo trial / sweep drivers."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channel import noise_power, synthesize_channels
from .optimizer import HolographicMMSEBeamformer
from .scenario import CHANNEL_CASES, ScenarioConfig, ScenarioError, build_geometry
from .surfaces import reference_wave_matrix


def sinr_per_user(H_eff: np.ndarray, F: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-user SINR treating column ``i`` of ``F`` as user ``i``'s stream.

    Interference-free users with zero noise get ``inf``.
    """
    T = np.asarray(H_eff) @ np.asarray(F)
    if T.shape[0] != T.shape[1]:
        raise ValueError(f"H_eff F must be square, got {T.shape}")
    p = np.abs(T) ** 2
    signal = np.diag(p).copy()
    interference = p.sum(axis=1) - signal + sigma2
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = signal / interference
    sinr[signal == 0] = 0.0
    return sinr


def sum_rate(sinr: Iterable[float]) -> float:
    """Sum of ``log2(1 + sinr_i)`` in bit/s/Hz."""
    sinr = np.asarray(list(sinr), dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR values must be non-negative")
    return float(np.sum(np.log2(1.0 + sinr)))


@dataclass(frozen=True)
class TrialResult:
    master_seed: int
    trial: int
    channel_case: str
    N: int
    K: int
    final_mse: float
    per_user_sinr: tuple[float, ...]
    sum_rate_se: float
    throughput: float
    iterations: int
    termination: str
    degenerate: bool
    transmit_power: float
    wall_time: float = field(compare=False, default=0.0)


def trial_streams(master_seed: int, trial_index: int) -> list[np.random.Generator]:
    """Independent (geometry, channel, initialisation) streams of a trial.

    They depend only on the seed pair, so every sweep cell sharing a trial
    index shares its geometry and fading draws.
    """
    seq = np.random.SeedSequence([master_seed, trial_index])
    return [np.random.default_rng(s) for s in seq.spawn(3)]


def run_trial(config: ScenarioConfig, trial_index: int, return_model: bool = False):
    """Build geometry and channels, optimise and evaluate one trial."""
    start = time.perf_counter()
    rng_geo, rng_ch, rng_init = trial_streams(config.master_seed, trial_index)
    geometry = build_geometry(config, rng_geo)
    channels = synthesize_channels(config, geometry, rng_ch)
    refs = [reference_wave_matrix(spec, config.guided_index, config.wavelength)
            for spec in geometry.rhs]
    sigma2 = noise_power(config)
    model = HolographicMMSEBeamformer(
        total_power=config.total_power,
        noise_power=sigma2,
        receive_gain=config.receive_gain,
        max_outer_iters=config.max_outer_iters,
        rel_tol=config.rel_tol,
        bisection_tol=config.bisection_tol,
        random_state=rng_init,
    ).fit(channels, refs)
    sinr = model.sinr(channels)
    rate = sum_rate(sinr)
    result = TrialResult(
        master_seed=config.master_seed,
        trial=trial_index,
        channel_case=config.channel_case,
        N=config.rhs_elements,
        K=config.tris_elements,
        final_mse=model.trace_.mse[-1],
        per_user_sinr=tuple(float(v) for v in sinr),
        sum_rate_se=rate,
        throughput=config.bandwidth * rate,
        iterations=model.n_iter_,
        termination=model.trace_.termination,
        degenerate=model.degenerate_,
        transmit_power=float(np.vdot(model.precoder_, model.precoder_).real),
        wall_time=time.perf_counter() - start,
    )
    if return_model:
        return result, model, channels
    return result


def _run_one(args):
    config, index = args
    return run_trial(config, index)


def run_trials(config: ScenarioConfig, trials: int, jobs: int = 1) -> list[TrialResult]:
    tasks = [(config, i) for i in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    # fsum is exactly rounded, so the result does not depend on trial order.
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))


@dataclass(frozen=True)
class SweepCell:
    case: str
    N: int
    K: int
    trials: int
    mean_sum_rate_se: float
    std_sum_rate_se: float
    mean_throughput: float


@dataclass
class SweepResult:
    cells: list[SweepCell]
    trials: list[TrialResult]

    def cell(self, case: str, n: int) -> SweepCell:
        for c in self.cells:
            if c.case == case and c.N == n:
                return c
        raise KeyError((case, n))

    def rates(self, case: str, n: int) -> np.ndarray:
        """Per-trial sum-rates of one cell, ordered by trial index."""
        rows = sorted((t for t in self.trials if t.channel_case == case and t.N == n),
                      key=lambda t: t.trial)
        return np.array([t.sum_rate_se for t in rows])


def aggregate(case: str, n: int, k: int, results: Sequence[TrialResult]) -> SweepCell:
    mean, std = _mean_std([r.sum_rate_se for r in results])
    tput, _ = _mean_std([r.throughput for r in results])
    return SweepCell(case, n, k, len(results), mean, std, tput)


def run_sweep(config: ScenarioConfig, element_counts: Sequence[int],
              cases: Sequence[str], trials: int, jobs: int = 1) -> SweepResult:
    """Run ``trials`` paired trials for every ``(N = K, case)`` cell."""
    if not element_counts:
        raise ScenarioError("element_counts must not be empty", "elements")
    if trials < 1:
        raise ScenarioError("trials must be >= 1", "trials")
    cells, rows = [], []
    for n in element_counts:
        for case in cases:
            if str(case).upper() not in CHANNEL_CASES:
                raise ScenarioError(f"unknown channel case {case!r}", "cases")
            cell_cfg = config.replace(rhs_elements=int(n), tris_elements=int(n),
                                      channel_case=str(case).upper())
            results = run_trials(cell_cfg, trials, jobs)
            cells.append(aggregate(cell_cfg.channel_case, int(n), int(n), results))
            rows.extend(results)
    return SweepResult(cells, rows)
