"""Holographic-MIMO LEO downlink simulator with surface-assisted base stations."""

from .channel import (ChannelSet, NoiseModel, free_space_gain, los_channel, noise_power,
                      rician_channel, synthesize_channels)
from .evaluation import (SweepResult, TrialResult, run_sweep, run_trial, sinr_per_user,
                         sum_rate)
from .optimizer import (BeamformerState, HolographicMMSEBeamformer, OptimizationTrace, mse,
                        optimize, update_holographic_weights, update_precoder,
                        update_tris_phases, wiener_precoder)
from .scenario import (GeometryRealization, ScenarioConfig, ScenarioError, SurfaceSpec,
                       build_geometry, load_scenario, steering_vector, wavelength)
from .surfaces import (assemble_holographic_matrix, assemble_tris_matrix, effective_channel,
                       reference_wave_matrix)

__version__ = "0.1.0"
