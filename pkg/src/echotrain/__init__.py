"""Simulation and analysis of self-stimulated spin-echo trains in a spin ensemble coupled to a cavity."""

from .model import (
    Distribution,
    PhysicalParams,
    Pulse,
    PulseSequence,
    SpinEnsemble,
    cooperativity,
    grid_ensemble,
    hahn_sequence,
    lattice_ensemble,
    linewidth_from_T2,
    quantile_ensemble,
    revival_time,
    sample_ensemble,
    two_pi_hz,
)

__version__ = "0.1.0"
