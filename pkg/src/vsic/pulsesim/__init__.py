"""Pulse-sequence language and ground-state spin simulator."""

from .dsl import (Angle, Duration, Laser, MwPulse, ParseError, PulseSequence, Readout, SweepDecl,
                  Symbol, Wait, format_sequence, parse_sequence)
from .experiments import (InitializationResult, WitnessResult, bundled_sequence,
                          initialization_experiment, odmr, zfs_sign_witness)
from .simulate import (NuclearCoupling, SequenceSimulator, SimConfig, eseem_quantum_oracle,
                       hahn_echo_trace, mw_unitary, rabi_frequency, simulate_sequence)

__all__ = [
    "Angle", "Duration", "Laser", "MwPulse", "ParseError", "PulseSequence", "Readout", "SweepDecl",
    "Symbol", "Wait", "format_sequence", "parse_sequence", "InitializationResult", "WitnessResult",
    "bundled_sequence", "initialization_experiment", "odmr", "zfs_sign_witness", "NuclearCoupling",
    "SequenceSimulator", "SimConfig", "eseem_quantum_oracle", "hahn_echo_trace", "mw_unitary",
    "rabi_frequency", "simulate_sequence",
]
